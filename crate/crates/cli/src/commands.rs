use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use gps_core::diffcore::DenseArray;
use gps_core::generator::sample_theta;
use gps_core::io::{self, Checkpoint, ExperimentConfig, PointProcessConfig, UqConfig};
use gps_core::obsmodels::ObservationModel;
use gps_core::plot;
use gps_core::pointproc::{self, IntensityMap};
use gps_core::synthdata::{self, ScenarioConfig};
use gps_core::trainer;
use gps_core::uq::{self, UQCReport};

use crate::inputs::{read_conditioning, Loaded};
use crate::{at, CliResult, Failure, PlotArgs, PlotKind, QueryArgs, RunArgs, SimulateArgs, UqcArgs};

fn read_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| at(path)(e.into()))?;
    ExperimentConfig::parse(&text).map_err(at(path))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn write(path: PathBuf, (header, rows): (Vec<String>, Vec<Vec<String>>)) -> CliResult<()> {
    Ok(io::write_table(&path, &header, &rows)?)
}

fn set_scenario_seed(s: &mut ScenarioConfig, value: u64) {
    match s {
        ScenarioConfig::Scissors { seed, .. }
        | ScenarioConfig::OutlierRegression { seed, .. }
        | ScenarioConfig::TwoBump { seed, .. }
        | ScenarioConfig::ClassBlobs { seed, .. } => *seed = value,
    }
}

/// Applies the shared run flags to a parsed config.
fn apply_run_flags(cfg: &mut ExperimentConfig, a: &RunArgs, seed_scenario: bool) -> CliResult<()> {
    if let Some(out) = &a.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = a.seed {
        match (&mut cfg.scenario, seed_scenario) {
            (Some(s), true) => set_scenario_seed(s, seed),
            (None, true) => return Err(Failure::usage("--seed for synth needs a scenario config")),
            _ => cfg.train.seed = seed,
        }
    }
    if let Some(k) = a.limit {
        match &mut cfg.data {
            Some(d) => d.limit = Some(k),
            None => return Err(Failure::usage("--limit applies to data files only")),
        }
    }
    if a.deterministic {
        cfg.train.deterministic = true;
    }
    Ok(())
}

pub fn synth(a: &RunArgs) -> CliResult<()> {
    let mut cfg = read_config(&a.config)?;
    apply_run_flags(&mut cfg, a, true)?;
    let scenario = cfg
        .scenario
        .clone()
        .ok_or_else(|| Failure::usage("synth needs a scenario section"))?;
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output_dir);
    let mut sidecar = json!({ "scenario": scenario });
    let input_dim = match &scenario {
        ScenarioConfig::Scissors { .. } => {
            let d = synthdata::scissors_with(&scenario)?;
            write(out.join("data.csv"), io::regression_table(&d.data.x, &d.data.y))?;
            0
        }
        ScenarioConfig::OutlierRegression { .. } => {
            let d = synthdata::outlier_regression(&scenario)?;
            write(out.join("data.csv"), io::regression_table(&d.data.x, &d.data.y))?;
            sidecar["beta_true"] = json!(d.beta_true);
            sidecar["outliers"] = json!(d.outlier_mask.iter().filter(|&&m| m).count());
            0
        }
        ScenarioConfig::TwoBump { .. } => {
            let p = synthdata::two_bump_points(&scenario)?;
            write(out.join("data.csv"), io::points_table(&p.points))?;
            sidecar["intensity_scale"] = json!(p.truth.scale);
            sidecar["expected_count"] = json!(p.truth.expected_count());
            0
        }
        ScenarioConfig::ClassBlobs { .. } => {
            let d = synthdata::class_blobs_with(&scenario)?;
            write(out.join("data.csv"), io::classification_table(&d.x, &d.labels))?;
            d.x.cols()
        }
    };
    let resolved = cfg.resolve(input_dim)?;
    if let (ScenarioConfig::TwoBump { .. }, Some(pp)) = (&scenario, &resolved.point_process) {
        let p = synthdata::two_bump_points(&scenario)?;
        write(out.join("truth.csv"), grid_table(&IntensityMap::from_field(&p.truth, &pp.domain)))?;
    }
    io::write_json(&out.join("scenario.json"), &sidecar)?;
    io::write_json(&out.join("config.json"), &resolved)?;
    Ok(())
}

pub fn fit(a: &RunArgs) -> CliResult<()> {
    let mut cfg = read_config(&a.config)?;
    apply_run_flags(&mut cfg, a, false)?;
    cfg.validate()?;
    let data = Loaded::load(&cfg, &config_dir(&a.config))?;
    let resolved = cfg.resolve(data.input_dim())?;
    let model = resolved.model.expect("resolved model");
    let spec = resolved.generator.clone().expect("resolved generator");
    let domain = resolved.point_process.as_ref().map(|pp| pp.domain);
    let dataset = data.dataset(&model, domain.as_ref())?;
    let result = trainer::fit(&dataset, &spec, &model, &resolved.train)?;

    let out = PathBuf::from(&resolved.output_dir);
    let domain = domain.filter(|_| matches!(model, ObservationModel::PoissonCount { .. }));
    let ckpt = Checkpoint::new(result.params, spec, model, result.response_scale, domain, "checkpoint.bin")?;
    io::write_checkpoint(&out, &ckpt)?;
    write(out.join("trace.csv"), io::trace_table(&result.trace))?;
    io::write_json(&out.join("config.json"), &resolved)?;
    Ok(())
}

/// Settings shared by the checkpoint queries, resolved from flags over the
/// optional config's `uq` section.
fn uq_settings(
    config: Option<&PathBuf>,
    seed: Option<u64>,
    draws: Option<usize>,
    level: Option<f64>,
) -> CliResult<UqConfig> {
    let mut uq = match config {
        Some(p) => read_config(p)?.uq,
        None => UqConfig::default(),
    };
    if let Some(s) = seed {
        uq.seed = s;
    }
    if let Some(d) = draws {
        uq.draws = d;
    }
    if let Some(l) = level {
        uq.level = l;
    }
    let mut problems = Vec::new();
    if uq.draws == 0 {
        problems.push("draws must be positive".to_string());
    }
    if !(uq.level > 0.0 && uq.level < 1.0) {
        problems.push("level must lie in (0, 1)".to_string());
    }
    if problems.is_empty() {
        Ok(uq)
    } else {
        Err(gps_core::Error::InvalidConfig(problems).into())
    }
}

/// Conditioning rows for a checkpoint: none for unconditional generators,
/// the `--input` rows, or every cell centre of an intensity fit.
fn conditioning(ckpt: &Checkpoint, input: Option<&PathBuf>, limit: Option<usize>) -> CliResult<Option<DenseArray>> {
    let spec = ckpt.spec();
    if spec.cond_dim == 0 {
        if input.is_some() {
            return Err(Failure::usage("this generator takes no conditioning input"));
        }
        return Ok(None);
    }
    let domain = ckpt.manifest.domain.as_ref();
    match (input, domain) {
        (Some(p), _) => Ok(Some(read_conditioning(p, ckpt.model(), spec.cond_dim, domain, limit)?)),
        (None, Some(d)) => {
            let c = d.center_covariates();
            let n = limit.map_or(c.rows(), |k| k.min(c.rows()));
            Ok(Some(c.select_rows(&(0..n).collect::<Vec<_>>())))
        }
        (None, None) => Err(Failure::usage("this generator needs --input rows to condition on")),
    }
}

/// Parameter draws per conditioning row (a single unconditional block when
/// there are no rows).
fn draws_per_point(ckpt: &Checkpoint, cond: Option<&DenseArray>, uq: &UqConfig) -> CliResult<Vec<DenseArray>> {
    let rows: Vec<Option<&[f64]>> = match cond {
        None => vec![None],
        Some(c) => (0..c.rows()).map(|r| Some(c.row(r))).collect(),
    };
    rows.into_iter()
        .map(|c| {
            let set = sample_theta(
                &ckpt.params,
                ckpt.spec(),
                ckpt.model(),
                c,
                uq.draws,
                uq.seed,
                ckpt.response_scale(),
            )?;
            Ok(set.samples().clone())
        })
        .collect()
}

fn write_run_record(out: &Path, command: &str, fields: serde_json::Value) -> CliResult<()> {
    let mut record = json!({ "command": command });
    if let (Some(r), serde_json::Value::Object(f)) = (record.as_object_mut(), fields) {
        r.extend(f);
    }
    Ok(io::write_json(&out.join("run.json"), &record)?)
}

pub fn sample(a: &QueryArgs) -> CliResult<()> {
    let uq = uq_settings(a.config.as_ref(), a.seed, a.draws, a.level)?;
    let ckpt = io::read_checkpoint(&a.checkpoint).map_err(at(&a.checkpoint))?;
    let cond = conditioning(&ckpt, a.input.as_ref(), a.limit)?;
    let blocks = draws_per_point(&ckpt, cond.as_ref(), &uq)?;
    let names = ckpt.model().column_names();
    let table = if cond.is_some() {
        let mut data = Vec::new();
        let mut ids = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            data.extend_from_slice(b.data());
            ids.extend(std::iter::repeat(i).take(b.rows()));
        }
        let all = DenseArray::matrix(ids.len(), names.len(), data)?;
        io::draws_table(&names, &all, Some(&ids))
    } else {
        io::draws_table(&names, &blocks[0], None)
    };
    write(a.out.join("draws.csv"), table)?;
    write_run_record(
        &a.out,
        "sample",
        json!({
            "checkpoint": a.checkpoint,
            "input": a.input,
            "limit": a.limit,
            "uq": uq,
            "deterministic": a.deterministic,
        }),
    )
}

pub fn intervals(a: &QueryArgs) -> CliResult<()> {
    let uq = uq_settings(a.config.as_ref(), a.seed, a.draws, a.level)?;
    let ckpt = io::read_checkpoint(&a.checkpoint).map_err(at(&a.checkpoint))?;
    let cond = conditioning(&ckpt, a.input.as_ref(), a.limit)?;
    let blocks = draws_per_point(&ckpt, cond.as_ref(), &uq)?;
    let names = ckpt.model().column_names();
    let mut rows = Vec::new();
    for (i, b) in blocks.into_iter().enumerate() {
        let set = uq::UQSampleSet::new(b, *ckpt.model(), None)?;
        let means = set.column_means();
        for (j, name) in names.iter().enumerate() {
            let (lo, hi) = uq::marginal_interval(&set, j, uq.level)?;
            let label = if cond.is_some() { format!("{i}:{name}") } else { name.clone() };
            rows.push((label, uq.level, lo, hi, means[j]));
        }
    }
    write(a.out.join("intervals.csv"), io::intervals_table(&rows))?;
    write_run_record(
        &a.out,
        "intervals",
        json!({
            "checkpoint": a.checkpoint,
            "input": a.input,
            "limit": a.limit,
            "uq": uq,
            "deterministic": a.deterministic,
        }),
    )
}

/// Groups a probability-draw table by `point_id` (one group when absent).
fn probability_groups(table: &io::Table) -> CliResult<Vec<DenseArray>> {
    let id_col = table.header.iter().position(|h| h == "point_id");
    let prob_cols: Vec<usize> = (0..table.header.len()).filter(|&c| Some(c) != id_col).collect();
    if prob_cols.is_empty() {
        return Err(gps_core::Error::Csv("probability table has no class columns".into()).into());
    }
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in 0..table.rows() {
        let id = match id_col {
            Some(c) => {
                let v = table.values.get(r, c);
                if !(v >= 0.0 && v.fract() == 0.0) {
                    return Err(gps_core::Error::Csv(format!("row {}: point_id {v} is not an index", r + 1)).into());
                }
                v as u64
            }
            None => 0,
        };
        groups
            .entry(id)
            .or_default()
            .extend(prob_cols.iter().map(|&c| table.values.get(r, c)));
    }
    groups
        .into_values()
        .map(|d| Ok(DenseArray::matrix(d.len() / prob_cols.len(), prob_cols.len(), d)?))
        .collect()
}

pub fn uqc(a: &UqcArgs) -> CliResult<()> {
    let uq = uq_settings(a.config.as_ref(), a.seed, a.draws, None)?;
    let reports: Vec<UQCReport> = match (&a.probs, &a.checkpoint) {
        (Some(p), None) => probability_groups(&io::read_table(p).map_err(at(p))?)?
            .iter()
            .map(uq::uqc)
            .collect::<gps_core::Result<_>>()?,
        (None, Some(c)) => {
            let ckpt = io::read_checkpoint(c).map_err(at(c))?;
            let input = a
                .input
                .as_ref()
                .ok_or_else(|| Failure::usage("uqc with --checkpoint needs --input"))?;
            let points = read_conditioning(input, ckpt.model(), ckpt.spec().cond_dim, None, a.limit)?;
            uq::uqc_at_points(&ckpt.params, ckpt.spec(), ckpt.model(), &points, uq.draws, uq.seed)?
        }
        _ => return Err(Failure::usage("give exactly one of --checkpoint or --probs")),
    };
    write(a.out.join("uqc.csv"), io::uqc_table(&reports))?;
    write_run_record(
        &a.out,
        "uqc",
        json!({
            "checkpoint": a.checkpoint,
            "probs": a.probs,
            "input": a.input,
            "limit": a.limit,
            "uq": uq,
            "deterministic": a.deterministic,
        }),
    )
}

/// Columns `x, y, intensity` at cell centres.
fn grid_table(map: &IntensityMap) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["x", "y", "intensity"].map(String::from).to_vec();
    let rows = map
        .domain
        .centers()
        .iter()
        .zip(&map.values)
        .map(|(c, v)| vec![io::format_real(c[0]), io::format_real(c[1]), io::format_real(*v)])
        .collect();
    (header, rows)
}

pub fn simulate_pp(a: &SimulateArgs) -> CliResult<()> {
    let ckpt = io::read_checkpoint(&a.checkpoint).map_err(at(&a.checkpoint))?;
    let domain = ckpt
        .manifest
        .domain
        .ok_or_else(|| Failure::usage("simulate-pp needs an intensity checkpoint"))?;
    let (mut pp, seed) = match &a.config {
        Some(p) => {
            let c = read_config(p)?;
            (c.point_process.unwrap_or_default(), c.uq.seed)
        }
        None => (PointProcessConfig::default(), 0),
    };
    pp.domain = domain;
    if let Some(n) = a.paths {
        pp.paths = n;
    }
    if let Some(n) = a.draws {
        pp.mean_draws = n;
    }
    let seed = a.seed.unwrap_or(seed);
    let mut problems = pp.domain.violations();
    if pp.mean_draws == 0 {
        problems.push("draws must be positive".into());
    }
    if !(pp.bound_factor >= 1.0 && pp.bound_factor.is_finite()) {
        problems.push("point_process.bound_factor must be at least 1".into());
    }
    if pp.bound_resolution == 0 {
        problems.push("point_process.bound_resolution must be positive".into());
    }
    if !problems.is_empty() {
        return Err(gps_core::Error::InvalidConfig(problems).into());
    }

    let map = pointproc::mean_intensity_map(&ckpt.params, ckpt.spec(), &domain, pp.mean_draws, seed)?;
    let bound = pointproc::dominating_rate(&map, &domain, pp.bound_resolution, pp.bound_factor);
    let patterns = pointproc::thin_replicates(&map, &domain, bound, pp.paths, seed)?;
    let header = ["path", "x", "y"].map(String::from).to_vec();
    let rows = patterns
        .iter()
        .enumerate()
        .flat_map(|(k, pts)| {
            pts.iter()
                .map(move |p| vec![k.to_string(), io::format_real(p[0]), io::format_real(p[1])])
        })
        .collect();
    write(a.out.join("patterns.csv"), (header, rows))?;
    write(a.out.join("intensity.csv"), grid_table(&map))?;
    write_run_record(
        &a.out,
        "simulate-pp",
        json!({
            "checkpoint": a.checkpoint,
            "seed": seed,
            "point_process": pp,
            "dominating_rate": bound,
            "counts": patterns.iter().map(Vec::len).collect::<Vec<_>>(),
            "deterministic": a.deterministic,
        }),
    )
}

/// Reassembles a row-major grid from `x, y, value` rows.
fn heatmap_grid(xs: &[f64], ys: &[f64], vs: &[f64]) -> CliResult<(Vec<f64>, usize, usize)> {
    let uniq = |v: &[f64]| {
        let mut u = v.to_vec();
        u.sort_by(f64::total_cmp);
        u.dedup();
        u
    };
    let (ux, uy) = (uniq(xs), uniq(ys));
    if ux.len() * uy.len() != vs.len() {
        return Err(gps_core::Error::Csv(format!(
            "heatmap needs a full grid: {} x values by {} y values but {} rows",
            ux.len(),
            uy.len(),
            vs.len()
        ))
        .into());
    }
    let mut grid = vec![f64::NAN; vs.len()];
    for ((x, y), v) in xs.iter().zip(ys).zip(vs) {
        let ix = ux.partition_point(|u| u < x);
        let iy = uy.partition_point(|u| u < y);
        grid[iy * ux.len() + ix] = *v;
    }
    Ok((grid, ux.len(), uy.len()))
}

pub fn plot(a: &PlotArgs) -> CliResult<()> {
    let t = io::read_table(&a.input).map_err(at(&a.input))?;
    let title = a
        .title
        .clone()
        .unwrap_or_else(|| a.input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()));
    let pick = |name: Option<&String>, fallback: usize| -> CliResult<String> {
        match name {
            Some(n) => Ok(n.clone()),
            None => t
                .header
                .get(fallback)
                .cloned()
                .ok_or_else(|| Failure::usage(format!("input has fewer than {} columns", fallback + 1))),
        }
    };
    let svg = match a.kind {
        PlotKind::Scatter => {
            let (cx, cy) = (pick(a.x.as_ref(), 0)?, pick(a.y.as_ref(), 1)?);
            let (xs, ys) = (t.column(&cx)?, t.column(&cy)?);
            let pts: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
            plot::scatter_svg(&pts, &title, &cx, &cy)
        }
        PlotKind::Histogram => {
            let default = usize::from(t.header.first().is_some_and(|h| h == "point_id"));
            let c = pick(a.column.as_ref(), default)?;
            plot::histogram_svg(&t.column(&c)?, a.bins, &title, &c)
        }
        PlotKind::Heatmap => {
            let c = pick(a.column.as_ref(), t.header.len().saturating_sub(1))?;
            let (grid, nx, ny) = heatmap_grid(&t.column("x")?, &t.column("y")?, &t.column(&c)?)?;
            plot::heatmap_svg(&grid, nx, ny, &title)
        }
    };
    Ok(io::write_atomic(&a.out, svg.as_bytes())?)
}
