use super::{NodeId, ParamSet, Tape};
use crate::error::Result;

/// Outcome of comparing tape gradients with central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// One entry per scalar coordinate, in [`ParamSet::flatten`] order.
    pub coordinates: Vec<CoordinateCheck>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Index into `coordinates` of the worst relative error.
    pub worst: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct CoordinateCheck {
    pub param: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`
/// so that near-zero gradients are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

/// Checks the gradient of a deterministic scalar function of `params`.
///
/// `f` must build its loss on the supplied tape from the registered
/// parameter nodes and return the loss node. Any randomness has to be
/// drawn beforehand and captured by the closure.
pub fn grad_check<F>(f: F, params: &ParamSet, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[(String, NodeId)]) -> Result<NodeId>,
{
    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let nodes = tape.params(p);
        let loss = f(&mut tape, &nodes)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut tape = Tape::new();
    let nodes = tape.params(params);
    let loss = f(&mut tape, &nodes)?;
    let analytic = tape.backward(loss)?.flatten();

    let base = params.flatten();
    let names: Vec<(String, usize)> = params
        .iter()
        .flat_map(|(name, v)| (0..v.len()).map(move |i| (name.clone(), i)))
        .collect();

    let mut coordinates = Vec::with_capacity(base.len());
    let mut shifted = base.clone();
    for (k, (name, offset)) in names.into_iter().enumerate() {
        shifted[k] = base[k] + h;
        let plus = eval(&params.with_flat(&shifted)?)?;
        shifted[k] = base[k] - h;
        let minus = eval(&params.with_flat(&shifted)?)?;
        shifted[k] = base[k];

        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[k];
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        coordinates.push(CoordinateCheck {
            param: name,
            offset,
            analytic: a,
            numeric,
            rel_error: (a - numeric).abs() / denom,
        });
    }

    let worst = coordinates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.rel_error.total_cmp(&b.1.rel_error))
        .map(|(i, _)| i);
    let max_rel_error = worst.map_or(0.0, |i| coordinates[i].rel_error);
    let max_abs_error = coordinates
        .iter()
        .map(|c| (c.analytic - c.numeric).abs())
        .fold(0.0, f64::max);
    Ok(GradCheckReport {
        coordinates,
        max_rel_error,
        max_abs_error,
        worst,
        tolerance: tol,
        passed: max_rel_error < tol,
    })
}
