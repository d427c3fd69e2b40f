use gps_core::generator::GeneratorSpec;
use gps_core::mmd::Dataset;
use gps_core::obsmodels::ObservationModel;
use gps_core::synthdata::scissors;
use gps_core::trainer::{fit, OptimizerKind, TrainConfig};

fn setup() -> (Dataset, GeneratorSpec, ObservationModel) {
    let d = scissors(300, 5).unwrap().data;
    let ds = Dataset::new(d.y, Some(d.x), None).unwrap();
    (ds, GeneratorSpec::regression(2), ObservationModel::GaussianLinear { p: 1 })
}

fn bits(r: &gps_core::trainer::FitResult) -> Vec<u64> {
    r.params.params.flatten().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn fits_are_reproducible_and_seed_dependent() {
    let (data, spec, model) = setup();
    let cfg = TrainConfig {
        epochs: 3,
        optimizer: OptimizerKind::adam(),
        ..TrainConfig::default()
    };
    let a = fit(&data, &spec, &model, &cfg).unwrap();
    let b = fit(&data, &spec, &model, &cfg).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.trace.objectives, b.trace.objectives);
    let c = fit(&data, &spec, &model, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn smoothed_objective_ends_below_the_first_step() {
    let (data, spec, model) = setup();
    let cfg = TrainConfig {
        epochs: 30,
        optimizer: OptimizerKind::adam(),
        ..TrainConfig::default()
    };
    let r = fit(&data, &spec, &model, &cfg).unwrap();
    assert_eq!(r.trace.objectives.len(), 30 * 3);
    let smooth = r.trace.smoothed(20);
    assert!(
        *smooth.last().unwrap() <= r.trace.objectives[0],
        "final {} vs first {}",
        smooth.last().unwrap(),
        r.trace.objectives[0]
    );
}
