use gps_core::generator::{Activation, GeneratorParams, GeneratorSpec};
use gps_core::pointproc::{discretize, mean_intensity_map, thin_replicates, Domain2D, IntensityField};
use gps_core::synthdata::two_bump_intensity;
use proptest::prelude::*;

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Composite Simpson rule on the unit square with `k` (even) intervals per axis.
fn simpson<F: Fn(f64, f64) -> f64>(f: F, k: usize) -> f64 {
    let h = 1.0 / k as f64;
    let w = |i: usize| if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    let mut total = 0.0;
    for i in 0..=k {
        for j in 0..=k {
            total += w(i) * w(j) * f(i as f64 * h, j as f64 * h);
        }
    }
    total * h * h / 9.0
}

#[test]
fn homogeneous_counts_have_poisson_moments() {
    let domain = Domain2D::unit_square(1, 1);
    let field = |_: [f64; 2]| 50.0;
    let patterns = thin_replicates(&field, &domain, 60.0, 200, 3).unwrap();
    let counts: Vec<f64> = patterns.iter().map(|p| p.len() as f64).collect();
    let (m, v) = mean_var(&counts);
    assert!((m - 50.0).abs() < 4.0 * (50.0f64 / 200.0).sqrt(), "mean {m}");
    // sd of a Poisson sample variance: sqrt((2 lambda^2 + lambda) / (n - 1))
    assert!((v - 50.0).abs() < 4.0 * ((2.0 * 2500.0 + 50.0) / 199.0f64).sqrt(), "variance {v}");
    assert!(patterns.iter().flatten().all(|s| domain.contains(*s)));
}

#[test]
fn two_bump_thinning_matches_quadrature() {
    let truth = two_bump_intensity();
    let integral = simpson(|x, y| truth.intensity([x, y]), 400);
    assert!((truth.expected_count() - integral).abs() < 1e-3 * integral);
    let domain = Domain2D::unit_square(1, 1);
    let counts: Vec<f64> = thin_replicates(&truth, &domain, truth.sup(), 200, 9)
        .unwrap()
        .iter()
        .map(|p| p.len() as f64)
        .collect();
    let (m, _) = mean_var(&counts);
    assert!((m - integral).abs() < 4.0 * (integral / 200.0).sqrt(), "mean count {m}, integral {integral}");
}

#[test]
fn mean_intensity_is_positive_and_finite() {
    let spec = GeneratorSpec {
        noise_dim: 2,
        cond_dim: 2,
        hidden_sizes: vec![8],
        out_dim: 1,
        activation: Activation::Tanh,
    };
    for seed in 0..5 {
        let params = GeneratorParams::init(&spec, seed).unwrap();
        let map = mean_intensity_map(&params, &spec, &Domain2D::unit_square(6, 4), 200, seed).unwrap();
        assert_eq!(map.values.len(), 24);
        assert!(map.values.iter().all(|&v| v > 0.0 && v.is_finite()));
    }
}

proptest! {
    #[test]
    fn discretizing_conserves_points(
        pts in prop::collection::vec((0.0f64..=2.0, -1.0f64..=1.0), 0..300),
        gx in 1usize..12,
        gy in 1usize..12,
    ) {
        let domain = Domain2D::new(0.0, 2.0, -1.0, 1.0, gx, gy).unwrap();
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let c = discretize(&pts, &domain).unwrap();
        prop_assert_eq!(c.total(), pts.len() as u64);
        prop_assert_eq!(c.counts.len(), gx * gy);
    }
}
