use gps_core::diffcore::DenseArray;
use gps_core::synthdata::{class_blobs, outlier_regression, scissors, ScenarioConfig};

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn nearest_neighbour_accuracy(train: &DenseArray, train_labels: &[usize], test: &DenseArray, test_labels: &[usize]) -> f64 {
    let hits = (0..test.rows())
        .filter(|&i| {
            let t = test.row(i);
            let best = (0..train.rows())
                .min_by(|&a, &b| {
                    let da = (train.get(a, 0) - t[0]).powi(2) + (train.get(a, 1) - t[1]).powi(2);
                    let db = (train.get(b, 0) - t[0]).powi(2) + (train.get(b, 1) - t[1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            train_labels[best] == test_labels[i]
        })
        .count();
    hits as f64 / test.rows() as f64
}

#[test]
fn scissors_moments() {
    let n = 10_000;
    let d = scissors(n, 12).unwrap();
    let x = d.data.x.column(0);
    let (mx, vx) = mean_var(&x);
    let (my, vy) = mean_var(&d.data.y);
    let se = (1.0 / n as f64).sqrt();
    assert!(mx.abs() < 4.0 * se && (vx - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    // Var y = 1 + 0.2^2
    assert!(my.abs() < 4.0 * (1.04 / n as f64).sqrt());
    assert!((vy - 1.04).abs() < 4.0 * (2.0 * 1.04f64.powi(2) / n as f64).sqrt());
    let up = d.gamma.iter().filter(|&&g| g).count() as f64 / n as f64;
    assert!((up - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    let cov = x.iter().zip(&d.data.y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    assert!(cov.abs() < 4.0 * (1.04 / n as f64).sqrt(), "slopes cancel: {cov}");
}

#[test]
fn outlier_design_correlation_and_count() {
    let d = outlier_regression(&ScenarioConfig::outliers(10_000, 3, 0.05, 8)).unwrap();
    assert_eq!(d.outlier_mask.iter().filter(|&&m| m).count(), 500);
    let (a, b) = (d.data.x.column(0), d.data.x.column(2));
    let r = a.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>() / 10_000.0;
    assert!((r - 0.5).abs() < 0.05, "correlation {r}");
}

#[test]
fn separated_blobs_are_nearly_separable() {
    let train = class_blobs(200, 3, 6.0, 1).unwrap();
    let test = class_blobs(100, 3, 6.0, 2).unwrap();
    let acc = nearest_neighbour_accuracy(&train.x, &train.labels, &test.x, &test.labels);
    assert!(acc >= 0.98, "accuracy {acc}");
}

#[test]
fn coincident_blobs_are_at_chance() {
    let train = class_blobs(200, 3, 0.0, 3).unwrap();
    let test = class_blobs(200, 3, 0.0, 4).unwrap();
    let acc = nearest_neighbour_accuracy(&train.x, &train.labels, &test.x, &test.labels);
    let se = (1.0 / 3.0 * 2.0 / 3.0 / 600.0f64).sqrt();
    assert!((acc - 1.0 / 3.0).abs() < 4.0 * se, "accuracy {acc}");
}
