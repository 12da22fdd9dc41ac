//! Monte Carlo cross-checks of samplers against deterministic variances.

use std::sync::Arc;

use interface_lab_core::green::green_matrix;
use interface_lab_core::lattice::{discretize, DomainSpec};
use interface_lab_core::operators::{precision, Coefficients};
use interface_lab_core::sampler::{empirical_covariance, sample, sample_bridge_dgff_1d};
use interface_lab_core::scaling::{
    field_pairing, gff_series_sample, interpolate_path_1d, series_pairing, sobolev_norm_neg,
    variance_pairing_exact, EigenData, TestFunction,
};
use interface_lab_core::stats::{ks_test_normal, mean, std_error, variance};

#[test]
fn exact_variance_agrees_with_sampled_pairings() {
    let dom = Arc::new(discretize(&DomainSpec::ball(2, 1.0), 16, 2).unwrap());
    let op = precision(&dom, &Coefficients::new(vec![1.0, 1.0]).unwrap()).unwrap();
    let f = TestFunction::bump(vec![0.1, 0.0], 0.6, 1.0);
    let exact = variance_pairing_exact(&op, &f).unwrap();
    let batch = sample(&op, 10_000, 11).unwrap();
    let pairs: Vec<f64> = batch
        .samples
        .iter()
        .map(|s| field_pairing(s, &f, &dom).unwrap())
        .collect();
    let v = variance(&pairs);
    let se = exact * (2.0 / (pairs.len() as f64 - 1.0)).sqrt();
    assert!((v - exact).abs() <= 4.0 * se, "{v} {exact} {se}");
}

#[test]
fn bridge_midpoint_variance_is_a_quarter() {
    let n = 256;
    let batch = sample_bridge_dgff_1d(n, 10_000, 2024).unwrap();
    let mid: Vec<f64> = batch
        .samples
        .iter()
        .map(|s| interpolate_path_1d(s, &batch.domain).unwrap().eval(0.5))
        .collect();
    let v = variance(&mid);
    let se = 0.25 * (2.0 / (mid.len() as f64 - 1.0)).sqrt();
    assert!((v - 0.25).abs() <= 4.0 * se, "{v}");
}

#[test]
fn wiener_series_moments() {
    let eig = EigenData::unit_box(2, 200).unwrap();
    let draws = 10_000;
    // E‖Ψ‖²_{−s} = Σ λ_j^{−1−s} at s = d/2
    let s = 1.0;
    let want: f64 = eig.modes.iter().map(|m| m.lambda.powf(-1.0 - s)).sum();
    let f = TestFunction::bump(vec![0.4, 0.55], 0.3, 1.0);
    let fc = eig.coefficients(&f).unwrap();
    let var_want = sobolev_norm_neg(&fc, 1.0, &eig).unwrap().squared;
    let mut norms = Vec::with_capacity(draws);
    let mut pairs = Vec::with_capacity(draws);
    for seed in 0..draws as u64 {
        let c = gff_series_sample(&eig, eig.len(), seed).unwrap();
        norms.push(sobolev_norm_neg(&c, s, &eig).unwrap().squared);
        pairs.push(series_pairing(&c, &fc));
    }
    assert!(
        (mean(&norms) - want).abs() <= 0.05 * want,
        "{} {want}",
        mean(&norms)
    );
    assert!((variance(&pairs) - var_want).abs() <= 0.05 * var_want);
}

#[test]
fn single_mode_series_is_normal() {
    let eig = EigenData::unit_box(1, 1).unwrap();
    let scale = eig.modes[0].lambda.sqrt();
    let x: Vec<f64> = (0..5000)
        .map(|seed| gff_series_sample(&eig, 1, seed).unwrap()[0] * scale)
        .collect();
    assert!(ks_test_normal(&x).p_value > 0.01);
    assert!(mean(&x).abs() < 4.0 * std_error(&x));
}

#[test]
fn sampled_covariances_match_green_in_1d() {
    let dom = Arc::new(discretize(&DomainSpec::Interval, 24, 2).unwrap());
    let op = precision(&dom, &Coefficients::new(vec![1.0, 1.0]).unwrap()).unwrap();
    let g = green_matrix(&op).unwrap();
    let m = 10_000;
    let batch = sample(&op, m, 5).unwrap();
    let pairs: Vec<(usize, usize)> = (0..dom.len())
        .flat_map(|i| (i..dom.len()).map(move |j| (i, j)))
        .collect();
    let cov = empirical_covariance(&batch, &pairs).unwrap();
    let bad = pairs
        .iter()
        .zip(&cov)
        .filter(|(&(i, j), &c)| {
            let se = ((g[i][i] * g[j][j] + g[i][j] * g[i][j]) / m as f64).sqrt();
            (c - g[i][j]).abs() > 4.0 * se
        })
        .count();
    assert!(
        bad as f64 <= 0.01 * pairs.len() as f64,
        "{bad} of {}",
        pairs.len()
    );
}
