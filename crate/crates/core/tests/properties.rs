//! Randomized invariants.

use std::sync::Arc;

use interface_lab_core::green::{green_matrix, mu_sandwich_check};
use interface_lab_core::lattice::{discretize, graph_distance, thomee_partition, DomainSpec};
use interface_lab_core::operators::{
    apply, precision, scaled_operator_lh, symbol_mu, Coefficients, GridFunction,
};
use interface_lab_core::scaling::{
    field_pairing, series_pairing, sobolev_norm_neg, sobolev_norm_pos_squared, EigenData,
    TestFunction,
};
use interface_lab_core::sparse::EnvelopeCholesky;
use proptest::prelude::*;

fn domain_strategy() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        Just(DomainSpec::Interval),
        Just(DomainSpec::unit_box(2)),
        (0.3f64..1.0).prop_map(|r| DomainSpec::ball(2, r)),
        (0.6f64..1.0).prop_map(|r| DomainSpec::ball(3, r)),
    ]
}

fn kappa_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|a| vec![a]),
        (0.1f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| vec![a, b]),
        (0.0f64..1.0, 0.1f64..3.0).prop_map(|(a, b)| vec![a, b]),
    ]
}

fn small_n(spec: &DomainSpec) -> std::ops::Range<usize> {
    match spec.dimension() {
        1 => 8..40,
        2 => 8..16,
        _ => 8..10,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn precision_is_symmetric_positive_definite(
        (spec, n) in domain_strategy().prop_flat_map(|s| { let r = small_n(&s); (Just(s), r) }),
        k in kappa_strategy(),
    ) {
        let dom = Arc::new(discretize(&spec, n, k.len()).unwrap());
        let op = precision(&dom, &Coefficients::new(k).unwrap()).unwrap();
        prop_assert_eq!(op.matrix().asymmetry(), 0.0);
        prop_assert!(EnvelopeCholesky::factor(op.matrix()).is_ok());
    }

    #[test]
    fn scaled_operator_is_rescaled_precision(
        (spec, n) in domain_strategy().prop_flat_map(|s| { let r = small_n(&s); (Just(s), r) }),
        k in kappa_strategy(),
    ) {
        let dom = Arc::new(discretize(&spec, n, k.len()).unwrap());
        let c = Coefficients::new(k).unwrap();
        let j = precision(&dom, &c).unwrap();
        let l = scaled_operator_lh(&dom, &c).unwrap();
        let s = 2.0 * spec.dimension() as f64 * (n * n) as f64;
        let diff = l.matrix().add_scaled(1.0, j.matrix(), -s);
        prop_assert!(diff.norm_inf() <= 1e-12 * l.matrix().norm_inf());
    }

    #[test]
    fn green_is_symmetric_and_positive_on_diagonal(n in 8usize..20, b in 0.0f64..2.0) {
        let dom = Arc::new(discretize(&DomainSpec::unit_box(2), n, 2).unwrap());
        let op = precision(&dom, &Coefficients::new(vec![1.0, b]).unwrap()).unwrap();
        let g = green_matrix(&op).unwrap();
        for i in 0..g.len() {
            prop_assert!(g[i][i] > 0.0);
            for j in 0..i {
                prop_assert!((g[i][j] - g[j][i]).abs() <= 1e-10 * g[i][i]);
            }
        }
    }

    #[test]
    fn quadratic_form_matches_symbol_energy(n in 8usize..24, seed in 0u64..1000) {
        // φᵀ J φ ≥ 0 and equals the energy of the zero-extended field
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dom = Arc::new(discretize(&DomainSpec::Interval, n, 2).unwrap());
        let op = precision(&dom, &Coefficients::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let phi: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jp = apply(&op, &GridFunction::new(phi.clone())).unwrap();
        let q: f64 = phi.iter().zip(&jp.values).map(|(a, b)| a * b).sum();
        // zero-extended φ on {0..N}: −Δφ(x) = φ(x) − (φ(x−1)+φ(x+1))/2
        let mut full = vec![0.0; n + 5];
        for (i, v) in phi.iter().enumerate() {
            full[dom.node(i)[0] as usize + 2] = *v;
        }
        let lap: Vec<f64> = (1..full.len() - 1).map(|x| full[x] - 0.5 * (full[x - 1] + full[x + 1])).collect();
        let grad: f64 = full.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).sum();
        let bil: f64 = lap.iter().map(|v| v * v).sum();
        prop_assert!((q - grad - bil).abs() <= 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn symbol_sandwich_holds(
        t in prop::collection::vec(-3.14159f64..3.14159, 3),
        n in 1usize..64,
    ) {
        prop_assert!(mu_sandwich_check(&t, n).holds());
        let mu = symbol_mu(&t);
        prop_assert!((0.0..=2.0).contains(&mu));
    }

    #[test]
    fn pairing_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dom = discretize(&DomainSpec::unit_box(2), 12, 1).unwrap();
        let f = TestFunction::bump(vec![0.5, 0.5], 0.4, 1.0);
        let p: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let lhs = field_pairing(&GridFunction::new(mix), &f, &dom).unwrap();
        let rhs = a * field_pairing(&GridFunction::new(p), &f, &dom).unwrap()
            + b * field_pairing(&GridFunction::new(q), &f, &dom).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn negative_sobolev_norm_decreases_in_s(
        coef in prop::collection::vec(-1.0f64..1.0, 1..40),
        s in 0.0f64..3.0,
        ds in 0.01f64..1.0,
    ) {
        let eig = EigenData::unit_box(2, 40).unwrap();
        let a = sobolev_norm_neg(&coef, s, &eig).unwrap().squared;
        let b = sobolev_norm_neg(&coef, s + ds, &eig).unwrap().squared;
        prop_assert!(b <= a);
    }

    #[test]
    fn sobolev_duality(
        field in prop::collection::vec(-1.0f64..1.0, 30),
        f in prop::collection::vec(-1.0f64..1.0, 30),
        s in 0.0f64..2.0,
    ) {
        let eig = EigenData::unit_box(2, 30).unwrap();
        let lhs = series_pairing(&field, &f).abs();
        let rhs = sobolev_norm_neg(&field, s, &eig).unwrap().squared.sqrt()
            * sobolev_norm_pos_squared(&f, s, &eig).sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn partition_blocks_are_disjoint_and_cover(r in 0.3f64..1.0, n in 8usize..24) {
        let spec = DomainSpec::ball(2, r);
        let h = 1.0 / n as f64;
        if let Ok(p) = thomee_partition(&spec, h, 2) {
            prop_assert_eq!(p.r_h.len() + p.b_h.len(), p.d_h.len());
            prop_assert_eq!(p.r_h_star.len() + p.b_h_star.len(), p.r_h.len());
            for z in p.b_h_star.iter() {
                prop_assert!(!p.r_h_star.contains(z));
                prop_assert!(p.b_h.iter().any(|b| graph_distance(z, b) <= 2));
            }
        }
    }

    #[test]
    fn dilation_preserves_integral(lambda in 0.1f64..1.0, c in -0.3f64..0.3) {
        let f = TestFunction::bump(vec![c, 0.1, -0.2], 0.4, 1.3);
        let a = f.integral().unwrap();
        let b = f.dilate(lambda).integral().unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        let x = [0.05, 0.02, -0.07];
        prop_assert!((f.dilate(lambda).eval(&x) - f.eval_dilated(&x, lambda)).abs() <= 1e-12 * lambda.powi(-3));
    }
}
