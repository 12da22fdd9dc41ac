//! Static checks of a configuration; nothing here solves or samples.

use interface_lab_core::lattice::{resolution_from_spacing, DomainSpec};
use interface_lab_core::operators::Coefficients;
use interface_lab_core::scaling::TestFunction;

use crate::config::{BridgeSampler, ExperimentConfig, ExperimentKind};

/// Human-readable problems with `cfg`; empty when the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut diags = Vec::new();
    let mut push = |m: String| diags.push(m);
    let kind = cfg.experiment;

    let order = match Coefficients::new(cfg.kappa.clone()) {
        Ok(c) => c.order(),
        Err(e) => {
            push(format!("kappa: {e}"));
            cfg.kappa.len().max(1)
        }
    };
    if let Some(d) = &cfg.domain {
        if let Err(e) = d.validate() {
            push(format!("domain: {e}"));
        }
    }
    if let Some(f) = &cfg.test_function {
        if let Err(e) = f.validate() {
            push(format!("test_function: {e}"));
        }
        if let Some(d) = &cfg.domain {
            if f.dim() != d.dimension() {
                push(format!(
                    "test_function has dimension {} but the domain has dimension {}",
                    f.dim(),
                    d.dimension()
                ));
            }
        }
    }
    check_tolerances(cfg, &mut push);
    check_unused(cfg, &mut push);

    let needs_domain = |push: &mut dyn FnMut(String)| {
        if cfg.domain.is_none() {
            push(format!("{kind} requires `domain`"));
        }
    };
    let needs_test_function = |push: &mut dyn FnMut(String)| {
        if cfg.test_function.is_none() {
            push(format!("{kind} requires `test_function`"));
        }
    };

    match kind {
        ExperimentKind::Green => {
            needs_domain(&mut push);
            check_n_grid(cfg, order, false, &mut push);
            if let (Some(src), Some(d)) = (&cfg.source, &cfg.domain) {
                if src.len() != d.dimension() {
                    push(format!(
                        "source has {} coordinates, domain dimension is {}",
                        src.len(),
                        d.dimension()
                    ));
                } else if !d.contains(src) {
                    push("source lies outside the domain".into());
                }
            }
        }
        ExperimentKind::Sample => {
            needs_domain(&mut push);
            check_n_grid(cfg, order, false, &mut push);
            if cfg.n.len() > 1 {
                push("sample takes a single resolution in `n`".into());
            }
            check_count(cfg, &mut push);
        }
        ExperimentKind::VarianceInfinite => {
            needs_test_function(&mut push);
            let d = cfg
                .domain
                .as_ref()
                .map(DomainSpec::dimension)
                .or(cfg.test_function.as_ref().map(TestFunction::dim));
            if let Some(d) = d {
                if d < 3 {
                    push("infinite-volume requires d ≥ 3".into());
                } else if !matches!(cfg.test_function, Some(TestFunction::Bump { .. })) || d != 3 {
                    push(
                        "the infinite-volume limit is available for a single bump in d = 3".into(),
                    );
                }
            }
            if let Err(e) = cfg.quadrature.validate() {
                push(format!("quadrature: {e}"));
            }
            check_n_grid(cfg, 1, true, &mut push);
        }
        ExperimentKind::VarianceFinite => {
            needs_domain(&mut push);
            needs_test_function(&mut push);
            check_n_grid(cfg, order, true, &mut push);
            if let Some(h) = cfg.h_ref {
                if resolution_from_spacing(h).is_err() {
                    push(format!("h_ref = {h} is not 1/N for a positive integer N"));
                }
            }
        }
        ExperimentKind::BesovScaling => {
            needs_test_function(&mut push);
            if cfg.lambdas.is_empty() {
                push("besov_scaling requires a non-empty `lambdas` list".into());
            }
            for &l in &cfg.lambdas {
                if !(l > 0.0 && l <= 1.0) {
                    push(format!("lambda = {l} must lie in (0, 1]"));
                }
            }
            if cfg.domain.is_none() {
                if let Some(f) = &cfg.test_function {
                    if f.dim() < 3 {
                        push(
                            "infinite-volume requires d ≥ 3 (give a `domain` for finite volume)"
                                .into(),
                        );
                    }
                }
                if let Err(e) = cfg.quadrature.validate() {
                    push(format!("quadrature: {e}"));
                }
                check_n_grid(cfg, 1, false, &mut push);
            } else {
                check_n_grid(cfg, order, false, &mut push);
            }
        }
        ExperimentKind::Bridge1d => {
            if let Some(d) = &cfg.domain {
                if *d != DomainSpec::Interval {
                    push("bridge_1d runs on the interval domain".into());
                }
            }
            check_n_grid(cfg, order, true, &mut push);
            check_count(cfg, &mut push);
            if cfg.bridge_sampler == BridgeSampler::Walk && cfg.kappa != [1.0] {
                push("bridge_sampler = \"walk\" requires kappa = [1.0]".into());
            }
            if cfg.oracle_steps == Some(0) {
                push("oracle_steps must be positive".into());
            }
        }
        ExperimentKind::ThomeeError => {
            needs_domain(&mut push);
            if let Some(d) = &cfg.domain {
                if !matches!(d, DomainSpec::Ball { .. }) {
                    push("thomee_error requires a ball domain".into());
                }
            }
            if cfg.h.len() < 2 {
                push("thomee_error requires at least two spacings in `h`".into());
            }
            check_h_grid(cfg, order, &mut push);
        }
        ExperimentKind::SpectralGap => {
            needs_domain(&mut push);
            if cfg.h.is_empty() {
                push("spectral_gap requires a non-empty `h` grid".into());
            }
            check_h_grid(cfg, order, &mut push);
        }
        ExperimentKind::SobolevGff => {
            match &cfg.domain {
                Some(DomainSpec::UnitBox { .. }) => {}
                _ => push("sobolev_gff requires a unit_box domain".into()),
            }
            if cfg.truncation == Some(0) {
                push("truncation must be positive".into());
            }
            if let Some(s) = cfg.sobolev_index {
                if !(s.is_finite() && s >= 0.0) {
                    push(format!("sobolev_index = {s} must be finite and >= 0"));
                }
            }
            check_count(cfg, &mut push);
        }
    }
    diags
}

fn check_count(cfg: &ExperimentConfig, push: &mut dyn FnMut(String)) {
    if let Some(c) = cfg.count {
        if c < 2 {
            push(format!("count = {c} must be at least 2"));
        }
    }
}

/// `increasing`: the grid is a convergence sweep and must be strictly increasing.
fn check_n_grid(
    cfg: &ExperimentConfig,
    order: usize,
    increasing: bool,
    push: &mut dyn FnMut(String),
) {
    if cfg.n.is_empty() {
        push(format!(
            "{} requires a non-empty resolution grid `n`",
            cfg.experiment
        ));
        return;
    }
    let walk =
        cfg.experiment == ExperimentKind::Bridge1d && cfg.bridge_sampler == BridgeSampler::Walk;
    let min = if walk { 4 } else { 4 * order };
    for &n in &cfg.n {
        if n < min {
            push(format!(
                "N = {n} is below the minimum resolution {min} for layer depth {order}"
            ));
        }
    }
    if increasing && cfg.n.windows(2).any(|w| w[1] <= w[0]) {
        push("n grid must be strictly increasing".into());
    }
}

fn check_h_grid(cfg: &ExperimentConfig, order: usize, push: &mut dyn FnMut(String)) {
    for &h in &cfg.h {
        if resolution_from_spacing(h).is_err() {
            push(format!("h = {h} is not 1/N for a positive integer N"));
        } else if let Some(d) = &cfg.domain {
            let max = d.diameter() / (4 * order) as f64;
            if h > max + 1e-15 {
                push(format!("h = {h} exceeds diam/(4K) = {max}"));
            }
        }
    }
    if cfg.h.windows(2).any(|w| !(w[1] < w[0])) {
        push("h grid must be strictly decreasing".into());
    }
}

fn check_tolerances(cfg: &ExperimentConfig, push: &mut dyn FnMut(String)) {
    let t = &cfg.tolerances;
    let positive = [
        ("rel_error", t.rel_error),
        ("ratio_max", t.ratio_max),
        ("sup_distance", t.sup_distance),
        ("stderr_multiple", t.stderr_multiple),
        ("pair_fraction", t.pair_fraction),
        ("ks_level", t.ks_level),
        ("path_max_rel", t.path_max_rel),
    ];
    for (name, v) in positive {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                push(format!("tolerances.{name} = {v} must be finite and > 0"));
            }
        }
    }
    for (name, v) in [("pair_fraction", t.pair_fraction), ("ks_level", t.ks_level)] {
        if let Some(v) = v {
            if v > 1.0 {
                push(format!("tolerances.{name} = {v} must be <= 1"));
            }
        }
    }
    if let Some(v) = t.slope_min {
        if !v.is_finite() {
            push("tolerances.slope_min must be finite".into());
        }
    }
}

/// Fields that the chosen experiment would silently ignore.
fn check_unused(cfg: &ExperimentConfig, push: &mut dyn FnMut(String)) {
    use ExperimentKind::*;
    let k = cfg.experiment;
    let set = [
        (
            "n",
            !cfg.n.is_empty(),
            !matches!(k, ThomeeError | SpectralGap | SobolevGff),
        ),
        (
            "h",
            !cfg.h.is_empty(),
            matches!(k, ThomeeError | SpectralGap),
        ),
        ("lambdas", !cfg.lambdas.is_empty(), k == BesovScaling),
        (
            "count",
            cfg.count.is_some(),
            matches!(k, Sample | Bridge1d | SobolevGff),
        ),
        ("h_ref", cfg.h_ref.is_some(), k == VarianceFinite),
        ("truncation", cfg.truncation.is_some(), k == SobolevGff),
        (
            "sobolev_index",
            cfg.sobolev_index.is_some(),
            k == SobolevGff,
        ),
        ("source", cfg.source.is_some(), k == Green),
        (
            "bridge_sampler",
            cfg.bridge_sampler != BridgeSampler::Exact,
            k == Bridge1d,
        ),
        ("oracle_steps", cfg.oracle_steps.is_some(), k == Bridge1d),
        (
            "test_function",
            cfg.test_function.is_some(),
            matches!(
                k,
                VarianceInfinite | VarianceFinite | BesovScaling | SobolevGff
            ),
        ),
    ];
    for (name, present, used) in set {
        if present && !used {
            push(format!("`{name}` is not used by {k}"));
        }
    }
}
