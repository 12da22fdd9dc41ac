//! Dispatch of experiments to the core library and writing of their outputs.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use interface_lab_core::fdm::{error_table, spectral_gap_convergence, ManufacturedSolution};
use interface_lab_core::green::{green_column_index, green_infinite, green_matrix};
use interface_lab_core::lattice::{
    discretize, thomee_partition, write_atomic, DomainSpec, LatticeDomain,
};
use interface_lab_core::operators::{precision, Coefficients, SparseSymOperator};
use interface_lab_core::report::{ExperimentReport, Provenance, ReportPoint};
use interface_lab_core::sampler::{
    empirical_covariance, sample, sample_bridge_dgff_1d, SampleBatch,
};
use interface_lab_core::scaling::{
    besov_scaling_statistic, dense_bridge_max_mean, discrete_variance_fourier, gff_series_draw,
    green_interp_sup_distance_1d, interpolate_path_1d, limit_variance_finite,
    limit_variance_infinite, path_max_1d, series_pairing, sobolev_norm_neg, variance_pairing_exact,
    EigenData, TestFunction, VarianceSource,
};
use interface_lab_core::stats::{ks_test_normal, loglog_slope, mean, variance};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BridgeSampler, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Context};
use crate::validate::validate;

const DEFAULT_COUNT: usize = 1000;
const DEFAULT_H_REF: f64 = 1.0 / 128.0;
const DEFAULT_ORACLE_STEPS: usize = 4096;
const DEFAULT_TRUNCATION: usize = 200;
/// Offset separating the oracle's random streams from the sampler's.
const ORACLE_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// A finished run: the report plus every file written.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Named data file produced by an experiment.
struct DataFile {
    name: String,
    bytes: Vec<u8>,
}

struct Outputs {
    report: ExperimentReport,
    files: Vec<DataFile>,
}

impl Outputs {
    fn new(report: ExperimentReport) -> Self {
        Outputs {
            report,
            files: Vec::new(),
        }
    }

    fn add(
        &mut self,
        name: String,
        write: impl FnOnce(&mut Vec<u8>) -> interface_lab_core::Result<()>,
    ) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        write(&mut bytes).context(|| format!("writing {name}"))?;
        self.files.push(DataFile { name, bytes });
        Ok(())
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.files.push(DataFile {
            name: name.to_string(),
            bytes: text.into_bytes(),
        });
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    experiment: &'a str,
    wall_clock_seconds: f64,
}

/// Validate, run and write `cfg` below `root`.
pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<RunOutcome, CliError> {
    let diags = validate(cfg);
    if !diags.is_empty() {
        return Err(CliError::Config(diags.join("; ")));
    }
    let start = Instant::now();
    let mut out = compute(cfg)?;
    out.report.config = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let secs = start.elapsed().as_secs_f64();

    let dir = cfg.output_dir(root);
    let mut written = Vec::new();
    let mut write = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let path = dir.join(name);
        write_atomic(&path, bytes).context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let json = out
        .report
        .to_json()
        .context(|| "serializing report".into())?;
    write("report.json", json.as_bytes())?;
    let mut csv = Vec::new();
    out.report
        .write_csv(&mut csv)
        .context(|| "writing data.csv".into())?;
    write("data.csv", &csv)?;
    for f in &out.files {
        write(&f.name, &f.bytes)?;
    }
    let timing = Timing {
        experiment: cfg.experiment.name(),
        wall_clock_seconds: secs,
    };
    let timing =
        serde_json::to_string_pretty(&timing).map_err(|e| CliError::Config(e.to_string()))?;
    write("timing.json", timing.as_bytes())?;
    Ok(RunOutcome {
        report: out.report,
        output_dir: dir,
        files: written,
    })
}

fn compute(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    match cfg.experiment {
        ExperimentKind::Green => green(cfg),
        ExperimentKind::Sample => sample_check(cfg),
        ExperimentKind::VarianceInfinite => variance_infinite(cfg),
        ExperimentKind::VarianceFinite => variance_finite(cfg),
        ExperimentKind::BesovScaling => besov(cfg),
        ExperimentKind::Bridge1d => bridge(cfg),
        ExperimentKind::ThomeeError => thomee(cfg),
        ExperimentKind::SpectralGap => spectral_gap(cfg),
        ExperimentKind::SobolevGff => sobolev_gff(cfg),
    }
}

fn coefficients(cfg: &ExperimentConfig) -> Result<Coefficients, CliError> {
    Coefficients::new(cfg.kappa.clone()).map_err(|e| CliError::Config(format!("kappa: {e}")))
}

fn domain_spec(cfg: &ExperimentConfig) -> Result<&DomainSpec, CliError> {
    cfg.domain
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{} requires `domain`", cfg.experiment)))
}

fn test_function(cfg: &ExperimentConfig) -> Result<&TestFunction, CliError> {
    cfg.test_function
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{} requires `test_function`", cfg.experiment)))
}

fn operator(
    spec: &DomainSpec,
    n: usize,
    coeffs: &Coefficients,
) -> Result<SparseSymOperator, CliError> {
    let dom = Arc::new(
        discretize(spec, n, coeffs.order()).context(|| format!("discretizing at N = {n}"))?,
    );
    precision(&dom, coeffs).context(|| format!("assembling the precision operator at N = {n}"))
}

fn dump_nodes(
    cfg: &ExperimentConfig,
    out: &mut Outputs,
    dom: &LatticeDomain,
) -> Result<(), CliError> {
    if cfg.dump_nodes {
        out.add(format!("nodes_N{}.csv", dom.resolution()), |w| {
            dom.write_csv(w)
        })?;
    }
    Ok(())
}

fn rel_error(observed: f64, reference: f64) -> f64 {
    ((observed - reference) / reference).abs()
}

/// Relative error at the finest point and monotonicity of the error column.
fn convergence_checks(report: &mut ExperimentReport, tol: f64) {
    if let Some(e) = report.points.last().and_then(|p| p.relative_error) {
        report.check_le("relative_error_at_finest", e, tol);
    }
    let decreasing = report.errors_decreasing();
    report.check_true("errors_decreasing", decreasing);
}

fn green(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let coeffs = coefficients(cfg)?;
    let d = spec.dimension();
    let mut out = Outputs::new(ExperimentReport::new("green", "N"));
    let reference = if d >= 3 {
        let v = green_infinite(&vec![0; d], &coeffs, &cfg.quadrature)
            .context(|| "infinite-volume Green's function".into())?;
        out.report.reference(
            "green_infinite_origin",
            v,
            Provenance::Derived,
            "Fourier quadrature of the infinite-volume Green's function at the origin",
        );
        Some(v)
    } else {
        None
    };
    let source = cfg.source.clone().unwrap_or_else(|| {
        let (lo, hi) = spec.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    });
    for &n in &cfg.n {
        let op = operator(spec, n, &coeffs)?;
        dump_nodes(cfg, &mut out, op.domain())?;
        let i = op
            .domain()
            .nearest_interior(&source)
            .ok_or_else(|| CliError::Config(format!("no interior node at N = {n}")))?;
        let col =
            green_column_index(&op, i).context(|| format!("Green's function column at N = {n}"))?;
        out.report
            .points
            .push(ReportPoint::new(n as f64, col.values.values[i], reference));
        out.add(format!("green_N{n}.csv"), |w| col.write_csv(&op, w))?;
    }
    Ok(out)
}

fn sample_check(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let coeffs = coefficients(cfg)?;
    let n = cfg.n[0];
    let count = cfg.count_or(DEFAULT_COUNT);
    let tol = &cfg.tolerances;
    let k_se = tol.stderr_multiple.unwrap_or(4.0);
    let op = operator(spec, n, &coeffs)?;
    let mut out = Outputs::new(ExperimentReport::new("sample", "node"));
    dump_nodes(cfg, &mut out, op.domain())?;
    let batch = sample(&op, count, cfg.seed).context(|| "sampling".into())?;
    let g = green_matrix(&op).context(|| "Green's matrix".into())?;
    let len = op.n();
    let pairs: Vec<(usize, usize)> = (0..len)
        .flat_map(|i| (i..(i + 2).min(len)).map(move |j| (i, j)))
        .collect();
    let cov = empirical_covariance(&batch, &pairs).context(|| "empirical covariances".into())?;
    let m = count as f64;
    let mut rows = String::from("i,j,empirical,green,stderr,within\n");
    let mut good = 0usize;
    for (&(i, j), &c) in pairs.iter().zip(&cov) {
        let se = ((g[i][i] * g[j][j] + g[i][j] * g[i][j]) / m).sqrt();
        let within = (c - g[i][j]).abs() <= k_se * se;
        good += within as usize;
        rows.push_str(&format!(
            "{i},{j},{c:.17e},{:.17e},{se:.17e},{within}\n",
            g[i][j]
        ));
        if i == j {
            out.report
                .points
                .push(ReportPoint::new(i as f64, c, Some(g[i][i])));
        }
    }
    let fraction = good as f64 / pairs.len() as f64;
    out.report.check_ge(
        "covariance_pair_fraction",
        fraction,
        tol.pair_fraction.unwrap_or(0.99),
    );
    let centre = len / 2;
    let sd = g[centre][centre].sqrt();
    let z: Vec<f64> = batch.node_values(centre).iter().map(|v| v / sd).collect();
    let ks = ks_test_normal(&z);
    out.report
        .check_ge("ks_p_value", ks.p_value, tol.ks_level.unwrap_or(0.01));
    out.report.reference(
        "green_diagonal",
        g[centre][centre],
        Provenance::Derived,
        "direct sparse solve",
    );
    out.add_text("covariance.csv", rows);
    out.add("samples.csv".into(), |w| batch.write_csv(w))?;
    Ok(out)
}

fn variance_infinite(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let f = test_function(cfg)?;
    let coeffs = coefficients(cfg)?;
    let d = f.dim();
    let limit =
        limit_variance_infinite(f, d, &cfg.quadrature).context(|| "continuum limit".into())?;
    let mut out = Outputs::new(ExperimentReport::new("variance_infinite", "N"));
    out.report.reference(
        "limit_variance",
        limit,
        Provenance::Derived,
        "Parseval quadrature of |f^|^2 / (kappa_1 |xi|^2)",
    );
    for &n in &cfg.n {
        let v = discrete_variance_fourier(f, n, &coeffs, &cfg.quadrature)
            .context(|| format!("discrete variance at N = {n}"))?;
        out.report
            .points
            .push(ReportPoint::new(n as f64, v, Some(limit)));
    }
    error_slope(&mut out.report)?;
    convergence_checks(&mut out.report, cfg.tolerances.rel_error.unwrap_or(0.10));
    Ok(out)
}

fn variance_finite(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let f = test_function(cfg)?;
    let coeffs = coefficients(cfg)?;
    let h_ref = cfg.h_ref.unwrap_or(DEFAULT_H_REF);
    let limit = limit_variance_finite(spec, f, h_ref).context(|| "continuum limit".into())?;
    let mut out = Outputs::new(ExperimentReport::new("variance_finite", "N"));
    out.report.reference(
        "limit_variance",
        limit,
        Provenance::Derived,
        "continuum finite differences at h_ref and h_ref/2 with Richardson extrapolation",
    );
    for &n in &cfg.n {
        let op = operator(spec, n, &coeffs)?;
        dump_nodes(cfg, &mut out, op.domain())?;
        let v = variance_pairing_exact(&op, f).context(|| format!("exact variance at N = {n}"))?;
        out.report
            .points
            .push(ReportPoint::new(n as f64, v, Some(limit)));
    }
    error_slope(&mut out.report)?;
    convergence_checks(&mut out.report, cfg.tolerances.rel_error.unwrap_or(0.05));
    Ok(out)
}

fn error_slope(report: &mut ExperimentReport) -> Result<(), CliError> {
    let (x, e): (Vec<f64>, Vec<f64>) = report
        .points
        .iter()
        .filter_map(|p| p.relative_error.map(|e| (p.x, e)))
        .unzip();
    if x.len() >= 2 && e.iter().all(|&v| v > 0.0) {
        let s = loglog_slope(&x, &e).context(|| "fitting the error slope".into())?;
        report.slope("relative_error_vs_x", s);
    }
    Ok(())
}

fn besov(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let f = test_function(cfg)?;
    let coeffs = coefficients(cfg)?;
    let mut out = Outputs::new(ExperimentReport::new("besov_scaling", "lambda"));
    let mut rows = String::from("N,lambda,statistic\n");
    let ratio_max = cfg.tolerances.ratio_max.unwrap_or(10.0);
    let mut finest = Vec::new();
    for &n in &cfg.n {
        let stats = match &cfg.domain {
            Some(spec) => {
                let op = operator(spec, n, &coeffs)?;
                dump_nodes(cfg, &mut out, op.domain())?;
                besov_scaling_statistic(f, &cfg.lambdas, &VarianceSource::Finite { op: &op })
            }
            None => besov_scaling_statistic(
                f,
                &cfg.lambdas,
                &VarianceSource::Infinite {
                    n,
                    coeffs: &coeffs,
                    quad: &cfg.quadrature,
                },
            ),
        }
        .context(|| format!("scaling statistic at N = {n}"))?;
        for &(l, s) in &stats {
            rows.push_str(&format!("{n},{l:.17e},{s:.17e}\n"));
        }
        let max = stats.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let min = stats.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        out.report
            .check_le(&format!("max_min_ratio_N{n}"), max / min, ratio_max);
        finest = stats;
    }
    for (l, s) in finest {
        out.report.points.push(ReportPoint::new(l, s, None));
    }
    out.add_text("besov.csv", rows);
    Ok(out)
}

fn bridge(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let coeffs = coefficients(cfg)?;
    let spec = DomainSpec::Interval;
    let tol = &cfg.tolerances;
    let count = cfg.count_or(DEFAULT_COUNT);
    let mut out = Outputs::new(ExperimentReport::new("bridge_1d", "N"));
    let walk = cfg.bridge_sampler == BridgeSampler::Walk;

    let sups: Vec<f64> = cfg
        .n
        .iter()
        .map(|&n| {
            let op = operator(&spec, n, &coeffs)?;
            green_interp_sup_distance_1d(&op)
                .context(|| format!("Green's function sup distance at N = {n}"))
        })
        .collect::<Result<_, _>>()?;
    for (&n, &s) in cfg.n.iter().zip(&sups) {
        out.report.points.push(ReportPoint::new(n as f64, s, None));
    }
    if let Some(&last) = sups.last() {
        out.report.check_le(
            "sup_distance_at_finest",
            last,
            tol.sup_distance.unwrap_or(0.05),
        );
    }
    out.report.check_true(
        "sup_distance_decreasing",
        sups.windows(2).all(|w| w[1] < w[0]),
    );

    let n = *cfg.n.last().expect("validated non-empty");
    let batch: SampleBatch = if walk {
        sample_bridge_dgff_1d(n, count, cfg.seed).context(|| "walk-bridge sampling".into())?
    } else {
        let op = operator(&spec, n, &coeffs)?;
        dump_nodes(cfg, &mut out, op.domain())?;
        sample(&op, count, cfg.seed).context(|| "sampling".into())?
    };
    let paths: Vec<(f64, f64)> = batch
        .samples
        .par_iter()
        .map(|s| {
            let p = interpolate_path_1d(s, &batch.domain)?;
            Ok((p.eval(0.5), path_max_1d(&p)))
        })
        .collect::<interface_lab_core::Result<_>>()
        .context(|| "interpolating paths".into())?;
    let mids: Vec<f64> = paths.iter().map(|p| p.0).collect();
    let maxima: Vec<f64> = paths.iter().map(|p| p.1).collect();
    let v = variance(&mids);
    let se = v * (2.0 / (count as f64 - 1.0)).sqrt();
    out.report.reference(
        "midpoint_variance",
        0.25,
        Provenance::ClosedForm,
        "Var B(1/2) = 1/4",
    );
    out.report.check_le(
        "midpoint_variance_deviation_in_stderr",
        (v - 0.25).abs() / se,
        tol.stderr_multiple.unwrap_or(4.0),
    );
    let steps = cfg.oracle_steps.unwrap_or(DEFAULT_ORACLE_STEPS);
    let oracle = dense_bridge_max_mean(steps, count, cfg.seed.wrapping_add(ORACLE_SEED_OFFSET))
        .context(|| "dense bridge oracle".into())?;
    out.report.reference(
        "path_max_mean",
        oracle,
        Provenance::Derived,
        "random-walk bridge with oracle_steps Gaussian increments",
    );
    out.report.check_le(
        "path_max_relative_deviation",
        rel_error(mean(&maxima), oracle),
        tol.path_max_rel.unwrap_or(0.05),
    );
    let mut rows = String::from("sample,midpoint,max\n");
    for (i, (m, x)) in paths.iter().enumerate() {
        rows.push_str(&format!("{i},{m:.17e},{x:.17e}\n"));
    }
    out.add_text("paths.csv", rows);
    Ok(out)
}

fn thomee(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let coeffs = coefficients(cfg)?;
    let ms = ManufacturedSolution::standard(spec).context(|| "manufactured solution".into())?;
    let table = error_table(spec, &ms, &coeffs, &cfg.h).context(|| "error table".into())?;
    let mut out = Outputs::new(ExperimentReport::new("thomee_error", "h"));
    out.report.reference(
        "calibrated_c",
        table.calibrated_c,
        Provenance::Derived,
        "bound constant fitted at the coarsest h",
    );
    for r in &table.rows {
        out.report
            .points
            .push(ReportPoint::new(r.h, r.error_norm, None));
    }
    out.report.slope("error_norm_vs_h", table.error_slope);
    out.report
        .slope("interior_residual_vs_h", table.interior_residual_slope);
    out.report.check_ge(
        "error_slope",
        table.error_slope,
        cfg.tolerances.slope_min.unwrap_or(0.45),
    );
    out.report
        .check_true("bound_holds_at_finer_h", table.bound_holds());
    out.add("thomee.csv".into(), |w| table.write_csv(w))?;
    if cfg.dump_nodes {
        for &h in &cfg.h {
            let part = thomee_partition(spec, h, coeffs.order())
                .context(|| format!("partition at h = {h}"))?;
            out.add(
                format!("partition_N{}.csv", (1.0 / h).round() as usize),
                |w| part.write_csv(w),
            )?;
        }
    }
    Ok(out)
}

fn spectral_gap(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let coeffs = coefficients(cfg)?;
    let report =
        spectral_gap_convergence(spec, &coeffs, &cfg.h).context(|| "spectral gap sweep".into())?;
    let mut out = Outputs::new(report);
    if let Some(e) = out.report.points.last().and_then(|p| p.relative_error) {
        out.report.check_le(
            "relative_error_at_finest",
            e,
            cfg.tolerances.rel_error.unwrap_or(0.02),
        );
    }
    Ok(out)
}

fn sobolev_gff(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = domain_spec(cfg)?;
    let d = spec.dimension();
    let truncation = cfg.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let s = cfg.sobolev_index.unwrap_or(d as f64 / 2.0);
    let count = cfg.count_or(DEFAULT_COUNT);
    let k_se = cfg.tolerances.stderr_multiple.unwrap_or(4.0);
    let eig = EigenData::unit_box(d, truncation).context(|| "eigendata".into())?;
    let fc = match &cfg.test_function {
        Some(f) => Some(
            eig.coefficients(f)
                .context(|| "test-function coefficients".into())?,
        ),
        None => None,
    };
    let draws: Vec<(f64, Option<f64>)> = (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let c = gff_series_draw(&eig, eig.len(), cfg.seed, j)?;
            let norm = sobolev_norm_neg(&c, s, &eig)?.squared;
            Ok((norm, fc.as_ref().map(|f| series_pairing(&c, f))))
        })
        .collect::<interface_lab_core::Result<_>>()
        .context(|| "series draws".into())?;

    let mut out = Outputs::new(ExperimentReport::new("sobolev_gff", "statistic"));
    let want: f64 = eig.modes.iter().map(|m| m.lambda.powf(-1.0 - s)).sum();
    out.report.reference(
        "expected_norm_squared",
        want,
        Provenance::ClosedForm,
        "sum of lambda_j^(-1-s) over the retained modes",
    );
    let norms: Vec<f64> = draws.iter().map(|x| x.0).collect();
    let norm_se = (variance(&norms) / count as f64).sqrt();
    out.report
        .points
        .push(ReportPoint::new(0.0, mean(&norms), Some(want)));
    out.report.check_le(
        "norm_mean_deviation_in_stderr",
        (mean(&norms) - want).abs() / norm_se,
        k_se,
    );
    let mut rows = String::from("draw,norm_squared,pairing\n");
    if let Some(fc) = &fc {
        let var_want = sobolev_norm_neg(fc, 1.0, &eig)
            .context(|| "H^-1 norm of f".into())?
            .squared;
        out.report.reference(
            "pairing_variance",
            var_want,
            Provenance::ClosedForm,
            "truncated ||f||^2 in H^-1",
        );
        let pairs: Vec<f64> = draws.iter().filter_map(|x| x.1).collect();
        let v = variance(&pairs);
        out.report
            .points
            .push(ReportPoint::new(1.0, v, Some(var_want)));
        let se = var_want * (2.0 / (count as f64 - 1.0)).sqrt();
        out.report.check_le(
            "pairing_variance_deviation_in_stderr",
            (v - var_want).abs() / se,
            k_se,
        );
    }
    for (i, (n, p)) in draws.iter().enumerate() {
        let p = p.map(|v| format!("{v:.17e}")).unwrap_or_default();
        rows.push_str(&format!("{i},{n:.17e},{p}\n"));
    }
    out.add_text("draws.csv", rows);
    Ok(out)
}
