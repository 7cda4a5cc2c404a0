//! Command implementations. Each builds a [`Report`]; [`execute`] wraps
//! one with output preparation, emission and the strictness policy.

use fhp_core::filter::{
    candidate_family, classical_hp, minimize, optimal_b, residual, residual_covariance, verify_optimality,
    SecondDifferenceBasis,
};
use fhp_core::gaussian::{
    check_admissibility, compute_qv, conditional_expectation, sample_pair, sample_pair_indexed, ModelSpec,
};
use fhp_core::heat::{heat_model, heat_multipliers, run_heat_filter, run_heat_filter_generic, synthesize_grid};
use fhp_core::scale::{check_hs_tilde, extend_model, optimal_b_scale};
use fhp_core::sequence::Decision;
use fhp_core::spectral::HilbertElement;
use rayon::prelude::*;

use crate::config::{Command, InputFormat, RunConfig};
use crate::error::{HarnessError, Result};
use crate::ingest::ingest_dataset;
use crate::report::{decision_label, OutputDir, Report, RunManifest, Table};
use crate::stats::MeanSe;

/// Runs the bound command and emits its results under `run.output_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunManifest> {
    let out = OutputDir::prepare(cfg)?;
    log::info!("{} -> {}", cfg.command(), out.path().display());
    let report = match compute(cfg) {
        Ok(r) => r,
        Err(e) => {
            let mut failed = Report::default();
            failed.set("error", e.to_string());
            out.emit(&failed, "failed")?;
            return Err(e);
        }
    };
    let strict_fail = cfg.run.strict && !report.warnings.is_empty();
    let status = if strict_fail { "failed-strict" } else { "complete" };
    let manifest = out.emit(&report, status)?;
    if strict_fail {
        return Err(HarnessError::Strict(report.warnings.join("; ")));
    }
    Ok(manifest)
}

/// The report for `cfg` without touching the file system beyond inputs.
pub fn compute(cfg: &RunConfig) -> Result<Report> {
    match cfg.command() {
        Command::Filter => run_filter(cfg),
        Command::VerifyOptimality => run_verify_optimality(cfg),
        Command::MonteCarlo => run_monte_carlo(cfg),
        Command::Admissibility => run_admissibility(cfg),
        Command::ScaleReport => run_scale_report(cfg),
        Command::HeatDemo => run_heat_demo(cfg),
        Command::ClassicalHp => run_classical_hp(cfg),
    }
}

/// Row labels: kernel coordinate `j` is `-j`, span coordinate `k` is `k + 1`.
fn coordinates(h: &HilbertElement) -> impl Iterator<Item = (i64, f64)> + '_ {
    h.kernel()
        .iter()
        .enumerate()
        .map(|(j, v)| (-(j as i64), *v))
        .chain(h.span().iter().enumerate().map(|(k, v)| (k as i64 + 1, *v)))
}

fn admissibility_section(report: &mut Report, m: &ModelSpec) {
    let adm = check_admissibility(m);
    let mut t = Table::new("admissibility", &["quantity", "decision", "partial_sum", "terms"]);
    let checks = [
        ("trace_sigma_u", adm.trace_sigma_u),
        ("trace_sigma_v", adm.trace_sigma_v),
        ("trace_qv", adm.trace_qv),
        ("hilbert_schmidt_t", adm.hilbert_schmidt_t),
    ];
    for (name, c) in checks {
        t.push(vec![
            name.into(),
            c.decision.into(),
            c.partial_sum.into(),
            c.terms.into(),
        ]);
        report.decide(name, c.decision);
        match c.decision {
            Decision::ProvenDivergent => report.warn(format!("{name} diverges as N grows")),
            Decision::UnknownExplicitFamily => {
                report.warn(format!("{name}: convergence undecided for an explicit family"))
            }
            Decision::ProvenConvergent => {}
        }
    }
    report.table(t);
}

fn load_or_sample(cfg: &RunConfig, m: &ModelSpec) -> Result<(HilbertElement, Option<HilbertElement>)> {
    match &cfg.run.input {
        Some(p) => {
            if cfg.run.input_format == InputFormat::Grid {
                return Err(HarnessError::Config(
                    "run.input_format: grid input is only accepted by heat-demo".into(),
                ));
            }
            let x = ingest_dataset(p, InputFormat::Coefficients, 0)?;
            if x.kernel().len() != m.kernel_dim() || x.span().len() != m.truncation() {
                return Err(HarnessError::Config(format!(
                    "run.input: {} has {} kernel and {} span coefficients, model needs {} and {}",
                    p.display(),
                    x.kernel().len(),
                    x.span().len(),
                    m.kernel_dim(),
                    m.truncation()
                )));
            }
            Ok((x, None))
        }
        None => {
            let (x, y) = sample_pair(m, cfg.run.seed);
            Ok((x, Some(y)))
        }
    }
}

fn run_filter(cfg: &RunConfig) -> Result<Report> {
    let m = cfg.build_model()?;
    let mut report = Report::default();
    admissibility_section(&mut report, &m);
    let (x, truth) = load_or_sample(cfg, &m)?;
    let filtered = minimize(m.system(), &optimal_b(&m), &x)?;
    let cond = conditional_expectation(&m, &x)?;
    let r = filtered.sub(&cond)?;

    let mut t = Table::new(
        "coefficients",
        &["index", "observed", "filtered", "conditional_expectation", "residual"],
    );
    for (((i, xv), (_, f)), ((_, c), (_, rv))) in coordinates(&x)
        .zip(coordinates(&filtered))
        .zip(coordinates(&cond).zip(coordinates(&r)))
    {
        t.push(vec![i.into(), xv.into(), f.into(), c.into(), rv.into()]);
    }
    report.table(t);
    if let Some(y) = truth {
        let mut t = Table::new("truth", &["index", "value"]);
        for (i, v) in coordinates(&y) {
            t.push(vec![i.into(), v.into()]);
        }
        report.table(t);
    }

    let span_norm = r.span().iter().map(|v| v * v).sum::<f64>().sqrt();
    let kernel_norm = r.kernel().iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = cfg.tolerance.residual * x.norm();
    report.set("observation_norm", x.norm());
    report.set("residual_span_norm", span_norm);
    report.set("residual_kernel_norm", kernel_norm);
    report.set("residual_span_within_tolerance", span_norm <= bound);
    if span_norm > bound {
        report.warn(format!("residual span norm {span_norm:e} exceeds {bound:e}"));
    }
    Ok(report)
}

fn run_verify_optimality(cfg: &RunConfig) -> Result<Report> {
    let m = cfg.build_model()?;
    let mut report = Report::default();
    admissibility_section(&mut report, &m);
    let cands = candidate_family(&m, cfg.run.candidates.saturating_sub(5), cfg.run.seed);
    let mut detail = Table::new("candidates", &["trial", "candidate", "distance", "excess"]);
    let mut trials = Table::new(
        "trials",
        &[
            "trial",
            "observation_norm",
            "optimal_distance",
            "lower_bound",
            "violations",
        ],
    );
    let mut total = 0;
    let mut worst_gap: f64 = 0.0;
    for trial in 0..cfg.run.trials {
        let (x, _) = sample_pair_indexed(&m, cfg.run.seed, trial as u64);
        let r = verify_optimality(&m, &x, &cands)?;
        let v = r.violations(cfg.tolerance.optimality * (1.0 + x.norm()));
        total += v;
        worst_gap = worst_gap.max((r.optimal_distance - r.lower_bound).abs());
        for c in &r.candidates {
            detail.push(vec![trial.into(), c.index.into(), c.distance.into(), c.excess.into()]);
        }
        trials.push(vec![
            trial.into(),
            x.norm().into(),
            r.optimal_distance.into(),
            r.lower_bound.into(),
            v.into(),
        ]);
    }
    report.table(trials);
    report.table(detail);
    report.set("trials", cfg.run.trials);
    report.set("candidates", cands.len());
    report.set("violations", total);
    report.set("max_optimal_minus_lower_bound", worst_gap);
    if total > 0 {
        report.warn(format!(
            "{total} candidate(s) came closer to the conditional expectation than the optimal operator"
        ));
    }
    Ok(report)
}

struct Draw {
    residual_sq: f64,
    observation_sq: f64,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("run.workers: {e}")))
}

/// Samples `(x, y)`, accumulates covariance estimates and checks the
/// residual trace formula.
pub fn run_monte_carlo(cfg: &RunConfig) -> Result<Report> {
    let m = cfg.build_model()?;
    let mut report = Report::default();
    admissibility_section(&mut report, &m);
    let n = cfg.run.samples;
    let seed = cfg.run.seed;
    let y0 = m.y0_kernel().to_vec();

    let draws: Vec<Result<Draw>> = thread_pool(cfg.run.workers)?.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let (x, y) = sample_pair_indexed(&m, seed, i);
                let residual_sq = residual(&m, &x)?.norm_sq();
                let center = |h: &HilbertElement| {
                    h.kernel()
                        .iter()
                        .zip(&y0)
                        .map(|(v, c)| v - c)
                        .chain(h.span().iter().copied())
                        .collect()
                };
                Ok(Draw {
                    residual_sq,
                    observation_sq: x.norm_sq(),
                    x: center(&x),
                    y: center(&y),
                })
            })
            .collect()
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;

    let k_sigma = cfg.tolerance.sigma_multiplier;
    let (_, trace) = residual_covariance(&m);
    let res = MeanSe::of(&draws.iter().map(|d| d.residual_sq).collect::<Vec<_>>());
    // the span part of each residual is zero only up to `tolerance.residual * |x|`
    let obs = MeanSe::of(&draws.iter().map(|d| d.observation_sq).collect::<Vec<_>>());
    let slack = cfg.tolerance.residual.powi(2) * obs.mean;
    let pass = res.within(trace, k_sigma, slack);

    let qv = compute_qv(&m);
    let d0 = m.kernel_dim();
    let mut cov = Table::new(
        "covariance",
        &[
            "index",
            "quantity",
            "empirical",
            "expected",
            "standard_error",
            "within_band",
        ],
    );
    let mut outside = 0;
    for c in 0..d0 + m.truncation() {
        let (index, vx, cxy, vy) = if c < d0 {
            (-(c as i64), m.sigma_u().kernel_vars()[c], 0.0, 0.0)
        } else {
            let k = c - d0;
            let q = qv.diag()[k];
            ((k + 1) as i64, m.sigma_u().span_vars()[k] + q, q, q)
        };
        for (name, expected, f) in [
            (
                "var_x",
                vx,
                (|d: &Draw, c: usize| d.x[c] * d.x[c]) as fn(&Draw, usize) -> f64,
            ),
            ("cov_xy", cxy, |d: &Draw, c: usize| d.x[c] * d.y[c]),
            ("var_y", vy, |d: &Draw, c: usize| d.y[c] * d.y[c]),
        ] {
            let s = MeanSe::of(&draws.iter().map(|d| f(d, c)).collect::<Vec<_>>());
            let ok = s.within(expected, k_sigma, 0.0);
            outside += usize::from(!ok);
            cov.push(vec![
                index.into(),
                name.into(),
                s.mean.into(),
                expected.into(),
                s.se.into(),
                ok.into(),
            ]);
        }
    }
    report.table(cov);

    let mut res_table = Table::new(
        "residual",
        &[
            "samples",
            "mean_squared_norm",
            "standard_error",
            "trace",
            "sigma_multiplier",
            "rounding_slack",
            "pass",
        ],
    );
    res_table.push(vec![
        n.into(),
        res.mean.into(),
        res.se.into(),
        trace.into(),
        k_sigma.into(),
        slack.into(),
        pass.into(),
    ]);
    report.table(res_table);

    report.set("samples", n);
    report.set("seed", seed);
    report.set("residual_mean_squared_norm", res.mean);
    report.set("residual_standard_error", res.se);
    report.set("residual_trace", trace);
    report.set("residual_rounding_slack", slack);
    report.set("trace_check_pass", pass);
    report.set("covariance_entries_outside_band", outside);
    if !pass {
        report.warn(format!(
            "mean squared residual {:e} is more than {k_sigma} standard errors from {trace:e}",
            res.mean
        ));
    }
    Ok(report)
}

fn run_admissibility(cfg: &RunConfig) -> Result<Report> {
    let m = cfg.build_model()?;
    let mut report = Report::default();
    admissibility_section(&mut report, &m);
    let qv = compute_qv(&m);
    let mut t = Table::new("spectra", &["k", "lambda", "sigma_u", "sigma_v", "qv", "multiplier"]);
    for (k, (((l, u), v), (q, f))) in m
        .system()
        .values()
        .iter()
        .zip(m.sigma_u().span_vars())
        .zip(m.sigma_v().span_vars())
        .zip(qv.diag().iter().zip(m.conditional_multipliers()))
        .enumerate()
    {
        t.push(vec![
            (k + 1).into(),
            (*l).into(),
            (*u).into(),
            (*v).into(),
            (*q).into(),
            f.into(),
        ]);
    }
    report.table(t);
    report.set("truncation", m.truncation());
    report.set("kernel_dim", m.kernel_dim());
    Ok(report)
}

fn run_scale_report(cfg: &RunConfig) -> Result<Report> {
    let m = cfg.build_model()?;
    let mut report = Report::default();
    let levels: Vec<u32> = match cfg.run.scale_index {
        Some(n) => vec![n],
        None => (1..=cfg.run.max_scale_index).collect(),
    };
    let base_b = optimal_b(&m);
    let mut conditions = Table::new("scale_conditions", &["level", "quantity", "decision", "partial_sum"]);
    let mut ops = Table::new(
        "scale_operators",
        &[
            "level",
            "k",
            "extended_sigma_u",
            "extended_sigma_v",
            "extended_qv",
            "optimal_b_scale",
            "optimal_b",
        ],
    );
    let mut max_diff: f64 = 0.0;
    let mut available = Vec::new();
    for n in levels {
        let sm = match extend_model(&m, n) {
            Ok(sm) => sm,
            Err(e) => {
                report.warn(format!("level {n}: {e}"));
                conditions.push(vec![
                    (n as usize).into(),
                    "level".into(),
                    "Unavailable".into(),
                    f64::NAN.into(),
                ]);
                continue;
            }
        };
        available.push(n);
        let a = sm.admissibility();
        let hs = check_hs_tilde(&sm);
        let rows = [
            (
                "weighted_condition",
                a.weighted_condition(),
                a.weighted_sigma_u.partial_sum + a.weighted_sigma_v.partial_sum,
            ),
            (
                "weighted_sigma_u",
                a.weighted_sigma_u.decision,
                a.weighted_sigma_u.partial_sum,
            ),
            (
                "weighted_sigma_v",
                a.weighted_sigma_v.decision,
                a.weighted_sigma_v.partial_sum,
            ),
            (
                "extended_trace_sigma_u",
                a.extended_trace_sigma_u.decision,
                a.extended_trace_sigma_u.partial_sum,
            ),
            (
                "white_noise_condition",
                a.white_noise_condition(),
                a.white_noise_sum.partial_sum,
            ),
            ("hilbert_schmidt_t", hs.decision, hs.partial_sum),
        ];
        for (name, d, s) in rows {
            conditions.push(vec![(n as usize).into(), name.into(), d.into(), s.into()]);
            report.decide(&format!("level{n}.{name}"), d);
        }
        if a.weighted_condition().is_divergent() {
            report.warn(format!("level {n}: weighted covariance series diverge"));
        }
        if hs.decision.is_divergent() {
            report.warn(format!("level {n}: hilbert_schmidt_t diverges"));
        }
        let b = optimal_b_scale(&sm);
        for k in 0..m.truncation() {
            max_diff = max_diff.max((b.diag()[k] - base_b.diag()[k]).abs());
            ops.push(vec![
                (n as usize).into(),
                (k + 1).into(),
                sm.extended_sigma_u().diag()[k].into(),
                sm.extended_sigma_v().diag()[k].into(),
                sm.extended_qv().diag()[k].into(),
                b.diag()[k].into(),
                base_b.diag()[k].into(),
            ]);
        }
    }
    report.table(conditions);
    report.table(ops);
    report.set("levels", available);
    report.set("max_abs_diff_optimal_b", max_diff);
    Ok(report)
}

fn profile_table(name: &str, s: &[f64], values: &[f64]) -> Table {
    let mut t = Table::new(name, &["s", "value"]);
    for (a, b) in s.iter().zip(values) {
        t.push(vec![(*a).into(), (*b).into()]);
    }
    t
}

fn run_heat_demo(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.heat_problem()?;
    let (su, sv) = cfg.heat_families()?;
    let mut report = Report::default();
    let n = p.effective_truncation();
    if n < p.truncation {
        report.warn(format!(
            "heat system capped at {n} modes (requested {}) to keep singular values representable",
            p.truncation
        ));
    }
    let m = heat_model(&p, &su, &sv)?;
    admissibility_section(&mut report, &m);

    let (x, truth) = match &cfg.run.input {
        Some(path) => {
            let x = ingest_dataset(path, cfg.run.input_format, n)?;
            if x.span().len() != n || !x.kernel().is_empty() {
                return Err(HarnessError::Config(format!(
                    "run.input: expected {n} sine coefficients and no kernel rows"
                )));
            }
            (x, None)
        }
        None => {
            let (x, y) = sample_pair(&m, cfg.run.seed);
            (x, Some(y))
        }
    };
    let closed = run_heat_filter(&p, &su, &sv, &x)?;
    let generic = run_heat_filter_generic(&p, &su, &sv, &x)?;
    let mult = heat_multipliers(&p, &su, &sv)?;

    let mut mt = Table::new("multipliers", &["n", "lambda", "multiplier"]);
    for (k, (l, f)) in m.system().values().iter().zip(&mult).enumerate() {
        mt.push(vec![(k + 1).into(), (*l).into(), (*f).into()]);
    }
    report.table(mt);

    let mut ct = Table::new("coefficients", &["n", "observed", "filtered", "generic"]);
    let mut max_rel: f64 = 0.0;
    for k in 0..n {
        let (c, g) = (closed.span()[k], generic.span()[k]);
        max_rel = max_rel.max((c - g).abs() / g.abs().max(f64::MIN_POSITIVE));
        ct.push(vec![(k + 1).into(), x.span()[k].into(), c.into(), g.into()]);
    }
    report.table(ct);

    let s = p.grid_points();
    let filtered_profile = synthesize_grid(&closed, &p);
    let endpoint = filtered_profile[0]
        .abs()
        .max(filtered_profile[filtered_profile.len() - 1].abs());
    report.table(profile_table("profile_observed", &s, &synthesize_grid(&x, &p)));
    report.table(profile_table("profile_filtered", &s, &filtered_profile));
    if let Some(y) = truth {
        report.table(profile_table("profile_truth", &s, &synthesize_grid(&y, &p)));
    }

    report.set("modes", n);
    report.set("elapsed", p.elapsed());
    report.set("grid", p.grid);
    report.set("max_rel_diff_closed_vs_generic", max_rel);
    report.set("max_abs_endpoint_value", endpoint);
    Ok(report)
}

fn run_classical_hp(cfg: &RunConfig) -> Result<Report> {
    let c = cfg.classical_section()?;
    let mut report = Report::default();
    let series = match &cfg.run.input {
        Some(path) => {
            let h = ingest_dataset(path, InputFormat::Coefficients, 0)?;
            if !h.kernel().is_empty() {
                return Err(HarnessError::Config(
                    "run.input: series rows must be indexed 1..=T".into(),
                ));
            }
            h.span().to_vec()
        }
        None => {
            let basis = SecondDifferenceBasis::new(c.length)?;
            let m = basis.white_noise_model(c.sigma_u, c.sigma_v, vec![0.0; 2])?;
            basis.synthesize(&sample_pair(&m, cfg.run.seed).0)?
        }
    };
    let alpha = c.sigma_u / c.sigma_v;
    let classical = classical_hp(&series, alpha)?;
    let basis = SecondDifferenceBasis::new(series.len())?;
    let spectral = basis.spectral_hp(&series, c.sigma_u, c.sigma_v)?;

    let mut t = Table::new("trend", &["t", "observed", "classical", "spectral", "abs_diff"]);
    for (i, ((x, a), b)) in series.iter().zip(&classical).zip(&spectral).enumerate() {
        t.push(vec![
            (i + 1).into(),
            (*x).into(),
            (*a).into(),
            (*b).into(),
            (a - b).abs().into(),
        ]);
    }
    report.table(t);
    let mut sv = Table::new("singular_values", &["k", "lambda"]);
    for (k, l) in basis.system().values().iter().enumerate() {
        sv.push(vec![(k + 1).into(), (*l).into()]);
    }
    report.table(sv);

    let diff = classical
        .iter()
        .zip(&spectral)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = classical.iter().map(|a| a * a).sum::<f64>().sqrt();
    report.set("alpha", alpha);
    report.set("length", series.len());
    report.set("rel_diff_classical_vs_spectral", diff / norm.max(f64::MIN_POSITIVE));
    Ok(report)
}

/// Human-readable one-line summary of decisions.
pub fn describe_decisions(report: &Report) -> String {
    report
        .decisions
        .iter()
        .map(|(k, d)| format!("{k}={}", decision_label(*d)))
        .collect::<Vec<_>>()
        .join(", ")
}
