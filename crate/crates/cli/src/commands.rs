//! The four subcommands: `analytic`, `simulate`, `optimize`, and `figures`.
//!
//! All commands write CSV files plus `effective_config.toml` into the output
//! directory and print a short human-readable summary, including the
//! achieved quadrature error. Exit codes: 0 on success (an infeasible but
//! well-posed design problem is a success), 1 on configuration errors, 2 on
//! numerical failures.

use std::path::{Path, PathBuf};

use thiserror::Error;

use cellsearch::analytic::{
    asymptotic_latency_given_ps, evaluate, exhaustive_baseline, exhaustive_failure_curve_given_ps,
    expected_latency_given_ps, p_failure_given_ps, p_no_los, p_success, AnalyticResult,
};
use cellsearch::model::NetworkParams;
use cellsearch::montecarlo::{estimate_with_records, EstimateReport, SearchMode, TrialRecord};
use cellsearch::optimizer::{solve, solve_joint, DesignProblem};
use cellsearch::quad::QuadratureConfig;

use crate::config::{RunConfig, SweepVariable};
use crate::csvout::{fmt_f64, fmt_opt, CsvFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn classify(e: cellsearch::Error) -> CliError {
    match e {
        cellsearch::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn at_point(variable: &str, value: &str, e: cellsearch::Error) -> CliError {
    match classify(e) {
        CliError::Numerical(m) if !value.is_empty() => {
            CliError::Numerical(format!("at {variable} = {value}: {m}"))
        }
        other => other,
    }
}

/// Validate the configuration, create the output directory, and persist the
/// effective configuration so the run can be replayed exactly.
fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.network.validate().map_err(classify)?;
    cfg.quadrature.validate().map_err(classify)?;
    cfg.protocol.validate().map_err(classify)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| CliError::Io(format!("cannot serialize effective config: {e}")))?;
    std::fs::write(cfg.out_dir.join("effective_config.toml"), text)
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers == 0 {
        Ok(f())
    } else {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Io(format!("cannot build worker pool: {e}")))?
            .install(f))
    }
}

/// One evaluation point of a sweep.
struct SweepPoint {
    variable: &'static str,
    /// Cell text for the CSV; empty for a single-point run.
    value_cell: String,
    params: NetworkParams,
    n_c: u32,
}

fn sweep_points(cfg: &RunConfig) -> Result<Vec<SweepPoint>, CliError> {
    let Some(spec) = &cfg.sweep else {
        return Ok(vec![SweepPoint {
            variable: "none",
            value_cell: String::new(),
            params: cfg.network,
            n_c: cfg.protocol.n_c,
        }]);
    };
    let values = spec.resolve()?;
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let mut params = cfg.network;
        let (n_c, cell) = match spec.variable {
            SweepVariable::Lambda => {
                params.lambda = v;
                (cfg.protocol.n_c, fmt_f64(v))
            }
            SweepVariable::NC => (v as u32, format!("{}", v as u32)),
            SweepVariable::NBs => {
                params.n_bs = v as u32;
                (cfg.k * v as u32, format!("{}", v as u32))
            }
            SweepVariable::K => (v as u32 * params.n_bs, format!("{}", v as u32)),
        };
        params.validate().map_err(classify)?;
        points.push(SweepPoint {
            variable: spec.variable.name(),
            value_cell: cell,
            params,
            n_c,
        });
    }
    Ok(points)
}

fn scheme_name(scheme: SearchMode) -> &'static str {
    match scheme {
        SearchMode::RandomBeamforming => "random-beamforming",
        SearchMode::Exhaustive => "exhaustive",
    }
}

/// Analytic metrics for one sweep point under the configured search scheme.
///
/// For exhaustive search, `budget_curve` selects between the budget
/// semantics (detection only after completed sweeps of the `n_c` budget,
/// used by `analytic`) and the single-sweep semantics that the simulator's
/// exhaustive trials implement (used by `simulate` so the columns are
/// comparable).
fn analytic_point(
    point: &SweepPoint,
    scheme: SearchMode,
    budget_curve: bool,
    quad: &QuadratureConfig,
) -> Result<AnalyticResult, CliError> {
    let wrap = |e| at_point(point.variable, &point.value_cell, e);
    match scheme {
        SearchMode::RandomBeamforming => evaluate(&point.params, point.n_c, quad).map_err(wrap),
        SearchMode::Exhaustive => {
            let base = exhaustive_baseline(&point.params, quad).map_err(wrap)?;
            let ps = p_success(&point.params, quad).map_err(wrap)?;
            let floor = p_no_los(point.params.lambda, point.params.beta);
            let p_f = if budget_curve {
                let sweep = point.params.n_bs * point.params.n_ue;
                exhaustive_failure_curve_given_ps(point.n_c, sweep, ps.value, floor)
            } else {
                base.p_f
            };
            Ok(AnalyticResult {
                p_s: ps.value,
                p_no_los: floor,
                p_f,
                expected_latency_slots: base.latency_slots,
                expected_latency_t0: base.latency_t0,
                expected_latency_seconds: base.latency_seconds,
                quadrature_error_estimate: ps.quad_error,
                below_union_bound_range: ps.below_union_bound_range,
            })
        }
    }
}

fn analytic_cells(point: &SweepPoint, scheme: SearchMode, r: &AnalyticResult, seconds: bool) -> Vec<String> {
    let mut cells = vec![
        point.variable.to_string(),
        point.value_cell.clone(),
        scheme_name(scheme).to_string(),
        fmt_f64(r.p_s),
        fmt_f64(r.p_no_los),
        fmt_f64(r.p_f),
        fmt_f64(r.expected_latency_slots),
        fmt_f64(r.expected_latency_t0),
    ];
    if seconds {
        cells.push(fmt_opt(r.expected_latency_seconds));
    }
    cells.push(fmt_f64(r.quadrature_error_estimate));
    cells
}

const ANALYTIC_HEADER: [&str; 8] = [
    "sweep_variable",
    "sweep_value",
    "mode",
    "p_s",
    "p_no_los",
    "p_f_analytic",
    "latency_slots_analytic",
    "latency_t0_analytic",
];

fn header_with(seconds: bool, tail: &[&'static str]) -> Vec<&'static str> {
    let mut h = ANALYTIC_HEADER.to_vec();
    if seconds {
        h.push("latency_seconds_analytic");
    }
    h.push("quad_error_estimate");
    h.extend_from_slice(tail);
    h
}

fn print_union_bound_warning(any: bool) {
    if any {
        println!(
            "warning: SINR threshold below 0.4 (linear); the success-probability \
             integral is an upper bound of uncertified tightness there"
        );
    }
}

/// Closed-form and quadrature evaluation across the sweep.
pub fn cmd_analytic(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let points = sweep_points(cfg)?;
    let seconds = cfg.network.t0_seconds.is_some();
    let path = cfg.out_dir.join("analytic.csv");
    let mut csv = CsvFile::create(&path, &header_with(seconds, &[]))?;
    let mut worst_quad = 0.0f64;
    let mut warn = false;
    let mut last: Option<AnalyticResult> = None;
    for point in &points {
        let r = analytic_point(point, cfg.protocol.scheme, true, &cfg.quadrature)?;
        csv.row(&analytic_cells(point, cfg.protocol.scheme, &r, seconds))?;
        worst_quad = worst_quad.max(r.quadrature_error_estimate);
        warn |= r.below_union_bound_range;
        last = Some(r);
    }
    csv.finish()?;

    println!("analytic: {} row(s) -> {}", points.len(), path.display());
    if points.len() == 1 {
        let r = last.expect("one row evaluated");
        println!(
            "  p_s = {:.6}, p_f(n_c={}) = {:.6e}, no-LoS floor = {:.6e}",
            r.p_s, points[0].n_c, r.p_f, r.p_no_los
        );
        println!(
            "  latency = {:.4} slots = {:.4} t0{}",
            r.expected_latency_slots,
            r.expected_latency_t0,
            r.expected_latency_seconds
                .map(|s| format!(" = {s:.6e} s"))
                .unwrap_or_default()
        );
    }
    println!("  max quadrature error estimate: {worst_quad:.3e}");
    print_union_bound_warning(warn);
    Ok(())
}

fn trials_path(out_dir: &Path, index: usize, total: usize) -> PathBuf {
    if total == 1 {
        out_dir.join("trials.csv")
    } else {
        out_dir.join(format!("trials_{index:03}.csv"))
    }
}

fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let mut csv = CsvFile::create(
        path,
        &["trial_index", "detected", "latency_slots", "candidate_count_first_slot"],
    )?;
    for r in records {
        csv.row(&[
            r.trial_index.to_string(),
            (r.detected as u8).to_string(),
            r.latency_slots.map(|l| l.to_string()).unwrap_or_default(),
            r.candidate_count_first_slot.to_string(),
        ])?;
    }
    csv.finish()
}

/// Monte Carlo trials with the analytic columns alongside for comparison.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.trials < 1 {
        return Err(CliError::Config("simulate needs trials >= 1".into()));
    }
    prepare(cfg)?;
    let points = sweep_points(cfg)?;
    let seconds = cfg.network.t0_seconds.is_some();
    let path = cfg.out_dir.join("simulate.csv");
    let mut tail = vec![
        "p_f_empirical",
        "p_f_ci95",
        "latency_slots_empirical",
        "latency_slots_ci95",
        "latency_t0_empirical",
        "latency_t0_ci95",
    ];
    if seconds {
        tail.push("latency_seconds_empirical");
    }
    tail.extend_from_slice(&["n_trials", "n_detected"]);
    let mut csv = CsvFile::create(&path, &header_with(seconds, &tail))?;

    let mut worst_quad = 0.0f64;
    let mut warn = false;
    for (i, point) in points.iter().enumerate() {
        let r = analytic_point(point, cfg.protocol.scheme, false, &cfg.quadrature)?;
        worst_quad = worst_quad.max(r.quadrature_error_estimate);
        warn |= r.below_union_bound_range;

        let mut protocol = cfg.protocol;
        protocol.n_c = point.n_c;
        let params = point.params;
        let (report, records): (EstimateReport, Vec<TrialRecord>) =
            with_pool(cfg.workers, move || {
                estimate_with_records(&params, &protocol, cfg.trials, cfg.seed)
            })?
            .map_err(|e| at_point(point.variable, &point.value_cell, e))?;

        let mut cells = analytic_cells(point, cfg.protocol.scheme, &r, seconds);
        cells.push(fmt_f64(report.p_f.mean));
        cells.push(fmt_f64(report.p_f.half_width_95));
        match (&report.latency_slots, &report.latency_t0) {
            (Some(slots), Some(t0)) => {
                cells.push(fmt_f64(slots.mean));
                cells.push(fmt_f64(slots.half_width_95));
                cells.push(fmt_f64(t0.mean));
                cells.push(fmt_f64(t0.half_width_95));
                if seconds {
                    let t_slot = point
                        .params
                        .derive()
                        .map_err(classify)?
                        .t_slot_seconds
                        .expect("seconds enabled implies t0 configured");
                    cells.push(fmt_f64(slots.mean * t_slot));
                }
            }
            _ => {
                cells.extend(std::iter::repeat_with(String::new).take(4 + seconds as usize));
            }
        }
        cells.push(report.n_trials.to_string());
        cells.push(report.n_detected.to_string());
        csv.row(&cells)?;

        if cfg.dump_trials {
            write_trials(&trials_path(&cfg.out_dir, i, points.len()), &records)?;
        }
    }
    csv.finish()?;

    println!(
        "simulate: {} row(s), {} trial(s) each, seed {} -> {}",
        points.len(),
        cfg.trials,
        cfg.seed,
        path.display()
    );
    println!("  max quadrature error estimate: {worst_quad:.3e}");
    print_union_bound_warning(warn);
    Ok(())
}

/// Beamwidth design under a failure-probability cap.
pub fn cmd_optimize(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let opt = &cfg.optimize;
    let problem = DesignProblem {
        p_f_max: opt.p_f_max,
        k: opt.k,
        n_bs_range: (opt.n_bs_min, opt.n_bs_max),
        base: cfg.network,
    };
    let solution = match (opt.n_ue_min, opt.n_ue_max) {
        (None, None) => solve(&problem, &cfg.quadrature),
        (Some(lo), Some(hi)) => solve_joint(&problem, (lo, hi), &cfg.quadrature),
        _ => {
            return Err(CliError::Config(
                "joint optimization needs both n_ue_min and n_ue_max".into(),
            ))
        }
    }
    .map_err(classify)?;

    let path = cfg.out_dir.join("frontier.csv");
    let mut csv = CsvFile::create(
        &path,
        &["n_bs", "n_ue", "p_s", "p_f", "latency_slots", "latency_t0", "feasible"],
    )?;
    for p in &solution.frontier {
        csv.row(&[
            p.n_bs.to_string(),
            p.n_ue.to_string(),
            fmt_f64(p.p_s),
            fmt_f64(p.p_f),
            fmt_f64(p.latency_slots),
            fmt_f64(p.latency_t0),
            ((p.p_f <= opt.p_f_max) as u8).to_string(),
        ])?;
    }
    csv.finish()?;

    println!(
        "optimize: {} candidate(s) over n_bs in [{}, {}], k = {}, cap p_f <= {:.3e} -> {}",
        solution.frontier.len(),
        opt.n_bs_min,
        opt.n_bs_max,
        opt.k,
        opt.p_f_max,
        path.display()
    );
    match solution.n_bs_opt {
        Some(n_bs) => println!(
            "  optimal n_bs = {n_bs} (n_ue = {}): latency {:.6} t0 at p_f = {:.6e}",
            solution.n_ue_opt.expect("set together"),
            solution.latency_t0.expect("set together"),
            solution.p_f_achieved.expect("set together"),
        ),
        None => println!(
            "  infeasible: no candidate meets the cap; the no-LoS floor {:.6e} is the \
             best any beamwidth can reach (raise the cap, the density, or k)",
            solution.p_no_los_floor
        ),
    }
    let quad_err = p_success(&cfg.network, &cfg.quadrature)
        .map_err(classify)?
        .quad_error;
    println!("  quadrature error estimate at base parameters: {quad_err:.3e}");
    Ok(())
}

/// Reference-curve reproduction: one CSV per figure.
pub fn cmd_figures(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let quad = &cfg.quadrature;
    let mut worst_quad = 0.0f64;

    // fig2: metrics against density for several cycle counts, fixed sectors
    let ks = [1u32, 10, 100, 1000];
    let lambdas: Vec<f64> = {
        let (a, b) = (1e-4f64.ln(), 1e-2f64.ln());
        (0..13).map(|i| (a + (b - a) * i as f64 / 12.0).exp()).collect()
    };
    let mut fig2a = CsvFile::create(
        &cfg.out_dir.join("fig2a.csv"),
        &["lambda", "p_f_k1", "p_f_k10", "p_f_k100", "p_f_k1000", "p_no_los"],
    )?;
    let mut fig2b = CsvFile::create(
        &cfg.out_dir.join("fig2b.csv"),
        &[
            "lambda",
            "latency_t0_k1",
            "latency_t0_k10",
            "latency_t0_k100",
            "latency_t0_k1000",
            "latency_t0_asymptotic",
        ],
    )?;
    for &lambda in &lambdas {
        let params = NetworkParams { lambda, ..cfg.network };
        let derived = params.derive().map_err(classify)?;
        let ps = p_success(&params, quad)
            .map_err(|e| at_point("lambda", &format!("{lambda:e}"), e))?;
        worst_quad = worst_quad.max(ps.quad_error);
        let floor = p_no_los(lambda, params.beta);
        let mut a = vec![fmt_f64(lambda)];
        let mut b = vec![fmt_f64(lambda)];
        for &k in &ks {
            let n_c = k * params.n_bs;
            a.push(fmt_f64(p_failure_given_ps(n_c, ps.value, floor)));
            b.push(fmt_f64(
                expected_latency_given_ps(n_c, ps.value, &derived)
                    .map_err(classify)?
                    .t0_units,
            ));
        }
        a.push(fmt_f64(floor));
        b.push(fmt_f64(
            asymptotic_latency_given_ps(ps.value, &derived)
                .map_err(classify)?
                .t0_units,
        ));
        fig2a.row(&a)?;
        fig2b.row(&b)?;
    }
    fig2a.finish()?;
    fig2b.finish()?;

    // fig3 + fig5: latency and failure against the BS sector count
    let mut fig3 = CsvFile::create(
        &cfg.out_dir.join("fig3.csv"),
        &["n_bs", "exhaustive_t0", "rb_t0"],
    )?;
    let mut fig5 = CsvFile::create(
        &cfg.out_dir.join("fig5.csv"),
        &["n_bs", "p_f_k1", "p_f_k2", "latency_t0_k1", "latency_t0_k2"],
    )?;
    for n_bs in 1..=20u32 {
        let params = NetworkParams { n_bs, ..cfg.network };
        let derived = params.derive().map_err(classify)?;
        let ps = p_success(&params, quad)
            .map_err(|e| at_point("n_bs", &n_bs.to_string(), e))?;
        worst_quad = worst_quad.max(ps.quad_error);
        let floor = p_no_los(params.lambda, params.beta);
        let sweep = params.n_bs * params.n_ue;
        fig3.row(&[
            n_bs.to_string(),
            fmt_f64(exhaustive_baseline(&params, quad).map_err(classify)?.latency_t0),
            fmt_f64(
                expected_latency_given_ps(sweep, ps.value, &derived)
                    .map_err(classify)?
                    .t0_units,
            ),
        ])?;
        fig5.row(&[
            n_bs.to_string(),
            fmt_f64(p_failure_given_ps(n_bs, ps.value, floor)),
            fmt_f64(p_failure_given_ps(2 * n_bs, ps.value, floor)),
            fmt_f64(
                expected_latency_given_ps(n_bs, ps.value, &derived)
                    .map_err(classify)?
                    .t0_units,
            ),
            fmt_f64(
                expected_latency_given_ps(2 * n_bs, ps.value, &derived)
                    .map_err(classify)?
                    .t0_units,
            ),
        ])?;
    }
    fig3.finish()?;
    fig5.finish()?;

    // fig4: failure against the search budget at two densities
    let mut fig4 = CsvFile::create(
        &cfg.out_dir.join("fig4.csv"),
        &["n_c", "rb_pf_lambda_0.001", "rb_pf_lambda_0.0001", "eh_pf_lambda_0.001"],
    )?;
    let dense = NetworkParams { lambda: 1e-3, ..cfg.network };
    let sparse = NetworkParams { lambda: 1e-4, ..cfg.network };
    let ps_dense = p_success(&dense, quad).map_err(classify)?;
    let ps_sparse = p_success(&sparse, quad).map_err(classify)?;
    worst_quad = worst_quad.max(ps_dense.quad_error).max(ps_sparse.quad_error);
    let floor_dense = p_no_los(dense.lambda, dense.beta);
    let floor_sparse = p_no_los(sparse.lambda, sparse.beta);
    let sweep = dense.n_bs * dense.n_ue;
    for n_c in 1..=120u32 {
        let eh = exhaustive_failure_curve_given_ps(n_c, sweep, ps_dense.value, floor_dense);
        fig4.row(&[
            n_c.to_string(),
            fmt_f64(p_failure_given_ps(n_c, ps_dense.value, floor_dense)),
            fmt_f64(p_failure_given_ps(n_c, ps_sparse.value, floor_sparse)),
            fmt_f64(eh),
        ])?;
    }
    fig4.finish()?;

    println!(
        "figures: fig2a fig2b fig3 fig4 fig5 -> {}",
        cfg.out_dir.display()
    );
    println!("  max quadrature error estimate: {worst_quad:.3e}");
    Ok(())
}
