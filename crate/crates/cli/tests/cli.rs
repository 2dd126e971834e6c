//! End-to-end checks of the command-line front end: determinism, config
//! round-trips, schema stability, exit codes, and golden values for the
//! figure reproduction.

#![allow(clippy::field_reassign_with_default)]

use std::path::Path;
use std::process::Command;

use cellsearch_cli::config::{RunConfig, Scale, SweepRange, SweepSpec, SweepVariable};
use cellsearch_cli::{cmd_analytic, cmd_figures, cmd_optimize, cmd_simulate, load_config};

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Parse a CSV produced by the tool into (header, rows of f64-or-NaN cells).
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .expect("header row")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn fast_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.out_dir = out.to_path_buf();
    cfg.trials = 400;
    cfg.protocol.n_c = 6;
    cfg.protocol.region_radius_m = Some(400.0);
    cfg
}

#[test]
fn simulate_is_byte_identical_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(&dir.path().join("a"));
    cfg.sweep = Some(SweepSpec {
        variable: SweepVariable::NC,
        values: Some(vec![2.0, 6.0]),
        range: None,
    });
    cmd_simulate(&cfg).unwrap();
    let first = read(&cfg.out_dir.join("simulate.csv"));

    cfg.out_dir = dir.path().join("b");
    cfg.workers = 1; // worker count must not change anything
    cmd_simulate(&cfg).unwrap();
    let second = read(&cfg.out_dir.join("simulate.csv"));
    assert_eq!(first, second);
}

#[test]
fn effective_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(&dir.path().join("a"));
    cfg.sweep = Some(SweepSpec {
        variable: SweepVariable::Lambda,
        values: None,
        range: Some(SweepRange {
            start: 1e-4,
            stop: 1e-3,
            count: 3,
            scale: Scale::Log,
        }),
    });
    cmd_analytic(&cfg).unwrap();
    let first = read(&cfg.out_dir.join("analytic.csv"));

    let mut replay = load_config(Some(&cfg.out_dir.join("effective_config.toml"))).unwrap();
    assert_eq!(replay, cfg);
    replay.out_dir = dir.path().join("b");
    cmd_analytic(&replay).unwrap();
    let second = read(&replay.out_dir.join("analytic.csv"));
    assert_eq!(first, second);
}

#[test]
fn analytic_schema_and_default_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cmd_analytic(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("analytic.csv")));
    assert_eq!(
        header,
        [
            "sweep_variable",
            "sweep_value",
            "mode",
            "p_s",
            "p_no_los",
            "p_f_analytic",
            "latency_slots_analytic",
            "latency_t0_analytic",
            "quad_error_estimate"
        ]
    );
    assert_eq!(rows.len(), 1);
    // baseline point: p_s just below 0.1676, failure floor at 1.507e-7
    assert!(rel_err(rows[0][3], 0.1675887929763211) < 1e-6);
    assert!(rel_err(rows[0][4], 1.50701727539007e-7) < 1e-9);
}

#[test]
fn analytic_budget_sweep_matches_reference_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.sweep = Some(SweepSpec {
        variable: SweepVariable::NC,
        values: Some(vec![1.0, 11.0, 48.0, 86.0]),
        range: None,
    });
    cmd_analytic(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("analytic.csv")));
    let pf = header.iter().position(|h| h == "p_f_analytic").unwrap();
    for (row, want) in rows.iter().zip([
        0.8324,
        0.132939116122031,
        0.000149947570614005,
        1.50701727539007e-7,
    ]) {
        assert!(
            rel_err(row[pf], want) < 1e-3,
            "n_c = {}: {} vs {want}",
            row[1],
            row[pf]
        );
    }
}

#[test]
fn seconds_column_appears_with_t0() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.network.t0_seconds = Some(1e-5);
    cmd_analytic(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("analytic.csv")));
    let idx = header
        .iter()
        .position(|h| h == "latency_seconds_analytic")
        .expect("seconds column present when t0 is configured");
    let t0_idx = header.iter().position(|h| h == "latency_t0_analytic").unwrap();
    assert!(rel_err(rows[0][idx], rows[0][t0_idx] * 1e-5) < 1e-12);
}

#[test]
fn exhaustive_simulation_has_constant_latency() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(dir.path());
    cfg.protocol.scheme = cellsearch::montecarlo::SearchMode::Exhaustive;
    cfg.trials = 300;
    cmd_simulate(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("simulate.csv")));
    let analytic_t0 = header.iter().position(|h| h == "latency_t0_analytic").unwrap();
    let empirical_t0 = header.iter().position(|h| h == "latency_t0_empirical").unwrap();
    assert_eq!(rows[0][analytic_t0], 48.0);
    assert_eq!(rows[0][empirical_t0], 48.0);
}

#[test]
fn simulate_empirical_columns_track_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(dir.path());
    cfg.trials = 2000;
    cfg.protocol.n_c = 8;
    // iid slots over fresh topologies: the regime the analytic failure
    // expression describes exactly
    cfg.protocol.topology_refresh = cellsearch::montecarlo::TopologyRefresh::PerSlot;
    cfg.protocol.bs_schedule = cellsearch::montecarlo::BsSchedule::Iid;
    cfg.protocol.region_radius_m = Some(500.0);
    cfg.sweep = Some(SweepSpec {
        variable: SweepVariable::Lambda,
        values: Some(vec![5e-4, 2e-3]),
        range: None,
    });
    cmd_simulate(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("simulate.csv")));
    let pf_a = header.iter().position(|h| h == "p_f_analytic").unwrap();
    let pf_e = header.iter().position(|h| h == "p_f_empirical").unwrap();
    for row in &rows {
        let three_se = 3.0 * (row[pf_a] * (1.0 - row[pf_a]) / 2000f64).sqrt();
        assert!(
            (row[pf_e] - row[pf_a]).abs() < three_se,
            "empirical {} vs analytic {} +- {three_se}",
            row[pf_e],
            row[pf_a]
        );
    }
}

#[test]
fn trial_dump_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(dir.path());
    cfg.trials = 50;
    cfg.dump_trials = true;
    cmd_simulate(&cfg).unwrap();
    let text = read(&cfg.out_dir.join("trials.csv"));
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial_index,detected,latency_slots,candidate_count_first_slot"
    );
    assert_eq!(lines.count(), 50);
}

#[test]
fn optimizer_reproduces_reference_design_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.optimize.p_f_max = 0.15;
    cfg.optimize.k = 1;
    cfg.optimize.n_bs_min = 1;
    cfg.optimize.n_bs_max = 20;
    cmd_optimize(&cfg).unwrap();
    let (header, rows) = parse_csv(&read(&cfg.out_dir.join("frontier.csv")));
    assert_eq!(
        header,
        ["n_bs", "n_ue", "p_s", "p_f", "latency_slots", "latency_t0", "feasible"]
    );
    assert_eq!(rows.len(), 20);
    let feasible_min = rows
        .iter()
        .filter(|r| r[6] == 1.0)
        .min_by(|a, b| a[5].total_cmp(&b[5]))
        .unwrap();
    assert_eq!(feasible_min[0], 12.0);
    assert!(rel_err(feasible_min[5], 4.47358506144117) < 1e-3);
}

#[test]
fn figures_match_reference_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cmd_figures(&cfg).unwrap();

    // expected latency against sector count, both schemes
    let (_, fig3) = parse_csv(&read(&cfg.out_dir.join("fig3.csv")));
    for (n_bs, eh, rb) in [
        (1usize, 48.0, 21.1633118973712),
        (12, 48.0, 5.95978289368704),
        (20, 80.0, 8.40399573595256),
    ] {
        let row = &fig3[n_bs - 1];
        assert_eq!(row[1], eh, "exhaustive latency at n_bs={n_bs}");
        assert!(rel_err(row[2], rb) < 1e-3, "rb latency at n_bs={n_bs}: {}", row[2]);
    }

    // failure against budget: the exhaustive curve steps at full sweeps
    let (_, fig4) = parse_csv(&read(&cfg.out_dir.join("fig4.csv")));
    assert_eq!(fig4.len(), 120);
    assert_eq!(fig4[46][3], 1.0);
    assert!(rel_err(fig4[47][3], 0.000149947570614005) < 1e-3);
    assert_eq!(fig4[94][3], fig4[47][3]);
    assert!(rel_err(fig4[95][3], 1.50701727539007e-7) < 1e-3);
    // random-beamforming curves at the two densities
    assert!(rel_err(fig4[10][1], 0.132939116122031) < 1e-3);
    assert!(rel_err(fig4[9][2], 0.82966551560987) < 1e-3);

    // failure and latency against sector count for one and two cycles
    let (_, fig5) = parse_csv(&read(&cfg.out_dir.join("fig5.csv")));
    assert!(rel_err(fig5[0][1], 0.517567371465138) < 1e-3);
    assert!(rel_err(fig5[11][2], 0.0122492654740239) < 1e-3);
    assert!(rel_err(fig5[11][3], 4.47358506144117) < 1e-3);
    assert!(rel_err(fig5[11][4], 5.6693580137649) < 1e-3);

    // density curves: monotone, floored at the no-LoS probability
    let (_, fig2a) = parse_csv(&read(&cfg.out_dir.join("fig2a.csv")));
    for w in fig2a.windows(2) {
        assert!(w[1][1] <= w[0][1], "P_f(k=1) decreasing in density");
    }
    for row in &fig2a {
        assert!(row[4] >= row[5] * (1.0 - 1e-12), "k=1000 curve sits on the floor");
    }
}

// ---------------------------------------------------------------------------
// Binary-level checks (exit codes and stderr diagnostics)
// ---------------------------------------------------------------------------

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellsearch"))
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // success
    let out = binary()
        .args(["analytic", "--out"])
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    // config error: malformed file
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "network = { lambda = \"not a number\" }").unwrap();
    let out = binary()
        .args(["analytic", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    // config error: invalid parameter value
    let out = binary()
        .args(["analytic", "--lambda", "-1", "--out"])
        .arg(dir.path().join("neg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // config error: unknown flag
    let out = binary().args(["analytic", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // numerical failure: unattainable tolerance exhausts the subdivisions
    let out = binary()
        .args(["analytic", "--quad-rel-tol", "1e-300", "--out"])
        .arg(dir.path().join("numfail"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // infeasible optimization is still a success
    let out = binary()
        .args(["optimize", "--p-f-max", "1e-9", "--n-bs-max", "8", "--out"])
        .arg(dir.path().join("infeasible"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("infeasible"), "{stdout}");
    assert!(stdout.contains("floor") || stdout.contains("1.5070"), "{stdout}");
}
