//! Statistical validation of the Monte Carlo engine against independent
//! references: Poisson/blockage sampling statistics, the finite-ball no-LoS
//! closed form, the analytic per-slot success probability, the slot-
//! independence exponent law, and the exhaustive-search equivalences.
//!
//! Every test is seeded, so outcomes are deterministic; tolerances are three
//! standard errors of the respective estimator.

use cellsearch::analytic::{p_no_los_finite, p_success};
use cellsearch::model::NetworkParams;
use cellsearch::montecarlo::{
    estimate, run_exhaustive_trial, run_rb_trial, sample_topology, trial_rng, BsSchedule,
    ProtocolConfig, SearchMode, TopologyRefresh, TopologyRefresh::PerSlot, UeSchedule,
};
use cellsearch::quad::QuadratureConfig;

fn defaults() -> NetworkParams {
    NetworkParams::default()
}

#[test]
fn topology_count_matches_poisson_mean() {
    let params = defaults();
    let radius = 50.0;
    let expected = params.lambda * std::f64::consts::PI * radius * radius;
    let n = 100_000u64;
    let mut rng = trial_rng(11, 0);
    let mut total = 0u64;
    for _ in 0..n {
        total += sample_topology(&params, radius, &mut rng).bs.len() as u64;
    }
    let mean = total as f64 / n as f64;
    // Poisson variance equals the mean.
    let three_se = 3.0 * (expected / n as f64).sqrt();
    assert!(
        (mean - expected).abs() < three_se,
        "mean count {mean} vs {expected} +- {three_se}"
    );
}

#[test]
fn los_fraction_follows_blockage_curve() {
    let params = NetworkParams { lambda: 1e-4, ..defaults() };
    let radius = 2000.0;
    let beta = params.beta;
    let mut rng = trial_rng(12, 0);
    let bins = [(0.0, 100.0), (100.0, 200.0), (200.0, 300.0)];
    let mut los = [0u64; 3];
    let mut tot = [0u64; 3];
    for _ in 0..800 {
        let topo = sample_topology(&params, radius, &mut rng);
        for b in &topo.bs {
            for (k, (lo, hi)) in bins.iter().enumerate() {
                if b.r_m >= *lo && b.r_m < *hi {
                    tot[k] += 1;
                    los[k] += b.los as u64;
                }
            }
        }
    }
    for (k, (lo, hi)) in bins.iter().enumerate() {
        // exact LoS fraction within a bin of the r-weighted position law:
        // integral of r e^(-beta r) over the bin / integral of r
        let anti = |r: f64| -((beta * r + 1.0) * (-beta * r).exp()) / (beta * beta);
        let expected = (anti(*hi) - anti(*lo)) / ((hi * hi - lo * lo) / 2.0);
        let p_hat = los[k] as f64 / tot[k] as f64;
        let three_se = 3.0 * (expected * (1.0 - expected) / tot[k] as f64).sqrt();
        assert!(
            (p_hat - expected).abs() < three_se,
            "bin [{lo},{hi}): {p_hat} vs {expected} +- {three_se} (n={})",
            tot[k]
        );
    }
}

#[test]
fn finite_ball_no_los_matches_closed_form() {
    let params = defaults();
    let radius = 50.0;
    let expected = p_no_los_finite(params.lambda, params.beta, radius);
    let n = 1_000_000u64;
    let mut rng = trial_rng(13, 0);
    let mut empty = 0u64;
    for _ in 0..n {
        let topo = sample_topology(&params, radius, &mut rng);
        empty += topo.bs.iter().all(|b| !b.los) as u64;
    }
    let p_hat = empty as f64 / n as f64;
    let three_se = 3.0 * (expected * (1.0 - expected) / n as f64).sqrt();
    assert!(
        (p_hat - expected).abs() < three_se,
        "no-LoS fraction {p_hat} vs {expected} +- {three_se}"
    );
}

fn per_slot_protocol(n_c: u32, region: f64) -> ProtocolConfig {
    ProtocolConfig {
        n_c,
        scheme: SearchMode::RandomBeamforming,
        bs_schedule: BsSchedule::Iid,
        ue_schedule: UeSchedule::IidPerCycle,
        topology_refresh: PerSlot,
        region_radius_m: Some(region),
        ..Default::default()
    }
}

#[test]
fn slot_detection_frequency_matches_analytic() {
    let params = defaults();
    let analytic = p_success(&params, &QuadratureConfig::default()).unwrap().value;
    let n = 50_000u64;
    let report = estimate(&params, &per_slot_protocol(1, 1000.0), n, 21).unwrap();
    let p_hat = 1.0 - report.p_f.mean;
    let three_se = 3.0 * (analytic * (1.0 - analytic) / n as f64).sqrt();
    assert!(
        (p_hat - analytic).abs() < three_se,
        "empirical P_s {p_hat} vs analytic {analytic} +- {three_se}"
    );
}

/// With iid schedules and a fresh topology per slot, slots are iid, so the
/// failure probability is exactly the single-slot failure raised to the
/// budget.
#[test]
fn failure_exponentiates_over_independent_slots() {
    let params = defaults();
    let region = 1000.0;
    let n1 = 60_000u64;
    let p1 = estimate(&params, &per_slot_protocol(1, region), n1, 31)
        .unwrap()
        .p_f
        .mean;
    let se1 = (p1 * (1.0 - p1) / n1 as f64).sqrt();
    for (n_c, trials) in [(4u32, 30_000u64), (12, 20_000)] {
        let pf = estimate(&params, &per_slot_protocol(n_c, region), trials, 32 + n_c as u64)
            .unwrap()
            .p_f
            .mean;
        let predicted = p1.powi(n_c as i32);
        let se_pf = (pf * (1.0 - pf) / trials as f64).sqrt();
        let se_pred = n_c as f64 * p1.powi(n_c as i32 - 1) * se1;
        let three_se = 3.0 * (se_pf * se_pf + se_pred * se_pred).sqrt();
        assert!(
            (pf - predicted).abs() < three_se,
            "n_c={n_c}: P_f {pf} vs P_f(1)^n {predicted} +- {three_se}"
        );
    }
}

/// On a static topology, random beamforming with per-cycle sector
/// permutations and a sequential UE sweep gives every LoS BS exactly one
/// aligned pilot per full sweep, the same coverage pattern as exhaustive
/// search, so the two failure probabilities coincide.
#[test]
fn exhaustive_and_covering_rb_fail_equally_often() {
    let params = defaults();
    let region = 1000.0;
    let trials = 120_000u64;

    let rb_protocol = ProtocolConfig {
        n_c: 48,
        scheme: SearchMode::RandomBeamforming,
        bs_schedule: BsSchedule::CyclePermutation,
        ue_schedule: UeSchedule::SequentialPerCycle,
        topology_refresh: TopologyRefresh::PerTrial,
        region_radius_m: Some(region),
        ..Default::default()
    };
    let rb = estimate(&params, &rb_protocol, trials, 41).unwrap();

    let eh_protocol = ProtocolConfig {
        scheme: SearchMode::Exhaustive,
        region_radius_m: Some(region),
        ..Default::default()
    };
    let eh = estimate(&params, &eh_protocol, trials, 42).unwrap();

    let pooled = (rb.p_f.mean + eh.p_f.mean) / 2.0;
    let three_se = 3.0 * (2.0 * pooled * (1.0 - pooled) / trials as f64).sqrt();
    assert!(
        (rb.p_f.mean - eh.p_f.mean).abs() < three_se,
        "RB {} vs EH {} +- {three_se}",
        rb.p_f.mean,
        eh.p_f.mean
    );
    // the exhaustive latency is degenerate at the full sweep length
    assert_eq!(eh.latency_slots.unwrap().mean, 48.0);
    assert!(eh
        .latency_histogram
        .iter()
        .enumerate()
        .all(|(i, &c)| c == 0 || i == 47));
    // early stopping makes the covering RB strictly faster on average
    assert!(rb.latency_slots.unwrap().mean < 48.0);
}

/// With a fresh topology per mini-slot, the exhaustive sweep's slots are
/// independent with the analytic per-slot success marginal, so its failure
/// rate follows the closed-form power law over the full sweep.
#[test]
fn exhaustive_failure_rate_matches_power_law() {
    let params = defaults();
    let analytic = p_success(&params, &QuadratureConfig::default()).unwrap().value;
    let predicted = (48.0 * (-analytic).ln_1p()).exp();
    let protocol = ProtocolConfig {
        scheme: SearchMode::Exhaustive,
        bs_schedule: BsSchedule::Iid,
        topology_refresh: PerSlot,
        region_radius_m: Some(500.0),
        ..Default::default()
    };
    let trials = 25_000u64;
    let report = estimate(&params, &protocol, trials, 61).unwrap();
    let three_se = 3.0 * (predicted * (1.0 - predicted) / trials as f64).sqrt();
    assert!(
        (report.p_f.mean - predicted).abs() < three_se,
        "exhaustive P_f {} vs (1 - P_s)^48 = {predicted:.4e} +- {three_se:.4e}",
        report.p_f.mean
    );
}

/// Direct trial runners agree with the aggregate driver on a fixed seed.
#[test]
fn trial_runners_match_estimate_aggregation() {
    let params = defaults();
    let region = 500.0;
    let protocol = ProtocolConfig {
        n_c: 6,
        region_radius_m: Some(region),
        ..Default::default()
    };
    let report = estimate(&params, &protocol, 500, 77).unwrap();
    let mut detected = 0u64;
    for i in 0..500 {
        let mut rng = trial_rng(77, i);
        let topo = sample_topology(&params, region, &mut rng);
        let out = run_rb_trial(&topo, &protocol, &params, &mut rng);
        detected += out.detected as u64;
    }
    assert_eq!(report.n_detected, detected);

    let eh_protocol = ProtocolConfig {
        scheme: SearchMode::Exhaustive,
        region_radius_m: Some(region),
        ..Default::default()
    };
    let report = estimate(&params, &eh_protocol, 300, 78).unwrap();
    let mut detected = 0u64;
    for i in 0..300 {
        let mut rng = trial_rng(78, i);
        let topo = sample_topology(&params, region, &mut rng);
        detected += run_exhaustive_trial(&topo, &params, &mut rng).detected as u64;
    }
    assert_eq!(report.n_detected, detected);
}

/// Estimates are already stable at the default sampling radius: growing the
/// region does not move the per-slot success estimate beyond noise.
#[test]
fn region_truncation_is_adequate() {
    let params = defaults();
    let n = 40_000u64;
    let half = estimate(&params, &per_slot_protocol(1, 1000.0), n, 51).unwrap();
    let full = estimate(&params, &per_slot_protocol(1, 2000.0), n, 52).unwrap();
    let p = (half.p_f.mean + full.p_f.mean) / 2.0;
    let three_se = 3.0 * (2.0 * p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (half.p_f.mean - full.p_f.mean).abs() < three_se,
        "radius 1000: {} vs radius 2000: {} +- {three_se}",
        half.p_f.mean,
        full.p_f.mean
    );
}
