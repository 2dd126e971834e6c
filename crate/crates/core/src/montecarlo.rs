//! Monte Carlo engine: samples network realizations around a typical
//! receiver at the origin, executes the mini-slot / scan-cycle search
//! protocols (random beamforming and the exhaustive-search baseline), and
//! aggregates empirical estimates with confidence intervals.
//!
//! # Reproducibility
//!
//! Every trial draws from its own ChaCha8 stream, derived from the master
//! seed and the trial index by [`trial_rng`]. Aggregation uses integer sums
//! only, so estimates are bit-identical for a fixed seed regardless of how
//! many worker threads execute the trials.
//!
//! Within a trial the draw order is fixed:
//!
//! 1. topology: BS count, then all positions (radius, angle per BS), then
//!    all blockage marks, then all BS sector-frame offsets, then the UE
//!    frame offset;
//! 2. per mini-slot: at a cycle start, the UE sector (iid mode) and, in
//!    cycle-permutation mode, one aligned-slot position per LoS BS; then,
//!    per LoS BS in topology order, its sector choice (iid mode) followed by
//!    its fading draw when it contributes power (all LoS base stations
//!    contribute when the sidelobe gain is nonzero).
//!
//! With per-slot topology refresh the topology draws repeat at the start of
//! every mini-slot, making slot outcomes independent and identically
//! distributed.

use std::f64::consts::TAU;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::latency_pmf_given_ps;
use crate::error::{Error, Result};
use crate::model::{DerivedConstants, NetworkParams};

/// One sampled base station, in polar coordinates around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseStation {
    /// Distance from the origin in meters.
    pub r_m: f64,
    /// Angular position as seen from the origin, radians in [0, 2*pi).
    pub angle_rad: f64,
    /// Orientation of the BS's sector frame, radians. Sector `k` of `n`
    /// spans `[offset + 2*pi*k/n, offset + 2*pi*(k+1)/n)`.
    pub sector_offset_rad: f64,
    /// Line-of-sight mark; fixed for the lifetime of the topology.
    pub los: bool,
}

impl BaseStation {
    /// Cartesian position in meters.
    pub fn xy(&self) -> (f64, f64) {
        (self.r_m * self.angle_rad.cos(), self.r_m * self.angle_rad.sin())
    }
}

/// One network realization with respect to the typical receiver at the
/// origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs: Vec<BaseStation>,
    pub region_radius_m: f64,
    /// Orientation of the UE's sector frame, radians.
    pub ue_frame_offset_rad: f64,
    /// Snapshot of the parameters the realization was drawn under.
    pub params: NetworkParams,
}

/// Outcome of evaluating a single mini-slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub detected: bool,
    /// Largest SINR among the contributing base stations, when any exist.
    pub best_sinr: Option<f64>,
    pub candidate_count: u32,
}

/// Which search protocol produced a trial outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    RandomBeamforming,
    Exhaustive,
}

/// Outcome of one full search trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub detected: bool,
    /// Mini-slot at which the search stopped, in `[1, n_c]`; present exactly
    /// when `detected`.
    pub latency_slots: Option<u32>,
    pub mode: SearchMode,
    pub first_slot_candidates: u32,
}

/// A point estimate with its 95% confidence half-width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub metric: &'static str,
    pub mean: f64,
    pub half_width_95: f64,
    pub n_trials: u64,
}

impl MetricEstimate {
    fn probability(metric: &'static str, successes: u64, n: u64) -> Self {
        let p = successes as f64 / n as f64;
        MetricEstimate {
            metric,
            mean: p,
            half_width_95: 1.96 * (p * (1.0 - p) / n as f64).sqrt(),
            n_trials: n,
        }
    }
}

/// How base stations pick their beam direction over a scan cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BsSchedule {
    /// A fresh uniform direction every mini-slot.
    Iid,
    /// Every BS covers all of its sectors once per cycle, in random order.
    CyclePermutation,
}

/// How the UE picks its receive sector, once per scan cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UeSchedule {
    IidPerCycle,
    SequentialPerCycle,
}

/// Small-scale fading lifetime. Fading is always redrawn per mini-slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingRefresh {
    PerSlot,
}

/// Topology lifetime across the mini-slots of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyRefresh {
    /// One static realization per trial (physically meaningful default).
    PerTrial,
    /// A fresh realization every mini-slot; slot outcomes become iid, which
    /// is the regime the closed-form failure expression describes exactly.
    PerSlot,
}

/// Protocol settings for simulated trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Mini-slot budget for random beamforming.
    pub n_c: u32,
    pub scheme: SearchMode,
    pub bs_schedule: BsSchedule,
    pub ue_schedule: UeSchedule,
    pub fading_refresh: FadingRefresh,
    pub topology_refresh: TopologyRefresh,
    /// Sampling region radius in meters; defaults to `40 / beta`, beyond
    /// which LoS links are vanishingly rare.
    pub region_radius_m: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_c: 12,
            scheme: SearchMode::RandomBeamforming,
            bs_schedule: BsSchedule::CyclePermutation,
            ue_schedule: UeSchedule::IidPerCycle,
            fading_refresh: FadingRefresh::PerSlot,
            topology_refresh: TopologyRefresh::PerTrial,
            region_radius_m: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c < 1 {
            return Err(Error::invalid("n_c", "mini-slot budget must be >= 1"));
        }
        if let Some(r) = self.region_radius_m {
            if !(r > 0.0) {
                return Err(Error::invalid("region_radius_m", "must be > 0"));
            }
        }
        if self.topology_refresh == TopologyRefresh::PerSlot
            && self.bs_schedule != BsSchedule::Iid
        {
            return Err(Error::invalid(
                "bs_schedule",
                "per-slot topology refresh requires the iid schedule (a cycle \
                 permutation is meaningless when the world changes every slot)",
            ));
        }
        Ok(())
    }

    /// Effective sampling radius.
    pub fn region_radius(&self, params: &NetworkParams) -> f64 {
        self.region_radius_m.unwrap_or(40.0 / params.beta)
    }
}

/// Per-trial record for optional CSV dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub detected: bool,
    pub latency_slots: Option<u32>,
    pub candidate_count_first_slot: u32,
}

/// Aggregated empirical estimates over a batch of independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub p_f: MetricEstimate,
    /// Mean latency conditioned on detection, in slots / units of t0; absent
    /// when no trial detected.
    pub latency_slots: Option<MetricEstimate>,
    pub latency_t0: Option<MetricEstimate>,
    /// `latency_histogram[n-1]` counts detected trials with latency `n`.
    pub latency_histogram: Vec<u64>,
    pub n_trials: u64,
    pub n_detected: u64,
}

/// The deterministic per-trial RNG: master-seeded ChaCha8 on stream
/// `trial_index`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Decide `u < exp(-x)` for `x >= 0`. The bounds `1 - x <= exp(-x) <= 1/(1+x)`
/// settle almost every draw without evaluating the exponential, which
/// dominates the topology-sampling cost otherwise.
#[inline]
fn bernoulli_exp_neg(x: f64, u: f64) -> bool {
    if u * (1.0 + x) >= 1.0 {
        false
    } else if u + x < 1.0 {
        true
    } else {
        u < (-x).exp()
    }
}

/// Which sector of `n` (with frame orientation `frame_offset_rad`) contains
/// the direction `angle_rad`.
pub fn sector_index(angle_rad: f64, frame_offset_rad: f64, n: u32) -> u32 {
    debug_assert!(n >= 1);
    let rel = (angle_rad - frame_offset_rad).rem_euclid(TAU);
    (((rel / TAU) * n as f64) as u32).min(n - 1)
}

/// Draw one network realization: a Poisson number of base stations placed
/// uniformly on the disc of radius `region_radius_m`, each with an
/// independent LoS mark of probability `exp(-beta * r)` and a uniform sector
/// frame orientation. Blockage marks are fixed for the lifetime of the
/// topology.
pub fn sample_topology<R: Rng + ?Sized>(
    params: &NetworkParams,
    region_radius_m: f64,
    rng: &mut R,
) -> Topology {
    debug_assert!(region_radius_m > 0.0);
    let mean = params.lambda * std::f64::consts::PI * region_radius_m * region_radius_m;
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;

    let mut bs: Vec<BaseStation> = (0..count)
        .map(|_| BaseStation {
            r_m: region_radius_m * rng.gen::<f64>().sqrt(),
            angle_rad: TAU * rng.gen::<f64>(),
            sector_offset_rad: 0.0,
            los: false,
        })
        .collect();
    for b in bs.iter_mut() {
        b.los = bernoulli_exp_neg(params.beta * b.r_m, rng.gen::<f64>());
    }
    for b in bs.iter_mut() {
        b.sector_offset_rad = TAU * rng.gen::<f64>();
    }
    let ue_frame_offset_rad = TAU * rng.gen::<f64>();

    Topology {
        bs,
        region_radius_m,
        ue_frame_offset_rad,
        params: *params,
    }
}

/// Evaluate one mini-slot given explicit beam choices and fading draws.
///
/// A base station contributes power iff it has LoS and its combined antenna
/// gain toward the origin is nonzero: with zero sidelobe gain that means its
/// chosen sector covers the origin *and* the UE's chosen sector covers the
/// BS. Contribution `i` has power `h_i * pathloss(r_i) * gain_factor_i` and
/// `SINR_i = p_i / (sum of other contributions + normalized noise)`; the
/// slot detects iff some contribution reaches the SINR threshold (ties
/// count as detected).
///
/// Panics if `bs_beam_choices` or `fading` are not index-aligned with
/// `topology.bs`, or if `params` fail validation.
pub fn slot_sinr(
    topology: &Topology,
    bs_beam_choices: &[u32],
    ue_sector: u32,
    fading: &[f64],
    params: &NetworkParams,
) -> SlotOutcome {
    assert_eq!(bs_beam_choices.len(), topology.bs.len(), "one beam choice per BS");
    assert_eq!(fading.len(), topology.bs.len(), "one fading draw per BS");
    assert!(ue_sector < params.n_ue);
    let derived = params.derive().expect("valid network parameters");

    let gains = GainTable::new(params, &derived);
    let mut powers = Vec::new();
    for (i, b) in topology.bs.iter().enumerate() {
        if !b.los {
            continue;
        }
        let tx_main =
            sector_index(b.angle_rad + std::f64::consts::PI, b.sector_offset_rad, params.n_bs)
                == bs_beam_choices[i];
        let rx_main =
            sector_index(b.angle_rad, topology.ue_frame_offset_rad, params.n_ue) == ue_sector;
        let factor = gains.factor(tx_main, rx_main);
        if factor == 0.0 {
            continue;
        }
        powers.push(fading[i] * derived.pathloss_const * b.r_m.powf(-params.alpha) * factor);
    }
    finish_slot(&powers, derived.sigma2_norm, params.sinr_threshold)
}

/// Relative gain factors (normalized to the main-main product) for the four
/// main/side lobe combinations.
struct GainTable {
    tx_side: f64,
    rx_side: f64,
}

impl GainTable {
    fn new(params: &NetworkParams, derived: &DerivedConstants) -> Self {
        GainTable {
            tx_side: params.epsilon / derived.g_bs,
            rx_side: params.epsilon / derived.g_ue,
        }
    }

    fn factor(&self, tx_main: bool, rx_main: bool) -> f64 {
        let tx = if tx_main { 1.0 } else { self.tx_side };
        let rx = if rx_main { 1.0 } else { self.rx_side };
        tx * rx
    }
}

fn finish_slot(powers: &[f64], sigma2: f64, threshold: f64) -> SlotOutcome {
    if powers.is_empty() {
        return SlotOutcome {
            detected: false,
            best_sinr: None,
            candidate_count: 0,
        };
    }
    let total: f64 = powers.iter().sum();
    let mut best = f64::NEG_INFINITY;
    for &p in powers {
        let sinr = p / (total - p + sigma2);
        if sinr > best {
            best = sinr;
        }
    }
    SlotOutcome {
        detected: best >= threshold,
        best_sinr: Some(best),
        candidate_count: powers.len() as u32,
    }
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

/// Geometry of one LoS base station, precomputed once per topology.
#[derive(Debug, Clone, Copy)]
struct LosBs {
    pathloss: f64,
    /// Sector (in the BS's own frame) that covers the origin.
    tx_sector_to_origin: u32,
    /// UE sector (in the UE's frame) that contains the BS.
    ue_sector_of_bs: u32,
}

fn los_view(topology: &Topology, params: &NetworkParams, derived: &DerivedConstants) -> Vec<LosBs> {
    topology
        .bs
        .iter()
        .filter(|b| b.los)
        .map(|b| LosBs {
            pathloss: derived.pathloss_const * b.r_m.powf(-params.alpha),
            tx_sector_to_origin: sector_index(
                b.angle_rad + std::f64::consts::PI,
                b.sector_offset_rad,
                params.n_bs,
            ),
            ue_sector_of_bs: sector_index(b.angle_rad, topology.ue_frame_offset_rad, params.n_ue),
        })
        .collect()
}

/// Runtime context shared by the slot evaluations of one trial.
struct TrialCtx {
    sigma2: f64,
    threshold: f64,
    gains: GainTable,
}

impl TrialCtx {
    fn new(params: &NetworkParams, derived: &DerivedConstants) -> Self {
        TrialCtx {
            sigma2: derived.sigma2_norm,
            threshold: params.sinr_threshold,
            gains: GainTable::new(params, derived),
        }
    }

    /// Evaluate one slot over the LoS view, drawing fading lazily for the
    /// base stations that contribute power, in topology order. With zero
    /// sidelobe gain only the doubly-aligned stations contribute; otherwise
    /// every LoS station does.
    fn eval_slot<R: Rng + ?Sized>(
        &self,
        view: &[LosBs],
        ue_sector: u32,
        mut tx_main: impl FnMut(usize, &mut R) -> bool,
        rng: &mut R,
        scratch: &mut Vec<f64>,
    ) -> SlotOutcome {
        scratch.clear();
        for (i, b) in view.iter().enumerate() {
            let tx = tx_main(i, rng);
            let rx = b.ue_sector_of_bs == ue_sector;
            let factor = self.gains.factor(tx, rx);
            if factor > 0.0 {
                let h: f64 = Exp1.sample(rng);
                scratch.push(h * b.pathloss * factor);
            }
        }
        finish_slot(scratch, self.sigma2, self.threshold)
    }
}

/// Run one random-beamforming trial on a fixed topology: mini-slots run
/// until the first detection or the budget is exhausted. The UE re-aims once
/// per scan cycle of `n_bs` slots; base stations pick directions per the
/// configured schedule; fading is fresh every slot.
pub fn run_rb_trial<R: Rng + ?Sized>(
    topology: &Topology,
    protocol: &ProtocolConfig,
    params: &NetworkParams,
    rng: &mut R,
) -> TrialOutcome {
    let derived = params.derive().expect("valid network parameters");
    let view = los_view(topology, params, &derived);
    let ctx = TrialCtx::new(params, &derived);
    let mut scratch = Vec::with_capacity(8);
    let mut aligned_slot: Vec<u32> = Vec::new();
    let mut first_slot_candidates = 0u32;
    let mut ue_sector = 0u32;

    for slot in 0..protocol.n_c {
        let slot_in_cycle = slot % params.n_bs;
        if slot_in_cycle == 0 {
            let cycle = slot / params.n_bs;
            ue_sector = match protocol.ue_schedule {
                UeSchedule::IidPerCycle => rng.gen_range(0..params.n_ue),
                UeSchedule::SequentialPerCycle => cycle % params.n_ue,
            };
            if protocol.bs_schedule == BsSchedule::CyclePermutation {
                // Under a uniform random sector permutation only the slot at
                // which the origin-facing sector comes up matters, and that
                // position is uniform over the cycle: one draw per LoS BS.
                aligned_slot.clear();
                aligned_slot.extend((0..view.len()).map(|_| rng.gen_range(0..params.n_bs)));
            }
        }

        let outcome = match protocol.bs_schedule {
            BsSchedule::Iid => ctx.eval_slot(
                &view,
                ue_sector,
                |i, rng: &mut R| rng.gen_range(0..params.n_bs) == view[i].tx_sector_to_origin,
                rng,
                &mut scratch,
            ),
            BsSchedule::CyclePermutation => ctx.eval_slot(
                &view,
                ue_sector,
                |i, _rng: &mut R| aligned_slot[i] == slot_in_cycle,
                rng,
                &mut scratch,
            ),
        };
        if slot == 0 {
            first_slot_candidates = outcome.candidate_count;
        }
        if outcome.detected {
            return TrialOutcome {
                detected: true,
                latency_slots: Some(slot + 1),
                mode: SearchMode::RandomBeamforming,
                first_slot_candidates,
            };
        }
    }
    TrialOutcome {
        detected: false,
        latency_slots: None,
        mode: SearchMode::RandomBeamforming,
        first_slot_candidates,
    }
}

/// Run one exhaustive-search trial: all `n_bs * n_ue` beam-pair combinations
/// are swept with fresh fading per slot, detection is declared if any slot
/// meets the threshold, and the latency is always the full sweep length (no
/// early stop).
pub fn run_exhaustive_trial<R: Rng + ?Sized>(
    topology: &Topology,
    params: &NetworkParams,
    rng: &mut R,
) -> TrialOutcome {
    let derived = params.derive().expect("valid network parameters");
    let view = los_view(topology, params, &derived);
    let ctx = TrialCtx::new(params, &derived);
    let mut scratch = Vec::with_capacity(8);
    let mut detected = false;
    let mut first_slot_candidates = 0u32;

    for ue_sector in 0..params.n_ue {
        for bs_sector in 0..params.n_bs {
            let outcome = ctx.eval_slot(
                &view,
                ue_sector,
                |i, _rng: &mut R| view[i].tx_sector_to_origin == bs_sector,
                rng,
                &mut scratch,
            );
            if ue_sector == 0 && bs_sector == 0 {
                first_slot_candidates = outcome.candidate_count;
            }
            detected |= outcome.detected;
        }
    }
    let sweep = params.n_bs * params.n_ue;
    TrialOutcome {
        detected,
        latency_slots: detected.then_some(sweep),
        mode: SearchMode::Exhaustive,
        first_slot_candidates,
    }
}

/// Random-beamforming trial in the per-slot-refresh validation mode: every
/// mini-slot sees a freshly sampled topology, so slots are iid.
fn run_rb_trial_fresh<R: Rng + ?Sized>(
    protocol: &ProtocolConfig,
    params: &NetworkParams,
    region_radius_m: f64,
    derived: &DerivedConstants,
    rng: &mut R,
) -> TrialOutcome {
    let ctx = TrialCtx::new(params, derived);
    let mut scratch = Vec::with_capacity(8);
    let mut first_slot_candidates = 0u32;
    let mut ue_sector = 0u32;

    for slot in 0..protocol.n_c {
        let topology = sample_topology(params, region_radius_m, rng);
        let view = los_view(&topology, params, derived);
        if slot % params.n_bs == 0 {
            let cycle = slot / params.n_bs;
            ue_sector = match protocol.ue_schedule {
                UeSchedule::IidPerCycle => rng.gen_range(0..params.n_ue),
                UeSchedule::SequentialPerCycle => cycle % params.n_ue,
            };
        }
        let outcome = ctx.eval_slot(
            &view,
            ue_sector,
            |i, rng: &mut R| rng.gen_range(0..params.n_bs) == view[i].tx_sector_to_origin,
            rng,
            &mut scratch,
        );
        if slot == 0 {
            first_slot_candidates = outcome.candidate_count;
        }
        if outcome.detected {
            return TrialOutcome {
                detected: true,
                latency_slots: Some(slot + 1),
                mode: SearchMode::RandomBeamforming,
                first_slot_candidates,
            };
        }
    }
    TrialOutcome {
        detected: false,
        latency_slots: None,
        mode: SearchMode::RandomBeamforming,
        first_slot_candidates,
    }
}

/// Exhaustive sweep with a fresh topology every slot (validation mode).
fn run_exhaustive_trial_fresh<R: Rng + ?Sized>(
    params: &NetworkParams,
    region_radius_m: f64,
    derived: &DerivedConstants,
    rng: &mut R,
) -> TrialOutcome {
    let ctx = TrialCtx::new(params, derived);
    let mut scratch = Vec::with_capacity(8);
    let mut detected = false;
    let mut first_slot_candidates = 0u32;

    for ue_sector in 0..params.n_ue {
        for bs_sector in 0..params.n_bs {
            let topology = sample_topology(params, region_radius_m, rng);
            let view = los_view(&topology, params, derived);
            let outcome = ctx.eval_slot(
                &view,
                ue_sector,
                |i, _rng: &mut R| view[i].tx_sector_to_origin == bs_sector,
                rng,
                &mut scratch,
            );
            if ue_sector == 0 && bs_sector == 0 {
                first_slot_candidates = outcome.candidate_count;
            }
            detected |= outcome.detected;
        }
    }
    let sweep = params.n_bs * params.n_ue;
    TrialOutcome {
        detected,
        latency_slots: detected.then_some(sweep),
        mode: SearchMode::Exhaustive,
        first_slot_candidates,
    }
}

fn run_one_trial(
    params: &NetworkParams,
    protocol: &ProtocolConfig,
    region_radius_m: f64,
    derived: &DerivedConstants,
    rng: &mut ChaCha8Rng,
) -> TrialOutcome {
    match (protocol.topology_refresh, protocol.scheme) {
        (TopologyRefresh::PerTrial, SearchMode::RandomBeamforming) => {
            let topology = sample_topology(params, region_radius_m, rng);
            run_rb_trial(&topology, protocol, params, rng)
        }
        (TopologyRefresh::PerTrial, SearchMode::Exhaustive) => {
            let topology = sample_topology(params, region_radius_m, rng);
            run_exhaustive_trial(&topology, params, rng)
        }
        (TopologyRefresh::PerSlot, SearchMode::RandomBeamforming) => {
            run_rb_trial_fresh(protocol, params, region_radius_m, derived, rng)
        }
        (TopologyRefresh::PerSlot, SearchMode::Exhaustive) => {
            run_exhaustive_trial_fresh(params, region_radius_m, derived, rng)
        }
    }
}

#[derive(Debug, Clone)]
struct Accum {
    n_trials: u64,
    detected: u64,
    latency_sum: u64,
    latency_sq_sum: u128,
    histogram: Vec<u64>,
}

impl Accum {
    fn new(max_latency: u32) -> Self {
        Accum {
            n_trials: 0,
            detected: 0,
            latency_sum: 0,
            latency_sq_sum: 0,
            histogram: vec![0; max_latency as usize],
        }
    }

    fn add(&mut self, latency_slots: Option<u32>) {
        self.n_trials += 1;
        if let Some(lat) = latency_slots {
            self.detected += 1;
            self.latency_sum += lat as u64;
            self.latency_sq_sum += (lat as u128) * (lat as u128);
            self.histogram[(lat - 1) as usize] += 1;
        }
    }

    fn merge(mut self, other: Accum) -> Accum {
        self.n_trials += other.n_trials;
        self.detected += other.detected;
        self.latency_sum += other.latency_sum;
        self.latency_sq_sum += other.latency_sq_sum;
        for (a, b) in self.histogram.iter_mut().zip(other.histogram.iter()) {
            *a += b;
        }
        self
    }

    fn report(&self, derived: &DerivedConstants) -> EstimateReport {
        let failures = self.n_trials - self.detected;
        let p_f = MetricEstimate::probability("p_f", failures, self.n_trials);
        let (latency_slots, latency_t0) = if self.detected > 0 {
            let n = self.detected as f64;
            let mean = self.latency_sum as f64 / n;
            let var = if self.detected > 1 {
                (self.latency_sq_sum as f64 - n * mean * mean) / (n - 1.0)
            } else {
                0.0
            };
            let hw = 1.96 * (var.max(0.0) / n).sqrt();
            let slots = MetricEstimate {
                metric: "latency_slots",
                mean,
                half_width_95: hw,
                n_trials: self.detected,
            };
            let t0 = MetricEstimate {
                metric: "latency_t0",
                mean: mean * derived.t_slot_t0,
                half_width_95: hw * derived.t_slot_t0,
                n_trials: self.detected,
            };
            (Some(slots), Some(t0))
        } else {
            (None, None)
        };
        EstimateReport {
            p_f,
            latency_slots,
            latency_t0,
            latency_histogram: self.histogram.clone(),
            n_trials: self.n_trials,
            n_detected: self.detected,
        }
    }
}

fn validate_estimate_inputs(
    params: &NetworkParams,
    protocol: &ProtocolConfig,
    n_trials: u64,
) -> Result<(f64, DerivedConstants, u32)> {
    params.validate()?;
    protocol.validate()?;
    if n_trials < 1 {
        return Err(Error::invalid("n_trials", "must be >= 1"));
    }
    let max_latency = match protocol.scheme {
        SearchMode::RandomBeamforming => protocol.n_c,
        SearchMode::Exhaustive => params.n_bs * params.n_ue,
    };
    Ok((protocol.region_radius(params), params.derive()?, max_latency))
}

/// Run `n_trials` independent trials (fresh topology each) and aggregate
/// empirical estimates of the failure probability and the conditional
/// latency distribution. Deterministic for a fixed `master_seed` regardless
/// of the number of worker threads.
pub fn estimate(
    params: &NetworkParams,
    protocol: &ProtocolConfig,
    n_trials: u64,
    master_seed: u64,
) -> Result<EstimateReport> {
    let (region, derived, max_latency) = validate_estimate_inputs(params, protocol, n_trials)?;
    let accum = (0..n_trials)
        .into_par_iter()
        .fold(
            || Accum::new(max_latency),
            |mut acc, trial_index| {
                let mut rng = trial_rng(master_seed, trial_index);
                let outcome = run_one_trial(params, protocol, region, &derived, &mut rng);
                acc.add(outcome.latency_slots);
                acc
            },
        )
        .reduce(|| Accum::new(max_latency), Accum::merge);
    Ok(accum.report(&derived))
}

/// [`estimate`], additionally materializing one record per trial (in trial
/// order) for CSV export.
pub fn estimate_with_records(
    params: &NetworkParams,
    protocol: &ProtocolConfig,
    n_trials: u64,
    master_seed: u64,
) -> Result<(EstimateReport, Vec<TrialRecord>)> {
    let (region, derived, max_latency) = validate_estimate_inputs(params, protocol, n_trials)?;
    let records: Vec<TrialRecord> = (0..n_trials)
        .into_par_iter()
        .map(|trial_index| {
            let mut rng = trial_rng(master_seed, trial_index);
            let outcome = run_one_trial(params, protocol, region, &derived, &mut rng);
            TrialRecord {
                trial_index,
                detected: outcome.detected,
                latency_slots: outcome.latency_slots,
                candidate_count_first_slot: outcome.first_slot_candidates,
            }
        })
        .collect();
    let mut accum = Accum::new(max_latency);
    for r in &records {
        accum.add(r.latency_slots);
    }
    Ok((accum.report(&derived), records))
}

/// Chi-square goodness-of-fit p-value of an empirical latency histogram
/// against the truncated-geometric law with per-slot success `p_s`.
///
/// Tail bins are pooled until each pooled bin has an expected count of at
/// least 5 (the usual validity rule). Degrees of freedom: pooled bins minus
/// one (`p_s` is supplied, not fitted).
pub fn latency_gof_pvalue(histogram: &[u64], p_s: f64) -> Result<f64> {
    let n_c = histogram.len() as u32;
    if n_c < 2 {
        return Err(Error::invalid("histogram", "needs at least two latency bins"));
    }
    let n_detected: u64 = histogram.iter().sum();
    if n_detected == 0 {
        return Err(Error::invalid("histogram", "no detected trials to test"));
    }

    let mut pooled: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (i, &obs) in histogram.iter().enumerate() {
        acc_obs += obs as f64;
        acc_exp += n_detected as f64 * latency_pmf_given_ps(i as u32 + 1, n_c, p_s)?;
        if acc_exp >= 5.0 {
            pooled.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            pooled.push((acc_obs, acc_exp));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::invalid(
            "histogram",
            "too few trials for a chi-square test after pooling",
        ));
    }

    let x2: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (pooled.len() - 1) as f64;
    let chi2 = ChiSquared::new(dof).expect("positive dof");
    Ok(1.0 - chi2.cdf(x2))
}
