//! Integer beamwidth design: choose the number of BS sectors that minimizes
//! the expected search latency subject to a detection-failure cap, for a
//! given number of scan cycles.

use crate::analytic::{
    expected_latency_given_ps, p_failure_given_ps, p_no_los, p_success,
};
use crate::error::{Error, Result};
use crate::model::NetworkParams;
use crate::quad::QuadratureConfig;

/// The design problem: minimize expected latency over `n_bs` subject to
/// `p_f(k * n_bs) <= p_f_max`, holding every other parameter fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignProblem {
    /// Failure-probability cap, in [0, 1].
    pub p_f_max: f64,
    /// Number of scan cycles; the search budget at `n_bs` is `k * n_bs`
    /// mini-slots (the UE re-aims once per cycle).
    pub k: u32,
    /// Inclusive range of sector counts to evaluate.
    pub n_bs_range: (u32, u32),
    /// Base parameters; the `n_bs` field is overwritten per candidate.
    pub base: NetworkParams,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_f_max) {
            return Err(Error::invalid("p_f_max", "must lie in [0, 1]"));
        }
        if self.k < 1 {
            return Err(Error::invalid("k", "scan cycle count must be >= 1"));
        }
        let (lo, hi) = self.n_bs_range;
        if lo < 1 || hi < lo {
            return Err(Error::invalid("n_bs_range", "needs 1 <= lo <= hi"));
        }
        Ok(())
    }
}

/// One evaluated candidate of the design sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub n_bs: u32,
    pub n_ue: u32,
    pub p_s: f64,
    pub p_f: f64,
    pub latency_slots: f64,
    pub latency_t0: f64,
}

/// Solver output: the feasible minimizer if one exists, plus the full
/// evaluated frontier either way.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSolution {
    /// `None` marks an infeasible problem (no candidate meets the cap).
    pub n_bs_opt: Option<u32>,
    pub n_ue_opt: Option<u32>,
    pub latency_t0: Option<f64>,
    pub p_f_achieved: Option<f64>,
    /// The cap can never be met below this value, whatever the beamwidth:
    /// useful for telling "increase k" apart from "physically impossible".
    pub p_no_los_floor: f64,
    pub frontier: Vec<FrontierPoint>,
}

fn evaluate_candidate(
    n_bs: u32,
    n_ue: u32,
    problem: &DesignProblem,
    quad: &QuadratureConfig,
    floor: f64,
) -> Result<FrontierPoint> {
    let params = NetworkParams {
        n_bs,
        n_ue,
        ..problem.base
    };
    let ps = p_success(&params, quad)?;
    let n_c = problem.k * n_bs;
    let latency = expected_latency_given_ps(n_c, ps.value, &params.derive()?)?;
    Ok(FrontierPoint {
        n_bs,
        n_ue,
        p_s: ps.value,
        p_f: p_failure_given_ps(n_c, ps.value, floor),
        latency_slots: latency.slots,
        latency_t0: latency.t0_units,
    })
}

fn pick_minimizer(solution: &mut DesignSolution, p_f_max: f64) {
    for point in &solution.frontier {
        if point.p_f > p_f_max {
            continue;
        }
        // strict comparison keeps the smallest sector count among ties
        if solution.latency_t0.is_none_or(|best| point.latency_t0 < best) {
            solution.n_bs_opt = Some(point.n_bs);
            solution.n_ue_opt = Some(point.n_ue);
            solution.latency_t0 = Some(point.latency_t0);
            solution.p_f_achieved = Some(point.p_f);
        }
    }
}

/// Exhaustively evaluate every sector count in the range and return the
/// feasible latency minimizer (smallest `n_bs` breaks ties) or the
/// infeasible marker. The frontier is returned in both cases.
pub fn solve(problem: &DesignProblem, quad: &QuadratureConfig) -> Result<DesignSolution> {
    problem.validate()?;
    quad.validate()?;
    let floor = p_no_los(problem.base.lambda, problem.base.beta);
    let (lo, hi) = problem.n_bs_range;
    let mut solution = DesignSolution {
        n_bs_opt: None,
        n_ue_opt: None,
        latency_t0: None,
        p_f_achieved: None,
        p_no_los_floor: floor,
        frontier: Vec::with_capacity((hi - lo + 1) as usize),
    };
    for n_bs in lo..=hi {
        solution
            .frontier
            .push(evaluate_candidate(n_bs, problem.base.n_ue, problem, quad, floor)?);
    }
    pick_minimizer(&mut solution, problem.p_f_max);
    Ok(solution)
}

/// Extension of [`solve`] over a joint `(n_bs, n_ue)` grid. The frontier is
/// ordered `n_ue`-major, and the tie-break prefers smaller `n_ue`, then
/// smaller `n_bs`.
pub fn solve_joint(
    problem: &DesignProblem,
    n_ue_range: (u32, u32),
    quad: &QuadratureConfig,
) -> Result<DesignSolution> {
    problem.validate()?;
    quad.validate()?;
    let (ue_lo, ue_hi) = n_ue_range;
    if ue_lo < 1 || ue_hi < ue_lo {
        return Err(Error::invalid("n_ue_range", "needs 1 <= lo <= hi"));
    }
    let floor = p_no_los(problem.base.lambda, problem.base.beta);
    let (lo, hi) = problem.n_bs_range;
    let mut solution = DesignSolution {
        n_bs_opt: None,
        n_ue_opt: None,
        latency_t0: None,
        p_f_achieved: None,
        p_no_los_floor: floor,
        frontier: Vec::new(),
    };
    for n_ue in ue_lo..=ue_hi {
        for n_bs in lo..=hi {
            solution
                .frontier
                .push(evaluate_candidate(n_bs, n_ue, problem, quad, floor)?);
        }
    }
    pick_minimizer(&mut solution, problem.p_f_max);
    Ok(solution)
}
