//! Closed forms and integrals for the random-beamforming cell-search metrics:
//! the no-LoS floor, the per-mini-slot success probability (double
//! quadrature over range and interference), failure probability, the
//! truncated-geometric latency law, and the exhaustive-search baseline.

use std::cell::Cell;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{DerivedConstants, NetworkParams};
use crate::quad::{integrate, QuadResult, QuadratureConfig};

/// Linear SINR threshold below which the union-bound step behind the
/// success-probability integral is no longer guaranteed tight (it is exact
/// for thresholds >= 1 and remains a close upper bound down to about 0.4).
pub const UNION_BOUND_THRESHOLD: f64 = 0.4;

/// Probability that no base station anywhere in the plane has a LoS link to
/// the typical receiver at the origin: `exp(-2*lambda*pi / beta^2)`.
///
/// This is the irreducible detection-failure floor: no search policy can do
/// better, whatever the time budget.
pub fn p_no_los(lambda: f64, beta: f64) -> f64 {
    debug_assert!(lambda > 0.0 && beta > 0.0);
    (-2.0 * lambda * std::f64::consts::PI / (beta * beta)).exp()
}

/// Probability that no base station within a ball of radius `radius_m`
/// around the origin has a LoS link:
/// `exp(-2*lambda*pi * (1 - (beta*R + 1) * exp(-beta*R)) / beta^2)`.
///
/// The closed form is the exponential of `-2*pi*lambda * integral of
/// r * exp(-beta*r) over [0, R]`; the decaying `exp(-beta*R)` in the
/// parenthesis is required for the value to be monotone non-increasing in
/// `radius_m` and to approach [`p_no_los`] as the radius grows (a growing
/// exponential there would diverge instead).
pub fn p_no_los_finite(lambda: f64, beta: f64, radius_m: f64) -> f64 {
    debug_assert!(lambda > 0.0 && beta > 0.0 && radius_m > 0.0);
    let br = beta * radius_m;
    let mass = 1.0 - (br + 1.0) * (-br).exp();
    (-2.0 * lambda * std::f64::consts::PI * mass / (beta * beta)).exp()
}

fn pow1m(p: f64, n: f64) -> f64 {
    // (1 - p)^n via exp(n * log1p(-p)), stable for large n and tiny p
    (n * (-p).ln_1p()).exp()
}

/// Interference exponent `J(r)` for a candidate at range `r`:
///
/// `J(r) = 2*pi/(n_bs*n_ue) * lambda * integral over v of
///         T r^alpha e^(-beta v) v / (v^alpha + T r^alpha)`,
///
/// so the interference Laplace transform evaluated at `T r^alpha` is
/// `exp(-J(r))`. The integral is truncated at `v_max_factor / beta`.
pub fn interference_exponent(
    r_m: f64,
    params: &NetworkParams,
    quad: &QuadratureConfig,
) -> Result<QuadResult> {
    params.validate()?;
    quad.validate()?;
    if !(r_m > 0.0) {
        return Err(Error::invalid("r", "range must be > 0"));
    }
    let result = inner_exponent_integral(
        params.sinr_threshold * r_m.powf(params.alpha),
        params.alpha,
        params.beta,
        quad.v_max_factor / params.beta,
        quad.rel_tol,
        quad.abs_tol,
        quad.max_subdivisions,
    )?;
    let prefactor = TAU / params.sector_product() * params.lambda;
    Ok(QuadResult {
        value: prefactor * result.value,
        error_estimate: prefactor * result.error_estimate,
        subdivisions: result.subdivisions,
    })
}

fn inner_exponent_integral(
    t_r_alpha: f64,
    alpha: f64,
    beta: f64,
    v_max: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    integrate(
        move |v| {
            if v <= 0.0 {
                0.0
            } else {
                t_r_alpha * (-beta * v).exp() * v / (v.powf(alpha) + t_r_alpha)
            }
        },
        0.0,
        v_max,
        rel_tol,
        abs_tol,
        max_subdivisions,
    )
}

/// Per-mini-slot success probability with an attached quadrature error
/// estimate and a flag for thresholds below the validated range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsEstimate {
    pub value: f64,
    /// Outer quadrature error plus the propagated worst-case contribution of
    /// the inner (interference) quadrature.
    pub quad_error: f64,
    /// Set when `sinr_threshold <` [`UNION_BOUND_THRESHOLD`]; the result is
    /// then an upper bound of uncertified tightness rather than an equality.
    pub below_union_bound_range: bool,
}

/// Probability that the typical receiver decodes some pilot in one mini-slot
/// under random beamforming:
///
/// `P_s = integral over r of exp(-T r^alpha sigma2_eff) * exp(-J(r))
///        * exp(-beta r) * 2*pi/(n_bs*n_ue) * lambda * r`,
///
/// truncated at `r_max_factor / beta`. Requires zero sidelobe gain.
pub fn p_success(params: &NetworkParams, quad: &QuadratureConfig) -> Result<PsEstimate> {
    params.validate()?;
    quad.validate()?;
    if params.epsilon != 0.0 {
        return Err(Error::invalid(
            "epsilon",
            "analytic evaluation requires zero sidelobe gain",
        ));
    }
    let derived = params.derive()?;
    let alignment = TAU / params.sector_product();
    let prefactor = alignment * params.lambda;
    let v_max = quad.v_max_factor / params.beta;
    let r_max = quad.r_max_factor / params.beta;
    // Inner integrals run one decade tighter than the outer one so their
    // error stays subdominant in the combined estimate.
    let inner_rel = quad.rel_tol * 0.1;
    let inner_abs = quad.abs_tol * 0.1;

    let inner_failure: Cell<Option<Error>> = Cell::new(None);
    let max_inner_error = Cell::new(0.0f64);
    let t = params.sinr_threshold;
    let alpha = params.alpha;
    let beta = params.beta;
    let sigma2_eff = derived.sigma2_eff;
    let max_subdivisions = quad.max_subdivisions;

    let integrand = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let t_r_alpha = t * r.powf(alpha);
        match inner_exponent_integral(
            t_r_alpha, alpha, beta, v_max, inner_rel, inner_abs, max_subdivisions,
        ) {
            Ok(inner) => {
                max_inner_error.set(max_inner_error.get().max(inner.error_estimate));
                let exponent = -t_r_alpha * sigma2_eff - prefactor * inner.value - beta * r;
                exponent.exp() * prefactor * r
            }
            Err(e) => {
                inner_failure.set(Some(e));
                f64::NAN
            }
        }
    };

    let outer = integrate(integrand, 0.0, r_max, quad.rel_tol, quad.abs_tol, max_subdivisions);
    if let Some(e) = inner_failure.take() {
        return Err(e);
    }
    let outer = outer?;
    if !outer.value.is_finite() {
        return Err(Error::ProbabilityOutOfRange {
            value: outer.value,
            abs_tol: quad.abs_tol,
        });
    }

    // The inner error enters through exp(-J), so its first-order effect on
    // the result is bounded by the result times the worst inner error.
    let quad_error =
        outer.error_estimate + outer.value.abs() * prefactor * max_inner_error.get();

    // Quadrature noise may push a probability marginally outside [0, 1];
    // anything beyond abs_tol indicates a real defect.
    let value = if outer.value < 0.0 {
        if outer.value >= -quad.abs_tol {
            0.0
        } else {
            return Err(Error::ProbabilityOutOfRange {
                value: outer.value,
                abs_tol: quad.abs_tol,
            });
        }
    } else if outer.value > 1.0 {
        if outer.value <= 1.0 + quad.abs_tol {
            1.0
        } else {
            return Err(Error::ProbabilityOutOfRange {
                value: outer.value,
                abs_tol: quad.abs_tol,
            });
        }
    } else {
        outer.value
    };

    Ok(PsEstimate {
        value,
        quad_error,
        below_union_bound_range: params.sinr_threshold < UNION_BOUND_THRESHOLD,
    })
}

/// Detection failure probability with a given per-slot success probability:
/// `max((1 - p_s)^n_c, p_no_los)`.
pub fn p_failure_given_ps(n_c: u32, p_s: f64, p_no_los: f64) -> f64 {
    debug_assert!(n_c >= 1);
    pow1m(p_s, n_c as f64).max(p_no_los)
}

/// Detection failure probability after a budget of `n_c` mini-slots.
pub fn p_failure(n_c: u32, params: &NetworkParams, quad: &QuadratureConfig) -> Result<f64> {
    if n_c < 1 {
        return Err(Error::invalid("n_c", "mini-slot budget must be >= 1"));
    }
    let ps = p_success(params, quad)?;
    Ok(p_failure_given_ps(n_c, ps.value, p_no_los(params.lambda, params.beta)))
}

/// Conditional latency PMF given detection within the budget:
/// `Pr[latency = n] = (1 - p_s)^(n-1) * p_s / (1 - (1 - p_s)^n_c)`.
///
/// The normalizer uses the raw geometric failure mass `(1 - p_s)^n_c`, not
/// the floored failure probability, so the PMF sums to exactly 1 over
/// `n in 1..=n_c` and its mean reproduces [`expected_latency_given_ps`].
pub fn latency_pmf_given_ps(n: u32, n_c: u32, p_s: f64) -> Result<f64> {
    if n < 1 || n > n_c {
        return Err(Error::invalid("n", "latency index must lie in [1, n_c]"));
    }
    if p_s <= 0.0 {
        return Err(Error::UndefinedLatency);
    }
    let ln_q = (-p_s).ln_1p();
    let one_minus_qn = -(n_c as f64 * ln_q).exp_m1();
    let tail = if n == 1 { 1.0 } else { ((n - 1) as f64 * ln_q).exp() };
    Ok(tail * p_s / one_minus_qn)
}

/// Conditional latency PMF evaluated from the network parameters.
pub fn latency_pmf(
    n: u32,
    n_c: u32,
    params: &NetworkParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let ps = p_success(params, quad)?;
    latency_pmf_given_ps(n, n_c, ps.value)
}

/// Expected search latency, exposed in all supported units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyEstimate {
    /// Mean number of mini-slots until detection, conditioned on detection
    /// within the budget. Always in `[1, n_c]`.
    pub slots: f64,
    /// The same mean scaled by the mini-slot duration in units of `t0`.
    pub t0_units: f64,
    /// In seconds, when `t0_seconds` is configured.
    pub seconds: Option<f64>,
}

/// Mean of the truncated-geometric latency law, in slots:
///
/// `[1 - (n_c + 1) q^n_c + n_c q^(n_c+1)] / [(1 - q^n_c) p_s]` with
/// `q = 1 - p_s`.
///
/// The denominator uses the raw geometric mass `q^n_c` (not the floored
/// failure probability), keeping the PMF, this mean, and the `1/p_s` limit
/// for `n_c -> infinity` mutually consistent.
pub fn expected_latency_given_ps(
    n_c: u32,
    p_s: f64,
    derived: &DerivedConstants,
) -> Result<LatencyEstimate> {
    if n_c < 1 {
        return Err(Error::invalid("n_c", "mini-slot budget must be >= 1"));
    }
    if p_s <= 0.0 {
        return Err(Error::UndefinedLatency);
    }
    let n = n_c as f64;
    let ln_q = (-p_s).ln_1p();
    let slots = if n * p_s < 1e-3 {
        // Strong truncation: the conditional law is nearly uniform on
        // {1..n_c} and the closed form cancels catastrophically, so use the
        // second-order expansion of the truncated-geometric mean instead.
        0.5 * (n + 1.0) * (1.0 - p_s * (n - 1.0) / 6.0)
    } else {
        // The textbook form `[1 - (n+1) q^n + n q^(n+1)] / [(1 - q^n) p]`
        // rearranges exactly to this, which subtracts like magnitudes only
        // once and keeps the complement of q^n at full precision.
        let qn = (n * ln_q).exp();
        let one_minus_qn = -(n * ln_q).exp_m1();
        1.0 / p_s - n * qn / one_minus_qn
    };
    Ok(LatencyEstimate {
        slots,
        t0_units: slots * derived.t_slot_t0,
        seconds: derived.t_slot_seconds.map(|t| slots * t),
    })
}

/// Expected search latency for a budget of `n_c` mini-slots.
pub fn expected_latency(
    n_c: u32,
    params: &NetworkParams,
    quad: &QuadratureConfig,
) -> Result<LatencyEstimate> {
    let ps = p_success(params, quad)?;
    expected_latency_given_ps(n_c, ps.value, &params.derive()?)
}

/// Unbounded-budget limit of the expected latency: the latency law becomes
/// geometric and the mean is `1 / p_s` slots.
pub fn asymptotic_latency_given_ps(p_s: f64, derived: &DerivedConstants) -> Result<LatencyEstimate> {
    if p_s <= 0.0 {
        return Err(Error::UndefinedLatency);
    }
    let slots = 1.0 / p_s;
    Ok(LatencyEstimate {
        slots,
        t0_units: slots * derived.t_slot_t0,
        seconds: derived.t_slot_seconds.map(|t| slots * t),
    })
}

/// Exhaustive-search baseline: a scan cycle sweeps all `n_bs * n_ue` beam
/// pairs with no early stop, so the latency is the full sweep duration and
/// failure requires every aligned pilot of the sweep to fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveBaseline {
    pub p_f: f64,
    pub latency_slots: f64,
    pub latency_t0: f64,
    pub latency_seconds: Option<f64>,
}

pub fn exhaustive_baseline(
    params: &NetworkParams,
    quad: &QuadratureConfig,
) -> Result<ExhaustiveBaseline> {
    let ps = p_success(params, quad)?;
    let derived = params.derive()?;
    let product = params.n_bs * params.n_ue;
    let slots = product as f64;
    Ok(ExhaustiveBaseline {
        p_f: p_failure_given_ps(product, ps.value, p_no_los(params.lambda, params.beta)),
        latency_slots: slots,
        latency_t0: slots * derived.t_slot_t0,
        latency_seconds: derived.t_slot_seconds.map(|t| slots * t),
    })
}

/// Exhaustive-search failure probability under a mini-slot budget, with a
/// precomputed per-slot success probability: the search only declares
/// detection at the end of a completed sweep of all `sweep_len = n_bs * n_ue`
/// pairs, so a budget below one full sweep always fails and in general only
/// `floor(n_c / sweep_len)` sweeps count.
pub fn exhaustive_failure_curve_given_ps(
    n_c: u32,
    sweep_len: u32,
    p_s: f64,
    p_no_los: f64,
) -> f64 {
    debug_assert!(n_c >= 1 && sweep_len >= 1);
    let sweeps = n_c / sweep_len;
    if sweeps == 0 {
        1.0
    } else {
        p_failure_given_ps(sweeps * sweep_len, p_s, p_no_los)
    }
}

/// Exhaustive-search failure probability under a mini-slot budget.
pub fn exhaustive_failure_curve(
    n_c: u32,
    params: &NetworkParams,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if n_c < 1 {
        return Err(Error::invalid("n_c", "mini-slot budget must be >= 1"));
    }
    let product = params.n_bs * params.n_ue;
    if n_c / product == 0 {
        return Ok(1.0);
    }
    let ps = p_success(params, quad)?;
    Ok(exhaustive_failure_curve_given_ps(
        n_c,
        product,
        ps.value,
        p_no_los(params.lambda, params.beta),
    ))
}

/// All metrics for one parameter point and mini-slot budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticResult {
    pub p_s: f64,
    pub p_no_los: f64,
    pub p_f: f64,
    pub expected_latency_slots: f64,
    pub expected_latency_t0: f64,
    pub expected_latency_seconds: Option<f64>,
    pub quadrature_error_estimate: f64,
    pub below_union_bound_range: bool,
}

pub fn evaluate(
    params: &NetworkParams,
    n_c: u32,
    quad: &QuadratureConfig,
) -> Result<AnalyticResult> {
    if n_c < 1 {
        return Err(Error::invalid("n_c", "mini-slot budget must be >= 1"));
    }
    let ps = p_success(params, quad)?;
    let derived = params.derive()?;
    let floor = p_no_los(params.lambda, params.beta);
    let latency = expected_latency_given_ps(n_c, ps.value, &derived)?;
    Ok(AnalyticResult {
        p_s: ps.value,
        p_no_los: floor,
        p_f: p_failure_given_ps(n_c, ps.value, floor),
        expected_latency_slots: latency.slots,
        expected_latency_t0: latency.t0_units,
        expected_latency_seconds: latency.seconds,
        quadrature_error_estimate: ps.quad_error,
        below_union_bound_range: ps.below_union_bound_range,
    })
}
