//! Adaptive Gauss–Kronrod quadrature (15-point rule with bisection of the
//! worst segment), plus the shared tolerance/truncation configuration used by
//! the analytic evaluators.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and truncation settings for the semi-infinite integrals.
///
/// The integrands carry `exp(-beta * r)` factors, so truncating at
/// `factor / beta` with `factor >= 10` bounds the discarded tail by
/// `exp(-factor)` times a polynomial, far below the tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Truncation of the outer (range) integral, in multiples of `1/beta`.
    pub r_max_factor: f64,
    /// Truncation of the inner (interference) integral, in multiples of `1/beta`.
    pub v_max_factor: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            r_max_factor: 40.0,
            v_max_factor: 40.0,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances", "must be > 0"));
        }
        if !(self.r_max_factor >= 10.0) || !(self.v_max_factor >= 10.0) {
            return Err(Error::invalid(
                "truncation factors",
                "must be >= 10 so the discarded tail is at most exp(-10)",
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights. Odd indices are the Gauss points. The tables carry
// their published precision; the compiler rounds them to the nearest f64.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 15-point Kronrod panel on [a, b]: returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    let mut res_gauss = 0.0;
    let mut res_kronrod = WGK[7] * f_center;
    let mut res_abs = res_kronrod.abs();

    for (j, &wg) in WG.iter().enumerate().take(3) {
        let idx = 2 * j + 1;
        let x = half * XGK[idx];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }
    res_gauss += WG[3] * f_center;
    for j in 0..4 {
        let idx = 2 * j;
        let x = half * XGK[idx];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = ((res_kronrod - res_gauss) * half).abs();
    (
        res_kronrod * half,
        rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
    )
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Number of equal panels the interval is split into before adaptation
/// starts. A single panel can hide narrow features from the 15-point rule
/// and return a deceptively small error estimate.
const INITIAL_PANELS: usize = 16;

/// Integrate `f` over `[a, b]` by adaptive bisection of the segment with the
/// largest error estimate, until the summed estimate satisfies
/// `max(abs_tol, rel_tol * |value|)` or `max_subdivisions` bisections have
/// been spent.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadResult> {
    if !a.is_finite() || !b.is_finite() || b < a {
        return Err(Error::invalid("integration interval", "requires finite a <= b"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            subdivisions: 0,
        });
    }

    let mut heap = BinaryHeap::new();
    let mut total_value = 0.0;
    let mut total_error = 0.0;
    let width = (b - a) / INITIAL_PANELS as f64;
    for i in 0..INITIAL_PANELS {
        let lo = a + i as f64 * width;
        let hi = if i + 1 == INITIAL_PANELS { b } else { a + (i + 1) as f64 * width };
        let (value, error) = gk15(&f, lo, hi);
        total_value += value;
        total_error += error;
        heap.push(Segment { a: lo, b: hi, value, error });
    }
    let mut subdivisions = 0usize;

    while total_error > abs_tol.max(rel_tol * total_value.abs()) {
        if subdivisions >= max_subdivisions {
            return Err(Error::QuadratureDidNotConverge {
                achieved: total_error,
                target: abs_tol.max(rel_tol * total_value.abs()),
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval no longer splittable in f64; accept what we have
            heap.push(worst);
            break;
        }
        total_value -= worst.value;
        total_error -= worst.error;
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total_value += lv + rv;
        total_error += le + re;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
        subdivisions += 1;
    }

    Ok(QuadResult {
        value: total_value,
        error_estimate: total_error,
        subdivisions,
    })
}
