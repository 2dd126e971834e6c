//! Initial cell-search performance in directional mmWave cellular networks.
//!
//! Base stations form a planar Poisson field around a typical receiver;
//! links are subject to distance-dependent path loss, exponential blockage,
//! and Rayleigh fading; both ends use sectorized beams. During cell search,
//! base stations transmit pilots into randomly chosen sectors each mini-slot
//! and the receiver listens on one sector per scan cycle, stopping at the
//! first pilot whose SINR clears a threshold ("random beamforming"), or
//! sweeping every beam pair with no early stop ("exhaustive search").
//!
//! The crate provides three engines over one shared physical model
//! ([`model`]):
//!
//! * [`analytic`] — closed forms and adaptive quadrature for the no-LoS
//!   failure floor, the per-mini-slot success probability, the detection
//!   failure probability, and the truncated-geometric latency law;
//! * [`montecarlo`] — a reproducible, parallel protocol simulator used to
//!   validate the analytic results and to explore regimes the analysis does
//!   not cover (static per-trial topologies, nonzero sidelobes);
//! * [`optimizer`] — integer beamwidth design: the number of BS sectors that
//!   minimizes expected search latency under a failure-probability cap.
//!
//! Latencies are reported in mini-slots and in units of the minimum slot
//! duration `t0`; absolute seconds are available once `t0` is configured.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod quad;

pub use error::{Error, Result};
pub use model::{DerivedConstants, NetworkParams};
pub use quad::QuadratureConfig;
