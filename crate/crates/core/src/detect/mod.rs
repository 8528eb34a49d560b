//! Soft-output MIMO detectors.
//!
//! Every detector maps a real channel with an observation to a
//! [`SoftOutput`]: per-real-component pmfs over the real alphabet,
//! per-antenna pmfs over the complex constellation, and per-bit LLRs.

mod ec;
mod exact;
mod mmse;

pub use ec::{ec_double_loop, ec_single_loop, CavityReading, EcConfig, EcDoubleLoop, EcSingleLoop};
pub use exact::{exact_detector, exact_real_marginals, ExactDetector, ExactMarginals, DEFAULT_ENUMERATION_BUDGET};
pub use mmse::{mmse_detector, MmseDetector};

use num_complex::Complex;

use crate::error::Result;
use crate::expfam::DiscreteSite;
use crate::model::{Constellation, RealChannel};
use crate::scalar::Real;

/// Default LLR saturation, in nats.
pub const DEFAULT_LLR_CLAMP: f64 = 40.0;

/// Mean absolute first/second moment mismatch between `q` and `r` at one
/// iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaPoint<T> {
    pub delta_u: T,
    pub delta_u2: T,
}

/// EC energy and gradient-block norms at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint<T> {
    pub log_z_ec: T,
    pub grad_q_norm: T,
    pub grad_s_norm: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics<T> {
    /// Completed parameter updates.
    pub iterations: usize,
    pub delta_u: T,
    pub delta_u2: T,
    /// Entry `k` is measured at the parameters after `k` updates; entry 0 is
    /// the initialization.
    pub trace: Vec<DeltaPoint<T>>,
    /// Components whose update was reverted to keep `q` proper.
    pub rejected_updates: usize,
    /// Components left unchanged because their proposed precision was
    /// negative.
    pub skipped_updates: usize,
    /// Accepted gradient steps per outer iteration (double loop only).
    pub inner_steps: Vec<usize>,
    /// Outer iterations whose inner solve stopped before reaching the
    /// gradient tolerance.
    pub inner_unconverged: usize,
    /// Inner objective after each accepted step, per outer iteration, when
    /// tracing is enabled.
    pub inner_objective: Vec<Vec<T>>,
    pub energy: Vec<EnergyPoint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftOutput<T> {
    /// `2m x √M`; rows `0..m` are in-phase, `m..2m` quadrature components.
    pub real_pmf: Vec<Vec<T>>,
    /// `m x M`, indexed like [`Constellation::points`].
    pub symbol_pmf: Vec<Vec<T>>,
    /// `m·log2(M)` values, antenna-major, `log p(b=0)/p(b=1)`.
    pub bit_llrs: Vec<T>,
    /// Per-antenna argmax of `symbol_pmf`, ties to the lowest index.
    pub hard_decision: Vec<usize>,
    pub diagnostics: Diagnostics<T>,
}

impl<T: Real> SoftOutput<T> {
    pub fn num_antennas(&self) -> usize {
        self.symbol_pmf.len()
    }

    pub fn hard_symbols(&self, cst: &Constellation<T>) -> Vec<Complex<T>> {
        self.hard_decision.iter().map(|&k| cst.points()[k]).collect()
    }

    /// Builds the symbol table, LLRs and decisions from a per-antenna
    /// complex-symbol pmf.
    pub fn from_symbol_pmf(real_pmf: Vec<Vec<T>>, symbol_pmf: Vec<Vec<T>>, cst: &Constellation<T>, llr_clamp: T) -> Self {
        let bits = cst.bits_per_symbol();
        let mut bit_llrs = Vec::with_capacity(symbol_pmf.len() * bits);
        let mut hard_decision = Vec::with_capacity(symbol_pmf.len());
        for row in &symbol_pmf {
            for b in 0..bits {
                let (mut p0, mut p1) = (T::zero(), T::zero());
                for (k, &p) in row.iter().enumerate() {
                    if cst.bit(k, b) == 0 {
                        p0 += p;
                    } else {
                        p1 += p;
                    }
                }
                let llr = p0.ln() - p1.ln();
                bit_llrs.push(if llr.is_nan() { T::zero() } else { llr.max(-llr_clamp).min(llr_clamp) });
            }
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            hard_decision.push(best);
        }
        Self { real_pmf, symbol_pmf, bit_llrs, hard_decision, diagnostics: Diagnostics::default() }
    }

    /// Assembles the output of a factorized approximation: each antenna's
    /// symbol pmf is the outer product of its in-phase and quadrature rows.
    pub fn from_real_pmf(real_pmf: Vec<Vec<T>>, cst: &Constellation<T>, llr_clamp: T) -> Self {
        let m = real_pmf.len() / 2;
        let symbol_pmf = (0..m)
            .map(|i| {
                (0..cst.order())
                    .map(|k| {
                        let (re, im) = cst.levels(k);
                        real_pmf[i][re] * real_pmf[m + i][im]
                    })
                    .collect()
            })
            .collect();
        Self::from_symbol_pmf(real_pmf, symbol_pmf, cst, llr_clamp)
    }
}

/// Soft output of a discrete site with the default LLR clamp.
pub fn soft_output_from_site<T: Real>(site: &DiscreteSite<T>, cst: &Constellation<T>) -> SoftOutput<T> {
    SoftOutput::from_real_pmf(site.pmf.clone(), cst, T::lit(DEFAULT_LLR_CLAMP))
}

/// A soft-output detector.
pub trait Detector<T: Real>: Send + Sync {
    /// Short label used in tables.
    fn label(&self) -> String;

    /// Largest `M^m` the detector accepts, if bounded.
    fn enumeration_budget(&self) -> Option<u64> {
        None
    }

    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>>;
}

impl<T: Real, D: Detector<T> + ?Sized> Detector<T> for Box<D> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn enumeration_budget(&self) -> Option<u64> {
        (**self).enumeration_budget()
    }
    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
        (**self).detect(ch, cst)
    }
}
