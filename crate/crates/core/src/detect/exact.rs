use crate::error::{Error, Result};
use crate::model::{Constellation, RealChannel};
use crate::scalar::{log_sum_exp, Real};

use super::{Detector, SoftOutput, DEFAULT_LLR_CLAMP};

/// Largest number of hypotheses enumerated by default (`2^20`).
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 20;

/// Exact posterior marginals of a real system under a uniform prior on
/// `alphabet^n`.
#[derive(Debug, Clone)]
pub struct ExactMarginals<T> {
    /// `n x |alphabet|`.
    pub real_pmf: Vec<Vec<T>>,
    /// When `pair_components` was requested: `n/2` rows over `|alphabet|²`
    /// level pairs `(re, im)`, flattened as `re·|alphabet| + im`.
    pub pair_pmf: Option<Vec<Vec<T>>>,
    /// `log Σ_u N(y; H u, σ² I)`.
    pub log_partition: T,
}

/// Enumerates all `|alphabet|^n` hypotheses depth first, keeping one
/// residual per depth so every leaf residual is a fresh chain of `n`
/// subtractions.
pub fn exact_real_marginals<T: Real>(ch: &RealChannel<T>, alphabet: &[T], pair_components: bool, budget: u64) -> Result<ExactMarginals<T>> {
    let y = ch.require_observation()?;
    let n = ch.dim();
    let side = alphabet.len();
    let size = (side as f64).powi(n as i32);
    if size > budget as f64 {
        return Err(Error::EnumerationTooLarge { size, budget });
    }
    let total = side.pow(n as u32);
    let rows = y.len();
    let h = ch.h();
    // Column-major copy so the inner update is contiguous.
    let cols: Vec<Vec<T>> = (0..n).map(|j| (0..rows).map(|i| h[(i, j)]).collect()).collect();
    let inv_2s2 = T::one() / (T::lit(2.0) * ch.sigma2());

    let mut logw = Vec::with_capacity(total);
    let mut residuals = vec![vec![T::zero(); rows]; n + 1];
    residuals[0].copy_from_slice(y);
    let mut digits = vec![0usize; n];
    // Depth of the first digit that changed since the last leaf.
    let mut depth = 0;
    loop {
        for d in depth..n {
            let a = alphabet[digits[d]];
            let (prev, next) = residuals.split_at_mut(d + 1);
            for ((o, &p), &c) in next[0].iter_mut().zip(&prev[d]).zip(&cols[d]) {
                *o = p - c * a;
            }
        }
        let e: T = residuals[n].iter().map(|&v| v * v).sum();
        logw.push(-e * inv_2s2);
        // Odometer, last digit fastest.
        let mut d = n;
        loop {
            if d == 0 {
                break;
            }
            d -= 1;
            digits[d] += 1;
            if digits[d] < side {
                break;
            }
            digits[d] = 0;
        }
        if logw.len() == total {
            break;
        }
        depth = d;
    }

    let lse = log_sum_exp(&logw);
    let mut real_pmf = vec![vec![T::zero(); side]; n];
    let half = n / 2;
    let mut pair_pmf = pair_components.then(|| vec![vec![T::zero(); side * side]; half]);
    digits.iter_mut().for_each(|d| *d = 0);
    for &w in &logw {
        let p = (w - lse).exp();
        for (row, &dg) in real_pmf.iter_mut().zip(&digits) {
            row[dg] += p;
        }
        if let Some(pp) = pair_pmf.as_mut() {
            for (i, row) in pp.iter_mut().enumerate() {
                row[digits[i] * side + digits[half + i]] += p;
            }
        }
        for d in (0..n).rev() {
            digits[d] += 1;
            if digits[d] < side {
                break;
            }
            digits[d] = 0;
        }
    }
    let log_partition = lse - T::lit(0.5) * T::lit(rows as f64) * (T::lit(2.0) * T::PI() * ch.sigma2()).ln();
    Ok(ExactMarginals { real_pmf, pair_pmf, log_partition })
}

/// Exact symbol marginals by enumeration of all `M^m` transmit vectors.
pub fn exact_detector<T: Real>(ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
    ExactDetector::default().detect(ch, cst)
}

#[derive(Debug, Clone, Copy)]
pub struct ExactDetector {
    pub budget: u64,
    pub llr_clamp: f64,
}

impl Default for ExactDetector {
    fn default() -> Self {
        Self { budget: DEFAULT_ENUMERATION_BUDGET, llr_clamp: DEFAULT_LLR_CLAMP }
    }
}

impl<T: Real> Detector<T> for ExactDetector {
    fn label(&self) -> String {
        "exact".into()
    }

    fn enumeration_budget(&self) -> Option<u64> {
        Some(self.budget)
    }

    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
        let ex = exact_real_marginals(ch, cst.real_alphabet(), true, self.budget)?;
        // Level pairs (re, im) flatten exactly like constellation indices.
        let symbol_pmf = ex.pair_pmf.expect("pairs requested");
        Ok(SoftOutput::from_symbol_pmf(ex.real_pmf, symbol_pmf, cst, T::lit(self.llr_clamp)))
    }
}
