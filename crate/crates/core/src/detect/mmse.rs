use crate::error::Result;
use crate::expfam::{GaussianLikelihood, NaturalParams, QMarginals};
use crate::model::{Constellation, RealChannel};
use crate::scalar::{normalize_log_weights, Real};

use super::{Detector, SoftOutput, DEFAULT_LLR_CLAMP};

/// `(γ, Λ) = (0, 1/Ẽs)`: the Gaussian prior with the constellation's
/// per-dimension energy.
pub(crate) fn mmse_prior<T: Real>(n: usize, cst: &Constellation<T>) -> NaturalParams<T> {
    NaturalParams::constant(n, T::zero(), T::one() / cst.real_energy())
}

/// Evaluates each univariate Gaussian marginal of `q` on the alphabet.
pub(crate) fn discretize_q<T: Real>(qm: &QMarginals<T>, alphabet: &[T]) -> Vec<Vec<T>> {
    let half = T::lit(0.5);
    qm.moments
        .mean
        .iter()
        .zip(&qm.variance)
        .map(|(&mu, &v)| {
            let mut row: Vec<T> = alphabet.iter().map(|&a| -half * (a - mu) * (a - mu) / v).collect();
            normalize_log_weights(&mut row);
            row
        })
        .collect()
}

pub(crate) fn mmse_from_likelihood<T: Real>(lik: &GaussianLikelihood<T>, cst: &Constellation<T>, llr_clamp: T) -> Result<SoftOutput<T>> {
    let qm = lik.marginals(&mmse_prior(lik.dim(), cst))?;
    Ok(SoftOutput::from_real_pmf(discretize_q(&qm, cst.real_alphabet()), cst, llr_clamp))
}

/// Linear MMSE soft detector: the Gaussian posterior under a Gaussian prior
/// of energy `Ẽs` per real dimension, discretized on the alphabet.
pub fn mmse_detector<T: Real>(ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
    MmseDetector::default().detect(ch, cst)
}

#[derive(Debug, Clone, Copy)]
pub struct MmseDetector {
    pub llr_clamp: f64,
}

impl Default for MmseDetector {
    fn default() -> Self {
        Self { llr_clamp: DEFAULT_LLR_CLAMP }
    }
}

impl<T: Real> Detector<T> for MmseDetector {
    fn label(&self) -> String {
        "mmse".into()
    }

    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
        mmse_from_likelihood(&GaussianLikelihood::new(ch)?, cst, T::lit(self.llr_clamp))
    }
}
