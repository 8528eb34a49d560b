//! Capacity, Monte Carlo mutual information, moment-mismatch diagnostics and
//! error counting.

use rand::Rng;
use rayon::prelude::*;

use crate::detect::{DeltaPoint, Detector};
use crate::error::{check_len, Error, Result};
use crate::expfam::MomentSet;
use crate::linalg::{Cholesky, Matrix};
use crate::model::{ComplexChannel, Constellation};
use crate::rng::{child_rng, stream};
use crate::scalar::Real;

/// `log2 det(I_r + (snr/m) H Hᴴ) / m`, bits per channel use and antenna.
///
/// Uses the real representation: `H̃ H̃ᵀ` represents `H Hᴴ`, and the real
/// representation of a Hermitian matrix has the square of its determinant.
pub fn capacity_per_antenna<T: Real>(ch: &ComplexChannel<T>, snr_linear: T) -> Result<T> {
    if snr_linear < T::zero() {
        return Err(Error::InvalidParameter { name: "snr", reason: "must be non-negative".into() });
    }
    let hr = ch.to_real();
    let m = T::lit(ch.m() as f64);
    let a = Matrix::identity(hr.h().rows()).add(&hr.h().mul(&hr.h().transpose()).scale(snr_linear / m));
    let log_det = Cholesky::new(&a)?.log_det();
    Ok(T::lit(0.5) * log_det / T::LN_2() / m)
}

/// `(Δ_u, Δ_u²)`: mean absolute difference of first and second moments.
pub fn delta_metrics<T: Real>(q: &MomentSet<T>, r: &MomentSet<T>) -> Result<(T, T)> {
    check_len(q.len(), r.len())?;
    let n = T::lit(q.len() as f64);
    let du: T = q.mean.iter().zip(&r.mean).map(|(&a, &b)| (a - b).abs()).sum();
    let du2: T = q.second.iter().zip(&r.second).map(|(&a, &b)| (a - b).abs()).sum();
    Ok((du / n, du2 / n))
}

/// Per-iteration mean of `Δ_u` and `Δ_u²` over many runs. Shorter traces
/// (runs that stopped early) are extended with their last value.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrace {
    pub delta_u: Vec<f64>,
    pub delta_u2: Vec<f64>,
    pub count: usize,
}

impl DeltaTrace {
    pub fn new(len: usize) -> Self {
        Self { delta_u: vec![0.0; len], delta_u2: vec![0.0; len], count: 0 }
    }

    pub fn add<T: Real>(&mut self, trace: &[DeltaPoint<T>]) {
        let Some(last) = trace.last() else { return };
        for k in 0..self.delta_u.len() {
            let p = trace.get(k).unwrap_or(last);
            self.delta_u[k] += p.delta_u.to_f64_lossy();
            self.delta_u2[k] += p.delta_u2.to_f64_lossy();
        }
        self.count += 1;
    }

    /// Means; sums are kept until this is called.
    pub fn means(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.count.max(1) as f64;
        (self.delta_u.iter().map(|x| x / c).collect(), self.delta_u2.iter().map(|x| x / c).collect())
    }
}

/// Symbol and bit error rates between transmitted and decided point indices.
pub fn count_errors<T: Real>(truth: &[usize], decisions: &[usize], cst: &Constellation<T>) -> Result<(f64, f64)> {
    check_len(truth.len(), decisions.len())?;
    if truth.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut sym = 0usize;
    let mut bits = 0usize;
    for (&a, &b) in truth.iter().zip(decisions) {
        if a != b {
            sym += 1;
            bits += (cst.label(a) ^ cst.label(b)).count_ones() as usize;
        }
    }
    let n = truth.len() as f64;
    Ok((sym as f64 / n, bits as f64 / (n * cst.bits_per_symbol() as f64)))
}

/// Fraction of differing bits.
pub fn bit_error_rate(truth: &[u8], decisions: &[u8]) -> Result<f64> {
    check_len(truth.len(), decisions.len())?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let errs = truth.iter().zip(decisions).filter(|(a, b)| a != b).count();
    Ok(errs as f64 / truth.len() as f64)
}

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Plug-in mutual information in bits from an `M x M` joint count table
/// (row: transmitted, column: sampled).
pub fn mi_from_counts(counts: &[u64], order: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let rows: Vec<f64> = (0..order).map(|i| counts[i * order..(i + 1) * order].iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..order).map(|j| (0..order).map(|i| counts[i * order + j]).sum::<u64>() as f64).collect();
    let mut mi = 0.0;
    for i in 0..order {
        for j in 0..order {
            let c = counts[i * order + j] as f64;
            if c > 0.0 {
                mi += c / n * (c * n / (rows[i] * cols[j])).ln();
            }
        }
    }
    (mi / std::f64::consts::LN_2).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimate {
    pub per_antenna_mi: Vec<f64>,
    pub average_mi: f64,
    pub sample_count: usize,
    /// Per antenna, row-major `M x M` counts of (transmitted, sampled).
    pub joint_histograms: Vec<Vec<u64>>,
}

impl MiEstimate {
    pub fn from_histograms(joint_histograms: Vec<Vec<u64>>, order: usize, sample_count: usize) -> Self {
        let per_antenna_mi: Vec<f64> = joint_histograms.iter().map(|h| mi_from_counts(h, order)).collect();
        let average_mi = per_antenna_mi.iter().sum::<f64>() / per_antenna_mi.len().max(1) as f64;
        Self { per_antenna_mi, average_mi, sample_count, joint_histograms }
    }
}

const TRIALS_PER_SHARD: usize = 64;

/// Index sampled from a pmf with a single uniform draw.
fn sample_index<T: Real, R: Rng + ?Sized>(pmf: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += p.to_f64_lossy();
        if u < acc {
            return k;
        }
    }
    pmf.len() - 1
}

/// Monte Carlo estimate of `I(u_i; û_i)` for a fixed channel by ancestral
/// sampling: `u` uniform, `y` from the channel, `û_i` from the detector's
/// per-antenna pmf.
///
/// Runs on the current rayon pool. Trial `t` draws all its randomness from
/// a stream keyed by `(seed, t)` and shards merge integer counts, so the
/// result does not depend on the number of workers.
pub fn estimate_mi<T, D>(ch: &ComplexChannel<T>, cst: &Constellation<T>, detector: &D, n: usize, seed: u64) -> Result<MiEstimate>
where
    T: Real,
    D: Detector<T> + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidParameter { name: "N", reason: "need at least one sample".into() });
    }
    let (m, order) = (ch.m(), cst.order());
    let real = ch.to_real();
    let shards = n.div_ceil(TRIALS_PER_SHARD);
    let partials: Vec<Result<Vec<Vec<u64>>>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut local = real.clone();
            let mut hist = vec![vec![0u64; order * order]; m];
            let start = shard * TRIALS_PER_SHARD;
            for t in start..(start + TRIALS_PER_SHARD).min(n) {
                let mut rng = child_rng(seed, &[stream::SAMPLE, t as u64]);
                let u: Vec<usize> = (0..m).map(|_| rng.gen_range(0..order)).collect();
                local.transmit_and_store(&cst.real_vector(&u), cst.real_alphabet(), &mut rng)?;
                let out = detector.detect(&local, cst)?;
                for (i, &ui) in u.iter().enumerate() {
                    let hat = sample_index(&out.symbol_pmf[i], &mut rng);
                    hist[i][ui * order + hat] += 1;
                }
            }
            Ok(hist)
        })
        .collect();
    let mut total = vec![vec![0u64; order * order]; m];
    for part in partials {
        for (acc, h) in total.iter_mut().zip(part?) {
            for (a, b) in acc.iter_mut().zip(h) {
                *a += b;
            }
        }
    }
    Ok(MiEstimate::from_histograms(total, order, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn capacity_closed_forms() {
        let ch = ComplexChannel::new(1, 1, vec![Complex::new(1.0f64, 0.0)], 1.0).unwrap();
        assert!((capacity_per_antenna(&ch, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(capacity_per_antenna(&ch, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn delta_examples() {
        let a = MomentSet::new(vec![0.1f64, -0.3, 0.4], vec![0.5, 0.6, 0.7]).unwrap();
        assert_eq!(delta_metrics(&a, &a).unwrap(), (0.0, 0.0));
        let b = MomentSet::new(a.mean.iter().map(|x| x + 0.1).collect(), a.second.clone()).unwrap();
        let (du, du2) = delta_metrics(&b, &a).unwrap();
        assert!((du - 0.1).abs() < 1e-15 && du2 == 0.0);
        let c = MomentSet::new(vec![0.0], vec![0.0]).unwrap();
        assert!(delta_metrics(&a, &c).is_err());
    }

    #[test]
    fn error_counting() {
        let cst = Constellation::<f64>::new(4, 1.0).unwrap();
        assert_eq!(count_errors(&[0, 1, 2], &[0, 1, 2], &cst).unwrap(), (0.0, 0.0));
        let (ser, _) = count_errors(&[0, 1, 2], &[1, 2, 3], &cst).unwrap();
        assert_eq!(ser, 1.0);
        let truth = vec![0usize; 100];
        let mut dec = truth.clone();
        dec[17] = 3;
        let (ser, ber) = count_errors(&truth, &dec, &cst).unwrap();
        assert!((ser - 0.01).abs() < 1e-15);
        assert!((ber - 2.0 / 200.0).abs() < 1e-15);
        assert!(count_errors(&[0], &[], &cst).is_err());
        assert_eq!(bit_error_rate(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.25);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn mi_of_identity_and_independent_tables() {
        let order = 4;
        let mut diag = vec![0u64; 16];
        for i in 0..4 {
            diag[i * 4 + i] = 25;
        }
        assert!((mi_from_counts(&diag, order) - 2.0).abs() < 1e-12);
        assert!(mi_from_counts(&[10u64; 16], order).abs() < 1e-12);
    }

    #[test]
    fn mi_is_invariant_under_consistent_relabeling() {
        let counts: Vec<u64> = (0..16).map(|k| (k * 7 % 11 + 1) as u64).collect();
        let perm = [2, 0, 3, 1];
        let mut relabeled = vec![0u64; 16];
        for i in 0..4 {
            for j in 0..4 {
                relabeled[perm[i] * 4 + perm[j]] = counts[i * 4 + j];
            }
        }
        assert!((mi_from_counts(&counts, 4) - mi_from_counts(&relabeled, 4)).abs() < 1e-12);
    }

    #[test]
    fn delta_trace_pads_short_runs() {
        let mut t = DeltaTrace::new(3);
        t.add(&[DeltaPoint { delta_u: 1.0, delta_u2: 2.0 }]);
        t.add(&[DeltaPoint { delta_u: 3.0, delta_u2: 0.0 }, DeltaPoint { delta_u: 1.0, delta_u2: 0.0 }, DeltaPoint { delta_u: 0.0, delta_u2: 0.0 }]);
        let (du, du2) = t.means();
        assert_eq!(du, vec![2.0, 1.0, 0.5]);
        assert_eq!(du2, vec![1.0, 1.0, 1.0]);
    }
}
