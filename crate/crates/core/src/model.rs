//! Constellations, channel realizations and the complex-to-real model.
//!
//! The real-valued model stacks real parts over imaginary parts: for an
//! `r x m` complex channel, component `i < m` of `ũ` is `Re(u_i)` and
//! component `m + i` is `Im(u_i)`, and
//!
//! ```text
//! H̃ = [ Re(H)  -Im(H) ]
//!     [ Im(H)   Re(H) ]
//! ```

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_from_seed;
use crate::scalar::Real;

/// Which half of a symbol's bit label drives the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitSplit {
    /// First `log2(M)/2` bits select the in-phase level.
    #[default]
    RealFirst,
    /// First half selects the quadrature level.
    ImagFirst,
}

/// Square QAM constellation with a per-axis reflected-binary Gray labeling.
///
/// Complex point `k` has real level `k / side` and imaginary level
/// `k % side`, where `side = √M` and levels index `real_alphabet` in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T> {
    order: usize,
    side: usize,
    bits_per_axis: u32,
    es: T,
    real_alphabet: Vec<T>,
    points: Vec<Complex<T>>,
    labels: Vec<u32>,
    index_of_label: Vec<usize>,
    split: BitSplit,
}

#[inline]
fn gray(j: usize) -> u32 {
    (j ^ (j >> 1)) as u32
}

impl<T: Real> Constellation<T> {
    pub fn new(order: usize, es: T) -> Result<Self> {
        Self::with_labeling(order, es, BitSplit::default())
    }

    pub fn with_labeling(order: usize, es: T, split: BitSplit) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(Error::InvalidModulation(order));
        }
        if !(es > T::zero()) || !es.is_finite() {
            return Err(Error::InvalidParameter { name: "Es", reason: format!("must be positive, got {es}") });
        }
        let bits_per_axis = order.trailing_zeros() / 2;
        let side = 1usize << bits_per_axis;
        let s = side as f64;
        // E[a²] over {(2j - (s-1)) d} equals d²(s²-1)/3; solve for Es/2.
        let d = (T::lit(3.0) * es / T::lit(2.0 * (s * s - 1.0))).sqrt();
        let real_alphabet: Vec<T> = (0..side).map(|j| T::lit(2.0 * j as f64 - (s - 1.0)) * d).collect();

        let mut points = Vec::with_capacity(order);
        let mut labels = Vec::with_capacity(order);
        for jr in 0..side {
            for ji in 0..side {
                points.push(Complex::new(real_alphabet[jr], real_alphabet[ji]));
                let (hi, lo) = match split {
                    BitSplit::RealFirst => (gray(jr), gray(ji)),
                    BitSplit::ImagFirst => (gray(ji), gray(jr)),
                };
                labels.push((hi << bits_per_axis) | lo);
            }
        }
        let mut index_of_label = vec![0; order];
        for (k, &l) in labels.iter().enumerate() {
            index_of_label[l as usize] = k;
        }
        Ok(Self { order, side, bits_per_axis, es, real_alphabet, points, labels, index_of_label, split })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `√M`, the number of levels per real dimension.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis as usize
    }

    pub fn symbol_energy(&self) -> T {
        self.es
    }

    /// Energy per real dimension, `Es / 2`.
    pub fn real_energy(&self) -> T {
        self.es / T::lit(2.0)
    }

    pub fn bit_energy(&self) -> T {
        self.es / T::lit(self.bits_per_symbol() as f64)
    }

    pub fn real_alphabet(&self) -> &[T] {
        &self.real_alphabet
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn labeling(&self) -> BitSplit {
        self.split
    }

    /// Bit label of point `k`, most significant bit first.
    pub fn label(&self, k: usize) -> u32 {
        self.labels[k]
    }

    pub fn index_of_label(&self, label: u32) -> usize {
        self.index_of_label[label as usize]
    }

    /// Bit `b` (0 = first transmitted bit) of point `k`.
    pub fn bit(&self, k: usize, b: usize) -> u8 {
        ((self.labels[k] >> (self.bits_per_symbol() - 1 - b)) & 1) as u8
    }

    pub fn index_from_bits(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let label = bits.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32);
        self.index_of_label(label)
    }

    /// Splits a point index into (real level, imaginary level).
    #[inline]
    pub fn levels(&self, k: usize) -> (usize, usize) {
        (k / self.side, k % self.side)
    }

    #[inline]
    pub fn index_of_levels(&self, re: usize, im: usize) -> usize {
        re * self.side + im
    }

    /// Level index of a real value, if it is (numerically) in the alphabet.
    pub fn real_level(&self, value: T) -> Option<usize> {
        let tol = T::lit(1e-9) * self.real_alphabet[self.side - 1].abs();
        self.real_alphabet.iter().position(|&a| (a - value).abs() <= tol)
    }

    /// Stacked real vector `[Re(u); Im(u)]` for a vector of point indices.
    pub fn real_vector(&self, indices: &[usize]) -> Vec<T> {
        let m = indices.len();
        let mut out = vec![T::zero(); 2 * m];
        for (i, &k) in indices.iter().enumerate() {
            let (re, im) = self.levels(k);
            out[i] = self.real_alphabet[re];
            out[m + i] = self.real_alphabet[im];
        }
        out
    }
}

/// `σ_w²` realizing `snr_db` under `SNR = m log2(M) Eb / σ_w²`.
pub fn snr_to_sigma_w2(snr_db: f64, m: usize, order: usize, es: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "m", reason: "must be at least 1".into() });
    }
    let bits = Constellation::<f64>::new(order, es)?.bits_per_symbol() as f64;
    let eb = es / bits;
    Ok(m as f64 * bits * eb * 10f64.powf(-snr_db / 10.0))
}

/// Rate-corrected SNR for coded transmission: `snr_db + 10 log10(R)`.
pub fn coded_snr_correction(snr_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter { name: "R", reason: format!("rate must lie in (0, 1], got {rate}") });
    }
    Ok(snr_db + 10.0 * rate.log10())
}

/// Flat-fading complex channel `y = H u + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel<T> {
    m: usize,
    r: usize,
    h: Vec<Complex<T>>,
    sigma_w2: T,
}

impl<T: Real> ComplexChannel<T> {
    /// `h` is row-major `r x m`.
    pub fn new(r: usize, m: usize, h: Vec<Complex<T>>, sigma_w2: T) -> Result<Self> {
        if m == 0 || r == 0 {
            return Err(Error::InvalidParameter { name: "m, r", reason: "antenna counts must be at least 1".into() });
        }
        check_len(r * m, h.len())?;
        if !(sigma_w2 > T::zero()) {
            return Err(Error::InvalidParameter { name: "sigma_w2", reason: format!("must be positive, got {sigma_w2}") });
        }
        Ok(Self { m, r, h, sigma_w2 })
    }

    /// I.i.d. `CN(0, 1)` coefficients.
    pub fn sample<R: Rng + ?Sized>(m: usize, r: usize, sigma_w2: T, rng: &mut R) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = (0..r * m)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(T::lit(re * s), T::lit(im * s))
            })
            .collect();
        Self::new(r, m, h, sigma_w2)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn sigma_w2(&self) -> T {
        self.sigma_w2
    }

    pub fn with_sigma_w2(&self, sigma_w2: T) -> Result<Self> {
        Self::new(self.r, self.m, self.h.clone(), sigma_w2)
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.h[i * self.m + j]
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.h
    }

    pub fn mul_vec(&self, u: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.r)
            .map(|i| (0..self.m).fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + self.entry(i, j) * u[j]))
            .collect()
    }

    /// Real-valued equivalent with per-dimension noise variance `σ_w² / 2`.
    pub fn to_real(&self) -> RealChannel<T> {
        let (m, r) = (self.m, self.r);
        let h = Matrix::from_fn(2 * r, 2 * m, |i, j| {
            let c = self.entry(i % r, j % m);
            match (i < r, j < m) {
                (true, true) | (false, false) => c.re,
                (true, false) => -c.im,
                (false, true) => c.im,
            }
        });
        RealChannel { h, sigma2: self.sigma_w2 / T::lit(2.0), y: None }
    }
}

/// Draws a channel from a seed.
pub fn sample_channel<T: Real>(m: usize, r: usize, sigma_w2: T, seed: u64) -> Result<ComplexChannel<T>> {
    ComplexChannel::sample(m, r, sigma_w2, &mut rng_from_seed(seed))
}

pub fn to_real_model<T: Real>(ch: &ComplexChannel<T>) -> RealChannel<T> {
    ch.to_real()
}

/// Real-valued channel `ỹ = H̃ ũ + w̃` with `w̃ ~ N(0, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealChannel<T> {
    h: Matrix<T>,
    sigma2: T,
    y: Option<Vec<T>>,
}

impl<T: Real> RealChannel<T> {
    /// A general real system; need not come from a complex channel.
    pub fn new(h: Matrix<T>, sigma2: T) -> Result<Self> {
        if !(sigma2 > T::zero()) {
            return Err(Error::InvalidParameter { name: "sigma2", reason: format!("must be positive, got {sigma2}") });
        }
        Ok(Self { h, sigma2, y: None })
    }

    pub fn h(&self) -> &Matrix<T> {
        &self.h
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// Number of real unknowns (`2m` for a complex system).
    pub fn dim(&self) -> usize {
        self.h.cols()
    }

    pub fn observation(&self) -> Option<&[T]> {
        self.y.as_deref()
    }

    pub fn set_observation(&mut self, y: Vec<T>) -> Result<()> {
        check_len(self.h.rows(), y.len())?;
        self.y = Some(y);
        Ok(())
    }

    pub fn with_observation(mut self, y: Vec<T>) -> Result<Self> {
        self.set_observation(y)?;
        Ok(self)
    }

    pub(crate) fn require_observation(&self) -> Result<&[T]> {
        self.y.as_deref().ok_or(Error::MissingObservation)
    }

    /// Draws `ỹ = H̃ ũ + w̃`. `u` must be drawn from `alphabet`.
    pub fn transmit<R: Rng + ?Sized>(&self, u: &[T], alphabet: &[T], rng: &mut R) -> Result<Vec<T>> {
        check_len(self.dim(), u.len())?;
        let scale = alphabet.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let tol = T::lit(1e-9) * scale;
        for (index, &v) in u.iter().enumerate() {
            if !alphabet.iter().any(|&a| (a - v).abs() <= tol) {
                return Err(Error::InvalidSymbol { index, value: v.to_f64_lossy() });
            }
        }
        let sd = self.sigma2.to_f64_lossy().sqrt();
        let mut y = self.h.mul_vec(u);
        for v in y.iter_mut() {
            let w: f64 = StandardNormal.sample(rng);
            *v += T::lit(w * sd);
        }
        Ok(y)
    }

    /// `transmit` followed by storing the observation.
    pub fn transmit_and_store<R: Rng + ?Sized>(&mut self, u: &[T], alphabet: &[T], rng: &mut R) -> Result<()> {
        let y = self.transmit(u, alphabet, rng)?;
        self.y = Some(y);
        Ok(())
    }
}
