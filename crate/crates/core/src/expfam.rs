//! Exponential-family machinery for expectation-consistent inference.
//!
//! All three approximating distributions share the sufficient statistics
//! `φ(u) = (u_1..u_n, -u_1²/2..-u_n²/2)` with natural parameters
//! `λ = (γ, Λ)`:
//!
//! * `q(u) ∝ N(y; H u, σ² I) exp(γ_qᵀu - uᵀdiag(Λ_q)u/2)`, a multivariate
//!   Gaussian with precision `S = HᵀH/σ² + diag(Λ_q)` and mean `S⁻¹ g`,
//!   `g = Hᵀy/σ² + γ_q`;
//! * `r(u) ∝ Π_i 1[u_i ∈ Ã] exp(γ_ri u_i - Λ_ri u_i²/2)`, independent
//!   discrete marginals;
//! * `s(u) ∝ exp(γ_sᵀu - uᵀdiag(Λ_s)u/2)`, independent Gaussians.
//!
//! The EC energy is `log Z_q(λ_q) + log Z_r(λ_s - λ_q) - log Z_s(λ_s)`.
//! Its gradient with respect to `λ_q` is `E_q[φ] - E_r[φ]` and with respect
//! to `λ_s` is `E_r[φ] - E_s[φ]`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::model::RealChannel;
use crate::scalar::{log_sum_exp, Real};

/// Natural parameters `(γ, Λ)` of a per-component tilt.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams<T> {
    pub gamma: Vec<T>,
    pub lambda: Vec<T>,
}

impl<T: Real> NaturalParams<T> {
    pub fn new(gamma: Vec<T>, lambda: Vec<T>) -> Result<Self> {
        check_len(gamma.len(), lambda.len())?;
        Ok(Self { gamma, lambda })
    }

    pub fn constant(n: usize, gamma: T, lambda: T) -> Self {
        Self { gamma: vec![gamma; n], lambda: vec![lambda; n] }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            gamma: self.gamma.iter().zip(&other.gamma).map(|(&a, &b)| a - b).collect(),
            lambda: self.lambda.iter().zip(&other.lambda).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            gamma: self.gamma.iter().zip(&other.gamma).map(|(&a, &b)| a + b).collect(),
            lambda: self.lambda.iter().zip(&other.lambda).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// `β·self + (1-β)·previous`.
    pub fn damped(&self, previous: &Self, beta: T) -> Self {
        let mix = |a: T, b: T| beta * a + (T::one() - beta) * b;
        Self {
            gamma: self.gamma.iter().zip(&previous.gamma).map(|(&a, &b)| mix(a, b)).collect(),
            lambda: self.lambda.iter().zip(&previous.lambda).map(|(&a, &b)| mix(a, b)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.gamma
            .iter()
            .zip(&other.gamma)
            .chain(self.lambda.iter().zip(&other.lambda))
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Euclidean norm over both blocks.
    pub fn norm(&self) -> T {
        self.gamma.iter().chain(&self.lambda).map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.iter().chain(&self.lambda).all(|x| x.is_finite())
    }
}

/// Per-component first and second moments, with the variances carried
/// alongside so that near-deterministic components keep full relative
/// precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet<T> {
    pub mean: Vec<T>,
    pub second: Vec<T>,
    var: Vec<T>,
}

impl<T: Real> MomentSet<T> {
    pub fn new(mean: Vec<T>, second: Vec<T>) -> Result<Self> {
        check_len(mean.len(), second.len())?;
        let var = mean.iter().zip(&second).map(|(&m, &s)| s - m * m).collect();
        Ok(Self { mean, second, var })
    }

    pub fn from_mean_var(mean: Vec<T>, var: Vec<T>) -> Result<Self> {
        check_len(mean.len(), var.len())?;
        Ok(Self::from_parts(mean, var))
    }

    pub(crate) fn from_parts(mean: Vec<T>, var: Vec<T>) -> Self {
        let second = mean.iter().zip(&var).map(|(&m, &v)| v + m * m).collect();
        Self { mean, second, var }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variance(&self, i: usize) -> T {
        self.var[i]
    }

    pub fn variances(&self) -> &[T] {
        &self.var
    }

    /// `E[φ(u)] = (E[u], -E[u²]/2)` laid out like natural parameters.
    pub fn expected_statistics(&self) -> NaturalParams<T> {
        let half = T::lit(0.5);
        NaturalParams { gamma: self.mean.clone(), lambda: self.second.iter().map(|&s| -half * s).collect() }
    }

    /// Checks `E[u²] ≥ E[u]² - 1e-12` componentwise.
    pub fn is_consistent(&self) -> bool {
        (0..self.len()).all(|i| self.variance(i) >= T::lit(-1e-12))
    }
}

/// Whether log-partition values carry the parameter-independent constants
/// of the Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Only the `λ`-dependent part: `½μᵀΣ⁻¹μ + ½log|Σ|`.
    #[default]
    Reduced,
    /// Adds `(n/2)log 2π - yᵀy/(2σ²) - (k/2)log(2πσ²)` so that energies are
    /// comparable with the true log-partition of the posterior.
    Full,
}

/// The multivariate normal `q(u)`.
#[derive(Debug, Clone)]
pub struct GaussianPosterior<T> {
    pub mu: Vec<T>,
    pub sigma: Matrix<T>,
    /// Reduced log-partition, see [`Normalization::Reduced`].
    pub log_z: T,
}

/// Gaussian likelihood term of `q` for a fixed channel and observation,
/// precomputed once per detection.
#[derive(Debug, Clone)]
pub struct GaussianLikelihood<T> {
    precision: Matrix<T>,
    shift: Vec<T>,
    log_z_constant: T,
}

/// Marginal moments of `q` together with its reduced log-partition.
#[derive(Debug, Clone)]
pub struct QMarginals<T> {
    pub moments: MomentSet<T>,
    pub variance: Vec<T>,
    pub log_z: T,
}

impl<T: Real> GaussianLikelihood<T> {
    pub fn new(ch: &RealChannel<T>) -> Result<Self> {
        let y = ch.require_observation()?;
        let inv_s2 = T::one() / ch.sigma2();
        let precision = ch.h().gram().scale(inv_s2);
        let shift: Vec<T> = ch.h().tr_mul_vec(y).into_iter().map(|v| v * inv_s2).collect();
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        let n = T::lit(ch.dim() as f64);
        let k = T::lit(y.len() as f64);
        let yy: T = y.iter().map(|&v| v * v).sum();
        let log_z_constant = half * n * two_pi.ln() - half * yy * inv_s2 - half * k * (two_pi * ch.sigma2()).ln();
        Ok(Self { precision, shift, log_z_constant })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// `HᵀH/σ²`.
    pub fn gram(&self) -> &Matrix<T> {
        &self.precision
    }

    /// `Hᵀy/σ²`.
    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    pub fn log_z_constant(&self) -> T {
        self.log_z_constant
    }

    pub fn factor(&self, params: &NaturalParams<T>) -> Result<Cholesky<T>> {
        check_len(self.dim(), params.len())?;
        Cholesky::new(&self.precision.with_added_diagonal(&params.lambda))
    }

    fn natural_shift(&self, params: &NaturalParams<T>) -> Vec<T> {
        self.shift.iter().zip(&params.gamma).map(|(&a, &b)| a + b).collect()
    }

    /// Means, marginal variances and reduced `log Z_q`, without forming the
    /// full covariance.
    pub fn marginals(&self, params: &NaturalParams<T>) -> Result<QMarginals<T>> {
        let chol = self.factor(params)?;
        let g = self.natural_shift(params);
        let mu = chol.solve(&g);
        let variance = chol.inverse_diagonal();
        let half = T::lit(0.5);
        let quad: T = g.iter().zip(&mu).map(|(&a, &b)| a * b).sum();
        let log_z = half * quad - half * chol.log_det();
        Ok(QMarginals { moments: MomentSet::from_parts(mu, variance.clone()), variance, log_z })
    }

    pub fn posterior(&self, params: &NaturalParams<T>) -> Result<(GaussianPosterior<T>, MomentSet<T>)> {
        let chol = self.factor(params)?;
        let g = self.natural_shift(params);
        let mu = chol.solve(&g);
        let sigma = chol.inverse();
        let half = T::lit(0.5);
        let quad: T = g.iter().zip(&mu).map(|(&a, &b)| a * b).sum();
        let log_z = half * quad - half * chol.log_det();
        let mom = MomentSet::from_parts(mu.clone(), sigma.diagonal());
        Ok((GaussianPosterior { mu, sigma, log_z }, mom))
    }

    pub fn log_z(&self, params: &NaturalParams<T>, norm: Normalization) -> Result<T> {
        let reduced = self.marginals(params)?.log_z;
        Ok(match norm {
            Normalization::Reduced => reduced,
            Normalization::Full => reduced + self.log_z_constant,
        })
    }
}

/// Moments of `q` for the channel's stored observation.
pub fn q_moments<T: Real>(ch: &RealChannel<T>, params_q: &NaturalParams<T>) -> Result<(GaussianPosterior<T>, MomentSet<T>)> {
    GaussianLikelihood::new(ch)?.posterior(params_q)
}

/// The independent discrete distribution `r(u)` over an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSite<T> {
    /// Row `i` is the pmf of component `i` over the alphabet, ascending.
    pub pmf: Vec<Vec<T>>,
    pub log_z: T,
}

impl<T: Real> DiscreteSite<T> {
    pub fn moments(&self, alphabet: &[T]) -> MomentSet<T> {
        let (mut mean, mut var) = (Vec::with_capacity(self.pmf.len()), Vec::with_capacity(self.pmf.len()));
        for row in &self.pmf {
            let m1: T = row.iter().zip(alphabet).map(|(&p, &a)| p * a).sum();
            let v: T = row.iter().zip(alphabet).map(|(&p, &a)| p * (a - m1) * (a - m1)).sum();
            mean.push(m1);
            var.push(v);
        }
        MomentSet::from_parts(mean, var)
    }
}

/// Tilted discrete pmfs `∝ exp(γ_i a - Λ_i a²/2)` over `alphabet`, with their
/// moments. Computed in the log domain, so any finite parameters are safe.
pub fn r_moments<T: Real>(alphabet: &[T], params_r: &NaturalParams<T>) -> (DiscreteSite<T>, MomentSet<T>) {
    let half = T::lit(0.5);
    let n = params_r.len();
    let mut pmf = Vec::with_capacity(n);
    let mut log_z = T::zero();
    let mut w = vec![T::zero(); alphabet.len()];
    for i in 0..n {
        let (g, l) = (params_r.gamma[i], params_r.lambda[i]);
        for (wk, &a) in w.iter_mut().zip(alphabet) {
            *wk = g * a - half * l * a * a;
        }
        let lse = log_sum_exp(&w);
        log_z += lse;
        pmf.push(w.iter().map(|&x| (x - lse).exp()).collect());
    }
    let site = DiscreteSite { pmf, log_z };
    let mom = site.moments(alphabet);
    (site, mom)
}

/// `log Z_r(λ) = Σ_i log Σ_a exp(γ_i a - Λ_i a²/2)`.
pub fn log_zr<T: Real>(alphabet: &[T], params_r: &NaturalParams<T>) -> T {
    let half = T::lit(0.5);
    let mut w = vec![T::zero(); alphabet.len()];
    (0..params_r.len())
        .map(|i| {
            for (wk, &a) in w.iter_mut().zip(alphabet) {
                *wk = params_r.gamma[i] * a - half * params_r.lambda[i] * a * a;
            }
            log_sum_exp(&w)
        })
        .sum()
}

/// Natural parameters of the independent Gaussian with the given moments:
/// `Λ = 1/Var`, `γ = mean·Λ`.
pub fn s_params_from_moments<T: Real>(mom: &MomentSet<T>) -> Result<NaturalParams<T>> {
    let n = mom.len();
    let (mut gamma, mut lambda) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let var = mom.variance(i);
        if !(var > T::zero()) || !var.is_finite() {
            return Err(Error::DegenerateMoment { index: i, variance: var.to_f64_lossy() });
        }
        let l = T::one() / var;
        lambda.push(l);
        gamma.push(mom.mean[i] * l);
    }
    Ok(NaturalParams { gamma, lambda })
}

/// Like [`s_params_from_moments`] but with per-component variances given
/// explicitly (used when a variance floor overrides the moment variance).
pub fn s_params_from_mean_var<T: Real>(mean: &[T], var: &[T]) -> Result<NaturalParams<T>> {
    check_len(mean.len(), var.len())?;
    let mut out = NaturalParams { gamma: Vec::with_capacity(mean.len()), lambda: Vec::with_capacity(mean.len()) };
    for (i, (&m, &v)) in mean.iter().zip(var).enumerate() {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::DegenerateMoment { index: i, variance: v.to_f64_lossy() });
        }
        out.lambda.push(T::one() / v);
        out.gamma.push(m / v);
    }
    Ok(out)
}

fn check_positive_precision<T: Real>(params: &NaturalParams<T>) -> Result<()> {
    match params.lambda.iter().position(|&l| !(l > T::zero())) {
        Some(i) => Err(Error::DegenerateMoment { index: i, variance: (T::one() / params.lambda[i]).to_f64_lossy() }),
        None => Ok(()),
    }
}

/// Moments of `s(u)`: mean `γ/Λ`, variance `1/Λ`.
pub fn s_moments<T: Real>(params_s: &NaturalParams<T>) -> Result<MomentSet<T>> {
    check_positive_precision(params_s)?;
    let mean: Vec<T> = params_s.gamma.iter().zip(&params_s.lambda).map(|(&g, &l)| g / l).collect();
    let var = params_s.lambda.iter().map(|&l| T::one() / l).collect();
    Ok(MomentSet::from_parts(mean, var))
}

/// `log Z_s(λ) = Σ_i γ_i²/(2Λ_i) + ½ log(2π/Λ_i)`.
pub fn log_zs<T: Real>(params_s: &NaturalParams<T>) -> Result<T> {
    check_positive_precision(params_s)?;
    let half = T::lit(0.5);
    let two_pi = T::lit(2.0) * T::PI();
    Ok(params_s
        .gamma
        .iter()
        .zip(&params_s.lambda)
        .map(|(&g, &l)| half * g * g / l + half * (two_pi / l).ln())
        .sum())
}

/// Gradient of the EC energy, laid out as natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EcGradient<T> {
    /// `E_q[φ] - E_r[φ]`.
    pub wrt_q: NaturalParams<T>,
    /// `E_r[φ] - E_s[φ]`.
    pub wrt_s: NaturalParams<T>,
}

/// Energy value together with its gradient blocks.
#[derive(Debug, Clone)]
pub struct EcEvaluation<T> {
    pub log_z_ec: T,
    pub gradient: EcGradient<T>,
    pub q: MomentSet<T>,
    pub r: MomentSet<T>,
    pub s: MomentSet<T>,
}

pub fn ec_evaluate<T: Real>(
    lik: &GaussianLikelihood<T>,
    alphabet: &[T],
    params_q: &NaturalParams<T>,
    params_s: &NaturalParams<T>,
    norm: Normalization,
) -> Result<EcEvaluation<T>> {
    check_len(params_q.len(), params_s.len())?;
    let qm = lik.marginals(params_q)?;
    let params_r = params_s.sub(params_q);
    let (site, r) = r_moments(alphabet, &params_r);
    let s = s_moments(params_s)?;
    let log_zq = match norm {
        Normalization::Reduced => qm.log_z,
        Normalization::Full => qm.log_z + lik.log_z_constant(),
    };
    let log_z_ec = log_zq + site.log_z - log_zs(params_s)?;
    let (eq, er, es) = (qm.moments.expected_statistics(), r.expected_statistics(), s.expected_statistics());
    Ok(EcEvaluation {
        log_z_ec,
        gradient: EcGradient { wrt_q: eq.sub(&er), wrt_s: er.sub(&es) },
        q: qm.moments,
        r,
        s,
    })
}

/// `log Z_EC(λ_q, λ_s) = log Z_q(λ_q) + log Z_r(λ_s - λ_q) - log Z_s(λ_s)`.
pub fn ec_free_energy<T: Real>(
    ch: &RealChannel<T>,
    alphabet: &[T],
    params_q: &NaturalParams<T>,
    params_s: &NaturalParams<T>,
    norm: Normalization,
) -> Result<T> {
    let lik = GaussianLikelihood::new(ch)?;
    Ok(ec_evaluate(&lik, alphabet, params_q, params_s, norm)?.log_z_ec)
}

pub fn ec_gradient<T: Real>(
    ch: &RealChannel<T>,
    alphabet: &[T],
    params_q: &NaturalParams<T>,
    params_s: &NaturalParams<T>,
) -> Result<EcGradient<T>> {
    let lik = GaussianLikelihood::new(ch)?;
    Ok(ec_evaluate(&lik, alphabet, params_q, params_s, Normalization::Reduced)?.gradient)
}
