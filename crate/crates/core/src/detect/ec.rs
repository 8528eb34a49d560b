//! Expectation-consistent detectors.
//!
//! The single loop alternates moment matching between the Gaussian `q`, the
//! averaging Gaussian `s` and the discrete `r`, damping the update of
//! `λ_q`. The double loop holds `λ_s` fixed, minimizes the convex function
//! `log Z_q(λ_q) + log Z_r(λ_s - λ_q)` over `λ_q` by gradient descent, and
//! then moves `λ_s` to match `q`.

use crate::error::Result;
use crate::expfam::{
    ec_evaluate, r_moments, s_params_from_mean_var, DiscreteSite, GaussianLikelihood, MomentSet, NaturalParams, Normalization,
};
use crate::metrics::delta_metrics;
use crate::model::{Constellation, RealChannel};
use crate::scalar::Real;

use super::mmse::{mmse_from_likelihood, mmse_prior};
use super::{DeltaPoint, Detector, Diagnostics, EnergyPoint, SoftOutput, DEFAULT_LLR_CLAMP};

/// Which `λ_q` forms the cavity `λ_r = λ_s - λ_q` at the start of a
/// single-loop iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CavityReading {
    /// The damped `λ_q` carried over from the previous iteration.
    #[default]
    DampedPrevious,
    /// The previous iteration's undamped proposal `λ_s - λ_r`.
    UndampedProposal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcConfig<T> {
    /// Damping factor in `(0, 1]`.
    pub beta: T,
    /// Outer iterations. Zero returns the initialization.
    pub max_iters: usize,
    pub variance_floor_enabled: bool,
    /// Floor is `floor_initial · floor_decay^(max(ℓ - floor_start_iter, 1) - 1)`
    /// at iteration `ℓ` (counted from 1).
    pub floor_start_iter: usize,
    pub floor_initial: T,
    pub floor_decay: T,
    /// Smallest variance handed to the `s` inversion, relative to `Ẽs`.
    pub min_variance: T,
    /// Stop once the max-norm parameter change falls below this.
    pub convergence_tol: T,
    pub cavity: CavityReading,
    /// Gradient-descent step cap per outer iteration (double loop).
    pub dl_inner_steps: usize,
    /// Initial trial step of the inner line search.
    pub dl_step_size: T,
    /// Step multiplier after an accepted step; 1 keeps the step capped at
    /// `dl_step_size`.
    pub dl_step_growth: T,
    /// Inner solve stops when the gradient's Euclidean norm drops below this.
    pub dl_grad_tol: T,
    pub llr_clamp: T,
    /// Record the inner objective of every accepted step.
    pub record_inner_objective: bool,
    /// Record `log Z_EC` and gradient norms per iteration.
    pub record_energy: bool,
    /// Keep the previous `(γ_q, Λ_q)` of any component whose undamped
    /// proposal has negative precision. Such components then never match,
    /// so the moment mismatch stalls above zero.
    pub skip_negative_precision: bool,
}

impl<T: Real> EcConfig<T> {
    /// `β = 0.95`, variance floor on, 10 iterations.
    pub fn recommended() -> Self {
        Self {
            beta: T::lit(0.95),
            max_iters: 10,
            variance_floor_enabled: true,
            floor_start_iter: 4,
            floor_initial: T::lit(0.5),
            floor_decay: T::lit(0.5),
            min_variance: T::lit(1e-10),
            convergence_tol: T::lit(1e-6),
            cavity: CavityReading::default(),
            dl_inner_steps: 2000,
            dl_step_size: T::lit(1e-3),
            dl_step_growth: T::lit(2.0),
            dl_grad_tol: T::lit(0.1),
            llr_clamp: T::lit(DEFAULT_LLR_CLAMP),
            record_inner_objective: false,
            record_energy: false,
            skip_negative_precision: false,
        }
    }

    /// Single loop with the given damping, length and floor setting.
    pub fn single_loop(beta: f64, max_iters: usize, floor: bool) -> Self {
        Self { beta: T::lit(beta), max_iters, variance_floor_enabled: floor, ..Self::recommended() }
    }

    /// Double-loop benchmark: 50 outer iterations, up to 2000 inner steps
    /// starting at `10⁻³`, gradient tolerance 0.1, undamped `s` update.
    pub fn double_loop() -> Self {
        Self { beta: T::one(), max_iters: 50, variance_floor_enabled: false, ..Self::recommended() }
    }

    pub fn variance_floor(&self, iteration: usize) -> T {
        let e = iteration.saturating_sub(self.floor_start_iter).max(1) - 1;
        self.floor_initial * self.floor_decay.powi(e as i32)
    }

    fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.beta > T::zero() && self.beta <= T::one()) {
            return Err(Error::InvalidParameter { name: "beta", reason: format!("must lie in (0, 1], got {}", self.beta) });
        }
        if !(self.min_variance > T::zero()) {
            return Err(Error::InvalidParameter { name: "min_variance", reason: "must be positive".into() });
        }
        if !(self.dl_step_size > T::zero()) || self.dl_step_growth < T::one() {
            return Err(Error::InvalidParameter { name: "dl_step_size", reason: "step must be positive and growth at least 1".into() });
        }
        Ok(())
    }
}

impl<T: Real> Default for EcConfig<T> {
    fn default() -> Self {
        Self::recommended()
    }
}

/// `s` matched to the given moments, with variances clamped from below.
fn match_s<T: Real>(mom: &MomentSet<T>, floor: T) -> Result<NaturalParams<T>> {
    let var: Vec<T> = mom.variances().iter().map(|&v| v.max(floor)).collect();
    s_params_from_mean_var(&mom.mean, &var)
}

fn delta_point<T: Real>(q: &MomentSet<T>, r: &MomentSet<T>) -> DeltaPoint<T> {
    let (delta_u, delta_u2) = delta_metrics(q, r).expect("moment sets share a length");
    DeltaPoint { delta_u, delta_u2 }
}

fn energy_point<T: Real>(lik: &GaussianLikelihood<T>, alphabet: &[T], lq: &NaturalParams<T>, ls: &NaturalParams<T>) -> Result<EnergyPoint<T>> {
    let ev = ec_evaluate(lik, alphabet, lq, ls, Normalization::Full)?;
    Ok(EnergyPoint { log_z_ec: ev.log_z_ec, grad_q_norm: ev.gradient.wrt_q.norm(), grad_s_norm: ev.gradient.wrt_s.norm() })
}

/// Applies `proposal`, reverting components until `q` stays proper.
/// Returns the accepted parameters and the number of reverted components.
fn guarded_update<T: Real>(lik: &GaussianLikelihood<T>, previous: &NaturalParams<T>, proposal: NaturalParams<T>) -> (NaturalParams<T>, usize) {
    if proposal.is_finite() && lik.factor(&proposal).is_ok() {
        return (proposal, 0);
    }
    let revert = |keep: &dyn Fn(usize) -> bool| {
        let mut p = proposal.clone();
        let mut count = 0;
        for i in 0..p.len() {
            let bad = !p.gamma[i].is_finite() || !p.lambda[i].is_finite();
            if bad || !keep(i) {
                p.gamma[i] = previous.gamma[i];
                p.lambda[i] = previous.lambda[i];
                count += 1;
            }
        }
        (p, count)
    };
    let stages: [&dyn Fn(usize) -> bool; 2] = [
        &|i| proposal.lambda[i] >= T::zero() || proposal.lambda[i] >= previous.lambda[i],
        &|i| proposal.lambda[i] >= previous.lambda[i],
    ];
    for keep in stages {
        let (p, count) = revert(keep);
        if lik.factor(&p).is_ok() {
            return (p, count);
        }
    }
    (previous.clone(), proposal.len())
}

struct SiteState<T> {
    site: DiscreteSite<T>,
    q: MomentSet<T>,
    r: MomentSet<T>,
    params_r: NaturalParams<T>,
}

/// Steps 1-4 of a single-loop iteration: `q` moments, `s` matched to `q`,
/// cavity `λ_r = λ_s - cavity_q`, `r` moments.
fn q_to_r<T: Real>(
    lik: &GaussianLikelihood<T>,
    alphabet: &[T],
    lambda_q: &NaturalParams<T>,
    cavity_q: &NaturalParams<T>,
    min_var: T,
) -> Result<(SiteState<T>, NaturalParams<T>)> {
    let qm = lik.marginals(lambda_q)?;
    let params_s = match_s(&qm.moments, min_var)?;
    let params_r = params_s.sub(cavity_q);
    let (site, r) = r_moments(alphabet, &params_r);
    Ok((SiteState { site, q: qm.moments, r, params_r }, params_s))
}

/// Single-loop EC detector. Zero iterations reproduces the MMSE detector.
pub fn ec_single_loop<T: Real>(ch: &RealChannel<T>, cst: &Constellation<T>, cfg: &EcConfig<T>) -> Result<SoftOutput<T>> {
    cfg.validate()?;
    let lik = GaussianLikelihood::new(ch)?;
    if cfg.max_iters == 0 {
        return mmse_from_likelihood(&lik, cst, cfg.llr_clamp);
    }
    let alphabet = cst.real_alphabet();
    let min_var = cfg.min_variance * cst.real_energy();
    let mut lambda_q = mmse_prior(lik.dim(), cst);
    let mut proposal: Option<NaturalParams<T>> = None;
    let mut diag = Diagnostics::default();

    for ell in 1..=cfg.max_iters {
        let cavity = match (cfg.cavity, &proposal) {
            (CavityReading::UndampedProposal, Some(p)) => p,
            _ => &lambda_q,
        };
        let (state, params_s_q) = q_to_r(&lik, alphabet, &lambda_q, cavity, min_var)?;
        diag.trace.push(delta_point(&state.q, &state.r));
        if cfg.record_energy && ell == 1 {
            diag.energy.push(energy_point(&lik, alphabet, &lambda_q, &params_s_q)?);
        }

        let floor = if cfg.variance_floor_enabled { cfg.variance_floor(ell).max(min_var) } else { min_var };
        let params_s = match_s(&state.r, floor)?;
        let undamped = params_s.sub(&state.params_r);
        let mut damped = undamped.damped(&lambda_q, cfg.beta);
        let mut skipped = 0;
        if cfg.skip_negative_precision {
            for i in 0..damped.len() {
                if undamped.lambda[i] < T::zero() {
                    damped.gamma[i] = lambda_q.gamma[i];
                    damped.lambda[i] = lambda_q.lambda[i];
                    skipped += 1;
                }
            }
        }
        let (next, rejected) = guarded_update(&lik, &lambda_q, damped);
        diag.skipped_updates += skipped;
        diag.rejected_updates += rejected;
        let change = next.max_abs_diff(&lambda_q);
        lambda_q = next;
        proposal = Some(undamped);
        diag.iterations = ell;
        if cfg.record_energy {
            diag.energy.push(energy_point(&lik, alphabet, &lambda_q, &params_s)?);
        }
        if skipped + rejected == 0 && change < cfg.convergence_tol {
            break;
        }
    }

    let (state, _) = q_to_r(&lik, alphabet, &lambda_q, &lambda_q, min_var)?;
    let last = delta_point(&state.q, &state.r);
    diag.trace.push(last);
    diag.delta_u = last.delta_u;
    diag.delta_u2 = last.delta_u2;
    let mut out = SoftOutput::from_real_pmf(state.site.pmf, cst, cfg.llr_clamp);
    out.diagnostics = diag;
    Ok(out)
}

struct InnerResult<T> {
    lambda_q: NaturalParams<T>,
    state: SiteState<T>,
    steps: usize,
    converged: bool,
    objective: Vec<T>,
}

/// Minimizes `log Z_q(λ_q) + log Z_r(λ_s - λ_q)` over `λ_q` by gradient
/// descent with an Armijo backtracking line search.
fn inner_solve<T: Real>(
    lik: &GaussianLikelihood<T>,
    alphabet: &[T],
    params_s: &NaturalParams<T>,
    start: NaturalParams<T>,
    cfg: &EcConfig<T>,
) -> Result<InnerResult<T>> {
    let eval = |lq: &NaturalParams<T>| -> Result<(T, NaturalParams<T>, SiteState<T>)> {
        let qm = lik.marginals(lq)?;
        let params_r = params_s.sub(lq);
        let (site, r) = r_moments(alphabet, &params_r);
        let grad = qm.moments.expected_statistics().sub(&r.expected_statistics());
        Ok((qm.log_z + site.log_z, grad, SiteState { site, q: qm.moments, r, params_r }))
    };
    let armijo = T::lit(1e-4);
    let min_step = T::lit(1e-18);
    let max_step = T::lit(1e6);

    let mut lambda_q = start;
    let (mut f, mut grad, mut state) = eval(&lambda_q)?;
    let mut objective = Vec::new();
    if cfg.record_inner_objective {
        objective.push(f);
    }
    let mut step = cfg.dl_step_size;
    let mut steps = 0;
    let mut converged = false;
    while steps < cfg.dl_inner_steps {
        let g2: T = grad.gamma.iter().chain(&grad.lambda).map(|&x| x * x).sum();
        if g2.sqrt() < cfg.dl_grad_tol {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut t = step;
        while t >= min_step {
            let trial = NaturalParams {
                gamma: lambda_q.gamma.iter().zip(&grad.gamma).map(|(&p, &g)| p - t * g).collect(),
                lambda: lambda_q.lambda.iter().zip(&grad.lambda).map(|(&p, &g)| p - t * g).collect(),
            };
            if let Ok((ft, gt, st)) = eval(&trial) {
                if ft <= f - armijo * t * g2 {
                    accepted = Some((trial, ft, gt, st));
                    break;
                }
            }
            t = t * T::lit(0.5);
        }
        let Some((trial, ft, gt, st)) = accepted else { break };
        lambda_q = trial;
        f = ft;
        grad = gt;
        state = st;
        steps += 1;
        if cfg.record_inner_objective {
            objective.push(f);
        }
        step = (t * cfg.dl_step_growth).min(max_step);
    }
    if !converged {
        let g2: T = grad.gamma.iter().chain(&grad.lambda).map(|&x| x * x).sum();
        converged = g2.sqrt() < cfg.dl_grad_tol;
    }
    Ok(InnerResult { lambda_q, state, steps, converged, objective })
}

/// Double-loop EC detector.
pub fn ec_double_loop<T: Real>(ch: &RealChannel<T>, cst: &Constellation<T>, cfg: &EcConfig<T>) -> Result<SoftOutput<T>> {
    cfg.validate()?;
    let lik = GaussianLikelihood::new(ch)?;
    let alphabet = cst.real_alphabet();
    let min_var = cfg.min_variance * cst.real_energy();
    let mut params_s = mmse_prior(lik.dim(), cst);
    let mut lambda_q = mmse_prior(lik.dim(), cst);
    let mut diag = Diagnostics::default();

    let init_r = params_s.sub(&lambda_q);
    let (mut site, r0) = r_moments(alphabet, &init_r);
    let q0 = lik.marginals(&lambda_q)?;
    diag.trace.push(delta_point(&q0.moments, &r0));
    if cfg.record_energy {
        diag.energy.push(energy_point(&lik, alphabet, &lambda_q, &params_s)?);
    }

    for ell in 1..=cfg.max_iters {
        let inner = inner_solve(&lik, alphabet, &params_s, lambda_q, cfg)?;
        lambda_q = inner.lambda_q;
        diag.inner_steps.push(inner.steps);
        if !inner.converged {
            diag.inner_unconverged += 1;
        }
        if cfg.record_inner_objective {
            diag.inner_objective.push(inner.objective);
        }
        diag.trace.push(delta_point(&inner.state.q, &inner.state.r));
        site = inner.state.site;

        let matched = match_s(&inner.state.q, min_var)?;
        let next = matched.damped(&params_s, cfg.beta);
        let change = next.max_abs_diff(&params_s);
        params_s = next;
        diag.iterations = ell;
        if cfg.record_energy {
            diag.energy.push(energy_point(&lik, alphabet, &lambda_q, &params_s)?);
        }
        if change < cfg.convergence_tol {
            break;
        }
    }

    let last = *diag.trace.last().expect("trace has the initial point");
    diag.delta_u = last.delta_u;
    diag.delta_u2 = last.delta_u2;
    let mut out = SoftOutput::from_real_pmf(site.pmf, cst, cfg.llr_clamp);
    out.diagnostics = diag;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EcSingleLoop<T> {
    pub config: EcConfig<T>,
    pub name: String,
}

impl<T: Real> EcSingleLoop<T> {
    pub fn new(config: EcConfig<T>) -> Self {
        Self { config, name: "ec-sl".into() }
    }
}

impl<T: Real> Detector<T> for EcSingleLoop<T> {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
        ec_single_loop(ch, cst, &self.config)
    }
}

#[derive(Debug, Clone)]
pub struct EcDoubleLoop<T> {
    pub config: EcConfig<T>,
    pub name: String,
}

impl<T: Real> EcDoubleLoop<T> {
    pub fn new(config: EcConfig<T>) -> Self {
        Self { config, name: "ec-dl".into() }
    }
}

impl<T: Real> Detector<T> for EcDoubleLoop<T> {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn detect(&self, ch: &RealChannel<T>, cst: &Constellation<T>) -> Result<SoftOutput<T>> {
        ec_double_loop(ch, cst, &self.config)
    }
}
