//! The stabilized primal-dual optimizer.
//!
//! Each outer iteration extrapolates the loss vector with a momentum term,
//! takes a damped proximal ascent step for the dual variable over the
//! permutahedron, and then approximately minimizes the resulting weighted
//! smooth objective (plus an anchored proximal term) with a variance-reduced
//! stochastic inner loop. The damping on the dual step is what keeps the
//! primal trajectory from oscillating when losses tie.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objective::{LossKind, ObjectiveModel};
use crate::permutahedron::{contains, lmo, project, DualPoint};
use crate::schedule::ScheduleParams;
use crate::spectra::{spectral_risk, LossVector, SpectralWeights};
use crate::trace::{RunResult, TrainingTrace};

/// Membership tolerance for dual points entering the inner solver.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Iterate norm at which a run is declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e8;

/// `(1 + theta) * l_curr - theta * l_prev`, the extrapolated scores driving
/// the dual step.
pub fn momentum_scores(l_curr: &LossVector, l_prev: &LossVector, theta: f64) -> Result<Vec<f64>> {
    if l_curr.len() != l_prev.len() {
        return Err(Error::LengthMismatch {
            expected: l_curr.len(),
            actual: l_prev.len(),
        });
    }
    if theta.is_nan() || theta < 0.0 || theta.is_infinite() {
        return Err(Error::invalid("theta", format!("must be finite and >= 0, got {theta}")));
    }
    Ok(l_curr
        .values()
        .iter()
        .zip(l_prev.values())
        .map(|(c, p)| (1.0 + theta) * c - theta * p)
        .collect())
}

/// Damped dual ascent: the maximizer of `<scores, lambda> - |lambda -
/// lambda_k|^2 / (2 eta)` over the permutahedron, i.e. the projection of
/// `lambda_k + eta * scores`.
pub fn dual_update(
    lambda: &DualPoint,
    scores: &[f64],
    eta: f64,
    sigma: &SpectralWeights,
) -> Result<DualPoint> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    if scores.len() != lambda.len() {
        return Err(Error::LengthMismatch {
            expected: lambda.len(),
            actual: scores.len(),
        });
    }
    let shifted: Vec<f64> = lambda
        .coords()
        .iter()
        .zip(scores)
        .map(|(l, s)| l + eta * s)
        .collect();
    project(&shifted, sigma)
}

/// Inner-loop parameters extracted from a schedule at outer index `k`.
#[derive(Debug, Clone)]
pub struct InnerParams {
    pub step_size: f64,
    pub prox_weight: f64,
    pub epoch_len: usize,
    pub steps: usize,
    pub averaged: bool,
    pub proximal: bool,
    /// Samples drawn per inner step (without replacement), their
    /// variance-reduced directions averaged. Sizes above 1 are a heuristic
    /// with no convergence theory behind them.
    pub batch_size: usize,
}

impl InnerParams {
    pub fn at(schedule: &dyn ScheduleParams, k: usize) -> Self {
        Self {
            step_size: schedule.step_size(),
            prox_weight: schedule.tau(k),
            epoch_len: schedule.epoch_len(k),
            steps: schedule.inner_steps(k),
            averaged: schedule.averaged_iterates(),
            proximal: schedule.proximal_inner(),
            batch_size: 1,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }
}

/// Inner solve output with its evaluation counts (sample evaluations, not
/// passes; divide by n for passes).
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub w: Vec<f64>,
    pub loss_evals: u64,
    pub grad_evals: u64,
}

fn check_divergence(w: &[f64]) -> Result<()> {
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    if !norm2.is_finite() || norm2 > DIVERGENCE_NORM * DIVERGENCE_NORM {
        return Err(Error::Diverged { norm: norm2.sqrt() });
    }
    Ok(())
}

fn weighted_grad_from_scalars(model: &ObjectiveModel, lambda: &[f64], scalars: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.d()];
    for i in 0..model.n() {
        let c = lambda[i] * scalars[i];
        if c == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(model.dataset().row(i)) {
            *o += c * x;
        }
    }
    out
}

/// The variance-reduced direction
/// `n lambda_i (grad l_i(w) - grad l_i(ref)) + gbar`, where `ref_scalars`
/// caches the gradient scalars at the reference point and `gbar` is the
/// lambda-weighted full gradient there. Unbiased for the weighted full
/// gradient at `w`, and exactly `gbar` when `w` equals the reference point.
pub fn variance_reduced_direction(
    model: &ObjectiveModel,
    lambda: &DualPoint,
    i: usize,
    w: &[f64],
    ref_scalars: &[f64],
    gbar: &[f64],
) -> Vec<f64> {
    let n = model.n() as f64;
    let c = n * lambda.coords()[i] * (model.grad_scalar_at(i, w) - ref_scalars[i]);
    model
        .dataset()
        .row(i)
        .iter()
        .zip(gbar)
        .map(|(x, g)| c * x + g)
        .collect()
}

/// Variance-reduced stochastic solve of the anchored weighted subproblem
/// `min_w sum_i lambda_i l_i(w) + g(w) + |w - anchor|^2 / (2 tau)`.
///
/// The reference point and weighted full gradient are refreshed every
/// `epoch_len` steps using either the epoch average or the last iterate.
pub fn inner_solve(
    model: &ObjectiveModel,
    lambda: &DualPoint,
    sigma: &SpectralWeights,
    anchor: &[f64],
    params: &InnerParams,
    rng: &mut ChaCha8Rng,
) -> Result<InnerResult> {
    let violation_tol = MEMBERSHIP_TOL;
    if !contains(lambda.coords(), sigma, violation_tol) {
        return Err(Error::NotInPermutahedron {
            violation: f64::NAN,
            tol: violation_tol,
        });
    }
    if params.epoch_len == 0 || params.steps == 0 {
        return Err(Error::invalid("inner", "epoch length and step count must be positive"));
    }
    let n = model.n();
    let d = model.d();
    let lam = lambda.coords();

    let mut w = anchor.to_vec();
    let mut ref_scalars: Vec<f64> = (0..n).map(|i| model.grad_scalar_at(i, anchor)).collect();
    let mut gbar = weighted_grad_from_scalars(model, lam, &ref_scalars);
    let mut grad_evals = n as u64;

    let mut epoch_sum = vec![0.0; d];
    let mut epoch_count = 0usize;

    for t in 1..=params.steps {
        if t > 1 && (t - 1) % params.epoch_len == 0 {
            let wbar: Vec<f64> = if params.averaged {
                epoch_sum.iter().map(|s| s / epoch_count as f64).collect()
            } else {
                w.clone()
            };
            for (i, s) in ref_scalars.iter_mut().enumerate() {
                *s = model.grad_scalar_at(i, &wbar);
            }
            gbar = weighted_grad_from_scalars(model, lam, &ref_scalars);
            grad_evals += n as u64;
            epoch_sum.fill(0.0);
            epoch_count = 0;
        }

        let dir = if params.batch_size <= 1 {
            let i = rng.random_range(0..n);
            grad_evals += 1;
            variance_reduced_direction(model, lambda, i, &w, &ref_scalars, &gbar)
        } else {
            let b = params.batch_size.min(n);
            let batch = rand::seq::index::sample(rng, n, b);
            grad_evals += b as u64;
            let mut avg = vec![0.0; d];
            for i in batch {
                let one = variance_reduced_direction(model, lambda, i, &w, &ref_scalars, &gbar);
                for (a, v) in avg.iter_mut().zip(one) {
                    *a += v / b as f64;
                }
            }
            avg
        };

        w = if params.proximal {
            let shifted: Vec<f64> = w
                .iter()
                .zip(&dir)
                .map(|(wi, di)| wi - params.step_size * di)
                .collect();
            model.prox_step(&shifted, anchor, params.step_size, params.prox_weight)?
        } else {
            model.gradient_inner_step(&w, &dir, anchor, params.step_size, params.prox_weight)
        };
        check_divergence(&w)?;

        for (s, wi) in epoch_sum.iter_mut().zip(&w) {
            *s += wi;
        }
        epoch_count += 1;
    }

    let w_out = if params.averaged {
        epoch_sum.iter().map(|s| s / epoch_count as f64).collect()
    } else {
        w
    };
    Ok(InnerResult {
        w: w_out,
        loss_evals: 0,
        grad_evals,
    })
}

/// Direct minimizer of the anchored weighted subproblem: a linear solve for
/// least squares, damped Newton for logistic. Counts as one data pass.
pub fn exact_inner_solve(
    model: &ObjectiveModel,
    lambda: &DualPoint,
    anchor: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::invalid("tau", "must be positive"));
    }
    if lambda.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            actual: lambda.len(),
        });
    }
    match model.loss_kind() {
        LossKind::LeastSquares => exact_least_squares(model, lambda.coords(), anchor, 1.0 / tau),
        LossKind::Logistic => newton_logistic(model, lambda.coords(), anchor, 1.0 / tau),
    }
}

/// Exact minimizer of `sum_i lambda_i l_i(w) + g(w)` with no proximal
/// anchor; needs `mu > 0` for the system to stay positive definite.
pub fn weighted_erm_minimizer(model: &ObjectiveModel, lambda: &DualPoint) -> Result<Vec<f64>> {
    if lambda.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            actual: lambda.len(),
        });
    }
    let zeros = vec![0.0; model.d()];
    match model.loss_kind() {
        LossKind::LeastSquares => exact_least_squares(model, lambda.coords(), &zeros, 0.0),
        LossKind::Logistic => newton_logistic(model, lambda.coords(), &zeros, 0.0),
    }
}

fn spd_solve(mut h: nalgebra::DMatrix<f64>, b: nalgebra::DVector<f64>) -> Result<Vec<f64>> {
    for a in 0..h.nrows() {
        for c in 0..a {
            let v = h[(a, c)];
            h[(c, a)] = v;
        }
    }
    let chol = nalgebra::Cholesky::new(h)
        .ok_or_else(|| Error::invalid("linear_solve", "system is not positive definite"))?;
    Ok(chol.solve(&b).iter().copied().collect())
}

fn exact_least_squares(
    model: &ObjectiveModel,
    lam: &[f64],
    anchor: &[f64],
    inv_tau: f64,
) -> Result<Vec<f64>> {
    let d = model.d();
    let ridge = model.reg_mu() + inv_tau;
    let mut h = nalgebra::DMatrix::<f64>::zeros(d, d);
    let mut b = nalgebra::DVector::<f64>::zeros(d);
    for (i, &li) in lam.iter().enumerate() {
        if li == 0.0 {
            continue;
        }
        let x = model.dataset().row(i);
        let y = model.dataset().target(i);
        for a in 0..d {
            b[a] += li * y * x[a];
            for c in 0..=a {
                h[(a, c)] += li * x[a] * x[c];
            }
        }
    }
    for a in 0..d {
        h[(a, a)] += ridge;
        b[a] += anchor[a] * inv_tau;
    }
    spd_solve(h, b)
}

fn newton_logistic(
    model: &ObjectiveModel,
    lam: &[f64],
    anchor: &[f64],
    inv_tau: f64,
) -> Result<Vec<f64>> {
    let d = model.d();
    let ridge = model.reg_mu() + inv_tau;
    let objective = |w: &[f64]| -> f64 {
        let mut f = model.reg_value(w);
        for (i, &li) in lam.iter().enumerate() {
            if li != 0.0 {
                f += li * model.loss_at(i, w).unwrap_or(f64::INFINITY);
            }
        }
        let shift: f64 = w
            .iter()
            .zip(anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        f + 0.5 * inv_tau * shift
    };

    let mut w = anchor.to_vec();
    for _ in 0..100 {
        let mut grad = nalgebra::DVector::<f64>::zeros(d);
        let mut hess = nalgebra::DMatrix::<f64>::zeros(d, d);
        for (i, &li) in lam.iter().enumerate() {
            if li == 0.0 {
                continue;
            }
            let x = model.dataset().row(i);
            let y = model.dataset().target(i);
            let margin: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (y * margin).exp()); // sigmoid(-y m)
            let gs = -y * p;
            let curv = p * (1.0 - p);
            for a in 0..d {
                grad[a] += li * gs * x[a];
                for c in 0..=a {
                    hess[(a, c)] += li * curv * x[a] * x[c];
                }
            }
        }
        for a in 0..d {
            grad[a] += model.reg_mu() * w[a] + (w[a] - anchor[a]) * inv_tau;
            hess[(a, a)] += ridge;
        }
        let gnorm = grad.norm();
        if gnorm <= 1e-13 * (1.0 + ridge * w.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            break;
        }
        let step = spd_solve(hess, grad)?;
        let f0 = objective(&w);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(&step).map(|(wi, si)| wi - t * si).collect();
            if objective(&cand) <= f0 || t < 1e-8 {
                w = cand;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(w)
}

/// How the primal subproblem is solved each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStrategy {
    /// The variance-reduced stochastic loop (the actual algorithm).
    Svrg,
    /// Direct subproblem minimization; isolates outer-loop behavior and
    /// backs the reference solver.
    Exact,
}

#[derive(Debug, Clone)]
pub struct SorelOptions {
    pub outer_iters: usize,
    /// Stop early once cumulative passes reach this budget.
    pub pass_budget: Option<f64>,
    pub seed: u64,
    pub inner: InnerStrategy,
    /// Initial iterate; zeros when absent.
    pub w0: Option<Vec<f64>>,
    /// Minibatch size of the stochastic inner loop (heuristic for sizes
    /// above 1; the guarantee covers single-sample steps).
    pub batch_size: usize,
}

impl Default for SorelOptions {
    fn default() -> Self {
        Self {
            outer_iters: 100,
            pass_budget: None,
            seed: 0,
            inner: InnerStrategy::Svrg,
            w0: None,
            batch_size: 1,
        }
    }
}

/// Mutable optimizer state across outer iterations.
#[derive(Debug, Clone)]
pub struct SorelState {
    pub w_curr: Vec<f64>,
    pub w_prev: Vec<f64>,
    pub lambda: DualPoint,
    pub k: usize,
    pub loss_evals: u64,
    pub grad_evals: u64,
}

/// Stepwise driver owning the state; `run_sorel` wraps it.
pub struct SorelSolver<'a> {
    model: &'a ObjectiveModel,
    sigma: &'a SpectralWeights,
    schedule: &'a dyn ScheduleParams,
    inner: InnerStrategy,
    inner_batch: usize,
    seed: u64,
    state: SorelState,
    l_curr: LossVector,
    l_prev: LossVector,
    /// Loss vector of the newest iterate, computed for the trace objective
    /// and recycled (and only then charged) as the next iteration's input.
    pending: Option<LossVector>,
}

impl<'a> SorelSolver<'a> {
    pub fn new(
        model: &'a ObjectiveModel,
        sigma: &'a SpectralWeights,
        schedule: &'a dyn ScheduleParams,
        inner: InnerStrategy,
        seed: u64,
        w0: Option<Vec<f64>>,
    ) -> Result<Self> {
        if sigma.n() != model.n() {
            return Err(Error::LengthMismatch {
                expected: model.n(),
                actual: sigma.n(),
            });
        }
        let w0 = match w0 {
            Some(w) if w.len() != model.d() => {
                return Err(Error::LengthMismatch {
                    expected: model.d(),
                    actual: w.len(),
                })
            }
            Some(w) => w,
            None => vec![0.0; model.d()],
        };
        let l0 = model.full_loss_vector(&w0)?;
        let lambda = lmo(l0.values(), sigma)?;
        Ok(Self {
            model,
            sigma,
            schedule,
            inner,
            inner_batch: 1,
            seed,
            state: SorelState {
                w_curr: w0.clone(),
                w_prev: w0,
                lambda,
                k: 0,
                loss_evals: model.n() as u64,
                grad_evals: 0,
            },
            l_curr: l0.clone(),
            l_prev: l0,
            pending: None,
        })
    }

    /// Minibatch size used by the stochastic inner loop (heuristic above 1).
    pub fn set_batch_size(&mut self, batch_size: usize) {
        self.inner_batch = batch_size.max(1);
    }

    pub fn w(&self) -> &[f64] {
        &self.state.w_curr
    }

    pub fn lambda(&self) -> &DualPoint {
        &self.state.lambda
    }

    pub fn k(&self) -> usize {
        self.state.k
    }

    /// Cumulative passes: (loss + gradient evaluations) / n.
    pub fn passes(&self) -> f64 {
        (self.state.loss_evals + self.state.grad_evals) as f64 / self.model.n() as f64
    }

    pub fn state(&self) -> &SorelState {
        &self.state
    }

    /// Proximal residual `|w_{k} - w_{k-1}| / tau_{k-1}` of the last
    /// completed iteration; a stationarity measure of the weighted
    /// subproblem.
    pub fn prox_residual(&self) -> f64 {
        if self.state.k == 0 {
            return f64::INFINITY;
        }
        let diff: f64 = self
            .state
            .w_curr
            .iter()
            .zip(&self.state.w_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        diff.sqrt() / self.schedule.tau(self.state.k - 1)
    }

    /// One outer iteration; returns the composite objective at the new
    /// iterate. The objective evaluation itself is not charged to the pass
    /// counters (its loss vector is recycled into the next iteration, which
    /// is charged normally).
    pub fn outer_step(&mut self) -> Result<f64> {
        let k = self.state.k;
        let n = self.model.n() as u64;

        if let Some(pending) = self.pending.take() {
            self.l_prev = std::mem::replace(&mut self.l_curr, pending);
            self.state.loss_evals += n;
        }

        let scores = momentum_scores(&self.l_curr, &self.l_prev, self.schedule.theta(k))?;
        self.state.lambda = dual_update(
            &self.state.lambda,
            &scores,
            self.schedule.eta(k),
            self.sigma,
        )?;

        let w_next = match self.inner {
            InnerStrategy::Svrg => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k as u64);
                let result = inner_solve(
                    self.model,
                    &self.state.lambda,
                    self.sigma,
                    &self.state.w_curr,
                    &InnerParams::at(self.schedule, k).with_batch_size(self.inner_batch),
                    &mut rng,
                )?;
                self.state.loss_evals += result.loss_evals;
                self.state.grad_evals += result.grad_evals;
                result.w
            }
            InnerStrategy::Exact => {
                let w = exact_inner_solve(
                    self.model,
                    &self.state.lambda,
                    &self.state.w_curr,
                    self.schedule.tau(k),
                )?;
                self.state.grad_evals += n;
                w
            }
        };
        check_divergence(&w_next)?;

        self.state.w_prev = std::mem::replace(&mut self.state.w_curr, w_next);
        self.state.k += 1;

        let l_next = self.model.full_loss_vector(&self.state.w_curr)?;
        let objective =
            spectral_risk(&l_next, self.sigma)? + self.model.reg_value(&self.state.w_curr);
        self.pending = Some(l_next);
        Ok(objective)
    }
}

/// Runs the optimizer for `outer_iters` iterations (or until the pass budget
/// is spent) and records one trace row per outer iteration. Deterministic
/// for a fixed seed.
pub fn run_sorel(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    schedule: &dyn ScheduleParams,
    opts: &SorelOptions,
) -> Result<RunResult> {
    let mut solver =
        SorelSolver::new(model, sigma, schedule, opts.inner, opts.seed, opts.w0.clone())?;
    solver.set_batch_size(opts.batch_size);
    let mut trace = TrainingTrace::new(opts.seed);
    let start = Instant::now();
    for k in 0..opts.outer_iters {
        if let Some(budget) = opts.pass_budget {
            if solver.passes() >= budget {
                break;
            }
        }
        let objective = solver.outer_step()?;
        trace.push(
            k as u64,
            solver.passes(),
            start.elapsed().as_secs_f64(),
            objective,
        );
    }
    Ok(RunResult {
        w: solver.state.w_curr,
        trace,
    })
}
