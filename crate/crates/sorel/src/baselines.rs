//! Comparison optimizers, the high-accuracy reference solver, and the
//! unstabilized-alternation demonstration.
//!
//! SGD, LSVRG, and Prospect are reimplemented at the level of detail their
//! published descriptions give (smoothing coefficient zero throughout); the
//! tests assert their qualitative contracts, not parity with the original
//! implementations.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objective::ObjectiveModel;
use crate::permutahedron::{lmo, DualPoint};
use crate::schedule::TheoreticalSchedule;
use crate::solver::{weighted_erm_minimizer, InnerStrategy, SorelSolver, DIVERGENCE_NORM};
use crate::spectra::{sort_permutation, spectral_risk, SpectralWeights};
use crate::trace::{RunResult, TrainingTrace};

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub step_size: f64,
    /// Minibatch size for SGD.
    pub batch_size: usize,
    /// Checkpoint period for LSVRG; 0 means n.
    pub epoch_len: usize,
    pub seed: u64,
    pub pass_budget: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            batch_size: 64,
            epoch_len: 0,
            seed: 0,
            pass_budget: 50.0,
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        if self.step_size.is_nan() || self.step_size <= 0.0 {
            return Err(Error::invalid("step_size", "must be positive"));
        }
        if self.pass_budget.is_nan() || self.pass_budget <= 0.0 {
            return Err(Error::invalid("pass_budget", "must be positive"));
        }
        Ok(())
    }
}

fn guard(w: &[f64]) -> Result<()> {
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    if !norm2.is_finite() || norm2 > DIVERGENCE_NORM * DIVERGENCE_NORM {
        return Err(Error::Diverged { norm: norm2.sqrt() });
    }
    Ok(())
}

/// A subgradient of the composite objective at `w`: sort the losses, weight
/// the gradients by rank, add the regularizer gradient.
pub fn spectral_subgradient(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    w: &[f64],
) -> Result<Vec<f64>> {
    let losses = model.full_loss_vector(w)?;
    let pi = sort_permutation(losses.values())?;
    let mut out: Vec<f64> = w.iter().map(|wi| model.reg_mu() * wi).collect();
    for (rank, &i) in pi.iter().enumerate() {
        let c = sigma.weights()[rank] * model.grad_scalar_at(i, w);
        if c == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(model.dataset().row(i)) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// Records a trace row whenever the cumulative pass count crosses an integer
/// boundary.
struct PassRecorder {
    trace: TrainingTrace,
    next: f64,
    start: Instant,
    row: u64,
}

impl PassRecorder {
    fn new(seed: u64) -> Self {
        Self {
            trace: TrainingTrace::new(seed),
            next: 1.0,
            start: Instant::now(),
            row: 0,
        }
    }

    fn maybe_record(
        &mut self,
        passes: f64,
        model: &ObjectiveModel,
        sigma: &SpectralWeights,
        w: &[f64],
    ) -> Result<()> {
        if passes + 1e-12 >= self.next {
            let objective = model.primal_objective(sigma, w)?;
            self.trace
                .push(self.row, passes, self.start.elapsed().as_secs_f64(), objective);
            self.row += 1;
            self.next = passes.floor() + 1.0;
        }
        Ok(())
    }

    fn finish(
        mut self,
        passes: f64,
        model: &ObjectiveModel,
        sigma: &SpectralWeights,
        w: Vec<f64>,
    ) -> Result<RunResult> {
        let objective = model.primal_objective(sigma, &w)?;
        self.trace
            .push(self.row, passes, self.start.elapsed().as_secs_f64(), objective);
        Ok(RunResult { w, trace: self.trace })
    }
}

/// Minibatch SGD with the batch-local spectrum: sample a batch without
/// replacement, sort its losses, apply the same spectral family regenerated
/// at the batch size. A biased estimator for any non-uniform spectrum.
pub fn run_sgd(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    config: &BaselineConfig,
) -> Result<RunResult> {
    config.validate()?;
    let n = model.n();
    let m = config.batch_size;
    if m == 0 || m > n {
        return Err(Error::invalid(
            "batch_size",
            format!("must be in 1..={n}, got {m}"),
        ));
    }
    let sigma_batch = sigma.resize(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = vec![0.0; model.d()];
    let mut evals: u64 = 0;
    let mut recorder = PassRecorder::new(config.seed);

    let mut batch: Vec<usize> = (0..n).collect();
    let mut scored: Vec<(f64, usize, f64)> = Vec::with_capacity(m); // (loss, sample, grad scalar)
    loop {
        let passes = evals as f64 / n as f64;
        if passes >= config.pass_budget {
            break;
        }
        if m < n {
            batch = rand::seq::index::sample(&mut rng, n, m).into_vec();
        }
        scored.clear();
        for &i in &batch {
            let (loss, gs) = model.loss_and_grad_scalar(i, &w);
            scored.push((loss, i, gs));
        }
        evals += 2 * m as u64; // one loss and one gradient per batch sample
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let mut dir: Vec<f64> = w.iter().map(|wi| model.reg_mu() * wi).collect();
        for (rank, &(_, i, gs)) in scored.iter().enumerate() {
            let c = sigma_batch.weights()[rank] * gs;
            for (o, x) in dir.iter_mut().zip(model.dataset().row(i)) {
                *o += c * x;
            }
        }
        for (wi, di) in w.iter_mut().zip(&dir) {
            *wi -= config.step_size * di;
        }
        guard(&w)?;
        recorder.maybe_record(evals as f64 / n as f64, model, sigma, &w)?;
    }
    recorder.finish(evals as f64 / n as f64, model, sigma, w)
}

/// LSVRG with smoothing coefficient zero: at every checkpoint the dual
/// vertex is re-picked by sorting the full loss vector, and the epoch runs
/// variance-reduced steps against that frozen vertex. No dual damping and no
/// proximal anchor, so the dual can jump arbitrarily between checkpoints.
pub fn run_lsvrg(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    config: &BaselineConfig,
) -> Result<RunResult> {
    config.validate()?;
    let n = model.n();
    let epoch_len = if config.epoch_len == 0 { n } else { config.epoch_len };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = vec![0.0; model.d()];
    let mut evals: u64 = 0;
    let mut recorder = PassRecorder::new(config.seed);

    let mut ref_scalars = vec![0.0; n];
    loop {
        let passes = evals as f64 / n as f64;
        if passes >= config.pass_budget {
            break;
        }
        // checkpoint at the current iterate
        let losses = model.full_loss_vector(&w)?;
        let lam = lmo(losses.values(), sigma)?;
        for (i, s) in ref_scalars.iter_mut().enumerate() {
            *s = model.grad_scalar_at(i, &w);
        }
        evals += 2 * n as u64;
        let mut gbar = vec![0.0; model.d()];
        for (i, &li) in lam.coords().iter().enumerate() {
            let c = li * ref_scalars[i];
            if c == 0.0 {
                continue;
            }
            for (g, x) in gbar.iter_mut().zip(model.dataset().row(i)) {
                *g += c * x;
            }
        }

        for _ in 0..epoch_len {
            let i = rng.random_range(0..n);
            let s = model.grad_scalar_at(i, &w);
            evals += 1;
            let c = n as f64 * lam.coords()[i] * (s - ref_scalars[i]);
            let x = model.dataset().row(i);
            for j in 0..model.d() {
                let dir = c * x[j] + gbar[j] + model.reg_mu() * w[j];
                w[j] -= config.step_size * dir;
            }
            guard(&w)?;
        }
        recorder.maybe_record(evals as f64 / n as f64, model, sigma, &w)?;
    }
    recorder.finish(evals as f64 / n as f64, model, sigma, w)
}

/// Persistent per-sample state for the Prospect-style method: a loss table
/// kept incrementally sorted, the rank-derived dual weights, a gradient
/// scalar table, and the weighted-gradient aggregate kept consistent with
/// both.
pub(crate) struct ProspectTables {
    pub(crate) table: Vec<f64>,
    gscal: Vec<f64>,
    /// order[r] = sample occupying rank r (ascending loss, ties by index)
    order: Vec<usize>,
    rank_of: Vec<usize>,
    pub(crate) lam: Vec<f64>,
    pub(crate) agg: Vec<f64>,
}

impl ProspectTables {
    fn new(model: &ObjectiveModel, sigma: &SpectralWeights, w: &[f64]) -> Result<Self> {
        let n = model.n();
        let table: Vec<f64> = model.full_loss_vector(w)?.into_values();
        let gscal: Vec<f64> = (0..n).map(|i| model.grad_scalar_at(i, w)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| table[a].partial_cmp(&table[b]).unwrap().then(a.cmp(&b)));
        let mut rank_of = vec![0usize; n];
        let mut lam = vec![0.0; n];
        for (r, &i) in order.iter().enumerate() {
            rank_of[i] = r;
            lam[i] = sigma.weights()[r];
        }
        let mut agg = vec![0.0; model.d()];
        for i in 0..n {
            let c = lam[i] * gscal[i];
            for (a, x) in agg.iter_mut().zip(model.dataset().row(i)) {
                *a += c * x;
            }
        }
        Ok(Self {
            table,
            gscal,
            order,
            rank_of,
            lam,
            agg,
        })
    }

    /// Refresh sample `i` with freshly evaluated loss and gradient scalar:
    /// update the gradient table and aggregate, re-rank the sample, and
    /// shift the dual weights across the displaced span.
    fn refresh(
        &mut self,
        model: &ObjectiveModel,
        sigma: &SpectralWeights,
        i: usize,
        l_new: f64,
        s_new: f64,
    ) {
        let x = model.dataset().row(i);
        let delta = self.lam[i] * (s_new - self.gscal[i]);
        if delta != 0.0 {
            for (a, xj) in self.agg.iter_mut().zip(x) {
                *a += delta * xj;
            }
        }
        self.gscal[i] = s_new;

        self.table[i] = l_new;
        let old = self.rank_of[i];
        self.order.remove(old);
        let table = &self.table;
        let pos = self
            .order
            .partition_point(|&e| table[e] < l_new || (table[e] == l_new && e < i));
        self.order.insert(pos, i);
        let (lo, hi) = (old.min(pos), old.max(pos));
        for r in lo..=hi {
            let occ = self.order[r];
            self.rank_of[occ] = r;
            let new_weight = sigma.weights()[r];
            if new_weight != self.lam[occ] {
                let shift = (new_weight - self.lam[occ]) * self.gscal[occ];
                for (a, xj) in self.agg.iter_mut().zip(model.dataset().row(occ)) {
                    *a += shift * xj;
                }
                self.lam[occ] = new_weight;
            }
        }
    }
}

/// Prospect with smoothing coefficient zero: each step refreshes one loss
/// table entry, re-derives the dual vertex from the (incrementally sorted)
/// table, and takes a variance-reduced step against the stored per-sample
/// gradients with a bias-corrected aggregate.
pub fn run_prospect(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    config: &BaselineConfig,
) -> Result<RunResult> {
    config.validate()?;
    let n = model.n();
    let d = model.d();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = vec![0.0; d];
    let mut recorder = PassRecorder::new(config.seed);

    let mut tables = ProspectTables::new(model, sigma, &w)?;
    let mut evals: u64 = 2 * n as u64;

    loop {
        let passes = evals as f64 / n as f64;
        if passes >= config.pass_budget {
            break;
        }
        let i = rng.random_range(0..n);
        let (l_new, s_new) = model.loss_and_grad_scalar(i, &w);
        evals += 2;

        let x = model.dataset().row(i);
        let c = n as f64 * tables.lam[i] * (s_new - tables.gscal[i]);
        for j in 0..d {
            let dir = c * x[j] + tables.agg[j] + model.reg_mu() * w[j];
            w[j] -= config.step_size * dir;
        }
        guard(&w)?;

        tables.refresh(model, sigma, i, l_new, s_new);
        recorder.maybe_record(evals as f64 / n as f64, model, sigma, &w)?;
    }
    recorder.finish(evals as f64 / n as f64, model, sigma, w)
}

/// Ridge/weighted-ERM solution under the uniform spectrum; the closed-form
/// cross-check used throughout the tests.
pub fn erm_solution(model: &ObjectiveModel) -> Result<Vec<f64>> {
    let n = model.n();
    let uniform = DualPoint::new_unchecked(vec![1.0 / n as f64; n]);
    weighted_erm_minimizer(model, &uniform)
}

/// Strong-convexity modulus of the lambda-weighted objective: the
/// regularizer plus, for least squares, the smallest eigenvalue of the
/// weighted Gram matrix (logistic curvature has no positive lower bound, so
/// only the regularizer counts there).
fn weighted_strong_convexity(model: &ObjectiveModel, lambda: &DualPoint) -> f64 {
    let mut modulus = model.reg_mu();
    if model.loss_kind() == crate::objective::LossKind::LeastSquares {
        let d = model.d();
        let mut h = nalgebra::DMatrix::<f64>::zeros(d, d);
        for (i, &li) in lambda.coords().iter().enumerate() {
            if li == 0.0 {
                continue;
            }
            let x = model.dataset().row(i);
            for a in 0..d {
                for c in 0..=a {
                    h[(a, c)] += li * x[a] * x[c];
                }
            }
        }
        for a in 0..d {
            for c in 0..a {
                let v = h[(a, c)];
                h[(c, a)] = v;
            }
        }
        let eigs = nalgebra::SymmetricEigen::new(h).eigenvalues;
        modulus += eigs.iter().fold(f64::INFINITY, |m, &v| m.min(v)).max(0.0);
    }
    modulus
}

/// Certified bound on the objective gap at `w` given the dual point used to
/// produce it and the stationarity residual of the weighted subproblem:
///
///   f(w) - f(w*)  <=  [max-weighting gap at w]  +  residual^2 / (2 mu_h),
///
/// where mu_h is the strong convexity of the lambda-weighted objective.
fn certificate(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    w: &[f64],
    lambda: &DualPoint,
    residual: f64,
) -> Result<f64> {
    let losses = model.full_loss_vector(w)?;
    let risk = spectral_risk(&losses, sigma)?;
    let weighted: f64 = lambda
        .coords()
        .iter()
        .zip(losses.values())
        .map(|(l, v)| l * v)
        .sum();
    let gap = (risk - weighted).max(0.0);
    if residual == 0.0 {
        return Ok(gap);
    }
    Ok(gap + residual * residual / (2.0 * weighted_strong_convexity(model, lambda)))
}

/// High-accuracy reference minimizer of the composite objective, with a
/// certified objective-gap bound at the returned point.
///
/// Three deterministic stages: (1) decreasing-step subgradient descent as a
/// warm start, (2) the outer loop with exact inner solves and a certificate
/// stop, (3) a sorted-vertex polish (pick the maximizing vertex, solve that
/// smooth problem exactly) accepted only when it improves the certificate.
pub fn reference_solution(
    model: &ObjectiveModel,
    sigma: &SpectralWeights,
    tol: f64,
) -> Result<Vec<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if model.reg_mu() <= 0.0 {
        return Err(Error::invalid(
            "mu",
            "the reference solver needs a strongly convex regularizer",
        ));
    }

    // Stage 1: subgradient warm start with classical decreasing steps.
    let mu = model.reg_mu();
    let cap_step = 1.0 / (model.smoothness() + mu);
    let mut w = vec![0.0; model.d()];
    for t in 0..200 {
        let g = spectral_subgradient(model, sigma, &w)?;
        let step = cap_step.min(1.0 / (mu * (t as f64 + 1.0)));
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
        guard(&w)?;
    }

    let mut best_w = w.clone();
    let mut best_cert = f64::INFINITY;

    // Sorted-vertex polish: exact on the smooth problem of the current
    // maximizing vertex; certificate is pure weighting gap there.
    let polish = |w_in: &[f64], best_w: &mut Vec<f64>, best_cert: &mut f64| -> Result<()> {
        let mut wp = w_in.to_vec();
        for _ in 0..8 {
            let losses = model.full_loss_vector(&wp)?;
            let vertex = lmo(losses.values(), sigma)?;
            let cand = weighted_erm_minimizer(model, &vertex)?;
            let cert = certificate(model, sigma, &cand, &vertex, 0.0)?;
            if cert < *best_cert {
                *best_cert = cert;
                *best_w = cand.clone();
            } else {
                break;
            }
            wp = cand;
        }
        Ok(())
    };
    polish(&w, &mut best_w, &mut best_cert)?;
    if best_cert <= tol {
        return Ok(best_w);
    }

    // Stage 2: damped primal-dual with exact inner solves. The dual step
    // sizes come from the measured per-sample gradient norms at the warm
    // start (with headroom), not the worst-case box constant, so the dual
    // actually moves at the scale the iterates live on.
    let g_local = (0..model.n())
        .map(|i| {
            let row_norm: f64 = model.dataset().row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            model.grad_scalar_at(i, &w).abs() * row_norm
        })
        .fold(0.0_f64, f64::max);
    let g_stage2 = (3.0 * g_local).max(1e-8);
    let schedule = TheoreticalSchedule::new(mu, g_stage2, model.smoothness())?;
    let mut solver = SorelSolver::new(
        model,
        sigma,
        &schedule,
        InnerStrategy::Exact,
        0,
        Some(w.clone()),
    )?;
    let max_outer = 40_000;
    for k in 0..max_outer {
        solver.outer_step()?;
        let cert = certificate(
            model,
            sigma,
            solver.w(),
            solver.lambda(),
            solver.prox_residual(),
        )?;
        if cert < best_cert {
            best_cert = cert;
            best_w = solver.w().to_vec();
        }
        if best_cert <= tol {
            return Ok(best_w);
        }
        if k % 25 == 24 {
            polish(solver.w(), &mut best_w, &mut best_cert)?;
            if best_cert <= tol {
                return Ok(best_w);
            }
        }
    }
    Err(Error::ToleranceNotReached {
        target: tol,
        achieved: best_cert,
        iterations: max_outer,
    })
}

/// The unstabilized alternation on the two-quadratics toy: pick the vertex
/// weighting by comparing the two losses, then run `inner_steps` of gradient
/// descent on the selected quadratic. Returns `[w0, w1, ..]` with
/// `outer_iters` additional entries; for any step size in (0, 2) the
/// sequence ends up alternating between -1 and 1 instead of converging.
pub fn oscillation_demo(
    alpha: f64,
    w0: f64,
    inner_steps: usize,
    outer_iters: usize,
) -> Result<Vec<f64>> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 2.0 {
        return Err(Error::invalid("alpha", format!("must be in (0, 2), got {alpha}")));
    }
    if inner_steps == 0 {
        return Err(Error::invalid("inner_steps", "must be positive"));
    }
    let mut iterates = Vec::with_capacity(outer_iters + 1);
    iterates.push(w0);
    let mut w = w0;
    for _ in 0..outer_iters {
        let l1 = 0.5 * (w - 1.0) * (w - 1.0);
        let l2 = 0.5 * (w + 1.0) * (w + 1.0);
        // All weight on the larger loss; on ties the first loss wins.
        let target = if l1 >= l2 { 1.0 } else { -1.0 };
        for _ in 0..inner_steps {
            w -= alpha * (w - target);
        }
        iterates.push(w);
    }
    Ok(iterates)
}
