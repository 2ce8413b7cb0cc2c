//! Datasets, per-sample losses and gradients, the ridge regularizer, and the
//! anchored proximal step used by the inner solver.

use crate::error::{Error, Result};
use crate::permutahedron::DualPoint;
use crate::spectra::{spectral_risk, LossVector, SpectralWeights};

/// Default radius of the box on which least-squares Lipschitz constants are
/// quoted; least squares is only Lipschitz on bounded sets.
pub const DEFAULT_W_RADIUS: f64 = 100.0;

/// A tabular dataset: an `n x d` feature matrix (row-major) and `n` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, targets: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("dataset", "n and d must be positive"));
        }
        if features.len() != n * d {
            return Err(Error::LengthMismatch {
                expected: n * d,
                actual: features.len(),
            });
        }
        if targets.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: targets.len(),
            });
        }
        if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "dataset" });
        }
        Ok(Self { features, targets, n, d })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("dataset", "ragged feature rows"));
        }
        Self::new(rows.into_iter().flatten().collect(), targets, n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

/// Per-sample loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `l_i(w) = 0.5 (y_i - <w, x_i>)^2`
    LeastSquares,
    /// `l_i(w) = log(1 + exp(-y_i <w, x_i>))` with `y_i` in {-1, +1}
    Logistic,
}

/// The composite objective: dataset, loss family, and the strongly convex
/// regularizer `g(w) = (mu/2) |w|^2`, together with smoothness/Lipschitz
/// estimates used by the theoretical schedule.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    dataset: Dataset,
    loss_kind: LossKind,
    reg_mu: f64,
    smoothness: f64,
    lipschitz: f64,
    w_radius: f64,
}

impl ObjectiveModel {
    pub fn new(dataset: Dataset, loss_kind: LossKind, reg_mu: f64) -> Result<Self> {
        Self::with_w_radius(dataset, loss_kind, reg_mu, DEFAULT_W_RADIUS)
    }

    /// `w_radius` bounds the region on which the least-squares Lipschitz
    /// constant G is quoted; it does not constrain the iterates.
    pub fn with_w_radius(
        dataset: Dataset,
        loss_kind: LossKind,
        reg_mu: f64,
        w_radius: f64,
    ) -> Result<Self> {
        if reg_mu.is_nan() || reg_mu < 0.0 || reg_mu.is_infinite() {
            return Err(Error::invalid("mu", format!("must be nonnegative, got {reg_mu}")));
        }
        if w_radius.is_nan() || w_radius <= 0.0 {
            return Err(Error::invalid("w_radius", "must be positive"));
        }
        if loss_kind == LossKind::Logistic {
            for i in 0..dataset.n() {
                let y = dataset.target(i);
                if y != 1.0 && y != -1.0 {
                    return Err(Error::invalid(
                        "targets",
                        format!("logistic loss needs labels in {{-1, +1}}, got {y} at sample {i}"),
                    ));
                }
            }
        }
        let mut max_norm2: f64 = 0.0;
        let mut lipschitz: f64 = 0.0;
        for i in 0..dataset.n() {
            let norm2: f64 = dataset.row(i).iter().map(|x| x * x).sum();
            max_norm2 = max_norm2.max(norm2);
            let norm = norm2.sqrt();
            let g_i = match loss_kind {
                LossKind::LeastSquares => norm * (dataset.target(i).abs() + norm * w_radius),
                LossKind::Logistic => norm,
            };
            lipschitz = lipschitz.max(g_i);
        }
        let smoothness = match loss_kind {
            LossKind::LeastSquares => max_norm2,
            LossKind::Logistic => max_norm2 / 4.0,
        };
        Ok(Self {
            dataset,
            loss_kind,
            reg_mu,
            smoothness: smoothness.max(f64::MIN_POSITIVE),
            lipschitz: lipschitz.max(f64::MIN_POSITIVE),
            w_radius,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn d(&self) -> usize {
        self.dataset.d()
    }

    pub fn reg_mu(&self) -> f64 {
        self.reg_mu
    }

    /// Estimate of the per-sample smoothness constant L.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// Estimate of the per-sample Lipschitz constant G (on the declared box
    /// for least squares).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn w_radius(&self) -> f64 {
        self.w_radius
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        self.dataset.row(i).iter().zip(w).map(|(x, wj)| x * wj).sum()
    }

    /// Loss of sample `i` at `w`.
    pub fn loss_at(&self, i: usize, w: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        self.check_w(w)?;
        Ok(self.loss_from_margin(i, self.margin(i, w)))
    }

    fn loss_from_margin(&self, i: usize, m: f64) -> f64 {
        match self.loss_kind {
            LossKind::LeastSquares => {
                let r = self.dataset.target(i) - m;
                0.5 * r * r
            }
            LossKind::Logistic => {
                // log(1 + exp(t)) with t = -y m, stable for large |t|
                let t = -self.dataset.target(i) * m;
                t.max(0.0) + (-t.abs()).exp().ln_1p()
            }
        }
    }

    /// Scalar `c` with `grad l_i(w) = c * x_i`; the shared factor both the
    /// variance-reduced inner loop and the gradient-table baselines cache.
    pub fn grad_scalar_at(&self, i: usize, w: &[f64]) -> f64 {
        self.grad_scalar_from_margin(i, self.margin(i, w))
    }

    fn grad_scalar_from_margin(&self, i: usize, m: f64) -> f64 {
        match self.loss_kind {
            LossKind::LeastSquares => m - self.dataset.target(i),
            LossKind::Logistic => {
                let y = self.dataset.target(i);
                // -y * sigmoid(-y m)
                let t = -y * m;
                -y / (1.0 + (-t).exp())
            }
        }
    }

    /// Loss and gradient scalar of sample `i` at `w` from a single feature
    /// pass.
    pub fn loss_and_grad_scalar(&self, i: usize, w: &[f64]) -> (f64, f64) {
        let m = self.margin(i, w);
        (self.loss_from_margin(i, m), self.grad_scalar_from_margin(i, m))
    }

    /// Analytic gradient of `loss_at`.
    pub fn grad_at(&self, i: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        self.check_w(w)?;
        let c = self.grad_scalar_at(i, w);
        Ok(self.dataset.row(i).iter().map(|x| c * x).collect())
    }

    fn check_w(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.d() {
            return Err(Error::LengthMismatch {
                expected: self.d(),
                actual: w.len(),
            });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "parameter vector" });
        }
        Ok(())
    }

    /// The full per-sample loss vector at `w` (one pass over the data).
    pub fn full_loss_vector(&self, w: &[f64]) -> Result<LossVector> {
        self.check_w(w)?;
        let values = (0..self.n())
            .map(|i| self.loss_from_margin(i, self.margin(i, w)))
            .collect();
        LossVector::new(values)
    }

    /// `sum_i lambda_i grad l_i(w)` (n gradient evaluations).
    pub fn weighted_full_grad(&self, lambda: &DualPoint, w: &[f64]) -> Result<Vec<f64>> {
        if lambda.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: lambda.len(),
            });
        }
        self.check_w(w)?;
        let mut out = vec![0.0; self.d()];
        for (i, &li) in lambda.coords().iter().enumerate() {
            if li == 0.0 {
                continue;
            }
            let c = li * self.grad_scalar_at(i, w);
            for (o, x) in out.iter_mut().zip(self.dataset.row(i)) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// Value of the regularizer `g(w) = (mu/2)|w|^2`.
    pub fn reg_value(&self, w: &[f64]) -> f64 {
        0.5 * self.reg_mu * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Anchored proximal step: the minimizer of
    /// `g(u) + |u - anchor|^2 / (2 tau) + |u - x|^2 / (2 alpha)`,
    /// which for the ridge regularizer is
    /// `(x + (alpha/tau) anchor) / (1 + alpha mu + alpha/tau)`.
    pub fn prox_step(&self, x: &[f64], anchor: &[f64], alpha: f64, tau: f64) -> Result<Vec<f64>> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::invalid("tau", "must be positive"));
        }
        if x.len() != anchor.len() {
            return Err(Error::LengthMismatch {
                expected: anchor.len(),
                actual: x.len(),
            });
        }
        let denom = 1.0 + alpha * self.reg_mu + alpha / tau;
        Ok(x.iter()
            .zip(anchor)
            .map(|(xi, ai)| (xi + alpha / tau * ai) / denom)
            .collect())
    }

    /// Plain gradient variant of the inner step for differentiable g:
    /// `w - alpha (d + (w - anchor)/tau + grad g(w))`.
    pub fn gradient_inner_step(
        &self,
        w: &[f64],
        direction: &[f64],
        anchor: &[f64],
        alpha: f64,
        tau: f64,
    ) -> Vec<f64> {
        w.iter()
            .zip(direction)
            .zip(anchor)
            .map(|((wi, di), ai)| wi - alpha * (di + (wi - ai) / tau + self.reg_mu * wi))
            .collect()
    }

    /// The composite objective: spectral risk of the losses at `w` plus the
    /// regularizer.
    pub fn primal_objective(&self, sigma: &SpectralWeights, w: &[f64]) -> Result<f64> {
        let losses = self.full_loss_vector(w)?;
        Ok(spectral_risk(&losses, sigma)? + self.reg_value(w))
    }
}

/// The two-sample one-dimensional toy problem with losses `0.5 (w - 1)^2`
/// and `0.5 (w + 1)^2`; the standard stress test for dual oscillation.
pub fn toy_two_quadratics(reg_mu: f64) -> ObjectiveModel {
    let dataset = Dataset::new(vec![1.0, 1.0], vec![1.0, -1.0], 2, 1).unwrap();
    ObjectiveModel::with_w_radius(dataset, LossKind::LeastSquares, reg_mu, 2.0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn model_ls(rows: Vec<Vec<f64>>, targets: Vec<f64>, mu: f64) -> ObjectiveModel {
        let ds = Dataset::from_rows(rows, targets).unwrap();
        ObjectiveModel::new(ds, LossKind::LeastSquares, mu).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, kind: LossKind) -> ObjectiveModel {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = match kind {
            LossKind::LeastSquares => (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            LossKind::Logistic => (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        };
        let ds = Dataset::from_rows(rows, targets).unwrap();
        ObjectiveModel::new(ds, kind, 0.1).unwrap()
    }

    #[test]
    fn loss_exact_fit_is_zero() {
        let m = model_ls(vec![vec![1.0, 0.0]], vec![0.0], 0.0);
        assert_eq!(m.loss_at(0, &[0.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn loss_hand_value() {
        let m = model_ls(vec![vec![1.0, 1.0]], vec![3.0], 0.0);
        assert_eq!(m.loss_at(0, &[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn logistic_zero_margin_is_ln2() {
        let ds = Dataset::from_rows(vec![vec![1.0]], vec![1.0]).unwrap();
        let m = ObjectiveModel::new(ds, LossKind::Logistic, 0.0).unwrap();
        assert!((m.loss_at(0, &[0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_rejects_bad_labels() {
        let ds = Dataset::from_rows(vec![vec![1.0]], vec![0.5]).unwrap();
        assert!(ObjectiveModel::new(ds, LossKind::Logistic, 0.0).is_err());
    }

    #[test]
    fn grad_zero_at_exact_fit() {
        let m = model_ls(vec![vec![1.0, 0.0]], vec![0.0], 0.0);
        assert_eq!(m.grad_at(0, &[0.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn grad_hand_value() {
        let m = model_ls(vec![vec![1.0, 1.0]], vec![3.0], 0.0);
        assert_eq!(m.grad_at(0, &[1.0, 0.0]).unwrap(), vec![-2.0, -2.0]);
    }

    #[test]
    fn index_out_of_range_reported() {
        let m = model_ls(vec![vec![1.0]], vec![1.0], 0.0);
        assert!(matches!(
            m.loss_at(5, &[0.0]),
            Err(Error::IndexOutOfRange { index: 5, n: 1 })
        ));
    }

    fn central_difference(f: impl Fn(&[f64]) -> f64, w: &[f64], j: usize, h: f64) -> f64 {
        let mut wp = w.to_vec();
        let mut wm = w.to_vec();
        wp[j] += h;
        wm[j] -= h;
        (f(&wp) - f(&wm)) / (2.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for kind in [LossKind::LeastSquares, LossKind::Logistic] {
            let m = random_model(&mut rng, 6, 4, kind);
            for _ in 0..40 {
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
                let i = rng.random_range(0..6);
                let g = m.grad_at(i, &w).unwrap();
                let wn = 1.0 + w.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = 1e-6 * wn;
                for (j, gj) in g.iter().enumerate() {
                    let fd = central_difference(|u| m.loss_at(i, u).unwrap(), &w, j, h);
                    let scale = gj.abs().max(fd.abs()).max(1e-3);
                    assert!(
                        (gj - fd).abs() / scale <= 1e-5,
                        "{kind:?} i={i} j={j}: {gj} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn full_loss_vector_toy_and_entrywise() {
        let toy = toy_two_quadratics(0.0);
        let lv = toy.full_loss_vector(&[0.0]).unwrap();
        assert_eq!(lv.values(), &[0.5, 0.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(&mut rng, 5, 3, LossKind::LeastSquares);
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lv = m.full_loss_vector(&w).unwrap();
        for i in 0..5 {
            assert_eq!(lv.values()[i], m.loss_at(i, &w).unwrap());
        }
    }

    #[test]
    fn full_loss_vector_zero_on_interpolant() {
        // Consistent system: target = <w*, x> exactly.
        let w_star = [0.5, -1.0];
        let rows = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| r[0] * w_star[0] + r[1] * w_star[1])
            .collect();
        let m = model_ls(rows, targets, 0.0);
        let lv = m.full_loss_vector(&w_star).unwrap();
        assert!(lv.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weighted_grad_uniform_is_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(&mut rng, 4, 3, LossKind::LeastSquares);
        let w: Vec<f64> = vec![0.3, -0.2, 0.9];
        let lam = DualPoint::new_unchecked(vec![0.25; 4]);
        let got = m.weighted_full_grad(&lam, &w).unwrap();
        let mut mean = [0.0; 3];
        for i in 0..4 {
            for (mj, gj) in mean.iter_mut().zip(m.grad_at(i, &w).unwrap()) {
                *mj += gj / 4.0;
            }
        }
        for (a, b) in got.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn weighted_grad_basis_vector_selects_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, 4, 3, LossKind::LeastSquares);
        let w = [0.1, 0.2, -0.4];
        let mut e2 = vec![0.0; 4];
        e2[2] = 1.0;
        let lam = DualPoint::new_unchecked(e2);
        assert_eq!(
            m.weighted_full_grad(&lam, &w).unwrap(),
            m.grad_at(2, &w).unwrap()
        );
    }

    #[test]
    fn weighted_grad_matches_finite_difference_of_weighted_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(&mut rng, 5, 3, LossKind::Logistic);
        // a point in the permutahedron of the extremile spectrum
        let sigma = SpectralWeights::extremile(5, 2.0).unwrap();
        let lam = crate::permutahedron::project(&[0.3, 0.1, 0.2, 0.25, 0.15], &sigma).unwrap();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = m.weighted_full_grad(&lam, &w).unwrap();
        let f = |u: &[f64]| {
            lam.coords()
                .iter()
                .enumerate()
                .map(|(i, &li)| li * m.loss_at(i, u).unwrap())
                .sum::<f64>()
        };
        for (j, gj) in g.iter().enumerate() {
            let fd = central_difference(f, &w, j, 1e-6);
            assert!((gj - fd).abs() <= 1e-5 * gj.abs().max(fd.abs()).max(1e-2));
        }
    }

    #[test]
    fn prox_fixed_point_without_regularizer() {
        let m = model_ls(vec![vec![1.0]], vec![0.0], 0.0);
        let wk = [2.0];
        let out = m.prox_step(&wk, &wk, 1.0, 3.0).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn prox_vanishing_step_returns_input() {
        let m = model_ls(vec![vec![1.0]], vec![0.0], 0.7);
        let out = m.prox_step(&[4.0], &[1.0], 1e-12, 2.0).unwrap();
        assert!((out[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn prox_hand_value_and_first_order_optimality() {
        let m = model_ls(vec![vec![1.0]], vec![0.0], 0.5);
        let (alpha, tau) = (1.0, 2.0);
        let out = m.prox_step(&[4.0], &[1.0], alpha, tau).unwrap();
        assert!((out[0] - 2.25).abs() < 1e-12);

        // finite-difference check of the prox objective at the minimizer
        let obj = |u: f64| {
            0.5 * 0.5 * u * u + (u - 1.0f64).powi(2) / (2.0 * tau) + (u - 4.0f64).powi(2) / (2.0 * alpha)
        };
        let h = 1e-6;
        let fd = (obj(out[0] + h) - obj(out[0] - h)) / (2.0 * h);
        assert!(fd.abs() < 1e-8);
    }

    #[test]
    fn prox_rejects_bad_parameters() {
        let m = model_ls(vec![vec![1.0]], vec![0.0], 0.5);
        assert!(m.prox_step(&[1.0], &[1.0], 0.0, 1.0).is_err());
        assert!(m.prox_step(&[1.0], &[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn primal_objective_uniform_mu0_is_mean_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(&mut rng, 5, 2, LossKind::LeastSquares);
        let m0 = ObjectiveModel::new(m.dataset().clone(), LossKind::LeastSquares, 0.0).unwrap();
        let sigma = SpectralWeights::uniform(5).unwrap();
        let w = [0.2, -0.7];
        let lv = m0.full_loss_vector(&w).unwrap();
        let mean = lv.values().iter().sum::<f64>() / 5.0;
        assert!((m0.primal_objective(&sigma, &w).unwrap() - mean).abs() < 1e-14);
    }

    #[test]
    fn primal_objective_toy_value() {
        let toy = toy_two_quadratics(0.0);
        let sigma = SpectralWeights::custom(vec![0.0, 1.0]).unwrap();
        assert!((toy.primal_objective(&sigma, &[0.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn primal_objective_equals_vertex_maximum() {
        use itertools::Itertools;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_model(&mut rng, 4, 2, LossKind::LeastSquares);
        let sigma = SpectralWeights::extremile(4, 2.5).unwrap();
        for _ in 0..10 {
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let losses = m.full_loss_vector(&w).unwrap();
            let best = sigma
                .weights()
                .iter()
                .copied()
                .permutations(4)
                .map(|perm| {
                    perm.iter()
                        .zip(losses.values())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let obj = m.primal_objective(&sigma, &w).unwrap();
            assert!((obj - (best + m.reg_value(&w))).abs() < 1e-12);
        }
    }

    #[test]
    fn primal_objective_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_model(&mut rng, 6, 3, LossKind::LeastSquares);
        let sigma = SpectralWeights::cvar(6, 0.5).unwrap();
        for _ in 0..50 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = m.primal_objective(&sigma, &a).unwrap();
            let fb = m.primal_objective(&sigma, &b).unwrap();
            let fm = m.primal_objective(&sigma, &mid).unwrap();
            assert!(fm <= 0.5 * fa + 0.5 * fb + 1e-10);
        }
    }

    #[test]
    fn uniform_spectrum_reduces_to_ridge_erm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_model(&mut rng, 5, 2, LossKind::LeastSquares);
        let sigma = SpectralWeights::uniform(5).unwrap();
        let w = [0.4, 0.1];
        let lv = m.full_loss_vector(&w).unwrap();
        let ridge = lv.values().iter().sum::<f64>() / 5.0 + m.reg_value(&w);
        let got = m.primal_objective(&sigma, &w).unwrap();
        // summation order differs between the two routes
        assert!((got - ridge).abs() <= 1e-14 * (1.0 + ridge.abs()));
    }
}
