//! Spectral weight vectors and spectral risk evaluation.
//!
//! A spectral risk is a weighted sum of the order statistics of the
//! per-sample losses, `R(w) = sum_i sigma_i * l_[i](w)`, where the weights
//! `sigma_1 <= ... <= sigma_n` are nonnegative and sum to one. Three standard
//! families are provided (CVaR, ESRM, extremile) plus custom weights.

use crate::error::{Error, Result};

/// Tolerance at which a generated weight vector is accepted without
/// renormalization.
const SUM_TOL: f64 = 1e-12;

/// Which spectral risk family a weight vector came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumFamily {
    /// Conditional value at risk at level `alpha` in (0, 1).
    Cvar { alpha: f64 },
    /// Exponential spectral risk measure with parameter `rho > 0`.
    Esrm { rho: f64 },
    /// Extremile with parameter `r >= 1` (`r = 1` is the uniform spectrum).
    Extremile { r: f64 },
    /// Caller-supplied weights.
    Custom,
}

/// A sorted spectral weight vector `sigma_1 <= ... <= sigma_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWeights {
    weights: Vec<f64>,
    family: SpectrumFamily,
}

impl SpectralWeights {
    /// CVaR weights: the largest `n * alpha` losses are averaged. When
    /// `n * (1 - alpha)` is fractional the boundary index receives the
    /// remaining mass `1 - floor(n * alpha) / (n * alpha)` so the weights
    /// always sum to one.
    pub fn cvar(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be positive"));
        }
        if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::invalid("alpha", format!("must be in (0, 1), got {alpha}")));
        }
        let nf = n as f64;
        let cut = nf * (1.0 - alpha);
        let cut_round = cut.round();
        // Treat n(1 - alpha) as an integer when it is one up to roundoff.
        let integral = (cut - cut_round).abs() <= 1e-9 * nf.max(1.0);
        let mut weights = vec![0.0; n];
        if integral {
            let boundary = cut_round as usize;
            for w in weights.iter_mut().skip(boundary) {
                *w = 1.0 / (nf * alpha);
            }
        } else {
            let boundary = cut.ceil() as usize; // 1-based index of the partial weight
            let floor_na = (n - boundary) as f64; // = floor(n * alpha)
            weights[boundary - 1] = 1.0 - floor_na / (nf * alpha);
            for w in weights.iter_mut().skip(boundary) {
                *w = 1.0 / (nf * alpha);
            }
        }
        Self::finish(weights, SpectrumFamily::Cvar { alpha })
    }

    /// ESRM weights, computed as `e^{rho(i/n - 1)} * expm1(-rho/n) / expm1(-rho)`
    /// so that large `rho` never evaluates `e^{rho}` and small `rho` avoids
    /// cancellation. Telescopes to a unit sum.
    pub fn esrm(n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be positive"));
        }
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
        }
        if rho > 700.0 * n as f64 {
            return Err(Error::invalid(
                "rho",
                format!("rho = {rho} exceeds the representable range for n = {n}"),
            ));
        }
        let nf = n as f64;
        let ratio = (-rho / nf).exp_m1() / (-rho).exp_m1();
        let weights = (1..=n)
            .map(|i| (rho * (i as f64 / nf - 1.0)).exp() * ratio)
            .collect();
        Self::finish(weights, SpectrumFamily::Esrm { rho })
    }

    /// Extremile weights `(i/n)^r - ((i-1)/n)^r`; `r = 1` returns the exact
    /// uniform spectrum.
    pub fn extremile(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be positive"));
        }
        if r.is_nan() || r < 1.0 {
            return Err(Error::invalid("r", format!("must be >= 1, got {r}")));
        }
        if r == 1.0 {
            return Self::uniform(n);
        }
        let nf = n as f64;
        let weights = (1..=n)
            .map(|i| (i as f64 / nf).powf(r) - ((i - 1) as f64 / nf).powf(r))
            .collect();
        Self::finish(weights, SpectrumFamily::Extremile { r })
    }

    /// The uniform spectrum `sigma_i = 1/n`, under which the spectral risk is
    /// the empirical mean.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be positive"));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
            family: SpectrumFamily::Extremile { r: 1.0 },
        })
    }

    /// Caller-supplied weights; must be nonnegative, nondecreasing, and sum
    /// to one (renormalized with a warning when the sum drifts).
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "must be nonempty"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { context: "spectral weights" });
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("weights", "must be nonnegative"));
        }
        if weights.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid("weights", "must be nondecreasing"));
        }
        Self::finish(weights, SpectrumFamily::Custom)
    }

    fn finish(mut weights: Vec<f64>, family: SpectrumFamily) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid("weights", "must have positive sum"));
        }
        if (sum - 1.0).abs() > SUM_TOL {
            log::warn!(
                "spectral weights summed to {sum:.17}; renormalizing ({family:?})"
            );
            for w in weights.iter_mut() {
                *w /= sum;
            }
        }
        Ok(Self { weights, family })
    }

    /// Regenerate the same family at a different size (used for minibatch
    /// reweighting). Custom spectra only support their original size.
    pub fn resize(&self, m: usize) -> Result<Self> {
        match self.family {
            SpectrumFamily::Cvar { alpha } => Self::cvar(m, alpha),
            SpectrumFamily::Esrm { rho } => Self::esrm(m, rho),
            SpectrumFamily::Extremile { r } => Self::extremile(m, r),
            SpectrumFamily::Custom => {
                if m == self.n() {
                    Ok(self.clone())
                } else {
                    Err(Error::invalid(
                        "batch_size",
                        "custom spectra cannot be regenerated at a different size",
                    ))
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn family(&self) -> SpectrumFamily {
        self.family
    }

    /// True when every weight is equal, i.e. the permutahedron degenerates to
    /// a single point.
    pub fn is_uniform(&self) -> bool {
        self.weights
            .iter()
            .all(|&w| w == self.weights[0])
    }

    /// Short label such as `cvar0.5` for file names and plots.
    pub fn label(&self) -> String {
        match self.family {
            SpectrumFamily::Cvar { alpha } => format!("cvar{alpha}"),
            SpectrumFamily::Esrm { rho } => format!("esrm{rho}"),
            SpectrumFamily::Extremile { r } => format!("extremile{r}"),
            SpectrumFamily::Custom => "custom".to_string(),
        }
    }
}

/// Per-sample losses `l_1(w), ..., l_n(w)` in sample order (unsorted).
/// Construction rejects non-finite entries, which doubles as the divergence
/// guard on every fresh loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    values: Vec<f64>,
}

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "loss vector" });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Stable argsort of the losses in ascending order: returns `pi` with
/// `l[pi[0]] <= l[pi[1]] <= ...`, ties broken by original index.
pub fn sort_permutation(losses: &[f64]) -> Result<Vec<usize>> {
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "sort input" });
    }
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    idx.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).unwrap().then(a.cmp(&b)));
    Ok(idx)
}

/// The spectral risk `sum_i sigma_i * l_[i]`: dot product of the weights with
/// the ascending order statistics of the losses.
pub fn spectral_risk(losses: &LossVector, sigma: &SpectralWeights) -> Result<f64> {
    if losses.len() != sigma.n() {
        return Err(Error::LengthMismatch {
            expected: sigma.n(),
            actual: losses.len(),
        });
    }
    let pi = sort_permutation(losses.values())?;
    Ok(pi
        .iter()
        .zip(sigma.weights())
        .map(|(&j, &w)| w * losses.values()[j])
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_valid_spectrum(sigma: &SpectralWeights) {
        let w = sigma.weights();
        assert!(w.iter().all(|&x| x >= 0.0), "nonnegative: {w:?}");
        assert!(w.windows(2).all(|p| p[0] <= p[1]), "nondecreasing: {w:?}");
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "sum = {sum}");
    }

    #[test]
    fn cvar_integer_boundary() {
        let s = SpectralWeights::cvar(4, 0.5).unwrap();
        assert_eq!(s.weights(), &[0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn cvar_single_sample() {
        let s = SpectralWeights::cvar(1, 0.5).unwrap();
        assert_eq!(s.weights(), &[1.0]);
    }

    #[test]
    fn cvar_fractional_boundary() {
        let s = SpectralWeights::cvar(5, 0.5).unwrap();
        let expect = [0.0, 0.0, 0.2, 0.4, 0.4];
        for (a, b) in s.weights().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", s.weights());
        }
    }

    /// Brute-force CVaR oracle via the tail-average definition: the largest
    /// floor(n*alpha) losses at full weight 1/(n*alpha) plus the fractional
    /// remainder on the next order statistic.
    fn cvar_oracle(losses: &[f64], alpha: f64) -> f64 {
        let n = losses.len();
        let mut sorted = losses.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let na = n as f64 * alpha;
        let full = na.floor() as usize;
        let mut acc = sorted[..full].iter().sum::<f64>() / na;
        if full < n {
            acc += (na - full as f64) / na * sorted[full];
        }
        acc
    }

    #[test]
    fn cvar_matches_tail_average_oracle() {
        let losses = [3.5, -1.0, 0.25, 7.0, 2.0];
        for &alpha in &[0.2, 0.25, 0.5, 0.6, 0.9] {
            let sigma = SpectralWeights::cvar(losses.len(), alpha).unwrap();
            let lv = LossVector::new(losses.to_vec()).unwrap();
            let risk = spectral_risk(&lv, &sigma).unwrap();
            let oracle = cvar_oracle(&losses, alpha);
            assert!(
                (risk - oracle).abs() < 1e-12,
                "alpha={alpha}: {risk} vs {oracle}"
            );
        }
    }

    #[test]
    fn esrm_single_sample_telescopes_to_one() {
        let s = SpectralWeights::esrm(1, 2.0).unwrap();
        assert!((s.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn esrm_two_sample_closed_form() {
        // e^{-2}(e - 1)/(1 - e^{-2}) simplifies to 1/(1 + e).
        let s = SpectralWeights::esrm(2, 2.0).unwrap();
        let e = std::f64::consts::E;
        assert!((s.weights()[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((s.weights()[1] - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn esrm_degenerates_to_uniform_for_tiny_rho() {
        let s = SpectralWeights::esrm(4, 1e-9).unwrap();
        for &w in s.weights() {
            assert!((w - 0.25).abs() < 1e-6, "{w}");
        }
    }

    #[test]
    fn esrm_rejects_out_of_range_rho() {
        assert!(SpectralWeights::esrm(4, 0.0).is_err());
        assert!(SpectralWeights::esrm(4, -1.0).is_err());
        assert!(SpectralWeights::esrm(4, 2801.0).is_err());
        assert!(SpectralWeights::esrm(4, 2799.0).is_ok());
    }

    #[test]
    fn extremile_r1_is_exactly_uniform() {
        let s = SpectralWeights::extremile(3, 1.0).unwrap();
        assert_eq!(s.weights(), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn extremile_r2_hand_values() {
        let s = SpectralWeights::extremile(2, 2.0).unwrap();
        assert_eq!(s.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn extremile_r2p5_matches_sqrt_route() {
        // (i/4)^2.5 computed independently as sqrt((i/4)^5).
        let s = SpectralWeights::extremile(4, 2.5).unwrap();
        for (i, &w) in s.weights().iter().enumerate() {
            let hi = ((i + 1) as f64 / 4.0).powi(5).sqrt();
            let lo = (i as f64 / 4.0).powi(5).sqrt();
            assert!((w - (hi - lo)).abs() < 1e-12);
        }
    }

    #[test]
    fn extremile_rejects_r_below_one() {
        assert!(SpectralWeights::extremile(4, 0.99).is_err());
    }

    #[test]
    fn generators_satisfy_invariants_on_grid() {
        for &n in &[1usize, 2, 3, 5, 10, 100, 1000] {
            for &alpha in &[0.25, 0.5, 0.9] {
                assert_valid_spectrum(&SpectralWeights::cvar(n, alpha).unwrap());
            }
            for &rho in &[1.0, 2.0, 10.0] {
                assert_valid_spectrum(&SpectralWeights::esrm(n, rho).unwrap());
            }
            for &r in &[1.0, 2.0, 2.5, 5.0] {
                assert_valid_spectrum(&SpectralWeights::extremile(n, r).unwrap());
            }
        }
    }

    #[test]
    fn spectral_risk_uniform_is_mean() {
        let lv = LossVector::new(vec![3.0, 1.0, 2.0]).unwrap();
        let s = SpectralWeights::uniform(3).unwrap();
        assert!((spectral_risk(&lv, &s).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_risk_max_spectrum_is_max_loss() {
        let lv = LossVector::new(vec![3.0, 1.0, 2.0]).unwrap();
        let s = SpectralWeights::custom(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(spectral_risk(&lv, &s).unwrap(), 3.0);
    }

    #[test]
    fn spectral_risk_hand_value() {
        let lv = LossVector::new(vec![3.0, 1.0, 2.0]).unwrap();
        let s = SpectralWeights::custom(vec![0.1, 0.3, 0.6]).unwrap();
        assert!((spectral_risk(&lv, &s).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn spectral_risk_rejects_length_mismatch() {
        let lv = LossVector::new(vec![1.0, 2.0]).unwrap();
        let s = SpectralWeights::uniform(3).unwrap();
        assert!(matches!(
            spectral_risk(&lv, &s),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn sort_permutation_examples() {
        assert_eq!(sort_permutation(&[1.0, 2.0, 3.0]).unwrap(), vec![0, 1, 2]);
        assert_eq!(sort_permutation(&[3.0, 1.0, 2.0]).unwrap(), vec![1, 2, 0]);
        // Stable tie-break keeps the earlier index first.
        assert_eq!(sort_permutation(&[5.0, 5.0, 1.0]).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn sort_permutation_rejects_nan() {
        assert!(sort_permutation(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn loss_vector_rejects_non_finite() {
        assert!(LossVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn custom_rejects_bad_weights() {
        assert!(SpectralWeights::custom(vec![0.6, 0.4]).is_err()); // decreasing
        assert!(SpectralWeights::custom(vec![-0.1, 1.1]).is_err()); // negative
        assert!(SpectralWeights::custom(vec![]).is_err());
    }

    #[test]
    fn resize_regenerates_family() {
        let s = SpectralWeights::cvar(10, 0.5).unwrap();
        let t = s.resize(4).unwrap();
        assert_eq!(t.weights(), &[0.0, 0.0, 0.5, 0.5]);
        let c = SpectralWeights::custom(vec![0.0, 1.0]).unwrap();
        assert!(c.resize(3).is_err());
        assert!(c.resize(2).is_ok());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn risk_is_permutation_invariant(
                mut losses in proptest::collection::vec(-50.0f64..50.0, 2..12),
                rot in 0usize..12,
            ) {
                let sigma = SpectralWeights::extremile(losses.len(), 2.5).unwrap();
                let base = spectral_risk(&LossVector::new(losses.clone()).unwrap(), &sigma).unwrap();
                let r = rot % losses.len();
                losses.rotate_left(r);
                let rotated = spectral_risk(&LossVector::new(losses).unwrap(), &sigma).unwrap();
                prop_assert_eq!(base, rotated);
            }

            #[test]
            fn uniform_risk_equals_mean(
                losses in proptest::collection::vec(-50.0f64..50.0, 1..12),
            ) {
                let sigma = SpectralWeights::uniform(losses.len()).unwrap();
                let mean = losses.iter().sum::<f64>() / losses.len() as f64;
                let risk = spectral_risk(&LossVector::new(losses).unwrap(), &sigma).unwrap();
                prop_assert!((risk - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
            }

            #[test]
            fn generated_weights_valid(
                n in 1usize..60,
                alpha in 0.01f64..0.99,
                rho in 0.01f64..60.0,
                r in 1.0f64..8.0,
            ) {
                for s in [
                    SpectralWeights::cvar(n, alpha).unwrap(),
                    SpectralWeights::esrm(n, rho).unwrap(),
                    SpectralWeights::extremile(n, r).unwrap(),
                ] {
                    assert_valid_spectrum(&s);
                }
            }
        }
    }
}
