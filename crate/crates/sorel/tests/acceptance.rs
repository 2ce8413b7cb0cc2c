//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (run with `--nocapture` to see them).

use std::time::Instant;

use itertools::Itertools;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sorel::baselines::{
    erm_solution, oscillation_demo, reference_solution, run_lsvrg, run_prospect, run_sgd,
    BaselineConfig,
};
use sorel::harness::experiment::ExperimentConfig;
use sorel::harness::{generate_synthetic, run_experiment, standardize, SyntheticSpec};
use sorel::objective::{toy_two_quadratics, LossKind, ObjectiveModel};
use sorel::schedule::{validate_coupling_conditions, PracticalSchedule, ScheduleParams, TheoreticalSchedule};
use sorel::solver::{dual_update, run_sorel, InnerStrategy, SorelOptions};
use sorel::spectra::{LossVector, SpectralWeights};
use sorel::{contains, lmo, project, DualPoint};

// ---------------------------------------------------------------------------
// shared helpers and oracles (test-only; independent of the library paths
// they are used to check)

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

fn vertices(sigma: &SpectralWeights) -> Vec<Vec<f64>> {
    sigma
        .weights()
        .iter()
        .copied()
        .permutations(sigma.n())
        .unique_by(|p| p.iter().map(|x| x.to_bits()).collect::<Vec<_>>())
        .collect()
}

/// Away-step Frank-Wolfe minimization of a smooth convex quadratic
/// `f(x) = 0.5 |x|^2/scale - <c, x>`-style objective over the enumerated
/// vertex hull, with exact line search, run to duality gap `gap_tol`.
/// Supplied as closures so the same oracle serves projection (criterion 2)
/// and the dual-update objective (criterion 3).
fn away_step_fw(
    verts: &[Vec<f64>],
    grad: impl Fn(&[f64]) -> Vec<f64>,
    curvature: f64,
    gap_tol: f64,
) -> Vec<f64> {
    let mut x = verts[0].clone();
    let mut coeff: Vec<f64> = vec![0.0; verts.len()];
    coeff[0] = 1.0;
    for _ in 0..500_000 {
        let g = grad(&x);
        let fw = (0..verts.len())
            .min_by(|&a, &b| dot(&g, &verts[a]).partial_cmp(&dot(&g, &verts[b])).unwrap())
            .unwrap();
        let aw = (0..verts.len())
            .filter(|&j| coeff[j] > 0.0)
            .max_by(|&a, &b| dot(&g, &verts[a]).partial_cmp(&dot(&g, &verts[b])).unwrap())
            .unwrap();
        let gap = dot(&g, &x) - dot(&g, &verts[fw]);
        if gap <= gap_tol {
            break;
        }
        let to_fw = gap >= dot(&g, &verts[aw]) - dot(&g, &x);
        let (dir, cap): (Vec<f64>, f64) = if to_fw {
            (sub(&verts[fw], &x), 1.0)
        } else {
            let a = coeff[aw];
            (sub(&x, &verts[aw]), a / (1.0 - a).max(1e-300_f64))
        };
        let denom = curvature * norm2(&dir);
        if denom == 0.0 {
            break;
        }
        let t = (-dot(&g, &dir) / denom).clamp(0.0, cap);
        if t == 0.0 {
            break;
        }
        for (xi, di) in x.iter_mut().zip(&dir) {
            *xi += t * di;
        }
        if to_fw {
            coeff.iter_mut().for_each(|c| *c *= 1.0 - t);
            coeff[fw] += t;
        } else {
            coeff.iter_mut().for_each(|c| *c *= 1.0 + t);
            coeff[aw] -= t;
        }
    }
    x
}

fn random_sigma(rng: &mut ChaCha8Rng, n: usize) -> SpectralWeights {
    let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sum: f64 = raw.iter().sum();
    SpectralWeights::custom(raw.into_iter().map(|v| v / sum).collect()).unwrap()
}

fn synthetic_model(n: usize, d: usize, seed: u64, mu: f64, w_radius: f64) -> ObjectiveModel {
    let raw = generate_synthetic(&SyntheticSpec {
        n,
        d,
        noise: 0.5,
        seed,
    })
    .unwrap();
    let (dataset, _) = standardize(&raw).unwrap();
    ObjectiveModel::with_w_radius(dataset, LossKind::LeastSquares, mu, w_radius).unwrap()
}

// ---------------------------------------------------------------------------

/// Criterion 1: weight-generator families over the full parameter grid.
#[test]
fn criterion_01_weight_generators() {
    let start = Instant::now();
    let ns = [1usize, 2, 3, 5, 10, 100, 1000];
    for &n in &ns {
        let mut spectra = Vec::new();
        for &alpha in &[0.25, 0.5, 0.9] {
            spectra.push(SpectralWeights::cvar(n, alpha).unwrap());
        }
        for &rho in &[1.0, 2.0, 10.0] {
            spectra.push(SpectralWeights::esrm(n, rho).unwrap());
        }
        for &r in &[1.0, 2.0, 2.5, 5.0] {
            spectra.push(SpectralWeights::extremile(n, r).unwrap());
        }
        for s in &spectra {
            let w = s.weights();
            assert!(w.iter().all(|&x| x >= 0.0), "nonnegative failed at n={n}");
            assert!(
                w.windows(2).all(|p| p[0] <= p[1]),
                "monotone failed at n={n}"
            );
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "sum {sum} at n={n}");
        }
        // near-uniform limit of the exponential family
        let flat = SpectralWeights::esrm(n, 1e-9).unwrap();
        for &w in flat.weights() {
            assert!((w - 1.0 / n as f64).abs() < 1e-6);
        }
        // the extremile family at r = 1 is exactly uniform
        let uni = SpectralWeights::extremile(n, 1.0).unwrap();
        assert!(uni.weights().iter().all(|&w| w == 1.0 / n as f64));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "runtime {elapsed:.3}s exceeds 1s");
    println!("criterion 01 PASS - weight generators valid on the full grid ({elapsed:.3}s)");
}

/// Criterion 2: permutahedron projection against the away-step FW oracle,
/// the variational inequality, idempotence, and non-expansiveness.
#[test]
fn criterion_02_projection() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_oracle = 0.0_f64;
    let mut worst_vi = f64::NEG_INFINITY;
    for n in 2..=5usize {
        let verts_cache: Vec<(SpectralWeights, Vec<Vec<f64>>)> = (0..4)
            .map(|_| {
                let s = random_sigma(&mut rng, n);
                let v = vertices(&s);
                (s, v)
            })
            .collect();
        for trial in 0..200 {
            let (sigma, verts) = &verts_cache[trial % verts_cache.len()];
            let mut point: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            if trial % 7 == 0 {
                point[1] = point[0]; // exercise ties
            }
            let got = project(&point, sigma).unwrap();
            let oracle = away_step_fw(
                verts,
                |x| sub(x, &point),
                1.0,
                1e-12,
            );
            for (gi, oi) in got.coords().iter().zip(&oracle) {
                worst_oracle = worst_oracle.max((gi - oi).abs());
            }
            let resid = sub(&point, got.coords());
            for v in verts {
                worst_vi = worst_vi.max(dot(&resid, &sub(v, got.coords())));
            }
        }
    }
    assert!(worst_oracle < 1e-8, "projection-oracle deviation {worst_oracle:e}");
    assert!(worst_vi <= 1e-8, "variational inequality violation {worst_vi:e}");

    let sigma = SpectralWeights::extremile(5, 2.5).unwrap();
    let mut worst_idem = 0.0_f64;
    let mut worst_expand = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let u: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pu = project(&u, &sigma).unwrap();
        let pv = project(&v, &sigma).unwrap();
        let ppu = project(pu.coords(), &sigma).unwrap();
        for i in 0..5 {
            worst_idem = worst_idem.max((pu.coords()[i] - ppu.coords()[i]).abs());
        }
        worst_expand = worst_expand
            .max(norm2(&sub(pu.coords(), pv.coords())).sqrt() - norm2(&sub(&u, &v)).sqrt());
    }
    assert!(worst_idem <= 1e-10, "idempotence deviation {worst_idem:e}");
    assert!(worst_expand <= 1e-10, "expansiveness excess {worst_expand:e}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.2}s exceeds 30s");
    println!(
        "criterion 02 PASS - projection matches oracle (max dev {worst_oracle:.2e}), VI <= {worst_vi:.2e} ({elapsed:.2}s)"
    );
}

/// Criterion 3: the damped dual step equals the direct minimization of its
/// defining objective.
#[test]
fn criterion_03_dual_update_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for trial in 0..100 {
        let n = 2 + trial % 4; // 2..=5
        let sigma = random_sigma(&mut rng, n);
        let verts = vertices(&sigma);
        let interior: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let lambda = project(&interior, &sigma).unwrap();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let eta = rng.random_range(0.05..2.0);

        let got = dual_update(&lambda, &scores, eta, &sigma).unwrap();
        // minimize -<scores, x> + |x - lambda|^2/(2 eta) directly
        let lam = lambda.coords().to_vec();
        let oracle = away_step_fw(
            &verts,
            |x| {
                x.iter()
                    .zip(&lam)
                    .zip(&scores)
                    .map(|((xi, li), si)| (xi - li) / eta - si)
                    .collect()
            },
            1.0 / eta,
            1e-13,
        );
        for (gi, oi) in got.coords().iter().zip(&oracle) {
            worst = worst.max((gi - oi).abs());
        }
    }
    assert!(worst < 1e-7, "dual-update deviation {worst:e}");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.2}s exceeds 30s");
    println!("criterion 03 PASS - dual update matches direct argmin (max dev {worst:.2e}) ({elapsed:.2}s)");
}

/// Criterion 4: analytic gradients against central differences, and the
/// first-order optimality of the proximal step.
#[test]
fn criterion_04_gradients_and_prox() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in [LossKind::LeastSquares, LossKind::Logistic] {
        let raw = generate_synthetic(&SyntheticSpec {
            n: 40,
            d: 6,
            noise: 0.5,
            seed: 11,
        })
        .unwrap();
        let (mut dataset, _) = standardize(&raw).unwrap();
        if kind == LossKind::Logistic {
            let signs: Vec<f64> = dataset
                .targets()
                .iter()
                .map(|&y| if y >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            dataset =
                sorel::Dataset::new(dataset.features().to_vec(), signs, dataset.n(), dataset.d())
                    .unwrap();
        }
        let model = ObjectiveModel::new(dataset, kind, 0.1).unwrap();
        let mut worst = 0.0_f64;
        for _ in 0..250 {
            let i = rng.random_range(0..model.n());
            let w: Vec<f64> = (0..model.d()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = model.grad_at(i, &w).unwrap();
            let h = 1e-6 * (1.0 + norm2(&w).sqrt());
            for j in 0..model.d() {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd =
                    (model.loss_at(i, &wp).unwrap() - model.loss_at(i, &wm).unwrap()) / (2.0 * h);
                let scale = g[j].abs().max(fd.abs()).max(1e-2);
                worst = worst.max((g[j] - fd).abs() / scale);
            }
        }
        assert!(
            worst <= 1e-5,
            "{kind:?} gradient FD relative error {worst:e}"
        );
    }

    // prox first-order optimality
    let model = synthetic_model(10, 3, 12, 0.25, 100.0);
    let mut worst_prox = 0.0_f64;
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let anchor: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let alpha = rng.random_range(0.05..2.0);
        let tau = rng.random_range(0.1..5.0);
        let u = model.prox_step(&x, &anchor, alpha, tau).unwrap();
        // gradient of the prox objective at the returned point
        for j in 0..3 {
            let g = model.reg_mu() * u[j] + (u[j] - anchor[j]) / tau + (u[j] - x[j]) / alpha;
            worst_prox = worst_prox.max(g.abs());
        }
    }
    assert!(worst_prox <= 1e-8, "prox optimality residual {worst_prox:e}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.2}s exceeds 10s");
    println!("criterion 04 PASS - gradients within 1e-5 of finite differences, prox residual <= {worst_prox:.2e} ({elapsed:.2}s)");
}

/// Criterion 5: under the uniform spectrum every optimizer reaches the
/// ridge closed-form solution.
#[test]
fn criterion_05_erm_reduction() {
    let start = Instant::now();
    let model = synthetic_model(200, 10, 5, 1.0 / 200.0, 100.0);
    let sigma = SpectralWeights::uniform(200).unwrap();
    let ridge = erm_solution(&model).unwrap();
    let ridge_obj = model.primal_objective(&sigma, &ridge).unwrap();

    let mut gaps: Vec<(&str, f64)> = Vec::new();

    let practical = PracticalSchedule::new(200, 1.0, 0.01).unwrap();
    let out = run_sorel(
        &model,
        &sigma,
        &practical,
        &SorelOptions {
            outer_iters: 300,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    gaps.push((
        "sorel-practical",
        model.primal_objective(&sigma, &out.w).unwrap() - ridge_obj,
    ));

    let theoretical =
        TheoreticalSchedule::new(model.reg_mu(), model.lipschitz(), model.smoothness()).unwrap();
    let out = run_sorel(
        &model,
        &sigma,
        &theoretical,
        &SorelOptions {
            outer_iters: 300,
            seed: 1,
            inner: InnerStrategy::Exact,
            ..Default::default()
        },
    )
    .unwrap();
    gaps.push((
        "sorel-theoretical",
        model.primal_objective(&sigma, &out.w).unwrap() - ridge_obj,
    ));

    let out = run_sgd(
        &model,
        &sigma,
        &BaselineConfig {
            step_size: 0.4,
            batch_size: 200,
            pass_budget: 1200.0,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    gaps.push(("sgd-full-batch", model.primal_objective(&sigma, &out.w).unwrap() - ridge_obj));

    let out = run_lsvrg(
        &model,
        &sigma,
        &BaselineConfig {
            step_size: 0.01,
            pass_budget: 400.0,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    gaps.push(("lsvrg", model.primal_objective(&sigma, &out.w).unwrap() - ridge_obj));

    let out = run_prospect(
        &model,
        &sigma,
        &BaselineConfig {
            step_size: 0.01,
            pass_budget: 400.0,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    gaps.push(("prospect", model.primal_objective(&sigma, &out.w).unwrap() - ridge_obj));

    for (name, gap) in &gaps {
        assert!(
            *gap < 1e-5 && *gap > -1e-9,
            "{name} objective gap {gap:e} exceeds 1e-5"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.2}s exceeds 60s");
    let summary: Vec<String> = gaps.iter().map(|(n, g)| format!("{n} {g:.1e}")).collect();
    println!(
        "criterion 05 PASS - all methods reach the ridge optimum: {} ({elapsed:.2}s)",
        summary.join(", ")
    );
}

/// Criterion 6: halving trend of the squared distance to the reference
/// solution under the guarantee-carrying schedule with exact inner solves.
///
/// The schedule is built verbatim from the model's declared (mu, G, L). The
/// regularizer is set heavy enough (mu = 0.6) that the dual step sizes
/// mu(k+1)/(8 G^2) move the dual through its transient inside the measured
/// window; with mu = 1/n the same trend only becomes visible beyond K = 200.
#[test]
fn criterion_06_rate_trend() {
    let start = Instant::now();
    let ks = [25usize, 50, 100, 200];
    let mut mean_err = [0.0_f64; 4];
    let seeds = 10u64;
    for seed in 0..seeds {
        let model = synthetic_model(200, 10, 100 + seed, 0.6, 2.0);
        let sigma = SpectralWeights::extremile(200, 2.5).unwrap();
        let w_star = reference_solution(&model, &sigma, 1e-10).unwrap();
        let schedule =
            TheoreticalSchedule::new(model.reg_mu(), model.lipschitz(), model.smoothness())
                .unwrap();
        for (slot, &k) in ks.iter().enumerate() {
            let out = run_sorel(
                &model,
                &sigma,
                &schedule,
                &SorelOptions {
                    outer_iters: k,
                    seed,
                    inner: InnerStrategy::Exact,
                    ..Default::default()
                },
            )
            .unwrap();
            mean_err[slot] += norm2(&sub(&out.w, &w_star)) / seeds as f64;
        }
    }
    let mut ratios = Vec::new();
    for pair in 0..3 {
        let ratio = mean_err[pair + 1] / mean_err[pair];
        ratios.push(ratio);
        assert!(
            ratio <= 0.5,
            "error({}) / error({}) = {ratio:.3} exceeds 0.5 (errors {mean_err:?})",
            ks[pair + 1],
            ks[pair]
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.2}s exceeds 300s");
    println!(
        "criterion 06 PASS - halving ratios {:?} at K = 25/50/100 ({elapsed:.2}s)",
        ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
}

/// Criterion 7: the unstabilized alternation oscillates exactly while the
/// stabilized solver converges on the same toy.
#[test]
fn criterion_07_stabilization_counterexample() {
    let start = Instant::now();
    let demo = oscillation_demo(1.0, 0.5, 500, 20).unwrap();
    for (k, &w) in demo.iter().enumerate().skip(1) {
        let expect = if k % 2 == 1 { -1.0 } else { 1.0 };
        assert!(
            (w - expect).abs() < 1e-6,
            "alternation broken at k={k}: {w}"
        );
    }

    // Same toy plus the ridge term; measured from the same nonzero start
    // the alternation uses (the optimum itself sits at 0).
    let model = toy_two_quadratics(0.1);
    let sigma = SpectralWeights::cvar(2, 0.5).unwrap();
    let w_star = reference_solution(&model, &sigma, 1e-12).unwrap();
    let f_star = model.primal_objective(&sigma, &w_star).unwrap();
    let f0 = model.primal_objective(&sigma, &[0.5]).unwrap();
    let schedule = TheoreticalSchedule::new(0.1, model.lipschitz(), model.smoothness()).unwrap();
    let out = run_sorel(
        &model,
        &sigma,
        &schedule,
        &SorelOptions {
            outer_iters: 200,
            inner: InnerStrategy::Exact,
            w0: Some(vec![0.5]),
            ..Default::default()
        },
    )
    .unwrap();
    let subopt =
        (model.primal_objective(&sigma, &out.w).unwrap() - f_star) / (f0 - f_star);
    assert!(subopt <= 1e-6, "stabilized suboptimality {subopt:e}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.2}s exceeds 30s");
    println!(
        "criterion 07 PASS - alternation locked at +-1, stabilized suboptimality {subopt:.2e} ({elapsed:.2}s)"
    );
}

/// Criterion 8: the schedule validator accepts the guaranteed schedule and
/// pinpoints the two documented violations.
#[test]
fn criterion_08_coupling_validator() {
    let start = Instant::now();
    let (mu, g, l) = (0.01, 3.0, 5.0);
    let schedule = TheoreticalSchedule::new(mu, g, l).unwrap();
    let report = validate_coupling_conditions(&schedule, g, mu, 100_000);
    assert!(report.all_hold(), "{:#?}", report.checks);

    struct ConstantTheta(TheoreticalSchedule);
    impl ScheduleParams for ConstantTheta {
        fn theta(&self, _k: usize) -> f64 {
            1.0
        }
        fn eta(&self, k: usize) -> f64 {
            self.0.eta(k)
        }
        fn tau(&self, k: usize) -> f64 {
            self.0.tau(k)
        }
        fn gamma(&self, k: usize) -> f64 {
            self.0.gamma(k)
        }
        fn delta(&self, k: usize) -> f64 {
            self.0.delta(k)
        }
        fn epoch_len(&self, k: usize) -> usize {
            self.0.epoch_len(k)
        }
        fn inner_steps(&self, k: usize) -> usize {
            self.0.inner_steps(k)
        }
        fn step_size(&self) -> f64 {
            self.0.step_size()
        }
        fn averaged_iterates(&self) -> bool {
            true
        }
        fn proximal_inner(&self) -> bool {
            true
        }
    }
    let broken = ConstantTheta(TheoreticalSchedule::new(mu, g, l).unwrap());
    let report_c = validate_coupling_conditions(&broken, g, mu, 100);
    let c = report_c.check('c');
    assert!(!c.holds && c.first_violation == Some(0), "{c:?}");

    struct ConstantEta(TheoreticalSchedule);
    impl ScheduleParams for ConstantEta {
        fn theta(&self, k: usize) -> f64 {
            self.0.theta(k)
        }
        fn eta(&self, _k: usize) -> f64 {
            self.0.eta(0)
        }
        fn tau(&self, k: usize) -> f64 {
            self.0.tau(k)
        }
        fn gamma(&self, k: usize) -> f64 {
            self.0.gamma(k)
        }
        fn delta(&self, k: usize) -> f64 {
            self.0.delta(k)
        }
        fn epoch_len(&self, k: usize) -> usize {
            self.0.epoch_len(k)
        }
        fn inner_steps(&self, k: usize) -> usize {
            self.0.inner_steps(k)
        }
        fn step_size(&self) -> f64 {
            self.0.step_size()
        }
        fn averaged_iterates(&self) -> bool {
            true
        }
        fn proximal_inner(&self) -> bool {
            true
        }
    }
    let broken = ConstantEta(TheoreticalSchedule::new(mu, g, l).unwrap());
    let report_a = validate_coupling_conditions(&broken, g, mu, 100);
    let a = report_a.check('a');
    assert!(!a.holds && a.first_violation == Some(0), "{a:?}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "runtime {elapsed:.2}s exceeds 5s");
    println!("criterion 08 PASS - coupling validator accepts the guaranteed schedule and flags both broken ones ({elapsed:.2}s)");
}

/// Criterion 9: biased minibatch SGD plateaus while the tuned stabilized
/// solver drives the suboptimality to 1e-8. The noise level (2.0) makes the
/// estimator bias pronounced enough that no fixed step size in the tuning
/// range beats the plateau, so SGD is also taken at its best grid point.
#[test]
fn criterion_09_sgd_bias_vs_sorel() {
    let start = Instant::now();
    let raw = generate_synthetic(&SyntheticSpec {
        n: 200,
        d: 10,
        noise: 2.0,
        seed: 9,
    })
    .unwrap();
    let (dataset, _) = standardize(&raw).unwrap();
    let model = ObjectiveModel::new(dataset, LossKind::LeastSquares, 1.0 / 200.0).unwrap();
    let sigma = SpectralWeights::cvar(200, 0.5).unwrap();
    let w_star = reference_solution(&model, &sigma, 1e-12).unwrap();
    let f_star = model.primal_objective(&sigma, &w_star).unwrap();
    let f0 = model
        .primal_objective(&sigma, &vec![0.0; model.d()])
        .unwrap();
    let subopt = |f: f64| (f - f_star) / (f0 - f_star);

    // minibatch SGD: the batch-local spectrum is a biased estimator, so the
    // suboptimality floors out at every step size in the tuning range
    let mut sgd_floor = f64::INFINITY;
    for &step in &[0.001, 0.003, 0.01, 0.03, 0.1] {
        let Ok(sgd) = run_sgd(
            &model,
            &sigma,
            &BaselineConfig {
                step_size: step,
                batch_size: 16,
                pass_budget: 200.0,
                seed: 3,
                ..Default::default()
            },
        ) else {
            continue; // diverged; not a candidate floor
        };
        let floor = sgd
            .trace
            .rows
            .iter()
            .rev()
            .take(20)
            .map(|r| subopt(r.objective))
            .fold(f64::INFINITY, f64::min);
        sgd_floor = sgd_floor.min(floor);
    }
    assert!(
        sgd_floor > 1e-3,
        "sgd unexpectedly converged: floor {sgd_floor:e}"
    );

    // 3x3 grid over the dual step coefficient and the inner step size
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &c in &[0.2, 1.0, 5.0] {
        for &alpha in &[0.003, 0.01, 0.03] {
            let schedule = PracticalSchedule::new(200, c, alpha).unwrap();
            let out = run_sorel(
                &model,
                &sigma,
                &schedule,
                &SorelOptions {
                    outer_iters: usize::MAX / 2,
                    pass_budget: Some(200.0),
                    seed: 3,
                    ..Default::default()
                },
            );
            if let Ok(out) = out {
                let s = subopt(model.primal_objective(&sigma, &out.w).unwrap());
                if s < best.0 {
                    best = (s, c, alpha);
                }
            }
        }
    }
    assert!(
        best.0 <= 1e-8,
        "tuned solver suboptimality {:.3e} (c = {}, alpha = {})",
        best.0,
        best.1,
        best.2
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "runtime {elapsed:.2}s exceeds 300s");
    println!(
        "criterion 09 PASS - sgd floor {sgd_floor:.2e} vs tuned suboptimality {:.2e} at (c = {}, alpha = {}) ({elapsed:.2}s)",
        best.0, best.1, best.2
    );
}

/// Criterion 10: trace schema, pass accounting, and rerun idempotence.
#[test]
fn criterion_10_harness_contracts() {
    let start = Instant::now();

    // pass accounting: each practical-mode outer iteration costs exactly
    // 2 + T_k/n passes (with T_k = n, that is 3 per iteration)
    let model = synthetic_model(50, 4, 10, 0.02, 100.0);
    let sigma = SpectralWeights::extremile(50, 2.5).unwrap();
    let schedule = PracticalSchedule::new(50, 1.0, 0.01).unwrap();
    let out = run_sorel(
        &model,
        &sigma,
        &schedule,
        &SorelOptions {
            outer_iters: 7,
            seed: 0,
            ..Default::default()
        },
    )
    .unwrap();
    let mut prev = 0.0;
    for row in &out.trace.rows {
        let delta = row.passes - prev;
        assert!(
            (delta - 3.0).abs() < 1e-12,
            "pass delta {delta} differs from 2 + T/n = 3"
        );
        prev = row.passes;
    }

    // full experiment: schema-validated traces, manifest, idempotent rerun
    let dir = tempfile::tempdir().unwrap();
    let config_text = format!(
        r#"
[dataset.synthetic]
n = 40
d = 3
noise = 0.4
seed = 8

[spectrum]
family = "cvar"
param = 0.5

[run]
seeds = [1, 2]
pass_budget = 24.0
output_dir = "{}"

[[method]]
name = "sorel"
c = 1.0
alpha = 0.02

[[method]]
name = "sgd"
step_size = 0.02
batch_size = 8
"#,
        dir.path().display()
    );
    let config = ExperimentConfig::from_toml_str(&config_text).unwrap();
    let summary = run_experiment(&config, false).unwrap();
    assert_eq!(summary.computed, 4);
    assert_eq!(summary.failed, 0);

    let manifest: sorel::harness::experiment::Manifest = serde_json::from_str(
        &std::fs::read_to_string(&summary.manifest_path).unwrap(),
    )
    .unwrap();
    for record in &manifest.runs {
        let path = dir.path().join(record.trace_file.as_ref().unwrap());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("k,passes,seconds,objective,subopt\n"));
        let trace = sorel::TrainingTrace::read_csv(&path).unwrap();
        trace.validate().unwrap();
        assert!(trace.rows.iter().all(|r| r.subopt.is_some()));
    }

    let rerun = run_experiment(&config, false).unwrap();
    assert_eq!(rerun.cached, 4);
    assert_eq!(rerun.computed, 0);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "runtime {elapsed:.2}s exceeds 60s");
    println!("criterion 10 PASS - trace schema, 2 + T/n pass accounting, and rerun idempotence hold ({elapsed:.2}s)");
}

/// Dual-representation cross-check kept alongside the criteria: the
/// spectral risk
/// equals the maximum of <lambda, losses> over all vertices for small n.
#[test]
fn spectral_risk_equals_vertex_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 2..=6usize {
        let sigma = SpectralWeights::esrm(n, 2.0).unwrap();
        let verts = vertices(&sigma);
        for _ in 0..20 {
            let losses: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lv = LossVector::new(losses.clone()).unwrap();
            let risk = sorel::spectral_risk(&lv, &sigma).unwrap();
            let best = verts
                .iter()
                .map(|v| dot(v, &losses))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((risk - best).abs() < 1e-12);
            // the linear maximization oracle attains the same value
            let vertex = lmo(&losses, &sigma).unwrap();
            assert!((dot(vertex.coords(), &losses) - best).abs() < 1e-12);
            assert!(contains(vertex.coords(), &sigma, 1e-12));
        }
    }
    // membership sanity for a non-vertex point
    let sigma = SpectralWeights::extremile(4, 2.0).unwrap();
    let mean = sigma.weights().iter().sum::<f64>() / 4.0;
    assert!(contains(&[mean; 4], &sigma, 1e-10));
    let _ = DualPoint::new(vec![mean; 4], &sigma, 1e-10).unwrap();
}
