//! Per-iteration parameter schedules for the outer loop, and the validator
//! for the five coupling inequalities the convergence analysis rests on.

use crate::error::{Error, Result};

/// Per-outer-iteration parameters consumed by the solver. `k` is 0-based.
pub trait ScheduleParams {
    /// Momentum weight `theta_k`.
    fn theta(&self, k: usize) -> f64;
    /// Dual proximal step `eta_k`.
    fn eta(&self, k: usize) -> f64;
    /// Primal proximal weight `tau_k`.
    fn tau(&self, k: usize) -> f64;
    /// Telescoping multiplier `gamma_k` (analysis only).
    fn gamma(&self, k: usize) -> f64;
    /// Target accuracy `delta_k` of the inner solve (analysis only).
    fn delta(&self, k: usize) -> f64;
    /// Full-gradient refresh period `m_k` of the inner loop.
    fn epoch_len(&self, k: usize) -> usize;
    /// Total inner steps `T_k`.
    fn inner_steps(&self, k: usize) -> usize;
    /// Inner step size `alpha`.
    fn step_size(&self) -> f64;
    /// Whether the reference point and inner output are epoch averages
    /// (true) or last iterates (false).
    fn averaged_iterates(&self) -> bool;
    /// Whether the inner update uses the anchored proximal step (true) or
    /// the plain gradient step on the differentiable regularizer (false).
    fn proximal_inner(&self) -> bool;
}

/// The schedule with the convergence guarantee:
/// `gamma_k = k+1`, `eta_k = mu(k+1)/(8 G^2)`, `theta_k = k/(k+1)`,
/// `tau_k = 4/(mu(k+1))`, `delta_k = min(mu/(8(k+5)), mu (k+1)^-6)`,
/// `alpha = 1/(12 L)`, `m_k = 96 L / (mu + 1/tau_k) + 2`.
///
/// With this `tau_k` the epoch length equals `384 L / ((k+5) mu) + 2`; the
/// two published forms coincide. The number of inner epochs is
/// `ceil(inner_slack * ln(1/delta_k))`, so `T_k = O(m_k log(1/delta_k))`.
#[derive(Debug, Clone)]
pub struct TheoreticalSchedule {
    mu: f64,
    lipschitz: f64,
    smoothness: f64,
    inner_slack: f64,
}

impl TheoreticalSchedule {
    pub fn new(mu: f64, lipschitz: f64, smoothness: f64) -> Result<Self> {
        if mu.is_nan() || mu <= 0.0 {
            return Err(Error::invalid("mu", "theoretical schedule needs mu > 0"));
        }
        if !(lipschitz > 0.0 && smoothness > 0.0) {
            return Err(Error::invalid("constants", "G and L must be positive"));
        }
        Ok(Self {
            mu,
            lipschitz,
            smoothness,
            inner_slack: 2.0,
        })
    }

    /// Multiplier on `ln(1/delta_k)` controlling how many inner epochs are
    /// run (default 2).
    pub fn with_inner_slack(mut self, slack: f64) -> Self {
        self.inner_slack = slack.max(0.0);
        self
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The proof-only Young coupling multiplier `alpha_k = G * eta_{k-1}`,
    /// defined for `k >= 1` (`alpha_0` is a free constant of the analysis).
    pub fn analysis_alpha(&self, k: usize) -> f64 {
        debug_assert!(k >= 1, "analysis alpha is defined from k = 1");
        self.lipschitz * self.eta(k - 1)
    }
}

impl ScheduleParams for TheoreticalSchedule {
    fn theta(&self, k: usize) -> f64 {
        k as f64 / (k as f64 + 1.0)
    }

    fn eta(&self, k: usize) -> f64 {
        self.mu * (k as f64 + 1.0) / (8.0 * self.lipschitz * self.lipschitz)
    }

    fn tau(&self, k: usize) -> f64 {
        4.0 / (self.mu * (k as f64 + 1.0))
    }

    fn gamma(&self, k: usize) -> f64 {
        k as f64 + 1.0
    }

    fn delta(&self, k: usize) -> f64 {
        let kf = k as f64;
        (self.mu / (8.0 * (kf + 5.0))).min(self.mu * (kf + 1.0).powi(-6))
    }

    fn epoch_len(&self, k: usize) -> usize {
        let m = 96.0 * self.smoothness / (self.mu + 1.0 / self.tau(k)) + 2.0;
        (m.ceil() as usize).max(2)
    }

    fn inner_steps(&self, k: usize) -> usize {
        let epochs = (self.inner_slack * (1.0 / self.delta(k)).ln()).ceil().max(1.0) as usize;
        self.epoch_len(k) * epochs
    }

    fn step_size(&self) -> f64 {
        1.0 / (12.0 * self.smoothness)
    }

    fn averaged_iterates(&self) -> bool {
        true
    }

    fn proximal_inner(&self) -> bool {
        true
    }
}

/// The schedule used for experiments: `T_k = m_k = n`, last-iterate outputs,
/// plain gradient inner steps, `theta_k = k/(k+1)`, `tau_k = 20 n/(k+1)`,
/// and `eta_k = C (k+1)/n` with tunable `C` and step size `alpha`.
#[derive(Debug, Clone)]
pub struct PracticalSchedule {
    n: usize,
    c: f64,
    alpha: f64,
}

impl PracticalSchedule {
    pub fn new(n: usize, c: f64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample count must be positive"));
        }
        if c.is_nan() || c <= 0.0 {
            return Err(Error::invalid("c", "dual step coefficient must be positive"));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::invalid("alpha", "step size must be positive"));
        }
        Ok(Self { n, c, alpha })
    }
}

impl ScheduleParams for PracticalSchedule {
    fn theta(&self, k: usize) -> f64 {
        k as f64 / (k as f64 + 1.0)
    }

    fn eta(&self, k: usize) -> f64 {
        self.c * (k as f64 + 1.0) / self.n as f64
    }

    fn tau(&self, k: usize) -> f64 {
        20.0 * self.n as f64 / (k as f64 + 1.0)
    }

    fn gamma(&self, k: usize) -> f64 {
        k as f64 + 1.0
    }

    fn delta(&self, _k: usize) -> f64 {
        // The practical mode runs a fixed inner budget rather than targeting
        // an accuracy; zero keeps inequality (b) meaningful in the validator.
        0.0
    }

    fn epoch_len(&self, _k: usize) -> usize {
        self.n
    }

    fn inner_steps(&self, _k: usize) -> usize {
        self.n
    }

    fn step_size(&self) -> f64 {
        self.alpha
    }

    fn averaged_iterates(&self) -> bool {
        false
    }

    fn proximal_inner(&self) -> bool {
        false
    }
}

/// Outcome of checking one of the five coupling inequalities over a horizon.
#[derive(Debug, Clone)]
pub struct InequalityCheck {
    /// Stable identifier, `a` through `e`.
    pub id: char,
    /// Human-readable statement of the inequality.
    pub statement: &'static str,
    pub holds: bool,
    /// Smallest k at which the inequality fails, if any.
    pub first_violation: Option<usize>,
}

/// Per-inequality report from [`validate_coupling_conditions`].
#[derive(Debug, Clone)]
pub struct CouplingReport {
    pub checks: Vec<InequalityCheck>,
    pub horizon: usize,
}

impl CouplingReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn check(&self, id: char) -> &InequalityCheck {
        self.checks.iter().find(|c| c.id == id).expect("known id")
    }
}

/// Relative slack absorbing floating-point rounding: several inequalities
/// hold with exact equality in real arithmetic.
const SLACK: f64 = 1e-9;

/// Checks the five parameter-coupling inequalities for `k = 0..=horizon`,
/// with the analysis multiplier taken as `alpha_{k+1} = G * eta_k`:
///
/// (a) `gamma_{k+1}/eta_{k+1} <= gamma_k/eta_k`
/// (b) `gamma_{k+1}/tau_{k+1} <= gamma_k (1/tau_k + mu - sqrt(2(mu + 1/tau_k) delta_k))`
/// (c) `gamma_k = gamma_{k+1} theta_{k+1}`
/// (d) `G alpha_{k+1} <= 1/tau_k`
/// (e) `theta_k G / alpha_k <= 1/eta_k`  (trivially true at k = 0 where
///     `theta_0 = 0` and `alpha_0` is free)
pub fn validate_coupling_conditions(
    schedule: &dyn ScheduleParams,
    lipschitz: f64,
    mu: f64,
    horizon: usize,
) -> CouplingReport {
    let le = |lhs: f64, rhs: f64| lhs <= rhs + SLACK * lhs.abs().max(rhs.abs()).max(1.0);
    let mut checks = vec![
        InequalityCheck {
            id: 'a',
            statement: "gamma_{k+1}/eta_{k+1} <= gamma_k/eta_k",
            holds: true,
            first_violation: None,
        },
        InequalityCheck {
            id: 'b',
            statement: "gamma_{k+1}/tau_{k+1} <= gamma_k (1/tau_k + mu - sqrt(2(mu + 1/tau_k) delta_k))",
            holds: true,
            first_violation: None,
        },
        InequalityCheck {
            id: 'c',
            statement: "gamma_k = gamma_{k+1} theta_{k+1}",
            holds: true,
            first_violation: None,
        },
        InequalityCheck {
            id: 'd',
            statement: "G alpha_{k+1} <= 1/tau_k with alpha_{k+1} = G eta_k",
            holds: true,
            first_violation: None,
        },
        InequalityCheck {
            id: 'e',
            statement: "theta_k G / alpha_k <= 1/eta_k with alpha_k = G eta_{k-1}",
            holds: true,
            first_violation: None,
        },
    ];

    let record = |idx: usize, k: usize, ok: bool, checks: &mut Vec<InequalityCheck>| {
        if !ok && checks[idx].holds {
            checks[idx].holds = false;
            checks[idx].first_violation = Some(k);
        }
    };

    for k in 0..=horizon {
        let (g0, g1) = (schedule.gamma(k), schedule.gamma(k + 1));
        let (e0, e1) = (schedule.eta(k), schedule.eta(k + 1));
        let (t0, t1) = (schedule.tau(k), schedule.tau(k + 1));
        let d0 = schedule.delta(k);

        record(0, k, le(g1 / e1, g0 / e0), &mut checks);

        let damping = 1.0 / t0 + mu - (2.0 * (mu + 1.0 / t0) * d0).sqrt();
        record(1, k, le(g1 / t1, g0 * damping), &mut checks);

        let target = g1 * schedule.theta(k + 1);
        let eq = (g0 - target).abs() <= SLACK * g0.abs().max(target.abs()).max(1.0);
        record(2, k, eq, &mut checks);

        // alpha_{k+1} = G eta_k
        record(3, k, le(lipschitz * lipschitz * e0, 1.0 / t0), &mut checks);

        let e_ok = if k == 0 {
            schedule.theta(0) == 0.0
        } else {
            // theta_k G / (G eta_{k-1}) = theta_k / eta_{k-1}
            le(schedule.theta(k) / schedule.eta(k - 1), 1.0 / e0)
        };
        record(4, k, e_ok, &mut checks);
    }

    CouplingReport { checks, horizon }
}
