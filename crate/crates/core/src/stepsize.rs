//! Step-size schedules: the constant (general convex) regime, the adaptive
//! accelerated regime for strongly convex `f`, their non-uniform-sampling
//! variants, and a checker for the step-size conditions that drive the
//! convergence analysis.

use crate::blockcore::DiagWeights;
use crate::error::{Error, Result};
use crate::problem::LipschitzConstants;

/// Default `c_tau = c_sigma`.
pub const DEFAULT_C: f64 = 0.99;

/// Slack below which the checker reports a violation.
pub const CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Constant steps, `theta = t = 1`.
    Part1,
    /// Accelerated recursion; needs `mu_i > 0` and `L_yy = 0`.
    Part2,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Part1 => "part1",
            Regime::Part2 => "part2",
        }
    }
}

/// Step parameters in effect at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub regime: Regime,
    /// Primal steps `tau_i^k` (values, not reciprocals).
    pub tau: DiagWeights,
    pub sigma: f64,
    pub theta: f64,
    pub t: f64,
    /// Normalized step; zero in the constant regime.
    pub tau_tilde: f64,
    /// Certificate parameters `alpha^k`, `beta^k`.
    pub alpha: f64,
    pub beta: f64,
    pub c_tau: f64,
    pub c_sigma: f64,
    pub k: usize,
    pub m: usize,
    /// Block sampling probabilities.
    pub probs: Vec<f64>,
    mu: Vec<f64>,
    sigma0: f64,
    /// Set once if the momentum parameter ever had to be raised to `1 - 1/m`.
    pub theta_clamped: bool,
}

fn check_c(name: &str, c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {c}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}

/// Validates a probability vector of length `m`.
pub fn check_probabilities(p: &[f64], m: usize) -> Result<()> {
    if p.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: p.len(),
        });
    }
    if p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(
            "sampling probabilities must be positive".into(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "sampling probabilities sum to {sum}, not 1"
        )));
    }
    Ok(())
}

pub fn uniform_probabilities(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

/// Default `alpha = max_i L_{yx_i}`.
pub fn default_alpha(constants: &LipschitzConstants) -> f64 {
    constants.l_yx.max()
}

/// Constant schedule with uniform sampling.
pub fn part1_schedule(
    constants: &LipschitzConstants,
    alpha: f64,
    c_tau: f64,
    c_sigma: f64,
) -> Result<StepSchedule> {
    let m = constants.num_blocks();
    nonuniform_weights(constants, alpha, &uniform_probabilities(m), Regime::Part1, c_tau, c_sigma)
}

/// Accelerated schedule with uniform sampling.
pub fn part2_init(constants: &LipschitzConstants, alpha: f64, c_sigma: f64) -> Result<StepSchedule> {
    let m = constants.num_blocks();
    nonuniform_weights(constants, alpha, &uniform_probabilities(m), Regime::Part2, 1.0, c_sigma)
}

/// Schedule for sampling block `i` with probability `p_i`.
///
/// Constant regime: `tau_i = c_tau / (L_xx_i + L_yx_i^2 / (p_i m alpha))`,
/// `sigma = c_sigma / (m (alpha + 2 L_yy))`.
/// Accelerated regime:
/// `tau~0 = min_i mu_i p_i / (L_xx_i + L_yx_i^2/(p_i m alpha) + (1 - p_i) mu_i)`,
/// `sigma0 = c_sigma / (m alpha)`. `c_tau` is unused there.
pub fn nonuniform_weights(
    constants: &LipschitzConstants,
    alpha: f64,
    p: &[f64],
    regime: Regime,
    c_tau: f64,
    c_sigma: f64,
) -> Result<StepSchedule> {
    let m = constants.num_blocks();
    check_alpha(alpha)?;
    check_c("c_tau", c_tau)?;
    check_c("c_sigma", c_sigma)?;
    check_probabilities(p, m)?;
    let mf = m as f64;
    let lxx = constants.l_xx.as_slice();
    let lyx = constants.l_yx.as_slice();
    let mu = constants.mu.as_slice().to_vec();
    match regime {
        Regime::Part1 => {
            let tau: Vec<f64> = (0..m)
                .map(|i| c_tau / (lxx[i] + lyx[i] * lyx[i] / (p[i] * mf * alpha)))
                .collect();
            let sigma = c_sigma / (mf * (alpha + 2.0 * constants.l_yy));
            Ok(StepSchedule {
                regime,
                tau: DiagWeights::new(tau)?,
                sigma,
                theta: 1.0,
                t: 1.0,
                tau_tilde: 0.0,
                alpha,
                beta: constants.l_yy,
                c_tau,
                c_sigma,
                k: 0,
                m,
                probs: p.to_vec(),
                mu,
                sigma0: sigma,
                theta_clamped: false,
            })
        }
        Regime::Part2 => {
            if let Some(i) = mu.iter().position(|&v| v <= 0.0) {
                return Err(Error::RegimeViolation(format!(
                    "accelerated steps need mu_i > 0, block {i} has mu = {}",
                    mu[i]
                )));
            }
            if constants.l_yy > 0.0 {
                return Err(Error::RegimeViolation(format!(
                    "accelerated steps need a coupling linear in y, L_yy = {}",
                    constants.l_yy
                )));
            }
            let tau_tilde = (0..m)
                .map(|i| {
                    mu[i] * p[i]
                        / (lxx[i] + lyx[i] * lyx[i] / (p[i] * mf * alpha) + (1.0 - p[i]) * mu[i])
                })
                .fold(f64::INFINITY, f64::min);
            let sigma = c_sigma / (mf * alpha);
            let tau = part2_taus(&mu, p, tau_tilde)?;
            Ok(StepSchedule {
                regime,
                tau,
                sigma,
                theta: 1.0,
                t: 1.0,
                tau_tilde,
                alpha,
                beta: 0.0,
                c_tau,
                c_sigma,
                k: 0,
                m,
                probs: p.to_vec(),
                mu,
                sigma0: sigma,
                theta_clamped: false,
            })
        }
    }
}

fn part2_taus(mu: &[f64], p: &[f64], tau_tilde: f64) -> Result<DiagWeights> {
    DiagWeights::new(
        mu.iter()
            .zip(p)
            .map(|(&u, &pi)| 1.0 / (u * pi * (1.0 + 1.0 / tau_tilde) - u))
            .collect(),
    )
}

impl StepSchedule {
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `T^k = diag(1 / tau_i^k)`.
    pub fn t_weights(&self) -> DiagWeights {
        DiagWeights::new(self.tau.as_slice().iter().map(|v| 1.0 / v).collect())
            .expect("steps are positive")
    }

    pub fn theta_floor(&self) -> f64 {
        1.0 - 1.0 / self.m as f64
    }

    /// Parameters for iteration `k + 1`. Constant schedules only bump `k`.
    pub fn advance(&self) -> StepSchedule {
        let mut next = self.clone();
        next.k += 1;
        if self.regime == Regime::Part1 {
            return next;
        }
        let mut theta = 1.0 / (1.0 + self.tau_tilde).sqrt();
        if theta < self.theta_floor() {
            theta = self.theta_floor();
            next.theta_clamped = true;
        }
        next.theta = theta;
        next.sigma = self.sigma / theta;
        next.tau_tilde = theta * self.tau_tilde;
        next.t = self.t / theta;
        next.alpha = self.c_sigma / (self.m as f64 * theta * next.sigma);
        next.tau = part2_taus(&self.mu, &self.probs, next.tau_tilde).expect("positive steps");
        next
    }

    /// Schedules for `k = self.k ..= self.k + steps`.
    pub fn prefix(&self, steps: usize) -> Vec<StepSchedule> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(self.clone());
        for _ in 0..steps {
            let next = out.last().unwrap().advance();
            out.push(next);
        }
        out
    }
}

/// Advances an accelerated schedule one step.
pub fn part2_advance(s: &StepSchedule) -> Result<StepSchedule> {
    if s.regime != Regime::Part2 {
        return Err(Error::RegimeViolation("part2_advance on a constant schedule".into()));
    }
    Ok(s.advance())
}

/// The inequalities of the step-size condition, in checker order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inequality {
    /// `1/tau_i^k >= L_xx_i + L_yx_i^2 / (m p_i alpha^{k+1})`
    PrimalMetric,
    /// `1/sigma^k >= m theta^k (alpha^k + beta^k) + m L_yy^2 / beta^{k+1}`
    DualStep,
    /// `t^k (1/tau_i^k + mu_i) >= t^{k+1} (1/tau_i^{k+1} + (1 - p_i) mu_i)`
    StrongConvexity,
    /// `t^k / sigma^k >= t^{k+1} / sigma^{k+1}`
    StepRatio,
    /// `t^{k+1} theta^{k+1} = t^k`
    WeightIdentity,
    /// `theta^k` in `[1 - 1/m, 1]`, `theta^0 = t^0 = 1`
    Momentum,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::PrimalMetric,
        Inequality::DualStep,
        Inequality::StrongConvexity,
        Inequality::StepRatio,
        Inequality::WeightIdentity,
        Inequality::Momentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Inequality::PrimalMetric => "primal-metric",
            Inequality::DualStep => "dual-step",
            Inequality::StrongConvexity => "strong-convexity",
            Inequality::StepRatio => "step-ratio",
            Inequality::WeightIdentity => "weight-identity",
            Inequality::Momentum => "momentum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Report {
    pub satisfied: bool,
    /// Worst relative slack per inequality, indexed like [`Inequality::ALL`].
    pub worst_slack: [f64; 6],
    pub first_violation: Option<(usize, Inequality)>,
    pub checked_steps: usize,
}

impl Assumption2Report {
    pub fn slack(&self, which: Inequality) -> f64 {
        self.worst_slack[Inequality::ALL.iter().position(|&q| q == which).unwrap()]
    }

    pub fn min_slack(&self) -> f64 {
        self.worst_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn rel_slack(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

// `a^2 / b` with the convention `0^2 / 0 = 0`.
fn sq_over(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * a / b
    }
}

/// Evaluates every inequality for each consecutive pair in `prefix`.
pub fn check_assumption2(prefix: &[StepSchedule], constants: &LipschitzConstants) -> Assumption2Report {
    let mut worst = [f64::INFINITY; 6];
    let mut first: Option<(usize, Inequality)> = None;
    let mut note = |k: usize, q: Inequality, slack: f64, worst: &mut [f64; 6]| {
        let idx = Inequality::ALL.iter().position(|&x| x == q).unwrap();
        worst[idx] = worst[idx].min(slack);
        if slack < -CHECK_TOL && first.is_none() {
            first = Some((k, q));
        }
    };
    if let Some(s0) = prefix.first() {
        if s0.k == 0 {
            let s = -(s0.theta - 1.0).abs().max((s0.t - 1.0).abs());
            note(0, Inequality::Momentum, s, &mut worst);
        }
    }
    for w in prefix.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let k = a.k;
        let m = a.m as f64;
        for i in 0..a.m {
            let p = a.probs[i];
            let lhs = 1.0 / a.tau.get(i);
            let rhs = constants.l_xx.get(i) + sq_over(constants.l_yx.get(i), m * p * b.alpha);
            note(k, Inequality::PrimalMetric, rel_slack(lhs, rhs), &mut worst);

            let mu = a.mu[i];
            let lhs = a.t * (1.0 / a.tau.get(i) + mu);
            let rhs = b.t * (1.0 / b.tau.get(i) + (1.0 - p) * mu);
            note(k, Inequality::StrongConvexity, rel_slack(lhs, rhs), &mut worst);
        }
        let lhs = 1.0 / a.sigma;
        let rhs = m * a.theta * (a.alpha + a.beta) + m * sq_over(constants.l_yy, b.beta);
        note(k, Inequality::DualStep, rel_slack(lhs, rhs), &mut worst);

        note(
            k,
            Inequality::StepRatio,
            rel_slack(a.t / a.sigma, b.t / b.sigma),
            &mut worst,
        );
        note(
            k,
            Inequality::WeightIdentity,
            -rel_slack(b.t * b.theta, a.t).abs(),
            &mut worst,
        );
        let floor = 1.0 - 1.0 / m;
        let s = (b.theta - floor).min(1.0 - b.theta);
        note(b.k, Inequality::Momentum, s, &mut worst);
    }
    Assumption2Report {
        satisfied: first.is_none(),
        worst_slack: worst,
        first_violation: first,
        checked_steps: prefix.len().saturating_sub(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn consts(lxx: Vec<f64>, lyx: Vec<f64>, lyy: f64, mu: Vec<f64>) -> LipschitzConstants {
        LipschitzConstants::new(lxx, lyx, lyy, mu).unwrap()
    }

    fn sc_pair() -> LipschitzConstants {
        consts(vec![1.0, 1.0], vec![1.0, 1.0], 0.0, vec![1.0, 1.0])
    }

    #[test]
    fn part1_example() {
        let c = consts(vec![1.0], vec![1.0], 0.0, vec![0.0]);
        let s = part1_schedule(&c, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.tau.as_slice(), &[0.5]);
        assert_eq!(s.sigma, 1.0);
        let rep = check_assumption2(&s.prefix(3), &c);
        assert!(rep.satisfied);
        assert!(rep.slack(Inequality::PrimalMetric).abs() < 1e-15);
        assert!(rep.slack(Inequality::DualStep).abs() < 1e-15);
        assert!(part1_schedule(&c, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn part1_alpha_monotonicity() {
        let c = consts(vec![1.0, 2.0], vec![3.0, 1.0], 0.5, vec![0.0, 0.0]);
        let a = part1_schedule(&c, 1.0, 0.9, 0.9).unwrap();
        let b = part1_schedule(&c, 2.0, 0.9, 0.9).unwrap();
        for i in 0..2 {
            assert!(b.tau.get(i) > a.tau.get(i));
        }
        assert!(b.sigma < a.sigma);
    }

    #[test]
    fn part2_init_example() {
        let s = part2_init(&sc_pair(), 1.0, 1.0).unwrap();
        assert!((s.tau_tilde - 0.2).abs() < 1e-15);
        assert_eq!(s.sigma, 0.5);
        for i in 0..2 {
            assert!((s.tau.get(i) - 0.5).abs() < 1e-14);
        }
        assert_eq!((s.theta, s.t), (1.0, 1.0));
    }

    #[test]
    fn part2_first_advance() {
        let s = part2_advance(&part2_init(&sc_pair(), 1.0, 1.0).unwrap()).unwrap();
        // independent recomputation
        let theta = 1.0 / 1.2f64.sqrt();
        assert!((s.theta - 0.912_870_9).abs() < 1e-7 && (s.theta - theta).abs() < 1e-15);
        assert!((s.sigma - 0.547_722_6).abs() < 1e-7);
        assert!((s.tau_tilde - 0.182_574_2).abs() < 1e-7);
        assert!((s.t - 1.095_445_1).abs() < 1e-7);
        assert!((s.t * s.theta - 1.0).abs() < 1e-15);
        let p1 = part1_schedule(&sc_pair(), 1.0, 1.0, 1.0).unwrap();
        assert!(part2_advance(&p1).is_err());
    }

    #[test]
    fn part2_regime_violations() {
        let no_mu = consts(vec![1.0, 1.0], vec![1.0, 1.0], 0.0, vec![1.0, 0.0]);
        assert!(matches!(part2_init(&no_mu, 1.0, 1.0), Err(Error::RegimeViolation(_))));
        let curved = consts(vec![1.0], vec![1.0], 0.3, vec![1.0]);
        assert!(matches!(part2_init(&curved, 1.0, 1.0), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn part2_long_run_invariants() {
        let s0 = part2_init(&sc_pair(), 1.0, 1.0).unwrap();
        let seq = s0.prefix(10_000);
        let mut prev_theta = 0.0;
        for w in seq.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!((b.t * b.theta - a.t).abs() <= 1e-10 * a.t);
            assert!((b.t - b.sigma / s0.sigma).abs() <= 1e-10 * b.t);
            assert!(b.theta >= 0.5 && b.theta <= 1.0);
            assert!(b.theta >= prev_theta);
            prev_theta = b.theta;
            for i in 0..2 {
                let lhs = a.t * (1.0 / a.tau.get(i) + 1.0);
                let rhs = b.t * (1.0 / b.tau.get(i) + 0.5);
                assert!((lhs - rhs) / lhs >= -1e-10);
            }
        }
        assert!(!seq.last().unwrap().theta_clamped);
        let kt = |k: usize| k as f64 * seq[k].tau_tilde;
        assert!((kt(10_000) / kt(1_000) - 1.0).abs() <= 0.1);
        assert!((kt(10_000) - 2.0).abs() < 0.1);

        let ratio = |k: usize| (k * k) as f64 * seq[k].tau.get(0) / seq[k].t;
        let vals: Vec<f64> = (100..=10_000).step_by(100).map(ratio).collect();
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo <= 1.5, "{lo} {hi}");
    }

    #[test]
    fn nonuniform_example() {
        let c = consts(vec![1.0, 1.0], vec![1.0, 1.0], 0.0, vec![0.0, 0.0]);
        let s = nonuniform_weights(&c, 1.0, &[0.75, 0.25], Regime::Part1, 1.0, 1.0).unwrap();
        assert!((s.tau.get(0) - 0.6).abs() < 1e-15);
        assert!((s.tau.get(1) - 1.0 / 3.0).abs() < 1e-15);
        let u = part1_schedule(&c, 1.0, 1.0, 1.0).unwrap();
        assert!(s.tau.get(1) < u.tau.get(1));
        assert!(nonuniform_weights(&c, 1.0, &[0.5, 0.6], Regime::Part1, 1.0, 1.0).is_err());
        assert!(nonuniform_weights(&c, 1.0, &[1.0, 0.0], Regime::Part1, 1.0, 1.0).is_err());
    }

    #[test]
    fn uniform_probabilities_reproduce_uniform_schedules() {
        let c = consts(vec![0.3, 2.0, 1.0], vec![1.5, 0.2, 1.0], 0.0, vec![0.5, 1.0, 2.0]);
        let p = uniform_probabilities(3);
        let a = nonuniform_weights(&c, 1.2, &p, Regime::Part1, 0.9, 0.8).unwrap();
        assert_eq!(a, part1_schedule(&c, 1.2, 0.9, 0.8).unwrap());
        let b = nonuniform_weights(&c, 1.2, &p, Regime::Part2, 1.0, 0.8).unwrap();
        assert_eq!(b, part2_init(&c, 1.2, 0.8).unwrap());
    }

    #[test]
    fn checker_accepts_shipped_and_rejects_fault() {
        let c = consts(vec![1.0, 0.5], vec![1.0, 2.0], 0.0, vec![1.0, 1.0]);
        let s = part1_schedule(&c, 2.0, 0.9, 0.9).unwrap();
        let rep = check_assumption2(&s.prefix(1000), &c);
        assert!(rep.satisfied && rep.slack(Inequality::PrimalMetric) > 0.0);
        assert!(rep.slack(Inequality::DualStep) > 0.0);

        let bad = part1_schedule(&c, 2.0, 1.5, 0.9).unwrap();
        let rep = check_assumption2(&bad.prefix(10), &c);
        assert_eq!(rep.first_violation, Some((0, Inequality::PrimalMetric)));

        let s = part2_init(&c, 2.0, DEFAULT_C).unwrap();
        let rep = check_assumption2(&s.prefix(1000), &c);
        assert!(rep.satisfied, "{rep:?}");
    }

    proptest! {
        #[test]
        fn shipped_schedules_satisfy_checker(
            m in 1usize..9,
            seed in proptest::collection::vec((0.0f64..5.0, 0.01f64..5.0, 0.05f64..3.0, 0.05f64..1.0), 8),
            alpha in 0.1f64..5.0,
            c in 0.05f64..=1.0,
        ) {
            let lxx: Vec<f64> = seed[..m].iter().map(|s| s.0).collect();
            let lyx: Vec<f64> = seed[..m].iter().map(|s| s.1).collect();
            let mu: Vec<f64> = seed[..m].iter().map(|s| s.2).collect();
            let raw: Vec<f64> = seed[..m].iter().map(|s| s.3).collect();
            let tot: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / tot).collect();
            let cst = consts(lxx, lyx, 0.0, mu);
            for regime in [Regime::Part1, Regime::Part2] {
                for probs in [uniform_probabilities(m), p.clone()] {
                    let s = nonuniform_weights(&cst, alpha, &probs, regime, c, c).unwrap();
                    let seq = s.prefix(200);
                    let rep = check_assumption2(&seq, &cst);
                    prop_assert!(rep.satisfied, "{:?} {:?}", regime, rep);
                    prop_assert!(!seq.last().unwrap().theta_clamped);
                }
            }
        }
    }
}
