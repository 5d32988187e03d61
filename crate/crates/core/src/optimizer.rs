//! Multi-start derivative-free search over two-qubit models for the extremal
//! quantum values of the CHSH sum and the Hardy witness.
//!
//! Models are parameterized by a Schmidt angle `θ ∈ [0, π/4]`
//! (`cos θ |00> + sin θ |11>`) and four measurement angles in the x–z plane.
//! Equality constraints are enforced with a quadratic penalty whose weight is
//! doubled between Nelder–Mead runs up to a cap, followed by a final polish
//! at the cap. Restarts run in parallel and are merged deterministically.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{chsh_delta, Behavior, Shorthand};
use crate::error::{Error, Result};
use crate::hardy::HardySet;
use crate::nelder_mead::NelderMead;
use crate::quantum::{
    behavior_from_model, behavior_from_model_compensated, projected_norm_sqr, QuantumModel, Settings,
};

/// Constraint residual limit for the Hardy problems.
pub const HARDY_RESIDUAL_LIMIT: f64 = 1e-8;
/// Constraint residual limit for the perfect-correlation problem.
pub const GHZ_RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    pub restarts: usize,
    /// Iteration cap for each Nelder–Mead run.
    pub max_iters: usize,
    /// Objective spread at which a Nelder–Mead run is considered converged.
    pub tol: f64,
    pub penalty_start: f64,
    pub penalty_cap: f64,
    pub penalty_growth: f64,
    pub seed: u64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 4000,
            tol: 1e-13,
            penalty_start: 1e3,
            penalty_cap: 1e9,
            penalty_growth: 2.0,
            seed: 0,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be positive");
        }
        if !(self.penalty_start > 0.0 && self.penalty_start <= self.penalty_cap && self.penalty_cap.is_finite()) {
            return bad("penalty weights must satisfy 0 < start <= cap < inf");
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return bad("penalty_growth must exceed 1 so weights strictly increase");
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Penalty weights used by successive outer iterations, ending at the cap.
    pub fn penalty_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.penalty_start];
        let mut w = self.penalty_start;
        while w < self.penalty_cap {
            w = (w * self.penalty_growth).min(self.penalty_cap);
            out.push(w);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateClass {
    Any,
    Product,
    MaximallyEntangled,
}

impl StateClass {
    fn theta(self) -> Option<f64> {
        match self {
            StateClass::Any => None,
            StateClass::Product => Some(0.0),
            StateClass::MaximallyEntangled => Some(FRAC_PI_4),
        }
    }
}

impl FromStr for StateClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(StateClass::Any),
            "product" => Ok(StateClass::Product),
            "maximally-entangled" | "maximally_entangled" | "maxent" => Ok(StateClass::MaximallyEntangled),
            _ => Err(Error::InvalidConfig(format!("unknown state class {s:?}"))),
        }
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateClass::Any => "any",
            StateClass::Product => "product",
            StateClass::MaximallyEntangled => "maximally-entangled",
        })
    }
}

/// Schmidt angle and planar measurement angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleParams {
    pub theta: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl AngleParams {
    pub fn settings(&self) -> Settings {
        Settings::planar(self.a1, self.a2, self.b1, self.b2)
    }

    pub fn model(&self) -> Result<QuantumModel> {
        QuantumModel::schmidt(self.theta, self.settings())
    }

    /// Measurement angles reduced to `[0, 2π)` and θ folded into `[0, π/4]`.
    pub fn canonical(&self) -> Self {
        let w = |a: f64| a.rem_euclid(TAU);
        Self {
            theta: fold_theta(self.theta),
            a1: w(self.a1),
            a2: w(self.a2),
            b1: w(self.b1),
            b2: w(self.b2),
        }
    }
}

/// Maps any real onto `[0, π/4]` by a continuous triangle wave of period π/2.
/// Schmidt angles `θ` and `π/2 - θ` describe locally equivalent states.
fn fold_theta(t: f64) -> f64 {
    let r = t.rem_euclid(FRAC_PI_2);
    if r > FRAC_PI_4 {
        FRAC_PI_2 - r
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    pub name: String,
    pub target: f64,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub restarts: usize,
    pub converged_restarts: usize,
    pub best_restart: usize,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub objective: f64,
    pub params: AngleParams,
    pub model: QuantumModel,
    pub behavior: Behavior,
    pub constraint_residuals: Vec<ConstraintResidual>,
    pub max_constraint_residual: f64,
    pub residual_limit: Option<f64>,
    /// Signed CHSH sum at the optimum.
    pub delta: f64,
    /// `p1 + p8 + p12 + p14 + p15` at the optimum.
    pub sigma: f64,
    /// The best restart's final run converged and the constraints are within limit.
    pub converged: bool,
    pub stats: RunStats,
}

impl OptimizationResult {
    pub fn constraints_satisfied(&self) -> bool {
        self.residual_limit
            .is_none_or(|limit| self.max_constraint_residual <= limit)
    }
}

type Objective = dyn Fn(&Behavior) -> Result<f64> + Sync;

struct Problem<'a> {
    theta: Option<f64>,
    objective: &'a Objective,
    constraints: Vec<(Shorthand, f64)>,
    residual_limit: Option<f64>,
    seed_point: Option<AngleParams>,
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> AngleParams {
        match self.theta {
            Some(theta) => AngleParams { theta, a1: x[0], a2: x[1], b1: x[2], b2: x[3] },
            None => AngleParams { theta: fold_theta(x[0]), a1: x[1], a2: x[2], b1: x[3], b2: x[4] },
        }
    }

    fn vector(&self, p: &AngleParams) -> Vec<f64> {
        match self.theta {
            Some(_) => vec![p.a1, p.a2, p.b1, p.b2],
            None => vec![p.theta, p.a1, p.a2, p.b1, p.b2],
        }
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..TAU)).collect();
        if self.theta.is_none() {
            x.insert(0, rng.random_range(0.0..FRAC_PI_4));
        }
        x
    }

    fn behavior(&self, x: &[f64]) -> Result<Behavior> {
        behavior_from_model(&self.params(x).model()?)
    }

    /// Sum of squared constraint violations. A probability is the squared
    /// norm of a projected state, so a zero target is measured on that norm
    /// and contributes `‖(P ⊗ Q)ψ‖²` rather than `p²`.
    fn squared_violation(&self, model: &QuantumModel, b: &Behavior) -> f64 {
        self.constraints
            .iter()
            .map(|&(s, target)| {
                if target == 0.0 {
                    let (a, bs, m, n) = s.parts();
                    projected_norm_sqr(model, a, bs, m, n)
                } else {
                    (b.at(s) - target).powi(2)
                }
            })
            .sum()
    }

    /// Value to minimize: negated objective plus weighted squared violations.
    fn merit(&self, x: &[f64], weight: f64) -> f64 {
        let Ok(model) = self.params(x).model() else {
            return f64::NAN;
        };
        let Ok(b) = behavior_from_model(&model) else {
            return f64::NAN;
        };
        match (self.objective)(&b) {
            Ok(v) => -v + weight * self.squared_violation(&model, &b),
            Err(_) => f64::NAN,
        }
    }

    fn residuals(&self, b: &Behavior) -> Vec<ConstraintResidual> {
        self.constraints
            .iter()
            .map(|&(s, target)| ConstraintResidual {
                name: format!("{s} = {target}"),
                target,
                value: b.at(s),
                residual: (b.at(s) - target).abs(),
            })
            .collect()
    }
}

struct RestartOutcome {
    x: Vec<f64>,
    objective: f64,
    max_residual: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
}

fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_restart(problem: &Problem<'_>, cfg: &OptimizationConfig, index: usize) -> RestartOutcome {
    let mut rng = restart_rng(cfg.seed, index);
    let mut x = match (index, &problem.seed_point) {
        (0, Some(p)) => problem.vector(p),
        _ => problem.random_start(&mut rng),
    };
    let nm = NelderMead { max_iters: cfg.max_iters, f_tol: cfg.tol };
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged;

    let mut step = 0.5;
    if problem.constraints.is_empty() {
        let m = nm.minimize(|v| problem.merit(v, 0.0), &x, step);
        iterations += m.iterations;
        evaluations += m.evaluations;
        x = m.x;
        converged = m.converged;
    } else {
        converged = false;
        let mut schedule = cfg.penalty_schedule();
        // final polish at the cap
        schedule.push(cfg.penalty_cap);
        for w in schedule {
            let m = nm.minimize(|v| problem.merit(v, w), &x, step);
            iterations += m.iterations;
            evaluations += m.evaluations;
            x = m.x;
            converged = m.converged;
            step = (step * 0.5).max(1e-3);
        }
    }

    let (objective, max_residual) = match problem.behavior(&x) {
        Ok(b) => (
            (problem.objective)(&b).unwrap_or(f64::NEG_INFINITY),
            problem.residuals(&b).iter().map(|r| r.residual).fold(0.0, f64::max),
        ),
        Err(_) => (f64::NEG_INFINITY, f64::INFINITY),
    };
    RestartOutcome { x, objective, max_residual, converged, iterations, evaluations }
}

fn solve(problem: &Problem<'_>, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| run_restart(problem, cfg, i))
        .collect();

    let feasible = |o: &RestartOutcome| problem.residual_limit.is_none_or(|l| o.max_residual <= l);
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate().skip(1) {
        let b = &outcomes[best];
        let better = match (feasible(o), feasible(b)) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => o.objective > b.objective,
            (false, false) => o.max_residual < b.max_residual,
        };
        if better {
            best = i;
        }
    }
    let winner = &outcomes[best];

    let params = problem.params(&winner.x).canonical();
    let model = params.model()?;
    let behavior = behavior_from_model_compensated(&model)?;
    let objective = (problem.objective)(&behavior)?;
    let constraint_residuals = problem.residuals(&behavior);
    let max_constraint_residual = constraint_residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    let constraints_ok = problem.residual_limit.is_none_or(|l| max_constraint_residual <= l);

    Ok(OptimizationResult {
        objective,
        params,
        model,
        behavior,
        constraint_residuals,
        max_constraint_residual,
        residual_limit: problem.residual_limit,
        delta: chsh_delta(&behavior)?,
        sigma: HardySet::standard().sigma(&behavior),
        converged: winner.converged && constraints_ok,
        stats: RunStats {
            restarts: cfg.restarts,
            converged_restarts: outcomes.iter().filter(|o| o.converged).count(),
            best_restart: best,
            iterations: outcomes.iter().map(|o| o.iterations).sum(),
            evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        },
    })
}

fn chsh_objective(b: &Behavior) -> Result<f64> {
    chsh_delta(b)
}

fn p13_objective(b: &Behavior) -> Result<f64> {
    Ok(b.p(13))
}

fn p14_p15_objective(b: &Behavior) -> Result<f64> {
    Ok(b.p(14) + b.p(15))
}

fn hardy_constraints() -> Vec<(Shorthand, f64)> {
    HardySet::standard().zero_targets.iter().map(|&s| (s, 0.0)).collect()
}

/// Maximizes the signed CHSH sum over the given class of states.
pub fn maximize_chsh(state_class: StateClass, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    solve(
        &Problem {
            theta: state_class.theta(),
            objective: &chsh_objective,
            constraints: Vec::new(),
            residual_limit: None,
            seed_point: None,
        },
        cfg,
    )
}

/// Maximizes `p13` subject to `p4 = p5 = p9 = 0` over all Schmidt angles.
pub fn maximize_hardy(cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    hardy_problem(None, None, cfg)
}

/// As [`maximize_hardy`], with the first restart started from `seed`.
pub fn maximize_hardy_seeded(seed: &AngleParams, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    hardy_problem(None, Some(*seed), cfg)
}

/// As [`maximize_hardy`] with the Schmidt angle held at `theta`.
pub fn maximize_hardy_at(theta: f64, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    if !(0.0..=FRAC_PI_4).contains(&theta) {
        return Err(Error::InvalidConfig(format!("Schmidt angle {theta} outside [0, π/4]")));
    }
    hardy_problem(Some(theta), None, cfg)
}

/// Hardy witness on the maximally entangled state; the optimum is zero.
pub fn maximize_hardy_maxent(cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    hardy_problem(Some(FRAC_PI_4), None, cfg)
}

fn hardy_problem(theta: Option<f64>, seed_point: Option<AngleParams>, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    solve(
        &Problem {
            theta,
            objective: &p13_objective,
            constraints: hardy_constraints(),
            residual_limit: Some(HARDY_RESIDUAL_LIMIT),
            seed_point,
        },
        cfg,
    )
}

/// Maximizes `p14 + p15` subject to `p1 = p4 = p5 = p8 = p9 = p12 = 1/2`.
/// Quantum mechanics forces the optimum to zero.
pub fn ghz_impossibility(cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    ghz_with_target(0.5, cfg)
}

/// Same problem with the six constrained probabilities set to `target`.
pub fn ghz_with_target(target: f64, cfg: &OptimizationConfig) -> Result<OptimizationResult> {
    solve(
        &Problem {
            theta: None,
            objective: &p14_p15_objective,
            constraints: [1, 4, 5, 8, 9, 12].iter().map(|&n| (Shorthand::of(n), target)).collect(),
            residual_limit: Some(GHZ_RESIDUAL_LIMIT),
            seed_point: None,
        },
        cfg,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta: f64,
    pub p13: f64,
    /// `|Δ|` at the row's optimum.
    pub delta: f64,
    pub sigma: f64,
    pub converged: bool,
}

/// Maximizes the Hardy witness at `steps` evenly spaced Schmidt angles in `[from, to]`.
pub fn scan_theta(from: f64, to: f64, steps: usize, cfg: &OptimizationConfig) -> Result<Vec<ScanRow>> {
    if steps < 2 {
        return Err(Error::InvalidConfig("scan needs at least 2 steps".into()));
    }
    if !(0.0 <= from && from <= to && to <= FRAC_PI_4) {
        return Err(Error::InvalidConfig(format!(
            "scan range [{from}, {to}] must lie within [0, π/4]"
        )));
    }
    (0..steps)
        .map(|i| {
            let theta = if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            let r = maximize_hardy_at(theta, cfg)?;
            Ok(ScanRow {
                theta,
                p13: r.behavior.p(13),
                delta: r.delta.abs(),
                sigma: r.sigma,
                converged: r.converged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizationConfig {
        OptimizationConfig { restarts: 8, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(OptimizationConfig::default().validate().is_ok());
        let bad = OptimizationConfig { restarts: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = OptimizationConfig { penalty_growth: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let cfg = OptimizationConfig::from_json_str(r#"{"restarts":4,"max_iters":100,"tol":1e-10,"seed":9}"#).unwrap();
        assert_eq!((cfg.restarts, cfg.max_iters, cfg.seed), (4, 100, 9));
        assert!(OptimizationConfig::from_json_str(r#"{"restart":4}"#).is_err());
    }

    #[test]
    fn penalty_schedule_increases_to_cap() {
        let s = OptimizationConfig::default().penalty_schedule();
        assert_eq!(s[0], 1e3);
        assert_eq!(*s.last().unwrap(), 1e9);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn theta_folding() {
        assert_eq!(fold_theta(0.1), 0.1);
        assert!((fold_theta(FRAC_PI_2 - 0.1) - 0.1).abs() < 1e-15);
        assert!((fold_theta(-0.1) - 0.1).abs() < 1e-15);
        for i in 0..100 {
            let t = fold_theta(i as f64 * 0.37 - 10.0);
            assert!((0.0..=FRAC_PI_4).contains(&t));
        }
    }

    #[test]
    fn state_class_parsing() {
        assert_eq!("maxent".parse::<StateClass>().unwrap(), StateClass::MaximallyEntangled);
        assert_eq!("product".parse::<StateClass>().unwrap(), StateClass::Product);
        assert!("mixed".parse::<StateClass>().is_err());
    }

    #[test]
    fn chsh_maximum_is_reproducible() {
        let a = maximize_chsh(StateClass::Any, &quick()).unwrap();
        let b = maximize_chsh(StateClass::Any, &quick()).unwrap();
        assert_eq!(a, b);
        assert!((a.objective - 2.0 * 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn ghz_feasible_seed() {
        // perfectly correlated settings on the maximally entangled state
        let p = AngleParams { theta: FRAC_PI_4, a1: 0.0, a2: 0.0, b1: 0.0, b2: 0.0 };
        let b = behavior_from_model(&p.model().unwrap()).unwrap();
        for n in [1, 4, 5, 8, 9, 12] {
            assert!((b.p(n) - 0.5).abs() < 1e-15);
        }
        assert!(b.p(14).abs() < 1e-15 && b.p(15).abs() < 1e-15);
    }

    #[test]
    fn scan_argument_errors() {
        assert!(scan_theta(0.0, 0.5, 1, &quick()).is_err());
        assert!(scan_theta(0.0, 1.0, 3, &quick()).is_err());
        assert!(maximize_hardy_at(-0.1, &quick()).is_err());
    }
}
