//! Hardy-type nonlocality on the quadruples singled out by the closed-form
//! relations.
//!
//! Each relation `2·w - 1 = Σ positive - Σ negative` ties a dependent
//! "witness" probability `w` to three free probabilities with positive sign
//! (the zero targets) and five with negative sign. When the zero targets
//! vanish, the five negative members sum to `Σ = 1 - 2·w` and the CHSH sum
//! becomes `Δ = 2(Σ - 2) = -(2 + 4·w)`, the same for every quadruple.
//!
//! Quantum mechanics caps the witness at `τ⁻⁵` (τ the golden mean), while
//! no-signaling alone allows up to `1/2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::behavior::{chsh_delta, require_valid, Behavior, Shorthand};
use crate::error::{check_tolerance, Result};
use crate::linsys::closed_forms;
use crate::report::Check;

/// Golden mean `(1 + √5)/2`.
pub fn golden_mean() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// `τ^(-k)`.
pub fn golden_inverse_power(k: i32) -> f64 {
    golden_mean().powi(-k)
}

/// Largest witness probability quantum mechanics allows under the Hardy
/// premises, `τ⁻⁵ ≈ 0.0901699`.
pub fn quantum_witness_max() -> f64 {
    golden_inverse_power(5)
}

/// Lower end of the quantum window for Σ, `1 - 2τ⁻⁵ ≈ 0.8196601`.
pub fn quantum_sigma_min() -> f64 {
    1.0 - 2.0 * quantum_witness_max()
}

/// `|Δ|` at the quantum Hardy optimum, `2 + 4τ⁻⁵ ≈ 2.3606798`.
pub fn quantum_hardy_delta() -> f64 {
    2.0 + 4.0 * quantum_witness_max()
}

/// A witness probability with its three zero targets and five complementary
/// free probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HardySet {
    pub witness: Shorthand,
    pub zero_targets: [Shorthand; 3],
    /// Free probabilities entering the relation with negative sign; their sum is Σ.
    pub complement: [Shorthand; 5],
}

impl HardySet {
    /// The set whose witness is `p13`, with zero targets `p4, p5, p9`.
    pub fn standard() -> Self {
        Self::for_witness(Shorthand::of(13)).expect("p13 is a witness")
    }

    pub fn for_witness(witness: Shorthand) -> Option<Self> {
        hardy_sets().into_iter().find(|s| s.witness == witness)
    }

    pub fn zero_residual(&self, b: &Behavior) -> f64 {
        self.zero_targets.iter().map(|&s| b.at(s).abs()).fold(0.0, f64::max)
    }

    pub fn zero_sum(&self, b: &Behavior) -> f64 {
        self.zero_targets.iter().map(|&s| b.at(s)).sum()
    }

    /// Σ, the sum of the complementary free probabilities.
    pub fn sigma(&self, b: &Behavior) -> f64 {
        self.complement.iter().map(|&s| b.at(s)).sum()
    }
}

impl fmt::Display for HardySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [z0, z1, z2] = self.zero_targets;
        write!(f, "{{{z0},{z1},{z2} | {}}}", self.witness)
    }
}

/// The eight Hardy quadruples, one per closed-form relation.
pub fn hardy_sets() -> [HardySet; 8] {
    closed_forms().map(|form| {
        let pos: Vec<Shorthand> = form.positive().collect();
        let neg: Vec<Shorthand> = form.negative().collect();
        HardySet {
            witness: form.dependent,
            zero_targets: pos.try_into().expect("three positive coefficients"),
            complement: neg.try_into().expect("five negative coefficients"),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardyClass {
    /// Witness within the quantum cap. Necessary for a quantum realization,
    /// not sufficient.
    QuantumConsistent,
    /// Above the quantum cap but allowed by no-signaling.
    GeneralProbabilisticOnly,
    /// Above the no-signaling cap of 1/2.
    Infeasible,
}

impl fmt::Display for HardyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HardyClass::QuantumConsistent => "quantum-consistent",
            HardyClass::GeneralProbabilisticOnly => "general-probabilistic-only",
            HardyClass::Infeasible => "infeasible",
        })
    }
}

/// Classifies a witness value; monotone non-decreasing in `witness`.
pub fn classify(witness: f64, tol: f64) -> HardyClass {
    if witness <= quantum_witness_max() + tol {
        HardyClass::QuantumConsistent
    } else if witness <= 0.5 + tol {
        HardyClass::GeneralProbabilisticOnly
    } else {
        HardyClass::Infeasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub witness_name: String,
    pub zero_target_names: [String; 3],
    /// Largest absolute value among the zero targets.
    pub zero_residual: f64,
    pub premises_satisfied: bool,
    pub witness: f64,
    /// `0 <= witness <= 1/2`.
    pub causality_bound: Check,
    pub delta: f64,
    pub delta_abs: f64,
    /// `| |Δ| - (2 + 4·witness) |`.
    pub delta_identity_residual: f64,
    pub sigma: f64,
    /// `| Σ - (1 - 2·witness) |`.
    pub sigma_identity_residual: f64,
    /// `witness - Σ zero targets`; positive means the CH-type inequality is violated.
    pub ch_violation: f64,
    /// `None` when the premises are not satisfied.
    pub classification: Option<HardyClass>,
}

impl fmt::Display for HardyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = match self.classification {
            Some(c) => c.to_string(),
            None => "Hardy premises not satisfied".to_string(),
        };
        write!(
            f,
            "{{{} | {}}}: zeros max {:.3e}, witness {:.7}, |Δ| {:.7} (identity residual {:.1e}), \
             Σ {:.7} (identity residual {:.1e}), CH {:+.7}: {}",
            self.zero_target_names.join(","),
            self.witness_name,
            self.zero_residual,
            self.witness,
            self.delta_abs,
            self.delta_identity_residual,
            self.sigma,
            self.sigma_identity_residual,
            self.ch_violation,
            class
        )
    }
}

/// Evaluates the Hardy premises, causality window, CHSH and Σ identities,
/// and the quantum/general-probabilistic classification for one set.
///
/// Numeric fields are filled in even when the zero targets exceed `tol`; the
/// report is then marked as not satisfying the premises.
pub fn analyze(b: &Behavior, set: &HardySet, tol: f64) -> Result<HardyReport> {
    check_tolerance(tol)?;
    require_valid(b, tol)?;
    let witness = b.at(set.witness);
    let zero_residual = set.zero_residual(b);
    let premises_satisfied = zero_residual <= tol;
    let delta = chsh_delta(b)?;
    let sigma = set.sigma(b);
    Ok(HardyReport {
        witness_name: set.witness.to_string(),
        zero_target_names: set.zero_targets.map(|s| s.to_string()),
        zero_residual,
        premises_satisfied,
        witness,
        causality_bound: Check::within(format!("0 <= {} <= 1/2", set.witness), witness, 0.0, 0.5, tol),
        delta,
        delta_abs: delta.abs(),
        delta_identity_residual: (delta.abs() - (2.0 + 4.0 * witness)).abs(),
        sigma,
        sigma_identity_residual: (sigma - (1.0 - 2.0 * witness)).abs(),
        ch_violation: ch_inequality(b, set),
        classification: premises_satisfied.then(|| classify(witness, tol)),
    })
}

pub fn analyze_all(b: &Behavior, tol: f64) -> Result<Vec<HardyReport>> {
    hardy_sets().iter().map(|s| analyze(b, s, tol)).collect()
}

/// `witness - (sum of zero targets)`; positive values violate the CH-type inequality.
pub fn ch_inequality(b: &Behavior, set: &HardySet) -> f64 {
    b.at(set.witness) - set.zero_sum(b)
}

/// `(|Δ| - 2)/2`, the CHSH violation normalized to the local bound.
pub fn normalized_chsh_violation(b: &Behavior) -> Result<f64> {
    Ok((chsh_delta(b)?.abs() - 2.0) / 2.0)
}
