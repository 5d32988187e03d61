//! Reference behaviors and the local-polytope membership test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::behavior::{correlations, require_valid, Behavior, Outcome, Setting};
use crate::error::{check_tolerance, Error, Result};
use crate::linsys::{behavior_from_free, FreeSet};
use crate::simplex;

/// Which of the two sign-reversed extremal sets to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Free probabilities carry the large value.
    Primary,
    /// Dependent probabilities carry the large value.
    Reversed,
}

impl Variant {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Variant::Primary),
            2 => Ok(Variant::Reversed),
            _ => Err(Error::Malformed(format!("variant must be 1 or 2, got {n}"))),
        }
    }
}

fn two_level(variant: Variant, high: f64, low: f64) -> Behavior {
    let free = match variant {
        Variant::Primary => high,
        Variant::Reversed => low,
    };
    behavior_from_free(&FreeSet::constant(free)).expect("finite constant free set")
}

/// Popescu–Rohrlich box: `1/2` on the free probabilities and `0` elsewhere
/// (or the reverse), giving a CHSH sum of `±4`.
pub fn pr_box(variant: Variant) -> Behavior {
    two_level(variant, 0.5, 0.0)
}

/// Constant-level quantum behavior with CHSH sum `±2√2`.
pub fn quantum_extremal_box(variant: Variant) -> Behavior {
    let q = (2.0 + 2f64.sqrt()) / 8.0;
    two_level(variant, q, 0.5 - q)
}

pub fn uniform_box() -> Behavior {
    Behavior::new([0.25; 16]).expect("finite")
}

/// Local deterministic strategy: a fixed outcome for each of the four measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicAssignment {
    pub a1: Outcome,
    pub a2: Outcome,
    pub b1: Outcome,
    pub b2: Outcome,
}

impl DeterministicAssignment {
    pub fn new(a1: Outcome, a2: Outcome, b1: Outcome, b2: Outcome) -> Self {
        Self { a1, a2, b1, b2 }
    }

    /// All 16 assignments, `++++` first.
    pub fn all() -> [Self; 16] {
        std::array::from_fn(|i| {
            let bit = |k: usize| Outcome::from_index((i >> (3 - k)) & 1);
            Self::new(bit(0), bit(1), bit(2), bit(3))
        })
    }

    pub fn a(&self, s: Setting) -> Outcome {
        match s {
            Setting::One => self.a1,
            Setting::Two => self.a2,
        }
    }

    pub fn b(&self, s: Setting) -> Outcome {
        match s {
            Setting::One => self.b1,
            Setting::Two => self.b2,
        }
    }
}

impl fmt::Display for DeterministicAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in [self.a1, self.a2, self.b1, self.b2] {
            write!(f, "{}", o.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for DeterministicAssignment {
    type Err = Error;

    /// Four outcome symbols in the order `a1 a2 b1 b2`, e.g. `++-+`.
    fn from_str(s: &str) -> Result<Self> {
        let outcomes: Vec<Outcome> = s
            .chars()
            .map(|c| {
                Outcome::from_symbol(c)
                    .ok_or_else(|| Error::Malformed(format!("bad outcome symbol {c:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        match outcomes[..] {
            [a1, a2, b1, b2] => Ok(Self::new(a1, a2, b1, b2)),
            _ => Err(Error::Malformed(format!(
                "deterministic assignment needs 4 outcomes, got {s:?}"
            ))),
        }
    }
}

pub fn deterministic_box(d: DeterministicAssignment) -> Behavior {
    Behavior::from_fn(|a, b, m, n| {
        if d.a(a) == m && d.b(b) == n {
            1.0
        } else {
            0.0
        }
    })
    .expect("finite")
}

/// Builds a reference behavior from its command-line name:
/// `pr`, `pr:2`, `uniform`, `det:<a1a2b1b2>`, `qextremal`, `qextremal:2`.
pub fn by_name(name: &str) -> Result<Behavior> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let variant = || -> Result<Variant> {
        match arg {
            None => Ok(Variant::Primary),
            Some(a) => Variant::from_number(
                a.parse()
                    .map_err(|_| Error::Malformed(format!("bad variant {a:?}")))?,
            ),
        }
    };
    match head {
        "pr" => Ok(pr_box(variant()?)),
        "qextremal" => Ok(quantum_extremal_box(variant()?)),
        "uniform" if arg.is_none() => Ok(uniform_box()),
        "det" => {
            let assignment = arg.ok_or_else(|| Error::Malformed("det needs an assignment, e.g. det:++-+".into()))?;
            Ok(deterministic_box(assignment.parse()?))
        }
        _ => Err(Error::Malformed(format!("unknown box {name:?}"))),
    }
}

/// One of the eight CHSH expressions: the four correlations summed with the
/// `negated` one subtracted, times an overall `sign`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshWitness {
    pub negated: (Setting, Setting),
    pub sign: i8,
    pub value: f64,
}

impl fmt::Display for ChshWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = [(1, 1), (1, 2), (2, 1), (2, 2)]
            .iter()
            .map(|&(j, k)| {
                let neg = (self.negated.0.number(), self.negated.1.number()) == (j, k);
                let s = if neg == (self.sign > 0) { '-' } else { '+' };
                format!("{s}c{j}{k}")
            })
            .collect();
        write!(f, "{} = {}", terms.join(" "), self.value)
    }
}

/// All eight CHSH expressions, ordered by negated term then sign.
pub fn chsh_variants(b: &Behavior) -> [ChshWitness; 8] {
    let c = correlations(b);
    let total = c.c11 + c.c12 + c.c21 + c.c22;
    let terms = [
        (Setting::One, Setting::One),
        (Setting::One, Setting::Two),
        (Setting::Two, Setting::One),
        (Setting::Two, Setting::Two),
    ];
    std::array::from_fn(|i| {
        let negated = terms[i / 2];
        let sign: i8 = if i % 2 == 0 { 1 } else { -1 };
        let value = f64::from(sign) * (total - 2.0 * c.get(negated.0, negated.1));
        ChshWitness { negated, sign, value }
    })
}

/// The largest of the eight CHSH expressions.
pub fn max_chsh(b: &Behavior) -> ChshWitness {
    chsh_variants(b)
        .into_iter()
        .fold(None::<ChshWitness>, |best, w| match best {
            Some(bw) if bw.value >= w.value => Some(bw),
            _ => Some(w),
        })
        .unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityVerdict {
    pub local: bool,
    /// Max-norm distance from the behavior to the local polytope.
    pub distance: f64,
    /// Mixture weights over [`DeterministicAssignment::all`] of a closest local behavior.
    pub weights: Vec<f64>,
    /// Largest CHSH expression; reported when the behavior is not local.
    pub witness: Option<ChshWitness>,
}

/// Decides whether `b` lies within `tol` (max-norm) of a mixture of the 16
/// deterministic boxes.
///
/// Solves `min t` over weights `w >= 0, Σ w = 1` with
/// `|b_i - Σ_d w_d D_d,i| <= t` for all 16 entries.
pub fn is_local(b: &Behavior, tol: f64) -> Result<LocalityVerdict> {
    check_tolerance(tol)?;
    require_valid(b, tol)?;

    let det: Vec<[f64; 16]> = DeterministicAssignment::all()
        .iter()
        .map(|&d| *deterministic_box(d).as_array())
        .collect();
    // Columns: w (16) | t | s_upper (16) | s_lower (16)
    let n = 16 + 1 + 16 + 16;
    let t_col = 16;
    let mut a = Vec::with_capacity(33);
    let mut rhs = Vec::with_capacity(33);
    let p = b.as_array();
    for i in 0..16 {
        // Σ w D - t + s_upper = b
        let mut row = vec![0.0; n];
        for (d, box_) in det.iter().enumerate() {
            row[d] = box_[i];
        }
        row[t_col] = -1.0;
        row[17 + i] = 1.0;
        a.push(row);
        rhs.push(p[i]);
        // Σ w D + t - s_lower = b
        let mut row = vec![0.0; n];
        for (d, box_) in det.iter().enumerate() {
            row[d] = box_[i];
        }
        row[t_col] = 1.0;
        row[33 + i] = -1.0;
        a.push(row);
        rhs.push(p[i]);
    }
    let mut row = vec![0.0; n];
    row[..16].fill(1.0);
    a.push(row);
    rhs.push(1.0);

    let mut cost = vec![0.0; n];
    cost[t_col] = 1.0;
    let sol = simplex::minimize(&cost, &a, &rhs).map_err(|e| {
        Error::Numerical(format!("locality program failed to solve: {e:?}"))
    })?;
    let distance = sol.objective.max(0.0);
    let local = distance <= tol;
    Ok(LocalityVerdict {
        local,
        distance,
        weights: sol.x[..16].to_vec(),
        witness: (!local).then(|| max_chsh(b)),
    })
}
