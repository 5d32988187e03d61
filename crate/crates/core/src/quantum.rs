//! Behaviors generated by projective spin measurements on a two-qubit pure
//! state.
//!
//! Basis order is `|00>, |01>, |10>, |11>` with the first qubit on side A and
//! `|0>` the `+1` eigenstate of the z spin component. A measurement direction
//! is a unit Bloch vector `n`; its outcome projectors are `(I ± n·σ)/2`.
//!
//! Operators of the two sides act on different tensor factors, so they
//! commute and no separate compatibility handling is needed.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Outcome, Setting, Side};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for unit norms, projector identities and imaginary residues.
pub const MODEL_TOL: f64 = 1e-12;

/// Unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction([f64; 3]);

impl Direction {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > MODEL_TOL {
            return Err(Error::InvalidModel(format!(
                "direction {v:?} has norm {norm}, expected 1"
            )));
        }
        Ok(Self(v))
    }

    /// Rescales a non-zero vector to unit length.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidModel(format!("cannot normalize {v:?}")));
        }
        Ok(Self(v.map(|x| x / norm)))
    }

    /// Direction in the x–z plane at `angle` from +z towards +x.
    pub fn planar(angle: f64) -> Self {
        Self([angle.sin(), 0.0, angle.cos()])
    }

    pub fn z() -> Self {
        Self([0.0, 0.0, 1.0])
    }

    pub fn x() -> Self {
        Self([1.0, 0.0, 0.0])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if let Ok(d) = Self::normalized(v) {
                return d;
            }
        }
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        Direction::new(v).map_err(serde::de::Error::custom)
    }
}

/// 2×2 rank-one orthogonal projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector([[C64; 2]; 2]);

impl Projector {
    /// `(I + s n·σ)/2` with `s = ±1` the outcome.
    pub fn for_outcome(d: &Direction, outcome: Outcome) -> Self {
        let [x, y, z] = d.0;
        let s = 0.5 * outcome.value();
        Self([
            [C64::new(0.5 + s * z, 0.0), C64::new(s * x, -s * y)],
            [C64::new(s * x, s * y), C64::new(0.5 - s * z, 0.0)],
        ])
    }

    pub fn matrix(&self) -> &[[C64; 2]; 2] {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Largest entry of `|P - P†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                e = e.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        e
    }

    /// Largest entry of `|P² - P|`.
    pub fn idempotency_error(&self) -> f64 {
        let mut e = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let sq = self.0[i][0] * self.0[0][j] + self.0[i][1] * self.0[1][j];
                e = e.max((sq - self.0[i][j]).norm());
            }
        }
        e
    }
}

/// Measurement directions, two per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub a1: Direction,
    pub a2: Direction,
    pub b1: Direction,
    pub b2: Direction,
}

impl Settings {
    pub fn all(d: Direction) -> Self {
        Self { a1: d, a2: d, b1: d, b2: d }
    }

    /// All four directions in the x–z plane.
    pub fn planar(a1: f64, a2: f64, b1: f64, b2: f64) -> Self {
        Self {
            a1: Direction::planar(a1),
            a2: Direction::planar(a2),
            b1: Direction::planar(b1),
            b2: Direction::planar(b2),
        }
    }

    pub fn get(&self, side: Side, setting: Setting) -> &Direction {
        match (side, setting) {
            (Side::A, Setting::One) => &self.a1,
            (Side::A, Setting::Two) => &self.a2,
            (Side::B, Setting::One) => &self.b1,
            (Side::B, Setting::Two) => &self.b2,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            a1: Direction::random(rng),
            a2: Direction::random(rng),
            b1: Direction::random(rng),
            b2: Direction::random(rng),
        }
    }
}

/// A normalized two-qubit pure state with four measurement directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumModel {
    state: [C64; 4],
    settings: Settings,
}

impl QuantumModel {
    pub fn new(state: [C64; 4], settings: Settings) -> Result<Self> {
        let norm = state.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > MODEL_TOL {
            return Err(Error::InvalidModel(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { state, settings })
    }

    /// `cos θ |00> + sin θ |11>`.
    pub fn schmidt(theta: f64, settings: Settings) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::new(
            [C64::new(c, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)],
            settings,
        )
    }

    /// `(|01> - |10>)/√2`.
    pub fn singlet(settings: Settings) -> Result<Self> {
        let h = FRAC_1_SQRT_2;
        Self::new(
            [C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, 0.0)],
            settings,
        )
    }

    /// Tensor product of two single-qubit states, each normalized first.
    pub fn product(a: [C64; 2], b: [C64; 2], settings: Settings) -> Result<Self> {
        let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
        let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
        if !(na > 0.0 && nb > 0.0) {
            return Err(Error::InvalidModel("zero single-qubit factor".into()));
        }
        let a = a.map(|c| c / na);
        let b = b.map(|c| c / nb);
        Self::new([a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]], settings)
    }

    /// Gaussian random state and isotropic random directions.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let raw: [C64; 4] =
            std::array::from_fn(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let settings = Settings::random(rng);
        Self::new(raw.map(|c| c / norm), settings).expect("normalized random state")
    }

    /// Random product state with random directions.
    pub fn random_product<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut qubit = || -> [C64; 2] {
            std::array::from_fn(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        };
        let (a, b) = (qubit(), qubit());
        let settings = Settings::random(rng);
        Self::product(a, b, settings).expect("non-degenerate random product state")
    }

    pub fn state(&self) -> &[C64; 4] {
        &self.state
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn projector(&self, side: Side, setting: Setting, outcome: Outcome) -> Projector {
        Projector::for_outcome(self.settings.get(side, setting), outcome)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let wire: ModelJson = serde_json::from_str(s)?;
        wire.try_into()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelJson::from(*self)).expect("model JSON is serializable")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateJson {
    re: [f64; 4],
    im: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    state: StateJson,
    settings: Settings,
}

impl From<QuantumModel> for ModelJson {
    fn from(m: QuantumModel) -> Self {
        Self {
            state: StateJson {
                re: m.state.map(|c| c.re),
                im: m.state.map(|c| c.im),
            },
            settings: m.settings,
        }
    }
}

impl TryFrom<ModelJson> for QuantumModel {
    type Error = Error;

    fn try_from(w: ModelJson) -> Result<Self> {
        let state = std::array::from_fn(|i| C64::new(w.state.re[i], w.state.im[i]));
        QuantumModel::new(state, w.settings)
    }
}

impl Serialize for QuantumModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuantumModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = ModelJson::deserialize(d)?;
        w.try_into().map_err(serde::de::Error::custom)
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Default)]
struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

impl CompensatedSum {
    fn add_part(acc: &mut (f64, f64), x: f64) {
        let t = acc.0 + x;
        if acc.0.abs() >= x.abs() {
            acc.1 += (acc.0 - t) + x;
        } else {
            acc.1 += (x - t) + acc.0;
        }
        acc.0 = t;
    }

    fn add(&mut self, z: C64) {
        Self::add_part(&mut self.re, z.re);
        Self::add_part(&mut self.im, z.im);
    }

    fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

/// `<ψ| P ⊗ Q |ψ>` as a complex number.
fn expectation(state: &[C64; 4], pa: &[[C64; 2]; 2], pb: &[[C64; 2]; 2], compensated: bool) -> C64 {
    if compensated {
        let mut acc = CompensatedSum::default();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        acc.add(state[2 * i + j].conj() * pa[i][k] * pb[j][l] * state[2 * k + l]);
                    }
                }
            }
        }
        acc.value()
    } else {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let mut row = C64::new(0.0, 0.0);
                for k in 0..2 {
                    for l in 0..2 {
                        row += pa[i][k] * pb[j][l] * state[2 * k + l];
                    }
                }
                acc += state[2 * i + j].conj() * row;
            }
        }
        acc
    }
}

fn real_probability(z: C64) -> Result<f64> {
    if z.im.abs() > MODEL_TOL {
        return Err(Error::Numerical(format!(
            "Born-rule expectation has imaginary part {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `p(a_j = m, b_k = n) = <ψ| P_m(a_j) ⊗ P_n(b_k) |ψ>`.
pub fn joint_probability(
    model: &QuantumModel,
    a: Setting,
    b: Setting,
    m: Outcome,
    n: Outcome,
) -> Result<f64> {
    joint(model, a, b, m, n, false)
}

fn joint(model: &QuantumModel, a: Setting, b: Setting, m: Outcome, n: Outcome, compensated: bool) -> Result<f64> {
    let pa = model.projector(Side::A, a, m);
    let pb = model.projector(Side::B, b, n);
    real_probability(expectation(&model.state, pa.matrix(), pb.matrix(), compensated))
}

/// `‖(P_m(a_j) ⊗ P_n(b_k)) |ψ>‖²`, equal to the joint probability since the
/// projectors are idempotent and Hermitian. Never negative, and accurate
/// relative to its own size near zero.
pub fn projected_norm_sqr(model: &QuantumModel, a: Setting, b: Setting, m: Outcome, n: Outcome) -> f64 {
    let pa = model.projector(Side::A, a, m);
    let pb = model.projector(Side::B, b, n);
    let (pa, pb) = (pa.matrix(), pb.matrix());
    let mut total = 0.0;
    for row_a in pa {
        for row_b in pb {
            let mut v = C64::new(0.0, 0.0);
            for (k, x) in row_a.iter().enumerate() {
                for (l, y) in row_b.iter().enumerate() {
                    v += x * y * model.state[2 * k + l];
                }
            }
            total += v.norm_sqr();
        }
    }
    total
}

/// The behavior whose 16 entries are Born-rule joint probabilities.
pub fn behavior_from_model(model: &QuantumModel) -> Result<Behavior> {
    let mut probs = [0.0; 16];
    for s in crate::behavior::Shorthand::all() {
        let (a, b, m, n) = s.parts();
        probs[s.index()] = joint(model, a, b, m, n, false)?;
    }
    Behavior::new(probs)
}

/// Same as [`behavior_from_model`] with compensated summation of every
/// quadratic form.
pub fn behavior_from_model_compensated(model: &QuantumModel) -> Result<Behavior> {
    let mut probs = [0.0; 16];
    for s in crate::behavior::Shorthand::all() {
        let (a, b, m, n) = s.parts();
        probs[s.index()] = joint(model, a, b, m, n, true)?;
    }
    Behavior::new(probs)
}

/// One-side probability `<ψ| P ⊗ I |ψ>` (or `I ⊗ P` for side B), which does
/// not refer to any setting on the other side.
pub fn marginal_from_model(model: &QuantumModel, side: Side, setting: Setting, outcome: Outcome) -> f64 {
    let identity = [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ];
    let p = model.projector(side, setting, outcome);
    let z = match side {
        Side::A => expectation(&model.state, p.matrix(), &identity, false),
        Side::B => expectation(&model.state, &identity, p.matrix(), false),
    };
    z.re
}
