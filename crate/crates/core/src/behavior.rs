//! Joint-probability tables for two parties, two settings per side and two
//! outcomes per setting, together with the quantities defined on them.
//!
//! Entries are addressed either structurally by `(setting_a, setting_b,
//! outcome_a, outcome_b)` or by their shorthand number `p1..p16`. Shorthand
//! order runs over the setting blocks `(a1,b1), (a1,b2), (a2,b1), (a2,b2)` and,
//! inside each block, over the outcome pairs `++, +-, -+, --`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{check_tolerance, Error, Result};
use crate::report::{Check, ConstraintReport};

/// Default tolerance for validating analytically constructed behaviors.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Maximum allowed disagreement between the two forms of the CHSH sum.
pub const CHSH_FORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    One,
    Two,
}

impl Setting {
    pub const BOTH: [Setting; 2] = [Setting::One, Setting::Two];

    pub fn index(self) -> usize {
        match self {
            Setting::One => 0,
            Setting::Two => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Setting::One,
            1 => Setting::Two,
            _ => panic!("setting index {i} out of range"),
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Self {
        match self {
            Setting::One => Setting::Two,
            Setting::Two => Setting::One,
        }
    }
}

/// Measurement outcome, `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Outcome::Plus,
            1 => Outcome::Minus,
            _ => panic!("outcome index {i} out of range"),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' | 'p' => Some(Outcome::Plus),
            '-' | 'm' | '−' => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Shorthand name `p1..p16` of a joint probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shorthand(u8);

impl Shorthand {
    /// Panics unless `1 <= n <= 16`; usable in constant context.
    pub const fn of(n: u8) -> Self {
        assert!(n >= 1 && n <= 16, "shorthand out of range");
        Shorthand(n)
    }

    pub fn new(n: u8) -> Option<Self> {
        (1..=16).contains(&n).then_some(Shorthand(n))
    }

    pub fn all() -> impl Iterator<Item = Shorthand> {
        (1..=16).map(Shorthand)
    }

    pub fn from_parts(a: Setting, b: Setting, m: Outcome, n: Outcome) -> Self {
        Shorthand((8 * a.index() + 4 * b.index() + 2 * m.index() + n.index()) as u8 + 1)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    /// Zero-based position in shorthand order.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn parts(self) -> (Setting, Setting, Outcome, Outcome) {
        let i = self.index();
        (
            Setting::from_index(i / 8),
            Setting::from_index((i / 4) % 2),
            Outcome::from_index((i / 2) % 2),
            Outcome::from_index(i % 2),
        )
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.strip_prefix('p')?.parse::<u8>().ok().and_then(Self::new)
    }
}

impl fmt::Display for Shorthand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// The sixteen joint probabilities `p(a_j = m, b_k = n)`.
///
/// Values are stored as given: nothing is clamped or renormalized, so every
/// violation stays visible to [`validate`]. Only non-finite entries are
/// rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Behavior {
    probs: [f64; 16],
}

impl Behavior {
    /// Builds a behavior from values listed in shorthand order `p1..p16`.
    pub fn new(probs: [f64; 16]) -> Result<Self> {
        if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
            return Err(Error::Malformed(format!(
                "p{} is not a finite number ({})",
                i + 1,
                probs[i]
            )));
        }
        Ok(Self { probs })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let probs: [f64; 16] = values.try_into().map_err(|_| {
            Error::Malformed(format!("expected 16 probabilities, got {}", values.len()))
        })?;
        Self::new(probs)
    }

    /// Builds a behavior from four setting blocks `[(a1,b1), (a1,b2), (a2,b1), (a2,b2)]`,
    /// each listing outcome pairs `[++, +-, -+, --]`.
    pub fn from_blocks(blocks: [[f64; 4]; 4]) -> Result<Self> {
        let mut probs = [0.0; 16];
        for (bi, block) in blocks.iter().enumerate() {
            probs[4 * bi..4 * bi + 4].copy_from_slice(block);
        }
        Self::new(probs)
    }

    pub fn from_fn(mut f: impl FnMut(Setting, Setting, Outcome, Outcome) -> f64) -> Result<Self> {
        let mut probs = [0.0; 16];
        for s in Shorthand::all() {
            let (a, b, m, n) = s.parts();
            probs[s.index()] = f(a, b, m, n);
        }
        Self::new(probs)
    }

    pub fn get(&self, a: Setting, b: Setting, m: Outcome, n: Outcome) -> f64 {
        self.probs[Shorthand::from_parts(a, b, m, n).index()]
    }

    pub fn at(&self, s: Shorthand) -> f64 {
        self.probs[s.index()]
    }

    /// Value of `p{n}`; panics if `n` is not in `1..=16`.
    pub fn p(&self, n: u8) -> f64 {
        self.at(Shorthand::of(n))
    }

    pub fn as_array(&self) -> &[f64; 16] {
        &self.probs
    }

    /// Outcome pairs `[++, +-, -+, --]` of the block `(a_j, b_k)`.
    pub fn block(&self, a: Setting, b: Setting) -> [f64; 4] {
        let start = 8 * a.index() + 4 * b.index();
        self.probs[start..start + 4].try_into().unwrap()
    }

    /// `p(a_j = m)` summed over the outcomes of `b_k`.
    pub fn marginal_a(&self, a: Setting, m: Outcome, via: Setting) -> f64 {
        Outcome::BOTH.iter().map(|&n| self.get(a, via, m, n)).sum()
    }

    /// `p(b_k = n)` summed over the outcomes of `a_j`.
    pub fn marginal_b(&self, b: Setting, n: Outcome, via: Setting) -> f64 {
        Outcome::BOTH.iter().map(|&m| self.get(via, b, m, n)).sum()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        self.probs
            .iter()
            .zip(other.probs.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Parses the block form `{"blocks": [...]}` or the flat form `{"p1": .., "p16": ..}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(s)?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Malformed("behavior must be a JSON object".into()))?;
        if let Some(blocks) = obj.get("blocks") {
            let behavior = parse_blocks(blocks)?;
            if let Some(flat) = obj.get("flat") {
                let echo = parse_flat(flat.as_object().ok_or_else(|| {
                    Error::Malformed("\"flat\" must be an object".into())
                })?)?;
                if echo != behavior {
                    return Err(Error::Malformed(
                        "\"flat\" echo disagrees with \"blocks\"".into(),
                    ));
                }
            }
            Ok(behavior)
        } else {
            parse_flat(obj)
        }
    }

    /// Block form plus a flat `p1..p16` echo under `"flat"`.
    pub fn to_json_value(&self) -> Value {
        let blocks: Vec<Value> = BLOCK_ORDER
            .iter()
            .map(|&(a, b)| {
                let [pp, pm, mp, mm] = self.block(a, b);
                serde_json::json!({ "pp": pp, "pm": pm, "mp": mp, "mm": mm })
            })
            .collect();
        let flat: Map<String, Value> = Shorthand::all()
            .map(|s| (s.to_string(), Value::from(self.at(s))))
            .collect();
        serde_json::json!({ "blocks": blocks, "flat": flat })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("behavior JSON is serializable")
    }
}

const BLOCK_ORDER: [(Setting, Setting); 4] = [
    (Setting::One, Setting::One),
    (Setting::One, Setting::Two),
    (Setting::Two, Setting::One),
    (Setting::Two, Setting::Two),
];

const PAIR_KEYS: [&str; 4] = ["pp", "pm", "mp", "mm"];

fn number(value: &Value, what: &str) -> Result<f64> {
    value
        .as_f64()
        .ok_or_else(|| Error::Malformed(format!("{what} must be a number")))
}

fn parse_blocks(blocks: &Value) -> Result<Behavior> {
    let blocks = blocks
        .as_array()
        .ok_or_else(|| Error::Malformed("\"blocks\" must be an array".into()))?;
    if blocks.len() != 4 {
        return Err(Error::Malformed(format!(
            "expected 4 setting blocks, got {}",
            blocks.len()
        )));
    }
    let mut out = [[0.0; 4]; 4];
    for (bi, block) in blocks.iter().enumerate() {
        let obj = block
            .as_object()
            .ok_or_else(|| Error::Malformed(format!("block {bi} must be an object")))?;
        for key in obj.keys() {
            if !PAIR_KEYS.contains(&key.as_str()) {
                return Err(Error::Malformed(format!("unknown key {key:?} in block {bi}")));
            }
        }
        for (pi, key) in PAIR_KEYS.iter().enumerate() {
            let v = obj
                .get(*key)
                .ok_or_else(|| Error::Malformed(format!("block {bi} is missing {key:?}")))?;
            out[bi][pi] = number(v, &format!("block {bi} entry {key:?}"))?;
        }
    }
    Behavior::from_blocks(out)
}

fn parse_flat(obj: &Map<String, Value>) -> Result<Behavior> {
    let mut probs = [0.0; 16];
    for key in obj.keys() {
        if Shorthand::parse(key).is_none() {
            return Err(Error::Malformed(format!("unknown key {key:?}")));
        }
    }
    for s in Shorthand::all() {
        let key = s.to_string();
        let v = obj
            .get(&key)
            .ok_or_else(|| Error::Malformed(format!("missing entry {key}")))?;
        probs[s.index()] = number(v, &key)?;
    }
    Behavior::new(probs)
}

impl Serialize for Behavior {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Behavior {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Behavior::from_json_value(&value).map_err(serde::de::Error::custom)
    }
}

/// The four correlation functions `c(a_j, b_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    pub c11: f64,
    pub c12: f64,
    pub c21: f64,
    pub c22: f64,
}

impl CorrelationVector {
    pub fn get(&self, a: Setting, b: Setting) -> f64 {
        match (a, b) {
            (Setting::One, Setting::One) => self.c11,
            (Setting::One, Setting::Two) => self.c12,
            (Setting::Two, Setting::One) => self.c21,
            (Setting::Two, Setting::Two) => self.c22,
        }
    }

    /// `c11 + c12 + c21 - c22`.
    pub fn delta(&self) -> f64 {
        self.c11 + self.c12 + self.c21 - self.c22
    }
}

/// Runs positivity (16), normalization (4) and no-signaling (4) checks.
///
/// The residual of a no-signaling check is the absolute difference between
/// the two ways of computing the same one-side marginal, maximized over the
/// two outcomes.
pub fn validate(b: &Behavior, tol: f64) -> Result<ConstraintReport> {
    check_tolerance(tol)?;
    let mut report = ConstraintReport::new();
    for s in Shorthand::all() {
        report.push(Check::within(format!("positivity {s}"), b.at(s), 0.0, 1.0, tol));
    }
    for (a, bs) in BLOCK_ORDER {
        let sum: f64 = b.block(a, bs).iter().sum();
        report.push(Check::new(
            format!("normalization a{}b{}", a.number(), bs.number()),
            (sum - 1.0).abs(),
            tol,
        ));
    }
    for a in Setting::BOTH {
        let residual = Outcome::BOTH
            .iter()
            .map(|&m| (b.marginal_a(a, m, Setting::One) - b.marginal_a(a, m, Setting::Two)).abs())
            .fold(0.0, f64::max);
        report.push(Check::new(format!("no-signaling a{}", a.number()), residual, tol));
    }
    for bs in Setting::BOTH {
        let residual = Outcome::BOTH
            .iter()
            .map(|&n| (b.marginal_b(bs, n, Setting::One) - b.marginal_b(bs, n, Setting::Two)).abs())
            .fold(0.0, f64::max);
        report.push(Check::new(format!("no-signaling b{}", bs.number()), residual, tol));
    }
    Ok(report)
}

/// Validates and turns a failed report into a precondition error.
pub(crate) fn require_valid(b: &Behavior, tol: f64) -> Result<()> {
    let report = validate(b, tol)?;
    let failure = report.failures().next().map(|c| {
        Error::Precondition(format!(
            "behavior fails {} (residual {:e} > {:e})",
            c.name, c.residual, c.tolerance
        ))
    });
    failure.map_or(Ok(()), Err)
}

/// `p(+,+) + p(-,-) - p(+,-) - p(-,+)` on the block `(a_j, b_k)`.
pub fn correlation(b: &Behavior, a: Setting, bs: Setting) -> f64 {
    let [pp, pm, mp, mm] = b.block(a, bs);
    (pp + mm) - (pm + mp)
}

pub fn correlations(b: &Behavior) -> CorrelationVector {
    CorrelationVector {
        c11: correlation(b, Setting::One, Setting::One),
        c12: correlation(b, Setting::One, Setting::Two),
        c21: correlation(b, Setting::Two, Setting::One),
        c22: correlation(b, Setting::Two, Setting::Two),
    }
}

/// Sum of the eight probabilities `p1, p4, p5, p8, p9, p12, p14, p15`.
pub fn free_sum(b: &Behavior) -> f64 {
    [1, 4, 5, 8, 9, 12, 14, 15].iter().map(|&n| b.p(n)).sum()
}

/// CHSH sum written through the free probabilities, `2 (free_sum - 2)`.
/// Agrees with the correlation form only for normalized behaviors.
pub fn chsh_delta_free_sum(b: &Behavior) -> f64 {
    2.0 * (free_sum(b) - 2.0)
}

/// Signed CHSH sum `c11 + c12 + c21 - c22`.
///
/// Also evaluates [`chsh_delta_free_sum`] and fails with
/// [`Error::NormalizationDefect`] if the two disagree by more than
/// [`CHSH_FORM_TOL`].
pub fn chsh_delta(b: &Behavior) -> Result<f64> {
    let correlation_form = correlations(b).delta();
    let free_sum_form = chsh_delta_free_sum(b);
    if (correlation_form - free_sum_form).abs() > CHSH_FORM_TOL {
        return Err(Error::NormalizationDefect {
            correlation_form,
            free_sum_form,
        });
    }
    Ok(correlation_form)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> Behavior {
        Behavior::new([0.25; 16]).unwrap()
    }

    fn pr() -> Behavior {
        let mut p = [0.0; 16];
        for n in [1, 4, 5, 8, 9, 12, 14, 15] {
            p[n - 1] = 0.5;
        }
        Behavior::new(p).unwrap()
    }

    #[test]
    fn shorthand_convention() {
        use Outcome::*;
        use Setting::*;
        assert_eq!(Shorthand::from_parts(One, One, Plus, Plus).number(), 1);
        assert_eq!(Shorthand::from_parts(One, One, Plus, Minus).number(), 2);
        assert_eq!(Shorthand::from_parts(One, One, Minus, Plus).number(), 3);
        assert_eq!(Shorthand::from_parts(One, Two, Plus, Plus).number(), 5);
        assert_eq!(Shorthand::from_parts(Two, One, Minus, Minus).number(), 12);
        assert_eq!(Shorthand::from_parts(Two, Two, Plus, Plus).number(), 13);
        assert_eq!(Shorthand::from_parts(Two, Two, Minus, Minus).number(), 16);
        for s in Shorthand::all() {
            let (a, b, m, n) = s.parts();
            assert_eq!(Shorthand::from_parts(a, b, m, n), s);
        }
        assert_eq!(Shorthand::parse("p13"), Some(Shorthand::of(13)));
        assert_eq!(Shorthand::parse("p17"), None);
        assert_eq!(Shorthand::parse("q1"), None);
    }

    #[test]
    fn uniform_box_passes_with_zero_residuals() {
        let report = validate(&uniform(), DEFAULT_TOL).unwrap();
        assert_eq!(report.len(), 24);
        assert!(report.all_passed());
        assert!(report.checks.iter().all(|c| c.residual == 0.0));
    }

    #[test]
    fn pr_box_passes() {
        let report = validate(&pr(), DEFAULT_TOL).unwrap();
        assert!(report.all_passed());
        assert_eq!(report.max_residual("no-signaling"), 0.0);
    }

    #[test]
    fn signaling_box_fails_on_b_side() {
        // (a1,b1) concentrated on ++, (a1,b2) on +-, rest uniform. The a-side
        // marginals agree; p(b1=+) is 1 via a1 but 1/2 via a2, likewise b2.
        let b = Behavior::from_blocks([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.25; 4],
            [0.25; 4],
        ])
        .unwrap();
        let report = validate(&b, DEFAULT_TOL).unwrap();
        assert!(report.get("no-signaling a1").unwrap().passed);
        assert!(report.get("no-signaling a2").unwrap().passed);
        let b1 = report.get("no-signaling b1").unwrap();
        let b2 = report.get("no-signaling b2").unwrap();
        assert!(!b1.passed && !b2.passed);
        assert_eq!(b1.residual, 0.5);
        assert_eq!(b2.residual, 0.5);
        assert!(report.max_residual("normalization") == 0.0);
    }

    #[test]
    fn positivity_and_normalization_failures_are_reported() {
        let mut p = [0.25; 16];
        p[0] = -0.1;
        p[1] = 0.85;
        let report = validate(&Behavior::new(p).unwrap(), DEFAULT_TOL).unwrap();
        let pos = report.get("positivity p1").unwrap();
        assert!(!pos.passed);
        assert!((pos.residual - 0.1).abs() < 1e-15);
        let norm = report.get("normalization a1b1").unwrap();
        assert!((norm.residual - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bad_tolerance_is_an_error() {
        assert!(matches!(validate(&uniform(), 0.0), Err(Error::InvalidTolerance(_))));
        assert!(validate(&uniform(), f64::NAN).is_err());
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(Behavior::from_slice(&[0.25; 15]), Err(Error::Malformed(_))));
        let mut p = [0.25; 16];
        p[3] = f64::NAN;
        assert!(matches!(Behavior::new(p), Err(Error::Malformed(_))));
    }

    #[test]
    fn correlations_of_reference_boxes() {
        let c = correlations(&pr());
        assert_eq!((c.c11, c.c12, c.c21, c.c22), (1.0, 1.0, 1.0, -1.0));
        let c = correlations(&uniform());
        assert_eq!((c.c11, c.c12, c.c21, c.c22), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn chsh_values() {
        assert_eq!(chsh_delta(&pr()).unwrap(), 4.0);
        assert_eq!(chsh_delta(&uniform()).unwrap(), 0.0);
        let q = (2.0 + 2f64.sqrt()) / 8.0;
        let mut p = [0.5 - q; 16];
        for n in [1, 4, 5, 8, 9, 12, 14, 15] {
            p[n - 1] = q;
        }
        let d = chsh_delta(&Behavior::new(p).unwrap()).unwrap();
        assert!((d - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_behavior_is_detected() {
        let mut p = [0.25; 16];
        p[12] = 0.5;
        match chsh_delta(&Behavior::new(p).unwrap()) {
            Err(Error::NormalizationDefect { .. }) => {}
            other => panic!("expected normalization defect, got {other:?}"),
        }
    }

    #[test]
    fn json_block_and_flat_forms() {
        let b = pr();
        let text = b.to_json_string();
        assert_eq!(Behavior::from_json_str(&text).unwrap(), b);

        let flat: String = format!(
            "{{{}}}",
            (1..=16)
                .map(|n| format!("\"p{n}\": {}", b.p(n)))
                .collect::<Vec<_>>()
                .join(",")
        );
        assert_eq!(Behavior::from_json_str(&flat).unwrap(), b);
    }

    #[test]
    fn json_rejects_incomplete_input() {
        let missing = r#"{"blocks":[{"pp":1,"pm":0,"mp":0,"mm":0},{"pp":1,"pm":0,"mp":0,"mm":0},{"pp":1,"pm":0,"mp":0,"mm":0},{"pp":1,"pm":0,"mp":0}]}"#;
        assert!(matches!(Behavior::from_json_str(missing), Err(Error::Malformed(_))));
        let three = r#"{"blocks":[{"pp":1,"pm":0,"mp":0,"mm":0}]}"#;
        assert!(Behavior::from_json_str(three).is_err());
        let flat = r#"{"p1":1}"#;
        assert!(Behavior::from_json_str(flat).is_err());
        assert!(matches!(Behavior::from_json_str("{\"blocks\":"), Err(Error::Json(_))));
    }

    #[test]
    fn json_rejects_inconsistent_echo() {
        let mut v = pr().to_json_value();
        v["flat"]["p1"] = Value::from(0.3);
        assert!(Behavior::from_json_value(&v).is_err());
    }
}
