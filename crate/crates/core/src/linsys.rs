//! The normalization and no-signaling equations as an integer linear system,
//! its exact rank, and the solution for eight dependent probabilities in
//! terms of the eight free ones.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::behavior::{Behavior, Shorthand};
use crate::error::{check_tolerance, Error, Result};
use crate::report::{Check, ConstraintReport};

/// Free probabilities, in the order used for arrays of [`FreeSet`] values.
pub const FREE: [Shorthand; 8] = [
    Shorthand::of(1),
    Shorthand::of(4),
    Shorthand::of(5),
    Shorthand::of(8),
    Shorthand::of(9),
    Shorthand::of(12),
    Shorthand::of(14),
    Shorthand::of(15),
];

/// Dependent probabilities, in the order used for arrays of [`DependentSet`] values.
pub const DEPENDENT: [Shorthand; 8] = [
    Shorthand::of(2),
    Shorthand::of(3),
    Shorthand::of(6),
    Shorthand::of(7),
    Shorthand::of(10),
    Shorthand::of(11),
    Shorthand::of(13),
    Shorthand::of(16),
];

/// Maximum row residual tolerated when the solver checks its own output.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

/// One closed-form relation `dependent = (1 + Σ coefficients[i] * FREE[i]) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedForm {
    pub dependent: Shorthand,
    pub coefficients: [i8; 8],
}

impl ClosedForm {
    pub fn evaluate(&self, u: &[f64; 8]) -> f64 {
        let s: f64 = self
            .coefficients
            .iter()
            .zip(u)
            .map(|(&c, &x)| f64::from(c) * x)
            .sum();
        0.5 * (1.0 + s)
    }

    /// Free probabilities entering with coefficient `+1`.
    pub fn positive(&self) -> impl Iterator<Item = Shorthand> + '_ {
        self.coefficients
            .iter()
            .zip(FREE)
            .filter(|(c, _)| **c > 0)
            .map(|(_, s)| s)
    }

    /// Free probabilities entering with coefficient `-1`.
    pub fn negative(&self) -> impl Iterator<Item = Shorthand> + '_ {
        self.coefficients
            .iter()
            .zip(FREE)
            .filter(|(c, _)| **c < 0)
            .map(|(_, s)| s)
    }
}

const fn closed(dependent: u8, coefficients: [i8; 8]) -> ClosedForm {
    ClosedForm {
        dependent: Shorthand::of(dependent),
        coefficients,
    }
}

//                        p1  p4  p5  p8  p9 p12 p14 p15
const CLOSED_FORMS: [ClosedForm; 8] = [
    closed(2, [-1, -1, 1, -1, -1, 1, 1, -1]),
    closed(3, [-1, -1, -1, 1, 1, -1, -1, 1]),
    closed(6, [1, -1, -1, -1, -1, 1, 1, -1]),
    closed(7, [-1, 1, -1, -1, 1, -1, -1, 1]),
    closed(10, [-1, 1, 1, -1, -1, -1, 1, -1]),
    closed(11, [1, -1, -1, 1, -1, -1, -1, 1]),
    closed(13, [-1, 1, 1, -1, 1, -1, -1, -1]),
    closed(16, [1, -1, -1, 1, -1, 1, -1, -1]),
];

/// The eight closed-form relations, one per dependent probability, in [`DEPENDENT`] order.
pub fn closed_forms() -> &'static [ClosedForm; 8] {
    &CLOSED_FORMS
}

/// Twelve equations over sixteen unknowns: four block normalizations
/// followed by eight marginal equalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMatrix {
    rows: [[i8; 16]; 12],
    rhs: [i8; 12],
}

impl ConstraintMatrix {
    pub fn rows(&self) -> &[[i8; 16]; 12] {
        &self.rows
    }

    pub fn rhs(&self) -> &[i8; 12] {
        &self.rhs
    }

    /// Coefficients as `i64` rows, for feeding into [`integer_rank`].
    pub fn to_i64_rows(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&c| i64::from(c)).collect())
            .collect()
    }

    /// `row · p - rhs` for each row.
    pub fn residuals(&self, p: &[f64; 16]) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (i, (row, &rhs)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let lhs: f64 = row.iter().zip(p).map(|(&c, &x)| f64::from(c) * x).sum();
            out[i] = lhs - f64::from(rhs);
        }
        out
    }

    pub fn max_residual(&self, p: &[f64; 16]) -> f64 {
        self.residuals(p).iter().map(|r| r.abs()).fold(0.0, f64::max)
    }
}

fn row(terms: &[(u8, i8)], rhs: i8) -> ([i8; 16], i8) {
    let mut r = [0i8; 16];
    for &(n, c) in terms {
        r[Shorthand::of(n).index()] = c;
    }
    (r, rhs)
}

pub fn build_matrix() -> ConstraintMatrix {
    let table = [
        row(&[(1, 1), (2, 1), (3, 1), (4, 1)], 1),
        row(&[(5, 1), (6, 1), (7, 1), (8, 1)], 1),
        row(&[(9, 1), (10, 1), (11, 1), (12, 1)], 1),
        row(&[(13, 1), (14, 1), (15, 1), (16, 1)], 1),
        row(&[(1, 1), (2, 1), (5, -1), (6, -1)], 0),
        row(&[(3, 1), (4, 1), (7, -1), (8, -1)], 0),
        row(&[(9, 1), (10, 1), (13, -1), (14, -1)], 0),
        row(&[(11, 1), (12, 1), (15, -1), (16, -1)], 0),
        row(&[(1, 1), (3, 1), (9, -1), (11, -1)], 0),
        row(&[(2, 1), (4, 1), (10, -1), (12, -1)], 0),
        row(&[(5, 1), (7, 1), (13, -1), (15, -1)], 0),
        row(&[(6, 1), (8, 1), (14, -1), (16, -1)], 0),
    ];
    let mut rows = [[0i8; 16]; 12];
    let mut rhs = [0i8; 12];
    for (i, (r, b)) in table.into_iter().enumerate() {
        rows[i] = r;
        rhs[i] = b;
    }
    ConstraintMatrix { rows, rhs }
}

pub fn rank(m: &ConstraintMatrix) -> usize {
    integer_rank(&m.to_i64_rows())
}

/// Exact rank by fraction-free (Bareiss) elimination.
///
/// Every intermediate entry is a minor of the input, so the divisions are
/// exact and no tolerance is involved.
pub fn integer_rank<R: AsRef<[i64]>>(rows: &[R]) -> usize {
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.as_ref().iter().map(|&x| i128::from(x)).collect())
        .collect();
    let n_rows = a.len();
    let n_cols = a.first().map_or(0, Vec::len);
    assert!(a.iter().all(|r| r.len() == n_cols), "ragged matrix");

    let mut prev = 1i128;
    let mut r = 0;
    for col in 0..n_cols {
        if r == n_rows {
            break;
        }
        let Some(pivot) = (r..n_rows).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(r, pivot);
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            let factor = row[col];
            for c in col + 1..n_cols {
                let num = pivot_row[col] * row[c] - factor * pivot_row[c];
                debug_assert_eq!(num % prev, 0, "Bareiss division must be exact");
                row[c] = num / prev;
            }
            row[col] = 0;
        }
        prev = pivot_row[col];
        r += 1;
    }
    r
}

/// The eight free probabilities `p1, p4, p5, p8, p9, p12, p14, p15`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSet {
    pub p1: f64,
    pub p4: f64,
    pub p5: f64,
    pub p8: f64,
    pub p9: f64,
    pub p12: f64,
    pub p14: f64,
    pub p15: f64,
}

impl FreeSet {
    /// Values in [`FREE`] order.
    pub fn from_array(v: [f64; 8]) -> Self {
        let [p1, p4, p5, p8, p9, p12, p14, p15] = v;
        Self { p1, p4, p5, p8, p9, p12, p14, p15 }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.p1, self.p4, self.p5, self.p8, self.p9, self.p12, self.p14, self.p15,
        ]
    }

    pub fn constant(x: f64) -> Self {
        Self::from_array([x; 8])
    }

    pub fn of_behavior(b: &Behavior) -> Self {
        Self::from_array(FREE.map(|s| b.at(s)))
    }

    pub fn get(&self, s: Shorthand) -> Option<f64> {
        FREE.iter().position(|&f| f == s).map(|i| self.to_array()[i])
    }

    pub fn sum(&self) -> f64 {
        self.to_array().iter().sum()
    }
}

/// The eight dependent probabilities `p2, p3, p6, p7, p10, p11, p13, p16`.
/// Values outside `[0, 1]` are kept; they signal an infeasible free set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependentSet {
    pub p2: f64,
    pub p3: f64,
    pub p6: f64,
    pub p7: f64,
    pub p10: f64,
    pub p11: f64,
    pub p13: f64,
    pub p16: f64,
}

impl DependentSet {
    /// Values in [`DEPENDENT`] order.
    pub fn from_array(v: [f64; 8]) -> Self {
        let [p2, p3, p6, p7, p10, p11, p13, p16] = v;
        Self { p2, p3, p6, p7, p10, p11, p13, p16 }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.p2, self.p3, self.p6, self.p7, self.p10, self.p11, self.p13, self.p16,
        ]
    }

    pub fn of_behavior(b: &Behavior) -> Self {
        Self::from_array(DEPENDENT.map(|s| b.at(s)))
    }

    pub fn get(&self, s: Shorthand) -> Option<f64> {
        DEPENDENT.iter().position(|&d| d == s).map(|i| self.to_array()[i])
    }

    pub fn max_abs_diff(&self, other: &DependentSet) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Combines free and dependent values into a full 16-entry vector.
pub fn assemble_array(u: &FreeSet, v: &DependentSet) -> [f64; 16] {
    let mut p = [0.0; 16];
    for (s, x) in FREE.iter().zip(u.to_array()) {
        p[s.index()] = x;
    }
    for (s, x) in DEPENDENT.iter().zip(v.to_array()) {
        p[s.index()] = x;
    }
    p
}

pub fn assemble(u: &FreeSet, v: &DependentSet) -> Result<Behavior> {
    Behavior::new(assemble_array(u, v))
}

/// The full behavior determined by a free set.
pub fn behavior_from_free(u: &FreeSet) -> Result<Behavior> {
    assemble(u, &solve_dependent(u))
}

/// Dependent probabilities from the closed-form relations.
pub fn solve_dependent(u: &FreeSet) -> DependentSet {
    let x = u.to_array();
    let v = DependentSet::from_array(CLOSED_FORMS.map(|f| f.evaluate(&x)));
    debug_assert!(
        {
            let p = assemble_array(u, &v);
            let r = build_matrix().max_residual(&p);
            let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            r <= SOLVE_RESIDUAL_TOL * scale || !r.is_finite()
        },
        "closed-form solution does not satisfy the constraint matrix"
    );
    v
}

type Q = Ratio<i64>;

/// Affine map `v = offset + linear · u` for the dependent probabilities,
/// obtained by exact rational elimination on [`build_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSolution {
    pub offset: [Q; 8],
    pub linear: [[Q; 8]; 8],
}

impl AffineSolution {
    pub fn apply(&self, u: &FreeSet) -> DependentSet {
        let x = u.to_array();
        let mut out = [0.0; 8];
        for (i, o) in out.iter_mut().enumerate() {
            *o = q_to_f64(self.offset[i])
                + self.linear[i]
                    .iter()
                    .zip(&x)
                    .map(|(&c, &v)| q_to_f64(c) * v)
                    .sum::<f64>();
        }
        DependentSet::from_array(out)
    }
}

fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Solves the constraint matrix for the dependent columns by Gauss-Jordan
/// elimination over the rationals, independently of the closed forms.
///
/// Fails if the dependent columns are not independent or if eliminating them
/// leaves a constraint on the free variables.
pub fn affine_solution() -> Result<AffineSolution> {
    let m = build_matrix();
    let zero = Q::from_integer(0);
    // Columns: 8 dependent unknowns | constant | 8 free coefficients (moved to the right).
    let mut aug: Vec<Vec<Q>> = m
        .rows()
        .iter()
        .zip(m.rhs())
        .map(|(row, &rhs)| {
            let mut r = Vec::with_capacity(17);
            r.extend(DEPENDENT.iter().map(|s| Q::from_integer(i64::from(row[s.index()]))));
            r.push(Q::from_integer(i64::from(rhs)));
            r.extend(FREE.iter().map(|s| Q::from_integer(-i64::from(row[s.index()]))));
            r
        })
        .collect();

    let n = DEPENDENT.len();
    for col in 0..n {
        let pivot = (col..aug.len())
            .find(|&i| aug[i][col] != zero)
            .ok_or_else(|| Error::Numerical(format!("dependent column {col} has no pivot")))?;
        aug.swap(col, pivot);
        let inv = aug[col][col].recip();
        for x in aug[col].iter_mut() {
            *x *= inv;
        }
        let pivot_row = aug[col].clone();
        for (i, row) in aug.iter_mut().enumerate() {
            if i == col || row[col] == zero {
                continue;
            }
            let f = row[col];
            for (x, &p) in row.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
    }
    if aug[n..].iter().any(|r| r.iter().any(|&x| x != zero)) {
        return Err(Error::Numerical(
            "constraint system restricts the free variables".into(),
        ));
    }
    let mut offset = [zero; 8];
    let mut linear = [[zero; 8]; 8];
    for i in 0..n {
        offset[i] = aug[i][n];
        linear[i].copy_from_slice(&aug[i][n + 1..]);
    }
    Ok(AffineSolution { offset, linear })
}

/// Dependent probabilities through the generic elimination path.
pub fn solve_dependent_generic(u: &FreeSet) -> Result<DependentSet> {
    Ok(affine_solution()?.apply(u))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeasibilityOptions {
    /// Also check non-negativity of every non-empty sum of dependent probabilities.
    pub all_subset_sums: bool,
}

/// Range checks on the solved dependent set plus the named inequalities
/// implied by non-negativity of dependent probabilities and their sums.
pub fn check_feasible(u: &FreeSet, tol: f64) -> Result<ConstraintReport> {
    check_feasible_with(u, tol, FeasibilityOptions::default())
}

pub fn check_feasible_with(
    u: &FreeSet,
    tol: f64,
    options: FeasibilityOptions,
) -> Result<ConstraintReport> {
    check_tolerance(tol)?;
    for (s, x) in FREE.iter().zip(u.to_array()) {
        if !(-tol..=1.0 + tol).contains(&x) {
            return Err(Error::Precondition(format!("{s} = {x} lies outside [0, 1]")));
        }
    }
    let v = solve_dependent(u);
    let mut report = ConstraintReport::new();
    for (s, x) in DEPENDENT.iter().zip(v.to_array()) {
        report.push(Check::within(format!("0 <= {s} <= 1"), x, 0.0, 1.0, tol));
    }
    let FreeSet { p1, p4, p5, p8, p9, p12, p14, p15 } = *u;
    report.push(Check::at_most(
        "p1+p8+p12+p14+p15 <= 1+p4+p5+p9",
        p1 + p8 + p12 + p14 + p15,
        1.0 + p4 + p5 + p9,
        tol,
    ));
    report.push(Check::at_most("p1+p8 <= 1", p1 + p8, 1.0, tol));
    report.push(Check::at_most(
        "p1+p4+p5+p8+p9+p12+p14+p15 <= 4",
        u.sum(),
        4.0,
        tol,
    ));
    report.push(Check::at_most(
        "2*p13-1 <= p4+p5+p9",
        2.0 * v.p13 - 1.0,
        p4 + p5 + p9,
        tol,
    ));
    if options.all_subset_sums {
        let values = v.to_array();
        for mask in 1u32..(1 << 8) {
            let members: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
            if members.len() < 2 {
                continue;
            }
            let name = members
                .iter()
                .map(|&i| DEPENDENT[i].to_string())
                .collect::<Vec<_>>()
                .join("+");
            let sum: f64 = members.iter().map(|&i| values[i]).sum();
            report.push(Check::new(format!("{name} >= 0"), -sum, tol));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_transcribed() {
        let m = build_matrix();
        let mut first = [0i8; 16];
        first[..4].copy_from_slice(&[1, 1, 1, 1]);
        assert_eq!(m.rows()[0], first);
        assert_eq!(m.rhs()[0], 1);
        let mut fifth = [0i8; 16];
        fifth[0] = 1;
        fifth[1] = 1;
        fifth[4] = -1;
        fifth[5] = -1;
        assert_eq!(m.rows()[4], fifth);
        assert_eq!(m.rhs()[4], 0);
        assert_eq!(&m.rhs()[..4], &[1, 1, 1, 1]);
        assert!(m.rhs()[4..].iter().all(|&r| r == 0));
        assert!(m.rows().iter().flatten().all(|c| (-1..=1).contains(c)));
        assert_eq!(m.max_residual(&[0.25; 16]), 0.0);
    }

    #[test]
    fn rank_is_eight() {
        assert_eq!(rank(&build_matrix()), 8);
    }

    #[test]
    fn rank_of_sub_and_super_matrices() {
        let rows = build_matrix().to_i64_rows();
        assert_eq!(integer_rank(&rows[..4]), 4);
        let mut dup = rows.clone();
        dup.push(rows[7].clone());
        dup.push(rows[0].clone());
        assert_eq!(integer_rank(&dup), 8);
    }

    #[test]
    fn integer_rank_small_cases() {
        assert_eq!(integer_rank::<Vec<i64>>(&[]), 0);
        assert_eq!(integer_rank(&[vec![0, 0], vec![0, 0]]), 0);
        assert_eq!(integer_rank(&[vec![2, 4], vec![1, 2]]), 1);
        assert_eq!(integer_rank(&[vec![0, 3, 1], vec![0, 6, 2], vec![5, 0, 0]]), 2);
        assert_eq!(integer_rank(&[vec![2, 1, 1], vec![1, 3, 2], vec![1, 0, 0]]), 3);
    }

    #[test]
    fn reference_free_sets() {
        let v = solve_dependent(&FreeSet::constant(0.5));
        assert_eq!(v.to_array(), [0.0; 8]);
        let v = solve_dependent(&FreeSet::constant(0.0));
        assert_eq!(v.to_array(), [0.5; 8]);
        let q = (2.0 + 2f64.sqrt()) / 8.0;
        let v = solve_dependent(&FreeSet::constant(q));
        for x in v.to_array() {
            assert!((x - (0.5 - q)).abs() < 1e-15);
        }
        let v = solve_dependent(&FreeSet::constant(0.25));
        assert_eq!(v.to_array(), [0.25; 8]);
    }

    #[test]
    fn generic_path_reproduces_closed_forms_exactly() {
        let sol = affine_solution().unwrap();
        let half = Q::new(1, 2);
        for (i, form) in closed_forms().iter().enumerate() {
            assert_eq!(sol.offset[i], half, "offset for {}", form.dependent);
            for (j, &c) in form.coefficients.iter().enumerate() {
                assert_eq!(sol.linear[i][j], half * Q::from_integer(i64::from(c)));
            }
        }
    }

    #[test]
    fn p13_relation_restated() {
        let u = FreeSet::from_array([0.3, 0.05, 0.1, 0.2, 0.02, 0.15, 0.1, 0.12]);
        let v = solve_dependent(&u);
        let lhs = 2.0 * v.p13 - 1.0;
        let rhs = u.p4 + u.p5 + u.p9 - u.p1 - u.p8 - u.p12 - u.p14 - u.p15;
        assert!((lhs - rhs).abs() < 1e-15);
    }

    fn tau() -> f64 {
        (1.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn hardy_optimum_is_feasible() {
        let t = tau();
        let (t3, t4) = (t.powi(-3), t.powi(-4));
        let u = FreeSet::from_array([t3, 0.0, 0.0, t4, 0.0, t4, t4, t4]);
        let report = check_feasible(&u, 1e-9).unwrap();
        assert!(report.all_passed(), "{report}");
        let v = solve_dependent(&u);
        assert!((v.p13 - t.powi(-5)).abs() < 1e-15);
        assert!(2.0 * v.p13 - 1.0 < 0.0);
    }

    #[test]
    fn free_sum_bound_saturated_by_half() {
        let u = FreeSet::constant(0.5);
        let report = check_feasible(&u, 1e-9).unwrap();
        assert!(report.all_passed());
        assert_eq!(u.sum(), 4.0);
        assert_eq!(report.get("p1+p4+p5+p8+p9+p12+p14+p15 <= 4").unwrap().residual, 0.0);
    }

    #[test]
    fn p1_p8_bound_violated() {
        let u = FreeSet::from_array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let report = check_feasible(&u, 1e-9).unwrap();
        let c = report.get("p1+p8 <= 1").unwrap();
        assert!(!c.passed);
        assert_eq!(c.residual, 1.0);
        // p2 and p7 go negative as a consequence
        assert!(!report.get("0 <= p2 <= 1").unwrap().passed);
    }

    #[test]
    fn out_of_range_free_set_is_a_precondition_error() {
        let mut u = FreeSet::constant(0.25);
        u.p9 = 1.5;
        assert!(matches!(check_feasible(&u, 1e-9), Err(Error::Precondition(_))));
        u.p9 = -0.01;
        assert!(check_feasible(&u, 1e-9).is_err());
    }

    #[test]
    fn subset_sums_behind_flag() {
        let u = FreeSet::constant(0.25);
        let plain = check_feasible(&u, 1e-9).unwrap();
        let full = check_feasible_with(&u, 1e-9, FeasibilityOptions { all_subset_sums: true }).unwrap();
        assert_eq!(full.len(), plain.len() + 255 - 8);
        assert!(full.all_passed());

        let u = FreeSet::from_array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let full = check_feasible_with(&u, 1e-9, FeasibilityOptions { all_subset_sums: true }).unwrap();
        assert!(!full.get("p2+p7 >= 0").unwrap().passed);
    }

    #[test]
    fn free_set_json() {
        let u: FreeSet = serde_json::from_str(
            r#"{"p1":0.5,"p4":0.5,"p5":0.5,"p8":0.5,"p9":0.5,"p12":0.5,"p14":0.5,"p15":0.5}"#,
        )
        .unwrap();
        assert_eq!(u, FreeSet::constant(0.5));
        assert!(serde_json::from_str::<FreeSet>(r#"{"p1":0.5}"#).is_err());
        assert!(serde_json::from_str::<FreeSet>(
            r#"{"p1":0.5,"p4":0.5,"p5":0.5,"p8":0.5,"p9":0.5,"p12":0.5,"p14":0.5,"p15":0.5,"p2":0}"#
        )
        .is_err());
    }
}
