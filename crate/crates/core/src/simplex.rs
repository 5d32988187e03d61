//! Dense two-phase simplex for small linear programs in standard form
//! `minimize c·x subject to A x = b, x >= 0`. Bland's rule keeps it from cycling.

const PIVOT_EPS: f64 = 1e-11;
const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpError {
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    objective: Vec<f64>,
    basis: Vec<usize>,
    rhs: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pv;
                }
            }
        }
        let f = self.objective[c];
        if f != 0.0 {
            for (x, &pv) in self.objective.iter_mut().zip(&pivot_row) {
                *x -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations, letting only columns `< allowed` enter.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.objective[j] < -PIVOT_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[enter] > PIVOT_EPS {
                    let ratio = row[self.rhs] / row[enter];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_EPS
                                || (ratio <= br + PIVOT_EPS && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let (r, _) = leave.ok_or(LpError::Unbounded)?;
            self.pivot(r, enter);
        }
    }
}

pub(crate) fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    assert!(a.iter().all(|r| r.len() == n));

    let width = n + m + 1;
    let rhs = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; width];
        for (j, &v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[n + i] = 1.0;
        t[rhs] = sign * bi;
        rows.push(t);
    }
    // Phase 1: minimize the sum of artificials.
    let mut objective = vec![0.0; width];
    for row in &rows {
        for j in 0..n {
            objective[j] -= row[j];
        }
        objective[rhs] -= row[rhs];
    }
    let mut t = Tableau {
        rows,
        objective,
        basis: (n..n + m).collect(),
        rhs,
    };
    t.optimize(n + m)?;
    if -t.objective[rhs] > FEASIBILITY_EPS {
        return Err(LpError::Infeasible);
    }

    // Drive artificials out of the basis; drop rows that are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > PIVOT_EPS) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // Phase 2.
    let mut objective = vec![0.0; width];
    objective[..n].copy_from_slice(c);
    for (row, &bj) in t.rows.iter().zip(&t.basis) {
        let cb = c[bj];
        if cb != 0.0 {
            for (o, &v) in objective.iter_mut().zip(row) {
                *o -= cb * v;
            }
        }
    }
    t.objective = objective;
    t.optimize(n)?;

    let mut x = vec![0.0; n];
    for (row, &bj) in t.rows.iter().zip(&t.basis) {
        x[bj] = row[rhs];
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let c = [-1.0, -1.0, 0.0, 0.0];
        let a = vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]];
        let sol = minimize(&c, &a, &[4.0, 6.0]).unwrap();
        assert!((sol.objective + 2.8).abs() < 1e-12);
        assert!((sol.x[0] - 1.6).abs() < 1e-12);
        assert!((sol.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = -1 with x, y >= 0
        assert_eq!(
            minimize(&[0.0, 0.0], &[vec![1.0, 1.0]], &[-1.0]),
            Err(LpError::Infeasible)
        );
        // min -x s.t. x - y = 0
        assert_eq!(
            minimize(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0]),
            Err(LpError::Unbounded)
        );
    }

    #[test]
    fn redundant_rows() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let sol = minimize(&[1.0, 2.0], &a, &[1.0, 2.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }
}
