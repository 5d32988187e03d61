//! Nelder–Mead simplex minimization with standard coefficients.

#[derive(Debug, Clone, Copy)]
pub(crate) struct NelderMead {
    pub max_iters: usize,
    /// Spread of objective values across the simplex at which a run stops.
    pub f_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Fresh simplices built around the incumbent after a converged run.
const MAX_REBUILDS: usize = 3;

impl NelderMead {
    /// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge `step`.
    /// NaN values are treated as `+∞`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: f64) -> Minimum {
        let mut evaluations = 0;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut iterations = 0;
        let mut best_x = x0.to_vec();
        let mut best_f = eval(&best_x);
        let mut converged = false;
        let mut step = step;
        for _ in 0..=MAX_REBUILDS {
            let run = self.run(&mut eval, &best_x, best_f, step, &mut iterations);
            let improvement = best_f - run.1;
            best_x = run.0;
            best_f = run.1;
            converged = run.2;
            if !converged || improvement <= self.f_tol * (1.0 + best_f.abs()) {
                break;
            }
            step *= 0.1;
        }
        Minimum {
            x: best_x,
            iterations,
            evaluations,
            converged,
        }
    }

    fn run<F: FnMut(&[f64]) -> f64>(
        &self,
        eval: &mut F,
        x0: &[f64],
        f0: f64,
        step: f64,
        iterations: &mut usize,
    ) -> (Vec<f64>, f64, bool) {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step;
            let fx = eval(&x);
            simplex.push((x, fx));
        }

        let mut local_iters = 0;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[n].1);
            if (worst - best).abs() <= self.f_tol * (1.0 + best.abs()) {
                let (x, fx) = simplex.swap_remove(0);
                return (x, fx, true);
            }
            if local_iters >= self.max_iters {
                let (x, fx) = simplex.swap_remove(0);
                return (x, fx, false);
            }
            local_iters += 1;
            *iterations += 1;

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64, from: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst_x = simplex[n].0.clone();
            let xr = along(REFLECT, &worst_x);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(EXPAND, &worst_x);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(CONTRACT, &worst_x);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-CONTRACT, &worst_x);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for (x, fx) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&x_best) {
                    *xi = bi + SHRINK * (*xi - bi);
                }
                *fx = eval(x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead { max_iters: 5000, f_tol: 1e-15 };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            0.5,
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn quadratic_in_five_dimensions() {
        let nm = NelderMead { max_iters: 10000, f_tol: 1e-16 };
        let target = [0.3, -1.0, 2.0, 0.0, 5.0];
        let m = nm.minimize(
            |x| x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2)).sum(),
            &[0.0; 5],
            1.0,
        );
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_is_rejected() {
        let nm = NelderMead { max_iters: 2000, f_tol: 1e-14 };
        let m = nm.minimize(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) + x[1] * x[1] }, &[0.5, 0.5], 0.3);
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }
}
