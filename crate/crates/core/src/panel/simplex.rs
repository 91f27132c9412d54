//! Least squares over the probability simplex by Frank–Wolfe with away steps.
//!
//! Minimises `f(w) = w'Qw - 2c'w + k` over `{w >= 0, Σw = 1}` with exact line
//! search. The Frank–Wolfe gap `∇f(w)'(w - s)` bounds `f(w) - f*` and is the
//! stopping criterion. Vertex ties go to the lowest index, which makes the
//! output deterministic even when the minimiser is not unique.

/// Relative duality-gap tolerance.
pub const SIMPLEX_TOL: f64 = 1e-8;
pub const SIMPLEX_MAX_ITER: usize = 10_000;

const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Final Frank–Wolfe gap.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn argmin_first(values: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    values.fold(
        (usize::MAX, f64::INFINITY),
        |best, (i, v)| if v < best.1 { (i, v) } else { best },
    )
}

/// Solves the simplex-constrained quadratic. `q` is `n x n` row-major and
/// symmetric positive semidefinite; `constant` only shifts the objective.
/// The gap tolerance is `tol * constant` (absolute `tol` when `constant` is
/// zero), which makes the iterates invariant to rescaling the problem.
pub fn simplex_least_squares(q: &[f64], c: &[f64], constant: f64, tol: f64, max_iter: usize) -> SimplexSolution {
    let n = c.len();
    assert_eq!(q.len(), n * n, "q must be n x n");
    let col = |j: usize| (0..n).map(move |i| q[i * n + j]);
    let objective = |w: &[f64], qw: &[f64]| -> f64 {
        w.iter().zip(qw).map(|(a, b)| a * b).sum::<f64>() - 2.0 * w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
            + constant
    };
    let threshold = tol * if constant > 0.0 { constant } else { 1.0 };

    // Start at the best vertex so the result never loses to any vertex.
    let (start, _) = argmin_first((0..n).map(|i| (i, q[i * n + i] - 2.0 * c[i])));
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let mut qw: Vec<f64> = col(start).collect();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iter {
        if iterations % REFRESH_EVERY == 0 && iterations > 0 {
            qw = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * w[j]).sum()).collect();
        }
        let grad: Vec<f64> = qw.iter().zip(c).map(|(a, b)| 2.0 * (a - b)).collect();
        let grad_w: f64 = grad.iter().zip(&w).map(|(g, x)| g * x).sum();
        let (s, grad_s) = argmin_first(grad.iter().copied().enumerate());
        gap = grad_w - grad_s;
        if gap <= threshold {
            break;
        }
        iterations += 1;
        let (a, grad_a) = w
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(i, _)| (i, -grad[i]))
            .fold(
                (usize::MAX, f64::INFINITY),
                |best, (i, v)| if v < best.1 { (i, v) } else { best },
            );
        let grad_a = -grad_a;
        let away_gap = grad_a - grad_w;

        // Direction d and Qd.
        let (forward, max_step) = if gap >= away_gap || w[a] >= 1.0 {
            (true, 1.0)
        } else {
            (false, w[a] / (1.0 - w[a]))
        };
        let qd: Vec<f64> = if forward {
            col(s).zip(&qw).map(|(qs, qwi)| qs - qwi).collect()
        } else {
            qw.iter().zip(col(a)).map(|(qwi, qa)| qwi - qa).collect()
        };
        let slope = if forward { grad_s - grad_w } else { grad_w - grad_a };
        let dqd: f64 = if forward {
            // d = e_s - w
            qd[s] - w.iter().zip(&qd).map(|(x, y)| x * y).sum::<f64>()
        } else {
            // d = w - e_a
            w.iter().zip(&qd).map(|(x, y)| x * y).sum::<f64>() - qd[a]
        };
        let step = if dqd > 0.0 {
            (-slope / (2.0 * dqd)).min(max_step)
        } else {
            max_step
        };
        if !(step > 0.0) {
            break;
        }
        if forward {
            w.iter_mut().for_each(|x| *x *= 1.0 - step);
            w[s] += step;
        } else {
            w.iter_mut().for_each(|x| *x *= 1.0 + step);
            w[a] -= step;
            if step >= max_step {
                w[a] = 0.0;
            }
        }
        qw.iter_mut().zip(&qd).for_each(|(x, d)| *x += step * d);
    }

    // Renormalise away rounding drift and report the objective exactly.
    w.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let qw: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * w[j]).sum()).collect();
    SimplexSolution {
        objective: objective(&w, &qw),
        converged: gap <= threshold,
        weights: w,
        gap,
        iterations,
    }
}
