use crate::error::{Error, Result};

/// Result of a preconditioned conjugate gradient run.
#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    /// Number of iterations until the residual test passed (or `max_iter`).
    pub iterations: usize,
    /// Euclidean residual norms, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients.
///
/// `apply_a(x, y)` must write `y = A x` and `apply_p(r, z)` must write
/// `z = P r`. Iteration stops at the first `k` with
/// `‖b - A x_k‖ <= rel_tol ‖b - A x_0‖`. A zero initial residual returns
/// immediately with zero iterations. Running out of iterations is not an
/// error: the outcome is flagged non-converged and keeps its history.
pub fn pcg<A, P>(
    mut apply_a: A,
    mut apply_p: P,
    rhs: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = rhs.len();
    if x0.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let mut q = vec![0.0; n];
    apply_a(&x, &mut q);
    let mut r: Vec<f64> = rhs.iter().zip(&q).map(|(b, v)| b - v).collect();
    let r0 = norm(&r);
    let mut history = vec![r0];
    if r0 == 0.0 {
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            residual_history: history,
            converged: true,
        });
    }
    let target = rel_tol * r0;
    let mut z = vec![0.0; n];
    apply_p(&r, &mut z);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::IndefinitePreconditioner { iteration: 0, value: rz });
    }
    let mut p = z.clone();
    for k in 1..=max_iter {
        apply_a(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rn = norm(&r);
        history.push(rn);
        if rn <= target {
            return Ok(PcgOutcome {
                x,
                iterations: k,
                residual_history: history,
                converged: true,
            });
        }
        apply_p(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::IndefinitePreconditioner {
                iteration: k,
                value: rz_new,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(PcgOutcome {
        x,
        iterations: max_iter,
        residual_history: history,
        converged: false,
    })
}
