//! Shared small-scale least-squares machinery.
//!
//! Closed-form linear fits go through the 3×3 normal-equation solver;
//! the few-parameter nonlinear models (exponential dip, exponential decay)
//! use a compact Levenberg-Marquardt loop with analytic Jacobians and a
//! fixed, deterministic iteration schedule.

use crate::error::{Error, Result};

/// Solve a symmetric 3×3 system, returning the solution and the inverse
/// matrix (the unscaled covariance of the fitted parameters). `None` when
/// the system is numerically singular.
pub(crate) fn solve3_with_covariance(
    a: [[f64; 3]; 3],
    b: [f64; 3],
) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let scale = a.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if det.abs() <= 1e-12 * scale.powi(3).max(f64::MIN_POSITIVE) {
        return None;
    }
    let inv = [
        [
            (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det,
            (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det,
            (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det,
        ],
        [
            (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det,
            (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det,
            (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det,
        ],
        [
            (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det,
            (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det,
            (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det,
        ],
    ];
    let mut x = [0.0; 3];
    for (i, row) in inv.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[i] += v * b[j];
        }
    }
    Some((x, inv))
}

/// A residual model for [`levenberg_marquardt`].
pub(crate) trait LmModel {
    /// Number of parameters.
    const NP: usize;

    /// Number of data points.
    fn len(&self) -> usize;

    /// Model value and parameter gradient at sample `i`.
    fn eval(&self, params: &[f64], i: usize) -> (f64, Vec<f64>);

    /// Observed value at sample `i`.
    fn observed(&self, i: usize) -> f64;

    /// Weight (inverse variance) at sample `i`.
    fn weight(&self, i: usize) -> f64;

    /// Clamp a parameter proposal into the model's valid region.
    fn project(&self, params: &mut [f64]);
}

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// Covariance of the parameters: (JᵀWJ)⁻¹ scaled by χ²/dof.
    pub covariance: Vec<Vec<f64>>,
    #[allow(dead_code)]
    pub iterations: usize,
}

fn chi2<M: LmModel>(model: &M, params: &[f64]) -> f64 {
    (0..model.len())
        .map(|i| {
            let (f, _) = model.eval(params, i);
            let r = model.observed(i) - f;
            model.weight(i) * r * r
        })
        .sum()
}

/// Dense normal-equation Levenberg-Marquardt with multiplicative damping.
///
/// The schedule is fixed (λ₀ = 1e-3, ×10 on reject, ÷10 on accept) so that
/// results are bit-reproducible for identical inputs.
#[allow(clippy::needless_range_loop)] // triangular fills of symmetric matrices
pub(crate) fn levenberg_marquardt<M: LmModel>(
    model: &M,
    initial: Vec<f64>,
    max_iterations: usize,
) -> Result<LmOutcome> {
    let np = M::NP;
    assert_eq!(initial.len(), np);
    let n = model.len();
    if n <= np {
        return Err(Error::Fit(format!(
            "need more than {np} samples for a {np}-parameter fit, got {n}"
        )));
    }
    let mut params = initial;
    model.project(&mut params);
    let mut lambda = 1e-3;
    let mut current_chi2 = chi2(model, &params);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iterations {
        iterations += 1;
        // build JᵀWJ and JᵀWr
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for i in 0..n {
            let (f, grad) = model.eval(&params, i);
            let w = model.weight(i);
            let r = model.observed(i) - f;
            for a in 0..np {
                jtr[a] += w * grad[a] * r;
                for b in a..np {
                    jtj[a][b] += w * grad[a] * grad[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }
        // damped step: (JᵀWJ + λ diag) δ = JᵀWr
        let mut damped = jtj.clone();
        for (a, row) in damped.iter_mut().enumerate() {
            row[a] += lambda * row[a].max(1e-30);
        }
        let Some(step) = solve_dense(&damped, &jtr) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                return Err(Error::Fit("normal equations singular".into()));
            }
            continue;
        };
        let mut trial = params.clone();
        for a in 0..np {
            trial[a] += step[a];
        }
        model.project(&mut trial);
        let trial_chi2 = chi2(model, &trial);
        if trial_chi2 <= current_chi2 {
            let delta = current_chi2 - trial_chi2;
            params = trial;
            current_chi2 = trial_chi2;
            lambda = (lambda * 0.1).max(1e-12);
            if delta <= 1e-12 * current_chi2.max(1e-300) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // flat region: the current point is the optimum
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "no convergence after {max_iterations} iterations (chi2 = {current_chi2:.6e})"
        )));
    }
    // covariance from the undamped normal matrix, scaled by reduced chi2
    let mut jtj = vec![vec![0.0; np]; np];
    for i in 0..n {
        let (_, grad) = model.eval(&params, i);
        let w = model.weight(i);
        for a in 0..np {
            for b in a..np {
                jtj[a][b] += w * grad[a] * grad[b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    let dof = (n - np).max(1) as f64;
    let scale = current_chi2 / dof;
    let covariance = invert_dense(&jtj)
        .map(|inv| {
            inv.into_iter()
                .map(|row| row.into_iter().map(|v| v * scale).collect())
                .collect()
        })
        .unwrap_or_else(|| vec![vec![f64::NAN; np]; np]);
    Ok(LmOutcome {
        params,
        chi2: current_chi2,
        covariance,
        iterations,
    })
}

/// Gaussian elimination with partial pivoting for the small LM systems.
#[allow(clippy::needless_range_loop)]
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        if m[row][row].abs() < 1e-300 {
            return None;
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve_dense(a, &e)?;
        for row in 0..n {
            out[row][col] = x[row];
        }
    }
    Some(out)
}
