//! Small dense solves on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` for symmetric positive (semi)definite `a`: Cholesky
/// first, LU as a fallback.
pub fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("normal equations".into()))
}

/// Weighted ridge regression with an unpenalized intercept.
///
/// Minimizes `sum_i w_i (y_i - b - x_i.beta)^2 + lambda ||beta||^2` over rows
/// `x` given row-major with `m` columns. Returns `(beta, b)`.
pub fn weighted_ridge(
    x: &[f64],
    m: usize,
    y: &[f64],
    w: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let w_sum: f64 = w.iter().sum();
    if !(w_sum > 0.0) {
        return Err(Error::Singular("weights sum to zero".into()));
    }
    let mut x_mean = vec![0.0; m];
    let mut y_mean = 0.0;
    for i in 0..n {
        for j in 0..m {
            x_mean[j] += w[i] * x[i * m + j];
        }
        y_mean += w[i] * y[i];
    }
    x_mean.iter_mut().for_each(|v| *v /= w_sum);
    y_mean /= w_sum;
    if m == 0 {
        return Ok((Vec::new(), y_mean));
    }

    let mut xtx = DMatrix::<f64>::zeros(m, m);
    let mut xty = DVector::<f64>::zeros(m);
    let mut centered = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            centered[j] = x[i * m + j] - x_mean[j];
        }
        let yc = y[i] - y_mean;
        for a in 0..m {
            let wa = w[i] * centered[a];
            xty[a] += wa * yc;
            for b in a..m {
                xtx[(a, b)] += wa * centered[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
        xtx[(a, a)] += lambda;
    }
    let beta = solve_symmetric(xtx, &xty)?;
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, mu)| b * mu).sum::<f64>();
    Ok((beta.iter().copied().collect(), intercept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_without_penalty_recovers_plane() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let a = i as f64 * 0.3;
            let b = ((i * 7) % 5) as f64;
            x.extend([a, b]);
            y.push(1.5 + 2.0 * a - 0.5 * b);
        }
        let w = vec![1.0; 20];
        let (beta, b0) = weighted_ridge(&x, 2, &y, &w, 0.0).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-10);
        assert!((beta[1] + 0.5).abs() < 1e-10);
        assert!((b0 - 1.5).abs() < 1e-10);
    }
}
