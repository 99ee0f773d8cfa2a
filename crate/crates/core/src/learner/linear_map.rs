//! Ridge least-squares map `S2 -> S1`, the reconstruction used by `old_linear`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::nn::Matrix;

/// Ridge penalty on the map.
pub const RIDGE: f64 = 1e-6;

/// `x̃_s1 = Wᵀ x_s2 + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    /// `d2 × d1`.
    pub weights: Matrix,
    pub intercept: Vec<f64>,
}

impl LinearMap {
    pub fn apply(&self, x_s2: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.weights.tr_mul_vec(x_s2)?;
        for (o, b) in out.iter_mut().zip(&self.intercept) {
            *o += b;
        }
        Ok(out)
    }
}

/// `argmin Σ‖Wᵀx_s2 + b − x_s1‖² + λ‖[W; b]‖²_F` over `(x_s2, x_s1)` pairs.
/// The intercept is fitted as an extra constant input.
pub fn fit_linear_map(buffer: &[(Vec<f64>, Vec<f64>)], ridge: f64) -> Result<LinearMap> {
    let (first_s2, first_s1) = buffer.first().ok_or(Error::Empty("linear map buffer"))?;
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("ridge penalty {ridge} must be positive")));
    }
    let (d2, d1) = (first_s2.len(), first_s1.len());
    let k = d2 + 1;
    let mut gram = Matrix::zeros(k, k);
    let mut cross = vec![vec![0.0; k]; d1];
    let mut xa = vec![1.0; k];
    for (x2, x1) in buffer {
        ensure_len("linear map input", d2, x2.len())?;
        ensure_len("linear map target", d1, x1.len())?;
        ensure_finite("linear map input", x2)?;
        ensure_finite("linear map target", x1)?;
        xa[..d2].copy_from_slice(x2);
        let g = gram.as_mut_slice();
        for i in 0..k {
            let xi = xa[i];
            for j in i..k {
                g[i * k + j] += xi * xa[j];
            }
        }
        for (c, &y) in cross.iter_mut().zip(x1) {
            for (ci, &xi) in c.iter_mut().zip(&xa) {
                *ci += xi * y;
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            let v = gram.get(j, i);
            gram.set(i, j, v);
        }
        let d = gram.get(i, i);
        gram.set(i, i, d + ridge);
    }
    let l = cholesky(&gram)?;
    let mut weights = Matrix::zeros(d2, d1);
    let mut intercept = vec![0.0; d1];
    for (c, rhs) in cross.iter().enumerate() {
        let col = cholesky_solve(&l, rhs);
        for r in 0..d2 {
            weights.set(r, c, col[r]);
        }
        intercept[c] = col[d2];
    }
    Ok(LinearMap { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;
    use nalgebra::DMatrix;

    fn pinv_oracle(buffer: &[(Vec<f64>, Vec<f64>)]) -> DMatrix<f64> {
        let n = buffer.len();
        let d2 = buffer[0].0.len();
        let d1 = buffer[0].1.len();
        let x = DMatrix::from_fn(n, d2 + 1, |i, j| if j < d2 { buffer[i].0[j] } else { 1.0 });
        let y = DMatrix::from_fn(n, d1, |i, j| buffer[i].1[j]);
        x.pseudo_inverse(1e-12).unwrap() * y
    }

    #[test]
    fn recovers_exact_linear_relation() {
        let mut rng = RngState::new(3);
        let (d1, d2) = (4, 7);
        let a: Vec<f64> = rng.normals(d2 * d1);
        let buffer: Vec<_> = (0..40)
            .map(|_| {
                let x2 = rng.normals(d2);
                let x1: Vec<f64> = (0..d1).map(|c| (0..d2).map(|r| a[r * d1 + c] * x2[r]).sum()).collect();
                (x2, x1)
            })
            .collect();
        let map = fit_linear_map(&buffer, RIDGE).unwrap();
        let err: f64 = (0..d2 * d1)
            .map(|i| {
                let d = map.weights.as_slice()[i] - a[i];
                d * d
            })
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-6, "frobenius error {err}");
        assert!(map.intercept.iter().all(|b| b.abs() < 1e-6));
    }

    #[test]
    fn single_pair_matches_min_norm_solution() {
        let buffer = vec![(vec![0.3, -1.2, 0.8], vec![2.0, -0.5])];
        let map = fit_linear_map(&buffer, RIDGE).unwrap();
        let oracle = pinv_oracle(&buffer);
        for r in 0..3 {
            for c in 0..2 {
                assert!((map.weights.get(r, c) - oracle[(r, c)]).abs() < 1e-5);
            }
        }
        for c in 0..2 {
            assert!((map.intercept[c] - oracle[(3, c)]).abs() < 1e-5);
        }
        let out = map.apply(&buffer[0].0).unwrap();
        for (o, t) in out.iter().zip(&buffer[0].1) {
            assert!((o - t).abs() < 1e-5);
        }
    }

    #[test]
    fn underdetermined_buffer_matches_pseudo_inverse() {
        let mut rng = RngState::new(9);
        let buffer: Vec<_> = (0..3).map(|_| (rng.normals(6), rng.normals(2))).collect();
        let map = fit_linear_map(&buffer, RIDGE).unwrap();
        let oracle = pinv_oracle(&buffer);
        for r in 0..6 {
            for c in 0..2 {
                assert!((map.weights.get(r, c) - oracle[(r, c)]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(matches!(fit_linear_map(&[], RIDGE), Err(Error::Empty(_))));
        let ragged = vec![(vec![1.0, 2.0], vec![1.0]), (vec![1.0], vec![1.0])];
        assert!(fit_linear_map(&ragged, RIDGE).is_err());
    }
}
