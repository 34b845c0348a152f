//! Dense linear-algebra helpers on top of `nalgebra`, plus serde adapters so
//! matrices read from JSON as nested row arrays (or bare numbers for 1×1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Spectral radius via the real Schur form.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    a.is_square() && (a - a.transpose()).abs().max() <= tol * (1.0 + a.abs().max())
}

/// Factor `L` with `L Lᵀ = Σ` built from the eigen-decomposition. Directions
/// with (numerically) zero variance are dropped, so a singular `Σ` yields a
/// factor with fewer columns instead of a failed Cholesky.
pub fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = sigma.abs().max().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(sigma.clone());
    let mut cols = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-10 * scale {
            return Err(Error::invalid(format!(
                "covariance matrix is not positive semi-definite (eigenvalue {lam:.3e})"
            )));
        }
        if lam > 1e-14 * scale {
            cols.push(eig.eigenvectors.column(k) * lam.sqrt());
        }
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

pub fn check_psd(name: &str, sigma: &DMatrix<f64>) -> Result<()> {
    if !is_symmetric(sigma, 1e-12) {
        return Err(Error::invalid(format!("{name} must be symmetric")));
    }
    psd_factor(sigma).map(|_| ())
}

/// Solves the discrete Lyapunov equation `X = A X Aᵀ + Q`.
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let kron = a.kronecker(a);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    // column-major vec
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Linalg("singular Lyapunov system".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Linalg("singular linear system".into()))
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Linalg("matrix is not invertible".into()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorRepr {
    Scalar(f64),
    Items(Vec<f64>),
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub mod serde_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        match MatrixRepr::deserialize(d)? {
            MatrixRepr::Scalar(x) => Ok(DMatrix::from_element(1, 1, x)),
            MatrixRepr::Rows(rows) => rows_to_matrix(&rows).map_err(serde::de::Error::custom),
        }
    }
}

pub mod serde_vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DVector<f64>, D::Error> {
        Ok(match VectorRepr::deserialize(d)? {
            VectorRepr::Scalar(x) => DVector::from_element(1, x),
            VectorRepr::Items(v) => DVector::from_vec(v),
        })
    }
}

pub mod serde_matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(matrix_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DMatrix<f64>>, D::Error> {
        let raw: Vec<MatrixRepr> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|m| match m {
                MatrixRepr::Scalar(x) => Ok(DMatrix::from_element(1, 1, x)),
                MatrixRepr::Rows(rows) => rows_to_matrix(&rows).map_err(serde::de::Error::custom),
            })
            .collect()
    }
}

pub mod serde_vectors {
    use super::*;

    pub fn serialize<S: Serializer>(vs: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        vs.iter()
            .map(|v| v.as_slice().to_vec())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DVector<f64>>, D::Error> {
        let raw: Vec<VectorRepr> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|v| match v {
                VectorRepr::Scalar(x) => DVector::from_element(1, x),
                VectorRepr::Items(v) => DVector::from_vec(v),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, 0.9);
        let q = DMatrix::from_element(1, 1, 0.19);
        let x = discrete_lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_satisfies_equation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.7]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let x = discrete_lyapunov(&a, &q).unwrap();
        let resid = &x - (&a * &x * a.transpose() + &q);
        assert!(resid.abs().max() < 1e-12);
    }

    #[test]
    fn psd_factor_drops_null_directions() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&s).unwrap();
        assert_eq!(l.ncols(), 1);
        assert!((&l * l.transpose() - &s).abs().max() < 1e-12);
        assert_eq!(psd_factor(&DMatrix::zeros(1, 1)).unwrap().ncols(), 0);
        assert!(psd_factor(&DMatrix::from_element(1, 1, -1.0)).is_err());
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.8, 0.8, 0.0]);
        assert!((spectral_radius(&a) - 0.8).abs() < 1e-12);
    }
}
