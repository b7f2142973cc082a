//! Symmetric positive-definite matrices with a cached Cholesky factor.

use crate::error::{Error, Result};
use crate::real::{cv, Real};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

/// Relative tolerance for the symmetry check at construction.
const SYMMETRY_RTOL: f64 = 1e-10;
/// Condition numbers above this are rejected as numerically singular.
const MAX_CONDITION: f64 = 1e12;

/// A validated symmetric positive-definite matrix.
///
/// Construction checks symmetry, positive-definiteness and conditioning, then
/// caches the lower Cholesky factor so that solves and log-determinants are
/// cheap. Density evaluation dominates sampler runtime, so the factorization
/// is computed exactly once per matrix.
#[derive(Clone, Debug)]
pub struct SpdMatrix<T: Real> {
    mat: DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    ln_det: T,
}

impl<T: Real> SpdMatrix<T> {
    pub fn new(mat: DMatrix<T>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "SPD matrix must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotSpd("matrix has non-finite entries".into()));
        }
        let scale = mat.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        let asym = (&mat - mat.transpose()).iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if asym > cv::<T>(SYMMETRY_RTOL) * scale.max(T::one()) {
            return Err(Error::NotSpd(format!(
                "asymmetry {asym:e} exceeds tolerance at scale {scale:e}"
            )));
        }
        // Symmetrize to remove round-off before factorizing.
        let sym = (&mat + mat.transpose()) * cv::<T>(0.5);
        let chol = Cholesky::new(sym.clone())
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        let eigs = sym.clone().symmetric_eigenvalues();
        let emax = eigs.iter().fold(T::zero(), |m, &x| m.max(x));
        let emin = eigs.iter().fold(emax, |m, &x| m.min(x));
        if emin <= T::zero() || emax / emin > cv::<T>(MAX_CONDITION) {
            return Err(Error::NotSpd(format!(
                "condition number {:e} exceeds {MAX_CONDITION:e}",
                emax / emin
            )));
        }
        let ln_det = (0..sym.nrows())
            .map(|i| chol.l_dirty()[(i, i)].ln())
            .fold(T::zero(), |a, b| a + b)
            * cv::<T>(2.0);
        Ok(Self { mat: sym, chol, ln_det })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    /// 2 Σ ln L_ii.
    pub fn ln_det(&self) -> T {
        self.ln_det
    }

    /// Solve Σ x = v.
    pub fn solve(&self, v: &DVector<T>) -> DVector<T> {
        self.chol.solve(v)
    }

    /// Solve Σ X = M column-wise.
    pub fn solve_mat(&self, m: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(m)
    }

    /// Quadratic form v' Σ⁻¹ v.
    pub fn inv_quad(&self, v: &DVector<T>) -> T {
        // ||L⁻¹ v||²
        let mut w = v.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        w.dot(&w)
    }

    /// Dense inverse (used where full Σ⁻¹ is accumulated across draws).
    pub fn inverse(&self) -> DMatrix<T> {
        self.chol.inverse()
    }

    /// Lower Cholesky factor L with Σ = L L'.
    pub fn chol_lower(&self) -> DMatrix<T> {
        self.chol.l()
    }

    /// L v without materializing L (upper part of the packed factor ignored).
    pub fn chol_mul(&self, v: &DVector<T>) -> DVector<T> {
        let l = self.chol.l_dirty();
        let n = self.dim();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..=i {
                acc += l[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// trace(A Σ⁻¹) for symmetric A.
    pub fn trace_solve(&self, a: &DMatrix<T>) -> T {
        self.chol.solve(a).trace()
    }
}

impl<T: Real> PartialEq for SpdMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

#[derive(Serialize, Deserialize)]
struct SpdData<T> {
    dim: usize,
    rows: Vec<Vec<T>>,
}

impl<T: Real> Serialize for SpdMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.mat[(i, j)]).collect())
            .collect();
        SpdData { dim: self.dim(), rows }.serialize(ser)
    }
}

impl<'de, T: Real> Deserialize<'de> for SpdMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let data = SpdData::<T>::deserialize(de)?;
        if data.rows.len() != data.dim || data.rows.iter().any(|r| r.len() != data.dim) {
            return Err(serde::de::Error::custom("ragged SPD matrix data"));
        }
        let mat = DMatrix::from_fn(data.dim, data.dim, |i, j| data.rows[i][j]);
        SpdMatrix::new(mat).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn construction_checks() {
        assert!(SpdMatrix::new(m2(2.0, 0.5, 0.5, 1.0)).is_ok());
        // asymmetric
        assert!(matches!(SpdMatrix::new(m2(2.0, 0.5, 0.4, 1.0)), Err(Error::NotSpd(_))));
        // indefinite
        assert!(matches!(SpdMatrix::new(m2(1.0, 2.0, 2.0, 1.0)), Err(Error::NotSpd(_))));
        // near-singular: condition number > 1e12
        assert!(matches!(
            SpdMatrix::new(m2(1.0, 0.0, 0.0, 1e-13)),
            Err(Error::NotSpd(_))
        ));
        // tiny but well-conditioned is fine
        assert!(SpdMatrix::new(m2(1e-12, 0.0, 0.0, 1e-12)).is_ok());
    }

    #[test]
    fn solve_and_det() {
        let s = SpdMatrix::new(m2(4.0, 1.0, 1.0, 3.0)).unwrap();
        assert_relative_eq!(s.ln_det(), (11.0f64).ln(), max_relative = 1e-12);
        let v = DVector::from_row_slice(&[1.0, 2.0]);
        let x = s.solve(&v);
        let back = s.matrix() * x;
        assert_relative_eq!(back[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(back[1], 2.0, max_relative = 1e-12);
        // quadratic form
        let q = s.inv_quad(&v);
        let direct = v.dot(&s.solve(&v));
        assert_relative_eq!(q, direct, max_relative = 1e-12);
    }

    #[test]
    fn chol_mul_matches_factor() {
        let s = SpdMatrix::new(m2(4.0, 1.0, 1.0, 3.0)).unwrap();
        let v = DVector::from_row_slice(&[0.3, -1.2]);
        let direct = s.chol_lower() * &v;
        let fast = s.chol_mul(&v);
        assert_relative_eq!(direct[0], fast[0], max_relative = 1e-14);
        assert_relative_eq!(direct[1], fast[1], max_relative = 1e-14);
    }

    #[test]
    fn serde_round_trip() {
        let s = SpdMatrix::new(m2(4.0, 1.0, 1.0, 3.0)).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: SpdMatrix<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
