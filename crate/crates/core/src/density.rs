//! Density matrices over a level scheme's basis.
//!
//! A thin validated wrapper around a complex matrix: Hermitian, unit trace,
//! positive semidefinite. Populations live on the diagonal; `coherence(i, j)`
//! is ρ_{ij} with i the row (bra) index.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Pure state concentrated on one basis level.
    pub fn pure(dim: usize, level: usize) -> DensityMatrix {
        assert!(level < dim, "level index {level} out of range for dim {dim}");
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(level, level)] = Complex64::new(1.0, 0.0);
        DensityMatrix { rho }
    }

    /// Pure state ρ = |ψ⟩⟨ψ| from an amplitude vector (normalized here).
    pub fn from_amplitudes(psi: &[Complex64]) -> Result<DensityMatrix> {
        let norm_sq: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(Error::InvalidDensityMatrix(format!(
                "state vector has norm² = {norm_sq}"
            )));
        }
        let n = psi.len();
        let scale = 1.0 / norm_sq;
        let rho = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() * scale);
        Ok(DensityMatrix { rho })
    }

    /// Wrap an explicit matrix, verifying it is a physical density matrix.
    pub fn from_matrix(rho: DMatrix<Complex64>) -> Result<DensityMatrix> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::InvalidDensityMatrix(format!(
                "matrix is {}×{}, not square",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let dm = DensityMatrix { rho };
        dm.validate()?;
        Ok(dm)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    /// Escape hatch for tests that assemble states by hand.
    #[cfg(test)]
    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.rho
    }

    pub(crate) fn from_matrix_unchecked(rho: DMatrix<Complex64>) -> DensityMatrix {
        DensityMatrix { rho }
    }

    /// Population of one basis level, Re ρ_{ii}.
    pub fn population(&self, level: usize) -> f64 {
        self.rho[(level, level)].re
    }

    /// Off-diagonal element ρ_{ij}.
    pub fn coherence(&self, i: usize, j: usize) -> Complex64 {
        self.rho[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).sum()
    }

    /// Total population in a set of levels.
    pub fn population_in(&self, levels: impl IntoIterator<Item = usize>) -> f64 {
        levels.into_iter().map(|i| self.population(i)).sum()
    }

    /// Unitary conjugation ρ → U ρ U†.
    pub fn transformed(&self, u: &DMatrix<Complex64>) -> DensityMatrix {
        debug_assert_eq!(u.nrows(), self.dim());
        DensityMatrix { rho: u * &self.rho * u.adjoint() }
    }

    /// Check Hermiticity (1e-10), unit trace (1e-9), and positivity
    /// (eigenvalues ≥ −1e-9).
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in i..n {
                let d = (self.rho[(i, j)] - self.rho[(j, i)].conj()).norm();
                if d > 1e-10 {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "not Hermitian: |ρ[{i},{j}] - ρ[{j},{i}]*| = {d:.3e}"
                    )));
                }
            }
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDensityMatrix(format!("trace = {trace}, expected 1")));
        }
        // Hermitian within tolerance: symmetrize before the eigendecomposition
        // so the solver sees an exactly Hermitian input.
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let eigenvalues = herm.symmetric_eigen().eigenvalues;
        if let Some(min) = eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -1e-9 {
                return Err(Error::InvalidDensityMatrix(format!(
                    "negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pure_state_basics() {
        let rho = DensityMatrix::pure(4, 2);
        assert_eq!(rho.dim(), 4);
        assert_eq!(rho.population(2), 1.0);
        assert_eq!(rho.population(0), 0.0);
        assert_eq!(rho.trace(), 1.0);
        rho.validate().unwrap();
    }

    #[test]
    fn from_amplitudes_normalizes() {
        // Unnormalized (2, 2i) → equal populations, coherence -i/2.
        let rho = DensityMatrix::from_amplitudes(&[c(2.0, 0.0), c(0.0, 2.0)]).unwrap();
        assert!((rho.population(0) - 0.5).abs() < 1e-15);
        assert!((rho.population(1) - 0.5).abs() < 1e-15);
        assert!((rho.coherence(0, 1) - c(0.0, -0.5)).norm() < 1e-15);
        rho.validate().unwrap();
        assert!(DensityMatrix::from_amplitudes(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn transformed_preserves_physicality() {
        // Rotate |0⟩ by a 2×2 unitary: populations follow |u_{i0}|².
        let rho = DensityMatrix::pure(2, 0);
        let th = 0.7_f64;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(th.cos(), 0.0),
                c(0.0, -th.sin()),
                c(0.0, -th.sin()),
                c(th.cos(), 0.0),
            ],
        );
        let out = rho.transformed(&u);
        out.validate().unwrap();
        assert!((out.population(0) - th.cos().powi(2)).abs() < 1e-14);
        assert!((out.population(1) - th.sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn validate_rejects_unphysical() {
        // Non-Hermitian.
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.1, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::from_matrix(m).is_err());
        // Wrong trace.
        let m = DMatrix::from_row_slice(2, 2, &[c(0.9, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.3, 0.0)]);
        assert!(DensityMatrix::from_matrix(m).is_err());
        // Hermitian, trace 1, but indefinite (|coherence| too large).
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.9, 0.0), c(0.9, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::from_matrix(m).is_err());
        // Physical mixed state passes.
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)]);
        DensityMatrix::from_matrix(m).unwrap();
    }
}
