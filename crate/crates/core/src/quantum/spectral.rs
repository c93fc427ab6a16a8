use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::operator::{Operator, C64};
use crate::error::{Error, Result};

/// Hermiticity tolerance for operators handed to the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition `H = Q diag(E) Q†` of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn new(h: &Operator) -> Result<Self> {
        let err = h.hermiticity_error();
        if err > HERMITIAN_TOL * h.max_abs().max(1.0) {
            return Err(Error::NotHermitian(err));
        }
        let eig = SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// `Q† A Q`.
    pub fn to_eigenbasis(&self, op: &Operator) -> DMatrix<C64> {
        self.eigenvectors.adjoint() * op.matrix() * &self.eigenvectors
    }

    /// `Q A Q†`.
    pub fn from_eigenbasis(&self, m: &DMatrix<C64>) -> Operator {
        Operator::from_matrix(&self.eigenvectors * m * self.eigenvectors.adjoint())
            .expect("square by construction")
    }

    /// `Q diag(w) Q†` for real weights `w`.
    pub fn from_eigenbasis_diagonal(&self, weights: &[f64]) -> Operator {
        let d = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, w) in weights.iter().enumerate().take(d) {
            scaled.column_mut(j).scale_mut(*w);
        }
        Operator::from_matrix(scaled * self.eigenvectors.adjoint()).expect("square by construction")
    }

    /// `max|H − Q diag(E) Q†|`.
    pub fn reconstruction_error(&self, h: &Operator) -> f64 {
        let rebuilt = self.from_eigenbasis_diagonal(self.eigenvalues.as_slice());
        (h - &rebuilt).max_abs()
    }

    /// `max|Q†Q − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim();
        let g = self.eigenvectors.adjoint() * &self.eigenvectors;
        (g - DMatrix::<C64>::identity(d, d))
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()))
    }

    /// `U_t ρ U_t†` with `U_t = e^{−iHt}`, evaluated in the eigenbasis.
    pub fn evolve_operator(&self, rho: &Operator, t: f64) -> Operator {
        let mut m = self.to_eigenbasis(rho);
        let phases: Vec<C64> = self
            .eigenvalues
            .iter()
            .map(|e| C64::from_polar(1.0, -e * t))
            .collect();
        let d = self.dim();
        for j in 0..d {
            for i in 0..d {
                m[(i, j)] *= phases[i] * phases[j].conj();
            }
        }
        self.from_eigenbasis(&m)
    }
}
