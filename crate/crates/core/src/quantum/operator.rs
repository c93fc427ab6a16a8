use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Single-spin basis operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const SPATIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
}

/// Dense complex operator on a 2^k-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    /// Real diagonal operator.
    pub fn diagonal(entries: &[f64]) -> Self {
        let d = entries.len();
        Self(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(entries[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Self(self.0.kronecker(&other.0))
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Operator {
        Self(self.0.map(|z| z * s))
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl std::ops::AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.0 += &rhs.0;
    }
}

/// 2×2 identity or Pauli matrix; `Z = diag(1, -1)`.
pub fn pauli(which: Pauli) -> Operator {
    let m = match which {
        Pauli::I => [ONE, ZERO, ZERO, ONE],
        Pauli::X => [ZERO, ONE, ONE, ZERO],
        Pauli::Y => [ZERO, -I, I, ZERO],
        Pauli::Z => [ONE, ZERO, ZERO, -ONE],
    };
    Operator(DMatrix::from_row_slice(2, 2, &m))
}

/// Projector on the up state, `n = (1 + σ^z)/2`.
pub fn number() -> Operator {
    Operator::diagonal(&[1.0, 0.0])
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at `site` (1-based, site 1 leftmost).
pub fn embed(op: &Operator, site: usize, n: usize) -> Result<Operator> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: op.dim(),
        });
    }
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    let left = Operator::identity(1 << (site - 1));
    let right = Operator::identity(1 << (n - site));
    Ok(left.kron(op).kron(&right))
}

/// 1 when spin `site` is up in computational basis state `index`, else 0.
pub(crate) fn occupation(index: usize, site: usize, n: usize) -> f64 {
    // site 1 is the most significant bit; bit value 0 is "up" (σ^z = +1).
    if (index >> (n - site)) & 1 == 0 {
        1.0
    } else {
        0.0
    }
}

/// `Σ_i coeff · σ^x_i` over the listed sites.
pub(crate) fn transverse_field(sites: impl IntoIterator<Item = (usize, f64)>, n: usize) -> Operator {
    let d = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for (site, coeff) in sites {
        if coeff == 0.0 {
            continue;
        }
        let mask = 1usize << (n - site);
        for i in 0..d {
            m[(i ^ mask, i)] += C64::new(coeff, 0.0);
        }
    }
    Operator(m)
}
