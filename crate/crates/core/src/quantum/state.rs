use nalgebra::{DMatrix, SymmetricEigen, Vector4};

use super::operator::{pauli, Operator, Pauli, C64};
use crate::error::{Error, Result};

/// Entrywise tolerance for Hermiticity of states.
pub const STATE_HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-10;
/// Slack on the Bloch sub-purity bound.
pub const BLOCH_NORM_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = op.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = smallest_eigenvalue(&op);
        if min_eig < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(Self(op))
    }

    pub(crate) fn new_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self(Operator::identity(dim).scale(1.0 / dim as f64)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }

    /// `Tr(ρ A)`.
    pub fn expectation(&self, a: &Operator) -> C64 {
        self.0.trace_product(a)
    }
}

fn smallest_eigenvalue(op: &Operator) -> f64 {
    if op.dim() == 2 {
        // closed form for 2×2 Hermitian
        let m = op.matrix();
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = m[(0, 1)].norm();
        let mean = 0.5 * (a + d);
        let half = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return mean - half;
    }
    let sym: DMatrix<C64> = (op.matrix() + op.matrix().adjoint()).map(|z| z * 0.5);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `(1, ⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩)` of a single spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector(Vector4<f64>);

impl BlochVector {
    /// Builds a physical Bloch vector from its spatial components.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self(Vector4::new(1.0, x, y, z));
        v.validate()?;
        Ok(v)
    }

    /// Wraps four raw components, checking `v₀ = 1` and sub-purity.
    pub fn try_from_vector(v: Vector4<f64>) -> Result<Self> {
        let b = Self(v);
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0[0] != 1.0 {
            return Err(Error::InvalidState(format!(
                "Bloch component v0 = {} is not 1",
                self.0[0]
            )));
        }
        if !self.0.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidState("non-finite Bloch component".into()));
        }
        let n2 = self.spatial_norm_squared();
        if n2 > 1.0 + BLOCH_NORM_TOL {
            return Err(Error::BlochNorm(n2.sqrt()));
        }
        Ok(())
    }

    pub fn vector(&self) -> &Vector4<f64> {
        &self.0
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn spatial_norm_squared(&self) -> f64 {
        self.0[1] * self.0[1] + self.0[2] * self.0[2] + self.0[3] * self.0[3]
    }
}

/// Bloch vector of a 2×2 density matrix, `v_j = Tr(ρ σ^j)` with `v₀ = 1`.
pub fn bloch_from_density(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let [x, y, z] = Pauli::SPATIAL.map(|p| rho.expectation(&pauli(p)).re);
    BlochVector::new(x, y, z)
}

/// `ρ = ½ (1 + xσ^x + yσ^y + zσ^z)`.
pub fn density_from_bloch(v: &BlochVector) -> Result<DensityMatrix> {
    v.validate()?;
    let [x, y, z] = v.spatial();
    Ok(DensityMatrix::new_unchecked(single_spin_block(x, y, z)))
}

pub(crate) fn single_spin_block(x: f64, y: f64, z: f64) -> Operator {
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.5 * (1.0 + z), 0.0),
            C64::new(0.5 * x, -0.5 * y),
            C64::new(0.5 * x, 0.5 * y),
            C64::new(0.5 * (1.0 - z), 0.0),
        ],
    );
    Operator::from_matrix(m).expect("2x2")
}

/// Full-chain state with the system spin `½[[1+z, x−iy],[x+iy, 1−z]]` at
/// `system_site` and the bath factors on the remaining sites, in order.
pub fn initial_product_state(
    system_bloch: [f64; 3],
    bath: &DensityMatrix,
    system_site: usize,
) -> Result<DensityMatrix> {
    let [x, y, z] = system_bloch;
    let norm2 = x * x + y * y + z * z;
    if !norm2.is_finite() || norm2 > 1.0 + BLOCH_NORM_TOL {
        return Err(Error::BlochNorm(norm2.sqrt()));
    }
    let block = single_spin_block(x, y, z);
    let op = place_system_factor(&block, bath.operator(), system_site)?;
    Ok(DensityMatrix::new_unchecked(op))
}

/// `A_S` inserted at `site` into `B`, i.e. the operator whose entries are
/// `A[s, s'] · B[r, r']` where the full index interleaves system bit `s`
/// with bath bits `r` at position `site`.
pub(crate) fn place_system_factor(system: &Operator, bath: &Operator, site: usize) -> Result<Operator> {
    let db = bath.dim();
    if !db.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: db.next_power_of_two(),
            found: db,
        });
    }
    let nb = db.trailing_zeros() as usize;
    let n = nb + 1;
    if site == 0 || site > n {
        return Err(Error::SiteOutOfRange { site, n });
    }
    let layout = SiteLayout::new(n, site);
    let d = 1usize << n;
    let a = system.matrix();
    let b = bath.matrix();
    let m = DMatrix::from_fn(d, d, |i, j| {
        let (si, ri) = layout.split(i);
        let (sj, rj) = layout.split(j);
        a[(si, sj)] * b[(ri, rj)]
    });
    Operator::from_matrix(m)
}

/// Splits a full-chain basis index into (system bit, bath index).
#[derive(Clone, Copy, Debug)]
pub(crate) struct SiteLayout {
    shift: usize,
}

impl SiteLayout {
    pub(crate) fn new(n: usize, site: usize) -> Self {
        Self { shift: n - site }
    }

    pub(crate) fn split(&self, index: usize) -> (usize, usize) {
        let s = (index >> self.shift) & 1;
        let low = index & ((1 << self.shift) - 1);
        let high = index >> (self.shift + 1);
        (s, (high << self.shift) | low)
    }

    pub(crate) fn join(&self, s: usize, bath: usize) -> usize {
        let low = bath & ((1 << self.shift) - 1);
        let high = bath >> self.shift;
        (high << (self.shift + 1)) | (s << self.shift) | low
    }
}

/// Reduced 2×2 state of the spin at `system_site`.
pub fn partial_trace_to_system(rho: &DensityMatrix, system_site: usize, n: usize) -> Result<DensityMatrix> {
    let op = partial_trace_operator(rho.operator(), system_site, n)?;
    Ok(DensityMatrix::new_unchecked(op))
}

pub(crate) fn partial_trace_operator(op: &Operator, system_site: usize, n: usize) -> Result<Operator> {
    if n == 0 || n > 30 {
        return Err(Error::InvalidArgument(format!("chain length {n}")));
    }
    let d = 1usize << n;
    if op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.dim(),
        });
    }
    if system_site == 0 || system_site > n {
        return Err(Error::SiteOutOfRange { site: system_site, n });
    }
    let layout = SiteLayout::new(n, system_site);
    let m = op.matrix();
    let mut out = DMatrix::<C64>::zeros(2, 2);
    for r in 0..(d / 2) {
        for s in 0..2 {
            for sp in 0..2 {
                out[(s, sp)] += m[(layout.join(s, r), layout.join(sp, r))];
            }
        }
    }
    Operator::from_matrix(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bloch_of_simple_states() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert_eq!(*bloch_from_density(&mixed).unwrap().vector(), Vector4::new(1.0, 0.0, 0.0, 0.0));
        let up = DensityMatrix::new(Operator::diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(*bloch_from_density(&up).unwrap().vector(), Vector4::new(1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn bloch_norm_rejected() {
        assert!(matches!(BlochVector::new(0.8, 0.8, 0.0), Err(Error::BlochNorm(_))));
        assert!(BlochVector::try_from_vector(Vector4::new(0.9, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(Operator::diagonal(&[0.7, 0.7])).is_err());
        assert!(DensityMatrix::new(Operator::diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(Operator::diagonal(&[0.25; 4])).is_ok());
    }

    #[test]
    fn product_state_of_mixed_parts() {
        let bath = DensityMatrix::maximally_mixed(8).unwrap();
        let rho = initial_product_state([0.0, 0.0, 0.0], &bath, 2).unwrap();
        assert!((rho.operator() - &Operator::identity(16).scale(1.0 / 16.0)).max_abs() < 1e-16);
    }

    #[test]
    fn diagonal_initial_state_form() {
        let c = 0.3;
        let bath = DensityMatrix::new(Operator::diagonal(&[0.6, 0.4])).unwrap();
        let rho = initial_product_state([0.0, 0.0, 1.0 - 2.0 * c], &bath, 1).unwrap();
        let expected = Operator::diagonal(&[1.0 - c, c]).kron(bath.operator());
        assert!((rho.operator() - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn product_state_rejects_outside_ball() {
        let bath = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(initial_product_state([1.0, 0.5, 0.0], &bath, 1).is_err());
        assert!(initial_product_state([0.0, 0.0, 1.0], &bath, 1).is_ok());
    }

    #[test]
    fn system_factor_placement_matches_kron() {
        let a = single_spin_block(0.3, -0.2, 0.5);
        let b1 = single_spin_block(0.1, 0.0, 0.2);
        let b2 = single_spin_block(-0.4, 0.3, 0.0);
        let bath = b1.kron(&b2);
        let placed = place_system_factor(&a, &bath, 2).unwrap();
        let direct = b1.kron(&a).kron(&b2);
        assert!((&placed - &direct).max_abs() < 1e-16);
        let placed = place_system_factor(&a, &bath, 3).unwrap();
        let direct = b1.kron(&b2).kron(&a);
        assert!((&placed - &direct).max_abs() < 1e-16);
    }

    #[test]
    fn partial_trace_cases() {
        let mixed = DensityMatrix::maximally_mixed(16).unwrap();
        let red = partial_trace_to_system(&mixed, 3, 4).unwrap();
        assert!((red.operator() - &Operator::identity(2).scale(0.5)).max_abs() < 1e-16);

        // (|00⟩ + |11⟩)/√2
        let mut bell = DMatrix::<C64>::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            bell[(i, j)] = C64::new(0.5, 0.0);
        }
        let bell = DensityMatrix::new(Operator::from_matrix(bell).unwrap()).unwrap();
        for site in 1..=2 {
            let red = partial_trace_to_system(&bell, site, 2).unwrap();
            assert!((red.operator() - &Operator::identity(2).scale(0.5)).max_abs() < 1e-16);
        }
        assert!(partial_trace_to_system(&bell, 1, 3).is_err());
        assert!(partial_trace_to_system(&bell, 3, 2).is_err());
    }

    proptest! {
        #[test]
        fn bloch_round_trip(x in -0.57f64..0.57, y in -0.57f64..0.57, z in -0.57f64..0.57) {
            let v = BlochVector::new(x, y, z).unwrap();
            let rho = density_from_bloch(&v).unwrap();
            let back = bloch_from_density(&rho).unwrap();
            prop_assert!((back.vector() - v.vector()).amax() <= 1e-14);
            let again = density_from_bloch(&back).unwrap();
            prop_assert!((again.operator() - rho.operator()).max_abs() <= 1e-14);
        }

        #[test]
        fn partial_trace_of_product_recovers_system(
            x in -0.5f64..0.5, y in -0.5f64..0.5, z in -0.5f64..0.5,
            bx in -0.5f64..0.5, bz in -0.5f64..0.5,
            site in 1usize..=3,
        ) {
            let bath1 = single_spin_block(bx, 0.0, bz);
            let bath2 = single_spin_block(0.0, bz, bx);
            let bath = DensityMatrix::new(bath1.kron(&bath2)).unwrap();
            let rho = initial_product_state([x, y, z], &bath, site).unwrap();
            prop_assert!((rho.operator().trace().re - 1.0).abs() < 1e-14);
            let red = partial_trace_to_system(&rho, site, 3).unwrap();
            prop_assert!((red.operator() - &single_spin_block(x, y, z)).max_abs() < 1e-15);
        }
    }
}
