//! Exact unitary evolution of a spin chain, reported through the Bloch
//! vector of one spin.
//!
//! The Hamiltonian is diagonalized once. With `ρ̃ = Q†ρ₀Q` and `Õ = Q†OQ`,
//!
//! ```text
//! ⟨O⟩_t = Σ_m ρ̃_mm Õ_mm + 2 Re Σ_{m<n} ρ̃_mn Õ_nm e^{−i(E_m−E_n)t}
//! ```
//!
//! so each time step costs one pass over the `d(d−1)/2` eigenvalue pairs,
//! shared by every observable and every initial operator evaluated together.

use nalgebra::{DMatrix, Matrix4, Vector4};

use super::operator::{embed, pauli, Operator, Pauli, C64};
use super::spectral::SpectralDecomposition;
use super::state::{place_system_factor, single_spin_block, BlochVector, DensityMatrix};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Diagonalized Hamiltonian together with the system-spin Pauli observables
/// in its eigenbasis.
#[derive(Clone, Debug)]
pub struct Evolver {
    spectrum: SpectralDecomposition,
    observables: [DMatrix<C64>; 3],
    n: usize,
    system_site: usize,
}

impl Evolver {
    pub fn new(h: &Operator, n: usize, system_site: usize) -> Result<Self> {
        let d = 1usize << n;
        if h.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: h.dim(),
            });
        }
        if system_site == 0 || system_site > n {
            return Err(Error::SiteOutOfRange { site: system_site, n });
        }
        let spectrum = SpectralDecomposition::new(h)?;
        let observables = Pauli::SPATIAL.map(|p| {
            let op = embed(&pauli(p), system_site, n).expect("site checked");
            spectrum.to_eigenbasis(&op)
        });
        Ok(Self {
            spectrum,
            observables,
            n,
            system_site,
        })
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn system_site(&self) -> usize {
        self.system_site
    }

    /// Bloch vectors of the system spin on every grid point.
    pub fn reduced_trajectory(&self, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<BlochVector>> {
        self.check_dim(rho0.dim())?;
        let start = self.spectrum.to_eigenbasis(rho0.operator());
        let series = self.spatial_expectations(&[start], grid);
        series[0]
            .iter()
            .map(|&[x, y, z]| BlochVector::try_from_vector(Vector4::new(1.0, x, y, z)))
            .collect()
    }

    /// Linear map `Φ(t)` on Bloch vectors for a fixed bath state, so that the
    /// system spin started in `(1, x, y, z)` evolves to `Φ(t)·(1, x, y, z)`.
    pub fn reduced_map(&self, bath: &DensityMatrix, grid: &TimeGrid) -> Result<ReducedMap> {
        self.check_dim(2 * bath.dim())?;
        // ρ₀ = Σ_j v_j (σ_j/2 ⊗ ρ_B)
        let mut basis = Vec::with_capacity(4);
        for (x, y, z) in [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)] {
            let mut block = single_spin_block(x, y, z);
            if (x, y, z) != (0.0, 0.0, 0.0) {
                // σ_j/2 = block(e_j) − block(0)
                block = &block - &single_spin_block(0.0, 0.0, 0.0);
            }
            let op = place_system_factor(&block, bath.operator(), self.system_site)?;
            basis.push(self.spectrum.to_eigenbasis(&op));
        }
        let series = self.spatial_expectations(&basis, grid);
        let maps = (0..grid.len())
            .map(|k| {
                if k == 0 {
                    // exact at t = 0, so trajectories start precisely at their initial state
                    return Matrix4::identity();
                }
                let mut phi = Matrix4::zeros();
                phi[(0, 0)] = 1.0;
                for (col, s) in series.iter().enumerate() {
                    for row in 0..3 {
                        phi[(row + 1, col)] = s[k][row];
                    }
                }
                phi
            })
            .collect();
        Ok(ReducedMap { grid: *grid, maps })
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.spectrum.dim();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    /// For every start operator (already in the eigenbasis) and grid time,
    /// `[Tr(ρ(t)σ^x), Tr(ρ(t)σ^y), Tr(ρ(t)σ^z)]` of the system spin.
    fn spatial_expectations(&self, starts: &[DMatrix<C64>], grid: &TimeGrid) -> Vec<Vec<[f64; 3]>> {
        let e = self.spectrum.eigenvalues();
        let d = e.len();
        let ns = starts.len();
        let width = ns * 3;

        let mut constant = vec![0.0; width];
        let mut omegas = Vec::with_capacity(d * (d - 1) / 2);
        let mut coeffs: Vec<C64> = Vec::with_capacity(d * (d - 1) / 2 * width);
        for m in 0..d {
            for (s, rho) in starts.iter().enumerate() {
                for (k, o) in self.observables.iter().enumerate() {
                    constant[s * 3 + k] += (rho[(m, m)] * o[(m, m)]).re;
                }
            }
            for n in (m + 1)..d {
                omegas.push(e[m] - e[n]);
                for rho in starts {
                    for o in &self.observables {
                        coeffs.push(rho[(m, n)] * o[(n, m)]);
                    }
                }
            }
        }

        let mut out = vec![Vec::with_capacity(grid.len()); ns];
        let mut acc = vec![0.0; width];
        for t in grid.times() {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (p, &w) in omegas.iter().enumerate() {
                let (sin, cos) = (w * t).sin_cos();
                let c = &coeffs[p * width..(p + 1) * width];
                // Re(c · e^{−iωt}) = c.re cos + c.im sin
                for (a, z) in acc.iter_mut().zip(c) {
                    *a += z.re * cos + z.im * sin;
                }
            }
            for (s, series) in out.iter_mut().enumerate() {
                let mut v = [0.0; 3];
                for k in 0..3 {
                    v[k] = constant[s * 3 + k] + 2.0 * acc[s * 3 + k];
                }
                series.push(v);
            }
        }
        out
    }
}

/// Exact linear dynamical map of the system Bloch vector on a time grid.
#[derive(Clone, Debug)]
pub struct ReducedMap {
    grid: TimeGrid,
    maps: Vec<Matrix4<f64>>,
}

impl ReducedMap {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn maps(&self) -> &[Matrix4<f64>] {
        &self.maps
    }

    /// Trajectory of the system spin started at `(x, y, z)`.
    pub fn apply(&self, initial: [f64; 3]) -> Result<Vec<BlochVector>> {
        let start = BlochVector::new(initial[0], initial[1], initial[2])?;
        self.maps
            .iter()
            .map(|phi| {
                let mut v = phi * start.vector();
                v[0] = 1.0;
                BlochVector::try_from_vector(v)
            })
            .collect()
    }
}

/// Evolves `rho0` under `h` and returns the Bloch vector of `system_site`
/// at `t = 0, dt, …, t_total`.
pub fn evolve_reduced(
    h: &Operator,
    rho0: &DensityMatrix,
    system_site: usize,
    t_total: f64,
    dt: f64,
) -> Result<Vec<BlochVector>> {
    if h.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho0.dim(),
        });
    }
    let d = h.dim();
    if !d.is_power_of_two() || d < 2 {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two().max(2),
            found: d,
        });
    }
    let grid = TimeGrid::from_duration(t_total, dt)?;
    let n = d.trailing_zeros() as usize;
    Evolver::new(h, n, system_site)?.reduced_trajectory(rho0, &grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::model::{build_bath_state, build_hamiltonian, SpinModel};
    use crate::quantum::state::{initial_product_state, partial_trace_to_system, bloch_from_density};

    #[test]
    fn rabi_rotation_single_spin() {
        let omega = 1.3;
        let h = pauli(Pauli::X).scale(omega);
        let (x, y, z) = (0.2, -0.4, 0.5);
        let rho0 = DensityMatrix::new(single_spin_block(x, y, z)).unwrap();
        let traj = evolve_reduced(&h, &rho0, 1, 10.0, 0.01).unwrap();
        assert_eq!(traj.len(), 1001);
        for (k, v) in traj.iter().enumerate() {
            let t = k as f64 * 0.01;
            let (s, c) = (2.0 * omega * t).sin_cos();
            let v = v.vector();
            assert!((v[1] - x).abs() < 1e-12);
            assert!((v[2] - (y * c - z * s)).abs() < 1e-12);
            assert!((v[3] - (z * c + y * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_hamiltonian_conserves_populations() {
        // Ω → 0 limit: H diagonal; assemble directly since Ω = 0 fails validation.
        let m = SpinModel::model_i(5, 0.0, 1.0, 1.0);
        let h = crate::quantum::model::assemble_hamiltonian(&m);
        let bath = DensityMatrix::maximally_mixed(16).unwrap();
        let rho0 = initial_product_state([0.0, 0.0, 0.4], &bath, 3).unwrap();
        let traj = evolve_reduced(&h, &rho0, 3, 2.0, 0.1).unwrap();
        for v in &traj {
            assert!((v.vector()[3] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_partial_trace_of_evolved_state() {
        let model = SpinModel::model_ii(4, 1.0, 1.0, 0.8, 1.5, 0.3);
        let h = build_hamiltonian(&model).unwrap();
        let bath = build_bath_state(&model).unwrap();
        let rho0 = initial_product_state([0.3, -0.2, 0.6], &bath, 1).unwrap();
        let ev = Evolver::new(&h, 4, 1).unwrap();
        let grid = TimeGrid::from_duration(3.0, 0.5).unwrap();
        let traj = ev.reduced_trajectory(&rho0, &grid).unwrap();
        for (k, t) in grid.times().enumerate() {
            let rho_t = DensityMatrix::new_unchecked(ev.spectrum().evolve_operator(rho0.operator(), t));
            let red = partial_trace_to_system(&rho_t, 1, 4).unwrap();
            let direct = bloch_from_density(&red).unwrap();
            assert!((direct.vector() - traj[k].vector()).amax() < 1e-12);
        }
    }

    #[test]
    fn reduced_map_agrees_with_direct_evolution() {
        let model = SpinModel::model_i(5, 1.0, 1.5, 1.0);
        let h = build_hamiltonian(&model).unwrap();
        let bath = build_bath_state(&model).unwrap();
        let site = model.system_site();
        let ev = Evolver::new(&h, 5, site).unwrap();
        let grid = TimeGrid::from_duration(2.0, 0.01).unwrap();
        let map = ev.reduced_map(&bath, &grid).unwrap();
        for init in [[0.1, 0.2, -0.3], [0.0, 0.0, 0.9], [-0.5, 0.5, 0.1]] {
            let rho0 = initial_product_state(init, &bath, site).unwrap();
            let direct = ev.reduced_trajectory(&rho0, &grid).unwrap();
            let mapped = map.apply(init).unwrap();
            for (a, b) in direct.iter().zip(&mapped) {
                assert!((a.vector() - b.vector()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let h = pauli(Pauli::X);
        let rho = DensityMatrix::maximally_mixed(4).unwrap();
        assert!(matches!(
            evolve_reduced(&h, &rho, 1, 1.0, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = Operator::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 1.0), C64::new(1.0, 1.0), C64::new(0.0, 0.0)],
        ))
        .unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(evolve_reduced(&bad, &rho, 1, 1.0, 0.1), Err(Error::NotHermitian(_))));
    }
}
