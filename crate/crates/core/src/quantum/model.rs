use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::operator::{occupation, transverse_field, Operator, C64};
use super::spectral::SpectralDecomposition;
use super::state::DensityMatrix;
use crate::error::{Error, Result};

/// Which of the two chain geometries a [`SpinModel`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Open chain with power-law density-density interactions; the system
    /// is the middle spin and the bath starts at infinite temperature.
    ModelI,
    /// Closed nearest-neighbour chain; spin 1 is the system, coupled to its
    /// two neighbours with `v_prime`, and the bath starts in a Gibbs state.
    ModelII,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ModelI => "model-i",
            Family::ModelII => "model-ii",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model-i" | "model_i" | "modeli" | "i" | "1" => Ok(Family::ModelI),
            "model-ii" | "model_ii" | "modelii" | "ii" | "2" => Ok(Family::ModelII),
            other => Err(Error::InvalidModel(format!("unknown model family `{other}`"))),
        }
    }
}

/// Parameters of a spin chain. Energies are in units of the transverse
/// field, times in units of its inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinModel {
    pub family: Family,
    pub n: usize,
    pub omega: f64,
    pub v: f64,
    /// Power-law exponent (Model I).
    pub alpha: f64,
    /// Field on the system spin (Model II).
    pub omega_prime: f64,
    /// System-bath coupling (Model II).
    pub v_prime: f64,
    /// Inverse bath temperature (Model II).
    pub beta: f64,
}

impl SpinModel {
    pub fn model_i(n: usize, omega: f64, v: f64, alpha: f64) -> Self {
        Self {
            family: Family::ModelI,
            n,
            omega,
            v,
            alpha,
            omega_prime: 0.0,
            v_prime: 0.0,
            beta: 0.0,
        }
    }

    pub fn model_ii(n: usize, omega: f64, v: f64, omega_prime: f64, v_prime: f64, beta: f64) -> Self {
        Self {
            family: Family::ModelII,
            n,
            omega,
            v,
            alpha: 0.0,
            omega_prime,
            v_prime,
            beta,
        }
    }

    /// 1-based index of the reduced spin.
    pub fn system_site(&self) -> usize {
        match self.family {
            Family::ModelI => (self.n + 1) / 2,
            Family::ModelII => 1,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 2 {
            problems.push(format!("N = {} must be at least 2", self.n));
        }
        if self.n > 16 {
            problems.push(format!("N = {} exceeds the dense-matrix limit of 16", self.n));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            problems.push(format!("omega = {} must be positive", self.omega));
        }
        if !self.v.is_finite() {
            problems.push(format!("V = {} must be finite", self.v));
        }
        match self.family {
            Family::ModelI => {
                if self.n % 2 == 0 {
                    problems.push(format!("N = {} must be odd for Model I", self.n));
                }
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    problems.push(format!("alpha = {} must be positive", self.alpha));
                }
            }
            Family::ModelII => {
                if !(self.beta >= 0.0 && self.beta.is_finite()) {
                    problems.push(format!("beta = {} must be non-negative", self.beta));
                }
                if !self.omega_prime.is_finite() || !self.v_prime.is_finite() {
                    problems.push("omega_prime and v_prime must be finite".to_string());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(problems.join("; ")))
        }
    }

    /// Copy with one named parameter replaced. Names follow the config keys:
    /// `n`, `omega`, `v`, `alpha`, `omega_prime`, `v_prime`, `beta`.
    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "n" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidModel(format!("N = {value} is not a count")));
                }
                self.n = value as usize;
            }
            "omega" => self.omega = value,
            "v" => self.v = value,
            "alpha" => self.alpha = value,
            "omega_prime" => self.omega_prime = value,
            "v_prime" => self.v_prime = value,
            "beta" => self.beta = value,
            other => return Err(Error::InvalidModel(format!("unknown parameter `{other}`"))),
        }
        Ok(self)
    }

    /// `(key, value)` pairs describing the model, as written in file headers.
    pub fn header_entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("model", self.family.to_string()),
            ("N", self.n.to_string()),
            ("omega", self.omega.to_string()),
            ("V", self.v.to_string()),
        ];
        match self.family {
            Family::ModelI => out.push(("alpha", self.alpha.to_string())),
            Family::ModelII => {
                out.push(("omega_prime", self.omega_prime.to_string()));
                out.push(("v_prime", self.v_prime.to_string()));
                out.push(("beta", self.beta.to_string()));
            }
        }
        out.push(("system_site", self.system_site().to_string()));
        out
    }
}

/// Dense Hamiltonian of the full chain.
pub fn build_hamiltonian(model: &SpinModel) -> Result<Operator> {
    model.validate()?;
    Ok(assemble_hamiltonian(model))
}

/// Hamiltonian assembly without parameter validation.
pub(crate) fn assemble_hamiltonian(model: &SpinModel) -> Operator {
    let n = model.n;
    let d = model.dim();
    match model.family {
        Family::ModelI => {
            let mut h = transverse_field((1..=n).map(|s| (s, model.omega)), n);
            let diag = diagonal_terms(d, |idx| {
                let mut e = 0.0;
                for i in 1..=n {
                    if occupation(idx, i, n) == 0.0 {
                        continue;
                    }
                    for j in (i + 1)..=n {
                        e += occupation(idx, j, n) / ((j - i) as f64).powf(model.alpha);
                    }
                }
                model.v * e
            });
            h += &diag;
            h
        }
        Family::ModelII => {
            let fields = std::iter::once((1, model.omega_prime)).chain((2..=n).map(|s| (s, model.omega)));
            let mut h = transverse_field(fields, n);
            let diag = diagonal_terms(d, |idx| {
                let occ = |s| occupation(idx, s, n);
                let bulk: f64 = (2..n).map(|j| occ(j) * occ(j + 1)).sum();
                model.v * bulk + model.v_prime * occ(1) * (occ(2) + occ(n))
            });
            h += &diag;
            h
        }
    }
}

/// Initial bath state on the `N − 1` non-system spins.
pub fn build_bath_state(model: &SpinModel) -> Result<DensityMatrix> {
    model.validate()?;
    let nb = model.n - 1;
    let db = 1usize << nb;
    match model.family {
        Family::ModelI => DensityMatrix::maximally_mixed(db),
        Family::ModelII => {
            if model.beta == 0.0 {
                return DensityMatrix::maximally_mixed(db);
            }
            let h = bath_hamiltonian(model);
            let spec = SpectralDecomposition::new(&h)?;
            let e_min = spec
                .eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = spec
                .eigenvalues()
                .iter()
                .map(|e| (-model.beta * (e - e_min)).exp())
                .collect();
            let z: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
            let rho = spec.from_eigenbasis_diagonal(&probs);
            DensityMatrix::new(symmetrize(rho))
        }
    }
}

/// Bath Hamiltonian of Model II: the full Hamiltonian with `Ω′ = V′ = 0`,
/// restricted to spins 2…N (bath spin b corresponds to chain spin b + 1).
pub fn bath_hamiltonian(model: &SpinModel) -> Operator {
    let nb = model.n - 1;
    let db = 1usize << nb;
    let mut h = transverse_field((1..=nb).map(|s| (s, model.omega)), nb);
    let diag = diagonal_terms(db, |idx| {
        let occ = |s| occupation(idx, s, nb);
        // chain bonds (j, j+1) for j = 2…N−1 are bath bonds (b, b+1) for b = 1…N−2
        let bulk: f64 = (1..nb).map(|b| occ(b) * occ(b + 1)).sum();
        model.v * bulk
    });
    h += &diag;
    h
}

fn diagonal_terms(d: usize, energy: impl Fn(usize) -> f64) -> Operator {
    let entries: Vec<f64> = (0..d).map(energy).collect();
    Operator::diagonal(&entries)
}

fn symmetrize(op: Operator) -> Operator {
    let m = op.into_matrix();
    let sym: DMatrix<C64> = (&m + m.adjoint()).map(|z| z * 0.5);
    Operator::from_matrix(sym).expect("square by construction")
}
