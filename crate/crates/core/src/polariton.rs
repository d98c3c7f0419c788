//! Vibro-polariton normal modes from the generalized force-constant matrix,
//! their effective charges, and Lorentzian-broadened IR spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::ForceConstantSet;
use crate::system::ValidatedSystem;
use crate::units::hartree_to_wavenumber;

/// Relative asymmetry tolerated in the input matrix.
const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative to the spectral radius) are treated
/// as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;
/// Nuclear components at or below this are ignored when fixing the sign.
const SIGN_TOL: f64 = 1e-12;

/// C η = M̃ ω² η with a diagonal mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedEigenproblem {
    pub c: DMatrix<f64>,
    /// Diagonal of M̃: nuclear masses first, photon entries 1.
    pub masses: Vec<f64>,
    pub n_nuclear: usize,
}

impl GeneralizedEigenproblem {
    pub fn new(c: DMatrix<f64>, masses: Vec<f64>, n_nuclear: usize) -> Result<Self> {
        let n = masses.len();
        if c.shape() != (n, n) || n_nuclear > n {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} with {n} masses and {n_nuclear} nuclear coordinates",
                c.shape()
            )));
        }
        if masses.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidSettings("masses must be positive".into()));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue("force-constant matrix".into()));
        }
        let asym = (&c - c.transpose()).amax();
        if asym > SYMMETRY_TOL * c.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NonSymmetricInput(asym));
        }
        Ok(Self { c, masses, n_nuclear })
    }

    pub fn from_force_constants(fcs: &ForceConstantSet, system: &ValidatedSystem) -> Result<Self> {
        if fcs.n_nuclear_dof() != system.n_nuclear_dof() || fcs.n_photons() != system.n_photons() {
            return Err(Error::DimensionMismatch(
                "force constants do not match the system".into(),
            ));
        }
        Self::new(fcs.full_matrix(), system.generalized_masses(), system.n_nuclear_dof())
    }

    /// D_ij = C_ij / √(M̃_ii M̃_jj)
    pub fn dynamical_matrix(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.masses.iter().map(|m| m.sqrt()).collect();
        DMatrix::from_fn(self.c.nrows(), self.c.ncols(), |i, j| self.c[(i, j)] / (s[i] * s[j]))
    }

    pub fn solve(&self) -> Result<Vec<PolaritonMode>> {
        let d = self.dynamical_matrix();
        let n = d.nrows();
        let eig = SymmetricEigen::try_new(d, f64::EPSILON, 0).ok_or(Error::EigenSolverFailure)?;
        if eig
            .eigenvalues
            .iter()
            .chain(eig.eigenvectors.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::EigenSolverFailure);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors: Vec<DVector<f64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();

        let radius = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (values[end] - values[end - 1]).abs() <= DEGENERACY_TOL * radius {
                end += 1;
            }
            if end - start > 1 {
                orthonormalize(&mut vectors[start..end]);
            }
            start = end;
        }

        let inv_sqrt: Vec<f64> = self.masses.iter().map(|m| 1.0 / m.sqrt()).collect();
        Ok(values
            .into_iter()
            .zip(vectors)
            .map(|(omega_sq, mut u)| {
                fix_sign(&mut u, self.n_nuclear);
                let mut eta: Vec<f64> = u.iter().zip(&inv_sqrt).map(|(x, s)| x * s).collect();
                let norm: f64 = eta.iter().zip(&self.masses).map(|(e, m)| e * e * m).sum::<f64>().sqrt();
                eta.iter_mut().for_each(|e| *e /= norm);
                let eta_q = eta.split_off(self.n_nuclear);
                PolaritonMode {
                    omega_sq,
                    omega: omega_sq.abs().sqrt(),
                    imaginary: omega_sq < 0.0,
                    photon_character: u.rows(self.n_nuclear, n - self.n_nuclear).norm_squared(),
                    eigenvector: u.iter().copied().collect(),
                    eta_r: eta,
                    eta_q,
                    charge: None,
                }
            })
            .collect())
    }
}

fn orthonormalize(vectors: &mut [DVector<f64>]) {
    for i in 0..vectors.len() {
        for j in 0..i {
            let proj = vectors[j].dot(&vectors[i]);
            let vj = vectors[j].clone();
            vectors[i].axpy(-proj, &vj, 1.0);
        }
        let norm = vectors[i].norm();
        vectors[i] /= norm;
    }
}

/// Largest-magnitude nuclear component positive; photon components decide
/// only when the nuclear part vanishes.
fn fix_sign(u: &mut DVector<f64>, n_nuclear: usize) {
    let pick = |range: std::ops::Range<usize>| {
        range.fold(None::<(usize, f64)>, |best, i| match best {
            Some((_, b)) if u[i].abs() <= b => best,
            _ => Some((i, u[i].abs())),
        })
    };
    let anchor = match pick(0..n_nuclear) {
        Some((i, mag)) if mag > SIGN_TOL => Some(i),
        _ => pick(n_nuclear..u.len()).map(|(i, _)| i),
    };
    if let Some(i) = anchor {
        if u[i] < 0.0 {
            u.neg_mut();
        }
    }
}

/// Dipole change along a mode, split into the nuclear-displacement and
/// photon-displacement contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCharge {
    pub total: [f64; 3],
    pub nuclear: [f64; 3],
    pub photon: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolaritonMode {
    /// Eigenvalue ω², atomic units.
    pub omega_sq: f64,
    /// √|ω²|, atomic units.
    pub omega: f64,
    pub imaginary: bool,
    /// Unit-normalized eigenvector of the dynamical matrix.
    pub eigenvector: Vec<f64>,
    /// Eigendisplacement, nuclear part, normalized so ηᵀM̃η = 1.
    pub eta_r: Vec<f64>,
    pub eta_q: Vec<f64>,
    pub photon_character: f64,
    pub charge: Option<EffectiveCharge>,
}

impl PolaritonMode {
    pub fn omega_cm1(&self) -> f64 {
        hartree_to_wavenumber(self.omega)
    }

    /// ω, negative for imaginary modes.
    pub fn signed_omega(&self) -> f64 {
        if self.imaginary {
            -self.omega
        } else {
            self.omega
        }
    }

    pub fn signed_omega_cm1(&self) -> f64 {
        hartree_to_wavenumber(self.signed_omega())
    }

    pub fn z_star(&self) -> Option<[f64; 3]> {
        self.charge.map(|c| c.total)
    }

    /// |Z*|², zero when charges have not been computed.
    pub fn ir_amplitude(&self) -> f64 {
        self.z_star().map_or(0.0, |z| z.iter().map(|x| x * x).sum())
    }
}

pub fn solve_modes(fcs: &ForceConstantSet, system: &ValidatedSystem) -> Result<Vec<PolaritonMode>> {
    GeneralizedEigenproblem::from_force_constants(fcs, system)?.solve()
}

/// Z*_m = ∂⟨μ⟩/∂R · η_R + ∂⟨μ⟩/∂q · η_q for every mode.
pub fn mode_effective_charges(modes: &mut [PolaritonMode], fcs: &ForceConstantSet) -> Result<()> {
    apply_effective_charges(modes, &fcs.dmu_dr, &fcs.dmu_dq)
}

pub(crate) fn apply_effective_charges(
    modes: &mut [PolaritonMode],
    dmu_nuclear: &DMatrix<f64>,
    dmu_photon: &DMatrix<f64>,
) -> Result<()> {
    for mode in modes.iter_mut() {
        if dmu_nuclear.shape() != (3, mode.eta_r.len()) || dmu_photon.shape() != (3, mode.eta_q.len()) {
            return Err(Error::MissingDipoleDerivatives);
        }
        let mut nuclear = [0.0; 3];
        let mut photon = [0.0; 3];
        for k in 0..3 {
            nuclear[k] = mode
                .eta_r
                .iter()
                .enumerate()
                .map(|(j, e)| dmu_nuclear[(k, j)] * e)
                .sum();
            photon[k] = mode.eta_q.iter().enumerate().map(|(j, e)| dmu_photon[(k, j)] * e).sum();
        }
        mode.charge = Some(EffectiveCharge {
            total: [0, 1, 2].map(|k| nuclear[k] + photon[k]),
            nuclear,
            photon,
        });
    }
    Ok(())
}

/// Evenly spaced frequency grid in cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumGrid {
    pub min_cm1: f64,
    pub max_cm1: f64,
    pub points: usize,
}

impl Default for SpectrumGrid {
    fn default() -> Self {
        Self {
            min_cm1: 0.0,
            max_cm1: 4000.0,
            points: 4001,
        }
    }
}

impl SpectrumGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.max_cm1 > self.min_cm1) {
            return Err(Error::InvalidSettings(
                "spectrum grid needs at least two points and max > min".into(),
            ));
        }
        let step = (self.max_cm1 - self.min_cm1) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.min_cm1 + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrSpectrum {
    pub grid_cm1: Vec<f64>,
    pub intensity: Vec<f64>,
    pub broadening_cm1: f64,
    /// (ω_m in cm⁻¹, |Z*_m|²) for every real-frequency mode.
    pub sticks: Vec<(f64, f64)>,
    /// Indices of modes left out because their frequency is imaginary.
    pub excluded_imaginary: Vec<usize>,
}

impl IrSpectrum {
    /// The Lorentzians are area-normalized.
    pub const NORMALIZATION: &'static str = "area";

    /// Trapezoidal area under the spectrum.
    pub fn area(&self) -> f64 {
        self.grid_cm1
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.intensity.iter_mut().for_each(|v| *v *= factor);
        self.sticks.iter_mut().for_each(|s| s.1 *= factor);
        self
    }
}

/// (1/π) δ / ((Ω − ω)² + δ²)
pub fn lorentzian(omega: f64, center: f64, delta: f64) -> f64 {
    delta / (std::f64::consts::PI * ((omega - center).powi(2) + delta * delta))
}

/// I(Ω) = Σ_m |Z*_m|² L(Ω, ω_m, δ) over real-frequency modes, everything in cm⁻¹.
pub fn ir_spectrum(modes: &[PolaritonMode], grid_cm1: &[f64], broadening_cm1: f64) -> Result<IrSpectrum> {
    if !(broadening_cm1 > 0.0) {
        return Err(Error::NonpositiveBroadening(broadening_cm1));
    }
    if grid_cm1.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSettings(
            "spectrum grid must be strictly increasing".into(),
        ));
    }
    let mut sticks = Vec::new();
    let mut excluded = Vec::new();
    for (i, mode) in modes.iter().enumerate() {
        if mode.charge.is_none() {
            return Err(Error::MissingDipoleDerivatives);
        }
        if mode.imaginary {
            excluded.push(i);
        } else {
            sticks.push((mode.omega_cm1(), mode.ir_amplitude()));
        }
    }
    let intensity = grid_cm1
        .iter()
        .map(|&w| sticks.iter().map(|&(c, a)| a * lorentzian(w, c, broadening_cm1)).sum())
        .collect();
    Ok(IrSpectrum {
        grid_cm1: grid_cm1.to_vec(),
        intensity,
        broadening_cm1,
        sticks,
        excluded_imaginary: excluded,
    })
}

/// Squared overlaps (U_mᵀ r)² of every unit eigenvector with every reference
/// state; rows are modes, columns references.
pub fn projection_report(modes: &[PolaritonMode], references: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(modes.len(), references.len());
    for (j, r) in references.iter().enumerate() {
        let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidSettings(format!(
                "reference state {j} is not a unit vector (norm {norm})"
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.eigenvector.len() != r.len() {
                return Err(Error::DimensionMismatch(format!(
                    "reference state {j} has length {}, modes have {}",
                    r.len(),
                    m.eigenvector.len()
                )));
            }
            let dot: f64 = m.eigenvector.iter().zip(r).map(|(a, b)| a * b).sum();
            out[(i, j)] = dot * dot;
        }
    }
    Ok(out)
}

/// Unit vector along generalized coordinate `index`.
pub fn unit_state(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}
