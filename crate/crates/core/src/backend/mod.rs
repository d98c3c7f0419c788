//! Cavity Born-Oppenheimer energy surfaces.
//!
//! A surface maps a generalized configuration (R, q) to the ground-state
//! energy, the nuclear and photon forces, and the dipole expectation value.
//! Implementations must be pure functions of their inputs so Hessian columns
//! can be evaluated in any order or in parallel.

mod analytic;
mod grid;

pub use analytic::{AnalyticSurface, CubicTerm, PolarizableMoleculeSpec};
pub use grid::{GridSample, GridSurface, GridSurfaceSpec, DEFAULT_INTERPOLATION_ORDER};

use crate::error::{Error, Result};
use crate::system::{Configuration, ValidatedSystem};

/// Default distance (Bohr) a nuclear coordinate may move from the reference
/// geometry before a backend refuses to evaluate.
pub const DEFAULT_TRUST_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub energy: f64,
    /// -∂E/∂R, length 3·N_nuc.
    pub nuclear_forces: Vec<f64>,
    /// -∂E/∂q, length N_pt.
    pub photon_forces: Vec<f64>,
    /// ⟨μ⟩ including the nuclear contribution.
    pub dipole: [f64; 3],
}

impl SurfacePoint {
    pub fn max_force(&self) -> f64 {
        self.nuclear_forces
            .iter()
            .chain(&self.photon_forces)
            .fold(0.0f64, |m, f| m.max(f.abs()))
    }

    /// Forces flattened in generalized-coordinate order.
    pub fn forces_flat(&self) -> Vec<f64> {
        let mut f = self.nuclear_forces.clone();
        f.extend_from_slice(&self.photon_forces);
        f
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let finite = self.energy.is_finite()
            && self.dipole.iter().all(|x| x.is_finite())
            && self
                .nuclear_forces
                .iter()
                .chain(&self.photon_forces)
                .all(|x| x.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFiniteValue("surface evaluation".into()))
        }
    }
}

pub trait CboSurface: Sync {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint>;

    fn energy(&self, system: &ValidatedSystem, config: &Configuration) -> Result<f64> {
        Ok(self.evaluate(system, config)?.energy)
    }

    fn dipole(&self, system: &ValidatedSystem, config: &Configuration) -> Result<[f64; 3]> {
        Ok(self.evaluate(system, config)?.dipole)
    }

    /// Nuclear forces with the explicit coupling term e·Z_I·Σ_α λ_α(ω_α q_α − λ_α·⟨μ⟩)
    /// removed, leaving only the contribution of the electronic and bare
    /// nuclear potentials.
    fn noncoupling_nuclear_forces(&self, _system: &ValidatedSystem, _config: &Configuration) -> Result<Vec<f64>> {
        Err(Error::BackendLacksForceSplit)
    }

    fn supports_force_split(&self) -> bool {
        false
    }
}

/// Surfaces that can describe several identical, non-interacting copies of
/// their molecule sharing the same cavity.
pub trait ReplicableSurface: CboSurface + Sized {
    fn replicate(&self, copies: usize, shift: [f64; 3]) -> Result<Self>;
}

impl<S: CboSurface + ?Sized> CboSurface for &S {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint> {
        (**self).evaluate(system, config)
    }

    fn noncoupling_nuclear_forces(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        (**self).noncoupling_nuclear_forces(system, config)
    }

    fn supports_force_split(&self) -> bool {
        (**self).supports_force_split()
    }
}

impl<S: CboSurface + ?Sized> CboSurface for Box<S> {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint> {
        (**self).evaluate(system, config)
    }

    fn noncoupling_nuclear_forces(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        (**self).noncoupling_nuclear_forces(system, config)
    }

    fn supports_force_split(&self) -> bool {
        (**self).supports_force_split()
    }
}
