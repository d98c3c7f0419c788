//! Problem definition: atoms, cavity photon modes and the molecule partition.
//!
//! Generalized coordinates are flattened atom-major with the Cartesian axis
//! innermost (`3 * atom + axis`), and the photon displacement coordinates are
//! appended after all nuclear ones.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::AMU_TO_ELECTRON_MASS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub label: String,
    /// Atomic mass units.
    pub mass: f64,
    /// Charge in units of e.
    pub charge: f64,
    /// Bohr.
    pub position: [f64; 3],
}

impl Atom {
    pub fn new(label: impl Into<String>, mass: f64, charge: f64, position: [f64; 3]) -> Self {
        Self {
            label: label.into(),
            mass,
            charge,
            position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonMode {
    /// Hartree.
    pub omega: f64,
    /// Coupling strength vector, atomic units. The zero vector is an uncoupled mode.
    pub lambda: [f64; 3],
}

impl PhotonMode {
    pub fn new(omega: f64, lambda: [f64; 3]) -> Self {
        Self { omega, lambda }
    }

    pub fn from_wavenumber(omega_cm1: f64, lambda: [f64; 3]) -> Self {
        Self::new(crate::units::wavenumber_to_hartree(omega_cm1), lambda)
    }

    pub fn lambda_norm(&self) -> f64 {
        norm3(&self.lambda)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.omega, self.lambda.map(|l| l * factor))
    }
}

/// Unvalidated problem definition, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSystem {
    pub atoms: Vec<Atom>,
    pub photon_modes: Vec<PhotonMode>,
    /// Atom index ranges, one per molecule. Empty means one molecule holding
    /// every atom.
    #[serde(default)]
    pub molecule_partition: Vec<Range<usize>>,
}

impl CoupledSystem {
    pub fn new(atoms: Vec<Atom>, photon_modes: Vec<PhotonMode>) -> Self {
        Self {
            atoms,
            photon_modes,
            molecule_partition: Vec::new(),
        }
    }

    pub fn validate(self) -> Result<ValidatedSystem> {
        ValidatedSystem::new(self)
    }
}

/// A checked [`CoupledSystem`] plus the flat index maps derived from it.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSystem {
    inner: CoupledSystem,
    partition: Vec<Range<usize>>,
    nuclear_masses: Vec<f64>,
}

impl ValidatedSystem {
    fn new(system: CoupledSystem) -> Result<Self> {
        if system.atoms.is_empty() {
            return Err(Error::EmptySystem);
        }
        for (i, atom) in system.atoms.iter().enumerate() {
            if !(atom.mass > 0.0) {
                return Err(Error::NonpositiveMass {
                    index: i,
                    label: atom.label.clone(),
                    mass: atom.mass,
                });
            }
            if !atom.charge.is_finite() || atom.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonfiniteInput(format!(
                    "atom {i} ({}) charge or position",
                    atom.label
                )));
            }
        }
        for (i, mode) in system.photon_modes.iter().enumerate() {
            if !(mode.omega > 0.0) || !mode.omega.is_finite() {
                return Err(Error::NonpositiveOmega {
                    index: i,
                    omega: mode.omega,
                });
            }
            if mode.lambda.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonfiniteInput(format!("photon mode {i} lambda")));
            }
        }

        let n = system.atoms.len();
        let partition = if system.molecule_partition.is_empty() {
            vec![0..n]
        } else {
            system.molecule_partition.clone()
        };
        let mut owner = vec![false; n];
        for range in &partition {
            for i in range.clone() {
                if i >= n || owner[i] {
                    return Err(Error::PartitionOverlap(i));
                }
                owner[i] = true;
            }
        }
        if let Some(gap) = owner.iter().position(|&o| !o) {
            return Err(Error::PartitionGap(gap));
        }

        let nuclear_masses = system
            .atoms
            .iter()
            .flat_map(|a| [a.mass * AMU_TO_ELECTRON_MASS; 3])
            .collect();
        Ok(Self {
            inner: system,
            partition,
            nuclear_masses,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.inner.atoms
    }

    pub fn photon_modes(&self) -> &[PhotonMode] {
        &self.inner.photon_modes
    }

    pub fn molecules(&self) -> &[Range<usize>] {
        &self.partition
    }

    pub fn n_atoms(&self) -> usize {
        self.inner.atoms.len()
    }

    pub fn n_photons(&self) -> usize {
        self.inner.photon_modes.len()
    }

    /// 3·N_nuc.
    pub fn n_nuclear_dof(&self) -> usize {
        3 * self.n_atoms()
    }

    /// 3·N_nuc + N_pt.
    pub fn n_dof(&self) -> usize {
        self.n_nuclear_dof() + self.n_photons()
    }

    pub fn flat_index(&self, atom: usize, axis: usize) -> usize {
        debug_assert!(atom < self.n_atoms() && axis < 3);
        3 * atom + axis
    }

    pub fn atom_axis(&self, flat: usize) -> (usize, usize) {
        debug_assert!(flat < self.n_nuclear_dof());
        (flat / 3, flat % 3)
    }

    pub fn photon_index(&self, mode: usize) -> usize {
        self.n_nuclear_dof() + mode
    }

    /// Nuclear masses in electron masses, one entry per Cartesian DOF.
    pub fn nuclear_masses(&self) -> &[f64] {
        &self.nuclear_masses
    }

    /// Diagonal of the generalized mass matrix: triplicated nuclear masses,
    /// then exactly 1 for every photon coordinate.
    pub fn generalized_masses(&self) -> Vec<f64> {
        let mut m = self.nuclear_masses.clone();
        m.extend(std::iter::repeat_n(1.0, self.n_photons()));
        m
    }

    /// Ionic charge per nuclear DOF.
    pub fn dof_charges(&self) -> Vec<f64> {
        self.atoms().iter().flat_map(|a| [a.charge; 3]).collect()
    }

    pub fn positions_flat(&self) -> Vec<f64> {
        self.atoms().iter().flat_map(|a| a.position).collect()
    }

    /// Σ_I Z_I R_I for the given flat nuclear coordinates.
    pub fn nuclear_dipole(&self, nuclear: &[f64]) -> [f64; 3] {
        let mut mu = [0.0; 3];
        for (i, atom) in self.atoms().iter().enumerate() {
            for k in 0..3 {
                mu[k] += atom.charge * nuclear[3 * i + k];
            }
        }
        mu
    }

    pub fn total_charge(&self) -> f64 {
        self.atoms().iter().map(|a| a.charge).sum()
    }

    pub fn raw(&self) -> &CoupledSystem {
        &self.inner
    }

    /// Same system with every photon coupling vector multiplied by `factor`.
    pub fn with_coupling_scaled(&self, factor: f64) -> Self {
        let modes = self.photon_modes().iter().map(|m| m.scaled(factor)).collect();
        self.with_photon_modes(modes)
            .expect("scaling couplings keeps the system valid")
    }

    /// Same system with all couplings switched off.
    pub fn uncoupled(&self) -> Self {
        self.with_coupling_scaled(0.0)
    }

    pub fn with_photon_modes(&self, modes: Vec<PhotonMode>) -> Result<Self> {
        let mut raw = self.inner.clone();
        raw.photon_modes = modes;
        raw.molecule_partition = self.partition.clone();
        raw.validate()
    }

    pub fn with_positions(&self, nuclear: &[f64]) -> Result<Self> {
        if nuclear.len() != self.n_nuclear_dof() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} nuclear coordinates, got {}",
                self.n_nuclear_dof(),
                nuclear.len()
            )));
        }
        let mut raw = self.inner.clone();
        for (i, atom) in raw.atoms.iter_mut().enumerate() {
            atom.position.copy_from_slice(&nuclear[3 * i..3 * i + 3]);
        }
        raw.molecule_partition = self.partition.clone();
        raw.validate()
    }

    /// `copies` translated replicas of this system, replica `k` shifted by
    /// `k * shift`. Photon modes are shared; every replica becomes its own
    /// molecule in the partition.
    pub fn replicate(&self, copies: usize, shift: [f64; 3]) -> Result<Self> {
        if copies == 0 {
            return Err(Error::EmptySystem);
        }
        let n = self.n_atoms();
        let mut atoms = Vec::with_capacity(n * copies);
        let mut partition = Vec::new();
        for k in 0..copies {
            for range in &self.partition {
                partition.push(range.start + k * n..range.end + k * n);
            }
            for atom in self.atoms() {
                let mut a = atom.clone();
                for axis in 0..3 {
                    a.position[axis] += k as f64 * shift[axis];
                }
                atoms.push(a);
            }
        }
        CoupledSystem {
            atoms,
            photon_modes: self.photon_modes().to_vec(),
            molecule_partition: partition,
        }
        .validate()
    }
}

/// A point in the generalized (R, q) space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    /// Flat nuclear coordinates, Bohr.
    pub nuclear: Vec<f64>,
    /// Photon displacement coordinates, atomic units.
    pub photon: Vec<f64>,
}

impl Configuration {
    /// Atoms at their input positions, photon coordinates at zero.
    pub fn initial(system: &ValidatedSystem) -> Self {
        Self {
            nuclear: system.positions_flat(),
            photon: vec![0.0; system.n_photons()],
        }
    }

    pub fn from_flat(system: &ValidatedSystem, flat: &[f64]) -> Result<Self> {
        if flat.len() != system.n_dof() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} generalized coordinates, got {}",
                system.n_dof(),
                flat.len()
            )));
        }
        let (r, q) = flat.split_at(system.n_nuclear_dof());
        Ok(Self {
            nuclear: r.to_vec(),
            photon: q.to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.nuclear.clone();
        v.extend_from_slice(&self.photon);
        v
    }

    pub fn check(&self, system: &ValidatedSystem) -> Result<()> {
        if self.nuclear.len() != system.n_nuclear_dof() || self.photon.len() != system.n_photons() {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {}+{} coordinates, system needs {}+{}",
                self.nuclear.len(),
                self.photon.len(),
                system.n_nuclear_dof(),
                system.n_photons()
            )));
        }
        if self.nuclear.iter().chain(&self.photon).any(|x| !x.is_finite()) {
            return Err(Error::NonfiniteInput("configuration coordinate".into()));
        }
        Ok(())
    }

    pub fn displaced(&self, d: &DisplacementVector) -> Self {
        Self {
            nuclear: self.nuclear.iter().zip(&d.nuclear).map(|(a, b)| a + b).collect(),
            photon: self.photon.iter().zip(&d.photon).map(|(a, b)| a + b).collect(),
        }
    }
}

/// A small perturbation (ΔR, Δq) around some configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub nuclear: Vec<f64>,
    pub photon: Vec<f64>,
}

impl DisplacementVector {
    pub fn zeros(system: &ValidatedSystem) -> Self {
        Self {
            nuclear: vec![0.0; system.n_nuclear_dof()],
            photon: vec![0.0; system.n_photons()],
        }
    }

    pub fn between(from: &Configuration, to: &Configuration) -> Self {
        Self {
            nuclear: to.nuclear.iter().zip(&from.nuclear).map(|(a, b)| a - b).collect(),
            photon: to.photon.iter().zip(&from.photon).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.nuclear
            .iter()
            .chain(&self.photon)
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn co2_like() -> CoupledSystem {
        CoupledSystem::new(
            vec![
                Atom::new("O", 15.995, -0.35, [0.0, 0.0, -2.2]),
                Atom::new("C", 12.0, 0.7, [0.0, 0.0, 0.0]),
                Atom::new("O", 15.995, -0.35, [0.0, 0.0, 2.2]),
            ],
            vec![PhotonMode::from_wavenumber(2430.0, [0.0, 0.0, 0.05])],
        )
    }

    #[test]
    fn triatomic_with_one_cavity_mode() {
        let sys = co2_like().validate().unwrap();
        assert_eq!(sys.n_nuclear_dof(), 9);
        assert_eq!(sys.n_photons(), 1);
        assert_eq!(sys.n_dof(), 10);
        assert_eq!(sys.generalized_masses()[9], 1.0);
        assert_eq!(sys.molecules(), &[0..3]);
    }

    #[test]
    fn rejects_malformed_input() {
        let empty = CoupledSystem::new(vec![], vec![]);
        assert!(matches!(empty.validate(), Err(Error::EmptySystem)));

        let mut neg = co2_like();
        neg.atoms[1].mass = -1.0;
        assert!(matches!(neg.validate(), Err(Error::NonpositiveMass { index: 1, .. })));

        let mut omega = co2_like();
        omega.photon_modes[0].omega = 0.0;
        assert!(matches!(omega.validate(), Err(Error::NonpositiveOmega { .. })));

        let mut gap = co2_like();
        gap.molecule_partition = vec![0..1, 2..3];
        assert!(matches!(gap.validate(), Err(Error::PartitionGap(1))));

        let mut overlap = co2_like();
        overlap.molecule_partition = vec![0..2, 1..3];
        assert!(matches!(overlap.validate(), Err(Error::PartitionOverlap(1))));
    }

    #[test]
    fn zero_coupling_vector_is_allowed() {
        let mut sys = co2_like();
        sys.photon_modes[0].lambda = [0.0; 3];
        assert!(sys.validate().is_ok());
    }

    #[test]
    fn replicas_get_their_own_molecules() {
        let sys = co2_like().validate().unwrap();
        let many = sys.replicate(3, [20.0, 0.0, 0.0]).unwrap();
        assert_eq!(many.n_atoms(), 9);
        assert_eq!(many.molecules(), &[0..3, 3..6, 6..9]);
        assert_eq!(many.atoms()[7].position, [40.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn index_maps_are_bijective(n in 1usize..12) {
            let atoms = (0..n).map(|i| Atom::new("X", 1.0, 0.0, [i as f64, 0.0, 0.0])).collect();
            let sys = CoupledSystem::new(atoms, vec![]).validate().unwrap();
            let mut seen = vec![false; sys.n_nuclear_dof()];
            for flat in 0..sys.n_nuclear_dof() {
                let (atom, axis) = sys.atom_axis(flat);
                prop_assert_eq!(sys.flat_index(atom, axis), flat);
                prop_assert!(!seen[flat]);
                seen[flat] = true;
            }
        }
    }
}
