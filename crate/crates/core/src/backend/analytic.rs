//! Polarizable-molecule model surface.
//!
//! The electrons are represented by a single induced dipole `p` with
//! polarizability `α_e`. For a configuration (R, q) the energy is
//!
//! ```text
//! E = V_nuc(ΔR) + min_p [ ½ pᵀ α_e⁻¹ p + Σ_α ½ ω_α² (q_α − λ_α·μ/ω_α)² ]
//! μ = Σ_I Z_I R_I + T·ΔR + p
//! ```
//!
//! where `T` shifts the electronic dipole with nuclear displacement. The
//! inner minimization is done in closed form. With `s = Σ_α λ_α(ω_α q_α − λ_α·μ)`
//! the minimizer satisfies `p = α_e s`, which is solved as
//! `(1 + α_e Λ) p = α_e (b − Λ μ₀)` and never needs `α_e⁻¹`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CboSurface, ReplicableSurface, SurfacePoint, DEFAULT_TRUST_RADIUS};
use crate::error::{Error, Result};
use crate::system::{Configuration, ValidatedSystem};

/// `coefficient · ΔR_i · ΔR_j · ΔR_k` added to the bare nuclear potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizableMoleculeSpec {
    /// Equilibrium geometry of the bare nuclear potential, flat, Bohr.
    pub reference: Vec<f64>,
    /// Nuclear force-constant matrix K, 3N × 3N.
    pub force_constants: DMatrix<f64>,
    pub cubic: Vec<CubicTerm>,
    /// Electronic polarizability α_e.
    pub polarizability: Matrix3<f64>,
    /// Charge-transfer matrix T, 3 × 3N: electronic dipole shift per nuclear displacement.
    pub charge_transfer: DMatrix<f64>,
    pub trust_radius: f64,
}

impl PolarizableMoleculeSpec {
    /// Harmonic spec with no electronic response and no charge transfer.
    pub fn harmonic(reference: Vec<f64>, force_constants: DMatrix<f64>) -> Self {
        let n = reference.len();
        Self {
            reference,
            force_constants,
            cubic: Vec::new(),
            polarizability: Matrix3::zeros(),
            charge_transfer: DMatrix::zeros(3, n),
            trust_radius: DEFAULT_TRUST_RADIUS,
        }
    }

    pub fn n_nuclear_dof(&self) -> usize {
        self.reference.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.reference.len();
        if n == 0 || !n.is_multiple_of(3) {
            return Err(Error::InvalidSpec(format!(
                "reference geometry has {n} coordinates, expected a positive multiple of 3"
            )));
        }
        if self.force_constants.shape() != (n, n) {
            return Err(Error::InvalidSpec(format!(
                "force constants are {:?}, expected ({n}, {n})",
                self.force_constants.shape()
            )));
        }
        if self.charge_transfer.shape() != (3, n) {
            return Err(Error::InvalidSpec(format!(
                "charge-transfer matrix is {:?}, expected (3, {n})",
                self.charge_transfer.shape()
            )));
        }
        let finite = self.reference.iter().all(|x| x.is_finite())
            && self.force_constants.iter().all(|x| x.is_finite())
            && self.charge_transfer.iter().all(|x| x.is_finite())
            && self.polarizability.iter().all(|x| x.is_finite())
            && self.cubic.iter().all(|c| c.coefficient.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("non-finite entry".into()));
        }
        let asym = (&self.force_constants - self.force_constants.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "force constants not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let alpha_asym = (self.polarizability - self.polarizability.transpose()).amax();
        if alpha_asym > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "polarizability not symmetric (max asymmetry {alpha_asym:.3e})"
            )));
        }
        let eig = self.polarizability.symmetric_eigenvalues();
        let scale = eig.amax().max(1.0);
        if eig.iter().any(|&e| e < -1e-12 * scale) {
            return Err(Error::InvalidSpec("polarizability is not positive semidefinite".into()));
        }
        if let Some(c) = self.cubic.iter().find(|c| c.i >= n || c.j >= n || c.k >= n) {
            return Err(Error::InvalidSpec(format!(
                "cubic term ({}, {}, {}) out of range",
                c.i, c.j, c.k
            )));
        }
        if !(self.trust_radius > 0.0) {
            return Err(Error::InvalidSpec("trust radius must be positive".into()));
        }
        Ok(())
    }

    /// `copies` non-interacting replicas, replica `k` shifted by `k * shift`.
    /// The replicas' induced dipoles all respond to the same cavity field, so
    /// together they act as one dipole with `copies` times the polarizability.
    pub fn replicate(&self, copies: usize, shift: [f64; 3]) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidSpec("replica count must be positive".into()));
        }
        let n = self.n_nuclear_dof();
        let total = n * copies;
        let mut reference = Vec::with_capacity(total);
        let mut k_mat = DMatrix::zeros(total, total);
        let mut t_mat = DMatrix::zeros(3, total);
        let mut cubic = Vec::with_capacity(self.cubic.len() * copies);
        for c in 0..copies {
            let off = c * n;
            reference.extend(
                self.reference
                    .iter()
                    .enumerate()
                    .map(|(i, x)| x + c as f64 * shift[i % 3]),
            );
            k_mat.view_mut((off, off), (n, n)).copy_from(&self.force_constants);
            t_mat.view_mut((0, off), (3, n)).copy_from(&self.charge_transfer);
            cubic.extend(self.cubic.iter().map(|t| CubicTerm {
                i: t.i + off,
                j: t.j + off,
                k: t.k + off,
                coefficient: t.coefficient,
            }));
        }
        Ok(Self {
            reference,
            force_constants: k_mat,
            cubic,
            polarizability: self.polarizability * copies as f64,
            charge_transfer: t_mat,
            trust_radius: self.trust_radius,
        })
    }
}

/// Intermediate quantities of one evaluation.
struct Solved {
    energy: f64,
    dipole: Vector3<f64>,
    /// s = Σ_α λ_α (ω_α q_α − λ_α·μ)
    field: Vector3<f64>,
    /// ω_α q_α − λ_α·μ per photon mode
    residuals: Vec<f64>,
    bare_gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSurface {
    spec: PolarizableMoleculeSpec,
}

impl AnalyticSurface {
    pub fn new(spec: PolarizableMoleculeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &PolarizableMoleculeSpec {
        &self.spec
    }

    /// True when the surface is exactly quadratic in (ΔR, q).
    pub fn is_quadratic(&self) -> bool {
        self.spec.cubic.is_empty()
    }

    fn check_dims(&self, system: &ValidatedSystem, config: &Configuration) -> Result<()> {
        config.check(system)?;
        if self.spec.n_nuclear_dof() != system.n_nuclear_dof() {
            return Err(Error::DimensionMismatch(format!(
                "backend describes {} nuclear coordinates, system has {}",
                self.spec.n_nuclear_dof(),
                system.n_nuclear_dof()
            )));
        }
        Ok(())
    }

    fn displacement(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        let mut dr = Vec::with_capacity(config.nuclear.len());
        for (flat, (r, r0)) in config.nuclear.iter().zip(&self.spec.reference).enumerate() {
            let d = r - r0;
            if d.abs() > self.spec.trust_radius {
                let (atom, axis) = system.atom_axis(flat);
                return Err(Error::BackendRefused(format!(
                    "coordinate {flat} (atom {atom} {}, axis {}) is displaced {d:.4} Bohr from \
                     the reference, beyond the trust radius {}",
                    system.atoms()[atom].label,
                    ["x", "y", "z"][axis],
                    self.spec.trust_radius
                )));
            }
            dr.push(d);
        }
        Ok(dr)
    }

    fn solve(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Solved> {
        self.check_dims(system, config)?;
        let dr = self.displacement(system, config)?;
        let spec = &self.spec;

        let kdr: Vec<f64> = (0..dr.len())
            .map(|i| (0..dr.len()).map(|j| spec.force_constants[(i, j)] * dr[j]).sum())
            .collect();
        let mut energy = 0.5 * dr.iter().zip(&kdr).map(|(a, b)| a * b).sum::<f64>();
        let mut bare_gradient = kdr;
        for t in &spec.cubic {
            let (a, b, c) = (dr[t.i], dr[t.j], dr[t.k]);
            energy += t.coefficient * a * b * c;
            bare_gradient[t.i] += t.coefficient * b * c;
            bare_gradient[t.j] += t.coefficient * a * c;
            bare_gradient[t.k] += t.coefficient * a * b;
        }

        let mu_nuc = Vector3::from(system.nuclear_dipole(&config.nuclear));
        let mut shift = Vector3::zeros();
        for (j, d) in dr.iter().enumerate() {
            shift += spec.charge_transfer.column(j) * *d;
        }
        let mu0 = mu_nuc + shift;

        let mut big_lambda = Matrix3::zeros();
        let mut b = Vector3::zeros();
        for (mode, q) in system.photon_modes().iter().zip(&config.photon) {
            let l = Vector3::from(mode.lambda);
            big_lambda += l * l.transpose();
            b += l * (mode.omega * q);
        }
        let alpha = spec.polarizability;
        let a = Matrix3::identity() + alpha * big_lambda;
        let rhs = alpha * (b - big_lambda * mu0);
        let p = a.lu().solve(&rhs).ok_or(Error::SingularElectronicProblem)?;
        let dipole = mu0 + p;

        let residuals: Vec<f64> = system
            .photon_modes()
            .iter()
            .zip(&config.photon)
            .map(|(m, q)| m.omega * q - Vector3::from(m.lambda).dot(&dipole))
            .collect();
        let field = b - big_lambda * dipole;
        energy += 0.5 * field.dot(&(alpha * field));
        energy += 0.5 * residuals.iter().map(|r| r * r).sum::<f64>();

        Ok(Solved {
            energy,
            dipole,
            field,
            residuals,
            bare_gradient,
        })
    }

    /// −∇V_nuc + Tᵀ s
    fn noncoupling_from(&self, solved: &Solved) -> Vec<f64> {
        let t = &self.spec.charge_transfer;
        solved
            .bare_gradient
            .iter()
            .enumerate()
            .map(|(j, g)| -g + t.column(j).dot(&solved.field))
            .collect()
    }
}

impl CboSurface for AnalyticSurface {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint> {
        let solved = self.solve(system, config)?;
        let mut nuclear_forces = self.noncoupling_from(&solved);
        for (atom_idx, atom) in system.atoms().iter().enumerate() {
            for axis in 0..3 {
                nuclear_forces[3 * atom_idx + axis] += atom.charge * solved.field[axis];
            }
        }
        let photon_forces = system
            .photon_modes()
            .iter()
            .zip(&solved.residuals)
            .map(|(m, r)| -m.omega * r)
            .collect();
        let point = SurfacePoint {
            energy: solved.energy,
            nuclear_forces,
            photon_forces,
            dipole: solved.dipole.into(),
        };
        point.check_finite()?;
        Ok(point)
    }

    fn noncoupling_nuclear_forces(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        let solved = self.solve(system, config)?;
        Ok(self.noncoupling_from(&solved))
    }

    fn supports_force_split(&self) -> bool {
        true
    }
}

impl ReplicableSurface for AnalyticSurface {
    fn replicate(&self, copies: usize, shift: [f64; 3]) -> Result<Self> {
        Self::new(self.spec.replicate(copies, shift)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Atom, CoupledSystem, PhotonMode};

    fn scalar_system(lambda: f64, omega: f64, charge: f64) -> ValidatedSystem {
        CoupledSystem::new(
            vec![Atom::new("A", 1.0, charge, [0.0, 0.0, 0.3])],
            vec![PhotonMode::new(omega, [0.0, 0.0, lambda])],
        )
        .validate()
        .unwrap()
    }

    fn scalar_spec(alpha: f64) -> PolarizableMoleculeSpec {
        let mut spec =
            PolarizableMoleculeSpec::harmonic(vec![0.0, 0.0, 0.3], DMatrix::from_diagonal_element(3, 3, 0.5));
        spec.polarizability = Matrix3::from_diagonal_element(alpha);
        spec
    }

    #[test]
    fn uncoupled_limit_separates() {
        let mut spec = scalar_spec(3.0);
        spec.reference = vec![0.0, 0.0, 0.0];
        let surface = AnalyticSurface::new(spec).unwrap();
        let sys = scalar_system(0.0, 0.01, 1.0);
        let cfg = Configuration {
            nuclear: vec![0.1, -0.2, 0.05],
            photon: vec![2.0],
        };
        let e = surface.energy(&sys, &cfg).unwrap();
        let v = 0.5 * 0.5 * (0.01 + 0.04 + 0.0025);
        let photon = 0.5 * 0.01f64.powi(2) * 4.0;
        assert!((e - (v + photon)).abs() < 1e-15);
    }

    #[test]
    fn induced_dipole_matches_hand_minimization() {
        // single axis: p* = α(λωq − λ²μ_nuc)/(1 + αλ²)
        let (alpha, lambda, omega, q) = (2.5, 0.07, 0.011, 3.0);
        let surface = AnalyticSurface::new(scalar_spec(alpha)).unwrap();
        let sys = scalar_system(lambda, omega, 0.8);
        let cfg = Configuration {
            nuclear: vec![0.0, 0.0, 0.3],
            photon: vec![q],
        };
        let mu_nuc = 0.8 * 0.3;
        let p_star = alpha * (lambda * omega * q - lambda * lambda * mu_nuc) / (1.0 + alpha * lambda * lambda);
        let mu = surface.dipole(&sys, &cfg).unwrap();
        assert!((mu[2] - (mu_nuc + p_star)).abs() < 1e-14);
        assert_eq!(mu[0], 0.0);
    }

    #[test]
    fn photon_force_vanishes_at_its_stationary_value() {
        let surface = AnalyticSurface::new(scalar_spec(1.5)).unwrap();
        let sys = scalar_system(0.05, 0.011, 0.8);
        let mut cfg = Configuration {
            nuclear: vec![0.0, 0.0, 0.3],
            photon: vec![0.0],
        };
        // ⟨μ⟩ depends on q, so iterate the fixed point q = λ·μ/ω to convergence
        for _ in 0..200 {
            let mu = surface.dipole(&sys, &cfg).unwrap();
            cfg.photon[0] = 0.05 * mu[2] / 0.011;
        }
        let point = surface.evaluate(&sys, &cfg).unwrap();
        assert!(point.photon_forces[0].abs() < 1e-15);
    }

    #[test]
    fn force_split_adds_back_the_coupling_term() {
        let mut spec = scalar_spec(2.0);
        spec.charge_transfer[(2, 2)] = 0.3;
        spec.charge_transfer[(0, 0)] = -0.1;
        let surface = AnalyticSurface::new(spec).unwrap();
        let sys = scalar_system(0.08, 0.011, 0.8);
        let cfg = Configuration {
            nuclear: vec![0.05, 0.0, 0.25],
            photon: vec![1.2],
        };
        let point = surface.evaluate(&sys, &cfg).unwrap();
        let nc = surface.noncoupling_nuclear_forces(&sys, &cfg).unwrap();
        let mu = point.dipole[2];
        let s = 0.08 * (0.011 * 1.2 - 0.08 * mu);
        assert!((point.nuclear_forces[2] - nc[2] - 0.8 * s).abs() < 1e-15);
        assert!((point.nuclear_forces[0] - nc[0]).abs() < 1e-15);
    }

    #[test]
    fn trust_radius_violation_names_the_coordinate() {
        let surface = AnalyticSurface::new(scalar_spec(0.0)).unwrap();
        let sys = scalar_system(0.0, 0.01, 0.0);
        let cfg = Configuration {
            nuclear: vec![0.0, 1.5, 0.3],
            photon: vec![0.0],
        };
        let err = surface.evaluate(&sys, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::BackendRefused(_)));
        assert!(msg.contains("coordinate 1") && msg.contains("axis y"), "{msg}");
    }

    #[test]
    fn rejects_asymmetric_force_constants() {
        let mut spec = scalar_spec(0.0);
        spec.force_constants[(0, 1)] = 0.1;
        assert!(matches!(AnalyticSurface::new(spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn zero_polarizability_gives_no_response() {
        let surface = AnalyticSurface::new(scalar_spec(0.0)).unwrap();
        let sys = scalar_system(0.1, 0.011, 0.8);
        let a = Configuration {
            nuclear: vec![0.0, 0.0, 0.3],
            photon: vec![0.0],
        };
        let b = Configuration {
            nuclear: vec![0.0, 0.0, 0.3],
            photon: vec![5.0],
        };
        assert_eq!(surface.dipole(&sys, &a).unwrap(), surface.dipole(&sys, &b).unwrap());
    }
}
