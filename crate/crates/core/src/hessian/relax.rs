//! Quasi-Newton relaxation on the joint (R, q) space.
//!
//! Photon displacement coordinates are relaxed alongside the nuclei as
//! ordinary coordinates of the same energy surface. The inverse Hessian is
//! seeded from a finite-difference Hessian at the starting point and then
//! updated with BFGS, so exactly quadratic surfaces converge in one step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::assemble::{quick_hessian, FdSettings};
use crate::backend::{CboSurface, SurfacePoint};
use crate::error::{Error, Result};
use crate::system::{Configuration, ValidatedSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelaxMethod {
    #[default]
    Bfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationSettings {
    /// Hartree/Bohr (and the matching unit for photon forces).
    pub force_tolerance: f64,
    pub max_iterations: usize,
    /// Largest nuclear coordinate change per step, Bohr.
    pub initial_step: f64,
    pub method: RelaxMethod,
}

impl Default for RelaxationSettings {
    fn default() -> Self {
        Self {
            force_tolerance: 1e-8,
            max_iterations: 200,
            initial_step: 0.3,
            method: RelaxMethod::Bfgs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub configuration: Configuration,
    pub energy: f64,
    pub max_force: f64,
    pub dipole: [f64; 3],
    pub iterations: usize,
}

/// Inverse of a symmetric Hessian with near-null directions projected out.
fn seeded_inverse(h: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(h.clone());
    let scale = eig.eigenvalues.amax();
    let floor = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let inv: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| if e.abs() > floor { 1.0 / e.abs() } else { 0.0 })
        .collect();
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&DVector::from_vec(inv)) * v.transpose()
}

fn eval<S: CboSurface + ?Sized>(system: &ValidatedSystem, surface: &S, x: &[f64]) -> Result<SurfacePoint> {
    surface.evaluate(system, &Configuration::from_flat(system, x)?)
}

pub fn relax<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    start: &Configuration,
    settings: &RelaxationSettings,
) -> Result<Equilibrium> {
    if !(settings.force_tolerance > 0.0) || !(settings.initial_step > 0.0) {
        return Err(Error::InvalidSettings(
            "relaxation tolerance and step must be positive".into(),
        ));
    }
    start.check(system)?;
    let nr = system.n_nuclear_dof();
    let n = system.n_dof();

    let mut x = start.to_flat();
    let mut point = eval(system, surface, &x)?;
    let mut iterations = 0;
    let mut hinv: Option<DMatrix<f64>> = None;

    while point.max_force() > settings.force_tolerance {
        if iterations >= settings.max_iterations {
            return Err(Error::MaxIterationsExceeded {
                iterations,
                max_force: point.max_force(),
            });
        }
        let h = match hinv.take() {
            Some(h) => h,
            None => seeded_inverse(&quick_hessian(system, surface, &x, &FdSettings::default())?),
        };
        let f = DVector::from_vec(point.forces_flat());
        let mut p = &h * &f;
        let mut h = h;
        if p.dot(&f) <= 0.0 || p.norm() == 0.0 {
            h = DMatrix::identity(n, n);
            p = f.clone();
        }
        let max_nuclear = p.rows(0, nr).amax();
        if max_nuclear > settings.initial_step {
            p *= settings.initial_step / max_nuclear;
        }

        let slope = p.dot(&f);
        let slack = 1e-14 * point.energy.abs().max(1.0);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
            match eval(system, surface, &trial) {
                Ok(next) => {
                    let armijo = next.energy <= point.energy - 1e-4 * alpha * slope + slack;
                    if armijo || next.max_force() < point.max_force() {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                Err(Error::BackendRefused(_)) if alpha > 1e-6 => {}
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        let Some((x_new, next)) = accepted else {
            return Err(Error::MaxIterationsExceeded {
                iterations,
                max_force: point.max_force(),
            });
        };

        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_vec(point.forces_flat()) - DVector::from_vec(next.forces_flat());
        let sy = s.dot(&y);
        if sy > 1e-16 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h = left * h * right + rho * &s * s.transpose();
        }
        hinv = Some(h);
        x = x_new;
        point = next;
        iterations += 1;
    }

    Ok(Equilibrium {
        configuration: Configuration::from_flat(system, &x)?,
        energy: point.energy,
        max_force: point.max_force(),
        dipole: point.dipole,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{AnalyticSurface, PolarizableMoleculeSpec};
    use crate::system::{Atom, CoupledSystem, PhotonMode};
    use nalgebra::Matrix3;

    fn system(lambda: f64) -> ValidatedSystem {
        CoupledSystem::new(
            vec![
                Atom::new("A", 4.0, 0.6, [0.0, 0.0, 0.0]),
                Atom::new("B", 9.0, -0.2, [0.0, 0.0, 2.0]),
            ],
            vec![PhotonMode::new(0.01, [0.0, lambda, lambda])],
        )
        .validate()
        .unwrap()
    }

    fn surface(alpha: f64) -> AnalyticSurface {
        let mut k = DMatrix::identity(6, 6) * 0.2;
        k[(2, 5)] = -0.1;
        k[(5, 2)] = -0.1;
        let mut spec = PolarizableMoleculeSpec::harmonic(vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0], k);
        spec.polarizability = Matrix3::from_diagonal_element(alpha);
        AnalyticSurface::new(spec).unwrap()
    }

    #[test]
    fn uncoupled_quadratic_relaxes_in_one_step() {
        let sys = system(0.0);
        let mut start = Configuration::initial(&sys);
        start.nuclear[0] = 0.2;
        start.nuclear[4] = -0.1;
        let eq = relax(&sys, &surface(0.0), &start, &RelaxationSettings::default()).unwrap();
        assert_eq!(eq.iterations, 1);
        assert!(eq.max_force <= 1e-8);
        assert!((eq.configuration.nuclear[0]).abs() < 1e-9);
        assert_eq!(eq.configuration.photon[0], 0.0);
    }

    #[test]
    fn coupled_photon_settles_at_its_stationary_value() {
        let sys = system(0.05);
        let eq = relax(
            &sys,
            &surface(2.0),
            &Configuration::initial(&sys),
            &RelaxationSettings::default(),
        )
        .unwrap();
        let mode = &sys.photon_modes()[0];
        let target = (mode.lambda[1] * eq.dipole[1] + mode.lambda[2] * eq.dipole[2]) / mode.omega;
        assert!((eq.configuration.photon[0] - target).abs() <= 1e-8 / mode.omega.powi(2));
        assert!(eq.configuration.photon[0].abs() > 0.1);
    }

    #[test]
    fn converged_start_is_left_alone() {
        let sys = system(0.05);
        let s = surface(2.0);
        let settings = RelaxationSettings::default();
        let eq = relax(&sys, &s, &Configuration::initial(&sys), &settings).unwrap();
        let again = relax(&sys, &s, &eq.configuration, &settings).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.configuration, eq.configuration);
    }

    #[test]
    fn trust_radius_violation_at_start_is_reported() {
        let sys = system(0.0);
        let mut start = Configuration::initial(&sys);
        start.nuclear[3] = 1.7;
        let err = relax(&sys, &surface(0.0), &start, &RelaxationSettings::default()).unwrap_err();
        assert!(matches!(err, Error::BackendRefused(ref m) if m.contains("coordinate 3")));
    }

    #[test]
    fn iteration_cap_is_enforced() {
        let sys = system(0.05);
        let settings = RelaxationSettings {
            max_iterations: 0,
            ..Default::default()
        };
        let err = relax(&sys, &surface(2.0), &Configuration::initial(&sys), &settings).unwrap_err();
        assert!(matches!(err, Error::MaxIterationsExceeded { .. }));
    }
}
