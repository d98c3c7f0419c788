//! Ready-made systems on the polarizable-molecule surface.

use nalgebra::{DMatrix, Matrix3};

use crate::backend::{AnalyticSurface, PolarizableMoleculeSpec};
use crate::config::{
    AtomConfig, BackendConfig, Config, NumericsConfig, PhotonModeConfig, PolarizableConfig, SystemConfig, CONFIG_FORMAT,
};
use crate::error::Result;
use crate::system::{Atom, CoupledSystem, PhotonMode, ValidatedSystem};
use crate::units::{wavenumber_to_hartree, AMU_TO_ELECTRON_MASS};

pub const CO2_PHOTON_CM1: f64 = 2430.0;
pub const CO2_BOND_BOHR: f64 = 2.2;
pub const CO2_STRETCH_K: f64 = 0.98;
pub const CO2_BEND_K: f64 = 0.0367;

/// Linear O=C=O analogue along z with a single cavity mode polarized along z
/// at `CO2_PHOTON_CM1`. The asymmetric stretch sits near 2436 cm⁻¹, the
/// symmetric stretch near 1272 cm⁻¹ and the degenerate bend near 667 cm⁻¹.
pub fn co2_analogue(lambda: f64) -> (ValidatedSystem, AnalyticSurface) {
    let d = CO2_BOND_BOHR;
    let system = CoupledSystem::new(
        vec![
            Atom::new("O", 15.995, -0.35, [0.0, 0.0, -d]),
            Atom::new("C", 12.0, 0.7, [0.0, 0.0, 0.0]),
            Atom::new("O", 15.995, -0.35, [0.0, 0.0, d]),
        ],
        vec![PhotonMode::from_wavenumber(CO2_PHOTON_CM1, [0.0, 0.0, lambda])],
    )
    .validate()
    .expect("preset system is valid");

    let mut k = DMatrix::zeros(9, 9);
    for (a, b) in [(0usize, 1usize), (1, 2)] {
        let (i, j) = (3 * a + 2, 3 * b + 2);
        k[(i, i)] += CO2_STRETCH_K;
        k[(j, j)] += CO2_STRETCH_K;
        k[(i, j)] -= CO2_STRETCH_K;
        k[(j, i)] -= CO2_STRETCH_K;
    }
    let bend = [1.0, -2.0, 1.0];
    for axis in 0..2 {
        for a in 0..3 {
            for b in 0..3 {
                k[(3 * a + axis, 3 * b + axis)] += CO2_BEND_K * bend[a] * bend[b];
            }
        }
    }
    let mut t = DMatrix::zeros(3, 9);
    for (atom, (perp, par)) in [(-0.05, -0.15), (0.1, 0.3), (-0.05, -0.15)].into_iter().enumerate() {
        t[(0, 3 * atom)] = perp;
        t[(1, 3 * atom + 1)] = perp;
        t[(2, 3 * atom + 2)] = par;
    }
    let mut spec = PolarizableMoleculeSpec::harmonic(system.positions_flat(), k);
    spec.polarizability = Matrix3::from_diagonal(&nalgebra::Vector3::new(13.0, 13.0, 27.0));
    spec.charge_transfer = t;
    (system, AnalyticSurface::new(spec).expect("preset spec is valid"))
}

/// Bent, asymmetric triatomic pinned in place (no zero-frequency modes),
/// with an anisotropic polarizability and two photon modes of different
/// polarization.
pub fn pinned_triatomic(lambdas: [[f64; 3]; 2]) -> (ValidatedSystem, AnalyticSurface) {
    let system = CoupledSystem::new(
        vec![
            Atom::new("A", 14.0, 0.42, [0.0, 0.0, 0.0]),
            Atom::new("B", 1.008, -0.17, [1.8, 0.0, 0.4]),
            Atom::new("C", 16.0, -0.25, [-0.6, 1.5, -0.3]),
        ],
        vec![
            PhotonMode::from_wavenumber(1900.0, lambdas[0]),
            PhotonMode::from_wavenumber(3100.0, lambdas[1]),
        ],
    )
    .validate()
    .expect("preset system is valid");

    let mut k = DMatrix::from_diagonal_element(9, 9, 0.03);
    let springs: [(usize, usize, f64, [f64; 3]); 3] = [
        (0, 1, 0.45, [0.9, 0.0, 0.2]),
        (0, 2, 0.6, [-0.3, 0.75, -0.15]),
        (1, 2, 0.08, [-1.2, 0.75, -0.35]),
    ];
    for (a, b, kk, dir) in springs {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let e = dir.map(|x| x / n);
        for p in 0..3 {
            for q in 0..3 {
                let v = kk * e[p] * e[q];
                k[(3 * a + p, 3 * a + q)] += v;
                k[(3 * b + p, 3 * b + q)] += v;
                k[(3 * a + p, 3 * b + q)] -= v;
                k[(3 * b + p, 3 * a + q)] -= v;
            }
        }
    }
    let t = DMatrix::from_row_slice(
        3,
        9,
        &[
            0.12, 0.02, -0.01, -0.05, 0.01, 0.00, -0.07, -0.03, 0.01, //
            0.01, 0.09, 0.03, 0.02, -0.04, 0.01, -0.03, -0.05, -0.04, //
            -0.02, 0.01, 0.15, 0.00, 0.02, -0.06, 0.02, -0.03, -0.09,
        ],
    );
    let mut spec = PolarizableMoleculeSpec::harmonic(system.positions_flat(), k);
    spec.polarizability = Matrix3::new(9.0, 0.8, -0.4, 0.8, 7.5, 0.6, -0.4, 0.6, 11.0);
    spec.charge_transfer = t;
    (system, AnalyticSurface::new(spec).expect("preset spec is valid"))
}

/// One atom of unit amu mass in an anisotropic harmonic well. The z
/// vibration has frequency `omega_cm1` and couples to a single photon of
/// frequency `photon_cm1` polarized along z; x and y are stiffer and do not
/// couple.
pub fn single_oscillator(
    omega_cm1: f64,
    photon_cm1: f64,
    lambda: f64,
    charge: f64,
    alpha: f64,
    charge_transfer: f64,
) -> (ValidatedSystem, AnalyticSurface) {
    let system = CoupledSystem::new(
        vec![Atom::new("X", 1.0, charge, [0.0, 0.0, 0.0])],
        vec![PhotonMode::from_wavenumber(photon_cm1, [0.0, 0.0, lambda])],
    )
    .validate()
    .expect("preset system is valid");
    let w = wavenumber_to_hartree(omega_cm1);
    let kz = w * w * AMU_TO_ELECTRON_MASS;
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0 * kz, 4.0 * kz, kz]));
    let mut spec = PolarizableMoleculeSpec::harmonic(vec![0.0; 3], k);
    spec.polarizability = Matrix3::from_diagonal_element(alpha);
    spec.charge_transfer = DMatrix::from_diagonal_element(3, 3, charge_transfer);
    (system, AnalyticSurface::new(spec).expect("preset spec is valid"))
}

/// Run configuration equivalent to [`co2_analogue`] with a coupling sweep
/// and a collective section.
pub fn co2_analogue_config(lambda: f64) -> Result<Config> {
    let (system, surface) = co2_analogue(lambda);
    Ok(Config {
        format: CONFIG_FORMAT,
        system: SystemConfig {
            atoms: system
                .atoms()
                .iter()
                .map(|a| AtomConfig {
                    label: a.label.clone(),
                    mass: a.mass,
                    z: a.charge,
                    xyz: a.position,
                })
                .collect(),
            photon_modes: vec![PhotonModeConfig {
                omega_cm1: CO2_PHOTON_CM1,
                lambda_xyz: [0.0, 0.0, lambda],
            }],
            molecule_partition: vec![[0, 3]],
        },
        backend: BackendConfig::Polarizable(PolarizableConfig::from_spec(surface.spec())),
        numerics: NumericsConfig {
            spectrum: crate::polariton::SpectrumGrid {
                min_cm1: 0.0,
                max_cm1: 3000.0,
                points: 3001,
            },
            ..Default::default()
        },
        sweep: Some(crate::config::SweepConfig {
            lambdas: [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
                .iter()
                .map(|&l| serde_json::json!(l))
                .collect(),
            target_mode: None,
            target_photon: 0,
        }),
        collective: Some(crate::collective::CollectiveSettings {
            n_mol: 4,
            lambda: lambda / 2.0,
            ..Default::default()
        }),
    })
}
