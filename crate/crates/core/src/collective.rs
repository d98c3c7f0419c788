//! N-molecule harmonic models assembled from one- and two-molecule data, and
//! their comparison against a direct N-molecule calculation.
//!
//! With N identical molecules coupled through λ^(N), the single-molecule
//! data is taken at λ^(1) = √N λ^(N) and the two-molecule data at
//! λ^(2) = √(N/2) λ^(N). Vibrations are indexed molecule-major: model mode
//! `m * n_modes + I` is mode I of molecule m.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::backend::ReplicableSurface;
use crate::error::{Error, Result};
use crate::models::{model_modes, params_from_force_constants, HarmonicModelParams, ModelVariant, UncoupledReference};
use crate::pipeline::{run_pipeline, PipelineResult, PipelineSettings};
use crate::polariton::{ir_spectrum, IrSpectrum, PolaritonMode};
use crate::system::{dot3, norm3, PhotonMode, ValidatedSystem};

/// Relative tolerance on the coupling scaling relations.
const SCALING_TOL: f64 = 1e-12;
/// Inter-molecule bare force constants must stay below this fraction of the largest entry.
const SEPARATION_TOL: f64 = 1e-10;
/// Relative tolerance when comparing molecule blocks.
const EQUIVALENCE_TOL: f64 = 1e-8;
const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Where the Ξ blocks and the other coupling-dependent parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSource {
    /// Single-molecule data for everything except the inter-molecule Ξ blocks.
    #[default]
    OneAndTwo,
    /// Every coupling-dependent parameter from the two-molecule data.
    TwoMolecule,
}

/// Uncoupled reference plus model parameters of one calculation.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeData {
    pub reference: UncoupledReference,
    pub params: HarmonicModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveSpec {
    pub n_mol: usize,
    /// Photon modes with the target coupling λ^(N).
    pub photon_modes: Vec<PhotonMode>,
    /// Data at λ^(1) = √N λ^(N).
    pub single: MoleculeData,
    /// Data at λ^(2) = √(N/2) λ^(N); required when N > 1.
    pub pair: Option<MoleculeData>,
    pub source: XiSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveModel {
    pub n_mol: usize,
    /// Vibration modes per molecule.
    pub n_modes: usize,
    pub params: HarmonicModelParams,
}

impl CollectiveModel {
    pub fn mode_index(&self, molecule: usize, mode: usize) -> usize {
        molecule * self.n_modes + mode
    }

    pub fn solve(&self) -> Result<Vec<PolaritonMode>> {
        model_modes(&self.params, ModelVariant::Full)
    }
}

fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * copies, c * copies);
    for k in 0..copies {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

fn tile_columns(m: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(r, c * copies, |i, j| m[(i, j % c)])
}

fn check_orthogonal(u: &DMatrix<f64>) -> Result<()> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "basis is {:?}, expected square",
            u.shape()
        )));
    }
    let dev = (u.transpose() * u - DMatrix::identity(u.nrows(), u.nrows())).amax();
    if dev > ORTHOGONALITY_TOL {
        return Err(Error::NonOrthogonalBasis(dev));
    }
    Ok(())
}

/// Ξ^(2*) = (I₂ ⊗ U1)ᵀ Ξ^(2) (I₂ ⊗ U1), with Ξ^(2) given in mass-weighted
/// Cartesian coordinates of the two-molecule system.
pub fn rotate_two_molecule_xi(xi2: &DMatrix<f64>, u1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_orthogonal(u1)?;
    let n = u1.nrows();
    if xi2.shape() != (2 * n, 2 * n) {
        return Err(Error::DimensionMismatch(format!(
            "two-molecule matrix is {:?}, expected ({}, {})",
            xi2.shape(),
            2 * n,
            2 * n
        )));
    }
    let r = block_diag(u1, 2);
    Ok(r.transpose() * xi2 * r)
}

/// Two-molecule parameters with every per-mode quantity expressed in the
/// basis of single-molecule normal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInMoleculeBasis {
    pub xi: DMatrix<f64>,
    pub dmu_dn: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

pub fn pair_in_molecule_basis(pair: &HarmonicModelParams, u1: &DMatrix<f64>) -> Result<PairInMoleculeBasis> {
    pair.check()?;
    let xi_cart = &pair.u0 * &pair.xi * pair.u0.transpose();
    let xi = rotate_two_molecule_xi(&xi_cart, u1)?;
    let r = pair.u0.transpose() * block_diag(u1, 2);
    Ok(PairInMoleculeBasis {
        xi,
        dmu_dn: &pair.dmu_dn * &r,
        theta: &pair.theta * &r,
        z: &pair.z * &r,
    })
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

impl CollectiveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_mol == 0 {
            return Err(Error::InvalidSettings("molecule count must be positive".into()));
        }
        let check = |label: &str, modes: &[PhotonMode], factor: f64| -> Result<()> {
            if modes.len() != self.photon_modes.len() {
                return Err(Error::InconsistentScaling(format!(
                    "{label} data has {} photon modes, expected {}",
                    modes.len(),
                    self.photon_modes.len()
                )));
            }
            for (a, (got, target)) in modes.iter().zip(&self.photon_modes).enumerate() {
                let want = target.lambda.map(|l| l * factor);
                let err = norm3(&[
                    got.lambda[0] - want[0],
                    got.lambda[1] - want[1],
                    got.lambda[2] - want[2],
                ]);
                let tol = SCALING_TOL * norm3(&want).max(f64::MIN_POSITIVE);
                if err > tol || (got.omega - target.omega).abs() > SCALING_TOL * target.omega {
                    return Err(Error::InconsistentScaling(format!(
                        "{label} photon mode {a} has coupling {:?}, expected {want:?}",
                        got.lambda
                    )));
                }
            }
            Ok(())
        };
        let n = self.n_mol as f64;
        check("single-molecule", &self.single.params.photon_modes, n.sqrt())?;
        let m = self.single.params.n_modes();
        match (&self.pair, self.n_mol) {
            (None, 1) if self.source == XiSource::OneAndTwo => {}
            (None, _) => {
                return Err(Error::InconsistentScaling(
                    "two-molecule data is required for this assembly".into(),
                ))
            }
            (Some(pair), _) => {
                check("two-molecule", &pair.params.photon_modes, (n / 2.0).sqrt())?;
                if pair.params.n_modes() != 2 * m {
                    return Err(Error::DimensionMismatch(format!(
                        "two-molecule data has {} modes, expected {}",
                        pair.params.n_modes(),
                        2 * m
                    )));
                }
                check_pair_structure(&self.single.reference, &pair.reference)?;
            }
        }
        Ok(())
    }
}

/// Bare force constants of the pair must be block diagonal with both blocks
/// equal to the single molecule's.
pub fn check_pair_structure(single: &UncoupledReference, pair: &UncoupledReference) -> Result<()> {
    let n = single.c_rr.nrows();
    if pair.c_rr.shape() != (2 * n, 2 * n) {
        return Err(Error::DimensionMismatch("two-molecule force constants".into()));
    }
    let norm = pair.c_rr.amax();
    let inter = pair.c_rr.view((0, n), (n, n)).amax();
    if inter > SEPARATION_TOL * norm {
        return Err(Error::NotWellSeparated(format!(
            "inter-molecule force constants reach {inter:.3e} (largest entry {norm:.3e})"
        )));
    }
    for k in 0..2 {
        let block = pair.c_rr.view((k * n, k * n), (n, n)).into_owned();
        let d = rel_diff(&block, &single.c_rr);
        if d > EQUIVALENCE_TOL {
            return Err(Error::InequivalentMolecules(format!(
                "molecule {k} force constants differ from the single molecule by {d:.3e} relative"
            )));
        }
    }
    Ok(())
}

/// Per-molecule blocks of a bare N-molecule force-constant matrix must all be
/// equal and the system well separated.
pub fn check_direct_structure(c_rr: &DMatrix<f64>, n_mol: usize) -> Result<()> {
    if n_mol == 0 || !c_rr.nrows().is_multiple_of(n_mol) {
        return Err(Error::DimensionMismatch(
            "force constants do not split into molecules".into(),
        ));
    }
    let n = c_rr.nrows() / n_mol;
    let norm = c_rr.amax();
    let first = c_rr.view((0, 0), (n, n)).into_owned();
    for a in 0..n_mol {
        for b in 0..n_mol {
            let block = c_rr.view((a * n, b * n), (n, n));
            if a != b && block.amax() > SEPARATION_TOL * norm {
                return Err(Error::NotWellSeparated(format!(
                    "molecules {a} and {b} share force constants up to {:.3e}",
                    block.amax()
                )));
            }
            if a == b && rel_diff(&block.into_owned(), &first) > EQUIVALENCE_TOL {
                return Err(Error::InequivalentMolecules(format!(
                    "molecule {a} differs from molecule 0"
                )));
            }
        }
    }
    Ok(())
}

pub fn build_collective_model(spec: &CollectiveSpec) -> Result<CollectiveModel> {
    spec.validate()?;
    let n = spec.n_mol;
    let nf = n as f64;
    let single = &spec.single.params;
    let m = single.n_modes();
    let np = single.n_photons();
    let u1 = &spec.single.reference.u0;

    let (xi_diag, xi_off, dmu_dn, dmu_dq, theta) = match spec.source {
        XiSource::OneAndTwo => {
            let off = match &spec.pair {
                Some(pair) => pair_in_molecule_basis(&pair.params, u1)?.xi.view((0, m), (m, m)) * (2.0 / nf),
                None => DMatrix::zeros(m, m),
            };
            (
                &single.xi / nf,
                off,
                single.dmu_dn.clone(),
                &single.dmu_dq * nf.sqrt(),
                &single.theta / nf.sqrt(),
            )
        }
        XiSource::TwoMolecule => {
            let pair = spec.pair.as_ref().expect("validated");
            let rotated = pair_in_molecule_basis(&pair.params, u1)?;
            (
                rotated.xi.view((0, 0), (m, m)) * (2.0 / nf),
                rotated.xi.view((0, m), (m, m)) * (2.0 / nf),
                rotated.dmu_dn.columns(0, m).into_owned(),
                &pair.params.dmu_dq * (nf / 2.0).sqrt(),
                rotated.theta.columns(0, m) * (2.0 / nf).sqrt(),
            )
        }
    };

    let mut xi = DMatrix::zeros(n * m, n * m);
    for a in 0..n {
        for b in 0..n {
            let block = match a.cmp(&b) {
                std::cmp::Ordering::Equal => xi_diag.clone(),
                std::cmp::Ordering::Less => xi_off.clone(),
                std::cmp::Ordering::Greater => xi_off.transpose(),
            };
            xi.view_mut((a * m, b * m), (m, m)).copy_from(&block);
        }
    }
    let xi = (&xi + xi.transpose()) * 0.5;
    let params = HarmonicModelParams {
        omega_sq: (0..n).flat_map(|_| single.omega_sq.iter().copied()).collect(),
        eta0: block_diag(&single.eta0, n),
        u0: block_diag(&single.u0, n),
        z: tile_columns(&single.z, n),
        dmu_dn: tile_columns(&dmu_dn, n),
        dmu_dn0: tile_columns(&single.dmu_dn0, n),
        dmu_dq,
        xi,
        theta: tile_columns(&theta, n),
        photon_modes: spec.photon_modes.clone(),
    };
    debug_assert_eq!(params.theta.shape(), (np, n * m));
    params.check()?;
    Ok(CollectiveModel {
        n_mol: n,
        n_modes: m,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectiveSettings {
    pub n_mol: usize,
    /// Coupling magnitude λ^(N) of the first photon mode.
    pub lambda: f64,
    /// Distance between neighbouring copies, Bohr.
    pub spacing_bohr: f64,
    /// Direction along which copies are placed.
    pub axis: [f64; 3],
    /// Also run the direct N-molecule pipeline.
    pub direct: bool,
    /// Largest (Z*·λ̂)² of a dark mode.
    pub dark_threshold: f64,
    pub source: XiSource,
    /// Single-molecule mode whose collective band is analysed; defaults to
    /// the polarization-active mode closest to the first photon frequency.
    pub target_mode: Option<usize>,
}

impl Default for CollectiveSettings {
    fn default() -> Self {
        Self {
            n_mol: 1,
            lambda: 0.0,
            spacing_bohr: 20.0,
            axis: [1.0, 0.0, 0.0],
            direct: true,
            dark_threshold: 1e-8,
            source: XiSource::OneAndTwo,
            target_mode: None,
        }
    }
}

impl CollectiveSettings {
    pub fn shift(&self) -> Result<[f64; 3]> {
        let n = norm3(&self.axis);
        if !(n > 0.0) || !(self.spacing_bohr > 0.0) {
            return Err(Error::InvalidSettings(
                "collective axis and spacing must be nonzero".into(),
            ));
        }
        Ok(self.axis.map(|x| x * self.spacing_bohr / n))
    }
}

/// Runs the single- and two-molecule calculations for an N-molecule model
/// whose first photon mode has coupling magnitude `settings.lambda`. `system`
/// holds one molecule; its photon coupling vectors fix the directions.
pub fn prepare_collective_spec<S: ReplicableSurface>(
    system: &ValidatedSystem,
    surface: &S,
    settings: &CollectiveSettings,
    pipeline: &PipelineSettings,
) -> Result<CollectiveSpec> {
    let target = target_photon_modes(system, settings.lambda)?;
    let n = settings.n_mol as f64;
    if settings.n_mol == 0 {
        return Err(Error::InvalidSettings("molecule count must be positive".into()));
    }
    let at =
        |sys: &ValidatedSystem, factor: f64| sys.with_photon_modes(target.iter().map(|m| m.scaled(factor)).collect());
    let single_sys = at(system, n.sqrt())?;
    let single = molecule_data(&single_sys, surface, pipeline)?;
    let need_pair = settings.n_mol > 1 || settings.source == XiSource::TwoMolecule;
    let pair = if need_pair {
        let shift = settings.shift()?;
        let pair_sys = at(&system.replicate(2, shift)?, (n / 2.0).sqrt())?;
        let pair_surface = surface.replicate(2, shift)?;
        Some(molecule_data(&pair_sys, &pair_surface, pipeline)?)
    } else {
        None
    };
    Ok(CollectiveSpec {
        n_mol: settings.n_mol,
        photon_modes: target,
        single,
        pair,
        source: settings.source,
    })
}

fn target_photon_modes(system: &ValidatedSystem, lambda_n: f64) -> Result<Vec<PhotonMode>> {
    if !lambda_n.is_finite() {
        return Err(Error::NonfiniteInput("collective coupling".into()));
    }
    let first = system
        .photon_modes()
        .first()
        .ok_or_else(|| Error::InvalidSettings("collective runs need a photon mode".into()))?;
    let base = first.lambda_norm();
    if !(base > 0.0) {
        return Err(Error::InvalidSettings(
            "first photon mode needs a nonzero coupling vector to fix the polarization".into(),
        ));
    }
    Ok(system
        .photon_modes()
        .iter()
        .map(|m| m.scaled(lambda_n / base))
        .collect())
}

fn molecule_data<S: crate::backend::CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    pipeline: &PipelineSettings,
) -> Result<MoleculeData> {
    let reference = UncoupledReference::compute(system, surface, pipeline)?;
    let coupled = run_pipeline(system, surface, pipeline)?;
    let params = params_from_force_constants(system, &reference, &coupled.force_constants)?;
    Ok(MoleculeData { reference, params })
}

/// Direct N-molecule calculation for comparison with the model.
pub struct DirectResult {
    pub reference: UncoupledReference,
    pub pipeline: PipelineResult,
}

pub fn run_direct<S: ReplicableSurface>(
    system: &ValidatedSystem,
    surface: &S,
    settings: &CollectiveSettings,
    pipeline: &PipelineSettings,
) -> Result<DirectResult> {
    let shift = settings.shift()?;
    let target = target_photon_modes(system, settings.lambda)?;
    let big = system.replicate(settings.n_mol, shift)?.with_photon_modes(target)?;
    let big_surface = surface.replicate(settings.n_mol, shift)?;
    let reference = UncoupledReference::compute(&big, &big_surface, pipeline)?;
    check_direct_structure(&reference.c_rr, settings.n_mol)?;
    let pipeline = run_pipeline(&big, &big_surface, pipeline)?;
    Ok(DirectResult { reference, pipeline })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveModeRow {
    pub index: usize,
    pub model_cm1: f64,
    pub direct_cm1: Option<f64>,
    pub diff_cm1: Option<f64>,
    pub photon_character: f64,
    /// (Z*·λ̂)² of the model mode.
    pub ir_along_polarization: f64,
    /// Weight in the span of every molecule's target mode.
    pub band_weight: f64,
    pub dark: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveReport {
    pub n_mol: usize,
    pub target_mode: usize,
    /// Bright-pair splitting, cm⁻¹.
    pub splitting_model: f64,
    pub splitting_direct: Option<f64>,
    pub dark_mode_count: usize,
    pub dark_mode_count_direct: Option<usize>,
    pub max_mode_freq_diff_cm1: Option<f64>,
    /// Over modes at or above `ZERO_MODE_CM1`.
    pub max_mode_freq_rel_diff: Option<f64>,
    pub per_mode: Vec<CollectiveModeRow>,
    /// Intensities divided by N (amplitudes by √N).
    pub spectrum_model: IrSpectrum,
    pub spectrum_direct: Option<IrSpectrum>,
}

/// Modes below this frequency (cm⁻¹) are translations and rotations and are
/// left out of the relative frequency comparison.
pub const ZERO_MODE_CM1: f64 = 1.0;

/// Frequency difference of the two modes with the largest photon character, cm⁻¹.
pub fn bright_splitting(modes: &[PolaritonMode]) -> Result<f64> {
    if modes.len() < 2 {
        return Err(Error::InvalidSettings("need at least two modes".into()));
    }
    let mut idx: Vec<usize> = (0..modes.len()).collect();
    idx.sort_by(|&a, &b| {
        modes[b]
            .photon_character
            .total_cmp(&modes[a].photon_character)
            .then(a.cmp(&b))
    });
    Ok((modes[idx[0]].signed_omega_cm1() - modes[idx[1]].signed_omega_cm1()).abs())
}

fn polarization(photon_modes: &[PhotonMode]) -> [f64; 3] {
    let l = photon_modes[0].lambda;
    let n = norm3(&l);
    l.map(|x| x / n)
}

/// Dark modes: weight ≥ ½ in the span of the given unit states and
/// (Z*·λ̂)² ≤ threshold.
pub fn dark_modes(
    modes: &[PolaritonMode],
    band: &[Vec<f64>],
    direction: [f64; 3],
    threshold: f64,
) -> Vec<(f64, f64, bool)> {
    modes
        .iter()
        .map(|m| {
            let weight: f64 = band
                .iter()
                .map(|b| m.eigenvector.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().powi(2))
                .sum();
            let ir = m.z_star().map_or(0.0, |z| dot3(&z, &direction).powi(2));
            (weight, ir, weight >= 0.5 && ir <= threshold)
        })
        .collect()
}

fn model_band(model: &CollectiveModel, target: usize) -> Vec<Vec<f64>> {
    let len = model.params.n_modes() + model.params.n_photons();
    (0..model.n_mol)
        .map(|k| crate::polariton::unit_state(len, model.mode_index(k, target)))
        .collect()
}

fn direct_band(single: &UncoupledReference, n_mol: usize, n_photons: usize, target: usize) -> Vec<Vec<f64>> {
    let n = single.n_modes();
    (0..n_mol)
        .map(|k| {
            let mut v = vec![0.0; n * n_mol + n_photons];
            for i in 0..n {
                v[k * n + i] = single.u0[(i, target)];
            }
            v
        })
        .collect()
}

/// Model-versus-direct comparison. Without `direct` only the model side is filled in.
pub fn collective_spectrum_compare(
    spec: &CollectiveSpec,
    direct: Option<&DirectResult>,
    settings: &CollectiveSettings,
    grid_cm1: &[f64],
    broadening_cm1: f64,
) -> Result<CollectiveReport> {
    let model = build_collective_model(spec)?;
    let modes = model.solve()?;
    let dir = polarization(&spec.photon_modes);
    let target = match settings.target_mode {
        Some(t) if t < model.n_modes => t,
        Some(t) => return Err(Error::InvalidSettings(format!("target mode {t} out of range"))),
        None => crate::models::select_target_mode(&spec.single.reference, dir, spec.photon_modes[0].omega)?,
    };
    let scale = 1.0 / spec.n_mol as f64;
    let classes = dark_modes(&modes, &model_band(&model, target), dir, settings.dark_threshold);
    let spectrum_model = ir_spectrum(&modes, grid_cm1, broadening_cm1)?.scaled(scale);

    let (direct_modes, direct_dark, spectrum_direct) = match direct {
        Some(d) => {
            let dm = &d.pipeline.modes;
            if dm.len() != modes.len() {
                return Err(Error::DimensionMismatch(format!(
                    "direct calculation has {} modes, model {}",
                    dm.len(),
                    modes.len()
                )));
            }
            let band = direct_band(&spec.single.reference, spec.n_mol, spec.photon_modes.len(), target);
            let count = dark_modes(dm, &band, dir, settings.dark_threshold)
                .iter()
                .filter(|c| c.2)
                .count();
            (
                Some(dm),
                Some(count),
                Some(ir_spectrum(dm, grid_cm1, broadening_cm1)?.scaled(scale)),
            )
        }
        None => (None, None, None),
    };

    let per_mode: Vec<CollectiveModeRow> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let direct_cm1 = direct_modes.map(|d| d[i].signed_omega_cm1());
            CollectiveModeRow {
                index: i,
                model_cm1: m.signed_omega_cm1(),
                direct_cm1,
                diff_cm1: direct_cm1.map(|d| m.signed_omega_cm1() - d),
                photon_character: m.photon_character,
                ir_along_polarization: classes[i].1,
                band_weight: classes[i].0,
                dark: classes[i].2,
            }
        })
        .collect();
    let max_mode_freq_diff_cm1 = direct_modes.map(|_| {
        per_mode
            .iter()
            .fold(0.0f64, |a, r| a.max(r.diff_cm1.unwrap_or(0.0).abs()))
    });
    let max_mode_freq_rel_diff = direct_modes.map(|d| {
        modes
            .iter()
            .zip(d.iter())
            .filter(|(a, b)| a.omega_cm1().max(b.omega_cm1()) >= ZERO_MODE_CM1)
            .map(|(a, b)| (a.omega - b.omega).abs() / a.omega.max(b.omega))
            .fold(0.0f64, f64::max)
    });
    Ok(CollectiveReport {
        n_mol: spec.n_mol,
        target_mode: target,
        splitting_model: bright_splitting(&modes)?,
        splitting_direct: direct_modes.map(|d| bright_splitting(d)).transpose()?,
        dark_mode_count: classes.iter().filter(|c| c.2).count(),
        dark_mode_count_direct: direct_dark,
        max_mode_freq_diff_cm1,
        max_mode_freq_rel_diff,
        per_mode,
        spectrum_model,
        spectrum_direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }

    #[test]
    fn zero_matrix_stays_zero() {
        let r = rotate_two_molecule_xi(&DMatrix::zeros(4, 4), &rotation(0.3)).unwrap();
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn block_diagonal_input_keeps_zero_off_diagonal_blocks() {
        let u = rotation(0.7);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let cart = &u * &a * u.transpose();
        let r = rotate_two_molecule_xi(&block_diag(&cart, 2), &u).unwrap();
        assert!(r.view((0, 2), (2, 2)).amax() < 1e-15);
        assert!((r.view((0, 0), (2, 2)) - &a).amax() < 1e-14);
    }

    #[test]
    fn rotation_input_checks() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            rotate_two_molecule_xi(&DMatrix::zeros(4, 4), &bad),
            Err(Error::NonOrthogonalBasis(_))
        ));
        assert!(matches!(
            rotate_two_molecule_xi(&DMatrix::zeros(3, 3), &rotation(0.1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn bright_splitting_uses_photon_character() {
        let mk = |omega: f64, pc: f64| PolaritonMode {
            omega_sq: omega * omega,
            omega,
            imaginary: false,
            eigenvector: vec![],
            eta_r: vec![],
            eta_q: vec![],
            photon_character: pc,
            charge: None,
        };
        let modes = [mk(0.010, 0.4), mk(0.0105, 0.0), mk(0.011, 0.6)];
        let expected = crate::units::hartree_to_wavenumber(0.011) - crate::units::hartree_to_wavenumber(0.010);
        assert!((bright_splitting(&modes).unwrap() - expected).abs() < 1e-9);
    }
}
