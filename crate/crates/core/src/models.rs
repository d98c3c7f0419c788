//! Effective harmonic models in the basis of uncoupled vibrational normal
//! modes N and photon displacements q, their two-mode reduction, and
//! coupling-strength sweeps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::CboSurface;
use crate::error::{Error, Result};
use crate::hessian::ForceConstantSet;
use crate::pipeline::{run_pipeline, PipelineSettings};
use crate::polariton::{apply_effective_charges, GeneralizedEigenproblem, PolaritonMode};
use crate::system::{dot3, norm3, PhotonMode, ValidatedSystem};
use crate::units::hartree_to_wavenumber;

/// Normal modes of the uncoupled (λ = 0) system. Every 3N nuclear mode is
/// kept, including translations and rotations, so the change of basis
/// ΔR = η0 N is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct UncoupledReference {
    /// ω_I², atomic units, ascending.
    pub omega_sq: Vec<f64>,
    /// Unit mass-weighted eigenvectors as columns.
    pub u0: DMatrix<f64>,
    /// Eigendisplacements M^(-1/2) U0 as columns.
    pub eta0: DMatrix<f64>,
    /// Ionic mode charges, 3 × N_modes.
    pub z: DMatrix<f64>,
    /// ∂⟨μ⟩/∂N at λ = 0, 3 × N_modes.
    pub dmu_dn0: DMatrix<f64>,
    /// λ = 0 nuclear force constants.
    pub c_rr: DMatrix<f64>,
}

impl UncoupledReference {
    pub fn compute<S: CboSurface + ?Sized>(
        system: &ValidatedSystem,
        surface: &S,
        settings: &PipelineSettings,
    ) -> Result<Self> {
        let bare = system.uncoupled();
        let result = run_pipeline(&bare, surface, settings)?;
        Self::from_force_constants(&bare, &result.force_constants)
    }

    pub fn from_force_constants(system: &ValidatedSystem, fcs: &ForceConstantSet) -> Result<Self> {
        let nr = system.n_nuclear_dof();
        if fcs.n_nuclear_dof() != nr {
            return Err(Error::DimensionMismatch(
                "force constants do not match the system".into(),
            ));
        }
        let modes = GeneralizedEigenproblem::new(fcs.c_rr.clone(), system.nuclear_masses().to_vec(), nr)?.solve()?;
        let u0 = DMatrix::from_fn(nr, nr, |i, m| modes[m].eigenvector[i]);
        let eta0 = DMatrix::from_fn(nr, nr, |i, m| modes[m].eta_r[i]);
        let charges = system.dof_charges();
        let z = DMatrix::from_fn(3, nr, |k, m| {
            (k..nr).step_by(3).map(|j| charges[j] * eta0[(j, m)]).sum()
        });
        Ok(Self {
            omega_sq: modes.iter().map(|m| m.omega_sq).collect(),
            dmu_dn0: &fcs.dmu_dr * &eta0,
            u0,
            eta0,
            z,
            c_rr: fcs.c_rr.clone(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.omega_sq.len()
    }

    /// Mass-weighted Cartesian vector of uncoupled mode `mode`, padded with
    /// zeros for `n_photons` photon coordinates.
    pub fn mode_state(&self, mode: usize, n_photons: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.u0.column(mode).iter().copied().collect();
        v.resize(v.len() + n_photons, 0.0);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Full,
    Mu2,
    Hopfield,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [ModelVariant::Full, ModelVariant::Mu2, ModelVariant::Hopfield];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::Mu2 => "mu2",
            ModelVariant::Hopfield => "hopfield",
        }
    }

    fn keeps_quadratic_term(self) -> bool {
        self != ModelVariant::Hopfield
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicModelParams {
    /// ω_I² of the uncoupled modes, atomic units.
    pub omega_sq: Vec<f64>,
    pub eta0: DMatrix<f64>,
    pub u0: DMatrix<f64>,
    /// Ionic mode charges Z_I, 3 × N_modes.
    pub z: DMatrix<f64>,
    /// 3 × N_modes.
    pub dmu_dn: DMatrix<f64>,
    /// ∂⟨μ⟩/∂N at λ = 0.
    pub dmu_dn0: DMatrix<f64>,
    /// 3 × N_pt.
    pub dmu_dq: DMatrix<f64>,
    /// N_modes × N_modes, symmetric.
    pub xi: DMatrix<f64>,
    /// N_pt × N_modes.
    pub theta: DMatrix<f64>,
    pub photon_modes: Vec<PhotonMode>,
}

impl HarmonicModelParams {
    pub fn n_modes(&self) -> usize {
        self.omega_sq.len()
    }

    pub fn n_photons(&self) -> usize {
        self.photon_modes.len()
    }

    pub fn check(&self) -> Result<()> {
        let nm = self.n_modes();
        let np = self.n_photons();
        let shapes = [
            ("z", self.z.shape(), (3, nm)),
            ("dmu_dn", self.dmu_dn.shape(), (3, nm)),
            ("dmu_dn0", self.dmu_dn0.shape(), (3, nm)),
            ("dmu_dq", self.dmu_dq.shape(), (3, np)),
            ("xi", self.xi.shape(), (nm, nm)),
            ("theta", self.theta.shape(), (np, nm)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has shape {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(())
    }

    /// The parameters a given model variant actually uses.
    pub fn for_variant(&self, variant: ModelVariant) -> Self {
        let mut p = self.clone();
        if variant != ModelVariant::Full {
            p.xi = DMatrix::zeros(self.n_modes(), self.n_modes());
            p.dmu_dq = DMatrix::zeros(3, self.n_photons());
            p.dmu_dn = self.dmu_dn0.clone();
        }
        p
    }

    fn lambda_dot(&self, alpha: usize, m: &DMatrix<f64>, col: usize) -> f64 {
        dot3(
            &self.photon_modes[alpha].lambda,
            &[m[(0, col)], m[(1, col)], m[(2, col)]],
        )
    }

    /// Quadratic form of the model Hamiltonian in (N, q).
    pub fn model_matrix(&self, variant: ModelVariant) -> Result<DMatrix<f64>> {
        self.check()?;
        let p = self.for_variant(variant);
        let nm = self.n_modes();
        let np = self.n_photons();
        let mut c = DMatrix::zeros(nm + np, nm + np);

        let mut vib = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(p.omega_sq.clone())) + &p.xi;
        if variant.keeps_quadratic_term() {
            let mut quad = DMatrix::zeros(nm, nm);
            for a in 0..np {
                for i in 0..nm {
                    let lz = p.lambda_dot(a, &p.z, i);
                    for j in 0..nm {
                        quad[(i, j)] += lz * p.lambda_dot(a, &p.dmu_dn, j);
                    }
                }
            }
            vib += (&quad + quad.transpose()) * 0.5;
        }
        c.view_mut((0, 0), (nm, nm)).copy_from(&vib);

        let mut photon = DMatrix::zeros(np, np);
        for a in 0..np {
            let omega = p.photon_modes[a].omega;
            photon[(a, a)] += omega * omega;
            for b in 0..np {
                photon[(a, b)] -= omega * p.lambda_dot(a, &p.dmu_dq, b);
            }
        }
        let photon = (&photon + photon.transpose()) * 0.5;
        c.view_mut((nm, nm), (np, np)).copy_from(&photon);

        for a in 0..np {
            let omega = p.photon_modes[a].omega;
            for i in 0..nm {
                let v = -omega * p.lambda_dot(a, &p.dmu_dn, i);
                c[(nm + a, i)] = v;
                c[(i, nm + a)] = v;
            }
        }
        Ok(c)
    }

    /// Both sides of the Maxwell relation between Θ and ∂⟨μ⟩/∂N.
    pub fn maxwell_check(&self) -> Result<MaxwellReport> {
        self.check()?;
        let nm = self.n_modes();
        let np = self.n_photons();
        let mut residual = DMatrix::zeros(np, nm);
        let mut residual_as_printed = DMatrix::zeros(np, nm);
        let mut scale = 0.0f64;
        for a in 0..np {
            let mode = &self.photon_modes[a];
            let mut response = mode.lambda.map(|l| l * mode.omega);
            for b in 0..np {
                let lb = self.photon_modes[b].lambda;
                let proj = self.lambda_dot(b, &self.dmu_dq, a);
                for k in 0..3 {
                    response[k] -= lb[k] * proj;
                }
            }
            let own = self.lambda_dot(a, &self.dmu_dq, a);
            let printed = [0, 1, 2].map(|k| mode.lambda[k] * mode.omega + mode.lambda[k] * own);
            for i in 0..nm {
                let zi = [self.z[(0, i)], self.z[(1, i)], self.z[(2, i)]];
                let lhs = self.theta[(a, i)] - dot3(&zi, &response);
                let lhs_printed = self.theta[(a, i)] - dot3(&zi, &printed);
                let rhs = -mode.omega * self.lambda_dot(a, &self.dmu_dn, i);
                residual[(a, i)] = lhs - rhs;
                residual_as_printed[(a, i)] = lhs_printed - rhs;
                scale = scale
                    .max(self.theta[(a, i)].abs())
                    .max(dot3(&zi, &response).abs())
                    .max(rhs.abs());
            }
        }
        Ok(MaxwellReport {
            residual,
            residual_as_printed,
            scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellReport {
    /// Θ_αI − Z_I·(λ_α ω_α − Σ_β λ_β (λ_β·∂⟨μ⟩/∂q_α)) + ω_α λ_α·∂⟨μ⟩/∂N_I.
    pub residual: DMatrix<f64>,
    /// Same with the response term written as +λ_α(λ_α·∂⟨μ⟩/∂q_α).
    pub residual_as_printed: DMatrix<f64>,
    /// Largest magnitude among the individual terms.
    pub scale: f64,
}

impl MaxwellReport {
    pub fn max_residual(&self) -> f64 {
        self.residual.amax()
    }

    pub fn max_residual_as_printed(&self) -> f64 {
        self.residual_as_printed.amax()
    }
}

/// Model parameters at the coupling of `system`, from force constants that
/// include the non-coupling derivatives.
pub fn params_from_force_constants(
    system: &ValidatedSystem,
    reference: &UncoupledReference,
    fcs: &ForceConstantSet,
) -> Result<HarmonicModelParams> {
    let nr = system.n_nuclear_dof();
    if fcs.n_nuclear_dof() != nr || reference.n_modes() != nr || fcs.n_photons() != system.n_photons() {
        return Err(Error::DimensionMismatch(
            "reference, force constants and system disagree".into(),
        ));
    }
    let nc = fcs.noncoupling.as_ref().ok_or(Error::BackendLacksForceSplit)?;
    let inv_sqrt: Vec<f64> = system.nuclear_masses().iter().map(|m| 1.0 / m.sqrt()).collect();
    let b = DMatrix::from_fn(nr, nr, |i, j| {
        0.5 * (nc.rr[(i, j)] + nc.rr[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]
    });
    let rotated = reference.u0.transpose() * b * &reference.u0;
    let mut xi = (&rotated + rotated.transpose()) * 0.5;
    for (i, w) in reference.omega_sq.iter().enumerate() {
        xi[(i, i)] -= w;
    }
    Ok(HarmonicModelParams {
        omega_sq: reference.omega_sq.clone(),
        eta0: reference.eta0.clone(),
        u0: reference.u0.clone(),
        z: reference.z.clone(),
        dmu_dn: &fcs.dmu_dr * &reference.eta0,
        dmu_dn0: reference.dmu_dn0.clone(),
        dmu_dq: fcs.dmu_dq.clone(),
        xi,
        theta: (reference.eta0.transpose() * &nc.rq).transpose(),
        photon_modes: system.photon_modes().to_vec(),
    })
}

/// Relaxes the uncoupled and the coupled system and extracts the model
/// parameters at the coupling of `system`.
pub fn extract_params<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    settings: &PipelineSettings,
) -> Result<HarmonicModelParams> {
    if !surface.supports_force_split() {
        return Err(Error::BackendLacksForceSplit);
    }
    let reference = UncoupledReference::compute(system, surface, settings)?;
    let coupled = run_pipeline(system, surface, settings)?;
    params_from_force_constants(system, &reference, &coupled.force_constants)
}

/// Normal modes of a model variant. Eigendisplacements live in the (N, q)
/// basis with unit masses and carry effective charges from the variant's
/// dipole derivatives.
pub fn model_modes(params: &HarmonicModelParams, variant: ModelVariant) -> Result<Vec<PolaritonMode>> {
    let c = params.model_matrix(variant)?;
    let nm = params.n_modes();
    let mut modes = GeneralizedEigenproblem::new(c, vec![1.0; nm + params.n_photons()], nm)?.solve()?;
    let p = params.for_variant(variant);
    apply_effective_charges(&mut modes, &p.dmu_dn, &p.dmu_dq)?;
    Ok(modes)
}

/// Scalar parameters of one vibration coupled to one photon mode, projected
/// on the polarization direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub omega_n: f64,
    pub omega_q: f64,
    pub xi: f64,
    pub z: f64,
    pub lambda: f64,
    pub dmu_dn: f64,
    pub dmu_dq: f64,
    /// Whether the λ² Z ∂⟨μ⟩/∂N term enters the vibration frequency.
    pub quadratic_term: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeResult {
    pub omega_n_eff: f64,
    pub omega_q_eff: f64,
    /// Coupling in the squared-frequency units of the 2×2 quadratic form.
    pub lambda_eff: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
    /// Closed form averaging the effective frequencies, with the coupling
    /// converted to frequency units as λ̃ / (2 √(ω̃_N ω̃_q)).
    pub omega_minus_perturbative: f64,
    pub omega_plus_perturbative: f64,
}

impl TwoModeResult {
    pub fn splitting(&self) -> f64 {
        self.omega_plus - self.omega_minus
    }

    pub fn splitting_perturbative(&self) -> f64 {
        self.omega_plus_perturbative - self.omega_minus_perturbative
    }
}

fn signed_sqrt(x: f64) -> f64 {
    x.signum() * x.abs().sqrt()
}

impl TwoModeParams {
    /// Reduction of a multi-mode model to vibration `mode` and photon
    /// `photon`, projecting vectors on the photon's polarization (the z axis
    /// when its coupling vanishes).
    pub fn from_model(params: &HarmonicModelParams, variant: ModelVariant, mode: usize, photon: usize) -> Result<Self> {
        let lambda = params
            .photon_modes
            .get(photon)
            .ok_or_else(|| Error::NotTwoMode(format!("no photon mode {photon}")))?
            .lambda;
        let direction = if norm3(&lambda) > 0.0 { lambda } else { [0.0, 0.0, 1.0] };
        Self::from_model_along(params, variant, mode, photon, direction)
    }

    pub fn from_model_along(
        params: &HarmonicModelParams,
        variant: ModelVariant,
        mode: usize,
        photon: usize,
        direction: [f64; 3],
    ) -> Result<Self> {
        params.check()?;
        if mode >= params.n_modes() || photon >= params.n_photons() {
            return Err(Error::NotTwoMode(format!(
                "mode {mode} / photon {photon} out of range ({} modes, {} photons)",
                params.n_modes(),
                params.n_photons()
            )));
        }
        let n = norm3(&direction);
        if !(n > 0.0) {
            return Err(Error::InvalidSettings("projection direction must be nonzero".into()));
        }
        let d = direction.map(|x| x / n);
        let p = params.for_variant(variant);
        let col = |m: &DMatrix<f64>, c: usize| dot3(&d, &[m[(0, c)], m[(1, c)], m[(2, c)]]);
        let ph = &p.photon_modes[photon];
        Ok(Self {
            omega_n: signed_sqrt(p.omega_sq[mode]),
            omega_q: ph.omega,
            xi: p.xi[(mode, mode)],
            z: col(&p.z, mode),
            lambda: dot3(&d, &ph.lambda),
            dmu_dn: col(&p.dmu_dn, mode),
            dmu_dq: col(&p.dmu_dq, photon),
            quadratic_term: variant.keeps_quadratic_term(),
        })
    }

    pub fn solve(&self) -> TwoModeResult {
        let quad = if self.quadratic_term {
            self.lambda * self.lambda * self.z * self.dmu_dn
        } else {
            0.0
        };
        let wn2 = self.omega_n * self.omega_n.abs() + self.xi + quad;
        let wq2 = self.omega_q * self.omega_q - self.lambda * self.omega_q * self.dmu_dq;
        let lambda_eff = -self.lambda * self.omega_q * self.dmu_dn;
        let mean = 0.5 * (wn2 + wq2);
        let root = (lambda_eff * lambda_eff + (0.5 * (wn2 - wq2)).powi(2)).sqrt();
        let wn = signed_sqrt(wn2);
        let wq = signed_sqrt(wq2);
        let g = lambda_eff / (2.0 * (wn * wq).abs().sqrt());
        let root_perturbative = (g * g + (0.5 * (wq - wn)).powi(2)).sqrt();
        TwoModeResult {
            omega_n_eff: wn,
            omega_q_eff: wq,
            lambda_eff,
            omega_minus: signed_sqrt(mean - root),
            omega_plus: signed_sqrt(mean + root),
            omega_minus_perturbative: 0.5 * (wn + wq) - root_perturbative,
            omega_plus_perturbative: 0.5 * (wn + wq) + root_perturbative,
        }
    }
}

/// Closed-form solution of a model with exactly one vibration and one photon.
pub fn two_mode(params: &HarmonicModelParams, variant: ModelVariant) -> Result<TwoModeResult> {
    if params.n_modes() != 1 || params.n_photons() != 1 {
        return Err(Error::NotTwoMode(format!(
            "{} vibration modes and {} photon modes",
            params.n_modes(),
            params.n_photons()
        )));
    }
    Ok(TwoModeParams::from_model(params, variant, 0, 0)?.solve())
}

/// Indices (lower, upper) of the two modes with the largest weight in the
/// span of the two given unit states.
pub fn polariton_pair(modes: &[PolaritonMode], vibration: &[f64], photon: &[f64]) -> Result<(usize, usize)> {
    if modes.len() < 2 {
        return Err(Error::InvalidSettings("need at least two modes".into()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut weights: Vec<(usize, f64)> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if m.eigenvector.len() != vibration.len() || m.eigenvector.len() != photon.len() {
                return Err(Error::DimensionMismatch("reference state length".into()));
            }
            Ok((
                i,
                dot(&m.eigenvector, vibration).powi(2) + dot(&m.eigenvector, photon).powi(2),
            ))
        })
        .collect::<Result<_>>()?;
    weights.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (a, b) = (weights[0].0, weights[1].0);
    Ok((a.min(b), a.max(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct SweepSettings {
    /// Uncoupled mode followed through the sweep; chosen automatically as the
    /// polarization-active mode closest to the photon frequency when absent.
    pub target_mode: Option<usize>,
    /// Photon mode whose coupling magnitude is swept; the others scale along.
    pub target_photon: usize,
}

/// Lower and upper polariton frequencies, cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonPair {
    pub minus: f64,
    pub plus: f64,
}

impl PolaritonPair {
    fn from_modes(modes: &[PolaritonMode], pair: (usize, usize)) -> Self {
        Self {
            minus: modes[pair.0].signed_omega_cm1(),
            plus: modes[pair.1].signed_omega_cm1(),
        }
    }

    pub fn splitting(&self) -> f64 {
        self.plus - self.minus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub pipeline: PolaritonPair,
    pub full: PolaritonPair,
    pub mu2: PolaritonPair,
    pub hopfield: PolaritonPair,
    /// Two-mode scalars of the full model, atomic units.
    pub xi: f64,
    pub dmu_dn: f64,
    pub dmu_dq: f64,
    pub lambda_eff: f64,
}

impl SweepRow {
    pub fn variant(&self, variant: ModelVariant) -> PolaritonPair {
        match variant {
            ModelVariant::Full => self.full,
            ModelVariant::Mu2 => self.mu2,
            ModelVariant::Hopfield => self.hopfield,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub target_mode: usize,
    pub target_photon: usize,
    pub target_mode_cm1: f64,
    pub polarization: [f64; 3],
    pub rows: Vec<SweepRow>,
}

/// Uncoupled mode with a non-negligible dipole derivative along `direction`
/// whose frequency is closest to `omega`.
pub fn select_target_mode(reference: &UncoupledReference, direction: [f64; 3], omega: f64) -> Result<usize> {
    let n = norm3(&direction);
    let d = direction.map(|x| x / n);
    let activity: Vec<f64> = (0..reference.n_modes())
        .map(|i| {
            let c = reference.dmu_dn0.column(i);
            dot3(&d, &[c[0], c[1], c[2]]).abs()
        })
        .collect();
    let max = activity.iter().fold(0.0f64, |m, a| m.max(*a));
    (0..reference.n_modes())
        .filter(|&i| max > 0.0 && activity[i] > 1e-6 * max)
        .min_by(|&a, &b| {
            let da = (signed_sqrt(reference.omega_sq[a]) - omega).abs();
            let db = (signed_sqrt(reference.omega_sq[b]) - omega).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .ok_or_else(|| Error::InvalidSettings("no vibration mode is active along the polarization".into()))
}

/// Full pipeline and all model variants at each coupling magnitude `λ` of
/// the target photon mode. Rows follow the order of `lambdas`.
pub fn lambda_sweep<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    lambdas: &[f64],
    pipeline: &PipelineSettings,
    settings: &SweepSettings,
) -> Result<SweepTable> {
    if let Some(bad) = lambdas.iter().position(|l| !l.is_finite()) {
        return Err(Error::NonfiniteInput(format!("coupling strength entry {bad}")));
    }
    if !surface.supports_force_split() {
        return Err(Error::BackendLacksForceSplit);
    }
    let alpha = settings.target_photon;
    let photon = system
        .photon_modes()
        .get(alpha)
        .ok_or_else(|| Error::InvalidSettings(format!("no photon mode {alpha}")))?
        .clone();
    let base = photon.lambda_norm();
    if !(base > 0.0) {
        return Err(Error::InvalidSettings(
            "target photon mode needs a nonzero coupling vector to fix the polarization".into(),
        ));
    }
    let reference = UncoupledReference::compute(system, surface, pipeline)?;
    let target = match settings.target_mode {
        Some(i) if i < reference.n_modes() => i,
        Some(i) => return Err(Error::InvalidSettings(format!("target mode {i} out of range"))),
        None => select_target_mode(&reference, photon.lambda, photon.omega)?,
    };
    let np = system.n_photons();
    let nr = system.n_nuclear_dof();
    let vib_state = reference.mode_state(target, np);
    let photon_state = crate::polariton::unit_state(nr + np, nr + alpha);
    let model_vib = crate::polariton::unit_state(nr + np, target);

    let row = |&lambda: &f64| -> Result<SweepRow> {
        let scaled = system.with_coupling_scaled(lambda / base);
        let result = run_pipeline(&scaled, surface, pipeline)?;
        let params = params_from_force_constants(&scaled, &reference, &result.force_constants)?;
        let pair = polariton_pair(&result.modes, &vib_state, &photon_state)?;
        let mut variants = Vec::new();
        for v in ModelVariant::ALL {
            let modes = model_modes(&params, v)?;
            let pair = polariton_pair(&modes, &model_vib, &photon_state)?;
            variants.push(PolaritonPair::from_modes(&modes, pair));
        }
        let two = TwoModeParams::from_model_along(&params, ModelVariant::Full, target, alpha, photon.lambda)?;
        Ok(SweepRow {
            lambda,
            pipeline: PolaritonPair::from_modes(&result.modes, pair),
            full: variants[0],
            mu2: variants[1],
            hopfield: variants[2],
            xi: two.xi,
            dmu_dn: two.dmu_dn,
            dmu_dq: two.dmu_dq,
            lambda_eff: two.solve().lambda_eff,
        })
    };
    let rows = lambdas.par_iter().map(row).collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        target_mode: target,
        target_photon: alpha,
        target_mode_cm1: hartree_to_wavenumber(signed_sqrt(reference.omega_sq[target])),
        polarization: photon.lambda.map(|x| x / base),
        rows,
    })
}
