//! JSON run configuration (format 1).

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::backend::{
    AnalyticSurface, CboSurface, CubicTerm, GridSurface, GridSurfaceSpec, PolarizableMoleculeSpec, SurfacePoint,
    DEFAULT_INTERPOLATION_ORDER, DEFAULT_TRUST_RADIUS,
};
use crate::collective::CollectiveSettings;
use crate::error::{Error, Result};
use crate::hessian::{FdSettings, RelaxationSettings};
use crate::models::SweepSettings;
use crate::pipeline::PipelineSettings;
use crate::polariton::SpectrumGrid;
use crate::system::{Atom, Configuration, CoupledSystem, PhotonMode, ValidatedSystem};

pub const CONFIG_FORMAT: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub label: String,
    /// amu
    pub mass: f64,
    /// Charge, units of e.
    #[serde(rename = "Z")]
    pub z: f64,
    /// Bohr
    pub xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonModeConfig {
    pub omega_cm1: f64,
    /// Atomic units.
    pub lambda_xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub atoms: Vec<AtomConfig>,
    #[serde(default)]
    pub photon_modes: Vec<PhotonModeConfig>,
    /// Half-open atom index ranges `[start, end)`, one per molecule.
    #[serde(default)]
    pub molecule_partition: Vec<[usize; 2]>,
}

impl SystemConfig {
    pub fn build(&self) -> Result<ValidatedSystem> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.label.clone(), a.mass, a.z, a.xyz))
            .collect();
        let photons = self
            .photon_modes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if !p.omega_cm1.is_finite() {
                    return Err(Error::NonfiniteInput(format!("photon mode {i} omega_cm1")));
                }
                Ok(PhotonMode::from_wavenumber(p.omega_cm1, p.lambda_xyz))
            })
            .collect::<Result<_>>()?;
        let mut raw = CoupledSystem::new(atoms, photons);
        raw.molecule_partition = self.molecule_partition.iter().map(|r| r[0]..r[1]).collect();
        raw.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizableConfig {
    /// Bare-potential minimum, flat `3 * atom + axis`; defaults to the atom positions.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    /// K, 3N rows of 3N entries, Hartree/Bohr².
    pub force_constants: Vec<Vec<f64>>,
    #[serde(default)]
    pub cubic: Vec<CubicTerm>,
    /// α_e, 3 × 3.
    #[serde(default)]
    pub polarizability: [[f64; 3]; 3],
    /// T, 3 rows of 3N entries; zero when absent.
    #[serde(default)]
    pub charge_transfer: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_trust_radius")]
    pub trust_radius: f64,
}

fn default_trust_radius() -> f64 {
    DEFAULT_TRUST_RADIUS
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name} must be {nrows} rows of {ncols} entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl PolarizableConfig {
    pub fn to_spec(&self, system: &ValidatedSystem) -> Result<PolarizableMoleculeSpec> {
        let n = system.n_nuclear_dof();
        let reference = self.reference.clone().unwrap_or_else(|| system.positions_flat());
        Ok(PolarizableMoleculeSpec {
            reference,
            force_constants: rows_to_matrix("force_constants", &self.force_constants, n, n)?,
            cubic: self.cubic.clone(),
            polarizability: Matrix3::from_fn(|i, j| self.polarizability[i][j]),
            charge_transfer: match &self.charge_transfer {
                Some(rows) => rows_to_matrix("charge_transfer", rows, 3, n)?,
                None => DMatrix::zeros(3, n),
            },
            trust_radius: self.trust_radius,
        })
    }

    pub fn from_spec(spec: &PolarizableMoleculeSpec) -> Self {
        let a = spec.polarizability;
        Self {
            reference: Some(spec.reference.clone()),
            force_constants: matrix_to_rows(&spec.force_constants),
            cubic: spec.cubic.clone(),
            polarizability: [0, 1, 2].map(|i| [a[(i, 0)], a[(i, 1)], a[(i, 2)]]),
            charge_transfer: Some(matrix_to_rows(&spec.charge_transfer)),
            trust_radius: spec.trust_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Geometry the displacement columns are measured from; defaults to the atom positions.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    #[serde(default = "default_order")]
    pub order: usize,
    /// CSV table path, relative to the config file.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Inline grid: node coordinates per generalized coordinate.
    #[serde(default)]
    pub axes: Option<Vec<Vec<f64>>>,
    /// Inline grid values, row-major with the last axis fastest.
    #[serde(default)]
    pub energies: Option<Vec<f64>>,
    #[serde(default)]
    pub dipoles: Option<Vec<[f64; 3]>>,
}

fn default_order() -> usize {
    DEFAULT_INTERPOLATION_ORDER
}

impl GridConfig {
    pub fn to_spec(&self, system: &ValidatedSystem, base_dir: &Path) -> Result<GridSurfaceSpec> {
        let reference = self.reference.clone().unwrap_or_else(|| system.positions_flat());
        match (&self.csv, &self.axes, &self.energies, &self.dipoles) {
            (Some(path), None, None, None) => {
                let full = base_dir.join(path);
                if !full.exists() {
                    return Err(Error::Config(format!("grid table {} does not exist", full.display())));
                }
                GridSurfaceSpec::from_csv_path(full, reference, self.order)
            }
            (None, Some(axes), Some(energies), Some(dipoles)) => {
                let spec = GridSurfaceSpec {
                    reference,
                    axes: axes.clone(),
                    energies: energies.clone(),
                    dipoles: dipoles.clone(),
                    order: self.order,
                };
                spec.validate()?;
                Ok(spec)
            }
            _ => Err(Error::Config(
                "grid backend needs either `csv` or all of `axes`, `energies`, `dipoles`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendConfig {
    Polarizable(PolarizableConfig),
    Grid(GridConfig),
}

/// A constructed energy surface of either kind.
#[derive(Debug, Clone)]
pub enum SurfaceBackend {
    Polarizable(AnalyticSurface),
    Grid(GridSurface),
}

impl CboSurface for SurfaceBackend {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint> {
        match self {
            SurfaceBackend::Polarizable(s) => s.evaluate(system, config),
            SurfaceBackend::Grid(s) => s.evaluate(system, config),
        }
    }

    fn noncoupling_nuclear_forces(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        match self {
            SurfaceBackend::Polarizable(s) => s.noncoupling_nuclear_forces(system, config),
            SurfaceBackend::Grid(s) => s.noncoupling_nuclear_forces(system, config),
        }
    }

    fn supports_force_split(&self) -> bool {
        match self {
            SurfaceBackend::Polarizable(s) => s.supports_force_split(),
            SurfaceBackend::Grid(s) => s.supports_force_split(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub relaxation: RelaxationSettings,
    pub finite_difference: FdSettings,
    pub broadening_cm1: f64,
    pub spectrum: SpectrumGrid,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            relaxation: RelaxationSettings::default(),
            finite_difference: FdSettings::default(),
            broadening_cm1: 10.0,
            spectrum: SpectrumGrid::default(),
        }
    }
}

impl NumericsConfig {
    pub fn pipeline(&self) -> PipelineSettings {
        PipelineSettings {
            relaxation: self.relaxation.clone(),
            finite_difference: self.finite_difference.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Coupling magnitudes of the target photon mode. Kept as raw JSON so a
    /// malformed entry can be reported by position.
    pub lambdas: Vec<serde_json::Value>,
    #[serde(default)]
    pub target_mode: Option<usize>,
    #[serde(default)]
    pub target_photon: usize,
}

impl SweepConfig {
    pub fn lambda_values(&self) -> Result<Vec<f64>> {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(i, v)| match v.as_f64() {
                Some(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Config(format!(
                    "sweep.lambdas[{i}] = {v} is not a finite number"
                ))),
            })
            .collect()
    }

    pub fn settings(&self) -> SweepSettings {
        SweepSettings {
            target_mode: self.target_mode,
            target_photon: self.target_photon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub format: u64,
    pub system: SystemConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub collective: Option<CollectiveSettings>,
}

impl Config {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value
            .get("format")
            .ok_or_else(|| Error::Config("missing `format` field".into()))?;
        match format.as_u64() {
            Some(CONFIG_FORMAT) => {}
            Some(other) => return Err(Error::UnsupportedFormat(other)),
            None => return Err(Error::Config(format!("`format` must be an integer, got {format}"))),
        }
        let config: Config = serde_json::from_value(value)?;
        config.numerics.finite_difference.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::from_json_str(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, text, base_dir })
    }

    pub fn build_system(&self) -> Result<ValidatedSystem> {
        self.system.build()
    }

    pub fn build_backend(&self, system: &ValidatedSystem, base_dir: &Path) -> Result<SurfaceBackend> {
        Ok(match &self.backend {
            BackendConfig::Polarizable(c) => SurfaceBackend::Polarizable(AnalyticSurface::new(c.to_spec(system)?)?),
            BackendConfig::Grid(c) => SurfaceBackend::Grid(GridSurface::new(c.to_spec(system, base_dir)?)?),
        })
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A parsed config together with its source text and directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub text: String,
    pub base_dir: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "format": 1,
            "system": {
                "atoms": [{"label": "X", "mass": 1.0, "Z": 0.5, "xyz": [0.0, 0.0, 0.0]}],
                "photon_modes": [{"omega_cm1": 2000.0, "lambda_xyz": [0.0, 0.0, 0.05]}]
            },
            "backend": {
                "type": "polarizable",
                "force_constants": [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.2]],
                "polarizability": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            }
        })
    }

    #[test]
    fn minimal_config_builds() {
        let c = Config::from_json_str(&minimal().to_string()).unwrap();
        let sys = c.build_system().unwrap();
        let backend = c.build_backend(&sys, Path::new(".")).unwrap();
        assert!(backend.supports_force_split());
        assert_eq!(c.numerics.broadening_cm1, 10.0);
    }

    #[test]
    fn wrong_format_is_rejected() {
        let mut v = minimal();
        v["format"] = serde_json::json!(2);
        assert!(matches!(
            Config::from_json_str(&v.to_string()),
            Err(Error::UnsupportedFormat(2))
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = minimal();
        v["numerics"] = serde_json::json!({"relaxaton": {}});
        assert!(Config::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn bad_matrix_shape_is_reported() {
        let mut v = minimal();
        v["backend"]["force_constants"] = serde_json::json!([[0.1]]);
        let c = Config::from_json_str(&v.to_string()).unwrap();
        let sys = c.build_system().unwrap();
        let err = c.build_backend(&sys, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("force_constants"));
    }

    #[test]
    fn malformed_lambda_entry_is_named() {
        let sweep = SweepConfig {
            lambdas: vec![serde_json::json!(0.0), serde_json::json!("x")],
            target_mode: None,
            target_photon: 0,
        };
        let err = sweep.lambda_values().unwrap_err();
        assert!(err.to_string().contains("lambdas[1]"));
    }
}
