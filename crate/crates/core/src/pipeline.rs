//! Relax, assemble force constants and solve for the normal modes in one go.

use serde::{Deserialize, Serialize};

use crate::backend::CboSurface;
use crate::error::Result;
use crate::hessian::{assemble_force_constants, relax, Equilibrium, FdSettings, ForceConstantSet, RelaxationSettings};
use crate::polariton::{mode_effective_charges, solve_modes, PolaritonMode};
use crate::system::{Configuration, ValidatedSystem};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub relaxation: RelaxationSettings,
    pub finite_difference: FdSettings,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub equilibrium: Equilibrium,
    pub force_constants: ForceConstantSet,
    /// Sorted ascending, effective charges filled in.
    pub modes: Vec<PolaritonMode>,
}

/// Runs the full pipeline starting from the system's own geometry with all
/// photon displacements at zero.
pub fn run_pipeline<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    settings: &PipelineSettings,
) -> Result<PipelineResult> {
    run_pipeline_from(system, surface, &Configuration::initial(system), settings)
}

pub fn run_pipeline_from<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    start: &Configuration,
    settings: &PipelineSettings,
) -> Result<PipelineResult> {
    let equilibrium = relax(system, surface, start, &settings.relaxation)?;
    let force_constants =
        assemble_force_constants(system, surface, &equilibrium.configuration, &settings.finite_difference)?;
    let mut modes = solve_modes(&force_constants, system)?;
    mode_effective_charges(&mut modes, &force_constants)?;
    Ok(PipelineResult {
        equilibrium,
        force_constants,
        modes,
    })
}
