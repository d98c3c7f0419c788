//! Equilibrium relaxation and finite-difference force constants.

mod assemble;
mod relax;

pub use assemble::{
    assemble_force_constants, photon_photon_block_check, BlockAsymmetry, FdSettings, ForceConstantSet,
    NoncouplingDerivatives, PhotonCouplingReport,
};
pub use relax::{relax, Equilibrium, RelaxMethod, RelaxationSettings};
