//! Closed-form second derivatives of the polarizable-molecule surface,
//! obtained by eliminating the induced dipole with the Woodbury identity.
//! With L the matrix whose rows are the λ_αᵀ, Ω = diag(ω), J = Z + T and
//! W = (1 + L α Lᵀ)⁻¹ the cavity energy reduces to ½ uᵀ W u with
//! u = Ω q − L J ΔR + const.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3};
use vibropol::backend::AnalyticSurface;
use vibropol::system::ValidatedSystem;

pub struct ClosedForm {
    pub c_rr: DMatrix<f64>,
    pub c_qq: DMatrix<f64>,
    pub c_qr: DMatrix<f64>,
    pub dmu_dr: DMatrix<f64>,
    pub dmu_dq: DMatrix<f64>,
    /// ∂(−F_nc)/∂R
    pub b_rr: DMatrix<f64>,
    /// ∂(−F_nc)/∂q
    pub b_rq: DMatrix<f64>,
}

impl ClosedForm {
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let nr = self.c_rr.nrows();
        let np = self.c_qq.nrows();
        let mut c = DMatrix::zeros(nr + np, nr + np);
        c.view_mut((0, 0), (nr, nr)).copy_from(&self.c_rr);
        c.view_mut((nr, nr), (np, np)).copy_from(&self.c_qq);
        c.view_mut((nr, 0), (np, nr)).copy_from(&self.c_qr);
        c.view_mut((0, nr), (nr, np)).copy_from(&self.c_qr.transpose());
        c
    }
}

pub fn closed_form(system: &ValidatedSystem, surface: &AnalyticSurface) -> ClosedForm {
    let spec = surface.spec();
    let nr = system.n_nuclear_dof();
    let np = system.n_photons();
    let l = DMatrix::from_fn(np, 3, |a, k| system.photon_modes()[a].lambda[k]);
    let omega = DMatrix::from_fn(np, np, |a, b| if a == b { system.photon_modes()[a].omega } else { 0.0 });
    let alpha: DMatrix<f64> = DMatrix::from_fn(3, 3, |i, j| spec.polarizability[(i, j)]);
    let charges = system.dof_charges();
    let zmat = DMatrix::from_fn(3, nr, |k, j| if j % 3 == k { charges[j] } else { 0.0 });
    let j = &zmat + &spec.charge_transfer;

    let w = (DMatrix::identity(np, np) + &l * &alpha * l.transpose())
        .try_inverse()
        .expect("W invertible");
    let lambda_mat = l.transpose() * &l;
    let resp = (DMatrix::identity(3, 3) + &alpha * &lambda_mat)
        .try_inverse()
        .expect("response invertible");

    let dmu_dr = &resp * &j;
    let dmu_dq = &resp * &alpha * l.transpose() * &omega;
    ClosedForm {
        c_rr: &spec.force_constants + j.transpose() * l.transpose() * &w * &l * &j,
        c_qq: &omega * &w * &omega,
        c_qr: -(&omega * &w * &l * &j),
        b_rr: &spec.force_constants + spec.charge_transfer.transpose() * &lambda_mat * &dmu_dr,
        b_rq: -(spec.charge_transfer.transpose() * (l.transpose() * &omega - &lambda_mat * &dmu_dq)),
        dmu_dr,
        dmu_dq,
    }
}

/// Relative difference scaled by the larger max-magnitude entry.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax());
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).amax() / scale
}

pub fn matrix3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// Eigenvalues of D = M^(-1/2) C M^(-1/2), ascending.
pub fn generalized_eigenvalues(c: &DMatrix<f64>, masses: &[f64]) -> Vec<f64> {
    let d = DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] / (masses[i] * masses[j]).sqrt());
    let mut e: Vec<f64> = d.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}
