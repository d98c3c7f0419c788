use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::CboSurface;
use crate::error::{Error, Result};
use crate::system::{Configuration, ValidatedSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdSettings {
    /// Bohr.
    pub nuclear_step: f64,
    /// Atomic units of the photon displacement coordinate.
    pub photon_step: f64,
    /// Number of step sizes (h, h/2, ...) in the Richardson tableau; 1 means
    /// plain central differences.
    pub richardson_levels: usize,
    pub symmetrize: bool,
    /// Evaluate Hessian columns on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            nuclear_step: 1e-3,
            photon_step: 1e-3,
            richardson_levels: 2,
            symmetrize: true,
            parallel: true,
        }
    }
}

impl FdSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.nuclear_step > 0.0 && self.photon_step > 0.0) {
            return Err(Error::InvalidSettings(
                "finite-difference steps must be positive".into(),
            ));
        }
        if self.richardson_levels == 0 {
            return Err(Error::InvalidSettings(
                "at least one Richardson level is required".into(),
            ));
        }
        Ok(())
    }
}

/// Largest |A − Aᵀ| seen before symmetrization, per block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockAsymmetry {
    pub rr: f64,
    pub qq: f64,
    /// −∂F_q/∂R against (−∂F_R/∂q)ᵀ.
    pub qr: f64,
    /// Largest of the three, relative to max |C|.
    pub relative: f64,
}

/// Derivatives of the non-coupling nuclear force contribution, in the
/// energy-gradient sign convention (g = −F_nc).
#[derive(Debug, Clone, PartialEq)]
pub struct NoncouplingDerivatives {
    /// ∂g/∂R, 3N × 3N, not symmetrized.
    pub rr: DMatrix<f64>,
    /// ∂g/∂q, 3N × N_pt.
    pub rq: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceConstantSet {
    pub c_rr: DMatrix<f64>,
    pub c_qq: DMatrix<f64>,
    /// N_pt × 3N.
    pub c_qr: DMatrix<f64>,
    /// ∂⟨μ⟩/∂R, 3 × 3N.
    pub dmu_dr: DMatrix<f64>,
    /// ∂⟨μ⟩/∂q, 3 × N_pt.
    pub dmu_dq: DMatrix<f64>,
    pub equilibrium: Configuration,
    pub e0: f64,
    pub dipole0: [f64; 3],
    pub asymmetry: BlockAsymmetry,
    /// Largest difference between the last two Richardson estimates.
    pub richardson_error: f64,
    pub noncoupling: Option<NoncouplingDerivatives>,
}

impl ForceConstantSet {
    pub fn n_nuclear_dof(&self) -> usize {
        self.c_rr.nrows()
    }

    pub fn n_photons(&self) -> usize {
        self.c_qq.nrows()
    }

    /// The generalized force-constant matrix [[C_RR, C_qRᵀ], [C_qR, C_qq]].
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let nr = self.n_nuclear_dof();
        let np = self.n_photons();
        let mut c = DMatrix::zeros(nr + np, nr + np);
        c.view_mut((0, 0), (nr, nr)).copy_from(&self.c_rr);
        c.view_mut((nr, nr), (np, np)).copy_from(&self.c_qq);
        c.view_mut((nr, 0), (np, nr)).copy_from(&self.c_qr);
        c.view_mut((0, nr), (nr, np)).copy_from(&self.c_qr.transpose());
        c
    }
}

/// One finite-difference column: derivatives of every channel with respect to
/// a single generalized coordinate.
struct Column {
    /// −∂F/∂x_j over all generalized coordinates
    force: Vec<f64>,
    dipole: [f64; 3],
    /// −∂F_nc/∂x_j
    noncoupling: Option<Vec<f64>>,
    error: f64,
}

struct Channels {
    forces: Vec<f64>,
    dipole: [f64; 3],
    noncoupling: Option<Vec<f64>>,
}

impl Channels {
    fn flatten(&self) -> Vec<f64> {
        let mut v = self.forces.clone();
        v.extend_from_slice(&self.dipole);
        if let Some(nc) = &self.noncoupling {
            v.extend_from_slice(nc);
        }
        v
    }
}

fn evaluate_channels<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    flat: &[f64],
    split: bool,
) -> Result<Channels> {
    let cfg = Configuration::from_flat(system, flat)?;
    let point = surface.evaluate(system, &cfg)?;
    let noncoupling = if split {
        Some(surface.noncoupling_nuclear_forces(system, &cfg)?)
    } else {
        None
    };
    Ok(Channels {
        forces: point.forces_flat(),
        dipole: point.dipole,
        noncoupling,
    })
}

/// Richardson-extrapolated central difference of all channels along `j`.
fn column<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    x0: &[f64],
    j: usize,
    step: f64,
    levels: usize,
    split: bool,
) -> Result<Column> {
    let mut tableau: Vec<Vec<Vec<f64>>> = Vec::with_capacity(levels);
    for level in 0..levels {
        let h = step / f64::from(1u32 << level);
        let mut plus = x0.to_vec();
        let mut minus = x0.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let fp = evaluate_channels(system, surface, &plus, split)?.flatten();
        let fm = evaluate_channels(system, surface, &minus, split)?.flatten();
        let mut row = vec![fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()];
        for k in 1..=level {
            let factor = 4f64.powi(k as i32);
            let prev_same = &row[k - 1];
            let prev_coarse = &tableau[level - 1][k - 1];
            row.push(
                prev_same
                    .iter()
                    .zip(prev_coarse)
                    .map(|(fine, coarse)| fine + (fine - coarse) / (factor - 1.0))
                    .collect(),
            );
        }
        tableau.push(row);
    }
    let last = tableau.last().expect("at least one level");
    let best = last.last().expect("non-empty row");
    let error = if levels > 1 {
        best.iter()
            .zip(&last[last.len() - 2])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    } else {
        0.0
    };

    let n = system.n_dof();
    let force = best[..n].iter().map(|d| -d).collect();
    let dipole = [best[n], best[n + 1], best[n + 2]];
    let noncoupling = split.then(|| best[n + 3..].iter().map(|d| -d).collect());
    if best.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue(format!("finite-difference column {j}")));
    }
    Ok(Column {
        force,
        dipole,
        noncoupling,
        error,
    })
}

fn max_asym(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Central-difference force constants around `equilibrium`. Blocks follow
/// C = −∂F/∂x; the dipole derivatives come from the same displaced
/// evaluations. When the surface can split off the coupling force, the
/// derivatives of the remaining contribution are assembled as well.
pub fn assemble_force_constants<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    equilibrium: &Configuration,
    settings: &FdSettings,
) -> Result<ForceConstantSet> {
    settings.validate()?;
    equilibrium.check(system)?;
    let nr = system.n_nuclear_dof();
    let np = system.n_photons();
    let n = nr + np;
    let split = surface.supports_force_split();
    let x0 = equilibrium.to_flat();
    let center = surface.evaluate(system, equilibrium)?;

    let compute = |j: usize| {
        let step = if j < nr {
            settings.nuclear_step
        } else {
            settings.photon_step
        };
        column(system, surface, &x0, j, step, settings.richardson_levels, split)
    };
    let columns: Vec<Column> = if settings.parallel {
        (0..n).into_par_iter().map(compute).collect::<Result<_>>()?
    } else {
        (0..n).map(compute).collect::<Result<_>>()?
    };

    let mut c = DMatrix::zeros(n, n);
    let mut dmu = DMatrix::zeros(3, n);
    let mut nc = split.then(|| DMatrix::zeros(nr, n));
    let mut richardson_error = 0.0f64;
    for (j, col) in columns.iter().enumerate() {
        for i in 0..n {
            c[(i, j)] = col.force[i];
        }
        for k in 0..3 {
            dmu[(k, j)] = col.dipole[k];
        }
        if let (Some(m), Some(v)) = (nc.as_mut(), &col.noncoupling) {
            for i in 0..nr {
                m[(i, j)] = v[i];
            }
        }
        richardson_error = richardson_error.max(col.error);
    }

    let rr = c.view((0, 0), (nr, nr)).into_owned();
    let qq = c.view((nr, nr), (np, np)).into_owned();
    let qr = c.view((nr, 0), (np, nr)).into_owned();
    let rq = c.view((0, nr), (nr, np)).into_owned();
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let mut asymmetry = BlockAsymmetry {
        rr: max_asym(&rr, &rr.transpose()),
        qq: max_asym(&qq, &qq.transpose()),
        qr: max_asym(&qr, &rq.transpose()),
        relative: 0.0,
    };
    asymmetry.relative = asymmetry.rr.max(asymmetry.qq).max(asymmetry.qr) / scale;

    if settings.symmetrize {
        c = (&c + c.transpose()) * 0.5;
    }

    Ok(ForceConstantSet {
        c_rr: c.view((0, 0), (nr, nr)).into_owned(),
        c_qq: c.view((nr, nr), (np, np)).into_owned(),
        c_qr: c.view((nr, 0), (np, nr)).into_owned(),
        dmu_dr: dmu.view((0, 0), (3, nr)).into_owned(),
        dmu_dq: dmu.view((0, nr), (3, np)).into_owned(),
        equilibrium: equilibrium.clone(),
        e0: center.energy,
        dipole0: center.dipole,
        asymmetry,
        richardson_error,
        noncoupling: nc.map(|m| NoncouplingDerivatives {
            rr: m.view((0, 0), (nr, nr)).into_owned(),
            rq: m.view((0, nr), (nr, np)).into_owned(),
        }),
    })
}

/// Plain central-difference Hessian −∂F/∂x, used to seed the relaxation.
pub(crate) fn quick_hessian<S: CboSurface + ?Sized>(
    system: &ValidatedSystem,
    surface: &S,
    x0: &[f64],
    settings: &FdSettings,
) -> Result<DMatrix<f64>> {
    let nr = system.n_nuclear_dof();
    let n = system.n_dof();
    let cols: Vec<Column> = (0..n)
        .into_par_iter()
        .map(|j| {
            let step = if j < nr {
                settings.nuclear_step
            } else {
                settings.photon_step
            };
            column(system, surface, x0, j, step, 1, false)
        })
        .collect::<Result<_>>()?;
    let mut h = DMatrix::from_fn(n, n, |i, j| cols[j].force[i]);
    h = (&h + h.transpose()) * 0.5;
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonCouplingReport {
    pub max_offdiagonal: f64,
    pub coupling_present: bool,
}

/// Effective photon-photon coupling shows up as off-diagonal C_qq entries.
/// Entries above 1e-12 relative to the largest diagonal count as present.
pub fn photon_photon_block_check(fcs: &ForceConstantSet) -> PhotonCouplingReport {
    let np = fcs.n_photons();
    let mut max_off = 0.0f64;
    let mut max_diag = 0.0f64;
    for i in 0..np {
        max_diag = max_diag.max(fcs.c_qq[(i, i)].abs());
        for j in 0..np {
            if i != j {
                max_off = max_off.max(fcs.c_qq[(i, j)].abs());
            }
        }
    }
    PhotonCouplingReport {
        max_offdiagonal: max_off,
        coupling_present: max_off > 1e-12 * max_diag.max(f64::MIN_POSITIVE),
    }
}
