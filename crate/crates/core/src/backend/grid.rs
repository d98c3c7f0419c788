//! Tabulated surface on a rectangular displacement grid.
//!
//! Axes follow the generalized-coordinate order: one axis per nuclear
//! Cartesian displacement from `reference`, then one per photon coordinate.
//! An axis with a single node is inert: the surface is taken as constant
//! along it. Values between nodes come from separable local Lagrange
//! interpolation, and forces are exact derivatives of that interpolant.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{CboSurface, SurfacePoint};
use crate::error::{Error, Result};
use crate::system::{Configuration, ValidatedSystem};

pub const DEFAULT_INTERPOLATION_ORDER: usize = 3;

const NODE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub displacement: Vec<f64>,
    pub energy: f64,
    pub dipole: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSurfaceSpec {
    /// Reference nuclear geometry the nuclear displacements are measured from.
    pub reference: Vec<f64>,
    /// Strictly increasing node coordinates per axis.
    pub axes: Vec<Vec<f64>>,
    /// Row-major over the axes, last axis fastest.
    pub energies: Vec<f64>,
    pub dipoles: Vec<[f64; 3]>,
    pub order: usize,
}

impl GridSurfaceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidSpec("grid has no axes".into()));
        }
        if self.order == 0 {
            return Err(Error::InvalidSpec("interpolation order must be at least 1".into()));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidSpec(format!("axis {k} has no nodes")));
            }
            if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidSpec(format!("axis {k} is not strictly increasing")));
            }
        }
        let total: usize = self.axes.iter().map(Vec::len).product();
        if self.energies.len() != total || self.dipoles.len() != total {
            return Err(Error::InvalidSpec(format!(
                "grid needs {total} samples, got {} energies and {} dipoles",
                self.energies.len(),
                self.dipoles.len()
            )));
        }
        if self.energies.iter().any(|e| !e.is_finite()) || self.dipoles.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::InvalidSpec("non-finite sample".into()));
        }
        if self.reference.len() > self.axes.len() || !self.reference.len().is_multiple_of(3) {
            return Err(Error::InvalidSpec(format!(
                "reference geometry has {} coordinates for a {}-axis grid",
                self.reference.len(),
                self.axes.len()
            )));
        }
        Ok(())
    }

    /// Build a grid from unordered samples; the samples must cover the full
    /// tensor product of their per-axis node values exactly once.
    pub fn from_samples(reference: Vec<f64>, samples: &[GridSample], order: usize) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.displacement.len())
            .ok_or_else(|| Error::InvalidSpec("no grid samples".into()))?;
        if samples.iter().any(|s| s.displacement.len() != dim) {
            return Err(Error::InvalidSpec("samples have differing dimensions".into()));
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for (k, axis) in axes.iter_mut().enumerate() {
            let mut values: Vec<f64> = samples.iter().map(|s| s.displacement[k]).collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("non-finite coordinate on axis {k}")));
            }
            values.sort_by(f64::total_cmp);
            for v in values {
                match axis.last() {
                    Some(&last) if (v - last).abs() <= NODE_TOL * last.abs().max(1.0) => {}
                    _ => axis.push(v),
                }
            }
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if total != samples.len() {
            return Err(Error::InvalidSpec(format!(
                "{} samples do not form a rectangular grid of {total} nodes",
                samples.len()
            )));
        }
        let strides = strides(&axes);
        let mut energies = vec![f64::NAN; total];
        let mut dipoles = vec![[f64::NAN; 3]; total];
        let mut filled = vec![false; total];
        for s in samples {
            let mut idx = 0;
            for (k, x) in s.displacement.iter().enumerate() {
                let node = axes[k]
                    .iter()
                    .position(|a| (a - x).abs() <= NODE_TOL * a.abs().max(1.0))
                    .expect("node collected above");
                idx += node * strides[k];
            }
            if filled[idx] {
                return Err(Error::InvalidSpec(format!("duplicate sample at {:?}", s.displacement)));
            }
            filled[idx] = true;
            energies[idx] = s.energy;
            dipoles[idx] = s.dipole;
        }
        let spec = Self {
            reference,
            axes,
            energies,
            dipoles,
            order,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parse a CSV table with a header row: displacement columns first, then
    /// `energy, mu_x, mu_y, mu_z`. Lines starting with `#` are skipped.
    pub fn from_csv_reader<R: Read>(reader: R, reference: Vec<f64>, order: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ncol = headers.len();
        if ncol < 5 {
            return Err(Error::InvalidSpec(format!(
                "grid CSV needs at least one displacement column plus energy, mu_x, mu_y, mu_z; got {ncol} columns"
            )));
        }
        let tail: Vec<&str> = headers.iter().skip(ncol - 4).collect();
        if tail != ["energy", "mu_x", "mu_y", "mu_z"] {
            return Err(Error::InvalidSpec(format!(
                "last grid CSV columns must be energy, mu_x, mu_y, mu_z; got {tail:?}"
            )));
        }
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let values: Vec<f64> = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::InvalidSpec(format!("grid CSV row {}: cannot parse `{f}`", row + 1)))
                })
                .collect::<Result<_>>()?;
            let nd = ncol - 4;
            samples.push(GridSample {
                displacement: values[..nd].to_vec(),
                energy: values[nd],
                dipole: [values[nd + 1], values[nd + 2], values[nd + 3]],
            });
        }
        Self::from_samples(reference, &samples, order)
    }

    pub fn from_csv_path(path: impl AsRef<std::path::Path>, reference: Vec<f64>, order: usize) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, reference, order)
    }
}

fn strides(axes: &[Vec<f64>]) -> Vec<usize> {
    let mut strides = vec![1; axes.len()];
    for k in (0..axes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * axes[k + 1].len();
    }
    strides
}

/// Local Lagrange stencil along one axis.
struct Stencil {
    start: usize,
    weights: Vec<f64>,
    derivs: Vec<f64>,
}

fn stencil(nodes: &[f64], order: usize, x: f64, axis: usize) -> Result<Stencil> {
    let n = nodes.len();
    if n == 1 {
        return Ok(Stencil {
            start: 0,
            weights: vec![1.0],
            derivs: vec![0.0],
        });
    }
    let (lo, hi) = (nodes[0], nodes[n - 1]);
    let slack = NODE_TOL * (hi - lo);
    if x < lo - slack || x > hi + slack {
        return Err(Error::OutOfHull { axis, value: x, lo, hi });
    }
    let width = (order + 1).min(n);
    // interval [nodes[i], nodes[i+1]] containing x
    let i = nodes.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    let start = (i + 1).saturating_sub(width / 2).min(n - width);
    let pts = &nodes[start..start + width];

    let mut weights = vec![0.0; width];
    let mut derivs = vec![0.0; width];
    for j in 0..width {
        let mut w = 1.0;
        for m in 0..width {
            if m != j {
                w *= (x - pts[m]) / (pts[j] - pts[m]);
            }
        }
        weights[j] = w;
        let mut d = 0.0;
        for l in 0..width {
            if l == j {
                continue;
            }
            let mut term = 1.0 / (pts[j] - pts[l]);
            for m in 0..width {
                if m != j && m != l {
                    term *= (x - pts[m]) / (pts[j] - pts[m]);
                }
            }
            d += term;
        }
        derivs[j] = d;
    }
    Ok(Stencil { start, weights, derivs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    spec: GridSurfaceSpec,
    strides: Vec<usize>,
}

impl GridSurface {
    pub fn new(spec: GridSurfaceSpec) -> Result<Self> {
        spec.validate()?;
        let strides = strides(&spec.axes);
        Ok(Self { spec, strides })
    }

    pub fn spec(&self) -> &GridSurfaceSpec {
        &self.spec
    }

    fn coordinates(&self, system: &ValidatedSystem, config: &Configuration) -> Result<Vec<f64>> {
        config.check(system)?;
        if self.spec.axes.len() != system.n_dof() || self.spec.reference.len() != system.n_nuclear_dof() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} axes and {} reference coordinates, system has {} generalized coordinates",
                self.spec.axes.len(),
                self.spec.reference.len(),
                system.n_dof()
            )));
        }
        let mut x: Vec<f64> = config
            .nuclear
            .iter()
            .zip(&self.spec.reference)
            .map(|(r, r0)| r - r0)
            .collect();
        x.extend_from_slice(&config.photon);
        Ok(x)
    }

    /// Interpolated value and gradient for each of the four tabulated
    /// channels (energy, μx, μy, μz).
    fn interpolate(&self, x: &[f64]) -> Result<([f64; 4], Vec<[f64; 4]>)> {
        let dim = x.len();
        let stencils: Vec<Stencil> = x
            .iter()
            .enumerate()
            .map(|(k, &xk)| stencil(&self.spec.axes[k], self.spec.order, xk, k))
            .collect::<Result<_>>()?;

        let mut value = [0.0; 4];
        let mut grad = vec![[0.0; 4]; dim];
        let mut local = vec![0usize; dim];
        loop {
            let mut idx = 0;
            let mut w = 1.0;
            for k in 0..dim {
                idx += (stencils[k].start + local[k]) * self.strides[k];
                w *= stencils[k].weights[local[k]];
            }
            let d = &self.spec.dipoles[idx];
            let sample = [self.spec.energies[idx], d[0], d[1], d[2]];
            for c in 0..4 {
                value[c] += w * sample[c];
            }
            for (k, g) in grad.iter_mut().enumerate() {
                let mut wk = stencils[k].derivs[local[k]];
                if wk == 0.0 {
                    continue;
                }
                for (m, s) in stencils.iter().enumerate() {
                    if m != k {
                        wk *= s.weights[local[m]];
                    }
                }
                for c in 0..4 {
                    g[c] += wk * sample[c];
                }
            }

            // odometer increment over the stencil window
            let mut k = dim;
            loop {
                if k == 0 {
                    return Ok((value, grad));
                }
                k -= 1;
                local[k] += 1;
                if local[k] < stencils[k].weights.len() {
                    break;
                }
                local[k] = 0;
            }
        }
    }

    pub fn grid_energy(&self, system: &ValidatedSystem, config: &Configuration) -> Result<f64> {
        let x = self.coordinates(system, config)?;
        Ok(self.interpolate(&x)?.0[0])
    }

    pub fn grid_dipole(&self, system: &ValidatedSystem, config: &Configuration) -> Result<[f64; 3]> {
        let x = self.coordinates(system, config)?;
        let v = self.interpolate(&x)?.0;
        Ok([v[1], v[2], v[3]])
    }
}

impl CboSurface for GridSurface {
    fn evaluate(&self, system: &ValidatedSystem, config: &Configuration) -> Result<SurfacePoint> {
        let x = self.coordinates(system, config)?;
        let (value, grad) = self.interpolate(&x)?;
        let nn = system.n_nuclear_dof();
        let forces: Vec<f64> = grad.iter().map(|g| -g[0]).collect();
        let point = SurfacePoint {
            energy: value[0],
            nuclear_forces: forces[..nn].to_vec(),
            photon_forces: forces[nn..].to_vec(),
            dipole: [value[1], value[2], value[3]],
        };
        point.check_finite()?;
        Ok(point)
    }
}
