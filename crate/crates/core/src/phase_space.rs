//! Spatial and velocity grids, the discrete distribution function, Maxwellians and velocity
//! moments.
//!
//! Velocity integrals are evaluated with the midpoint rule on a uniform tensor grid, so every
//! node carries the same weight `Δv^Dv`. A distribution field is stored space-major: the
//! velocity profile of one spatial cell is contiguous in memory.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Outflow,
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub cells: usize,
    pub lower: f64,
    pub upper: f64,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(cells: usize, lower: f64, upper: f64, boundary: Boundary) -> Self {
        Self {
            cells,
            lower,
            upper,
            boundary,
        }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lower + (i as f64 + 0.5) * self.spacing()
    }
}

/// Uniform cell-centred mesh in one or two space dimensions.
///
/// Cells are numbered x-major: in 2D the flat index of cell `(ix, iy)` is `ix * ny + iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if a.cells == 0 || !(a.upper > a.lower) || !a.lower.is_finite() || !a.upper.is_finite()
            {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: need cells > 0 and finite lower < upper, got {} cells on [{}, {}]",
                    a.cells, a.lower, a.upper
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn uniform_1d(cells: usize, lower: f64, upper: f64, boundary: Boundary) -> Result<Self> {
        Self::new(vec![Axis::new(cells, lower, upper, boundary)])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn num_cells(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(Axis::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance in cells between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.cells).product()
    }

    /// Per-axis integer coordinates of a flat cell index.
    pub fn coords(&self, cell: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [cell, 0],
            _ => {
                let ny = self.axes[1].cells;
                [cell / ny, cell % ny]
            }
        }
    }

    /// Cell-centre position; the second component is 0 in 1D.
    pub fn center(&self, cell: usize) -> [f64; 2] {
        let c = self.coords(cell);
        let mut x = [0.0; 2];
        for (k, a) in self.axes.iter().enumerate() {
            x[k] = a.center(c[k]);
        }
        x
    }

    /// Volume of one cell, `Π Δx`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }
}

/// Uniform tensor grid of velocity nodes on the symmetric box `[-v_max, v_max]^Dv`.
///
/// Nodes sit at the midpoints of `J` equal sub-intervals per axis. In 2D the flat node index of
/// `(jx, jy)` is `jx * J + jy`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    dim: usize,
    nodes_per_axis: usize,
    v_max: f64,
    axis_nodes: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    weight: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, nodes_per_axis: usize, v_max: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if nodes_per_axis == 0 || !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "velocity grid needs J > 0 and finite v_max > 0, got J={nodes_per_axis}, v_max={v_max}"
            )));
        }
        let dv = 2.0 * v_max / nodes_per_axis as f64;
        // Built from both ends so that the node set is exactly symmetric about zero.
        let axis_nodes: Vec<f64> = (0..nodes_per_axis)
            .map(|k| {
                let mirror = nodes_per_axis - 1 - k;
                let from_low = -v_max + (k as f64 + 0.5) * dv;
                let from_high = v_max - (mirror as f64 + 0.5) * dv;
                if k < mirror {
                    from_low
                } else if k > mirror {
                    from_high
                } else {
                    0.0
                }
            })
            .collect();
        let nodes = match dim {
            1 => axis_nodes.iter().map(|&v| [v, 0.0]).collect(),
            _ => axis_nodes
                .iter()
                .flat_map(|&vx| axis_nodes.iter().map(move |&vy| [vx, vy]))
                .collect(),
        };
        Ok(Self {
            dim,
            nodes_per_axis,
            v_max,
            axis_nodes,
            nodes,
            weight: dv.powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn bounds(&self) -> (f64, f64) {
        (-self.v_max, self.v_max)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.v_max / self.nodes_per_axis as f64
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Midpoint-rule approximation of `∫ g dv`.
    pub fn integrate(&self, profile: &[f64]) -> f64 {
        self.weight * profile.iter().sum::<f64>()
    }
}

/// The grids a distribution field lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpace {
    pub space: SpatialGrid,
    pub velocity: VelocityGrid,
}

impl PhaseSpace {
    pub fn new(space: SpatialGrid, velocity: VelocityGrid) -> Arc<Self> {
        Arc::new(Self { space, velocity })
    }

    /// Number of unknowns `Π I · Π J`.
    pub fn len(&self) -> usize {
        self.space.num_cells() * self.velocity.num_nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Discrete phase-space density `f[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    phase: Arc<PhaseSpace>,
    values: Vec<f64>,
}

impl DistributionField {
    pub fn new(phase: Arc<PhaseSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != phase.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grids need {} x {} = {}",
                values.len(),
                phase.space.num_cells(),
                phase.velocity.num_nodes(),
                phase.len()
            )));
        }
        Ok(Self { phase, values })
    }

    pub fn zeros(phase: Arc<PhaseSpace>) -> Self {
        let values = vec![0.0; phase.len()];
        Self { phase, values }
    }

    pub fn phase(&self) -> &Arc<PhaseSpace> {
        &self.phase
    }

    pub fn space(&self) -> &SpatialGrid {
        &self.phase.space
    }

    pub fn velocity(&self) -> &VelocityGrid {
        &self.phase.velocity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let nv = self.phase.velocity.num_nodes();
        &self.values[cell * nv..(cell + 1) * nv]
    }

    /// `Σ_{i,j} w_j f_{i,j} Π Δx`.
    pub fn total_mass(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        sum * self.phase.velocity.weight() * self.phase.space.cell_volume()
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        first_non_finite(&self.values)
    }
}

pub(crate) fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// Velocity moments of one spatial cell. Unused vector components are zero in 1D.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub rho: f64,
    pub u: [f64; 2],
    pub temperature: f64,
    pub energy: f64,
    pub heat_flux: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub dim_v: usize,
    pub cells: Vec<Moments>,
}

impl MomentField {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn density(&self) -> Vec<f64> {
        self.cells.iter().map(|m| m.rho).collect()
    }

    pub fn temperature(&self) -> Vec<f64> {
        self.cells.iter().map(|m| m.temperature).collect()
    }
}

/// Density, bulk velocity and temperature of a single velocity profile.
///
/// `cell` is only used to label errors.
pub fn profile_moments(
    profile: &[f64],
    grid: &VelocityGrid,
    cell: usize,
) -> Result<(f64, [f64; 2], f64)> {
    let w = grid.weight();
    let dim = grid.dim();
    let mut mass = 0.0;
    let mut momentum = [0.0; 2];
    for (f, v) in profile.iter().zip(grid.nodes()) {
        mass += f;
        momentum[0] += v[0] * f;
        momentum[1] += v[1] * f;
    }
    let rho = w * mass;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::NonPositiveDensity { cell, value: rho });
    }
    let u = [w * momentum[0] / rho, w * momentum[1] / rho];
    let mut thermal = 0.0;
    for (f, v) in profile.iter().zip(grid.nodes()) {
        let c0 = v[0] - u[0];
        let c1 = v[1] - u[1];
        thermal += (c0 * c0 + c1 * c1) * f;
    }
    let temperature = w * thermal / (dim as f64 * rho);
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::NonPositiveTemperature {
            cell,
            value: temperature,
        });
    }
    Ok((rho, u, temperature))
}

/// Total energy consistent with `(ρ, u, T)`: `ρ|u|²/2 + Dv ρ T / 2`.
pub fn total_energy(rho: f64, u: [f64; 2], temperature: f64, dim_v: usize) -> f64 {
    0.5 * rho * (u[0] * u[0] + u[1] * u[1]) + 0.5 * dim_v as f64 * rho * temperature
}

/// Heat flux `q^d = ½ Σ_j w |c_j|² c_j^d f_j` of one profile, `c = v − u`.
pub fn profile_heat_flux(profile: &[f64], grid: &VelocityGrid, u: [f64; 2]) -> [f64; 2] {
    let mut q = [0.0; 2];
    for (f, v) in profile.iter().zip(grid.nodes()) {
        let c = [v[0] - u[0], v[1] - u[1]];
        let c2 = c[0] * c[0] + c[1] * c[1];
        q[0] += c2 * c[0] * f;
        q[1] += c2 * c[1] * f;
    }
    let scale = 0.5 * grid.weight();
    [scale * q[0], scale * q[1]]
}

/// Per-cell heat flux given bulk velocities already computed from the same field.
pub fn compute_heat_flux(f: &DistributionField, u: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let ncells = f.space().num_cells();
    if u.len() != ncells {
        return Err(Error::DimensionMismatch(format!(
            "{} velocities for {} cells",
            u.len(),
            ncells
        )));
    }
    let grid = f.velocity();
    let q: Vec<[f64; 2]> = (0..ncells)
        .into_par_iter()
        .map(|i| profile_heat_flux(f.cell(i), grid, u[i]))
        .collect();
    if let Some(i) = q.iter().position(|q| !q[0].is_finite() || !q[1].is_finite()) {
        return Err(Error::StepUnstable { index: i });
    }
    Ok(q)
}

/// Moments `(ρ, u, T, E, q)` of every spatial cell.
pub fn compute_moments(f: &DistributionField) -> Result<MomentField> {
    let grid = f.velocity();
    let dim_v = grid.dim();
    let cells = (0..f.space().num_cells())
        .into_par_iter()
        .map(|i| {
            let profile = f.cell(i);
            let (rho, u, temperature) = profile_moments(profile, grid, i)?;
            Ok(Moments {
                rho,
                u,
                temperature,
                energy: total_energy(rho, u, temperature, dim_v),
                heat_flux: profile_heat_flux(profile, grid, u),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentField { dim_v, cells })
}

/// Writes `ρ/(2πT)^{Dv/2} exp(−|v_j − u|²/(2T))` into `out` without validating the inputs.
///
/// The exponential is evaluated per axis and multiplied, which is exact for the tensor grid.
pub(crate) fn write_maxwellian(
    rho: f64,
    u: [f64; 2],
    temperature: f64,
    grid: &VelocityGrid,
    out: &mut [f64],
) {
    let dim = grid.dim();
    let prefactor = rho / (2.0 * PI * temperature).powf(0.5 * dim as f64);
    let two_t = 2.0 * temperature;
    let axis = grid.axis_nodes();
    match dim {
        1 => {
            for (m, &v) in out.iter_mut().zip(axis) {
                let c = v - u[0];
                *m = prefactor * (-c * c / two_t).exp();
            }
        }
        _ => {
            let ex: Vec<f64> = axis
                .iter()
                .map(|&v| (-(v - u[0]) * (v - u[0]) / two_t).exp())
                .collect();
            let ey: Vec<f64> = axis
                .iter()
                .map(|&v| (-(v - u[1]) * (v - u[1]) / two_t).exp())
                .collect();
            let n = axis.len();
            for (jx, &gx) in ex.iter().enumerate() {
                let row = &mut out[jx * n..(jx + 1) * n];
                for (m, &gy) in row.iter_mut().zip(&ey) {
                    *m = prefactor * gx * gy;
                }
            }
        }
    }
}

fn check_state(rho: f64, u: &[f64], temperature: f64, grid: &VelocityGrid) -> Result<[f64; 2]> {
    if !(rho > 0.0) || !(temperature > 0.0) {
        return Err(Error::NonPositiveInput { rho, temperature });
    }
    if u.len() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "velocity has {} components, grid is {}-dimensional",
            u.len(),
            grid.dim()
        )));
    }
    let mut uu = [0.0; 2];
    uu[..u.len()].copy_from_slice(u);
    Ok(uu)
}

/// Local Maxwellian evaluated at every velocity node.
pub fn maxwellian(rho: f64, u: &[f64], temperature: f64, grid: &VelocityGrid) -> Result<Vec<f64>> {
    let uu = check_state(rho, u, temperature, grid)?;
    let mut out = vec![0.0; grid.num_nodes()];
    write_maxwellian(rho, uu, temperature, grid, &mut out);
    Ok(out)
}

/// How the equilibrium of the collision term is formed from the moments of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxwellianMode {
    /// The Maxwellian formula evaluated at the nodes.
    #[default]
    Analytic,
    /// Maxwellian parameters adjusted so its discrete `(ρ, u, T)` match the targets.
    MomentCorrected,
}

const CORRECTION_TOL: f64 = 1e-14;
const CORRECTION_MAX_ITERS: usize = 8;

/// Writes a Maxwellian whose discrete moments equal `(rho, u, temperature)` to round-off.
///
/// Starts from the analytic parameters and applies the fixed-point update
/// `ρ' ← ρ'·ρ/ρ_M`, `u' ← u' + (u − u_M)`, `T' ← T'·T/T_M` until the discrete moments agree.
pub(crate) fn write_corrected_maxwellian(
    rho: f64,
    u: [f64; 2],
    temperature: f64,
    grid: &VelocityGrid,
    out: &mut [f64],
    cell: usize,
) -> Result<()> {
    let (mut r, mut v, mut t) = (rho, u, temperature);
    for _ in 0..CORRECTION_MAX_ITERS {
        write_maxwellian(r, v, t, grid, out);
        let (rm, um, tm) = profile_moments(out, grid, cell)?;
        let converged = (rm - rho).abs() <= CORRECTION_TOL * rho
            && (um[0] - u[0]).abs() <= CORRECTION_TOL * (1.0 + u[0].abs())
            && (um[1] - u[1]).abs() <= CORRECTION_TOL * (1.0 + u[1].abs())
            && (tm - temperature).abs() <= CORRECTION_TOL * temperature;
        if converged {
            return Ok(());
        }
        r *= rho / rm;
        v = [v[0] + (u[0] - um[0]), v[1] + (u[1] - um[1])];
        t *= temperature / tm;
    }
    write_maxwellian(r, v, t, grid, out);
    Ok(())
}

/// Maxwellian sharing the discrete moments `(ρ, u, T)` with the given targets.
pub fn corrected_maxwellian(
    rho: f64,
    u: &[f64],
    temperature: f64,
    grid: &VelocityGrid,
) -> Result<Vec<f64>> {
    let uu = check_state(rho, u, temperature, grid)?;
    let mut out = vec![0.0; grid.num_nodes()];
    write_corrected_maxwellian(rho, uu, temperature, grid, &mut out, 0)?;
    Ok(out)
}

/// Gaussian tail width used by the velocity-domain adequacy check.
pub const TAIL_WIDTHS: f64 = 5.0;

/// Cells whose Maxwellian reaches past the velocity box, `|u| + 5√T > v_max`.
pub fn truncated_cells(moments: &MomentField, grid: &VelocityGrid) -> Vec<usize> {
    moments
        .cells
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let speed = (m.u[0] * m.u[0] + m.u[1] * m.u[1]).sqrt();
            speed + TAIL_WIDTHS * m.temperature.sqrt() > grid.v_max()
        })
        .map(|(i, _)| i)
        .collect()
}
