//! Upwind finite-difference discretization of the free-streaming term `v · ∇x f`.
//!
//! Each velocity node moves with a constant speed, so every node is upwinded on the sign of its
//! own velocity component and no flux splitting is required. Derivatives are conservative flux
//! differences `(f̂_{i+1/2} − f̂_{i−1/2}) / Δx` of reconstructed point values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{Boundary, DistributionField, SpatialGrid};

/// Regularization added to the smoothness indicators of the nonlinear weights.
pub const WENO_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructionOrder {
    Upwind1,
    Weno2,
    #[default]
    Weno3,
}

impl ReconstructionOrder {
    /// Stencil radius of the cell derivative, i.e. the number of ghost cells needed.
    pub fn ghost_width(self) -> usize {
        match self {
            ReconstructionOrder::Upwind1 => 1,
            ReconstructionOrder::Weno2 | ReconstructionOrder::Weno3 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReconstructionOrder::Upwind1 => "upwind1",
            ReconstructionOrder::Weno2 => "weno2",
            ReconstructionOrder::Weno3 => "weno3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryCondition {
    pub boundaries: Vec<Boundary>,
    pub ghost: usize,
}

impl BoundaryCondition {
    pub fn new(boundaries: Vec<Boundary>, order: ReconstructionOrder) -> Self {
        Self {
            boundaries,
            ghost: order.ghost_width(),
        }
    }

    pub fn for_grid(grid: &SpatialGrid, order: ReconstructionOrder) -> Self {
        Self::new(grid.axes().iter().map(|a| a.boundary).collect(), order)
    }
}

/// Interior index that supplies the value at position `p` (which may lie in a ghost layer).
#[inline]
fn source_index(p: isize, n: usize, boundary: Boundary) -> usize {
    let n = n as isize;
    let q = match boundary {
        Boundary::Periodic => p.rem_euclid(n),
        Boundary::Outflow => p.clamp(0, n - 1),
    };
    q as usize
}

fn check_size(grid: &SpatialGrid, ghost: usize) -> Result<()> {
    for (axis, a) in grid.axes().iter().enumerate() {
        if a.cells < ghost {
            return Err(Error::GridTooSmall {
                axis,
                cells: a.cells,
                ghost,
            });
        }
    }
    Ok(())
}

/// A distribution field extended by `ghost` cells on every side of every spatial axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedField {
    pub ghost: usize,
    /// Padded cell counts per axis.
    pub shape: Vec<usize>,
    pub nodes: usize,
    pub values: Vec<f64>,
}

impl PaddedField {
    /// Value at padded coordinates (ghost layers start at 0) and velocity node `j`.
    pub fn get(&self, coords: &[usize], j: usize) -> f64 {
        let cell = match self.shape.len() {
            1 => coords[0],
            _ => coords[0] * self.shape[1] + coords[1],
        };
        self.values[cell * self.nodes + j]
    }

    fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.values[cell * self.nodes..(cell + 1) * self.nodes]
    }

    fn copy_cell(&mut self, from: usize, to: usize) {
        let nv = self.nodes;
        self.values.copy_within(from * nv..(from + 1) * nv, to * nv);
    }
}

/// Surrounds `f` with ghost cells: cyclic copies for periodic axes, copies of the nearest
/// interior cell for outflow axes. In 2D the x ghosts are filled first, then the y ghosts
/// over the x-extended rows, which also fills the corners.
pub fn fill_ghost_cells(f: &DistributionField, bc: &BoundaryCondition) -> Result<PaddedField> {
    let grid = f.space();
    if bc.boundaries.len() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} boundary tags for a {}-dimensional grid",
            bc.boundaries.len(),
            grid.dim()
        )));
    }
    let g = bc.ghost;
    check_size(grid, g)?;
    let nv = f.velocity().num_nodes();
    let n: Vec<usize> = grid.axes().iter().map(|a| a.cells).collect();
    let shape: Vec<usize> = n.iter().map(|&c| c + 2 * g).collect();
    let mut padded = PaddedField {
        ghost: g,
        shape: shape.clone(),
        nodes: nv,
        values: vec![0.0; shape.iter().product::<usize>() * nv],
    };
    match grid.dim() {
        1 => {
            for p in 0..shape[0] {
                let src = source_index(p as isize - g as isize, n[0], bc.boundaries[0]);
                padded.cell_mut(p).copy_from_slice(f.cell(src));
            }
        }
        _ => {
            let ny = shape[1];
            // interior rows in y, all columns in x
            for px in 0..shape[0] {
                let sx = source_index(px as isize - g as isize, n[0], bc.boundaries[0]);
                for iy in 0..n[1] {
                    let src = sx * n[1] + iy;
                    padded
                        .cell_mut(px * ny + iy + g)
                        .copy_from_slice(f.cell(src));
                }
            }
            // y ghosts from the x-extended data
            for px in 0..shape[0] {
                for py in (0..g).chain(n[1] + g..ny) {
                    let sy = source_index(py as isize - g as isize, n[1], bc.boundaries[1]);
                    padded.copy_cell(px * ny + sy + g, px * ny + py);
                }
            }
        }
    }
    Ok(padded)
}

#[inline]
fn weno_weights(d0: f64, d1: f64, beta0: f64, beta1: f64) -> (f64, f64) {
    let a0 = d0 / ((beta0 + WENO_EPSILON) * (beta0 + WENO_EPSILON));
    let a1 = d1 / ((beta1 + WENO_EPSILON) * (beta1 + WENO_EPSILON));
    let s = a0 + a1;
    (a0 / s, a1 / s)
}

/// Value at the interface between `upwind` and `downwind`, reconstructed from the upwind side.
/// `far` is the cell behind `upwind`.
#[inline]
fn interface_value(order: ReconstructionOrder, far: f64, upwind: f64, downwind: f64) -> f64 {
    match order {
        ReconstructionOrder::Upwind1 => upwind,
        ReconstructionOrder::Weno2 => {
            let beta0 = (upwind - far) * (upwind - far);
            let beta1 = (downwind - upwind) * (downwind - upwind);
            let (w0, w1) = weno_weights(0.5, 0.5, beta0, beta1);
            w0 * upwind + w1 * downwind
        }
        ReconstructionOrder::Weno3 => {
            let beta0 = (upwind - far) * (upwind - far);
            let beta1 = (downwind - upwind) * (downwind - upwind);
            let (w0, w1) = weno_weights(1.0 / 3.0, 2.0 / 3.0, beta0, beta1);
            let q0 = -0.5 * far + 1.5 * upwind;
            let q1 = 0.5 * upwind + 0.5 * downwind;
            w0 * q0 + w1 * q1
        }
    }
}

/// Approximation of `∂x f` at the centre of a `2g + 1` point stencil, upwinded on `v_sign`.
///
/// A zero `v_sign` returns 0 without reconstruction.
pub fn weno_derivative(stencil: &[f64], v_sign: f64, order: ReconstructionOrder, dx: f64) -> f64 {
    let g = order.ghost_width();
    assert_eq!(stencil.len(), 2 * g + 1, "stencil length must be 2g+1");
    let at = |k: isize| stencil[(g as isize + k) as usize];
    if v_sign > 0.0 {
        let far_left = if g > 1 { at(-2) } else { 0.0 };
        let right = interface_value(order, at(-1), at(0), at(1));
        let left = interface_value(order, far_left, at(-1), at(0));
        (right - left) / dx
    } else if v_sign < 0.0 {
        let far_right = if g > 1 { at(2) } else { 0.0 };
        let right = interface_value(order, far_right, at(1), at(0));
        let left = interface_value(order, at(1), at(0), at(-1));
        (right - left) / dx
    } else {
        0.0
    }
}

/// Adds `−v ∂x f` along one grid line to `out`.
///
/// `line` holds the padded values (ghost width `g` on both ends) and `out` the interior cells.
fn accumulate_line(line: &[f64], g: usize, v: f64, order: ReconstructionOrder, dx: f64, out: &mut [f64], fluxes: &mut Vec<f64>) {
    let n = out.len();
    fluxes.clear();
    // interface k sits between interior cells k-1 and k, k = 0..=n
    if v > 0.0 {
        for k in 0..=n {
            let up = g + k - 1;
            let far = if g > 1 { line[up - 1] } else { 0.0 };
            fluxes.push(interface_value(order, far, line[up], line[up + 1]));
        }
    } else {
        for k in 0..=n {
            let up = g + k;
            let far = if g > 1 { line[up + 1] } else { 0.0 };
            fluxes.push(interface_value(order, far, line[up], line[up - 1]));
        }
    }
    let scale = -v / dx;
    for (i, o) in out.iter_mut().enumerate() {
        *o += scale * (fluxes[i + 1] - fluxes[i]);
    }
}

/// The free-streaming tendency `−Σ_axes v^axis ∂_axis f` for every cell and velocity node.
///
/// Spatial axis `a` is paired with velocity component `a`.
pub fn transport_rhs(f: &DistributionField, order: ReconstructionOrder) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.values().len()];
    add_transport(f.space(), f.velocity().nodes(), f.values(), order, &mut out)?;
    Ok(out)
}

/// Adds the free-streaming tendency of `values` into `out`.
pub(crate) fn add_transport(
    grid: &SpatialGrid,
    nodes: &[[f64; 2]],
    values: &[f64],
    order: ReconstructionOrder,
    out: &mut [f64],
) -> Result<()> {
    let g = order.ghost_width();
    check_size(grid, g)?;
    let nv = nodes.len();
    let ncells = grid.num_cells();
    let dim = grid.dim();

    // One velocity node per task; each returns its tendency over all cells.
    let columns: Vec<Vec<f64>> = (0..nv)
        .into_par_iter()
        .map(|j| {
            let mut column = vec![0.0; ncells];
            let mut line = Vec::new();
            let mut fluxes = Vec::new();
            let mut acc = Vec::new();
            for axis in 0..dim {
                let v = nodes[j][axis];
                if v == 0.0 {
                    continue;
                }
                let a = grid.axis(axis);
                let n = a.cells;
                let stride = grid.stride(axis);
                let dx = a.spacing();
                let lines = ncells / n;
                for t in 0..lines {
                    // first cell of this line: transverse index t enumerates the other axis
                    let base = if dim == 1 {
                        0
                    } else if axis == 0 {
                        t
                    } else {
                        t * n
                    };
                    line.clear();
                    for p in -(g as isize)..(n + g) as isize {
                        let src = base + source_index(p, n, a.boundary) * stride;
                        line.push(values[src * nv + j]);
                    }
                    acc.clear();
                    acc.resize(n, 0.0);
                    accumulate_line(&line, g, v, order, dx, &mut acc, &mut fluxes);
                    for (i, d) in acc.iter().enumerate() {
                        column[base + i * stride] += d;
                    }
                }
            }
            column
        })
        .collect();

    out.par_chunks_mut(nv).enumerate().for_each(|(cell, o)| {
        for (j, oj) in o.iter_mut().enumerate() {
            *oj += columns[j][cell];
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{Axis, PhaseSpace, VelocityGrid};
    use std::f64::consts::PI;

    const ORDERS: [ReconstructionOrder; 3] = [
        ReconstructionOrder::Upwind1,
        ReconstructionOrder::Weno2,
        ReconstructionOrder::Weno3,
    ];

    fn field_1d(values: &[f64], boundary: Boundary) -> DistributionField {
        let phase = PhaseSpace::new(
            SpatialGrid::uniform_1d(values.len(), 0.0, 1.0, boundary).unwrap(),
            VelocityGrid::new(1, 1, 1.0).unwrap(),
        );
        DistributionField::new(phase, values.to_vec()).unwrap()
    }

    #[test]
    fn periodic_ghosts_are_cyclic() {
        let f = field_1d(&[1.0, 2.0, 3.0, 4.0], Boundary::Periodic);
        let p = fill_ghost_cells(&f, &BoundaryCondition::new(vec![Boundary::Periodic], ReconstructionOrder::Weno3)).unwrap();
        assert_eq!(p.values, vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn outflow_ghosts_extrapolate_constant() {
        let f = field_1d(&[1.0, 2.0, 3.0, 4.0], Boundary::Outflow);
        let p = fill_ghost_cells(&f, &BoundaryCondition::new(vec![Boundary::Outflow], ReconstructionOrder::Weno3)).unwrap();
        assert_eq!(p.values, vec![1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn ghost_fill_rejects_tiny_grids() {
        let f = field_1d(&[1.0], Boundary::Periodic);
        let err = fill_ghost_cells(&f, &BoundaryCondition::new(vec![Boundary::Periodic], ReconstructionOrder::Weno3));
        assert!(matches!(err, Err(Error::GridTooSmall { axis: 0, cells: 1, ghost: 2 })));
        assert!(transport_rhs(&f, ReconstructionOrder::Weno3).is_err());
        assert!(transport_rhs(&f, ReconstructionOrder::Upwind1).is_ok());
    }

    #[test]
    fn mixed_2d_corners_fill_x_then_y() {
        // outflow in x, periodic in y, 3 x 3 cells, value = 10 * ix + iy
        let grid = SpatialGrid::new(vec![
            Axis::new(3, 0.0, 1.0, Boundary::Outflow),
            Axis::new(3, 0.0, 1.0, Boundary::Periodic),
        ])
        .unwrap();
        let phase = PhaseSpace::new(grid, VelocityGrid::new(1, 1, 1.0).unwrap());
        let vals: Vec<f64> = (0..9).map(|c| (10 * (c / 3) + c % 3) as f64).collect();
        let f = DistributionField::new(phase, vals).unwrap();
        let bc = BoundaryCondition::new(vec![Boundary::Outflow, Boundary::Periodic], ReconstructionOrder::Upwind1);
        let p = fill_ghost_cells(&f, &bc).unwrap();
        assert_eq!(p.shape, vec![5, 5]);
        // interior
        assert_eq!(p.get(&[2, 2], 0), 11.0);
        // x ghost copies nearest interior column
        assert_eq!(p.get(&[0, 1], 0), 0.0);
        assert_eq!(p.get(&[4, 3], 0), 22.0);
        // y ghost wraps around
        assert_eq!(p.get(&[1, 0], 0), 2.0);
        assert_eq!(p.get(&[3, 4], 0), 20.0);
        // corners come from the x-extended rows
        assert_eq!(p.get(&[0, 0], 0), 2.0);
        assert_eq!(p.get(&[4, 4], 0), 20.0);
        assert_eq!(p.get(&[0, 4], 0), 0.0);
    }

    #[test]
    fn derivative_is_exact_on_linear_and_constant_data() {
        let dx = 0.1;
        for order in ORDERS {
            let g = order.ghost_width() as isize;
            let stencil: Vec<f64> = (-g..=g).map(|k| 3.0 - 2.5 * (k as f64 * dx)).collect();
            for sign in [1.0, -1.0] {
                let d = weno_derivative(&stencil, sign, order, dx);
                assert!((d + 2.5).abs() < 1e-12, "{order:?} {sign} {d}");
                let flat = vec![4.2; stencil.len()];
                assert_eq!(weno_derivative(&flat, sign, order, dx), 0.0);
            }
            assert_eq!(weno_derivative(&stencil, 0.0, order, dx), 0.0);
        }
    }

    #[test]
    fn upwind_stencils_never_look_downstream_by_two() {
        // a spike two cells downstream of the centre must not influence the derivative
        for order in [ReconstructionOrder::Weno2, ReconstructionOrder::Weno3] {
            let mut s = vec![1.0; 5];
            s[4] = 100.0;
            assert_eq!(weno_derivative(&s, 1.0, order, 1.0), 0.0);
            let mut s = vec![1.0; 5];
            s[0] = 100.0;
            assert_eq!(weno_derivative(&s, -1.0, order, 1.0), 0.0);
        }
    }

    fn sine_derivative_error(n: usize, order: ReconstructionOrder) -> f64 {
        let dx = 1.0 / n as f64;
        let g = order.ghost_width() as isize;
        (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                let stencil: Vec<f64> = (-g..=g)
                    .map(|k| (2.0 * PI * (x + k as f64 * dx)).sin())
                    .collect();
                (weno_derivative(&stencil, 1.0, order, dx) - 2.0 * PI * (2.0 * PI * x).cos()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn weno3_derivative_converges_on_sine() {
        // coarser grids are pre-asymptotic: near extrema the smoothness indicators still
        // exceed ε_w and the nonlinear weights cut the max-norm order
        let errors: Vec<f64> = [400, 800, 1600]
            .iter()
            .map(|&n| sine_derivative_error(n, ReconstructionOrder::Weno3))
            .collect();
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 2.5, "observed order {order}, errors {errors:?}");
        }
    }

    #[test]
    fn zero_velocity_node_has_no_transport() {
        let phase = PhaseSpace::new(
            SpatialGrid::uniform_1d(8, 0.0, 1.0, Boundary::Periodic).unwrap(),
            VelocityGrid::new(1, 3, 1.5).unwrap(),
        );
        let vals: Vec<f64> = (0..24).map(|k| ((k * 7) % 5) as f64).collect();
        let f = DistributionField::new(phase, vals).unwrap();
        let r = transport_rhs(&f, ReconstructionOrder::Weno3).unwrap();
        for i in 0..8 {
            assert_eq!(r[i * 3 + 1], 0.0);
        }
    }

    #[test]
    fn linear_profile_interior_slope() {
        // single node v = 0.5 > 0, outflow, f = 2 + 3x
        let phase = PhaseSpace::new(
            SpatialGrid::uniform_1d(10, 0.0, 1.0, Boundary::Outflow).unwrap(),
            VelocityGrid::new(1, 2, 1.0).unwrap(),
        );
        let grid = phase.space.clone();
        let vals: Vec<f64> = (0..10)
            .flat_map(|i| {
                let x = grid.center(i)[0];
                [2.0 + 3.0 * x, 2.0 + 3.0 * x]
            })
            .collect();
        let f = DistributionField::new(phase, vals).unwrap();
        for order in ORDERS {
            let r = transport_rhs(&f, order).unwrap();
            let g = order.ghost_width();
            for i in g..10 - g {
                assert!((r[2 * i + 1] + 0.5 * 3.0).abs() < 1e-12);
                assert!((r[2 * i] - 0.5 * 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_dimensional_transport_sums_both_axes() {
        // f = x + 2y with velocities (vx, vy): −(vx + 2 vy) in the interior
        let grid = SpatialGrid::new(vec![
            Axis::new(8, 0.0, 1.0, Boundary::Outflow),
            Axis::new(6, 0.0, 1.0, Boundary::Outflow),
        ])
        .unwrap();
        let vg = VelocityGrid::new(2, 4, 2.0).unwrap();
        let nv = vg.num_nodes();
        let phase = PhaseSpace::new(grid.clone(), vg.clone());
        let mut vals = vec![0.0; grid.num_cells() * nv];
        for c in 0..grid.num_cells() {
            let x = grid.center(c);
            vals[c * nv..(c + 1) * nv].fill(x[0] + 2.0 * x[1]);
        }
        let f = DistributionField::new(phase, vals).unwrap();
        let r = transport_rhs(&f, ReconstructionOrder::Weno3).unwrap();
        for c in 0..grid.num_cells() {
            let [ix, iy] = grid.coords(c);
            if (2..6).contains(&ix) && (2..4).contains(&iy) {
                for (j, v) in vg.nodes().iter().enumerate() {
                    assert!((r[c * nv + j] + v[0] + 2.0 * v[1]).abs() < 1e-11);
                }
            }
        }
    }
}
