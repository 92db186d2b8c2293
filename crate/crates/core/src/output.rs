//! CSV writers for moment snapshots, raw distributions and spectra.
//!
//! Numbers are written with 17 significant digits so that files round-trip to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linear_analysis::ModeSpectrum;
use crate::phase_space::{compute_moments, DistributionField};

fn num(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.16e}");
}

/// Header `t,x[,y],rho,ux[,uy],T,E,qx[,qy]`.
pub fn snapshot_header(dim_x: usize, dim_v: usize) -> String {
    let mut cols = vec!["t", "x"];
    if dim_x == 2 {
        cols.push("y");
    }
    cols.push("rho");
    cols.push("ux");
    if dim_v == 2 {
        cols.push("uy");
    }
    cols.extend(["T", "E", "qx"]);
    if dim_v == 2 {
        cols.push("qy");
    }
    cols.join(",")
}

/// Moment snapshot of `f` at time `t`, one row per cell in x-major order.
pub fn snapshot_csv(t: f64, f: &DistributionField) -> Result<String> {
    let moments = compute_moments(f)?;
    let space = f.space();
    let dx = space.dim();
    let dv = moments.dim_v;
    let mut out = snapshot_header(dx, dv);
    out.push('\n');
    for (cell, m) in moments.cells.iter().enumerate() {
        let c = space.center(cell);
        let mut row: Vec<f64> = vec![t];
        row.extend_from_slice(&c[..dx]);
        row.push(m.rho);
        row.extend_from_slice(&m.u[..dv]);
        row.push(m.temperature);
        row.push(m.energy);
        row.extend_from_slice(&m.heat_flux[..dv]);
        for (k, x) in row.into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            num(&mut out, x);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Raw distribution: `t,x[,y],vx[,vy],f`, velocity nodes fastest.
pub fn distribution_csv(t: f64, f: &DistributionField) -> String {
    let space = f.space();
    let grid = f.velocity();
    let (dx, dv) = (space.dim(), grid.dim());
    let mut out = String::from("t,x");
    if dx == 2 {
        out.push_str(",y");
    }
    out.push_str(",vx");
    if dv == 2 {
        out.push_str(",vy");
    }
    out.push_str(",f\n");
    for cell in 0..space.num_cells() {
        let c = space.center(cell);
        for (v, &value) in grid.nodes().iter().zip(f.cell(cell)) {
            num(&mut out, t);
            for &x in c[..dx].iter().chain(&v[..dv]).chain([&value]) {
                out.push(',');
                num(&mut out, x);
            }
            out.push('\n');
        }
    }
    out
}

/// `mode,re,im`, one row per eigenvalue.
pub fn spectrum_csv(spectra: &[ModeSpectrum]) -> String {
    let mut out = String::from("mode,re,im\n");
    for s in spectra {
        for l in &s.eigenvalues {
            let _ = write!(out, "{},", s.mode);
            num(&mut out, l.re);
            out.push(',');
            num(&mut out, l.im);
            out.push('\n');
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:04}.csv")
}

pub fn distribution_name(index: usize) -> String {
    format!("distribution_{index:04}.csv")
}
