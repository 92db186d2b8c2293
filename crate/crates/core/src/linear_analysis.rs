//! Linearized BGK operator: Gaussian-weighted inner product, collision-invariant basis,
//! projection onto the local equilibria, and numerical spectra used to check projective
//! integration parameters.
//!
//! All matrix work is done in the symmetrized coordinates `g_j = √d_j f_j`, with
//! `d_j = w_j w_G(v_j)` the quadrature weight times the Gaussian weight. The projection is
//! self-adjoint in the weighted inner product, so in these coordinates it becomes an ordinary
//! symmetric matrix with the same spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{ButcherTableau, ProjectiveParameters};
use crate::phase_space::VelocityGrid;

/// Standard Gaussian density `(2π)^{−Dv/2} exp(−|v|²/2)`.
pub fn gaussian_weight(v: [f64; 2], dim_v: usize) -> f64 {
    (2.0 * PI).powf(-0.5 * dim_v as f64) * (-0.5 * (v[0] * v[0] + v[1] * v[1])).exp()
}

fn gaussian_weights(grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&v| gaussian_weight(v, grid.dim()))
        .collect()
}

fn check_len(len: usize, grid: &VelocityGrid) -> Result<()> {
    if len != grid.num_nodes() {
        return Err(Error::GridMismatch(format!(
            "profile has {len} values, grid has {} nodes",
            grid.num_nodes()
        )));
    }
    Ok(())
}

/// `(g, h) = Σ_j w_j g_j h_j w_G(v_j)`.
pub fn weighted_inner_product(g: &[f64], h: &[f64], grid: &VelocityGrid) -> Result<f64> {
    check_len(g.len(), grid)?;
    check_len(h.len(), grid)?;
    let w = grid.weight();
    Ok(w * g
        .iter()
        .zip(h)
        .zip(grid.nodes())
        .map(|((g, h), &v)| g * h * gaussian_weight(v, grid.dim()))
        .sum::<f64>())
}

/// Collision invariants `(1, v, (|v|² − Dv)/2^{Dv/2})` on a velocity grid, both as given and
/// re-orthonormalized under the discrete weighted inner product.
#[derive(Debug, Clone)]
pub struct WeightedBasis {
    grid: VelocityGrid,
    gaussian: Vec<f64>,
    analytic: Vec<Vec<f64>>,
    orthonormal: Vec<Vec<f64>>,
}

pub fn build_basis(grid: &VelocityGrid, dim_v: usize) -> Result<WeightedBasis> {
    if !(1..=2).contains(&dim_v) {
        return Err(Error::UnsupportedDimension(dim_v));
    }
    if dim_v != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "basis for Dv={dim_v} requested on a {}-dimensional velocity grid",
            grid.dim()
        )));
    }
    let nodes = grid.nodes();
    let energy_norm = 2f64.powf(0.5 * dim_v as f64);
    let mut analytic = vec![vec![1.0; nodes.len()]];
    for d in 0..dim_v {
        analytic.push(nodes.iter().map(|v| v[d]).collect());
    }
    analytic.push(
        nodes
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1] - dim_v as f64) / energy_norm)
            .collect(),
    );

    let gaussian = gaussian_weights(grid);
    let w = grid.weight();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        w * a
            .iter()
            .zip(b)
            .zip(&gaussian)
            .map(|((a, b), g)| a * b * g)
            .sum::<f64>()
    };
    // modified Gram-Schmidt, applied twice
    let mut orthonormal: Vec<Vec<f64>> = Vec::with_capacity(analytic.len());
    for psi in &analytic {
        let mut q = psi.clone();
        for _ in 0..2 {
            for e in &orthonormal {
                let c = dot(&q, e);
                for (q, e) in q.iter_mut().zip(e) {
                    *q -= c * e;
                }
            }
        }
        let norm = dot(&q, &q).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidGrid(
                "velocity grid too coarse to resolve the collision invariants".into(),
            ));
        }
        q.iter_mut().for_each(|x| *x /= norm);
        orthonormal.push(q);
    }
    Ok(WeightedBasis {
        grid: grid.clone(),
        gaussian,
        analytic,
        orthonormal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Analytic,
    Orthonormal,
}

impl WeightedBasis {
    pub fn dim_v(&self) -> usize {
        self.grid.dim()
    }

    /// Number of basis functions, `Dv + 2`.
    pub fn rank(&self) -> usize {
        self.analytic.len()
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn analytic(&self) -> &[Vec<f64>] {
        &self.analytic
    }

    pub fn orthonormal(&self) -> &[Vec<f64>] {
        &self.orthonormal
    }

    fn functions(&self, kind: BasisKind) -> &[Vec<f64>] {
        match kind {
            BasisKind::Analytic => &self.analytic,
            BasisKind::Orthonormal => &self.orthonormal,
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.grid.weight()
            * a.iter()
                .zip(b)
                .zip(&self.gaussian)
                .map(|((a, b), g)| a * b * g)
                .sum::<f64>()
    }

    pub fn gram(&self, kind: BasisKind) -> Vec<Vec<f64>> {
        let f = self.functions(kind);
        f.iter()
            .map(|a| f.iter().map(|b| self.dot(a, b)).collect())
            .collect()
    }

    /// Largest entrywise deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self, kind: BasisKind) -> f64 {
        self.gram(kind)
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(j, &g)| (g - if i == j { 1.0 } else { 0.0 }).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `Π f = Σ_k Ψ_k (Ψ_k, f)` with the re-orthonormalized basis.
    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(f.len(), &self.grid)?;
        let mut out = vec![0.0; f.len()];
        for psi in &self.orthonormal {
            let c = self.dot(psi, f);
            for (o, p) in out.iter_mut().zip(psi) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// Linearized equilibrium around the standard Maxwellian; the same map as [`Self::project`].
    pub fn linearized_maxwellian(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.project(f)
    }

    /// Dense matrix of `Π` acting on nodal values.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.num_nodes();
        let w = self.grid.weight();
        DMatrix::from_fn(n, n, |i, j| {
            self.orthonormal
                .iter()
                .map(|p| p[i] * p[j])
                .sum::<f64>()
                * w
                * self.gaussian[j]
        })
    }

    /// `D^{1/2} Π D^{−1/2}`, symmetric and similar to `Π`.
    pub fn symmetric_projection(&self) -> DMatrix<f64> {
        let n = self.grid.num_nodes();
        let w = self.grid.weight();
        let scaled: Vec<Vec<f64>> = self
            .orthonormal
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&self.gaussian)
                    .map(|(p, g)| p * (w * g).sqrt())
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n, n, |i, j| scaled.iter().map(|p| p[i] * p[j]).sum())
    }
}

/// Dense linear operator on the nodal values of one Fourier mode.
#[derive(Debug, Clone)]
pub struct LinearOperatorMatrix {
    pub matrix: DMatrix<Complex64>,
    pub eps: f64,
    pub mode: Option<usize>,
}

/// Eigenvalues of `−(I − Π)/ε`, ascending.
pub fn collision_spectrum(eps: f64, basis: &WeightedBasis) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameters(format!("epsilon must be > 0, got {eps}")));
    }
    let p = basis.symmetric_projection();
    let n = p.nrows();
    let op = (p - DMatrix::<f64>::identity(n, n)) / eps;
    let eig = SymmetricEigen::try_new(op, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure("collision operator".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Fourier symbol of the spatial derivative used by the spectral analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportSymbol {
    /// First-order upwind differences.
    #[default]
    Upwind1,
    /// WENO2 with its linear weights (central differences).
    Weno2,
    /// WENO3 with its linear weights.
    Weno3,
}

impl TransportSymbol {
    /// Symbol of `v ∂x` on mode `e^{iθ x/Δx}`, i.e. the factor multiplying the mode.
    pub fn eval(self, theta: f64, v: f64, dx: f64) -> Complex64 {
        if v == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // derivative symbol for v > 0; the v < 0 symbol is −conj of it
        // snap round-off so that θ = π gives an exactly real symbol
        let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
        let (sin, cos) = theta.sin_cos();
        let (sin, cos) = (snap(sin), snap(cos));
        let shift = Complex64::new(cos, -sin);
        let plus = match self {
            TransportSymbol::Upwind1 => (Complex64::new(1.0, 0.0) - shift) / dx,
            TransportSymbol::Weno2 => Complex64::new(0.0, sin) / dx,
            TransportSymbol::Weno3 => {
                let recon = -shift / 6.0 + 5.0 / 6.0 + shift.conj() / 3.0;
                recon * (Complex64::new(1.0, 0.0) - shift) / dx
            }
        };
        if v > 0.0 {
            v * plus
        } else {
            -v * plus.conj()
        }
    }
}

/// Spectrum of the linearized transport-collision operator for one Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub mode: usize,
    pub eigenvalues: Vec<Complex64>,
}

/// Grid and discretization data for the transport-collision spectrum.
#[derive(Debug, Clone)]
pub struct SpectrumSetup<'a> {
    pub basis: &'a WeightedBasis,
    /// Cells along the analysed axis (number of distinct Fourier modes).
    pub cells: usize,
    pub dx: f64,
    /// Velocity component paired with the analysed spatial axis.
    pub axis: usize,
    pub symbol: TransportSymbol,
}

impl SpectrumSetup<'_> {
    pub fn operator(&self, eps: f64, mode: usize) -> LinearOperatorMatrix {
        let p = self.basis.symmetric_projection();
        let n = p.nrows();
        let theta = 2.0 * PI * mode as f64 / self.cells as f64;
        let inv_eps = if eps.is_infinite() { 0.0 } else { 1.0 / eps };
        let nodes = self.basis.grid().nodes();
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            let collision = p[(i, j)] - if i == j { 1.0 } else { 0.0 };
            let mut a = Complex64::new(collision * inv_eps, 0.0);
            if i == j {
                a -= self.symbol.eval(theta, nodes[i][self.axis], self.dx);
            }
            a
        });
        LinearOperatorMatrix {
            matrix,
            eps,
            mode: Some(mode),
        }
    }
}

/// Hermitian up to round-off relative to the largest entry.
fn is_hermitian(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    let tol = 1e-14 * m.iter().map(|x| x.norm()).fold(0.0, f64::max);
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues of `−diag(σ_m(v_j)) − (I − Π)/ε` for each requested wavenumber `m`,
/// sorted by real then imaginary part.
pub fn transport_collision_spectrum(
    eps: f64,
    setup: &SpectrumSetup<'_>,
    modes: &[usize],
) -> Result<Vec<ModeSpectrum>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameters(format!("epsilon must be > 0, got {eps}")));
    }
    modes
        .par_iter()
        .map(|&mode| {
            let op = setup.operator(eps, mode);
            let fail = || Error::EigensolverFailure(format!("mode {mode}"));
            // Schur deflation stalls on exactly-zero eigenvalues, which only the
            // Hermitian modes (e.g. m = 0) have
            let mut eigenvalues: Vec<Complex64> = if is_hermitian(&op.matrix) {
                let m = &op.matrix;
                let hermitian_part = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
                SymmetricEigen::try_new(hermitian_part, f64::EPSILON, 0)
                    .ok_or_else(fail)?
                    .eigenvalues
                    .iter()
                    .map(|&l| Complex64::new(l, 0.0))
                    .collect()
            } else {
                Schur::try_new(op.matrix, f64::EPSILON, 100_000)
                    .ok_or_else(fail)?
                    .eigenvalues()
                    .ok_or_else(fail)?
                    .iter()
                    .copied()
                    .collect()
            };
            sort_complex(&mut eigenvalues);
            Ok(ModeSpectrum { mode, eigenvalues })
        })
        .collect()
}

/// Amplification factor of one projective Runge-Kutta step on `y' = λ y`.
///
/// With `τ = 1 + δt λ` every inner chain multiplies its start by `τ^{K+1}` and has chord slope
/// `τ^K λ` times its start.
pub fn projective_amplification(
    lambda: Complex64,
    tableau: &ButcherTableau,
    params: &ProjectiveParameters,
) -> Complex64 {
    let tau = Complex64::new(1.0, 0.0) + params.inner_dt * lambda;
    let chord = tau.powu(params.inner_steps as u32) * lambda;
    let base = tau * tau.powu(params.inner_steps as u32);
    let span = params.inner_span();
    let mut slopes: Vec<Complex64> = vec![chord];
    for s in 1..tableau.stages() {
        let c = tableau.c[s];
        let dir: Complex64 = slopes
            .iter()
            .enumerate()
            .map(|(l, k)| k * (tableau.a[s][l] / c))
            .sum();
        let seed = base + (c * params.outer_dt - span) * dir;
        slopes.push(chord * seed);
    }
    let combined: Complex64 = slopes.iter().zip(&tableau.b).map(|(k, b)| k * b).sum();
    base + (params.outer_dt - span) * combined
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recommendation {
    /// Projective integration is worthwhile with the advised parameters.
    Projective,
    /// The outer step cannot exceed the inner chain by a useful factor; integrate directly.
    DirectRk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub params: ProjectiveParameters,
    /// Largest `|σ(λ)|` over all sampled eigenvalues.
    pub max_amplification: f64,
    /// `1 − max_amplification`.
    pub margin: f64,
    pub worst_mode: usize,
    pub worst_eigenvalue: Complex64,
    pub recommendation: Recommendation,
}

/// Everything the advisor needs besides `ε` and `Δx`.
#[derive(Debug, Clone)]
pub struct AdviceContext<'a> {
    pub setup: SpectrumSetup<'a>,
    pub tableau: ButcherTableau,
    pub inner_steps: usize,
}

pub const DEFAULT_CFL_FRACTION: f64 = 0.4;
pub const DEFAULT_INNER_STEPS: usize = 2;
pub const AMPLIFICATION_SLACK: f64 = 1e-8;

/// Wavenumbers `0..=I/2`; the remaining ones are complex conjugates of these.
pub fn half_modes(cells: usize) -> Vec<usize> {
    (0..=cells / 2).collect()
}

/// Proposes `δt = ε`, `K` inner steps and `Δt = cfl_fraction · Δx`, then checks the projective
/// amplification factor of every eigenvalue of every Fourier mode.
///
/// When `Δt` cannot reach twice the shortest admissible outer step `(K+1)δt / c_min` the
/// projective step buys nothing: the advice falls back to that minimum and recommends direct
/// RK4, and the spectral check is reported without being enforced.
pub fn advise_parameters(
    eps: f64,
    dx: f64,
    cfl_fraction: f64,
    ctx: &AdviceContext<'_>,
) -> Result<Advice> {
    if !(eps > 0.0) || !(dx > 0.0) || !(cfl_fraction > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "advice needs eps, dx, cfl_fraction > 0, got {eps}, {dx}, {cfl_fraction}"
        )));
    }
    let inner_dt = eps;
    let k = ctx.inner_steps;
    let span = (k + 1) as f64 * inner_dt;
    let shortest = span / ctx.tableau.min_later_node();
    let proposed = cfl_fraction * dx;
    let (outer_dt, recommendation) = if proposed >= 2.0 * shortest {
        (proposed, Recommendation::Projective)
    } else {
        (shortest, Recommendation::DirectRk4)
    };
    let params = ProjectiveParameters::new(inner_dt, k, outer_dt)?;

    let setup = SpectrumSetup { dx, ..ctx.setup.clone() };
    let spectra = transport_collision_spectrum(eps, &setup, &half_modes(setup.cells))?;
    let mut worst = (0.0, 0, Complex64::new(0.0, 0.0));
    for s in &spectra {
        for &lambda in &s.eigenvalues {
            let amp = projective_amplification(lambda, &ctx.tableau, &params).norm();
            if amp > worst.0 {
                worst = (amp, s.mode, lambda);
            }
        }
    }
    let (max_amplification, worst_mode, worst_eigenvalue) = worst;
    if recommendation == Recommendation::Projective
        && max_amplification > 1.0 + AMPLIFICATION_SLACK
    {
        return Err(Error::AdviceRejected {
            mode: worst_mode,
            re: worst_eigenvalue.re,
            im: worst_eigenvalue.im,
            amplification: max_amplification,
        });
    }
    Ok(Advice {
        params,
        max_amplification,
        margin: 1.0 - max_amplification,
        worst_mode,
        worst_eigenvalue,
        recommendation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{prk_step, OdeSystem};

    fn grid1() -> VelocityGrid {
        VelocityGrid::new(1, 80, 8.0).unwrap()
    }

    fn basis1() -> WeightedBasis {
        build_basis(&grid1(), 1).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn inner_product_examples() {
        let g = grid1();
        let one = vec![1.0; 80];
        let v: Vec<f64> = g.axis_nodes().to_vec();
        let psi2: Vec<f64> = v.iter().map(|v| (v * v - 1.0) / 2f64.sqrt()).collect();
        assert!((weighted_inner_product(&one, &one, &g).unwrap() - 1.0).abs() < 1e-9);
        assert!(weighted_inner_product(&v, &one, &g).unwrap().abs() < 1e-12);
        assert!((weighted_inner_product(&psi2, &psi2, &g).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            weighted_inner_product(&one[..79], &one, &g),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn analytic_basis_matches_closed_form() {
        let b = basis1();
        let v = grid1().axis_nodes().to_vec();
        assert_eq!(b.rank(), 3);
        for (j, &x) in v.iter().enumerate() {
            assert_eq!(b.analytic()[0][j], 1.0);
            assert_eq!(b.analytic()[1][j], x);
            assert!((b.analytic()[2][j] - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-14);
        }
        let g2 = VelocityGrid::new(2, 30, 10.0).unwrap();
        let b2 = build_basis(&g2, 2).unwrap();
        assert_eq!(b2.rank(), 4);
        for (j, v) in g2.nodes().iter().enumerate() {
            assert_eq!(b2.analytic()[1][j], v[0]);
            assert_eq!(b2.analytic()[2][j], v[1]);
            assert!((b2.analytic()[3][j] - (v[0] * v[0] + v[1] * v[1] - 2.0) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_matrices() {
        let b = basis1();
        assert!(b.gram_deviation(BasisKind::Analytic) <= 1e-6);
        assert!(b.gram_deviation(BasisKind::Orthonormal) <= 1e-12);
        let b2 = build_basis(&VelocityGrid::new(2, 30, 10.0).unwrap(), 2).unwrap();
        assert!(b2.gram_deviation(BasisKind::Analytic) <= 1e-6);
        assert!(b2.gram_deviation(BasisKind::Orthonormal) <= 1e-12);
    }

    #[test]
    fn unsupported_dimensions() {
        assert!(matches!(build_basis(&grid1(), 3), Err(Error::UnsupportedDimension(3))));
        assert!(matches!(build_basis(&grid1(), 2), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn projection_fixes_range_and_kills_complement() {
        let b = basis1();
        let psi1 = b.orthonormal()[1].clone();
        let p = b.project(&psi1).unwrap();
        assert!(p.iter().zip(&psi1).all(|(a, b)| (a - b).abs() < 1e-12));

        // v³ with its basis components removed
        let v3: Vec<f64> = grid1().axis_nodes().iter().map(|v| v * v * v).collect();
        let pv3 = b.project(&v3).unwrap();
        let rem: Vec<f64> = v3.iter().zip(&pv3).map(|(a, b)| a - b).collect();
        let scale = rem.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(b.project(&rem).unwrap().iter().all(|x| x.abs() < 1e-12 * scale));
        assert_eq!(b.linearized_maxwellian(&v3).unwrap(), pv3);
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint() {
        let b = basis1();
        let g = grid1();
        for seed in 0..5 {
            let f = pseudo_random(80, seed);
            let h = pseudo_random(80, seed + 100);
            let p = b.project(&f).unwrap();
            let pp = b.project(&p).unwrap();
            assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-12));
            let lhs = weighted_inner_product(&p, &h, &g).unwrap();
            let rhs = weighted_inner_product(&f, &b.project(&h).unwrap(), &g).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_matrix_rank() {
        for (g, dv) in [(grid1(), 1), (VelocityGrid::new(2, 12, 6.0).unwrap(), 2)] {
            let b = build_basis(&g, dv).unwrap();
            let m = b.projection_matrix();
            let sv = m.singular_values();
            let rank = sv.iter().filter(|&&s| s > 1e-8).count();
            assert_eq!(rank, dv + 2);
            let s = b.symmetric_projection();
            assert!((&s - s.transpose()).amax() < 1e-15);
        }
    }

    #[test]
    fn collision_spectrum_clusters() {
        let b = basis1();
        for eps in [1.0, 1e-2, 1e-5] {
            let ev = collision_spectrum(eps, &b).unwrap();
            assert_eq!(ev.len(), 80);
            for &l in &ev[..77] {
                assert!((l * eps + 1.0).abs() < 1e-8, "{eps}: {l}");
            }
            for &l in &ev[77..] {
                assert!(l.abs() * eps < 1e-8, "{eps}: {l}");
            }
            let trace: f64 = ev.iter().sum();
            assert!((trace * eps + 77.0).abs() < 77.0 * 1e-8);
        }
        assert!(collision_spectrum(0.0, &b).is_err());
    }

    #[test]
    fn mode_zero_matches_collision_spectrum() {
        let b = basis1();
        let setup = SpectrumSetup {
            basis: &b,
            cells: 16,
            dx: 1.0 / 16.0,
            axis: 0,
            symbol: TransportSymbol::Upwind1,
        };
        for eps in [1.0, 1e-2] {
            let s = transport_collision_spectrum(eps, &setup, &[0]).unwrap();
            let c = collision_spectrum(eps, &b).unwrap();
            for (l, r) in s[0].eigenvalues.iter().zip(&c) {
                assert!((l.re - r).abs() < 1e-10 * r.abs().max(1.0), "{l} {r}");
                assert!(l.im.abs() < 1e-10 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weak_collisions_recover_scalar_upwind_symbol() {
        let g = VelocityGrid::new(1, 8, 4.0).unwrap();
        let b = build_basis(&g, 1).unwrap();
        let (cells, dx, mode) = (20, 0.05, 3);
        let setup = SpectrumSetup {
            basis: &b,
            cells,
            dx,
            axis: 0,
            symbol: TransportSymbol::Upwind1,
        };
        let s = transport_collision_spectrum(1e6, &setup, &[mode]).unwrap();
        let theta = 2.0 * PI * mode as f64 / cells as f64;
        for &v in g.axis_nodes() {
            let sigma = if v > 0.0 {
                Complex64::new(v / dx, 0.0) * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta))
            } else {
                Complex64::new(-v / dx, 0.0) * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, theta))
            };
            let closest = s[0]
                .eigenvalues
                .iter()
                .map(|l| (l + sigma).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(closest < 1e-4, "v={v}: {closest}");
        }
    }

    #[test]
    fn spectra_are_dissipative() {
        let g = VelocityGrid::new(1, 24, 6.0).unwrap();
        let b = build_basis(&g, 1).unwrap();
        for symbol in [TransportSymbol::Upwind1, TransportSymbol::Weno2, TransportSymbol::Weno3] {
            let setup = SpectrumSetup {
                basis: &b,
                cells: 16,
                dx: 0.0625,
                axis: 0,
                symbol,
            };
            for eps in [1.0, 1e-2, 1e-5] {
                let modes: Vec<usize> = (0..16).collect();
                for s in transport_collision_spectrum(eps, &setup, &modes).unwrap() {
                    for l in &s.eigenvalues {
                        assert!(l.re <= 1e-10 * l.norm().max(1.0), "{symbol:?} {eps} m={}: {l}", s.mode);
                    }
                }
            }
        }
    }

    struct Scalar(f64);
    impl OdeSystem for Scalar {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.0 * y[0];
            Ok(())
        }
    }

    // y' = λ y for complex λ = a + ib, written as a real 2x2 system
    struct Rotation(f64, f64);
    impl OdeSystem for Rotation {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = self.0 * y[0] - self.1 * y[1];
            out[1] = self.1 * y[0] + self.0 * y[1];
            Ok(())
        }
    }

    #[test]
    fn amplification_matches_projective_step() {
        let params = ProjectiveParameters::new(1e-3, 2, 0.05).unwrap();
        for tableau in [ButcherTableau::classical_rk4(), ButcherTableau::heun(), ButcherTableau::forward_euler()] {
            for lambda in [-1.0, -500.0, -1000.0, 3.0] {
                let y = prk_step(&Scalar(lambda), &[1.0], &tableau, &params).unwrap();
                let amp = projective_amplification(Complex64::new(lambda, 0.0), &tableau, &params);
                assert!((amp.re - y[0]).abs() < 1e-12 * y[0].abs().max(1.0), "{lambda}: {amp} vs {}", y[0]);
                assert_eq!(amp.im, 0.0);
            }
            for (a, b) in [(-2.0, 30.0), (-800.0, 200.0), (0.0, -15.0)] {
                let y = prk_step(&Rotation(a, b), &[1.0, 0.0], &tableau, &params).unwrap();
                let amp = projective_amplification(Complex64::new(a, b), &tableau, &params);
                assert!((amp.re - y[0]).abs() < 1e-12 && (amp.im - y[1]).abs() < 1e-12, "{amp} vs {y:?}");
            }
        }
    }

    #[test]
    fn fast_modes_are_damped_by_inner_steps() {
        let params = ProjectiveParameters::new(1e-5, 2, 0.004).unwrap();
        let amp = projective_amplification(Complex64::new(-1e5, 0.0), &ButcherTableau::classical_rk4(), &params);
        assert!(amp.norm() < 1e-12);
    }

    fn advice_context(basis: &WeightedBasis) -> AdviceContext<'_> {
        AdviceContext {
            setup: SpectrumSetup {
                basis,
                cells: 100,
                dx: 0.01,
                axis: 0,
                symbol: TransportSymbol::Upwind1,
            },
            tableau: ButcherTableau::classical_rk4(),
            inner_steps: DEFAULT_INNER_STEPS,
        }
    }

    #[test]
    fn advice_in_the_fluid_regime() {
        let b = basis1();
        let a = advise_parameters(1e-5, 0.01, DEFAULT_CFL_FRACTION, &advice_context(&b)).unwrap();
        assert_eq!(a.params.inner_dt, 1e-5);
        assert_eq!(a.params.inner_steps, 2);
        assert_eq!(a.params.outer_dt, 0.004);
        assert!(a.params.outer_dt >= a.params.inner_span());
        assert_eq!(a.recommendation, Recommendation::Projective);
        assert!(a.max_amplification <= 1.0 + AMPLIFICATION_SLACK);
        assert!((a.margin - (1.0 - a.max_amplification)).abs() < 1e-15);
    }

    #[test]
    fn transitional_advice_recommends_direct_rk4() {
        let b = basis1();
        let a = advise_parameters(0.01, 0.01, DEFAULT_CFL_FRACTION, &advice_context(&b)).unwrap();
        assert_eq!(a.recommendation, Recommendation::DirectRk4);
        // c_min = 1/2 for RK4, so the shortest admissible step is 2 (K+1) δt
        assert!((a.params.outer_dt - 0.06).abs() < 1e-15);
    }

    #[test]
    fn oversized_outer_step_is_rejected() {
        let b = basis1();
        let err = advise_parameters(1e-5, 0.01, 5.0, &advice_context(&b)).unwrap_err();
        assert!(matches!(err, Error::AdviceRejected { amplification, .. } if amplification > 1.0));
    }

    #[test]
    fn half_modes_cover_conjugate_pairs() {
        assert_eq!(half_modes(4), vec![0, 1, 2]);
        assert_eq!(half_modes(5), vec![0, 1, 2]);
    }
}
