//! Semidiscrete BGK right-hand side `−v·∇x f + (M[f] − f)/ε`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::OdeSystem;
use crate::phase_space::{
    profile_moments, write_corrected_maxwellian, write_maxwellian, DistributionField,
    MaxwellianMode, PhaseSpace,
};
use crate::transport::{add_transport, ReconstructionOrder};

/// Relaxation parameter ε. `f64::INFINITY` switches the collision term off.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Stiffness(f64);

impl Stiffness {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameters(format!("epsilon must be > 0, got {eps}")));
        }
        Ok(Self(eps))
    }

    pub fn collisionless() -> Self {
        Self(f64::INFINITY)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_collisionless(self) -> bool {
        self.0.is_infinite()
    }
}

#[derive(Debug, Clone)]
pub struct BgkOperator {
    phase: Arc<PhaseSpace>,
    eps: Stiffness,
    order: ReconstructionOrder,
    mode: MaxwellianMode,
}

impl BgkOperator {
    pub fn new(
        phase: Arc<PhaseSpace>,
        eps: Stiffness,
        order: ReconstructionOrder,
        mode: MaxwellianMode,
    ) -> Self {
        Self {
            phase,
            eps,
            order,
            mode,
        }
    }

    pub fn phase(&self) -> &Arc<PhaseSpace> {
        &self.phase
    }

    pub fn stiffness(&self) -> Stiffness {
        self.eps
    }

    pub fn order(&self) -> ReconstructionOrder {
        self.order
    }

    pub fn mode(&self) -> MaxwellianMode {
        self.mode
    }

    /// Full tendency of a distribution field.
    pub fn rhs(&self, f: &DistributionField) -> Result<DistributionField> {
        if f.phase().as_ref() != self.phase.as_ref() {
            return Err(Error::GridMismatch(
                "field and operator live on different grids".into(),
            ));
        }
        let mut out = vec![0.0; f.values().len()];
        self.eval(f.values(), &mut out)?;
        DistributionField::new(self.phase.clone(), out)
    }

    /// Adds `(M[f] − f)/ε` into `out`, cell by cell.
    pub fn add_collision(&self, values: &[f64], out: &mut [f64]) -> Result<()> {
        if self.eps.is_collisionless() {
            return Ok(());
        }
        let grid = &self.phase.velocity;
        let nv = grid.num_nodes();
        let inv_eps = 1.0 / self.eps.value();
        let mode = self.mode;
        out.par_chunks_mut(nv)
            .zip(values.par_chunks(nv))
            .enumerate()
            .try_for_each_init(
                || vec![0.0; nv],
                |m, (cell, (o, f))| {
                    let (rho, u, t) = profile_moments(f, grid, cell)?;
                    match mode {
                        MaxwellianMode::Analytic => write_maxwellian(rho, u, t, grid, m),
                        MaxwellianMode::MomentCorrected => {
                            write_corrected_maxwellian(rho, u, t, grid, m, cell)?
                        }
                    }
                    for ((o, &fj), &mj) in o.iter_mut().zip(f).zip(m.iter()) {
                        *o += inv_eps * (mj - fj);
                    }
                    Ok(())
                },
            )
    }
}

impl OdeSystem for BgkOperator {
    fn dim(&self) -> usize {
        self.phase.len()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        add_transport(
            &self.phase.space,
            self.phase.velocity.nodes(),
            y,
            self.order,
            out,
        )?;
        self.add_collision(y, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{maxwellian, Boundary, SpatialGrid, VelocityGrid};

    fn phase() -> Arc<PhaseSpace> {
        PhaseSpace::new(
            SpatialGrid::uniform_1d(6, 0.0, 1.0, Boundary::Periodic).unwrap(),
            VelocityGrid::new(1, 40, 8.0).unwrap(),
        )
    }

    fn uniform(profile: &[f64], phase: &Arc<PhaseSpace>) -> DistributionField {
        let vals = profile.repeat(phase.space.num_cells());
        DistributionField::new(phase.clone(), vals).unwrap()
    }

    #[test]
    fn stiffness_must_be_positive() {
        assert!(Stiffness::new(0.0).is_err());
        assert!(Stiffness::new(-1.0).is_err());
        assert!(Stiffness::new(f64::NAN).is_err());
        assert!(Stiffness::collisionless().is_collisionless());
    }

    #[test]
    fn uniform_equilibrium_is_a_fixed_point() {
        let p = phase();
        let m = maxwellian(1.0, &[0.3], 0.8, &p.velocity).unwrap();
        let f = uniform(&m, &p);
        for mode in [MaxwellianMode::Analytic, MaxwellianMode::MomentCorrected] {
            let op = BgkOperator::new(p.clone(), Stiffness::new(1e-3).unwrap(), ReconstructionOrder::Weno3, mode);
            let r = op.rhs(&f).unwrap();
            let max = r.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max < 1e-10, "{mode:?}: {max}");
        }
    }

    #[test]
    fn uniform_non_equilibrium_relaxes_linearly_in_inverse_eps() {
        let p = phase();
        let nodes = p.velocity.axis_nodes().to_vec();
        let profile: Vec<f64> = nodes.iter().map(|v| (-(v - 1.0f64).abs()).exp() + 0.1 * (-v * v).exp()).collect();
        let f = uniform(&profile, &p);
        let eps = 0.01;
        let op = |e: f64| BgkOperator::new(p.clone(), Stiffness::new(e).unwrap(), ReconstructionOrder::Weno3, MaxwellianMode::Analytic);
        let r1 = op(eps).rhs(&f).unwrap();
        let r2 = op(eps / 2.0).rhs(&f).unwrap();
        let (rho, u, t) = profile_moments(&profile, &p.velocity, 0).unwrap();
        let m = maxwellian(rho, &[u[0]], t, &p.velocity).unwrap();
        for c in 0..6 {
            for j in 0..nodes.len() {
                let k = c * nodes.len() + j;
                assert_eq!(r1.values()[k], (1.0 / eps) * (m[j] - profile[j]));
                assert_eq!(r2.values()[k], 2.0 * r1.values()[k]);
            }
        }
    }

    #[test]
    fn corrected_collision_conserves_mass_per_cell() {
        let p = phase();
        let nodes = p.velocity.axis_nodes().to_vec();
        let vals: Vec<f64> = (0..6)
            .flat_map(|c| {
                let s = 1.0 + 0.1 * c as f64;
                nodes
                    .iter()
                    .map(move |v| (-(v - 0.2 * s).powi(2) / (2.0 * s)).exp() * (1.0 + 0.3 * (v * s).sin()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let op = BgkOperator::new(p.clone(), Stiffness::new(1.0).unwrap(), ReconstructionOrder::Weno3, MaxwellianMode::MomentCorrected);
        let mut out = vec![0.0; vals.len()];
        op.add_collision(&vals, &mut out).unwrap();
        let nv = nodes.len();
        for c in 0..6 {
            let mass: f64 = vals[c * nv..(c + 1) * nv].iter().sum();
            let dmass: f64 = out[c * nv..(c + 1) * nv].iter().sum();
            assert!(dmass.abs() <= 1e-12 * mass, "cell {c}: {dmass}");
        }
    }

    #[test]
    fn collisionless_operator_is_pure_transport() {
        let p = phase();
        let f = uniform(&vec![0.0; 40], &p);
        let op = BgkOperator::new(p.clone(), Stiffness::collisionless(), ReconstructionOrder::Weno3, MaxwellianMode::Analytic);
        // zero density would fail moments, so this also checks the collision term is skipped
        assert!(op.rhs(&f).is_ok());
    }

    #[test]
    fn unphysical_state_is_reported() {
        let p = phase();
        let f = uniform(&vec![0.0; 40], &p);
        let op = BgkOperator::new(p.clone(), Stiffness::new(0.1).unwrap(), ReconstructionOrder::Weno3, MaxwellianMode::Analytic);
        assert!(matches!(op.rhs(&f), Err(Error::NonPositiveDensity { cell: 0, .. })));
    }
}
