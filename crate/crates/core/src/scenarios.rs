//! Initial conditions built as local Maxwellians of prescribed macroscopic states.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phase_space::{write_maxwellian, DistributionField, PhaseSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroState {
    pub rho: f64,
    pub u: [f64; 2],
    pub temperature: f64,
}

impl MacroState {
    pub fn new(rho: f64, u: [f64; 2], temperature: f64) -> Result<Self> {
        if !(rho > 0.0) || !(temperature > 0.0) {
            return Err(Error::NonPositiveInput { rho, temperature });
        }
        Ok(Self {
            rho,
            u,
            temperature,
        })
    }
}

/// Scenario names accepted in configuration files.
pub const SCENARIO_NAMES: [&str; 4] = ["sod1d", "shockbubble2d", "wave1d", "equilibrium"];

pub const SOD_INTERFACE: f64 = 0.5;
pub const SOD_LEFT: MacroState = MacroState {
    rho: 1.0,
    u: [0.0, 0.0],
    temperature: 1.0,
};
pub const SOD_RIGHT: MacroState = MacroState {
    rho: 0.125,
    u: [0.0, 0.0],
    temperature: 0.25,
};

pub const SHOCK_POSITION: f64 = -1.0;
pub const BUBBLE_CENTER: [f64; 2] = [0.5, 0.0];

pub fn shock_left_state() -> MacroState {
    MacroState {
        rho: 16.0 / 7.0,
        u: [(5.0f64 / 3.0).sqrt() * 7.0 / 16.0, 0.0],
        temperature: 133.0 / 64.0,
    }
}

/// Sod-like Riemann data; a point exactly on the interface takes the left state.
pub fn sod_state(x: f64) -> MacroState {
    if x <= SOD_INTERFACE {
        SOD_LEFT
    } else {
        SOD_RIGHT
    }
}

/// Shock left of `x = −1`; at rest with unit temperature and a Gaussian density bubble
/// `1 + 1.5 exp(−16 |x − x₀|²)` to the right.
pub fn shock_bubble_state(x: [f64; 2]) -> MacroState {
    if x[0] <= SHOCK_POSITION {
        shock_left_state()
    } else {
        let dx = x[0] - BUBBLE_CENTER[0];
        let dy = x[1] - BUBBLE_CENTER[1];
        MacroState {
            rho: 1.0 + 1.5 * (-16.0 * (dx * dx + dy * dy)).exp(),
            u: [0.0, 0.0],
            temperature: 1.0,
        }
    }
}

/// Smooth periodic density wave `ρ = 1 + a sin(2π (x − x_lo)/L)` at rest with `T = 1`.
pub fn density_wave_state(x: f64, lower: f64, length: f64, amplitude: f64) -> MacroState {
    MacroState {
        rho: 1.0 + amplitude * (2.0 * PI * (x - lower) / length).sin(),
        u: [0.0, 0.0],
        temperature: 1.0,
    }
}

/// Maxwellian field whose macroscopic state at each cell centre is given by `state`.
pub fn maxwellian_field(
    phase: Arc<PhaseSpace>,
    state: impl Fn([f64; 2]) -> MacroState,
) -> Result<DistributionField> {
    let nv = phase.velocity.num_nodes();
    let mut field = DistributionField::zeros(phase.clone());
    let values = field.values_mut();
    for cell in 0..phase.space.num_cells() {
        let s = state(phase.space.center(cell));
        if !(s.rho > 0.0) || !(s.temperature > 0.0) {
            return Err(Error::NonPositiveInput {
                rho: s.rho,
                temperature: s.temperature,
            });
        }
        write_maxwellian(
            s.rho,
            s.u,
            s.temperature,
            &phase.velocity,
            &mut values[cell * nv..(cell + 1) * nv],
        );
    }
    Ok(field)
}

fn require_dims(phase: &PhaseSpace, dx: usize, dv: usize, name: &str) -> Result<()> {
    if phase.space.dim() != dx || phase.velocity.dim() != dv {
        return Err(Error::DimensionMismatch(format!(
            "{name} needs Dx={dx}, Dv={dv}; got Dx={}, Dv={}",
            phase.space.dim(),
            phase.velocity.dim()
        )));
    }
    Ok(())
}

pub fn sod_1d(phase: Arc<PhaseSpace>) -> Result<DistributionField> {
    require_dims(&phase, 1, 1, "sod1d")?;
    maxwellian_field(phase, |x| sod_state(x[0]))
}

pub fn shock_bubble_2d(phase: Arc<PhaseSpace>) -> Result<DistributionField> {
    require_dims(&phase, 2, 2, "shockbubble2d")?;
    maxwellian_field(phase, shock_bubble_state)
}

pub fn density_wave_1d(phase: Arc<PhaseSpace>, amplitude: f64) -> Result<DistributionField> {
    require_dims(&phase, 1, 1, "wave1d")?;
    let axis = phase.space.axis(0).clone();
    maxwellian_field(phase, |x| {
        density_wave_state(x[0], axis.lower, axis.length(), amplitude)
    })
}

pub fn uniform_equilibrium(state: MacroState, phase: Arc<PhaseSpace>) -> Result<DistributionField> {
    MacroState::new(state.rho, state.u, state.temperature)?;
    if phase.velocity.dim() == 1 && state.u[1] != 0.0 {
        return Err(Error::DimensionMismatch(
            "transverse velocity given for a 1D velocity grid".into(),
        ));
    }
    maxwellian_field(phase, |_| state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{compute_moments, Axis, Boundary, SpatialGrid, VelocityGrid};

    fn sod_phase() -> Arc<PhaseSpace> {
        PhaseSpace::new(
            SpatialGrid::uniform_1d(100, 0.0, 1.0, Boundary::Outflow).unwrap(),
            VelocityGrid::new(1, 80, 8.0).unwrap(),
        )
    }

    #[test]
    fn sod_states_on_either_side() {
        let f = sod_1d(sod_phase()).unwrap();
        let m = compute_moments(&f).unwrap();
        // centres 0.245 and 0.755
        let l = m.cells[24];
        let r = m.cells[75];
        assert!((l.rho - 1.0).abs() < 1e-9 && l.u[0].abs() < 1e-12 && (l.temperature - 1.0).abs() < 1e-9);
        assert!((r.rho - 0.125).abs() < 1e-9 && r.u[0].abs() < 1e-12 && (r.temperature - 0.25).abs() < 1e-9);
        assert_eq!(sod_state(0.5), SOD_LEFT);
        assert_eq!(sod_state(0.5 + 1e-15), SOD_RIGHT);
    }

    #[test]
    fn sod_total_mass() {
        let f = sod_1d(sod_phase()).unwrap();
        assert!((f.total_mass() - 0.5625).abs() < 1e-9);
    }

    #[test]
    fn sod_is_piecewise_constant_per_node() {
        let f = sod_1d(sod_phase()).unwrap();
        for i in 1..100 {
            if i != 50 {
                assert_eq!(f.cell(i), f.cell(i - 1));
            }
        }
        assert_ne!(f.cell(49), f.cell(50));
    }

    #[test]
    fn shock_bubble_states() {
        let l = shock_bubble_state([-1.5, 0.0]);
        assert_eq!(l, shock_left_state());
        assert!((l.rho - 16.0 / 7.0).abs() < 1e-15);
        let peak = shock_bubble_state([0.5, 0.0]);
        assert_eq!((peak.rho, peak.u, peak.temperature), (2.5, [0.0, 0.0], 1.0));
        let far = shock_bubble_state([2.9, 0.9]);
        let expected = 1.0 + 1.5 * (-16.0f64 * (2.4 * 2.4 + 0.9 * 0.9)).exp();
        assert_eq!(far.rho, expected);
        assert!((far.rho - 1.0).abs() < 1e-10);
        assert_eq!(shock_bubble_state([-1.0, 0.3]), shock_left_state());
    }

    #[test]
    fn shock_bubble_field_right_state_only_perturbs_density() {
        let phase = PhaseSpace::new(
            SpatialGrid::new(vec![
                Axis::new(20, -2.0, 3.0, Boundary::Outflow),
                Axis::new(5, -1.0, 1.0, Boundary::Periodic),
            ])
            .unwrap(),
            VelocityGrid::new(2, 30, 10.0).unwrap(),
        );
        let f = shock_bubble_2d(phase.clone()).unwrap();
        let m = compute_moments(&f).unwrap();
        for (c, mm) in m.cells.iter().enumerate() {
            if phase.space.center(c)[0] > -1.0 {
                assert!((mm.temperature - 1.0).abs() < 1e-8);
                assert!(mm.u[0].abs() < 1e-9 && mm.u[1].abs() < 1e-9);
            }
        }
        assert!(sod_1d(phase).is_err());
    }

    #[test]
    fn uniform_equilibrium_is_deterministic() {
        let s = MacroState::new(1.0, [0.0, 0.0], 1.0).unwrap();
        let a = uniform_equilibrium(s, sod_phase()).unwrap();
        let b = uniform_equilibrium(s, sod_phase()).unwrap();
        assert_eq!(a, b);
        let m = compute_moments(&a).unwrap();
        assert!(m.cells.iter().all(|c| (c.rho - 1.0).abs() < 1e-9 && (c.temperature - 1.0).abs() < 1e-9));
        assert!(MacroState::new(-1.0, [0.0, 0.0], 1.0).is_err());
    }
}
