//! Explicit time integration: forward Euler, classical RK4, projective forward Euler and
//! projective Runge-Kutta.
//!
//! A projective method takes `K + 1` forward Euler steps of size `δt` to damp the stiff modes,
//! estimates the time derivative from the last two inner iterates and extrapolates it over the
//! remainder of the outer step `Δt`. In the Runge-Kutta version every stage derivative is
//! such a chord slope, computed from a fresh inner chain started at the stage seed.

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};
use crate::phase_space::first_non_finite;

/// A semidiscrete system `y' = F(y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()>;
}

impl<T: OdeSystem + ?Sized> OdeSystem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval(y, out)
    }
}

/// Counts right-hand-side evaluations of the wrapped system.
pub struct Counting<S> {
    inner: S,
    count: Cell<usize>,
}

impl<S: OdeSystem> Counting<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.get()
    }
}

impl<S: OdeSystem> OdeSystem for Counting<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.count.set(self.count.get() + 1);
        self.inner.eval(y, out)
    }
}

/// Coefficients `(a, b, c)` of an explicit Runge-Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

const TABLEAU_TOL: f64 = 1e-12;

/// Names accepted by [`ButcherTableau::named`].
pub const TABLEAU_NAMES: [&str; 5] = ["euler", "heun", "ssprk3", "rk4", "rk4-38"];

impl ButcherTableau {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Self {
        Self { a, b, c }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// One stage, `b = [1]`: the projective version is projective forward Euler.
    pub fn forward_euler() -> Self {
        Self::new(vec![vec![0.0]], vec![1.0], vec![0.0])
    }

    pub fn heun() -> Self {
        Self::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
        )
    }

    pub fn ssprk3() -> Self {
        Self::new(
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.25, 0.25, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            vec![0.0, 1.0, 0.5],
        )
    }

    pub fn classical_rk4() -> Self {
        Self::new(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
        )
    }

    /// Kutta's 3/8 rule.
    pub fn rk4_three_eighths() -> Self {
        Self::new(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![1.0 / 3.0, 0.0, 0.0, 0.0],
                vec![-1.0 / 3.0, 1.0, 0.0, 0.0],
                vec![1.0, -1.0, 1.0, 0.0],
            ],
            vec![0.125, 0.375, 0.375, 0.125],
            vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
        )
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "euler" => Some(Self::forward_euler()),
            "heun" => Some(Self::heun()),
            "ssprk3" => Some(Self::ssprk3()),
            "rk4" => Some(Self::classical_rk4()),
            "rk4-38" => Some(Self::rk4_three_eighths()),
            _ => None,
        }
    }

    /// Smallest node among stages 2..S, or 1 for a single-stage method.
    pub fn min_later_node(&self) -> f64 {
        self.c.iter().skip(1).copied().fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableauViolation {
    Shape(String),
    WeightSum(f64),
    WeightRange { stage: usize, value: f64 },
    NodeRange { stage: usize, value: f64 },
    FirstNode(f64),
    ZeroNode { stage: usize },
    NotExplicit { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64, node: f64 },
}

impl fmt::Display for TableauViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableauViolation::Shape(s) => write!(f, "shape: {s}"),
            TableauViolation::WeightSum(s) => write!(f, "Σb = {s} ≠ 1"),
            TableauViolation::WeightRange { stage, value } => {
                write!(f, "b_{stage} = {value} outside [0, 1]")
            }
            TableauViolation::NodeRange { stage, value } => {
                write!(f, "c_{stage} = {value} outside [0, 1]")
            }
            TableauViolation::FirstNode(c) => write!(f, "c_1 = {c} ≠ 0"),
            TableauViolation::ZeroNode { stage } => {
                write!(f, "c_{stage} = 0 but stage seeds divide by c_s")
            }
            TableauViolation::NotExplicit { row, col, value } => {
                write!(f, "a_{{{row},{col}}} = {value} on or above the diagonal")
            }
            TableauViolation::RowSum { row, sum, node } => {
                write!(f, "row {row}: Σa = {sum} ≠ c_{row} = {node}")
            }
        }
    }
}

/// Checks every consistency condition and reports all violations (1-based indices).
pub fn validate_tableau(t: &ButcherTableau) -> std::result::Result<(), Vec<TableauViolation>> {
    let s = t.b.len();
    let mut v = Vec::new();
    if s == 0 {
        v.push(TableauViolation::Shape("no stages".into()));
        return Err(v);
    }
    if t.c.len() != s || t.a.len() != s || t.a.iter().any(|row| row.len() > s) {
        v.push(TableauViolation::Shape(format!(
            "b has {s} entries, c has {}, a has {} rows",
            t.c.len(),
            t.a.len()
        )));
        return Err(v);
    }
    let sum_b: f64 = t.b.iter().sum();
    if (sum_b - 1.0).abs() > TABLEAU_TOL {
        v.push(TableauViolation::WeightSum(sum_b));
    }
    for (k, &b) in t.b.iter().enumerate() {
        if !(-TABLEAU_TOL..=1.0 + TABLEAU_TOL).contains(&b) {
            v.push(TableauViolation::WeightRange {
                stage: k + 1,
                value: b,
            });
        }
    }
    for (k, &c) in t.c.iter().enumerate() {
        if !(-TABLEAU_TOL..=1.0 + TABLEAU_TOL).contains(&c) {
            v.push(TableauViolation::NodeRange {
                stage: k + 1,
                value: c,
            });
        }
    }
    if t.c[0].abs() > TABLEAU_TOL {
        v.push(TableauViolation::FirstNode(t.c[0]));
    }
    for (k, row) in t.a.iter().enumerate() {
        for (l, &a) in row.iter().enumerate().skip(k) {
            if a != 0.0 {
                v.push(TableauViolation::NotExplicit {
                    row: k + 1,
                    col: l + 1,
                    value: a,
                });
            }
        }
        if k == 0 {
            continue;
        }
        if t.c[k].abs() <= TABLEAU_TOL {
            v.push(TableauViolation::ZeroNode { stage: k + 1 });
        }
        let sum: f64 = row.iter().take(k).sum();
        if (sum - t.c[k]).abs() > TABLEAU_TOL {
            v.push(TableauViolation::RowSum {
                row: k + 1,
                sum,
                node: t.c[k],
            });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Inner step `δt`, number of inner steps before extrapolation `K`, and outer step `Δt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveParameters {
    pub inner_dt: f64,
    pub inner_steps: usize,
    pub outer_dt: f64,
}

impl ProjectiveParameters {
    pub fn new(inner_dt: f64, inner_steps: usize, outer_dt: f64) -> Result<Self> {
        let p = Self {
            inner_dt,
            inner_steps,
            outer_dt,
        };
        let problems = p.violations();
        if problems.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidParameters(problems.join("; ")))
        }
    }

    /// Time covered by the inner chain, `(K + 1) δt`.
    pub fn inner_span(&self) -> f64 {
        (self.inner_steps + 1) as f64 * self.inner_dt
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.inner_dt > 0.0) || !self.inner_dt.is_finite() {
            v.push(format!("inner step δt = {} must be > 0", self.inner_dt));
        }
        if self.inner_steps < 1 {
            v.push("inner step count K must be >= 1".to_string());
        }
        if !(self.outer_dt >= self.inner_span()) || !self.outer_dt.is_finite() {
            v.push(format!(
                "outer step Δt = {} must be >= (K+1)·δt = {}",
                self.outer_dt,
                self.inner_span()
            ));
        }
        v
    }

    /// Stage seeds need `c_s Δt ≥ (K + 1) δt` for every stage after the first.
    pub fn stage_violations(&self, tableau: &ButcherTableau) -> Vec<String> {
        tableau
            .c
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c * self.outer_dt < self.inner_span())
            .map(|(s, &c)| {
                format!(
                    "stage {}: c_s·Δt = {} < (K+1)·δt = {}",
                    s + 1,
                    c * self.outer_dt,
                    self.inner_span()
                )
            })
            .collect()
    }

    fn with_outer(self, outer_dt: f64) -> Self {
        Self { outer_dt, ..self }
    }
}

fn check_finite(y: &[f64]) -> Result<()> {
    match first_non_finite(y) {
        Some(index) => Err(Error::StepUnstable { index }),
        None => Ok(()),
    }
}

/// `y + dt F(y)`.
pub fn forward_euler_step<S: OdeSystem>(sys: &S, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut k = vec![0.0; y.len()];
    sys.eval(y, &mut k)?;
    let out: Vec<f64> = y.iter().zip(&k).map(|(y, k)| y + dt * k).collect();
    check_finite(&out)?;
    Ok(out)
}

/// One step of an explicit Runge-Kutta method given by `tableau`.
pub fn explicit_rk_step<S: OdeSystem>(
    sys: &S,
    y: &[f64],
    tableau: &ButcherTableau,
    dt: f64,
) -> Result<Vec<f64>> {
    validate_tableau(tableau).map_err(Error::InvalidTableau)?;
    let n = y.len();
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tableau.stages());
    let mut stage = y.to_vec();
    for s in 0..tableau.stages() {
        stage.copy_from_slice(y);
        for (l, k) in ks.iter().enumerate() {
            let a = tableau.a[s][l];
            if a != 0.0 {
                for (x, k) in stage.iter_mut().zip(k) {
                    *x += dt * a * k;
                }
            }
        }
        let mut k = vec![0.0; n];
        sys.eval(&stage, &mut k).map_err(|e| Error::Stage {
            stage: s + 1,
            inner_step: 0,
            source: Box::new(e),
        })?;
        ks.push(k);
    }
    let mut out = y.to_vec();
    for (k, &b) in ks.iter().zip(&tableau.b) {
        for (x, k) in out.iter_mut().zip(k) {
            *x += dt * b * k;
        }
    }
    check_finite(&out)?;
    Ok(out)
}

pub fn rk4_step<S: OdeSystem>(sys: &S, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    explicit_rk_step(sys, y, &ButcherTableau::classical_rk4(), dt)
}

/// Runs `K + 1` forward Euler steps from `start` and returns the endpoint and chord slope
/// `(y^{K+1} − y^K)/δt`.
fn inner_chain<S: OdeSystem>(
    sys: &S,
    start: Vec<f64>,
    params: &ProjectiveParameters,
    stage: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = params.inner_dt;
    let mut prev = start;
    for k in 0..params.inner_steps {
        prev = forward_euler_step(sys, &prev, dt).map_err(|e| Error::Stage {
            stage,
            inner_step: k + 1,
            source: Box::new(e),
        })?;
    }
    let last = forward_euler_step(sys, &prev, dt).map_err(|e| Error::Stage {
        stage,
        inner_step: params.inner_steps + 1,
        source: Box::new(e),
    })?;
    let slope: Vec<f64> = last.iter().zip(&prev).map(|(a, b)| (a - b) / dt).collect();
    Ok((last, slope))
}

/// Projective forward Euler: `y^{n+1} = y^{n,K+1} + (Δt − (K+1)δt) (y^{n,K+1} − y^{n,K})/δt`.
pub fn pfe_step<S: OdeSystem>(
    sys: &S,
    y: &[f64],
    params: &ProjectiveParameters,
) -> Result<Vec<f64>> {
    let (last, slope) = inner_chain(sys, y.to_vec(), params, 1)?;
    let lever = params.outer_dt - params.inner_span();
    let out: Vec<f64> = last.iter().zip(&slope).map(|(y, k)| y + lever * k).collect();
    check_finite(&out)?;
    Ok(out)
}

/// One outer step of projective Runge-Kutta.
///
/// Stage 1 is the inner chain from `y^n`. Stage `s ≥ 2` starts from
/// `y^{n,K+1} + (c_s Δt − (K+1)δt) Σ_{l<s} (a_{s,l}/c_s) k_l`, runs its own chain and
/// contributes its chord slope `k_s`. The step ends at `y^{n,K+1} + (Δt − (K+1)δt) Σ b_s k_s`.
pub fn prk_step<S: OdeSystem>(
    sys: &S,
    y: &[f64],
    tableau: &ButcherTableau,
    params: &ProjectiveParameters,
) -> Result<Vec<f64>> {
    validate_tableau(tableau).map_err(Error::InvalidTableau)?;
    let stage_problems = params.stage_violations(tableau);
    if !stage_problems.is_empty() {
        return Err(Error::InvalidParameters(stage_problems.join("; ")));
    }
    let span = params.inner_span();
    let (base, k1) = inner_chain(sys, y.to_vec(), params, 1)?;
    let mut slopes = vec![k1];
    for s in 1..tableau.stages() {
        let c = tableau.c[s];
        let mut direction = vec![0.0; y.len()];
        for (l, k) in slopes.iter().enumerate() {
            let weight = tableau.a[s][l] / c;
            if weight != 0.0 {
                for (d, k) in direction.iter_mut().zip(k) {
                    *d += weight * k;
                }
            }
        }
        let lever = c * params.outer_dt - span;
        let seed: Vec<f64> = base.iter().zip(&direction).map(|(y, d)| y + lever * d).collect();
        let (_, ks) = inner_chain(sys, seed, params, s + 1)?;
        slopes.push(ks);
    }
    let b1 = tableau.b[0];
    let mut combined: Vec<f64> = slopes[0].iter().map(|k| b1 * k).collect();
    for (k, &b) in slopes.iter().zip(&tableau.b).skip(1) {
        for (acc, k) in combined.iter_mut().zip(k) {
            *acc += b * k;
        }
    }
    let lever = params.outer_dt - span;
    let out: Vec<f64> = base.iter().zip(&combined).map(|(y, k)| y + lever * k).collect();
    check_finite(&out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    ForwardEuler { dt: f64 },
    Rk4 { dt: f64 },
    ProjectiveEuler(ProjectiveParameters),
    ProjectiveRk {
        tableau: ButcherTableau,
        params: ProjectiveParameters,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Fe,
    Rk4,
    Pfe,
    Prk,
}

impl Method {
    pub fn tag(&self) -> MethodTag {
        match self {
            Method::ForwardEuler { .. } => MethodTag::Fe,
            Method::Rk4 { .. } => MethodTag::Rk4,
            Method::ProjectiveEuler(_) => MethodTag::Pfe,
            Method::ProjectiveRk { .. } => MethodTag::Prk,
        }
    }

    /// Nominal size of one outer step.
    pub fn step_size(&self) -> f64 {
        match self {
            Method::ForwardEuler { dt } | Method::Rk4 { dt } => *dt,
            Method::ProjectiveEuler(p) | Method::ProjectiveRk { params: p, .. } => p.outer_dt,
        }
    }

    /// Right-hand-side evaluations per full outer step.
    pub fn evaluations_per_step(&self) -> usize {
        match self {
            Method::ForwardEuler { .. } => 1,
            Method::Rk4 { .. } => 4,
            Method::ProjectiveEuler(p) => p.inner_steps + 1,
            Method::ProjectiveRk { tableau, params } => tableau.stages() * (params.inner_steps + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::ForwardEuler { dt } | Method::Rk4 { dt } => {
                if !(*dt > 0.0) || !dt.is_finite() {
                    return Err(Error::InvalidParameters(format!("time step {dt} must be > 0")));
                }
            }
            Method::ProjectiveEuler(p) => {
                ProjectiveParameters::new(p.inner_dt, p.inner_steps, p.outer_dt)?;
            }
            Method::ProjectiveRk { tableau, params } => {
                validate_tableau(tableau).map_err(Error::InvalidTableau)?;
                ProjectiveParameters::new(params.inner_dt, params.inner_steps, params.outer_dt)?;
                let v = params.stage_violations(tableau);
                if !v.is_empty() {
                    return Err(Error::InvalidParameters(v.join("; ")));
                }
            }
        }
        Ok(())
    }

    fn projective(&self) -> Option<(&ProjectiveParameters, f64)> {
        match self {
            Method::ProjectiveEuler(p) => Some((p, 1.0)),
            Method::ProjectiveRk { tableau, params } => Some((params, tableau.min_later_node())),
            _ => None,
        }
    }

    /// Advances by `h`, which may be shorter than the nominal step.
    fn step<S: OdeSystem>(&self, sys: &S, y: &[f64], h: f64) -> Result<Vec<f64>> {
        match self {
            Method::ForwardEuler { .. } => forward_euler_step(sys, y, h),
            Method::Rk4 { .. } => rk4_step(sys, y, h),
            Method::ProjectiveEuler(p) => pfe_step(sys, y, &p.with_outer(h)),
            Method::ProjectiveRk { tableau, params } => {
                prk_step(sys, y, tableau, &params.with_outer(h))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Times at which the sink is called; values outside `[0, t_end]` are ignored.
    pub snapshot_times: Vec<f64>,
    /// Report progress to stderr every this many outer steps.
    pub progress_every: Option<usize>,
}

impl RunOptions {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            snapshot_times: vec![t_end],
            progress_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub y: Vec<f64>,
    pub time: f64,
    /// Outer steps taken, including a truncated final step.
    pub outer_steps: usize,
    /// Plain forward Euler steps used where a truncated projective step would be too short.
    pub fallback_steps: usize,
    pub rhs_evaluations: usize,
    pub elapsed: f64,
    pub method: MethodTag,
}

/// Advances `y0` from `t = 0` to `t_end`, shortening the step that would overshoot a snapshot
/// time or `t_end` so that both are hit exactly.
///
/// A shortened projective step whose stages could no longer fit their inner chains
/// (`c_min h < (K+1)δt`) is replaced by forward Euler steps of size `δt`.
pub fn integrate<S, F>(
    sys: &S,
    y0: Vec<f64>,
    method: &Method,
    opts: &RunOptions,
    mut sink: F,
) -> Result<StepperState>
where
    S: OdeSystem,
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    if !(opts.t_end >= 0.0) || !opts.t_end.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "t_end = {} must be finite and >= 0",
            opts.t_end
        )));
    }
    method.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} values, system has {}",
            y0.len(),
            sys.dim()
        )));
    }
    let counting = Counting::new(sys);
    let mut snapshots: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| (0.0..=opts.t_end).contains(t))
        .collect();
    snapshots.sort_by(f64::total_cmp);
    snapshots.dedup();
    let mut stops = snapshots.clone();
    stops.push(opts.t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut state = StepperState {
        y: y0,
        time: 0.0,
        outer_steps: 0,
        fallback_steps: 0,
        rhs_evaluations: 0,
        elapsed: 0.0,
        method: method.tag(),
    };
    let nominal = method.step_size();
    let started = std::time::Instant::now();

    for &stop in &stops {
        let tol = 1e-12 * stop.abs().max(nominal);
        while stop - state.time > tol {
            let remaining = stop - state.time;
            let truncated = remaining <= nominal * (1.0 + 1e-10);
            let h = if truncated { remaining } else { nominal };
            let step_no = state.outer_steps + 1;
            let wrap = |e: Error, time: f64| Error::Step {
                step: step_no,
                time,
                source: Box::new(e),
            };
            match method.projective() {
                Some((p, c_min)) if truncated && c_min * h < p.inner_span() => {
                    // too short for the inner chains: finish with plain inner steps
                    while stop - state.time > tol {
                        let dt = p.inner_dt.min(stop - state.time);
                        state.y = forward_euler_step(&counting, &state.y, dt)
                            .map_err(|e| wrap(e, state.time))?;
                        state.time = if dt < p.inner_dt { stop } else { state.time + dt };
                        state.fallback_steps += 1;
                    }
                }
                _ => {
                    state.y = method
                        .step(&counting, &state.y, h)
                        .map_err(|e| wrap(e, state.time))?;
                    state.time = if truncated { stop } else { state.time + h };
                    state.outer_steps += 1;
                }
            }
            if let Some(every) = opts.progress_every {
                if every > 0 && state.outer_steps % every == 0 {
                    eprintln!(
                        "step {:>6}  t = {:.6e}  rhs evaluations = {}",
                        state.outer_steps,
                        state.time,
                        counting.count()
                    );
                }
            }
        }
        state.time = stop;
        if snapshots.contains(&stop) {
            sink(stop, &state.y)?;
        }
    }
    state.rhs_evaluations = counting.count();
    state.elapsed = started.elapsed().as_secs_f64();
    Ok(state)
}
