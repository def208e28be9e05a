//! Adaptive integration of the Bloch–Hamilton system with event detection.
//!
//! Trajectories are advanced with an explicit embedded Dormand–Prince
//! 8(5,3) pair. Two event functions are watched on the dense interpolant:
//! `cos x` (standing-wave node crossings) and `x` restricted to downward
//! crossings with `p < 0` (exit through the origin). Both conserved
//! quantities are checked after every accepted step.

mod dop853;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    bloch_norm_sq, energy, field, field_jacobian_apply, AtomState, ControlParams, DynamicsError,
    TangentVector,
};
pub use dop853::OdeSystem;
use dop853::{Dense, Dop853};

/// Width of the bracketing interval left by event bisection, in τ.
pub const EVENT_TAU_TOLERANCE: f64 = 1e-9;

/// Energy drift is measured relative to `max(|H0|, ENERGY_SCALE_FLOOR)`.
pub const ENERGY_SCALE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub invariant_abort_threshold: f64,
    pub t_max: f64,
    /// Output cadence in τ; `None` stores no samples.
    pub sample_interval: Option<f64>,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_step: 1.0,
            invariant_abort_threshold: 1e-6,
            t_max: 1e4,
            sample_interval: None,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        let checks = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("invariant_abort_threshold", self.invariant_abort_threshold),
            ("t_max", self.t_max),
            ("sample_interval", self.sample_interval.unwrap_or(1.0)),
        ];
        for (field, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(IntegrateError::InvalidSettings { field, value });
            }
        }
        Ok(())
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Self { t_max, ..self }
    }

    /// Both tolerances scaled by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    NodeCrossing,
    ExitCrossing,
    InvariantDrift,
    HorizonReached,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::NodeCrossing => "NodeCrossing",
            EventKind::ExitCrossing => "ExitCrossing",
            EventKind::InvariantDrift => "InvariantDrift",
            EventKind::HorizonReached => "HorizonReached",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub tau: f64,
    pub state: AtomState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<(f64, AtomState)>,
    pub events: Vec<Event>,
    pub final_tau: f64,
    pub final_state: AtomState,
    pub termination: EventKind,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// Largest `|u²+v²+z² − n0|` seen at step ends.
    pub max_norm_drift: f64,
    /// Largest relative energy drift seen at step ends.
    pub max_energy_drift: f64,
}

impl TrajectoryRecord {
    pub fn exit_event(&self) -> Option<&Event> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::ExitCrossing)
    }

    pub fn node_crossings(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::NodeCrossing)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator setting `{field}` = {value}")]
    InvalidSettings { field: &'static str, value: f64 },
    #[error("invalid initial state: {0}")]
    InvalidInitialState(#[from] DynamicsError),
    #[error("zero initial tangent vector")]
    ZeroTangent,
    #[error(
        "conserved quantities drifted past threshold at tau = {tau}: \
         energy {energy_drift:e}, Bloch norm {norm_drift:e}"
    )]
    InvariantDrift {
        tau: f64,
        energy_drift: f64,
        norm_drift: f64,
        record: Box<TrajectoryRecord>,
    },
    #[error("step size collapsed to {h:e} at tau = {tau}")]
    StepUnderflow { tau: f64, h: f64 },
}

/// The 5-dimensional Bloch–Hamilton flow.
pub struct AtomSystem {
    pub params: ControlParams,
}

impl OdeSystem<5> for AtomSystem {
    #[inline]
    fn eval(&self, y: &[f64; 5], dy: &mut [f64; 5]) {
        field(y, &self.params, dy);
    }
}

/// The flow augmented with one tangent vector: `(s, t)' = (f(s), J(s) t)`.
pub struct TangentSystem {
    pub params: ControlParams,
}

impl OdeSystem<10> for TangentSystem {
    #[inline]
    fn eval(&self, y: &[f64; 10], dy: &mut [f64; 10]) {
        let (s, t) = y.split_at(5);
        let (ds, dt) = dy.split_at_mut(5);
        field(s, &self.params, ds);
        field_jacobian_apply(s, t, &self.params, dt);
    }
}

/// Finds `t` in `[a, b]` with `g(a)` and `g(b)` of opposite sign (or
/// `g(b) = 0`) by bisection down to [`EVENT_TAU_TOLERANCE`].
fn bisect(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let ga = g(a);
    if g(b) == 0.0 {
        return b;
    }
    let positive_left = ga > 0.0;
    while b - a > 0.5 * EVENT_TAU_TOLERANCE {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == positive_left {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Initial states must be finite and on the Bloch sphere to within the
/// drift that the integrator itself tolerates, so that integrated states
/// can be fed back in (e.g. for time-reversal checks).
fn check_initial_state(s: &AtomState, tolerance: f64) -> Result<(), DynamicsError> {
    for (field, value) in [("x", s.x), ("p", s.p), ("u", s.u), ("v", s.v), ("z", s.z)] {
        if !value.is_finite() {
            return Err(DynamicsError::NonFinite { field });
        }
    }
    let deviation = (bloch_norm_sq(s) - 1.0).abs();
    if deviation > tolerance {
        return Err(DynamicsError::NotUnitBloch { deviation });
    }
    Ok(())
}

fn crosses(g_old: f64, g_new: f64) -> bool {
    (g_old > 0.0 && g_new <= 0.0) || (g_old < 0.0 && g_new >= 0.0)
}

fn head(y: &[f64]) -> AtomState {
    AtomState::from_array([y[0], y[1], y[2], y[3], y[4]])
}

struct Sampler {
    interval: Option<f64>,
    next: u64,
    t_max: f64,
}

impl Sampler {
    fn pending_before(&self, t: f64) -> bool {
        self.interval
            .is_some_and(|dt| self.next as f64 * dt <= t.min(self.t_max))
    }

    /// Emits all cadence points up to `t_end`, excluding `t_end` itself
    /// unless `inclusive`.
    fn emit_until(
        &mut self,
        record: &mut TrajectoryRecord,
        t_end: f64,
        inclusive: bool,
        interp: &dyn Fn(f64) -> AtomState,
    ) {
        let Some(dt) = self.interval else { return };
        loop {
            let ts = self.next as f64 * dt;
            if ts > t_end || (!inclusive && ts == t_end) || ts > self.t_max {
                break;
            }
            record.samples.push((ts, interp(ts)));
            self.next += 1;
        }
    }
}

struct Outcome {
    record: TrajectoryRecord,
    log_growth: f64,
    renorm_count: u64,
}

/// Shared driver for the plain and tangent-augmented systems. When
/// `renorm_interval` is set, components `5..N` are a tangent vector that is
/// rescaled to unit length at every multiple of the interval.
fn drive<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    y0: [f64; N],
    c: &ControlParams,
    cfg: &IntegratorSettings,
    stop_on_exit: bool,
    renorm_interval: Option<f64>,
) -> Result<Outcome, IntegrateError> {
    cfg.validate()?;
    c.validate()?;
    let s0 = head(&y0);
    check_initial_state(&s0, cfg.invariant_abort_threshold)?;

    let mut record = TrajectoryRecord {
        samples: Vec::new(),
        events: Vec::new(),
        final_tau: 0.0,
        final_state: s0,
        termination: EventKind::HorizonReached,
        accepted_steps: 0,
        rejected_steps: 0,
        max_norm_drift: 0.0,
        max_energy_drift: 0.0,
    };
    let mut log_growth = 0.0;
    let mut renorm_count = 0;

    let mut sampler = Sampler {
        interval: cfg.sample_interval,
        next: 0,
        t_max: cfg.t_max,
    };

    if stop_on_exit && s0.x == 0.0 && s0.p < 0.0 {
        sampler.emit_until(&mut record, 0.0, true, &|_| s0);
        record.events.push(Event {
            kind: EventKind::ExitCrossing,
            tau: 0.0,
            state: s0,
        });
        record.termination = EventKind::ExitCrossing;
        return Ok(Outcome {
            record,
            log_growth,
            renorm_count,
        });
    }

    let h0 = energy(&s0, c);
    let energy_scale = h0.abs().max(ENERGY_SCALE_FLOOR);
    let n0 = bloch_norm_sq(&s0);

    let mut solver = Dop853::new(sys, y0, 0.0, cfg.rel_tol, cfg.abs_tol, cfg.max_step);
    let mut renorm_index: u64 = 1;
    let next_renorm = |k: u64| renorm_interval.map_or(f64::INFINITY, |dt| k as f64 * dt);

    sampler.emit_until(&mut record, 0.0, true, &|_| s0);

    loop {
        let t_limit = cfg.t_max.min(next_renorm(renorm_index));
        solver
            .step(sys, t_limit)
            .map_err(|e| IntegrateError::StepUnderflow { tau: e.t, h: e.h })?;
        let (t_old, y_old) = {
            let (t, y) = solver.previous().expect("accepted step");
            (t, *y)
        };
        let t_new = solver.t();
        let y_new = *solver.y();

        let node = crosses(y_old[0].cos(), y_new[0].cos());
        let exit = stop_on_exit && y_old[0] > 0.0 && y_new[0] <= 0.0;
        let wants_samples = sampler.pending_before(t_new);

        let mut exit_at: Option<(f64, AtomState)> = None;
        if node || exit || wants_samples {
            let dense: Dense<'_, N> = solver.dense(sys).expect("dense output");
            let interp = |t: f64| head(&dense.eval(t));
            let mut step_events = Vec::new();
            if exit {
                let tau = bisect(t_old, t_new, |t| dense.eval_component(t, 0));
                let state = interp(tau);
                if state.p < 0.0 {
                    exit_at = Some((tau, state));
                }
            }
            if node {
                let tau = bisect(t_old, t_new, |t| dense.eval_component(t, 0).cos());
                if exit_at.is_none_or(|(te, _)| tau <= te) {
                    step_events.push(Event {
                        kind: EventKind::NodeCrossing,
                        tau,
                        state: interp(tau),
                    });
                }
            }
            match exit_at {
                Some((tau, state)) => {
                    sampler.emit_until(&mut record, tau, false, &interp);
                    step_events.push(Event {
                        kind: EventKind::ExitCrossing,
                        tau,
                        state,
                    });
                }
                None => sampler.emit_until(&mut record, t_new, true, &interp),
            }
            step_events.sort_by(|a, b| a.tau.total_cmp(&b.tau));
            record.events.extend(step_events);
        }

        record.accepted_steps = solver.accepted;
        record.rejected_steps = solver.rejected;

        if let Some((tau, state)) = exit_at {
            record.final_tau = tau;
            record.final_state = state;
            record.termination = EventKind::ExitCrossing;
            break;
        }

        let s_new = head(&y_new);
        let norm_drift = (bloch_norm_sq(&s_new) - n0).abs();
        let energy_drift = (energy(&s_new, c) - h0).abs() / energy_scale;
        record.max_norm_drift = record.max_norm_drift.max(norm_drift);
        record.max_energy_drift = record.max_energy_drift.max(energy_drift);
        record.final_tau = t_new;
        record.final_state = s_new;
        if norm_drift > cfg.invariant_abort_threshold
            || energy_drift > cfg.invariant_abort_threshold
        {
            record.events.push(Event {
                kind: EventKind::InvariantDrift,
                tau: t_new,
                state: s_new,
            });
            record.termination = EventKind::InvariantDrift;
            return Err(IntegrateError::InvariantDrift {
                tau: t_new,
                energy_drift,
                norm_drift,
                record: Box::new(record),
            });
        }

        if renorm_interval.is_some() && (t_new == next_renorm(renorm_index) || t_new >= cfg.t_max) {
            let mut y = y_new;
            let norm = y[5..].iter().map(|v| v * v).sum::<f64>().sqrt();
            log_growth += norm.ln();
            renorm_count += 1;
            for v in &mut y[5..] {
                *v /= norm;
            }
            solver.reset_state(sys, y);
            if t_new == next_renorm(renorm_index) {
                renorm_index += 1;
            }
        }

        if t_new >= cfg.t_max {
            record.events.push(Event {
                kind: EventKind::HorizonReached,
                tau: t_new,
                state: s_new,
            });
            record.termination = EventKind::HorizonReached;
            break;
        }
    }

    Ok(Outcome {
        record,
        log_growth,
        renorm_count,
    })
}

/// Integrates from `s0` until the horizon `cfg.t_max`, or until the first
/// exit crossing when `stop_on_exit` is set.
///
/// An atom starting at `x = 0` with `p < 0` has already exited: the record
/// holds a single `ExitCrossing` at `τ = 0`.
pub fn integrate(
    s0: &AtomState,
    c: &ControlParams,
    cfg: &IntegratorSettings,
    stop_on_exit: bool,
) -> Result<TrajectoryRecord, IntegrateError> {
    let sys = AtomSystem { params: *c };
    drive(&sys, s0.to_array(), c, cfg, stop_on_exit, None).map(|o| o.record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentOutcome {
    pub record: TrajectoryRecord,
    /// Sum of `ln ‖t‖` over all renormalizations.
    pub log_growth: f64,
    pub renorm_count: u64,
}

/// Co-integrates the tangent-linear system along the trajectory of `s0`
/// up to `cfg.t_max`, renormalizing the tangent every `renorm_interval`.
/// The tangent is also renormalized at the horizon, so `log_growth` covers
/// the whole interval even when the horizon is not a multiple of the
/// renormalization interval.
pub fn integrate_with_tangent(
    s0: &AtomState,
    t0: &TangentVector,
    c: &ControlParams,
    cfg: &IntegratorSettings,
    renorm_interval: f64,
) -> Result<TangentOutcome, IntegrateError> {
    if !(renorm_interval.is_finite() && renorm_interval > 0.0) {
        return Err(IntegrateError::InvalidSettings {
            field: "renorm_interval",
            value: renorm_interval,
        });
    }
    let norm = t0.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(IntegrateError::ZeroTangent);
    }
    let mut y0 = [0.0; 10];
    y0[..5].copy_from_slice(&s0.to_array());
    // start from a unit tangent so ln‖t‖ accumulates growth only
    for (dst, src) in y0[5..].iter_mut().zip(t0.0) {
        *dst = src / norm;
    }
    let sys = TangentSystem { params: *c };
    drive(&sys, y0, c, cfg, false, Some(renorm_interval)).map(|o| TangentOutcome {
        record: o.record,
        log_growth: o.log_growth,
        renorm_count: o.renorm_count,
    })
}
