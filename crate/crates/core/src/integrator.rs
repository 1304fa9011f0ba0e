//! Adaptive Runge-Kutta-Fehlberg 4(5) integration.
//!
//! The fifth-order solution is propagated and the difference to the embedded
//! fourth-order solution drives the step size. Steps are accepted when the
//! RMS of the component errors, each scaled by `abs_tol + rel_tol * |y|`, is
//! at most one.

use crate::error::{Error, Result};
use crate::forcing::{reverse, Forcing};
use crate::model::{State, SystemParams};

/// Fehlberg tableau.
mod fehlberg {
    pub const C: [f64; 6] = [0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0];

    pub const A: [[f64; 5]; 6] = [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
        [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
        [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
        [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
    ];

    pub const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

    pub const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Budget of attempted (accepted or rejected) steps.
    pub max_steps: u64,
    /// States with phase-plane norm above this are reported as escaped.
    pub guard_radius: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.1,
            max_steps: 10_000_000,
            guard_radius: 50.0,
        }
    }
}

impl IntegratorSettings {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rel_tol: tol, abs_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.h_min > 0.0
            && self.h_min <= self.h_init
            && self.h_init <= self.h_max
            && self.h_max.is_finite()
            && self.guard_radius > 0.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("integrator settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalStatus {
    ReachedFinal,
    /// The step observer asked to stop (used for attractor detection).
    Converged,
    Escaped,
    StepLimit,
}

/// Observer verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub t: f64,
    pub state: State,
    pub status: TerminalStatus,
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(t, state)` at the initial condition and every accepted step.
    pub points: Vec<(f64, State)>,
    pub status: TerminalStatus,
}

impl Trajectory {
    pub fn last(&self) -> (f64, State) {
        *self.points.last().expect("trajectory holds the initial condition")
    }

    pub fn final_state(&self) -> State {
        self.last().1
    }
}

#[inline]
fn error_norm(y: State, y_new: State, err: State, s: &IntegratorSettings) -> f64 {
    let sx = s.abs_tol + s.rel_tol * y.x.abs().max(y_new.x.abs());
    let sv = s.abs_tol + s.rel_tol * y.v.abs().max(y_new.v.abs());
    let ex = err.x / sx;
    let ev = err.v / sv;
    ((ex * ex + ev * ev) / 2.0).sqrt()
}

/// One Fehlberg step: returns the fifth-order update and the 5-minus-4 error.
#[inline]
fn fehlberg_step<F: Fn(f64, State) -> State>(field: &F, t: f64, y: State, h: f64) -> (State, State) {
    use fehlberg::*;
    let mut k = [State::ORIGIN; 6];
    k[0] = field(t, y);
    for i in 1..6 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            if A[i][j] != 0.0 {
                yi += *kj * (h * A[i][j]);
            }
        }
        k[i] = field(t + C[i] * h, yi);
    }
    let mut y5 = y;
    let mut err = State::ORIGIN;
    for i in 0..6 {
        y5 += k[i] * (h * B5[i]);
        err += k[i] * (h * (B5[i] - B4[i]));
    }
    (y5, err)
}

/// Integrates `y' = field(t, y)` from `t0` to `t1` (`t1 >= t0`), landing
/// exactly on `t1`. `observer` sees the initial condition and every
/// accepted step; returning [`Control::Stop`] ends the run with
/// [`TerminalStatus::Converged`].
pub fn solve<F, O>(field: F, ic: State, t0: f64, t1: f64, settings: &IntegratorSettings, mut observer: O) -> Endpoint
where
    F: Fn(f64, State) -> State,
    O: FnMut(f64, State) -> Control,
{
    let mut end = Endpoint { t: t0, state: ic, status: TerminalStatus::ReachedFinal, accepted: 0, rejected: 0 };
    if !ic.is_finite() || ic.norm() > settings.guard_radius {
        end.status = TerminalStatus::Escaped;
        return end;
    }
    if observer(t0, ic) == Control::Stop {
        end.status = TerminalStatus::Converged;
        return end;
    }
    let mut t = t0;
    let mut y = ic;
    let mut h = settings.h_init.min(settings.h_max);
    let mut attempts: u64 = 0;

    while t < t1 {
        if attempts >= settings.max_steps {
            end.status = TerminalStatus::StepLimit;
            break;
        }
        attempts += 1;
        let remaining = t1 - t;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };

        let (y_new, err) = fehlberg_step(&field, t, y, h_try);
        let norm = error_norm(y, y_new, err, settings);
        let factor = if norm == 0.0 {
            MAX_FACTOR
        } else if norm.is_finite() {
            (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        } else {
            MIN_FACTOR
        };

        if norm <= 1.0 {
            t = if last { t1 } else { t + h_try };
            y = y_new;
            end.accepted += 1;
            if !y.is_finite() || y.norm() > settings.guard_radius {
                end.status = TerminalStatus::Escaped;
                break;
            }
            if observer(t, y) == Control::Stop {
                end.status = TerminalStatus::Converged;
                break;
            }
            h = (h_try * factor).clamp(settings.h_min, settings.h_max);
        } else {
            end.rejected += 1;
            if h_try <= settings.h_min {
                end.status = TerminalStatus::StepLimit;
                break;
            }
            h = (h_try * factor).max(settings.h_min);
        }
    }
    end.t = t;
    end.state = y;
    end
}

/// Endpoint of the forced flow from `t0` to `t1`.
pub fn flow<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    ic: State,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Endpoint {
    solve(|t, y| params.field(y, forcing.force_at(t)), ic, t0, t1, settings, |_, _| Control::Continue)
}

/// Endpoint of the reversed flow `dy/dtau = -f(y, t_end - tau)` over
/// `tau in [0, t_end]`: the time-0 preimage of a state given at `t_end`.
pub fn flow_backward<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    ic: State,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Endpoint {
    let rev = reverse(forcing, t_end);
    solve(
        |tau, y| -params.field(y, rev.force_at(tau)),
        ic,
        0.0,
        t_end,
        settings,
        |_, _| Control::Continue,
    )
}

fn check_inputs(ic: State, t0: f64, t1: f64, settings: &IntegratorSettings) -> Result<()> {
    ic.check_finite()?;
    settings.validate()?;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::InvalidParameter(format!("time interval [{t0}, {t1}]")));
    }
    Ok(())
}

fn record<F>(field: F, ic: State, t0: f64, t1: f64, settings: &IntegratorSettings) -> Trajectory
where
    F: Fn(f64, State) -> State,
{
    let mut points = Vec::new();
    let end = solve(field, ic, t0, t1, settings, |t, y| {
        points.push((t, y));
        Control::Continue
    });
    if points.last().map(|p| p.0) != Some(end.t) {
        // the escaping step is not seen by the observer
        points.push((end.t, end.state));
    }
    Trajectory { points, status: end.status }
}

/// Forward integration recording every accepted step.
pub fn integrate<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    ic: State,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_inputs(ic, t0, t1, settings)?;
    Ok(record(|t, y| params.field(y, forcing.force_at(t)), ic, t0, t1, settings))
}

/// Reversed-time integration from `t_end` back to `0`; trajectory times are
/// reversed time `tau = t_end - t`, so the final entry is the time-0 preimage.
pub fn integrate_backward<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    ic: State,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    check_inputs(ic, 0.0, t_end, settings)?;
    let rev = reverse(forcing, t_end);
    Ok(record(|tau, y| -params.field(y, rev.force_at(tau)), ic, 0.0, t_end, settings))
}
