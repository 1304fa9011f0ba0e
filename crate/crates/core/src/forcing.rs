//! External excitations `a(t) p(t)` and their time reversal.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ingest::Accelerogram;

/// Anything that yields a scalar force at time `t`.
pub trait Forcing: Sync {
    fn force_at(&self, t: f64) -> f64;
}

impl<F: Forcing + ?Sized> Forcing for &F {
    fn force_at(&self, t: f64) -> f64 {
        (**self).force_at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampDirection {
    /// `a0` before the ramp, zero after.
    Off,
    /// Zero before the ramp, `a0` after.
    On,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingProfile {
    Zero,
    /// `a0 cos(omega t)`
    Harmonic { a0: f64, omega: f64 },
    /// `a(t) cos(omega t)` with `a` ramped linearly over `[0, t_end]`.
    Ramp { a0: f64, omega: f64, t_end: f64, direction: RampDirection },
    /// `scale * A(t)`, `A` interpolated linearly and zero outside its support.
    Accelerogram { record: Arc<Accelerogram>, scale: f64 },
}

/// The steady system a profile settles into once its transient is over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Unforced,
    Harmonic { a0: f64, omega: f64 },
}

fn check_harmonic(a0: f64, omega: f64) -> Result<()> {
    if !a0.is_finite() {
        return Err(Error::InvalidParameter(format!("amplitude {a0}")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    Ok(())
}

impl ForcingProfile {
    pub fn harmonic(a0: f64, omega: f64) -> Result<Self> {
        check_harmonic(a0, omega)?;
        Ok(ForcingProfile::Harmonic { a0, omega })
    }

    pub fn ramp(a0: f64, omega: f64, t_end: f64, direction: RampDirection) -> Result<Self> {
        check_harmonic(a0, omega)?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
        }
        Ok(ForcingProfile::Ramp { a0, omega, t_end, direction })
    }

    /// Linear switch-off from `a0` to zero over `[0, t_end]`.
    pub fn switching_off(a0: f64, omega: f64, t_end: f64) -> Result<Self> {
        Self::ramp(a0, omega, t_end, RampDirection::Off)
    }

    pub fn switching_on(a0: f64, omega: f64, t_end: f64) -> Result<Self> {
        Self::ramp(a0, omega, t_end, RampDirection::On)
    }

    pub fn accelerogram(record: Arc<Accelerogram>, scale: f64) -> Result<Self> {
        if record.is_empty() {
            return Err(Error::MissingData);
        }
        if !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("scale {scale}")));
        }
        Ok(ForcingProfile::Accelerogram { record, scale })
    }

    /// Ramp amplitude `a(t)`; `a0` for the steady harmonic, zero otherwise.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        match *self {
            ForcingProfile::Harmonic { a0, .. } => a0,
            ForcingProfile::Ramp { a0, t_end, direction, .. } => {
                // fraction of the ramp still to go
                let remaining = if t < 0.0 {
                    1.0
                } else if t >= t_end {
                    0.0
                } else {
                    1.0 - t / t_end
                };
                match direction {
                    RampDirection::Off => a0 * remaining,
                    RampDirection::On => a0 * (1.0 - remaining),
                }
            }
            _ => 0.0,
        }
    }

    /// Time after which the profile coincides with its final steady regime.
    pub fn settle_time(&self) -> f64 {
        match self {
            ForcingProfile::Zero | ForcingProfile::Harmonic { .. } => 0.0,
            ForcingProfile::Ramp { t_end, .. } => *t_end,
            ForcingProfile::Accelerogram { record, .. } => record.end().max(0.0),
        }
    }

    /// The steady regime in force for `t > settle_time()`.
    pub fn final_regime(&self) -> Regime {
        match *self {
            ForcingProfile::Harmonic { a0, omega } if a0 != 0.0 => Regime::Harmonic { a0, omega },
            ForcingProfile::Ramp { a0, omega, direction: RampDirection::On, .. } if a0 != 0.0 => {
                Regime::Harmonic { a0, omega }
            }
            _ => Regime::Unforced,
        }
    }

    /// The steady regime in force for `t < 0`.
    pub fn initial_regime(&self) -> Regime {
        match *self {
            ForcingProfile::Harmonic { a0, omega } if a0 != 0.0 => Regime::Harmonic { a0, omega },
            ForcingProfile::Ramp { a0, omega, direction: RampDirection::Off, .. } if a0 != 0.0 => {
                Regime::Harmonic { a0, omega }
            }
            _ => Regime::Unforced,
        }
    }

    /// Period of the harmonic carrier, if any.
    pub fn period(&self) -> Option<f64> {
        match *self {
            ForcingProfile::Harmonic { omega, .. } | ForcingProfile::Ramp { omega, .. } => Some(TAU / omega),
            _ => None,
        }
    }
}

impl Forcing for ForcingProfile {
    fn force_at(&self, t: f64) -> f64 {
        match self {
            ForcingProfile::Zero => 0.0,
            ForcingProfile::Harmonic { a0, omega } => a0 * (omega * t).cos(),
            ForcingProfile::Ramp { omega, .. } => self.amplitude_at(t) * (omega * t).cos(),
            ForcingProfile::Accelerogram { record, scale } => scale * record.value_at(t),
        }
    }
}

impl fmt::Display for ForcingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingProfile::Zero => write!(f, "zero"),
            ForcingProfile::Harmonic { a0, omega } => write!(f, "harmonic a0={a0} omega={omega}"),
            ForcingProfile::Ramp { a0, omega, t_end, direction } => {
                let d = match direction {
                    RampDirection::Off => "switching-off",
                    RampDirection::On => "switching-on",
                };
                write!(f, "{d} a0={a0} omega={omega} t_end={t_end}")
            }
            ForcingProfile::Accelerogram { record, scale } => write!(
                f,
                "accelerogram scale={scale} duration={} source={}",
                record.duration(),
                record.source.replace('\n', " ")
            ),
        }
    }
}

impl Regime {
    pub fn profile(self) -> ForcingProfile {
        match self {
            Regime::Unforced => ForcingProfile::Zero,
            Regime::Harmonic { a0, omega } => ForcingProfile::Harmonic { a0, omega },
        }
    }
}

/// `inner` evaluated at `t_end - tau`: the excitation seen when running the
/// clock backwards from `t_end`.
#[derive(Debug, Clone)]
pub struct TimeReversedForcing<F> {
    pub inner: F,
    pub t_end: f64,
}

impl<F: Forcing> Forcing for TimeReversedForcing<F> {
    fn force_at(&self, tau: f64) -> f64 {
        self.inner.force_at(self.t_end - tau)
    }
}

pub fn reverse<F: Forcing>(inner: F, t_end: f64) -> TimeReversedForcing<F> {
    TimeReversedForcing { inner, t_end }
}
