//! Detector worldlines in a 1+1 dimensional flat spacetime (c = 1).
//!
//! A segment is either inertial (at rest at `x0`) or uniformly accelerated
//! with proper acceleration `a`, starting at rest from `(t0, x0)`:
//!
//! ```text
//! t(τ) = t0 + sinh(aτ)/a
//! x(τ) = x0 + (cosh(aτ) - 1)/a
//! ```
//!
//! A negative `a` accelerates towards `-x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this value of |aτ| the closed forms switch to their Taylor series.
const SERIES_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Inertial,
    UniformAcceleration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub kind: SegmentKind,
    /// Proper acceleration (1/time). Ignored for inertial segments.
    pub acceleration: f64,
    pub x0: f64,
    pub t0: f64,
    /// Proper-time length of the segment.
    pub duration: f64,
}

/// A point on the worldline in lab coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
}

impl TrajectorySegment {
    pub fn inertial(x0: f64, duration: f64) -> Result<Self> {
        Self::new(SegmentKind::Inertial, 0.0, x0, 0.0, duration)
    }

    /// Uniformly accelerated segment starting at rest at `(0, x0)`.
    pub fn accelerated(acceleration: f64, x0: f64, duration: f64) -> Result<Self> {
        Self::new(SegmentKind::UniformAcceleration, acceleration, x0, 0.0, duration)
    }

    pub fn new(
        kind: SegmentKind,
        acceleration: f64,
        x0: f64,
        t0: f64,
        duration: f64,
    ) -> Result<Self> {
        let seg = Self {
            kind,
            acceleration: match kind {
                SegmentKind::Inertial => 0.0,
                SegmentKind::UniformAcceleration => acceleration,
            },
            x0,
            t0,
            duration,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.acceleration, self.x0, self.t0, self.duration]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("trajectory parameters must be finite".into()));
        }
        if self.duration < 0.0 {
            return Err(Error::Domain(format!(
                "segment duration must be non-negative, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    /// Signed proper acceleration; zero for inertial segments.
    pub fn proper_acceleration(&self) -> f64 {
        match self.kind {
            SegmentKind::Inertial => 0.0,
            SegmentKind::UniformAcceleration => self.acceleration,
        }
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(0.0..=self.duration).contains(&tau) {
            return Err(Error::Domain(format!(
                "proper time {tau} outside segment [0, {}]",
                self.duration
            )));
        }
        Ok(())
    }

    /// Lab-frame event at proper time `tau`.
    pub fn position(&self, tau: f64) -> Result<Event> {
        self.check_tau(tau)?;
        Ok(self.event_unchecked(tau))
    }

    /// Same as [`position`](Self::position) without the domain check; used
    /// on hot paths where `tau` is already known to lie in the segment.
    pub(crate) fn event_unchecked(&self, tau: f64) -> Event {
        let a = self.proper_acceleration();
        let u = a * tau;
        if u.abs() < SERIES_THRESHOLD {
            let u2 = u * u;
            Event {
                t: self.t0 + tau * (1.0 + u2 / 6.0 + u2 * u2 / 120.0),
                x: self.x0 + 0.5 * u * tau * (1.0 + u2 / 12.0 + u2 * u2 / 360.0),
            }
        } else {
            let half = (0.5 * u).sinh();
            Event {
                t: self.t0 + u.sinh() / a,
                x: self.x0 + 2.0 * half * half / a,
            }
        }
    }

    /// Coordinate velocity dx/dt.
    pub fn velocity(&self, tau: f64) -> Result<f64> {
        self.check_tau(tau)?;
        Ok((self.proper_acceleration() * tau).tanh())
    }

    /// dt/dτ = cosh(aτ).
    pub fn time_dilation(&self, tau: f64) -> f64 {
        (self.proper_acceleration() * tau).cosh()
    }

    /// |dx/dτ| = |sinh(aτ)|.
    pub fn proper_speed(&self, tau: f64) -> f64 {
        (self.proper_acceleration() * tau).sinh().abs()
    }

    /// The same worldline cut to a different proper-time length.
    pub fn with_duration(&self, duration: f64) -> Self {
        Self { duration, ..*self }
    }

    /// Event at the end of the segment.
    pub fn end(&self) -> Event {
        self.event_unchecked(self.duration)
    }

    /// First proper time at which the worldline reaches a wall of `[0, length]`,
    /// if it does so at all. Assumes the segment starts inside the interval.
    pub fn exit_time(&self, length: f64) -> Option<f64> {
        let a = self.proper_acceleration();
        if a == 0.0 {
            return None;
        }
        // distance to the wall ahead
        let gap = if a > 0.0 { length - self.x0 } else { self.x0 };
        if gap < 0.0 {
            return Some(0.0);
        }
        Some((1.0 + a.abs() * gap).acosh() / a.abs())
    }

    /// A segment that starts where this one ends, with the given motion.
    /// Inter-segment continuity is in position and coordinate time only;
    /// each segment starts at rest in its own frame.
    pub fn chain(&self, kind: SegmentKind, acceleration: f64, duration: f64) -> Result<Self> {
        let end = self.end();
        Self::new(kind, acceleration, end.x, end.t, duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Detector gap as an SI angular frequency, rad/s.
    pub omega_si: f64,
}

/// An acceleration in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiAcceleration {
    pub meters_per_second2: f64,
    pub in_g: f64,
}

impl UnitSystem {
    pub fn new(omega_si: f64) -> Result<Self> {
        if !(omega_si > 0.0 && omega_si.is_finite()) {
            return Err(Error::Domain(format!(
                "gap angular frequency must be positive, got {omega_si}"
            )));
        }
        Ok(Self { omega_si })
    }

    /// Gap given as an ordinary frequency in Hz, i.e. Ω/2π.
    pub fn from_gap_hz(hz: f64) -> Result<Self> {
        Self::new(2.0 * std::f64::consts::PI * hz)
    }
}

/// Converts a natural-unit acceleration to SI using `ã = a Ω c / π`.
pub fn natural_to_si_acceleration(a_natural: f64, units: UnitSystem) -> SiAcceleration {
    let si = a_natural * units.omega_si * SPEED_OF_LIGHT / std::f64::consts::PI;
    SiAcceleration {
        meters_per_second2: si,
        in_g: si / STANDARD_GRAVITY,
    }
}
