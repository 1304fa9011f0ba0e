//! The two-well oscillator
//!
//! ```text
//! m x'' + c x' - k1 x + k2 x^2 + k3 x^3 = F(t)
//! ```
//!
//! in first-order form `x' = v`, `v' = (F - c v + k1 x - k2 x^2 - k3 x^3) / m`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point of the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub v: f64,
}

impl State {
    pub const ORIGIN: State = State { x: 0.0, v: 0.0 };

    pub const fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.v)
    }

    pub fn dist(self, other: State) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: State) -> f64 {
        self.x * other.x + self.v * other.v
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }

    pub fn lerp(self, other: State, s: f64) -> State {
        self + (other - self) * s
    }

    pub(crate) fn check_finite(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::InvalidState(format!("({}, {})", self.x, self.v)))
        }
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.x + o.x, self.v + o.v)
    }
}

impl AddAssign for State {
    fn add_assign(&mut self, o: State) {
        self.x += o.x;
        self.v += o.v;
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.x - o.x, self.v - o.v)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.x, -self.v)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State::new(self.x * s, self.v * s)
    }
}

/// Oscillator constants. Defaults are `m = 1, c = 0.25, k1 = k2 = k3 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub m: f64,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            m: 1.0,
            c: 0.25,
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.c, self.k1, self.k2, self.k3];
        if all.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite system parameter".into()));
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.m)));
        }
        if self.c < 0.0 {
            return Err(Error::InvalidParameter(format!("damping must be >= 0, got {}", self.c)));
        }
        Ok(())
    }

    /// Restoring force `k1 x - k2 x^2 - k3 x^3`.
    #[inline]
    pub fn restoring(&self, x: f64) -> f64 {
        x * (self.k1 - x * (self.k2 + self.k3 * x))
    }

    /// Unchecked vector field; the integrator's hot path.
    #[inline]
    pub fn field(&self, s: State, force: f64) -> State {
        State::new(s.v, (force - self.c * s.v + self.restoring(s.x)) / self.m)
    }

    /// Potential `V(x) = -k1 x^2/2 + k2 x^3/3 + k3 x^4/4`.
    pub fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        -self.k1 * x2 / 2.0 + self.k2 * x2 * x / 3.0 + self.k3 * x2 * x2 / 4.0
    }

    /// `k1 - 2 k2 x - 3 k3 x^2`, i.e. `m` times the derivative of `v'` in `x`.
    pub fn effective_stiffness(&self, x: f64) -> f64 {
        self.k1 - 2.0 * self.k2 * x - 3.0 * self.k3 * x * x
    }

    /// Eigenvalues of the Jacobian `[[0, 1], [s/m, -c/m]]` at displacement `x`,
    /// ordered with the larger real part (or positive imaginary part) first.
    pub fn eigenvalues_at(&self, x: f64) -> [Complex64; 2] {
        let trace = -self.c / self.m;
        let det = -self.effective_stiffness(x) / self.m;
        let disc = trace * trace - 4.0 * det;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Avoid cancellation in the smaller-magnitude root.
            let q = 0.5 * (trace + trace.signum_or_one() * sq);
            let (r1, r2) = if q != 0.0 { (q, det / q) } else { (0.0, 0.0) };
            let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
            [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
        } else {
            let im = 0.5 * (-disc).sqrt();
            let re = 0.5 * trace;
            [Complex64::new(re, im), Complex64::new(re, -im)]
        }
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixedPointKind {
    Saddle,
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    CenterDegenerate,
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FixedPointKind::Saddle => "saddle",
            FixedPointKind::StableNode => "stable-node",
            FixedPointKind::StableFocus => "stable-focus",
            FixedPointKind::UnstableNode => "unstable-node",
            FixedPointKind::UnstableFocus => "unstable-focus",
            FixedPointKind::CenterDegenerate => "center-degenerate",
        };
        f.write_str(s)
    }
}

impl FixedPointKind {
    pub fn is_attracting(self) -> bool {
        matches!(self, FixedPointKind::StableNode | FixedPointKind::StableFocus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointInfo {
    pub location: State,
    pub eigenvalues: [Complex64; 2],
    pub kind: FixedPointKind,
}

fn classify(params: &SystemParams, x: f64) -> FixedPointKind {
    let trace = -params.c / params.m;
    let det = -params.effective_stiffness(x) / params.m;
    if det < 0.0 {
        return FixedPointKind::Saddle;
    }
    if det == 0.0 || trace == 0.0 {
        return FixedPointKind::CenterDegenerate;
    }
    let disc = trace * trace - 4.0 * det;
    match (trace < 0.0, disc >= 0.0) {
        (true, true) => FixedPointKind::StableNode,
        (true, false) => FixedPointKind::StableFocus,
        (false, true) => FixedPointKind::UnstableNode,
        (false, false) => FixedPointKind::UnstableFocus,
    }
}

/// Checked vector field evaluation.
pub fn rhs(params: &SystemParams, state: State, force_value: f64) -> Result<State> {
    state.check_finite()?;
    if !force_value.is_finite() {
        return Err(Error::InvalidState(format!("force value {force_value}")));
    }
    Ok(params.field(state, force_value))
}

/// Real roots of `k3 x^2 + k2 x - k1 = 0`, the non-zero branch of the
/// equilibrium cubic `x (k3 x^2 + k2 x - k1) = 0`.
fn quadratic_branch(params: &SystemParams) -> Vec<f64> {
    let (a, b, c) = (params.k3, params.k2, -params.k1);
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum_or_one() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// All real equilibria, sorted by displacement.
pub fn fixed_points(params: &SystemParams) -> Result<Vec<FixedPointInfo>> {
    params.validate()?;
    if params.k1 == 0.0 && params.k2 == 0.0 && params.k3 == 0.0 {
        return Err(Error::DegenerateSystem);
    }
    let mut xs = quadratic_branch(params);
    xs.push(0.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(xs
        .into_iter()
        .map(|x| FixedPointInfo {
            location: State::new(x, 0.0),
            eigenvalues: params.eigenvalues_at(x),
            kind: classify(params, x),
        })
        .collect())
}

/// The two attracting equilibria, `(plus, minus)` by sign of displacement.
pub fn attractors(params: &SystemParams) -> Result<(Option<State>, Option<State>)> {
    let fps = fixed_points(params)?;
    let plus = fps
        .iter()
        .filter(|f| f.kind.is_attracting() && f.location.x > 0.0)
        .map(|f| f.location)
        .next();
    let minus = fps
        .iter()
        .rev()
        .filter(|f| f.kind.is_attracting() && f.location.x < 0.0)
        .map(|f| f.location)
        .next();
    Ok((plus, minus))
}

/// Total mechanical energy `m v^2 / 2 + V(x)`.
pub fn energy(params: &SystemParams, state: State) -> Result<f64> {
    state.check_finite()?;
    Ok(0.5 * params.m * state.v * state.v + params.potential(state.x))
}
