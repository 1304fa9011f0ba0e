//! Stable manifold of the saddle at the origin.
//!
//! Each branch is grown by shooting from a point just off the saddle along
//! the stable eigenvector and integrating the unforced field in reverse
//! time. The reversed field is normalised to unit speed so the integration
//! variable is arc length and samples come out evenly spaced.

use crate::basin::{BasinGrid, InterfaceIndex, PhaseWindow};
use crate::error::{Error, Result};
use crate::integrator::{solve, Control, IntegratorSettings, TerminalStatus};
use crate::model::{fixed_points, FixedPointKind, State, SystemParams};

pub const DEFAULT_SEED_OFFSET: f64 = 1e-6;
pub const DEFAULT_ARC_CAP: f64 = 40.0;
pub const DEFAULT_ARC_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Seeded at `saddle + eps * e`, where `e` has positive x-component.
    EigPlus,
    EigMinus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldBranch {
    pub side: Side,
    /// From the seed outwards.
    pub points: Vec<State>,
}

impl ManifoldBranch {
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Unit stable eigenvector at the origin, with positive x-component.
pub fn stable_eigvector(params: &SystemParams) -> Result<State> {
    let origin = fixed_points(params)?
        .into_iter()
        .find(|f| f.location.x == 0.0)
        .expect("the origin is always an equilibrium");
    if origin.kind != FixedPointKind::Saddle {
        return Err(Error::WrongKind { x: 0.0, kind: origin.kind.to_string() });
    }
    let lambda_s = origin.eigenvalues[1].re;
    let e = State::new(1.0, lambda_s);
    Ok(e * (1.0 / e.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSettings {
    pub seed_offset: f64,
    pub arc_cap: f64,
    pub arc_step: f64,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self { seed_offset: DEFAULT_SEED_OFFSET, arc_cap: DEFAULT_ARC_CAP, arc_step: DEFAULT_ARC_STEP }
    }
}

fn grow_branch(
    params: &SystemParams,
    settings: &IntegratorSettings,
    window: &PhaseWindow,
    seed: State,
    side: Side,
    ms: &ManifoldSettings,
) -> Result<ManifoldBranch> {
    let field = |_: f64, y: State| {
        let f = -params.field(y, 0.0);
        let n = f.norm();
        if n > 0.0 {
            f * (1.0 / n)
        } else {
            State::ORIGIN
        }
    };
    let mut points = vec![seed];
    let mut y = seed;
    let mut arc = 0.0;
    while arc < ms.arc_cap {
        let step = ms.arc_step.min(ms.arc_cap - arc);
        let end = solve(field, y, 0.0, step, settings, |_, _| Control::Continue);
        if end.status != TerminalStatus::ReachedFinal || !window.contains(end.state) {
            break;
        }
        y = end.state;
        arc += step;
        points.push(y);
    }
    if points.len() < 2 {
        return Err(Error::SeedTooLarge(ms.seed_offset));
    }
    Ok(ManifoldBranch { side, points })
}

/// Both branches, `[EigPlus, EigMinus]`, clipped to `window` and capped at `arc_cap`.
pub fn stable_manifold(
    params: &SystemParams,
    settings: &IntegratorSettings,
    window: &PhaseWindow,
    arc_cap: f64,
) -> Result<[ManifoldBranch; 2]> {
    let ms = ManifoldSettings { arc_cap, ..ManifoldSettings::default() };
    stable_manifold_with(params, settings, window, &ms)
}

pub fn stable_manifold_with(
    params: &SystemParams,
    settings: &IntegratorSettings,
    window: &PhaseWindow,
    ms: &ManifoldSettings,
) -> Result<[ManifoldBranch; 2]> {
    settings.validate()?;
    if !(ms.seed_offset > 0.0 && ms.arc_step > 0.0 && ms.arc_cap > 0.0) {
        return Err(Error::InvalidParameter(format!("manifold settings {ms:?}")));
    }
    let e = stable_eigvector(params)?;
    let seed = e * ms.seed_offset;
    if !window.contains(seed) || !window.contains(-seed) {
        return Err(Error::SeedTooLarge(ms.seed_offset));
    }
    let (plus, minus) = rayon::join(
        || grow_branch(params, settings, window, seed, Side::EigPlus, ms),
        || grow_branch(params, settings, window, -seed, Side::EigMinus, ms),
    );
    Ok([plus?, minus?])
}

/// The whole manifold as one polyline through the saddle, parametrised by
/// signed arc length (negative along the `EigMinus` branch).
#[derive(Debug, Clone)]
pub struct ManifoldCurve {
    points: Vec<State>,
    arc: Vec<f64>,
}

/// Closest point of a [`ManifoldCurve`] to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: State,
    pub arc: f64,
    pub distance: f64,
}

impl ManifoldCurve {
    pub fn new(branches: &[ManifoldBranch]) -> Self {
        let plus = branches.iter().find(|b| b.side == Side::EigPlus);
        let minus = branches.iter().find(|b| b.side == Side::EigMinus);
        let mut points: Vec<State> = minus.map(|b| b.points.iter().rev().copied().collect()).unwrap_or_default();
        let n_minus = points.len();
        points.push(State::ORIGIN);
        if let Some(b) = plus {
            points.extend(b.points.iter().copied());
        }
        let mut arc = vec![0.0; points.len()];
        for k in (0..n_minus).rev() {
            arc[k] = arc[k + 1] - points[k].dist(points[k + 1]);
        }
        for k in n_minus + 1..points.len() {
            arc[k] = arc[k - 1] + points[k].dist(points[k - 1]);
        }
        Self { points, arc }
    }

    pub fn points(&self) -> &[State] {
        &self.points
    }

    pub fn project(&self, p: State) -> Option<Projection> {
        let mut best: Option<Projection> = None;
        for (k, w) in self.points.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len2 = d.dot(d);
            let s = if len2 > 0.0 { ((p - w[0]).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = w[0] + d * s;
            let dist = p.dist(q);
            if best.is_none_or(|b| dist < b.distance) {
                best = Some(Projection { point: q, arc: self.arc[k] + s * (self.arc[k + 1] - self.arc[k]), distance: dist });
            }
        }
        best
    }

    /// Curve vertices with arc parameter strictly between `a` and `b`, in the order `a -> b`.
    pub fn vertices_between(&self, a: f64, b: f64) -> Vec<State> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let start = self.arc.partition_point(|&s| s <= lo);
        let stop = self.arc.partition_point(|&s| s < hi);
        let mut out: Vec<State> = self.points[start..stop.max(start)].to_vec();
        if a > b {
            out.reverse();
        }
        out
    }
}

/// Fraction of the manifold's arc length (inside the window) lying within
/// one cell diagonal of the grid's plus/minus interface.
pub fn interface_tracking(branches: &[ManifoldBranch], grid: &BasinGrid) -> f64 {
    let index = InterfaceIndex::new(grid);
    let w = grid.window;
    let radius = w.cell_diagonal();
    let (mut total, mut near) = (0.0, 0.0);
    for b in branches {
        for seg in b.points.windows(2) {
            let mid = seg[0].lerp(seg[1], 0.5);
            if !w.contains(mid) {
                continue;
            }
            let len = seg[0].dist(seg[1]);
            total += len;
            if index.distance_within(mid, radius).is_some() {
                near += len;
            }
        }
    }
    if total > 0.0 {
        near / total
    } else {
        0.0
    }
}
