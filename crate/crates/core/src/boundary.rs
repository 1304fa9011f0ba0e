//! Safe zones and their backward-time images.
//!
//! A safe zone is the region of the plus basin below the cap line `v = cap_v`
//! that surrounds the acceptable attractor. Its boundary is traced with
//! marching squares on the basin grid, pulled onto the stable manifold where
//! the two run together, and resampled finely. The transformed boundary is
//! the set of time-zero preimages of those samples under a transient force.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basin::{BasinGrid, Label, PhaseWindow};
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::geometry::{Polygon, SegmentIndex};
use crate::integrator::{flow, flow_backward, IntegratorSettings, TerminalStatus};
use crate::manifold::{ManifoldBranch, ManifoldCurve};
use crate::model::{State, SystemParams};

pub const DEFAULT_CAP_V: f64 = 1.0;
pub const DEFAULT_SAMPLE_STEP: f64 = 0.005;
pub const DEFAULT_DELTA_REF: f64 = 0.01;
pub const DEFAULT_MAX_DEPTH: u32 = 12;
pub const DEFAULT_MARGIN: f64 = 0.02;
/// Escaped fraction above which a transformed boundary is flagged.
pub const UNRELIABLE_ESCAPE_FRACTION: f64 = 0.01;

/// What a boundary sample was traced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Plus/minus basin interface.
    Interface,
    /// The cap line.
    Cap,
    /// The edge of the computation window.
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Mapped,
    Escaped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    AtEnd,
    AtZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub state: State,
    /// The safe-zone point this one was mapped from.
    pub origin: State,
    /// Arc-length position of `origin` along the safe-zone boundary.
    pub param: f64,
    pub status: PointStatus,
    pub source: Source,
}

/// Closed polyline; the edge from the last point back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolyline {
    pub points: Vec<BoundaryPoint>,
    pub epoch: Epoch,
    /// Perimeter of the safe-zone boundary the parameters refer to.
    pub perimeter: f64,
    pub escaped: usize,
    /// Segments still longer than the refinement threshold at the depth limit.
    pub depth_limited: usize,
}

impl BoundaryPolyline {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mapped_states(&self) -> Vec<State> {
        self.points.iter().filter(|p| p.status == PointStatus::Mapped).map(|p| p.state).collect()
    }

    pub fn escaped_fraction(&self) -> f64 {
        if self.points.is_empty() {
            0.0
        } else {
            self.escaped as f64 / self.points.len() as f64
        }
    }

    pub fn unreliable(&self) -> bool {
        self.escaped_fraction() > UNRELIABLE_ESCAPE_FRACTION
    }

    /// Polygon through the mapped points, escaped points bridged.
    pub fn polygon(&self) -> Result<Polygon> {
        Polygon::new(self.mapped_states())
    }

    /// Largest distance between consecutive mapped points.
    pub fn max_gap(&self) -> f64 {
        let pts = self.mapped_states();
        let n = pts.len();
        (0..n).map(|k| pts[k].dist(pts[(k + 1) % n])).fold(0.0, f64::max)
    }

    /// `x,v` rows of the mapped points, closed by repeating the first.
    pub fn to_csv(&self, header: &[String]) -> String {
        let pts = self.mapped_states();
        polyline_csv(header, pts.iter().chain(pts.first()))
    }
}

/// `#` comment lines, an `x,v` column line and one row per point.
pub fn polyline_csv<'a>(header: &[String], points: impl IntoIterator<Item = &'a State>) -> String {
    let mut out = String::new();
    for h in header {
        for line in h.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("x,v\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.x, p.v));
    }
    out
}

/// Reads the `x,v` rows of a polyline file written by [`polyline_csv`].
pub fn parse_polyline_csv(text: &str) -> Result<Vec<State>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "x,v" {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse { line: k + 1, msg: format!("expected x,v in {line:?}") })
        };
        let mut it = line.split(',');
        let p = State::new(parse(it.next())?, parse(it.next())?);
        if it.next().is_some() {
            return Err(Error::Parse { line: k + 1, msg: "too many columns".into() });
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeZone {
    /// Counter-clockwise, at the end of the transient.
    pub boundary: BoundaryPolyline,
    pub description: String,
    pub cap_v: f64,
    /// Number of enclosed holes left out of the boundary.
    pub holes: usize,
}

impl SafeZone {
    pub fn polygon(&self) -> Result<Polygon> {
        self.boundary.polygon()
    }

    pub fn states(&self) -> Vec<State> {
        self.boundary.mapped_states()
    }

    pub fn with_boundary(&self, points: Vec<BoundaryPoint>) -> Self {
        let mut zone = self.clone();
        zone.boundary.points = points;
        zone
    }
}

// Edge keys: (0, i, j) joins nodes (i, j)-(i+1, j); (1, i, j) joins (i, j)-(i, j+1).
type EdgeKey = (u8, usize, usize);

struct NodeField<'a> {
    grid: &'a BasinGrid,
    cap_v: f64,
}

impl NodeField<'_> {
    // Padded node lattice: node (i, j) sits at the centre of cell (i-1, j-1);
    // the outer ring lies half a cell outside the window and is always outside.
    fn dims(&self) -> (usize, usize) {
        (self.grid.window.nx + 2, self.grid.window.nv + 2)
    }

    fn is_pad(&self, i: usize, j: usize) -> bool {
        let (ni, nj) = self.dims();
        i == 0 || j == 0 || i == ni - 1 || j == nj - 1
    }

    fn pos(&self, i: usize, j: usize) -> State {
        let w = &self.grid.window;
        State::new(w.x_min + (i as f64 - 0.5) * w.dx(), w.v_min + (j as f64 - 0.5) * w.dv())
    }

    fn value(&self, i: usize, j: usize) -> f64 {
        if self.is_pad(i, j) {
            return -0.5;
        }
        let ind: f64 = if self.grid.get(i - 1, j - 1) == Label::Plus { 0.5 } else { -0.5 };
        // scaled so the cap term only bites within one cell of the line and
        // interpolates to the exact cap position there
        let cap = 0.5 * (self.cap_v - self.pos(i, j).v) / self.grid.window.dv();
        ind.min(cap)
    }

    fn nodes(&self, key: EdgeKey) -> ((usize, usize), (usize, usize)) {
        let (d, i, j) = key;
        if d == 0 {
            ((i, j), (i + 1, j))
        } else {
            ((i, j), (i, j + 1))
        }
    }

    fn vertex(&self, key: EdgeKey, values: &[f64]) -> (State, Source) {
        let (ni, _) = self.dims();
        let ((ia, ja), (ib, jb)) = self.nodes(key);
        let (fa, fb) = (values[ja * ni + ia], values[jb * ni + ib]);
        let (pa, pb) = (self.pos(ia, ja), self.pos(ib, jb));
        let s = fa / (fa - fb);
        let p = pa + (pb - pa) * s;
        let (oi, oj) = if fa > 0.0 { (ib, jb) } else { (ia, ja) };
        let source = if self.is_pad(oi, oj) {
            Source::Window
        } else if self.grid.get(oi - 1, oj - 1) != Label::Plus {
            Source::Interface
        } else {
            Source::Cap
        };
        (p, source)
    }
}

/// Closed loops of the zero set of the node field, inside on the left.
fn marching_squares(field: &NodeField<'_>) -> Vec<Vec<EdgeKey>> {
    let (ni, nj) = field.dims();
    let values: Vec<f64> = (0..nj).flat_map(|j| (0..ni).map(move |i| (i, j))).map(|(i, j)| field.value(i, j)).collect();
    let val = |i: usize, j: usize| values[j * ni + i];
    let mut next: BTreeMap<EdgeKey, EdgeKey> = BTreeMap::new();
    for j in 0..nj - 1 {
        for i in 0..ni - 1 {
            // corners counter-clockwise from bottom-left, edge k joins corner k to k+1
            let f = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let inside = f.map(|x| x > 0.0);
            let edges: [EdgeKey; 4] = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)];
            let exits: Vec<usize> = (0..4).filter(|&k| inside[k] && !inside[(k + 1) % 4]).collect();
            let entries: Vec<usize> = (0..4).filter(|&k| !inside[k] && inside[(k + 1) % 4]).collect();
            match exits.len() {
                0 => {}
                1 => {
                    next.insert(edges[exits[0]], edges[entries[0]]);
                }
                _ => {
                    let joined = f.iter().sum::<f64>() > 0.0;
                    for &k in &exits {
                        let to = if joined { (k + 1) % 4 } else { (k + 3) % 4 };
                        next.insert(edges[k], edges[to]);
                    }
                }
            }
        }
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().next() {
        let mut lp = vec![start];
        let mut cur = next.remove(&start).expect("present");
        while cur != start {
            lp.push(cur);
            cur = next.remove(&cur).expect("marching-squares contours close");
        }
        loops.push(lp);
    }
    loops
}

fn signed_area(pts: &[State]) -> f64 {
    let n = pts.len();
    (0..n).map(|k| pts[k].x * pts[(k + 1) % n].v - pts[(k + 1) % n].x * pts[k].v).sum::<f64>() * 0.5
}

/// Boundary of the plus-attractor region below `v = cap_v`.
///
/// `anchor` selects the component containing that point (normally the
/// acceptable attractor); without it the largest component is used. Interface
/// vertices lying within one cell diagonal of `branches` are moved onto them.
pub fn build_safe_zone(
    grid: &BasinGrid,
    branches: &[ManifoldBranch],
    cap_v: f64,
    anchor: Option<State>,
) -> Result<SafeZone> {
    build_safe_zone_with(grid, branches, cap_v, anchor, DEFAULT_SAMPLE_STEP)
}

pub fn build_safe_zone_with(
    grid: &BasinGrid,
    branches: &[ManifoldBranch],
    cap_v: f64,
    anchor: Option<State>,
    sample_step: f64,
) -> Result<SafeZone> {
    if !cap_v.is_finite() {
        return Err(Error::InvalidParameter(format!("cap_v {cap_v}")));
    }
    if sample_step.is_nan() || sample_step <= 0.0 {
        return Err(Error::InvalidParameter(format!("sample step {sample_step}")));
    }
    if grid.decided_fraction() < 0.99 {
        return Err(Error::InvalidParameter(format!(
            "basin grid only {:.1}% decided",
            100.0 * grid.decided_fraction()
        )));
    }
    let field = NodeField { grid, cap_v };
    let (ni, nj) = field.dims();
    let values: Vec<f64> = (0..nj).flat_map(|j| (0..ni).map(move |i| (i, j))).map(|(i, j)| field.value(i, j)).collect();
    let loops: Vec<Vec<(State, Source)>> = marching_squares(&field)
        .into_iter()
        .map(|lp| lp.into_iter().map(|k| field.vertex(k, &values)).collect())
        .collect();
    let areas: Vec<f64> = loops.iter().map(|lp| signed_area(&lp.iter().map(|v| v.0).collect::<Vec<_>>())).collect();

    let outer: Vec<usize> = (0..loops.len()).filter(|&k| areas[k] > 0.0).collect();
    let chosen = match anchor {
        Some(a) => outer
            .iter()
            .copied()
            .filter(|&k| {
                Polygon::new(loops[k].iter().map(|v| v.0).collect()).map(|p| p.contains(a)).unwrap_or(false)
            })
            .min_by(|&a, &b| areas[a].total_cmp(&areas[b])),
        None => outer.iter().copied().max_by(|&a, &b| areas[a].total_cmp(&areas[b])),
    };
    let Some(chosen) = chosen else {
        return Err(Error::EmptySafeZone);
    };
    let chosen_poly = Polygon::new(loops[chosen].iter().map(|v| v.0).collect())?;
    let holes = (0..loops.len())
        .filter(|&k| areas[k] < 0.0 && chosen_poly.contains(loops[k][0].0))
        .count();

    let snapped = snap_to_manifold(&loops[chosen], branches, grid.window.cell_diagonal(), cap_v);
    let points = resample(&snapped, sample_step);
    let perimeter = {
        let n = points.len();
        (0..n).map(|k| points[k].origin.dist(points[(k + 1) % n].origin)).sum()
    };
    let cap = if cap_v < grid.window.v_max { format!("v <= {cap_v}") } else { "no cap".to_string() };
    Ok(SafeZone {
        boundary: BoundaryPolyline { points, epoch: Epoch::AtEnd, perimeter, escaped: 0, depth_limited: 0 },
        description: format!("plus basin, {cap}"),
        cap_v,
        holes,
    })
}

fn snap_to_manifold(lp: &[(State, Source)], branches: &[ManifoldBranch], radius: f64, cap_v: f64) -> Vec<(State, Source)> {
    if branches.is_empty() {
        return lp.to_vec();
    }
    let curve = ManifoldCurve::new(branches);
    let snaps: Vec<Option<(State, f64)>> = lp
        .par_iter()
        .map(|&(p, src)| {
            if src != Source::Interface {
                return None;
            }
            let pr = curve.project(p)?;
            (pr.distance <= radius && pr.point.v <= cap_v).then_some((pr.point, pr.arc))
        })
        .collect();
    let n = lp.len();
    let mut out = Vec::with_capacity(n * 2);
    for k in 0..n {
        match snaps[k] {
            Some((q, _)) => {
                out.push((q, Source::Interface));
                if let (Some((_, a0)), Some((_, a1))) = (snaps[k], snaps[(k + 1) % n]) {
                    if (a1 - a0).abs() <= 3.0 * radius {
                        out.extend(
                            curve
                                .vertices_between(a0, a1)
                                .into_iter()
                                .filter(|m| m.v <= cap_v)
                                .map(|m| (m, Source::Interface)),
                        );
                    }
                }
            }
            None => out.push(lp[k]),
        }
    }
    out.dedup_by(|a, b| a.0 == b.0);
    while out.len() > 1 && out.first().map(|f| f.0) == out.last().map(|l| l.0) {
        out.pop();
    }
    out
}

fn resample(lp: &[(State, Source)], step: f64) -> Vec<BoundaryPoint> {
    let n = lp.len();
    let mut out = Vec::new();
    let mut param = 0.0;
    for k in 0..n {
        let (a, src) = lp[k];
        let b = lp[(k + 1) % n].0;
        let len = a.dist(b);
        let pieces = (len / step).ceil().max(1.0) as usize;
        for s in 0..pieces {
            let f = s as f64 / pieces as f64;
            let p = a.lerp(b, f);
            out.push(BoundaryPoint { state: p, origin: p, param: param + f * len, status: PointStatus::Mapped, source: src });
        }
        param += len;
    }
    out
}

/// Settings for [`map_boundary_backward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingSettings {
    pub delta_ref: f64,
    pub max_depth: u32,
}

impl Default for MappingSettings {
    fn default() -> Self {
        Self { delta_ref: DEFAULT_DELTA_REF, max_depth: DEFAULT_MAX_DEPTH }
    }
}

fn map_point<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    t_end: f64,
    settings: &IntegratorSettings,
    origin: State,
    param: f64,
    source: Source,
) -> BoundaryPoint {
    let end = flow_backward(params, forcing, origin, t_end, settings);
    let status = if end.status == TerminalStatus::ReachedFinal { PointStatus::Mapped } else { PointStatus::Escaped };
    BoundaryPoint { state: end.state, origin, param, status, source }
}

/// Time-zero preimage of the safe-zone boundary, refined until neighbouring
/// mapped points are at most `delta_ref` apart or `max_depth` bisections
/// have been spent on a segment.
pub fn map_boundary_backward<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    zone: &SafeZone,
    t_end: f64,
    settings: &IntegratorSettings,
    mapping: &MappingSettings,
) -> Result<BoundaryPolyline> {
    params.validate()?;
    settings.validate()?;
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    if mapping.delta_ref.is_nan() || mapping.delta_ref <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta_ref {}", mapping.delta_ref)));
    }
    let src = &zone.boundary.points;
    if src.len() < 3 {
        return Err(Error::DegeneratePolygon(format!("{} boundary points", src.len())));
    }
    let perimeter = zone.boundary.perimeter;
    let mapped: Vec<BoundaryPoint> = src
        .par_iter()
        .map(|p| map_point(params, forcing, t_end, settings, p.origin, p.param, p.source))
        .collect();
    let n = mapped.len();
    let pieces: Vec<(Vec<BoundaryPoint>, usize)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let a = mapped[k];
            let mut b = mapped[(k + 1) % n];
            if k + 1 == n {
                b.param += perimeter;
            }
            let mut out = vec![a];
            let mut limited = 0;
            refine(params, forcing, t_end, settings, mapping, a, b, 0, &mut out, &mut limited);
            (out, limited)
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut depth_limited = 0;
    for (seg, limited) in pieces {
        points.extend(seg);
        depth_limited += limited;
    }
    for p in &mut points {
        if p.param >= perimeter {
            p.param -= perimeter;
        }
    }
    let escaped = points.iter().filter(|p| p.status == PointStatus::Escaped).count();
    Ok(BoundaryPolyline { points, epoch: Epoch::AtZero, perimeter, escaped, depth_limited })
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    t_end: f64,
    settings: &IntegratorSettings,
    mapping: &MappingSettings,
    a: BoundaryPoint,
    b: BoundaryPoint,
    depth: u32,
    out: &mut Vec<BoundaryPoint>,
    limited: &mut usize,
) {
    if a.status != PointStatus::Mapped || b.status != PointStatus::Mapped {
        return;
    }
    if a.state.dist(b.state) <= mapping.delta_ref {
        return;
    }
    if depth >= mapping.max_depth {
        *limited += 1;
        return;
    }
    let m = map_point(params, forcing, t_end, settings, a.origin.lerp(b.origin, 0.5), 0.5 * (a.param + b.param), a.source);
    refine(params, forcing, t_end, settings, mapping, a, m, depth + 1, out, limited);
    out.push(m);
    refine(params, forcing, t_end, settings, mapping, m, b, depth + 1, out, limited);
}

/// Outcome of the forward-simulation membership check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomeomorphismCheck {
    pub tested: usize,
    pub agreed: usize,
}

impl HomeomorphismCheck {
    pub fn agreement(&self) -> f64 {
        if self.tested == 0 {
            0.0
        } else {
            self.agreed as f64 / self.tested as f64
        }
    }
}

/// Draws `n` uniform points of `window` at least `margin` away from the
/// transformed boundary and checks that membership in it matches membership
/// of the forward image at `t_end` in the safe zone.
#[allow(clippy::too_many_arguments)]
pub fn homeomorphism_check<F: Forcing>(
    params: &SystemParams,
    forcing: &F,
    zone: &Polygon,
    transformed: &Polygon,
    t_end: f64,
    window: &PhaseWindow,
    settings: &IntegratorSettings,
    n: usize,
    margin: f64,
    seed: u64,
) -> HomeomorphismCheck {
    let index = SegmentIndex::new(transformed.vertices(), true, margin.max(window.cell_diagonal()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    let mut draws = 0usize;
    while pts.len() < n && draws < 1000 * n.max(1) {
        draws += 1;
        let p = State::new(rng.gen_range(window.x_min..window.x_max), rng.gen_range(window.v_min..window.v_max));
        if index.nearest_within(p, margin).is_none() {
            pts.push(p);
        }
    }
    let agreed = pts
        .par_iter()
        .filter(|&&p| {
            let end = flow(params, forcing, p, 0.0, t_end, settings);
            let lands = end.status == TerminalStatus::ReachedFinal && zone.contains(end.state);
            lands == transformed.contains(p)
        })
        .count();
    HomeomorphismCheck { tested: pts.len(), agreed }
}

/// Points that separate the transient picture from the steady one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiscriminatingPoints {
    /// Inside the transformed boundary, outside the forced plus basin.
    pub a_like: Option<State>,
    /// Outside the transformed boundary, inside the forced plus basin.
    pub b_like: Option<State>,
}

/// Scans the cell centres of `forced` for discriminating points at least
/// `margin` away from the transformed boundary, keeping the deepest of each
/// kind. B-like points are restricted to the `initial` safe zone when given
/// and must face an interface part of the transformed boundary, so that
/// they are carried across the basin interface rather than over the cap.
pub fn find_discriminating_points(
    transformed: &BoundaryPolyline,
    forced: &BasinGrid,
    initial: Option<&Polygon>,
    margin: f64,
) -> Result<DiscriminatingPoints> {
    let mapped: Vec<&BoundaryPoint> = transformed.points.iter().filter(|p| p.status == PointStatus::Mapped).collect();
    let states: Vec<State> = mapped.iter().map(|p| p.state).collect();
    let poly = Polygon::new(states.clone())?;
    let w = forced.window;
    let index = SegmentIndex::new(&states, true, w.cell_diagonal().max(margin));
    let candidates: Vec<(usize, bool, f64)> = (0..w.nx * w.nv)
        .into_par_iter()
        .filter_map(|k| {
            let (i, j) = (k % w.nx, k / w.nx);
            let label = forced.get(i, j);
            if !label.is_attractor() {
                return None;
            }
            let c = w.center(i, j);
            if index.nearest_within(c, margin).is_some() {
                return None;
            }
            let inside = poly.contains(c);
            let (dist, seg) = index.nearest(c)?;
            if inside && label == Label::Minus {
                Some((k, true, dist))
            } else if !inside && label == Label::Plus && initial.is_none_or(|z| z.contains(c)) {
                let (a, b) = (mapped[seg], mapped[(seg + 1) % mapped.len()]);
                (a.source == Source::Interface && b.source == Source::Interface).then_some((k, false, dist))
            } else {
                None
            }
        })
        .collect();
    // deepest candidate of each kind; ties go to the lowest cell index
    let pick = |want: bool| {
        candidates
            .iter()
            .filter(|c| c.1 == want)
            .fold(None::<(usize, f64)>, |best, &(k, _, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((k, d)),
            })
            .map(|(k, _)| w.center(k % w.nx, k / w.nx))
    };
    Ok(DiscriminatingPoints { a_like: pick(true), b_like: pick(false) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(window: PhaseWindow, f: impl Fn(State) -> Label) -> BasinGrid {
        let labels = (0..window.nx * window.nv).map(|k| f(window.center(k % window.nx, k / window.nx))).collect();
        BasinGrid::from_labels(window, labels).unwrap()
    }

    fn disc_grid(r: f64) -> BasinGrid {
        let w = PhaseWindow::new(-2.0, 2.0, -2.0, 2.0, 80, 80).unwrap();
        grid_from(w, |p| if p.norm() < r { Label::Plus } else { Label::Minus })
    }

    #[test]
    fn disc_boundary_is_ccw_and_closed() {
        let zone = build_safe_zone(&disc_grid(1.0), &[], 10.0, Some(State::ORIGIN)).unwrap();
        let poly = zone.polygon().unwrap();
        assert!(poly.signed_area() > 0.0);
        assert!((poly.area() - std::f64::consts::PI).abs() < 0.05, "{}", poly.area());
        assert!(zone.boundary.max_gap() <= DEFAULT_SAMPLE_STEP * (1.0 + 1e-9));
        assert!(zone.boundary.points.iter().all(|p| p.source == Source::Interface));
        assert_eq!(zone.holes, 0);
    }

    #[test]
    fn cap_cuts_exactly() {
        let zone = build_safe_zone(&disc_grid(1.0), &[], 0.3, Some(State::ORIGIN)).unwrap();
        let cap_pts: Vec<_> = zone.boundary.points.iter().filter(|p| p.source == Source::Cap).collect();
        let on_line = cap_pts.iter().filter(|p| (p.state.v - 0.3).abs() < 1e-12).count();
        assert!(on_line > 100);
        // the rest trail off the line towards a corner
        let diag = PhaseWindow::new(-2.0, 2.0, -2.0, 2.0, 80, 80).unwrap().cell_diagonal();
        for p in &cap_pts {
            assert!(p.state.v <= 0.3 + 1e-12 && p.state.v > 0.3 - diag, "{:?}", p.state);
        }
        let top = zone.states().iter().map(|p| p.v).fold(f64::MIN, f64::max);
        assert!(top <= 0.3 + 1e-12);
    }

    #[test]
    fn window_clips_exactly() {
        let w = PhaseWindow::new(-1.0, 1.0, -1.0, 1.0, 20, 20).unwrap();
        let g = grid_from(w, |p| if p.x > 0.0 { Label::Plus } else { Label::Minus });
        let zone = build_safe_zone(&g, &[], 5.0, None).unwrap();
        let poly = zone.polygon().unwrap();
        // each of the four corners loses a triangle with half-cell legs
        let expected = 2.0 - 4.0 * w.dx() * w.dv() / 8.0;
        assert!((poly.area() - expected).abs() < 1e-9, "{}", poly.area());
        let xs: Vec<f64> = zone.states().iter().map(|p| p.x).collect();
        assert!(xs.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        assert!(zone.boundary.points.iter().any(|p| p.source == Source::Window));
    }

    #[test]
    fn empty_zones() {
        assert!(matches!(build_safe_zone(&disc_grid(1.0), &[], -1.5, None), Err(Error::EmptySafeZone)));
        assert!(matches!(
            build_safe_zone(&disc_grid(1.0), &[], 1.0, Some(State::new(1.7, 1.7))),
            Err(Error::EmptySafeZone)
        ));
    }

    #[test]
    fn anchor_selects_component_and_counts_holes() {
        let w = PhaseWindow::new(-3.0, 3.0, -1.0, 1.0, 120, 40).unwrap();
        let g = grid_from(w, |p| {
            let left = (p - State::new(-1.5, 0.0)).norm();
            let right = (p - State::new(1.2, 0.0)).norm();
            if (left < 0.9 && left > 0.3) || right < 0.5 {
                Label::Plus
            } else {
                Label::Minus
            }
        });
        let small = build_safe_zone(&g, &[], 5.0, Some(State::new(1.2, 0.0))).unwrap();
        assert!((small.polygon().unwrap().area() - std::f64::consts::PI * 0.25).abs() < 0.05);
        let big = build_safe_zone(&g, &[], 5.0, None).unwrap();
        assert_eq!(big.holes, 1);
        assert!(big.polygon().unwrap().area() > 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let zone = build_safe_zone(&disc_grid(0.5), &[], 10.0, None).unwrap();
        let text = zone.boundary.to_csv(&["safe zone".to_string(), "two\nlines".to_string()]);
        assert!(text.starts_with("# safe zone\n# two\n# lines\nx,v\n"));
        let back = parse_polyline_csv(&text).unwrap();
        let states = zone.states();
        assert_eq!(back.len(), states.len() + 1);
        assert_eq!(&back[..states.len()], &states[..]);
        assert_eq!(back.last(), states.first());
        assert!(parse_polyline_csv("1,2,3").is_err());
    }

    #[test]
    fn zero_duration_is_identity() {
        let zone = build_safe_zone(&disc_grid(1.0), &[], 0.5, None).unwrap();
        let out = map_boundary_backward(
            &SystemParams::default(),
            &crate::forcing::ForcingProfile::Zero,
            &zone,
            0.0,
            &IntegratorSettings::default(),
            &MappingSettings::default(),
        )
        .unwrap();
        assert_eq!(out.len(), zone.boundary.len());
        for (a, b) in out.points.iter().zip(&zone.boundary.points) {
            assert!(a.state.dist(b.state) <= 1e-12);
        }
        assert_eq!(out.escaped, 0);
    }

    #[test]
    fn refinement_bounds_gaps() {
        // the linear flow x' = v, v' = x stretches the boundary along (1, 1)
        let params = SystemParams { m: 1.0, c: 0.0, k1: 1.0, k2: 0.0, k3: 0.0 };
        let zone = build_safe_zone(&disc_grid(0.5), &[], 10.0, None).unwrap();
        let out = map_boundary_backward(
            &params,
            &crate::forcing::ForcingProfile::Zero,
            &zone,
            1.5,
            &IntegratorSettings::default(),
            &MappingSettings::default(),
        )
        .unwrap();
        assert_eq!(out.depth_limited, 0);
        assert!(out.max_gap() <= DEFAULT_DELTA_REF);
        assert!(out.len() > zone.boundary.len());
        // parameters stay cyclically ordered
        let turns = out.points.windows(2).filter(|w| w[1].param < w[0].param).count();
        assert_eq!(turns, 0);
        // the image is the exact linear map e^{-At}
        let t: f64 = 1.5;
        for p in &out.points {
            let (c, s) = (t.cosh(), t.sinh());
            let expected = State::new(c * p.origin.x - s * p.origin.v, -s * p.origin.x + c * p.origin.v);
            assert!(p.state.dist(expected) < 1e-6);
        }
    }
}
