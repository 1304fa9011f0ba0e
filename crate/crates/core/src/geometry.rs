//! Polygon membership, sampled overlap areas and the danger index.
//!
//! Membership uses the even-odd crossing rule. A horizontal ray is cast to
//! the right and an edge counts when it straddles the ray half-open in `v`
//! (`vi > py` differs from `vj > py`) and the crossing lies strictly to the
//! right of the query point. Points on left and bottom edges of an axis
//! aligned square are therefore inside, points on right and top edges are
//! outside.

use rayon::prelude::*;

use crate::basin::PhaseWindow;
use crate::error::{Error, Result};
use crate::model::State;

pub const DEFAULT_AREA_SAMPLES: usize = 1_000_000;

/// Simple closed polygon; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<State>,
}

impl Polygon {
    /// Accepts open or explicitly closed vertex lists.
    pub fn new(mut vertices: Vec<State>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let poly = Polygon { vertices };
        if poly.signed_area() == 0.0 {
            return Err(Error::DegeneratePolygon("zero area".into()));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[State] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (State, State)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.x * b.v - b.x * a.v).sum::<f64>() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bounds(&self) -> (State, State) {
        let mut lo = self.vertices[0];
        let mut hi = lo;
        for p in &self.vertices {
            lo = State::new(lo.x.min(p.x), lo.v.min(p.v));
            hi = State::new(hi.x.max(p.x), hi.v.max(p.v));
        }
        (lo, hi)
    }

    pub fn contains(&self, p: State) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if let Some(xc) = crossing_x(a, b, p.v) {
                if p.x < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Crossing abscissae of the horizontal line `v = py`, sorted.
    fn crossings(&self, py: f64) -> Vec<f64> {
        let mut xs: Vec<f64> = self.edges().filter_map(|(a, b)| crossing_x(a, b, py)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Shortest distance from `p` to the polygon's edges.
    pub fn boundary_distance(&self, p: State) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(State) -> State) -> Result<Self> {
        Polygon::new(self.vertices.iter().map(|&p| f(p)).collect())
    }
}

#[inline]
fn crossing_x(a: State, b: State, py: f64) -> Option<f64> {
    if (a.v > py) != (b.v > py) {
        Some((b.x - a.x) * (py - a.v) / (b.v - a.v) + a.x)
    } else {
        None
    }
}

pub fn point_in_polygon(poly: &Polygon, p: State) -> bool {
    poly.contains(p)
}

pub fn segment_distance(p: State, a: State, b: State) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    let s = if len2 > 0.0 { ((p - a).dot(d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + d * s)
}

/// Bucketed segment lookup for repeated distance queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segments: Vec<(State, State)>,
    origin: State,
    cell: f64,
    nx: usize,
    nv: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    /// Segments of `points` taken cyclically when `closed`.
    pub fn new(points: &[State], closed: bool, cell: f64) -> Self {
        let mut segments: Vec<(State, State)> = points.windows(2).map(|w| (w[0], w[1])).collect();
        if closed && points.len() > 2 {
            segments.push((points[points.len() - 1], points[0]));
        }
        let mut lo = State::new(f64::INFINITY, f64::INFINITY);
        let mut hi = State::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = State::new(lo.x.min(p.x), lo.v.min(p.v));
            hi = State::new(hi.x.max(p.x), hi.v.max(p.v));
        }
        if points.is_empty() {
            lo = State::ORIGIN;
            hi = State::ORIGIN;
        }
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).min(4096);
        let nv = (((hi.v - lo.v) / cell).floor() as usize + 1).min(4096);
        let cell = cell.max((hi.x - lo.x) / nx as f64).max((hi.v - lo.v) / nv as f64);
        let mut index = SegmentIndex { segments: Vec::new(), origin: lo, cell, nx, nv, buckets: vec![Vec::new(); nx * nv] };
        for (k, &(a, b)) in segments.iter().enumerate() {
            let (i0, j0) = index.bucket(State::new(a.x.min(b.x), a.v.min(b.v)));
            let (i1, j1) = index.bucket(State::new(a.x.max(b.x), a.v.max(b.v)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    index.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        index.segments = segments;
        index
    }

    fn bucket(&self, p: State) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.v - self.origin.v) / self.cell).floor().clamp(0.0, (self.nv - 1) as f64) as usize;
        (i, j)
    }

    pub fn segments(&self) -> &[(State, State)] {
        &self.segments
    }

    /// Closest segment within `radius`, as `(distance, segment index)`.
    pub fn nearest_within(&self, p: State, radius: f64) -> Option<(f64, usize)> {
        let (i0, j0) = self.bucket(p - State::new(radius, radius));
        let (i1, j1) = self.bucket(p + State::new(radius, radius));
        let mut best: Option<(f64, usize)> = None;
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &k in &self.buckets[j * self.nx + i] {
                    let (a, b) = self.segments[k as usize];
                    let d = segment_distance(p, a, b);
                    let better = match best {
                        None => true,
                        Some((bd, bk)) => d < bd || (d == bd && (k as usize) < bk),
                    };
                    if d <= radius && better {
                        best = Some((d, k as usize));
                    }
                }
            }
        }
        best
    }

    /// Closest segment overall.
    pub fn nearest(&self, p: State) -> Option<(f64, usize)> {
        if self.segments.is_empty() {
            return None;
        }
        let mut r = self.cell;
        loop {
            if let Some(hit) = self.nearest_within(p, r) {
                return Some(hit);
            }
            r *= 2.0;
            if r > 1e6 * self.cell.max(1.0) {
                return None;
            }
        }
    }
}

/// Result of a sampled area computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub area: f64,
    /// No lattice sample fell in both polygons.
    pub empty: bool,
    pub hits: u64,
    pub hits_a: u64,
    pub hits_b: u64,
    pub samples: u64,
}

/// Side of the square sample lattice used for roughly `n_samples` points.
pub fn lattice_side(n_samples: usize) -> usize {
    ((n_samples as f64).sqrt().ceil() as usize).max(1)
}

/// Estimates `|a ∩ b|` from a stratified lattice of cell-centre samples
/// covering `window`.
pub fn overlap_area(a: &Polygon, b: &Polygon, window: &PhaseWindow, n_samples: usize) -> Overlap {
    let n = lattice_side(n_samples);
    let dx = (window.x_max - window.x_min) / n as f64;
    let dv = (window.v_max - window.v_min) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| window.x_min + (i as f64 + 0.5) * dx).collect();
    let (hits, hits_a, hits_b) = (0..n)
        .into_par_iter()
        .map(|j| {
            let py = window.v_min + (j as f64 + 0.5) * dv;
            let ca = a.crossings(py);
            let cb = b.crossings(py);
            let (mut both, mut in_a, mut in_b) = (0u64, 0u64, 0u64);
            for &px in &xs {
                // crossings strictly to the right of px
                let ra = ca.len() - ca.partition_point(|&c| c <= px);
                let rb = cb.len() - cb.partition_point(|&c| c <= px);
                let (ia, ib) = (ra % 2 == 1, rb % 2 == 1);
                in_a += u64::from(ia);
                in_b += u64::from(ib);
                both += u64::from(ia && ib);
            }
            (both, in_a, in_b)
        })
        .reduce(|| (0, 0, 0), |x, y| (x.0 + y.0, x.1 + y.1, x.2 + y.2));
    let samples = (n * n) as u64;
    Overlap {
        area: hits as f64 / samples as f64 * window.area(),
        empty: hits == 0,
        hits,
        hits_a,
        hits_b,
        samples,
    }
}

/// `1 - |I ∩ T| / |I|` for the initial safe zone `I` and the transformed
/// region `T`, both measured on the same sample lattice.
pub fn danger_index(initial: &Polygon, transformed: &Polygon, window: &PhaseWindow, n_samples: usize) -> Result<f64> {
    let o = overlap_area(initial, transformed, window, n_samples);
    if o.hits_a == 0 {
        return Err(Error::UndefinedIndex);
    }
    Ok(1.0 - o.hits as f64 / o.hits_a as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x0: f64, v0: f64, side: f64) -> Polygon {
        Polygon::new(vec![
            State::new(x0, v0),
            State::new(x0 + side, v0),
            State::new(x0 + side, v0 + side),
            State::new(x0, v0 + side),
        ])
        .unwrap()
    }

    fn winding_number(poly: &Polygon, p: State) -> i32 {
        let is_left = |a: State, b: State| (b.x - a.x) * (p.v - a.v) - (p.x - a.x) * (b.v - a.v);
        let mut wn = 0;
        for (a, b) in poly.edges() {
            if a.v <= p.v {
                if b.v > p.v && is_left(a, b) > 0.0 {
                    wn += 1;
                }
            } else if b.v <= p.v && is_left(a, b) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    #[test]
    fn unit_square_membership() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(sq.contains(State::new(0.5, 0.5)));
        assert!(!sq.contains(State::new(2.0, 0.0)));
        assert!(!sq.contains(State::new(1.0, 0.5)));
        assert!(!sq.contains(State::new(0.5, 1.0)));
        assert!(sq.contains(State::new(0.0, 0.5)));
        assert!(sq.contains(State::new(0.5, 0.0)));
    }

    #[test]
    fn degenerate_polygons() {
        assert!(Polygon::new(vec![State::new(0.0, 0.0), State::new(1.0, 0.0)]).is_err());
        let line = vec![State::new(0.0, 0.0), State::new(1.0, 1.0), State::new(2.0, 2.0)];
        assert!(Polygon::new(line).is_err());
        let closed = vec![State::new(0.0, 0.0), State::new(1.0, 0.0), State::new(0.0, 1.0), State::new(0.0, 0.0)];
        assert_eq!(Polygon::new(closed).unwrap().len(), 3);
    }

    #[test]
    fn overlap_examples() {
        let w = PhaseWindow::new(-1.0, 3.0, -1.0, 3.0, 10, 10).unwrap();
        let a = square(0.0, 0.0, 1.0);
        let same = overlap_area(&a, &a, &w, DEFAULT_AREA_SAMPLES);
        assert!((same.area - 1.0).abs() < 0.02 && !same.empty);
        let far = square(2.0, 2.0, 1.0);
        let none = overlap_area(&a, &far, &w, DEFAULT_AREA_SAMPLES);
        assert_eq!(none.area, 0.0);
        assert!(none.empty);
        let half = square(0.5, 0.0, 1.0);
        let o = overlap_area(&a, &half, &w, DEFAULT_AREA_SAMPLES);
        assert!((o.area - 0.5).abs() < 0.01);
    }

    #[test]
    fn convex_self_overlap_ratio() {
        let w = PhaseWindow::new(-2.0, 2.0, -2.0, 2.0, 10, 10).unwrap();
        let hex: Vec<State> = (0..6)
            .map(|k| {
                let th = k as f64 * std::f64::consts::PI / 3.0 + 0.1;
                State::new(1.3 * th.cos(), 0.9 * th.sin())
            })
            .collect();
        let hex = Polygon::new(hex).unwrap();
        let o = overlap_area(&hex, &hex, &w, DEFAULT_AREA_SAMPLES);
        let r = o.area / hex.area();
        assert!((0.98..=1.02).contains(&r), "{r}");
    }

    #[test]
    fn danger_examples() {
        let w = PhaseWindow::new(-1.0, 3.0, -1.0, 3.0, 10, 10).unwrap();
        let a = square(0.0, 0.0, 1.0);
        assert_eq!(danger_index(&a, &a, &w, 10_000).unwrap(), 0.0);
        assert_eq!(danger_index(&a, &square(2.0, 2.0, 1.0), &w, 10_000).unwrap(), 1.0);
        let outside = square(10.0, 10.0, 1.0);
        assert!(matches!(danger_index(&outside, &a, &w, 10_000), Err(Error::UndefinedIndex)));
    }

    #[test]
    fn danger_is_scale_invariant() {
        let w = PhaseWindow::new(-1.0, 3.0, -1.0, 3.0, 10, 10).unwrap();
        let a = Polygon::new(vec![State::new(0.1, 0.0), State::new(1.7, 0.4), State::new(0.6, 1.9)]).unwrap();
        let b = square(0.5, 0.3, 1.2);
        let d = danger_index(&a, &b, &w, 250_000).unwrap();
        for s in [2.0, 0.25, 3.0] {
            let w2 = PhaseWindow::new(-s, 3.0 * s, -s, 3.0 * s, 10, 10).unwrap();
            let a2 = a.map(|p| p * s).unwrap();
            let b2 = b.map(|p| p * s).unwrap();
            let d2 = danger_index(&a2, &b2, &w2, 250_000).unwrap();
            assert!((d - d2).abs() < 1e-3, "scale {s}: {d} vs {d2}");
        }
    }

    #[test]
    fn segment_index_matches_brute_force() {
        let pts: Vec<State> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.05;
                State::new(t.cos() * (1.0 + 0.1 * t), t.sin() * (1.0 + 0.1 * t))
            })
            .collect();
        let idx = SegmentIndex::new(&pts, true, 0.1);
        let poly = Polygon::new(pts.clone()).unwrap();
        for k in 0..300 {
            let p = State::new((k as f64 * 0.37).sin() * 2.5, (k as f64 * 0.71).cos() * 2.5);
            let (d, _) = idx.nearest(p).unwrap();
            assert!((d - poly.boundary_distance(p)).abs() < 1e-12);
            match idx.nearest_within(p, 0.2) {
                Some((d2, _)) => assert!((d2 - d).abs() < 1e-12),
                None => assert!(d > 0.2),
            }
        }
    }

    fn star_polygon() -> impl Strategy<Value = Polygon> {
        (3usize..24, prop::collection::vec((0.0f64..1.0, 0.2f64..2.0), 24), -1.0f64..1.0, -1.0f64..1.0).prop_map(
            |(n, raw, cx, cv)| {
                let mut angles: Vec<(f64, f64)> = raw[..n].to_vec();
                angles.sort_by(|a, b| a.0.total_cmp(&b.0));
                let verts = angles
                    .iter()
                    .enumerate()
                    .map(|(k, &(u, r))| {
                        // keep angles strictly increasing so the polygon stays simple
                        let th = (k as f64 + u) / n as f64 * std::f64::consts::TAU;
                        State::new(cx + r * th.cos(), cv + r * th.sin())
                    })
                    .collect();
                Polygon::new(verts).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn even_odd_matches_winding_number(poly in star_polygon(), px in -3.0f64..3.0, pv in -3.0f64..3.0) {
            let p = State::new(px, pv);
            prop_assert_eq!(poly.contains(p), winding_number(&poly, p) != 0);
        }
    }
}
