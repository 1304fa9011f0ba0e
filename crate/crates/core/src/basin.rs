//! Basins of attraction of the two wells.
//!
//! Unforced (or eventually unforced) profiles are classified by waiting for
//! the trajectory to sit near one of the stable equilibria. Harmonic final
//! regimes are classified on the stroboscopic map sampled at `t = 0 mod T`,
//! against the two period-`T` fixed points obtained by settling from the
//! wells.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forcing::{Forcing, ForcingProfile, Regime};
use crate::integrator::{flow, solve, Control, IntegratorSettings, TerminalStatus};
use crate::model::{attractors, State, SystemParams};

/// Rectangular window of the phase plane sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nx: usize,
    pub nv: usize,
}

impl Default for PhaseWindow {
    fn default() -> Self {
        Self { x_min: -3.0, x_max: 3.0, v_min: -3.0, v_max: 3.0, nx: 200, nv: 200 }
    }
}

impl PhaseWindow {
    pub fn new(x_min: f64, x_max: f64, v_min: f64, v_max: f64, nx: usize, nv: usize) -> Result<Self> {
        let w = Self { x_min, x_max, v_min, v_max, nx, nv };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.v_min, self.v_max].iter().all(|c| c.is_finite());
        if !finite || self.x_min >= self.x_max || self.v_min >= self.v_max || self.nx < 2 || self.nv < 2 {
            return Err(Error::InvalidParameter(format!("phase window {self:?}")));
        }
        Ok(())
    }

    pub fn with_resolution(self, nx: usize, nv: usize) -> Self {
        Self { nx, nv, ..self }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.nv as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.dx().hypot(self.dv())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.v_max - self.v_min)
    }

    pub fn center(&self, i: usize, j: usize) -> State {
        State::new(
            self.x_min + (i as f64 + 0.5) * self.dx(),
            self.v_min + (j as f64 + 0.5) * self.dv(),
        )
    }

    pub fn contains(&self, p: State) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.v >= self.v_min && p.v <= self.v_max
    }

    /// Distance from `p` (inside) to the nearest window edge.
    pub fn edge_distance(&self, p: State) -> f64 {
        (p.x - self.x_min).min(self.x_max - p.x).min(p.v - self.v_min).min(self.v_max - p.v)
    }

    /// Cell containing `p`, if inside the window.
    pub fn cell_of(&self, p: State) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let i = (((p.x - self.x_min) / self.dx()) as usize).min(self.nx - 1);
        let j = (((p.v - self.v_min) / self.dv()) as usize).min(self.nv - 1);
        Some((i, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    Undecided = 0,
    /// Attractor with positive displacement (the acceptable one).
    Plus = 1,
    Minus = 2,
    Escaped = 3,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Label> {
        match c {
            0 => Some(Label::Undecided),
            1 => Some(Label::Plus),
            2 => Some(Label::Minus),
            3 => Some(Label::Escaped),
            _ => None,
        }
    }

    pub fn is_attractor(self) -> bool {
        matches!(self, Label::Plus | Label::Minus)
    }
}

/// Tunables of the attractor test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifySettings {
    pub eps_conv: f64,
    /// Time the state must stay near an attractor before it counts.
    pub confirm: f64,
    /// Horizon after the transient has ended.
    pub t_max: f64,
    /// Strobe periods used to settle the reference points.
    pub n_settle: usize,
    /// Beyond this distance from both reference points a settled strobe is undecided.
    pub reject_radius: f64,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self { eps_conv: 1e-3, confirm: 5.0, t_max: 200.0, n_settle: 50, reject_radius: 0.5 }
    }
}

const REFERENCE_TOL: f64 = 1e-9;
const REFERENCE_BUDGET: usize = 2000;

/// One period of the stroboscopic map at phase zero.
pub fn strobe(params: &SystemParams, harmonic: &ForcingProfile, p: State, settings: &IntegratorSettings) -> (State, TerminalStatus) {
    let period = harmonic.period().expect("harmonic profile has a period");
    let end = flow(params, harmonic, p, 0.0, period, settings);
    (end.state, end.status)
}

/// Period-`T` stroboscopic fixed points reached from the plus and minus wells.
pub fn poincare_reference_points(
    params: &SystemParams,
    profile: &ForcingProfile,
    settings: &IntegratorSettings,
    n_settle: usize,
) -> Result<(State, State)> {
    let a0 = match profile {
        ForcingProfile::Harmonic { a0, .. } => *a0,
        other => return Err(Error::InvalidParameter(format!("stroboscopic references need a harmonic profile, got {other}"))),
    };
    let (plus, minus) = attractors(params)?;
    let (plus, minus) = match (plus, minus) {
        (Some(p), Some(m)) => (p, m),
        _ => return Err(Error::InvalidParameter("system does not have two attracting wells".into())),
    };
    if a0 == 0.0 {
        return Ok((plus, minus));
    }
    let settle = |start: State| -> Result<State> {
        let mut p = start;
        for _ in 0..n_settle {
            let (next, status) = strobe(params, profile, p, settings);
            if status != TerminalStatus::ReachedFinal {
                return Err(Error::NoReference(start.x));
            }
            p = next;
        }
        for _ in 0..REFERENCE_BUDGET {
            let (next, status) = strobe(params, profile, p, settings);
            if status != TerminalStatus::ReachedFinal {
                return Err(Error::NoReference(start.x));
            }
            if next.dist(p) < REFERENCE_TOL {
                return Ok(p.lerp(next, 0.5));
            }
            p = next;
        }
        Err(Error::NoReference(start.x))
    };
    let rp = settle(plus)?;
    let rm = settle(minus)?;
    if rp.dist(rm) < 1e-6 {
        // both wells settled onto the same cycle
        return Err(Error::NoReference(minus.x));
    }
    Ok((rp, rm))
}

/// Attractor classifier bound to one system and forcing profile.
#[derive(Debug, Clone)]
pub struct Classifier {
    params: SystemParams,
    profile: ForcingProfile,
    integrator: IntegratorSettings,
    settings: ClassifySettings,
    settle_time: f64,
    targets: Targets,
}

#[derive(Debug, Clone)]
enum Targets {
    /// Equilibria of the unforced final regime.
    Fixed { plus: Option<State>, minus: Option<State> },
    /// Stroboscopic fixed points of a harmonic final regime.
    Strobe { harmonic: ForcingProfile, period: f64, plus: State, minus: State },
}

impl Classifier {
    pub fn new(
        params: &SystemParams,
        profile: &ForcingProfile,
        integrator: &IntegratorSettings,
        settings: &ClassifySettings,
    ) -> Result<Self> {
        params.validate()?;
        integrator.validate()?;
        let targets = match profile.final_regime() {
            Regime::Unforced => {
                let (plus, minus) = attractors(params)?;
                Targets::Fixed { plus, minus }
            }
            regime @ Regime::Harmonic { .. } => {
                let harmonic = regime.profile();
                let (plus, minus) = poincare_reference_points(params, &harmonic, integrator, settings.n_settle)?;
                let period = harmonic.period().expect("harmonic");
                Targets::Strobe { harmonic, period, plus, minus }
            }
        };
        Ok(Self {
            params: *params,
            profile: profile.clone(),
            integrator: *integrator,
            settings: *settings,
            settle_time: profile.settle_time(),
            targets,
        })
    }

    pub fn profile(&self) -> &ForcingProfile {
        &self.profile
    }

    /// Stroboscopic reference points, when the final regime is harmonic.
    pub fn reference_points(&self) -> Option<(State, State)> {
        match self.targets {
            Targets::Strobe { plus, minus, .. } => Some((plus, minus)),
            Targets::Fixed { .. } => None,
        }
    }

    pub fn classify(&self, ic: State) -> Label {
        if !ic.is_finite() {
            return Label::Undecided;
        }
        match &self.targets {
            Targets::Fixed { plus, minus } => self.classify_fixed(ic, *plus, *minus),
            Targets::Strobe { harmonic, period, plus, minus } => {
                self.classify_strobe(ic, harmonic, *period, *plus, *minus)
            }
        }
    }

    fn classify_fixed(&self, ic: State, plus: Option<State>, minus: Option<State>) -> Label {
        let eps = self.settings.eps_conv;
        let near = |y: State| -> Label {
            if y.v.abs() >= eps {
                return Label::Undecided;
            }
            match (plus, minus) {
                (Some(p), _) if y.dist(p) < eps => Label::Plus,
                (_, Some(m)) if y.dist(m) < eps => Label::Minus,
                _ => Label::Undecided,
            }
        };
        let mut candidate = Label::Undecided;
        let mut since = 0.0;
        let t1 = self.settle_time + self.settings.t_max;
        let confirm = self.settings.confirm;
        let settle = self.settle_time;
        let profile = &self.profile;
        let params = &self.params;
        let end = solve(
            |t, y| params.field(y, profile.force_at(t)),
            ic,
            0.0,
            t1,
            &self.integrator,
            |t, y| {
                if t < settle {
                    return Control::Continue;
                }
                let label = near(y);
                if label != candidate {
                    candidate = label;
                    since = t;
                }
                if candidate.is_attractor() && t - since >= confirm {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        );
        match end.status {
            TerminalStatus::Converged => candidate,
            TerminalStatus::Escaped => Label::Escaped,
            _ => Label::Undecided,
        }
    }

    fn classify_strobe(&self, ic: State, harmonic: &ForcingProfile, period: f64, plus: State, minus: State) -> Label {
        let s = &self.settings;
        // run the transient up to the first strobe instant after it ends
        let n_transient = (self.settle_time / period).ceil();
        let mut p = ic;
        if n_transient > 0.0 {
            let end = flow(&self.params, &self.profile, ic, 0.0, n_transient * period, &self.integrator);
            match end.status {
                TerminalStatus::ReachedFinal => p = end.state,
                TerminalStatus::Escaped => return Label::Escaped,
                _ => return Label::Undecided,
            }
        }
        let n_max = (s.t_max / period).ceil() as usize;
        let confirm = ((s.confirm / period).ceil() as usize).max(1);
        let mut run = 0usize;
        let mut candidate = Label::Undecided;
        for _ in 0..n_max {
            let (next, status) = strobe(&self.params, harmonic, p, &self.integrator);
            match status {
                TerminalStatus::ReachedFinal => p = next,
                TerminalStatus::Escaped => return Label::Escaped,
                _ => return Label::Undecided,
            }
            let label = if p.dist(plus) < s.eps_conv {
                Label::Plus
            } else if p.dist(minus) < s.eps_conv {
                Label::Minus
            } else {
                Label::Undecided
            };
            if label == candidate && label.is_attractor() {
                run += 1;
            } else {
                candidate = label;
                run = usize::from(label.is_attractor());
            }
            if run >= confirm {
                return candidate;
            }
        }
        let (dp, dm) = (p.dist(plus), p.dist(minus));
        if dp.min(dm) > s.reject_radius {
            Label::Undecided
        } else if dp <= dm {
            Label::Plus
        } else {
            Label::Minus
        }
    }

    pub fn grid(&self, window: &PhaseWindow) -> Result<BasinGrid> {
        window.validate()?;
        let labels: Vec<Label> = (0..window.nx * window.nv)
            .into_par_iter()
            .map(|k| self.classify(window.center(k % window.nx, k / window.nx)))
            .collect();
        Ok(BasinGrid { window: *window, labels })
    }
}

/// Classify one initial condition with default classifier settings and horizon `t_max`.
pub fn classify_ic(
    params: &SystemParams,
    profile: &ForcingProfile,
    ic: State,
    settings: &IntegratorSettings,
    t_max: f64,
) -> Result<Label> {
    let cs = ClassifySettings { t_max, ..ClassifySettings::default() };
    Ok(Classifier::new(params, profile, settings, &cs)?.classify(ic))
}

pub fn basin_grid(
    params: &SystemParams,
    profile: &ForcingProfile,
    window: &PhaseWindow,
    settings: &IntegratorSettings,
) -> Result<BasinGrid> {
    Classifier::new(params, profile, settings, &ClassifySettings::default())?.grid(window)
}

/// Attractor labels over a window, row-major with rows running from `v_min` to `v_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub window: PhaseWindow,
    labels: Vec<Label>,
}

impl BasinGrid {
    pub fn from_labels(window: PhaseWindow, labels: Vec<Label>) -> Result<Self> {
        window.validate()?;
        if labels.len() != window.nx * window.nv {
            return Err(Error::Format(format!(
                "{} labels for a {}x{} grid",
                labels.len(),
                window.nx,
                window.nv
            )));
        }
        Ok(Self { window, labels })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> Label {
        self.labels[j * self.window.nx + i]
    }

    /// Label of the cell containing `p`; `None` outside the window.
    pub fn label_at(&self, p: State) -> Option<Label> {
        self.window.cell_of(p).map(|(i, j)| self.get(i, j))
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn undecided_fraction(&self) -> f64 {
        self.count(Label::Undecided) as f64 / self.labels.len() as f64
    }

    pub fn decided_fraction(&self) -> f64 {
        1.0 - self.undecided_fraction()
    }

    /// Fraction of cells decided in both grids that carry the same label.
    pub fn agreement(&self, other: &BasinGrid) -> Option<f64> {
        if self.window != other.window {
            return None;
        }
        let (mut same, mut total) = (0usize, 0usize);
        for (a, b) in self.labels.iter().zip(&other.labels) {
            if *a != Label::Undecided && *b != Label::Undecided {
                total += 1;
                same += usize::from(a == b);
            }
        }
        (total > 0).then(|| same as f64 / total as f64)
    }

    /// True when the cell and its in-window 8-neighbours share one label.
    pub fn is_uniform_around(&self, i: usize, j: usize) -> bool {
        let l = self.get(i, j);
        let (nx, nv) = (self.window.nx as isize, self.window.nv as isize);
        for dj in -1..=1isize {
            for di in -1..=1isize {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a >= 0 && b >= 0 && a < nx && b < nv && self.get(a as usize, b as usize) != l {
                    return false;
                }
            }
        }
        true
    }

    /// Midpoints between 4-adjacent cells carrying different attractor labels.
    pub fn interface_points(&self) -> Vec<State> {
        let w = &self.window;
        let mut out = Vec::new();
        for j in 0..w.nv {
            for i in 0..w.nx {
                let l = self.get(i, j);
                if !l.is_attractor() {
                    continue;
                }
                if i + 1 < w.nx {
                    let r = self.get(i + 1, j);
                    if r.is_attractor() && r != l {
                        out.push(w.center(i, j).lerp(w.center(i + 1, j), 0.5));
                    }
                }
                if j + 1 < w.nv {
                    let u = self.get(i, j + 1);
                    if u.is_attractor() && u != l {
                        out.push(w.center(i, j).lerp(w.center(i, j + 1), 0.5));
                    }
                }
            }
        }
        out
    }

    /// Grid text format: a `# x_min x_max nx v_min v_max nv` line followed by
    /// `nv` rows of `nx` label codes, from `v_min` upwards.
    pub fn to_csv(&self) -> String {
        let w = &self.window;
        let mut out = String::with_capacity(w.nx * w.nv * 2 + 64);
        let _ = writeln!(out, "# {} {} {} {} {} {}", w.x_min, w.x_max, w.nx, w.v_min, w.v_max, w.nv);
        for row in self.labels.chunks(w.nx) {
            let line: Vec<String> = row.iter().map(|l| l.code().to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty grid file".into()))?;
        let fields: Vec<&str> = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse { line: 1, msg: "missing grid header".into() })?
            .split_whitespace()
            .collect();
        if fields.len() != 6 {
            return Err(Error::Parse { line: 1, msg: "grid header needs 6 fields".into() });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad number {s:?}") })
        };
        let int = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad count {s:?}") })
        };
        let window = PhaseWindow::new(
            num(fields[0])?,
            num(fields[1])?,
            num(fields[3])?,
            num(fields[4])?,
            int(fields[2])?,
            int(fields[5])?,
        )?;
        let mut labels = Vec::with_capacity(window.nx * window.nv);
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let row: Vec<Label> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u8>()
                        .ok()
                        .and_then(Label::from_code)
                        .ok_or_else(|| Error::Parse { line: lineno, msg: format!("bad label {tok:?}") })
                })
                .collect::<Result<_>>()?;
            if row.len() != window.nx {
                return Err(Error::Parse { line: lineno, msg: format!("expected {} labels", window.nx) });
            }
            labels.extend(row);
        }
        BasinGrid::from_labels(window, labels)
    }
}

/// Bucketed interface points for nearest-distance queries.
pub struct InterfaceIndex {
    window: PhaseWindow,
    buckets: Vec<Vec<State>>,
}

impl InterfaceIndex {
    pub fn new(grid: &BasinGrid) -> Self {
        let window = grid.window;
        let mut buckets = vec![Vec::new(); window.nx * window.nv];
        for p in grid.interface_points() {
            if let Some((i, j)) = window.cell_of(p) {
                buckets[j * window.nx + i].push(p);
            }
        }
        Self { window, buckets }
    }

    /// Distance to the nearest interface point within `radius`, if any.
    pub fn distance_within(&self, p: State, radius: f64) -> Option<f64> {
        let w = &self.window;
        let ci = ((p.x - w.x_min) / w.dx()).floor() as isize;
        let cj = ((p.v - w.v_min) / w.dv()).floor() as isize;
        let ri = (radius / w.dx()).ceil() as isize + 1;
        let rj = (radius / w.dv()).ceil() as isize + 1;
        let mut best: Option<f64> = None;
        for j in (cj - rj)..=(cj + rj) {
            for i in (ci - ri)..=(ci + ri) {
                if i < 0 || j < 0 || i >= w.nx as isize || j >= w.nv as isize {
                    continue;
                }
                for q in &self.buckets[j as usize * w.nx + i as usize] {
                    let d = p.dist(*q);
                    if d <= radius && best.is_none_or(|b| d < b) {
                        best = Some(d);
                    }
                }
            }
        }
        best
    }
}
