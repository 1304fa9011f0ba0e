use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use crate::basin::{BasinGrid, Classifier, Label};
use crate::boundary::{
    build_safe_zone, find_discriminating_points, homeomorphism_check, map_boundary_backward, polyline_csv,
    BoundaryPolyline, DiscriminatingPoints, HomeomorphismCheck, SafeZone,
};
use crate::forcing::{ForcingProfile, Regime};
use crate::geometry::{danger_index, overlap_area, Overlap, Polygon};
use crate::integrator::integrate;
use crate::manifold::{stable_manifold, ManifoldBranch, Side};
use crate::model::{attractors, fixed_points, State};
use crate::svg::Svg;

use super::config::{RunConfig, SweepParam};
use super::{CliError, Command};

/// Margin kept between --verify samples and the transformed boundary.
const VERIFY_MARGIN: f64 = 0.05;

pub(super) fn dispatch(cmd: &Command, cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    match cmd {
        Command::FixedPoints => fixed_points_cmd(cfg, out),
        Command::Basin => basin_cmd(cfg, out),
        Command::Manifold => manifold_cmd(cfg, out),
        Command::SafeZone => safe_zone_cmd(cfg, out),
        Command::MapBoundary => map_boundary_cmd(cfg, out),
        Command::Simulate { .. } => simulate_cmd(cfg, out),
        Command::Sweep { .. } => sweep_cmd(cfg, out),
        Command::IngestCheck => ingest_cmd(cfg, out),
    }
}

fn write_file(cfg: &RunConfig, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(cfg.out.clone(), e))?;
    let path = cfg.out.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
    Ok(path)
}

fn write_run_cfg(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let mut text = format!("# safezone {command}\n");
    for line in cfg.header_lines() {
        text.push_str(&line);
        text.push('\n');
    }
    write_file(cfg, "run.cfg", &text)?;
    Ok(())
}

fn header(cfg: &RunConfig, first: &[String]) -> Vec<String> {
    first.iter().cloned().chain(cfg.header_lines()).collect()
}

fn fmt_state(p: State) -> String {
    format!("{},{}", p.x, p.v)
}

fn fixed_points_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let p = &cfg.params;
    let fps = fixed_points(p)?;
    let _ = writeln!(out, "# fixed points for m={} c={} k1={} k2={} k3={}", p.m, p.c, p.k1, p.k2, p.k3);
    let _ = writeln!(out, "x,re_lambda1,im_lambda1,re_lambda2,im_lambda2,kind");
    for f in fps {
        let [l1, l2] = f.eigenvalues;
        let _ = writeln!(out, "{},{},{},{},{},{}", f.location.x, l1.re, l1.im, l2.re, l2.im, f.kind);
    }
    Ok(())
}

fn regime_for(cfg: &RunConfig) -> Regime {
    if cfg.forced && cfg.a0 != 0.0 {
        Regime::Harmonic { a0: cfg.a0, omega: cfg.omega }
    } else {
        Regime::Unforced
    }
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Unforced => "unforced",
        Regime::Harmonic { .. } => "forced",
    }
}

fn basin_svg(grid: &BasinGrid) -> Svg {
    let mut svg = Svg::new(grid.window);
    svg.cells(grid, Label::Plus, "#303030");
    svg.cells(grid, Label::Undecided, "#d04040");
    svg
}

fn basin_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let regime = regime_for(cfg);
    let profile = regime.profile();
    let classifier = Classifier::new(&cfg.params, &profile, &cfg.integrator(), &cfg.classify())?;
    let grid = classifier.grid(&cfg.window)?;
    let name = if regime == Regime::Unforced { "basin" } else { "basin_forced" };
    let path = write_file(cfg, &format!("{name}.csv"), &grid.to_csv())?;
    write_run_cfg(cfg, "basin")?;
    let _ = writeln!(out, "profile = {profile}");
    if let Some((rp, rm)) = classifier.reference_points() {
        let _ = writeln!(out, "reference_plus = {}", fmt_state(rp));
        let _ = writeln!(out, "reference_minus = {}", fmt_state(rm));
    }
    for label in [Label::Plus, Label::Minus, Label::Escaped, Label::Undecided] {
        let _ = writeln!(out, "{:?} = {}", label, grid.count(label));
    }
    let _ = writeln!(out, "undecided_fraction = {}", grid.undecided_fraction());
    let _ = writeln!(out, "wrote {}", path.display());
    if cfg.svg {
        let svg = basin_svg(&grid).finish(&format!("basin of x2 ({})", regime_name(regime)), &cfg.header_lines());
        write_file(cfg, &format!("{name}.svg"), &svg)?;
    }
    Ok(())
}

fn branch_name(side: Side) -> &'static str {
    match side {
        Side::EigPlus => "eigvec-plus",
        Side::EigMinus => "eigvec-minus",
    }
}

fn manifold_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let branches = stable_manifold(&cfg.params, &cfg.integrator(), &cfg.window, cfg.arc_cap)?;
    for b in &branches {
        let name = match b.side {
            Side::EigPlus => "manifold_plus.csv",
            Side::EigMinus => "manifold_minus.csv",
        };
        let head = header(cfg, &[format!("stable manifold branch {}", branch_name(b.side))]);
        let path = write_file(cfg, name, &polyline_csv(&head, &b.points))?;
        let _ = writeln!(out, "{}: {} points, arc length {}", branch_name(b.side), b.points.len(), b.arc_length());
        let _ = writeln!(out, "wrote {}", path.display());
    }
    write_run_cfg(cfg, "manifold")?;
    if cfg.svg {
        let mut svg = Svg::new(cfg.window);
        for b in &branches {
            svg.polyline(&b.points, "black", false, false);
        }
        write_file(cfg, "manifold.svg", &svg.finish("stable manifold of the saddle", &cfg.header_lines()))?;
    }
    Ok(())
}

/// A steady system's basin grid and the safe zone built from it.
struct ZoneRun {
    grid: BasinGrid,
    zone: SafeZone,
    polygon: Polygon,
    branches: Option<[ManifoldBranch; 2]>,
}

fn zone_for(cfg: &RunConfig, regime: Regime) -> Result<ZoneRun, CliError> {
    let profile = regime.profile();
    let integ = cfg.integrator();
    let classifier = Classifier::new(&cfg.params, &profile, &integ, &cfg.classify())?;
    let grid = classifier.grid(&cfg.window)?;
    let (branches, anchor) = match regime {
        Regime::Unforced => {
            // without a saddle there is no manifold to follow
            let branches = stable_manifold(&cfg.params, &integ, &cfg.window, cfg.arc_cap).ok();
            let anchor = attractors(&cfg.params)?.0.ok_or(crate::Error::EmptySafeZone)?;
            (branches, anchor)
        }
        Regime::Harmonic { .. } => (None, classifier.reference_points().expect("harmonic regime").0),
    };
    let zone = build_safe_zone(&grid, branches.as_ref().map_or(&[][..], |b| &b[..]), cfg.cap_v, Some(anchor))?;
    let polygon = zone.polygon()?;
    Ok(ZoneRun { grid, zone, polygon, branches })
}

fn zone_svg(run: &ZoneRun) -> Svg {
    let mut svg = basin_svg(&run.grid);
    if let Some(b) = &run.branches {
        for br in b {
            svg.polyline(&br.points, "#4060c0", false, false);
        }
    }
    svg.polyline(run.polygon.vertices(), "#e07000", false, true);
    svg
}

fn safe_zone_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let regime = regime_for(cfg);
    let run = zone_for(cfg, regime)?;
    let name = if regime == Regime::Unforced { "safe_zone" } else { "safe_zone_forced" };
    let head = header(cfg, &[format!("safe zone ({}): {}", regime_name(regime), run.zone.description)]);
    let path = write_file(cfg, &format!("{name}.csv"), &run.zone.boundary.to_csv(&head))?;
    write_run_cfg(cfg, "safe-zone")?;
    let _ = writeln!(out, "zone = {}", run.zone.description);
    let _ = writeln!(out, "points = {}", run.zone.boundary.len());
    let _ = writeln!(out, "area = {}", run.polygon.area());
    let _ = writeln!(out, "perimeter = {}", run.zone.boundary.perimeter);
    let _ = writeln!(out, "holes = {}", run.zone.holes);
    let _ = writeln!(out, "wrote {}", path.display());
    if cfg.svg {
        write_file(cfg, &format!("{name}.svg"), &zone_svg(&run).finish("safe zone", &cfg.header_lines()))?;
    }
    Ok(())
}

/// One run of the boundary-mapping pipeline.
struct Mapping {
    profile: ForcingProfile,
    t_end: f64,
    initial: Arc<ZoneRun>,
    last: Arc<ZoneRun>,
    transformed: BoundaryPolyline,
    transformed_polygon: Polygon,
    overlap: Overlap,
    danger: Result<f64, crate::Error>,
}

/// Safe zones keyed by steady regime, shared across sweep rows.
#[derive(Default)]
struct ZoneCache(Vec<(Regime, Arc<ZoneRun>)>);

impl ZoneCache {
    fn get(&mut self, cfg: &RunConfig, regime: Regime) -> Result<Arc<ZoneRun>, CliError> {
        if let Some((_, run)) = self.0.iter().find(|(r, _)| *r == regime) {
            return Ok(run.clone());
        }
        let run = Arc::new(zone_for(cfg, regime)?);
        self.0.push((regime, run.clone()));
        Ok(run)
    }
}

fn map_pipeline(cfg: &RunConfig, cache: &mut ZoneCache) -> Result<Mapping, CliError> {
    let (profile, t_end) = cfg.transient_profile()?;
    let last = cache.get(cfg, profile.final_regime())?;
    let initial = cache.get(cfg, profile.initial_regime())?;
    let transformed =
        map_boundary_backward(&cfg.params, &profile, &last.zone, t_end, &cfg.integrator(), &cfg.mapping())?;
    let transformed_polygon = transformed.polygon()?;
    let overlap = overlap_area(&initial.polygon, &transformed_polygon, &cfg.window, cfg.samples);
    let danger = danger_index(&initial.polygon, &transformed_polygon, &cfg.window, cfg.samples);
    Ok(Mapping { profile, t_end, initial, last, transformed, transformed_polygon, overlap, danger })
}

fn map_boundary_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let mut cache = ZoneCache::default();
    let m = map_pipeline(cfg, &mut cache)?;
    let points = find_discriminating_points(&m.transformed, &m.initial.grid, Some(&m.initial.polygon), cfg.margin)?;
    let verify = (cfg.verify > 0).then(|| {
        homeomorphism_check(
            &cfg.params,
            &m.profile,
            &m.last.polygon,
            &m.transformed_polygon,
            m.t_end,
            &cfg.window,
            &cfg.integrator(),
            cfg.verify,
            VERIFY_MARGIN,
            cfg.seed,
        )
    });

    let profile_line = format!("t=0 preimage of safe zone; profile={}", m.profile);
    let path = write_file(cfg, "transformed.csv", &m.transformed.to_csv(&header(cfg, &[profile_line])))?;
    let final_head = header(cfg, &[format!("final safe zone: {}", m.last.zone.description)]);
    write_file(cfg, "safe_zone.csv", &m.last.zone.boundary.to_csv(&final_head))?;
    let initial_head = header(cfg, &[format!("initial safe zone: {}", m.initial.zone.description)]);
    write_file(cfg, "initial_zone.csv", &m.initial.zone.boundary.to_csv(&initial_head))?;

    let report = report_lines(&m, &points, verify.as_ref());
    let mut text = String::new();
    for line in header(cfg, &["map-boundary report".to_string()]) {
        let _ = writeln!(text, "# {line}");
    }
    for line in &report {
        let _ = writeln!(text, "{line}");
        let _ = writeln!(out, "{line}");
    }
    write_file(cfg, "report.txt", &text)?;
    write_run_cfg(cfg, "map-boundary")?;
    let _ = writeln!(out, "wrote {}", path.display());

    if cfg.svg {
        let mut svg = basin_svg(&m.initial.grid);
        svg.polyline(m.last.polygon.vertices(), "#e07000", false, true);
        svg.polyline(m.transformed_polygon.vertices(), "#2070ff", true, true);
        if let Some(a) = points.a_like {
            svg.marker(a, "black", "A");
        }
        if let Some(b) = points.b_like {
            svg.marker(b, "white", "B");
        }
        write_file(cfg, "map.svg", &svg.finish(&format!("transformed boundary, {}", m.profile), &cfg.header_lines()))?;
    }
    if let Some(v) = verify {
        if v.agreement() < 0.99 {
            return Err(CliError::Check(format!(
                "forward-simulation check agreed on only {}/{} points",
                v.agreed, v.tested
            )));
        }
    }
    Ok(())
}

fn report_lines(m: &Mapping, points: &DiscriminatingPoints, verify: Option<&HomeomorphismCheck>) -> Vec<String> {
    let opt = |p: Option<State>| p.map_or("none".to_string(), fmt_state);
    let mut lines = vec![
        format!("profile = {}", m.profile),
        format!("t_end = {}", m.t_end),
        format!("final_zone_area = {}", m.last.polygon.area()),
        format!("initial_zone_area = {}", m.initial.polygon.area()),
        format!("transformed_points = {}", m.transformed.len()),
        format!("escaped = {}", m.transformed.escaped),
        format!("unreliable = {}", m.transformed.unreliable()),
        format!("depth_limited = {}", m.transformed.depth_limited),
        format!("transformed_area = {}", m.transformed_polygon.area()),
        format!("overlap_area = {}", m.overlap.area),
        format!("overlap_empty = {}", m.overlap.empty),
        match &m.danger {
            Ok(d) => format!("danger_index = {d}"),
            Err(e) => format!("danger_index = undefined ({e})"),
        },
        format!("a_like = {}", opt(points.a_like)),
        format!("b_like = {}", opt(points.b_like)),
    ];
    if let Some(v) = verify {
        lines.push(format!("verify = {}/{} agreement={}", v.agreed, v.tested, v.agreement()));
    }
    lines
}

fn simulate_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    if cfg.ics.is_empty() {
        return Err(CliError::Usage("simulate needs at least one --ic x,v".into()));
    }
    let (profile, t_end) = cfg.transient_profile()?;
    let integ = cfg.integrator();
    let eq = attractors(&cfg.params)?;
    for (k, &ic) in cfg.ics.iter().enumerate() {
        let first = integrate(&cfg.params, &profile, ic, 0.0, t_end, &integ)?;
        let (_, y_end) = first.last();
        let second = integrate(&cfg.params, &profile, y_end, t_end, t_end + cfg.t_after, &integ)?;
        let mut csv = String::new();
        let head = header(
            cfg,
            &[
                format!("trajectory from ic = {}; profile={profile}", fmt_state(ic)),
                format!("transient ends at t = {t_end}"),
                format!("status = {:?}", second.status),
            ],
        );
        for line in &head {
            let _ = writeln!(csv, "# {line}");
        }
        csv.push_str("t,x,v\n");
        for (t, s) in first.points.iter().chain(second.points.iter().skip(1)) {
            let _ = writeln!(csv, "{t},{},{}", s.x, s.v);
        }
        let name = format!("trajectory_{}.csv", k + 1);
        write_file(cfg, &name, &csv)?;
        let fin = second.final_state();
        let near = |a: Option<State>| a.is_some_and(|a| fin.dist(a) < 1e-3);
        let verdict = if profile.final_regime() != Regime::Unforced {
            "forced final regime"
        } else if near(eq.0) {
            "settled at the acceptable well"
        } else if near(eq.1) {
            "settled at the unacceptable well"
        } else {
            "not settled"
        };
        let _ = writeln!(out, "ic {} = {} -> final {} ({verdict}), wrote {name}", k + 1, fmt_state(ic), fmt_state(fin));
    }
    write_run_cfg(cfg, "simulate")?;
    Ok(())
}

fn sweep_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    if cfg.sweep_values.is_empty() {
        return Err(CliError::Usage("sweep needs a non-empty --values list".into()));
    }
    let mut cache = ZoneCache::default();
    let name = match cfg.sweep_param {
        SweepParam::A0 => "a0",
        SweepParam::Scale => "scale",
    };
    let mut csv = String::new();
    for line in header(cfg, &[format!("sweep over {name}")]) {
        let _ = writeln!(csv, "# {line}");
    }
    let _ = writeln!(csv, "{name},transformed_area,overlap_area,overlap_empty,danger_index,escaped,status");
    for &value in &cfg.sweep_values {
        let mut row_cfg = cfg.clone();
        match cfg.sweep_param {
            SweepParam::A0 => row_cfg.a0 = value,
            SweepParam::Scale => row_cfg.accel_scale = value,
        }
        let row = match map_pipeline(&row_cfg, &mut cache) {
            Ok(m) => match m.danger {
                Ok(d) => format!(
                    "{value},{},{},{},{d},{},ok",
                    m.transformed_polygon.area(),
                    m.overlap.area,
                    m.overlap.empty,
                    m.transformed.escaped
                ),
                Err(e) => format!(
                    "{value},{},{},{},,{},{}",
                    m.transformed_polygon.area(),
                    m.overlap.area,
                    m.overlap.empty,
                    m.transformed.escaped,
                    e.to_string().replace(',', ";")
                ),
            },
            Err(e) => format!("{value},,,,,,{}", e.to_string().replace(',', ";")),
        };
        let _ = writeln!(csv, "{row}");
        let _ = writeln!(out, "{row}");
    }
    let path = write_file(cfg, "sweep.csv", &csv)?;
    write_run_cfg(cfg, "sweep")?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn ingest_cmd(cfg: &RunConfig, out: &mut String) -> Result<(), CliError> {
    let rec = cfg.record()?;
    let dts: Vec<f64> = rec.times().windows(2).map(|w| w[1] - w[0]).collect();
    let dt_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_max = dts.iter().copied().fold(0.0, f64::max);
    let _ = writeln!(out, "source = {}", rec.source.replace('\n', " "));
    let _ = writeln!(out, "samples = {}", rec.len());
    let _ = writeln!(out, "start = {}", rec.start());
    let _ = writeln!(out, "end = {}", rec.end());
    let _ = writeln!(out, "duration = {}", rec.duration());
    let _ = writeln!(out, "dt_min = {dt_min}");
    let _ = writeln!(out, "dt_max = {dt_max}");
    let _ = writeln!(out, "peak = {}", rec.peak() * cfg.accel_scale);
    let _ = writeln!(out, "scale = {}", cfg.accel_scale);
    Ok(())
}
