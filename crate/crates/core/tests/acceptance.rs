//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs as a plain binary (`harness = false`) so the verdict lines are always
//! visible in `cargo test` output.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safezone::basin::{BasinGrid, ClassifySettings, Classifier, Label, PhaseWindow};
use safezone::boundary::{build_safe_zone, map_boundary_backward, MappingSettings, SafeZone};
use safezone::forcing::ForcingProfile;
use safezone::geometry::{danger_index, segment_distance, Polygon, DEFAULT_AREA_SAMPLES};
use safezone::ingest::bundled_record;
use safezone::integrator::{flow, flow_backward, integrate, IntegratorSettings, TerminalStatus};
use safezone::manifold::{interface_tracking, stable_manifold, ManifoldBranch, DEFAULT_ARC_CAP};
use safezone::model::{energy, SystemParams};
use safezone::State;

const BIN: &str = env!("CARGO_BIN_EXE_safezone");

fn x2() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn x3() -> f64 {
    (-5f64.sqrt() - 1.0) / 2.0
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

/// Everything built once and shared between criteria.
struct Shared {
    params: SystemParams,
    settings: IntegratorSettings,
    grid: BasinGrid,
    grid_time: Duration,
    branches: [ManifoldBranch; 2],
    zone: SafeZone,
}

fn shared() -> Shared {
    let params = SystemParams::default();
    let settings = IntegratorSettings::default();
    let window = PhaseWindow::default().with_resolution(200, 200);
    let start = Instant::now();
    let classifier = Classifier::new(&params, &ForcingProfile::Zero, &settings, &ClassifySettings::default()).unwrap();
    let grid = classifier.grid(&window).unwrap();
    let grid_time = start.elapsed();
    let branches = stable_manifold(&params, &settings, &window, DEFAULT_ARC_CAP).unwrap();
    let zone = build_safe_zone(&grid, &branches, 1.0, Some(State::new(x2(), 0.0))).unwrap();
    Shared { params, settings, grid, grid_time, branches, zone }
}

fn run_cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(BIN).args(args).arg("--out").arg(dir).output().expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() {
        eprintln!("{} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    }
    (out.status.code().unwrap_or(-1), text)
}

fn parse_state(s: &str) -> Option<State> {
    let (x, v) = s.trim().split_once(',')?;
    Some(State::new(x.trim().parse().ok()?, v.trim().parse().ok()?))
}

fn value_of<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('=').map(str::trim))
}

/// Roots of `m l^2 + c l + s = 0`, the linearisation about an equilibrium
/// whose restoring-force slope is `s`.
fn quadratic_roots(m: f64, c: f64, s: f64) -> [Complex64; 2] {
    let b = c / m;
    let q = s / m;
    let root = Complex64::new(b * b - 4.0 * q, 0.0).sqrt();
    [(-b + root) / 2.0, (-b - root) / 2.0]
}

fn criterion_1() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (code, text) = run_cli(&["fixed-points"], dir.path());
    let elapsed = start.elapsed();
    if code != 0 {
        return Verdict::new(false, format!("exit code {code}"));
    }
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("x,"))
        .map(|l| l.split(',').collect())
        .collect();
    let expected = [(0.0, "saddle"), (x2(), "stable-focus"), (x3(), "stable-focus")];
    let mut worst_x = 0.0f64;
    let mut worst_l = 0.0f64;
    let mut kinds_ok = rows.len() == 3;
    for (x_exact, kind) in expected {
        let Some(row) = rows.iter().find(|r| r[0].parse::<f64>().is_ok_and(|x| (x - x_exact).abs() < 1e-6)) else {
            kinds_ok = false;
            continue;
        };
        let nums: Vec<f64> = row[..5].iter().map(|s| s.parse().unwrap()).collect();
        worst_x = worst_x.max((nums[0] - x_exact).abs());
        kinds_ok &= row[5] == kind;
        let slope = -1.0 + 2.0 * x_exact + 3.0 * x_exact * x_exact;
        let oracle = quadratic_roots(1.0, 0.25, slope);
        let got = [Complex64::new(nums[1], nums[2]), Complex64::new(nums[3], nums[4])];
        let straight = (got[0] - oracle[0]).norm().max((got[1] - oracle[1]).norm());
        let swapped = (got[0] - oracle[1]).norm().max((got[1] - oracle[0]).norm());
        worst_l = worst_l.max(straight.min(swapped));
    }
    let pass = kinds_ok && worst_x <= 1e-12 && worst_l <= 1e-9 && elapsed < Duration::from_secs(1);
    Verdict::new(pass, format!("max |dx| {worst_x:.1e}, max |dlambda| {worst_l:.1e}, kinds ok {kinds_ok}, {elapsed:.2?}"))
}

fn criterion_2() -> Verdict {
    let params = SystemParams::default();
    let settings = IntegratorSettings::with_tolerance(1e-8);
    let t_end = 2.0 * PI / 3.0;
    let profile = ForcingProfile::switching_off(0.2, 3.0, t_end).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let p = State::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let back = flow_backward(&params, &profile, p, t_end, &settings);
        let fwd = flow(&params, &profile, back.state, 0.0, t_end, &settings);
        if back.status != TerminalStatus::ReachedFinal || fwd.status != TerminalStatus::ReachedFinal {
            failures += 1;
            continue;
        }
        worst = worst.max(fwd.state.dist(p));
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && worst < 1e-5 && elapsed < Duration::from_secs(10);
    Verdict::new(pass, format!("max defect {worst:.2e}, failed integrations {failures}, {elapsed:.2?}"))
}

/// Cell centres of every tenth row and column of the 200^2 grid plus random
/// window points.
fn energy_test_set(window: &PhaseWindow) -> Vec<State> {
    let mut set = Vec::new();
    for j in (5..window.nv).step_by(10) {
        for i in (5..window.nx).step_by(10) {
            set.push(window.center(i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        set.push(State::new(rng.gen_range(window.x_min..window.x_max), rng.gen_range(window.v_min..window.v_max)));
    }
    set
}

fn criterion_3(s: &Shared) -> Verdict {
    let set = energy_test_set(&s.grid.window);
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0usize;
    for &ic in &set {
        let traj = integrate(&s.params, &ForcingProfile::Zero, ic, 0.0, 200.0, &s.settings).unwrap();
        let energies: Vec<f64> = traj.points.iter().map(|&(_, p)| energy(&s.params, p).unwrap()).collect();
        for w in energies.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        steps += energies.len() - 1;
    }
    Verdict::new(
        worst <= 1e-9,
        format!("{} trajectories, {steps} accepted steps, largest per-step increase {worst:.2e}", set.len()),
    )
}

fn criterion_4(s: &Shared) -> Verdict {
    let undecided = s.grid.undecided_fraction();
    let plus = s.grid.count(Label::Plus);
    let minus = s.grid.count(Label::Minus);
    let tracking = interface_tracking(&s.branches, &s.grid);
    let pass = undecided < 0.01 && plus > 0 && minus > 0 && tracking >= 0.95 && s.grid_time < Duration::from_secs(120);
    Verdict::new(
        pass,
        format!(
            "undecided {:.4}%, plus {plus}, minus {minus}, manifold tracking {:.2}%, grid {:.2?}",
            100.0 * undecided,
            100.0 * tracking,
            s.grid_time
        ),
    )
}

fn criterion_5(s: &Shared) -> Verdict {
    let window = PhaseWindow::default().with_resolution(100, 100);
    let start = Instant::now();
    let unforced = Classifier::new(&s.params, &ForcingProfile::Zero, &s.settings, &ClassifySettings::default())
        .and_then(|c| c.grid(&window))
        .unwrap();
    let harmonic = ForcingProfile::harmonic(0.2, 3.0).unwrap();
    let forced = Classifier::new(&s.params, &harmonic, &s.settings, &ClassifySettings::default())
        .and_then(|c| c.grid(&window))
        .unwrap();
    let elapsed = start.elapsed();
    let agreement = unforced.agreement(&forced).unwrap_or(0.0);
    let pass = agreement >= 0.90 && elapsed < Duration::from_secs(300);
    Verdict::new(pass, format!("agreement {:.2}% on jointly decided cells, {elapsed:.2?}", 100.0 * agreement))
}

/// Direct forward simulation against membership in the transformed polygon,
/// on seeded uniform points at least `margin` from its boundary.
fn forward_agreement(
    s: &Shared,
    profile: &ForcingProfile,
    zone: &Polygon,
    transformed: &Polygon,
    t_end: f64,
    seed: u64,
) -> (usize, usize) {
    let w = s.grid.window;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verts = transformed.vertices();
    let far = |p: State| {
        (0..verts.len()).all(|k| segment_distance(p, verts[k], verts[(k + 1) % verts.len()]) >= 0.05)
    };
    let mut tested = 0;
    let mut agreed = 0;
    while tested < 1000 {
        let p = State::new(rng.gen_range(w.x_min..w.x_max), rng.gen_range(w.v_min..w.v_max));
        if !far(p) {
            continue;
        }
        tested += 1;
        let end = flow(&s.params, profile, p, 0.0, t_end, &s.settings);
        let lands = end.status == TerminalStatus::ReachedFinal && zone.contains(end.state);
        if lands == transformed.contains(p) {
            agreed += 1;
        }
    }
    (agreed, tested)
}

fn criterion_6(s: &Shared) -> Verdict {
    let zone = s.zone.polygon().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    let t_off = 2.0 * PI / 3.0;
    let cases = [
        ("switching-off", ForcingProfile::switching_off(0.2, 3.0, t_off).unwrap(), t_off),
        ("accelerogram", ForcingProfile::accelerogram(Arc::new(bundled_record()), 1.0).unwrap(), 3.0),
    ];
    for (name, profile, t_end) in cases {
        let start = Instant::now();
        let transformed = map_boundary_backward(&s.params, &profile, &s.zone, t_end, &s.settings, &MappingSettings::default())
            .and_then(|b| b.polygon());
        let transformed = match transformed {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
                continue;
            }
        };
        let (agreed, tested) = forward_agreement(s, &profile, &zone, &transformed, t_end, 6);
        let elapsed = start.elapsed();
        let fraction = agreed as f64 / tested as f64;
        pass &= fraction >= 0.99 && elapsed < Duration::from_secs(120);
        parts.push(format!("{name} {agreed}/{tested} in {elapsed:.2?}"));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_7() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (code, report) = run_cli(&["map-boundary"], dir.path());
    if code != 0 {
        return Verdict::new(false, format!("map-boundary exit code {code}"));
    }
    let a = value_of(&report, "a_like").and_then(parse_state);
    let b = value_of(&report, "b_like").and_then(parse_state);
    let (Some(a), Some(b)) = (a, b) else {
        return Verdict::new(false, format!("a_like {a:?}, b_like {b:?}"));
    };
    let ic_a = format!("{},{}", a.x, a.v);
    let ic_b = format!("{},{}", b.x, b.v);
    let (code, sim) = run_cli(&["simulate", "--ic", &ic_a, "--ic", &ic_b], dir.path());
    let elapsed = start.elapsed();
    if code != 0 {
        return Verdict::new(false, format!("simulate exit code {code}"));
    }
    let finals: Vec<State> = sim
        .lines()
        .filter_map(|l| l.split_once("-> final ")?.1.split_whitespace().next().and_then(parse_state))
        .collect();
    if finals.len() != 2 {
        return Verdict::new(false, format!("could not read final states from: {sim}"));
    }
    let da = (finals[0].x - x2()).abs().max(finals[0].v.abs());
    let db = (finals[1].x - x3()).abs().max(finals[1].v.abs());
    let pass = da <= 1e-3 && db <= 1e-3 && elapsed < Duration::from_secs(180);
    Verdict::new(
        pass,
        format!("A = ({:.4}, {:.4}) ends {da:.1e} from x2, B = ({:.4}, {:.4}) ends {db:.1e} from x3, {elapsed:.2?}", a.x, a.v, b.x, b.v),
    )
}

fn criterion_8(s: &Shared) -> Verdict {
    let zone = s.zone.polygon().unwrap();
    let full = ForcingProfile::accelerogram(Arc::new(bundled_record()), 1.0).unwrap();
    let off = ForcingProfile::switching_off(0.2, 3.0, 0.0).unwrap();
    let start = Instant::now();
    let mapped_full = map_boundary_backward(&s.params, &full, &s.zone, 0.0, &s.settings, &MappingSettings::default()).unwrap();
    let mapped_off = map_boundary_backward(&s.params, &off, &s.zone, 0.0, &s.settings, &MappingSettings::default()).unwrap();
    let danger = mapped_full.polygon().and_then(|t| danger_index(&zone, &t, &s.grid.window, DEFAULT_AREA_SAMPLES));
    let elapsed = start.elapsed();
    let deviation = |m: &safezone::boundary::BoundaryPolyline| {
        if m.points.len() != s.zone.boundary.points.len() {
            return f64::INFINITY;
        }
        m.points.iter().zip(&s.zone.boundary.points).map(|(a, b)| a.state.dist(b.state)).fold(0.0, f64::max)
    };
    let (dev_full, dev_off) = (deviation(&mapped_full), deviation(&mapped_off));
    let danger = danger.unwrap_or(f64::NAN);
    let pass = dev_full <= 1e-12 && dev_off <= 1e-12 && danger == 0.0 && elapsed < Duration::from_secs(1);
    Verdict::new(
        pass,
        format!("max deviation {dev_full:.1e} (full transient), {dev_off:.1e} (switching-off), danger {danger}, {elapsed:.2?}"),
    )
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let other = std::fs::read_dir(b).unwrap().count();
    if names.len() != other {
        return Err(format!("{} files vs {other}", names.len()));
    }
    for name in &names {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).map_err(|_| format!("{name:?} missing"))?;
        if x != y {
            return Err(format!("{name:?} differs"));
        }
    }
    Ok(names.len())
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let runs: [&[&str]; 4] = [
        &["basin", "--svg"],
        &["manifold", "--svg"],
        &["map-boundary", "--verify", "1000", "--svg"],
        &["map-boundary", "--transient", "full", "--verify", "1000"],
    ];
    let mut compared = 0;
    for (k, args) in runs.iter().enumerate() {
        let one = tempfile::tempdir().unwrap();
        let eight = tempfile::tempdir().unwrap();
        let (c1, o1) = run_cli(&[args, &["--jobs", "1"][..]].concat(), one.path());
        let (c8, o8) = run_cli(&[args, &["--jobs", "8"][..]].concat(), eight.path());
        if c1 != 0 || c8 != 0 {
            return Verdict::new(false, format!("run {} exit codes {c1}/{c8}", k + 1));
        }
        let strip = |o: &str| o.lines().filter(|l| !l.starts_with("wrote ")).collect::<Vec<_>>().join("\n");
        if strip(&o1) != strip(&o8) {
            return Verdict::new(false, format!("`{}` stdout differs", args.join(" ")));
        }
        match same_tree(one.path(), eight.path()) {
            Ok(n) => compared += n,
            Err(e) => return Verdict::new(false, format!("`{}`: {e}", args.join(" "))),
        }
    }
    Verdict::new(true, format!("{compared} output files byte-identical across --jobs 1 and 8, {:.2?}", start.elapsed()))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n: u32, name: &'static str, v: Verdict| {
        println!("criterion {n} ({name}): {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    record(1, "fixed points", criterion_1());
    record(2, "integrator roundtrip", criterion_2());
    let s = shared();
    record(3, "energy dissipation", criterion_3(&s));
    record(4, "unforced basin", criterion_4(&s));
    record(5, "forced basin", criterion_5(&s));
    record(6, "transformed boundary", criterion_6(&s));
    record(7, "A/B points", criterion_7());
    record(8, "identity transient", criterion_8(&s));
    record(9, "determinism", criterion_9());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed in {:.1?}", results.len() - failed.len(), results.len(), start.elapsed());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
