//! The `safezone` command line.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] crate::Error),
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, std::io::Error),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Lib(_) | CliError::Io(..) => EXIT_IO,
            CliError::Check(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "safezone", version, about = "Basins, safe zones and transient boundary mapping for a two-well oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibria, eigenvalues and their types.
    FixedPoints,
    /// Basin grid of the unforced system, or of the harmonic one with --forced.
    Basin,
    /// Stable manifold branches of the saddle at the origin.
    Manifold,
    /// Capped safe zone of the unforced system, or of the harmonic one with --forced.
    SafeZone,
    /// Time-zero preimage of the final safe zone under the transient, with overlap report.
    MapBoundary,
    /// Trajectories through the transient and into the final regime.
    Simulate {
        /// Initial condition `x,v`; repeat for several.
        #[arg(long = "ic", allow_hyphen_values = true)]
        ic: Vec<String>,
        /// Simulated time after the transient ends.
        #[arg(long, allow_hyphen_values = true)]
        t_after: Option<String>,
    },
    /// Repeats map-boundary over a list of amplitudes or accelerogram scales.
    Sweep {
        /// `a0` or `scale`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
    },
    /// Parses an accelerogram and reports its shape.
    IngestCheck,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// `key = value` settings file; flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write SVG renderings.
    #[arg(long, global = true)]
    svg: bool,
    /// Check N random points of the transformed boundary by forward simulation.
    #[arg(long, global = true)]
    verify: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    k1: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    k2: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    k3: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Transient duration (default: one forcing period, or the record length).
    #[arg(long, global = true, allow_hyphen_values = true)]
    t_end: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    cap_v: Option<String>,
    /// `x0,x1,v0,v1`
    #[arg(long, global = true, allow_hyphen_values = true)]
    window: Option<String>,
    /// `nx,nv` or `n`
    #[arg(long, global = true)]
    res: Option<String>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<String>,
    /// `switching-off`, `switching-on` or `full`.
    #[arg(long, global = true)]
    transient: Option<String>,
    /// Accelerogram file (default: bundled synthetic record).
    #[arg(long, global = true)]
    accel: Option<String>,
    /// `t0,t1`
    #[arg(long, global = true, allow_hyphen_values = true)]
    accel_window: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    accel_scale: Option<String>,
    /// Use the harmonically forced system for basin and safe-zone.
    #[arg(long, global = true)]
    forced: bool,
    /// Seed for the --verify sample.
    #[arg(long, global = true)]
    seed: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        };
        put("m", &self.m);
        put("c", &self.c);
        put("k1", &self.k1);
        put("k2", &self.k2);
        put("k3", &self.k3);
        put("a0", &self.a0);
        put("omega", &self.omega);
        put("t_end", &self.t_end);
        put("cap_v", &self.cap_v);
        put("window", &self.window);
        put("res", &self.res);
        put("tol", &self.tol);
        put("transient", &self.transient);
        put("accel", &self.accel);
        put("accel_window", &self.accel_window);
        put("accel_scale", &self.accel_scale);
        put("seed", &self.seed);
        put("out", &self.out.as_ref().map(|p| p.display().to_string()));
        put("jobs", &self.jobs.map(|j| j.to_string()));
        put("verify", &self.verify.map(|j| j.to_string()));
        if self.svg {
            out.push(("svg", "true".into()));
        }
        if self.forced {
            out.push(("forced", "true".into()));
        }
        out
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.opts.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in cli.opts.pairs() {
        cfg.set(k, &v)?;
    }
    match &cli.command {
        Command::Simulate { ic, t_after } => {
            if !ic.is_empty() {
                cfg.set("ic", &ic.join(";"))?;
            }
            if let Some(t) = t_after {
                cfg.set("t_after", t)?;
            }
        }
        Command::Sweep { param, values } => {
            if let Some(p) = param {
                cfg.set("param", p)?;
            }
            if let Some(v) = values {
                cfg.set("values", v)?;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let mut report = String::new();
    let result = build_config(&cli).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| commands::dispatch(&cli.command, &cfg, &mut report))
    });
    let _ = stdout.write_all(report.as_bytes());
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
