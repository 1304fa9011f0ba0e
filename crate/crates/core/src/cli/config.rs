//! Effective run configuration: defaults, then a `key = value` file, then flags.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::basin::{ClassifySettings, PhaseWindow};
use crate::boundary::{MappingSettings, DEFAULT_CAP_V, DEFAULT_DELTA_REF, DEFAULT_MARGIN, DEFAULT_MAX_DEPTH};
use crate::forcing::ForcingProfile;
use crate::geometry::DEFAULT_AREA_SAMPLES;
use crate::ingest::{bundled_record, window_and_scale, Accelerogram};
use crate::integrator::IntegratorSettings;
use crate::manifold::DEFAULT_ARC_CAP;
use crate::model::{State, SystemParams};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transient {
    SwitchingOff,
    SwitchingOn,
    /// Accelerogram between two unforced systems.
    Full,
}

impl Transient {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "switching-off" => Some(Transient::SwitchingOff),
            "switching-on" => Some(Transient::SwitchingOn),
            "full" => Some(Transient::Full),
            _ => None,
        }
    }
}

impl fmt::Display for Transient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transient::SwitchingOff => "switching-off",
            Transient::SwitchingOn => "switching-on",
            Transient::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    A0,
    Scale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub a0: f64,
    pub omega: f64,
    /// Transient duration; `None` picks one forcing period or the record length.
    pub t_end: Option<f64>,
    pub cap_v: f64,
    pub window: PhaseWindow,
    pub tol: f64,
    pub transient: Transient,
    /// `None` uses the bundled synthetic record.
    pub accel: Option<PathBuf>,
    pub accel_window: Option<(f64, f64)>,
    pub accel_scale: f64,
    pub forced: bool,
    pub verify: usize,
    pub seed: u64,
    pub delta_ref: f64,
    pub max_depth: u32,
    pub samples: usize,
    pub margin: f64,
    pub arc_cap: f64,
    /// Simulated time after the transient.
    pub t_after: f64,
    pub ics: Vec<State>,
    pub sweep_param: SweepParam,
    pub sweep_values: Vec<f64>,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            a0: 0.2,
            omega: 3.0,
            t_end: None,
            cap_v: DEFAULT_CAP_V,
            window: PhaseWindow::default(),
            tol: 1e-8,
            transient: Transient::SwitchingOff,
            accel: None,
            accel_window: None,
            accel_scale: 1.0,
            forced: false,
            verify: 0,
            seed: 1,
            delta_ref: DEFAULT_DELTA_REF,
            max_depth: DEFAULT_MAX_DEPTH,
            samples: DEFAULT_AREA_SAMPLES,
            margin: DEFAULT_MARGIN,
            arc_cap: DEFAULT_ARC_CAP,
            t_after: 100.0,
            ics: Vec::new(),
            sweep_param: SweepParam::A0,
            sweep_values: Vec::new(),
            out: PathBuf::from("."),
            jobs: None,
            svg: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Usage(format!("{key}: cannot parse {value:?}")))
}

fn list(key: &str, value: &str, n: Option<usize>) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> =
        value.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect::<Result<_, _>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("{key}: values must be finite")));
    }
    match n {
        Some(n) if v.len() != n => Err(CliError::Usage(format!("{key}: expected {n} comma-separated values"))),
        _ => Ok(v),
    }
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    /// Applies one setting. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        match k {
            "m" => self.params.m = num(k, value)?,
            "c" => self.params.c = num(k, value)?,
            "k1" => self.params.k1 = num(k, value)?,
            "k2" => self.params.k2 = num(k, value)?,
            "k3" => self.params.k3 = num(k, value)?,
            "a0" => self.a0 = num(k, value)?,
            "omega" => self.omega = num(k, value)?,
            "t_end" => self.t_end = if value == "auto" { None } else { Some(num(k, value)?) },
            "cap_v" => self.cap_v = num(k, value)?,
            "window" => {
                let w = list(k, value, Some(4))?;
                self.window = PhaseWindow { x_min: w[0], x_max: w[1], v_min: w[2], v_max: w[3], ..self.window };
            }
            "res" => {
                let r: Vec<usize> =
                    value.split(',').map(|s| num(k, s)).collect::<Result<_, _>>()?;
                let (nx, nv) = match r[..] {
                    [n] => (n, n),
                    [nx, nv] => (nx, nv),
                    _ => return Err(CliError::Usage("res: expected n or nx,nv".into())),
                };
                self.window = self.window.with_resolution(nx, nv);
            }
            "tol" => self.tol = num(k, value)?,
            "transient" => {
                self.transient = Transient::parse(value).ok_or_else(|| {
                    CliError::Usage(format!("transient: expected switching-off, switching-on or full, got {value:?}"))
                })?
            }
            "accel" => self.accel = if value == "bundled" { None } else { Some(PathBuf::from(value)) },
            "accel_window" => {
                self.accel_window = if value == "none" {
                    None
                } else {
                    let w = list(k, value, Some(2))?;
                    Some((w[0], w[1]))
                }
            }
            "accel_scale" => self.accel_scale = num(k, value)?,
            "forced" => self.forced = flag(k, value)?,
            "verify" => self.verify = num(k, value)?,
            "seed" => self.seed = num(k, value)?,
            "delta_ref" => self.delta_ref = num(k, value)?,
            "max_depth" => self.max_depth = num(k, value)?,
            "samples" => self.samples = num(k, value)?,
            "margin" => self.margin = num(k, value)?,
            "arc_cap" => self.arc_cap = num(k, value)?,
            "t_after" => self.t_after = num(k, value)?,
            "ic" => {
                self.ics = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| list(k, s, Some(2)).map(|p| State::new(p[0], p[1])))
                    .collect::<Result<_, _>>()?
            }
            "param" => {
                self.sweep_param = match value {
                    "a0" => SweepParam::A0,
                    "scale" | "accel_scale" => SweepParam::Scale,
                    _ => return Err(CliError::Usage(format!("param: expected a0 or scale, got {value:?}"))),
                }
            }
            "values" => self.sweep_values = list(k, value, None)?,
            "out" => self.out = PathBuf::from(value),
            "jobs" => self.jobs = Some(num(k, value)?),
            "svg" => self.svg = flag(k, value)?,
            _ => return Err(CliError::Usage(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        // Out-of-range settings are the caller's mistake; only a degenerate
        // system is reported as a numeric failure.
        let usage = |e: crate::Error| match e {
            crate::Error::DegenerateSystem => CliError::Lib(e),
            e => CliError::Usage(e.to_string()),
        };
        self.params.validate().map_err(usage)?;
        self.window.validate().map_err(usage)?;
        self.integrator().validate().map_err(usage)?;
        let bad = |what: &str| Err(CliError::Usage(format!("{what} out of range")));
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega");
        }
        if !self.a0.is_finite() || !self.accel_scale.is_finite() || !self.cap_v.is_finite() {
            return bad("a0, accel_scale or cap_v");
        }
        if matches!(self.t_end, Some(t) if !(t >= 0.0 && t.is_finite())) {
            return bad("t_end");
        }
        if !(self.delta_ref > 0.0 && self.margin >= 0.0 && self.arc_cap > 0.0 && self.t_after >= 0.0) {
            return bad("delta_ref, margin, arc_cap or t_after");
        }
        if self.samples == 0 || self.jobs == Some(0) {
            return bad("samples or jobs");
        }
        Ok(())
    }

    pub fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings::with_tolerance(self.tol)
    }

    pub fn classify(&self) -> ClassifySettings {
        ClassifySettings::default()
    }

    pub fn mapping(&self) -> MappingSettings {
        MappingSettings { delta_ref: self.delta_ref, max_depth: self.max_depth }
    }

    pub fn harmonic(&self) -> Result<ForcingProfile, CliError> {
        Ok(ForcingProfile::harmonic(self.a0, self.omega)?)
    }

    /// The accelerogram after windowing, shifted to start at zero.
    pub fn record(&self) -> Result<Accelerogram, CliError> {
        let rec = match &self.accel {
            None => bundled_record(),
            Some(p) => Accelerogram::load(p).map_err(|e| match e {
                crate::Error::Io(io) => CliError::Io(p.clone(), io),
                other => CliError::Lib(other),
            })?,
        };
        let (t0, t1) = self.accel_window.unwrap_or((rec.start(), rec.end()));
        Ok(window_and_scale(&rec, t0, t1, 1.0)?)
    }

    /// The transient profile and its duration.
    pub fn transient_profile(&self) -> Result<(ForcingProfile, f64), CliError> {
        let period = TAU / self.omega;
        Ok(match self.transient {
            Transient::SwitchingOff => {
                let t_end = self.t_end.unwrap_or(period);
                (ForcingProfile::switching_off(self.a0, self.omega, t_end)?, t_end)
            }
            Transient::SwitchingOn => {
                let t_end = self.t_end.unwrap_or(period);
                (ForcingProfile::switching_on(self.a0, self.omega, t_end)?, t_end)
            }
            Transient::Full => {
                let rec = self.record()?;
                let t_end = self.t_end.unwrap_or(rec.end());
                (ForcingProfile::accelerogram(Arc::new(rec), self.accel_scale)?, t_end)
            }
        })
    }

    /// Everything that affects results, as `key = value` lines.
    pub fn header_lines(&self) -> Vec<String> {
        let p = &self.params;
        let w = &self.window;
        let t_end = match self.transient_profile() {
            Ok((_, t)) => t.to_string(),
            Err(_) => "auto".to_string(),
        };
        let accel = self.accel.as_ref().map_or("bundled".to_string(), |p| p.display().to_string());
        let accel_window = self.accel_window.map_or("none".to_string(), |(a, b)| format!("{a},{b}"));
        let ics: Vec<String> = self.ics.iter().map(|s| format!("{},{}", s.x, s.v)).collect();
        let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
        let param = match self.sweep_param {
            SweepParam::A0 => "a0",
            SweepParam::Scale => "scale",
        };
        vec![
            format!("m = {}", p.m),
            format!("c = {}", p.c),
            format!("k1 = {}", p.k1),
            format!("k2 = {}", p.k2),
            format!("k3 = {}", p.k3),
            format!("a0 = {}", self.a0),
            format!("omega = {}", self.omega),
            format!("t_end = {t_end}"),
            format!("cap_v = {}", self.cap_v),
            format!("window = {},{},{},{}", w.x_min, w.x_max, w.v_min, w.v_max),
            format!("res = {},{}", w.nx, w.nv),
            format!("tol = {:e}", self.tol),
            format!("transient = {}", self.transient),
            format!("accel = {accel}"),
            format!("accel_window = {accel_window}"),
            format!("accel_scale = {}", self.accel_scale),
            format!("forced = {}", self.forced),
            format!("verify = {}", self.verify),
            format!("seed = {}", self.seed),
            format!("delta_ref = {}", self.delta_ref),
            format!("max_depth = {}", self.max_depth),
            format!("samples = {}", self.samples),
            format!("margin = {}", self.margin),
            format!("arc_cap = {}", self.arc_cap),
            format!("t_after = {}", self.t_after),
            format!("ic = {}", ics.join(";")),
            format!("param = {param}"),
            format!("values = {}", values.join(",")),
        ]
    }
}
