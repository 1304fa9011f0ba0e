//! Tabulated ground-acceleration records.
//!
//! Text format: one sample per line, either `t a` (two columns, whitespace
//! or comma separated) or `a` alone with a uniform step declared in a
//! `# dt=<value>` header. Other `#` lines are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Bundled 3 s synthetic record used when no file is supplied.
pub const SYNTHETIC_RECORD_TEXT: &str = include_str!("../data/synthetic_accelerogram.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct Accelerogram {
    times: Vec<f64>,
    values: Vec<f64>,
    pub source: String,
}

impl Accelerogram {
    /// Builds a record from parallel sample vectors, checking ordering and finiteness.
    pub fn new(times: Vec<f64>, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Format(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::MissingData);
        }
        for (i, (&t, &a)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !a.is_finite() {
                return Err(Error::Parse { line: i + 1, msg: "non-finite sample".into() });
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::Ordering { line: i + 1, t });
            }
        }
        if times[0] < 0.0 {
            return Err(Error::Format(format!("record starts at negative time {}", times[0])));
        }
        Ok(Self { times, values, source: source.into() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Piecewise-linear interpolation; zero outside `[start, end]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || !(t >= self.times[0] && t <= self.times[n - 1]) {
            return 0.0;
        }
        // first index with times[i] > t
        let hi = self.times.partition_point(|&s| s <= t);
        if hi == 0 {
            return self.values[0];
        }
        let lo = hi - 1;
        if hi == n || self.times[lo] == t {
            return self.values[lo];
        }
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        self.values[lo] + w * (self.values[hi] - self.values[lo])
    }

    /// Two-column text form; parses back to an identical record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in self.source.lines() {
            let _ = writeln!(out, "# {line}");
        }
        for (t, a) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t} {a}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rec = parse_accelerogram(&text)?;
        if rec.source.is_empty() {
            rec.source = path.display().to_string();
        }
        Ok(rec)
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    // accept the typographic minus sign as well
    let tok = tok.replace('\u{2212}', "-");
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("not a number: {tok:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite value {tok:?}") });
    }
    Ok(v)
}

fn dt_header(comment: &str) -> Option<&str> {
    let body = comment.trim_start_matches('#').trim();
    let rest = body.strip_prefix("dt")?.trim_start();
    Some(rest.strip_prefix('=')?.trim())
}

pub fn parse_accelerogram(text: &str) -> Result<Accelerogram> {
    let mut dt: Option<f64> = None;
    let mut columns: Option<usize> = None;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut source = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = dt_header(line) {
                let step = parse_number(v, lineno)?;
                if step <= 0.0 {
                    return Err(Error::Parse { line: lineno, msg: format!("dt must be positive, got {step}") });
                }
                dt = Some(step);
            } else {
                let c = line.trim_start_matches('#').trim();
                if !c.is_empty() {
                    source.push(c.to_string());
                }
            }
            continue;
        }
        let toks: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        match columns {
            None => columns = Some(toks.len()),
            Some(n) if n != toks.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {n} column(s), found {}", toks.len()),
                })
            }
            _ => {}
        }
        match toks.len() {
            1 => {
                let step = dt.ok_or_else(|| {
                    Error::Format("one-column record needs a `# dt=<value>` header".into())
                })?;
                let a = parse_number(toks[0], lineno)?;
                times.push(values.len() as f64 * step);
                values.push(a);
            }
            2 => {
                let t = parse_number(toks[0], lineno)?;
                let a = parse_number(toks[1], lineno)?;
                if let Some(&prev) = times.last() {
                    if t <= prev {
                        return Err(Error::Ordering { line: lineno, t });
                    }
                }
                times.push(t);
                values.push(a);
            }
            n => {
                return Err(Error::Parse { line: lineno, msg: format!("expected 1 or 2 columns, found {n}") })
            }
        }
    }
    if times.is_empty() {
        return Err(Error::MissingData);
    }
    Accelerogram::new(times, values, source.join("\n"))
}

/// Clips `[t_start, t_stop]` out of the record, shifts it to start at 0 and
/// multiplies by `scale`. Window endpoints are interpolated when they fall
/// between samples.
pub fn window_and_scale(a: &Accelerogram, t_start: f64, t_stop: f64, scale: f64) -> Result<Accelerogram> {
    if t_start.is_nan() || t_stop.is_nan() || t_start >= t_stop {
        return Err(Error::EmptyWindow(t_start, t_stop));
    }
    if t_start < a.start() || t_stop > a.end() {
        return Err(Error::InvalidParameter(format!(
            "window [{t_start}, {t_stop}] outside record support [{}, {}]",
            a.start(),
            a.end()
        )));
    }
    if !scale.is_finite() {
        return Err(Error::InvalidParameter(format!("scale {scale}")));
    }
    // `+ 0.0` turns -0.0 into 0.0 so a zero scale serialises cleanly
    let scaled = |v: f64| v * scale + 0.0;
    let mut times = vec![0.0];
    let mut values = vec![scaled(a.value_at(t_start))];
    for (&t, &v) in a.times.iter().zip(&a.values) {
        if t > t_start && t < t_stop {
            times.push(t - t_start);
            values.push(scaled(v));
        }
    }
    times.push(t_stop - t_start);
    values.push(scaled(a.value_at(t_stop)));
    let source = format!("{} [window {t_start}..{t_stop}, scale {scale}]", a.source.replace('\n', " "));
    Accelerogram::new(times, values, source)
}

/// Deterministic stand-in for a strong-motion record: decaying sinusoids
/// under a `sin(pi t / T)` envelope so the record vanishes at both ends,
/// normalised to a peak of 0.3. Sampled every 0.01 s over 3 s.
pub fn synthetic_record() -> Accelerogram {
    const DURATION: f64 = 3.0;
    const N: usize = 300;
    const PEAK: f64 = 0.3;
    let tau = std::f64::consts::TAU;
    let raw: Vec<(f64, f64)> = (0..=N)
        .map(|i| {
            let t = i as f64 * DURATION / N as f64;
            let envelope = (std::f64::consts::PI * t / DURATION).sin();
            let s = (-0.4 * t).exp() * (tau * 1.5 * t).sin()
                + 0.6 * (-0.2 * t).exp() * (tau * 2.7 * t + 0.5).sin()
                + 0.4 * (-0.6 * t).exp() * (tau * 0.8 * t + 1.0).sin();
            (t, envelope * s)
        })
        .collect();
    let max = raw.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
    // round to 6 decimals so the shipped text file is short and exact
    let round = |v: f64| (v * 1e6).round() / 1e6 + 0.0;
    let times = raw.iter().map(|&(t, _)| round(t)).collect();
    let values = raw.iter().map(|&(_, a)| round(a * PEAK / max)).collect();
    Accelerogram::new(times, values, "synthetic full-transient record (decaying sinusoids, 3 s, peak 0.3)")
        .expect("synthetic record is well formed")
}

pub fn bundled_record() -> Accelerogram {
    parse_accelerogram(SYNTHETIC_RECORD_TEXT).expect("bundled record parses")
}
