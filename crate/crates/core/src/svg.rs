//! Minimal SVG output: filled basin cells, polylines and markers.

use std::fmt::Write as _;

use crate::basin::{BasinGrid, Label, PhaseWindow};
use crate::model::State;

const SIZE: f64 = 600.0;
const PAD: f64 = 20.0;

pub struct Svg {
    window: PhaseWindow,
    body: String,
}

impl Svg {
    pub fn new(window: PhaseWindow) -> Self {
        Svg { window, body: String::new() }
    }

    fn scale(&self) -> (f64, f64) {
        let w = &self.window;
        (SIZE / (w.x_max - w.x_min), SIZE / (w.v_max - w.v_min))
    }

    fn px(&self, p: State) -> (f64, f64) {
        let (sx, sv) = self.scale();
        (PAD + (p.x - self.window.x_min) * sx, PAD + (self.window.v_max - p.v) * sv)
    }

    /// Fills the cells carrying `label`, merging horizontal runs.
    pub fn cells(&mut self, grid: &BasinGrid, label: Label, fill: &str) {
        let w = grid.window;
        let (sx, sv) = self.scale();
        let (cw, ch) = (w.dx() * sx, w.dv() * sv);
        let _ = writeln!(self.body, r#"<g fill="{fill}" stroke="none">"#);
        for j in 0..w.nv {
            let mut i = 0;
            while i < w.nx {
                if grid.get(i, j) != label {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < w.nx && grid.get(i, j) == label {
                    i += 1;
                }
                let corner = State::new(w.x_min + start as f64 * w.dx(), w.v_min + (j + 1) as f64 * w.dv());
                let (x, y) = self.px(corner);
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                    x,
                    y,
                    (i - start) as f64 * cw,
                    ch
                );
            }
        }
        self.body.push_str("</g>\n");
    }

    pub fn polyline(&mut self, points: &[State], stroke: &str, dashed: bool, closed: bool) {
        if points.is_empty() {
            return;
        }
        let tag = if closed { "polygon" } else { "polyline" };
        let mut coords = String::new();
        for p in points {
            let (x, y) = self.px(*p);
            let _ = write!(coords, "{x:.2},{y:.2} ");
        }
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" stroke="{stroke}" stroke-width="1.2"{dash}/>"#,
            coords.trim_end()
        );
    }

    pub fn marker(&mut self, p: State, fill: &str, label: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{fill}" stroke="black"/>"#);
        if !label.is_empty() {
            let _ = writeln!(self.body, r#"<text x="{:.2}" y="{:.2}" font-size="14">{label}</text>"#, x + 6.0, y - 6.0);
        }
    }

    /// Closes the document; `notes` go into a leading XML comment.
    pub fn finish(self, title: &str, notes: &[String]) -> String {
        let total = SIZE + 2.0 * PAD;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        if !notes.is_empty() {
            out.push_str("<!--\n");
            for line in notes {
                let _ = writeln!(out, "{}", line.replace("--", "- -"));
            }
            out.push_str("-->\n");
        }
        let _ = writeln!(out, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
        out.push_str(&self.body);
        let (x0, y0) = (PAD, PAD + SIZE + 14.0);
        let w = &self.window;
        let _ = writeln!(
            out,
            r#"<text x="{x0}" y="{y0}" font-size="11">x in [{}, {}], v in [{}, {}]</text>"#,
            w.x_min, w.x_max, w.v_min, w.v_max
        );
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
