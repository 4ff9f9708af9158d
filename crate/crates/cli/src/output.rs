//! Result files: `results.csv`, `summary.json` and optional SVG charts.
//!
//! CSV floats use plain decimal notation with 9 significant digits so that
//! identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qpol_core::experiments::ChshResult;
use qpol_core::ResultRow;

use crate::error::CliError;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Plain decimal with 9 significant digits; `-0` prints as `0`.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0".to_string()
    } else {
        s
    }
}

pub fn malus_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("theta_deg,n_pp,n_pm,n_mp,n_mm,malus_plus_ref,malus_minus_ref\n");
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_sig9(r.theta_deg),
            c.n_pp,
            c.n_pm,
            c.n_mp,
            c.n_mm,
            fmt_sig9(r.reference.malus_plus),
            fmt_sig9(r.reference.malus_minus),
        );
    }
    out
}

pub fn coincidence_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(
        "theta_deg,n_pp,n_pm,n_mp,n_mm,gamma,gamma_ref,gamma_sigma,norm_pp,norm_pp_ref\n",
    );
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_sig9(r.theta_deg),
            c.n_pp,
            c.n_pm,
            c.n_mp,
            c.n_mm,
            fmt_sig9(r.gamma),
            fmt_sig9(r.reference.gamma_qm),
            fmt_sig9(r.gamma_sigma),
            fmt_sig9(r.normalized_pp),
            fmt_sig9(r.normalized_pp_ref),
        );
    }
    out
}

pub fn chsh_csv(result: &ChshResult, expected: &[f64; 4]) -> String {
    let mut out = String::from(
        "a_deg,b_deg,relative_deg,n_pp,n_pm,n_mp,n_mm,correlation,correlation_sigma,correlation_expected\n",
    );
    for (t, e) in result.terms.iter().zip(expected) {
        let c = &t.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_sig9(t.a_deg),
            fmt_sig9(t.b_deg),
            fmt_sig9(t.relative_deg),
            c.n_pp,
            c.n_pm,
            c.n_mp,
            c.n_mm,
            fmt_sig9(t.correlation),
            fmt_sig9(t.correlation_sigma),
            fmt_sig9(*e),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn checks_csv(checks: &[CheckOutcome]) -> String {
    let mut out = String::from("check,value,threshold,passed\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.name,
            fmt_sig9(c.value),
            fmt_sig9(c.threshold),
            c.passed
        );
    }
    out
}

pub fn summary_json<T: Serialize>(summary: &T) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Files produced by one run, keyed by file name.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn push(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub marker: Marker,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
    Line,
    DashedLine,
}

/// Minimal self-contained scatter/line chart.
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart {
    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        LEFT + (x - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1) = (self.px(self.x_range.0), self.px(self.x_range.1));
        let (y0, y1) = (self.py(self.y_range.0), self.py(self.y_range.1));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for i in 0..=6 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / 6.0;
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 6.0;
            let (px, py) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 18.0,
                tick_label(fx)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            match series.marker {
                Marker::Line | Marker::DashedLine => {
                    let pts: Vec<String> = series
                        .points
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
                        .collect();
                    let dash = if series.marker == Marker::DashedLine {
                        r#" stroke-dasharray="6,4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                        series.color,
                        pts.join(" ")
                    );
                }
                Marker::Circle => {
                    for &(x, y) in &series.points {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#,
                            self.px(x),
                            self.py(y),
                            series.color
                        );
                    }
                }
                Marker::Square => {
                    for &(x, y) in &series.points {
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="{}"/>"#,
                            self.px(x) - 3.5,
                            self.py(y) - 3.5,
                            series.color
                        );
                    }
                }
            }
            let ly = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{}" text-anchor="end">{}</text>"#,
                x1 - 8.0,
                series.color,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

/// `n` evenly spaced samples of `f` on `[lo, hi]`.
pub fn sample_curve(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, f(x))
        })
        .collect()
}
