//! Run configuration files, CSV import/export, run manifests and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::ReferenceSeries;
use crate::config::{
    IncidentWave, ModeVariant, SimConfig, SlitGeometry, TruncationPolicy, Violation,
    DEFAULT_NORMALIZATION_TOL, DEFAULT_SCREEN_R,
};
use crate::error::{Error, Result};
use crate::field::ModeSet;
use crate::observables::PatternSeries;

pub const PATTERN_HEADER: [&str; 3] = ["beta_mrad", "singles", "coincidence"];
pub const OVERLAY_HEADER: [&str; 4] = ["beta_mrad", "counts", "model", "residual"];

/// A complete run description in laboratory units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub wavelength_nm: f64,
    pub slit_width_mm: f64,
    pub slit_separation_mm: f64,
    pub slit_length_mm: f64,
    pub thickness_mm: f64,
    pub slits: u8,
    pub c1: f64,
    pub c2: f64,
    pub amplitude: [f64; 3],
    pub alpha_mrad: f64,
    #[serde(rename = "screen_R_m")]
    pub screen_r_m: f64,
    /// Half-width of the detector sweep.
    pub beta_range_mrad: f64,
    pub points: usize,
    pub variant: ModeVariant,
    pub normalization_tol: f64,
    pub truncation: TruncationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub max_m: u32,
    pub max_n: u32,
    pub tail_eps: f64,
    pub evanescent_floor: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        let t = TruncationPolicy::default();
        Self {
            max_m: t.max_m,
            max_n: t.max_n,
            tail_eps: t.tail_eps,
            evanescent_floor: t.evanescent_floor,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::paper_fig4()
    }
}

impl RunConfig {
    /// Two-slit, 916 nm setup swept over +-5 mrad on 801 points.
    pub fn paper_fig4() -> Self {
        Self {
            wavelength_nm: 916.0,
            slit_width_mm: 0.13,
            slit_separation_mm: 0.4,
            slit_length_mm: 13.1,
            thickness_mm: 0.0265,
            slits: 2,
            c1: 0.955,
            c2: 0.298,
            amplitude: [0.896; 3],
            alpha_mrad: 0.0,
            screen_r_m: DEFAULT_SCREEN_R,
            beta_range_mrad: 5.0,
            points: 801,
            variant: ModeVariant::LiteralEq41,
            normalization_tol: DEFAULT_NORMALIZATION_TOL,
            truncation: TruncationConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper_fig4" => Ok(Self::paper_fig4()),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset '{other}' (available: paper_fig4)"
            ))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() as u64 + 1
            });
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable as TOML")
    }

    pub fn sim_config(&self) -> SimConfig {
        let t = &self.truncation;
        SimConfig {
            geometry: SlitGeometry {
                width_a: self.slit_width_mm / 1e3,
                length_b: self.slit_length_mm / 1e3,
                thickness_c: self.thickness_mm / 1e3,
                separation_d: self.slit_separation_mm / 1e3,
                slit_count: self.slits,
            },
            wave: IncidentWave {
                wavelength: self.wavelength_nm / 1e9,
                amplitude: self.amplitude,
                c1: self.c1,
                c2: self.c2,
            },
            truncation: TruncationPolicy {
                max_m: t.max_m,
                max_n: t.max_n,
                tail_eps: t.tail_eps,
                evanescent_floor: t.evanescent_floor,
            },
            variant: self.variant,
            alpha: self.alpha_mrad / 1e3,
            screen_r: self.screen_r_m,
            normalization_tol: self.normalization_tol,
        }
    }

    /// Half-width of the sweep in radians.
    pub fn beta_range(&self) -> f64 {
        self.beta_range_mrad / 1e3
    }

    /// Every violated invariant of the physical model and the sweep.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.sim_config().violations();
        if self.points < 2 {
            v.push(Violation::new(
                "points",
                format!("must be >= 2, got {}", self.points),
            ));
        }
        let half = self.beta_range();
        if !(half > 0.0 && half.is_finite()) {
            v.push(Violation::new(
                "beta_range_mrad",
                format!("must be > 0, got {}", self.beta_range_mrad),
            ));
        } else if half.sin().powi(2) > (self.alpha_mrad / 1e3).cos().powi(2) {
            v.push(Violation::new(
                "beta_range_mrad",
                format!(
                    "{} mrad reaches past grazing emission",
                    self.beta_range_mrad
                ),
            ));
        }
        v
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// Exponent form with 17 significant digits, enough to read back the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `beta_mrad,singles,coincidence` rows.
pub fn write_pattern_csv<W: Write>(out: W, series: &PatternSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATTERN_HEADER).map_err(csv_error)?;
    for i in 0..series.len() {
        w.write_record([
            fmt_f64(series.beta_grid[i] * 1e3),
            fmt_f64(series.singles[i]),
            fmt_f64(series.coincidence[i]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Model against data, as written by a fit.
pub fn write_overlay_csv<W: Write>(
    out: W,
    reference: &ReferenceSeries,
    model: &[f64],
    residuals: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OVERLAY_HEADER).map_err(csv_error)?;
    for i in 0..reference.len() {
        w.write_record([
            fmt_f64(reference.beta()[i] * 1e3),
            fmt_f64(reference.counts()[i]),
            fmt_f64(model[i]),
            fmt_f64(residuals[i]),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of a pattern CSV as stored, angles in mrad.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    pub beta_mrad: Vec<f64>,
    pub singles: Vec<f64>,
    pub coincidence: Vec<f64>,
}

pub fn read_pattern_csv<R: Read>(input: R) -> Result<PatternTable> {
    let rows = read_table(input, &[&PATTERN_HEADER])?;
    let mut t = PatternTable {
        beta_mrad: Vec::with_capacity(rows.len()),
        singles: Vec::with_capacity(rows.len()),
        coincidence: Vec::with_capacity(rows.len()),
    };
    for (_, r) in rows {
        t.beta_mrad.push(r[0]);
        t.singles.push(r[1]);
        t.coincidence.push(r[2]);
    }
    Ok(t)
}

/// Reads `beta_mrad,counts[,sigma]` data; angles are returned in radians.
pub fn read_reference_csv<R: Read>(input: R) -> Result<ReferenceSeries> {
    let rows = read_table(
        input,
        &[&["beta_mrad", "counts"], &["beta_mrad", "counts", "sigma"]],
    )?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "reference contains no data rows".into(),
        });
    }
    let with_sigma = rows[0].1.len() == 3;
    let mut beta = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    let mut sigma = Vec::with_capacity(if with_sigma { rows.len() } else { 0 });
    let mut prev: Option<f64> = None;
    for (line, r) in rows {
        if let Some(p) = prev.filter(|p| !(r[0] > *p)) {
            return Err(Error::Parse {
                line,
                message: format!("beta_mrad {} does not increase past {}", r[0], p),
            });
        }
        prev = Some(r[0]);
        if !(r[1] >= 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("counts must be >= 0, got {}", r[1]),
            });
        }
        if with_sigma && !(r[2] > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("sigma must be > 0, got {}", r[2]),
            });
        }
        beta.push(r[0] / 1e3);
        counts.push(r[1]);
        if with_sigma {
            sigma.push(r[2]);
        }
    }
    ReferenceSeries::new(beta, counts, with_sigma.then_some(sigma))
}

pub fn load_reference(path: &Path) -> Result<ReferenceSeries> {
    read_reference_csv(fs::File::open(path)?)
}

/// Header-checked numeric table; each row comes with its 1-based line number.
fn read_table<R: Read>(input: R, headers: &[&[&str]]) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "file is empty".into(),
            });
        }
    };
    let found: Vec<&str> = header.iter().collect();
    let Some(expected) = headers.iter().find(|h| **h == found.as_slice()) else {
        let wanted: Vec<String> = headers.iter().map(|h| h.join(",")).collect();
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header '{}' is not one of: {}",
                found.join(","),
                wanted.join(" | ")
            ),
        });
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != expected.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        let values = rec
            .iter()
            .zip(expected.iter())
            .map(|(s, name)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("{name}: '{s}' is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Modes actually summed for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModesUsed {
    pub width_modes: usize,
    pub total_modes: u64,
    pub hyperbolic_level: u64,
}

impl From<&ModeSet> for ModesUsed {
    fn from(m: &ModeSet) -> Self {
        Self {
            width_modes: m.width_count(),
            total_modes: m.total(),
            hyperbolic_level: m.level(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Wall-clock seconds spent evaluating the pattern, when recorded.
    pub wall_seconds: Option<f64>,
}

/// Record of a run: resolved inputs, the truncation used and the files written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub modes: ModesUsed,
    pub timing: Timing,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })
    }
}

/// Line plot of the normalized singles and coincidence patterns.
pub fn render_svg(series: &PatternSeries, title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    let data = series.normalized();
    let x_lo = data.beta_grid.first().copied().unwrap_or(-1e-3) * 1e3;
    let x_hi = data.beta_grid.last().copied().unwrap_or(1e-3) * 1e3;
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |x: f64| LEFT + (x * 1e3 - x_lo) / x_span * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - y.clamp(0.0, 1.0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_lo + f * x_span;
        let x = LEFT + f * (W - LEFT - RIGHT);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{xv:.2}</text>"#,
            y0 + 20.0
        );
        let y = py(f);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{f:.2}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">beta (mrad)</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">normalized counts</text>"#,
        (y0 + y1) / 2.0
    );
    for (values, colour, label, slot) in [
        (&data.singles, "#1f5fbf", "singles", 0.0),
        (&data.coincidence, "#c0392b", "coincidence", 1.0),
    ] {
        let points: Vec<String> = data
            .beta_grid
            .iter()
            .zip(values.iter())
            .map(|(b, v)| format!("{:.2},{:.2}", px(*b), py(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + slot * 18.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            x1 - 130.0,
            x1 - 105.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{label}</text>"#,
            x1 - 100.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
