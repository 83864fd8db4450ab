//! Physical parameters and run configuration.
//!
//! Everything here is strict SI: lengths in meters, angles in radians. Unit
//! conversion from display units (nm, mm, mrad) happens in [`crate::io`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `|c1^2 + c2^2 - 1|`.
///
/// Loose enough to admit the published (0.955, 0.298) pair, whose squares sum
/// to 1.000829.
pub const DEFAULT_NORMALIZATION_TOL: f64 = 2e-3;

/// Default screen distance in meters.
pub const DEFAULT_SCREEN_R: f64 = 1.0;

/// Rectangular slit plate geometry. One or two identical slits.
///
/// Slit 1 occupies `0 <= x <= b, 0 <= y <= a`; slit 2 is displaced along `y`
/// by `a + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlitGeometry {
    pub width_a: f64,
    pub length_b: f64,
    pub thickness_c: f64,
    pub separation_d: f64,
    pub slit_count: u8,
}

impl SlitGeometry {
    /// Offset of the second slit's lower edge from the first slit's lower edge.
    pub fn pitch(&self) -> f64 {
        self.width_a + self.separation_d
    }

    /// `y` interval of the given slit (1-based).
    pub fn slit_interval(&self, slit: SlitIndex) -> (f64, f64) {
        match slit {
            SlitIndex::First => (0.0, self.width_a),
            SlitIndex::Second => (self.pitch(), self.pitch() + self.width_a),
        }
    }

    /// Full extent of the aperture group along `y`: `a` or `2a + d`.
    pub fn extent_y(&self) -> f64 {
        if self.slit_count == 2 {
            2.0 * self.width_a + self.separation_d
        } else {
            self.width_a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlitIndex {
    First,
    Second,
}

impl SlitIndex {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(SlitIndex::First),
            2 => Ok(SlitIndex::Second),
            _ => Err(Error::InvalidArgument(format!(
                "slit index must be 1 or 2, got {n}"
            ))),
        }
    }
}

/// Monochromatic incident plane wave and the two-slit superposition weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentWave {
    pub wavelength: f64,
    /// Real amplitude vector `(A_x, A_y, A_z)`, arbitrary units.
    pub amplitude: [f64; 3],
    pub c1: f64,
    pub c2: f64,
}

impl IncidentWave {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Returns `k = 2 pi / lambda`.
pub fn wavenumber(wave: &IncidentWave) -> Result<f64> {
    if !(wave.wavelength > 0.0) || !wave.wavelength.is_finite() {
        return Err(Error::InvalidConfig(vec![Violation::new(
            "wavelength",
            format!("must be positive and finite, got {}", wave.wavelength),
        )]));
    }
    Ok(wave.wavenumber())
}

/// Far-field observation direction.
///
/// `alpha` is the angle between the wave vector and the `yz` plane, `beta`
/// the angle to the `xz` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorDirection {
    pub alpha: f64,
    pub beta: f64,
    pub screen_r: f64,
}

impl DetectorDirection {
    pub fn new(alpha: f64, beta: f64, screen_r: f64) -> Self {
        Self {
            alpha,
            beta,
            screen_r,
        }
    }

    /// `sqrt(cos^2 alpha - sin^2 beta)`, the `z` direction cosine.
    pub fn direction_cosine(&self) -> Result<f64> {
        let cos2_alpha = self.alpha.cos().powi(2);
        let sin2_beta = self.beta.sin().powi(2);
        if sin2_beta > cos2_alpha {
            return Err(Error::DirectionOutOfDomain {
                cos2_alpha,
                sin2_beta,
            });
        }
        Ok((cos2_alpha - sin2_beta).sqrt())
    }

    /// Unit vector along the observation direction.
    pub fn unit_vector(&self) -> Result<[f64; 3]> {
        Ok([self.alpha.sin(), self.beta.sin(), self.direction_cosine()?])
    }
}

/// Limits on the double modal series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Largest retained width index `m` (harmonic `2m + 1`).
    pub max_m: u32,
    /// Largest retained length index `n` (harmonic `2n + 1`).
    pub max_n: u32,
    /// Relative tail of the coefficient bound series that may be discarded.
    pub tail_eps: f64,
    /// Modes attenuated below this factor across the slit thickness are dropped.
    pub evanescent_floor: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_m: 1000,
            max_n: 20_000,
            tail_eps: 1e-4,
            evanescent_floor: 1e-12,
        }
    }
}

impl TruncationPolicy {
    /// Plain rectangle `m <= max_m, n <= max_n` with only the evanescent filter.
    pub fn rectangular(max_m: u32, max_n: u32) -> Self {
        Self {
            max_m,
            max_n,
            tail_eps: f64::MIN_POSITIVE,
            evanescent_floor: 1e-300,
        }
    }
}

/// How the second slit's mode shape enters the diffraction integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeVariant {
    /// `sin((2m+1) pi y'/a)` integrated over `[a+d, 2a+d]` unshifted.
    #[default]
    #[serde(rename = "literal")]
    LiteralEq41,
    /// Mode referenced to the second slit's own edge, `sin((2m+1) pi (y'-(a+d))/a)`.
    #[serde(rename = "shifted")]
    ShiftedMode,
}

impl ModeVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeVariant::LiteralEq41 => "literal",
            ModeVariant::ShiftedMode => "shifted",
        }
    }
}

impl std::str::FromStr for ModeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ModeVariant::LiteralEq41),
            "shifted" => Ok(ModeVariant::ShiftedMode),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant '{other}' (expected literal or shifted)"
            ))),
        }
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every invariant using the default normalization tolerance.
pub fn validate(
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
) -> Vec<Violation> {
    validate_with(geom, wave, trunc, DEFAULT_NORMALIZATION_TOL)
}

pub fn validate_with(
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    normalization_tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, msg: String| {
        if !ok {
            out.push(Violation::new(field, msg));
        }
    };

    let g = geom;
    check(
        g.width_a > 0.0 && g.width_a.is_finite(),
        "width_a",
        format!("must be > 0, got {}", g.width_a),
    );
    check(
        g.length_b > 0.0 && g.length_b.is_finite(),
        "length_b",
        format!("must be > 0, got {}", g.length_b),
    );
    check(
        g.thickness_c >= 0.0 && g.thickness_c.is_finite(),
        "thickness_c",
        format!("must be >= 0, got {}", g.thickness_c),
    );
    check(
        matches!(g.slit_count, 1 | 2),
        "slit_count",
        format!("must be 1 or 2, got {}", g.slit_count),
    );
    if g.slit_count == 2 {
        check(
            g.separation_d >= 0.0 && g.separation_d.is_finite(),
            "separation_d",
            format!("must be >= 0 for two slits, got {}", g.separation_d),
        );
    }

    check(
        wave.wavelength > 0.0 && wave.wavelength.is_finite(),
        "wavelength",
        format!("must be > 0, got {}", wave.wavelength),
    );
    check(
        wave.amplitude.iter().all(|v| v.is_finite()),
        "amplitude",
        "components must be finite".to_string(),
    );
    let norm = wave.c1 * wave.c1 + wave.c2 * wave.c2;
    check(
        (norm - 1.0).abs() <= normalization_tol,
        "normalization",
        format!("c1^2 + c2^2 = {norm:.6} deviates from 1 by more than {normalization_tol:e}"),
    );

    check(
        trunc.tail_eps > 0.0 && trunc.tail_eps < 1.0,
        "tail_eps",
        format!("must lie in (0, 1), got {}", trunc.tail_eps),
    );
    check(
        trunc.evanescent_floor > 0.0 && trunc.evanescent_floor < 1.0,
        "evanescent_floor",
        format!("must lie in (0, 1), got {}", trunc.evanescent_floor),
    );
    out
}

/// Everything needed to evaluate a far-field pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub geometry: SlitGeometry,
    pub wave: IncidentWave,
    pub truncation: TruncationPolicy,
    pub variant: ModeVariant,
    pub alpha: f64,
    pub screen_r: f64,
    pub normalization_tol: f64,
}

impl SimConfig {
    /// Double-slit parameters of the 916 nm degenerate two-photon experiment.
    pub fn paper_fig4() -> Self {
        Self {
            geometry: SlitGeometry {
                width_a: 0.13e-3,
                length_b: 1.31e-2,
                thickness_c: 2.65e-5,
                separation_d: 0.4e-3,
                slit_count: 2,
            },
            wave: IncidentWave {
                wavelength: 916e-9,
                amplitude: [0.896; 3],
                c1: 0.955,
                c2: 0.298,
            },
            truncation: TruncationPolicy::default(),
            variant: ModeVariant::default(),
            alpha: 0.0,
            screen_r: DEFAULT_SCREEN_R,
            normalization_tol: DEFAULT_NORMALIZATION_TOL,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = validate_with(
            &self.geometry,
            &self.wave,
            &self.truncation,
            self.normalization_tol,
        );
        if !(self.screen_r > 0.0 && self.screen_r.is_finite()) {
            v.push(Violation::new(
                "screen_R",
                format!("must be > 0, got {}", self.screen_r),
            ));
        }
        if !self.alpha.is_finite() || self.alpha.cos().powi(2) <= 0.0 {
            v.push(Violation::new(
                "alpha",
                format!("unusable angle {}", self.alpha),
            ));
        }
        if !(self.normalization_tol >= 0.0) {
            v.push(Violation::new(
                "normalization_tol",
                format!("must be >= 0, got {}", self.normalization_tol),
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

    pub fn direction(&self, beta: f64) -> DetectorDirection {
        DetectorDirection::new(self.alpha, beta, self.screen_r)
    }
}
