//! Singles and coincidence patterns and the fringe metrics derived from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::kirchhoff::FarField;
use crate::vector::ComplexVec3;

/// Half-width of the angular window used for spacing and visibility.
pub const FRINGE_WINDOW: f64 = 2e-3;

/// Detector count rate, `|Phi|^2`.
pub fn singles_intensity(amp: &ComplexVec3) -> f64 {
    amp.norm_sqr()
}

/// Joint detection rate `|Phi_s . Phi_i|^2` with the unconjugated product.
pub fn coincidence_intensity(amp_s: &ComplexVec3, amp_i: &ComplexVec3) -> f64 {
    amp_s.dot(amp_i).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Singles,
    Coincidence,
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singles" => Ok(PatternKind::Singles),
            "coincidence" => Ok(PatternKind::Coincidence),
            other => Err(Error::InvalidArgument(format!(
                "unknown pattern '{other}' (expected singles or coincidence)"
            ))),
        }
    }
}

/// Patterns sampled on a strictly increasing detector-angle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSeries {
    pub beta_grid: Vec<f64>,
    pub singles: Vec<f64>,
    pub coincidence: Vec<f64>,
    /// First-slit-only singles, the single-slit envelope.
    pub envelope: Vec<f64>,
    pub normalized: bool,
}

impl PatternSeries {
    pub fn len(&self) -> usize {
        self.beta_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_grid.is_empty()
    }

    pub fn series(&self, which: PatternKind) -> &[f64] {
        match which {
            PatternKind::Singles => &self.singles,
            PatternKind::Coincidence => &self.coincidence,
        }
    }

    /// Each pattern divided by its own maximum.
    pub fn normalized(&self) -> PatternSeries {
        fn scale(v: &[f64]) -> Vec<f64> {
            let max = v.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                v.iter().map(|x| x / max).collect()
            } else {
                v.to_vec()
            }
        }
        PatternSeries {
            beta_grid: self.beta_grid.clone(),
            singles: scale(&self.singles),
            coincidence: scale(&self.coincidence),
            envelope: scale(&self.envelope),
            normalized: true,
        }
    }
}

/// `n` points from `lo` to `hi` inclusive; mirror-symmetric bit for bit when `lo = -hi`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let i = i as f64;
            (lo * (last - i) + hi * i) / last
        })
        .collect()
}

/// Raw (unnormalized) patterns over a uniform `beta` grid.
///
/// Coincidence uses the same amplitude for signal and idler at every angle,
/// the degenerate collinear case. Grid points are evaluated in parallel and
/// returned in grid order.
pub fn sweep(
    beta_min: f64,
    beta_max: f64,
    n_points: usize,
    config: &SimConfig,
) -> Result<PatternSeries> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "sweep needs at least 2 points, got {n_points}"
        )));
    }
    if !(beta_max > beta_min) {
        return Err(Error::InvalidArgument(format!(
            "beta range must be increasing, got [{beta_min}, {beta_max}]"
        )));
    }
    let far = FarField::new(config)?;
    sweep_grid(&far, &uniform_grid(beta_min, beta_max, n_points))
}

/// Patterns at arbitrary strictly increasing angles.
pub fn sweep_grid(far: &FarField, betas: &[f64]) -> Result<PatternSeries> {
    let samples: Vec<(f64, f64, f64)> = betas
        .par_iter()
        .map(|&beta| {
            let amp = far.total(beta).map_err(|e| Error::Model {
                beta,
                source: Box::new(e),
            })?;
            let env = match amp.per_slit {
                Some((phi1, _)) => phi1.norm_sqr(),
                None => amp.value.norm_sqr(),
            };
            Ok((
                singles_intensity(&amp.value),
                coincidence_intensity(&amp.value, &amp.value),
                env,
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = PatternSeries {
        beta_grid: betas.to_vec(),
        singles: Vec::with_capacity(betas.len()),
        coincidence: Vec::with_capacity(betas.len()),
        envelope: Vec::with_capacity(betas.len()),
        normalized: false,
    };
    for (s, c, e) in samples {
        out.singles.push(s);
        out.coincidence.push(c);
        out.envelope.push(e);
    }
    Ok(out)
}

/// Coincidence rate with signal and idler detected at different angles.
pub fn coincidence_two_angle(far: &FarField, beta_signal: f64, beta_idler: f64) -> Result<f64> {
    let s = far.total(beta_signal)?.value;
    let i = far.total(beta_idler)?.value;
    Ok(coincidence_intensity(&s, &i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeMetrics {
    /// Sub-grid peak positions over the whole series.
    pub peak_positions: Vec<f64>,
    /// Mean gap between adjacent peaks with `|beta| <= FRINGE_WINDOW`.
    pub mean_fringe_spacing: Option<f64>,
    /// `(Imax - Imin) / (Imax + Imin)` over the central window.
    pub visibility: f64,
    /// First minimum of the single-slit envelope on the positive side.
    pub first_envelope_zero: Option<f64>,
}

/// Peak and fringe statistics. `None` when the series has no interior maximum.
pub fn fringe_metrics(series: &PatternSeries, which: PatternKind) -> Option<FringeMetrics> {
    let beta = &series.beta_grid;
    let y = series.series(which);
    if y.len() < 3 {
        return None;
    }
    let peaks = local_extrema(y, Extremum::Max);
    if peaks.is_empty() {
        return None;
    }
    let peak_positions: Vec<f64> = peaks.iter().map(|&i| refine(beta, y, i)).collect();

    let central: Vec<f64> = peak_positions
        .iter()
        .copied()
        .filter(|b| b.abs() <= FRINGE_WINDOW)
        .collect();
    let mean_fringe_spacing = if central.len() >= 2 {
        Some((central[central.len() - 1] - central[0]) / (central.len() - 1) as f64)
    } else {
        None
    };

    let in_window = |i: &usize| beta[*i].abs() <= FRINGE_WINDOW;
    let imax = peaks
        .iter()
        .filter(|i| in_window(i))
        .map(|&i| y[i])
        .fold(f64::NAN, f64::max);
    let imin = local_extrema(y, Extremum::Min)
        .iter()
        .filter(|i| in_window(i))
        .map(|&i| y[i])
        .fold(f64::NAN, f64::min);
    let visibility = if imax.is_nan() || imin.is_nan() || imax + imin <= 0.0 {
        0.0
    } else {
        ((imax - imin) / (imax + imin)).clamp(0.0, 1.0)
    };

    Some(FringeMetrics {
        peak_positions,
        mean_fringe_spacing,
        visibility,
        first_envelope_zero: envelope_zero(beta, &series.envelope),
    })
}

fn envelope_zero(beta: &[f64], env: &[f64]) -> Option<f64> {
    if env.len() != beta.len() || env.len() < 3 {
        return None;
    }
    let center = env
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)?;
    local_extrema(env, Extremum::Min)
        .into_iter()
        .find(|&i| i > center && beta[i] > 0.0)
        .map(|i| refine(beta, env, i))
}

#[derive(Clone, Copy, PartialEq)]
enum Extremum {
    Max,
    Min,
}

fn local_extrema(y: &[f64], kind: Extremum) -> Vec<usize> {
    let sign = if kind == Extremum::Max { 1.0 } else { -1.0 };
    (1..y.len() - 1)
        .filter(|&i| {
            let (l, c, r) = (sign * y[i - 1], sign * y[i], sign * y[i + 1]);
            c > l && c >= r
        })
        .collect()
}

/// Vertex of the parabola through three neighbouring samples.
fn refine(beta: &[f64], y: &[f64], i: usize) -> f64 {
    let (ym, y0, yp) = (y[i - 1], y[i], y[i + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom == 0.0 {
        return beta[i];
    }
    let h = 0.5 * (beta[i + 1] - beta[i - 1]);
    let offset = (0.5 * (ym - yp) / denom).clamp(-1.0, 1.0);
    beta[i] + offset * h
}
