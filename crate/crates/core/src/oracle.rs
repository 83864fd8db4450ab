//! Brute-force reference integrals: adaptive quadrature of the aperture line
//! integrals and of the full Kirchhoff surface integral with the exact
//! distance to the observation point.
//!
//! Nothing here goes through the closed-form far-field evaluator, so the two
//! can be checked against each other.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{IncidentWave, ModeVariant, SlitGeometry, SlitIndex, TruncationPolicy};
use crate::error::{Error, Result};
use crate::field::{sin_pi, ExitPlaneField, ModeSet};
use crate::vector::ComplexVec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Bisections allowed after the initial panelling.
    pub max_subdivisions: usize,
    /// Initial panels per oscillation of the integrand.
    pub initial_panels_per_wavelength: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_subdivisions: 20_000,
            initial_panels_per_wavelength: 8,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerances must be > 0, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.initial_panels_per_wavelength < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 panels per wavelength, got {}",
                self.initial_panels_per_wavelength
            )));
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    fn panels_for(&self, oscillations: f64) -> usize {
        let n = (self.initial_panels_per_wavelength as f64 * oscillations).ceil();
        if n.is_finite() {
            (n as usize).max(1)
        } else {
            1
        }
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub subdivisions: usize,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd-indexed nodes and the centre.
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F>(f: &F, lo: f64, hi: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let centre = f(mid)?;
    let mut kronrod = centre * KRONROD_WEIGHTS[7];
    let mut gauss = centre * GAUSS_WEIGHTS[3];
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let pair = f(mid - dx)? + f(mid + dx)?;
        kronrod += pair * KRONROD_WEIGHTS[j];
        if j % 2 == 1 {
            gauss += pair * GAUSS_WEIGHTS[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Ok(Panel {
        lo,
        hi,
        value,
        error,
    })
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature.
///
/// Starts from `panels` equal panels and repeatedly halves the panel with the
/// largest error until the summed error meets `spec`.
pub fn integrate<F>(
    f: F,
    lo: f64,
    hi: f64,
    panels: usize,
    spec: &QuadratureSpec,
) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<Complex64>,
{
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integration limits must be finite, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            subdivisions: 0,
        });
    }
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels + spec.max_subdivisions);
    for i in 0..panels {
        let a = lo + width * i as f64;
        let b = if i + 1 == panels {
            hi
        } else {
            lo + width * (i + 1) as f64
        };
        heap.push(gauss_kronrod(&f, a, b)?);
    }
    let mut subdivisions = 0;
    loop {
        let value: Complex64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= spec.abs_tol.max(spec.rel_tol * value.norm()) {
            return Ok(QuadResult {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Convergence {
                estimate: value,
                error,
                subdivisions,
            });
        }
        // Halve a batch of the worst panels before re-summing.
        let batch = (heap.len() / 16)
            .max(1)
            .min(spec.max_subdivisions - subdivisions);
        for _ in 0..batch {
            let worst = heap.pop().expect("heap holds at least one panel");
            let mid = 0.5 * (worst.lo + worst.hi);
            heap.push(gauss_kronrod(&f, worst.lo, mid)?);
            heap.push(gauss_kronrod(&f, mid, worst.hi)?);
        }
        subdivisions += batch;
    }
}

/// `integral_{u0}^{u1} e^{-i q u} sin(p pi u / L) du` by adaptive quadrature.
pub fn line_integral_quadrature(
    q: f64,
    p: u32,
    length: f64,
    interval: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sine period length must be > 0, got {length}"
        )));
    }
    let (u0, u1) = interval;
    let rate = q.abs().max(p as f64 * PI / length);
    let oscillations = rate * (u1 - u0).abs() / (2.0 * PI);
    let pl = p as f64 / length;
    integrate(
        |u| Ok(Complex64::from_polar(sin_pi(pl * u), -q * u)),
        u0,
        u1,
        spec.panels_for(oscillations),
        spec,
    )
}

/// Full Kirchhoff surface integral over the open aperture(s) at `z = c'`.
///
/// Each slit contributes
/// `-(1/4 pi) integral e^{ikr}/r [d psi/dz + (ik - 1/r) (z_P - c')/r psi] dS`
/// with `r = |P - r'|` evaluated exactly and the `z` derivative of the modal
/// series taken termwise. Two-slit plates are weighted by `c1`, `c2`.
pub fn kirchhoff_surface_quadrature(
    point: [f64; 3],
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    variant: ModeVariant,
    spec: &QuadratureSpec,
) -> Result<ComplexVec3> {
    let scalar = if geom.slit_count == 2 {
        let s1 =
            surface_quadrature_scalar(point, SlitIndex::First, geom, wave, trunc, variant, spec)?;
        let s2 =
            surface_quadrature_scalar(point, SlitIndex::Second, geom, wave, trunc, variant, spec)?;
        s1.value * wave.c1 + s2.value * wave.c2
    } else {
        surface_quadrature_scalar(point, SlitIndex::First, geom, wave, trunc, variant, spec)?.value
    };
    Ok(ComplexVec3::from_real_scaled(wave.amplitude, scalar))
}

/// Unit-amplitude surface integral of one slit.
#[allow(clippy::too_many_arguments)]
pub fn surface_quadrature_scalar(
    point: [f64; 3],
    slit: SlitIndex,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    variant: ModeVariant,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if slit == SlitIndex::Second && geom.slit_count != 2 {
        return Err(Error::InvalidArgument(
            "second slit requested for a single-slit plate".into(),
        ));
    }
    let height = point[2] - geom.thickness_c;
    if !(height > 0.0) || !point.iter().all(|c| c.is_finite()) {
        return Err(Error::OutsideDomain(format!(
            "observation point must lie beyond the exit plane z = {}, got {:?}",
            geom.thickness_c, point
        )));
    }
    let k = 2.0 * PI / wave.wavelength;
    let modes = ModeSet::select(geom, wave.wavelength, trunc);
    let plane = ExitPlaneField::new(geom, wave.wavelength, &modes, geom.thickness_c);
    let (y0, y1) = geom.slit_interval(slit);
    let y_origin = match variant {
        ModeVariant::LiteralEq41 => 0.0,
        ModeVariant::ShiftedMode => y0,
    };

    // Distances are measured relative to |P'| with P' = P - (0, 0, c') so
    // that r - |P'| keeps full precision at large distances.
    let rel = [point[0], point[1], height];
    let base = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
    let base_phase = Complex64::from_polar(1.0, k * base);

    let max_mode_rate_y = (2 * modes.width_count().max(1) - 1) as f64 * PI / geom.width_a;
    let max_mode_rate_x = (2 * modes.max_n().unwrap_or(0) + 1) as f64 * PI / geom.length_b;
    let reach = |lo: f64, hi: f64, c: f64| (lo - c).abs().max((hi - c).abs());
    let rate_x = k * reach(0.0, geom.length_b, rel[0]) / height + max_mode_rate_x;
    let rate_y = k * reach(y0, y1, rel[1]) / height + max_mode_rate_y;
    let panels_x = spec.panels_for(rate_x * geom.length_b / (2.0 * PI));
    let panels_y = spec.panels_for(rate_y * geom.width_a / (2.0 * PI));
    let inner_spec = spec.scaled(0.1);

    let outer = |x: f64| -> Result<Complex64> {
        let row = plane.row(x);
        let dx = rel[0] - x;
        let inner = |y: f64| -> Result<Complex64> {
            let (psi, dpsi) = row.eval(y - y_origin);
            if psi == Complex64::new(0.0, 0.0) && dpsi == Complex64::new(0.0, 0.0) {
                return Ok(psi);
            }
            let dy = rel[1] - y;
            // r - |P'| = (|r'|^2 - 2 P'.r') / (r + |P'|)
            let r2 = dx * dx + dy * dy + height * height;
            let r = r2.sqrt();
            let excess = (x * x + y * y - 2.0 * (rel[0] * x + rel[1] * y)) / (r + base);
            let green = base_phase * Complex64::from_polar(1.0, k * excess) / r;
            let cos = height / r;
            Ok(green * (dpsi + Complex64::new(-1.0 / r, k) * cos * psi))
        };
        Ok(integrate(inner, y0, y1, panels_y, &inner_spec)?.value)
    };
    let res = integrate(outer, 0.0, geom.length_b, panels_x, spec)?;
    let scale = -1.0 / (4.0 * PI);
    Ok(QuadResult {
        value: res.value * scale,
        error: res.error * scale.abs(),
        subdivisions: res.subdivisions,
    })
}
