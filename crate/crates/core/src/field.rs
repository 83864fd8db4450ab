//! Photon wave function inside a rectangular slit.
//!
//! The field is a double series of hard-wall modes
//! `sin((2n+1) pi x / b) sin((2m+1) pi y / a) exp(i kz z)` whose coefficients
//! come from projecting the unit incident plane wave onto the aperture. Only
//! odd harmonics survive the projection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{IncidentWave, ModeVariant, SlitGeometry, SlitIndex, TruncationPolicy};
use crate::error::{Error, Result};
use crate::vector::ComplexVec3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative slack when deciding whether a point sits on a slit edge.
const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    /// Width index; harmonic `2m + 1` across `a`.
    pub m: u32,
    /// Length index; harmonic `2n + 1` along `b`.
    pub n: u32,
}

impl ModeIndex {
    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }

    pub fn width_harmonic(&self) -> u32 {
        2 * self.m + 1
    }

    pub fn length_harmonic(&self) -> u32 {
        2 * self.n + 1
    }
}

/// `sin(pi t)` with exact zeros at integer `t`.
pub fn sin_pi(t: f64) -> f64 {
    let r = t - 2.0 * (t * 0.5).round();
    if r == 0.0 || r.abs() == 1.0 {
        0.0
    } else {
        (PI * r).sin()
    }
}

/// Projection coefficient `16 A_j / ((2m+1)(2n+1) pi^2)`.
pub fn mode_coefficient(idx: ModeIndex, amplitude_j: f64) -> f64 {
    let p = idx.width_harmonic() as f64;
    let q = idx.length_harmonic() as f64;
    16.0 * amplitude_j / (p * q * PI * PI)
}

/// Square root of `k^2 - ((2n+1) pi / b)^2 - ((2m+1) pi / a)^2` on the
/// decaying branch (`+i sqrt|.|` below cutoff).
pub fn longitudinal_wavenumber(idx: ModeIndex, geom: &SlitGeometry, wavelength: f64) -> Complex64 {
    kz_from_harmonics(
        idx.width_harmonic() as f64,
        idx.length_harmonic() as f64,
        geom,
        2.0 * PI / wavelength,
    )
}

pub(crate) fn kz_from_harmonics(p: f64, q: f64, geom: &SlitGeometry, k: f64) -> Complex64 {
    let ky = p * PI / geom.width_a;
    let kx = q * PI / geom.length_b;
    let radicand = k * k - kx * kx - ky * ky;
    if radicand >= 0.0 {
        Complex64::new(radicand.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-radicand).sqrt())
    }
}

/// `|exp(i kz c')|` for a mode.
pub fn attenuation(kz: Complex64, thickness: f64) -> f64 {
    (-kz.im * thickness).exp()
}

/// Retained modes. For each width index `m` (a prefix `0..len`), the retained
/// length indices form a prefix `0..counts[m]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    counts: Vec<u32>,
    /// Hyperbolic level: every retained mode has `(2m+1)(2n+1) <= level`.
    level: u64,
}

impl ModeSet {
    /// Applies the truncation policy.
    ///
    /// Modes are admitted in increasing `(2m+1)(2n+1)` order until the
    /// remaining tail of the bound series `sum 1/((2m+1)(2n+1))^2` over the
    /// capped rectangle falls below `tail_eps` of its total. Each term of that
    /// series bounds a coefficient times both aperture line integrals. Modes
    /// whose attenuation across the slit thickness is below
    /// `evanescent_floor` are then dropped.
    pub fn select(geom: &SlitGeometry, wavelength: f64, policy: &TruncationPolicy) -> Self {
        let level = hyperbolic_level(policy);
        let k = 2.0 * PI / wavelength;
        let mut counts = Vec::new();
        for m in 0..=policy.max_m {
            let p = 2 * m as u64 + 1;
            if p > level {
                break;
            }
            let by_level = ((level / p - 1) / 2).min(policy.max_n as u64) as u32;
            let count = match attenuation_limit(m, geom, k, policy.evanescent_floor) {
                None => 0,
                Some(n_att) => by_level.min(n_att) + 1,
            };
            if count == 0 {
                break;
            }
            counts.push(count);
        }
        Self { counts, level }
    }

    pub fn width_count(&self) -> usize {
        self.counts.len()
    }

    /// Number of retained length indices for width index `m`.
    pub fn length_count(&self, m: u32) -> u32 {
        self.counts.get(m as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn max_n(&self) -> Option<u32> {
        self.counts.iter().max().map(|c| c - 1)
    }

    pub fn contains(&self, idx: ModeIndex) -> bool {
        idx.n < self.length_count(idx.m)
    }

    pub fn iter(&self) -> impl Iterator<Item = ModeIndex> + '_ {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(m, &c)| (0..c).map(move |n| ModeIndex::new(m as u32, n)))
    }
}

/// Largest `n` whose mode `(m, n)` survives the evanescent floor, if any.
fn attenuation_limit(m: u32, geom: &SlitGeometry, k: f64, floor: f64) -> Option<u32> {
    if geom.thickness_c == 0.0 {
        return Some(u32::MAX);
    }
    let p = (2 * m + 1) as f64;
    let ok = |n: u32| {
        attenuation(
            kz_from_harmonics(p, (2 * n + 1) as f64, geom, k),
            geom.thickness_c,
        ) >= floor
    };
    // att >= floor  <=>  (p pi/a)^2 + (q pi/b)^2 <= k^2 + (ln(1/floor)/c')^2
    let kappa = -floor.ln() / geom.thickness_c;
    let ky = p * PI / geom.width_a;
    let budget = k * k + kappa * kappa - ky * ky;
    if budget <= 0.0 && !ok(0) {
        return None;
    }
    let q_max = budget.max(0.0).sqrt() * geom.length_b / PI;
    let mut n = if q_max >= 1.0 {
        (((q_max - 1.0) / 2.0).floor()).min(u32::MAX as f64 - 2.0) as u32
    } else {
        0
    };
    // Correct for rounding in the closed form.
    while n > 0 && !ok(n) {
        n -= 1;
    }
    if !ok(n) {
        return None;
    }
    while n < u32::MAX - 1 && ok(n + 1) {
        n += 1;
    }
    Some(n)
}

/// Smallest odd level `P` such that the bound series restricted to
/// `(2m+1)(2n+1) <= P` captures all but `tail_eps` of the capped rectangle.
pub fn hyperbolic_level(policy: &TruncationPolicy) -> u64 {
    let max_m = policy.max_m as usize;
    let max_n = policy.max_n as usize;
    let len = max_m.max(max_n) + 1;
    let mut prefix = Vec::with_capacity(len);
    let mut acc = 0.0;
    for i in 0..len {
        let q = (2 * i + 1) as f64;
        acc += 1.0 / (q * q);
        prefix.push(acc);
    }
    let captured = |level: u64| -> f64 {
        let mut s = 0.0;
        for m in 0..=max_m {
            let p = 2 * m as u64 + 1;
            if p > level {
                break;
            }
            let n_hi = (((level / p) - 1) / 2).min(max_n as u64) as usize;
            let pf = p as f64;
            s += prefix[n_hi] / (pf * pf);
        }
        s
    };
    let cap = (2 * policy.max_m as u64 + 1) * (2 * policy.max_n as u64 + 1);
    let total = captured(cap);
    let target = total * (1.0 - policy.tail_eps);
    if captured(1) >= target {
        return 1;
    }
    // Odd levels 2j+1; the captured weight is monotone in j.
    let (mut lo, mut hi) = (0u64, (cap - 1) / 2);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if captured(2 * mid + 1) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    2 * hi + 1
}

fn angular_frequency(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

fn time_phase(wavelength: f64, t: f64) -> Complex64 {
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, -angular_frequency(wavelength) * t)
    }
}

/// Maps `v` into `[0, len]`, snapping values within rounding slack of an edge.
fn snap_into(v: f64, len: f64, what: &str) -> Result<f64> {
    let slack = EDGE_SLACK * len;
    if v < -slack || v > len + slack || !v.is_finite() {
        return Err(Error::OutsideDomain(format!(
            "{what} = {v:e} not in [0, {len:e}]"
        )));
    }
    Ok(if v.abs() <= slack {
        0.0
    } else if (v - len).abs() <= slack {
        len
    } else {
        v
    })
}

/// Slit-local `y` coordinate: `y` for slit 1, `y - (a + d)` for slit 2.
pub fn local_y(y: f64, slit: SlitIndex, geom: &SlitGeometry) -> Result<f64> {
    if slit == SlitIndex::Second && geom.slit_count != 2 {
        return Err(Error::OutsideDomain(
            "second slit requested for a single-slit plate".into(),
        ));
    }
    let (lo, _) = geom.slit_interval(slit);
    snap_into(y - lo, geom.width_a, "y")
}

/// Field inside slit `slit` at `(x, y, z)` and time `t`.
///
/// The interior field of the second slit is the translated first-slit field
/// for either [`ModeVariant`]; the variant only changes the diffraction
/// integral.
#[allow(clippy::too_many_arguments)]
pub fn slit_wavefunction(
    x: f64,
    y: f64,
    z: f64,
    t: f64,
    slit: SlitIndex,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    _variant: ModeVariant,
) -> Result<ComplexVec3> {
    let x = snap_into(x, geom.length_b, "x")?;
    let y_eff = local_y(y, slit, geom)?;
    let z = snap_into(z, geom.thickness_c, "z")?;
    let modes = ModeSet::select(geom, wave.wavelength, trunc);
    let s = scalar_series(x, y_eff, z, geom, wave.wavelength, &modes);
    Ok(ComplexVec3::from_real_scaled(
        wave.amplitude,
        s * time_phase(wave.wavelength, t),
    ))
}

/// Unit-amplitude field series at a slit-local point.
pub fn scalar_series(
    x: f64,
    y_eff: f64,
    z: f64,
    geom: &SlitGeometry,
    wavelength: f64,
    modes: &ModeSet,
) -> Complex64 {
    let k = 2.0 * PI / wavelength;
    let max_n = match modes.max_n() {
        Some(n) => n,
        None => return Complex64::new(0.0, 0.0),
    };
    let xs = x / geom.length_b;
    let ys = y_eff / geom.width_a;
    let sx: Vec<f64> = (0..=max_n)
        .map(|n| {
            let q = (2 * n + 1) as f64;
            sin_pi(q * xs) / q
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..modes.width_count() as u32 {
        let p = (2 * m + 1) as f64;
        let sy = sin_pi(p * ys);
        if sy == 0.0 {
            continue;
        }
        let mut inner = Complex64::new(0.0, 0.0);
        for n in 0..modes.length_count(m) {
            let a = sx[n as usize];
            if a == 0.0 {
                continue;
            }
            let phase = if z == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                (Complex64::i() * kz_from_harmonics(p, (2 * n + 1) as f64, geom, k) * z).exp()
            };
            inner += phase * a;
        }
        total += inner * (sy / p);
    }
    total * (16.0 / (PI * PI))
}

/// Field of the infinitely long slit, a single series over width modes.
#[allow(clippy::too_many_arguments)]
pub fn slit_wavefunction_infinite_length(
    y: f64,
    z: f64,
    t: f64,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
) -> Result<ComplexVec3> {
    let y = snap_into(y, geom.width_a, "y")?;
    if !z.is_finite() || z < 0.0 {
        return Err(Error::OutsideDomain(format!("z = {z:e} must be >= 0")));
    }
    let k = wave.wavenumber();
    let ys = y / geom.width_a;
    let mut s = Complex64::new(0.0, 0.0);
    for m in 0..=trunc.max_m {
        let p = (2 * m + 1) as f64;
        let ky = p * PI / geom.width_a;
        let radicand = k * k - ky * ky;
        let kz = if radicand >= 0.0 {
            Complex64::new(radicand.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-radicand).sqrt())
        };
        if attenuation(kz, geom.thickness_c) < trunc.evanescent_floor {
            break;
        }
        let sy = sin_pi(p * ys);
        if sy == 0.0 {
            continue;
        }
        s += (Complex64::i() * kz * z).exp() * (4.0 * sy / (p * PI));
    }
    Ok(ComplexVec3::from_real_scaled(
        wave.amplitude,
        s * time_phase(wave.wavelength, t),
    ))
}

/// Unit-amplitude field and its `z` derivative on a fixed plane `z = z0`,
/// arranged for row-by-row evaluation over the aperture.
#[derive(Debug, Clone)]
pub struct ExitPlaneField {
    length_b: f64,
    width_a: f64,
    /// Per width mode: `(n, C e^{i kz z0}, i kz C e^{i kz z0})` with `C` the unit coefficient.
    rows: Vec<Vec<(f64, Complex64, Complex64)>>,
}

/// Field restricted to one `x` line: width-mode weights for value and `z` derivative.
#[derive(Debug, Clone)]
pub struct FieldRow {
    width_a: f64,
    value: Vec<Complex64>,
    dz: Vec<Complex64>,
}

impl ExitPlaneField {
    pub fn new(geom: &SlitGeometry, wavelength: f64, modes: &ModeSet, z0: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        let rows = (0..modes.width_count() as u32)
            .map(|m| {
                let p = (2 * m + 1) as f64;
                (0..modes.length_count(m))
                    .map(|n| {
                        let q = (2 * n + 1) as f64;
                        let kz = kz_from_harmonics(p, q, geom, k);
                        let c = mode_coefficient(ModeIndex::new(m, n), 1.0);
                        let w = (Complex64::i() * kz * z0).exp() * c;
                        (q, w, Complex64::i() * kz * w)
                    })
                    .collect()
            })
            .collect();
        Self {
            length_b: geom.length_b,
            width_a: geom.width_a,
            rows,
        }
    }

    pub fn row(&self, x: f64) -> FieldRow {
        let xs = x / self.length_b;
        let mut value = Vec::with_capacity(self.rows.len());
        let mut dz = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut v = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for &(q, w, wd) in row {
                let s = sin_pi(q * xs);
                v += w * s;
                d += wd * s;
            }
            value.push(v);
            dz.push(d);
        }
        FieldRow {
            width_a: self.width_a,
            value,
            dz,
        }
    }
}

impl FieldRow {
    /// `(psi, d psi / dz)` where the width sines take `y_mode` as argument.
    pub fn eval(&self, y_mode: f64) -> (Complex64, Complex64) {
        // sin((2m+1) t) by the recurrence s_{m+1} = 2 cos(2t) s_m - s_{m-1}
        let ys = y_mode / self.width_a;
        let s0 = sin_pi(ys);
        let two_cos = 2.0 * (1.0 - 2.0 * s0 * s0);
        let (mut prev, mut cur) = (-s0, s0);
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (wv, wd) in self.value.iter().zip(&self.dz) {
            v += wv * cur;
            d += wd * cur;
            (prev, cur) = (cur, two_cos * cur - prev);
        }
        (v, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use approx::assert_relative_eq;

    fn fig4() -> SimConfig {
        SimConfig::paper_fig4()
    }

    /// Composite Gauss-Legendre on `n` panels, 8 nodes each.
    fn gl_integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        const X: [f64; 4] = [
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ];
        const W: [f64; 4] = [
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ];
        let h = (hi - lo) / panels as f64;
        let mut s = 0.0;
        for i in 0..panels {
            let c = lo + (i as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                s += w * (f(c + 0.5 * h * x) + f(c - 0.5 * h * x));
            }
        }
        s * 0.5 * h
    }

    /// (4/ab) * double integral of A sin(n' pi xi / b) sin(m' pi eta / a), harmonics given directly.
    fn projection_oracle(p: u32, q: u32, a: f64, b: f64, amp: f64) -> f64 {
        let ix = gl_integrate(|xi| (q as f64 * PI * xi / b).sin(), 0.0, b, 64);
        let iy = gl_integrate(|eta| (p as f64 * PI * eta / a).sin(), 0.0, a, 64);
        4.0 / (a * b) * amp * ix * iy
    }

    #[test]
    fn coefficient_matches_projection() {
        let g = fig4().geometry;
        let c00 = mode_coefficient(ModeIndex::new(0, 0), 1.0);
        assert_relative_eq!(c00, 1.621_14, max_relative = 1e-5);
        assert_relative_eq!(
            c00,
            projection_oracle(1, 1, g.width_a, g.length_b, 1.0),
            max_relative = 1e-12
        );

        let c12 = mode_coefficient(ModeIndex::new(1, 2), 0.896);
        assert_relative_eq!(c12, 0.096_83, max_relative = 1e-4);
        assert_relative_eq!(
            c12,
            projection_oracle(3, 5, g.width_a, g.length_b, 0.896),
            max_relative = 1e-12
        );
    }

    #[test]
    fn even_harmonics_project_to_zero() {
        let g = fig4().geometry;
        let v = projection_oracle(1, 2, g.width_a, g.length_b, 1.0);
        assert!(v.abs() < 1e-12, "{v}");
        let v = projection_oracle(4, 3, g.width_a, g.length_b, 1.0);
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn fundamental_mode_propagates() {
        let c = fig4();
        let kz = longitudinal_wavenumber(ModeIndex::new(0, 0), &c.geometry, c.wave.wavelength);
        assert_eq!(kz.im, 0.0);
        let k = c.wave.wavenumber();
        let expect =
            (k * k - (PI / c.geometry.width_a).powi(2) - (PI / c.geometry.length_b).powi(2)).sqrt();
        assert_relative_eq!(kz.re, expect, max_relative = 1e-15);
        assert_relative_eq!(kz.re, 6.859_330_032e6, max_relative = 1e-9);
    }

    #[test]
    fn first_evanescent_width_mode() {
        let c = fig4();
        // 2a/lambda ~ 283.8, so harmonic 283 propagates and 285 does not.
        let ratio = 2.0 * c.geometry.width_a / c.wave.wavelength;
        assert!(ratio > 283.0 && ratio < 285.0);
        let below = longitudinal_wavenumber(ModeIndex::new(141, 0), &c.geometry, c.wave.wavelength);
        assert!(below.im == 0.0 && below.re > 0.0);
        let above = longitudinal_wavenumber(ModeIndex::new(142, 0), &c.geometry, c.wave.wavelength);
        assert_eq!(above.re, 0.0);
        assert!(above.im > 0.0);
    }

    #[test]
    fn cutoff_width_gives_zero_wavenumber() {
        // a = lambda/2 * (2m+1) with the length term made negligible
        let lambda = 1e-6;
        let g = SlitGeometry {
            width_a: lambda / 2.0 * 3.0,
            length_b: 1e12,
            thickness_c: 0.0,
            separation_d: 0.0,
            slit_count: 1,
        };
        let kz = longitudinal_wavenumber(ModeIndex::new(1, 0), &g, lambda);
        assert!(kz.norm() < 1e-3 * 2.0 * PI / lambda, "{kz}");
    }

    #[test]
    fn evanescent_terms_decay_through_plate() {
        let c = fig4();
        let g = c.geometry;
        for m in [142u32, 150, 200] {
            for n in [0u32, 10, 1000] {
                let kz = longitudinal_wavenumber(ModeIndex::new(m, n), &g, c.wave.wavelength);
                let at0 = (Complex64::i() * kz * 0.0).exp().norm();
                let atc = (Complex64::i() * kz * g.thickness_c).exp().norm();
                assert!(atc <= at0);
            }
        }
    }

    #[test]
    fn edges_are_exact_zeros() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(20, 40);
        for slit in [SlitIndex::First, SlitIndex::Second] {
            let (lo, hi) = g.slit_interval(slit);
            for (x, y) in [
                (0.0, lo + 0.3 * g.width_a),
                (g.length_b, lo + 0.7 * g.width_a),
                (0.4 * g.length_b, lo),
                (0.6 * g.length_b, hi),
            ] {
                let f = slit_wavefunction(
                    x,
                    y,
                    0.5 * g.thickness_c,
                    0.0,
                    slit,
                    &g,
                    &c.wave,
                    &t,
                    c.variant,
                )
                .unwrap();
                assert_eq!(f, ComplexVec3::ZERO, "slit {slit:?} at ({x}, {y})");
            }
        }
    }

    #[test]
    fn center_value_converges_to_amplitude() {
        let c = fig4();
        let g = c.geometry;
        let mut last = f64::INFINITY;
        for cut in [10u32, 100, 500, 2000] {
            let t = TruncationPolicy::rectangular(cut, cut);
            let f = slit_wavefunction(
                0.5 * g.length_b,
                0.5 * g.width_a,
                0.0,
                0.0,
                SlitIndex::First,
                &g,
                &c.wave,
                &t,
                c.variant,
            )
            .unwrap();
            let err = (f.x - 0.896).norm();
            assert!(err < last, "cut {cut}: {err} !< {last}");
            assert!((f.x - f.y).norm() == 0.0 && (f.x - f.z).norm() == 0.0);
            last = err;
        }
        assert!(last < 0.01 * 0.896, "{last}");
    }

    #[test]
    fn second_slit_is_translated_first_slit() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(15, 25);
        for variant in [ModeVariant::LiteralEq41, ModeVariant::ShiftedMode] {
            for (u, x, z) in [(0.2, 0.3, 0.0), (0.55, 0.71, 0.4), (0.9, 0.05, 1.0)] {
                let u = u * g.width_a;
                let x = x * g.length_b;
                let z = z * g.thickness_c;
                let f1 =
                    slit_wavefunction(x, u, z, 0.0, SlitIndex::First, &g, &c.wave, &t, variant)
                        .unwrap();
                let f2 = slit_wavefunction(
                    x,
                    g.pitch() + u,
                    z,
                    0.0,
                    SlitIndex::Second,
                    &g,
                    &c.wave,
                    &t,
                    variant,
                )
                .unwrap();
                assert!((f1 - f2).norm_sqr().sqrt() <= 1e-12 * f1.norm_sqr().sqrt());
            }
        }
    }

    #[test]
    fn outside_aperture_is_rejected() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(2, 2);
        let r = slit_wavefunction(
            -1e-6,
            0.5 * g.width_a,
            0.0,
            0.0,
            SlitIndex::First,
            &g,
            &c.wave,
            &t,
            c.variant,
        );
        assert!(matches!(r, Err(Error::OutsideDomain(_))));
        let r = slit_wavefunction(
            0.1 * g.length_b,
            g.width_a * 1.5,
            0.0,
            0.0,
            SlitIndex::First,
            &g,
            &c.wave,
            &t,
            c.variant,
        );
        assert!(r.is_err());
        let r = slit_wavefunction(
            0.1 * g.length_b,
            0.5 * g.width_a,
            2.0 * g.thickness_c,
            0.0,
            SlitIndex::First,
            &g,
            &c.wave,
            &t,
            c.variant,
        );
        assert!(r.is_err());
        let mut single = g;
        single.slit_count = 1;
        let r = slit_wavefunction(
            0.1,
            g.pitch() + 1e-5,
            0.0,
            0.0,
            SlitIndex::Second,
            &single,
            &c.wave,
            &t,
            c.variant,
        );
        assert!(r.is_err());
    }

    #[test]
    fn time_dependence_is_a_pure_phase() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(5, 5);
        let at = |time: f64| {
            slit_wavefunction(
                0.3 * g.length_b,
                0.4 * g.width_a,
                0.2 * g.thickness_c,
                time,
                SlitIndex::First,
                &g,
                &c.wave,
                &t,
                c.variant,
            )
            .unwrap()
        };
        let f0 = at(0.0);
        let f1 = at(1.7e-15);
        assert_relative_eq!(f0.norm_sqr(), f1.norm_sqr(), max_relative = 1e-12);
    }

    #[test]
    fn infinite_length_field() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(2000, 0);
        for y in [0.0, g.width_a] {
            assert_eq!(
                slit_wavefunction_infinite_length(y, 0.0, 0.0, &g, &c.wave, &t).unwrap(),
                ComplexVec3::ZERO
            );
        }
        let mut last = f64::INFINITY;
        for cut in [10u32, 100, 1000] {
            let t = TruncationPolicy::rectangular(cut, 0);
            let f = slit_wavefunction_infinite_length(0.5 * g.width_a, 0.0, 0.0, &g, &c.wave, &t)
                .unwrap();
            let err = (f.x - 0.896).norm();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
        assert!(
            slit_wavefunction_infinite_length(1.1 * g.width_a, 0.0, 0.0, &g, &c.wave, &t).is_err()
        );
    }

    #[test]
    fn long_slit_matches_infinite_length_limit() {
        let c = fig4();
        let g = c.geometry;
        // Alternating length series: the tail after n terms is below the next term 4/(pi (2n+3)).
        let max_n = 6400;
        assert!(4.0 / (PI * (2 * max_n + 3) as f64) < 1e-4);
        let finite = TruncationPolicy::rectangular(40, max_n);
        let infinite = TruncationPolicy::rectangular(40, 0);
        for (y, z) in [(0.5, 0.0), (0.3, 0.5), (0.77, 1.0)] {
            let y = y * g.width_a;
            let z = z * g.thickness_c;
            let f = slit_wavefunction(
                0.5 * g.length_b,
                y,
                z,
                0.0,
                SlitIndex::First,
                &g,
                &c.wave,
                &finite,
                c.variant,
            )
            .unwrap();
            let i = slit_wavefunction_infinite_length(y, z, 0.0, &g, &c.wave, &infinite).unwrap();
            let rel = (f.x - i.x).norm() / i.x.norm();
            assert!(rel < 0.01, "y={y} z={z}: {rel}");
        }
    }

    #[test]
    fn helmholtz_residual_is_second_order() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(3, 3);
        let modes = ModeSet::select(&g, c.wave.wavelength, &t);
        let k = c.wave.wavenumber();
        let psi = |x: f64, y: f64, z: f64| scalar_series(x, y, z, &g, c.wave.wavelength, &modes);
        let residual = |x: f64, y: f64, z: f64, h: f64| {
            let c0 = psi(x, y, z);
            let lap = (psi(x + h, y, z)
                + psi(x - h, y, z)
                + psi(x, y + h, z)
                + psi(x, y - h, z)
                + psi(x, y, z + h)
                + psi(x, y, z - h)
                - c0 * 6.0)
                / (h * h);
            (lap + c0 * (k * k)).norm() / (c0 * (k * k)).norm()
        };
        let h = 2e-8;
        let r1 = residual(0.37 * g.length_b, 0.41 * g.width_a, 0.5 * g.thickness_c, h);
        let r2 = residual(
            0.37 * g.length_b,
            0.41 * g.width_a,
            0.5 * g.thickness_c,
            h / 2.0,
        );
        assert!((r1 / r2 - 4.0).abs() < 0.5, "ratio {}", r1 / r2);
    }

    #[test]
    fn mode_set_respects_policy() {
        let c = fig4();
        let set = ModeSet::select(&c.geometry, c.wave.wavelength, &c.truncation);
        assert!(set.total() > 1000);
        // width modes stop shortly after the first evanescent harmonic
        assert!(
            set.width_count() > 142 && set.width_count() < 160,
            "{}",
            set.width_count()
        );
        for idx in set.iter().step_by(97) {
            assert!((idx.width_harmonic() as u64) * (idx.length_harmonic() as u64) <= set.level());
            let kz = longitudinal_wavenumber(idx, &c.geometry, c.wave.wavelength);
            assert!(attenuation(kz, c.geometry.thickness_c) >= c.truncation.evanescent_floor);
        }
        let next = ModeIndex::new(set.width_count() as u32, 0);
        let kz = longitudinal_wavenumber(next, &c.geometry, c.wave.wavelength);
        assert!(attenuation(kz, c.geometry.thickness_c) < c.truncation.evanescent_floor);

        let rect = ModeSet::select(
            &c.geometry,
            c.wave.wavelength,
            &TruncationPolicy::rectangular(10, 10),
        );
        assert_eq!(rect.total(), 121);
    }

    #[test]
    fn hyperbolic_level_tracks_tail() {
        let loose = TruncationPolicy {
            tail_eps: 1e-2,
            ..Default::default()
        };
        let tight = TruncationPolicy {
            tail_eps: 1e-4,
            ..Default::default()
        };
        let l1 = hyperbolic_level(&loose);
        let l2 = hyperbolic_level(&tight);
        assert!(l1 % 2 == 1 && l2 % 2 == 1);
        assert!(l2 > 10 * l1);
        assert!((10_000..40_000).contains(&l2), "{l2}");
    }

    #[test]
    fn sin_pi_has_exact_zeros() {
        for t in [0.0, 1.0, -3.0, 285.0, 28_603.0] {
            assert_eq!(sin_pi(t), 0.0);
        }
        assert_relative_eq!(sin_pi(0.5), 1.0);
        assert_relative_eq!(sin_pi(101.25), (101.25 * PI).sin(), epsilon = 1e-12);
    }

    #[test]
    fn exit_plane_rows_match_series() {
        let cfg = fig4();
        let g = cfg.geometry;
        let modes = ModeSet::select(
            &g,
            cfg.wave.wavelength,
            &TruncationPolicy::rectangular(40, 30),
        );
        let plane = ExitPlaneField::new(&g, cfg.wave.wavelength, &modes, g.thickness_c);
        for (xf, yf) in [(0.1, 0.2), (0.5, 0.5), (0.77, 0.93), (0.013, 0.999)] {
            let (x, y) = (xf * g.length_b, yf * g.width_a);
            let (psi, _) = plane.row(x).eval(y);
            let direct = scalar_series(x, y, g.thickness_c, &g, cfg.wave.wavelength, &modes);
            assert!(
                (psi - direct).norm() < 1e-12 * direct.norm().max(1.0),
                "{psi} vs {direct}"
            );
        }
        assert_eq!(
            plane.row(0.3 * g.length_b).eval(0.0).0,
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(
            plane.row(0.3 * g.length_b).eval(g.width_a).0,
            Complex64::new(0.0, 0.0)
        );
    }
}
