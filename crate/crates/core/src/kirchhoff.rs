//! Far-field diffraction amplitudes from the modal exit-plane field.
//!
//! Each slit mode contributes
//! `coeff * e^{i kz c'} * [i kz + (ik - 1/R) cos] * Ix(n) * Iy(m)` where the
//! line integrals over the aperture are evaluated in closed form. For a fixed
//! `alpha` everything except `Iy` and the direction cosine is independent of
//! `beta`, so [`FarField`] sums the length modes once per width mode and a
//! detector sweep only pays for the width modes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{
    DetectorDirection, IncidentWave, ModeVariant, SimConfig, SlitGeometry, SlitIndex,
    TruncationPolicy,
};
use crate::error::{Error, Result};
use crate::field::{kz_from_harmonics, mode_coefficient, ModeIndex, ModeSet};
use crate::vector::ComplexVec3;

/// Distance from a resonance `q = +-p pi / L`, in units of `qL/pi`, inside
/// which the series form of the line integral is used.
pub const RESONANCE_EPS: f64 = 1e-6;

/// `integral_{v0}^{v1} e^{i w v} dv`, optionally via the small-argument series.
fn exp_integral(w: f64, v0: f64, v1: f64, expanded: bool) -> Complex64 {
    let len = v1 - v0;
    let mid = 0.5 * (v0 + v1);
    let x = 0.5 * w * len;
    let sinc = if expanded || x == 0.0 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    };
    Complex64::from_polar(len * sinc, w * mid)
}

/// `integral_{u0}^{u1} e^{-i q u} sin(p pi (u - s) / L) du`.
///
/// The sine origin `s` is `0` for [`ModeVariant::LiteralEq41`] and `u0` for
/// [`ModeVariant::ShiftedMode`]. The shifted integral is evaluated as
/// `e^{-i q u0}` times the integral over `[0, u1 - u0]`, so the slit-to-slit
/// phase factor is exact by construction.
pub fn line_integral_sine(
    q: f64,
    p: u32,
    length: f64,
    interval: (f64, f64),
    variant: ModeVariant,
) -> Complex64 {
    let (u0, u1) = interval;
    let shift = match variant {
        ModeVariant::LiteralEq41 => 0.0,
        ModeVariant::ShiftedMode => u0,
    };
    let ks = p as f64 * PI / length;
    let ratio = q * length / PI;
    let p = p as f64;
    let near_plus = (ratio - p).abs() < RESONANCE_EPS;
    let near_minus = (ratio + p).abs() < RESONANCE_EPS;
    let (v0, v1) = (u0 - shift, u1 - shift);
    let plus = exp_integral(ks - q, v0, v1, near_plus);
    let minus = exp_integral(-ks - q, v0, v1, near_minus);
    // (e^{i ks v} - e^{-i ks v}) / 2i
    let base = (plus - minus) * Complex64::new(0.0, -0.5);
    if shift == 0.0 {
        base
    } else {
        base * Complex64::from_polar(1.0, -q * shift)
    }
}

/// `i kz + (ik - 1/R) sqrt(cos^2 alpha - sin^2 beta)` for one mode.
pub fn obliquity_prefactor(
    idx: ModeIndex,
    dir: &DetectorDirection,
    geom: &SlitGeometry,
    wavelength: f64,
) -> Result<Complex64> {
    let k = 2.0 * PI / wavelength;
    let cos = dir.direction_cosine()?;
    let kz = kz_from_harmonics(
        idx.width_harmonic() as f64,
        idx.length_harmonic() as f64,
        geom,
        k,
    );
    Ok(Complex64::i() * kz + Complex64::new(-1.0 / dir.screen_r, k) * cos)
}

/// Far-field amplitude at one detector direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldAmplitude {
    pub direction: DetectorDirection,
    pub value: ComplexVec3,
    /// `(Phi_1, Phi_2)` before weighting by `c1`, `c2`; two-slit plates only.
    pub per_slit: Option<(ComplexVec3, ComplexVec3)>,
}

#[derive(Debug, Clone, Copy)]
struct WidthMode {
    p: u32,
    /// `sum_n C e^{i kz c'} Ix(n)`
    plain: Complex64,
    /// `sum_n C e^{i kz c'} Ix(n) i kz`
    with_kz: Complex64,
}

/// Precomputed far-field evaluator for one configuration and fixed `alpha`.
#[derive(Debug, Clone)]
pub struct FarField {
    geom: SlitGeometry,
    wave: IncidentWave,
    variant: ModeVariant,
    alpha: f64,
    screen_r: f64,
    k: f64,
    modes: ModeSet,
    width_modes: Vec<WidthMode>,
}

impl FarField {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let config = config.validated()?;
        Ok(Self::build(
            config.geometry,
            config.wave,
            &config.truncation,
            config.variant,
            config.alpha,
            config.screen_r,
        ))
    }

    fn build(
        geom: SlitGeometry,
        wave: IncidentWave,
        trunc: &TruncationPolicy,
        variant: ModeVariant,
        alpha: f64,
        screen_r: f64,
    ) -> Self {
        let k = wave.wavenumber();
        let modes = ModeSet::select(&geom, wave.wavelength, trunc);
        let qx = k * alpha.sin();
        let max_n = modes.max_n().unwrap_or(0);
        let ix: Vec<Complex64> = (0..=max_n)
            .map(|n| {
                line_integral_sine(
                    qx,
                    2 * n + 1,
                    geom.length_b,
                    (0.0, geom.length_b),
                    ModeVariant::LiteralEq41,
                )
            })
            .collect();
        let width_modes = (0..modes.width_count() as u32)
            .map(|m| {
                let p = 2 * m + 1;
                let mut plain = Complex64::new(0.0, 0.0);
                let mut with_kz = Complex64::new(0.0, 0.0);
                for n in 0..modes.length_count(m) {
                    let q = 2 * n + 1;
                    let kz = kz_from_harmonics(p as f64, q as f64, &geom, k);
                    let c = mode_coefficient(ModeIndex::new(m, n), 1.0);
                    let w = (Complex64::i() * kz * geom.thickness_c).exp() * ix[n as usize] * c;
                    plain += w;
                    with_kz += w * Complex64::i() * kz;
                }
                WidthMode { p, plain, with_kz }
            })
            .collect();
        Self {
            geom,
            wave,
            variant,
            alpha,
            screen_r,
            k,
            modes,
            width_modes,
        }
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn geometry(&self) -> &SlitGeometry {
        &self.geom
    }

    pub fn wave(&self) -> &IncidentWave {
        &self.wave
    }

    pub fn direction(&self, beta: f64) -> DetectorDirection {
        DetectorDirection::new(self.alpha, beta, self.screen_r)
    }

    /// `-e^{ikR} / (4 pi R)`; the time factor is 1 at `t = 0`.
    fn global_factor(&self) -> Complex64 {
        -Complex64::from_polar(1.0, self.k * self.screen_r) / (4.0 * PI * self.screen_r)
    }

    /// Unit-amplitude scalar far field of one slit.
    pub fn slit_scalar(&self, slit: SlitIndex, beta: f64) -> Result<Complex64> {
        if slit == SlitIndex::Second && self.geom.slit_count != 2 {
            return Err(Error::InvalidArgument(
                "second slit requested for a single-slit plate".into(),
            ));
        }
        let dir = self.direction(beta);
        let cos = dir.direction_cosine()?;
        let g = Complex64::new(-1.0 / self.screen_r, self.k) * cos;
        let qy = self.k * beta.sin();
        let interval = self.geom.slit_interval(slit);
        let mut sum = Complex64::new(0.0, 0.0);
        for wm in &self.width_modes {
            let iy = line_integral_sine(qy, wm.p, self.geom.width_a, interval, self.variant);
            sum += iy * (wm.with_kz + g * wm.plain);
        }
        Ok(sum * self.global_factor())
    }

    pub fn slit_amplitude(&self, slit: SlitIndex, beta: f64) -> Result<ComplexVec3> {
        Ok(ComplexVec3::from_real_scaled(
            self.wave.amplitude,
            self.slit_scalar(slit, beta)?,
        ))
    }

    /// `c1 Phi_1 + c2 Phi_2`, or `Phi_1` for a single slit.
    pub fn total(&self, beta: f64) -> Result<FarFieldAmplitude> {
        self.total_with(beta, self.wave.c1, self.wave.c2)
    }

    pub fn total_with(&self, beta: f64, c1: f64, c2: f64) -> Result<FarFieldAmplitude> {
        let direction = self.direction(beta);
        let phi1 = self.slit_amplitude(SlitIndex::First, beta)?;
        if self.geom.slit_count == 2 {
            let phi2 = self.slit_amplitude(SlitIndex::Second, beta)?;
            Ok(FarFieldAmplitude {
                direction,
                value: phi1 * c1 + phi2 * c2,
                per_slit: Some((phi1, phi2)),
            })
        } else {
            Ok(FarFieldAmplitude {
                direction,
                value: phi1,
                per_slit: None,
            })
        }
    }
}

fn far_field_for(
    dir: &DetectorDirection,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    variant: ModeVariant,
) -> Result<FarField> {
    dir.direction_cosine()?;
    if !(dir.screen_r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "screen distance must be > 0, got {}",
            dir.screen_r
        )));
    }
    Ok(FarField::build(
        *geom,
        *wave,
        trunc,
        variant,
        dir.alpha,
        dir.screen_r,
    ))
}

/// Far field of a single slit in direction `dir`.
pub fn slit_amplitude(
    slit: SlitIndex,
    dir: &DetectorDirection,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    variant: ModeVariant,
) -> Result<ComplexVec3> {
    far_field_for(dir, geom, wave, trunc, variant)?.slit_amplitude(slit, dir.beta)
}

/// Coherent superposition of both slits in direction `dir`.
pub fn total_amplitude(
    dir: &DetectorDirection,
    geom: &SlitGeometry,
    wave: &IncidentWave,
    trunc: &TruncationPolicy,
    variant: ModeVariant,
) -> Result<FarFieldAmplitude> {
    far_field_for(dir, geom, wave, trunc, variant)?.total(dir.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig4() -> SimConfig {
        SimConfig::paper_fig4()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn rel3(a: ComplexVec3, b: ComplexVec3) -> f64 {
        (a - b).norm_sqr().sqrt() / b.norm_sqr().sqrt()
    }

    /// Composite 16-point Gauss-Legendre, independent of the closed form.
    fn gl_complex(f: impl Fn(f64) -> Complex64, lo: f64, hi: f64, panels: usize) -> Complex64 {
        const X: [f64; 8] = [
            0.095_012_509_837_637_44,
            0.281_603_550_779_258_9,
            0.458_016_777_657_227_4,
            0.617_876_244_402_643_7,
            0.755_404_408_355_003,
            0.865_631_202_387_831_7,
            0.944_575_023_073_232_6,
            0.989_400_934_991_649_9,
        ];
        const W: [f64; 8] = [
            0.189_450_610_455_068_5,
            0.182_603_415_044_923_6,
            0.169_156_519_395_002_5,
            0.149_595_988_816_576_7,
            0.124_628_971_255_533_9,
            0.095_158_511_682_492_8,
            0.062_253_523_938_647_9,
            0.027_152_459_411_754_1,
        ];
        let h = (hi - lo) / panels as f64;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..panels {
            let c = lo + (i as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                s += (f(c + 0.5 * h * x) + f(c - 0.5 * h * x)) * w;
            }
        }
        s * (0.5 * h)
    }

    fn direct(q: f64, p: u32, l: f64, u0: f64, u1: f64, s: f64) -> Complex64 {
        let ks = p as f64 * PI / l;
        gl_complex(
            |u| Complex64::from_polar((ks * (u - s)).sin(), -q * u),
            u0,
            u1,
            200,
        )
    }

    #[test]
    fn line_integral_known_values() {
        let l = 0.13e-3;
        let v = line_integral_sine(0.0, 1, l, (0.0, l), ModeVariant::LiteralEq41);
        assert_relative_eq!(v.re, 2.0 * l / PI, max_relative = 1e-14);
        assert!(v.im.abs() < 1e-18);

        for p in [1u32, 3, 7, 283] {
            let q = p as f64 * PI / l;
            let v = line_integral_sine(q, p, l, (0.0, l), ModeVariant::LiteralEq41);
            assert!(rel(v, Complex64::new(0.0, -0.5 * l)) < 1e-12, "p={p}: {v}");
            let v = line_integral_sine(-q, p, l, (0.0, l), ModeVariant::LiteralEq41);
            assert!(rel(v, Complex64::new(0.0, 0.5 * l)) < 1e-12, "p={p}: {v}");
        }
    }

    #[test]
    fn line_integral_against_quadrature() {
        let l = 0.13e-3;
        let v = line_integral_sine(3.7e6, 3, l, (0.0, l), ModeVariant::LiteralEq41);
        assert!(rel(v, direct(3.7e6, 3, l, 0.0, l, 0.0)) < 1e-9);
        let (u0, u1) = (0.53e-3, 0.66e-3);
        for variant in [ModeVariant::LiteralEq41, ModeVariant::ShiftedMode] {
            let s = if variant == ModeVariant::ShiftedMode {
                u0
            } else {
                0.0
            };
            for q in [-2.1e6, 0.0, 4.0e4, 7.25e5] {
                let v = line_integral_sine(q, 5, l, (u0, u1), variant);
                assert!(
                    rel(v, direct(q, 5, l, u0, u1, s)) < 1e-9,
                    "{variant:?} q={q}"
                );
            }
        }
    }

    #[test]
    fn line_integral_near_resonance_on_both_branches() {
        let l = 0.13e-3;
        let p = 9;
        let q0 = p as f64 * PI / l;
        for offset in [0.5, 1.5, -0.9, 1e-3] {
            let q = q0 * (1.0 + offset * RESONANCE_EPS / p as f64);
            let v = line_integral_sine(q, p, l, (0.0, l), ModeVariant::LiteralEq41);
            assert!(
                rel(v, direct(q, p, l, 0.0, l, 0.0)) < 1e-9,
                "offset {offset}"
            );
            let v = line_integral_sine(-q, p, l, (0.0, l), ModeVariant::LiteralEq41);
            assert!(
                rel(v, direct(-q, p, l, 0.0, l, 0.0)) < 1e-9,
                "offset {offset}"
            );
        }
    }

    #[test]
    fn obliquity_values() {
        let c = fig4();
        let g = c.geometry;
        let idx = ModeIndex::new(0, 0);
        let k = c.wave.wavenumber();
        let kz = kz_from_harmonics(1.0, 1.0, &g, k).re;

        let far = DetectorDirection::new(0.0, 0.0, 1e30);
        let v = obliquity_prefactor(idx, &far, &g, c.wave.wavelength).unwrap();
        assert_relative_eq!(v.im, kz + k, max_relative = 1e-15);
        assert!(v.re.abs() < 1e-20);

        let d = DetectorDirection::new(0.0, 2e-3, 1.0);
        let v = obliquity_prefactor(idx, &d, &g, c.wave.wavelength).unwrap();
        assert!(v.re.is_finite() && v.im.is_finite());
        assert_relative_eq!(v.re, -(1.0 - 2e-6), max_relative = 1e-9);
        assert_relative_eq!(v.im, kz + k * (1.0 - 2e-6), max_relative = 1e-12);

        let bad = DetectorDirection::new(80f64.to_radians(), 30f64.to_radians(), 1.0);
        assert!(matches!(
            obliquity_prefactor(idx, &bad, &g, c.wave.wavelength),
            Err(Error::DirectionOutOfDomain { .. })
        ));
    }

    #[test]
    fn single_mode_normal_incidence() {
        let c = fig4();
        let g = c.geometry;
        let t = TruncationPolicy::rectangular(0, 0);
        let dir = DetectorDirection::new(0.0, 0.0, c.screen_r);
        let got = slit_amplitude(SlitIndex::First, &dir, &g, &c.wave, &t, c.variant).unwrap();

        let k = c.wave.wavenumber();
        let kz = kz_from_harmonics(1.0, 1.0, &g, k);
        let coeff = mode_coefficient(ModeIndex::new(0, 0), 0.896);
        let bracket =
            obliquity_prefactor(ModeIndex::new(0, 0), &dir, &g, c.wave.wavelength).unwrap();
        let pref = -Complex64::from_polar(1.0, k * c.screen_r) / (4.0 * PI * c.screen_r);
        let expect = pref
            * (2.0 * g.length_b / PI)
            * (2.0 * g.width_a / PI)
            * coeff
            * (Complex64::i() * kz * g.thickness_c).exp()
            * bracket;
        for comp in got.components() {
            assert!(rel(comp, expect) < 1e-12);
        }
    }

    #[test]
    fn first_slit_magnitude_is_even_in_beta() {
        let mut c = fig4();
        c.truncation.tail_eps = 1e-3;
        let ff = FarField::new(&c).unwrap();
        for i in 1..40 {
            let beta = i as f64 * 1.3e-4;
            let p = ff
                .slit_amplitude(SlitIndex::First, beta)
                .unwrap()
                .norm_sqr();
            let m = ff
                .slit_amplitude(SlitIndex::First, -beta)
                .unwrap()
                .norm_sqr();
            assert!((p - m).abs() <= 1e-10 * p, "beta={beta}");
        }
    }

    #[test]
    fn shifted_second_slit_is_phase_shifted_first_slit() {
        let mut c = fig4();
        c.variant = ModeVariant::ShiftedMode;
        c.truncation.tail_eps = 1e-3;
        let ff = FarField::new(&c).unwrap();
        let k = c.wave.wavenumber();
        for i in -10..=10 {
            let beta = i as f64 * 3.1e-4;
            let phi1 = ff.slit_amplitude(SlitIndex::First, beta).unwrap();
            let phi2 = ff.slit_amplitude(SlitIndex::Second, beta).unwrap();
            let phase = Complex64::from_polar(1.0, -k * beta.sin() * c.geometry.pitch());
            assert!(rel3(phi2, phi1 * phase) < 1e-12);
        }
    }

    #[test]
    fn literal_second_slit_breaks_mirror_symmetry() {
        let mut c = fig4();
        c.truncation.tail_eps = 1e-3;
        let ff = FarField::new(&c).unwrap();
        let p = ff.total(1.0e-3).unwrap().value.norm_sqr();
        let m = ff.total(-1.0e-3).unwrap().value.norm_sqr();
        assert!((p - m).abs() > 1e-4 * p);
    }

    #[test]
    fn degenerate_superposition() {
        let mut c = fig4();
        c.truncation.tail_eps = 1e-3;
        c.wave.c1 = 1.0;
        c.wave.c2 = 0.0;
        let ff = FarField::new(&c).unwrap();
        let t = ff.total(7e-4).unwrap();
        assert_eq!(t.value, t.per_slit.unwrap().0);
    }

    #[test]
    fn balanced_shifted_fringe_is_dark() {
        let mut c = fig4();
        c.truncation.tail_eps = 1e-3;
        c.variant = ModeVariant::ShiftedMode;
        c.wave.c1 = std::f64::consts::FRAC_1_SQRT_2;
        c.wave.c2 = std::f64::consts::FRAC_1_SQRT_2;
        let ff = FarField::new(&c).unwrap();
        let k = c.wave.wavenumber();
        let beta = (PI / (k * c.geometry.pitch())).asin();
        let t = ff.total(beta).unwrap();
        let (p1, _) = t.per_slit.unwrap();
        assert!(
            t.value.norm_sqr() < 1e-24 * p1.norm_sqr(),
            "{}",
            t.value.norm_sqr() / p1.norm_sqr()
        );
    }

    #[test]
    fn total_is_linear_in_weights() {
        let mut c = fig4();
        c.truncation.tail_eps = 1e-3;
        let ff = FarField::new(&c).unwrap();
        for beta in [-1.1e-3, 0.0, 4.2e-4, 3.3e-3] {
            let t = ff.total_with(beta, 0.955, 0.298).unwrap().value;
            let a = ff.total_with(beta, 1.0, 0.0).unwrap().value;
            let b = ff.total_with(beta, 0.0, 1.0).unwrap().value;
            assert!(rel3(t, a * 0.955 + b * 0.298) < 1e-12);
        }
    }

    #[test]
    fn free_functions_match_evaluator() {
        let mut c = fig4();
        c.truncation = TruncationPolicy::rectangular(20, 30);
        let ff = FarField::new(&c).unwrap();
        let dir = c.direction(1.5e-3);
        let a = total_amplitude(&dir, &c.geometry, &c.wave, &c.truncation, c.variant).unwrap();
        let b = ff.total(1.5e-3).unwrap();
        assert_eq!(a, b);
        let bad = DetectorDirection::new(1.5, 0.5, 1.0);
        assert!(total_amplitude(&bad, &c.geometry, &c.wave, &c.truncation, c.variant).is_err());
    }

    #[test]
    fn oblique_alpha_uses_length_integral() {
        let mut c = fig4();
        c.truncation = TruncationPolicy::rectangular(3, 3);
        c.alpha = 2e-4;
        let ff = FarField::new(&c).unwrap();
        c.alpha = 0.0;
        let ff0 = FarField::new(&c).unwrap();
        let a = ff.slit_scalar(SlitIndex::First, 0.0).unwrap();
        let b = ff0.slit_scalar(SlitIndex::First, 0.0).unwrap();
        assert!(rel(a, b) > 1e-3);
    }

    proptest! {
        #[test]
        fn closed_form_matches_direct_quadrature(
            q in -2.0e7f64..2.0e7,
            m in 0u32..200,
            l in 5e-5f64..5e-4,
            offset in 0.0f64..4.0,
            shifted in any::<bool>(),
        ) {
            let p = 2 * m + 1;
            let u0 = offset * l;
            let u1 = u0 + l;
            let variant = if shifted { ModeVariant::ShiftedMode } else { ModeVariant::LiteralEq41 };
            let s = if shifted { u0 } else { 0.0 };
            let v = line_integral_sine(q, p, l, (u0, u1), variant);
            let panels = (((q.abs() + p as f64 * PI / l) * l / (2.0 * PI)).ceil() as usize).max(1) * 4;
            let ks = p as f64 * PI / l;
            let d = gl_complex(|u| Complex64::from_polar((ks * (u - s)).sin(), -q * u), u0, u1, panels);
            // Summation roundoff in the direct rule scales with integral |f| ~ l.
            prop_assert!((v - d).norm() <= 1e-9 * d.norm().max(1e-3 * l), "{} vs {}", v, d);
        }
    }
}
