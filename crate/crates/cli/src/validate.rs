use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use slitwave_core::field::{mode_coefficient, sin_pi, ModeIndex};
use slitwave_core::kirchhoff::line_integral_sine;
use slitwave_core::observables::uniform_grid;
use slitwave_core::oracle::{integrate, kirchhoff_surface_quadrature, line_integral_quadrature};
use slitwave_core::{
    FarField, ModeVariant, QuadratureSpec, Result, SimConfig, SlitIndex, TruncationPolicy,
};

use crate::{Failure, ValidateArgs, EXIT_VALIDATION};

pub const COEFFICIENT_TOL: f64 = 1e-10;
pub const LINE_INTEGRAL_TOL: f64 = 1e-9;
pub const FAR_FIELD_RMS_TOL: f64 = 1e-2;
pub const PHASE_IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from_measure(name: &'static str, label: &str, measured: Result<f64>, tol: f64) -> Self {
        match measured {
            Ok(v) => Check {
                name,
                passed: v <= tol,
                detail: format!("{label} {v:.3e} (limit {tol:.0e})"),
            },
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Settings {
    max_product: u32,
    far_field_modes: u32,
    far_field_angles: usize,
    fault: bool,
}

pub fn run(args: &ValidateArgs) -> std::result::Result<(), Failure> {
    let checks = run_checks(args.fast, args.inject_fault);
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_VALIDATION,
            format!("{failed} of {} checks failed", checks.len()),
        ))
    }
}

pub fn run_checks(fast: bool, fault: bool) -> Vec<Check> {
    let s = if fast {
        Settings {
            max_product: 25,
            far_field_modes: 3,
            far_field_angles: 5,
            fault,
        }
    } else {
        Settings {
            max_product: 81,
            far_field_modes: 10,
            far_field_angles: 9,
            fault,
        }
    };
    vec![
        Check::from_measure(
            "mode coefficients vs projection quadrature",
            "max relative deviation",
            coefficient_deviation(s),
            COEFFICIENT_TOL,
        ),
        Check::from_measure(
            "line integrals vs adaptive quadrature",
            "max relative deviation",
            line_integral_deviation(s),
            LINE_INTEGRAL_TOL,
        ),
        Check::from_measure(
            "far field vs surface quadrature",
            "rms deviation",
            far_field_rms(s),
            FAR_FIELD_RMS_TOL,
        ),
        Check::from_measure(
            "shifted second-slit phase identity",
            "max relative deviation",
            phase_identity_deviation(),
            PHASE_IDENTITY_TOL,
        ),
    ]
}

fn tight_spec() -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-13,
        abs_tol: 1e-30,
        ..QuadratureSpec::default()
    }
}

/// Projects a unit constant onto each sine product and compares with the closed-form coefficient.
fn coefficient_deviation(s: Settings) -> Result<f64> {
    let spec = tight_spec();
    let mut worst: f64 = 0.0;
    for m in 0..s.max_product {
        for n in 0..s.max_product {
            let (p, q) = (2 * m + 1, 2 * n + 1);
            if p * q > s.max_product {
                continue;
            }
            let inner = |x: f64| -> Result<Complex64> {
                let row = integrate(
                    |y| Ok(Complex64::new(sin_pi(p as f64 * y), 0.0)),
                    0.0,
                    1.0,
                    p as usize,
                    &spec,
                )?;
                Ok(row.value * sin_pi(q as f64 * x))
            };
            let projected = 4.0 * integrate(inner, 0.0, 1.0, q as usize, &spec)?.value.re;
            let c = mode_coefficient(ModeIndex::new(m, n), 1.0);
            worst = worst.max((projected - c).abs() / c.abs());
        }
    }
    Ok(worst)
}

fn line_integral_deviation(s: Settings) -> Result<f64> {
    let length = SimConfig::paper_fig4().geometry.width_a;
    let spec = tight_spec();
    let mut worst: f64 = 0.0;
    for p in [1u32, 3, 9, 21] {
        let q0 = p as f64 * PI / length;
        for rel in [-1e-2, -1e-4, -1e-7, 0.0, 1e-7, 1e-4, 1e-2, 0.37] {
            for sign in [-1.0, 1.0] {
                let q = sign * q0 * (1.0 + rel);
                let closed_q = if s.fault { -q } else { q };
                let closed = line_integral_sine(
                    closed_q,
                    p,
                    length,
                    (0.0, length),
                    ModeVariant::LiteralEq41,
                );
                let quad = line_integral_quadrature(q, p, length, (0.0, length), &spec)?.value;
                worst = worst.max((closed - quad).norm() / quad.norm());
            }
        }
    }
    Ok(worst)
}

/// Peak-normalized single-slit magnitude profile, closed form against surface quadrature.
fn far_field_rms(s: Settings) -> Result<f64> {
    let mut cfg = SimConfig::paper_fig4();
    cfg.geometry.slit_count = 1;
    cfg.wave.c1 = 1.0;
    cfg.wave.c2 = 0.0;
    cfg.truncation = TruncationPolicy::rectangular(s.far_field_modes, s.far_field_modes);
    let g = cfg.geometry;
    let r = 1e3 * (2.0 * g.width_a + g.separation_d);
    cfg.screen_r = r;
    let far = FarField::new(&cfg)?;
    let spec = QuadratureSpec {
        rel_tol: 1e-6,
        ..QuadratureSpec::default()
    };
    let betas = uniform_grid(-5e-3, 5e-3, s.far_field_angles);
    let quad = betas
        .par_iter()
        .map(|b| {
            let point = [
                g.length_b / 2.0,
                g.width_a / 2.0 + r * b.sin(),
                g.thickness_c + r * b.cos(),
            ];
            Ok(kirchhoff_surface_quadrature(
                point,
                &g,
                &cfg.wave,
                &cfg.truncation,
                cfg.variant,
                &spec,
            )?
            .norm_sqr()
            .sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let closed = betas
        .iter()
        .map(|b| Ok(far.total(*b)?.value.norm_sqr().sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(normalized_rms(&quad, &closed))
}

/// RMS difference of two profiles after dividing each by its own maximum.
pub fn normalized_rms(a: &[f64], b: &[f64]) -> f64 {
    let pa = a.iter().copied().fold(0.0, f64::max);
    let pb = b.iter().copied().fold(0.0, f64::max);
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / pa - y / pb).powi(2))
        .sum();
    (sum / a.len() as f64).sqrt()
}

fn phase_identity_deviation() -> Result<f64> {
    let mut cfg = SimConfig::paper_fig4();
    cfg.variant = ModeVariant::ShiftedMode;
    cfg.truncation = TruncationPolicy::rectangular(40, 40);
    let far = FarField::new(&cfg)?;
    let k = cfg.wave.wavenumber();
    let pitch = cfg.geometry.pitch();
    let mut worst: f64 = 0.0;
    for beta in uniform_grid(-5e-3, 5e-3, 21) {
        let p1 = far.slit_scalar(SlitIndex::First, beta)?;
        let p2 = far.slit_scalar(SlitIndex::Second, beta)?;
        let expect = p1 * Complex64::from_polar(1.0, -k * beta.sin() * pitch);
        worst = worst.max((p2 - expect).norm() / p1.norm());
    }
    Ok(worst)
}
