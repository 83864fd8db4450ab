use std::f64::consts::PI;

use slitwave_core::kirchhoff::line_integral_sine;
use slitwave_core::oracle::{kirchhoff_surface_quadrature, line_integral_quadrature};
use slitwave_core::{FarField, ModeVariant, QuadratureSpec, SimConfig, TruncationPolicy};

#[test]
fn closed_form_matches_quadrature_around_resonances() {
    let l = 1.3e-4;
    let spec = QuadratureSpec {
        rel_tol: 1e-13,
        abs_tol: 1e-24,
        ..QuadratureSpec::default()
    };
    for p in [1u32, 3, 5, 21] {
        let q0 = p as f64 * PI / l;
        for rel in [-1e-3, -1e-4, -1e-7, 0.0, 1e-7, 1e-4, 1e-3, 0.5] {
            for sign in [-1.0, 1.0] {
                let q = sign * q0 * (1.0 + rel);
                for interval in [(0.0, l), (5.3e-4, 6.6e-4)] {
                    let closed = line_integral_sine(q, p, l, interval, ModeVariant::LiteralEq41);
                    let quad = line_integral_quadrature(q, p, l, interval, &spec)
                        .unwrap()
                        .value;
                    let err = (closed - quad).norm() / quad.norm();
                    assert!(
                        err < 1e-9,
                        "p={p} rel={rel} sign={sign} {interval:?}: {err:e}"
                    );
                }
            }
        }
    }
}

#[test]
fn far_field_matches_surface_quadrature_at_a_few_angles() {
    let mut cfg = SimConfig::paper_fig4();
    cfg.geometry.slit_count = 1;
    cfg.wave.c1 = 1.0;
    cfg.wave.c2 = 0.0;
    cfg.truncation = TruncationPolicy::rectangular(3, 3);
    let g = cfg.geometry;
    let r = 1e3 * (2.0 * g.width_a + g.separation_d);
    cfg.screen_r = r;
    let far = FarField::new(&cfg).unwrap();
    let spec = QuadratureSpec {
        rel_tol: 1e-6,
        ..QuadratureSpec::default()
    };
    let betas: [f64; 3] = [0.0, 2.5e-3, -4e-3];
    let quad: Vec<f64> = betas
        .iter()
        .map(|b| {
            let p = [
                g.length_b / 2.0,
                g.width_a / 2.0 + r * b.sin(),
                g.thickness_c + r * b.cos(),
            ];
            kirchhoff_surface_quadrature(p, &g, &cfg.wave, &cfg.truncation, cfg.variant, &spec)
                .unwrap()
                .norm_sqr()
                .sqrt()
        })
        .collect();
    let closed: Vec<f64> = betas
        .iter()
        .map(|b| far.total(*b).unwrap().value.norm_sqr().sqrt())
        .collect();
    for i in 1..betas.len() {
        let a = quad[i] / quad[0];
        let b = closed[i] / closed[0];
        assert!((a - b).abs() < 1e-3, "beta {}: {a} vs {b}", betas[i]);
    }
}
