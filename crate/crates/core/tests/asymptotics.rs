use std::f64::consts::PI;

use pearcey_gap::asymptotics::*;
use pearcey_gap::fredholm::{build_grid, log_det};
use pearcey_gap::kernel::{ModelParams, PearceyModel};
use pearcey_gap::verify::oscillating_part;
use proptest::prelude::*;

fn p(a: f64, r: f64) -> ModelParams {
    ModelParams::new(a, r).unwrap()
}

#[test]
fn zero_thinning_expansion_vanishes() {
    let r = f_asy(70.0, 0.0, &p(0.5, 1.0)).unwrap();
    assert_eq!((r.total, r.leading, r.constant), (0.0, 0.0, 0.0));
}

#[test]
fn expansion_at_s_100() {
    let r = f_asy(100.0, 0.5, &p(0.0, 0.0)).unwrap();
    let beta = 2f64.ln() / (2.0 * PI);
    assert!((r.leading + 1.5 * 3f64.sqrt() * beta * 100f64.powf(2.0 / 3.0)).abs() < 1e-12);
    assert!((r.total + 6.09).abs() < 5e-3);
    assert_eq!(r.remainder_order, -1.0 / 3.0);
}

#[test]
fn alpha_only_shifts_the_constant() {
    for s in [10.0, 55.0, 400.0] {
        let d = f_asy(s, 0.5, &p(1.0, 0.4)).unwrap().total - f_asy(s, 0.5, &p(0.0, 0.4)).unwrap().total;
        assert!((d - 0.2310).abs() < 1e-4);
    }
}

#[test]
fn h_terms_individually_real_and_finite() {
    let h = h_asy_terms(50.0, 0.5, &p(0.5, 1.0)).unwrap();
    assert!(h.terms.iter().all(|t| t.is_finite()));
    assert!((h.total() - h.smooth() - h.terms[3]).abs() < 1e-16);
}

#[test]
fn counting_expansion_values() {
    let c = counting_asy(100.0, &p(0.0, 0.0));
    assert!((c.mean - 8.9085).abs() < 1e-4);
    // (1 + ln 9 + γ_E)/(2π²) to 16 digits
    assert!((variance_constant() - 0.191_215_376_465_400_58).abs() < 1e-15);
    let shift = counting_asy(27.0, &p(0.0, 1.0)).mean - counting_asy(27.0, &p(0.0, 0.0)).mean;
    assert!((shift + 3f64.sqrt() / (4.0 * PI) * 3.0).abs() < 1e-13);
}

#[test]
fn phase_slope_matches_its_derivative() {
    // d(2ψ)/ds = √3(ρ/(3s^{2/3}) − 1/s^{1/3}) − (4/3)βi/s
    let pr = p(0.0, 0.7);
    let (s, h) = (80.0, 1e-4);
    let fd = 2.0 * (psi(s + h, 0.5, &pr).unwrap().value - psi(s - h, 0.5, &pr).unwrap().value) / (2.0 * h);
    let bi = -(2f64.ln()) / (2.0 * PI);
    let exact = 3f64.sqrt() * (0.7 / (3.0 * s.powf(2.0 / 3.0)) - 1.0 / s.cbrt()) - 4.0 / 3.0 * bi / s;
    assert!((fd - exact).abs() < 1e-7, "{fd} vs {exact}");
}

#[test]
fn remainder_uniform_over_the_parameter_box() {
    for gi in 1..=9 {
        let g = gi as f64 / 10.0;
        for r in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let pr = p(0.0, r);
            let m = PearceyModel::new(pr).unwrap();
            for s in [20.0f64, 40.0, 60.0] {
                let f = log_det(&m, &build_grid(s, 160).unwrap(), g).unwrap().f;
                let v = (f - f_asy(s, g, &pr).unwrap().total).abs() * s.cbrt();
                assert!(v < 0.5, "gamma={g} rho={r} s={s}: {v}");
            }
        }
    }
}

#[test]
fn oscillation_zero_crossings_follow_the_phase() {
    let pr = p(0.0, 0.0);
    let grid: Vec<f64> = (0..=80).map(|k| 40.0 + 0.25 * k as f64).collect();
    let y = oscillating_part(0.9, &pr, &grid, 160).unwrap();
    let mut n = 0;
    for w in y.windows(2) {
        if w[0].1.signum() != w[1].1.signum() {
            n += 1;
            let sc = w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1);
            let off = (2.0 * psi(sc, 0.9, &pr).unwrap().value - PI / 2.0).rem_euclid(PI);
            assert!(off.min(PI - off) / (2.0 * PI) <= 0.02, "crossing at {sc}");
        }
    }
    assert!(n >= 2);
}

proptest! {
    #[test]
    fn expansions_are_real(s in 8.0f64..1e5, g in 0.01f64..0.99, a in -0.9f64..3.0, r in -3.0f64..3.0) {
        let pr = p(a, r);
        prop_assert!(f_asy(s, g, &pr).is_ok());
        prop_assert!(h_asy_terms(s, g, &pr).is_ok());
        prop_assert!(psi(s, g, &pr).unwrap().value.is_finite());
    }

    #[test]
    fn smooth_part_is_the_derivative(s in 100.0f64..1e4, g in 0.05f64..0.95, r in -2.0f64..2.0) {
        let pr = p(0.3, r);
        let h = 1e-3 * s;
        let fd = (f_asy(s + h, g, &pr).unwrap().total - f_asy(s - h, g, &pr).unwrap().total) / (2.0 * h);
        let sm = h_asy_terms(s, g, &pr).unwrap().smooth();
        prop_assert!((fd - sm).abs() <= 1e-6 * sm.abs().max(1e-3));
    }
}
