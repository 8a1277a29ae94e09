use std::f64::consts::PI;

use pearcey_gap::asymptotics::h_asy;
use pearcey_gap::fredholm::*;
use pearcey_gap::kernel::{ModelParams, PearceyModel};
use pearcey_gap::verify::small_s_slope;
use proptest::prelude::*;

fn model(a: f64, r: f64) -> PearceyModel {
    PearceyModel::new(ModelParams::new(a, r).unwrap()).unwrap()
}

#[test]
fn zero_thinning_is_trivial() {
    let m = model(0.5, 1.0);
    let g = build_grid(30.0, 64).unwrap();
    assert_eq!(log_det(&m, &g, 0.0).unwrap().f, 0.0);
    assert_eq!(resolvent_diag_at_s(&m, &g, 0.0).unwrap(), 0.0);
    assert_eq!(mgf(&m, &g, 0.0).unwrap(), 1.0);
}

#[test]
fn gap_probability_at_s_100() {
    let m = model(0.0, 0.0);
    let d = log_det(&m, &build_grid(100.0, 320).unwrap(), 0.5).unwrap();
    assert!((d.f + 6.09).abs() < 0.15, "{}", d.f);
    assert!(d.convergence_estimate < 1e-9);
    assert!(d.min_pivot > 0.0);
}

#[test]
fn resolvent_matches_derivative_at_30() {
    let m = model(0.0, 0.0);
    let (s, h) = (30.0, 0.03);
    let f = |s: f64| log_det_single(&m, &build_grid(s, 320).unwrap(), 0.5).unwrap().f;
    let fd = (f(s + h) - f(s - h)) / (2.0 * h);
    let r = resolvent_diag_at_s(&m, &build_grid(s, 320).unwrap(), 0.5).unwrap();
    assert!((fd + r).abs() <= 1e-5 * r.abs(), "{fd} vs {}", -r);
}

#[test]
fn resolvent_against_expansion_at_60() {
    let p = ModelParams::new(0.0, 0.0).unwrap();
    let r = resolvent_diag_at_s(&model(0.0, 0.0), &build_grid(60.0, 320).unwrap(), 0.5).unwrap();
    let h = h_asy(60.0, 0.5, &p).unwrap();
    assert!((r + h).abs() <= 3.0 * 60f64.powf(-4.0 / 3.0), "{r} vs {h}");
}

#[test]
fn gamma_derivative_is_the_resolvent_trace() {
    let m = model(0.5, -1.0);
    let g = build_grid(40.0, 160).unwrap();
    let (gamma, dg) = (0.6, 1e-4);
    let f = |g2: f64| log_det_single(&m, &g, g2).unwrap().f;
    let fd = (f(gamma + dg) - f(gamma - dg)) / (2.0 * dg);
    let op = DiscretizedOperator::assemble(&m, &g, gamma).unwrap();
    let tr = -op.trace_resolvent().unwrap() / gamma;
    assert!((fd - tr).abs() <= 1e-6 * tr.abs(), "{fd} vs {tr}");
}

#[test]
fn nystrom_convergence_on_the_lattice() {
    for a in [0.0, 0.5, 1.0] {
        for r in [-1.0, 0.0, 1.0] {
            let m = model(a, r);
            for s in [20.0, 60.0] {
                for gamma in [0.25, 0.5, 0.9] {
                    let d = log_det(&m, &build_grid(s, 320).unwrap(), gamma).unwrap();
                    assert!(d.convergence_estimate <= 1e-9, "a={a} r={r} s={s} g={gamma}");
                }
            }
        }
    }
}

#[test]
fn counting_at_s_100() {
    let m = model(0.0, 0.0);
    let (mean, var) = counting_moments(&m, &build_grid(100.0, 320).unwrap()).unwrap();
    assert!((mean - 8.91).abs() < 0.1, "{mean}");
    assert!((var - 0.347).abs() < 0.03, "{var}");
    let means: Vec<f64> =
        [10.0, 20.0, 40.0, 80.0].iter().map(|&s| counting_moments(&m, &build_grid(s, 160).unwrap()).unwrap().0).collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn mgf_fit_reproduces_moments() {
    let m = model(0.0, 0.0);
    let g = build_grid(50.0, 240).unwrap();
    let (mean, var) = counting_moments(&m, &g).unwrap();
    let (fm, fv) = moments_from_mgf(&m, &g, 1e-3).unwrap();
    assert!((fm - mean).abs() <= 0.01 * mean);
    assert!((fv - var).abs() <= 0.01 * var);
}

#[test]
fn standardized_mgf_moves_towards_gaussian() {
    let m = model(0.0, 0.0);
    let gap = |s: f64| {
        let g = build_grid(s, 320).unwrap();
        let (mean, var) = counting_moments(&m, &g).unwrap();
        let sig = var.sqrt();
        let l = mgf(&m, &g, 1.0 / (2.0 * PI * sig)).unwrap().ln();
        (l - (0.5 - mean / sig)).abs()
    };
    let (g30, g60, g100) = (gap(30.0), gap(60.0), gap(100.0));
    assert!(g100 < g30 && g100 < g60, "{g30} {g60} {g100}");
}

#[test]
fn small_s_vanishing_order() {
    for a in [0.0, 0.5, 1.0] {
        let slope = small_s_slope(0.5, a).unwrap();
        assert!(slope >= a + 0.9, "a={a}: {slope}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resolvent_identity_on_random_parameters(
        s in 10.0f64..60.0, gamma in 0.1f64..0.9, a in 0.0f64..1.0, r in -1.0f64..1.0,
    ) {
        let m = model(a, r);
        let h = 1e-3 * s;
        let f = |s: f64| log_det_single(&m, &build_grid(s, 160).unwrap(), gamma).unwrap().f;
        let fd = (f(s + h) - f(s - h)) / (2.0 * h);
        let rr = resolvent_diag_at_s(&m, &build_grid(s, 160).unwrap(), gamma).unwrap();
        prop_assert!((fd + rr).abs() <= 1e-5 * rr.abs());
    }

    #[test]
    fn determinant_stays_positive(s in 0.5f64..60.0, gamma in 0.05f64..1.0, a in -0.5f64..2.0, r in -1.0f64..1.0) {
        let d = log_det_single(&model(a, r), &build_grid(s, 96).unwrap(), gamma).unwrap();
        prop_assert!(d.min_pivot > 0.0 && d.f <= 0.0);
    }
}
