use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C;
use pearcey_gap::asymptotics::{h_asy, h_asy_terms, psi};
use pearcey_gap::dynamics::*;
use pearcey_gap::kernel::ModelParams;

const S0: f64 = 1e4;
const SETS: [(f64, f64); 3] = [(0.0, 0.0), (0.5, 1.0), (1.0, -1.0)];

fn p(a: f64, r: f64) -> ModelParams {
    ModelParams::new(a, r).unwrap()
}

fn opts(tol: f64) -> IntegrateOptions {
    IntegrateOptions { tolerance: tol, ..Default::default() }
}

#[test]
fn seed_satisfies_the_constraints() {
    for (a, r) in SETS {
        let pr = p(a, r);
        let res = seed_large_s(S0, 0.5, &pr).unwrap().residuals(&pr).max_abs();
        assert!(res <= 10.0 * S0.powf(-1.0 / 3.0), "a={a} r={r}: {res}");
    }
}

#[test]
fn seed_hamiltonian_matches_expansion() {
    for (a, r) in SETS {
        let pr = p(a, r);
        let h = hamiltonian(&seed_large_s(S0, 0.5, &pr).unwrap()).unwrap();
        assert!(h.im.abs() <= 1e-12 * h.re.abs());
        let err = (h.re - h_asy(S0, 0.5, &pr).unwrap()).abs();
        assert!(err <= 25.0 * S0.powf(-4.0 / 3.0), "a={a} r={r}: {err}");
    }
}

#[test]
fn drift_bounded_and_shrinks_with_tolerance() {
    for (a, r) in SETS {
        let pr = p(a, r);
        let seed = seed_large_s(S0, 0.5, &pr).unwrap();
        let mut d1 = Vec::new();
        for tol in [1e-8, 1e-10] {
            let tr = integrate(&seed, 0.5, &pr, S0 / 2.0, &[8000.0], &opts(tol)).unwrap();
            let d = tr.drift();
            let r0 = tr.seed_residuals.as_array();
            for k in 0..4 {
                assert!(d[k] <= 100.0 * tol + r0[k].norm(), "a={a} r={r} tol={tol} k={k}: {}", d[k]);
            }
            d1.push(d[0].max(d[1]));
        }
        assert!(d1[1] <= 0.1 * d1[0], "a={a} r={r}: {d1:?}");
    }
}

#[test]
fn integral_insensitive_to_step_cap() {
    let pr = p(0.5, 1.0);
    let seed = seed_large_s(S0, 0.5, &pr).unwrap();
    let stops = [9000.0, 6000.0];
    let full = integrate(&seed, 0.5, &pr, 5000.0, &stops, &opts(1e-10)).unwrap();
    let half = IntegrateOptions { max_step_factor: 0.5, ..opts(1e-10) };
    let half = integrate(&seed, 0.5, &pr, 5000.0, &stops, &half).unwrap();
    let (a, b) = (full.integral_between(9000.0, 6000.0).unwrap(), half.integral_between(9000.0, 6000.0).unwrap());
    assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
}

#[test]
fn gamma_identity_error_is_second_order() {
    let pr = p(0.0, 0.0);
    let grid = stencil_grid(&[8000.0, 6000.0], 0.01);
    let run = |g: f64| integrate(&seed_large_s(S0, g, &pr).unwrap(), g, &pr, 5000.0, &grid, &opts(1e-10)).unwrap();
    let centre = run(0.5);
    let err = |d: f64| -> Vec<f64> {
        let (a, b) = (run(0.5 + d), run(0.5 - d));
        identity_report(&centre, Some((&a, &b, d))).unwrap().parameter_rows.iter().map(|r| r.lhs - r.rhs).collect()
    };
    let (coarse, fine) = (err(2e-2), err(1e-2));
    assert_eq!(coarse.len(), 2);
    for (c, f) in coarse.iter().zip(&fine) {
        let ratio = c / f;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }
}

#[test]
fn trajectory_oscillation_tracks_the_phase() {
    let pr = p(0.0, 0.0);
    let grid: Vec<f64> = (0..=200).map(|k| 300.0 - 0.5 * k as f64).collect();
    for g in [0.5, 0.9] {
        let tr = integrate(&seed_large_s(S0, g, &pr).unwrap(), g, &pr, 195.0, &grid, &opts(1e-10)).unwrap();
        let y: Vec<(f64, f64)> = grid
            .iter()
            .map(|&s| (s, s * (tr.sample_at(s).unwrap().h.re - h_asy_terms(s, g, &pr).unwrap().smooth())))
            .collect();
        let mut n = 0;
        for w in y.windows(2) {
            if w[0].1.signum() != w[1].1.signum() {
                n += 1;
                let sc = w[0].0 - w[0].1 * (w[1].0 - w[0].0) / (w[1].1 - w[0].1);
                let off = (2.0 * psi(sc, g, &pr).unwrap().value - FRAC_PI_2).rem_euclid(PI);
                assert!(off.min(PI - off) / (2.0 * PI) <= 0.02, "gamma={g}: crossing at {sc}");
            }
        }
        assert!(n >= 8, "gamma={g}: {n} crossings");
    }
}

#[test]
fn empty_index1_block_gives_zero_hamiltonian() {
    let seed = seed_large_s(S0, 0.5, &p(0.0, 0.0)).unwrap();
    let st = HamiltonianState { q1: [C::new(0.0, 0.0); 3], p1: [C::new(0.0, 0.0); 3], ..seed };
    assert_eq!(hamiltonian(&st).unwrap(), C::new(0.0, 0.0));
}

#[test]
fn bad_ranges_are_rejected() {
    let pr = p(0.0, 0.0);
    let seed = seed_large_s(S0, 0.5, &pr).unwrap();
    assert!(integrate(&seed, 0.5, &pr, 2.0 * S0, &[], &opts(1e-10)).is_err());
    assert!(integrate(&seed, 0.5, &pr, 100.0, &[], &opts(1e-3)).is_err());
    assert!(integrate(&seed, 0.5, &pr, S0, &[], &opts(1e-10)).unwrap().samples.is_empty());
}
