use std::f64::consts::PI;

use num_complex::Complex64 as C;
use pearcey_gap::fredholm::build_grid;
use pearcey_gap::kernel::*;
use proptest::prelude::*;

fn params(a: f64, r: f64) -> ModelParams {
    ModelParams::new(a, r).unwrap()
}

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn initial_values_at_origin() {
    let init = pk_initial_values(&params(1.0, 0.0)).unwrap();
    assert!(rel(init.p1[0], C::new(0.0, (2.0 * PI).sqrt())) < 1e-14);
    let init0 = pk_initial_values(&params(0.0, 0.0)).unwrap();
    assert_eq!(init0.p1[0], C::new(0.0, 0.0));
    // Wronskian at α = 1, ρ = 1
    let i = pk_initial_values(&params(1.0, 1.0)).unwrap();
    let w = i.p1[0] * i.p2[1] - i.p1[1] * i.p2[0];
    let expect = -(2.0 * PI).powf(1.5) * (-0.5f64).exp();
    assert!(rel(w, C::new(expect, 0.0)) < 1e-12);
    assert!((w.re + 9.55262).abs() < 1e-5);
}

#[test]
fn series_at_origin_returns_initial_triple() {
    let p = params(0.5, 1.0);
    let init = pk_initial_values(&p).unwrap();
    let t = p_entire(C::new(0.0, 0.0), 1, &p, &init).unwrap();
    assert_eq!(t.as_array(), init.p1);
}

#[test]
fn series_value_at_one() {
    // 2πi Σ 2^{−(1+k)/2}/(k! Γ((1+k)/2)), 80 terms at 40 digits
    let p = params(1.0, 0.0);
    let init = pk_initial_values(&p).unwrap();
    let v = p_entire(C::new(1.0, 0.0), 1, &p, &init).unwrap().value;
    assert!(rel(v, C::new(0.0, 7.201_666_923_943_258_8)) < 1e-13);
}

#[test]
fn series_satisfies_the_equation() {
    for (a, r) in [(0.0, 0.0), (0.5, 1.0), (1.0, -1.0), (2.0, 0.3)] {
        let p = params(a, r);
        let init = pk_initial_values(&p).unwrap();
        let z = C::new(0.7, 0.2);
        for k in [1, 2] {
            let j = p_entire_jet(z, k, &p, &init).unwrap();
            let res = z * j[3] + a * j[2] - r * j[1] - j[0];
            let size = j[0].norm().max(j[1].norm()).max(j[2].norm());
            assert!(res.norm() <= 1e-9 * size, "a={a} r={r} k={k}: {:.2e}", res.norm());
        }
    }
}

#[test]
fn loop_integral_at_origin_and_deformation() {
    let p = params(1.0, 0.0);
    let z0 = C::new(0.0, 0.0);
    let v = p_contour(z0, &ContourSpec::new(Contour::Gamma1), &p).unwrap().unscaled()[0];
    assert!(rel(v, C::new(0.0, (2.0 * PI).sqrt())) < 1e-12);

    let p = params(0.5, 1.0);
    let z = C::new(2.0, 0.0);
    let r = 2f64.powf(-1.0 / 3.0);
    let a = p_contour(z, &ContourSpec::new(Contour::Gamma1).with_radius(r), &p).unwrap().unscaled();
    let b = p_contour(z, &ContourSpec::new(Contour::Gamma1).with_radius(2.0 * r), &p).unwrap().unscaled();
    for k in 0..3 {
        assert!(rel(a[k], b[k]) < 1e-9);
    }
    let init = pk_initial_values(&p).unwrap();
    let s = p_entire(z, 1, &p, &init).unwrap().as_array();
    for k in 0..3 {
        assert!(rel(a[k], s[k]) < 1e-8);
    }
}

#[test]
fn node_doubling_on_loops_and_rays() {
    let p = params(0.5, -1.0);
    for (c, z) in [(Contour::Gamma1, 5.0), (Contour::Gamma2, 5.0), (Contour::Gamma3, 0.3), (Contour::Gamma3, 40.0)] {
        let base = ContourSpec::new(c);
        let n = base.nodes;
        let a = p_contour(C::new(z, 0.0), &base, &p).unwrap().unscaled();
        let b = p_contour(C::new(z, 0.0), &ContourSpec::new(c).with_nodes(2 * n), &p).unwrap().unscaled();
        for k in 0..3 {
            assert!(rel(a[k], b[k]) < 1e-9, "{c:?} z={z} k={k}");
        }
    }
}

#[test]
fn third_solution_near_the_hard_edge() {
    for a in [1.0, 2.0] {
        let m = PearceyModel::new(params(a, 0.0)).unwrap();
        let x = 1e-4f64;
        let v = m.pk(3, C::new(x, 0.0)).unwrap().unscaled()[2] * x.powf(a);
        // Γ(1) = Γ(2) = 1
        assert!((v + 1.0).norm() < 1e-2, "a={a}: {v}");
    }
}

#[test]
fn small_x_third_solution_is_path_independent() {
    // p₃″ at tiny x does not depend on where the path turns onto its ray
    let p = params(0.5, 1.0);
    for x in [1e-8, 1e-10] {
        let vals: Vec<C> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&h| {
                let mut spec = ContourSpec::new(Contour::Gamma3).with_nodes(48);
                spec.junction = Some(h);
                p_contour(C::new(x, 0.0), &spec, &p).unwrap().unscaled()[2]
            })
            .collect();
        assert!(rel(vals[0], vals[2]) < 1e-11 && rel(vals[1], vals[2]) < 1e-11, "x={x}: {vals:?}");
    }
}

#[test]
fn determinant_identity_across_parameters() {
    for a in [-0.5, 0.0, 0.5, 1.0, 2.0] {
        for r in [-1.0, 0.0, 1.0] {
            let m = PearceyModel::new(params(a, r)).unwrap();
            for k in 0..20 {
                let x = 1e-2 * 1e4f64.powf(k as f64 / 19.0);
                let d = m.psi_tilde(x).unwrap().det_times_x_alpha(a);
                assert!((d - 1.0).norm() <= 1e-8, "a={a} r={r} x={x}: {d}");
            }
        }
    }
}

#[test]
fn psi_tilde_at_large_x_is_finite_and_scaled() {
    let m = PearceyModel::new(params(0.5, 1.0)).unwrap();
    let t = m.psi_tilde(100.0).unwrap();
    for c in &t.columns {
        for v in c.as_array() {
            assert!(v.norm().is_finite() && v.norm() < 1e100);
        }
        assert!(c.scale_exponent.is_finite());
    }
    // the growing column carries about e^{θ}, θ = (3/2)x^{2/3} + ρx^{1/3}
    let grow = t.columns.iter().map(|c| c.scale_exponent).fold(f64::NEG_INFINITY, f64::max);
    assert!(grow > 20.0 && grow < 40.0, "{grow}");
    assert!((t.det_times_x_alpha(0.5) - 1.0).norm() < 1e-8);
}

#[test]
fn kernel_vectors_orthogonal_and_linear_in_gamma() {
    let p = params(0.5, 1.0);
    for x in [0.3, 4.0, 25.0] {
        let v = kernel_vectors(x, &p, 0.4).unwrap();
        let s = (v.f_scale + v.h_scale).exp();
        let dot: C = (0..3).map(|k| v.f[k] * v.h[k]).sum::<C>() * s * (2.0 * PI / 0.4);
        let size: f64 = (0..3).map(|k| (v.f[k] * v.h[k]).norm()).sum::<f64>() * s * (2.0 * PI / 0.4);
        assert!(dot.norm() <= 1e-9 * size.max(1.0), "x={x}: {dot}");
        let w = kernel_vectors(x, &p, 0.8).unwrap();
        for k in 0..3 {
            let a = w.h[k] * w.h_scale.exp();
            let b = v.h[k] * v.h_scale.exp() * 2.0;
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
        }
    }
}

#[test]
fn kernel_against_double_contour() {
    let p = params(0.0, 0.0);
    let k = kernel(10.0, 10.0, &p, 1.0).unwrap();
    let o = kernel_double_contour(10.0, 10.0, &p).unwrap();
    assert!((k - o).abs() <= 1e-6 * o.abs());
    let k = kernel(1.0, 2.0, &p, 1.0).unwrap();
    let o = kernel_double_contour(1.0, 2.0, &p).unwrap();
    assert!((k - o).abs() <= 1e-6 * o.abs());
}

#[test]
fn double_contour_node_doubling() {
    let p = params(0.5, -1.0);
    let base = DoubleContourSpec::default();
    let fine = DoubleContourSpec { s_nodes: 2 * base.s_nodes, t_nodes: 2 * base.t_nodes, ..base };
    for (x, y) in [(0.5, 3.0), (7.0, 7.0), (15.0, 2.0)] {
        let a = kernel_double_contour_with(x, y, &p, &base).unwrap();
        let b = kernel_double_contour_with(x, y, &p, &fine).unwrap();
        assert!((a - b).abs() <= 1e-8 * b.abs(), "({x},{y})");
    }
}

#[test]
fn density_positive_and_continuous() {
    let m = PearceyModel::new(params(0.0, 0.0)).unwrap();
    for x in [0.5, 2.0, 10.0, 40.0] {
        assert!(m.kernel(x, x, 1.0).unwrap() > 0.0);
    }
    let k11 = m.kernel(1.0, 1.0, 1.0).unwrap();
    let k12 = m.kernel(1.0, 1.0 + 1e-6, 1.0).unwrap();
    assert!((k12 - k11).abs() <= 1e-4 * k11.abs());
}

#[test]
fn expected_count_from_the_density() {
    let m = PearceyModel::new(params(0.0, 0.0)).unwrap();
    let g = build_grid(100.0, 200).unwrap();
    let n: f64 = g.nodes.iter().zip(&g.weights).map(|(&x, &w)| w * m.kernel(x, x, 1.0).unwrap()).sum();
    let mu = 3.0 * 3f64.sqrt() / (4.0 * PI) * 100f64.powf(2.0 / 3.0);
    assert!((n - mu).abs() < 0.1, "{n} vs {mu}");
}

#[test]
fn invalid_arguments_are_rejected() {
    assert!(matches!(kernel(0.0, 1.0, &params(0.0, 0.0), 1.0), Err(pearcey_gap::Error::Domain(_))));
    assert!(kernel_vectors(1.0, &params(0.0, 0.0), 1.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn series_and_loops_agree_on_the_overlap(x in 1.0f64..3.0, y in -0.5f64..0.5, a in -0.5f64..2.0, r in -1.0f64..1.0) {
        let p = params(a, r);
        let init = pk_initial_values(&p).unwrap();
        let z = C::new(x, y);
        for (k, c) in [(1u8, Contour::Gamma1), (2, Contour::Gamma2)] {
            let s = p_entire(z, k, &p, &init).unwrap().as_array();
            let l = p_contour(z, &ContourSpec::new(c), &p).unwrap().unscaled();
            for j in 0..3 {
                prop_assert!(rel(l[j], s[j]) < 1e-8, "k={} j={} {} vs {}", k, j, l[j], s[j]);
            }
        }
    }

    #[test]
    fn swap_symmetry_of_the_pair_product(x in 0.2f64..30.0, y in 0.2f64..30.0) {
        let m = PearceyModel::new(params(0.5, 0.5)).unwrap();
        let a = m.kernel(x, y, 1.0).unwrap() * m.kernel(y, x, 1.0).unwrap();
        let b = m.kernel(y, x, 1.0).unwrap() * m.kernel(x, y, 1.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn kernel_linear_in_gamma(x in 0.2f64..30.0, y in 0.2f64..30.0, g in 0.05f64..1.0) {
        let m = PearceyModel::new(params(1.0, -0.5)).unwrap();
        let k1 = m.kernel(x, y, 1.0).unwrap();
        let kg = m.kernel(x, y, g).unwrap();
        prop_assert!((kg - g * k1).abs() <= 1e-12 * k1.abs().max(1e-300));
    }
}
