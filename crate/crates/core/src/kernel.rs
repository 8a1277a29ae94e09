//! The functions p₁…p₄, the matrix Ψ̃(x) built from them, and the hard-edge Pearcey kernel
//! in integrable form f(x)ᵗh(y)/(x−y).
//!
//! Values that can leave double range are carried as (mantissa, log-scale) pairs: the
//! true quantity is `stored * exp(scale_exponent)`.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::quadrature::gauss_legendre;
use crate::specialfn::rgamma_real;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// |z| up to which p₁, p₂ are summed from their Taylor series.
pub const SERIES_RADIUS: f64 = 3.0;
/// Relative distance |x−y|/max(x,1) below which the kernel uses its diagonal expansion.
pub const DIAG_SWITCH: f64 = 1e-5;

/// Decimal digits lost to cancellation when the kernel is used at distance s from the origin.
pub fn cancellation_digits(s: f64) -> f64 {
    0.75 * s.powf(2.0 / 3.0) / std::f64::consts::LN_10
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha = {alpha} must exceed -1")));
        }
        if !rho.is_finite() {
            return Err(Error::domain("rho must be finite"));
        }
        Ok(Self { alpha, rho })
    }
}

/// θ_k(z) = (3/2)ω^{2k}z^{2/3} + ρω^k z^{1/3}, principal roots.
pub struct PhaseFunctions;

impl PhaseFunctions {
    pub fn omega() -> C {
        C::from_polar(1.0, 2.0 * PI / 3.0)
    }

    pub fn theta(k: u32, z: C, rho: f64) -> C {
        let w = Self::omega();
        let lz = z.ln();
        let z13 = (lz / 3.0).exp();
        let z23 = (2.0 * lz / 3.0).exp();
        1.5 * w.powu(2 * k) * z23 + rho * w.powu(k) * z13
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPolynomials {
    pub pi3: f64,
    pub pi6: f64,
    pub c_psi: Matrix3<f64>,
}

impl RhoPolynomials {
    pub fn new(p: &ModelParams) -> Self {
        let (a, r) = (p.alpha, p.rho);
        let pi3 = r * (r * r + 9.0 * a - 18.0) / 27.0;
        let r2 = r * r;
        let pi6 = (r2 * r2 * r2 + (18.0 * a - 45.0) * r2 * r2 + (81.0 * a * a - 405.0 * a + 405.0) * r2
            - 243.0 * a * a
            + 729.0 * a
            - 405.0)
            / (2.0 * 729.0);
        #[rustfmt::skip]
        let c_psi = Matrix3::new(
            1.0, pi3, pi6,
            0.0, 1.0, pi3 + r / 3.0,
            0.0, 0.0, 1.0,
        );
        Self { pi3, pi6, c_psi }
    }
}

/// A p_k function with its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PkTriple {
    pub value: C,
    pub d1: C,
    pub d2: C,
    pub scale_exponent: f64,
}

impl PkTriple {
    fn unscaled_at(v: [C; 3]) -> Self {
        Self { value: v[0], d1: v[1], d2: v[2], scale_exponent: 0.0 }
    }

    pub fn as_array(&self) -> [C; 3] {
        [self.value, self.d1, self.d2]
    }

    /// True values; overflows to infinity when the scale is too large.
    pub fn unscaled(&self) -> [C; 3] {
        let f = self.scale_exponent.exp();
        [self.value * f, self.d1 * f, self.d2 * f]
    }

    /// Third derivative from the differential equation, in the same scaling.
    pub fn d3(&self, z: C, p: &ModelParams) -> C {
        (p.rho * self.d1 + self.value - p.alpha * self.d2) / z
    }

    /// Fourth derivative from the differentiated equation, in the same scaling.
    pub fn d4(&self, z: C, p: &ModelParams) -> C {
        let d3 = self.d3(z, p);
        (p.rho * self.d2 + self.d1 - (1.0 + p.alpha) * d3) / z
    }
}

/// Which integral representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contour {
    /// Counterclockwise loop in the right half-plane through the origin.
    Gamma1,
    /// Mirror of Γ₁ in the imaginary axis, clockwise.
    Gamma2,
    /// From infinity in the upper half-plane into the origin.
    Gamma3,
    /// Conjugate of Γ₃.
    Gamma4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub contour: Contour,
    /// Loop radius for Γ₁/Γ₂; defaults to max(|z|,1)^{-1/3}.
    pub radius: Option<f64>,
    /// Distance from 0 of the corner of Γ₃/Γ₄; defaults to |z|^{-1/3}.
    pub junction: Option<f64>,
    /// Hard cap on the ray length of Γ₃/Γ₄; the ray is otherwise cut where the integrand
    /// has decayed by 1e-18 relative to its maximum.
    pub truncation: Option<f64>,
    /// Trapezoid nodes on a loop, or Gauss nodes per panel on Γ₃/Γ₄.
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(contour: Contour) -> Self {
        let nodes = match contour {
            Contour::Gamma1 | Contour::Gamma2 => 128,
            _ => 24,
        };
        Self { contour, radius: None, junction: None, truncation: None, nodes }
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.nodes = n;
        self
    }
}

/// p(0), p′(0), p″(0) of the two entire solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub p1: [C; 3],
    pub p2: [C; 3],
}

/// Initial data at z = 0, obtained by integrating the linear ρ-flow from ρ = 0.
pub fn pk_initial_values(params: &ModelParams) -> Result<InitialData> {
    let a = params.alpha;
    let mut y0 = [C::new(0.0, 0.0); 6];
    for k in 0..3 {
        let v = 2.0 * PI * I * 2f64.powf(-(a + k as f64) / 2.0) * rgamma_real((a + k as f64) / 2.0);
        y0[k] = v;
        y0[3 + k] = if k % 2 == 0 { -v } else { v };
    }
    let rho = params.rho;
    let y = if rho == 0.0 {
        y0.to_vec()
    } else {
        let scale = y0.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let opts = OdeOptions {
            rtol: 1e-14,
            atol: 1e-16 * scale,
            min_step: 1e-15,
            max_steps: 200_000,
            ..Default::default()
        };
        let flow = |r: f64, y: &[C], dy: &mut [C]| {
            for b in [0, 3] {
                dy[b] = (a - 1.0) * y[b + 1] - r * y[b];
                dy[b + 1] = y[b];
                dy[b + 2] = y[b + 1];
            }
        };
        ode::integrate(flow, 0.0, &y0, rho, &[], &opts, |_, _| Ok(()), |_, _| {})
            .map_err(|e| Error::numeric(format!("initial-data flow failed: {e}")))?
            .0
    };
    let p1 = [y[0], y[1], y[2]];
    let p2 = [y[3], y[4], y[5]];
    for (name, p) in [("p1", p1), ("p2", p2)] {
        let res = a * p[2] - rho * p[1] - p[0];
        let mag = (a * p[2]).norm() + (rho * p[1]).norm() + p[0].norm() + p[1].norm();
        if res.norm() > 1e-11 * mag.max(1e-300) {
            return Err(Error::consistency(format!(
                "{name}(0) violates alpha p'' - rho p' - p = 0 (residual {:.2e})",
                res.norm()
            )));
        }
    }
    Ok(InitialData { p1, p2 })
}

/// Taylor coefficients up to convergence at |z|, plus the derivative sums.
fn taylor_sum(z: C, init: [C; 3], params: &ModelParams, derivs: usize) -> Result<Vec<C>> {
    let (a, rho) = (params.alpha, params.rho);
    let mut coef = vec![init[0], init[1], init[2] / 2.0];
    if a == 0.0 {
        let res = init[0] + rho * init[1];
        if res.norm() > 1e-10 * (init[0].norm() + (rho * init[1]).norm() + init[1].norm()).max(1e-300) {
            return Err(Error::Consistency(format!(
                "alpha = 0 needs p(0) = -rho p'(0); residual {:.2e}",
                res.norm()
            )));
        }
    }
    let mut out = vec![C::new(0.0, 0.0); derivs + 1];
    let max_terms = 600;
    let mut small_run = 0;
    let mut zn = C::new(1.0, 0.0); // z^n
    let mut zpow = Vec::with_capacity(max_terms);
    for n in 0..max_terms {
        if n >= 3 {
            let m = (n - 2) as f64;
            let next = (rho * (m + 1.0) * coef[n - 1] + coef[n - 2]) / ((m + 2.0) * (m + 1.0) * (m + a));
            coef.push(next);
        }
        zpow.push(zn);
        zn *= z;
        let mut biggest = 0.0f64;
        for (d, slot) in out.iter_mut().enumerate() {
            if n >= d {
                let falling: f64 = (0..d).map(|j| (n - j) as f64).product();
                let term = coef[n] * falling * zpow[n - d];
                *slot += term;
                biggest = biggest.max(term.norm() / slot.norm().max(1e-300));
            }
        }
        if n > 8 + 2 * derivs && biggest < 1e-17 {
            small_run += 1;
            if small_run >= 3 {
                return Ok(out);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::numeric(format!("series for p did not converge at |z| = {}", z.norm())))
}

/// p₁ or p₂ from its Taylor series at 0.
pub fn p_entire(z: C, which: u8, params: &ModelParams, init: &InitialData) -> Result<PkTriple> {
    let data = match which {
        1 => init.p1,
        2 => init.p2,
        _ => return Err(Error::domain("p_entire: which must be 1 or 2")),
    };
    let s = taylor_sum(z, data, params, 2)?;
    Ok(PkTriple::unscaled_at([s[0], s[1], s[2]]))
}

/// Derivatives 0..=4 of p₁ or p₂ from the Taylor series.
pub fn p_entire_jet(z: C, which: u8, params: &ModelParams, init: &InitialData) -> Result<[C; 5]> {
    let data = if which == 1 { init.p1 } else { init.p2 };
    let s = taylor_sum(z, data, params, 4)?;
    Ok([s[0], s[1], s[2], s[3], s[4]])
}

/// ln t with arg t restricted to the range attached to contour Γ_k.
fn log_branch(t: C, contour: Contour) -> C {
    let l = t.ln();
    match contour {
        Contour::Gamma2 if l.im < 0.0 => l + C::new(0.0, 2.0 * PI),
        _ => l,
    }
}

/// Node list (t_j, w_j·dt/du) along a contour.
struct Path {
    nodes: Vec<(C, C)>,
}

fn loop_path(contour: Contour, r: f64, n: usize) -> Path {
    let h = 2.0 * PI / n as f64;
    let nodes = (0..n)
        .map(|j| {
            let th = -PI + (j as f64 + 0.5) * h;
            let e = C::from_polar(1.0, th);
            match contour {
                Contour::Gamma1 => (r * (1.0 + e), I * r * e * h),
                _ => (-r * (1.0 + e.conj()), I * r * e.conj() * h),
            }
        })
        .collect();
    Path { nodes }
}

/// Γ₃/Γ₄ traversed from 0 outwards: segment 0 → corner, then a ray. Caller flips the sign.
fn open_path(
    z: C,
    contour: Contour,
    spec: &ContourSpec,
    params: &ModelParams,
    n: usize,
) -> Result<Path> {
    let upper = contour == Contour::Gamma3;
    let az = z.norm();
    let argz = z.arg();
    if argz.abs() > PI / 4.0 + 1e-12 || az == 0.0 {
        return Err(Error::Geometry(format!(
            "Γ3/Γ4 implemented for |arg z| <= π/4, z != 0 (got z = {z})"
        )));
    }
    let h = spec.junction.unwrap_or(az.powf(-1.0 / 3.0));
    let sign = if upper { 1.0 } else { -1.0 };
    // The corner sits on the saddle direction of zt + 1/(2t²); the ray leaves along the
    // steepest-descent direction, rotated with arg z so that Re(zt) → −∞.
    let corner_dir = C::from_polar(1.0, sign * (2.0 * PI / 3.0 - argz / 3.0));
    let ray_dir = C::from_polar(1.0, sign * (5.0 * PI / 6.0) - argz / 3.0);
    let corner = h * corner_dir;
    let rule = gauss_legendre(n);
    let mut nodes = Vec::new();

    // Segment, geometric panels refining towards 0 where exp(1/(2t²)) switches on.
    let mut edges = vec![h];
    while *edges.last().unwrap() > 0.01 {
        let e = *edges.last().unwrap() * 0.5;
        edges.push(e);
    }
    edges.push(0.0);
    edges.reverse();
    for w in edges.windows(2) {
        for (u, wt) in rule.on_interval(w[0], w[1]) {
            nodes.push((u * corner_dir, wt * corner_dir));
        }
    }

    // Ray, with panels growing geometrically until the integrand has died out. Decay is
    // judged on the j = 2 moment, whose extra t² dominates far out on the ray.
    let exponent = |t: C| -> f64 {
        (z * t + params.rho / t + 0.5 / (t * t) + (params.alpha - 1.0) * log_branch(t, contour)).re
    };
    let decay = (z * ray_dir).re.abs();
    let mut len = (0.25 * h).min(0.5 / decay);
    let mut u0 = 0.0;
    let mut peak = exponent(corner);
    let cap = spec.truncation.unwrap_or(f64::INFINITY);
    for _ in 0..400 {
        let u1 = (u0 + len).min(cap);
        let mut panel_max = f64::NEG_INFINITY;
        for (u, wt) in rule.on_interval(u0, u1) {
            let t = corner + u * ray_dir;
            panel_max = panel_max.max(exponent(t));
            nodes.push((t, wt * ray_dir));
        }
        peak = peak.max(panel_max);
        let tail_end = exponent(corner + u1 * ray_dir);
        u0 = u1;
        if u0 >= cap {
            if tail_end > peak - 41.4 {
                return Err(Error::Accuracy(format!(
                    "ray truncated at length {cap} before the integrand decayed"
                )));
            }
            return Ok(Path { nodes });
        }
        if tail_end < peak - 41.4 && panel_max < peak - 41.4 {
            return Ok(Path { nodes });
        }
        len *= 1.6;
    }
    Err(Error::Accuracy("contour ray did not reach the decay threshold".into()))
}

/// ∫ t^{α−3+j} e^{zt+ρ/t+1/(2t²)} dt for j = 0, 1, 2 over a path; returns the three sums
/// relative to exp(scale), the scale, and the l¹ size of the j = 0 integrand.
fn moments(z: C, contour: Contour, params: &ModelParams, path: &Path) -> ([C; 3], f64, f64) {
    let a = params.alpha;
    let exps: Vec<C> = path
        .nodes
        .iter()
        .map(|&(t, _)| z * t + params.rho / t + 0.5 / (t * t) + (a - 3.0) * log_branch(t, contour))
        .collect();
    let scale = exps.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let mut acc = [C::new(0.0, 0.0); 3];
    let mut l1 = 0.0;
    for (&(t, w), e) in path.nodes.iter().zip(&exps) {
        let v = (e - scale).exp() * w;
        l1 += v.norm();
        acc[0] += v;
        acc[1] += v * t;
        acc[2] += v * t * t;
    }
    (acc, scale, l1)
}

/// Contour-integral evaluation of p_k with node-refinement error control.
pub fn p_contour(z: C, spec: &ContourSpec, params: &ModelParams) -> Result<PkTriple> {
    if spec.nodes < 16 {
        return Err(Error::domain("contour node count must be at least 16"));
    }
    let prefactor = match spec.contour {
        Contour::Gamma1 => c(1.0),
        Contour::Gamma2 | Contour::Gamma3 => C::from_polar(1.0, -params.alpha * PI),
        Contour::Gamma4 => C::from_polar(1.0, params.alpha * PI),
    };
    // Open contours are built outwards from 0, the reverse of their orientation.
    let orient = match spec.contour {
        Contour::Gamma3 | Contour::Gamma4 => -1.0,
        _ => 1.0,
    };
    let mut n = spec.nodes;
    let build = |n: usize| -> Result<Path> {
        match spec.contour {
            Contour::Gamma1 | Contour::Gamma2 => {
                let r = spec.radius.unwrap_or(z.norm().max(1.0).powf(-1.0 / 3.0));
                Ok(loop_path(spec.contour, r, n))
            }
            _ => open_path(z, spec.contour, spec, params, n),
        }
    };
    let coarse_n = |n: usize| match spec.contour {
        Contour::Gamma1 | Contour::Gamma2 => n / 2,
        _ => (2 * n) / 3,
    };
    for _ in 0..6 {
        let (fine, s_f, l1) = moments(z, spec.contour, params, &build(n)?);
        let (coarse, s_c, _) = moments(z, spec.contour, params, &build(coarse_n(n))?);
        let shift = (s_c - s_f).exp();
        let mut diff = 0.0f64;
        let mut size = 0.0f64;
        for j in 0..3 {
            diff = diff.max((fine[j] - coarse[j] * shift).norm());
            size = size.max(fine[j].norm());
        }
        let floor = 1e-13 * l1;
        if diff <= 1e-11 * size + floor {
            let mut v = fine.map(|x| x * prefactor * orient);
            // keep stored magnitudes moderate
            let m = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            let mut scale = s_f;
            if m > 0.0 && m.is_finite() {
                let lm = m.ln();
                for x in v.iter_mut() {
                    *x /= m;
                }
                scale += lm;
            }
            if !scale.is_finite() {
                return Err(Error::Range(format!("p_k scale not finite at z = {z}")));
            }
            return Ok(PkTriple { value: v[0], d1: v[1], d2: v[2], scale_exponent: scale });
        }
        n *= 2;
        if n > 1 << 14 {
            break;
        }
    }
    Err(Error::Accuracy(format!(
        "contour quadrature for {:?} at z = {z} did not converge",
        spec.contour
    )))
}

/// Precomputed data for one (α, ρ): initial values for the entire solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PearceyModel {
    pub params: ModelParams,
    pub init: InitialData,
}

impl PearceyModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        Ok(Self { params, init: pk_initial_values(&params)? })
    }

    /// p_k(x) for x > 0 with the standard dispatch: series near 0 for the entire
    /// solutions, contours elsewhere.
    pub fn pk(&self, k: u8, z: C) -> Result<PkTriple> {
        match k {
            1 | 2 if z.norm() <= SERIES_RADIUS => p_entire(z, k, &self.params, &self.init),
            1 => p_contour(z, &ContourSpec::new(Contour::Gamma1), &self.params),
            2 => p_contour(z, &ContourSpec::new(Contour::Gamma2), &self.params),
            3 => p_contour(z, &ContourSpec::new(Contour::Gamma3), &self.params),
            4 => p_contour(z, &ContourSpec::new(Contour::Gamma4), &self.params),
            _ => Err(Error::domain("k must be in 1..=4")),
        }
    }

    pub fn psi_tilde(&self, x: f64) -> Result<PsiTilde> {
        psi_tilde_with(x, self)
    }

    pub fn kernel_vectors(&self, x: f64, gamma: f64) -> Result<KernelVectors> {
        kernel_vectors_with(x, self, gamma)
    }

    pub fn kernel(&self, x: f64, y: f64, gamma: f64) -> Result<f64> {
        let fx = self.kernel_vectors(x, gamma)?;
        let fy = if x == y { fx } else { self.kernel_vectors(y, gamma)? };
        Ok(kernel_from_vectors(&fx, &fy)?.0)
    }
}

/// Ψ̃(x) with columns (p₂, p₃, p₁), each scaled separately; the scale of each column
/// already includes the prefactor e^{ρ²/6}/√(2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiTilde {
    pub x: f64,
    pub columns: [PkTriple; 3],
    pub prefactor: f64,
}

impl PsiTilde {
    /// det(Ψ̃)·x^α, which should be 1.
    pub fn det_times_x_alpha(&self, alpha: f64) -> C {
        let m = Matrix3::from_fn(|i, j| self.columns[j].as_array()[i]);
        let log_scale: f64 = self.columns.iter().map(|t| t.scale_exponent).sum();
        m.determinant() * (log_scale + alpha * self.x.ln()).exp()
    }
}

pub fn psi_tilde(x: f64, params: &ModelParams) -> Result<PsiTilde> {
    psi_tilde_with(x, &PearceyModel::new(*params)?)
}

fn psi_tilde_with(x: f64, model: &PearceyModel) -> Result<PsiTilde> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("psi_tilde needs x > 0, got {x}")));
    }
    let z = c(x);
    let rho = model.params.rho;
    let prefactor = (rho * rho / 6.0).exp() / (2.0 * PI).sqrt();
    let lp = prefactor.ln();
    let mut cols = [model.pk(2, z)?, model.pk(3, z)?, model.pk(1, z)?];
    for col in cols.iter_mut() {
        col.scale_exponent += lp;
    }
    let psi = PsiTilde { x, columns: cols, prefactor };
    let d = psi.det_times_x_alpha(model.params.alpha);
    if (d - 1.0).norm() > 1e-6 {
        return Err(Error::consistency(format!(
            "det(Psi)·x^alpha = {d} at x = {x} (alpha = {}, rho = {rho})",
            model.params.alpha
        )));
    }
    Ok(psi)
}

/// f(x) with two derivatives and h(x), each with its own log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelVectors {
    pub x: f64,
    pub f: [C; 3],
    pub df: [C; 3],
    pub d2f: [C; 3],
    pub f_scale: f64,
    pub h: [C; 3],
    pub h_scale: f64,
}

fn cross(a: [C; 3], b: [C; 3]) -> [C; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[C; 3], b: &[C; 3]) -> C {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn kernel_vectors(x: f64, params: &ModelParams, gamma: f64) -> Result<KernelVectors> {
    kernel_vectors_with(x, &PearceyModel::new(*params)?, gamma)
}

fn kernel_vectors_with(x: f64, model: &PearceyModel, gamma: f64) -> Result<KernelVectors> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma = {gamma} outside (0, 1]")));
    }
    let psi = psi_tilde_with(x, model)?;
    let p = &model.params;
    let z = c(x);
    let col1 = psi.columns[0];
    // f and its derivatives: the p₂ column. Near 0 the ODE quotient loses digits, so
    // the series supplies p‴ and p⁗ directly there.
    let (f, df, d2f, f_scale) = if x <= SERIES_RADIUS {
        let jet = p_entire_jet(z, 2, p, &model.init)?;
        let pf = psi.prefactor;
        (
            [jet[0] * pf, jet[1] * pf, jet[2] * pf],
            [jet[1] * pf, jet[2] * pf, jet[3] * pf],
            [jet[2] * pf, jet[3] * pf, jet[4] * pf],
            0.0,
        )
    } else {
        let d3 = col1.d3(z, p);
        let d4 = col1.d4(z, p);
        (
            col1.as_array(),
            [col1.d1, col1.d2, d3],
            [col1.d2, d3, d4],
            col1.scale_exponent,
        )
    };
    // Row 2 of Ψ̃⁻¹ is (c₃ × c₁)/det with det = x^{−α}.
    let c1 = col1.as_array();
    let c3 = psi.columns[2].as_array();
    let cr = cross(c3, c1);
    let g = gamma / (2.0 * PI);
    let h = cr.map(|v| v * g / I);
    let h_scale = psi.columns[2].scale_exponent + col1.scale_exponent + p.alpha * x.ln();
    Ok(KernelVectors { x, f, df, d2f, f_scale, h, h_scale })
}

/// γK(x,y) from precomputed vectors. Returns (real value, imaginary residue).
pub fn kernel_from_vectors(a: &KernelVectors, b: &KernelVectors) -> Result<(f64, f64)> {
    let (x, y) = (a.x, b.x);
    let dx = x - y;
    let (v, mag) = if dx.abs() < DIAG_SWITCH * x.max(1.0) {
        // γK(x,y) ≈ f′(y)ᵗh(y) + (x−y)/2 · f″(y)ᵗh(y)
        let s = (b.f_scale + b.h_scale).exp();
        let t0 = dot(&b.df, &b.h);
        let t1 = dot(&b.d2f, &b.h);
        let mag: f64 = (0..3).map(|k| (b.df[k] * b.h[k]).norm()).sum::<f64>() * s;
        ((t0 + 0.5 * dx * t1) * s, mag)
    } else {
        // [f(x) − f(y)]ᵗh(y)/(x − y); the subtracted term vanishes identically.
        let ds = b.f_scale - a.f_scale;
        let fy = if ds > -700.0 { b.f.map(|v| v * ds.exp()) } else { [C::new(0.0, 0.0); 3] };
        let diff = [a.f[0] - fy[0], a.f[1] - fy[1], a.f[2] - fy[2]];
        let total = a.f_scale + b.h_scale;
        if total > 700.0 {
            return Err(Error::Range(format!("kernel scale e^{total:.1} overflows at ({x}, {y})")));
        }
        let s = total.exp();
        let mag: f64 = (0..3)
            .map(|k| (a.f[k] * b.h[k]).norm() + (fy[k] * b.h[k]).norm())
            .sum::<f64>()
            * s
            / dx.abs();
        (dot(&diff, &b.h) * s / dx, mag)
    };
    if !v.re.is_finite() {
        return Err(Error::Range(format!("kernel not finite at ({x}, {y})")));
    }
    // the rounding floor grows with the digits already lost inside the vectors
    let floor = 1e-11 * (1e-2 * 10f64.powf(cancellation_digits(x.max(y)))).max(1.0);
    if v.im.abs() > 1e-9 * v.re.abs() + floor * mag {
        return Err(Error::consistency(format!(
            "kernel at ({x}, {y}) has imaginary part {:.3e} (real {:.3e})",
            v.im, v.re
        )));
    }
    Ok((v.re, v.im))
}

/// γK_α(x, y; ρ).
pub fn kernel(x: f64, y: f64, params: &ModelParams, gamma: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain("kernel needs x, y > 0"));
    }
    PearceyModel::new(*params)?.kernel(x, y, gamma)
}

/// Shape parameters of the double-contour evaluator. `t_radius` is where γ_t crosses the
/// negative real axis; γ_s is the circle |s + r| = r with r = `s_ratio`·`t_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleContourSpec {
    pub t_radius: Option<f64>,
    pub s_ratio: f64,
    pub s_nodes: usize,
    pub t_nodes: usize,
}

impl Default for DoubleContourSpec {
    fn default() -> Self {
        Self { t_radius: None, s_ratio: 0.35, s_nodes: 384, t_nodes: 384 }
    }
}

// γ_t(u) = R(−1 + κ(cosh u − 1) + iλ sinh u), traversed top → left → bottom.
const GT_KAPPA: f64 = 0.5;
const GT_LAMBDA: f64 = 1.5;

fn gt_point(r: f64, u: f64) -> (C, C) {
    let t = r * C::new(-1.0 + GT_KAPPA * (u.cosh() - 1.0), -GT_LAMBDA * u.sinh());
    let dt = r * C::new(GT_KAPPA * u.sinh(), -GT_LAMBDA * u.cosh());
    (t, dt)
}

// γ_s(θ) = −r(1 + e^{−iθ}), clockwise, touching 0 at θ = ±π.
fn gs_point(r: f64, th: f64) -> (C, C) {
    let e = C::from_polar(1.0, -th);
    (-r * (1.0 + e), I * r * e)
}

fn ln_arg_range(z: C, lo: f64) -> C {
    let mut l = z.ln();
    while l.im <= lo {
        l.im += 2.0 * PI;
    }
    while l.im > lo + 2.0 * PI {
        l.im -= 2.0 * PI;
    }
    l
}

fn s_exponent(s: C, x: f64, p: &ModelParams) -> C {
    x * s + p.rho / s + 0.5 / (s * s) + p.alpha * ln_arg_range(s, PI / 2.0 - 1e-300)
}

fn t_exponent(t: C, y: f64, p: &ModelParams) -> C {
    -y * t - p.rho / t - 0.5 / (t * t) - p.alpha * ln_arg_range(t, 0.0)
}

/// Largest real exponent on γ_s and γ_t for a given t-radius (coarse sampling).
fn double_contour_cost(x: f64, y: f64, p: &ModelParams, r_t: f64, ratio: f64) -> f64 {
    let r_s = ratio * r_t;
    let ms = (1..64)
        .map(|j| s_exponent(gs_point(r_s, -PI + j as f64 * PI / 32.0).0, x, p).re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mt = (0..121)
        .map(|j| t_exponent(gt_point(r_t, -6.0 + j as f64 * 0.1).0, y, p).re)
        .fold(f64::NEG_INFINITY, f64::max);
    ms + mt
}

/// Direct quadrature of the defining double contour integral. Independent of the
/// p-function machinery; meant as an oracle for moderate x, y.
pub fn kernel_double_contour(x: f64, y: f64, params: &ModelParams) -> Result<f64> {
    kernel_double_contour_with(x, y, params, &DoubleContourSpec::default())
}

pub fn kernel_double_contour_with(
    x: f64,
    y: f64,
    params: &ModelParams,
    spec: &DoubleContourSpec,
) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain("kernel_double_contour needs x, y > 0"));
    }
    let r_t = match spec.t_radius {
        Some(r) => r,
        None => {
            let mut best = (f64::INFINITY, 1.0);
            for j in 0..=80 {
                let r = 0.03 * 1.06f64.powi(j);
                let cost = double_contour_cost(x, y, params, r, spec.s_ratio);
                if cost < best.0 {
                    best = (cost, r);
                }
            }
            best.1
        }
    };
    let r_s = spec.s_ratio * r_t;
    if spec.s_ratio >= 0.45 {
        return Err(Error::Geometry(format!(
            "γ_s reaches {:.3} but γ_t crosses at {:.3}; reduce s_ratio",
            -2.0 * r_s,
            -r_t
        )));
    }

    // γ_s: trapezoid in θ.
    let ns = spec.s_nodes;
    let hs = 2.0 * PI / ns as f64;
    let mut s_nodes = Vec::with_capacity(ns);
    for j in 0..ns {
        let th = -PI + (j as f64 + 0.5) * hs;
        let (s, ds) = gs_point(r_s, th);
        s_nodes.push((s, s_exponent(s, x, params), ds * hs));
    }
    // γ_t: trapezoid in u on [−U, U], U where the integrand has decayed.
    let peak_t = (0..=200)
        .map(|j| t_exponent(gt_point(r_t, -4.0 + j as f64 * 0.04).0, y, params).re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut u_max = 1.0;
    while t_exponent(gt_point(r_t, u_max).0, y, params).re > peak_t - 45.0
        || t_exponent(gt_point(r_t, -u_max).0, y, params).re > peak_t - 45.0
    {
        u_max += 0.25;
        if u_max > 40.0 {
            return Err(Error::Geometry("γ_t integrand does not decay".into()));
        }
    }
    let nt = spec.t_nodes;
    let ht = 2.0 * u_max / (nt - 1) as f64;
    let mut t_nodes = Vec::with_capacity(nt);
    for j in 0..nt {
        let u = -u_max + j as f64 * ht;
        let (t, dt) = gt_point(r_t, u);
        t_nodes.push((t, t_exponent(t, y, params), dt * ht));
    }

    // Separation check: the local node spacing on each contour must be small against
    // the distance to the other contour.
    let too_close = |pts: &[(C, C, C)], other: &[(C, C, C)]| -> Option<(f64, f64)> {
        for w in pts.windows(2) {
            let spacing = (w[1].0 - w[0].0).norm();
            let gap = other.iter().map(|o| (o.0 - w[0].0).norm()).fold(f64::INFINITY, f64::min);
            if gap < 1.5 * spacing {
                return Some((gap, spacing));
            }
        }
        None
    };
    if let Some((gap, spacing)) = too_close(&s_nodes, &t_nodes).or(too_close(&t_nodes, &s_nodes)) {
        return Err(Error::Geometry(format!(
            "contours {gap:.3e} apart with node spacing {spacing:.3e}; separate them or add nodes"
        )));
    }

    let ms = s_nodes.iter().map(|n| n.1.re).fold(f64::NEG_INFINITY, f64::max);
    let mt = t_nodes.iter().map(|n| n.1.re).fold(f64::NEG_INFINITY, f64::max);
    let a: Vec<(C, C)> = s_nodes.iter().map(|(s, e, w)| (*s, (e - ms).exp() * w)).collect();
    let b: Vec<(C, C)> = t_nodes.iter().map(|(t, e, w)| (*t, (e - mt).exp() * w)).collect();
    let mut sum = C::new(0.0, 0.0);
    for &(s, wa) in &a {
        let mut inner = C::new(0.0, 0.0);
        for &(t, wb) in &b {
            inner += wb / (t - s);
        }
        sum += wa * inner;
    }
    let k = sum * (ms + mt).exp() / ((2.0 * PI * I) * (2.0 * PI * I));
    if !k.re.is_finite() {
        return Err(Error::Range(format!("double-contour kernel overflow at ({x}, {y})")));
    }
    Ok(k.re)
}
