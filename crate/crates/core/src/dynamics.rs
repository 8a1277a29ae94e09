//! The 12-dimensional Hamiltonian system for the Fredholm determinant: right-hand side,
//! first integrals, large-s seeding and backward integration.
//!
//! The index-1 family (q₁, p₁) carries factors e^{∓θ₃(s)/2} that exceed double range at the
//! default seed. The system is invariant under (q₁, p₁) → (c·q₁, p₁/c) for constant c, so
//! the state stores rescaled values together with an explicit log-scale exponent λ:
//! q₁ = e^{−λ}q̃₁ and p₁ = e^{λ}p̃₁.
//!
//! Integrated backward, p₁ picks up an exponentially growing parasitic mode. The integrator
//! damps it with a term that vanishes on the special solution. The term needs the growing
//! direction Q₃ of the linear q₁-flow. A first pass takes Q₃ from frozen eigenvectors. Each
//! refinement pass then integrates Q₃ forward along the previous trajectory, where that
//! direction is attracting.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::asymptotics::{psi, theta3};
use crate::error::{Error, Result};
use crate::kernel::{ModelParams, RhoPolynomials};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::specialfn::{abs_gamma, beta_of_gamma, gamma_real};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);
const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Log-scale exponents below this magnitude are multiplied out in reported samples.
pub const FOLD_THRESHOLD: f64 = 200.0;

fn dot(a: &[C; 3], b: &[C; 3]) -> C {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[C; 3], b: &[C; 3]) -> [C; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: &[C; 3]) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}

fn max_abs(a: &[C; 3]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn arr(y: &[C], at: usize) -> [C; 3] {
    [y[at], y[at + 1], y[at + 2]]
}

/// State of the system at one s. Index-1 components are stored rescaled, see the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianState {
    pub s: f64,
    pub q0: [C; 3],
    pub q1: [C; 3],
    pub p0: [C; 3],
    pub p1: [C; 3],
    pub log_scale: f64,
}

/// Residuals of the four conserved combinations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResiduals {
    /// Σ q₀ₖp₀ₖ + α
    pub family0: C,
    /// Σ q₁ₖp₁ₖ
    pub family1: C,
    /// p₀₁q₀₃ + p₁₁q₁₃ − 1
    pub unit: C,
    /// p₀₁q₀₂ + p₀₂q₀₃ + p₁₁q₁₂ + p₁₂q₁₃ − ρ
    pub rho: C,
}

impl ConstraintResiduals {
    pub fn as_array(&self) -> [C; 4] {
        [self.family0, self.family1, self.unit, self.rho]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl HamiltonianState {
    pub(crate) fn to_vec(self) -> Vec<C> {
        let mut v = Vec::with_capacity(12);
        v.extend_from_slice(&self.q0);
        v.extend_from_slice(&self.q1);
        v.extend_from_slice(&self.p0);
        v.extend_from_slice(&self.p1);
        v
    }

    pub(crate) fn from_slice(s: f64, y: &[C], log_scale: f64) -> Self {
        Self { s, q0: arr(y, 0), q1: arr(y, 3), p0: arr(y, 6), p1: arr(y, 9), log_scale }
    }

    /// True q₁, p₁ values when they fit in double range.
    pub fn index1(&self) -> Result<([C; 3], [C; 3])> {
        if self.log_scale.abs() > 700.0 {
            return Err(Error::Range(format!(
                "index-1 log scale {:.1} exceeds double range",
                self.log_scale
            )));
        }
        let e = self.log_scale.exp();
        Ok((self.q1.map(|v| v / e), self.p1.map(|v| v * e)))
    }

    /// Multiply the log-scale exponent out when it is small enough.
    pub fn folded(&self) -> Self {
        if self.log_scale == 0.0 || self.log_scale.abs() >= FOLD_THRESHOLD {
            return *self;
        }
        let (q1, p1) = self.index1().expect("checked range");
        Self { q1, p1, log_scale: 0.0, ..*self }
    }

    pub fn hamiltonian(&self) -> Result<C> {
        hamiltonian(self)
    }

    /// Residuals with respect to the exact values of the four conserved combinations.
    pub fn residuals(&self, params: &ModelParams) -> ConstraintResiduals {
        let (q0, q1, p0, p1) = (&self.q0, &self.q1, &self.p0, &self.p1);
        ConstraintResiduals {
            family0: dot(q0, p0) + params.alpha,
            family1: dot(q1, p1),
            unit: p0[0] * q0[2] + p1[0] * q1[2] - 1.0,
            rho: p0[0] * q0[1] + p0[1] * q0[2] + p1[0] * q1[1] + p1[1] * q1[2] - params.rho,
        }
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("the system needs s > 0, got {s}")));
    }
    Ok(())
}

fn rhs_slice(s: f64, y: &[C], dy: &mut [C]) {
    let (q0, q1, p0, p1) = (arr(y, 0), arr(y, 3), arr(y, 6), arr(y, 9));
    let s1 = dot(&p1, &q0) / s;
    let s0 = dot(&p0, &q1) / s;
    for k in 0..3 {
        dy[k] = q1[k] * s1;
        dy[3 + k] = if k < 2 { q1[k + 1] } else { ZERO } + q0[k] * s0;
        dy[6 + k] = -p1[k] * s0;
        dy[9 + k] = -(if k > 0 { p1[k - 1] } else { ZERO }) - p0[k] * s1;
    }
}

fn hamiltonian_slice(s: f64, y: &[C]) -> C {
    let (q0, q1, p0, p1) = (arr(y, 0), arr(y, 3), arr(y, 6), arr(y, 9));
    p1[0] * q1[1] + p1[1] * q1[2] + dot(&p1, &q0) * dot(&p0, &q1) / s
}

/// d/ds of (q₀, q₁, p₀, p₁), in that order.
pub fn rhs(state: &HamiltonianState) -> Result<[C; 12]> {
    check_s(state.s)?;
    let mut dy = [ZERO; 12];
    rhs_slice(state.s, &state.to_vec(), &mut dy);
    Ok(dy)
}

pub fn hamiltonian(state: &HamiltonianState) -> Result<C> {
    check_s(state.s)?;
    Ok(hamiltonian_slice(state.s, &state.to_vec()))
}

/// (∂H/∂p, −∂H/∂q) by central differences, in the ordering of [`rhs`].
pub fn hamilton_gradient_fd(state: &HamiltonianState, h: f64) -> Result<[C; 12]> {
    check_s(state.s)?;
    let y = state.to_vec();
    let mut out = [ZERO; 12];
    for k in 0..12 {
        // q at k < 6 pairs with p at k + 6
        let (var, sign) = if k < 6 { (k + 6, 1.0) } else { (k - 6, -1.0) };
        let step = h * y[var].norm().max(1.0);
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[var] += step;
        ym[var] -= step;
        out[k] = sign * (hamiltonian_slice(state.s, &yp) - hamiltonian_slice(state.s, &ym)) / (2.0 * step);
    }
    Ok(out)
}

/// The matrix A(s) = N + (1/s)q₀p₀ᵗ of the linear index-1 flow q₁′ = Aq₁, p₁′ = −Aᵗp₁.
fn linear_matrix(s: f64, q0: &[C; 3], p0: &[C; 3]) -> Matrix3<C> {
    let mut a = Matrix3::from_fn(|i, j| q0[i] * p0[j] / s);
    a[(0, 1)] += 1.0;
    a[(1, 2)] += 1.0;
    a
}

fn cubic_roots(c2: C, c1: C, c0: C) -> [C; 3] {
    // monic λ³ + c2λ² + c1λ + c0 by simultaneous (Durand–Kerner) iteration
    let scale = c2.norm().max(c1.norm().sqrt()).max(c0.norm().cbrt()).max(1e-300);
    let mut z = [C::from_polar(scale, 0.4), C::from_polar(scale, 0.4 + 2.1), C::from_polar(scale, 0.4 + 4.2)];
    let p = |x: C| ((x + c2) * x + c1) * x + c0;
    for _ in 0..500 {
        let mut change = 0.0f64;
        for i in 0..3 {
            let mut den = C::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                den = C::new(1e-300, 0.0);
            }
            let d = p(z[i]) / den;
            z[i] -= d;
            change = change.max(d.norm());
        }
        if change <= 1e-15 * scale {
            break;
        }
    }
    z
}

fn null_vector(m: &Matrix3<C>) -> [C; 3] {
    let r: [[C; 3]; 3] = std::array::from_fn(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]);
    let cands = [cross(&r[0], &r[1]), cross(&r[0], &r[2]), cross(&r[1], &r[2])];
    let best = cands
        .iter()
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .copied()
        .expect("three candidates");
    let n = norm(&best);
    best.map(|v| v / n)
}

/// Eigenvalue of A with the largest real part and its right and left eigenvectors.
fn growing_mode(a: &Matrix3<C>) -> (C, [C; 3], [C; 3]) {
    let tr = a.trace();
    let minors = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)] + a[(0, 0)] * a[(2, 2)]
        - a[(0, 2)] * a[(2, 0)]
        + a[(1, 1)] * a[(2, 2)]
        - a[(1, 2)] * a[(2, 1)];
    let det = a.determinant();
    let roots = cubic_roots(-tr, minors, -det);
    let lam = *roots.iter().max_by(|x, y| x.re.total_cmp(&y.re)).expect("three roots");
    let shifted = a - Matrix3::from_diagonal_element(lam);
    (lam, null_vector(&shifted), null_vector(&shifted.transpose()))
}

/// Large-s data from which the seed is assembled.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedData {
    pub s0: f64,
    pub beta: C,
    pub c_alpha: f64,
    pub c_n: Matrix3<C>,
    pub c_psi: Matrix3<f64>,
    pub q0_hat: [C; 3],
    pub p0_hat: [C; 3],
    /// Index-1 hat values with e^{∓θ₃/2} removed.
    pub q1_hat_scaled: [C; 3],
    pub p1_hat_scaled: [C; 3],
    pub theta3: f64,
    pub psi: f64,
}

pub fn c_alpha(alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        Ok(1.0)
    } else {
        Ok(-gamma_real(alpha)?)
    }
}

pub fn c_n(beta: C) -> Matrix3<C> {
    let one = C::new(1.0, 0.0);
    let b = -SQRT3 * beta * I;
    #[rustfmt::skip]
    let m = Matrix3::new(
        one, b, -1.5 * beta * beta + SQRT3 / 2.0 * beta * I,
        ZERO, one, b,
        ZERO, ZERO, one,
    );
    m
}

fn validate_seed_args(s0: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("seeding needs gamma in (0, 1), got {gamma}")));
    }
    if !(s0 >= 1e3) || !s0.is_finite() {
        return Err(Error::domain(format!("seeding needs s0 >= 1e3, got {s0}")));
    }
    Ok(())
}

pub fn seed_data(s0: f64, gamma: f64, params: &ModelParams) -> Result<SeedData> {
    validate_seed_args(s0, gamma)?;
    let (a, r) = (params.alpha, params.rho);
    let b = beta_of_gamma(gamma)?;
    let rp = RhoPolynomials::new(params);
    let (pi3, pi6) = (rp.pi3, rp.pi6);
    let ca = c_alpha(a)?;
    let ps = psi(s0, gamma, params)?.value;
    let th = theta3(s0, r);
    let s13 = s0.cbrt();
    let (m13, m23) = (1.0 / s13, 1.0 / (s13 * s13));
    let cos = |shift: f64| (2.0 * ps + shift).cos();
    let k = 2.0 * b * I / (3.0 * SQRT3);
    let tp = 2.0 * PI / 3.0;

    let kq = (1.0 - gamma).cbrt() * (r * r / 6.0).exp() * ca / (2.0 * PI).sqrt();
    let q0_hat = [
        kq * (-pi6 + pi3 * (pi3 + r / 3.0) - b * b / 3.0 + k * cos(0.0)),
        kq * (-pi3 - r / 3.0
            + (b * b / 3.0 + b * I / SQRT3 * (r * pi3 + 2.0 / 3.0 * r * r + a - 1.0) + k * cos(-tp)) * m13),
        kq * (1.0 - SQRT3 / 3.0 * r * b * I * m13
            - (b * b / 2.0 * (1.0 + r * r / 3.0) + b * I / (2.0 * SQRT3) * (r * r / 3.0 + 2.0 * a - 1.0)
                - k * cos(tp))
                * m23),
    ];
    let kp = 1.0 / kq;
    let p0_hat = [
        kp * (1.0 + I * b / SQRT3 * r * m13
            + (0.5 * b * b * (3.0 * r * pi3 + 5.0 / 3.0 * r * r + 1.0)
                + I * b / (2.0 * SQRT3) * (r * pi3 + r * r + 2.0 * a + 1.0 - 4.0 / 3.0 * cos(-tp)))
                * m23),
        kp * (pi3 + r
            + (-b * b / 3.0 + I * b / (3.0 * SQRT3) * (3.0 * r * pi3 + 2.0 * r * r - 3.0 * a - 3.0 - 2.0 * cos(tp)))
                * m13),
        kp * (-a + pi6 + r * pi3 + r * r / 3.0 + b * b / 3.0 - k * cos(0.0)),
    ];

    let g = abs_gamma(1.0 - b)?;
    let qpre = 2.0 * I / SQRT3 * (-2.0 / 3.0 * b * PI * I).exp() * g;
    let q1_hat_scaled = [
        qpre * s0.powf(-(a - 1.0) / 3.0) * (ps + tp).cos(),
        qpre * s0.powf(-a / 3.0) * ps.cos(),
        qpre * s0.powf(-(a + 1.0) / 3.0) * (ps - tp).cos(),
    ];
    let ppre = gamma / (SQRT3 * PI * I) * (-b * PI * I / 3.0).exp() * g;
    let p1_hat_scaled = [
        ppre * s0.powf((a - 1.0) / 3.0) * (ps - PI / 3.0).sin(),
        -ppre * s0.powf(a / 3.0) * ps.sin(),
        ppre * s0.powf((a + 1.0) / 3.0) * (ps + PI / 3.0).sin(),
    ];
    Ok(SeedData {
        s0,
        beta: b,
        c_alpha: ca,
        c_n: c_n(b),
        c_psi: rp.c_psi,
        q0_hat,
        p0_hat,
        q1_hat_scaled,
        p1_hat_scaled,
        theta3: th,
        psi: ps,
    })
}

impl SeedData {
    /// q = C_Ψ D C_N D⁻¹ q̂ and p = C_Ψ^{−t} D⁻¹ C_N^{−t} D p̂ with D = diag(s^{1/3}, 1, s^{−1/3}).
    pub fn transforms(&self) -> Result<(Matrix3<C>, Matrix3<C>)> {
        let s13 = self.s0.cbrt();
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(s13, 1.0, 1.0 / s13)).map(C::from);
        let dinv = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0 / s13, 1.0, s13)).map(C::from);
        let cpsi = self.c_psi.map(C::from);
        let mq = cpsi * d * self.c_n * dinv;
        let mp = mq
            .try_inverse()
            .ok_or_else(|| Error::numeric("seed transform is singular"))?
            .transpose();
        Ok((mq, mp))
    }

    pub fn state(&self) -> Result<HamiltonianState> {
        let (mq, mp) = self.transforms()?;
        let apply = |m: &Matrix3<C>, v: &[C; 3]| {
            let w = m * nalgebra::Vector3::new(v[0], v[1], v[2]);
            [w[0], w[1], w[2]]
        };
        let q1 = apply(&mq, &self.q1_hat_scaled);
        let p1 = apply(&mp, &self.p1_hat_scaled);
        let m = max_abs(&q1);
        Ok(HamiltonianState {
            s: self.s0,
            q0: apply(&mq, &self.q0_hat),
            q1: q1.map(|v| v / m),
            p0: apply(&mp, &self.p0_hat),
            p1: p1.map(|v| v * m),
            log_scale: self.theta3 / 2.0 - m.ln(),
        })
    }
}

/// Seed state at s0 from the large-s expansion, with the parasitic p₁ component removed.
pub fn seed_large_s(s0: f64, gamma: f64, params: &ModelParams) -> Result<HamiltonianState> {
    let mut st = seed_data(s0, gamma, params)?.state()?;
    let a = linear_matrix(st.s, &st.q0, &st.p0);
    let (_, q3, left) = growing_mode(&a);
    remove_parasitic(&mut st, &q3, &left);
    let tol = 10.0 / s0.cbrt();
    let res = st.residuals(params);
    for (name, v) in ["family0", "family1", "unit", "rho"].iter().zip(res.as_array()) {
        // family1 is a relative quantity in the rescaled variables
        let size = if *name == "family1" { norm(&st.q1) * norm(&st.p1) } else { 1.0 };
        if v.norm() > tol * size.max(1.0) {
            return Err(Error::Accuracy(format!(
                "seed residual {name} = {:.3e} exceeds {tol:.3e} at s0 = {s0}",
                v.norm()
            )));
        }
    }
    Ok(st)
}

/// The direction along which the parasitic mode is removed: the left eigenvector made
/// orthogonal (in the bilinear pairing) to the current q₁, so Σq₁p₁ is untouched.
fn removal_direction(q1: &[C; 3], left: &[C; 3]) -> [C; 3] {
    let qc = q1.map(|v| v.conj());
    let c = dot(left, q1) / dot(&qc, q1);
    [left[0] - c * qc[0], left[1] - c * qc[1], left[2] - c * qc[2]]
}

/// Amount of the removal direction present in p₁, measured by the pairing with Q₃.
fn parasitic_amount(p1: &[C; 3], q3: &[C; 3], d: &[C; 3]) -> C {
    let den = dot(d, q3);
    if den.norm() < 1e-12 * norm(d) * norm(q3) {
        ZERO
    } else {
        dot(p1, q3) / den
    }
}

/// Change of p₀ that, together with a change `dp1` of p₁ orthogonal to q₁, leaves all four
/// conserved combinations fixed: e·q₀ = 0 and e absorbs the dp1 terms of the unit and ρ sums.
fn p0_compensation(dp1: &[C; 3], q0: &[C; 3], q1: &[C; 3]) -> [C; 3] {
    if q0[2].norm() < 1e-12 * norm(q0) {
        return [ZERO; 3];
    }
    let unit = -(dp1[0] * q1[2]);
    let rho = -(dp1[0] * q1[1] + dp1[1] * q1[2]);
    let e0 = unit / q0[2];
    let e1 = (rho - e0 * q0[1]) / q0[2];
    let e2 = -(e0 * q0[0] + e1 * q0[1]) / q0[2];
    [e0, e1, e2]
}

fn remove_parasitic(st: &mut HamiltonianState, q3: &[C; 3], left: &[C; 3]) {
    let d = removal_direction(&st.q1, left);
    let c = parasitic_amount(&st.p1, q3, &d);
    let dp1 = d.map(|v| -c * v);
    let e = p0_compensation(&dp1, &st.q0, &st.q1);
    for k in 0..3 {
        st.p1[k] += dp1[k];
        st.p0[k] += e[k];
    }
}

/// Piecewise cubic Hermite interpolation of a vector-valued function.
#[derive(Debug, Clone, Default)]
struct HermiteTable {
    s: Vec<f64>,
    y: Vec<Vec<C>>,
    dy: Vec<Vec<C>>,
}

impl HermiteTable {
    fn push(&mut self, s: f64, y: Vec<C>, dy: Vec<C>) {
        self.s.push(s);
        self.y.push(y);
        self.dy.push(dy);
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.s.len()).collect();
        idx.sort_by(|&a, &b| self.s[a].total_cmp(&self.s[b]));
        idx.dedup_by(|a, b| self.s[*a] == self.s[*b]);
        self.s = idx.iter().map(|&i| self.s[i]).collect();
        self.y = idx.iter().map(|&i| self.y[i].clone()).collect();
        self.dy = idx.iter().map(|&i| self.dy[i].clone()).collect();
    }

    fn eval(&self, s: f64) -> Vec<C> {
        let n = self.s.len();
        let j = self.s.partition_point(|&x| x <= s).clamp(1, n - 1);
        let (a, b) = (self.s[j - 1], self.s[j]);
        let h = b - a;
        let t = ((s - a) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (0..self.y[0].len())
            .map(|k| {
                self.y[j - 1][k] * h00 + self.dy[j - 1][k] * (h10 * h) + self.y[j][k] * h01 + self.dy[j][k] * (h11 * h)
            })
            .collect()
    }
}

/// Options for backward integration.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Relative tolerance of the adaptive integrator, in [1e−12, 1e−6].
    pub tolerance: f64,
    /// Number of forward refinement passes for the growing direction.
    pub refine_passes: usize,
    /// Damping rate of the parasitic mode in units of s^{−1/3}.
    pub damping: f64,
    /// Scale applied to the default max-step rule min(0.2·s^{1/3}, s/50).
    pub max_step_factor: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, refine_passes: 2, damping: 4.0, max_step_factor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub state: HamiltonianState,
    pub h: C,
    /// ∫_s^{s0} H dτ accumulated from the seed.
    pub integral_from_seed: C,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub gamma: f64,
    pub s0: f64,
    pub s1: f64,
    pub options: IntegrateOptions,
    /// Samples in decreasing s, starting with the seed.
    pub samples: Vec<TrajectorySample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    /// Seed residuals of the four conserved combinations.
    pub seed_residuals: ConstraintResiduals,
}

impl Trajectory {
    pub fn sample_at(&self, s: f64) -> Option<&TrajectorySample> {
        self.samples.iter().find(|x| (x.state.s - s).abs() <= 1e-12 * s.max(1.0))
    }

    /// ∫_{a}^{b} H ds between two sample abscissae.
    pub fn integral_between(&self, a: f64, b: f64) -> Option<f64> {
        let ia = self.sample_at(a)?.integral_from_seed;
        let ib = self.sample_at(b)?.integral_from_seed;
        Some((ia - ib).re)
    }

    /// Largest change of each conserved combination relative to the seed.
    pub fn drift(&self) -> [f64; 4] {
        let r0 = self.seed_residuals.as_array();
        let mut out = [0.0f64; 4];
        for smp in &self.samples {
            let r = smp.state.residuals(&self.params).as_array();
            for k in 0..4 {
                out[k] = out[k].max((r[k] - r0[k]).norm());
            }
        }
        out
    }
}

struct Guide {
    table: Option<HermiteTable>,
}

impl Guide {
    /// Growing direction Q₃ and left eigenvector at s.
    fn at(&self, s: f64, q0: &[C; 3], p0: &[C; 3]) -> ([C; 3], [C; 3]) {
        let a = linear_matrix(s, q0, p0);
        let (_, right, left) = growing_mode(&a);
        match &self.table {
            None => (right, left),
            Some(t) => {
                let v = t.eval(s);
                ([v[0], v[1], v[2]], left)
            }
        }
    }
}

fn max_step_rule(s: f64) -> f64 {
    (0.2 * s.cbrt()).min(s / 50.0)
}

struct PassOutput {
    samples: Vec<TrajectorySample>,
    stats: OdeStats,
    table: HermiteTable,
}

fn backward_pass(
    seed: &HamiltonianState,
    s1: f64,
    stops: &[f64],
    opts: &IntegrateOptions,
    guide: &Guide,
) -> Result<PassOutput> {
    let s0 = seed.s;
    let mut y0 = seed.to_vec();
    y0.push(ZERO);
    let kappa = opts.damping;
    let f = |s: f64, y: &[C], dy: &mut [C]| {
        rhs_slice(s, y, dy);
        dy[12] = hamiltonian_slice(s, y);
        let (q0, q1, p0, p1) = (arr(y, 0), arr(y, 3), arr(y, 6), arr(y, 9));
        let (q3, left) = guide.at(s, &q0, &p0);
        let d = removal_direction(&q1, &left);
        let c = parasitic_amount(&p1, &q3, &d) * (kappa / s.cbrt());
        let dp1 = d.map(|v| c * v);
        let e = p0_compensation(&dp1, &q0, &q1);
        for k in 0..3 {
            dy[9 + k] += dp1[k];
            dy[6 + k] += e[k];
        }
    };
    let fac = opts.max_step_factor;
    let ode_opts = OdeOptions {
        rtol: opts.tolerance,
        atol: opts.tolerance * 1e-3,
        max_step: max_step_rule,
        min_step: 1e-12,
        max_steps: 5_000_000,
        initial_step: Some(1e-3 * fac * max_step_rule(s0)),
    };
    let mut log_scale = seed.log_scale;
    let mut samples = vec![TrajectorySample {
        state: *seed,
        h: hamiltonian(seed)?,
        integral_from_seed: ZERO,
    }];
    let mut table = HermiteTable::default();
    let mut scale_shifts: Vec<(f64, f64)> = Vec::new();
    let record = |s: f64, y: &[C], table: &mut HermiteTable| {
        let mut dy = vec![ZERO; 12];
        rhs_slice(s, y, &mut dy);
        let mut v: Vec<C> = y[0..3].to_vec();
        v.extend_from_slice(&y[6..9]);
        let mut dv: Vec<C> = dy[0..3].to_vec();
        dv.extend_from_slice(&dy[6..9]);
        table.push(s, v, dv);
    };
    record(s0, &y0, &mut table);
    let mut pending: Vec<(f64, Vec<C>, f64)> = Vec::new();
    let ode_opts = if fac == 1.0 {
        ode_opts
    } else {
        // fn pointers cannot capture, so the halved rule is a separate item
        fn half(s: f64) -> f64 {
            0.5 * max_step_rule(s)
        }
        fn quarter(s: f64) -> f64 {
            0.25 * max_step_rule(s)
        }
        let rule: fn(f64) -> f64 = if fac <= 0.25 { quarter } else { half };
        OdeOptions { max_step: rule, ..ode_opts }
    };
    let (_, stats) = ode::integrate(
        f,
        s0,
        &y0,
        s1,
        stops,
        &ode_opts,
        |s, y| {
            if !y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Integration { s, reason: "state is not finite".into() });
            }
            record(s, y, &mut table);
            let m = max_abs(&arr(y, 3));
            if m > 0.0 && m.ln().abs() > 1.0 {
                // keep |q̃₁| near 1
                for k in 3..6 {
                    y[k] /= m;
                }
                for k in 9..12 {
                    y[k] *= m;
                }
                scale_shifts.push((s, -m.ln()));
                log_scale -= m.ln();
            }
            Ok(())
        },
        |s, y| pending.push((s, y.to_vec(), 0.0)),
    )?;
    // replay the log-scale history onto the stop samples
    let mut shifts = scale_shifts.into_iter().peekable();
    let mut ls = seed.log_scale;
    for (s, y, _) in pending {
        while let Some(&(t, d)) = shifts.peek() {
            if t >= s {
                ls += d;
                shifts.next();
            } else {
                break;
            }
        }
        let st = HamiltonianState::from_slice(s, &y, ls).folded();
        samples.push(TrajectorySample { state: st, h: hamiltonian_slice(s, &y), integral_from_seed: -y[12] });
    }
    table.sort();
    Ok(PassOutput { samples, stats, table })
}

/// Forward integration of the normalized growing direction of q′ = A(s)q along a stored
/// (q₀, p₀) history.
fn forward_direction(history: &HermiteTable, s1: f64, s0: f64, tol: f64) -> Result<HermiteTable> {
    let a_at = |s: f64| {
        let v = history.eval(s);
        linear_matrix(s, &[v[0], v[1], v[2]], &[v[3], v[4], v[5]])
    };
    let (_, start, _) = growing_mode(&a_at(s1));
    let deriv = |s: f64, u: &[C], du: &mut [C]| {
        let a = a_at(s);
        let v = nalgebra::Vector3::new(u[0], u[1], u[2]);
        let w = a * v;
        let r = (v.conjugate().dot(&w)).re / v.norm_squared();
        for k in 0..3 {
            du[k] = w[k] - r * v[k];
        }
    };
    let mut table = HermiteTable::default();
    let opts = OdeOptions {
        rtol: tol,
        atol: tol * 1e-3,
        max_step: max_step_rule,
        min_step: 1e-12,
        max_steps: 5_000_000,
        initial_step: None,
    };
    let push = |s: f64, u: &[C], table: &mut HermiteTable| {
        let mut du = vec![ZERO; 3];
        deriv(s, u, &mut du);
        table.push(s, u.to_vec(), du);
    };
    push(s1, &start, &mut table);
    ode::integrate(
        deriv,
        s1,
        &start,
        s0,
        &[],
        &opts,
        |s, u| {
            let n = (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr()).sqrt();
            for v in u.iter_mut() {
                *v /= n;
            }
            push(s, u, &mut table);
            Ok(())
        },
        |_, _| {},
    )?;
    table.sort();
    Ok(table)
}

/// Integrate from the seed at s0 down to s1 < s0, sampling at `sample_s` (any order; values
/// outside (s1, s0) are ignored) and at s1.
pub fn integrate(
    seed: &HamiltonianState,
    gamma: f64,
    params: &ModelParams,
    s1: f64,
    sample_s: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let s0 = seed.s;
    if !(s1 > 0.0 && s1 <= s0) {
        return Err(Error::domain(format!("integration needs 0 < s1 <= s0, got s1 = {s1}, s0 = {s0}")));
    }
    if !(1e-12..=1e-6).contains(&opts.tolerance) {
        return Err(Error::domain(format!("tolerance {} outside [1e-12, 1e-6]", opts.tolerance)));
    }
    let seed_residuals = seed.residuals(params);
    let mut stops: Vec<f64> = sample_s.iter().copied().filter(|&s| s < s0 && s > s1).collect();
    stops.sort_by(|a, b| b.total_cmp(a));
    stops.dedup();
    let mut traj = Trajectory {
        params: *params,
        gamma,
        s0,
        s1,
        options: opts.clone(),
        samples: vec![],
        accepted_steps: 0,
        rejected_steps: 0,
        evaluations: 0,
        seed_residuals,
    };
    if s1 == s0 {
        return Ok(traj);
    }
    let mut guide = Guide { table: None };
    let mut out = backward_pass(seed, s1, &stops, opts, &guide)?;
    let mut stats = out.stats;
    for _ in 0..opts.refine_passes {
        let dir = forward_direction(&out.table, s1, s0, opts.tolerance)?;
        guide.table = Some(dir);
        out = backward_pass(seed, s1, &stops, opts, &guide)?;
        stats.accepted += out.stats.accepted;
        stats.rejected += out.stats.rejected;
        stats.evaluations += out.stats.evaluations;
    }
    traj.samples = out.samples;
    traj.accepted_steps = stats.accepted;
    traj.rejected_steps = stats.rejected;
    traj.evaluations = stats.evaluations;
    Ok(traj)
}

/// Five equally spaced abscissae around each centre, spacing `rel_h·s^{1/3}`.
pub fn stencil_grid(centres: &[f64], rel_h: f64) -> Vec<f64> {
    centres
        .iter()
        .flat_map(|&c| {
            let h = rel_h * c.cbrt();
            [-2.0, -1.0, 0.0, 1.0, 2.0].map(|k| c + k * h)
        })
        .collect()
}

/// One row of the identity report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityRow {
    pub s: f64,
    /// |d/ds(sH) − (p₁₁q₁₂ + p₁₂q₁₃)| / |p₁₁q₁₂ + p₁₂q₁₃|
    pub s_identity: f64,
    /// max |rhs − (∂H/∂p, −∂H/∂q)| relative to the largest derivative.
    pub hamilton: f64,
}

/// Residuals of the γ or ρ identity at one abscissa: both sides by central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterIdentityRow {
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
    pub max_s_identity: f64,
    pub max_hamilton: f64,
    pub parameter_rows: Vec<ParameterIdentityRow>,
}

fn five_point_runs(samples: &[TrajectorySample]) -> Vec<usize> {
    // indices of the middle sample of runs of five equally spaced samples
    let mut out = Vec::new();
    let mut i = 0;
    while i + 4 < samples.len() {
        let s: Vec<f64> = (0..5).map(|k| samples[i + k].state.s).collect();
        let h = s[0] - s[1];
        let ok = h > 0.0 && (1..4).all(|k| ((s[k] - s[k + 1]) - h).abs() <= 1e-9 * s[k].max(1.0));
        if ok {
            out.push(i + 2);
            i += 5;
        } else {
            i += 1;
        }
    }
    out
}

fn five_point_derivative(v: [C; 5], h: f64) -> C {
    // samples ordered by decreasing s: v[0] at s + 2h
    (-v[0] + 8.0 * v[1] - 8.0 * v[3] + v[4]) / (12.0 * h)
}

fn action(st: &HamiltonianState) -> Result<C> {
    let d = rhs(st)?;
    let y = st.to_vec();
    // Σ p·q′ − H
    let pq: C = (0..6).map(|k| y[k + 6] * d[k]).sum();
    Ok(pq - hamiltonian(st)?)
}

/// Residual table for the s-identity and the Hamilton equations, plus the parameter
/// identity when twin trajectories at parameter ± δ are supplied (with identical samples).
pub fn identity_report(traj: &Trajectory, twins: Option<(&Trajectory, &Trajectory, f64)>) -> Result<IdentityReport> {
    let mut rows = Vec::new();
    for i in 0..traj.samples.len() {
        let st = traj.samples[i].state;
        let d = rhs(&st)?;
        let g = hamilton_gradient_fd(&st, 1e-6)?;
        let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let ham = (0..12).map(|k| (d[k] - g[k]).norm()).fold(0.0, f64::max) / scale;
        rows.push(IdentityRow { s: st.s, s_identity: f64::NAN, hamilton: ham });
    }
    for mid in five_point_runs(&traj.samples) {
        let h = traj.samples[mid - 1].state.s - traj.samples[mid].state.s;
        let sh: [C; 5] = std::array::from_fn(|k| {
            let smp = &traj.samples[mid - 2 + k];
            smp.h * smp.state.s
        });
        let lhs = five_point_derivative(sh, h);
        let st = traj.samples[mid].state;
        let target = st.p1[0] * st.q1[1] + st.p1[1] * st.q1[2];
        rows[mid].s_identity = (lhs - target).norm() / target.norm().max(1e-300);
    }
    let max_s_identity = rows.iter().map(|r| r.s_identity).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let max_hamilton = rows.iter().map(|r| r.hamilton).fold(0.0, f64::max);
    let mut parameter_rows = Vec::new();
    if let Some((plus, minus, delta)) = twins {
        for mid in five_point_runs(&traj.samples) {
            let s = traj.samples[mid].state.s;
            let (Some(ip), Some(im)) = (
                plus.samples.iter().position(|x| x.state.s == s),
                minus.samples.iter().position(|x| x.state.s == s),
            ) else {
                continue;
            };
            if ip < 2 || im < 2 || ip + 2 >= plus.samples.len() || im + 2 >= minus.samples.len() {
                continue;
            }
            let lhs = (action(&plus.samples[ip].state)? - action(&minus.samples[im].state)?) / (2.0 * delta);
            let h = traj.samples[mid - 1].state.s - s;
            // Σ p·∂q with the twins aligned to the central log scale
            let w: [C; 5] = std::array::from_fn(|k| {
                let c = traj.samples[mid - 2 + k].state;
                let a = plus.samples[ip - 2 + k].state;
                let b = minus.samples[im - 2 + k].state;
                let ea = (c.log_scale - a.log_scale).exp();
                let eb = (c.log_scale - b.log_scale).exp();
                let mut acc = ZERO;
                for j in 0..3 {
                    acc += c.p0[j] * (a.q0[j] - b.q0[j]) / (2.0 * delta);
                    acc += c.p1[j] * (a.q1[j] * ea - b.q1[j] * eb) / (2.0 * delta);
                }
                acc
            });
            let rhs_v = five_point_derivative(w, h);
            parameter_rows.push(ParameterIdentityRow { s, lhs: lhs.re, rhs: rhs_v.re });
        }
    }
    Ok(IdentityReport { rows, max_s_identity, max_hamilton, parameter_rows })
}
