//! Complex log-Gamma, log Barnes G, integer zeta values and the thinning map.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Truncation controls for the power series in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionConfig {
    pub series_tolerance: f64,
    pub max_terms: usize,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        Self {
            series_tolerance: 1e-16,
            max_terms: 64,
        }
    }
}

impl PrecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tolerance > 0.0 && self.series_tolerance <= 1e-6) {
            return Err(Error::domain(format!(
                "series_tolerance {} outside (0, 1e-6]",
                self.series_tolerance
            )));
        }
        if self.max_terms < 32 {
            return Err(Error::domain(format!("max_terms {} < 32", self.max_terms)));
        }
        Ok(())
    }
}

// Lanczos approximation, g = 671/128, 14 terms.
const LANCZOS_G: f64 = 671.0 / 128.0;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    // Valid for Re z >= 1; every logarithm below stays on its principal sheet there.
    let mut ser = Complex64::new(0.999_999_999_999_997_092, 0.0);
    let mut y = z;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    let t = z + LANCZOS_G;
    (z + 0.5) * t.ln() - t + LN_SQRT_2PI + ser.ln() - z.ln()
}

fn is_nonpositive_integer(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Principal branch of ln Γ(z), continuous off the non-positive real axis.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("ln_gamma of a non-finite argument"));
    }
    if is_nonpositive_integer(z) {
        return Err(Error::domain(format!("ln_gamma pole at z = {}", z.re)));
    }
    if z.re >= 1.0 {
        return Ok(ln_gamma_lanczos(z));
    }
    // Shift up: ln Γ(z) = ln Γ(z+n) - Σ ln(z+k). The sum of principal logs tracks the
    // continuous branch as long as the path z+k stays off the negative real axis,
    // which it does for Im z != 0; on the real axis we take the real log of |Γ|
    // and add iπ per negative factor.
    let n = (1.0 - z.re).ceil() as usize;
    let mut acc = ln_gamma_lanczos(z + n as f64);
    if z.im == 0.0 {
        let mut negatives = 0usize;
        for k in 0..n {
            let w = z.re + k as f64;
            acc -= w.abs().ln();
            if w < 0.0 {
                negatives += 1;
            }
        }
        if negatives % 2 == 1 {
            acc += Complex64::new(0.0, PI);
        }
        return Ok(acc);
    }
    for k in 0..n {
        acc -= (z + k as f64).ln();
    }
    Ok(acc)
}

/// Γ(x) for real x off the poles.
pub fn gamma_real(x: f64) -> Result<f64> {
    let lg = ln_gamma(Complex64::new(x, 0.0))?;
    let sign = if lg.im.abs() > 1.0 { -1.0 } else { 1.0 };
    Ok(sign * lg.re.exp())
}

/// 1/Γ(x) for real x, zero at the poles.
pub fn rgamma_real(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        return 0.0;
    }
    1.0 / gamma_real(x).expect("non-pole argument")
}

/// Argument of Γ(z) taken from the continuous log branch.
pub fn arg_gamma(z: Complex64) -> Result<f64> {
    Ok(ln_gamma(z)?.im)
}

/// |Γ(z)|.
pub fn abs_gamma(z: Complex64) -> Result<f64> {
    Ok(ln_gamma(z)?.re.exp())
}

const ZETA_MAX: usize = 66;

/// ζ(k) - 1 for 2 ≤ k ≤ 65, summed once from n = 2 with an Euler–Maclaurin tail.
fn zeta_minus_one_table() -> &'static [f64; ZETA_MAX] {
    static TABLE: OnceLock<[f64; ZETA_MAX]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Bernoulli numbers B_2..B_12.
        const B: [f64; 6] = [
            1.0 / 6.0,
            -1.0 / 30.0,
            1.0 / 42.0,
            -1.0 / 30.0,
            5.0 / 66.0,
            -691.0 / 2730.0,
        ];
        let mut out = [0.0; ZETA_MAX];
        let n_cut = 40usize;
        for (k, slot) in out.iter_mut().enumerate().skip(2) {
            let s = k as f64;
            let mut sum = 0.0;
            for n in (2..n_cut).rev() {
                sum += (n as f64).powf(-s);
            }
            let big_n = n_cut as f64;
            // Σ_{n≥N} n^{-s} = N^{1-s}/(s-1) + N^{-s}/2 + Σ B_{2j}/(2j)! (s)_{2j-1} N^{-s-2j+1}
            let mut tail = big_n.powf(1.0 - s) / (s - 1.0) + 0.5 * big_n.powf(-s);
            let mut rising = s; // s(s+1)...(s+2j-2)
            let mut fact = 2.0; // (2j)!
            for (j, b) in B.iter().enumerate() {
                let j = j + 1;
                tail += b / fact * rising * big_n.powf(-s - 2.0 * j as f64 + 1.0);
                rising *= (s + 2.0 * j as f64 - 1.0) * (s + 2.0 * j as f64);
                fact *= (2.0 * j as f64 + 1.0) * (2.0 * j as f64 + 2.0);
            }
            *slot = sum + tail;
        }
        out
    })
}

/// Riemann ζ(k) for integer 2 ≤ k ≤ 65.
pub fn zeta_int(k: usize) -> Result<f64> {
    if !(2..ZETA_MAX).contains(&k) {
        return Err(Error::domain(format!("zeta_int supports 2..={}, got {k}", ZETA_MAX - 1)));
    }
    Ok(1.0 + zeta_minus_one_table()[k])
}

fn ln_barnes_g_series(z: Complex64, cfg: &PrecisionConfig) -> Result<Complex64> {
    let table = zeta_minus_one_table();
    let ln_2pi = (2.0 * PI).ln();
    let mut acc = (ln_2pi - 1.0) * z / 2.0 - (1.0 + EULER_GAMMA) * z * z / 2.0
        + ((1.0 + z).ln() - z + z * z / 2.0);
    let mut zk = z * z;
    let mut converged = z.norm() == 0.0;
    for k in 3..cfg.max_terms.min(ZETA_MAX) {
        zk *= z;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * table[k - 1] * zk / k as f64;
        acc += term;
        if term.norm() <= cfg.series_tolerance * acc.norm().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numeric(format!("Barnes G series did not converge at z = {z}")));
    }
    Ok(acc)
}

/// ln G(w) for w = 1 + z, using the Taylor series on |Re z| ≤ 1/2 and G(1+z) = Γ(z)G(z) to move there.
pub fn ln_barnes_g(one_plus_z: Complex64) -> Result<Complex64> {
    ln_barnes_g_with(one_plus_z, &PrecisionConfig::default())
}

pub fn ln_barnes_g_with(one_plus_z: Complex64, cfg: &PrecisionConfig) -> Result<Complex64> {
    cfg.validate()?;
    if is_nonpositive_integer(one_plus_z) {
        return Err(Error::domain(format!("Barnes G vanishes at {}", one_plus_z.re)));
    }
    let mut z = one_plus_z - 1.0;
    if z.im.abs() > 1.0 {
        return Err(Error::domain(format!("ln_barnes_g needs |Im z| <= 1, got {}", z.im)));
    }
    let mut shift = Complex64::new(0.0, 0.0);
    while z.re > 0.5 {
        // ln G(1+z) = ln Γ(z) + ln G(z)
        shift += ln_gamma(z)?;
        z -= 1.0;
    }
    while z.re < -0.5 {
        // ln G(1+z) = ln G(2+z) - ln Γ(1+z)
        shift -= ln_gamma(z + 1.0)?;
        z += 1.0;
    }
    Ok(shift + ln_barnes_g_series(z, cfg)?)
}

/// β = ln(1-γ)/(2πi), purely imaginary with positive imaginary part.
pub fn beta_of_gamma(gamma: f64) -> Result<Complex64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma = {gamma} outside (0, 1)")));
    }
    Ok(Complex64::new(0.0, -(-gamma).ln_1p() / (2.0 * PI)))
}

/// γ = 1 - e^{2πiβ}.
pub fn gamma_of_beta(beta: Complex64) -> f64 {
    let v = 1.0 - (2.0 * PI * Complex64::i() * beta).exp();
    v.re
}
