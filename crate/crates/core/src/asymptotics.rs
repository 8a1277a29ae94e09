//! Closed-form large-s expansions: F(s), H(s) with its oscillating phase, and the counting
//! statistics.
//!
//! Everything is evaluated in complex arithmetic and projected to the real axis with an
//! asserted tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::ModelParams;
use crate::specialfn::{arg_gamma, beta_of_gamma, ln_barnes_g, EULER_GAMMA};

type C = Complex64;
const I: C = C::new(0.0, 1.0);
const SQRT3: f64 = 1.732_050_807_568_877_2;

fn real(z: C, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-13 * z.re.abs().max(1.0) {
        return Err(Error::consistency(format!("{what} has imaginary part {:.3e}", z.im)));
    }
    Ok(z.re)
}

fn beta_or_zero(gamma: f64) -> Result<C> {
    if gamma == 0.0 {
        Ok(C::new(0.0, 0.0))
    } else {
        beta_of_gamma(gamma)
    }
}

/// A closed-form expansion split into its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticResult {
    pub total: f64,
    /// Coefficient-times-power terms: s^{2/3}, s^{1/3}, ln s, constant.
    pub leading: f64,
    pub sub_leading: f64,
    pub log_term: f64,
    pub constant: f64,
    /// Remainder is O(s^{remainder_order}).
    pub remainder_order: f64,
}

/// ψ(s) = απ/3 + arg Γ(1−β) − βi((2/3)ln s + ln 9) + (√3/2)(ρs^{1/3} − (3/2)s^{2/3}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiPhase {
    pub s: f64,
    pub value: f64,
}

pub fn psi(s: f64, gamma: f64, params: &ModelParams) -> Result<PsiPhase> {
    let b = beta_or_zero(gamma)?;
    let v = params.alpha * PI / 3.0 + arg_gamma(1.0 - b)?
        - b * I * (2.0 / 3.0 * s.ln() + 9f64.ln())
        + SQRT3 / 2.0 * (params.rho * s.cbrt() - 1.5 * s.powf(2.0 / 3.0));
    Ok(PsiPhase { s, value: real(v, "psi")? })
}

pub fn f_asy(s: f64, gamma: f64, params: &ModelParams) -> Result<AsymptoticResult> {
    if !(s > 0.0) {
        return Err(Error::domain("f_asy needs s > 0"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!("f_asy needs gamma in [0, 1), got {gamma}")));
    }
    let b = beta_or_zero(gamma)?;
    let rho = params.rho;
    let leading = real(1.5 * SQRT3 * b * I * s.powf(2.0 / 3.0), "s^(2/3) term")?;
    let sub_leading = real(-SQRT3 * rho * b * I * s.cbrt(), "s^(1/3) term")?;
    let log_term = real(-2.0 / 3.0 * b * b * s.ln(), "log term")?;
    let constant = real(
        ln_barnes_g(1.0 + b)? + ln_barnes_g(1.0 - b)? - 2.0 * b * b * 3f64.ln()
            - 2.0 * params.alpha * b * PI * I / 3.0,
        "constant term",
    )?;
    Ok(AsymptoticResult {
        total: leading + sub_leading + log_term + constant,
        leading,
        sub_leading,
        log_term,
        constant,
        remainder_order: -1.0 / 3.0,
    })
}

/// The four terms of the large-s expansion of H = dF/ds; the last one oscillates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HAsymptotics {
    pub terms: [f64; 4],
    pub psi: f64,
}

impl HAsymptotics {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn smooth(&self) -> f64 {
        self.terms[0] + self.terms[1] + self.terms[2]
    }
}

pub fn h_asy_terms(s: f64, gamma: f64, params: &ModelParams) -> Result<HAsymptotics> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("h_asy needs gamma in (0, 1), got {gamma}")));
    }
    if s < 8.0 {
        return Err(Error::domain(format!("h_asy needs s >= 8, got {s}")));
    }
    let b = beta_of_gamma(gamma)?;
    let ps = psi(s, gamma, params)?.value;
    let rho = params.rho;
    let terms = [
        real(SQRT3 * b * I / s.cbrt(), "H term 1")?,
        real(-SQRT3 * rho * b * I / (3.0 * s.powf(2.0 / 3.0)), "H term 2")?,
        real(-2.0 * b * b / (3.0 * s), "H term 3")?,
        real(-2.0 * b * I / (3.0 * SQRT3 * s) * (2.0 * ps).cos(), "H term 4")?,
    ];
    Ok(HAsymptotics { terms, psi: ps })
}

pub fn h_asy(s: f64, gamma: f64, params: &ModelParams) -> Result<f64> {
    Ok(h_asy_terms(s, gamma, params)?.total())
}

/// θ₃(s) = (3/2)s^{2/3} + ρs^{1/3}.
pub fn theta3(s: f64, rho: f64) -> f64 {
    1.5 * s.powf(2.0 / 3.0) + rho * s.cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingAsymptotics {
    pub mean: f64,
    pub variance: f64,
    /// Coefficient c in the fluctuation bound N(s) − μ(s) ≤ c·ln s.
    pub bound_coeff: f64,
}

pub fn counting_asy(s: f64, params: &ModelParams) -> CountingAsymptotics {
    let mean = 3.0 * SQRT3 / (4.0 * PI) * s.powf(2.0 / 3.0) - SQRT3 * params.rho / (4.0 * PI) * s.cbrt()
        - params.alpha / 3.0;
    CountingAsymptotics {
        mean,
        variance: variance_log_coeff() * s.ln() + variance_constant(),
        bound_coeff: 2.0 / (3.0 * PI),
    }
}

pub fn variance_log_coeff() -> f64 {
    1.0 / (3.0 * PI * PI)
}

pub fn variance_constant() -> f64 {
    (1.0 + 9f64.ln() + EULER_GAMMA) / (2.0 * PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a: f64, r: f64) -> ModelParams {
        ModelParams::new(a, r).unwrap()
    }

    #[test]
    fn f_asy_values() {
        assert_eq!(f_asy(100.0, 0.0, &p(0.0, 0.0)).unwrap().total, 0.0);
        let r = f_asy(100.0, 0.5, &p(0.0, 0.0)).unwrap();
        // leading −(3√3/2)(ln2/2π)·100^{2/3}
        let lead = -1.5 * SQRT3 * 2f64.ln() / (2.0 * PI) * 100f64.powf(2.0 / 3.0);
        assert!((r.leading - lead).abs() < 1e-13);
        assert!((r.total - (r.leading + r.sub_leading + r.log_term + r.constant)).abs() < 1e-14);
        assert!((r.total + 6.092).abs() < 2e-3, "{}", r.total);
        let d = f_asy(37.0, 0.5, &p(1.0, 0.3)).unwrap().total - f_asy(37.0, 0.5, &p(0.0, 0.3)).unwrap().total;
        assert!((d - 2.0 * PI * 2f64.ln() / (2.0 * PI) / 3.0).abs() < 1e-13);
        assert!((d - 0.2310).abs() < 1e-4);
        assert!(f_asy(10.0, 1.0, &p(0.0, 0.0)).is_err());
    }

    #[test]
    fn h_asy_terms_real_and_consistent() {
        let h = h_asy_terms(50.0, 0.5, &p(0.5, 1.0)).unwrap();
        assert!(h.terms.iter().all(|t| t.is_finite()));
        // smooth part is the derivative of f_asy up to O(1/s)
        let (s, dh) = (200.0, 0.1);
        let pr = p(0.0, 0.7);
        let fd = (f_asy(s + dh, 0.5, &pr).unwrap().total - f_asy(s - dh, 0.5, &pr).unwrap().total) / (2.0 * dh);
        let sm = h_asy_terms(s, 0.5, &pr).unwrap().smooth();
        assert!((fd - sm).abs() < 1e-6);
        assert!(h_asy(5.0, 0.5, &pr).is_err());
    }

    #[test]
    fn counting_values() {
        let c = counting_asy(100.0, &p(0.0, 0.0));
        assert!((c.mean - 8.9085).abs() < 1e-4);
        assert!((variance_constant() - 0.19122).abs() < 1e-5);
        assert!((variance_log_coeff() * 100f64.ln() - 0.15553).abs() < 1e-5);
        assert!((c.bound_coeff - 2.0 / (3.0 * PI)).abs() < 1e-16);
        let shift = counting_asy(64.0, &p(0.0, 1.0)).mean - counting_asy(64.0, &p(0.0, 0.0)).mean;
        assert!((shift + SQRT3 / (4.0 * PI) * 4.0).abs() < 1e-13);
    }
}
