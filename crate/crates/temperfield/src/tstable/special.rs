//! Incomplete gamma functions and the envelope function `g`.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{invalid, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Complete gamma function.
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

// gamma(s, z) by its power series, valid for s > 0.
fn lower_series(s: f64, z: f64) -> Result<f64> {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut ap = s;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= z / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * (s * z.ln() - z).exp());
        }
    }
    Err(Error::NonConvergence(format!("lower incomplete gamma series at s={s}, z={z}")))
}

// Gamma(s, z) by the Legendre continued fraction (modified Lentz), any real s, z > 0.
fn upper_cf(s: f64, z: f64) -> Result<f64> {
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok((s * z.ln() - z).exp() * h);
        }
    }
    Err(Error::NonConvergence(format!("upper incomplete gamma continued fraction at s={s}, z={z}")))
}

/// Lower incomplete gamma `γ(s, z) = ∫_0^z u^{s-1} e^{-u} du` for `s > 0`, `z >= 0`.
pub fn lower_gamma(s: f64, z: f64) -> Result<f64> {
    if !(s > 0.0) || !(z >= 0.0) || !s.is_finite() || z.is_nan() {
        return invalid(format!("lower_gamma requires s > 0 and z >= 0, got s={s}, z={z}"));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(gamma(s));
    }
    if z < s + 1.0 {
        lower_series(s, z)
    } else {
        Ok(gamma(s) - upper_cf(s, z)?)
    }
}

/// Upper incomplete gamma `Γ(s, z)` for `s > 0`, `z >= 0`.
pub fn upper_gamma(s: f64, z: f64) -> Result<f64> {
    if !(s > 0.0) || !(z >= 0.0) {
        return invalid(format!("upper_gamma requires s > 0 and z >= 0, got s={s}, z={z}"));
    }
    if z == 0.0 {
        return Ok(gamma(s));
    }
    if z < s + 1.0 {
        Ok(gamma(s) - lower_series(s, z)?)
    } else {
        upper_cf(s, z)
    }
}

/// Exponential integral `E1(z) = Γ(0, z)`.
pub fn exp_integral_e1(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return invalid(format!("E1 requires z > 0, got {z}"));
    }
    if z >= 1.0 {
        return upper_cf(0.0, z);
    }
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    Ok(-EULER_GAMMA - z.ln() - sum)
}

/// `Γ(-α, z) = ∫_z^∞ u^{-α-1} e^{-u} du` for `0 < α < 2`, `z > 0`.
///
/// For `z < 1` the value comes from the downward recurrence
/// `Γ(s, z) = (Γ(s+1, z) - z^s e^{-z}) / s` started at the positive parameter
/// `2 - α` (twice for `α > 1`, once for `α < 1`) or at `Γ(0, z)` for `α = 1`.
/// For `z >= 1` the recurrence loses digits to cancellation and the continued
/// fraction is used directly.
pub fn upper_gamma_neg(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return invalid(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    if !(z > 0.0) {
        return invalid(format!("upper_gamma_neg diverges at z = {z}"));
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    if z >= 1.0 {
        return upper_cf(-alpha, z);
    }
    let ez = (-z).exp();
    if alpha == 1.0 {
        return Ok(ez / z - exp_integral_e1(z)?);
    }
    let s1 = 1.0 - alpha;
    let g1 = if alpha < 1.0 {
        upper_gamma(s1, z)?
    } else {
        let g2 = upper_gamma(2.0 - alpha, z)?;
        (g2 - z.powf(s1) * ez) / s1
    };
    Ok((g1 - z.powf(-alpha) * ez) / -alpha)
}

/// `g(z) = z^{-2} γ(2-α, z) + Γ(-α, z)`.
pub fn g_fun(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return invalid(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    if !(z > 0.0) {
        return invalid(format!("g requires z > 0, got {z}"));
    }
    if z < 1e-12 && alpha != 1.0 {
        return Ok(g_small(alpha, z));
    }
    let lower = lower_gamma(2.0 - alpha, z)?;
    Ok(lower / (z * z) + upper_gamma_neg(alpha, z)?)
}

// Small-z expansion g(z) = z^{-α} Σ (-z)^n/n! [1/(2-α+n) - 1/(n-α)] + Γ(-α), α ≠ 1.
fn g_small(alpha: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut fac = 1.0;
    for n in 0..6 {
        let nf = n as f64;
        if n > 0 {
            fac *= -z / nf;
        }
        sum += fac * (1.0 / (2.0 - alpha + nf) - 1.0 / (nf - alpha));
    }
    z.powf(-alpha) * sum + gamma(-alpha)
}

/// Limit of `z^α g(z)` as `z → 0`.
pub fn g_limit_small(alpha: f64) -> f64 {
    1.0 / (2.0 - alpha) + 1.0 / alpha
}

/// Limit of `z² g(z)` as `z → ∞`.
pub fn g_limit_large(alpha: f64) -> f64 {
    gamma(2.0 - alpha)
}

/// `ln Γ(x)` for positive `x`.
pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_half_line, integrate_interval, QuadratureConfig, Tail};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig { abs_tol: 0.0, ..QuadratureConfig::default().with_tol(1e-12) }
    }

    fn lower_oracle(s: f64, z: f64) -> f64 {
        integrate_interval(&|u: f64| u.powf(s - 1.0) * (-u).exp(), 0.0, z, &cfg()).value
    }

    fn upper_neg_oracle(alpha: f64, z: f64) -> f64 {
        integrate_half_line(&|u: f64| u.powf(-alpha - 1.0) * (-u).exp(), z, 1.0, &cfg().with_box(z), Tail::Empirical, 1).value
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn reference_values() {
        let lg = lower_gamma(1.5, 1.0).unwrap();
        assert!((lg - 0.37894).abs() < 5e-6, "{lg}");
        assert!(rel(lg, lower_oracle(1.5, 1.0)) < 1e-12);
        let ug = upper_gamma_neg(0.5, 1.0).unwrap();
        assert!((ug - 0.17815).abs() < 5e-6, "{ug}");
        assert!(rel(ug, upper_neg_oracle(0.5, 1.0)) < 1e-11);
        let g = g_fun(0.5, 1.0).unwrap();
        assert!((g - 0.55709).abs() < 5e-6, "{g}");
    }

    #[test]
    fn lower_tends_to_complete_gamma() {
        for s in [0.1, 0.5, 1.5, 3.0] {
            assert!(rel(lower_gamma(s, 200.0).unwrap(), gamma(s)) < 1e-14);
            assert_eq!(lower_gamma(s, f64::INFINITY).unwrap(), gamma(s));
            assert_eq!(lower_gamma(s, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn lower_matches_quadrature_across_split() {
        for s in [0.1, 0.3, 0.7, 1.5, 1.9] {
            for z in [1e-3, 0.2, 0.9, 1.5, 2.9, 3.5, 10.0, 40.0] {
                let got = lower_gamma(s, z).unwrap();
                assert!(rel(got, lower_oracle(s, z)) < 1e-11, "s={s} z={z}");
            }
        }
    }

    #[test]
    fn upper_neg_matches_quadrature() {
        for alpha in [0.1, 0.3, 0.5, 0.9, 1.0, 1.1, 1.5, 1.9] {
            for z in [1e-4, 0.05, 0.5, 0.99, 1.0, 2.0, 7.0, 30.0] {
                let got = upper_gamma_neg(alpha, z).unwrap();
                let want = upper_neg_oracle(alpha, z);
                assert!(rel(got, want) < 1e-9, "alpha={alpha} z={z}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn e1_values() {
        // E1(1) and E1(0.1) reference values
        assert!(rel(exp_integral_e1(1.0).unwrap(), 0.219_383_934_395_520_3) < 1e-14);
        assert!(rel(exp_integral_e1(0.1).unwrap(), 1.822_923_958_419_390_7) < 1e-14);
    }

    #[test]
    fn errors_are_reported() {
        assert!(upper_gamma_neg(0.5, 0.0).is_err());
        assert!(upper_gamma_neg(2.0, 1.0).is_err());
        assert!(lower_gamma(-1.0, 1.0).is_err());
        assert!(g_fun(0.5, 0.0).is_err());
    }

    #[test]
    fn g_asymptotics() {
        for alpha in [0.3, 0.5, 1.5, 1.9] {
            let z: f64 = 1e-6;
            let small = z.powf(alpha) * g_fun(alpha, z).unwrap();
            // the first correction is Γ(-α) z^α for α < 1 and O(z) otherwise
            let corr = if alpha < 1.0 { gamma(-alpha) * z.powf(alpha) } else { 0.0 };
            assert!(rel(small, g_limit_small(alpha) + corr) < 1e-3, "alpha={alpha}: {small}");
            let z: f64 = 1e6;
            let large = z * z * g_fun(alpha, z).unwrap();
            assert!(rel(large, g_limit_large(alpha)) < 1e-3, "alpha={alpha}: {large}");
        }
        assert!((g_limit_small(0.5) - 8.0 / 3.0).abs() < 1e-15);
        assert!((g_limit_large(0.5) - 0.886_226_925_452_758).abs() < 1e-12);
    }

    #[test]
    fn small_z_branch_is_continuous() {
        for alpha in [0.3, 0.5, 1.5, 1.9] {
            let z = 1e-12;
            let a = g_small(alpha, z * 0.999_999);
            let b = g_fun(alpha, z * 1.000_001).unwrap();
            assert!(rel(a, b) < 1e-5, "alpha={alpha}: {a} vs {b}");
        }
    }
}
