//! Exponentially tempered stable laws with discrete symmetric spectral measures.
//!
//! The Lévy measure in polar form is `φ(dr, dθ) = r^{-α-1} e^{-λr} dr σ(dθ)`,
//! with `λ = 0` giving the stable case.

pub mod special;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::quad::{integrate_half_line, QuadratureConfig, Tail};
pub use special::{g_fun, g_limit_large, g_limit_small, gamma_fn, lower_gamma, upper_gamma_neg};

/// Stability index and tempering rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub lambda: f64,
}

impl StableParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let p = Self { alpha, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return invalid(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn is_stable(&self) -> bool {
        self.lambda == 0.0
    }
}

/// One atom of a spectral measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub dir: Vec<f64>,
    pub w: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

/// Finite symmetric atomic measure on the unit sphere of `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct SpectralMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    #[serde(skip)]
    orbit_uniform: bool,
}

impl TryFrom<RawMeasure> for SpectralMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        let (m, notes) = SpectralMeasure::build(raw.dim, raw.atoms)?;
        for n in notes {
            log::warn!("spectral measure: {n}");
        }
        Ok(m)
    }
}

const DIR_TOL: f64 = 1e-12;

impl SpectralMeasure {
    /// Builds a measure, normalizing directions, merging duplicates and adding
    /// missing mirror atoms. Returns the measure and a list of the repairs made.
    pub fn build(dim: usize, atoms: Vec<Atom>) -> Result<(Self, Vec<String>)> {
        if dim == 0 {
            return invalid("spectral measure dimension must be positive");
        }
        if atoms.is_empty() {
            return invalid("spectral measure needs at least one atom");
        }
        let mut notes = Vec::new();
        let mut merged: Vec<Atom> = Vec::new();
        for a in atoms {
            check_dim(dim, a.dir.len())?;
            if !(a.w > 0.0) || !a.w.is_finite() {
                return invalid(format!("atom weights must be positive and finite, got {}", a.w));
            }
            if a.dir.iter().any(|x| !x.is_finite()) {
                return invalid("atom direction has non-finite entries");
            }
            let norm = a.dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return invalid("atom direction is the zero vector");
            }
            let dir: Vec<f64> = if (norm - 1.0).abs() > DIR_TOL {
                notes.push(format!("normalized direction {:?}", a.dir));
                a.dir.iter().map(|x| x / norm).collect()
            } else {
                a.dir.clone()
            };
            match merged.iter_mut().find(|m| same_dir(&m.dir, &dir)) {
                Some(m) => {
                    notes.push(format!("merged duplicate direction {dir:?}"));
                    m.w += a.w;
                }
                None => merged.push(Atom { dir, w: a.w }),
            }
        }
        let mut closed: Vec<Atom> = Vec::with_capacity(2 * merged.len());
        let mut seen = vec![false; merged.len()];
        for i in 0..merged.len() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            let neg: Vec<f64> = merged[i].dir.iter().map(|x| -x).collect();
            let mirror = (0..merged.len()).find(|&j| !seen[j] && same_dir(&merged[j].dir, &neg));
            let w = match mirror {
                Some(j) => {
                    seen[j] = true;
                    if (merged[j].w - merged[i].w).abs() > 1e-14 * merged[i].w {
                        notes.push(format!("averaged unequal weights on ±{:?}", merged[i].dir));
                    }
                    0.5 * (merged[i].w + merged[j].w)
                }
                None => {
                    notes.push(format!("added mirror atom at {neg:?}"));
                    merged[i].w
                }
            };
            closed.push(Atom { dir: merged[i].dir.clone(), w });
            closed.push(Atom { dir: neg, w });
        }
        let dirs = DMatrix::from_fn(dim, closed.len(), |r, c| closed[c].dir[r]);
        if dirs.rank(1e-10) < dim {
            return Err(Error::InvalidInput(format!(
                "spectral measure is not full: atom directions do not span R^{dim}"
            )));
        }
        Ok((Self { dim, atoms: closed, orbit_uniform: false }, notes))
    }

    /// Builds a measure and logs any repairs as warnings.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        let (m, notes) = Self::build(dim, atoms)?;
        for n in notes {
            log::warn!("spectral measure: {n}");
        }
        Ok(m)
    }

    /// `c(ε_1 + ε_{-1})` on the real line.
    pub fn symmetric_1d(c: f64) -> Result<Self> {
        Ok(Self::build(1, vec![Atom { dir: vec![1.0], w: c }])?.0)
    }

    /// Weight `w` on each of `±e_i`, `i = 1..dim`.
    pub fn coordinate(dim: usize, w: f64) -> Result<Self> {
        let atoms = (0..dim)
            .map(|i| {
                let mut dir = vec![0.0; dim];
                dir[i] = 1.0;
                Atom { dir, w }
            })
            .collect();
        Ok(Self::build(dim, atoms)?.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// Whether the measure was produced by orbit averaging over the planar rotation group.
    pub fn is_orbit_uniform(&self) -> bool {
        self.orbit_uniform
    }

    pub(crate) fn mark_orbit_uniform(mut self) -> Self {
        self.orbit_uniform = true;
        self
    }

    /// The same measure with all weights multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return invalid("measure scale must be positive");
        }
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.w *= c;
        }
        Ok(out)
    }
}

fn same_dir(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// `R(a) = ∫_0^∞ (cos(ar) − 1) r^{−α−1} e^{−λr} dr` with its constants precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialLcf {
    alpha: f64,
    lambda: f64,
    gamma_neg: f64,
    lambda_alpha: f64,
    c_alpha: f64,
}

impl RadialLcf {
    pub fn new(params: StableParams) -> Self {
        let alpha = params.alpha;
        let c_alpha = if alpha == 1.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            gamma_fn(2.0 - alpha) * (std::f64::consts::FRAC_PI_2 * alpha).cos() / (alpha * (1.0 - alpha))
        };
        Self {
            alpha,
            lambda: params.lambda,
            gamma_neg: if alpha == 1.0 { f64::NAN } else { gamma_fn(-alpha) },
            lambda_alpha: params.lambda.powf(alpha),
            c_alpha,
        }
    }

    /// The stable constant `C_α` with `R(a) = −C_α |a|^α` at `λ = 0`.
    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn eval(&self, a: f64) -> Result<f64> {
        let x = a.abs();
        if x == 0.0 {
            return Ok(0.0);
        }
        if !x.is_finite() {
            return invalid("radial LCF argument is not finite");
        }
        if self.alpha == 1.0 {
            return radial_lcf_quadrature(StableParams { alpha: self.alpha, lambda: self.lambda }, a);
        }
        let al = self.alpha;
        if self.lambda == 0.0 {
            return Ok(-self.c_alpha * x.powf(al));
        }
        let ratio = x / self.lambda;
        let b = al * ratio.atan();
        let big_a = if ratio < 1e150 {
            0.5 * al * (ratio * ratio).ln_1p()
        } else {
            al * ratio.ln()
        };
        // Re((1 + i·ratio)^α) − 1 without cancellation
        let v = if big_a < 600.0 {
            let half = (0.5 * b).sin();
            self.lambda_alpha * (big_a.exp_m1() * b.cos() - 2.0 * half * half)
        } else {
            (al * x.ln() + 0.5 * al * (ratio * ratio).recip().ln_1p()).exp() * b.cos() - self.lambda_alpha
        };
        Ok((self.gamma_neg * v).min(0.0))
    }
}

/// Radial LCF by its closed form (quadrature when `α = 1`).
pub fn radial_lcf(params: StableParams, a: f64) -> Result<f64> {
    params.validate()?;
    RadialLcf::new(params).eval(a)
}

/// Radial LCF by quadrature of the Laplace representation
/// `R(a) = −a²/Γ(α+1) ∫_0^∞ t^α / ((λ+t)((λ+t)² + a²)) dt`, valid for every α.
pub fn radial_lcf_quadrature(params: StableParams, a: f64) -> Result<f64> {
    params.validate()?;
    let x = a.abs();
    if x == 0.0 {
        return Ok(0.0);
    }
    let al = params.alpha;
    let mu = params.lambda / x;
    let f = |t: f64| {
        let b = mu + t;
        t.powf(al) / (b * (b * b + 1.0))
    };
    let cfg = QuadratureConfig::default().with_tol(1e-12).with_box(mu.max(1.0));
    let mut res = integrate_half_line(&f, 0.0, 1.0, &cfg, Tail::PowerLaw { kappa: 3.0 - al }, 1);
    if mu > 0.0 && mu < 1.0 {
        // resolve the kink at t ≈ mu separately
        let head = crate::quad::integrate_interval(&f, 0.0, mu, &cfg);
        let tail = integrate_half_line(&f, mu, 1.0, &cfg, Tail::PowerLaw { kappa: 3.0 - al }, 1);
        res = crate::quad::Integral {
            value: head.value + tail.value,
            error: head.error + tail.error,
            evals: head.evals + tail.evals,
            converged: head.converged && tail.converged,
            diverged: tail.diverged,
        };
    }
    if !res.converged || !res.value.is_finite() {
        return Err(Error::NonConvergence(format!("radial LCF quadrature at alpha={al}, a={a}")));
    }
    Ok(-x.powf(al) / gamma_fn(al + 1.0) * res.value)
}

/// Evaluator for `ψ(u) = Σ_j w_j R(⟨u, θ_j⟩)`.
#[derive(Debug, Clone)]
pub struct Lcf {
    radial: RadialLcf,
    dim: usize,
    dirs: Vec<f64>,
    weights: Vec<f64>,
}

impl Lcf {
    pub fn new(params: StableParams, sigma: &SpectralMeasure) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            radial: RadialLcf::new(params),
            dim: sigma.dim(),
            dirs: sigma.atoms().iter().flat_map(|a| a.dir.iter().copied()).collect(),
            weights: sigma.atoms().iter().map(|a| a.w).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        let mut s = 0.0;
        for (w, th) in self.weights.iter().zip(self.dirs.chunks_exact(self.dim)) {
            let ip: f64 = th.iter().zip(u).map(|(a, b)| a * b).sum();
            s += w * self.radial.eval(ip)?;
        }
        Ok(s)
    }
}

/// `ψ(u)` for the tempered stable law with spectral measure `sigma`.
pub fn lcf(params: StableParams, sigma: &SpectralMeasure, u: &[f64]) -> Result<f64> {
    Lcf::new(params, sigma)?.eval(u)
}

/// The Rosinski measure of exponential tempering: `σ` pushed to the sphere of radius `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RosinskiMeasure {
    pub base: SpectralMeasure,
    pub radius: f64,
}

impl RosinskiMeasure {
    /// Atoms `(radius·θ_j, w_j)`.
    pub fn atoms(&self) -> impl Iterator<Item = (Vec<f64>, f64)> + '_ {
        self.base.atoms().iter().map(|a| (a.dir.iter().map(|x| x * self.radius).collect(), a.w))
    }

    pub fn total_mass(&self) -> f64 {
        self.base.total_mass()
    }
}

pub fn rosinski_of(params: StableParams, sigma: &SpectralMeasure) -> Result<RosinskiMeasure> {
    params.validate()?;
    if params.lambda == 0.0 {
        return invalid("the stable case has no Rosinski measure");
    }
    Ok(RosinskiMeasure { base: sigma.clone(), radius: params.lambda })
}

/// Constants with `c1 (z^{-α} ∧ z^{-2}) <= g(z) <= c2 (z^{-α} ∧ z^{-2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub quasi_tri_a: f64,
}

/// `g(z) / (z^{-α} ∧ z^{-2})`.
pub fn g_ratio(alpha: f64, z: f64) -> Result<f64> {
    let env = if z < 1.0 { z.powf(-alpha) } else { z.powi(-2) };
    Ok(g_fun(alpha, z)? / env)
}

fn refine(alpha: f64, lo: f64, hi: f64, sign: f64) -> Result<(f64, f64)> {
    // golden section in log z; sign = 1 minimizes, -1 maximizes
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |l: f64| -> Result<f64> { Ok(sign * g_ratio(alpha, l.exp())?) };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x.exp(), sign * f(x)?))
}

fn compute_envelope(alpha: f64) -> Result<EnvelopeConstants> {
    let n = 1601;
    let zs: Vec<f64> = (0..n).map(|i| 10f64.powf(-8.0 + 16.0 * i as f64 / (n - 1) as f64)).collect();
    let vals = zs.iter().map(|&z| g_ratio(alpha, z)).collect::<Result<Vec<f64>>>()?;
    let (imin, imax) = vals.iter().enumerate().fold((0, 0), |(a, b), (i, v)| {
        (if *v < vals[a] { i } else { a }, if *v > vals[b] { i } else { b })
    });
    let pick = |i: usize, sign: f64| -> Result<f64> {
        let base = vals[i];
        if i == 0 || i == n - 1 {
            return Ok(base);
        }
        let (_, v) = refine(alpha, zs[i - 1], zs[i + 1], sign)?;
        Ok(if sign > 0.0 { v.min(base) } else { v.max(base) })
    };
    // the ratio tends to the two limits at the ends of (0, inf); the grid
    // stops short of them, so they are folded in to keep the bounds global
    let (l0, l1) = (g_limit_small(alpha), g_limit_large(alpha));
    let c1 = pick(imin, 1.0)?.min(l0).min(l1);
    let c2 = pick(imax, -1.0)?.max(l0).max(l1);
    Ok(EnvelopeConstants { alpha, c1, c2, quasi_tri_a: (4.0 * c2 / c1).powf(1.0 / alpha) })
}

/// Envelope constants for `g`, computed once per α and cached.
pub fn envelope_constants(alpha: f64) -> Result<EnvelopeConstants> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return invalid(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    static CACHE: OnceLock<Mutex<HashMap<u64, EnvelopeConstants>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("envelope cache poisoned").get(&alpha.to_bits()) {
        return Ok(*c);
    }
    let c = compute_envelope(alpha)?;
    cache.lock().expect("envelope cache poisoned").insert(alpha.to_bits(), c);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_interval;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            (a - b).abs() / b.abs()
        }
    }

    // Defining integral: head by adaptive quadrature, oscillatory tail as an
    // alternating series over half periods summed by repeated averaging, and
    // the non-oscillating part of the tail by a separate half-line pass.
    fn defining_integral(alpha: f64, lambda: f64, a: f64) -> f64 {
        let cfg = QuadratureConfig { abs_tol: 0.0, ..QuadratureConfig::default().with_tol(1e-13) };
        let amp = |r: f64| r.powf(-alpha - 1.0) * (-lambda * r).exp();
        let half = std::f64::consts::PI / a;
        let r0 = 8.0 * half;
        let bps: Vec<f64> = (-30..64).map(|k| 2f64.powi(k)).take_while(|b| *b < r0).collect();
        let head = crate::quad::integrate_segments(&|r: f64| -2.0 * ((0.5 * a * r).sin() / r).powi(2) * r.powf(1.0 - alpha) * (-lambda * r).exp(), 0.0, r0, &bps, &cfg).value;
        let minus = integrate_half_line(&amp, r0, 1.0, &cfg.with_box(r0), Tail::Empirical, 1).value;
        let mut partial = Vec::with_capacity(40);
        let mut s = 0.0;
        for k in 0..40 {
            let lo = r0 + k as f64 * half;
            s += integrate_interval(&|r: f64| (a * r).cos() * amp(r), lo, lo + half, &cfg).value;
            partial.push(s);
        }
        while partial.len() > 1 {
            partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        }
        head - minus + partial[0]
    }

    #[test]
    fn reference_examples() {
        let p = StableParams::new(0.5, 0.0).unwrap();
        let v = radial_lcf(p, 1.0).unwrap();
        assert!(rel(v, -(2.0 * std::f64::consts::PI).sqrt()) < 1e-13, "{v}");
        let q = radial_lcf_quadrature(p, 1.0).unwrap();
        assert!(rel(q, v) < 1e-10);
        let p = StableParams::new(0.5, 1.0).unwrap();
        let v = radial_lcf(p, 1.0).unwrap();
        assert!((v + 0.3498).abs() < 5e-5, "{v}");
        assert!(rel(v, defining_integral(0.5, 1.0, 1.0)) < 1e-9);
        assert_eq!(radial_lcf(p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_matches_defining_integral() {
        for alpha in [0.3, 0.5, 1.5, 1.9] {
            for lambda in [0.1, 1.0, 10.0] {
                let p = StableParams::new(alpha, lambda).unwrap();
                for a in [1e-3, 0.37, 1.0, 5.0, 120.0, 1e3] {
                    let got = radial_lcf(p, a).unwrap();
                    let want = defining_integral(alpha, lambda, a);
                    assert!(rel(got, want) < 1e-8, "alpha={alpha} lambda={lambda} a={a}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn unit_alpha_uses_quadrature() {
        let p = StableParams::new(1.0, 2.0).unwrap();
        for a in [0.1, 1.0, 30.0] {
            let got = radial_lcf(p, a).unwrap();
            let want = -(a * (a / 2.0).atan() - 1.0 * (1.0 + a * a / 4.0).ln());
            assert!(rel(got, want) < 1e-10, "a={a}: {got} vs {want}");
        }
        let p0 = StableParams::new(1.0, 0.0).unwrap();
        assert!(rel(radial_lcf(p0, 3.0).unwrap(), -1.5 * std::f64::consts::PI) < 1e-10);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let c = 0.7;
        let sigma = SpectralMeasure::symmetric_1d(c).unwrap();
        for alpha in [0.4, 1.3] {
            let lambda = 1.7;
            let p = StableParams::new(alpha, lambda).unwrap();
            for u in [-3.0, 0.2, 4.0] {
                let z = num_complex::Complex64::new(lambda, u).powf(alpha);
                let want = -2.0 * c * gamma_fn(-alpha) * (lambda.powf(alpha) - z.re);
                assert!(rel(lcf(p, &sigma, &[u]).unwrap(), want) < 1e-12);
            }
        }
    }

    #[test]
    fn measure_construction() {
        let (m, notes) = SpectralMeasure::build(2, vec![Atom { dir: vec![3.0, 4.0], w: 1.0 }, Atom { dir: vec![0.0, 1.0], w: 2.0 }]).unwrap();
        assert_eq!(m.atoms().len(), 4);
        assert!(notes.iter().any(|n| n.contains("normalized")));
        assert!(notes.iter().any(|n| n.contains("mirror")));
        assert!((m.total_mass() - 6.0).abs() < 1e-15);
        for a in m.atoms() {
            let nrm: f64 = a.dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((nrm - 1.0).abs() < 1e-12);
        }
        assert!(SpectralMeasure::new(2, vec![Atom { dir: vec![1.0, 0.0], w: 1.0 }]).is_err());
        assert!(SpectralMeasure::new(1, vec![Atom { dir: vec![1.0], w: -1.0 }]).is_err());
        let json = r#"{"dim":1,"atoms":[{"dir":[1.0],"w":0.5},{"dir":[-1.0],"w":0.5}]}"#;
        let m: SpectralMeasure = serde_json::from_str(json).unwrap();
        assert_eq!(m.atoms().len(), 2);
        let back: SpectralMeasure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rosinski_examples() {
        let sigma = SpectralMeasure::symmetric_1d(0.5).unwrap();
        let r = rosinski_of(StableParams::new(0.8, 2.0).unwrap(), &sigma).unwrap();
        let atoms: Vec<_> = r.atoms().collect();
        assert_eq!(atoms, vec![(vec![2.0], 0.5), (vec![-2.0], 0.5)]);
        assert_eq!(r.total_mass(), 1.0);
        assert!(rosinski_of(StableParams::new(0.8, 0.0).unwrap(), &sigma).is_err());
    }

    #[test]
    fn envelope_brackets_limits() {
        for alpha in [0.3, 0.5, 1.0, 1.5, 1.9] {
            let c = envelope_constants(alpha).unwrap();
            let (l0, l1) = (g_limit_small(alpha), g_limit_large(alpha));
            assert!(c.c1 <= l0.min(l1) && c.c2 >= l0.max(l1), "{c:?}");
            assert!(c.c1 > 0.0 && c.quasi_tri_a >= 1.0);
            assert!((c.quasi_tri_a - (4.0 * c.c2 / c.c1).powf(1.0 / alpha)).abs() < 1e-12 * c.quasi_tri_a);
            // spot check against a fine grid
            for i in 0..400 {
                let z = 10f64.powf(-8.0 + 16.0 * (i as f64 + 0.37) / 400.0);
                let r = g_ratio(alpha, z).unwrap();
                assert!(r >= c.c1 * (1.0 - 1e-9) && r <= c.c2 * (1.0 + 1e-9));
            }
        }
    }

    proptest! {
        #[test]
        fn lcf_is_even_and_nonpositive(alpha in 0.05f64..1.95, lambda in 0.0f64..5.0, u in prop::collection::vec(-50.0f64..50.0, 2)) {
            prop_assume!((alpha - 1.0).abs() > 1e-3);
            let sigma = SpectralMeasure::new(2, vec![
                Atom { dir: vec![1.0, 0.0], w: 0.3 },
                Atom { dir: vec![0.6, 0.8], w: 1.1 },
            ]).unwrap();
            let p = StableParams::new(alpha, lambda).unwrap();
            let a = lcf(p, &sigma, &u).unwrap();
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            prop_assert!(a <= 0.0);
            prop_assert_eq!(a, lcf(p, &sigma, &neg).unwrap());
            prop_assert!(a.exp() <= 1.0);
            // tempering only shrinks |ψ|, and the stable envelope bounds it
            let stable = lcf(p.with_lambda(0.0), &sigma, &u).unwrap();
            prop_assert!(a.abs() <= stable.abs() * (1.0 + 1e-12));
            let rho = RadialLcf::new(p).c_alpha() * sigma.total_mass();
            let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(stable.abs() <= rho * nu.powf(alpha) * (1.0 + 1e-12));
        }

        #[test]
        fn lcf_scaling_identity(alpha in 0.05f64..1.95, lambda in 0.01f64..20.0, rho in 0.01f64..100.0, u in -30.0f64..30.0) {
            prop_assume!((alpha - 1.0).abs() > 1e-3);
            let sigma = SpectralMeasure::symmetric_1d(0.8).unwrap();
            let p = StableParams::new(alpha, lambda).unwrap();
            let left = lcf(p, &sigma, &[rho * u]).unwrap();
            let right = rho.powf(alpha) * lcf(p.with_lambda(lambda / rho), &sigma, &[u]).unwrap();
            prop_assert!((left - right).abs() <= 1e-12 * left.abs().max(1e-300), "{} vs {}", left, right);
        }
    }
}
