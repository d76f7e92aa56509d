//! Generalized polar coordinates `x = τ(x)^E l(x)` for an exponent `E` with
//! spectrum in the open right half plane.
//!
//! The norm is `‖x‖_E = ∫_0^1 ‖t^E x‖ dt/t = ∫_0^∞ ‖e^{-vE} x‖ dv`. With
//! `F(s) = ∫_s^∞ ‖e^{-wE} x‖ dw` one has `‖c^{-E} x‖_E = F(log c)`, so the
//! radial part solves `F(s) = 1` and `F'(s) = -‖e^{-sE} x‖` is available.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::operators::{mat_exp, real_power, OperatorSpec, Vector};
use crate::quad::{integrate_half_line, QuadratureConfig, Tail};

fn check_exponent(e: &OperatorSpec) -> Result<()> {
    if !e.in_q() {
        return Err(Error::Gate(format!(
            "exponent must have eigenvalues with positive real parts (min real part {})",
            e.re_eig_min
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn orbit_norm(e: &OperatorSpec, x: &Vector, w: f64) -> f64 {
    let m = mat_exp(&(&e.entries * -w)).expect("square by construction");
    (m * x).norm()
}

fn tail_integral(e: &OperatorSpec, x: &Vector, s: f64) -> Result<f64> {
    let cfg = QuadratureConfig::default().with_tol(1e-12).with_box(1.0 / e.re_eig_min);
    let r = integrate_half_line(&|w: f64| orbit_norm(e, x, s + w), 0.0, 1.0, &cfg, Tail::Empirical, 1);
    if !r.converged || !r.value.is_finite() {
        return Err(Error::NonConvergence("E-norm quadrature".into()));
    }
    Ok(r.value)
}

/// The E-adapted norm `‖x‖_E`.
pub fn e_norm(e: &OperatorSpec, x: &[f64]) -> Result<f64> {
    check_exponent(e)?;
    check_dim(e.dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("vector has non-finite entries");
    }
    if let Some(a) = e.scalar_multiple() {
        return Ok(norm(x) / a);
    }
    if x.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    tail_integral(e, &Vector::from_column_slice(x), 0.0)
}

/// Radial part and direction of a nonzero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenPolar {
    pub tau: f64,
    pub direction: Vec<f64>,
}

/// Decomposes `x = tau^E direction` with `‖direction‖_E = 1`.
pub fn polar_decompose(e: &OperatorSpec, x: &[f64]) -> Result<GenPolar> {
    check_exponent(e)?;
    check_dim(e.dim(), x.len())?;
    let nx = norm(x);
    if nx == 0.0 {
        return invalid("the radial part is undefined at the origin");
    }
    if !nx.is_finite() {
        return invalid("vector has non-finite entries");
    }
    if let Some(a) = e.scalar_multiple() {
        let tau = (nx / a).powf(1.0 / a);
        return Ok(GenPolar { tau, direction: x.iter().map(|v| v * a / nx).collect() });
    }
    let xv = Vector::from_column_slice(x);
    let s = solve_log_radius(e, &xv, nx)?;
    let tau = s.exp();
    let dir = mat_exp(&(&e.entries * -s))? * &xv;
    Ok(GenPolar { tau, direction: dir.iter().copied().collect() })
}

// Safeguarded Newton iteration on F(s) = 1 inside an expanding bracket.
fn solve_log_radius(e: &OperatorSpec, x: &Vector, nx: f64) -> Result<f64> {
    let f = |s: f64| tail_integral(e, x, s).map(|v| v - 1.0);
    let ln = nx.ln();
    let guesses = [ln / e.re_eig_min, ln / e.re_eig_max];
    let (mut lo, mut hi) = (guesses[0].min(guesses[1]) - 1.0, guesses[0].max(guesses[1]) + 1.0);
    let mut step = 1.0;
    let mut flo = f(lo)?;
    while flo < 0.0 {
        step *= 2.0;
        lo -= step;
        flo = f(lo)?;
        if step > 1e4 {
            return Err(Error::NonConvergence("could not bracket the radial part".into()));
        }
    }
    step = 1.0;
    let mut fhi = f(hi)?;
    while fhi > 0.0 {
        step *= 2.0;
        hi += step;
        fhi = f(hi)?;
        if step > 1e4 {
            return Err(Error::NonConvergence("could not bracket the radial part".into()));
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fs = f(s)?;
        if fs == 0.0 {
            return Ok(s);
        }
        if fs > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let deriv = -orbit_norm(e, x, s);
        let newton = s - fs / deriv;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - s).abs() < 1e-13 * (1.0 + s.abs()) || hi - lo < 1e-13 {
            return Ok(next);
        }
        s = next;
    }
    Err(Error::NonConvergence("radial part iteration".into()))
}

/// `τ_E(x)`, with `τ_E(0) = 0`.
pub fn tau_or_zero(e: &OperatorSpec, x: &[f64]) -> Result<f64> {
    if x.iter().all(|v| *v == 0.0) {
        check_dim(e.dim(), x.len())?;
        return Ok(0.0);
    }
    Ok(polar_decompose(e, x)?.tau)
}

/// Shape of a homogeneous function as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiKind {
    Radial,
    Abs,
}

type Callback = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum PhiImpl {
    Radial,
    Abs,
    User(Callback),
}

/// A function with `φ(c^E x) = c φ(x)`.
///
/// User callbacks must be reentrant and are checked for sign and finiteness
/// on every call; homogeneity is only probed, never assumed.
#[derive(Clone)]
pub struct HomogeneousFn {
    pub exponent: OperatorSpec,
    pub beta_hint: Option<f64>,
    kind: PhiImpl,
}

impl fmt::Debug for HomogeneousFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PhiImpl::Radial => "radial",
            PhiImpl::Abs => "abs",
            PhiImpl::User(_) => "user",
        };
        f.debug_struct("HomogeneousFn")
            .field("exponent", &self.exponent.rows())
            .field("kind", &kind)
            .field("beta_hint", &self.beta_hint)
            .finish()
    }
}

impl HomogeneousFn {
    pub fn new(kind: PhiKind, exponent: OperatorSpec, beta_hint: Option<f64>) -> Result<Self> {
        check_exponent(&exponent)?;
        let kind = match kind {
            PhiKind::Radial => PhiImpl::Radial,
            PhiKind::Abs => {
                if exponent.dim() != 1 {
                    return invalid("phi = abs is only available on the real line");
                }
                PhiImpl::Abs
            }
        };
        Ok(Self { exponent, beta_hint, kind })
    }

    /// Wraps a user supplied function.
    pub fn user(exponent: OperatorSpec, beta_hint: Option<f64>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_exponent(&exponent)?;
        Ok(Self { exponent, beta_hint, kind: PhiImpl::User(Arc::new(f)) })
    }

    pub fn radial(exponent: OperatorSpec) -> Result<Self> {
        Self::new(PhiKind::Radial, exponent, None)
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    /// The configured kind, or `None` for a user callback.
    pub fn kind(&self) -> Option<PhiKind> {
        match self.kind {
            PhiImpl::Radial => Some(PhiKind::Radial),
            PhiImpl::Abs => Some(PhiKind::Abs),
            PhiImpl::User(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        match &self.kind {
            PhiImpl::Radial => tau_or_zero(&self.exponent, x),
            PhiImpl::Abs => Ok(x[0].abs().powf(1.0 / self.exponent.entries[(0, 0)])),
            PhiImpl::User(f) => {
                let v = f(x);
                if !(v >= 0.0) || !v.is_finite() {
                    return invalid(format!("homogeneous function returned {v} at {x:?}"));
                }
                Ok(v)
            }
        }
    }
}

/// `φ(x)`.
pub fn phi_eval(phi: &HomogeneousFn, x: &[f64]) -> Result<f64> {
    phi.eval(x)
}

/// Outcome of [`admissibility_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Largest observed `|φ(x+y) − φ(y)| / τ(x)^β`.
    pub max_ratio: f64,
    /// `(τ upper end of decade, largest ratio seen in it)` for decades `10^{-k}`.
    pub per_decade: Vec<(f64, f64)>,
    /// Fitted exponent `γ` in `ratio ~ τ^{-γ}` across decades.
    pub growth_exponent: f64,
    /// Set when the ratio grows as `τ(x) → 0`, which falsifies admissibility.
    pub diverging: bool,
    pub samples: usize,
}

/// Samples `A <= ‖y‖ <= B` and `τ(x) <= 1` and reports the empirical constant in
/// `|φ(x+y) − φ(y)| <= C τ(x)^β`.
pub fn admissibility_probe(
    phi: &HomogeneousFn,
    beta: f64,
    a: f64,
    b: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if !(beta > 0.0) || !(a > 0.0 && a < b) {
        return invalid("probe needs beta > 0 and 0 < A < B");
    }
    let e = &phi.exponent;
    let n = e.dim();
    let decades = 8usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per = vec![0.0f64; decades];
    for i in 0..n_samples.max(decades) {
        let k = i % decades;
        let tau = 10f64.powf(-(k as f64) - rng.random::<f64>());
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if norm(&g) == 0.0 {
            continue;
        }
        let l = polar_decompose(e, &g)?.direction;
        let x = real_power(e, tau)? * Vector::from_column_slice(&l);
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = a + (b - a) * rng.random::<f64>();
        let nd = norm(&dir);
        let y: Vec<f64> = dir.iter().map(|v| v * r / nd).collect();
        let xy: Vec<f64> = y.iter().zip(x.iter()).map(|(p, q)| p + q).collect();
        let ratio = (phi.eval(&xy)? - phi.eval(&y)?).abs() / tau.powf(beta);
        per[k] = per[k].max(ratio);
    }
    let pts: Vec<(f64, f64)> = per
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(k, r)| (-(k as f64) - 0.5, r.log10()))
        .collect();
    let growth = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
        -num / den
    } else {
        0.0
    };
    Ok(ProbeReport {
        max_ratio: per.iter().copied().fold(0.0, f64::max),
        per_decade: per.iter().enumerate().map(|(k, r)| (10f64.powi(-(k as i32)), *r)).collect(),
        growth_exponent: growth,
        diverging: growth > 0.1,
        samples: n_samples.max(decades),
    })
}
