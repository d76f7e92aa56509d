//! Integrability functionals for tempered stable random measures on `R^n`
//! with Lebesgue control measure.
//!
//! `h(D) = Σ_j w_j (‖λDθ_j‖^α ∧ ‖λDθ_j‖²)`, `H(f, δ) = ∫ h(f(s)/δ) ds`,
//! `J₂(f) = Σ_j w_j λ^α ∫ g(λ / ‖f(s)θ_j‖) ds` and `‖f‖ = inf{δ : H(f, δ) <= 1}`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::operators::{operator_norm, Matrix};
use crate::quad::{
    integrate_line, integrate_mc, integrate_plane, integrate_rect, integrate_segments, Integral, QuadratureConfig, Tail,
};
use crate::tstable::{g_fun, upper_gamma_neg, SpectralMeasure, StableParams};

pub type KernelFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// A matrix valued function on `R^n` with hints for the cubature.
#[derive(Clone)]
pub struct IntegrandFn {
    pub n: usize,
    pub d: usize,
    eval: KernelFn,
    scale: f64,
    /// Per-coordinate points where the function is not smooth.
    pub breakpoints: Vec<Vec<f64>>,
    /// Box outside which the function vanishes.
    pub support: Option<Vec<(f64, f64)>>,
    /// `p` with `‖f(s)‖ ~ ‖s‖^{-p}` at infinity.
    pub decay: Option<f64>,
    /// Points where the function is singular (used by Monte Carlo integration).
    pub singular_points: Vec<Vec<f64>>,
}

impl std::fmt::Debug for IntegrandFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntegrandFn")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("scale", &self.scale)
            .field("support", &self.support)
            .field("decay", &self.decay)
            .finish()
    }
}

impl IntegrandFn {
    pub fn new(n: usize, d: usize, f: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        Self {
            n,
            d,
            eval: Arc::new(f),
            scale: 1.0,
            breakpoints: vec![Vec::new(); n],
            support: None,
            decay: None,
            singular_points: Vec::new(),
        }
    }

    pub fn zero(n: usize, d: usize) -> Self {
        Self::new(n, d, move |_| Matrix::zeros(d, d)).with_support(vec![(0.0, 1.0); n])
    }

    /// `1_B(s) I_d` for the box `B`.
    pub fn indicator(bounds: Vec<(f64, f64)>, d: usize) -> Self {
        let b = bounds.clone();
        let f = move |s: &[f64]| {
            if s.iter().zip(&b).all(|(x, (lo, hi))| *x >= *lo && *x <= *hi) {
                Matrix::identity(d, d)
            } else {
                Matrix::zeros(d, d)
            }
        };
        let bps = bounds.iter().map(|(lo, hi)| vec![*lo, *hi]).collect();
        Self::new(bounds.len(), d, f).with_support(bounds).with_breakpoints(bps)
    }

    pub fn with_breakpoints(mut self, bps: Vec<Vec<f64>>) -> Self {
        self.breakpoints = bps;
        self
    }

    pub fn with_support(mut self, support: Vec<(f64, f64)>) -> Self {
        self.support = Some(support);
        self
    }

    pub fn with_decay(mut self, p: f64) -> Self {
        self.decay = Some(p);
        self
    }

    pub fn with_singular_points(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.singular_points = pts;
        self
    }

    /// The function `c·f`, sharing all cubature hints.
    pub fn scaled(&self, c: f64) -> Self {
        Self { scale: self.scale * c, ..self.clone() }
    }

    pub fn eval(&self, s: &[f64]) -> Matrix {
        let m = (self.eval)(s);
        if self.scale == 1.0 {
            m
        } else {
            m * self.scale
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return invalid("integrand dimensions must be positive");
        }
        check_dim(self.n, self.breakpoints.len())?;
        if let Some(b) = &self.support {
            check_dim(self.n, b.len())?;
        }
        let probe = self.eval(&vec![0.123_456_7; self.n]);
        check_dim(self.d, probe.nrows())?;
        check_dim(self.d, probe.ncols())?;
        Ok(())
    }
}

/// Integrates `phi(f(s))` over `R^n`; `growth` is the power of `‖f‖` that
/// `phi` behaves like for small arguments, used to turn the decay hint into
/// a tail rate.
pub(crate) fn integrate_functional(
    f: &IntegrandFn,
    phi: &(dyn Fn(&Matrix) -> f64 + Sync),
    growth: f64,
    quad: &QuadratureConfig,
    seed: u64,
) -> Result<Integral> {
    f.validate()?;
    let tail = f.decay.map(|p| Tail::PowerLaw { kappa: growth * p }).unwrap_or(Tail::Empirical);
    let domain = Domain {
        n: f.n,
        breakpoints: &f.breakpoints,
        support: f.support.as_deref(),
        centers: &f.singular_points,
        tail,
    };
    integrate_scalar(&|s: &[f64]| phi(&f.eval(s)), &domain, quad, seed)
}

/// Where and how a scalar function on `R^n` is integrated.
pub(crate) struct Domain<'a> {
    pub n: usize,
    pub breakpoints: &'a [Vec<f64>],
    pub support: Option<&'a [(f64, f64)]>,
    pub centers: &'a [Vec<f64>],
    pub tail: Tail,
}

/// Deterministic cubature for `n <= 2`, Monte Carlo otherwise.
pub(crate) fn integrate_scalar(g: &dyn Fn(&[f64]) -> f64, dom: &Domain<'_>, quad: &QuadratureConfig, seed: u64) -> Result<Integral> {
    quad.validate()?;
    let bps = dom.breakpoints;
    let res = match (dom.support, dom.n) {
        (Some(b), 1) => integrate_segments(&|x| g(&[x]), b[0].0, b[0].1, &bps[0], quad),
        (Some(b), 2) => integrate_rect(&|x, y| g(&[x, y]), b[0], b[1], &bps[0], &bps[1], quad),
        (Some(b), _) => box_mc(g, b, quad.mc_fallback_n, seed),
        (None, 1) => integrate_line(&|x| g(&[x]), &bps[0], quad, dom.tail, 1),
        (None, 2) => integrate_plane(&|x, y| g(&[x, y]), &bps[0], &bps[1], quad, dom.tail),
        (None, n) => integrate_mc(&g, n, dom.centers, quad.box_radius, quad.mc_fallback_n, seed),
    };
    Ok(res)
}

fn box_mc(g: &dyn Fn(&[f64]) -> f64, b: &[(f64, f64)], samples: usize, seed: u64) -> Integral {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol: f64 = b.iter().map(|(lo, hi)| hi - lo).product();
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut x = vec![0.0; b.len()];
    for _ in 0..samples {
        for (xi, (lo, hi)) in x.iter_mut().zip(b) {
            *xi = lo + (hi - lo) * rng.random::<f64>();
        }
        let v = g(&x) * vol;
        s1 += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s1 / n;
    let se = ((s2 / n - mean * mean).max(0.0) / n).sqrt();
    Integral { value: mean, error: se, evals: samples, converged: mean.is_finite(), diverged: false }
}

fn require_tempered(params: &StableParams) -> Result<()> {
    params.validate()?;
    if params.lambda == 0.0 {
        return invalid("this functional needs lambda > 0; use the stable integrand for lambda = 0");
    }
    Ok(())
}

fn mat_vec_norm(d: &Matrix, th: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..d.nrows() {
        let mut v = 0.0;
        for (j, t) in th.iter().enumerate() {
            v += d[(i, j)] * t;
        }
        s += v * v;
    }
    s.sqrt()
}

/// `h(D) = Σ_j w_j (‖λDθ_j‖^α ∧ ‖λDθ_j‖²)`.
pub fn h_fun(params: &StableParams, sigma: &SpectralMeasure, d: &Matrix) -> Result<f64> {
    require_tempered(params)?;
    check_dim(sigma.dim(), d.ncols())?;
    Ok(h_unchecked(params, sigma, d))
}

fn h_unchecked(params: &StableParams, sigma: &SpectralMeasure, d: &Matrix) -> f64 {
    sigma
        .atoms()
        .iter()
        .map(|a| {
            let m = params.lambda * mat_vec_norm(d, &a.dir);
            a.w * m.powf(params.alpha).min(m * m)
        })
        .sum()
}

/// `Σ_j w_j ‖Dθ_j‖^α`.
pub fn stable_integrand(sigma: &SpectralMeasure, alpha: f64, d: &Matrix) -> Result<f64> {
    check_dim(sigma.dim(), d.ncols())?;
    Ok(sigma.atoms().iter().map(|a| a.w * mat_vec_norm(d, &a.dir).powf(alpha)).sum())
}

/// `H(f, δ)`, evaluated as `H(f/δ, 1)` on the same nodes.
pub fn big_h(f: &IntegrandFn, delta: f64, params: &StableParams, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<Integral> {
    require_tempered(params)?;
    if !(delta > 0.0) {
        return invalid("delta must be positive");
    }
    check_dim(sigma.dim(), f.d)?;
    let g = f.scaled(1.0 / delta);
    integrate_functional(&g, &|m| h_unchecked(params, sigma, m), 2.0, quad, 0x4855)
}

/// `∫ Σ_j w_j ‖f(s)θ_j‖^α ds`, the stable counterpart of `H(f, 1)`.
pub fn stable_h(f: &IntegrandFn, alpha: f64, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<Integral> {
    check_dim(sigma.dim(), f.d)?;
    integrate_functional(
        f,
        &|m| sigma.atoms().iter().map(|a| a.w * mat_vec_norm(m, &a.dir).powf(alpha)).sum(),
        alpha,
        quad,
        0x5354,
    )
}

/// `J₂(f) = ∫∫ (1 ∧ ‖f(s)x‖²) φ(dx) ds`.
pub fn j2(f: &IntegrandFn, params: &StableParams, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<Integral> {
    require_tempered(params)?;
    check_dim(sigma.dim(), f.d)?;
    let (al, la) = (params.alpha, params.lambda);
    let la_al = la.powf(al);
    integrate_functional(
        f,
        &|m| {
            sigma
                .atoms()
                .iter()
                .map(|a| {
                    let nrm = mat_vec_norm(m, &a.dir);
                    if nrm == 0.0 {
                        0.0
                    } else {
                        a.w * la_al * g_fun(al, la / nrm).unwrap_or(f64::NAN)
                    }
                })
                .sum()
        },
        2.0,
        quad,
        0x4a32,
    )
}

/// Result of [`quasi_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNorm {
    pub quasi_norm: f64,
    #[serde(rename = "H_at_1")]
    pub h_at_1: f64,
    pub converged: bool,
}

/// `‖f‖ = inf{δ > 0 : H(f, δ) <= 1}` by bisection in `log δ`.
pub fn quasi_norm(f: &IntegrandFn, params: &StableParams, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<QuasiNorm> {
    let h1 = big_h(f, 1.0, params, sigma, quad)?;
    if h1.diverged || !h1.value.is_finite() {
        return Err(Error::Diverged("H(f, 1) is infinite; f is not integrable".into()));
    }
    let mut converged = h1.converged;
    let v1 = h1.value;
    if v1 == 0.0 {
        return Ok(QuasiNorm { quasi_norm: 0.0, h_at_1: 0.0, converged });
    }
    if v1 == 1.0 {
        return Ok(QuasiNorm { quasi_norm: 1.0, h_at_1: v1, converged });
    }
    // (δ^{-α} ∧ δ^{-2}) H(f,1) <= H(f,δ) <= (δ^{-α} ∨ δ^{-2}) H(f,1) brackets the root
    let al = params.alpha;
    let (a, b) = (v1.powf(1.0 / al), v1.sqrt());
    let (mut lo, mut hi) = (a.min(b).ln(), a.max(b).ln());
    let mut eval = |ld: f64| -> Result<f64> {
        let r = big_h(f, ld.exp(), params, sigma, quad)?;
        converged &= r.converged;
        Ok(r.value)
    };
    // widen slightly against quadrature noise at the bracket ends
    lo -= 1e-6;
    hi += 1e-6;
    while eval(lo)? <= 1.0 {
        lo -= 0.5;
    }
    while eval(hi)? > 1.0 {
        hi += 0.5;
    }
    for _ in 0..200 {
        if hi - lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(QuasiNorm { quasi_norm: (0.5 * (lo + hi)).exp(), h_at_1: v1, converged })
}

/// Outcome of a membership test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    InSpace,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    /// `H(f, 1)` (or its stable counterpart) at box radius `R`, `2R`, `4R`.
    pub values: Vec<f64>,
    pub lambda: f64,
    /// For `λ = 0`: whether the tempered test (`λ = 1`) also accepts `f`.
    pub tempered_agrees: Option<bool>,
}

fn verdict_from(runs: &[Integral], rel_tol: f64) -> Verdict {
    if runs.iter().any(|r| r.diverged || r.value.is_infinite()) {
        return Verdict::Diverged;
    }
    if runs.iter().any(|r| !r.converged || r.value.is_nan()) {
        return Verdict::Inconclusive;
    }
    let stable = runs.windows(2).all(|w| {
        let tol = rel_tol.max(1e-9) * w[0].value.abs().max(w[1].value.abs()) + w[0].error + w[1].error + 1e-300;
        (w[0].value - w[1].value).abs() <= 10.0 * tol
    });
    if stable {
        Verdict::InSpace
    } else {
        Verdict::Inconclusive
    }
}

/// Decides whether `f` is integrable, requiring the truncated integral to be
/// stable when the box radius doubles twice.
pub fn membership(f: &IntegrandFn, params: &StableParams, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<MembershipReport> {
    params.validate()?;
    let radii = [1.0, 2.0, 4.0].map(|k| quad.box_radius * k);
    let run = |p: &StableParams| -> Result<Vec<Integral>> {
        radii
            .iter()
            .map(|&r| {
                let q = quad.with_box(r);
                if p.lambda == 0.0 {
                    stable_h(f, p.alpha, sigma, &q)
                } else {
                    big_h(f, 1.0, p, sigma, &q)
                }
            })
            .collect()
    };
    let runs = run(params)?;
    let verdict = verdict_from(&runs, quad.rel_tol);
    let tempered_agrees = if params.lambda == 0.0 && verdict == Verdict::InSpace {
        let t = run(&params.with_lambda(1.0))?;
        Some(verdict_from(&t, quad.rel_tol) == Verdict::InSpace)
    } else {
        None
    };
    Ok(MembershipReport { verdict, values: runs.iter().map(|r| r.value).collect(), lambda: params.lambda, tempered_agrees })
}

/// `φ^f(A)` computed directly and through the Rosinski-type radial relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardMass {
    pub value: f64,
    pub alternative: f64,
    pub residual: f64,
}

// parameter range {r >= 0 : r v ∈ A}
fn ray_box(v: &[f64], lo: &[f64], hi: &[f64]) -> Option<(f64, f64)> {
    let (mut a, mut b) = (0.0f64, f64::INFINITY);
    for i in 0..v.len() {
        if v[i] == 0.0 {
            if lo[i] > 0.0 || hi[i] < 0.0 {
                return None;
            }
            continue;
        }
        let (p, q) = (lo[i] / v[i], hi[i] / v[i]);
        a = a.max(p.min(q));
        b = b.min(p.max(q));
    }
    if a < b {
        Some((a, b))
    } else {
        None
    }
}

/// `φ^f(A) = ∫∫ 1_A(f(s)x) φ(dx) ds` for a box `A` bounded away from the origin.
///
/// The alternative evaluation uses `φ(B) = ∫∫ 1_B(ry) r^{-α-1} e^{-r} dr R(dy)`
/// with `R = λ^α Σ_j w_j δ_{θ_j/λ}` pushed forward by `f`, and incomplete gamma
/// functions for the radial part.
pub fn pushforward_levy_mass(
    f: &IntegrandFn,
    params: &StableParams,
    sigma: &SpectralMeasure,
    lo: &[f64],
    hi: &[f64],
    quad: &QuadratureConfig,
) -> Result<PushforwardMass> {
    params.validate()?;
    check_dim(sigma.dim(), f.d)?;
    check_dim(f.d, lo.len())?;
    check_dim(f.d, hi.len())?;
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return invalid("box bounds are not ordered");
    }
    if !lo.iter().zip(hi).any(|(a, b)| *a > 0.0 || *b < 0.0) {
        return invalid("the box must be bounded away from the origin");
    }
    let (al, la) = (params.alpha, params.lambda);
    let radial_quad = QuadratureConfig { abs_tol: 0.0, ..quad.with_tol(quad.rel_tol.min(1e-10)) };
    let direct = |m: &Matrix| -> f64 {
        sigma
            .atoms()
            .iter()
            .map(|a| {
                let v: Vec<f64> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * a.dir[j]).sum()).collect();
                match ray_box(&v, lo, hi) {
                    None => 0.0,
                    Some((r1, r2)) => {
                        let dens = |r: f64| r.powf(-al - 1.0) * (-la * r).exp();
                        let q = if r2.is_finite() {
                            crate::quad::integrate_interval(&dens, r1, r2, &radial_quad)
                        } else {
                            crate::quad::integrate_half_line(&dens, r1, 1.0, &radial_quad.with_box(r1), Tail::Empirical, 1)
                        };
                        a.w * q.value
                    }
                }
            })
            .sum()
    };
    let rosinski = |m: &Matrix| -> f64 {
        sigma
            .atoms()
            .iter()
            .map(|a| {
                let v: Vec<f64> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * a.dir[j]).sum()).collect();
                if la == 0.0 {
                    return match ray_box(&v, lo, hi) {
                        None => 0.0,
                        Some((r1, r2)) => a.w * (r1.powf(-al) - if r2.is_finite() { r2.powf(-al) } else { 0.0 }) / al,
                    };
                }
                let y: Vec<f64> = v.iter().map(|x| x / la).collect();
                match ray_box(&y, lo, hi) {
                    None => 0.0,
                    Some((r1, r2)) => {
                        let up = |r: f64| if r.is_finite() { upper_gamma_neg(al, r).unwrap_or(f64::NAN) } else { 0.0 };
                        a.w * la.powf(al) * (up(r1) - up(r2))
                    }
                }
            })
            .sum()
    };
    let i1 = integrate_functional(f, &direct, al, quad, 0x5046)?;
    let i2 = integrate_functional(f, &rosinski, al, quad, 0x5046)?;
    if !i1.value.is_finite() || !i2.value.is_finite() {
        return Err(Error::NonConvergence("pushforward mass cubature".into()));
    }
    Ok(PushforwardMass { value: i1.value, alternative: i2.value, residual: (i1.value - i2.value).abs() })
}

/// Piecewise constant matrix function on axis-aligned boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFunction {
    pub n: usize,
    pub d: usize,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Row-major `d×d` value on the box.
    pub value: Vec<Vec<f64>>,
}

impl SimpleFunction {
    /// A random function with up to four pieces on disjoint dyadic boxes of the unit cube scaled by `extent`.
    pub fn random_dyadic(n: usize, d: usize, extent: f64, rng: &mut impl Rng) -> Self {
        let level = 2u32;
        let cells = 1usize << level;
        let total = cells.pow(n as u32);
        let k = rng.random_range(1..=4usize.min(total));
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < k {
            let c = rng.random_range(0..total);
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        let width = extent / cells as f64;
        let pieces = chosen
            .into_iter()
            .map(|c| {
                let mut idx = c;
                let mut lo = Vec::with_capacity(n);
                for _ in 0..n {
                    lo.push((idx % cells) as f64 * width);
                    idx /= cells;
                }
                let hi = lo.iter().map(|x| x + width).collect();
                let mag = 10f64.powf(rng.random_range(-1.5..1.5));
                let value = (0..d).map(|_| (0..d).map(|_| mag * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
                Piece { lo, hi, value }
            })
            .collect();
        Self { n, d, pieces }
    }

    fn matrices(&self) -> Vec<Matrix> {
        self.pieces
            .iter()
            .map(|p| Matrix::from_fn(self.d, self.d, |i, j| p.value[i][j]))
            .collect()
    }

    pub fn to_integrand(&self) -> IntegrandFn {
        let mats = self.matrices();
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = self.pieces.iter().map(|p| (p.lo.clone(), p.hi.clone())).collect();
        let d = self.d;
        let f = move |s: &[f64]| {
            for (m, (lo, hi)) in mats.iter().zip(&boxes) {
                if s.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *x >= *a && *x < *b) {
                    return m.clone();
                }
            }
            Matrix::zeros(d, d)
        };
        let mut bps = vec![Vec::new(); self.n];
        let mut support = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n];
        for p in &self.pieces {
            for i in 0..self.n {
                bps[i].push(p.lo[i]);
                bps[i].push(p.hi[i]);
                support[i].0 = support[i].0.min(p.lo[i]);
                support[i].1 = support[i].1.max(p.hi[i]);
            }
        }
        IntegrandFn::new(self.n, self.d, f).with_breakpoints(bps).with_support(support)
    }

    /// Exact `H(f, δ)`.
    pub fn big_h_exact(&self, delta: f64, params: &StableParams, sigma: &SpectralMeasure) -> Result<f64> {
        require_tempered(params)?;
        Ok(self
            .matrices()
            .iter()
            .zip(&self.pieces)
            .map(|(m, p)| {
                let vol: f64 = p.lo.iter().zip(&p.hi).map(|(a, b)| b - a).product();
                vol * h_unchecked(params, sigma, &(m / delta))
            })
            .sum())
    }
}

/// Empirical constant `K` in `‖D‖^α ∧ ‖D‖² <= K h(D)` over random matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorEstimate {
    pub k_est: f64,
    pub samples: usize,
}

/// Maximizes `(‖D‖^α ∧ ‖D‖²) / h(D)` over `samples` random `D` with log-uniform scale.
pub fn estimate_matrix_floor(params: &StableParams, sigma: &SpectralMeasure, samples: usize, seed: u64) -> Result<FloorEstimate> {
    require_tempered(params)?;
    let d = sigma.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k: f64 = 0.0;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let m = Matrix::from_fn(d, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let nrm = operator_norm(&m);
        let h = h_unchecked(params, sigma, &m);
        if h > 0.0 {
            k = k.max(nrm.powf(params.alpha).min(nrm * nrm) / h);
        }
    }
    Ok(FloorEstimate { k_est: k, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tstable::{envelope_constants, Atom};
    use proptest::prelude::*;

    fn half() -> SpectralMeasure {
        SpectralMeasure::symmetric_1d(0.5).unwrap()
    }

    fn p(alpha: f64, lambda: f64) -> StableParams {
        StableParams::new(alpha, lambda).unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn h_examples() {
        let s = half();
        assert_eq!(h_fun(&p(0.7, 1.0), &s, &Matrix::zeros(1, 1)).unwrap(), 0.0);
        assert!((h_fun(&p(0.7, 1.0), &s, &Matrix::identity(1, 1)).unwrap() - 1.0).abs() < 1e-15);
        assert!((h_fun(&p(0.5, 1.0), &s, &Matrix::from_element(1, 1, 4.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!(h_fun(&p(0.5, 0.0), &s, &Matrix::identity(1, 1)).is_err());
        let s2 = SpectralMeasure::coordinate(2, 0.25).unwrap();
        let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let want = 0.5 * (2f64.powf(1.2) + 3f64.powf(1.2));
        assert!((stable_integrand(&s2, 1.2, &d).unwrap() - want).abs() < 1e-14);
        assert!((stable_integrand(&s2, 1.2, &Matrix::identity(2, 2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indicator_functionals() {
        let s = half();
        for alpha in [0.5, 1.5] {
            let pr = p(alpha, 1.0);
            let f = IntegrandFn::indicator(vec![(0.0, 1.0)], 1);
            for delta in [0.3, 1.0, 2.5] {
                let h = big_h(&f, delta, &pr, &s, &quad()).unwrap().value;
                let want = delta.powf(-alpha).min(delta.powi(-2));
                assert!((h - want).abs() < 1e-12 * want);
            }
            let q = quasi_norm(&f, &pr, &s, &quad()).unwrap();
            assert!((q.quasi_norm - 1.0).abs() < 1e-8);
            let q3 = quasi_norm(&f.scaled(3.0), &pr, &s, &quad()).unwrap();
            assert!((q3.quasi_norm - 3.0).abs() < 1e-6 * 3.0);
        }
        let j = j2(&IntegrandFn::indicator(vec![(0.0, 1.0)], 1), &p(0.5, 1.0), &s, &quad()).unwrap().value;
        assert!((j - 0.55709).abs() < 5e-6);
        assert!((j - g_fun(0.5, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn indicator_on_longer_interval() {
        // H(f, δ) = 2 (δ^{-α} ∧ δ^{-2}); the root of 2δ^{-2} = 1 lies on δ >= 1
        let f = IntegrandFn::indicator(vec![(0.0, 2.0)], 1);
        let q = quasi_norm(&f, &p(0.5, 1.0), &half(), &quad()).unwrap();
        assert!((q.quasi_norm - 2f64.sqrt()).abs() < 1e-7, "{q:?}");
    }

    #[test]
    fn zero_function() {
        let f = IntegrandFn::zero(1, 1);
        assert_eq!(big_h(&f, 0.5, &p(0.5, 1.0), &half(), &quad()).unwrap().value, 0.0);
        assert_eq!(j2(&f, &p(0.5, 1.0), &half(), &quad()).unwrap().value, 0.0);
        assert_eq!(quasi_norm(&f, &p(0.5, 1.0), &half(), &quad()).unwrap().quasi_norm, 0.0);
    }

    #[test]
    fn membership_and_inclusion() {
        let f = IntegrandFn::indicator(vec![(0.0, 1.0)], 1);
        for lambda in [0.0, 0.5, 2.0] {
            let r = membership(&f, &p(1.3, lambda), &half(), &quad()).unwrap();
            assert_eq!(r.verdict, Verdict::InSpace);
            if lambda == 0.0 {
                assert_eq!(r.tempered_agrees, Some(true));
            }
        }
        // ‖f(s)‖ = (1+|s|)^{-0.6}: tempered integrand ~ |s|^{-1.2}, stable ~ |s|^{-0.9}
        let f = IntegrandFn::new(1, 1, |s| Matrix::from_element(1, 1, (1.0 + s[0].abs()).powf(-0.6)))
            .with_breakpoints(vec![vec![0.0]]);
        let r = membership(&f, &p(1.5, 1.0), &half(), &quad().with_tol(1e-8)).unwrap();
        assert_eq!(r.verdict, Verdict::InSpace, "{r:?}");
        let r = membership(&f, &p(1.5, 0.0), &half(), &quad().with_tol(1e-8)).unwrap();
        assert_eq!(r.verdict, Verdict::Diverged, "{r:?}");
    }

    #[test]
    fn pushforward_mass() {
        let f = IntegrandFn::indicator(vec![(0.0, 1.0)], 1);
        for (alpha, lambda) in [(0.5, 1.0), (1.5, 2.5), (0.8, 0.0)] {
            let pr = p(alpha, lambda);
            let r = pushforward_levy_mass(&f, &pr, &half(), &[1.0], &[f64::INFINITY], &quad()).unwrap();
            // only the atom at +1 reaches [1, inf)
            let want = if lambda > 0.0 {
                0.5 * lambda.powf(alpha) * upper_gamma_neg(alpha, lambda).unwrap()
            } else {
                0.5 / alpha
            };
            assert!((r.value - want).abs() < 1e-9 * want, "{r:?} vs {want}");
            assert!(r.residual < 1e-6 * want);
        }
        let far = pushforward_levy_mass(&f.scaled(1e-30), &p(0.5, 1.0), &half(), &[1.0], &[2.0], &quad()).unwrap();
        assert!(far.value < 1e-300 && far.alternative < 1e-300);
        assert!(pushforward_levy_mass(&f, &p(0.5, 1.0), &half(), &[-1.0], &[1.0], &quad()).is_err());
    }

    #[test]
    fn two_dimensional_simple_functions_match_closed_form() {
        let sigma = SpectralMeasure::new(2, vec![Atom { dir: vec![1.0, 0.0], w: 0.4 }, Atom { dir: vec![0.6, 0.8], w: 0.9 }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let sf = SimpleFunction::random_dyadic(2, 2, 2.0, &mut rng);
            let f = sf.to_integrand();
            let pr = p(1.2, 1.0);
            for delta in [0.5, 3.0] {
                let got = big_h(&f, delta, &pr, &sigma, &quad()).unwrap().value;
                let want = sf.big_h_exact(delta, &pr, &sigma).unwrap();
                assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn matrix_floor_is_finite() {
        let sigma = SpectralMeasure::coordinate(2, 0.5).unwrap();
        let k = estimate_matrix_floor(&p(1.2, 1.0), &sigma, 5000, 3).unwrap();
        assert!(k.k_est.is_finite() && k.k_est > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sandwich_on_simple_functions(seed in 0u64..1000, alpha in 0.2f64..1.9, n in 1usize..=2, d in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sf = SimpleFunction::random_dyadic(n, d, 1.0, &mut rng);
            let sigma = SpectralMeasure::coordinate(d, 0.5).unwrap();
            let pr = p(alpha, 1.0);
            let f = sf.to_integrand();
            let env = envelope_constants(alpha).unwrap();
            let h1 = big_h(&f, 1.0, &pr, &sigma, &quad()).unwrap().value;
            let jv = j2(&f, &pr, &sigma, &quad()).unwrap().value;
            prop_assert!(env.c1 * h1 <= jv * (1.0 + 1e-9) && jv <= env.c2 * h1 * (1.0 + 1e-9));
            let q = quasi_norm(&f, &pr, &sigma, &quad()).unwrap().quasi_norm;
            for delta in [0.1, 1.0, 7.0] {
                let x = q / delta;
                let hd = big_h(&f, delta, &pr, &sigma, &quad()).unwrap().value;
                prop_assert!(x.powf(alpha).min(x * x) <= hd + 1e-6);
                prop_assert!(hd <= x.powf(alpha).max(x * x) + 1e-6);
                // H(f, δ) and H(f/δ, 1) share their nodes
                prop_assert_eq!(hd, big_h(&f.scaled(1.0 / delta), 1.0, &pr, &sigma, &quad()).unwrap().value);
            }
        }
    }
}
