//! Monte Carlo sampling of tempered stable vectors, stochastic integrals and
//! field paths by compound Poisson jumps above a cutoff plus a moment-matched
//! Gaussian for the small jumps.
//!
//! Replicates are produced in chunks of [`CHUNK`]; chunk `k` draws from the
//! ChaCha8 stream `k` of the configured seed, so output does not depend on
//! the number of worker threads.

use nalgebra::SymmetricEigen;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::fields::{kernel_integrand, FieldKind, FieldSpec};
use crate::integrability::{big_h, integrate_functional, stable_h, IntegrandFn};
use crate::operators::{Matrix, Vector};
use crate::quad::QuadratureConfig;
use crate::tstable::{gamma_fn, lower_gamma, upper_gamma_neg, SpectralMeasure, StableParams};

/// Replicates per random stream.
pub const CHUNK: usize = 1024;

pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub jump_cutoff_eps: f64,
    /// Integration box for the Poisson cloud; sized from the integrand when absent.
    #[serde(default)]
    pub domain_box: Option<Vec<(f64, f64)>>,
    pub n_replicates: usize,
    pub seed: u64,
    pub gaussian_refinement: bool,
    /// Largest admissible share of `H(f, 1)` outside the box.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_tail_tol() -> f64 {
    1e-3
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            jump_cutoff_eps: DEFAULT_EPS,
            domain_box: None,
            n_replicates: 1000,
            seed: 0,
            gaussian_refinement: true,
            tail_tol: default_tail_tol(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jump_cutoff_eps > 0.0 && self.jump_cutoff_eps < 1.0) {
            return invalid(format!("jump cutoff must lie in (0, 1), got {}", self.jump_cutoff_eps));
        }
        if self.n_replicates == 0 {
            return invalid("need at least one replicate");
        }
        if !(self.tail_tol > 0.0) {
            return invalid("tail tolerance must be positive");
        }
        if let Some(b) = &self.domain_box {
            if b.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                return invalid("domain box must have finite ordered bounds");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub spec_hash: String,
    pub seed: u64,
    pub eps: f64,
    pub domain_box: Option<Vec<(f64, f64)>>,
    /// Radius proposals and acceptances of the rejection step.
    pub proposals: u64,
    pub accepted: u64,
    pub predicted_acceptance: f64,
    pub warnings: Vec<String>,
}

/// `n_replicates × dim` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<Vec<f64>>,
    pub meta: SampleMeta,
}

/// Samples of a field on a grid, `values[replicate][grid point]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPathBatch {
    pub t_grid: Vec<Vec<f64>>,
    pub values: Vec<Vec<Vec<f64>>>,
    pub meta: SampleMeta,
}

/// Stable 64-bit FNV-1a digest, rendered as hex.
pub fn spec_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// `∫_eps^∞ r^{−α−1} e^{−λr} dr`.
pub fn large_jump_rate(params: &StableParams, eps: f64) -> Result<f64> {
    let (al, la) = (params.alpha, params.lambda);
    if la == 0.0 {
        Ok(eps.powf(-al) / al)
    } else {
        Ok(la.powf(al) * upper_gamma_neg(al, la * eps)?)
    }
}

/// `∫_0^eps r^{1−α} e^{−λr} dr`.
pub fn small_jump_variance(params: &StableParams, eps: f64) -> Result<f64> {
    let (al, la) = (params.alpha, params.lambda);
    if la == 0.0 {
        Ok(eps.powf(2.0 - al) / (2.0 - al))
    } else {
        Ok(la.powf(al - 2.0) * lower_gamma(2.0 - al, la * eps)?)
    }
}

/// Small-jump covariance `Σ_j w_j v_eps θ_j θ_j^T` per unit control mass.
pub fn small_jump_covariance(params: &StableParams, sigma: &SpectralMeasure, eps: f64) -> Result<Matrix> {
    let v = small_jump_variance(params, eps)?;
    let d = sigma.dim();
    let mut c = Matrix::zeros(d, d);
    for a in sigma.atoms() {
        let th = Vector::from_column_slice(&a.dir);
        c += &th * th.transpose() * (a.w * v);
    }
    Ok(c)
}

// symmetric square root of a positive semidefinite matrix
fn psd_sqrt(c: &Matrix) -> Matrix {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

struct JumpLaw {
    alpha: f64,
    lambda: f64,
    eps: f64,
    rate_per_mass: f64,
    radial_rate: f64,
    dirs: Vec<Vec<f64>>,
    pick: WeightedIndex<f64>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    proposals: u64,
    accepted: u64,
}

impl JumpLaw {
    fn new(params: &StableParams, sigma: &SpectralMeasure, eps: f64) -> Result<Self> {
        let w: Vec<f64> = sigma.atoms().iter().map(|a| a.w).collect();
        let radial_rate = large_jump_rate(params, eps)?;
        Ok(Self {
            alpha: params.alpha,
            lambda: params.lambda,
            eps,
            rate_per_mass: sigma.total_mass() * radial_rate,
            radial_rate,
            dirs: sigma.atoms().iter().map(|a| a.dir.clone()).collect(),
            pick: WeightedIndex::new(&w).map_err(|e| Error::InvalidInput(format!("spectral weights: {e}")))?,
        })
    }

    /// Expected acceptance of the Pareto proposal under the `e^{−λ(r−eps)}` test.
    fn predicted_acceptance(&self) -> f64 {
        let pareto = self.eps.powf(-self.alpha) / self.alpha;
        self.radial_rate * (self.lambda * self.eps).exp() / pareto
    }

    fn radius(&self, rng: &mut ChaCha8Rng, c: &mut Counts) -> f64 {
        loop {
            let u = 1.0 - rng.random::<f64>();
            let r = self.eps * u.powf(-1.0 / self.alpha);
            c.proposals += 1;
            if self.lambda == 0.0 || rng.random::<f64>() < (-self.lambda * (r - self.eps)).exp() {
                c.accepted += 1;
                return r;
            }
        }
    }

    /// Jump count, direction index and radius for one replicate with control mass `mass`.
    fn for_each_jump(&self, mass: f64, rng: &mut ChaCha8Rng, c: &mut Counts, mut f: impl FnMut(&mut ChaCha8Rng, &[f64], f64)) -> Result<()> {
        let rate = mass * self.rate_per_mass;
        let k = if rate > 0.0 {
            Poisson::new(rate).map_err(|e| Error::InvalidInput(format!("Poisson rate {rate}: {e}")))?.sample(rng) as u64
        } else {
            0
        };
        for _ in 0..k {
            let j = self.pick.sample(rng);
            let r = self.radius(rng, c);
            f(rng, &self.dirs[j], r);
        }
        Ok(())
    }
}

fn chunked<T: Send>(n: usize, seed: u64, work: impl Fn(&mut ChaCha8Rng, usize) -> Result<(T, Counts)> + Sync) -> Result<(Vec<T>, Counts)> {
    let chunks: Vec<usize> = (0..n.div_ceil(CHUNK)).collect();
    let parts: Vec<Result<(Vec<T>, Counts)>> = chunks
        .par_iter()
        .map(|&k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut out = Vec::with_capacity(CHUNK);
            let mut counts = Counts::default();
            for i in (k * CHUNK)..((k + 1) * CHUNK).min(n) {
                let (v, c) = work(&mut rng, i)?;
                counts.proposals += c.proposals;
                counts.accepted += c.accepted;
                out.push(v);
            }
            Ok((out, counts))
        })
        .collect();
    let mut all = Vec::with_capacity(n);
    let mut total = Counts::default();
    for p in parts {
        let (v, c) = p?;
        all.extend(v);
        total.proposals += c.proposals;
        total.accepted += c.accepted;
    }
    Ok((all, total))
}

fn small_jump_warning(params: &StableParams, cfg: &SimConfig) -> Vec<String> {
    if params.lambda == 0.0 && !cfg.gaussian_refinement && params.alpha >= 1.0 {
        let w = "stable law with alpha >= 1 and no Gaussian refinement: small-jump bias is not negligible".to_string();
        log::warn!("{w}");
        vec![w]
    } else {
        Vec::new()
    }
}

/// Samples `𝕄(A)` for a set of control mass `mass`.
pub fn sample_tas(params: &StableParams, sigma: &SpectralMeasure, mass: f64, cfg: &SimConfig) -> Result<SampleBatch> {
    params.validate()?;
    cfg.validate()?;
    if !(mass > 0.0) || !mass.is_finite() {
        return invalid("control mass must be positive");
    }
    let law = JumpLaw::new(params, sigma, cfg.jump_cutoff_eps)?;
    let d = sigma.dim();
    let chol = if cfg.gaussian_refinement {
        Some(psd_sqrt(&(small_jump_covariance(params, sigma, cfg.jump_cutoff_eps)? * mass)))
    } else {
        None
    };
    let (values, counts) = chunked(cfg.n_replicates, cfg.seed, |rng, _| {
        let mut x = Vector::zeros(d);
        let mut c = Counts::default();
        law.for_each_jump(mass, rng, &mut c, |_, th, r| {
            for i in 0..d {
                x[i] += r * th[i];
            }
        })?;
        if let Some(l) = &chol {
            let z = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            x += l * z;
        }
        Ok((x.as_slice().to_vec(), c))
    })?;
    let hash = spec_hash(&serde_json::json!({"params": params, "sigma": sigma, "mass": mass, "cfg": cfg}).to_string());
    Ok(SampleBatch {
        values,
        meta: SampleMeta {
            spec_hash: hash,
            seed: cfg.seed,
            eps: cfg.jump_cutoff_eps,
            domain_box: None,
            proposals: counts.proposals,
            accepted: counts.accepted,
            predicted_acceptance: law.predicted_acceptance(),
            warnings: small_jump_warning(params, cfg),
        },
    })
}

fn box_volume(b: &[(f64, f64)]) -> f64 {
    b.iter().map(|(lo, hi)| hi - lo).product()
}

fn h_one(f: &IntegrandFn, params: &StableParams, sigma: &SpectralMeasure, quad: &QuadratureConfig) -> Result<f64> {
    let r = if params.lambda == 0.0 { stable_h(f, params.alpha, sigma, quad)? } else { big_h(f, 1.0, params, sigma, quad)? };
    if r.diverged || !r.value.is_finite() {
        return Err(Error::Diverged("H(f, 1) is infinite; f is not integrable".into()));
    }
    Ok(r.value)
}

/// Smallest box `[-R, R]^n` (R a power of two times the configured radius) whose
/// complement carries at most `tol` of `H(f, 1)`, centred to cover the singular points.
pub fn required_box(
    fs: &[&IntegrandFn],
    params: &StableParams,
    sigma: &SpectralMeasure,
    tol: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<(f64, f64)>> {
    let Some(first) = fs.first() else {
        return invalid("no integrands");
    };
    let n = first.n;
    if let Some(s) = &first.support {
        if fs.iter().all(|f| f.support.is_some()) {
            let mut b = s.clone();
            for f in fs {
                for (bi, si) in b.iter_mut().zip(f.support.as_ref().expect("checked")) {
                    bi.0 = bi.0.min(si.0);
                    bi.1 = bi.1.max(si.1);
                }
            }
            return Ok(b);
        }
    }
    let reach = fs
        .iter()
        .flat_map(|f| f.singular_points.iter().flatten())
        .fold(quad.box_radius, |m, x| m.max(x.abs()));
    let totals: Vec<f64> = fs.iter().map(|f| h_one(f, params, sigma, quad)).collect::<Result<_>>()?;
    let mut r = reach;
    for _ in 0..24 {
        let b = vec![(-r, r); n];
        let ok = fs.iter().zip(&totals).try_fold(true, |acc, (f, total)| -> Result<bool> {
            if !acc {
                return Ok(false);
            }
            let inside = h_one(&(*f).clone().with_support(b.clone()), params, sigma, quad)?;
            Ok(total - inside <= tol * total.abs())
        })?;
        if ok {
            return Ok(b);
        }
        r *= 2.0;
    }
    Err(Error::NonConvergence("no box up to 2^24 times the base radius captures H(f, 1)".into()))
}

fn check_box(fs: &[&IntegrandFn], b: &[(f64, f64)], params: &StableParams, sigma: &SpectralMeasure, cfg: &SimConfig, quad: &QuadratureConfig) -> Result<()> {
    for f in fs {
        check_dim(f.n, b.len())?;
        if f.support.as_ref().is_some_and(|s| s.iter().zip(b).all(|(si, bi)| si.0 >= bi.0 && si.1 <= bi.1)) {
            continue;
        }
        let total = h_one(f, params, sigma, quad)?;
        let inside = h_one(&(*f).clone().with_support(b.to_vec()), params, sigma, quad)?;
        if total - inside > cfg.tail_tol * total.abs() {
            let need = required_box(fs, params, sigma, cfg.tail_tol, quad)?;
            return invalid(format!(
                "domain box leaves {:.3e} of H(f, 1) outside (tolerance {:.1e}); use at least {:?}",
                (total - inside) / total,
                cfg.tail_tol,
                need
            ));
        }
    }
    Ok(())
}

// ∫_box f_a(s) Σ_eps f_b(s)^T ds for all pairs, as one (k·d)×(k·d) matrix
fn refinement_covariance(fs: &[&IntegrandFn], b: &[(f64, f64)], sig: &Matrix, quad: &QuadratureConfig) -> Result<Matrix> {
    let k = fs.len();
    let d = fs[0].d;
    let mut c = Matrix::zeros(k * d, k * d);
    let boxed: Vec<IntegrandFn> = fs.iter().map(|f| (*f).clone().with_support(b.to_vec())).collect();
    for a in 0..k {
        for bb in a..k {
            let (fa, fb) = (boxed[a].clone(), boxed[bb].clone());
            let sig2 = sig.clone();
            let pair = IntegrandFn::new(fa.n, d, move |s| fa.eval(s) * &sig2 * fb.eval(s).transpose())
                .with_support(b.to_vec())
                .with_breakpoints(
                    (0..boxed[a].n)
                        .map(|i| boxed[a].breakpoints[i].iter().chain(&boxed[bb].breakpoints[i]).copied().collect())
                        .collect(),
                );
            for i in 0..d {
                for j in 0..d {
                    let v = integrate_functional(&pair, &|m| m[(i, j)], 2.0, quad, 0x5249)?.value;
                    c[(a * d + i, bb * d + j)] = v;
                    c[(bb * d + j, a * d + i)] = v;
                }
            }
        }
    }
    Ok(c)
}

struct Cloud<'a> {
    law: JumpLaw,
    b: &'a [(f64, f64)],
    vol: f64,
}

impl Cloud<'_> {
    fn for_each(&self, rng: &mut ChaCha8Rng, c: &mut Counts, mut f: impl FnMut(&[f64], &[f64], f64)) -> Result<()> {
        let mut s = vec![0.0; self.b.len()];
        let b = self.b;
        self.law.for_each_jump(self.vol, rng, c, |rng, th, r| {
            for (x, (lo, hi)) in s.iter_mut().zip(b) {
                *x = lo + (hi - lo) * rng.random::<f64>();
            }
            f(&s, th, r);
        })
    }
}

fn sample_kernels(
    fs: &[&IntegrandFn],
    params: &StableParams,
    sigma: &SpectralMeasure,
    cfg: &SimConfig,
    quad: &QuadratureConfig,
    hash_text: String,
) -> Result<(Vec<Vec<Vec<f64>>>, SampleMeta)> {
    params.validate()?;
    cfg.validate()?;
    let d = sigma.dim();
    for f in fs {
        check_dim(d, f.d)?;
    }
    let b = match &cfg.domain_box {
        Some(b) => {
            check_box(fs, b, params, sigma, cfg, quad)?;
            b.clone()
        }
        None => required_box(fs, params, sigma, cfg.tail_tol, quad)?,
    };
    let k = fs.len();
    let chol = if cfg.gaussian_refinement {
        let sig = small_jump_covariance(params, sigma, cfg.jump_cutoff_eps)?;
        Some(psd_sqrt(&refinement_covariance(fs, &b, &sig, quad)?))
    } else {
        None
    };
    let cloud = Cloud { law: JumpLaw::new(params, sigma, cfg.jump_cutoff_eps)?, b: &b, vol: box_volume(&b) };
    let (values, counts) = chunked(cfg.n_replicates, cfg.seed, |rng, _| {
        let mut x = vec![Vector::zeros(d); k];
        let mut c = Counts::default();
        let mut bad = false;
        cloud.for_each(rng, &mut c, |s, th, r| {
            for (xi, f) in x.iter_mut().zip(fs) {
                let m = f.eval(s);
                for i in 0..d {
                    let v: f64 = (0..d).map(|j| m[(i, j)] * th[j]).sum::<f64>() * r;
                    if v.is_finite() {
                        xi[i] += v;
                    } else {
                        bad = true;
                    }
                }
            }
        })?;
        if bad {
            return Err(Error::NonConvergence("kernel returned a non-finite value at a jump location".into()));
        }
        if let Some(l) = &chol {
            let z = Vector::from_fn(k * d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let g = l * z;
            for (a, xa) in x.iter_mut().enumerate() {
                for i in 0..d {
                    xa[i] += g[a * d + i];
                }
            }
        }
        Ok((x.into_iter().map(|v| v.as_slice().to_vec()).collect(), c))
    })?;
    let meta = SampleMeta {
        spec_hash: spec_hash(&hash_text),
        seed: cfg.seed,
        eps: cfg.jump_cutoff_eps,
        domain_box: Some(b.clone()),
        proposals: counts.proposals,
        accepted: counts.accepted,
        predicted_acceptance: cloud.law.predicted_acceptance(),
        warnings: small_jump_warning(params, cfg),
    };
    Ok((values, meta))
}

/// Samples `I(f) = ∫ f(s) 𝕄(ds)` by shot noise on the domain box.
pub fn sample_integral(f: &IntegrandFn, params: &StableParams, sigma: &SpectralMeasure, cfg: &SimConfig, quad: &QuadratureConfig) -> Result<SampleBatch> {
    let text = serde_json::json!({"n": f.n, "d": f.d, "params": params, "sigma": sigma, "cfg": cfg}).to_string();
    let (values, meta) = sample_kernels(&[f], params, sigma, cfg, quad, text)?;
    Ok(SampleBatch { values: values.into_iter().map(|mut v| v.remove(0)).collect(), meta })
}

/// Samples a field on a grid from one Poisson cloud per replicate.
pub fn sample_field_path(spec: &FieldSpec, t_grid: &[Vec<f64>], cfg: &SimConfig, quad: &QuadratureConfig) -> Result<FieldPathBatch> {
    if t_grid.is_empty() {
        return invalid("empty grid");
    }
    let kernels: Vec<IntegrandFn> = t_grid.iter().map(|t| kernel_integrand(spec, t)).collect::<Result<_>>()?;
    let refs: Vec<&IntegrandFn> = kernels.iter().collect();
    // kernel tempering integrates against the stable measure
    let params = match spec.kind {
        FieldKind::KernelTemperedMa => spec.params.with_lambda(0.0),
        _ => spec.params,
    };
    let text = serde_json::json!({"spec": spec, "grid": t_grid, "cfg": cfg}).to_string();
    let (values, meta) = sample_kernels(&refs, &params, &spec.sigma, cfg, quad, text)?;
    let d = spec.d;
    // the harmonizable field is the first half of the lifted integral
    let values = values.into_iter().map(|row| row.into_iter().map(|mut v| {
        v.truncate(d);
        v
    }).collect()).collect();
    Ok(FieldPathBatch { t_grid: t_grid.to_vec(), values, meta })
}

/// `(1/N) Σ_r e^{i⟨u, X_r⟩}` with the standard errors of both parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCf {
    pub re: f64,
    pub im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

pub fn empirical_cf(values: &[Vec<f64>], u: &[f64]) -> Result<EmpiricalCf> {
    let n = values.len();
    if n == 0 {
        return invalid("empty batch");
    }
    let (mut sc, mut ss, mut sc2, mut ss2) = (0.0, 0.0, 0.0, 0.0);
    for x in values {
        check_dim(u.len(), x.len())?;
        let p: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        let (s, c) = p.sin_cos();
        sc += c;
        ss += s;
        sc2 += c * c;
        ss2 += s * s;
    }
    let nf = n as f64;
    let (re, im) = (sc / nf, ss / nf);
    let se = |m2: f64, m: f64| ((m2 / nf - m * m).max(0.0) / nf).sqrt();
    Ok(EmpiricalCf { re, im, se_re: se(sc2, re), se_im: se(ss2, im) })
}

/// `E|X|^p` estimate over the Euclidean norms of the rows with its standard error.
pub fn empirical_moment(values: &[Vec<f64>], p: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for x in values {
        let v = x.iter().map(|a| a * a).sum::<f64>().sqrt().powf(p);
        s += v;
        s2 += v * v;
    }
    let m = s / n;
    (m, ((s2 / n - m * m).max(0.0) / n).sqrt())
}

/// Mean of the moment-matched Gaussian variance per unit control mass, exposed for diagnostics.
pub fn small_jump_share(params: &StableParams, eps: f64) -> Result<f64> {
    let v = small_jump_variance(params, eps)?;
    let total = if params.lambda > 0.0 { params.lambda.powf(params.alpha - 2.0) * gamma_fn(2.0 - params.alpha) } else { f64::INFINITY };
    Ok(v / total)
}
