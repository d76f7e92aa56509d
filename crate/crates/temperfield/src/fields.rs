//! Operator scaling random fields driven by a tempered stable random measure
//! with Lebesgue control measure: moving-average, harmonizable and
//! kernel-tempered moving-average kernels, their finite dimensional LCFs,
//! and checkers for the exact identities these fields satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::integrability::{integrate_scalar, Domain, IntegrandFn};
use crate::operators::{eigenvalues, matrix_from_rows, matrix_power, matrix_to_rows, operator_norm, spectral_bounds, Matrix, OperatorSpec, Vector};
use crate::polar::{admissibility_probe, HomogeneousFn, PhiKind, ProbeReport};
use crate::quad::{integrate_line_local, Integral, QuadratureConfig, Tail};
use crate::tstable::{Atom, Lcf, RadialLcf, SpectralMeasure, StableParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    MovingAverage,
    Harmonizable,
    KernelTemperedMa,
}

pub const DEFAULT_ORBIT_NODES: usize = 64;

/// The on-disk form of a [`FieldSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFieldSpec {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d_mat: Vec<Vec<f64>>,
    pub sigma: SpectralMeasure,
    pub kind: FieldKind,
    pub phi: PhiKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Orbit nodes used to make a harmonizable `σ̃` rotation invariant; 0 keeps `σ̃` as given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_nodes: Option<usize>,
}

/// A validated field specification.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub n: usize,
    pub d: usize,
    pub params: StableParams,
    /// Spectral measure actually used (orbit averaged for harmonizable fields when requested).
    pub sigma: SpectralMeasure,
    pub e: OperatorSpec,
    pub d_mat: Matrix,
    pub phi: HomogeneousFn,
    pub kind: FieldKind,
    pub beta: Option<f64>,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
    raw: RawFieldSpec,
}

impl Serialize for FieldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<De: serde::Deserializer<'de>>(de: De) -> std::result::Result<Self, De::Error> {
        let raw = RawFieldSpec::deserialize(de)?;
        FieldSpec::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

/// `(re_eig_min, re_eig_max)` of `D`.
fn d_bounds(d: &Matrix) -> Result<(f64, f64)> {
    let (lo, hi, _) = spectral_bounds(d)?;
    Ok((lo, hi))
}

impl FieldSpec {
    /// Validates a raw specification, enforcing the existence gate of its kind.
    pub fn from_raw(raw: RawFieldSpec) -> Result<Self> {
        let params = StableParams::new(raw.alpha, raw.lambda)?;
        let (n, d) = (raw.n, raw.d);
        if n == 0 || d == 0 {
            return invalid("n and d must be positive");
        }
        let e = OperatorSpec::from_rows(&raw.e)?;
        check_dim(n, e.dim())?;
        let d_mat = matrix_from_rows(&raw.d_mat)?;
        check_dim(d, d_mat.nrows())?;
        check_dim(d, d_mat.ncols())?;
        if let Some(b) = raw.beta {
            if !(b > 0.0) || !b.is_finite() {
                return invalid("beta must be positive");
            }
        }
        let phi_exp = match raw.kind {
            FieldKind::Harmonizable => e.transpose(),
            _ => e.clone(),
        };
        if !e.in_q() {
            return Err(Error::Gate(format!("E must have spectrum in the right half plane (min real part {})", e.re_eig_min)));
        }
        let phi = HomogeneousFn::new(raw.phi, phi_exp, raw.beta)?;
        let sigma = match raw.kind {
            FieldKind::Harmonizable => {
                check_dim(2 * d, raw.sigma.dim())?;
                match raw.orbit_nodes.unwrap_or(DEFAULT_ORBIT_NODES) {
                    0 => raw.sigma.clone(),
                    m => make_orbit_uniform(raw.sigma.atoms(), m)?,
                }
            }
            _ => {
                check_dim(d, raw.sigma.dim())?;
                raw.sigma.clone()
            }
        };
        let mut spec = Self { n, d, params, sigma, e, d_mat, phi, kind: raw.kind, beta: raw.beta, warnings: Vec::new(), raw };
        spec.warnings = spec.check_gates()?;
        for w in &spec.warnings {
            log::warn!("{w}");
        }
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawFieldSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("field spec: {e}")))?;
        Self::from_raw(raw)
    }

    pub fn raw(&self) -> &RawFieldSpec {
        &self.raw
    }

    /// `q = tr(E)`.
    pub fn q(&self) -> f64 {
        self.e.trace_q
    }

    /// Hurst index `H = re_eig_max(D)`.
    pub fn hurst(&self) -> f64 {
        d_bounds(&self.d_mat).map(|b| b.1).unwrap_or(f64::NAN)
    }

    /// The same field with a different tempering parameter, gates re-checked.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut raw = self.raw.clone();
        raw.lambda = lambda;
        let mut out = Self::from_raw(raw)?;
        // keep an already expanded measure rather than expanding twice
        out.sigma = self.sigma.clone();
        Ok(out)
    }

    fn check_gates(&self) -> Result<Vec<String>> {
        let (al, la, q) = (self.params.alpha, self.params.lambda, self.q());
        let (h_min, h_max) = d_bounds(&self.d_mat)?;
        let mut warnings = Vec::new();
        match self.kind {
            FieldKind::MovingAverage => {
                let beta = self.beta.ok_or_else(|| Error::InvalidInput("moving-average fields need beta".into()))?;
                let bound = beta + q * (1.0 / al - 0.5);
                if !(h_max < bound) {
                    return Err(Error::Gate(format!("moving-average field needs H < beta + q(1/alpha - 1/2) = {bound}, got H = {h_max}")));
                }
                if !(h_min > 0.0) {
                    return Err(Error::Gate(format!("D must have spectrum in the right half plane (min real part {h_min})")));
                }
                if la == 0.0 && !(h_max < beta) {
                    return Err(Error::Gate(format!("the stable moving-average field needs H < beta = {beta}, got H = {h_max}")));
                }
            }
            FieldKind::Harmonizable => {
                let lower = q * (0.5 - 1.0 / al);
                if !(lower < h_min) {
                    return Err(Error::Gate(format!("harmonizable field needs re_eig_min(D) > q(1/2 - 1/alpha) = {lower}, got {h_min}")));
                }
                if !(h_max < self.e.re_eig_min) {
                    return Err(Error::Gate(format!(
                        "harmonizable field needs H < re_eig_min(E) = {}, got H = {h_max}",
                        self.e.re_eig_min
                    )));
                }
                if la == 0.0 && !(h_min > 0.0) {
                    return Err(Error::Gate("the stable harmonizable field needs D with spectrum in the right half plane".into()));
                }
                if !self.sigma.is_orbit_uniform() {
                    warnings.push("spectral measure is not orbit uniform; stationarity checks are unavailable".into());
                }
            }
            FieldKind::KernelTemperedMa => {
                if !(h_min > 0.0) {
                    return Err(Error::Gate(format!("D must have spectrum in the right half plane (min real part {h_min})")));
                }
                if !(la > 0.0) {
                    return Err(Error::Gate("kernel tempering needs lambda > 0".into()));
                }
            }
        }
        let qa = q / al;
        if eigenvalues(&self.d_mat)?.iter().any(|(re, im)| im.abs() < 1e-12 && (re - qa).abs() < 1e-12) {
            warnings.push(format!("q/alpha = {qa} is an eigenvalue of D; fullness of the field is not guaranteed"));
        }
        Ok(warnings)
    }

    /// Gates under which the stable limit exists.
    pub fn check_stable_limit_gates(&self) -> Result<()> {
        let (h_min, h_max) = d_bounds(&self.d_mat)?;
        match self.kind {
            FieldKind::MovingAverage | FieldKind::KernelTemperedMa => {
                let beta = self.beta.ok_or_else(|| Error::Gate("the stable limit needs beta".into()))?;
                if !(h_max < beta) {
                    return Err(Error::Gate(format!("the stable limit needs H < beta = {beta}, got H = {h_max}")));
                }
            }
            FieldKind::Harmonizable => {
                if !(h_min > 0.0) {
                    return Err(Error::Gate("the stable limit needs D with spectrum in the right half plane".into()));
                }
            }
        }
        Ok(())
    }

    /// Probes `|φ(x+y) − φ(y)| <= C τ(x)^β` for the configured `β`.
    pub fn probe_admissibility(&self, samples: usize, seed: u64) -> Result<ProbeReport> {
        let beta = self.beta.ok_or_else(|| Error::InvalidInput("no beta configured".into()))?;
        admissibility_probe(&self.phi, beta, 0.5, 2.0, samples, seed)
    }

    /// Exponent applied to `φ` values inside the kernel, transposed: `(D − (q/α)I)^T`
    /// for moving averages and `(−D − (q/α)I)^T` for harmonizable fields.
    fn kernel_exponent_t(&self) -> Matrix {
        let qa = self.q() / self.params.alpha;
        let id = Matrix::identity(self.d, self.d);
        match self.kind {
            FieldKind::Harmonizable => (-&self.d_mat - id * qa).transpose(),
            _ => (&self.d_mat - id * qa).transpose(),
        }
    }

    /// Power-law rate `p` with `‖kernel(s)‖ ~ ‖s‖^{-p}`, available for scalar `E`.
    fn kernel_decay(&self) -> Option<f64> {
        let a = self.e.scalar_multiple()?;
        let (h_min, h_max) = d_bounds(&self.d_mat).ok()?;
        let qa = self.q() / self.params.alpha;
        match self.kind {
            FieldKind::MovingAverage => Some(1.0 + (qa - h_max) / a),
            FieldKind::Harmonizable => Some((h_min + qa) / a),
            FieldKind::KernelTemperedMa => None,
        }
    }
}

/// Points `t_j` and directions `u_j` of a finite dimensional distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddQuery {
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
}

impl FddQuery {
    pub fn new(points: Vec<Vec<f64>>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let q = Self { points, directions };
        if q.points.len() != q.directions.len() {
            return invalid(format!("{} points but {} directions", q.points.len(), q.directions.len()));
        }
        if q.points.iter().chain(&q.directions).flatten().any(|x| !x.is_finite()) {
            return invalid("query entries must be finite");
        }
        Ok(q)
    }

    /// A single point with a single direction.
    pub fn single(t: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        Self::new(vec![t], vec![u])
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.points.len() != self.directions.len() {
            return invalid("points and directions differ in length");
        }
        for (t, u) in self.points.iter().zip(&self.directions) {
            check_dim(n, t.len())?;
            check_dim(d, u.len())?;
        }
        Ok(())
    }

    /// The query with every direction negated.
    pub fn negated(&self) -> Self {
        Self { points: self.points.clone(), directions: self.directions.iter().map(|u| u.iter().map(|x| -x).collect()).collect() }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// φ(x)^{M} for the transposed exponent, with the null-set convention at φ = 0.
fn phi_power(spec: &FieldSpec, mt: &Matrix, x: &[f64]) -> Result<Option<Matrix>> {
    let p = spec.phi.eval(x)?;
    if p == 0.0 {
        return Ok(None);
    }
    Ok(Some(matrix_power(mt, p)?))
}

fn require_kind(spec: &FieldSpec, kind: FieldKind) -> Result<()> {
    if spec.kind != kind {
        return invalid(format!("operation needs a {kind:?} field, got {:?}", spec.kind));
    }
    Ok(())
}

/// `f_t(s) = φ(t−s)^{D−(q/α)I} − φ(−s)^{D−(q/α)I}`.
pub fn ma_kernel(spec: &FieldSpec, t: &[f64], s: &[f64]) -> Result<Matrix> {
    require_kind(spec, FieldKind::MovingAverage)?;
    ma_like_kernel(spec, t, s, None)
}

/// `e^{−λφ(t−s)} φ(t−s)^{D−(q/α)I} − e^{−λφ(−s)} φ(−s)^{D−(q/α)I}`.
pub fn kt_kernel(spec: &FieldSpec, t: &[f64], s: &[f64]) -> Result<Matrix> {
    require_kind(spec, FieldKind::KernelTemperedMa)?;
    ma_like_kernel(spec, t, s, Some(spec.params.lambda))
}

fn ma_like_kernel(spec: &FieldSpec, t: &[f64], s: &[f64], damp: Option<f64>) -> Result<Matrix> {
    check_dim(spec.n, t.len())?;
    check_dim(spec.n, s.len())?;
    let m = spec.kernel_exponent_t().transpose();
    let neg_s: Vec<f64> = s.iter().map(|x| -x).collect();
    pow_diff(spec, &m, damp, &sub(t, s), &neg_s, t)
}

/// The real `2d×2d` lift `((cos⟨t,s⟩−1)P, −sin⟨t,s⟩ P; 0, 0)` with `P = φ(s)^{−D−(q/α)I}`.
pub fn harm_kernel_lift(spec: &FieldSpec, t: &[f64], s: &[f64]) -> Result<Matrix> {
    require_kind(spec, FieldKind::Harmonizable)?;
    check_dim(spec.n, t.len())?;
    check_dim(spec.n, s.len())?;
    let d = spec.d;
    let mut out = Matrix::zeros(2 * d, 2 * d);
    let Some(pt) = phi_power(spec, &spec.kernel_exponent_t(), s)? else {
        return Ok(out);
    };
    let p = pt.transpose();
    let (sn, cs) = dot(t, s).sin_cos();
    out.view_mut((0, 0), (d, d)).copy_from(&(&p * (cs - 1.0)));
    out.view_mut((0, d), (d, d)).copy_from(&(&p * -sn));
    Ok(out)
}

/// The kernel of the field at `t` as a matrix valued integrand (the lift for harmonizable fields).
pub fn kernel_integrand(spec: &FieldSpec, t: &[f64]) -> Result<IntegrandFn> {
    check_dim(spec.n, t.len())?;
    let sp = spec.clone();
    let tv = t.to_vec();
    let dim = if spec.kind == FieldKind::Harmonizable { 2 * spec.d } else { spec.d };
    let f = move |s: &[f64]| {
        let r = match sp.kind {
            FieldKind::MovingAverage => ma_kernel(&sp, &tv, s),
            FieldKind::KernelTemperedMa => kt_kernel(&sp, &tv, s),
            FieldKind::Harmonizable => harm_kernel_lift(&sp, &tv, s),
        };
        r.unwrap_or_else(|_| Matrix::from_element(dim, dim, f64::NAN))
    };
    let mut bps: Vec<Vec<f64>> = (0..spec.n).map(|i| vec![0.0, t[i]]).collect();
    if spec.kind == FieldKind::Harmonizable {
        bps = vec![vec![0.0]; spec.n];
    }
    let mut out = IntegrandFn::new(spec.n, dim, f)
        .with_breakpoints(bps)
        .with_singular_points(vec![vec![0.0; spec.n], t.to_vec()]);
    if let Some(p) = spec.kernel_decay() {
        out = out.with_decay(p);
    }
    Ok(out)
}

/// `e^A − I`, accurate for small `A`.
fn expm1_mat(a: &Matrix) -> Result<Matrix> {
    let d = a.nrows();
    if d == 1 {
        return Ok(Matrix::from_element(1, 1, a[(0, 0)].exp_m1()));
    }
    if a.amax() * d as f64 > 0.5 {
        return Ok(matrix_power(a, std::f64::consts::E)? - Matrix::identity(d, d));
    }
    let mut term = a.clone();
    let mut sum = a.clone();
    for k in 2..40 {
        term = &term * a / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * sum.amax() {
            break;
        }
    }
    Ok(sum)
}

// log φ(x) − log φ(y) given δ = x − y, exact in δ for the built-in φ with scalar exponent
fn log_ratio(spec: &FieldSpec, x: &[f64], y: &[f64], delta: &[f64], px: f64, py: f64) -> f64 {
    match (spec.phi.kind(), spec.phi.exponent.scalar_multiple()) {
        (Some(PhiKind::Abs), Some(a)) => {
            let r = delta[0] / y[0];
            if r > -0.5 {
                r.ln_1p() / a
            } else {
                (1.0 + r).abs().ln() / a
            }
        }
        (Some(PhiKind::Radial), Some(a)) => {
            let yy: f64 = y.iter().map(|v| v * v).sum();
            let cross: f64 = delta.iter().zip(x.iter().zip(y)).map(|(d, (p, q))| d * (p + q)).sum();
            0.5 * (cross / yy).ln_1p() / a
        }
        _ => px.ln() - py.ln(),
    }
}

/// `φ(x)^{M} w(x) − φ(y)^{M} w(y)` for `δ = x − y`, where `w` is the optional
/// damping `e^{−λφ}`; written as `φ(y)^M (e^{M log(φ(x)/φ(y))} − I)` when the
/// two values are close so that far-field differences keep their digits.
fn pow_diff(spec: &FieldSpec, m: &Matrix, damp: Option<f64>, x: &[f64], y: &[f64], delta: &[f64]) -> Result<Matrix> {
    let px = spec.phi.eval(x)?;
    let py = spec.phi.eval(y)?;
    let term = |p: f64| -> Result<Matrix> {
        if p == 0.0 {
            return Ok(Matrix::zeros(spec.d, spec.d));
        }
        let w = damp.map(|l| (-l * p).exp()).unwrap_or(1.0);
        if w == 0.0 {
            return Ok(Matrix::zeros(spec.d, spec.d));
        }
        Ok(matrix_power(m, p)? * w)
    };
    if px == 0.0 || py == 0.0 || damp.is_some() {
        return Ok(term(px)? - term(py)?);
    }
    let l = log_ratio(spec, x, y, delta, px, py);
    if l.abs() > 0.5 {
        return Ok(term(px)? - term(py)?);
    }
    Ok(matrix_power(m, py)? * expm1_mat(&(m * l))?)
}

/// Evaluator of `s ↦ Σ_j (k_{a+t_j}(s) − k_a(s))^* u_j` and its LCF.
///
/// Points are passed as `base + offset` so that differences to breakpoints
/// are formed without cancellation.
struct LcfIntegrand<'a> {
    spec: &'a FieldSpec,
    mt: Matrix,
    lcf: Lcf,
    anchor: Vec<f64>,
    offsets: Vec<Vec<f64>>,
    shifted: Vec<Vec<f64>>,
    dirs: Vec<Vector>,
    damp: Option<f64>,
}

impl<'a> LcfIntegrand<'a> {
    fn new(spec: &'a FieldSpec, lambda: f64, anchor: &[f64], query: &FddQuery) -> Result<Self> {
        query.validate(spec.n, spec.d)?;
        check_dim(spec.n, anchor.len())?;
        // kernel tempering moves λ into the kernel and drives it by the stable measure
        let (measure_lambda, damp) = match spec.kind {
            FieldKind::KernelTemperedMa => (0.0, Some(lambda)),
            _ => (lambda, None),
        };
        let lcf = Lcf::new(spec.params.with_lambda(measure_lambda), &spec.sigma)?;
        Ok(Self {
            spec,
            mt: spec.kernel_exponent_t(),
            lcf,
            anchor: anchor.to_vec(),
            offsets: query.points.clone(),
            shifted: query.points.iter().map(|t| t.iter().zip(anchor).map(|(x, a)| x + a).collect()).collect(),
            dirs: query.directions.iter().map(|u| Vector::from_column_slice(u)).collect(),
            damp,
        })
    }

    fn pow_diff(&self, x: &[f64], y: &[f64], delta: &[f64], u: &Vector) -> Result<Vector> {
        Ok(pow_diff(self.spec, &self.mt, self.damp, x, y, delta)? * u)
    }

    fn argument(&self, base: &[f64], off: &[f64]) -> Result<Vec<f64>> {
        let rel = |p: &[f64]| -> Vec<f64> { p.iter().zip(base.iter().zip(off)).map(|(a, (b, o))| (a - b) - o).collect() };
        match self.spec.kind {
            FieldKind::Harmonizable => {
                let d = self.spec.d;
                let s: Vec<f64> = base.iter().zip(off).map(|(b, o)| b + o).collect();
                let mut w = vec![0.0; 2 * d];
                let Some(pt) = phi_power(self.spec, &self.mt, &s)? else {
                    return Ok(w);
                };
                let ta = dot(&self.anchor, &s);
                for (t, u) in self.offsets.iter().zip(&self.dirs) {
                    // cos(A+B) − cos A and sin(A+B) − sin A without cancellation
                    let half = 0.5 * dot(t, &s);
                    let sh = half.sin();
                    let (sm, cm) = (ta + half).sin_cos();
                    let (dc, ds) = (-2.0 * sm * sh, 2.0 * cm * sh);
                    let y = &pt * u;
                    for i in 0..d {
                        w[i] += dc * y[i];
                        w[d + i] -= ds * y[i];
                    }
                }
                Ok(w)
            }
            _ => {
                let y = rel(&self.anchor);
                let mut v = Vector::zeros(self.spec.d);
                for ((p, t), u) in self.shifted.iter().zip(&self.offsets).zip(&self.dirs) {
                    v += self.pow_diff(&rel(p), &y, t, u)?;
                }
                Ok(v.as_slice().to_vec())
            }
        }
    }

    fn psi(&self, base: &[f64], off: &[f64]) -> f64 {
        self.argument(base, off).and_then(|w| self.lcf.eval(&w)).unwrap_or(f64::NAN)
    }

    fn breakpoints(&self) -> Vec<Vec<f64>> {
        let mut pts: Vec<&Vec<f64>> = vec![&self.anchor];
        if self.spec.kind != FieldKind::Harmonizable {
            pts.extend(self.shifted.iter());
        }
        (0..self.spec.n).map(|i| pts.iter().map(|p| p[i]).collect()).collect()
    }

    fn tail(&self, lambda: f64) -> Tail {
        let growth = if lambda > 0.0 && self.damp.is_none() { 2.0 } else { self.spec.params.alpha };
        match self.spec.kernel_decay() {
            Some(p) => Tail::PowerLaw { kappa: growth * p },
            None => Tail::Empirical,
        }
    }
}

/// LCF of `(X(a+t_j) − X(a))_j` at directions `u_j`, for tempering `lambda`.
pub fn increment_lcf(spec: &FieldSpec, lambda: f64, anchor: &[f64], query: &FddQuery, quad: &QuadratureConfig) -> Result<Integral> {
    let ig = LcfIntegrand::new(spec, lambda, anchor, query)?;
    if query.directions.iter().flatten().all(|x| *x == 0.0) {
        return Ok(Integral { converged: true, ..Default::default() });
    }
    let bps = ig.breakpoints();
    let tail = ig.tail(lambda);
    let res = if spec.n == 1 {
        quad.validate()?;
        integrate_line_local(&|b: f64, o: f64| ig.psi(&[b], &[o]), &bps[0], quad, tail)
    } else {
        let centers: Vec<Vec<f64>> = std::iter::once(ig.anchor.clone()).chain(ig.shifted.iter().cloned()).collect();
        let dom = Domain { n: spec.n, breakpoints: &bps, support: None, centers: &centers, tail };
        let zero = vec![0.0; spec.n];
        integrate_scalar(&|s: &[f64]| ig.psi(&zero, s), &dom, quad, 0x4c43)?
    };
    if res.diverged {
        return Err(Error::Diverged("field LCF integrand is not integrable".into()));
    }
    if !res.value.is_finite() {
        return Err(Error::NonConvergence("field LCF cubature produced a non-finite value".into()));
    }
    Ok(res)
}

/// `Λ = ∫ ψ(Σ_j k_{t_j}(s)^* u_j) ds`, the log characteristic function of the fdd vector.
pub fn field_lcf(spec: &FieldSpec, query: &FddQuery, quad: &QuadratureConfig) -> Result<Integral> {
    increment_lcf(spec, spec.params.lambda, &vec![0.0; spec.n], query, quad)
}

/// [`field_lcf`] over many queries in parallel.
pub fn field_lcf_batch(spec: &FieldSpec, queries: &[FddQuery], quad: &QuadratureConfig) -> Vec<Result<Integral>> {
    queries.par_iter().map(|q| field_lcf(spec, q, quad)).collect()
}

/// One line of a residual table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    /// The varied parameter (`c`, a shift component, `λ`).
    pub param: f64,
    pub left: f64,
    pub right: f64,
    pub residual: f64,
    /// Sum of the cubature error estimates of both sides.
    pub error: f64,
    pub converged: bool,
}

fn row(param: f64, l: Integral, r: Integral) -> CheckRow {
    CheckRow {
        param,
        left: l.value,
        right: r.value,
        residual: (l.value - r.value).abs(),
        error: l.error + r.error,
        converged: l.converged && r.converged,
    }
}

fn zero_row(param: f64, v: Integral) -> CheckRow {
    row(param, v, v)
}

/// Compares `Λ_λ(c^E t_j; u_j)` with `Λ_{c^{±q/α}λ}(t_j; (c^D)^* u_j)`.
pub fn check_scaling(spec: &FieldSpec, c: f64, query: &FddQuery, quad: &QuadratureConfig) -> Result<CheckRow> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid("scaling factor must be positive");
    }
    let lam = spec.params.lambda;
    let zero = vec![0.0; spec.n];
    if c == 1.0 {
        return Ok(zero_row(c, increment_lcf(spec, lam, &zero, query, quad)?));
    }
    let sign = match spec.kind {
        FieldKind::MovingAverage => 1.0,
        FieldKind::Harmonizable => -1.0,
        FieldKind::KernelTemperedMa => return invalid("scaling identity is stated for moving-average and harmonizable fields"),
    };
    let ce = matrix_power(&spec.e.entries, c)?;
    let cdt = matrix_power(&spec.d_mat, c)?.transpose();
    let left_q = FddQuery {
        points: query.points.iter().map(|t| (&ce * Vector::from_column_slice(t)).as_slice().to_vec()).collect(),
        directions: query.directions.clone(),
    };
    let right_q = FddQuery {
        points: query.points.clone(),
        directions: query.directions.iter().map(|u| (&cdt * Vector::from_column_slice(u)).as_slice().to_vec()).collect(),
    };
    let lam_r = c.powf(sign * spec.q() / spec.params.alpha) * lam;
    let left = increment_lcf(spec, lam, &zero, &left_q, quad)?;
    let right = increment_lcf(spec, lam_r, &zero, &right_q, quad)?;
    Ok(row(c, left, right))
}

/// Compares the LCF of `(X(t_j+h) − X(h))_j` with that of `(X(t_j))_j`.
pub fn check_stationary_increments(spec: &FieldSpec, h: &[f64], query: &FddQuery, quad: &QuadratureConfig) -> Result<CheckRow> {
    check_dim(spec.n, h.len())?;
    if spec.kind == FieldKind::Harmonizable && !spec.sigma.is_orbit_uniform() {
        return Err(Error::Gate(
            "stationary increments of a harmonizable field need a rotation invariant spectral measure; \
             set orbit_nodes to a positive value"
                .into(),
        ));
    }
    let lam = spec.params.lambda;
    let zero = vec![0.0; spec.n];
    let base = increment_lcf(spec, lam, &zero, query, quad)?;
    let param = h.first().copied().unwrap_or(0.0);
    if h.iter().all(|x| *x == 0.0) {
        return Ok(zero_row(param, base));
    }
    let inc = increment_lcf(spec, lam, h, query, quad)?;
    Ok(row(param, inc, base))
}

/// Replaces each generator by `m` equally weighted images under the rotations
/// `((cos β)I, (sin β)I; −(sin β)I, (cos β)I)`, `β_i = 2πi/m`, closed under symmetry.
pub fn make_orbit_uniform(generators: &[Atom], m: usize) -> Result<SpectralMeasure> {
    if m < 4 {
        return invalid("orbit averaging needs at least 4 nodes");
    }
    let Some(first) = generators.first() else {
        return invalid("orbit averaging needs at least one generator");
    };
    let dim = first.dir.len();
    if dim % 2 != 0 {
        return invalid("orbit averaging acts on R^{2d}");
    }
    let d = dim / 2;
    let mut atoms = Vec::with_capacity(generators.len() * m);
    for g in generators {
        check_dim(dim, g.dir.len())?;
        for i in 0..m {
            let (sb, cb) = (2.0 * std::f64::consts::PI * i as f64 / m as f64).sin_cos();
            let mut dir = vec![0.0; dim];
            for k in 0..d {
                let (x, y) = (g.dir[k], g.dir[d + k]);
                dir[k] = cb * x + sb * y;
                dir[d + k] = -sb * x + cb * y;
            }
            atoms.push(Atom { dir, w: g.w / m as f64 });
        }
    }
    let (measure, _) = SpectralMeasure::build(dim, atoms)?;
    Ok(measure.mark_orbit_uniform())
}

/// `Λ_λ − Λ_0` along a list of tempering parameters.
pub fn check_lambda_limit(spec: &FieldSpec, lambdas: &[f64], query: &FddQuery, quad: &QuadratureConfig) -> Result<Vec<CheckRow>> {
    spec.check_stable_limit_gates()?;
    let zero = vec![0.0; spec.n];
    let limit = increment_lcf(spec, 0.0, &zero, query, quad)?;
    lambdas
        .iter()
        .map(|&l| {
            if !(l >= 0.0) {
                return invalid("lambda must be nonnegative");
            }
            if l == 0.0 {
                return Ok(zero_row(l, limit));
            }
            Ok(row(l, increment_lcf(spec, l, &zero, query, quad)?, limit))
        })
        .collect()
}

/// Distance between the LCF of the rescaled increments at `x` and the LCF of the stable field.
///
/// Moving averages use `c^{−D}(X_λ(x + c^E t) − X_λ(x))` directly; harmonizable
/// fields use `c^{−D}(Y_λ(x + c^E t) − Y_λ(x)) = (Y_{c^{−q/α}λ}(c^{−E}x + t) − Y_{c^{−q/α}λ}(c^{−E}x))`
/// in distribution, which avoids integrating oscillations of frequency `c`.
pub fn check_tangent(spec: &FieldSpec, x: &[f64], cs: &[f64], query: &FddQuery, quad: &QuadratureConfig) -> Result<Vec<CheckRow>> {
    spec.check_stable_limit_gates()?;
    check_dim(spec.n, x.len())?;
    query.validate(spec.n, spec.d)?;
    let zero = vec![0.0; spec.n];
    let limit = increment_lcf(spec, 0.0, &zero, query, quad)?;
    let lam = spec.params.lambda;
    cs.iter()
        .map(|&c| {
            if !(c > 0.0) {
                return invalid("scales must be positive");
            }
            let rescaled = match spec.kind {
                FieldKind::Harmonizable => {
                    let cinv = matrix_power(&spec.e.entries, 1.0 / c)?;
                    let a = (&cinv * Vector::from_column_slice(x)).as_slice().to_vec();
                    increment_lcf(spec, c.powf(-spec.q() / spec.params.alpha) * lam, &a, query, quad)?
                }
                _ => {
                    let ce = matrix_power(&spec.e.entries, c)?;
                    let cdt = matrix_power(&spec.d_mat, 1.0 / c)?.transpose();
                    let q = FddQuery {
                        points: query.points.iter().map(|t| (&ce * Vector::from_column_slice(t)).as_slice().to_vec()).collect(),
                        directions: query.directions.iter().map(|u| (&cdt * Vector::from_column_slice(u)).as_slice().to_vec()).collect(),
                    };
                    increment_lcf(spec, lam, x, &q, quad)?
                }
            };
            Ok(row(c, rescaled, limit))
        })
        .collect()
}

/// Empirical constant in `|ψ_λ(D^* u)| <= T (1 + ‖u‖²)(‖D‖^α ∧ ‖D‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcfEnvelopeEstimate {
    pub t_est: f64,
    pub samples: usize,
}

/// Maximizes the envelope ratio over random `(D, u)` with log-uniform scales.
pub fn estimate_lcf_envelope(params: &StableParams, sigma: &SpectralMeasure, samples: usize, seed: u64) -> Result<LcfEnvelopeEstimate> {
    params.validate()?;
    let d = sigma.dim();
    let lcf = Lcf::new(*params, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: f64 = 0.0;
    for _ in 0..samples {
        let sd = 10f64.powf(rng.random_range(-3.0..3.0));
        let su = 10f64.powf(rng.random_range(-3.0..3.0));
        let m = Matrix::from_fn(d, d, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        let u = Vector::from_fn(d, |_, _| su * rng.sample::<f64, _>(StandardNormal));
        let nd = operator_norm(&m);
        let env = (1.0 + u.norm_squared()) * nd.powf(params.alpha).min(nd * nd);
        if env > 0.0 {
            let v = m.transpose() * &u;
            t = t.max(lcf.eval(v.as_slice())?.abs() / env);
        }
    }
    Ok(LcfEnvelopeEstimate { t_est: t, samples })
}

/// Empirical `K₀` in `‖g̃_t(s)‖ <= K₀(|cos⟨t,s⟩−1| + |sin⟨t,s⟩|)‖φ(s)^{−D−(q/α)I}‖`.
pub fn estimate_k0(spec: &FieldSpec, samples: usize, seed: u64) -> Result<f64> {
    require_kind(spec, FieldKind::Harmonizable)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mt = spec.kernel_exponent_t();
    let mut k: f64 = 0.0;
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let t: Vec<f64> = (0..spec.n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let s: Vec<f64> = (0..spec.n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let Some(pt) = phi_power(spec, &mt, &s)? else { continue };
        let (sn, cs) = dot(&t, &s).sin_cos();
        let env = ((cs - 1.0).abs() + sn.abs()) * operator_norm(&pt);
        if env > 0.0 {
            k = k.max(operator_norm(&harm_kernel_lift(spec, &t, &s)?) / env);
        }
    }
    Ok(k)
}

/// `max |ψ_λ(u) − ψ_0(u)|` over the given arguments.
pub fn lcf_lambda_gap(alpha: f64, lambda: f64, args: &[f64]) -> Result<f64> {
    let a = RadialLcf::new(StableParams::new(alpha, lambda)?);
    let b = RadialLcf::new(StableParams::new(alpha, 0.0)?);
    let mut m: f64 = 0.0;
    for &x in args {
        m = m.max((a.eval(x)? - b.eval(x)?).abs());
    }
    Ok(m)
}

/// Rows of a `D` matrix, for reporting.
pub fn d_rows(spec: &FieldSpec) -> Vec<Vec<f64>> {
    matrix_to_rows(&spec.d_mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrability::integrate_functional;
    use proptest::prelude::*;
    use rand::Rng;

    fn ma_1d(alpha: f64, lambda: f64, h: f64) -> FieldSpec {
        FieldSpec::from_json(&format!(
            r#"{{"n":1,"d":1,"alpha":{alpha},"lambda":{lambda},"E":[[1]],"D":[[{h}]],
            "sigma":{{"dim":1,"atoms":[{{"dir":[1],"w":0.5}}]}},"kind":"moving_average","phi":"abs","beta":1}}"#
        ))
        .unwrap()
    }

    fn harm_1d(alpha: f64, lambda: f64, h: f64, nodes: usize) -> FieldSpec {
        FieldSpec::from_json(&format!(
            r#"{{"n":1,"d":1,"alpha":{alpha},"lambda":{lambda},"E":[[1]],"D":[[{h}]],
            "sigma":{{"dim":2,"atoms":[{{"dir":[1,0],"w":0.5}},{{"dir":[0.6,0.8],"w":0.25}}]}},
            "kind":"harmonizable","phi":"abs","orbit_nodes":{nodes}}}"#
        ))
        .unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default().with_tol(1e-10)
    }

    fn one(t: f64, u: f64) -> FddQuery {
        FddQuery::single(vec![t], vec![u]).unwrap()
    }

    #[test]
    fn gates() {
        // H = 1.1 < 1 + 1/1.5 - 1/2 is fine when tempered, not for the stable field
        assert!(FieldSpec::from_raw(RawFieldSpec { lambda: 1.0, ..ma_1d(1.5, 1.0, 1.1).raw.clone() }).is_ok());
        let stable = FieldSpec::from_raw(RawFieldSpec { lambda: 0.0, ..ma_1d(1.5, 1.0, 1.1).raw.clone() });
        assert!(matches!(stable, Err(Error::Gate(_))));
        let bad = FieldSpec::from_raw(RawFieldSpec { d_mat: vec![vec![1.2]], ..ma_1d(1.5, 1.0, 0.5).raw.clone() });
        assert!(matches!(bad, Err(Error::Gate(_))));
        let harm = FieldSpec::from_raw(RawFieldSpec { d_mat: vec![vec![1.0]], ..harm_1d(1.5, 1.0, 0.5, 8).raw.clone() });
        assert!(matches!(harm, Err(Error::Gate(_))));
        // q(1/2 - 1/α) < h allows negative h when tempered
        assert!(FieldSpec::from_raw(RawFieldSpec { d_mat: vec![vec![-0.1]], ..harm_1d(1.5, 1.0, 0.5, 8).raw.clone() }).is_ok());
        let kt = FieldSpec::from_raw(RawFieldSpec { kind: FieldKind::KernelTemperedMa, lambda: 0.0, ..ma_1d(1.5, 1.0, 0.5).raw.clone() });
        assert!(matches!(kt, Err(Error::Gate(_))));
        let eig = ma_1d(1.0, 1.0, 1.0);
        assert!(eig.warnings.iter().any(|w| w.contains("eigenvalue")));
        assert!(FieldSpec::from_json(r#"{"n":1}"#).is_err());
        assert!(FieldSpec::from_json(&serde_json::to_string(&ma_1d(1.2, 1.0, 0.7)).unwrap()).is_ok());
    }

    #[test]
    fn kernel_examples() {
        let s = ma_1d(1.2, 1.0, 0.7);
        for x in [-2.0, 0.3, 5.0] {
            assert_eq!(ma_kernel(&s, &[0.0], &[x]).unwrap()[(0, 0)], 0.0);
            let want = (1.5f64 - x).abs().powf(0.7 - 1.0 / 1.2) - x.abs().powf(0.7 - 1.0 / 1.2);
            assert!((ma_kernel(&s, &[1.5], &[x]).unwrap()[(0, 0)] - want).abs() < 1e-14);
        }
        assert_eq!(ma_kernel(&s, &[1.5], &[0.0]).unwrap()[(0, 0)], 1.5f64.powf(0.7 - 1.0 / 1.2));
        let h = harm_1d(1.5, 1.0, 0.5, 8);
        assert!(harm_kernel_lift(&h, &[0.0], &[0.7]).unwrap().iter().all(|v| *v == 0.0));
        let s0 = 0.9;
        let g = harm_kernel_lift(&h, &[std::f64::consts::PI / s0], &[s0]).unwrap();
        let p = s0.powf(-0.5 - 1.0 / 1.5);
        assert!((g[(0, 0)] + 2.0 * p).abs() < 1e-14 && g[(0, 1)].abs() < 1e-14);
        assert_eq!(g[(1, 0)], 0.0);
        assert!(ma_kernel(&h, &[0.0], &[1.0]).is_err());
        let kt = FieldSpec::from_raw(RawFieldSpec { kind: FieldKind::KernelTemperedMa, ..s.raw.clone() }).unwrap();
        let k = kt_kernel(&kt, &[1.0], &[-0.5]).unwrap()[(0, 0)];
        let e = 0.7 - 1.0 / 1.2;
        assert!((k - ((-1.5f64).exp() * 1.5f64.powf(e) - (-0.5f64).exp() * 0.5f64.powf(e))).abs() < 1e-14);
        assert_eq!(kt_kernel(&kt, &[0.0], &[0.3]).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn kernel_tempering_decays_along_rays() {
        let s = ma_1d(1.2, 1.0, 0.7);
        let kt = FieldSpec::from_raw(RawFieldSpec { kind: FieldKind::KernelTemperedMa, ..s.raw.clone() }).unwrap();
        let e = 0.7 - 1.0 / 1.2;
        for x in [10.0, 20.0, 40.0] {
            let a = kt_kernel(&kt, &[1.0], &[x]).unwrap()[(0, 0)].abs();
            let b = ma_kernel(&s, &[1.0], &[x]).unwrap()[(0, 0)].abs();
            assert!(a <= (-(x - 1.0f64)).exp() * (x - 1.0f64).powf(e));
            assert!(a / b < 2.0 * x * (-(x - 1.0f64)).exp() / e.abs());
        }
    }

    #[test]
    fn ma_lcf_matches_monte_carlo() {
        let s = ma_1d(0.5, 1.0, 0.6);
        let lam = field_lcf(&s, &one(1.0, 1.0), &quad()).unwrap();
        assert!(lam.converged && lam.value < 0.0);
        // stratified Monte Carlo of ∫ ψ(f_1(s)) ds with s = tan(π(v − 1/2))
        let lcf = Lcf::new(s.params, &s.sigma).unwrap();
        let n = 1_000_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let v = (i as f64 + rng.random::<f64>()) / n as f64;
            let x = (std::f64::consts::PI * (v - 0.5)).tan();
            let jac = std::f64::consts::PI * (1.0 + x * x);
            let k = ma_kernel(&s, &[1.0], &[x]).unwrap()[(0, 0)];
            let y = lcf.eval(&[k]).unwrap() * jac;
            s1 += y;
            s2 += y * y;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((lam.value - mean).abs() < 3.0 * se, "{} vs {mean} ± {se}", lam.value);
    }

    #[test]
    fn trivial_lcf_values() {
        let s = ma_1d(1.2, 1.0, 0.7);
        assert_eq!(field_lcf(&s, &one(1.0, 0.0), &quad()).unwrap().value, 0.0);
        assert_eq!(field_lcf(&s, &one(0.0, 1.0), &quad()).unwrap().value, 0.0);
        let h = harm_1d(1.5, 1.0, 0.5, 16);
        assert_eq!(field_lcf(&h, &one(0.0, 1.0), &quad()).unwrap().value, 0.0);
        assert!(field_lcf(&s, &FddQuery { points: vec![vec![1.0]], directions: vec![] }, &quad()).is_err());
    }

    #[test]
    fn lcf_is_even_and_continuous() {
        let s = ma_1d(1.2, 1.0, 0.7);
        let q = FddQuery::new(vec![vec![1.0], vec![-0.5]], vec![vec![0.8], vec![-0.3]]).unwrap();
        let a = field_lcf(&s, &q, &quad()).unwrap().value;
        let b = field_lcf(&s, &q.negated(), &quad()).unwrap().value;
        assert!((a - b).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for h in [1.0, 0.1, 0.01] {
            let q = FddQuery::new(vec![vec![1.0 + h], vec![1.0]], vec![vec![1.0], vec![-1.0]]).unwrap();
            let v = field_lcf(&s, &q, &quad()).unwrap().value.abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn scaling_identities() {
        let s = ma_1d(0.5, 1.0, 0.6);
        let q = one(1.0, 1.0);
        assert_eq!(check_scaling(&s, 1.0, &q, &quad()).unwrap().residual, 0.0);
        let r = check_scaling(&s, 2.0, &q, &quad()).unwrap();
        assert!(r.residual <= 1e-6, "{r:?}");
        let h = harm_1d(1.5, 1.0, 0.5, 0);
        let r = check_scaling(&h, 2.0, &q, &quad()).unwrap();
        assert!(r.residual <= 1e-6, "{r:?}");
    }

    #[test]
    fn stationarity() {
        let s = ma_1d(1.2, 1.0, 0.7);
        let q = FddQuery::new(vec![vec![1.0], vec![2.5]], vec![vec![0.7], vec![-0.4]]).unwrap();
        assert_eq!(check_stationary_increments(&s, &[0.0], &q, &quad()).unwrap().residual, 0.0);
        let r = check_stationary_increments(&s, &[1.0], &q, &quad()).unwrap();
        assert!(r.residual <= 1e-6, "{r:?}");
        let h = harm_1d(1.5, 1.0, 0.6, 0);
        assert!(matches!(check_stationary_increments(&h, &[1.0], &q, &quad()), Err(Error::Gate(_))));
    }

    #[test]
    fn orbit_measure() {
        let m = make_orbit_uniform(&[Atom { dir: vec![1.0, 0.0], w: 1.0 }], 4).unwrap();
        assert_eq!(m.atoms().len(), 4);
        for want in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            assert!(m.atoms().iter().any(|a| (a.dir[0] - want[0]).abs() < 1e-15 && (a.dir[1] - want[1]).abs() < 1e-15));
        }
        assert!(m.is_orbit_uniform());
        assert!(make_orbit_uniform(&[Atom { dir: vec![1.0, 0.0, 0.0], w: 1.0 }], 8).is_err());
        // invariance of ψ̃ under rotations of its argument
        let g = [Atom { dir: vec![0.8, 0.0, 0.0, 0.6], w: 1.0 }, Atom { dir: vec![0.0, 1.0, 0.0, 0.0], w: 0.5 }];
        let m = make_orbit_uniform(&g, 64).unwrap();
        let lcf = Lcf::new(StableParams::new(1.3, 1.0).unwrap(), &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let w: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let (sb, cb) = rng.random_range(0.0..6.3f64).sin_cos();
            let rot = [cb * w[0] - sb * w[2], cb * w[1] - sb * w[3], sb * w[0] + cb * w[2], sb * w[1] + cb * w[3]];
            let a = lcf.eval(&w).unwrap();
            let b = lcf.eval(&rot).unwrap();
            assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn lambda_limit_and_tangent() {
        let s = ma_1d(1.5, 1.0, 0.6);
        let q = one(1.0, 1.0);
        let rows = check_lambda_limit(&s, &[1.0, 0.1, 0.01, 0.0], &q, &quad()).unwrap();
        assert!(rows[0].residual > rows[1].residual && rows[1].residual > rows[2].residual);
        assert_eq!(rows[3].residual, 0.0);
        let rows = check_tangent(&s, &[0.0], &[1.0, 0.1, 0.01], &q, &quad()).unwrap();
        assert!(rows[0].residual > rows[1].residual && rows[1].residual > rows[2].residual);
        // at x = 0 the rescaled field is the field tempered by c^{q/α}λ
        let c: f64 = 0.1;
        let direct = increment_lcf(&s, c.powf(1.0 / 1.5), &[0.0], &q, &quad()).unwrap().value;
        assert!((rows[1].left - direct).abs() < 1e-7);
        let bad = ma_1d(1.5, 1.0, 1.1);
        assert!(matches!(check_lambda_limit(&bad, &[1.0], &q, &quad()), Err(Error::Gate(_))));
        assert!(lcf_lambda_gap(1.5, 0.01, &[0.1, 1.0, 10.0]).unwrap() < lcf_lambda_gap(1.5, 0.1, &[0.1, 1.0, 10.0]).unwrap());
    }

    #[test]
    fn envelope_and_k0() {
        let sigma = SpectralMeasure::coordinate(2, 0.5).unwrap();
        let t = estimate_lcf_envelope(&StableParams::new(1.2, 1.0).unwrap(), &sigma, 4000, 1).unwrap();
        assert!(t.t_est.is_finite() && t.t_est > 0.0);
        let h = harm_1d(1.5, 1.0, 0.5, 8);
        let k = estimate_k0(&h, 2000, 4).unwrap();
        assert!(k > 0.5 && k <= 1.0 + 1e-12);
    }

    #[test]
    fn kernel_membership() {
        let s = ma_1d(1.5, 1.0, 1.1);
        let f = kernel_integrand(&s, &[1.0]).unwrap();
        let h = integrate_functional(
            &f,
            &|m| crate::integrability::h_fun(&s.params, &s.sigma, m).unwrap(),
            2.0,
            &quad(),
            1,
        )
        .unwrap();
        assert!(h.converged && h.value.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ma_kernel_covariance(t in -3.0f64..3.0, s in -3.0f64..3.0, c in 0.2f64..5.0) {
            let sp = FieldSpec::from_json(r#"{"n":2,"d":2,"alpha":1.5,"lambda":1,"E":[[1,0.2],[0,1.3]],"D":[[0.6,0.2],[-0.1,0.8]],
                "sigma":{"dim":2,"atoms":[{"dir":[1,0],"w":0.5},{"dir":[0,1],"w":0.5}]},"kind":"moving_average","phi":"radial","beta":1}"#).unwrap();
            let tv = [t, 0.5 * t + 0.3];
            let sv = [s, 1.0 - s];
            let ce = matrix_power(&sp.e.entries, c).unwrap();
            let cinv = matrix_power(&sp.e.entries, 1.0 / c).unwrap();
            let ct = (&ce * Vector::from_column_slice(&tv)).as_slice().to_vec();
            let cs = (&cinv * Vector::from_column_slice(&sv)).as_slice().to_vec();
            let left = ma_kernel(&sp, &ct, &sv).unwrap();
            let m = &sp.d_mat - Matrix::identity(2, 2) * (sp.q() / 1.5);
            let right = matrix_power(&m, c).unwrap() * ma_kernel(&sp, &tv, &cs).unwrap();
            prop_assert!((left - &right).norm() <= 1e-8 * right.norm().max(1.0));
        }

        #[test]
        fn harm_kernel_covariance(t in -3.0f64..3.0, s in 0.1f64..3.0, c in 0.2f64..5.0) {
            let sp = harm_1d(1.5, 1.0, 0.5, 0);
            // g̃_{c^E t}(s) = c^{q/α} c^{D} g̃_t(c^{E*}s) blockwise
            let left = harm_kernel_lift(&sp, &[c * t], &[s]).unwrap();
            let right = harm_kernel_lift(&sp, &[t], &[c * s]).unwrap() * (c.powf(1.0 / 1.5) * c.powf(0.5));
            prop_assert!((left - &right).norm() <= 1e-8 * right.norm().max(1.0));
        }
    }
}
