//! Dense matrix calculus for the scaling exponents.
//!
//! Matrices are small (`m <= 16`) and stored as `nalgebra::DMatrix<f64>`.
//! The exponential uses scaling and squaring with the degree 13 Padé
//! approximant; eigenvalues come from a real Schur decomposition.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 16;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// A square exponent together with its cached spectral data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct OperatorSpec {
    /// The matrix itself.
    pub entries: Matrix,
    /// Sum of the diagonal entries.
    pub trace_q: f64,
    /// Smallest real part among the eigenvalues.
    pub re_eig_min: f64,
    /// Largest real part among the eigenvalues.
    pub re_eig_max: f64,
}

impl OperatorSpec {
    pub fn new(entries: Matrix) -> Result<Self> {
        check_square(&entries)?;
        if entries.nrows() > MAX_DIM {
            return invalid(format!("matrix dimension {} exceeds {MAX_DIM}", entries.nrows()));
        }
        let (re_eig_min, re_eig_max, trace_q) = spectral_bounds(&entries)?;
        Ok(Self { entries, trace_q, re_eig_min, re_eig_max })
    }

    /// Builds from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(m: usize) -> Self {
        Self::new(Matrix::identity(m, m)).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            trace_q: self.trace_q,
            re_eig_min: self.re_eig_min,
            re_eig_max: self.re_eig_max,
        }
    }

    pub fn in_q(&self) -> bool {
        self.re_eig_min > 0.0
    }

    /// Returns `Some(a)` when the matrix equals `a·I`.
    pub fn scalar_multiple(&self) -> Option<f64> {
        scalar_multiple(&self.entries)
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.entries)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.entries)
    }
}

impl TryFrom<Vec<Vec<f64>>> for OperatorSpec {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<OperatorSpec> for Vec<Vec<f64>> {
    fn from(op: OperatorSpec) -> Self {
        op.rows()
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let m = rows.len();
    if m == 0 {
        return invalid("empty matrix");
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return invalid("ragged matrix rows");
    }
    Ok(Matrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn check_square(a: &Matrix) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return invalid(format!("matrix must be square, got {}x{}", a.nrows(), a.ncols()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    Ok(())
}

fn is_diagonal(a: &Matrix) -> bool {
    let m = a.nrows();
    (0..m).all(|i| (0..m).all(|j| i == j || a[(i, j)] == 0.0))
}

fn scalar_multiple(a: &Matrix) -> Option<f64> {
    let c = a[(0, 0)];
    let m = a.nrows();
    if is_diagonal(a) && (0..m).all(|i| a[(i, i)] == c) {
        Some(c)
    } else {
        None
    }
}

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree 13 Padé approximant.
pub fn mat_exp(a: &Matrix) -> Result<Matrix> {
    check_square(a)?;
    Ok(exp_unchecked(a))
}

fn exp_unchecked(a: &Matrix) -> Matrix {
    let m = a.nrows();
    if m == 1 {
        return Matrix::from_element(1, 1, a[(0, 0)].exp());
    }
    if is_diagonal(a) {
        return Matrix::from_diagonal(&a.diagonal().map(f64::exp));
    }
    if m == 2 {
        return exp_2x2(a);
    }
    pade_exp(a)
}

fn pade_exp(a: &Matrix) -> Matrix {
    let m = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let b = &PADE13;
    let id = Matrix::identity(m, m);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

// Closed form for 2x2: exp(A) = e^{t/2} [cosh(k) I + sinh(k)/k (A - t/2 I)], k^2 = ((a-d)/2)^2 + bc.
fn exp_2x2(a: &Matrix) -> Matrix {
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let half_tr = 0.5 * (p + s);
    let h = 0.5 * (p - s);
    let disc = h * h + q * r;
    let (c, sk) = if disc > 0.0 {
        let k = disc.sqrt();
        (k.cosh(), if k < 1e-8 { 1.0 + disc / 6.0 } else { k.sinh() / k })
    } else if disc < 0.0 {
        let k = (-disc).sqrt();
        (k.cos(), if k < 1e-8 { 1.0 + disc / 6.0 } else { k.sin() / k })
    } else {
        (1.0, 1.0)
    };
    let e = half_tr.exp();
    Matrix::from_row_slice(2, 2, &[e * (c + sk * h), e * sk * q, e * sk * r, e * (c - sk * h)])
}

/// `c^M = exp(log(c) M)` for an arbitrary square matrix.
pub fn matrix_power(m: &Matrix, c: f64) -> Result<Matrix> {
    if !(c > 0.0) || !c.is_finite() {
        return invalid(format!("base must be positive and finite, got {c}"));
    }
    check_square(m)?;
    Ok(exp_unchecked(&(m * c.ln())))
}

/// `c^E` for an exponent with cached metadata.
pub fn real_power(e: &OperatorSpec, c: f64) -> Result<Matrix> {
    matrix_power(&e.entries, c)
}

/// Returns `(re_eig_min, re_eig_max, trace)`.
pub fn spectral_bounds(a: &Matrix) -> Result<(f64, f64, f64)> {
    check_square(a)?;
    let trace = a.trace();
    let eigs = eigenvalues(a)?;
    let re_min = eigs.iter().map(|z| z.0).fold(f64::INFINITY, f64::min);
    let re_max = eigs.iter().map(|z| z.0).fold(f64::NEG_INFINITY, f64::max);
    Ok((re_min, re_max, trace))
}

/// Eigenvalues as `(re, im)` pairs.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    check_square(a)?;
    if a.nrows() == 1 {
        return Ok(vec![(a[(0, 0)], 0.0)]);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NonConvergence("Schur iteration for eigenvalues".into()))?;
    let eigs = schur.complex_eigenvalues();
    let out: Vec<(f64, f64)> = eigs.iter().map(|z| (z.re, z.im)).collect();
    if out.iter().any(|z| !z.0.is_finite() || !z.1.is_finite()) {
        return Err(Error::NonConvergence("eigenvalues are not finite".into()));
    }
    Ok(out)
}

pub fn is_in_q(a: &Matrix) -> Result<bool> {
    Ok(spectral_bounds(a)?.0 > 0.0)
}

/// Spectral (largest singular value) norm.
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].abs();
    }
    if a.nrows() == 2 && a.ncols() == 2 {
        let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
        let fro2 = p * p + q * q + r * r + s * s;
        let det = p * s - q * r;
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        return (0.5 * (fro2 + disc)).sqrt();
    }
    a.singular_values().max()
}
