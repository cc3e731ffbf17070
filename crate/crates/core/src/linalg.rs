//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues below this are treated as zero when taking square roots.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// One draw of CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows × cols` matrix of i.i.d. CN(0, 1) entries, filled column-major.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.norm().max(1.0);
    (a - a.adjoint()).norm() <= tol * scale
}

/// Averages `a` with its adjoint.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix: `(eigenvalues, eigenvectors)`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `U · diag(f(λ)) · U^H` for a Hermitian matrix.
pub fn hermitian_function(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// Hermitian PSD square root `R^{1/2}` with eigenvalues in `[-tol·λmax, 0)` clipped to zero.
///
/// Fails on eigenvalues below that band.
pub fn psd_sqrt(r: &CMatrix) -> Result<CMatrix> {
    if !r.is_square() {
        return Err(Error::Dimension(format!(
            "square matrix expected, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    if r.nrows() == 0 {
        return Ok(r.clone());
    }
    let (values, vectors) = hermitian_eigen(r);
    let max = values.iter().fold(0f64, |m, v| m.max(v.abs()));
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * max.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(hermitian_function(&values, &vectors, |v| {
        if v > PSD_TOLERANCE * max {
            v.sqrt()
        } else {
            0.0
        }
    }))
}

/// Ratio of extreme eigenvalue magnitudes of a Hermitian matrix.
pub fn hermitian_condition(a: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(a);
    let max = values.iter().fold(0f64, |m, v| m.max(v.abs()));
    let min = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cholesky factor of a Hermitian positive definite matrix.
///
/// Complex square roots never fail, so definiteness is checked on the factor's diagonal.
pub fn hpd_cholesky(a: &CMatrix) -> Result<Cholesky<C64, Dyn>> {
    let chol = hermitian_part(a).cholesky().ok_or(Error::Singular {
        condition: f64::INFINITY,
    })?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re || !d.re.is_finite() {
            return Err(Error::NotPsd {
                min_eigenvalue: hermitian_eigen(a).0.into_iter().fold(f64::INFINITY, f64::min),
            });
        }
    }
    Ok(chol)
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(hpd_cholesky(a)?.inverse())
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn hpd_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Ok(hpd_cholesky(a)?.solve(b))
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute error when `b` is zero.
pub fn relative_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}
