use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_condition, hermitian_eigen, hermitian_function, hpd_cholesky, hpd_solve, CMatrix, C64,
};
use crate::modulation::Constellation;

use super::whiten::CLIP_EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDetection {
    /// Soft symbol estimates, `K × τ_u`.
    pub estimate: CMatrix,
    pub clipped: usize,
}

/// Replaces eigenvalues below `ε` by `ε`; returns the repaired matrix and the count.
pub fn clip_eigenvalues(t: &CMatrix) -> (CMatrix, usize) {
    let (values, vectors) = hermitian_eigen(t);
    let clipped = values.iter().filter(|&&v| v < CLIP_EPSILON).count();
    (
        hermitian_function(&values, &vectors, |v| v.max(CLIP_EPSILON)),
        clipped,
    )
}

/// `ŝ = √ρ (ρ T + I)^{-1} t`.
pub fn lmmse_detect(t_gram: &CMatrix, t_mf: &CMatrix, rho_ul: f64) -> Result<LinearDetection> {
    check_dims(t_gram, t_mf)?;
    let k = t_gram.nrows();
    let system = |g: &CMatrix| g.scale(rho_ul) + CMatrix::identity(k, k);
    let (solution, clipped) = match hpd_solve(&system(t_gram), t_mf) {
        Ok(x) => (x, 0),
        Err(_) => {
            let (g, clipped) = clip_eigenvalues(t_gram);
            (hpd_solve(&system(&g), t_mf)?, clipped)
        }
    };
    Ok(LinearDetection {
        estimate: solution * C64::new(rho_ul.sqrt(), 0.0),
        clipped,
    })
}

/// Condition number of `T` above which LS detection is refused.
pub const LS_MAX_CONDITION: f64 = 1e12;

/// `ŝ = ρ^{-1/2} T^{-1} t`.
pub fn ls_detect(t_gram: &CMatrix, t_mf: &CMatrix, rho_ul: f64) -> Result<LinearDetection> {
    check_dims(t_gram, t_mf)?;
    if !(rho_ul > 0.0) {
        return Err(Error::Domain(format!("rho_ul must be positive, got {rho_ul}")));
    }
    let (g, clipped) = match hpd_cholesky(t_gram) {
        Ok(_) => (t_gram.clone(), 0),
        Err(_) => clip_eigenvalues(t_gram),
    };
    let condition = hermitian_condition(&g);
    if !(condition < LS_MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(LinearDetection {
        estimate: hpd_solve(&g, t_mf)?.unscale(rho_ul.sqrt()),
        clipped,
    })
}

fn check_dims(t_gram: &CMatrix, t_mf: &CMatrix) -> Result<()> {
    if !t_gram.is_square() || t_gram.nrows() != t_mf.nrows() {
        return Err(Error::Dimension(format!(
            "T is {}x{} but t has {} rows",
            t_gram.nrows(),
            t_gram.ncols(),
            t_mf.nrows()
        )));
    }
    Ok(())
}

/// Nearest-point labels, indexed `[ue][t]`.
pub fn hard_decisions(estimate: &CMatrix, constellation: &Constellation) -> Vec<Vec<usize>> {
    (0..estimate.nrows())
        .map(|u| {
            (0..estimate.ncols())
                .map(|t| constellation.nearest(estimate[(u, t)]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, relative_frobenius};
    use crate::rng::substream;

    #[test]
    fn lmmse_scalar_shrinkage() {
        let mut rng = substream(1, 0, 0);
        let s = complex_gaussian_matrix(3, 2, &mut rng);
        let rho: f64 = 4.0;
        let t = s.scale(rho.sqrt());
        let out = lmmse_detect(&CMatrix::identity(3, 3), &t, rho).unwrap();
        assert!(relative_frobenius(&out.estimate, &s.scale(rho / (rho + 1.0))) < 1e-14);
        assert_eq!(out.clipped, 0);
    }

    #[test]
    fn lmmse_tends_to_zf() {
        let mut rng = substream(2, 0, 0);
        let h = complex_gaussian_matrix(6, 3, &mut rng);
        let s = complex_gaussian_matrix(3, 2, &mut rng);
        let rho: f64 = 1e9;
        let gram = h.adjoint() * &h;
        let t = (&gram * &s).scale(rho.sqrt());
        let lmmse = lmmse_detect(&gram, &t, rho).unwrap().estimate;
        let zf = ls_detect(&gram, &t, rho).unwrap().estimate;
        assert!(relative_frobenius(&lmmse, &zf) < 1e-6);
        assert!(relative_frobenius(&zf, &s) < 1e-10);
    }

    #[test]
    fn ls_scaling_cancels() {
        let mut rng = substream(3, 0, 0);
        let s = complex_gaussian_matrix(2, 1, &mut rng);
        let rho: f64 = 2.5;
        let t = s.scale(2.0 * rho.sqrt());
        let out = ls_detect(&CMatrix::identity(2, 2).scale(2.0), &t, rho).unwrap();
        assert!(relative_frobenius(&out.estimate, &s) < 1e-14);
    }

    #[test]
    fn ls_rejects_singular() {
        let mut rng = substream(4, 0, 0);
        // rank-2 Gramian for three UEs
        let h = complex_gaussian_matrix(2, 3, &mut rng);
        let gram = h.adjoint() * &h;
        let t = complex_gaussian_matrix(3, 1, &mut rng);
        assert!(matches!(ls_detect(&gram, &t, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn lmmse_survives_indefinite() {
        let mut gram = CMatrix::identity(2, 2);
        gram[(1, 1)] = C64::new(-5.0, 0.0);
        let t = CMatrix::from_element(2, 1, C64::new(1.0, 0.0));
        let out = lmmse_detect(&gram, &t, 1.0).unwrap();
        assert_eq!(out.clipped, 1);
        assert!(out.estimate.iter().all(|z| z.re.is_finite()));
    }
}
