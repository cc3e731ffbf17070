use crate::linalg::{hermitian_eigen, hermitian_function, CMatrix};

/// Eigenvalue floor applied before square roots and inverses of `T`.
pub const CLIP_EPSILON: f64 = 1e-12;

/// `ȳ = H̄ s √ρ + w` with `H̄ = T^{1/2}`; `w` is white when `T` is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedModel {
    pub h_bar: CMatrix,
    /// Whitened observations, one column per channel use.
    pub y_bar: CMatrix,
    pub clipped: usize,
}

pub fn whiten(t_gram: &CMatrix, t_mf: &CMatrix) -> WhitenedModel {
    let (values, vectors) = hermitian_eigen(t_gram);
    let clipped = values.iter().filter(|&&v| v < CLIP_EPSILON).count();
    let h_bar = hermitian_function(&values, &vectors, |v| v.max(CLIP_EPSILON).sqrt());
    let inv_sqrt = hermitian_function(&values, &vectors, |v| v.max(CLIP_EPSILON).sqrt().recip());
    WhitenedModel {
        h_bar,
        y_bar: inv_sqrt * t_mf,
        clipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, relative_frobenius};
    use crate::rng::substream;

    #[test]
    fn identity_gram() {
        let mut rng = substream(1, 0, 0);
        let t = complex_gaussian_matrix(3, 4, &mut rng);
        let m = whiten(&CMatrix::identity(3, 3), &t);
        assert!(relative_frobenius(&m.h_bar, &CMatrix::identity(3, 3)) < 1e-14);
        assert!(relative_frobenius(&m.y_bar, &t) < 1e-14);
        assert_eq!(m.clipped, 0);
    }

    #[test]
    fn reconstructs_gram() {
        let mut rng = substream(2, 0, 0);
        for _ in 0..100 {
            let h = complex_gaussian_matrix(6, 4, &mut rng);
            let t = h.adjoint() * &h;
            let m = whiten(&t, &CMatrix::zeros(4, 1));
            assert!(relative_frobenius(&(m.h_bar.adjoint() * &m.h_bar), &t) < 1e-8);
        }
    }

    #[test]
    fn counts_clipped_eigenvalues() {
        let mut rng = substream(3, 0, 0);
        let h = complex_gaussian_matrix(2, 4, &mut rng);
        let m = whiten(&(h.adjoint() * &h), &CMatrix::zeros(4, 1));
        assert_eq!(m.clipped, 2);
    }
}
