//! Independent reference computations shared by the integration tests.
//!
//! Everything here works on the stacked `LN × K` channel and avoids the
//! library's own per-AP, whitening and tree-search code paths.

#![allow(dead_code)]

use cellfree_ota::linalg::{CMatrix, CVector, C64};

pub fn stack_rows(blocks: &[CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    CMatrix::from_fn(rows, cols, |r, c| {
        let mut r = r;
        for b in blocks {
            if r < b.nrows() {
                return b[(r, c)];
            }
            r -= b.nrows();
        }
        unreachable!()
    })
}

/// `(H^H H, H^H Y)` of the stacked system.
pub fn centralized_stats(h: &[CMatrix], y: &[CMatrix]) -> (CMatrix, CMatrix) {
    let hs = stack_rows(h);
    let ys = stack_rows(y);
    let ha = hs.adjoint();
    (&ha * &hs, ha * ys)
}

/// `√ρ H^H (ρ H H^H + I)^{-1} Y` on the stacked system (push-through form).
pub fn centralized_lmmse(h: &[CMatrix], y: &[CMatrix], rho: f64) -> CMatrix {
    let hs = stack_rows(h);
    let ys = stack_rows(y);
    let n = hs.nrows();
    let a = (&hs * hs.adjoint()).scale(rho) + CMatrix::identity(n, n);
    let x = a.lu().solve(&ys).expect("ρHH^H + I is invertible");
    (hs.adjoint() * x).scale(rho.sqrt())
}

pub fn nearest(points: &[C64], z: C64) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if (z - p).norm_sqr() < (z - points[best]).norm_sqr() {
            best = i;
        }
    }
    best
}

/// Labels of every hypothesis in lexicographic order (UE 0 most significant).
pub fn hypotheses(k: usize, q: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..q.pow(k as u32)).map(move |mut idx| {
        let mut labels = vec![0; k];
        for u in (0..k).rev() {
            labels[u] = idx % q;
            idx /= q;
        }
        labels
    })
}

/// `argmin_s ‖y − √ρ H s‖²` by enumeration, first minimum in lexicographic order.
pub fn stacked_ml(h: &CMatrix, y: &CVector, rho: f64, points: &[C64]) -> (Vec<usize>, f64) {
    let k = h.ncols();
    let mut best = (Vec::new(), f64::INFINITY);
    for labels in hypotheses(k, points.len()) {
        let s = CVector::from_fn(k, |u, _| points[labels[u]]);
        let d = (y - (h * s).scale(rho.sqrt())).norm_squared();
        if d < best.1 {
            best = (labels, d);
        }
    }
    best
}

/// Relative Frobenius error `‖a − b‖ / ‖b‖`.
pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
