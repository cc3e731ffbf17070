//! Property tests for packing, chunking, estimation and detection invariants.

use proptest::prelude::*;

use cellfree_ota::combiner::{lmmse_chunk_estimate, unpack_gramian, unpack_matched_filter};
use cellfree_ota::config::Modulation;
use cellfree_ota::detectors::{exact_llrs, sphere_maxlog_llrs, sphere_ml, whiten, TriangularModel};
use cellfree_ota::fronthaul::{
    average_power, chunk, num_transmissions, pack_gramian, pack_matched_filter, scale_factor, triangle_index,
    triangle_len, triangle_pair, unchunk,
};
use cellfree_ota::linalg::{complex_gaussian_matrix, CMatrix, C64};
use cellfree_ota::modulation::Constellation;
use cellfree_ota::rng::substream;

fn gaussian(rows: usize, cols: usize, seed: u64) -> CMatrix {
    complex_gaussian_matrix(rows, cols, &mut substream(seed, 200, 0))
}

fn gram_of(n: usize, k: usize, seed: u64) -> CMatrix {
    let h = gaussian(n, k, seed);
    h.adjoint() * h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn triangle_index_is_a_bijection(k in 1usize..20) {
        let mut seen = vec![false; triangle_len(k)];
        let mut expected = 0;
        for j in 0..k {
            for jp in j..k {
                let n = triangle_index(j, jp, k);
                // row-wise enumeration order
                prop_assert_eq!(n, expected);
                prop_assert!(!seen[n]);
                seen[n] = true;
                prop_assert_eq!(triangle_pair(n, k), (j, jp));
                expected += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn gramian_pack_unpack_roundtrip(k in 1usize..10, n in 1usize..8, seed in any::<u64>()) {
        let t = gram_of(n, k, seed);
        let x = pack_gramian(&t).data;
        prop_assert_eq!(x.len(), triangle_len(k));
        let back = unpack_gramian(&x, k).unwrap();
        // the diagonal of a computed Gramian can carry a rounding-level imaginary part
        let err = (&back - &t).norm() / t.norm();
        prop_assert!(err < 1e-14);
        prop_assert_eq!(&back, &back.adjoint());
    }

    #[test]
    fn unpack_of_any_vector_is_hermitian(k in 1usize..10, seed in any::<u64>()) {
        let x = gaussian(triangle_len(k), 1, seed).column(0).clone_owned();
        let t = unpack_gramian(&x, k).unwrap();
        prop_assert_eq!(&t, &t.adjoint());
        for j in 0..k {
            for jp in j..k {
                let v = x[triangle_index(j, jp, k)];
                let expected = if j == jp { C64::new(v.re, 0.0) } else { v };
                prop_assert_eq!(t[(j, jp)], expected);
            }
        }
    }

    #[test]
    fn matched_filter_pack_unpack_roundtrip(k in 1usize..10, tau in 1usize..20, seed in any::<u64>()) {
        let mf = gaussian(k, tau, seed);
        let x = pack_matched_filter(&mf).data;
        for t in 0..tau {
            for u in 0..k {
                prop_assert_eq!(x[t * k + u], mf[(u, t)]);
            }
        }
        prop_assert_eq!(unpack_matched_filter(&x, k, tau).unwrap(), mf);
    }

    #[test]
    fn chunk_unchunk_roundtrip(len in 1usize..100, m in 1usize..9, seed in any::<u64>()) {
        let x = gaussian(len, 1, seed).column(0).clone_owned();
        let xbar = chunk(&x, m);
        prop_assert_eq!(xbar.shape(), (m, num_transmissions(len, m)));
        prop_assert!(xbar.ncols() * m >= len && (xbar.ncols() - 1) * m < len);
        prop_assert!(xbar.as_slice()[len..].iter().all(|z| *z == C64::new(0.0, 0.0)));
        prop_assert_eq!(unchunk(&xbar, len).unwrap(), x);
    }

    #[test]
    fn lmmse_with_vanishing_noise_returns_the_ls_solution(m in 1usize..6, seed in any::<u64>(), rho in 0.1f64..100.0) {
        let a = gaussian(m, m + 2, seed);
        let cov = &a * a.adjoint();
        let mu = gaussian(m, 1, seed ^ 1).column(0).clone_owned();
        let x = gaussian(m, 1, seed ^ 2).column(0).clone_owned();
        // ρ_c → ∞ at fixed z/√ρ_c: the prior stops mattering
        let rho_c = rho * 1e14;
        let est = lmmse_chunk_estimate(&x.scale(rho_c.sqrt()), &mu, &cov, rho_c).unwrap();
        prop_assert!((&est - &x).norm() <= 1e-6 * x.norm().max(1.0));
    }

    #[test]
    fn power_feedback_hits_the_budget(powers in proptest::collection::vec(1e-6f64..1e3, 1..20), budget in 1e-3f64..1e12) {
        let rho_c = scale_factor(&powers, budget).unwrap();
        let max = powers.iter().copied().fold(0.0, f64::max);
        prop_assert!((rho_c * max / budget - 1.0).abs() < 1e-12);
        prop_assert!(powers.iter().all(|p| rho_c * p <= budget * (1.0 + 1e-12)));
    }

    #[test]
    fn identity_moments_give_closed_form_power(len in 1usize..60, m in 1usize..7, rho_c in 1e-3f64..1e3) {
        let moment = CMatrix::identity(len, len);
        let eww = CMatrix::identity(m, m);
        let p = average_power(&moment, &eww, rho_c);
        let expected = rho_c * len as f64 / num_transmissions(len, m) as f64;
        prop_assert!((p - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn whitening_reproduces_the_gramian(k in 1usize..7, extra in 0usize..6, seed in any::<u64>()) {
        let t = gram_of(k + extra, k, seed);
        let mf = gaussian(k, 3, seed ^ 5);
        let w = whiten(&t, &mf);
        let err = (w.h_bar.adjoint() * &w.h_bar - &t).norm() / t.norm();
        prop_assert!(err < 1e-8);
        // H̄^H ȳ = t
        let back = w.h_bar.adjoint() * &w.y_bar;
        prop_assert!((&back - &mf).norm() / mf.norm() < 1e-8);
    }

    #[test]
    fn maxlog_llr_sign_agrees_with_ml_bits(k in 1usize..5, seed in any::<u64>(), snr_db in -5.0f64..20.0) {
        let c = Constellation::new(Modulation::Qam16);
        let rho = 10f64.powf(snr_db / 10.0);
        let h = gaussian(k + 2, k, seed);
        let y = gaussian(k + 2, 1, seed ^ 9).column(0).clone_owned();
        let model = TriangularModel::new(&h, rho);
        let yr = model.rotate(&y);
        let ml = sphere_ml(&model, &yr, &c);
        let llrs = sphere_maxlog_llrs(&model, &yr, &c);
        for (u, l) in llrs.iter().enumerate() {
            for (b, &v) in l.iter().enumerate() {
                // ln P(1)/P(0): the ML bit has the non-losing sign
                if c.bit(ml.labels[u], b) == 1 {
                    prop_assert!(v >= 0.0);
                } else {
                    prop_assert!(v <= 0.0);
                }
            }
        }
    }

    #[test]
    fn maxlog_is_within_log_cardinality_of_exact(k in 1usize..4, seed in any::<u64>()) {
        let c = Constellation::new(Modulation::Qam4);
        let h = gaussian(k + 1, k, seed);
        let y = gaussian(k + 1, 1, seed ^ 3).column(0).clone_owned();
        let model = TriangularModel::new(&h, 1.0);
        let yr = model.rotate(&y);
        let approx = sphere_maxlog_llrs(&model, &yr, &c);
        let exact = exact_llrs(&model, &yr, &c, 1 << 12).unwrap();
        for (a, e) in approx.iter().flatten().zip(exact.iter().flatten()) {
            // each side of the exact LLR sums |S|^K / 2 terms
            let slack = ((c.len() as f64).powi(k as i32) / 2.0).ln();
            prop_assert!((a - e).abs() <= slack + 1e-9);
        }
    }
}

#[test]
fn triangle_index_examples() {
    assert_eq!(triangle_index(0, 0, 8), 0);
    assert_eq!(triangle_index(1, 1, 8), 8);
    assert_eq!(triangle_index(7, 7, 8), 35);
    assert_eq!(triangle_len(8), 36);
}
