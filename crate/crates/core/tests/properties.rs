//! Property tests for the structural invariants: exact truncation
//! decomposition, transpose-invariant singular values, the eigenvalue
//! perturbation bound, and the signed pairing of the sparse spectrum.

use proptest::prelude::*;

use heavyedge::matrix::{self, SymMatrix};
use heavyedge::spectra;

fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, rows * cols)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncate_is_exact_decomposition(
        data in arb_matrix(6, 9),
        eps in 0.0f64..5.0,
    ) {
        let (above, below) = matrix::truncate_dense(6, 9, &data, eps).unwrap();
        let mut rebuilt = below.clone();
        for &(i, j, v) in &above.entries {
            let idx = i as usize * 9 + j as usize;
            prop_assert_eq!(rebuilt[idx], 0.0);
            rebuilt[idx] = v;
        }
        prop_assert_eq!(rebuilt, data);
        for &(_, _, v) in &above.entries {
            prop_assert!(v.abs() > eps);
        }
        for (idx, &v) in below.iter().enumerate() {
            let survived = above.entries.iter().any(|&(i, j, _)| i as usize * 9 + j as usize == idx);
            prop_assert!(survived || v.abs() <= eps);
        }
    }

    #[test]
    fn singular_values_transpose_invariant(data in arb_matrix(4, 7)) {
        let mut t = vec![0.0; 28];
        for i in 0..4 {
            for j in 0..7 {
                t[j * 4 + i] = data[i * 7 + j];
            }
        }
        let a = spectra::singular_values_dense(4, 7, &data);
        let b = spectra::singular_values_dense(7, 4, &t);
        prop_assert_eq!(a.len(), b.len());
        let scale = a.first().copied().unwrap_or(1.0).max(1.0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn weyl_bound_never_violated(
        m_data in arb_matrix(8, 8),
        e_data in arb_matrix(8, 8),
    ) {
        let mut m = SymMatrix::zeros(8);
        let mut e = SymMatrix::zeros(8);
        for i in 0..8 {
            for j in i..8 {
                m.set_sym(i, j, m_data[i * 8 + j]);
                e.set_sym(i, j, 0.3 * e_data[i * 8 + j]);
            }
        }
        let g = spectra::weyl_gap(&m, &e).unwrap();
        prop_assert!(g.gap <= g.frobenius_bound + 1e-12);
        prop_assert!(g.spectral_bound.value <= g.frobenius_bound + 1e-12);
    }

    #[test]
    fn sparse_spectrum_is_signed_pairs(
        cells in proptest::collection::vec((0usize..6, 6usize..12, -9.0f64..9.0), 1..5),
    ) {
        // place survivors in off-diagonal blocks of a 12x12 matrix, r = 6,
        // single upper block: spectrum must be the +/- singular values
        let mut m = SymMatrix::zeros(12);
        for &(i, j, v) in &cells {
            if v.abs() > 0.5 {
                m.set_sym(i, j, v);
            }
        }
        let (above, _) = matrix::truncate_sym(&m, 0.25).unwrap();
        if let spectra::SparseSpectrum::Spectrum { singulars } =
            spectra::sparse_truncated_spectrum(&above, 6).unwrap()
        {
            let dense = spectra::sym_eig(&m, false).unwrap();
            let (pos, neg) = spectra::spectrum_point_sets(&dense.values);
            prop_assert!(pos.len() >= singulars.len());
            prop_assert!(neg.len() >= singulars.len());
            for (k, s) in singulars.iter().enumerate() {
                prop_assert!((pos[k] - s.value).abs() <= 1e-9);
                prop_assert!((neg[k] + s.value).abs() <= 1e-9);
            }
        }
    }
}
