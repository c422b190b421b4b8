use proptest::prelude::*;

use ternaccel::container::{read_packed, write_packed};
use ternaccel::tlmm::{
    build_lookup_table, naive_ternary_gemv, pack_weights, tlmm_gemm, tlmm_gemv, zero_index, ActivationVector,
    TernaryMatrix,
};

fn dot(w: &[i8], x: &[i8]) -> i64 {
    w.iter().zip(x).map(|(&a, &b)| a as i64 * b as i64).sum()
}

fn matrix_and_vector(max_rows: usize, max_cols: usize) -> impl Strategy<Value = (TernaryMatrix, Vec<i8>)> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        (
            proptest::collection::vec(-1i8..=1, r * c),
            proptest::collection::vec(any::<i8>(), c),
        )
            .prop_map(move |(w, x)| (TernaryMatrix::new(r, c, w).unwrap(), x))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gemv_matches_dot_products((w, x) in matrix_and_vector(24, 70), g in 1usize..=6) {
        let p = pack_weights(&w, g).unwrap();
        let y = tlmm_gemv(&p, &ActivationVector::new(x.clone(), 1.0)).unwrap();
        prop_assert_eq!(y.len(), w.rows());
        for (r, &yr) in y.iter().enumerate() {
            prop_assert_eq!(yr as i64, dot(w.row(r), &x));
        }
    }

    #[test]
    fn pack_unpack_roundtrip((w, _) in matrix_and_vector(12, 40), g in 1usize..=6) {
        let p = pack_weights(&w, g).unwrap();
        prop_assert_eq!(p.unpack(), w.clone());
        prop_assert_eq!(p.groups_per_row(), w.cols().div_ceil(g));
        // Indices are base-3 with digit k encoding weight k-1, low digit first.
        for r in 0..w.rows() {
            for (gi, &idx) in p.row_indices(r).iter().enumerate() {
                let mut want = 0u32;
                for j in (0..g).rev() {
                    let c = gi * g + j;
                    let digit = if c < w.cols() { (w.row(r)[c] + 1) as u32 } else { 1 };
                    want = want * 3 + digit;
                }
                prop_assert_eq!(idx as u32, want);
            }
        }
    }

    #[test]
    fn table_entries_and_mirror(x in proptest::collection::vec(any::<i8>(), 1..=6)) {
        let t = build_lookup_table(&x);
        let g = x.len();
        for idx in 0..3u32.pow(g as u32) {
            let mut rest = idx;
            let mut want = 0i64;
            for &xv in &x {
                want += ((rest % 3) as i64 - 1) * xv as i64;
                rest /= 3;
            }
            prop_assert_eq!(t.get(idx as u16) as i64, want);
            prop_assert_eq!(t.get(t.mirror(idx as u16)) as i64, -want);
        }
        prop_assert_eq!(t.get(zero_index(g)), 0);
    }

    #[test]
    fn gemm_is_columnwise_gemv((w, x) in matrix_and_vector(8, 20), g in 1usize..=6) {
        let p = pack_weights(&w, g).unwrap();
        let xs = vec![ActivationVector::new(x.clone(), 1.0), ActivationVector::new(x.iter().map(|v| v.wrapping_neg()).collect(), 1.0)];
        let ys = tlmm_gemm(&p, &xs).unwrap();
        prop_assert_eq!(&ys[0], &tlmm_gemv(&p, &xs[0]).unwrap());
        prop_assert_eq!(&ys[1], &naive_ternary_gemv(&w, &xs[1]).unwrap());
    }

    #[test]
    fn container_roundtrip((w, _) in matrix_and_vector(10, 30), g in 1usize..=6) {
        let p = pack_weights(&w, g).unwrap();
        let mut buf = Vec::new();
        write_packed(&mut buf, &p).unwrap();
        prop_assert_eq!(read_packed(buf.as_slice()).unwrap(), p);
    }
}

#[test]
fn spec_index_examples() {
    let w = TernaryMatrix::new(1, 5, vec![1, 0, -1, 0, 1]).unwrap();
    let p = pack_weights(&w, 5).unwrap();
    assert_eq!(p.indices(), &[194]);
    assert_eq!(pack_weights(&TernaryMatrix::zeros(1, 5), 5).unwrap().indices(), &[121]);
    assert_eq!(zero_index(5), 121);
    assert_eq!(build_lookup_table(&[1, 0, 0, 0, 0]).get(194), 1);
    let t = build_lookup_table(&[3, -2, 1, 0, 5]);
    assert_eq!(t.get(242), 7);
    assert_eq!(t.get(121), 0);
    assert_eq!(t.get(0), -7);
}

#[test]
fn identity_returns_input() {
    let x: Vec<i8> = (0..23).map(|i| (i * 7 - 80) as i8).collect();
    for g in 1..=6 {
        let p = pack_weights(&TernaryMatrix::identity(23), g).unwrap();
        let y = tlmm_gemv(&p, &ActivationVector::new(x.clone(), 1.0)).unwrap();
        assert_eq!(y, x.iter().map(|&v| v as i32).collect::<Vec<_>>());
    }
}

#[test]
fn size_mismatch_is_error() {
    let p = pack_weights(&TernaryMatrix::zeros(3, 10), 5).unwrap();
    assert!(tlmm_gemv(&p, &ActivationVector::new(vec![1; 9], 1.0)).is_err());
}
