use minwise::io::{read_container, read_svmlight, write_container, write_svmlight, CsrData, SvmlightOptions};
use minwise::sparse::pad_equal_sparsity;
use minwise::{sparsity_profile, Error, SparseMatrix};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = (SparseMatrix, Vec<f64>)> {
    (1usize..30).prop_flat_map(|p| {
        let row = proptest::collection::btree_map(0..p, -1.0f64..1.0, 0..=p.min(8));
        (proptest::collection::vec(row, 1..15), proptest::collection::vec(-5.0f64..5.0, 15)).prop_map(
            move |(rows, labels)| {
                let rows: Vec<Vec<(usize, f64)>> =
                    rows.into_iter().map(|r| r.into_iter().filter(|&(_, v)| v != 0.0).collect()).collect();
                let y = labels[..rows.len()].to_vec();
                (SparseMatrix::from_rows(p, &rows).unwrap(), y)
            },
        )
    })
}

proptest! {
    #[test]
    fn svmlight_round_trip((x, y) in matrix()) {
        let mut buf = Vec::new();
        write_svmlight(&mut buf, &x, &y).unwrap();
        let back = read_svmlight(&buf[..], SvmlightOptions { rescale: false, n_features: Some(x.n_cols()) }).unwrap();
        prop_assert_eq!(back.y, y);
        prop_assert_eq!(back.x, x);
    }

    #[test]
    fn container_round_trip((x, _) in matrix()) {
        let csr = CsrData::from_sparse(&x);
        let mut buf = Vec::new();
        write_container(&mut buf, &csr).unwrap();
        let back = read_container(&buf[..]).unwrap();
        prop_assert_eq!(&back, &csr);
        prop_assert_eq!(back.to_sparse().unwrap(), x.clone());
        prop_assert_eq!(CsrData::from_dense(&x.to_dense()), csr);
    }

    #[test]
    fn padding_equalizes_rows((x, _) in matrix()) {
        let supports: Vec<Vec<usize>> =
            (0..x.n_rows()).map(|i| x.row(i).0.iter().map(|&k| k as usize).collect()).collect();
        let b = SparseMatrix::binary(x.n_cols(), &supports).unwrap();
        let prof = sparsity_profile(&b);
        let padded = pad_equal_sparsity(&b).unwrap();
        let pp = sparsity_profile(&padded);
        prop_assert!(pp.is_equal());
        prop_assert_eq!(pp.q_max, prof.q_max);
        prop_assert_eq!(padded.n_cols(), b.n_cols() + prof.q_max - prof.q_min);
        for i in 0..b.n_rows() {
            for k in 0..b.n_cols() {
                prop_assert_eq!(padded.get(i, k), b.get(i, k));
            }
        }
    }
}

#[test]
fn svmlight_rejects_malformed_lines() {
    let cases = ["1 2:0.5 2:0.1\n", "1 0:0.5\n", "x 1:0.5\n", "1 1:0\n", "1 1:0.5\n0 3:nan\n", "1 1-0.5\n"];
    for text in cases {
        let err = read_svmlight(text.as_bytes(), SvmlightOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{text:?}: {err}");
    }
    let err = read_svmlight("1 1:0.5\n0 2:0.5 4:3\n".as_bytes(), SvmlightOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    assert!(matches!(read_svmlight("# nothing\n".as_bytes(), SvmlightOptions::default()), Err(Error::NoRows)));
}

#[test]
fn svmlight_rescale_and_width() {
    let d = read_svmlight(
        "1 1:2 3:-4 # comment\n\n0 2:1\n".as_bytes(),
        SvmlightOptions { rescale: true, n_features: Some(5) },
    )
    .unwrap();
    assert_eq!(d.scale, Some(4.0));
    assert_eq!(d.x.n_cols(), 5);
    assert_eq!(d.x.row(0).1, &[0.5, -1.0]);
    assert_eq!(d.y, vec![1.0, 0.0]);
    let narrow = read_svmlight("1 4:1\n".as_bytes(), SvmlightOptions { rescale: false, n_features: Some(2) });
    assert!(matches!(narrow, Err(Error::Shape(_))));
}

#[test]
fn container_rejects_corruption() {
    let x = SparseMatrix::binary(3, &[vec![0, 2], vec![1]]).unwrap();
    let mut buf = Vec::new();
    write_container(&mut buf, &CsrData::from_sparse(&x)).unwrap();
    assert!(matches!(read_container(&buf[..buf.len() - 1]), Err(Error::Format(_))));
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(read_container(&bad[..]), Err(Error::Format(_))));
}

#[test]
fn padding_needs_binary_input() {
    let x = SparseMatrix::from_rows(3, &[vec![(0, 0.5)], vec![(1, 1.0), (2, 1.0)]]).unwrap();
    assert!(matches!(pad_equal_sparsity(&x), Err(Error::Incompatible(_))));
}
