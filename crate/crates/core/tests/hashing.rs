use minwise::hashing::{
    build_ensemble, expand_bbit, min_hash, min_hash_with, random_projection, random_sign_matrix, second_min_hash,
    CompressorRegistry, HashConfig, MinHashOptions, PermutationMode, Variant,
};
use minwise::{Error, SparseMatrix};
use proptest::prelude::*;

fn design() -> impl Strategy<Value = SparseMatrix> {
    (2usize..20).prop_flat_map(|p| {
        proptest::collection::vec(proptest::collection::btree_set(0..p, 0..=p.min(6)), 1..12).prop_map(move |rows| {
            let rows: Vec<Vec<usize>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
            SparseMatrix::binary(p, &rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_hash_picks_the_smallest_rank(x in design(), l in 1usize..6, seed in any::<u64>()) {
        let e = build_ensemble(&HashConfig::new(Variant::BBitShuffled, l, 2, seed), x.n_cols()).unwrap();
        let out = min_hash(&x, &e).unwrap();
        for j in 0..l {
            let ranks = e.ranks(j);
            for i in 0..x.n_rows() {
                let (idx, _) = x.row(i);
                match out.h(i, j) {
                    None => prop_assert!(idx.is_empty()),
                    Some(h) => {
                        prop_assert!(idx.contains(&(h as u32)));
                        let min = idx.iter().map(|&k| ranks[k as usize]).min().unwrap();
                        prop_assert_eq!(out.m(i, j).unwrap(), min as u64);
                        prop_assert_eq!(ranks[h], min);
                    }
                }
            }
        }
    }

    #[test]
    fn bbit_expansion_is_one_hot(x in design(), b in 1u32..4, seed in any::<u64>()) {
        let e = build_ensemble(&HashConfig::new(Variant::BBitPlain, 3, b, seed), x.n_cols()).unwrap();
        let s = expand_bbit(&min_hash(&x, &e).unwrap(), &e).unwrap().to_dense();
        let w = 1usize << b;
        for i in 0..x.n_rows() {
            for j in 0..3 {
                let block: f64 = (0..w).map(|c| s[(i, j * w + c)]).sum();
                prop_assert_eq!(block, if x.row_nnz(i) == 0 { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn random_sign_copies_magnitude(x in design(), seed in any::<u64>()) {
        let e = build_ensemble(&HashConfig::new(Variant::RandomSign, 4, 1, seed), x.n_cols()).unwrap();
        let out = min_hash(&x, &e).unwrap();
        let s = random_sign_matrix(&x, &out, &e).unwrap();
        for i in 0..x.n_rows() {
            for j in 0..4 {
                let expect = out.h(i, j).map_or(0.0, |h| x.get(i, h) * e.sign(h, j));
                prop_assert_eq!(s[(i, j)], expect);
            }
        }
    }

    #[test]
    fn hashed_scores_agree_with_materialized_ranks(x in design(), seed in any::<u64>()) {
        let mut cfg = HashConfig::new(Variant::BBitShuffled, 3, 1, seed);
        cfg.mode = PermutationMode::HashedScores;
        let e = build_ensemble(&cfg, x.n_cols()).unwrap();
        let raw = min_hash(&x, &e).unwrap();
        let ranked = min_hash_with(&x, &e, MinHashOptions { materialize_ranks: true }).unwrap();
        prop_assert_eq!(raw.h, ranked.h);
    }

    #[test]
    fn second_min_differs_from_min(x in design(), seed in any::<u64>()) {
        let e = build_ensemble(&HashConfig::new(Variant::RandomSign, 3, 1, seed), x.n_cols()).unwrap();
        let first = min_hash(&x, &e).unwrap();
        let (second, _) = second_min_hash(&x, &e).unwrap();
        for i in 0..x.n_rows() {
            for j in 0..3 {
                match x.row_nnz(i) {
                    0 | 1 => prop_assert_eq!(second.h(i, j), None),
                    _ => prop_assert_ne!(second.h(i, j), first.h(i, j)),
                }
            }
        }
    }
}

#[test]
fn ensembles_are_reproducible() {
    let cfg = HashConfig::new(Variant::BBitShuffled, 16, 3, 42);
    let a = build_ensemble(&cfg, 50).unwrap();
    let b = build_ensemble(&cfg, 50).unwrap();
    for l in 0..16 {
        assert_eq!(a.ranks(l), b.ranks(l));
        let mut sorted = a.ranks(l).into_owned();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=50).collect::<Vec<u32>>());
    }
    let c = build_ensemble(&HashConfig { seed: 43, ..cfg }, 50).unwrap();
    assert!((0..16).any(|l| a.ranks(l) != c.ranks(l)));
}

#[test]
fn shuffled_codes_are_balanced() {
    // Every code in 0..2^b should be used roughly equally over many ranks.
    let e = build_ensemble(&HashConfig::new(Variant::BBitShuffled, 200, 2, 9), 100).unwrap();
    let mut counts = [0usize; 4];
    for l in 0..200 {
        for m in 1..=100u64 {
            counts[e.shuffle_code(l, m).unwrap() as usize] += 1;
        }
    }
    let expect = 20_000.0 / 4.0;
    let se = (20_000.0 * 0.25 * 0.75f64).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - expect).abs() < 4.0 * se), "{counts:?}");
}

#[test]
fn registry_selects_by_name() {
    let reg = CompressorRegistry::default();
    assert_eq!(reg.names(), vec!["bbit", "bbit-shuffled", "random-sign", "random-projection"]);
    let x = SparseMatrix::from_rows(4, &[vec![(0, 0.5), (2, -1.0)], vec![(1, 0.25)]]).unwrap();
    let cfg = HashConfig::new(Variant::RandomSign, 5, 2, 1);
    assert!(matches!(reg.get("bbit").unwrap().compress(&x, &cfg), Err(Error::Incompatible(_))));
    let rs = reg.get("random-sign").unwrap().compress(&x, &cfg).unwrap();
    assert_eq!(rs.s.shape(), (2, 5));
    let xb = SparseMatrix::binary(4, &[vec![0, 2], vec![1]]).unwrap();
    let bb = reg.get("bbit-shuffled").unwrap().compress(&xb, &cfg).unwrap();
    assert_eq!(bb.s.shape(), (2, 20));
    let rp = reg.get("random-projection").unwrap().compress(&x, &cfg).unwrap();
    assert_eq!(rp.s, random_projection(&x, 5, 1).unwrap());
    assert!(reg.get("simhash").is_err());
}
