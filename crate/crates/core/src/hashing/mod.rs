//! Min-wise hashing: permutation ensembles, minimum hashes and the
//! b-bit and random-sign compressed matrices.

mod projection;
mod registry;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{mix64, stream_rng, sub_seed, Stream};
use crate::sparse::SparseMatrix;

pub use projection::{projection_matrix, random_projection};
pub use registry::{Compressed, Compressor, CompressorRegistry};

/// Sentinel for "row has no non-zero entry" in `H`.
pub const EMPTY: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// b-bit min-wise hashing keeping the lowest `b` bits of the minimum rank.
    #[serde(rename = "bbit")]
    BBitPlain,
    /// b-bit min-wise hashing with an independent uniform recoding per permutation.
    BBitShuffled,
    /// Signed value at the minimising column.
    RandomSign,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::BBitPlain => "bbit",
            Variant::BBitShuffled => "bbit-shuffled",
            Variant::RandomSign => "random-sign",
        }
    }

    pub fn is_bbit(self) -> bool {
        !matches!(self, Variant::RandomSign)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bbit" | "bbit-plain" => Ok(Variant::BBitPlain),
            "bbit-shuffled" => Ok(Variant::BBitShuffled),
            "random-sign" => Ok(Variant::RandomSign),
            _ => invalid(format!("unknown variant `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    /// Explicit uniform permutations, `O(pL)` memory.
    #[default]
    FisherYates,
    /// A 64-bit score per `(l, k)`; ties go to the smaller column index.
    HashedScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashConfig {
    pub l: usize,
    pub b: u32,
    pub variant: Variant,
    #[serde(default)]
    pub mode: PermutationMode,
    pub seed: u64,
}

impl HashConfig {
    pub fn new(variant: Variant, l: usize, b: u32, seed: u64) -> Self {
        Self { l, b, variant, mode: PermutationMode::FisherYates, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return invalid("L must be at least 1");
        }
        if self.variant.is_bbit() && !(1..=24).contains(&self.b) {
            return invalid(format!("b must be in 1..=24, got {}", self.b));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Perms {
    /// `rank[l * p + k]`, 1-based.
    Ranks(Vec<u32>),
    /// One score key per permutation.
    Scores(Vec<u64>),
}

#[derive(Debug, Clone)]
enum Signs {
    Stored(Vec<i8>),
    Hashed(Vec<u64>),
}

/// `L` random permutations of `{1..p}` together with the per-permutation sign
/// vectors or recoding maps that the chosen variant needs.
#[derive(Debug, Clone)]
pub struct HashEnsemble {
    p: usize,
    l: usize,
    b: u32,
    variant: Variant,
    perms: Perms,
    signs: Option<Signs>,
    /// `shuffle[l * p + rank - 1]` in `0..2^b`.
    shuffle: Option<Vec<u32>>,
}

pub fn build_ensemble(config: &HashConfig, p: usize) -> Result<HashEnsemble> {
    config.validate()?;
    if p == 0 {
        return invalid("p must be at least 1");
    }
    if p > u32::MAX as usize - 1 {
        return invalid("p too large");
    }
    let (l, seed) = (config.l, config.seed);
    // Monte Carlo loops rebuild ensembles thousands of times; say it once.
    static WIDE_B: std::sync::Once = std::sync::Once::new();
    if config.variant.is_bbit() && (1u64 << config.b) > p as u64 {
        WIDE_B.call_once(|| log::warn!("2^b = {} exceeds p = {p}; some codes are never produced", 1u64 << config.b));
    }
    let perms = match config.mode {
        PermutationMode::FisherYates => {
            let mut ranks = vec![0u32; l * p];
            ranks.par_chunks_mut(p).enumerate().for_each(|(li, chunk)| {
                let mut rng = stream_rng(seed, Stream::Permutation, li as u64);
                for (k, r) in chunk.iter_mut().enumerate() {
                    *r = k as u32 + 1;
                }
                chunk.shuffle(&mut rng);
            });
            Perms::Ranks(ranks)
        }
        PermutationMode::HashedScores => {
            Perms::Scores((0..l).map(|li| sub_seed(seed, Stream::Score, li as u64)).collect())
        }
    };
    let signs = match (config.variant, config.mode) {
        (Variant::RandomSign, PermutationMode::FisherYates) => {
            let mut s = vec![0i8; l * p];
            s.par_chunks_mut(p).enumerate().for_each(|(li, chunk)| {
                let mut rng = stream_rng(seed, Stream::Sign, li as u64);
                for v in chunk.iter_mut() {
                    *v = if rng.random::<bool>() { 1 } else { -1 };
                }
            });
            Some(Signs::Stored(s))
        }
        (Variant::RandomSign, PermutationMode::HashedScores) => {
            Some(Signs::Hashed((0..l).map(|li| sub_seed(seed, Stream::SignScore, li as u64)).collect()))
        }
        _ => None,
    };
    let shuffle = (config.variant == Variant::BBitShuffled).then(|| {
        let width = 1u32 << config.b;
        let mut s = vec![0u32; l * p];
        s.par_chunks_mut(p).enumerate().for_each(|(li, chunk)| {
            let mut rng = stream_rng(seed, Stream::Shuffle, li as u64);
            for v in chunk.iter_mut() {
                *v = rng.random_range(0..width);
            }
        });
        s
    });
    Ok(HashEnsemble { p, l, b: config.b, variant: config.variant, perms, signs, shuffle })
}

impl HashEnsemble {
    /// Ensemble from explicit permutations. `ranks[l][k]` is `pi_l(k+1)` in `1..=p`.
    pub fn from_permutations(variant: Variant, b: u32, ranks: &[Vec<u32>]) -> Result<Self> {
        let l = ranks.len();
        if l == 0 {
            return invalid("at least one permutation required");
        }
        let p = ranks[0].len();
        let mut flat = Vec::with_capacity(l * p);
        for r in ranks {
            if r.len() != p {
                return Err(Error::Shape("permutations of different lengths".into()));
            }
            let mut seen = vec![false; p];
            for &v in r {
                if v == 0 || v as usize > p || std::mem::replace(&mut seen[v as usize - 1], true) {
                    return invalid("not a permutation of 1..=p");
                }
            }
            flat.extend_from_slice(r);
        }
        Ok(Self { p, l, b, variant, perms: Perms::Ranks(flat), signs: None, shuffle: None })
    }

    /// Attach signs `signs[l][k]` in `{-1, +1}`.
    pub fn with_signs(mut self, signs: &[Vec<i8>]) -> Result<Self> {
        if signs.len() != self.l || signs.iter().any(|s| s.len() != self.p) {
            return Err(Error::Shape("sign table must be L x p".into()));
        }
        if signs.iter().flatten().any(|&s| s != 1 && s != -1) {
            return invalid("signs must be +1 or -1");
        }
        self.signs = Some(Signs::Stored(signs.concat()));
        Ok(self)
    }

    /// Attach recoding maps: `maps[l][m - 1]` is the code of rank `m`, in `0..2^b`.
    pub fn with_shuffle(mut self, maps: &[Vec<u32>]) -> Result<Self> {
        if maps.len() != self.l || maps.iter().any(|s| s.len() != self.p) {
            return Err(Error::Shape("recoding table must be L x p".into()));
        }
        if maps.iter().flatten().any(|&c| c >= 1 << self.b) {
            return invalid("recoded value out of range");
        }
        self.shuffle = Some(maps.concat());
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mode(&self) -> PermutationMode {
        match self.perms {
            Perms::Ranks(_) => PermutationMode::FisherYates,
            Perms::Scores(_) => PermutationMode::HashedScores,
        }
    }

    #[inline]
    fn score(key: u64, k: usize) -> u64 {
        mix64(key ^ mix64(k as u64))
    }

    /// Ranks `pi_l(k)` for all `k`; sorted from scores in hashed mode.
    pub fn ranks(&self, l: usize) -> Cow<'_, [u32]> {
        match &self.perms {
            Perms::Ranks(r) => Cow::Borrowed(&r[l * self.p..(l + 1) * self.p]),
            Perms::Scores(keys) => {
                let mut order: Vec<(u64, u32)> = (0..self.p).map(|k| (Self::score(keys[l], k), k as u32)).collect();
                order.sort_unstable();
                let mut r = vec![0u32; self.p];
                for (pos, &(_, k)) in order.iter().enumerate() {
                    r[k as usize] = pos as u32 + 1;
                }
                Cow::Owned(r)
            }
        }
    }

    /// `Psi_{k,l}` as `+-1.0`.
    #[inline]
    pub fn sign(&self, k: usize, l: usize) -> f64 {
        match &self.signs {
            Some(Signs::Stored(s)) => s[l * self.p + k] as f64,
            Some(Signs::Hashed(keys)) => {
                if Self::score(keys[l], k) >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            None => panic!("ensemble carries no sign vectors"),
        }
    }

    pub fn has_signs(&self) -> bool {
        self.signs.is_some()
    }

    pub fn has_shuffle(&self) -> bool {
        self.shuffle.is_some()
    }

    /// Code in `0..2^b` assigned to minimum rank `m` by permutation `l`.
    #[inline]
    pub fn code(&self, l: usize, m: u64) -> u32 {
        match self.variant {
            Variant::BBitShuffled => {
                self.shuffle.as_ref().expect("ensemble carries no recoding maps")[l * self.p + m as usize - 1]
            }
            _ => (m & ((1u64 << self.b) - 1)) as u32,
        }
    }

    /// Code of rank `m` under the recoding map of permutation `l`, regardless of variant.
    pub fn shuffle_code(&self, l: usize, m: u64) -> Option<u32> {
        self.shuffle.as_ref().map(|s| s[l * self.p + m as usize - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MinKind {
    /// `M` holds 1-based ranks.
    Ranks,
    /// `M` holds raw 64-bit scores.
    Scores,
}

/// Minimum-hash indices `H` and values `M`, stored permutation-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HashOutput {
    pub n: usize,
    pub l: usize,
    pub h: Vec<u32>,
    pub m: Vec<u64>,
    pub kind: MinKind,
}

impl HashOutput {
    /// Minimising column of row `i` under permutation `l`, `None` for empty rows.
    #[inline]
    pub fn h(&self, i: usize, l: usize) -> Option<usize> {
        let v = self.h[l * self.n + i];
        (v != EMPTY).then_some(v as usize)
    }

    #[inline]
    pub fn m(&self, i: usize, l: usize) -> Option<u64> {
        self.h(i, l).map(|_| self.m[l * self.n + i])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MinHashOptions {
    /// In hashed-score mode, report ranks instead of raw scores (sorts `p` scores per permutation).
    pub materialize_ranks: bool,
}

pub fn min_hash(x: &SparseMatrix, e: &HashEnsemble) -> Result<HashOutput> {
    min_hash_with(x, e, MinHashOptions::default())
}

pub fn min_hash_with(x: &SparseMatrix, e: &HashEnsemble, opts: MinHashOptions) -> Result<HashOutput> {
    if x.n_cols() != e.p {
        return Err(Error::Shape(format!("design has {} columns, ensemble {}", x.n_cols(), e.p)));
    }
    let n = x.n_rows();
    let mut h = vec![EMPTY; n * e.l];
    let mut m = vec![0u64; n * e.l];
    let use_ranks = matches!(e.perms, Perms::Ranks(_)) || opts.materialize_ranks;
    h.par_chunks_mut(n.max(1)).zip(m.par_chunks_mut(n.max(1))).enumerate().for_each(|(l, (hc, mc))| {
        if use_ranks {
            let ranks = e.ranks(l);
            for i in 0..n {
                let (idx, _) = x.row(i);
                let mut best = (u32::MAX, EMPTY);
                for &k in idx {
                    let r = ranks[k as usize];
                    if r < best.0 {
                        best = (r, k);
                    }
                }
                hc[i] = best.1;
                mc[i] = if best.1 == EMPTY { 0 } else { best.0 as u64 };
            }
        } else {
            let Perms::Scores(keys) = &e.perms else { unreachable!() };
            for i in 0..n {
                let (idx, _) = x.row(i);
                let mut best = (u64::MAX, EMPTY);
                for &k in idx {
                    let s = HashEnsemble::score(keys[l], k as usize);
                    if s < best.0 || (s == best.0 && k < best.1) {
                        best = (s, k);
                    }
                }
                hc[i] = best.1;
                mc[i] = if best.1 == EMPTY { 0 } else { best.0 };
            }
        }
    });
    Ok(HashOutput { n, l: e.l, h, m, kind: if use_ranks { MinKind::Ranks } else { MinKind::Scores } })
}

/// One-hot b-bit codes; column `l * 2^b + c` of the expanded matrix is block `l`, code `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BBitMatrix {
    pub n: usize,
    pub l: usize,
    pub b: u32,
    /// `codes[l * n + i]`, [`EMPTY`] for empty rows.
    pub codes: Vec<u32>,
}

impl BBitMatrix {
    pub fn width(&self) -> usize {
        1 << self.b
    }

    pub fn ncols(&self) -> usize {
        self.l * self.width()
    }

    #[inline]
    pub fn code(&self, i: usize, l: usize) -> Option<u32> {
        let c = self.codes[l * self.n + i];
        (c != EMPTY).then_some(c)
    }

    /// `S v` without materialising `S`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut out = vec![0.0; self.n];
        for l in 0..self.l {
            for (i, o) in out.iter_mut().enumerate() {
                if let Some(c) = self.code(i, l) {
                    *o += v[l * w + c as usize];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let w = self.width();
        let mut d = DMatrix::zeros(self.n, self.ncols());
        for l in 0..self.l {
            for i in 0..self.n {
                if let Some(c) = self.code(i, l) {
                    d[(i, l * w + c as usize)] = 1.0;
                }
            }
        }
        d
    }
}

pub fn expand_bbit(out: &HashOutput, e: &HashEnsemble) -> Result<BBitMatrix> {
    if !e.variant.is_bbit() {
        return Err(Error::Incompatible("ensemble was built for random signs".into()));
    }
    if out.kind != MinKind::Ranks {
        return Err(Error::Incompatible("b-bit expansion needs ranks; materialise ranks in hashed-score mode".into()));
    }
    let codes = (0..out.l)
        .flat_map(|l| {
            (0..out.n).map(move |i| match out.m(i, l) {
                Some(m) => e.code(l, m),
                None => EMPTY,
            })
        })
        .collect();
    Ok(BBitMatrix { n: out.n, l: out.l, b: e.b, codes })
}

/// `S_il = Psi_{H_il, l} X_{i, H_il}`, zero for empty rows.
pub fn random_sign_matrix(x: &SparseMatrix, out: &HashOutput, e: &HashEnsemble) -> Result<DMatrix<f64>> {
    if !e.has_signs() {
        return Err(Error::Incompatible("ensemble carries no sign vectors".into()));
    }
    if x.n_rows() != out.n {
        return Err(Error::Shape("hash output does not match design".into()));
    }
    let mut s = DMatrix::zeros(out.n, out.l);
    for l in 0..out.l {
        for i in 0..out.n {
            if let Some(k) = out.h(i, l) {
                s[(i, l)] = e.sign(k, l) * x.get(i, k);
            }
        }
    }
    Ok(s)
}

/// Second-smallest hash per row and its random-sign value.
///
/// Rows with fewer than two non-zeros get [`EMPTY`] and a zero value.
pub fn second_min_hash(x: &SparseMatrix, e: &HashEnsemble) -> Result<(HashOutput, DMatrix<f64>)> {
    if x.n_cols() != e.p {
        return Err(Error::Shape("design does not match ensemble".into()));
    }
    let n = x.n_rows();
    let mut h = vec![EMPTY; n * e.l];
    let mut m = vec![0u64; n * e.l];
    let mut s = DMatrix::zeros(n, e.l);
    for l in 0..e.l {
        let ranks = e.ranks(l);
        for i in 0..n {
            let (idx, val) = x.row(i);
            let mut first = (u32::MAX, usize::MAX);
            let mut second = (u32::MAX, usize::MAX);
            for (j, &k) in idx.iter().enumerate() {
                let r = ranks[k as usize];
                if r < first.0 {
                    second = first;
                    first = (r, j);
                } else if r < second.0 {
                    second = (r, j);
                }
            }
            if second.1 != usize::MAX {
                let k = idx[second.1] as usize;
                h[l * n + i] = k as u32;
                m[l * n + i] = second.0 as u64;
                if e.has_signs() {
                    s[(i, l)] = e.sign(k, l) * val[second.1];
                }
            }
        }
    }
    Ok((HashOutput { n, l: e.l, h, m, kind: MinKind::Ranks }, s))
}
