use rand::Rng;

use crate::error::{Error, Result};

/// First-hit times of i.i.d. uniform draws from `{1..p}`.
///
/// `g[k]` is the draw index at which column `k` first appears; `ranks[k]` is
/// the order of that first appearance, a uniform permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstHitStream {
    pub g: Vec<u64>,
    pub ranks: Vec<u32>,
}

pub fn stream_cap(p: usize) -> u64 {
    let pf = p as f64;
    (64.0 * pf * pf.ln()).ceil().max(64.0) as u64
}

pub fn first_hit_stream<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<FirstHitStream> {
    if p == 0 {
        return Err(Error::InvalidParam("p must be at least 1".into()));
    }
    let cap = stream_cap(p);
    let mut g = vec![0u64; p];
    let mut ranks = vec![0u32; p];
    let mut seen = 0usize;
    let mut t = 0u64;
    while seen < p {
        t += 1;
        if t > cap {
            return Err(Error::Numerical("stream cap exceeded".into()));
        }
        let k = if p == 1 { 0 } else { rng.random_range(0..p) };
        if g[k] == 0 {
            g[k] = t;
            seen += 1;
            ranks[k] = seen as u32;
        }
    }
    Ok(FirstHitStream { g, ranks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn single_column() {
        let mut rng = stream_rng(1, Stream::FirstHit, 0);
        let s = first_hit_stream(1, &mut rng).unwrap();
        assert_eq!(s.g, vec![1]);
        assert_eq!(s.ranks, vec![1]);
    }

    #[test]
    fn ranks_follow_hit_order() {
        let mut rng = stream_rng(2, Stream::FirstHit, 0);
        let s = first_hit_stream(40, &mut rng).unwrap();
        for a in 0..40 {
            for b in 0..40 {
                assert_eq!(s.g[a] < s.g[b], s.ranks[a] < s.ranks[b]);
            }
        }
    }
}
