//! Seeded, splittable random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The generator behind it is
//! ChaCha8 keyed by the seed with the stream id selecting the ChaCha stream,
//! so distinct ids never share a keystream and identical pairs replay
//! bit-identically. Replica streams are derived with [`RngStream::substream`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Generator = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn generator(&self) -> Generator {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream_id);
        g
    }

    /// Child stream for replica or task `index`.
    pub fn substream(&self, index: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5bd1_e995)));
        Self { seed: self.seed, stream_id: id }
    }

    /// Child stream for a named purpose (bootstrap, proposal, ...).
    pub fn fork(&self, tag: &str) -> Self {
        let h = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        Self { seed: self.seed, stream_id: splitmix64(self.stream_id.rotate_left(17) ^ h) }
    }

    /// Re-keys the seed by a namespace tag; tag 0 is the identity.
    pub fn in_domain(&self, domain: u64) -> Self {
        if domain == 0 {
            *self
        } else {
            Self { seed: self.seed ^ splitmix64(domain), stream_id: self.stream_id }
        }
    }
}

/// Runs `f` once per replica, each with its own substream, and returns the
/// results in replica order regardless of scheduling.
pub(crate) fn replicate<T, F>(rng: &RngStream, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Generator) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut g = rng.substream(i as u64).generator();
            f(i, &mut g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_pairs_replay() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..16)
            .map({
                let mut g = s.generator();
                move |_| g.random()
            })
            .collect();
        let mut g = s.generator();
        let b: Vec<u64> = (0..16).map(|_| g.random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut g1 = RngStream::new(7, 3).generator();
        let mut g2 = RngStream::new(7, 4).generator();
        let a: Vec<u64> = (0..8).map(|_| g1.random()).collect();
        let b: Vec<u64> = (0..8).map(|_| g2.random()).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn substreams_are_uncorrelated() {
        let root = RngStream::new(1, 0);
        let n = 20_000;
        let mut g1 = root.substream(0).generator();
        let mut g2 = root.substream(1).generator();
        let mut cov = 0.0;
        for _ in 0..n {
            let x: f64 = g1.random::<f64>() - 0.5;
            let y: f64 = g2.random::<f64>() - 0.5;
            cov += x * y;
        }
        // sd of the mean product is 1/(12 sqrt n)
        assert!((cov / n as f64).abs() < 4.0 / (12.0 * (n as f64).sqrt()));
    }

    #[test]
    fn replicate_is_ordered() {
        let root = RngStream::new(11, 0);
        let v = replicate(&root, 64, |i, g| (i, g.random::<u32>()));
        for (k, (i, _)) in v.iter().enumerate() {
            assert_eq!(k, *i);
        }
        let w = replicate(&root, 64, |i, g| (i, g.random::<u32>()));
        assert_eq!(v, w);
    }
}
