//! The random intersection graph `G(n, m, p)`: parameters, attribute
//! assignments and the graph they induce.
//!
//! Vertex `k` chooses each of the `m` attributes independently with
//! probability `p`; two vertices are adjacent when their choice vectors share
//! a set bit.

use crate::error::{Error, Result};
use crate::numeric::{one_minus_sq_pow, DoubleDouble};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u64,
    pub m: u64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(n: u64, m: u64, p: f64) -> Result<Self> {
        let params = ModelParams { n, m, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("n must be >= 2, got {}", self.n)));
        }
        if self.m < 1 {
            return Err(Error::InvalidParams(format!("m must be >= 1, got {}", self.m)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParams(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Edge probability `1 - (1 - p^2)^m`.
    pub fn p_hat(&self) -> f64 {
        edge_probability(self.m, self.p)
    }

    /// `(1 - p^2)^m`, the probability that a fixed pair is not adjacent.
    pub fn q_hat(&self) -> f64 {
        non_edge_probability(self.m, self.p)
    }

    /// `m p^3`, the quantity separating the two main regimes.
    pub fn mp3(&self) -> f64 {
        self.m as f64 * self.p.powi(3)
    }

    pub fn pair_count(&self) -> u64 {
        self.n * (self.n - 1) / 2
    }
}

pub(crate) fn edge_probability(m: u64, p: f64) -> f64 {
    (DoubleDouble::new(1.0) - one_minus_sq_pow(p, m)).to_f64()
}

pub(crate) fn non_edge_probability(m: u64, p: f64) -> f64 {
    one_minus_sq_pow(p, m).to_f64()
}

/// Stream generator for replicate `replicate` under master seed `seed`.
///
/// ChaCha is counter based: every `(seed, replicate)` pair addresses its own
/// stream, so replicates can be drawn in any order or on any thread.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Bernoulli(p) via a 53-bit uniform compared against `p * 2^53`.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliThreshold {
    threshold: f64,
}

impl BernoulliThreshold {
    pub fn new(p: f64) -> Self {
        BernoulliThreshold {
            threshold: p * (1u64 << 53) as f64,
        }
    }

    #[inline]
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> bool {
        ((rng.next_u64() >> 11) as f64) < self.threshold
    }
}

/// 64 independent Bernoulli(p) bits per draw, with the same law per bit as
/// [`BernoulliThreshold`].
///
/// Each lane compares a 53-bit uniform against `⌈p 2^53⌉` from the most
/// significant bit down, one random word per bit position; the draw stops
/// once every lane is decided or the remaining threshold bits are zero.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliWords {
    threshold: u64,
    lowest: u32,
}

impl BernoulliWords {
    pub fn new(p: f64) -> Self {
        let threshold = (p.clamp(0.0, 1.0) * (1u64 << 53) as f64).ceil() as u64;
        BernoulliWords {
            threshold,
            lowest: threshold.trailing_zeros().min(53),
        }
    }

    #[inline]
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> u64 {
        if self.threshold == 0 {
            return 0;
        }
        if self.threshold >= 1 << 53 {
            return !0;
        }
        let mut ones = 0u64;
        let mut open = !0u64;
        for j in (self.lowest..53).rev() {
            let r = rng.next_u64();
            if self.threshold >> j & 1 == 1 {
                ones |= open & !r;
                open &= r;
            } else {
                open &= !r;
            }
            if open == 0 {
                break;
            }
        }
        ones
    }

    /// Expected random words consumed per draw.
    pub fn expected_words(&self) -> f64 {
        if self.threshold == 0 || self.threshold >= 1 << 53 {
            return 0.0;
        }
        (0..53 - self.lowest as i32)
            .map(|j| 1.0 - (1.0 - 0.5f64.powi(j)).powi(64))
            .sum()
    }
}

/// The `n x m` attribute choices of one sample; row `k` is vertex `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    n: usize,
    m: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl AssignmentMatrix {
    pub fn zeros(n: usize, m: usize) -> Self {
        let words_per_row = m.div_ceil(64).max(1);
        AssignmentMatrix {
            n,
            m,
            words_per_row,
            bits: vec![0; n * words_per_row],
        }
    }

    pub fn ones(n: usize, m: usize) -> Self {
        let mut a = Self::zeros(n, m);
        for k in 0..n {
            for i in 0..m {
                a.set(k, i, true);
            }
        }
        a
    }

    /// Builds a matrix from rows given as strings of `0`/`1`, attribute 0 first.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let m = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::InvalidParams("no rows".into()))?;
        let mut a = Self::zeros(rows.len(), m);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidParams("rows have different lengths".into()));
            }
            for (i, c) in row.chars().enumerate() {
                match c {
                    '0' => {}
                    '1' => a.set(k, i, true),
                    other => {
                        return Err(Error::Parse(format!("unexpected character {other:?} in row")))
                    }
                }
            }
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, k: usize) -> &[u64] {
        &self.bits[k * self.words_per_row..(k + 1) * self.words_per_row]
    }

    pub fn get(&self, k: usize, i: usize) -> bool {
        self.row(k)[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, i: usize, value: bool) {
        let w = &mut self.bits[k * self.words_per_row + i / 64];
        if value {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Whether rows `k` and `l` share an attribute.
    #[inline]
    pub fn intersects(&self, k: usize, l: usize) -> bool {
        self.row(k)
            .iter()
            .zip(self.row(l))
            .any(|(a, b)| a & b != 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub edge_count: u64,
    pub nonedge_count: u64,
}

impl SampleSummary {
    pub fn from_edges(n: u64, edge_count: u64) -> Self {
        SampleSummary {
            edge_count,
            nonedge_count: n * (n - 1) / 2 - edge_count,
        }
    }
}

/// Draws an attribute assignment row by row, one 64-attribute word at a
/// time with [`BernoulliWords`].
pub fn sample_assignment(params: &ModelParams, seed: u64, replicate: u64) -> AssignmentMatrix {
    let n = params.n as usize;
    let m = params.m as usize;
    let mut rng = replicate_rng(seed, replicate);
    let coin = BernoulliWords::new(params.p);
    let mut a = AssignmentMatrix::zeros(n, m);
    let tail = if m.is_multiple_of(64) { !0 } else { (1u64 << (m % 64)) - 1 };
    for k in 0..n {
        for w in 0..a.words_per_row {
            let mut word = coin.draw(&mut rng);
            if w + 1 == a.words_per_row {
                word &= tail;
            }
            a.bits[k * a.words_per_row + w] = word;
        }
    }
    a
}

pub fn edge_count(a: &AssignmentMatrix) -> SampleSummary {
    let n = a.n();
    let mut edges = 0u64;
    for k in 0..n {
        for l in k + 1..n {
            if a.intersects(k, l) {
                edges += 1;
            }
        }
    }
    SampleSummary::from_edges(n as u64, edges)
}

/// Largest vertex count whose pair set fits a `u128` mask.
pub const MAX_MASK_VERTICES: usize = 16;

/// Index of the unordered pair `{k, l}` (`k < l`) in row-major order over
/// `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
#[inline]
pub fn pair_index(n: usize, k: usize, l: usize) -> usize {
    debug_assert!(k < l && l < n);
    k * (2 * n - k - 1) / 2 + (l - k - 1)
}

/// Edge set of the sampled graph as a mask over `pair_index`.
pub fn adjacency(a: &AssignmentMatrix) -> Result<u128> {
    let n = a.n();
    if n > MAX_MASK_VERTICES {
        return Err(Error::Budget {
            what: "vertex count for adjacency mask",
            got: n as u64,
            limit: MAX_MASK_VERTICES as u64,
        });
    }
    let mut mask = 0u128;
    for k in 0..n {
        for l in k + 1..n {
            if a.intersects(k, l) {
                mask |= 1 << pair_index(n, k, l);
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 3, 0.5).is_err());
        assert!(ModelParams::new(3, 0, 0.5).is_err());
        assert!(ModelParams::new(3, 3, 1.5).is_err());
        assert!(ModelParams::new(3, 3, -0.1).is_err());
        assert!(ModelParams::new(3, 3, f64::NAN).is_err());
        assert!(ModelParams::new(2, 1, 0.0).is_ok());
    }

    #[test]
    fn p_hat_endpoints() {
        assert_eq!(ModelParams::new(5, 7, 0.0).unwrap().p_hat(), 0.0);
        assert_eq!(ModelParams::new(5, 7, 1.0).unwrap().p_hat(), 1.0);
        let mid = ModelParams::new(5, 7, 1e-9).unwrap().p_hat();
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn degenerate_probabilities_force_constant_matrices() {
        let zero = sample_assignment(&ModelParams::new(3, 4, 0.0).unwrap(), 7, 0);
        assert_eq!(zero, AssignmentMatrix::zeros(3, 4));
        let one = sample_assignment(&ModelParams::new(3, 4, 1.0).unwrap(), 7, 0);
        assert_eq!(one, AssignmentMatrix::ones(3, 4));
    }

    #[test]
    fn word_coin_matches_threshold_law() {
        for p in [0.5, 0.3, 0.01, 0.97, 1.0 / 3.0] {
            let coin = BernoulliWords::new(p);
            let mut rng = replicate_rng(17, 0);
            let draws = 20_000;
            let mut lanes = [0u32; 64];
            for _ in 0..draws {
                let w = coin.draw(&mut rng);
                for (j, c) in lanes.iter_mut().enumerate() {
                    *c += (w >> j & 1) as u32;
                }
            }
            let total: u32 = lanes.iter().sum();
            let n = (64 * draws) as f64;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!((total as f64 / n - p).abs() < 5.0 * se, "p={p}");
            let lane_se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(lanes.iter().all(|&c| (c as f64 / draws as f64 - p).abs() < 6.0 * lane_se));
        }
        assert_eq!(BernoulliWords::new(0.5).expected_words(), 1.0);
        let mut rng = replicate_rng(1, 1);
        assert_eq!(BernoulliWords::new(0.0).draw(&mut rng), 0);
        assert_eq!(BernoulliWords::new(1.0).draw(&mut rng), !0);
        assert!(BernoulliWords::new(0.3).expected_words() < 10.0);
    }

    #[test]
    fn bit_fraction_follows_p() {
        let params = ModelParams::new(50, 100, 0.3).unwrap();
        let a = sample_assignment(&params, 2024, 0);
        let frac = a.count_ones() as f64 / 5000.0;
        assert!((frac - 0.3).abs() <= 3.0 * (0.21f64 / 5000.0).sqrt(), "{frac}");
    }

    #[test]
    fn sampling_is_reproducible_and_streams_differ() {
        let params = ModelParams::new(10, 130, 0.4).unwrap();
        let a = sample_assignment(&params, 99, 3);
        assert_eq!(a, sample_assignment(&params, 99, 3));
        assert_ne!(a, sample_assignment(&params, 99, 4));
        assert_ne!(a, sample_assignment(&params, 100, 3));
    }

    #[test]
    fn edge_count_examples() {
        assert_eq!(edge_count(&AssignmentMatrix::zeros(4, 5)).edge_count, 0);
        let full = edge_count(&AssignmentMatrix::ones(4, 5));
        assert_eq!(full.edge_count, 6);
        assert_eq!(full.nonedge_count, 0);
        let a = AssignmentMatrix::from_rows(&["1000", "1100", "0100"]).unwrap();
        let s = edge_count(&a);
        assert_eq!(s.edge_count, 2);
        assert_eq!(s.nonedge_count, 1);
    }

    #[test]
    fn adjacency_examples() {
        assert_eq!(adjacency(&AssignmentMatrix::zeros(4, 3)).unwrap(), 0);
        assert_eq!(adjacency(&AssignmentMatrix::ones(4, 3)).unwrap(), 0b111111);
        let a = AssignmentMatrix::from_rows(&["1000", "1100", "0100"]).unwrap();
        let mask = adjacency(&a).unwrap();
        assert_eq!(mask, 1 << pair_index(3, 0, 1) | 1 << pair_index(3, 1, 2));
        assert!(adjacency(&AssignmentMatrix::zeros(17, 2)).unwrap_err().is_budget());
    }

    #[test]
    fn wide_rows_span_words() {
        let mut a = AssignmentMatrix::zeros(2, 130);
        a.set(0, 129, true);
        assert!(!a.intersects(0, 1));
        a.set(1, 129, true);
        assert!(a.intersects(0, 1));
        assert!(a.get(1, 129));
    }

    #[test]
    fn pair_index_is_a_bijection() {
        let n = 7;
        let mut seen = vec![false; n * (n - 1) / 2];
        for k in 0..n {
            for l in k + 1..n {
                let i = pair_index(n, k, l);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }
}
