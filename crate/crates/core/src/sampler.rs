//! Exact edge-count samplers for Monte Carlo experiments.
//!
//! Every strategy draws `N_E` from its exact law under `G(n, m, p)`; they
//! differ only in how the randomness is organised, which changes the cost by
//! orders of magnitude across parameter regimes:
//!
//! * `DenseRows` draws the full assignment matrix and tests every pair.
//! * `PrefixBuckets` draws the same matrix but only tests pairs whose first
//!   few attributes are disjoint; it counts non-edges of dense graphs.
//! * `SubsetAlias` draws, per attribute, the set of vertices choosing it from
//!   an alias table over all `2^n` subsets (small `n`).
//! * `TypeCounts` draws the multinomial counts of the `2^m` attribute
//!   vectors (small `m`).
//! * `SparseMembership` draws the member list of each attribute and unions
//!   the resulting cliques vertex by vertex (small `np`).
//!
//! `DenseRows` and `PrefixBuckets` consume the stream exactly like
//! [`sample_assignment`], so for a given `(seed, replicate)` they agree with
//! [`edge_count`] on the matrix it returns.

use crate::error::{Error, Result};
use crate::model::{edge_count, BernoulliWords, pair_index, replicate_rng, sample_assignment, AssignmentMatrix, ModelParams};
use crate::numeric::bernoulli_weight;
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, weighted::WeightedAliasIndex};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DenseRows,
    PrefixBuckets,
    SubsetAlias,
    TypeCounts,
    SparseMembership,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::DenseRows,
        Strategy::PrefixBuckets,
        Strategy::SubsetAlias,
        Strategy::TypeCounts,
        Strategy::SparseMembership,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::DenseRows => "dense_rows",
            Strategy::PrefixBuckets => "prefix_buckets",
            Strategy::SubsetAlias => "subset_alias",
            Strategy::TypeCounts => "type_counts",
            Strategy::SparseMembership => "sparse_membership",
        }
    }
}

const MAX_ALIAS_VERTICES: u64 = 11;
const MAX_TYPE_ATTRIBUTES: u64 = 16;
const MAX_PREFIX_BITS: u64 = 20;

#[derive(Debug)]
enum Tables {
    None,
    Alias {
        alias: WeightedAliasIndex<f64>,
        pair_masks: Vec<u64>,
        full: u64,
    },
    Types {
        weights: Vec<f64>,
        // suffix[t] = sum of weights[t..]
        suffix: Vec<f64>,
    },
    Prefix {
        bits: u32,
    },
}

/// Draws edge counts of `G(n, m, p)` with a fixed strategy.
#[derive(Debug)]
pub struct EdgeCountSampler {
    params: ModelParams,
    strategy: Strategy,
    tables: Tables,
}

/// Rough operation counts used to pick a strategy.
fn estimated_cost(params: &ModelParams, strategy: Strategy) -> Option<f64> {
    let n = params.n as f64;
    let m = params.m as f64;
    let p = params.p;
    let words = (m / 64.0).ceil();
    let fill = n * words * (BernoulliWords::new(p).expected_words() + 1.0);
    let scan = |disjoint_prob: f64| -> f64 {
        // expected words read before an intersection is found
        let per_word_miss = (1.0 - p * p).powf(m.min(64.0));
        let expected = if per_word_miss >= 1.0 { words } else { 1.0 / (1.0 - per_word_miss) };
        n * n / 2.0 * disjoint_prob * expected.min(words)
    };
    match strategy {
        Strategy::DenseRows => Some(fill + scan(1.0)),
        Strategy::PrefixBuckets => {
            let max_bits = params.m.min(MAX_PREFIX_BITS) as i32;
            (1..=max_bits)
                .map(|w| {
                    fill + (1u64 << w) as f64
                        + n * (2.0 - p).powi(w)
                        + scan((1.0 - p * p).powi(w))
                })
                .min_by(f64::total_cmp)
        }
        Strategy::SubsetAlias => (params.n <= MAX_ALIAS_VERTICES).then_some(3.0 * m),
        Strategy::TypeCounts => (params.m <= MAX_TYPE_ATTRIBUTES).then(|| {
            let types = 2f64.powf(m);
            5.0 * types + types.min(n).powi(2) / 2.0
        }),
        Strategy::SparseMembership => {
            let k = n * p;
            Some(5.0 * m + 2.0 * m * k + m * (k * (1.0 - p) + k * k) + n)
        }
    }
}

fn best_prefix_bits(params: &ModelParams) -> u32 {
    let n = params.n as f64;
    let p = params.p;
    let max_bits = params.m.min(MAX_PREFIX_BITS) as i32;
    (1..=max_bits)
        .min_by(|&a, &b| {
            let cost = |w: i32| {
                (1u64 << w) as f64 + n * (2.0 - p).powi(w) + n * n / 2.0 * (1.0 - p * p).powi(w)
            };
            cost(a).total_cmp(&cost(b))
        })
        .unwrap_or(1) as u32
}

impl EdgeCountSampler {
    /// Picks the cheapest applicable strategy for `params`.
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let strategy = Strategy::ALL
            .into_iter()
            .filter_map(|s| estimated_cost(&params, s).map(|c| (s, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(s, _)| s)
            .unwrap_or(Strategy::DenseRows);
        Self::with_strategy(params, strategy)
    }

    pub fn with_strategy(params: ModelParams, strategy: Strategy) -> Result<Self> {
        params.validate()?;
        let tables = match strategy {
            Strategy::DenseRows | Strategy::SparseMembership => Tables::None,
            Strategy::PrefixBuckets => Tables::Prefix {
                bits: best_prefix_bits(&params),
            },
            Strategy::SubsetAlias => {
                if params.n > MAX_ALIAS_VERTICES {
                    return Err(Error::Budget {
                        what: "vertex count for subset alias sampling",
                        got: params.n,
                        limit: MAX_ALIAS_VERTICES,
                    });
                }
                let n = params.n as usize;
                let weights: Vec<f64> = (0..1u32 << n)
                    .map(|s| bernoulli_weight(params.p, s.count_ones(), n as u32))
                    .collect();
                let pair_masks = (0..1usize << n)
                    .map(|s| {
                        let mut mask = 0u64;
                        for k in 0..n {
                            for l in k + 1..n {
                                if s >> k & 1 == 1 && s >> l & 1 == 1 {
                                    mask |= 1 << pair_index(n, k, l);
                                }
                            }
                        }
                        mask
                    })
                    .collect();
                let pairs = n * (n - 1) / 2;
                let full = if pairs == 64 { u64::MAX } else { (1u64 << pairs) - 1 };
                let alias = WeightedAliasIndex::new(weights)
                    .map_err(|e| Error::InvalidParams(format!("alias table: {e}")))?;
                Tables::Alias {
                    alias,
                    pair_masks,
                    full,
                }
            }
            Strategy::TypeCounts => {
                if params.m > MAX_TYPE_ATTRIBUTES {
                    return Err(Error::Budget {
                        what: "attribute count for type-count sampling",
                        got: params.m,
                        limit: MAX_TYPE_ATTRIBUTES,
                    });
                }
                let m = params.m as u32;
                let weights: Vec<f64> = (0..1u32 << m)
                    .map(|t| bernoulli_weight(params.p, t.count_ones(), m))
                    .collect();
                let mut suffix = vec![0.0; weights.len() + 1];
                for t in (0..weights.len()).rev() {
                    suffix[t] = suffix[t + 1] + weights[t];
                }
                Tables::Types { weights, suffix }
            }
        };
        Ok(EdgeCountSampler {
            params,
            strategy,
            tables,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Edge count of replicate `replicate`; a pure function of its arguments.
    pub fn sample(&self, seed: u64, replicate: u64) -> u64 {
        match (&self.strategy, &self.tables) {
            (Strategy::DenseRows, _) => {
                edge_count(&sample_assignment(&self.params, seed, replicate)).edge_count
            }
            (Strategy::PrefixBuckets, Tables::Prefix { bits }) => {
                let a = sample_assignment(&self.params, seed, replicate);
                self.params.pair_count() - count_disjoint_pairs(&a, *bits)
            }
            (
                Strategy::SubsetAlias,
                Tables::Alias {
                    alias,
                    pair_masks,
                    full,
                },
            ) => {
                let mut rng = replicate_rng(seed, replicate);
                let mut mask = 0u64;
                for _ in 0..self.params.m {
                    mask |= pair_masks[alias.sample(&mut rng)];
                    if mask == *full {
                        break;
                    }
                }
                mask.count_ones() as u64
            }
            (Strategy::TypeCounts, Tables::Types { weights, suffix }) => {
                let mut rng = replicate_rng(seed, replicate);
                type_count_edges(self.params.n, weights, suffix, &mut rng)
            }
            (Strategy::SparseMembership, _) => {
                let mut rng = replicate_rng(seed, replicate);
                sparse_edges(&self.params, &mut rng)
            }
            _ => unreachable!("tables are built for the selected strategy"),
        }
    }
}

fn type_count_edges(n: u64, weights: &[f64], suffix: &[f64], rng: &mut ChaCha8Rng) -> u64 {
    let mut remaining = n;
    let mut present: Vec<(u32, u64)> = Vec::new();
    for (t, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let rest = suffix[t];
        let c = if rest <= 0.0 || w <= 0.0 {
            0
        } else if w >= rest {
            remaining
        } else {
            Binomial::new(remaining, (w / rest).min(1.0))
                .expect("probability lies in [0, 1]")
                .sample(rng)
        };
        if c > 0 {
            present.push((t as u32, c));
            remaining -= c;
        }
    }
    let mut edges = 0u64;
    for (i, &(s, cs)) in present.iter().enumerate() {
        if s != 0 {
            edges += cs * (cs - 1) / 2;
        }
        for &(t, ct) in &present[i + 1..] {
            if s & t != 0 {
                edges += cs * ct;
            }
        }
    }
    edges
}

fn sparse_edges(params: &ModelParams, rng: &mut ChaCha8Rng) -> u64 {
    let n = params.n as usize;
    let binomial = Binomial::new(params.n, params.p).expect("p lies in [0, 1]");
    // members of each attribute, stored contiguously
    let mut starts = Vec::with_capacity(params.m as usize + 1);
    let mut members: Vec<u32> = Vec::new();
    starts.push(0usize);
    for _ in 0..params.m {
        let k = binomial.sample(rng) as usize;
        if k >= 2 {
            members.extend(index::sample(rng, n, k).into_iter().map(|v| v as u32));
        }
        starts.push(members.len());
    }
    // attributes of each vertex (CSR)
    let mut degree = vec![0u32; n + 1];
    for &v in &members {
        degree[v as usize + 1] += 1;
    }
    for v in 0..n {
        degree[v + 1] += degree[v];
    }
    let offsets = degree;
    let mut fill = offsets.clone();
    let mut attrs = vec![0u32; members.len()];
    for a in 0..params.m as usize {
        for &v in &members[starts[a]..starts[a + 1]] {
            attrs[fill[v as usize] as usize] = a as u32;
            fill[v as usize] += 1;
        }
    }
    let mut stamp = vec![u32::MAX; n];
    let mut edges = 0u64;
    for u in 0..n {
        let mark = u as u32;
        for &a in &attrs[offsets[u] as usize..offsets[u + 1] as usize] {
            let a = a as usize;
            for &v in &members[starts[a]..starts[a + 1]] {
                if v > mark && stamp[v as usize] != mark {
                    stamp[v as usize] = mark;
                    edges += 1;
                }
            }
        }
    }
    edges
}

/// Number of unordered vertex pairs with disjoint attribute sets.
///
/// Vertices are bucketed by their first `bits` attributes; only buckets whose
/// prefixes are disjoint can hold disjoint pairs.
pub fn count_disjoint_pairs(a: &AssignmentMatrix, bits: u32) -> u64 {
    let n = a.n();
    let bits = bits.min(a.m() as u32).clamp(1, 63);
    let full = (1u64 << bits) - 1;
    let prefix = |k: usize| a.row(k)[0] & full;
    let buckets = 1usize << bits;
    let mut start = vec![0u32; buckets + 1];
    for k in 0..n {
        start[prefix(k) as usize + 1] += 1;
    }
    for b in 0..buckets {
        start[b + 1] += start[b];
    }
    let mut fill = start.clone();
    let mut order = vec![0u32; n];
    for k in 0..n {
        let b = prefix(k) as usize;
        order[fill[b] as usize] = k as u32;
        fill[b] += 1;
    }
    let mut ordered_pairs = 0u64;
    for u in 0..n {
        let comp = !prefix(u) & full;
        // all submasks of comp, including 0
        let mut t = comp;
        loop {
            let bucket = &order[start[t as usize] as usize..start[t as usize + 1] as usize];
            for &v in bucket {
                let v = v as usize;
                if v != u && !a.intersects(u, v) {
                    ordered_pairs += 1;
                }
            }
            if t == 0 {
                break;
            }
            t = (t - 1) & comp;
        }
    }
    ordered_pairs / 2
}
