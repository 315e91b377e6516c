//! Subgraph and clique-cover probabilities for small labeled graphs `H`.
//!
//! An attribute chosen by exactly the vertices `C ⊆ V(H)` (within `V(H)`)
//! "builds" `C`; `H` is realized when every edge lies inside some built set.
//! All probabilities are vertex-labeled and independent of `n`.

use crate::error::{Error, Result};
use crate::model::AssignmentMatrix;
use crate::numeric::{bernoulli_weight, DoubleDouble};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_GRAPH_VERTICES: usize = 16;
pub const MAX_SUBGRAPH_EDGES: usize = 20;
pub const MAX_COVER_SETS: usize = 24;
pub const MAX_POWERSET_FAMILY: usize = 20;
pub const MAX_RATIONAL_M: u64 = 10_000;

/// A labeled graph on `h` vertices with an ordered edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SmallGraph {
    h: usize,
    edges: Vec<(u8, u8)>,
}

impl SmallGraph {
    pub fn new(h: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if h > MAX_GRAPH_VERTICES {
            return Err(Error::InvalidSpec(format!(
                "graph has {h} vertices, at most {MAX_GRAPH_VERTICES} supported"
            )));
        }
        let mut list: Vec<(u8, u8)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= h || v >= h {
                return Err(Error::InvalidSpec(format!("edge {u}-{v} out of range for {h} vertices")));
            }
            if u == v {
                return Err(Error::InvalidSpec(format!("self-loop at vertex {u}")));
            }
            let e = (u.min(v) as u8, u.max(v) as u8);
            if list.contains(&e) {
                return Err(Error::InvalidSpec(format!("duplicate edge {u}-{v}")));
            }
            list.push(e);
        }
        Ok(SmallGraph { h, edges: list })
    }

    /// Parses `"h; u-v,u-v,..."` with 0-based vertices.
    pub fn parse(text: &str) -> Result<Self> {
        let (h, rest) = text
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("expected 'h; u-v,...', got {text:?}")))?;
        let h: usize = h
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad vertex count {:?}", h.trim())))?;
        let mut edges = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (u, v) = item
                .split_once('-')
                .ok_or_else(|| Error::Parse(format!("bad edge {item:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad vertex {:?} in edge {item:?}", s.trim())))
            };
            edges.push((parse(u)?, parse(v)?));
        }
        SmallGraph::new(h, &edges)
    }

    pub fn edge() -> Self {
        SmallGraph::new(2, &[(0, 1)]).unwrap()
    }

    pub fn path(h: usize) -> Self {
        let edges: Vec<_> = (1..h).map(|v| (v - 1, v)).collect();
        SmallGraph::new(h, &edges).unwrap()
    }

    pub fn cycle(h: usize) -> Self {
        let edges: Vec<_> = (0..h).map(|v| (v, (v + 1) % h)).collect();
        SmallGraph::new(h, &edges).unwrap()
    }

    pub fn complete(h: usize) -> Self {
        let edges: Vec<_> = (0..h).flat_map(|u| (u + 1..h).map(move |v| (u, v))).collect();
        SmallGraph::new(h, &edges).unwrap()
    }

    /// Star with center 0 and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        SmallGraph::new(leaves + 1, &edges).unwrap()
    }

    /// Triangle `0,1,2` with a pendant edge `2-3`.
    pub fn paw() -> Self {
        SmallGraph::new(4, &[(0, 1), (0, 2), (1, 2), (2, 3)]).unwrap()
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(u, v)| (u as usize, v as usize))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as two-vertex subset masks, in edge-list order.
    pub fn edge_sets(&self) -> Vec<u32> {
        self.edges.iter().map(|&(u, v)| 1u32 << u | 1u32 << v).collect()
    }

    /// Edge set as a bitmask over the `C(h, 2)` pairs in row-major order.
    pub fn edge_mask(&self) -> u128 {
        self.edges()
            .map(|(u, v)| 1u128 << crate::model::pair_index(self.h, u, v))
            .fold(0, |a, b| a | b)
    }

    /// Same vertex set, only the edges selected by `subset` (bits over the edge list).
    pub fn edge_subgraph(&self, subset: u64) -> SmallGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(j, _)| subset >> j & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        SmallGraph { h: self.h, edges }
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<SmallGraph> {
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        SmallGraph::new(self.h, &edges)
    }
}

impl fmt::Display for SmallGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.h)?;
        for (j, (u, v)) in self.edges().enumerate() {
            write!(f, "{}{u}-{v}", if j == 0 { "" } else { "," })?;
        }
        Ok(())
    }
}

/// Required sets `plus` (each built by some attribute) and forbidden sets
/// `minus` (built by none), as vertex-subset masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl CoverSpec {
    pub fn new(plus: Vec<u32>, minus: Vec<u32>) -> Self {
        CoverSpec { plus, minus }
    }

    pub fn validate(&self, graph: &SmallGraph) -> Result<()> {
        let edges = graph.edge_sets();
        let universe = if graph.h == 32 { u32::MAX } else { (1u32 << graph.h) - 1 };
        for (name, family) in [("plus", &self.plus), ("minus", &self.minus)] {
            for (j, &c) in family.iter().enumerate() {
                if c & !universe != 0 {
                    return Err(Error::InvalidSpec(format!("{name} set {} has vertices outside H", fmt_set(c))));
                }
                if !edges.iter().any(|&e| e & c == e) {
                    return Err(Error::InvalidSpec(format!("{name} set {} contains no edge of H", fmt_set(c))));
                }
                if family[..j].contains(&c) {
                    return Err(Error::InvalidSpec(format!("{name} set {} listed twice", fmt_set(c))));
                }
            }
        }
        if let Some(&c) = self.plus.iter().find(|c| self.minus.contains(c)) {
            return Err(Error::InvalidSpec(format!("set {} is both required and forbidden", fmt_set(c))));
        }
        if let Some(&e) = edges.iter().find(|&&e| !self.plus.iter().any(|&c| c & e == e)) {
            return Err(Error::InvalidSpec(format!("edge {} is not covered by plus", fmt_set(e))));
        }
        Ok(())
    }
}

pub fn fmt_set(c: u32) -> String {
    let items: Vec<String> = (0..32).filter(|v| c >> v & 1 == 1).map(|v| v.to_string()).collect();
    format!("[{}]", items.join(","))
}

/// Parses a family of vertex sets such as `"[0,1],[1,2],[0,1,2]"`; braces work too.
pub fn parse_family(text: &str) -> Result<Vec<u32>> {
    let mut family = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let close = match rest.chars().next() {
            Some('[') => ']',
            Some('{') => '}',
            _ => return Err(Error::Parse(format!("expected '[' in family {text:?}"))),
        };
        let end = rest
            .find(close)
            .ok_or_else(|| Error::Parse(format!("unclosed set in family {text:?}")))?;
        let mut set = 0u32;
        for item in rest[1..end].split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let v: u32 = item
                .parse()
                .map_err(|_| Error::Parse(format!("bad vertex {item:?} in family {text:?}")))?;
            if v as usize >= MAX_GRAPH_VERTICES {
                return Err(Error::Parse(format!("vertex {v} out of range")));
            }
            set |= 1 << v;
        }
        family.push(set);
        rest = rest[end + 1..].trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }
    Ok(family)
}

/// All subsets of `V(H)` containing both ends of at least one edge, ascending.
pub fn powerset_p(graph: &SmallGraph) -> Vec<u32> {
    let edges = graph.edge_sets();
    (0..1u32 << graph.h)
        .filter(|&s| edges.iter().any(|&e| s & e == e))
        .collect()
}

fn check_edge_budget(graph: &SmallGraph) -> Result<()> {
    if graph.edge_count() > MAX_SUBGRAPH_EDGES {
        return Err(Error::Budget {
            what: "edges for subset inclusion-exclusion",
            got: graph.edge_count() as u64,
            limit: MAX_SUBGRAPH_EDGES as u64,
        });
    }
    Ok(())
}

/// For each vertex subset, the edges (bits over the edge list) it contains.
fn induced_edges(graph: &SmallGraph) -> Vec<u32> {
    let edges = graph.edge_sets();
    (0..1u32 << graph.h)
        .map(|s| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, &e)| s & e == e)
                .fold(0u32, |acc, (j, _)| acc | 1 << j)
        })
        .collect()
}

/// `d[F]`: probability that one attribute's choice set contains an edge of `F`,
/// for every edge subset `F`.
fn hit_probabilities(graph: &SmallGraph, p: f64) -> Vec<f64> {
    let k = graph.edge_count();
    let weights: Vec<f64> = (0..=graph.h as u32).map(|j| bernoulli_weight(p, j, graph.h as u32)).collect();
    let mut z = vec![0.0; 1 << k];
    for (s, &t) in induced_edges(graph).iter().enumerate() {
        if t != 0 {
            z[t as usize] += weights[(s as u32).count_ones() as usize];
        }
    }
    // z[U] = sum of a[T] over nonempty T ⊆ U
    for j in 0..k {
        for u in 0..1usize << k {
            if u >> j & 1 == 1 {
                z[u] += z[u ^ 1 << j];
            }
        }
    }
    let full = (1usize << k) - 1;
    (0..1usize << k).map(|f| (z[full] - z[full ^ f]).max(0.0)).collect()
}

/// `P(H ⊆ G(n, m, p))`.
pub fn pi_subgraph(graph: &SmallGraph, m: u64, p: f64) -> Result<f64> {
    check_edge_budget(graph)?;
    if graph.edge_count() == 0 {
        return Ok(1.0);
    }
    let d = hit_probabilities(graph, p);
    let m = m as f64;
    // the signs sum to zero, so (1 - d)^m may be replaced by (1 - d)^m - 1
    let mut acc = DoubleDouble::ZERO;
    for (f, &df) in d.iter().enumerate().skip(1) {
        let term = if df >= 1.0 { -1.0 } else { (m * (-df).ln_1p()).exp_m1() };
        acc += if (f as u32).count_ones() % 2 == 1 { -term } else { term };
    }
    Ok(acc.to_f64().clamp(0.0, 1.0))
}

/// Probability that no edge of `H` is present: `q_E^m`.
pub fn pi_complement(graph: &SmallGraph, m: u64, p: f64) -> f64 {
    if graph.edge_count() == 0 {
        return 1.0;
    }
    let edges = graph.edge_sets();
    let h = graph.h as u32;
    let (mut hit, mut miss) = (DoubleDouble::ZERO, DoubleDouble::ZERO);
    for s in 0..1u32 << h {
        let w = bernoulli_weight(p, s.count_ones(), h);
        if edges.iter().any(|&e| s & e == e) {
            hit += w;
        } else {
            miss += w;
        }
    }
    let (hit, miss) = (hit.to_f64(), miss.to_f64());
    let ln_q = if hit < 0.5 { (-hit).ln_1p() } else { miss.ln() };
    (m as f64 * ln_q).exp()
}

fn check_rational_m(m: u64) -> Result<()> {
    if m > MAX_RATIONAL_M {
        return Err(Error::Budget {
            what: "attribute count for rational arithmetic",
            got: m,
            limit: MAX_RATIONAL_M,
        });
    }
    Ok(())
}

fn rational_weights(p: &BigRational, h: usize) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    (0..=h)
        .map(|k| num_traits::pow(p.clone(), k) * num_traits::pow(q.clone(), h - k))
        .collect()
}

fn rational_pow(x: &BigRational, m: u64) -> BigRational {
    num_traits::pow(x.clone(), m as usize)
}

/// Converts a binary64 value to the rational it represents exactly.
pub fn exact_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `pi_subgraph` in exact rational arithmetic.
pub fn pi_subgraph_rational(graph: &SmallGraph, m: u64, p: &BigRational) -> Result<BigRational> {
    check_edge_budget(graph)?;
    check_rational_m(m)?;
    let weights = rational_weights(p, graph.h);
    let induced = induced_edges(graph);
    let mut total = BigRational::zero();
    for f in 0u32..1 << graph.edge_count() {
        let mut q = BigRational::zero();
        for (s, &t) in induced.iter().enumerate() {
            if t & f == 0 {
                q += &weights[(s as u32).count_ones() as usize];
            }
        }
        let term = rational_pow(&q, m);
        if f.count_ones() % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    Ok(total)
}

/// `p_C = p^|C| (1-p)^(h-|C|)` for each set of a family.
pub fn class_probabilities(h: usize, family: &[u32], p: f64) -> Vec<f64> {
    family
        .iter()
        .map(|c| bernoulli_weight(p, c.count_ones(), h as u32))
        .collect()
}

fn check_cover_budget(spec: &CoverSpec) -> Result<()> {
    if spec.plus.len() > MAX_COVER_SETS {
        return Err(Error::Budget {
            what: "required sets for cover inclusion-exclusion",
            got: spec.plus.len() as u64,
            limit: MAX_COVER_SETS as u64,
        });
    }
    Ok(())
}

/// `π(H, C+, C-) = Σ_{L ⊆ C+} (-1)^|L| (1 - Σ_{C- ∪ L} p_C)^m`.
pub fn pi_cover_exact(graph: &SmallGraph, spec: &CoverSpec, m: u64, p: f64) -> Result<f64> {
    spec.validate(graph)?;
    check_cover_budget(spec)?;
    let s_minus: f64 = class_probabilities(graph.h, &spec.minus, p).iter().sum();
    let free = 1.0 - s_minus;
    if free <= 0.0 {
        return Ok(0.0);
    }
    let m = m as f64;
    let base = (m * (-s_minus).ln_1p()).exp();
    if spec.plus.is_empty() {
        return Ok(base);
    }
    let plus: Vec<f64> = class_probabilities(graph.h, &spec.plus, p)
        .iter()
        .map(|w| w / free)
        .collect();
    let mut acc = DoubleDouble::ZERO;
    for l in 1u32..1 << plus.len() {
        let s_l: f64 = (0..plus.len()).filter(|j| l >> j & 1 == 1).map(|j| plus[j]).sum();
        let term = if s_l >= 1.0 { -1.0 } else { (m * (-s_l).ln_1p()).exp_m1() };
        acc += if l.count_ones() % 2 == 1 { -term } else { term };
    }
    Ok((base * acc.to_f64()).clamp(0.0, 1.0))
}

pub fn pi_cover_rational(graph: &SmallGraph, spec: &CoverSpec, m: u64, p: &BigRational) -> Result<BigRational> {
    spec.validate(graph)?;
    check_cover_budget(spec)?;
    check_rational_m(m)?;
    let weights = rational_weights(p, graph.h);
    let w = |c: &u32| weights[c.count_ones() as usize].clone();
    let s_minus: BigRational = spec.minus.iter().map(w).sum();
    let plus: Vec<BigRational> = spec.plus.iter().map(w).collect();
    let mut total = BigRational::zero();
    for l in 0u32..1 << plus.len() {
        let mut s = s_minus.clone();
        for (j, pj) in plus.iter().enumerate() {
            if l >> j & 1 == 1 {
                s += pj;
            }
        }
        let term = rational_pow(&(BigRational::one() - s), m);
        if l.count_ones() % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    Ok(total)
}

/// `(1 - Σ_{C-} p_C)^m Π_{C+} (1 - e^{-m p_C})`.
pub fn pi_cover_approx(graph: &SmallGraph, spec: &CoverSpec, m: u64, p: f64) -> Result<f64> {
    spec.validate(graph)?;
    let m = m as f64;
    let s_minus: f64 = class_probabilities(graph.h, &spec.minus, p).iter().sum();
    let base = if s_minus >= 1.0 { 0.0 } else { (m * (-s_minus).ln_1p()).exp() };
    let product: f64 = class_probabilities(graph.h, &spec.plus, p)
        .iter()
        .map(|&pc| -(-m * pc).exp_m1())
        .product();
    Ok(base * product)
}

/// Exponent `1 / (h 2^(h+1))` of the relative error of `pi_cover_approx`.
pub fn approx_error_exponent(h: usize) -> f64 {
    1.0 / (h as f64 * 2f64.powi(h as i32 + 1))
}

/// Relative slack on `m p³ <= 1` so that e.g. `m = 1000, p = 0.1` qualifies.
pub(crate) const REGIME_SLACK: f64 = 1e-12;

pub(crate) fn mp3_at_most_one(m: u64, p: f64) -> bool {
    m as f64 * p * p * p <= 1.0 + REGIME_SLACK
}

/// `e^{-|C-²| m p²} (1 - e^{-m p²})^{|C+²|} Π_{C ∈ C+, |C| >= 3} m p^|C|`, for `m p³ <= 1`.
pub fn pi_cover_order(graph: &SmallGraph, spec: &CoverSpec, m: u64, p: f64) -> Result<f64> {
    spec.validate(graph)?;
    if !mp3_at_most_one(m, p) {
        return Err(Error::Regime(format!(
            "order estimate needs m p^3 <= 1, got {}",
            m as f64 * p.powi(3)
        )));
    }
    let mf = m as f64;
    let pairs = |family: &[u32]| family.iter().filter(|c| c.count_ones() == 2).count() as i32;
    let mp2 = mf * p * p;
    let larger: f64 = spec
        .plus
        .iter()
        .filter(|c| c.count_ones() >= 3)
        .map(|c| mf * p.powi(c.count_ones() as i32))
        .product();
    Ok((-(pairs(&spec.minus) as f64) * mp2).exp() * (-(-mp2).exp_m1()).powi(pairs(&spec.plus)) * larger)
}

/// Every family `C ⊆ 𝒫(H)` covering all edges, as a cover spec with
/// `minus = 𝒫(H) \ C`.
pub fn enumerate_clique_covers(graph: &SmallGraph) -> Result<Vec<CoverSpec>> {
    let family = powerset_p(graph);
    if family.len() > MAX_POWERSET_FAMILY {
        return Err(Error::Budget {
            what: "size of the covering family",
            got: family.len() as u64,
            limit: MAX_POWERSET_FAMILY as u64,
        });
    }
    let edges = graph.edge_sets();
    let full = (1u64 << edges.len()) - 1;
    let covered: Vec<u64> = family
        .iter()
        .map(|&c| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, &e)| c & e == e)
                .fold(0u64, |acc, (j, _)| acc | 1 << j)
        })
        .collect();
    let mut covers = Vec::new();
    for chosen in 0u64..1 << family.len() {
        let union = (0..family.len())
            .filter(|j| chosen >> j & 1 == 1)
            .fold(0u64, |acc, j| acc | covered[j]);
        if union == full {
            let (plus, minus): (Vec<(usize, &u32)>, Vec<(usize, &u32)>) =
                family.iter().enumerate().partition(|(j, _)| chosen >> j & 1 == 1);
            covers.push(CoverSpec::new(
                plus.into_iter().map(|(_, &c)| c).collect(),
                minus.into_iter().map(|(_, &c)| c).collect(),
            ));
        }
    }
    Ok(covers)
}

/// Sets built by the attributes of `a` restricted to the rows `embedding`
/// (vertex `v` of `H` sits on row `embedding[v]`); empty sets are dropped.
pub fn built_sets(a: &AssignmentMatrix, embedding: &[usize]) -> Vec<u32> {
    let mut sets: Vec<u32> = (0..a.m())
        .map(|i| {
            embedding
                .iter()
                .enumerate()
                .filter(|(_, &row)| a.get(row, i))
                .fold(0u32, |acc, (v, _)| acc | 1 << v)
        })
        .filter(|&s| s != 0)
        .collect();
    sets.sort_unstable();
    sets.dedup();
    sets
}

/// `(present, exact)`: edges (bits over the edge list) inside some built set,
/// and edges built exactly as a 2-set.
pub fn cover_profile(edges: &[u32], built: &[u32]) -> (u32, u32) {
    let mut present = 0u32;
    let mut exact = 0u32;
    for (j, &e) in edges.iter().enumerate() {
        for &b in built {
            if b & e == e {
                present |= 1 << j;
                if b == e {
                    exact |= 1 << j;
                }
            }
        }
    }
    (present, exact)
}

/// Indicator of the event that `H` is present, the edges in `j_set` are built
/// by no attribute as 2-sets, and every other edge is.
pub fn cover_indicator(edge_count: usize, j_set: u32, (present, exact): (u32, u32)) -> bool {
    let full = if edge_count == 32 { u32::MAX } else { (1u32 << edge_count) - 1 };
    present == full && exact & j_set == 0 && exact | j_set == full
}

pub fn classify_cover(a: &AssignmentMatrix, graph: &SmallGraph, embedding: &[usize], j_set: u32) -> Result<bool> {
    if embedding.len() != graph.h() {
        return Err(Error::InvalidSpec(format!(
            "embedding maps {} vertices, graph has {}",
            embedding.len(),
            graph.h()
        )));
    }
    for (v, &row) in embedding.iter().enumerate() {
        if row >= a.n() {
            return Err(Error::InvalidSpec(format!("row {row} out of range")));
        }
        if embedding[..v].contains(&row) {
            return Err(Error::InvalidSpec(format!("row {row} used twice")));
        }
    }
    if graph.edge_count() < 32 && j_set >> graph.edge_count() != 0 {
        return Err(Error::InvalidSpec("J contains indices beyond the edge list".into()));
    }
    let edges = graph.edge_sets();
    let built = built_sets(a, embedding);
    Ok(cover_indicator(edges.len(), j_set, cover_profile(&edges, &built)))
}

/// Covers whose 2-sets are exactly the edges outside `j_set` (the family `𝒞_J`).
pub fn covers_for_j(graph: &SmallGraph, j_set: u32) -> Result<Vec<CoverSpec>> {
    let edges = graph.edge_sets();
    Ok(enumerate_clique_covers(graph)?
        .into_iter()
        .filter(|cover| {
            edges.iter().enumerate().all(|(j, e)| {
                let in_plus = cover.plus.contains(e);
                in_plus == (j_set >> j & 1 == 0)
            })
        })
        .collect())
}
