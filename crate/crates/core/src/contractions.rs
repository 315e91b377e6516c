//! Contraction norms of the edge kernel.
//!
//! Kernels act on attribute vectors `x ∈ {0,1}^m` under the product
//! Bernoulli(p) measure. The edge kernel is `g(x, y) = 1[x ∩ y ≠ ∅]`; bars
//! denote centering. A contraction `f ∗_b^a g` identifies the first `b`
//! arguments of `f` and `g` and integrates out the first `a` of them.
//!
//! Three independent evaluations are provided: exhaustive summation over
//! bit vectors (tiny `m`), closed sums over attribute counts, and alternating
//! sums of subgraph probabilities over the graphs `G_1 = K_{1,4}`,
//! `G_2 = C_4`, `G_3 = P_5`.

use crate::error::{Error, Result};
use crate::model::{sample_assignment, ModelParams};
use crate::moments::cherry_covariance;
use crate::numeric::{dd_sum, DoubleDouble};
use crate::subgraphs::{built_sets, cover_indicator, cover_profile, pi_complement, pi_subgraph, SmallGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    /// `g(x, y)`
    G2,
    /// `g(x, y) - p̂`
    G2Bar,
    /// `1 - (1-p)^|x|`
    G1,
    /// `(1-p²)^m - (1-p)^|x|`
    G1Bar,
    /// `1 - g(x, y)`
    Rho2,
    /// `(1-p)^|x|`
    Rho1,
    /// `ϱ₂ - (1 - p̂) = -ḡ₂`
    Rho2Bar,
    /// `ϱ₁ - (1 - p̂) = -ḡ₁`
    Rho1Bar,
}

impl KernelId {
    pub const ALL: [KernelId; 8] = [
        KernelId::G2,
        KernelId::G2Bar,
        KernelId::G1,
        KernelId::G1Bar,
        KernelId::Rho2,
        KernelId::Rho1,
        KernelId::Rho2Bar,
        KernelId::Rho1Bar,
    ];

    pub fn arity(self) -> usize {
        match self {
            KernelId::G2 | KernelId::G2Bar | KernelId::Rho2 | KernelId::Rho2Bar => 2,
            KernelId::G1 | KernelId::G1Bar | KernelId::Rho1 | KernelId::Rho1Bar => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelId::G2 => "g2",
            KernelId::G2Bar => "gbar2",
            KernelId::G1 => "g1",
            KernelId::G1Bar => "gbar1",
            KernelId::Rho2 => "rho2",
            KernelId::Rho1 => "rho1",
            KernelId::Rho2Bar => "rhobar2",
            KernelId::Rho1Bar => "rhobar1",
        }
    }

    /// The kernel with `g` and `ϱ` exchanged.
    pub fn complement(self) -> KernelId {
        match self {
            KernelId::G2 => KernelId::Rho2,
            KernelId::G2Bar => KernelId::Rho2Bar,
            KernelId::G1 => KernelId::Rho1,
            KernelId::G1Bar => KernelId::Rho1Bar,
            KernelId::Rho2 => KernelId::G2,
            KernelId::Rho1 => KernelId::G1,
            KernelId::Rho2Bar => KernelId::G2Bar,
            KernelId::Rho1Bar => KernelId::G1Bar,
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KernelId::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown kernel {s:?}")))
    }
}

/// `left ∗_b^a right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionSpec {
    pub left: KernelId,
    pub right: KernelId,
    pub b: usize,
    pub a: usize,
}

impl ContractionSpec {
    pub fn new(left: KernelId, right: KernelId, b: usize, a: usize) -> Result<Self> {
        let spec = ContractionSpec { left, right, b, a };
        if a > b || b > left.arity().min(right.arity()) {
            return Err(Error::InvalidParams(format!(
                "contraction {left} *_{b}^{a} {right} needs a <= b <= min arity"
            )));
        }
        Ok(spec)
    }

    /// Distinct bit-vector variables in the squared norm.
    pub fn variable_count(&self) -> usize {
        self.left.arity() + self.right.arity() - self.b
    }

    /// The five squared norms of the distance bound, as contractions.
    pub fn n20() -> Self {
        ContractionSpec::new(KernelId::G2Bar, KernelId::G2Bar, 2, 0).unwrap()
    }
    pub fn n21() -> Self {
        ContractionSpec::new(KernelId::G2Bar, KernelId::G2Bar, 2, 1).unwrap()
    }
    pub fn n10() -> Self {
        ContractionSpec::new(KernelId::G1Bar, KernelId::G1Bar, 1, 0).unwrap()
    }
    pub fn n11() -> Self {
        ContractionSpec::new(KernelId::G2Bar, KernelId::G2Bar, 1, 1).unwrap()
    }
    pub fn n_mix() -> Self {
        ContractionSpec::new(KernelId::G2Bar, KernelId::G1Bar, 1, 1).unwrap()
    }
}

/// Budget for exhaustive summation: `m` times the variable count.
pub const BRUTE_FORCE_BITS: u64 = 24;

struct KernelTable {
    p_hat: f64,
    q_hat: f64,
    /// `(1-p)^k`
    miss: Vec<f64>,
}

impl KernelTable {
    fn new(m: u64, p: f64) -> Self {
        let params = ModelParams { n: 2, m, p };
        KernelTable {
            p_hat: params.p_hat(),
            q_hat: params.q_hat(),
            miss: (0..=m as i32).map(|k| (1.0 - p).powi(k)).collect(),
        }
    }

    #[inline]
    fn eval(&self, kernel: KernelId, x: u32, y: u32) -> f64 {
        let g = || if x & y != 0 { 1.0 } else { 0.0 };
        let miss = || self.miss[x.count_ones() as usize];
        match kernel {
            KernelId::G2 => g(),
            KernelId::G2Bar => g() - self.p_hat,
            KernelId::G1 => 1.0 - miss(),
            KernelId::G1Bar => self.q_hat - miss(),
            KernelId::Rho2 => 1.0 - g(),
            KernelId::Rho1 => miss(),
            KernelId::Rho2Bar => (1.0 - g()) - self.q_hat,
            KernelId::Rho1Bar => miss() - self.q_hat,
        }
    }
}

/// Squared `L²` norm of the contraction by exhaustive summation over bit vectors.
pub fn brute_force_norm(spec: &ContractionSpec, m: u64, p: f64) -> Result<f64> {
    let vars = spec.variable_count() as u64;
    if m * vars > BRUTE_FORCE_BITS {
        return Err(Error::Budget {
            what: "bits enumerated by brute-force contraction",
            got: m * vars,
            limit: BRUTE_FORCE_BITS,
        });
    }
    ModelParams::new(2, m, p)?;
    let table = KernelTable::new(m, p);
    let weight: Vec<f64> = (0..=m as u32).map(|k| crate::numeric::bernoulli_weight(p, k, m as u32)).collect();
    let mask = (1u64 << m) - 1;
    let (a, b) = (spec.a, spec.b);
    let free = vars as usize - a;
    // variable layout: [integrated w; shared x; left-only y; right-only z]
    let left_only = spec.left.arity() - b;
    let right_only = spec.right.arity() - b;
    let eval_args = |kernel: KernelId, shared: &[u32], own: &[u32]| -> f64 {
        let mut args = [0u32; 2];
        let mut len = 0;
        for &v in shared.iter().chain(own) {
            args[len] = v;
            len += 1;
        }
        table.eval(kernel, args[0], if len > 1 { args[1] } else { 0 })
    };
    let free_part = |outer: u64| -> f64 {
        let mut free_vars = [0u32; 4];
        let mut wf = 1.0;
        for (j, slot) in free_vars.iter_mut().take(free).enumerate() {
            *slot = (outer >> (m as usize * j) & mask) as u32;
            wf *= weight[slot.count_ones() as usize];
        }
        if wf == 0.0 {
            return 0.0;
        }
        let x = &free_vars[..b - a];
        let y = &free_vars[b - a..b - a + left_only];
        let z = &free_vars[b - a + left_only..b - a + left_only + right_only];
        let mut inner = DoubleDouble::ZERO;
        for integrated in 0u64..1 << (m as usize * a) {
            let mut shared = [0u32; 2];
            let mut wi = 1.0;
            for (j, slot) in shared.iter_mut().take(a).enumerate() {
                *slot = (integrated >> (m as usize * j) & mask) as u32;
                wi *= weight[slot.count_ones() as usize];
            }
            if wi == 0.0 {
                continue;
            }
            for (j, &v) in x.iter().enumerate() {
                shared[a + j] = v;
            }
            let f = eval_args(spec.left, &shared[..b], y);
            let g = eval_args(spec.right, &shared[..b], z);
            inner += wi * f * g;
        }
        let v = inner.to_f64();
        wf * v * v
    };
    let first_bits = if free == 0 { 0 } else { m as usize };
    let rest_bits = m as usize * free - first_bits;
    let partials: Vec<f64> = (0u64..1 << first_bits)
        .into_par_iter()
        .map(|first| dd_sum((0u64..1 << rest_bits).map(|rest| free_part(first | rest << first_bits))))
        .collect();
    Ok(dd_sum(partials))
}

fn q_hat(m: u64, p: f64) -> f64 {
    ModelParams { n: 2, m, p }.q_hat()
}

/// `‖ḡ₂ ∗₂⁰ ḡ₂‖² = p̂(1-p̂)⁴ + (1-p̂)p̂⁴`.
pub fn closed_norm_g2_20(m: u64, p: f64) -> f64 {
    let p_hat = crate::moments::edge_prob(m, p);
    let q = q_hat(m, p);
    p_hat * q.powi(4) + q * p_hat.powi(4)
}

/// `‖ḡ₂ ∗₂¹ ḡ₂‖² = (1-2p̂)² cov + (p̂(1-p̂))²`, with `cov` the covariance of
/// two edges sharing a vertex.
pub fn closed_norm_g2_21(m: u64, p: f64) -> f64 {
    let p_hat = crate::moments::edge_prob(m, p);
    let q = q_hat(m, p);
    let cov = cherry_covariance(m, p);
    (1.0 - 2.0 * p_hat).powi(2) * cov + (p_hat * q).powi(2)
}

/// Binomial(m, p) probabilities, evaluated in log space.
fn binomial_pmf(m: u64, p: f64) -> Vec<f64> {
    if p <= 0.0 || p >= 1.0 {
        let mut pmf = vec![0.0; m as usize + 1];
        pmf[if p <= 0.0 { 0 } else { m as usize }] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_fact = ln_factorials(m);
    (0..=m as usize)
        .map(|k| {
            (ln_fact[m as usize] - ln_fact[k] - ln_fact[m as usize - k] + k as f64 * lp + (m as usize - k) as f64 * lq)
                .exp()
        })
        .collect()
}

fn ln_factorials(m: u64) -> Vec<f64> {
    let mut table = vec![0.0; m as usize + 1];
    for k in 1..=m as usize {
        table[k] = table[k - 1] + (k as f64).ln();
    }
    table
}

/// `‖ḡ₁ ∗₁⁰ ḡ₁‖² = E[((1-p²)^m - (1-p)^|x|)⁴]`, summed over `|x|`.
pub fn closed_norm_g1_10(m: u64, p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let ln_q = m as f64 * crate::numeric::ln_one_minus_sq(p);
    let ln_miss = (-p).ln_1p();
    let pmf = binomial_pmf(m, p);
    dd_sum(pmf.iter().enumerate().map(|(k, &w)| {
        // (1-p)^k (exp(ln q̂ - k ln(1-p)) - 1)
        let k_ln = k as f64 * ln_miss;
        let d = k_ln.exp() * (ln_q - k_ln).exp_m1();
        w * d.powi(4)
    }))
}

/// `‖ḡ₂ ∗₁¹ ḡ₁‖² = E[(1-p)^{2|y|} ((1-p²)^m - (1-p²)^{m-|y|})²]`.
pub fn closed_norm_mix(m: u64, p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let ln_sq = crate::numeric::ln_one_minus_sq(p);
    let ln_miss = (-p).ln_1p();
    let pmf = binomial_pmf(m, p);
    dd_sum(pmf.iter().enumerate().map(|(j, &w)| {
        let j = j as f64;
        let d = ((m as f64 - j) * ln_sq).exp() * (j * ln_sq).exp_m1();
        w * (2.0 * j * ln_miss).exp() * d * d
    }))
}

/// Largest `m` accepted by the cubic-cost closed sum for `‖ḡ₂ ∗₁¹ ḡ₂‖²`.
pub const CLOSED_N11_MAX_M: u64 = 256;

/// `‖ḡ₂ ∗₁¹ ḡ₂‖²`, summed over the joint law of `(|y ∩ z|, |y \ z|, |z \ y|)`.
pub fn closed_norm_g2_11(m: u64, p: f64) -> Result<f64> {
    if m > CLOSED_N11_MAX_M {
        return Err(Error::Budget {
            what: "attribute count for the cubic closed sum",
            got: m,
            limit: CLOSED_N11_MAX_M,
        });
    }
    if p <= 0.0 || p >= 1.0 {
        return Ok(0.0);
    }
    let mu = m as usize;
    let ln_fact = ln_factorials(m);
    let ln_miss = (-p).ln_1p();
    let ln_q = m as f64 * crate::numeric::ln_one_minus_sq(p);
    let (l_both, l_one, l_none) = (2.0 * p.ln(), p.ln() + ln_miss, 2.0 * ln_miss);
    // q̂ - (1-p)^a
    let gap = |a: usize| {
        let a_ln = a as f64 * ln_miss;
        a_ln.exp() * (ln_q - a_ln).exp_m1()
    };
    let mut acc = DoubleDouble::ZERO;
    for i in 0..=mu {
        for j in 0..=mu - i {
            for k in 0..=mu - i - j {
                let l = mu - i - j - k;
                let ln_w = ln_fact[mu] - ln_fact[i] - ln_fact[j] - ln_fact[k] - ln_fact[l]
                    + i as f64 * l_both
                    + (j + k) as f64 * l_one
                    + l as f64 * l_none;
                let (a, b) = (i + j, i + k);
                let ab = ((a + b) as f64 * ln_miss).exp();
                let h = gap(a) * gap(b) + ab * (-(i as f64) * ln_miss).exp_m1();
                acc += ln_w.exp() * h * h;
            }
        }
    }
    Ok(acc.to_f64())
}

/// Edge labels `11, 12, 21, 22` as bits 0..3.
pub const EDGE_LABELS: [&str; 4] = ["11", "12", "21", "22"];

/// Edges `e_11, e_12, e_21, e_22` of `G_i`.
///
/// `G_1`: star, center 0. `G_2`: cycle with `x_1 = 0, x_2 = 1, y_1 = 2,
/// y_2 = 3`, `e_ab = x_a y_b`. `G_3`: path `z_12 - x_1 - y - x_2 - z_22` on
/// vertices `0..5`.
pub fn g_edges(i: usize) -> Result<[(usize, usize); 4]> {
    match i {
        1 => Ok([(0, 1), (0, 2), (0, 3), (0, 4)]),
        2 => Ok([(0, 2), (0, 3), (1, 2), (1, 3)]),
        3 => Ok([(1, 2), (1, 0), (3, 2), (3, 4)]),
        _ => Err(Error::InvalidParams(format!("graph index must be 1, 2 or 3, got {i}"))),
    }
}

pub fn g_graph(i: usize) -> Result<SmallGraph> {
    let edges = g_edges(i)?;
    let h = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    SmallGraph::new(h, &edges)
}

/// `G_{i,I}`: the edges of `G_i` with labels in `I`, on the vertices they touch.
pub fn g_sub(i: usize, labels: u32) -> Result<SmallGraph> {
    let edges = g_edges(i)?;
    let chosen: Vec<(usize, usize)> = (0..4).filter(|j| labels >> j & 1 == 1).map(|j| edges[j]).collect();
    let mut touched: Vec<usize> = chosen.iter().flat_map(|&(u, v)| [u, v]).collect();
    touched.sort_unstable();
    touched.dedup();
    let index = |v: usize| touched.binary_search(&v).unwrap();
    let compact: Vec<_> = chosen.iter().map(|&(u, v)| (index(u), index(v))).collect();
    SmallGraph::new(touched.len(), &compact)
}

/// `H_{i,I}` on 8 vertices: `G_{i,I}` on the low vertices, each missing
/// label as an isolated edge on fresh vertices, remaining vertices isolated.
/// Edges are listed in label order.
pub fn h_graph(i: usize, labels: u32) -> Result<SmallGraph> {
    let edges = g_edges(i)?;
    let mut touched: Vec<usize> = (0..4)
        .filter(|j| labels >> j & 1 == 1)
        .flat_map(|j| [edges[j].0, edges[j].1])
        .collect();
    touched.sort_unstable();
    touched.dedup();
    let mut next = touched.len();
    let mut list = Vec::with_capacity(4);
    for (j, &(u, v)) in edges.iter().enumerate() {
        if labels >> j & 1 == 1 {
            list.push((touched.binary_search(&u).unwrap(), touched.binary_search(&v).unwrap()));
        } else {
            list.push((next, next + 1));
            next += 2;
        }
    }
    SmallGraph::new(8, &list)
}

/// `Σ_I (-1)^|I| p̂^{4-|I|} π(G_{i,I})`: `n₁₀` for `i = 1`, `n₁₁` for `i = 2`,
/// `n_mix` for `i = 3`.
pub fn alternating_sum_norm(i: usize, m: u64, p: f64) -> Result<f64> {
    ModelParams::new(2, m, p)?;
    let p_hat = crate::moments::edge_prob(m, p);
    let mut terms = Vec::with_capacity(16);
    for labels in 0u32..16 {
        let size = labels.count_ones() as i32;
        let pi = pi_subgraph(&g_sub(i, labels)?, m, p)?;
        let sign = if size % 2 == 1 { -1.0 } else { 1.0 };
        terms.push(sign * p_hat.powi(4 - size) * pi);
    }
    Ok(dd_sum(terms))
}

/// `n₂₀` as the expansion of `E[(1_e - p̂)⁴]`.
pub fn alternating_norm_20(m: u64, p: f64) -> f64 {
    let p_hat = crate::moments::edge_prob(m, p);
    dd_sum((0..=4).map(|k| {
        let pi = if k == 0 { 1.0 } else { p_hat };
        crate::numeric::binomial(4, k as u64) * (-p_hat).powi(4 - k) * pi
    }))
}

/// `n₂₁` as the expansion of `E[(1_{e₁} - p̂)²(1_{e₂} - p̂)²]` over a cherry.
pub fn alternating_norm_21(m: u64, p: f64) -> Result<f64> {
    let p_hat = crate::moments::edge_prob(m, p);
    let cherry = pi_subgraph(&SmallGraph::path(3), m, p)?;
    let mut terms = Vec::new();
    for i1 in 0..=2i32 {
        for i2 in 0..=2i32 {
            let pi = match (i1 > 0, i2 > 0) {
                (true, true) => cherry,
                (false, false) => 1.0,
                _ => p_hat,
            };
            let c = crate::numeric::binomial(2, i1 as u64) * crate::numeric::binomial(2, i2 as u64);
            terms.push(c * (-p_hat).powi(4 - i1 - i2) * pi);
        }
    }
    Ok(dd_sum(terms))
}

/// The complement probabilities `(K_{1,4}, C_4, P_5, P_3)`, equal to the norms
/// `‖ϱ₁∗₁⁰ϱ₁‖²`, `‖ϱ₂∗₁¹ϱ₂‖²`, `‖ϱ₂∗₁¹ϱ₁‖²`, `‖ϱ₁‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementNorms {
    pub k14: f64,
    pub c4: f64,
    pub p5: f64,
    pub p3: f64,
}

pub fn complement_norms(m: u64, p: f64) -> ComplementNorms {
    ComplementNorms {
        k14: pi_complement(&SmallGraph::star(4), m, p),
        c4: pi_complement(&SmallGraph::cycle(4), m, p),
        p5: pi_complement(&SmallGraph::path(5), m, p),
        p3: pi_complement(&SmallGraph::path(3), m, p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Closed,
    Alternating,
    Brute,
}

impl NormMethod {
    pub const ALL: [NormMethod; 3] = [NormMethod::Closed, NormMethod::Alternating, NormMethod::Brute];

    pub fn name(self) -> &'static str {
        match self {
            NormMethod::Closed => "closed",
            NormMethod::Alternating => "alternating",
            NormMethod::Brute => "brute",
        }
    }
}

impl FromStr for NormMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NormMethod::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown norm method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub n20: f64,
    pub n21: f64,
    pub n10: f64,
    pub n11: f64,
    pub n_mix: f64,
}

impl NormTable {
    pub fn entries(&self) -> [f64; 5] {
        [self.n20, self.n21, self.n10, self.n11, self.n_mix]
    }
}

pub fn norm_table(m: u64, p: f64, method: NormMethod) -> Result<NormTable> {
    ModelParams::new(2, m, p)?;
    Ok(match method {
        NormMethod::Closed => NormTable {
            n20: closed_norm_g2_20(m, p),
            n21: closed_norm_g2_21(m, p),
            n10: closed_norm_g1_10(m, p),
            n11: closed_norm_g2_11(m, p)?,
            n_mix: closed_norm_mix(m, p),
        },
        NormMethod::Alternating => NormTable {
            n20: alternating_norm_20(m, p),
            n21: alternating_norm_21(m, p)?,
            n10: alternating_sum_norm(1, m, p)?,
            n11: alternating_sum_norm(2, m, p)?,
            n_mix: alternating_sum_norm(3, m, p)?,
        },
        NormMethod::Brute => {
            // check the largest budget first so nothing runs before a refusal
            let specs = [
                ContractionSpec::n11(),
                ContractionSpec::n20(),
                ContractionSpec::n21(),
                ContractionSpec::n10(),
                ContractionSpec::n_mix(),
            ];
            let vars = specs.iter().map(|s| s.variable_count() as u64).max().unwrap();
            if m * vars > BRUTE_FORCE_BITS {
                return Err(Error::Budget {
                    what: "bits enumerated by brute-force contraction",
                    got: m * vars,
                    limit: BRUTE_FORCE_BITS,
                });
            }
            let v: Vec<f64> = specs.iter().map(|s| brute_force_norm(s, m, p)).collect::<Result<_>>()?;
            NormTable {
                n11: v[0],
                n20: v[1],
                n21: v[2],
                n10: v[3],
                n_mix: v[4],
            }
        }
    })
}

/// Closed sums when affordable, alternating sums otherwise.
pub fn norm_table_auto(m: u64, p: f64) -> Result<NormTable> {
    if m <= CLOSED_N11_MAX_M {
        norm_table(m, p, NormMethod::Closed)
    } else {
        norm_table(m, p, NormMethod::Alternating)
    }
}

/// Monte Carlo estimate with its standard error and a `4 SE` radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub radius: f64,
    pub samples: u64,
}

impl McEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (self.estimate - value).abs() <= self.radius
    }
}

/// For every `J ⊆ {11,12,21,22}` (indexed by its bit pattern), the estimate of
/// `Σ_I (-1)^|I| π(H_{i,I}, 𝒞_J(H_{i,I}))`.
///
/// All sixteen graphs `H_{i,I}` are evaluated on the same sampled rows, so the
/// signed sum is estimated per sample.
pub fn mc_cover_sums(i: usize, m: u64, p: f64, samples: u64, seed: u64) -> Result<[McEstimate; 16]> {
    let params = ModelParams::new(8, m, p)?;
    if samples < 2 {
        return Err(Error::InvalidParams("at least 2 samples are needed".into()));
    }
    let graphs: Vec<Vec<u32>> = (0u32..16).map(|l| h_graph(i, l).map(|g| g.edge_sets())).collect::<Result<_>>()?;
    let embedding: Vec<usize> = (0..8).collect();
    const CHUNK: u64 = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<[(i64, i64); 16]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [(0i64, 0i64); 16];
            for r in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let a = sample_assignment(&params, seed, r);
                let built = built_sets(&a, &embedding);
                let mut y = [0i64; 16];
                for (labels, edges) in graphs.iter().enumerate() {
                    let profile = cover_profile(edges, &built);
                    let sign = if (labels as u32).count_ones() % 2 == 1 { -1 } else { 1 };
                    for (j_set, y_j) in y.iter_mut().enumerate() {
                        if cover_indicator(4, j_set as u32, profile) {
                            *y_j += sign;
                        }
                    }
                }
                for (slot, v) in acc.iter_mut().zip(y) {
                    slot.0 += v;
                    slot.1 += v * v;
                }
            }
            acc
        })
        .collect();
    let mut totals = [(0i64, 0i64); 16];
    for part in &partials {
        for (t, v) in totals.iter_mut().zip(part) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    let n = samples as f64;
    Ok(totals.map(|(s, s2)| {
        let mean = s as f64 / n;
        let var = ((s2 as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
        let se = (var / n).sqrt();
        McEstimate {
            estimate: mean,
            standard_error: se,
            radius: 4.0 * se,
            samples,
        }
    }))
}

pub fn mc_cover_sum_check(i: usize, j_set: u32, m: u64, p: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    if j_set >= 16 {
        return Err(Error::InvalidParams(format!("J must be a subset of the four labels, got {j_set:#b}")));
    }
    Ok(mc_cover_sums(i, m, p, samples, seed)?[j_set as usize])
}

/// Parses labels such as `"11,22"` into a bit pattern; empty means `∅`.
pub fn parse_label_set(text: &str) -> Result<u32> {
    let mut set = 0;
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let j = EDGE_LABELS
            .iter()
            .position(|&l| l == item)
            .ok_or_else(|| Error::Parse(format!("unknown edge label {item:?}")))?;
        set |= 1 << j;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14f64.max(1e-10 * a.abs().max(b.abs()))
    }

    #[test]
    fn n20_at_half() {
        let v = brute_force_norm(&ContractionSpec::n20(), 1, 0.5).unwrap();
        assert!((v - 0.08203125).abs() < 1e-16);
        assert!((closed_norm_g2_20(1, 0.5) - 0.08203125).abs() < 1e-16);
        assert!((alternating_norm_20(1, 0.5) - 0.08203125).abs() < 1e-16);
    }

    #[test]
    fn n21_identity_against_brute_force() {
        let b = brute_force_norm(&ContractionSpec::n21(), 1, 0.5).unwrap();
        assert!((closed_norm_g2_21(1, 0.5) - b).abs() < 1e-14);
        let b = brute_force_norm(&ContractionSpec::n21(), 3, 0.3).unwrap();
        assert!((closed_norm_g2_21(3, 0.3) - b).abs() < 1e-12);
    }

    #[test]
    fn degenerate_p_gives_zero_norms() {
        for method in NormMethod::ALL {
            let t = norm_table(3, 0.0, method).unwrap();
            assert!(t.entries().iter().all(|&v| v.abs() < 1e-300), "{method:?} {t:?}");
        }
        assert_eq!(closed_norm_g2_20(4, 1.0), 0.0);
    }

    #[test]
    fn alternating_matches_brute_force() {
        let b = brute_force_norm(&ContractionSpec::n10(), 2, 0.5).unwrap();
        assert!(close(alternating_sum_norm(1, 2, 0.5).unwrap(), b));
        let b = brute_force_norm(&ContractionSpec::n_mix(), 2, 0.25).unwrap();
        assert!(close(alternating_sum_norm(3, 2, 0.25).unwrap(), b));
    }

    #[test]
    fn method_triangle_small_grid() {
        for m in 1..=4 {
            for &p in &[0.2, 0.5, 0.8] {
                let c = norm_table(m, p, NormMethod::Closed).unwrap().entries();
                let a = norm_table(m, p, NormMethod::Alternating).unwrap().entries();
                let b = norm_table(m, p, NormMethod::Brute).unwrap().entries();
                for k in 0..5 {
                    assert!(close(c[k], b[k]) && close(a[k], b[k]), "m={m} p={p} k={k}: {c:?} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn negated_kernels_give_equal_norms() {
        let pairs = [
            (KernelId::G2Bar, KernelId::G2Bar, 2, 0),
            (KernelId::G2Bar, KernelId::G2Bar, 2, 1),
            (KernelId::G1Bar, KernelId::G1Bar, 1, 0),
            (KernelId::G2Bar, KernelId::G2Bar, 1, 1),
            (KernelId::G2Bar, KernelId::G1Bar, 1, 1),
        ];
        for (l, r, b, a) in pairs {
            let s = ContractionSpec::new(l, r, b, a).unwrap();
            let t = ContractionSpec::new(l.complement(), r.complement(), b, a).unwrap();
            for m in 1..=4 {
                let x = brute_force_norm(&s, m, 0.35).unwrap();
                let y = brute_force_norm(&t, m, 0.35).unwrap();
                assert!(close(x, y), "{s:?} m={m}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn budget_and_spec_checks() {
        assert!(brute_force_norm(&ContractionSpec::n11(), 9, 0.3).unwrap_err().is_budget());
        assert!(norm_table(9, 0.3, NormMethod::Brute).unwrap_err().is_budget());
        assert!(ContractionSpec::new(KernelId::G1, KernelId::G2, 2, 0).is_err());
        assert!(ContractionSpec::new(KernelId::G2, KernelId::G2, 1, 2).is_err());
        assert!(closed_norm_g2_11(CLOSED_N11_MAX_M + 1, 0.1).unwrap_err().is_budget());
    }

    #[test]
    fn complement_norms_at_half() {
        let c = complement_norms(1, 0.5);
        assert_eq!((c.k14, c.c4, c.p5, c.p3), (0.53125, 0.4375, 0.40625, 0.625));
        let z = complement_norms(17, 0.0);
        assert_eq!((z.k14, z.c4, z.p5, z.p3), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn complement_norms_are_rho_contractions() {
        let (m, p) = (3, 0.4);
        let c = complement_norms(m, p);
        let rho = |l, r, b, a| brute_force_norm(&ContractionSpec::new(l, r, b, a).unwrap(), m, p).unwrap();
        assert!(close(c.k14, rho(KernelId::Rho1, KernelId::Rho1, 1, 0)));
        assert!(close(c.c4, rho(KernelId::Rho2, KernelId::Rho2, 1, 1)));
        assert!(close(c.p5, rho(KernelId::Rho2, KernelId::Rho1, 1, 1)));
        // ‖ϱ₁‖² = E[(1-p)^{2|y|}]
        let direct: f64 = (0..=m as u32)
            .map(|k| crate::numeric::binomial(m, k as u64) * crate::numeric::bernoulli_weight(p, k, m as u32) * (1.0 - p).powi(2 * k as i32))
            .sum();
        assert!(close(c.p3, direct));
    }

    #[test]
    fn h_graphs_have_expected_shape() {
        for i in 1..=3 {
            for labels in 0u32..16 {
                let h = h_graph(i, labels).unwrap();
                assert_eq!(h.h(), 8);
                assert_eq!(h.edge_count(), 4);
                let g = g_sub(i, labels).unwrap();
                assert_eq!(g.edge_count(), labels.count_ones() as usize);
            }
        }
        assert_eq!(g_graph(2).unwrap(), SmallGraph::new(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap());
        assert_eq!(parse_label_set("11, 22").unwrap(), 0b1001);
        assert!(parse_label_set("13").is_err());
    }

    #[test]
    fn mc_full_label_sum_tracks_norm() {
        // with J = all labels the signed sum is the whole alternating sum
        let (m, p) = (3, 0.5);
        let sums = mc_cover_sums(2, m, p, 200_000, 9).unwrap();
        let total: f64 = sums.iter().map(|e| e.estimate).sum();
        let exact = alternating_sum_norm(2, m, p).unwrap();
        let se_total: f64 = sums.iter().map(|e| e.standard_error).sum();
        assert!((total - exact).abs() < 4.0 * se_total, "{total} vs {exact}");
    }
}
