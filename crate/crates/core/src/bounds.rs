//! Distance-bound brackets and regime classification.
//!
//! Every bracket is the bound with its unspecified absolute constant set to
//! one; only rates and ratios between brackets carry meaning. Degenerate
//! inputs (`p ∈ {0, 1}`, zero variance) give `+∞` rather than an error.

use crate::contractions::{complement_norms, norm_table_auto, NormTable};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::moments::variance_edges;
use crate::subgraphs::{mp3_at_most_one, pi_complement, SmallGraph, REGIME_SLACK};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const BRACKET_LABEL: &str = "bracket (constant-free)";

fn mp3_small(params: &ModelParams) -> bool {
    mp3_at_most_one(params.m, params.p)
}

fn mp3_large(params: &ModelParams) -> bool {
    params.mp3() >= 1.0 - REGIME_SLACK
}

/// `n² p̂ (1 - p̂)`.
pub fn necessary_stat(params: &ModelParams) -> f64 {
    let n = params.n as f64;
    n * n * params.p_hat() * params.q_hat()
}

fn reciprocal(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x
    } else {
        f64::INFINITY
    }
}

/// `(1 / (n² p̂ (1 - p̂)))^{1/4}`.
pub fn bracket_quarter(params: &ModelParams) -> f64 {
    reciprocal(necessary_stat(params)).powf(0.25)
}

/// `(1 / (n² p̂ (1 - p̂)) + 1/n + 1/m)^{1/2}`, for `m p³ <= 1`.
pub fn bracket_half(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if !mp3_small(params) {
        return Err(Error::Regime(format!("needs m p^3 <= 1, got {}", params.mp3())));
    }
    Ok((reciprocal(necessary_stat(params)) + 1.0 / params.n as f64 + 1.0 / params.m as f64).sqrt())
}

/// The three-term form the half bracket is derived from:
/// `(1/(n²p̂(1-p̂)) + 1/n + min(1/(nmp), p²(1-p̂)/p̂))^{1/2}`, for `m p³ <= 1`.
pub fn bracket_best(params: &ModelParams) -> Result<f64> {
    bracket_half(params)?;
    let (n, m, p) = (params.n as f64, params.m as f64, params.p);
    let third = reciprocal(n * m * p).min(p * p * params.q_hat() * reciprocal(params.p_hat()));
    Ok((reciprocal(necessary_stat(params)) + 1.0 / n + third).sqrt())
}

/// `bracket_best` with its minimum replaced by `ln(1/(1-p̂)) (1-p̂) / (m p̂)`.
pub fn bracket_log_branch(params: &ModelParams) -> Result<f64> {
    bracket_half(params)?;
    let ln_inv_q = -(params.m as f64) * crate::numeric::ln_one_minus_sq(params.p);
    let third = ln_inv_q * params.q_hat() * reciprocal(params.m as f64 * params.p_hat());
    Ok((reciprocal(necessary_stat(params)) + 1.0 / params.n as f64 + third).sqrt())
}

/// `(1/(n²p̂(1-p̂)) + 1/n + n⁵ P(K_{1,4} ⊆ complement) / Var²)^{1/2}`, for
/// `n >= 5` and `m p³ >= 1`.
pub fn bracket_k14(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if params.n < 5 {
        return Err(Error::Regime(format!("needs n >= 5, got {}", params.n)));
    }
    if !mp3_large(params) {
        return Err(Error::Regime(format!("needs m p^3 >= 1, got {}", params.mp3())));
    }
    let n = params.n as f64;
    let var = variance_edges(params).variance;
    let star = pi_complement(&SmallGraph::star(4), params.m, params.p);
    let third = if var > 0.0 { n.powi(5) * star / (var * var) } else { f64::INFINITY };
    Ok((reciprocal(necessary_stat(params)) + 1.0 / n + third).sqrt())
}

/// `ln(1 - p + p(1-p)⁴)`
fn ln_star_factor(p: f64) -> f64 {
    let hit = p * -(4.0 * (-p).ln_1p()).exp_m1();
    (-hit).ln_1p()
}

/// `ln(1 - 2p² + p³)`
fn ln_cherry_factor(p: f64) -> f64 {
    (-p).ln_1p() + (p - p * p).ln_1p()
}

fn check_open_unit(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParams(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(())
}

/// `Q(m, p) = ((1 - p + p(1-p)⁴) / (1 - 2p² + p³)²)^m`.
pub fn q_ratio(m: u64, p: f64) -> Result<f64> {
    check_open_unit(p)?;
    Ok((m as f64 * (ln_star_factor(p) - 2.0 * ln_cherry_factor(p))).exp())
}

/// `ln(Q(m, p) sqrt(1 - p̂))`; the inequality `Q sqrt(1 - p̂) <= 1` holds iff
/// this is `<= 0`.
pub fn q_log_margin(m: u64, p: f64) -> Result<f64> {
    check_open_unit(p)?;
    let per_attribute = ln_star_factor(p) - 2.0 * ln_cherry_factor(p) + 0.5 * crate::numeric::ln_one_minus_sq(p);
    Ok(m as f64 * per_attribute)
}

/// Which of the three contraction shapes a norm entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `‖h̄_j ∗_j^i h̄_j‖²`, `0 <= i < j`
    Diagonal,
    /// `‖h̄_j ∗_i^i h̄_j‖²`, `1 <= i < j`
    Same,
    /// `‖h̄_j ∗_i^i h̄_i‖²`, `1 <= i < j`
    Mixed,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Diagonal => "diagonal",
            NormKind::Same => "same",
            NormKind::Mixed => "mixed",
        }
    }
}

pub type NormKey = (usize, usize, NormKind);

/// The norm entries of the edge kernel (`r = 2`).
pub fn edge_kernel_norms(table: &NormTable) -> BTreeMap<NormKey, f64> {
    BTreeMap::from([
        ((1, 0, NormKind::Diagonal), table.n10),
        ((2, 0, NormKind::Diagonal), table.n20),
        ((2, 1, NormKind::Diagonal), table.n21),
        ((2, 1, NormKind::Same), table.n11),
        ((2, 1, NormKind::Mixed), table.n_mix),
    ])
}

/// Bound for a degree-`r` U-statistic with constant 1:
/// `(n^{2r} / Var) (Σ_{0<=i<j<=r} N^{jji}/n^{3j-i} + Σ_{1<=i<j<=r} (N^{jii}/n^{2j} + N^{iij}/n^{j+i}))^{1/2}`.
pub fn general_bound_bracket(r: usize, var: f64, n: u64, norms: &BTreeMap<NormKey, f64>) -> Result<f64> {
    let nf = n as f64;
    let get = |key: NormKey| -> Result<f64> {
        let v = *norms.get(&key).ok_or(Error::MissingNorm {
            j: key.0,
            i: key.1,
            kind: key.2.name(),
        })?;
        if !(v >= 0.0) {
            return Err(Error::InvalidParams(format!("norm {key:?} must be nonnegative, got {v}")));
        }
        Ok(v)
    };
    let terms = scaled_terms(r, nf, &get)?;
    if var <= 0.0 {
        return Ok(if terms == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(terms.sqrt() / var)
}

/// `n^{4r} × (inner sum)`, assembled term by term to avoid overflow.
fn scaled_terms(r: usize, n: f64, get: &dyn Fn(NormKey) -> Result<f64>) -> Result<f64> {
    let scale = 4 * r as i32;
    let mut sum = 0.0;
    for j in 1..=r {
        for i in 0..j {
            sum += get((j, i, NormKind::Diagonal))? * n.powi(scale - (3 * j - i) as i32);
        }
    }
    for j in 2..=r {
        for i in 1..j {
            sum += get((j, i, NormKind::Same))? * n.powi(scale - 2 * j as i32);
            sum += get((j, i, NormKind::Mixed))? * n.powi(scale - (j + i) as i32);
        }
    }
    Ok(sum)
}

/// `(1/Var)(n² n₂₀ + n³ n₂₁ + n⁵ n₁₀ + n⁴ n₁₁ + n⁵ n_mix)^{1/2}`.
pub fn bracket_dkw(params: &ModelParams, table: &NormTable) -> f64 {
    let n = params.n as f64;
    let var = variance_edges(params).variance;
    let sum = n.powi(2) * table.n20
        + n.powi(3) * table.n21
        + n.powi(5) * table.n10
        + n.powi(4) * table.n11
        + n.powi(5) * table.n_mix;
    if var > 0.0 {
        sum.sqrt() / var
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Mp3Small,
    Mp3LargePSmall,
    PModerate,
    PLarge,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Mp3Small => "mp3_small",
            Regime::Mp3LargePSmall => "mp3_large_p_small",
            Regime::PModerate => "p_moderate",
            Regime::PLarge => "p_large",
        }
    }
}

/// Expected behavior for moderate `p`, read off `m / ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdFlag {
    NormalityExpected,
    Indeterminate,
    NormalityExpectedToFail,
}

impl ThresholdFlag {
    pub fn describe(self) -> &'static str {
        match self {
            ThresholdFlag::NormalityExpected => "normality expected",
            ThresholdFlag::Indeterminate => "indeterminate",
            ThresholdFlag::NormalityExpectedToFail => "normality expected to fail",
        }
    }
}

pub const SMALL_P: f64 = 0.1;
pub const LARGE_P: f64 = 0.9;
pub const THRESHOLD_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub mp3: f64,
    pub necessary_stat: f64,
    /// `m / ln n`
    pub threshold_ratio: f64,
    pub threshold: Option<ThresholdFlag>,
}

pub fn classify_regime(params: &ModelParams) -> RegimeReport {
    let ratio = params.m as f64 / (params.n as f64).ln();
    let regime = if params.p >= LARGE_P {
        Regime::PLarge
    } else if params.p > SMALL_P {
        Regime::PModerate
    } else if mp3_small(params) {
        Regime::Mp3Small
    } else {
        Regime::Mp3LargePSmall
    };
    let threshold = (regime == Regime::PModerate).then(|| {
        if ratio < THRESHOLD_BAND.0 {
            ThresholdFlag::NormalityExpected
        } else if ratio > THRESHOLD_BAND.1 {
            ThresholdFlag::NormalityExpectedToFail
        } else {
            ThresholdFlag::Indeterminate
        }
    });
    RegimeReport {
        regime,
        mp3: params.mp3(),
        necessary_stat: necessary_stat(params),
        threshold_ratio: ratio,
        threshold,
    }
}

/// All brackets for one parameter point; brackets outside their regime are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub label: String,
    pub bracket_main_quarter: f64,
    pub bracket_main_half: Option<f64>,
    pub bracket_k14: Option<f64>,
    pub bracket_dkw: Option<f64>,
    pub q_ratio: Option<f64>,
    pub regime: Regime,
    pub mp3: f64,
    pub necessary_stat: f64,
    pub threshold_ratio: f64,
    pub threshold: Option<ThresholdFlag>,
}

pub fn bound_report(params: &ModelParams) -> Result<BoundReport> {
    params.validate()?;
    let regime = classify_regime(params);
    let dkw = norm_table_auto(params.m, params.p).ok().map(|t| bracket_dkw(params, &t));
    Ok(BoundReport {
        label: BRACKET_LABEL.to_string(),
        bracket_main_quarter: bracket_quarter(params),
        bracket_main_half: bracket_half(params).ok(),
        bracket_k14: bracket_k14(params).ok(),
        bracket_dkw: dkw,
        q_ratio: q_ratio(params.m, params.p).ok(),
        regime: regime.regime,
        mp3: regime.mp3,
        necessary_stat: regime.necessary_stat,
        threshold_ratio: regime.threshold_ratio,
        threshold: regime.threshold,
    })
}

/// `P(P₅ ⊆ complement) <= P(K_{1,4} ⊆ complement)`, the comparison used for
/// large `m p³`.
pub fn path_below_star(m: u64, p: f64) -> bool {
    let c = complement_norms(m, p);
    c.p5 <= c.k14 * (1.0 + 1e-12)
}
