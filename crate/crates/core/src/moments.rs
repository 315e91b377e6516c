//! Mean and exact variance of the edge count `N_E`.

use crate::model::{edge_probability, ModelParams};
use crate::numeric::binomial;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub mean: f64,
    pub variance: f64,
    /// `C(n,2) p̂ (1 - p̂)`
    pub term_pairwise: f64,
    /// `6 C(n,3) [(1 - 2p² + p³)^m - (1 - p̂)²]`, the covariance of cherries
    pub term_cherry: f64,
    pub regime_mp3: f64,
}

/// `1 - (1 - p²)^m`.
pub fn edge_prob(m: u64, p: f64) -> f64 {
    edge_probability(m, p)
}

pub fn expected_edges(params: &ModelParams) -> f64 {
    binomial(params.n, 2) * params.p_hat()
}

/// `ln(1 - 2p² + p³) = ln(1 - p) + ln(1 + p - p²)`.
fn ln_cherry_factor(p: f64) -> f64 {
    (-p).ln_1p() + (p - p * p).ln_1p()
}

/// `(1 - 2p² + p³)^m`: probability that two edges sharing a vertex are both absent.
pub fn cherry_absent(m: u64, p: f64) -> f64 {
    (m as f64 * ln_cherry_factor(p)).exp()
}

/// Covariance of the indicators of two edges sharing one vertex,
/// `(1 - 2p² + p³)^m - (1 - p²)^{2m}`, without cancellation.
pub fn cherry_covariance(m: u64, p: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    let s = cherry_absent(m, p);
    // (1-2p²+p⁴)/(1-2p²+p³) = 1 - p³/(1+p-p²)
    let ratio_deficit = p * p * p / (1.0 + p - p * p);
    s * -(m as f64 * (-ratio_deficit).ln_1p()).exp_m1()
}

pub fn variance_edges(params: &ModelParams) -> VarianceReport {
    let p_hat = params.p_hat();
    let q_hat = params.q_hat();
    let term_pairwise = binomial(params.n, 2) * p_hat * q_hat;
    let term_cherry = 6.0 * binomial(params.n, 3) * cherry_covariance(params.m, params.p);
    VarianceReport {
        mean: expected_edges(params),
        variance: term_pairwise + term_cherry,
        term_pairwise,
        term_cherry,
        regime_mp3: params.mp3(),
    }
}

/// Order-of-magnitude summands of the variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRegime {
    /// `n² p̂ (1 - p̂)`
    pub pairwise: f64,
    /// `n³ (1 - 2p² + p³)^m min(1, m p³)`
    pub cherry: f64,
    pub mp3: f64,
    /// `(n² p̂ (1 - p̂), n³ m p³ (1 - p̂)²)`, present when `m p³ <= 1`
    pub small_mp3: Option<(f64, f64)>,
}

pub fn variance_regime(params: &ModelParams) -> VarianceRegime {
    let n = params.n as f64;
    let p_hat = params.p_hat();
    let q_hat = params.q_hat();
    let mp3 = params.mp3();
    let pairwise = n * n * p_hat * q_hat;
    let cherry = n.powi(3) * cherry_absent(params.m, params.p) * mp3.min(1.0);
    VarianceRegime {
        pairwise,
        cherry,
        mp3,
        small_mp3: (mp3 <= 1.0).then(|| (pairwise, n.powi(3) * mp3 * q_hat * q_hat)),
    }
}
