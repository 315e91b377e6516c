//! Kolmogorov and Wasserstein distances between the standardized edge count
//! and `N(0, 1)`.
//!
//! Exact laws come from a dynamic program over covered-pair masks (`n <= 6`);
//! larger graphs are handled by Monte Carlo with DKW-type error radii.

use crate::bounds::{bound_report, BoundReport};
use crate::error::{Error, Result};
use crate::model::{pair_index, ModelParams};
use crate::moments::{expected_edges, variance_edges};
use crate::numeric::{dd_sum, normal_cdf, normal_cdf_integral, normal_quantile, regression_slope};
use crate::sampler::EdgeCountSampler;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `n` accepted by [`exact_pmf`].
pub const MAX_EXACT_VERTICES: u64 = 6;
/// Largest `n m` accepted by [`enumerate_pmf`].
pub const MAX_ENUMERATION_BITS: u64 = 20;
/// Cap on `m × states × transitions` for the dynamic program.
pub const MAX_DP_WORK: u64 = 100_000_000_000;
pub const MIN_MC_SAMPLES: u64 = 100;
/// Confidence level of the DKW radius.
pub const DKW_DELTA: f64 = 1e-3;

/// Exact law of the edge count, indexed by value `0..=C(n,2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPmf {
    pub n: u64,
    pub probs: Vec<f64>,
}

impl ExactPmf {
    pub fn pair_count(&self) -> u64 {
        self.probs.len() as u64 - 1
    }

    pub fn total(&self) -> f64 {
        dd_sum(self.probs.iter().copied())
    }

    /// Moments of the edge count. Computed on whichever of `N_E` and
    /// `C(n,2) - N_E` has the smaller mean so small tails keep their precision.
    pub fn mean_variance(&self) -> (f64, f64) {
        let c = self.pair_count() as f64;
        let mean_edges = dd_sum(self.probs.iter().enumerate().map(|(k, &w)| k as f64 * w));
        let mean_missing = dd_sum(self.probs.iter().enumerate().map(|(k, &w)| (c - k as f64) * w));
        if mean_edges <= mean_missing {
            let var = dd_sum(self.probs.iter().enumerate().map(|(k, &w)| (k as f64 - mean_edges).powi(2) * w));
            (mean_edges, var)
        } else {
            let var = dd_sum(
                self.probs.iter().enumerate().map(|(k, &w)| (c - k as f64 - mean_missing).powi(2) * w),
            );
            (c - mean_missing, var)
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean_variance().0
    }

    pub fn variance(&self) -> f64 {
        self.mean_variance().1
    }
}

fn check_exact_size(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.n > MAX_EXACT_VERTICES {
        return Err(Error::Budget {
            what: "vertex count for exact distribution",
            got: params.n,
            limit: MAX_EXACT_VERTICES,
        });
    }
    Ok(())
}

/// Distinct pair masks one attribute can add, with their probabilities.
fn attribute_transitions(n: usize, p: f64) -> Vec<(usize, f64)> {
    let mut by_mask = std::collections::BTreeMap::<usize, f64>::new();
    for subset in 0u32..1 << n {
        let size = subset.count_ones() as i32;
        let w = p.powi(size) * (1.0 - p).powi(n as i32 - size);
        if w == 0.0 {
            continue;
        }
        let mut mask = 0usize;
        for k in 0..n {
            for l in k + 1..n {
                if subset >> k & 1 == 1 && subset >> l & 1 == 1 {
                    mask |= 1 << pair_index(n, k, l);
                }
            }
        }
        *by_mask.entry(mask).or_insert(0.0) += w;
    }
    by_mask.into_iter().collect()
}

fn marginalize(n: u64, states: &[f64]) -> ExactPmf {
    let pairs = (n * n.saturating_sub(1) / 2) as usize;
    let mut probs = vec![0.0; pairs + 1];
    for (s, &w) in states.iter().enumerate() {
        probs[s.count_ones() as usize] += w;
    }
    ExactPmf { n, probs }
}

/// Exact laws after `1, 2, ..., m` attributes, from one run of the dynamic
/// program.
pub fn exact_pmf_steps(params: &ModelParams) -> Result<Vec<ExactPmf>> {
    check_exact_size(params)?;
    let n = params.n as usize;
    let pairs = n * n.saturating_sub(1) / 2;
    let transitions = attribute_transitions(n, params.p);
    let work = params.m.saturating_mul(1 << pairs).saturating_mul(transitions.len() as u64);
    if work > MAX_DP_WORK {
        return Err(Error::Budget {
            what: "dynamic program work",
            got: work,
            limit: MAX_DP_WORK,
        });
    }
    let mut states = vec![0.0; 1 << pairs];
    states[0] = 1.0;
    let mut next = vec![0.0; 1 << pairs];
    let mut out = Vec::with_capacity(params.m as usize);
    for _ in 0..params.m {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, &w) in states.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(mask, t) in &transitions {
                next[s | mask] += w * t;
            }
        }
        std::mem::swap(&mut states, &mut next);
        out.push(marginalize(params.n, &states));
    }
    Ok(out)
}

/// Exact law of `N_E` for `n <= 6` and any `m`.
pub fn exact_pmf(params: &ModelParams) -> Result<ExactPmf> {
    Ok(exact_pmf_steps(params)?.pop().expect("m >= 1"))
}

/// Exact law by enumerating all `2^{nm}` assignment matrices.
pub fn enumerate_pmf(params: &ModelParams) -> Result<ExactPmf> {
    params.validate()?;
    let bits = params.n * params.m;
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::Budget {
            what: "assignment bits for enumeration",
            got: bits,
            limit: MAX_ENUMERATION_BITS,
        });
    }
    let (n, m, p) = (params.n as usize, params.m as usize, params.p);
    let row_mask = (1u64 << m) - 1;
    let pairs = n * n.saturating_sub(1) / 2;
    let mut acc = vec![crate::numeric::DoubleDouble::ZERO; pairs + 1];
    for x in 0u64..1 << bits {
        let ones = x.count_ones() as i32;
        let w = p.powi(ones) * (1.0 - p).powi(bits as i32 - ones);
        if w == 0.0 {
            continue;
        }
        let row = |k: usize| (x >> (k * m)) & row_mask;
        let mut edges = 0;
        for k in 0..n {
            for l in k + 1..n {
                if row(k) & row(l) != 0 {
                    edges += 1;
                }
            }
        }
        acc[edges] = acc[edges].add_f64(w);
    }
    let probs = acc.into_iter().map(|a| a.to_f64()).collect();
    Ok(ExactPmf { n: params.n, probs })
}

/// A discrete law on the real line: sorted atoms with the CDF just before
/// and the survival function just after each atom.
#[derive(Debug, Clone)]
struct Atoms {
    xs: Vec<f64>,
    cdf_before: Vec<f64>,
    surv_after: Vec<f64>,
}

impl Atoms {
    fn from_weights(xs: Vec<f64>, weights: &[f64]) -> Self {
        let total = dd_sum(weights.iter().copied());
        let mut cdf_before = Vec::with_capacity(xs.len());
        let mut acc = crate::numeric::DoubleDouble::ZERO;
        for &w in weights {
            cdf_before.push(acc.to_f64() / total);
            acc = acc.add_f64(w);
        }
        let mut surv_after = vec![0.0; xs.len()];
        let mut acc = crate::numeric::DoubleDouble::ZERO;
        for i in (0..xs.len()).rev() {
            surv_after[i] = acc.to_f64() / total;
            acc = acc.add_f64(weights[i]);
        }
        Atoms { xs, cdf_before, surv_after }
    }

    fn kolmogorov(&self) -> f64 {
        let mut sup = 0.0f64;
        for i in 0..self.xs.len() {
            let x = self.xs[i];
            let before = self.cdf_before[i];
            let after = self.surv_after[i];
            let d = if x <= 0.0 {
                let phi = normal_cdf(x);
                (before - phi).abs().max((1.0 - after - phi).abs())
            } else {
                let tail = normal_cdf(-x);
                (1.0 - before - tail).abs().max((after - tail).abs())
            };
            sup = sup.max(d);
        }
        sup.min(1.0)
    }

    /// `∫ |F(t) - Φ(t)| dt`, piecewise in closed form.
    fn wasserstein(&self) -> f64 {
        let k = self.xs.len();
        let mut terms = Vec::with_capacity(k + 1);
        terms.push(segment(f64::NEG_INFINITY, self.xs[0], 0.0, 1.0));
        for i in 0..k - 1 {
            let f = 1.0 - self.surv_after[i];
            terms.push(segment(self.xs[i], self.xs[i + 1], f, self.surv_after[i]));
        }
        terms.push(segment(self.xs[k - 1], f64::INFINITY, 1.0, 0.0));
        dd_sum(terms)
    }

    /// `∫ sqrt(F (1 - F)) dt` over the hull of the atoms.
    fn spread(&self) -> f64 {
        dd_sum((0..self.xs.len().saturating_sub(1)).map(|i| {
            let s = self.surv_after[i];
            (s * (1.0 - s)).max(0.0).sqrt() * (self.xs[i + 1] - self.xs[i])
        }))
    }
}

/// `∫_a^b |c - Φ(t)| dt` for `b <= 0`.
fn lower_segment(a: f64, b: f64, c: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let g = normal_cdf_integral;
    if c <= 0.0 {
        return g(b) - g(a);
    }
    let t = normal_quantile(c).clamp(a, b);
    let left = if t > a { c * (t - a) - (g(t) - g(a)) } else { 0.0 };
    let right = if b > t { (g(b) - g(t)) - c * (b - t) } else { 0.0 };
    left.max(0.0) + right.max(0.0)
}

/// `∫_a^b |F - Φ(t)| dt` for constant `F = f = 1 - s`; the right half line is
/// mirrored so both tails are handled through `Φ(-t) = 1 - Φ(t)`.
fn segment(a: f64, b: f64, f: f64, s: f64) -> f64 {
    if b <= 0.0 {
        lower_segment(a, b, f)
    } else if a >= 0.0 {
        lower_segment(-b, -a, s)
    } else {
        lower_segment(a, 0.0, f) + lower_segment(-b, 0.0, s)
    }
}

/// Distances to `N(0, 1)` with their error radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    #[serde(rename = "d_K")]
    pub d_k: f64,
    #[serde(rename = "d_K_radius")]
    pub d_k_radius: f64,
    #[serde(rename = "d_W")]
    pub d_w: f64,
    #[serde(rename = "d_W_radius")]
    pub d_w_radius: f64,
    #[serde(rename = "N")]
    pub n_samples: u64,
    pub exact: bool,
}

/// Exact `d_K` and `d_W` of the standardized law `pmf`.
pub fn exact_distances(pmf: &ExactPmf) -> Result<DistanceReport> {
    let (mean, var) = pmf.mean_variance();
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let sd = var.sqrt();
    let (xs, ws): (Vec<f64>, Vec<f64>) = pmf
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| ((k as f64 - mean) / sd, w))
        .unzip();
    let atoms = Atoms::from_weights(xs, &ws);
    Ok(DistanceReport {
        d_k: atoms.kolmogorov(),
        d_k_radius: 0.0,
        d_w: atoms.wasserstein(),
        d_w_radius: 0.0,
        n_samples: 0,
        exact: true,
    })
}

/// `sqrt(ln(2/δ) / (2N))`
pub fn dkw_radius(samples: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Sorted edge counts standardized with the exact mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    pub values: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

impl EmpiricalSample {
    /// Standardizes raw edge counts with the exact moments of `params`.
    pub fn from_counts(params: &ModelParams, mut counts: Vec<u64>) -> Result<Self> {
        let var = variance_edges(params).variance;
        if !(var > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let mean = expected_edges(params);
        let stddev = var.sqrt();
        counts.sort_unstable();
        let values = counts.into_iter().map(|k| (k as f64 - mean) / stddev).collect();
        Ok(EmpiricalSample { values, mean, stddev })
    }

    pub fn count(&self) -> u64 {
        self.values.len() as u64
    }

    /// The sample of `-x`, i.e. the standardized non-edge count.
    pub fn negated(&self) -> Self {
        EmpiricalSample {
            values: self.values.iter().rev().map(|x| -x).collect(),
            mean: -self.mean,
            stddev: self.stddev,
        }
    }

    fn atoms(&self) -> Atoms {
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for &x in &self.values {
            if xs.last() == Some(&x) {
                *ws.last_mut().unwrap() += 1.0;
            } else {
                xs.push(x);
                ws.push(1.0);
            }
        }
        Atoms::from_weights(xs, &ws)
    }

    /// KS statistic and `W₁` distance against `Φ`.
    ///
    /// The `d_W` radius is `4 ∫ sqrt(F_N (1 - F_N)) dt / sqrt(N)`, four times
    /// the plug-in bound on the expected `W₁` error.
    pub fn distances(&self) -> DistanceReport {
        let atoms = self.atoms();
        let n = self.count();
        DistanceReport {
            d_k: atoms.kolmogorov(),
            d_k_radius: dkw_radius(n, DKW_DELTA),
            d_w: atoms.wasserstein(),
            d_w_radius: 4.0 * atoms.spread() / (n as f64).sqrt(),
            n_samples: n,
            exact: false,
        }
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `samples` edge counts, replicate `i` drawn from stream `(seed, i)`.
/// `threads = 0` uses all cores; the result does not depend on it.
pub fn mc_edge_counts(params: &ModelParams, samples: u64, seed: u64, threads: usize) -> Result<Vec<u64>> {
    let sampler = EdgeCountSampler::new(*params)?;
    with_threads(threads, || (0..samples).into_par_iter().map(|i| sampler.sample(seed, i)).collect())
}

pub fn mc_sample(params: &ModelParams, samples: u64, seed: u64, threads: usize) -> Result<EmpiricalSample> {
    params.validate()?;
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    if !(variance_edges(params).variance > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    EmpiricalSample::from_counts(params, mc_edge_counts(params, samples, seed, threads)?)
}

pub fn mc_sample_distances(params: &ModelParams, samples: u64, seed: u64, threads: usize) -> Result<DistanceReport> {
    Ok(mc_sample(params, samples, seed, threads)?.distances())
}

/// One point of a convergence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ModelParams,
    pub distance: DistanceReport,
    pub bounds: BoundReport,
}

pub const MIN_SWEEP_POINTS: usize = 4;

/// Monte Carlo distances along a parameter curve, joined with the bound
/// brackets at each point.
pub fn convergence_sweep(curve: &[ModelParams], samples: u64, seed: u64, threads: usize) -> Result<Vec<SweepRow>> {
    if curve.len() < MIN_SWEEP_POINTS {
        return Err(Error::InvalidParams(format!(
            "a sweep needs at least {MIN_SWEEP_POINTS} points, got {}",
            curve.len()
        )));
    }
    curve
        .iter()
        .map(|params| {
            Ok(SweepRow {
                params: *params,
                distance: mc_sample_distances(params, samples, seed, threads)?,
                bounds: bound_report(params)?,
            })
        })
        .collect()
}

/// Least-squares slope of `ln d_K` against `ln(n² p̂ (1 - p̂))`.
pub fn rate_slope(rows: &[SweepRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.bounds.necessary_stat.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.distance.d_k.ln()).collect();
    regression_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, m: u64, p: f64) -> ModelParams {
        ModelParams::new(n, m, p).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn pmf_examples() {
        let pmf = exact_pmf(&params(3, 1, 0.5)).unwrap();
        assert_eq!(pmf.probs, vec![0.5, 0.375, 0.0, 0.125]);
        let pmf = exact_pmf(&params(2, 3, 0.5)).unwrap();
        assert!(close(pmf.probs[0], 0.75f64.powi(3), 1e-15));
        assert!(close(pmf.probs[1], 1.0 - 0.75f64.powi(3), 1e-15));
        let pr = params(4, 5, 0.3);
        let pmf = exact_pmf(&pr).unwrap();
        assert!(close(pmf.variance(), variance_edges(&pr).variance, 1e-10));
        assert!(matches!(exact_pmf(&params(7, 2, 0.5)), Err(Error::Budget { .. })));
    }

    #[test]
    fn dp_matches_enumeration() {
        for (n, m) in [(2, 5), (3, 4), (4, 3), (5, 4), (4, 5), (6, 3)] {
            for p in [0.1, 0.5, 0.85] {
                let pr = params(n, m, p);
                let dp = exact_pmf(&pr).unwrap();
                let en = enumerate_pmf(&pr).unwrap();
                for (a, b) in dp.probs.iter().zip(&en.probs) {
                    assert!((a - b).abs() <= 1e-12 * a.abs() + 1e-300, "{n} {m} {p}: {a} {b}");
                }
            }
        }
        assert!(matches!(enumerate_pmf(&params(5, 5, 0.5)), Err(Error::Budget { .. })));
    }

    #[test]
    fn steps_agree_with_single_runs() {
        let steps = exact_pmf_steps(&params(5, 6, 0.4)).unwrap();
        for (i, pmf) in steps.iter().enumerate() {
            assert_eq!(pmf, &exact_pmf(&params(5, i as u64 + 1, 0.4)).unwrap());
        }
    }

    #[test]
    fn point_mass_distances() {
        let err = exact_distances(&ExactPmf { n: 2, probs: vec![1.0, 0.0] }).unwrap_err();
        assert_eq!(err, Error::DegenerateVariance);
        let atoms = Atoms::from_weights(vec![0.0], &[1.0]);
        assert!((atoms.kolmogorov() - 0.5).abs() < 1e-16);
        // ∫|1{t>=0} - Φ| = 2 φ(0)
        let w = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((atoms.wasserstein() - w).abs() < 1e-15);
    }

    #[test]
    fn two_point_law_by_hand() {
        // one pair, p̂ = 1/4: atoms at -1/√3 and √3
        let pmf = exact_pmf(&params(2, 1, 0.5)).unwrap();
        let d = exact_distances(&pmf).unwrap();
        let a = -1.0 / 3f64.sqrt();
        let b = 3f64.sqrt();
        let expected = [
            normal_cdf(a),
            (0.75 - normal_cdf(a)).abs(),
            (0.75 - normal_cdf(b)).abs(),
            1.0 - normal_cdf(b),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        assert!((d.d_k - expected).abs() < 1e-15);
        assert!(d.exact && d.d_k_radius == 0.0);
    }

    #[test]
    fn wasserstein_matches_quadrature() {
        let pmf = exact_pmf(&params(4, 3, 0.35)).unwrap();
        let (mean, var) = pmf.mean_variance();
        let sd = var.sqrt();
        let cdf = |t: f64| {
            let x = t * sd + mean;
            pmf.probs.iter().enumerate().filter(|(k, _)| *k as f64 <= x).map(|(_, w)| w).sum::<f64>()
        };
        let (lo, hi, steps) = (-12.0, 12.0, 2_400_000);
        let h = (hi - lo) / steps as f64;
        let quad: f64 = (0..steps)
            .map(|i| {
                let t = lo + (i as f64 + 0.5) * h;
                (cdf(t) - normal_cdf(t)).abs() * h
            })
            .sum();
        let d = exact_distances(&pmf).unwrap();
        assert!((d.d_w - quad).abs() < 1e-5, "{} vs {quad}", d.d_w);
        assert!(d.d_k <= 1.0 && d.d_w <= 2.0);
    }

    #[test]
    fn ks_matches_textbook_formula() {
        let pr = params(5, 8, 0.3);
        let sample = mc_sample(&pr, 2000, 11, 2).unwrap();
        let n = sample.count() as f64;
        let textbook = sample
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - normal_cdf(x)).max(normal_cdf(x) - i as f64 / n))
            .fold(0.0, f64::max);
        assert!((sample.distances().d_k - textbook).abs() < 1e-15);
    }

    #[test]
    fn mc_is_thread_independent_and_symmetric() {
        let pr = params(30, 20, 0.1);
        let a = mc_sample_distances(&pr, 5000, 3, 1).unwrap();
        let b = mc_sample_distances(&pr, 5000, 3, 4).unwrap();
        assert_eq!(a, b);
        let s = mc_sample(&pr, 5000, 3, 0).unwrap();
        let v = s.negated().distances();
        let e = s.distances();
        assert!((v.d_k - e.d_k).abs() < 1e-15 && (v.d_w - e.d_w).abs() < 1e-14);
    }

    #[test]
    fn mc_refusals() {
        assert_eq!(mc_sample_distances(&params(10, 5, 0.0), 1000, 1, 1), Err(Error::DegenerateVariance));
        assert!(matches!(mc_sample_distances(&params(10, 5, 0.3), 50, 1, 1), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn mc_tracks_exact() {
        let pr = params(5, 8, 0.3);
        let exact = exact_distances(&exact_pmf(&pr).unwrap()).unwrap();
        let mc = mc_sample_distances(&pr, 200_000, 5, 0).unwrap();
        assert!((mc.d_k - exact.d_k).abs() <= mc.d_k_radius);
        assert!((mc.d_w - exact.d_w).abs() <= mc.d_w_radius);
    }
}
