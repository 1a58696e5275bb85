//! Building an approximately calibrated `q′` from any candidate `q` using
//! samples from `p`, and a certifier for `(α₁, α₂)`-approximate calibration.
//!
//! The construction buckets `q`'s values multiplicatively with ratio
//! `r = 1 − γ₁/8` (`γ₁ = α₁/3`), estimates each bucket's mass from one shared
//! sample, sets light buckets (`L`) to a flat `α₂/2` total and heavy buckets
//! (`H`) to their estimated average, then renormalizes.
//!
//! The certifier takes the witness set greedily as every level that `q`
//! overweights by more than `1 + α₁`. Any valid witness must contain those
//! levels, and adding more only raises `q(∪T)`, so the greedy set passes
//! exactly when some witness does.

use serde::Serialize;

use crate::calibration::level_sets;
use crate::distribution::{
    l1_distance, validate_distribution, Distribution, EmpiricalDistribution,
};
use crate::error::{Error, Result};
use crate::sampling::{SampleSource, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxCalibrationParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta: f64,
}

impl ApproxCalibrationParams {
    pub fn new(alpha1: f64, alpha2: f64, delta: f64) -> Result<Self> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(alpha1) || !unit(alpha2) {
            return Err(Error::ParameterOutOfRange(format!(
                "alpha1 = {alpha1}, alpha2 = {alpha2} must lie in (0, 1]"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "delta = {delta} not in (0, 1)"
            )));
        }
        Ok(Self {
            alpha1,
            alpha2,
            delta,
        })
    }

    pub fn gamma1(&self) -> f64 {
        self.alpha1 / 3.0
    }

    pub fn ratio(&self) -> f64 {
        1.0 - self.gamma1() / 8.0
    }

    /// `b = ⌈log_r(γ₁/(8N))⌉`.
    pub fn bucket_count(&self, n: usize) -> usize {
        let g = self.gamma1();
        ((g / (8.0 * n as f64)).ln() / self.ratio().ln()).ceil() as usize
    }

    /// Per-bucket accuracy `γ₁α₂/(8(b+1))`.
    pub fn bucket_eps(&self, n: usize) -> f64 {
        self.gamma1() * self.alpha2 / (8.0 * (self.bucket_count(n) + 1) as f64)
    }

    /// Per-bucket failure budget `δ/(b+1)`.
    pub fn bucket_delta(&self, n: usize) -> f64 {
        self.delta / (self.bucket_count(n) + 1) as f64
    }

    /// Samples needed at the per-bucket accuracy and budget.
    pub fn theoretical_samples(&self, n: usize) -> u64 {
        required_samples(self.bucket_eps(n), self.bucket_delta(n))
    }
}

/// `⌈3 ln(2/δ)/ε²⌉`.
pub fn required_samples(eps: f64, delta: f64) -> u64 {
    (3.0 * (2.0 / delta).ln() / (eps * eps)).ceil() as u64
}

/// Sample fraction in each bucket; errors if `m < 3 ln(2/δ)/ε²`.
pub fn estimate_bucket_masses(
    samples: &EmpiricalDistribution,
    buckets: &[Vec<usize>],
    eps: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    let required = required_samples(eps, delta);
    if samples.m() < required {
        return Err(Error::InsufficientSamples {
            required,
            got: samples.m(),
        });
    }
    Ok(bucket_fractions(samples, buckets))
}

fn bucket_fractions(samples: &EmpiricalDistribution, buckets: &[Vec<usize>]) -> Vec<f64> {
    buckets.iter().map(|b| samples.fraction_in(b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BucketClass {
    Light,
    Heavy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketTrace {
    /// `i ∈ 1..=b+1`; `b+1` is the catch-all.
    pub index: usize,
    /// `q_x ∈ (lower, upper]`; the catch-all has `lower = 0` and is closed below.
    pub lower: f64,
    pub upper: f64,
    pub size: usize,
    pub estimate: f64,
    pub class: BucketClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionTrace {
    pub params: ApproxCalibrationParams,
    pub gamma1: f64,
    pub ratio: f64,
    pub bucket_count: usize,
    pub bucket_eps: f64,
    pub bucket_delta: f64,
    pub light_threshold: f64,
    /// Occupied buckets only.
    pub buckets: Vec<BucketTrace>,
    pub weights: Vec<f64>,
    pub weight_norm: f64,
    pub output: Vec<f64>,
    pub samples_theoretical: u64,
    pub sample_multiplier: f64,
    pub samples_used: u64,
}

/// Bucket index of `qx` among `1..=b+1`.
fn bucket_of(qx: f64, ratio: f64, b: usize) -> usize {
    if qx <= 0.0 {
        return b + 1;
    }
    let mut i = ((qx.ln() / ratio.ln()).floor() as i64 + 1).max(1) as usize;
    if i > b {
        return b + 1;
    }
    // repair rounding at the edges: want r^i < q ≤ r^(i-1)
    while i > 1 && qx > ratio.powi(i as i32 - 1) {
        i -= 1;
    }
    while i <= b && qx <= ratio.powi(i as i32) {
        i += 1;
    }
    i
}

/// Runs the construction with `⌈multiplier · theoretical⌉` samples drawn from `source`.
pub fn make_approx_calibrated(
    q: &Distribution,
    source: &mut dyn SampleSource,
    params: &ApproxCalibrationParams,
    multiplier: f64,
) -> Result<(Distribution, ConstructionTrace)> {
    let n = q.len();
    if source.domain_size() != n {
        return Err(Error::DomainMismatch {
            left: n,
            right: source.domain_size(),
        });
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "sample multiplier {multiplier} must be positive"
        )));
    }
    let ratio = params.ratio();
    let b = params.bucket_count(n);

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); b + 1];
    for (x, &qx) in q.probs().iter().enumerate() {
        members[bucket_of(qx, ratio, b) - 1].push(x);
    }
    let occupied: Vec<(usize, Vec<usize>)> = members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| (i + 1, m))
        .collect();

    let theoretical = params.theoretical_samples(n);
    let used = ((theoretical as f64 * multiplier).ceil() as u64).max(1);
    let samples = source.draw_counts(used)?;
    let sets: Vec<Vec<usize>> = occupied.iter().map(|(_, m)| m.clone()).collect();
    let estimates = bucket_fractions(&samples, &sets);

    let threshold = params.alpha2 / (4.0 * (b + 1) as f64);
    let light_size: usize = occupied
        .iter()
        .zip(&estimates)
        .filter(|(_, &e)| e <= threshold)
        .map(|((_, m), _)| m.len())
        .sum();
    if light_size == n {
        return Err(Error::DegenerateInput(
            "every occupied bucket is light; no heavy mass to calibrate against".into(),
        ));
    }

    let mut weights = vec![0.0; n];
    let mut buckets = Vec::with_capacity(occupied.len());
    for ((index, set), &estimate) in occupied.iter().zip(&estimates) {
        let class = if estimate <= threshold {
            BucketClass::Light
        } else {
            BucketClass::Heavy
        };
        let w = match class {
            BucketClass::Light => params.alpha2 / (2.0 * light_size as f64),
            BucketClass::Heavy => estimate / set.len() as f64,
        };
        for &x in set {
            weights[x] = w;
        }
        let (lower, upper) = if *index == b + 1 {
            (0.0, ratio.powi(b as i32))
        } else {
            (ratio.powi(*index as i32), ratio.powi(*index as i32 - 1))
        };
        buckets.push(BucketTrace {
            index: *index,
            lower,
            upper,
            size: set.len(),
            estimate,
            class,
        });
    }

    let norm: f64 = weights.iter().sum();
    let output: Vec<f64> = weights.iter().map(|w| w / norm).collect();
    let q_prime = validate_distribution(output.clone(), q.domain().clone())?;
    let trace = ConstructionTrace {
        params: *params,
        gamma1: params.gamma1(),
        ratio,
        bucket_count: b,
        bucket_eps: params.bucket_eps(n),
        bucket_delta: params.bucket_delta(n),
        light_threshold: threshold,
        buckets,
        weights,
        weight_norm: norm,
        output,
        samples_theoretical: theoretical,
        sample_multiplier: multiplier,
        samples_used: used,
    };
    Ok((q_prime, trace))
}

/// Convenience wrapper drawing from the exact `p` with a seeded [`Sampler`].
pub fn make_approx_calibrated_seeded(
    q: &Distribution,
    p: &Distribution,
    params: &ApproxCalibrationParams,
    multiplier: f64,
    seed: u64,
) -> Result<(Distribution, ConstructionTrace)> {
    q.ensure_same_domain(p)?;
    let mut sampler = Sampler::new(p.clone(), seed);
    make_approx_calibrated(q, &mut sampler, params, multiplier)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxCalibrationReport {
    pub passed: bool,
    /// `q(B_t) ≥ (1 − α₁)p(B_t)` on every level.
    pub lower_ok: bool,
    /// Levels placed in the greedy witness set.
    pub witness_levels: usize,
    /// `q(∪_{t∈T} B_t)`.
    pub exception_mass: f64,
    /// `min_t q(B_t)/p(B_t)` over levels with `p(B_t) > 0`.
    pub min_ratio: f64,
}

/// Certifies `(α₁, α₂)`-approximate calibration of `q` against the exact `p`.
pub fn is_approx_calibrated(
    q: &Distribution,
    p: &Distribution,
    params: &ApproxCalibrationParams,
) -> Result<ApproxCalibrationReport> {
    q.ensure_same_domain(p)?;
    let (a1, a2) = (params.alpha1, params.alpha2);
    let mut lower_ok = true;
    let mut witness_levels = 0;
    let mut exception_mass = 0.0;
    let mut min_ratio = f64::INFINITY;
    for level in level_sets(q).levels() {
        let qm = q.mass(&level.members);
        let pm = p.mass(&level.members);
        if qm < (1.0 - a1) * pm {
            lower_ok = false;
        }
        if qm > (1.0 + a1) * pm {
            witness_levels += 1;
            exception_mass += qm;
        }
        if pm > 0.0 {
            min_ratio = min_ratio.min(qm / pm);
        }
    }
    Ok(ApproxCalibrationReport {
        passed: lower_ok && exception_mass <= a2,
        lower_ok,
        witness_levels,
        exception_mass,
        min_ratio,
    })
}

/// `‖q − q′‖₁` helper for stability reports.
pub fn displacement(q: &Distribution, q_prime: &Distribution) -> Result<f64> {
    l1_distance(q, q_prime)
}
