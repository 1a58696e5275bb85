//! Seeded multinomial sampling by inverse CDF.
//!
//! Per-trial streams use `seed ^ trial` so that parallel trials are
//! reproducible regardless of scheduling.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distribution::{Distribution, EmpiricalDistribution};
use crate::error::{Error, Result};

/// Seed for trial `trial` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cumulative table for drawing indices of a [`Distribution`].
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cumulative: Arc<[f64]>,
}

impl InverseCdf {
    pub fn new(p: &Distribution) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = p
            .probs()
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        // Pin the top of the table to the last positive entry so rounding
        // never sends a draw into a trailing zero.
        if let Some(last) = p.probs().iter().rposition(|&v| v > 0.0) {
            for c in &mut cumulative[last..] {
                *c = f64::INFINITY;
            }
        }
        Self {
            cumulative: cumulative.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u)
    }

    pub fn counts<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Vec<u64> {
        let mut counts = vec![0u64; self.len()];
        for _ in 0..m {
            counts[self.draw(rng)] += 1;
        }
        counts
    }
}

/// Anything that can hand out i.i.d. draws from a target distribution.
///
/// The approximate calibration construction only sees a `SampleSource`, never
/// the probability vector itself.
pub trait SampleSource {
    fn domain_size(&self) -> usize;
    fn draw_counts(&mut self, m: u64) -> Result<EmpiricalDistribution>;
}

/// A [`SampleSource`] backed by an exact distribution.
#[derive(Debug, Clone)]
pub struct Sampler {
    target: Distribution,
    cdf: InverseCdf,
    rng: ChaCha8Rng,
    drawn: u64,
}

impl Sampler {
    pub fn new(target: Distribution, seed: u64) -> Self {
        let cdf = InverseCdf::new(&target);
        Self {
            target,
            cdf,
            rng: rng_from_seed(seed),
            drawn: 0,
        }
    }

    /// Total number of draws handed out so far.
    pub fn drawn(&self) -> u64 {
        self.drawn
    }
}

impl SampleSource for Sampler {
    fn domain_size(&self) -> usize {
        self.target.len()
    }

    fn draw_counts(&mut self, m: u64) -> Result<EmpiricalDistribution> {
        if m == 0 {
            return Err(Error::NoSamples);
        }
        let counts = self.cdf.counts(m, &mut self.rng);
        self.drawn += m;
        EmpiricalDistribution::from_counts(counts, self.target.domain().clone())
    }
}

/// `m` i.i.d. draws from `p`, deterministic in `seed`.
pub fn sample(p: &Distribution, m: u64, seed: u64) -> Result<EmpiricalDistribution> {
    sample_with(&InverseCdf::new(p), p, m, seed)
}

/// Like [`sample`] but reuses a prebuilt table.
pub fn sample_with(
    cdf: &InverseCdf,
    p: &Distribution,
    m: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if m == 0 {
        return Err(Error::NoSamples);
    }
    let mut rng = rng_from_seed(seed);
    EmpiricalDistribution::from_counts(cdf.counts(m, &mut rng), p.domain().clone())
}
