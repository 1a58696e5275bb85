//! Dense probability vectors over a finite indexed domain.
//!
//! A [`Distribution`] never renormalizes its input: the sum must already lie in
//! `1 ± 1e-9`. Zero entries are allowed; losses decide what they mean.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_x` accepted by [`validate_distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A finite domain of `size` elements, optionally labelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyDomain);
        }
        Ok(Self { size, labels: None })
    }

    pub fn labelled(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(l) => l[x].clone(),
            None => x.to_string(),
        }
    }

    /// Two domains are compatible when sizes agree and, if both carry labels,
    /// the labels agree too.
    pub fn ensure_compatible(&self, other: &Domain) -> Result<()> {
        let labels_agree = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        };
        if self.size != other.size || !labels_agree {
            return Err(Error::DomainMismatch {
                left: self.size,
                right: other.size,
            });
        }
        Ok(())
    }
}

/// A probability vector `p` over a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    domain: Domain,
    probs: Vec<f64>,
}

/// Checks non-negativity and the sum tolerance, without renormalizing.
pub fn validate_distribution(probs: Vec<f64>, domain: Domain) -> Result<Distribution> {
    if probs.len() != domain.size() {
        return Err(Error::LengthMismatch {
            expected: domain.size(),
            got: probs.len(),
        });
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
        if value < 0.0 {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let sum = kahan_sum(probs.iter().copied());
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::SumOutOfTolerance { sum });
    }
    Ok(Distribution { domain, probs })
}

impl Distribution {
    /// Unlabelled distribution; see [`validate_distribution`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let domain = Domain::new(probs.len())?;
        validate_distribution(probs, domain)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n.max(1) as f64; n])
    }

    pub fn point_mass(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return Err(Error::IndexOutOfRange { index: x, n });
        }
        let mut probs = vec![0.0; n];
        probs[x] = 1.0;
        Self::new(probs)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.probs[x]
    }

    /// `p(B) = Σ_{x∈B} p_x`.
    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.probs[x]).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.probs[x] > 0.0).collect()
    }

    pub fn has_full_support(&self) -> bool {
        self.probs.iter().all(|&v| v > 0.0)
    }

    pub fn ensure_same_domain(&self, other: &Distribution) -> Result<()> {
        self.domain.ensure_compatible(&other.domain)
    }

    /// Componentwise equality within `tol`.
    pub fn approx_eq(&self, other: &Distribution, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}

/// Counts from `m` i.i.d. draws; induces `p̂_x = counts_x / m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    domain: Domain,
    counts: Vec<u64>,
    m: u64,
}

impl EmpiricalDistribution {
    pub fn from_counts(counts: Vec<u64>, domain: Domain) -> Result<Self> {
        if counts.len() != domain.size() {
            return Err(Error::LengthMismatch {
                expected: domain.size(),
                got: counts.len(),
            });
        }
        let m: u64 = counts.iter().sum();
        if m == 0 {
            return Err(Error::NoSamples);
        }
        Ok(Self { domain, counts, m })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn phat(&self, x: usize) -> f64 {
        self.counts[x] as f64 / self.m as f64
    }

    /// Fraction of the sample falling in `set`.
    pub fn fraction_in(&self, set: &[usize]) -> f64 {
        let c: u64 = set.iter().map(|&x| self.counts[x]).sum();
        c as f64 / self.m as f64
    }

    pub fn to_distribution(&self) -> Result<Distribution> {
        let probs = (0..self.counts.len()).map(|x| self.phat(x)).collect();
        validate_distribution(probs, self.domain.clone())
    }
}

/// `‖p − q‖₁`.
pub fn l1_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    Ok(kahan_sum(
        p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()),
    ))
}

/// `TV(p, q) = ½‖p − q‖₁`.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    Ok(0.5 * l1_distance(p, q)?)
}

/// `‖p − q‖₂²`.
pub fn l2_squared(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    Ok(kahan_sum(
        p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).powi(2)),
    ))
}

/// `KL(p, q) = Σ p_x ln(p_x / q_x)`, with `0·ln(0/·) = 0` and `+∞` when `q`
/// misses part of `p`'s support.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    let mut total = 0.0;
    for (&px, &qx) in p.probs.iter().zip(&q.probs) {
        if px == 0.0 {
            continue;
        }
        if qx == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += px * (px / qx).ln();
    }
    Ok(total)
}

pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
