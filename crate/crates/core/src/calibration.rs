//! Level sets, exact calibration, coarsening, and the brute-force calibrated-set oracle.
//!
//! A candidate `q` is calibrated with respect to `p` when every level set
//! `B_t = {x : q_x = t}` carries the same mass under both. Equivalently `q` is a
//! coarsening of `p`: pick a partition of the domain and replace each block by
//! its average. [`enumerate_calibrated`] walks every set partition, so it is
//! only usable for small domains (Bell-number growth).

use serde::Serialize;

use crate::distribution::{validate_distribution, Distribution};
use crate::error::{Error, Result};

/// Default limit for [`enumerate_calibrated`]; Bell(12) ≈ 4.2M partitions.
pub const DEFAULT_MAX_ENUMERATION: usize = 12;

/// Componentwise tolerance under which two coarsenings count as the same vector.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

/// How `q_x` values are grouped into level sets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LevelGrouping {
    /// Bit-for-bit equality.
    #[default]
    Exact,
    /// Values within a relative tolerance of the first member of a run share a level.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    /// The common value `t`; under relative grouping, the smallest member value.
    pub value: f64,
    pub members: Vec<usize>,
}

/// The sets `B_t` of a candidate, sorted by ascending `t`.
#[derive(Debug, Clone)]
pub struct LevelSetPartition<'a> {
    source: &'a Distribution,
    levels: Vec<Level>,
}

impl<'a> LevelSetPartition<'a> {
    pub fn source(&self) -> &'a Distribution {
        self.source
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// The value set `T(q)`.
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.value).collect()
    }

    pub fn get(&self, t: f64) -> Option<&[usize]> {
        self.levels
            .iter()
            .find(|l| l.value == t)
            .map(|l| l.members.as_slice())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn level_sets(q: &Distribution) -> LevelSetPartition<'_> {
    level_sets_with(q, LevelGrouping::Exact)
}

pub fn level_sets_with(q: &Distribution, grouping: LevelGrouping) -> LevelSetPartition<'_> {
    let probs = q.probs();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(a.cmp(&b)));

    let mut levels: Vec<Level> = Vec::new();
    for x in order {
        let v = probs[x];
        let joins = match (levels.last(), grouping) {
            (None, _) => false,
            (Some(l), LevelGrouping::Exact) => l.value == v,
            (Some(l), LevelGrouping::Relative(tol)) => {
                (v - l.value).abs() <= tol * l.value.abs().max(v.abs())
            }
        };
        if joins {
            levels.last_mut().unwrap().members.push(x);
        } else {
            levels.push(Level {
                value: v,
                members: vec![x],
            });
        }
    }
    for l in &mut levels {
        l.members.sort_unstable();
    }
    LevelSetPartition { source: q, levels }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub t: f64,
    pub q_mass: f64,
    pub p_mass: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub calibrated: bool,
    pub tolerance: f64,
    pub levels: Vec<LevelRecord>,
    pub max_discrepancy: f64,
}

/// Checks `|q(B_t) − p(B_t)| ≤ tol` for every `t ∈ T(q)`.
pub fn is_calibrated(q: &Distribution, p: &Distribution, tol: f64) -> Result<CalibrationReport> {
    is_calibrated_with(q, p, tol, LevelGrouping::Exact)
}

pub fn is_calibrated_with(
    q: &Distribution,
    p: &Distribution,
    tol: f64,
    grouping: LevelGrouping,
) -> Result<CalibrationReport> {
    q.ensure_same_domain(p)?;
    let partition = level_sets_with(q, grouping);
    let mut max_discrepancy: f64 = 0.0;
    let levels: Vec<LevelRecord> = partition
        .levels()
        .iter()
        .map(|l| {
            let q_mass = q.mass(&l.members);
            let p_mass = p.mass(&l.members);
            max_discrepancy = max_discrepancy.max((q_mass - p_mass).abs());
            LevelRecord {
                t: l.value,
                q_mass,
                p_mass,
                size: l.members.len(),
            }
        })
        .collect();
    Ok(CalibrationReport {
        calibrated: max_discrepancy <= tol,
        tolerance: tol,
        levels,
        max_discrepancy,
    })
}

/// Replaces each block of `partition` by its average under `p`.
pub fn coarsen(p: &Distribution, partition: &[Vec<usize>]) -> Result<Distribution> {
    let n = p.len();
    let mut seen = vec![false; n];
    for block in partition {
        if block.is_empty() {
            return Err(Error::InvalidPartition("empty block".into()));
        }
        for &x in block {
            if x >= n {
                return Err(Error::InvalidPartition(format!("index {x} out of range")));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPartition(format!("index {x} appears twice")));
            }
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("index {x} not covered")));
    }
    let mut probs = vec![0.0; n];
    for block in partition {
        let avg = p.mass(block) / block.len() as f64;
        for &x in block {
            probs[x] = avg;
        }
    }
    validate_distribution(probs, p.domain().clone())
}

/// Every set partition of `{0, .., n-1}` as block lists, in restricted-growth order.
pub fn set_partitions(n: usize) -> SetPartitions {
    SetPartitions {
        n,
        rgs: vec![0; n],
        maxes: vec![0; n],
        done: n == 0,
    }
}

/// Iterator over restricted growth strings `a` with `a[0] = 0` and
/// `a[i] ≤ 1 + max(a[..i])`.
pub struct SetPartitions {
    n: usize,
    rgs: Vec<usize>,
    // maxes[i] = max(rgs[..i]) (maxes[0] unused)
    maxes: Vec<usize>,
    done: bool,
}

impl Iterator for SetPartitions {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let blocks = self.rgs.iter().copied().max().unwrap_or(0) + 1;
        let mut out = vec![Vec::new(); blocks];
        for (x, &b) in self.rgs.iter().enumerate() {
            out[b].push(x);
        }
        // advance
        let mut i = self.n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.maxes[i] {
                self.rgs[i] += 1;
                for j in i + 1..self.n {
                    self.rgs[j] = 0;
                    self.maxes[j] = self.maxes[j - 1].max(self.rgs[j - 1]);
                }
                break;
            }
        }
        Some(out)
    }
}

/// All distinct coarsenings of `p`, i.e. the calibrated set `𝒞(p)`.
pub fn enumerate_calibrated(p: &Distribution, max_n: usize) -> Result<Vec<Distribution>> {
    let n = p.len();
    if n > max_n {
        return Err(Error::DomainTooLarge { n, max: max_n });
    }
    // fixed weights give a scalar key; equal vectors have keys within n·tol·2
    let weights: Vec<f64> = (0..n)
        .map(|x| 1.0 + (x as f64 + 1.0) / (n as f64 + 1.0))
        .collect();
    let mut keyed: Vec<(f64, Distribution)> = set_partitions(n)
        .map(|blocks| {
            let q = coarsen(p, &blocks)?;
            let key = q.probs().iter().zip(&weights).map(|(a, w)| a * w).sum();
            Ok((key, q))
        })
        .collect::<Result<_>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));

    let window = 2.0 * n as f64 * DEDUP_TOLERANCE + 1e-15;
    let mut kept: Vec<(f64, Distribution)> = Vec::new();
    for (key, q) in keyed {
        let duplicate = kept
            .iter()
            .rev()
            .take_while(|(k, _)| key - k <= window)
            .any(|(_, r)| r.approx_eq(&q, DEDUP_TOLERANCE));
        if !duplicate {
            kept.push((key, q));
        }
    }
    Ok(kept.into_iter().map(|(_, q)| q).collect())
}

/// `E_{X∼p}[1/p_X | X ∈ B]`, summed term by term.
pub fn conditional_inverse_mean(p: &Distribution, set: &[usize]) -> Result<f64> {
    let mass = p.mass(set);
    if mass <= 0.0 || set.iter().any(|&x| p.get(x) <= 0.0) {
        return Err(Error::ZeroMassBucket);
    }
    Ok(set
        .iter()
        .map(|&x| {
            let px = p.get(x);
            (px / mass) * (1.0 / px)
        })
        .sum())
}

/// `min_{x ∈ supp(p)} q_x / p_x`.
pub fn min_mass_ratio(q: &Distribution, p: &Distribution) -> Result<f64> {
    q.ensure_same_domain(p)?;
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .filter(|(&px, _)| px > 0.0)
        .map(|(&px, &qx)| qx / px)
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::kl_divergence;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_has_one_level() {
        let u = Distribution::uniform(4).unwrap();
        let ls = level_sets(&u);
        assert_eq!(ls.len(), 1);
        assert_eq!(ls.levels()[0].value, 0.25);
        assert_eq!(ls.levels()[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn grouping_by_value() {
        let q = dist(&[0.2, 0.2, 0.3, 0.3]);
        let ls = level_sets(&q);
        assert_eq!(ls.values(), vec![0.2, 0.3]);
        assert_eq!(ls.get(0.2).unwrap(), &[0, 1]);
        assert_eq!(ls.get(0.3).unwrap(), &[2, 3]);

        let q = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        let ls = level_sets(&q);
        assert_eq!(ls.len(), 2);
        assert!(ls.levels().iter().all(|l| l.members.len() == 1));
    }

    #[test]
    fn relative_grouping_merges_last_bit_noise() {
        let a = 0.1f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let q = dist(&[a, b, 0.8]);
        assert_eq!(level_sets(&q).len(), 3);
        assert_eq!(level_sets_with(&q, LevelGrouping::Relative(1e-12)).len(), 2);
    }

    #[test]
    fn calibration_examples() {
        let p = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        assert!(is_calibrated(&p, &p, 0.0).unwrap().calibrated);
        let u = Distribution::uniform(2).unwrap();
        assert!(is_calibrated(&u, &p, 1e-12).unwrap().calibrated);
        let q = dist(&[0.0, 1.0]);
        let r = is_calibrated(&q, &p, 1e-12).unwrap();
        assert!(!r.calibrated);
        assert!((r.max_discrepancy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coarsen_examples() {
        let p = dist(&[0.1, 0.3, 0.2, 0.4]);
        let q = coarsen(&p, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert!(q.approx_eq(&dist(&[0.2, 0.2, 0.3, 0.3]), 1e-15));
        let id = coarsen(&p, &[vec![0], vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!(id, p);
        let p = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        let q = coarsen(&p, &[vec![0, 1]]).unwrap();
        assert!(q.approx_eq(&dist(&[0.5, 0.5]), 1e-15));
    }

    #[test]
    fn coarsen_rejects_bad_partitions() {
        let p = dist(&[0.5, 0.5]);
        assert!(matches!(
            coarsen(&p, &[vec![0]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            coarsen(&p, &[vec![0, 1], vec![1]]),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            coarsen(&p, &[vec![0, 2]]),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(set_partitions(n).count(), b, "n = {n}");
        }
    }

    #[test]
    fn enumerate_examples() {
        let p = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        let c = enumerate_calibrated(&p, DEFAULT_MAX_ENUMERATION).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().any(|q| q.approx_eq(&p, 1e-15)));
        assert!(c.iter().any(|q| q.approx_eq(&dist(&[0.5, 0.5]), 1e-15)));

        let one = dist(&[1.0]);
        assert_eq!(enumerate_calibrated(&one, 12).unwrap(), vec![one]);

        let u = Distribution::uniform(3).unwrap();
        let c = enumerate_calibrated(&u, 12).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].approx_eq(&u, 1e-15));

        let big = Distribution::uniform(13).unwrap();
        assert!(matches!(
            enumerate_calibrated(&big, 12),
            Err(Error::DomainTooLarge { n: 13, max: 12 })
        ));
    }

    #[test]
    fn distinct_entries_give_bell_many_coarsenings() {
        // generic p: every partition yields a different vector
        let p = dist(&[0.011, 0.037, 0.149, 0.292, 0.511]);
        assert_eq!(enumerate_calibrated(&p, 12).unwrap().len(), 52);
    }

    #[test]
    fn conditional_inverse_mean_examples() {
        let p = dist(&[0.1, 0.3, 0.2, 0.4]);
        let v = conditional_inverse_mean(&p, &[0, 1]).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
        assert!((conditional_inverse_mean(&p, &[2]).unwrap() - 5.0).abs() < 1e-12);
        let u = Distribution::uniform(6).unwrap();
        assert!((conditional_inverse_mean(&u, &[1, 4, 5]).unwrap() - 6.0).abs() < 1e-12);
        let z = dist(&[0.0, 1.0]);
        assert!(matches!(
            conditional_inverse_mean(&z, &[0]),
            Err(Error::ZeroMassBucket)
        ));
    }

    #[test]
    fn min_mass_ratio_examples() {
        let n = 7;
        let u = Distribution::uniform(n).unwrap();
        let pm = Distribution::point_mass(n, 3).unwrap();
        assert!((min_mass_ratio(&u, &pm).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        assert_eq!(min_mass_ratio(&pm, &pm).unwrap(), 1.0);
        let p = dist(&[0.1, 0.3, 0.2, 0.4]);
        let q = dist(&[0.2, 0.2, 0.3, 0.3]);
        assert!((min_mass_ratio(&q, &p).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn every_coarsening_is_calibrated_and_closed() {
        let p = dist(&[0.05, 0.1, 0.1, 0.3, 0.45]);
        let set = enumerate_calibrated(&p, 12).unwrap();
        assert!(set.iter().any(|q| q.approx_eq(&p, 1e-15)));
        let u = Distribution::uniform(5).unwrap();
        assert!(set.iter().any(|q| q.approx_eq(&u, 1e-15)));
        for q in &set {
            assert!(is_calibrated(q, &p, 1e-12).unwrap().calibrated);
            assert!(kl_divergence(&p, q).unwrap() >= 0.0);
        }
    }
}
