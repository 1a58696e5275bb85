//! Monte Carlo experiments and brute-force verification suites.
//!
//! Trials run in parallel with rayon; trial `i` draws from its own generator
//! seeded with `seed ^ i`, and results are collected in trial order, so a
//! seed fully determines every [`ExperimentResult`].

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::strong_properness_gap_bound;
use crate::calibrate::{
    displacement, is_approx_calibrated, make_approx_calibrated_seeded, ApproxCalibrationParams,
};
use crate::calibration::{
    coarsen, conditional_inverse_mean, enumerate_calibrated, is_calibrated, level_sets,
    min_mass_ratio, DEFAULT_MAX_ENUMERATION,
};
use crate::distribution::{kl_divergence, l1_distance, l2_squared, Distribution};
use crate::error::{Error, Result};
use crate::losses::{
    builtin_catalog, check_left_strong_concavity, default_grid, expected_loss, LocalLoss,
};
use crate::sampling::{rng_from_seed, trial_seed, InverseCdf};
use crate::scoring::{direct_divergence, divergence, l2_counterexample, ConcaveGenerator};

/// Absolute slack allowed on inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// Denominator for randomly drawn rational distributions.
pub const RATIONAL_DENOMINATOR: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub stat: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: u64,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of trials where the experiment's event occurred.
    pub event_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub config: Value,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub summary: Summary,
    /// Experiment-specific scalars (expected rates, regime flags, ...).
    pub extra: Value,
}

/// Linear-interpolated quantile of already sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let mut v: Vec<f64> = records.iter().map(|r| r.stat).collect();
    v.sort_by(f64::total_cmp);
    let n = records.len().max(1) as f64;
    let events = records.iter().filter(|r| r.event).count() as f64;
    Summary {
        trials: records.len() as u64,
        mean: v.iter().sum::<f64>() / n,
        median: quantile(&v, 0.5),
        q05: quantile(&v, 0.05),
        q95: quantile(&v, 0.95),
        min: v.first().copied().unwrap_or(f64::NAN),
        max: v.last().copied().unwrap_or(f64::NAN),
        event_rate: events / n,
    }
}

fn run_trials<F>(trials: u64, seed: u64, f: F) -> Vec<TrialRecord>
where
    F: Fn(u64, &mut rand_chacha::ChaCha8Rng) -> (f64, bool) + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(trial_seed(seed, t));
            let (stat, event) = f(t, &mut rng);
            TrialRecord {
                trial: t,
                stat,
                event,
            }
        })
        .collect()
}

fn check_trials(trials: u64, m: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::ParameterOutOfRange("trials must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::NoSamples);
    }
    Ok(())
}

/// Per-element loss table `ℓ(q, x)`.
fn loss_table(loss: &LocalLoss, q: &Distribution) -> Arc<Vec<f64>> {
    Arc::new(q.probs().iter().map(|&v| loss.value_at(v)).collect())
}

/// Mean of `table[x_i]` over `m` fresh draws; `0·∞` never arises since only drawn points count.
fn empirical_mean<R: Rng>(cdf: &InverseCdf, table: &[f64], m: u64, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for _ in 0..m {
        s += table[cdf.draw(rng)];
    }
    s / m as f64
}

/// Fraction of trials with `|ℓ(q;p̂) − ℓ(q;p)| ≥ γ`; the stat is the absolute deviation.
pub fn run_concentration(
    loss: &LocalLoss,
    p: &Distribution,
    q: &Distribution,
    m: u64,
    trials: u64,
    gamma: f64,
    seed: u64,
) -> Result<ExperimentResult> {
    check_trials(trials, m)?;
    let truth = expected_loss(loss, q, p)?;
    let cdf = InverseCdf::new(p);
    let table = loss_table(loss, q);
    let records = run_trials(trials, seed, |_, rng| {
        let emp = empirical_mean(&cdf, &table, m, rng);
        let dev = if truth.is_infinite() && emp.is_infinite() {
            0.0
        } else {
            (emp - truth).abs()
        };
        (dev, dev >= gamma)
    });
    Ok(ExperimentResult {
        name: "concentration".into(),
        config: json!({"loss": loss.name(), "N": p.len(), "m": m, "trials": trials, "gamma": gamma}),
        seed,
        summary: summarize(&records),
        trials: records,
        extra: json!({"true_loss": finite_or_string(truth), "infinite_true_loss": truth.is_infinite()}),
    })
}

fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// Stat is `ℓ(q;p̂) − ℓ(p;p̂)`; the event is a strict win for `p`.
pub fn run_sample_properness(
    loss: &LocalLoss,
    p: &Distribution,
    q: &Distribution,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    check_trials(trials, m)?;
    p.ensure_same_domain(q)?;
    let cdf = InverseCdf::new(p);
    let diff: Arc<Vec<f64>> = Arc::new(
        q.probs()
            .iter()
            .zip(p.probs())
            .map(|(&qx, &px)| {
                let a = loss.value_at(qx);
                let b = loss.value_at(px);
                if a == b {
                    0.0
                } else {
                    a - b
                }
            })
            .collect(),
    );
    let records = run_trials(trials, seed, |_, rng| {
        let d = empirical_mean(&cdf, &diff, m, rng);
        (d, d > 0.0)
    });
    let ties = records.iter().filter(|r| r.stat == 0.0).count() as f64 / trials as f64;
    Ok(ExperimentResult {
        name: "sample-properness".into(),
        config: json!({"loss": loss.name(), "N": p.len(), "m": m, "trials": trials}),
        seed,
        summary: summarize(&records),
        trials: records,
        extra: json!({"tie_fraction": ties}),
    })
}

/// `p` uniform, `q` uniform on all but element 0: `ℓ(q;p) = ∞` under log
/// loss, yet the empirical loss is finite whenever element 0 is never drawn.
pub fn demo_logloss_nonconcentration(
    n: usize,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    check_trials(trials, m)?;
    if n < 2 {
        return Err(Error::InvalidShape("need N >= 2".into()));
    }
    let p = Distribution::uniform(n)?;
    let w = 1.0 / (n - 1) as f64;
    let q = Distribution::new((0..n).map(|x| if x == 0 { 0.0 } else { w }).collect())?;
    let log = LocalLoss::log();
    let truth = expected_loss(&log, &q, &p)?;
    let cdf = InverseCdf::new(&p);
    let table = loss_table(&log, &q);
    let records = run_trials(trials, seed, |_, rng| {
        let emp = empirical_mean(&cdf, &table, m, rng);
        (emp, emp.is_finite())
    });
    let expected = (1.0 - 1.0 / n as f64).powf(m as f64);
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    let summary = summarize(&records);
    let within = (summary.event_rate - expected).abs() <= 3.0 * sigma;
    Ok(ExperimentResult {
        name: "logloss-nonconcentration".into(),
        config: json!({"N": n, "m": m, "trials": trials}),
        seed,
        trials: records,
        extra: json!({
            "true_loss": finite_or_string(truth),
            "expected_finite_fraction": expected,
            "sigma": sigma,
            "within_3_sigma": within,
            "small_sample_regime": m as f64 <= n as f64 / 10.0,
        }),
        summary,
    })
}

/// The linear-loss pair: `p` puts `¼ ± 1/√m` on elements 0 and 1 and spreads
/// `½` over elements `2..N/2`; `q` puts `¼` on each of 0, 1 and spreads `½`
/// over `2..N`.
pub fn linear_improperness_pair(n: usize, m: u64) -> Result<(Distribution, Distribution)> {
    if n < 8 || n % 2 == 1 {
        return Err(Error::InvalidShape(format!(
            "N = {n} must be even and >= 8"
        )));
    }
    let s = 1.0 / (m as f64).sqrt();
    if s > 0.25 {
        return Err(Error::InvalidShape(format!(
            "m = {m} must be >= 16 so that p_2 >= 0"
        )));
    }
    let half = n / 2;
    let head_tail = 1.0 / (2.0 * (half - 2) as f64);
    let q_tail = 1.0 / (2.0 * (n - 2) as f64);
    let p: Vec<f64> = (0..n)
        .map(|x| match x {
            0 => 0.25 + s,
            1 => 0.25 - s,
            x if x < half => head_tail,
            _ => 0.0,
        })
        .collect();
    let q: Vec<f64> = (0..n).map(|x| if x < 2 { 0.25 } else { q_tail }).collect();
    Ok((Distribution::new(p)?, Distribution::new(q)?))
}

fn ln_factorials(m: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=m {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact probability that `ℓ(q;p̂) < ℓ(p;p̂)` for [`linear_improperness_pair`],
/// by summing the trinomial law of (count at 0, count at 1, rest).
pub fn linear_reversal_probability(n: usize, m: u64) -> Result<f64> {
    let (p, q) = linear_improperness_pair(n, m)?;
    let d: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| a - b)
        .collect();
    let (p0, p1) = (p.get(0), p.get(1));
    let rest = 1.0 - p0 - p1;
    let lf = ln_factorials(m);
    let (d0, d1, d_rest) = (d[0], d[1], d[2]);
    let mut total = 0.0;
    for c0 in 0..=m {
        for c1 in 0..=(m - c0) {
            let cr = m - c0 - c1;
            // Σ p̂_x (p_x − q_x) scaled by m; tail points beyond N/2 are never drawn
            let score = c0 as f64 * d0 + c1 as f64 * d1 + cr as f64 * d_rest;
            if score < 0.0 {
                let ln_p = lf[m as usize] - lf[c0 as usize] - lf[c1 as usize] - lf[cr as usize]
                    + c0 as f64 * p0.ln()
                    + c1 as f64 * p1.ln()
                    + if cr > 0 { cr as f64 * rest.ln() } else { 0.0 };
                total += ln_p.exp();
            }
        }
    }
    Ok(total)
}

/// Monte Carlo of the linear-loss reversal event, with the exact rate alongside.
pub fn demo_linear_loss_improperness(
    n: usize,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    check_trials(trials, m)?;
    let (p, q) = linear_improperness_pair(n, m)?;
    let report = is_calibrated(&q, &p, 1e-12)?;
    if !report.calibrated {
        return Err(Error::InvalidShape(format!(
            "constructed q not calibrated (discrepancy {:e})",
            report.max_discrepancy
        )));
    }
    let lin: LocalLoss = "linear".parse()?;
    let cdf = InverseCdf::new(&p);
    let diff: Arc<Vec<f64>> = Arc::new(
        q.probs()
            .iter()
            .zip(p.probs())
            .map(|(&qx, &px)| lin.value_at(qx) - lin.value_at(px))
            .collect(),
    );
    let records = run_trials(trials, seed, |_, rng| {
        let d = empirical_mean(&cdf, &diff, m, rng);
        (d, d < 0.0)
    });
    let exact = linear_reversal_probability(n, m)?;
    let level_sizes: Vec<usize> = level_sets(&q)
        .levels()
        .iter()
        .map(|l| l.members.len())
        .collect();
    Ok(ExperimentResult {
        name: "linear-loss-improperness".into(),
        config: json!({"N": n, "m": m, "trials": trials}),
        seed,
        summary: summarize(&records),
        trials: records,
        extra: json!({
            "calibrated": report.calibrated,
            "calibration_discrepancy": report.max_discrepancy,
            "level_sizes": level_sizes,
            "l1_distance": l1_distance(&p, &q)?,
            "exact_reversal_probability": exact,
            "small_sample_regime": m as f64 <= n as f64 / 10.0,
        }),
    })
}

/// Full-support point of the simplex from normalized exponentials.
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Distribution {
    loop {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 && e.iter().all(|&v| v > 0.0) {
            if let Ok(d) = Distribution::new(e.iter().map(|v| v / s).collect()) {
                return d;
            }
        }
    }
}

/// Like [`random_simplex`] but rounded to multiples of `1/denom`, every entry at least `1/denom`.
pub fn random_rational<R: Rng + ?Sized>(n: usize, denom: u64, rng: &mut R) -> Result<Distribution> {
    if (n as u64) > denom {
        return Err(Error::ParameterOutOfRange(format!(
            "N = {n} exceeds denominator {denom}"
        )));
    }
    let w = random_simplex(n, rng);
    let spare = (denom - n as u64) as f64;
    let raw: Vec<f64> = w.probs().iter().map(|v| v * spare).collect();
    let mut counts: Vec<u64> = raw.iter().map(|v| 1 + v.floor() as u64).collect();
    let mut left = denom - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for &x in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[x] += 1;
        left -= 1;
    }
    Distribution::new(counts.iter().map(|&c| c as f64 / denom as f64).collect())
}

/// A random rational `p` together with its calibrated set.
#[derive(Debug, Clone)]
pub struct CalibratedCase {
    pub p: Distribution,
    pub calibrated: Vec<Distribution>,
}

/// `count` random rational `p` with `N` drawn uniformly from `n_min..=n_max`.
pub fn calibrated_cases(
    n_min: usize,
    n_max: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<CalibratedCase>> {
    if n_min < 1 || n_min > n_max || n_max > DEFAULT_MAX_ENUMERATION {
        return Err(Error::ParameterOutOfRange(format!(
            "N range {n_min}..={n_max} must lie in 1..={DEFAULT_MAX_ENUMERATION}"
        )));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(trial_seed(seed, t));
            let n = rng.random_range(n_min..=n_max);
            let p = random_rational(n, RATIONAL_DENOMINATOR, &mut rng)?;
            let calibrated = enumerate_calibrated(&p, DEFAULT_MAX_ENUMERATION)?;
            Ok(CalibratedCase { p, calibrated })
        })
        .collect()
}

/// Outcome of one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: u64,
    pub violations: u64,
    /// Smallest observed margin (negative means violated).
    pub worst_margin: f64,
    pub detail: String,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            detail: String::new(),
            passed: false,
        }
    }

    fn record(&mut self, margin: f64, ok: bool) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
        }
    }

    fn merge(mut self, other: SuiteReport) -> Self {
        self.checks += other.checks;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self
    }

    fn finish(mut self) -> Self {
        self.passed = self.violations == 0;
        self
    }
}

fn par_suite<T: Sync>(
    name: &str,
    items: &[T],
    f: impl Fn(&T, &mut SuiteReport) + Sync,
) -> SuiteReport {
    items
        .par_iter()
        .map(|item| {
            let mut r = SuiteReport::new(name);
            f(item, &mut r);
            r
        })
        .reduce(|| SuiteReport::new(name), SuiteReport::merge)
}

/// Losses for the calibrated-set sweeps: the catalog with loglog on the
/// scaled support `ln ln(e·z)`, so that every `z = 1/q_x ≥ 1` is admissible.
pub fn sweep_losses() -> Vec<LocalLoss> {
    builtin_catalog()
        .into_iter()
        .map(|l| match l.kind() {
            crate::losses::LossKind::LogLog(_) => LocalLoss::loglog_scaled(),
            _ => l,
        })
        .collect()
}

/// `ℓ(q;p) − ℓ(p;p) ≥ −1e-9` over every calibrated `q`, and `> 1e-12` when `q ≠ p`.
pub fn suite_strict_properness(
    cases: &[CalibratedCase],
    losses: &[LocalLoss],
) -> Result<SuiteReport> {
    let mut r = par_suite("strict-properness", cases, |case, r| {
        for loss in losses {
            let base = expected_loss(loss, &case.p, &case.p).unwrap_or(f64::NAN);
            for q in &case.calibrated {
                let gap = expected_loss(loss, q, &case.p).unwrap_or(f64::NAN) - base;
                let distinct = l1_distance(&case.p, q).unwrap_or(0.0) > 1e-12;
                let mut ok = gap >= -CHECK_TOLERANCE;
                if distinct && loss.strictly_concave() {
                    ok &= gap > 1e-12;
                }
                r.record(if distinct { gap } else { f64::INFINITY }, ok);
            }
        }
    });
    r.detail = format!("{} distributions, {} losses", cases.len(), losses.len());
    Ok(r.finish())
}

/// Actual gap minus `C(4N/ε)·ε²/128` with `ε = ‖p − q‖₁`, over every calibrated `q ≠ p`.
pub fn suite_strong_properness(
    cases: &[CalibratedCase],
    losses: &[LocalLoss],
) -> Result<SuiteReport> {
    let mut r = par_suite("strong-properness", cases, |case, r| {
        let n = case.p.len() as f64;
        for loss in losses {
            let base = expected_loss(loss, &case.p, &case.p).unwrap_or(f64::NAN);
            for q in &case.calibrated {
                let eps = l1_distance(&case.p, q).unwrap_or(f64::NAN);
                if eps <= 1e-12 {
                    continue;
                }
                let gap = expected_loss(loss, q, &case.p).unwrap_or(f64::NAN) - base;
                let bound = strong_properness_gap_bound(loss, n, eps.min(2.0)).unwrap_or(f64::NAN);
                let margin = gap - bound;
                r.record(margin, margin >= -CHECK_TOLERANCE);
            }
        }
    });
    r.detail = format!("{} distributions, {} losses", cases.len(), losses.len());
    Ok(r.finish())
}

/// `E[1/p_X | X ∈ B_t] = 1/t` on every level of every calibrated `q`.
pub fn suite_level_inverse_mean(cases: &[CalibratedCase]) -> Result<SuiteReport> {
    let mut r = par_suite("level-inverse-mean", cases, |case, r| {
        for q in &case.calibrated {
            for level in level_sets(q).levels() {
                let v = conditional_inverse_mean(&case.p, &level.members).unwrap_or(f64::NAN);
                let err = (v - 1.0 / level.value).abs();
                r.record(CHECK_TOLERANCE - err, err <= CHECK_TOLERANCE);
            }
        }
    });
    r.detail = format!("{} distributions", cases.len());
    Ok(r.finish())
}

/// `q_x ≥ p_x/N − 1e-12` on every calibrated `q`, plus the tight uniform/point-mass case.
pub fn suite_mass_bound(cases: &[CalibratedCase]) -> Result<SuiteReport> {
    let mut r = par_suite("mass-bound", cases, |case, r| {
        let n = case.p.len() as f64;
        for q in &case.calibrated {
            for (&qx, &px) in q.probs().iter().zip(case.p.probs()) {
                let margin = qx - px / n + 1e-12;
                r.record(margin, margin >= 0.0);
            }
        }
    });
    let mut tight = true;
    for n in 1..=DEFAULT_MAX_ENUMERATION {
        let u = Distribution::uniform(n)?;
        let pm = Distribution::point_mass(n, n - 1)?;
        tight &= (min_mass_ratio(&u, &pm)? - 1.0 / n as f64).abs() <= 1e-15;
        tight &= is_calibrated(&u, &pm, 1e-12)?.calibrated;
    }
    r.record(0.0, tight);
    r.detail = format!(
        "{} distributions; equality at uniform q, point-mass p: {tight}",
        cases.len()
    );
    Ok(r.finish())
}

fn random_pairs(count: usize, n_max: usize, seed: u64) -> Vec<(Distribution, Distribution)> {
    (0..count as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(trial_seed(seed, t));
            let n = rng.random_range(2..=n_max);
            (random_simplex(n, &mut rng), random_simplex(n, &mut rng))
        })
        .collect()
}

/// `|log-loss gap − KL| ≤ 1e-9` and `KL ≥ ½‖p − q‖₁²` on random full-support pairs.
pub fn suite_kl_pinsker(
    count: usize,
    n_max: usize,
    seed: u64,
) -> Result<(SuiteReport, SuiteReport)> {
    let pairs = random_pairs(count, n_max, seed);
    let log = LocalLoss::log();
    let mut identity = par_suite("kl-identity", &pairs, |(p, q), r| {
        let gap = expected_loss(&log, q, p).unwrap() - expected_loss(&log, p, p).unwrap();
        let err = (gap - kl_divergence(p, q).unwrap()).abs();
        r.record(CHECK_TOLERANCE - err, err <= CHECK_TOLERANCE);
    });
    identity.detail = format!("{count} pairs, N <= {n_max}");
    let mut pinsker = par_suite("pinsker", &pairs, |(p, q), r| {
        let margin = kl_divergence(p, q).unwrap() - 0.5 * l1_distance(p, q).unwrap().powi(2);
        r.record(margin, margin >= -1e-15);
    });
    pinsker.detail = identity.detail.clone();
    Ok((identity.finish(), pinsker.finish()))
}

/// Reports for the generated-loss machinery on random full-support pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BregmanReports {
    /// Generator divergence against closed form and against the expected-loss gap.
    pub agreement: SuiteReport,
    /// Quadratic divergence against `½‖p − q‖₂²` at `1e-12`.
    pub quadratic_exact: SuiteReport,
    /// `D_invroot ≥ ½‖p − q‖₁²`.
    pub invroot_l1_strong: SuiteReport,
    /// Smallest `D_invroot / (½‖p − q‖₁²)` seen.
    pub invroot_min_ratio: f64,
    /// `D_power:0.5 ≥ ½‖p − q‖₁²`, the rescaled generator.
    pub power_half_l1_strong: SuiteReport,
}

pub fn suite_bregman(count: usize, n_max: usize, seed: u64) -> Result<BregmanReports> {
    use crate::scoring::expected_generated_loss;
    let pairs = random_pairs(count, n_max, seed);
    let gens = [
        ConcaveGenerator::Shannon,
        ConcaveGenerator::Quadratic,
        ConcaveGenerator::InvRoot,
    ];
    let mut agreement = par_suite("bregman-agreement", &pairs, |(p, q), r| {
        for g in &gens {
            let d = divergence(g, p, q).unwrap();
            let direct = direct_divergence(g, p, q).unwrap();
            let gap = expected_generated_loss(g, q, p).unwrap()
                - expected_generated_loss(g, p, p).unwrap();
            let err = (d - direct).abs().max((d - gap).abs());
            r.record(CHECK_TOLERANCE - err, err <= CHECK_TOLERANCE);
        }
    });
    agreement.detail = format!("{count} pairs x shannon/quad/invroot");
    let mut quadratic_exact = par_suite("quadratic-l2", &pairs, |(p, q), r| {
        let d = divergence(&ConcaveGenerator::Quadratic, p, q).unwrap();
        let err = (d - 0.5 * l2_squared(p, q).unwrap()).abs();
        r.record(1e-12 - err, err <= 1e-12);
    });
    quadratic_exact.detail = format!("{count} pairs");
    let strong = |g: ConcaveGenerator, name: &str| {
        par_suite(name, &pairs, |(p, q), r| {
            let d = divergence(&g, p, q).unwrap();
            let target = 0.5 * l1_distance(p, q).unwrap().powi(2);
            r.record(d - target, d >= target);
        })
    };
    let mut invroot = strong(ConcaveGenerator::InvRoot, "invroot-l1-strong");
    let min_ratio = pairs
        .par_iter()
        .map(|(p, q)| {
            let d = divergence(&ConcaveGenerator::InvRoot, p, q).unwrap();
            d / (0.5 * l1_distance(p, q).unwrap().powi(2))
        })
        .reduce(|| f64::INFINITY, f64::min);
    invroot.detail = format!("{count} pairs; min D/(½‖p−q‖₁²) = {min_ratio:.4}");
    let mut power = strong(ConcaveGenerator::Power(0.5), "power-half-l1-strong");
    power.detail = format!("{count} pairs");
    Ok(BregmanReports {
        agreement: agreement.finish(),
        quadratic_exact: quadratic_exact.finish(),
        invroot_l1_strong: invroot.finish(),
        invroot_min_ratio: min_ratio,
        power_half_l1_strong: power.finish(),
    })
}

/// `gap·N = 2` to `1e-12` and `‖p − q‖₁ = 2` for every even `N ≤ n_max`.
pub fn suite_l2_counterexample(n_max: usize) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("l2-counterexample");
    for n in (2..=n_max).step_by(2) {
        let c = l2_counterexample(n)?;
        let err = (c.l2_gap * n as f64 - 2.0)
            .abs()
            .max((c.l1_dist - 2.0).abs());
        r.record(1e-12 - err, err <= 1e-12);
    }
    r.detail = format!("even N in 2..={n_max}");
    Ok(r.finish())
}

/// Grid check of every catalog loss plus the scaled loglog.
pub fn suite_concavity() -> Result<SuiteReport> {
    let mut losses = builtin_catalog();
    losses.push(LocalLoss::loglog_scaled());
    let mut r = SuiteReport::new("concavity-metadata");
    let mut failures = Vec::new();
    for loss in &losses {
        match check_left_strong_concavity(loss, &default_grid(loss)) {
            Ok(rep) => r.record(-rep.max_slack, true),
            Err(e) => {
                r.record(f64::NEG_INFINITY, false);
                failures.push(e.to_string());
            }
        }
    }
    r.detail = if failures.is_empty() {
        format!("{} losses x 400 points", losses.len())
    } else {
        failures.join("; ")
    };
    Ok(r.finish())
}

/// For each random `p`, the smallest (actual gap − bound) over calibrated `q ≠ p`.
pub fn sweep_strong_properness(
    loss: &LocalLoss,
    n_max: usize,
    trials_p: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    let cases = calibrated_cases(2.min(n_max), n_max, trials_p as usize, seed)?;
    let records: Vec<TrialRecord> = cases
        .par_iter()
        .enumerate()
        .map(|(t, case)| {
            let r = suite_strong_properness(std::slice::from_ref(case), std::slice::from_ref(loss))
                .expect("suite over valid cases");
            let margin = if r.checks == 0 { 0.0 } else { r.worst_margin };
            TrialRecord {
                trial: t as u64,
                stat: margin,
                event: margin < -CHECK_TOLERANCE,
            }
        })
        .collect();
    Ok(ExperimentResult {
        name: "strong-properness-sweep".into(),
        config: json!({"loss": loss.name(), "N_max": n_max, "trials": trials_p}),
        seed,
        summary: summarize(&records),
        trials: records,
        extra: json!({}),
    })
}

/// Coarsens `p` by sorting it and cutting the order into `blocks` runs of near-equal size.
pub fn sorted_block_coarsening(p: &Distribution, blocks: usize) -> Result<Distribution> {
    let n = p.len();
    let blocks = blocks.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.get(a).total_cmp(&p.get(b)));
    let partition: Vec<Vec<usize>> = (0..blocks)
        .map(|k| order[k * n / blocks..(k + 1) * n / blocks].to_vec())
        .collect();
    coarsen(p, &partition)
}

/// Repeated runs of the approximate-calibration construction; the stat is
/// `‖q − q′‖₁` and the event is a certification failure.
pub fn run_construction(
    p: &Distribution,
    q: &Distribution,
    params: &ApproxCalibrationParams,
    multiplier: f64,
    runs: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    check_trials(runs, 1)?;
    let outcomes: Vec<Result<(f64, bool, u64)>> = (0..runs)
        .into_par_iter()
        .map(|t| {
            let (qp, trace) =
                make_approx_calibrated_seeded(q, p, params, multiplier, trial_seed(seed, t))?;
            let cert = is_approx_calibrated(&qp, p, params)?;
            Ok((displacement(q, &qp)?, !cert.passed, trace.samples_used))
        })
        .collect();
    let mut records = Vec::with_capacity(runs as usize);
    let mut used = 0;
    for (t, o) in outcomes.into_iter().enumerate() {
        let (d, failed, m) = o?;
        used = m;
        records.push(TrialRecord {
            trial: t as u64,
            stat: d,
            event: failed,
        });
    }
    let summary = summarize(&records);
    let alpha_sum = params.alpha1 + params.alpha2;
    Ok(ExperimentResult {
        name: "approx-calibration-construction".into(),
        config: json!({
            "N": p.len(), "alpha1": params.alpha1, "alpha2": params.alpha2,
            "delta": params.delta, "multiplier": multiplier, "runs": runs,
        }),
        seed,
        extra: json!({
            "bucket_count": params.bucket_count(p.len()),
            "samples_theoretical": params.theoretical_samples(p.len()),
            "samples_used": used,
            "failure_limit": params.delta + 3.0 * (params.delta / runs as f64).sqrt(),
            "empirical_constant": summary.median / alpha_sum,
        }),
        summary,
        trials: records,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
