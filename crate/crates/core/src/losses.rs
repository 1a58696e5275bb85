//! Local losses `ℓ(q, x) = f(1/q_x)` and their analytic metadata.
//!
//! Each loss carries `f`, `f′`, `f″`, a growth envelope `f(z) ≤ c·z^r`, the
//! left-strong-concavity rate `C(z)` (so `f″(z) ≤ −C(z)/z²`) and the derivative
//! envelope `D(z)` (so `f′(z) ≤ D(z)/z`). [`check_left_strong_concavity`]
//! verifies all of it on a grid.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::Serialize;

use crate::distribution::{Distribution, EmpiricalDistribution};
use crate::error::{Error, Result};

/// Absolute tolerance used by the grid checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Default grid size for [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 400;

/// Upper end of [`default_grid`].
pub const DEFAULT_GRID_MAX: f64 = 1e9;

const LOGLOG_CLAMP: f64 = std::f64::consts::E * (1.0 + 1e-12);

static LOGLOG_CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `ln z`
    Log,
    /// `(ln z)^p`, `p ∈ (0, 1]`
    PowLog(f64),
    /// `ln ln(k·z)`; `k = 1` is plain loglog.
    LogLog(f64),
    /// `(2 + ln z)² = ln(e²z)²`
    SqLog,
    /// `−1/z`, i.e. `ℓ = −q_x`
    Linear,
    /// `−1/√z`
    NegSqrt,
}

/// Asymptotic bound shapes for a loss, as metadata strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundTemplates {
    pub strong_properness: &'static str,
    pub concentration: &'static str,
    pub sample_properness: &'static str,
}

/// A local loss with its metadata. Construct via [`LocalLoss::new`] or parse a name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLoss {
    kind: LossKind,
}

impl LocalLoss {
    pub fn new(kind: LossKind) -> Result<Self> {
        match kind {
            LossKind::PowLog(p) if !(p > 0.0 && p <= 1.0) => Err(Error::ParameterOutOfRange(
                format!("powlog exponent {p} not in (0, 1]"),
            )),
            LossKind::LogLog(k) if !(k.is_finite() && k >= 1.0) => Err(Error::ParameterOutOfRange(
                format!("loglog scale {k} must be >= 1"),
            )),
            _ => Ok(Self { kind }),
        }
    }

    pub fn log() -> Self {
        Self {
            kind: LossKind::Log,
        }
    }

    pub fn loglog() -> Self {
        Self {
            kind: LossKind::LogLog(1.0),
        }
    }

    /// `ln ln(e·z) = ln(1 + ln z)`, defined and nonnegative on all of `z ≥ 1`.
    pub fn loglog_scaled() -> Self {
        Self {
            kind: LossKind::LogLog(std::f64::consts::E),
        }
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn f(&self, z: f64) -> f64 {
        if z == f64::INFINITY {
            return match self.kind {
                LossKind::Linear | LossKind::NegSqrt => 0.0,
                _ => f64::INFINITY,
            };
        }
        match self.kind {
            LossKind::Log => z.ln(),
            LossKind::PowLog(p) => z.ln().powf(p),
            LossKind::LogLog(k) => {
                let mut kz = k * z;
                if kz <= 1.0 {
                    if !LOGLOG_CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                        log::warn!("loglog evaluated at k·z = {kz} <= 1; clamping to e");
                    }
                    kz = LOGLOG_CLAMP;
                }
                kz.ln().ln()
            }
            LossKind::SqLog => (2.0 + z.ln()).powi(2),
            LossKind::Linear => -1.0 / z,
            LossKind::NegSqrt => -1.0 / z.sqrt(),
        }
    }

    pub fn f1(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Log => 1.0 / z,
            LossKind::PowLog(p) => p * z.ln().powf(p - 1.0) / z,
            LossKind::LogLog(k) => 1.0 / (z * (k * z).ln()),
            LossKind::SqLog => 2.0 * (2.0 + z.ln()) / z,
            LossKind::Linear => 1.0 / (z * z),
            LossKind::NegSqrt => 0.5 * z.powf(-1.5),
        }
    }

    pub fn f2(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Log => -1.0 / (z * z),
            LossKind::PowLog(p) => {
                let l = z.ln();
                -(p * l.powf(p - 1.0) + p * (1.0 - p) * l.powf(p - 2.0)) / (z * z)
            }
            LossKind::LogLog(k) => {
                let u = (k * z).ln();
                -(1.0 + u) / (z * z * u * u)
            }
            LossKind::SqLog => -(2.0 + 2.0 * z.ln()) / (z * z),
            LossKind::Linear => -2.0 / (z * z * z),
            LossKind::NegSqrt => -0.75 * z.powf(-2.5),
        }
    }

    /// The registered rate `C(z)`.
    pub fn rate_c(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Log => 1.0,
            LossKind::PowLog(p) => {
                let l = z.ln();
                p * l.powf(p - 1.0) + p * (1.0 - p) * l.powf(p - 2.0)
            }
            LossKind::LogLog(k) => {
                let u = (k * z).ln();
                (1.0 + u) / (u * u)
            }
            // the tight rate 2 + 2 ln z grows, so a constant is registered
            LossKind::SqLog => 2.0,
            LossKind::Linear => 1.0 / z,
            LossKind::NegSqrt => 0.75 / z.sqrt(),
        }
    }

    /// `C(z)`, or [`Error::MissingRate`] where it is not a finite nonnegative number.
    pub fn rate(&self, z: f64) -> Result<f64> {
        let c = self.rate_c(z);
        if c.is_finite() && c >= 0.0 {
            Ok(c)
        } else {
            Err(Error::MissingRate {
                loss: self.name(),
                z,
            })
        }
    }

    /// The derivative envelope `D(z)`.
    pub fn deriv_d(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Log | LossKind::PowLog(_) | LossKind::LogLog(_) | LossKind::Linear => 1.0,
            LossKind::SqLog => 2.0 * z.ln() + 4.0,
            LossKind::NegSqrt => 0.5,
        }
    }

    /// Smallest `z` at which `f′(z) ≤ D(z)/z` holds.
    pub fn deriv_d_valid_from(&self) -> f64 {
        match self.kind {
            LossKind::PowLog(p) if p < 1.0 => p.powf(1.0 / (1.0 - p)).exp(),
            _ => self.domain_min(),
        }
    }

    /// `(c, r)` with `f(z) ≤ c·z^r` for `z ≥ 1`.
    pub fn growth(&self) -> (f64, f64) {
        match self.kind {
            LossKind::SqLog => (16.0 / std::f64::consts::E, 0.5),
            _ => (1.0, 0.5),
        }
    }

    /// Left end of the region where `f` is nonnegative, increasing and concave.
    pub fn domain_min(&self) -> f64 {
        match self.kind {
            LossKind::LogLog(k) => (std::f64::consts::E / k).max(1.0),
            _ => 1.0,
        }
    }

    /// Smallest `z` from which `q ↦ f(1/q)` is convex, i.e. `z·f″(z) + 2f′(z) ≥ 0`.
    pub fn inverse_convex_from(&self) -> f64 {
        match self.kind {
            LossKind::PowLog(p) => (1.0 - p).exp(),
            _ => self.domain_min(),
        }
    }

    pub fn strictly_concave(&self) -> bool {
        true
    }

    /// Whether `f ≥ 0` on its domain; the concentration bounds need this.
    pub fn nonnegative(&self) -> bool {
        !matches!(self.kind, LossKind::Linear | LossKind::NegSqrt)
    }

    /// `ln f(z)` given `ln z`, without forming `z`.
    pub fn ln_f_from_ln_z(&self, ln_z: f64) -> Result<f64> {
        match self.kind {
            LossKind::Log => Ok(ln_z.ln()),
            LossKind::PowLog(p) => Ok(p * ln_z.ln()),
            LossKind::LogLog(k) => Ok((k.ln() + ln_z).ln().ln()),
            LossKind::SqLog => Ok(2.0 * (2.0 + ln_z).ln()),
            LossKind::Linear | LossKind::NegSqrt => Err(Error::NegativeLoss(self.name())),
        }
    }

    pub fn templates(&self) -> BoundTemplates {
        match self.kind {
            LossKind::Log => BoundTemplates {
                strong_properness: "Ω(ε^2)",
                concentration: "Õ(γ^-2 ln(N/γ)^2)",
                sample_properness: "O(ε^-4 (ln N)^2)",
            },
            LossKind::PowLog(_) => BoundTemplates {
                strong_properness: "Ω(ε^2 ln(N/ε)^(p-1))",
                concentration: "Õ(γ^-2 ln(N/γ)^(2p))",
                sample_properness: "O(ε^-4 (ln N)^2)",
            },
            LossKind::LogLog(_) => BoundTemplates {
                strong_properness: "Ω(ε^2 / ln N)",
                concentration: "Õ(γ^-2 lnln(N/γ)^2)",
                sample_properness: "O(ε^-4 (lnln N)^2 (ln N)^2)",
            },
            LossKind::SqLog => BoundTemplates {
                strong_properness: "Ω(ε^2)",
                concentration: "Õ(γ^-2 ln(N/γ)^4)",
                sample_properness: "O(ε^-4 (ln N)^4)",
            },
            LossKind::Linear => BoundTemplates {
                strong_properness: "Ω(ε^3 / N)",
                concentration: "n/a (f < 0)",
                sample_properness: "n/a (f < 0)",
            },
            LossKind::NegSqrt => BoundTemplates {
                strong_properness: "Ω(ε^2.5 / √N)",
                concentration: "n/a (f < 0)",
                sample_properness: "n/a (f < 0)",
            },
        }
    }

    /// `ℓ(q, x)` for a single probability `q_x`.
    pub fn value_at(&self, qx: f64) -> f64 {
        if qx == 0.0 {
            self.f(f64::INFINITY)
        } else {
            self.f(1.0 / qx)
        }
    }
}

impl fmt::Display for LocalLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Log => write!(f, "log"),
            LossKind::PowLog(p) => write!(f, "powlog:{p}"),
            LossKind::LogLog(1.0) => write!(f, "loglog"),
            LossKind::LogLog(k) if k == std::f64::consts::E => write!(f, "loglog:e"),
            LossKind::LogLog(k) => write!(f, "loglog:{k}"),
            LossKind::SqLog => write!(f, "sqlog"),
            LossKind::Linear => write!(f, "linear"),
            LossKind::NegSqrt => write!(f, "negsqrt"),
        }
    }
}

impl FromStr for LocalLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |a: &str| -> Result<f64> {
            if a == "e" {
                return Ok(std::f64::consts::E);
            }
            a.parse::<f64>()
                .map_err(|_| Error::UnknownLoss(s.to_string()))
        };
        let kind = match (head, arg) {
            ("log", None) => LossKind::Log,
            ("powlog", Some(a)) => LossKind::PowLog(number(a)?),
            ("loglog", None) => LossKind::LogLog(1.0),
            ("loglog", Some(a)) => LossKind::LogLog(number(a)?),
            ("sqlog", None) => LossKind::SqLog,
            ("linear", None) => LossKind::Linear,
            ("negsqrt", None) => LossKind::NegSqrt,
            _ => return Err(Error::UnknownLoss(s.to_string())),
        };
        LocalLoss::new(kind)
    }
}

/// The six built-in families; `powlog` at `p = 1/2`.
pub fn builtin_catalog() -> Vec<LocalLoss> {
    [
        LossKind::Log,
        LossKind::PowLog(0.5),
        LossKind::LogLog(1.0),
        LossKind::SqLog,
        LossKind::Linear,
        LossKind::NegSqrt,
    ]
    .into_iter()
    .map(|kind| LocalLoss { kind })
    .collect()
}

/// `f(1/q_x)`; `+∞` when `q_x = 0` and `f` is unbounded.
pub fn loss_value(loss: &LocalLoss, q: &Distribution, x: usize) -> f64 {
    loss.value_at(q.get(x))
}

fn weighted_sum(loss: &LocalLoss, q: &Distribution, weights: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0;
    for (w, &qx) in weights.zip(q.probs()) {
        if w == 0.0 {
            continue;
        }
        total += w * loss.value_at(qx);
    }
    total
}

/// `ℓ(q; p) = Σ p_x f(1/q_x)` with `0·∞ = 0`.
pub fn expected_loss(loss: &LocalLoss, q: &Distribution, p: &Distribution) -> Result<f64> {
    q.ensure_same_domain(p)?;
    Ok(weighted_sum(loss, q, p.probs().iter().copied()))
}

/// `ℓ(q; p̂) = (1/m) Σ counts_x f(1/q_x)`.
pub fn empirical_loss(
    loss: &LocalLoss,
    q: &Distribution,
    phat: &EmpiricalDistribution,
) -> Result<f64> {
    q.domain().ensure_compatible(phat.domain())?;
    let m = phat.m() as f64;
    Ok(weighted_sum(
        loss,
        q,
        phat.counts().iter().map(|&c| c as f64 / m),
    ))
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// 400 log-spaced points from just above the loss's domain start to `1e9`.
pub fn default_grid(loss: &LocalLoss) -> Vec<f64> {
    log_grid(
        loss.domain_min() * 1.001,
        DEFAULT_GRID_MAX,
        DEFAULT_GRID_POINTS,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub loss: String,
    pub points: usize,
    /// `max_z f″(z) + C(z)/z²`; nonpositive when the rate holds.
    pub max_slack: f64,
    /// Point attaining `max_slack`.
    pub worst_z: f64,
    /// `min_z −f″(z)·z² − C(z)`, how much curvature the registered rate leaves unused.
    pub min_headroom: f64,
}

fn violation(loss: &LocalLoss, z: f64, what: &'static str, slack: f64) -> Error {
    Error::ViolationAt {
        loss: loss.name(),
        z,
        what,
        slack,
    }
}

/// Checks the metadata of `loss` on `grid`.
///
/// Fails on the first point where `f″ + C/z² > 1e-9`, or where monotonicity,
/// concavity, the growth envelope, `C` nonnegative and non-increasing, the `D`
/// envelope, or convexity of `q ↦ f(1/q)` breaks.
pub fn check_left_strong_concavity(loss: &LocalLoss, grid: &[f64]) -> Result<ConcavityReport> {
    let tol = GRID_TOLERANCE;
    let (c, r) = loss.growth();
    let mut max_slack = f64::NEG_INFINITY;
    let mut worst_z = f64::NAN;
    let mut min_headroom = f64::INFINITY;
    let mut prev: Option<(f64, f64, f64)> = None;

    for &z in grid {
        if z < loss.domain_min() {
            return Err(Error::ParameterOutOfRange(format!(
                "grid point {z} below the domain of {loss}"
            )));
        }
        let (fz, f1, f2, cz) = (loss.f(z), loss.f1(z), loss.f2(z), loss.rate_c(z));

        let slack = f2 + cz / (z * z);
        if slack > tol || !slack.is_finite() {
            return Err(violation(loss, z, "f'' + C/z^2 > 0", slack));
        }
        if slack > max_slack {
            max_slack = slack;
            worst_z = z;
        }
        min_headroom = min_headroom.min(-f2 * z * z - cz);

        if f1 < -tol {
            return Err(violation(loss, z, "f decreasing", f1));
        }
        if f2 > tol {
            return Err(violation(loss, z, "f not concave", f2));
        }
        let envelope = fz - c * z.powf(r);
        if envelope > tol {
            return Err(violation(loss, z, "growth envelope exceeded", envelope));
        }
        if cz < 0.0 {
            return Err(violation(loss, z, "C negative", cz));
        }
        if z >= loss.deriv_d_valid_from() {
            let d_slack = f1 - loss.deriv_d(z) / z;
            if d_slack > tol {
                return Err(violation(loss, z, "f' > D/z", d_slack));
            }
        }
        if z >= loss.inverse_convex_from() {
            let conv = z * f2 + 2.0 * f1;
            if conv < -tol {
                return Err(violation(loss, z, "q -> f(1/q) not convex", conv));
            }
        }
        if let Some((pz, pc, pd)) = prev {
            if cz > pc + tol {
                return Err(violation(loss, z, "C increasing", cz - pc));
            }
            if pz >= loss.deriv_d_valid_from() && loss.deriv_d(z) < pd - tol {
                return Err(violation(loss, z, "D decreasing", pd - loss.deriv_d(z)));
            }
        }
        prev = Some((z, cz, loss.deriv_d(z)));
    }

    Ok(ConcavityReport {
        loss: loss.name(),
        points: grid.len(),
        max_slack,
        worst_z,
        min_headroom,
    })
}

/// `t(B) = p(B)/|B|` and `ε = Σ_{x∈B} |p_x − t(B)|`.
fn bucket_shape(p: &Distribution, set: &[usize]) -> Result<(f64, f64, f64)> {
    let mass = p.mass(set);
    if set.is_empty() || mass <= 0.0 {
        return Err(Error::ZeroMassBucket);
    }
    let t = mass / set.len() as f64;
    let eps = set.iter().map(|&x| (p.get(x) - t).abs()).sum();
    Ok((mass, t, eps))
}

/// `(b(μ)/32)·ε²/(p(B)²·t(B)²)` with `μ = 1/t(B)`.
pub fn jensen_gap_lower_bound(
    p: &Distribution,
    set: &[usize],
    rate_b: impl Fn(f64) -> f64,
) -> Result<f64> {
    let (mass, t, eps) = bucket_shape(p, set)?;
    let mu = 1.0 / t;
    Ok(rate_b(mu) / 32.0 * eps * eps / (mass * mass * t * t))
}

/// `b(z) = C(z)/z²` for a catalog loss.
pub fn rate_b(loss: &LocalLoss) -> impl Fn(f64) -> f64 + '_ {
    move |z| loss.rate_c(z) / (z * z)
}

/// The actual gap `f(1/t(B)) − E[f(1/p_X) | X ∈ B]`.
pub fn conditional_jensen_gap(loss: &LocalLoss, p: &Distribution, set: &[usize]) -> Result<f64> {
    let (mass, t, _) = bucket_shape(p, set)?;
    let inner: f64 = set
        .iter()
        .map(|&x| p.get(x) / mass * loss.value_at(p.get(x)))
        .sum();
    Ok(loss.f(1.0 / t) - inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::kl_divergence;

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn catalog_shape() {
        let cat = builtin_catalog();
        assert_eq!(cat.len(), 6);
        let names: Vec<String> = cat.iter().map(|l| l.name()).collect();
        assert_eq!(
            names,
            ["log", "powlog:0.5", "loglog", "sqlog", "linear", "negsqrt"]
        );
        let pl1: LocalLoss = "powlog:1".parse().unwrap();
        for z in [1.5, 10.0, 1e6] {
            assert!((pl1.f(z) - LocalLoss::log().f(z)).abs() < 1e-15);
            assert!((pl1.rate_c(z) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn named_values() {
        let e = std::f64::consts::E;
        assert!((LocalLoss::loglog().rate_c(e) - 2.0).abs() < 1e-15);
        let sq: LocalLoss = "sqlog".parse().unwrap();
        assert_eq!(sq.f(1.0), 4.0);
        assert!((sq.f(1.0) - (e * e).ln().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trip() {
        for name in [
            "log",
            "powlog:0.25",
            "loglog",
            "loglog:e",
            "sqlog",
            "linear",
            "negsqrt",
        ] {
            let l: LocalLoss = name.parse().unwrap();
            assert_eq!(l.name(), name);
        }
        assert!(matches!(
            "cubic".parse::<LocalLoss>(),
            Err(Error::UnknownLoss(_))
        ));
        assert!(matches!(
            "powlog:1.5".parse::<LocalLoss>(),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(matches!(
            "powlog:0".parse::<LocalLoss>(),
            Err(Error::ParameterOutOfRange(_))
        ));
    }

    #[test]
    fn loss_value_examples() {
        let u = Distribution::uniform(4).unwrap();
        assert!((loss_value(&LocalLoss::log(), &u, 0) - 4f64.ln()).abs() < 1e-15);
        let q = dist(&[0.0, 1.0]);
        assert_eq!(loss_value(&LocalLoss::log(), &q, 0), f64::INFINITY);
        let lin: LocalLoss = "linear".parse().unwrap();
        let q = dist(&[0.3, 0.7]);
        assert!((loss_value(&lin, &q, 0) + 0.3).abs() < 1e-15);
        assert_eq!(lin.value_at(0.0), 0.0);
    }

    #[test]
    fn expected_loss_examples() {
        let u = Distribution::uniform(4).unwrap();
        let log = LocalLoss::log();
        assert!((expected_loss(&log, &u, &u).unwrap() - 4f64.ln()).abs() < 1e-15);

        let p = dist(&[0.2, 0.5, 0.3]);
        let q = dist(&[0.4, 0.4, 0.2]);
        let gap = expected_loss(&log, &q, &p).unwrap() - expected_loss(&log, &p, &p).unwrap();
        assert!((gap - kl_divergence(&p, &q).unwrap()).abs() < 1e-12);

        let lin: LocalLoss = "linear".parse().unwrap();
        let p = dist(&[1.0 / 3.0, 2.0 / 3.0]);
        let half = dist(&[0.5, 0.5]);
        assert!((expected_loss(&lin, &p, &p).unwrap() + 5.0 / 9.0).abs() < 1e-15);
        assert!((expected_loss(&lin, &half, &p).unwrap() + 0.5).abs() < 1e-15);

        // 0·∞ = 0
        let pm = Distribution::point_mass(2, 1).unwrap();
        let q = dist(&[0.0, 1.0]);
        assert_eq!(expected_loss(&log, &q, &pm).unwrap(), 0.0);
    }

    #[test]
    fn empirical_loss_examples() {
        let d = crate::distribution::Domain::new(3).unwrap();
        let q = dist(&[0.2, 0.3, 0.5]);
        let log = LocalLoss::log();
        let one = EmpiricalDistribution::from_counts(vec![0, 7, 0], d.clone()).unwrap();
        assert!((empirical_loss(&log, &q, &one).unwrap() - loss_value(&log, &q, 1)).abs() < 1e-15);

        let p = dist(&[0.25, 0.25, 0.5]);
        let exact = EmpiricalDistribution::from_counts(vec![1, 1, 2], d.clone()).unwrap();
        assert!(
            (empirical_loss(&log, &q, &exact).unwrap() - expected_loss(&log, &q, &p).unwrap())
                .abs()
                < 1e-15
        );

        let holed = dist(&[0.0, 0.5, 0.5]);
        let hit = EmpiricalDistribution::from_counts(vec![1, 0, 3], d).unwrap();
        assert_eq!(empirical_loss(&log, &holed, &hit).unwrap(), f64::INFINITY);
    }

    #[test]
    fn concavity_metadata_holds() {
        let mut losses = builtin_catalog();
        losses.push(LocalLoss::loglog_scaled());
        losses.push("powlog:0.25".parse().unwrap());
        for loss in &losses {
            let r = check_left_strong_concavity(loss, &default_grid(loss)).unwrap();
            assert!(r.max_slack <= GRID_TOLERANCE, "{loss}: {r:?}");
        }
    }

    #[test]
    fn log_rate_is_tight_and_sqlog_is_loose() {
        let log = LocalLoss::log();
        let r = check_left_strong_concavity(&log, &log_grid(1.0, 1e9, 50)).unwrap();
        assert!(r.max_slack.abs() < 1e-15);
        let sq: LocalLoss = "sqlog".parse().unwrap();
        for z in [1.5, 10.0, 1e4] {
            let slack = -(sq.f2(z) + sq.rate_c(z) / (z * z));
            assert!((slack - 2.0 * z.ln() / (z * z)).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_outside_domain_rejected() {
        let err = check_left_strong_concavity(&LocalLoss::loglog(), &[1.5]).unwrap_err();
        assert!(matches!(err, Error::ParameterOutOfRange(_)));
    }

    #[test]
    fn powlog_convexity_in_q_starts_late() {
        // q -> (ln 1/q)^p is convex only for ln(1/q) >= 1 - p
        let l: LocalLoss = "powlog:0.5".parse().unwrap();
        let z = 1.2;
        assert!(z < l.inverse_convex_from());
        assert!(z * l.f2(z) + 2.0 * l.f1(z) < 0.0);
    }

    #[test]
    fn sqlog_growth_constant_is_needed() {
        let sq: LocalLoss = "sqlog".parse().unwrap();
        // c = 1 fails at z = 1; the envelope maximum 16/e sits at z = e²
        assert!(sq.f(1.0) > 1.0);
        let z = std::f64::consts::E.powi(2);
        assert!((sq.f(z) / z.sqrt() - 16.0 / std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn jensen_gap_example() {
        let p = dist(&[0.1, 0.3, 0.6]);
        let log = LocalLoss::log();
        let bound = jensen_gap_lower_bound(&p, &[0, 1], rate_b(&log)).unwrap();
        assert!((bound - 0.0078125).abs() < 1e-15);
        let gap = conditional_jensen_gap(&log, &p, &[0, 1]).unwrap();
        let expected = 5f64.ln() - (0.25 * 10f64.ln() + 0.75 * (10.0f64 / 3.0).ln());
        assert!((gap - expected).abs() < 1e-12);
        assert!((gap - 0.1308).abs() < 1e-4);
        assert!(gap >= bound);

        let u = Distribution::uniform(4).unwrap();
        assert_eq!(
            jensen_gap_lower_bound(&u, &[0, 2], rate_b(&log)).unwrap(),
            0.0
        );
        assert!(matches!(
            jensen_gap_lower_bound(&dist(&[0.0, 1.0]), &[0], rate_b(&log)),
            Err(Error::ZeroMassBucket)
        ));
    }

    #[test]
    fn ln_f_matches_direct_evaluation() {
        for loss in builtin_catalog().iter().filter(|l| l.nonnegative()) {
            for z in [5.0f64, 100.0, 1e8] {
                let direct = loss.f(z).ln();
                let via = loss.ln_f_from_ln_z(z.ln()).unwrap();
                assert!((direct - via).abs() < 1e-12, "{loss} at {z}");
            }
        }
        let lin: LocalLoss = "linear".parse().unwrap();
        assert!(matches!(
            lin.ln_f_from_ln_z(3.0),
            Err(Error::NegativeLoss(_))
        ));
    }
}
