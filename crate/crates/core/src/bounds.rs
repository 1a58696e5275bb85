//! Closed-form strong-properness, concentration and sample-complexity bounds.
//!
//! `β` grows like `N⁸/δ`, so every `β`-dependent quantity is carried as
//! `ln β` and `f(β)` is composed analytically from it through
//! [`LocalLoss::ln_f_from_ln_z`]. Sample counts are reported as `ln m`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::LocalLoss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    StrongProper,
    Concentration,
    SampleProper,
    ApproxStrongProper,
    ApproxConcentration,
    ApproxSampleProper,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundKind::StrongProper => "strong-proper",
            BoundKind::Concentration => "concentration",
            BoundKind::SampleProper => "sample-proper",
            BoundKind::ApproxStrongProper => "approx-strong-proper",
            BoundKind::ApproxConcentration => "approx-concentration",
            BoundKind::ApproxSampleProper => "approx-sample-proper",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub loss: String,
    pub n: f64,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub c1: Option<f64>,
    pub ln_beta: Option<f64>,
    pub ln_m: Option<f64>,
    pub gap_lower_bound: Option<f64>,
    /// Required `m` exceeds `N`, so the small-sample regime `m ≤ N` no longer holds.
    pub vacuous: bool,
}

/// Header matching [`BoundReport::csv_record`].
pub const CSV_HEADER: [&str; 12] = [
    "kind", "loss", "N", "eps", "gamma", "delta", "alpha1", "alpha2", "ln_beta", "ln_m", "gap",
    "vacuous",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BoundReport {
    fn new(kind: BoundKind, loss: &LocalLoss, n: f64) -> Self {
        Self {
            kind,
            loss: loss.name(),
            n,
            eps: None,
            gamma: None,
            delta: None,
            alpha1: None,
            alpha2: None,
            c1: None,
            ln_beta: None,
            ln_m: None,
            gap_lower_bound: None,
            vacuous: false,
        }
    }

    /// `m = exp(ln m)`; may be `+∞` in floating point.
    pub fn m(&self) -> Option<f64> {
        self.ln_m.map(f64::exp)
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.kind.to_string(),
            self.loss.clone(),
            self.n.to_string(),
            opt(self.eps),
            opt(self.gamma),
            opt(self.delta),
            opt(self.alpha1),
            opt(self.alpha2),
            opt(self.ln_beta),
            opt(self.ln_m),
            opt(self.gap_lower_bound),
            self.vacuous.to_string(),
        ]
    }
}

fn check_n(n: f64) -> Result<()> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("N = {n} must be >= 1")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 2.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "eps = {eps} not in (0, 2]"
        )))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "delta = {delta} not in (0, 1)"
        )))
    }
}

fn check_c1(c1: f64) -> Result<()> {
    if c1 > 0.0 && c1.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!(
            "c1 = {c1} must be positive"
        )))
    }
}

/// Concentration bounds need `f ≥ 0` and `f(z) ≤ c√z`.
fn check_concentration_loss(loss: &LocalLoss) -> Result<f64> {
    if !loss.nonnegative() {
        return Err(Error::NegativeLoss(loss.name()));
    }
    let (c, r) = loss.growth();
    if r > 0.5 {
        return Err(Error::GrowthEnvelopeTooFast {
            loss: loss.name(),
            r,
        });
    }
    Ok(c)
}

/// `ln β = ln K + 8 ln N − ln δ − min(0, 2 ln(γ/c))`.
fn ln_beta(ln_k: f64, n: f64, delta: f64, gamma: f64, c: f64) -> f64 {
    ln_k + 8.0 * n.ln() - delta.ln() - (2.0 * (gamma / c).ln()).min(0.0)
}

/// `ln m = ln c₁ + 2 ln f(β) + ln ln(1/δ) − 2 ln(denominator)`.
fn ln_m(loss: &LocalLoss, ln_beta: f64, c1: f64, delta: f64, denom: f64) -> Result<f64> {
    Ok(c1.ln() + 2.0 * loss.ln_f_from_ln_z(ln_beta)? + (1.0 / delta).ln().ln() - 2.0 * denom.ln())
}

/// `C(4N/ε)·ε²/128`.
pub fn strong_properness_gap_bound(loss: &LocalLoss, n: f64, eps: f64) -> Result<f64> {
    check_n(n)?;
    check_eps(eps)?;
    Ok(loss.rate(4.0 * n / eps)? * eps * eps / 128.0)
}

pub fn strong_properness_report(loss: &LocalLoss, n: f64, eps: f64) -> Result<BoundReport> {
    let mut r = BoundReport::new(BoundKind::StrongProper, loss, n);
    r.eps = Some(eps);
    r.gap_lower_bound = Some(strong_properness_gap_bound(loss, n, eps)?);
    Ok(r)
}

fn concentration_with(
    kind: BoundKind,
    ln_k: f64,
    loss: &LocalLoss,
    gamma: f64,
    delta: f64,
    n: f64,
    c1: f64,
) -> Result<BoundReport> {
    check_n(n)?;
    check_delta(delta)?;
    check_c1(c1)?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "gamma = {gamma} not in (0, 1]"
        )));
    }
    let c = check_concentration_loss(loss)?;
    let lb = ln_beta(ln_k, n, delta, gamma, c);
    let lm = ln_m(loss, lb, c1, delta, gamma)?;
    let mut r = BoundReport::new(kind, loss, n);
    r.gamma = Some(gamma);
    r.delta = Some(delta);
    r.c1 = Some(c1);
    r.ln_beta = Some(lb);
    r.ln_m = Some(lm);
    r.vacuous = lm > n.ln();
    Ok(r)
}

/// Samples sufficient for `|ℓ(q;p̂) − ℓ(q;p)| ≤ γ` w.p. `1 − δ` over calibrated `q`.
pub fn concentration_bound(
    loss: &LocalLoss,
    gamma: f64,
    delta: f64,
    n: f64,
    c1: f64,
) -> Result<BoundReport> {
    concentration_with(
        BoundKind::Concentration,
        16f64.ln(),
        loss,
        gamma,
        delta,
        n,
        c1,
    )
}

/// Samples sufficient for `ℓ(q;p̂) > ℓ(p;p̂)` w.p. `1 − δ` when `‖p − q‖₁ = ε`.
///
/// The strong-properness gap is fixed first and then feeds `β`.
pub fn sample_properness_bound(
    loss: &LocalLoss,
    eps: f64,
    delta: f64,
    n: f64,
    c1: f64,
) -> Result<BoundReport> {
    check_n(n)?;
    check_eps(eps)?;
    check_delta(delta)?;
    check_c1(c1)?;
    let c = check_concentration_loss(loss)?;
    let rate = loss.rate(4.0 * n / eps)?;
    let gap = rate * eps * eps / 128.0;
    let lb = ln_beta(288f64.ln(), n, delta, gap, c);
    let lm = ln_m(loss, lb, c1, delta, rate * eps * eps)?;
    let mut r = BoundReport::new(BoundKind::SampleProper, loss, n);
    r.eps = Some(eps);
    r.delta = Some(delta);
    r.c1 = Some(c1);
    r.ln_beta = Some(lb);
    r.ln_m = Some(lm);
    r.gap_lower_bound = Some(gap);
    r.vacuous = lm > n.ln();
    Ok(r)
}

fn check_alphas(alpha1: f64, alpha2: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&alpha1) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha1 = {alpha1} not in [0, 1/2]"
        )));
    }
    if !(0.0..=1.0).contains(&alpha2) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha2 = {alpha2} not in [0, 1]"
        )));
    }
    Ok(())
}

/// `C(N/2α₂)/32·(ε − α₁ − 5α₂)₊² − 2α₁·D(N/2α₂) − 3α₂·f(N/3α₂)`.
///
/// The bracket is clamped at zero. `α₂ = 0` is only accepted together with
/// `α₁ = 0`, where the exact-calibration bound applies.
pub fn approx_strong_properness_gap(
    loss: &LocalLoss,
    n: f64,
    eps: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<f64> {
    check_n(n)?;
    check_eps(eps)?;
    check_alphas(alpha1, alpha2)?;
    if alpha2 == 0.0 {
        if alpha1 == 0.0 {
            return strong_properness_gap_bound(loss, n, eps);
        }
        return Err(Error::ParameterOutOfRange(
            "alpha2 = 0 requires alpha1 = 0".into(),
        ));
    }
    let z = n / (2.0 * alpha2);
    let inner = (eps - alpha1 - 5.0 * alpha2).max(0.0);
    Ok(loss.rate(z)? / 32.0 * inner * inner
        - 2.0 * alpha1 * loss.deriv_d(z)
        - 3.0 * alpha2 * loss.f(n / (3.0 * alpha2)))
}

pub fn approx_strong_properness_report(
    loss: &LocalLoss,
    n: f64,
    eps: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<BoundReport> {
    let mut r = BoundReport::new(BoundKind::ApproxStrongProper, loss, n);
    r.eps = Some(eps);
    r.alpha1 = Some(alpha1);
    r.alpha2 = Some(alpha2);
    r.gap_lower_bound = Some(approx_strong_properness_gap(loss, n, eps, alpha1, alpha2)?);
    Ok(r)
}

/// Concentration over approximately calibrated candidates (`α₁ ≤ ½`, any `α₂`).
pub fn approx_concentration_bound(
    loss: &LocalLoss,
    gamma: f64,
    delta: f64,
    n: f64,
    c1: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<BoundReport> {
    check_alphas(alpha1, alpha2)?;
    let mut r = concentration_with(
        BoundKind::ApproxConcentration,
        32f64.ln(),
        loss,
        gamma,
        delta,
        n,
        c1,
    )?;
    r.alpha1 = Some(alpha1);
    r.alpha2 = Some(alpha2);
    Ok(r)
}

/// Sample properness over approximately calibrated candidates.
///
/// The sample count uses `C(N/2α₂)` while `β` uses `C(2N/α₂)`, as stated.
/// Requires `0 < α₂` and `α₁, α₂ ≤ ε²/12`.
#[allow(clippy::too_many_arguments)]
pub fn approx_sample_properness_bound(
    loss: &LocalLoss,
    eps: f64,
    delta: f64,
    n: f64,
    c1: f64,
    alpha1: f64,
    alpha2: f64,
) -> Result<BoundReport> {
    check_n(n)?;
    check_eps(eps)?;
    check_delta(delta)?;
    check_c1(c1)?;
    check_alphas(alpha1, alpha2)?;
    let limit = eps * eps / 12.0;
    if alpha2 <= 0.0 || alpha1 > limit || alpha2 > limit {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < alpha2 and alpha1, alpha2 <= eps^2/12 = {limit}"
        )));
    }
    let c = check_concentration_loss(loss)?;
    let z_m = n / (2.0 * alpha2);
    let rate_m = loss.rate(z_m)?;
    let gamma_beta = loss.rate(2.0 * n / alpha2)? * eps * eps / 128.0;
    let lb = ln_beta(576f64.ln(), n, delta, gamma_beta, c);
    let lm = ln_m(loss, lb, c1, delta, rate_m * eps * eps)?;
    let gap = rate_m * eps * eps / 384.0
        - 2.0 * alpha1 * loss.deriv_d(z_m)
        - 3.0 * alpha2 * loss.f(n / (3.0 * alpha2));
    let mut r = BoundReport::new(BoundKind::ApproxSampleProper, loss, n);
    r.eps = Some(eps);
    r.delta = Some(delta);
    r.c1 = Some(c1);
    r.alpha1 = Some(alpha1);
    r.alpha2 = Some(alpha2);
    r.ln_beta = Some(lb);
    r.ln_m = Some(lm);
    r.gap_lower_bound = Some(gap);
    r.vacuous = lm > n.ln();
    Ok(r)
}

/// All three approximate-calibration reports for one parameter set.
#[allow(clippy::too_many_arguments)]
pub fn approx_bounds(
    loss: &LocalLoss,
    n: f64,
    eps: f64,
    alpha1: f64,
    alpha2: f64,
    gamma: f64,
    delta: f64,
    c1: f64,
) -> Result<Vec<BoundReport>> {
    Ok(vec![
        approx_strong_properness_report(loss, n, eps, alpha1, alpha2)?,
        approx_concentration_bound(loss, gamma, delta, n, c1, alpha1, alpha2)?,
        approx_sample_properness_bound(loss, eps, delta, n, c1, alpha1, alpha2)?,
    ])
}
