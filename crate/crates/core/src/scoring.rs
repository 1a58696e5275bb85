//! Proper losses generated by concave functions, and their Bregman divergences.
//!
//! A concave `H` with supergradient `dH` generates
//! `ℓ(q, x) = H(q) + dH(q)·(δ_x − q)`, whose expected-loss gap is the Bregman
//! divergence `D_{−H}(p, q) = H(q) + dH(q)·(p − q) − H(p)`.
//!
//! Gradients blow up at zero coordinates for `shannon`, `invroot` and `power`;
//! there the loss is `+∞` and products `0·∞` count as `0`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distribution::{l2_squared, Distribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcaveGenerator {
    /// `H(q) = Σ q_x ln(1/q_x)`
    Shannon,
    /// `H(q) = ½ − ½‖q‖₂²`
    Quadratic,
    /// `H(q) = 2 Σ √q_x`
    InvRoot,
    /// `H(q) = Σ q_x^{1−α} / (α(1−α))`, `α ∈ (0, 1)`
    Power(f64),
}

impl ConcaveGenerator {
    pub fn power(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(ConcaveGenerator::Power(alpha))
        } else {
            Err(Error::ParameterOutOfRange(format!(
                "power exponent {alpha} not in (0, 1)"
            )))
        }
    }

    pub fn all_builtin() -> Vec<ConcaveGenerator> {
        vec![
            ConcaveGenerator::Shannon,
            ConcaveGenerator::Quadratic,
            ConcaveGenerator::InvRoot,
            ConcaveGenerator::Power(0.5),
        ]
    }

    /// Per-coordinate term `h(z)` of the separable form (quadratic: `−z²/2`, plus ½ overall).
    fn h(&self, z: f64) -> f64 {
        match *self {
            ConcaveGenerator::Shannon => {
                if z == 0.0 {
                    0.0
                } else {
                    -z * z.ln()
                }
            }
            ConcaveGenerator::Quadratic => -0.5 * z * z,
            ConcaveGenerator::InvRoot => 2.0 * z.sqrt(),
            ConcaveGenerator::Power(a) => z.powf(1.0 - a) / (a * (1.0 - a)),
        }
    }

    fn dh(&self, z: f64) -> f64 {
        match *self {
            ConcaveGenerator::Shannon => -z.ln() - 1.0,
            ConcaveGenerator::Quadratic => -z,
            ConcaveGenerator::InvRoot => 1.0 / z.sqrt(),
            ConcaveGenerator::Power(a) => z.powf(-a) / a,
        }
    }

    pub fn value(&self, q: &Distribution) -> f64 {
        let s: f64 = q.probs().iter().map(|&z| self.h(z)).sum();
        match self {
            ConcaveGenerator::Quadratic => 0.5 + s,
            _ => s,
        }
    }

    /// The supergradient `dH(q)`; entries may be `+∞` at zero coordinates.
    pub fn gradient(&self, q: &Distribution) -> Vec<f64> {
        q.probs().iter().map(|&z| self.dh(z)).collect()
    }
}

impl fmt::Display for ConcaveGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveGenerator::Shannon => write!(f, "shannon"),
            ConcaveGenerator::Quadratic => write!(f, "quad"),
            ConcaveGenerator::InvRoot => write!(f, "invroot"),
            ConcaveGenerator::Power(a) => write!(f, "power:{a}"),
        }
    }
}

impl FromStr for ConcaveGenerator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shannon" => Ok(ConcaveGenerator::Shannon),
            "quad" => Ok(ConcaveGenerator::Quadratic),
            "invroot" => Ok(ConcaveGenerator::InvRoot),
            other => match other.strip_prefix("power:") {
                Some(a) => {
                    let a: f64 = a
                        .parse()
                        .map_err(|_| Error::UnknownGenerator(s.to_string()))?;
                    ConcaveGenerator::power(a)
                }
                None => Err(Error::UnknownGenerator(s.to_string())),
            },
        }
    }
}

/// `Σ_y w_y g_y` with `0·∞ = 0`.
fn dot_skip_zero(w: &[f64], g: &[f64]) -> f64 {
    w.iter()
        .zip(g)
        .filter(|(&wy, _)| wy != 0.0)
        .map(|(wy, gy)| wy * gy)
        .sum()
}

/// `H(q) + dH(q)·(δ_x − q)`.
pub fn loss_from_generator(g: &ConcaveGenerator, q: &Distribution, x: usize) -> f64 {
    let grad = g.gradient(q);
    if grad[x].is_infinite() {
        return f64::INFINITY;
    }
    g.value(q) + grad[x] - dot_skip_zero(q.probs(), &grad)
}

/// Expected generated loss `Σ_x p_x ℓ(q, x)`.
pub fn expected_generated_loss(
    g: &ConcaveGenerator,
    q: &Distribution,
    p: &Distribution,
) -> Result<f64> {
    q.ensure_same_domain(p)?;
    let mut total = 0.0;
    for x in 0..p.len() {
        let px = p.get(x);
        if px != 0.0 {
            total += px * loss_from_generator(g, q, x);
        }
    }
    Ok(total)
}

/// `D_{−H}(p, q) = H(q) + dH(q)·(p − q) − H(p)`.
pub fn divergence(g: &ConcaveGenerator, p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    let grad = g.gradient(q);
    let lin = dot_skip_zero(p.probs(), &grad) - dot_skip_zero(q.probs(), &grad);
    if lin.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(g.value(q) + lin - g.value(p))
}

/// The divergence from its closed form, computed without the generator.
pub fn direct_divergence(g: &ConcaveGenerator, p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    let pairs = p.probs().iter().zip(q.probs());
    Ok(match *g {
        ConcaveGenerator::Shannon => crate::distribution::kl_divergence(p, q)?,
        ConcaveGenerator::Quadratic => 0.5 * l2_squared(p, q)?,
        ConcaveGenerator::InvRoot => pairs
            .map(|(&a, &b)| {
                let d = a.sqrt() - b.sqrt();
                if d == 0.0 {
                    0.0
                } else {
                    d * d / b.sqrt()
                }
            })
            .sum(),
        ConcaveGenerator::Power(a) => {
            let k = 1.0 / (a * (1.0 - a));
            pairs
                .map(|(&x, &y)| {
                    if x == y {
                        0.0
                    } else {
                        k * (y.powf(1.0 - a) - x.powf(1.0 - a)) + (x - y) * y.powf(-a) / a
                    }
                })
                .sum()
        }
    })
}

/// `Σ_x (√p_x − √q_x)²`, twice the squared Hellinger distance.
pub fn hellinger_sq_sum(p: &Distribution, q: &Distribution) -> Result<f64> {
    p.ensure_same_domain(q)?;
    Ok(p.probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum())
}

/// `1/Σ_x f(q_x)`, the ℓ₁ strong-concavity rate a separable generator with
/// `−h″ = 1/f` has at `q`.
pub fn separable_rate(f: impl Fn(f64) -> f64, q: &Distribution) -> f64 {
    1.0 / q.probs().iter().map(|&z| f(z)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L2Counterexample {
    pub n: usize,
    pub l1_dist: f64,
    pub l2_gap: f64,
}

/// `p` uniform on the first half, `q` uniform on the second half: the
/// quadratic-loss gap is `2/N` while the ℓ₁ distance stays `2`.
pub fn l2_counterexample(n: usize) -> Result<L2Counterexample> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::OddDomain(n));
    }
    let half = n / 2;
    let w = 1.0 / half as f64;
    let p = Distribution::new((0..n).map(|x| if x < half { w } else { 0.0 }).collect())?;
    let q = Distribution::new((0..n).map(|x| if x < half { 0.0 } else { w }).collect())?;
    let l1_dist = crate::distribution::l1_distance(&p, &q)?;
    let l2_gap = divergence(&ConcaveGenerator::Quadratic, &p, &q)?;
    Ok(L2Counterexample { n, l1_dist, l2_gap })
}
