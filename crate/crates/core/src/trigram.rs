//! Character-trigram word models: plain relative-frequency training against
//! head-reweighted training, scored with local losses over a word list.
//!
//! Words are lowercased, accent-stripped (NFD then drop combining marks) and
//! restricted to `a`–`z`. A word `w` is generated as `^ ^ w $`: each
//! character, then the end marker, is drawn from `P(c | c₋₂ c₋₁)`.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::losses::LocalLoss;
use crate::sampling::rng_from_seed;

const LETTERS: usize = 26;
/// Context symbols: start marker plus letters.
const CTX: usize = LETTERS + 1;
/// Output symbols: letters plus end marker.
const OUT: usize = LETTERS + 1;
const START: usize = 0;
const END: usize = LETTERS;

pub const ENGLISH_TSV: &str = include_str!("../data/english.tsv");
pub const FOREIGN_TSV: &str = include_str!("../data/foreign.tsv");
/// Foreign mass used for the bundled experiment.
pub const BUNDLED_NOISE_MASS: f64 = 0.12;

/// Lowercase, strip accents, keep only `a`–`z`.
pub fn normalize_word(raw: &str) -> String {
    raw.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .filter(char::is_ascii_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Base,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusEntry {
    pub word: String,
    pub weight: f64,
    pub origin: Origin,
}

/// Unique normalized words with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    /// Normalizes words, keeps the first of any duplicates, rescales weights to sum to one.
    pub fn from_entries(raw: Vec<(String, f64)>, origin: Origin) -> Result<Self> {
        Self::build(raw.into_iter().map(|(w, f)| (w, f, origin)).collect())
    }

    fn build(raw: Vec<(String, f64, Origin)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(raw.len());
        for (w, f, origin) in raw {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Parse(format!(
                    "weight for {w:?} must be positive, got {f}"
                )));
            }
            let word = normalize_word(&w);
            if word.is_empty() {
                log::warn!("dropping {w:?}: nothing left after normalization");
                continue;
            }
            if !seen.insert(word.clone()) {
                log::warn!("dropping duplicate {w:?} (normalizes to {word:?})");
                continue;
            }
            entries.push(CorpusEntry {
                word,
                weight: f,
                origin,
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        for e in &mut entries {
            e.weight /= total;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn mass_of(&self, origin: Origin) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.origin == origin)
            .map(|e| e.weight)
            .sum()
    }
}

/// Parses `word<TAB>frequency` lines; blank lines and `#` comments are skipped.
pub fn parse_corpus(text: &str, origin: Origin) -> Result<Corpus> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::BadLine {
            line: i + 1,
            reason: reason.into(),
        };
        let (w, f) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected word<TAB>frequency"))?;
        let f: f64 = f
            .trim()
            .parse()
            .map_err(|_| bad("frequency is not a number"))?;
        if !(f.is_finite() && f > 0.0) {
            return Err(bad("frequency must be positive"));
        }
        raw.push((w.trim().to_string(), f));
    }
    Corpus::from_entries(raw, origin)
}

pub fn ingest(path: &Path, origin: Origin) -> Result<Corpus> {
    parse_corpus(&std::fs::read_to_string(path)?, origin)
}

/// Base words rescaled to `1 − mass`, noise words (minus any already in
/// `base`) sharing `mass` uniformly.
pub fn mix_noise(base: &Corpus, noise: &Corpus, mass: f64) -> Result<Corpus> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "noise mass {mass} not in (0,1)"
        )));
    }
    let known: HashSet<&str> = base.entries.iter().map(|e| e.word.as_str()).collect();
    let extra: Vec<&CorpusEntry> = noise
        .entries
        .iter()
        .filter(|e| {
            let clash = known.contains(e.word.as_str());
            if clash {
                log::warn!(
                    "noise word {:?} already in base list, keeping base weight",
                    e.word
                );
            }
            !clash
        })
        .collect();
    if extra.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let each = mass / extra.len() as f64;
    let mut entries: Vec<CorpusEntry> = base
        .entries
        .iter()
        .map(|e| CorpusEntry {
            weight: e.weight * (1.0 - mass),
            ..e.clone()
        })
        .collect();
    entries.extend(extra.into_iter().map(|e| CorpusEntry {
        word: e.word.clone(),
        weight: each,
        origin: Origin::Noise,
    }));
    Ok(Corpus { entries })
}

/// The bundled English list with 12% uniform French/German noise.
pub fn bundled_corpus() -> Result<Corpus> {
    let base = parse_corpus(ENGLISH_TSV, Origin::Base)?;
    let noise = parse_corpus(FOREIGN_TSV, Origin::Noise)?;
    mix_noise(&base, &noise, BUNDLED_NOISE_MASS)
}

fn symbols(word: &str) -> Result<Vec<usize>> {
    word.bytes()
        .map(|b| {
            if b.is_ascii_lowercase() {
                Ok((b - b'a') as usize)
            } else {
                Err(Error::AlphabetMismatch(format!(
                    "{word:?} has characters outside a-z"
                )))
            }
        })
        .collect()
}

/// Calls `visit(context, output)` for every transition in `^ ^ word $`.
fn transitions(syms: &[usize], mut visit: impl FnMut(usize, usize)) {
    let (mut a, mut b) = (START, START);
    for &s in syms.iter().chain(std::iter::once(&END)) {
        visit(a * CTX + b, s);
        a = b;
        // context symbols shift letters up by one to make room for the start marker
        b = s + 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigramModel {
    /// `CTX² × OUT` conditionals; rows for contexts never seen with zero smoothing stay zero.
    table: Vec<f64>,
    pub alpha: f64,
    pub smoothing: f64,
}

/// Trains on `p̄ ∝ p^α`; `alpha = 1` gives the relative-frequency model.
pub fn train(corpus: &Corpus, alpha: f64, smoothing: f64) -> Result<TrigramModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "smoothing = {smoothing} must be >= 0"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let weights: Vec<f64> = corpus
        .entries
        .iter()
        .map(|e| e.weight.powf(alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut counts = vec![0.0; CTX * CTX * OUT];
    for (e, w) in corpus.entries.iter().zip(&weights) {
        let w = w / total;
        transitions(&symbols(&e.word)?, |ctx, s| counts[ctx * OUT + s] += w);
    }
    for row in counts.chunks_mut(OUT) {
        row.iter_mut().for_each(|c| *c += smoothing);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|c| *c /= s);
        }
    }
    Ok(TrigramModel {
        table: counts,
        alpha,
        smoothing,
    })
}

impl TrigramModel {
    pub fn conditional(&self, context: usize, symbol: usize) -> f64 {
        self.table[context * OUT + symbol]
    }

    /// Row sums for contexts that carry any mass.
    pub fn row_sums(&self) -> Vec<f64> {
        self.table
            .chunks(OUT)
            .map(|r| r.iter().sum::<f64>())
            .filter(|&s| s > 0.0)
            .collect()
    }

    /// Probability of generating exactly `word`.
    pub fn q(&self, word: &str) -> Result<f64> {
        let syms = symbols(word)?;
        let mut ln = 0.0;
        transitions(&syms, |ctx, s| ln += self.conditional(ctx, s).ln());
        Ok(ln.exp())
    }

    /// `q` over the corpus words, in corpus order.
    pub fn word_probs(&self, corpus: &Corpus) -> Result<Vec<f64>> {
        corpus.entries.par_iter().map(|e| self.q(&e.word)).collect()
    }

    /// Walks the conditionals until the end marker or `max_len` letters.
    pub fn sample_words(&self, k: usize, max_len: usize, seed: u64) -> Vec<String> {
        let mut rng = rng_from_seed(seed);
        (0..k).map(|_| self.sample_one(max_len, &mut rng)).collect()
    }

    fn sample_one<R: Rng>(&self, max_len: usize, rng: &mut R) -> String {
        let (mut a, mut b) = (START, START);
        let mut out = String::new();
        while out.len() < max_len {
            let row = &self.table[(a * CTX + b) * OUT..(a * CTX + b + 1) * OUT];
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = END;
            for (s, &v) in row.iter().enumerate() {
                acc += v;
                if u < acc {
                    pick = s;
                    break;
                }
            }
            if pick == END {
                break;
            }
            out.push((b'a' + pick as u8) as char);
            a = b;
            b = pick + 1;
        }
        out
    }
}

/// `E_{word∼p} f(1/q(word))`; a zero `q` on a word with `p > 0` gives `+∞`.
pub fn expected_word_loss(loss: &LocalLoss, p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&px, _)| px > 0.0)
        .map(|(&px, &qx)| px * loss.value_at(qx))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossValue {
    pub loss: String,
    pub value: f64,
}

pub fn evaluate(
    model: &TrigramModel,
    corpus: &Corpus,
    losses: &[LocalLoss],
) -> Result<Vec<LossValue>> {
    let q = model.word_probs(corpus)?;
    Ok(score(&corpus.probs(), &q, losses))
}

fn score(p: &[f64], q: &[f64], losses: &[LocalLoss]) -> Vec<LossValue> {
    losses
        .iter()
        .map(|l| LossValue {
            loss: l.name(),
            value: expected_word_loss(l, p, q),
        })
        .collect()
}

/// Total model probability on the corpus's base-language words.
pub fn head_mass(model: &TrigramModel, corpus: &Corpus) -> Result<f64> {
    let q = model.word_probs(corpus)?;
    Ok(corpus
        .entries
        .iter()
        .zip(&q)
        .filter(|(e, _)| e.origin == Origin::Base)
        .map(|(_, v)| v)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rank: usize,
    pub p_cum: f64,
    pub q_cum: f64,
}

/// Cumulative `p` and `q` mass with words ranked by decreasing `p`.
pub fn cumulative_curve(corpus: &Corpus, q: &[f64]) -> Vec<CurvePoint> {
    let p = corpus.probs();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let (mut pc, mut qc) = (0.0, 0.0);
    order
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            pc += p[i];
            qc += q[i];
            CurvePoint {
                rank: r + 1,
                p_cum: pc,
                q_cum: qc,
            }
        })
        .collect()
}

/// One row of the comparison table; `alpha = None` is the target distribution itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigramRow {
    pub label: String,
    pub alpha: Option<f64>,
    pub losses: Vec<LossValue>,
    pub head_mass: f64,
    pub total_mass: f64,
}

impl TrigramRow {
    pub fn loss(&self, name: &str) -> Option<f64> {
        self.losses.iter().find(|l| l.loss == name).map(|l| l.value)
    }
}

/// The target row followed by one trained model per `alpha`.
pub fn compare(
    corpus: &Corpus,
    alphas: &[f64],
    losses: &[LocalLoss],
    smoothing: f64,
) -> Result<Vec<TrigramRow>> {
    let p = corpus.probs();
    let mut rows = vec![TrigramRow {
        label: "p".into(),
        alpha: None,
        losses: score(&p, &p, losses),
        head_mass: corpus.mass_of(Origin::Base),
        total_mass: p.iter().sum(),
    }];
    for &alpha in alphas {
        let model = train(corpus, alpha, smoothing)?;
        let q = model.word_probs(corpus)?;
        rows.push(TrigramRow {
            label: format!("q(alpha={alpha})"),
            alpha: Some(alpha),
            losses: score(&p, &q, losses),
            head_mass: head_mass(&model, corpus)?,
            total_mass: q.iter().sum(),
        });
    }
    Ok(rows)
}
