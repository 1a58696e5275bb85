//! Reading and writing distributions as JSON or TSV.
//!
//! JSON: `{"labels": [...], "probs": [...]}` with `labels` optional.
//! TSV: one `label<TAB>probability` per line; blank lines and `#` comments skipped.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{validate_distribution, Distribution, Domain};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct DistributionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    probs: Vec<f64>,
}

pub fn parse_json(text: &str) -> Result<Distribution> {
    let file: DistributionFile = serde_json::from_str(text)?;
    let domain = match file.labels {
        Some(labels) => {
            if labels.len() != file.probs.len() {
                return Err(Error::LabelCount {
                    expected: file.probs.len(),
                    got: labels.len(),
                });
            }
            Domain::labelled(labels)?
        }
        None => Domain::new(file.probs.len())?,
    };
    validate_distribution(file.probs, domain)
}

pub fn parse_tsv(text: &str) -> Result<Distribution> {
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (label, value) = line.split_once('\t').ok_or_else(|| Error::BadLine {
            line: i + 1,
            reason: "expected label<TAB>probability".into(),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::BadLine {
            line: i + 1,
            reason: format!("cannot parse {:?} as a number", value.trim()),
        })?;
        labels.push(label.to_string());
        probs.push(value);
    }
    let domain = Domain::labelled(labels)?;
    validate_distribution(probs, domain)
}

/// Reads a distribution, choosing the format by extension (`.json` or anything else as TSV).
pub fn read_distribution(path: &Path) -> Result<Distribution> {
    let text = fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json || text.trim_start().starts_with('{') {
        parse_json(&text)
    } else {
        parse_tsv(&text)
    }
}

pub fn to_json(p: &Distribution) -> Result<String> {
    let file = DistributionFile {
        labels: p.domain().labels().map(<[String]>::to_vec),
        probs: p.probs().to_vec(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn to_tsv(p: &Distribution) -> String {
    let mut out = String::new();
    for (x, v) in p.probs().iter().enumerate() {
        out.push_str(&format!("{}\t{}\n", p.domain().label(x), v));
    }
    out
}

pub fn write_distribution(p: &Distribution, path: &Path) -> Result<()> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let text = if is_json { to_json(p)? } else { to_tsv(p) };
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let p = parse_json(r#"{"labels":["a","b"],"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(p.domain().label(1), "b");
        let back = parse_json(&to_json(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let q = parse_json(r#"{"probs":[0.5,0.5]}"#).unwrap();
        assert!(q.domain().labels().is_none());
    }

    #[test]
    fn json_label_count_checked() {
        assert!(matches!(
            parse_json(r#"{"labels":["a"],"probs":[0.5,0.5]}"#),
            Err(Error::LabelCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn tsv_parsing() {
        let p = parse_tsv("# header\nx\t0.4\n\ny\t0.6\n").unwrap();
        assert_eq!(p.probs(), &[0.4, 0.6]);
        assert!(matches!(
            parse_tsv("x 0.4\n"),
            Err(Error::BadLine { line: 1, .. })
        ));
        assert!(matches!(
            parse_tsv("x\t0.4\ny\t0.4\n"),
            Err(Error::SumOutOfTolerance { .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = Distribution::new(vec![0.1, 0.9]).unwrap();
        for name in ["p.json", "p.tsv"] {
            let path = dir.path().join(name);
            write_distribution(&p, &path).unwrap();
            assert_eq!(read_distribution(&path).unwrap().probs(), p.probs());
        }
    }
}
