//! Text score and key files.
//!
//! Score file: optional `# config <hash>` line, then `utt_id score` with
//! six decimals. Key file: `utt_id key` with key one of `bonafide`,
//! `spoof`, `target`, `nontarget`.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    Bonafide,
    Spoof,
    Target,
    Nontarget,
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Key::Bonafide => "bonafide",
            Key::Spoof => "spoof",
            Key::Target => "target",
            Key::Nontarget => "nontarget",
        })
    }
}

impl FromStr for Key {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bonafide" => Ok(Key::Bonafide),
            "spoof" => Ok(Key::Spoof),
            "target" => Ok(Key::Target),
            "nontarget" => Ok(Key::Nontarget),
            other => Err(format!("unknown key {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub config_hash: Option<u64>,
    pub entries: Vec<(String, f64)>,
}

impl ScoreFile {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(h) = self.config_hash {
            let _ = writeln!(s, "# config {h:016x}");
        }
        for (id, score) in &self.entries {
            let _ = writeln!(s, "{id} {score:.6}");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "score",
            path: path.to_path_buf(),
            detail,
        };
        let mut config_hash = None;
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(h) = rest.trim().strip_prefix("config ") {
                    config_hash =
                        Some(u64::from_str_radix(h.trim(), 16).map_err(|e| bad(format!("line {}: {e}", n + 1)))?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(id), Some(score), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad(format!("line {}: expected \"utt_id score\"", n + 1)));
            };
            let score: f64 = score.parse().map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
            if !score.is_finite() {
                return Err(bad(format!("line {}: non-finite score", n + 1)));
            }
            entries.push((id.to_string(), score));
        }
        Ok(Self { config_hash, entries })
    }

    /// Splits scores by key into (positive, negative) lists. Positive is
    /// bona fide or target; unknown ids are an error.
    pub fn split(&self, keys: &HashMap<String, Key>, positive: Key, negative: Key) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (id, s) in &self.entries {
            match keys.get(id) {
                Some(k) if *k == positive => pos.push(*s),
                Some(k) if *k == negative => neg.push(*s),
                Some(_) => {}
                None => return Err(Error::data(format!("no key for trial {id}"))),
            }
        }
        Ok((pos, neg))
    }

    /// Scores whose key is `key`.
    pub fn select(&self, keys: &HashMap<String, Key>, key: Key) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|(id, _)| keys.get(id) == Some(&key))
            .map(|(_, s)| *s)
            .collect()
    }
}

pub fn write_scores(path: &Path, scores: &ScoreFile) -> Result<()> {
    std::fs::write(path, scores.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<ScoreFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScoreFile::parse(&text, path)
}

pub fn write_keys(path: &Path, keys: &[(String, Key)]) -> Result<()> {
    let mut s = String::new();
    for (id, k) in keys {
        let _ = writeln!(s, "{id} {k}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_keys(path: &Path) -> Result<HashMap<String, Key>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| "expected \"utt_id key\"".to_string())
            .and_then(|(id, k)| Ok((id.to_string(), k.trim().parse::<Key>()?)));
        let (id, key) = parsed.map_err(|detail| Error::Format {
            what: "key",
            path: path.to_path_buf(),
            detail: format!("line {}: {detail}", n + 1),
        })?;
        out.insert(id, key);
    }
    Ok(out)
}
