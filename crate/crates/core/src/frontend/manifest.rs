//! Line-delimited utterance lists:
//!
//! ```text
//! # audio<TAB>keyword|NEGATIVE<TAB>labels|-
//! train/pos_00000.wav  volume_up  train/pos_00000.lab
//! train/neg_00000.wav  NEGATIVE  train/neg_00000.lab
//! ```
//!
//! Relative paths resolve against the manifest's directory. Blank lines and
//! lines starting with `#` are ignored. Label files hold space-separated
//! class ids, one per frame.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::wav_duration_secs;
use crate::error::{Error, Result};
use crate::vocab::N_CLASSES;

pub const NEGATIVE: &str = "NEGATIVE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Audio path as written in the manifest; doubles as the utterance id.
    pub audio: PathBuf,
    /// Keyword name, `None` for negatives.
    pub keyword: Option<String>,
    pub labels: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn id(&self) -> String {
        self.audio.display().to_string()
    }

    pub fn is_positive(&self) -> bool {
        self.keyword.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Self {
        Manifest {
            base_dir: base_dir.into(),
            entries,
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[0].is_empty() {
                return Err(Error::format(
                    "manifest",
                    format!("line {}: expected 3 tab-separated columns", n + 1),
                ));
            }
            entries.push(ManifestEntry {
                audio: PathBuf::from(cols[0]),
                keyword: (cols[1] != NEGATIVE).then(|| cols[1].to_string()),
                labels: (cols[2] != "-").then(|| PathBuf::from(cols[2])),
            });
        }
        Ok(Manifest::new(base_dir, entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# audio\tkeyword\tlabels\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                e.audio.display(),
                e.keyword.as_deref().unwrap_or(NEGATIVE),
                e.labels.as_ref().map_or("-".to_string(), |p| p.display().to_string())
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn positives(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.is_positive())
    }

    pub fn negatives(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| !e.is_positive())
    }

    /// Subset with the same base directory.
    pub fn filtered(&self, keep: impl Fn(&ManifestEntry) -> bool) -> Manifest {
        Manifest::new(
            self.base_dir.clone(),
            self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        )
    }

    /// Total duration of the negative utterances in hours, from WAV headers.
    pub fn negative_hours(&self) -> Result<f64> {
        let mut secs = 0.0;
        for e in self.negatives() {
            secs += wav_duration_secs(&self.resolve(&e.audio))?;
        }
        Ok(secs / 3600.0)
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .map(|tok| match tok.parse::<usize>() {
            Ok(c) if c < N_CLASSES => Ok(c),
            _ => Err(Error::Data {
                utterance: path.display().to_string(),
                msg: format!("invalid class id `{tok}`"),
            }),
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let text = labels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let m = Manifest::new(
            "/data",
            vec![
                ManifestEntry {
                    audio: "a/x.wav".into(),
                    keyword: Some("volume_up".into()),
                    labels: Some("a/x.lab".into()),
                },
                ManifestEntry {
                    audio: "/abs/y.wav".into(),
                    keyword: None,
                    labels: None,
                },
            ],
        );
        let back = Manifest::parse(&m.to_text(), "/data").unwrap();
        assert_eq!(back, m);
        assert_eq!(back.resolve(&back.entries[0].audio), PathBuf::from("/data/a/x.wav"));
        assert_eq!(back.resolve(&back.entries[1].audio), PathBuf::from("/abs/y.wav"));
        assert_eq!(back.positives().count(), 1);
    }

    #[test]
    fn malformed_lines() {
        assert!(Manifest::parse("a.wav\tNEGATIVE\n", ".").is_err());
        assert!(Manifest::parse("\n# c\n", ".").unwrap().entries.is_empty());
    }

    #[test]
    fn labels_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.lab");
        write_labels(&p, &[0, 0, 1, 12, 3]).unwrap();
        assert_eq!(read_labels(&p).unwrap(), vec![0, 0, 1, 12, 3]);
        std::fs::write(&p, "0 13").unwrap();
        assert!(matches!(read_labels(&p), Err(Error::Data { .. })));
    }
}
