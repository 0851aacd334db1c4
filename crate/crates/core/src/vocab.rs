//! Frame classes and keyword definitions.

use crate::error::{Error, Result};

pub const SIL: usize = 0;
pub const FILLER: usize = 1;
pub const N_CLASSES: usize = 13;

/// Class names indexed by class id: SIL, FILLER, then the eleven subwords.
pub const CLASS_NAMES: [&str; N_CLASSES] = [
    "SIL", "FILLER", "take", "a", "pic", "ture", "vo", "lume", "up", "down", "play", "mu", "sic",
];

/// Per-class loss weights: SIL 1, FILLER 2, subwords 8.
pub fn default_class_weights() -> [f64; N_CLASSES] {
    let mut w = [8.0; N_CLASSES];
    w[SIL] = 1.0;
    w[FILLER] = 2.0;
    w
}

pub fn class_id(name: &str) -> Option<usize> {
    CLASS_NAMES.iter().position(|&n| n == name)
}

/// A keyword phrase as an ordered list of subword class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSpec {
    pub name: String,
    pub subword_ids: Vec<usize>,
}

impl KeywordSpec {
    pub fn new(name: impl Into<String>, subword_ids: Vec<usize>) -> Result<Self> {
        let name = name.into();
        if subword_ids.is_empty() {
            return Err(Error::contract(format!("keyword `{name}` has no subwords")));
        }
        if let Some(bad) = subword_ids.iter().find(|&&id| !(2..N_CLASSES).contains(&id)) {
            return Err(Error::contract(format!(
                "keyword `{name}`: class {bad} is not a subword (expected 2..=12)"
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::contract(format!("invalid keyword name `{name}`")));
        }
        Ok(KeywordSpec { name, subword_ids })
    }

    /// Builds a keyword from subword names, e.g. `["vo", "lume", "up"]`.
    pub fn from_subwords(name: impl Into<String>, subwords: &[&str]) -> Result<Self> {
        let ids = subwords
            .iter()
            .map(|s| class_id(s).ok_or_else(|| Error::contract(format!("unknown subword `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, ids)
    }
}

/// The four evaluation phrases.
pub fn default_keywords() -> Vec<KeywordSpec> {
    [
        ("take_a_picture", &["take", "a", "pic", "ture"][..]),
        ("volume_up", &["vo", "lume", "up"]),
        ("volume_down", &["vo", "lume", "down"]),
        ("play_music", &["play", "mu", "sic"]),
    ]
    .into_iter()
    .map(|(n, s)| KeywordSpec::from_subwords(n, s).expect("valid built-in keyword"))
    .collect()
}
