use std::fmt;
use std::str::FromStr;

use crate::error::{MetricsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Bonafide,
    Spoof,
}

impl Label {
    /// Training target: 0 for bona-fide, 1 for spoof.
    pub fn target(self) -> u8 {
        match self {
            Label::Bonafide => 0,
            Label::Spoof => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Bonafide => Label::Spoof,
            Label::Spoof => Label::Bonafide,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub score: f32,
    pub label: Option<Label>,
}

impl ScoreRecord {
    pub fn new(utt_id: impl Into<String>, score: f32, label: Option<Label>) -> Result<Self> {
        let utt_id = utt_id.into();
        if utt_id.is_empty() || utt_id.chars().any(char::is_whitespace) {
            return Err(MetricsError::Record(format!("utterance id {utt_id:?}")));
        }
        if !score.is_finite() {
            return Err(MetricsError::Record(format!("{utt_id}: score {score}")));
        }
        Ok(ScoreRecord { utt_id, score, label })
    }

    pub fn labeled(utt_id: impl Into<String>, score: f32, label: Label) -> Result<Self> {
        Self::new(utt_id, score, Some(label))
    }
}
