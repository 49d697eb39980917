use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{MetricsError, Result};
use crate::record::ScoreRecord;

/// `utt_id score` with six decimals.
pub fn format_score_line(r: &ScoreRecord) -> String {
    format!("{} {:.6}", r.utt_id, r.score)
}

pub fn write_scores(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(MetricsError::Record("no records to write".into()));
    }
    let mut text = String::new();
    for r in records {
        writeln!(text, "{}", format_score_line(r)).expect("write to string");
    }
    fs::write(path, text).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `utt_id score` lines; blank lines are skipped and labels are unset.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, msg: String| MetricsError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, score] = fields[..] else {
            return Err(parse_err(n, format!("expected 2 fields, found {}", fields.len())));
        };
        let score: f32 = score
            .parse()
            .map_err(|e| parse_err(n, format!("score {score:?}: {e}")))?;
        out.push(ScoreRecord::new(id, score, None).map_err(|e| parse_err(n, e.to_string()))?);
    }
    Ok(out)
}
