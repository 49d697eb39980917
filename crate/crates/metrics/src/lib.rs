//! Equal error rate, DET points, score files and evaluation reports.
//!
//! Higher scores mean bona-fide. An utterance is accepted as bona-fide when
//! its score is at or above the threshold.

mod eer;
mod error;
mod record;
mod report;
mod scores;

pub use eer::{det_points, eer, Eer, OperatingPoint};
pub use error::{MetricsError, Result};
pub use record::{Label, ScoreRecord};
pub use report::{render_kv, render_table, EvalSummary};
pub use scores::{format_score_line, read_scores, write_scores};
