//! Joint visual attention (JVA) scoring for co-located teams.
//!
//! Per-frame gaze points of two teammates are compared against a pixel
//! threshold; the share of frames where they converge is the team's JVA
//! ratio. The crate also carries the statistics used to relate that ratio to
//! study conditions, team composition and learning outcomes, the inference
//! geometry of heatmap-based gaze following, and a label-controlled session
//! generator used as an end-to-end oracle.

pub mod gaze;
pub mod io;
pub mod jva;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;

pub use gaze::{decode_heatmap, encode_direction_field, multiscale_fields, synthetic_predict, GazePredictor, Heatmap};
pub use jva::{classify_frame, session_jva, DenominatorPolicy, JvaConfig, ScaleMode};
pub use model::{FrameRecord, GazeObservation, Point2D, TeamSession};
pub use report::{Report, ReportFormat};
pub use stats::{anova_from_summary, anova_oneway, cohens_d, f_tail_p, pearson, summarize, GroupSummary};

/// Summary statistics of the reference study, with provenance comments.
pub const STUDY_SUMMARY: &str = include_str!("../fixtures/paper_fixture.csv");
