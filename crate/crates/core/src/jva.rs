//! Per-frame joint visual attention and per-team JVA ratios.
//!
//! A frame shows JVA when the two teammates' gaze points are closer than a
//! pixel threshold. The ratio is the share of countable frames with JVA.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrameId, FrameRecord, TeamId, TeamSession};

pub const DEFAULT_THRESHOLD: f64 = 100.0;

/// Diagonal of a 2560×1440 capture.
pub const DEFAULT_REFERENCE_DIAGONAL: f64 = 2937.21;

#[derive(Debug, Error, PartialEq)]
pub enum JvaError {
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("reference diagonal must be positive and finite, got {0}")]
    InvalidReferenceDiagonal(f64),
    #[error("no countable frames for team {0}")]
    NoCountableFrames(TeamId),
    #[error("unknown scale mode {0:?} (expected absolute or diagonal-normalized)")]
    UnknownScaleMode(String),
    #[error("unknown denominator policy {0:?} (expected valid-pair-frames or all-captured-frames)")]
    UnknownDenominatorPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// Threshold in raw pixels regardless of resolution.
    #[default]
    Absolute,
    /// Threshold scaled by `frame diagonal / reference diagonal`.
    DiagonalNormalized,
}

impl ScaleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleMode::Absolute => "absolute",
            ScaleMode::DiagonalNormalized => "diagonal-normalized",
        }
    }
}

impl FromStr for ScaleMode {
    type Err = JvaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "absolute" => Ok(ScaleMode::Absolute),
            "diagonal-normalized" | "diagonal" => Ok(ScaleMode::DiagonalNormalized),
            _ => Err(JvaError::UnknownScaleMode(s.to_owned())),
        }
    }
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorPolicy {
    /// Only non-discarded frames with exactly two valid observations count.
    #[default]
    ValidPairFrames,
    /// Every non-discarded frame counts, paired or not, except frames with
    /// more than two valid observations.
    AllCapturedFrames,
}

impl DenominatorPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            DenominatorPolicy::ValidPairFrames => "valid-pair-frames",
            DenominatorPolicy::AllCapturedFrames => "all-captured-frames",
        }
    }
}

impl FromStr for DenominatorPolicy {
    type Err = JvaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "valid-pair-frames" | "valid-pair" => Ok(DenominatorPolicy::ValidPairFrames),
            "all-captured-frames" | "all-captured" | "all" => Ok(DenominatorPolicy::AllCapturedFrames),
            _ => Err(JvaError::UnknownDenominatorPolicy(s.to_owned())),
        }
    }
}

impl fmt::Display for DenominatorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JvaConfig {
    pub threshold: f64,
    pub reference_diagonal: f64,
    pub scale_mode: ScaleMode,
    pub denominator_policy: DenominatorPolicy,
}

impl Default for JvaConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            reference_diagonal: DEFAULT_REFERENCE_DIAGONAL,
            scale_mode: ScaleMode::Absolute,
            denominator_policy: DenominatorPolicy::ValidPairFrames,
        }
    }
}

impl JvaConfig {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), JvaError> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(JvaError::InvalidThreshold(self.threshold));
        }
        if !(self.reference_diagonal.is_finite() && self.reference_diagonal > 0.0) {
            return Err(JvaError::InvalidReferenceDiagonal(self.reference_diagonal));
        }
        Ok(())
    }

    /// Threshold in pixels that applies to a frame of the given diagonal.
    pub fn effective_threshold(&self, frame_diagonal: f64) -> f64 {
        match self.scale_mode {
            ScaleMode::Absolute => self.threshold,
            ScaleMode::DiagonalNormalized => self.threshold * frame_diagonal / self.reference_diagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JvaFrameResult {
    pub frame_id: FrameId,
    /// Distance between the two gaze points; `None` when the frame is not a valid pair.
    pub distance: Option<f64>,
    pub is_jva: bool,
    pub counted_in_denominator: bool,
}

pub fn classify_frame(frame: &FrameRecord, cfg: &JvaConfig) -> JvaFrameResult {
    let valid: Vec<_> = frame.valid_observations().collect();
    let paired = !frame.is_discarded() && valid.len() == 2;
    if !paired {
        let counted = match cfg.denominator_policy {
            DenominatorPolicy::ValidPairFrames => false,
            DenominatorPolicy::AllCapturedFrames => !frame.is_discarded() && valid.len() < 2,
        };
        return JvaFrameResult {
            frame_id: frame.frame_id.clone(),
            distance: None,
            is_jva: false,
            counted_in_denominator: counted,
        };
    }
    let distance = valid[0].gaze.distance(&valid[1].gaze);
    JvaFrameResult {
        frame_id: frame.frame_id.clone(),
        distance: Some(distance),
        is_jva: distance < cfg.effective_threshold(frame.diagonal()),
        counted_in_denominator: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JvaSessionResult {
    pub team_id: TeamId,
    pub jva_frames: usize,
    pub denominator_frames: usize,
    pub jva_ratio: f64,
}

impl JvaSessionResult {
    pub fn percent(&self) -> f64 {
        self.jva_ratio * 100.0
    }
}

/// Aggregate [`classify_frame`] over a session.
pub fn session_jva(session: &TeamSession, cfg: &JvaConfig) -> Result<JvaSessionResult, JvaError> {
    let (jva_frames, denominator_frames) = session
        .frames
        .iter()
        .map(|f| classify_frame(f, cfg))
        .fold((0usize, 0usize), |(j, d), r| {
            (j + usize::from(r.is_jva), d + usize::from(r.counted_in_denominator))
        });
    if denominator_frames == 0 {
        return Err(JvaError::NoCountableFrames(session.team_id().clone()));
    }
    Ok(JvaSessionResult {
        team_id: session.team_id().clone(),
        jva_frames,
        denominator_frames,
        jva_ratio: jva_frames as f64 / denominator_frames as f64,
    })
}

/// Scores many sessions in parallel. Results come back sorted by team id
/// regardless of scheduling.
pub fn score_sessions<'a, I>(sessions: I, cfg: &JvaConfig) -> Vec<(TeamId, Result<JvaSessionResult, JvaError>)>
where
    I: IntoIterator<Item = &'a TeamSession>,
{
    let sessions: Vec<&TeamSession> = sessions.into_iter().collect();
    let mut out: Vec<_> = sessions
        .par_iter()
        .map(|s| (s.team_id().clone(), session_jva(s, cfg)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Condition, DiscardReason, GazeObservation, GenderComposition, Point2D, TeamMeta};

    fn frame(id: &str, a: (f64, f64), b: (f64, f64)) -> FrameRecord {
        FrameRecord::new(id, 0.0, 2560, 1440)
            .with_observation(GazeObservation::new("a", Point2D::new(a.0, a.1)))
            .with_observation(GazeObservation::new("b", Point2D::new(b.0, b.1)))
    }

    fn session(frames: Vec<FrameRecord>) -> TeamSession {
        TeamSession::new(
            TeamMeta {
                team_id: "t".into(),
                condition: Condition::AR,
                gender: GenderComposition::Females,
                post_test_scores: [2.0, 3.0],
            },
            frames,
        )
    }

    #[test]
    fn close_gazes_are_jva() {
        let r = classify_frame(&frame("f", (100.0, 100.0), (150.0, 150.0)), &JvaConfig::default());
        assert!((r.distance.unwrap() - std::f64::consts::SQRT_2 * 50.0).abs() < 1e-12);
        assert!(r.is_jva);
        assert!(r.counted_in_denominator);
    }

    #[test]
    fn far_gazes_are_not() {
        let r = classify_frame(&frame("f", (100.0, 100.0), (250.0, 100.0)), &JvaConfig::default());
        assert_eq!(r.distance, Some(150.0));
        assert!(!r.is_jva);
    }

    #[test]
    fn exactly_threshold_is_not_jva() {
        let r = classify_frame(&frame("f", (100.0, 100.0), (200.0, 100.0)), &JvaConfig::default());
        assert_eq!(r.distance, Some(100.0));
        assert!(!r.is_jva);
    }

    #[test]
    fn diagonal_normalized_threshold() {
        let cfg = JvaConfig {
            scale_mode: ScaleMode::DiagonalNormalized,
            ..JvaConfig::default()
        };
        let f = FrameRecord::new("f", 0.0, 1280, 720)
            .with_observation(GazeObservation::new("a", Point2D::new(100.0, 100.0)))
            .with_observation(GazeObservation::new("b", Point2D::new(160.0, 100.0)));
        // 1280x720 diagonal is 1468.605, half of the 2937.21 reference.
        let eff = cfg.effective_threshold(f.diagonal());
        assert!((eff - 100.0 * 1280f64.hypot(720.0) / 2937.21).abs() < 1e-12);
        assert!((eff - 50.0).abs() < 1e-3);
        assert!(!classify_frame(&f, &cfg).is_jva);
        let f2 = FrameRecord::new("f", 0.0, 1280, 720)
            .with_observation(GazeObservation::new("a", Point2D::new(100.0, 100.0)))
            .with_observation(GazeObservation::new("b", Point2D::new(140.0, 100.0)));
        assert!(classify_frame(&f2, &cfg).is_jva);
    }

    #[test]
    fn unpaired_frames_follow_the_denominator_policy() {
        let single =
            FrameRecord::new("s", 0.0, 2560, 1440).with_observation(GazeObservation::new("a", Point2D::new(1.0, 1.0)));
        let discarded = frame("d", (1.0, 1.0), (2.0, 2.0)).discarded(DiscardReason::CameraDifficulty);
        let triple =
            frame("t", (1.0, 1.0), (2.0, 2.0)).with_observation(GazeObservation::new("c", Point2D::new(3.0, 3.0)));
        let valid = JvaConfig::default();
        let all = JvaConfig {
            denominator_policy: DenominatorPolicy::AllCapturedFrames,
            ..valid
        };
        for f in [&single, &discarded, &triple] {
            let r = classify_frame(f, &valid);
            assert!(!r.is_jva && r.distance.is_none() && !r.counted_in_denominator);
        }
        assert!(classify_frame(&single, &all).counted_in_denominator);
        assert!(!classify_frame(&triple, &all).counted_in_denominator);
        assert!(!classify_frame(&discarded, &all).counted_in_denominator);
    }

    #[test]
    fn out_of_image_observation_does_not_pair() {
        let f = frame("f", (100.0, 100.0), (3000.0, 100.0));
        assert!(classify_frame(&f, &JvaConfig::default()).distance.is_none());
    }

    #[test]
    fn half_of_ten_frames() {
        let frames = (0..10)
            .map(|i| {
                let b = if i % 2 == 0 { (10.0, 10.0) } else { (900.0, 10.0) };
                frame(&format!("f{i}"), (10.0, 10.0), b)
            })
            .collect();
        let r = session_jva(&session(frames), &JvaConfig::default()).unwrap();
        assert_eq!((r.jva_frames, r.denominator_frames), (5, 10));
        assert_eq!(r.jva_ratio, 0.5);
        assert_eq!(r.percent(), 50.0);
    }

    #[test]
    fn all_discarded_has_no_denominator() {
        let frames = vec![frame("f", (1.0, 1.0), (1.0, 1.0)).discarded(DiscardReason::Unspecified)];
        assert_eq!(
            session_jva(&session(frames), &JvaConfig::default()),
            Err(JvaError::NoCountableFrames("t".into()))
        );
    }

    #[test]
    fn config_validation_and_parsing() {
        assert!(JvaConfig::default().validate().is_ok());
        assert_eq!(
            JvaConfig::default().with_threshold(-1.0).validate(),
            Err(JvaError::InvalidThreshold(-1.0))
        );
        assert_eq!(
            "Diagonal_Normalized".parse::<ScaleMode>().unwrap(),
            ScaleMode::DiagonalNormalized
        );
        assert_eq!(
            "all-captured-frames".parse::<DenominatorPolicy>().unwrap(),
            DenominatorPolicy::AllCapturedFrames
        );
        assert!("nope".parse::<ScaleMode>().is_err());
    }

    #[test]
    fn parallel_scoring_is_sorted() {
        let mut a = session(vec![frame("f", (1.0, 1.0), (1.0, 1.0))]);
        a.meta.team_id = "zz".into();
        let mut b = session(vec![]);
        b.meta.team_id = "aa".into();
        let out = score_sessions([&a, &b], &JvaConfig::default());
        assert_eq!(out[0].0.as_str(), "aa");
        assert!(out[0].1.is_err());
        assert_eq!(out[1].1.as_ref().unwrap().jva_ratio, 1.0);
    }
}
