//! Domain types shared across the crate.
//!
//! Everything here is plain data. Construction does not enforce the
//! session-level invariants; [`validate_session`] reports them as a list of
//! violations so callers can decide what to do with imperfect recordings.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest possible individual post-test score.
pub const SCORE_MIN: f64 = 0.0;
pub const SCORE_MAX: f64 = 5.0;

/// Persons per team the analysis is defined for.
pub const TEAM_SIZE: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown condition {0:?} (expected textbook, tablet or ar)")]
    UnknownCondition(String),
    #[error("unknown group {0:?} (expected control or experiment)")]
    UnknownGroup(String),
    #[error("unknown gender composition {0:?} (expected FF, MM or MX)")]
    UnknownGender(String),
    #[error("unknown discard reason {0:?}")]
    UnknownDiscardReason(String),
}

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_newtype!(
    /// Identifier of a team (one pair of students).
    TeamId
);
id_newtype!(
    /// Identifier of a person, assumed stable across the frames of a session.
    PersonId
);
id_newtype!(FrameId);

/// A location in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// True when the point lies in the closed rectangle `[0, width] × [0, height]`.
    pub fn within(&self, width: f64, height: f64) -> bool {
        self.is_finite() && self.x >= 0.0 && self.y >= 0.0 && self.x <= width && self.y <= height
    }
}

/// One person's predicted gaze in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeObservation {
    pub person_id: PersonId,
    pub gaze: Point2D,
    /// Eye or head location, when the upstream predictor reports it.
    pub head: Option<Point2D>,
    pub confidence: f64,
}

impl GazeObservation {
    pub fn new(person_id: impl Into<PersonId>, gaze: Point2D) -> Self {
        Self {
            person_id: person_id.into(),
            gaze,
            head: None,
            confidence: 1.0,
        }
    }

    pub fn with_head(mut self, head: Point2D) -> Self {
        self.head = Some(head);
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    /// Usable for pairing: finite gaze inside the frame and a confidence in `[0, 1]`.
    pub fn is_valid_in(&self, width: u32, height: u32) -> bool {
        self.gaze.within(f64::from(width), f64::from(height)) && (0.0..=1.0).contains(&self.confidence)
    }
}

impl From<String> for PersonId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Why a captured frame was set aside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    CameraDifficulty,
    ExtraIndividuals,
    Unspecified,
}

impl DiscardReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiscardReason::CameraDifficulty => "camera_difficulty",
            DiscardReason::ExtraIndividuals => "extra_individuals",
            DiscardReason::Unspecified => "unspecified",
        }
    }
}

impl FromStr for DiscardReason {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "camera_difficulty" | "camera" => Ok(DiscardReason::CameraDifficulty),
            "extra_individuals" | "extra" => Ok(DiscardReason::ExtraIndividuals),
            "" | "unspecified" => Ok(DiscardReason::Unspecified),
            _ => Err(ModelError::UnknownDiscardReason(s.to_owned())),
        }
    }
}

/// All observations of one team at one capture instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: FrameId,
    pub timestamp: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub observations: Vec<GazeObservation>,
    /// Discarded frames stay in the record so denominators remain auditable.
    pub discard: Option<DiscardReason>,
}

impl FrameRecord {
    pub fn new(frame_id: impl Into<String>, timestamp: f64, image_width: u32, image_height: u32) -> Self {
        Self {
            frame_id: FrameId(frame_id.into()),
            timestamp,
            image_width,
            image_height,
            observations: Vec::new(),
            discard: None,
        }
    }

    pub fn with_observation(mut self, obs: GazeObservation) -> Self {
        self.observations.push(obs);
        self
    }

    pub fn discarded(mut self, reason: DiscardReason) -> Self {
        self.discard = Some(reason);
        self
    }

    pub fn is_discarded(&self) -> bool {
        self.discard.is_some()
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.image_width).hypot(f64::from(self.image_height))
    }

    pub fn valid_observations(&self) -> impl Iterator<Item = &GazeObservation> {
        self.observations
            .iter()
            .filter(move |o| o.is_valid_in(self.image_width, self.image_height))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Textbook,
    Tablet,
    #[serde(rename = "ar")]
    AR,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Textbook, Condition::Tablet, Condition::AR];

    pub fn group(self) -> Group {
        match self {
            Condition::Textbook => Group::Control,
            Condition::Tablet | Condition::AR => Group::Experiment,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Textbook => "textbook",
            Condition::Tablet => "tablet",
            Condition::AR => "ar",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "textbook" => Ok(Condition::Textbook),
            "tablet" => Ok(Condition::Tablet),
            "ar" => Ok(Condition::AR),
            _ => Err(ModelError::UnknownCondition(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Experiment,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Control, Group::Experiment];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Experiment => "experiment",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(Group::Control),
            "experiment" => Ok(Group::Experiment),
            _ => Err(ModelError::UnknownGroup(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GenderComposition {
    #[serde(rename = "FF")]
    Females,
    #[serde(rename = "MM")]
    Males,
    #[serde(rename = "MX")]
    Mixed,
}

impl GenderComposition {
    pub const ALL: [GenderComposition; 3] = [
        GenderComposition::Females,
        GenderComposition::Males,
        GenderComposition::Mixed,
    ];

    pub fn code(self) -> &'static str {
        match self {
            GenderComposition::Females => "FF",
            GenderComposition::Males => "MM",
            GenderComposition::Mixed => "MX",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GenderComposition::Females => "females",
            GenderComposition::Males => "males",
            GenderComposition::Mixed => "mixed",
        }
    }
}

impl fmt::Display for GenderComposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for GenderComposition {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FF" | "FEMALES" | "FEMALE" => Ok(GenderComposition::Females),
            "MM" | "MALES" | "MALE" => Ok(GenderComposition::Males),
            "MX" | "MIXED" => Ok(GenderComposition::Mixed),
            _ => Err(ModelError::UnknownGender(s.to_owned())),
        }
    }
}

/// Mean of the two teammates' individual scores.
pub fn team_post_test_score(first: f64, second: f64) -> f64 {
    (first + second) / 2.0
}

/// Per-team metadata, as read from the team table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamMeta {
    pub team_id: TeamId,
    pub condition: Condition,
    pub gender: GenderComposition,
    pub post_test_scores: [f64; 2],
}

impl TeamMeta {
    pub fn group(&self) -> Group {
        self.condition.group()
    }

    pub fn team_post_test(&self) -> f64 {
        team_post_test_score(self.post_test_scores[0], self.post_test_scores[1])
    }
}

/// Ordered frames of one team plus its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamSession {
    pub meta: TeamMeta,
    pub frames: Vec<FrameRecord>,
}

impl TeamSession {
    pub fn new(meta: TeamMeta, frames: Vec<FrameRecord>) -> Self {
        Self { meta, frames }
    }

    pub fn team_id(&self) -> &TeamId {
        &self.meta.team_id
    }
}

/// A broken invariant, addressed by field and (when applicable) frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub frame_id: Option<FrameId>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.frame_id {
            Some(frame) => write!(f, "{} (frame {}): {}", self.field, frame, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

pub fn validate_session(session: &TeamSession) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field, frame_id: Option<&FrameId>, message: String| {
        out.push(Violation {
            field,
            frame_id: frame_id.cloned(),
            message,
        })
    };

    for score in session.meta.post_test_scores {
        if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
            push("post_test_scores", None, format!("score out of [0,5]: {score}"));
        }
    }

    let mut persons = BTreeSet::new();
    let mut last_ts = f64::NEG_INFINITY;
    for frame in &session.frames {
        let fid = Some(&frame.frame_id);
        if frame.image_width == 0 || frame.image_height == 0 {
            push(
                "image_size",
                fid,
                format!(
                    "image size must be positive, got {}x{}",
                    frame.image_width, frame.image_height
                ),
            );
        }
        if !frame.timestamp.is_finite() {
            push("timestamp", fid, "timestamp is not finite".into());
        } else if frame.timestamp < last_ts {
            push(
                "timestamp",
                fid,
                format!("timestamp {} precedes previous {}", frame.timestamp, last_ts),
            );
        } else {
            last_ts = frame.timestamp;
        }
        for obs in &frame.observations {
            if !obs
                .gaze
                .within(f64::from(frame.image_width), f64::from(frame.image_height))
            {
                push(
                    "gaze",
                    fid,
                    format!(
                        "gaze of {} at ({}, {}) outside image",
                        obs.person_id, obs.gaze.x, obs.gaze.y
                    ),
                );
            }
            if !(0.0..=1.0).contains(&obs.confidence) {
                push(
                    "confidence",
                    fid,
                    format!("confidence of {} out of [0,1]: {}", obs.person_id, obs.confidence),
                );
            }
        }
        if !frame.is_discarded() {
            persons.extend(frame.valid_observations().map(|o| o.person_id.clone()));
        }
    }

    if persons.len() != TEAM_SIZE {
        push(
            "team_size",
            None,
            format!("team size ≠ 2: {} distinct persons in valid frames", persons.len()),
        );
    }
    out
}
