//! Label-controlled synthetic sessions.
//!
//! Each frame is assigned an intended JVA label. JVA frames put both
//! teammates' true targets on the same point; other frames place them at
//! least three thresholds apart, so isotropic noise up to a third of the
//! threshold leaves the label intact with overwhelming probability
//! (a non-JVA pair would need a combined displacement above two thresholds,
//! i.e. six standard deviations of the pairwise difference). Observed gaze is
//! the target plus noise from [`synthetic_predict`].
//!
//! Randomness comes from ChaCha8 (a counter-based stream cipher generator)
//! seeded with the spec seed; team `i` draws from stream `i`, so teams are
//! independent and reproducible on every platform.

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaze::{synthetic_predict, GazeError, SceneDescriptor, ScenePerson};
use crate::io::{FrameRow, TeamRow};
use crate::jva::DEFAULT_THRESHOLD;
use crate::model::{Condition, GenderComposition, Point2D, TeamId};

/// Capture interval between frames, in seconds.
pub const FRAME_INTERVAL_S: f64 = 10.0;

/// Frames per team in the reference collection (4,646 frames over 30 teams).
pub const DEFAULT_FRAMES_PER_TEAM: usize = 155;

/// Non-JVA targets are at least this many thresholds apart.
///
/// Margin analysis, threshold `T`, per-axis gaze noise `σ` on each person:
/// the difference of the two noise vectors is isotropic with per-axis SD
/// `σ√2`, so its length is Rayleigh distributed.
///
/// * A non-JVA frame flips only if the noise closes at least `2T` of the gap
///   along one axis. At `σ = T/3` that is a 4.2 SD event (about 1e-5).
/// * A JVA frame flips when the noise alone pushes the points `T` apart,
///   with probability `exp(-T² / 4σ²)`: 0.2% at `σ = T/5`, 10% at `σ = T/3`.
///
/// Targets are also kept `4σ` away from the image border so clamping rarely
/// distorts the noise.
pub const SEPARATION_FACTOR: f64 = 3.0;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("image {0}x{1} is too small to separate targets by {2} px")]
    SceneTooSmall(u32, u32, f64),
    #[error("moment-matched group needs n >= 2 and a finite sd >= 0, got n={n}, sd={sd}")]
    InvalidMoments { n: usize, sd: f64 },
    #[error(transparent)]
    Gaze(#[from] GazeError),
}

/// How per-team JVA probabilities are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JvaProbability {
    Uniform(f64),
    /// Probabilities for textbook, tablet and AR teams.
    PerCondition([f64; 3]),
    /// One probability per team, in team order.
    PerTeam(Vec<f64>),
}

impl JvaProbability {
    fn for_team(&self, index: usize, condition: Condition) -> f64 {
        match self {
            JvaProbability::Uniform(p) => *p,
            JvaProbability::PerCondition(ps) => match condition {
                Condition::Textbook => ps[0],
                Condition::Tablet => ps[1],
                Condition::AR => ps[2],
            },
            JvaProbability::PerTeam(ps) => ps[index],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            JvaProbability::Uniform(p) => vec![*p],
            JvaProbability::PerCondition(ps) => ps.to_vec(),
            JvaProbability::PerTeam(ps) => ps.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Each frame is independently JVA with probability `p`.
    #[default]
    Bernoulli,
    /// Exactly `round(p · frames)` JVA frames, at random positions.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub teams: usize,
    pub frames_per_team: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub jva_probability: JvaProbability,
    pub label_mode: LabelMode,
    pub gaze_noise_sigma: f64,
    /// Threshold the separation margin is measured in.
    pub threshold: f64,
    /// Conditions cycled over teams.
    pub condition_plan: Vec<Condition>,
    /// Gender compositions cycled over teams.
    pub gender_plan: Vec<GenderComposition>,
    pub seed: u64,
}

/// 15 female, 7 male and 8 mixed pairs, interleaved so any prefix stays balanced.
pub fn reference_gender_plan() -> Vec<GenderComposition> {
    use GenderComposition::*;
    let mut plan = Vec::with_capacity(30);
    // Remaining pairs of each kind: females, mixed, males.
    let mut left = [15, 8, 7];
    let kinds = [Females, Mixed, Males];
    while left.iter().sum::<usize>() > 0 {
        for k in [0, 1, 0, 2] {
            if left[k] > 0 {
                left[k] -= 1;
                plan.push(kinds[k]);
            }
        }
    }
    plan
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            teams: 30,
            frames_per_team: DEFAULT_FRAMES_PER_TEAM,
            image_width: 2560,
            image_height: 1440,
            jva_probability: JvaProbability::PerCondition([0.313, 0.465, 0.446]),
            label_mode: LabelMode::Bernoulli,
            gaze_noise_sigma: 0.0,
            threshold: DEFAULT_THRESHOLD,
            condition_plan: Condition::ALL.to_vec(),
            gender_plan: reference_gender_plan(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.teams == 0 || self.frames_per_team == 0 {
            return bad("team and frame counts must be positive".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be positive".into());
        }
        if self.condition_plan.is_empty() || self.gender_plan.is_empty() {
            return bad("condition and gender plans must be non-empty".into());
        }
        if let JvaProbability::PerTeam(ps) = &self.jva_probability {
            if ps.len() != self.teams {
                return bad(format!("{} per-team probabilities for {} teams", ps.len(), self.teams));
            }
        }
        if let Some(p) = self
            .jva_probability
            .values()
            .into_iter()
            .find(|p| !(0.0..=1.0).contains(p))
        {
            return bad(format!("probability {p} outside [0, 1]"));
        }
        if !(self.gaze_noise_sigma.is_finite() && self.gaze_noise_sigma >= 0.0) {
            return bad(format!("noise sigma {}", self.gaze_noise_sigma));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return bad(format!("threshold {}", self.threshold));
        }
        Ok(())
    }

    pub fn team_id(index: usize) -> TeamId {
        TeamId(format!("team_{:02}", index + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamTruth {
    pub team_id: TeamId,
    pub condition: Condition,
    pub gender: GenderComposition,
    pub probability: f64,
    pub frames: usize,
    pub jva_frames: usize,
    pub ratio: f64,
    /// Intended label per frame, in frame order.
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub noise_sigma: f64,
    pub threshold: f64,
    pub teams: Vec<TeamTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub frames: Vec<FrameRow>,
    pub teams: Vec<TeamRow>,
    pub truth: GroundTruth,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let (w, h) = (f64::from(spec.image_width), f64::from(spec.image_height));
    let separation = SEPARATION_FACTOR * spec.threshold;
    let margin = (4.0 * spec.gaze_noise_sigma).min(w.min(h) / 4.0);
    if (w - 2.0 * margin).hypot(h - 2.0 * margin) < separation * 1.05 {
        return Err(SynthError::SceneTooSmall(
            spec.image_width,
            spec.image_height,
            separation,
        ));
    }
    let heads = [Point2D::new(w * 0.25, h * 0.2), Point2D::new(w * 0.75, h * 0.2)];

    let mut frames = Vec::with_capacity(spec.teams * spec.frames_per_team * 2);
    let mut teams = Vec::with_capacity(spec.teams);
    let mut truth = Vec::with_capacity(spec.teams);

    for index in 0..spec.teams {
        let team_id = SynthSpec::team_id(index);
        let condition = spec.condition_plan[index % spec.condition_plan.len()];
        let gender = spec.gender_plan[index % spec.gender_plan.len()];
        let p = spec.jva_probability.for_team(index, condition);

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index as u64);

        let labels = draw_labels(&mut rng, spec.label_mode, p, spec.frames_per_team);
        for (i, &joint) in labels.iter().enumerate() {
            let a = uniform_point(&mut rng, w, h, margin);
            let b = if joint {
                a
            } else {
                separated_point(&mut rng, a, w, h, margin, separation).ok_or(SynthError::SceneTooSmall(
                    spec.image_width,
                    spec.image_height,
                    separation,
                ))?
            };
            let scene = SceneDescriptor {
                width: w,
                height: h,
                people: vec![
                    ScenePerson {
                        person_id: "p1".into(),
                        head: Some(heads[0]),
                        target: a,
                    },
                    ScenePerson {
                        person_id: "p2".into(),
                        head: Some(heads[1]),
                        target: b,
                    },
                ],
            };
            for obs in synthetic_predict(&scene, spec.gaze_noise_sigma, rng.next_u64())? {
                frames.push(FrameRow {
                    team_id: team_id.to_string(),
                    frame_id: format!("f{i:05}"),
                    timestamp_s: i as f64 * FRAME_INTERVAL_S,
                    image_w: spec.image_width,
                    image_h: spec.image_height,
                    person_id: obs.person_id.to_string(),
                    gaze_x: obs.gaze.x,
                    gaze_y: obs.gaze.y,
                    head_x: obs.head.map(|h| h.x),
                    head_y: obs.head.map(|h| h.y),
                    confidence: Some(obs.confidence),
                    discarded: 0,
                });
            }
        }

        // Individual scores are whole numbers of correctly labeled items out of five.
        let score_dist = Binomial::new(5, 0.2 + 0.6 * p).expect("probability within [0.2, 0.8]");
        teams.push(TeamRow {
            team_id: team_id.to_string(),
            condition: condition.as_str().to_owned(),
            gender: gender.code().to_owned(),
            post_test_1: score_dist.sample(&mut rng) as f64,
            post_test_2: score_dist.sample(&mut rng) as f64,
        });

        let jva_frames = labels.iter().filter(|&&l| l).count();
        truth.push(TeamTruth {
            team_id,
            condition,
            gender,
            probability: p,
            frames: labels.len(),
            jva_frames,
            ratio: jva_frames as f64 / labels.len() as f64,
            labels,
        });
    }

    Ok(SynthOutput {
        frames,
        teams,
        truth: GroundTruth {
            seed: spec.seed,
            noise_sigma: spec.gaze_noise_sigma,
            threshold: spec.threshold,
            teams: truth,
        },
    })
}

fn draw_labels(rng: &mut ChaCha8Rng, mode: LabelMode, p: f64, frames: usize) -> Vec<bool> {
    match mode {
        LabelMode::Bernoulli => (0..frames).map(|_| rng.random::<f64>() < p).collect(),
        LabelMode::Exact => {
            let k = ((p * frames as f64).round() as usize).min(frames);
            let mut labels = vec![false; frames];
            for i in sample(rng, frames, k).iter() {
                labels[i] = true;
            }
            labels
        }
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, w: f64, h: f64, margin: f64) -> Point2D {
    Point2D::new(
        rng.random_range(margin..=w - margin),
        rng.random_range(margin..=h - margin),
    )
}

fn separated_point(
    rng: &mut ChaCha8Rng,
    from: Point2D,
    w: f64,
    h: f64,
    margin: f64,
    separation: f64,
) -> Option<Point2D> {
    let inside = |p: &Point2D| p.x >= margin && p.x <= w - margin && p.y >= margin && p.y <= h - margin;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let dist = rng.random_range(separation..=separation * 1.5);
        let candidate = Point2D::new(from.x + dist * angle.cos(), from.y + dist * angle.sin());
        if inside(&candidate) && candidate.distance(&from) >= separation {
            return Some(candidate);
        }
    }
    // Fall back to any far-enough point in the placement area.
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let candidate = uniform_point(rng, w, h, margin);
        if candidate.distance(&from) >= separation {
            return Some(candidate);
        }
    }
    None
}

/// Raw samples whose sample mean and sample SD are exactly the requested ones
/// (up to rounding): an affine image of a centred, unit-SD ramp.
pub fn moment_matched_groups(spec: &[(usize, f64, f64)]) -> Result<Vec<Vec<f64>>, SynthError> {
    spec.iter().map(|&(n, mean, sd)| moment_matched(n, mean, sd)).collect()
}

pub fn moment_matched(n: usize, mean: f64, sd: f64) -> Result<Vec<f64>, SynthError> {
    if n < 2 || !(sd.is_finite() && sd >= 0.0) || !mean.is_finite() {
        return Err(SynthError::InvalidMoments { n, sd });
    }
    if sd == 0.0 {
        return Ok(vec![mean; n]);
    }
    let centre = (n as f64 - 1.0) / 2.0;
    let base: Vec<f64> = (0..n).map(|i| i as f64 - centre).collect();
    let base_sd = (base.iter().map(|z| z * z).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(base.iter().map(|z| mean + sd * z / base_sd).collect())
}
