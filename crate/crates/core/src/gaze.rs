//! Inference-side geometry of heatmap-based gaze following.
//!
//! A coarse gaze direction is turned into a set of direction fields (one per
//! sharpness exponent); a heatmap regressed by some model is decoded to a
//! single gaze point in scene pixels. The model itself sits behind
//! [`GazePredictor`]; [`SyntheticPredictor`] is the in-tree implementation
//! used to drive the pipeline with known ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GazeObservation, PersonId, Point2D};

/// Heatmap resolution produced by the gaze-following network.
pub const HEATMAP_SIZE: usize = 56;

/// Sharpness exponents used when none are configured.
pub const DEFAULT_EXPONENTS: [f64; 3] = [1.0, 2.0, 5.0];

const MIN_DIRECTION_NORM: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GazeError {
    #[error("degenerate direction ({0}, {1})")]
    DegenerateDirection(f64, f64),
    #[error("exponent must be positive and finite, got {0}")]
    InvalidExponent(f64),
    #[error("no exponents given")]
    NoExponents,
    #[error("grid size must be positive, got {0}x{1}")]
    EmptyGrid(usize, usize),
    #[error("head ({0}, {1}) outside the {2}x{3} field")]
    HeadOutOfBounds(f64, f64, usize, usize),
    #[error("heatmap has {got} values, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("heatmap value {value} at ({col}, {row}) is negative or not finite")]
    InvalidValue { col: usize, row: usize, value: f64 },
    #[error("undecodable heatmap: no positive cell")]
    Undecodable,
    #[error("scene size must be positive, got {0}x{1}")]
    InvalidScene(f64, f64),
    #[error("noise sigma must be non-negative and finite, got {0}")]
    InvalidNoise(f64),
    #[error("scene has no person with a known head position")]
    NoHeads,
}

/// A grid of non-negative gaze-probability values, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, GazeError> {
        if width == 0 || height == 0 {
            return Err(GazeError::EmptyGrid(width, height));
        }
        if values.len() != width * height {
            return Err(GazeError::ShapeMismatch {
                expected: width * height,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(GazeError::InvalidValue {
                col: i % width,
                row: i / width,
                value: values[i],
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, GazeError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    /// A map that is zero everywhere except `value` at `(col, row)`.
    pub fn spike(width: usize, height: usize, col: usize, row: usize, value: f64) -> Result<Self, GazeError> {
        let mut map = Self::zeros(width, height)?;
        if col >= width || row >= height {
            return Err(GazeError::ShapeMismatch {
                expected: width * height,
                got: row * width + col,
            });
        }
        map.values[row * width + col] = value;
        Self::new(width, height, map.values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, GazeError> {
        Self::new(
            self.width,
            self.height,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Largest cell, first in row-major order on ties. `None` when no cell is positive.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i % self.width, i / self.width))
    }
}

/// Map the heatmap's maximum to scene pixels, using the centre of the cell.
pub fn decode_heatmap(map: &Heatmap, scene_width: f64, scene_height: f64) -> Result<Point2D, GazeError> {
    check_scene(scene_width, scene_height)?;
    let (col, row) = map.argmax().ok_or(GazeError::Undecodable)?;
    Ok(cell_center(col, row, map.width, map.height, scene_width, scene_height))
}

pub fn cell_center(
    col: usize,
    row: usize,
    width: usize,
    height: usize,
    scene_width: f64,
    scene_height: f64,
) -> Point2D {
    Point2D::new(
        (col as f64 + 0.5) * scene_width / width as f64,
        (row as f64 + 0.5) * scene_height / height as f64,
    )
}

/// Heatmap cell containing a scene point; points on the far edge fall in the last cell.
pub fn cell_of(point: Point2D, width: usize, height: usize, scene_width: f64, scene_height: f64) -> (usize, usize) {
    let col = (point.x / scene_width * width as f64)
        .floor()
        .clamp(0.0, (width - 1) as f64);
    let row = (point.y / scene_height * height as f64)
        .floor()
        .clamp(0.0, (height - 1) as f64);
    (col as usize, row as usize)
}

fn check_scene(width: f64, height: f64) -> Result<(), GazeError> {
    if width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0 {
        Ok(())
    } else {
        Err(GazeError::InvalidScene(width, height))
    }
}

/// A unit 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    x: f64,
    y: f64,
}

impl Direction {
    /// Normalizes `(x, y)`; fails for vectors shorter than 1e-6 or non-finite ones.
    pub fn new(x: f64, y: f64) -> Result<Self, GazeError> {
        let norm = x.hypot(y);
        if !norm.is_finite() || norm < MIN_DIRECTION_NORM {
            return Err(GazeError::DegenerateDirection(x, y));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
        })
    }

    pub fn from_angle(radians: f64) -> Self {
        Self {
            x: radians.cos(),
            y: radians.sin(),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }
}

/// `max(0, cos θ)^γ`, θ being the angle between `point − head` and `direction`.
/// Zero at the head itself.
pub fn field_value(head: Point2D, direction: Direction, exponent: f64, point: Point2D) -> f64 {
    let dx = point.x - head.x;
    let dy = point.y - head.y;
    let dist = dx.hypot(dy);
    if dist == 0.0 {
        return 0.0;
    }
    let cos = ((dx * direction.x + dy * direction.y) / dist).clamp(-1.0, 1.0);
    if cos <= 0.0 {
        0.0
    } else {
        cos.powf(exponent)
    }
}

/// Angular alignment of every grid cell with a gaze direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionField {
    pub width: usize,
    pub height: usize,
    pub head: Point2D,
    pub direction: Direction,
    pub exponent: f64,
    values: Vec<f64>,
}

impl DirectionField {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cells sit at integer coordinates `(col, row)`. The cell containing the
/// head is set to zero.
pub fn encode_direction_field(
    head: Point2D,
    direction: (f64, f64),
    exponent: f64,
    width: usize,
    height: usize,
) -> Result<DirectionField, GazeError> {
    let direction = Direction::new(direction.0, direction.1)?;
    encode_with(head, direction, exponent, width, height)
}

fn encode_with(
    head: Point2D,
    direction: Direction,
    exponent: f64,
    width: usize,
    height: usize,
) -> Result<DirectionField, GazeError> {
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(GazeError::InvalidExponent(exponent));
    }
    if width == 0 || height == 0 {
        return Err(GazeError::EmptyGrid(width, height));
    }
    if !(head.is_finite() && head.x >= 0.0 && head.y >= 0.0 && head.x < width as f64 && head.y < height as f64) {
        return Err(GazeError::HeadOutOfBounds(head.x, head.y, width, height));
    }
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            values.push(field_value(
                head,
                direction,
                exponent,
                Point2D::new(col as f64, row as f64),
            ));
        }
    }
    let head_cell = head.y.floor() as usize * width + head.x.floor() as usize;
    values[head_cell] = 0.0;
    Ok(DirectionField {
        width,
        height,
        head,
        direction,
        exponent,
        values,
    })
}

/// One field per exponent, in the order given.
pub fn multiscale_fields(
    head: Point2D,
    direction: (f64, f64),
    width: usize,
    height: usize,
    exponents: &[f64],
) -> Result<Vec<DirectionField>, GazeError> {
    if exponents.is_empty() {
        return Err(GazeError::NoExponents);
    }
    let direction = Direction::new(direction.0, direction.1)?;
    exponents
        .iter()
        .map(|&g| encode_with(head, direction, g, width, height))
        .collect()
}

/// Ground truth for one person in a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePerson {
    pub person_id: PersonId,
    pub head: Option<Point2D>,
    pub target: Point2D,
}

/// Scene description consumed by predictors. For synthetic scenes the true
/// gaze targets are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub width: f64,
    pub height: f64,
    pub people: Vec<ScenePerson>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazePrediction {
    pub point: Point2D,
    pub heatmap: Option<Heatmap>,
}

/// Seam for a gaze-following model: given a scene and a head location,
/// predict where that person looks. Returned points must lie inside the scene.
pub trait GazePredictor {
    fn predict(&self, scene: &SceneDescriptor, head: Point2D) -> Result<GazePrediction, GazeError>;
}

/// Every person's true target plus isotropic Gaussian noise, clamped to the
/// scene. Deterministic for a given seed.
pub fn synthetic_predict(
    scene: &SceneDescriptor,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<GazeObservation>, GazeError> {
    check_scene(scene.width, scene.height)?;
    let noise = noise_distribution(noise_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(scene
        .people
        .iter()
        .map(|p| GazeObservation {
            person_id: p.person_id.clone(),
            gaze: perturb(p.target, noise.as_ref(), &mut rng, scene),
            head: p.head,
            confidence: 1.0,
        })
        .collect())
}

fn noise_distribution(sigma: f64) -> Result<Option<Normal<f64>>, GazeError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(GazeError::InvalidNoise(sigma));
    }
    if sigma == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, sigma)
        .map(Some)
        .map_err(|_| GazeError::InvalidNoise(sigma))
}

fn perturb(target: Point2D, noise: Option<&Normal<f64>>, rng: &mut ChaCha8Rng, scene: &SceneDescriptor) -> Point2D {
    match noise {
        None => target,
        Some(n) => Point2D::new(
            (target.x + n.sample(rng)).clamp(0.0, scene.width),
            (target.y + n.sample(rng)).clamp(0.0, scene.height),
        ),
    }
}

/// [`GazePredictor`] backed by [`synthetic_predict`]. The person is chosen by
/// nearest head position; the heatmap is a single spike at the predicted cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPredictor {
    pub noise_sigma: f64,
    pub seed: u64,
    pub heatmap_size: usize,
}

impl SyntheticPredictor {
    pub fn new(noise_sigma: f64, seed: u64) -> Self {
        Self {
            noise_sigma,
            seed,
            heatmap_size: HEATMAP_SIZE,
        }
    }
}

impl GazePredictor for SyntheticPredictor {
    fn predict(&self, scene: &SceneDescriptor, head: Point2D) -> Result<GazePrediction, GazeError> {
        check_scene(scene.width, scene.height)?;
        let (index, person) = scene
            .people
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.head.map(|h| (i, p, h.distance(&head))))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(i, p, _)| (i, p))
            .ok_or(GazeError::NoHeads)?;
        let noise = noise_distribution(self.noise_sigma)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let point = perturb(person.target, noise.as_ref(), &mut rng, scene);
        let n = self.heatmap_size;
        let (col, row) = cell_of(point, n, n, scene.width, scene.height);
        let heatmap = Heatmap::spike(n, n, col, row, 1.0)?;
        Ok(GazePrediction {
            point,
            heatmap: Some(heatmap),
        })
    }
}
