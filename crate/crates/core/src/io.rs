//! File formats: frame table, team table, per-team result table, summary
//! fixtures, heatmap grids and `key=value` configuration.
//!
//! All CSV inputs are UTF-8 with a mandatory header row; lines starting with
//! `#` are comments. Headers are matched by name, so column order is free and
//! optional columns may be omitted.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaze::{GazeError, Heatmap};
use crate::jva::{DenominatorPolicy, JvaConfig, JvaError, ScaleMode};
use crate::model::{
    Condition, DiscardReason, FrameRecord, GazeObservation, GenderComposition, Group, ModelError, PersonId, Point2D,
    TeamId, TeamMeta, TeamSession, SCORE_MAX, SCORE_MIN,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("missing header row")]
    MissingHeader,
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {column} from {value:?}")]
    Parse {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("line {line}: {source}")]
    Vocabulary {
        line: u64,
        #[source]
        source: ModelError,
    },
    #[error("heatmap: {source}")]
    Heatmap {
        #[source]
        source: GazeError,
    },
    #[error("config line {line}: {message}")]
    Config { line: u64, message: String },
    #[error("frames reference team {0} which is not in the team table")]
    UnknownTeam(TeamId),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        IoError::Csv { line, source: e }
    }
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::Open {
        path: path.to_owned(),
        source,
    })
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader)
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// Column lookup by header name.
struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn from_headers<R: Read>(reader: &mut csv::Reader<R>) -> Result<Self, IoError> {
        let headers = reader.headers()?;
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(IoError::MissingHeader);
        }
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
            .collect();
        Ok(Self { index })
    }

    fn require(&self, names: &[&'static str]) -> Result<(), IoError> {
        match names.iter().find(|n| !self.index.contains_key(**n)) {
            Some(n) => Err(IoError::MissingColumn(n)),
            None => Ok(()),
        }
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index
            .get(name)
            .and_then(|&i| record.get(i))
            .filter(|s| !s.is_empty())
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: std::str::FromStr>(
    cols: &Columns,
    record: &csv::StringRecord,
    name: &'static str,
) -> Result<T, IoError> {
    let raw = cols.get(record, name).unwrap_or("");
    raw.parse().map_err(|_| IoError::Parse {
        line: line_of(record),
        column: name,
        value: raw.to_owned(),
    })
}

fn parse_optional<T: std::str::FromStr>(
    cols: &Columns,
    record: &csv::StringRecord,
    name: &'static str,
) -> Result<Option<T>, IoError> {
    match cols.get(record, name) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| IoError::Parse {
            line: line_of(record),
            column: name,
            value: raw.to_owned(),
        }),
    }
}

/// One row of the frame table: one person in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub team_id: String,
    pub frame_id: String,
    pub timestamp_s: f64,
    pub image_w: u32,
    pub image_h: u32,
    pub person_id: String,
    pub gaze_x: f64,
    pub gaze_y: f64,
    pub head_x: Option<f64>,
    pub head_y: Option<f64>,
    pub confidence: Option<f64>,
    pub discarded: u8,
}

/// A row that was read but not used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowViolation {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FrameLoad {
    pub frames: BTreeMap<TeamId, Vec<FrameRecord>>,
    pub violations: Vec<RowViolation>,
    pub rows_read: usize,
}

impl FrameLoad {
    pub fn observation_count(&self) -> usize {
        self.frames.values().flatten().map(|f| f.observations.len()).sum()
    }
}

const FRAME_COLUMNS: [&str; 9] = [
    "team_id",
    "frame_id",
    "timestamp_s",
    "image_w",
    "image_h",
    "person_id",
    "gaze_x",
    "gaze_y",
    "discarded",
];

pub fn load_frames(path: &Path) -> Result<FrameLoad, IoError> {
    parse_frames(open(path)?)
}

/// Frames grouped per team and sorted by timestamp. Rows with out-of-range
/// values are skipped and reported in [`FrameLoad::violations`].
pub fn parse_frames<R: Read>(reader: R) -> Result<FrameLoad, IoError> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(&mut rdr)?;
    cols.require(&FRAME_COLUMNS)?;

    let mut load = FrameLoad::default();
    // Frames per team in order of first appearance, plus the line that opened each.
    let mut builders: BTreeMap<TeamId, Vec<(FrameRecord, u64)>> = BTreeMap::new();
    let mut frame_index: HashMap<(TeamId, String), usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        load.rows_read += 1;
        let line = line_of(&record);
        let team_id = TeamId::new(cols.get(&record, "team_id").unwrap_or(""));
        let frame_id: String = cols.get(&record, "frame_id").unwrap_or("").to_owned();
        let person_id = cols.get(&record, "person_id").unwrap_or("").to_owned();
        if team_id.as_str().is_empty() || frame_id.is_empty() || person_id.is_empty() {
            return Err(IoError::Invalid {
                line,
                message: "team_id, frame_id and person_id must be non-empty".into(),
            });
        }
        let timestamp: f64 = parse_field(&cols, &record, "timestamp_s")?;
        let image_w: u32 = parse_field(&cols, &record, "image_w")?;
        let image_h: u32 = parse_field(&cols, &record, "image_h")?;
        let gaze = Point2D::new(
            parse_field(&cols, &record, "gaze_x")?,
            parse_field(&cols, &record, "gaze_y")?,
        );
        let head_x: Option<f64> = parse_optional(&cols, &record, "head_x")?;
        let head_y: Option<f64> = parse_optional(&cols, &record, "head_y")?;
        let confidence: Option<f64> = parse_optional(&cols, &record, "confidence")?;
        let discarded = match cols.get(&record, "discarded").unwrap_or("") {
            "0" => false,
            "1" => true,
            other => {
                return Err(IoError::Parse {
                    line,
                    column: "discarded",
                    value: other.to_owned(),
                })
            }
        };
        let reason = if discarded {
            let raw = cols.get(&record, "discard_reason").unwrap_or("");
            Some(
                raw.parse::<DiscardReason>()
                    .map_err(|source| IoError::Vocabulary { line, source })?,
            )
        } else {
            None
        };

        let mut violate = |message: String| load.violations.push(RowViolation { line, message });
        if !timestamp.is_finite() {
            violate(format!("timestamp {timestamp} is not finite"));
            continue;
        }
        if image_w == 0 || image_h == 0 {
            violate(format!("image size {image_w}x{image_h} must be positive"));
            continue;
        }
        if !gaze.within(f64::from(image_w), f64::from(image_h)) {
            violate(format!(
                "gaze ({}, {}) of {person_id} outside the {image_w}x{image_h} image",
                gaze.x, gaze.y
            ));
            continue;
        }
        let head = match (head_x, head_y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some(Point2D::new(x, y)),
            (None, None) => None,
            _ => {
                violate("head_x and head_y must both be present and finite".into());
                continue;
            }
        };
        let confidence = confidence.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&confidence) {
            violate(format!("confidence {confidence} outside [0, 1]"));
            continue;
        }

        let team_frames = builders.entry(team_id.clone()).or_default();
        let frame = match frame_index.get(&(team_id.clone(), frame_id.clone())).copied() {
            Some(i) => {
                let (f, first_line) = &mut team_frames[i];
                if f.timestamp != timestamp || f.image_width != image_w || f.image_height != image_h {
                    violate(format!("frame {frame_id} metadata disagrees with line {first_line}"));
                    continue;
                }
                if f.discard.is_some() != discarded {
                    violate(format!(
                        "frame {frame_id} discard flag disagrees with line {first_line}"
                    ));
                    continue;
                }
                if f.observations.iter().any(|o| o.person_id.as_str() == person_id) {
                    violate(format!("person {person_id} appears twice in frame {frame_id}"));
                    continue;
                }
                f
            }
            None => {
                frame_index.insert((team_id, frame_id.clone()), team_frames.len());
                let mut f = FrameRecord::new(frame_id, timestamp, image_w, image_h);
                f.discard = reason;
                team_frames.push((f, line));
                &mut team_frames.last_mut().expect("just pushed").0
            }
        };
        frame.observations.push(GazeObservation {
            person_id: PersonId(person_id),
            gaze,
            head,
            confidence,
        });
    }

    for v in &load.violations {
        log::warn!("frame table line {}: {} (row skipped)", v.line, v.message);
    }
    for (team, mut frames) in builders {
        frames.sort_by(|a, b| a.0.timestamp.total_cmp(&b.0.timestamp));
        load.frames.insert(team, frames.into_iter().map(|(f, _)| f).collect());
    }
    Ok(load)
}

pub fn write_frames<W: Write>(writer: W, rows: &[FrameRow]) -> Result<(), IoError> {
    let mut w = csv_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the team table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRow {
    pub team_id: String,
    pub condition: String,
    pub gender: String,
    pub post_test_1: f64,
    pub post_test_2: f64,
}

pub fn load_teams(path: &Path) -> Result<BTreeMap<TeamId, TeamMeta>, IoError> {
    parse_teams(open(path)?)
}

pub fn parse_teams<R: Read>(reader: R) -> Result<BTreeMap<TeamId, TeamMeta>, IoError> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(&mut rdr)?;
    cols.require(&["team_id", "condition", "gender", "post_test_1", "post_test_2"])?;
    let mut out = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = line_of(&record);
        let team_id = TeamId::new(cols.get(&record, "team_id").unwrap_or(""));
        if team_id.as_str().is_empty() {
            return Err(IoError::Invalid {
                line,
                message: "empty team_id".into(),
            });
        }
        let condition: Condition = cols
            .get(&record, "condition")
            .unwrap_or("")
            .parse()
            .map_err(|source| IoError::Vocabulary { line, source })?;
        let gender: GenderComposition = cols
            .get(&record, "gender")
            .unwrap_or("")
            .parse()
            .map_err(|source| IoError::Vocabulary { line, source })?;
        let scores = [
            parse_field::<f64>(&cols, &record, "post_test_1")?,
            parse_field::<f64>(&cols, &record, "post_test_2")?,
        ];
        if let Some(s) = scores.iter().find(|s| !(SCORE_MIN..=SCORE_MAX).contains(*s)) {
            return Err(IoError::Invalid {
                line,
                message: format!("post-test score {s} out of [0,5] for team {team_id}"),
            });
        }
        if out.contains_key(&team_id) {
            return Err(IoError::Invalid {
                line,
                message: format!("duplicate team {team_id}"),
            });
        }
        out.insert(
            team_id.clone(),
            TeamMeta {
                team_id,
                condition,
                gender,
                post_test_scores: scores,
            },
        );
    }
    Ok(out)
}

pub fn write_teams<W: Write>(writer: W, rows: &[TeamRow]) -> Result<(), IoError> {
    let mut w = csv_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Join frames with team metadata. Teams without frames get an empty session;
/// frames of teams missing from the metadata are an error.
pub fn assemble_sessions(
    metas: &BTreeMap<TeamId, TeamMeta>,
    mut frames: BTreeMap<TeamId, Vec<FrameRecord>>,
) -> Result<Vec<TeamSession>, IoError> {
    if let Some(unknown) = frames.keys().find(|t| !metas.contains_key(*t)) {
        return Err(IoError::UnknownTeam(unknown.clone()));
    }
    Ok(metas
        .values()
        .map(|m| TeamSession::new(m.clone(), frames.remove(&m.team_id).unwrap_or_default()))
        .collect())
}

/// Per-team analysis result, the input of the `stats` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamResultRow {
    pub team_id: String,
    pub condition: Condition,
    pub group: Group,
    pub gender: GenderComposition,
    pub jva_ratio_pct: Option<f64>,
    pub team_post_test: f64,
}

pub fn parse_team_results<R: Read>(reader: R) -> Result<Vec<TeamResultRow>, IoError> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(&mut rdr)?;
    cols.require(&["team_id", "condition", "gender", "jva_ratio_pct", "team_post_test"])?;
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = line_of(&record);
        let condition: Condition = cols
            .get(&record, "condition")
            .unwrap_or("")
            .parse()
            .map_err(|source| IoError::Vocabulary { line, source })?;
        if let Some(raw) = cols.get(&record, "group") {
            let group: Group = raw.parse().map_err(|source| IoError::Vocabulary { line, source })?;
            if group != condition.group() {
                return Err(IoError::Invalid {
                    line,
                    message: format!("group {group} does not match condition {condition}"),
                });
            }
        }
        let gender = cols
            .get(&record, "gender")
            .unwrap_or("")
            .parse()
            .map_err(|source| IoError::Vocabulary { line, source })?;
        let jva: Option<f64> = parse_optional(&cols, &record, "jva_ratio_pct")?;
        if let Some(j) = jva.filter(|j| !(0.0..=100.0).contains(j)) {
            return Err(IoError::Invalid {
                line,
                message: format!("jva_ratio_pct {j} outside [0, 100]"),
            });
        }
        let post: f64 = parse_field(&cols, &record, "team_post_test")?;
        if !(SCORE_MIN..=SCORE_MAX).contains(&post) {
            return Err(IoError::Invalid {
                line,
                message: format!("team_post_test {post} out of [0,5]"),
            });
        }
        out.push(TeamResultRow {
            team_id: cols.get(&record, "team_id").unwrap_or("").to_owned(),
            condition,
            group: condition.group(),
            gender,
            jva_ratio_pct: jva,
            team_post_test: post,
        });
    }
    out.sort_by(|a, b| a.team_id.cmp(&b.team_id));
    Ok(out)
}

/// One `(n, M, SD)` cell of a published summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSummary {
    pub measure: String,
    pub grouping: String,
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// A published correlation between two measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCorrelation {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryFixture {
    pub summaries: Vec<FixtureSummary>,
    pub correlations: Vec<FixtureCorrelation>,
}

/// Summary fixture columns: `kind,measure,grouping,label,n,mean,sd,r`.
/// `kind` is `summary` (uses mean/sd) or `correlation` (uses r; `measure`
/// holds `x~y`).
pub fn parse_summary_fixture<R: Read>(reader: R) -> Result<SummaryFixture, IoError> {
    let mut rdr = csv_reader(reader);
    let cols = Columns::from_headers(&mut rdr)?;
    cols.require(&["kind", "measure", "grouping", "label", "n"])?;
    let mut out = SummaryFixture::default();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = line_of(&record);
        let text = |name| cols.get(&record, name).unwrap_or("").to_owned();
        let n: usize = parse_field(&cols, &record, "n")?;
        match text("kind").to_ascii_lowercase().as_str() {
            "summary" => {
                let mean: f64 = parse_field(&cols, &record, "mean")?;
                let sd: f64 = parse_field(&cols, &record, "sd")?;
                if !mean.is_finite() || !sd.is_finite() || sd < 0.0 || n == 0 {
                    return Err(IoError::Invalid {
                        line,
                        message: format!("invalid summary n={n} mean={mean} sd={sd}"),
                    });
                }
                out.summaries.push(FixtureSummary {
                    measure: text("measure"),
                    grouping: text("grouping").to_ascii_lowercase(),
                    label: text("label"),
                    n,
                    mean,
                    sd,
                });
            }
            "correlation" => {
                let r: f64 = parse_field(&cols, &record, "r")?;
                let measure = text("measure");
                let (x, y) = measure.split_once('~').ok_or_else(|| IoError::Invalid {
                    line,
                    message: format!("correlation measure {measure:?} must look like x~y"),
                })?;
                if !(-1.0..=1.0).contains(&r) {
                    return Err(IoError::Invalid {
                        line,
                        message: format!("r = {r} outside [-1, 1]"),
                    });
                }
                out.correlations.push(FixtureCorrelation {
                    x: x.trim().to_owned(),
                    y: y.trim().to_owned(),
                    n,
                    r,
                });
            }
            other => {
                return Err(IoError::Invalid {
                    line,
                    message: format!("unknown row kind {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// What a `stats` input file contains, decided from its header.
#[derive(Debug, Clone, PartialEq)]
pub enum StatsInput {
    TeamResults(Vec<TeamResultRow>),
    Summary(SummaryFixture),
}

pub fn parse_stats_input(text: &str) -> Result<StatsInput, IoError> {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or(IoError::MissingHeader)?;
    let is_fixture = header.split(',').any(|c| c.trim().eq_ignore_ascii_case("kind"));
    if is_fixture {
        parse_summary_fixture(text.as_bytes()).map(StatsInput::Summary)
    } else {
        parse_team_results(text.as_bytes()).map(StatsInput::TeamResults)
    }
}

/// Plain-text heatmap: one row per line, values separated by whitespace or
/// commas. Blank lines and `#` comments are ignored.
pub fn parse_heatmap_grid(text: &str) -> Result<Heatmap, IoError> {
    let mut width = None;
    let mut values = Vec::new();
    let mut height = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let row: Vec<f64> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| IoError::Parse {
                    line,
                    column: "heatmap value",
                    value: t.to_owned(),
                })
            })
            .collect::<Result<_, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(IoError::Invalid {
                    line,
                    message: format!("row has {} values, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let width = width.ok_or(IoError::Heatmap {
        source: GazeError::EmptyGrid(0, 0),
    })?;
    Heatmap::new(width, height, values).map_err(|source| IoError::Heatmap { source })
}

pub fn load_heatmap(path: &Path) -> Result<Heatmap, IoError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    parse_heatmap_grid(&text)
}

/// `key=value` overrides for [`JvaConfig`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub threshold: Option<f64>,
    pub reference_diagonal: Option<f64>,
    pub scale_mode: Option<ScaleMode>,
    pub denominator_policy: Option<DenominatorPolicy>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut JvaConfig) {
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(d) = self.reference_diagonal {
            cfg.reference_diagonal = d;
        }
        if let Some(m) = self.scale_mode {
            cfg.scale_mode = m;
        }
        if let Some(p) = self.denominator_policy {
            cfg.denominator_policy = p;
        }
    }
}

pub fn parse_config(text: &str) -> Result<ConfigOverrides, IoError> {
    let mut out = ConfigOverrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| IoError::Config { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {content:?}")))?;
        let (key, value) = (key.trim().to_ascii_lowercase().replace('-', "_"), value.trim());
        let number = || -> Result<f64, IoError> {
            let v: f64 = value
                .parse()
                .map_err(|_| err(format!("{key}: not a number: {value:?}")))?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(err(format!("{key} must be positive, got {value}")))
            }
        };
        let jva_err = |e: JvaError| err(e.to_string());
        match key.as_str() {
            "threshold" => out.threshold = Some(number()?),
            "reference_diagonal" => out.reference_diagonal = Some(number()?),
            "scale_mode" => out.scale_mode = Some(value.parse().map_err(jva_err)?),
            "denominator_policy" => out.denominator_policy = Some(value.parse().map_err(jva_err)?),
            _ => return Err(err(format!("unknown key {key:?}"))),
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<ConfigOverrides, IoError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    parse_config(&text)
}
