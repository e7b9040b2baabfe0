//! `jva` command-line front end.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jva_core::gaze::{decode_heatmap, GazeError};
use jva_core::io::{self, parse_stats_input, StatsInput};
use jva_core::jva::{DenominatorPolicy, JvaConfig, ScaleMode};
use jva_core::model::validate_session;
use jva_core::report::{self, Report, ReportFormat};
use jva_core::synth::{self, JvaProbability, LabelMode, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "jva", version, about = "Joint visual attention scoring for co-located teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score frames per team and produce the full report.
    Analyze(AnalyzeArgs),
    /// Inferential statistics from a per-team table or a summary fixture.
    Stats(StatsArgs),
    /// Generate synthetic frame and team tables with known JVA labels.
    Synth(SynthArgs),
    /// Decode heatmap grids to gaze points.
    Decode(DecodeArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file (directory for csv-bundle). Standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json, text or csv-bundle.
    #[arg(long)]
    format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Frame table CSV, one row per person per frame.
    #[arg(long)]
    frames: PathBuf,
    /// Team table CSV.
    #[arg(long)]
    teams: PathBuf,
    /// JVA distance threshold in pixels.
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// absolute or diagonal-normalized.
    #[arg(long)]
    scale_mode: Option<ScaleMode>,
    /// valid-pair-frames or all-captured-frames.
    #[arg(long)]
    denominator_policy: Option<DenominatorPolicy>,
    /// Diagonal in pixels at which the threshold applies unscaled.
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true)]
    reference_diagonal: Option<f64>,
    /// key=value configuration file; flags take precedence over it.
    #[arg(long, env = "JVA_CONFIG")]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Per-team result table or summary fixture.
    #[arg(long)]
    teams: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Receives frames.csv, teams.csv and ground_truth.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    teams: u32,
    #[arg(long, default_value_t = synth::DEFAULT_FRAMES_PER_TEAM as u32, value_parser = clap::value_parser!(u32).range(1..))]
    frames_per_team: u32,
    #[arg(long, default_value_t = 2560)]
    width: u32,
    #[arg(long, default_value_t = 1440)]
    height: u32,
    /// Same JVA probability for every team.
    #[arg(long, conflicts_with_all = ["jva_prob_per_condition", "jva_prob_per_team"])]
    jva_prob: Option<f64>,
    /// Probabilities for textbook, tablet and AR teams.
    #[arg(
        long,
        value_name = "TEXTBOOK,TABLET,AR",
        value_delimiter = ',',
        num_args = 3,
        conflicts_with = "jva_prob_per_team"
    )]
    jva_prob_per_condition: Option<Vec<f64>>,
    /// One probability per team.
    #[arg(long, value_name = "P,...", value_delimiter = ',')]
    jva_prob_per_team: Option<Vec<f64>>,
    /// Gaze noise standard deviation in pixels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = jva_core::jva::DEFAULT_THRESHOLD, value_parser = positive_f64)]
    threshold: f64,
    /// Place exactly round(p * frames) JVA frames instead of drawing each frame.
    #[arg(long)]
    exact_labels: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Plain-text heatmap grids.
    #[arg(required = true)]
    heatmaps: Vec<PathBuf>,
    #[arg(long, default_value_t = 2560.0, value_parser = positive_f64)]
    scene_width: f64,
    #[arg(long, default_value_t = 1440.0, value_parser = positive_f64)]
    scene_height: f64,
    /// CSV output file. Standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

enum Failure {
    Usage(String),
    Data(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Stats(args) => stats(args),
        Command::Synth(args) => run_synth(args),
        Command::Decode(args) => decode(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let mut cfg = JvaConfig::default();
    if let Some(path) = &args.config {
        io::load_config(path)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?
            .apply(&mut cfg);
    }
    if let Some(t) = args.threshold {
        cfg.threshold = t;
    }
    if let Some(d) = args.reference_diagonal {
        cfg.reference_diagonal = d;
    }
    if let Some(m) = args.scale_mode {
        cfg.scale_mode = m;
    }
    if let Some(p) = args.denominator_policy {
        cfg.denominator_policy = p;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    let metas = io::load_teams(&args.teams)?;
    let load = io::load_frames(&args.frames)?;
    let mut notes: Vec<String> = load
        .violations
        .iter()
        .map(|v| format!("frame table line {}: {} (row skipped)", v.line, v.message))
        .collect();
    let sessions = io::assemble_sessions(&metas, load.frames)?;
    for s in &sessions {
        for v in validate_session(s) {
            log::warn!("team {}: {v}", s.team_id());
            notes.push(format!("team {}: {v}", s.team_id()));
        }
    }
    let mut report = report::analyze_sessions(&sessions, &cfg);
    report.warnings.extend(notes);
    emit(&report, &args.output, ReportFormat::Json)
}

fn stats(args: StatsArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.teams).map_err(|e| format!("{}: {e}", args.teams.display()))?;
    let report = match parse_stats_input(&text)? {
        StatsInput::TeamResults(rows) => report::report_from_team_results(&rows),
        StatsInput::Summary(fixture) => report::report_from_fixture(&fixture)?,
    };
    emit(&report, &args.output, ReportFormat::Text)
}

fn emit(report: &Report, output: &OutputArgs, default: ReportFormat) -> Result<(), Failure> {
    let format = output.format.unwrap_or(default);
    match (&output.out, format) {
        (Some(dir), ReportFormat::CsvBundle) => report.write_to_dir(dir)?,
        (Some(path), _) => fs::write(path, report.render(format)?).map_err(|e| format!("{}: {e}", path.display()))?,
        (None, _) => std::io::stdout().write_all(report.render(format)?.as_bytes())?,
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Failure> {
    let jva_probability = match (args.jva_prob, args.jva_prob_per_condition, args.jva_prob_per_team) {
        (Some(p), _, _) => JvaProbability::Uniform(p),
        (_, Some(ps), _) => JvaProbability::PerCondition([ps[0], ps[1], ps[2]]),
        (_, _, Some(ps)) => JvaProbability::PerTeam(ps),
        _ => SynthSpec::default().jva_probability,
    };
    let spec = SynthSpec {
        teams: args.teams as usize,
        frames_per_team: args.frames_per_team as usize,
        image_width: args.width,
        image_height: args.height,
        jva_probability,
        label_mode: if args.exact_labels {
            LabelMode::Exact
        } else {
            LabelMode::Bernoulli
        },
        gaze_noise_sigma: args.noise,
        threshold: args.threshold,
        seed: args.seed,
        ..SynthSpec::default()
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let out = synth::generate(&spec)?;
    write_synth(&args.out_dir, &out)?;
    eprintln!(
        "wrote {} frame rows for {} teams to {}",
        out.frames.len(),
        out.teams.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn write_synth(dir: &Path, out: &synth::SynthOutput) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    io::write_frames(fs::File::create(dir.join("frames.csv"))?, &out.frames)?;
    io::write_teams(fs::File::create(dir.join("teams.csv"))?, &out.teams)?;
    let mut truth = serde_json::to_string_pretty(&out.truth)?;
    truth.push('\n');
    fs::write(dir.join("ground_truth.json"), truth)?;
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<(), Failure> {
    let mut csv = String::from("file,col,row,gaze_x,gaze_y\n");
    let mut failures = Vec::new();
    for path in &args.heatmaps {
        let decoded = io::load_heatmap(path).map_err(|e| e.to_string()).and_then(|map| {
            let (col, row) = map.argmax().ok_or(GazeError::Undecodable.to_string())?;
            let point = decode_heatmap(&map, args.scene_width, args.scene_height).map_err(|e| e.to_string())?;
            Ok((col, row, point))
        });
        match decoded {
            Ok((col, row, p)) => csv.push_str(&format!("{},{col},{row},{:.4},{:.4}\n", path.display(), p.x, p.y)),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failures.push(path.display().to_string());
            }
        }
    }
    match &args.out {
        Some(path) => fs::write(path, &csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!(
            "{} heatmap(s) could not be decoded",
            failures.len()
        )))
    }
}
