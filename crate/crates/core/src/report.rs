//! Report assembly and rendering.
//!
//! A [`Report`] is built either from scored sessions, from a per-team result
//! table, or from a published summary fixture. Rendering is deterministic:
//! blocks have a fixed order and numbers a fixed precision (2 decimals for
//! means, SDs, F and d; 3 for p; 4 for r and variance-explained measures).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::io::{IoError, SummaryFixture, TeamResultRow};
use crate::jva::{score_sessions, JvaConfig};
use crate::model::{Condition, GenderComposition, Group, TeamSession};
use crate::stats::{
    anova_from_summary, cohens_d, correlation_f, pairwise_comparisons, pearson, pooled_summary, AnovaResult,
    GroupSummary, PairwiseComparison, StatsError,
};

pub const JVA: &str = "jva_ratio_pct";
pub const POST_TEST: &str = "team_post_test";
const MEASURES: [&str; 2] = [JVA, POST_TEST];
const GROUPINGS: [&str; 3] = ["condition", "group", "gender"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    CsvBundle,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv-bundle" | "csv" => Ok(ReportFormat::CsvBundle),
            _ => Err(format!("unknown format {s:?} (expected json, text or csv-bundle)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSource {
    Sessions,
    TeamResults,
    SummaryFixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamReportRow {
    pub team_id: String,
    pub condition: Condition,
    pub group: Group,
    pub gender: GenderComposition,
    pub jva_frames: Option<usize>,
    pub denominator_frames: Option<usize>,
    pub jva_ratio_pct: Option<f64>,
    pub team_post_test: f64,
}

impl TeamReportRow {
    fn measure(&self, measure: &str) -> Option<f64> {
        match measure {
            JVA => self.jva_ratio_pct,
            _ => Some(self.team_post_test),
        }
    }

    fn label(&self, grouping: &str) -> &'static str {
        match grouping {
            "condition" => self.condition.as_str(),
            "group" => self.group.as_str(),
            "gender" => self.gender.code(),
            _ => "total",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryBlock {
    pub measure: String,
    pub grouping: String,
    pub label: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

/// Grand mean and SD rebuilt from one grouping's summaries, next to the declared total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalsCheck {
    pub measure: String,
    pub from_grouping: String,
    pub n: usize,
    pub reconstructed_mean: f64,
    pub reconstructed_sd: f64,
    pub declared_mean: Option<f64>,
    pub declared_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaBlock {
    pub measure: String,
    pub grouping: String,
    pub labels: Vec<String>,
    pub result: Option<AnovaResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectSizeBlock {
    pub measure: String,
    pub first: String,
    pub second: String,
    pub cohens_d: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostHocBlock {
    pub measure: String,
    pub grouping: String,
    pub comparisons: Vec<PairwiseComparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationBasis {
    /// Computed from per-team values.
    Raw,
    /// Derived from a reported coefficient.
    ReportedR,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationBlock {
    pub x: String,
    pub y: String,
    pub basis: CorrelationBasis,
    pub n: usize,
    pub r: f64,
    pub r_squared: f64,
    pub f_equivalent: f64,
    pub p: f64,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub team_id: String,
    pub jva_ratio_pct: f64,
    pub team_post_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxPlotBlock {
    pub measure: String,
    pub grouping: String,
    pub label: String,
    pub n: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub source: ReportSource,
    pub config: Option<JvaConfig>,
    pub teams: Vec<TeamReportRow>,
    pub summaries: Vec<SummaryBlock>,
    pub totals_check: Vec<TotalsCheck>,
    pub anovas: Vec<AnovaBlock>,
    pub effect_sizes: Vec<EffectSizeBlock>,
    pub post_hoc: Vec<PostHocBlock>,
    pub correlation: Option<CorrelationBlock>,
    pub scatter: Vec<ScatterPoint>,
    pub boxplots: Vec<BoxPlotBlock>,
    pub warnings: Vec<String>,
}

fn labels_for(grouping: &str) -> Vec<&'static str> {
    match grouping {
        "condition" => Condition::ALL.iter().map(|c| c.as_str()).collect(),
        "group" => Group::ALL.iter().map(|g| g.as_str()).collect(),
        "gender" => GenderComposition::ALL.iter().map(|g| g.code()).collect(),
        _ => vec!["total"],
    }
}

/// Score every session and build the full report. Sessions are scored in
/// parallel; the report is ordered by team id.
pub fn analyze_sessions(sessions: &[TeamSession], cfg: &JvaConfig) -> Report {
    let scored = score_sessions(sessions, cfg);
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(sessions.len());
    for (team_id, result) in scored {
        let session = sessions
            .iter()
            .find(|s| s.team_id() == &team_id)
            .expect("scored team comes from the input");
        let meta = &session.meta;
        let (jva_frames, denominator_frames, pct) = match result {
            Ok(r) => (Some(r.jva_frames), Some(r.denominator_frames), Some(r.percent())),
            Err(e) => {
                warnings.push(format!("{e}; team excluded from JVA statistics"));
                (None, None, None)
            }
        };
        rows.push(TeamReportRow {
            team_id: team_id.to_string(),
            condition: meta.condition,
            group: meta.group(),
            gender: meta.gender,
            jva_frames,
            denominator_frames,
            jva_ratio_pct: pct,
            team_post_test: meta.team_post_test(),
        });
    }
    let mut report = report_from_rows(rows, ReportSource::Sessions);
    report.config = Some(*cfg);
    report.warnings.splice(0..0, warnings);
    report
}

pub fn report_from_team_results(rows: &[TeamResultRow]) -> Report {
    let rows = rows
        .iter()
        .map(|r| TeamReportRow {
            team_id: r.team_id.clone(),
            condition: r.condition,
            group: r.group,
            gender: r.gender,
            jva_frames: None,
            denominator_frames: None,
            jva_ratio_pct: r.jva_ratio_pct,
            team_post_test: r.team_post_test,
        })
        .collect();
    report_from_rows(rows, ReportSource::TeamResults)
}

fn report_from_rows(mut rows: Vec<TeamReportRow>, source: ReportSource) -> Report {
    rows.sort_by(|a, b| a.team_id.cmp(&b.team_id));
    let mut summaries = Vec::new();
    let mut anovas = Vec::new();
    let mut effect_sizes = Vec::new();
    let mut post_hoc = Vec::new();
    let mut boxplots = Vec::new();
    let mut warnings = Vec::new();

    let values = |measure: &str, grouping: &str, label: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| grouping == "total" || r.label(grouping) == label)
            .filter_map(|r| r.measure(measure))
            .collect()
    };

    for measure in MEASURES {
        for grouping in GROUPINGS.iter().copied().chain(["total"]) {
            let mut group_summaries = Vec::new();
            for label in labels_for(grouping) {
                let v = values(measure, grouping, label);
                summaries.push(summary_block(measure, grouping, label, &v));
                boxplots.push(box_plot(measure, grouping, label, &v));
                if let Ok(s) = crate::stats::summarize(&v) {
                    group_summaries.push(s.labeled(label));
                } else if !v.is_empty() {
                    group_summaries.push(GroupSummary {
                        label: label.to_owned(),
                        n: v.len(),
                        mean: v[0],
                        sd: 0.0,
                    });
                }
            }
            if grouping == "total" {
                continue;
            }
            anovas.push(anova_block(measure, grouping, &group_summaries));
            if grouping == "group" {
                effect_sizes.push(effect_size_block(measure, &group_summaries));
            } else {
                post_hoc.push(PostHocBlock {
                    measure: measure.to_owned(),
                    grouping: grouping.to_owned(),
                    comparisons: pairwise_comparisons(&group_summaries),
                });
            }
        }
    }

    let scatter: Vec<ScatterPoint> = rows
        .iter()
        .filter_map(|r| {
            r.jva_ratio_pct.map(|j| ScatterPoint {
                team_id: r.team_id.clone(),
                jva_ratio_pct: j,
                team_post_test: r.team_post_test,
            })
        })
        .collect();
    let xs: Vec<f64> = scatter.iter().map(|p| p.jva_ratio_pct).collect();
    let ys: Vec<f64> = scatter.iter().map(|p| p.team_post_test).collect();
    let correlation = match pearson(&xs, &ys) {
        Ok(c) => Some(CorrelationBlock {
            x: JVA.into(),
            y: POST_TEST.into(),
            basis: CorrelationBasis::Raw,
            n: c.n,
            r: c.r,
            r_squared: c.r_squared,
            f_equivalent: c.f_equivalent,
            p: c.p,
            slope: Some(c.slope),
            intercept: Some(c.intercept),
        }),
        Err(e) => {
            warnings.push(format!("correlation not computed: {e}"));
            None
        }
    };

    Report {
        source,
        config: None,
        teams: rows,
        summaries,
        totals_check: Vec::new(),
        anovas,
        effect_sizes,
        post_hoc,
        correlation,
        scatter,
        boxplots,
        warnings,
    }
}

fn summary_block(measure: &str, grouping: &str, label: &str, v: &[f64]) -> SummaryBlock {
    let (mean, sd) = match crate::stats::summarize(v) {
        Ok(s) => (Some(s.mean), Some(s.sd)),
        Err(_) if v.len() == 1 => (Some(v[0]), None),
        Err(_) => (None, None),
    };
    SummaryBlock {
        measure: measure.to_owned(),
        grouping: grouping.to_owned(),
        label: label.to_owned(),
        n: v.len(),
        mean,
        sd,
    }
}

fn anova_block(measure: &str, grouping: &str, groups: &[GroupSummary]) -> AnovaBlock {
    let labels = groups.iter().map(|g| g.label.clone()).collect();
    let (result, note) = if let Some(g) = groups.iter().find(|g| g.n < 2) {
        (None, Some(format!("not computed: {} has n = {}", g.label, g.n)))
    } else {
        match anova_from_summary(groups) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(format!("not computed: {e}"))),
        }
    };
    AnovaBlock {
        measure: measure.to_owned(),
        grouping: grouping.to_owned(),
        labels,
        result,
        note,
    }
}

fn effect_size_block(measure: &str, groups: &[GroupSummary]) -> EffectSizeBlock {
    let find = |l: &str| groups.iter().find(|g| g.label == l);
    let (d, note) = match (find(Group::Control.as_str()), find(Group::Experiment.as_str())) {
        (Some(a), Some(b)) => match cohens_d(a, b) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(format!("not computed: {e}"))),
        },
        _ => (None, Some("not computed: a group is empty".to_owned())),
    };
    EffectSizeBlock {
        measure: measure.to_owned(),
        first: Group::Control.as_str().to_owned(),
        second: Group::Experiment.as_str().to_owned(),
        cohens_d: d,
        note,
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn box_plot(measure: &str, grouping: &str, label: &str, v: &[f64]) -> BoxPlotBlock {
    let mut points = v.to_vec();
    points.sort_by(f64::total_cmp);
    let stat = |q: f64| (!points.is_empty()).then(|| quantile(&points, q));
    BoxPlotBlock {
        measure: measure.to_owned(),
        grouping: grouping.to_owned(),
        label: label.to_owned(),
        n: points.len(),
        min: stat(0.0),
        q1: stat(0.25),
        median: stat(0.5),
        q3: stat(0.75),
        max: stat(1.0),
        points,
    }
}

/// Report over published `(n, M, SD)` cells. Every inferential block is
/// recomputed from the summaries; totals are rebuilt and set beside the
/// declared ones.
pub fn report_from_fixture(fixture: &SummaryFixture) -> Result<Report, StatsError> {
    let mut summaries = Vec::new();
    let mut anovas = Vec::new();
    let mut effect_sizes = Vec::new();
    let mut post_hoc = Vec::new();
    let mut totals_check = Vec::new();
    let mut warnings = Vec::new();

    let mut measures: Vec<&str> = Vec::new();
    for s in &fixture.summaries {
        if !measures.contains(&s.measure.as_str()) {
            measures.push(&s.measure);
        }
    }

    for measure in &measures {
        let rows_of = |grouping: &str| -> Vec<GroupSummary> {
            fixture
                .summaries
                .iter()
                .filter(|s| s.measure == *measure && s.grouping == grouping)
                .map(|s| GroupSummary {
                    label: s.label.clone(),
                    n: s.n,
                    mean: s.mean,
                    sd: s.sd,
                })
                .collect()
        };
        let mut groupings: Vec<&str> = Vec::new();
        for s in fixture.summaries.iter().filter(|s| s.measure == *measure) {
            if !groupings.contains(&s.grouping.as_str()) {
                groupings.push(&s.grouping);
            }
        }
        let declared_total = rows_of("total").into_iter().next();
        for grouping in &groupings {
            let groups = rows_of(grouping);
            for g in &groups {
                summaries.push(SummaryBlock {
                    measure: measure.to_string(),
                    grouping: grouping.to_string(),
                    label: g.label.clone(),
                    n: g.n,
                    mean: Some(g.mean),
                    sd: Some(g.sd),
                });
            }
            if *grouping == "total" || groups.len() < 2 {
                continue;
            }
            anovas.push(anova_block(measure, grouping, &groups));
            if *grouping == "group" {
                effect_sizes.push(effect_size_block(measure, &groups));
            } else {
                post_hoc.push(PostHocBlock {
                    measure: measure.to_string(),
                    grouping: grouping.to_string(),
                    comparisons: pairwise_comparisons(&groups),
                });
                let pooled = pooled_summary(&groups)?;
                if let Some(t) = &declared_total {
                    if t.n != pooled.n {
                        warnings.push(format!(
                            "{measure} by {grouping}: group sizes add to {}, declared total is {}",
                            pooled.n, t.n
                        ));
                    }
                }
                totals_check.push(TotalsCheck {
                    measure: measure.to_string(),
                    from_grouping: grouping.to_string(),
                    n: pooled.n,
                    reconstructed_mean: pooled.mean,
                    reconstructed_sd: pooled.sd,
                    declared_mean: declared_total.as_ref().map(|t| t.mean),
                    declared_sd: declared_total.as_ref().map(|t| t.sd),
                });
            }
        }
    }

    let correlation = match fixture.correlations.first() {
        Some(c) => {
            let (f, p) = correlation_f(c.r, c.n)?;
            Some(CorrelationBlock {
                x: c.x.clone(),
                y: c.y.clone(),
                basis: CorrelationBasis::ReportedR,
                n: c.n,
                r: c.r,
                r_squared: c.r * c.r,
                f_equivalent: f,
                p,
                slope: None,
                intercept: None,
            })
        }
        None => None,
    };

    Ok(Report {
        source: ReportSource::SummaryFixture,
        config: None,
        teams: Vec::new(),
        summaries,
        totals_check,
        anovas,
        effect_sizes,
        post_hoc,
        correlation,
        scatter: Vec::new(),
        boxplots: Vec::new(),
        warnings,
    })
}

fn num(v: f64, decimals: usize) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{v:.decimals$}")
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| num(v, decimals))
}

fn mean_sd(mean: Option<f64>, sd: Option<f64>) -> String {
    match (mean, sd) {
        (Some(m), Some(s)) => format!("{} ± {}", num(m, 2), num(s, 2)),
        (Some(m), None) => num(m, 2),
        _ => "NA".to_owned(),
    }
}

fn measure_title(measure: &str) -> &str {
    match measure {
        JVA => "JVA ratio (%)",
        POST_TEST => "team post-test",
        other => other,
    }
}

fn anova_line(r: &AnovaResult) -> String {
    format!(
        "F({},{}) = {}, p = {}, eta² = {}, omega² = {}",
        r.df_between,
        r.df_within,
        num(r.f, 2),
        num(r.p, 3),
        num(r.eta_squared, 4),
        num(r.omega_squared, 4)
    )
}

impl Report {
    pub fn to_json(&self) -> Result<String, IoError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "JVA collaboration report");
        let source = match self.source {
            ReportSource::Sessions => "frame-level analysis",
            ReportSource::TeamResults => "per-team results",
            ReportSource::SummaryFixture => "summary statistics",
        };
        let _ = writeln!(w, "source: {source}");
        if let Some(c) = &self.config {
            let _ = writeln!(
                w,
                "threshold: {} px ({}), reference diagonal: {} px, denominator: {}",
                num(c.threshold, 2),
                c.scale_mode,
                num(c.reference_diagonal, 2),
                c.denominator_policy
            );
        }

        if self.source != ReportSource::SummaryFixture {
            let _ = writeln!(w, "\nPer-team results");
            let _ = writeln!(
                w,
                "{:<12} {:<9} {:<10} {:<6} {:>7} {:>9} {:>9}",
                "team", "condition", "group", "gender", "frames", "JVA (%)", "post-test"
            );
            for t in &self.teams {
                let frames = match (t.jva_frames, t.denominator_frames) {
                    (Some(j), Some(d)) => format!("{j}/{d}"),
                    _ => "NA".to_owned(),
                };
                let _ = writeln!(
                    w,
                    "{:<12} {:<9} {:<10} {:<6} {:>7} {:>9} {:>9}",
                    t.team_id,
                    t.condition.as_str(),
                    t.group.as_str(),
                    t.gender.code(),
                    frames,
                    opt(t.jva_ratio_pct, 2),
                    num(t.team_post_test, 2)
                );
            }
            if self.teams.is_empty() {
                let _ = writeln!(w, "(no teams)");
            }
        }

        let _ = writeln!(w, "\nDescriptive statistics (M ± SD)");
        let _ = writeln!(
            w,
            "{:<10} {:<11} {:>5}  {:<18} {:<18}",
            "grouping",
            "label",
            "n",
            measure_title(JVA),
            measure_title(POST_TEST)
        );
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for s in &self.summaries {
            if !keys.contains(&(s.grouping.as_str(), s.label.as_str())) {
                keys.push((&s.grouping, &s.label));
            }
        }
        for (grouping, label) in keys {
            let find = |m: &str| {
                self.summaries
                    .iter()
                    .find(|s| s.measure == m && s.grouping == grouping && s.label == label)
            };
            let (jva, post) = (find(JVA), find(POST_TEST));
            let n = match (jva.map(|s| s.n), post.map(|s| s.n)) {
                (Some(a), Some(b)) if a != b => format!("{a}/{b}"),
                (Some(a), _) | (None, Some(a)) => a.to_string(),
                (None, None) => "0".to_owned(),
            };
            let cell = |s: Option<&SummaryBlock>| s.map_or_else(|| "NA".to_owned(), |s| mean_sd(s.mean, s.sd));
            let _ = writeln!(
                w,
                "{:<10} {:<11} {:>5}  {:<18} {:<18}",
                grouping,
                label,
                n,
                cell(jva),
                cell(post)
            );
        }

        if !self.totals_check.is_empty() {
            let _ = writeln!(w, "\nTotals rebuilt from group summaries");
            for t in &self.totals_check {
                let _ = writeln!(
                    w,
                    "{} from {}: n = {}, {} (declared {})",
                    t.measure,
                    t.from_grouping,
                    t.n,
                    mean_sd(Some(t.reconstructed_mean), Some(t.reconstructed_sd)),
                    mean_sd(t.declared_mean, t.declared_sd)
                );
            }
        }

        let _ = writeln!(w, "\nOne-way ANOVA");
        for a in &self.anovas {
            let body = match (&a.result, &a.note) {
                (Some(r), _) => anova_line(r),
                (None, Some(n)) => n.clone(),
                (None, None) => "not computed".to_owned(),
            };
            let _ = writeln!(w, "{} by {}: {}", a.measure, a.grouping, body);
        }

        if !self.effect_sizes.is_empty() {
            let _ = writeln!(w, "\nEffect sizes");
            for e in &self.effect_sizes {
                let body = match (e.cohens_d, &e.note) {
                    (Some(d), _) => format!("Cohen's d = {}", num(d, 2)),
                    (None, Some(n)) => n.clone(),
                    (None, None) => "not computed".to_owned(),
                };
                let _ = writeln!(w, "{} {} vs {}: {}", e.measure, e.first, e.second, body);
            }
        }

        if self.post_hoc.iter().any(|p| !p.comparisons.is_empty()) {
            let _ = writeln!(w, "\nPost-hoc pairwise comparisons (uncorrected)");
            for block in &self.post_hoc {
                for c in &block.comparisons {
                    let anova = c.anova.as_ref().map_or_else(
                        || "F not computed".to_owned(),
                        |r| {
                            format!(
                                "F({},{}) = {}, p = {}",
                                r.df_between,
                                r.df_within,
                                num(r.f, 2),
                                num(r.p, 3)
                            )
                        },
                    );
                    let _ = writeln!(
                        w,
                        "{} by {}: {} vs {}: d = {}, {}",
                        block.measure,
                        block.grouping,
                        c.first,
                        c.second,
                        opt(c.cohens_d, 2),
                        anova
                    );
                }
            }
        }

        let _ = writeln!(w, "\nCorrelation");
        match &self.correlation {
            Some(c) => {
                let _ = write!(
                    w,
                    "{} ~ {}: r({}) = {}, r² = {}, F(1,{}) = {}, p = {}",
                    c.x,
                    c.y,
                    c.n,
                    num(c.r, 4),
                    num(c.r_squared, 4),
                    c.n.saturating_sub(2),
                    num(c.f_equivalent, 2),
                    num(c.p, 3)
                );
                if let (Some(s), Some(i)) = (c.slope, c.intercept) {
                    let _ = write!(w, ", slope = {}, intercept = {}", num(s, 4), num(i, 4));
                }
                let _ = writeln!(w);
            }
            None => {
                let _ = writeln!(w, "not computed");
            }
        }

        if !self.boxplots.is_empty() {
            let _ = writeln!(w, "\nBox plots (min / Q1 / median / Q3 / max)");
            for b in self.boxplots.iter().filter(|b| b.grouping != "total") {
                let _ = writeln!(
                    w,
                    "{} by {} [{}] n = {}: {} / {} / {} / {} / {}",
                    b.measure,
                    b.grouping,
                    b.label,
                    b.n,
                    opt(b.min, 2),
                    opt(b.q1, 2),
                    opt(b.median, 2),
                    opt(b.q3, 2),
                    opt(b.max, 2)
                );
            }
        }

        if !self.warnings.is_empty() {
            let _ = writeln!(w, "\nWarnings");
            for warning in &self.warnings {
                let _ = writeln!(w, "- {warning}");
            }
        }
        let mut text: String = out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
        text.push('\n');
        text
    }

    /// Per-team rows in the format `stats` reads back.
    pub fn teams_csv(&self) -> Result<String, IoError> {
        let mut w = csv_string_writer();
        w.write_record([
            "team_id",
            "condition",
            "group",
            "gender",
            "jva_frames",
            "denominator_frames",
            "jva_ratio_pct",
            "team_post_test",
        ])?;
        for t in &self.teams {
            w.write_record([
                t.team_id.clone(),
                t.condition.as_str().to_owned(),
                t.group.as_str().to_owned(),
                t.gender.code().to_owned(),
                t.jva_frames.map(|v| v.to_string()).unwrap_or_default(),
                t.denominator_frames.map(|v| v.to_string()).unwrap_or_default(),
                t.jva_ratio_pct.map(|v| v.to_string()).unwrap_or_default(),
                t.team_post_test.to_string(),
            ])?;
        }
        finish(w)
    }

    /// `(file name, contents)` for every file of the CSV bundle, in a fixed order.
    pub fn csv_bundle(&self) -> Result<Vec<(&'static str, String)>, IoError> {
        let mut files = vec![("teams.csv", self.teams_csv()?)];

        let mut w = csv_string_writer();
        w.write_record(["measure", "grouping", "label", "n", "mean", "sd"])?;
        for s in &self.summaries {
            w.write_record([
                s.measure.clone(),
                s.grouping.clone(),
                s.label.clone(),
                s.n.to_string(),
                opt(s.mean, 2),
                opt(s.sd, 2),
            ])?;
        }
        files.push(("summaries.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record([
            "measure",
            "grouping",
            "df_between",
            "df_within",
            "f",
            "p",
            "eta_squared",
            "omega_squared",
            "note",
        ])?;
        for a in &self.anovas {
            let r = a.result.as_ref();
            w.write_record([
                a.measure.clone(),
                a.grouping.clone(),
                r.map(|r| r.df_between.to_string()).unwrap_or_default(),
                r.map(|r| r.df_within.to_string()).unwrap_or_default(),
                opt(r.map(|r| r.f), 2),
                opt(r.map(|r| r.p), 3),
                opt(r.map(|r| r.eta_squared), 4),
                opt(r.map(|r| r.omega_squared), 4),
                a.note.clone().unwrap_or_default(),
            ])?;
        }
        files.push(("anova.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record(["measure", "first", "second", "cohens_d", "note"])?;
        for e in &self.effect_sizes {
            w.write_record([
                e.measure.clone(),
                e.first.clone(),
                e.second.clone(),
                opt(e.cohens_d, 2),
                e.note.clone().unwrap_or_default(),
            ])?;
        }
        files.push(("effect_sizes.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record([
            "measure",
            "grouping",
            "first",
            "second",
            "cohens_d",
            "f",
            "p",
            "correction",
        ])?;
        for block in &self.post_hoc {
            for c in &block.comparisons {
                w.write_record([
                    block.measure.clone(),
                    block.grouping.clone(),
                    c.first.clone(),
                    c.second.clone(),
                    opt(c.cohens_d, 2),
                    opt(c.anova.as_ref().map(|a| a.f), 2),
                    opt(c.anova.as_ref().map(|a| a.p), 3),
                    c.correction.clone(),
                ])?;
            }
        }
        files.push(("post_hoc.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record([
            "x",
            "y",
            "n",
            "r",
            "r_squared",
            "f_equivalent",
            "p",
            "slope",
            "intercept",
        ])?;
        if let Some(c) = &self.correlation {
            w.write_record([
                c.x.clone(),
                c.y.clone(),
                c.n.to_string(),
                num(c.r, 4),
                num(c.r_squared, 4),
                num(c.f_equivalent, 2),
                num(c.p, 3),
                opt(c.slope, 4),
                opt(c.intercept, 4),
            ])?;
        }
        files.push(("correlation.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record(["team_id", "jva_ratio_pct", "team_post_test"])?;
        for p in &self.scatter {
            w.write_record([
                p.team_id.clone(),
                p.jva_ratio_pct.to_string(),
                p.team_post_test.to_string(),
            ])?;
        }
        files.push(("scatter.csv", finish(w)?));

        let mut w = csv_string_writer();
        w.write_record(["measure", "grouping", "label", "n", "min", "q1", "median", "q3", "max"])?;
        for b in &self.boxplots {
            w.write_record([
                b.measure.clone(),
                b.grouping.clone(),
                b.label.clone(),
                b.n.to_string(),
                opt(b.min, 2),
                opt(b.q1, 2),
                opt(b.median, 2),
                opt(b.q3, 2),
                opt(b.max, 2),
            ])?;
        }
        files.push(("boxplots.csv", finish(w)?));
        Ok(files)
    }

    /// Render to a single stream. The CSV bundle is a directory, see [`Report::write_to_dir`].
    pub fn render(&self, format: ReportFormat) -> Result<String, IoError> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Text => Ok(self.to_text()),
            ReportFormat::CsvBundle => Ok(self
                .csv_bundle()?
                .into_iter()
                .map(|(name, body)| format!("# {name}\n{body}"))
                .collect::<Vec<_>>()
                .join("\n")),
        }
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<(), IoError> {
        fs::create_dir_all(dir)?;
        for (name, body) in self.csv_bundle()? {
            fs::File::create(dir.join(name))?.write_all(body.as_bytes())?;
        }
        Ok(())
    }
}

fn csv_string_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, IoError> {
    let bytes = w.into_inner().map_err(|e| IoError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8 from utf-8 input"))
}
