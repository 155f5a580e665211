use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Group, TaskRecord, UiType, APPLICATIONS};
use super::runner::ResultRecord;

pub const EMPTY_CELL: &str = "—";

/// Correct and total task counts of one report cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub correct: u64,
    pub total: u64,
}

impl Counts {
    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as u64;
    }

    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            correct: self.correct + other.correct,
            total: self.total + other.total,
        }
    }

    /// Exact accuracy; `None` for an empty cell.
    pub fn ratio(&self) -> Option<Ratio<u64>> {
        (self.total > 0).then(|| Ratio::new(self.correct, self.total))
    }
}

/// Percentage with one decimal, rounded half away from zero.
pub fn format_percent(r: Ratio<u64>) -> String {
    let (n, d) = (*r.numer() as u128, *r.denom() as u128);
    let tenths = (2 * n * 1000 + d) / (2 * d);
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn cell(r: Option<Ratio<u64>>) -> String {
    r.map(format_percent).unwrap_or_else(|| EMPTY_CELL.to_string())
}

/// How "Avg" cells are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Correct over total across all tasks of the block.
    #[default]
    Micro,
    /// Unweighted mean of the populated cells of the block.
    Macro,
}

fn mean(values: &[Option<Ratio<u64>>]) -> Option<Ratio<u64>> {
    let present: Vec<Ratio<u64>> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let sum = present.iter().fold(Ratio::from_integer(0u64), |a, b| a + b);
    Some(sum / Ratio::from_integer(present.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub grounder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<String>,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub averaging: Averaging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRow {
    pub code: String,
    pub group: Group,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: Group,
    pub text: Counts,
    pub icon: Counts,
}

impl GroupRow {
    pub fn all(&self) -> Counts {
        self.text.merge(self.icon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: ReportMeta,
    /// Every known application, in column order.
    pub applications: Vec<AppRow>,
    /// Every group, in column order.
    pub groups: Vec<GroupRow>,
    pub text: Counts,
    pub icon: Counts,
    /// Number of results per termination reason.
    pub terminations: BTreeMap<String, u64>,
}

impl Report {
    pub fn overall(&self) -> Counts {
        self.text.merge(self.icon)
    }

    fn app_avg(&self) -> Option<Ratio<u64>> {
        match self.meta.averaging {
            Averaging::Micro => self.overall().ratio(),
            Averaging::Macro => mean(&self.applications.iter().map(|a| a.counts.ratio()).collect::<Vec<_>>()),
        }
    }

    pub fn group_avg(&self, g: &GroupRow) -> Option<Ratio<u64>> {
        match self.meta.averaging {
            Averaging::Micro => g.all().ratio(),
            Averaging::Macro => mean(&[g.text.ratio(), g.icon.ratio()]),
        }
    }

    /// Overall average of the text/icon breakdown.
    pub fn overall_avg(&self) -> Option<Ratio<u64>> {
        match self.meta.averaging {
            Averaging::Micro => self.overall().ratio(),
            Averaging::Macro => mean(&[self.text.ratio(), self.icon.ratio()]),
        }
    }

    /// The `(text, icon, avg)` accuracy triple, formatted.
    pub fn overall_triple(&self) -> (String, String, String) {
        (cell(self.text.ratio()), cell(self.icon.ratio()), cell(self.overall_avg()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("result for unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{task}` has unknown application `{code}`")]
    UnknownApplication { task: String, code: String },
}

/// Tallies results into report cells. Cell values are exact; rounding
/// happens only when the report is emitted.
pub fn aggregate(results: &[ResultRecord], tasks: &[TaskRecord], meta: ReportMeta) -> Result<Report, ReportError> {
    let by_id: HashMap<&str, &TaskRecord> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut apps: Vec<AppRow> = APPLICATIONS
        .iter()
        .map(|a| AppRow {
            code: a.code.to_string(),
            group: a.group,
            counts: Counts::default(),
        })
        .collect();
    let mut groups: Vec<GroupRow> = Group::ALL
        .iter()
        .map(|&group| GroupRow {
            group,
            text: Counts::default(),
            icon: Counts::default(),
        })
        .collect();
    let mut text = Counts::default();
    let mut icon = Counts::default();
    let mut terminations = BTreeMap::new();
    for r in results {
        let t = by_id
            .get(r.task_id.as_str())
            .ok_or_else(|| ReportError::UnknownTask(r.task_id.clone()))?;
        let app = apps
            .iter_mut()
            .find(|a| a.code == t.application)
            .ok_or_else(|| ReportError::UnknownApplication {
                task: t.id.clone(),
                code: t.application.clone(),
            })?;
        app.counts.add(r.correct);
        let g = groups.iter_mut().find(|g| g.group == t.group).expect("every group has a row");
        match t.ui_type {
            UiType::Text => {
                g.text.add(r.correct);
                text.add(r.correct);
            }
            UiType::Icon => {
                g.icon.add(r.correct);
                icon.add(r.correct);
            }
        }
        *terminations.entry(r.termination.as_str().to_string()).or_insert(0) += 1;
    }
    Ok(Report {
        meta,
        applications: apps,
        groups,
        text,
        icon,
        terminations,
    })
}

fn row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn rule(n: usize) -> String {
    format!("|{}\n", vec!["---|"; n].concat())
}

/// Per-application table: a group header row, a row of application codes,
/// then one row per report.
pub fn application_table(reports: &[&Report]) -> String {
    let mut header = vec!["Method".to_string()];
    let mut codes = vec![String::new()];
    for g in Group::ALL {
        for (i, a) in APPLICATIONS.iter().filter(|a| a.group == g).enumerate() {
            header.push(if i == 0 { g.label().to_string() } else { String::new() });
            codes.push(format!("**{}**", a.code));
        }
    }
    header.push("Avg".into());
    codes.push(String::new());
    let mut out = row(&header);
    out.push_str(&rule(header.len()));
    out.push_str(&row(&codes));
    for r in reports {
        let mut cells = vec![r.meta.method.clone()];
        cells.extend(r.applications.iter().map(|a| cell(a.counts.ratio())));
        cells.push(cell(r.app_avg()));
        out.push_str(&row(&cells));
    }
    out
}

/// Group × element-type table with Text, Icon and Avg per group and overall.
pub fn group_table(reports: &[&Report]) -> String {
    let mut header = vec!["Method".to_string()];
    let mut sub = vec![String::new()];
    for label in Group::ALL.iter().map(|g| g.label()).chain(["Avg"]) {
        header.extend([label.to_string(), String::new(), String::new()]);
        sub.extend(["**Text**", "**Icon**", "**Avg**"].map(String::from));
    }
    let mut out = row(&header);
    out.push_str(&rule(header.len()));
    out.push_str(&row(&sub));
    for r in reports {
        let mut cells = vec![r.meta.method.clone()];
        for g in &r.groups {
            cells.push(cell(g.text.ratio()));
            cells.push(cell(g.icon.ratio()));
            cells.push(cell(r.group_avg(g)));
        }
        let (t, i, a) = r.overall_triple();
        cells.extend([t, i, a]);
        out.push_str(&row(&cells));
    }
    out
}

/// Method comparison: per-group average plus overall Text, Icon and Avg.
pub fn comparison_table(reports: &[&Report]) -> String {
    let mut header = vec!["Method".to_string()];
    header.extend(Group::ALL.iter().map(|g| g.label().to_string()));
    header.extend(["Overall Text", "Overall Icon", "Overall Avg"].map(String::from));
    let mut out = row(&header);
    out.push_str(&rule(header.len()));
    for r in reports {
        let mut cells = vec![r.meta.method.clone()];
        cells.extend(r.groups.iter().map(|g| cell(r.group_avg(g))));
        let (t, i, a) = r.overall_triple();
        cells.extend([t, i, a]);
        out.push_str(&row(&cells));
    }
    out
}

pub fn to_markdown(r: &Report) -> String {
    let mut out = String::new();
    let m = &r.meta;
    let _ = writeln!(out, "# Grounding accuracy: {}\n", m.method);
    let _ = writeln!(out, "- method: {}", m.method);
    if let Some(v) = &m.variant {
        let _ = writeln!(out, "- variant: {}", v);
    }
    let _ = writeln!(out, "- grounder: {}", m.grounder);
    if let Some(p) = &m.planner {
        let _ = writeln!(out, "- planner: {}", p);
    }
    let _ = writeln!(out, "- config sha256: {}", m.config_sha256);
    let _ = writeln!(out, "- dataset sha256: {}", m.dataset_sha256);
    let _ = writeln!(out, "- tasks: {}", r.overall().total);
    let _ = writeln!(
        out,
        "- averaging: {}",
        match m.averaging {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        }
    );
    let terms: Vec<String> = r.terminations.iter().map(|(k, v)| format!("{} {}", k, v)).collect();
    let _ = writeln!(out, "- terminations: {}", if terms.is_empty() { EMPTY_CELL.to_string() } else { terms.join(", ") });
    out.push_str("\n## Accuracy by application (%)\n\n");
    out.push_str(&application_table(&[r]));
    out.push_str("\n## Accuracy by category and element type (%)\n\n");
    out.push_str(&group_table(&[r]));
    out
}

fn csv_row(fields: &[&str]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.to_string()
            }
        })
        .collect();
    format!("{}\n", quoted.join(","))
}

/// Long-format CSV: one line per cell with counts and the displayed value.
pub fn to_csv(r: &Report) -> String {
    let mut out = csv_row(&["method", "section", "group", "application", "ui_type", "correct", "total", "accuracy"]);
    let method = r.meta.method.as_str();
    let mut line = |section: &str, group: &str, app: &str, ui: &str, c: Counts, shown: String| {
        out.push_str(&csv_row(&[
            method,
            section,
            group,
            app,
            ui,
            &c.correct.to_string(),
            &c.total.to_string(),
            &shown,
        ]));
    };
    for a in &r.applications {
        line("application", a.group.label(), &a.code, "all", a.counts, cell(a.counts.ratio()));
    }
    line("application", "all", "Avg", "all", r.overall(), cell(r.app_avg()));
    for g in &r.groups {
        line("group", g.group.label(), "all", "text", g.text, cell(g.text.ratio()));
        line("group", g.group.label(), "all", "icon", g.icon, cell(g.icon.ratio()));
        line("group", g.group.label(), "all", "all", g.all(), cell(r.group_avg(g)));
    }
    line("overall", "all", "all", "text", r.text, cell(r.text.ratio()));
    line("overall", "all", "all", "icon", r.icon, cell(r.icon.ratio()));
    line("overall", "all", "all", "all", r.overall(), cell(r.overall_avg()));
    out
}

pub fn to_json(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

pub fn emit_report(r: &Report, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Markdown => to_markdown(r),
        ReportFormat::Csv => to_csv(r),
        ReportFormat::Json => to_json(r),
    }
    .into_bytes()
}
