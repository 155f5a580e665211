//! Config file loading and backend construction.
//!
//! Values are resolved as: command-line flags, then the config file, then
//! built-in defaults. Relative paths in a config file are resolved against
//! the file's directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use seeker_core::backends::{
    BackendConfig, Cassette, CassetteClient, CassetteMode, ChatClient, GroupPick, Grounder, HttpTransport,
    OutputConvention, Planner, RemoteChat, Script, ScriptedChat,
};
use seeker_core::fixtures::{SCRIPTED_GROUNDER, SCRIPTED_PLANNER};
use seeker_core::planner::PromptTemplates;
use seeker_core::search::{Backends, Method, SearchConfig, Variant};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Remote,
    Scripted,
}

/// One model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub kind: BackendKind,
    pub model: String,
    pub endpoint: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    /// Reply format of a grounder.
    pub convention: OutputConvention,
    /// Coordinate group used when a reply holds several.
    pub pick: GroupPick,
    /// Grounder prompt around the instruction; must contain `{instruction}`.
    pub prompt_template: Option<String>,
    /// Script file for `kind = "scripted"`.
    pub script: Option<PathBuf>,
}

impl Default for Profile {
    fn default() -> Self {
        let b = BackendConfig::default();
        Self {
            kind: BackendKind::Remote,
            model: String::new(),
            endpoint: b.endpoint,
            api_key_env: b.api_key_env,
            temperature: b.temperature,
            timeout_secs: b.timeout_secs,
            max_retries: b.max_retries,
            retry_backoff_ms: b.retry_backoff_ms,
            convention: OutputConvention::PointAbsolute,
            pick: GroupPick::First,
            prompt_template: None,
            script: None,
        }
    }
}

impl Profile {
    fn backend_config(&self) -> BackendConfig {
        BackendConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            temperature: self.temperature,
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
            retry_backoff_ms: self.retry_backoff_ms,
        }
    }

    fn model_name(&self, scripted_default: &str) -> String {
        match (&self.kind, self.model.is_empty()) {
            (BackendKind::Scripted, true) => scripted_default.into(),
            _ => self.model.clone(),
        }
    }

    fn same_script(&self, other: &Profile) -> bool {
        self.kind == BackendKind::Scripted
            && other.kind == BackendKind::Scripted
            && self.script == other.script
            && self.convention == other.convention
    }

    fn client(&self, role: &str) -> Result<Arc<dyn ChatClient>, CliError> {
        match self.kind {
            BackendKind::Scripted => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| CliError::Config(format!("{}: scripted backend needs `script`", role)))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {}: {}", role, path.display(), e)))?;
                let script: Script = serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}: {}", role, path.display(), e)))?;
                Ok(Arc::new(ScriptedChat::new(script, self.convention)))
            }
            BackendKind::Remote => {
                if self.model.is_empty() {
                    return Err(CliError::Config(format!("{}: `model` is required", role)));
                }
                if let Some(var) = &self.api_key_env {
                    if std::env::var_os(var).is_none() {
                        return Err(CliError::Config(format!("{}: environment variable {} is not set", role, var)));
                    }
                }
                let transport = HttpTransport::new().map_err(|e| CliError::Config(e.to_string()))?;
                let chat = RemoteChat::new(self.backend_config(), Arc::new(transport))
                    .map_err(|e| CliError::Config(format!("{}: {}", role, e)))?;
                Ok(Arc::new(chat))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CassetteSection {
    pub mode: CassetteMode,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 means one per CPU.
    pub concurrency: usize,
    /// Zero all wall-clock fields so identical runs produce identical files.
    pub deterministic: bool,
    /// Directory with prompt template overrides.
    pub templates_dir: Option<PathBuf>,
}

/// The config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub grounder: Option<Profile>,
    #[serde(default)]
    pub planner: Option<Profile>,
    #[serde(default)]
    pub cassette: CassetteSection,
    #[serde(default)]
    pub run: RunSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: None,
            variant: None,
            search: SearchConfig::default(),
            grounder: None,
            planner: None,
            cassette: CassetteSection::default(),
            run: RunSection::default(),
        }
    }
}

fn rebase(path: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported schema_version {} (expected {})",
                path.display(),
                cfg.schema_version,
                SCHEMA_VERSION
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.grounder, &mut cfg.planner].into_iter().flatten() {
            rebase(&mut p.script, base);
        }
        rebase(&mut cfg.cassette.path, base);
        rebase(&mut cfg.run.templates_dir, base);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}

/// Flags shared by every command that runs a search. Each one, when given,
/// replaces the config file's value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Config file (TOML, `schema_version = 1`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Search method: direct, zoom, narrow, reground, seeker, seeker-no-recursion,
    /// seeker-no-neighbors or seeker-majority-vote.
    #[arg(long)]
    pub method: Option<Method>,
    /// Ablation of the planner-guided search: no_recursion, no_neighbors or majority_vote.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Longest patch side grounded directly, in pixels.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Re-grounding crop side, in pixels.
    #[arg(long)]
    pub crop_size: Option<f64>,
    /// Width of the centrality Gaussian, relative to the candidate size.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Script file; selects scripted grounder and planner.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// off, record or replay.
    #[arg(long)]
    pub cassette_mode: Option<CassetteMode>,
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Zero all timing fields so repeated runs produce identical files.
    #[arg(long)]
    pub deterministic: bool,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant `{}` (expected no_recursion, no_neighbors or majority_vote)", s))
}

/// Everything a run needs, after merging flags, config and defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub config_path: Option<PathBuf>,
    pub method: Method,
    pub search: SearchConfig,
    pub grounder: Profile,
    pub planner: Option<Profile>,
    pub cassette: CassetteSection,
    pub concurrency: usize,
    pub deterministic: bool,
    pub templates_dir: Option<PathBuf>,
}

pub fn resolve(o: &Overrides) -> Result<Resolved, CliError> {
    let file = ConfigFile::load_or_default(o.config.as_deref())?;
    let mut method = o.method.or(file.method).unwrap_or(Method::Seeker);
    if let Some(v) = o.variant.or(file.variant) {
        if method != Method::Seeker && method != Method::SeekerAblation(v) {
            return Err(CliError::Config(format!("variant {:?} only applies to the seeker method", v)));
        }
        method = Method::SeekerAblation(v);
    }
    let mut search = file.search.clone();
    if let Some(v) = o.max_depth {
        search.max_depth = v;
    }
    if let Some(v) = o.threshold {
        search.direct_ground_threshold = v;
    }
    if let Some(v) = o.iterations {
        search.iterations = v;
    }
    if let Some(v) = o.crop_size {
        search.crop_size = v;
    }
    if let Some(v) = o.sigma {
        search.score.sigma = v;
    }
    search.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let mut grounder = file.grounder.clone();
    let mut planner = file.planner.clone();
    if let Some(script) = &o.script {
        let scripted = |p: Option<Profile>| Profile {
            kind: BackendKind::Scripted,
            script: Some(script.clone()),
            ..p.unwrap_or_default()
        };
        grounder = Some(scripted(grounder));
        planner = Some(scripted(planner));
    }
    let grounder = grounder.ok_or_else(|| CliError::Config("no grounder configured (use --config or --script)".into()))?;
    if method.needs_planner() && planner.is_none() {
        return Err(CliError::Config(format!("method {} needs a [planner] profile", method)));
    }

    let mut cassette = file.cassette.clone();
    if let Some(m) = o.cassette_mode {
        cassette.mode = m;
    }
    if let Some(p) = &o.cassette {
        cassette.path = Some(p.clone());
    }
    if cassette.mode != CassetteMode::Off && cassette.path.is_none() {
        return Err(CliError::Config("cassette mode needs a cassette path".into()));
    }
    if cassette.mode == CassetteMode::Replay && !cassette.path.as_ref().is_some_and(|p| p.exists()) {
        return Err(CliError::Config("replay mode needs an existing cassette".into()));
    }

    Ok(Resolved {
        config_path: o.config.clone(),
        method,
        search,
        grounder,
        planner: if method.needs_planner() { planner } else { None },
        cassette,
        concurrency: o.concurrency.unwrap_or(file.run.concurrency),
        deterministic: o.deterministic || file.run.deterministic,
        templates_dir: file.run.templates_dir.clone(),
    })
}

impl Resolved {
    pub fn backends(&self) -> Result<Backends, CliError> {
        let cassette = match (self.cassette.mode, &self.cassette.path) {
            (CassetteMode::Off, _) | (_, None) => None,
            (mode, Some(path)) => Some(Arc::new(Cassette::open(path, mode).map_err(|e| CliError::Config(e.to_string()))?)),
        };
        let wrap = |c: Arc<dyn ChatClient>| -> Arc<dyn ChatClient> {
            match &cassette {
                Some(cas) => Arc::new(CassetteClient::new(c, cas.clone())),
                None => c,
            }
        };
        let g = &self.grounder;
        let g_client = wrap(g.client("grounder")?);
        let mut grounder = Grounder::new(g_client.clone(), g.model_name(SCRIPTED_GROUNDER), g.convention)
            .with_temperature(g.temperature)
            .with_pick(g.pick);
        if let Some(t) = &g.prompt_template {
            if !t.contains("{instruction}") {
                return Err(CliError::Config("grounder prompt_template lacks {instruction}".into()));
            }
            grounder = grounder.with_prompt_template(t.clone());
        }
        let planner = match &self.planner {
            Some(p) => {
                // One scripted client serves both roles so sequence replies keep a single counter.
                let client = if p.same_script(g) { g_client } else { wrap(p.client("planner")?) };
                Some(Planner::new(client, p.model_name(SCRIPTED_PLANNER)).with_temperature(p.temperature))
            }
            None => None,
        };
        let mut backends = Backends::new(grounder, planner);
        if let Some(dir) = &self.templates_dir {
            backends = backends.with_templates(PromptTemplates::from_dir(dir).map_err(|e| CliError::Config(e.to_string()))?);
        }
        Ok(backends)
    }

    pub fn searcher(&self) -> Result<seeker_core::search::Searcher, CliError> {
        let s = seeker_core::search::Searcher::new(self.backends()?, self.search.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(if self.deterministic { s.deterministic() } else { s })
    }
}
