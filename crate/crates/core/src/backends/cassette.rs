//! Record/replay of model calls.
//!
//! A cassette is an append-only JSON-lines file with one record per call. In
//! record mode every call goes to the wrapped client and is appended; in
//! replay mode only stored replies are served and the wrapped client is never
//! touched.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatClient, ChatRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    #[default]
    Off,
    Record,
    Replay,
}

impl std::str::FromStr for CassetteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CassetteMode::Off),
            "record" => Ok(CassetteMode::Record),
            "replay" => Ok(CassetteMode::Replay),
            other => Err(format!("unknown cassette mode `{}`", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub request_sha256: String,
    pub model: String,
    pub prompt: String,
    pub image_sha256: String,
    pub reply: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

struct State {
    // Replies per request hash, in recording order.
    replies: HashMap<String, Vec<String>>,
    // Next reply index per request hash (replay).
    cursor: HashMap<String, usize>,
    writer: Option<File>,
}

pub struct Cassette {
    path: PathBuf,
    mode: CassetteMode,
    state: Mutex<State>,
}

impl Cassette {
    pub fn open(path: &Path, mode: CassetteMode) -> Result<Self, BackendError> {
        let mut replies: HashMap<String, Vec<String>> = HashMap::new();
        let exists = path.exists();
        if mode == CassetteMode::Replay && !exists {
            return Err(BackendError::Cassette(format!("{} does not exist", path.display())));
        }
        if exists && mode != CassetteMode::Off {
            for rec in read_records(path)? {
                replies.entry(rec.request_sha256).or_default().push(rec.reply);
            }
        }
        let writer = if mode == CassetteMode::Record {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| BackendError::Cassette(e.to_string()))?;
            }
            Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| BackendError::Cassette(format!("{}: {}", path.display(), e)))?,
            )
        } else {
            None
        };
        Ok(Self {
            path: path.to_path_buf(),
            mode,
            state: Mutex::new(State {
                replies,
                cursor: HashMap::new(),
                writer,
            }),
        })
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lookup(&self, hash: &str) -> Result<String, BackendError> {
        let mut st = self.state.lock().expect("cassette lock");
        let n = st.replies.get(hash).map(Vec::len).unwrap_or(0);
        if n == 0 {
            return Err(BackendError::CassetteMiss {
                request_sha256: hash.to_string(),
            });
        }
        let idx = {
            let c = st.cursor.entry(hash.to_string()).or_insert(0);
            let i = (*c).min(n - 1);
            *c += 1;
            i
        };
        Ok(st.replies[hash][idx].clone())
    }

    fn append(&self, req: &ChatRequest<'_>, hash: String, reply: &str) -> Result<(), BackendError> {
        let rec = CassetteRecord {
            request_sha256: hash.clone(),
            model: req.model.to_string(),
            prompt: req.prompt.to_string(),
            image_sha256: req.image.digest().to_string(),
            reply: reply.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let line = serde_json::to_string(&rec).map_err(|e| BackendError::Cassette(e.to_string()))?;
        let mut st = self.state.lock().expect("cassette lock");
        if let Some(w) = st.writer.as_mut() {
            writeln!(w, "{}", line).map_err(|e| BackendError::Cassette(e.to_string()))?;
            w.flush().map_err(|e| BackendError::Cassette(e.to_string()))?;
        }
        st.replies.entry(hash).or_default().push(reply.to_string());
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<CassetteRecord>, BackendError> {
    let f = File::open(path).map_err(|e| BackendError::Cassette(format!("{}: {}", path.display(), e)))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| BackendError::Cassette(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CassetteRecord = serde_json::from_str(&line)
            .map_err(|e| BackendError::Cassette(format!("{} line {}: {}", path.display(), i + 1, e)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Wraps a client with a cassette. With [`CassetteMode::Off`] it is a
/// pass-through.
pub struct CassetteClient {
    inner: Arc<dyn ChatClient>,
    cassette: Arc<Cassette>,
}

impl CassetteClient {
    pub fn new(inner: Arc<dyn ChatClient>, cassette: Arc<Cassette>) -> Self {
        Self { inner, cassette }
    }
}

impl ChatClient for CassetteClient {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, BackendError> {
        match self.cassette.mode {
            CassetteMode::Off => self.inner.chat(req),
            CassetteMode::Replay => self.cassette.lookup(&req.sha256()),
            CassetteMode::Record => {
                let reply = self.inner.chat(req)?;
                self.cassette.append(req, req.sha256(), &reply)?;
                Ok(reply)
            }
        }
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}
