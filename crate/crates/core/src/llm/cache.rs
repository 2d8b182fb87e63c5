//! Append-only record/replay cache. Entries are line-delimited JSON so the
//! file is diff-able and mergeable; replays are lock-free reads over an
//! in-memory index.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use super::{cache_key, CompletionRequest, CompletionResponse, LlmError, Provider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub n_samples: u32,
    pub max_tokens: u32,
    pub prompt: String,
    pub responses: Vec<String>,
    pub recorded_at: u64,
}

impl CacheEntry {
    fn from_exchange(req: &CompletionRequest, resp: &CompletionResponse) -> Self {
        CacheEntry {
            key: cache_key(req),
            model: req.config.model.clone(),
            temperature: req.config.temperature,
            top_p: req.config.top_p,
            n_samples: req.config.n_samples,
            max_tokens: req.config.max_tokens,
            prompt: req.prompt.clone(),
            responses: resp.texts.clone(),
            recorded_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn read_cache(path: &Path) -> Result<Vec<CacheEntry>, LlmError> {
    let file = File::open(path).map_err(|e| LlmError::CacheIo(format!("{}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LlmError::CacheIo(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CacheEntry = serde_json::from_str(&line)
            .map_err(|e| LlmError::CacheIo(format!("line {}: {e}", i + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Serialized single-writer append handle for the cache file.
pub struct CacheWriter {
    file: Mutex<BufWriter<File>>,
}

impl CacheWriter {
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::CacheIo(format!("{}: {e}", path.display())))?;
        Ok(CacheWriter {
            file: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn append(&self, entry: &CacheEntry) -> Result<(), LlmError> {
        let line =
            serde_json::to_string(entry).map_err(|e| LlmError::CacheIo(e.to_string()))?;
        let mut guard = self.file.lock().expect("cache writer poisoned");
        writeln!(guard, "{line}").map_err(|e| LlmError::CacheIo(e.to_string()))?;
        guard.flush().map_err(|e| LlmError::CacheIo(e.to_string()))
    }
}

/// Wraps any provider and appends every successful exchange to the cache.
pub struct RecordingProvider {
    inner: Box<dyn Provider>,
    writer: CacheWriter,
}

impl RecordingProvider {
    pub fn new(inner: Box<dyn Provider>, cache_path: &Path) -> Result<Self, LlmError> {
        Ok(RecordingProvider {
            inner,
            writer: CacheWriter::open(cache_path)?,
        })
    }
}

impl Provider for RecordingProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let resp = self.inner.complete(req)?;
        self.writer.append(&CacheEntry::from_exchange(req, &resp))?;
        Ok(resp)
    }

    fn name(&self) -> &str {
        "record"
    }
}

/// Serves completions from a recorded cache only; unseen prompts are a
/// `CacheMiss`. Later recordings win over earlier ones for the same key.
pub struct ReplayProvider {
    entries: HashMap<String, Vec<String>>,
}

impl ReplayProvider {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        for entry in read_cache(path)? {
            entries.insert(entry.key, entry.responses);
        }
        Ok(ReplayProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let key = cache_key(req);
        match self.entries.get(&key) {
            Some(texts) => Ok(CompletionResponse {
                texts: texts.clone(),
                usage: None,
                latency_ms: None,
            }),
            None => Err(LlmError::CacheMiss { key }),
        }
    }

    fn name(&self) -> &str {
        "replay"
    }
}
