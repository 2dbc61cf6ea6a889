//! Record/replay gateway for all network transactions.
//!
//! Every piece of code that needs the network (HTTP fetches, TLS handshakes,
//! WHOIS queries, search lookups) goes through a [`FixtureStore`] instead of
//! opening sockets itself. The store runs in one of three modes:
//!
//! * **replay**: answers every transaction from a fixture archive on disk.
//!   No transport is even constructed, so replay provably performs zero
//!   network I/O; a transaction absent from the archive is an error.
//! * **record**: performs transactions live and writes each one into the
//!   archive, reusing an existing recording when the same transaction
//!   repeats.
//! * **live**: performs transactions without persisting anything.
//!
//! A transaction is identified by a [`Descriptor`] (kind, method, resource)
//! whose canonical form is hashed into a stable key. Request headers are
//! deliberately excluded from the key: they vary across tool versions and
//! would silently invalidate archives. Recorded outcomes include failures
//! (timeouts, handshake errors, empty search results), so an archive
//! reproduces the unhappy paths too.
//!
//! On disk an archive is an `index.txt` of tab-separated
//! `key  kind  path  timestamp` lines plus one JSON file per transaction
//! under `transactions/`. Each transaction file carries a digest of its
//! outcome; [`verify_archive`] recomputes keys and digests to catch
//! tampered or missing entries.
//!
//! A record-mode store can also act as an evidence cache: give it a TTL
//! and recordings older than that are re-performed instead of reused.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const INDEX_FILE: &str = "index.txt";
const TRANSACTIONS_DIR: &str = "transactions";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("no recorded transaction for {descriptor} (key {key})")]
    Miss { descriptor: String, key: String },
    #[error("fixture archive {0} has no {INDEX_FILE}")]
    MissingIndex(PathBuf),
    #[error("{path}:{line}: malformed index line: {reason}")]
    MalformedIndex {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("fixture {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture {path} is not a valid transaction file: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("recorded transaction {key} is {found}, expected {expected}")]
    KindMismatch {
        key: String,
        expected: Kind,
        found: Kind,
    },
    #[error("payload is not valid base64: {0}")]
    BadPayload(String),
}

/// How the store satisfies transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Replay,
    Record,
    Live,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Replay => "replay",
            Mode::Record => "record",
            Mode::Live => "live",
        })
    }
}

/// The transaction families the gateway knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Http,
    Tls,
    Whois,
    Search,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Http => "http",
            Kind::Tls => "tls",
            Kind::Whois => "whois",
            Kind::Search => "search",
        }
    }

    fn parse(text: &str) -> Option<Kind> {
        match text {
            "http" => Some(Kind::Http),
            "tls" => Some(Kind::Tls),
            "whois" => Some(Kind::Whois),
            "search" => Some(Kind::Search),
            _ => None,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one transaction: what was asked of the network, minus
/// anything (headers, timing) that should not affect fixture identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: Kind,
    pub method: String,
    pub resource: String,
}

impl Descriptor {
    pub fn http(method: &str, url: &str) -> Descriptor {
        Descriptor {
            kind: Kind::Http,
            method: method.to_ascii_uppercase(),
            resource: canonical_url(url),
        }
    }

    pub fn tls(host: &str, port: u16) -> Descriptor {
        Descriptor {
            kind: Kind::Tls,
            method: "HANDSHAKE".into(),
            resource: format!("{}:{}", host.to_ascii_lowercase(), port),
        }
    }

    pub fn whois(server: &str, query: &str) -> Descriptor {
        Descriptor {
            kind: Kind::Whois,
            method: "QUERY".into(),
            resource: format!("{}/{}", server.to_ascii_lowercase(), query),
        }
    }

    pub fn search(query: &str) -> Descriptor {
        Descriptor {
            kind: Kind::Search,
            method: "QUERY".into(),
            resource: query.to_string(),
        }
    }

    /// The canonical single-line form that gets hashed into the key.
    pub fn canonical(&self) -> String {
        format!("{} {} {}", self.kind, self.method, self.resource)
    }

    /// Stable identifier: prefix of the SHA-256 of the canonical form.
    pub fn key(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Canonicalizes a URL for fixture identity: sorted query parameters, no
/// fragment. Unparseable input is used verbatim (still deterministic).
fn canonical_url(raw: &str) -> String {
    let Ok(mut parsed) = url::Url::parse(raw) else {
        return raw.to_string();
    };
    parsed.set_fragment(None);
    if parsed.query().is_some() {
        let mut pairs: Vec<(String, String)> = parsed
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect();
        pairs.sort();
        if pairs.is_empty() {
            parsed.set_query(None);
        } else {
            parsed.query_pairs_mut().clear().extend_pairs(pairs);
        }
    }
    parsed.to_string()
}

/// Body bytes, stored as UTF-8 text when possible and base64 otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "encoding", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    Base64(String),
}

impl Payload {
    pub fn from_bytes(bytes: &[u8]) -> Payload {
        match std::str::from_utf8(bytes) {
            Ok(text) => Payload::Text(text.to_string()),
            Err(_) => Payload::Base64(BASE64.encode(bytes)),
        }
    }

    pub fn bytes(&self) -> Result<Vec<u8>, ReplayError> {
        match self {
            Payload::Text(text) => Ok(text.as_bytes().to_vec()),
            Payload::Base64(data) => BASE64
                .decode(data)
                .map_err(|e| ReplayError::BadPayload(e.to_string())),
        }
    }

    /// The payload as text, lossily decoding binary bodies.
    pub fn as_text(&self) -> Cow<'_, str> {
        match self {
            Payload::Text(text) => Cow::Borrowed(text),
            Payload::Base64(data) => match BASE64.decode(data) {
                Ok(bytes) => Cow::Owned(String::from_utf8_lossy(&bytes).into_owned()),
                Err(_) => Cow::Borrowed(""),
            },
        }
    }
}

mod b64 {
    use super::BASE64;
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&BASE64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        BASE64.decode(&text).map_err(serde::de::Error::custom)
    }
}

/// An HTTP request as seen by the gateway. Headers ride along for the
/// transport and for archive inspection but never affect fixture identity.
#[derive(Debug, Clone)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    pub headers: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: &str) -> HttpRequest {
        HttpRequest {
            method: "GET".into(),
            url: url.to_string(),
            headers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum HttpOutcome {
    Response {
        status: u16,
        headers: Vec<(String, String)>,
        body: Payload,
    },
    Timeout,
    TransportFailure {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum TlsOutcome {
    /// Handshake completed; `der` is the leaf certificate presented.
    Leaf {
        #[serde(with = "b64")]
        der: Vec<u8>,
    },
    /// The host does not answer TLS on the requested port.
    NoTls,
    HandshakeFailure {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum WhoisOutcome {
    /// Full response text, read to connection close.
    Response { text: String },
    TransportFailure { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SearchOutcome {
    /// Result URLs in engine rank order.
    Results { urls: Vec<String> },
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Http(HttpOutcome),
    Tls(TlsOutcome),
    Whois(WhoisOutcome),
    Search(SearchOutcome),
}

impl Outcome {
    fn kind(&self) -> Kind {
        match self {
            Outcome::Http(_) => Kind::Http,
            Outcome::Tls(_) => Kind::Tls,
            Outcome::Whois(_) => Kind::Whois,
            Outcome::Search(_) => Kind::Search,
        }
    }
}

/// Whatever actually talks to the network in record and live modes.
/// Replay mode never holds one.
pub trait Transport: Send + Sync {
    fn http(&self, request: &HttpRequest) -> HttpOutcome;
    fn tls(&self, host: &str, port: u16) -> TlsOutcome;
    fn whois(&self, server: &str, query: &str) -> WhoisOutcome;
    fn search(&self, query: &str) -> SearchOutcome;
}

/// How one logged transaction was satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Satisfied {
    Replayed,
    Recorded,
    ReusedRecording,
    Live,
}

/// One entry in the in-memory transaction log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub descriptor: Descriptor,
    pub satisfied: Satisfied,
}

#[derive(Debug, Clone)]
struct IndexEntry {
    kind: Kind,
    path: String,
    timestamp: u64,
}

/// The on-disk shape of one transaction file.
#[derive(Debug, Serialize, Deserialize)]
struct TransactionFile {
    descriptor: Descriptor,
    recorded_at: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    request_headers: Vec<(String, String)>,
    outcome: Outcome,
    /// Digest of the serialized outcome, checked by [`verify_archive`].
    #[serde(default)]
    outcome_sha256: String,
}

fn outcome_digest(outcome: &Outcome) -> String {
    let json = serde_json::to_string(outcome).expect("outcome serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// The single gateway through which all network transactions pass.
pub struct FixtureStore {
    mode: Mode,
    dir: Option<PathBuf>,
    transport: Option<Box<dyn Transport>>,
    index: Mutex<HashMap<String, IndexEntry>>,
    cache: Mutex<HashMap<String, Outcome>>,
    log: Mutex<Vec<Transaction>>,
    /// Timestamp stamped onto new recordings; pinned for reproducible
    /// archives, otherwise the wall clock at construction.
    timestamp: u64,
    /// Record mode only: recordings older than this many seconds are
    /// re-performed instead of reused. `None` means recordings never age.
    ttl_seconds: Option<u64>,
}

impl FixtureStore {
    /// Opens an archive for replay. Fails fast if the index is missing; a
    /// missing transaction surfaces later as [`ReplayError::Miss`].
    pub fn replay(dir: impl Into<PathBuf>) -> Result<FixtureStore, ReplayError> {
        let dir = dir.into();
        let index = load_index(&dir)?;
        Ok(FixtureStore {
            mode: Mode::Replay,
            dir: Some(dir),
            transport: None,
            index: Mutex::new(index),
            cache: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            timestamp: now(),
            ttl_seconds: None,
        })
    }

    /// Opens (or creates) an archive for recording through `transport`.
    /// Transactions already present are reused, not re-performed.
    pub fn record(
        dir: impl Into<PathBuf>,
        transport: Box<dyn Transport>,
    ) -> Result<FixtureStore, ReplayError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join(TRANSACTIONS_DIR)).map_err(|source| ReplayError::Io {
            path: dir.clone(),
            source,
        })?;
        let index = if dir.join(INDEX_FILE).exists() {
            load_index(&dir)?
        } else {
            HashMap::new()
        };
        Ok(FixtureStore {
            mode: Mode::Record,
            dir: Some(dir),
            transport: Some(transport),
            index: Mutex::new(index),
            cache: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            timestamp: now(),
            ttl_seconds: None,
        })
    }

    /// Performs transactions live without persisting them.
    pub fn live(transport: Box<dyn Transport>) -> FixtureStore {
        FixtureStore {
            mode: Mode::Live,
            dir: None,
            transport: Some(transport),
            index: Mutex::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            timestamp: now(),
            ttl_seconds: None,
        }
    }

    /// Pins the timestamp written into new recordings, making re-recorded
    /// archives byte-identical.
    pub fn with_timestamp(mut self, timestamp: u64) -> FixtureStore {
        self.timestamp = timestamp;
        self
    }

    /// Ages recordings out of a record-mode store: an entry older than
    /// `seconds` is re-performed and overwritten instead of reused. This is
    /// what turns a record store into an evidence cache.
    pub fn with_ttl_seconds(mut self, seconds: u64) -> FixtureStore {
        self.ttl_seconds = Some(seconds);
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Everything this store has been asked for, in order.
    pub fn transactions(&self) -> Vec<Transaction> {
        self.log.lock().unwrap().clone()
    }

    pub fn http(&self, request: &HttpRequest) -> Result<HttpOutcome, ReplayError> {
        let descriptor = Descriptor::http(&request.method, &request.url);
        let headers = request.headers.clone();
        let outcome = self.resolve(&descriptor, headers, |t| Outcome::Http(t.http(request)))?;
        match outcome {
            Outcome::Http(o) => Ok(o),
            other => Err(self.kind_mismatch(&descriptor, &other)),
        }
    }

    pub fn tls(&self, host: &str, port: u16) -> Result<TlsOutcome, ReplayError> {
        let descriptor = Descriptor::tls(host, port);
        let outcome = self.resolve(&descriptor, Vec::new(), |t| Outcome::Tls(t.tls(host, port)))?;
        match outcome {
            Outcome::Tls(o) => Ok(o),
            other => Err(self.kind_mismatch(&descriptor, &other)),
        }
    }

    pub fn whois(&self, server: &str, query: &str) -> Result<WhoisOutcome, ReplayError> {
        let descriptor = Descriptor::whois(server, query);
        let outcome = self.resolve(&descriptor, Vec::new(), |t| {
            Outcome::Whois(t.whois(server, query))
        })?;
        match outcome {
            Outcome::Whois(o) => Ok(o),
            other => Err(self.kind_mismatch(&descriptor, &other)),
        }
    }

    pub fn search(&self, query: &str) -> Result<SearchOutcome, ReplayError> {
        let descriptor = Descriptor::search(query);
        let outcome = self.resolve(&descriptor, Vec::new(), |t| Outcome::Search(t.search(query)))?;
        match outcome {
            Outcome::Search(o) => Ok(o),
            other => Err(self.kind_mismatch(&descriptor, &other)),
        }
    }

    fn kind_mismatch(&self, descriptor: &Descriptor, found: &Outcome) -> ReplayError {
        ReplayError::KindMismatch {
            key: descriptor.key(),
            expected: descriptor.kind,
            found: found.kind(),
        }
    }

    fn resolve(
        &self,
        descriptor: &Descriptor,
        request_headers: Vec<(String, String)>,
        perform: impl FnOnce(&dyn Transport) -> Outcome,
    ) -> Result<Outcome, ReplayError> {
        let key = descriptor.key();
        match self.mode {
            Mode::Replay => {
                let outcome = self.load_recorded(descriptor, &key)?;
                self.log_transaction(descriptor, Satisfied::Replayed);
                Ok(outcome)
            }
            Mode::Record => {
                let recorded = match self.index.lock().unwrap().get(&key) {
                    None => false,
                    Some(entry) => match self.ttl_seconds {
                        None => true,
                        Some(ttl) => entry.timestamp.saturating_add(ttl) >= now(),
                    },
                };
                if recorded {
                    let outcome = self.load_recorded(descriptor, &key)?;
                    self.log_transaction(descriptor, Satisfied::ReusedRecording);
                    Ok(outcome)
                } else {
                    let transport = self.transport.as_deref().expect("record mode has transport");
                    let outcome = perform(transport);
                    self.save(descriptor, &key, request_headers, &outcome)?;
                    self.log_transaction(descriptor, Satisfied::Recorded);
                    Ok(outcome)
                }
            }
            Mode::Live => {
                let transport = self.transport.as_deref().expect("live mode has transport");
                let outcome = perform(transport);
                self.log_transaction(descriptor, Satisfied::Live);
                Ok(outcome)
            }
        }
    }

    fn log_transaction(&self, descriptor: &Descriptor, satisfied: Satisfied) {
        self.log.lock().unwrap().push(Transaction {
            descriptor: descriptor.clone(),
            satisfied,
        });
    }

    fn load_recorded(&self, descriptor: &Descriptor, key: &str) -> Result<Outcome, ReplayError> {
        if let Some(outcome) = self.cache.lock().unwrap().get(key) {
            return Ok(outcome.clone());
        }
        let entry_path = {
            let index = self.index.lock().unwrap();
            let Some(entry) = index.get(key) else {
                return Err(ReplayError::Miss {
                    descriptor: descriptor.canonical(),
                    key: key.to_string(),
                });
            };
            entry.path.clone()
        };
        let dir = self.dir.as_ref().expect("archive modes have a directory");
        let path = dir.join(&entry_path);
        let text = fs::read_to_string(&path).map_err(|source| ReplayError::Io {
            path: path.clone(),
            source,
        })?;
        let file: TransactionFile =
            serde_json::from_str(&text).map_err(|source| ReplayError::Malformed {
                path: path.clone(),
                source,
            })?;
        self.cache
            .lock()
            .unwrap()
            .insert(key.to_string(), file.outcome.clone());
        Ok(file.outcome)
    }

    fn save(
        &self,
        descriptor: &Descriptor,
        key: &str,
        request_headers: Vec<(String, String)>,
        outcome: &Outcome,
    ) -> Result<(), ReplayError> {
        let dir = self.dir.as_ref().expect("record mode has a directory");
        let relative = format!("{TRANSACTIONS_DIR}/{key}.json");
        let path = dir.join(&relative);
        let file = TransactionFile {
            descriptor: descriptor.clone(),
            recorded_at: self.timestamp,
            request_headers,
            outcome: outcome.clone(),
            outcome_sha256: outcome_digest(outcome),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("transaction serializes");
        json.push('\n');
        fs::write(&path, json).map_err(|source| ReplayError::Io {
            path: path.clone(),
            source,
        })?;
        {
            let mut index = self.index.lock().unwrap();
            index.insert(
                key.to_string(),
                IndexEntry {
                    kind: descriptor.kind,
                    path: relative,
                    timestamp: self.timestamp,
                },
            );
            self.write_index(dir, &index)?;
        }
        self.cache
            .lock()
            .unwrap()
            .insert(key.to_string(), outcome.clone());
        Ok(())
    }

    /// Rewrites the index sorted by key, so archive contents do not depend
    /// on recording order.
    fn write_index(
        &self,
        dir: &Path,
        index: &HashMap<String, IndexEntry>,
    ) -> Result<(), ReplayError> {
        let mut keys: Vec<&String> = index.keys().collect();
        keys.sort();
        let mut out = String::new();
        for key in keys {
            let entry = &index[key];
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                key, entry.kind, entry.path, entry.timestamp
            ));
        }
        let path = dir.join(INDEX_FILE);
        fs::write(&path, out).map_err(|source| ReplayError::Io { path, source })
    }
}

impl fmt::Debug for FixtureStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FixtureStore")
            .field("mode", &self.mode)
            .field("dir", &self.dir)
            .finish_non_exhaustive()
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// One defect found while checking an archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyProblem {
    /// Index key or file path the problem is about.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for VerifyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.detail)
    }
}

/// Checks an archive end to end: every index entry's file must exist,
/// parse, belong to the claimed kind, hash back to its index key, and
/// carry an outcome matching its stored digest; files in the transactions
/// directory that the index does not mention are reported too. An empty
/// problem list means the archive is intact.
pub fn verify_archive(dir: &Path) -> Result<Vec<VerifyProblem>, ReplayError> {
    let index = load_index(dir)?;
    let mut problems = Vec::new();
    let mut referenced: Vec<PathBuf> = Vec::new();

    let mut keys: Vec<&String> = index.keys().collect();
    keys.sort();
    for key in keys {
        let entry = &index[key];
        let path = dir.join(&entry.path);
        referenced.push(path.clone());
        let problem = |detail: String| VerifyProblem {
            subject: key.clone(),
            detail,
        };
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) => {
                problems.push(problem(format!("cannot read {}: {e}", entry.path)));
                continue;
            }
        };
        let file: TransactionFile = match serde_json::from_str(&text) {
            Ok(file) => file,
            Err(e) => {
                problems.push(problem(format!("{} does not parse: {e}", entry.path)));
                continue;
            }
        };
        if file.descriptor.key() != *key {
            problems.push(problem(format!(
                "descriptor in {} hashes to {}, not the index key",
                entry.path,
                file.descriptor.key()
            )));
        }
        if file.descriptor.kind != entry.kind {
            problems.push(problem(format!(
                "index says {}, file says {}",
                entry.kind, file.descriptor.kind
            )));
        }
        let digest = outcome_digest(&file.outcome);
        if file.outcome_sha256.is_empty() {
            problems.push(problem(format!("{} has no outcome digest", entry.path)));
        } else if digest != file.outcome_sha256 {
            problems.push(problem(format!(
                "outcome in {} does not match its recorded digest",
                entry.path
            )));
        }
    }

    let transactions = dir.join(TRANSACTIONS_DIR);
    if transactions.is_dir() {
        let mut orphans = Vec::new();
        let listing = fs::read_dir(&transactions).map_err(|source| ReplayError::Io {
            path: transactions.clone(),
            source,
        })?;
        for entry in listing {
            let entry = entry.map_err(|source| ReplayError::Io {
                path: transactions.clone(),
                source,
            })?;
            let path = entry.path();
            if !referenced.contains(&path) {
                orphans.push(path);
            }
        }
        orphans.sort();
        for path in orphans {
            problems.push(VerifyProblem {
                subject: path.display().to_string(),
                detail: "file is not referenced by the index".to_string(),
            });
        }
    }
    Ok(problems)
}

fn load_index(dir: &Path) -> Result<HashMap<String, IndexEntry>, ReplayError> {
    let path = dir.join(INDEX_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ReplayError::MissingIndex(dir.to_path_buf()));
        }
        Err(source) => return Err(ReplayError::Io { path, source }),
    };
    let mut index = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(ReplayError::MalformedIndex {
                path,
                line: i + 1,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let kind = Kind::parse(fields[1]).ok_or_else(|| ReplayError::MalformedIndex {
            path: path.clone(),
            line: i + 1,
            reason: format!("unknown kind {:?}", fields[1]),
        })?;
        let timestamp = fields[3]
            .parse::<u64>()
            .map_err(|_| ReplayError::MalformedIndex {
                path: path.clone(),
                line: i + 1,
                reason: format!("bad timestamp {:?}", fields[3]),
            })?;
        index.insert(
            fields[0].to_string(),
            IndexEntry {
                kind,
                path: fields[2].to_string(),
                timestamp,
            },
        );
    }
    Ok(index)
}
