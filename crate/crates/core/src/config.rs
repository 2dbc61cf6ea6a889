//! Runtime configuration: a small `key = value` file that overrides bundled
//! defaults, plus the wiring that turns it into loaded components and an
//! opened [`FixtureStore`].
//!
//! Every component the pipeline needs ships a bundled default, so an empty
//! or absent configuration is fully usable. A config file only has to name
//! what it wants to replace. Paths are resolved relative to the config
//! file's directory and must exist at load time; a typo in a path should
//! fail immediately, not three domains into a batch.
//!
//! The search credential is intentionally not a config key. Configuration
//! names the environment variable holding it (`search_key_env`), and the
//! transport reads that variable at query time.

use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

use crate::audit::KnownOrgs;
use crate::certinfo::EvPolicyList;
use crate::discovery::LinkLexicon;
use crate::domain::SuffixRules;
use crate::policy::classifier::PolicyClassifier;
use crate::policy::controller::EntityRules;
use crate::policy::ControllerLexicon;
use crate::replay::{FixtureStore, ReplayError};
use crate::resolver::{FetchPolicy, Resolver};
use crate::transport::{LiveTransport, SearchProvider, TransportConfig};
use crate::whois::{RedactionLexicon, ServerMap};

const DEFAULT_PARALLELISM: usize = 4;
const DEFAULT_CACHE_TTL_DAYS: u64 = 30;
const DEFAULT_SEARCH_KEY_ENV: &str = "DOMORG_SEARCH_KEY";
const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Line {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{key} points at {path}, which does not exist")]
    MissingFile { key: &'static str, path: PathBuf },
    #[error("loading {what} failed: {detail}")]
    Component { what: &'static str, detail: String },
    #[error("fixture archive error: {0}")]
    Archive(#[from] ReplayError),
}

/// Where transactions come from and whether they persist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreMode {
    /// Serve everything from an existing archive; no network.
    Replay(PathBuf),
    /// Perform live transactions and persist every one into the archive.
    Record(PathBuf),
    /// Perform live transactions through the evidence cache: fresh entries
    /// are reused, expired ones are re-fetched.
    Live,
}

/// Parsed configuration with defaults filled in.
#[derive(Debug, Clone)]
pub struct Config {
    pub budget: u32,
    pub parallelism: usize,
    pub include_certificate: bool,
    pub cache_dir: PathBuf,
    pub cache_ttl_days: u64,
    /// Mode requested by the config file, if any. Command-line flags take
    /// precedence over this.
    pub mode: Option<StoreMode>,
    pub suffix_rules: Option<PathBuf>,
    pub link_lexicon: Option<PathBuf>,
    pub controller_lexicon: Option<PathBuf>,
    pub designators: Option<PathBuf>,
    pub triggers: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub known_orgs: Option<PathBuf>,
    pub whois_servers: Option<PathBuf>,
    pub redaction_lexicon: Option<PathBuf>,
    pub ev_oids: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub search_endpoint: Option<String>,
    pub search_key_env: String,
    pub user_agent: Option<String>,
    pub http_timeout_seconds: Option<u64>,
    pub whois_timeout_seconds: Option<u64>,
    pub tls_timeout_seconds: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            budget: FetchPolicy::default().budget,
            parallelism: DEFAULT_PARALLELISM,
            include_certificate: false,
            cache_dir: PathBuf::from(".domorg-cache"),
            cache_ttl_days: DEFAULT_CACHE_TTL_DAYS,
            mode: None,
            suffix_rules: None,
            link_lexicon: None,
            controller_lexicon: None,
            designators: None,
            triggers: None,
            blocklist: None,
            known_orgs: None,
            whois_servers: None,
            redaction_lexicon: None,
            ev_oids: None,
            model: None,
            search_endpoint: None,
            search_key_env: DEFAULT_SEARCH_KEY_ENV.to_string(),
            user_agent: None,
            http_timeout_seconds: None,
            whois_timeout_seconds: None,
            tls_timeout_seconds: None,
        }
    }
}

impl Config {
    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's own directory.
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Config::from_text(&text, base, path)
    }

    /// Parses config text. `base` anchors relative paths; `origin` is only
    /// used in error messages.
    pub fn from_text(text: &str, base: &Path, origin: &Path) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        let mut fixtures: Option<PathBuf> = None;
        let mut mode_word: Option<String> = None;
        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad_line(origin, line_no, "expected key = value"));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(bad_line(origin, line_no, format!("{key} has no value")));
            }
            match key {
                "budget" => config.budget = parse_number(origin, line_no, key, value)?,
                "parallelism" => config.parallelism = parse_number(origin, line_no, key, value)?,
                "include_certificate" => {
                    config.include_certificate = parse_bool(origin, line_no, key, value)?
                }
                "cache_dir" => config.cache_dir = base.join(value),
                "cache_ttl_days" => {
                    config.cache_ttl_days = parse_number(origin, line_no, key, value)?
                }
                "mode" => mode_word = Some(value.to_string()),
                "fixtures" => fixtures = Some(base.join(value)),
                "suffix_rules" => config.suffix_rules = Some(base.join(value)),
                "link_lexicon" => config.link_lexicon = Some(base.join(value)),
                "controller_lexicon" => config.controller_lexicon = Some(base.join(value)),
                "designators" => config.designators = Some(base.join(value)),
                "triggers" => config.triggers = Some(base.join(value)),
                "blocklist" => config.blocklist = Some(base.join(value)),
                "known_orgs" => config.known_orgs = Some(base.join(value)),
                "whois_servers" => config.whois_servers = Some(base.join(value)),
                "redaction_lexicon" => config.redaction_lexicon = Some(base.join(value)),
                "ev_oids" => config.ev_oids = Some(base.join(value)),
                "model" => config.model = Some(base.join(value)),
                "search_endpoint" => config.search_endpoint = Some(value.to_string()),
                "search_key_env" => config.search_key_env = value.to_string(),
                "user_agent" => config.user_agent = Some(value.to_string()),
                "http_timeout_seconds" => {
                    config.http_timeout_seconds = Some(parse_number(origin, line_no, key, value)?)
                }
                "whois_timeout_seconds" => {
                    config.whois_timeout_seconds = Some(parse_number(origin, line_no, key, value)?)
                }
                "tls_timeout_seconds" => {
                    config.tls_timeout_seconds = Some(parse_number(origin, line_no, key, value)?)
                }
                _ => {
                    return Err(bad_line(origin, line_no, format!("unknown key {key}")));
                }
            }
        }
        config.mode = match mode_word.as_deref() {
            None => None,
            Some("live") => Some(StoreMode::Live),
            Some(word @ ("replay" | "record")) => {
                let Some(dir) = fixtures else {
                    return Err(bad_line(
                        origin,
                        text.lines().count(),
                        format!("mode = {word} requires a fixtures directory"),
                    ));
                };
                if word == "replay" {
                    Some(StoreMode::Replay(dir))
                } else {
                    Some(StoreMode::Record(dir))
                }
            }
            Some(other) => {
                return Err(bad_line(
                    origin,
                    text.lines().count(),
                    format!("mode must be replay, record, or live, not {other}"),
                ));
            }
        };
        config.check_paths()?;
        Ok(config)
    }

    fn check_paths(&self) -> Result<(), ConfigError> {
        let referenced: [(&'static str, &Option<PathBuf>); 11] = [
            ("suffix_rules", &self.suffix_rules),
            ("link_lexicon", &self.link_lexicon),
            ("controller_lexicon", &self.controller_lexicon),
            ("designators", &self.designators),
            ("triggers", &self.triggers),
            ("blocklist", &self.blocklist),
            ("known_orgs", &self.known_orgs),
            ("whois_servers", &self.whois_servers),
            ("redaction_lexicon", &self.redaction_lexicon),
            ("ev_oids", &self.ev_oids),
            ("model", &self.model),
        ];
        for (key, path) in referenced {
            if let Some(path) = path {
                if !path.is_file() {
                    return Err(ConfigError::MissingFile {
                        key,
                        path: path.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Loads every component, substituting bundled defaults where no path
    /// was configured.
    pub fn bundle(&self) -> Result<Bundle, ConfigError> {
        let suffix_rules = match &self.suffix_rules {
            Some(path) => {
                let text = read(path)?;
                SuffixRules::parse(&text).map_err(|e| component("suffix rules", e))?
            }
            None => SuffixRules::bundled().clone(),
        };
        let link_lexicon = match &self.link_lexicon {
            Some(path) => LinkLexicon::from_file(path).map_err(|e| component("link lexicon", e))?,
            None => LinkLexicon::bundled().clone(),
        };
        let controller_lexicon = match &self.controller_lexicon {
            Some(path) => {
                ControllerLexicon::from_file(path).map_err(|e| component("controller lexicon", e))?
            }
            None => ControllerLexicon::bundled().clone(),
        };
        let entity_rules = match (&self.designators, &self.triggers, &self.blocklist) {
            (None, None, None) => EntityRules::bundled().clone(),
            (Some(designators), Some(triggers), Some(blocklist)) => {
                EntityRules::from_files(designators, triggers, blocklist)
                    .map_err(|e| component("entity rules", e))?
            }
            _ => {
                return Err(ConfigError::Component {
                    what: "entity rules",
                    detail: "designators, triggers, and blocklist must be set together".to_string(),
                });
            }
        };
        let known_orgs = match &self.known_orgs {
            Some(path) => KnownOrgs::from_file(path).map_err(|e| component("known orgs", e))?,
            None => KnownOrgs::bundled().clone(),
        };
        let whois_servers = match &self.whois_servers {
            Some(path) => ServerMap::from_file(path).map_err(|e| component("whois servers", e))?,
            None => ServerMap::bundled().clone(),
        };
        let redaction_lexicon = match &self.redaction_lexicon {
            Some(path) => {
                RedactionLexicon::from_file(path).map_err(|e| component("redaction lexicon", e))?
            }
            None => RedactionLexicon::bundled().clone(),
        };
        let ev_policies = match &self.ev_oids {
            Some(path) => EvPolicyList::from_file(path).map_err(|e| component("EV OID list", e))?,
            None => EvPolicyList::bundled().clone(),
        };
        let model = match &self.model {
            Some(path) => PolicyClassifier::load(path).map_err(|e| component("classifier model", e))?,
            None => PolicyClassifier::bundled().clone(),
        };
        Ok(Bundle {
            suffix_rules,
            link_lexicon,
            controller_lexicon,
            entity_rules,
            known_orgs,
            whois_servers,
            redaction_lexicon,
            ev_policies,
            model,
        })
    }

    /// Opens the fixture store for `mode`. Live mode records through the
    /// evidence cache so repeated lookups inside the TTL reuse what was
    /// already fetched.
    pub fn open_store(&self, mode: StoreMode) -> Result<FixtureStore, ConfigError> {
        match mode {
            StoreMode::Replay(dir) => Ok(FixtureStore::replay(dir)?),
            StoreMode::Record(dir) => Ok(FixtureStore::record(dir, self.live_transport())?),
            StoreMode::Live => {
                let store = FixtureStore::record(&self.cache_dir, self.live_transport())?
                    .with_ttl_seconds(self.cache_ttl_days.saturating_mul(SECONDS_PER_DAY));
                Ok(store)
            }
        }
    }

    pub fn fetch_policy(&self) -> FetchPolicy {
        FetchPolicy {
            budget: self.budget,
            include_certificate: self.include_certificate,
        }
    }

    fn live_transport(&self) -> Box<LiveTransport> {
        let defaults = TransportConfig::default();
        let search = self.search_endpoint.as_ref().map(|endpoint| SearchProvider {
            endpoint: endpoint.clone(),
            api_key_env: self.search_key_env.clone(),
        });
        Box::new(LiveTransport::new(TransportConfig {
            http_timeout: self
                .http_timeout_seconds
                .map_or(defaults.http_timeout, Duration::from_secs),
            whois_timeout: self
                .whois_timeout_seconds
                .map_or(defaults.whois_timeout, Duration::from_secs),
            tls_timeout: self
                .tls_timeout_seconds
                .map_or(defaults.tls_timeout, Duration::from_secs),
            user_agent: self
                .user_agent
                .clone()
                .unwrap_or(defaults.user_agent),
            search,
        }))
    }
}

/// Every loaded component the pipeline needs, owned so it outlives any one
/// store or resolver.
#[derive(Debug)]
pub struct Bundle {
    pub suffix_rules: SuffixRules,
    pub link_lexicon: LinkLexicon,
    pub controller_lexicon: ControllerLexicon,
    pub entity_rules: EntityRules,
    pub known_orgs: KnownOrgs,
    pub whois_servers: ServerMap,
    pub redaction_lexicon: RedactionLexicon,
    pub ev_policies: EvPolicyList,
    pub model: PolicyClassifier,
}

impl Bundle {
    pub fn resolver<'a>(&'a self, store: &'a FixtureStore) -> Resolver<'a> {
        Resolver {
            store,
            suffix_rules: &self.suffix_rules,
            link_lexicon: &self.link_lexicon,
            controller_lexicon: &self.controller_lexicon,
            entity_rules: &self.entity_rules,
            model: &self.model,
            whois_servers: &self.whois_servers,
            redaction_lexicon: &self.redaction_lexicon,
            ev_policies: &self.ev_policies,
        }
    }
}

fn bad_line(path: &Path, line: usize, reason: impl Into<String>) -> ConfigError {
    ConfigError::Line {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn component(what: &'static str, error: impl std::fmt::Display) -> ConfigError {
    ConfigError::Component {
        what,
        detail: error.to_string(),
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_number<T: std::str::FromStr>(
    origin: &Path,
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| bad_line(origin, line, format!("{key} must be a number, got {value}")))
}

fn parse_bool(origin: &Path, line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad_line(
            origin,
            line,
            format!("{key} must be true or false, got {value}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, ConfigError> {
        Config::from_text(text, Path::new("/tmp"), Path::new("/tmp/test.conf"))
    }

    #[test]
    fn empty_text_yields_working_defaults() {
        let config = parse("").unwrap();
        assert_eq!(config.budget, 5);
        assert_eq!(config.parallelism, DEFAULT_PARALLELISM);
        assert!(!config.include_certificate);
        assert_eq!(config.search_key_env, DEFAULT_SEARCH_KEY_ENV);
        assert!(config.mode.is_none());
        let bundle = config.bundle().unwrap();
        assert!(bundle.known_orgs.contains("Google LLC"));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let config = parse("# a comment\n\nbudget = 7\n").unwrap();
        assert_eq!(config.budget, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("bandwidth = 9\n").unwrap_err();
        assert!(matches!(err, ConfigError::Line { line: 1, .. }), "{err}");
    }

    #[test]
    fn values_are_type_checked() {
        assert!(parse("budget = many\n").is_err());
        assert!(parse("include_certificate = yes\n").is_err());
        assert!(parse("budget =\n").is_err());
        assert!(parse("just words\n").is_err());
    }

    #[test]
    fn referenced_files_must_exist() {
        let err = parse("model = nowhere/model.json\n").unwrap_err();
        match err {
            ConfigError::MissingFile { key, path } => {
                assert_eq!(key, "model");
                assert_eq!(path, PathBuf::from("/tmp/nowhere/model.json"));
            }
            other => panic!("expected MissingFile, got {other}"),
        }
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let lexicon = dir.path().join("links.txt");
        std::fs::write(&lexicon, "privacy policy\n").unwrap();
        let config_path = dir.path().join("domorg.conf");
        std::fs::write(&config_path, "link_lexicon = links.txt\n").unwrap();
        let config = Config::load(&config_path).unwrap();
        assert_eq!(config.link_lexicon, Some(lexicon));
        config.bundle().unwrap();
    }

    #[test]
    fn mode_needs_a_fixtures_directory_except_live() {
        assert!(parse("mode = replay\n").is_err());
        assert!(parse("mode = flight\n").is_err());
        let config = parse("mode = live\n").unwrap();
        assert_eq!(config.mode, Some(StoreMode::Live));
        let config = parse("mode = record\nfixtures = captures\n").unwrap();
        assert_eq!(
            config.mode,
            Some(StoreMode::Record(PathBuf::from("/tmp/captures")))
        );
    }

    #[test]
    fn entity_rule_paths_come_as_a_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("designators.txt");
        std::fs::write(&path, "inc\n").unwrap();
        let text = format!("designators = {}\n", path.display());
        let config = parse(&text).unwrap();
        let err = config.bundle().unwrap_err();
        assert!(matches!(err, ConfigError::Component { .. }), "{err}");
    }

    #[test]
    fn replay_mode_opens_an_archive_without_any_transport() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("transactions")).unwrap();
        std::fs::write(dir.path().join("index.txt"), "").unwrap();
        let config = Config::default();
        let store = config
            .open_store(StoreMode::Replay(dir.path().to_path_buf()))
            .unwrap();
        assert!(store.transactions().is_empty());
    }

    #[test]
    fn custom_model_path_is_honored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let bundled = PolicyClassifier::bundled();
        bundled.save(&path).unwrap();
        let text = format!("model = {}\n", path.display());
        let config = parse(&text).unwrap();
        let bundle = config.bundle().unwrap();
        assert_eq!(bundle.model.weights(), bundled.weights());
    }
}
