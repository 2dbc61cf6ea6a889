//! Registration-record lookups over the classic WHOIS protocol.
//!
//! A lookup starts at the registry server for the domain's TLD (bundled
//! map, falling back to the `whois.nic.<tld>` convention), follows at most
//! two referrals to registrar servers, and extracts the registrant
//! organization field from the responses, preferring the latest hop since
//! registrar records carry the registrant detail that thin registries omit.
//!
//! The extracted field is classified before anyone trusts it: privacy
//! services fill the organization field with boilerplate ("REDACTED FOR
//! PRIVACY", "Domains By Proxy, LLC"), which must count as a redaction, not
//! an organization. Classification matches a configurable phrase lexicon
//! case-insensitively anywhere in the value.

use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use crate::domain::RegistrableDomain;
use crate::replay::{FixtureStore, ReplayError, WhoisOutcome};

/// Total queries per lookup: the registry hop plus up to two referrals.
pub const MAX_QUERIES: usize = 3;

const BUNDLED_SERVERS: &str = include_str!("../data/whois_servers.tsv");
const BUNDLED_LEXICON: &str = include_str!("../data/redaction_lexicon.txt");

#[derive(Debug, Error)]
pub enum WhoisError {
    #[error("whois query to {server} failed: {reason}")]
    Transport { server: String, reason: String },
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Map from TLD to its registry WHOIS server.
#[derive(Debug, Clone)]
pub struct ServerMap {
    servers: HashMap<String, String>,
}

static BUNDLED_MAP: LazyLock<ServerMap> = LazyLock::new(|| ServerMap::parse(BUNDLED_SERVERS));

impl ServerMap {
    pub fn bundled() -> &'static ServerMap {
        &BUNDLED_MAP
    }

    /// Parses `tld<TAB>server` lines; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> ServerMap {
        let mut servers = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((tld, server)) = line.split_once('\t') {
                servers.insert(
                    tld.trim().to_ascii_lowercase(),
                    server.trim().to_ascii_lowercase(),
                );
            }
        }
        ServerMap { servers }
    }

    pub fn from_file(path: &Path) -> std::io::Result<ServerMap> {
        Ok(ServerMap::parse(&std::fs::read_to_string(path)?))
    }

    /// The registry server for a TLD. Unknown TLDs use the `whois.nic.<tld>`
    /// convention most registries follow.
    pub fn server_for(&self, tld: &str) -> String {
        let tld = tld.to_ascii_lowercase();
        self.servers
            .get(&tld)
            .cloned()
            .unwrap_or_else(|| format!("whois.nic.{tld}"))
    }
}

/// Phrases whose presence marks an organization field as privacy
/// boilerplate.
#[derive(Debug, Clone)]
pub struct RedactionLexicon {
    phrases: Vec<String>,
}

static BUNDLED_REDACTIONS: LazyLock<RedactionLexicon> =
    LazyLock::new(|| RedactionLexicon::parse(BUNDLED_LEXICON));

impl RedactionLexicon {
    pub fn bundled() -> &'static RedactionLexicon {
        &BUNDLED_REDACTIONS
    }

    pub fn parse(text: &str) -> RedactionLexicon {
        RedactionLexicon {
            phrases: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<RedactionLexicon> {
        Ok(RedactionLexicon::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_redacted(&self, value: &str) -> bool {
        let lowered = value.to_lowercase();
        self.phrases.iter().any(|p| lowered.contains(p.as_str()))
    }
}

/// What the registrant organization field turned out to hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistrantField {
    /// A usable organization name.
    Org(String),
    /// Privacy-service boilerplate; the value is kept for evidence.
    Redacted(String),
    /// The field exists but is blank.
    Empty,
    /// No response contained the field.
    Absent,
}

/// Everything one lookup produced, for evidence and fixtures.
#[derive(Debug, Clone)]
pub struct WhoisLookup {
    pub domain: String,
    /// Servers queried, in order.
    pub servers: Vec<String>,
    /// Response text per server, same order.
    pub responses: Vec<String>,
    pub registrant: RegistrantField,
}

pub struct WhoisClient<'a> {
    store: &'a FixtureStore,
    servers: &'a ServerMap,
    lexicon: &'a RedactionLexicon,
}

impl<'a> WhoisClient<'a> {
    pub fn new(
        store: &'a FixtureStore,
        servers: &'a ServerMap,
        lexicon: &'a RedactionLexicon,
    ) -> WhoisClient<'a> {
        WhoisClient {
            store,
            servers,
            lexicon,
        }
    }

    /// Queries the registry for `domain` and follows registrar referrals.
    ///
    /// A transport failure on the first hop fails the lookup; on later hops
    /// the responses already in hand are kept, since registry data alone is
    /// often enough.
    pub fn lookup(&self, domain: &RegistrableDomain) -> Result<WhoisLookup, WhoisError> {
        let mut server = self.servers.server_for(domain.tld());
        let mut servers = Vec::new();
        let mut responses = Vec::new();

        while servers.len() < MAX_QUERIES {
            let outcome = self.store.whois(&server, domain.text())?;
            match outcome {
                WhoisOutcome::Response { text } => {
                    servers.push(server.clone());
                    responses.push(text);
                    let referral = referral_target(responses.last().unwrap());
                    match referral {
                        Some(next) if next != server => server = next,
                        _ => break,
                    }
                }
                WhoisOutcome::TransportFailure { reason } => {
                    if responses.is_empty() {
                        return Err(WhoisError::Transport { server, reason });
                    }
                    break;
                }
            }
        }

        let registrant = extract_registrant(&responses, self.lexicon);
        Ok(WhoisLookup {
            domain: domain.text().to_string(),
            servers,
            responses,
            registrant,
        })
    }
}

/// Normalizes a response line key: lowercase with spaces and dashes removed,
/// so "Registrant Organization", "registrant-organization" and
/// "RegistrantOrganisation" all compare equal.
fn normalize_key(key: &str) -> String {
    key.chars()
        .filter(|c| !c.is_whitespace() && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

/// Finds the referral target in a registry response: the "Registrar WHOIS
/// Server" field most registries use, or the terse "refer" field of IANA
/// and some ccTLDs.
fn referral_target(response: &str) -> Option<String> {
    for line in response.lines() {
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let key = normalize_key(key);
        if key != "registrarwhoisserver" && key != "refer" && key != "whoisserver" {
            continue;
        }
        let mut value = value.trim();
        for scheme in ["rwhois://", "whois://", "https://", "http://"] {
            if let Some(rest) = value.strip_prefix(scheme) {
                value = rest;
                break;
            }
        }
        let value = value.trim_end_matches('/').trim();
        if !value.is_empty() && value.contains('.') {
            return Some(value.to_ascii_lowercase());
        }
    }
    None
}

/// Pulls the registrant organization out of a chain of responses.
///
/// Later hops win: the registrar's record is authoritative for registrant
/// fields, while a thin registry often has none at all. Within a single
/// response the first matching line wins.
pub fn extract_registrant(responses: &[String], lexicon: &RedactionLexicon) -> RegistrantField {
    for response in responses.iter().rev() {
        for line in response.lines() {
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = normalize_key(key);
            if key != "registrantorganization" && key != "registrantorganisation" {
                continue;
            }
            let value = value.trim();
            if value.is_empty() {
                return RegistrantField::Empty;
            }
            if lexicon.is_redacted(value) {
                return RegistrantField::Redacted(value.to_string());
            }
            return RegistrantField::Org(value.to_string());
        }
    }
    RegistrantField::Absent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Fqdn;
    use crate::replay::testing::ScriptedTransport;
    use crate::replay::{Descriptor, Outcome};

    fn rd(text: &str) -> RegistrableDomain {
        Fqdn::parse(text).unwrap().registrable().unwrap()
    }

    fn whois_response(server: &str, query: &str, text: &str) -> (Descriptor, Outcome) {
        (
            Descriptor::whois(server, query),
            Outcome::Whois(WhoisOutcome::Response { text: text.into() }),
        )
    }

    fn client_store(pairs: Vec<(Descriptor, Outcome)>) -> FixtureStore {
        let mut transport = ScriptedTransport::new();
        for (descriptor, outcome) in pairs {
            transport = transport.on(descriptor, outcome);
        }
        FixtureStore::live(Box::new(transport))
    }

    #[test]
    fn server_map_falls_back_to_nic_convention() {
        let map = ServerMap::bundled();
        assert_eq!(map.server_for("com"), "whois.verisign-grs.com");
        assert_eq!(map.server_for("COM"), "whois.verisign-grs.com");
        assert_eq!(map.server_for("example"), "whois.nic.example");
    }

    #[test]
    fn follows_registry_referral_to_registrar() {
        let store = client_store(vec![
            whois_response(
                "whois.verisign-grs.com",
                "example.com",
                "Domain Name: EXAMPLE.COM\n\
                 Registrar WHOIS Server: whois.registrar.example\n\
                 Registrar: Example Registrar, Inc.\n",
            ),
            whois_response(
                "whois.registrar.example",
                "example.com",
                "Domain Name: example.com\n\
                 Registrant Organization: Example Holdings LLC\n",
            ),
        ]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        let lookup = client.lookup(&rd("example.com")).unwrap();
        assert_eq!(
            lookup.servers,
            vec!["whois.verisign-grs.com", "whois.registrar.example"]
        );
        assert_eq!(
            lookup.registrant,
            RegistrantField::Org("Example Holdings LLC".into())
        );
    }

    #[test]
    fn later_hop_overrides_earlier_registrant() {
        let store = client_store(vec![
            whois_response(
                "whois.verisign-grs.com",
                "example.com",
                "Registrant Organization: Registry Placeholder AB\n\
                 Registrar WHOIS Server: whois.registrar.example\n",
            ),
            whois_response(
                "whois.registrar.example",
                "example.com",
                "Registrant Organization: Actual Owner Inc.\n",
            ),
        ]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        let lookup = client.lookup(&rd("example.com")).unwrap();
        assert_eq!(
            lookup.registrant,
            RegistrantField::Org("Actual Owner Inc.".into())
        );
    }

    #[test]
    fn referral_chain_stops_at_query_cap() {
        let store = client_store(vec![
            whois_response("whois.verisign-grs.com", "example.com", "refer: whois.a.example\n"),
            whois_response("whois.a.example", "example.com", "refer: whois.b.example\n"),
            whois_response("whois.b.example", "example.com", "refer: whois.c.example\n"),
            whois_response("whois.c.example", "example.com", "Registrant Organization: Deep Org\n"),
        ]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        let lookup = client.lookup(&rd("example.com")).unwrap();
        assert_eq!(lookup.servers.len(), MAX_QUERIES);
        assert_eq!(lookup.registrant, RegistrantField::Absent);
    }

    #[test]
    fn self_referral_does_not_loop() {
        let store = client_store(vec![whois_response(
            "whois.verisign-grs.com",
            "example.com",
            "Registrar WHOIS Server: whois.verisign-grs.com\n\
             Registrant Organization: Example Corp\n",
        )]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        let lookup = client.lookup(&rd("example.com")).unwrap();
        assert_eq!(lookup.servers.len(), 1);
        assert_eq!(lookup.registrant, RegistrantField::Org("Example Corp".into()));
    }

    #[test]
    fn classifies_redacted_empty_and_absent() {
        let lexicon = RedactionLexicon::bundled();
        let redacted = vec!["Registrant Organization: REDACTED FOR PRIVACY\n".to_string()];
        assert_eq!(
            extract_registrant(&redacted, lexicon),
            RegistrantField::Redacted("REDACTED FOR PRIVACY".into())
        );

        let proxy = vec!["Registrant Organization: Domains By Proxy, LLC\n".to_string()];
        assert!(matches!(
            extract_registrant(&proxy, lexicon),
            RegistrantField::Redacted(_)
        ));

        let empty = vec!["Registrant Organization:\n".to_string()];
        assert_eq!(extract_registrant(&empty, lexicon), RegistrantField::Empty);

        let absent = vec!["Domain Name: example.com\nRegistrar: Example\n".to_string()];
        assert_eq!(extract_registrant(&absent, lexicon), RegistrantField::Absent);
    }

    #[test]
    fn accepts_organisation_spelling_and_odd_casing() {
        let lexicon = RedactionLexicon::bundled();
        let responses = vec!["REGISTRANT ORGANISATION: Beispiel GmbH\n".to_string()];
        assert_eq!(
            extract_registrant(&responses, lexicon),
            RegistrantField::Org("Beispiel GmbH".into())
        );
    }

    #[test]
    fn transport_failure_on_first_hop_is_an_error() {
        let store = client_store(vec![(
            Descriptor::whois("whois.verisign-grs.com", "example.com"),
            Outcome::Whois(WhoisOutcome::TransportFailure {
                reason: "connection refused".into(),
            }),
        )]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        assert!(matches!(
            client.lookup(&rd("example.com")),
            Err(WhoisError::Transport { .. })
        ));
    }

    #[test]
    fn transport_failure_on_referral_keeps_registry_data() {
        let store = client_store(vec![
            whois_response(
                "whois.verisign-grs.com",
                "example.com",
                "Registrant Organization: Registry Visible Corp\n\
                 Registrar WHOIS Server: whois.dead.example\n",
            ),
            (
                Descriptor::whois("whois.dead.example", "example.com"),
                Outcome::Whois(WhoisOutcome::TransportFailure {
                    reason: "timed out".into(),
                }),
            ),
        ]);
        let client = WhoisClient::new(&store, ServerMap::bundled(), RedactionLexicon::bundled());
        let lookup = client.lookup(&rd("example.com")).unwrap();
        assert_eq!(lookup.responses.len(), 1);
        assert_eq!(
            lookup.registrant,
            RegistrantField::Org("Registry Visible Corp".into())
        );
    }

    #[test]
    fn referral_strips_url_schemes() {
        assert_eq!(
            referral_target("refer: whois://whois.nic.io/\n"),
            Some("whois.nic.io".into())
        );
        assert_eq!(
            referral_target("Registrar WHOIS Server: https://whois.registrar.example\n"),
            Some("whois.registrar.example".into())
        );
        assert_eq!(referral_target("Registrar WHOIS Server:\n"), None);
        assert_eq!(referral_target("no referral here\n"), None);
    }
}
