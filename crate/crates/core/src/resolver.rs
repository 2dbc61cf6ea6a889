//! Domain-to-organization resolution: policy analysis first, WHOIS second,
//! never both when the first succeeds cleanly.
//!
//! The policy path carries a trust condition: if the homepage redirect chain
//! ended on a different registrable domain, whatever controller the landed
//! page discloses belongs to someone else's site, so the result is discarded
//! and the lookup falls through to WHOIS. A resolution therefore queries
//! WHOIS only when the policy stage failed or was red-flagged, which keeps
//! the transaction log itself an audit trail of the decision.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certinfo::{summarize_certificate, CertificateSummary, EvPolicyList};
use crate::discovery::{discover, search_policy, CandidateSource, DiscoveryError, LinkLexicon};
use crate::domain::{DomainError, Fqdn, SuffixRules};
use crate::fetch::{FetchError, Fetcher};
use crate::policy::classifier::PolicyClassifier;
use crate::policy::controller::EntityRules;
use crate::policy::{analyze, ControllerLexicon, PolicyError};
use crate::replay::{FixtureStore, TlsOutcome};
use crate::whois::{RedactionLexicon, RegistrantField, ServerMap, WhoisClient};

/// How many policy candidates are fetched per discovery source.
const CANDIDATES_PER_SOURCE: usize = 2;

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("invalid domain: {0}")]
    InvalidDomain(#[from] DomainError),
}

/// How the organization was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PolicyAnalysis,
    Whois,
    Unidentified,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::PolicyAnalysis => "policy_analysis",
            Method::Whois => "whois",
            Method::Unidentified => "unidentified",
        }
    }
}

/// Trust and failure annotations accumulated during resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flag {
    /// The homepage redirect chain ended on a different registrable domain.
    CrossSldRedirect,
    /// The policy path gave up at the named stage.
    PolicyStageFailed(String),
    /// WHOIS answered with privacy-proxy boilerplate instead of a name.
    WhoisRedacted,
}

impl Flag {
    pub fn as_text(&self) -> String {
        match self {
            Flag::CrossSldRedirect => "cross_sld_redirect".into(),
            Flag::PolicyStageFailed(stage) => format!("policy_stage_failed:{stage}"),
            Flag::WhoisRedacted => "whois_redacted".into(),
        }
    }

    pub fn parse(text: &str) -> Option<Flag> {
        match text {
            "cross_sld_redirect" => Some(Flag::CrossSldRedirect),
            "whois_redacted" => Some(Flag::WhoisRedacted),
            other => other
                .strip_prefix("policy_stage_failed:")
                .map(|stage| Flag::PolicyStageFailed(stage.to_string())),
        }
    }
}

impl Serialize for Flag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_text())
    }
}

impl<'de> Deserialize<'de> for Flag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Flag, D::Error> {
        let text = String::deserialize(deserializer)?;
        Flag::parse(&text).ok_or_else(|| serde::de::Error::custom(format!("unknown flag {text:?}")))
    }
}

/// Where the attribution came from, precisely enough to re-derive it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Policy {
        url: String,
        paragraph_index: usize,
    },
    Whois {
        server: String,
        query: String,
    },
}

/// The outcome of resolving one domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    pub input_fqdn: String,
    pub registrable_domain: String,
    pub organization: Option<String>,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evidence: Option<Evidence>,
    pub flags: Vec<Flag>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate_note: Option<CertificateSummary>,
}

impl Attribution {
    pub fn has_flag(&self, flag: &Flag) -> bool {
        self.flags.contains(flag)
    }
}

/// Per-resolution limits and options.
#[derive(Debug, Clone, Copy)]
pub struct FetchPolicy {
    /// HTTP request cap per registrable domain.
    pub budget: u32,
    /// Attach a certificate summary as informational evidence.
    pub include_certificate: bool,
}

impl Default for FetchPolicy {
    fn default() -> FetchPolicy {
        FetchPolicy {
            budget: crate::fetch::DEFAULT_BUDGET,
            include_certificate: false,
        }
    }
}

/// Everything a resolution needs, shared across domains.
pub struct Resolver<'a> {
    pub store: &'a FixtureStore,
    pub suffix_rules: &'a SuffixRules,
    pub link_lexicon: &'a LinkLexicon,
    pub controller_lexicon: &'a ControllerLexicon,
    pub entity_rules: &'a EntityRules,
    pub model: &'a PolicyClassifier,
    pub whois_servers: &'a ServerMap,
    pub redaction_lexicon: &'a RedactionLexicon,
    pub ev_policies: &'a EvPolicyList,
}

/// What the policy stage produced before trust checks.
struct PolicyOutcome {
    controller: String,
    url: String,
    paragraph_index: usize,
}

impl<'a> Resolver<'a> {
    /// Resolves one domain. Network and content failures never escape; they
    /// become flags on an Unidentified result. Only an unusable input
    /// domain is an error.
    pub fn resolve(&self, fqdn: &str, policy: FetchPolicy) -> Result<Attribution, ResolveError> {
        let parsed = Fqdn::parse(fqdn)?;
        let rd = parsed.registrable_with(self.suffix_rules)?;

        let mut flags: Vec<Flag> = Vec::new();
        let mut cross_sld = false;

        let policy_result = self.run_policy_stage(&rd, policy, &mut cross_sld);

        match policy_result {
            Ok(outcome) if !cross_sld => {
                return Ok(Attribution {
                    input_fqdn: parsed.text().to_string(),
                    registrable_domain: rd.text().to_string(),
                    organization: Some(outcome.controller),
                    method: Method::PolicyAnalysis,
                    evidence: Some(Evidence::Policy {
                        url: outcome.url,
                        paragraph_index: outcome.paragraph_index,
                    }),
                    flags,
                    certificate_note: self.certificate_note(&rd, policy),
                });
            }
            Ok(_) => {
                // A controller extracted from the far side of a cross-domain
                // redirect describes the wrong site. Drop it.
                flags.push(Flag::CrossSldRedirect);
            }
            Err(stage) => {
                if cross_sld {
                    flags.push(Flag::CrossSldRedirect);
                }
                flags.push(Flag::PolicyStageFailed(stage));
            }
        }

        let (organization, evidence) = match self.run_whois_stage(&rd, &mut flags) {
            Some((org, evidence)) => (Some(org), Some(evidence)),
            None => (None, None),
        };
        let method = if organization.is_some() {
            Method::Whois
        } else {
            Method::Unidentified
        };
        Ok(Attribution {
            input_fqdn: parsed.text().to_string(),
            registrable_domain: rd.text().to_string(),
            organization,
            method,
            evidence,
            flags,
            certificate_note: self.certificate_note(&rd, policy),
        })
    }

    /// Runs discovery and page analysis. Returns the extracted controller or
    /// the name of the stage that stopped the pipeline. `cross_sld` is set
    /// from the homepage resolution either way.
    fn run_policy_stage(
        &self,
        rd: &crate::domain::RegistrableDomain,
        policy: FetchPolicy,
        cross_sld: &mut bool,
    ) -> Result<PolicyOutcome, String> {
        let mut fetcher = Fetcher::new(self.store, self.suffix_rules, policy.budget);
        let discovery = discover(
            rd,
            &mut fetcher,
            self.store,
            self.link_lexicon,
            self.suffix_rules,
        )
        .map_err(|e| discovery_stage(&e))?;
        *cross_sld = discovery.homepage.cross_sld_redirect;

        let mut tried: Vec<String> = Vec::new();
        let from_links = discovery.candidates[0].source == CandidateSource::HomepageLink;
        let first_pass = self.try_candidates(
            &discovery.candidates,
            &mut fetcher,
            &mut tried,
        );
        let first_failure = match first_pass {
            Ok(outcome) => return Ok(outcome),
            Err(failure) => failure,
        };
        if let CandidateFailure::PastGate(stage) = first_failure {
            return Err(stage);
        }

        // Homepage links led nowhere before the classifier gate; spend what
        // is left of the budget on search results.
        if from_links {
            if let Ok(candidates) =
                search_policy(rd, self.store, self.link_lexicon, self.suffix_rules)
            {
                match self.try_candidates(&candidates, &mut fetcher, &mut tried) {
                    Ok(outcome) => return Ok(outcome),
                    Err(CandidateFailure::PastGate(stage)) => return Err(stage),
                    Err(CandidateFailure::BeforeGate(stage)) => return Err(stage),
                }
            }
        }
        match first_failure {
            CandidateFailure::BeforeGate(stage) => Err(stage),
            CandidateFailure::PastGate(stage) => Err(stage),
        }
    }

    /// Fetches and analyzes up to two candidates, skipping past failures
    /// that happen before the classifier accepts a page and stopping at the
    /// first page that gets past it.
    fn try_candidates(
        &self,
        candidates: &[crate::discovery::PolicyCandidate],
        fetcher: &mut Fetcher<'_>,
        tried: &mut Vec<String>,
    ) -> Result<PolicyOutcome, CandidateFailure> {
        let mut last_stage = "no_candidates".to_string();
        let mut attempted = 0;
        for candidate in candidates {
            if attempted >= CANDIDATES_PER_SOURCE {
                break;
            }
            if tried.contains(&candidate.url) {
                continue;
            }
            tried.push(candidate.url.clone());
            attempted += 1;

            let page = match fetcher.fetch(&candidate.url) {
                Ok(page) if page.is_success() => page,
                Ok(page) => {
                    last_stage = format!("candidate_status_{}", page.status);
                    continue;
                }
                Err(FetchError::BudgetExhausted { .. }) => {
                    return Err(CandidateFailure::BeforeGate("budget_exhausted".into()));
                }
                Err(_) => {
                    last_stage = "candidate_fetch_failed".to_string();
                    continue;
                }
            };

            match analyze(
                &page.final_url,
                &page.body,
                self.model,
                self.controller_lexicon,
                self.entity_rules,
            ) {
                Ok(extraction) => {
                    return Ok(PolicyOutcome {
                        controller: extraction.controller,
                        url: page.final_url,
                        paragraph_index: extraction.paragraph_index,
                    })
                }
                // The page was accepted as a policy; later stages failing
                // means the policy exists but discloses nothing usable, so
                // other candidates are moot.
                Err(PolicyError::NoQualifyingParagraphs) => {
                    return Err(CandidateFailure::PastGate("no_qualifying_paragraphs".into()))
                }
                Err(PolicyError::NoController) => {
                    return Err(CandidateFailure::PastGate("no_controller".into()))
                }
                Err(PolicyError::EmptyDocument) => {
                    last_stage = "empty_document".into();
                }
                Err(PolicyError::NotEnglish { .. }) => {
                    last_stage = "not_english".into();
                }
                Err(PolicyError::NotAPolicy { .. }) => {
                    last_stage = "not_a_policy".into();
                }
            }
        }
        Err(CandidateFailure::BeforeGate(last_stage))
    }

    /// Queries WHOIS and interprets the registrant field. `None` means no
    /// usable organization; a redaction is flagged.
    fn run_whois_stage(
        &self,
        rd: &crate::domain::RegistrableDomain,
        flags: &mut Vec<Flag>,
    ) -> Option<(String, Evidence)> {
        let client = WhoisClient::new(self.store, self.whois_servers, self.redaction_lexicon);
        let lookup = client.lookup(rd).ok()?;
        match lookup.registrant {
            RegistrantField::Org(name) => {
                let server = lookup.servers.last().cloned().unwrap_or_default();
                Some((
                    name,
                    Evidence::Whois {
                        server,
                        query: rd.text().to_string(),
                    },
                ))
            }
            RegistrantField::Redacted(_) => {
                flags.push(Flag::WhoisRedacted);
                None
            }
            RegistrantField::Empty | RegistrantField::Absent => None,
        }
    }

    /// Fetches and summarizes the site's TLS leaf certificate, as
    /// informational context only; it never contributes an organization.
    fn certificate_note(
        &self,
        rd: &crate::domain::RegistrableDomain,
        policy: FetchPolicy,
    ) -> Option<CertificateSummary> {
        if !policy.include_certificate {
            return None;
        }
        match self.store.tls(rd.text(), 443).ok()? {
            TlsOutcome::Leaf { der } => summarize_certificate(&der, self.ev_policies).ok(),
            TlsOutcome::NoTls | TlsOutcome::HandshakeFailure { .. } => None,
        }
    }

    /// Resolves many domains with per-domain budgets, memoizing by
    /// registrable domain so shared domains resolve once. Output order
    /// matches input order regardless of scheduling.
    pub fn resolve_batch(
        &self,
        fqdns: &[String],
        policy: FetchPolicy,
        parallelism: usize,
    ) -> Vec<Result<Attribution, ResolveError>> {
        let parallelism = parallelism.max(1);

        // Group inputs by registrable domain so each group resolves exactly
        // once, then fan the shared outcome back out to every input.
        struct Group {
            representative: String,
            members: Vec<usize>,
        }
        let mut groups: Vec<Group> = Vec::new();
        let mut group_of: HashMap<String, usize> = HashMap::new();
        let mut invalid: Vec<(usize, ResolveError)> = Vec::new();

        for (index, fqdn) in fqdns.iter().enumerate() {
            let key = match Fqdn::parse(fqdn)
                .and_then(|f| f.registrable_with(self.suffix_rules))
            {
                Ok(rd) => rd.text().to_string(),
                Err(e) => {
                    invalid.push((index, ResolveError::InvalidDomain(e)));
                    continue;
                }
            };
            match group_of.get(&key) {
                Some(&g) => groups[g].members.push(index),
                None => {
                    group_of.insert(key, groups.len());
                    groups.push(Group {
                        representative: fqdn.clone(),
                        members: vec![index],
                    });
                }
            }
        }

        let next_group = AtomicUsize::new(0);
        let outcomes: Mutex<Vec<Option<Attribution>>> =
            Mutex::new(vec![None; groups.len()]);
        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(groups.len().max(1)) {
                scope.spawn(|| loop {
                    let g = next_group.fetch_add(1, Ordering::SeqCst);
                    if g >= groups.len() {
                        break;
                    }
                    // The representative parsed already, so resolve cannot
                    // return InvalidDomain here.
                    let attribution = self
                        .resolve(&groups[g].representative, policy)
                        .expect("representative domain validated during grouping");
                    outcomes.lock().unwrap()[g] = Some(attribution);
                });
            }
        });
        let outcomes = outcomes.into_inner().unwrap();

        let mut results: Vec<Option<Result<Attribution, ResolveError>>> =
            (0..fqdns.len()).map(|_| None).collect();
        for (index, error) in invalid {
            results[index] = Some(Err(error));
        }
        for (g, group) in groups.iter().enumerate() {
            let outcome = outcomes[g].clone().expect("every group resolved");
            for &index in &group.members {
                // Each input keeps its own fqdn; the attribution content is
                // shared across the group.
                let mut stamped = outcome.clone();
                stamped.input_fqdn = Fqdn::parse(&fqdns[index])
                    .expect("validated during grouping")
                    .text()
                    .to_string();
                results[index] = Some(Ok(stamped));
            }
        }
        results.into_iter().map(|r| r.expect("all slots filled")).collect()
    }
}

enum CandidateFailure {
    /// The classifier never accepted a page; other sources may still work.
    BeforeGate(String),
    /// A page was accepted but analysis failed afterwards; stop.
    PastGate(String),
}

fn discovery_stage(error: &DiscoveryError) -> String {
    match error {
        DiscoveryError::Unreachable { .. } => "homepage_unreachable".into(),
        DiscoveryError::NoCandidates { .. } => "no_candidates".into(),
        DiscoveryError::ProviderUnavailable { .. } => "search_unavailable".into(),
        DiscoveryError::BudgetExhausted { .. } => "budget_exhausted".into(),
    }
}

/// Serializes one attribution as a single JSON line.
pub fn to_record_line(attribution: &Attribution) -> String {
    serde_json::to_string(attribution).expect("attribution serializes")
}

/// Parses one JSON record line.
pub fn from_record_line(line: &str) -> Result<Attribution, serde_json::Error> {
    serde_json::from_str(line)
}
