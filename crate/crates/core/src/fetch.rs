//! Budgeted page fetching with explicit redirect handling.
//!
//! The [`Fetcher`] sits between the pipeline and the
//! [`FixtureStore`](crate::replay::FixtureStore). It enforces the fetch
//! budget (a hard cap on HTTP requests per registrable domain within one
//! resolution run), follows redirects hop by hop so each hop is budgeted
//! against its own registrable domain, and reports when a chain crosses
//! registrable domains, which downstream treats as a trust red flag rather
//! than ordinary site structure.
//!
//! WHOIS, TLS and search transactions are not fetched here and are exempt
//! from the budget by construction.

use std::collections::HashMap;

use thiserror::Error;

use crate::domain::{Fqdn, SuffixRules};
use crate::replay::{FixtureStore, HttpOutcome, HttpRequest, ReplayError};

/// Default cap on HTTP requests per registrable domain per resolution run.
pub const DEFAULT_BUDGET: u32 = 5;

/// Cap on redirect hops before a chain is abandoned.
const MAX_REDIRECT_HOPS: usize = 5;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("fetch budget for {domain} exhausted ({limit} requests)")]
    BudgetExhausted { domain: String, limit: u32 },
    #[error("{url}: not a fetchable URL: {reason}")]
    BadUrl { url: String, reason: String },
    #[error("{url}: request timed out")]
    Timeout { url: String },
    #[error("{url}: {reason}")]
    Transport { url: String, reason: String },
    #[error("{url}: redirect chain exceeded {MAX_REDIRECT_HOPS} hops")]
    TooManyRedirects { url: String },
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Counts HTTP requests per registrable domain and refuses to exceed the cap.
#[derive(Debug)]
pub struct BudgetTracker {
    limit: u32,
    counts: HashMap<String, u32>,
}

impl BudgetTracker {
    pub fn new(limit: u32) -> BudgetTracker {
        BudgetTracker {
            limit,
            counts: HashMap::new(),
        }
    }

    /// Consumes one request against `domain`, failing when the cap is hit.
    pub fn consume(&mut self, domain: &str) -> Result<(), FetchError> {
        let count = self.counts.entry(domain.to_string()).or_insert(0);
        if *count >= self.limit {
            return Err(FetchError::BudgetExhausted {
                domain: domain.to_string(),
                limit: self.limit,
            });
        }
        *count += 1;
        Ok(())
    }

    pub fn spent(&self, domain: &str) -> u32 {
        self.counts.get(domain).copied().unwrap_or(0)
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }
}

/// A fetched page after redirect resolution.
#[derive(Debug, Clone)]
pub struct Page {
    /// URL that produced the final response.
    pub final_url: String,
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
    /// Every URL requested, in order, including `final_url`.
    pub chain: Vec<String>,
    /// True when any hop landed on a different registrable domain than the
    /// one originally requested.
    pub crossed_registrable_domain: bool,
}

impl Page {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Body as text, lossily decoding non-UTF-8 bytes.
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

/// Fetches pages for one resolution run, budgeting per registrable domain.
pub struct Fetcher<'a> {
    store: &'a FixtureStore,
    rules: &'a SuffixRules,
    budget: BudgetTracker,
}

impl<'a> Fetcher<'a> {
    pub fn new(store: &'a FixtureStore, rules: &'a SuffixRules, budget_limit: u32) -> Fetcher<'a> {
        Fetcher {
            store,
            rules,
            budget: BudgetTracker::new(budget_limit),
        }
    }

    pub fn budget(&self) -> &BudgetTracker {
        &self.budget
    }

    /// Fetches `url`, following redirects. Every hop consumes budget from
    /// the registrable domain it actually requests.
    pub fn fetch(&mut self, url: &str) -> Result<Page, FetchError> {
        let origin_domain = budget_domain(url, self.rules)?;
        let mut current = normalize_fetch_url(url)?;
        let mut chain = Vec::new();
        let mut crossed = false;

        loop {
            if chain.len() >= MAX_REDIRECT_HOPS + 1 {
                return Err(FetchError::TooManyRedirects { url: url.to_string() });
            }
            let hop_domain = budget_domain(&current, self.rules)?;
            if hop_domain != origin_domain {
                crossed = true;
            }
            self.budget.consume(&hop_domain)?;
            chain.push(current.clone());

            let outcome = self.store.http(&HttpRequest::get(&current))?;
            match outcome {
                HttpOutcome::Timeout => {
                    return Err(FetchError::Timeout { url: current });
                }
                HttpOutcome::TransportFailure { reason } => {
                    return Err(FetchError::Transport { url: current, reason });
                }
                HttpOutcome::Response {
                    status,
                    headers,
                    body,
                } => {
                    if is_redirect(status) {
                        let location = header_value(&headers, "location");
                        match location {
                            Some(target) => {
                                current = resolve_location(&current, &target)?;
                                continue;
                            }
                            None => {
                                // A redirect status with no target is terminal.
                                return Ok(Page {
                                    final_url: current,
                                    status,
                                    content_type: header_value(&headers, "content-type"),
                                    body: body.bytes()?,
                                    chain,
                                    crossed_registrable_domain: crossed,
                                });
                            }
                        }
                    }
                    return Ok(Page {
                        final_url: current,
                        status,
                        content_type: header_value(&headers, "content-type"),
                        body: body.bytes()?,
                        chain,
                        crossed_registrable_domain: crossed,
                    });
                }
            }
        }
    }
}

fn is_redirect(status: u16) -> bool {
    matches!(status, 301 | 302 | 303 | 307 | 308)
}

fn header_value(headers: &[(String, String)], name: &str) -> Option<String> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.clone())
}

/// Validates and normalizes a URL for fetching: http/https only, host
/// required.
fn normalize_fetch_url(raw: &str) -> Result<String, FetchError> {
    let parsed = url::Url::parse(raw).map_err(|e| FetchError::BadUrl {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    if !matches!(parsed.scheme(), "http" | "https") {
        return Err(FetchError::BadUrl {
            url: raw.to_string(),
            reason: format!("unsupported scheme {:?}", parsed.scheme()),
        });
    }
    if parsed.host_str().is_none() {
        return Err(FetchError::BadUrl {
            url: raw.to_string(),
            reason: "no host".into(),
        });
    }
    Ok(parsed.to_string())
}

/// Resolves a Location header against the URL that produced it.
fn resolve_location(base: &str, location: &str) -> Result<String, FetchError> {
    let base_url = url::Url::parse(base).map_err(|e| FetchError::BadUrl {
        url: base.to_string(),
        reason: e.to_string(),
    })?;
    let target = base_url.join(location).map_err(|e| FetchError::BadUrl {
        url: location.to_string(),
        reason: e.to_string(),
    })?;
    normalize_fetch_url(target.as_str())
}

/// The registrable domain a URL's request is budgeted against. Hosts that
/// are not domain names (IP literals, bare suffixes) budget under their
/// verbatim host text.
fn budget_domain(raw: &str, rules: &SuffixRules) -> Result<String, FetchError> {
    let parsed = url::Url::parse(raw).map_err(|e| FetchError::BadUrl {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    let host = parsed.host_str().ok_or_else(|| FetchError::BadUrl {
        url: raw.to_string(),
        reason: "no host".into(),
    })?;
    Ok(registrable_or_host(host, rules))
}

/// Registrable domain of `host`, or the host itself when derivation is not
/// possible.
pub fn registrable_or_host(host: &str, rules: &SuffixRules) -> String {
    match Fqdn::parse(host) {
        Ok(fqdn) => match fqdn.registrable_with(rules) {
            Ok(rd) => rd.text().to_string(),
            Err(_) => fqdn.text().to_string(),
        },
        Err(_) => host.to_ascii_lowercase(),
    }
}
