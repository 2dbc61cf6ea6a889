//! Privacy-policy discovery: from a registrable domain to candidate policy
//! URLs.
//!
//! The order of attack mirrors how a careful human would do it, cheapest
//! first: resolve the site's homepage (https, then http), scan it for links
//! whose text or path look like a policy ("privacy policy" beats a bare
//! "legal"), and only if that yields nothing ask a search engine for
//! `<domain> privacy policy`, keeping results on the same registrable
//! domain. Candidate pages themselves are fetched by the caller, within
//! whatever request budget remains.
//!
//! A homepage that redirects off the registrable domain is suspicious
//! (parked domains redirect to registrars, dead trackers to search engines),
//! so the resolution records where the redirect chain ended; downstream
//! refuses to attribute off such a chain.

use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use crate::domain::{RegistrableDomain, SuffixRules};
use crate::fetch::{registrable_or_host, FetchError, Fetcher, Page};
use crate::html;
use crate::replay::{FixtureStore, SearchOutcome};

const BUNDLED_LEXICON: &str = include_str!("../data/link_lexicon.tsv");

/// How many search results are considered before giving up.
const SEARCH_RESULT_LIMIT: usize = 10;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("no homepage reachable for {domain}: {attempts}")]
    Unreachable { domain: String, attempts: String },
    #[error("no policy candidates found for {domain}")]
    NoCandidates {
        domain: String,
        homepage: Box<HomepageResolution>,
    },
    #[error("search provider unavailable: {reason}")]
    ProviderUnavailable { reason: String },
    #[error("fetch budget for {domain} exhausted ({limit} requests)")]
    BudgetExhausted { domain: String, limit: u32 },
}

/// Keyword weights for recognizing policy links.
#[derive(Debug, Clone)]
pub struct LinkLexicon {
    /// (keyword, weight), sorted by descending weight.
    entries: Vec<(String, u32)>,
}

static BUNDLED: LazyLock<LinkLexicon> = LazyLock::new(|| LinkLexicon::parse(BUNDLED_LEXICON));

impl LinkLexicon {
    pub fn bundled() -> &'static LinkLexicon {
        &BUNDLED
    }

    /// Parses `keyword<TAB>weight` lines; blank lines and `#` comments
    /// ignored. Keywords are casefolded.
    pub fn parse(text: &str) -> LinkLexicon {
        let mut entries: Vec<(String, u32)> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let (keyword, weight) = l.split_once('\t')?;
                Some((keyword.trim().to_lowercase(), weight.trim().parse().ok()?))
            })
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1));
        LinkLexicon { entries }
    }

    pub fn from_file(path: &Path) -> std::io::Result<LinkLexicon> {
        Ok(LinkLexicon::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weight of the highest-weight keyword contained in `text`, or 0.
    pub fn score(&self, text: &str) -> u32 {
        let lowered = text.to_lowercase();
        self.entries
            .iter()
            .find(|(keyword, _)| lowered.contains(keyword.as_str()))
            .map(|(_, weight)| *weight)
            .unwrap_or(0)
    }
}

/// How the homepage was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomepageSource {
    DirectRequest,
    SearchEngine,
}

/// Where the homepage request actually landed.
#[derive(Debug, Clone)]
pub struct HomepageResolution {
    pub final_url: String,
    /// Every URL requested while resolving, including `final_url`.
    pub redirect_chain: Vec<String>,
    /// The chain ended on a different registrable domain than requested.
    pub cross_sld_redirect: bool,
    pub source: HomepageSource,
}

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    HomepageLink,
    SearchResult,
}

/// A URL that may host the privacy policy, ranked by keyword strength.
#[derive(Debug, Clone)]
pub struct PolicyCandidate {
    pub url: String,
    pub source: CandidateSource,
    pub score: u32,
    pub anchor_text: Option<String>,
}

/// Result of the full discovery pass.
#[derive(Debug)]
pub struct Discovery {
    pub homepage: HomepageResolution,
    /// Best-first candidates; nonempty.
    pub candidates: Vec<PolicyCandidate>,
    /// The homepage page body, so callers can reuse it without re-fetching.
    pub homepage_page: Page,
}

/// Resolves the homepage of `rd`: https first, http only if https fails
/// (transport failure or non-2xx status), then a domain search as a last
/// resort. Returns the resolution and the fetched page.
pub fn resolve_homepage(
    rd: &RegistrableDomain,
    fetcher: &mut Fetcher<'_>,
    store: &FixtureStore,
    rules: &SuffixRules,
) -> Result<(HomepageResolution, Page), DiscoveryError> {
    let mut attempts = Vec::new();

    for scheme in ["https", "http"] {
        let url = format!("{scheme}://{}/", rd.text());
        match fetcher.fetch(&url) {
            Ok(page) if page.is_success() => {
                let resolution = resolution_from_page(rd, &page, HomepageSource::DirectRequest, rules);
                return Ok((resolution, page));
            }
            Ok(page) => {
                attempts.push(format!("{url} returned status {}", page.status));
            }
            Err(FetchError::BudgetExhausted { domain, limit }) => {
                return Err(DiscoveryError::BudgetExhausted { domain, limit });
            }
            Err(e) => {
                attempts.push(e.to_string());
            }
        }
    }

    // Both schemes failed; ask a search engine where the site lives.
    match store.search(rd.text()) {
        Ok(SearchOutcome::Results { urls }) => {
            let same_domain = urls
                .iter()
                .take(SEARCH_RESULT_LIMIT)
                .find(|u| url_registrable_domain(u, rules).as_deref() == Some(rd.text()));
            match same_domain {
                Some(url) => match fetcher.fetch(url) {
                    Ok(page) if page.is_success() => {
                        let resolution =
                            resolution_from_page(rd, &page, HomepageSource::SearchEngine, rules);
                        return Ok((resolution, page));
                    }
                    Ok(page) => attempts.push(format!("{url} returned status {}", page.status)),
                    Err(FetchError::BudgetExhausted { domain, limit }) => {
                        return Err(DiscoveryError::BudgetExhausted { domain, limit });
                    }
                    Err(e) => attempts.push(e.to_string()),
                },
                None => attempts.push("search returned no same-domain result".into()),
            }
        }
        Ok(SearchOutcome::Unavailable { reason }) => {
            attempts.push(format!("search unavailable: {reason}"));
        }
        Err(e) => attempts.push(format!("search replay failed: {e}")),
    }

    Err(DiscoveryError::Unreachable {
        domain: rd.text().to_string(),
        attempts: attempts.join("; "),
    })
}

fn resolution_from_page(
    rd: &RegistrableDomain,
    page: &Page,
    source: HomepageSource,
    rules: &SuffixRules,
) -> HomepageResolution {
    let final_rd = url_registrable_domain(&page.final_url, rules);
    HomepageResolution {
        final_url: page.final_url.clone(),
        redirect_chain: page.chain.clone(),
        cross_sld_redirect: final_rd.as_deref() != Some(rd.text()),
        source,
    }
}

fn url_registrable_domain(url: &str, rules: &SuffixRules) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let host = parsed.host_str()?;
    Some(registrable_or_host(host, rules))
}

/// Scores the anchors of a fetched page and returns policy candidates,
/// best first. Anchor-text matches count at full keyword weight, path-only
/// matches at half, since link text is the deliberate label.
pub fn find_policy_links(
    page_html: &str,
    base_url: &str,
    lexicon: &LinkLexicon,
) -> Result<Vec<PolicyCandidate>, DiscoveryError> {
    struct Scored {
        candidate: PolicyCandidate,
        first_seen: usize,
    }

    let mut by_url: Vec<Scored> = Vec::new();
    for (position, link) in html::links(page_html, base_url).into_iter().enumerate() {
        let Some(resolved) = link.resolved else {
            continue;
        };
        let text_score = lexicon.score(&link.text);
        let path_score = url::Url::parse(&resolved)
            .map(|u| lexicon.score(u.path()) / 2)
            .unwrap_or(0);
        let score = text_score.max(path_score);
        if score == 0 {
            continue;
        }
        match by_url.iter_mut().find(|s| s.candidate.url == resolved) {
            Some(existing) => {
                if score > existing.candidate.score {
                    existing.candidate.score = score;
                    existing.candidate.anchor_text = Some(link.text.clone());
                }
            }
            None => by_url.push(Scored {
                candidate: PolicyCandidate {
                    url: resolved,
                    source: CandidateSource::HomepageLink,
                    score,
                    anchor_text: Some(link.text).filter(|t| !t.is_empty()),
                },
                first_seen: position,
            }),
        }
    }

    by_url.sort_by(|a, b| {
        b.candidate
            .score
            .cmp(&a.candidate.score)
            .then(a.first_seen.cmp(&b.first_seen))
    });
    let candidates: Vec<PolicyCandidate> = by_url.into_iter().map(|s| s.candidate).collect();
    if candidates.is_empty() {
        return Err(DiscoveryError::NoCandidates {
            domain: base_url.to_string(),
            homepage: Box::new(HomepageResolution {
                final_url: base_url.to_string(),
                redirect_chain: vec![base_url.to_string()],
                cross_sld_redirect: false,
                source: HomepageSource::DirectRequest,
            }),
        });
    }
    Ok(candidates)
}

/// Asks the search provider for `<rd> privacy policy` and keeps results on
/// the same registrable domain, provider order preserved within equal
/// scores. Scores come from the lexicon applied to the result path, with a
/// floor of 1 so a bare same-domain hit still qualifies.
pub fn search_policy(
    rd: &RegistrableDomain,
    store: &FixtureStore,
    lexicon: &LinkLexicon,
    rules: &SuffixRules,
) -> Result<Vec<PolicyCandidate>, DiscoveryError> {
    let query = format!("{} privacy policy", rd.text());
    let outcome = store
        .search(&query)
        .map_err(|e| DiscoveryError::ProviderUnavailable {
            reason: e.to_string(),
        })?;
    let urls = match outcome {
        SearchOutcome::Results { urls } => urls,
        SearchOutcome::Unavailable { reason } => {
            return Err(DiscoveryError::ProviderUnavailable { reason })
        }
    };

    let mut candidates: Vec<PolicyCandidate> = Vec::new();
    for url in urls.iter().take(SEARCH_RESULT_LIMIT) {
        if url_registrable_domain(url, rules).as_deref() != Some(rd.text()) {
            continue;
        }
        let score = url::Url::parse(url)
            .map(|u| lexicon.score(u.path()))
            .unwrap_or(0)
            .max(1);
        candidates.push(PolicyCandidate {
            url: url.clone(),
            source: CandidateSource::SearchResult,
            score,
            anchor_text: None,
        });
    }
    if candidates.is_empty() {
        return Err(DiscoveryError::NoCandidates {
            domain: rd.text().to_string(),
            homepage: Box::new(HomepageResolution {
                final_url: String::new(),
                redirect_chain: Vec::new(),
                cross_sld_redirect: false,
                source: HomepageSource::SearchEngine,
            }),
        });
    }
    candidates.sort_by(|a, b| b.score.cmp(&a.score));
    Ok(candidates)
}

/// The full discovery pass: homepage, then links, then search fallback.
/// Candidate pages are not fetched here; the caller spends the remaining
/// budget on them.
pub fn discover(
    rd: &RegistrableDomain,
    fetcher: &mut Fetcher<'_>,
    store: &FixtureStore,
    lexicon: &LinkLexicon,
    rules: &SuffixRules,
) -> Result<Discovery, DiscoveryError> {
    let (homepage, page) = resolve_homepage(rd, fetcher, store, rules)?;
    match find_policy_links(&page.text(), &page.final_url, lexicon) {
        Ok(candidates) => Ok(Discovery {
            homepage,
            candidates,
            homepage_page: page,
        }),
        Err(DiscoveryError::NoCandidates { .. }) => {
            match search_policy(rd, store, lexicon, rules) {
                Ok(candidates) => Ok(Discovery {
                    homepage,
                    candidates,
                    homepage_page: page,
                }),
                Err(DiscoveryError::BudgetExhausted { domain, limit }) => {
                    Err(DiscoveryError::BudgetExhausted { domain, limit })
                }
                // Both sources exhausted: report the homepage evidence.
                Err(_) => Err(DiscoveryError::NoCandidates {
                    domain: rd.text().to_string(),
                    homepage: Box::new(homepage),
                }),
            }
        }
        Err(other) => Err(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Fqdn;
    use crate::fetch::DEFAULT_BUDGET;
    use crate::replay::testing::ScriptedTransport;
    use crate::replay::{Descriptor, HttpOutcome, Outcome, Payload};
    use proptest::prelude::*;

    fn rd(text: &str) -> RegistrableDomain {
        Fqdn::parse(text).unwrap().registrable().unwrap()
    }

    fn ok_html(body: &str) -> Outcome {
        Outcome::Http(HttpOutcome::Response {
            status: 200,
            headers: vec![("content-type".into(), "text/html".into())],
            body: Payload::Text(body.into()),
        })
    }

    fn redirect(to: &str) -> Outcome {
        Outcome::Http(HttpOutcome::Response {
            status: 302,
            headers: vec![("location".into(), to.into())],
            body: Payload::Text(String::new()),
        })
    }

    fn store_with(pairs: Vec<(Descriptor, Outcome)>) -> FixtureStore {
        let mut transport = ScriptedTransport::new();
        for (descriptor, outcome) in pairs {
            transport = transport.on(descriptor, outcome);
        }
        FixtureStore::live(Box::new(transport))
    }

    #[test]
    fn lexicon_orders_keywords_by_weight() {
        let lexicon = LinkLexicon::bundled();
        assert!(lexicon.score("Privacy Policy") > lexicon.score("Privacy Notice"));
        assert!(lexicon.score("privacy notice") > lexicon.score("some privacy text"));
        assert!(lexicon.score("privacy") > lexicon.score("data protection"));
        assert!(lexicon.score("data protection") > lexicon.score("legal"));
        assert_eq!(lexicon.score("about us"), 0);
    }

    #[test]
    fn https_homepage_no_redirect() {
        let store = store_with(vec![(
            Descriptor::http("GET", "https://example.com/"),
            ok_html("<html></html>"),
        )]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let (resolution, _page) =
            resolve_homepage(&rd("example.com"), &mut fetcher, &store, SuffixRules::bundled())
                .unwrap();
        assert_eq!(resolution.final_url, "https://example.com/");
        assert!(!resolution.cross_sld_redirect);
        assert_eq!(resolution.source, HomepageSource::DirectRequest);
    }

    #[test]
    fn falls_back_to_http_when_https_fails() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://example.com/"),
                Outcome::Http(HttpOutcome::TransportFailure {
                    reason: "connection refused".into(),
                }),
            ),
            (Descriptor::http("GET", "http://example.com/"), ok_html("<p>hi</p>")),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let (resolution, _) =
            resolve_homepage(&rd("example.com"), &mut fetcher, &store, SuffixRules::bundled())
                .unwrap();
        assert_eq!(resolution.final_url, "http://example.com/");
    }

    #[test]
    fn terminal_error_status_counts_as_scheme_failure() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://example.com/"),
                Outcome::Http(HttpOutcome::Response {
                    status: 503,
                    headers: vec![],
                    body: Payload::Text("unavailable".into()),
                }),
            ),
            (Descriptor::http("GET", "http://example.com/"), ok_html("<p>ok</p>")),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let (resolution, _) =
            resolve_homepage(&rd("example.com"), &mut fetcher, &store, SuffixRules::bundled())
                .unwrap();
        assert_eq!(resolution.final_url, "http://example.com/");
    }

    #[test]
    fn cross_sld_redirect_is_flagged() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://unseenreport-style.com/"),
                redirect("https://bigsearch.example/"),
            ),
            (
                Descriptor::http("GET", "https://bigsearch.example/"),
                ok_html("<html>search engine</html>"),
            ),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let (resolution, _) = resolve_homepage(
            &rd("unseenreport-style.com"),
            &mut fetcher,
            &store,
            SuffixRules::bundled(),
        )
        .unwrap();
        assert!(resolution.cross_sld_redirect);
        assert_eq!(resolution.redirect_chain.len(), 2);
    }

    #[test]
    fn search_locates_homepage_when_both_schemes_fail() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://example.com/"),
                Outcome::Http(HttpOutcome::Timeout),
            ),
            (
                Descriptor::http("GET", "http://example.com/"),
                Outcome::Http(HttpOutcome::Timeout),
            ),
            (
                Descriptor::search("example.com"),
                Outcome::Search(SearchOutcome::Results {
                    urls: vec![
                        "https://aggregator.example/profile/example.com".into(),
                        "https://www.example.com/welcome".into(),
                    ],
                }),
            ),
            (
                Descriptor::http("GET", "https://www.example.com/welcome"),
                ok_html("<p>welcome</p>"),
            ),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let (resolution, _) =
            resolve_homepage(&rd("example.com"), &mut fetcher, &store, SuffixRules::bundled())
                .unwrap();
        assert_eq!(resolution.source, HomepageSource::SearchEngine);
        assert_eq!(resolution.final_url, "https://www.example.com/welcome");
        assert!(!resolution.cross_sld_redirect);
    }

    #[test]
    fn unreachable_when_everything_fails() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://example.com/"),
                Outcome::Http(HttpOutcome::Timeout),
            ),
            (
                Descriptor::http("GET", "http://example.com/"),
                Outcome::Http(HttpOutcome::Timeout),
            ),
            (
                Descriptor::search("example.com"),
                Outcome::Search(SearchOutcome::Unavailable {
                    reason: "no provider".into(),
                }),
            ),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let err =
            resolve_homepage(&rd("example.com"), &mut fetcher, &store, SuffixRules::bundled())
                .unwrap_err();
        assert!(matches!(err, DiscoveryError::Unreachable { .. }));
    }

    #[test]
    fn scores_and_orders_policy_links() {
        let page = r#"
            <a href="/legal">Legal</a>
            <a href="/privacy-notice">Privacy Notice</a>
            <a href="/about">About Us</a>
        "#;
        let candidates =
            find_policy_links(page, "https://example.com/", LinkLexicon::bundled()).unwrap();
        assert_eq!(candidates.len(), 2);
        assert_eq!(candidates[0].url, "https://example.com/privacy-notice");
        assert_eq!(candidates[0].anchor_text.as_deref(), Some("Privacy Notice"));
        assert_eq!(candidates[1].url, "https://example.com/legal");
        assert!(candidates[0].score > candidates[1].score);
    }

    #[test]
    fn path_only_match_gets_half_weight() {
        let page = r#"<a href="/privacy">Read more</a><a href="/docs">Data Protection</a>"#;
        let candidates =
            find_policy_links(page, "https://example.com/", LinkLexicon::bundled()).unwrap();
        // "Data Protection" text (30) outranks path-only "/privacy" (40/2).
        assert_eq!(candidates[0].url, "https://example.com/docs");
        assert_eq!(candidates[0].score, 30);
        assert_eq!(candidates[1].score, 20);
    }

    #[test]
    fn duplicate_urls_collapse_to_best_score() {
        let page = r#"
            <a href="/privacy">Legal</a>
            <a href="/privacy">Privacy Policy</a>
        "#;
        let candidates =
            find_policy_links(page, "https://example.com/", LinkLexicon::bundled()).unwrap();
        assert_eq!(candidates.len(), 1);
        assert_eq!(candidates[0].score, 60);
        assert_eq!(candidates[0].anchor_text.as_deref(), Some("Privacy Policy"));
    }

    #[test]
    fn no_matching_anchors_is_no_candidates() {
        let page = r#"<a href="/about">About</a><a href="/careers">Careers</a>"#;
        assert!(matches!(
            find_policy_links(page, "https://example.com/", LinkLexicon::bundled()),
            Err(DiscoveryError::NoCandidates { .. })
        ));
    }

    #[test]
    fn search_policy_filters_to_same_domain() {
        let store = store_with(vec![(
            Descriptor::search("example.com privacy policy"),
            Outcome::Search(SearchOutcome::Results {
                urls: vec![
                    "https://policy-aggregator.example/example.com".into(),
                    "https://example.com/privacy-policy".into(),
                    "https://example.com/terms".into(),
                ],
            }),
        )]);
        let candidates = search_policy(
            &rd("example.com"),
            &store,
            LinkLexicon::bundled(),
            SuffixRules::bundled(),
        )
        .unwrap();
        assert_eq!(candidates.len(), 2);
        assert_eq!(candidates[0].url, "https://example.com/privacy-policy");
        assert_eq!(candidates[0].source, CandidateSource::SearchResult);
        assert!(candidates[0].score > candidates[1].score);
    }

    #[test]
    fn search_policy_without_provider_is_unavailable() {
        let store = store_with(vec![(
            Descriptor::search("example.com privacy policy"),
            Outcome::Search(SearchOutcome::Unavailable {
                reason: "quota exceeded".into(),
            }),
        )]);
        assert!(matches!(
            search_policy(
                &rd("example.com"),
                &store,
                LinkLexicon::bundled(),
                SuffixRules::bundled()
            ),
            Err(DiscoveryError::ProviderUnavailable { .. })
        ));
    }

    #[test]
    fn discover_prefers_homepage_links_over_search() {
        let store = store_with(vec![(
            Descriptor::http("GET", "https://example.com/"),
            ok_html(r#"<a href="/privacy">Privacy Policy</a>"#),
        )]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let discovery = discover(
            &rd("example.com"),
            &mut fetcher,
            &store,
            LinkLexicon::bundled(),
            SuffixRules::bundled(),
        )
        .unwrap();
        assert_eq!(discovery.candidates[0].source, CandidateSource::HomepageLink);
        // The search transaction never happened.
        assert!(store
            .transactions()
            .iter()
            .all(|t| t.descriptor.kind != crate::replay::Kind::Search));
    }

    #[test]
    fn discover_falls_back_to_search_when_no_links() {
        let store = store_with(vec![
            (
                Descriptor::http("GET", "https://example.com/"),
                ok_html("<p>minimal landing page</p>"),
            ),
            (
                Descriptor::search("example.com privacy policy"),
                Outcome::Search(SearchOutcome::Results {
                    urls: vec!["https://example.com/privacy".into()],
                }),
            ),
        ]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        let discovery = discover(
            &rd("example.com"),
            &mut fetcher,
            &store,
            LinkLexicon::bundled(),
            SuffixRules::bundled(),
        )
        .unwrap();
        assert_eq!(discovery.candidates.len(), 1);
        assert_eq!(discovery.candidates[0].source, CandidateSource::SearchResult);
    }

    #[test]
    fn discover_stays_within_budget() {
        let store = store_with(vec![(
            Descriptor::http("GET", "https://example.com/"),
            ok_html(r#"<a href="/privacy">Privacy Policy</a>"#),
        )]);
        let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
        discover(
            &rd("example.com"),
            &mut fetcher,
            &store,
            LinkLexicon::bundled(),
            SuffixRules::bundled(),
        )
        .unwrap();
        assert!(fetcher.budget().spent("example.com") <= DEFAULT_BUDGET);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// The red flag must reflect registrable-domain comparison for any
        /// synthetic chain of hosts.
        #[test]
        fn cross_sld_flag_matches_rd_comparison(
            sub in "[a-z]{1,6}",
            site in "[a-z]{3,8}",
            other in "[a-z]{3,8}",
            crosses in any::<bool>(),
        ) {
            let target = rd(&format!("{site}.com"));
            let final_host = if crosses {
                format!("{sub}.{other}.net")
            } else {
                format!("{sub}.{site}.com")
            };
            let store = store_with(vec![
                (
                    Descriptor::http("GET", &format!("https://{}/", target.text())),
                    redirect(&format!("https://{final_host}/")),
                ),
                (
                    Descriptor::http("GET", &format!("https://{final_host}/")),
                    ok_html("<p>landed</p>"),
                ),
            ]);
            let mut fetcher = Fetcher::new(&store, SuffixRules::bundled(), DEFAULT_BUDGET);
            let (resolution, _) =
                resolve_homepage(&target, &mut fetcher, &store, SuffixRules::bundled()).unwrap();
            // The .net / .com suffixes differ, so crossing is exactly the
            // flag the chain must carry.
            prop_assert_eq!(resolution.cross_sld_redirect, crosses);
        }
    }
}
