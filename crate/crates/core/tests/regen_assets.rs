//! Regenerates committed artifacts. Nothing here runs in a normal test
//! pass; each generator rewrites files under version control and must be
//! invoked on purpose:
//!
//! ```text
//! cargo test -p domorg --test regen_assets -- --ignored
//! ```

use std::collections::HashMap;
use std::path::Path;

use domorg::policy::classifier::{load_corpus, train_classifier, ClassifierConfig};
use domorg::replay::{
    FixtureStore, HttpOutcome, HttpRequest, Payload, SearchOutcome, TlsOutcome, Transport,
    WhoisOutcome,
};
use domorg::resolver::{FetchPolicy, Flag, Method};

#[test]
#[ignore = "rewrites data/model.json; run on purpose"]
fn regenerate_bundled_model() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = load_corpus(&root.join("data/corpus/labels.tsv")).unwrap();
    let model = train_classifier(&corpus, &ClassifierConfig::default()).unwrap();
    model.save(&root.join("data/model.json")).unwrap();
}

/// Serves a fixed script of outcomes; anything unscripted is a transport
/// failure so a drifting URL or query shows up as a failed assertion when
/// the archive is regenerated.
#[derive(Default)]
struct DemoTransport {
    http: HashMap<String, HttpOutcome>,
    whois: HashMap<(String, String), WhoisOutcome>,
    tls: HashMap<String, TlsOutcome>,
    search: HashMap<String, SearchOutcome>,
}

impl Transport for DemoTransport {
    fn http(&self, request: &HttpRequest) -> HttpOutcome {
        self.http
            .get(&request.url)
            .cloned()
            .unwrap_or(HttpOutcome::TransportFailure {
                reason: format!("unscripted url {}", request.url),
            })
    }

    fn tls(&self, host: &str, _port: u16) -> TlsOutcome {
        self.tls
            .get(host)
            .cloned()
            .unwrap_or(TlsOutcome::NoTls)
    }

    fn whois(&self, server: &str, query: &str) -> WhoisOutcome {
        self.whois
            .get(&(server.to_string(), query.to_string()))
            .cloned()
            .unwrap_or(WhoisOutcome::TransportFailure {
                reason: format!("unscripted whois {server} {query}"),
            })
    }

    fn search(&self, query: &str) -> SearchOutcome {
        self.search
            .get(query)
            .cloned()
            .unwrap_or(SearchOutcome::Unavailable {
                reason: "no search provider configured".into(),
            })
    }
}

fn html(status: u16, body: &str) -> HttpOutcome {
    HttpOutcome::Response {
        status,
        headers: vec![("content-type".into(), "text/html; charset=utf-8".into())],
        body: Payload::Text(body.to_string()),
    }
}

fn redirect(location: &str) -> HttpOutcome {
    HttpOutcome::Response {
        status: 301,
        headers: vec![("location".into(), location.to_string())],
        body: Payload::Text(String::new()),
    }
}

fn homepage(blurb: &str, policy_href: Option<&str>) -> String {
    let link = policy_href
        .map(|href| format!("<p><a href=\"{href}\">Privacy Policy</a></p>"))
        .unwrap_or_default();
    format!(
        "<html><head><title>Home</title></head><body>\
         <h1>Welcome</h1><p>{blurb}</p>{link}</body></html>"
    )
}

/// A policy page substantial enough to pass the bundled classifier.
fn policy_html(opening_paragraph: &str) -> String {
    format!(
        "<html><head><title>Privacy Policy</title></head><body>\
         <h1>Privacy Policy</h1>\
         <p>{opening_paragraph}</p>\
         <p>We collect personal information you provide when creating an account, \
         including your name and email address, together with technical data such as \
         device identifiers and usage logs gathered while you use the service.</p>\
         <p>We use cookies and similar technologies to keep you signed in, remember \
         your preferences, and measure how features are used. You can adjust cookie \
         settings in your browser at any time.</p>\
         <p>You have the right to request access to, correction of, or deletion of \
         your personal data. To exercise these rights, contact our support team and \
         we will respond within the time required by law.</p>\
         <p>Personal data is retained only for as long as necessary for the purposes \
         described in this privacy policy, after which it is deleted or anonymized in \
         line with our retention schedule.</p>\
         </body></html>"
    )
}

fn self_signed_cert(host: &str, organization: Option<&str>) -> TlsOutcome {
    use rcgen::{CertificateParams, DnType, KeyPair};
    let mut params = CertificateParams::new(vec![host.to_string()]).unwrap();
    params.distinguished_name.push(DnType::CommonName, host);
    if let Some(org) = organization {
        params
            .distinguished_name
            .push(DnType::OrganizationName, org);
    }
    let key = KeyPair::generate().unwrap();
    TlsOutcome::Leaf {
        der: params.self_signed(&key).unwrap().der().to_vec(),
    }
}

fn whois_record(domain: &str, org_line: Option<&str>) -> WhoisOutcome {
    let mut text = format!(
        "Domain Name: {domain}\nRegistrar: Example Registrar Services\n"
    );
    if let Some(line) = org_line {
        text.push_str(line);
        text.push('\n');
    }
    text.push_str("Name Server: ns1.fixture-dns.example\n");
    WhoisOutcome::Response { text }
}

const REGISTRY: &str = "whois.nic.example";

/// Builds the committed walkthrough archive under fixtures/demo. Every
/// transaction any subcommand needs in replay mode is recorded here:
/// resolutions for ten domains plus the WHOIS and TLS captures the
/// techniques comparison reads.
#[test]
#[ignore = "rewrites fixtures/demo; run on purpose"]
fn regenerate_demo_archive() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tiktok_page = std::fs::read_to_string(root.join("tests/data/pages/tiktok_policy.html"))
        .expect("shared fixture page exists");
    let archive = root.join("../../fixtures/demo");
    if archive.exists() {
        std::fs::remove_dir_all(&archive).unwrap();
    }

    let mut t = DemoTransport::default();

    // tiktok-fixture.example: clean policy path.
    t.http.insert(
        "https://tiktok-fixture.example/".into(),
        html(200, &homepage("Short videos for everyone.", Some("/legal/privacy-policy"))),
    );
    t.http.insert(
        "https://tiktok-fixture.example/legal/privacy-policy".into(),
        html(200, &tiktok_page),
    );
    t.whois.insert(
        (REGISTRY.into(), "tiktok-fixture.example".into()),
        whois_record(
            "tiktok-fixture.example",
            Some("Registrant Organization: TikTok Inc."),
        ),
    );
    t.tls.insert(
        "tiktok-fixture.example".into(),
        self_signed_cert("tiktok-fixture.example", Some("TikTok Inc.")),
    );

    // unseenreport-fixture.example: cross-registrable-domain redirect onto a
    // site whose policy names someone else, then a redacted WHOIS record.
    t.http.insert(
        "https://unseenreport-fixture.example/".into(),
        redirect("https://bigsearch-fixture.example/"),
    );
    t.whois.insert(
        (REGISTRY.into(), "unseenreport-fixture.example".into()),
        whois_record(
            "unseenreport-fixture.example",
            Some("Registrant Organization: REDACTED FOR PRIVACY"),
        ),
    );
    t.tls.insert(
        "unseenreport-fixture.example".into(),
        self_signed_cert("unseenreport-fixture.example", None),
    );

    // bigsearch-fixture.example: the redirect target, itself cleanly
    // attributable through its policy.
    t.http.insert(
        "https://bigsearch-fixture.example/".into(),
        html(200, &homepage("Search the web faster.", Some("/privacy"))),
    );
    t.http.insert(
        "https://bigsearch-fixture.example/privacy".into(),
        html(
            200,
            &policy_html(
                "The search services are provided and controlled by Big Search LLC \
                 (\u{201c}Big Search\u{201d}, \u{201c}we\u{201d} or \u{201c}us\u{201d}) \
                 and this privacy policy explains what personal data we process.",
            ),
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "bigsearch-fixture.example".into()),
        whois_record(
            "bigsearch-fixture.example",
            Some("Registrant Organization: Big Search LLC"),
        ),
    );
    t.tls.insert(
        "bigsearch-fixture.example".into(),
        self_signed_cert("bigsearch-fixture.example", Some("Big Search LLC")),
    );

    // whois-fallback.example: homepage has no policy link and search is
    // unavailable, so attribution comes from a two-hop WHOIS lookup.
    t.http.insert(
        "https://whois-fallback.example/".into(),
        html(200, &homepage("Just a landing page.", None)),
    );
    t.whois.insert(
        (REGISTRY.into(), "whois-fallback.example".into()),
        WhoisOutcome::Response {
            text: "Domain Name: whois-fallback.example\n\
                   Registrar WHOIS Server: whois.registrar-fixture.example\n\
                   Registrar: Example Registrar Services\n"
                .into(),
        },
    );
    t.whois.insert(
        (
            "whois.registrar-fixture.example".into(),
            "whois-fallback.example".into(),
        ),
        whois_record(
            "whois-fallback.example",
            Some("Registrant Organization: Fallback Hosting GmbH"),
        ),
    );
    t.tls.insert(
        "whois-fallback.example".into(),
        self_signed_cert("whois-fallback.example", Some("Fallback Hosting GmbH")),
    );

    // redirect-www.example: redirect that stays on the registrable domain.
    t.http.insert(
        "https://redirect-www.example/".into(),
        redirect("https://www.redirect-www.example/home"),
    );
    t.http.insert(
        "https://www.redirect-www.example/home".into(),
        html(200, &homepage("Industrial supplies.", Some("/about/privacy"))),
    );
    t.http.insert(
        "https://www.redirect-www.example/about/privacy".into(),
        html(
            200,
            &policy_html(
                "This catalog and ordering service is operated by Redirect Industries Ltd \
                 as the data controller for customer information.",
            ),
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "redirect-www.example".into()),
        whois_record(
            "redirect-www.example",
            Some("Registrant Organization: Redirect Industries Ltd"),
        ),
    );
    t.tls.insert(
        "redirect-www.example".into(),
        self_signed_cert("redirect-www.example", Some("Redirect Industries Ltd")),
    );

    // nonenglish.example: the only policy candidate is German, so the
    // policy stage fails before the classifier and WHOIS answers instead.
    t.http.insert(
        "https://nonenglish.example/".into(),
        html(200, &homepage("Nachrichten und Berichte.", Some("/datenschutz"))),
    );
    t.http.insert(
        "https://nonenglish.example/datenschutz".into(),
        html(
            200,
            "<html><head><title>Datenschutz</title></head><body>\
             <h1>Datenschutzerkl\u{e4}rung</h1>\
             <p>Wir nehmen den Schutz Ihrer pers\u{f6}nlichen Daten sehr ernst und \
             behandeln Ihre personenbezogenen Daten vertraulich sowie entsprechend \
             der gesetzlichen Datenschutzvorschriften und dieser Erkl\u{e4}rung.</p>\
             <p>Die Nutzung unserer Webseite ist in der Regel ohne Angabe \
             personenbezogener Daten m\u{f6}glich. Soweit auf unseren Seiten \
             personenbezogene Daten erhoben werden, erfolgt dies stets auf \
             freiwilliger Basis.</p>\
             <p>Wir weisen darauf hin, dass die Daten\u{fc}bertragung im Internet \
             Sicherheitsl\u{fc}cken aufweisen kann. Ein l\u{fc}ckenloser Schutz der \
             Daten vor dem Zugriff durch Dritte ist nicht m\u{f6}glich.</p>\
             </body></html>",
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "nonenglish.example".into()),
        whois_record(
            "nonenglish.example",
            Some("Registrant Organization: Beispiel Verlag AG"),
        ),
    );
    t.tls.insert(
        "nonenglish.example".into(),
        self_signed_cert("nonenglish.example", None),
    );

    // shop-partial.example: the policy passes the classifier but never
    // names a controller, and WHOIS is redacted on top.
    t.http.insert(
        "https://shop-partial.example/".into(),
        html(200, &homepage("Handmade goods, shipped worldwide.", Some("/privacy"))),
    );
    t.http.insert(
        "https://shop-partial.example/privacy".into(),
        html(
            200,
            &policy_html(
                "We act as the data controller for the personal information collected \
                 through this store and we describe all of our practices in this \
                 privacy policy.",
            ),
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "shop-partial.example".into()),
        whois_record(
            "shop-partial.example",
            Some("Registrant Organization: Data Protected Data Protected"),
        ),
    );
    t.tls.insert(
        "shop-partial.example".into(),
        self_signed_cert("shop-partial.example", None),
    );

    // cdn-edge.example: no web presence at all; WHOIS still answers.
    t.http.insert(
        "https://cdn-edge.example/".into(),
        HttpOutcome::TransportFailure {
            reason: "connection refused".into(),
        },
    );
    t.whois.insert(
        (REGISTRY.into(), "cdn-edge.example".into()),
        whois_record(
            "cdn-edge.example",
            Some("Registrant Organization: Edge CDN Corp"),
        ),
    );
    t.tls.insert(
        "cdn-edge.example".into(),
        self_signed_cert("cdn-edge.example", Some("Edge CDN Corp")),
    );

    // tracker-metrics.example: bare endpoint homepage; the policy page is
    // only discoverable through the search provider.
    t.http.insert(
        "https://tracker-metrics.example/".into(),
        html(200, &homepage("Measurement endpoint.", None)),
    );
    t.search.insert(
        "tracker-metrics.example privacy policy".into(),
        SearchOutcome::Results {
            urls: vec![
                "https://tracker-metrics.example/legal/privacy".into(),
                "https://unrelated-site.example/privacy".into(),
            ],
        },
    );
    t.http.insert(
        "https://tracker-metrics.example/legal/privacy".into(),
        html(
            200,
            &policy_html(
                "The measurement services are provided by Metrics & Insights, Inc. \
                 (\u{201c}we\u{201d} or \u{201c}us\u{201d}), the data controller for \
                 analytics data described in this privacy policy.",
            ),
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "tracker-metrics.example".into()),
        whois_record(
            "tracker-metrics.example",
            Some("Registrant Organization: Metrics and Insights Inc"),
        ),
    );
    t.tls.insert(
        "tracker-metrics.example".into(),
        self_signed_cert("tracker-metrics.example", Some("Metrics & Insights, Inc.")),
    );

    // plainhttp.example: attributable through its policy but with no TLS
    // endpoint and a blank WHOIS organization field.
    t.http.insert(
        "https://plainhttp.example/".into(),
        html(200, &homepage("A very plain publisher.", Some("/privacy"))),
    );
    t.http.insert(
        "https://plainhttp.example/privacy".into(),
        html(
            200,
            &policy_html(
                "This publication is provided by Plain Publishing LLC, the data \
                 controller for subscriber information under this privacy policy.",
            ),
        ),
    );
    t.whois.insert(
        (REGISTRY.into(), "plainhttp.example".into()),
        whois_record("plainhttp.example", Some("Registrant Organization:")),
    );
    // No TLS entry: the transport answers NoTls for unknown hosts.

    let store = FixtureStore::record(&archive, Box::new(t))
        .unwrap()
        .with_timestamp(1_755_000_000);
    let config = domorg::config::Config::default();
    let bundle = config.bundle().unwrap();
    let resolver = bundle.resolver(&store);
    let policy = FetchPolicy {
        budget: 5,
        include_certificate: true,
    };

    let expect = |domain: &str, organization: Option<&str>, method: Method| {
        let result = resolver.resolve(domain, policy).unwrap();
        assert_eq!(
            result.organization.as_deref(),
            organization,
            "{domain} organization"
        );
        assert_eq!(result.method, method, "{domain} method");
        result
    };

    expect(
        "tiktok-fixture.example",
        Some("TikTok Inc."),
        Method::PolicyAnalysis,
    );
    let unseen = expect("unseenreport-fixture.example", None, Method::Unidentified);
    assert!(unseen.has_flag(&Flag::CrossSldRedirect));
    assert!(unseen.has_flag(&Flag::WhoisRedacted));
    expect(
        "bigsearch-fixture.example",
        Some("Big Search LLC"),
        Method::PolicyAnalysis,
    );
    expect(
        "whois-fallback.example",
        Some("Fallback Hosting GmbH"),
        Method::Whois,
    );
    expect(
        "redirect-www.example",
        Some("Redirect Industries Ltd"),
        Method::PolicyAnalysis,
    );
    expect(
        "nonenglish.example",
        Some("Beispiel Verlag AG"),
        Method::Whois,
    );
    let partial = expect("shop-partial.example", None, Method::Unidentified);
    assert!(partial.has_flag(&Flag::PolicyStageFailed("no_controller".into())));
    assert!(partial.has_flag(&Flag::WhoisRedacted));
    expect("cdn-edge.example", Some("Edge CDN Corp"), Method::Whois);
    expect(
        "tracker-metrics.example",
        Some("Metrics & Insights, Inc."),
        Method::PolicyAnalysis,
    );
    expect(
        "plainhttp.example",
        Some("Plain Publishing LLC"),
        Method::PolicyAnalysis,
    );

    // Capture what the techniques comparison needs beyond the resolutions.
    for domain in [
        "tiktok-fixture.example",
        "unseenreport-fixture.example",
        "bigsearch-fixture.example",
        "whois-fallback.example",
        "redirect-www.example",
        "nonenglish.example",
        "shop-partial.example",
        "cdn-edge.example",
        "tracker-metrics.example",
        "plainhttp.example",
    ] {
        let rd = domorg::domain::Fqdn::parse(domain)
            .unwrap()
            .registrable_with(&bundle.suffix_rules)
            .unwrap();
        let client = domorg::whois::WhoisClient::new(
            &store,
            &bundle.whois_servers,
            &bundle.redaction_lexicon,
        );
        client.lookup(&rd).unwrap();
        store.tls(rd.text(), 443).unwrap();
    }
}
