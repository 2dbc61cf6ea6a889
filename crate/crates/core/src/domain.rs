//! Domain names and registrable-domain derivation.
//!
//! A [`Fqdn`] is a validated, lowercased domain name. Its registrable domain
//! (the label directly below a public suffix, e.g. `amazon.com` for
//! `aws.amazon.com`) is derived against a [`SuffixRules`] table loaded from a
//! public-suffix rules file. A pinned snapshot of the rules ships with the
//! crate so derivation never touches the network.

use std::collections::HashSet;
use std::fmt;
use std::sync::LazyLock;

use thiserror::Error;

const MAX_LABEL_BYTES: usize = 63;
const MAX_NAME_BYTES: usize = 253;

/// Bundled public-suffix rules snapshot (see `data/public_suffix_snapshot.dat`).
const BUNDLED_SUFFIX_RULES: &str = include_str!("../data/public_suffix_snapshot.dat");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("empty domain name")]
    EmptyInput,
    #[error("illegal label {0:?}")]
    IllegalLabel(String),
    #[error("domain name longer than {MAX_NAME_BYTES} bytes")]
    NameTooLong,
    #[error("{0:?} is itself a public suffix")]
    IsPublicSuffix(String),
    #[error("domain has no labels")]
    NoLabels,
}

/// A fully qualified domain name in canonical (lowercase, no trailing dot)
/// form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fqdn {
    labels: Vec<String>,
    text: String,
}

impl Fqdn {
    /// Parses and canonicalizes a domain name.
    ///
    /// Uppercase ASCII is folded to lowercase and a single trailing dot is
    /// stripped. Internationalized labels must already be in their punycode
    /// (`xn--`) form; raw non-ASCII input is rejected rather than mapped.
    pub fn parse(input: &str) -> Result<Fqdn, DomainError> {
        let trimmed = input.trim();
        if trimmed.is_empty() {
            return Err(DomainError::EmptyInput);
        }
        let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
        if trimmed.is_empty() {
            return Err(DomainError::EmptyInput);
        }
        if trimmed.len() > MAX_NAME_BYTES {
            return Err(DomainError::NameTooLong);
        }
        let mut labels = Vec::new();
        for raw in trimmed.split('.') {
            if raw.is_empty() {
                return Err(DomainError::IllegalLabel(String::new()));
            }
            if raw.len() > MAX_LABEL_BYTES {
                return Err(DomainError::IllegalLabel(raw.to_string()));
            }
            let ok = raw
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
            if !ok {
                return Err(DomainError::IllegalLabel(raw.to_string()));
            }
            labels.push(raw.to_ascii_lowercase());
        }
        let text = labels.join(".");
        Ok(Fqdn { labels, text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Derives the registrable domain using the bundled suffix rules.
    pub fn registrable(&self) -> Result<RegistrableDomain, DomainError> {
        self.registrable_with(SuffixRules::bundled())
    }

    /// Derives the registrable domain (public suffix plus one label).
    pub fn registrable_with(&self, rules: &SuffixRules) -> Result<RegistrableDomain, DomainError> {
        if self.labels.is_empty() {
            return Err(DomainError::NoLabels);
        }
        let suffix_len = rules.suffix_label_count(&self.labels);
        let n = self.labels.len();
        if n <= suffix_len {
            return Err(DomainError::IsPublicSuffix(self.text.clone()));
        }
        let start = n - suffix_len - 1;
        Ok(RegistrableDomain {
            text: self.labels[start..].join("."),
            suffix: self.labels[start + 1..].join("."),
        })
    }
}

impl fmt::Display for Fqdn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// The unit at which a domain is registered: one label plus a public suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegistrableDomain {
    text: String,
    suffix: String,
}

impl RegistrableDomain {
    pub fn text(&self) -> &str {
        &self.text
    }

    /// The matched public suffix (`com`, `co.uk`, ...).
    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    /// The top-level domain (rightmost label).
    pub fn tld(&self) -> &str {
        self.suffix.rsplit('.').next().unwrap_or(&self.suffix)
    }

    /// Registrable domain of an already-parsed host string, using the
    /// bundled rules. Convenience for URL hosts.
    pub fn of_host(host: &str) -> Result<RegistrableDomain, DomainError> {
        Fqdn::parse(host)?.registrable()
    }
}

impl fmt::Display for RegistrableDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Public-suffix rules: exact entries, `*.` wildcards and `!` exceptions.
///
/// Lookup follows the usual public-suffix semantics: the exception rule
/// prevails when one matches, otherwise the rule with the most labels wins,
/// and a name with no matching rule falls back to treating its last label as
/// the suffix.
#[derive(Debug, Clone)]
pub struct SuffixRules {
    exact: HashSet<String>,
    wildcard: HashSet<String>,
    exception: HashSet<String>,
    snapshot: Option<String>,
}

static BUNDLED: LazyLock<SuffixRules> = LazyLock::new(|| {
    SuffixRules::parse(BUNDLED_SUFFIX_RULES).expect("bundled suffix snapshot parses")
});

impl SuffixRules {
    /// The snapshot shipped with the crate.
    pub fn bundled() -> &'static SuffixRules {
        &BUNDLED
    }

    /// Parses a rules file: one rule per line, `//` comments and blank lines
    /// ignored, `!` marks an exception and `*.` a wildcard entry.
    pub fn parse(text: &str) -> Result<SuffixRules, DomainError> {
        let mut rules = SuffixRules {
            exact: HashSet::new(),
            wildcard: HashSet::new(),
            exception: HashSet::new(),
            snapshot: None,
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix("//") {
                if let Some(date) = comment.trim().strip_prefix("snapshot:") {
                    rules.snapshot = Some(date.trim().to_string());
                }
                continue;
            }
            let lowered = line.to_ascii_lowercase();
            if let Some(rest) = lowered.strip_prefix('!') {
                rules.exception.insert(rest.to_string());
            } else if let Some(rest) = lowered.strip_prefix("*.") {
                rules.wildcard.insert(rest.to_string());
            } else {
                rules.exact.insert(lowered);
            }
        }
        Ok(rules)
    }

    pub fn snapshot_date(&self) -> Option<&str> {
        self.snapshot.as_deref()
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.wildcard.len() + self.exception.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of labels in the public suffix matched by `labels`.
    fn suffix_label_count(&self, labels: &[String]) -> usize {
        let n = labels.len();
        let mut best = 1usize; // default rule: last label
        for start in 0..n {
            let tail = labels[start..].join(".");
            if self.exception.contains(&tail) {
                // The exception rule prevails and marks its own leftmost
                // label as registrable.
                return n - start - 1;
            }
            if self.exact.contains(&tail) {
                best = best.max(n - start);
            }
            if start >= 1 && self.wildcard.contains(&tail) {
                best = best.max(n - start + 1);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_lowercases() {
        let fqdn = Fqdn::parse("WWW.Amazon.COM").unwrap();
        assert_eq!(fqdn.labels(), ["www", "amazon", "com"]);
        assert_eq!(fqdn.text(), "www.amazon.com");
    }

    #[test]
    fn parses_subdomain_form() {
        let fqdn = Fqdn::parse("aws.amazon.com").unwrap();
        assert_eq!(fqdn.labels(), ["aws", "amazon", "com"]);
    }

    #[test]
    fn strips_single_trailing_dot() {
        assert_eq!(Fqdn::parse("example.com.").unwrap().text(), "example.com");
    }

    #[test]
    fn rejects_empty_label() {
        assert_eq!(
            Fqdn::parse("a..b"),
            Err(DomainError::IllegalLabel(String::new()))
        );
    }

    #[test]
    fn rejects_empty_and_bad_chars() {
        assert_eq!(Fqdn::parse("   "), Err(DomainError::EmptyInput));
        assert!(matches!(
            Fqdn::parse("exa mple.com"),
            Err(DomainError::IllegalLabel(_))
        ));
        assert!(matches!(
            Fqdn::parse("bücher.de"),
            Err(DomainError::IllegalLabel(_))
        ));
    }

    #[test]
    fn rejects_overlong() {
        let label = "a".repeat(64);
        assert!(matches!(
            Fqdn::parse(&format!("{label}.com")),
            Err(DomainError::IllegalLabel(_))
        ));
        let name = ["ab"; 100].join(".");
        assert!(matches!(Fqdn::parse(&name), Err(DomainError::NameTooLong)));
    }

    #[test]
    fn keeps_punycode_labels() {
        let fqdn = Fqdn::parse("XN--BCHER-KVA.example").unwrap();
        assert_eq!(fqdn.text(), "xn--bcher-kva.example");
    }

    #[test]
    fn registrable_of_www() {
        let rd = Fqdn::parse("www.amazon.com").unwrap().registrable().unwrap();
        assert_eq!(rd.text(), "amazon.com");
        assert_eq!(rd.suffix(), "com");
    }

    #[test]
    fn registrable_identity() {
        let rd = Fqdn::parse("amazon.com").unwrap().registrable().unwrap();
        assert_eq!(rd.text(), "amazon.com");
    }

    #[test]
    fn registrable_multi_label_suffix() {
        // co.uk is present in the bundled snapshot; longest match must win.
        let rd = Fqdn::parse("shop.example.co.uk")
            .unwrap()
            .registrable()
            .unwrap();
        assert_eq!(rd.text(), "example.co.uk");
        assert_eq!(rd.suffix(), "co.uk");
    }

    #[test]
    fn suffix_itself_is_rejected() {
        assert_eq!(
            Fqdn::parse("co.uk").unwrap().registrable(),
            Err(DomainError::IsPublicSuffix("co.uk".into()))
        );
        assert_eq!(
            Fqdn::parse("com").unwrap().registrable(),
            Err(DomainError::IsPublicSuffix("com".into()))
        );
    }

    #[test]
    fn unknown_tld_falls_back_to_last_two_labels() {
        let rd = Fqdn::parse("a.b.notarealtld").unwrap().registrable().unwrap();
        assert_eq!(rd.text(), "b.notarealtld");
        assert_eq!(rd.suffix(), "notarealtld");
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let rules = SuffixRules::parse("// snapshot: 2024-01-01\ncom\n*.ck\n!www.ck\n").unwrap();
        assert_eq!(rules.snapshot_date(), Some("2024-01-01"));
        // *.ck: anything.ck is a public suffix, so a.foo.ck registers foo
        let rd = Fqdn::parse("a.foo.ck")
            .unwrap()
            .registrable_with(&rules)
            .unwrap();
        assert_eq!(rd.text(), "a.foo.ck");
        assert_eq!(rd.suffix(), "foo.ck");
        // !www.ck: www.ck is registrable despite the wildcard
        let rd = Fqdn::parse("www.ck").unwrap().registrable_with(&rules).unwrap();
        assert_eq!(rd.text(), "www.ck");
        assert_eq!(rd.suffix(), "ck");
    }

    #[test]
    fn bundled_snapshot_loads() {
        let rules = SuffixRules::bundled();
        assert!(rules.len() > 50);
        assert!(rules.snapshot_date().is_some());
    }

    fn label_strategy() -> impl Strategy<Value = String> {
        "[a-z0-9]{1,8}(-[a-z0-9]{1,8})?"
    }

    fn fqdn_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(label_strategy(), 1..6).prop_map(|ls| ls.join("."))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn parse_round_trips(name in fqdn_strategy()) {
            let fqdn = Fqdn::parse(&name).unwrap();
            let again = Fqdn::parse(fqdn.text()).unwrap();
            prop_assert_eq!(&fqdn, &again);
        }

        #[test]
        fn registrable_invariant_under_subdomains(
            name in fqdn_strategy(),
            extra in prop::collection::vec(label_strategy(), 1..4),
        ) {
            let base = Fqdn::parse(&format!("{}.example.com", name)).unwrap();
            let rd = base.registrable().unwrap();
            let deeper = Fqdn::parse(&format!("{}.{}", extra.join("."), base.text())).unwrap();
            prop_assert_eq!(deeper.registrable().unwrap(), rd);
        }

        #[test]
        fn registrable_suffix_relations(name in fqdn_strategy()) {
            let fqdn = Fqdn::parse(&name).unwrap();
            if let Ok(rd) = fqdn.registrable() {
                prop_assert!(fqdn.text().ends_with(rd.text()));
                prop_assert!(rd.text().ends_with(rd.suffix()));
                prop_assert!(rd.text().len() > rd.suffix().len());
            }
        }
    }
}
