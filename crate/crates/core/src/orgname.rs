//! Organization-name normalization.
//!
//! Attribution compares names coming from very different places (policy
//! text, registration records, certificate subjects, ownership files), so
//! everything funnels through one canonical form: lowercase, punctuation
//! collapsed to single spaces, and trailing legal designators ("Inc.",
//! "GmbH", "Co., Ltd.") stripped. "TikTok Inc." and "tiktok" normalize to
//! the same string.

use std::collections::HashSet;
use std::fmt;
use std::sync::LazyLock;

use thiserror::Error;

/// Bundled designator gazetteer (see `data/legal_designators.txt`).
const BUNDLED_DESIGNATORS: &str = include_str!("../data/legal_designators.txt");

static DESIGNATORS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    BUNDLED_DESIGNATORS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrgNameError {
    #[error("organization name is empty after normalization")]
    EmptyAfterNormalization,
}

/// An organization name in canonical comparison form, keeping the original
/// spelling for display.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedOrg {
    text: String,
    original: String,
}

impl NormalizedOrg {
    /// The canonical comparison form.
    pub fn text(&self) -> &str {
        &self.text
    }

    /// The name as it appeared in the source.
    pub fn original(&self) -> &str {
        &self.original
    }

    /// Canonical tokens, for containment comparisons.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ')
    }
}

impl fmt::Display for NormalizedOrg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Normalizes an organization name for comparison.
///
/// Lowercases, replaces every non-alphanumeric character with a space,
/// collapses runs of spaces, then repeatedly strips a trailing legal
/// designator until none remains. A name made only of designators (just
/// "Inc.") has no identifying content left and is rejected.
pub fn normalize_org(name: &str) -> Result<NormalizedOrg, OrgNameError> {
    let mut tokens: Vec<String> = name
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect();

    while let Some(last) = tokens.last() {
        if DESIGNATORS.contains(last.as_str()) {
            tokens.pop();
        } else {
            break;
        }
    }

    if tokens.is_empty() {
        return Err(OrgNameError::EmptyAfterNormalization);
    }
    Ok(NormalizedOrg {
        text: tokens.join(" "),
        original: name.to_string(),
    })
}
