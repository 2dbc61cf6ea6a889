//! Character-trigram language identification.
//!
//! Each bundled language ships a seed text; its trigram frequency profile is
//! compared against the input's profile by cosine similarity. The pipeline
//! only needs a reliable yes/no on English, so six western-European profiles
//! and a similarity margin are enough: anything that cannot be confidently
//! separated from the runner-up is reported as indeterminate rather than
//! guessed.

use std::collections::HashMap;
use std::sync::LazyLock;

use thiserror::Error;

/// Inputs shorter than this cannot produce a stable trigram profile.
pub const MIN_TEXT_CHARS: usize = 50;

/// Minimum lead the best language must have over the runner-up.
const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("text of {chars} characters is below the {minimum}-character minimum")]
    TooShort { chars: usize, minimum: usize },
    #[error("cannot separate {best} from {second} (similarity gap {gap:.4})")]
    Indeterminate { best: String, second: String, gap: f64 },
}

/// Best-match language and how strongly the profiles agree.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageGuess {
    /// Lowercase two-letter tag, e.g. "en".
    pub language: String,
    /// Cosine similarity against the winning profile, in [0, 1].
    pub confidence: f64,
}

/// Trigram relative frequencies for one language.
#[derive(Debug, Clone)]
pub struct LanguageProfile {
    tag: String,
    trigrams: HashMap<String, f64>,
    norm: f64,
}

impl LanguageProfile {
    pub fn from_text(tag: &str, seed: &str) -> LanguageProfile {
        let counts = trigram_counts(seed);
        let total: u64 = counts.values().map(|&c| u64::from(c)).sum();
        let total = total.max(1) as f64;
        let trigrams: HashMap<String, f64> = counts
            .into_iter()
            .map(|(k, c)| (k, f64::from(c) / total))
            .collect();
        let norm = trigrams.values().map(|v| v * v).sum::<f64>().sqrt();
        LanguageProfile {
            tag: tag.to_string(),
            trigrams,
            norm,
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    fn similarity(&self, other_trigrams: &HashMap<String, f64>, other_norm: f64) -> f64 {
        if self.norm == 0.0 || other_norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = other_trigrams
            .iter()
            .filter_map(|(k, v)| self.trigrams.get(k).map(|p| p * v))
            .sum();
        (dot / (self.norm * other_norm)).clamp(0.0, 1.0)
    }
}

/// A set of language profiles plus the decision margin.
#[derive(Debug, Clone)]
pub struct LanguageDetector {
    profiles: Vec<LanguageProfile>,
    margin: f64,
}

static BUNDLED: LazyLock<LanguageDetector> = LazyLock::new(|| {
    LanguageDetector::new(
        vec![
            LanguageProfile::from_text("en", include_str!("../../data/lang/en.txt")),
            LanguageProfile::from_text("es", include_str!("../../data/lang/es.txt")),
            LanguageProfile::from_text("fr", include_str!("../../data/lang/fr.txt")),
            LanguageProfile::from_text("de", include_str!("../../data/lang/de.txt")),
            LanguageProfile::from_text("pt", include_str!("../../data/lang/pt.txt")),
            LanguageProfile::from_text("it", include_str!("../../data/lang/it.txt")),
        ],
        DEFAULT_MARGIN,
    )
});

impl LanguageDetector {
    pub fn new(profiles: Vec<LanguageProfile>, margin: f64) -> LanguageDetector {
        LanguageDetector { profiles, margin }
    }

    pub fn bundled() -> &'static LanguageDetector {
        &BUNDLED
    }

    pub fn detect(&self, text: &str) -> Result<LanguageGuess, LangError> {
        let chars = text.chars().count();
        if chars < MIN_TEXT_CHARS {
            return Err(LangError::TooShort {
                chars,
                minimum: MIN_TEXT_CHARS,
            });
        }

        let counts = trigram_counts(text);
        let total: u64 = counts.values().map(|&c| u64::from(c)).sum();
        let total = total.max(1) as f64;
        let trigrams: HashMap<String, f64> = counts
            .into_iter()
            .map(|(k, c)| (k, f64::from(c) / total))
            .collect();
        let norm = trigrams.values().map(|v| v * v).sum::<f64>().sqrt();

        let mut scored: Vec<(&str, f64)> = self
            .profiles
            .iter()
            .map(|p| (p.tag(), p.similarity(&trigrams, norm)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));

        let (best_tag, best) = scored[0];
        let second = scored.get(1).copied();
        if let Some((second_tag, second_score)) = second {
            let gap = best - second_score;
            if gap < self.margin {
                return Err(LangError::Indeterminate {
                    best: best_tag.to_string(),
                    second: second_tag.to_string(),
                    gap,
                });
            }
        }
        Ok(LanguageGuess {
            language: best_tag.to_string(),
            confidence: best,
        })
    }
}

/// Detects the language of `text` against the bundled profiles.
pub fn detect_language(text: &str) -> Result<LanguageGuess, LangError> {
    LanguageDetector::bundled().detect(text)
}

/// Counts character trigrams over normalized text: lowercased, with every
/// non-alphabetic run collapsed to a single space so trigrams capture word
/// boundaries.
fn trigram_counts(text: &str) -> HashMap<String, u32> {
    let mut normalized: Vec<char> = vec![' '];
    for ch in text.chars() {
        if ch.is_alphabetic() {
            normalized.extend(ch.to_lowercase());
        } else if normalized.last() != Some(&' ') {
            normalized.push(' ');
        }
    }
    if normalized.last() != Some(&' ') {
        normalized.push(' ');
    }

    let mut counts = HashMap::new();
    for window in normalized.windows(3) {
        if window.iter().all(|&c| c == ' ') {
            continue;
        }
        *counts.entry(window.iter().collect::<String>()).or_insert(0) += 1;
    }
    counts
}
