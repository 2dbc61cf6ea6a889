//! Privacy-policy analysis: from fetched page bytes to a controller verdict.
//!
//! The pipeline runs five gates in order and stops at the first failure,
//! naming the stage that refused: text extraction, language identification,
//! the policy-vs-other classifier, keyword paragraph selection, and finally
//! controller extraction. Every stage is pure, so analysis of different
//! pages can run concurrently against one shared model.

pub mod classifier;
pub mod controller;
pub mod lang;

use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use crate::html;
use classifier::PolicyClassifier;
use controller::{ControllerError, ControllerExtraction, EntityRules};
use lang::LangError;

const BUNDLED_LEXICON: &str = include_str!("../../data/controller_lexicon.tsv");

/// Paragraphs with fewer word tokens than this are noise, not prose.
const MIN_PARAGRAPH_TOKENS: usize = 3;

/// How many selected paragraphs the extractor sees.
const MAX_SELECTED_PARAGRAPHS: usize = 5;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("document has no usable text")]
    EmptyDocument,
    #[error("document is not identifiably English: {detail}")]
    NotEnglish { detail: String },
    #[error("document does not look like a privacy policy (score {score:.4})")]
    NotAPolicy { score: f64 },
    #[error("no paragraph matches the controller keyword lexicon")]
    NoQualifyingParagraphs,
    #[error("no qualifying controller candidate found")]
    NoController,
}

/// The readable text of one candidate page.
#[derive(Debug, Clone)]
pub struct PolicyText {
    pub url: String,
    /// Plain-text blocks in document order; nonempty.
    pub paragraphs: Vec<String>,
    pub full_text: String,
}

/// A paragraph picked by the keyword lexicon.
#[derive(Debug, Clone)]
pub struct ScoredParagraph {
    /// Index into [`PolicyText::paragraphs`].
    pub index: usize,
    pub text: String,
    pub score: u32,
}

/// Keyword weights for spotting controller-bearing paragraphs. Phrases
/// (containing spaces) match as casefolded substrings; single words match
/// on token boundaries.
#[derive(Debug, Clone)]
pub struct ControllerLexicon {
    phrases: Vec<(String, u32)>,
    words: Vec<(String, u32)>,
}

static BUNDLED: LazyLock<ControllerLexicon> =
    LazyLock::new(|| ControllerLexicon::parse(BUNDLED_LEXICON));

impl ControllerLexicon {
    pub fn bundled() -> &'static ControllerLexicon {
        &BUNDLED
    }

    /// Parses `keyword<TAB>weight` lines, `#` comments and blanks ignored.
    pub fn parse(text: &str) -> ControllerLexicon {
        let mut phrases = Vec::new();
        let mut words = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((keyword, weight)) = line.split_once('\t') else {
                continue;
            };
            let Ok(weight) = weight.trim().parse::<u32>() else {
                continue;
            };
            let keyword = keyword.trim().to_lowercase();
            if keyword.contains(' ') {
                phrases.push((keyword, weight));
            } else if !keyword.is_empty() {
                words.push((keyword, weight));
            }
        }
        ControllerLexicon { phrases, words }
    }

    pub fn from_file(path: &Path) -> std::io::Result<ControllerLexicon> {
        Ok(ControllerLexicon::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty() && self.words.is_empty()
    }

    /// Sum of the weights of distinct keywords present in `paragraph`.
    pub fn score(&self, paragraph: &str) -> u32 {
        let lowered = paragraph.to_lowercase();
        let tokens: std::collections::HashSet<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let phrase_total: u32 = self
            .phrases
            .iter()
            .filter(|(p, _)| lowered.contains(p.as_str()))
            .map(|(_, w)| w)
            .sum();
        let word_total: u32 = self
            .words
            .iter()
            .filter(|(w, _)| tokens.contains(w.as_str()))
            .map(|(_, w)| w)
            .sum();
        phrase_total + word_total
    }
}

/// Extracts readable paragraphs from page bytes, dropping script, style,
/// and page-chrome subtrees, and discarding blocks shorter than three
/// tokens.
pub fn extract_text(url: &str, html_bytes: &[u8]) -> Result<PolicyText, PolicyError> {
    let html_text = String::from_utf8_lossy(html_bytes);
    let paragraphs: Vec<String> = html::paragraphs(&html_text)
        .into_iter()
        .filter(|p| p.split_whitespace().count() >= MIN_PARAGRAPH_TOKENS)
        .collect();
    if paragraphs.is_empty() {
        return Err(PolicyError::EmptyDocument);
    }
    let full_text = paragraphs.join("\n\n");
    Ok(PolicyText {
        url: url.to_string(),
        paragraphs,
        full_text,
    })
}

/// Ranks paragraphs by lexicon score: positive scores only, best first,
/// document order on ties, capped at five.
pub fn select_paragraphs(
    policy: &PolicyText,
    lexicon: &ControllerLexicon,
) -> Result<Vec<ScoredParagraph>, PolicyError> {
    let mut scored: Vec<ScoredParagraph> = policy
        .paragraphs
        .iter()
        .enumerate()
        .map(|(index, text)| ScoredParagraph {
            index,
            text: text.clone(),
            score: lexicon.score(text),
        })
        .filter(|p| p.score > 0)
        .collect();
    // Stable sort keeps document order within equal scores.
    scored.sort_by_key(|p| std::cmp::Reverse(p.score));
    scored.truncate(MAX_SELECTED_PARAGRAPHS);
    if scored.is_empty() {
        return Err(PolicyError::NoQualifyingParagraphs);
    }
    Ok(scored)
}

/// Runs the whole pipeline over one candidate page.
pub fn analyze(
    url: &str,
    html_bytes: &[u8],
    model: &PolicyClassifier,
    lexicon: &ControllerLexicon,
    rules: &EntityRules,
) -> Result<ControllerExtraction, PolicyError> {
    let text = extract_text(url, html_bytes)?;

    match lang::detect_language(&text.full_text) {
        Ok(guess) if guess.language == "en" => {}
        Ok(guess) => {
            return Err(PolicyError::NotEnglish {
                detail: format!(
                    "detected {} (confidence {:.3})",
                    guess.language, guess.confidence
                ),
            })
        }
        Err(LangError::TooShort { chars, minimum }) => {
            return Err(PolicyError::NotEnglish {
                detail: format!("only {chars} characters, need {minimum}"),
            })
        }
        Err(LangError::Indeterminate { best, second, gap }) => {
            return Err(PolicyError::NotEnglish {
                detail: format!("ambiguous between {best} and {second} (gap {gap:.4})"),
            })
        }
    }

    let verdict = model
        .classify(&text.full_text)
        .map_err(|_| PolicyError::NotAPolicy { score: 0.0 })?;
    if !verdict.is_policy {
        return Err(PolicyError::NotAPolicy {
            score: verdict.score,
        });
    }

    let selected = select_paragraphs(&text, lexicon)?;
    extract_controller(&selected, rules).map_err(|ControllerError::NoController| {
        PolicyError::NoController
    })
}

pub use controller::extract_controller;
