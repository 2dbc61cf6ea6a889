//! Rule-based extraction of the data-controller name from selected
//! paragraphs.
//!
//! Candidates are maximal runs of capitalized tokens (with internal
//! of/and/&, digits, and trailing legal designators). Each candidate is
//! scored on the evidence around it: an introducing phrase right before it,
//! an alias list right after it, a legal designator at its end, plus a bonus
//! for sitting in a higher-ranked paragraph. A candidate with no evidence of
//! its own never wins on paragraph position alone, which keeps capitalized
//! sentence openers like "We Care About Privacy" out of the results.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use super::ScoredParagraph;

const BUNDLED_TRIGGERS: &str = include_str!("../../data/entity_triggers.txt");
const BUNDLED_BLOCKLIST: &str = include_str!("../../data/entity_blocklist.txt");
const BUNDLED_DESIGNATORS: &str = include_str!("../../data/legal_designators.txt");

const TRIGGER_POINTS: u32 = 3;
const ALIAS_POINTS: u32 = 3;
const DESIGNATOR_POINTS: u32 = 2;

/// Articles dropped before blocklist comparison, plus pronouns that can
/// never be a name on their own.
const ARTICLES: [&str; 6] = ["the", "this", "a", "an", "our", "your"];
const PRONOUNS: [&str; 10] = [
    "we", "us", "our", "ours", "you", "your", "i", "they", "them", "it",
];

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("no qualifying controller candidate found")]
    NoController,
}

/// Gazetteer and trigger configuration for the extractor.
#[derive(Debug, Clone)]
pub struct EntityRules {
    designators: HashSet<String>,
    /// Casefolded trigger phrases, as token vectors.
    triggers: Vec<Vec<String>>,
    blocklist: HashSet<String>,
}

static BUNDLED: LazyLock<EntityRules> = LazyLock::new(|| {
    EntityRules::new(
        parse_word_list(BUNDLED_DESIGNATORS),
        parse_phrase_list(BUNDLED_TRIGGERS),
        parse_phrase_list(BUNDLED_BLOCKLIST),
    )
});

fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_phrase_list(text: &str) -> Vec<String> {
    parse_word_list(text)
}

impl EntityRules {
    pub fn new(
        designators: Vec<String>,
        triggers: Vec<String>,
        blocklist: Vec<String>,
    ) -> EntityRules {
        EntityRules {
            designators: designators.into_iter().collect(),
            triggers: triggers
                .iter()
                .map(|t| t.split_whitespace().map(str::to_string).collect())
                .collect(),
            blocklist: blocklist.into_iter().collect(),
        }
    }

    pub fn bundled() -> &'static EntityRules {
        &BUNDLED
    }

    /// Loads designators, triggers, and blocklist from three list files.
    pub fn from_files(
        designators: &Path,
        triggers: &Path,
        blocklist: &Path,
    ) -> std::io::Result<EntityRules> {
        Ok(EntityRules::new(
            parse_word_list(&std::fs::read_to_string(designators)?),
            parse_phrase_list(&std::fs::read_to_string(triggers)?),
            parse_phrase_list(&std::fs::read_to_string(blocklist)?),
        ))
    }

    fn is_designator(&self, core: &str) -> bool {
        self.designators.contains(&core.to_lowercase())
    }
}

/// One scored candidate occurrence.
#[derive(Debug, Clone)]
pub struct ScoredCandidate {
    pub text: String,
    /// Document index of the paragraph this occurrence sits in.
    pub paragraph_index: usize,
    /// Rank of that paragraph in the selection (0 = best).
    pub paragraph_rank: usize,
    /// Token offset of the candidate within its paragraph.
    pub position: usize,
    pub score: u32,
    /// The introducing phrase found right before the candidate, if any.
    pub trigger: Option<String>,
    pub has_alias: bool,
    pub has_designator: bool,
}

/// The extraction verdict: one winner plus every candidate considered.
#[derive(Debug, Clone)]
pub struct ControllerExtraction {
    pub controller: String,
    /// Document index of the winning paragraph.
    pub paragraph_index: usize,
    pub candidates: Vec<ScoredCandidate>,
}

/// Extracts the single controller name from ranked paragraphs.
pub fn extract_controller(
    selected: &[ScoredParagraph],
    rules: &EntityRules,
) -> Result<ControllerExtraction, ControllerError> {
    let mut candidates: Vec<ScoredCandidate> = Vec::new();
    for (rank, paragraph) in selected.iter().enumerate() {
        // Deeper-ranked paragraphs earn smaller bonuses, one point per step.
        let rank_bonus = (selected.len() - rank) as u32;
        collect_candidates(
            &paragraph.text,
            paragraph.index,
            rank,
            rank_bonus,
            rules,
            &mut candidates,
        );
    }

    candidates.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.paragraph_rank.cmp(&b.paragraph_rank))
            .then(a.position.cmp(&b.position))
    });

    match candidates.first() {
        Some(winner) => Ok(ControllerExtraction {
            controller: winner.text.clone(),
            paragraph_index: winner.paragraph_index,
            candidates,
        }),
        None => Err(ControllerError::NoController),
    }
}

/// A whitespace-delimited token within a paragraph.
struct Token {
    raw: String,
    /// Leading and trailing punctuation stripped.
    core: String,
}

fn scan_tokens(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|raw| Token {
            raw: raw.to_string(),
            core: token_core(raw),
        })
        .collect()
}

fn token_core(raw: &str) -> String {
    raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '&')
        .trim_matches('&')
        .to_string()
}

fn first_alphabetic(core: &str) -> Option<char> {
    core.chars().find(|c| c.is_alphabetic())
}

fn is_capitalized(token: &Token) -> bool {
    first_alphabetic(&token.core).is_some_and(|c| c.is_uppercase())
}

fn is_digits(token: &Token) -> bool {
    !token.core.is_empty() && token.core.chars().all(|c| c.is_ascii_digit())
}

fn is_connector(token: &Token) -> bool {
    let lowered = token.core.to_lowercase();
    lowered == "of" || lowered == "and" || token.raw == "&"
}

/// True when a token's raw form opens a quote or bracket, which ends any
/// name run in progress.
fn opens_enclosure(token: &Token) -> bool {
    token
        .raw
        .chars()
        .next()
        .is_some_and(|c| matches!(c, '(' | '[' | '"' | '\'' | '\u{201c}' | '\u{2018}'))
}

/// True when the token's raw form carries sentence-ending punctuation.
fn ends_sentence(token: &Token) -> bool {
    token
        .raw
        .chars()
        .last()
        .is_some_and(|c| matches!(c, '.' | '!' | '?' | ';' | ':'))
}

fn ends_with_comma(token: &Token) -> bool {
    token.raw.ends_with(',')
}

/// Finds every maximal name run in the token list: each result is a
/// (start, end-inclusive) token range beginning at a capitalized token.
fn name_runs(tokens: &[Token], rules: &EntityRules) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if !is_capitalized(&tokens[i]) {
            i += 1;
            continue;
        }

        // Grow a maximal name run starting at token i.
        let mut end = i;
        loop {
            let current = &tokens[end];
            if ends_sentence(current) {
                break;
            }
            let Some(next) = tokens.get(end + 1) else {
                break;
            };
            // A comma ends the run unless it glues a legal designator on, as
            // in "Co., Ltd." or "Meta Platforms, Inc.".
            if ends_with_comma(current) && !rules.is_designator(&next.core) {
                break;
            }
            if opens_enclosure(next) {
                break;
            }
            if is_capitalized(next) || is_digits(next) {
                end += 1;
                continue;
            }
            if is_connector(next) {
                if let Some(after) = tokens.get(end + 2) {
                    if is_capitalized(after) && !opens_enclosure(after) {
                        end += 2;
                        continue;
                    }
                }
            }
            break;
        }
        runs.push((i, end));
        i = end + 1;
    }
    runs
}

fn collect_candidates(
    paragraph: &str,
    paragraph_index: usize,
    paragraph_rank: usize,
    rank_bonus: u32,
    rules: &EntityRules,
    out: &mut Vec<ScoredCandidate>,
) {
    let tokens = scan_tokens(paragraph);
    for (start, end) in name_runs(&tokens, rules) {
        let candidate_tokens = &tokens[start..=end];
        let next_index = end + 1;
        if let Some(candidate) = qualify(
            candidate_tokens,
            &tokens,
            start,
            next_index,
            paragraph_index,
            paragraph_rank,
            rank_bonus,
            rules,
        ) {
            out.push(candidate);
        }
    }
}

/// One named-entity occurrence, before any evidence scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub text: String,
    /// The mention's final token is a legal designator ("Inc.", "GmbH").
    pub ends_with_designator: bool,
    /// Connector-free pieces of a compound run: "Google and Amazon" carries
    /// ["Google", "Amazon"] so a caller can fall back to the parts when the
    /// whole is not a recognizable name. Empty for a simple run.
    pub segments: Vec<EntityMention>,
}

/// Lists every name mention in a paragraph with no winner selection and no
/// evidence requirement. Pronoun-only runs and blocklisted phrases are
/// still dropped; everything else is reported so callers can inventory all
/// organizations a document names, not just its controller.
pub fn entity_mentions(paragraph: &str, rules: &EntityRules) -> Vec<EntityMention> {
    let tokens = scan_tokens(paragraph);
    let mut mentions = Vec::new();
    for (start, end) in name_runs(&tokens, rules) {
        let Some(mut mention) = mention_from_run(&tokens[start..=end], rules) else {
            continue;
        };
        mention.segments = connector_segments(&tokens[start..=end], rules);
        mentions.push(mention);
    }
    mentions
}

fn mention_from_run(run: &[Token], rules: &EntityRules) -> Option<EntityMention> {
    if is_pronoun_only(run) || is_blocklisted(run, rules) {
        return None;
    }
    let text = candidate_text(run, rules)?;
    let ends_with_designator = run.last().is_some_and(|t| rules.is_designator(&t.core));
    Some(EntityMention {
        text,
        ends_with_designator,
        segments: Vec::new(),
    })
}

/// Splits a run at connector tokens ("and", "of", "&") and builds a mention
/// per piece. A run without connectors has no segments.
fn connector_segments(run: &[Token], rules: &EntityRules) -> Vec<EntityMention> {
    let mut pieces: Vec<&[Token]> = Vec::new();
    let mut begin = 0;
    for (i, token) in run.iter().enumerate() {
        if is_connector(token) {
            if begin < i {
                pieces.push(&run[begin..i]);
            }
            begin = i + 1;
        }
    }
    if begin == 0 {
        return Vec::new();
    }
    if begin < run.len() {
        pieces.push(&run[begin..]);
    }
    pieces
        .into_iter()
        .filter_map(|piece| mention_from_run(piece, rules))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn qualify(
    candidate_tokens: &[Token],
    all_tokens: &[Token],
    start: usize,
    next_index: usize,
    paragraph_index: usize,
    paragraph_rank: usize,
    rank_bonus: u32,
    rules: &EntityRules,
) -> Option<ScoredCandidate> {
    let text = candidate_text(candidate_tokens, rules)?;

    if is_pronoun_only(candidate_tokens) || is_blocklisted(candidate_tokens, rules) {
        return None;
    }

    let trigger = trigger_before(all_tokens, start, rules);
    let has_alias = alias_follows(all_tokens, next_index);
    let has_designator = candidate_tokens
        .last()
        .is_some_and(|t| rules.is_designator(&t.core));

    let base = trigger.is_some() as u32 * TRIGGER_POINTS
        + has_alias as u32 * ALIAS_POINTS
        + has_designator as u32 * DESIGNATOR_POINTS;
    // Paragraph rank orders qualified names; it must not qualify a bare
    // capitalized phrase by itself.
    if base == 0 {
        return None;
    }

    Some(ScoredCandidate {
        text,
        paragraph_index,
        paragraph_rank,
        position: start,
        score: base + rank_bonus,
        trigger,
        has_alias,
        has_designator,
    })
}

/// Reconstructs the candidate's surface text: outer punctuation stripped,
/// but a trailing period kept when it belongs to a legal designator, so
/// "TikTok Inc." survives exactly.
fn candidate_text(tokens: &[Token], rules: &EntityRules) -> Option<String> {
    let mut parts: Vec<String> = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if i == 0 || i == tokens.len() - 1 {
            let stripped = token
                .raw
                .trim_start_matches(|c: char| !c.is_alphanumeric() && c != '&');
            let mut cleaned = stripped
                .trim_end_matches(|c: char| !c.is_alphanumeric() && c != '&')
                .to_string();
            if i == tokens.len() - 1
                && rules.is_designator(&token.core)
                && stripped[cleaned.len()..].starts_with('.')
            {
                cleaned.push('.');
            }
            if cleaned.is_empty() {
                return None;
            }
            parts.push(cleaned);
        } else {
            parts.push(token.raw.clone());
        }
    }
    Some(parts.join(" "))
}

fn is_pronoun_only(tokens: &[Token]) -> bool {
    tokens.iter().all(|t| {
        let lowered = t.core.to_lowercase();
        PRONOUNS.contains(&lowered.as_str()) || ARTICLES.contains(&lowered.as_str())
    })
}

fn is_blocklisted(tokens: &[Token], rules: &EntityRules) -> bool {
    let mut words: Vec<String> = tokens.iter().map(|t| t.core.to_lowercase()).collect();
    if words.len() > 1 && ARTICLES.contains(&words[0].as_str()) {
        words.remove(0);
    }
    rules.blocklist.contains(&words.join(" "))
}

/// The trigger phrase whose tokens sit immediately before `start`, if any.
fn trigger_before(tokens: &[Token], start: usize, rules: &EntityRules) -> Option<String> {
    for trigger in &rules.triggers {
        let len = trigger.len();
        if len > start {
            continue;
        }
        let window = &tokens[start - len..start];
        if window
            .iter()
            .zip(trigger)
            .all(|(t, word)| t.core.to_lowercase() == *word)
        {
            return Some(trigger.join(" "));
        }
    }
    None
}

/// True when the tokens from `next_index` open a parenthesized alias list
/// that contains a quoted "we" or "us".
fn alias_follows(tokens: &[Token], next_index: usize) -> bool {
    let Some(first) = tokens.get(next_index) else {
        return false;
    };
    if !first.raw.starts_with('(') {
        return false;
    }
    let mut content = String::new();
    for token in tokens.iter().skip(next_index).take(30) {
        content.push_str(&token.raw);
        content.push(' ');
        if token.raw.contains(')') {
            break;
        }
    }
    let normalized: String = content
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '\u{201c}' | '\u{201d}' => '"',
            '\u{2018}' | '\u{2019}' => '\'',
            other => other,
        })
        .collect();
    ["\"we\"", "\"us\"", "'we'", "'us'"]
        .iter()
        .any(|needle| normalized.contains(needle))
}
