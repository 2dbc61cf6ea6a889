//! Linear policy-vs-other text classifier.
//!
//! Features are tf-idf weighted unigram counts over a capped vocabulary,
//! L2-normalized per document. Training runs plain stochastic gradient
//! descent on the modified-Huber loss with an L2 penalty; the shuffle order
//! is drawn from a seeded generator and every summation walks indices in
//! sorted order, so the same corpus and seed always produce bit-identical
//! weights.

use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MODEL_VERSION: u32 = 1;

const BUNDLED_MODEL_JSON: &str = include_str!("../../data/model.json");

static BUNDLED_MODEL: LazyLock<PolicyClassifier> = LazyLock::new(|| {
    PolicyClassifier::from_json(BUNDLED_MODEL_JSON).expect("bundled model parses")
});

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training corpus contains only {label:?} documents")]
    SingleClassCorpus { label: String },
    #[error("text has no word tokens")]
    EmptyText,
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file malformed: {0}")]
    Malformed(String),
}

/// One training document.
#[derive(Debug, Clone)]
pub struct LabeledDoc {
    pub text: String,
    pub is_policy: bool,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassifierConfig {
    /// L2 penalty strength.
    pub regularization_alpha: f64,
    pub epochs: u32,
    pub seed: u64,
    /// Keep only this many of the most frequent training tokens.
    pub max_vocabulary: usize,
    /// Initial SGD step size; decays as training proceeds.
    pub learning_rate: f64,
}

impl Default for ClassifierConfig {
    fn default() -> ClassifierConfig {
        ClassifierConfig {
            regularization_alpha: 1e-3,
            epochs: 30,
            seed: 42,
            max_vocabulary: 20_000,
            learning_rate: 0.5,
        }
    }
}

/// Verdict for one text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub is_policy: bool,
    /// Signed distance from the decision boundary.
    pub score: f64,
}

/// A trained linear model over tf-idf unigram features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyClassifier {
    version: u32,
    config: ClassifierConfig,
    /// Tokens in feature-index order.
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
    #[serde(skip)]
    vocab_index: HashMap<String, usize>,
}

/// Casefolded word tokens: alphanumeric runs of two or more characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            if current.chars().count() >= 2 {
                tokens.push(std::mem::take(&mut current));
            } else {
                current.clear();
            }
        }
    }
    if current.chars().count() >= 2 {
        tokens.push(current);
    }
    tokens
}

/// Trains a classifier on `corpus`. The corpus must contain both classes.
pub fn train_classifier(
    corpus: &[LabeledDoc],
    config: &ClassifierConfig,
) -> Result<PolicyClassifier, ClassifierError> {
    if corpus.is_empty() {
        return Err(ClassifierError::EmptyCorpus);
    }
    let positives = corpus.iter().filter(|d| d.is_policy).count();
    if positives == 0 || positives == corpus.len() {
        return Err(ClassifierError::SingleClassCorpus {
            label: if positives == 0 { "other" } else { "policy" }.into(),
        });
    }

    let tokenized: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(&d.text)).collect();

    // Vocabulary: the most frequent tokens, ties broken lexicographically so
    // the cut is deterministic.
    let mut total_counts: HashMap<&str, u64> = HashMap::new();
    for tokens in &tokenized {
        for token in tokens {
            *total_counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = total_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(config.max_vocabulary);
    let mut vocabulary: Vec<String> = ranked.into_iter().map(|(t, _)| t.to_string()).collect();
    vocabulary.sort();
    let vocab_index: HashMap<String, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();

    // Smoothed idf over the training documents.
    let mut df = vec![0u32; vocabulary.len()];
    for tokens in &tokenized {
        let mut seen = vec![false; vocabulary.len()];
        for token in tokens {
            if let Some(&i) = vocab_index.get(token.as_str()) {
                if !seen[i] {
                    seen[i] = true;
                    df[i] += 1;
                }
            }
        }
    }
    let n_docs = corpus.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n_docs) / (1.0 + f64::from(d))).ln() + 1.0)
        .collect();

    let features: Vec<Vec<(usize, f64)>> = tokenized
        .iter()
        .map(|tokens| vectorize(tokens, &vocab_index, &idf))
        .collect();
    let labels: Vec<f64> = corpus
        .iter()
        .map(|d| if d.is_policy { 1.0 } else { -1.0 })
        .collect();

    let mut weights = vec![0.0f64; vocabulary.len()];
    let mut bias = 0.0f64;
    let alpha = config.regularization_alpha;
    let eta0 = config.learning_rate;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut step_count: u64 = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &doc in &order {
            let eta = eta0 / (1.0 + eta0 * alpha * step_count as f64);
            step_count += 1;

            let score = sparse_dot(&weights, &features[doc]) + bias;
            let y = labels[doc];
            let z = y * score;
            // Modified-Huber: squared hinge inside the margin band, linear
            // beyond it so single outliers cannot dominate an update.
            let dloss = if z >= 1.0 {
                0.0
            } else if z >= -1.0 {
                -2.0 * (1.0 - z)
            } else {
                -4.0
            };

            let decay = 1.0 - eta * alpha;
            for w in weights.iter_mut() {
                *w *= decay;
            }
            if dloss != 0.0 {
                let step = eta * dloss * y;
                for &(i, x) in &features[doc] {
                    weights[i] -= step * x;
                }
                bias -= step;
            }
        }
    }

    Ok(PolicyClassifier {
        version: MODEL_VERSION,
        config: config.clone(),
        vocabulary,
        idf,
        weights,
        bias,
        threshold: 0.0,
        vocab_index,
    })
}

/// Loads a `path<TAB>label` manifest; labels are `policy` or `other` and
/// paths are relative to the manifest's directory.
pub fn load_corpus(manifest: &Path) -> Result<Vec<LabeledDoc>, ClassifierError> {
    let text = std::fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut docs = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, label) = line.split_once('\t').ok_or_else(|| {
            ClassifierError::Malformed(format!(
                "{}:{}: expected path<TAB>label",
                manifest.display(),
                number + 1
            ))
        })?;
        let is_policy = match label.trim().to_lowercase().as_str() {
            "policy" => true,
            "other" => false,
            unknown => {
                return Err(ClassifierError::Malformed(format!(
                    "{}:{}: unknown label {unknown:?}",
                    manifest.display(),
                    number + 1
                )))
            }
        };
        let doc_text = std::fs::read_to_string(base.join(path.trim()))?;
        docs.push(LabeledDoc {
            text: doc_text,
            is_policy,
        });
    }
    Ok(docs)
}

impl PolicyClassifier {
    /// Scores `text`; positive side of the threshold means policy.
    pub fn classify(&self, text: &str) -> Result<Classification, ClassifierError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        let features = vectorize(&tokens, &self.vocab_index, &self.idf);
        let score = sparse_dot(&self.weights, &features) + self.bias;
        Ok(Classification {
            is_policy: score > self.threshold,
            score,
        })
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| ClassifierError::Malformed(e.to_string()))?;
        body.push('\n');
        std::fs::write(path, body)?;
        Ok(())
    }

    /// The model trained on the bundled corpus and committed with the
    /// crate, so every command works without a training step.
    pub fn bundled() -> &'static PolicyClassifier {
        &BUNDLED_MODEL
    }

    pub fn load(path: &Path) -> Result<PolicyClassifier, ClassifierError> {
        let text = std::fs::read_to_string(path)?;
        PolicyClassifier::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<PolicyClassifier, ClassifierError> {
        let mut model: PolicyClassifier =
            serde_json::from_str(text).map_err(|e| ClassifierError::Malformed(e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(ClassifierError::Malformed(format!(
                "unsupported model version {}",
                model.version
            )));
        }
        if model.weights.len() != model.vocabulary.len()
            || model.idf.len() != model.vocabulary.len()
        {
            return Err(ClassifierError::Malformed(
                "weight, idf and vocabulary lengths disagree".into(),
            ));
        }
        model.vocab_index = model
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(model)
    }
}

/// tf-idf vector for one tokenized document, sparse and sorted by feature
/// index, L2-normalized. Out-of-vocabulary tokens are ignored.
fn vectorize(
    tokens: &[String],
    vocab_index: &HashMap<String, usize>,
    idf: &[f64],
) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for token in tokens {
        if let Some(&i) = vocab_index.get(token.as_str()) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut features: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(i, c)| (i, f64::from(c) * idf[i]))
        .collect();
    features.sort_by_key(|&(i, _)| i);
    let norm = features.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in features.iter_mut() {
            *v /= norm;
        }
    }
    features
}

fn sparse_dot(dense: &[f64], sparse: &[(usize, f64)]) -> f64 {
    sparse.iter().map(|&(i, x)| dense[i] * x).sum()
}
