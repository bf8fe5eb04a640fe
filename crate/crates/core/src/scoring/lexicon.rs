use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::{Clock, Provider, ScoreError, Scorer, ToxicityScore};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon term {term:?} has weight {weight}, expected (0, 1]")]
    Weight { term: String, weight: f64 },
    #[error("lexicon term {0:?} is not a single lowercase alphanumeric token")]
    Term(String),
    #[error("cannot read lexicon: {0}")]
    Read(String),
}

/// Lowercase terms with weights in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    terms: BTreeMap<String, f64>,
}

impl Lexicon {
    pub fn new(terms: BTreeMap<String, f64>) -> Result<Self, LexiconError> {
        for (term, &weight) in &terms {
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(LexiconError::Weight {
                    term: term.clone(),
                    weight,
                });
            }
            let is_token = !term.is_empty() && term.chars().all(char::is_alphanumeric) && *term == term.to_lowercase();
            if !is_token {
                return Err(LexiconError::Term(term.clone()));
            }
        }
        Ok(Self { terms })
    }

    /// JSON object mapping term to weight.
    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let terms: BTreeMap<String, f64> = serde_json::from_str(text).map_err(|e| LexiconError::Read(e.to_string()))?;
        Self::new(terms)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexiconError::Read(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A small general-purpose insult list.
    pub fn builtin() -> Self {
        let terms = [
            ("idiot", 0.7),
            ("stupid", 0.55),
            ("moron", 0.7),
            ("jerk", 0.45),
            ("dumb", 0.45),
            ("trash", 0.3),
            ("loser", 0.5),
            ("pathetic", 0.4),
            ("clown", 0.35),
            ("hate", 0.3),
            ("ass", 0.6),
            ("shut", 0.2),
        ];
        Self::new(terms.iter().map(|(t, w)| (t.to_string(), *w)).collect()).expect("builtin lexicon is valid")
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.terms.get(term).copied()
    }

    /// `1 - prod(1 - w)` over every token occurrence found in the lexicon.
    pub fn value(&self, body: &str) -> f64 {
        let lowered = body.to_lowercase();
        let clean: f64 = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter_map(|tok| self.terms.get(tok))
            .map(|w| 1.0 - w)
            .product();
        (1.0 - clean).clamp(0.0, 1.0)
    }
}

pub fn score_lexicon(body: &str, lexicon: &Lexicon, scored_at: i64) -> ToxicityScore {
    ToxicityScore::new(lexicon.value(body), Provider::Lexicon, scored_at).expect("lexicon value in [0, 1]")
}

/// Deterministic offline scorer.
pub struct LexiconScorer {
    lexicon: Lexicon,
    clock: Clock,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon, clock: Clock) -> Self {
        Self { lexicon, clock }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

impl Scorer for LexiconScorer {
    fn provider(&self) -> Provider {
        Provider::Lexicon
    }

    fn score(&self, body: &str) -> Result<ToxicityScore, ScoreError> {
        Ok(score_lexicon(body, &self.lexicon, (self.clock)()))
    }
}
