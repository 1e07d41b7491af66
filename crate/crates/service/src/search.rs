//! Inverted index over published deposits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use depot3d_core::catalog::{Deposit, VocabularyRef};
use depot3d_core::vocab::{normalize_label, VocabIndex};
use serde::{Deserialize, Serialize};

const TITLE_WEIGHT: u32 = 3;
const TERM_WEIGHT: u32 = 2;
const TEXT_WEIGHT: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchQuery {
    pub q: String,
    /// PeriodO uri.
    pub period: Option<String>,
    /// Geonames uri.
    pub place: Option<String>,
    /// Object category, e.g. "mesh".
    pub category: Option<String>,
    /// 1-based.
    pub page: Option<usize>,
    pub per_page: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub local_id: u64,
    pub pid: String,
    pub pid_url: String,
    pub title: String,
    pub score: u32,
    pub restricted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    pub total: usize,
    pub page: usize,
    pub per_page: usize,
    pub hits: Vec<SearchHit>,
}

#[derive(Debug, Clone, Default)]
struct Facets {
    periods: BTreeSet<String>,
    places: BTreeSet<String>,
    categories: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SearchIndex {
    postings: BTreeMap<String, BTreeMap<u64, u32>>,
    facets: HashMap<u64, Facets>,
    tokens_of: HashMap<u64, Vec<String>>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    normalize_label(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn term_texts<'a>(refs: &'a [VocabularyRef], vocab: &'a VocabIndex) -> Vec<&'a str> {
    let mut out = Vec::new();
    for r in refs {
        if !r.label.is_empty() {
            out.push(r.label.as_str());
        }
        if let Ok(e) = vocab.resolve(&r.scheme, &r.uri) {
            out.push(e.preferred_label.as_str());
            out.extend(e.alt_labels.iter().map(String::as_str));
        }
    }
    out
}

impl SearchIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// Replaces whatever was indexed for `d.local_id`.
    pub fn index(&mut self, d: &Deposit, vocab: &VocabIndex) {
        self.remove(d.local_id);
        let mut weights: BTreeMap<String, u32> = BTreeMap::new();
        let mut add = |text: &str, w: u32| {
            for t in tokenize(text) {
                let slot = weights.entry(t).or_default();
                *slot = (*slot).max(w);
            }
        };
        add(&d.title, TITLE_WEIGHT);
        add(&d.scientific_objectives, TEXT_WEIGHT);
        add(&d.citation, TEXT_WEIGHT);
        if let Some(c) = &d.deposit_creator {
            add(&c.name, TEXT_WEIGHT);
        }
        for refs in [&d.period_terms, &d.place_terms, &d.subject_terms] {
            for text in term_texts(refs, vocab) {
                add(text, TERM_WEIGHT);
            }
        }
        for o in &d.objects {
            add(&o.title, TERM_WEIGHT);
            for c in &o.creators {
                add(&c.name, TEXT_WEIGHT);
            }
        }
        let id = d.local_id;
        let mut tokens = Vec::with_capacity(weights.len());
        for (t, w) in weights {
            self.postings.entry(t.clone()).or_default().insert(id, w);
            tokens.push(t);
        }
        self.tokens_of.insert(id, tokens);
        self.facets.insert(
            id,
            Facets {
                periods: d.period_terms.iter().map(|r| r.uri.clone()).collect(),
                places: d.place_terms.iter().map(|r| r.uri.clone()).collect(),
                categories: d.objects.iter().map(|o| o.category.clone()).collect(),
            },
        );
    }

    pub fn remove(&mut self, id: u64) {
        for t in self.tokens_of.remove(&id).unwrap_or_default() {
            if let Some(p) = self.postings.get_mut(&t) {
                p.remove(&id);
                if p.is_empty() {
                    self.postings.remove(&t);
                }
            }
        }
        self.facets.remove(&id);
    }

    /// Scores every indexed deposit matching all query tokens and filters.
    /// A query token matches any indexed token it is a prefix of, so partial
    /// words work for typeahead. An empty query matches everything.
    pub fn matches(&self, q: &SearchQuery) -> BTreeMap<u64, u32> {
        let tokens = tokenize(&q.q);
        let mut scores: BTreeMap<u64, u32> = self
            .facets
            .iter()
            .filter(|(_, f)| {
                q.period.as_ref().is_none_or(|p| f.periods.contains(p))
                    && q.place.as_ref().is_none_or(|p| f.places.contains(p))
                    && q.category.as_ref().is_none_or(|c| f.categories.contains(c))
            })
            .map(|(id, _)| (*id, 0))
            .collect();
        for t in tokens {
            let mut best: HashMap<u64, u32> = HashMap::new();
            for (_, posting) in self.postings.range(t.clone()..).take_while(|(k, _)| k.starts_with(&t)) {
                for (id, w) in posting {
                    let slot = best.entry(*id).or_default();
                    *slot = (*slot).max(*w);
                }
            }
            scores.retain(|id, s| match best.get(id) {
                Some(w) => {
                    *s += w;
                    true
                }
                None => false,
            });
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use depot3d_core::sample;

    #[test]
    fn finds_chassenon_by_title_word_and_prefix() {
        let vocab = VocabIndex::with_bundled();
        let mut idx = SearchIndex::new();
        idx.index(&sample::chassenon_published(), &vocab);
        for q in ["thermes", "Thermes", "therm", "chassenon thermes"] {
            let m = idx.matches(&SearchQuery {
                q: q.into(),
                ..SearchQuery::default()
            });
            assert_eq!(m.keys().copied().collect::<Vec<_>>(), [257350], "{q}");
        }
        assert!(idx
            .matches(&SearchQuery {
                q: "thermes zzz".into(),
                ..SearchQuery::default()
            })
            .is_empty());
        idx.remove(257350);
        assert!(idx.is_empty());
        assert!(idx.postings.is_empty());
    }
}
