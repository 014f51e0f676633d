//! TF-IDF cosine similarity and ROUGE-1/2/L F-measures.
//!
//! Both serve two purposes: as the sentence mapping function and, for ROUGE,
//! as the summary quality metric reported next to the bias distance.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::textproc::{ngrams, tokenize, TokenList};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot build a TF-IDF space from an empty document collection")]
    EmptyCollection,
    #[error("candidate count {candidates} does not match reference count {references}")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("cannot average ROUGE over zero summary pairs")]
    NoPairs,
}

/// Vocabulary and smoothed idf weights of one document collection.
///
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, so every in-vocabulary weight is
/// finite and at least 1.
#[derive(Debug, Clone)]
pub struct TfidfSpace {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

/// L2-normalized sparse tf-idf vector, sorted by dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(Vec<(usize, f64)>);

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    /// Dot product clamped to [0, 1]; both operands are unit vectors with
    /// non-negative entries.
    pub fn cosine(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut dot = 0.0;
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot.clamp(0.0, 1.0)
    }
}

impl TfidfSpace {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn vocabulary_size(&self) -> usize {
        self.idf.len()
    }

    /// Dimension of a token, if it occurs in the collection.
    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i])
    }

    /// Raw term frequency times idf, L2-normalized. Out-of-vocabulary tokens
    /// are ignored; an all-zero result stays empty.
    pub fn embed(&self, tokens: &TokenList) -> SparseVector {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for tok in tokens.iter() {
            if let Some(&idx) = self.vocabulary.get(tok.as_str()) {
                *tf.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            tf.into_iter().map(|(i, f)| (i, f * self.idf[i])).collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        } else {
            entries.clear();
        }
        SparseVector(entries)
    }
}

pub fn build_tfidf_space(documents: &[TokenList]) -> Result<TfidfSpace, SimError> {
    if documents.is_empty() {
        return Err(SimError::EmptyCollection);
    }
    let mut vocabulary: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in documents {
        let mut seen: Vec<usize> = Vec::new();
        for tok in doc.iter() {
            let next = vocabulary.len();
            let idx = *vocabulary.entry(tok.clone()).or_insert(next);
            if idx == df.len() {
                df.push(0);
            }
            seen.push(idx);
        }
        seen.sort_unstable();
        seen.dedup();
        for idx in seen {
            df[idx] += 1;
        }
    }
    let n = documents.len() as f64;
    let idf = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    Ok(TfidfSpace {
        vocabulary,
        idf,
        doc_count: documents.len(),
    })
}

pub fn tfidf_cosine(query: &TokenList, doc: &TokenList, space: &TfidfSpace) -> f64 {
    space.embed(query).cosine(&space.embed(doc))
}

fn f_measure(overlap: usize, candidate_len: usize, reference_len: usize) -> f64 {
    if overlap == 0 || candidate_len == 0 || reference_len == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / candidate_len as f64;
    let recall = overlap as f64 / reference_len as f64;
    2.0 * precision * recall / (precision + recall)
}

/// ROUGE-N F1 with clipped (multiset) n-gram overlap.
pub fn rouge_n(candidate: &TokenList, reference: &TokenList, n: usize) -> f64 {
    let (Ok(cand), Ok(refs)) = (ngrams(candidate, n), ngrams(reference, n)) else {
        return 0.0;
    };
    let overlap: usize = cand
        .iter()
        .map(|(gram, &c)| refs.get(gram).map_or(0, |&r| c.min(r)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    f_measure(overlap, cand_total, ref_total)
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the token-level longest common subsequence.
pub fn rouge_l(candidate: &TokenList, reference: &TokenList) -> f64 {
    let lcs = lcs_len(candidate.as_slice(), reference.as_slice());
    f_measure(lcs, candidate.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScores {
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
}

impl RougeScores {
    pub fn of_pair(candidate: &TokenList, reference: &TokenList) -> Self {
        Self {
            r1: rouge_n(candidate, reference, 1),
            r2: rouge_n(candidate, reference, 2),
            rl: rouge_l(candidate, reference),
        }
    }

    /// Unweighted mean of per-pair scores.
    pub fn mean(scores: &[RougeScores]) -> Result<Self, SimError> {
        if scores.is_empty() {
            return Err(SimError::NoPairs);
        }
        let n = scores.len() as f64;
        let sum = scores.iter().fold((0.0, 0.0, 0.0), |acc, s| {
            (acc.0 + s.r1, acc.1 + s.r2, acc.2 + s.rl)
        });
        Ok(Self {
            r1: sum.0 / n,
            r2: sum.1 / n,
            rl: sum.2 / n,
        })
    }
}

/// Corpus-level ROUGE: per-pair scores on whole-summary tokens, averaged.
pub fn corpus_rouge<C, R>(candidates: &[C], references: &[R]) -> Result<RougeScores, SimError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if candidates.len() != references.len() {
        return Err(SimError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    let per_pair: Vec<RougeScores> = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| RougeScores::of_pair(&tokenize(c.as_ref()), &tokenize(r.as_ref())))
        .collect();
    RougeScores::mean(&per_pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> TokenList {
        words.iter().copied().collect()
    }

    #[test]
    fn idf_values() {
        let space = build_tfidf_space(&[toks(&["a", "b"]), toks(&["a", "c"])]).unwrap();
        assert_eq!(space.doc_count(), 2);
        assert!((space.idf("a").unwrap() - 1.0).abs() < 1e-15);
        let expected_b = (3.0f64 / 2.0).ln() + 1.0;
        assert!((space.idf("b").unwrap() - expected_b).abs() < 1e-15);
        assert!((expected_b - 1.4055).abs() < 1e-4);
        assert_eq!(space.idf("c"), space.idf("b"));
        assert_eq!(space.idf("z"), None);

        let single = build_tfidf_space(&[toks(&["a"])]).unwrap();
        assert_eq!(single.idf("a"), Some(1.0));
        assert_eq!(build_tfidf_space(&[]).unwrap_err(), SimError::EmptyCollection);
    }

    #[test]
    fn vocabulary_indices_are_dense() {
        let space =
            build_tfidf_space(&[toks(&["x", "y", "x"]), toks(&["z"]), toks(&[])]).unwrap();
        let mut idx: Vec<usize> = ["x", "y", "z"]
            .iter()
            .map(|t| space.index_of(t).unwrap())
            .collect();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(space.vocabulary_size(), 3);
    }

    #[test]
    fn cosine_examples() {
        let docs = [toks(&["a", "b"]), toks(&["a", "c"])];
        let space = build_tfidf_space(&docs).unwrap();
        assert!((tfidf_cosine(&docs[0], &docs[0], &space) - 1.0).abs() < 1e-12);
        assert_eq!(tfidf_cosine(&toks(&["b"]), &toks(&["c"]), &space), 0.0);
        let q = toks(&["a", "b"]);
        assert!(tfidf_cosine(&q, &docs[0], &space) > tfidf_cosine(&q, &docs[1], &space));
        assert_eq!(tfidf_cosine(&toks(&["zz"]), &docs[0], &space), 0.0);
        assert_eq!(tfidf_cosine(&toks(&[]), &docs[0], &space), 0.0);
    }

    #[test]
    fn rouge_examples() {
        let cand = toks(&["the", "cat"]);
        let reference = toks(&["the", "cat", "sat"]);
        assert!((rouge_n(&cand, &reference, 1) - 0.8).abs() < 1e-12);
        for n in [1, 2] {
            assert_eq!(rouge_n(&reference, &reference, n), 1.0);
            assert_eq!(rouge_n(&cand, &toks(&["dog", "ran"]), n), 0.0);
        }
        let l = rouge_l(&toks(&["a", "x", "b"]), &toks(&["a", "b", "y"]));
        assert!((l - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_l(&reference, &reference), 1.0);
        assert_eq!(rouge_l(&toks(&[]), &reference), 0.0);
        assert_eq!(rouge_n(&toks(&["a"]), &toks(&["a"]), 2), 0.0);
    }

    #[test]
    fn clipped_overlap() {
        // candidate repeats "a" three times, reference has it once.
        let c = toks(&["a", "a", "a"]);
        let r = toks(&["a", "b"]);
        // overlap 1, P = 1/3, R = 1/2
        let expected = 2.0 * (1.0 / 3.0) * 0.5 / (1.0 / 3.0 + 0.5);
        assert!((rouge_n(&c, &r, 1) - expected).abs() < 1e-12);
    }

    #[test]
    fn corpus_rouge_means() {
        let s = corpus_rouge(&["the cat sat", "a b"], &["the cat sat", "a b"]).unwrap();
        assert_eq!(s, RougeScores { r1: 1.0, r2: 1.0, rl: 1.0 });
        // r1 per pair: 0.8 and 0.25 (P = R = 1/4)
        let s = corpus_rouge(&["the cat", "a b c d"], &["the cat sat", "a x y z"]).unwrap();
        assert!((s.r1 - 0.525).abs() < 1e-12);
        assert_eq!(
            corpus_rouge(&["a"], &["a", "b"]).unwrap_err(),
            SimError::LengthMismatch { candidates: 1, references: 2 }
        );
        assert_eq!(corpus_rouge::<&str, &str>(&[], &[]).unwrap_err(), SimError::NoPairs);
    }

    fn word_lists() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-e]", 0..12)
    }

    proptest! {
        #[test]
        fn rouge_is_symmetric_and_bounded(a in word_lists(), b in word_lists()) {
            let (a, b): (TokenList, TokenList) = (a.into_iter().collect(), b.into_iter().collect());
            for n in [1, 2] {
                let x = rouge_n(&a, &b, n);
                prop_assert_eq!(x, rouge_n(&b, &a, n));
                prop_assert!((0.0..=1.0).contains(&x));
            }
            let l = rouge_l(&a, &b);
            prop_assert_eq!(l, rouge_l(&b, &a));
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn rouge1_ignores_order(a in word_lists(), b in word_lists(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = a.clone();
            shuffled.shuffle(&mut rng);
            let (a, s, b): (TokenList, TokenList, TokenList) =
                (a.into_iter().collect(), shuffled.into_iter().collect(), b.into_iter().collect());
            prop_assert!((rouge_n(&a, &b, 1) - rouge_n(&s, &b, 1)).abs() < 1e-15);
        }

        #[test]
        fn appending_candidate_token_never_lowers_overlap(a in word_lists(), b in word_lists(), pick in 0usize..12) {
            prop_assume!(!a.is_empty());
            let extra = a[pick % a.len()].clone();
            let overlap = |c: &TokenList, r: &TokenList| {
                let (cn, rn) = (ngrams(c, 1).unwrap(), ngrams(r, 1).unwrap());
                cn.iter().map(|(g, &x)| rn.get(g).map_or(0, |&y| x.min(y))).sum::<usize>()
            };
            let cand: TokenList = a.iter().cloned().collect();
            let before: TokenList = b.iter().cloned().collect();
            let after: TokenList = b.iter().cloned().chain(std::iter::once(extra)).collect();
            prop_assert!(overlap(&cand, &after) >= overlap(&cand, &before));
        }

        #[test]
        fn cosine_bounded_and_self_similar(docs in proptest::collection::vec(word_lists(), 1..6), q in word_lists()) {
            let docs: Vec<TokenList> = docs.into_iter().map(|d| d.into_iter().collect()).collect();
            let space = build_tfidf_space(&docs).unwrap();
            let q: TokenList = q.into_iter().collect();
            for d in &docs {
                let c = tfidf_cosine(&q, d, &space);
                prop_assert!((0.0..=1.0).contains(&c));
                if !d.is_empty() {
                    prop_assert!((tfidf_cosine(d, d, &space) - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
