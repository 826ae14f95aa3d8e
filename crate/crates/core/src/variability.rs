//! Pairwise similarity of explanation texts on lexical, syntactic and
//! semantic axes. Higher similarity means lower variability.

use std::collections::BTreeMap;
use std::hash::Hasher;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VariabilityError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("embedding is the zero vector")]
    ZeroVector,
    #[error("need at least 2 explanations, got {0}")]
    TooFewExplanations(usize),
    #[error("n-gram order must be 1, 2 or 3, got {0}")]
    BadOrder(usize),
}

const BOUNDARY: &str = "\u{2402}";

/// Lowercased word tokens; punctuation is dropped.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Multiset of n-grams with n−1 boundary markers padded on each side.
pub fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut padded: Vec<&str> = vec![BOUNDARY; n - 1];
    padded.extend(tokens.iter().map(AsRef::as_ref));
    padded.extend(std::iter::repeat_n(BOUNDARY, n - 1));
    let mut out = BTreeMap::new();
    for w in padded.windows(n) {
        *out.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
    }
    out
}

/// Σ min(count) / Σ max(count) over the union of keys.
pub fn multiset_jaccard<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    union += b
        .iter()
        .filter(|(k, _)| !a.contains_key(*k))
        .map(|(_, &c)| c)
        .sum::<usize>();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn check_order(n: usize) -> Result<(), VariabilityError> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(VariabilityError::BadOrder(n))
    }
}

pub fn lexical_ngram_similarity(a: &str, b: &str, n: usize) -> Result<f64, VariabilityError> {
    check_order(n)?;
    let (ta, tb) = (word_tokens(a), word_tokens(b));
    if ta.is_empty() || tb.is_empty() {
        return Err(VariabilityError::EmptyText);
    }
    Ok(multiset_jaccard(&ngram_counts(&ta, n), &ngram_counts(&tb, n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Conj,
    Prt,
    Punct,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Conj => "CONJ",
            PosTag::Prt => "PRT",
            PosTag::Punct => ".",
            PosTag::Other => "X",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenAnnotation {
    pub tokens: Vec<String>,
    pub tags: Vec<PosTag>,
}

pub trait Tagger: Sync {
    fn tag(&self, text: &str) -> TokenAnnotation;
}

/// Lexicon lookup, then suffix rules, with one contextual rule: an
/// s-final word directly after a noun or pronoun is a verb.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "every", "some", "any", "no", "each", "all", "both", "another",
    "either", "neither", "such",
];
const PRONOUNS: &[&str] = &[
    "i",
    "you",
    "he",
    "she",
    "it",
    "we",
    "they",
    "me",
    "him",
    "her",
    "us",
    "them",
    "my",
    "your",
    "his",
    "its",
    "our",
    "their",
    "mine",
    "yours",
    "ours",
    "theirs",
    "myself",
    "himself",
    "herself",
    "itself",
    "themselves",
    "someone",
    "something",
    "somebody",
    "anyone",
    "anything",
    "everyone",
    "everything",
    "nobody",
    "nothing",
    "who",
    "whom",
    "whose",
    "which",
    "what",
];
const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "for", "with", "by", "from", "into", "onto", "over", "under", "about", "near", "behind",
    "between", "through", "during", "without", "within", "across", "along", "around", "against", "after", "before",
    "above", "below", "like", "than", "toward", "towards", "upon", "inside", "outside",
];
const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "so", "yet", "because", "if", "while", "although", "though", "since", "unless",
    "whereas", "whether",
];
const PARTICLES: &[&str] = &["to", "not", "n't", "up", "off", "out", "down"];
const ADVERBS: &[&str] = &[
    "very",
    "also",
    "just",
    "only",
    "never",
    "always",
    "often",
    "already",
    "still",
    "even",
    "too",
    "here",
    "there",
    "now",
    "then",
    "again",
    "perhaps",
    "maybe",
    "probably",
    "necessarily",
    "not",
    "however",
    "thus",
    "therefore",
    "when",
    "where",
    "why",
    "how",
];
const VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does", "did", "can", "could",
    "will", "would", "may", "might", "must", "should", "shall", "says", "say", "said", "go", "goes", "went", "make",
    "makes", "made", "get", "gets", "got", "see", "sees", "saw", "know", "knows", "knew", "take", "takes", "took",
    "come", "comes", "came", "give", "gives", "gave", "sit", "sits", "sat", "run", "runs", "ran", "eat", "eats", "ate",
    "play", "plays", "wear", "wears", "wore", "stand", "stands", "stood", "mean", "means", "meant", "imply", "implies",
    "follow", "follows", "state", "states",
];
const NUMBERS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "hundred", "thousand", "million",
];

fn lexicon(word: &str) -> Option<PosTag> {
    let table: [(&[&str], PosTag); 8] = [
        (DETERMINERS, PosTag::Det),
        (PRONOUNS, PosTag::Pron),
        (PARTICLES, PosTag::Prt),
        (ADPOSITIONS, PosTag::Adp),
        (CONJUNCTIONS, PosTag::Conj),
        (ADVERBS, PosTag::Adv),
        (VERBS, PosTag::Verb),
        (NUMBERS, PosTag::Num),
    ];
    table.iter().find(|(words, _)| words.contains(&word)).map(|(_, t)| *t)
}

fn suffix_tag(word: &str) -> PosTag {
    if word.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') {
        return PosTag::Num;
    }
    if !word.chars().any(char::is_alphabetic) {
        return PosTag::Other;
    }
    const ADJ: &[&str] = &["ous", "ful", "able", "ible", "ive", "less", "ic", "ish", "al"];
    const NOUN: &[&str] = &["tion", "sion", "ness", "ment", "ity", "ship", "ance", "ence", "ism"];
    let long = word.chars().count() > 4;
    if long && word.ends_with("ly") {
        PosTag::Adv
    } else if long && (word.ends_with("ing") || word.ends_with("ed")) {
        PosTag::Verb
    } else if NOUN.iter().any(|s| word.ends_with(s)) {
        PosTag::Noun
    } else if long && ADJ.iter().any(|s| word.ends_with(s)) {
        PosTag::Adj
    } else {
        PosTag::Noun
    }
}

/// Words (with inner apostrophes) and single punctuation characters.
fn syntactic_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || (c == '\'' && !cur.is_empty()) {
            cur.extend(c.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

impl Tagger for RuleTagger {
    fn tag(&self, text: &str) -> TokenAnnotation {
        let tokens = syntactic_tokens(text);
        let mut tags: Vec<PosTag> = Vec::with_capacity(tokens.len());
        for tok in &tokens {
            let known = lexicon(tok);
            let tag = if tok.chars().all(|c| !c.is_alphanumeric()) {
                PosTag::Punct
            } else if let Some(t) = known {
                t
            } else if tok.ends_with('s')
                && !tok.ends_with("ss")
                && matches!(tags.last(), Some(PosTag::Noun) | Some(PosTag::Pron))
            {
                PosTag::Verb
            } else {
                suffix_tag(tok)
            };
            tags.push(tag);
        }
        TokenAnnotation { tokens, tags }
    }
}

fn tag_sequence(tagger: &dyn Tagger, text: &str) -> Result<Vec<&'static str>, VariabilityError> {
    let ann = tagger.tag(text);
    let tags: Vec<&'static str> = ann.tags.iter().map(|t| t.as_str()).collect();
    if tags.is_empty() {
        return Err(VariabilityError::EmptyText);
    }
    Ok(tags)
}

pub fn syntactic_ngram_similarity(a: &str, b: &str, n: usize, tagger: &dyn Tagger) -> Result<f64, VariabilityError> {
    check_order(n)?;
    let (ta, tb) = (tag_sequence(tagger, a)?, tag_sequence(tagger, b)?);
    Ok(multiset_jaccard(&ngram_counts(&ta, n), &ngram_counts(&tb, n)))
}

pub trait Embedder: Sync {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Term-frequency bag of words hashed into a fixed number of buckets, then
/// L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEmbedder {
    pub dim: usize,
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        HashedBowEmbedder { dim: 256 }
    }
}

impl Embedder for HashedBowEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for w in word_tokens(text) {
            let mut h = fnv::FnvHasher::default();
            h.write(w.as_bytes());
            v[(h.finish() % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// `((1 + cos) / 2, 1 / (1 + ‖u − v‖))`.
pub fn vector_similarity(u: &[f64], v: &[f64]) -> Result<(f64, f64), VariabilityError> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(VariabilityError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
    let dist = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(((1.0 + cos) / 2.0, 1.0 / (1.0 + dist)))
}

pub fn semantic_similarity(a: &str, b: &str, embedder: &dyn Embedder) -> Result<(f64, f64), VariabilityError> {
    if word_tokens(a).is_empty() || word_tokens(b).is_empty() {
        return Err(VariabilityError::EmptyText);
    }
    vector_similarity(&embedder.embed(a), &embedder.embed(b))
}

/// Mean pairwise similarity per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub pairs: usize,
    pub lexical: [f64; 3],
    pub syntactic: [f64; 3],
    pub cosine: f64,
    pub euclidean: f64,
    pub average: f64,
}

impl VariabilityReport {
    pub fn axes(&self) -> [f64; 8] {
        let [l1, l2, l3] = self.lexical;
        let [s1, s2, s3] = self.syntactic;
        [l1, l2, l3, s1, s2, s3, self.cosine, self.euclidean]
    }

    fn from_axes(pairs: usize, a: [f64; 8]) -> Self {
        VariabilityReport {
            pairs,
            lexical: [a[0], a[1], a[2]],
            syntactic: [a[3], a[4], a[5]],
            cosine: a[6],
            euclidean: a[7],
            average: a.iter().sum::<f64>() / 8.0,
        }
    }
}

pub struct VariabilityConfig<'a> {
    pub tagger: &'a dyn Tagger,
    pub embedder: &'a dyn Embedder,
}

impl Default for VariabilityConfig<'static> {
    fn default() -> Self {
        static TAGGER: RuleTagger = RuleTagger;
        static EMBEDDER: HashedBowEmbedder = HashedBowEmbedder { dim: 256 };
        VariabilityConfig {
            tagger: &TAGGER,
            embedder: &EMBEDDER,
        }
    }
}

struct Prepared {
    words: [BTreeMap<Vec<String>, usize>; 3],
    tags: [BTreeMap<Vec<String>, usize>; 3],
    embedding: Vec<f64>,
}

fn prepare(text: &str, cfg: &VariabilityConfig) -> Result<Prepared, VariabilityError> {
    let words = word_tokens(text);
    if words.is_empty() {
        return Err(VariabilityError::EmptyText);
    }
    let tags = tag_sequence(cfg.tagger, text)?;
    Ok(Prepared {
        words: [1, 2, 3].map(|n| ngram_counts(&words, n)),
        tags: [1, 2, 3].map(|n| ngram_counts(&tags, n)),
        embedding: cfg.embedder.embed(text),
    })
}

fn pair_axes(a: &Prepared, b: &Prepared) -> Result<[f64; 8], VariabilityError> {
    let (cos, euc) = vector_similarity(&a.embedding, &b.embedding)?;
    Ok([
        multiset_jaccard(&a.words[0], &b.words[0]),
        multiset_jaccard(&a.words[1], &b.words[1]),
        multiset_jaccard(&a.words[2], &b.words[2]),
        multiset_jaccard(&a.tags[0], &b.tags[0]),
        multiset_jaccard(&a.tags[1], &b.tags[1]),
        multiset_jaccard(&a.tags[2], &b.tags[2]),
        cos,
        euc,
    ])
}

/// Mean over all k(k−1)/2 unordered pairs on each axis. Per-axis values are
/// summed in sorted order, so the result does not depend on input order.
pub fn pairwise_variability<S: AsRef<str> + Sync>(
    texts: &[S],
    cfg: &VariabilityConfig,
) -> Result<VariabilityReport, VariabilityError> {
    if texts.len() < 2 {
        return Err(VariabilityError::TooFewExplanations(texts.len()));
    }
    let prepared: Vec<Prepared> = texts
        .iter()
        .map(|t| prepare(t.as_ref(), cfg))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(usize, usize)> = (0..texts.len())
        .flat_map(|i| (i + 1..texts.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<[f64; 8]> = pairs
        .par_iter()
        .map(|&(i, j)| pair_axes(&prepared[i], &prepared[j]))
        .collect::<Result<_, _>>()?;
    let mut means = [0.0; 8];
    for (axis, mean) in means.iter_mut().enumerate() {
        let mut col: Vec<f64> = values.iter().map(|v| v[axis]).collect();
        col.sort_by(f64::total_cmp);
        *mean = col.iter().sum::<f64>() / col.len() as f64;
    }
    Ok(VariabilityReport::from_axes(pairs.len(), means))
}

/// Unweighted mean of several reports; `pairs` becomes the total.
pub fn mean_report(reports: &[VariabilityReport]) -> Option<VariabilityReport> {
    if reports.is_empty() {
        return None;
    }
    let mut acc = [0.0; 8];
    for r in reports {
        for (a, v) in acc.iter_mut().zip(r.axes()) {
            *a += v;
        }
    }
    let n = reports.len() as f64;
    Some(VariabilityReport::from_axes(
        reports.iter().map(|r| r.pairs).sum(),
        acc.map(|a| a / n),
    ))
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "Lexical n=1",
    "Lexical n=2",
    "Lexical n=3",
    "Syntactic n=1",
    "Syntactic n=2",
    "Syntactic n=3",
    "Semantic Cos.",
    "Semantic Euc.",
    "AVG",
];

/// One row per named report.
pub fn report_tsv(rows: &[(String, VariabilityReport)]) -> String {
    let mut out = format!("name\tpairs\t{}\n", REPORT_COLUMNS.join("\t"));
    for (name, r) in rows {
        let cells: Vec<String> = r
            .axes()
            .iter()
            .chain([r.average].iter())
            .map(|v| format!("{v:.6}"))
            .collect();
        out.push_str(&format!("{name}\t{}\t{}\n", r.pairs, cells.join("\t")));
    }
    out
}
