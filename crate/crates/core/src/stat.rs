//! Token classifier: binary handcrafted features, logistic regression
//! trained by full-batch gradient descent, and a run-merging step that turns
//! token decisions into spans.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{spans_to_bio, AnnotatedSentence, SpanAnnotation, DEFAULT_LABEL};
use crate::error::{Error, Result};
use crate::text::{casefold, Sentence, TokenRange};

/// The feature registry, in model-file order. Version 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    HasKOrW,
    HasNonSpanishCharSequence,
    EndsInInvalidSpanishCoda,
    InEnglishLexicon,
    InSpanishLexicon,
    InBothLexicons,
    EnglishBigramScoreHigh,
    IsCapitalizedMidSentence,
    AllCapsToken,
    QuoteAdjacent,
    SentenceInitial,
    PrevTokenInEnglishLexicon,
    NextTokenInEnglishLexicon,
    StemInSpanish,
    StemInEnglish,
    PosTagSlot,
}

pub const FEATURE_COUNT: usize = 16;

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::HasKOrW,
        Feature::HasNonSpanishCharSequence,
        Feature::EndsInInvalidSpanishCoda,
        Feature::InEnglishLexicon,
        Feature::InSpanishLexicon,
        Feature::InBothLexicons,
        Feature::EnglishBigramScoreHigh,
        Feature::IsCapitalizedMidSentence,
        Feature::AllCapsToken,
        Feature::QuoteAdjacent,
        Feature::SentenceInitial,
        Feature::PrevTokenInEnglishLexicon,
        Feature::NextTokenInEnglishLexicon,
        Feature::StemInSpanish,
        Feature::StemInEnglish,
        Feature::PosTagSlot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::HasKOrW => "has_k_or_w",
            Feature::HasNonSpanishCharSequence => "has_non_spanish_char_sequence",
            Feature::EndsInInvalidSpanishCoda => "ends_in_invalid_spanish_coda",
            Feature::InEnglishLexicon => "in_english_lexicon",
            Feature::InSpanishLexicon => "in_spanish_lexicon",
            Feature::InBothLexicons => "in_both_lexicons",
            Feature::EnglishBigramScoreHigh => "english_bigram_score_high",
            Feature::IsCapitalizedMidSentence => "is_capitalized_mid_sentence",
            Feature::AllCapsToken => "all_caps_token",
            Feature::QuoteAdjacent => "quote_adjacent",
            Feature::SentenceInitial => "sentence_initial",
            Feature::PrevTokenInEnglishLexicon => "prev_token_in_english_lexicon",
            Feature::NextTokenInEnglishLexicon => "next_token_in_english_lexicon",
            Feature::StemInSpanish => "stem_in_spanish",
            Feature::StemInEnglish => "stem_in_english",
            Feature::PosTagSlot => "pos_tag_slot",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FeatureVector([bool; FEATURE_COUNT]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> bool {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Feature, on: bool) {
        self.0[f.index()] = on;
    }

    /// Active features, in registry order.
    pub fn active(&self) -> impl Iterator<Item = Feature> + '_ {
        Feature::ALL.into_iter().filter(|f| self.get(*f))
    }

    /// Copy with the given features forced to 0, for ablations.
    pub fn without(&self, disabled: &[Feature]) -> FeatureVector {
        let mut v = *self;
        for &f in disabled {
            v.set(f, false);
        }
        v
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicons {
    pub spanish: HashSet<String>,
    pub english: HashSet<String>,
}

fn read_wordlist<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut words = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let w = line.trim().trim_start_matches('\u{feff}');
        if !w.is_empty() {
            words.insert(casefold(w));
        }
    }
    Ok(words)
}

impl Lexicons {
    pub fn from_words<'a>(
        spanish: impl IntoIterator<Item = &'a str>,
        english: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Lexicons {
            spanish: spanish.into_iter().map(casefold).collect(),
            english: english.into_iter().map(casefold).collect(),
        }
    }

    /// One word per line, casefolded on load.
    pub fn load<S: BufRead, E: BufRead>(spanish: S, english: E) -> Result<Self> {
        Ok(Lexicons {
            spanish: read_wordlist(spanish)?,
            english: read_wordlist(english)?,
        })
    }

    fn is_english(&self, w: &str) -> bool {
        self.english.contains(w)
    }

    fn is_spanish(&self, w: &str) -> bool {
        self.spanish.contains(w)
    }
}

/// Source for the part-of-speech feature. No tagger ships with the crate;
/// [`NoPos`] keeps the slot at 0.
pub trait PosSlot: Send + Sync {
    fn value(&self, sentence: &Sentence, index: usize) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoPos;

impl PosSlot for NoPos {
    fn value(&self, _: &Sentence, _: usize) -> bool {
        false
    }
}

const SPANISH_CODA: [char; 12] = ['a', 'e', 'i', 'o', 'u', 'n', 's', 'r', 'l', 'd', 'z', 'y'];
const ENGLISH_BIGRAMS: [&str; 7] = ["wh", "gh", "sh", "ck", "oo", "ee", "ng"];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];

fn strip_accent(c: char) -> char {
    match c {
        'á' | 'à' => 'a',
        'é' | 'è' => 'e',
        'í' | 'ì' => 'i',
        'ó' | 'ò' => 'o',
        'ú' | 'ù' | 'ü' => 'u',
        other => other,
    }
}

fn non_spanish_sequence(w: &str) -> bool {
    if w.contains("sh")
        || w.contains("oo")
        || w.contains("ee")
        || w.ends_with("ing")
        || w.ends_with("ck")
    {
        return true;
    }
    let mut rev = w.chars().rev();
    matches!(
        (rev.next(), rev.next()),
        (Some('y'), Some(c)) if c.is_alphabetic() && !VOWELS.contains(&strip_accent(c))
    )
}

fn invalid_coda(w: &str) -> bool {
    match w.chars().last() {
        Some(c) if c.is_alphabetic() => !SPANISH_CODA.contains(&strip_accent(c)),
        _ => false,
    }
}

fn stem_in(w: &str, suffixes: &[&str], lexicon: &HashSet<String>) -> bool {
    suffixes.iter().any(|suf| {
        w.strip_suffix(suf)
            .is_some_and(|stem| !stem.is_empty() && lexicon.contains(stem))
    })
}

pub fn extract_features(sentence: &Sentence, index: usize, lex: &Lexicons) -> FeatureVector {
    extract_features_with(sentence, index, lex, &NoPos)
}

pub fn extract_features_with(
    sentence: &Sentence,
    index: usize,
    lex: &Lexicons,
    pos: &dyn PosSlot,
) -> FeatureVector {
    use Feature::*;
    let tokens = sentence.tokens();
    let folded = sentence.folded_tokens();
    let surface = tokens[index].surface.as_str();
    let w = folded[index].as_str();
    let mut v = FeatureVector::default();

    let initial = tokens[..index].iter().all(|t| t.is_punctuation());
    let has_letter = surface.chars().any(char::is_alphabetic);
    let prev = tokens[..index]
        .iter()
        .rev()
        .find(|t| !t.is_quote())
        .map(|t| t.index);
    let next = tokens[index + 1..]
        .iter()
        .find(|t| !t.is_quote())
        .map(|t| t.index);
    let english_at = |i: Option<usize>| i.is_some_and(|i| lex.is_english(&folded[i]));

    v.set(HasKOrW, w.contains(['k', 'w']));
    v.set(HasNonSpanishCharSequence, non_spanish_sequence(w));
    v.set(EndsInInvalidSpanishCoda, invalid_coda(w));
    v.set(InEnglishLexicon, lex.is_english(w));
    v.set(InSpanishLexicon, lex.is_spanish(w));
    v.set(InBothLexicons, lex.is_english(w) && lex.is_spanish(w));
    v.set(
        EnglishBigramScoreHigh,
        ENGLISH_BIGRAMS.iter().any(|b| w.contains(b)),
    );
    v.set(
        IsCapitalizedMidSentence,
        !initial && surface.chars().next().is_some_and(char::is_uppercase),
    );
    v.set(
        AllCapsToken,
        has_letter && !surface.chars().any(char::is_lowercase),
    );
    v.set(
        QuoteAdjacent,
        (index > 0 && tokens[index - 1].is_quote())
            || tokens.get(index + 1).is_some_and(|t| t.is_quote()),
    );
    v.set(SentenceInitial, initial);
    v.set(PrevTokenInEnglishLexicon, english_at(prev));
    v.set(NextTokenInEnglishLexicon, english_at(next));
    v.set(StemInSpanish, stem_in(w, &["es", "s"], &lex.spanish));
    v.set(StemInEnglish, stem_in(w, &["s"], &lex.english));
    v.set(PosTagSlot, pos.value(sentence, index));
    v
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Dense binary-classification objective used by training.
///
/// `loss = mean(cross_entropy) + l2/2 * |w|^2`; the bias is not penalized.
pub mod objective {
    use super::{sigmoid, softplus};

    fn margin(w: &[f64], b: f64, x: &[f64]) -> f64 {
        w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b
    }

    pub fn loss(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> f64 {
        let n = xs.len() as f64;
        let data: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let z = margin(w, b, x);
                y * softplus(-z) + (1.0 - y) * softplus(z)
            })
            .sum();
        data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Returns (d loss / d w, d loss / d b).
    pub fn gradient(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> (Vec<f64>, f64) {
        let n = xs.len() as f64;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let err = sigmoid(margin(w, b, x)) - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
            gb += err;
        }
        for (g, wi) in gw.iter_mut().zip(w) {
            *g = *g / n + l2 * wi;
        }
        (gw, gb / n)
    }

    /// Largest step for which gradient descent cannot increase the loss.
    ///
    /// The objective is L-smooth with `L = max_i (|x_i|^2 + 1) / 4 + l2`
    /// (the +1 accounts for the bias), and any step `<= 1/L` is a descent
    /// step.
    pub fn stable_learning_rate(xs: &[Vec<f64>], l2: f64) -> f64 {
        let max_sq = xs
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
            .fold(1.0, f64::max);
        1.0 / (max_sq / 4.0 + l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    threshold: f64,
}

impl Default for Model {
    fn default() -> Self {
        Model {
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
            threshold: 0.5,
        }
    }
}

impl Model {
    pub fn weight(&self, f: Feature) -> f64 {
        self.weights[f.index()]
    }

    pub fn set_weight(&mut self, f: Feature, w: f64) {
        self.weights[f.index()] = w;
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, t: f64) -> Result<()> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidModel(format!("threshold {t} outside (0, 1)")));
        }
        self.threshold = t;
        Ok(())
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        let z: f64 = x.active().map(|f| self.weight(f)).sum::<f64>() + self.bias;
        sigmoid(z)
    }

    /// Tab-separated `name value` lines; numbers carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# borrowkit logistic model, feature registry v1\n");
        s.push_str(&format!("bias\t{:.16e}\n", self.bias));
        s.push_str(&format!("threshold\t{:.16e}\n", self.threshold));
        for f in Feature::ALL {
            s.push_str(&format!("{}\t{:.16e}\n", f.name(), self.weight(f)));
        }
        s
    }

    /// Parses [`Model::to_text`] output. Features absent from the file get
    /// weight 0; `bias` and `threshold` are required.
    pub fn from_text(text: &str) -> Result<Model> {
        let mut model = Model::default();
        let (mut bias, mut threshold) = (None, None);
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::InvalidModel(format!("line {}: {msg}", n + 1));
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `name<TAB>value`".into()))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("{value:?} is not a number")))?;
            if !value.is_finite() {
                return Err(bad(format!("{key} is not finite")));
            }
            match key.trim() {
                "bias" => bias = Some(value),
                "threshold" => threshold = Some(value),
                name => {
                    let f: Feature = name.parse().map_err(bad)?;
                    model.set_weight(f, value);
                }
            }
        }
        model.bias = bias.ok_or_else(|| Error::InvalidModel("missing bias".into()))?;
        model.set_threshold(
            threshold.ok_or_else(|| Error::InvalidModel("missing threshold".into()))?,
        )?;
        Ok(model)
    }
}

#[derive(Debug, Clone)]
pub struct Training {
    pub model: Model,
    /// Loss before the first epoch followed by the loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent from zero weights. Deterministic.
pub fn train(dataset: &[(FeatureVector, bool)], hyper: &Hyper) -> Result<Training> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives = dataset.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == dataset.len() {
        return Err(Error::DegenerateDataset);
    }
    if hyper.learning_rate.is_nan()
        || hyper.learning_rate <= 0.0
        || hyper.l2.is_nan()
        || hyper.l2 < 0.0
    {
        return Err(Error::InvalidConfig(
            "learning rate must be positive and l2 non-negative".into(),
        ));
    }
    let xs: Vec<Vec<f64>> = dataset.iter().map(|(x, _)| x.to_dense()).collect();
    let ys: Vec<f64> = dataset
        .iter()
        .map(|(_, y)| if *y { 1.0 } else { 0.0 })
        .collect();

    let mut w = vec![0.0; FEATURE_COUNT];
    let mut b = 0.0;
    let mut trace = Vec::with_capacity(hyper.epochs + 1);
    trace.push(objective::loss(&w, b, &xs, &ys, hyper.l2));
    for _ in 0..hyper.epochs {
        let (gw, gb) = objective::gradient(&w, b, &xs, &ys, hyper.l2);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= hyper.learning_rate * g;
        }
        b -= hyper.learning_rate * gb;
        trace.push(objective::loss(&w, b, &xs, &ys, hyper.l2));
    }

    let mut model = Model::default();
    for f in Feature::ALL {
        model.set_weight(f, w[f.index()]);
    }
    model.bias = b;
    Ok(Training {
        model,
        loss_trace: trace,
    })
}

/// One (features, is-borrowing) example per token of every record.
pub fn token_dataset(
    records: &[AnnotatedSentence],
    lex: &Lexicons,
) -> Result<Vec<(FeatureVector, bool)>> {
    let mut data = Vec::new();
    for r in records {
        let tags = spans_to_bio(r)?;
        for (i, (_, tag)) in tags.iter().enumerate() {
            data.push((extract_features(&r.sentence, i, lex), tag != "O"));
        }
    }
    Ok(data)
}

pub fn predict_tokens(model: &Model, sentence: &Sentence, lex: &Lexicons) -> Vec<f64> {
    (0..sentence.tokens().len())
        .map(|i| model.probability(&extract_features(sentence, i, lex)))
        .collect()
}

/// Function words that may sit inside a multiword borrowing.
pub const BRIDGE_WORDS: [&str; 6] = ["de", "of", "and", "the", "’s", "'s"];

/// Turns token probabilities into spans: tokens at or above `threshold`
/// form maximal runs, quote tokens never join a run, and with `bridging`
/// a single function word between two runs joins them.
pub fn merge_multiword(
    sentence: &Sentence,
    probs: &[f64],
    threshold: f64,
    bridging: bool,
) -> Vec<SpanAnnotation> {
    let tokens = sentence.tokens();
    let positive: Vec<bool> = tokens
        .iter()
        .zip(probs)
        .map(|(t, &p)| p >= threshold && !t.is_quote())
        .collect();

    let mut runs: Vec<TokenRange> = Vec::new();
    let mut i = 0;
    while i < positive.len() {
        if !positive[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < positive.len() && positive[i] {
            i += 1;
        }
        let run = TokenRange { start, end: i };
        if let Some(prev) = runs.last_mut() {
            let bridge = bridging
                && prev.end + 1 == start
                && BRIDGE_WORDS.contains(&sentence.folded_tokens()[prev.end].as_str());
            if bridge {
                prev.end = run.end;
                continue;
            }
        }
        runs.push(run);
    }

    runs.into_iter()
        .map(|r| SpanAnnotation {
            surface: sentence.token_text(r).to_string(),
            label: DEFAULT_LABEL.to_string(),
            located: Some(vec![sentence.char_range(r)]),
        })
        .collect()
}

/// A trained model bundled with its lexicons and merging options.
#[derive(Debug, Clone)]
pub struct StatDetector {
    pub model: Model,
    pub lexicons: Lexicons,
    pub bridging: bool,
}

impl StatDetector {
    pub fn detect(&self, sentence: &Sentence) -> Vec<SpanAnnotation> {
        let probs = predict_tokens(&self.model, sentence, &self.lexicons);
        merge_multiword(sentence, &probs, self.model.threshold(), self.bridging)
    }

    pub fn detect_corpus(&self, records: &[AnnotatedSentence]) -> Vec<AnnotatedSentence> {
        records
            .par_iter()
            .map(|r| AnnotatedSentence::new(r.sentence.clone(), self.detect(&r.sentence)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Feature::*;

    fn lex() -> Lexicons {
        Lexicons::from_words(
            ["casa", "red", "el", "de", "libro"],
            ["running", "red", "look", "time"],
        )
    }

    #[test]
    fn running_features() {
        let s = Sentence::new("t", "el running");
        let v = extract_features(&s, 1, &lex());
        assert!(v.get(HasNonSpanishCharSequence));
        assert!(v.get(InEnglishLexicon));
        assert!(v.get(EndsInInvalidSpanishCoda));
        assert!(v.get(EnglishBigramScoreHigh));
        assert!(!v.get(InSpanishLexicon));
        assert!(!v.get(HasKOrW));
        assert!(!v.get(SentenceInitial));
    }

    #[test]
    fn spanish_word_features() {
        let s = Sentence::new("t", "una casa");
        let v = extract_features(&s, 1, &lex());
        assert_eq!(v.active().collect::<Vec<_>>(), [InSpanishLexicon]);
    }

    #[test]
    fn both_lexicons() {
        let s = Sentence::new("t", "la red");
        let v = extract_features(&s, 1, &lex());
        assert!(v.get(InBothLexicons) && v.get(InEnglishLexicon) && v.get(InSpanishLexicon));
    }

    #[test]
    fn context_features() {
        let s = Sentence::new("t", "“Look” de la Casa LIBROS time");
        let l = lex();
        let look = extract_features(&s, 1, &l);
        assert!(look.get(SentenceInitial) && look.get(QuoteAdjacent) && look.get(HasKOrW));
        assert!(!look.get(IsCapitalizedMidSentence));
        assert!(!look.get(NextTokenInEnglishLexicon));
        let de = extract_features(&s, 3, &l);
        assert!(de.get(PrevTokenInEnglishLexicon));
        let casa = extract_features(&s, 5, &l);
        assert!(casa.get(IsCapitalizedMidSentence) && !casa.get(AllCapsToken));
        let libros = extract_features(&s, 6, &l);
        assert!(
            libros.get(AllCapsToken)
                && libros.get(StemInSpanish)
                && libros.get(NextTokenInEnglishLexicon)
        );
        let looks = extract_features(&Sentence::new("t", "dos looks"), 1, &l);
        assert!(looks.get(StemInEnglish));
    }

    #[test]
    fn coda_and_sequences() {
        assert!(!invalid_coda("café"));
        assert!(invalid_coda("hip"));
        assert!(!invalid_coda("3"));
        assert!(non_spanish_sequence("sexy"));
        assert!(!non_spanish_sequence("hoy"));
        assert!(non_spanish_sequence("stock"));
    }

    #[test]
    fn pos_slot_is_pluggable() {
        struct Always;
        impl PosSlot for Always {
            fn value(&self, _: &Sentence, _: usize) -> bool {
                true
            }
        }
        let s = Sentence::new("t", "hola");
        assert!(!extract_features(&s, 0, &lex()).get(PosTagSlot));
        assert!(extract_features_with(&s, 0, &lex(), &Always).get(PosTagSlot));
    }

    #[test]
    fn gradient_at_zero_for_single_positive() {
        let x = vec![1.0, 0.0, 1.0];
        let (gw, gb) = objective::gradient(&[0.0; 3], 0.0, std::slice::from_ref(&x), &[1.0], 0.0);
        for (g, xi) in gw.iter().zip(&x) {
            assert_eq!(*g, -0.5 * xi);
        }
        assert_eq!(gb, -0.5);
    }

    #[test]
    fn identical_features_balanced_labels_give_half() {
        let mut v = FeatureVector::default();
        v.set(HasKOrW, true);
        let data = vec![(v, true), (v, false), (v, true), (v, false)];
        let t = train(&data, &Hyper::default()).unwrap();
        assert!((t.model.probability(&v) - 0.5).abs() < 1e-12);
    }

    fn vec_of(fs: &[Feature]) -> FeatureVector {
        let mut v = FeatureVector::default();
        for &f in fs {
            v.set(f, true);
        }
        v
    }

    /// Eight examples over three features; label = english && !spanish.
    fn toy() -> Vec<(FeatureVector, bool)> {
        let mut out = Vec::new();
        for bits in 0u8..8 {
            let en = bits & 1 != 0;
            let es = bits & 2 != 0;
            let kw = bits & 4 != 0;
            let mut fs = Vec::new();
            if en {
                fs.push(InEnglishLexicon);
            }
            if es {
                fs.push(InSpanishLexicon);
            }
            if kw {
                fs.push(HasKOrW);
            }
            out.push((vec_of(&fs), en && !es));
        }
        out
    }

    #[test]
    fn toy_set_is_separable_by_grid_search() {
        let data = toy();
        let feats = [InEnglishLexicon, InSpanishLexicon, HasKOrW];
        let mut found = false;
        'grid: for a in -2i32..=2 {
            for b in -2i32..=2 {
                for c in -2i32..=2 {
                    for bias in -2i32..=2 {
                        let w = [a, b, c];
                        let ok = data.iter().all(|(x, y)| {
                            let z: i32 = feats
                                .iter()
                                .zip(w)
                                .filter(|(f, _)| x.get(**f))
                                .map(|(_, wi)| wi)
                                .sum::<i32>()
                                + bias;
                            (z > 0) == *y && z != 0
                        });
                        if ok {
                            found = true;
                            break 'grid;
                        }
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn toy_set_trains_to_full_accuracy() {
        let data = toy();
        let t = train(&data, &Hyper::default()).unwrap();
        for (x, y) in &data {
            assert_eq!(t.model.probability(x) >= 0.5, *y, "{x:?}");
        }
        assert!(t.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(t.loss_trace.len(), 501);
    }

    #[test]
    fn training_rejects_degenerate_data() {
        let v = FeatureVector::default();
        assert!(matches!(
            train(&[], &Hyper::default()),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            train(&[(v, true), (v, true)], &Hyper::default()),
            Err(Error::DegenerateDataset)
        ));
    }

    #[test]
    fn zero_model_predicts_half() {
        let s = Sentence::new("t", "el running de la casa");
        assert!(predict_tokens(&Model::default(), &s, &lex())
            .iter()
            .all(|&p| p == 0.5));
    }

    #[test]
    fn raising_active_weight_raises_probability() {
        let s = Sentence::new("t", "el running");
        let l = lex();
        let mut m = Model::default();
        let before = predict_tokens(&m, &s, &l)[1];
        m.set_weight(InEnglishLexicon, 0.7);
        assert!(predict_tokens(&m, &s, &l)[1] > before);
    }

    #[test]
    fn model_text_round_trip() {
        let mut m = Model {
            bias: -1.0 / 3.0,
            ..Model::default()
        };
        m.set_weight(HasKOrW, std::f64::consts::PI);
        m.set_weight(PosTagSlot, -1e-300);
        m.set_threshold(0.25).unwrap();
        let back = Model::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn model_text_errors() {
        assert!(Model::from_text("bias\t0\n").is_err());
        assert!(Model::from_text("bias\t0\nthreshold\t1.5\n").is_err());
        assert!(Model::from_text("bias\t0\nthreshold\t0.5\nbogus\t1\n").is_err());
        assert!(Model::from_text("bias\tNaN\nthreshold\t0.5\n").is_err());
        let m = Model::from_text("bias\t0.5\nthreshold\t0.5\nhas_k_or_w\t2\n").unwrap();
        assert_eq!(m.weight(HasKOrW), 2.0);
        assert_eq!(m.weight(AllCapsToken), 0.0);
    }

    fn merged(text: &str, probs: &[f64], bridging: bool) -> Vec<String> {
        merge_multiword(&Sentence::new("t", text), probs, 0.5, bridging)
            .into_iter()
            .map(|s| s.surface)
            .collect()
    }

    #[test]
    fn merge_runs() {
        assert_eq!(
            merged("el prime time llega", &[0.1, 0.9, 0.9, 0.1], true),
            ["prime time"]
        );
        assert!(merged("nada que ver", &[0.1, 0.2, 0.3], true).is_empty());
    }

    #[test]
    fn merge_bridges_function_words() {
        assert_eq!(
            merged("un state of mind", &[0.1, 0.9, 0.2, 0.9], true),
            ["state of mind"]
        );
        assert_eq!(
            merged("un state of mind", &[0.1, 0.9, 0.2, 0.9], false),
            ["state", "mind"]
        );
        assert_eq!(
            merged("look y hype", &[0.9, 0.1, 0.9], true),
            ["look", "hype"]
        );
    }

    #[test]
    fn merge_keeps_quotes_out() {
        assert_eq!(
            merged(
                "de “Marketing” “Online”",
                &[0.1, 0.9, 0.9, 0.9, 0.9, 0.9],
                true
            ),
            ["Marketing", "Online"]
        );
    }
}
