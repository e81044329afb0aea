//! Rule-based extraction of ordered causal events from maintenance text.
//!
//! The pipeline is `phi(iota(gamma(alpha, beta)), mu)`. Every stage is a
//! pure function of the document and the rule tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Tag assigned to words missing from the tag lexicon.
pub const OTHER_TAG: &str = "OTHER";

pub const BOUNDARY_TOKENS: [&str; 3] = [".", ";", "-"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    /// 1-based position in the document.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<Token>,
}

impl Document {
    /// Lower-cases and tokenises on whitespace. Punctuation becomes its own
    /// token; a hyphen joining two word characters stays inside the word.
    pub fn parse(doc_id: &str, text: &str) -> Document {
        let mut words: Vec<String> = Vec::new();
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let is_joiner = c == '-'
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if c.is_whitespace() {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
            } else if !is_joiner && ".;,-:!?()".contains(c) {
                if !cur.is_empty() {
                    words.push(std::mem::take(&mut cur));
                }
                words.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            words.push(cur);
        }
        Document::from_words(doc_id, words)
    }

    pub fn from_words<S: Into<String>>(doc_id: &str, words: impl IntoIterator<Item = S>) -> Document {
        Document {
            doc_id: doc_id.to_string(),
            tokens: words
                .into_iter()
                .enumerate()
                .map(|(i, w)| Token { word: w.into(), index: i + 1 })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.tokens[index - 1].word
    }

    pub fn words(&self, span: Span) -> Vec<&str> {
        (span.start..=span.end).map(|i| self.word(i)).collect()
    }
}

/// Inclusive 1-based token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn indices(&self) -> BTreeSet<usize> {
        (self.start..=self.end).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRule {
    pub pattern: Vec<String>,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GrammarRules {
    #[serde(default)]
    pub tag_lexicon: BTreeMap<String, String>,
    #[serde(default)]
    pub chunk_rules: Vec<ChunkRule>,
}

impl GrammarRules {
    pub fn tag(&self, word: &str) -> &str {
        self.tag_lexicon.get(word).map(|s| s.as_str()).unwrap_or(OTHER_TAG)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotOrder {
    CauseFirst,
    EffectFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalPattern {
    pub connective: String,
    pub slot_order: SlotOrder,
    #[serde(default = "default_relation")]
    pub relation: String,
}

fn default_relation() -> String {
    "cause".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShallowCausalPatterns {
    #[serde(default)]
    pub patterns: Vec<CausalPattern>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AbstractionLexicons {
    #[serde(default)]
    pub noun_map: BTreeMap<String, String>,
    #[serde(default)]
    pub verb_map: BTreeMap<String, String>,
    #[serde(default)]
    pub stopwords: BTreeSet<String>,
}

impl AbstractionLexicons {
    /// Abstract token for a word, or None for a stopword.
    pub fn abstract_word(&self, w: &str) -> Option<String> {
        if self.stopwords.contains(w) {
            return None;
        }
        Some(
            self.noun_map
                .get(w)
                .or_else(|| self.verb_map.get(w))
                .cloned()
                .unwrap_or_else(|| w.to_string()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalDirection {
    /// `A c B` places A before B.
    Forward,
    /// `A c B` places B before A.
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalRules {
    #[serde(default)]
    pub connectives: BTreeMap<String, TemporalDirection>,
}

impl Default for TemporalRules {
    fn default() -> Self {
        TemporalRules {
            connectives: [
                ("then".to_string(), TemporalDirection::Forward),
                ("before".to_string(), TemporalDirection::Forward),
                ("after".to_string(), TemporalDirection::Reverse),
            ]
            .into_iter()
            .collect(),
        }
    }
}

/// All rule tables used by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Omega {
    #[serde(default)]
    pub grammar: GrammarRules,
    #[serde(default)]
    pub patterns: ShallowCausalPatterns,
    #[serde(default)]
    pub lexicons: AbstractionLexicons,
    #[serde(default)]
    pub temporal: TemporalRules,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Phrase {
    pub span: Span,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MentionPair {
    pub cause: Span,
    pub effect: Span,
    pub relation: String,
}

/// Events as token sequences plus a strict partial order given by pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OrderedEvents {
    pub events: Vec<Vec<String>>,
    pub order: BTreeSet<(usize, usize)>,
}

impl OrderedEvents {
    pub fn index_of(&self, tokens: &[String]) -> Option<usize> {
        self.events.iter().position(|e| e.as_slice() == tokens)
    }

    /// True iff `to` is reachable from `from` through the order.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen.insert(v) {
                stack.extend(self.order.iter().filter(|(a, _)| *a == v).map(|(_, b)| *b));
            }
        }
        false
    }

    pub fn is_acyclic(&self) -> bool {
        self.order.iter().all(|&(a, b)| a != b && !self.reaches(b, a))
    }

    /// Adds an event if new and returns its index.
    pub fn intern(&mut self, tokens: Vec<String>) -> usize {
        match self.index_of(&tokens) {
            Some(i) => i,
            None => {
                self.events.push(tokens);
                self.events.len() - 1
            }
        }
    }

    /// Adds `a < b` unless it would close a cycle. Returns whether the pair is now present.
    pub fn try_order(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.reaches(b, a) {
            return false;
        }
        self.order.insert((a, b));
        true
    }

    /// Events joined with spaces, for use as lookup keys.
    pub fn event_key(&self, i: usize) -> String {
        self.events[i].join(" ")
    }
}

fn sentence_ranges(doc: &Document) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 1;
    for t in &doc.tokens {
        if BOUNDARY_TOKENS.contains(&t.word.as_str()) {
            if t.index > start {
                out.push((start, t.index - 1));
            }
            start = t.index + 1;
        }
    }
    if start <= doc.len() {
        out.push((start, doc.len()));
    }
    out
}

/// Chunks tagged tokens into phrases: at each position the first rule whose
/// tag pattern matches wins, and scanning resumes after the match.
pub fn alpha(doc: &Document, rules: &GrammarRules) -> Vec<Phrase> {
    let tags: Vec<&str> = doc.tokens.iter().map(|t| rules.tag(&t.word)).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        let hit = rules.chunk_rules.iter().find(|r| {
            !r.pattern.is_empty()
                && i + r.pattern.len() <= tags.len()
                && r.pattern.iter().zip(&tags[i..]).all(|(p, t)| p == t)
        });
        match hit {
            Some(r) => {
                out.push(Phrase { span: Span::new(i + 1, i + r.pattern.len()), kind: r.phrase.clone() });
                i += r.pattern.len();
            }
            None => i += 1,
        }
    }
    out
}

struct Occurrence {
    start: usize,
    end: usize,
    patterns: Vec<usize>,
}

fn connective_words(c: &str) -> Vec<&str> {
    c.split_whitespace().collect()
}

/// Non-overlapping connective occurrences in a token range, longest match first.
fn occurrences(doc: &Document, range: (usize, usize), patterns: &ShallowCausalPatterns) -> Vec<Occurrence> {
    let mut out: Vec<Occurrence> = Vec::new();
    let mut i = range.0;
    while i <= range.1 {
        let mut best: Option<(usize, Vec<usize>)> = None;
        for (k, p) in patterns.patterns.iter().enumerate() {
            let words = connective_words(&p.connective);
            if words.is_empty() || i + words.len() - 1 > range.1 {
                continue;
            }
            if words.iter().enumerate().all(|(j, w)| doc.word(i + j) == *w) {
                match &mut best {
                    Some((len, ks)) if *len == words.len() => ks.push(k),
                    Some((len, _)) if *len > words.len() => {}
                    _ => best = Some((words.len(), vec![k])),
                }
            }
        }
        match best {
            Some((len, ks)) => {
                out.push(Occurrence { start: i, end: i + len - 1, patterns: ks });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Extracts (cause, effect) span pairs around connectives. Each side is the
/// maximal run up to the sentence edge or the neighbouring connective.
pub fn beta(doc: &Document, patterns: &ShallowCausalPatterns) -> Vec<MentionPair> {
    let mut out = Vec::new();
    for range in sentence_ranges(doc) {
        let occ = occurrences(doc, range, patterns);
        for (k, o) in occ.iter().enumerate() {
            let left_start = if k == 0 { range.0 } else { occ[k - 1].end + 1 };
            let right_end = if k + 1 < occ.len() { occ[k + 1].start - 1 } else { range.1 };
            if o.start <= left_start || o.end >= right_end {
                continue;
            }
            let left = Span::new(left_start, o.start - 1);
            let right = Span::new(o.end + 1, right_end);
            for &pi in &o.patterns {
                let p = &patterns.patterns[pi];
                let (cause, effect) = match p.slot_order {
                    SlotOrder::CauseFirst => (left, right),
                    SlotOrder::EffectFirst => (right, left),
                };
                out.push(MentionPair { cause, effect, relation: p.relation.clone() });
            }
        }
    }
    out
}

/// Refines mention pairs to phrase pairs. A side that contains phrases is
/// replaced by each of them; a side containing none is kept whole.
pub fn gamma(phrases: &[Phrase], mentions: &[MentionPair]) -> Vec<(Span, Span)> {
    let inside = |s: &Span| -> Vec<Span> {
        let v: Vec<Span> = phrases.iter().filter(|p| s.contains(&p.span)).map(|p| p.span).collect();
        if v.is_empty() {
            vec![*s]
        } else {
            v
        }
    };
    let mut out = Vec::new();
    for m in mentions {
        for c in inside(&m.cause) {
            for e in inside(&m.effect) {
                out.push((c, e));
            }
        }
    }
    out
}

fn abstract_span(doc: &Document, span: Span, lex: &AbstractionLexicons) -> Vec<String> {
    doc.words(span).into_iter().filter_map(|w| lex.abstract_word(w)).collect()
}

/// Abstracts phrase pairs into events ordered cause before effect.
pub fn iota(doc: &Document, pairs: &[(Span, Span)], lex: &AbstractionLexicons) -> OrderedEvents {
    let mut out = OrderedEvents::default();
    for &(c, e) in pairs {
        let ct = abstract_span(doc, c, lex);
        let et = abstract_span(doc, e, lex);
        if ct.is_empty() || et.is_empty() {
            continue;
        }
        let ci = out.intern(ct);
        let ei = out.intern(et);
        out.try_order(ci, ei);
    }
    out
}

/// Verb events in textual order, with temporal connectives overriding the
/// direction between neighbouring events.
pub fn mu(doc: &Document, rules: &GrammarRules, lex: &AbstractionLexicons, temporal: &TemporalRules, patterns: &ShallowCausalPatterns) -> OrderedEvents {
    let connective: BTreeSet<&str> = patterns
        .patterns
        .iter()
        .flat_map(|p| connective_words(&p.connective))
        .chain(temporal.connectives.keys().map(|s| s.as_str()))
        .collect();
    // (token index, abstract verb)
    let mut occ: Vec<(usize, String)> = Vec::new();
    for t in &doc.tokens {
        let w = t.word.as_str();
        if connective.contains(w) || lex.stopwords.contains(w) {
            continue;
        }
        if rules.tag(w) == "VERB" || lex.verb_map.contains_key(w) {
            occ.push((t.index, lex.verb_map.get(w).cloned().unwrap_or_else(|| w.to_string())));
        }
    }
    let mut out = OrderedEvents::default();
    let ids: Vec<usize> = occ.iter().map(|(_, v)| out.intern(vec![v.clone()])).collect();
    for k in 1..occ.len() {
        let (a, b) = (ids[k - 1], ids[k]);
        let between = (occ[k - 1].0 + 1)..occ[k].0;
        let mut dir = TemporalDirection::Forward;
        for i in between {
            if let Some(d) = temporal.connectives.get(doc.word(i)) {
                dir = *d;
            }
        }
        match dir {
            TemporalDirection::Forward => out.try_order(a, b),
            TemporalDirection::Reverse => out.try_order(b, a),
        };
    }
    out
}

/// Merges the temporal order into the causal one. Pairs already implied are
/// skipped, contradictions dropped, and consistent new pairs appended.
pub fn phi(k: &OrderedEvents, xi: &OrderedEvents) -> OrderedEvents {
    let mut out = k.clone();
    let locate = |out: &OrderedEvents, tokens: &[String]| -> Option<usize> {
        out.index_of(tokens).or_else(|| {
            if tokens.len() == 1 {
                out.events.iter().position(|e| e.contains(&tokens[0]))
            } else {
                None
            }
        })
    };
    for &(a, b) in &xi.order {
        let ta = &xi.events[a];
        let tb = &xi.events[b];
        let ia = locate(&out, ta);
        let ib = locate(&out, tb);
        if let (Some(x), Some(y)) = (ia, ib) {
            if x == y || out.reaches(x, y) || out.reaches(y, x) {
                continue;
            }
        }
        let x = ia.unwrap_or_else(|| out.intern(ta.clone()));
        let y = ib.unwrap_or_else(|| out.intern(tb.clone()));
        out.try_order(x, y);
    }
    out
}

/// The composed map from a document to ordered core events.
pub fn sigma(doc: &Document, omega: &Omega) -> OrderedEvents {
    let phrases = alpha(doc, &omega.grammar);
    let mentions = beta(doc, &omega.patterns);
    let pairs = gamma(&phrases, &mentions);
    let k = iota(doc, &pairs, &omega.lexicons);
    let xi = mu(doc, &omega.grammar, &omega.lexicons, &omega.temporal, &omega.patterns);
    phi(&k, &xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noun_rules() -> GrammarRules {
        GrammarRules {
            tag_lexicon: [("seal", "NOUN"), ("deterioration", "NOUN"), ("oil", "NOUN"), ("leak", "NOUN"), ("caused", "VERB")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            chunk_rules: vec![ChunkRule { pattern: vec!["NOUN".into(), "NOUN".into()], phrase: "NP".into() }],
        }
    }

    fn caused() -> ShallowCausalPatterns {
        ShallowCausalPatterns {
            patterns: vec![CausalPattern { connective: "caused".into(), slot_order: SlotOrder::CauseFirst, relation: "cause".into() }],
        }
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        let d = Document::parse("d", "Oil leak - topping up; worn-out seal.");
        let w: Vec<&str> = d.tokens.iter().map(|t| t.word.as_str()).collect();
        assert_eq!(w, vec!["oil", "leak", "-", "topping", "up", ";", "worn-out", "seal", "."]);
        assert_eq!(d.tokens.last().unwrap().index, 9);
    }

    #[test]
    fn alpha_noun_chunks() {
        let d = Document::parse("d", "seal deterioration caused oil leak");
        let p = alpha(&d, &noun_rules());
        let spans: Vec<Span> = p.iter().map(|p| p.span).collect();
        assert_eq!(spans, vec![Span::new(1, 2), Span::new(4, 5)]);
        assert!(alpha(&Document::parse("d", ""), &noun_rules()).is_empty());
    }

    #[test]
    fn beta_motivating_sentence() {
        let d = Document::parse("d", "the seal deterioration caused oil leak in the conservator");
        let b = beta(&d, &caused());
        assert_eq!(b.len(), 1);
        assert_eq!(d.words(b[0].cause), vec!["the", "seal", "deterioration"]);
        assert_eq!(d.words(b[0].effect), vec!["oil", "leak", "in", "the", "conservator"]);
        assert!(beta(&Document::parse("d", "oil leak found"), &caused()).is_empty());
    }

    #[test]
    fn beta_effect_first_and_multiple_patterns() {
        let pats = ShallowCausalPatterns {
            patterns: vec![
                CausalPattern { connective: "due to".into(), slot_order: SlotOrder::EffectFirst, relation: "cause".into() },
                CausalPattern { connective: "caused".into(), slot_order: SlotOrder::CauseFirst, relation: "cause".into() },
            ],
        };
        let d = Document::parse("d", "trip due to leak caused by wear");
        let b = beta(&d, &pats);
        assert_eq!(b.len(), 2);
        assert_eq!(d.words(b[0].cause), vec!["leak"]);
        assert_eq!(d.words(b[0].effect), vec!["trip"]);
        assert_eq!(d.words(b[1].cause), vec!["leak"]);
        assert_eq!(d.words(b[1].effect), vec!["by", "wear"]);
    }

    #[test]
    fn beta_stays_within_sentences() {
        let d = Document::parse("d", "leak . caused trip");
        assert!(beta(&d, &caused()).is_empty());
    }

    #[test]
    fn gamma_splits_contained_phrases() {
        let phrases = vec![
            Phrase { span: Span::new(1, 2), kind: "NP".into() },
            Phrase { span: Span::new(4, 5), kind: "NP".into() },
        ];
        let m = vec![MentionPair { cause: Span::new(1, 5), effect: Span::new(7, 8), relation: "cause".into() }];
        let g = gamma(&phrases, &m);
        assert_eq!(g, vec![(Span::new(1, 2), Span::new(7, 8)), (Span::new(4, 5), Span::new(7, 8))]);
        let m = vec![MentionPair { cause: Span::new(6, 6), effect: Span::new(7, 8), relation: "cause".into() }];
        assert_eq!(gamma(&phrases, &m), vec![(Span::new(6, 6), Span::new(7, 8))]);
        assert!(gamma(&phrases, &[]).is_empty());
    }

    #[test]
    fn iota_lexicon() {
        let d = Document::parse("d", "seal deterioration caused oil leak");
        let lex = AbstractionLexicons {
            noun_map: [("deterioration".to_string(), "decay".to_string())].into_iter().collect(),
            ..Default::default()
        };
        let e = iota(&d, &[(Span::new(1, 2), Span::new(4, 5))], &lex);
        assert_eq!(e.events, vec![vec!["seal".to_string(), "decay".into()], vec!["oil".into(), "leak".into()]]);
        assert!(e.order.contains(&(0, 1)));
        let e = iota(&d, &[(Span::new(1, 2), Span::new(4, 5))], &AbstractionLexicons::default());
        assert_eq!(e.events[0], vec!["seal".to_string(), "deterioration".into()]);
    }

    fn verbs() -> AbstractionLexicons {
        AbstractionLexicons {
            verb_map: [("leak", "leak"), ("trip", "trip")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn mu_temporal_rules() {
        let g = GrammarRules::default();
        let t = TemporalRules::default();
        let p = ShallowCausalPatterns::default();
        let e = mu(&Document::parse("d", "leak then trip"), &g, &verbs(), &t, &p);
        assert_eq!(e.events, vec![vec!["leak".to_string()], vec!["trip".to_string()]]);
        assert_eq!(e.order, [(0, 1)].into_iter().collect());
        let e = mu(&Document::parse("d", "trip after leak"), &g, &verbs(), &t, &p);
        let leak = e.index_of(&["leak".to_string()]).unwrap();
        let trip = e.index_of(&["trip".to_string()]).unwrap();
        assert_eq!(e.order, [(leak, trip)].into_iter().collect());
        let e = mu(&Document::parse("d", "trip"), &g, &verbs(), &t, &p);
        assert_eq!(e.events.len(), 1);
        assert!(e.order.is_empty());
    }

    fn ev(events: &[&[&str]], order: &[(usize, usize)]) -> OrderedEvents {
        OrderedEvents {
            events: events.iter().map(|e| e.iter().map(|s| s.to_string()).collect()).collect(),
            order: order.iter().copied().collect(),
        }
    }

    #[test]
    fn phi_rules() {
        let k = ev(&[&["a"], &["b"], &["c"]], &[(0, 1), (1, 2)]);
        let implied = ev(&[&["a"], &["c"]], &[(0, 1)]);
        assert_eq!(phi(&k, &implied), k);
        let reversed = ev(&[&["b"], &["a"]], &[(0, 1)]);
        assert_eq!(phi(&k, &reversed), k);
        let new = ev(&[&["c"], &["d"]], &[(0, 1)]);
        let out = phi(&k, &new);
        assert_eq!(out.events.len(), 4);
        assert!(out.order.contains(&(2, 3)));
        assert_eq!(phi(&out, &new), out);
    }
}
