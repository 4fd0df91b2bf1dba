//! Entity extraction over a Sig: tokenization, lexicon-driven basic
//! entities, and assembly of the compound entities DosagePerAdministration
//! (DA), AdministrationFrequency (AF) and DosageExpression (DE).
//!
//! The extractor works hierarchically: basic entities come from a
//! longest-match lexicon scan plus numeric-token recognition and an
//! hour-frequency pattern ("every 4 hours", "q4h", "q 4-6 hours"); compound
//! entities come from pattern rules over adjacent basics; a DE is a DA
//! followed by a consecutive AF. An external entity extractor can stand in
//! for the rule-based scan through [`extract_with_external`], which accepts
//! labeled spans and recovers basic entities inside them.
//!
//! Daily-cap expressions ("max = 6 tabs/day") and duration phrases
//! ("for 7 days") are recognized up front, excluded from entity scanning,
//! and carried on the result for the dosage rules to use.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::lexicon::{
    normalize_token_text, parse_numeric_token, BasicEntityType, Lexicon, LexiconEntry,
    Normalization,
};
use crate::scalar::{smax, smin, Scalar};

/// Byte-offset span into the Sig. `text` always equals `sig[start..end]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    pub fn new(sig: &str, start: usize, end: usize) -> Self {
        Span {
            start,
            end,
            text: sig[start..end].to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}..{}", self.text, self.start, self.end)
    }
}

/// A token with provenance offsets. `norm` is the lookup form (lowercased,
/// dotted abbreviations folded); the raw text is recoverable from the Sig.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub norm: String,
    pub start: usize,
    pub end: usize,
}

/// Basic entity: a span plus its type and normalization payload.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicEntity<S> {
    pub span: Span,
    pub entity_type: BasicEntityType,
    pub normalization: Normalization<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompoundKind {
    DosagePerAdministration,
    AdministrationFrequency,
    DosageExpression,
}

/// DA or AF: a span plus the basic entities it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundEntity<S> {
    pub kind: CompoundKind,
    pub span: Span,
    pub parts: Vec<BasicEntity<S>>,
}

impl<S> CompoundEntity<S> {
    pub fn part(&self, entity_type: BasicEntityType) -> Option<&BasicEntity<S>> {
        self.parts.iter().find(|p| p.entity_type == entity_type)
    }
}

/// DE: indices into [`ExtractionResult::das`] / [`ExtractionResult::afs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoseExpression {
    pub span: Span,
    pub da: usize,
    pub af: usize,
}

/// Trailing daily-limit expression, e.g. "max = 6 tabs/day".
#[derive(Debug, Clone, PartialEq)]
pub struct DailyCap<S> {
    pub value: S,
    pub unit_word: Option<String>,
    pub span: Span,
}

/// Duration phrase ("for 7 days"); metadata only, never changes the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationNote<S> {
    pub span: Span,
    pub days_min: Option<S>,
    pub days_max: Option<S>,
    /// Nearest DE, when any exist.
    pub de: Option<usize>,
}

/// Everything extracted from one Sig.
#[derive(Debug, Clone)]
pub struct ExtractionResult<S> {
    pub sig: String,
    pub basics: Vec<BasicEntity<S>>,
    pub das: Vec<CompoundEntity<S>>,
    pub afs: Vec<CompoundEntity<S>>,
    pub des: Vec<DoseExpression>,
    pub unpaired_das: Vec<usize>,
    pub unpaired_afs: Vec<usize>,
    pub caps: Vec<DailyCap<S>>,
    pub durations: Vec<DurationNote<S>>,
    /// Extraction-level remarks (ignored external labels, dropped spans...).
    pub notes: Vec<String>,
}

impl<S: Scalar> ExtractionResult<S> {
    /// Check the structural invariants; returns a description of the first
    /// violation. Used by tests and the fuzzing suite.
    pub fn validate(&self) -> Result<(), String> {
        let check_span = |span: &Span| -> Result<(), String> {
            if span.start > span.end || span.end > self.sig.len() {
                return Err(format!("span out of bounds: {span}"));
            }
            if !self.sig.is_char_boundary(span.start) || !self.sig.is_char_boundary(span.end) {
                return Err(format!("span not on char boundary: {span}"));
            }
            if self.sig[span.start..span.end] != span.text {
                return Err(format!("span text mismatch: {span}"));
            }
            Ok(())
        };
        for b in &self.basics {
            check_span(&b.span)?;
        }
        for c in self.das.iter().chain(&self.afs) {
            check_span(&c.span)?;
            for p in &c.parts {
                check_span(&p.span)?;
                if p.span.start < c.span.start || p.span.end > c.span.end {
                    return Err(format!("part {} outside compound {}", p.span, c.span));
                }
            }
        }
        for (ty_a, a) in self.basics.iter().enumerate() {
            for b in self.basics.iter().skip(ty_a + 1) {
                if a.entity_type == b.entity_type
                    && a.span.start < b.span.end
                    && b.span.start < a.span.end
                {
                    return Err(format!("same-type overlap: {} / {}", a.span, b.span));
                }
            }
        }
        for de in &self.des {
            check_span(&de.span)?;
            let da = self.das.get(de.da).ok_or("DE references missing DA")?;
            let af = self.afs.get(de.af).ok_or("DE references missing AF")?;
            if da.span.start < de.span.start || af.span.end > de.span.end {
                return Err(format!("DE {} does not cover its DA/AF", de.span));
            }
        }
        if self.des.len() + self.unpaired_das.len() != self.das.len() {
            return Err("DA pairing counts do not add up".into());
        }
        if self.des.len() + self.unpaired_afs.len() != self.afs.len() {
            return Err("AF pairing counts do not add up".into());
        }
        let mut seen_da = vec![false; self.das.len()];
        let mut seen_af = vec![false; self.afs.len()];
        for de in &self.des {
            if std::mem::replace(&mut seen_da[de.da], true)
                || std::mem::replace(&mut seen_af[de.af], true)
            {
                return Err("DA/AF referenced by more than one DE".into());
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

const PEEL: &[char] = &['.', ',', ';', ':', '!', '?', '\'', '"', '='];

/// Lowercased tokens with exact byte offsets back into the Sig.
///
/// Whitespace splits; leading/trailing punctuation becomes its own token
/// (sentence breaks matter to compound assembly); `-`, `/` and balanced
/// parentheses stay inside a token so "1-2", "1/2" and "one(1)" survive;
/// a digits-then-letters chunk splits in two so "1000mcg" reads as two
/// tokens.
pub fn tokenize(sig: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in sig.char_indices() {
        if c.is_whitespace() {
            if let Some(start) = chunk_start.take() {
                push_chunk(sig, start, i, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(start) = chunk_start {
        push_chunk(sig, start, sig.len(), &mut out);
    }
    out
}

fn push_chunk(sig: &str, mut a: usize, mut b: usize, out: &mut Vec<Token>) {
    let token = |start: usize, end: usize| Token {
        norm: normalize_token_text(&sig[start..end]),
        start,
        end,
    };
    // Leading punctuation peels off as single tokens.
    loop {
        let core = &sig[a..b];
        let Some(c) = core.chars().next() else { return };
        let peel =
            PEEL.contains(&c) || c == ')' || (c == '(' && !core[c.len_utf8()..].contains(')'));
        if !peel {
            break;
        }
        out.push(token(a, a + c.len_utf8()));
        a += c.len_utf8();
    }
    // Trailing punctuation collects, emitted after the core in text order.
    // The final dot of a dotted abbreviation ("p.o.", "b.i.d.") stays inside
    // the token: it is not a sentence break.
    let mut trail: Vec<(usize, usize)> = Vec::new();
    loop {
        let core = &sig[a..b];
        let Some(c) = core.chars().last() else { break };
        let clen = c.len_utf8();
        let body = &core[..core.len() - clen];
        let dotted_abbrev =
            body.contains('.') && body.chars().all(|ch| ch == '.' || ch.is_alphabetic());
        let peel = match c {
            '.' => !dotted_abbrev,
            '(' => true,
            ')' => !body.contains('('),
            _ => PEEL.contains(&c),
        };
        if !peel {
            break;
        }
        trail.push((b - clen, b));
        b -= clen;
    }
    let core = &sig[a..b];
    if !core.is_empty() {
        match number_unit_split(core) {
            Some(at) => {
                out.push(token(a, a + at));
                out.push(token(a + at, b));
            }
            None => out.push(token(a, b)),
        }
    }
    for &(s, e) in trail.iter().rev() {
        out.push(token(s, e));
    }
}

/// Split point for chunks like "1000mcg" / "2.5mg": byte index of the first
/// alphabetic char when the chunk starts with a digit and the letter directly
/// follows a digit.
fn number_unit_split(core: &str) -> Option<usize> {
    let mut chars = core.char_indices();
    let (_, first) = chars.next()?;
    if !first.is_ascii_digit() {
        return None;
    }
    let mut prev = first;
    for (i, c) in chars {
        if c.is_alphabetic() {
            return if prev.is_ascii_digit() { Some(i) } else { None };
        }
        prev = c;
    }
    None
}

// ---------------------------------------------------------------------------
// Special spans: caps, durations, not-meaningful markers
// ---------------------------------------------------------------------------

static CAP_RES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    vec![
        Regex::new(
            r"(?i)\(?\s*max(?:imum)?\s*(?:=|:|of)?\s*(\d+(?:\.\d+)?)\s*([a-z]+)?\s*(?:/|per\s+)(?:day|24\s*h(?:ou)?rs?)\s*\)?",
        )
        .unwrap(),
        Regex::new(
            r"(?i)\b(?:do not|not to)\s+exceed\s+(\d+(?:\.\d+)?)\s*([a-z]+)?\s*(?:/|per\s+|a\s+)(?:day|24\s*h(?:ou)?rs?)",
        )
        .unwrap(),
    ]
});

static DURATION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:for|x)\s*(\d+)(?:\s*-\s*(\d+))?\s*(?:more\s+)?(days?|weeks?|months?|doses?)\b",
    )
    .unwrap()
});

static ONE_TIME_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:one|1)[- ]time[- ](?:only|dose|use)\b|\bone-time\b|\bonce only\b|\bstat\b",
    )
    .unwrap()
});

static PRE_EVENT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:\b[a-z0-9-]+\s+(?:minutes?|mins?|hours?|hrs?)\s+)?(?:\bprior\s+to\s+(?:the\s+|your\s+)?(?:procedure|surgery|appointment|test|scan|colonoscopy|endoscopy|dental\b)[^.;]*|\bbefore\s+(?:sexual\s+)?intercourse\b[^.;]*|\bat\s+(?:the\s+)?onset\s+of\b[^.;]*)",
    )
    .unwrap()
});

static VARIABLE_DAYS_RES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    vec![
        Regex::new(r"(?i)\bday\s*\d").unwrap(),
        Regex::new(r"(?i)\bweeks?\s*\d").unwrap(),
        Regex::new(r"(?i)\balternat(?:e|es|ing)\b").unwrap(),
        Regex::new(
            r"(?i)\b(mon|monday|tue|tues|tuesday|wed|weds|wednesday|thu|thur|thurs|thursday|fri|friday|sat|saturday|sun|sunday)\b(?:\s*(?:-|,|and|&|\s)\s*\b(?:mon|monday|tue|tues|tuesday|wed|weds|wednesday|thu|thur|thurs|thursday|fri|friday|sat|saturday|sun|sunday)\b)+",
        )
        .unwrap(),
    ]
});

// Conditional hold/withhold clauses carry thresholds ("hold if sbp less
// than 100") whose numbers must not read as doses.
static HOLD_CLAUSE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:hold|withhold|do not take|skip)\s+(?:if|for|when|unless|until)\b[^.;]*")
        .unwrap()
});

static PRN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:p\.r\.n\.?|prn)\b|\bas[- ]needed\b").unwrap());

pub(crate) fn detect_one_time(sig: &str) -> Option<Span> {
    ONE_TIME_RE
        .find(sig)
        .map(|m| Span::new(sig, m.start(), m.end()))
}

pub(crate) fn detect_pre_event(sig: &str) -> Option<Span> {
    PRE_EVENT_RE
        .find(sig)
        .map(|m| Span::new(sig, m.start(), m.end()))
}

pub(crate) fn detect_variable_days(sig: &str) -> Option<Span> {
    VARIABLE_DAYS_RES
        .iter()
        .filter_map(|re| re.find(sig))
        .min_by_key(|m| m.start())
        .map(|m| Span::new(sig, m.start(), m.end()))
}

pub(crate) fn detect_prn(sig: &str) -> Option<Span> {
    PRN_RE.find(sig).map(|m| Span::new(sig, m.start(), m.end()))
}

pub(crate) fn prn_in_range(sig: &str, start: usize, end: usize) -> bool {
    PRN_RE
        .find_iter(sig)
        .any(|m| m.start() >= start && m.end() <= end)
}

struct SpecialSpans<S> {
    masks: Vec<(usize, usize)>,
    caps: Vec<DailyCap<S>>,
    durations: Vec<(Span, Option<S>, Option<S>)>,
}

fn detect_special_spans<S: Scalar>(sig: &str) -> SpecialSpans<S> {
    let mut masks = Vec::new();
    let mut caps = Vec::new();
    let mut durations = Vec::new();
    for re in CAP_RES.iter() {
        for c in re.captures_iter(sig) {
            let m = c.get(0).unwrap();
            let Some(value) = crate::scalar::parse_scalar::<S>(&c[1]) else {
                continue;
            };
            caps.push(DailyCap {
                value,
                unit_word: c.get(2).map(|u| u.as_str().to_lowercase()),
                span: Span::new(sig, m.start(), m.end()),
            });
            masks.push((m.start(), m.end()));
        }
    }
    for c in DURATION_RE.captures_iter(sig) {
        let m = c.get(0).unwrap();
        let unit = c[3].to_lowercase();
        let per = match unit.as_str() {
            u if u.starts_with("day") => Some(1i64),
            u if u.starts_with("week") => Some(7),
            u if u.starts_with("month") => Some(30),
            _ => None, // "doses": masked, but no day count
        };
        let lo = crate::scalar::parse_scalar::<S>(&c[1]);
        let hi = c
            .get(2)
            .and_then(|h| crate::scalar::parse_scalar::<S>(h.as_str()));
        let (dmin, dmax) = match (per, lo) {
            (Some(p), Some(lo)) => {
                let p = S::from_int(p);
                let lo_days = lo.clone() * p.clone();
                let hi_days = hi.map(|h| h * p).unwrap_or_else(|| lo_days.clone());
                (
                    Some(smin(lo_days.clone(), hi_days.clone())),
                    Some(smax(lo_days, hi_days)),
                )
            }
            _ => (None, None),
        };
        durations.push((Span::new(sig, m.start(), m.end()), dmin, dmax));
        masks.push((m.start(), m.end()));
    }
    if let Some(span) = detect_one_time(sig) {
        masks.push((span.start, span.end));
    }
    if let Some(span) = detect_pre_event(sig) {
        masks.push((span.start, span.end));
    }
    for m in HOLD_CLAUSE_RE.find_iter(sig) {
        masks.push((m.start(), m.end()));
    }
    SpecialSpans {
        masks,
        caps,
        durations,
    }
}

// ---------------------------------------------------------------------------
// Basic entity scan
// ---------------------------------------------------------------------------

const HOUR_WORDS: &[&str] = &["h", "hr", "hrs", "hour", "hours"];
const TIMES_WORDS: &[&str] = &["times", "time", "x"];
const COUNT_WORDS: &[&str] = &["once", "twice", "thrice"];
const CONJUNCTIONS: &[&str] = &["and", "then", "&", ";", ".", ","];
const STRONG_BREAKS: &[&str] = &[".", ";"];

static Q_HOUR_TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^q(\d+(?:\.\d+)?)(?:-(\d+(?:\.\d+)?))?(?:h|hr|hrs)$").unwrap());

/// Internal scan record: a basic entity plus the token range it covers.
struct Scanned<S> {
    entity: BasicEntity<S>,
    tok_start: usize,
    tok_end: usize, // exclusive
}

/// Extract basic entities: longest-match lexicon lookup, numeric tokens, and
/// hour-based frequency patterns, scanning left to right. Unknown tokens are
/// skipped. Daily caps, durations and one-time markers are excluded so their
/// numbers do not masquerade as doses.
pub fn extract_basic<S: Scalar>(sig: &str, lexicon: &Lexicon<S>) -> Vec<BasicEntity<S>> {
    let tokens = tokenize(sig);
    let specials = detect_special_spans::<S>(sig);
    scan_basics(sig, &tokens, lexicon, &specials.masks)
        .into_iter()
        .map(|s| s.entity)
        .collect()
}

fn scan_basics<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    lexicon: &Lexicon<S>,
    masks: &[(usize, usize)],
) -> Vec<Scanned<S>> {
    let masked = |t: &Token| masks.iter().any(|&(s, e)| t.start < e && s < t.end);
    let norms: Vec<&str> = tokens.iter().map(|t| t.norm.as_str()).collect();
    let mut scanned: Vec<Scanned<S>> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if masked(&tokens[i]) {
            i += 1;
            continue;
        }
        let run_clear = |len: usize| tokens[i..i + len].iter().all(|t| !masked(t));
        let hour = match_hour_pattern::<S>(tokens, i);
        let lex = lexicon.lookup_longest(&norms, i);
        let lex_len = lex.as_ref().map(|m| m.length).unwrap_or(0);
        if let Some((len, period_min, period_max)) = hour {
            if len >= lex_len && run_clear(len) {
                let span = Span::new(sig, tokens[i].start, tokens[i + len - 1].end);
                scanned.push(Scanned {
                    entity: BasicEntity {
                        span,
                        entity_type: BasicEntityType::Frequency,
                        normalization: Normalization::Frequency {
                            period_days_min: period_min,
                            period_days_max: period_max,
                            implicit_count: S::one(),
                        },
                    },
                    tok_start: i,
                    tok_end: i + len,
                });
                i += len;
                continue;
            }
        }
        if let Some(m) = lex {
            if run_clear(m.length) {
                let entry = preferred_entry(&m.entries);
                let span = Span::new(sig, tokens[i].start, tokens[i + m.length - 1].end);
                scanned.push(Scanned {
                    entity: BasicEntity {
                        span,
                        entity_type: entry.entity_type,
                        normalization: entry.normalization.clone(),
                    },
                    tok_start: i,
                    tok_end: i + m.length,
                });
                i += m.length;
                continue;
            }
        }
        if let Some((lo, hi)) = parse_numeric_token::<S>(&tokens[i].norm) {
            let span = Span::new(sig, tokens[i].start, tokens[i].end);
            scanned.push(Scanned {
                entity: BasicEntity {
                    span,
                    entity_type: BasicEntityType::NumericalValue,
                    normalization: Normalization::Numeric {
                        value_min: lo,
                        value_max: hi,
                    },
                },
                tok_start: i,
                tok_end: i + 1,
            });
        }
        i += 1;
    }
    merge_numeric_runs(sig, tokens, scanned)
}

/// On an exact-length tie across entity types, prefer the more specific
/// reading: Form > Units > Frequency > FrequencyMod > Route > NumericalValue.
fn tie_rank(t: BasicEntityType) -> u8 {
    match t {
        BasicEntityType::Form => 0,
        BasicEntityType::Units => 1,
        BasicEntityType::Frequency => 2,
        BasicEntityType::FrequencyMod => 3,
        BasicEntityType::Route => 4,
        BasicEntityType::NumericalValue => 5,
    }
}

fn preferred_entry<'a, S>(entries: &[&'a LexiconEntry<S>]) -> &'a LexiconEntry<S> {
    entries
        .iter()
        .min_by_key(|e| tie_rank(e.entity_type))
        .unwrap()
}

/// Hour-based frequency starting at token `i`:
/// "every 4 hours", "q 4-6 hours", "every 4 to 6 hrs", or a single "q4h".
/// Returns (token run length, period_days_min, period_days_max).
fn match_hour_pattern<S: Scalar>(tokens: &[Token], i: usize) -> Option<(usize, S, S)> {
    let norm = |k: usize| tokens.get(k).map(|t| t.norm.as_str());
    let day = S::from_int(24);
    if let Some(c) = Q_HOUR_TOKEN_RE.captures(norm(i)?) {
        let lo = crate::scalar::parse_scalar::<S>(&c[1])?;
        let hi = c
            .get(2)
            .and_then(|h| crate::scalar::parse_scalar::<S>(h.as_str()))
            .unwrap_or(lo.clone());
        if lo <= S::zero() || hi < lo {
            return None;
        }
        return Some((1, lo / day.clone(), hi / day));
    }
    if !matches!(norm(i), Some("every") | Some("q")) {
        return None;
    }
    let (lo, hi) = parse_numeric_token::<S>(norm(i + 1)?)?;
    if lo <= S::zero() {
        return None;
    }
    if let Some(word) = norm(i + 2) {
        if HOUR_WORDS.contains(&word) {
            return Some((3, lo / day.clone(), hi / day));
        }
        // "every 4 to 6 hours"
        if word == "to" {
            let (lo2, hi2) = parse_numeric_token::<S>(norm(i + 3)?)?;
            if lo2 > S::zero() && HOUR_WORDS.contains(&norm(i + 4)?) {
                let lo = smin(lo, lo2);
                let hi = smax(hi, hi2);
                return Some((5, lo / day.clone(), hi / day));
            }
        }
    }
    None
}

/// Merge adjacent NumericalValue entities that express one figure:
///   - "one and (a) half"  → sum (fraction after "and")
///   - "one to two", "1 - 2" → range
///   - "two (2)", "one half (0.5)" → parenthesized restatement wins
fn merge_numeric_runs<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    scanned: Vec<Scanned<S>>,
) -> Vec<Scanned<S>> {
    enum Gap {
        AndFraction,
        Range,
        Restatement,
        No,
    }
    let classify = |a: &Scanned<S>, b: &Scanned<S>| -> Gap {
        let gap: Vec<&str> = tokens[a.tok_end..b.tok_start]
            .iter()
            .map(|t| t.norm.as_str())
            .collect();
        let b_paren = tokens[b.tok_start].norm.starts_with('(');
        match gap.as_slice() {
            [] if b_paren => Gap::Restatement,
            ["and"] | ["and", "a"] => Gap::AndFraction,
            ["to"] | ["-"] => Gap::Range,
            _ => Gap::No,
        }
    };
    let mut merged: Vec<Scanned<S>> = Vec::new();
    for item in scanned {
        let combine = match merged.last() {
            Some(prev)
                if prev.entity.entity_type == BasicEntityType::NumericalValue
                    && item.entity.entity_type == BasicEntityType::NumericalValue =>
            {
                let (pv_min, pv_max) = numeric_values(&prev.entity);
                let (iv_min, iv_max) = numeric_values(&item.entity);
                match classify(prev, &item) {
                    Gap::Restatement => Some((iv_min, iv_max)),
                    Gap::AndFraction if iv_max < S::one() => {
                        Some((pv_min + iv_min, pv_max + iv_max))
                    }
                    Gap::Range => Some((smin(pv_min, iv_min), smax(pv_max, iv_max))),
                    _ => None,
                }
            }
            _ => None,
        };
        match combine {
            Some((lo, hi)) => {
                let prev = merged.last_mut().unwrap();
                prev.entity.normalization = Normalization::Numeric {
                    value_min: lo,
                    value_max: hi,
                };
                prev.entity.span = Span::new(sig, prev.entity.span.start, item.entity.span.end);
                prev.tok_end = item.tok_end;
            }
            None => merged.push(item),
        }
    }
    merged
}

fn numeric_values<S: Scalar>(e: &BasicEntity<S>) -> (S, S) {
    match &e.normalization {
        Normalization::Numeric {
            value_min,
            value_max,
        } => (value_min.clone(), value_max.clone()),
        _ => unreachable!("numeric entity without numeric normalization"),
    }
}

// ---------------------------------------------------------------------------
// Compound assembly
// ---------------------------------------------------------------------------

/// Tokens strictly between two spans.
fn gap_tokens<'a>(tokens: &'a [Token], left: &Span, right: &Span) -> &'a [Token] {
    let from = tokens.partition_point(|t| t.start < left.end);
    let to = tokens.partition_point(|t| t.end <= right.start);
    if to <= from {
        &[]
    } else {
        &tokens[from..to]
    }
}

/// Pattern parts may be separated by at most 2 non-entity tokens and never
/// across a conjunction.
fn adjacent<S>(tokens: &[Token], a: &BasicEntity<S>, b: &BasicEntity<S>) -> bool {
    let gap = gap_tokens(tokens, &a.span, &b.span);
    gap.len() <= 2 && gap.iter().all(|t| !CONJUNCTIONS.contains(&t.norm.as_str()))
}

fn is_count_word(text: &str) -> bool {
    COUNT_WORDS.contains(&text.to_lowercase().as_str())
}

/// A NumericalValue belongs to an AF (not a DA quantity) when it is a
/// count word ("twice"), is followed by a times-word then a Frequency
/// ("two times daily"), directly precedes a Frequency whose surface itself
/// starts with a times-word ("5 times/day"), or sits between a
/// FrequencyMod and a Frequency ("every 2 weeks").
fn nv_is_af_bound<S: Scalar>(tokens: &[Token], basics: &[BasicEntity<S>], i: usize) -> bool {
    let nv = &basics[i];
    if is_count_word(&nv.span.text) {
        return true;
    }
    let Some(next) = basics.get(i + 1) else {
        return false;
    };
    if next.entity_type != BasicEntityType::Frequency || !adjacent(tokens, nv, next) {
        return false;
    }
    if i > 0
        && basics[i - 1].entity_type == BasicEntityType::FrequencyMod
        && adjacent(tokens, &basics[i - 1], nv)
    {
        return true;
    }
    let gap_has_times = gap_tokens(tokens, &nv.span, &next.span)
        .iter()
        .any(|t| TIMES_WORDS.contains(&t.norm.as_str()));
    let freq_first = next.span.text.split_whitespace().next().unwrap_or("");
    gap_has_times || normalize_token_text(freq_first).starts_with("time")
}

/// Assemble DosagePerAdministration entities: `NumericalValue + ?(Form|Units)
/// + ?Route` over adjacent basics, greedy left to right.
pub fn assemble_da<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    basics: &[BasicEntity<S>],
) -> Vec<CompoundEntity<S>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < basics.len() {
        if basics[i].entity_type != BasicEntityType::NumericalValue
            || nv_is_af_bound(tokens, basics, i)
        {
            i += 1;
            continue;
        }
        let mut last = i;
        if let Some(next) = basics.get(last + 1) {
            if matches!(
                next.entity_type,
                BasicEntityType::Form | BasicEntityType::Units
            ) && adjacent(tokens, &basics[last], next)
            {
                last += 1;
            }
        }
        if let Some(next) = basics.get(last + 1) {
            if next.entity_type == BasicEntityType::Route && adjacent(tokens, &basics[last], next) {
                last += 1;
            }
        }
        out.push(CompoundEntity {
            kind: CompoundKind::DosagePerAdministration,
            span: Span::new(sig, basics[i].span.start, basics[last].span.end),
            parts: basics[i..=last].to_vec(),
        });
        i = last + 1;
    }
    out
}

/// Assemble AdministrationFrequency entities: `?FrequencyMod +
/// ?NumericalValue + Frequency`. A NumericalValue after a FrequencyMod
/// scales the period ("every 2 days"); a count-bound NumericalValue scales
/// the count ("two times daily"). A bare Frequency is an AF on its own.
pub fn assemble_af<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    basics: &[BasicEntity<S>],
) -> Vec<CompoundEntity<S>> {
    let mut out = Vec::new();
    // A sub-daily timeframe word directly after the frequency qualifies the
    // same administration ("daily in the morning", "every night at bedtime")
    // and folds into the AF instead of dangling as a second frequency.
    let absorb_timeframes = |mut to: usize| {
        while let Some(next) = basics.get(to + 1) {
            if next.entity_type == BasicEntityType::Frequency
                && adjacent(tokens, &basics[to], next)
                && timeframe_slot(&next.span.text).is_some()
            {
                to += 1;
            } else {
                break;
            }
        }
        to
    };
    let mut emit_through = |from: usize, to: usize| -> usize {
        let to = absorb_timeframes(to);
        out.push(CompoundEntity {
            kind: CompoundKind::AdministrationFrequency,
            span: Span::new(sig, basics[from].span.start, basics[to].span.end),
            parts: basics[from..=to].to_vec(),
        });
        to
    };
    let mut i = 0;
    while i < basics.len() {
        match basics[i].entity_type {
            BasicEntityType::FrequencyMod => {
                let mut j = i;
                if let Some(next) = basics.get(j + 1) {
                    if next.entity_type == BasicEntityType::NumericalValue
                        && adjacent(tokens, &basics[j], next)
                    {
                        j += 1;
                    }
                }
                match basics.get(j + 1) {
                    Some(next)
                        if next.entity_type == BasicEntityType::Frequency
                            && adjacent(tokens, &basics[j], next) =>
                    {
                        i = emit_through(i, j + 1) + 1;
                    }
                    _ => i += 1,
                }
            }
            BasicEntityType::NumericalValue if nv_is_af_bound(tokens, basics, i) => {
                match basics.get(i + 1) {
                    Some(next)
                        if next.entity_type == BasicEntityType::Frequency
                            && adjacent(tokens, &basics[i], next) =>
                    {
                        i = emit_through(i, i + 1) + 1;
                    }
                    _ => i += 1,
                }
            }
            BasicEntityType::Frequency => {
                i = emit_through(i, i) + 1;
            }
            _ => i += 1,
        }
    }
    out
}

/// Canonical sub-daily slot for a frequency surface, if it names one.
pub(crate) fn timeframe_slot(surface: &str) -> Option<&'static str> {
    match normalize_token_text(surface).as_str() {
        "am" | "qam" | "morning" => Some("morning"),
        "noon" => Some("noon"),
        "afternoon" => Some("afternoon"),
        "pm" | "qpm" | "evening" => Some("evening"),
        "night" | "nightly" | "bedtime" | "hs" | "qhs" => Some("night"),
        "breakfast" => Some("breakfast"),
        "lunch" => Some("lunch"),
        "dinner" | "supper" => Some("dinner"),
        _ => None,
    }
}

/// Pair each DA with the nearest following AF that does not cross another DA
/// or a sentence break. Returns (DEs, unpaired DA indices, unpaired AF
/// indices); every DA/AF lands in exactly one bucket.
pub fn pair_des<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    das: &[CompoundEntity<S>],
    afs: &[CompoundEntity<S>],
) -> (Vec<DoseExpression>, Vec<usize>, Vec<usize>) {
    let strong_break_between = |a: usize, b: usize| {
        let from = tokens.partition_point(|t| t.start < a);
        let to = tokens.partition_point(|t| t.end <= b);
        tokens[from..to.max(from)]
            .iter()
            .any(|t| STRONG_BREAKS.contains(&t.norm.as_str()))
    };
    let mut used_af = vec![false; afs.len()];
    let mut des = Vec::new();
    let mut unpaired_das = Vec::new();
    for (di, da) in das.iter().enumerate() {
        let next_da_start = das.get(di + 1).map(|d| d.span.start);
        let mut chosen = None;
        for (ai, af) in afs.iter().enumerate() {
            if used_af[ai] || af.span.start < da.span.end {
                continue;
            }
            if next_da_start.is_some_and(|nd| nd <= af.span.start) {
                break; // the next DA claims everything from here on
            }
            if strong_break_between(da.span.end, af.span.start) {
                break;
            }
            chosen = Some(ai);
            break;
        }
        match chosen {
            Some(ai) => {
                used_af[ai] = true;
                des.push(DoseExpression {
                    span: Span::new(sig, da.span.start, afs[ai].span.end),
                    da: di,
                    af: ai,
                });
            }
            None => unpaired_das.push(di),
        }
    }
    let unpaired_afs = (0..afs.len()).filter(|&ai| !used_af[ai]).collect();
    (des, unpaired_das, unpaired_afs)
}

/// Run the full rule-based extractor over a Sig.
pub fn extract<S: Scalar>(sig: &str, lexicon: &Lexicon<S>) -> ExtractionResult<S> {
    let tokens = tokenize(sig);
    let specials = detect_special_spans::<S>(sig);
    let scanned = scan_basics(sig, &tokens, lexicon, &specials.masks);
    let basics: Vec<BasicEntity<S>> = scanned.into_iter().map(|s| s.entity).collect();
    let das = assemble_da(sig, &tokens, &basics);
    let afs = assemble_af(sig, &tokens, &basics);
    let (des, unpaired_das, unpaired_afs) = pair_des(sig, &tokens, &das, &afs);
    let durations = attach_durations(&des, specials.durations);
    ExtractionResult {
        sig: sig.to_string(),
        basics,
        das,
        afs,
        des,
        unpaired_das,
        unpaired_afs,
        caps: specials.caps,
        durations,
        notes: Vec::new(),
    }
}

fn attach_durations<S: Scalar>(
    des: &[DoseExpression],
    raw: Vec<(Span, Option<S>, Option<S>)>,
) -> Vec<DurationNote<S>> {
    raw.into_iter()
        .map(|(span, days_min, days_max)| {
            let de = des
                .iter()
                .enumerate()
                .min_by_key(|(_, de)| {
                    if de.span.end <= span.start {
                        span.start - de.span.end
                    } else {
                        de.span.start.saturating_sub(span.end)
                    }
                })
                .map(|(i, _)| i);
            DurationNote {
                span,
                days_min,
                days_max,
                de,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// External (pluggable) extractor seam
// ---------------------------------------------------------------------------

/// Labels accepted from an external entity extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExternalLabel {
    Dosage,
    Strength,
    Form,
    Frequency,
    Route,
    Duration,
    Drug,
}

impl FromStr for ExternalLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let s = s.strip_prefix("n2c2_").unwrap_or(s);
        match s.to_ascii_lowercase().as_str() {
            "dosage" => Ok(ExternalLabel::Dosage),
            "strength" => Ok(ExternalLabel::Strength),
            "form" => Ok(ExternalLabel::Form),
            "frequency" => Ok(ExternalLabel::Frequency),
            "route" => Ok(ExternalLabel::Route),
            "duration" => Ok(ExternalLabel::Duration),
            "drug" => Ok(ExternalLabel::Drug),
            _ => Err(()),
        }
    }
}

impl fmt::Display for ExternalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExternalLabel::Dosage => "Dosage",
            ExternalLabel::Strength => "Strength",
            ExternalLabel::Form => "Form",
            ExternalLabel::Frequency => "Frequency",
            ExternalLabel::Route => "Route",
            ExternalLabel::Duration => "Duration",
            ExternalLabel::Drug => "Drug",
        };
        f.write_str(name)
    }
}

/// One labeled span from an external extractor (byte offsets into the Sig).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalEntity {
    pub label: ExternalLabel,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Error)]
pub enum ExternalEntityError {
    #[error("entity span {start}..{end} is out of bounds or not on a character boundary")]
    InvalidSpan { start: usize, end: usize },
    #[error("overlapping {label} spans at {a_start}..{a_end} and {b_start}..{b_end}")]
    OverlappingSpans {
        label: ExternalLabel,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
}

/// Map external labeled spans onto (DAs, AFs): adjacent Dosage/Strength +
/// Form spans fuse into one DA, every Frequency span becomes an AF, and
/// basic entities are re-extracted inside each compound span so the
/// downstream normalization sees the same shapes as the rule-based path.
/// The third element is extraction notes (dropped or ignored spans).
#[allow(clippy::type_complexity)]
pub fn external_entities_to_compound<S: Scalar>(
    sig: &str,
    entities: &[ExternalEntity],
    lexicon: &Lexicon<S>,
) -> Result<(Vec<CompoundEntity<S>>, Vec<CompoundEntity<S>>, Vec<String>), ExternalEntityError> {
    for e in entities {
        if e.start >= e.end
            || e.end > sig.len()
            || !sig.is_char_boundary(e.start)
            || !sig.is_char_boundary(e.end)
        {
            return Err(ExternalEntityError::InvalidSpan {
                start: e.start,
                end: e.end,
            });
        }
    }
    let mut sorted: Vec<&ExternalEntity> = entities.iter().collect();
    sorted.sort_by_key(|e| (e.start, e.end));
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.label == b.label && b.start < a.end {
            return Err(ExternalEntityError::OverlappingSpans {
                label: a.label,
                a_start: a.start,
                a_end: a.end,
                b_start: b.start,
                b_end: b.end,
            });
        }
    }

    let tokens = tokenize(sig);
    let mut notes = Vec::new();
    let mut das = Vec::new();
    let mut afs = Vec::new();
    let mut used_forms = vec![false; sorted.len()];
    for (i, e) in sorted.iter().enumerate() {
        match e.label {
            ExternalLabel::Dosage | ExternalLabel::Strength => {
                let mut end = e.end;
                // Fuse with a directly following Form span.
                if let Some((j, form)) = sorted
                    .iter()
                    .enumerate()
                    .skip(i + 1)
                    .find(|(_, f)| f.start >= e.end)
                    .filter(|(_, f)| f.label == ExternalLabel::Form)
                {
                    let gap_start = tokens.partition_point(|t| t.start < e.end);
                    let gap_end = tokens.partition_point(|t| t.end <= form.start);
                    let gap = &tokens[gap_start..gap_end.max(gap_start)];
                    if gap.len() <= 2
                        && gap.iter().all(|t| !CONJUNCTIONS.contains(&t.norm.as_str()))
                    {
                        end = form.end;
                        used_forms[j] = true;
                    }
                }
                let span = Span::new(sig, e.start, end);
                let parts = recover_basics(sig, &tokens, lexicon, e.start, end);
                if parts
                    .iter()
                    .any(|p| p.entity_type == BasicEntityType::NumericalValue)
                {
                    das.push(CompoundEntity {
                        kind: CompoundKind::DosagePerAdministration,
                        span,
                        parts,
                    });
                } else {
                    notes.push(format!(
                        "dropped external {} span {}: no numeric value inside",
                        e.label, span
                    ));
                }
            }
            ExternalLabel::Frequency => {
                let span = Span::new(sig, e.start, e.end);
                let parts = recover_basics(sig, &tokens, lexicon, e.start, e.end);
                if parts
                    .iter()
                    .any(|p| p.entity_type == BasicEntityType::Frequency)
                {
                    afs.push(CompoundEntity {
                        kind: CompoundKind::AdministrationFrequency,
                        span,
                        parts,
                    });
                } else {
                    notes.push(format!(
                        "dropped external Frequency span {span}: no frequency term inside"
                    ));
                }
            }
            ExternalLabel::Form
            | ExternalLabel::Route
            | ExternalLabel::Duration
            | ExternalLabel::Drug => {
                // Form spans are only used fused into a DA; the rest carry no
                // dosage information.
            }
        }
    }
    das.sort_by_key(|d| d.span.start);
    afs.sort_by_key(|a| a.span.start);
    Ok((das, afs, notes))
}

/// Re-run the basic scan restricted to `[start, end)`.
fn recover_basics<S: Scalar>(
    sig: &str,
    tokens: &[Token],
    lexicon: &Lexicon<S>,
    start: usize,
    end: usize,
) -> Vec<BasicEntity<S>> {
    let from = tokens.partition_point(|t| t.start < start);
    let to = tokens.partition_point(|t| t.end <= end);
    if to <= from {
        return Vec::new();
    }
    scan_basics(sig, &tokens[from..to], lexicon, &[])
        .into_iter()
        .map(|s| s.entity)
        .collect()
}

/// Build a full [`ExtractionResult`] from externally supplied entities.
/// Caps and durations still come from the Sig text itself.
pub fn extract_with_external<S: Scalar>(
    sig: &str,
    entities: &[ExternalEntity],
    lexicon: &Lexicon<S>,
) -> Result<ExtractionResult<S>, ExternalEntityError> {
    let (das, afs, notes) = external_entities_to_compound(sig, entities, lexicon)?;
    let tokens = tokenize(sig);
    let specials = detect_special_spans::<S>(sig);
    let (des, unpaired_das, unpaired_afs) = pair_des(sig, &tokens, &das, &afs);
    let durations = attach_durations(&des, specials.durations);
    let mut basics: Vec<BasicEntity<S>> = Vec::new();
    for part in das.iter().chain(&afs).flat_map(|c| &c.parts) {
        let overlaps = basics.iter().any(|b: &BasicEntity<S>| {
            b.entity_type == part.entity_type
                && b.span.start < part.span.end
                && part.span.start < b.span.end
        });
        if !overlaps {
            basics.push(part.clone());
        }
    }
    basics.sort_by_key(|b| (b.span.start, b.span.end));
    Ok(ExtractionResult {
        sig: sig.to_string(),
        basics,
        das,
        afs,
        des,
        unpaired_das,
        unpaired_afs,
        caps: specials.caps,
        durations,
        notes,
    })
}
