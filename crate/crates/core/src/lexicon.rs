//! Curated lexicon mapping surface forms to basic entity types and
//! normalized values.
//!
//! The lexicon is a plain tab-separated text file so clinicians can audit
//! and extend it without touching code. One row per entry:
//!
//! ```text
//! surface<TAB>type<TAB>normalization
//! ```
//!
//! where `type` is one of `NumericalValue`, `Form`, `Units`, `Route`,
//! `Frequency`, `FrequencyMod` and `normalization` depends on the type:
//!
//! * `NumericalValue`: `min` or `min,max`
//! * `Form` / `Route`: the canonical string
//! * `Units`: `canonical_unit,scale_to_canonical` (e.g. `g` rows carry `mg,1000`)
//! * `Frequency`: `period_days,implicit_count` (e.g. `bid` carries `1,2`)
//! * `FrequencyMod`: `multiplier` (e.g. `every other` carries `1/2`)
//!
//! Lines starting with `#` and blank lines are ignored. Surfaces may span
//! several tokens (`by mouth`, `every other`); lookup is longest-match.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::{parse_scalar, Scalar};

/// Tab-separated starter lexicon shipped with the crate.
pub const DEFAULT_LEXICON_SOURCE: &str = include_str!("../data/default.lex");

/// The six basic entity kinds. Every lexicon entry carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasicEntityType {
    NumericalValue,
    Form,
    Units,
    Route,
    Frequency,
    FrequencyMod,
}

impl BasicEntityType {
    pub const ALL: [BasicEntityType; 6] = [
        BasicEntityType::NumericalValue,
        BasicEntityType::Form,
        BasicEntityType::Units,
        BasicEntityType::Route,
        BasicEntityType::Frequency,
        BasicEntityType::FrequencyMod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasicEntityType::NumericalValue => "NumericalValue",
            BasicEntityType::Form => "Form",
            BasicEntityType::Units => "Units",
            BasicEntityType::Route => "Route",
            BasicEntityType::Frequency => "Frequency",
            BasicEntityType::FrequencyMod => "FrequencyMod",
        }
    }
}

impl fmt::Display for BasicEntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasicEntityType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "numericalvalue" | "numerical_value" | "nv" => Ok(BasicEntityType::NumericalValue),
            "form" => Ok(BasicEntityType::Form),
            "units" | "unit" => Ok(BasicEntityType::Units),
            "route" => Ok(BasicEntityType::Route),
            "frequency" | "freq" => Ok(BasicEntityType::Frequency),
            "frequencymod" | "frequency_mod" | "freqmod" => Ok(BasicEntityType::FrequencyMod),
            _ => Err(()),
        }
    }
}

/// Normalized payload attached to a lexicon entry (and hence to every
/// extracted basic entity).
///
/// `Frequency` carries a period *interval*: lexicon rows always set
/// `period_days_min == period_days_max`, but pattern-extracted hour
/// frequencies ("q 4-6 hours") produce a genuine range.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization<S> {
    Numeric {
        value_min: S,
        value_max: S,
    },
    Form {
        canonical: String,
    },
    Units {
        canonical_unit: String,
        scale_to_canonical: S,
    },
    Route {
        canonical: String,
    },
    Frequency {
        period_days_min: S,
        period_days_max: S,
        implicit_count: S,
    },
    FrequencyMod {
        multiplier: S,
    },
}

impl<S> Normalization<S> {
    pub fn entity_type(&self) -> BasicEntityType {
        match self {
            Normalization::Numeric { .. } => BasicEntityType::NumericalValue,
            Normalization::Form { .. } => BasicEntityType::Form,
            Normalization::Units { .. } => BasicEntityType::Units,
            Normalization::Route { .. } => BasicEntityType::Route,
            Normalization::Frequency { .. } => BasicEntityType::Frequency,
            Normalization::FrequencyMod { .. } => BasicEntityType::FrequencyMod,
        }
    }
}

/// One lexicon row: a lowercase token-sequence surface plus its payload.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry<S> {
    pub surface: Vec<String>,
    pub entity_type: BasicEntityType,
    pub normalization: Normalization<S>,
}

impl<S> LexiconEntry<S> {
    pub fn surface_text(&self) -> String {
        self.surface.join(" ")
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("lexicon line {line}: duplicate entry for ({surface}, {entity_type})")]
    Duplicate {
        line: usize,
        surface: String,
        entity_type: BasicEntityType,
    },
}

/// Immutable after load; lookups are read-only and safe to share across
/// worker threads.
#[derive(Debug, Clone)]
pub struct Lexicon<S> {
    entries: Vec<LexiconEntry<S>>,
    by_first_token: HashMap<String, Vec<usize>>,
}

/// Result of a longest-match lookup: all entries tied at the maximal length,
/// ordered by entity type so callers can disambiguate deterministically.
#[derive(Debug)]
pub struct LongestMatch<'a, S> {
    pub length: usize,
    pub entries: Vec<&'a LexiconEntry<S>>,
}

impl<S: Scalar> Lexicon<S> {
    pub fn new() -> Self {
        Lexicon {
            entries: Vec::new(),
            by_first_token: HashMap::new(),
        }
    }

    /// The starter lexicon shipped in-repo.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON_SOURCE).expect("builtin lexicon is well-formed")
    }

    /// Parse a lexicon document. Row order does not affect lookup behavior.
    pub fn parse(source: &str) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::new();
        let mut seen: HashMap<(String, BasicEntityType), usize> = HashMap::new();
        for (idx, raw_line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = parse_row(line, line_no)?;
            let key = (entry.surface_text(), entry.entity_type);
            if seen.insert(key.clone(), line_no).is_some() {
                return Err(LexiconError::Duplicate {
                    line: line_no,
                    surface: key.0,
                    entity_type: key.1,
                });
            }
            lexicon.push(entry);
        }
        Ok(lexicon)
    }

    fn push(&mut self, entry: LexiconEntry<S>) {
        let first = entry.surface[0].clone();
        self.by_first_token
            .entry(first)
            .or_default()
            .push(self.entries.len());
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry<S>] {
        &self.entries
    }

    /// Longest match over `tokens` starting at `start`. Token strings must
    /// already be in normal form (see [`normalize_token_text`]). When several
    /// entity types tie at the maximal length, all are returned.
    pub fn lookup_longest(&self, tokens: &[&str], start: usize) -> Option<LongestMatch<'_, S>> {
        let first = tokens.get(start)?;
        let candidates = self.by_first_token.get(*first)?;
        let mut best_len = 0usize;
        let mut best: Vec<&LexiconEntry<S>> = Vec::new();
        for &idx in candidates {
            let entry = &self.entries[idx];
            let len = entry.surface.len();
            if start + len > tokens.len() {
                continue;
            }
            if !entry
                .surface
                .iter()
                .zip(&tokens[start..start + len])
                .all(|(s, t)| s == t)
            {
                continue;
            }
            if len > best_len {
                best_len = len;
                best.clear();
            }
            if len == best_len {
                best.push(entry);
            }
        }
        if best.is_empty() {
            return None;
        }
        best.sort_by_key(|e| e.entity_type);
        Some(LongestMatch {
            length: best_len,
            entries: best,
        })
    }

    /// Units entry for a (normalized) unit surface, if any.
    pub fn unit_entry(&self, unit: &str) -> Option<(&str, &S)> {
        let norm = normalize_token_text(unit);
        let ids = self.by_first_token.get(&norm)?;
        ids.iter()
            .map(|&i| &self.entries[i])
            .find_map(|e| match &e.normalization {
                Normalization::Units {
                    canonical_unit,
                    scale_to_canonical,
                } if e.surface.len() == 1 => Some((canonical_unit.as_str(), scale_to_canonical)),
                _ => None,
            })
    }

    /// True if the (normalized) surface is a known Form word. Used by cap
    /// expressions ("max = 6 tabs/day") to tell count caps from amount caps.
    pub fn is_form_word(&self, word: &str) -> bool {
        let norm = normalize_token_text(word);
        self.by_first_token
            .get(&norm)
            .map(|ids| {
                ids.iter().any(|&i| {
                    self.entries[i].entity_type == BasicEntityType::Form
                        && self.entries[i].surface.len() == 1
                })
            })
            .unwrap_or(false)
    }
}

impl<S: Scalar> Default for Lexicon<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn parse_row<S: Scalar>(line: &str, line_no: usize) -> Result<LexiconEntry<S>, LexiconError> {
    let malformed = |message: String| LexiconError::Malformed {
        line: line_no,
        message,
    };
    let columns: Vec<&str> = line.split('\t').collect();
    if columns.len() != 3 {
        return Err(malformed(format!(
            "expected 3 tab-separated columns, found {}",
            columns.len()
        )));
    }
    let surface: Vec<String> = columns[0]
        .split_whitespace()
        .map(normalize_token_text)
        .filter(|t| !t.is_empty())
        .collect();
    if surface.is_empty() {
        return Err(malformed("empty surface".into()));
    }
    let entity_type = BasicEntityType::from_str(columns[1].trim())
        .map_err(|_| malformed(format!("unknown entity type {:?}", columns[1].trim())))?;
    let norm_text = columns[2].trim();
    let number = |text: &str| {
        parse_scalar::<S>(text).ok_or_else(|| malformed(format!("unparseable number {text:?}")))
    };
    let normalization = match entity_type {
        BasicEntityType::NumericalValue => {
            let (lo, hi) = match norm_text.split_once(',') {
                Some((a, b)) => (number(a)?, number(b)?),
                None => {
                    let v = number(norm_text)?;
                    (v.clone(), v)
                }
            };
            if lo < S::zero() || hi < lo {
                return Err(malformed(format!("invalid numeric range {norm_text:?}")));
            }
            Normalization::Numeric {
                value_min: lo,
                value_max: hi,
            }
        }
        BasicEntityType::Form => {
            if norm_text.is_empty() {
                return Err(malformed("empty canonical form".into()));
            }
            Normalization::Form {
                canonical: norm_text.to_ascii_lowercase(),
            }
        }
        BasicEntityType::Route => {
            if norm_text.is_empty() {
                return Err(malformed("empty canonical route".into()));
            }
            Normalization::Route {
                canonical: norm_text.to_ascii_lowercase(),
            }
        }
        BasicEntityType::Units => {
            let (unit, scale) = norm_text.split_once(',').ok_or_else(|| {
                malformed("Units normalization needs `canonical_unit,scale`".into())
            })?;
            let unit = unit.trim().to_ascii_lowercase();
            let scale = number(scale)?;
            if unit.is_empty() || scale <= S::zero() {
                return Err(malformed(format!(
                    "invalid Units normalization {norm_text:?}"
                )));
            }
            Normalization::Units {
                canonical_unit: unit,
                scale_to_canonical: scale,
            }
        }
        BasicEntityType::Frequency => {
            let (period, implicit) = norm_text.split_once(',').ok_or_else(|| {
                malformed("Frequency normalization needs `period_days,implicit_count`".into())
            })?;
            let period = number(period)?;
            let implicit = number(implicit)?;
            if period <= S::zero() || implicit <= S::zero() {
                return Err(malformed(format!(
                    "invalid Frequency normalization {norm_text:?}"
                )));
            }
            Normalization::Frequency {
                period_days_min: period.clone(),
                period_days_max: period,
                implicit_count: implicit,
            }
        }
        BasicEntityType::FrequencyMod => {
            let multiplier = number(norm_text)?;
            if multiplier <= S::zero() {
                return Err(malformed(format!(
                    "invalid FrequencyMod multiplier {norm_text:?}"
                )));
            }
            Normalization::FrequencyMod { multiplier }
        }
    };
    Ok(LexiconEntry {
        surface,
        entity_type,
        normalization,
    })
}

/// Canonical token form shared by the tokenizer and lexicon surfaces:
/// lowercase, with dots stripped from dotted abbreviations so `p.o.`,
/// `P.O.` and `po` all land on the same key. Digit-bearing tokens
/// (`0.25`) are left untouched apart from lowercasing.
pub fn normalize_token_text(token: &str) -> String {
    let lower = token.to_lowercase();
    if lower.contains('.') && lower.chars().all(|c| c == '.' || c.is_alphabetic()) {
        let stripped: String = lower.chars().filter(|&c| c != '.').collect();
        if !stripped.is_empty() {
            return stripped;
        }
    }
    lower
}

/// Recognize a single numeric-bearing token: literals (`2`, `0.25`, `1/2`),
/// ranges (`2-4`), and parenthesized restatements (`one(1)`, `(0.5)`), where
/// the parenthesized figure wins. Word numbers ("two") live in the lexicon,
/// not here. Returns the (min, max) pair.
pub fn parse_numeric_token<S: Scalar>(token: &str) -> Option<(S, S)> {
    let t = token.trim();
    if let Some(open) = t.find('(') {
        if let Some(inner) = t[open + 1..].strip_suffix(')') {
            if !inner.contains('(') {
                return parse_plain(inner);
            }
        }
        return None;
    }
    parse_plain(t)
}

fn parse_plain<S: Scalar>(t: &str) -> Option<(S, S)> {
    if let Some((a, b)) = t.split_once('-') {
        if a.is_empty() || b.is_empty() || b.contains('-') {
            return None;
        }
        let (lo, _) = parse_plain::<S>(a)?;
        let (_, hi) = parse_plain::<S>(b)?;
        return Some(if hi < lo { (hi, lo) } else { (lo, hi) });
    }
    let v = parse_scalar::<S>(t)?;
    if v < S::zero() {
        return None;
    }
    Some((v.clone(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn rat(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn loads_rows_from_table_examples() {
        let source = "twice\tNumericalValue\t2\ng\tUnits\tmg,1000\n";
        let lexicon: Lexicon<Rational> = Lexicon::parse(source).unwrap();
        assert_eq!(lexicon.len(), 2);
        let hit = lexicon.lookup_longest(&["twice"], 0).unwrap();
        assert_eq!(hit.length, 1);
        assert_eq!(
            hit.entries[0].normalization,
            Normalization::Numeric {
                value_min: rat(2, 1),
                value_max: rat(2, 1)
            }
        );
        let (unit, scale) = lexicon.unit_entry("g").unwrap();
        assert_eq!(unit, "mg");
        assert_eq!(*scale, rat(1000, 1));
    }

    #[test]
    fn empty_document_loads_empty() {
        let lexicon: Lexicon<Rational> = Lexicon::parse("").unwrap();
        assert!(lexicon.is_empty());
        assert!(lexicon.lookup_longest(&["tablet"], 0).is_none());
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let source = "tablet\tForm\ttablet\nbroken row without tabs\n";
        let err = Lexicon::<Rational>::parse(source).unwrap_err();
        match err {
            LexiconError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }

        let err = Lexicon::<Rational>::parse("twice\tNumericalValue\tnotanumber\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }));

        let err = Lexicon::<Rational>::parse("x\tNotAType\tfoo\n").unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }));
    }

    #[test]
    fn duplicate_surface_and_type_is_rejected() {
        let source = "tab\tForm\ttablet\ntab\tForm\ttablet\n";
        let err = Lexicon::<Rational>::parse(source).unwrap_err();
        assert!(matches!(err, LexiconError::Duplicate { line: 2, .. }));
        // Same surface under a different type is allowed.
        let source = "inhalation\tForm\tinhalation\ninhalation\tRoute\tinhalation\n";
        assert_eq!(Lexicon::<Rational>::parse(source).unwrap().len(), 2);
    }

    #[test]
    fn longest_match_wins_over_prefix() {
        let lexicon: Lexicon<Rational> = Lexicon::builtin();
        let tokens = ["every", "other", "day"];
        let hit = lexicon.lookup_longest(&tokens, 0).unwrap();
        assert_eq!(hit.length, 2);
        assert_eq!(hit.entries[0].surface_text(), "every other");
        assert_eq!(
            hit.entries[0].normalization,
            Normalization::FrequencyMod {
                multiplier: rat(1, 2)
            }
        );
    }

    #[test]
    fn builtin_covers_core_vocabulary() {
        let lexicon: Lexicon<Rational> = Lexicon::builtin();
        let hit = lexicon.lookup_longest(&["tablet"], 0).unwrap();
        assert_eq!(hit.entries[0].entity_type, BasicEntityType::Form);
        assert!(lexicon.lookup_longest(&["banana"], 0).is_none());
        // Case-insensitivity happens at token normalization time.
        assert_eq!(normalize_token_text("TABLET"), "tablet");
        assert_eq!(normalize_token_text("P.O."), "po");
        assert_eq!(normalize_token_text("0.25"), "0.25");
    }

    #[test]
    fn numeric_tokens() {
        assert_eq!(
            parse_numeric_token::<Rational>("1-2"),
            Some((rat(1, 1), rat(2, 1)))
        );
        assert_eq!(
            parse_numeric_token::<Rational>("1/2"),
            Some((rat(1, 2), rat(1, 2)))
        );
        assert_eq!(
            parse_numeric_token::<Rational>("7"),
            Some((rat(7, 1), rat(7, 1)))
        );
        assert_eq!(
            parse_numeric_token::<Rational>("one(1)"),
            Some((rat(1, 1), rat(1, 1)))
        );
        assert_eq!(
            parse_numeric_token::<Rational>("(0.5)"),
            Some((rat(1, 2), rat(1, 2)))
        );
        assert_eq!(parse_numeric_token::<Rational>("teaspoon(s)"), None);
        assert_eq!(parse_numeric_token::<Rational>("mon-wed"), None);
        assert_eq!(parse_numeric_token::<Rational>("-5"), None);
    }

    #[test]
    fn frequency_rows_carry_period_and_implicit_count() {
        let lexicon: Lexicon<Rational> = Lexicon::builtin();
        let bid = lexicon.lookup_longest(&["bid"], 0).unwrap();
        assert_eq!(
            bid.entries[0].normalization,
            Normalization::Frequency {
                period_days_min: rat(1, 1),
                period_days_max: rat(1, 1),
                implicit_count: rat(2, 1),
            }
        );
        let weekly = lexicon.lookup_longest(&["weekly"], 0).unwrap();
        assert_eq!(
            weekly.entries[0].normalization,
            Normalization::Frequency {
                period_days_min: rat(7, 1),
                period_days_max: rat(7, 1),
                implicit_count: rat(1, 1),
            }
        );
    }
}
