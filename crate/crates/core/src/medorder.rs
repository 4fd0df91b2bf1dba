//! Structured medication-order model and strength parsing.
//!
//! A strength string describes the amount of active drug per unit of
//! formulation. Combination products list one amount per ingredient:
//! `"300 MG-30 MG"`, `"250-50 mcg/dose"`. Units canonicalize through the
//! lexicon's Units table (mass → mg, volume → ml; mcg deliberately stays
//! mcg so reported dosages match ground-truth conventions).

use std::fmt;

use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::scalar::{parse_scalar, Scalar};

/// One medication order as it appears in structured EHR data. Only `sig`
/// is required to be non-empty; real data leaves the rest blank often.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MedicationOrder {
    pub order_id: String,
    pub sig: String,
    pub strength_text: String,
    pub route: String,
    pub form: String,
}

/// Amount of one active ingredient per formulation unit, in canonical units.
#[derive(Debug, Clone, PartialEq)]
pub struct IngredientStrength<S> {
    pub amount: S,
    pub unit: String,
    /// Denominator of per-something strengths, e.g. "dose" in "mcg/dose".
    pub denominator: Option<String>,
}

/// Parsed strength: one or more ingredients, order preserved from the text.
#[derive(Debug, Clone, PartialEq)]
pub struct Strength<S> {
    pub ingredients: Vec<IngredientStrength<S>>,
}

impl<S: Scalar> fmt::Display for Strength<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shared_unit = self.ingredients.windows(2).all(|w| w[0].unit == w[1].unit);
        for (i, ing) in self.ingredients.iter().enumerate() {
            if i > 0 {
                write!(f, "-")?;
            }
            write!(f, "{}", ing.amount.decimal_string())?;
            if !shared_unit || i + 1 == self.ingredients.len() {
                write!(f, " {}", ing.unit)?;
            }
        }
        if let Some(denom) = self
            .ingredients
            .last()
            .and_then(|i| i.denominator.as_deref())
        {
            write!(f, "/{denom}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrengthError {
    #[error("strength text is empty")]
    Empty,
    #[error("unparseable strength {0:?}")]
    Unparseable(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
}

/// Scale an amount into its canonical unit per the lexicon Units table
/// (e.g. grams scale ×1000 into mg).
pub fn canonicalize_unit<S: Scalar>(
    amount: S,
    unit: &str,
    lexicon: &Lexicon<S>,
) -> Result<(S, String), StrengthError> {
    match lexicon.unit_entry(unit) {
        Some((canonical, scale)) => Ok((amount * scale.clone(), canonical.to_string())),
        None => Err(StrengthError::UnknownUnit(unit.to_string())),
    }
}

/// Parse a strength string. Recognized shapes, each with an optional
/// `/denominator` suffix:
///
/// * `50mg`, `7.5 mg` — single ingredient
/// * `250-50 mcg` — multi-ingredient, shared trailing unit
/// * `300 MG-30 MG` — multi-ingredient, per-ingredient units
pub fn parse_strength<S: Scalar>(
    text: &str,
    lexicon: &Lexicon<S>,
) -> Result<Strength<S>, StrengthError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(StrengthError::Empty);
    }
    let lower = trimmed.to_lowercase();
    let segments = split_ingredients(&lower);
    let mut parsed: Vec<(S, Option<String>, Option<String>)> = Vec::new();
    for segment in &segments {
        parsed.push(
            parse_segment::<S>(segment)
                .ok_or_else(|| StrengthError::Unparseable(trimmed.to_string()))?,
        );
    }
    // Unit and denominator inherit backwards from the last segment that has
    // one ("250-50 mcg/dose" applies mcg and /dose to both ingredients).
    let shared_denominator: Option<String> = parsed.iter().rev().find_map(|(_, _, d)| d.clone());
    let mut ingredients = Vec::new();
    let mut inherited: Option<String> = None;
    for (amount, unit, _) in parsed.into_iter().rev() {
        let unit = match unit.or_else(|| inherited.clone()) {
            Some(u) => u,
            None => return Err(StrengthError::Unparseable(trimmed.to_string())),
        };
        inherited = Some(unit.clone());
        if amount <= S::zero() {
            return Err(StrengthError::Unparseable(trimmed.to_string()));
        }
        let (amount, unit) = canonicalize_unit(amount, &unit, lexicon)?;
        ingredients.push(IngredientStrength {
            amount,
            unit,
            denominator: shared_denominator.clone(),
        });
    }
    ingredients.reverse();
    Ok(Strength { ingredients })
}

/// Split on hyphens that separate ingredient amounts (digit follows).
fn split_ingredients(lower: &str) -> Vec<&str> {
    let bytes = lower.as_bytes();
    let mut segments = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b != b'-' || i == 0 {
            continue;
        }
        let next = lower[i + 1..].trim_start().bytes().next();
        let prev = lower[..i].trim_end().bytes().last();
        if matches!(next, Some(c) if c.is_ascii_digit())
            && matches!(prev, Some(c) if c.is_ascii_alphanumeric())
        {
            segments.push(lower[start..i].trim());
            start = i + 1;
        }
    }
    segments.push(lower[start..].trim());
    segments
}

/// `<number> [unit[/denominator]]` with the unit directly attached or
/// space-separated. Returns (amount, unit?, denominator?).
fn parse_segment<S: Scalar>(segment: &str) -> Option<(S, Option<String>, Option<String>)> {
    let seg = segment.trim();
    if seg.is_empty() {
        return None;
    }
    let digits_end = seg
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_digit() || *c == '.')
        .map(|(i, c)| i + c.len_utf8())
        .last()?;
    let amount = parse_scalar::<S>(&seg[..digits_end])?;
    let rest = seg[digits_end..].trim();
    if rest.is_empty() {
        return Some((amount, None, None));
    }
    if !rest
        .chars()
        .all(|c| c.is_alphabetic() || c == '/' || c == ' ' || c == '%')
    {
        return None;
    }
    let (unit, denominator) = match rest.split_once('/') {
        // "mg/ml" style compound units stay whole; anything else after the
        // slash is a denominator ("dose", "actuation").
        Some((base, tail)) => {
            let tail = tail.trim();
            if tail.eq_ignore_ascii_case("ml") && base.trim().len() <= 4 {
                (rest.to_string(), None)
            } else {
                (base.trim().to_string(), Some(tail.to_string()))
            }
        }
        None => (rest.to_string(), None),
    };
    if unit.is_empty() {
        return None;
    }
    Some((amount, Some(unit), denominator))
}
