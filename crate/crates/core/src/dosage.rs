//! Normalization of extracted entities and daily-dosage calculation.
//!
//! The rules run from most specific to most general and the first match
//! wins, so every outcome is deterministic:
//!
//! 1. one-time / pre-event markers → not meaningful
//! 2. day-indexed schedules, week schedules, weekday lists → variable dose
//! 3. no DosageExpression → the most specific need-more-info reason
//! 4. leftover unpaired DA/AF next to extracted DEs → missing info / conflict
//!    (a dose-less PRN restatement of an existing frequency is ignored)
//! 5. any sub-weekly frequency (< 1 per 7 days) → no daily average
//! 6. unquantifiable formulations (topical creams, eye drops) → null
//! 7. combine DEs (complementary timeframes or "and"-joined add; exact
//!    duplicates collapse; anything else conflicts), apply strength,
//!    apply daily caps
//!
//! All range arithmetic is corner evaluation: quantities are nonnegative, so
//! `min = da_min·af_min` and `max = da_max·af_max` are extremal.

use std::fmt;
use std::str::FromStr;

use crate::extract::{
    detect_one_time, detect_pre_event, detect_prn, detect_variable_days, prn_in_range,
    CompoundEntity, ExtractionResult, Span,
};
use crate::lexicon::{BasicEntityType, Lexicon, Normalization};
use crate::medorder::{parse_strength, MedicationOrder, StrengthError};
use crate::scalar::{smin, Scalar};

/// Why no daily dosage was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReasonCode {
    NeedMoreInfoUninformative,
    NeedMoreInfoMissingFrequency,
    NeedMoreInfoMissingDose,
    NeedMoreInfoConflicting,
    VariableDoseOverDays,
    NotMeaningfulNonRoutine,
    NotMeaningfulOneTime,
    SubWeeklyFrequency,
    UnquantifiableForm,
    StrengthUnavailable,
    ParseFailure,
}

impl ReasonCode {
    pub fn label(self) -> &'static str {
        match self {
            ReasonCode::NeedMoreInfoUninformative => "uninformative",
            ReasonCode::NeedMoreInfoMissingFrequency => "missing_frequency",
            ReasonCode::NeedMoreInfoMissingDose => "missing_dose",
            ReasonCode::NeedMoreInfoConflicting => "conflicting",
            ReasonCode::VariableDoseOverDays => "variable_dose_over_days",
            ReasonCode::NotMeaningfulNonRoutine => "non_routine",
            ReasonCode::NotMeaningfulOneTime => "one_time",
            ReasonCode::SubWeeklyFrequency => "sub_weekly_frequency",
            ReasonCode::UnquantifiableForm => "unquantifiable_form",
            ReasonCode::StrengthUnavailable => "strength_unavailable",
            ReasonCode::ParseFailure => "parse_failure",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ReasonCode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uninformative" => Ok(ReasonCode::NeedMoreInfoUninformative),
            "missing_frequency" => Ok(ReasonCode::NeedMoreInfoMissingFrequency),
            "missing_dose" => Ok(ReasonCode::NeedMoreInfoMissingDose),
            "conflicting" => Ok(ReasonCode::NeedMoreInfoConflicting),
            "variable_dose_over_days" | "variable_dose" => Ok(ReasonCode::VariableDoseOverDays),
            "non_routine" => Ok(ReasonCode::NotMeaningfulNonRoutine),
            "one_time" => Ok(ReasonCode::NotMeaningfulOneTime),
            "sub_weekly_frequency" | "sub_weekly" => Ok(ReasonCode::SubWeeklyFrequency),
            "unquantifiable_form" => Ok(ReasonCode::UnquantifiableForm),
            "strength_unavailable" => Ok(ReasonCode::StrengthUnavailable),
            "parse_failure" => Ok(ReasonCode::ParseFailure),
            _ => Err(()),
        }
    }
}

/// What the DA counts: formulation units or a direct amount.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DoseBasis {
    FormCount { form: Option<String> },
    Amount { unit: String },
}

/// A DosageExpression reduced to numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDE<S> {
    pub da_min: S,
    pub da_max: S,
    pub basis: DoseBasis,
    pub af_per_day_min: S,
    pub af_per_day_max: S,
    pub period_days_min: S,
    pub period_days_max: S,
    /// Canonical sub-daily slot ("morning", "evening", ...) when the AF is
    /// one; drives the complementarity rule for multiple DEs.
    pub af_timeframe: Option<String>,
    pub da_span: Span,
    pub af_span: Span,
}

impl<S> NormalizedDE<S> {
    pub fn da_is_unit_based(&self) -> bool {
        matches!(self.basis, DoseBasis::Amount { .. })
    }

    pub fn da_unit(&self) -> Option<&str> {
        match &self.basis {
            DoseBasis::Amount { unit } => Some(unit),
            DoseBasis::FormCount { .. } => None,
        }
    }
}

/// Per-ingredient daily dosage interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IngredientDose<S> {
    pub min_per_day: S,
    pub max_per_day: S,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyDosage<S> {
    pub per_ingredient: Vec<IngredientDose<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution<S> {
    Value(DailyDosage<S>),
    Null(ReasonCode),
}

/// Pipeline outcome: a daily dosage or a typed null, never both, plus
/// human-readable diagnostics either way.
#[derive(Debug, Clone, PartialEq)]
pub struct DosageOutcome<S> {
    pub resolution: Resolution<S>,
    pub diagnostics: Vec<String>,
}

impl<S> DosageOutcome<S> {
    pub fn value(&self) -> Option<&DailyDosage<S>> {
        match &self.resolution {
            Resolution::Value(v) => Some(v),
            Resolution::Null(_) => None,
        }
    }

    pub fn null_reason(&self) -> Option<ReasonCode> {
        match &self.resolution {
            Resolution::Value(_) => None,
            Resolution::Null(r) => Some(*r),
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

use crate::extract::timeframe_slot;

/// Administrations-per-day interval for an AF compound:
/// `count × implicit_count × modifier ÷ period`, evaluated at the corners
/// when the count or the period is a range. A NumericalValue that follows a
/// FrequencyMod stretches the period instead ("every 2 days" → 1/2 per day).
pub fn normalize_af<S: Scalar>(af: &CompoundEntity<S>) -> (S, S, S, S, Option<String>) {
    let one = S::one;
    let mut fm_mult = one();
    let mut nv: Option<(S, S)> = None;
    let mut nv_after_fm = false;
    let mut freq: Option<(S, S, S)> = None;
    let mut timeframe: Option<&'static str> = None;
    let mut saw_fm = false;
    for part in &af.parts {
        match &part.normalization {
            Normalization::FrequencyMod { multiplier } => {
                fm_mult = multiplier.clone();
                saw_fm = true;
            }
            Normalization::Numeric {
                value_min,
                value_max,
            } => {
                if nv.is_none() {
                    nv = Some((value_min.clone(), value_max.clone()));
                    nv_after_fm = saw_fm;
                }
            }
            Normalization::Frequency {
                period_days_min,
                period_days_max,
                implicit_count,
            } => {
                // The first frequency sets the rate; any later absorbed
                // timeframe word only qualifies it ("daily in the morning").
                if freq.is_none() {
                    freq = Some((
                        period_days_min.clone(),
                        period_days_max.clone(),
                        implicit_count.clone(),
                    ));
                }
                if timeframe.is_none() {
                    timeframe = timeframe_slot(&part.span.text);
                }
            }
            _ => {}
        }
    }
    let (mut period_min, mut period_max, implicit) = freq.unwrap_or_else(|| (one(), one(), one()));
    let (mut count_min, mut count_max) = (one(), one());
    if let Some((lo, hi)) = nv {
        if nv_after_fm {
            // A degenerate "every 0 ..." multiplier would zero the period;
            // ignore it rather than divide by zero below.
            if lo > S::zero() {
                period_min = period_min * lo;
                period_max = period_max * hi;
            }
        } else {
            count_min = lo;
            count_max = hi;
        }
    }
    let af_min = count_min * implicit.clone() * fm_mult.clone() / period_max.clone();
    let af_max = count_max * implicit * fm_mult / period_min.clone();
    (
        af_min,
        af_max,
        period_min,
        period_max,
        timeframe.map(str::to_string),
    )
}

/// Reduce a DE (a DA plus its AF) to a [`NormalizedDE`].
pub fn normalize_de<S: Scalar>(da: &CompoundEntity<S>, af: &CompoundEntity<S>) -> NormalizedDE<S> {
    let mut nv: Option<(S, S)> = None;
    let mut unit: Option<(String, S)> = None;
    let mut form: Option<String> = None;
    for part in &da.parts {
        match &part.normalization {
            Normalization::Numeric {
                value_min,
                value_max,
            } => {
                if nv.is_none() {
                    nv = Some((value_min.clone(), value_max.clone()));
                }
            }
            Normalization::Units {
                canonical_unit,
                scale_to_canonical,
            } => {
                if unit.is_none() {
                    unit = Some((canonical_unit.clone(), scale_to_canonical.clone()));
                }
            }
            Normalization::Form { canonical } if form.is_none() => {
                form = Some(canonical.clone());
            }
            _ => {}
        }
    }
    let (nv_min, nv_max) = nv.unwrap_or_else(|| (S::one(), S::one()));
    let (da_min, da_max, basis) = match unit {
        Some((u, scale)) => (
            nv_min * scale.clone(),
            nv_max * scale,
            DoseBasis::Amount { unit: u },
        ),
        None => (nv_min, nv_max, DoseBasis::FormCount { form }),
    };
    let (af_min, af_max, period_min, period_max, timeframe) = normalize_af(af);
    NormalizedDE {
        da_min,
        da_max,
        basis,
        af_per_day_min: af_min,
        af_per_day_max: af_max,
        period_days_min: period_min,
        period_days_max: period_max,
        af_timeframe: timeframe,
        da_span: da.span.clone(),
        af_span: af.span.clone(),
    }
}

// ---------------------------------------------------------------------------
// Combination of multiple DEs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Combined<S> {
    Total { min: S, max: S, basis: DoseBasis },
    Conflict { why: String },
}

fn merge_basis<S: Scalar>(ndes: &[&NormalizedDE<S>]) -> Result<DoseBasis, String> {
    let mut merged: Option<DoseBasis> = None;
    for nde in ndes {
        merged = Some(match (merged, &nde.basis) {
            (None, b) => b.clone(),
            (Some(DoseBasis::Amount { unit: a }), DoseBasis::Amount { unit: b }) if a == *b => {
                DoseBasis::Amount { unit: a }
            }
            (Some(DoseBasis::FormCount { form: a }), DoseBasis::FormCount { form: b }) => {
                match (a, b) {
                    (Some(a), Some(b)) if a != *b => {
                        return Err(format!("mixed dose forms {a:?} vs {b:?}"))
                    }
                    (Some(a), _) => DoseBasis::FormCount { form: Some(a) },
                    (None, b) => DoseBasis::FormCount { form: b.clone() },
                }
            }
            (Some(a), b) => {
                return Err(format!("mixed dose bases {a:?} vs {b:?}"));
            }
        });
    }
    Ok(merged.expect("at least one DE"))
}

fn values_equal<S: Scalar>(a: &NormalizedDE<S>, b: &NormalizedDE<S>) -> bool {
    a.da_min == b.da_min
        && a.da_max == b.da_max
        && a.af_per_day_min == b.af_per_day_min
        && a.af_per_day_max == b.af_per_day_max
        && a.basis == b.basis
}

static AND_JOIN_RE: std::sync::LazyLock<regex::Regex> = std::sync::LazyLock::new(|| {
    regex::Regex::new(r"(?i)(?:^|[^a-z])(?:and|&|plus)(?:[^a-z]|$)").unwrap()
});

/// Combine normalized DEs into one total `dose × frequency` interval.
///
/// DEs add when their timeframes are distinct sub-daily slots (am/pm,
/// morning/evening, meal slots) or when the Sig joins them with "and";
/// exact duplicates collapse to one; anything else is a conflict.
pub fn combine_des<S: Scalar>(sig: &str, ndes: &[NormalizedDE<S>]) -> Combined<S> {
    assert!(!ndes.is_empty(), "combine_des needs at least one DE");
    let total = |list: &[&NormalizedDE<S>]| -> Combined<S> {
        match merge_basis(list) {
            Ok(basis) => {
                let mut min = S::zero();
                let mut max = S::zero();
                for nde in list {
                    min = min + nde.da_min.clone() * nde.af_per_day_min.clone();
                    max = max + nde.da_max.clone() * nde.af_per_day_max.clone();
                }
                Combined::Total { min, max, basis }
            }
            Err(why) => Combined::Conflict { why },
        }
    };
    let all: Vec<&NormalizedDE<S>> = ndes.iter().collect();
    if all.len() == 1 {
        return total(&all);
    }
    let distinct_timeframes = all.iter().all(|n| n.af_timeframe.is_some())
        && (1..all.len()).all(|i| (0..i).all(|j| all[i].af_timeframe != all[j].af_timeframe));
    let and_joined = all.windows(2).all(|w| {
        let gap_start = w[0].af_span.end.min(sig.len());
        let gap_end = w[1].da_span.start.min(sig.len());
        gap_start <= gap_end && AND_JOIN_RE.is_match(&sig[gap_start..gap_end])
    });
    if distinct_timeframes || and_joined {
        return total(&all);
    }
    let mut distinct: Vec<&NormalizedDE<S>> = Vec::new();
    for nde in &all {
        if !distinct.iter().any(|d| values_equal(d, nde)) {
            distinct.push(nde);
        }
    }
    if distinct.len() == 1 {
        return total(&distinct);
    }
    Combined::Conflict {
        why: format!(
            "{} dosage expressions disagree and are neither complementary nor duplicates",
            distinct.len()
        ),
    }
}

// ---------------------------------------------------------------------------
// Daily dosage pipeline
// ---------------------------------------------------------------------------

const UNQUANTIFIABLE_FORMS: &[&str] = &["cream", "gel", "ointment", "lotion", "paste", "foam"];
const DROP_FORMS: &[&str] = &["drop", "drops", "gtt"];

fn order_is_unquantifiable(order: &MedicationOrder) -> bool {
    let route = order.route.trim().to_lowercase();
    let form = order.form.trim().to_lowercase();
    route == "topical"
        || UNQUANTIFIABLE_FORMS.iter().any(|f| form.contains(f))
        || (route.contains("ophthalmic")
            && (form.contains("drop") || form.contains("solution") || form.contains("suspension")))
}

fn clause_bounds(sig: &str, span: &Span) -> (usize, usize) {
    let start = sig[..span.start.min(sig.len())]
        .rfind(['.', ';'])
        .map(|i| i + 1)
        .unwrap_or(0);
    let end = sig[span.end.min(sig.len())..]
        .find(['.', ';'])
        .map(|i| span.end + i)
        .unwrap_or(sig.len());
    (start, end)
}

/// Compute the per-ingredient min/max daily dosage for one medication order,
/// or a typed null. See the module docs for the rule order.
pub fn calculate_daily_dosage<S: Scalar>(
    order: &MedicationOrder,
    extraction: &ExtractionResult<S>,
    lexicon: &Lexicon<S>,
) -> DosageOutcome<S> {
    let sig = extraction.sig.as_str();
    let mut diagnostics: Vec<String> = extraction.notes.clone();
    let null = |reason: ReasonCode, mut diags: Vec<String>, note: String| {
        diags.push(note);
        DosageOutcome {
            resolution: Resolution::Null(reason),
            diagnostics: diags,
        }
    };

    // Not-meaningful and variable-dose markers outrank everything else.
    if let Some(m) = detect_one_time(sig) {
        return null(
            ReasonCode::NotMeaningfulOneTime,
            diagnostics,
            format!("one-time marker: {m}"),
        );
    }
    if let Some(m) = detect_pre_event(sig) {
        return null(
            ReasonCode::NotMeaningfulNonRoutine,
            diagnostics,
            format!("pre-event marker: {m}"),
        );
    }
    if let Some(m) = detect_variable_days(sig) {
        return null(
            ReasonCode::VariableDoseOverDays,
            diagnostics,
            format!("day-dependent schedule: {m}"),
        );
    }
    if let Some(m) = detect_prn(sig) {
        diagnostics.push(format!(
            "as-needed marker: {m}; dosage reflects the instructed amounts"
        ));
    }
    for d in &extraction.durations {
        diagnostics.push(format!(
            "duration {} noted; it bounds the course, not the daily rate",
            d.span
        ));
    }

    if extraction.des.is_empty() {
        let has_da = !extraction.das.is_empty();
        let has_af = !extraction.afs.is_empty();
        if !has_da && order_is_unquantifiable(order) {
            return null(
                ReasonCode::UnquantifiableForm,
                diagnostics,
                format!(
                    "no quantifiable dose for route {:?} / form {:?}",
                    order.route, order.form
                ),
            );
        }
        let (reason, note) = if has_da {
            (
                ReasonCode::NeedMoreInfoMissingFrequency,
                "dose without a usable frequency".to_string(),
            )
        } else if has_af {
            (
                ReasonCode::NeedMoreInfoMissingDose,
                "frequency without a usable dose".to_string(),
            )
        } else if extraction.basics.iter().any(|b| {
            matches!(
                b.entity_type,
                BasicEntityType::Form | BasicEntityType::Units
            )
        }) {
            (
                ReasonCode::NeedMoreInfoMissingDose,
                "formulation mentioned but no quantity found".to_string(),
            )
        } else {
            (
                ReasonCode::NeedMoreInfoUninformative,
                "no dosage entities found".to_string(),
            )
        };
        return null(reason, diagnostics, note);
    }

    // Leftovers next to real DEs mean the Sig says more than we understood.
    if let Some(&di) = extraction.unpaired_das.first() {
        return null(
            ReasonCode::NeedMoreInfoMissingFrequency,
            diagnostics,
            format!("dose {} has no paired frequency", extraction.das[di].span),
        );
    }
    let ndes: Vec<NormalizedDE<S>> = extraction
        .des
        .iter()
        .map(|de| normalize_de(&extraction.das[de.da], &extraction.afs[de.af]))
        .collect();
    for &ai in &extraction.unpaired_afs {
        let af = &extraction.afs[ai];
        let (af_min, af_max, _, _, _) = normalize_af(af);
        let (cs, ce) = clause_bounds(sig, &af.span);
        let is_prn_clause = prn_in_range(sig, cs, ce);
        let restates = ndes
            .iter()
            .any(|n| n.af_per_day_min == af_min && n.af_per_day_max == af_max);
        if is_prn_clause && restates {
            diagnostics.push(format!(
                "duplicate as-needed instruction {} ignored",
                af.span
            ));
        } else {
            return null(
                ReasonCode::NeedMoreInfoConflicting,
                diagnostics,
                format!(
                    "frequency {} has no dose and does not restate the instruction",
                    af.span
                ),
            );
        }
    }

    // Less than once a week: no meaningful daily average.
    let weekly = S::from_ratio(1, 7);
    if let Some(nde) = ndes.iter().find(|n| n.af_per_day_max < weekly) {
        return null(
            ReasonCode::SubWeeklyFrequency,
            diagnostics,
            format!("frequency {} is less than once a week", nde.af_span),
        );
    }

    // Creams, gels, eye drops: form counts do not translate to an amount.
    let form_based = ndes.iter().all(|n| !n.da_is_unit_based());
    if form_based {
        let da_form_unquantifiable = ndes.iter().any(|n| match &n.basis {
            DoseBasis::FormCount { form: Some(f) } => {
                DROP_FORMS.contains(&f.as_str()) || UNQUANTIFIABLE_FORMS.contains(&f.as_str())
            }
            _ => false,
        });
        if da_form_unquantifiable || order_is_unquantifiable(order) {
            return null(
                ReasonCode::UnquantifiableForm,
                diagnostics,
                format!(
                    "formulation (route {:?}, form {:?}) is not quantifiable",
                    order.route, order.form
                ),
            );
        }
    }

    let (count_min, mut count_max, basis) = match combine_des(sig, &ndes) {
        Combined::Total { min, max, basis } => (min, max, basis),
        Combined::Conflict { why } => {
            return null(ReasonCode::NeedMoreInfoConflicting, diagnostics, why);
        }
    };
    if ndes.len() > 1 {
        diagnostics.push(format!("combined {} dosage expressions", ndes.len()));
    }

    // Daily caps: count caps clamp before strength, amount caps after.
    // A cap whose unit does not line up with the dose basis (say a tab
    // count over an mg dose) is only reported, never guessed at.
    enum CapKind<S> {
        Count,
        Amount(S, String),
        Incompatible,
    }
    let mut amount_caps: Vec<(S, String)> = Vec::new();
    for cap in &extraction.caps {
        let kind = match &cap.unit_word {
            None => CapKind::Count,
            Some(w) if lexicon.is_form_word(w) || w == "dose" || w == "doses" => {
                if matches!(basis, DoseBasis::FormCount { .. }) {
                    CapKind::Count
                } else {
                    CapKind::Incompatible
                }
            }
            Some(w) => match crate::medorder::canonicalize_unit(cap.value.clone(), w, lexicon) {
                Ok((amount, unit)) => CapKind::Amount(amount, unit),
                Err(_) => CapKind::Incompatible,
            },
        };
        match kind {
            CapKind::Count => {
                if cap.value < count_min {
                    return null(
                        ReasonCode::NeedMoreInfoConflicting,
                        diagnostics,
                        format!("daily cap {} is below the instructed minimum", cap.span),
                    );
                }
                if cap.value < count_max {
                    count_max = cap.value.clone();
                    diagnostics.push(format!("daily cap {} lowered the maximum", cap.span));
                } else {
                    diagnostics.push(format!("daily cap {} already satisfied", cap.span));
                }
            }
            CapKind::Amount(amount, unit) => amount_caps.push((amount, unit)),
            CapKind::Incompatible => diagnostics.push(format!(
                "daily cap {} does not line up with the dose basis; not applied",
                cap.span
            )),
        }
    }

    // Ground the counts in the medication strength.
    let mut per_ingredient: Vec<IngredientDose<S>> = match &basis {
        DoseBasis::Amount { unit } => {
            match parse_strength::<S>(&order.strength_text, lexicon) {
                Ok(strength) => {
                    if strength.ingredients.len() == 1 && strength.ingredients[0].unit != *unit {
                        diagnostics.push(format!(
                            "dose unit {unit:?} differs from strength unit {:?}; no conversion applied",
                            strength.ingredients[0].unit
                        ));
                    }
                }
                Err(StrengthError::Empty) => {}
                Err(e) => diagnostics.push(format!("strength not used for unit-based dose ({e})")),
            }
            vec![IngredientDose {
                min_per_day: count_min,
                max_per_day: count_max,
                unit: unit.clone(),
            }]
        }
        DoseBasis::FormCount { form } => match parse_strength::<S>(&order.strength_text, lexicon) {
            Ok(strength) => {
                // A time-rate strength ("25 mcg/hr" patches) delivers
                // continuously; multiplying it per administration would be
                // wrong, so refuse rather than guess.
                const TIME_DENOMS: &[&str] =
                    &["hr", "hour", "hours", "h", "min", "minute", "day", "24hr"];
                if let Some(ing) = strength.ingredients.iter().find(|i| {
                    i.denominator
                        .as_deref()
                        .is_some_and(|d| TIME_DENOMS.contains(&d))
                }) {
                    return null(
                        ReasonCode::StrengthUnavailable,
                        diagnostics,
                        format!(
                            "strength {:?} is a rate per {}, not an amount per administration",
                            order.strength_text,
                            ing.denominator.as_deref().unwrap_or(""),
                        ),
                    );
                }
                strength
                    .ingredients
                    .iter()
                    .map(|ing| IngredientDose {
                        min_per_day: count_min.clone() * ing.amount.clone(),
                        max_per_day: count_max.clone() * ing.amount.clone(),
                        unit: ing.unit.clone(),
                    })
                    .collect()
            }
            Err(StrengthError::Empty) => {
                let form_name = form
                    .clone()
                    .or_else(|| {
                        let f = order.form.trim().to_lowercase();
                        if f.is_empty() {
                            None
                        } else {
                            Some(f)
                        }
                    })
                    .unwrap_or_else(|| "count".to_string());
                diagnostics.push("no strength available; reporting formulation counts".to_string());
                vec![IngredientDose {
                    min_per_day: count_min,
                    max_per_day: count_max,
                    unit: format!("form:{form_name}"),
                }]
            }
            Err(e) => {
                return null(
                    ReasonCode::StrengthUnavailable,
                    diagnostics,
                    format!("strength {:?} unusable: {e}", order.strength_text),
                );
            }
        },
    };

    for (amount, unit) in amount_caps {
        if per_ingredient.len() == 1 && per_ingredient[0].unit == unit {
            if amount < per_ingredient[0].min_per_day {
                return null(
                    ReasonCode::NeedMoreInfoConflicting,
                    diagnostics,
                    format!(
                        "daily cap {} {unit} is below the instructed minimum",
                        amount.decimal_string()
                    ),
                );
            }
            per_ingredient[0].max_per_day =
                smin(per_ingredient[0].max_per_day.clone(), amount.clone());
            diagnostics.push(format!(
                "daily cap {} {unit} applied",
                amount.decimal_string()
            ));
        } else {
            diagnostics.push(format!(
                "daily cap {} {unit} not applied (ingredient units do not line up)",
                amount.decimal_string()
            ));
        }
    }

    DosageOutcome {
        resolution: Resolution::Value(DailyDosage { per_ingredient }),
        diagnostics,
    }
}

/// Convenience wrapper: rule-based extraction plus calculation.
pub fn process_order<S: Scalar>(order: &MedicationOrder, lexicon: &Lexicon<S>) -> DosageOutcome<S> {
    let extraction = crate::extract::extract::<S>(&order.sig, lexicon);
    calculate_daily_dosage(order, &extraction, lexicon)
}
