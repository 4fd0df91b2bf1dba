//! Line-delimited record schemas for the batch CLI.
//!
//! Input records mirror the structured medication-order columns plus
//! optional ground-truth fields for scoring:
//!
//! ```json
//! {"order_id":"1","sig":"1/2 tab bid","strength":"2 mg","route":"Oral","form":"tablet",
//!  "gt_max_dd":["2"],"gt_unit":["mg"]}
//! ```
//!
//! Dosage values are strings ("7.5", "5/7") so exact rationals survive the
//! trip; plain JSON numbers are accepted too. External-extractor files carry
//! one record per Sig: `{"order_id":"1","entities":[{"label":"Dosage",
//! "start":0,"end":3}]}` with byte offsets into the Sig.

use std::collections::HashMap;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dosage::{DosageOutcome, IngredientDose, Resolution};
use crate::eval::GtOutcome;
use crate::extract::{ExternalEntity, ExternalLabel};
use crate::medorder::MedicationOrder;
use crate::scalar::{parse_scalar, Scalar};

/// A JSON field that may be a number or a string; kept as text so rational
/// values parse exactly.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumField {
    Num(serde_json::Number),
    Str(String),
}

impl NumField {
    pub fn as_text(&self) -> String {
        match self {
            NumField::Num(n) => n.to_string(),
            NumField::Str(s) => s.clone(),
        }
    }
}

/// `[start, end]` or a list of pairs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SpanField {
    One([usize; 2]),
    Many(Vec<[usize; 2]>),
}

impl SpanField {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match self {
            SpanField::One([s, e]) => vec![(*s, *e)],
            SpanField::Many(v) => v.iter().map(|[s, e]| (*s, *e)).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct InputRecord {
    pub order_id: String,
    pub sig: String,
    #[serde(default)]
    pub strength: String,
    #[serde(default)]
    pub route: String,
    #[serde(default)]
    pub form: String,
    #[serde(default)]
    pub gt_min_dd: Option<Vec<NumField>>,
    #[serde(default)]
    pub gt_max_dd: Option<Vec<NumField>>,
    #[serde(default)]
    pub gt_unit: Option<Vec<String>>,
    #[serde(default)]
    pub gt_no_dd_reason: Option<String>,
    #[serde(default)]
    pub gt_da_span: Option<SpanField>,
    #[serde(default)]
    pub gt_af_span: Option<SpanField>,
}

impl InputRecord {
    pub fn order(&self) -> MedicationOrder {
        MedicationOrder {
            order_id: self.order_id.clone(),
            sig: self.sig.clone(),
            strength_text: self.strength.clone(),
            route: self.route.clone(),
            form: self.form.clone(),
        }
    }

    /// Ground truth embedded in the record, if any. A record may carry
    /// either dosage values or a no-dosage reason, never both.
    pub fn ground_truth<S: Scalar>(&self) -> Result<Option<GtOutcome<S>>, String> {
        let has_values = self.gt_max_dd.is_some();
        if let Some(reason) = &self.gt_no_dd_reason {
            if has_values {
                return Err("record carries both gt_max_dd and gt_no_dd_reason".into());
            }
            return Ok(Some(GtOutcome::Null {
                reason: Some(reason.clone()),
            }));
        }
        let Some(max_dd) = &self.gt_max_dd else {
            return Ok(None);
        };
        let units = self.gt_unit.as_ref().ok_or("gt_max_dd requires gt_unit")?;
        if units.len() != max_dd.len() {
            return Err("gt_unit and gt_max_dd lengths differ".into());
        }
        let min_dd = match &self.gt_min_dd {
            Some(v) => {
                if v.len() != max_dd.len() {
                    return Err("gt_min_dd and gt_max_dd lengths differ".into());
                }
                Some(v)
            }
            None => None,
        };
        let mut doses = Vec::with_capacity(max_dd.len());
        for (i, max_field) in max_dd.iter().enumerate() {
            let max: S = parse_scalar(&max_field.as_text())
                .ok_or_else(|| format!("unparseable gt_max_dd value {:?}", max_field.as_text()))?;
            let min: S = match min_dd {
                Some(v) => parse_scalar(&v[i].as_text())
                    .ok_or_else(|| format!("unparseable gt_min_dd value {:?}", v[i].as_text()))?,
                None => max.clone(),
            };
            if max < min {
                return Err("gt_min_dd exceeds gt_max_dd".into());
            }
            doses.push(IngredientDose {
                min_per_day: min,
                max_per_day: max,
                unit: units[i].clone(),
            });
        }
        Ok(Some(GtOutcome::Value(doses)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngredientOut {
    pub min: String,
    pub max: String,
    pub unit: String,
}

/// One machine-format output record. Field order is fixed so identical
/// inputs serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub order_id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub daily_dosage: Vec<IngredientOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl OutcomeRecord {
    pub fn from_outcome<S: Scalar>(order_id: &str, outcome: &DosageOutcome<S>) -> Self {
        match &outcome.resolution {
            Resolution::Value(dd) => OutcomeRecord {
                order_id: order_id.to_string(),
                status: "value".into(),
                daily_dosage: dd
                    .per_ingredient
                    .iter()
                    .map(|d| IngredientOut {
                        min: d.min_per_day.decimal_string(),
                        max: d.max_per_day.decimal_string(),
                        unit: d.unit.clone(),
                    })
                    .collect(),
                null_reason: None,
                diagnostics: outcome.diagnostics.clone(),
            },
            Resolution::Null(reason) => OutcomeRecord {
                order_id: order_id.to_string(),
                status: "null".into(),
                daily_dosage: vec![],
                null_reason: Some(reason.label().to_string()),
                diagnostics: outcome.diagnostics.clone(),
            },
        }
    }

    pub fn parse_failure(order_id: &str, diagnostic: String) -> Self {
        OutcomeRecord {
            order_id: order_id.to_string(),
            status: "null".into(),
            daily_dosage: vec![],
            null_reason: Some(crate::dosage::ReasonCode::ParseFailure.label().to_string()),
            diagnostics: vec![diagnostic],
        }
    }
}

// ---------------------------------------------------------------------------
// External entity files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ExternalRecord {
    order_id: String,
    entities: Vec<ExternalEntityRecord>,
}

#[derive(Debug, Deserialize)]
struct ExternalEntityRecord {
    label: String,
    start: usize,
    end: usize,
}

#[derive(Debug, Error)]
pub enum ExternalFileError {
    #[error("external entities line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("external entities line {line}: duplicate order_id {order_id:?}")]
    DuplicateOrder { line: usize, order_id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Load a line-delimited external-entity file into an order_id → entities
/// map. Unknown labels and duplicate ids are load errors.
pub fn load_external_entities(
    reader: impl BufRead,
) -> Result<HashMap<String, Vec<ExternalEntity>>, ExternalFileError> {
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExternalRecord =
            serde_json::from_str(&line).map_err(|e| ExternalFileError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        let mut entities = Vec::with_capacity(record.entities.len());
        for e in record.entities {
            let label =
                ExternalLabel::from_str(&e.label).map_err(|_| ExternalFileError::Malformed {
                    line: line_no,
                    message: format!("unknown entity label {:?}", e.label),
                })?;
            entities.push(ExternalEntity {
                label,
                start: e.start,
                end: e.end,
            });
        }
        if map.insert(record.order_id.clone(), entities).is_some() {
            return Err(ExternalFileError::DuplicateOrder {
                line: line_no,
                order_id: record.order_id,
            });
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    #[test]
    fn parses_minimal_and_full_records() {
        let rec: InputRecord =
            serde_json::from_str(r#"{"order_id":"1","sig":"1/2 tab bid"}"#).unwrap();
        assert_eq!(rec.order().sig, "1/2 tab bid");
        assert!(rec.ground_truth::<Rational>().unwrap().is_none());

        let rec: InputRecord = serde_json::from_str(
            r#"{"order_id":"2","sig":"x","strength":"2 mg","gt_max_dd":["2"],"gt_unit":["mg"]}"#,
        )
        .unwrap();
        match rec.ground_truth::<Rational>().unwrap().unwrap() {
            GtOutcome::Value(doses) => {
                assert_eq!(doses.len(), 1);
                assert_eq!(doses[0].min_per_day, Rational::from_int(2));
                assert_eq!(doses[0].max_per_day, Rational::from_int(2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gt_exclusivity_is_enforced() {
        let rec: InputRecord = serde_json::from_str(
            r#"{"order_id":"3","sig":"x","gt_max_dd":["2"],"gt_unit":["mg"],"gt_no_dd_reason":"uninformative"}"#,
        )
        .unwrap();
        assert!(rec.ground_truth::<Rational>().is_err());
    }

    #[test]
    fn numbers_or_strings_both_parse() {
        let rec: InputRecord = serde_json::from_str(
            r#"{"order_id":"4","sig":"x","gt_min_dd":[7.5],"gt_max_dd":[15],"gt_unit":["mg"]}"#,
        )
        .unwrap();
        match rec.ground_truth::<Rational>().unwrap().unwrap() {
            GtOutcome::Value(doses) => {
                assert_eq!(doses[0].min_per_day, Rational::from_ratio(15, 2));
                assert_eq!(doses[0].max_per_day, Rational::from_int(15));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn external_file_round_trip_and_errors() {
        let data = r#"{"order_id":"a","entities":[{"label":"Dosage","start":0,"end":3},{"label":"n2c2_Form","start":4,"end":10}]}"#;
        let map = load_external_entities(data.as_bytes()).unwrap();
        assert_eq!(map["a"].len(), 2);
        assert_eq!(map["a"][1].label, ExternalLabel::Form);

        let bad = r#"{"order_id":"a","entities":[{"label":"Banana","start":0,"end":3}]}"#;
        assert!(matches!(
            load_external_entities(bad.as_bytes()),
            Err(ExternalFileError::Malformed { line: 1, .. })
        ));

        let dup = format!("{data}\n{data}");
        assert!(matches!(
            load_external_entities(dup.as_bytes()),
            Err(ExternalFileError::DuplicateOrder { line: 2, .. })
        ));
    }
}
