//! Batch processing: stream input records through the pipeline.
//!
//! One output record per input record, in input order. A malformed record
//! becomes a `parse_failure` outcome and the batch keeps going; only I/O
//! failures abort. Memory use is bounded per record.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use thiserror::Error;

use crate::dosage::{calculate_daily_dosage, DosageOutcome};
use crate::eval::{score_end_to_end, EvalError, EvalReport, GtOutcome};
use crate::extract::{extract, extract_with_external, ExternalEntity, ExtractionResult};
use crate::lexicon::Lexicon;
use crate::records::{InputRecord, OutcomeRecord};
use crate::scalar::Scalar;

/// Which entity extractor feeds the pipeline.
#[derive(Debug, Clone, Copy)]
pub enum ExtractorChoice<'a> {
    Rules,
    External(&'a HashMap<String, Vec<ExternalEntity>>),
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum EvalBatchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("line {line}: record {order_id:?} has no ground-truth fields")]
    MissingGroundTruth { line: usize, order_id: String },
    #[error(transparent)]
    Scoring(#[from] EvalError),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct BatchSummary {
    pub records: usize,
    pub failures: usize,
}

/// Run one record through extraction and dosage calculation.
pub fn process_record<S: Scalar>(
    record: &InputRecord,
    lexicon: &Lexicon<S>,
    extractor: ExtractorChoice<'_>,
) -> (DosageOutcome<S>, Option<ExtractionResult<S>>) {
    let order = record.order();
    let extraction = match extractor {
        ExtractorChoice::Rules => extract(&order.sig, lexicon),
        ExtractorChoice::External(map) => {
            let entities = map.get(&record.order_id).map(Vec::as_slice).unwrap_or(&[]);
            match extract_with_external(&order.sig, entities, lexicon) {
                Ok(mut extraction) => {
                    if !map.contains_key(&record.order_id) {
                        extraction
                            .notes
                            .push("no external entities supplied for this order".into());
                    }
                    extraction
                }
                Err(e) => {
                    return (
                        DosageOutcome {
                            resolution: crate::dosage::Resolution::Null(
                                crate::dosage::ReasonCode::ParseFailure,
                            ),
                            diagnostics: vec![format!("external entities rejected: {e}")],
                        },
                        None,
                    );
                }
            }
        }
    };
    let outcome = calculate_daily_dosage(&order, &extraction, lexicon);
    (outcome, Some(extraction))
}

/// Stream records from `input`, invoking `sink` once per record in input
/// order. Per-record schema problems produce `parse_failure` outcomes.
pub fn run_batch<S: Scalar>(
    input: impl BufRead,
    lexicon: &Lexicon<S>,
    extractor: ExtractorChoice<'_>,
    mut sink: impl FnMut(OutcomeRecord) -> std::io::Result<()>,
) -> Result<BatchSummary, BatchError> {
    let mut summary = BatchSummary::default();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        summary.records += 1;
        match parse_record(&line) {
            Ok(record) => {
                let (outcome, _) = process_record(&record, lexicon, extractor);
                sink(OutcomeRecord::from_outcome(&record.order_id, &outcome))?;
            }
            Err(message) => {
                summary.failures += 1;
                let order_id = sniff_order_id(&line).unwrap_or_else(|| format!("line-{line_no}"));
                sink(OutcomeRecord::parse_failure(
                    &order_id,
                    format!("line {line_no}: {message}"),
                ))?;
            }
        }
    }
    Ok(summary)
}

fn parse_record(line: &str) -> Result<InputRecord, String> {
    let record: InputRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.sig.trim().is_empty() {
        return Err("record is missing a sig".into());
    }
    Ok(record)
}

/// Best-effort order id off a malformed line, for the failure outcome.
fn sniff_order_id(line: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    match value.get("order_id")? {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Everything the `eval` subcommand needs from one pass over the input.
#[derive(Debug)]
pub struct EvalRun<S> {
    pub report: EvalReport<S>,
    pub outcomes: Vec<OutcomeRecord>,
}

/// Run the pipeline over records that carry ground truth and score the
/// results. Unlike [`run_batch`], malformed records abort: scoring needs a
/// complete, keyed corpus.
pub fn eval_batch<S: Scalar>(
    input: impl BufRead,
    lexicon: &Lexicon<S>,
    extractor: ExtractorChoice<'_>,
) -> Result<EvalRun<S>, EvalBatchError> {
    let mut predictions: BTreeMap<String, DosageOutcome<S>> = BTreeMap::new();
    let mut ground_truth: BTreeMap<String, GtOutcome<S>> = BTreeMap::new();
    let mut outcomes = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line).map_err(|message| EvalBatchError::BadRecord {
            line: line_no,
            message,
        })?;
        let gt = record
            .ground_truth::<S>()
            .map_err(|message| EvalBatchError::BadRecord {
                line: line_no,
                message,
            })?
            .ok_or_else(|| EvalBatchError::MissingGroundTruth {
                line: line_no,
                order_id: record.order_id.clone(),
            })?;
        let (outcome, _) = process_record(&record, lexicon, extractor);
        outcomes.push(OutcomeRecord::from_outcome(&record.order_id, &outcome));
        predictions.insert(record.order_id.clone(), outcome);
        ground_truth.insert(record.order_id.clone(), gt);
    }
    let report = score_end_to_end(&predictions, &ground_truth, lexicon)?;
    Ok(EvalRun { report, outcomes })
}
