//! Rendering: machine-format JSON lines and human-readable tables.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::eval::{EntityLevel, EvalReport};
use crate::extract::CompoundKind;
use crate::records::OutcomeRecord;
use crate::scalar::Scalar;

/// One outcome as a machine-format line.
pub fn outcome_jsonl(record: &OutcomeRecord) -> String {
    serde_json::to_string(record).expect("outcome records always serialize")
}

fn format_dosage(record: &OutcomeRecord) -> String {
    record
        .daily_dosage
        .iter()
        .map(|d| {
            if d.min == d.max {
                format!("{} {}", d.max, d.unit)
            } else {
                format!("{}-{} {}", d.min, d.max, d.unit)
            }
        })
        .collect::<Vec<_>>()
        .join(" / ")
}

/// Aligned outcome table with a null-reason histogram underneath.
pub fn outcomes_table(records: &[OutcomeRecord]) -> String {
    let mut rows: Vec<[String; 3]> =
        vec![["order_id".into(), "daily dosage".into(), "reason".into()]];
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let dosage = if r.status == "value" {
            format_dosage(r)
        } else {
            "-".to_string()
        };
        let reason = r.null_reason.clone().unwrap_or_else(|| "-".to_string());
        if let Some(reason) = &r.null_reason {
            *histogram.entry(reason.clone()).or_default() += 1;
        }
        rows.push([r.order_id.clone(), dosage, reason]);
    }
    let widths: Vec<usize> = (0..3)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{:<w0$}  {:<w1$}  {:<w2$}\n",
            row[0],
            row[1],
            row[2],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        ));
        if i == 0 {
            out.push_str(&format!(
                "{}\n",
                "-".repeat(widths.iter().sum::<usize>() + 4)
            ));
        }
    }
    let nulls: usize = histogram.values().sum();
    out.push_str(&format!(
        "\n{} records, {} with a value, {} null\n",
        records.len(),
        records.len() - nulls,
        nulls
    ));
    if !histogram.is_empty() {
        out.push_str("null reasons:\n");
        for (reason, count) in &histogram {
            out.push_str(&format!("  {reason:<24} {count}\n"));
        }
    }
    out
}

#[derive(Serialize)]
struct EvalReportOut {
    n_correct: usize,
    n_incorrect: usize,
    n_missed: usize,
    n_spurious: usize,
    n_both_null: usize,
    precision: String,
    recall: String,
    f1: String,
    accuracy: String,
}

/// Machine form of an evaluation report (one JSON line; metrics are exact
/// decimal strings).
pub fn eval_jsonl<S: Scalar>(report: &EvalReport<S>) -> String {
    let out = EvalReportOut {
        n_correct: report.n_correct,
        n_incorrect: report.n_incorrect,
        n_missed: report.n_missed,
        n_spurious: report.n_spurious,
        n_both_null: report.n_both_null,
        precision: report.precision.decimal_string(),
        recall: report.recall.decimal_string(),
        f1: report.f1.decimal_string(),
        accuracy: report.accuracy.decimal_string(),
    };
    serde_json::to_string(&out).expect("eval reports always serialize")
}

fn approx<S: Scalar>(v: &S) -> String {
    match v.to_f64() {
        Some(f) => format!("{f:.4}"),
        None => v.decimal_string(),
    }
}

/// Human-readable evaluation table: the confusion cells plus the metrics.
pub fn eval_table<S: Scalar>(report: &EvalReport<S>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16}{:>16}{:>18}{:>14}\n",
        "", "system correct", "system incorrect", "system null"
    ));
    out.push_str(&format!(
        "{:<16}{:>16}{:>18}{:>14}\n",
        "expert value", report.n_correct, report.n_incorrect, report.n_missed
    ));
    out.push_str(&format!(
        "{:<16}{:>16}{:>18}{:>14}\n",
        "expert null", "-", report.n_spurious, report.n_both_null
    ));
    out.push_str(&format!(
        "{:<16}{:>16}\n\n",
        "total records",
        report.total()
    ));
    out.push_str(&format!(
        "precision {} ({})\nrecall    {} ({})\nf1        {} ({})\naccuracy  {} ({})\n",
        approx(&report.precision),
        report.precision.decimal_string(),
        approx(&report.recall),
        report.recall.decimal_string(),
        approx(&report.f1),
        report.f1.decimal_string(),
        approx(&report.accuracy),
        report.accuracy.decimal_string(),
    ));
    out
}

fn kind_name(kind: CompoundKind) -> &'static str {
    match kind {
        CompoundKind::DosagePerAdministration => "DosagePerAdministration",
        CompoundKind::AdministrationFrequency => "AdministrationFrequency",
        CompoundKind::DosageExpression => "DosageExpression",
    }
}

#[derive(Serialize)]
struct EntityScoreOut {
    kind: &'static str,
    tp: usize,
    fp: usize,
    r#fn: usize,
    precision: String,
    recall: String,
    f1: String,
}

pub fn entity_jsonl<S: Scalar>(level: &EntityLevel<S>) -> String {
    let rows: Vec<EntityScoreOut> = level
        .per_kind
        .iter()
        .map(|s| EntityScoreOut {
            kind: kind_name(s.kind),
            tp: s.tp,
            fp: s.fp,
            r#fn: s.fn_,
            precision: s.precision.decimal_string(),
            recall: s.recall.decimal_string(),
            f1: s.f1.decimal_string(),
        })
        .collect();
    serde_json::to_string(&rows).expect("entity scores always serialize")
}

pub fn entity_table<S: Scalar>(level: &EntityLevel<S>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<26}{:>6}{:>6}{:>6}{:>12}{:>9}{:>9}\n",
        "entity", "tp", "fp", "fn", "precision", "recall", "f1"
    ));
    for s in &level.per_kind {
        out.push_str(&format!(
            "{:<26}{:>6}{:>6}{:>6}{:>12}{:>9}{:>9}\n",
            kind_name(s.kind),
            s.tp,
            s.fp,
            s.fn_,
            approx(&s.precision),
            approx(&s.recall),
            approx(&s.f1),
        ));
    }
    out
}
