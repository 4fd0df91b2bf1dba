//! Acceptance suite. One test per criterion; each prints a pass line so the
//! whole gate is auditable with `cargo test --test acceptance -- --nocapture`.

// Table-driven test data reads best as plain tuples.
#![allow(clippy::type_complexity)]

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use sigdose::dosage::{process_order, DosageOutcome, ReasonCode};
use sigdose::eval::EvalReport;
use sigdose::extract::extract;
use sigdose::lexicon::Lexicon;
use sigdose::medorder::MedicationOrder;
use sigdose::scalar::{parse_scalar, Scalar};
use sigdose::Rational;

fn rat(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn dec(text: &str) -> Rational {
    parse_scalar(text).unwrap_or_else(|| panic!("bad literal {text:?}"))
}

fn lex() -> Lexicon<Rational> {
    Lexicon::builtin()
}

fn order(sig: &str, strength: &str, route: &str, form: &str) -> MedicationOrder {
    MedicationOrder {
        order_id: "t".into(),
        sig: sig.into(),
        strength_text: strength.into(),
        route: route.into(),
        form: form.into(),
    }
}

fn run(sig: &str, strength: &str, route: &str, form: &str) -> DosageOutcome<Rational> {
    process_order(&order(sig, strength, route, form), &lex())
}

fn assert_value(out: &DosageOutcome<Rational>, expected: &[(Rational, Rational, &str)], ctx: &str) {
    let dd = out
        .value()
        .unwrap_or_else(|| panic!("{ctx}: expected a value, got {:?}", out.resolution));
    assert_eq!(
        dd.per_ingredient.len(),
        expected.len(),
        "{ctx}: ingredient count"
    );
    for (got, want) in dd.per_ingredient.iter().zip(expected) {
        assert_eq!(got.min_per_day, want.0, "{ctx}: min");
        assert_eq!(got.max_per_day, want.1, "{ctx}: max");
        assert_eq!(got.unit, want.2, "{ctx}: unit");
    }
}

/// The golden corpus: every worked Sig/strength pair with a published
/// result, reproduced with exact rational equality.
#[test]
fn criterion_1_golden_corpus() {
    let started = Instant::now();

    let value_cases: &[(&str, &str, &str, &str, &[(&str, &str, &str)])] = &[
        (
            "Take two tablets twice daily",
            "50mg",
            "Oral",
            "tablet",
            &[("200", "200", "mg")],
        ),
        (
            "Take one tab in am and two tabs in pm",
            "50mg",
            "Oral",
            "tablet",
            &[("150", "150", "mg")],
        ),
        ("1/2 tab bid", "2 mg", "Oral", "tablet", &[("2", "2", "mg")]),
        (
            "Take one(1) inhalation twice daily",
            "250-50 mcg/dose",
            "Inhalation",
            "disk with device",
            &[("500", "500", "mcg"), ("100", "100", "mcg")],
        ),
        (
            "one to two tablets daily",
            "7.5 mg",
            "Oral",
            "tablet",
            &[("7.5", "15", "mg")],
        ),
        (
            "1 tab po q week",
            "7 mg",
            "Oral",
            "tablet",
            &[("1", "1", "mg")],
        ),
        (
            "Take 1-2 tablets by mouth every 6 hours as needed for Pain (max = 6 tabs/day).",
            "500 mg",
            "Oral",
            "tablet",
            &[("2000", "3000", "mg")],
        ),
    ];
    for (sig, strength, route, form, expected) in value_cases {
        let expected: Vec<(Rational, Rational, &str)> = expected
            .iter()
            .map(|(lo, hi, unit)| (dec(lo), dec(hi), *unit))
            .collect();
        assert_value(&run(sig, strength, route, form), &expected, sig);
    }

    let null_cases: &[(&str, &str, &str, &str, ReasonCode)] = &[
        ("Take as directed.", "10 mg", "Oral", "tablet", ReasonCode::NeedMoreInfoUninformative),
        ("Take 1 tablet by mouth.", "10 mg", "Oral", "tablet", ReasonCode::NeedMoreInfoMissingFrequency),
        (
            "Take 0.25 tablets by mouth once daily. TAKE ONE HALF (0.5) OF A  TABLET DAILY.",
            "10 mg",
            "Oral",
            "tablet",
            ReasonCode::NeedMoreInfoConflicting,
        ),
        (
            "Take one and half (1.5) tablets twice daily (weeks 1-4); Take one and half (1.5) tablet in AM and two(2) tablet in PM (week 5); Take two(2) tablets twice daily from week 6 onwards.",
            "10 mg",
            "Oral",
            "tablet",
            ReasonCode::VariableDoseOverDays,
        ),
        (
            "Take 6 tab day1, 5 tab day 2, 4 tab day3 , 3 tab day 4, 2 tab day 5, 1 tab day 6.",
            "10 mg",
            "Oral",
            "tablet",
            ReasonCode::VariableDoseOverDays,
        ),
        (
            "Take 4 pills by mouth one hour prior to the procedure.",
            "10 mg",
            "Oral",
            "tablet",
            ReasonCode::NotMeaningfulNonRoutine,
        ),
        ("Take 1 tablet by mouth one time only.", "10 mg", "Oral", "tablet", ReasonCode::NotMeaningfulOneTime),
        ("1000mcg IM monthly", "1000 mcg", "Intramuscular", "vial", ReasonCode::SubWeeklyFrequency),
    ];
    for (sig, strength, route, form, reason) in null_cases {
        let out = run(sig, strength, route, form);
        assert_eq!(out.null_reason(), Some(*reason), "{sig}");
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "golden corpus took {elapsed:?}"
    );
    println!(
        "criterion 1 (golden corpus, {} sigs, {elapsed:?}): pass",
        value_cases.len() + null_cases.len()
    );
}

/// Feeding the published confusion cells through the scoring formulas
/// reproduces the published accuracy and precision; recall is asserted as
/// computed from the stated counting rules.
#[test]
fn criterion_2_metrics_oracle() {
    let report = EvalReport::<Rational>::from_counts(800, 7, 23, 8, 162);
    assert_eq!(
        report.accuracy,
        rat(962, 1000),
        "accuracy must be exactly 0.962"
    );
    let expected_precision = rat(800, 815);
    let tolerance = rat(1, 1_000_000_000);
    assert!(
        report.precision >= expected_precision.clone() - tolerance.clone()
            && report.precision <= expected_precision + tolerance,
        "precision {:?} not within 1e-9 of 800/815",
        report.precision
    );
    // Recall under these counting rules is 800/830 ≈ 0.9639; summaries that
    // round differently are not reverse-engineered here.
    assert_eq!(report.recall, rat(800, 830));
    assert_eq!(report.total(), 1000);
    println!("criterion 2 (metrics oracle): pass");
}

/// Weekly dosing averages exactly: DD = weekly total ÷ 7.
#[test]
fn criterion_3_weekly_averaging() {
    let lexicon = lex();
    let das: &[&str] = &["1", "2", "3", "4", "5", "1/2", "1-2", "2-4", "10", "7"];
    let strengths: &[(&str, &str)] = &[
        ("7 mg", "7"),
        ("50mg", "50"),
        ("7.5 mg", "7.5"),
        ("2 mg", "2"),
        ("70 mg", "70"),
    ];
    let templates: &[fn(&str) -> String] = &[
        |da| format!("take {da} tab po q week"),
        |da| format!("{da} tablets weekly"),
        |da| format!("Take {da} tab every week"),
    ];
    let mut cases = 0;
    for da in das {
        let (da_min, da_max) = sigdose::lexicon::parse_numeric_token::<Rational>(da).unwrap();
        for (strength, amount) in strengths {
            let amount = dec(amount);
            for template in templates {
                let sig = template(da);
                let out = process_order(&order(&sig, strength, "Oral", "tablet"), &lexicon);
                let weekly_total_min = da_min.clone() * amount.clone();
                let weekly_total_max = da_max.clone() * amount.clone();
                let seven = rat(7, 1);
                assert_value(
                    &out,
                    &[(
                        weekly_total_min / seven.clone(),
                        weekly_total_max / seven,
                        "mg",
                    )],
                    &sig,
                );
                cases += 1;
            }
        }
    }
    assert!(cases >= 100, "only {cases} weekly cases generated");
    println!("criterion 3 (weekly averaging, {cases} sigs): pass");
}

fn scale_strength(text: &str, k: &Rational, lexicon: &Lexicon<Rational>) -> String {
    let mut strength = sigdose::parse_strength::<Rational>(text, lexicon).unwrap();
    for ing in &mut strength.ingredients {
        ing.amount = ing.amount.clone() * k.clone();
    }
    strength.to_string()
}

/// Scaling every ingredient amount by k scales both bounds by exactly k and
/// never flips a value outcome to null or back.
#[test]
fn criterion_4_strength_linearity() {
    let lexicon = lex();
    let das: &[&str] = &["1", "2", "3", "1/2", "1-2", "2-4", "one", "two"];
    let afs: &[&str] = &[
        "daily",
        "bid",
        "twice daily",
        "every 6 hours",
        "q week",
        "tid",
        "every other day",
    ];
    let strengths: &[&str] = &["50 mg", "7.5 mg", "250-50 mcg", "2 mg"];
    let ks: &[Rational] = &[rat(2, 1), rat(10, 1), rat(1, 2)];
    let mut cases = 0;
    let mut sigs: Vec<String> = Vec::new();
    for da in das {
        for af in afs {
            sigs.push(format!("take {da} tab po {af}"));
        }
    }
    // A few null-producing Sigs: scaling must not change the outcome kind.
    sigs.push("take 2 tabs".into());
    sigs.push("Take as directed.".into());
    for sig in &sigs {
        for strength in strengths {
            let base = process_order(&order(sig, strength, "Oral", "tablet"), &lexicon);
            for k in ks {
                let scaled_text = scale_strength(strength, k, &lexicon);
                let scaled = process_order(&order(sig, &scaled_text, "Oral", "tablet"), &lexicon);
                match (base.value(), scaled.value()) {
                    (Some(b), Some(s)) => {
                        assert_eq!(
                            b.per_ingredient.len(),
                            s.per_ingredient.len(),
                            "{sig} / {strength} × {k}"
                        );
                        for (bi, si) in b.per_ingredient.iter().zip(&s.per_ingredient) {
                            assert_eq!(
                                si.min_per_day,
                                bi.min_per_day.clone() * k.clone(),
                                "{sig} / {strength} × {k}: min"
                            );
                            assert_eq!(
                                si.max_per_day,
                                bi.max_per_day.clone() * k.clone(),
                                "{sig} / {strength} × {k}: max"
                            );
                            assert_eq!(si.unit, bi.unit, "{sig} / {strength} × {k}: unit");
                        }
                    }
                    (None, None) => {
                        assert_eq!(
                            base.null_reason(),
                            scaled.null_reason(),
                            "{sig} / {strength} × {k}"
                        );
                    }
                    _ => panic!("{sig} / {strength} × {k}: value-vs-null status changed"),
                }
                cases += 1;
            }
        }
    }
    assert!(cases >= 200, "only {cases} linearity cases generated");
    println!("criterion 4 (strength linearity, {cases} cases): pass");
}

/// Pipeline min/max equals an independent corner-enumeration oracle over the
/// small dose/frequency grammar.
#[test]
fn criterion_5_range_corners() {
    let lexicon = lex();
    let das: &[(&str, (i64, i64), (i64, i64))] = &[
        ("1", (1, 1), (1, 1)),
        ("1/2", (1, 2), (1, 2)),
        ("1-2", (1, 1), (2, 1)),
        ("2", (2, 1), (2, 1)),
    ];
    let afs: &[(&str, (i64, i64), (i64, i64))] = &[
        ("daily", (1, 1), (1, 1)),
        ("bid", (2, 1), (2, 1)),
        ("twice daily", (2, 1), (2, 1)),
        ("q week", (1, 7), (1, 7)),
        ("every 4-6 hours", (4, 1), (6, 1)),
    ];
    let strengths: &[(&str, &[&str])] = &[
        ("50mg", &["50"]),
        ("7.5 mg", &["7.5"]),
        ("2 mg", &["2"]),
        ("250-50 mcg/dose", &["250", "50"]),
        ("0.125 mg", &["0.125"]),
    ];
    let templates: &[fn(&str, &str) -> String] = &[
        |da, af| format!("take {da} tab po {af}"),
        |da, af| format!("{da} tabs {af}"),
        |da, af| format!("Take {da} tablet by mouth {af}."),
        |da, af| format!("take {da} tab {af}"),
        |da, af| format!("{da} tablet po {af}"),
    ];
    let mut cases = 0;
    for (da_text, da_lo, da_hi) in das {
        for (af_text, af_lo, af_hi) in afs {
            for (strength_text, amounts) in strengths {
                for template in templates {
                    let sig = template(da_text, af_text);
                    let out =
                        process_order(&order(&sig, strength_text, "Oral", "tablet"), &lexicon);
                    // Independent oracle: corner products per ingredient.
                    let expected: Vec<(Rational, Rational, &str)> = amounts
                        .iter()
                        .map(|amt| {
                            let amt = dec(amt);
                            let unit = if strength_text.contains("mcg") {
                                "mcg"
                            } else {
                                "mg"
                            };
                            (
                                rat(da_lo.0, da_lo.1) * rat(af_lo.0, af_lo.1) * amt.clone(),
                                rat(da_hi.0, da_hi.1) * rat(af_hi.0, af_hi.1) * amt,
                                unit,
                            )
                        })
                        .collect();
                    assert_value(&out, &expected, &sig);
                    cases += 1;
                }
            }
        }
    }
    assert!(cases >= 500, "only {cases} corner cases generated");
    println!("criterion 5 (range corners vs oracle, {cases} cases): pass");
}

/// A two-DE am/pm Sig equals the sum of its single-DE halves.
#[test]
fn criterion_6_additivity() {
    let lexicon = lex();
    let values: &[&str] = &["1", "2", "3", "1/2", "1-2"];
    let strengths: &[&str] = &["50mg", "7.5 mg", "250-50 mcg", "2 mg"];
    let mut cases = 0;
    for a in values {
        for b in values {
            for strength in strengths {
                let combined_sig = format!("take {a} tab in am and {b} tabs in pm");
                let combined =
                    process_order(&order(&combined_sig, strength, "Oral", "tablet"), &lexicon);
                let only_a = process_order(
                    &order(&format!("take {a} tab in am"), strength, "Oral", "tablet"),
                    &lexicon,
                );
                let only_b = process_order(
                    &order(&format!("take {b} tabs in pm"), strength, "Oral", "tablet"),
                    &lexicon,
                );
                let combined = combined
                    .value()
                    .unwrap_or_else(|| panic!("{combined_sig}: null"));
                let only_a = only_a.value().unwrap();
                let only_b = only_b.value().unwrap();
                assert_eq!(combined.per_ingredient.len(), only_a.per_ingredient.len());
                for i in 0..combined.per_ingredient.len() {
                    assert_eq!(
                        combined.per_ingredient[i].min_per_day,
                        only_a.per_ingredient[i].min_per_day.clone()
                            + only_b.per_ingredient[i].min_per_day.clone(),
                        "{combined_sig} / {strength}: min"
                    );
                    assert_eq!(
                        combined.per_ingredient[i].max_per_day,
                        only_a.per_ingredient[i].max_per_day.clone()
                            + only_b.per_ingredient[i].max_per_day.clone(),
                        "{combined_sig} / {strength}: max"
                    );
                }
                cases += 1;
            }
        }
    }
    assert!(cases >= 100, "only {cases} additivity cases generated");
    println!("criterion 6 (am/pm additivity, {cases} sigs): pass");
}

/// Every span indexes a real substring equal to its text, DE nesting and
/// pairing conservation hold, and no input crashes the pipeline.
#[test]
fn criterion_7_span_integrity_and_fuzz() {
    let lexicon = lex();
    let golden: &[&str] = &[
        "Take two tablets twice daily",
        "Take one tab in am and two tabs in pm",
        "1/2 tab bid",
        "Take one(1) inhalation twice daily",
        "one to two tablets daily",
        "1 tab po q week",
        "Take 1-2 tablets by mouth every 6 hours as needed for Pain (max = 6 tabs/day).",
        "Take as directed.",
        "Take 1 tablet by mouth.",
        "Take 0.25 tablets by mouth once daily. TAKE ONE HALF (0.5) OF A  TABLET DAILY.",
        "Take one and half (1.5) tablets twice daily (weeks 1-4); Take one and half (1.5) tablet in AM and two(2) tablet in PM (week 5); Take two(2) tablets twice daily from week 6 onwards.",
        "Take 6 tab day1, 5 tab day 2, 4 tab day3 , 3 tab day 4, 2 tab day 5, 1 tab day 6.",
        "Take 4 pills by mouth one hour prior to the procedure.",
        "Take 1 tablet by mouth one time only.",
        "1000mcg IM monthly",
    ];
    for sig in golden {
        let result = extract(sig, &lexicon);
        result.validate().unwrap_or_else(|e| panic!("{sig}: {e}"));
        // The calculation must also accept every extraction.
        let _ = sigdose::calculate_daily_dosage(
            &order(sig, "10 mg", "Oral", "tablet"),
            &result,
            &lexicon,
        );
    }

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = proptest::string::string_regex(".{0,80}").unwrap();
    runner
        .run(&strategy, |sig| {
            let result = extract(&sig, &lexicon);
            result
                .validate()
                .map_err(|e| TestCaseError::fail(format!("{sig:?}: {e}")))?;
            let _ = sigdose::calculate_daily_dosage(
                &order(&sig, "10 mg", "Oral", "tablet"),
                &result,
                &lexicon,
            );
            Ok(())
        })
        .unwrap();
    println!(
        "criterion 7 (span integrity: {} golden + 1000 fuzzed): pass",
        golden.len()
    );
}

/// Byte offsets of the `occurrence`-th appearance of `needle` in `sig`.
fn pos(sig: &str, needle: &str, occurrence: usize) -> (usize, usize) {
    let mut from = 0;
    let mut count = 0;
    while let Some(at) = sig[from..].find(needle) {
        let start = from + at;
        if count == occurrence {
            return (start, start + needle.len());
        }
        count += 1;
        from = start + needle.len();
    }
    panic!("occurrence {occurrence} of {needle:?} not found in {sig:?}")
}

/// Hand-written external-entity files for ten golden Sigs, routed through
/// `--extractor external`, produce the same outcomes as the rule-based path.
#[test]
fn criterion_8_extractor_seam_equivalence() {
    let cases: Vec<(&str, &str, &str, &str, Vec<(&str, &str, usize)>)> = vec![
        (
            "g1",
            "Take two tablets twice daily",
            "50mg",
            "tablet",
            vec![
                ("Dosage", "two", 0),
                ("Form", "tablets", 0),
                ("Frequency", "twice daily", 0),
            ],
        ),
        (
            "g2",
            "Take one tab in am and two tabs in pm",
            "50mg",
            "tablet",
            vec![
                ("Dosage", "one", 0),
                ("Form", "tab", 0),
                ("Frequency", "am", 0),
                ("Dosage", "two", 0),
                ("Form", "tabs", 0),
                ("Frequency", "pm", 0),
            ],
        ),
        (
            "g3",
            "1/2 tab bid",
            "2 mg",
            "tablet",
            vec![
                ("Dosage", "1/2", 0),
                ("Form", "tab", 0),
                ("Frequency", "bid", 0),
            ],
        ),
        (
            "g4",
            "Take one(1) inhalation twice daily",
            "250-50 mcg/dose",
            "disk with device",
            vec![
                ("Dosage", "one(1)", 0),
                ("Form", "inhalation", 0),
                ("Frequency", "twice daily", 0),
            ],
        ),
        (
            "g5",
            "one to two tablets daily",
            "7.5 mg",
            "tablet",
            vec![
                ("Dosage", "one to two", 0),
                ("Form", "tablets", 0),
                ("Frequency", "daily", 0),
            ],
        ),
        ("g6", "Take as directed.", "10 mg", "tablet", vec![]),
        (
            "g7",
            "Take 1 tablet by mouth.",
            "10 mg",
            "tablet",
            vec![("Dosage", "1", 0), ("Form", "tablet", 0)],
        ),
        (
            "g8",
            "Take 0.25 tablets by mouth once daily. TAKE ONE HALF (0.5) OF A  TABLET DAILY.",
            "10 mg",
            "tablet",
            vec![
                ("Dosage", "0.25", 0),
                ("Form", "tablets", 0),
                ("Frequency", "once daily", 0),
                ("Dosage", "ONE HALF (0.5)", 0),
                ("Form", "TABLET", 0),
                ("Frequency", "DAILY", 0),
            ],
        ),
        (
            "g9",
            "1000mcg IM monthly",
            "1000 mcg",
            "vial",
            vec![("Strength", "1000mcg", 0), ("Frequency", "monthly", 0)],
        ),
        (
            "g10",
            "Take 1-2 tablets by mouth every 6 hours as needed for Pain (max = 6 tabs/day).",
            "500 mg",
            "tablet",
            vec![
                ("Dosage", "1-2", 0),
                ("Form", "tablets", 0),
                ("Frequency", "every 6 hours", 0),
            ],
        ),
    ];

    let dir = tempfile::tempdir().unwrap();
    let input_path = dir.path().join("orders.jsonl");
    let entities_path = dir.path().join("entities.jsonl");
    let mut input = String::new();
    let mut entities_file = String::new();
    for (id, sig, strength, form, entities) in &cases {
        input.push_str(
            &serde_json::json!({
                "order_id": id, "sig": sig, "strength": strength, "route": "Oral", "form": form,
            })
            .to_string(),
        );
        input.push('\n');
        let spans: Vec<serde_json::Value> = entities
            .iter()
            .map(|(label, needle, occ)| {
                let (start, end) = pos(sig, needle, *occ);
                serde_json::json!({"label": label, "start": start, "end": end})
            })
            .collect();
        entities_file.push_str(&serde_json::json!({"order_id": id, "entities": spans}).to_string());
        entities_file.push('\n');
    }
    std::fs::write(&input_path, input).unwrap();
    std::fs::write(&entities_path, entities_file).unwrap();

    let bin = env!("CARGO_BIN_EXE_sigdose");
    let rules_out = std::process::Command::new(bin)
        .args(["run", "--input", input_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        rules_out.status.success(),
        "rules run failed: {rules_out:?}"
    );
    let external_out = std::process::Command::new(bin)
        .args([
            "run",
            "--input",
            input_path.to_str().unwrap(),
            "--extractor",
            "external",
            "--external-entities",
            entities_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        external_out.status.success(),
        "external run failed: {external_out:?}"
    );

    let parse = |bytes: &[u8]| -> Vec<(String, String, serde_json::Value, serde_json::Value)> {
        String::from_utf8_lossy(bytes)
            .lines()
            .map(|line| {
                let v: serde_json::Value = serde_json::from_str(line).unwrap();
                (
                    v["order_id"].as_str().unwrap().to_string(),
                    v["status"].as_str().unwrap().to_string(),
                    v.get("daily_dosage")
                        .cloned()
                        .unwrap_or(serde_json::Value::Null),
                    v.get("null_reason")
                        .cloned()
                        .unwrap_or(serde_json::Value::Null),
                )
            })
            .collect()
    };
    let rules = parse(&rules_out.stdout);
    let external = parse(&external_out.stdout);
    assert_eq!(rules.len(), cases.len());
    for (r, e) in rules.iter().zip(&external) {
        assert_eq!(r, e, "extractor paths disagree on {}", r.0);
    }
    println!("criterion 8 (extractor seam, {} sigs): pass", cases.len());
}

/// Table-9-style regressions: caps clamp, duplicates collapse, conflicts and
/// unparseable Sigs null with the designated reasons.
#[test]
fn criterion_9_error_taxonomy_regressions() {
    // Daily cap clamps the max only.
    let out = run(
        "Take 1-2 tablets by mouth every 6 hours as needed for Pain (max = 6 tabs/day).",
        "500 mg",
        "Oral",
        "tablet",
    );
    assert_value(&out, &[(rat(2000, 1), rat(3000, 1), "mg")], "cap sig");

    // Duplicate instruction (dose-less PRN restatement) yields one value.
    let out = run(
        "Take by mouth every 4 hours as needed for Cough. Take 1 teaspoon(s) as needed for cough every 4 hrs.",
        "",
        "Oral",
        "solution",
    );
    assert_value(&out, &[(rat(30, 1), rat(30, 1), "ml")], "duplicate sig");

    // Conflicting restatement with a different implied dose.
    let out = run(
        "Take by mouth three times daily. take 6 pills three times daily",
        "100 mg",
        "Oral",
        "tablet",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::NeedMoreInfoConflicting),
        "conflicting sig"
    );

    // Weekday list.
    let out = run(
        "Take one tablet Mon-Wed-Thur-Sat",
        "10 mg",
        "Oral",
        "tablet",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::VariableDoseOverDays),
        "weekday sig"
    );

    // Misspelling: "i" is out of lexicon, "5times/day" leaves no readable dose.
    let out = run("i cap 5times/day", "10 mg", "Oral", "capsule");
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::NeedMoreInfoMissingDose),
        "misspelling sig"
    );

    // The remaining error-taxonomy rows keep their designated behavior.
    let out = run(
        "Take 2.5 mg by mouth once daily. Warfarin 5 mg only on Tues and Thurs, other days takes 2.5 mg.",
        "2.5 mg",
        "Oral",
        "tablet",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::VariableDoseOverDays),
        "weekday-dependent warfarin sig"
    );

    let out = run(
        "Take 1 tablet by mouth daily before lunch. take one full pill before dinner",
        "10 mg",
        "Oral",
        "tablet",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::NeedMoreInfoConflicting),
        "unaddable expressions sig"
    );

    let out = run(
        "alternates 5 mg and 7.5 mg daily",
        "2.5 mg",
        "Oral",
        "tablet",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::VariableDoseOverDays),
        "alternating dose sig"
    );

    // "and"-joined extra dose adds on top of the standing instruction.
    let out = run(
        "2 po bid and maytake an extra 1/2 tab qd prn palpiations",
        "100 mg",
        "Oral",
        "tablet",
    );
    assert_value(&out, &[(rat(450, 1), rat(450, 1), "mg")], "extra-dose sig");

    let out = run(
        "Inject 0.65 mL subcutaneously one time only for 1 dose",
        "",
        "Subcutaneous",
        "syringe",
    );
    assert_eq!(
        out.null_reason(),
        Some(ReasonCode::NotMeaningfulOneTime),
        "one-time injection sig"
    );

    println!("criterion 9 (error-taxonomy regressions): pass");
}
