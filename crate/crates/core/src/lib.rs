//! Daily-dosage extraction from free-text medication instructions (Sigs).
//!
//! Given a Sig and the accompanying structured strength/route/form data,
//! the pipeline extracts dose and frequency entities, normalizes them, and
//! computes the minimum and maximum daily dosage per ingredient — or a
//! typed null with a reason code when no trustworthy value exists. An
//! evaluation harness scores predictions against expert ground truth.
//!
//! ```
//! use sigdose::{process_order, Lexicon, MedicationOrder, Rational, Scalar};
//!
//! let lexicon: Lexicon<Rational> = Lexicon::builtin();
//! let order = MedicationOrder {
//!     order_id: "demo".into(),
//!     sig: "Take two tablets twice daily".into(),
//!     strength_text: "50mg".into(),
//!     route: "Oral".into(),
//!     form: "tablet".into(),
//! };
//! let outcome = process_order(&order, &lexicon);
//! let dd = outcome.value().unwrap();
//! assert_eq!(dd.per_ingredient[0].max_per_day, Rational::from_int(200));
//! ```
//!
//! All arithmetic is generic over [`scalar::Scalar`]; the concrete aliases
//! below pin the exact-rational instantiation used by the CLI and tests.

pub mod batch;
pub mod dosage;
pub mod eval;
pub mod extract;
pub mod lexicon;
pub mod medorder;
pub mod records;
pub mod report;
pub mod scalar;

/// Exact scalar used by the CLI and the test suites.
pub type Rational = num_rational::BigRational;
/// Float alternative for callers that trade exactness for speed.
pub type Float = f64;

pub use dosage::{
    calculate_daily_dosage, process_order, DailyDosage, DosageOutcome, ReasonCode, Resolution,
};
pub use eval::{score_end_to_end, score_entities, EvalReport, GtOutcome};
pub use extract::{extract, extract_basic, extract_with_external, ExtractionResult, Span};
pub use lexicon::{BasicEntityType, Lexicon, LexiconEntry, Normalization};
pub use medorder::{canonicalize_unit, parse_strength, MedicationOrder, Strength};
pub use scalar::Scalar;
