//! Batch CLI: run the pipeline, score against ground truth, check lexicons.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use sigdose::batch::{eval_batch, process_record, run_batch, ExtractorChoice};
use sigdose::extract::{CompoundKind, ExternalEntity};
use sigdose::records::{load_external_entities, InputRecord};
use sigdose::report;
use sigdose::{Lexicon, Rational};

#[derive(Parser)]
#[command(
    name = "sigdose",
    version,
    about = "Daily dosage extraction from medication Sigs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Extractor {
    Rules,
    External,
}

#[derive(Args)]
struct IoArgs {
    /// Input records, one JSON object per line ("-" for stdin).
    #[arg(long, short = 'i', default_value = "-")]
    input: String,
    /// Lexicon file; the builtin starter lexicon when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Entity extractor feeding the pipeline.
    #[arg(long, value_enum, default_value_t = Extractor::Rules)]
    extractor: Extractor,
    /// Labeled-span file for --extractor external.
    #[arg(long)]
    external_entities: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute daily dosage outcomes for a batch of medication orders.
    Run(IoArgs),
    /// Score pipeline outcomes against ground truth embedded in the records.
    Eval(IoArgs),
    /// Strict span-and-type scoring of extracted DA/AF entities.
    EvalEntities(IoArgs),
    /// Validate a lexicon file and summarize its contents.
    LexiconCheck {
        /// Lexicon file to check; the builtin one when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::EvalEntities(args) => cmd_eval_entities(args),
        Command::LexiconCheck { lexicon } => cmd_lexicon_check(lexicon),
    }
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path).with_context(|| format!("cannot open input {path:?}"))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn load_lexicon(path: &Option<PathBuf>) -> Result<Lexicon<Rational>> {
    match path {
        None => Ok(Lexicon::builtin()),
        Some(p) => {
            let mut source = String::new();
            File::open(p)
                .with_context(|| format!("cannot open lexicon {}", p.display()))?
                .read_to_string(&mut source)?;
            Lexicon::parse(&source).with_context(|| format!("invalid lexicon {}", p.display()))
        }
    }
}

fn load_external_map(args: &IoArgs) -> Result<Option<HashMap<String, Vec<ExternalEntity>>>> {
    match args.extractor {
        Extractor::Rules => Ok(None),
        Extractor::External => {
            let path = args
                .external_entities
                .as_ref()
                .context("--extractor external requires --external-entities <path>")?;
            let file = File::open(path)
                .with_context(|| format!("cannot open external entities {}", path.display()))?;
            Ok(Some(load_external_entities(BufReader::new(file))?))
        }
    }
}

fn extractor_choice(map: &Option<HashMap<String, Vec<ExternalEntity>>>) -> ExtractorChoice<'_> {
    match map {
        None => ExtractorChoice::Rules,
        Some(m) => ExtractorChoice::External(m),
    }
}

fn cmd_run(args: IoArgs) -> Result<()> {
    let lexicon = load_lexicon(&args.lexicon)?;
    let external = load_external_map(&args)?;
    let extractor = extractor_choice(&external);
    let input = open_input(&args.input)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match args.format {
        Format::Jsonl => {
            run_batch::<Rational>(input, &lexicon, extractor, |record| {
                writeln!(out, "{}", report::outcome_jsonl(&record))
            })?;
        }
        Format::Table => {
            let mut collected = Vec::new();
            run_batch::<Rational>(input, &lexicon, extractor, |record| {
                collected.push(record);
                Ok(())
            })?;
            write!(out, "{}", report::outcomes_table(&collected))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(args: IoArgs) -> Result<()> {
    let lexicon = load_lexicon(&args.lexicon)?;
    let external = load_external_map(&args)?;
    let extractor = extractor_choice(&external);
    let input = open_input(&args.input)?;
    let run = eval_batch::<Rational>(input, &lexicon, extractor)?;
    match args.format {
        Format::Jsonl => println!("{}", report::eval_jsonl(&run.report)),
        Format::Table => print!("{}", report::eval_table(&run.report)),
    }
    Ok(())
}

fn cmd_eval_entities(args: IoArgs) -> Result<()> {
    let lexicon = load_lexicon(&args.lexicon)?;
    let external = load_external_map(&args)?;
    let extractor = extractor_choice(&external);
    let input = open_input(&args.input)?;
    let mut predicted: Vec<(CompoundKind, usize, usize)> = Vec::new();
    let mut gold: Vec<(CompoundKind, usize, usize)> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InputRecord = serde_json::from_str(&line)
            .with_context(|| format!("line {line_no}: malformed record"))?;
        for (s, e) in record.gt_da_span.iter().flat_map(|f| f.pairs()) {
            gold.push((CompoundKind::DosagePerAdministration, s, e));
        }
        for (s, e) in record.gt_af_span.iter().flat_map(|f| f.pairs()) {
            gold.push((CompoundKind::AdministrationFrequency, s, e));
        }
        let (_, extraction) = process_record::<Rational>(&record, &lexicon, extractor);
        if let Some(extraction) = extraction {
            for da in &extraction.das {
                predicted.push((
                    CompoundKind::DosagePerAdministration,
                    da.span.start,
                    da.span.end,
                ));
            }
            for af in &extraction.afs {
                predicted.push((
                    CompoundKind::AdministrationFrequency,
                    af.span.start,
                    af.span.end,
                ));
            }
        }
    }
    let level = sigdose::score_entities::<Rational>(&predicted, &gold);
    match args.format {
        Format::Jsonl => println!("{}", report::entity_jsonl(&level)),
        Format::Table => print!("{}", report::entity_table(&level)),
    }
    Ok(())
}

fn cmd_lexicon_check(path: Option<PathBuf>) -> Result<()> {
    let lexicon = load_lexicon(&path)?;
    let mut counts = std::collections::BTreeMap::new();
    for entry in lexicon.entries() {
        *counts.entry(entry.entity_type.name()).or_insert(0usize) += 1;
    }
    println!("lexicon ok: {} entries", lexicon.len());
    for (ty, n) in counts {
        println!("  {ty:<16} {n}");
    }
    Ok(())
}
