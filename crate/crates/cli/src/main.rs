//! Command line front end for the engine: parse sentences, validate and
//! lint grammar files, compose trees by hand, and run the multi-component
//! comparisons. Exit codes are stable across commands: 0 for an accept or
//! an equal comparison, 1 for a well-formed reject or difference, 2 for
//! usage and load errors. Output is byte-deterministic for fixed inputs;
//! `FTAG_COLOR=0` (or a non-terminal stdout) disables the little styling
//! there is.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ftag_core::mc::mc_parses;
use ftag_core::*;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ftag", version, about = "Feature-based tree adjoining grammar engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sentence and print every derivation.
    Parse(ParseCmd),
    /// Check every tree of a grammar file for structural violations.
    Validate(ValidateCmd),
    /// Lint an extraction triple: empty-element tree, filler tree, host.
    LintExtraction(LintCmd),
    /// Compose elementary trees step by step and finalize the result.
    Derive(DeriveCmd),
    /// Compare a sentence's parse with its multi-component analysis.
    Compare(CompareCmd),
    /// Diff the bounded-length string sets of a grammar pair.
    Sample(SampleCmd),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Human-readable report.
    Pretty,
    /// Tab-separated records, one per line.
    Records,
}

#[derive(Args)]
struct SentenceArgs {
    /// Sentence text, run through the engine's tokenizer.
    #[arg(short, long)]
    sentence: Option<String>,
    /// Comma-separated tokens, bypassing tokenization.
    #[arg(long, value_delimiter = ',', conflicts_with = "sentence")]
    tokens: Option<Vec<String>>,
}

impl SentenceArgs {
    fn resolve(&self) -> Result<Vec<String>> {
        match (&self.sentence, &self.tokens) {
            (Some(text), None) => Ok(tokenize(text)),
            (None, Some(toks)) => Ok(toks.clone()),
            _ => bail!("expected exactly one of --sentence and --tokens"),
        }
    }
}

#[derive(Args)]
struct ParseCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    #[command(flatten)]
    input: SentenceArgs,
    /// Print node features in the bracketings.
    #[arg(long)]
    show_features: bool,
    /// On rejection, print where near-miss derivations failed.
    #[arg(long)]
    explain: bool,
    /// Bound on elementary tree instances per derivation.
    #[arg(long)]
    max_trees: Option<usize>,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

#[derive(Args)]
struct ValidateCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

#[derive(Args)]
struct LintCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    /// Three assignments: eps=TREE filler=TREE host=TREE.
    #[arg(long, num_args = 3, value_names = ["EPS", "FILLER", "HOST"])]
    triple: Vec<String>,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

#[derive(Args)]
struct DeriveCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    /// Elementary tree the composition starts from.
    #[arg(long)]
    root: String,
    /// Steps applied in order: sub@ADDR=TREE or adj@ADDR=TREE, with ADDR
    /// an address in the derived tree built so far (0 is the root).
    #[arg(value_name = "STEP")]
    steps: Vec<String>,
    #[arg(long)]
    show_features: bool,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

#[derive(Args)]
struct CompareCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    #[arg(short, long)]
    mc_grammar: PathBuf,
    #[command(flatten)]
    input: SentenceArgs,
    #[arg(long)]
    max_trees: Option<usize>,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

#[derive(Args)]
struct SampleCmd {
    #[arg(short, long)]
    grammar: PathBuf,
    #[arg(short, long)]
    mc_grammar: PathBuf,
    /// Longest string length to enumerate.
    #[arg(long, default_value_t = 8)]
    max_len: usize,
    #[arg(long, value_enum, default_value = "pretty")]
    format: Format,
}

fn main() -> ExitCode {
    // Die quietly when a pipe downstream closes early, as under `head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Parse(cmd) => cmd_parse(cmd),
        Command::Validate(cmd) => cmd_validate(cmd),
        Command::LintExtraction(cmd) => cmd_lint(cmd),
        Command::Derive(cmd) => cmd_derive(cmd),
        Command::Compare(cmd) => cmd_compare(cmd),
        Command::Sample(cmd) => cmd_sample(cmd),
    }
}

fn load_ftag(path: &Path) -> Result<Grammar> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    load_grammar(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_mc(path: &Path) -> Result<McGrammar> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    load_mc_grammar(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// Bold section headings on a terminal, plain otherwise.
fn heading(text: &str) -> String {
    let styled = std::io::stdout().is_terminal()
        && std::env::var_os("FTAG_COLOR").map_or(true, |v| v != "0");
    if styled {
        format!("\x1b[1m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn cmd_parse(cmd: ParseCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let tokens = cmd.input.resolve()?;
    let limits = ParseLimits {
        max_trees: cmd.max_trees,
        max_results: None,
    };
    let result = parse(&grammar, &tokens, &limits);

    match cmd.format {
        Format::Pretty => {
            println!("derivations: {}", result.derivations.len());
            for (i, (derivation, done)) in result.derivations.iter().enumerate() {
                println!();
                println!("{}", heading(&format!("derivation {}", i + 1)));
                print!("{derivation}");
                if cmd.show_features {
                    println!("{}", done.bracketing_with_features());
                } else {
                    println!("{}", done.bracketing());
                }
            }
            if cmd.explain && result.derivations.is_empty() {
                println!();
                println!("{}", heading("diagnostics"));
                for d in explain(&grammar, &tokens) {
                    match &d.label {
                        Some(label) => println!("{} ({}): {}", label, d.address, d.reason),
                        None => println!("({}): {}", d.address, d.reason),
                    }
                }
            }
        }
        Format::Records => {
            println!("count\t{}", result.derivations.len());
            for (i, (derivation, done)) in result.derivations.iter().enumerate() {
                let n = i + 1;
                println!("derivation\t{n}\t{}", derivation.tree);
                for rec in derivation.records() {
                    println!(
                        "record\t{n}\t{}\t{}\t{}\t{}",
                        rec.parent, rec.op, rec.address, rec.child
                    );
                }
                if cmd.show_features {
                    println!("bracketing\t{n}\t{}", done.bracketing_with_features());
                } else {
                    println!("bracketing\t{n}\t{}", done.bracketing());
                }
                println!("tokens\t{n}\t{}", done.tokens().join(" "));
            }
            if cmd.explain && result.derivations.is_empty() {
                for d in explain(&grammar, &tokens) {
                    let label = d.label.as_ref().map(|l| l.to_string()).unwrap_or_default();
                    println!("diagnostic\t{}\t{label}\t{}", d.address, d.reason);
                }
            }
        }
    }
    Ok(accept_reject(!result.derivations.is_empty()))
}

fn cmd_validate(cmd: ValidateCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let mut violations = Vec::new();
    for tree in grammar.trees.values() {
        violations.extend(validate_tree(tree));
    }
    print_violations(&violations, cmd.format);
    Ok(accept_reject(violations.is_empty()))
}

fn cmd_lint(cmd: LintCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let mut eps = None;
    let mut filler = None;
    let mut host = None;
    for part in &cmd.triple {
        let (key, name) = part
            .split_once('=')
            .with_context(|| format!("expected key=TREE, got {part}"))?;
        let tree = grammar
            .tree(name)
            .with_context(|| format!("no tree named {name}"))?;
        match key {
            "eps" => eps = Some(tree),
            "filler" => filler = Some(tree),
            "host" => host = Some(tree),
            other => bail!("unknown triple key {other}, expected eps, filler or host"),
        }
    }
    let (Some(eps), Some(filler), Some(host)) = (eps, filler, host) else {
        bail!("--triple needs eps=TREE filler=TREE host=TREE");
    };
    let violations = lint_extraction_pair(eps, filler, host);
    print_violations(&violations, cmd.format);
    Ok(accept_reject(violations.is_empty()))
}

fn print_violations(violations: &[Violation], format: Format) {
    match format {
        Format::Pretty => {
            if violations.is_empty() {
                println!("clean");
            }
            for v in violations {
                println!("{v}");
            }
        }
        Format::Records => {
            println!("count\t{}", violations.len());
            for v in violations {
                println!("violation\t{}\t{}\t{}", v.tree, v.address, v.rule);
            }
        }
    }
}

fn cmd_derive(cmd: DeriveCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let mut gen = VarGen::new();
    let root = grammar
        .tree(&cmd.root)
        .with_context(|| format!("no tree named {}", cmd.root))?;
    let mut derived = instantiate(root, &mut gen);

    for step in &cmd.steps {
        let (op, address, name) = parse_step(step)?;
        let tree = grammar
            .tree(name)
            .with_context(|| format!("no tree named {name}"))?;
        let arg = instantiate(tree, &mut gen);
        let composed = match op {
            OpKind::Substitution => substitute(&derived, &address, &arg),
            OpKind::Adjunction => adjoin(&derived, &address, &arg),
        };
        derived = match composed {
            Ok(next) => next,
            Err(ComposeError::BadTarget(addr)) => bail!("{step}: no node at {addr}"),
            Err(rejected) => {
                println!("{rejected}");
                return Ok(ExitCode::from(1));
            }
        };
    }

    match finalize(&derived) {
        Ok(done) => {
            match cmd.format {
                Format::Pretty => {
                    if cmd.show_features {
                        println!("{}", done.bracketing_with_features());
                    } else {
                        println!("{}", done.bracketing());
                    }
                    println!("tokens: {}", done.tokens().join(" "));
                }
                Format::Records => {
                    if cmd.show_features {
                        println!("bracketing\t{}", done.bracketing_with_features());
                    } else {
                        println!("bracketing\t{}", done.bracketing());
                    }
                    println!("tokens\t{}", done.tokens().join(" "));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            println!("{err}");
            Ok(ExitCode::from(1))
        }
    }
}

/// Parses one composition step of the form `sub@ADDR=TREE` or
/// `adj@ADDR=TREE`.
fn parse_step(step: &str) -> Result<(OpKind, GornAddress, &str)> {
    let (op, rest) = step
        .split_once('@')
        .with_context(|| format!("expected sub@ADDR=TREE or adj@ADDR=TREE, got {step}"))?;
    let op = match op {
        "sub" => OpKind::Substitution,
        "adj" => OpKind::Adjunction,
        other => bail!("unknown operation {other}, expected sub or adj"),
    };
    let (address, name) = rest
        .split_once('=')
        .with_context(|| format!("expected ADDR=TREE after the operation, got {rest}"))?;
    let address = GornAddress::parse(address)
        .with_context(|| format!("bad address {address}"))?;
    Ok((op, address, name))
}

fn cmd_compare(cmd: CompareCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let mc = load_mc(&cmd.mc_grammar)?;
    let tokens = cmd.input.resolve()?;
    let limits = ParseLimits {
        max_trees: cmd.max_trees,
        max_results: None,
    };
    let parsed = parse(&grammar, &tokens, &limits);
    let mc_trees = mc_parses(&mc, &tokens);

    let finals: Vec<&FinalTree> = parsed.derivations.iter().map(|(_, t)| t).collect();
    let reports: Vec<Vec<EquivalenceReport>> = finals
        .iter()
        .map(|f| mc_trees.iter().map(|m| compare(f, m)).collect())
        .collect();
    // Equal when both sides accept and the analyses cover one another.
    let covered = !finals.is_empty()
        && !mc_trees.is_empty()
        && reports.iter().all(|row| row.iter().any(|r| r.equal))
        && (0..mc_trees.len()).all(|j| reports.iter().any(|row| row[j].equal));
    let equal = covered || (finals.is_empty() && mc_trees.is_empty());

    match cmd.format {
        Format::Pretty => {
            println!("feature-based analyses: {}", finals.len());
            println!("multi-component analyses: {}", mc_trees.len());
            for (i, row) in reports.iter().enumerate() {
                for (j, report) in row.iter().enumerate() {
                    println!("analysis {} ~ {}: {report}", i + 1, j + 1);
                }
            }
            println!("verdict: {}", if equal { "equal" } else { "unequal" });
        }
        Format::Records => {
            println!("ftag_count\t{}", finals.len());
            println!("mc_count\t{}", mc_trees.len());
            for (i, row) in reports.iter().enumerate() {
                for (j, report) in row.iter().enumerate() {
                    println!(
                        "pair\t{}\t{}\t{}\t{}\t{}",
                        i + 1,
                        j + 1,
                        report.equal,
                        report.yields_equal,
                        report.first_difference.as_deref().unwrap_or("-")
                    );
                }
            }
            println!("verdict\t{}", if equal { "equal" } else { "unequal" });
        }
    }
    Ok(accept_reject(equal))
}

fn cmd_sample(cmd: SampleCmd) -> Result<ExitCode> {
    let grammar = load_ftag(&cmd.grammar)?;
    let mc = load_mc(&cmd.mc_grammar)?;
    let a = language_sample(SampleSource::Ftag(&grammar), cmd.max_len);
    let b = language_sample(SampleSource::Mc(&mc), cmd.max_len);
    let only_a: Vec<_> = a.difference(&b).collect();
    let only_b: Vec<_> = b.difference(&a).collect();

    match cmd.format {
        Format::Pretty => {
            println!("{}", heading(&format!("feature-based ({})", a.len())));
            for s in &a {
                println!("{}", s.join(" "));
            }
            println!("{}", heading(&format!("multi-component ({})", b.len())));
            for s in &b {
                println!("{}", s.join(" "));
            }
            println!("{}", heading("diff"));
            for s in &only_a {
                println!("only feature-based: {}", s.join(" "));
            }
            for s in &only_b {
                println!("only multi-component: {}", s.join(" "));
            }
            if only_a.is_empty() && only_b.is_empty() {
                println!("none");
            }
        }
        Format::Records => {
            for s in &a {
                println!("ftag\t{}", s.join(" "));
            }
            for s in &b {
                println!("mc\t{}", s.join(" "));
            }
            for s in &only_a {
                println!("only_ftag\t{}", s.join(" "));
            }
            for s in &only_b {
                println!("only_mc\t{}", s.join(" "));
            }
            println!(
                "verdict\t{}",
                if only_a.is_empty() && only_b.is_empty() {
                    "equal"
                } else {
                    "unequal"
                }
            );
        }
    }
    Ok(accept_reject(only_a.is_empty() && only_b.is_empty()))
}

fn accept_reject(accepted: bool) -> ExitCode {
    if accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
