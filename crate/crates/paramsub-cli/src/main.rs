//! Batch front end for the parametric subtyping checker.
//!
//! Exit codes: 0 for success (a `query` that holds), 1 for a query that
//! does not hold, 2 for any error or diagnostic.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use paramsub::bpa;
use paramsub::elaborate::{self, Elaboration};
use paramsub::oracle;
use paramsub::parser;
use paramsub::pretty;
use paramsub::query::{self, Verdict};
use paramsub::saturate::{FactDatabase, PairKey, Rule, WorklistOrder};
use paramsub::syntax::{NamedType, Signature, SubstStack, Variance};

#[derive(Parser)]
#[command(name = "paramsub", version, about = "Parametric subtyping for recursive polymorphic type constructors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, elaborate, and validate a signature file.
    Check {
        file: PathBuf,
        /// Print the normalized signature, including internal definitions.
        #[arg(long)]
        emit_normal: bool,
    },
    /// Infer and print the most general parametric rule for constructor
    /// pairs.
    Rules {
        file: PathBuf,
        /// Restrict to one pair of constructors.
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        pair: Option<Vec<String>>,
        /// Variance of the listed rules.
        #[arg(long, default_value = "+")]
        variance: VarianceArg,
        #[arg(long)]
        json: bool,
        /// Shuffle the saturation worklist (determinism testing).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the saturation safety fuel.
        #[arg(long)]
        max_facts: Option<u64>,
    },
    /// Decide a subtyping query, e.g. "even <= nat".
    Query {
        file: PathBuf,
        query: String,
        #[arg(long)]
        json: bool,
        /// Print the derivation or refutation trace.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_facts: Option<u64>,
    },
    /// Run the bounded reference refuters directly.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
    /// Encode guarded process equations as a signature file.
    Bpa {
        #[command(subcommand)]
        which: BpaCommand,
    },
    /// Saturate all user-constructor pairs and dump the fact database as
    /// JSON.
    Facts {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_facts: Option<u64>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Bounded refuter for structural subtyping (eager unfolding).
    Structural {
        file: PathBuf,
        query: String,
        #[arg(long, default_value_t = 8)]
        depth: u32,
    },
    /// Bounded refuter for declarative parametric subtyping (substitution
    /// stacks).
    Parametric {
        file: PathBuf,
        query: String,
        #[arg(long, default_value_t = 8)]
        depth: u32,
    },
}

#[derive(Subcommand)]
enum BpaCommand {
    /// Translate equations like `X = a.eps + b.X.Y` into type definitions.
    Encode {
        file: PathBuf,
        /// Output path; defaults to the input with a .poly extension.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FlavorArg::Record)]
        flavor: FlavorArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Record,
    RecordEnd,
    Variant,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarianceArg {
    #[value(name = "+")]
    Plus,
    #[value(name = "-")]
    Minus,
    Both,
}

impl VarianceArg {
    fn variances(self) -> Vec<Variance> {
        match self {
            VarianceArg::Plus => vec![Variance::Plus],
            VarianceArg::Minus => vec![Variance::Minus],
            VarianceArg::Both => vec![Variance::Plus, Variance::Minus],
        }
    }
}

fn use_color() -> bool {
    std::env::var("PARAMSUB_COLOR").map(|v| v == "1").unwrap_or(false)
}

fn paint(text: &str, code: &str) -> String {
    if use_color() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

/// Parses and elaborates a signature file, reporting positioned errors.
fn load(path: &Path) -> Result<(String, parser::SurfaceSignature, Elaboration)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let surface = parser::parse_signature(&text)
        .map_err(|e| anyhow!("{}: {}", path.display(), e.display_with(&text)))?;
    let elaboration =
        elaborate::elaborate(&surface).map_err(|e| anyhow!("{}: {}", path.display(), e))?;
    let diags = elaborate::validate(&elaboration.signature);
    if !diags.is_empty() {
        return Err(anyhow!("{}: {}", path.display(), diags.join("; ")));
    }
    Ok((text, surface, elaboration))
}

/// Elaborates both sides of a query string against a loaded signature.
fn load_query(
    text: &str,
    surface: &parser::SurfaceSignature,
    elaboration: &mut Elaboration,
) -> Result<(NamedType, NamedType, Variance)> {
    let q = parser::parse_query(text, surface)
        .map_err(|e| anyhow!("query: {}", e.display_with(text)))?;
    let left = elaboration
        .query_type(&q.left)
        .map_err(|e| anyhow!("query: {e}"))?;
    let right = elaboration
        .query_type(&q.right)
        .map_err(|e| anyhow!("query: {e}"))?;
    Ok((left, right, q.variance))
}

fn database<'s>(sig: &'s Signature, seed: Option<u64>, max_facts: Option<u64>) -> FactDatabase<'s> {
    let order = match seed {
        Some(seed) => WorklistOrder::Seeded(seed),
        None => WorklistOrder::Fifo,
    };
    let mut db = FactDatabase::with_order(sig, order);
    if let Some(limit) = max_facts {
        db.set_max_facts(limit);
    }
    db
}

/// All (user × user) pair keys at the given variances, in definition order.
fn user_roots(sig: &Signature, variances: &[Variance]) -> Vec<PairKey> {
    let users: Vec<_> = sig.user_constructors().collect();
    let mut roots = Vec::new();
    for &l in &users {
        for &r in &users {
            for &v in variances {
                roots.push(PairKey::new(l, r, v));
            }
        }
    }
    roots
}

fn rule_text(sig: &Signature, key: PairKey, rule: &Rule) -> String {
    let (lp, rp) = pretty::pair_param_names(sig, key.left, key.right);
    let lhs = pretty::con_with_params(&sig.def(key.left).name, &lp);
    let rhs = pretty::con_with_params(&sig.def(key.right).name, &rp);
    let (lhs, rhs) = match key.variance {
        Variance::Plus => (lhs, rhs),
        Variance::Minus => (rhs, lhs),
    };
    match rule {
        Rule::Valid(atoms) if atoms.is_empty() => format!("{lhs} <= {rhs}"),
        Rule::Valid(atoms) => {
            let premises: Vec<String> =
                atoms.iter().map(|a| pretty::atom(a, &lp, &rp)).collect();
            format!("{lhs} <= {rhs} if {}", premises.join(", "))
        }
        Rule::Invalid(info) => {
            let kind = if info.rule.is_parametricity() {
                "parametricity"
            } else {
                "structural"
            };
            format!("{lhs} </= {rhs} ({kind}: {})", info.rule)
        }
    }
}

fn cmd_check(file: &Path, emit_normal: bool) -> Result<ExitCode> {
    let (_, _, elaboration) = load(file)?;
    let sig = &elaboration.signature;
    println!(
        "ok, {} definitions ({} internal)",
        sig.len(),
        sig.internal_count()
    );
    if emit_normal {
        print!("{}", pretty::signature(sig));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_rules(
    file: &Path,
    pair: Option<Vec<String>>,
    variance: VarianceArg,
    json: bool,
    seed: Option<u64>,
    max_facts: Option<u64>,
) -> Result<ExitCode> {
    let (_, _, elaboration) = load(file)?;
    let sig = &elaboration.signature;
    let roots = match &pair {
        Some(names) => {
            let mut roots = Vec::new();
            for v in variance.variances() {
                roots.push(
                    PairKey::by_name(sig, &names[0], &names[1], v)
                        .map_err(|e| anyhow!("{e}"))?,
                );
            }
            roots
        }
        None => user_roots(sig, &variance.variances()),
    };
    let mut db = database(sig, seed, max_facts);
    db.saturate(roots.iter().copied())
        .map_err(|e| anyhow!("{e}"))?;

    if json {
        let rules: Vec<serde_json::Value> = roots
            .iter()
            .map(|&key| {
                let rule = db.rule_of(key).expect("demanded");
                let mut obj = serde_json::json!({
                    "left": sig.def(key.left).name,
                    "right": sig.def(key.right).name,
                    "variance": key.variance,
                    "rule": rule_text(sig, key, &rule),
                });
                match rule {
                    Rule::Valid(atoms) => {
                        obj["atoms"] = serde_json::json!(atoms.iter().collect::<Vec<_>>());
                    }
                    Rule::Invalid(info) => {
                        obj["bottom"] = serde_json::json!(format!("{}", info.rule));
                    }
                }
                obj
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&serde_json::json!(rules))?);
        return Ok(ExitCode::SUCCESS);
    }

    for &key in &roots {
        let rule = db.rule_of(key).expect("demanded");
        println!("{}", rule_text(sig, key, &rule));
    }
    if sig.internal_count() > 0 {
        println!("-- internal definitions:");
        for (id, def) in sig.iter() {
            if def.origin == paramsub::syntax::Origin::Internal {
                println!("--   {}", pretty::definition(sig, id));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_query(
    file: &Path,
    query_text: &str,
    json: bool,
    explain: bool,
    seed: Option<u64>,
    max_facts: Option<u64>,
) -> Result<ExitCode> {
    let (_, surface, mut elaboration) = load(file)?;
    let (left, right, variance) = load_query(query_text, &surface, &mut elaboration)?;
    let sig = &elaboration.signature;
    let mut db = database(sig, seed, max_facts);
    let verdict = query::check(&mut db, &left, &right, variance).map_err(|e| anyhow!("{e}"))?;

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&query::verdict_json(sig, &verdict))?
        );
    } else if explain {
        print!("{}", query::explain(sig, &verdict));
    } else {
        match &verdict {
            Verdict::Yes(_) => println!("{}", paint("Yes", "32")),
            Verdict::No(reason) => {
                let kind = match reason {
                    query::Reason::ParametricityViolation { .. } => "parametricity violation",
                    query::Reason::StructuralViolation { .. } => "structural violation",
                    query::Reason::ShapeMismatch { .. } => "shape mismatch",
                };
                println!("{} ({kind})", paint("No", "31"));
            }
        }
    }
    Ok(if verdict.holds() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_oracle(which: OracleCommand) -> Result<ExitCode> {
    let (file, query_text, depth, parametric) = match &which {
        OracleCommand::Structural { file, query, depth } => (file, query, *depth, false),
        OracleCommand::Parametric { file, query, depth } => (file, query, *depth, true),
    };
    let (_, surface, mut elaboration) = load(file)?;
    let (left, right, variance) = load_query(query_text, &surface, &mut elaboration)?;
    let sig = &elaboration.signature;
    let outcome = if parametric {
        let empty = SubstStack::empty();
        oracle::bounded_parametric_refute(sig, &left, &empty, &right, &empty, variance, depth)
    } else {
        oracle::bounded_structural_refute(sig, &left, &right, variance, depth)
    };
    match outcome {
        oracle::Refutation::NoCounterexampleWithin(k) => {
            println!("no counterexample within depth {k}");
            Ok(ExitCode::SUCCESS)
        }
        oracle::Refutation::Violation(path) => {
            println!("violation:");
            for step in path {
                println!("  {step}");
            }
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_bpa_encode(file: &Path, out: Option<PathBuf>, flavor: FlavorArg) -> Result<ExitCode> {
    let text = std::fs::read_to_string(file)
        .with_context(|| format!("cannot read {}", file.display()))?;
    let system = bpa::parse_system(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
    let flavor = match flavor {
        FlavorArg::Record => bpa::Flavor::Record,
        FlavorArg::RecordEnd => bpa::Flavor::RecordWithEnd,
        FlavorArg::Variant => bpa::Flavor::Variant,
    };
    let encoding = bpa::encode(&system, flavor).map_err(|e| anyhow!("{e}"))?;
    let out = out.unwrap_or_else(|| file.with_extension("poly"));
    let mut contents = String::from("-- generated from guarded process equations\n");
    contents.push_str(&encoding.source);
    std::fs::write(&out, contents).with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_facts(file: &Path, seed: Option<u64>, max_facts: Option<u64>) -> Result<ExitCode> {
    let (_, _, elaboration) = load(file)?;
    let sig = &elaboration.signature;
    let mut db = database(sig, seed, max_facts);
    db.saturate(user_roots(sig, &[Variance::Plus, Variance::Minus]))
        .map_err(|e| anyhow!("{e}"))?;
    println!("{}", serde_json::to_string_pretty(&db.facts_json())?);
    Ok(ExitCode::SUCCESS)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file, emit_normal } => cmd_check(&file, emit_normal),
        Command::Rules {
            file,
            pair,
            variance,
            json,
            seed,
            max_facts,
        } => cmd_rules(&file, pair, variance, json, seed, max_facts),
        Command::Query {
            file,
            query,
            json,
            explain,
            seed,
            max_facts,
        } => cmd_query(&file, &query, json, explain, seed, max_facts),
        Command::Oracle { which } => cmd_oracle(which),
        Command::Bpa {
            which: BpaCommand::Encode { file, out, flavor },
        } => cmd_bpa_encode(&file, out, flavor),
        Command::Facts {
            file,
            seed,
            max_facts,
        } => cmd_facts(&file, seed, max_facts),
    }
}

fn main() -> ExitCode {
    // Die quietly when the downstream pipe closes (e.g. `facts ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
