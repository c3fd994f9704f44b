use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use contextuality_core::consistify::ConsistifyOutcome;
use contextuality_core::hvm::{empirical, to_fc_no_cim};
use contextuality_core::rational::{format_rational, parse_rational};
use contextuality_core::{
    build_bell, build_consistified_hvms, build_gen, catalog, cbd_analyze, check_connectedness, consistify,
    cross_validate, find_reduced_coupling, sample, to_cim_no_fc, verify_consistified, verify_witness, Error,
    HvmWitness, System,
};
use rayon::prelude::*;
use serde_json::{json, Value};

const SCHEMA: &str = "contextuality-lab-v1";

/// Exit statuses, ordered by severity. Several inputs report the worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Ok = 0,
    Contextual = 1,
    Input = 2,
    Internal = 3,
}

#[derive(Parser)]
#[command(name = "contextuality-lab", version, about = "Exact analysis of contextuality in systems of random variables")]
struct Cli {
    /// Emit one JSON object per result instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads for commands that take several files.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Log every simplex pivot with the full tableau to stderr.
    #[arg(long, global = true)]
    dump_tableau: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Definition {
    /// A single joint distribution of all contents reproduces every bunch.
    Traditional,
    /// Contextuality-by-Default maximal-equality coupling.
    Cbd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Gen,
    Cim,
    Fc,
    Bell,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate system files.
    Validate { files: Vec<PathBuf> },
    /// Check consistent and strongly consistent connectedness.
    Consistency { files: Vec<PathBuf> },
    /// Decide contextuality. Exit status 1 when any system is contextual.
    Contextual {
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Definition::Cbd)]
        definition: Definition,
    },
    /// Degree of contextuality: sum of pairwise maxima minus the coupling optimum.
    Measure { files: Vec<PathBuf> },
    /// Write the consistified system.
    Consistify {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Construct a hidden-variable model witness.
    Hvm {
        file: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Build the model for the consistified system, with one response
        /// function per kind of context.
        #[arg(long)]
        consistified: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Verify a witness against a system.
    VerifyHvm { witness: PathBuf, file: PathBuf },
    /// Draw outcome tuples of one context from a witness.
    Sample {
        witness: PathBuf,
        #[arg(long)]
        context: String,
        #[arg(short, default_value_t = 10_000)]
        n: u64,
        #[arg(long, env = "CONTEXTUALITY_LAB_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Cross-check every verdict against the independent oracles.
    Oracle { files: Vec<PathBuf> },
    /// Write a catalog system (prbox, chsh, signaling, r0).
    Catalog {
        name: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Seed for randomized entries (r0).
        #[arg(long, env = "CONTEXTUALITY_LAB_SEED", default_value_t = 0)]
        seed: u64,
        /// Four CHSH correlations, e.g. `1/2,1/2,1/2,-1/2`.
        #[arg(long, allow_hyphen_values = true)]
        correlations: Option<String>,
    },
}

/// One result: a text rendering, its JSON form, and a status.
struct Report {
    text: String,
    json: Value,
    status: Status,
}

#[derive(Debug)]
struct Failure {
    status: Status,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { status: Status::Input, message: e.to_string() }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure { status: Status::Input, message: message.into() }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure { status: Status::Internal, message: message.into() }
}

type Outcome<T = Report> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Outcome<System> {
    System::parse_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_witness(path: &Path) -> Outcome<HvmWitness> {
    HvmWitness::parse_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    std::fs::write(path, format!("{text}\n")).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn envelope(command: &str, file: Option<&Path>, mut body: Value) -> Value {
    let obj = body.as_object_mut().expect("report bodies are objects");
    obj.insert("schema".into(), json!(SCHEMA));
    obj.insert("command".into(), json!(command));
    if let Some(f) = file {
        obj.insert("file".into(), json!(f.display().to_string()));
    }
    body
}

fn validate(path: &Path) -> Outcome {
    let s = load(path)?;
    Ok(Report {
        text: format!("{}: ok ({} contents, {} contexts)", path.display(), s.contents().len(), s.contexts().len()),
        json: json!({ "valid": true, "contents": s.contents().len(), "contexts": s.contexts().len() }),
        status: Status::Ok,
    })
}

fn consistency(path: &Path) -> Outcome {
    let s = load(path)?;
    let report = check_connectedness(&s);
    let mut text = format!(
        "{}: consistently connected: {}, strongly consistently connected: {}",
        path.display(),
        report.consistent,
        report.strongly_consistent
    );
    let mut violations = Vec::new();
    for v in report.violations() {
        let names: Vec<&str> = v.contents.iter().map(|&q| s.content(q).id.as_str()).collect();
        let line = format!(
            "distribution of {{{}}} differs between contexts `{}` and `{}`",
            names.join(","),
            s.context(v.first).id,
            s.context(v.second).id
        );
        text.push_str(&format!("\n  {line}"));
        violations.push(line);
    }
    Ok(Report {
        text,
        json: json!({
            "consistent": report.consistent,
            "strongly_consistent": report.strongly_consistent,
            "violations": violations,
        }),
        status: Status::Ok,
    })
}

fn contextual(path: &Path, definition: Definition) -> Outcome {
    let s = load(path)?;
    let (name, contextual, extra) = match definition {
        Definition::Traditional => {
            let consistent = check_connectedness(&s).consistent;
            let exists = find_reduced_coupling(&s).is_some();
            let note = if consistent { "" } else { " (inconsistently connected, so contextual by this definition)" };
            ("traditional", !exists, note.to_string())
        }
        Definition::Cbd => {
            let v = cbd_analyze(&s);
            let mut note = String::new();
            for p in v.pairs.iter().filter(|p| p.achieved != p.maximal) {
                note.push_str(&format!(
                    "\n  P[{} = {}] is at most {} in any overall coupling, below its pairwise maximum {}",
                    s.label(p.content, p.first),
                    s.label(p.content, p.second),
                    format_rational(&p.achieved),
                    format_rational(&p.maximal)
                ));
            }
            ("cbd", v.contextual, note)
        }
    };
    let verdict = if contextual { "contextual" } else { "noncontextual" };
    Ok(Report {
        text: format!("{}: {verdict}{extra}", path.display()),
        json: json!({ "definition": name, "contextual": contextual }),
        status: if contextual { Status::Contextual } else { Status::Ok },
    })
}

fn measure(path: &Path) -> Outcome {
    let s = load(path)?;
    let v = cbd_analyze(&s);
    v.solution.verify(&v.lp).map_err(|e| internal(format!("{}: optimality certificate rejected: {e}", path.display())))?;
    Ok(Report {
        text: format!(
            "{}: measure {} (pairwise maxima {}, coupling optimum {})",
            path.display(),
            format_rational(&v.measure),
            format_rational(&v.bound),
            format_rational(&v.optimum)
        ),
        json: json!({
            "measure": format_rational(&v.measure),
            "bound": format_rational(&v.bound),
            "optimum": format_rational(&v.optimum),
            "contextual": v.contextual,
        }),
        status: if v.contextual { Status::Contextual } else { Status::Ok },
    })
}

/// Resolves a consistification to one system. A non-unique connection class
/// is resolved by its noncontextual member when there is one.
fn consistified_system(s: &System) -> Outcome<(contextuality_core::ConsistifiedSystem, Option<String>)> {
    match consistify(s) {
        ConsistifyOutcome::Consistified(r) => Ok((r, None)),
        ConsistifyOutcome::ClassEmpty(q) => Err(input(format!(
            "content `{}` has no coupling in which every pairwise equality is maximal; consistification is undefined",
            s.content(q).id
        ))),
        ConsistifyOutcome::ClassMultiple(class) => {
            let names: Vec<String> = class.ambiguous_contents().iter().map(|&q| s.content(q).id.clone()).collect();
            let (member, which) = match class.noncontextual_member() {
                Some(m) => (m, "a noncontextual member"),
                None => {
                    let members = class.members(1).or_else(|_| class.members(usize::MAX)).map_err(|_| {
                        internal("connection class has no vertex member")
                    })?;
                    (members.into_iter().next().ok_or_else(|| internal("empty connection class"))?, "a vertex member")
                }
            };
            let note = format!("connections for {{{}}} are not unique; wrote {which} of the class", names.join(","));
            Ok((member, Some(note)))
        }
    }
}

fn consistify_cmd(path: &Path, output: &Path) -> Outcome {
    let s = load(path)?;
    let (r, note) = consistified_system(&s)?;
    let check = verify_consistified(&r);
    if !check.passed() {
        return Err(internal(format!("consistified system failed its own checks: {}", check.mismatches.join("; "))));
    }
    write(output, &r.system.to_json())?;
    let mut text = format!(
        "wrote {} ({} contents, {} contexts)",
        output.display(),
        r.system.contents().len(),
        r.system.contexts().len()
    );
    if let Some(n) = &note {
        text.push_str(&format!("\nnote: {n}"));
    }
    Ok(Report {
        text,
        json: json!({
            "output": output.display().to_string(),
            "contents": r.system.contents().len(),
            "contexts": r.system.contexts().len(),
            "note": note,
        }),
        status: Status::Ok,
    })
}

fn hvm_cmd(path: &Path, model: Model, consistified: bool, output: &Path) -> Outcome {
    let s = load(path)?;
    let (target, witness) = if consistified {
        let (r, _) = consistified_system(&s)?;
        let forms = build_consistified_hvms(&r)?;
        let w = match model {
            Model::Fc => Some(forms.fc_no_cim),
            Model::Cim => Some(forms.cim_no_fc),
            Model::Bell => forms.bell,
            Model::Gen => Some(build_gen(&r.system)),
        };
        (r.system, w)
    } else {
        let w = match model {
            Model::Gen => Some(build_gen(&s)),
            Model::Cim => Some(to_cim_no_fc(&build_gen(&s))),
            Model::Fc => Some(to_fc_no_cim(&to_cim_no_fc(&build_gen(&s)))?),
            Model::Bell => build_bell(&s),
        };
        (s, w)
    };
    let Some(w) = witness else {
        return Ok(Report {
            text: "no Bell HVM exists: the joint-distribution LP is infeasible (Farkas certificate verified)".into(),
            json: json!({ "model": "bell", "exists": false }),
            status: Status::Contextual,
        });
    };
    let report = verify_witness(&w, &target)?;
    if !report.passed() {
        let failures: Vec<&String> = report.failures().collect();
        return Err(internal(format!("constructed witness failed verification: {failures:?}")));
    }
    write(output, &w.to_json())?;
    Ok(Report {
        text: format!("wrote {} ({} hidden states)", output.display(), w.states.len()),
        json: json!({ "output": output.display().to_string(), "exists": true, "states": w.states.len() }),
        status: Status::Ok,
    })
}

fn verify_hvm(witness: &Path, path: &Path) -> Outcome {
    let w = load_witness(witness)?;
    let s = load(path)?;
    let report = verify_witness(&w, &s)?;
    let failures: Vec<&String> = report.failures().collect();
    let mut text = format!("{}: {}", witness.display(), if report.passed() { "valid" } else { "INVALID" });
    for f in &failures {
        text.push_str(&format!("\n  {f}"));
    }
    Ok(Report {
        text,
        json: json!({ "valid": report.passed(), "report": report }),
        status: if report.passed() { Status::Ok } else { Status::Contextual },
    })
}

fn sample_cmd(witness: &Path, context: &str, n: u64, seed: u64) -> Outcome {
    let w = load_witness(witness)?;
    let counts = sample(&w, context, n, seed)?;
    let c = w.context_index(context)?;
    let contents = &w.contexts[c.index()].1;
    let label = |t: &[usize]| -> Vec<String> {
        contents.iter().zip(t).map(|(q, &x)| w.contents[q.index()].alphabet[x].clone()).collect()
    };
    let freq = empirical(&counts);
    let mut text = format!("context `{context}`, n = {n}, seed = {seed}");
    let mut rows = Vec::new();
    for (t, k) in &counts {
        let l = label(t);
        text.push_str(&format!("\n  ({}) {k} {:.6}", l.join(","), freq[t]));
        rows.push(json!({ "outcome": l, "count": k, "frequency": freq[t] }));
    }
    Ok(Report {
        text,
        json: json!({ "context": context, "n": n, "seed": seed, "counts": rows }),
        status: Status::Ok,
    })
}

fn oracle(path: &Path) -> Outcome {
    let s = load(path)?;
    let report = cross_validate(&s)?;
    let mut text = format!("{}: {}", path.display(), if report.passed() { "all checks agree" } else { "DISAGREEMENT" });
    for c in &report.checks {
        text.push_str(&format!("\n  [{}] {}: {}", if c.agree { "ok" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(Report {
        text,
        json: serde_json::to_value(&report).expect("report serializes"),
        status: if report.passed() { Status::Ok } else { Status::Internal },
    })
}

fn catalog_cmd(name: &str, output: &Path, seed: u64, correlations: Option<&str>) -> Outcome {
    let correlations = match correlations {
        None => None,
        Some(values) => {
            let parsed = values.split(',').map(|v| parse_rational(v.trim())).collect::<Result<Vec<_>, _>>()?;
            Some(<[_; 4]>::try_from(parsed).map_err(|_| input("--correlations takes exactly four values"))?)
        }
    };
    let s = catalog::by_name(name, seed, correlations)?;
    write(output, &s.to_json())?;
    Ok(Report {
        text: format!("wrote {} ({} contents, {} contexts)", output.display(), s.contents().len(), s.contexts().len()),
        json: json!({ "output": output.display().to_string(), "name": name, "seed": seed }),
        status: Status::Ok,
    })
}

fn per_file(files: &[PathBuf], f: impl Fn(&Path) -> Outcome + Sync) -> Vec<(Option<PathBuf>, Outcome)> {
    files.par_iter().map(|p| (Some(p.clone()), f(p))).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if cli.dump_tableau {
        logger.filter_module("contextuality_core::lp", log::LevelFilter::Trace);
    }
    logger.init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(Status::Input as u8);
        }
    }

    let (name, results) = match &cli.command {
        Command::Validate { files } => ("validate", per_file(files, validate)),
        Command::Consistency { files } => ("consistency", per_file(files, consistency)),
        Command::Contextual { files, definition } => ("contextual", per_file(files, |p| contextual(p, *definition))),
        Command::Measure { files } => ("measure", per_file(files, measure)),
        Command::Oracle { files } => ("oracle", per_file(files, oracle)),
        Command::Consistify { file, output } => ("consistify", vec![(Some(file.clone()), consistify_cmd(file, output))]),
        Command::Hvm { file, model, consistified, output } => {
            ("hvm", vec![(Some(file.clone()), hvm_cmd(file, *model, *consistified, output))])
        }
        Command::VerifyHvm { witness, file } => ("verify-hvm", vec![(Some(file.clone()), verify_hvm(witness, file))]),
        Command::Sample { witness, context, n, seed } => {
            ("sample", vec![(Some(witness.clone()), sample_cmd(witness, context, *n, *seed))])
        }
        Command::Catalog { name, output, seed, correlations } => {
            ("catalog", vec![(None, catalog_cmd(name, output, *seed, correlations.as_deref()))])
        }
    };
    if results.is_empty() {
        eprintln!("error: no input files");
        return ExitCode::from(Status::Input as u8);
    }

    let mut worst = Status::Ok;
    for (file, result) in results {
        match result {
            Ok(r) => {
                if cli.json {
                    println!("{}", envelope(name, file.as_deref(), r.json));
                } else {
                    println!("{}", r.text);
                }
                worst = worst.max(r.status);
            }
            Err(f) => {
                let kind = if f.status == Status::Internal { "internal error" } else { "error" };
                if cli.json {
                    let body = json!({ "error": f.message, "kind": kind });
                    println!("{}", envelope(name, file.as_deref(), body));
                }
                eprintln!("{kind}: {}", f.message);
                worst = worst.max(f.status);
            }
        }
    }
    ExitCode::from(worst as u8)
}
