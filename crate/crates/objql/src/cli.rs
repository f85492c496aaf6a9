//! Command-line surface: `run` executes a script over a data
//! directory, `repl` hosts an interactive session, `bench` contrasts
//! the optimized and reference engines, and `corpus` regenerates the
//! synthetic constraint corpus with its suite report.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write as _};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::constraints;
use crate::engine::{eval_query, Database, Program, ProfileReport, Statement};
use crate::ingest::{save_jsonl, value_to_json, IngestError};
use crate::qlang::{
    compile_program, parse_source, parse_statement, tokenize, CompileError, ProgramAst,
};
use crate::reference::ref_eval_query_profiled;
use crate::value::Table;

#[derive(Parser)]
#[command(name = "objql", about = "In-memory object-relational query engine", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Optimized,
    Reference,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a script; write every named query result as `<name>.jsonl`.
    Run {
        script: PathBuf,
        /// Directory register statements resolve data files against.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for result files (created if absent).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "optimized")]
        engine: EngineKind,
        /// Also write per-operator timings to `profile.txt`.
        #[arg(long)]
        profile: bool,
        /// Regenerate the synthetic corpus datasets into the data
        /// directory before running.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Interactive session; named results persist across statements.
    Repl {
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a script on both engines, check agreement, report timings.
    Bench {
        script: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Repetitions per engine.
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Largest base table the reference engine will accept.
        #[arg(long, default_value_t = 10_000)]
        ref_cap: usize,
    },
    /// Regenerate the constraint corpus and print the suite report.
    Corpus {
        /// Directory for the scripts, datasets, and report.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Script-level failure (exit 1) vs I/O failure (exit 2).
enum CliError {
    Script(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Script(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Script(m) | CliError::Io(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CompileError> for CliError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Load { .. } => CliError::Io(e.to_string()),
            CompileError::UnknownBuiltin { .. } => CliError::Script(e.to_string()),
        }
    }
}

fn use_color() -> bool {
    std::env::var("OBJQL_COLOR").as_deref() == Ok("1")
}

fn paint(s: &str, code: &str) -> String {
    if use_color() {
        format!("\x1b[{code}m{s}\x1b[0m")
    } else {
        s.to_string()
    }
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run {
            script,
            data,
            out,
            engine,
            profile,
            seed,
        } => cmd_run(&script, &data, &out, engine, profile, seed),
        Cmd::Repl { data } => cmd_repl(&data),
        Cmd::Bench {
            script,
            data,
            reps,
            ref_cap,
        } => cmd_bench(&script, &data, reps.max(1), ref_cap),
        Cmd::Corpus { out, seed } => cmd_corpus(&out, seed),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{} {}", paint("error:", "31"), e.message());
            e.code()
        }
    }
}

fn load_program(script: &Path, data: &Path) -> Result<Program, CliError> {
    let src = std::fs::read_to_string(script)
        .map_err(|e| CliError::Io(format!("{}: {e}", script.display())))?;
    let ast = parse_source(&src).map_err(|e| CliError::Script(e.to_string()))?;
    Ok(compile_program(&ast, data)?)
}

/// Regenerates the corpus datasets (and ground truth) into `data`.
fn seed_data_dir(data: &Path, seed: u64) -> Result<(), CliError> {
    std::fs::create_dir_all(data)?;
    for entry in constraints::build_corpus(seed) {
        for (table_name, table) in &entry.tables {
            let file = if *table_name == "bounds" {
                "series_bounds"
            } else {
                table_name
            };
            save_jsonl(&data.join(format!("{file}.jsonl")), table)?;
        }
        save_jsonl(&data.join(format!("truth_{}.jsonl", entry.name)), &entry.truth)?;
    }
    Ok(())
}

fn cmd_run(
    script: &Path,
    data: &Path,
    out: &Path,
    engine: EngineKind,
    profile: bool,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if let Some(seed) = seed {
        seed_data_dir(data, seed)?;
    }
    let program = load_program(script, data)?;
    std::fs::create_dir_all(out)?;
    let mut db = Database::new();
    let mut profiles: Vec<(String, ProfileReport)> = Vec::new();
    for stmt in &program {
        match stmt {
            Statement::Register {
                name,
                table,
                overwrite,
            } => {
                db = db
                    .register(name, table.clone(), *overwrite)
                    .map_err(|e| CliError::Script(e.to_string()))?;
            }
            Statement::Query { name, plan } => {
                let (t, report) = match engine {
                    EngineKind::Optimized => eval_query(&db, plan, profile)
                        .map_err(|e| CliError::Script(e.to_string()))?,
                    EngineKind::Reference => {
                        let (t, r) = ref_eval_query_profiled(&db, plan)
                            .map_err(|e| CliError::Script(e.to_string()))?;
                        (t, profile.then_some(r))
                    }
                };
                save_jsonl(&out.join(format!("{name}.jsonl")), &t)?;
                if let Some(r) = report {
                    profiles.push((name.clone(), r));
                }
                db = db
                    .register(name, t, true)
                    .map_err(|e| CliError::Script(e.to_string()))?;
            }
        }
    }
    if profile {
        let mut text = String::from("Running time (in seconds) of each query operation\n");
        for (name, report) in &profiles {
            let _ = writeln!(text, "\n[{name}]\n{report}");
        }
        std::fs::write(out.join("profile.txt"), text)?;
    }
    Ok(())
}

fn show_rows(t: &Table, k: usize) {
    for row in t.rows.iter().take(k) {
        match value_to_json(row) {
            Ok(j) => println!("{j}"),
            Err(m) => println!("<unprintable row: {m}>"),
        }
    }
    if t.len() > k {
        println!("... ({} rows total)", t.len());
    }
}

fn repl_command(db: &Database, line: &str) {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [":tables"] => {
            for name in db.names() {
                match db.get(name) {
                    Ok(t) => println!("{name}  ({} rows)", t.len()),
                    Err(_) => println!("{name}"),
                }
            }
        }
        [":show", name] | [":show", name, _] => {
            let k = parts
                .get(2)
                .and_then(|s| s.parse::<usize>().ok())
                .unwrap_or(10);
            match db.get(name) {
                Ok(t) => show_rows(t, k),
                Err(e) => println!("{} {e}", paint("error:", "31")),
            }
        }
        _ => println!("commands: :show name [k]   :tables   :quit"),
    }
}

/// One REPL statement: parse, compile against the data directory, and
/// fold the result into the session database.
fn repl_statement(db: Database, data: &Path, line: &str) -> Database {
    let compiled = tokenize(line)
        .and_then(|tokens| parse_statement(&tokens))
        .map_err(|e| CliError::Script(e.to_string()))
        .and_then(|stmt| {
            let ast = ProgramAst {
                statements: vec![stmt],
            };
            Ok(compile_program(&ast, data)?)
        });
    let program = match compiled {
        Ok(p) => p,
        Err(e) => {
            println!("{} {}", paint("error:", "31"), e.message());
            return db;
        }
    };
    let mut db = db;
    for stmt in program {
        let (name, result) = match stmt {
            Statement::Register { name, table, .. } => (name, Ok(table)),
            Statement::Query { name, plan } => {
                (name, eval_query(&db, &plan, false).map(|(t, _)| t))
            }
        };
        match result {
            Ok(t) => {
                println!("{name}: {} rows", t.len());
                match db.register(&name, t, true) {
                    Ok(next) => db = next,
                    Err(e) => println!("{} {e}", paint("error:", "31")),
                }
            }
            Err(e) => println!("{} {e}", paint("error:", "31")),
        }
    }
    db
}

fn cmd_repl(data: &Path) -> Result<(), CliError> {
    let stdin = io::stdin();
    let mut db = Database::new();
    loop {
        print!("{} ", paint("objql>", "36"));
        io::stdout().flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            return Ok(()); // EOF
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":quit" {
            return Ok(());
        }
        if line.starts_with(':') {
            repl_command(&db, line);
        } else {
            db = repl_statement(db, data, line);
        }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs the program once on the chosen engine, returning each query's
/// result and profile.
fn bench_pass(
    program: &Program,
    engine: EngineKind,
) -> Result<Vec<(String, Table, ProfileReport)>, CliError> {
    let mut db = Database::new();
    let mut out = Vec::new();
    for stmt in program {
        match stmt {
            Statement::Register {
                name,
                table,
                overwrite,
            } => {
                db = db
                    .register(name, table.clone(), *overwrite)
                    .map_err(|e| CliError::Script(e.to_string()))?;
            }
            Statement::Query { name, plan } => {
                let (t, report) = match engine {
                    EngineKind::Optimized => {
                        let (t, r) = eval_query(&db, plan, true)
                            .map_err(|e| CliError::Script(e.to_string()))?;
                        (t, r.unwrap_or_default())
                    }
                    EngineKind::Reference => ref_eval_query_profiled(&db, plan)
                        .map_err(|e| CliError::Script(e.to_string()))?,
                };
                db = db
                    .register(name, t.clone(), true)
                    .map_err(|e| CliError::Script(e.to_string()))?;
                out.push((name.clone(), t, report));
            }
        }
    }
    Ok(out)
}

fn cmd_bench(script: &Path, data: &Path, reps: usize, ref_cap: usize) -> Result<(), CliError> {
    let program = load_program(script, data)?;
    for stmt in &program {
        if let Statement::Register { name, table, .. } = stmt {
            if table.len() > ref_cap {
                return Err(CliError::Script(format!(
                    "table `{name}` has {} rows; the reference engine is capped at {ref_cap} \
                     (raise with --ref-cap)",
                    table.len()
                )));
            }
        }
    }

    // per (query, op index): kind and per-rep seconds for each engine
    let mut opt_runs: Vec<Vec<(String, ProfileReport)>> = Vec::new();
    let mut ref_runs: Vec<Vec<(String, ProfileReport)>> = Vec::new();
    for rep in 0..reps {
        let opt = bench_pass(&program, EngineKind::Optimized)?;
        let refr = bench_pass(&program, EngineKind::Reference)?;
        if rep == 0 {
            for ((name, t_opt, _), (_, t_ref, _)) in opt.iter().zip(&refr) {
                if t_opt != t_ref {
                    let differing = t_opt
                        .rows
                        .iter()
                        .zip(&t_ref.rows)
                        .enumerate()
                        .find(|(_, (a, b))| a != b)
                        .map(|(i, (a, b))| {
                            format!("row {i}: optimized {a:?} vs reference {b:?}")
                        })
                        .unwrap_or_else(|| {
                            format!(
                                "row counts differ: optimized {} vs reference {}",
                                t_opt.len(),
                                t_ref.len()
                            )
                        });
                    return Err(CliError::Script(format!(
                        "engines disagree on `{name}`: {differing}"
                    )));
                }
            }
        }
        opt_runs.push(opt.into_iter().map(|(n, _, r)| (n, r)).collect());
        ref_runs.push(refr.into_iter().map(|(n, _, r)| (n, r)).collect());
    }

    println!("Running time (in seconds) of each query operation");
    println!("({} repetitions, mean±std)", reps);
    println!(
        "{:<14} {:<10} {:>20} {:>20}",
        paint("query", "1"),
        "op",
        "optimized",
        "reference"
    );
    for (qi, (name, first)) in opt_runs[0].iter().enumerate() {
        for (oi, entry) in first.entries.iter().enumerate() {
            let opt_times: Vec<f64> = opt_runs
                .iter()
                .map(|run| run[qi].1.entries[oi].seconds)
                .collect();
            let ref_times: Vec<f64> = ref_runs
                .iter()
                .map(|run| run[qi].1.entries[oi].seconds)
                .collect();
            let (om, os) = mean_std(&opt_times);
            let (rm, rs) = mean_std(&ref_times);
            println!(
                "{:<14} {:<10} {:>10.3}\u{b1}{:<9.3} {:>10.3}\u{b1}{:<9.3}",
                if oi == 0 { name.as_str() } else { "" },
                entry.op,
                om,
                os,
                rm,
                rs
            );
        }
        let opt_tot: Vec<f64> = opt_runs.iter().map(|r| r[qi].1.total_seconds).collect();
        let ref_tot: Vec<f64> = ref_runs.iter().map(|r| r[qi].1.total_seconds).collect();
        let (om, os) = mean_std(&opt_tot);
        let (rm, rs) = mean_std(&ref_tot);
        println!(
            "{:<14} {:<10} {:>10.3}\u{b1}{:<9.3} {:>10.3}\u{b1}{:<9.3}",
            "", "total", om, os, rm, rs
        );
    }
    Ok(())
}

fn cmd_corpus(out: &Path, seed: u64) -> Result<(), CliError> {
    constraints::export_corpus(out, seed)?;
    let reports = constraints::run_suite(seed).map_err(CliError::Script)?;
    let mut jsonl = String::new();
    for r in &reports {
        println!("{r}");
        let _ = writeln!(
            jsonl,
            "{{\"name\":{:?},\"flagged\":{},\"truth\":{},\"precision\":{},\"recall\":{}}}",
            r.name, r.flagged, r.truth, r.precision, r.recall
        );
    }
    std::fs::write(out.join("report.jsonl"), jsonl)?;
    if reports.iter().all(|r| r.is_exact()) {
        println!("{}", paint("all constraints exact (precision = recall = 1.0)", "32"));
        Ok(())
    } else {
        Err(CliError::Script("some constraints missed their ground truth".into()))
    }
}
