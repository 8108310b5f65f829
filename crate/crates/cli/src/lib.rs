//! Command-line front end: load documents, run constructors and the
//! exactness checker, write reports.

pub mod demo;
pub mod docs;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use exactsem::{
    aggregate_micro_macro, check_exact, equilibrate, marginalize_childless, marginalize_nonintervened, CertifiedTriple,
    CheckConfig, ExactnessReport, Intervention, Sem,
};

use docs::{read_json, read_model, read_source, write_json, DynamicsDoc, ModelDoc, OmegaDoc, ReportDoc, SourceDoc, TauDoc};

#[derive(Debug, Parser)]
#[command(name = "exactsem", version, about = "Structural equation models and exact transformations between them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model document.
    Validate { model: PathBuf },
    /// Solve the model for one exogenous draw.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// e.g. `do(X1=0, X2=1)`; empty or `∅` for none.
        #[arg(long, default_value = "")]
        intervention: String,
        /// JSON object mapping each exogenous id to a value.
        #[arg(long)]
        noise: PathBuf,
    },
    /// Draw samples as CSV.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "")]
        intervention: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check whether a target model is an exact transformation of a source.
    CheckExact {
        /// Model document, or dynamical spec document.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        tau: PathBuf,
        #[arg(long)]
        omega: PathBuf,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Marginalise variables out of a model.
    Marginalize {
        #[arg(long)]
        model: PathBuf,
        /// Comma separated variable names.
        #[arg(long, value_delimiter = ',')]
        drop: Vec<String>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average a two-layer linear model into a macro model.
    Aggregate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the equilibrium model of a linear dynamical process.
    Equilibrate {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        check: CheckArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a bundled scenario.
    Demo {
        #[arg(value_enum)]
        name: demo::DemoName,
        #[command(flatten)]
        check: CheckArgs,
        /// Directory for the scenario's documents.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Childless,
    Nonintervened,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    #[arg(long, default_value_t = 5)]
    pub random: usize,
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    /// Sample even where closed forms exist.
    #[arg(long)]
    pub force_sampling: bool,
}

impl CheckArgs {
    pub fn config(&self) -> CheckConfig {
        CheckConfig {
            grid: self.grid,
            random: self.random,
            samples: self.samples,
            alpha: self.alpha,
            tol: self.tol,
            permutations: self.permutations,
            seed: self.seed,
            force_sampling: self.force_sampling,
        }
    }
}

/// What a command produced: text for stdout and the exit status.
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome { stdout, code: 0 }
    }

    fn verdict(stdout: String, exact: bool) -> Outcome {
        Outcome {
            stdout,
            code: if exact { 0 } else { 1 },
        }
    }
}

/// Parses `argv` and runs it; 0 success or exact, 1 not exact, 2 error.
pub fn main_with(argv: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

pub fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Validate { model } => validate(&model),
        Command::Solve {
            model,
            intervention,
            noise,
        } => solve(&model, &intervention, &noise),
        Command::Sample {
            model,
            intervention,
            n,
            seed,
            out,
        } => sample(&model, &intervention, n, seed, out.as_deref()),
        Command::CheckExact {
            source,
            target,
            tau,
            omega,
            check,
            out,
        } => check_files(&source, &target, &tau, &omega, &check.config(), out.as_deref()),
        Command::Marginalize {
            model,
            drop,
            mode,
            check,
            out,
        } => {
            let sem = read_model(&model)?;
            let z: BTreeSet<String> = drop.into_iter().filter(|s| !s.is_empty()).collect();
            let t = match mode {
                Mode::Childless => marginalize_childless(&sem, &z, &check.config()),
                Mode::Nonintervened => marginalize_nonintervened(&sem, &z, &check.config()),
            }?;
            write_triple(&out, &t)
        }
        Command::Aggregate { model, check, out } => {
            let sem = read_model(&model)?;
            write_triple(&out, &aggregate_micro_macro(&sem, &check.config())?)
        }
        Command::Equilibrate { spec, check, out } => {
            let doc: DynamicsDoc = read_json(&spec)?;
            let spec = doc.to_spec()?;
            write_triple(&out, &equilibrate(&spec, &check.config())?)
        }
        Command::Demo { name, check, out } => demo::run(name, &check.config(), out.as_deref()),
    }
}

fn parse_intervention(text: &str) -> Result<Intervention> {
    text.parse().with_context(|| format!("--intervention `{text}`"))
}

fn validate(path: &Path) -> Result<Outcome> {
    let sem = read_model(path)?;
    let s = sem.analyze_structure();
    let mut out = String::new();
    writeln!(out, "valid model: {} variables, {} exogenous ids", sem.variables().len(), sem.noise().exogenous().len())?;
    writeln!(out, "acyclic: {}", s.acyclic)?;
    writeln!(out, "linear: {}", s.linear.is_some())?;
    writeln!(out, "intervention families: {}", sem.catalog().families().len())?;
    if !s.acyclic {
        for f in sem.catalog().families() {
            // solvability under one representative member per family
            if let Some(i) = f.enumerate(1).and_then(|v| v.into_iter().next()) {
                sem.prepare(&i).with_context(|| format!("family `{}`", f.label))?;
            }
        }
        sem.prepare(&Intervention::null()).context("null intervention")?;
    }
    Ok(Outcome::ok(out))
}

fn solve(model: &Path, intervention: &str, noise: &Path) -> Result<Outcome> {
    let sem = read_model(model)?;
    let i = parse_intervention(intervention)?;
    let values: std::collections::BTreeMap<String, f64> = read_json(noise)?;
    let mut e = Vec::new();
    for name in sem.noise().exo_names() {
        e.push(*values.get(name).with_context(|| format!("{}: no value for exogenous `{name}`", noise.display()))?);
    }
    if let Some(extra) = values.keys().find(|k| sem.noise().exo_index(k).is_none()) {
        bail!("{}: `{extra}` is not an exogenous id", noise.display());
    }
    let x = sem.solve_given_noise(&i, &e)?;
    let doc: indexmap::IndexMap<String, f64> = sem.names().into_iter().zip(x).collect();
    Ok(Outcome::ok(docs::to_text(&doc)))
}

fn sample(model: &Path, intervention: &str, n: usize, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let sem = read_model(model)?;
    let i = parse_intervention(intervention)?;
    let s = sem.sample(&i, n, seed)?;
    let mut csv = s.labels().join(",");
    csv.push('\n');
    for row in s.iter_rows() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    match out {
        Some(p) => {
            std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
            Ok(Outcome::ok(format!("wrote {n} rows to {}\n", p.display())))
        }
        None => Ok(Outcome::ok(csv)),
    }
}

/// One line per finding, for humans.
pub fn summary(r: &ExactnessReport) -> String {
    let mut s = String::new();
    let failed: Vec<_> = r.probes.iter().filter(|p| !p.verdict.equal).collect();
    let _ = writeln!(s, "probes: {} checked, {} unequal", r.probes.len(), failed.len());
    for p in failed.iter().take(5) {
        let _ = writeln!(s, "  unequal: {} -> {}: {}", p.intervention, p.image, p.verdict.detail);
    }
    match &r.surjectivity.uncovered {
        None => {
            let _ = writeln!(s, "surjective: yes");
        }
        Some(f) => {
            let _ = writeln!(s, "surjective: no, family `{f}` not covered");
        }
    }
    match (&r.order.counterexample, &r.order.images) {
        (Some((i, j)), Some((a, b))) => {
            let _ = writeln!(s, "order-preserving: no, {i} ≤ {j} but {a} ≰ {b}");
        }
        _ => {
            let _ = writeln!(s, "order-preserving: yes");
        }
    }
    let _ = writeln!(s, "verdict: {}", if r.exact { "EXACT" } else { "NOT EXACT" });
    s
}

fn check_files(
    source: &Path,
    target: &Path,
    tau: &Path,
    omega: &Path,
    cfg: &CheckConfig,
    out: Option<&Path>,
) -> Result<Outcome> {
    let y = read_model(target)?;
    let tau = read_json::<TauDoc>(tau)?.to_tau().with_context(|| tau.display().to_string())?;
    let w: OmegaDoc = read_json(omega)?;
    let report = match read_source(source)? {
        SourceDoc::Model(x) => {
            let w = w.to_omega(x.catalog(), y.catalog()).with_context(|| omega.display().to_string())?;
            check_exact(&x, &y, &tau, &w, cfg)?
        }
        SourceDoc::Dynamics(spec) => {
            let w = w.to_omega(&spec.catalog, y.catalog()).with_context(|| omega.display().to_string())?;
            check_exact(&spec, &y, &tau, &w, cfg)?
        }
    };
    let doc = ReportDoc::from_report(&report, None);
    let text = match out {
        Some(p) => {
            write_json(p, &doc)?;
            summary(&report)
        }
        None => docs::to_text(&doc),
    };
    Ok(Outcome::verdict(text, report.exact))
}

pub fn write_triple(dir: &Path, t: &CertifiedTriple) -> Result<Outcome> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("model.json"), &ModelDoc::from_sem(&t.model))?;
    write_json(&dir.join("tau.json"), &TauDoc::from_tau(&t.tau))?;
    write_json(&dir.join("omega.json"), &OmegaDoc::from_omega(&t.omega))?;
    write_json(&dir.join("report.json"), &ReportDoc::from_report(&t.report, Some(&t.provenance)))?;
    let mut s = format!("{}\n", t.provenance);
    s.push_str(&summary(&t.report));
    s.push_str(&model_text(&t.model));
    let _ = writeln!(s, "wrote {}", dir.display());
    Ok(Outcome::ok(s))
}

/// The model's equations, one per line.
pub fn model_text(sem: &Sem) -> String {
    let mut s = String::new();
    for e in sem.noise().exogenous() {
        let _ = writeln!(s, "  {} := {}", e.name, e.expr);
    }
    for (v, eq) in sem.variables().iter().zip(sem.equations()) {
        let _ = writeln!(s, "  {} = {}", v.name, eq);
    }
    s
}
