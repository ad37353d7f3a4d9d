use ascension_core::activity::activity_classify;
use ascension_core::ascend::{iterate_t, t_pattern_sample, IterateOptions};
use ascension_core::checks;
use ascension_core::element::{format_tree_word, Element};
use ascension_core::error::Error as CoreError;
use ascension_core::evaluate::{evaluate_measure, evaluate_sample, DEFAULT_ENUM_BUDGET};
use ascension_core::measure::{parse_pattern_measure, GroupMeasure, PatternMeasure};
use ascension_core::mother::MotherGroup;
use ascension_core::orbits::schreier_graph;
use ascension_core::rng::replica_rng;
use ascension_core::walk::{sample_walk_endpoints, walk_entropy_series, KeyDepth};
use ascension_core::{AutomatonSpec, KeyMode};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::Digest;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "ascension",
    about = "Workbench for automaton groups: tree-automorphism algebra, mother groups, \
             pattern ascension and random-walk entropy",
    version
)]
pub struct Cli {
    /// Root seed; per-replica streams are split deterministically from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for Monte Carlo (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Write primary output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Classify activity degrees and hierarchy levels of a spec file.
    Classify(ClassifyArgs),
    /// Reinterpret an automaton on blocks of k letters.
    Collapse(CollapseArgs),
    /// Emit the labeled level-n Schreier graph of a spec's states.
    Schreier(SchreierArgs),
    /// Emit the (m,r) mother-group spec file.
    Mother(MotherArgs),
    /// Sample uniform elements of the level subgroup L_{m,k}.
    LevelSample(LevelSampleArgs),
    /// Evaluate a pattern measure into the mother group.
    Evaluate(EvaluateArgs),
    /// Iterate the pattern ascension operator with diagnostics.
    Ascend(AscendArgs),
    /// Draw Monte Carlo samples from the ascended pattern measure.
    AscendSample(AscendSampleArgs),
    /// Simulate walk endpoints Z_n for an evaluated step measure.
    Walk(WalkArgs),
    /// Estimate the walk entropy series H(Z_n) over several horizons.
    Entropy(EntropyArgs),
    /// Run named verification suites (see `verify --list`).
    Verify(VerifyArgs),
    /// Execute a config file and emit a reproducible run record.
    Run(RunArgs),
}

#[derive(Args)]
pub struct ClassifyArgs {
    /// Automaton spec file.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Args)]
pub struct CollapseArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub k: usize,
}

#[derive(Args)]
pub struct SchreierArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub level: usize,
    /// Comma-separated generator words (defaults to all states).
    #[arg(long)]
    pub generators: Option<String>,
}

#[derive(Args)]
pub struct MotherArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub r: i32,
    /// Output format; only `spec` is defined.
    #[arg(long, default_value = "spec")]
    pub emit: String,
}

#[derive(Args)]
pub struct LevelSampleArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: i32,
    /// Mother-group depth r (defaults to max(k, 0)).
    #[arg(long)]
    pub r: Option<i32>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub m: usize,
    /// Mother-group depth r (defaults to the largest letter index used).
    #[arg(long)]
    pub r: Option<i32>,
    #[arg(long = "pattern-file")]
    pub pattern_file: PathBuf,
    /// `exact` or `sample`.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    /// Sample count in sample mode.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Args)]
pub struct AscendArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long = "length-cap", default_value_t = 64)]
    pub length_cap: usize,
    #[arg(long = "defect-budget", default_value_t = 0.05)]
    pub defect_budget: f64,
}

#[derive(Args)]
pub struct AscendSampleArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Args)]
pub struct WalkArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub r: Option<i32>,
    /// Pattern-measure file defining the step distribution via evaluation.
    #[arg(long)]
    pub measure: PathBuf,
    /// Number of steps per walk.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
}

#[derive(Args)]
pub struct EntropyArgs {
    /// Step distribution: a pattern-measure file path, or an inline
    /// `pattern:W LETTERS[;W LETTERS...]` spec.
    #[arg(long)]
    pub steps: String,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub r: Option<i32>,
    /// Comma-separated strictly increasing horizons.
    #[arg(long, default_value = "16,64,256,1024")]
    pub horizons: String,
    #[arg(long = "N", default_value_t = 100_000)]
    pub n_walks: usize,
    /// `auto` (exact canonical keys) or an explicit portrait depth.
    #[arg(long, default_value = "auto")]
    pub depth: String,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(default_value = "all")]
    pub suite: String,
    /// List available suites and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args)]
pub struct RunArgs {
    /// JSON config: {"argv": [...], "outputs": [...]}.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct RunConfig {
    argv: Vec<String>,
    #[serde(default)]
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct RunRecord {
    config: RunConfig,
    version: &'static str,
    wall_ms: u128,
    exit: i32,
    outputs: Vec<OutputDigest>,
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

enum CmdError {
    Usage(String),
    CheckFailed(String),
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        CmdError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Usage(e.to_string())
    }
}

pub fn run(cli: Cli) -> i32 {
    if cli.threads > 0 {
        // Ignore failure if a global pool already exists (e.g. under `run`).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(CmdError::CheckFailed(msg)) => {
            eprintln!("FAILED: {msg}");
            1
        }
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CmdError> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_spec(path: &PathBuf) -> Result<Arc<AutomatonSpec>, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?;
    Ok(AutomatonSpec::parse(&text)?)
}

fn load_measure(path: &PathBuf) -> Result<PatternMeasure<f64>, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_pattern_measure(&text)?)
}

fn mother_for(m: usize, r: Option<i32>, mu: &PatternMeasure<f64>) -> Result<MotherGroup, CmdError> {
    let needed = mu
        .iter()
        .filter_map(|(p, _)| p.max_letter())
        .max()
        .unwrap_or(-1)
        .max(0) as i32;
    Ok(MotherGroup::new(m, r.unwrap_or(needed).max(needed))?)
}

fn dispatch(cli: &Cli) -> Result<(), CmdError> {
    match &cli.command {
        Command::Classify(args) => {
            let spec = load_spec(&args.spec)?;
            let report = activity_classify(&spec)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            emit(cli, &format!("{json}\n"))
        }
        Command::Collapse(args) => {
            let spec = load_spec(&args.spec)?;
            let collapsed = spec.k_collapse(args.k)?;
            emit(cli, &collapsed.to_text())
        }
        Command::Schreier(args) => {
            let spec = load_spec(&args.spec)?;
            let generators: Vec<(String, Element)> = match &args.generators {
                Some(list) => list
                    .split(',')
                    .map(|w| Ok((w.trim().to_string(), Element::parse(&spec, w.trim())?)))
                    .collect::<Result<_, CmdError>>()?,
                None => spec
                    .states()
                    .iter()
                    .map(|s| Ok((s.name.clone(), Element::state(&spec, &s.name)?)))
                    .collect::<Result<_, CmdError>>()?,
            };
            let edges = schreier_graph(&generators, args.level)?;
            let mut out = String::new();
            for e in edges {
                let _ = writeln!(
                    out,
                    "{} {} {}",
                    format_tree_word(spec.m(), &e.from),
                    e.label,
                    format_tree_word(spec.m(), &e.to)
                );
            }
            emit(cli, &out)
        }
        Command::Mother(args) => {
            if args.emit != "spec" {
                return Err(CmdError::Usage(format!("unknown emit format `{}`", args.emit)));
            }
            let g = MotherGroup::new(args.m, args.r)?;
            emit(cli, &g.spec().to_text())
        }
        Command::LevelSample(args) => {
            let r = args.r.unwrap_or(args.k.max(0));
            let g = MotherGroup::new(args.m, r)?;
            let mut rng = replica_rng(cli.seed, 0);
            let mut out = String::new();
            for _ in 0..args.n {
                let e = g.sample_level(args.k, &mut rng)?;
                let _ = writeln!(out, "{}", e.to_text());
            }
            emit(cli, &out)
        }
        Command::Evaluate(args) => {
            let mu = load_measure(&args.pattern_file)?;
            let g = mother_for(args.m, args.r, &mu)?;
            match args.mode.as_str() {
                "exact" => {
                    let ev: GroupMeasure<f64> =
                        evaluate_measure(&mu, &g, KeyMode::Exact, DEFAULT_ENUM_BUDGET)?;
                    let mut out = String::new();
                    for (key, (w, e)) in ev.iter() {
                        let _ = writeln!(out, "{w}\t{}\t{}", e.to_text(), key.to_hex());
                    }
                    let _ = writeln!(out, "# mass {} defect {}", ev.mass(), ev.defect());
                    emit(cli, &out)
                }
                "sample" => {
                    let mut rng = replica_rng(cli.seed, 0);
                    let mut out = String::new();
                    for _ in 0..args.n {
                        let mass = mu.mass();
                        let mut u = rng.random_range(0.0..mass);
                        let mut chosen = None;
                        for (p, w) in mu.iter() {
                            if u < *w {
                                chosen = Some(p.clone());
                                break;
                            }
                            u -= w;
                        }
                        let p = chosen
                            .ok_or_else(|| CmdError::Usage("empty measure".into()))?;
                        let e = evaluate_sample(&p, &g, &mut rng)?;
                        let _ = writeln!(out, "{}", e.to_text());
                    }
                    emit(cli, &out)
                }
                other => Err(CmdError::Usage(format!("unknown mode `{other}`"))),
            }
        }
        Command::Ascend(args) => {
            let mu = load_measure(&args.measure)?;
            let opts = IterateOptions {
                tol: args.tol,
                length_cap: args.length_cap,
                defect_budget: args.defect_budget,
                ..Default::default()
            };
            let (_, diag) = iterate_t(&mu, args.m, args.iterations, &opts)?;
            let mut out = String::new();
            for step in &diag.steps {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::to_string(step).map_err(|e| CmdError::Usage(e.to_string()))?
                );
            }
            if let Some(msg) = &diag.aborted {
                let _ = writeln!(out, "{{\"aborted\":{:?}}}", msg);
            }
            emit(cli, &out)
        }
        Command::AscendSample(args) => {
            let mu = load_measure(&args.measure)?;
            let mut rng = replica_rng(cli.seed, 0);
            let mut out = String::new();
            for _ in 0..args.n {
                let p = t_pattern_sample(&mu, args.m, &mut rng, 1_000_000)?;
                let _ = writeln!(out, "{p}");
            }
            emit(cli, &out)
        }
        Command::Walk(args) => {
            let mu = load_measure(&args.measure)?;
            let g = mother_for(args.m, args.r, &mu)?;
            let steps: GroupMeasure<f64> =
                evaluate_measure(&mu, &g, KeyMode::Exact, DEFAULT_ENUM_BUDGET)?;
            let endpoints = sample_walk_endpoints(&steps, args.n, args.walks, cli.seed)?;
            let mut out = String::new();
            for e in endpoints {
                let _ = writeln!(out, "{}", e.to_text());
            }
            emit(cli, &out)
        }
        Command::Entropy(args) => {
            let mu = if let Some(inline) = args.steps.strip_prefix("pattern:") {
                parse_pattern_measure(&inline.replace(';', "\n"))?
            } else {
                load_measure(&PathBuf::from(&args.steps))?
            };
            let g = mother_for(args.m, args.r, &mu)?;
            let steps: GroupMeasure<f64> =
                evaluate_measure(&mu, &g, KeyMode::Exact, DEFAULT_ENUM_BUDGET)?;
            let horizons: Vec<usize> = args
                .horizons
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| CmdError::Usage(format!("bad horizon `{t}`")))
                })
                .collect::<Result<_, _>>()?;
            let depth = match args.depth.as_str() {
                "auto" => KeyDepth::Auto,
                d => KeyDepth::Depth(
                    d.parse::<u32>()
                        .map_err(|_| CmdError::Usage(format!("bad depth `{d}`")))?,
                ),
            };
            let series = walk_entropy_series(&steps, &horizons, args.n_walks, depth, cli.seed)?;
            let mut out = String::from("n,H_hat,H_hat_mm,se,H_over_n,depth,distinct_keys\n");
            for e in &series.entries {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    e.n, e.h_hat, e.h_mm, e.se, e.h_over_n, series.depth, e.distinct_keys
                );
            }
            emit(cli, &out)
        }
        Command::Verify(args) => {
            if args.list {
                let mut out = String::new();
                for s in checks::SUITES {
                    let _ = writeln!(out, "{s}");
                }
                return emit(cli, &out);
            }
            let outcomes = checks::run_suite(&args.suite)?;
            let mut out = String::new();
            let mut failed = Vec::new();
            for o in &outcomes {
                let verdict = if o.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "[{verdict}] {}: {}", o.name, o.details);
                if !o.passed {
                    failed.push(o.name);
                }
            }
            emit(cli, &out)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CmdError::CheckFailed(format!(
                    "{} suite(s) failed: {}",
                    failed.len(),
                    failed.join(", ")
                )))
            }
        }
        Command::Run(args) => {
            let text = std::fs::read_to_string(&args.config)
                .map_err(|e| CmdError::Usage(format!("{}: {e}", args.config.display())))?;
            let config: RunConfig =
                serde_json::from_str(&text).map_err(|e| CmdError::Usage(e.to_string()))?;
            let started = std::time::Instant::now();
            let mut argv = vec!["ascension".to_string()];
            argv.extend(config.argv.iter().cloned());
            let inner = Cli::try_parse_from(&argv)
                .map_err(|e| CmdError::Usage(format!("config argv: {e}")))?;
            let exit = match dispatch(&inner) {
                Ok(()) => 0,
                Err(CmdError::CheckFailed(msg)) => {
                    eprintln!("FAILED: {msg}");
                    1
                }
                Err(CmdError::Usage(msg)) => return Err(CmdError::Usage(msg)),
            };
            let mut outputs = Vec::new();
            for path in &config.outputs {
                let bytes = std::fs::read(path)
                    .map_err(|e| CmdError::Usage(format!("{path}: {e}")))?;
                let mut hasher = sha2::Sha256::new();
                hasher.update(&bytes);
                outputs.push(OutputDigest {
                    path: path.clone(),
                    sha256: format!("{:x}", hasher.finalize()),
                });
            }
            let record = RunRecord {
                config,
                version: env!("CARGO_PKG_VERSION"),
                wall_ms: started.elapsed().as_millis(),
                exit,
                outputs,
            };
            let json = serde_json::to_string_pretty(&record)
                .map_err(|e| CmdError::Usage(e.to_string()))?;
            emit(cli, &format!("{json}\n"))?;
            if exit != 0 {
                Err(CmdError::CheckFailed("inner command failed".into()))
            } else {
                Ok(())
            }
        }
    }
}
