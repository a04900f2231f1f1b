//! Command-line front end: `attack`, `escalate` and `forward`.

pub mod report;

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use neuroconcolic::explore::{check_adversarial, Order, SearchConfig};
use neuroconcolic::nn::{forward_concolic, forward_concrete, InputFile, ModelSpec};
use neuroconcolic::select::{SelectError, SelectionPolicy};
use neuroconcolic::solve::{SmtProcess, SolverConfig};
use neuroconcolic::FormatError;

use report::{AttackReport, InputRecord};

#[derive(Debug, Parser)]
#[command(
    name = "neuroconcolic",
    version,
    about = "Concolic adversarial search on small neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attack every input with a fixed number of symbolic positions.
    Attack {
        #[command(flatten)]
        common: AttackArgs,
        /// Number of input positions made symbolic.
        #[arg(long, short = 'k', value_parser = clap::value_parser!(u64).range(1..))]
        pixels: u64,
    },
    /// Attack with growing pixel counts, retrying only inputs not yet broken.
    Escalate {
        #[command(flatten)]
        common: AttackArgs,
        /// Strictly increasing pixel counts, e.g. `1,4,8,16,32`.
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<usize>,
    },
    /// Print the predicted class and probabilities of one input.
    Forward {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Flat indices to run symbolically (variable ids follow this order).
        #[arg(long, value_delimiter = ',')]
        symbolic: Vec<usize>,
        /// Write the recorded branch trace here as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print the full-precision prediction as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input file, or a directory whose `*.json` files are all attacked.
    #[arg(long)]
    pub input: PathBuf,
    /// `random`, `scores:PATH` or `occlusion`.
    #[arg(long, default_value = "random")]
    pub select: String,
    /// Occlusion baseline value.
    #[arg(long, default_value_t = 0.0)]
    pub baseline: f64,
    #[arg(long, default_value = "queue")]
    pub order: Order,
    /// Per-input budget in seconds.
    #[arg(long, default_value_t = 1800.0)]
    pub timeout: f64,
    /// Per-query solver budget in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub query_timeout: f64,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub clamp: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver command line; the dialect is inferred from the executable name.
    #[arg(long, default_value = "z3")]
    pub solver: String,
    /// Keep every solver query under this directory.
    #[arg(long)]
    pub dump_smt: Option<PathBuf>,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where adversarial inputs are written (default: next to the report,
    /// or the working directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Inputs attacked in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Attack { common, pixels } => escalate(&common, &[pixels as usize]),
        Command::Escalate { common, schedule } => {
            if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(CliError::Usage(format!(
                    "schedule {schedule:?} must be strictly increasing positive counts"
                )));
            }
            escalate(&common, &schedule)
        }
        Command::Forward {
            model,
            input,
            symbolic,
            trace,
            json,
        } => forward(&model, &input, &symbolic, trace.as_deref(), json),
    }
}

#[derive(Serialize)]
struct TraceEntry {
    condition: String,
    taken: bool,
}

fn forward(
    model_path: &Path,
    input_path: &Path,
    symbolic: &[usize],
    trace_path: Option<&Path>,
    json: bool,
) -> Result<(), CliError> {
    let model = ModelSpec::load(model_path)?;
    let input = InputFile::load(input_path)?;
    let x = input.tensor();
    let p = forward_concrete(&model, &x).map_err(|e| io_err(input_path, e))?;
    if json {
        println!(
            "{}",
            serde_json::to_string(&p).expect("prediction serializes")
        );
    } else {
        let probs: Vec<String> = p.probs.iter().map(|v| format!("{v:.3}")).collect();
        println!("class {}, probs [{}]", p.class, probs.join(", "));
    }
    if let Some(path) = trace_path {
        if let Some(&bad) = symbolic.iter().find(|&&i| i >= x.len()) {
            return Err(CliError::Usage(format!(
                "symbolic index {bad} outside input of {}",
                x.len()
            )));
        }
        let vars: Vec<(usize, usize)> = symbolic.iter().copied().zip(0..).collect();
        let run = forward_concolic(&model, &x, &vars).map_err(|e| io_err(input_path, e))?;
        let entries: Vec<TraceEntry> = run
            .trace
            .predicates()
            .iter()
            .map(|p| TraceEntry {
                condition: p.condition.to_string(),
                taken: p.taken,
            })
            .collect();
        let text = serde_json::to_string_pretty(&entries).expect("trace serializes");
        std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn input_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| io_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Io(format!("{}: no .json inputs", path.display())));
    }
    Ok(files)
}

fn input_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Per-input seed, so batch members differ but reruns agree.
fn input_seed(seed: u64, id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64 ^ seed, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

fn policy(args: &AttackArgs, id: &str) -> Result<SelectionPolicy, CliError> {
    match args.select.as_str() {
        "random" => Ok(SelectionPolicy::Random {
            seed: input_seed(args.seed, id),
        }),
        "occlusion" => Ok(SelectionPolicy::Occlusion {
            baseline: args.baseline,
        }),
        s => match s.strip_prefix("scores:") {
            Some(p) if !p.is_empty() => {
                let p = Path::new(p);
                // a directory holds one score file per input, named after it
                let path = if p.is_dir() {
                    p.join(format!("{id}.json"))
                } else {
                    p.to_path_buf()
                };
                Ok(SelectionPolicy::ImportanceFile { path })
            }
            _ => Err(CliError::Usage(format!(
                "--select {s:?}: expected random, scores:PATH or occlusion"
            ))),
        },
    }
}

fn search_config(args: &AttackArgs) -> Result<SearchConfig, CliError> {
    let secs = |v: f64, what: &str| {
        Duration::try_from_secs_f64(v)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| CliError::Usage(format!("{what} must be a positive number of seconds")))
    };
    let config = SearchConfig {
        order: args.order,
        timeout: secs(args.timeout, "--timeout")?,
        query_timeout: secs(args.query_timeout, "--query-timeout")?,
        clamp: args.clamp.as_ref().map(|v| (v[0], v[1])),
        epsilon: args.epsilon,
        max_iterations: args.max_iterations,
        seed: args.seed,
        ..SearchConfig::default()
    };
    config.validate().map_err(CliError::Usage)?;
    Ok(config)
}

struct Job {
    id: String,
    input: InputFile,
}

fn attack_one(
    job: &Job,
    k: usize,
    args: &AttackArgs,
    model: &ModelSpec,
    config: &SearchConfig,
    solver: &SolverConfig,
) -> Result<(InputRecord, Option<InputFile>), CliError> {
    let x = job.input.tensor();
    let policy = policy(args, &job.id)?;
    let selected = policy.select(model, &x, k).map_err(|e| match e {
        SelectError::Count { .. } | SelectError::Length { .. } => {
            CliError::Usage(format!("{}: {e}", job.id))
        }
        other => CliError::Io(format!("{}: {other}", job.id)),
    })?;
    let mut process = SmtProcess::new(solver.clone());
    if let Some(dir) = &args.dump_smt {
        process = process.with_dump_dir(dir.join(format!("{}-k{k}", job.id)));
    }
    let result = check_adversarial(model, &x, &selected, config, &mut process)
        .map_err(|e| CliError::Io(format!("{}: {e}", job.id)))?;
    let record = InputRecord::new(
        job.id.clone(),
        policy.describe(),
        selected,
        &result,
        args.order.to_string(),
    );
    let adversarial = result.adversarial.map(|a| InputFile {
        shape: job.input.shape.clone(),
        data: a.data,
        label: Some(a.class as i64),
    });
    Ok((record, adversarial))
}

fn escalate(args: &AttackArgs, schedule: &[usize]) -> Result<(), CliError> {
    let config = search_config(args)?;
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let solver = SolverConfig::from_command(&args.solver)
        .ok_or_else(|| CliError::Solver("empty --solver command".into()))?;
    let model = ModelSpec::load(&args.model)?;
    let jobs: Vec<Job> = input_files(&args.input)?
        .into_iter()
        .map(|p| {
            Ok(Job {
                id: input_id(&p),
                input: InputFile::load(&p)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    for job in &jobs {
        if job.input.shape != model.input_shape {
            return Err(CliError::Io(format!(
                "{}: shape {:?} does not match model input {:?}",
                job.id, job.input.shape, model.input_shape
            )));
        }
    }
    SmtProcess::new(solver.clone())
        .probe()
        .map_err(CliError::Solver)?;

    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| {
            args.report
                .as_ref()
                .and_then(|r| r.parent())
                .map(Path::to_path_buf)
        })
        .unwrap_or_else(|| PathBuf::from("."));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;

    let mut report = AttackReport::new(
        args.model.display().to_string(),
        jobs.len(),
        args.select.clone(),
        args.order.to_string(),
        args.seed,
    );
    let mut pending: Vec<&Job> = jobs.iter().collect();
    for &k in schedule {
        let results: Vec<_> = pool.install(|| {
            pending
                .par_iter()
                .map(|job| attack_one(job, k, args, &model, &config, &solver))
                .collect()
        });
        let mut records = Vec::new();
        let mut still = Vec::new();
        for (job, r) in pending.iter().zip(results) {
            let (mut record, adversarial) = r?;
            if let Some(adv) = adversarial {
                std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
                let path = out_dir.join(format!("{}.adv.json", job.id));
                std::fs::write(&path, adv.to_json()).map_err(|e| io_err(&path, e))?;
                record.adversarial_file = Some(path.display().to_string());
            } else {
                still.push(*job);
            }
            log::info!(
                "{} k={k}: {:?} after {} iterations",
                record.input_id,
                record.outcome,
                record.iterations
            );
            eprintln!(
                "{} k={k}: {} ({} iterations, {:.2}s)",
                record.input_id,
                serde_json::to_value(record.outcome)
                    .unwrap()
                    .as_str()
                    .unwrap_or_default(),
                record.iterations,
                record.wall_time
            );
            records.push(record);
        }
        report.push_stage(k, records);
        pending = still;
    }

    let text = report.to_json();
    match &args.report {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e))?,
        None => println!("{text}"),
    }
    for s in &report.stages {
        eprintln!(
            "k={}: {}/{} broken, cumulative ATK {:.1}%",
            s.pixels, s.aggregates.successes, s.aggregates.attempted, s.cumulative_atk_percent
        );
    }
    Ok(())
}
