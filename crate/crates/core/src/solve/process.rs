//! Driving an external SMT-LIB2 solver over stdin/stdout.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::response::{parse_response, Status};
use super::system::ConstraintSystem;
use crate::concolic::Assignment;

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub status: Status,
    /// Present iff `status` is `Sat`.
    pub model: Option<Assignment>,
    pub approximate: bool,
    pub elapsed: Duration,
    /// Size of the rendered query in bytes.
    pub query_bytes: usize,
    pub diagnostic: Option<String>,
}

impl SolverResult {
    pub fn failed(
        status: Status,
        diagnostic: String,
        query_bytes: usize,
        elapsed: Duration,
    ) -> Self {
        SolverResult {
            status,
            model: None,
            approximate: false,
            elapsed,
            query_bytes,
            diagnostic: Some(diagnostic),
        }
    }
}

/// Anything that can decide a [`ConstraintSystem`].
pub trait Solver {
    fn solve(&mut self, system: &ConstraintSystem, timeout: Duration) -> SolverResult;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverDialect {
    Z3,
    Cvc5,
    /// Plain SMT-LIB2 on stdin; timeouts enforced only by killing.
    Generic,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    pub dialect: SolverDialect,
}

impl SolverConfig {
    /// Parses a whitespace-separated command line. The dialect is inferred
    /// from the executable name.
    pub fn from_command(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        let mut args: Vec<String> = parts.collect();
        let name = std::path::Path::new(&program)
            .file_name()
            .map(|n| n.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        let dialect = if name.starts_with("z3") {
            SolverDialect::Z3
        } else if name.starts_with("cvc5") {
            SolverDialect::Cvc5
        } else {
            SolverDialect::Generic
        };
        match dialect {
            SolverDialect::Z3 if !args.iter().any(|a| a == "-in") => args.push("-in".into()),
            SolverDialect::Cvc5 => {
                for flag in ["--lang=smt2", "--produce-models"] {
                    if !args.iter().any(|a| a == flag) {
                        args.push(flag.into());
                    }
                }
            }
            _ => {}
        }
        Some(SolverConfig {
            program,
            args,
            dialect,
        })
    }

    pub fn z3() -> Self {
        SolverConfig::from_command("z3").unwrap()
    }

    fn timeout_args(&self, timeout: Duration) -> Vec<String> {
        let ms = timeout.as_millis().max(1);
        match self.dialect {
            SolverDialect::Z3 => vec![format!("-t:{ms}")],
            SolverDialect::Cvc5 => vec![format!("--tlimit-per={ms}")],
            SolverDialect::Generic => Vec::new(),
        }
    }

    /// Options sent ahead of the query so models come back as decimals
    /// where the solver would otherwise print algebraic numbers.
    fn preamble(&self) -> &'static str {
        match self.dialect {
            SolverDialect::Z3 => {
                "(set-option :pp.decimal true)\n(set-option :pp.decimal_precision 40)\n"
            }
            _ => "",
        }
    }
}

/// Runs one solver process per query.
#[derive(Debug)]
pub struct SmtProcess {
    config: SolverConfig,
    dump_dir: Option<PathBuf>,
    queries: usize,
}

impl SmtProcess {
    pub fn new(config: SolverConfig) -> Self {
        SmtProcess {
            config,
            dump_dir: None,
            queries: 0,
        }
    }

    /// Every query is also written to `dir/query-NNNNNN.smt2`.
    pub fn with_dump_dir(mut self, dir: PathBuf) -> Self {
        self.dump_dir = Some(dir);
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Checks that the solver can be spawned and answers a trivial query.
    pub fn probe(&self) -> Result<(), String> {
        let mut copy = SmtProcess::new(self.config.clone());
        let r = copy.solve(&ConstraintSystem::new(0), Duration::from_secs(10));
        match r.status {
            Status::Sat => Ok(()),
            _ => Err(r
                .diagnostic
                .unwrap_or_else(|| format!("solver answered {:?} to an empty query", r.status))),
        }
    }

    fn run(&self, document: String, timeout: Duration) -> Result<String, (Status, String)> {
        let mut child = Command::new(&self.config.program)
            .args(&self.config.args)
            .args(self.config.timeout_args(timeout))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| {
                (
                    Status::Error,
                    format!("cannot spawn {}: {e}", self.config.program),
                )
            })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || stdin.write_all(document.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut out = String::new();
            stdout.read_to_string(&mut out).map(|_| out)
        });

        let deadline = Instant::now() + timeout * 2;
        let mut killed = false;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    killed = true;
                    break;
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err((Status::Error, format!("waiting on solver: {e}"))),
            }
        }
        let _ = writer.join();
        let output = reader
            .join()
            .map_err(|_| (Status::Error, "solver reader panicked".to_string()))?
            .map_err(|e| (Status::Error, format!("reading solver output: {e}")))?;
        if killed {
            return Err((Status::Unknown, format!("killed after {:?}", timeout * 2)));
        }
        Ok(output)
    }
}

impl Solver for SmtProcess {
    fn solve(&mut self, system: &ConstraintSystem, timeout: Duration) -> SolverResult {
        let start = Instant::now();
        let query = system.render();
        let query_bytes = query.len();
        self.queries += 1;
        if let Some(dir) = &self.dump_dir {
            let path = dir.join(format!("query-{:06}.smt2", self.queries));
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, &query))
            {
                log::warn!("cannot dump query to {}: {e}", path.display());
            }
        }
        let document = format!("{}{query}", self.config.preamble());
        match self.run(document, timeout) {
            Err((status, msg)) => SolverResult::failed(status, msg, query_bytes, start.elapsed()),
            Ok(output) => {
                let parsed = parse_response(&output);
                SolverResult {
                    status: parsed.status,
                    model: parsed.model,
                    approximate: parsed.approximate,
                    elapsed: start.elapsed(),
                    query_bytes,
                    diagnostic: parsed.diagnostic,
                }
            }
        }
    }
}
