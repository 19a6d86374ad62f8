use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

/// Environment variable naming the solver binary.
pub const SOLVER_ENV: &str = "REDFIN_SOLVER";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// An external SMT-LIB 2 solver driven through its standard streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solver {
    pub path: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Whether the solver understands `(minimize …)` and `(maximize …)`.
    pub optimization: bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("cannot start solver `{path}`: {reason}")]
    Spawn { path: String, reason: String },
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
    #[error("solver I/O failed: {0}")]
    Io(String),
}

impl Solver {
    /// A solver at `path`, with arguments chosen from its file name: cvc5
    /// gets `--lang smt2`, anything else is driven like z3.
    pub fn at(path: impl Into<PathBuf>) -> Solver {
        let path = path.into();
        let stem = path.file_stem().map(|s| s.to_string_lossy().to_lowercase()).unwrap_or_default();
        let (args, optimization) = if stem.contains("cvc") {
            (vec!["--lang".to_string(), "smt2".to_string(), "--produce-models".to_string()], false)
        } else {
            (vec!["-in".to_string(), "-smt2".to_string()], stem.contains("z3"))
        };
        Solver { path, args, timeout: DEFAULT_TIMEOUT, optimization }
    }

    /// The explicit path if given, else `$REDFIN_SOLVER`, else `z3` on `PATH`.
    pub fn locate(explicit: Option<&Path>) -> Solver {
        match explicit {
            Some(p) => Solver::at(p),
            None => match std::env::var_os(SOLVER_ENV) {
                Some(p) if !p.is_empty() => Solver::at(PathBuf::from(p)),
                _ => Solver::at("z3"),
            },
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Solver {
        self.timeout = timeout;
        self
    }

    pub fn without_optimization(mut self) -> Solver {
        self.optimization = false;
        self
    }

    /// Feeds `script` to a fresh solver process and returns its standard
    /// output. The process is killed once the timeout expires.
    pub fn run(&self, script: &str) -> Result<String, SolverError> {
        let mut child = Command::new(&self.path)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SolverError::Spawn { path: self.path.display().to_string(), reason: e.to_string() })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = script.to_string();
        let writer = thread::spawn(move || {
            let r = stdin.write_all(input.as_bytes());
            drop(stdin);
            r
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = thread::spawn(move || {
            let mut out = String::new();
            stdout.read_to_string(&mut out).map(|_| out)
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = thread::spawn(move || {
            let mut out = String::new();
            let _ = stderr.read_to_string(&mut out);
            out
        });

        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(SolverError::Timeout(self.timeout));
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(SolverError::Io(e.to_string())),
            }
        };
        // A solver that exits early closes its input; that is not an error.
        let _ = writer.join();
        let out = reader
            .join()
            .map_err(|_| SolverError::Io("reader thread panicked".into()))?
            .map_err(|e| SolverError::Io(e.to_string()))?;
        let err = err_reader.join().unwrap_or_default();
        if out.trim().is_empty() && !status.success() {
            return Err(SolverError::Io(format!("solver exited with {status}: {}", err.trim())));
        }
        Ok(out)
    }
}
