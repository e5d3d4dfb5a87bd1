//! Solver backends behind one contract: a problem goes in, SAT with a total
//! assignment, UNSAT, or TIMEOUT comes out.
//!
//! The embedded backend runs the pure-Rust varisat solver on a plain-CNF
//! translation of the problem. The external backend shells out to any
//! DIMACS-speaking solver binary (XOR-aware ones can take the parity
//! clauses natively), which is how a CryptoMiniSat-class solver plugs in.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::sat::dimacs::{parse_solver_output, write_dimacs, SolverOutput};
use crate::sat::problem::{Assignment, CnfProblem};

#[derive(Debug, Error)]
pub enum SatError {
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Assignment),
    Unsat,
    Timeout,
}

pub trait SatBackend: Sync {
    fn solve(&self, p: &CnfProblem, budget: Option<Duration>) -> Result<SolveOutcome, SatError>;
    fn describe(&self) -> String;
}

/// In-process varisat. Parity clauses are translated to CNF first. varisat
/// has no interruption hook, so a budgeted solve runs on a helper thread
/// that is abandoned on timeout (it stops mattering once the process ends).
#[derive(Default)]
pub struct EmbeddedBackend;

impl EmbeddedBackend {
    fn run(p: &CnfProblem) -> Result<SolveOutcome, SatError> {
        use varisat::ExtendFormula;
        let pure = p.to_pure_cnf();
        let mut solver = varisat::Solver::new();
        let mut formula = varisat::CnfFormula::new();
        formula.set_var_count(pure.var_count() as usize);
        let mut buf = Vec::new();
        for clause in &pure.or_clauses {
            buf.clear();
            buf.extend(
                clause
                    .iter()
                    .map(|l| varisat::Lit::from_dimacs(l.dimacs() as isize)),
            );
            formula.add_clause(&buf);
        }
        solver.add_formula(&formula);
        let sat = solver
            .solve()
            .map_err(|e| SatError::Backend(e.to_string()))?;
        if !sat {
            return Ok(SolveOutcome::Unsat);
        }
        let model = solver
            .model()
            .ok_or_else(|| SatError::Backend("sat without model".into()))?;
        let mut a = Assignment::new(p.var_count());
        for lit in model {
            let var = lit.var().to_dimacs() as u32;
            if var >= 1 && var <= p.var_count() {
                a.set(var, lit.is_positive());
            }
        }
        Ok(SolveOutcome::Sat(a))
    }
}

impl SatBackend for EmbeddedBackend {
    fn solve(&self, p: &CnfProblem, budget: Option<Duration>) -> Result<SolveOutcome, SatError> {
        match budget {
            None => Self::run(p),
            Some(limit) => {
                let problem = p.clone();
                let (tx, rx) = mpsc::channel();
                std::thread::spawn(move || {
                    let _ = tx.send(Self::run(&problem));
                });
                match rx.recv_timeout(limit) {
                    Ok(res) => res,
                    Err(mpsc::RecvTimeoutError::Timeout) => Ok(SolveOutcome::Timeout),
                    Err(mpsc::RecvTimeoutError::Disconnected) => {
                        Err(SatError::Backend("solver thread vanished".into()))
                    }
                }
            }
        }
    }

    fn describe(&self) -> String {
        "embedded varisat".into()
    }
}

/// External process honoring the DIMACS contract: problem on a file
/// argument, `s`/`v` lines on stdout.
pub struct ExternalBackend {
    pub path: PathBuf,
    /// Emit parity constraints as native `x` lines instead of translating.
    pub xor_native: bool,
}

impl ExternalBackend {
    pub fn new(path: impl Into<PathBuf>, xor_native: bool) -> Self {
        Self {
            path: path.into(),
            xor_native,
        }
    }
}

impl SatBackend for ExternalBackend {
    fn solve(&self, p: &CnfProblem, budget: Option<Duration>) -> Result<SolveOutcome, SatError> {
        let mut file = tempfile::Builder::new()
            .prefix("regsnap-")
            .suffix(".cnf")
            .tempfile()?;
        {
            let mut w = std::io::BufWriter::new(file.as_file_mut());
            write_dimacs(p, &mut w, self.xor_native)?;
            w.flush()?;
        }
        let mut child = Command::new(&self.path)
            .arg(file.path())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SatError::Backend(format!("spawn {}: {e}", self.path.display())))?;

        let deadline = budget.map(|b| Instant::now() + b);
        loop {
            match child.try_wait()? {
                Some(_) => break,
                None => {
                    if let Some(dl) = deadline {
                        if Instant::now() >= dl {
                            let _ = child.kill();
                            let _ = child.wait();
                            return Ok(SolveOutcome::Timeout);
                        }
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
            }
        }
        let output = child
            .wait_with_output()
            .map_err(|e| SatError::Backend(e.to_string()))?;
        match parse_solver_output(output.stdout.as_slice(), p.var_count())? {
            SolverOutput::Sat(a) => Ok(SolveOutcome::Sat(a)),
            SolverOutput::Unsat => Ok(SolveOutcome::Unsat),
            SolverOutput::Unknown => Err(SatError::Backend(format!(
                "{} reported neither SATISFIABLE nor UNSATISFIABLE",
                self.path.display()
            ))),
        }
    }

    fn describe(&self) -> String {
        format!("external {}", self.path.display())
    }
}

/// Environment variable naming the default external solver binary.
pub const SOLVER_ENV: &str = "REGSNAP_SOLVER";

/// The backend to use when the caller has no opinion: the external solver
/// from `REGSNAP_SOLVER` if set, the embedded one otherwise.
pub fn default_backend() -> Box<dyn SatBackend> {
    match std::env::var_os(SOLVER_ENV) {
        Some(path) if !path.is_empty() => Box::new(ExternalBackend::new(path, false)),
        _ => Box::new(EmbeddedBackend),
    }
}
