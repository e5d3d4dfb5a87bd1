//! Extended DIMACS serialization and solver-output parsing.
//!
//! OR clauses are the usual signed-integer lines; XOR clauses are lines
//! prefixed with `x`, negated first literal flipping the parity — the
//! de-facto format of XOR-aware CNF solvers. `write_dimacs` with
//! `xor_native = false` translates the parity constraints to plain CNF
//! first so any standard solver can consume the file.

use std::io::{BufRead, Write};

use crate::sat::problem::{Assignment, CnfProblem};

pub fn write_dimacs(
    p: &CnfProblem,
    w: &mut impl Write,
    xor_native: bool,
) -> std::io::Result<()> {
    let translated;
    let p = if xor_native || p.xor_clauses.is_empty() {
        p
    } else {
        translated = p.to_pure_cnf();
        &translated
    };
    let stats = p.stats();
    writeln!(w, "p cnf {} {}", stats.n_vars, stats.n_or + stats.n_xor)?;
    let mut line = String::new();
    for clause in &p.or_clauses {
        line.clear();
        for lit in clause {
            line.push_str(itoa(lit.dimacs()).as_str());
            line.push(' ');
        }
        line.push('0');
        writeln!(w, "{line}")?;
    }
    for clause in &p.xor_clauses {
        line.clear();
        line.push('x');
        for lit in &clause.lits {
            line.push_str(itoa(lit.dimacs()).as_str());
            line.push(' ');
        }
        line.push('0');
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn itoa(v: i32) -> String {
    v.to_string()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverOutput {
    Sat(Assignment),
    Unsat,
    Unknown,
}

/// Parses `s SATISFIABLE/UNSATISFIABLE` plus `v` literal lines. Variables
/// beyond `var_count` (translation auxiliaries) are dropped; variables the
/// solver leaves unmentioned default to false.
pub fn parse_solver_output(
    reader: impl BufRead,
    var_count: u32,
) -> std::io::Result<SolverOutput> {
    let mut sat = None;
    let mut values = vec![false; var_count as usize];
    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            match rest.trim() {
                "SATISFIABLE" => sat = Some(true),
                "UNSATISFIABLE" => sat = Some(false),
                _ => {}
            }
        } else if let Some(rest) = line.strip_prefix("v ") {
            for tok in rest.split_whitespace() {
                let lit: i64 = match tok.parse() {
                    Ok(l) => l,
                    Err(_) => continue,
                };
                if lit == 0 {
                    continue;
                }
                let var = lit.unsigned_abs();
                if var as u32 <= var_count && var >= 1 {
                    values[(var - 1) as usize] = lit > 0;
                }
            }
        }
    }
    Ok(match sat {
        Some(true) => SolverOutput::Sat(Assignment::from_values(values)),
        Some(false) => SolverOutput::Unsat,
        None => SolverOutput::Unknown,
    })
}
