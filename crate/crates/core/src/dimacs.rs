//! DIMACS CNF reading and writing, restricted to 2-clauses.

use crate::formula::{Clause, Cnf, Lit};
use std::io::{self, BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("malformed header line: {0:?}")]
    BadHeader(String),
    #[error("bad token {0:?} on line {1}")]
    BadToken(String, usize),
    #[error("clause {0} has {1} literals (exactly 2 required)")]
    NotTwoSat(usize, usize),
    #[error("clause {0} repeats variable {1}")]
    RepeatedVariable(usize, u32),
    #[error("literal {0} out of range (n = {1})")]
    OutOfRange(i64, u32),
    #[error("expected {0} clauses, found {1}")]
    ClauseCountMismatch(usize, usize),
}

/// Write `p cnf n m` followed by one clause per line, `±i ±j 0`.
pub fn write_dimacs<W: Write>(cnf: &Cnf, out: &mut W) -> io::Result<()> {
    writeln!(out, "p cnf {} {}", cnf.n(), cnf.m())?;
    for c in cnf.clauses() {
        writeln!(out, "{} {} 0", c.0.to_dimacs(), c.1.to_dimacs())?;
    }
    Ok(())
}

pub fn to_dimacs_string(cnf: &Cnf) -> String {
    let mut buf = Vec::new();
    write_dimacs(cnf, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Parse a DIMACS CNF. Comment lines (`c ...`) are ignored; clauses may
/// span lines. Clause order is preserved.
pub fn read_dimacs<R: BufRead>(input: R) -> Result<Cnf, DimacsError> {
    let mut n: Option<u32> = None;
    let mut m_declared = 0usize;
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(DimacsError::BadHeader(line.to_string()));
            }
            let nv = parts[2]
                .parse()
                .map_err(|_| DimacsError::BadHeader(line.to_string()))?;
            m_declared = parts[3]
                .parse()
                .map_err(|_| DimacsError::BadHeader(line.to_string()))?;
            n = Some(nv);
            continue;
        }
        let n = n.ok_or(DimacsError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| DimacsError::BadToken(tok.to_string(), lineno + 1))?;
            if v == 0 {
                if current.len() != 2 {
                    return Err(DimacsError::NotTwoSat(clauses.len(), current.len()));
                }
                if current[0].var() == current[1].var() {
                    return Err(DimacsError::RepeatedVariable(
                        clauses.len(),
                        current[0].var(),
                    ));
                }
                clauses.push(Clause::new(current[0], current[1]));
                current.clear();
            } else {
                if v.unsigned_abs() > n as u64 {
                    return Err(DimacsError::OutOfRange(v, n));
                }
                current.push(Lit::from_dimacs(v));
            }
        }
    }
    let n = n.ok_or(DimacsError::MissingHeader)?;
    if !current.is_empty() {
        return Err(DimacsError::NotTwoSat(clauses.len(), current.len()));
    }
    if clauses.len() != m_declared {
        return Err(DimacsError::ClauseCountMismatch(m_declared, clauses.len()));
    }
    Ok(Cnf::new(n, clauses).expect("validated during parse"))
}

pub fn read_dimacs_str(s: &str) -> Result<Cnf, DimacsError> {
    read_dimacs(s.as_bytes())
}
