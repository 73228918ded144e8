//! SMT-LIB solver driven as a subprocess.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use num_traits::Zero;
use wait_timeout::ChildExt;

use crate::rational::{parse_rational, Rational};

use super::sexpr::{parse_all, Sexpr};
use super::{SolveError, Verdict};

pub const SOLVER_ENV: &str = "AMNET_SMT_SOLVER";

/// Solver binary: `AMNET_SMT_SOLVER` if set, else `z3` on the `PATH`.
pub fn solver_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os(SOLVER_ENV) {
        return Some(PathBuf::from(p));
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join("z3"))
        .find(|p| p.is_file())
}

fn arguments(path: &Path, timeout: Duration) -> Vec<String> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if stem.starts_with("z3") {
        vec!["-in".into(), "-smt2".into(), format!("-T:{}", timeout.as_secs().max(1))]
    } else if stem.starts_with("cvc") {
        vec!["--lang=smt2".into(), "--produce-models".into()]
    } else {
        Vec::new()
    }
}

/// Runs the solver on a complete SMT-LIB script.
pub fn run(script: &str, path: &Path, timeout: Duration) -> Result<Verdict, SolveError> {
    let mut child = Command::new(path)
        .args(arguments(path, timeout))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolveError::SolverNotFound(format!("{}: {e}", path.display())))?;
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    {
        let mut stdin = child.stdin.take().expect("piped");
        // a solver that exits early closes the pipe; its output decides
        let _ = stdin.write_all(script.as_bytes());
    }
    // grace period on top of the solver's own limit
    let status = child.wait_timeout(timeout + Duration::from_secs(2)).map_err(|e| SolveError::Io(e.to_string()))?;
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        return Ok(Verdict::Unknown("timeout".into()));
    }
    let out = reader
        .join()
        .map_err(|_| SolveError::Io("reader thread panicked".into()))?
        .map_err(|e| SolveError::Io(e.to_string()))?;
    parse_output(&out)
}

/// Interprets `check-sat` / `get-model` output.
pub fn parse_output(text: &str) -> Result<Verdict, SolveError> {
    let items = parse_all(text).map_err(|e| SolveError::Parse(e.to_string()))?;
    let mut iter = items.iter();
    let first = iter.next().ok_or_else(|| SolveError::Parse("empty solver output".into()))?;
    match first.atom() {
        Some("unsat") => Ok(Verdict::Unsat),
        Some("unknown") | Some("timeout") => Ok(Verdict::Unknown("solver returned unknown".into())),
        Some("sat") => {
            let model = iter
                .find(|s| s.list().is_some())
                .ok_or_else(|| SolveError::Parse("sat without model".into()))?;
            match parse_model(model)? {
                Some(m) => Ok(Verdict::Sat(m)),
                None => Ok(Verdict::Unknown("model value is not rational".into())),
            }
        }
        _ if first.head() == Some("error") => Err(SolveError::Parse(format!("solver error: {first:?}"))),
        _ => Err(SolveError::Parse(format!("unexpected solver output: {}", text.lines().next().unwrap_or("")))),
    }
}

/// Reads `(model (define-fun v () Real value) …)` or the bare list form.
/// `None` when a value is not a rational term (e.g. an algebraic number).
pub fn parse_model(s: &Sexpr) -> Result<Option<BTreeMap<String, Rational>>, SolveError> {
    let list = s.list().ok_or_else(|| SolveError::Parse("model is not a list".into()))?;
    let mut out = BTreeMap::new();
    for item in list {
        if item.head() != Some("define-fun") {
            continue;
        }
        let parts = item.list().unwrap();
        if parts.len() != 5 {
            return Err(SolveError::Parse("malformed define-fun".into()));
        }
        let name = parts[1].atom().ok_or_else(|| SolveError::Parse("define-fun name".into()))?;
        if parts[2].list().is_some_and(|a| !a.is_empty()) {
            continue;
        }
        match value(&parts[4]) {
            Some(v) => {
                out.insert(name.to_string(), v);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Rational value of an integer, decimal, `(/ a b)` or `(- a)` term.
pub fn value(s: &Sexpr) -> Option<Rational> {
    match s {
        Sexpr::Atom(a) => parse_rational(a).ok(),
        Sexpr::List(v) => match (v.first()?.atom()?, v.len()) {
            ("-", 2) => Some(-value(&v[1])?),
            ("-", 3) => Some(value(&v[1])? - value(&v[2])?),
            ("+", _) => v[1..].iter().try_fold(Rational::zero(), |acc, t| Some(acc + value(t)?)),
            ("*", _) => v[1..].iter().try_fold(Rational::from_integer(1.into()), |acc, t| Some(acc * value(t)?)),
            ("/", 3) => {
                let d = value(&v[2])?;
                if d.is_zero() {
                    None
                } else {
                    Some(value(&v[1])? / d)
                }
            }
            _ => None,
        },
    }
}
