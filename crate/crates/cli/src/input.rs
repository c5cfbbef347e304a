//! Loading JSON and expression arguments with error locations.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;

use freecert::ncalg::{parse_poly, FreePoly, LinearPencil, MatrixTuple};
use freecert::ncdomain::{Domain, EpsNeighborhood};
use freecert::{linalg, Error};

/// An input problem, reported with exit code 3.
#[derive(Debug, Clone)]
pub struct InputError {
    pub source: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl InputError {
    pub fn new(source: impl Into<String>, message: impl Into<String>) -> Self {
        InputError { source: source.into(), line: None, column: None, message: message.into() }
    }

    fn json(source: &str, e: &serde_json::Error) -> Self {
        InputError {
            source: source.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        }
    }

    pub fn from_core(source: &str, e: Error) -> Self {
        match e {
            Error::Json(j) => InputError::json(source, &j),
            Error::Parse { pos, msg } => InputError {
                source: source.to_string(),
                line: Some(1),
                column: Some(pos + 1),
                message: msg,
            },
            other => InputError::new(source, other.to_string()),
        }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, ":{l}:{c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

pub type InputResult<T> = std::result::Result<T, InputError>;

fn looks_inline(arg: &str) -> bool {
    matches!(arg.trim_start().chars().next(), Some('[' | '{'))
}

/// Reads `arg` as inline JSON when it starts with `[` or `{`, otherwise as a
/// path. Returns the text and a label used in error locations.
fn read_text(flag: &str, arg: &str) -> InputResult<(String, String)> {
    if looks_inline(arg) {
        return Ok((arg.to_string(), flag.to_string()));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| InputError::new(arg, format!("cannot read file: {e}")))?;
    Ok((text, arg.to_string()))
}

pub fn load_json<T: DeserializeOwned>(flag: &str, arg: &str) -> InputResult<T> {
    let (text, label) = read_text(flag, arg)?;
    serde_json::from_str(&text).map_err(|e| InputError::json(&label, &e))
}

fn parse_scalars(arg: &str) -> Option<Vec<f64>> {
    arg.split(',').map(|s| s.trim().parse::<f64>().ok()).collect()
}

/// A tuple from JSON, or a comma-separated list of real scalars (`-0.5` or
/// `0.1,0.2`) giving a 1×1 tuple.
pub fn load_tuple(flag: &str, arg: &str, max_n: usize) -> InputResult<MatrixTuple> {
    let x = match parse_scalars(arg) {
        Some(xs) if !looks_inline(arg) && !Path::new(arg).exists() => {
            MatrixTuple::scalars(&xs.iter().map(|&v| linalg::c(v, 0.0)).collect::<Vec<_>>())
        }
        _ => load_json::<MatrixTuple>(flag, arg)?,
    };
    if x.n() > max_n {
        return Err(InputError::new(flag, format!("matrix size {} exceeds cap {max_n}", x.n())));
    }
    Ok(x)
}

pub fn load_pencil(flag: &str, arg: &str, max_n: usize) -> InputResult<LinearPencil> {
    let l: LinearPencil = load_json(flag, arg)?;
    if l.d() > max_n {
        return Err(InputError::new(flag, format!("pencil size {} exceeds cap {max_n}", l.d())));
    }
    Ok(l)
}

/// A polynomial from a JSON file or inline JSON, else a scalar expression.
pub fn load_poly(flag: &str, arg: &str, g: Option<usize>) -> InputResult<FreePoly> {
    let p = if looks_inline(arg) || (Path::new(arg).is_file() && arg.ends_with(".json")) {
        load_json::<FreePoly>(flag, arg)?
    } else {
        parse_poly(arg, None).map_err(|e| InputError::from_core(flag, e))?
    };
    match g {
        Some(g) => p.with_arity(g).map_err(|e| InputError::from_core(flag, e)),
        None => Ok(p),
    }
}

/// Shorthands `disc`, `cube:<g>`, `nbhd:<g>:<eps>`, `entire:<g>`; otherwise
/// a domain descriptor `{kind, payload}` or a bare pencil (an LMI domain).
pub fn load_domain(flag: &str, arg: &str) -> InputResult<Domain> {
    let bad = |m: String| InputError::new(flag, m);
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("bad arity `{s}`")));
    let parts: Vec<&str> = arg.split(':').collect();
    match parts.as_slice() {
        ["disc"] => return Ok(Domain::disc_example()),
        ["cube", g] => return Ok(Domain::Lmi(LinearPencil::cube(num(g)?))),
        ["entire", g] => return Ok(Domain::Entire { g: num(g)? }),
        ["nbhd", g, eps] => {
            let eps = eps.trim().parse::<f64>().map_err(|_| bad(format!("bad radius `{eps}`")))?;
            return EpsNeighborhood::new(num(g)?, eps).map(Domain::Nbhd).map_err(|e| bad(e.to_string()));
        }
        _ => {}
    }
    let (text, label) = read_text(flag, arg)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| InputError::json(&label, &e))?;
    let parsed = if value.get("form").is_some() {
        serde_json::from_value::<LinearPencil>(value)
            .map_err(|e| InputError::new(&label, e.to_string()))
            .and_then(|l| Domain::lmi(l).map_err(|e| InputError::new(&label, e.to_string())))
    } else {
        serde_json::from_value::<Domain>(value).map_err(|e| InputError::new(&label, e.to_string()))
    };
    parsed
}
