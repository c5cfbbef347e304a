//! Run configuration and the versioned report envelope.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::input::InputError;

pub const SCHEMA: &str = "freecert/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

pub const INPUT_ERROR_EXIT: u8 = 3;

/// Named tolerances; every report lists the full set in effect.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances(BTreeMap<&'static str, f64>);

const DEFAULT_TOLS: [(&str, f64); 8] = [
    ("certificate", 1e-7),
    ("check", 1e-8),
    ("derivative", 1e-6),
    ("dilation", 1e-9),
    ("identity", 1e-8),
    ("member", 1e-9),
    ("series", 1e-8),
    ("soundness", 1e-7),
];

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(DEFAULT_TOLS.into_iter().collect())
    }
}

impl Tolerances {
    /// Applies `name=value` overrides.
    pub fn with_overrides(overrides: &[String]) -> Result<Self, InputError> {
        let mut t = Tolerances::default();
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| InputError::new("--tol", format!("expected name=value, got `{o}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| *v > 0.0 && v.is_finite())
                .ok_or_else(|| InputError::new("--tol", format!("bad tolerance `{v}`")))?;
            let key = DEFAULT_TOLS
                .iter()
                .map(|(k, _)| *k)
                .find(|name| *name == k.trim())
                .ok_or_else(|| {
                    let names: Vec<_> = DEFAULT_TOLS.iter().map(|(k, _)| *k).collect();
                    InputError::new("--tol", format!("unknown tolerance `{k}` (known: {})", names.join(", ")))
                })?;
            t.0.insert(key, v);
        }
        Ok(t)
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeCaps {
    pub matrix: usize,
    pub fock_dim: usize,
    pub sdp_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub size_caps: SizeCaps,
    pub parallel: bool,
}

/// Result of one command before it is wrapped in the envelope.
pub struct Outcome {
    pub verdict: Verdict,
    pub result: Value,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn new(verdict: Verdict, result: impl Serialize, summary: Vec<String>) -> Self {
        let result = serde_json::to_value(result).expect("report values serialize");
        Outcome { verdict, result, summary }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    command: &'a str,
    verdict: Verdict,
    config: &'a RunConfig,
    result: &'a Value,
}

pub fn render_json(command: &str, cfg: &RunConfig, o: &Outcome) -> String {
    let env = Envelope { schema: SCHEMA, command, verdict: o.verdict, config: cfg, result: &o.result };
    serde_json::to_string_pretty(&env).expect("report serializes")
}

pub fn render_human(command: &str, cfg: &RunConfig, o: &Outcome) -> String {
    let verdict = match o.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    };
    let mut out = format!("{command}: {verdict} (seed {})\n", cfg.seed);
    for line in &o.summary {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    schema: &'static str,
    command: &'a str,
    verdict: &'static str,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    source: &'a str,
    line: Option<usize>,
    column: Option<usize>,
    message: &'a str,
}

pub fn render_input_error(command: &str, e: &InputError) -> String {
    let env = ErrorEnvelope {
        schema: SCHEMA,
        command,
        verdict: "input-error",
        error: ErrorBody { source: &e.source, line: e.line, column: e.column, message: &e.message },
    };
    serde_json::to_string_pretty(&env).expect("error report serializes")
}
