mod commands;
mod input;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;
use input::InputError;
use report::{Outcome, RunConfig, SizeCaps, Tolerances, Verdict, INPUT_ERROR_EXIT};

#[derive(Parser)]
#[command(name = "freecert", version, about = "Free maps, LMI domains and SDP certificates on matrix tuples")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for all randomized checks
    #[arg(long, global = true, env = "FREECERT_SEED", default_value_t = 0)]
    seed: u64,
    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Output::Human)]
    output: Output,
    /// Tolerance override `name=value`; repeatable
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Largest accepted matrix or pencil size in inputs
    #[arg(long, global = true, default_value_t = 256)]
    max_matrix: usize,
    /// Largest Fock/dilation space dimension
    #[arg(long, global = true, default_value_t = freecert::fock::DEFAULT_DIM_CAP)]
    fock_cap: usize,
    /// Largest total SDP block dimension
    #[arg(long, global = true, default_value_t = freecert::sdp::DEFAULT_DIM_CAP)]
    sdp_cap: usize,
    /// Run trials on one thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a polynomial or pencil at a tuple
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Membership and closure probes for noncommutative domains
    #[command(subcommand)]
    Domain(DomainCmd),
    /// Truncated Fock space and dilations
    #[command(subcommand)]
    Fock(FockCmd),
    /// Power-series coefficients of free maps
    #[command(subcommand)]
    Series(SeriesCmd),
    /// Free-map property checks
    #[command(subcommand)]
    Map(MapCmd),
    /// Certificate search and verification
    #[command(subcommand)]
    Cert(CertCmd),
}

#[derive(Args)]
struct Sampling {
    /// Number of random trials
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Largest matrix size sampled
    #[arg(long, default_value_t = 4)]
    max_n: usize,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// p(X) for a polynomial expression or JSON polynomial
    Poly {
        #[arg(long)]
        p: String,
        #[arg(long)]
        x: String,
    },
    /// L(X) for a JSON pencil
    Pencil {
        #[arg(long)]
        l: String,
        #[arg(long)]
        x: String,
    },
}

#[derive(Subcommand)]
enum DomainCmd {
    /// Is X a member?
    Check {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        x: String,
    },
    /// Closure under direct sums and unitary conjugation, and an optional
    /// boundedness probe
    Probe {
        #[arg(long)]
        domain: String,
        /// Row-norm bound to probe for
        #[arg(long)]
        bound: Option<f64>,
        #[command(flatten)]
        sampling: Sampling,
    },
}

#[derive(Subcommand)]
enum FockCmd {
    /// Dimension of the span of words of length at most ell
    Dim {
        #[arg(long)]
        g: usize,
        #[arg(long)]
        ell: usize,
    },
    /// Dilate a nilpotent row contraction to truncated creation operators
    Dilate {
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        ell: usize,
        /// Write the isometry and defect here
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand)]
enum SeriesCmd {
    /// Extract coefficients F_w for |w| <= ell
    Extract {
        #[arg(long)]
        map: String,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        delta: Option<f64>,
        /// Check ‖F_w‖ <= C/eps^|w|, given as `C,eps`
        #[arg(long, value_parser = parse_bound)]
        bound: Option<(f64, f64)>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Partial sum of a series at X
    Eval {
        #[arg(long)]
        series: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Degree-m homogeneous part of a map at X
    Homog {
        #[arg(long)]
        map: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        x: String,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Direct sums, intertwining, derivative and rotation checks
    Check {
        #[arg(long)]
        map: String,
        /// all, direct-sums, intertwining, derivative or rotation; repeatable
        #[arg(long)]
        check: Vec<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Block derivative f'(X)[H] against finite differences
    Derive {
        #[arg(long)]
        map: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        h: String,
    },
    /// Property suite for the disc automorphisms f_θ
    Ftheta {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// Second angle for the group law
        #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
        phi: f64,
        /// all, origin, derivative, self-map, group, series or identity; repeatable
        #[arg(long)]
        check: Vec<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
}

#[derive(Subcommand)]
enum CertCmd {
    /// Search for a certificate that D_{L1} ⊆ D_{L2}
    Dominate {
        #[arg(long)]
        l1: String,
        #[arg(long)]
        l2: String,
        #[arg(long)]
        out: Option<String>,
        /// Soundness samples
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Search for a weighted sum-of-squares certificate of p ⪰ 0 on D_L
    Psatz {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long)]
        l: String,
        #[arg(long)]
        out: Option<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Re-verify a certificate file
    Verify {
        #[arg(long)]
        cert: String,
    },
    /// Heuristic unitary-equivalence test for two pencils
    Equiv {
        #[arg(long)]
        l1: String,
        #[arg(long)]
        l2: String,
    },
}

fn parse_bound(s: &str) -> Result<(f64, f64), String> {
    let (c, eps) = s.split_once(',').ok_or("expected C,eps")?;
    let c: f64 = c.trim().parse().map_err(|_| format!("bad constant `{c}`"))?;
    let eps: f64 = eps.trim().parse().map_err(|_| format!("bad radius `{eps}`"))?;
    Ok((c, eps))
}

fn run(cfg: &RunConfig, cmd: Command) -> (&'static str, Result<Outcome, Failure>) {
    use commands as c;
    match cmd {
        Command::Eval(EvalCmd::Poly { p, x }) => ("eval poly", c::eval_poly(cfg, &p, &x)),
        Command::Eval(EvalCmd::Pencil { l, x }) => ("eval pencil", c::eval_pencil(cfg, &l, &x)),
        Command::Domain(DomainCmd::Check { domain, x }) => ("domain check", c::domain_check(cfg, &domain, &x)),
        Command::Domain(DomainCmd::Probe { domain, bound, sampling }) => {
            ("domain probe", c::domain_probe(cfg, &domain, bound, sampling.trials, sampling.max_n))
        }
        Command::Fock(FockCmd::Dim { g, ell }) => ("fock dim", c::fock_dim(cfg, g, ell)),
        Command::Fock(FockCmd::Dilate { x, r, ell, out }) => ("fock dilate", c::fock_dilate(cfg, &x, r, ell, out.as_deref())),
        Command::Series(SeriesCmd::Extract { map, ell, delta, bound, out }) => {
            ("series extract", c::series_extract(&map, ell, delta, bound, out.as_deref()))
        }
        Command::Series(SeriesCmd::Eval { series, x, order }) => ("series eval", c::series_eval(cfg, &series, &x, order)),
        Command::Series(SeriesCmd::Homog { map, m, x, samples }) => {
            ("series homog", c::series_homog(cfg, &map, m, &x, samples))
        }
        Command::Map(MapCmd::Check { map, check, sampling }) => {
            ("map check", c::map_check(cfg, &map, &check, sampling.trials, sampling.max_n))
        }
        Command::Map(MapCmd::Derive { map, x, h }) => ("map derive", c::map_derive(cfg, &map, &x, &h)),
        Command::Map(MapCmd::Ftheta { theta, phi, check, sampling }) => {
            ("map ftheta", c::map_ftheta(cfg, theta, phi, &check, sampling.trials, sampling.max_n))
        }
        Command::Cert(CertCmd::Dominate { l1, l2, out, samples, max_n }) => {
            ("cert dominate", c::cert_dominate(cfg, &l1, &l2, out.as_deref(), samples, max_n))
        }
        Command::Cert(CertCmd::Psatz { p, l, out, samples, max_n }) => {
            ("cert psatz", c::cert_psatz(cfg, &p, &l, out.as_deref(), samples, max_n))
        }
        Command::Cert(CertCmd::Verify { cert }) => ("cert verify", c::cert_verify(cfg, &cert)),
        Command::Cert(CertCmd::Equiv { l1, l2 }) => ("cert equiv", c::cert_equiv(cfg, &l1, &l2)),
    }
}

fn input_error(output: Output, command: &str, e: &InputError) -> ExitCode {
    match output {
        Output::Json => println!("{}", report::render_input_error(command, e)),
        Output::Human => eprintln!("error: {e}"),
    }
    ExitCode::from(INPUT_ERROR_EXIT)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    let tolerances = match Tolerances::with_overrides(&g.tol) {
        Ok(t) => t,
        Err(e) => return input_error(g.output, "config", &e),
    };
    let cfg = RunConfig {
        seed: g.seed,
        tolerances,
        size_caps: SizeCaps { matrix: g.max_matrix, fock_dim: g.fock_cap, sdp_dim: g.sdp_cap },
        parallel: !g.sequential,
    };
    let (name, res) = run(&cfg, cli.command);
    let outcome = match res {
        Ok(o) => o,
        Err(Failure::Input(e)) => return input_error(g.output, name, &e),
        Err(Failure::Numerical(msg)) => Outcome::new(
            Verdict::Inconclusive,
            serde_json::json!({ "error": msg }),
            vec![format!("numerical breakdown: {msg}")],
        ),
    };
    match g.output {
        Output::Json => println!("{}", report::render_json(name, &cfg, &outcome)),
        Output::Human => print!("{}", report::render_human(name, &cfg, &outcome)),
    }
    ExitCode::from(outcome.verdict.exit_code())
}
