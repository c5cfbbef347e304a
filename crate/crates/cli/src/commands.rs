//! Subcommand implementations. Each returns an [`Outcome`] or a failure that
//! is either an input error (exit 3) or a numerical breakdown (exit 2).

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use freecert::certs::{
    domination_soundness, lmi_dominate, psatz, psatz_soundness, unitary_equiv_check, verify_bundle,
    verify_domination, verify_psatz, CertBundle, DominationOutcome, EquivVerdict, PsatzOutcome, SoundnessReport,
};
use freecert::fock;
use freecert::freemap::{
    self, block_derivative, check_derivative, check_direct_sums, check_intertwining, finite_difference,
    rotation_equivariance_residual, CheckConfig, CheckReport, FreeMapHandle,
};
use freecert::linalg::{self, cis, C64};
use freecert::ncalg::{json as mjson, MatrixTuple, Word};
use freecert::ncdomain::{boundedness_probe, closure_properties_test, BoundednessVerdict, Status};
use freecert::par::{self, Exec};
use freecert::powerseries::{self, eval_series, extract_coeffs, homogeneous_part, PowerSeries};
use freecert::sdp::SolveOptions;
use freecert::Error;

use crate::input::{load_domain, load_json, load_pencil, load_poly, load_tuple, InputError};
use crate::report::{Outcome, RunConfig, Verdict};

pub enum Failure {
    Input(InputError),
    Numerical(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e)
    }
}

pub type CmdResult = std::result::Result<Outcome, Failure>;

/// Core errors caused by the inputs become input errors; breakdowns of the
/// numerics become inconclusive verdicts.
fn core(label: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Singular { .. }
        | Error::NoAdmissibleScaling
        | Error::Indefinite { .. }
        | Error::NotUnitary { .. }
        | Error::Evaluator(_) => Failure::Numerical(e.to_string()),
        other => Failure::Input(InputError::from_core(label, other)),
    }
}

fn exec(cfg: &RunConfig) -> Exec {
    if cfg.parallel {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

fn write_file(path: &str, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    std::fs::write(path, text + "\n").map_err(|e| Failure::Input(InputError::new(path, format!("cannot write: {e}"))))
}

fn load_map(spec: &str) -> Result<FreeMapHandle, Failure> {
    if let Some(path) = spec.strip_prefix("poly:@") {
        let p = load_poly("--map", path, None)?;
        return freemap::poly_map(p).map_err(core("--map"));
    }
    FreeMapHandle::from_name(spec).map_err(core("--map"))
}

// ---------------------------------------------------------------- eval

pub fn eval_poly(cfg: &RunConfig, p: &str, x: &str) -> CmdResult {
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let p = load_poly("--p", p, None)?;
    let p = if p.g() < x.g() { p.with_arity(x.g()).map_err(core("--p"))? } else { p };
    let v = p.eval(&x).map_err(core("--x"))?;
    let summary = vec![format!("p = {p}"), format!("value ({}×{}) = {:?}", v.nrows(), v.ncols(), mjson::to_rows(&v))];
    Ok(Outcome::new(
        Verdict::Pass,
        json!({ "poly": p, "value": mjson::to_rows(&v), "shape": [v.nrows(), v.ncols()] }),
        summary,
    ))
}

pub fn eval_pencil(cfg: &RunConfig, l: &str, x: &str) -> CmdResult {
    let l = load_pencil("--l", l, cfg.size_caps.matrix)?;
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let v = l.eval(&x).map_err(core("--x"))?;
    let min_eig = linalg::min_eig(&v.matrix);
    Ok(Outcome::new(
        Verdict::Pass,
        json!({
            "form": l.form(),
            "value": mjson::to_rows(&v.matrix),
            "min_eig": min_eig,
            "asymmetry": v.asymmetry,
        }),
        vec![format!("smallest eigenvalue {min_eig:.6e}"), format!("discarded anti-Hermitian part {:.3e}", v.asymmetry)],
    ))
}

// ---------------------------------------------------------------- domain

pub fn domain_check(cfg: &RunConfig, domain: &str, x: &str) -> CmdResult {
    let d = load_domain("--domain", domain)?;
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let tol = cfg.tolerances.get("member") * (1.0 + x.max_norm());
    let m = d.contains_with_tol(&x, tol).map_err(core("--x"))?;
    let verdict = match m.status {
        Status::Member => Verdict::Pass,
        Status::NonMember => Verdict::Fail,
        Status::Boundary => Verdict::Inconclusive,
    };
    Ok(Outcome::new(
        verdict,
        json!({ "domain": d.kind(), "status": m.status, "margin": m.margin, "tol": m.tol, "witness": (verdict == Verdict::Fail).then_some(&x) }),
        vec![format!("{:?} of {} domain, margin {:.6e} (tol {:.1e})", m.status, d.kind(), m.margin, m.tol)],
    ))
}

pub fn domain_probe(cfg: &RunConfig, domain: &str, bound: Option<f64>, trials: usize, max_n: usize) -> CmdResult {
    let d = load_domain("--domain", domain)?;
    let closure = closure_properties_test(&d, trials, cfg.seed, exec(cfg)).map_err(core("--domain"))?;
    let mut summary = vec![format!(
        "closure: {} trials, {} failures, margin drift {:.2e} (unitary) {:.2e} (direct sum)",
        closure.trials,
        closure.failures.len(),
        closure.max_unitary_margin_drift,
        closure.max_direct_sum_margin_drift
    )];
    let mut ok = closure.passed;
    let bounded = match bound {
        Some(c) => {
            let v = boundedness_probe(&d, c, trials, max_n, cfg.seed, exec(cfg)).map_err(core("--bound"))?;
            match &v {
                BoundednessVerdict::Violated { row_norm, .. } => {
                    ok = false;
                    summary.push(format!("bound {c} violated: member with row norm {row_norm:.6}"));
                }
                BoundednessVerdict::NoViolationFound { samples } => {
                    summary.push(format!("bound {c}: no violation in {samples} samples"))
                }
            }
            Some(v)
        }
        None => None,
    };
    Ok(Outcome::new(Verdict::from_bool(ok), json!({ "domain": d.kind(), "closure": closure, "boundedness": bounded }), summary))
}

// ---------------------------------------------------------------- fock

pub fn fock_dim(cfg: &RunConfig, g: usize, ell: usize) -> CmdResult {
    let dim = fock::sigma(g, ell);
    let enumerated = match dim {
        Some(d) if d <= cfg.size_caps.fock_dim => Some(Word::enumerate_plain(g, ell).len()),
        _ => None,
    };
    let ok = match (dim, enumerated) {
        (Some(d), Some(e)) => d == e,
        (Some(_), None) => true,
        (None, _) => false,
    };
    let verdict = if dim.is_none() { Verdict::Inconclusive } else { Verdict::from_bool(ok) };
    let mut summary = vec![match dim {
        Some(d) => format!("dim P_{ell} in {g} variables = {d}"),
        None => "dimension overflows".to_string(),
    }];
    if let Some(e) = enumerated {
        summary.push(format!("enumerated {e} words"));
    }
    Ok(Outcome::new(verdict, json!({ "g": g, "ell": ell, "dim": dim, "enumerated": enumerated }), summary))
}

pub fn fock_dilate(cfg: &RunConfig, x: &str, r: f64, ell: usize, out: Option<&str>) -> CmdResult {
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let dim = fock::sigma(x.g(), ell).unwrap_or(usize::MAX).saturating_mul(x.n());
    if dim > cfg.size_caps.fock_dim {
        return Err(Failure::Input(InputError::new(
            "--ell",
            format!("dilation space of dimension {dim} exceeds cap {}", cfg.size_caps.fock_dim),
        )));
    }
    let d = fock::dilate(&x, r, ell).map_err(core("--x"))?;
    let tol = cfg.tolerances.get("dilation") * (1.0 + x.max_norm() / r).powi(ell as i32 + 1);
    let worst = d.residuals.max();
    if let Some(path) = out {
        write_file(path, &json!({ "V": mjson::to_rows(&d.v), "defect": mjson::to_rows(&d.defect), "r": r, "ell": ell }))?;
    }
    Ok(Outcome::new(
        Verdict::from_bool(worst <= tol),
        json!({
            "n": x.n(),
            "g": x.g(),
            "ell": ell,
            "r": r,
            "fock_dim": d.fock.dim(),
            "residuals": d.residuals,
            "tol": tol,
            "output": out,
        }),
        vec![
            format!("isometry into C^{} ⊗ P_{ell} (dim {})", x.n(), x.n() * d.fock.dim()),
            format!(
                "residuals: isometry {:.2e}, intertwining {:.2e}, defect {:.2e}, word sum {:.2e} (tol {tol:.1e})",
                d.residuals.isometry, d.residuals.intertwining, d.residuals.defect, d.residuals.word_sum
            ),
        ],
    ))
}

// ---------------------------------------------------------------- series

fn coeff_rows(s: &PowerSeries) -> Vec<String> {
    s.coeffs()
        .filter(|(_, f)| f.norm() > 0.0)
        .take(12)
        .map(|(w, f)| format!("F[{w}] = {:?}", f.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()))
        .collect()
}

pub fn series_extract(
    map: &str,
    ell: usize,
    delta: Option<f64>,
    bound: Option<(f64, f64)>,
    out: Option<&str>,
) -> CmdResult {
    let f = load_map(map)?;
    let mut s = extract_coeffs(&f, ell, delta).map_err(core("--map"))?;
    let delta_used = match delta {
        Some(d) => d,
        None => powerseries::default_delta(f.domain(), ell).map_err(core("--map"))?,
    };
    let warning = powerseries::conditioning_warning(ell, delta_used);
    let mut verdict = Verdict::Pass;
    let mut summary = vec![format!("{} coefficients up to length {ell}, δ = {delta_used}", s.coeffs().count())];
    let mut ratio = None;
    if let Some((c, eps)) = bound {
        let r = s.bound_ratio(c, eps);
        ratio = Some(r);
        summary.push(format!("largest ‖F_w‖ε^|w|/C = {r:.6}"));
        match s.clone().with_bound(c, eps) {
            Ok(b) => s = b,
            Err(_) => verdict = Verdict::Fail,
        }
    }
    if let Some(w) = &warning {
        summary.push(format!("warning: {w}"));
    }
    summary.extend(coeff_rows(&s));
    if let Some(path) = out {
        write_file(path, &s)?;
    }
    Ok(Outcome::new(
        verdict,
        json!({ "map": f.name(), "delta": delta_used, "series": s, "bound_ratio": ratio, "warning": warning, "output": out }),
        summary,
    ))
}

pub fn series_eval(cfg: &RunConfig, series: &str, x: &str, order: Option<usize>) -> CmdResult {
    let s: PowerSeries = load_json("--series", series)?;
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let order = order.unwrap_or(s.ell());
    let v = eval_series(&s, &x, order).map_err(core("--x"))?;
    let mut summary = vec![format!("partial sum to order {order}")];
    if let Some(t) = v.tail_bound {
        summary.push(format!("tail bound {t:.3e}"));
    }
    Ok(Outcome::new(Verdict::Pass, json!({ "order": order, "value": v.value, "tail_bound": v.tail_bound }), summary))
}

pub fn series_homog(cfg: &RunConfig, map: &str, m: usize, x: &str, samples: Option<usize>) -> CmdResult {
    let f = load_map(map)?;
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let v = homogeneous_part(&f, m, &x, samples).map_err(core("--x"))?;
    Ok(Outcome::new(
        Verdict::Pass,
        json!({ "map": f.name(), "m": m, "samples": samples.unwrap_or(powerseries::default_samples(m)), "value": v }),
        vec![format!("degree-{m} part of {} at an n = {} point", f.name(), x.n())],
    ))
}

// ---------------------------------------------------------------- map

#[derive(Serialize)]
struct CheckRow {
    check: String,
    trials: usize,
    max_residual: f64,
    tol: String,
    passed: bool,
    witness: Option<Value>,
}

impl CheckRow {
    fn line(&self) -> String {
        format!(
            "{:<13} {} max residual {:.3e} over {} trials (tol {})",
            self.check,
            if self.passed { "ok  " } else { "FAIL" },
            self.max_residual,
            self.trials,
            self.tol
        )
    }
}

/// Re-judges a report against `tol·(1 + ‖X‖)` where the library used
/// `base·(1 + ‖X‖)`.
fn rejudge(r: CheckReport, base: f64, tol: f64) -> CheckRow {
    let passed = r.worst_ratio * base <= tol;
    CheckRow {
        check: r.check.to_string(),
        trials: r.trials - r.rejected,
        max_residual: r.max_residual,
        tol: format!("{tol:.1e}·(1+‖X‖)"),
        passed,
        witness: if passed { None } else { r.witness.map(|w| serde_json::to_value(w).expect("witness serializes")) },
    }
}

fn rows_outcome(name: &str, rows: Vec<CheckRow>, extra: Value) -> Outcome {
    let ok = rows.iter().all(|r| r.passed);
    let summary = rows.iter().map(CheckRow::line).collect();
    Outcome::new(Verdict::from_bool(ok), json!({ "map": name, "checks": rows, "extra": extra }), summary)
}

pub fn map_check(cfg: &RunConfig, map: &str, checks: &[String], trials: usize, max_n: usize) -> CmdResult {
    let f = load_map(map)?;
    let cc = CheckConfig { trials, sizes: (1..=max_n.max(1)).collect(), seed: cfg.seed, exec: exec(cfg) };
    let tol = cfg.tolerances.get("check");
    let dtol = cfg.tolerances.get("derivative");
    let mut rows = Vec::new();
    let mut extra = json!(null);
    let all = checks.is_empty() || checks.iter().any(|c| c == "all");
    let wants = |name: &str| all || checks.iter().any(|c| c == name);
    for c in checks {
        if !["all", "direct-sums", "intertwining", "derivative", "rotation"].contains(&c.as_str()) {
            return Err(Failure::Input(InputError::new("--check", format!("unknown check `{c}`"))));
        }
    }
    if wants("direct-sums") {
        rows.push(rejudge(check_direct_sums(&f, &cc).map_err(core("--map"))?, 1e-8, tol));
    }
    if wants("intertwining") {
        rows.push(rejudge(check_intertwining(&f, &cc).map_err(core("--map"))?, 1e-8, tol));
    }
    if wants("derivative") && !f.domain().hermitian_variables() {
        rows.push(rejudge(check_derivative(&f, &cc).map_err(core("--map"))?, 1e-6, dtol));
    }
    if checks.iter().any(|c| c == "rotation") {
        let rot = rotation_equivariance_residual(&f, &cc).map_err(core("--map"))?;
        extra = json!({ "rotation": rot.verdict });
        rows.push(rejudge(rot.check, 1e-8, tol));
    }
    Ok(rows_outcome(f.name(), rows, extra))
}

pub fn map_derive(cfg: &RunConfig, map: &str, x: &str, h: &str) -> CmdResult {
    let f = load_map(map)?;
    let x = load_tuple("--x", x, cfg.size_caps.matrix)?;
    let h = load_tuple("--h", h, cfg.size_caps.matrix)?;
    let bd = block_derivative(&f, &x, &h).map_err(core("--x"))?;
    let margin = f.domain().margin(&x).map_err(core("--x"))?;
    let step = 1e-3 * margin.clamp(1e-6, 1.0);
    let fd = finite_difference(&f, &x, &h, step).map_err(core("--x"))?;
    let diff = bd.value.distance(&fd).map_err(core("--h"))?;
    let tol = cfg.tolerances.get("derivative") * (1.0 + bd.value.max_norm());
    Ok(Outcome::new(
        Verdict::from_bool(diff <= tol),
        json!({ "map": f.name(), "derivative": bd.value, "t": bd.t, "finite_difference": fd, "difference": diff, "tol": tol }),
        vec![format!("block derivative (t = {}) vs finite differences: {diff:.3e} (tol {tol:.1e})", bd.t)],
    ))
}

const FTHETA_CHECKS: [&str; 6] = ["origin", "derivative", "self-map", "group", "series", "identity"];

pub fn map_ftheta(cfg: &RunConfig, theta: f64, phi: f64, checks: &[String], trials: usize, max_n: usize) -> CmdResult {
    for c in checks {
        if c != "all" && !FTHETA_CHECKS.contains(&c.as_str()) {
            return Err(Failure::Input(InputError::new("--check", format!("unknown check `{c}`"))));
        }
    }
    let selected: Vec<&str> = if checks.is_empty() || checks.iter().any(|c| c == "all") {
        FTHETA_CHECKS[..5].to_vec()
    } else {
        checks.iter().map(String::as_str).collect()
    };
    let f = freemap::ftheta(theta);
    let mut rows = Vec::new();
    for c in selected {
        rows.push(match c {
            "origin" => ftheta_origin(&f, max_n),
            "derivative" => ftheta_derivative(cfg, &f, theta, trials, max_n),
            "self-map" => ftheta_self_map(cfg, &f, trials, max_n),
            "group" => ftheta_group(cfg, theta, phi, trials, max_n),
            "series" => ftheta_series(cfg, &f, theta),
            _ => ftheta_identity(cfg, &f, trials, max_n),
        }
        .map_err(core("--theta"))?);
    }
    Ok(rows_outcome(f.name(), rows, json!({ "theta": theta, "phi": phi })))
}

type Trial = Option<(f64, f64, MatrixTuple)>;

fn collect(check: &str, tol: String, rows: Vec<freecert::Result<Trial>>) -> freecert::Result<CheckRow> {
    let mut worst: Option<(f64, f64, MatrixTuple)> = None;
    let mut count = 0;
    let mut failed = false;
    let mut max_res: f64 = 0.0;
    for r in rows {
        if let Some((res, t, x)) = r? {
            count += 1;
            max_res = max_res.max(res);
            let bad = res > t;
            if bad && (!failed || worst.as_ref().is_some_and(|w| res / t > w.0 / w.1)) {
                worst = Some((res, t, x));
            }
            failed |= bad;
        }
    }
    Ok(CheckRow {
        check: check.to_string(),
        trials: count,
        max_residual: max_res,
        tol,
        passed: !failed,
        witness: worst.map(|(res, t, x)| json!({ "x": x, "residual": res, "tol": t })),
    })
}

fn pick_size(rng: &mut impl Rng, max_n: usize) -> usize {
    rng.random_range(1..=max_n.max(1))
}

fn ftheta_origin(f: &FreeMapHandle, max_n: usize) -> freecert::Result<CheckRow> {
    let rows = (1..=max_n.max(1))
        .map(|n| {
            let z = MatrixTuple::zeros(1, n);
            Ok(Some((f.eval(&z)?.max_norm(), 0.0, z)))
        })
        .collect();
    collect("origin", "exact".into(), rows)
}

fn ftheta_derivative(cfg: &RunConfig, f: &FreeMapHandle, theta: f64, trials: usize, max_n: usize) -> freecert::Result<CheckRow> {
    let tol = cfg.tolerances.get("check");
    let rows = par::map_trials(exec(cfg), trials, |i| {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let n = pick_size(&mut rng, max_n);
        let h = MatrixTuple::new(vec![linalg::random_matrix(&mut rng, n, n)])?;
        let d = block_derivative(f, &MatrixTuple::zeros(1, n), &h)?;
        let res = d.value.distance(&h.scale(cis(theta)))?;
        Ok(Some((res, tol * (1.0 + h.max_norm()), h)))
    });
    collect("derivative", format!("{tol:.1e}·(1+‖H‖)"), rows)
}

fn ftheta_self_map(cfg: &RunConfig, f: &FreeMapHandle, trials: usize, max_n: usize) -> freecert::Result<CheckRow> {
    let tol = cfg.tolerances.get("member");
    let rows = par::map_trials(exec(cfg), trials, |i| {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let n = pick_size(&mut rng, max_n);
        let x = f.domain().sample_member(&mut rng, n)?;
        let m = f.domain().margin(&f.eval(&x)?)?;
        Ok(Some(((-m).max(0.0), tol, x)))
    });
    collect("self-map", format!("image margin ≥ −{tol:.1e}"), rows)
}

fn ftheta_group(cfg: &RunConfig, theta: f64, phi: f64, trials: usize, max_n: usize) -> freecert::Result<CheckRow> {
    let tol = cfg.tolerances.get("check");
    let (ft, fp, fs) = (freemap::ftheta(theta), freemap::ftheta(phi), freemap::ftheta(theta + phi));
    let rows = par::map_trials(exec(cfg), trials, |i| {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let n = pick_size(&mut rng, max_n);
        let x = fs.domain().sample_member(&mut rng, n)?;
        let res = ft.eval(&fp.eval(&x)?)?.distance(&fs.eval(&x)?)?;
        Ok(Some((res, tol * (1.0 + x.max_norm()), x)))
    });
    collect("group", format!("{tol:.1e}·(1+‖X‖)"), rows)
}

fn ftheta_series(cfg: &RunConfig, f: &FreeMapHandle, theta: f64) -> freecert::Result<CheckRow> {
    let tol = cfg.tolerances.get("series");
    let ell = 6;
    let s = extract_coeffs(f, ell, Some(0.4))?;
    let (a, b) = (cis(theta), cis(theta) - C64::new(1.0, 0.0));
    let rows = (1..=ell)
        .map(|k| {
            let expected = a * b.powi(k as i32 - 1);
            let got = s.coeff(&Word::plain(&vec![0; k]))[0];
            Ok(Some(((got - expected).norm(), tol, MatrixTuple::scalar(C64::new(k as f64, 0.0)))))
        })
        .collect();
    let mut row = collect("series", format!("{tol:.1e} for |w| ≤ {ell}"), rows)?;
    row.trials = ell;
    Ok(row)
}

fn ftheta_identity(cfg: &RunConfig, f: &FreeMapHandle, trials: usize, max_n: usize) -> freecert::Result<CheckRow> {
    let tol = cfg.tolerances.get("identity");
    let rows = par::map_trials(exec(cfg), trials, |i| {
        let mut rng = par::trial_rng(cfg.seed, i as u64);
        let n = pick_size(&mut rng, max_n);
        let x = f.domain().sample_member(&mut rng, n)?;
        let res = f.eval(&x)?.distance(&x)?;
        Ok(Some((res, tol * (1.0 + x.max_norm()), x)))
    });
    collect("identity", format!("{tol:.1e}·(1+‖X‖)"), rows)
}

// ---------------------------------------------------------------- cert

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions { dim_cap: cfg.size_caps.sdp_dim, ..SolveOptions::default() }
}

fn rejudge_soundness(mut r: SoundnessReport, tol: f64) -> SoundnessReport {
    r.tol = tol;
    r.passed = r.min_value >= -tol;
    r
}

pub fn cert_dominate(cfg: &RunConfig, l1: &str, l2: &str, out: Option<&str>, samples: usize, max_n: usize) -> CmdResult {
    let p1 = load_pencil("--l1", l1, cfg.size_caps.matrix)?;
    let p2 = load_pencil("--l2", l2, cfg.size_caps.matrix)?;
    let outcome = lmi_dominate(&p1, &p2, &solve_options(cfg)).map_err(core("--l1"))?;
    let tol = cfg.tolerances.get("certificate");
    match outcome {
        DominationOutcome::Dominated { certificate } => {
            let residual = verify_domination(&p1, &p2, &certificate.v).map_err(core("--l1"))?;
            let sound = domination_soundness(&p1, &p2, samples, max_n, cfg.seed, exec(cfg)).map_err(core("--l1"))?;
            let sound = rejudge_soundness(sound, cfg.tolerances.get("soundness"));
            let mut summary = vec![
                format!("dominated: {} Kraus operators, verified residual {residual:.3e} (tol {tol:.1e})", certificate.mu),
                format!("soundness: min eigenvalue of L2 over {} samples {:.6e}", sound.samples, sound.min_value),
            ];
            let verdict = if residual > tol {
                Verdict::Inconclusive
            } else if !sound.passed {
                summary.push("soundness sampling found a violation; is the domain of L1 bounded?".into());
                Verdict::Fail
            } else {
                Verdict::Pass
            };
            if let Some(path) = out {
                write_file(path, &CertBundle::Domination { l1: p1, l2: p2, certificate: certificate.clone() })?;
                summary.push(format!("certificate written to {path}"));
            }
            Ok(Outcome::new(
                verdict,
                json!({ "verdict": "dominated", "residual": residual, "tol": tol, "mu": certificate.mu, "soundness": sound, "certificate": out }),
                summary,
            ))
        }
        DominationOutcome::NotDominated { farkas, witness } => {
            let mut summary = vec![format!("not dominated: Farkas ray with δ = {:.3e}, b·y = {:.3e}", farkas.delta, farkas.by)];
            summary.push(match &witness {
                Some(w) => format!("witness: member with margin {:.3e} where λmin(L2) = {:.6}", w.domain_margin, w.value),
                None => "no violating point found (the domain of L1 may be unbounded)".into(),
            });
            Ok(Outcome::new(Verdict::Fail, json!({ "verdict": "not-dominated", "farkas": farkas, "witness": witness }), summary))
        }
        DominationOutcome::Inconclusive { status, detail } => Ok(Outcome::new(
            Verdict::Inconclusive,
            json!({ "verdict": "inconclusive", "status": status, "detail": detail }),
            vec![format!("solver status {status:?}: {detail}")],
        )),
    }
}

pub fn cert_psatz(cfg: &RunConfig, p: &str, l: &str, out: Option<&str>, samples: usize, max_n: usize) -> CmdResult {
    let pencil = load_pencil("--l", l, cfg.size_caps.matrix)?;
    let poly = load_poly("--p", p, None)?;
    let outcome = psatz(&poly, &pencil, &solve_options(cfg)).map_err(core("--p"))?;
    let tol = cfg.tolerances.get("certificate");
    match outcome {
        PsatzOutcome::Certified { certificate } => {
            let check = verify_psatz(&poly, &pencil, &certificate).map_err(core("--p"))?;
            let sound = psatz_soundness(&poly, &pencil, samples, max_n, cfg.seed, exec(cfg)).map_err(core("--p"))?;
            let sound = rejudge_soundness(sound, cfg.tolerances.get("soundness"));
            let mut summary = vec![
                format!(
                    "certified: {} SOS row(s), {} weighted term(s), degree cap {}",
                    certificate.s.shape().0,
                    certificate.f.len(),
                    certificate.degree_cap
                ),
                format!("verified residual {:.3e} (tol {tol:.1e})", check.residual),
                format!("soundness: min value over {} samples {:.6e}", sound.samples, sound.min_value),
            ];
            let verdict = if check.residual > tol {
                Verdict::Inconclusive
            } else {
                Verdict::from_bool(sound.passed)
            };
            if let Some(path) = out {
                write_file(path, &CertBundle::Psatz { p: poly, l: pencil, certificate: certificate.clone() })?;
                summary.push(format!("certificate written to {path}"));
            }
            Ok(Outcome::new(
                verdict,
                json!({ "verdict": "certified", "check": check, "tol": tol, "soundness": sound, "certificate": certificate, "output": out }),
                summary,
            ))
        }
        PsatzOutcome::NotCertified { farkas, witness } => {
            let mut summary = vec![format!("not certified: Farkas ray with δ = {:.3e}, b·y = {:.3e}", farkas.delta, farkas.by)];
            summary.push(match &witness {
                Some(w) => format!(
                    "witness X = {:?} (domain margin {:.3e}), λmin p(X) = {:.6}",
                    w.x.mats().iter().map(mjson::to_rows).collect::<Vec<_>>(),
                    w.domain_margin,
                    w.value
                ),
                None => "no violating point found".into(),
            });
            Ok(Outcome::new(Verdict::Fail, json!({ "verdict": "not-certified", "farkas": farkas, "witness": witness }), summary))
        }
        PsatzOutcome::Inconclusive { status, detail } => Ok(Outcome::new(
            Verdict::Inconclusive,
            json!({ "verdict": "inconclusive", "status": status, "detail": detail }),
            vec![format!("solver status {status:?}: {detail}")],
        )),
    }
}

pub fn cert_verify(cfg: &RunConfig, cert: &str) -> CmdResult {
    let bundle: CertBundle = load_json("--cert", cert)?;
    let check = verify_bundle(&bundle).map_err(core("--cert"))?;
    let tol = cfg.tolerances.get("certificate");
    let passed = check.residual <= tol;
    let detail = match &bundle {
        CertBundle::Psatz { p, l, certificate } if !passed => {
            let c = verify_psatz(p, l, certificate).map_err(core("--cert"))?;
            json!({ "per_word": c.per_word.into_iter().take(10).collect::<Vec<_>>() })
        }
        _ => json!(null),
    };
    Ok(Outcome::new(
        Verdict::from_bool(passed),
        json!({ "kind": check.kind, "residual": check.residual, "tol": tol, "witness": detail }),
        vec![format!("{} certificate: symbolic residual {:.3e} (tol {tol:.1e})", check.kind, check.residual)],
    ))
}

pub fn cert_equiv(cfg: &RunConfig, l1: &str, l2: &str) -> CmdResult {
    let p1 = load_pencil("--l1", l1, cfg.size_caps.matrix)?;
    let p2 = load_pencil("--l2", l2, cfg.size_caps.matrix)?;
    let v = unitary_equiv_check(&p1, &p2, cfg.seed).map_err(core("--l1"))?;
    let (verdict, line) = match &v {
        EquivVerdict::Equivalent { residual, .. } => (Verdict::Pass, format!("unitarily equivalent, residual {residual:.3e}")),
        EquivVerdict::NotEquivalent { reason } => (Verdict::Fail, format!("not equivalent: {reason}")),
        EquivVerdict::Inconclusive { nullity, best_residual } => {
            (Verdict::Inconclusive, format!("inconclusive: commutant nullity {nullity}, best residual {best_residual:.3e}"))
        }
    };
    Ok(Outcome::new(verdict, &v, vec![line]))
}
