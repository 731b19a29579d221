//! Subcommand implementations.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use delaypred::certificates::{
    certify as certify_problem, check_2_13, check_2_42, solve_r_max, Certificate, CertificateName, DelayProblem,
    KChoice,
};
use delaypred::closedloop::{estimate_decay, simulate_theorem22, verify_envelope, DecayFit};
use delaypred::dynamics::{distance, norm, phi, steps_for, HistorySegment, Trajectory};
use delaypred::picard::{input_sup, prop32_bound};
use delaypred::predictors::{phi_state_predictor, SchemeKind};
use delaypred::scenarios::SchemeChoice;
use rayon::prelude::*;

use crate::config::{self, ConfigError, Setup};
use crate::Globals;

/// Upper bound on the oracle step used by `predict`.
const ORACLE_STEP: f64 = 1e-4;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Diverged { time: f64 },
    Io(String),
    Runtime(delaypred::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Diverged { .. } => 2,
            Self::Runtime(delaypred::Error::Fit(_)) => 1,
            Self::Config(_) | Self::Io(_) | Self::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "config error: {e}"),
            Self::Diverged { time } => write!(f, "diverged: trajectory left the finite range at t = {time}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<delaypred::Error> for CliError {
    fn from(e: delaypred::Error) -> Self {
        match e {
            delaypred::Error::Divergence { time } => Self::Diverged { time },
            other => Self::Runtime(other),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl From<Verdict> for ExitCode {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => ExitCode::SUCCESS,
            Verdict::Fail => ExitCode::from(1),
        }
    }
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

fn setup(path: &Path, globals: &Globals) -> Result<Setup, CliError> {
    Ok(config::load(path)?.with_overrides(globals.h, globals.seed).build()?)
}

/// CSV to `--out` when given (report to stdout), else CSV to stdout (report to stderr).
fn sinks(globals: &Globals) -> Result<(Box<dyn Write>, Box<dyn Write>), CliError> {
    Ok(match &globals.out {
        Some(path) => (Box::new(File::create(path)?), Box::new(io::stdout())),
        None => (Box::new(io::stdout()), Box::new(io::stderr())),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn write_trajectory(traj: &Trajectory, sink: impl Write) -> Result<(), CliError> {
    let n = traj.states().first().map_or(0, Vec::len);
    let inputs = traj.inputs().unwrap_or(&[]);
    let controls = traj.controls().unwrap_or(&[]);
    let m = inputs.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=m).map(|i| format!("w_{i}")));
    header.push("norm".into());
    w.write_record(&header)?;
    let norms = traj.norms();
    for (k, t) in traj.times().iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(traj.states()[k].iter().map(f64::to_string));
        if let Some(u) = inputs.get(k) {
            row.extend(u.iter().map(f64::to_string));
        }
        if let Some(c) = controls.get(k) {
            row.extend(c.iter().map(f64::to_string));
        }
        row.push(norms[k].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(path: &Path, globals: &Globals, skip: f64) -> Result<Verdict, CliError> {
    let s = setup(path, globals)?;
    let traj = simulate_theorem22(&s.model, &s.input_set, &s.scheme, s.mu, s.r, &s.x0, &s.w0, s.t_end, s.h)?;
    let (csv_sink, mut report) = sinks(globals)?;
    write_trajectory(&traj, csv_sink)?;
    writeln!(
        report,
        "model {} | scheme {} | r = {} | mu = {} | h = {} | T = {}",
        s.model.name(),
        s.scheme.name(),
        s.r,
        s.mu,
        s.h,
        s.t_end
    )?;
    let fit = estimate_decay(&traj, skip)?;
    let envelope = verify_envelope(&traj, &fit);
    match fit {
        DecayFit::Rate { m, omega } => writeln!(report, "fit: M = {m:.6}, omega = {omega:.6}")?,
        DecayFit::ConvergedToZero => writeln!(report, "fit: converged to zero")?,
    }
    writeln!(report, "envelope: {}", if envelope { "OK" } else { "VIOLATED" })?;
    Ok(Verdict::from(fit.omega() > 0.0 && envelope))
}

/// Delay problems that apply to the configured scenario.
fn delay_problems(s: &Setup) -> Vec<DelayProblem> {
    if let Some(scalar) = &s.scalar {
        return scalar.delay_problems(s.choice, s.mu);
    }
    let Some(iss) = s.iss else { return Vec::new() };
    let lipschitz = s.model.lipschitz_constant().ok();
    match (s.choice, lipschitz) {
        (SchemeChoice::NoPredictor, _) => s
            .model
            .hypotheses()
            .split_growth
            .map(|(l1, l2)| DelayProblem::NoPredictor {
                gamma: iss.gamma,
                big_r: iss.big_r,
                l1,
                l2,
            })
            .into_iter()
            .collect(),
        (SchemeChoice::Picard { l, q }, Some(lipschitz)) => vec![DelayProblem::Corollary325 {
            gamma: iss.gamma,
            big_r: iss.big_r,
            lipschitz,
            l,
            q,
            k: KChoice::Uniform,
        }],
        (SchemeChoice::Corollary36 { l, q }, Some(lipschitz)) => vec![DelayProblem::Corollary327 {
            gamma: iss.gamma,
            big_r: iss.big_r,
            lipschitz,
            l,
            q,
            mu: s.mu,
            k: KChoice::Uniform,
        }],
        _ => Vec::new(),
    }
}

/// One report row; `cert` is absent when the inequality is undefined at this `r`.
struct Row {
    name: CertificateName,
    cert: Option<Certificate>,
    note: String,
}

impl Row {
    fn pass(&self) -> bool {
        self.cert.as_ref().is_some_and(|c| c.pass)
    }
}

fn evaluate_rows(s: &Setup) -> Vec<Row> {
    let mut rows = Vec::new();
    if let Some(c) = s.scheme.constants() {
        let exact = s.scheme.kind() == SchemeKind::Exact;
        let iss = s.iss.map(|i| (i.gamma, i.big_r, String::new()));
        let iss = iss.or_else(|| exact.then(|| (0.0, s.feedback.bound(), "exact predictor; (γ, R) not needed".into())));
        if let Some((gamma, big_r, note)) = iss {
            for (name, cert) in [
                (CertificateName::SmallGain213, check_2_13(gamma, big_r, c.a1, c.a2)),
                (CertificateName::SmallGain242, check_2_42(gamma, big_r, c.a1, c.a2, s.mu)),
            ] {
                rows.push(match cert {
                    Ok(cert) => Row {
                        name,
                        cert: Some(cert),
                        note: note.clone(),
                    },
                    Err(e) => Row {
                        name,
                        cert: None,
                        note: e.to_string(),
                    },
                });
            }
        }
    }
    for problem in delay_problems(s) {
        let name = problem.name();
        let r_max = solve_r_max(&problem);
        let row = match certify_problem(&problem, s.r) {
            Ok(cert) => {
                let (cert, note) = match r_max {
                    Ok(r) => (cert.with_r_max(r), String::new()),
                    Err(e) => (cert, format!("r_max: {e}")),
                };
                Row {
                    name,
                    cert: Some(cert),
                    note,
                }
            }
            Err(e) => Row {
                name,
                cert: None,
                note: e.to_string(),
            },
        };
        rows.push(row);
    }
    rows
}

pub fn certify(path: &Path, globals: &Globals) -> Result<Verdict, CliError> {
    let cfg = config::load(path)?.with_overrides(globals.h, globals.seed);
    let wanted = cfg
        .certificates
        .iter()
        .map(|n| CertificateName::from_str(n).map_err(|e| ConfigError::field("certificates", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let s = cfg.build()?;
    if let Err(e) = s.model.verify_hypotheses(10.0, s.seed) {
        return Err(ConfigError::field("model", e).into());
    }
    let mut rows = evaluate_rows(&s);
    if !wanted.is_empty() {
        for name in &wanted {
            if !rows.iter().any(|r| r.name == *name) {
                return Err(ConfigError::field("certificates", format!("`{name}` does not apply to this scenario")).into());
            }
        }
        rows.retain(|r| wanted.contains(&r.name));
    }
    let mut out = io::stdout().lock();
    writeln!(out, "scheme {} | r = {} | mu = {}", s.scheme.name(), s.r, s.mu)?;
    writeln!(
        out,
        "{:<20} {:>14} {:>14} {:>14} {:>6} {:>14}  note",
        "certificate", "lhs", "rhs", "margin", "pass", "r_max"
    )?;
    for row in &rows {
        match &row.cert {
            Some(c) => writeln!(
                out,
                "{:<20} {:>14.6e} {:>14.6e} {:>14.6e} {:>6} {:>14}  {}",
                row.name.as_str(),
                c.lhs,
                c.rhs,
                c.margin,
                if c.pass { "yes" } else { "no" },
                c.r_max.map_or("-".to_string(), |r| format!("{r:.10}")),
                row.note
            )?,
            None => writeln!(
                out,
                "{:<20} {:>14} {:>14} {:>14} {:>6} {:>14}  {}",
                row.name.as_str(),
                "-",
                "-",
                "-",
                "no",
                "-",
                row.note
            )?,
        }
    }
    if rows.is_empty() {
        writeln!(out, "no certificate applies (declare `iss` constants to enable the generic ones)")?;
    }
    // Each certificate is sufficient on its own; an explicit list must pass in full.
    let ok = if wanted.is_empty() {
        rows.iter().any(Row::pass)
    } else {
        rows.iter().all(Row::pass)
    };
    Ok(Verdict::from(ok))
}

/// `a..b` (inclusive) or `a,b,c`.
pub fn parse_list<T: FromStr>(flag: &str, src: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let bad = |e: &dyn fmt::Display| ConfigError::field(&format!("--{flag}"), format!("`{src}`: {e}"));
    if let Some((a, b)) = src.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| bad(&e))?;
        let b: usize = b.trim().parse().map_err(|e| bad(&e))?;
        if a > b {
            return Err(bad(&"empty range"));
        }
        return (a..=b).map(|v| v.to_string().parse::<T>().map_err(|e| bad(&e))).collect();
    }
    src.split(',').map(|p| p.trim().parse::<T>().map_err(|e| bad(&e))).collect()
}

fn problem_for(s: &Setup, name: CertificateName, l: usize, q: usize, mu: f64) -> Result<DelayProblem, String> {
    let kappa = || s.scalar.as_ref().map(|sc| sc.kappa).ok_or("needs the scalar scenario");
    let iss = || s.iss.ok_or("needs declared `iss` constants");
    let lipschitz = || s.model.lipschitz_constant().map_err(|_| "needs a declared Lipschitz constant");
    Ok(match name {
        CertificateName::Razumikhin43 => DelayProblem::Razumikhin43 { kappa: kappa()? },
        CertificateName::Scalar44 => DelayProblem::Scalar44 { kappa: kappa()?, l },
        CertificateName::Scalar45 => DelayProblem::Scalar45 { kappa: kappa()?, l },
        CertificateName::Scalar46 => DelayProblem::Scalar46 { kappa: kappa()?, mu },
        CertificateName::NoPredictorRemark => {
            let iss = iss()?;
            let (l1, l2) = s.model.hypotheses().split_growth.ok_or("needs declared split growth")?;
            DelayProblem::NoPredictor {
                gamma: iss.gamma,
                big_r: iss.big_r,
                l1,
                l2,
            }
        }
        CertificateName::Corollary325 => {
            let iss = iss()?;
            DelayProblem::Corollary325 {
                gamma: iss.gamma,
                big_r: iss.big_r,
                lipschitz: lipschitz()?,
                l,
                q,
                k: KChoice::Uniform,
            }
        }
        CertificateName::Corollary327 => {
            let iss = iss()?;
            DelayProblem::Corollary327 {
                gamma: iss.gamma,
                big_r: iss.big_r,
                lipschitz: lipschitz()?,
                l,
                q,
                mu,
                k: KChoice::Uniform,
            }
        }
        CertificateName::SmallGain213 | CertificateName::SmallGain242 => {
            return Err("small-gain conditions depend on the scheme constants, not on a closed-form r".into())
        }
    })
}

pub fn rmax(
    path: &Path,
    globals: &Globals,
    certificate: &str,
    l: Option<&str>,
    q: Option<&str>,
    mu: Option<&str>,
) -> Result<Verdict, CliError> {
    let name = CertificateName::from_str(certificate).map_err(|e| ConfigError::field("--certificate", e))?;
    let s = setup(path, globals)?;
    let (l0, q0) = match s.choice {
        SchemeChoice::Picard { l, q } | SchemeChoice::Corollary36 { l, q } => (l, q),
        SchemeChoice::ClosedForm(v) => v.lq(),
        _ => (1, 1),
    };
    let ls: Vec<usize> = l.map_or(Ok(vec![l0]), |src| parse_list("l", src))?;
    let qs: Vec<usize> = q.map_or(Ok(vec![q0]), |src| parse_list("q", src))?;
    let mus: Vec<f64> = mu.map_or(Ok(vec![s.mu]), |src| parse_list("mu", src))?;
    let mut grid = Vec::new();
    for &l in &ls {
        for &q in &qs {
            for &mu in &mus {
                let p = problem_for(&s, name, l, q, mu).map_err(|e| ConfigError::field("--certificate", e))?;
                grid.push((l, q, mu, p));
            }
        }
    }
    let mut seen = HashSet::new();
    grid.retain(|(_, _, _, p)| seen.insert(format!("{p:?}")));
    let results: Vec<_> = grid.par_iter().map(|(_, _, _, p)| solve_r_max(p)).collect();

    let sink: Box<dyn Write> = match &globals.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["certificate", "l", "q", "mu", "r_max", "note"])?;
    let mut all_ok = true;
    for ((l, q, mu, _), res) in grid.iter().zip(&results) {
        let (r, note) = match res {
            Ok(r) => (r.to_string(), String::new()),
            Err(e) => {
                all_ok = false;
                (String::new(), e.to_string())
            }
        };
        w.write_record([name.as_str().to_string(), l.to_string(), q.to_string(), mu.to_string(), r, note])?;
    }
    w.flush()?;
    Ok(Verdict::from(all_ok))
}

fn read_history(path: &Path, r: f64, m: usize) -> Result<HistorySegment, CliError> {
    let loc = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| ConfigError::field(&loc, e))?;
    let headers = reader.headers().map_err(|e| ConfigError::field(&loc, e))?.clone();
    if headers.len() != m + 1 || &headers[0] != "theta" {
        return Err(ConfigError::field(&loc, format!("expected header `theta` followed by {m} input columns")).into());
    }
    let mut thetas = Vec::new();
    let mut nodes = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ConfigError::field(&loc, e))?;
        let vals = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::field(&format!("{loc}:{}", i + 2), e))?;
        thetas.push(vals[0]);
        nodes.push(vals[1..].to_vec());
    }
    if nodes.len() < 2 {
        return Err(ConfigError::field(&loc, "need at least two rows").into());
    }
    let n = nodes.len() - 1;
    let step = r / n as f64;
    for (j, t) in thetas.iter().enumerate() {
        let expected = -r + j as f64 * step;
        if (t - expected).abs() > 1e-9 * (1.0 + r) {
            return Err(ConfigError::field(
                &format!("{loc}:{}", j + 2),
                format!("theta = {t}, expected an equally spaced grid value {expected} on [-r, 0]"),
            )
            .into());
        }
    }
    Ok(HistorySegment::new(r, &nodes)?)
}

pub fn predict(path: &Path, globals: &Globals, x: &str, history: Option<&Path>) -> Result<Verdict, CliError> {
    let s = setup(path, globals)?;
    let x: Vec<f64> = parse_list("x", x)?;
    if x.len() != s.model.state_dim() {
        return Err(ConfigError::field("--x", format!("expected {} entries, got {}", s.model.state_dim(), x.len())).into());
    }
    let u = match history {
        Some(p) => read_history(p, s.r, s.model.input_dim())?,
        None => s.w0.clone(),
    };
    let advanced = u.advanced();
    let refine = (u.step() / ORACLE_STEP).ceil().max(1.0) as usize;
    let oracle_h = u.step() / refine as f64;
    steps_for(s.r, oracle_h)?;
    let oracle = phi(&s.model, &x, &advanced, s.r, oracle_h)?;
    let target = s.feedback.eval(&oracle);
    let p = s.scheme.p(&x, &u)?;

    let mut out = io::stdout().lock();
    writeln!(out, "scheme            {}", s.scheme.name())?;
    writeln!(out, "p(x, u)           {}", fmt_vec(&p))?;
    writeln!(out, "oracle phi(r)     {}  (RK4, h = {oracle_h:e})", fmt_vec(&oracle))?;
    writeln!(out, "k(oracle)         {}", fmt_vec(&target))?;
    writeln!(out, "|p - k(oracle)|   {:.6e}", distance(&p, &target))?;
    if matches!(s.choice, SchemeChoice::ClosedForm(_) | SchemeChoice::Corollary36 { .. }) {
        if let Some(generic) = s.generic_picard() {
            let pg = generic.p(&x, &u)?;
            writeln!(out, "generic picard p  {}  (|diff| = {:.3e})", fmt_vec(&pg), distance(&p, &pg))?;
        }
    }
    let mut verdict = Verdict::Pass;
    let picard_like = matches!(
        s.choice,
        SchemeChoice::ClosedForm(_) | SchemeChoice::Picard { .. } | SchemeChoice::Corollary36 { .. }
    );
    if let (true, Some(cfg)) = (picard_like, s.picard) {
        if cfg.contraction() < 1.0 {
            let big_phi = phi_state_predictor(&s.model, &cfg, &x, &u)?;
            let bound = prop32_bound(&cfg, norm(&x), input_sup(&advanced))?;
            let measured = distance(&big_phi, &oracle);
            let slack = 10.0 * u.step().powi(2) * (1.0 + norm(&x) + u.sup_norm());
            writeln!(out, "Phi(x, u)         {}", fmt_vec(&big_phi))?;
            writeln!(out, "|Phi - oracle|    {measured:.6e}")?;
            writeln!(out, "error bound       {bound:.6e}  (+ quadrature slack {slack:.1e})")?;
            let ok = measured <= bound + slack;
            writeln!(out, "verdict           {}", if ok { "within bound" } else { "BOUND EXCEEDED" })?;
            verdict = ok.into();
        } else {
            writeln!(out, "error bound       unavailable (L r / q = {} ≥ 1)", cfg.contraction())?;
        }
    }
    Ok(verdict)
}
