//! Closed-form small-gain stability certificates and maximum-delay solvers.
//!
//! Every certificate records its evaluated sides: single inequalities keep the
//! displayed `lhs < rhs`; paired inequalities are normalized to
//! `max(side₁, side₂) < 1`. Boundary equality fails.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::picard::{compute_k, sharp_k, PicardConfig};

/// `(1 + √2)/4`, the exponent rate of the two-interval bracket.
const HALF_GROWTH: f64 = (1.0 + std::f64::consts::SQRT_2) / 4.0;

/// Points of the monotonicity scan preceding bisection.
pub const SCAN_POINTS: usize = 64;

/// Width at which bisection stops; well below the `1e-9` contract.
const BISECTION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CertificateName {
    SmallGain213,
    SmallGain242,
    Corollary325,
    Corollary327,
    NoPredictorRemark,
    Razumikhin43,
    Scalar44,
    Scalar45,
    Scalar46,
}

impl CertificateName {
    pub const ALL: [CertificateName; 9] = [
        Self::SmallGain213,
        Self::SmallGain242,
        Self::Corollary325,
        Self::Corollary327,
        Self::NoPredictorRemark,
        Self::Razumikhin43,
        Self::Scalar44,
        Self::Scalar45,
        Self::Scalar46,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SmallGain213 => "smallgain-2.13",
            Self::SmallGain242 => "smallgain-2.42",
            Self::Corollary325 => "corollary-3.25",
            Self::Corollary327 => "corollary-3.27",
            Self::NoPredictorRemark => "nopredictor-remark",
            Self::Razumikhin43 => "razumikhin-4.3",
            Self::Scalar44 => "scalar-4.4",
            Self::Scalar45 => "scalar-4.5",
            Self::Scalar46 => "scalar-4.6",
        }
    }
}

impl fmt::Display for CertificateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CertificateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown certificate `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: CertificateName,
    pub parameters: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub r_max: Option<f64>,
}

impl Certificate {
    fn new(name: CertificateName, parameters: &[(&str, f64)], lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            lhs,
            rhs,
            margin,
            pass: margin > 0.0,
            r_max: None,
        }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} (lhs {:.6e} vs rhs {:.6e}, margin {:.6e})",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.lhs,
            self.rhs,
            self.margin
        )?;
        if let Some(r) = self.r_max {
            write!(f, ", r_max {r:.10}")?;
        }
        Ok(())
    }
}

fn nonnegative(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(*v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be a finite non-negative number, got {v}")));
        }
    }
    Ok(())
}

fn positive_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("μ must be positive, got {mu}")));
    }
    Ok(())
}

/// `γ a1 < 1` and `a2(1 + γR) < 1`.
pub fn check_2_13(gamma: f64, big_r: f64, a1: f64, a2: f64) -> Result<Certificate> {
    let params = [("gamma", gamma), ("R", big_r), ("a1", a1), ("a2", a2)];
    nonnegative(&params)?;
    let lhs = (gamma * a1).max(a2 * (1.0 + gamma * big_r));
    Ok(Certificate::new(CertificateName::SmallGain213, &params, lhs, 1.0))
}

/// `γ a1 (1 + 1/μ) < 1` and `a2 (1 + 1/μ)(1 + γR) < 1`.
pub fn check_2_42(gamma: f64, big_r: f64, a1: f64, a2: f64, mu: f64) -> Result<Certificate> {
    positive_mu(mu)?;
    let params = [("gamma", gamma), ("R", big_r), ("a1", a1), ("a2", a2), ("mu", mu)];
    nonnegative(&params)?;
    let s = 1.0 + 1.0 / mu;
    let lhs = (gamma * a1 * s).max(a2 * s * (1.0 + gamma * big_r));
    Ok(Certificate::new(CertificateName::SmallGain242, &params, lhs, 1.0))
}

fn contraction_factor(lipschitz: f64, t: f64, l: usize) -> Result<f64> {
    let lt = lipschitz * t;
    if !(lt < 1.0) {
        return Err(Error::ContractionViolated { lt });
    }
    Ok(lt.powi(l as i32 + 1) / (1.0 - lt))
}

/// `(γ + 1 + γR) R K (LT)^{l+1}/(1 - LT) < 1`.
pub fn check_3_25(gamma: f64, big_r: f64, k: f64, lipschitz: f64, t: f64, l: usize) -> Result<Certificate> {
    let params = [("gamma", gamma), ("R", big_r), ("K", k), ("L", lipschitz), ("T", t), ("l", l as f64)];
    nonnegative(&params)?;
    let lhs = (gamma + 1.0 + gamma * big_r) * big_r * k * contraction_factor(lipschitz, t, l)?;
    Ok(Certificate::new(CertificateName::Corollary325, &params, lhs, 1.0))
}

/// `(γ + 1 + γR) R K max{1, L}(1 + 1/μ)(LT)^{l+1}/(1 - LT) < 1`.
#[allow(clippy::too_many_arguments)]
pub fn check_3_27(
    gamma: f64,
    big_r: f64,
    k: f64,
    lipschitz: f64,
    t: f64,
    l: usize,
    mu: f64,
) -> Result<Certificate> {
    positive_mu(mu)?;
    let params = [
        ("gamma", gamma),
        ("R", big_r),
        ("K", k),
        ("L", lipschitz),
        ("T", t),
        ("l", l as f64),
        ("mu", mu),
    ];
    nonnegative(&params)?;
    let lhs = (gamma + 1.0 + gamma * big_r)
        * big_r
        * k
        * lipschitz.max(1.0)
        * (1.0 + 1.0 / mu)
        * contraction_factor(lipschitz, t, l)?;
    Ok(Certificate::new(CertificateName::Corollary327, &params, lhs, 1.0))
}

/// LHS of the no-prediction condition at a fixed `ε`.
pub fn no_predictor_lhs(gamma: f64, big_r: f64, l1: f64, l2: f64, r: f64, eps: f64) -> f64 {
    let grow = ((2.0 + eps) * l1 * r).exp() - 1.0;
    let bracket = (eps / (2.0 + eps)).sqrt() * grow.sqrt() / eps + 1.0;
    (1.0 + gamma * big_r) * big_r * r * l2 * bracket + big_r * r * l1 * gamma * ((2.0 + eps) * l1 * r / 2.0).exp()
}

/// Minimizes the no-prediction condition over `ε` (golden section on `ln ε ∈ [-6, 6]`).
pub fn no_predictor_condition(gamma: f64, big_r: f64, l1: f64, l2: f64, r: f64) -> Result<Certificate> {
    let params = [("gamma", gamma), ("R", big_r), ("L1", l1), ("L2", l2), ("r", r)];
    nonnegative(&params)?;
    let objective = |s: f64| no_predictor_lhs(gamma, big_r, l1, l2, r, s.exp());
    let (s, lhs) = golden_section(objective, -6.0, 6.0, 200);
    let mut cert = Certificate::new(CertificateName::NoPredictorRemark, &params, lhs, 1.0);
    cert.parameters.insert("epsilon".into(), s.exp());
    Ok(cert)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // the bracket ends are candidates too: the objective may be monotone
    [(x, fx), (a, f(a)), (b, f(b))]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

fn positive_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("κ must be positive, got {kappa}")));
    }
    Ok(())
}

fn delay_in(r: f64, upper: f64) -> Result<()> {
    if !(r >= 0.0) || r >= upper {
        return Err(Error::Domain(format!("delay must lie in [0, {upper}), got {r}")));
    }
    Ok(())
}

/// `r < κ / ((1 + κ)(2 + κ))`.
pub fn check_4_3(kappa: f64, r: f64) -> Result<Certificate> {
    positive_kappa(kappa)?;
    nonnegative(&[("r", r)])?;
    let rhs = kappa / ((1.0 + kappa) * (2.0 + kappa));
    Ok(Certificate::new(CertificateName::Razumikhin43, &[("kappa", kappa), ("r", r)], r, rhs))
}

/// `2(1+κ)² r^{l+1} < κ(1 - r)`, for `r < 1`.
pub fn check_4_4(kappa: f64, l: usize, r: f64) -> Result<Certificate> {
    positive_kappa(kappa)?;
    delay_in(r, 1.0)?;
    let lhs = 2.0 * (1.0 + kappa).powi(2) * r.powi(l as i32 + 1);
    let rhs = kappa * (1.0 - r);
    Ok(Certificate::new(
        CertificateName::Scalar44,
        &[("kappa", kappa), ("l", l as f64), ("r", r)],
        lhs,
        rhs,
    ))
}

/// `1 + e^{(√2+1)r/4} + e^{r/2} + tail`.
fn two_interval_bracket(r: f64, tail: f64) -> f64 {
    1.0 + (HALF_GROWTH * r).exp() + (0.5 * r).exp() + tail
}

/// `2(1+κ)² r^{l+1}[1 + e^{(√2+1)r/4} + e^{r/2} + r^{l+1}/(2^l(2-r))] < 2^l κ(2 - r)`, for `r < 2`.
pub fn check_4_5(kappa: f64, l: usize, r: f64) -> Result<Certificate> {
    positive_kappa(kappa)?;
    delay_in(r, 2.0)?;
    let two_l = 2f64.powi(l as i32);
    let rl = r.powi(l as i32 + 1);
    let lhs = 2.0 * (1.0 + kappa).powi(2) * rl * two_interval_bracket(r, rl / (two_l * (2.0 - r)));
    let rhs = two_l * kappa * (2.0 - r);
    Ok(Certificate::new(
        CertificateName::Scalar45,
        &[("kappa", kappa), ("l", l as f64), ("r", r)],
        lhs,
        rhs,
    ))
}

/// `(1+κ)²[1 + e^{(√2+1)r/4} + e^{r/2} + r³/(4(2-r))] r³ < 2μ/(1+μ) κ(2 - r)`, for `r < 2`.
pub fn check_4_6(kappa: f64, mu: f64, r: f64) -> Result<Certificate> {
    positive_kappa(kappa)?;
    positive_mu(mu)?;
    delay_in(r, 2.0)?;
    let r3 = r.powi(3);
    let lhs = (1.0 + kappa).powi(2) * two_interval_bracket(r, r3 / (4.0 * (2.0 - r))) * r3;
    let rhs = 2.0 * mu / (1.0 + mu) * kappa * (2.0 - r);
    Ok(Certificate::new(
        CertificateName::Scalar46,
        &[("kappa", kappa), ("mu", mu), ("r", r)],
        lhs,
        rhs,
    ))
}

/// Which `K` a Picard-based delay certificate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    /// The `l`-independent closed form.
    Uniform,
    /// The `l`-dependent per-interval recursion.
    Sharp,
}

/// `K` for horizon `r`, `q` subintervals, `l` iterations and Lipschitz constant `L`.
pub fn k_constant(choice: KChoice, l: usize, q: usize, r: f64, lipschitz: f64) -> Result<f64> {
    let cfg = PicardConfig::new(l, q, r, lipschitz)?;
    match choice {
        KChoice::Uniform => compute_k(&cfg),
        KChoice::Sharp => sharp_k(&cfg),
    }
}

/// A certificate viewed as a function of the delay `r`, with all other parameters fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayProblem {
    Razumikhin43 { kappa: f64 },
    Scalar44 { kappa: f64, l: usize },
    Scalar45 { kappa: f64, l: usize },
    Scalar46 { kappa: f64, mu: f64 },
    NoPredictor { gamma: f64, big_r: f64, l1: f64, l2: f64 },
    Corollary325 { gamma: f64, big_r: f64, lipschitz: f64, l: usize, q: usize, k: KChoice },
    Corollary327 { gamma: f64, big_r: f64, lipschitz: f64, l: usize, q: usize, mu: f64, k: KChoice },
}

impl DelayProblem {
    pub fn name(&self) -> CertificateName {
        match self {
            Self::Razumikhin43 { .. } => CertificateName::Razumikhin43,
            Self::Scalar44 { .. } => CertificateName::Scalar44,
            Self::Scalar45 { .. } => CertificateName::Scalar45,
            Self::Scalar46 { .. } => CertificateName::Scalar46,
            Self::NoPredictor { .. } => CertificateName::NoPredictorRemark,
            Self::Corollary325 { .. } => CertificateName::Corollary325,
            Self::Corollary327 { .. } => CertificateName::Corollary327,
        }
    }

    pub fn evaluate(&self, r: f64) -> Result<Certificate> {
        match *self {
            Self::Razumikhin43 { kappa } => check_4_3(kappa, r),
            Self::Scalar44 { kappa, l } => check_4_4(kappa, l, r),
            Self::Scalar45 { kappa, l } => check_4_5(kappa, l, r),
            Self::Scalar46 { kappa, mu } => check_4_6(kappa, mu, r),
            Self::NoPredictor { gamma, big_r, l1, l2 } => no_predictor_condition(gamma, big_r, l1, l2, r),
            Self::Corollary325 { gamma, big_r, lipschitz, l, q, k } => {
                let kv = k_constant(k, l, q, r, lipschitz)?;
                check_3_25(gamma, big_r, kv, lipschitz, r / q as f64, l)
            }
            Self::Corollary327 { gamma, big_r, lipschitz, l, q, mu, k } => {
                let kv = k_constant(k, l, q, r, lipschitz)?;
                check_3_27(gamma, big_r, kv, lipschitz, r / q as f64, l, mu)
            }
        }
    }

    /// Search interval `[0, hi)`; `hi` itself is treated as failing.
    pub fn bracket(&self) -> (f64, f64) {
        match *self {
            Self::Razumikhin43 { kappa } => (0.0, 10.0 * kappa / ((1.0 + kappa) * (2.0 + kappa))),
            Self::Scalar44 { .. } => (0.0, 1.0),
            Self::Scalar45 { .. } | Self::Scalar46 { .. } => (0.0, 2.0),
            Self::NoPredictor { gamma, big_r, l2, .. } => {
                // the L2 term alone exceeds 1 beyond this point
                (0.0, 1.0 / ((1.0 + gamma * big_r) * big_r * l2).max(f64::MIN_POSITIVE))
            }
            Self::Corollary325 { lipschitz, q, .. } | Self::Corollary327 { lipschitz, q, .. } => {
                (0.0, q as f64 / lipschitz.max(f64::MIN_POSITIVE))
            }
        }
    }

    fn passes(&self, r: f64, hi: f64) -> bool {
        r < hi && self.evaluate(r).map(|c| c.pass).unwrap_or(false)
    }
}

/// Largest delay passing `problem`, by a monotonicity scan followed by bisection.
///
/// The returned value passes; values exceeding it by more than `1e-13`
/// (absolute) fail.
pub fn solve_r_max(problem: &DelayProblem) -> Result<f64> {
    let (lo, hi) = problem.bracket();
    if !hi.is_finite() || hi <= lo {
        return Err(Error::Domain(format!("empty search interval [{lo}, {hi})")));
    }
    if !problem.passes(lo, hi) {
        return Err(Error::CertificateRefused(format!(
            "{} fails already at r = {lo}",
            problem.name()
        )));
    }
    let grid: Vec<f64> = (0..=SCAN_POINTS).map(|i| lo + (hi - lo) * i as f64 / SCAN_POINTS as f64).collect();
    let verdicts: Vec<bool> = grid.iter().map(|r| problem.passes(*r, hi)).collect();
    let prefix = verdicts.iter().take_while(|v| **v).count();
    if let Some(j) = verdicts[prefix..].iter().position(|v| *v) {
        return Err(Error::NonMonotone(format!(
            "{}: fails at r = {} but passes again at r = {}",
            problem.name(),
            grid[prefix],
            grid[prefix + j]
        )));
    }
    let (mut a, mut b) = (grid[prefix - 1], grid[prefix]);
    while b - a > BISECTION_TOL * (1.0 + a.abs()) {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if problem.passes(mid, hi) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

/// The certificate at `r`, annotated with the solved maximum delay.
pub fn certify(problem: &DelayProblem, r: f64) -> Result<Certificate> {
    let cert = problem.evaluate(r)?;
    Ok(cert.with_r_max(solve_r_max(problem)?))
}

/// Linear ISS gain and exponential-form constants of the scalar example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ISSConstants {
    pub gamma: f64,
    pub big_r: f64,
    pub m: f64,
    pub omega: f64,
    pub epsilon: f64,
}

/// `k(x) = -(1+κ)x` on `ẋ = f(x) + u`, `|f'| ≤ 1`.
///
/// Plain: `γ = (1+ε)/κ`, `M = 1 + ε⁻¹`, `ω = κ/2`. Exponential (`ε ∈ (0,1)`):
/// `γ = (1+ε)/(κ√(1-ε))`, `M = 1 + ε⁻¹`, `ω = κε/2`.
pub fn scalar_iss_constants(kappa: f64, epsilon: f64, exponential: bool) -> Result<ISSConstants> {
    positive_kappa(kappa)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    let m = 1.0 + 1.0 / epsilon;
    let big_r = 1.0 + kappa;
    if exponential {
        if epsilon >= 1.0 {
            return Err(Error::Domain(format!("exponential form needs ε in (0, 1), got {epsilon}")));
        }
        Ok(ISSConstants {
            gamma: (1.0 + epsilon) / (kappa * (1.0 - epsilon).sqrt()),
            big_r,
            m,
            omega: kappa * epsilon / 2.0,
            epsilon,
        })
    } else {
        Ok(ISSConstants {
            gamma: (1.0 + epsilon) / kappa,
            big_r,
            m,
            omega: kappa / 2.0,
            epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_gain_arithmetic() {
        let c = check_2_13(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(c.pass && c.margin == 1.0);
        assert!(check_2_13(1.0, 1.0, 0.5, 0.4).unwrap().pass);
        assert!(!check_2_13(2.0, 1.0, 0.6, 0.0).unwrap().pass);
        assert!(!check_2_42(1.0, 1.0, 0.4, 0.3, 1.0).unwrap().pass);
        assert!(check_2_42(1.0, 1.0, 0.0, 0.0, 1e-3).unwrap().pass);
        assert!(check_2_42(1.0, 1.0, 0.1, 0.1, 0.0).is_err());
        let far = check_2_42(1.0, 2.0, 0.3, 0.2, 1e12).unwrap();
        let base = check_2_13(1.0, 2.0, 0.3, 0.2).unwrap();
        assert!((far.lhs - base.lhs).abs() < 1e-11);
    }

    #[test]
    fn corollary_arithmetic() {
        let c = check_3_25(1.0, 1.0, 1.0, 1.0, 0.5, 1).unwrap();
        assert!((c.lhs - 1.5).abs() < 1e-15 && !c.pass);
        assert!(check_3_25(1.0, 1.0, 1.0, 1.0, 0.5, 60).unwrap().pass);
        assert!(matches!(check_3_25(1.0, 1.0, 1.0, 2.0, 0.5, 1), Err(Error::ContractionViolated { .. })));
        let a = check_3_27(0.7, 2.0, 1.3, 0.8, 0.5, 2, 1e13).unwrap();
        let b = check_3_25(0.7, 2.0, 1.3, 0.8, 0.5, 2).unwrap();
        assert!((a.lhs - b.lhs).abs() < 1e-11);
    }

    #[test]
    fn no_predictor_zero_delay_passes() {
        let c = no_predictor_condition(0.5, 4.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.pass);
    }

    #[test]
    fn golden_section_finds_interior_minimum() {
        let (x, fx) = golden_section(|s| (s - 1.3).powi(2) + 2.0, -6.0, 6.0, 200);
        assert!((x - 1.3).abs() < 1e-6 && (fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_thresholds() {
        let r43 = solve_r_max(&DelayProblem::Razumikhin43 { kappa: 3.0 }).unwrap();
        assert!((r43 - 0.15).abs() < 1e-9);
        assert!(check_4_3(3.0, 0.14).unwrap().pass);
        let r44 = solve_r_max(&DelayProblem::Scalar44 { kappa: 3.0, l: 1 }).unwrap();
        assert!((r44 - (393f64.sqrt() - 3.0) / 64.0).abs() < 1e-9);
        let r44b = solve_r_max(&DelayProblem::Scalar44 { kappa: 3.0, l: 2 }).unwrap();
        assert!((r44b - 0.386).abs() < 5e-4, "{r44b}");
        let r45 = solve_r_max(&DelayProblem::Scalar45 { kappa: 3.0, l: 1 }).unwrap();
        assert!((r45 - 0.3058).abs() < 1e-4, "{r45}");
        let r46 = solve_r_max(&DelayProblem::Scalar46 { kappa: 3.0, mu: 100.0 }).unwrap();
        assert!((r46 - 0.5284).abs() < 1e-4, "{r46}");
    }

    #[test]
    fn r_max_brackets_boundary() {
        let p = DelayProblem::Scalar45 { kappa: 2.0, l: 3 };
        let r = solve_r_max(&p).unwrap();
        assert!(p.evaluate(r * (1.0 - 1e-9)).unwrap().pass);
        assert!(!p.evaluate(r * (1.0 + 1e-9)).unwrap().pass);
    }

    #[test]
    fn section4_bracket_is_the_sharp_two_interval_k() {
        // The two-interval scalar bound coincides with the general one at γ = 1/κ, R = 1+κ, L = 1, l = q = 2 and sharp K.
        let (kappa, mu) = (3.0, 100.0);
        for r in [0.1, 0.4, 0.52, 0.53, 0.9, 1.7] {
            let k = k_constant(KChoice::Sharp, 2, 2, r, 1.0).unwrap();
            let a = check_3_27(1.0 / kappa, 1.0 + kappa, k, 1.0, r / 2.0, 2, mu).unwrap();
            let b = check_4_6(kappa, mu, r).unwrap();
            assert_eq!(a.pass, b.pass, "r = {r}");
            assert!((a.lhs - b.lhs / b.rhs).abs() < 1e-12 * a.lhs);
        }
    }

    #[test]
    fn iss_constants() {
        let c = scalar_iss_constants(3.0, 0.5, false).unwrap();
        assert!((c.gamma - 0.5).abs() < 1e-15 && c.big_r == 4.0);
        let e = scalar_iss_constants(3.0, 0.5, true).unwrap();
        assert!((e.gamma - 1.5 / (3.0 * 0.5f64.sqrt())).abs() < 1e-15);
        assert_eq!((e.m, e.omega), (3.0, 0.75));
        assert!(scalar_iss_constants(3.0, 1.0, true).is_err());
        assert!(scalar_iss_constants(3.0, 0.0, false).is_err());
    }

    #[test]
    fn names_round_trip() {
        for n in CertificateName::ALL {
            assert_eq!(n.as_str().parse::<CertificateName>().unwrap(), n);
        }
        assert!("bogus".parse::<CertificateName>().is_err());
    }
}
