//! Ready-made benchmark bundles: model, feedback, input set and schemes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::certificates::{scalar_iss_constants, DelayProblem, ISSConstants, KChoice};
use crate::closedloop::DynamicLaw;
use crate::dynamics::{HistorySegment, SampledSignal, SystemModel};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::picard::{PicardConfig, DEFAULT_MIN_NODES};
use crate::predictors::{
    corollary36_scheme, is_hurwitz, make_picard_predictor, no_predictor_scheme, section4_schemes, smith_scheme,
    FeedbackLaw, InputSet, PredictorScheme, ScalarFn, Section4Variant,
};

/// Grid radius and resolution of the `|f'| ≤ 1` spot check.
const SLOPE_CHECK_RADIUS: f64 = 50.0;
const SLOPE_CHECK_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    NoPredictor,
    ClosedForm(Section4Variant),
    Picard { l: usize, q: usize },
    Corollary36 { l: usize, q: usize },
    Smith,
}

/// `ẋ = f(x) + u(t - r)`, `k(x) = -(1+κ)x`, `U = ℜ`.
#[derive(Debug, Clone)]
pub struct ScalarScenario {
    pub kappa: f64,
    pub r: f64,
    pub f: ScalarFn,
    pub model: SystemModel,
    pub feedback: FeedbackLaw,
    pub input_set: InputSet,
}

pub fn scalar_section4(kappa: f64, r: f64, f: ScalarFn) -> Result<ScalarScenario> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("κ must be positive, got {kappa}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("delay must be positive, got {r}")));
    }
    if f.slope() > 1.0 {
        return Err(Error::HypothesisViolated(format!("declared |f'| bound {} exceeds 1", f.slope())));
    }
    f.check_slope(SLOPE_CHECK_RADIUS, SLOPE_CHECK_SAMPLES)?;
    let field = f.clone();
    let model = SystemModel::new(format!("scalar-{}", f.name()), 1, 1, move |x, u, o| {
        o[0] = field.value(x[0]) + u[0]
    })
    .globally_lipschitz(1.0)
    .with_split_growth(1.0, 1.0);
    let feedback = FeedbackLaw::linear(DMatrix::from_element(1, 1, -(1.0 + kappa)));
    Ok(ScalarScenario {
        kappa,
        r,
        f,
        model,
        feedback,
        input_set: InputSet::Full,
    })
}

impl ScalarScenario {
    pub fn scheme(&self, choice: SchemeChoice) -> Result<PredictorScheme> {
        match choice {
            SchemeChoice::NoPredictor => no_predictor_scheme(&self.model, &self.feedback, self.r),
            SchemeChoice::ClosedForm(v) => section4_schemes(self.kappa, self.r, self.f.clone(), v),
            SchemeChoice::Picard { l, q } => {
                make_picard_predictor(&self.model, &self.feedback, PicardConfig::new(l, q, self.r, 1.0)?)
            }
            SchemeChoice::Corollary36 { l, q } => {
                corollary36_scheme(&self.model, &self.feedback, PicardConfig::new(l, q, self.r, 1.0)?)
            }
            SchemeChoice::Smith => Err(Error::UnsupportedScheme("the scalar plant is nonlinear".into())),
        }
    }

    /// `γ = 1/κ`, `R = 1+κ`: the `ε → 0` constants under which the generic
    /// certificates collapse to the scalar ones.
    pub fn iss(&self) -> ISSConstants {
        ISSConstants {
            gamma: 1.0 / self.kappa,
            big_r: 1.0 + self.kappa,
            m: f64::INFINITY,
            omega: self.kappa / 2.0,
            epsilon: 0.0,
        }
    }

    /// ISS constants at a user-chosen `ε`.
    pub fn iss_at(&self, epsilon: f64, exponential: bool) -> Result<ISSConstants> {
        scalar_iss_constants(self.kappa, epsilon, exponential)
    }

    /// The delay problems that certify `choice` on this plant.
    pub fn delay_problems(&self, choice: SchemeChoice, mu: f64) -> Vec<DelayProblem> {
        let kappa = self.kappa;
        let iss = self.iss();
        match choice {
            SchemeChoice::NoPredictor => vec![
                DelayProblem::Razumikhin43 { kappa },
                DelayProblem::NoPredictor {
                    gamma: iss.gamma,
                    big_r: iss.big_r,
                    l1: 1.0,
                    l2: 1.0,
                },
            ],
            SchemeChoice::ClosedForm(v) => {
                let (l, q) = v.lq();
                if q == 1 {
                    vec![DelayProblem::Scalar44 { kappa, l }]
                } else {
                    vec![DelayProblem::Scalar45 { kappa, l }]
                }
            }
            SchemeChoice::Picard { l, q } => {
                let mut v = vec![DelayProblem::Corollary325 {
                    gamma: iss.gamma,
                    big_r: iss.big_r,
                    lipschitz: 1.0,
                    l,
                    q,
                    k: KChoice::Uniform,
                }];
                match q {
                    1 => v.push(DelayProblem::Scalar44 { kappa, l }),
                    2 => v.push(DelayProblem::Scalar45 { kappa, l }),
                    _ => {}
                }
                v
            }
            SchemeChoice::Corollary36 { l, q } => {
                let mut v = vec![DelayProblem::Corollary327 {
                    gamma: iss.gamma,
                    big_r: iss.big_r,
                    lipschitz: 1.0,
                    l,
                    q,
                    mu,
                    k: KChoice::Uniform,
                }];
                if (l, q) == (2, 2) {
                    v.push(DelayProblem::Scalar46 { kappa, mu });
                }
                v
            }
            SchemeChoice::Smith => vec![],
        }
    }

    /// The two-interval, two-iteration state predictor in closed form.
    pub fn phi22(&self, x: f64, u: &HistorySegment) -> Result<f64> {
        let f = self.f.clone();
        let a = move |x: &[f64], o: &mut [f64]| o[0] = f.value(x[0]);
        let b = |u: &[f64], o: &mut [f64]| o[0] = u[0];
        Ok(p_l2_closed(&a, &b, 2, &[x], &u.advanced())?[0])
    }
}

type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

fn eval_vec(f: &dyn Fn(&[f64], &mut [f64]), x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    f(x, &mut out);
    out
}

/// `B(τ_j) = ∫_0^{τ_j} b(u(s)) ds` by cumulative trapezoid on the grid of `u`.
fn cumulative_b(b: &dyn Fn(&[f64], &mut [f64]), u: &SampledSignal, n: usize) -> Vec<Vec<f64>> {
    let h = u.step();
    let mut out = Vec::with_capacity(u.nodes());
    let mut acc = vec![0.0; n];
    let mut prev = eval_vec(b, u.node(0), n);
    out.push(acc.clone());
    for j in 1..u.nodes() {
        let next = eval_vec(b, u.node(j), n);
        for i in 0..n {
            acc[i] += 0.5 * h * (prev[i] + next[i]);
        }
        out.push(acc.clone());
        prev = next;
    }
    out
}

/// `x + T a(x) + ∫_0^T b(u)`.
pub fn q1_closed(
    a: &dyn Fn(&[f64], &mut [f64]),
    b: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    u: &SampledSignal,
) -> Vec<f64> {
    let n = x.len();
    let t = u.end() - u.start();
    let ax = eval_vec(a, x, n);
    let cum = cumulative_b(b, u, n);
    let total = cum.last().expect("non-empty grid");
    (0..n).map(|i| x[i] + t * ax[i] + total[i]).collect()
}

/// `x + ∫_0^T a(x + τ a(x) + ∫_0^τ b(u)) dτ + ∫_0^T b(u)`.
pub fn q2_closed(
    a: &dyn Fn(&[f64], &mut [f64]),
    b: &dyn Fn(&[f64], &mut [f64]),
    x: &[f64],
    u: &SampledSignal,
) -> Vec<f64> {
    let n = x.len();
    let h = u.step();
    let ax = eval_vec(a, x, n);
    let cum = cumulative_b(b, u, n);
    let mut integral = vec![0.0; n];
    let mut prev: Option<Vec<f64>> = None;
    for (j, c) in cum.iter().enumerate() {
        let tau = j as f64 * h;
        let y: Vec<f64> = (0..n).map(|i| x[i] + tau * ax[i] + c[i]).collect();
        let ay = eval_vec(a, &y, n);
        if let Some(p) = &prev {
            for i in 0..n {
                integral[i] += 0.5 * h * (p[i] + ay[i]);
            }
        }
        prev = Some(ay);
    }
    let total = cum.last().expect("non-empty grid");
    (0..n).map(|i| x[i] + integral[i] + total[i]).collect()
}

fn halves(u: &SampledSignal) -> Result<(SampledSignal, SampledSignal)> {
    let u = if u.intervals() % 2 == 0 { u.clone() } else { u.refined(2) };
    let per = u.intervals() / 2;
    Ok((u.window(0, per)?, u.window(per, per)?))
}

/// `P^u_{l,2} x` for `l ∈ {1, 2}` composed from the one-interval closed forms.
pub fn p_l2_closed(
    a: &dyn Fn(&[f64], &mut [f64]),
    b: &dyn Fn(&[f64], &mut [f64]),
    l: usize,
    x: &[f64],
    u: &SampledSignal,
) -> Result<Vec<f64>> {
    let (first, second) = halves(u)?;
    let step = |x: &[f64], piece: &SampledSignal| match l {
        1 => Ok(q1_closed(a, b, x, piece)),
        2 => Ok(q2_closed(a, b, x, piece)),
        _ => Err(Error::UnsupportedScheme(format!("closed form available for l ∈ {{1, 2}}, got {l}"))),
    };
    let x1 = step(x, &first)?;
    step(&x1, &second)
}

/// `f(x, u) = a(x) + b(u)` with `a` `L`-Lipschitz and `|b(u)| ≤ L|u|`.
#[derive(Clone)]
pub struct AdditiveScenario {
    pub lipschitz: f64,
    pub model: SystemModel,
    a: Arc<VecFn>,
    b: Arc<VecFn>,
}

impl std::fmt::Debug for AdditiveScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdditiveScenario")
            .field("lipschitz", &self.lipschitz)
            .field("model", &self.model)
            .finish()
    }
}

pub fn additive_example31(
    n: usize,
    m: usize,
    a: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    b: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    lipschitz: f64,
) -> AdditiveScenario {
    let a: Arc<VecFn> = Arc::new(a);
    let b: Arc<VecFn> = Arc::new(b);
    let (fa, fb) = (a.clone(), b.clone());
    let model = SystemModel::new("additive", n, m, move |x, u, o| {
        fa(x, o);
        let mut bu = vec![0.0; o.len()];
        fb(u, &mut bu);
        for (oi, bi) in o.iter_mut().zip(bu) {
            *oi += bi;
        }
    })
    .globally_lipschitz(lipschitz);
    AdditiveScenario { lipschitz, model, a, b }
}

impl AdditiveScenario {
    pub fn q1(&self, x: &[f64], u: &SampledSignal) -> Vec<f64> {
        q1_closed(&*self.a, &*self.b, x, u)
    }

    pub fn q2(&self, x: &[f64], u: &SampledSignal) -> Vec<f64> {
        q2_closed(&*self.a, &*self.b, x, u)
    }

    pub fn p12(&self, x: &[f64], u: &SampledSignal) -> Result<Vec<f64>> {
        p_l2_closed(&*self.a, &*self.b, 1, x, u)
    }

    pub fn p22(&self, x: &[f64], u: &SampledSignal) -> Result<Vec<f64>> {
        p_l2_closed(&*self.a, &*self.b, 2, x, u)
    }

    /// `(LT)³/(1-LT)(|x| + sup|u|)` on an input over `[0, T]`.
    pub fn bound_3_14(&self, x_norm: f64, u: &SampledSignal) -> Result<f64> {
        let t = u.end() - u.start();
        let lt = self.lipschitz * t;
        if !(lt < 1.0) {
            return Err(Error::ContractionViolated { lt });
        }
        Ok(lt.powi(3) / (1.0 - lt) * (x_norm + crate::picard::input_sup(u)))
    }

    pub fn picard_config(&self, l: usize, q: usize, r: f64) -> Result<PicardConfig> {
        PicardConfig::new(l, q, r, self.lipschitz).map(|c| c.with_min_nodes(DEFAULT_MIN_NODES))
    }
}

/// `u̇ = k'e^{Ar}(A+μI)x + ∫_0^r k'(A+μI)e^{A(r-s)}B u(t+s-r) ds + (k'B - μI)u`.
///
/// The explicit linear closed loop, assembled independently of the predictor
/// scheme so the two can be cross-simulated.
pub struct SmithOde {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    gain: DMatrix<f64>,
    r: f64,
    mu: f64,
    state_gain: DMatrix<f64>,
    feedthrough: DMatrix<f64>,
    input_set: InputSet,
    kernels: Mutex<HashMap<usize, Arc<Vec<DMatrix<f64>>>>>,
}

impl SmithOde {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, gain: &DMatrix<f64>, r: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Config(format!("μ must be positive, got {mu}")));
        }
        let n = a.nrows();
        let m = b.ncols();
        let shifted = a + DMatrix::<f64>::identity(n, n) * mu;
        let state_gain = gain * (a * r).exp() * &shifted;
        let feedthrough = gain * b - DMatrix::<f64>::identity(m, m) * mu;
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            gain: gain.clone(),
            r,
            mu,
            state_gain,
            feedthrough,
            input_set: InputSet::Full,
            kernels: Mutex::new(HashMap::new()),
        })
    }

    /// Trapezoid-weighted `k'(A+μI)e^{A(r - s_j)}B`, each exponential computed directly.
    fn kernels(&self, intervals: usize) -> Arc<Vec<DMatrix<f64>>> {
        let mut cache = self.kernels.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(intervals)
            .or_insert_with(|| {
                let n = self.a.nrows();
                let h = self.r / intervals as f64;
                let left = &self.gain * (&self.a + DMatrix::<f64>::identity(n, n) * self.mu);
                Arc::new(
                    (0..=intervals)
                        .map(|j| {
                            let w = if j == 0 || j == intervals { 0.5 * h } else { h };
                            let s = j as f64 * h;
                            &left * (&self.a * (self.r - s)).exp() * &self.b * w
                        })
                        .collect(),
                )
            })
            .clone()
    }
}

impl DynamicLaw for SmithOde {
    fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn rate(&self, x: &[f64], w: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        let kernels = self.kernels(history.intervals());
        let mut out = &self.state_gain * DVector::from_column_slice(x) + &self.feedthrough * DVector::from_column_slice(w);
        for (j, k) in kernels.iter().enumerate() {
            out += k * DVector::from_column_slice(history.node(j));
        }
        Ok(out.as_slice().to_vec())
    }
}

/// `ẋ = Ax + Bu(t - r)` with the exact predictor.
#[derive(Debug, Clone)]
pub struct LinearScenario {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub r: f64,
    pub model: SystemModel,
    pub feedback: FeedbackLaw,
    pub scheme: PredictorScheme,
}

pub fn linear_smith(a: DMatrix<f64>, b: DMatrix<f64>, gain: DMatrix<f64>, r: f64) -> Result<LinearScenario> {
    let scheme = smith_scheme(&a, &b, &gain, r)?;
    let model = SystemModel::linear(a.clone(), b.clone())?;
    let feedback = FeedbackLaw::linear(gain.clone());
    Ok(LinearScenario {
        a,
        b,
        gain,
        r,
        model,
        feedback,
        scheme,
    })
}

impl LinearScenario {
    pub fn explicit_law(&self, mu: f64) -> Result<SmithOde> {
        SmithOde::new(&self.a, &self.b, &self.gain, self.r, mu)
    }

    pub fn closed_loop_matrix(&self) -> DMatrix<f64> {
        &self.a + &self.b * &self.gain
    }

    pub fn is_stabilized(&self) -> bool {
        is_hurwitz(&self.closed_loop_matrix())
    }
}

/// `ẋ_i = f_i(x_1..x_i) + x_{i+1}`, `ẋ_n = f_n(x) + u(t - r)` with a user gain.
#[derive(Debug, Clone)]
pub struct TriangularScenario {
    pub fields: Vec<Expr>,
    pub lipschitz: f64,
    pub r: f64,
    pub model: SystemModel,
    pub feedback: FeedbackLaw,
    pub iss: Option<ISSConstants>,
}

/// `fields[i]` is an expression in `x1..x{i+1}`; `lipschitz` bounds every `|∇f_i|`.
///
/// The model declares `L√n + 1` for the whole field, which covers the chain
/// coupling and the unit input gain.
pub fn triangular_1_3(
    fields: &[&str],
    lipschitz: f64,
    gain: DMatrix<f64>,
    r: f64,
    iss: Option<ISSConstants>,
) -> Result<TriangularScenario> {
    let n = fields.len();
    if n == 0 {
        return Err(Error::Config("triangular system needs at least one field".into()));
    }
    if gain.shape() != (1, n) {
        return Err(Error::DimensionMismatch {
            what: "triangular gain",
            expected: n,
            got: gain.len(),
        });
    }
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let exprs = fields
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let vars: Vec<&str> = names[..=i].iter().map(String::as_str).collect();
            Expr::parse(src, &vars)
        })
        .collect::<Result<Vec<_>>>()?;
    let owned = exprs.clone();
    let model_l = lipschitz * (n as f64).sqrt() + 1.0;
    let model = SystemModel::new(format!("triangular-{n}"), n, 1, move |x, u, o| {
        for i in 0..n {
            let coupling = if i + 1 < n { x[i + 1] } else { u[0] };
            o[i] = owned[i].eval(&x[..=i]) + coupling;
        }
    })
    .globally_lipschitz(model_l);
    model.check_equilibrium()?;
    let feedback = FeedbackLaw::linear(gain);
    Ok(TriangularScenario {
        fields: exprs,
        lipschitz,
        r,
        model,
        feedback,
        iss,
    })
}

impl TriangularScenario {
    pub fn scheme(&self, choice: SchemeChoice) -> Result<PredictorScheme> {
        let l_model = self.model.lipschitz_constant()?;
        match choice {
            SchemeChoice::NoPredictor => no_predictor_scheme(&self.model, &self.feedback, self.r),
            SchemeChoice::Picard { l, q } => {
                make_picard_predictor(&self.model, &self.feedback, PicardConfig::new(l, q, self.r, l_model)?)
            }
            SchemeChoice::Corollary36 { l, q } => {
                corollary36_scheme(&self.model, &self.feedback, PicardConfig::new(l, q, self.r, l_model)?)
            }
            other => Err(Error::UnsupportedScheme(format!("{other:?} is not available for triangular systems"))),
        }
    }

    /// Requires declared ISS constants; otherwise the scenario is simulation-only.
    pub fn delay_problem(&self, l: usize, q: usize, mu: f64) -> Result<DelayProblem> {
        let iss = self
            .iss
            .ok_or(Error::MissingHypothesis("declared ISS constants (γ, R) for certification"))?;
        Ok(DelayProblem::Corollary327 {
            gamma: iss.gamma,
            big_r: iss.big_r,
            lipschitz: self.model.lipschitz_constant()?,
            l,
            q,
            mu,
            k: KChoice::Uniform,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::solve_r_max;
    use crate::closedloop::{estimate_decay, simulate_dynamic_law, simulate_theorem22, verify_envelope, DEFAULT_SKIP};
    use crate::dynamics::phi;
    use crate::picard::{chained_map, q_map};
    use crate::predictors::phi_state_predictor;

    #[test]
    fn scalar_bundle_thresholds() {
        let s = scalar_section4(3.0, 0.25, ScalarFn::sin()).unwrap();
        let p = s.delay_problems(SchemeChoice::ClosedForm(Section4Variant::L1Q1), 1.0);
        let r = solve_r_max(&p[0]).unwrap();
        assert!((r - (393f64.sqrt() - 3.0) / 64.0).abs() < 1e-9);
        let t = scalar_section4(3.0, 0.25, ScalarFn::tanh()).unwrap();
        assert_eq!(t.delay_problems(SchemeChoice::NoPredictor, 1.0), s.delay_problems(SchemeChoice::NoPredictor, 1.0));
        let steep = ScalarFn::from_expr("sin(2*x)/1.5", 1.0).unwrap();
        assert!(scalar_section4(3.0, 0.25, steep).is_err());
    }

    #[test]
    fn phi22_matches_chained_map() {
        let s = scalar_section4(3.0, 1.2, ScalarFn::sin()).unwrap();
        let u = HistorySegment::from_fn(1.2, 240, 1, |t, o| o[0] = (3.0 * t).cos()).unwrap();
        let cfg = PicardConfig::new(2, 2, 1.2, 1.0).unwrap();
        for x in [-2.0, 0.1, 1.7] {
            let a = s.phi22(x, &u).unwrap();
            let b = phi_state_predictor(&s.model, &cfg, &[x], &u).unwrap()[0];
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    fn additive() -> AdditiveScenario {
        additive_example31(
            2,
            1,
            |x, o| {
                o[0] = 0.5 * x[1].sin();
                o[1] = -0.5 * x[0].tanh();
            },
            |u, o| {
                o[0] = 0.0;
                o[1] = 0.5 * u[0];
            },
            0.5,
        )
    }

    #[test]
    fn additive_closed_forms_match_picard() {
        let s = additive();
        let u = SampledSignal::from_fn(0.0, 0.01, 120, 1, |t, o| o[0] = (2.0 * t).sin()).unwrap();
        let x = [1.0, -0.7];
        let cfg1 = s.picard_config(1, 1, 1.2).unwrap();
        let cfg2 = s.picard_config(2, 1, 1.2).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-12);
        assert!(close(&s.q1(&x, &u), &q_map(&s.model, &cfg1, &x, &u).unwrap()));
        assert!(close(&s.q2(&x, &u), &q_map(&s.model, &cfg2, &x, &u).unwrap()));
        let c12 = s.picard_config(1, 2, 1.2).unwrap();
        let c22 = s.picard_config(2, 2, 1.2).unwrap();
        assert!(close(&s.p12(&x, &u).unwrap(), &chained_map(&s.model, &c12, &x, &u).unwrap()));
        assert!(close(&s.p22(&x, &u).unwrap(), &chained_map(&s.model, &c22, &x, &u).unwrap()));
    }

    #[test]
    fn bound_3_14_dominates() {
        let s = additive();
        for amp in [0.1, 1.0, 3.0] {
            let u = SampledSignal::from_fn(0.0, 0.001, 1000, 1, |t, o| o[0] = amp * (5.0 * t).cos()).unwrap();
            let x = [2.0, 1.0];
            let exact = phi(&s.model, &x, &u, 1.0, 1e-3).unwrap();
            let q2 = s.q2(&x, &u);
            let err = crate::dynamics::distance(&q2, &exact);
            assert!(err <= s.bound_3_14(crate::dynamics::norm(&x), &u).unwrap());
        }
    }

    #[test]
    fn zero_drift_is_exact_at_one_iteration() {
        let s = additive_example31(1, 1, |_, o| o[0] = 0.0, |u, o| o[0] = u[0], 1.0);
        let u = SampledSignal::from_fn(0.0, 0.001, 500, 1, |t, o| o[0] = t * t).unwrap();
        let q = s.q1(&[0.3], &u)[0];
        assert!((q - (0.3 + 0.5f64.powi(3) / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn explicit_smith_law_matches_scheme_loop() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let gain = DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]);
        let s = linear_smith(a, b, gain, 1.0).unwrap();
        let w0 = HistorySegment::from_fn(1.0, 50, 1, |t, o| o[0] = 0.5 + t).unwrap();
        let h = 0.02;
        let one = simulate_theorem22(&s.model, &InputSet::Full, &s.scheme, 1.0, 1.0, &[1.0, 0.0], &w0, 10.0, h).unwrap();
        let law = s.explicit_law(1.0).unwrap();
        let two = simulate_dynamic_law(&s.model, &law, 1.0, &[1.0, 0.0], &w0, 10.0, h).unwrap();
        for (p, q) in one.states().iter().zip(two.states()) {
            assert!(crate::dynamics::distance(p, q) < 1e-9);
        }
        let fit = estimate_decay(&one, DEFAULT_SKIP).unwrap();
        assert!(fit.omega() > 0.0);
    }

    #[test]
    fn non_hurwitz_refused() {
        let err = linear_smith(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CertificateRefused(_)));
    }

    #[test]
    fn triangular_systems() {
        let one = triangular_1_3(&["sin(x1)"], 1.0, DMatrix::from_element(1, 1, -4.0), 0.2, None).unwrap();
        let scalar = scalar_section4(3.0, 0.2, ScalarFn::sin()).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        one.model.evaluate_field(&[0.7], &[0.2]).unwrap().iter().zip(&mut a).for_each(|(v, o)| *o = *v);
        scalar.model.evaluate_field(&[0.7], &[0.2]).unwrap().iter().zip(&mut b).for_each(|(v, o)| *o = *v);
        assert!((a[0] - b[0]).abs() < 1e-15);
        assert!(one.delay_problem(1, 1, 1.0).is_err());
        assert!(triangular_1_3(&["x2", "0"], 1.0, DMatrix::zeros(1, 2), 0.1, None).is_err());

        let tri = triangular_1_3(&["sin(x1)", "0"], 1.0, DMatrix::from_row_slice(1, 2, &[-3.0, -3.0]), 0.1, None).unwrap();
        let scheme = tri.scheme(SchemeChoice::Corollary36 { l: 3, q: 2 }).unwrap();
        let w0 = HistorySegment::zeros(0.1, 10, 1).unwrap();
        let traj = simulate_theorem22(&tri.model, &InputSet::Full, &scheme, 5.0, 0.1, &[1.0, -0.5], &w0, 15.0, 0.01).unwrap();
        let fit = estimate_decay(&traj, DEFAULT_SKIP).unwrap();
        assert!(fit.omega() > 0.0 && verify_envelope(&traj, &fit), "{fit:?}");
    }
}
