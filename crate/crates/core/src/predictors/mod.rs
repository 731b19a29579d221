//! Predictor schemes `(p, g)` and the input set `U`.
//!
//! `p(x, u)` approximates the undelayed stabilizer evaluated `r` time units
//! ahead, `k(φ(r, x; δ_{-r}u))`, from the current state and the input history
//! `T_r(t)u`. `g` is its time derivative along solutions of the delayed plant,
//! which lets the feedback run as the dynamic law
//! `ẇ = g − μ(w − p)`, `u = Pr_U(w)`.

mod nopred;
mod picard;
mod section4;
mod smith;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{induced_norm, norm, HistorySegment};
use crate::error::{Error, Result};

pub use nopred::no_predictor_scheme;
pub use picard::{corollary36_g, corollary36_scheme, make_picard_predictor, phi_state_predictor};
pub use section4::{section4_schemes, ScalarFn, Section4Variant};
pub use smith::{is_hurwitz, smith_scheme};

/// Closed convex input set containing the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSet {
    Full,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { radius: f64 },
}

impl InputSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(*l <= 0.0 && 0.0 <= *u)) {
            return Err(Error::Domain("box must contain the origin".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::Domain(format!("ball radius must be non-negative, got {radius}")));
        }
        Ok(Self::Ball { radius })
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Self::Full)
    }

    pub fn project_into(&self, w: &[f64], out: &mut [f64]) {
        match self {
            Self::Full => out.copy_from_slice(w),
            Self::Box { lower, upper } => {
                for (((o, wi), lo), hi) in out.iter_mut().zip(w).zip(lower).zip(upper) {
                    *o = wi.clamp(*lo, *hi);
                }
            }
            Self::Ball { radius } => {
                let size = norm(w);
                let scale = if size > *radius { radius / size } else { 1.0 };
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = wi * scale;
                }
            }
        }
    }

    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        self.project_into(w, &mut out);
        out
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        match self {
            Self::Full => true,
            Self::Box { lower, upper } => w.iter().zip(lower).zip(upper).all(|((x, l), u)| l <= x && x <= u),
            Self::Ball { radius } => norm(w) <= *radius * (1.0 + 1e-15),
        }
    }
}

/// Euclidean projection onto `U`.
pub fn project(set: &InputSet, w: &[f64]) -> Vec<f64> {
    set.project(w)
}

type MapFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Stabilizer `k` of the undelayed system, with gradient and bound `R`.
#[derive(Clone)]
pub struct FeedbackLaw {
    n: usize,
    m: usize,
    k: Arc<MapFn>,
    grad: Arc<GradFn>,
    bound: f64,
    gain: Option<DMatrix<f64>>,
}

impl fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackLaw")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("bound", &self.bound)
            .field("gain", &self.gain)
            .finish()
    }
}

impl FeedbackLaw {
    /// `k(x) = gain · x` with `R = |gain|`.
    pub fn linear(gain: DMatrix<f64>) -> Self {
        let bound = induced_norm(&gain);
        let (m, n) = gain.shape();
        let g = gain.clone();
        let g2 = gain.clone();
        Self {
            n,
            m,
            k: Arc::new(move |x, out| {
                for i in 0..m {
                    out[i] = (0..n).map(|j| g[(i, j)] * x[j]).sum();
                }
            }),
            grad: Arc::new(move |_| g2.clone()),
            bound,
            gain: Some(gain),
        }
    }

    pub fn nonlinear(
        n: usize,
        m: usize,
        k: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        bound: f64,
    ) -> Self {
        Self {
            n,
            m,
            k: Arc::new(k),
            grad: Arc::new(grad),
            bound,
            gain: None,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    /// Declared `R` with `|k(x)| ≤ R|x|` and `|∇k(x)| ≤ R`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn gain(&self) -> Option<&DMatrix<f64>> {
        self.gain.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.gain.is_some()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.k)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.eval_into(x, &mut out);
        out
    }

    /// `m × n` Jacobian of `k`.
    pub fn gradient(&self, x: &[f64]) -> DMatrix<f64> {
        (self.grad)(x)
    }

    /// Spot-checks `k(0) = 0`, `|k(x)| ≤ R|x|` and `|∇k(x)| ≤ R`.
    pub fn verify_bounds(&self, radius: f64, seed: u64) -> Result<()> {
        let k0 = norm(&self.eval(&vec![0.0; self.n]));
        if k0 > 1e-12 {
            return Err(Error::HypothesisViolated(format!("|k(0)| = {k0}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..crate::dynamics::SPOT_CHECK_PAIRS {
            let x: Vec<f64> = (0..self.n).map(|_| rng.gen_range(-radius..=radius)).collect();
            let kx = norm(&self.eval(&x));
            let bound = self.bound * norm(&x);
            if kx > bound * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::HypothesisViolated(format!("|k(x)| = {kx} > R|x| = {bound}")));
            }
            let gx = induced_norm(&self.gradient(&x));
            if gx > self.bound * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::HypothesisViolated(format!("|∇k(x)| = {gx} > R = {}", self.bound)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Exact,
    Approximate,
    None,
    Corollary36,
}

/// Constants `(a1, a2)` of `|k(φ(r,x;δ_{-r}u)) − p(x,u)| ≤ max{a1|x|, a2‖u‖_r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConstants {
    pub a1: f64,
    pub a2: f64,
}

/// Evaluators behind a [`PredictorScheme`].
pub trait PredictorMap: Send + Sync {
    /// `p(x, u)`.
    fn predict(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>>;

    /// `g(x, u)`.
    fn derivative(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>>;

    /// `(p, g)` in one pass; override when the two share work.
    fn evaluate(&self, x: &[f64], history: &HistorySegment) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.predict(x, history)?, self.derivative(x, history)?))
    }
}

#[derive(Clone)]
pub struct PredictorScheme {
    name: String,
    kind: SchemeKind,
    map: Arc<dyn PredictorMap>,
    constants: Option<ErrorConstants>,
    growth: Option<f64>,
    input_dim: usize,
}

impl fmt::Debug for PredictorScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictorScheme")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("constants", &self.constants)
            .field("growth", &self.growth)
            .finish()
    }
}

impl PredictorScheme {
    pub fn new(
        name: impl Into<String>,
        kind: SchemeKind,
        input_dim: usize,
        map: impl PredictorMap + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            map: Arc::new(map),
            constants: None,
            growth: None,
            input_dim,
        }
    }

    pub fn with_constants(mut self, a1: f64, a2: f64) -> Self {
        self.constants = Some(ErrorConstants { a1, a2 });
        self
    }

    pub fn with_growth(mut self, growth: f64) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn constants(&self) -> Option<ErrorConstants> {
        self.constants
    }

    /// `G` with `|p| + |g| ≤ G(|x| + ‖u‖_r)`, when known.
    pub fn growth(&self) -> Option<f64> {
        self.growth
    }

    pub fn p(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        self.map.predict(x, history)
    }

    pub fn g(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        self.map.derivative(x, history)
    }

    pub fn p_and_g(&self, x: &[f64], history: &HistorySegment) -> Result<(Vec<f64>, Vec<f64>)> {
        self.map.evaluate(x, history)
    }
}

/// Trapezoid partial integrals `C_j = ∫ from node 0 to node j` of scalar samples.
pub(crate) fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

pub(crate) fn check_history(history: &HistorySegment, r: f64, dim: usize) -> Result<()> {
    if (history.r() - r).abs() > 1e-9 * (1.0 + r) {
        return Err(Error::GridMismatch(format!(
            "history covers [-{}, 0] but the scheme predicts over r = {r}",
            history.r()
        )));
    }
    if history.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: "history",
            expected: dim,
            got: history.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project(&InputSet::Full, &[2.0, -7.0]), vec![2.0, -7.0]);
        let b = InputSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(project(&b, &[2.0, -0.5]), vec![1.0, -0.5]);
        let ball = InputSet::ball(1.0).unwrap();
        let p = project(&ball, &[3.0, 4.0]);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!(ball.contains(&p) && b.contains(&[1.0, -0.5]));
    }

    #[test]
    fn input_sets_must_contain_origin() {
        assert!(InputSet::boxed(vec![0.5], vec![1.0]).is_err());
        assert!(InputSet::boxed(vec![-1.0], vec![1.0, 2.0]).is_err());
        assert!(InputSet::ball(-1.0).is_err());
    }

    #[test]
    fn linear_feedback_bounds() {
        let k = FeedbackLaw::linear(DMatrix::from_row_slice(1, 2, &[-3.0, -4.0]));
        assert!((k.bound() - 5.0).abs() < 1e-12);
        assert_eq!(k.eval(&[1.0, 1.0]), vec![-7.0]);
        k.verify_bounds(10.0, 3).unwrap();
        let wrong = FeedbackLaw::nonlinear(1, 1, |x, o| o[0] = 2.0 * x[0], |_| DMatrix::from_element(1, 1, 2.0), 1.0);
        assert!(wrong.verify_bounds(1.0, 0).is_err());
    }

    #[test]
    fn trapezoid_helpers() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(trapezoid(&v, 0.5), 2.25);
        assert_eq!(cumulative_trapezoid(&v, 0.5), vec![0.0, 0.25, 1.0, 2.25]);
        assert_eq!(trapezoid(&[4.0], 1.0), 0.0);
    }
}
