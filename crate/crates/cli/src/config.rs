//! JSON scenario configuration and its translation into core objects.

use std::fmt;
use std::path::Path;

use delaypred::certificates::ISSConstants;
use delaypred::dynamics::{steps_for, HistorySegment, SystemModel};
use delaypred::expr::Expr;
use delaypred::picard::PicardConfig;
use delaypred::predictors::{
    make_picard_predictor, no_predictor_scheme, FeedbackLaw, InputSet, PredictorScheme, ScalarFn, Section4Variant,
};
use delaypred::scenarios::{linear_smith, scalar_section4, triangular_1_3, ScalarScenario, SchemeChoice};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Knots of the random piecewise-linear initial history.
const RANDOM_KNOTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackConfig>,
    #[serde(default)]
    pub input_set: InputSetConfig,
    pub predictor: PredictorConfig,
    #[serde(rename = "loop")]
    pub run: LoopConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Declared ISS constants `(γ, R)` of the delay-free closed loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iss: Option<IssConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `ẋ = f(x) + u(t - r)` with `k(x) = -(1+κ)x`.
    Scalar {
        #[serde(default = "default_f")]
        f: String,
        kappa: f64,
        #[serde(default = "one")]
        slope: f64,
    },
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    Triangular { fields: Vec<String>, lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    pub gain: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSetConfig {
    #[default]
    Full,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    None,
    ClosedForm,
    Picard,
    Corollary36,
    Smith,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    #[serde(default = "one_usize")]
    pub l: usize,
    #[serde(default = "one_usize")]
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    #[serde(default = "one")]
    pub mu: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_t_end", alias = "T_end")]
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Given {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        x0: Vec<f64>,
        #[serde(default)]
        w0: HistoryConfig,
    },
    /// Drawn from the seed: `|x0| ≤ x_radius`, piecewise-linear `‖w0‖ ≤ w_radius`.
    Random { x_radius: f64, w_radius: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self::Given {
            x0: Vec::new(),
            w0: HistoryConfig::Zero,
        }
    }
}

/// Controller history on `[-r, 0]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HistoryConfig {
    #[default]
    Zero,
    Constant(Vec<f64>),
    /// Equally spaced nodes from `-r` to `0`.
    Samples(Vec<Vec<f64>>),
    /// One expression per input component in the variable `theta ∈ [-r, 0]`.
    Expr(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssConfig {
    pub gamma: f64,
    pub big_r: f64,
}

fn default_f() -> String {
    "sin".into()
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_t_end() -> f64 {
    20.0
}

/// A configuration problem, tagged with where it was found.
#[derive(Debug)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn field(location: &str, message: impl fmt::Display) -> Self {
        Self {
            location: location.to_string(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse(text: &str, origin: &str) -> Result<Config, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::field(&path.display().to_string(), format!("cannot read: {e}")))?;
    parse(&text, &path.display().to_string())
}

fn matrix(location: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(ConfigError::field(location, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(ConfigError::field(
            location,
            format!("row {i} has {} entries, expected {ncols}", rows[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn core(location: &str) -> impl Fn(delaypred::Error) -> ConfigError + '_ {
    move |e| ConfigError::field(location, e)
}

/// Everything needed to run, certify or evaluate one configured scenario.
pub struct Setup {
    pub model: SystemModel,
    pub feedback: FeedbackLaw,
    pub input_set: InputSet,
    pub scheme: PredictorScheme,
    pub choice: SchemeChoice,
    pub scalar: Option<ScalarScenario>,
    pub iss: Option<ISSConstants>,
    pub picard: Option<PicardConfig>,
    pub r: f64,
    pub mu: f64,
    pub h: f64,
    pub t_end: f64,
    pub x0: Vec<f64>,
    pub w0: HistorySegment,
    pub seed: u64,
}

impl Setup {
    /// Generic Picard predictor with the configured `(l, q)`, where the model admits one.
    pub fn generic_picard(&self) -> Option<PredictorScheme> {
        self.picard
            .map(|cfg| make_picard_predictor(&self.model, &self.feedback, cfg))
            .and_then(Result::ok)
    }
}

fn choice(p: &PredictorConfig) -> Result<SchemeChoice, ConfigError> {
    let (l, q) = (p.l, p.q);
    if l == 0 || q == 0 {
        return Err(ConfigError::field("predictor", "l and q must be positive"));
    }
    Ok(match p.kind {
        PredictorKind::None => SchemeChoice::NoPredictor,
        PredictorKind::ClosedForm => {
            SchemeChoice::ClosedForm(Section4Variant::from_lq(l, q).map_err(core("predictor"))?)
        }
        PredictorKind::Picard => SchemeChoice::Picard { l, q },
        PredictorKind::Corollary36 => SchemeChoice::Corollary36 { l, q },
        PredictorKind::Smith => SchemeChoice::Smith,
    })
}

impl Config {
    /// Applies command-line overrides; flags win over the file.
    pub fn with_overrides(mut self, h: Option<f64>, seed: Option<u64>) -> Self {
        if h.is_some() {
            self.run.h = h;
        }
        if seed.is_some() {
            self.seed = seed;
        }
        self
    }

    pub fn build(&self) -> Result<Setup, ConfigError> {
        let r = self.run.r;
        if !(r > 0.0) || !r.is_finite() {
            return Err(ConfigError::field("loop.r", format!("delay must be positive, got {r}")));
        }
        let mu = self.run.mu;
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ConfigError::field("loop.mu", format!("must be positive, got {mu}")));
        }
        let h = self.run.h.unwrap_or(r / 100.0);
        let intervals = steps_for(r, h).map_err(core("loop.h"))?;
        let t_end = self.run.t_end;
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(ConfigError::field("loop.t_end", format!("must be positive, got {t_end}")));
        }
        let choice = choice(&self.predictor)?;
        let declared_iss = self.iss.map(|i| ISSConstants {
            gamma: i.gamma,
            big_r: i.big_r,
            m: f64::NAN,
            omega: f64::NAN,
            epsilon: f64::NAN,
        });

        let (model, feedback, scheme, scalar, iss, lipschitz) = match &self.model {
            ModelConfig::Scalar { f, kappa, slope } => {
                if self.feedback.is_some() {
                    return Err(ConfigError::field(
                        "feedback",
                        "the scalar scenario fixes k(x) = -(1+κ)x; remove the feedback section",
                    ));
                }
                let f = match f.as_str() {
                    "sin" => ScalarFn::sin(),
                    "tanh" => ScalarFn::tanh(),
                    src => ScalarFn::from_expr(src, *slope).map_err(core("model.f"))?,
                };
                let s = scalar_section4(*kappa, r, f).map_err(core("model"))?;
                let scheme = s.scheme(choice).map_err(core("predictor"))?;
                let iss = declared_iss.unwrap_or_else(|| s.iss());
                (s.model.clone(), s.feedback.clone(), scheme, Some(s), Some(iss), 1.0)
            }
            ModelConfig::Linear { a, b } => {
                let a = matrix("model.a", a)?;
                let b = matrix("model.b", b)?;
                let gain = matrix("feedback.gain", &self.gain_rows()?)?;
                let lipschitz = delaypred::dynamics::induced_norm(&a);
                let (model, feedback, scheme) = match choice {
                    SchemeChoice::Smith => {
                        let s = linear_smith(a, b, gain, r).map_err(core("predictor"))?;
                        (s.model, s.feedback, s.scheme)
                    }
                    other => {
                        let model = SystemModel::linear(a, b).map_err(core("model"))?;
                        let feedback = FeedbackLaw::linear(gain);
                        let scheme = generic_scheme(&model, &feedback, other, r)?;
                        (model, feedback, scheme)
                    }
                };
                (model, feedback, scheme, None, declared_iss, lipschitz)
            }
            ModelConfig::Triangular { fields, lipschitz } => {
                let gain = matrix("feedback.gain", &self.gain_rows()?)?;
                let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
                let t = triangular_1_3(&refs, *lipschitz, gain, r, declared_iss).map_err(core("model"))?;
                let scheme = t.scheme(choice).map_err(core("predictor"))?;
                let l = t.model.lipschitz_constant().map_err(core("model"))?;
                (t.model, t.feedback, scheme, None, declared_iss, l)
            }
        };
        if feedback.state_dim() != model.state_dim() || feedback.input_dim() != model.input_dim() {
            return Err(ConfigError::field(
                "feedback.gain",
                format!(
                    "expected a {}×{} gain for this model",
                    model.input_dim(),
                    model.state_dim()
                ),
            ));
        }
        let input_set = self.input_set(model.input_dim())?;
        let seed = self.seed.unwrap_or(0);
        let (x0, w0) = self.initial_data(model.state_dim(), model.input_dim(), r, intervals, seed)?;
        let picard = PicardConfig::new(self.predictor.l, self.predictor.q, r, lipschitz).ok();
        Ok(Setup {
            model,
            feedback,
            input_set,
            scheme,
            choice,
            scalar,
            iss,
            picard,
            r,
            mu,
            h,
            t_end,
            x0,
            w0,
            seed,
        })
    }

    fn gain_rows(&self) -> Result<Vec<Vec<f64>>, ConfigError> {
        self.feedback
            .as_ref()
            .map(|f| f.gain.clone())
            .ok_or_else(|| ConfigError::field("feedback", "a linear gain is required for this model"))
    }

    fn input_set(&self, m: usize) -> Result<InputSet, ConfigError> {
        match &self.input_set {
            InputSetConfig::Full => Ok(InputSet::Full),
            InputSetConfig::Box { lower, upper } => {
                if lower.len() != m || upper.len() != m {
                    return Err(ConfigError::field("input_set", format!("box bounds need {m} entries")));
                }
                InputSet::boxed(lower.clone(), upper.clone()).map_err(core("input_set"))
            }
            InputSetConfig::Ball { radius } => InputSet::ball(*radius).map_err(core("input_set")),
        }
    }

    fn initial_data(
        &self,
        n: usize,
        m: usize,
        r: f64,
        intervals: usize,
        seed: u64,
    ) -> Result<(Vec<f64>, HistorySegment), ConfigError> {
        match &self.initial {
            InitialConfig::Given { x0, w0 } => {
                let x0 = if x0.is_empty() { vec![0.0; n] } else { x0.clone() };
                if x0.len() != n {
                    return Err(ConfigError::field("initial.x0", format!("expected {n} entries, got {}", x0.len())));
                }
                Ok((x0, history(w0, m, r, intervals)?))
            }
            InitialConfig::Random { x_radius, w_radius } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(random_initial(&mut rng, n, m, *x_radius, *w_radius, r, intervals))
            }
        }
    }
}

fn generic_scheme(
    model: &SystemModel,
    feedback: &FeedbackLaw,
    choice: SchemeChoice,
    r: f64,
) -> Result<PredictorScheme, ConfigError> {
    let cfg = |l, q| PicardConfig::for_model(model, l, q, r).map_err(core("predictor"));
    match choice {
        SchemeChoice::NoPredictor => no_predictor_scheme(model, feedback, r).map_err(core("predictor")),
        SchemeChoice::Picard { l, q } => make_picard_predictor(model, feedback, cfg(l, q)?).map_err(core("predictor")),
        SchemeChoice::Corollary36 { l, q } => {
            delaypred::predictors::corollary36_scheme(model, feedback, cfg(l, q)?).map_err(core("predictor"))
        }
        other => Err(ConfigError::field(
            "predictor.kind",
            format!("{other:?} is not available for this model"),
        )),
    }
}

fn history(w0: &HistoryConfig, m: usize, r: f64, intervals: usize) -> Result<HistorySegment, ConfigError> {
    let loc = "initial.w0";
    match w0 {
        HistoryConfig::Zero => HistorySegment::zeros(r, intervals, m).map_err(core(loc)),
        HistoryConfig::Constant(v) => {
            if v.len() != m {
                return Err(ConfigError::field(loc, format!("expected {m} entries, got {}", v.len())));
            }
            HistorySegment::constant(r, intervals, v).map_err(core(loc))
        }
        HistoryConfig::Samples(nodes) => {
            if nodes.len() < 2 {
                return Err(ConfigError::field(loc, "need at least two samples"));
            }
            if let Some(i) = nodes.iter().position(|v| v.len() != m) {
                return Err(ConfigError::field(loc, format!("sample {i} does not have {m} entries")));
            }
            let seg = HistorySegment::new(r, nodes).map_err(core(loc))?;
            seg.resampled(intervals).map_err(core(loc))
        }
        HistoryConfig::Expr(sources) => {
            if sources.len() != m {
                return Err(ConfigError::field(loc, format!("expected {m} expressions, got {}", sources.len())));
            }
            let exprs = sources
                .iter()
                .map(|s| Expr::parse(s, &["theta"]))
                .collect::<delaypred::Result<Vec<_>>>()
                .map_err(core(loc))?;
            HistorySegment::from_fn(r, intervals, m, |theta, out| {
                for (o, e) in out.iter_mut().zip(&exprs) {
                    *o = e.eval(&[theta]);
                }
            })
            .map_err(core(loc))
        }
    }
}

/// Box draws scaled so that `|x0| ≤ x_radius` and `‖w0‖_r ≤ w_radius`.
pub fn random_initial(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    x_radius: f64,
    w_radius: f64,
    r: f64,
    intervals: usize,
) -> (Vec<f64>, HistorySegment) {
    let xs = x_radius / (n as f64).sqrt();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0) * xs).collect();
    let ws = w_radius / (m as f64).sqrt();
    let knots: Vec<Vec<f64>> = (0..=RANDOM_KNOTS)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0) * ws).collect())
        .collect();
    let seg = HistorySegment::new(r, &knots)
        .and_then(|s| s.resampled(intervals))
        .expect("valid knot grid");
    (x0, seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{
        "model": {"kind": "scalar", "f": "sin", "kappa": 3},
        "predictor": {"kind": "closed_form", "l": 2, "q": 1},
        "loop": {"mu": 1, "r": 0.38, "T_end": 20},
        "initial": {"kind": "given", "x0": [1.5], "w0": {"expr": ["cos(theta)"]}},
        "certificates": ["scalar-4.4"],
        "seed": 7
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let a = parse(SCALAR, "inline").unwrap();
        let text = serde_json::to_string_pretty(&a).unwrap();
        let b = parse(&text, "inline").unwrap();
        assert_eq!(a, b);
        assert_eq!(text, serde_json::to_string_pretty(&b).unwrap());
    }

    #[test]
    fn overrides_take_precedence() {
        let c = parse(SCALAR, "inline").unwrap().with_overrides(Some(0.0038), None);
        assert_eq!(c.run.h, Some(0.0038));
        assert_eq!(c.seed, Some(7));
        let s = c.build().unwrap();
        assert_eq!(s.w0.intervals(), 100);
        let d = parse(SCALAR, "inline").unwrap().build().unwrap();
        assert!((d.h - 0.0038).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_carry_location() {
        let err = parse("{\n  \"model\": {\"kind\": \"scalar\", \"kappa\": 3, \"bogus\": 1}\n}", "cfg.json").unwrap_err();
        assert!(err.location.starts_with("cfg.json:"), "{err}");
        assert!(err.message.contains("bogus"));
        let bad_h = parse(SCALAR, "inline").unwrap().with_overrides(Some(0.07), None);
        assert_eq!(bad_h.build().err().unwrap().location, "loop.h");
    }

    #[test]
    fn random_initial_respects_radii() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (x, w) = random_initial(&mut rng, 3, 2, 10.0, 4.0, 0.5, 50);
            assert!(delaypred::dynamics::norm(&x) <= 10.0 + 1e-12);
            assert!(w.sup_norm() <= 4.0 + 1e-12);
        }
    }
}
