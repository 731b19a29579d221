//! Closed-form low-order predictors for the scalar plant `ẋ = f(x) + u(t - r)`
//! with the feedback `k(x) = -(1+κ)x` and `|f'| ≤ 1`.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::HistorySegment;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::picard::{sharp_k, PicardConfig};

use super::{check_history, cumulative_trapezoid, trapezoid, PredictorMap, PredictorScheme, SchemeKind};

type Scalar = dyn Fn(f64) -> f64 + Send + Sync;

/// A scalar nonlinearity with its derivative and a declared slope bound.
#[derive(Clone)]
pub struct ScalarFn {
    name: String,
    f: Arc<Scalar>,
    df: Arc<Scalar>,
    slope: f64,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn").field("name", &self.name).field("slope", &self.slope).finish()
    }
}

impl ScalarFn {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope: f64,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            slope,
        }
    }

    pub fn sin() -> Self {
        Self::new("sin", f64::sin, f64::cos, 1.0)
    }

    pub fn tanh() -> Self {
        Self::new("tanh", f64::tanh, |x| 1.0 - x.tanh().powi(2), 1.0)
    }

    /// From an expression in the variable `x`; the slope bound is declared, not derived.
    pub fn from_expr(source: &str, slope: f64) -> Result<Self> {
        let e = Expr::parse(source, &["x"])?;
        let d = e.clone();
        Ok(Self::new(source, move |x| e.eval(&[x]), move |x| d.partial(&[x], 0), slope))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    /// Samples `|f'|` on `[-radius, radius]` against the declared bound.
    pub fn check_slope(&self, radius: f64, samples: usize) -> Result<()> {
        for i in 0..=samples {
            let x = -radius + 2.0 * radius * i as f64 / samples.max(1) as f64;
            let d = self.derivative(x).abs();
            if d > self.slope * (1.0 + 1e-12) {
                return Err(Error::HypothesisViolated(format!("|f'({x})| = {d} exceeds {}", self.slope)));
            }
        }
        if self.value(0.0).abs() > 1e-12 {
            return Err(Error::HypothesisViolated(format!("f(0) = {} ≠ 0", self.value(0.0))));
        }
        Ok(())
    }
}

/// `(l, q)` of the available closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section4Variant {
    L1Q1,
    L2Q1,
    L1Q2,
}

impl Section4Variant {
    pub fn from_lq(l: usize, q: usize) -> Result<Self> {
        match (l, q) {
            (1, 1) => Ok(Self::L1Q1),
            (2, 1) => Ok(Self::L2Q1),
            (1, 2) => Ok(Self::L1Q2),
            _ => Err(Error::UnsupportedScheme(format!(
                "closed-form scalar predictor available for (l,q) in {{(1,1),(2,1),(1,2)}}, got ({l},{q})"
            ))),
        }
    }

    pub fn lq(self) -> (usize, usize) {
        match self {
            Self::L1Q1 => (1, 1),
            Self::L2Q1 => (2, 1),
            Self::L1Q2 => (1, 2),
        }
    }
}

struct Section4Map {
    kappa: f64,
    r: f64,
    f: ScalarFn,
    variant: Section4Variant,
}

/// Histories the formulas read: node `j` is `u(τ - r)` at `τ = j h`.
struct Samples<'a> {
    h: f64,
    u: Vec<f64>,
    cum: Vec<f64>,
    history: &'a HistorySegment,
}

impl Section4Map {
    fn samples<'a>(&self, history: &'a HistorySegment) -> Result<Samples<'a>> {
        check_history(history, self.r, 1)?;
        let u: Vec<f64> = (0..=history.intervals()).map(|j| history.node(j)[0]).collect();
        let h = history.step();
        let cum = cumulative_trapezoid(&u, h);
        Ok(Samples { h, u, cum, history })
    }

    fn p(&self, x: f64, s: &Samples<'_>, mid: Option<(f64, f64)>) -> f64 {
        let c = 1.0 + self.kappa;
        let fx = self.f.value(x);
        let r = self.r;
        let total = *s.cum.last().unwrap_or(&0.0);
        match self.variant {
            Section4Variant::L1Q1 => -c * (x + r * fx + total),
            Section4Variant::L2Q1 => {
                let vals: Vec<f64> = (0..s.u.len())
                    .map(|j| self.f.value(x + j as f64 * s.h * fx + s.cum[j]))
                    .collect();
                -c * (x + trapezoid(&vals, s.h) + total)
            }
            Section4Variant::L1Q2 => {
                let (half_cum, _) = mid.expect("midpoint samples");
                let y = x + 0.5 * r * fx + half_cum;
                -c * (x + 0.5 * r * fx + total + 0.5 * r * self.f.value(y))
            }
        }
    }

    fn g(&self, x: f64, s: &Samples<'_>, mid: Option<(f64, f64)>) -> f64 {
        let c = 1.0 + self.kappa;
        let fx = self.f.value(x);
        let dfx = self.f.derivative(x);
        let r = self.r;
        let u0 = *s.u.last().unwrap_or(&0.0);
        let ur = s.u[0];
        match self.variant {
            Section4Variant::L1Q1 => -c * (fx + r * dfx * fx + r * dfx * ur + u0),
            Section4Variant::L2Q1 => {
                let vals: Vec<f64> = (0..s.u.len())
                    .map(|j| {
                        let tau = j as f64 * s.h;
                        let y = x + tau * fx + s.cum[j];
                        self.f.derivative(y) * (fx + tau * dfx * fx + tau * dfx * ur + s.u[j])
                    })
                    .collect();
                -c * (fx + u0 + trapezoid(&vals, s.h))
            }
            Section4Variant::L1Q2 => {
                let (half_cum, u_half) = mid.expect("midpoint samples");
                let y = x + 0.5 * r * fx + half_cum;
                let first = fx + 0.5 * r * dfx * fx + 0.5 * r * dfx * ur + u0;
                let second = 0.5 * r * self.f.derivative(y) * (fx + u_half + 0.5 * r * dfx * fx + 0.5 * r * dfx * ur);
                -c * first - c * second
            }
        }
    }

    /// `(∫_0^{r/2} u(τ-r)dτ, u(-r/2))`, exact on an even grid.
    fn midpoint(&self, s: &Samples<'_>) -> Option<(f64, f64)> {
        if self.variant != Section4Variant::L1Q2 {
            return None;
        }
        let n = s.u.len() - 1;
        if n % 2 == 0 {
            Some((s.cum[n / 2], s.u[n / 2]))
        } else {
            let fine = s.history.resampled(2 * n).expect("resample");
            let u: Vec<f64> = (0..n + 1).map(|j| fine.node(j)[0]).collect();
            Some((trapezoid(&u, fine.step()), fine.node(n)[0]))
        }
    }
}

impl PredictorMap for Section4Map {
    fn predict(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        scalar_state(x)?;
        let s = self.samples(history)?;
        let mid = self.midpoint(&s);
        Ok(vec![self.p(x[0], &s, mid)])
    }

    fn derivative(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        scalar_state(x)?;
        let s = self.samples(history)?;
        let mid = self.midpoint(&s);
        Ok(vec![self.g(x[0], &s, mid)])
    }

    fn evaluate(&self, x: &[f64], history: &HistorySegment) -> Result<(Vec<f64>, Vec<f64>)> {
        scalar_state(x)?;
        let s = self.samples(history)?;
        let mid = self.midpoint(&s);
        Ok((vec![self.p(x[0], &s, mid)], vec![self.g(x[0], &s, mid)]))
    }
}

fn scalar_state(x: &[f64]) -> Result<()> {
    if x.len() != 1 {
        return Err(Error::DimensionMismatch {
            what: "scalar state",
            expected: 1,
            got: x.len(),
        });
    }
    Ok(())
}

/// Hand-derived `(p_{l,q}, g_{l,q})` for the scalar plant.
///
/// Error constants: `2(1+κ) r^{l+1}/(1-r)` for `q = 1`; for `q = 2` the
/// two-interval constant `2(1+κ) K (r/2)²/(1 - r/2)` with the sharp `K`.
pub fn section4_schemes(kappa: f64, r: f64, f: ScalarFn, variant: Section4Variant) -> Result<PredictorScheme> {
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("κ must be positive, got {kappa}")));
    }
    if f.slope() > 1.0 {
        return Err(Error::HypothesisViolated(format!(
            "closed forms assume |f'| ≤ 1, declared {}",
            f.slope()
        )));
    }
    let (l, q) = variant.lq();
    if !(r > 0.0) || r >= q as f64 {
        return Err(Error::Domain(format!("need 0 < r < {q} for q = {q}, got r = {r}")));
    }
    let c = 1.0 + kappa;
    let (a, growth) = match variant {
        Section4Variant::L1Q1 => (2.0 * c * r * r / (1.0 - r), 2.0 * c * (1.0 + r)),
        Section4Variant::L2Q1 => (2.0 * c * r.powi(3) / (1.0 - r), c * (2.0 + 2.0 * r + r * r)),
        Section4Variant::L1Q2 => {
            let cfg = PicardConfig::new(l, q, r, 1.0)?;
            let t = r / 2.0;
            (2.0 * c * sharp_k(&cfg)? * t * t / (1.0 - t), c * (2.0 + 2.0 * r + r * r / 2.0))
        }
    };
    let name = format!("scalar-closed-form(l={l}, q={q}, f={})", f.name());
    let map = Section4Map { kappa, r, f, variant };
    Ok(PredictorScheme::new(name, SchemeKind::Approximate, 1, map)
        .with_constants(a, a)
        .with_growth(growth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemModel;
    use crate::predictors::{make_picard_predictor, FeedbackLaw};
    use nalgebra::DMatrix;

    fn sin_model() -> SystemModel {
        SystemModel::new("sin", 1, 1, |x, u, out| out[0] = x[0].sin() + u[0]).globally_lipschitz(1.0)
    }

    fn k3() -> FeedbackLaw {
        FeedbackLaw::linear(DMatrix::from_element(1, 1, -4.0))
    }

    #[test]
    fn p11_example_value() {
        let s = section4_schemes(3.0, 0.25, ScalarFn::sin(), Section4Variant::L1Q1).unwrap();
        let z = HistorySegment::zeros(0.25, 10, 1).unwrap();
        let p = s.p(&[1.0], &z).unwrap()[0];
        let expected = -4.0 * (1.0 + 0.25 * 1.0f64.sin());
        assert!((p - expected).abs() < 1e-14);
        assert!((p + 4.84147).abs() < 1e-5);
        assert_eq!(s.g(&[0.0], &z).unwrap(), vec![0.0]);
    }

    #[test]
    fn closed_forms_match_picard_maps() {
        let model = sin_model();
        for (variant, r) in [
            (Section4Variant::L1Q1, 0.6),
            (Section4Variant::L2Q1, 0.6),
            (Section4Variant::L1Q2, 1.4),
        ] {
            let (l, q) = variant.lq();
            let s4 = section4_schemes(3.0, r, ScalarFn::sin(), variant).unwrap();
            let cfg = PicardConfig::new(l, q, r, 1.0).unwrap();
            let pic = make_picard_predictor(&model, &k3(), cfg).unwrap();
            let u = HistorySegment::from_fn(r, 256, 1, |t, o| o[0] = 0.5 * (4.0 * t).sin() - 0.2).unwrap();
            for x in [-1.5, 0.0, 0.3, 2.0] {
                let a = s4.p(&[x], &u).unwrap()[0];
                let b = pic.p(&[x], &u).unwrap()[0];
                assert!((a - b).abs() < 1e-9, "{variant:?} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn odd_grid_midpoint_is_resampled() {
        let s = section4_schemes(3.0, 1.0, ScalarFn::sin(), Section4Variant::L1Q2).unwrap();
        let even = HistorySegment::from_fn(1.0, 400, 1, |t, o| o[0] = t).unwrap();
        let odd = HistorySegment::from_fn(1.0, 401, 1, |t, o| o[0] = t).unwrap();
        let a = s.p_and_g(&[0.4], &even).unwrap();
        let b = s.p_and_g(&[0.4], &odd).unwrap();
        assert!((a.0[0] - b.0[0]).abs() < 1e-12 && (a.1[0] - b.1[0]).abs() < 1e-12);
    }

    #[test]
    fn domain_and_variant_errors() {
        assert!(section4_schemes(3.0, 1.0, ScalarFn::sin(), Section4Variant::L1Q1).is_err());
        assert!(section4_schemes(3.0, 1.5, ScalarFn::sin(), Section4Variant::L1Q2).is_ok());
        assert!(section4_schemes(3.0, 2.0, ScalarFn::sin(), Section4Variant::L1Q2).is_err());
        assert!(Section4Variant::from_lq(2, 2).is_err());
        let steep = ScalarFn::new("2x", |x| 2.0 * x, |_| 2.0, 2.0);
        assert!(section4_schemes(3.0, 0.2, steep, Section4Variant::L1Q1).is_err());
    }

    #[test]
    fn expression_functions() {
        let f = ScalarFn::from_expr("sin(x)/2 + tanh(x)/2", 1.0).unwrap();
        f.check_slope(10.0, 1000).unwrap();
        assert!((f.derivative(0.3) - (0.3f64.cos() / 2.0 + (1.0 - 0.3f64.tanh().powi(2)) / 2.0)).abs() < 1e-14);
        assert!(ScalarFn::from_expr("2*x", 1.0).unwrap().check_slope(1.0, 10).is_err());
    }
}
