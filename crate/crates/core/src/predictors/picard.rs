//! Predictors built from the chained Picard map.

use crate::dynamics::{HistorySegment, SystemModel, GROWTH_FACTOR};
use crate::error::{Error, Result};
use crate::picard::{chained_map, compute_k, PicardConfig};

use super::{check_history, FeedbackLaw, PredictorMap, PredictorScheme, SchemeKind};

/// `Φ_{l,q}(x, u) = P^{δ_{-r}u}_{l,q} x`, the predicted state `r` time units ahead.
pub fn phi_state_predictor(
    model: &SystemModel,
    cfg: &PicardConfig,
    x: &[f64],
    u: &HistorySegment,
) -> Result<Vec<f64>> {
    check_history(u, cfg.horizon, model.input_dim())?;
    chained_map(model, cfg, x, &u.advanced())
}

/// `k'·f(Φ_{l,q}(x, u), u(0))` for a linear feedback `k(x) = k'x`.
pub fn corollary36_g(
    model: &SystemModel,
    feedback: &FeedbackLaw,
    cfg: &PicardConfig,
    x: &[f64],
    u: &HistorySegment,
) -> Result<Vec<f64>> {
    let predicted = phi_state_predictor(model, cfg, x, u)?;
    linear_g(model, feedback, &predicted, u.newest())
}

fn linear_g(model: &SystemModel, feedback: &FeedbackLaw, predicted: &[f64], u0: &[f64]) -> Result<Vec<f64>> {
    if !feedback.is_linear() {
        return Err(Error::UnsupportedScheme(
            "the state-predictor derivative needs a linear feedback".into(),
        ));
    }
    let f = model.evaluate_field(predicted, u0)?;
    Ok(feedback.eval(&f))
}

fn check_pair(model: &SystemModel, feedback: &FeedbackLaw) -> Result<()> {
    if feedback.state_dim() != model.state_dim() || feedback.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "feedback",
            expected: model.state_dim(),
            got: feedback.state_dim(),
        });
    }
    Ok(())
}

struct PicardMap {
    model: SystemModel,
    feedback: FeedbackLaw,
    cfg: PicardConfig,
}

impl PredictorMap for PicardMap {
    fn predict(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        let predicted = phi_state_predictor(&self.model, &self.cfg, x, history)?;
        Ok(self.feedback.eval(&predicted))
    }

    fn derivative(&self, _x: &[f64], _history: &HistorySegment) -> Result<Vec<f64>> {
        Err(Error::UnsupportedScheme(
            "no general derivative for the Picard predictor; use the state-predictor scheme or a hand-derived pair"
                .into(),
        ))
    }
}

/// `p_{l,q}(x, u) = k(P^{δ_{-r}u}_{l,q} x)`; `g` is left unsupported.
///
/// Error constants use `ε = 1`: `a1 = a2 = 2RK(LT)^{l+1}/(1-LT)`. `G` bounds `|p|` only.
pub fn make_picard_predictor(
    model: &SystemModel,
    feedback: &FeedbackLaw,
    cfg: PicardConfig,
) -> Result<PredictorScheme> {
    check_pair(model, feedback)?;
    let factor = cfg.geometric_factor()?;
    let k = compute_k(&cfg)?;
    let r_bound = feedback.bound();
    let a = 2.0 * r_bound * k * factor;
    let growth = r_bound * ((GROWTH_FACTOR * cfg.lipschitz * cfg.horizon).exp() + k * factor);
    let name = format!("picard(l={}, q={})", cfg.iterations, cfg.subintervals);
    let map = PicardMap {
        model: model.clone(),
        feedback: feedback.clone(),
        cfg,
    };
    Ok(PredictorScheme::new(name, SchemeKind::Approximate, model.input_dim(), map)
        .with_constants(a, a)
        .with_growth(growth))
}

struct StateMap {
    model: SystemModel,
    feedback: FeedbackLaw,
    cfg: PicardConfig,
}

impl PredictorMap for StateMap {
    fn predict(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        let predicted = phi_state_predictor(&self.model, &self.cfg, x, history)?;
        Ok(self.feedback.eval(&predicted))
    }

    fn derivative(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        corollary36_g(&self.model, &self.feedback, &self.cfg, x, history)
    }

    fn evaluate(&self, x: &[f64], history: &HistorySegment) -> Result<(Vec<f64>, Vec<f64>)> {
        let predicted = phi_state_predictor(&self.model, &self.cfg, x, history)?;
        let g = linear_g(&self.model, &self.feedback, &predicted, history.newest())?;
        Ok((self.feedback.eval(&predicted), g))
    }
}

/// `(k'Φ_{l,q}, k'f(Φ_{l,q}, u(0)))` for linear `k`; runs as `u̇ = g − μ(u − p)` with `w = u`.
///
/// `a1 = a2 = 2KR·max{1,L}(LT)^{l+1}/(1-LT)`;
/// `G = R[(1+L)(e^{pLr} + K(LT)^{l+1}/(1-LT)) + L]`.
pub fn corollary36_scheme(
    model: &SystemModel,
    feedback: &FeedbackLaw,
    cfg: PicardConfig,
) -> Result<PredictorScheme> {
    check_pair(model, feedback)?;
    if !feedback.is_linear() {
        return Err(Error::UnsupportedScheme(
            "the state-predictor scheme needs a linear feedback".into(),
        ));
    }
    let factor = cfg.geometric_factor()?;
    let k = compute_k(&cfg)?;
    let l = cfg.lipschitz;
    let r_bound = feedback.bound();
    let a = 2.0 * k * r_bound * l.max(1.0) * factor;
    let phi_growth = (GROWTH_FACTOR * l * cfg.horizon).exp() + k * factor;
    let growth = r_bound * ((1.0 + l) * phi_growth + l);
    let name = format!("state-predictor(l={}, q={})", cfg.iterations, cfg.subintervals);
    let map = StateMap {
        model: model.clone(),
        feedback: feedback.clone(),
        cfg,
    };
    Ok(PredictorScheme::new(name, SchemeKind::Corollary36, model.input_dim(), map)
        .with_constants(a, a)
        .with_growth(growth))
}

/// `|p| + |g|` normalized by `|x| + ‖u‖_r`, for growth spot checks.
#[cfg(test)]
pub(crate) fn growth_ratio(p: &[f64], g: &[f64], x: &[f64], u: &HistorySegment) -> f64 {
    use crate::dynamics::norm;
    let denom = norm(x) + u.sup_norm();
    if denom == 0.0 {
        0.0
    } else {
        (norm(p) + norm(g)) / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{phi, SampledSignal};
    use nalgebra::DMatrix;

    fn sin_model() -> SystemModel {
        SystemModel::new("sin", 1, 1, |x, u, out| out[0] = x[0].sin() + u[0]).globally_lipschitz(1.0)
    }

    fn k3() -> FeedbackLaw {
        FeedbackLaw::linear(DMatrix::from_element(1, 1, -4.0))
    }

    fn history(r: f64) -> HistorySegment {
        HistorySegment::from_fn(r, 200, 1, |t, o| o[0] = 0.3 * (3.0 * t).cos() - 0.1).unwrap()
    }

    #[test]
    fn zero_inputs_give_zero() {
        let model = sin_model();
        let cfg = PicardConfig::new(2, 1, 0.5, 1.0).unwrap();
        let s = corollary36_scheme(&model, &k3(), cfg).unwrap();
        let z = HistorySegment::zeros(0.5, 10, 1).unwrap();
        let (p, g) = s.p_and_g(&[0.0], &z).unwrap();
        assert_eq!((p[0], g[0]), (0.0, 0.0));
        assert_eq!(phi_state_predictor(&model, &cfg, &[0.0], &z).unwrap(), vec![0.0]);
    }

    #[test]
    fn picard_p_error_within_constants() {
        let model = sin_model();
        let r = 0.5;
        let u = history(r);
        let x = [0.8];
        let adv = u.advanced();
        let exact = phi(&model, &x, &adv, r, r / 2000.0).unwrap();
        let k = k3();
        let target = k.eval(&exact)[0];
        let mut last = f64::INFINITY;
        for l in 1..=4 {
            let cfg = PicardConfig::new(l, 1, r, 1.0).unwrap();
            let s = make_picard_predictor(&model, &k, cfg).unwrap();
            let err = (s.p(&x, &u).unwrap()[0] - target).abs();
            let c = s.constants().unwrap();
            assert!(err <= (c.a1 * x[0]).max(c.a2 * u.sup_norm()), "l={l}: {err}");
            assert!(err < last);
            last = err;
        }
        let cfg = PicardConfig::new(1, 1, r, 1.0).unwrap();
        let s = make_picard_predictor(&model, &k, cfg).unwrap();
        assert!(matches!(s.g(&x, &u), Err(Error::UnsupportedScheme(_))));
    }

    #[test]
    fn state_g_matches_scalar_structure() {
        let model = sin_model();
        let r = 1.2;
        let u = history(r);
        let cfg = PicardConfig::new(2, 2, r, 1.0).unwrap();
        let x = [-0.4];
        let phi_x = phi_state_predictor(&model, &cfg, &x, &u).unwrap()[0];
        let g = corollary36_g(&model, &k3(), &cfg, &x, &u).unwrap()[0];
        let expected = -4.0 * phi_x.sin() - 4.0 * u.newest()[0];
        assert!((g - expected).abs() < 1e-14);
    }

    #[test]
    fn nonlinear_feedback_rejected() {
        let model = sin_model();
        let k = FeedbackLaw::nonlinear(1, 1, |x, o| o[0] = -x[0], |_| DMatrix::from_element(1, 1, -1.0), 1.0);
        let cfg = PicardConfig::new(1, 1, 0.5, 1.0).unwrap();
        assert!(corollary36_scheme(&model, &k, cfg).is_err());
        let u = HistorySegment::zeros(0.5, 4, 1).unwrap();
        assert!(corollary36_g(&model, &k, &cfg, &[1.0], &u).is_err());
    }

    #[test]
    fn linear_state_predictor_approaches_variation_of_constants() {
        // ẋ = -x + u: φ(r) = e^{-r}x + ∫₀^r e^{-(r-s)} u(s-r) ds
        let a = -1.0;
        let model = SystemModel::linear(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let r = 0.6;
        let u = history(r);
        let adv: SampledSignal = u.advanced().refined(10);
        let h = adv.step();
        let vals: Vec<f64> = (0..adv.nodes())
            .map(|j| (a * (r - adv.time(j))).exp() * adv.node(j)[0])
            .collect();
        let exact = (a * r).exp() * 0.5 + super::super::trapezoid(&vals, h);
        let cfg = PicardConfig::new(12, 1, r, 1.0).unwrap();
        let approx = phi_state_predictor(&model, &cfg, &[0.5], &u).unwrap()[0];
        assert!((approx - exact).abs() < 1e-5, "{approx} vs {exact}");
    }

    #[test]
    fn growth_constant_dominates() {
        let model = sin_model();
        let cfg = PicardConfig::new(2, 2, 1.0, 1.0).unwrap();
        let s = corollary36_scheme(&model, &k3(), cfg).unwrap();
        for (x, amp) in [(3.0, 0.1), (-0.2, 5.0), (1.0, 1.0)] {
            let u = HistorySegment::from_fn(1.0, 64, 1, |t, o| o[0] = amp * (5.0 * t).sin()).unwrap();
            let (p, g) = s.p_and_g(&[x], &u).unwrap();
            assert!(growth_ratio(&p, &g, &[x], &u) <= s.growth().unwrap());
        }
    }
}
