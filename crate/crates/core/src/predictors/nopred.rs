//! The uncompensated scheme: `p = k(x)`, `g = ∇k(x) f(x, u(-r))`.

use nalgebra::DVector;

use crate::dynamics::{HistorySegment, SystemModel};
use crate::error::{Error, Result};

use super::{FeedbackLaw, PredictorMap, PredictorScheme, SchemeKind};

struct NoPredictor {
    model: SystemModel,
    feedback: FeedbackLaw,
}

impl PredictorMap for NoPredictor {
    fn predict(&self, x: &[f64], _history: &HistorySegment) -> Result<Vec<f64>> {
        self.model.check_state(x)?;
        Ok(self.feedback.eval(x))
    }

    fn derivative(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        let f = self.model.evaluate_field(x, history.oldest())?;
        let g = self.feedback.gradient(x) * DVector::from_column_slice(&f);
        Ok(g.as_slice().to_vec())
    }
}

/// `(a1, a2)` of the no-prediction error bound at `ε = λ = 1`.
pub(crate) fn no_predictor_constants(r_bound: f64, l1: f64, l2: f64, r: f64) -> (f64, f64) {
    let eps = 1.0;
    let lambda = 1.0;
    let a1 = r_bound * r * l1 * (1.0 + lambda) * ((2.0 + eps) * l1 * r / 2.0).exp();
    let tail = (eps / (2.0 + eps)).sqrt() * (((2.0 + eps) * l1 * r).exp() - 1.0).sqrt() / eps;
    let a2 = r_bound * r * l2 * (1.0 + 1.0 / lambda) * (tail + 1.0);
    (a1, a2)
}

/// `p(x, u) = k(x)`, `g(x, u) = ∇k(x) f(x, u(-r))`.
///
/// Error constants need the split growth `|f(x,u)| ≤ L1|x| + L2|u|`; without it
/// they are left unset. `G = R·max(1 + L1, L2)`.
pub fn no_predictor_scheme(model: &SystemModel, feedback: &FeedbackLaw, r: f64) -> Result<PredictorScheme> {
    if feedback.state_dim() != model.state_dim() || feedback.input_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "feedback",
            expected: model.state_dim(),
            got: feedback.state_dim(),
        });
    }
    let split = model.hypotheses().split_growth;
    let mut scheme = PredictorScheme::new(
        "no-predictor",
        SchemeKind::None,
        model.input_dim(),
        NoPredictor {
            model: model.clone(),
            feedback: feedback.clone(),
        },
    );
    if let Some((l1, l2)) = split {
        let (a1, a2) = no_predictor_constants(feedback.bound(), l1, l2, r);
        let big_r = feedback.bound();
        scheme = scheme.with_constants(a1, a2).with_growth(big_r * (1.0 + l1).max(l2));
    }
    Ok(scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn setup() -> (SystemModel, FeedbackLaw) {
        let model = SystemModel::new("sin", 1, 1, |x, u, o| o[0] = x[0].sin() + u[0])
            .globally_lipschitz(1.0)
            .with_split_growth(1.0, 1.0);
        (model, FeedbackLaw::linear(DMatrix::from_element(1, 1, -4.0)))
    }

    #[test]
    fn scalar_example() {
        let (model, k) = setup();
        let s = no_predictor_scheme(&model, &k, 0.1).unwrap();
        let u = HistorySegment::from_fn(0.1, 10, 1, |t, o| o[0] = 1.0 + t).unwrap();
        assert_eq!(s.p(&[0.7], &u).unwrap(), vec![-2.8]);
        let g = s.g(&[0.7], &u).unwrap()[0];
        assert!((g - -4.0 * (0.7f64.sin() + 0.9)).abs() < 1e-14);
        let z = HistorySegment::zeros(0.1, 10, 1).unwrap();
        assert_eq!(s.p_and_g(&[0.0], &z).unwrap(), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn constants_match_unit_parameter_bound() {
        let (a1, a2) = no_predictor_constants(4.0, 1.0, 1.0, 0.1);
        let e = (1.5f64 * 0.1).exp();
        assert!((a1 - 4.0 * 0.1 * 2.0 * e).abs() < 1e-14);
        let bracket = (1.0f64 / 3.0).sqrt() * ((0.3f64).exp() - 1.0).sqrt() + 1.0;
        assert!((a2 - 4.0 * 0.1 * 2.0 * bracket).abs() < 1e-14);
    }
}
