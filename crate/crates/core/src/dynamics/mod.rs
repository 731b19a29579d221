//! System models, input histories, the shift operator and the numerical
//! solution map `φ(t, x0; u)` of the undelayed system `ẋ = f(x, u)`.
//!
//! Every other module treats [`solve_phi`] as ground truth: it is a classical
//! fixed-step RK4 integrator, with inputs read between grid nodes through the
//! input signal's own interpolation rule.

mod model;
mod signal;

pub use model::{induced_norm, FieldFn, Hypotheses, SystemModel, GROWTH_FACTOR, SPOT_CHECK_PAIRS};
pub use signal::{shift_input, FnSignal, HistorySegment, SampledSignal, Shifted, Signal};

use crate::error::{Error, Result};

/// States or controller values beyond this norm abort a simulation.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Number of steps of size `h` covering `[0, span]`, or an error when `h` does not divide `span`.
pub fn steps_for(span: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    if span < 0.0 {
        return Err(Error::Config(format!("negative time span {span}")));
    }
    let steps = (span / h).round();
    if (steps * h - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::Config(format!("step {h} does not divide {span}")));
    }
    Ok(steps as usize)
}

/// Samples of a run on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    inputs: Option<Vec<Vec<f64>>>,
    controls: Option<Vec<Vec<f64>>>,
    initial_size: f64,
}

impl Trajectory {
    /// `initial_size` is the `|x0| + ‖w0‖_r` scale used by decay envelopes.
    pub fn new(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        inputs: Option<Vec<Vec<f64>>>,
        controls: Option<Vec<Vec<f64>>>,
        initial_size: f64,
    ) -> Result<Self> {
        let len = times.len();
        let mismatched = states.len() != len
            || inputs.as_ref().is_some_and(|v| v.len() != len)
            || controls.as_ref().is_some_and(|v| v.len() != len);
        if mismatched {
            return Err(Error::GridMismatch("trajectory sample arrays differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("trajectory times must increase strictly".into()));
        }
        Ok(Self {
            times,
            states,
            inputs,
            controls,
            initial_size,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn inputs(&self) -> Option<&[Vec<f64>]> {
        self.inputs.as_deref()
    }

    pub fn controls(&self) -> Option<&[Vec<f64>]> {
        self.controls.as_deref()
    }

    pub fn initial_size(&self) -> f64 {
        self.initial_size
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// `|x(t_i)| + |w(t_i)|`, or `|x(t_i)|` when no controller state was recorded.
    pub fn norms(&self) -> Vec<f64> {
        match &self.controls {
            Some(w) => self.states.iter().zip(w).map(|(x, w)| norm(x) + norm(w)).collect(),
            None => self.states.iter().map(|x| norm(x)).collect(),
        }
    }
}

fn axpy(out: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

/// RK4 solution of `ẋ = f(x, u(t))` on `[0, t_final]` with step `h`.
pub fn solve_phi(
    model: &SystemModel,
    x0: &[f64],
    u: &dyn Signal,
    t_final: f64,
    h: f64,
) -> Result<Trajectory> {
    model.check_state(x0)?;
    if u.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input signal",
            expected: model.input_dim(),
            got: u.dim(),
        });
    }
    let steps = steps_for(t_final, h)?;
    if !u.covers(0.0, t_final) {
        return Err(Error::Domain(format!(
            "input defined on {:?} does not cover [0, {t_final}]",
            u.domain()
        )));
    }
    let n = model.state_dim();
    let m = model.input_dim();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let (mut u0, mut umid, mut u1) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    u.eval(0.0, &mut u0);
    times.push(0.0);
    states.push(x.clone());
    inputs.push(u0.clone());
    for i in 0..steps {
        let t = i as f64 * h;
        let t_next = if i + 1 == steps { t_final } else { (i + 1) as f64 * h };
        u.eval(t, &mut u0);
        u.eval(t + 0.5 * h, &mut umid);
        u.eval(t_next, &mut u1);
        model.field_into(&x, &u0, &mut k1);
        axpy(&mut tmp, &x, 0.5 * h, &k1);
        model.field_into(&tmp, &umid, &mut k2);
        axpy(&mut tmp, &x, 0.5 * h, &k2);
        model.field_into(&tmp, &umid, &mut k3);
        axpy(&mut tmp, &x, h, &k3);
        model.field_into(&tmp, &u1, &mut k4);
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let size = norm(&x);
        if !size.is_finite() || size > DIVERGENCE_CUTOFF {
            return Err(Error::Divergence { time: t_next });
        }
        times.push(t_next);
        states.push(x.clone());
        inputs.push(u1.clone());
    }
    Trajectory::new(times, states, Some(inputs), None, norm(x0))
}

/// Terminal value `φ(t_final, x0; u)`.
pub fn phi(model: &SystemModel, x0: &[f64], u: &dyn Signal, t_final: f64, h: f64) -> Result<Vec<f64>> {
    Ok(solve_phi(model, x0, u, t_final, h)?.final_state().to_vec())
}

/// `exp(L t)(|x0| + u_sup)` with `L` from [`SystemModel::growth_rate`].
pub fn growth_bound_2_5(model: &SystemModel, x0_norm: f64, u_sup: f64, t: f64) -> Result<f64> {
    let rate = model.growth_rate()?;
    Ok((rate * t).exp() * (x0_norm + u_sup))
}

/// `exp((1+√2)/2 · L t)(|x0| + u_sup)` for a field with linear growth constant `L`.
pub fn lipschitz_growth_envelope(l: f64, x0_norm: f64, u_sup: f64, t: f64) -> f64 {
    (GROWTH_FACTOR * l * t).exp() * (x0_norm + u_sup)
}

/// `|φ(t+τ, x0; u) − φ(t, φ(τ, x0; u); δ_τ u)|`.
pub fn check_semigroup(
    model: &SystemModel,
    x0: &[f64],
    u: &dyn Signal,
    t: f64,
    tau: f64,
    h: f64,
) -> Result<f64> {
    let direct = phi(model, x0, u, t + tau, h)?;
    let mid = phi(model, x0, u, tau, h)?;
    let shifted = Shifted::new(u, tau);
    let chained = phi(model, &mid, &shifted, t, h)?;
    Ok(distance(&direct, &chained))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_model() -> SystemModel {
        SystemModel::new("sin", 1, 1, |x, u, out| out[0] = x[0].sin() + u[0]).globally_lipschitz(1.0)
    }

    fn integrator() -> SystemModel {
        SystemModel::new("int", 1, 1, |_, u, out| out[0] = u[0]).globally_lipschitz(1.0)
    }

    #[test]
    fn integrator_of_unit_input() {
        let one = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 1.0);
        let x = phi(&integrator(), &[0.0], &one, 1.0, 0.01).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_stays_put() {
        let zero = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 0.0);
        let traj = solve_phi(&sin_model(), &[0.0], &zero, 2.0, 0.01).unwrap();
        assert!(traj.states().iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn rk4_richardson_self_convergence() {
        // φ at h, h/2, h/4: successive differences shrink by ≈ 2^4
        let zero = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 0.0);
        let m = sin_model();
        let h = 0.05;
        let a = phi(&m, &[1.0], &zero, 0.5, h).unwrap()[0];
        let b = phi(&m, &[1.0], &zero, 0.5, h / 2.0).unwrap()[0];
        let c = phi(&m, &[1.0], &zero, 0.5, h / 4.0).unwrap()[0];
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
        let c_const = (a - b).abs() / h.powi(4);
        assert!(c_const < 1e-2);
    }

    #[test]
    fn divergence_reports_blow_up_time() {
        let m = SystemModel::new("quad", 1, 1, |x, _, o| o[0] = x[0] * x[0]);
        let zero = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 0.0);
        match solve_phi(&m, &[1.0], &zero, 2.0, 1e-3) {
            Err(Error::Divergence { time }) => assert!(time > 0.9 && time < 1.01, "{time}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn step_must_divide_horizon() {
        let zero = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 0.0);
        assert!(matches!(solve_phi(&sin_model(), &[1.0], &zero, 1.0, 0.3), Err(Error::Config(_))));
    }

    #[test]
    fn uncovered_input_is_rejected() {
        let u = SampledSignal::from_fn(0.0, 0.1, 5, 1, |_, o| o[0] = 1.0).unwrap();
        assert!(matches!(solve_phi(&sin_model(), &[1.0], &u, 1.0, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn growth_bound_cases() {
        let m = sin_model().with_split_growth(1.0, 1.0);
        assert_eq!(growth_bound_2_5(&m, 0.0, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(growth_bound_2_5(&m, 1.5, 0.5, 0.0).unwrap(), 2.0);
        let half = FnSignal::new(1, |_, o: &mut [f64]| o[0] = 0.5);
        let traj = solve_phi(&m, &[1.0], &half, 1.0, 1e-3).unwrap();
        for (t, x) in traj.times().iter().zip(traj.states()) {
            assert!(norm(x) <= growth_bound_2_5(&m, 1.0, 0.5, *t).unwrap());
        }
        let bare = SystemModel::new("b", 1, 1, |_, _, o| o[0] = 0.0);
        assert!(matches!(growth_bound_2_5(&bare, 1.0, 0.0, 1.0), Err(Error::MissingHypothesis(_))));
    }

    #[test]
    fn semigroup_degenerate_splits() {
        let u = FnSignal::new(1, |t, o: &mut [f64]| o[0] = t.cos());
        let m = sin_model();
        assert!(check_semigroup(&m, &[1.0], &u, 0.3, 0.0, 1e-3).unwrap() < 1e-15);
        assert!(check_semigroup(&m, &[1.0], &u, 0.0, 0.3, 1e-3).unwrap() < 1e-15);
        assert!(check_semigroup(&m, &[1.0], &u, 0.2, 0.2, 1e-4).unwrap() < 1e-8);
    }

    #[test]
    fn trajectory_rejects_ragged_arrays() {
        assert!(Trajectory::new(vec![0.0, 1.0], vec![vec![0.0]], None, None, 0.0).is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]], None, None, 0.0).is_err());
    }
}
