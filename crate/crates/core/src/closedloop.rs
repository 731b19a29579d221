//! Closed-loop simulation of `ẋ = f(x, u(t - r))` under dynamic delay feedback.
//!
//! The controller state `w` obeys `ẇ = g(x, T_r(t)u) − μ(w − p(x, T_r(t)u))`
//! with `u = Pr_U(w)`. Integration is RK4 by the method of steps on an
//! `h`-grid that divides `r`: the full input history is retained, stages at
//! `t + h/2` read it by linear interpolation, and the newest history node of a
//! stage is the projection of that stage's `w`.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, info};

use crate::dynamics::{norm, steps_for, HistorySegment, SystemModel, Trajectory, DIVERGENCE_CUTOFF};
use crate::error::{Error, Result};
use crate::picard::PicardConfig;
use crate::predictors::{corollary36_scheme, FeedbackLaw, InputSet, PredictorScheme};

/// Default fraction of the horizon discarded before decay fitting.
pub const DEFAULT_SKIP: f64 = 0.3;

/// Minimum number of samples in the decay-fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Slack factor applied by [`verify_envelope`].
pub const ENVELOPE_SLACK: f64 = 1.05;

/// A controller `ẇ = F(x, w, T_r(t)u)` with actuation `u = Pr_U(w)`.
pub trait DynamicLaw {
    fn input_set(&self) -> &InputSet;

    fn input_dim(&self) -> usize;

    /// `ẇ` at the current stage; `history` is `T_r(t)u` on `[-r, 0]`.
    fn rate(&self, x: &[f64], w: &[f64], history: &HistorySegment) -> Result<Vec<f64>>;

    /// Called once after a run, e.g. to report diagnostics.
    fn finish(&self) {}
}

/// `ẇ = g − μ(w − Pr_U p)` for a predictor scheme.
pub struct PredictorFeedback<'a> {
    scheme: &'a PredictorScheme,
    input_set: InputSet,
    mu: f64,
    projected: AtomicUsize,
    evaluations: AtomicUsize,
}

impl<'a> PredictorFeedback<'a> {
    pub fn new(scheme: &'a PredictorScheme, input_set: InputSet, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Config(format!("μ must be positive, got {mu}")));
        }
        Ok(Self {
            scheme,
            input_set,
            mu,
            projected: AtomicUsize::new(0),
            evaluations: AtomicUsize::new(0),
        })
    }

    /// Stages at which `p` left `U` and was projected back.
    pub fn projection_events(&self) -> usize {
        self.projected.load(Ordering::Relaxed)
    }
}

impl DynamicLaw for PredictorFeedback<'_> {
    fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    fn input_dim(&self) -> usize {
        self.scheme.input_dim()
    }

    fn rate(&self, x: &[f64], w: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        let (mut p, g) = self.scheme.p_and_g(x, history)?;
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        if !self.input_set.contains(&p) {
            p = self.input_set.project(&p);
            self.projected.fetch_add(1, Ordering::Relaxed);
        }
        Ok(g.iter()
            .zip(w.iter().zip(&p))
            .map(|(gi, (wi, pi))| gi - self.mu * (wi - pi))
            .collect())
    }

    fn finish(&self) {
        let projected = self.projection_events();
        if projected > 0 {
            info!(
                "{}: predictor output projected onto U at {projected} of {} stages",
                self.scheme.name(),
                self.evaluations.load(Ordering::Relaxed)
            );
        }
    }
}

/// Stored `u` samples on the `h`-grid, from `t = -r` onwards.
struct InputBuffer {
    m: usize,
    lag: usize,
    data: Vec<f64>,
}

impl InputBuffer {
    fn node(&self, k: usize) -> &[f64] {
        &self.data[k * self.m..(k + 1) * self.m]
    }

    /// `T_r(t)u` at `t = (i + half/2) h`, newest node `current`.
    fn window(&self, i: usize, half: bool, current: &[f64], r: f64) -> Result<HistorySegment> {
        let (m, lag) = (self.m, self.lag);
        let mut out = Vec::with_capacity((lag + 1) * m);
        for j in 0..lag {
            if half {
                let (a, b) = (self.node(i + j), self.node(i + j + 1));
                out.extend(a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)));
            } else {
                out.extend_from_slice(self.node(i + j));
            }
        }
        out.extend_from_slice(current);
        HistorySegment::from_flat(r, m, out)
    }
}

fn check_divergence(x: &[f64], w: &[f64], t: f64) -> Result<()> {
    let size = norm(x) + norm(w);
    if !size.is_finite() || size > DIVERGENCE_CUTOFF {
        debug!("closed loop diverged at t = {t}");
        return Err(Error::Divergence { time: t });
    }
    Ok(())
}

/// Integrates the plant coupled with an arbitrary [`DynamicLaw`].
pub fn simulate_dynamic_law(
    model: &SystemModel,
    law: &dyn DynamicLaw,
    r: f64,
    x0: &[f64],
    w0: &HistorySegment,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    model.check_state(x0)?;
    let m = model.input_dim();
    if law.input_dim() != m || w0.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "controller state",
            expected: m,
            got: w0.dim(),
        });
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("delay must be positive, got {r}")));
    }
    if (w0.r() - r).abs() > 1e-9 * (1.0 + r) {
        return Err(Error::GridMismatch(format!(
            "initial controller history covers [-{}, 0], expected [-{r}, 0]",
            w0.r()
        )));
    }
    let lag = steps_for(r, h)?;
    let steps = steps_for(t_end, h)?;
    let set = law.input_set();
    let n = model.state_dim();

    let w_init = w0.resampled(lag)?;
    let mut buffer = InputBuffer {
        m,
        lag,
        data: Vec::with_capacity((lag + steps + 1) * m),
    };
    for j in 0..=lag {
        buffer.data.extend(set.project(w_init.node(j)));
    }

    let mut x = x0.to_vec();
    let mut w = w0.newest().to_vec();
    let initial_size = norm(x0) + w0.sup_norm();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    inputs.push(set.project(&w));
    controls.push(w.clone());

    let mut fx = vec![0.0; n];
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; m];
    // (dx, dw) for the four stages
    let mut kx = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut kw = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];

    for i in 0..steps {
        let t = i as f64 * h;
        for stage in 0..4 {
            let (scale, half, base) = match stage {
                0 => (0.0, false, i),
                1 | 2 => (0.5 * h, true, i),
                _ => (h, false, i + 1),
            };
            for j in 0..n {
                xs[j] = if stage == 0 { x[j] } else { x[j] + scale * kx[stage - 1][j] };
            }
            for j in 0..m {
                ws[j] = if stage == 0 { w[j] } else { w[j] + scale * kw[stage - 1][j] };
            }
            let current = set.project(&ws);
            let history = buffer.window(base, half, &current, r)?;
            model.field_into(&xs, history.oldest(), &mut fx);
            kx[stage].copy_from_slice(&fx);
            let dw = law.rate(&xs, &ws, &history)?;
            kw[stage].copy_from_slice(&dw);
        }
        for j in 0..n {
            x[j] += h / 6.0 * (kx[0][j] + 2.0 * kx[1][j] + 2.0 * kx[2][j] + kx[3][j]);
        }
        for j in 0..m {
            w[j] += h / 6.0 * (kw[0][j] + 2.0 * kw[1][j] + 2.0 * kw[2][j] + kw[3][j]);
        }
        let t_next = if i + 1 == steps { t_end } else { t + h };
        check_divergence(&x, &w, t_next)?;
        let u = set.project(&w);
        buffer.data.extend_from_slice(&u);
        times.push(t_next);
        states.push(x.clone());
        inputs.push(u);
        controls.push(w.clone());
    }
    law.finish();
    Trajectory::new(times, states, Some(inputs), Some(controls), initial_size)
}

/// Plant plus `u = Pr_U(w)`, `ẇ = g − μ(w − p)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_theorem22(
    model: &SystemModel,
    input_set: &InputSet,
    scheme: &PredictorScheme,
    mu: f64,
    r: f64,
    x0: &[f64],
    w0: &HistorySegment,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let law = PredictorFeedback::new(scheme, input_set.clone(), mu)?;
    simulate_dynamic_law(model, &law, r, x0, w0, t_end, h)
}

/// Plant plus `u̇ = k'f(Φ_{l,q}, u) − μ(u − k'Φ_{l,q})` on the full input space.
#[allow(clippy::too_many_arguments)]
pub fn simulate_corollary36(
    model: &SystemModel,
    feedback: &FeedbackLaw,
    cfg: PicardConfig,
    mu: f64,
    r: f64,
    x0: &[f64],
    u0: &HistorySegment,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if (cfg.horizon - r).abs() > 1e-12 * (1.0 + r) {
        return Err(Error::Config(format!(
            "predictor horizon {} differs from the delay {r}",
            cfg.horizon
        )));
    }
    let scheme = corollary36_scheme(model, feedback, cfg)?;
    simulate_theorem22(model, &InputSet::Full, &scheme, mu, r, x0, u0, t_end, h)
}

/// Result of fitting `|x(t)| + |w(t)| ≈ M̂ e^{-ω̂ t}(|x0| + ‖w0‖_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFit {
    Rate { m: f64, omega: f64 },
    /// The norm vanished on the fit window (or the run started at the origin).
    ConvergedToZero,
}

impl DecayFit {
    pub fn omega(&self) -> f64 {
        match self {
            Self::Rate { omega, .. } => *omega,
            Self::ConvergedToZero => f64::INFINITY,
        }
    }

    pub fn m(&self) -> f64 {
        match self {
            Self::Rate { m, .. } => *m,
            Self::ConvergedToZero => 0.0,
        }
    }
}

/// Least-squares fit of `ln(|x| + |w|)` after skipping a transient fraction.
///
/// `ω̂` is minus the slope on the window; `M̂` is the smallest constant with
/// `|x(t)| + |w(t)| ≤ M̂ e^{-ω̂ t} s0` on the skipped transient, so the window
/// itself is left to validate the envelope.
pub fn estimate_decay(traj: &Trajectory, skip: f64) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&skip) {
        return Err(Error::Fit(format!("skip fraction must lie in [0, 1), got {skip}")));
    }
    let times = traj.times();
    let norms = traj.norms();
    let s0 = traj.initial_size();
    if times.is_empty() {
        return Err(Error::Fit("empty trajectory".into()));
    }
    let t_skip = times[0] + skip * (times[times.len() - 1] - times[0]);
    let first = times.partition_point(|t| *t < t_skip);
    let window = &norms[first..];
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "fit window holds {} samples, need at least {MIN_FIT_SAMPLES}",
            window.len()
        )));
    }
    if s0 == 0.0 || window.iter().any(|v| *v <= f64::MIN_POSITIVE) {
        return Ok(DecayFit::ConvergedToZero);
    }
    let ts = &times[first..];
    let count = window.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / count;
    let y: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let y_mean = y.iter().sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&y) {
        sxy += (t - t_mean) * (y - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let omega = -sxy / sxx;
    let m = times[..=first.min(times.len() - 1)]
        .iter()
        .zip(&norms)
        .map(|(t, v)| v * (omega * t).exp() / s0)
        .fold(0.0, f64::max);
    Ok(DecayFit::Rate { m, omega })
}

/// `|x(t)| + |w(t)| ≤ 1.05 M̂ e^{-ω̂t}(|x0| + ‖w0‖_r)` at every recorded time, with `ω̂ > 0`.
pub fn verify_envelope(traj: &Trajectory, fit: &DecayFit) -> bool {
    let norms = traj.norms();
    match fit {
        DecayFit::ConvergedToZero => {
            norms.iter().all(|v| v.is_finite()) && norms.last().is_none_or(|v| *v <= f64::MIN_POSITIVE)
        }
        DecayFit::Rate { m, omega } => {
            if !(*omega > 0.0) {
                return false;
            }
            let s0 = traj.initial_size();
            traj.times()
                .iter()
                .zip(&norms)
                .all(|(t, v)| *v <= ENVELOPE_SLACK * m * (-omega * t).exp() * s0)
        }
    }
}
