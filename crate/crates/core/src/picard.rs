//! Successive approximations for globally Lipschitz systems.
//!
//! A Picard iterate lives on the same uniform grid as the input it is driven
//! by; the integral in `(Px)(t) = x(0) + ∫₀ᵗ f(x(τ), u(τ)) dτ` is a composite
//! trapezoid. [`q_map`] lifts a state to the constant path, applies `l`
//! iterations and reads the terminal value; [`chained_map`] composes `q` such
//! maps over consecutive subintervals of `[0, r]`.

use log::warn;

use crate::dynamics::{norm, SampledSignal, Signal, SystemModel, GROWTH_FACTOR};
use crate::error::{Error, Result};

/// Minimum number of grid intervals per subinterval `[0, T]`.
pub const DEFAULT_MIN_NODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// `l`, Picard iterations per subinterval.
    pub iterations: usize,
    /// `q`, number of subintervals of the horizon.
    pub subintervals: usize,
    /// `r`, prediction horizon.
    pub horizon: f64,
    /// Global Lipschitz constant `L` of the field.
    pub lipschitz: f64,
    pub min_nodes: usize,
}

impl PicardConfig {
    pub fn new(iterations: usize, subintervals: usize, horizon: f64, lipschitz: f64) -> Result<Self> {
        if iterations == 0 || subintervals == 0 {
            return Err(Error::Config(format!(
                "iteration count l = {iterations} and subinterval count q = {subintervals} must be positive"
            )));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be non-negative, got {horizon}")));
        }
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::Config(format!("Lipschitz constant must be non-negative, got {lipschitz}")));
        }
        Ok(Self {
            iterations,
            subintervals,
            horizon,
            lipschitz,
            min_nodes: DEFAULT_MIN_NODES,
        })
    }

    /// Config for a model declaring its Lipschitz constant.
    pub fn for_model(model: &SystemModel, iterations: usize, subintervals: usize, horizon: f64) -> Result<Self> {
        Self::new(iterations, subintervals, horizon, model.lipschitz_constant()?)
    }

    pub fn with_min_nodes(mut self, min_nodes: usize) -> Self {
        self.min_nodes = min_nodes.max(1);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations.max(1);
        self
    }

    /// `T = r / q`.
    pub fn subinterval(&self) -> f64 {
        self.horizon / self.subintervals as f64
    }

    /// `L T`.
    pub fn contraction(&self) -> f64 {
        self.lipschitz * self.subinterval()
    }

    /// `L T`, or an error when the contraction requirement `L T < 1` fails.
    pub fn require_contraction(&self) -> Result<f64> {
        let lt = self.contraction();
        if lt < 1.0 {
            Ok(lt)
        } else {
            Err(Error::ContractionViolated { lt })
        }
    }

    /// `(LT)^{l+1} / (1 - LT)`.
    pub fn geometric_factor(&self) -> Result<f64> {
        let lt = self.require_contraction()?;
        Ok(lt.powi(self.iterations as i32 + 1) / (1.0 - lt))
    }
}

fn same_grid(a: &SampledSignal, b: &SampledSignal) -> bool {
    a.nodes() == b.nodes()
        && (a.step() - b.step()).abs() <= 1e-12 * a.step()
        && (a.start() - b.start()).abs() <= 1e-12 * (1.0 + a.start().abs())
}

/// `(P x)(t) = x(0) + ∫₀ᵗ f(x(τ), u(τ)) dτ` on the common grid of `x_path` and `u`.
pub fn picard_step(model: &SystemModel, x_path: &SampledSignal, u: &SampledSignal) -> Result<SampledSignal> {
    if !same_grid(x_path, u) {
        return Err(Error::GridMismatch(format!(
            "path grid ({} nodes, step {}) differs from input grid ({} nodes, step {})",
            x_path.nodes(),
            x_path.step(),
            u.nodes(),
            u.step()
        )));
    }
    if x_path.dim() != model.state_dim() || u.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "Picard path",
            expected: model.state_dim(),
            got: x_path.dim(),
        });
    }
    let n = model.state_dim();
    let h = u.step();
    let mut out = Vec::with_capacity(x_path.raw().len());
    out.extend_from_slice(x_path.node(0));
    let mut f_prev = vec![0.0; n];
    let mut f_next = vec![0.0; n];
    model.field_into(x_path.node(0), u.node(0), &mut f_prev);
    for j in 1..u.nodes() {
        model.field_into(x_path.node(j), u.node(j), &mut f_next);
        let base = (j - 1) * n;
        for i in 0..n {
            let v = out[base + i] + 0.5 * h * (f_prev[i] + f_next[i]);
            out.push(v);
        }
        std::mem::swap(&mut f_prev, &mut f_next);
    }
    SampledSignal::new(x_path.start(), h, n, out)
}

/// `l` Picard iterations started from the constant path at `x`; returns the full path.
pub fn picard_iterates(model: &SystemModel, x: &[f64], u: &SampledSignal, l: usize) -> Result<SampledSignal> {
    model.check_state(x)?;
    let mut path = SampledSignal::from_fn(u.start(), u.step(), u.intervals(), x.len(), |_, o| o.copy_from_slice(x))?;
    for _ in 0..l {
        path = picard_step(model, &path, u)?;
    }
    Ok(path)
}

/// Terminal value of `l` iterations from the constant path, on flat buffers.
fn iterate_terminal(model: &SystemModel, x: &[f64], u: &SampledSignal, l: usize) -> Vec<f64> {
    let n = x.len();
    let nodes = u.nodes();
    let h = u.step();
    let mut path: Vec<f64> = x.iter().copied().cycle().take(n * nodes).collect();
    let mut next = vec![0.0; n * nodes];
    let mut f_prev = vec![0.0; n];
    let mut f_next = vec![0.0; n];
    for _ in 0..l {
        next[..n].copy_from_slice(x);
        model.field_into(&path[..n], u.node(0), &mut f_prev);
        for j in 1..nodes {
            model.field_into(&path[j * n..(j + 1) * n], u.node(j), &mut f_next);
            for i in 0..n {
                next[j * n + i] = next[(j - 1) * n + i] + 0.5 * h * (f_prev[i] + f_next[i]);
            }
            std::mem::swap(&mut f_prev, &mut f_next);
        }
        std::mem::swap(&mut path, &mut next);
    }
    path[(nodes - 1) * n..].to_vec()
}

fn refine_to(u: &SampledSignal, min_intervals: usize) -> SampledSignal {
    let have = u.intervals().max(1);
    if have >= min_intervals {
        u.clone()
    } else {
        u.refined(min_intervals.div_ceil(have))
    }
}

fn warn_if_not_contractive(cfg: &PicardConfig) {
    let lt = cfg.contraction();
    if lt >= 1.0 {
        warn!("Picard map evaluated with L*T = {lt} >= 1; the error bounds do not apply");
    }
}

/// `Q^l_{T,u} x = C_T P^l_{T,u} G_T x` for an input sampled on `[0, T]`.
pub fn q_map(model: &SystemModel, cfg: &PicardConfig, x: &[f64], u: &SampledSignal) -> Result<Vec<f64>> {
    model.check_state(x)?;
    if u.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input",
            expected: model.input_dim(),
            got: u.dim(),
        });
    }
    warn_if_not_contractive(cfg);
    let u = refine_to(u, cfg.min_nodes);
    Ok(iterate_terminal(model, x, &u, cfg.iterations))
}

/// Splits an input on `[0, r]` into the `q` subinputs `u_i(s) = u(s + (i-1)T)`.
pub fn split_input(cfg: &PicardConfig, u: &SampledSignal) -> Result<Vec<SampledSignal>> {
    let r = cfg.horizon;
    let tol = 1e-9 * (1.0 + r);
    if u.start().abs() > tol || (u.end() - r).abs() > tol {
        return Err(Error::GridMismatch(format!(
            "chained map needs an input on [0, {r}], got [{}, {}]",
            u.start(),
            u.end()
        )));
    }
    let q = cfg.subintervals;
    let mut u = if u.intervals() % q == 0 { u.clone() } else { u.refined(q) };
    let per = u.intervals() / q;
    if per < cfg.min_nodes {
        u = u.refined(cfg.min_nodes.div_ceil(per));
    }
    let per = u.intervals() / q;
    (0..q).map(|i| u.window(i * per, per)).collect()
}

/// `P^u_{l,q} x = Q^l_{T,u_q} ∘ … ∘ Q^l_{T,u_1} x`.
pub fn chained_map(model: &SystemModel, cfg: &PicardConfig, x: &[f64], u: &SampledSignal) -> Result<Vec<f64>> {
    model.check_state(x)?;
    if u.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input",
            expected: model.input_dim(),
            got: u.dim(),
        });
    }
    warn_if_not_contractive(cfg);
    let mut state = x.to_vec();
    for piece in split_input(cfg, u)? {
        state = iterate_terminal(model, &state, &piece, cfg.iterations);
    }
    Ok(state)
}

/// `(LT)^{l+1}/(1-LT) (|x| + sup|u|)`, the `y = x` case of the one-interval bound.
pub fn fact3_bound(cfg: &PicardConfig, x_norm: f64, u_sup: f64) -> Result<f64> {
    fact3_bound_general(cfg, x_norm, u_sup, 0.0)
}

/// One-interval bound on `|Q^l x - φ(T, y; u)|` with `distance = |x - y|`.
pub fn fact3_bound_general(cfg: &PicardConfig, x_norm: f64, u_sup: f64, distance: f64) -> Result<f64> {
    let lt = cfg.require_contraction()?;
    Ok(cfg.geometric_factor()? * (x_norm + u_sup) + lt.exp() * distance)
}

/// Constant `K(q)` of the multi-interval bound, in its l-independent closed form:
/// `K = (b + e^{LT})^{q-1} + (e^{pLr} + 1)((b + e^{LT})^{q-1} - 1)/((b + e^{LT}) - 1)`
/// with `b = (LT)²/(1-LT)` and `p = (1+√2)/2`; `K = 1` for `q = 1`.
pub fn compute_k(cfg: &PicardConfig) -> Result<f64> {
    let lt = cfg.require_contraction()?;
    let q = cfg.subintervals;
    if q == 1 {
        return Ok(1.0);
    }
    let b = lt * lt / (1.0 - lt);
    let c = b + lt.exp();
    let lr = cfg.lipschitz * cfg.horizon;
    let power = c.powi(q as i32 - 1);
    let geometric = if (c - 1.0).abs() < 1e-12 {
        (q - 1) as f64
    } else {
        (power - 1.0) / (c - 1.0)
    };
    Ok(power + ((GROWTH_FACTOR * lr).exp() + 1.0) * geometric)
}

/// Sharper, l-dependent `K` obtained by running the per-interval error recursion
/// `k₁ = 1`, `k_{i+1} = (a + e^{LT}) k_i + e^{i p L T} + 1` with `a = (LT)^{l+1}/(1-LT)`.
///
/// For `q = 2` this is `1 + a + e^{LT} + e^{pLT}`, the bracket of the scalar
/// two-interval certificates.
pub fn sharp_k(cfg: &PicardConfig) -> Result<f64> {
    let lt = cfg.require_contraction()?;
    let a = cfg.geometric_factor()?;
    let mut k = 1.0;
    for i in 1..cfg.subintervals {
        k = (a + lt.exp()) * k + (i as f64 * GROWTH_FACTOR * lt).exp() + 1.0;
    }
    Ok(k)
}

/// `K (LT)^{l+1}/(1-LT) (|x| + sup|u|)`.
pub fn prop32_bound(cfg: &PicardConfig, x_norm: f64, u_sup: f64) -> Result<f64> {
    Ok(compute_k(cfg)? * cfg.geometric_factor()? * (x_norm + u_sup))
}

/// Measured `|P^u_{l,q} x - φ(r, x; u)|` against a supplied oracle value.
pub fn chained_error(model: &SystemModel, cfg: &PicardConfig, x: &[f64], u: &SampledSignal, oracle: &[f64]) -> Result<f64> {
    let approx = chained_map(model, cfg, x, u)?;
    Ok(crate::dynamics::distance(&approx, oracle))
}

/// `sup|u|` over the grid of a sampled input.
pub fn input_sup(u: &SampledSignal) -> f64 {
    u.node_iter().map(norm).fold(0.0, f64::max)
}

/// Convenience: sample an arbitrary signal on `[0, r]` with `intervals` intervals.
pub fn sample_on_horizon(u: &dyn Signal, r: f64, intervals: usize) -> Result<SampledSignal> {
    SampledSignal::sample(u, 0.0, r / intervals as f64, intervals)
}
