//! Uniformly sampled signals, input histories and the shift operator.

use crate::error::{Error, Result};

/// Relative slack (in grid steps) tolerated when a lookup lands just outside a grid.
const EDGE_SLACK: f64 = 1e-9;

/// Anything that can be evaluated as a vector-valued function of time.
pub trait Signal {
    fn dim(&self) -> usize;

    /// Closed interval on which the signal is defined.
    fn domain(&self) -> (f64, f64);

    fn eval(&self, t: f64, out: &mut [f64]);

    fn value(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(t, &mut out);
        out
    }

    fn covers(&self, a: f64, b: f64) -> bool {
        let (lo, hi) = self.domain();
        let slack = EDGE_SLACK * (1.0 + a.abs().max(b.abs()));
        lo <= a + slack && b <= hi + slack
    }
}

/// Adapter turning a closure `t -> value` into a signal defined on the whole line.
pub struct FnSignal<F> {
    dim: usize,
    func: F,
}

impl<F: Fn(f64, &mut [f64])> FnSignal<F> {
    pub fn new(dim: usize, func: F) -> Self {
        Self { dim, func }
    }
}

impl<F: Fn(f64, &mut [f64])> Signal for FnSignal<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        (self.func)(t, out)
    }
}

/// `(δ_θ s)(t) = s(t + θ)` over any signal, without resampling.
pub struct Shifted<'a> {
    inner: &'a dyn Signal,
    theta: f64,
}

impl<'a> Shifted<'a> {
    pub fn new(inner: &'a dyn Signal, theta: f64) -> Self {
        Self { inner, theta }
    }
}

impl Signal for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn domain(&self) -> (f64, f64) {
        let (a, b) = self.inner.domain();
        (a - self.theta, b - self.theta)
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        self.inner.eval(t + self.theta, out)
    }
}

/// A vector signal sampled on a uniform grid, interpolated piecewise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    start: f64,
    step: f64,
    dim: usize,
    data: Vec<f64>,
}

impl SampledSignal {
    /// `data` holds node values back to back, `dim` entries per node.
    pub fn new(start: f64, step: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::GridMismatch(format!(
                "{} samples cannot be split into nodes of dimension {dim}",
                data.len()
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::GridMismatch(format!("grid step must be positive, got {step}")));
        }
        Ok(Self { start, step, dim, data })
    }

    pub fn from_nodes(start: f64, step: f64, nodes: &[Vec<f64>]) -> Result<Self> {
        let dim = nodes.first().map_or(0, Vec::len);
        if nodes.iter().any(|v| v.len() != dim) {
            return Err(Error::GridMismatch("nodes of unequal dimension".into()));
        }
        Self::new(start, step, dim, nodes.concat())
    }

    /// Samples `f` at `start + i*step` for `i = 0..=intervals`.
    pub fn from_fn(
        start: f64,
        step: f64,
        intervals: usize,
        dim: usize,
        mut f: impl FnMut(f64, &mut [f64]),
    ) -> Result<Self> {
        let mut data = vec![0.0; (intervals + 1) * dim];
        for (i, chunk) in data.chunks_mut(dim.max(1)).enumerate() {
            f(start + i as f64 * step, chunk);
        }
        Self::new(start, step, dim, data)
    }

    pub fn sample(signal: &dyn Signal, start: f64, step: f64, intervals: usize) -> Result<Self> {
        let end = start + step * intervals as f64;
        if !signal.covers(start, end) {
            return Err(Error::Domain(format!(
                "signal defined on {:?} does not cover [{start}, {end}]",
                signal.domain()
            )));
        }
        Self::from_fn(start, step, intervals, signal.dim(), |t, out| signal.eval(t, out))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * self.intervals() as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn intervals(&self) -> usize {
        self.nodes() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_iter(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.dim)
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Maximum Euclidean norm over the nodes; exact for piecewise-linear interpolation.
    pub fn sup_norm(&self) -> f64 {
        self.node_iter().map(super::norm).fold(0.0, f64::max)
    }

    /// Same samples, time axis moved so that the result at `t` equals `self` at `t + theta`.
    pub fn shifted(&self, theta: f64) -> Self {
        Self {
            start: self.start - theta,
            ..self.clone()
        }
    }

    /// Copy of nodes `first..=first + intervals`.
    pub fn window(&self, first: usize, intervals: usize) -> Result<Self> {
        if first + intervals >= self.nodes() {
            return Err(Error::GridMismatch(format!(
                "window {first}..={} outside a grid of {} nodes",
                first + intervals,
                self.nodes()
            )));
        }
        let data = self.data[first * self.dim..(first + intervals + 1) * self.dim].to_vec();
        Ok(Self {
            start: self.time(first),
            step: self.step,
            dim: self.dim,
            data,
        })
    }

    /// Inserts `factor - 1` linearly interpolated nodes into every interval.
    pub fn refined(&self, factor: usize) -> Self {
        if factor <= 1 {
            return self.clone();
        }
        let step = self.step / factor as f64;
        let intervals = self.intervals() * factor;
        let dim = self.dim;
        let mut data = Vec::with_capacity((intervals + 1) * dim);
        for i in 0..self.intervals() {
            let (a, b) = (self.node(i), self.node(i + 1));
            for j in 0..factor {
                let s = j as f64 / factor as f64;
                data.extend(a.iter().zip(b).map(|(ai, bi)| ai + s * (bi - ai)));
            }
        }
        data.extend_from_slice(self.node(self.intervals()));
        Self {
            start: self.start,
            step,
            dim,
            data,
        }
    }

    /// Location of `t` as (interval index, fraction in [0, 1]).
    fn locate(&self, t: f64) -> (usize, f64) {
        let pos = (t - self.start) / self.step;
        let last = self.intervals();
        if last == 0 {
            return (0, 0.0);
        }
        if pos <= 0.0 {
            return (0, 0.0);
        }
        if pos >= last as f64 {
            return (last - 1, 1.0);
        }
        let i = pos.floor() as usize;
        (i, pos - i as f64)
    }
}

impl Signal for SampledSignal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> (f64, f64) {
        (self.start, self.end())
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let (i, s) = self.locate(t);
        if self.intervals() == 0 {
            out.copy_from_slice(self.node(0));
            return;
        }
        let (a, b) = (self.node(i), self.node(i + 1));
        for ((o, ai), bi) in out.iter_mut().zip(a).zip(b) {
            *o = ai + s * (bi - ai);
        }
    }
}

/// Shift operator `(δ_θ u)(t) = u(t + θ)`, restricted to a requested domain `[a, b]`.
pub fn shift_input(signal: &SampledSignal, theta: f64, domain: (f64, f64)) -> Result<SampledSignal> {
    let shifted = signal.shifted(theta);
    if !shifted.covers(domain.0, domain.1) {
        return Err(Error::Domain(format!(
            "shift by {theta} of a signal on [{}, {}] does not cover [{}, {}]",
            signal.start(),
            signal.end(),
            domain.0,
            domain.1
        )));
    }
    Ok(shifted)
}

/// The restriction `T_r(t)u` of a signal to a window of length `r`, indexed by `θ ∈ [-r, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    signal: SampledSignal,
}

impl HistorySegment {
    pub fn new(r: f64, nodes: &[Vec<f64>]) -> Result<Self> {
        let intervals = nodes.len().saturating_sub(1);
        Self::check_horizon(r, intervals)?;
        let signal = SampledSignal::from_nodes(-r, r / intervals as f64, nodes)?;
        Ok(Self { signal })
    }

    pub fn from_flat(r: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        let intervals = (data.len() / dim.max(1)).saturating_sub(1);
        Self::check_horizon(r, intervals)?;
        let signal = SampledSignal::new(-r, r / intervals as f64, dim, data)?;
        Ok(Self { signal })
    }

    pub fn from_fn(r: f64, intervals: usize, dim: usize, f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        Self::check_horizon(r, intervals)?;
        let step = r / intervals as f64;
        let mut signal = SampledSignal::from_fn(-r, step, intervals, dim, f)?;
        // pin the last node to θ = 0 exactly
        signal.start = -step * intervals as f64;
        Ok(Self { signal })
    }

    pub fn constant(r: f64, intervals: usize, value: &[f64]) -> Result<Self> {
        Self::from_fn(r, intervals, value.len(), |_, out| out.copy_from_slice(value))
    }

    pub fn zeros(r: f64, intervals: usize, dim: usize) -> Result<Self> {
        Self::from_fn(r, intervals, dim, |_, out| out.fill(0.0))
    }

    fn check_horizon(r: f64, intervals: usize) -> Result<()> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("history horizon must be positive, got {r}")));
        }
        if intervals == 0 {
            return Err(Error::GridMismatch("history needs at least one interval".into()));
        }
        Ok(())
    }

    pub fn r(&self) -> f64 {
        -self.signal.start
    }

    pub fn intervals(&self) -> usize {
        self.signal.intervals()
    }

    pub fn step(&self) -> f64 {
        self.signal.step
    }

    pub fn dim(&self) -> usize {
        self.signal.dim
    }

    /// Sample `j`, located at `θ = -r + j*h`.
    pub fn node(&self, j: usize) -> &[f64] {
        self.signal.node(j)
    }

    /// `u(0)`.
    pub fn newest(&self) -> &[f64] {
        self.signal.node(self.intervals())
    }

    /// `u(-r)`.
    pub fn oldest(&self) -> &[f64] {
        self.signal.node(0)
    }

    pub fn at(&self, theta: f64) -> Vec<f64> {
        self.signal.value(theta)
    }

    /// `‖u‖_r`.
    pub fn sup_norm(&self) -> f64 {
        self.signal.sup_norm()
    }

    pub fn as_signal(&self) -> &SampledSignal {
        &self.signal
    }

    /// `δ_{-r}u` on `[0, r]`: the value at `s` is `u(s - r)`.
    pub fn advanced(&self) -> SampledSignal {
        self.signal.shifted(-self.r())
    }

    /// Resamples the history onto a grid with `intervals` intervals.
    pub fn resampled(&self, intervals: usize) -> Result<Self> {
        if intervals == self.intervals() {
            return Ok(self.clone());
        }
        let r = self.r();
        Self::from_fn(r, intervals, self.dim(), |t, out| self.signal.eval(t, out))
    }
}
