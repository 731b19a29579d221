use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `(x, u, out) ↦ out = f(x, u)`.
pub type FieldFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Number of random point pairs used when spot-checking declared constants.
pub const SPOT_CHECK_PAIRS: usize = 1000;

/// `(1 + √2)/2`: factor turning a linear-growth constant into a valid
/// exponential rate for the solution-norm bound.
pub const GROWTH_FACTOR: f64 = 0.5 + std::f64::consts::FRAC_1_SQRT_2;

/// Declared constants. A `None` entry means the model makes no such claim.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hypotheses {
    /// `|f(x,u) - f(y,u)| ≤ L|x - y|`.
    pub lipschitz: Option<f64>,
    /// `|f(x,u)| ≤ L(|x| + |u|)`.
    pub linear_growth: Option<f64>,
    /// `x'f(x,u) ≤ L|x|² + L|u|²`.
    pub dissipative_growth: Option<f64>,
    /// `|f(x,u)| ≤ L1|x| + L2|u|`.
    pub split_growth: Option<(f64, f64)>,
}

/// Vector field `ẋ = f(x, u)` with origin equilibrium and declared constants.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    n: usize,
    m: usize,
    field: Arc<FieldFn>,
    hypotheses: Hypotheses,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("hypotheses", &self.hypotheses)
            .finish()
    }
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        field: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n,
            m,
            field: Arc::new(field),
            hypotheses: Hypotheses::default(),
        }
    }

    pub fn with_hypotheses(mut self, hypotheses: Hypotheses) -> Self {
        self.hypotheses = hypotheses;
        self
    }

    /// Declares the Lipschitz and linear-growth bounds with the same constant.
    pub fn globally_lipschitz(mut self, l: f64) -> Self {
        self.hypotheses.lipschitz = Some(l);
        self.hypotheses.linear_growth = Some(l);
        self
    }

    pub fn with_split_growth(mut self, l1: f64, l2: f64) -> Self {
        self.hypotheses.split_growth = Some((l1, l2));
        self
    }

    /// `ẋ = Ax + Bu`, with every constant read off the induced matrix norms.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "A columns",
                expected: n,
                got: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "B rows",
                expected: n,
                got: b.nrows(),
            });
        }
        let m = b.ncols();
        let (na, nb) = (induced_norm(&a), induced_norm(&b));
        let (a_field, b_field) = (a.clone(), b.clone());
        let model = Self::new("linear", n, m, move |x, u, out| {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += a_field[(i, j)] * x[j];
                }
                for j in 0..m {
                    acc += b_field[(i, j)] * u[j];
                }
                out[i] = acc;
            }
        });
        Ok(model.with_hypotheses(Hypotheses {
            lipschitz: Some(na),
            linear_growth: Some(na.max(nb)),
            dissipative_growth: None,
            split_growth: Some((na, nb)),
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn hypotheses(&self) -> &Hypotheses {
        &self.hypotheses
    }

    /// Checked `f(x, u)`.
    pub fn evaluate_field(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_state(x)?;
        self.check_input(u)?;
        let mut out = vec![0.0; self.n];
        (self.field)(x, u, &mut out);
        Ok(out)
    }

    /// Unchecked hot-path evaluation.
    #[inline]
    pub(crate) fn field_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.field)(x, u, out)
    }

    pub(crate) fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "input",
                expected: self.m,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Global Lipschitz constant `L`, the larger one when both are declared.
    pub fn lipschitz_constant(&self) -> Result<f64> {
        match (self.hypotheses.lipschitz, self.hypotheses.linear_growth) {
            (Some(a), Some(b)) => Ok(a.max(b)),
            _ => Err(Error::MissingHypothesis("globally Lipschitz field (3.1a,b)")),
        }
    }

    /// Exponential rate valid for `|φ(t,x0;u)| ≤ exp(Lt)(|x0| + sup|u|)`.
    ///
    /// Preference order: a declared dissipative constant, then `L1 + L2`,
    /// then the linear-growth constant scaled by [`GROWTH_FACTOR`].
    pub fn growth_rate(&self) -> Result<f64> {
        let h = &self.hypotheses;
        if let Some(l) = h.dissipative_growth {
            Ok(l)
        } else if let Some((l1, l2)) = h.split_growth {
            Ok(l1 + l2)
        } else if let Some(l) = h.linear_growth {
            Ok(GROWTH_FACTOR * l)
        } else {
            Err(Error::MissingHypothesis("growth condition (A1), (2.18) or (3.1b)"))
        }
    }

    /// Checks `f(0, 0) = 0`.
    pub fn check_equilibrium(&self) -> Result<()> {
        let f0 = self.evaluate_field(&vec![0.0; self.n], &vec![0.0; self.m])?;
        let size = super::norm(&f0);
        if size > 1e-12 {
            return Err(Error::HypothesisViolated(format!("|f(0,0)| = {size} ≠ 0")));
        }
        Ok(())
    }

    /// Spot-checks every declared constant on [`SPOT_CHECK_PAIRS`] random
    /// point pairs drawn from the box `[-radius, radius]^(n+m)`.
    pub fn verify_hypotheses(&self, radius: f64, seed: u64) -> Result<()> {
        self.check_equilibrium()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-radius..=radius)).collect() };
        let h = self.hypotheses;
        let tol = |scale: f64| 1e-12 * (1.0 + scale);
        let mut fx = vec![0.0; self.n];
        let mut fy = vec![0.0; self.n];
        for _ in 0..SPOT_CHECK_PAIRS {
            let (x, y, u) = (draw(self.n), draw(self.n), draw(self.m));
            self.field_into(&x, &u, &mut fx);
            self.field_into(&y, &u, &mut fy);
            let (nx, nu) = (super::norm(&x), super::norm(&u));
            let nfx = super::norm(&fx);
            if let Some(l) = h.lipschitz {
                let lhs = super::distance(&fx, &fy);
                let rhs = l * super::distance(&x, &y);
                if lhs > rhs + tol(rhs) {
                    return Err(Error::HypothesisViolated(format!(
                        "Lipschitz bound {l} fails: |f(x,u)-f(y,u)| = {lhs} > {rhs}"
                    )));
                }
            }
            if let Some(l) = h.linear_growth {
                let rhs = l * (nx + nu);
                if nfx > rhs + tol(rhs) {
                    return Err(Error::HypothesisViolated(format!(
                        "growth bound {l} fails: |f(x,u)| = {nfx} > {rhs}"
                    )));
                }
            }
            if let Some(l) = h.dissipative_growth {
                let lhs: f64 = x.iter().zip(&fx).map(|(a, b)| a * b).sum();
                let rhs = l * (nx * nx + nu * nu);
                if lhs > rhs + tol(rhs) {
                    return Err(Error::HypothesisViolated(format!(
                        "dissipative bound {l} fails: x'f = {lhs} > {rhs}"
                    )));
                }
            }
            if let Some((l1, l2)) = h.split_growth {
                let rhs = l1 * nx + l2 * nu;
                if nfx > rhs + tol(rhs) {
                    return Err(Error::HypothesisViolated(format!(
                        "split growth ({l1}, {l2}) fails: |f(x,u)| = {nfx} > {rhs}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Induced Euclidean norm (largest singular value).
pub fn induced_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}
