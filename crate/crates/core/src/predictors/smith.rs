//! The exact predictor for linear plants `ẋ = Ax + Bu(t - r)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{induced_norm, HistorySegment};
use crate::error::{Error, Result};

use super::{check_history, PredictorMap, PredictorScheme, SchemeKind};

/// All eigenvalues of `m` have negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.is_square() && m.clone().complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

/// Quadrature kernels on one history grid: node `j` sits at `s = j h`.
struct Kernels {
    p: Vec<DMatrix<f64>>,
    g: Vec<DMatrix<f64>>,
}

struct SmithMap {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    gain: DMatrix<f64>,
    r: f64,
    /// `k' e^{Ar}`.
    px: DMatrix<f64>,
    /// `k' e^{Ar} A`.
    gx: DMatrix<f64>,
    /// `k' B`.
    gb: DMatrix<f64>,
    cache: Mutex<HashMap<usize, Arc<Kernels>>>,
}

impl SmithMap {
    fn kernels(&self, intervals: usize) -> Arc<Kernels> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(intervals)
            .or_insert_with(|| Arc::new(self.build_kernels(intervals)))
            .clone()
    }

    fn build_kernels(&self, intervals: usize) -> Kernels {
        let h = self.r / intervals as f64;
        let step = (&self.a * h).exp();
        let n = self.a.nrows();
        // powers[k] = e^{A k h}
        let mut powers = Vec::with_capacity(intervals + 1);
        let mut cur = DMatrix::<f64>::identity(n, n);
        for _ in 0..=intervals {
            powers.push(cur.clone());
            cur = &cur * &step;
        }
        // use the directly computed exponential at the far end
        powers[intervals] = (&self.a * self.r).exp();
        let ka = &self.gain * &self.a;
        let mut p = Vec::with_capacity(intervals + 1);
        let mut g = Vec::with_capacity(intervals + 1);
        for j in 0..=intervals {
            let w = if j == 0 || j == intervals { 0.5 * h } else { h };
            let e = &powers[intervals - j] * &self.b;
            p.push(&self.gain * &e * w);
            g.push(&ka * &e * w);
        }
        Kernels { p, g }
    }

    fn apply(&self, x: &[f64], history: &HistorySegment, want_g: bool) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.a.nrows();
        let m = self.b.ncols();
        check_history(history, self.r, m)?;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: n,
                got: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        let kernels = self.kernels(history.intervals());
        let mut p = &self.px * &xv;
        let mut g = if want_g {
            &self.gx * &xv + &self.gb * DVector::from_column_slice(history.newest())
        } else {
            DVector::zeros(m)
        };
        for j in 0..=history.intervals() {
            let uj = DVector::from_column_slice(history.node(j));
            p += &kernels.p[j] * &uj;
            if want_g {
                g += &kernels.g[j] * &uj;
            }
        }
        Ok((p.as_slice().to_vec(), g.as_slice().to_vec()))
    }
}

impl PredictorMap for SmithMap {
    fn predict(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        Ok(self.apply(x, history, false)?.0)
    }

    fn derivative(&self, x: &[f64], history: &HistorySegment) -> Result<Vec<f64>> {
        Ok(self.apply(x, history, true)?.1)
    }

    fn evaluate(&self, x: &[f64], history: &HistorySegment) -> Result<(Vec<f64>, Vec<f64>)> {
        self.apply(x, history, true)
    }
}

/// `p(x,u) = k'e^{Ar}x + ∫₀^r k'e^{A(r-s)}B u(s-r) ds` and its derivative
/// `g = k'e^{Ar}Ax + ∫₀^r k'A e^{A(r-s)}B u(s-r) ds + k'B u(0)`.
///
/// Exact (`a1 = a2 = 0`) up to quadrature. Refused unless `A + B k'` is Hurwitz.
pub fn smith_scheme(a: &DMatrix<f64>, b: &DMatrix<f64>, gain: &DMatrix<f64>, r: f64) -> Result<PredictorScheme> {
    let n = a.nrows();
    if !a.is_square() {
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
    if gain.shape() != (m, n) {
        return Err(Error::DimensionMismatch {
            what: "gain",
            expected: m * n,
            got: gain.len(),
        });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("delay must be positive, got {r}")));
    }
    let closed = a + b * gain;
    if !is_hurwitz(&closed) {
        return Err(Error::CertificateRefused(
            "A + B·gain is not Hurwitz; the undelayed loop is not stabilized".into(),
        ));
    }
    let ear = (a * r).exp();
    let px = gain * &ear;
    let gx = &px * a;
    let gb = gain * b;
    let (na, nb, nk) = (induced_norm(a), induced_norm(b), induced_norm(gain));
    let sup = nk * nb * (na * r).exp();
    let cx = induced_norm(&px) + induced_norm(&gx);
    let cu = r * sup * (1.0 + na) + induced_norm(&gb);
    let map = SmithMap {
        a: a.clone(),
        b: b.clone(),
        gain: gain.clone(),
        r,
        px,
        gx,
        gb,
        cache: Mutex::new(HashMap::new()),
    };
    Ok(PredictorScheme::new("smith", SchemeKind::Exact, m, map)
        .with_constants(0.0, 0.0)
        .with_growth(cx.max(cu)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{phi, SystemModel};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn hurwitz_check() {
        assert!(is_hurwitz(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0])));
        assert!(!is_hurwitz(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])));
        let err = smith_scheme(&scalar(1.0), &scalar(1.0), &scalar(-0.5), 1.0).unwrap_err();
        assert!(matches!(err, Error::CertificateRefused(_)));
    }

    #[test]
    fn integrator_closed_form() {
        // A = 0, B = I, k' = -c I: p = -c x - c ∫ u
        let c = 2.0;
        let s = smith_scheme(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), &(DMatrix::identity(2, 2) * -c), 1.0).unwrap();
        let u = HistorySegment::from_fn(1.0, 100, 2, |t, o| {
            o[0] = 1.0;
            o[1] = t;
        })
        .unwrap();
        let p = s.p(&[0.5, -1.0], &u).unwrap();
        assert!((p[0] - (-c * 0.5 - c * 1.0)).abs() < 1e-12);
        assert!((p[1] - (c * 1.0 + c * 0.5)).abs() < 1e-12);
        let g = s.g(&[0.5, -1.0], &u).unwrap();
        assert!((g[0] + c).abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn scalar_matches_ode_oracle() {
        let (a, b, k, r) = (0.7, 1.3, -2.0, 0.8);
        let s = smith_scheme(&scalar(a), &scalar(b), &scalar(k), r).unwrap();
        let model = SystemModel::linear(scalar(a), scalar(b)).unwrap();
        let u = HistorySegment::from_fn(r, 4000, 1, |t, o| o[0] = (2.0 * t).sin() + 0.3).unwrap();
        let x = [0.9];
        let exact = phi(&model, &x, &u.advanced(), r, r / 4000.0).unwrap()[0];
        let p = s.p(&x, &u).unwrap()[0];
        assert!((p - k * exact).abs() < 1e-6, "{p} vs {}", k * exact);
    }

    #[test]
    fn zero_inputs() {
        let s = smith_scheme(&scalar(0.5), &scalar(1.0), &scalar(-3.0), 0.4).unwrap();
        let z = HistorySegment::zeros(0.4, 8, 1).unwrap();
        let (p, g) = s.p_and_g(&[0.0], &z).unwrap();
        assert_eq!((p[0], g[0]), (0.0, 0.0));
        assert_eq!(s.constants().unwrap().a1, 0.0);
    }
}
