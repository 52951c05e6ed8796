//! Adaptive Dormand–Prince 5(4) integrator for autonomous matrix ODEs
//! (stage times are never needed, so only the tableau weights appear).
//!
//! Steps are clipped so that every requested output time is hit exactly;
//! no dense-output interpolation is involved.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::C64;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper limit on the step size.
    pub max_step: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000, max_step: f64::INFINITY }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

fn combo(y: &DMatrix<C64>, h: f64, terms: &[(f64, &DMatrix<C64>)]) -> DMatrix<C64> {
    let mut out = y.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            out.zip_apply(k, |o, kv| *o += kv * (h * w));
        }
    }
    out
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn with_max_step(self, max_step: f64) -> Self {
        Self { max_step, ..self }
    }

    /// Largest scaled component (max norm).
    fn error_norm(&self, err: &DMatrix<C64>, y0: &DMatrix<C64>, y1: &DMatrix<C64>) -> f64 {
        err.iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| e.norm() / (self.atol + self.rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max)
    }

    fn initial_step(&self, y0: &DMatrix<C64>, f0: &DMatrix<C64>, span: f64) -> f64 {
        let zero = DMatrix::zeros(y0.nrows(), y0.ncols());
        let d0 = self.error_norm(y0, &zero, y0);
        let d1 = self.error_norm(f0, &zero, y0);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(1e-10 * span)
    }

    /// Integrates `dy/dt = rhs(y)` from `times[0]`, calling `observe(k, t_k, y(t_k))`
    /// for every grid time, including the initial one.
    pub fn integrate<F, O>(
        &self,
        mut rhs: F,
        y0: DMatrix<C64>,
        times: &[f64],
        mut observe: O,
    ) -> Result<StepStats>
    where
        F: FnMut(&DMatrix<C64>) -> DMatrix<C64>,
        O: FnMut(usize, f64, &DMatrix<C64>) -> Result<()>,
    {
        check_grid(times)?;
        let mut stats = StepStats::default();
        let mut t = times[0];
        let mut y = y0;
        observe(0, t, &y)?;
        if times.len() == 1 {
            return Ok(stats);
        }

        let mut k1 = rhs(&y);
        stats.rhs_evals += 1;
        let span = times[times.len() - 1] - t;
        let mut h = self.initial_step(&y, &k1, span).min(self.max_step);
        let mut steps = 0usize;

        for (idx, &t_target) in times.iter().enumerate().skip(1) {
            while t < t_target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::TooManySteps { time: t, max_steps: self.max_steps });
                }
                let remaining = t_target - t;
                let clipped = h >= remaining;
                let h_try = if clipped { remaining } else { h };
                if h_try < 1e-14 * t.abs().max(1.0) && !clipped {
                    return Err(Error::StepSizeUnderflow { time: t, step: h_try });
                }

                let k2 = rhs(&combo(&y, h_try, &[(A21, &k1)]));
                let k3 = rhs(&combo(&y, h_try, &[(A31, &k1), (A32, &k2)]));
                let k4 = rhs(&combo(&y, h_try, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
                let k5 = rhs(&combo(&y, h_try, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
                let k6 = rhs(&combo(
                    &y,
                    h_try,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ));
                let y_new = combo(
                    &y,
                    h_try,
                    &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
                );
                let k7 = rhs(&y_new);
                stats.rhs_evals += 6;

                let zero = DMatrix::zeros(y.nrows(), y.ncols());
                let err = combo(
                    &zero,
                    h_try,
                    &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
                );
                let en = self.error_norm(&err, &y, &y_new);
                if !en.is_finite() {
                    return Err(Error::StepSizeUnderflow { time: t, step: h_try });
                }

                let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                if en <= 1.0 {
                    stats.accepted += 1;
                    t = if clipped { t_target } else { t + h_try };
                    y = y_new;
                    k1 = k7;
                    // a clipped step says nothing about the natural step size
                    if !clipped || factor < 1.0 {
                        h = (h_try * factor).min(self.max_step);
                    }
                } else {
                    stats.rejected += 1;
                    h = h_try * factor.min(1.0);
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::StepSizeUnderflow { time: t, step: h });
                    }
                }
            }
            observe(idx, t, &y)?;
        }
        Ok(stats)
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite time".into()));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("times must increase strictly ({} then {})", w[0], w[1])));
    }
    Ok(())
}

/// `n` equally spaced points on `[start, end]`.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => {
            let h = (end - start) / (n - 1) as f64;
            (0..n).map(|k| if k == n - 1 { end } else { start + h * k as f64 }).collect()
        }
    }
}
