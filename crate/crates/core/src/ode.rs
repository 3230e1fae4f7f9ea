//! Dormand–Prince 5(4) with PI step control and continuous output, on
//! complex state vectors.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)` over complex vectors.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()>;

    /// Called on every accepted step; an error aborts the integration and
    /// the previous accepted state is reported as the last good one.
    fn check(&self, _t: f64, _y: &[C64]) -> Result<()> {
        Ok(())
    }
}

/// Where the solver records output.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    /// Initial point plus every accepted step.
    EveryStep,
    /// Initial point plus the given times, interpolated with the continuous extension.
    At(Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub struct OdeOutput {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub accepted: usize,
    pub rejected: usize,
    /// Last accepted time and state.
    pub t_last: f64,
    pub y_last: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct OdeFailure {
    pub error: Error,
    pub partial: OdeOutput,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Smallest admissible step as a fraction of the integration span.
    pub min_step_fraction: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_steps: 5_000_000,
            min_step_fraction: 1e-12,
        }
    }
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

fn axpy(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut s = C64::new(0.0, 0.0);
        for (c, k) in terms {
            s += *c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

struct DenseStep {
    t_old: f64,
    h: f64,
    r: [Vec<C64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> Vec<C64> {
        let th = (t - self.t_old) / self.h;
        let th1 = 1.0 - th;
        (0..self.r[0].len())
            .map(|i| {
                self.r[0][i]
                    + th * (self.r[1][i]
                        + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])))
            })
            .collect()
    }
}

impl Dopri5 {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Dopri5 {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    fn err_norm(&self, y0: &[C64], y1: &[C64], err: &[C64]) -> f64 {
        let mut s = 0.0;
        for i in 0..y0.len() {
            let sc = self.abs_tol + self.rel_tol * y0[i].norm().max(y1[i].norm());
            s += (err[i].re / sc).powi(2) + (err[i].im / sc).powi(2);
        }
        (s / (2 * y0.len()).max(1) as f64).sqrt()
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[C64],
        f0: &[C64],
        span: f64,
    ) -> Result<f64> {
        let zero = vec![C64::new(0.0, 0.0); y0.len()];
        let d0 = self.err_norm(y0, y0, y0);
        let d1 = self.err_norm(y0, y0, f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span);
        let mut y1 = zero.clone();
        axpy(&mut y1, y0, h0, &[(1.0, f0)]);
        let mut f1 = zero.clone();
        sys.rhs(t0 + h0, &y1, &mut f1)?;
        let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = self.err_norm(y0, y0, &diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(span))
    }

    /// Integrate from `(t0, y0)` to `t_end > t0`.
    pub fn solve<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[C64],
        t_end: f64,
        samples: &Samples,
    ) -> std::result::Result<OdeOutput, OdeFailure> {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state length does not match system dimension");
        let mut out = OdeOutput {
            times: vec![t0],
            states: vec![y0.to_vec()],
            t_last: t0,
            y_last: y0.to_vec(),
            ..Default::default()
        };
        let fail = |error: Error, out: OdeOutput| OdeFailure {
            error,
            partial: out,
        };
        if !(t_end > t0) {
            return Err(fail(
                Error::Domain(format!("t_end = {t_end} must exceed t0 = {t0}")),
                out,
            ));
        }
        let wanted: Vec<f64> = match samples {
            Samples::EveryStep => Vec::new(),
            Samples::At(ts) => ts
                .iter()
                .copied()
                .filter(|&t| t > t0 && t <= t_end)
                .collect(),
        };
        let mut next_sample = 0usize;

        let span = t_end - t0;
        let h_min = self.min_step_fraction * span;
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = vec![C64::new(0.0, 0.0); n];
        if let Err(e) = sys.rhs(t, &y, &mut k1) {
            return Err(fail(e, out));
        }
        let mut h = match self.initial_step(sys, t, &y, &k1, span) {
            Ok(h) => h,
            Err(e) => return Err(fail(e, out)),
        };
        let mut k2 = vec![C64::new(0.0, 0.0); n];
        let mut k3 = k2.clone();
        let mut k4 = k2.clone();
        let mut k5 = k2.clone();
        let mut k6 = k2.clone();
        let mut k7 = k2.clone();
        let mut ytmp = k2.clone();
        let mut ynew = k2.clone();
        let mut err = k2.clone();
        let mut fac_old = 1e-4f64;
        let mut last_rejected = false;

        for _ in 0..self.max_steps {
            if t + h > t_end || (t_end - (t + h)) < 1e-14 * span {
                h = t_end - t;
            }
            if h < h_min {
                return Err(fail(Error::StepUnderflow { t, h, h_min }, out));
            }
            let stages = (|| -> Result<()> {
                axpy(&mut ytmp, &y, h, &[(A21, &k1)]);
                sys.rhs(t + C2 * h, &ytmp, &mut k2)?;
                axpy(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
                sys.rhs(t + C3 * h, &ytmp, &mut k3)?;
                axpy(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
                sys.rhs(t + C4 * h, &ytmp, &mut k4)?;
                axpy(
                    &mut ytmp,
                    &y,
                    h,
                    &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
                );
                sys.rhs(t + C5 * h, &ytmp, &mut k5)?;
                axpy(
                    &mut ytmp,
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                );
                sys.rhs(t + h, &ytmp, &mut k6)?;
                axpy(
                    &mut ynew,
                    &y,
                    h,
                    &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
                );
                sys.rhs(t + h, &ynew, &mut k7)?;
                Ok(())
            })();
            if stages.is_err() {
                // a stage wandered into a singularity; retry with a smaller step
                out.rejected += 1;
                last_rejected = true;
                h *= 0.25;
                continue;
            }
            for i in 0..n {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let e = self.err_norm(&y, &ynew, &err);
            if !e.is_finite() {
                out.rejected += 1;
                last_rejected = true;
                h *= 0.25;
                continue;
            }
            let fac11 = e.powf(0.2 - BETA * 0.75);
            if e <= 1.0 {
                let t_new = t + h;
                if let Err(err) = sys.check(t_new, &ynew) {
                    return Err(fail(err, out));
                }
                let dense = if matches!(samples, Samples::At(_)) {
                    let ydiff: Vec<C64> = (0..n).map(|i| ynew[i] - y[i]).collect();
                    let bspl: Vec<C64> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
                    let r4: Vec<C64> = (0..n).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
                    let r5: Vec<C64> = (0..n)
                        .map(|i| {
                            h * (D1 * k1[i]
                                + D3 * k3[i]
                                + D4 * k4[i]
                                + D5 * k5[i]
                                + D6 * k6[i]
                                + D7 * k7[i])
                        })
                        .collect();
                    Some(DenseStep {
                        t_old: t,
                        h,
                        r: [y.clone(), ydiff, bspl, r4, r5],
                    })
                } else {
                    None
                };
                out.accepted += 1;
                t = t_new;
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                out.t_last = t;
                out.y_last.clone_from(&y);
                match &dense {
                    Some(d) => {
                        while next_sample < wanted.len() && wanted[next_sample] <= t {
                            let ts = wanted[next_sample];
                            let ys = if ts == t { y.clone() } else { d.eval(ts) };
                            out.times.push(ts);
                            out.states.push(ys);
                            next_sample += 1;
                        }
                    }
                    None => {
                        out.times.push(t);
                        out.states.push(y.clone());
                    }
                }
                if t >= t_end {
                    return Ok(out);
                }
                let mut fac = fac11 / fac_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                fac_old = e.max(1e-4);
                last_rejected = false;
                h = h_new;
            } else {
                out.rejected += 1;
                last_rejected = true;
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            }
        }
        Err(fail(
            Error::Domain(format!("exceeded {} steps", self.max_steps)),
            out,
        ))
    }
}
