//! Equations of motion for the poles and their time integration.
//!
//! With `p_ij = ℘(x_i − x_j)` and `p′_ij = ℘′(x_i − x_j)` the flow is
//!
//! ```text
//! ẍ_i = −6 Σ_{j≠i} (ẋ_i + ẋ_j) p′_ij + 72 Σ_{j≠k; j,k≠i} p_ij p′_ik
//! ```
//!
//! and the rational model replaces ℘ by `1/x²`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::elliptic::Lattice;
use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, Samples};

/// Phase point: `N` complex poles and their velocities at real time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleState {
    pub t: f64,
    pub x: Vec<C64>,
    pub v: Vec<C64>,
}

impl PoleState {
    pub fn new(t: f64, x: Vec<C64>, v: Vec<C64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Domain("at least one pole is required".into()));
        }
        if x.len() != v.len() {
            return Err(Error::Domain(format!(
                "{} positions but {} velocities",
                x.len(),
                v.len()
            )));
        }
        Ok(PoleState { t, x, v })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Rigid translation of every pole.
    pub fn translated(&self, shift: C64) -> Self {
        PoleState {
            t: self.t,
            x: self.x.iter().map(|x| x + shift).collect(),
            v: self.v.clone(),
        }
    }

    fn to_vec(&self) -> Vec<C64> {
        self.x.iter().chain(&self.v).copied().collect()
    }

    fn from_slice(t: f64, y: &[C64]) -> Self {
        let n = y.len() / 2;
        PoleState {
            t,
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Elliptic(Lattice),
    /// ℘(x) → 1/x²
    Rational,
}

/// Separation below which the rational model refuses to evaluate.
pub const RATIONAL_GUARD: f64 = 1e-6;

impl Model {
    pub fn lattice(&self) -> Option<&Lattice> {
        match self {
            Model::Elliptic(l) => Some(l),
            Model::Rational => None,
        }
    }

    /// Pair kernel `(℘(x), ℘′(x))` or its rational limit `(1/x², −2/x³)`.
    pub fn pair(&self, x: C64) -> Result<(C64, C64)> {
        match self {
            Model::Elliptic(l) => l.wp_pair(x),
            Model::Rational => {
                if x.norm() < RATIONAL_GUARD {
                    return Err(Error::Pole {
                        arg: "x".into(),
                        distance: x.norm(),
                        guard: RATIONAL_GUARD,
                    });
                }
                let inv = 1.0 / x;
                let inv2 = inv * inv;
                Ok((inv2, -2.0 * inv2 * inv))
            }
        }
    }

    /// |x| reduced modulo the lattice for the elliptic model.
    pub fn distance(&self, x: C64) -> f64 {
        match self {
            Model::Elliptic(l) => l.distance_to_lattice(x),
            Model::Rational => x.norm(),
        }
    }

    fn guard(&self) -> f64 {
        match self {
            Model::Elliptic(l) => l.pole_guard(),
            Model::Rational => RATIONAL_GUARD,
        }
    }

    /// Integration aborts once two poles come closer than this.
    pub fn collision_threshold(&self) -> f64 {
        match self {
            Model::Elliptic(l) => 1e-4 * (2.0 * l.omega().norm()).min(2.0 * l.omega_prime().norm()),
            Model::Rational => 1e-6,
        }
    }
}

/// Pair kernel tables `p[i][j] = ℘(x_i − x_j)`, `dp[i][j] = ℘′(x_i − x_j)`
/// with zero diagonals.
pub(crate) struct PairTable {
    pub p: Vec<Vec<C64>>,
    pub dp: Vec<Vec<C64>>,
}

impl PairTable {
    pub fn new(x: &[C64], model: &Model) -> Result<Self> {
        let n = x.len();
        let zero = C64::new(0.0, 0.0);
        let mut p = vec![vec![zero; n]; n];
        let mut dp = vec![vec![zero; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = model.pair(x[i] - x[j])?;
                p[i][j] = a;
                p[j][i] = a;
                dp[i][j] = b;
                dp[j][i] = -b;
            }
        }
        Ok(PairTable { p, dp })
    }
}

fn closest_pair(s: &PoleState, model: &Model) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let d = model.distance(s.x[i] - s.x[j]);
            if best.is_none_or(|b| d < b.2) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

/// Minimum pairwise (lattice-reduced) separation; `+∞` for a single pole.
pub fn min_separation(s: &PoleState, model: &Model) -> f64 {
    closest_pair(s, model).map_or(f64::INFINITY, |b| b.2)
}

pub(crate) fn check_separation(s: &PoleState, model: &Model, threshold: f64) -> Result<()> {
    if let Some((i, j, d)) = closest_pair(s, model) {
        if d < threshold {
            return Err(Error::Collision {
                i,
                j,
                separation: d,
                threshold,
                t: s.t,
            });
        }
    }
    Ok(())
}

/// Accelerations `ẍ_i` prescribed by the equations of motion.
pub fn acceleration(s: &PoleState, model: &Model) -> Result<Vec<C64>> {
    check_separation(s, model, model.guard())?;
    let table = PairTable::new(&s.x, model)?;
    Ok(acceleration_from_table(s, &table))
}

pub(crate) fn acceleration_from_table(s: &PoleState, t: &PairTable) -> Vec<C64> {
    let n = s.n();
    (0..n)
        .map(|i| {
            let mut two_body = C64::new(0.0, 0.0);
            let mut sum_p = C64::new(0.0, 0.0);
            let mut sum_dp = C64::new(0.0, 0.0);
            let mut diag = C64::new(0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                two_body += (s.v[i] + s.v[j]) * t.dp[i][j];
                sum_p += t.p[i][j];
                sum_dp += t.dp[i][j];
                diag += t.p[i][j] * t.dp[i][j];
            }
            // Σ_{j≠k} p_ij p′_ik = (Σ_j p_ij)(Σ_k p′_ik) − Σ_j p_ij p′_ij
            -6.0 * two_body + 72.0 * (sum_p * sum_dp - diag)
        })
        .collect()
}

/// Recorded integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PoleState>,
    pub accepted: usize,
    pub rejected: usize,
    pub min_separation_seen: f64,
}

#[derive(Debug, Clone)]
pub struct IntegrationFailure {
    pub error: Error,
    /// Samples recorded before the failure.
    pub partial: Trajectory,
    /// Last accepted state.
    pub last_good: PoleState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub samples: Samples,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            samples: Samples::EveryStep,
        }
    }
}

impl IntegrateOptions {
    /// Default tolerances with `count` equally spaced samples on `(t0, t_end]`.
    pub fn uniform(t0: f64, t_end: f64, count: usize) -> Self {
        let count = count.max(1);
        let dt = (t_end - t0) / count as f64;
        let mut ts: Vec<f64> = (1..count).map(|k| t0 + k as f64 * dt).collect();
        ts.push(t_end);
        IntegrateOptions {
            samples: Samples::At(ts),
            ..Default::default()
        }
    }
}

/// The pole flow as a first-order system on `(x, v)`.
pub struct PoleSystem<'a> {
    pub model: &'a Model,
    pub n: usize,
}

impl OdeSystem for PoleSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        let s = PoleState::from_slice(t, y);
        let acc = acceleration(&s, self.model)?;
        dy[..self.n].copy_from_slice(&s.v);
        dy[self.n..].copy_from_slice(&acc);
        Ok(())
    }

    fn check(&self, t: f64, y: &[C64]) -> Result<()> {
        let s = PoleState::from_slice(t, y);
        check_separation(&s, self.model, self.model.collision_threshold())
    }
}

/// Integrate the pole flow from `s0` to `t_end` with an adaptive
/// Dormand–Prince 5(4) pair.
pub fn integrate(
    s0: &PoleState,
    model: &Model,
    t_end: f64,
    opts: &IntegrateOptions,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let bail = |error: Error| IntegrationFailure {
        error,
        partial: Trajectory {
            samples: vec![s0.clone()],
            accepted: 0,
            rejected: 0,
            min_separation_seen: min_separation(s0, model),
        },
        last_good: s0.clone(),
    };
    if !(t_end > s0.t) {
        return Err(bail(Error::Domain(format!(
            "t_end = {t_end} must exceed t0 = {}",
            s0.t
        ))));
    }
    for (name, tol) in [("rel_tol", opts.rel_tol), ("abs_tol", opts.abs_tol)] {
        if !(tol > 1e-14 && tol < 1e-2) {
            return Err(bail(Error::Domain(format!(
                "{name} = {tol} outside (1e-14, 1e-2)"
            ))));
        }
    }
    if let Err(e) = check_separation(s0, model, model.collision_threshold()) {
        return Err(bail(e));
    }
    let sys = PoleSystem { model, n: s0.n() };
    let solver = Dopri5::new(opts.rel_tol, opts.abs_tol);
    let to_traj = |o: &crate::ode::OdeOutput| {
        let samples: Vec<PoleState> = o
            .times
            .iter()
            .zip(&o.states)
            .map(|(&t, y)| PoleState::from_slice(t, y))
            .collect();
        let min_sep = samples
            .iter()
            .map(|s| min_separation(s, model))
            .fold(f64::INFINITY, f64::min)
            .min(min_separation(
                &PoleState::from_slice(o.t_last, &o.y_last),
                model,
            ));
        Trajectory {
            samples,
            accepted: o.accepted,
            rejected: o.rejected,
            min_separation_seen: min_sep,
        }
    };
    match solver.solve(&sys, s0.t, &s0.to_vec(), t_end, &opts.samples) {
        Ok(o) => Ok(to_traj(&o)),
        Err(f) => Err(IntegrationFailure {
            error: f.error,
            last_good: PoleState::from_slice(f.partial.t_last, &f.partial.y_last),
            partial: to_traj(&f.partial),
        }),
    }
}
