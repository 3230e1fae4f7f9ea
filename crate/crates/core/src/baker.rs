//! The Baker–Akhiezer function ψ = e^{xz+tz³} Σ c_i Φ(x − x_i, λ), its
//! auxiliary linear problem ∂_t ψ = ψ‴ + 6uψ′ and the double-Bloch property.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::dynamics::{acceleration, check_separation, Model, PoleState};
use crate::elliptic::Lattice;
use crate::error::{Error, Result};
use crate::linalg::{null_vector, CMatrix};
use crate::ode::{Dopri5, OdeSystem, Samples};
use crate::spectral::{build_blocks, spectral_poly, MatrixBlocks, MatrixPair};

pub const NEWTON_MAX_STEPS: usize = 50;

/// Radius of the probe circle in units of |2ω|.
pub const PROBE_RADIUS: f64 = 0.37;

/// A point (z, λ) of the spectral curve with the eigenvector c of L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveData {
    pub z: C64,
    pub lambda: C64,
    /// Normalized by c₁ = 1.
    pub c: Vec<C64>,
    pub state: PoleState,
}

/// ψ and its derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiSample {
    pub x: C64,
    pub value: C64,
    pub dx1: C64,
    pub dx2: C64,
    pub dx3: C64,
    pub dt: C64,
}

/// u(x) = −Σ ℘(x − x_i)
pub fn potential_u(x: C64, s: &PoleState, lattice: &Lattice) -> Result<C64> {
    s.x.iter().try_fold(C64::new(0.0, 0.0), |acc, xi| {
        Ok(acc - lattice.wp(x - xi, 0)?)
    })
}

fn normalize_first(mut c: Vec<C64>) -> Result<Vec<C64>> {
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if c[0].norm() <= 1e-12 * scale {
        return Err(Error::Domain(
            "eigenvector has vanishing first component".into(),
        ));
    }
    let c0 = c[0];
    c.iter_mut().for_each(|v| *v /= c0);
    c[0] = C64::new(1.0, 0.0);
    Ok(c)
}

/// Newton iteration on R(·, λ) = 0 from `z_guess`, then the null vector of
/// 3(z² − ℘(λ)) I − L(z, λ).
pub fn wave_data(s: &PoleState, lambda: C64, z_guess: C64, lattice: &Lattice) -> Result<WaveData> {
    let poly = spectral_poly(s, lambda, lattice)?;
    let mut z = z_guess;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_STEPS {
        let d = poly.eval_deriv(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly.eval(z) / d;
        if !step.is_finite() {
            break;
        }
        z -= step;
        last_step = step.norm();
        if last_step <= 1e-14 * (1.0 + z.norm()) {
            converged = true;
            break;
        }
    }
    let lead = poly.coeffs[poly.degree()].norm();
    let bound = 1e-10 * lead * (1.0 + z.norm()).powi(poly.degree() as i32);
    if !converged && !(poly.eval(z).norm() < bound) {
        return Err(Error::NoConvergence {
            iterations: NEWTON_MAX_STEPS,
            last_step,
        });
    }
    let blocks = build_blocks(s, lambda, lattice)?;
    let n = s.n();
    let k = CMatrix::identity(n, n) * blocks.big_lambda(z) - blocks.l(z);
    let c = normalize_first(null_vector(&k)?)?;
    Ok(WaveData {
        z,
        lambda,
        c,
        state: s.clone(),
    })
}

/// Velocities solving the pole-cancellation condition L c = Λ c for given
/// positions, spectral point and coefficients.
pub fn on_shell_velocities(
    x: &[C64],
    z: C64,
    lambda: C64,
    c: &[C64],
    lattice: &Lattice,
) -> Result<Vec<C64>> {
    if x.len() != c.len() {
        return Err(Error::Domain(format!(
            "{} poles but {} coefficients",
            x.len(),
            c.len()
        )));
    }
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if let Some(i) = c.iter().position(|v| v.norm() <= 1e-12 * scale) {
        return Err(Error::Domain(format!("coefficient c_{} vanishes", i + 1)));
    }
    // blocks with zero velocities: L₀ c then gives −Ẋ c = Λ c − L₀ c
    let zero = PoleState::new(0.0, x.to_vec(), vec![C64::new(0.0, 0.0); x.len()])?;
    let blocks = build_blocks(&zero, lambda, lattice)?;
    let cv = DVector::from_column_slice(c);
    let l0c = blocks.l(z) * &cv;
    let big = blocks.big_lambda(z);
    Ok((0..x.len()).map(|i| (l0c[i] - big * c[i]) / c[i]).collect())
}

/// WaveData whose state is on-shell by construction: velocities come from
/// [`on_shell_velocities`]. `c` is rescaled to c₁ = 1.
pub fn on_shell(
    t: f64,
    x: Vec<C64>,
    z: C64,
    lambda: C64,
    c: Vec<C64>,
    lattice: &Lattice,
) -> Result<WaveData> {
    let c = normalize_first(c)?;
    let v = on_shell_velocities(&x, z, lambda, &c, lattice)?;
    Ok(WaveData {
        z,
        lambda,
        c,
        state: PoleState::new(t, x, v)?,
    })
}

/// ‖L c − Λ c‖ / ‖c‖
pub fn eigen_residual(w: &WaveData, lattice: &Lattice) -> Result<f64> {
    let pair = MatrixPair::from_blocks(&build_blocks(&w.state, w.lambda, lattice)?, w.z);
    Ok(crate::spectral::eigen_residual(&pair, &w.c))
}

fn c_dot(blocks: &MatrixBlocks, z: C64, c: &[C64]) -> Vec<C64> {
    let cv = DVector::from_column_slice(c);
    (blocks.m(z) * cv).iter().copied().collect()
}

/// ψ at `x` with time `w.state.t + t_offset` in the exponential factor.
pub fn psi_eval(x: C64, t_offset: f64, w: &WaveData, lattice: &Lattice) -> Result<PsiSample> {
    let blocks = build_blocks(&w.state, w.lambda, lattice)?;
    psi_with_blocks(x, t_offset, w, &blocks, lattice)
}

fn psi_with_blocks(
    x: C64,
    t_offset: f64,
    w: &WaveData,
    blocks: &MatrixBlocks,
    lattice: &Lattice,
) -> Result<PsiSample> {
    let z = w.z;
    let t = w.state.t + t_offset;
    let e = (x * z + t * z * z * z).exp();
    let cd = c_dot(blocks, z, &w.c);
    let mut s = [C64::new(0.0, 0.0); 4];
    let mut flow = C64::new(0.0, 0.0);
    for (i, xi) in w.state.x.iter().enumerate() {
        let phi = lattice.phi(x - xi, w.lambda, 3)?;
        for (k, acc) in s.iter_mut().enumerate() {
            *acc += w.c[i] * phi.deriv(k).unwrap_or_default();
        }
        flow += cd[i] * phi.value - w.c[i] * w.state.v[i] * phi.dx1;
    }
    let value = e * s[0];
    Ok(PsiSample {
        x,
        value,
        dx1: e * (z * s[0] + s[1]),
        dx2: e * (z * z * s[0] + 2.0 * z * s[1] + s[2]),
        dx3: e * (z * z * z * s[0] + 3.0 * z * z * s[1] + 3.0 * z * s[2] + s[3]),
        dt: z * z * z * value + e * flow,
    })
}

/// max over `xs` of |ψ_t − ψ‴ − 6uψ′| / (1 + |ψ‴|)
pub fn linear_problem_residual(w: &WaveData, lattice: &Lattice, xs: &[C64]) -> Result<f64> {
    let blocks = build_blocks(&w.state, w.lambda, lattice)?;
    let mut worst: f64 = 0.0;
    for &x in xs {
        let p = psi_with_blocks(x, 0.0, w, &blocks, lattice)?;
        let u = potential_u(x, &w.state, lattice)?;
        let r = (p.dt - p.dx3 - 6.0 * u * p.dx1).norm() / (1.0 + p.dx3.norm());
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Eight points on a circle of radius 0.37·|2ω| about the centroid of the
/// poles, keeping those farther than the pole guard from every pole.
pub fn probe_points(s: &PoleState, lattice: &Lattice) -> Vec<C64> {
    let centroid: C64 = s.x.iter().sum::<C64>() / s.n() as f64;
    let radius = PROBE_RADIUS * 2.0 * lattice.omega().norm();
    let guard = lattice.pole_guard();
    (0..8)
        .map(|k| centroid + C64::from_polar(radius, 2.0 * PI * k as f64 / 8.0))
        .filter(|p| {
            s.x.iter()
                .all(|xi| lattice.distance_to_lattice(p - xi) > guard)
        })
        .collect()
}

/// (b, b′) = e^{2(ωz + ζ(ω)λ − ζ(λ)ω)} and the same with ω′.
pub fn bloch_multipliers(w: &WaveData, lattice: &Lattice) -> Result<(C64, C64)> {
    let zl = lattice.zeta(w.lambda)?;
    let mult = |om: C64, eta: C64| (2.0 * (om * w.z + eta * w.lambda - zl * om)).exp();
    Ok((
        mult(lattice.omega(), lattice.eta()),
        mult(lattice.omega_prime(), lattice.eta_prime()),
    ))
}

/// max over `xs` of |ψ(x + 2ω) − bψ(x)| / |ψ(x)|, and the same for ω′.
pub fn bloch_residuals(w: &WaveData, lattice: &Lattice, xs: &[C64]) -> Result<(f64, f64)> {
    let (b, bp) = bloch_multipliers(w, lattice)?;
    let blocks = build_blocks(&w.state, w.lambda, lattice)?;
    let psi = |x: C64| psi_with_blocks(x, 0.0, w, &blocks, lattice).map(|p| p.value);
    let (mut r, mut rp) = (0.0f64, 0.0f64);
    for &x in xs {
        let base = psi(x)?;
        let scale = base.norm();
        r = r.max((psi(x + 2.0 * lattice.omega())? - b * base).norm() / scale);
        rp = rp.max((psi(x + 2.0 * lattice.omega_prime())? - bp * base).norm() / scale);
    }
    Ok((r, rp))
}

/// Joint flow of the poles and the eigenvector: ẍ from the equations of
/// motion and ċ = M c.
struct WaveFlow<'a> {
    lattice: &'a Lattice,
    model: Model,
    z: C64,
    lambda: C64,
    n: usize,
}

impl WaveFlow<'_> {
    fn split(&self, t: f64, y: &[C64]) -> Result<(PoleState, Vec<C64>)> {
        let n = self.n;
        let s = PoleState::new(t, y[..n].to_vec(), y[n..2 * n].to_vec())?;
        Ok((s, y[2 * n..].to_vec()))
    }
}

impl OdeSystem for WaveFlow<'_> {
    fn dim(&self) -> usize {
        3 * self.n
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        let n = self.n;
        let (s, c) = self.split(t, y)?;
        let acc = acceleration(&s, &self.model)?;
        let blocks = build_blocks(&s, self.lambda, self.lattice)?;
        dy[..n].copy_from_slice(&s.v);
        dy[n..2 * n].copy_from_slice(&acc);
        dy[2 * n..].copy_from_slice(&c_dot(&blocks, self.z, &c));
        Ok(())
    }

    fn check(&self, t: f64, y: &[C64]) -> Result<()> {
        let (s, _) = self.split(t, y)?;
        check_separation(&s, &self.model, self.model.collision_threshold())
    }
}

/// Carry `w` along the pole flow, evolving c by ċ = M c, and return the
/// wave data at each requested time after `w.state.t`. The on-shell
/// condition is preserved.
pub fn evolve_wave(
    w: &WaveData,
    lattice: &Lattice,
    times: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<WaveData>> {
    let Some(&t_end) = times.last() else {
        return Ok(Vec::new());
    };
    let n = w.state.n();
    let sys = WaveFlow {
        lattice,
        model: Model::Elliptic(*lattice),
        z: w.z,
        lambda: w.lambda,
        n,
    };
    let y0: Vec<C64> = w
        .state
        .x
        .iter()
        .chain(&w.state.v)
        .chain(&w.c)
        .copied()
        .collect();
    let out = Dopri5::new(rel_tol, abs_tol)
        .solve(&sys, w.state.t, &y0, t_end, &Samples::At(times.to_vec()))
        .map_err(|f| f.error)?;
    out.times
        .iter()
        .zip(&out.states)
        .skip(1)
        .map(|(&t, y)| {
            let (state, c) = sys.split(t, y)?;
            Ok(WaveData {
                z: w.z,
                lambda: w.lambda,
                c,
                state,
            })
        })
        .collect()
}
