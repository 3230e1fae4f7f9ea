//! Randomized checks of the Φ- and ℘-function identities used in deriving
//! the pole dynamics and the spectral curve.
//!
//! Every case is written as `lhs == rhs`. Identities whose natural form is
//! `expr == 0` are split into two halves so the normalized residual
//! |lhs − rhs| / (1 + |lhs| + |rhs|) stays meaningful.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::elliptic::Lattice;
use crate::error::{Error, Result};

/// Consecutive rejected draws before a case gives up.
pub const MAX_RESAMPLE: usize = 1000;

/// Composite arguments are kept this far (in units of the shortest period)
/// from the lattice.
pub const SAMPLE_GUARD: f64 = 0.05;

/// Offset used by the finite versions of the y → −x limit identities, in
/// units of the shortest period.
pub const LIMIT_OFFSET: f64 = 1e-5;
/// The finite form of A8 cancels two terms of size ε⁻² before comparing
/// against an O(1) left side, so it needs a larger offset.
pub const LIMIT_OFFSET_A8: f64 = 1e-3;
pub const LIMIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IdentityId {
    A1,
    A2,
    A3,
    A5,
    A6,
    A7,
    A8,
    A11,
    A12,
    A13,
    A14,
    A15,
    A16,
    A16a,
    A17,
    A18,
    A19,
    /// cyclic sum of ∂(℘℘) over three points
    #[serde(rename = "a8")]
    CyclicPair,
    /// cyclic sum of ∂(℘℘℘) over four points
    #[serde(rename = "a9")]
    CyclicTriple,
    /// ℘‴ = 12℘℘′
    #[serde(rename = "wp3")]
    Wp3,
    /// det of rows (1, ℘(x_ij), ℘′(x_ij)) over a closed triangle
    #[serde(rename = "det3")]
    Det3,
}

impl IdentityId {
    pub const ALL: [IdentityId; 21] = [
        IdentityId::A1,
        IdentityId::A2,
        IdentityId::A3,
        IdentityId::A5,
        IdentityId::A6,
        IdentityId::A7,
        IdentityId::A8,
        IdentityId::A11,
        IdentityId::A12,
        IdentityId::A13,
        IdentityId::A14,
        IdentityId::A15,
        IdentityId::A16,
        IdentityId::A16a,
        IdentityId::A17,
        IdentityId::A18,
        IdentityId::A19,
        IdentityId::CyclicPair,
        IdentityId::CyclicTriple,
        IdentityId::Wp3,
        IdentityId::Det3,
    ];

    pub fn name(self) -> &'static str {
        use IdentityId::*;
        match self {
            A1 => "A1",
            A2 => "A2",
            A3 => "A3",
            A5 => "A5",
            A6 => "A6",
            A7 => "A7",
            A8 => "A8",
            A11 => "A11",
            A12 => "A12",
            A13 => "A13",
            A14 => "A14",
            A15 => "A15",
            A16 => "A16",
            A16a => "A16a",
            A17 => "A17",
            A18 => "A18",
            A19 => "A19",
            CyclicPair => "a8",
            CyclicTriple => "a9",
            Wp3 => "wp3",
            Det3 => "det3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == name)
    }

    /// Number of free complex arguments. λ counts as one where it appears.
    pub fn arity(self) -> usize {
        use IdentityId::*;
        match self {
            A1 | A2 | A5 | A6 | CyclicPair | Det3 => 3,
            CyclicTriple => 4,
            A16a | Wp3 => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCase {
    pub id: IdentityId,
    pub arity: usize,
    pub tolerance: f64,
}

impl IdentityCase {
    pub fn new(id: IdentityId) -> Self {
        IdentityCase {
            id,
            arity: id.arity(),
            tolerance: 1e-8,
        }
    }

    pub fn all() -> Vec<IdentityCase> {
        IdentityId::ALL.into_iter().map(IdentityCase::new).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub id: IdentityId,
    pub draws: usize,
    pub max_residual: f64,
    /// Arguments of the worst draw as [re, im] pairs.
    pub worst_point: Vec<C64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the case aborted before completing its draws.
    pub error: Option<String>,
}

pub fn normalized_residual(lhs: C64, rhs: C64) -> f64 {
    (lhs - rhs).norm() / (1.0 + lhs.norm() + rhs.norm())
}

/// Arguments that must stay away from the lattice for a draw to be usable.
fn composites(id: IdentityId, a: &[C64]) -> Vec<C64> {
    use IdentityId::*;
    match id {
        A1 | A2 | A5 | A6 => {
            let (x, y, l) = (a[0], a[1], a[2]);
            vec![x, y, l, x + y, x + l, y + l, x + y + l]
        }
        A3 | A7 | A8 | A11 | A12 | A13 | A14 | A15 | A16 | A17 | A18 => {
            let (x, l) = (a[0], a[1]);
            vec![x, l, x + l, x - l]
        }
        A19 => vec![a[0], a[1], a[0] - a[1]],
        A16a | Wp3 => vec![a[0]],
        CyclicPair | CyclicTriple | Det3 => {
            let mut out = Vec::new();
            for i in 0..a.len() {
                for j in i + 1..a.len() {
                    out.push(a[i] - a[j]);
                }
            }
            out
        }
    }
}

/// Both sides of an identity at the given arguments.
pub fn evaluate(id: IdentityId, lattice: &Lattice, a: &[C64]) -> Result<(C64, C64)> {
    use IdentityId::*;
    if a.len() != id.arity() {
        return Err(Error::Domain(format!(
            "{} takes {} arguments, got {}",
            id.name(),
            id.arity(),
            a.len()
        )));
    }
    let wp = |z: C64| lattice.wp_pair(z);
    let zeta = |z: C64| lattice.zeta(z);
    let phi = |z: C64, l: C64| lattice.phi(z, l, 2);
    Ok(match id {
        A1 | A2 | A5 | A6 => {
            let (x, y, l) = (a[0], a[1], a[2]);
            let (fx, fy, fs) = (phi(x, l)?, phi(y, l)?, phi(x + y, l)?);
            let (_, dpx) = wp(x)?;
            let (_, dpy) = wp(y)?;
            let diff = lattice.wp_difference(x, y)?;
            match id {
                A1 => (fx.value * fy.dx1 - fy.value * fx.dx1, fs.value * diff),
                A2 => (
                    fx.value * fy.value,
                    fs.value * (zeta(x)? + zeta(y)? - zeta(x + y + l)? + zeta(l)?),
                ),
                A5 => (
                    fx.value * fy.dx2 - fy.value * fx.dx2,
                    2.0 * fs.dx1 * diff + fs.value * (dpx - dpy),
                ),
                _ => (
                    fx.dx1 * fy.dx2 - fy.dx1 * fx.dx2,
                    fs.dx2 * diff + fs.dx1 * (dpx - dpy),
                ),
            }
        }
        A3 | A7 | A8 | A11 | A12 | A13 | A14 | A15 => {
            let (x, l) = (a[0], a[1]);
            let (f, g) = (phi(x, l)?, phi(-x, l)?);
            let w = lattice.wp_all(x)?;
            let (pl, dpl) = wp(l)?;
            let alpha1 = -0.5 * pl;
            let g2 = lattice.g2();
            match id {
                A3 => (f.value * g.dx1 - g.value * f.dx1, w[1]),
                A7 => (f.value * g.dx2, g.value * f.dx2),
                A8 => (
                    f.dx1 * g.dx2 - g.dx1 * f.dx2,
                    -w[3] / 6.0 + 2.0 * alpha1 * w[1],
                ),
                A11 => (f.value * g.value, pl - w[0]),
                A12 => (f.dx1 * g.value + g.dx1 * f.value, dpl),
                A13 => (f.dx1 * g.dx1, w[0] * w[0] + pl * w[0] + pl * pl - 0.25 * g2),
                A14 => (f.value * g.dx2, pl * pl + pl * w[0] - 2.0 * w[0] * w[0]),
                _ => (f.dx1 * g.dx2, (dpl - w[1]) * (w[0] + 0.5 * pl)),
            }
        }
        A16 | A17 | A18 => {
            let (x, l) = (a[0], a[1]);
            let (px, dpx) = wp(x)?;
            let (pl, dpl) = wp(l)?;
            let den = px - pl;
            match id {
                A16 => (2.0 * zeta(l)? - zeta(l + x)? - zeta(l - x)?, dpl / den),
                A17 => (wp(x + l)?.0 - wp(x - l)?.0, -dpl * dpx / (den * den)),
                _ => (
                    wp(x + l)?.0 + wp(x - l)?.0,
                    0.5 * (dpx * dpx + dpl * dpl) / (den * den) - 2.0 * (px + pl),
                ),
            }
        }
        A16a => {
            let (p, dp) = wp(a[0])?;
            (dp * dp, 4.0 * p * p * p - lattice.g2() * p - lattice.g3())
        }
        Wp3 => {
            let w = lattice.wp_all(a[0])?;
            (w[3], 12.0 * w[0] * w[1])
        }
        A19 => {
            let (x, s) = (a[0], a[1]);
            let (px, dpx) = wp(x)?;
            let (ps, _) = wp(s)?;
            let (pxs, _) = wp(x - s)?;
            (
                2.0 * px * (pxs + ps + px) - dpx * (zeta(x - s)? + zeta(s)? - zeta(x)?),
                px * ps + px * pxs + ps * pxs + 0.25 * lattice.g2(),
            )
        }
        CyclicPair => {
            // ∂_i(℘(x_ij)℘(x_ik)) = ℘′(x_ij)℘(x_ik) + ℘(x_ij)℘′(x_ik)
            let d = |i: usize, j: usize, k: usize| -> Result<C64> {
                let (p1, d1) = wp(a[i] - a[j])?;
                let (p2, d2) = wp(a[i] - a[k])?;
                Ok(d1 * p2 + p1 * d2)
            };
            (d(0, 1, 2)? + d(1, 0, 2)?, -d(2, 0, 1)?)
        }
        CyclicTriple => {
            let d = |i: usize| -> Result<C64> {
                let mut vals = Vec::with_capacity(3);
                for j in (0..4).filter(|&j| j != i) {
                    vals.push(wp(a[i] - a[j])?);
                }
                let (p, q, r) = (vals[0], vals[1], vals[2]);
                Ok(p.1 * q.0 * r.0 + p.0 * q.1 * r.0 + p.0 * q.0 * r.1)
            };
            (d(0)? + d(1)?, -(d(2)? + d(3)?))
        }
        Det3 => {
            let (p1, d1) = wp(a[0] - a[1])?;
            let (p2, d2) = wp(a[1] - a[2])?;
            let (p3, d3) = wp(a[2] - a[0])?;
            // det [[1,p1,d1],[1,p2,d2],[1,p3,d3]] split by sign
            (p2 * d3 + p1 * d2 + d1 * p3, p3 * d2 + p2 * d1 + p1 * d3)
        }
    })
}

fn draw_point(rng: &mut ChaCha8Rng, lattice: &Lattice) -> C64 {
    let a: f64 = rng.gen_range(-0.5..0.5);
    let b: f64 = rng.gen_range(-0.5..0.5);
    2.0 * (a * lattice.omega() + b * lattice.omega_prime())
}

fn draw_args(
    id: IdentityId,
    rng: &mut ChaCha8Rng,
    lattice: &Lattice,
    guard: f64,
) -> Result<Vec<C64>> {
    for _ in 0..MAX_RESAMPLE {
        let args: Vec<C64> = (0..id.arity()).map(|_| draw_point(rng, lattice)).collect();
        if composites(id, &args)
            .iter()
            .all(|&z| lattice.distance_to_lattice(z) > guard)
        {
            return Ok(args);
        }
    }
    Err(Error::ResamplingExhausted {
        case: id.name().into(),
        attempts: MAX_RESAMPLE,
    })
}

fn run(
    case: IdentityCase,
    draws: usize,
    seed: u64,
    mut sample: impl FnMut(&mut ChaCha8Rng) -> Result<(Vec<C64>, C64, C64)>,
) -> Result<IdentityReport> {
    if draws == 0 {
        return Err(Error::Domain("at least one draw is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..draws {
        let (args, lhs, rhs) = sample(&mut rng)?;
        let r = normalized_residual(lhs, rhs);
        // NaN counts as worst
        if !(r <= worst.0) {
            worst = (r, args);
        }
    }
    Ok(IdentityReport {
        id: case.id,
        draws,
        max_residual: worst.0,
        worst_point: worst.1,
        tolerance: case.tolerance,
        passed: worst.0 < case.tolerance,
        error: None,
    })
}

/// Evaluate one identity at `draws` seeded random points of the fundamental
/// cell and report the worst normalized residual.
pub fn verify_identity(
    case: IdentityCase,
    lattice: &Lattice,
    draws: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let guard = SAMPLE_GUARD * lattice.min_period();
    run(case, draws, seed, |rng| {
        let args = draw_args(case.id, rng, lattice, guard)?;
        let (lhs, rhs) = evaluate(case.id, lattice, &args)?;
        Ok((args, lhs, rhs))
    })
}

/// Seed used for the case at `index` within a sweep seeded by `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

/// Run every registered case. A failing case is reported, not propagated.
pub fn verify_all(lattice: &Lattice, draws: usize, seed: u64) -> Vec<IdentityReport> {
    IdentityCase::all()
        .into_iter()
        .enumerate()
        .map(|(k, case)| {
            verify_identity(case, lattice, draws, case_seed(seed, k)).unwrap_or_else(|e| {
                IdentityReport {
                    id: case.id,
                    draws: 0,
                    max_residual: f64::INFINITY,
                    worst_point: Vec::new(),
                    tolerance: case.tolerance,
                    passed: false,
                    error: Some(e.to_string()),
                }
            })
        })
        .collect()
}

/// The y → −x limit cases (A3, A7, A8) checked through their finite
/// parents (A1, A5, A6) at y = −x + ε e^{iθ} with random θ.
pub fn verify_limit_offset(
    id: IdentityId,
    lattice: &Lattice,
    draws: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let parent = match id {
        IdentityId::A3 => IdentityId::A1,
        IdentityId::A7 => IdentityId::A5,
        IdentityId::A8 => IdentityId::A6,
        other => {
            return Err(Error::Domain(format!(
                "{} is not a limit identity",
                other.name()
            )))
        }
    };
    let case = IdentityCase {
        id,
        arity: 2,
        tolerance: LIMIT_TOLERANCE,
    };
    let guard = SAMPLE_GUARD * lattice.min_period();
    let offset = if id == IdentityId::A8 {
        LIMIT_OFFSET_A8
    } else {
        LIMIT_OFFSET
    };
    let eps = offset * lattice.min_period();
    run(case, draws, seed, |rng| {
        let args = draw_args(id, rng, lattice, guard)?;
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let y = -args[0] + C64::from_polar(eps, theta);
        let (lhs, rhs) = evaluate(parent, lattice, &[args[0], y, args[1]])?;
        Ok((args, lhs, rhs))
    })
}
