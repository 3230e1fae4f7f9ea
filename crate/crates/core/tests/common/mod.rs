//! Test-only oracles and state generators.
//!
//! The Weierstrass oracle sums the lattice row by row: each row
//! {c + 2mω : m ∈ Z} is summed in closed form with trigonometric functions,
//! and the rows c = 2nω′ are added for |n| ≤ ROWS. It shares no code with
//! the θ-series evaluators in the library.

#![allow(dead_code)]

use bkp_core::{acceleration, Lattice, Model, PoleState, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ROWS: i64 = 12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn csc2(w: C64) -> C64 {
    let s = w.sin();
    1.0 / (s * s)
}

fn cot(w: C64) -> C64 {
    w.cos() / w.sin()
}

/// Weierstrass functions by row summation over a raw (ω, ω′) pair.
#[derive(Debug, Clone, Copy)]
pub struct RowOracle {
    pub omega: C64,
    pub omega_prime: C64,
    k: C64,
}

impl RowOracle {
    pub fn new(omega: C64, omega_prime: C64) -> Self {
        RowOracle {
            omega,
            omega_prime,
            k: std::f64::consts::PI / (2.0 * omega),
        }
    }

    pub fn of(lattice: &Lattice) -> Self {
        Self::new(lattice.omega(), lattice.omega_prime())
    }

    fn rows(&self) -> impl Iterator<Item = C64> + '_ {
        (-ROWS..=ROWS)
            .filter(|&n| n != 0)
            .map(move |n| 2.0 * n as f64 * self.omega_prime)
    }

    pub fn wp(&self, z: C64) -> C64 {
        let k = self.k;
        let mut s = csc2(k * z) - 1.0 / 3.0;
        for cn in self.rows() {
            s += csc2(k * (z + cn)) - csc2(k * cn);
        }
        k * k * s
    }

    pub fn wp_prime(&self, z: C64) -> C64 {
        let k = self.k;
        let term = |w: C64| -2.0 * csc2(w) * cot(w);
        let mut s = term(k * z);
        for cn in self.rows() {
            s += term(k * (z + cn));
        }
        k * k * k * s
    }

    /// ℘″ = 6 Σ (z − w)⁻⁴
    pub fn wp_second(&self, z: C64) -> C64 {
        let k = self.k;
        let term = |w: C64| {
            let q = csc2(w);
            q * q - 2.0 / 3.0 * q
        };
        let mut s = term(k * z);
        for cn in self.rows() {
            s += term(k * (z + cn));
        }
        6.0 * k.powi(4) * s
    }

    /// ℘‴ = −24 Σ (z − w)⁻⁵
    pub fn wp_third(&self, z: C64) -> C64 {
        let k = self.k;
        let term = |w: C64| {
            let q = csc2(w);
            let ct = cot(w);
            -4.0 * q * q * ct + 4.0 / 3.0 * q * ct
        };
        let mut s = term(k * z);
        for cn in self.rows() {
            s += term(k * (z + cn));
        }
        6.0 * k.powi(5) * s
    }

    pub fn zeta(&self, z: C64) -> C64 {
        let k = self.k;
        let mut s = k * cot(k * z) + z * k * k / 3.0;
        for cn in self.rows() {
            s += k * cot(k * (z + cn)) - k * cot(k * cn) + z * k * k * csc2(k * cn);
        }
        s
    }

    /// ln σ up to a multiple of 2πi.
    pub fn ln_sigma(&self, z: C64) -> C64 {
        let k = self.k;
        let mut s = ((k * z).sin() / k).ln() + z * z * k * k / 6.0;
        for cn in self.rows() {
            s += ((k * (cn - z)).sin() / (k * cn).sin()).ln()
                + z * k * cot(k * cn)
                + 0.5 * z * z * k * k * csc2(k * cn);
        }
        s
    }

    pub fn sigma(&self, z: C64) -> C64 {
        self.ln_sigma(z).exp()
    }

    /// Σ′ w⁻⁴
    pub fn g4_sum(&self) -> C64 {
        let k = self.k;
        let mut s = c(1.0 / 45.0, 0.0);
        for cn in self.rows() {
            let q = csc2(k * cn);
            s += q * q - 2.0 / 3.0 * q;
        }
        k.powi(4) * s
    }

    /// Σ′ w⁻⁶
    pub fn g6_sum(&self) -> C64 {
        let k = self.k;
        let mut s = c(2.0 / 945.0, 0.0);
        for cn in self.rows() {
            let q = csc2(k * cn);
            s += q * q * q - q * q + 2.0 / 15.0 * q;
        }
        k.powi(6) * s
    }

    pub fn g2(&self) -> C64 {
        60.0 * self.g4_sum()
    }

    pub fn g3(&self) -> C64 {
        140.0 * self.g6_sum()
    }

    pub fn eta(&self) -> C64 {
        self.zeta(self.omega)
    }

    pub fn eta_prime(&self) -> C64 {
        self.zeta(self.omega_prime)
    }

    /// Φ(x, λ) from the oracle σ and ζ.
    pub fn phi(&self, x: C64, lambda: C64) -> C64 {
        (self.ln_sigma(x + lambda)
            - self.ln_sigma(lambda)
            - self.ln_sigma(x)
            - self.zeta(lambda) * x)
            .exp()
    }

    /// `order`-th x-derivative of Φ by the trapezoidal Cauchy integral on a
    /// circle of radius `r` around `x`.
    pub fn phi_deriv(&self, x: C64, lambda: C64, order: u32, r: f64) -> C64 {
        const POINTS: usize = 96;
        let mut s = c(0.0, 0.0);
        for j in 0..POINTS {
            let e = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / POINTS as f64);
            s += self.phi(x + r * e, lambda) / e.powu(order);
        }
        let fact: f64 = (1..=order).map(f64::from).product();
        s * fact / (POINTS as f64 * r.powi(order as i32))
    }
}

/// Brute-force square truncation |m|, |n| ≤ radius of the lattice sums.
pub struct BruteSums {
    pub wp: C64,
    pub zeta: C64,
    pub g4: C64,
}

pub fn brute_sums(omega: C64, omega_prime: C64, z: C64, radius: i64) -> BruteSums {
    let mut wp = 1.0 / (z * z);
    let mut zeta = 1.0 / z;
    let mut g4 = c(0.0, 0.0);
    for m in -radius..=radius {
        for n in -radius..=radius {
            if m == 0 && n == 0 {
                continue;
            }
            let w = 2.0 * m as f64 * omega + 2.0 * n as f64 * omega_prime;
            let d = z - w;
            wp += 1.0 / (d * d) - 1.0 / (w * w);
            zeta += 1.0 / d + 1.0 / w + z / (w * w);
            g4 += 1.0 / (w * w * w * w);
        }
    }
    BruteSums { wp, zeta, g4 }
}

/// Uniform point of the centred fundamental cell.
pub fn cell_point(rng: &mut impl Rng, lattice: &Lattice) -> C64 {
    let a: f64 = rng.gen_range(-0.5..0.5);
    let b: f64 = rng.gen_range(-0.5..0.5);
    2.0 * (a * lattice.omega() + b * lattice.omega_prime())
}

/// Cell point at least `guard · min_period` from the lattice.
pub fn guarded_point(rng: &mut impl Rng, lattice: &Lattice, guard: f64) -> C64 {
    loop {
        let z = cell_point(rng, lattice);
        if lattice.distance_to_lattice(z) > guard * lattice.min_period() {
            return z;
        }
    }
}

pub fn complex_in_disk(rng: &mut impl Rng, radius: f64) -> C64 {
    loop {
        let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if z.norm() <= 1.0 {
            return z * radius;
        }
    }
}

/// Random state whose pairwise reduced separations all exceed
/// `sep · min_period`, velocities in the disk of radius `vmax`.
pub fn random_state(
    rng: &mut impl Rng,
    lattice: &Lattice,
    n: usize,
    sep: f64,
    vmax: f64,
) -> PoleState {
    loop {
        let x: Vec<C64> = (0..n).map(|_| cell_point(rng, lattice)).collect();
        let ok = (0..n).all(|i| {
            (i + 1..n)
                .all(|j| lattice.distance_to_lattice(x[i] - x[j]) > sep * lattice.min_period())
        });
        if ok {
            let v = (0..n).map(|_| complex_in_disk(rng, vmax)).collect();
            return PoleState::new(0.0, x, v).unwrap();
        }
    }
}

/// Spectral parameter λ whose sums with every pairwise difference stay
/// `guard · min_period` away from the lattice.
pub fn random_lambda(rng: &mut impl Rng, lattice: &Lattice, s: &PoleState, guard: f64) -> C64 {
    let g = guard * lattice.min_period();
    loop {
        let l = cell_point(rng, lattice);
        if lattice.distance_to_lattice(l) <= g {
            continue;
        }
        let ok = s.x.iter().all(|xi| {
            s.x.iter()
                .all(|xj| xi == xj || lattice.distance_to_lattice(xi - xj + l) > g)
        });
        if ok {
            return l;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Three poles on the square lattice with half period 1.5; the run stays
/// collision-free (separation ≥ 0.9) through t = 0.5.
pub fn three_pole_square() -> (Lattice, PoleState) {
    let lat = Lattice::square(1.5);
    let s = PoleState::new(
        0.0,
        vec![c(0.1, 0.05), c(1.2, -0.3), c(-0.4, 1.1)],
        vec![c(0.3, -0.2), c(-0.1, 0.4), c(0.2, 0.1)],
    )
    .unwrap();
    (lat, s)
}

pub fn two_pole_square() -> (Lattice, PoleState) {
    let lat = Lattice::square(1.5);
    let s = PoleState::new(
        0.0,
        vec![c(0.1, 0.05), c(1.3, 0.9)],
        vec![c(0.3, -0.2), c(-0.1, 0.4)],
    )
    .unwrap();
    (lat, s)
}

/// Coefficients R_0..R_4 of det(3(z² − ℘(λ)) − L) at N = 2, expanded by hand.
pub fn closed_form_two(lattice: &Lattice, s: &PoleState, lambda: C64) -> Vec<C64> {
    let p = lattice.wp(lambda, 0).unwrap();
    let dp = lattice.wp(lambda, 1).unwrap();
    let pp = lattice.wp(s.x[0] - s.x[1], 0).unwrap();
    let (v1, v2) = (s.v[0], s.v[1]);
    let i1 = v1 + v2;
    vec![
        -3.0 * p * i1 + v1 * v2 - 6.0 * i1 * pp - 27.0 * p * p + 9.0 * lattice.g2(),
        -36.0 * dp,
        3.0 * (i1 - 18.0 * p),
        c(0.0, 0.0),
        c(9.0, 0.0),
    ]
}

/// I₁, I₂, I₃ at N = 3 written out term by term.
pub fn three_pole_integrals(lattice: &Lattice, s: &PoleState) -> (C64, C64, C64) {
    let v = &s.v;
    let p = |i: usize, j: usize| lattice.wp(s.x[i] - s.x[j], 0).unwrap();
    let (p12, p13, p23) = (p(0, 1), p(0, 2), p(1, 2));
    let i1 = v[0] + v[1] + v[2];
    let i2 = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        + 6.0 * v[0] * (p12 + p13)
        + 6.0 * v[1] * (p12 + p23)
        + 6.0 * v[2] * (p13 + p23)
        - 36.0 * (p12 * p13 + p12 * p23 + p13 * p23);
    let i3 = (v[0].powi(3) + v[1].powi(3) + v[2].powi(3)) / 3.0
        + 6.0 * v[0] * v[0] * (p12 + p13)
        + 6.0 * v[1] * v[1] * (p12 + p23)
        + 6.0 * v[2] * v[2] * (p13 + p23)
        + 12.0 * (v[0] * v[1] * p12 + v[0] * v[2] * p13 + v[1] * v[2] * p23)
        - 864.0 * p12 * p13 * p23;
    (i1, i2, i3)
}

/// Coefficients R_0..R_6 at N = 3.
pub fn closed_form_three(lattice: &Lattice, s: &PoleState, lambda: C64) -> Vec<C64> {
    let p = lattice.wp(lambda, 0).unwrap();
    let dp = lattice.wp(lambda, 1).unwrap();
    let (g2, g3) = (lattice.g2(), lattice.g3());
    let (i1, i2, i3) = three_pole_integrals(lattice, s);
    vec![
        i3 - i1 * i2 + i1.powi(3) / 6.0 + 3.0 * p * (i2 - 0.5 * i1 * i1) - 27.0 * p * p * i1
            + 9.0 * g2 * i1
            - 135.0 * p.powi(3)
            - 27.0 * g2 * p
            + 216.0 * g3,
        -36.0 * dp * (i1 + 9.0 * p),
        1.5 * i1 * i1 - 3.0 * i2 - 54.0 * p * i1 - 1215.0 * p * p + 243.0 * g2,
        -540.0 * dp,
        9.0 * (i1 - 45.0 * p),
        c(0.0, 0.0),
        c(27.0, 0.0),
    ]
}

/// max_k |a_k − b_k| / (1 + |b_k|)
pub fn coeff_mismatch(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / (1.0 + y.norm()))
        .fold(0.0, f64::max)
}

/// Poles in the disk of radius `radius · min_period` about the origin with
/// pairwise distances above `sep · min_period`.
pub fn cluster_state(
    rng: &mut impl Rng,
    lattice: &Lattice,
    n: usize,
    radius: f64,
    sep: f64,
    vmax: f64,
) -> PoleState {
    let period = lattice.min_period();
    loop {
        let x: Vec<C64> = (0..n)
            .map(|_| complex_in_disk(rng, radius * period))
            .collect();
        let ok = (0..n).all(|i| (i + 1..n).all(|j| (x[i] - x[j]).norm() > sep * period));
        if ok {
            let v = (0..n).map(|_| complex_in_disk(rng, vmax)).collect();
            return PoleState::new(0.0, x, v).unwrap();
        }
    }
}

/// One draw for the matrix identities: unit-scale lattice, clustered poles,
/// λ at least 0.15 periods from every singular combination, |z| ≤ 1.5.
pub fn matrix_draw(rng: &mut impl Rng, lattice: &Lattice, n: usize) -> (PoleState, C64, C64) {
    let s = cluster_state(rng, lattice, n, 0.4, 0.1, 1.0);
    let lambda = random_lambda(rng, lattice, &s, 0.15);
    let z = complex_in_disk(rng, 1.5);
    (s, lambda, z)
}

/// Classical fixed-step RK4 on (x, v).
pub fn rk4(s0: &PoleState, model: &Model, t_end: f64, h: f64) -> PoleState {
    let n = s0.n();
    let steps = ((t_end - s0.t) / h).round() as usize;
    let f = |x: &[C64], v: &[C64]| -> (Vec<C64>, Vec<C64>) {
        let s = PoleState::new(0.0, x.to_vec(), v.to_vec()).unwrap();
        (v.to_vec(), acceleration(&s, model).unwrap())
    };
    let axpy = |a: &[C64], b: &[C64], k: f64| -> Vec<C64> {
        a.iter().zip(b).map(|(p, q)| p + k * q).collect()
    };
    let (mut x, mut v) = (s0.x.clone(), s0.v.clone());
    for _ in 0..steps {
        let (k1x, k1v) = f(&x, &v);
        let (k2x, k2v) = f(&axpy(&x, &k1x, h / 2.0), &axpy(&v, &k1v, h / 2.0));
        let (k3x, k3v) = f(&axpy(&x, &k2x, h / 2.0), &axpy(&v, &k2v, h / 2.0));
        let (k4x, k4v) = f(&axpy(&x, &k3x, h), &axpy(&v, &k3v, h));
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    PoleState::new(t_end, x, v).unwrap()
}

pub fn max_diff(a: &PoleState, b: &PoleState) -> f64 {
    a.x.iter()
        .chain(&a.v)
        .zip(b.x.iter().chain(&b.v))
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}
