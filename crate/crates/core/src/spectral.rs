//! The matrices L(z, λ), M(z, λ), the spectral polynomial
//! R(z, λ) = det(3(z² − ℘(λ)) I − L) and the explicit integrals of motion.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::dynamics::{acceleration, Model, PairTable, PoleState};
use crate::elliptic::Lattice;
use crate::error::{Error, Result};
use crate::linalg::{det, diag, frobenius, CMatrix};

/// Below this |λ| the determinant is evaluated in the gauge e^{ζ(λ)x_ij}Φ,
/// where the plain kernel would overflow.
pub const GAUGE_SWITCH: f64 = 1e-2;

/// Default λ at which the j-limit residual is evaluated.
pub fn j_limit_lambda() -> C64 {
    C64::from_polar(1e-3, PI / 4.0)
}

/// Three generic spectral parameters, scaled by |2ω|.
pub fn default_lambda_samples(lattice: &Lattice) -> Vec<C64> {
    let scale = 2.0 * lattice.omega().norm();
    [
        C64::new(0.31, 0.17),
        C64::new(0.11, -0.23),
        C64::new(0.0, 0.41),
    ]
    .iter()
    .map(|l| l * scale)
    .collect()
}

/// Constituent blocks of L and M for a state and spectral parameter λ.
#[derive(Debug, Clone)]
pub struct MatrixBlocks {
    pub lambda: C64,
    /// Whether Φ entries carry the gauge factor e^{ζ(λ)(x_i − x_k)}.
    pub gauged: bool,
    pub x: CMatrix,
    pub xdot: CMatrix,
    /// Φ(x_ik), Φ′(x_ik), Φ″(x_ik) off the diagonal.
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    /// diag Σ_{j≠i} ℘(x_ij), Σ ℘′(x_ij), Σ ℘‴(x_ij)
    pub d: CMatrix,
    pub dp: CMatrix,
    pub dppp: CMatrix,
    /// ℘(x_ij) and ℘′(x_ij) off the diagonal.
    pub q: CMatrix,
    pub qp: CMatrix,
    /// All-ones matrix.
    pub e: CMatrix,
    /// ζ(x_ij) off the diagonal.
    pub s: CMatrix,
    pub alpha1: C64,
    pub alpha2: C64,
}

impl MatrixBlocks {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Λ(z) = 3z² + 6α₁ = 3(z² − ℘(λ))
    pub fn big_lambda(&self, z: C64) -> C64 {
        3.0 * z * z + 6.0 * self.alpha1
    }

    /// L = −Ẋ − 6zA − 6B + 6D
    pub fn l(&self, z: C64) -> CMatrix {
        -&self.xdot - &self.a * (6.0 * z) - &self.b * C64::new(6.0, 0.0)
            + &self.d * C64::new(6.0, 0.0)
    }

    /// M = −(6zα₁ + 12α₂) I − 6zB − 6zD − 6C + 6D′
    pub fn m(&self, z: C64) -> CMatrix {
        let n = self.n();
        let shift = -(6.0 * z * self.alpha1 + 12.0 * self.alpha2);
        CMatrix::identity(n, n) * shift
            - &self.b * (6.0 * z)
            - &self.d * (6.0 * z)
            - &self.c * C64::new(6.0, 0.0)
            + &self.dp * C64::new(6.0, 0.0)
    }

    /// det(Λ(z) I − L(z))
    pub fn characteristic(&self, z: C64) -> C64 {
        let n = self.n();
        let k = CMatrix::identity(n, n) * self.big_lambda(z) - self.l(z);
        det(&k)
    }
}

fn build(s: &PoleState, lambda: C64, lattice: &Lattice, gauged: bool) -> Result<MatrixBlocks> {
    let n = s.n();
    let zero = CMatrix::zeros(n, n);
    let (mut a, mut b, mut c) = (zero.clone(), zero.clone(), zero.clone());
    let (mut q, mut qp, mut sm) = (zero.clone(), zero.clone(), zero.clone());
    let mut d = vec![C64::new(0.0, 0.0); n];
    let mut dp = d.clone();
    let mut dppp = d.clone();
    let (p_l, dp_l) = lattice.wp_pair(lambda)?;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let xik = s.x[i] - s.x[k];
            let phi = if gauged {
                lattice.phi_gauged(xik, lambda, 2)?
            } else {
                lattice.phi(xik, lambda, 2)?
            };
            a[(i, k)] = phi.value;
            b[(i, k)] = phi.dx1;
            c[(i, k)] = phi.dx2;
            if i < k {
                let w = lattice.wp_all(xik)?;
                let z = lattice.zeta(xik)?;
                q[(i, k)] = w[0];
                q[(k, i)] = w[0];
                qp[(i, k)] = w[1];
                qp[(k, i)] = -w[1];
                sm[(i, k)] = z;
                sm[(k, i)] = -z;
                d[i] += w[0];
                d[k] += w[0];
                dp[i] += w[1];
                dp[k] -= w[1];
                dppp[i] += w[3];
                dppp[k] -= w[3];
            }
        }
    }
    Ok(MatrixBlocks {
        lambda,
        gauged,
        x: diag(&s.x),
        xdot: diag(&s.v),
        a,
        b,
        c,
        d: diag(&d),
        dp: diag(&dp),
        dppp: diag(&dppp),
        q,
        qp,
        e: CMatrix::from_element(n, n, C64::new(1.0, 0.0)),
        s: sm,
        alpha1: -0.5 * p_l,
        alpha2: -dp_l / 6.0,
    })
}

/// All blocks in the plain (un-gauged) frame.
pub fn build_blocks(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<MatrixBlocks> {
    build(s, lambda, lattice, false)
}

/// Blocks conjugated by G = diag(e^{−ζ(λ)x_i}); determinants are unchanged.
pub fn build_blocks_gauged(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<MatrixBlocks> {
    build(s, lambda, lattice, true)
}

/// L(z, λ) and M(z, λ) for one state.
#[derive(Debug, Clone)]
pub struct MatrixPair {
    pub l: CMatrix,
    pub m: CMatrix,
    pub z: C64,
    pub lambda: C64,
    /// 3(z² − ℘(λ))
    pub big_lambda: C64,
}

impl MatrixPair {
    pub fn from_blocks(blocks: &MatrixBlocks, z: C64) -> Self {
        MatrixPair {
            l: blocks.l(z),
            m: blocks.m(z),
            z,
            lambda: blocks.lambda,
            big_lambda: blocks.big_lambda(z),
        }
    }
}

pub fn build_pair(s: &PoleState, z: C64, lambda: C64, lattice: &Lattice) -> Result<MatrixPair> {
    Ok(MatrixPair::from_blocks(
        &build_blocks(s, lambda, lattice)?,
        z,
    ))
}

/// Coefficients of R(z, λ) = Σ_k R_k z^k at fixed λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPoly {
    pub lambda: C64,
    pub coeffs: Vec<C64>,
}

impl SpectralPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_deriv(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, &c)| acc * z + c * k as f64)
    }
}

fn blocks_for_det(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<MatrixBlocks> {
    if lambda.norm() < GAUGE_SWITCH {
        build_blocks_gauged(s, lambda, lattice)
    } else {
        build_blocks(s, lambda, lattice)
    }
}

/// Interpolate R(·, λ) from its values at 2N+1 points on the circle of
/// radius 1 + |℘(λ)|^{1/2}.
pub fn spectral_poly(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<SpectralPoly> {
    let blocks = blocks_for_det(s, lambda, lattice)?;
    Ok(interpolate(&blocks))
}

fn interpolate(blocks: &MatrixBlocks) -> SpectralPoly {
    let n = blocks.n();
    let nodes = 2 * n + 1;
    let r = 1.0 + (2.0 * blocks.alpha1.norm()).sqrt();
    let values: Vec<C64> = (0..nodes)
        .map(|j| {
            let z = C64::from_polar(r, 2.0 * PI * j as f64 / nodes as f64);
            blocks.characteristic(z)
        })
        .collect();
    // the Vandermonde matrix on scaled roots of unity is inverted by a DFT
    let coeffs = (0..nodes)
        .map(|k| {
            let sum: C64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / nodes as f64))
                .sum();
            sum / (nodes as f64 * r.powi(k as i32))
        })
        .collect();
    SpectralPoly {
        lambda: blocks.lambda,
        coeffs,
    }
}

/// R(z, λ) evaluated directly as a determinant.
pub fn spectral_value(s: &PoleState, z: C64, lambda: C64, lattice: &Lattice) -> Result<C64> {
    Ok(blocks_for_det(s, lambda, lattice)?.characteristic(z))
}

/// Explicit integrals of motion. `i3` is only defined for three poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralSet {
    pub i1: C64,
    pub i2: C64,
    pub i3: Option<C64>,
    pub j: C64,
}

/// I₁, I₂, I₃ (N = 3) and J. The rational model uses ℘(x) = 1/x².
pub fn integrals(s: &PoleState, model: &Model) -> Result<IntegralSet> {
    let n = s.n();
    let t = PairTable::new(&s.x, model)?;
    let v = &s.v;
    let i1: C64 = v.iter().sum();
    let mut i2: C64 = v.iter().map(|x| 0.5 * x * x).sum();
    for i in 0..n {
        let mut sum_p = C64::new(0.0, 0.0);
        let mut sum_p2 = C64::new(0.0, 0.0);
        for j in (0..n).filter(|&j| j != i) {
            i2 += 6.0 * v[i] * t.p[i][j];
            sum_p += t.p[i][j];
            sum_p2 += t.p[i][j] * t.p[i][j];
        }
        // ordered pairs j ≠ k, both ≠ i
        i2 -= 18.0 * (sum_p * sum_p - sum_p2);
    }
    let i3 = (n == 3).then(|| {
        let p = &t.p;
        let (p12, p13, p23) = (p[0][1], p[0][2], p[1][2]);
        (v[0].powi(3) + v[1].powi(3) + v[2].powi(3)) / 3.0
            + 6.0 * v[0] * v[0] * (p12 + p13)
            + 6.0 * v[1] * v[1] * (p12 + p23)
            + 6.0 * v[2] * v[2] * (p13 + p23)
            + 12.0 * (v[0] * v[1] * p12 + v[0] * v[2] * p13 + v[1] * v[2] * p23)
            - 864.0 * p12 * p13 * p23
    });
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = C64::new(0.0, 0.0);
        for j in (0..n).filter(|&j| j != i) {
            k[(i, j)] = -6.0 * t.p[i][j];
            d += t.p[i][j];
        }
        k[(i, i)] = v[i] - 6.0 * d;
    }
    Ok(IntegralSet {
        i1,
        i2,
        i3,
        j: det(&k),
    })
}

/// L̇ + \[L, M\] + 12 D′ (L − Λ I) without the −Ẍ term of L̇.
fn triple_without_accel(s: &PoleState, blocks: &MatrixBlocks, z: C64) -> CMatrix {
    let n = s.n();
    let mut a_dot = CMatrix::zeros(n, n);
    let mut b_dot = CMatrix::zeros(n, n);
    let mut d_dot = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            let dv = s.v[i] - s.v[k];
            a_dot[(i, k)] = dv * blocks.b[(i, k)];
            b_dot[(i, k)] = dv * blocks.c[(i, k)];
            d_dot[i] += dv * blocks.qp[(i, k)];
        }
    }
    let d_dot = diag(&d_dot);
    let six = C64::new(6.0, 0.0);
    let l_dot = -a_dot * (6.0 * z) - b_dot * six + &d_dot * six;
    let l = blocks.l(z);
    let m = blocks.m(z);
    let shifted = &l - CMatrix::identity(n, n) * blocks.big_lambda(z);
    l_dot + (&l * &m - &m * &l) + &blocks.dp * shifted * C64::new(12.0, 0.0)
}

fn check_accel(s: &PoleState, accel: &[C64]) -> Result<()> {
    if accel.len() != s.n() {
        return Err(Error::Domain(format!(
            "{} accelerations for {} poles",
            accel.len(),
            s.n()
        )));
    }
    Ok(())
}

/// Frobenius norm of the unconditional matrix identity
/// L̇ + \[L, M\] + 12D′(L − ΛI) + Ẍ − 12D′(6D − Ẋ) − 6Ḋ + 6D‴, for any `accel`.
pub fn manakov_identity_residual(
    s: &PoleState,
    accel: &[C64],
    z: C64,
    lambda: C64,
    lattice: &Lattice,
) -> Result<f64> {
    check_accel(s, accel)?;
    let blocks = build_blocks(s, lambda, lattice)?;
    let n = s.n();
    let mut d_dot = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            d_dot[i] += (s.v[i] - s.v[k]) * blocks.qp[(i, k)];
        }
    }
    let six = C64::new(6.0, 0.0);
    // Ẍ enters both sides with unit weight; it is cancelled before summing
    // so that the residual does not depend on `accel` even through rounding
    let rhs = &blocks.dp * (&blocks.d * six - &blocks.xdot) * C64::new(12.0, 0.0)
        + diag(&d_dot) * six
        - &blocks.dppp * six;
    let lhs = triple_without_accel(s, &blocks, z);
    Ok(frobenius(&(lhs - rhs)))
}

/// Frobenius norm of L̇ + \[L, M\] + 12D′(L − ΛI) with the given accelerations.
pub fn triple_residual_with(
    s: &PoleState,
    accel: &[C64],
    z: C64,
    lambda: C64,
    lattice: &Lattice,
) -> Result<f64> {
    check_accel(s, accel)?;
    let blocks = build_blocks(s, lambda, lattice)?;
    Ok(frobenius(
        &(triple_without_accel(s, &blocks, z) - diag(accel)),
    ))
}

/// As [`triple_residual_with`], with accelerations from the equations of motion.
pub fn triple_residual(s: &PoleState, z: C64, lambda: C64, lattice: &Lattice) -> Result<f64> {
    let accel = acceleration(s, &Model::Elliptic(*lattice))?;
    triple_residual_with(s, &accel, z, lambda, lattice)
}

/// R(1/λ, λ). Below [`GAUGE_SWITCH`] the determinant is assembled in the
/// gauged frame with the large parts of −6zA − 6B and of Λ cancelled
/// analytically: at z = 1/λ the off-diagonal entries of Λ − L are
/// 6Φ̃(x_ik)(ζ(x_ik + λ) − ζ(x_ik) − (ζ(λ) − 1/λ)) and Λ = −3(℘(λ) − λ⁻²).
pub fn j_limit_value(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<C64> {
    if lambda.norm() >= GAUGE_SWITCH {
        return spectral_value(s, 1.0 / lambda, lambda, lattice);
    }
    let n = s.n();
    let t = PairTable::new(&s.x, &Model::Elliptic(*lattice))?;
    let zeta_reg = lattice.zeta_regular(lambda)?;
    let big_lambda = -3.0 * lattice.wp_regular(lambda)?;
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        let mut d = C64::new(0.0, 0.0);
        for j in (0..n).filter(|&j| j != i) {
            let xij = s.x[i] - s.x[j];
            let phi = lattice.phi_gauged(xij, lambda, 0)?.value;
            let g = lattice.zeta(xij + lambda)? - lattice.zeta(xij)? - zeta_reg;
            k[(i, j)] = 6.0 * phi * g;
            d += t.p[i][j];
        }
        k[(i, i)] = big_lambda + s.v[i] - 6.0 * d;
    }
    Ok(det(&k))
}

/// |R(1/λ, λ) − J| at a small λ.
pub fn j_limit_residual_at(s: &PoleState, lattice: &Lattice, lambda: C64) -> Result<f64> {
    let r = j_limit_value(s, lambda, lattice)?;
    let j = integrals(s, &Model::Elliptic(*lattice))?.j;
    Ok((r - j).norm())
}

/// |R(1/λ, λ) − J| at λ = 1e-3 e^{iπ/4}.
pub fn j_limit_residual(s: &PoleState, lattice: &Lattice) -> Result<f64> {
    j_limit_residual_at(s, lattice, j_limit_lambda())
}

/// max_k |R_k(−λ) − (−1)^k R_k(λ)| / (1 + |R_k(λ)|)
pub fn involution_residual(s: &PoleState, lambda: C64, lattice: &Lattice) -> Result<f64> {
    let plus = spectral_poly(s, lambda, lattice)?;
    let minus = spectral_poly(s, -lambda, lattice)?;
    Ok(plus
        .coeffs
        .iter()
        .zip(&minus.coeffs)
        .enumerate()
        .map(|(k, (p, m))| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (m - sign * p).norm() / (1.0 + p.norm())
        })
        .fold(0.0, f64::max))
}

/// ‖L c − Λ c‖ / ‖c‖
pub fn eigen_residual(pair: &MatrixPair, c: &[C64]) -> f64 {
    let cv = DVector::from_column_slice(c);
    let r = &pair.l * &cv - &cv * pair.big_lambda;
    r.norm() / cv.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn state2() -> PoleState {
        PoleState::new(
            0.0,
            vec![c(0.1, 0.05), c(0.42, 0.31)],
            vec![c(0.3, -0.2), c(-0.1, 0.4)],
        )
        .unwrap()
    }

    #[test]
    fn single_pole_blocks_vanish() {
        let lat = Lattice::square(0.5);
        let s = PoleState::new(0.0, vec![c(0.2, 0.1)], vec![c(0.7, -0.3)]).unwrap();
        let b = build_blocks(&s, c(0.2, 0.3), &lat).unwrap();
        for m in [&b.a, &b.b, &b.c, &b.d, &b.dp] {
            assert_eq!(m[(0, 0)], c(0.0, 0.0));
        }
        let pair = MatrixPair::from_blocks(&b, c(0.4, 0.1));
        assert_eq!(pair.l[(0, 0)], -s.v[0]);
        let z = c(0.4, 0.1);
        let expect = -(6.0 * z * b.alpha1 + 12.0 * b.alpha2);
        assert!((pair.m[(0, 0)] - expect).norm() < 1e-14);
    }

    #[test]
    fn single_pole_polynomial() {
        let lat = Lattice::square(0.5);
        let s = PoleState::new(0.0, vec![c(0.2, 0.1)], vec![c(0.7, -0.3)]).unwrap();
        let lambda = c(0.2, 0.3);
        let poly = spectral_poly(&s, lambda, &lat).unwrap();
        let p = lat.wp(lambda, 0).unwrap();
        let expect = [-3.0 * p + s.v[0], c(0.0, 0.0), c(3.0, 0.0)];
        for (a, b) in poly.coeffs.iter().zip(expect) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "{a} vs {b}");
        }
        let ints = integrals(&s, &Model::Elliptic(lat)).unwrap();
        assert_eq!(ints.j, s.v[0]);
        assert!(ints.i3.is_none());
    }

    #[test]
    fn blocks_structure() {
        let lat = Lattice::hexagonal(0.5);
        let s = PoleState::new(
            0.0,
            vec![c(0.1, 0.05), c(0.42, 0.31), c(-0.2, 0.4)],
            vec![c(0.3, -0.2), c(-0.1, 0.4), c(0.2, 0.2)],
        )
        .unwrap();
        let b = build_blocks(&s, c(0.15, -0.27), &lat).unwrap();
        assert!(b.dp.trace().norm() < 1e-10);
        assert!(frobenius(&(&b.s + b.s.transpose())) < 1e-12);
        let pair = MatrixPair::from_blocks(&b, c(0.3, 0.2));
        let rebuilt =
            -&b.xdot - &b.a * (6.0 * c(0.3, 0.2)) - &b.b * c(6.0, 0.0) + &b.d * c(6.0, 0.0);
        assert!(frobenius(&(pair.l - rebuilt)) < 1e-12);
    }

    #[test]
    fn two_pole_closed_form_terms() {
        let lat = Lattice::square(0.5);
        let s = state2();
        let lambda = c(0.23, 0.19);
        let poly = spectral_poly(&s, lambda, &lat).unwrap();
        let (p, dp) = lat.wp_pair(lambda).unwrap();
        let i1 = s.v[0] + s.v[1];
        assert!((poly.coeffs[1] + 36.0 * dp).norm() < 1e-8 * (1.0 + dp.norm()));
        assert!(poly.coeffs[3].norm() < 1e-8);
        assert!((poly.coeffs[2] - 3.0 * (i1 - 18.0 * p)).norm() < 1e-8 * (1.0 + p.norm()));
        assert!((poly.coeffs[4] - 9.0).norm() < 1e-10 * 9.0);
    }

    #[test]
    fn polynomial_matches_determinant_off_nodes() {
        let lat = Lattice::square(0.5);
        let s = state2();
        let lambda = c(0.23, 0.19);
        let poly = spectral_poly(&s, lambda, &lat).unwrap();
        let z = c(-0.7, 1.3);
        let direct = spectral_value(&s, z, lambda, &lat).unwrap();
        assert!((poly.eval(z) - direct).norm() < 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn accel_length_checked() {
        let lat = Lattice::square(0.5);
        let s = state2();
        let r = manakov_identity_residual(&s, &[c(0.0, 0.0)], c(0.1, 0.0), c(0.2, 0.2), &lat);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
