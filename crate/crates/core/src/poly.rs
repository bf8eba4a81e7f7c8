//! Dense complex polynomials and a simultaneous (Aberth–Ehrlich) root finder.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Polynomial with complex coefficients, stored lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        p.trim_exact();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// `c0 + c1·x`
    pub fn linear(c0: Complex64, c1: Complex64) -> Self {
        Self::new(vec![c0, c1])
    }

    /// `lead · Π (x − r_k)`
    pub fn from_roots(lead: Complex64, roots: &[Complex64]) -> Self {
        roots
            .iter()
            .fold(Self::constant(lead), |acc, &r| &acc * &Self::linear(-r, ONE))
    }

    fn trim_exact(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == ZERO) {
            self.coeffs.pop();
        }
    }

    /// Drop leading coefficients below `rel_tol` times the largest one.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut coeffs = self.coeffs.clone();
        while matches!(coeffs.last(), Some(c) if c.norm() <= rel_tol * scale) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    /// `Σ |c_k| |x|^k`, the natural scale of rounding errors in `eval(x)`.
    pub fn abs_scale(&self, x: Complex64) -> f64 {
        let r = x.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Substitute `x = a·y + b` and return the polynomial in `y`.
    pub fn compose_affine(&self, a: Complex64, b: Complex64) -> Self {
        let lin = Self::linear(b, a);
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, &c| &(&acc * &lin) + &Self::constant(c))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or(ZERO);
        Poly::new((0..n).map(|k| get(self, k) + get(rhs, k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| -c).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion.
pub fn poly_det(m: &[Vec<Poly>]) -> Poly {
    let n = m.len();
    match n {
        0 => Poly::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Poly::zero();
            for col in 0..n {
                if m[0][col].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Poly>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != col)
                            .map(|(_, p)| p.clone())
                            .collect()
                    })
                    .collect();
                let term = &m[0][col] * &poly_det(&minor);
                acc = if col % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// Tuning knobs for [`roots`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub max_iterations: usize,
    /// Relative correction size at which the simultaneous iteration stops.
    pub tolerance: f64,
    /// Newton polishing stops once `|p(z)| ≤ polish_residual · Σ|c_k||z|^k`.
    pub polish_residual: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-14,
            polish_residual: 1e-12,
        }
    }
}

/// All roots of `p`, found simultaneously by Aberth–Ehrlich iteration and
/// then Newton-polished on the original coefficients.
pub fn roots(p: &Poly) -> Result<Vec<Complex64>> {
    roots_with(p, RootOptions::default())
}

pub fn roots_with(p: &Poly, opts: RootOptions) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if p.is_zero() {
        return Err(Error::Domain("the zero polynomial has no isolated roots".into()));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    // roots at the origin split off exactly
    let zeros_at_origin = p.coeffs.iter().take_while(|c| **c == ZERO).count();
    let reduced = Poly::new(p.coeffs[zeros_at_origin..].to_vec());
    let mut found = vec![ZERO; zeros_at_origin];
    found.extend(aberth(&reduced, opts)?);
    for z in found.iter_mut().skip(zeros_at_origin) {
        *z = newton_polish(p, *z, opts.polish_residual);
    }
    Ok(found)
}

fn aberth(p: &Poly, opts: RootOptions) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Ok(vec![]);
    }
    let lead = p.leading();
    if n == 1 {
        return Ok(vec![-p.coeffs[0] / lead]);
    }
    // monic, centred on the root centroid and scaled to a unit root radius
    let monic = p.scale(ONE / lead);
    let centre = -monic.coeffs[n - 1] / n as f64;
    let shifted = monic.compose_affine(ONE, centre);
    let radius = root_radius(&shifted);
    let q = shifted.compose_affine(Complex64::new(radius, 0.0), ZERO);
    let q = q.scale(ONE / q.leading());
    let dq = q.derivative();

    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut converged = vec![false; n];
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let zi = z[i];
            let pv = q.eval(zi);
            if pv == ZERO {
                converged[i] = true;
                continue;
            }
            let ratio = pv / dq.eval(zi);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - z[j];
                    if d == ZERO {
                        Complex64::new(1e300, 0.0)
                    } else {
                        ONE / d
                    }
                })
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[i] = zi - step;
            let rel = step.norm() / (1.0 + zi.norm());
            if rel < opts.tolerance {
                converged[i] = true;
            }
            max_step = max_step.max(rel);
        }
        if converged.iter().all(|&c| c) || max_step < opts.tolerance {
            break;
        }
    }
    let unscale = |w: Complex64| w * radius + centre;
    if !converged.iter().all(|&c| c) {
        // accept stagnation at roundoff level (clustered or repeated roots)
        let ok = z.iter().all(|&w| q.eval(w).norm() <= 1e-9 * q.abs_scale(w));
        if !ok {
            return Err(Error::RootNonConvergence {
                iterations,
                partial: z.into_iter().map(unscale).collect(),
            });
        }
    }
    Ok(z.into_iter().map(unscale).collect())
}

/// Cauchy-style bound used to normalize the root cloud to unit size.
fn root_radius(p: &Poly) -> f64 {
    let n = p.degree();
    let lead = p.leading().norm();
    let r = (0..n)
        .map(|k| (p.coeffs[k].norm() / lead).powf(1.0 / (n - k) as f64))
        .fold(0.0, f64::max);
    if r > 0.0 && r.is_finite() {
        r
    } else {
        1.0
    }
}

/// Newton iteration on `p` until the backward error is below `residual`.
pub fn newton_polish(p: &Poly, mut z: Complex64, residual: f64) -> Complex64 {
    for _ in 0..20 {
        let (v, dv) = p.eval_with_derivative(z);
        if v.norm() <= residual * p.abs_scale(z) * 1e-3 || dv == ZERO {
            break;
        }
        let step = v / dv;
        let candidate = z - step;
        // keep the better of the two; Newton may overshoot near clusters
        if p.eval(candidate).norm() <= v.norm() {
            z = candidate;
        } else {
            break;
        }
        if step.norm() <= 1e-17 * z.norm() {
            break;
        }
    }
    z
}

/// Backward error `|p(z)| / Σ|c_k||z|^k`.
pub fn relative_residual(p: &Poly, z: Complex64) -> f64 {
    let s = p.abs_scale(z);
    if s == 0.0 {
        0.0
    } else {
        p.eval(z).norm() / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn matches(found: &[Complex64], expected: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; found.len()];
        expected.iter().all(|e| {
            let best = (0..found.len())
                .filter(|&i| !used[i])
                .min_by(|&a, &b| (found[a] - e).norm().partial_cmp(&(found[b] - e).norm()).unwrap());
            match best {
                Some(i) if (found[i] - e).norm() <= tol * (1.0 + e.norm()) => {
                    used[i] = true;
                    true
                }
                _ => false,
            }
        })
    }

    #[test]
    fn quadratic_closed_form() {
        // x² − 3x + 2
        let p = Poly::from_real(&[2.0, -3.0, 1.0]);
        let r = roots(&p).unwrap();
        assert!(matches(&r, &[c(1.0, 0.0), c(2.0, 0.0)], 1e-14));
    }

    #[test]
    fn planted_roots_recovered() {
        let planted = [c(36.2, -0.3), c(36.4, 0.05), c(36.7, -0.06), c(37.1, 0.12)];
        let p = Poly::from_roots(c(2.0, -1.0), &planted);
        let r = roots(&p).unwrap();
        assert!(matches(&r, &planted, 1e-8 / 37.0));
    }

    #[test]
    fn zero_roots_split() {
        let p = Poly::from_roots(ONE, &[ZERO, ZERO, c(1.0, 1.0)]);
        let r = roots(&p).unwrap();
        assert_eq!(r.iter().filter(|z| **z == ZERO).count(), 2);
        assert!(matches(&r, &[c(1.0, 1.0)], 1e-14));
    }

    #[test]
    fn double_root_is_found_to_sqrt_eps() {
        let p = Poly::from_roots(ONE, &[c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.5)]);
        let r = roots(&p).unwrap();
        assert!(matches(&r, &[c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.5)], 1e-6));
    }

    #[test]
    fn arithmetic_and_evaluation() {
        let a = Poly::from_real(&[1.0, 2.0]);
        let b = Poly::from_real(&[-1.0, 0.0, 3.0]);
        let prod = &a * &b;
        let x = c(0.3, -1.2);
        assert!((prod.eval(x) - a.eval(x) * b.eval(x)).norm() < 1e-14);
        let (v, dv) = prod.eval_with_derivative(x);
        assert!((v - prod.eval(x)).norm() < 1e-14);
        assert!((dv - prod.derivative().eval(x)).norm() < 1e-14);
        let sh = prod.compose_affine(c(2.0, 0.0), c(1.0, 0.0));
        assert!((sh.eval(x) - prod.eval(x * 2.0 + 1.0)).norm() < 1e-12);
        assert!((&a - &a).is_zero());
    }

    #[test]
    fn poly_det_matches_numeric() {
        // [[x, 1], [2, x+1]] → x² + x − 2
        let m = vec![
            vec![Poly::from_real(&[0.0, 1.0]), Poly::one()],
            vec![Poly::from_real(&[2.0]), Poly::from_real(&[1.0, 1.0])],
        ];
        assert_eq!(poly_det(&m), Poly::from_real(&[-2.0, 1.0, 1.0]));
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(roots(&Poly::from_real(&[3.0])).unwrap().is_empty());
        assert!(roots(&Poly::zero()).is_err());
    }
}
