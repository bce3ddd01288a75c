//! Beurling transforms of polynomials reduced to contour integrals.
//!
//! With `∂_w̄ F = P`, Stokes' theorem on `Ω ∖ B(z,ε)` gives, for `z ∈ Ω`,
//! `B_Ω P(z) = (1/2i) ∮_{∂Ω} K(z−w) F(w) dw + ∂_w F(z)`; for `z ∉ Ω̄` the
//! second term is absent. The contour part is holomorphic in `z` and is
//! integrated in closed form on segments and circles.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::pv::Gradient;
use super::{i_pow, CzError};
use crate::geometry::{BoundaryPiece, Domain, Shape};
use crate::poly::{factorial, MultiIndex, Poly};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `Σ c_{jk} u^j ū^k` with `u = w − center`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZPoly {
    pub coeffs: BTreeMap<(u32, u32), Complex64>,
}

impl ZPoly {
    pub fn constant(c: Complex64) -> Self {
        let mut p = Self::default();
        p.push(0, 0, c);
        p
    }

    fn push(&mut self, j: u32, k: u32, c: Complex64) {
        if c != ZERO {
            *self.coeffs.entry((j, k)).or_insert(ZERO) += c;
        }
    }

    pub fn mul(&self, other: &ZPoly) -> ZPoly {
        let mut out = ZPoly::default();
        for (&(j, k), a) in &self.coeffs {
            for (&(l, m), b) in &other.coeffs {
                out.push(j + l, k + m, a * b);
            }
        }
        out
    }

    pub fn powi(&self, n: u32) -> ZPoly {
        (0..n).fold(ZPoly::constant(Complex64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    pub fn add(&self, other: &ZPoly) -> ZPoly {
        let mut out = self.clone();
        for (&(j, k), c) in &other.coeffs {
            out.push(j, k, *c);
        }
        out
    }

    pub fn scale(&self, t: Complex64) -> ZPoly {
        let mut out = ZPoly::default();
        for (&(j, k), c) in &self.coeffs {
            out.push(j, k, c * t);
        }
        out
    }

    /// Rewrites a real polynomial about `center` in `u, ū`.
    pub fn from_poly(p: &Poly, center: [f64; 2]) -> ZPoly {
        assert_eq!(p.dim(), 2, "complex form needs a planar polynomial");
        let shift = [center[0] - p.center[0], center[1] - p.center[1]];
        let mut x = ZPoly::default();
        x.push(1, 0, Complex64::new(0.5, 0.0));
        x.push(0, 1, Complex64::new(0.5, 0.0));
        x.push(0, 0, Complex64::new(shift[0], 0.0));
        let mut y = ZPoly::default();
        y.push(1, 0, Complex64::new(0.0, -0.5));
        y.push(0, 1, Complex64::new(0.0, 0.5));
        y.push(0, 0, Complex64::new(shift[1], 0.0));
        let mut out = ZPoly::default();
        for (g, c) in &p.coeffs {
            if *c != 0.0 {
                out = out.add(&x.powi(g.0[0]).mul(&y.powi(g.0[1])).scale(Complex64::new(*c, 0.0)));
            }
        }
        out
    }

    pub fn d_u(&self) -> ZPoly {
        let mut out = ZPoly::default();
        for (&(j, k), c) in &self.coeffs {
            if j > 0 {
                out.push(j - 1, k, c * j as f64);
            }
        }
        out
    }

    pub fn d_ubar(&self) -> ZPoly {
        let mut out = ZPoly::default();
        for (&(j, k), c) in &self.coeffs {
            if k > 0 {
                out.push(j, k - 1, c * k as f64);
            }
        }
        out
    }

    /// The primitive in `ū` with no `ū`-free part.
    pub fn primitive_ubar(&self) -> ZPoly {
        let mut out = ZPoly::default();
        for (&(j, k), c) in &self.coeffs {
            out.push(j, k + 1, c / (k + 1) as f64);
        }
        out
    }

    /// `D^α` in real coordinates: `∂_x = ∂_u + ∂_ū`, `∂_y = i(∂_u − ∂_ū)`.
    pub fn real_deriv(&self, alpha: &MultiIndex) -> ZPoly {
        let mut p = self.clone();
        for _ in 0..alpha.0[0] {
            p = p.d_u().add(&p.d_ubar());
        }
        for _ in 0..alpha.0[1] {
            p = p.d_u().add(&p.d_ubar().scale(Complex64::new(-1.0, 0.0))).scale(I);
        }
        p
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        let ub = u.conj();
        self.coeffs.iter().map(|(&(j, k), c)| c * u.powu(j) * ub.powu(k)).sum()
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|(j, k)| j + k).max().unwrap_or(0)
    }

    /// Coefficients in `u` after substituting `ū = p + q u`.
    fn on_line(&self, p: Complex64, q: Complex64) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.degree() as usize + 1];
        for (&(j, k), c) in &self.coeffs {
            let mut binom = 1.0;
            for i in 0..=k {
                // C(k, i) p^{k−i} q^i u^{j+i}
                out[(j + i) as usize] += c * binom * p.powu(k - i) * q.powu(i);
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
        }
        out
    }
}

/// Real and imaginary parts of `(w−c)^a (w̄−c̄)^b` as polynomials in `x, y`.
pub fn complex_monomial(a: u32, b: u32, center: [f64; 2]) -> (Poly, Poly) {
    let mut re = Poly::zero(center.to_vec());
    let mut im = Poly::zero(center.to_vec());
    let binom = |n: u32, k: u32| factorial(n) / (factorial(k) * factorial(n - k));
    for p in 0..=a {
        for q in 0..=b {
            let c = binom(a, p) * binom(b, q) * i_pow(p) * i_pow(3 * q);
            let g = MultiIndex(vec![a + b - p - q, p + q]);
            *re.coeffs.entry(g.clone()).or_insert(0.0) += c.re;
            *im.coeffs.entry(g).or_insert(0.0) += c.im;
        }
    }
    (re, im)
}

/// Taylor shift: coefficients of `g(s + ζ)` in `s`.
fn shift(coeffs: &[Complex64], zeta: Complex64) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = c[j + 1] * zeta;
            c[j] += t;
        }
    }
    c
}

/// `d^m/dz^m` of `(1/2i) ∮_{∂Ω} K(z−w) F(w) dw`, with `F` expanded about
/// `center`.
fn contour_part(domain: &Domain, f: &ZPoly, center: [f64; 2], z: Complex64, m: u32) -> Result<Complex64, CzError> {
    let c = Complex64::new(center[0], center[1]);
    let zeta = z - c;
    let front = -factorial(m + 1) / (2.0 * PI * I);
    match &domain.shape {
        Shape::Disk { radius, .. } => {
            // ū = ρ²/u on the circle. Inside, u^e (u−ζ)^{−2−m} leaves the
            // residue at ζ for e ≥ 0; outside, the residue at 0 for e < 0.
            let inside = zeta.norm() < *radius;
            let mut acc = ZERO;
            for (&(j, k), coef) in &f.coeffs {
                let e = j as i64 - k as i64;
                let binom = (0..=m as i64).map(|i| (e - i) as f64).product::<f64>() / factorial(m + 1);
                let w = if inside && e >= 0 {
                    binom
                } else if !inside && e < 0 {
                    -binom
                } else {
                    0.0
                };
                if w != 0.0 {
                    acc += coef * radius.powi(2 * k as i32) * w * zeta.powi((e - m as i64 - 1) as i32);
                }
            }
            Ok(-factorial(m + 1) * acc)
        }
        Shape::Polygon { .. } => {
            let mut acc = ZERO;
            for piece in domain.boundary_pieces()? {
                let BoundaryPiece::Segment { a, b } = piece else { unreachable!() };
                let (a, b) = (Complex64::new(a[0], a[1]) - c, Complex64::new(b[0], b[1]) - c);
                let q = (b - a).conj() / (b - a);
                let p = a.conj() - q * a;
                let in_s = shift(&f.on_line(p, q), zeta);
                let (sa, sb) = (a - zeta, b - zeta);
                for (e, h) in in_s.iter().enumerate() {
                    if *h == ZERO {
                        continue;
                    }
                    let n = e as i32 - 2 - m as i32;
                    let integral = if n == -1 { (sb / sa).ln() } else { (sb.powi(n + 1) - sa.powi(n + 1)) / (n + 1) as f64 };
                    acc += h * integral;
                }
            }
            Ok(front * acc)
        }
        Shape::Graph { .. } => Err(CzError::Unsupported("contour evaluation needs a disk or polygon".into())),
    }
}

fn expansion_center(domain: &Domain, z: [f64; 2]) -> [f64; 2] {
    match &domain.shape {
        Shape::Disk { center, .. } => *center,
        _ => z,
    }
}

fn prepare(domain: &Domain, p: &Poly, z: [f64; 2]) -> Result<([f64; 2], ZPoly, bool), CzError> {
    if domain.dim() != 2 || p.dim() != 2 {
        return Err(CzError::Unsupported("contour evaluation is planar".into()));
    }
    if domain.dist_to_boundary(&z) < 1e-6 {
        return Err(CzError::NearBoundary(z));
    }
    let center = expansion_center(domain, z);
    let f = ZPoly::from_poly(p, center).primitive_ubar();
    Ok((center, f, domain.contains(&z)))
}

/// `D^α B_Ω P(z)` for a polynomial `P` on a disk or polygon.
pub fn boundary_grad(domain: &Domain, p: &Poly, z: [f64; 2], alpha: &MultiIndex) -> Result<Complex64, CzError> {
    let (center, f, inside) = prepare(domain, p, z)?;
    let zc = Complex64::new(z[0], z[1]);
    let mut v = i_pow(alpha.0[1]) * contour_part(domain, &f, center, zc, alpha.modulus())?;
    if inside {
        v += f.d_u().real_deriv(alpha).eval(zc - Complex64::new(center[0], center[1]));
    }
    Ok(v)
}

/// `B_Ω P(z)` for a polynomial `P` on a disk or polygon.
pub fn boundary_transform(domain: &Domain, p: &Poly, z: [f64; 2]) -> Result<Complex64, CzError> {
    boundary_grad(domain, p, z, &MultiIndex::zeros(2))
}

/// All partials of order `order` of `B_Ω P(z)`.
pub fn boundary_gradient(domain: &Domain, p: &Poly, z: [f64; 2], order: u32) -> Result<Gradient, CzError> {
    let (center, f, inside) = prepare(domain, p, z)?;
    let zc = Complex64::new(z[0], z[1]);
    let h = contour_part(domain, &f, center, zc, order)?;
    let g = f.d_u();
    let zeta = zc - Complex64::new(center[0], center[1]);
    let parts = MultiIndex::of_order(2, order)
        .into_iter()
        .map(|alpha| {
            let mut v = i_pow(alpha.0[1]) * h;
            if inside {
                v += g.real_deriv(&alpha).eval(zeta);
            }
            (alpha, v)
        })
        .collect();
    Ok(Gradient { parts, error: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_disk_at, make_polygon};

    #[test]
    fn complex_monomials_evaluate() {
        let (re, im) = complex_monomial(2, 1, [0.1, 0.2]);
        let w = Complex64::new(0.4, -0.3);
        let u = w - Complex64::new(0.1, 0.2);
        let want = u * u * u.conj();
        assert!((re.eval(&[w.re, w.im]) - want.re).abs() < 1e-15);
        assert!((im.eval(&[w.re, w.im]) - want.im).abs() < 1e-15);
    }

    #[test]
    fn from_poly_round_trips() {
        let (re, _) = complex_monomial(1, 2, [0.3, -0.1]);
        let zp = ZPoly::from_poly(&re, [0.0, 0.5]);
        let x = [0.7, 0.2];
        let v = zp.eval(Complex64::new(x[0], x[1] - 0.5));
        assert!((v.re - re.eval(&x)).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn disk_values() {
        let disk = make_disk(1.0).unwrap();
        let one = Poly::constant(vec![0.0, 0.0], 1.0);
        let z = [0.3, -0.2];
        assert!(boundary_transform(&disk, &one, z).unwrap().norm() < 1e-15);
        // B(χ_𝔻)(z) = −1/z² outside the disk.
        let out = boundary_transform(&disk, &one, [2.0, 1.0]).unwrap();
        let zz = Complex64::new(2.0, 1.0);
        assert!((out + 1.0 / (zz * zz)).norm() < 1e-14);
        // P = z gives z̄ inside.
        let (re, im) = complex_monomial(1, 0, [0.0, 0.0]);
        let v = boundary_transform(&disk, &re, z).unwrap() + I * boundary_transform(&disk, &im, z).unwrap();
        assert!((v - Complex64::new(0.3, 0.2)).norm() < 1e-14);
    }

    #[test]
    fn shifted_disk_constant_vanishes() {
        let disk = make_disk_at([0.5, -1.0], 2.0).unwrap();
        let one = Poly::constant(vec![0.0, 0.0], 1.0);
        assert!(boundary_transform(&disk, &one, [0.7, -0.4]).unwrap().norm() < 1e-14);
    }

    #[test]
    fn square_gradient_matches_differences() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let (re, _) = complex_monomial(1, 1, [0.5, 0.5]);
        let x = [0.3, 0.6];
        let h = 1e-4;
        let g = boundary_gradient(&sq, &re, x, 1).unwrap();
        for (k, (_, v)) in g.parts.iter().enumerate() {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (boundary_transform(&sq, &re, xp).unwrap() - boundary_transform(&sq, &re, xm).unwrap()) / (2.0 * h);
            assert!((fd - v).norm() < 1e-6, "{fd} vs {v}");
        }
    }

    #[test]
    fn near_boundary_is_an_error() {
        let disk = make_disk(1.0).unwrap();
        let one = Poly::constant(vec![0.0, 0.0], 1.0);
        assert!(matches!(boundary_transform(&disk, &one, [1.0 - 1e-8, 0.0]), Err(CzError::NearBoundary(_))));
    }
}
