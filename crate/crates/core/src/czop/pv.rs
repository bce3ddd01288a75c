//! Principal-value evaluation by polar quadrature around the target point,
//! and derivatives of the transform.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{CzError, Kernel};
use crate::geometry::{BoundaryPiece, Domain, Shape};
use crate::poly::{MultiIndex, ScalarField, Shifted};
use crate::quadrature::{adaptive_gk, Adaptive, GaussLegendre};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Exclusion radii `ε_m = first·dist(x,∂Ω)·ratio^m` and quadrature budgets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvSchedule {
    pub first: f64,
    pub ratio: f64,
    pub levels: usize,
    /// Gauss–Legendre nodes per radial piece.
    pub radial_order: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Largest accepted error estimate.
    pub tolerance: f64,
}

impl Default for PvSchedule {
    fn default() -> Self {
        Self {
            first: 0.5,
            ratio: 0.5,
            levels: 4,
            radial_order: 16,
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
            tolerance: 1e-6,
        }
    }
}

impl PvSchedule {
    fn validate(&self) -> Result<(), CzError> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) || !(self.first > 0.0 && self.first < 1.0) || self.levels < 2 {
            return Err(CzError::InvalidOrder(format!(
                "schedule needs ratio and first radius in (0,1) and at least two levels, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// A transform value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub value: Complex64,
    pub error: f64,
    /// Quadrature directions where the kernel exceeded its declared bound.
    pub bound_violations: usize,
}

/// All partials of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub parts: Vec<(MultiIndex, Complex64)>,
    pub error: f64,
}

impl Gradient {
    /// `(Σ_α |D^α|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.parts.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn combine(&self, other: &Gradient, scale: Complex64) -> Gradient {
        Gradient {
            parts: self.parts.iter().zip(&other.parts).map(|((a, u), (_, v))| (a.clone(), u + scale * v)).collect(),
            error: self.error + scale.norm() * other.error,
        }
    }
}

fn planar(domain: &Domain) -> Result<(), CzError> {
    if domain.dim() != 2 || !domain.is_bounded() {
        return Err(CzError::Unsupported("transforms need a bounded planar domain".into()));
    }
    Ok(())
}

fn check_point(domain: &Domain, x: [f64; 2]) -> Result<f64, CzError> {
    let dist = domain.dist_to_boundary(&x);
    let (lo, hi) = domain.bounding_box();
    let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    if dist <= 1e-10 * diam {
        return Err(CzError::NearBoundary(x));
    }
    Ok(dist)
}

/// Angles where the radial intervals change form, seen from `x`.
fn angle_breaks(domain: &Domain, x: [f64; 2]) -> Vec<f64> {
    let mut b = vec![0.0, 2.0 * PI];
    b.extend(domain.vertex_angles(x));
    if let Shape::Disk { center, radius } = &domain.shape {
        let v = [center[0] - x[0], center[1] - x[1]];
        let r = v[0].hypot(v[1]);
        if r > *radius {
            let mid = v[1].atan2(v[0]);
            let half = (radius / r).asin();
            b.extend([(mid - half).rem_euclid(2.0 * PI), (mid + half).rem_euclid(2.0 * PI)]);
        }
    }
    b
}

/// `∫_a^b g(e^s) ds` on `[ln a, ln b]`, split into unit pieces.
fn log_radial<G: FnMut(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, mut g: G) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let pieces = ((lb - la).ceil() as usize).max(1);
    let h = (lb - la) / pieces as f64;
    let mut acc = 0.0;
    for k in 0..pieces {
        let s0 = la + k as f64 * h;
        acc += rule.integrate(s0, s0 + h, |s| g(s.exp()));
    }
    acc
}

struct Polar<'a, K: ?Sized, F: ?Sized> {
    kernel: &'a K,
    domain: &'a Domain,
    f: &'a F,
    x: [f64; 2],
    rule: GaussLegendre,
    sched: PvSchedule,
}

impl<K: Kernel + ?Sized, F: ScalarField + ?Sized> Polar<'_, K, F> {
    fn at(&self, e: [f64; 2], r: f64) -> f64 {
        self.f.eval(&[self.x[0] + r * e[0], self.x[1] + r * e[1]])
    }

    /// `∫_{Ω∖B(x,ε)} D^αK(x−y) f(y) dy`. With `x ∈ Ω` only `α = 0` is
    /// allowed and the `f(x) ln ε` term, which integrates to zero against the
    /// kernel's angular profile, is dropped.
    fn integrate(&self, alpha: &MultiIndex, eps: f64, inside: bool, violations: &mut usize) -> Adaptive {
        let m = alpha.modulus() as i32;
        let fx = if inside { self.f.eval(&self.x) } else { 0.0 };
        let c0 = self.kernel.bound(alpha.modulus());
        let breaks = angle_breaks(self.domain, self.x);
        adaptive_gk(
            |t| {
                let e = [t.cos(), t.sin()];
                let profile = self.kernel.deriv(alpha, &[-e[0], -e[1]]);
                if profile.norm() > c0 * (1.0 + 1e-12) {
                    *violations += 1;
                }
                let mut radial = 0.0;
                for (a, b) in self.domain.ray_intervals(self.x, e) {
                    if inside && a == 0.0 {
                        radial += self.rule.integrate(eps, b, |r| (self.at(e, r) - fx) / r) + fx * b.ln();
                    } else {
                        radial += log_radial(&self.rule, a.max(eps), b, |r| self.at(e, r) * r.powi(-m));
                    }
                }
                profile * radial
            },
            &breaks,
            self.sched.abs_tol,
            self.sched.rel_tol,
            self.sched.max_intervals,
        )
    }
}

/// Lagrange extrapolation of `(ε_m, v_m)` to `ε = 0` with an error estimate
/// from the next-lower-order extrapolant and the propagated quadrature
/// errors.
fn extrapolate(eps: &[f64], vals: &[Complex64], errs: &[f64]) -> (Complex64, f64) {
    let lagrange = |idx: &[usize]| -> (Complex64, f64) {
        let mut v = ZERO;
        let mut e = 0.0;
        for &i in idx {
            let w: f64 = idx.iter().filter(|&&l| l != i).map(|&l| -eps[l] / (eps[i] - eps[l])).product();
            v += w * vals[i];
            e += w.abs() * errs[i];
        }
        (v, e)
    };
    let all: Vec<usize> = (0..eps.len()).collect();
    let (v, qerr) = lagrange(&all);
    let (lower, _) = lagrange(&all[1..]);
    (v, (v - lower).norm() + qerr)
}

/// `T_Ω f(x) = lim_{ε→0} ∫_{Ω∖B(x,ε)} K(x−y) f(y) dy`.
pub fn pv_transform<K: Kernel + ?Sized, F: ScalarField + ?Sized>(
    kernel: &K,
    domain: &Domain,
    f: &F,
    x: [f64; 2],
    sched: &PvSchedule,
) -> Result<Transform, CzError> {
    planar(domain)?;
    sched.validate()?;
    let dist = check_point(domain, x)?;
    if f.vanishes(&MultiIndex::zeros(2)) {
        return Ok(Transform { value: ZERO, error: 0.0, bound_violations: 0 });
    }
    let polar = Polar { kernel, domain, f, x, rule: GaussLegendre::new(sched.radial_order), sched: *sched };
    let zero = MultiIndex::zeros(2);
    let mut violations = 0;
    if !domain.contains(&x) {
        let r = polar.integrate(&zero, 0.0, false, &mut violations);
        let t = Transform { value: r.value, error: r.error, bound_violations: violations };
        return finish(t, r.converged, sched);
    }
    let eps: Vec<f64> = (0..sched.levels).map(|m| sched.first * dist * sched.ratio.powi(m as i32)).collect();
    let mut vals = Vec::new();
    let mut errs = Vec::new();
    let mut converged = true;
    for &e in &eps {
        let r = polar.integrate(&zero, e, true, &mut violations);
        converged &= r.converged;
        vals.push(r.value);
        errs.push(r.error);
    }
    let (value, error) = extrapolate(&eps, &vals, &errs);
    finish(Transform { value, error, bound_violations: violations }, converged, sched)
}

fn finish(t: Transform, converged: bool, sched: &PvSchedule) -> Result<Transform, CzError> {
    if !converged || !(t.error <= sched.tolerance) {
        return Err(CzError::NotConverged { value: t.value, error: t.error });
    }
    Ok(t)
}

/// `∫_{∂Ω} D^βK(x−y) g(y) ν_k(y) dσ(y)` for `x` off the boundary.
fn boundary_layer<K: Kernel + ?Sized, F: ScalarField + ?Sized>(
    kernel: &K,
    domain: &Domain,
    g: &F,
    beta: &MultiIndex,
    k: usize,
    x: [f64; 2],
    sched: &PvSchedule,
) -> Result<Adaptive, CzError> {
    let mut value = ZERO;
    let mut error = 0.0;
    let mut converged = true;
    for piece in domain.boundary_pieces()? {
        let r = match piece {
            BoundaryPiece::Segment { a, b } => {
                let e = [b[0] - a[0], b[1] - a[1]];
                let len = e[0].hypot(e[1]);
                let normal = [e[1] / len, -e[0] / len];
                let proj = (((x[0] - a[0]) * e[0] + (x[1] - a[1]) * e[1]) / (len * len)).clamp(0.0, 1.0);
                adaptive_gk(
                    |t| {
                        let y = [a[0] + t * e[0], a[1] + t * e[1]];
                        kernel.deriv(beta, &[x[0] - y[0], x[1] - y[1]]) * (g.eval(&y) * normal[k] * len)
                    },
                    &[0.0, proj, 1.0],
                    sched.abs_tol,
                    sched.rel_tol,
                    sched.max_intervals,
                )
            }
            BoundaryPiece::Circle { center, radius } => {
                let phi = (x[1] - center[1]).atan2(x[0] - center[0]).rem_euclid(2.0 * PI);
                adaptive_gk(
                    |t| {
                        let normal = [t.cos(), t.sin()];
                        let y = [center[0] + radius * normal[0], center[1] + radius * normal[1]];
                        kernel.deriv(beta, &[x[0] - y[0], x[1] - y[1]]) * (g.eval(&y) * normal[k] * radius)
                    },
                    &[0.0, phi, 2.0 * PI],
                    sched.abs_tol,
                    sched.rel_tol,
                    sched.max_intervals,
                )
            }
        };
        value += r.value;
        error += r.error;
        converged &= r.converged;
    }
    Ok(Adaptive { value, error, converged })
}

/// All partials `D^α T_Ω f(x)` with `|α| = order`.
///
/// Off the closure of `Ω` the kernel derivatives are integrated against
/// `f` directly. Inside, derivatives are moved onto `f` one at a time,
/// each move leaving a boundary layer:
/// `∂_k T_Ω f = T_Ω(∂_k f) − ∫_{∂Ω} K(x−y) f(y) ν_k(y) dσ(y)`.
pub fn grad_transform<K: Kernel + ?Sized, F: ScalarField + ?Sized>(
    kernel: &K,
    domain: &Domain,
    f: &F,
    x: [f64; 2],
    order: u32,
    sched: &PvSchedule,
) -> Result<Gradient, CzError> {
    planar(domain)?;
    if order > kernel.order() {
        return Err(CzError::InvalidOrder(format!("kernel has order {}, asked for {order}", kernel.order())));
    }
    check_point(domain, x)?;
    let inside = domain.contains(&x);
    let mut parts = Vec::new();
    let mut error = 0.0;
    for alpha in MultiIndex::of_order(2, order) {
        if !inside {
            let polar = Polar { kernel, domain, f, x, rule: GaussLegendre::new(sched.radial_order), sched: *sched };
            let mut violations = 0;
            let r = polar.integrate(&alpha, 0.0, false, &mut violations);
            if !r.converged {
                return Err(CzError::NotConverged { value: r.value, error: r.error });
            }
            parts.push((alpha, r.value));
            error += r.error;
            continue;
        }
        let mut rest = alpha.clone();
        let mut shift = MultiIndex::zeros(2);
        let mut total = ZERO;
        while rest.modulus() > 0 {
            let k = if rest.0[0] > 0 { 0 } else { 1 };
            rest.0[k] -= 1;
            let g = Shifted { field: f, shift: shift.clone() };
            if !g.vanishes(&MultiIndex::zeros(2)) {
                let r = boundary_layer(kernel, domain, &g, &rest, k, x, sched)?;
                if !r.converged {
                    return Err(CzError::NotConverged { value: r.value, error: r.error });
                }
                total -= r.value;
                error += r.error;
            }
            shift.0[k] += 1;
        }
        let t = pv_transform(kernel, domain, &Shifted { field: f, shift }, x, sched)?;
        total += t.value;
        error += t.error;
        parts.push((alpha, total));
    }
    Ok(Gradient { parts, error })
}

/// Weights of the centered difference of order `j`: offsets `(j/2 − i)`.
fn central_weights(j: u32) -> Vec<(f64, f64)> {
    let mut binom = 1.0;
    (0..=j)
        .map(|i| {
            let w = if i % 2 == 0 { binom } else { -binom };
            binom = binom * (j - i) as f64 / (i + 1) as f64;
            (j as f64 / 2.0 - i as f64, w)
        })
        .collect()
}

/// Centered finite differences of `pv_transform` with steps `h, h/2, h/4`,
/// `h = dist(x,∂Ω)/16`, combined by Richardson extrapolation in `h²`.
pub fn grad_transform_fd<K: Kernel + ?Sized, F: ScalarField + ?Sized>(
    kernel: &K,
    domain: &Domain,
    f: &F,
    x: [f64; 2],
    order: u32,
    sched: &PvSchedule,
) -> Result<Gradient, CzError> {
    planar(domain)?;
    let dist = check_point(domain, x)?;
    let h0 = dist / 16.0;
    if h0 < 1e-10 {
        return Err(CzError::StepUnderflow(h0));
    }
    let mut parts = Vec::new();
    let mut error = 0.0;
    for alpha in MultiIndex::of_order(2, order) {
        let mut est = Vec::new();
        let mut err = 0.0;
        for level in 0..3 {
            let h = h0 / f64::powi(2.0, level);
            let mut acc = ZERO;
            for (ox, wx) in central_weights(alpha.0[0]) {
                for (oy, wy) in central_weights(alpha.0[1]) {
                    let t = pv_transform(kernel, domain, f, [x[0] + ox * h, x[1] + oy * h], sched)?;
                    acc += wx * wy * t.value;
                    err += (wx * wy).abs() * t.error / h.powi(order as i32);
                }
            }
            est.push(acc / h.powi(order as i32));
        }
        let d1 = (4.0 * est[1] - est[0]) / 3.0;
        let d2 = (4.0 * est[2] - est[1]) / 3.0;
        let r = (16.0 * d2 - d1) / 15.0;
        error += err + (r - d2).norm();
        parts.push((alpha, r));
    }
    Ok(Gradient { parts, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czop::Beurling;
    use crate::geometry::{make_disk, make_polygon};
    use crate::poly::{Poly, SeparableField};

    fn one() -> Poly {
        Poly::constant(vec![0.0, 0.0], 1.0)
    }

    #[test]
    fn disk_constant_transform_vanishes() {
        let disk = make_disk(1.0).unwrap();
        for x in [[0.0, 0.0], [0.3, 0.4], [-0.7, 0.1]] {
            let t = pv_transform(&Beurling, &disk, &one(), x, &PvSchedule::default()).unwrap();
            assert!(t.value.norm() < 1e-10, "{x:?}: {t:?}");
            assert_eq!(t.bound_violations, 0);
        }
    }

    #[test]
    fn linearity() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let f = SeparableField::term(1.0, vec![crate::poly::Factor::Exp { rate: 1.0 }, crate::poly::Factor::One]);
        let g = SeparableField::term(1.0, vec![crate::poly::Factor::One, crate::poly::Factor::Pow(2)]);
        let h = f.clone().scaled(2.0).plus(g.clone().scaled(-3.0));
        let s = PvSchedule::default();
        let x = [0.3, 0.6];
        let tf = pv_transform(&Beurling, &sq, &f, x, &s).unwrap().value;
        let tg = pv_transform(&Beurling, &sq, &g, x, &s).unwrap().value;
        let th = pv_transform(&Beurling, &sq, &h, x, &s).unwrap().value;
        assert!((th - (2.0 * tf - 3.0 * tg)).norm() < 1e-9);
    }

    #[test]
    fn off_support_derivative_matches_differences() {
        let cube = make_polygon(&[[2.0, 2.0], [2.5, 2.0], [2.5, 2.5], [2.0, 2.5]]).unwrap();
        let f = SeparableField::term(1.0, vec![crate::poly::Factor::Sin { freq: 1.0, phase: 0.2 }, crate::poly::Factor::One]);
        let s = PvSchedule::default();
        for order in 1..=2 {
            let direct = grad_transform(&Beurling, &cube, &f, [0.5, 0.7], order, &s).unwrap();
            let fd = grad_transform_fd(&Beurling, &cube, &f, [0.5, 0.7], order, &s).unwrap();
            for ((_, a), (_, b)) in direct.parts.iter().zip(&fd.parts) {
                assert!((a - b).norm() <= 1e-6 * a.norm(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn interior_gradient_matches_differences() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let f = SeparableField::term(1.0, vec![crate::poly::Factor::Pow(1), crate::poly::Factor::Exp { rate: 0.5 }]);
        let s = PvSchedule::default();
        let x = [0.35, 0.45];
        let direct = grad_transform(&Beurling, &sq, &f, x, 1, &s).unwrap();
        let fd = grad_transform_fd(&Beurling, &sq, &f, x, 1, &s).unwrap();
        for ((_, a), (_, b)) in direct.parts.iter().zip(&fd.parts) {
            assert!((a - b).norm() <= 1e-6 * a.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn disk_gradient_of_constant_vanishes() {
        let disk = make_disk(1.0).unwrap();
        let g = grad_transform(&Beurling, &disk, &one(), [0.2, -0.5], 1, &PvSchedule::default()).unwrap();
        assert!(g.norm() < 1e-10, "{g:?}");
    }

    #[test]
    fn boundary_points_are_rejected() {
        let disk = make_disk(1.0).unwrap();
        assert!(matches!(
            pv_transform(&Beurling, &disk, &one(), [1.0, 0.0], &PvSchedule::default()),
            Err(CzError::NearBoundary(_))
        ));
    }
}
