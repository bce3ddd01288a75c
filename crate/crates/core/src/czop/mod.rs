//! Convolution Calderón–Zygmund kernels and the truncated transforms
//! `T_Ω f = χ_Ω T(χ_Ω f)` in the plane.

mod contour;
mod disk;
mod pv;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::poly::{factorial, MultiIndex};

pub use contour::{boundary_grad, boundary_gradient, boundary_transform, complex_monomial, ZPoly};
pub use disk::{disk_closed_form, disk_exact_constants, DiskCase, DiskForm, DiskTerm};
pub use pv::{grad_transform, grad_transform_fd, pv_transform, Gradient, PvSchedule, Transform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("point {0:?} lies on or too close to the boundary")]
    NearBoundary([f64; 2]),
    #[error("extrapolation did not converge: value {value}, error estimate {error:e}")]
    NotConverged { value: Complex64, error: f64 },
    #[error("finite-difference step {0:e} underflows")]
    StepUnderflow(f64),
    #[error("least-squares fit is ill-conditioned (condition {0:e})")]
    IllConditioned(f64),
    #[error("invalid order: {0}")]
    InvalidOrder(String),
}

/// A convolution kernel on `ℝ^d`, homogeneous of degree `−d` with zero
/// mean on spheres, with analytic derivatives.
pub trait Kernel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Highest derivative order available.
    fn order(&self) -> u32;
    fn eval(&self, x: &[f64]) -> Complex64;
    fn deriv(&self, alpha: &MultiIndex, x: &[f64]) -> Complex64;
    /// `C` with `Σ_{|α|=j} |D^αK(x)| ≤ C / |x|^{d+j}`.
    fn bound(&self, j: u32) -> f64;
    /// `Some(c)` when the kernel is `c` times the Beurling kernel, which
    /// enables the contour-integral evaluation of polynomial transforms.
    fn beurling_multiple(&self) -> Option<Complex64> {
        None
    }
}

/// `K(z) = −1/(π z²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Beurling;

pub fn beurling_kernel() -> Beurling {
    Beurling
}

/// `i^k`.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl Beurling {
    /// `d^m/dz^m K(z) = −(−1)^m (m+1)! / (π z^{m+2})`.
    pub fn holomorphic_deriv(m: u32, z: Complex64) -> Complex64 {
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        sign * factorial(m + 1) / std::f64::consts::PI * z.powi(-(m as i32) - 2)
    }
}

impl Kernel for Beurling {
    fn name(&self) -> &str {
        "beurling"
    }
    fn dim(&self) -> usize {
        2
    }
    fn order(&self) -> u32 {
        u32::MAX
    }
    fn eval(&self, x: &[f64]) -> Complex64 {
        Self::holomorphic_deriv(0, Complex64::new(x[0], x[1]))
    }
    fn deriv(&self, alpha: &MultiIndex, x: &[f64]) -> Complex64 {
        // ∂_x acts as d/dz and ∂_y as i·d/dz on holomorphic functions.
        i_pow(alpha.0[1]) * Self::holomorphic_deriv(alpha.modulus(), Complex64::new(x[0], x[1]))
    }
    fn bound(&self, j: u32) -> f64 {
        (j + 1) as f64 * factorial(j + 1) / std::f64::consts::PI
    }
    fn beurling_multiple(&self) -> Option<Complex64> {
        Some(Complex64::new(1.0, 0.0))
    }
}

/// The null kernel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroKernel;

impl Kernel for ZeroKernel {
    fn name(&self) -> &str {
        "zero"
    }
    fn dim(&self) -> usize {
        2
    }
    fn order(&self) -> u32 {
        u32::MAX
    }
    fn eval(&self, _: &[f64]) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn deriv(&self, _: &MultiIndex, _: &[f64]) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn bound(&self, _: u32) -> f64 {
        0.0
    }
    fn beurling_multiple(&self) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
}

/// Look a kernel up by name.
pub fn kernel_by_name(name: &str) -> Option<Box<dyn Kernel>> {
    match name {
        "beurling" => Some(Box::new(Beurling)),
        "zero" => Some(Box::new(ZeroKernel)),
        _ => None,
    }
}

/// Largest `Σ_{|α|=j}|D^αK(x)| |x|^{d+j} / C_j` over the given points and
/// orders `j ≤ max_order`; at most one when the bound holds.
pub fn kernel_bound_ratio<K: Kernel + ?Sized>(kernel: &K, points: &[[f64; 2]], max_order: u32) -> f64 {
    let mut worst: f64 = 0.0;
    for x in points {
        let r = x[0].hypot(x[1]);
        for j in 0..=max_order {
            let s: f64 = MultiIndex::of_order(2, j).iter().map(|a| kernel.deriv(a, x).norm()).sum();
            let c = kernel.bound(j);
            if c > 0.0 {
                worst = worst.max(s * r.powi(2 + j as i32) / c);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn modulus_of_beurling_kernel() {
        let k = Beurling;
        for x in [[1.0, 0.0], [0.3, -0.7], [-2.0, 5.0]] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert!((k.eval(&x).norm() - 1.0 / (std::f64::consts::PI * r2)).abs() < 1e-15 / r2);
        }
    }

    #[test]
    fn bound_holds_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<[f64; 2]> =
            (0..10_000).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let r = kernel_bound_ratio(&Beurling, &pts, 3);
        assert!(r <= 1.0 + 1e-12, "{r}");
    }

    #[test]
    fn circle_mean_vanishes() {
        let rule = GaussLegendre::new(24);
        for rad in [0.1, 1.0, 7.0] {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, w) in rule.on(0.0, 2.0 * std::f64::consts::PI) {
                acc += w * Beurling.eval(&[rad * t.cos(), rad * t.sin()]);
            }
            assert!(acc.norm() < 1e-13 / (rad * rad), "{acc}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.4, -0.3];
        let h = 1e-5;
        for (k, e) in [[h, 0.0], [0.0, h]].iter().enumerate() {
            let fd = (Beurling.eval(&[x[0] + e[0], x[1] + e[1]]) - Beurling.eval(&[x[0] - e[0], x[1] - e[1]])) / (2.0 * h);
            let exact = Beurling.deriv(&MultiIndex::unit(2, k), &x);
            assert!((fd - exact).norm() < 1e-6 * exact.norm());
        }
    }
}
