//! Per-cube measures `|∇ⁿT_Ω P|^p dx`, the tree Carleson condition and its
//! embedding counterpart, the shadow condition over window trees, the
//! continuous condition and the growth condition.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::czop::{boundary_gradient, grad_transform, CzError, Kernel, PvSchedule};
use crate::geometry::Shape;
use crate::poly::{MultiIndex, Poly};
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::whitney::{Covering, WhitneyError, WindowTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarlesonError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("power {0} of a rational weight is not rational")]
    Inexact(String),
    #[error("cube {0} lies in no window tree")]
    EmptyShadow(usize),
    #[error(transparent)]
    Whitney(#[from] WhitneyError),
    #[error(transparent)]
    Transform(#[from] CzError),
}

/// `p / (p − 1)`, exact.
pub fn conjugate(p: Rational64) -> Rational64 {
    p / (p - Rational64::one())
}

/// Rational form of an exponent given as a float (denominators up to 10⁶).
pub fn exponent(p: f64) -> Result<Rational64, CarlesonError> {
    let r = Rational64::approximate_float(p).ok_or_else(|| CarlesonError::InvalidParameter(format!("exponent {p}")))?;
    if !(r > Rational64::one()) || *r.denom() > 1_000_000 {
        return Err(CarlesonError::InvalidParameter(format!("need a rational exponent p > 1, got {p}")));
    }
    Ok(r)
}

fn ratio_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Scalars the tree checks run over: floats, or exact rationals.
pub trait TreeScalar:
    Clone + PartialOrd + Zero + Debug + Send + Sync + Add<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    /// `self^e` for `self ≥ 0`; `None` when not representable.
    fn pow_ratio(&self, e: Rational64) -> Option<Self>;
    fn to_f64(&self) -> f64;
}

impl TreeScalar for f64 {
    fn pow_ratio(&self, e: Rational64) -> Option<Self> {
        Some(self.powf(ratio_f64(e)))
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

fn exact_root(v: &BigInt, n: u32) -> Option<BigInt> {
    let r = v.nth_root(n);
    (num_traits::pow(r.clone(), n as usize) == *v).then_some(r)
}

impl TreeScalar for BigRational {
    fn pow_ratio(&self, e: Rational64) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        if self.is_zero() {
            return (e > Rational64::zero()).then(BigRational::zero);
        }
        let den = u32::try_from(*e.denom()).ok()?;
        let base = BigRational::new(exact_root(self.numer(), den)?, exact_root(self.denom(), den)?);
        let k = usize::try_from(e.numer().unsigned_abs()).ok()?;
        let v = num_traits::pow(base, k);
        Some(if e.is_negative() { v.recip() } else { v })
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }
}

trait Lossy {
    fn to_f64_lossy(&self) -> f64;
}

impl Lossy for BigRational {
    fn to_f64_lossy(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A rooted tree with vertex masses `μ` and weights `ρ`.
#[derive(Debug, Clone)]
pub struct TreeProblem<T> {
    pub parent: Vec<Option<usize>>,
    pub mu: Vec<T>,
    pub rho: Vec<T>,
    pub p: Rational64,
    /// A formal vertex: no mass and no term of its own.
    pub formal: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TreeReport<T> {
    pub root: usize,
    pub lhs: T,
    pub rhs: T,
    pub constant: T,
}

struct Shape_ {
    children: Vec<Vec<usize>>,
    post_order: Vec<usize>,
    top: usize,
}

impl<T: TreeScalar> TreeProblem<T> {
    fn shape(&self) -> Result<Shape_, CarlesonError> {
        let n = self.parent.len();
        if n == 0 || self.mu.len() != n || self.rho.len() != n {
            return Err(CarlesonError::InvalidTree("parent, mu and rho must have one entry per vertex".into()));
        }
        if !(self.p > Rational64::one()) {
            return Err(CarlesonError::InvalidParameter("need p > 1".into()));
        }
        let mut children = vec![Vec::new(); n];
        let mut tops = Vec::new();
        for (v, p) in self.parent.iter().enumerate() {
            match p {
                Some(p) if *p >= n => return Err(CarlesonError::InvalidTree(format!("parent {p} out of range"))),
                Some(p) => children[*p].push(v),
                None => tops.push(v),
            }
        }
        if tops.len() != 1 {
            return Err(CarlesonError::InvalidTree(format!("expected one root, found {}", tops.len())));
        }
        for v in 0..n {
            if self.mu[v] < T::zero() {
                return Err(CarlesonError::InvalidParameter(format!("negative mass at {v}")));
            }
            if Some(v) != self.formal && !(self.rho[v] > T::zero()) {
                return Err(CarlesonError::InvalidParameter(format!("weight at {v} must be positive")));
            }
        }
        let mut pre = Vec::with_capacity(n);
        let mut stack = vec![tops[0]];
        while let Some(v) = stack.pop() {
            pre.push(v);
            stack.extend(children[v].iter().rev());
        }
        if pre.len() != n {
            return Err(CarlesonError::InvalidTree("tree is disconnected or has a cycle".into()));
        }
        pre.reverse();
        Ok(Shape_ { children, post_order: pre, top: tops[0] })
    }

    fn mass(&self, v: usize) -> T {
        if Some(v) == self.formal {
            T::zero()
        } else {
            self.mu[v].clone()
        }
    }

    /// Shadow masses `S(x)` and shadow sums `L(x)` of the terms
    /// `S(x)^{p′} ρ(x)^{1−p′}`.
    fn sums(&self, shape: &Shape_) -> Result<(Vec<T>, Vec<T>), CarlesonError> {
        let n = self.parent.len();
        let q = conjugate(self.p);
        let one_minus = Rational64::one() - q;
        let mut s: Vec<T> = (0..n).map(|v| self.mass(v)).collect();
        let mut l: Vec<T> = vec![T::zero(); n];
        for &v in &shape.post_order {
            for &c in &shape.children[v] {
                s[v] = s[v].clone() + s[c].clone();
                l[v] = l[v].clone() + l[c].clone();
            }
            if Some(v) != self.formal && !s[v].is_zero() {
                let a = s[v].pow_ratio(q).ok_or_else(|| CarlesonError::Inexact(format!("{:?}^{q}", s[v])))?;
                let b = self.rho[v]
                    .pow_ratio(one_minus)
                    .ok_or_else(|| CarlesonError::Inexact(format!("{:?}^{one_minus}", self.rho[v])))?;
                l[v] = l[v].clone() + a * b;
            }
        }
        Ok((s, l))
    }

    fn report(root: usize, lhs: T, rhs: T) -> TreeReport<T> {
        let constant = if rhs.is_zero() { T::zero() } else { lhs.clone() / rhs.clone() };
        TreeReport { root, lhs, rhs, constant }
    }
}

/// Smallest `C` with `Σ_{x∈Sh(r)} μ(Sh(x))^{p′} ρ(x)^{1−p′} ≤ C μ(Sh(r))`.
pub fn check_tree_condition<T: TreeScalar>(prob: &TreeProblem<T>, root: usize) -> Result<TreeReport<T>, CarlesonError> {
    let shape = prob.shape()?;
    if root >= prob.parent.len() {
        return Err(CarlesonError::InvalidTree(format!("vertex {root} out of range")));
    }
    let (s, l) = prob.sums(&shape)?;
    Ok(TreeProblem::report(root, l[root].clone(), s[root].clone()))
}

/// The condition at every vertex; the largest constant wins, ties going to
/// the lowest vertex id.
pub fn check_tree_condition_all<T: TreeScalar>(prob: &TreeProblem<T>) -> Result<TreeReport<T>, CarlesonError> {
    let shape = prob.shape()?;
    let (s, l) = prob.sums(&shape)?;
    let mut best = TreeProblem::report(shape.top, l[shape.top].clone(), s[shape.top].clone());
    for v in 0..s.len() {
        let r = TreeProblem::report(v, l[v].clone(), s[v].clone());
        if r.constant > best.constant {
            best = r;
        }
    }
    Ok(best)
}

/// Lower bound on the best constant of `‖Ih‖_{L^p(μ)} ≤ C ‖h‖_{L^p(ρ)}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EmbeddingReport {
    pub estimate: f64,
    /// Family of the maximizing test function.
    pub witness: String,
    /// Exact sup of the shadow-sum constant.
    pub tree_constant: f64,
    /// `tree_constant^{1/p′} / estimate`.
    pub comparison: f64,
}

/// Tests geodesic and shadow indicators, the dual functions
/// `μ(Sh(x))^{p′−1} ρ(x)^{1−p′} 1_{Sh(r)}` and `trials` random `h ≥ 0`.
pub fn check_embedding(prob: &TreeProblem<f64>, trials: usize, seed: u64) -> Result<EmbeddingReport, CarlesonError> {
    if trials == 0 {
        return Err(CarlesonError::InvalidParameter("trials must be at least 1".into()));
    }
    let shape = prob.shape()?;
    let n = prob.parent.len();
    let p = ratio_f64(prob.p);
    let q = ratio_f64(conjugate(prob.p));
    let pre: Vec<usize> = shape.post_order.iter().rev().copied().collect();
    let eval = |h: &[f64]| -> f64 {
        let mut prim = vec![0.0; n];
        for &v in &pre {
            prim[v] = h[v] + prob.parent[v].map_or(0.0, |u| prim[u]);
        }
        let num: Vec<f64> = (0..n).map(|v| prim[v].powf(p) * prob.mass(v)).collect();
        let den: Vec<f64> = (0..n).filter(|&v| Some(v) != prob.formal).map(|v| h[v].powf(p) * prob.rho[v]).collect();
        let d = pairwise_sum(&den);
        if d > 0.0 {
            (pairwise_sum(&num) / d).powf(1.0 / p)
        } else {
            0.0
        }
    };
    let mut best = (0.0, String::from("none"));
    let mut consider = |v: f64, name: String| {
        if v > best.0 {
            best = (v, name);
        }
    };
    let (s, _) = prob.sums(&shape)?;
    let mut in_shadow = vec![false; n];
    for r in 0..n {
        if Some(r) == prob.formal {
            continue;
        }
        // Geodesic [o, r].
        let mut h = vec![0.0; n];
        let mut v = Some(r);
        while let Some(u) = v {
            if Some(u) != prob.formal {
                h[u] = 1.0;
            }
            v = prob.parent[u];
        }
        consider(eval(&h), format!("geodesic to {r}"));
        // Shadow of r, and the dual function on it.
        in_shadow.iter_mut().for_each(|b| *b = false);
        let mut stack = vec![r];
        while let Some(u) = stack.pop() {
            in_shadow[u] = true;
            stack.extend(&shape.children[u]);
        }
        let h: Vec<f64> = (0..n).map(|u| if in_shadow[u] && Some(u) != prob.formal { 1.0 } else { 0.0 }).collect();
        consider(eval(&h), format!("shadow of {r}"));
        let h: Vec<f64> = (0..n)
            .map(|u| {
                if in_shadow[u] && Some(u) != prob.formal && s[u] > 0.0 {
                    s[u].powf(q - 1.0) * prob.rho[u].powf(1.0 - q)
                } else {
                    0.0
                }
            })
            .collect();
        consider(eval(&h), format!("dual on {r}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let h: Vec<f64> = (0..n).map(|u| if Some(u) == prob.formal { 0.0 } else { rng.random::<f64>() }).collect();
        consider(eval(&h), format!("random {t}"));
    }
    let tree = check_tree_condition_all(prob)?.constant;
    let comparison = if best.0 > 0.0 { tree.powf(1.0 / q) / best.0 } else { 0.0 };
    Ok(EmbeddingReport { estimate: best.0, witness: best.1, tree_constant: tree, comparison })
}

/// Mass per covering cube.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CubeMeasure {
    pub mass: Vec<f64>,
    /// Quadrature error estimate per cube.
    pub error: Vec<f64>,
    /// Cubes where some evaluation failed or exceeded its error budget.
    pub flagged: Vec<usize>,
}

impl CubeMeasure {
    pub fn zero(n: usize) -> Self {
        Self { mass: vec![0.0; n], error: vec![0.0; n], flagged: Vec::new() }
    }

    pub fn from_masses(mass: Vec<f64>) -> Self {
        let n = mass.len();
        Self { mass, error: vec![0.0; n], flagged: Vec::new() }
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.mass)
    }

    pub fn mass_of(&self, ids: &[usize]) -> f64 {
        pairwise_sum(&ids.iter().map(|&i| self.mass[i]).collect::<Vec<_>>())
    }
}

fn planar_covering(cov: &Covering) -> Result<(), CarlesonError> {
    if cov.dim() != 2 || !cov.domain.is_bounded() || !cov.frame.is_identity() {
        return Err(CarlesonError::InvalidParameter(
            "transform measures need a bounded planar domain covered in its own frame".into(),
        ));
    }
    Ok(())
}

/// `∇ⁿ T_Ω P(x)`, through the contour form when the kernel allows it.
pub(crate) fn poly_gradient<K: Kernel + ?Sized>(
    kernel: &K,
    cov: &Covering,
    p: &Poly,
    x: [f64; 2],
    n: u32,
    sched: &PvSchedule,
) -> Result<crate::czop::Gradient, CzError> {
    let contour_ready = matches!(cov.domain.shape, Shape::Disk { .. } | Shape::Polygon { .. });
    match kernel.beurling_multiple() {
        Some(c) if contour_ready => {
            let mut g = boundary_gradient(&cov.domain, p, x, n)?;
            g.parts.iter_mut().for_each(|(_, v)| *v *= c);
            Ok(g)
        }
        _ => grad_transform(kernel, &cov.domain, p, x, n, sched),
    }
}

/// `μ_λ(Q) = ∫_Q |∇ⁿ T_Ω P_λ|^p` with `P_λ(x) = (x − base)^λ`, by
/// Gauss–Legendre quadrature of the given order on each cube.
#[allow(clippy::too_many_arguments)]
pub fn cube_measure<K: Kernel + ?Sized>(
    cov: &Covering,
    kernel: &K,
    lambda: &MultiIndex,
    n: u32,
    p: f64,
    base: [f64; 2],
    order: usize,
    sched: &PvSchedule,
) -> Result<CubeMeasure, CarlesonError> {
    planar_covering(cov)?;
    if lambda.dim() != 2 || lambda.modulus() >= n {
        return Err(CarlesonError::InvalidParameter(format!("need |λ| < n, got λ = {lambda:?}, n = {n}")));
    }
    if n > kernel.order() {
        return Err(CarlesonError::InvalidParameter(format!("kernel order {} below n = {n}", kernel.order())));
    }
    if !(p > 1.0) {
        return Err(CarlesonError::InvalidParameter("need p > 1".into()));
    }
    let poly = Poly::monomial(base.to_vec(), lambda.clone(), 1.0);
    let rule = GaussLegendre::new(order);
    let per: Vec<(f64, f64, bool)> = cov
        .cubes
        .par_iter()
        .map(|q| {
            let nodes = crate::quadrature::box_nodes(&q.lo(), &q.hi(), &rule);
            let mut vals = Vec::with_capacity(nodes.len());
            let mut err = 0.0;
            let mut failed = false;
            for (x, w) in &nodes {
                match poly_gradient(kernel, cov, &poly, [x[0], x[1]], n, sched) {
                    Ok(g) => {
                        let a = g.norm();
                        vals.push(w * a.powf(p));
                        err += w * p * a.powf(p - 1.0) * g.error;
                    }
                    Err(_) => failed = true,
                }
            }
            let m = pairwise_sum(&vals);
            let over_budget = err > 1e-6 * m.max(f64::MIN_POSITIVE);
            (m, err, failed || over_budget)
        })
        .collect();
    Ok(CubeMeasure {
        mass: per.iter().map(|t| t.0).collect(),
        error: per.iter().map(|t| t.1).collect(),
        flagged: per.iter().enumerate().filter(|(_, t)| t.2).map(|(i, _)| i).collect(),
    })
}

/// The tree of window `k` with a formal super-root appended last.
pub fn window_problem(
    cov: &Covering,
    k: usize,
    mu: &CubeMeasure,
    p: Rational64,
) -> Result<(WindowTree, TreeProblem<f64>), CarlesonError> {
    let tree = cov.window_tree(k)?;
    let n = tree.len();
    let d = cov.dim() as f64;
    let pf = ratio_f64(p);
    let mut parent: Vec<Option<usize>> = tree.parent.iter().map(|p| Some(p.unwrap_or(n))).collect();
    parent.push(None);
    let mut masses: Vec<f64> = tree.vertices.iter().map(|&i| mu.mass[i]).collect();
    masses.push(0.0);
    let mut rho: Vec<f64> = tree.vertices.iter().map(|&i| cov.cubes[i].side().powf(d - pf)).collect();
    rho.push(1.0);
    Ok((tree, TreeProblem { parent, mu: masses, rho, p, formal: Some(n) }))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ShadowReport {
    pub cube: usize,
    pub window: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

/// `Σ_{Q≤P} μ(Sh(Q))^{p′} ℓ(Q)^{(d−p)(1−p′)} / μ(Sh(P))` in the tree of the
/// home window of `P`.
pub fn check_shadow_condition(cov: &Covering, mu: &CubeMeasure, p: f64, cube: usize) -> Result<ShadowReport, CarlesonError> {
    let pr = exponent(p)?;
    let k = cov.home_window(cube)?.ok_or(CarlesonError::EmptyShadow(cube))?;
    let (tree, prob) = window_problem(cov, k, mu, pr)?;
    let a = tree.local_of(cube).ok_or(CarlesonError::EmptyShadow(cube))?;
    let r = check_tree_condition(&prob, a)?;
    Ok(ShadowReport { cube, window: k, lhs: r.lhs, rhs: r.rhs, constant: r.constant })
}

/// Sup of the shadow condition over window trees, `P` ranging over the
/// cubes in the canvas of the window.
pub fn check_shadow_condition_all(cov: &Covering, mu: &CubeMeasure, p: f64) -> Result<ShadowReport, CarlesonError> {
    let pr = exponent(p)?;
    let o = cov.orientation()?;
    let windows = cov.domain.windows.len();
    let per: Vec<Result<Option<ShadowReport>, CarlesonError>> = (0..windows)
        .into_par_iter()
        .map(|k| {
            let (tree, prob) = window_problem(cov, k, mu, pr)?;
            let shape = prob.shape()?;
            let (s, l) = prob.sums(&shape)?;
            let mut best: Option<ShadowReport> = None;
            for a in 0..tree.len() {
                if !o.canvases[tree.vertices[a]].contains(&k) {
                    continue;
                }
                let r = TreeProblem::report(a, l[a], s[a]);
                if best.as_ref().is_none_or(|b| r.constant > b.constant) {
                    best = Some(ShadowReport { cube: tree.vertices[a], window: k, lhs: r.lhs, rhs: r.rhs, constant: r.constant });
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<ShadowReport> = None;
    for r in per {
        if let Some(r) = r? {
            if best.as_ref().is_none_or(|b| r.constant > b.constant) {
                best = Some(r);
            }
        }
    }
    best.ok_or_else(|| CarlesonError::InvalidParameter("no cube lies in a window canvas".into()))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GrowthReport {
    pub cube: usize,
    pub constant: f64,
}

/// `sup_Q μ(Sh(Q)) / ℓ(Q)^{d−p}`, shadows taken in home-window trees.
pub fn check_growth(cov: &Covering, mu: &CubeMeasure, p: f64) -> Result<GrowthReport, CarlesonError> {
    let o = cov.orientation()?;
    let d = cov.dim() as f64;
    let windows = cov.domain.windows.len();
    let sums: Vec<(WindowTree, Vec<f64>)> = (0..windows)
        .into_par_iter()
        .map(|k| {
            let t = cov.window_tree(k)?;
            let m: Vec<f64> = t.vertices.iter().map(|&i| mu.mass[i]).collect();
            let s = t.subtree_sums(&m);
            Ok((t, s))
        })
        .collect::<Result<_, WhitneyError>>()?;
    let mut best = GrowthReport { cube: 0, constant: 0.0 };
    for i in 0..cov.len() {
        let Some(&k) = o.canvases[i].first() else { continue };
        let (t, s) = &sums[k];
        if let Some(a) = t.local_of(i) {
            let c = s[a] / cov.cubes[i].side().powf(d - p);
            if c > best.constant {
                best = GrowthReport { cube: i, constant: c };
            }
        }
    }
    Ok(best)
}

type Half = ([f64; 2], f64);

/// Sutherland–Hodgman clip of a convex polygon by `n·y ≤ c` half-planes.
fn clip(mut poly: Vec<[f64; 2]>, halves: &[Half]) -> Vec<[f64; 2]> {
    for &(nv, c) in halves {
        if poly.is_empty() {
            break;
        }
        let side = |y: &[f64; 2]| nv[0] * y[0] + nv[1] * y[1] - c;
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (sa, sb) = (side(&a), side(&b));
            if sa <= 0.0 {
                out.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        poly = out;
    }
    poly
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n).map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1]).sum::<f64>().abs()
}

fn square(lo: &[f64], hi: &[f64]) -> Vec<[f64; 2]> {
    vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ContinuousReport {
    pub window: usize,
    pub cube: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Quadrature of
/// `∫_{Sh~(a)} dist^{(d−p)(1−p′)} μ(Sh(x)∩Sh(a))^{p′} dist^{−d} dx / μ(Sh(a))`
/// for the piecewise-constant density of `mu`, in the home window of the
/// cube holding `a`. Regions are clipped exactly; the outer integral uses
/// collapsed Gauss–Legendre rules of the given order on triangles.
pub fn check_continuous_condition(
    cov: &Covering,
    mu: &CubeMeasure,
    p: f64,
    a: [f64; 2],
    order: usize,
) -> Result<ContinuousReport, CarlesonError> {
    if cov.dim() != 2 {
        return Err(CarlesonError::InvalidParameter("the continuous condition is implemented in the plane".into()));
    }
    let pr = exponent(p)?;
    let q = ratio_f64(conjugate(pr));
    let cube = cov.locate(&a).ok_or_else(|| CarlesonError::InvalidParameter(format!("{a:?} is in no cube")))?;
    let k = cov.home_window(cube)?.ok_or(CarlesonError::EmptyShadow(cube))?;
    let w = &cov.domain.windows[k];
    if !w.contains_scaled(&a, cov.domain.params.delta0) {
        return Err(CarlesonError::InvalidParameter(format!("{a:?} is outside the window canvas")));
    }
    let la = cov.cubes[cube].side();
    let al = w.local(&a);
    let ax = &w.frame.axes;
    let off = |j: usize| ax[j][0] * w.frame.origin[0] + ax[j][1] * w.frame.origin[1];
    // local_j(y) ≤ v  ⇔  axes_j · y ≤ v + axes_j · origin
    let le = |j: usize, v: f64| -> Half { ([ax[j][0], ax[j][1]], v + off(j)) };
    let ge = |j: usize, v: f64| -> Half { ([-ax[j][0], -ax[j][1]], -v - off(j)) };
    let h = 0.5 * w.side;
    let window_halves = [le(0, h), ge(0, -h), le(1, h), ge(1, -h)];
    let strip = |c: f64, half: f64, top: f64| -> Vec<Half> {
        let mut v = window_halves.to_vec();
        v.extend([le(0, c + half), ge(0, c - half), le(1, top)]);
        v
    };
    let shadow_a = strip(al[0], 0.5 * la, al[1]);
    let candidates: Vec<(usize, Vec<[f64; 2]>)> = (0..cov.len())
        .filter(|&i| mu.mass[i] != 0.0)
        .filter_map(|i| {
            let c = &cov.cubes[i];
            let piece = clip(square(&c.lo(), &c.hi()), &shadow_a);
            (area(&piece) > 0.0).then_some((i, piece))
        })
        .collect();
    let density: Vec<f64> = cov.cubes.iter().zip(&mu.mass).map(|(c, m)| m / c.volume()).collect();
    let rhs = pairwise_sum(&candidates.iter().map(|(i, piece)| density[*i] * area(piece)).collect::<Vec<_>>());
    let mass_below = |x: &[f64; 2], lx: f64| -> f64 {
        let xl = w.local(x);
        let mut halves = shadow_a.clone();
        halves.extend([le(0, xl[0] + 0.5 * lx), ge(0, xl[0] - 0.5 * lx), le(1, xl[1])]);
        pairwise_sum(&candidates.iter().map(|(i, piece)| density[*i] * area(&clip(piece.clone(), &halves))).collect::<Vec<_>>())
    };
    let extended = strip(al[0], 0.5 * la, al[1] + 2.0 * la);
    let rule = GaussLegendre::new(order);
    let d = 2.0;
    let terms: Vec<f64> = (0..cov.len())
        .into_par_iter()
        .map(|i| {
            let c = &cov.cubes[i];
            let poly = clip(square(&c.lo(), &c.hi()), &extended);
            if area(&poly) == 0.0 {
                return 0.0;
            }
            let mut acc = Vec::new();
            for t in 1..poly.len() - 1 {
                let (p0, p1, p2) = (poly[0], poly[t], poly[t + 1]);
                let jac = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
                for (s, ws) in rule.on(0.0, 1.0) {
                    for (u, wu) in rule.on(0.0, 1.0) {
                        let x = [
                            p0[0] + s * ((1.0 - u) * (p1[0] - p0[0]) + u * (p2[0] - p0[0])),
                            p0[1] + s * ((1.0 - u) * (p1[1] - p0[1]) + u * (p2[1] - p0[1])),
                        ];
                        let m = mass_below(&x, c.side());
                        if m > 0.0 {
                            let dist = cov.domain.dist_to_boundary(&x);
                            acc.push(ws * wu * s * jac * dist.powf((d - p) * (1.0 - q) - d) * m.powf(q));
                        }
                    }
                }
            }
            pairwise_sum(&acc)
        })
        .collect();
    let lhs = pairwise_sum(&terms);
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ContinuousReport { window: k, cube, lhs, rhs, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Depth-stability diagnosis of constants measured on successive
/// truncations: `Fails` when every step at least doubles the constant,
/// `Holds` when the spread stays under 25% of the smallest value.
pub fn depth_verdict(values: &[f64]) -> Verdict {
    if values.len() < 2 {
        return Verdict::Inconclusive;
    }
    if values.windows(2).all(|w| w[0] > 0.0 && w[1] >= 2.0 * w[0]) {
        return Verdict::Fails;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 || (min > 0.0 && (max - min) / min < 0.25) {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    }
}

/// Relative spread `(max − min) / min` of a series.
pub fn spread(values: &[f64]) -> f64 {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czop::{Beurling, ZeroKernel};
    use crate::geometry::{make_disk, make_polygon};
    use crate::whitney::build_covering;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Direct double loop over vertex pairs.
    fn brute(prob: &TreeProblem<BigRational>, r: usize) -> BigRational {
        let n = prob.parent.len();
        let below = |x: usize, y: usize| {
            let mut v = Some(y);
            while let Some(u) = v {
                if u == x {
                    return true;
                }
                v = prob.parent[u];
            }
            false
        };
        let q = conjugate(prob.p);
        let mut lhs = BigRational::zero();
        let mut rhs = BigRational::zero();
        for x in 0..n {
            if !below(r, x) {
                continue;
            }
            rhs += prob.mu[x].clone();
            let mut s = BigRational::zero();
            for y in 0..n {
                if below(x, y) {
                    s += prob.mu[y].clone();
                }
            }
            if !s.is_zero() {
                lhs += s.pow_ratio(q).unwrap() * prob.rho[x].pow_ratio(Rational64::one() - q).unwrap();
            }
        }
        if rhs.is_zero() {
            BigRational::zero()
        } else {
            lhs / rhs
        }
    }

    #[test]
    fn single_vertex() {
        let p = TreeProblem { parent: vec![None], mu: vec![0.0], rho: vec![2.0], p: Rational64::new(3, 2), formal: None };
        assert_eq!(check_tree_condition(&p, 0).unwrap().constant, 0.0);
        let p = TreeProblem { parent: vec![None], mu: vec![rat(4, 1)], rho: vec![rat(1, 4)], p: Rational64::new(2, 1), formal: None };
        // m^{p′−1} w^{1−p′} = 4 · 4.
        assert_eq!(check_tree_condition(&p, 0).unwrap().constant, rat(16, 1));
    }

    #[test]
    fn binary_tree_matches_brute_force() {
        let n = (1 << 11) - 1;
        let parent: Vec<Option<usize>> = (0..n).map(|v| if v == 0 { None } else { Some((v - 1) / 2) }).collect();
        let mu: Vec<BigRational> = (0..n).map(|v| if v >= n / 2 { rat(1, 1) } else { rat(0, 1) }).collect();
        let prob = TreeProblem { parent, mu, rho: vec![rat(1, 1); n], p: Rational64::new(2, 1), formal: None };
        for r in [0, 1, 5, 100] {
            assert_eq!(check_tree_condition(&prob, r).unwrap().constant, brute(&prob, r));
        }
    }

    #[test]
    fn scale_covariance_is_exact() {
        let parent = vec![None, Some(0), Some(0), Some(1)];
        let mu = vec![rat(1, 3), rat(2, 5), rat(0, 1), rat(7, 2)];
        let prob = TreeProblem { parent, mu, rho: vec![rat(1, 2), rat(3, 1), rat(1, 1), rat(5, 4)], p: Rational64::new(2, 1), formal: None };
        let t = rat(9, 4);
        let mut scaled = prob.clone();
        scaled.mu.iter_mut().for_each(|m| *m = m.clone() * t.clone());
        let a = check_tree_condition(&prob, 0).unwrap().constant;
        let b = check_tree_condition(&scaled, 0).unwrap().constant;
        assert_eq!(b, a * t.pow_ratio(conjugate(prob.p) - Rational64::one()).unwrap());
    }

    #[test]
    fn irrational_powers_are_reported() {
        let p = TreeProblem { parent: vec![None], mu: vec![rat(2, 1)], rho: vec![rat(1, 1)], p: Rational64::new(3, 1), formal: None };
        assert!(matches!(check_tree_condition(&p, 0), Err(CarlesonError::Inexact(_))));
    }

    #[test]
    fn invalid_trees() {
        let two_roots = TreeProblem { parent: vec![None, None], mu: vec![1.0, 1.0], rho: vec![1.0, 1.0], p: Rational64::new(2, 1), formal: None };
        assert!(check_tree_condition(&two_roots, 0).is_err());
        let cycle = TreeProblem { parent: vec![None, Some(2), Some(1)], mu: vec![1.0; 3], rho: vec![1.0; 3], p: Rational64::new(2, 1), formal: None };
        assert!(check_tree_condition(&cycle, 0).is_err());
    }

    #[test]
    fn embedding_trivial_cases() {
        let parent = vec![None, Some(0), Some(0)];
        let prob = TreeProblem { parent: parent.clone(), mu: vec![0.0; 3], rho: vec![1.0; 3], p: Rational64::new(2, 1), formal: None };
        assert_eq!(check_embedding(&prob, 3, 1).unwrap().estimate, 0.0);
        // h = 1 at the root: Ih ≡ 1, so the ratio is (μ(T)/ρ(o))^{1/p}.
        let prob = TreeProblem { parent, mu: vec![1.0, 2.0, 3.0], rho: vec![1.5, 1.0, 1.0], p: Rational64::new(2, 1), formal: None };
        let r = check_embedding(&prob, 10, 1).unwrap();
        assert!(r.estimate >= (6.0f64 / 1.5).sqrt() - 1e-12);
    }

    #[test]
    fn zero_kernel_gives_zero_measure() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let mut cov = build_covering(&sq, 2f64.powi(-6), 1.0).unwrap();
        cov.orient().unwrap();
        let mu = cube_measure(&cov, &ZeroKernel, &MultiIndex::zeros(2), 1, 1.5, [0.5, 0.5], 4, &PvSchedule::default()).unwrap();
        assert_eq!(mu.total(), 0.0);
        assert_eq!(check_shadow_condition_all(&cov, &mu, 1.5).unwrap().constant, 0.0);
        assert_eq!(check_growth(&cov, &mu, 1.5).unwrap().constant, 0.0);
        let c = check_continuous_condition(&cov, &mu, 1.5, cov.cubes[cov.len() - 1].center().try_into().unwrap(), 3);
        assert_eq!(c.map(|r| r.ratio).unwrap_or(0.0), 0.0);
    }

    #[test]
    fn disk_measures_vanish() {
        let disk = make_disk(1.0).unwrap();
        let mut cov = build_covering(&disk, 2f64.powi(-4), 1.0).unwrap();
        cov.orient().unwrap();
        for (lambda, n) in [(vec![0, 0], 1), (vec![1, 0], 2), (vec![0, 1], 2)] {
            let mu = cube_measure(&cov, &Beurling, &MultiIndex(lambda), n, 1.5, [0.0, 0.0], 4, &PvSchedule::default()).unwrap();
            for (i, m) in mu.mass.iter().enumerate() {
                assert!(*m <= 1e-12 * cov.cubes[i].volume(), "{m}");
            }
        }
    }

    #[test]
    fn point_mass_on_a_leaf() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let mut cov = build_covering(&sq, 2f64.powi(-6), 1.0).unwrap();
        cov.orient().unwrap();
        let cube = (0..cov.len())
            .find(|&i| match cov.home_window(i).unwrap() {
                Some(k) => {
                    let t = cov.window_tree(k).unwrap();
                    t.children[t.local_of(i).unwrap()].is_empty()
                }
                None => false,
            })
            .unwrap();
        let mut mass = vec![0.0; cov.len()];
        mass[cube] = 2.0;
        let mu = CubeMeasure::from_masses(mass);
        let p = 1.5;
        let q = 3.0;
        let r = check_shadow_condition(&cov, &mu, p, cube).unwrap();
        let want = 2f64.powf(q - 1.0) * cov.cubes[cube].side().powf((2.0 - p) * (1.0 - q));
        assert!((r.constant - want).abs() < 1e-12 * want);
    }

    #[test]
    fn verdicts() {
        assert_eq!(depth_verdict(&[1.0, 1.1, 1.05]), Verdict::Holds);
        assert_eq!(depth_verdict(&[1.0, 2.0, 4.5]), Verdict::Fails);
        assert_eq!(depth_verdict(&[1.0, 1.5, 2.2]), Verdict::Inconclusive);
        assert_eq!(depth_verdict(&[0.0, 0.0, 0.0]), Verdict::Holds);
    }

    #[test]
    fn clipping_areas() {
        let sq = square(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((area(&clip(sq.clone(), &[([1.0, 1.0], 1.0)])) - 0.5).abs() < 1e-15);
        assert_eq!(area(&clip(sq, &[([1.0, 0.0], -1.0)])), 0.0);
    }
}
