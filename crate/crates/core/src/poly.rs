//! Multi-index polynomials, smooth test fields, and the moment-matching
//! projection onto polynomials of degree below `n` on the triple cube.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::geometry::Point;
use crate::quadrature::{box_nodes, pairwise_sum, GaussLegendre};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("moment quadrature residual {residual:e} above tolerance")]
    Quadrature { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid order: {0}")]
    InvalidOrder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn unit(d: usize, k: usize) -> Self {
        let mut v = vec![0; d];
        v[k] = 1;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn modulus(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// Componentwise order.
    pub fn leq(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        other.leq(self).then(|| MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// All multi-indices of dimension `d` with `|α| ≤ max`, ordered by
    /// modulus and then lexicographically.
    pub fn up_to(d: usize, max: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for m in 0..=max {
            out.extend(Self::of_order(d, m));
        }
        out
    }

    /// All multi-indices with `|α| = m`, lexicographically decreasing in
    /// the first entry.
    pub fn of_order(d: usize, m: u32) -> Vec<MultiIndex> {
        if d == 1 {
            return vec![MultiIndex(vec![m])];
        }
        let mut out = Vec::new();
        for first in (0..=m).rev() {
            for rest in Self::of_order(d - 1, m - first) {
                let mut v = vec![first];
                v.extend(rest.0);
                out.push(MultiIndex(v));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `n! / (n-m)!`, zero when `m > n`.
fn falling(n: u32, m: u32) -> f64 {
    if m > n {
        0.0
    } else {
        ((n - m + 1)..=n).map(|k| k as f64).product()
    }
}

/// `Σ_γ m_γ (y − center)^γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub center: Point,
    pub coeffs: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    pub fn zero(center: Point) -> Self {
        Self { center, coeffs: BTreeMap::new() }
    }

    pub fn constant(center: Point, c: f64) -> Self {
        let d = center.len();
        let mut p = Self::zero(center);
        p.coeffs.insert(MultiIndex::zeros(d), c);
        p
    }

    pub fn monomial(center: Point, gamma: MultiIndex, c: f64) -> Self {
        let mut p = Self::zero(center);
        p.coeffs.insert(gamma, c);
        p
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.iter().filter(|(_, c)| **c != 0.0).map(|(g, _)| g.modulus()).max()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let terms: Vec<f64> = self
            .coeffs
            .iter()
            .map(|(g, c)| c * g.0.iter().zip(&y).map(|(&e, v)| v.powi(e as i32)).product::<f64>())
            .collect();
        pairwise_sum(&terms)
    }

    pub fn deriv(&self, beta: &MultiIndex) -> Poly {
        let mut out = Poly::zero(self.center.clone());
        for (g, c) in &self.coeffs {
            if let Some(rest) = g.checked_sub(beta) {
                let f: f64 = g.0.iter().zip(&beta.0).map(|(&a, &b)| falling(a, b)).product();
                *out.coeffs.entry(rest).or_insert(0.0) += c * f;
            }
        }
        out
    }

    pub fn eval_deriv(&self, beta: &MultiIndex, x: &[f64]) -> f64 {
        self.deriv(beta).eval(x)
    }

    pub fn scale(&self, t: f64) -> Poly {
        Poly { center: self.center.clone(), coeffs: self.coeffs.iter().map(|(g, c)| (g.clone(), c * t)).collect() }
    }

    /// Sum of two polynomials with the same center.
    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.center, other.center, "polynomials must share a center");
        let mut out = self.clone();
        for (g, c) in &other.coeffs {
            *out.coeffs.entry(g.clone()).or_insert(0.0) += c;
        }
        out
    }

    /// Exact mean of `(y − center)^γ` over the box `[lo, hi]`.
    fn monomial_mean(&self, gamma: &MultiIndex, lo: &[f64], hi: &[f64]) -> f64 {
        gamma
            .0
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let (a, b) = (lo[k] - self.center[k], hi[k] - self.center[k]);
                let e1 = e as i32 + 1;
                (b.powi(e1) - a.powi(e1)) / (e1 as f64 * (b - a))
            })
            .product()
    }

    /// Exact mean over an axis-aligned box.
    pub fn mean_over_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let terms: Vec<f64> = self.coeffs.iter().map(|(g, c)| c * self.monomial_mean(g, lo, hi)).collect();
        pairwise_sum(&terms)
    }

    /// Evaluation in exact rational arithmetic (center and coefficients are
    /// converted exactly from their binary values).
    pub fn eval_exact(&self, x: &[BigRational]) -> Option<BigRational> {
        let center: Vec<BigRational> = self.center.iter().map(|&c| BigRational::from_float(c)).collect::<Option<_>>()?;
        let mut total = BigRational::zero();
        for (g, &c) in &self.coeffs {
            let mut term = BigRational::from_float(c)?;
            for (k, &e) in g.0.iter().enumerate() {
                let y = &x[k] - &center[k];
                let mut p = BigRational::one();
                for _ in 0..e {
                    p *= &y;
                }
                term *= p;
            }
            total += term;
        }
        Some(total)
    }

    /// `center` header followed by one `γ:coefficient` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::from("center");
        for c in &self.center {
            write!(s, " {c}").unwrap();
        }
        s.push('\n');
        for (g, c) in &self.coeffs {
            writeln!(s, "{}:{c}", g.to_text()).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Poly, PolyError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (n, head) = lines.next().ok_or(PolyError::Parse { line: 1, msg: "empty input".into() })?;
        let center: Vec<f64> = head
            .strip_prefix("center")
            .ok_or_else(|| PolyError::Parse { line: n, msg: "expected `center` header".into() })?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| PolyError::Parse { line: n, msg: format!("bad number `{t}`") }))
            .collect::<Result<_, _>>()?;
        if center.is_empty() {
            return Err(PolyError::Parse { line: n, msg: "center needs coordinates".into() });
        }
        let mut p = Poly::zero(center);
        for (n, line) in lines {
            let (g, c) = line.split_once(':').ok_or_else(|| PolyError::Parse { line: n, msg: "expected `γ:coefficient`".into() })?;
            let gamma: Vec<u32> = g
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| PolyError::Parse { line: n, msg: format!("bad exponent `{t}`") }))
                .collect::<Result<_, _>>()?;
            if gamma.len() != p.dim() {
                return Err(PolyError::Parse { line: n, msg: format!("expected {} exponents", p.dim()) });
            }
            let c: f64 = c.trim().parse().map_err(|_| PolyError::Parse { line: n, msg: format!("bad coefficient `{c}`") })?;
            *p.coeffs.entry(MultiIndex(gamma)).or_insert(0.0) += c;
        }
        Ok(p)
    }
}

/// A smooth function with analytic partial derivatives.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn deriv(&self, beta: &MultiIndex, x: &[f64]) -> f64;
    /// Highest order for which `deriv` is meaningful.
    fn smoothness(&self) -> usize {
        usize::MAX
    }

    /// True when `D^β f` is identically zero.
    fn vanishes(&self, _beta: &MultiIndex) -> bool {
        false
    }

    /// `|∇^m f(x)| = Σ_{|α|=m} |D^α f(x)|`.
    fn grad_norm(&self, m: u32, x: &[f64]) -> f64 {
        MultiIndex::of_order(self.dim(), m).iter().map(|a| self.deriv(a, x).abs()).sum()
    }
}

impl ScalarField for Poly {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        Poly::eval(self, x)
    }
    fn deriv(&self, beta: &MultiIndex, x: &[f64]) -> f64 {
        self.eval_deriv(beta, x)
    }
    fn vanishes(&self, beta: &MultiIndex) -> bool {
        self.coeffs.iter().all(|(g, c)| *c == 0.0 || !beta.leq(g))
    }
}

/// `D^shift f`, viewed as a field of its own.
#[derive(Debug, Clone)]
pub struct Shifted<'a, F: ?Sized> {
    pub field: &'a F,
    pub shift: MultiIndex,
}

impl<F: ScalarField + ?Sized> ScalarField for Shifted<'_, F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.field.deriv(&self.shift, x)
    }
    fn deriv(&self, beta: &MultiIndex, x: &[f64]) -> f64 {
        self.field.deriv(&beta.add(&self.shift), x)
    }
    fn vanishes(&self, beta: &MultiIndex) -> bool {
        self.field.vanishes(&beta.add(&self.shift))
    }
}

/// One-variable factor of a separable term.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    One,
    Pow(u32),
    /// `sin(freq·t + phase)`.
    Sin { freq: f64, phase: f64 },
    /// `exp(rate·t)`.
    Exp { rate: f64 },
}

impl Factor {
    pub fn deriv(&self, m: u32, t: f64) -> f64 {
        match *self {
            Factor::One => {
                if m == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::Pow(k) => {
                if m > k {
                    0.0
                } else {
                    falling(k, m) * t.powi((k - m) as i32)
                }
            }
            Factor::Sin { freq, phase } => freq.powi(m as i32) * (freq * t + phase + m as f64 * std::f64::consts::FRAC_PI_2).sin(),
            Factor::Exp { rate } => rate.powi(m as i32) * (rate * t).exp(),
        }
    }
}

/// `Σ_t c_t Π_k φ_{t,k}(x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableField {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<Factor>)>,
}

impl SeparableField {
    pub fn term(coeff: f64, factors: Vec<Factor>) -> Self {
        Self { dim: factors.len(), terms: vec![(coeff, factors)] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::term(c, vec![Factor::One; dim])
    }

    pub fn plus(mut self, other: SeparableField) -> Self {
        assert_eq!(self.dim, other.dim);
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, t: f64) -> Self {
        for term in &mut self.terms {
            term.0 *= t;
        }
        self
    }
}

impl ScalarField for SeparableField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.deriv(&MultiIndex::zeros(self.dim), x)
    }
    fn deriv(&self, beta: &MultiIndex, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, fs)| c * fs.iter().enumerate().map(|(k, f)| f.deriv(beta.0[k], x[k])).product::<f64>())
            .sum()
    }
    fn vanishes(&self, beta: &MultiIndex) -> bool {
        self.terms.iter().all(|(c, fs)| {
            *c == 0.0
                || fs.iter().zip(&beta.0).any(|(f, &b)| match f {
                    Factor::One => b > 0,
                    Factor::Pow(k) => b > *k,
                    _ => false,
                })
        })
    }
}

/// Default Gauss–Legendre order per axis for moments of a degree-`n`
/// projection.
pub fn moment_order(n: u32) -> usize {
    (2 * n as usize).max(12)
}

/// `P^{n−1}_{3Q} f` for the cube with the given center and side: the
/// unique polynomial of degree `< n` whose derivative means on `3Q` match
/// those of `f` up to order `n − 1`.
pub fn project<F: ScalarField + ?Sized>(f: &F, center: &[f64], side: f64, n: u32) -> Result<Poly, PolyError> {
    project_with(f, center, side, n, moment_order(n))
}

pub fn project_with<F: ScalarField + ?Sized>(
    f: &F,
    center: &[f64],
    side: f64,
    n: u32,
    order: usize,
) -> Result<Poly, PolyError> {
    if n == 0 {
        return Err(PolyError::InvalidOrder("n must be at least 1".into()));
    }
    if f.dim() != center.len() {
        return Err(PolyError::DimensionMismatch { expected: center.len(), got: f.dim() });
    }
    let d = center.len();
    let lo: Vec<f64> = center.iter().map(|c| c - 1.5 * side).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + 1.5 * side).collect();
    let vol: f64 = (3.0 * side).powi(d as i32);
    let betas = MultiIndex::up_to(d, n - 1);
    let moments = |rule: &GaussLegendre| -> Vec<f64> {
        let nodes = box_nodes(&lo, &hi, rule);
        betas
            .iter()
            .map(|b| pairwise_sum(&nodes.iter().map(|(x, w)| w * f.deriv(b, x)).collect::<Vec<_>>()) / vol)
            .collect()
    };
    let fm = moments(&GaussLegendre::new(order));
    let check = moments(&GaussLegendre::new(order + 4));
    let residual = fm
        .iter()
        .zip(&check)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(PolyError::Quadrature { residual });
    }

    let mut p = Poly::zero(center.to_vec());
    // Back-substitution in decreasing |β|.
    for (bi, beta) in betas.iter().enumerate().rev() {
        let mut rhs = fm[bi];
        for (gamma, m) in &p.coeffs {
            if let Some(diff) = gamma.checked_sub(beta) {
                let c: f64 = gamma.0.iter().zip(&beta.0).map(|(&a, &b)| falling(a, b)).product();
                rhs -= m * c * p.monomial_mean(&diff, &lo, &hi);
            }
        }
        p.coeffs.insert(beta.clone(), rhs / beta.factorial());
    }
    Ok(p)
}

/// Largest deviation, over `|β| < n`, between the exact derivative means
/// of `p` on `3Q` and the means of `f` computed with an independent rule
/// of the given order.
pub fn moment_residual<F: ScalarField + ?Sized>(f: &F, p: &Poly, side: f64, n: u32, order: usize) -> f64 {
    let d = p.dim();
    let lo: Vec<f64> = p.center.iter().map(|c| c - 1.5 * side).collect();
    let hi: Vec<f64> = p.center.iter().map(|c| c + 1.5 * side).collect();
    let vol = (3.0 * side).powi(d as i32);
    let nodes = box_nodes(&lo, &hi, &GaussLegendre::new(order));
    MultiIndex::up_to(d, n - 1)
        .iter()
        .map(|b| {
            let fm = pairwise_sum(&nodes.iter().map(|(x, w)| w * f.deriv(b, x)).collect::<Vec<_>>()) / vol;
            let pm = p.deriv(b).mean_over_box(&lo, &hi);
            (fm - pm).abs() / fm.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PoincareReport {
    pub error_norm: f64,
    pub gradient_norm: f64,
    pub side: f64,
    /// `‖f − Pf‖_{L^p(3Q)} / (ℓ(Q)^n ‖∇ⁿf‖_{L^p(3Q)})`; `None` when both
    /// vanish.
    pub ratio: Option<f64>,
    pub exact_zero: bool,
}

fn lp_norm_on_box<G: Fn(&[f64]) -> f64>(g: G, lo: &[f64], hi: &[f64], p: f64, order: usize) -> f64 {
    let nodes = box_nodes(lo, hi, &GaussLegendre::new(order));
    pairwise_sum(&nodes.iter().map(|(x, w)| w * g(x).abs().powf(p)).collect::<Vec<_>>()).powf(1.0 / p)
}

pub fn verify_poincare<F: ScalarField + ?Sized>(
    f: &F,
    center: &[f64],
    side: f64,
    n: u32,
    p: f64,
) -> Result<PoincareReport, PolyError> {
    let proj = project(f, center, side, n)?;
    let lo: Vec<f64> = center.iter().map(|c| c - 1.5 * side).collect();
    let hi: Vec<f64> = center.iter().map(|c| c + 1.5 * side).collect();
    let order = moment_order(n) + 4;
    let error_norm = lp_norm_on_box(|x| f.eval(x) - proj.eval(x), &lo, &hi, p, order);
    let gradient_norm = lp_norm_on_box(|x| f.grad_norm(n, x), &lo, &hi, p, order);
    let denom = side.powi(n as i32) * gradient_norm;
    let exact_zero = gradient_norm == 0.0;
    let ratio = if denom > 0.0 { Some(error_norm / denom) } else { None };
    Ok(PoincareReport { error_norm, gradient_norm, side, ratio, exact_zero })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ChainBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub chain_length: usize,
    /// `lhs / rhs`, zero when the left side vanishes.
    pub constant: f64,
}

/// `‖f − P_{3Q}f‖_{L¹(S)}` against `Σ_{P∈[S,Q]} ℓ(S)^d D(P,S)^{n−1} ℓ(P)^{1−d} ‖∇ⁿf‖_{L¹(3P)}`.
/// Cubes are read in the covering frame, which must be the world frame.
pub fn verify_chain_bound<F: ScalarField + ?Sized>(
    f: &F,
    cov: &crate::whitney::Covering,
    q: usize,
    s: usize,
    n: u32,
) -> Result<ChainBoundReport, PolyError> {
    let cq = &cov.cubes[q];
    let cs = &cov.cubes[s];
    let proj = project(f, &cq.center(), cq.side(), n)?;
    let order = moment_order(n);
    let lhs = lp_norm_on_box(|x| f.eval(x) - proj.eval(x), &cs.lo(), &cs.hi(), 1.0, order);
    let chain = cov.chain(s, q).map_err(|e| PolyError::InvalidOrder(e.to_string()))?;
    let d = cov.dim() as i32;
    let terms: Vec<f64> = chain
        .iter()
        .map(|&pi| {
            let cp = &cov.cubes[pi];
            let (lo, hi) = cp.dilate(3.0);
            let g = lp_norm_on_box(|x| f.grad_norm(n, x), &lo, &hi, 1.0, order);
            cs.side().powi(d) * crate::whitney::long_distance(cp, cs).powi(n as i32 - 1) / cp.side().powi(d - 1) * g
        })
        .collect();
    let rhs = pairwise_sum(&terms);
    let constant = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(ChainBoundReport { lhs, rhs, chain_length: chain.len(), constant })
}

/// Largest `|m_γ| / (Σ_{j=|γ|}^{n−1} ‖∇^j f‖_∞ ℓ^{j−|γ|})` over the
/// coefficients; sup norms are sampled on a `9^d` grid of `3Q`.
pub fn coefficient_bound_constant<F: ScalarField + ?Sized>(f: &F, p: &Poly, side: f64, n: u32) -> f64 {
    let d = p.dim();
    let lo: Vec<f64> = p.center.iter().map(|c| c - 1.5 * side).collect();
    let m = 9usize;
    let grid: Vec<Vec<f64>> = (0..m.pow(d as u32))
        .map(|idx| {
            let mut r = idx;
            (0..d)
                .map(|k| {
                    let t = (r % m) as f64 / (m - 1) as f64;
                    r /= m;
                    lo[k] + 3.0 * side * t
                })
                .collect()
        })
        .collect();
    let sup: Vec<f64> = (0..n).map(|j| grid.iter().map(|x| f.grad_norm(j, x)).fold(0.0, f64::max)).collect();
    p.coeffs
        .iter()
        .filter(|(_, c)| c.abs() > 0.0)
        .map(|(g, c)| {
            let k = g.modulus();
            let bound: f64 = (k..n).map(|j| sup[j as usize] * side.powi((j - k) as i32)).sum();
            if bound > 0.0 {
                c.abs() / bound
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Converts a rational to a big rational (helper for exact tests).
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1_squared() -> SeparableField {
        SeparableField::term(1.0, vec![Factor::Pow(2), Factor::One])
    }

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(MultiIndex::up_to(2, 2).len(), 6);
        assert_eq!(MultiIndex::of_order(3, 2).len(), 6);
        assert!(MultiIndex(vec![1, 0]).leq(&MultiIndex(vec![1, 2])));
        assert!(!MultiIndex(vec![2, 0]).leq(&MultiIndex(vec![1, 2])));
        assert_eq!(MultiIndex(vec![2, 3]).factorial(), 12.0);
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let mut p = Poly::zero(vec![0.3, -0.2]);
        p.coeffs.insert(MultiIndex(vec![0, 0]), 1.5);
        p.coeffs.insert(MultiIndex(vec![1, 0]), -2.0);
        p.coeffs.insert(MultiIndex(vec![1, 1]), 0.75);
        p.coeffs.insert(MultiIndex(vec![0, 2]), 3.0);
        let q = project(&p, &[0.3, -0.2], 0.1, 3).unwrap();
        for (g, c) in &p.coeffs {
            assert!((q.coeffs[g] - c).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn projection_of_square_matches_closed_form() {
        // Mean of x² over [-3s/2, 3s/2] is 3s²/4.
        let s = 0.2;
        let q = project(&x1_squared(), &[0.0, 0.0], s, 2).unwrap();
        assert!((q.coeffs[&MultiIndex(vec![0, 0])] - 0.75 * s * s).abs() < 1e-14);
        assert!(q.coeffs[&MultiIndex(vec![1, 0])].abs() < 1e-14);
        assert!(q.coeffs[&MultiIndex(vec![0, 1])].abs() < 1e-14);
    }

    #[test]
    fn poincare_ratio_for_power_is_exact_moment_quotient() {
        // f = x₁, n = 1: f − Pf = x₁ − c on 3Q; ratio is ‖t‖_{L²} / (s · ‖1‖_{L²})
        // over [-3s/2, 3s/2]², i.e. (3/2)/√3.
        let f = SeparableField::term(1.0, vec![Factor::Pow(1), Factor::One]);
        let r = verify_poincare(&f, &[0.4, 0.1], 0.05, 1, 2.0).unwrap();
        assert!((r.ratio.unwrap() - 1.5 / 3f64.sqrt()).abs() < 1e-10);
        let poly = Poly::constant(vec![0.0, 0.0], 2.0);
        let z = verify_poincare(&poly, &[0.0, 0.0], 0.1, 1, 2.0).unwrap();
        assert!(z.exact_zero && z.error_norm < 1e-14);
    }

    #[test]
    fn poincare_ratio_stabilizes_for_sine() {
        let f = SeparableField::term(1.0, vec![Factor::Sin { freq: 1.0, phase: 0.0 }, Factor::One]);
        let ratios: Vec<f64> = (3..9)
            .map(|k| verify_poincare(&f, &[0.3, 0.3], 2f64.powi(-k), 1, 2.0).unwrap().ratio.unwrap())
            .collect();
        let last = ratios[ratios.len() - 1];
        let prev = ratios[ratios.len() - 2];
        assert!((last - prev).abs() / last < 1e-3, "{ratios:?}");
        assert!((last - 1.5 / 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = SeparableField::term(0.7, vec![Factor::Sin { freq: 2.0, phase: 0.3 }, Factor::Exp { rate: -0.5 }])
            .plus(SeparableField::term(1.2, vec![Factor::Pow(3), Factor::Pow(2)]));
        let x = [0.3, -0.4];
        for k in 0..2 {
            let e = MultiIndex::unit(2, k);
            for h in [1e-3, 5e-4] {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
                assert!((fd - f.deriv(&e, &x)).abs() < 10.0 * h * h);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mut p = Poly::zero(vec![0.5, 0.25]);
        p.coeffs.insert(MultiIndex(vec![0, 0]), 1.25);
        p.coeffs.insert(MultiIndex(vec![2, 1]), -0.1);
        let text = p.to_text();
        assert_eq!(Poly::from_text(&text).unwrap(), p);
        assert!(matches!(Poly::from_text("center 0 0\n1,x:2"), Err(PolyError::Parse { line: 2, .. })));
        assert!(matches!(Poly::from_text("0,0:1"), Err(PolyError::Parse { line: 1, .. })));
    }

    #[test]
    fn exact_evaluation_agrees() {
        let mut p = Poly::zero(vec![0.5, 0.25]);
        p.coeffs.insert(MultiIndex(vec![1, 1]), 3.0);
        let v = p.eval_exact(&[rational(3, 2), rational(1, 4)]).unwrap();
        assert!(v.is_zero());
        let v = p.eval_exact(&[rational(3, 2), rational(5, 4)]).unwrap();
        assert_eq!(v, rational(3, 1));
    }

    #[test]
    fn derivative_of_polynomial() {
        let p = Poly::monomial(vec![0.0, 0.0], MultiIndex(vec![3, 1]), 2.0);
        let dp = p.deriv(&MultiIndex(vec![2, 1]));
        assert_eq!(dp.coeffs[&MultiIndex(vec![1, 0])], 12.0);
        assert!(p.deriv(&MultiIndex(vec![0, 2])).coeffs.values().all(|c| *c == 0.0));
    }
}
