//! Both sides of the cube-sum characterization of boundedness on
//! `W^{n,p}(Ω)`: Sobolev norms, the sum `Σ_Q ‖∇ⁿT_Ω(P_{3Q}f)‖^p_{L^p(Q)}`,
//! Whitney averages and depth probes.

use rayon::prelude::*;
use thiserror::Error;

use crate::carleson::{depth_verdict, poly_gradient, Verdict};
use crate::czop::{CzError, Kernel, PvSchedule};
use crate::geometry::{Domain, GeometryError};
use crate::poly::{project, Factor, MultiIndex, PolyError, ScalarField, SeparableField};
use crate::quadrature::{box_nodes, pairwise_sum, GaussLegendre};
use crate::whitney::{build_covering, Covering, WhitneyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyLemmaError {
    #[error("quadrature of order {order} and {check} disagree by {relative:e}")]
    Quadrature { order: usize, check: usize, relative: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Whitney(#[from] WhitneyError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Transform(#[from] CzError),
}

/// Euclidean norm of `(D^α f(x))_{|α|=m}`.
fn grad_euclid<F: ScalarField + ?Sized>(f: &F, m: u32, x: &[f64]) -> f64 {
    MultiIndex::of_order(f.dim(), m).iter().map(|a| f.deriv(a, x).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SobolevNorm {
    /// `Σ_{|α|≤n} ‖D^α f‖_p`.
    pub full: f64,
    /// `‖f‖_p + ‖∇ⁿf‖_p`.
    pub reduced: f64,
    /// `‖D^α f‖_p` for every `|α| ≤ n`.
    pub terms: Vec<(MultiIndex, f64)>,
    /// Difference against a rule four orders higher.
    pub error: f64,
}

fn lp_norms<F: ScalarField + ?Sized>(domain: &Domain, f: &F, n: u32, p: f64, order: usize) -> Result<(Vec<f64>, f64), KeyLemmaError> {
    let nodes = domain.area_nodes(order)?;
    let alphas = MultiIndex::up_to(f.dim(), n);
    let norm = |g: &dyn Fn(&[f64]) -> f64| -> f64 {
        pairwise_sum(&nodes.iter().map(|(x, w)| w * g(x).abs().powf(p)).collect::<Vec<_>>()).powf(1.0 / p)
    };
    let terms = alphas.iter().map(|a| norm(&|x| f.deriv(a, x))).collect();
    let top = norm(&|x| grad_euclid(f, n, x));
    Ok((terms, top))
}

/// `W^{n,p}` norm of `f` over the domain, by the domain's area rule of the
/// given order, checked against order + 4.
pub fn sobolev_norm<F: ScalarField + ?Sized>(
    domain: &Domain,
    f: &F,
    n: u32,
    p: f64,
    order: usize,
) -> Result<SobolevNorm, KeyLemmaError> {
    if !(p >= 1.0) {
        return Err(KeyLemmaError::InvalidParameter(format!("need p ≥ 1, got {p}")));
    }
    if (n as usize) > f.smoothness() {
        return Err(KeyLemmaError::InvalidParameter(format!("field is not smooth to order {n}")));
    }
    let (terms, top) = lp_norms(domain, f, n, p, order)?;
    let (check, _) = lp_norms(domain, f, n, p, order + 4)?;
    let full = pairwise_sum(&terms);
    let error = (full - pairwise_sum(&check)).abs();
    if error > 1e-6 * full.max(1e-300) {
        return Err(KeyLemmaError::Quadrature { order, check: order + 4, relative: error / full });
    }
    let alphas = MultiIndex::up_to(f.dim(), n);
    Ok(SobolevNorm { full, reduced: terms[0] + top, terms: alphas.into_iter().zip(terms).collect(), error })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KeySum {
    pub value: f64,
    pub per_cube: Vec<f64>,
    /// Accumulated transform error propagated through `|·|^p`.
    pub error: f64,
    /// Cubes whose projection or transform failed.
    pub flagged: Vec<usize>,
}

/// `Σ_Q ‖∇ⁿT_Ω(P^{n−1}_{3Q} f)‖^p_{L^p(Q)}` over the covering, with
/// Gauss–Legendre rules of the given order on each cube.
#[allow(clippy::too_many_arguments)]
pub fn keylemma_sum<K: Kernel + ?Sized, F: ScalarField + ?Sized>(
    cov: &Covering,
    kernel: &K,
    f: &F,
    n: u32,
    p: f64,
    order: usize,
    sched: &PvSchedule,
) -> Result<KeySum, KeyLemmaError> {
    if cov.dim() != 2 || !cov.domain.is_bounded() || !cov.frame.is_identity() {
        return Err(KeyLemmaError::InvalidParameter("cube sums need a bounded planar domain in its own frame".into()));
    }
    if n == 0 || n > kernel.order() || (n as usize) > f.smoothness() {
        return Err(KeyLemmaError::InvalidParameter(format!("order n = {n} out of range")));
    }
    if !(p >= 1.0) {
        return Err(KeyLemmaError::InvalidParameter(format!("need p ≥ 1, got {p}")));
    }
    let rule = GaussLegendre::new(order);
    let per: Vec<(f64, f64, bool)> = cov
        .cubes
        .par_iter()
        .map(|q| {
            let poly = match project(f, &q.center(), q.side(), n) {
                Ok(poly) => poly,
                Err(_) => return (0.0, 0.0, true),
            };
            if poly.coeffs.values().all(|c| *c == 0.0) {
                return (0.0, 0.0, false);
            }
            let mut vals = Vec::new();
            let mut err = 0.0;
            for (x, w) in box_nodes(&q.lo(), &q.hi(), &rule) {
                match poly_gradient(kernel, cov, &poly, [x[0], x[1]], n, sched) {
                    Ok(g) => {
                        let a = g.norm();
                        vals.push(w * a.powf(p));
                        err += w * p * a.powf(p - 1.0) * g.error;
                    }
                    Err(_) => return (0.0, 0.0, true),
                }
            }
            (pairwise_sum(&vals), err, false)
        })
        .collect();
    let per_cube: Vec<f64> = per.iter().map(|t| t.0).collect();
    Ok(KeySum {
        value: pairwise_sum(&per_cube),
        error: pairwise_sum(&per.iter().map(|t| t.1).collect::<Vec<_>>()),
        flagged: per.iter().enumerate().filter(|(_, t)| t.2).map(|(i, _)| i).collect(),
        per_cube,
    })
}

/// `⨍_{3Q} f` for every cube, by a Gauss–Legendre rule of the given order.
pub fn averaging<F: ScalarField + ?Sized>(cov: &Covering, f: &F, order: usize) -> Vec<f64> {
    let rule = GaussLegendre::new(order);
    cov.cubes
        .par_iter()
        .map(|q| {
            let (lo, hi) = q.dilate(3.0);
            let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            pairwise_sum(&box_nodes(&lo, &hi, &rule).iter().map(|(x, w)| w * f.eval(x)).collect::<Vec<_>>()) / vol
        })
        .collect()
}

/// `‖𝒜f‖_{L^p(∪Q)} / ‖f‖_{L^p(Ω)}`.
pub fn averaging_ratio<F: ScalarField + ?Sized>(cov: &Covering, f: &F, p: f64, order: usize) -> Result<f64, KeyLemmaError> {
    let avg = averaging(cov, f, order);
    let num = pairwise_sum(&cov.cubes.iter().zip(&avg).map(|(q, a)| q.volume() * a.abs().powf(p)).collect::<Vec<_>>());
    let nodes = cov.domain.area_nodes(order)?;
    let den = pairwise_sum(&nodes.iter().map(|(x, w)| w * f.eval(x).abs().powf(p)).collect::<Vec<_>>());
    Ok(if den > 0.0 { (num / den).powf(1.0 / p) } else { 0.0 })
}

/// Named fields probed for boundedness.
#[derive(Debug, Clone)]
pub struct ProbeSuite {
    pub fields: Vec<(String, SeparableField)>,
}

impl ProbeSuite {
    /// `1, x₁, x₂, x₁x₂, sin(πx₁)sin(πx₂), exp(x₁)`.
    pub fn standard() -> Self {
        use Factor::*;
        let pi = std::f64::consts::PI;
        let s = Sin { freq: pi, phase: 0.0 };
        let fields = vec![
            ("one", SeparableField::constant(2, 1.0)),
            ("x1", SeparableField::term(1.0, vec![Pow(1), One])),
            ("x2", SeparableField::term(1.0, vec![One, Pow(1)])),
            ("x1x2", SeparableField::term(1.0, vec![Pow(1), Pow(1)])),
            ("sin", SeparableField::term(1.0, vec![s.clone(), s])),
            ("exp", SeparableField::term(1.0, vec![Exp { rate: 1.0 }, One])),
        ];
        Self { fields: fields.into_iter().map(|(n, f)| (n.to_string(), f)).collect() }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        (name == "default" || name == "standard").then(Self::standard)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProbeRow {
    pub field: String,
    pub depth: u32,
    pub cubes: usize,
    pub sum: f64,
    pub sum_error: f64,
    pub norm: f64,
    pub norm_error: f64,
    /// `sum / norm^p`.
    pub ratio: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProbeReport {
    pub n: u32,
    pub p: f64,
    pub depths: Vec<u32>,
    pub rows: Vec<ProbeRow>,
    /// Largest ratio over the suite, per depth.
    pub sup: Vec<f64>,
    pub verdict: Verdict,
}

/// Ratios `keylemma_sum(f) / ‖f‖^p_{W^{n,p}}` over the suite on coverings
/// truncated at side `2^{−depth}`.
#[allow(clippy::too_many_arguments)]
pub fn boundedness_probe<K: Kernel + ?Sized>(
    domain: &Domain,
    kernel: &K,
    n: u32,
    p: f64,
    suite: &ProbeSuite,
    depths: &[u32],
    order: usize,
    sched: &PvSchedule,
) -> Result<ProbeReport, KeyLemmaError> {
    if suite.fields.is_empty() || depths.is_empty() {
        return Err(KeyLemmaError::InvalidParameter("suite and depth list must be nonempty".into()));
    }
    let norms: Vec<SobolevNorm> =
        suite.fields.iter().map(|(_, f)| sobolev_norm(domain, f, n, p, 16)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut sup = Vec::new();
    for &depth in depths {
        let cov = build_covering(domain, (-(depth as f64)).exp2(), 1.0)?;
        let mut best: f64 = 0.0;
        for ((name, f), norm) in suite.fields.iter().zip(&norms) {
            let s = keylemma_sum(&cov, kernel, f, n, p, order, sched)?;
            let ratio = if norm.full > 0.0 { s.value / norm.full.powf(p) } else { 0.0 };
            best = best.max(ratio);
            rows.push(ProbeRow {
                field: name.clone(),
                depth,
                cubes: cov.len(),
                sum: s.value,
                sum_error: s.error,
                norm: norm.full,
                norm_error: norm.error,
                ratio,
                flagged: s.flagged.len(),
            });
        }
        sup.push(best);
    }
    Ok(ProbeReport { n, p, depths: depths.to_vec(), rows, verdict: depth_verdict(&sup), sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::czop::Beurling;
    use crate::geometry::{make_disk, make_polygon};
    use crate::poly::Poly;

    fn square() -> Domain {
        make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn norms_of_simple_fields() {
        let disk = make_disk(1.0).unwrap();
        let one = SeparableField::constant(2, 1.0);
        let s = sobolev_norm(&disk, &one, 1, 2.0, 12).unwrap();
        assert!((s.full - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let x1 = SeparableField::term(1.0, vec![Factor::Pow(1), Factor::One]);
        let s = sobolev_norm(&square(), &x1, 1, 2.0, 12).unwrap();
        assert!((s.terms[0].1 - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((s.reduced - (1.0 / 3f64.sqrt() + 1.0)).abs() < 1e-12);
        let s2 = sobolev_norm(&square(), &x1, 2, 2.0, 12).unwrap();
        assert!(s2.full >= s.full);
    }

    #[test]
    fn sum_vanishes_for_zero_and_on_the_disk() {
        let disk = make_disk(1.0).unwrap();
        let cov = build_covering(&disk, 2f64.powi(-5), 1.0).unwrap();
        let zero = SeparableField::constant(2, 0.0);
        let s = keylemma_sum(&cov, &Beurling, &zero, 1, 2.0, 6, &PvSchedule::default()).unwrap();
        assert_eq!(s.value, 0.0);
        for (_, f) in ProbeSuite::standard().fields {
            let s = keylemma_sum(&cov, &Beurling, &f, 1, 2.0, 6, &PvSchedule::default()).unwrap();
            assert!(s.value < 1e-10, "{}", s.value);
            assert!(s.flagged.is_empty());
        }
    }

    #[test]
    fn sum_is_p_homogeneous() {
        let cov = build_covering(&square(), 2f64.powi(-4), 1.0).unwrap();
        let f = SeparableField::term(1.0, vec![Factor::Exp { rate: 1.0 }, Factor::One]);
        let a = keylemma_sum(&cov, &Beurling, &f, 1, 1.5, 6, &PvSchedule::default()).unwrap().value;
        let b = keylemma_sum(&cov, &Beurling, &f.clone().scaled(4.0), 1, 1.5, 6, &PvSchedule::default()).unwrap().value;
        assert!((b - 8.0 * a).abs() <= 1e-12 * b, "{a} {b}");
    }

    #[test]
    fn averages() {
        let cov = build_covering(&square(), 2f64.powi(-4), 1.0).unwrap();
        let c = SeparableField::constant(2, 3.5);
        assert!(averaging(&cov, &c, 4).iter().all(|v| (v - 3.5).abs() < 1e-14));
        let lin = Poly::monomial(vec![0.0, 0.0], MultiIndex(vec![1, 0]), 2.0).add(&Poly::monomial(vec![0.0, 0.0], MultiIndex(vec![0, 1]), -1.0));
        let avg = averaging(&cov, &lin, 2);
        for (q, v) in cov.cubes.iter().zip(avg) {
            assert!((v - lin.eval(&q.center())).abs() < 1e-14);
        }
        let r = averaging_ratio(&cov, &SeparableField::term(1.0, vec![Factor::Exp { rate: 1.0 }, Factor::One]), 2.0, 8).unwrap();
        assert!(r > 0.5 && r < 2.0, "{r}");
    }
}
