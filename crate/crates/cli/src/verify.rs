//! Asserted invariants per module. Each section returns its checks and
//! the measurements behind them.

use czsob::carleson::{conjugate, exponent, CubeMeasure};
use czsob::czop::{boundary_gradient, boundary_transform, complex_monomial, grad_transform, kernel_bound_ratio, pv_transform};
use czsob::keylemma::{averaging_ratio, ProbeReport};
use czsob::poly::{moment_order, moment_residual, Factor};
use czsob::whitney::verify_sum_lemmas;
use czsob::{
    boundedness_probe, build_covering, check_continuous_condition, check_growth, check_shadow_condition,
    check_shadow_condition_all, check_tree_condition, cube_measure, depth_verdict, keylemma_sum, project, sobolev_norm,
    Check, Covering, Domain, Kernel, Measured, MultiIndex, Poly, ProbeSuite, SeparableField, Shape, TreeProblem, Verdict,
};
use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::oracle::{brute_force, random_exact_tree};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub name: String,
    pub checks: Vec<Check>,
    pub data: Value,
}

impl Section {
    fn new(name: &str, checks: Vec<Check>, data: Value) -> Self {
        let checks = checks.into_iter().map(|c| Check { name: format!("{name}.{}", c.name), ..c }).collect();
        Section { name: name.into(), checks, data }
    }
}

fn exact_count(name: &str, count: usize, bound: &str) -> Check {
    Check::new(name, count == 0, Measured::exact(count as f64), bound)
}

pub fn min_side(depth: u32) -> f64 {
    (-(depth as f64)).exp2()
}

fn deepest(cfg: &RunConfig) -> u32 {
    *cfg.depths.iter().max().expect("validated")
}

/// Covering at the given depth, oriented.
pub fn oriented_covering(cfg: &RunConfig, domain: &Domain, depth: u32) -> Result<Covering, CliError> {
    let mut cov = build_covering(domain, min_side(depth), cfg.c_w).map_err(CliError::run)?;
    cov.orient().map_err(CliError::run)?;
    Ok(cov)
}

/// Quadrature nodes of the domain at distance `> 8·min_side` from the
/// boundary that no cube contains.
pub fn coverage_gaps(cov: &Covering) -> Result<(usize, usize), CliError> {
    let nodes = cov.domain.area_nodes(24).map_err(CliError::run)?;
    // Unbounded domains are only tiled over the starting-cube region.
    let (lo, hi) = cov.region();
    let margin = 8.0 * cov.min_side;
    let inner: Vec<&Vec<f64>> = nodes
        .iter()
        .map(|(x, _)| x)
        .filter(|x| cov.domain.dist_to_boundary(x) > margin)
        .filter(|x| cov.domain.is_bounded() || x.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| v - a > margin && b - v > margin))
        .collect();
    let gaps = inner.iter().filter(|x| cov.locate(x).is_none()).count();
    Ok((inner.len(), gaps))
}

/// Axiom checks on an oriented covering.
pub fn axiom_checks(cfg: &RunConfig, cov: &Covering) -> Result<(Vec<Check>, Value), CliError> {
    let r = cov.check_axioms();
    let bound = cfg.overlap_bound(cov.dim());
    let (audited, gaps) = coverage_gaps(cov)?;
    let checks = vec![
        Check::new("w2_disjoint", r.w2_disjoint, Measured::exact(r.w2_disjoint as u8 as f64), "no cube contains another"),
        exact_count("w4_violations", r.w4_violations, "= 0"),
        exact_count("w5_violations", r.w5_violations, "= 0"),
        Check::new("w6_overlap", r.w6_overlap as f64 <= bound, Measured::exact(r.w6_overlap as f64), format!("<= {bound}")),
        exact_count("w3_coverage_gaps", gaps, "= 0 among points with dist > 8*min_side"),
    ];
    let data = json!({ "axioms": r, "coverage_points": audited, "min_side": cov.min_side, "orientation_root": cov.orientation.as_ref().map(|o| o.root) });
    Ok((checks, data))
}

pub fn whitney_section(cfg: &RunConfig, domain: &Domain) -> Result<Section, CliError> {
    let depth = deepest(cfg);
    let cov = oriented_covering(cfg, domain, depth)?;
    let (checks, mut data) = axiom_checks(cfg, &cov)?;
    data["depth"] = json!(depth);
    Ok(Section::new("whitney", checks, data))
}

/// Summation-lemma ratios at the two deepest depths with `a = d − 1/2`,
/// `b = d`, cube volumes as `g`.
pub fn lemma_section(cfg: &RunConfig, domain: &Domain) -> Result<Section, CliError> {
    let mut depths = cfg.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    if depths.len() < 2 {
        return Ok(Section::new("lemmas", vec![], json!({ "skipped": "needs two depths" })));
    }
    let pair = &depths[depths.len() - 2..];
    let mut reports = Vec::new();
    for &depth in pair {
        let cov = oriented_covering(cfg, domain, depth)?;
        let d = cov.dim() as f64;
        let g: Vec<f64> = cov.cubes.iter().map(|c| c.volume()).collect();
        reports.push(verify_sum_lemmas(&cov, d - 0.5, d, 1.0, 0.1, &g).map_err(CliError::run)?);
    }
    let var = |a: f64, b: f64| (b - a).abs() / a.abs().max(f64::MIN_POSITIVE);
    let below = var(reports[0].below_sum.max, reports[1].below_sum.max);
    let long = var(reports[0].long_distance_sum.max, reports[1].long_distance_sum.max);
    let bound = cfg.bounds.lemma_variation;
    let checks = vec![
        Check::new("below_sum_variation", below < bound, Measured::exact(below), format!("< {bound}")),
        Check::new("long_distance_variation", long < bound, Measured::exact(long), format!("< {bound}")),
    ];
    Ok(Section::new("lemmas", checks, json!({ "depths": pair, "reports": reports })))
}

fn random_factor<R: Rng>(rng: &mut R) -> Factor {
    match rng.random_range(0..4) {
        0 => Factor::One,
        1 => Factor::Pow(rng.random_range(0..5)),
        2 => Factor::Sin { freq: rng.random_range(0.2..3.0), phase: rng.random_range(0.0..6.3) },
        _ => Factor::Exp { rate: rng.random_range(-1.5..1.5) },
    }
}

pub fn random_field<R: Rng>(rng: &mut R) -> SeparableField {
    let mut f = SeparableField::term(rng.random_range(-2.0..2.0), vec![random_factor(rng), random_factor(rng)]);
    for _ in 0..rng.random_range(0..3) {
        f = f.plus(SeparableField::term(rng.random_range(-2.0..2.0), vec![random_factor(rng), random_factor(rng)]));
    }
    f
}

pub fn random_poly<R: Rng>(rng: &mut R, center: Vec<f64>, degree: u32) -> Poly {
    let mut p = Poly::zero(center);
    for g in MultiIndex::up_to(2, degree) {
        p.coeffs.insert(g, rng.random_range(-3.0..3.0));
    }
    p
}

/// Moment equations on random `(f, cube)` pairs, and exact reproduction of
/// polynomials of degree `< n`.
pub fn projection_section(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = cfg.samples.projection_pairs;
    let mut worst_moment: f64 = 0.0;
    let mut worst_coeff: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..pairs {
        let n = rng.random_range(1..=4);
        let center = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let side = rng.random_range(-8.0..0.0f64).exp2();
        let f = random_field(&mut rng);
        match project(&f, &center, side, n) {
            Ok(p) => worst_moment = worst_moment.max(moment_residual(&f, &p, side, n, moment_order(n) + 8)),
            Err(_) => failures += 1,
        }
        let target = random_poly(&mut rng, center.clone(), n - 1);
        match project(&target, &center, side, n) {
            Ok(p) => {
                for (g, c) in &target.coeffs {
                    let got = p.coeffs.get(g).copied().unwrap_or(0.0);
                    worst_coeff = worst_coeff.max((got - c).abs() / c.abs().max(1.0));
                }
            }
            Err(_) => failures += 1,
        }
    }
    let checks = vec![
        Check::new("moment_residual", worst_moment <= cfg.bounds.moment, Measured::exact(worst_moment), format!("<= {:e}", cfg.bounds.moment)),
        Check::new("polynomial_reproduction", worst_coeff <= cfg.bounds.coefficient, Measured::exact(worst_coeff), format!("<= {:e}", cfg.bounds.coefficient)),
        exact_count("projection_failures", failures, "= 0"),
    ];
    Ok(Section::new("projection", checks, json!({ "pairs": pairs })))
}

pub fn interior_points(domain: &Domain, count: usize, min_dist: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        if domain.contains(&x) && domain.dist_to_boundary(&x) > min_dist {
            out.push(x);
        }
    }
    out
}

fn scale(domain: &Domain) -> f64 {
    let (lo, hi) = domain.bounding_box();
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

/// `T(re) + i·T(im)` by principal values.
pub fn pv_complex<K: Kernel + ?Sized>(
    kernel: &K,
    domain: &Domain,
    parts: &(Poly, Poly),
    x: [f64; 2],
    cfg: &RunConfig,
) -> Result<(Complex64, f64), CliError> {
    let a = pv_transform(kernel, domain, &parts.0, x, &cfg.quadrature.pv).map_err(CliError::run)?;
    let b = pv_transform(kernel, domain, &parts.1, x, &cfg.quadrature.pv).map_err(CliError::run)?;
    Ok((a.value + Complex64::i() * b.value, a.error + b.error))
}

pub fn contour_complex(c: Complex64, domain: &Domain, parts: &(Poly, Poly), x: [f64; 2]) -> Result<Complex64, CliError> {
    let a = boundary_transform(domain, &parts.0, x).map_err(CliError::run)?;
    let b = boundary_transform(domain, &parts.1, x).map_err(CliError::run)?;
    Ok(c * (a + Complex64::i() * b))
}

/// Kernel bounds, agreement of the two evaluation paths, and on a disk the
/// vanishing of `∇ⁿT P_λ` for `|λ| < n ≤ 3`.
pub fn transform_section(cfg: &RunConfig, domain: &Domain) -> Result<Section, CliError> {
    let kernel = cfg.kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7f);
    let kp: Vec<[f64; 2]> = (0..cfg.samples.kernel_points)
        .map(|_| {
            let r = rng.random_range(-4.0..3.0f64).exp();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let ratio = kernel_bound_ratio(kernel.as_ref(), &kp, 3);
    let mut checks =
        vec![Check::new("kernel_bound", ratio <= 1.0 + 1e-12, Measured::exact(ratio), "<= 1 for derivative orders 0..3")];
    let mut data = json!({ "kernel_bound_ratio": ratio });
    if domain.dim() != 2 || !domain.is_bounded() {
        data["skipped"] = json!("transforms need a bounded planar domain");
        return Ok(Section::new("transform", checks, data));
    }
    let center = {
        let (lo, hi) = domain.bounding_box();
        [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]
    };
    if let Some(c) = kernel.beurling_multiple() {
        let pts = interior_points(domain, cfg.samples.transform_points, 0.02 * scale(domain), cfg.seed ^ 0x11);
        let mut worst: f64 = 0.0;
        let mut worst_err: f64 = 0.0;
        for (a, b) in [(0, 0), (1, 0), (0, 1)] {
            let parts = complex_monomial(a, b, center);
            // Values that vanish identically are compared against the size of P.
            let size = pts.iter().map(|x| parts.0.eval(x).hypot(parts.1.eval(x))).fold(0.0, f64::max);
            for &x in &pts {
                let (pv, err) = pv_complex(kernel.as_ref(), domain, &parts, x, cfg)?;
                let ct = contour_complex(c, domain, &parts, x)?;
                let rel = (pv - ct).norm() / pv.norm().max(ct.norm()).max(size);
                worst = worst.max(rel);
                worst_err = worst_err.max(err);
            }
        }
        let b = cfg.bounds.cross_path;
        checks.push(Check::new("cross_path", worst < b, Measured::approx(worst, worst_err), format!("< {b:e} relative")));
        data["cross_path_points"] = json!(pts.len());
    }
    if let Shape::Disk { center: dc, radius } = domain.shape {
        let pts = interior_points(domain, cfg.samples.disk_points, 0.05 * radius, cfg.seed ^ 0x22);
        let mut jobs = Vec::new();
        for n in 1..=3u32 {
            for lam in MultiIndex::up_to(2, n - 1) {
                jobs.push((n, Poly::monomial(dc.to_vec(), lam, 1.0)));
            }
        }
        let sched = cfg.quadrature.pv;
        let rows: Vec<Result<(f64, f64), CliError>> = jobs
            .par_iter()
            .flat_map_iter(|(n, p)| pts.iter().map(move |&x| (*n, p, x)))
            .map(|(n, p, x)| {
                let g = grad_transform(kernel.as_ref(), domain, p, x, n, &sched).map_err(CliError::run)?;
                Ok((g.norm(), g.error))
            })
            .collect();
        let mut sup: f64 = 0.0;
        let mut err: f64 = 0.0;
        for r in rows {
            let (v, e) = r?;
            sup = sup.max(v);
            err = err.max(e);
        }
        let (bg, be) = (cfg.bounds.disk_gradient, cfg.bounds.disk_error);
        checks.push(Check::new("disk_gradient", sup < bg, Measured::approx(sup, err), format!("< {bg:e}")));
        checks.push(Check::new("disk_error_estimate", err < be, Measured::exact(err), format!("< {be:e}")));
        data["disk_points"] = json!(pts.len());
        data["disk_cases"] = json!(jobs.len());
    }
    if let Shape::Polygon { vertices } = &domain.shape {
        let fit = corner_slope(domain, vertices)?;
        let b = cfg.bounds.corner_slope;
        let ok = (fit.slope + 1.0).abs() <= b;
        checks.push(Check::new("corner_slope", ok, Measured::approx(fit.slope, fit.stderr), format!("-1 ± {b}")));
        data["corner"] = json!(fit);
    }
    Ok(Section::new("transform", checks, data))
}

#[derive(Debug, Serialize)]
pub struct CornerFit {
    pub vertex: [f64; 2],
    pub distances: Vec<f64>,
    pub gradients: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
}

/// Least-squares slope of `log|∇Bχ_Ω|` against `log|z − ω|` for points
/// `z` at distances `2^-3 … 2^-9` from the first vertex `ω` along its
/// interior bisector.
pub fn corner_slope(domain: &Domain, vertices: &[[f64; 2]]) -> Result<CornerFit, CliError> {
    let m = vertices.len();
    let w = vertices[0];
    let unit = |v: [f64; 2]| {
        let d = (v[0] - w[0]).hypot(v[1] - w[1]);
        [(v[0] - w[0]) / d, (v[1] - w[1]) / d]
    };
    let (a, b) = (unit(vertices[1]), unit(vertices[m - 1]));
    let mut dir = [a[0] + b[0], a[1] + b[1]];
    let len = dir[0].hypot(dir[1]);
    dir = [dir[0] / len, dir[1] / len];
    let probe = 1e-3;
    if !domain.contains(&[w[0] + probe * dir[0], w[1] + probe * dir[1]]) {
        dir = [-dir[0], -dir[1]];
    }
    let one = Poly::constant(w.to_vec(), 1.0);
    let mut distances = Vec::new();
    let mut gradients = Vec::new();
    for k in 3..=9 {
        let r = (-(k as f64)).exp2();
        let g = boundary_gradient(domain, &one, [w[0] + r * dir[0], w[1] + r * dir[1]], 1).map_err(CliError::run)?;
        distances.push(r);
        gradients.push(g.norm());
    }
    let xs: Vec<f64> = distances.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = gradients.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(CornerFit { vertex: w, distances, gradients, slope, stderr })
}

/// The tree condition against the naive reference in exact arithmetic,
/// and its scale covariance.
pub fn tree_section(cfg: &RunConfig) -> Result<Section, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x33);
    let ps = [Rational64::new(3, 2), Rational64::from_integer(2), Rational64::from_integer(3)];
    let mut mismatches = 0;
    let mut covariance = 0;
    let mut vertices = 0;
    for i in 0..cfg.samples.trees {
        let p = ps[i % ps.len()];
        let prob = random_exact_tree(&mut rng, cfg.samples.tree_vertices, p);
        vertices += prob.parent.len();
        let reference = brute_force(&prob).ok_or_else(|| CliError::run("reference tree is not exact"))?;
        for (v, (lhs, rhs)) in reference.iter().enumerate() {
            let r = check_tree_condition(&prob, v).map_err(CliError::run)?;
            if r.lhs != *lhs || r.rhs != *rhs {
                mismatches += 1;
            }
        }
        // μ ↦ tμ with t = r^b multiplies every constant by t^{p′−1} = r^{a−b}.
        let q = conjugate(p);
        let r = BigRational::new(3.into(), 2.into());
        let b = *q.denom() as u32;
        let t = (0..b).fold(BigRational::one(), |a, _| a * &r);
        let factor = (0..(*q.numer() - *q.denom())).fold(BigRational::one(), |a, _| a * &r);
        let scaled = TreeProblem { mu: prob.mu.iter().map(|m| m * &t).collect(), ..prob.clone() };
        for v in 0..prob.parent.len() {
            let a = check_tree_condition(&prob, v).map_err(CliError::run)?;
            let s = check_tree_condition(&scaled, v).map_err(CliError::run)?;
            if a.rhs.is_zero() != s.rhs.is_zero() || s.constant != &a.constant * &factor {
                covariance += 1;
            }
        }
    }
    let checks = vec![
        exact_count("oracle_mismatches", mismatches, "= 0 (exact rational comparison)"),
        exact_count("scale_covariance_violations", covariance, "= 0 (exact)"),
    ];
    Ok(Section::new("trees", checks, json!({ "trees": cfg.samples.trees, "vertices": vertices })))
}

pub fn verdict_check(cfg: &RunConfig, verdict: Verdict) -> Check {
    let name = format!("{verdict:?}").to_lowercase();
    match cfg.expect.verdict {
        Some(e) => Check::new("verdict", verdict == e, Measured::exact((verdict == e) as u8 as f64), format!("{e:?}").to_lowercase())
            .with_note(name),
        None => Check::new("verdict", verdict != Verdict::Fails, Measured::exact((verdict != Verdict::Fails) as u8 as f64), "not fails")
            .with_note(name),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlesonRow {
    pub depth: u32,
    pub cubes: usize,
    pub lambda: [u32; 2],
    pub constant: Measured,
    pub cube: usize,
    pub window: usize,
    pub growth: Measured,
    pub total_mass: Measured,
    pub flagged: usize,
}

fn base_point(domain: &Domain) -> [f64; 2] {
    match &domain.shape {
        Shape::Disk { center, .. } => *center,
        _ => {
            let (lo, hi) = domain.bounding_box();
            [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]
        }
    }
}

/// Shadow-condition constants over depths and `λ`, the depth verdict, and
/// agreement with the continuous condition at the deepest depth.
pub fn carleson_section(cfg: &RunConfig, domain: &Domain) -> Result<Section, CliError> {
    exponent(cfg.p).map_err(|e| CliError::Config(e.to_string()))?;
    if domain.dim() != 2 || !domain.is_bounded() {
        return Ok(Section::new("carleson", vec![], json!({ "skipped": "measures need a bounded planar domain" })));
    }
    let kernel = cfg.kernel();
    let base = base_point(domain);
    let deep = deepest(cfg);
    let mut rows = Vec::new();
    let mut sup = Vec::new();
    let mut coh = None;
    for &depth in &cfg.depths {
        let cov = oriented_covering(cfg, domain, depth)?;
        let mut best: Option<(f64, usize, CubeMeasure)> = None;
        for lam in &cfg.lambda {
            let measure = |order: usize| {
                cube_measure(&cov, kernel.as_ref(), &MultiIndex(lam.to_vec()), cfg.n, cfg.p, base, order, &cfg.quadrature.pv)
                    .map_err(CliError::run)
            };
            let mu = measure(cfg.quadrature.cube_order)?;
            // A rule two orders higher gives the quadrature part of the error.
            let check = measure(cfg.quadrature.cube_order + 2)?;
            let s = check_shadow_condition_all(&cov, &mu, cfg.p).map_err(CliError::run)?;
            let s2 = check_shadow_condition_all(&cov, &check, cfg.p).map_err(CliError::run)?;
            let g = check_growth(&cov, &mu, cfg.p).map_err(CliError::run)?;
            let g2 = check_growth(&cov, &check, cfg.p).map_err(CliError::run)?;
            let transform_err: f64 = mu.error.iter().sum();
            let mass_err = transform_err + (mu.total() - check.total()).abs();
            let rel = if mu.total() > 0.0 { transform_err / mu.total() } else { 0.0 };
            let q = cfg.p / (cfg.p - 1.0);
            rows.push(CarlesonRow {
                depth,
                cubes: cov.len(),
                lambda: *lam,
                constant: Measured::approx(s.constant, (s.constant - s2.constant).abs() + s.constant * (q + 1.0) * rel),
                cube: s.cube,
                window: s.window,
                growth: Measured::approx(g.constant, (g.constant - g2.constant).abs() + g.constant * rel),
                total_mass: Measured::approx(mu.total(), mass_err),
                flagged: mu.flagged.len(),
            });
            if best.as_ref().is_none_or(|b| s.constant > b.0) {
                best = Some((s.constant, s.cube, mu));
            }
        }
        let (value, cube, mu) = best.expect("lambda list is nonempty");
        sup.push(value);
        if depth == deep && coh.is_none() {
            coh = Some(coherence(cfg, &cov, cube, &mu)?);
        }
    }
    let verdict = depth_verdict(&sup);
    let mut checks = vec![verdict_check(cfg, verdict)];
    let mut data = json!({
        "n": cfg.n,
        "p": cfg.p,
        "depths": cfg.depths,
        "rows": rows,
        "sup_constants": sup,
        "verdict": verdict,
    });
    if let Some((c, v)) = coh {
        checks.push(c);
        data["coherence"] = v;
    }
    Ok(Section::new("carleson", checks, data))
}

/// Continuous over discrete ratio at the center of the extremal cube.
fn coherence(cfg: &RunConfig, cov: &Covering, cube: usize, mu: &CubeMeasure) -> Result<(Check, Value), CliError> {
    let c = cov.cubes[cube].center();
    let a = cov.frame.to_world(&c);
    let bound = cfg.bounds.coherence;
    let discrete = check_shadow_condition(cov, mu, cfg.p, cube).map_err(CliError::run)?;
    let cont = match check_continuous_condition(cov, mu, cfg.p, [a[0], a[1]], cfg.quadrature.continuous_order) {
        Ok(r) => r,
        Err(e) => {
            let c = Check::new("coherence", false, Measured::exact(f64::NAN), format!("< {bound}")).with_note(e.to_string());
            return Ok((c, json!({ "error": e.to_string() })));
        }
    };
    let (x, y) = (cont.ratio, discrete.constant);
    let factor = if x == 0.0 && y == 0.0 {
        1.0
    } else if x == 0.0 || y == 0.0 {
        f64::INFINITY
    } else {
        (x / y).max(y / x)
    };
    let check = Check::new("coherence", factor < bound, Measured::exact(factor), format!("< {bound}"));
    Ok((check, json!({ "point": a, "continuous": cont, "discrete": discrete })))
}

pub fn probe(cfg: &RunConfig, domain: &Domain, suite: &ProbeSuite) -> Result<ProbeReport, CliError> {
    boundedness_probe(
        domain,
        cfg.kernel().as_ref(),
        cfg.n,
        cfg.p,
        suite,
        &cfg.depths,
        cfg.quadrature.cube_order,
        &cfg.quadrature.pv,
    )
    .map_err(CliError::run)
}

/// Depth probe of the cube sum, plus its structural properties.
pub fn keylemma_section(cfg: &RunConfig, domain: &Domain, suite: &ProbeSuite) -> Result<Section, CliError> {
    if domain.dim() != 2 || !domain.is_bounded() {
        return Ok(Section::new("keylemma", vec![], json!({ "skipped": "cube sums need a bounded planar domain" })));
    }
    let report = probe(cfg, domain, suite)?;
    let mut checks = vec![verdict_check(cfg, report.verdict)];
    let flagged: usize = report.rows.iter().map(|r| r.flagged).sum();
    checks.push(exact_count("flagged_cubes", flagged, "= 0"));
    if matches!(domain.shape, Shape::Disk { .. }) {
        let worst = report.rows.iter().map(|r| r.sum / r.cubes as f64).fold(0.0, f64::max);
        let err = report.rows.iter().map(|r| r.sum_error / r.cubes as f64).fold(0.0, f64::max);
        let b = cfg.bounds.disk_sum;
        checks.push(Check::new("disk_sum_per_cube", worst < b, Measured::approx(worst, err), format!("< {b:e}")));
    }

    let shallow = *cfg.depths.iter().min().expect("validated");
    let cov = build_covering(domain, min_side(shallow), cfg.c_w).map_err(CliError::run)?;
    let kernel = cfg.kernel();
    let mut homog: f64 = 0.0;
    let mut equiv: f64 = 1.0;
    let mut avg: f64 = 0.0;
    let overlap = cov.overlap_constant() as f64;
    let avg_bound = (overlap / 3f64.powi(cov.dim() as i32)).powf(1.0 / cfg.p);
    for (_, f) in &suite.fields {
        let s1 = keylemma_sum(&cov, kernel.as_ref(), f, cfg.n, cfg.p, cfg.quadrature.cube_order, &cfg.quadrature.pv)
            .map_err(CliError::run)?;
        let f2 = f.clone().scaled(2.0);
        let s2 = keylemma_sum(&cov, kernel.as_ref(), &f2, cfg.n, cfg.p, cfg.quadrature.cube_order, &cfg.quadrature.pv)
            .map_err(CliError::run)?;
        let expect = 2f64.powf(cfg.p) * s1.value;
        let scale = expect.abs().max(s2.value.abs());
        if scale > 1e-300 {
            homog = homog.max((s2.value - expect).abs() / scale);
        }
        let norm = sobolev_norm(domain, f, cfg.n, cfg.p, cfg.quadrature.sobolev_order).map_err(CliError::run)?;
        if norm.full > 0.0 && norm.reduced > 0.0 {
            equiv = equiv.max((norm.full / norm.reduced).max(norm.reduced / norm.full));
        }
        avg = avg.max(averaging_ratio(&cov, f, cfg.p, cfg.quadrature.cube_order).map_err(CliError::run)?);
    }
    let b = cfg.bounds.norm_equivalence;
    checks.push(Check::new("homogeneity", homog < 1e-9, Measured::exact(homog), "< 1e-9 relative"));
    checks.push(Check::new("norm_equivalence", equiv < b, Measured::exact(equiv), format!("< {b}")));
    checks.push(Check::new(
        "averaging_bound",
        avg <= avg_bound * (1.0 + 1e-9),
        Measured::exact(avg),
        format!("<= (overlap/3^d)^(1/p) = {avg_bound}"),
    ));
    Ok(Section::new("keylemma", checks, json!({ "probe": report, "depth": shallow })))
}

pub const SECTIONS: [&str; 7] = ["whitney", "lemmas", "projection", "transform", "trees", "carleson", "keylemma"];

pub fn run_section(name: &str, cfg: &RunConfig, domain: &Domain) -> Result<Section, CliError> {
    match name {
        "whitney" => whitney_section(cfg, domain),
        "lemmas" => lemma_section(cfg, domain),
        "projection" => projection_section(cfg),
        "transform" => transform_section(cfg, domain),
        "trees" => tree_section(cfg),
        "carleson" => carleson_section(cfg, domain),
        "keylemma" => keylemma_section(cfg, domain, &ProbeSuite::standard()),
        other => Err(CliError::Config(format!("unknown section `{other}` (known: {})", SECTIONS.join(", ")))),
    }
}

pub fn all_checks(sections: &[Section]) -> Vec<Check> {
    sections.iter().flat_map(|s| s.checks.clone()).collect()
}
