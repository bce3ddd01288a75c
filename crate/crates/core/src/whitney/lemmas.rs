//! Discrete maximal function and the summation lemmas over a covering.

use rayon::prelude::*;

use super::{Covering, WhitneyError};
use crate::quadrature::pairwise_sum;

fn overlap_volume(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut v = 1.0;
    for k in 0..alo.len() {
        let o = ahi[k].min(bhi[k]) - alo[k].max(blo[k]);
        if o <= 0.0 {
            return 0.0;
        }
        v *= o;
    }
    v
}

/// Discrete stand-in for `inf_{y∈Q} Mg(y)`: the largest average of the
/// mass `g` over the dilates `rQ`, `r = 1, 2, 4, …`, until `rQ` holds every
/// cube. `g(S)` is the mass carried by `S`, spread uniformly over it.
pub fn maximal(cov: &Covering, g: &[f64], q: usize) -> f64 {
    maximal_with(cov, &cube_boxes(cov), g, q)
}

type Boxes = Vec<(Vec<f64>, Vec<f64>, f64)>;

fn cube_boxes(cov: &Covering) -> Boxes {
    cov.cubes.iter().map(|c| (c.lo(), c.hi(), c.volume())).collect()
}

fn maximal_with(cov: &Covering, boxes: &Boxes, g: &[f64], q: usize) -> f64 {
    let (blo, bhi) = cov.domain.bounding_box();
    let cq = &cov.cubes[q];
    let mut best: f64 = 0.0;
    let mut r = 1.0;
    loop {
        let (lo, hi) = cq.dilate(r);
        let terms: Vec<f64> = boxes
            .iter()
            .zip(g)
            .filter(|(_, &m)| m != 0.0)
            .map(|((slo, shi, vol), &m)| m * overlap_volume(&lo, &hi, slo, shi) / vol)
            .collect();
        let vol: f64 = hi.iter().zip(&lo).map(|(a, b)| a - b).product();
        best = best.max(pairwise_sum(&terms) / vol);
        let covers = (0..lo.len()).all(|k| lo[k] <= blo[k] && hi[k] >= bhi[k]);
        if covers || r > 1e12 {
            return best;
        }
        r *= 2.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
}

impl RatioRange {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Self {
        let mut min = f64::INFINITY;
        let mut max: f64 = 0.0;
        for v in it {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() {
            min = 0.0;
        }
        Self { min, max }
    }
}

/// Ranges over all cubes of the left/right ratios of the summation lemmas.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LemmaReport {
    pub cubes: usize,
    pub deepest_level: i32,
    /// `Σ_{S≤Q} ℓ(S)^a / ℓ(Q)^a`.
    pub below_sum: RatioRange,
    /// `Σ_S ℓ(S)^a D(Q,S)^{-b} / ℓ(Q)^{a-b}`.
    pub long_distance_sum: RatioRange,
    /// `Σ_{D>r} ∫_S g / D^{d+η}` against `Mg / r^η`.
    pub maximal_far: RatioRange,
    /// `Σ_{D<r} ∫_S g / D^{d-η}` against `Mg · r^η`.
    pub maximal_near: RatioRange,
    /// `Σ_{S<Q} ∫_S g` against `Mg · ℓ(Q)^d`.
    pub maximal_below: RatioRange,
}

/// Evaluate the three summation lemmas on every cube of an oriented
/// covering. `g` is a nonnegative mass per cube.
pub fn verify_sum_lemmas(
    cov: &Covering,
    a: f64,
    b: f64,
    eta: f64,
    r: f64,
    g: &[f64],
) -> Result<LemmaReport, WhitneyError> {
    let d = cov.dim() as f64;
    if !(a > d - 1.0) {
        return Err(WhitneyError::InvalidParameter(format!("need a > d-1, got a = {a}")));
    }
    if !(b > a) {
        return Err(WhitneyError::InvalidParameter(format!("need b > a, got a = {a}, b = {b}")));
    }
    if !(eta > 0.0) || !(r > 0.0) {
        return Err(WhitneyError::InvalidParameter("need eta > 0 and r > 0".into()));
    }
    if g.len() != cov.len() || g.iter().any(|v| !(*v >= 0.0)) {
        return Err(WhitneyError::InvalidParameter("g must be a nonnegative value per cube".into()));
    }
    let o = cov.orientation()?;
    let n = cov.len();

    // Subtree sums over the chain tree.
    let mut order: Vec<usize> = (0..n).collect();
    let depth: Vec<usize> = (0..n).map(|i| cov.path_to_root(i).map(|p| p.len()).unwrap_or(0)).collect();
    order.sort_by(|&x, &y| depth[y].cmp(&depth[x]));
    let mut below_l = cov.cubes.iter().map(|c| c.side().powf(a)).collect::<Vec<_>>();
    let mut below_g = g.to_vec();
    for &i in &order {
        if let Some(p) = o.parent[i] {
            below_l[p] += below_l[i];
            below_g[p] += below_g[i];
        }
    }
    let below_sum = RatioRange::from_iter((0..n).map(|i| below_l[i] / cov.cubes[i].side().powf(a)));

    let boxes = cube_boxes(cov);
    let per_cube: Vec<(f64, Option<(f64, f64, f64)>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = &cov.cubes[i];
            let mut ld = Vec::with_capacity(n);
            let mut far = Vec::new();
            let mut near = Vec::new();
            for (j, s) in cov.cubes.iter().enumerate() {
                let dd = q.side() + s.side() + super::box_distance(&boxes[i].0, &boxes[i].1, &boxes[j].0, &boxes[j].1);
                ld.push(s.side().powf(a) / dd.powf(b));
                if g[j] > 0.0 {
                    if dd > r {
                        far.push(g[j] / dd.powf(d + eta));
                    } else if dd < r {
                        near.push(g[j] / dd.powf(d - eta));
                    }
                }
            }
            let lds = pairwise_sum(&ld) / q.side().powf(a - b);
            let m = maximal_with(cov, &boxes, g, i);
            let max_parts = (m > 0.0).then(|| {
                (
                    pairwise_sum(&far) / (m / r.powf(eta)),
                    pairwise_sum(&near) / (m * r.powf(eta)),
                    (below_g[i] - g[i]) / (m * q.side().powf(d)),
                )
            });
            (lds, max_parts)
        })
        .collect();

    let parts: Vec<(f64, f64, f64)> = per_cube.iter().filter_map(|p| p.1).collect();
    Ok(LemmaReport {
        cubes: n,
        deepest_level: cov.levels().1,
        below_sum,
        long_distance_sum: RatioRange::from_iter(per_cube.iter().map(|p| p.0)),
        maximal_far: RatioRange::from_iter(parts.iter().map(|p| p.0)),
        maximal_near: RatioRange::from_iter(parts.iter().map(|p| p.1)),
        maximal_below: RatioRange::from_iter(parts.iter().map(|p| p.2)),
    })
}

#[cfg(test)]
mod tests {
    use super::super::build_covering;
    use super::*;
    use crate::geometry::{make_disk, make_polygon};

    #[test]
    fn maximal_of_single_mass() {
        let disk = make_disk(1.0).unwrap();
        let cov = build_covering(&disk, 2f64.powi(-4), 1.0).unwrap();
        let q = cov.len() / 2;
        let mut g = vec![0.0; cov.len()];
        g[q] = 3.0;
        let m = maximal(&cov, &g, q);
        assert!((m - 3.0 / cov.cubes[q].volume()).abs() < 1e-12 * m);
    }

    #[test]
    fn maximal_of_uniform_density_is_near_one() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let cov = build_covering(&sq, 2f64.powi(-6), 1.0).unwrap();
        let g: Vec<f64> = cov.cubes.iter().map(|c| c.volume()).collect();
        for q in (0..cov.len()).step_by(37) {
            let m = maximal(&cov, &g, q);
            assert!((0.5..=1.0 + 1e-12).contains(&m), "{m}");
        }
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        let disk = make_disk(1.0).unwrap();
        let mut cov = build_covering(&disk, 2f64.powi(-4), 1.0).unwrap();
        cov.orient().unwrap();
        let g = vec![1.0; cov.len()];
        assert!(verify_sum_lemmas(&cov, 0.5, 2.0, 1.0, 0.1, &g).is_err());
        assert!(verify_sum_lemmas(&cov, 1.5, 1.5, 1.0, 0.1, &g).is_err());
        assert!(verify_sum_lemmas(&cov, 1.5, 2.0, 0.0, 0.1, &g).is_err());
        assert!(verify_sum_lemmas(&cov, 1.5, 2.0, 1.0, 0.1, &g).is_ok());
    }
}
