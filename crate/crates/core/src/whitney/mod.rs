//! Dyadic Whitney coverings of Lipschitz domains.
//!
//! A covering keeps the maximal dyadic cubes `Q` with
//! `dist(Q, ∂Ω) ≥ κ·ℓ(Q)`, where `κ = max(C_W, √d)`. With that threshold
//! every kept cube also satisfies `dist(Q, ∂Ω) ≤ 4κ·ℓ(Q)` and neighbors
//! differ by at most one level. Cubes that would be smaller than
//! `min_side` are dropped and counted as the truncation layer.

mod io;
mod lemmas;
mod orient;

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{BoxRelation, Domain, Frame, GeometryError, Point, Shape};

pub use io::{dump_covering, load_covering};
pub use lemmas::{maximal, verify_sum_lemmas, LemmaReport, RatioRange};
pub use orient::{Orientation, WindowTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WhitneyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain has empty interior at this resolution")]
    EmptyInterior,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("peripheral cube {0} lies in no window canvas")]
    NoCanvas(String),
    #[error("central cubes are not connected ({components} components)")]
    DisconnectedCentral { components: usize },
    #[error("no central cubes")]
    NoCentral,
    #[error("cube {0} has no cube above it in its window")]
    NoFather(String),
    #[error("vertical parent links form a cycle through {0}")]
    Cycle(String),
    #[error("covering is not oriented")]
    NotOriented,
    #[error("cube {0} is not in the covering")]
    UnknownCube(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Semi-open dyadic cube `∏ [i_k 2^{-level}, (i_k+1) 2^{-level})` in the
/// covering frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    pub level: i32,
    pub index: Vec<i64>,
}

impl std::fmt::Display for Cube {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}; ", self.level)?;
        for (k, i) in self.index.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

impl Cube {
    pub fn new(level: i32, index: Vec<i64>) -> Self {
        Self { level, index }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn lo(&self) -> Point {
        let s = self.side();
        self.index.iter().map(|&i| i as f64 * s).collect()
    }

    pub fn hi(&self) -> Point {
        let s = self.side();
        self.index.iter().map(|&i| (i + 1) as f64 * s).collect()
    }

    pub fn center(&self) -> Point {
        let s = self.side();
        self.index.iter().map(|&i| (i as f64 + 0.5) * s).collect()
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn parent(&self) -> Cube {
        Cube { level: self.level - 1, index: self.index.iter().map(|i| i.div_euclid(2)).collect() }
    }

    pub fn children(&self) -> Vec<Cube> {
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| Cube {
                level: self.level + 1,
                index: self.index.iter().enumerate().map(|(k, &i)| 2 * i + ((mask >> k) & 1) as i64).collect(),
            })
            .collect()
    }

    pub fn corners(&self) -> Vec<Point> {
        let (lo, hi) = (self.lo(), self.hi());
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| (0..d).map(|k| if (mask >> k) & 1 == 1 { hi[k] } else { lo[k] }).collect())
            .collect()
    }

    /// The `r`-dilate `rQ` as a box.
    pub fn dilate(&self, r: f64) -> (Point, Point) {
        let c = self.center();
        let h = 0.5 * r * self.side();
        (c.iter().map(|x| x - h).collect(), c.iter().map(|x| x + h).collect())
    }

    /// Closures intersect.
    pub fn touches(&self, other: &Cube) -> bool {
        let (a0, a1, b0, b1) = (self.lo(), self.hi(), other.lo(), other.hi());
        (0..self.dim()).all(|k| a0[k] <= b1[k] && b0[k] <= a1[k])
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        x.iter().enumerate().all(|(k, &v)| v >= lo[k] && v < hi[k])
    }
}

/// Euclidean distance between two boxes.
pub fn box_distance(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    alo.iter()
        .enumerate()
        .map(|(k, _)| {
            let g = (blo[k] - ahi[k]).max(alo[k] - bhi[k]).max(0.0);
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

pub fn cube_distance(q: &Cube, s: &Cube) -> f64 {
    box_distance(&q.lo(), &q.hi(), &s.lo(), &s.hi())
}

/// `D(Q,S) = ℓ(Q) + ℓ(S) + dist(Q,S)`.
pub fn long_distance(q: &Cube, s: &Cube) -> f64 {
    q.side() + s.side() + cube_distance(q, s)
}

#[derive(Debug, Clone)]
pub struct Covering {
    /// The domain expressed in the covering frame.
    pub domain: Domain,
    /// Covering frame relative to world coordinates.
    pub frame: Frame,
    /// Cubes sorted by `(level, index)`.
    pub cubes: Vec<Cube>,
    /// `dist(Q, ∂Ω)` per cube.
    pub dist: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
    pub min_side: f64,
    pub c_w: f64,
    pub kappa: f64,
    pub root_level: i32,
    /// Boxes discarded because their Whitney cubes would be below `min_side`.
    pub truncated: usize,
    lookup: HashMap<Cube, usize>,
    subdivided: HashSet<Cube>,
    pub orientation: Option<Orientation>,
}

/// Build a covering in the world frame.
pub fn build_covering(domain: &Domain, min_side: f64, c_w: f64) -> Result<Covering, WhitneyError> {
    build_covering_in(domain, &Frame::identity(domain.dim()), min_side, c_w)
}

/// Build a covering whose cubes are aligned with `frame`.
pub fn build_covering_in(domain: &Domain, frame: &Frame, min_side: f64, c_w: f64) -> Result<Covering, WhitneyError> {
    if !(min_side > 0.0) || !min_side.is_finite() {
        return Err(WhitneyError::InvalidParameter(format!("min_side must be positive, got {min_side}")));
    }
    if !(c_w >= 1.0) {
        return Err(WhitneyError::InvalidParameter(format!("C_W must be at least 1, got {c_w}")));
    }
    let local = domain.in_frame(frame)?;
    let d = local.dim();
    let kappa = c_w.max((d as f64).sqrt());
    let (roots, root_level) = root_cubes(&local)?;

    let mut kept = Vec::new();
    let mut subdivided = HashSet::new();
    let mut truncated = 0usize;
    let mut stack = roots;
    while let Some(q) = stack.pop() {
        let rel = local.box_relation(&q.lo(), &q.hi());
        let keep = match rel {
            BoxRelation::Outside => continue,
            BoxRelation::Inside { dist } if dist >= kappa * q.side() => Some(dist),
            _ => None,
        };
        match keep {
            Some(dist) => kept.push((q, dist)),
            None => {
                if q.side() * 0.5 >= min_side {
                    stack.extend(q.children());
                    subdivided.insert(q);
                } else {
                    truncated += 1;
                }
            }
        }
    }
    if kept.is_empty() {
        return Err(WhitneyError::EmptyInterior);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    let (cubes, dist): (Vec<Cube>, Vec<f64>) = kept.into_iter().unzip();
    let lookup = cubes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let mut cov = Covering {
        domain: local,
        frame: frame.clone(),
        cubes,
        dist,
        neighbors: Vec::new(),
        min_side,
        c_w,
        kappa,
        root_level,
        truncated,
        lookup,
        subdivided,
        orientation: None,
    };
    cov.neighbors = (0..cov.cubes.len()).into_par_iter().map(|i| cov.find_neighbors(i)).collect();
    Ok(cov)
}

impl Covering {
    /// Box tiled by the starting cubes, in covering-frame coordinates.
    pub fn region(&self) -> (Point, Point) {
        let (roots, _) = root_cubes(&self.domain).expect("covering was built from these roots");
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for q in roots {
            for (k, (a, b)) in q.lo().into_iter().zip(q.hi()).enumerate() {
                lo[k] = lo[k].min(a);
                hi[k] = hi[k].max(b);
            }
        }
        (lo, hi)
    }
}

/// Starting cubes: for bounded domains the dyadic cubes of the smallest
/// level covering the bounding box; for graph domains the cubes of side
/// `R/4` tiling `[-R/4, R/4]^{d-1} × [-R/4, R/2]` inside the window.
fn root_cubes(domain: &Domain) -> Result<(Vec<Cube>, i32), WhitneyError> {
    let d = domain.dim();
    if let Shape::Graph { .. } = domain.shape {
        let w = &domain.windows[0];
        let quarter = w.side / 4.0;
        let level = -quarter.log2();
        if (level - level.round()).abs() > 1e-12 || w.center.iter().any(|c| c.abs() > 0.0) {
            return Err(WhitneyError::InvalidParameter(
                "graph-domain windows need a power-of-two side and a boundary point at the origin".into(),
            ));
        }
        let level = level.round() as i32;
        let mut roots = Vec::new();
        for mask in 0..(1usize << (d - 1)) {
            for top in -1..=1 {
                let mut ix: Vec<i64> = (0..d - 1).map(|k| if (mask >> k) & 1 == 1 { 0 } else { -1 }).collect();
                ix.push(top);
                roots.push(Cube::new(level, ix));
            }
        }
        return Ok((roots, level));
    }
    let (lo, hi) = domain.bounding_box();
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let level = -(extent.log2().ceil() as i32);
    let side = (-(level as f64)).exp2();
    let ranges: Vec<(i64, i64)> =
        (0..d).map(|k| ((lo[k] / side).floor() as i64, ((hi[k] / side).ceil() as i64 - 1).max((lo[k] / side).floor() as i64))).collect();
    let mut roots = vec![Vec::new()];
    for (a, b) in ranges {
        roots = roots
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                (a..=b).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    Ok((roots.into_iter().map(|ix| Cube::new(level, ix)).collect(), level))
}

/// All offsets in `{-1,0,1}^d` except zero.
fn unit_offsets(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for k in 0..3usize.pow(d as u32) {
        let mut r = k;
        let v: Vec<i64> = (0..d)
            .map(|_| {
                let o = (r % 3) as i64 - 1;
                r /= 3;
                o
            })
            .collect();
        if v.iter().any(|&o| o != 0) {
            out.push(v);
        }
    }
    out
}

/// Summary of the Whitney axiom checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AxiomReport {
    pub cubes: usize,
    pub levels: (i32, i32),
    pub kappa: f64,
    pub w2_disjoint: bool,
    pub w4_violations: usize,
    pub w4_min_ratio: f64,
    pub w4_max_ratio: f64,
    pub w5_violations: usize,
    pub w6_overlap: usize,
    pub w7_max: usize,
    pub truncated: usize,
}

impl AxiomReport {
    pub fn exact_axioms_hold(&self) -> bool {
        self.w2_disjoint && self.w4_violations == 0 && self.w5_violations == 0
    }
}

impl Covering {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn id_of(&self, q: &Cube) -> Option<usize> {
        self.lookup.get(q).copied()
    }

    pub fn levels(&self) -> (i32, i32) {
        (self.cubes.first().map_or(0, |c| c.level), self.cubes.iter().map(|c| c.level).max().unwrap_or(0))
    }

    /// Covering cube equal to `c` or containing it.
    fn ancestor_or_self(&self, c: &Cube) -> Option<usize> {
        let mut cur = c.clone();
        loop {
            if let Some(&i) = self.lookup.get(&cur) {
                return Some(i);
            }
            if cur.level <= self.root_level {
                return None;
            }
            cur = cur.parent();
        }
    }

    /// Cube containing the point `x` (covering-frame coordinates).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let (_, deepest) = self.levels();
        let s = (-(deepest as f64)).exp2();
        let c = Cube::new(deepest, x.iter().map(|v| (v / s).floor() as i64).collect());
        self.ancestor_or_self(&c)
    }

    fn find_neighbors(&self, i: usize) -> Vec<usize> {
        let q = &self.cubes[i];
        let mut out = Vec::new();
        for off in unit_offsets(q.dim()) {
            let c = Cube::new(q.level, q.index.iter().zip(&off).map(|(a, b)| a + b).collect());
            if let Some(j) = self.ancestor_or_self(&c) {
                out.push(j);
            } else if self.subdivided.contains(&c) {
                self.descend_touching(&c, q, &mut out);
            }
        }
        out.sort_unstable_by(|&a, &b| self.cubes[a].cmp(&self.cubes[b]));
        out.dedup();
        out.retain(|&j| j != i);
        out
    }

    fn descend_touching(&self, c: &Cube, q: &Cube, out: &mut Vec<usize>) {
        for ch in c.children() {
            if !ch.touches(q) {
                continue;
            }
            if let Some(&j) = self.lookup.get(&ch) {
                out.push(j);
            } else if self.subdivided.contains(&ch) {
                self.descend_touching(&ch, q, out);
            }
        }
    }

    /// W2: no covering cube contains another.
    pub fn check_disjoint(&self) -> bool {
        self.cubes.par_iter().all(|q| {
            let mut cur = q.clone();
            while cur.level > self.root_level {
                cur = cur.parent();
                if self.lookup.contains_key(&cur) {
                    return false;
                }
            }
            true
        })
    }

    /// W6: `max_x #{Q : x ∈ 10Q}` over cube centers and corners.
    pub fn overlap_constant(&self) -> usize {
        let (lo_level, hi_level) = self.levels();
        let d = self.dim();
        let probe = |x: &[f64]| -> usize {
            let mut count = 0;
            for level in lo_level..=hi_level {
                let s = (-(level as f64)).exp2();
                let ranges: Vec<(i64, i64)> = x
                    .iter()
                    .map(|&v| (((v - 5.0 * s) / s - 0.5).ceil() as i64, ((v + 5.0 * s) / s - 0.5).floor() as i64))
                    .collect();
                let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
                loop {
                    if self.lookup.contains_key(&Cube::new(level, idx.clone())) {
                        count += 1;
                    }
                    let mut k = 0;
                    loop {
                        if k == d {
                            break;
                        }
                        idx[k] += 1;
                        if idx[k] <= ranges[k].1 {
                            break;
                        }
                        idx[k] = ranges[k].0;
                        k += 1;
                    }
                    if k == d {
                        break;
                    }
                }
            }
            count
        };
        let with_corners = d <= 2;
        self.cubes
            .par_iter()
            .map(|q| {
                let mut best = probe(&q.center());
                if with_corners {
                    for c in q.corners() {
                        best = best.max(probe(&c));
                    }
                }
                best
            })
            .max()
            .unwrap_or(0)
    }

    /// W7: for every window, the largest number of same-level cubes inside
    /// the window met by one vertical line.
    pub fn vertical_line_count(&self) -> usize {
        let d = self.dim();
        let windows = &self.domain.windows;
        windows
            .par_iter()
            .map(|w| {
                let h = 0.5 * w.side;
                let mut by_level: HashMap<i32, Vec<(Vec<f64>, Vec<f64>)>> = HashMap::new();
                for q in &self.cubes {
                    let local: Vec<Point> = q.corners().iter().map(|c| w.local(c)).collect();
                    if !local.iter().all(|u| u.iter().all(|v| v.abs() <= h * (1.0 + 1e-12))) {
                        continue;
                    }
                    let lo: Vec<f64> = (0..d - 1).map(|k| local.iter().map(|u| u[k]).fold(f64::INFINITY, f64::min)).collect();
                    let hi: Vec<f64> = (0..d - 1).map(|k| local.iter().map(|u| u[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
                    by_level.entry(q.level).or_default().push((lo, hi));
                }
                by_level.values().map(|boxes| max_projection_overlap(boxes)).max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn check_axioms(&self) -> AxiomReport {
        let mut w4_violations = 0;
        let mut lo_ratio = f64::INFINITY;
        let mut hi_ratio: f64 = 0.0;
        for (q, &dist) in self.cubes.iter().zip(&self.dist) {
            let r = dist / q.side();
            lo_ratio = lo_ratio.min(r);
            hi_ratio = hi_ratio.max(r);
            if r < self.kappa || r > 4.0 * self.kappa {
                w4_violations += 1;
            }
        }
        let w5_violations = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, ns)| ns.iter().filter(|&&j| self.cubes[i].side() > 2.0 * self.cubes[j].side()).count())
            .sum();
        AxiomReport {
            cubes: self.len(),
            levels: self.levels(),
            kappa: self.kappa,
            w2_disjoint: self.check_disjoint(),
            w4_violations,
            w4_min_ratio: lo_ratio,
            w4_max_ratio: hi_ratio,
            w5_violations,
            w6_overlap: self.overlap_constant(),
            w7_max: self.vertical_line_count(),
            truncated: self.truncated,
        }
    }

    /// Total volume of the cubes.
    pub fn covered_volume(&self) -> f64 {
        crate::quadrature::pairwise_sum(&self.cubes.iter().map(|c| c.volume()).collect::<Vec<_>>())
    }

    pub fn orientation(&self) -> Result<&Orientation, WhitneyError> {
        self.orientation.as_ref().ok_or(WhitneyError::NotOriented)
    }
}

/// Largest number of boxes (open, in `ℝ^{d-1}`) sharing a common point.
fn max_projection_overlap(boxes: &[(Vec<f64>, Vec<f64>)]) -> usize {
    if boxes.is_empty() {
        return 0;
    }
    let m = boxes[0].0.len();
    if m == 1 {
        let mut events: Vec<(f64, i32)> = Vec::with_capacity(2 * boxes.len());
        for (lo, hi) in boxes {
            events.push((lo[0], 1));
            events.push((hi[0], -1));
        }
        // Closing events first: the intervals are open.
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut cur = 0i32;
        let mut best = 0i32;
        for (_, e) in events {
            cur += e;
            best = best.max(cur);
        }
        return best as usize;
    }
    // Higher dimensions: probe the midpoints of all boxes.
    boxes
        .iter()
        .map(|(lo, hi)| {
            let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            boxes.iter().filter(|(l, h)| (0..m).all(|k| l[k] < mid[k] && mid[k] < h[k])).count()
        })
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_graph_domain, make_polygon, GraphProfile};

    #[test]
    fn cube_geometry() {
        let q = Cube::new(2, vec![1, -1]);
        assert_eq!(q.side(), 0.25);
        assert_eq!(q.lo(), vec![0.25, -0.25]);
        assert_eq!(q.parent(), Cube::new(1, vec![0, -1]));
        assert_eq!(q.children().len(), 4);
        assert!(q.children().iter().all(|c| c.parent() == q));
    }

    #[test]
    fn long_distance_basics() {
        let q = Cube::new(3, vec![0, 0]);
        let s = Cube::new(3, vec![1, 0]);
        assert_eq!(long_distance(&q, &q), 2.0 * q.side());
        assert_eq!(long_distance(&q, &s), 2.0 * q.side());
        let far = Cube::new(3, vec![40, 0]);
        let dd = long_distance(&q, &far);
        let dist = cube_distance(&q, &far);
        assert!(dd >= dist && dd <= 3.0 * dist);
        assert_eq!(long_distance(&q, &far), long_distance(&far, &q));
    }

    #[test]
    fn disk_covering_satisfies_exact_axioms() {
        let disk = make_disk(1.0).unwrap();
        let cov = build_covering(&disk, 2f64.powi(-6), 1.0).unwrap();
        let r = cov.check_axioms();
        assert!(r.exact_axioms_hold(), "{r:?}");
    }

    #[test]
    fn square_covering_covers_interior() {
        let sq = make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let m = 2f64.powi(-7);
        let cov = build_covering(&sq, m, 1.0).unwrap();
        let inner = (1.0 - 16.0 * m).powi(2);
        assert!(cov.covered_volume() >= inner);
        assert!(cov.covered_volume() <= 1.0);
        for i in 0..50 {
            for j in 0..50 {
                let x = [(i as f64 + 0.5) / 50.0, (j as f64 + 0.5) / 50.0];
                if sq.dist_to_boundary(&x) > 8.0 * m {
                    assert!(cov.locate(&x).is_some(), "{x:?}");
                }
            }
        }
    }

    #[test]
    fn flat_half_space_rows() {
        let h = make_graph_domain(2, GraphProfile::Flat, 0.5, 1.0).unwrap();
        let cov = build_covering(&h, 2f64.powi(-8), 1.0).unwrap();
        let mut per_level: HashMap<i32, usize> = HashMap::new();
        for q in &cov.cubes {
            *per_level.entry(q.level).or_default() += 1;
        }
        for j in 5..8 {
            assert_eq!(per_level[&(j + 1)], 2 * per_level[&j]);
        }
    }

    #[test]
    fn neighbors_are_symmetric_and_touching() {
        let disk = make_disk(1.0).unwrap();
        let cov = build_covering(&disk, 2f64.powi(-5), 1.0).unwrap();
        for (i, ns) in cov.neighbors.iter().enumerate() {
            for &j in ns {
                assert!(cov.cubes[i].touches(&cov.cubes[j]));
                assert!(cov.neighbors[j].contains(&i));
            }
        }
        // brute force on a sample
        for i in (0..cov.len()).step_by(7) {
            let brute: Vec<usize> =
                (0..cov.len()).filter(|&j| j != i && cov.cubes[i].touches(&cov.cubes[j])).collect();
            let mut got = cov.neighbors[i].clone();
            got.sort();
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let disk = make_disk(1.0).unwrap();
        assert!(build_covering(&disk, 0.0, 1.0).is_err());
        assert!(build_covering(&disk, 0.1, 0.5).is_err());
    }
}
