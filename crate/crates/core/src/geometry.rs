//! Lipschitz domains, their boundary windows, and geometric queries.
//!
//! Three families are supported: disks, simple polygons, and special
//! Lipschitz (graph) domains `{y_d > A(y')}`. Disk and polygon queries are
//! exact; graph domains are exact for flat, wedge and piecewise-linear
//! profiles and use a Gauss–Newton projection for arbitrary profiles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::quadrature::GaussLegendre;

pub type Point = Vec<f64>;

/// Half-length used to turn the unbounded pieces of a graph boundary into
/// segments.
const GRAPH_EXTENT: f64 = 1.0e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("polygon needs at least three vertices")]
    TooFewVertices,
    #[error("polygon has a repeated vertex at index {0}")]
    RepeatedVertex(usize),
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon interior angle at vertex {0} is degenerate")]
    DegenerateAngle(usize),
    #[error("Lipschitz bound must lie in (0, 1), got {0}")]
    InvalidBound(f64),
    #[error("measured slope {measured} exceeds the declared bound {bound}")]
    SlopeExceeded { measured: f64, bound: f64 },
    #[error("window construction failed: {0}")]
    WindowConstruction(String),
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Window size `R` and the shrink factors `δ₀` (canvas), `δ₁` (boundary
/// cover) and `δ₂` (central threshold).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowParams {
    pub side: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl WindowParams {
    pub fn with_side(side: f64) -> Self {
        Self { side, delta0: 0.45, delta1: 0.125, delta2: 0.0625 }
    }
}

/// An orthonormal frame. `axes[i]` is the world direction of local axis
/// `i`; the last axis is the vertical one.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub origin: Point,
    pub axes: Vec<Vec<f64>>,
}

impl Frame {
    pub fn identity(dim: usize) -> Self {
        let axes = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { origin: vec![0.0; dim], axes }
    }

    /// Planar frame whose vertical axis points along `vertical`.
    pub fn planar(origin: [f64; 2], vertical: [f64; 2]) -> Self {
        let n = (vertical[0] * vertical[0] + vertical[1] * vertical[1]).sqrt();
        let (a, b) = (vertical[0] / n, vertical[1] / n);
        Self { origin: origin.to_vec(), axes: vec![vec![b, -a], vec![a, b]] }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn is_identity(&self) -> bool {
        *self == Frame::identity(self.dim())
    }

    pub fn to_local(&self, x: &[f64]) -> Point {
        self.axes
            .iter()
            .map(|ax| ax.iter().zip(x).zip(&self.origin).map(|((a, xi), oi)| a * (xi - oi)).sum())
            .collect()
    }

    pub fn to_world(&self, u: &[f64]) -> Point {
        let mut x = self.origin.clone();
        for (ui, ax) in u.iter().zip(&self.axes) {
            for (xj, aj) in x.iter_mut().zip(ax) {
                *xj += ui * aj;
            }
        }
        x
    }

    pub fn dir_to_world(&self, u: &[f64]) -> Point {
        let mut x = vec![0.0; self.dim()];
        for (ui, ax) in u.iter().zip(&self.axes) {
            for (xj, aj) in x.iter_mut().zip(ax) {
                *xj += ui * aj;
            }
        }
        x
    }

    /// Frame expressed in the local coordinates of `outer`.
    pub fn relative_to(&self, outer: &Frame) -> Frame {
        let origin = outer.to_local(&self.origin);
        let axes = self
            .axes
            .iter()
            .map(|a| outer.axes.iter().map(|o| o.iter().zip(a).map(|(p, q)| p * q).sum()).collect())
            .collect();
        Frame { origin, axes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowKind {
    Radial,
    Edge,
    Corner,
    Graph,
}

/// A boundary window: a cube of side `side` centered on the boundary whose
/// double contains the boundary as a Lipschitz graph over the horizontal
/// local coordinates.
#[derive(Debug, Clone)]
pub struct Window {
    pub center: Point,
    pub side: f64,
    pub frame: Frame,
    pub lipschitz_bound: f64,
    pub kind: WindowKind,
}

impl Window {
    /// Local coordinates of `x` relative to the window.
    pub fn local(&self, x: &[f64]) -> Point {
        self.frame.to_local(x)
    }

    /// Whether `x` lies in the window shrunk (or dilated) by `factor`.
    pub fn contains_scaled(&self, x: &[f64], factor: f64) -> bool {
        let h = 0.5 * factor * self.side;
        self.local(x).iter().all(|c| c.abs() <= h * (1.0 + 1e-12))
    }
}

/// Profile of a special Lipschitz domain `{y_d > A(y')}`.
#[derive(Clone)]
pub enum GraphProfile {
    Flat,
    /// `A(y') = slope · |y'_1|`.
    Wedge { slope: f64 },
    /// Piecewise-linear in `y'_1` (planar only), extended linearly.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for GraphProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphProfile::Flat => write!(f, "Flat"),
            GraphProfile::Wedge { slope } => write!(f, "Wedge({slope})"),
            GraphProfile::PiecewiseLinear { knots, .. } => write!(f, "PiecewiseLinear({} knots)", knots.len()),
            GraphProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl GraphProfile {
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            GraphProfile::Flat => 0.0,
            GraphProfile::Wedge { slope } => slope * u[0].abs(),
            GraphProfile::PiecewiseLinear { knots, values } => pl_eval(knots, values, u[0]),
            GraphProfile::Custom(f) => f(u),
        }
    }
}

fn pl_eval(knots: &[f64], values: &[f64], t: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return values[0];
    }
    let i = match knots.iter().position(|&k| k > t) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => n - 2,
    };
    let s = (t - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] + s * (values[i + 1] - values[i])
}

#[derive(Debug, Clone)]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    /// Counter-clockwise simple polygon.
    Polygon { vertices: Vec<[f64; 2]> },
    Graph { dim: usize, profile: GraphProfile, delta: f64 },
}

/// Relation of a closed box to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxRelation {
    Inside { dist: f64 },
    Outside,
    Crossing,
}

/// A boundary piece used for contour integrals (planar bounded domains).
#[derive(Debug, Clone, Copy)]
pub enum BoundaryPiece {
    Segment { a: [f64; 2], b: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub shape: Shape,
    pub params: WindowParams,
    pub windows: Vec<Window>,
}

pub fn make_disk(radius: f64) -> Result<Domain, GeometryError> {
    make_disk_at([0.0, 0.0], radius)
}

pub fn make_disk_at(center: [f64; 2], radius: f64) -> Result<Domain, GeometryError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::NonPositiveRadius(radius));
    }
    Domain::new(Shape::Disk { center, radius }, WindowParams::with_side(radius / 2.0))
}

pub fn make_polygon(vertices: &[[f64; 2]]) -> Result<Domain, GeometryError> {
    let verts = validate_polygon(vertices)?;
    let min_edge = (0..verts.len())
        .map(|i| dist2(verts[i], verts[(i + 1) % verts.len()]))
        .fold(f64::INFINITY, f64::min);
    // Sharp corners need smaller windows; halve until every window is valid.
    let mut side = 0.3 * min_edge;
    let mut last = None;
    for _ in 0..8 {
        match Domain::new(Shape::Polygon { vertices: verts.clone() }, WindowParams::with_side(side)) {
            Ok(d) => return Ok(d),
            Err(e) => last = Some(e),
        }
        side *= 0.5;
    }
    Err(last.unwrap())
}

/// Special Lipschitz domain over `ℝ^{dim-1}`, restricted to one window of
/// side `window_side` centered at the boundary point above the origin.
pub fn make_graph_domain(
    dim: usize,
    profile: GraphProfile,
    delta: f64,
    window_side: f64,
) -> Result<Domain, GeometryError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(GeometryError::InvalidBound(delta));
    }
    if dim < 2 {
        return Err(GeometryError::DimensionMismatch { expected: 2, got: dim });
    }
    match &profile {
        GraphProfile::PiecewiseLinear { knots, values } => {
            if dim != 2 {
                return Err(GeometryError::Unsupported("piecewise-linear profiles are planar"));
            }
            if knots.len() != values.len() || knots.len() < 2 || knots.windows(2).any(|w| w[1] <= w[0]) {
                return Err(GeometryError::WindowConstruction("knots must be strictly increasing".into()));
            }
        }
        GraphProfile::Wedge { slope } if slope.abs() > delta => {
            return Err(GeometryError::SlopeExceeded { measured: slope.abs(), bound: delta });
        }
        _ => {}
    }
    let measured = sampled_slope(&profile, dim, window_side);
    if measured > delta * (1.0 + 1e-9) {
        return Err(GeometryError::SlopeExceeded { measured, bound: delta });
    }
    // Coverings of a graph domain stay inside its single window, which then
    // serves as the canvas.
    let params = WindowParams { delta0: 1.0, ..WindowParams::with_side(window_side) };
    Domain::new(Shape::Graph { dim, profile, delta }, params)
}

/// Piecewise-linear profile on `[−extent, extent]` with `pieces` equal
/// pieces, slopes uniform in `[−0.95δ, 0.95δ]`, and `A(0) = 0`.
pub fn random_lipschitz_profile<R: rand::Rng>(rng: &mut R, delta: f64, extent: f64, pieces: usize) -> GraphProfile {
    let pieces = pieces.max(1);
    let h = 2.0 * extent / pieces as f64;
    let knots: Vec<f64> = (0..=pieces).map(|i| -extent + i as f64 * h).collect();
    let mut values = vec![0.0];
    for _ in 0..pieces {
        let s = rng.random_range(-0.95 * delta..=0.95 * delta);
        values.push(values.last().unwrap() + s * h);
    }
    let shift = pl_eval(&knots, &values, 0.0);
    values.iter_mut().for_each(|v| *v -= shift);
    GraphProfile::PiecewiseLinear { knots, values }
}

fn sampled_slope(profile: &GraphProfile, dim: usize, extent: f64) -> f64 {
    let m = 2 * dim - 1;
    let n = if dim == 2 { 801 } else { 41 };
    let h = 2.0 * extent / (n - 1) as f64;
    let mut worst: f64 = 0.0;
    for axis in 0..(dim - 1) {
        for i in 0..n {
            for j in 0..(if dim == 2 { 1 } else { n }) {
                let mut u = vec![0.0; dim - 1];
                u[axis] = -extent + i as f64 * h;
                if dim > 2 {
                    u[(axis + 1) % (dim - 1)] = -extent + j as f64 * h;
                }
                let mut v = u.clone();
                v[axis] += h;
                let s = (profile.eval(&v) - profile.eval(&u)).abs() / h;
                worst = worst.max(s);
            }
        }
    }
    let _ = m;
    worst
}

fn validate_polygon(vertices: &[[f64; 2]]) -> Result<Vec<[f64; 2]>, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if dist2(vertices[i], vertices[j]) < 1e-12 {
                return Err(GeometryError::RepeatedVertex(j));
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    let mut verts = vertices.to_vec();
    if signed_area(&verts) < 0.0 {
        verts.reverse();
    }
    for i in 0..n {
        let prev = verts[(i + n - 1) % n];
        let next = verts[(i + 1) % n];
        let a = interior_angle(prev, verts[i], next);
        if a < 1e-6 || a > 2.0 * PI - 1e-6 {
            return Err(GeometryError::DegenerateAngle(i));
        }
    }
    Ok(verts)
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

/// Interior angle at `p` of a counter-clockwise polygon.
fn interior_angle(prev: [f64; 2], p: [f64; 2], next: [f64; 2]) -> f64 {
    let a = (prev[1] - p[1]).atan2(prev[0] - p[0]);
    let b = (next[1] - p[1]).atan2(next[0] - p[0]);
    (a - b).rem_euclid(2.0 * PI)
}

pub(crate) fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d.abs() < 1e-14 && p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

pub(crate) fn point_segment_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    dist2(p, [a[0] + t * dx, a[1] + t * dy])
}

fn point_box_dist(p: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let dx = (lo[0] - p[0]).max(0.0).max(p[0] - hi[0]);
    let dy = (lo[1] - p[1]).max(0.0).max(p[1] - hi[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Liang–Barsky test for a segment meeting a closed box.
fn segment_meets_box(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..2 {
        if d[i] == 0.0 {
            if a[i] < lo[i] || a[i] > hi[i] {
                return false;
            }
        } else {
            let mut ta = (lo[i] - a[i]) / d[i];
            let mut tb = (hi[i] - a[i]) / d[i];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

fn segment_box_dist(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> f64 {
    if segment_meets_box(a, b, lo, hi) {
        return 0.0;
    }
    let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
    let mut d = point_box_dist(a, lo, hi).min(point_box_dist(b, lo, hi));
    for c in corners {
        d = d.min(point_segment_dist(c, a, b));
    }
    d
}

impl Domain {
    fn new(shape: Shape, params: WindowParams) -> Result<Self, GeometryError> {
        let mut d = Domain { shape, params, windows: Vec::new() };
        d.windows = d.generate_windows()?;
        Ok(d)
    }

    /// Rebuild the windows with new parameters.
    pub fn with_params(&self, params: WindowParams) -> Result<Self, GeometryError> {
        Domain::new(self.shape.clone(), params)
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Graph { dim, .. } => *dim,
            _ => 2,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.shape, Shape::Graph { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.shape {
            Shape::Disk { .. } => "disk",
            Shape::Polygon { .. } => "polygon",
            Shape::Graph { .. } => "graph",
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Disk { center, radius } => dist2([x[0], x[1]], *center) < *radius,
            Shape::Polygon { vertices } => winding_number(vertices, [x[0], x[1]]) != 0,
            Shape::Graph { dim, profile, .. } => x[dim - 1] > profile.eval(&x[..dim - 1]),
        }
    }

    pub fn dist_to_boundary(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Disk { center, radius } => (radius - dist2([x[0], x[1]], *center)).abs(),
            Shape::Polygon { vertices } => {
                let p = [x[0], x[1]];
                let n = vertices.len();
                (0..n).map(|i| point_segment_dist(p, vertices[i], vertices[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
            Shape::Graph { dim, profile, .. } => match profile {
                GraphProfile::Flat => x[dim - 1].abs(),
                GraphProfile::Custom(_) => graph_distance_newton(profile, x),
                _ => {
                    let p = [x[0], x[dim - 1]];
                    self.segments()
                        .iter()
                        .map(|(a, b)| point_segment_dist(p, *a, *b))
                        .fold(f64::INFINITY, f64::min)
                }
            },
        }
    }

    /// Boundary as segments in the plane (polygon edges, or the `(y_1, y_d)`
    /// section of a wedge / piecewise-linear graph).
    fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        match &self.shape {
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| (vertices[i], vertices[(i + 1) % n])).collect()
            }
            Shape::Graph { profile: GraphProfile::Wedge { slope }, .. } => vec![
                ([-GRAPH_EXTENT, slope * GRAPH_EXTENT], [0.0, 0.0]),
                ([0.0, 0.0], [GRAPH_EXTENT, slope * GRAPH_EXTENT]),
            ],
            Shape::Graph { profile: GraphProfile::PiecewiseLinear { knots, values }, .. } => {
                let n = knots.len();
                let mut pts = Vec::with_capacity(n + 2);
                let s0 = (values[1] - values[0]) / (knots[1] - knots[0]);
                let s1 = (values[n - 1] - values[n - 2]) / (knots[n - 1] - knots[n - 2]);
                pts.push([knots[0] - GRAPH_EXTENT, values[0] - s0 * GRAPH_EXTENT]);
                for i in 0..n {
                    pts.push([knots[i], values[i]]);
                }
                pts.push([knots[n - 1] + GRAPH_EXTENT, values[n - 1] + s1 * GRAPH_EXTENT]);
                pts.windows(2).map(|w| (w[0], w[1])).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Relation of the closed box `[lo, hi]` to the domain, with the exact
    /// box-to-boundary distance when the box lies inside.
    pub fn box_relation(&self, lo: &[f64], hi: &[f64]) -> BoxRelation {
        match &self.shape {
            Shape::Disk { center, radius } => {
                let near = point_box_dist(*center, [lo[0], lo[1]], [hi[0], hi[1]]);
                let far = (lo[0] - center[0]).abs().max((hi[0] - center[0]).abs()).hypot(
                    (lo[1] - center[1]).abs().max((hi[1] - center[1]).abs()),
                );
                if far < *radius {
                    BoxRelation::Inside { dist: radius - far }
                } else if near > *radius {
                    BoxRelation::Outside
                } else {
                    BoxRelation::Crossing
                }
            }
            Shape::Graph { dim, profile: GraphProfile::Flat, .. } => {
                let d = dim - 1;
                if lo[d] > 0.0 {
                    BoxRelation::Inside { dist: lo[d] }
                } else if hi[d] < 0.0 {
                    BoxRelation::Outside
                } else {
                    BoxRelation::Crossing
                }
            }
            Shape::Graph { dim, profile: GraphProfile::Custom(_), .. } => {
                let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                let half_diag = 0.5 * lo.iter().zip(hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
                let dc = self.dist_to_boundary(&c);
                let _ = dim;
                if dc <= half_diag {
                    BoxRelation::Crossing
                } else if self.contains(&c) {
                    BoxRelation::Inside { dist: dc - half_diag }
                } else {
                    BoxRelation::Outside
                }
            }
            _ => {
                let d = self.dim();
                let (l, h) = ([lo[0], lo[d - 1]], [hi[0], hi[d - 1]]);
                let segs = self.segments();
                if segs.iter().any(|(a, b)| segment_meets_box(*a, *b, l, h)) {
                    return BoxRelation::Crossing;
                }
                let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                if self.contains(&c) {
                    let dist = segs.iter().map(|(a, b)| segment_box_dist(*a, *b, l, h)).fold(f64::INFINITY, f64::min);
                    BoxRelation::Inside { dist }
                } else {
                    BoxRelation::Outside
                }
            }
        }
    }

    /// `sup_{x ∈ box} dist(x, ∂Ω)` for a box inside the domain. Exact for
    /// disks and flat graphs; sampled on a `5^d` grid otherwise.
    pub fn sup_dist_in_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match &self.shape {
            Shape::Disk { center, radius } => radius - point_box_dist(*center, [lo[0], lo[1]], [hi[0], hi[1]]),
            Shape::Graph { dim, profile: GraphProfile::Flat, .. } => hi[dim - 1],
            _ => {
                let d = lo.len();
                let m = 5usize;
                let mut best: f64 = 0.0;
                for k in 0..m.pow(d as u32) {
                    let mut x = Vec::with_capacity(d);
                    let mut r = k;
                    for i in 0..d {
                        let t = (r % m) as f64 / (m - 1) as f64;
                        r /= m;
                        x.push(lo[i] + t * (hi[i] - lo[i]));
                    }
                    best = best.max(self.dist_to_boundary(&x));
                }
                best
            }
        }
    }

    /// Parameter intervals `(t0, t1)` with `x + t·dir ∈ Ω` for `t > 0`, on
    /// a bounded planar domain. `dir` must be a unit vector.
    pub fn ray_intervals(&self, x: [f64; 2], dir: [f64; 2]) -> Vec<(f64, f64)> {
        match &self.shape {
            Shape::Disk { center, radius } => {
                let p = [x[0] - center[0], x[1] - center[1]];
                let b = p[0] * dir[0] + p[1] * dir[1];
                let c = p[0] * p[0] + p[1] * p[1] - radius * radius;
                if c < 0.0 {
                    return vec![(0.0, -b + (b * b - c).sqrt())];
                }
                let disc = b * b - c;
                if disc <= 0.0 || b >= 0.0 {
                    return Vec::new();
                }
                let s = disc.sqrt();
                vec![((-b - s).max(0.0), -b + s)]
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut ts: Vec<f64> = Vec::new();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let den = dir[0] * e[1] - dir[1] * e[0];
                    if den.abs() < 1e-300 {
                        continue;
                    }
                    let w = [a[0] - x[0], a[1] - x[1]];
                    let t = (w[0] * e[1] - w[1] * e[0]) / den;
                    let s = (w[0] * dir[1] - w[1] * dir[0]) / den;
                    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                        ts.push(t);
                    }
                }
                ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
                let mut out = Vec::new();
                let mut start = 0.0;
                let mut inside = winding_number(vertices, x) != 0;
                for t in ts {
                    if inside {
                        out.push((start, t));
                    } else {
                        start = t;
                    }
                    inside = !inside;
                }
                out
            }
            Shape::Graph { .. } => Vec::new(),
        }
    }

    /// Directions (angles) from `x` towards polygon vertices; breakpoints for
    /// polar quadrature.
    pub fn vertex_angles(&self, x: [f64; 2]) -> Vec<f64> {
        match &self.shape {
            Shape::Polygon { vertices } => vertices
                .iter()
                .map(|v| (v[1] - x[1]).atan2(v[0] - x[0]).rem_euclid(2.0 * PI))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn boundary_pieces(&self) -> Result<Vec<BoundaryPiece>, GeometryError> {
        match &self.shape {
            Shape::Disk { center, radius } => Ok(vec![BoundaryPiece::Circle { center: *center, radius: *radius }]),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                Ok((0..n).map(|i| BoundaryPiece::Segment { a: vertices[i], b: vertices[(i + 1) % n] }).collect())
            }
            Shape::Graph { .. } => Err(GeometryError::Unsupported("contour integrals need a bounded planar domain")),
        }
    }

    /// Area (or volume) quadrature nodes over the domain. Graph domains are
    /// integrated over their window box.
    pub fn area_nodes(&self, order: usize) -> Result<Vec<(Point, f64)>, GeometryError> {
        let rule = GaussLegendre::new(order);
        match &self.shape {
            Shape::Disk { center, radius } => {
                let m = 4 * order;
                let mut out = Vec::with_capacity(order * m);
                for (r, wr) in rule.on(0.0, *radius) {
                    for k in 0..m {
                        let th = 2.0 * PI * k as f64 / m as f64;
                        out.push((vec![center[0] + r * th.cos(), center[1] + r * th.sin()], wr * r * 2.0 * PI / m as f64));
                    }
                }
                Ok(out)
            }
            Shape::Polygon { vertices } => {
                let mut out = Vec::new();
                for [a, b, c] in ear_clip(vertices) {
                    let det = ((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])).abs();
                    for (s, ws) in rule.on(0.0, 1.0) {
                        for (t, wt) in rule.on(0.0, 1.0) {
                            let x = a[0] + s * (b[0] - a[0]) + s * t * (c[0] - b[0]);
                            let y = a[1] + s * (b[1] - a[1]) + s * t * (c[1] - b[1]);
                            out.push((vec![x, y], ws * wt * s * det));
                        }
                    }
                }
                Ok(out)
            }
            Shape::Graph { dim, profile, .. } => {
                if *dim != 2 {
                    return Err(GeometryError::Unsupported("graph area quadrature is planar"));
                }
                let w = &self.windows[0];
                let h = 0.5 * w.side;
                let top = w.center[1] + h;
                let mut breaks = vec![-h, h];
                if let GraphProfile::PiecewiseLinear { knots, .. } = profile {
                    breaks.extend(knots.iter().copied().filter(|k| k.abs() < h));
                }
                if let GraphProfile::Wedge { .. } = profile {
                    breaks.push(0.0);
                }
                if let GraphProfile::Custom(_) = profile {
                    breaks.extend((1..32).map(|i| -h + 2.0 * h * i as f64 / 32.0));
                }
                breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
                breaks.dedup();
                let mut out = Vec::new();
                for seg in breaks.windows(2) {
                    for (u, wu) in rule.on(seg[0], seg[1]) {
                        let a = profile.eval(&[u]);
                        if a >= top {
                            continue;
                        }
                        for (v, wv) in rule.on(a, top) {
                            out.push((vec![u, v], wu * wv));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Axis-aligned bounding box of the region that coverings tile.
    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.shape {
            Shape::Disk { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
            Shape::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for i in 0..2 {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
            Shape::Graph { .. } => {
                let w = &self.windows[0];
                let h = 0.5 * w.side;
                (w.center.iter().map(|c| c - h).collect(), w.center.iter().map(|c| c + h).collect())
            }
        }
    }

    /// The domain expressed in the local coordinates of `frame`.
    pub fn in_frame(&self, frame: &Frame) -> Result<Domain, GeometryError> {
        if frame.is_identity() {
            return Ok(self.clone());
        }
        let map = |p: [f64; 2]| {
            let l = frame.to_local(&p);
            [l[0], l[1]]
        };
        let shape = match &self.shape {
            Shape::Disk { center, radius } => Shape::Disk { center: map(*center), radius: *radius },
            Shape::Polygon { vertices } => Shape::Polygon { vertices: vertices.iter().map(|v| map(*v)).collect() },
            Shape::Graph { .. } => return Err(GeometryError::Unsupported("graph domains are covered in their own frame")),
        };
        let windows = self
            .windows
            .iter()
            .map(|w| Window {
                center: frame.to_local(&w.center),
                side: w.side,
                frame: w.frame.relative_to(frame),
                lipschitz_bound: w.lipschitz_bound,
                kind: w.kind,
            })
            .collect();
        Ok(Domain { shape, params: self.params, windows })
    }

    /// Lowest boundary crossing along the vertical line of window `w` at
    /// horizontal local coordinate `u`, searched within the doubled window.
    pub fn window_graph(&self, w: &Window, u: &[f64]) -> Option<f64> {
        if let Shape::Graph { profile, .. } = &self.shape {
            if w.frame.is_identity() {
                return Some(profile.eval(u));
            }
        }
        let mut start = u.to_vec();
        start.push(-w.side);
        let p = w.frame.to_world(&start);
        let mut up = vec![0.0; u.len()];
        up.push(1.0);
        let dir = w.frame.dir_to_world(&up);
        let (p, dir) = ([p[0], p[1]], [dir[0], dir[1]]);
        let tmax = 2.0 * w.side;
        let hit = match &self.shape {
            Shape::Disk { center, radius } => {
                let q = [p[0] - center[0], p[1] - center[1]];
                let b = q[0] * dir[0] + q[1] * dir[1];
                let c = q[0] * q[0] + q[1] * q[1] - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    None
                } else {
                    [-b - disc.sqrt(), -b + disc.sqrt()].into_iter().filter(|t| *t >= 0.0).reduce(f64::min)
                }
            }
            _ => {
                let mut best: Option<f64> = None;
                for (a, b) in self.segments() {
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let den = dir[0] * e[1] - dir[1] * e[0];
                    if den.abs() < 1e-300 {
                        continue;
                    }
                    let wv = [a[0] - p[0], a[1] - p[1]];
                    let t = (wv[0] * e[1] - wv[1] * e[0]) / den;
                    let s = (wv[0] * dir[1] - wv[1] * dir[0]) / den;
                    if t >= 0.0 && (0.0..=1.0).contains(&s) {
                        best = Some(best.map_or(t, |b: f64| b.min(t)));
                    }
                }
                best
            }
        };
        hit.filter(|t| *t <= tmax * (1.0 + 1e-9)).map(|t| t - w.side)
    }

    /// Measured Lipschitz constant of a window graph and whether the
    /// graph description of `Ω ∩ 2Q` holds at all sampled test points.
    pub fn audit_window(&self, w: &Window, samples: usize) -> (f64, bool) {
        if self.dim() != 2 {
            if let Shape::Graph { profile, dim, .. } = &self.shape {
                return (sampled_slope(profile, *dim, w.side), true);
            }
        }
        let n = samples.max(8);
        let h = 2.0 * w.side / n as f64;
        let us: Vec<f64> = (0..=n).map(|i| -w.side + i as f64 * h).collect();
        // A column with no crossing lies entirely above the graph's exit
        // from the doubled window; record it as the window top.
        let graph: Vec<f64> = us
            .iter()
            .map(|u| self.window_graph(w, &[*u]).unwrap_or(w.side))
            .collect();
        let mut slope: f64 = 0.0;
        // A column without a crossing next to one with a low crossing is a
        // cliff; it counts toward the slope like any other jump.
        for i in 0..n {
            slope = slope.max((graph[i + 1] - graph[i]).abs() / h);
        }
        let mut ok = true;
        for (i, u) in us.iter().enumerate() {
            let a = graph[i];
            for j in 0..=n {
                let v = -w.side + j as f64 * h;
                if (v - a).abs() < 1e-9 * w.side {
                    continue;
                }
                let x = w.frame.to_world(&[*u, v]);
                if self.contains(&x) != (v > a) {
                    ok = false;
                }
            }
        }
        (slope, ok)
    }

    /// Uniform boundary samples at spacing about `h` (planar bounded domains;
    /// for graph domains, samples of the graph inside the window).
    pub fn boundary_samples(&self, h: f64) -> Vec<Point> {
        match &self.shape {
            Shape::Disk { center, radius } => {
                let n = ((2.0 * PI * radius / h).ceil() as usize).max(8);
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut out = Vec::new();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let m = ((dist2(a, b) / h).ceil() as usize).max(1);
                    for k in 0..m {
                        let t = k as f64 / m as f64;
                        out.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
            Shape::Graph { dim, profile, .. } => {
                let ext = 0.5 * self.params.side * self.params.delta1;
                let m = ((2.0 * ext / h).ceil() as usize).max(2);
                if *dim == 2 {
                    (0..=m)
                        .map(|k| {
                            let u = -ext + 2.0 * ext * k as f64 / m as f64;
                            vec![u, profile.eval(&[u])]
                        })
                        .collect()
                } else {
                    vec![{
                        let mut p = vec![0.0; *dim];
                        p[dim - 1] = profile.eval(&vec![0.0; dim - 1]);
                        p
                    }]
                }
            }
        }
    }

    /// Every boundary sample lies in some `δ₁`-shrunk window.
    pub fn windows_cover_boundary(&self) -> bool {
        let h = self.params.delta1 * self.params.side / 4.0;
        self.boundary_samples(h)
            .iter()
            .all(|b| self.windows.iter().any(|w| w.contains_scaled(b, self.params.delta1)))
    }

    fn generate_windows(&self) -> Result<Vec<Window>, GeometryError> {
        let p = self.params;
        let r = p.side;
        match &self.shape {
            Shape::Graph { dim, profile, delta } => {
                let mut c = vec![0.0; *dim];
                c[dim - 1] = profile.eval(&vec![0.0; dim - 1]);
                let mut frame = Frame::identity(*dim);
                frame.origin = vec![0.0; *dim];
                Ok(vec![Window { center: c, side: r, frame, lipschitz_bound: *delta, kind: WindowKind::Graph }])
            }
            Shape::Disk { center, radius } => {
                if r >= *radius {
                    return Err(GeometryError::WindowConstruction(format!("window side {r} must be below the radius {radius}")));
                }
                let delta = r / (radius * radius - r * r).sqrt();
                let mut out: Vec<Window> = Vec::new();
                for b in self.boundary_samples(p.delta1 * r / 4.0) {
                    if out.iter().any(|w| w.contains_scaled(&b, p.delta1)) {
                        continue;
                    }
                    let inward = [center[0] - b[0], center[1] - b[1]];
                    let frame = Frame::planar([b[0], b[1]], inward);
                    out.push(Window { center: b, side: r, frame, lipschitz_bound: delta, kind: WindowKind::Radial });
                }
                Ok(out)
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut out: Vec<Window> = Vec::new();
                let bisector = |i: usize| {
                    let v = vertices[i];
                    let a = vertices[(i + n - 1) % n];
                    let b = vertices[(i + 1) % n];
                    let ea = [a[0] - v[0], a[1] - v[1]];
                    let eb = [b[0] - v[0], b[1] - v[1]];
                    let (la, lb) = (ea[0].hypot(ea[1]), eb[0].hypot(eb[1]));
                    let mut dir = [ea[0] / la + eb[0] / lb, ea[1] / la + eb[1] / lb];
                    // Reflex corners: the inward bisector points the other way.
                    let turn = cross(a, v, b);
                    if dir[0].hypot(dir[1]) < 1e-12 {
                        dir = [-(eb[1]), eb[0]];
                    } else if turn < 0.0 {
                        dir = [-dir[0], -dir[1]];
                    }
                    dir
                };
                for (i, v) in vertices.iter().enumerate() {
                    let frame = Frame::planar(*v, bisector(i));
                    let mut w = Window { center: v.to_vec(), side: r, frame, lipschitz_bound: 0.0, kind: WindowKind::Corner };
                    let (slope, ok) = self.audit_window(&w, 64);
                    if !ok {
                        return Err(GeometryError::WindowConstruction(format!("corner window at vertex {i} is not a graph")));
                    }
                    w.lipschitz_bound = slope;
                    out.push(w);
                }
                for b in self.boundary_samples(p.delta1 * r / 4.0) {
                    if out.iter().any(|w| w.contains_scaled(&b, p.delta1)) {
                        continue;
                    }
                    let bp = [b[0], b[1]];
                    let edge = (0..n)
                        .min_by(|&i, &j| {
                            point_segment_dist(bp, vertices[i], vertices[(i + 1) % n])
                                .partial_cmp(&point_segment_dist(bp, vertices[j], vertices[(j + 1) % n]))
                                .unwrap()
                        })
                        .unwrap();
                    let e = [vertices[(edge + 1) % n][0] - vertices[edge][0], vertices[(edge + 1) % n][1] - vertices[edge][1]];
                    let normal = [-e[1], e[0]];
                    let nearest_vertex = (0..n)
                        .min_by(|&i, &j| dist2(bp, vertices[i]).partial_cmp(&dist2(bp, vertices[j])).unwrap())
                        .unwrap();
                    let mut candidates = vec![(normal, WindowKind::Edge), (bisector(nearest_vertex), WindowKind::Corner)];
                    // Fall back to a fan of tilted normals near sharp corners.
                    for k in 1..=12 {
                        for sign in [1.0, -1.0] {
                            let t: f64 = sign * k as f64 * PI / 36.0;
                            let tilted = [normal[0] * t.cos() - normal[1] * t.sin(), normal[0] * t.sin() + normal[1] * t.cos()];
                            candidates.push((tilted, WindowKind::Edge));
                        }
                    }
                    // Flattest valid candidate; ties keep the earlier one.
                    let mut best: Option<Window> = None;
                    for (dir, kind) in candidates {
                        let mut w = Window { center: b.clone(), side: r, frame: Frame::planar(bp, dir), lipschitz_bound: 0.0, kind };
                        let (slope, ok) = self.audit_window(&w, 64);
                        if ok && best.as_ref().is_none_or(|b| slope < b.lipschitz_bound) {
                            w.lipschitz_bound = slope;
                            let flat = slope == 0.0;
                            best = Some(w);
                            if flat {
                                break;
                            }
                        }
                    }
                    if let Some(w) = best {
                        out.push(w);
                    } else {
                        return Err(GeometryError::WindowConstruction(format!(
                            "no valid window at boundary point ({:.4}, {:.4}); reduce the window side",
                            b[0], b[1]
                        )));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn winding_number(vertices: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = vertices.len();
    let mut wn = 0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Gauss–Newton projection onto the graph of `A`, started from the vertical
/// foot point; 10 iterations or relative step below `1e-12`.
fn graph_distance_newton(profile: &GraphProfile, x: &[f64]) -> f64 {
    let d = x.len();
    let xp = &x[..d - 1];
    let xd = x[d - 1];
    let vertical = (xd - profile.eval(xp)).abs();
    let mut u = xp.to_vec();
    let fd = 1e-7;
    for _ in 0..10 {
        let a = profile.eval(&u);
        let g: Vec<f64> = (0..d - 1)
            .map(|i| {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += fd;
                dn[i] -= fd;
                (profile.eval(&up) - profile.eval(&dn)) / (2.0 * fd)
            })
            .collect();
        let b: Vec<f64> = (0..d - 1).map(|i| (u[i] - xp[i]) + (a - xd) * g[i]).collect();
        let gb: f64 = g.iter().zip(&b).map(|(p, q)| p * q).sum();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let step: Vec<f64> = (0..d - 1).map(|i| -(b[i] - g[i] * gb / (1.0 + gg))).collect();
        let norm: f64 = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        for i in 0..d - 1 {
            u[i] += step[i];
        }
        if norm <= 1e-12 * (1.0 + u.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            break;
        }
    }
    let a = profile.eval(&u);
    let proj = (u.iter().zip(xp).map(|(p, q)| (p - q).powi(2)).sum::<f64>() + (a - xd).powi(2)).sqrt();
    proj.min(vertical)
}

/// Ear-clipping triangulation of a counter-clockwise simple polygon.
fn ear_clip(vertices: &[[f64; 2]]) -> Vec<[[f64; 2]; 3]> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut tris = Vec::new();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10_000 {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (vertices[ia], vertices[ib], vertices[ic]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let contains_other = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = vertices[j];
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if contains_other {
                continue;
            }
            tris.push([a, b, c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        tris.push([vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]]);
    }
    tris
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Domain {
        make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn disk_membership_and_distance() {
        let d = make_disk(1.0).unwrap();
        assert_eq!(d.dist_to_boundary(&[0.0, 0.0]), 1.0);
        assert!(d.contains(&[0.5, 0.0]));
        assert!(!d.contains(&[1.5, 0.0]));
        let d2 = make_disk(2.0).unwrap();
        assert_eq!(d2.dist_to_boundary(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn disk_rejects_bad_radius() {
        assert_eq!(make_disk(0.0).unwrap_err(), GeometryError::NonPositiveRadius(0.0));
        assert!(make_disk(-1.0).is_err());
    }

    #[test]
    fn square_membership_and_distance() {
        let s = unit_square();
        assert!(s.contains(&[0.5, 0.5]));
        assert!(!s.contains(&[1.5, 0.5]));
        assert!((s.dist_to_boundary(&[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((s.dist_to_boundary(&[0.1, 0.5]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn corner_window_of_square_has_unit_slope() {
        let s = unit_square();
        let w = s.windows.iter().find(|w| w.kind == WindowKind::Corner && w.center == vec![0.0, 0.0]).unwrap();
        assert!((w.lipschitz_bound - 1.0).abs() < 1e-9, "{}", w.lipschitz_bound);
        let (slope, ok) = s.audit_window(w, 200);
        assert!(ok);
        assert!((slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polygon_errors() {
        assert_eq!(make_polygon(&[[0.0, 0.0], [1.0, 0.0]]).unwrap_err(), GeometryError::TooFewVertices);
        assert!(matches!(
            make_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(GeometryError::RepeatedVertex(_))
        ));
        // bow tie
        assert!(matches!(
            make_polygon(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(GeometryError::SelfIntersecting(_, _))
        ));
    }

    #[test]
    fn clockwise_input_is_normalized() {
        let s = make_polygon(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(s.contains(&[0.5, 0.5]));
        assert!(s.windows_cover_boundary());
    }

    #[test]
    fn graph_domains() {
        let h = make_graph_domain(2, GraphProfile::Flat, 0.5, 1.0).unwrap();
        assert_eq!(h.dist_to_boundary(&[0.3, 0.25]), 0.25);
        assert!(!h.contains(&[0.0, -0.1]));
        let h3 = make_graph_domain(3, GraphProfile::Flat, 0.5, 1.0).unwrap();
        assert_eq!(h3.dist_to_boundary(&[0.1, 0.2, 0.25]), 0.25);
        let delta = 0.5;
        let w = make_graph_domain(3, GraphProfile::Wedge { slope: delta }, 0.6, 1.0).unwrap();
        assert!(w.contains(&[1.0, 0.0, delta + 1.0]));
        assert!(matches!(
            make_graph_domain(2, GraphProfile::Wedge { slope: 0.9 }, 0.5, 1.0),
            Err(GeometryError::SlopeExceeded { .. })
        ));
        assert!(matches!(make_graph_domain(2, GraphProfile::Flat, 1.0, 1.0), Err(GeometryError::InvalidBound(_))));
    }

    #[test]
    fn custom_profile_distance_matches_exact_wedge() {
        let exact = make_graph_domain(2, GraphProfile::Wedge { slope: 0.3 }, 0.5, 1.0).unwrap();
        let custom = make_graph_domain(2, GraphProfile::Custom(Arc::new(|u: &[f64]| 0.3 * u[0].abs())), 0.5, 1.0).unwrap();
        for x in [[0.4, 0.5], [-0.2, 0.3], [0.05, 0.2]] {
            let a = exact.dist_to_boundary(&x);
            let b = custom.dist_to_boundary(&x);
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn windows_cover_boundary_for_builtins() {
        assert!(make_disk(1.0).unwrap().windows_cover_boundary());
        assert!(unit_square().windows_cover_boundary());
        let tri = make_polygon(&[[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]]).unwrap();
        assert!(tri.windows_cover_boundary());
    }

    #[test]
    fn disk_window_slope_is_tangent_of_aperture() {
        let d = make_disk(1.0).unwrap();
        let w = &d.windows[0];
        let (slope, ok) = d.audit_window(w, 400);
        assert!(ok);
        assert!(slope <= w.lipschitz_bound + 1e-9);
        assert!((w.lipschitz_bound - 0.5 / (0.75f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn area_quadrature_recovers_areas() {
        let area = |d: &Domain| d.area_nodes(8).unwrap().iter().map(|n| n.1).sum::<f64>();
        assert!((area(&make_disk(1.0).unwrap()) - PI).abs() < 1e-12);
        assert!((area(&unit_square()) - 1.0).abs() < 1e-12);
        let l = make_polygon(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        assert!((area(&l) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_relation_is_exact_for_square() {
        let s = unit_square();
        assert_eq!(s.box_relation(&[0.25, 0.25], &[0.5, 0.5]), BoxRelation::Inside { dist: 0.25 });
        assert_eq!(s.box_relation(&[0.9, 0.2], &[1.1, 0.3]), BoxRelation::Crossing);
        assert_eq!(s.box_relation(&[1.5, 0.2], &[1.6, 0.3]), BoxRelation::Outside);
    }

    #[test]
    fn frames_round_trip() {
        let f = Frame::planar([0.3, -0.2], [1.0, 1.0]);
        let x = [0.7, 0.1];
        let back = f.to_world(&f.to_local(&x));
        assert!((back[0] - x[0]).abs() < 1e-15 && (back[1] - x[1]).abs() < 1e-15);
        let s = unit_square().in_frame(&Frame::planar([0.0, 0.0], [1.0, 1.0])).unwrap();
        assert!(s.contains(&[0.0, 0.5]));
        assert!(!s.contains(&[0.0, -0.1]));
    }

    #[test]
    fn ray_intervals_through_concave_polygon() {
        let l = make_polygon(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]).unwrap();
        let iv = l.ray_intervals([0.5, 1.5], [1.0, -1.0 + 1e-9].map(|c: f64| c / 2f64.sqrt()));
        assert!(!iv.is_empty());
        let iv = l.ray_intervals([0.5, 0.5], [1.0, 0.0]);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].1 - 1.5).abs() < 1e-12);
        let iv = l.ray_intervals([-1.0, 0.5], [1.0, 0.0]);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 1.0).abs() < 1e-12 && (iv[0].1 - 3.0).abs() < 1e-12);
        let disk = make_disk(1.0).unwrap();
        let iv = disk.ray_intervals([-2.0, 0.0], [1.0, 0.0]);
        assert!((iv[0].0 - 1.0).abs() < 1e-12 && (iv[0].1 - 3.0).abs() < 1e-12);
        assert!(disk.ray_intervals([-2.0, 0.0], [-1.0, 0.0]).is_empty());
    }
}
