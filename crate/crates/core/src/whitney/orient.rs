//! Central/peripheral split, vertical fathers, chains and shadows.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::{long_distance, Covering, Cube, WhitneyError};
use crate::geometry::{Point, Window};

#[derive(Debug, Clone)]
pub struct Orientation {
    pub central: Vec<bool>,
    /// Windows whose canvas `δ₀Q_k` contains the cube.
    pub canvases: Vec<Vec<usize>>,
    /// Windows `Q_k` containing the cube.
    pub inside: Vec<Vec<usize>>,
    pub root: usize,
    /// Next cube of `[Q, Q₀]`.
    pub parent: Vec<Option<usize>>,
    /// Steps from a central cube to the root along the central graph.
    pub central_steps: Vec<Option<usize>>,
    window_father: HashMap<(usize, usize), usize>,
}

/// Bounding box of a cube in the local coordinates of a window.
fn local_extent(w: &Window, q: &Cube) -> (Point, Point) {
    let corners: Vec<Point> = q.corners().iter().map(|c| w.local(c)).collect();
    let d = q.dim();
    let lo = (0..d).map(|k| corners.iter().map(|u| u[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi = (0..d).map(|k| corners.iter().map(|u| u[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    (lo, hi)
}

/// Parameter at which the upward vertical ray from the center of `q` enters
/// the interior of `s`.
fn ray_entry(w: &Window, q: &Cube, s: &Cube) -> Option<f64> {
    let d = q.dim();
    let c = q.center();
    let mut up = vec![0.0; d];
    up[d - 1] = 1.0;
    let dir = w.frame.dir_to_world(&up);
    let (lo, hi) = (s.lo(), s.hi());
    let tol = 1e-12 * s.side();
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..d {
        if dir[k].abs() < 1e-14 {
            if c[k] <= lo[k] + tol || c[k] >= hi[k] - tol {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo[k] - c[k]) / dir[k], (hi[k] - c[k]) / dir[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t1 - t0 > tol).then_some(t0)
}

/// Measure of the overlap of the open vertical projections of `s` and `q`
/// if `s` is above `q`.
fn above_overlap(s: &(Point, Point), q: &(Point, Point)) -> Option<f64> {
    let d = s.0.len();
    let mut overlap = 1.0;
    for k in 0..d - 1 {
        let o = s.1[k].min(q.1[k]) - s.0[k].max(q.0[k]);
        if o <= 1e-12 * (s.1[k] - s.0[k]) {
            return None;
        }
        overlap *= o;
    }
    (s.1[d - 1] > q.1[d - 1] + 1e-12 * (q.1[d - 1] - q.0[d - 1])).then_some(overlap)
}

impl Covering {
    /// Classify cubes, assign canvases and fathers, pick the root and build
    /// the chain structure.
    pub fn orient(&mut self) -> Result<(), WhitneyError> {
        let params = self.domain.params;
        let windows = &self.domain.windows;
        let r = params.side;
        let n = self.len();

        let central: Vec<bool> = self
            .cubes
            .par_iter()
            .map(|q| self.domain.sup_dist_in_box(&q.lo(), &q.hi()) > params.delta2 * r)
            .collect();

        let memberships: Vec<(Vec<usize>, Vec<usize>)> = self
            .cubes
            .par_iter()
            .map(|q| {
                let c = q.center();
                let mut canv = Vec::new();
                let mut ins = Vec::new();
                for (k, w) in windows.iter().enumerate() {
                    let dc: f64 = c.iter().zip(&w.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    if dc > w.side {
                        continue;
                    }
                    let (lo, hi) = local_extent(w, q);
                    let fits = |h: f64| lo.iter().chain(&hi).all(|v| v.abs() <= h * (1.0 + 1e-12));
                    if fits(0.5 * w.side) {
                        ins.push(k);
                        if fits(0.5 * params.delta0 * w.side) {
                            canv.push(k);
                        }
                    }
                }
                (canv, ins)
            })
            .collect();
        let (canvases, inside): (Vec<Vec<usize>>, Vec<Vec<usize>>) = memberships.into_iter().unzip();

        for i in 0..n {
            if !central[i] && canvases[i].is_empty() {
                return Err(WhitneyError::NoCanvas(self.cubes[i].to_string()));
            }
        }

        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| inside[i].iter().map(move |&k| (k, i))).collect();
        let window_father: HashMap<(usize, usize), usize> = pairs
            .par_iter()
            .filter_map(|&(k, i)| {
                let w = &windows[k];
                let qe = local_extent(w, &self.cubes[i]);
                // The neighbor immediately on top: first one entered by the
                // vertical ray through the center.
                let mut hit: Option<(f64, usize)> = None;
                let mut best: Option<(f64, usize)> = None;
                for &j in &self.neighbors[i] {
                    if !inside[j].contains(&k) {
                        continue;
                    }
                    let se = local_extent(w, &self.cubes[j]);
                    if let Some(o) = above_overlap(&se, &qe) {
                        if let Some(t) = ray_entry(w, &self.cubes[i], &self.cubes[j]) {
                            if hit.is_none_or(|(bt, bj)| t < bt || (t == bt && self.cubes[j] < self.cubes[bj])) {
                                hit = Some((t, j));
                            }
                        }
                        let better = match best {
                            None => true,
                            Some((bo, bj)) => o > bo * (1.0 + 1e-12) || ((o - bo).abs() <= 1e-12 * bo && self.cubes[j] < self.cubes[bj]),
                        };
                        if better {
                            best = Some((o, j));
                        }
                    }
                }
                hit.or(best).map(|(_, j)| ((k, i), j))
            })
            .collect();

        let root = (0..n).find(|&i| central[i]).ok_or(WhitneyError::NoCentral)?;
        let mut parent = vec![None; n];
        let mut central_steps = vec![None; n];
        central_steps[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if central[j] && central_steps[j].is_none() {
                    central_steps[j] = Some(central_steps[i].unwrap() + 1);
                    parent[j] = Some(i);
                    queue.push_back(j);
                }
            }
        }
        if (0..n).any(|i| central[i] && central_steps[i].is_none()) {
            return Err(WhitneyError::DisconnectedCentral { components: count_components(&self.neighbors, &central) });
        }
        for i in 0..n {
            if central[i] {
                continue;
            }
            let k = canvases[i][0];
            match window_father.get(&(k, i)) {
                Some(&j) => parent[i] = Some(j),
                None => return Err(WhitneyError::NoFather(self.cubes[i].to_string())),
            }
        }
        // Acyclicity of the parent links.
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => break,
                }
            }
            if state[cur] == 1 && parent[cur].is_some() && path.contains(&cur) {
                return Err(WhitneyError::Cycle(self.cubes[cur].to_string()));
            }
            for p in path {
                state[p] = 2;
            }
        }

        self.orientation = Some(Orientation { central, canvases, inside, root, parent, central_steps, window_father });
        Ok(())
    }

    pub fn is_central(&self, i: usize) -> Result<bool, WhitneyError> {
        Ok(self.orientation()?.central[i])
    }

    /// Smallest window whose canvas contains the cube.
    pub fn home_window(&self, i: usize) -> Result<Option<usize>, WhitneyError> {
        Ok(self.orientation()?.canvases[i].first().copied())
    }

    /// Vertical father of cube `i` with respect to window `k`.
    pub fn father_in(&self, k: usize, i: usize) -> Result<Option<usize>, WhitneyError> {
        Ok(self.orientation()?.window_father.get(&(k, i)).copied())
    }

    /// `[Q, Q₀]` as cube ids.
    pub fn path_to_root(&self, i: usize) -> Result<Vec<usize>, WhitneyError> {
        let o = self.orientation()?;
        let mut out = vec![i];
        let mut cur = i;
        while let Some(p) = o.parent[cur] {
            out.push(p);
            cur = p;
        }
        Ok(out)
    }

    /// `P ≤ Q` iff `Q ∈ [P, Q₀]`.
    pub fn leq(&self, p: usize, q: usize) -> Result<bool, WhitneyError> {
        Ok(self.path_to_root(p)?.contains(&q))
    }

    /// The chain `[Q, S]` and the position of `Q_S` in it.
    pub fn chain_with_split(&self, q: usize, s: usize) -> Result<(Vec<usize>, usize), WhitneyError> {
        if q == s {
            return Ok((vec![q], 0));
        }
        let pq = self.path_to_root(q)?;
        if let Some(pos) = pq.iter().position(|&x| x == s) {
            return Ok((pq[..=pos].to_vec(), pos));
        }
        let ps = self.path_to_root(s)?;
        if let Some(pos) = ps.iter().position(|&x| x == q) {
            let mut c = ps[..=pos].to_vec();
            c.reverse();
            return Ok((c, 0));
        }
        let rank: HashMap<usize, usize> = ps.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        for (a, &x) in pq.iter().enumerate() {
            let first = self.neighbors[x].iter().filter_map(|j| rank.get(j).copied()).min();
            if let Some(b) = first {
                let mut c = pq[..=a].to_vec();
                c.extend(ps[..=b].iter().rev());
                return Ok((c, a));
            }
        }
        unreachable!("paths to the root always meet")
    }

    pub fn chain(&self, q: usize, s: usize) -> Result<Vec<usize>, WhitneyError> {
        Ok(self.chain_with_split(q, s)?.0)
    }

    pub fn chain_of(&self, q: &Cube, s: &Cube) -> Result<Vec<Cube>, WhitneyError> {
        let qi = self.id_of(q).ok_or_else(|| WhitneyError::UnknownCube(q.to_string()))?;
        let si = self.id_of(s).ok_or_else(|| WhitneyError::UnknownCube(s.to_string()))?;
        Ok(self.chain(qi, si)?.into_iter().map(|i| self.cubes[i].clone()).collect())
    }

    /// Remark-type constants along `[Q, Q_S]`: the largest two-sided ratio
    /// of `D(P,S)` to `D(Q,S)`, and of `D(P,Q)` to `ℓ(P)`.
    pub fn chain_distance_constants(&self, q: usize, s: usize) -> Result<(f64, f64), WhitneyError> {
        let (chain, split) = self.chain_with_split(q, s)?;
        let (cq, cs) = (&self.cubes[q], &self.cubes[s]);
        let dqs = long_distance(cq, cs);
        let mut c1: f64 = 1.0;
        let mut c2: f64 = 1.0;
        for &p in &chain[..=split] {
            let cp = &self.cubes[p];
            let r = long_distance(cp, cs) / dqs;
            c1 = c1.max(r).max(1.0 / r);
            let r2 = long_distance(cp, cq) / cp.side();
            c2 = c2.max(r2).max(1.0 / r2);
        }
        Ok((c1, c2))
    }

    /// Tree of the cubes inside window `k` under the vertical father order,
    /// hung from a formal super-root.
    pub fn window_tree(&self, k: usize) -> Result<WindowTree, WhitneyError> {
        let o = self.orientation()?;
        let vertices: Vec<usize> = (0..self.len()).filter(|&i| o.inside[i].contains(&k)).collect();
        let local: HashMap<usize, usize> = vertices.iter().enumerate().map(|(a, &i)| (i, a)).collect();
        let parent: Vec<Option<usize>> = vertices
            .iter()
            .map(|&i| o.window_father.get(&(k, i)).and_then(|j| local.get(j).copied()))
            .collect();
        Ok(WindowTree::new(k, vertices, parent))
    }

    /// `Sh(Q)` in the tree of the smallest window whose canvas holds `Q`.
    pub fn shadow(&self, i: usize) -> Result<Vec<usize>, WhitneyError> {
        let k = self.home_window(i)?.ok_or_else(|| WhitneyError::NoCanvas(self.cubes[i].to_string()))?;
        let t = self.window_tree(k)?;
        let a = t.local_of(i).expect("canvas cubes lie in their window");
        Ok(t.subtree(a).into_iter().map(|b| t.vertices[b]).collect())
    }
}

fn count_components(neighbors: &[Vec<usize>], member: &[bool]) -> usize {
    let n = member.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if !member[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if member[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// A rooted forest over covering cubes; vertices without a parent hang
/// from a formal super-root that carries no mass.
#[derive(Debug, Clone)]
pub struct WindowTree {
    pub window: usize,
    pub vertices: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Children before parents.
    pub post_order: Vec<usize>,
    local: HashMap<usize, usize>,
}

impl WindowTree {
    pub fn new(window: usize, vertices: Vec<usize>, parent: Vec<Option<usize>>) -> Self {
        let n = vertices.len();
        let mut children = vec![Vec::new(); n];
        let mut tops = Vec::new();
        for (a, p) in parent.iter().enumerate() {
            match p {
                Some(b) => children[*b].push(a),
                None => tops.push(a),
            }
        }
        let mut post_order = Vec::with_capacity(n);
        let mut stack: Vec<(usize, bool)> = tops.iter().rev().map(|&t| (t, false)).collect();
        while let Some((a, done)) = stack.pop() {
            if done {
                post_order.push(a);
            } else {
                stack.push((a, true));
                for &c in children[a].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        let local = vertices.iter().enumerate().map(|(a, &i)| (i, a)).collect();
        Self { window, vertices, parent, children, post_order, local }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn local_of(&self, cube: usize) -> Option<usize> {
        self.local.get(&cube).copied()
    }

    pub fn subtree(&self, a: usize) -> Vec<usize> {
        let mut out = vec![a];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    /// `Σ_{b ≤ a} v(b)` for every vertex.
    pub fn subtree_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut s = values.to_vec();
        for &a in &self.post_order {
            if let Some(p) = self.parent[a] {
                s[p] += s[a];
            }
        }
        s
    }

    /// Depth below the super-root (tops have depth 1).
    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.len()];
        for &a in self.post_order.iter().rev() {
            d[a] = self.parent[a].map_or(1, |p| d[p] + 1);
        }
        d
    }
}
