//! Naive reference for the tree condition and random trees on which it is
//! exactly computable.

use czsob::carleson::conjugate;
use czsob::TreeProblem;
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};
use rand::Rng;

fn big(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn root_exact(v: &BigInt, n: u32) -> Option<BigInt> {
    let r = v.nth_root(n);
    (r.pow(n) == *v).then_some(r)
}

/// `x^e` for rational `x ≥ 0`, `None` when irrational.
pub fn rational_pow(x: &BigRational, e: Rational64) -> Option<BigRational> {
    if x.is_zero() {
        return Some(BigRational::zero());
    }
    let b = *e.denom() as u32;
    let base = BigRational::new(root_exact(x.numer(), b)?, root_exact(x.denom(), b)?);
    let mut v = BigRational::one();
    for _ in 0..e.numer().unsigned_abs() {
        v *= &base;
    }
    Some(if e.is_negative() { v.recip() } else { v })
}

fn is_formal(prob: &TreeProblem<BigRational>, v: usize) -> bool {
    prob.formal == Some(v)
}

/// Every vertex's `(Σ_{Q≤x} S(Q)^{p′} ρ(Q)^{1−p′}, S(x))`, each shadow sum
/// taken by walking every vertex up to the root.
pub fn brute_force(prob: &TreeProblem<BigRational>) -> Option<Vec<(BigRational, BigRational)>> {
    let n = prob.parent.len();
    let q = conjugate(prob.p);
    let ancestors = |v: usize| {
        let mut out = vec![v];
        let mut c = v;
        while let Some(p) = prob.parent[c] {
            out.push(p);
            c = p;
        }
        out
    };
    let mut s = vec![BigRational::zero(); n];
    for v in (0..n).filter(|&v| !is_formal(prob, v)) {
        for a in ancestors(v) {
            s[a] += &prob.mu[v];
        }
    }
    let mut l = vec![BigRational::zero(); n];
    for v in (0..n).filter(|&v| !is_formal(prob, v)) {
        let term = rational_pow(&s[v], q)? * rational_pow(&prob.rho[v], Rational64::one() - q)?;
        for a in ancestors(v) {
            l[a] += &term;
        }
    }
    Some(l.into_iter().zip(s).collect())
}

/// Random recursive tree with at most `max_vertices` vertices. With
/// `p′ = a/b`, every shadow mass and weight is a `b`-th power of a
/// rational, so all terms of the condition are rational.
pub fn random_exact_tree<R: Rng>(rng: &mut R, max_vertices: usize, p: Rational64) -> TreeProblem<BigRational> {
    let n = rng.random_range(1..=max_vertices.max(1));
    let b = *conjugate(p).denom() as u32;
    let parent: Vec<Option<usize>> = (0..n).map(|v| (v > 0).then(|| rng.random_range(0..v))).collect();
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        children[parent[v].unwrap()].push(v);
    }
    let mut mu = vec![BigRational::zero(); n];
    let mut s = vec![BigRational::zero(); n];
    if b == 1 {
        for v in 0..n {
            if rng.random_bool(0.8) {
                mu[v] = big(rng.random_range(0..40), rng.random_range(1..8));
            }
        }
    } else {
        // Parents have smaller ids, so descending ids visit children first.
        let m = BigInt::from(2).pow(b);
        for v in (0..n).rev() {
            let below: BigRational = children[v].iter().map(|&c| s[c].clone()).fold(BigRational::zero(), |a, x| a + x);
            let scaled = (&below * BigRational::from_integer(m.clone())).ceil().to_integer();
            let mut k = scaled.nth_root(b);
            if k.pow(b) < scaled {
                k += 1;
            }
            k += rng.random_range(0..3);
            s[v] = BigRational::new(k.pow(b), m.clone());
            mu[v] = &s[v] - below;
        }
    }
    let rho = (0..n)
        .map(|_| {
            let r = big(rng.random_range(1..9), rng.random_range(1..9));
            (0..b).fold(BigRational::one(), |a, _| a * &r)
        })
        .collect();
    TreeProblem { parent, mu, rho, p, formal: None }
}
