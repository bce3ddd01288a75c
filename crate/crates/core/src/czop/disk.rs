//! Structure of `B_𝔻(z^{λ₁} z̄^{λ₂})` inside the unit disk, with constants
//! fitted from principal-value evaluations.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use super::pv::{pv_transform, PvSchedule};
use super::{complex_monomial, Beurling, CzError};
use crate::geometry::make_disk;

/// Which of the four regimes `λ` falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DiskCase {
    /// `λ₁ = 0`: zero inside.
    Vanishing,
    /// `0 < λ₁ < λ₂ + 1`: one monomial inside, one outside.
    Below,
    /// `λ₁ = λ₂ + 1`: one monomial inside, zero outside.
    Balanced,
    /// `λ₁ > λ₂ + 1`: two monomials inside, zero outside.
    Above,
}

/// `constant · z^{a} z̄^{b}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiskTerm {
    pub exponents: (u32, u32),
    pub constant: Complex64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DiskForm {
    pub case: DiskCase,
    pub inside: Vec<DiskTerm>,
    /// Exponent of the `z^{−k}` term outside the disk, if any.
    pub outside_power: Option<i64>,
    /// Value of the inside terms at the query point.
    pub value: Complex64,
}

fn classify(l1: u32, l2: u32) -> (DiskCase, Vec<(u32, u32)>, Option<i64>) {
    if l1 == 0 {
        (DiskCase::Vanishing, vec![], Some(-(l2 as i64) - 2))
    } else if l1 < l2 + 1 {
        (DiskCase::Below, vec![(l1 - 1, l2 + 1)], Some(l1 as i64 - l2 as i64 - 2))
    } else if l1 == l2 + 1 {
        (DiskCase::Balanced, vec![(l1 - 1, l2 + 1)], None)
    } else {
        (DiskCase::Above, vec![(l1 - 1, l2 + 1), (l1 - l2 - 2, 0)], None)
    }
}

/// Constants of the inside terms from the residue computation:
/// `λ₁/(λ₂+1)` and `−(λ₁−λ₂−1)/(λ₂+1)`.
pub fn disk_exact_constants(l1: u32, l2: u32) -> Vec<f64> {
    let (_, terms, _) = classify(l1, l2);
    let k = (l2 + 1) as f64;
    let mut c = Vec::new();
    if !terms.is_empty() {
        c.push(l1 as f64 / k);
    }
    if terms.len() == 2 {
        c.push(-((l1 - l2 - 1) as f64) / k);
    }
    c
}

fn sample_points() -> Vec<[f64; 2]> {
    (0..8)
        .map(|i| {
            let r = 0.25 + 0.06 * i as f64;
            let t = 0.3 + i as f64 * std::f64::consts::TAU / 8.0;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn fit(l1: u32, l2: u32) -> Result<Vec<Complex64>, CzError> {
    let (_, terms, _) = classify(l1, l2);
    if terms.is_empty() {
        return Ok(Vec::new());
    }
    let disk = make_disk(1.0)?;
    let (re, im) = complex_monomial(l1, l2, [0.0, 0.0]);
    let sched = PvSchedule::default();
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut rhs = Vec::new();
    for x in sample_points() {
        let v = pv_transform(&Beurling, &disk, &re, x, &sched)?.value
            + Complex64::i() * pv_transform(&Beurling, &disk, &im, x, &sched)?.value;
        let z = Complex64::new(x[0], x[1]);
        rows.push(terms.iter().map(|&(a, b)| z.powu(a) * z.conj().powu(b)).collect());
        rhs.push(v);
    }
    // Normal equations A*A c = A*v.
    let n = terms.len();
    let mut g = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    for (row, v) in rows.iter().zip(&rhs) {
        for i in 0..n {
            b[i] += row[i].conj() * v;
            for j in 0..n {
                g[i][j] += row[i].conj() * row[j];
            }
        }
    }
    if n == 1 {
        return Ok(vec![b[0] / g[0][0]]);
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let tr = (g[0][0] + g[1][1]).re;
    let disc = (tr * tr - 4.0 * det.re).max(0.0).sqrt();
    let (big, small) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
    let cond = if small > 0.0 { big / small } else { f64::INFINITY };
    if cond > 1e8 {
        return Err(CzError::IllConditioned(cond));
    }
    Ok(vec![(g[1][1] * b[0] - g[0][1] * b[1]) / det, (g[0][0] * b[1] - g[1][0] * b[0]) / det])
}

type Cache = Mutex<HashMap<(u32, u32), Vec<Complex64>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Regime, inside monomials and fitted constants of `B_𝔻(z^{λ₁} z̄^{λ₂})`,
/// evaluated at `z ∈ 𝔻`.
pub fn disk_closed_form(lambda: (u32, u32), z: Complex64) -> Result<DiskForm, CzError> {
    let (l1, l2) = lambda;
    let (case, exps, outside_power) = classify(l1, l2);
    let cached = cache().lock().unwrap().get(&lambda).cloned();
    let constants = match cached {
        Some(c) => c,
        None => {
            let c = fit(l1, l2)?;
            cache().lock().unwrap().insert(lambda, c.clone());
            c
        }
    };
    let inside: Vec<DiskTerm> =
        exps.iter().zip(&constants).map(|(&exponents, &constant)| DiskTerm { exponents, constant }).collect();
    let value = inside.iter().map(|t| t.constant * z.powu(t.exponents.0) * z.conj().powu(t.exponents.1)).sum();
    Ok(DiskForm { case, inside, outside_power, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes() {
        let z = Complex64::new(0.2, 0.1);
        let f = disk_closed_form((0, 0), z).unwrap();
        assert_eq!(f.case, DiskCase::Vanishing);
        assert_eq!(f.value, Complex64::new(0.0, 0.0));
        let f = disk_closed_form((1, 0), z).unwrap();
        assert_eq!(f.case, DiskCase::Balanced);
        assert_eq!(f.inside[0].exponents, (0, 1));
        assert!((f.inside[0].constant - 1.0).norm() < 1e-8);
        let f = disk_closed_form((2, 0), z).unwrap();
        assert_eq!(f.case, DiskCase::Above);
        let exact = disk_exact_constants(2, 0);
        for (t, c) in f.inside.iter().zip(exact) {
            assert!((t.constant - c).norm() < 1e-8, "{t:?}");
        }
        let f = disk_closed_form((1, 1), z).unwrap();
        assert_eq!(f.case, DiskCase::Below);
        assert_eq!(f.outside_power, Some(-2));
        assert!((f.inside[0].constant - 0.5).norm() < 1e-8);
    }
}
