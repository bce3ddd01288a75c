//! One-dimensional and tensor-product quadrature rules.
//!
//! Gauss–Legendre nodes are generated by Newton iteration on the Legendre
//! recurrence; adaptive integration uses the 7/15-point Gauss–Kronrod pair
//! with global bisection of the worst interval.

use num_complex::Complex64;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Chebyshev-like initial guess, refined by Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let terms: Vec<f64> = self.on(a, b).map(|(x, w)| w * f(x)).collect();
        pairwise_sum(&terms)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor Gauss–Legendre nodes over an axis-aligned box.
pub fn box_nodes(lo: &[f64], hi: &[f64], rule: &GaussLegendre) -> Vec<(Vec<f64>, f64)> {
    let d = lo.len();
    let per_axis: Vec<Vec<(f64, f64)>> = (0..d).map(|i| rule.on(lo[i], hi[i]).collect()).collect();
    let n = rule.order();
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut x = Vec::with_capacity(d);
        let mut w = 1.0;
        for i in 0..d {
            let (xi, wi) = per_axis[i][idx[i]];
            x.push(xi);
            w *= wi;
        }
        out.push((x, w));
        for i in 0..d {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
    out
}

/// Tensor Gauss–Legendre integral over an axis-aligned box.
pub fn integrate_box<F: FnMut(&[f64]) -> f64>(lo: &[f64], hi: &[f64], rule: &GaussLegendre, mut f: F) -> f64 {
    let terms: Vec<f64> = box_nodes(lo, hi, rule).into_iter().map(|(x, w)| w * f(&x)).collect();
    pairwise_sum(&terms)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum_complex(a) + pairwise_sum_complex(b)
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// Kronrod value, Gauss–Kronrod difference, and `∫|f|` by the Kronrod rule.
fn kronrod15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kron += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let k = kron * h;
    let g = gauss * h;
    (k, (k - g).norm(), abs * h.abs())
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive 7/15 Gauss–Kronrod integration of a complex integrand.
///
/// `breaks` are interior points where the integrand may be non-smooth; the
/// initial partition starts from them. An error estimate within rounding
/// of `∫|f|` counts as converged, so cancelling integrals can stop.
pub fn adaptive_gk<F: FnMut(f64) -> Complex64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Adaptive {
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut intervals: Vec<(f64, f64, Complex64, f64, f64)> = pts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e, m) = kronrod15(&mut f, w[0], w[1]);
            (w[0], w[1], v, e, m)
        })
        .collect();
    loop {
        let total: Complex64 = intervals.iter().map(|t| t.2).sum();
        let err: f64 = intervals.iter().map(|t| t.3).sum();
        let abs: f64 = intervals.iter().map(|t| t.4).sum();
        let tol = abs_tol.max(rel_tol * total.norm()).max(50.0 * f64::EPSILON * abs);
        if err <= tol {
            return Adaptive { value: total, error: err, converged: true };
        }
        if intervals.len() >= max_intervals {
            return Adaptive { value: total, error: err, converged: false };
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, t)| if t.3 > acc.1 { (i, t.3) } else { acc });
        let (a, b, _, _, _) = intervals[worst];
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Adaptive { value: total, error: err, converged: false };
        }
        let (v1, e1, m1) = kronrod15(&mut f, a, m);
        let (v2, e2, m2) = kronrod15(&mut f, m, b);
        intervals[worst] = (a, m, v1, e1, m1);
        intervals.push((m, b, v2, e2, m2));
    }
}

/// Real-valued convenience wrapper around [`adaptive_gk`].
pub fn adaptive_gk_real<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> (f64, f64, bool) {
    let r = adaptive_gk(|x| Complex64::new(f(x), 0.0), breaks, abs_tol, rel_tol, max_intervals);
    (r.value.re, r.error, r.converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let rule = GaussLegendre::new(n);
            for k in 0..(2 * n) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(k as i32));
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33] {
            let s: f64 = GaussLegendre::new(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn box_rule_matches_product() {
        let rule = GaussLegendre::new(4);
        let v = integrate_box(&[0.0, 1.0], &[2.0, 3.0], &rule, |x| x[0] * x[0] * x[1]);
        // (8/3) * (9/2 - 1/2)
        assert!((v - 8.0 / 3.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_near_singularity() {
        let eps = 1e-4;
        let r = adaptive_gk_real(|x| 1.0 / (x * x + eps * eps), &[-1.0, 1.0], 1e-12, 1e-12, 2000);
        let want = 2.0 / eps * (1.0 / eps).atan();
        assert!(r.2);
        assert!((r.0 - want).abs() / want < 1e-10);
    }

    #[test]
    fn pairwise_sum_is_order_stable() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&v), pairwise_sum(&v.clone()));
    }
}
