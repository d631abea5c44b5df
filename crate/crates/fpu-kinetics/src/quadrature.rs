//! Quadrature toolbox shared by the kernel and operator modules.
//!
//! Four pieces: Gauss–Legendre rules of arbitrary order (Newton on the
//! Legendre recurrence), a globally adaptive Gauss–Kronrod 7/15 integrator,
//! geometrically refined panel sweeps for integrable endpoint singularities
//! (the workhorse for the `1/√F` kernel lines), and Chebyshev interpolation
//! used to table smooth factors on grid cells.

use crate::error::Error;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

/// A quadrature rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Integrate `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }
}

/// Gauss–Legendre rule of order `n`, computed by Newton iteration on the
/// three-term recurrence. Exact for polynomials of degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_and_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

macro_rules! cached_rule {
    ($name:ident, $n:expr) => {
        /// Cached Gauss–Legendre rule (shared; assembly hot path).
        pub fn $name() -> &'static GaussRule {
            static RULE: OnceLock<GaussRule> = OnceLock::new();
            RULE.get_or_init(|| gauss_legendre($n))
        }
    };
}

cached_rule!(gl5, 5);
cached_rule!(gl7, 7);
cached_rule!(gl8, 8);
cached_rule!(gl9, 9);
cached_rule!(gl10, 10);
cached_rule!(gl12, 12);
cached_rule!(gl16, 16);
cached_rule!(gl20, 20);

/// Result of an adaptive integration: value and an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

// Gauss–Kronrod 7/15 pair on [-1, 1] (positive half; symmetric).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15_segment<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).abs();
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 integration over `[a, b]`, seeded
/// with the interior break points in `splits` (out-of-range entries are
/// ignored). Splits the segment with the worst error estimate until the
/// total satisfies `err ≤ max(abs_tol, rel_tol·|value|)` or the interval
/// budget runs out, in which case the achieved estimate is reported.
pub fn adaptive_gk15<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<Quad, Error> {
    let mut pts: Vec<f64> = vec![a];
    let mut sorted: Vec<f64> = splits.iter().copied().filter(|&s| s > a && s < b).collect();
    sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
    sorted.dedup();
    pts.extend(sorted);
    pts.push(b);

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for pair in pts.windows(2) {
        let (v, e) = gk15_segment(&mut f, pair[0], pair[1]);
        value += v;
        error += e;
        heap.push(Segment { a: pair[0], b: pair[1], value: v, error: e });
    }

    let mut count = heap.len();
    while error > abs_tol.max(rel_tol * value.abs()) && count < max_intervals {
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at rounding resolution: keep its contribution as-is.
            value += 0.0;
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk15_segment(&mut f, worst.a, mid);
        let (v2, e2) = gk15_segment(&mut f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        count += 1;
    }

    let requested = abs_tol.max(rel_tol * value.abs());
    if error > requested {
        Err(Error::QuadratureNonConvergence { value, achieved: error, requested })
    } else {
        Ok(Quad { value, error })
    }
}

/// Sweep geometrically refined Gauss panels over `[a, b]`.
///
/// Panel boundaries run `0, L·nmin, L·nmin·ratio, … , L` in distance from the
/// refined endpoint (`a` if `toward_a`, else `b`), resolving an integrable
/// endpoint singularity such as an inverse square root to near machine
/// accuracy. The callback receives `(point, weight)`.
pub fn geom_panels<F: FnMut(f64, f64)>(
    a: f64,
    b: f64,
    toward_a: bool,
    ratio: f64,
    nmin: f64,
    rule: &GaussRule,
    mut visit: F,
) {
    let len = b - a;
    if len <= 0.0 {
        return;
    }
    let mut lo = 0.0;
    let mut hi = len * nmin;
    loop {
        if hi >= len {
            hi = len;
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let d = mid + half * x;
            let (p, pw) = if toward_a { (a + d, half * w) } else { (b - d, half * w) };
            visit(p, pw);
        }
        if hi >= len {
            break;
        }
        lo = hi;
        hi *= ratio;
    }
}

/// Default geometric-panel parameters used across the crate.
pub const GEOM_RATIO: f64 = 3.0;
pub const GEOM_NMIN: f64 = 1e-12;

/// Chebyshev interpolant of a smooth function on `[a, b]`.
#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolate `f` at the `degree + 1` Chebyshev points of the first
    /// kind mapped to `[a, b]` (all interior, so `f` is never called at the
    /// endpoints).
    pub fn interpolate<F: FnMut(f64) -> f64>(mut f: F, degree: usize, a: f64, b: f64) -> Self {
        let n = degree + 1;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let values: Vec<f64> = (0..n)
            .map(|j| {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                f(mid + half * theta.cos())
            })
            .collect();
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                acc += v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            *c = 2.0 * acc / n as f64;
        }
        coeffs[0] *= 0.5;
        Chebyshev { a, b, coeffs }
    }

    /// Evaluate by Clenshaw recurrence.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let next = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = next;
        }
        t * b1 - b2 + self.coeffs[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = gauss_legendre(5);
        // degree 9 on [-1, 1]: ∫ x^8 = 2/9, odd powers vanish
        let val = rule.integrate(-1.0, 1.0, |x| x.powi(8) + 3.0 * x.powi(9));
        assert_relative_eq!(val, 2.0 / 9.0, max_relative = 1e-14);
        let rule = gauss_legendre(16);
        let val = rule.integrate(0.0, 2.0, |x| x.powi(31));
        assert_relative_eq!(val, 2.0_f64.powi(32) / 32.0, max_relative = 1e-12);
    }

    #[test]
    fn gauss_weights_sum_to_interval() {
        for n in [1, 2, 3, 7, 40, 161] {
            let rule = gauss_legendre(n);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_gk15_smooth_and_peaked() {
        let q = adaptive_gk15(|x: f64| x.sin(), 0.0, std::f64::consts::PI, &[], 1e-13, 0.0, 100)
            .unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-13);
        // narrow Lorentzian: ∫ 1/(ε²+x²) over [-1,1] = 2 atan(1/ε)/ε
        let eps = 1e-4;
        let q = adaptive_gk15(
            |x: f64| 1.0 / (eps * eps + x * x),
            -1.0,
            1.0,
            &[0.0],
            1e-12,
            0.0,
            2000,
        )
        .unwrap();
        assert_relative_eq!(q.value, 2.0 * (1.0 / eps).atan() / eps, max_relative = 1e-11);
    }

    #[test]
    fn adaptive_gk15_reports_failure() {
        // |x|^{-0.9} is integrable but too hard for a 3-interval budget.
        let res = adaptive_gk15(|x: f64| x.abs().powf(-0.9), 0.0, 1.0, &[], 1e-10, 0.0, 3);
        match res {
            Err(Error::QuadratureNonConvergence { achieved, .. }) => assert!(achieved > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn geometric_panels_resolve_inverse_square_root() {
        // The innermost panel [0, nmin] straddles the singularity with a plain
        // Gauss rule, so the floor is ~1% of its mass 2·√nmin ≈ 2e-8; callers
        // needing better either shrink nmin or substitute the singularity away.
        let mut acc = 0.0;
        geom_panels(0.0, 1.0, true, GEOM_RATIO, GEOM_NMIN, gl9(), |x, w| {
            acc += w / x.sqrt();
        });
        assert_relative_eq!(acc, 2.0, max_relative = 5e-7);
        let mut acc = 0.0;
        geom_panels(2.0, 3.0, false, GEOM_RATIO, GEOM_NMIN, gl9(), |x, w| {
            acc += w / (3.0 - x).sqrt();
        });
        assert_relative_eq!(acc, 2.0, max_relative = 5e-7);
    }

    #[test]
    fn chebyshev_interpolates_smooth_functions() {
        let ch = Chebyshev::interpolate(|x: f64| x.exp(), 8, 0.0, 1.0);
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert_relative_eq!(ch.eval(x), x.exp(), max_relative = 1e-9);
        }
    }
}
