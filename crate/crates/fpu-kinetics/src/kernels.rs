//! Closed-form collision kernels of the linearized operator.
//!
//! Everything here is driven by the two auxiliary functions
//!
//! ```text
//! F±(x, y) = (cos(x/2) + cos(y/2))² ± 4 sin(x/2) sin(y/2)
//! ```
//!
//! on I² = (0, 2π)². The kernels are K₁ = 4·𝟙(F₋ > 0)/√F₋ and K₂ = 2/√F₊;
//! the multiplication part of the operator is V(x) = ∫ K₂(x, y) dy and
//! W = ω²V. F₊ vanishes only at the corners (0, 2π) and (2π, 0); F₋ vanishes
//! along two curves y₁(x) < y₂(x) and is negative between them, which makes
//! K₁ an inverse-square-root line singularity that every integration routine
//! in this crate has to treat explicitly.

use crate::discretize::QuadratureGrid;
use crate::dispersion::{omega, TWO_PI};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gk15, Quad};
use std::f64::consts::PI;

/// Pointwise kernel evaluations closer to the singular set than this are
/// refused; integration across the set must resolve it analytically.
pub const SINGULAR_EPS: f64 = 1e-14;

/// Relative tolerance used for the V evaluations hidden inside
/// [`b_kernel`]; chosen so kernel values carry ~11 correct digits.
const KERNEL_V_TOL: f64 = 1e-11;

#[inline]
fn half(u: f64) -> (f64, f64) {
    ((0.5 * u).cos(), (0.5 * u).sin())
}

/// F₊(x, y) = (cos(x/2) + cos(y/2))² + 4 sin(x/2) sin(y/2).
///
/// Non-negative on I² with zeros only at the corners (0, 2π) and (2π, 0);
/// symmetric in (x, y) and under the parity map (x, y) → (2π−x, 2π−y).
#[inline]
pub fn f_plus(x: f64, y: f64) -> f64 {
    let (cx, sx) = half(x);
    let (cy, sy) = half(y);
    let c = cx + cy;
    c * c + 4.0 * sx * sy
}

/// F₋(x, y) = (cos(x/2) + cos(y/2))² − 4 sin(x/2) sin(y/2).
#[inline]
pub fn f_minus(x: f64, y: f64) -> f64 {
    let (cx, sx) = half(x);
    let (cy, sy) = half(y);
    let c = cx + cy;
    c * c - 4.0 * sx * sy
}

/// F₊(x, 2π − v) evaluated stably for small v.
///
/// Forming y = 2π − v and calling [`f_plus`] quantizes y at ulp(2π) ≈ 9e−16,
/// which turns sin(y/2) into noise once v ≲ 1e−11 — exactly the boundary
/// layer the corner substitutions resolve. Folding through cos(π − v/2) =
/// −cos(v/2) removes that subtraction but leaves cos(x/2) − cos(v/2), whose
/// small-v limit 1 − cos(v/2) ≈ v²/8 underflows the ulp of 1 once v ≲ 3e−8 —
/// still inside the layer when x ≲ 1e−22. The product identity
/// cos(x/2) − cos(v/2) = 2 sin((x+v)/4) sin((v−x)/4) has no cancellation at
/// any scale, so the squared term keeps full relative precision all the way
/// down.
#[inline]
pub(crate) fn f_plus_top(x: f64, v: f64) -> f64 {
    let s1 = (0.25 * (x + v)).sin();
    let s2 = (0.25 * (v - x)).sin();
    let c2 = 4.0 * s1 * s1 * s2 * s2;
    c2 + 4.0 * (0.5 * x).sin() * (0.5 * v).sin()
}

/// F₋(x, 2π − v) evaluated stably for small v; see [`f_plus_top`].
#[inline]
pub(crate) fn f_minus_top(x: f64, v: f64) -> f64 {
    let s1 = (0.25 * (x + v)).sin();
    let s2 = (0.25 * (v - x)).sin();
    let c2 = 4.0 * s1 * s1 * s2 * s2;
    c2 - 4.0 * (0.5 * x).sin() * (0.5 * v).sin()
}

/// K₁(x, y) = 4·𝟙(F₋ > 0)/√F₋.
///
/// Returns 0 where F₋ < 0 (indicator off) and refuses evaluation within
/// [`SINGULAR_EPS`] of the zero set, where the value is meaningless and the
/// caller must integrate across the line instead (see [`g_stable`]).
pub fn k1(x: f64, y: f64) -> Result<f64> {
    let fm = f_minus(x, y);
    if fm.abs() < SINGULAR_EPS {
        return Err(Error::SingularEvaluation { x, y, what: "F- vanishes (K1 line singularity)" });
    }
    Ok(if fm > 0.0 { 4.0 / fm.sqrt() } else { 0.0 })
}

/// K₂(x, y) = 2/√F₊.
///
/// Finite everywhere on I² except the two corners; satisfies the bound
/// K₂(x, y) ≤ (sin(x/2) sin(y/2))^{−1/2} because F₊ ≥ 4 sin(x/2) sin(y/2)
/// holds term by term.
pub fn k2(x: f64, y: f64) -> Result<f64> {
    let fp = f_plus(x, y);
    if fp.abs() < SINGULAR_EPS {
        return Err(Error::SingularEvaluation { x, y, what: "F+ vanishes (corner of I²)" });
    }
    Ok(2.0 / fp.sqrt())
}

/// 2K₂ − K₁, the kernel common to B and Ã.
fn collision_difference(x: f64, y: f64) -> Result<f64> {
    Ok(2.0 * k2(x, y)? - k1(x, y)?)
}

/// The two roots of F₋(x, ·) on (0, 2π).
///
/// F₋(x, ·) is positive on [0, y1), negative on (y1, y2), positive on
/// (y2, 2π], with 0 < y1 < 2π − x < y2 < 2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Locate the zeros y₁(x) < y₂(x) of F₋(x, ·) by bisection.
///
/// Work happens in the reflected coordinate b = 2π − y, where
/// F₋(x, 2π−b) = 4(sin((x−b)/4) sin((x+b)/4))² − 4 sin(x/2) sin(b/2) =: G(b)
/// and the sign pattern G(0⁺) > 0, G(x) < 0, G(2π) > 0 brackets both roots.
/// Bisection runs until the interval collapses to adjacent floats, which is
/// stronger than any fixed tolerance; the resulting residual |F₋| is a few
/// ulps of the local slope.
///
/// For x > π the small root y₁(x) shrinks like (2π−x)³/256 and stops being
/// representable as 2π − b long before x reaches 2π (ulp(2π) ≈ 9e−16). The
/// parity identity F₋(2π−x, 2π−y) = F₋(x, y) turns that case into the mirror
/// problem x′ = 2π − x, whose b-coordinates *are* the original roots
/// (y₁ = b_small′, y₂ = b_big′) — no subtraction from 2π ever happens, so the
/// tiny root keeps full relative precision.
pub fn find_f_minus_roots(x: f64) -> Result<RootPair> {
    assert!(x > 0.0 && x < TWO_PI, "find_f_minus_roots needs 0 < x < 2π, got {x}");
    if x > PI {
        let (b_small, b_big) = bisect_f_minus_b(TWO_PI - x)?;
        return Ok(RootPair { x, y1: b_small, y2: b_big });
    }
    let (b_small, b_big) = bisect_f_minus_b(x)?;
    Ok(RootPair { x, y1: TWO_PI - b_big, y2: TWO_PI - b_small })
}

/// Bisect G(b) = F₋(x, 2π−b) for 0 < x ≤ π; returns (b_small, b_big) with
/// 0 < b_small < x < b_big < 2π.
///
/// Exposed to the assembly, which needs the roots *in b-coordinates*: cells
/// hugging 2π integrate in the complement variable, and converting a root
/// through 2π − y would truncate it to ulp(2π) — a 1e−5 relative error for
/// roots at b ~ 1e−11 (they occur: b_big ~ 4x^{1/3} for small x).
pub(crate) fn bisect_f_minus_b(x: f64) -> Result<(f64, f64)> {
    let g = |b: f64| {
        let s1 = (0.25 * (x - b)).sin();
        let s2 = (0.25 * (x + b)).sin();
        4.0 * (s1 * s2) * (s1 * s2) - 4.0 * (0.5 * x).sin() * (0.5 * b).sin()
    };

    // Small root: G > 0 at 0, G(x) = −4 sin²(x/2) < 0.
    let (mut lo, mut hi) = (0.0, x);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_small = 0.5 * (lo + hi);

    // Large root in (x, 2π): sign-generic bisection anchored at the sign of G(x).
    let (mut lo, mut hi) = (x, TWO_PI);
    let sign_lo = g(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b_big = 0.5 * (lo + hi);

    if !(0.0 < b_small && b_small < x && x < b_big && b_big < TWO_PI) {
        return Err(Error::BracketingViolated { x, detail: "root ordering b_small < x < b_big failed" });
    }
    if g(b_small).abs() > 1e-10 || g(b_big).abs() > 1e-10 {
        return Err(Error::BracketingViolated { x, detail: "bisection residual above 1e-10" });
    }
    Ok((b_small, b_big))
}

/// Exact-difference factor: F₋(x, r+d) − F₋(x, r) = sin(d/4) · h_factor(x, r, d).
///
/// Algebraically exact (sum-to-product on both pieces of F₋), so evaluating
/// F₋ *relative to an anchor r* never suffers catastrophic cancellation no
/// matter how small d is.
pub(crate) fn h_factor(x: f64, r: f64, d: f64) -> f64 {
    let m = 0.25 * (2.0 * r + d);
    -2.0 * m.sin() * (2.0 * (0.5 * x).cos() + (0.5 * (r + d)).cos() + (0.5 * r).cos())
        - 8.0 * (0.5 * x).sin() * m.cos()
}

/// Stable slope ratio g(d) = F₋(x, r+d)/d when r is a root of F₋(x, ·).
///
/// g(0) = ∂F₋/∂y at the root. Used for the σ-substitution that integrates
/// K₁ across its line singularity: with y = r ± σ² one has
/// ∫ 4/√F₋ dy = ∫ 8/√|g(±σ²)| dσ, a smooth integrand.
///
/// Only valid away from the corner y → 2π: the bracket in [`h_factor`]
/// contains cos(x/2) + cos(r/2), which for roots at r = 2π − b, b ≲ 1e−8,
/// loses the 1 − cos(b/2) ≈ b²/8 piece to quantization exactly like the raw
/// F₋ does. Roots that close to 2π must go through [`g_top_stable`] in the
/// complement coordinate instead.
pub(crate) fn g_stable(x: f64, r: f64, d: f64) -> f64 {
    if d == 0.0 {
        0.25 * h_factor(x, r, 0.0)
    } else {
        ((0.25 * d).sin() / d) * h_factor(x, r, d)
    }
}

/// Complement-coordinate twin of [`g_stable`]: slope ratio
/// g(e) = G(ρ+e)/e for G(v) = F₋(x, 2π−v), when ρ is a root of G.
///
/// Writing G(v) = C(v)² − 4 sin(x/2) sin(v/2) with
/// C(v) = cos(v/2) − cos(x/2) = 2 sin((x−v)/4) sin((x+v)/4), sum-to-product
/// on both pieces gives the exact difference
///
///   G(ρ+e) − G(ρ) = sin(e/4) · [ −2 sin((2ρ+e)/4)(C(ρ+e) + C(ρ))
///                                − 8 sin(x/2) cos((2ρ+e)/4) ].
///
/// Every factor is a plain product of sines of half/quarter angles, so the
/// value keeps full relative accuracy down to ρ, x → 0 — the regime where
/// [`g_stable`]'s bracket dies. Same use: v = ρ ± σ² turns ∫ 4/√G dv into
/// ∫ 8/√|g(±σ²)| dσ.
pub(crate) fn g_top_stable(x: f64, rho: f64, e: f64) -> f64 {
    let c_of = |v: f64| 2.0 * (0.25 * (x - v)).sin() * (0.25 * (x + v)).sin();
    let m = 0.25 * (2.0 * rho + e);
    let hb = -2.0 * m.sin() * (c_of(rho + e) + c_of(rho)) - 8.0 * (0.5 * x).sin() * m.cos();
    if e == 0.0 {
        0.25 * hb
    } else {
        ((0.25 * e).sin() / e) * hb
    }
}

/// V(x) = ∫_I K₂(x, y) dy by adaptive quadrature, to relative accuracy `tol`.
///
/// The integrand is smooth except toward the corner nearest to x — y → 2π
/// for x < π, y → 0 for x > π — where F₊ collapses through a stack of scales
/// (∝ x·b for b ≲ x^{1/3}, ∝ b⁴ above). Substituting b = u² flattens the
/// inner regime to a constant, and a split at u_m ≈ the regime crossover
/// keeps both adaptive integrals cheap. No symmetry folding happens here:
/// V(2π−x) = V(x) is a theorem about the output, not an implementation step,
/// so it stays testable.
pub fn potential_v(x: f64, tol: f64) -> Result<f64> {
    assert!(x > 0.0 && x < TWO_PI, "potential_v needs 0 < x < 2π, got {x}");
    let tol = tol.clamp(5e-13, 1e-2);
    let rel = tol / 3.0;

    // V(2π − x) = V(x) by substituting y ↦ 2π − y; the reduction is exact
    // for x ≥ π (Sterbenz), and on the lower half the only delicate corner
    // of the integrand is the one at y = 2π.
    let x = if x > PI { TWO_PI - x } else { x };
    let uc = 0.5_f64.sqrt();
    let um = (3.0 * x.powf(1.0 / 6.0)).min(0.5 * uc);

    let bulk = |y: f64| 2.0 / f_plus(x, y).sqrt();
    let i1 = adaptive_gk15(bulk, 0.0, TWO_PI - 0.5, &[x, TWO_PI - x], rel, 0.0, 4000)?;

    // y = 2π − u², dy = 2u du, where u ranges over the corner boundary layer
    // (inner piece to um ~ 3 x^{1/6}, covering the 4/√(x·v) ramp) and the
    // plateau out to v = 1/2. Must go through the folded form — see
    // f_plus_top.
    let sub = |u: f64| 4.0 * u / f_plus_top(x, u * u).sqrt();
    let i2 = adaptive_gk15(sub, 0.0, um, &[], rel, 0.0, 4000)?;
    let i3 = adaptive_gk15(sub, um, uc, &[], rel, 0.0, 4000)?;
    Ok(i1.value + i2.value + i3.value)
}

/// W(x) = ω(x)² V(x); behaves as w₀·sin(x/2)^{5/3} toward the lattice points.
pub fn potential_w(x: f64, tol: f64) -> Result<f64> {
    let w = omega(x);
    Ok(w * w * potential_v(x, tol)?)
}

/// w₀ = 4 ∫₀^∞ (2s + s⁴)^{−1/2} ds.
///
/// Three pieces: s = u² on [0, 1] (removes the s^{−1/2} endpoint), plain
/// adaptive quadrature on [1, 10⁶] with decade splits, and the analytic tail
/// ∫_S^∞ ∈ (1/S − 1/S⁴, 1/S) taken at its midpoint. At S = 10⁶ the bracket
/// half-width is ~5e−25, far below any requested tolerance.
pub fn w0_constant(tol: f64) -> f64 {
    let tol = tol.clamp(1e-13, 1e-2);
    let rel = tol / 4.0;
    // Detected non-convergence would still leave the best value of a smooth
    // integrand; this path is unreachable for the tolerances admitted above.
    let take = |r: std::result::Result<Quad, Error>| match r {
        Ok(q) => q.value,
        Err(Error::QuadratureNonConvergence { value, .. }) => value,
        Err(e) => unreachable!("w0 integrand cannot fail structurally: {e}"),
    };
    let head = take(adaptive_gk15(
        |u: f64| 2.0 / (2.0 + u.powi(6)).sqrt(),
        0.0,
        1.0,
        &[],
        rel,
        0.0,
        2000,
    ));
    let s_max = 1e6;
    let mid = take(adaptive_gk15(
        |s: f64| 1.0 / (2.0 * s + s.powi(4)).sqrt(),
        1.0,
        s_max,
        &[10.0, 100.0, 1e3, 1e4, 1e5],
        rel,
        0.0,
        4000,
    ));
    let tail = 1.0 / s_max - 0.5 / s_max.powi(4);
    4.0 * (head + mid + tail)
}

/// Kernel of B: V(x)^{−1/2} (2K₂ − K₁)(x, y) V(y)^{−1/2}.
pub fn b_kernel(x: f64, y: f64) -> Result<f64> {
    let c = collision_difference(x, y)?;
    let vx = potential_v(x, KERNEL_V_TOL)?;
    let vy = potential_v(y, KERNEL_V_TOL)?;
    Ok(c / (vx * vy).sqrt())
}

/// Kernel of Ã (the integral part of L̃ = W − Ã): ω(x) (2K₂ − K₁)(x, y) ω(y).
pub fn a_tilde_kernel(x: f64, y: f64) -> Result<f64> {
    Ok(omega(x) * collision_difference(x, y)? * omega(y))
}

/// Grid approximation of the Schur-test constant
/// C_α = sup_x |φ(x)|^{2−α} ∫ |kernel(x, y)| |φ(y)|^α dy,
/// an upper bound for the norm of the φ-conjugated kernel operator.
///
/// The integral is replaced by the grid's weighted sum and the sup by the
/// max over nodes, so the returned value is an approximation of the bound,
/// not a certified one.
pub fn schur_norm_bound<K, P>(kernel: K, phi: P, alpha: f64, grid: &QuadratureGrid) -> f64
where
    K: Fn(f64, f64) -> f64,
    P: Fn(f64) -> f64,
{
    let mut best = 0.0_f64;
    for &x in grid.nodes.iter() {
        let mut row = 0.0;
        for (&y, &w) in grid.nodes.iter().zip(&grid.weights) {
            row += w * kernel(x, y).abs() * phi(y).abs().powf(alpha);
        }
        best = best.max(phi(x).abs().powf(2.0 - alpha) * row);
    }
    best
}
