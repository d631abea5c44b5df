//! Independent routes to the quadratic form ⟨f, Lf⟩.
//!
//! The assembled matrix is one way to evaluate the form; this module holds
//! the two others, deliberately built from *different* representations of
//! the operator so that a bug in any one route cannot hide:
//!
//!   * [`regularized_quadratic_form`] integrates the raw three-dimensional
//!     display 4⟨f, L_ε f⟩ = ∭ δ_ε(Ω)|f(x)+f(y)−f(z)−f(x+y−z)|² with the
//!     Lorentzian δ_ε(X) = ε π⁻¹(ε² + X²)⁻¹ — no resonance manifold is ever
//!     solved for, so the kernels' closed forms are not trusted at all;
//!   * [`resolved_quadratic_form`] integrates the two-dimensional form in
//!     which the y-integral has been resolved against the δ: the manifold
//!     enters through the closed-form solution y = h(x, z) and the Jacobian
//!     factor 1/(2√F₊), but no regularization parameter remains.
//!
//! Agreement of the ε → 0 extrapolation of the first with the second (and
//! of both with the matrix form) is the strongest correctness check in the
//! crate.
//!
//! Both quadratures place subdivision points on the known structure lines —
//! z ∈ {x, y}, the umklapp roots, the kink of |sin((x+y−z)/2)| at
//! x+y−z ∈ {0, 2π}, and the onset curves where the umklapp branch appears
//! (the resolvent of a √ kink in the y-integrand) — and refine geometrically
//! toward them. Away from those lines the integrands are analytic and fixed
//! Gauss panels converge fast.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dispersion::{h_solve, TWO_PI};
use crate::error::{Error, Result};
use crate::kernels::f_plus;
use crate::quadrature::{gl10, gl12, gl16, gl7, gl8, GaussRule};

/// Zeros in z of Ω(x, y, ·) on (0, 2π): always z = x and z = y (direct
/// exchange), plus up to two umklapp solutions per wrapping branch of
/// x + y − z.
///
/// On the branch where u = x+y−z stays in (0, 2π), Ω = 0 reduces to
/// sin(z/2) + sin((σ−z)/2) = S with σ = x+y, S = sin(x/2)+sin(y/2), whose
/// solutions beyond {x, y} come from the *negative* sign of sin((σ−z)/2):
/// cos(z/2 − σ/4) = −S/(2cos(σ/4)), i.e. z = σ/2 + π ± 2·acos(ρ) with
/// ρ = S/(2cos(σ/4)), admissible when z > σ (so that u < 0 wraps). For
/// σ > 2π the u < σ − 2π branch contributes z = σ/2 − π ± 2·acos(−ρ).
fn z_roots(x: f64, y: f64) -> Vec<f64> {
    let sig = x + y;
    let s = (0.5 * x).sin() + (0.5 * y).sin();
    let c4 = (0.25 * sig).cos();
    let mut roots = vec![x, y];
    if c4.abs() > 1e-15 {
        let rho = s / (2.0 * c4);
        if rho.abs() <= 1.0 {
            let phi = rho.acos();
            for sgn in [1.0, -1.0] {
                let z = 0.5 * sig + PI + 2.0 * sgn * phi;
                if z > 1e-12 && z < TWO_PI - 1e-12 && z > sig {
                    roots.push(z);
                }
            }
            if sig > TWO_PI {
                let phi2 = (-rho).clamp(-1.0, 1.0).acos();
                for sgn in [1.0, -1.0] {
                    let z = 0.5 * sig - PI + 2.0 * sgn * phi2;
                    if z > 1e-12 && z < TWO_PI - 1e-12 && z < sig - TWO_PI {
                        roots.push(z);
                    }
                }
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup();
    roots
}

/// Innermost integral: ∫₀^{2π} δ_ε(Ω)|Δf|² dz for fixed (x, y).
///
/// Splits at the Ω-roots and at the |sin| kink z = (x+y) mod 2π, then stacks
/// ratio-4 geometric panels toward each root until the panel is shorter than
/// ε/20 — the δ_ε peak width is ε, so the finest panels resolve it fully.
fn z_quad<F: Fn(f64) -> f64>(x: f64, y: f64, eps: f64, f: &F) -> f64 {
    let roots = z_roots(x, y);
    let mut special = vec![0.0, TWO_PI, (x + y) % TWO_PI];
    special.extend_from_slice(&roots);
    special.sort_by(|a, b| a.partial_cmp(b).unwrap());
    special.dedup();
    let is_root = |v: f64| roots.iter().any(|&r| r == v);

    let nmin = eps / 20.0;
    let g7 = gl7();
    let g12 = gl12();
    let sxy = (0.5 * x).sin() + (0.5 * y).sin();
    let fxy = f(x) + f(y);
    let mut acc = 0.0;
    let mut panel = |lo: f64, hi: f64, rule: &GaussRule| {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for j in 0..rule.nodes.len() {
            let z = mid + half * rule.nodes[j];
            let u = x + y - z;
            let om = sxy - (0.5 * z).sin().abs() - (0.5 * u).sin().abs();
            let de = (eps / PI) / (eps * eps + om * om);
            let df = fxy - f(z) - f(u);
            acc += half * rule.weights[j] * de * df * df;
        }
    };
    for w in special.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-12 {
            continue;
        }
        let (aroot, broot) = (is_root(a), is_root(b));
        if !aroot && !broot {
            panel(a, b, g12);
            continue;
        }
        let m = 0.5 * (a + b);
        for (anchor, isr) in [(a, aroot), (b, broot)] {
            let d = (m - anchor).abs();
            let mut edges = vec![d];
            if isr {
                while *edges.last().unwrap() > 4.0 * nmin {
                    edges.push(edges.last().unwrap() / 4.0);
                }
            }
            edges.push(0.0);
            for k in 0..edges.len() - 1 {
                let (he, le) = (edges[k], edges[k + 1]);
                if anchor < m {
                    panel(anchor + le, anchor + he, g7);
                } else {
                    panel(anchor - he, anchor - le, g7);
                }
            }
        }
    }
    acc
}

/// y-values at which the umklapp branch of the z-roots appears or vanishes:
/// the tangency condition S = 2|cos(σ/4)|. The z_quad integrand is smooth in
/// y except for √ kinks across these curves.
fn onset_points(x: f64) -> Vec<f64> {
    let c_at =
        |y: f64| (0.5 * x).sin() + (0.5 * y).sin() - 2.0 * (0.25 * (x + y)).cos().abs();
    let sgn = |c: f64| {
        if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let (lo, hi) = (1e-9, TWO_PI - 1e-9);
    let steps = 600;
    let mut out = Vec::new();
    let mut prev_y = lo;
    let mut prev_c = c_at(lo);
    for i in 1..=steps {
        let yy = lo + (hi - lo) * i as f64 / steps as f64;
        let c = c_at(yy);
        if sgn(prev_c) * sgn(c) < 0.0 {
            let (mut a, mut b, mut fa) = (prev_y, yy, prev_c);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = c_at(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev_y = yy;
        prev_c = c;
    }
    out
}

/// Middle integral: ∫₀^{2π} z_quad(x, y) dy, split at y ∈ {x, 2π−x} (where
/// the root pattern changes) and at the onset curves, with six levels of
/// ratio-4 refinement into each onset point.
fn y_quad<F: Fn(f64) -> f64>(x: f64, eps: f64, f: &F) -> f64 {
    let onsets = onset_points(x);
    let mut sp = vec![0.0, TWO_PI, x, (TWO_PI - x) % TWO_PI];
    sp.extend_from_slice(&onsets);
    sp.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sp.dedup();

    let g16 = gl16();
    let g7 = gl7();
    let mut acc = 0.0;
    for w in sp.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-11 {
            continue;
        }
        let m = 0.5 * (a + b);
        for anchor in [a, b] {
            let is_onset = onsets.iter().any(|&o| (anchor - o).abs() < 1e-9);
            let d = (m - anchor).abs();
            let mut edges = vec![d];
            if is_onset {
                for _ in 0..6 {
                    edges.push(edges.last().unwrap() / 4.0);
                }
            }
            edges.push(0.0);
            let rule = if edges.len() > 2 { g7 } else { g16 };
            for k in 0..edges.len() - 1 {
                let (he, le) = (edges[k], edges[k + 1]);
                let (lo, hi) = if anchor < m {
                    (anchor + le, anchor + he)
                } else {
                    (anchor - he, anchor - le)
                };
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                for j in 0..rule.nodes.len() {
                    let yy = mid + half * rule.nodes[j];
                    acc += half * rule.weights[j] * z_quad(x, yy, eps, f);
                }
            }
        }
    }
    acc
}

/// The regularized quadratic form ⟨f, L_ε f⟩, evaluated as one quarter of
/// the three-dimensional display with δ_ε(X) = ε π⁻¹(ε² + X²)⁻¹.
///
/// `f` must be 2π-periodic on all of ℝ (the inner argument x+y−z is used
/// unreduced). `tol` selects the outer resolution tier — the innermost
/// quadrature always resolves the δ peak itself (panels shrink to ε/20) —
/// and arms the cost guard: ε < 1e−5 at tol < 1e−4 is refused, since the
/// z-panel count grows like log(1/ε) per root and the full sweep is cubic.
///
/// This is the brute-force oracle: nothing about the resonance manifold is
/// assumed beyond where to place subdivision points, and misplacing those
/// costs accuracy, never correctness in the limit.
pub fn regularized_quadratic_form<F: Fn(f64) -> f64 + Sync>(
    f: F,
    epsilon: f64,
    tol: f64,
) -> Result<f64> {
    assert!(
        epsilon > 0.0 && epsilon <= 0.1,
        "regularized form needs ε ∈ (0, 0.1], got {epsilon}"
    );
    if epsilon < 1e-5 && tol < 1e-4 {
        return Err(Error::OracleCostGuard { eps: epsilon, tol });
    }
    let nx: usize = if tol >= 1e-3 {
        16
    } else if tol >= 1e-5 {
        24
    } else {
        36
    };

    // x-panels: geometric prefix into each corner, near-uniform middle,
    // split exactly at π.
    let e = TWO_PI / nx as f64;
    let mut edges = vec![0.0, e / 64.0, e / 16.0, e / 4.0, e];
    let mut k = 1.0_f64;
    while *edges.last().unwrap() < PI - 1e-12 {
        edges.push((e + k * (TWO_PI - 2.0 * e) / (nx as f64 - 2.0)).min(PI));
        k += 1.0;
    }
    let mut all = edges.clone();
    all.push(PI);
    all.extend(edges.iter().map(|t| TWO_PI - t));
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();

    let g8 = gl8();
    let mut pts = Vec::new();
    for w in all.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-12 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for j in 0..g8.nodes.len() {
            pts.push((mid + half * g8.nodes[j], half * g8.weights[j]));
        }
    }
    // Parallel over collocation points; ordered collect + serial sum keeps
    // the result bit-identical regardless of thread count.
    let parts: Vec<f64> = pts
        .par_iter()
        .map(|&(x, wx)| wx * y_quad(x, epsilon, &f))
        .collect();
    Ok(parts.iter().sum::<f64>() / 4.0)
}

/// ε → 0 extrapolation of [`regularized_quadratic_form`] through the
/// boundary-layer model Q(ε) = Q₀ + A√ε + Bε, fitted on ε ∈ {1e−4, 3e−5,
/// 1e−5}.
///
/// The model is empirical but physically forced: the Lorentzian's heavy
/// tails sample |Δf|² at Ω-distances O(1), a smooth +O(ε) bias, while
/// smearing the integrable 1/√ peaks that the resolved form develops at the
/// umklapp onset curves costs −O(√ε) — so Q(ε) dips *below* the limit before
/// converging (measured minimum near ε = 1e−4 for f = cos). Fitting one
/// decade deeper than the dip recovers the limit to ~1e−4 relative for
/// generic smooth f, and to ~1e−6 absolute for the collisional invariants
/// (whose Q(ε) is a pure boundary-layer artifact vanishing linearly). The
/// shallow ladder ε ∈ {1e−2, 3e−3, 1e−3} is *pre-asymptotic*: the same model
/// there lands 3–5% away from the resolved form — do not widen the rungs.
pub fn extrapolated_regularized_form<F: Fn(f64) -> f64 + Sync>(f: F) -> Result<f64> {
    const LADDER: [f64; 3] = [1e-4, 3e-5, 1e-5];
    let mut rows = [[0.0_f64; 3]; 3];
    let mut q = [0.0_f64; 3];
    for (i, &eps) in LADDER.iter().enumerate() {
        rows[i] = [1.0, eps.sqrt(), eps];
        q[i] = regularized_quadratic_form(&f, eps, 1e-4)?;
    }
    let det3 = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    let den = det3(&rows[0], &rows[1], &rows[2]);
    let num = det3(
        &[q[0], rows[0][1], rows[0][2]],
        &[q[1], rows[1][1], rows[1][2]],
        &[q[2], rows[2][1], rows[2][2]],
    );
    Ok(num / den)
}

/// Panel boundaries on [a, b] with ratio-4 geometric refinement into both
/// endpoints, from relative scale `nmin` up to the midpoint.
fn geom_edges(a: f64, b: f64, nmin: f64) -> Vec<f64> {
    let l = b - a;
    let mut ts = vec![0.0, 0.5 * l, l];
    let mut d = l * nmin;
    while d < 0.5 * l {
        ts.push(d);
        ts.push(l - d);
        d *= 4.0;
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup();
    ts.iter().map(|t| a + t).collect()
}

fn q_resolved<F: Fn(f64) -> f64 + Sync>(f: &F, nmin: f64) -> f64 {
    let g10 = gl10();
    let xe = geom_edges(0.0, TWO_PI, nmin);
    let xpanels: Vec<(f64, f64)> = xe.windows(2).map(|w| (w[0], w[1])).collect();
    let parts: Vec<f64> = xpanels
        .par_iter()
        .map(|&(a, b)| {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let mut sub = 0.0;
            for j in 0..g10.nodes.len() {
                let x = mid + half * g10.nodes[j];
                let wx = half * g10.weights[j];
                let ze = geom_edges(x, TWO_PI, nmin);
                let mut acc = 0.0;
                for zw in ze.windows(2) {
                    let zm = 0.5 * (zw[0] + zw[1]);
                    let zh = 0.5 * (zw[1] - zw[0]);
                    for jj in 0..g10.nodes.len() {
                        let z = zm + zh * g10.nodes[jj];
                        let h = h_solve(x, z);
                        let df = f(x) + f(h) - f(z) - f(x - z + h);
                        acc += zh * g10.weights[jj] * df * df / (2.0 * f_plus(x, z).sqrt());
                    }
                }
                sub += wx * acc;
            }
            sub
        })
        .collect();
    2.0 * parts.iter().sum::<f64>()
}

/// The resolved two-dimensional form
/// ∬ |f(x)+f(h(x,z))−f(z)−f(x−z+h(x,z))|² / (2√F₊(x,z)) dx dz,
/// computed as twice the z > x triangle (the integrand is symmetric under
/// exchanging the pair).
///
/// `f` must be 2π-periodic on ℝ. The integral is evaluated at two geometric
/// refinement depths (1e−8 and 1e−10 of the panel length); disagreement
/// beyond `tol` (plus a 1e−9 absolute floor for the identically-vanishing
/// invariant cases) is reported as non-convergence rather than returned.
pub fn resolved_quadratic_form<F: Fn(f64) -> f64 + Sync>(f: F, tol: f64) -> Result<f64> {
    let tol = tol.clamp(1e-12, 1e-2);
    let coarse = q_resolved(&f, 1e-8);
    let fine = q_resolved(&f, 1e-10);
    let achieved = (fine - coarse).abs();
    let requested = tol * fine.abs() + 1e-9;
    if achieved > requested {
        return Err(Error::QuadratureNonConvergence { value: fine, achieved, requested });
    }
    Ok(fine)
}
