//! Dispersion relation of the harmonic chain and the four-phonon collision
//! manifold.
//!
//! Everything in this module is a pure closed-form function on the periodic
//! cell `I = [0, 2π)`: the dispersion `ω(x) = |sin(x/2)|`, its derivative
//! with the `ω'(0) := 0` convention, the frequency mismatch
//! `Ω(x,y,z) = ω(x) + ω(y) − ω(z) − ω(x+y−z)`, the parity reflection
//! `x ↦ 2π − x`, and the nontrivial root `y = h(x,z)` of `Ω(x,·,z) = 0`.

use nalgebra::Complex;
use std::f64::consts::PI;

/// Circumference of the periodic cell.
pub const TWO_PI: f64 = 2.0 * PI;

/// Reduce an angle to the canonical cell `[0, 2π)`.
pub fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Dispersion relation `ω(x) = |sin(x/2)|`.
///
/// Total function: periodic with period 2π and symmetric under the parity
/// reflection `x ↦ 2π − x`.
pub fn omega(x: f64) -> f64 {
    (0.5 * x).sin().abs()
}

/// Group velocity `ω'(x) = cos(x/2)/2` on `(0, 2π)`, with `ω'(0) := 0`.
///
/// The value at the lattice points `2πn` is a convention; every quadrature
/// grid in this crate excludes them, so no integral depends on it.
pub fn omega_prime(x: f64) -> f64 {
    let xr = reduce(x);
    if xr == 0.0 {
        0.0
    } else {
        0.5 * (0.5 * xr).cos()
    }
}

/// Frequency mismatch `Ω(x,y,z) = ω(x) + ω(y) − ω(z) − ω(x+y−z)` of the
/// four-phonon process `(x,y) → (z, x+y−z)`.
///
/// Vanishes identically on the trivial branches `z = x` and `z = y`.
pub fn big_omega(x: f64, y: f64, z: f64) -> f64 {
    omega(x) + omega(y) - omega(z) - omega(x + y - z)
}

/// Parity reflection `P: x ↦ 2π − x` on `[0, 2π)`, with fixed point 0.
pub fn parity_reflect(x: f64) -> f64 {
    debug_assert!((0.0..TWO_PI).contains(&x));
    if x == 0.0 {
        0.0
    } else {
        TWO_PI - x
    }
}

/// The nontrivial solution `y = h(x,z)` of `Ω(x, y, z) = 0`.
///
/// For `x, z ∈ I` this is the closed form
///
/// ```text
/// h(x,z) = (z−x)/2 + 2 arcsin( tan(|z−x|/4) · cos((x+z)/4) )
/// ```
///
/// with the principal branch of `arcsin`, and it is extended continuously to
/// all real arguments by `h(x,z) = h(x mod 2π, z mod 2π) − i(x)` where
/// `i(x) = x − (x mod 2π) ∈ 2πZ`. For `x, z ∈ I` with `z > x` the value lies
/// in `[0, z−x]`, and the symmetry `h(z,x) = x − z + h(x,z)` holds.
///
/// Near the removable corner singularities `(0, 2π)` and `(2π, 0)` the
/// arcsin argument is a `∞·0` product that stays ≤ 1 analytically; rounding
/// can push it past 1 by an ulp-scale amount, which is clamped away.
pub fn h_solve(x: f64, z: f64) -> f64 {
    let xr = reduce(x);
    let zr = reduce(z);
    let shift = x - xr; // i(x) ∈ 2πZ
    let arg = (0.25 * (zr - xr).abs()).tan() * (0.25 * (xr + zr)).cos();
    debug_assert!(arg.abs() <= 1.0 + 1e-9, "arcsin argument {arg} out of range");
    let arg = arg.clamp(-1.0, 1.0);
    0.5 * (zr - xr) + 2.0 * arg.asin() - shift
}

/// Collisional-invariance defect of `ψ` at `(x, z)`:
/// `|ψ(x) + ψ(h(x,z)) − ψ(z) − ψ(x−z+h(x,z))|` on the nontrivial branch
/// `y = h(x,z)`, with `ψ` extended periodically (all four arguments are
/// reduced to `I` before `ψ` is called).
///
/// Zero (up to rounding) exactly when restricted to `ψ = c₁ + c₂ω`.
pub fn invariant_residual<F>(psi: F, x: f64, z: f64) -> f64
where
    F: Fn(f64) -> Complex<f64>,
{
    let h = h_solve(x, z);
    let fourth = x - z + h;
    (psi(reduce(x)) + psi(reduce(h)) - psi(reduce(z)) - psi(reduce(fourth))).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn angle_distance(a: f64, b: f64) -> f64 {
        let d = reduce(a - b);
        d.min(TWO_PI - d)
    }

    #[test]
    fn omega_examples() {
        assert_relative_eq!(omega(PI), 1.0);
        assert_abs_diff_eq!(omega(0.0), 0.0);
        assert_relative_eq!(omega(TWO_PI + PI / 3.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn omega_prime_examples() {
        assert_eq!(omega_prime(0.0), 0.0);
        assert_eq!(omega_prime(TWO_PI), 0.0);
        assert_abs_diff_eq!(omega_prime(PI), 0.0, epsilon = 1e-16);
        assert_relative_eq!(omega_prime(PI / 2.0), 2.0_f64.sqrt() / 4.0, max_relative = 1e-15);
        for k in 1..200 {
            let x = TWO_PI * k as f64 / 200.0;
            assert_abs_diff_eq!(omega_prime(parity_reflect(x)), -omega_prime(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn big_omega_trivial_branches() {
        assert_abs_diff_eq!(big_omega(1.3, 0.7, 1.3), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(big_omega(1.3, 0.7, 0.7), 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            big_omega(PI, PI, PI / 2.0),
            2.0 - 2.0_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn parity_reflect_examples() {
        assert_eq!(parity_reflect(0.0), 0.0);
        assert_eq!(parity_reflect(PI), PI);
        assert_relative_eq!(parity_reflect(parity_reflect(1.234)), 1.234);
    }

    #[test]
    fn h_solve_examples() {
        assert_abs_diff_eq!(h_solve(1.0, 1.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(h_solve(1.0, TWO_PI - 1.0), PI - 1.0, max_relative = 1e-13);
    }

    /// Independent root for h(0.5, 2.5): y ↦ Ω(0.5, y, 2.5) is strictly
    /// monotone on [0, 2] (|∂_y Ω₋| ≥ cos²((x−z)/4) > 0 there), so plain
    /// bisection is a valid oracle for the closed form.
    #[test]
    fn h_solve_against_bisection() {
        let (x, z) = (0.5, 2.5);
        let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
        let flo = big_omega(x, lo, z);
        assert!(flo * big_omega(x, hi, z) < 0.0, "oracle bracket must straddle the root");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (big_omega(x, mid, z) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let h = h_solve(x, z);
        assert!(h > 0.0 && h < z - x, "h must land in [0, z−x]");
        assert_abs_diff_eq!(h, root, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 1.822_430_252_150_876_4, epsilon = 1e-12);
        assert!(big_omega(x, h, z).abs() < 1e-12);
    }

    #[test]
    fn invariant_residual_examples() {
        let c = |v: f64| Complex::new(v, 0.0);
        assert!(invariant_residual(|u| c(omega(u)), 1.1, 2.3) < 1e-14);
        assert_eq!(invariant_residual(|_| c(1.0), 0.9, 4.2), 0.0);
        assert!(invariant_residual(|u| c(u.cos()), 1.0, 2.0) > 1e-3);
    }

    #[test]
    fn cosine_is_not_invariant() {
        // Theorem-level fact: invariants are exactly span{1, ω}, so the
        // residual of cos must be large somewhere.
        let c = |v: f64| Complex::new(v.cos(), 0.0);
        let mut worst = 0.0_f64;
        for i in 1..100 {
            for j in 1..100 {
                let x = TWO_PI * i as f64 / 100.0;
                let z = TWO_PI * j as f64 / 100.0;
                worst = worst.max(invariant_residual(c, x, z));
            }
        }
        assert!(worst > 0.1, "max cos residual {worst} should exceed 0.1");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn h_solves_the_constraint(x in 1e-9..(TWO_PI - 1e-9), z in 1e-9..(TWO_PI - 1e-9)) {
            let h = h_solve(x, z);
            prop_assert!(big_omega(x, h, z).abs() < 1e-10);
        }

        #[test]
        fn h_symmetry(x in 1e-9..(TWO_PI - 1e-9), z in 1e-9..(TWO_PI - 1e-9)) {
            let lhs = h_solve(z, x);
            let rhs = x - z + h_solve(x, z);
            prop_assert!(angle_distance(lhs, rhs) < 1e-10);
        }

        #[test]
        fn h_parity_covariance(x in 1e-9..(TWO_PI - 1e-9), z in 1e-9..(TWO_PI - 1e-9)) {
            let lhs = h_solve(TWO_PI - x, TWO_PI - z);
            let rhs = -h_solve(x, z);
            prop_assert!(angle_distance(lhs, rhs) < 1e-10);
        }

        #[test]
        fn h_in_range_for_ordered_args(a in 1e-9..(TWO_PI - 1e-9), b in 1e-9..(TWO_PI - 1e-9)) {
            let (x, z) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(z > x);
            let h = h_solve(x, z);
            prop_assert!((-1e-14..=(z - x) + 1e-14).contains(&h));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1_000))]

        #[test]
        fn linear_combinations_of_invariants_are_invariant(
            x in 1e-6..(TWO_PI - 1e-6),
            z in 1e-6..(TWO_PI - 1e-6),
            re1 in -2.0..2.0_f64, im1 in -2.0..2.0_f64,
            re2 in -2.0..2.0_f64, im2 in -2.0..2.0_f64,
        ) {
            let c1 = Complex::new(re1, im1);
            let c2 = Complex::new(re2, im2);
            let psi = |u: f64| c1 + c2 * Complex::new(omega(u), 0.0);
            prop_assert!(invariant_residual(psi, x, z) < 1e-9);
        }
    }
}
