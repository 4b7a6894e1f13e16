//! Closed-form bounds on when subgraph-level inference is cheaper than
//! full-graph inference, in terms of node count `n`, feature dimension `d`,
//! cluster sizes `nᵢ` and the largest number of appended nodes `φ`.

use alloc::vec::Vec;

use crate::error::{bail, Result};

fn check_ratio(r: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        bail!(InvalidArgument, "ratio {} outside (0, 1]", r);
    }
    Ok(())
}

/// Largest `φ` admitted by `r ≤ (d − 2)/(d + φ)`, i.e. `(d − 2 − r·d)/r`.
/// Negative values mean no amount of augmentation is affordable.
pub fn phi_max_bound(d: f64, r: f64) -> Result<f64> {
    check_ratio(r)?;
    if !(d >= 1.0) {
        bail!(InvalidArgument, "feature dimension {} below 1", d);
    }
    Ok((d - 2.0 - r * d) / r)
}

/// Largest ratio admitted for a given `φ`: `(d − 2)/(d + φ)`.
pub fn ratio_bound(d: f64, phi_max: f64) -> Result<f64> {
    if !(d + phi_max > 0.0) {
        bail!(InvalidArgument, "d + φ = {} must be positive", d + phi_max);
    }
    Ok((d - 2.0) / (d + phi_max))
}

fn check_sizes(n: u64, sizes: &[u64]) -> Result<()> {
    if n == 0 {
        bail!(InvalidArgument, "n must be at least 1");
    }
    if sizes.is_empty() || sizes.contains(&0) {
        bail!(InvalidArgument, "cluster sizes must be non-empty and positive");
    }
    let total: u64 = sizes.iter().sum();
    if total != n {
        bail!(InvalidArgument, "cluster sizes sum to {} but n = {}", total, n);
    }
    Ok(())
}

/// `(n² − Σ nᵢ²)/(n·d)`
pub fn phi_second_bound(n: u64, d: u64, sizes: &[u64]) -> Result<f64> {
    check_sizes(n, sizes)?;
    if d == 0 {
        bail!(InvalidArgument, "feature dimension must be at least 1");
    }
    let sq: u128 = sizes.iter().map(|&s| (s as u128) * (s as u128)).sum();
    let num = (n as u128) * (n as u128) - sq;
    Ok(num as f64 / (n as f64 * d as f64))
}

/// Cost comparison of subgraph-level against full-graph inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lemma2Check {
    /// `Σ [(nᵢ + φ)² d + (nᵢ + φ) d²]`
    pub lhs: u128,
    /// `n² d + n d²`
    pub rhs: u128,
    pub holds: bool,
}

/// Evaluates both sides exactly in integer arithmetic.
pub fn lemma2_check(n: u64, d: u64, sizes: &[u64], phi_max: u64) -> Result<Lemma2Check> {
    check_sizes(n, sizes)?;
    if d == 0 {
        bail!(InvalidArgument, "feature dimension must be at least 1");
    }
    let (d, phi) = (d as u128, phi_max as u128);
    let lhs = sizes
        .iter()
        .map(|&s| {
            let m = s as u128 + phi;
            m * m * d + m * d * d
        })
        .sum();
    let n = n as u128;
    let rhs = n * n * d + n * d * d;
    Ok(Lemma2Check {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Whether `(n, d, nᵢ, φ)` meets both sufficient conditions, with `r = k/n`.
/// Compared by cross-multiplication so the boundary cases are exact.
pub fn lemma2_conditions(n: u64, d: u64, sizes: &[u64], phi_max: u64) -> Result<bool> {
    check_sizes(n, sizes)?;
    let (n, d, k, phi) = (n as i128, d as i128, sizes.len() as i128, phi_max as i128);
    let sq: i128 = sizes.iter().map(|&s| (s as i128) * (s as i128)).sum();
    // k/n ≤ (d−2)/(d+φ)  and  φ ≤ (n² − Σnᵢ²)/(n d)
    Ok(k * (d + phi) <= n * (d - 2) && phi * n * d <= n * n - sq)
}

/// `T(n) = n²d + nd² − [(n/α + φ)² d + (n/α + φ) d²]`: the cost gap between
/// full-graph inference and inference on the largest subgraph (`n/α` nodes
/// plus `φ` appended ones).
pub fn time_diff_t(n: f64, d: f64, alpha: f64, phi_max: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        bail!(InvalidArgument, "alpha {} below 1", alpha);
    }
    let m = n / alpha + phi_max;
    Ok(n * n * d + n * d * d - (m * m * d + m * d * d))
}

/// One point of a feasibility region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityPoint {
    pub n: u64,
    pub r: f64,
    pub feasible: bool,
}

/// Sizes of `k` clusters as equal as possible over `n` nodes.
pub fn balanced_sizes(n: u64, k: u64) -> Vec<u64> {
    let (q, rem) = (n / k, n % k);
    (0..k).map(|i| q + u64::from(i < rem)).collect()
}

/// For each `(n, r)` evaluates both conditions with `k = round(n·r)`
/// balanced clusters, feature dimension `d` and the given `φ`.
pub fn feasibility_region(ns: &[u64], rs: &[f64], d: u64, phi_max: u64) -> Result<Vec<FeasibilityPoint>> {
    let mut out = Vec::with_capacity(ns.len() * rs.len());
    for &n in ns {
        for &r in rs {
            check_ratio(r)?;
            let k = libm::round(n as f64 * r).clamp(1.0, n as f64) as u64;
            let feasible = lemma2_conditions(n, d, &balanced_sizes(n, k), phi_max)?;
            out.push(FeasibilityPoint { n, r, feasible });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn tabulated_bounds() {
        let close = |a: f64, b: f64| (a - b).abs() < 2e-3;
        assert!(close(phi_max_bound(38.0, 0.1).unwrap(), 322.0));
        assert!(close(phi_max_bound(3.0, 0.5).unwrap(), -1.0));
        assert!(close(phi_max_bound(11.0, 0.7).unwrap(), 1.857));
        assert!(close(phi_max_bound(3.0, 0.1).unwrap(), 6.999));
        assert!(phi_max_bound(3.0, 0.0).is_err());
    }

    #[test]
    fn ratio_bound_cases() {
        assert_eq!(ratio_bound(2.0, 5.0).unwrap(), 0.0);
        assert!((ratio_bound(38.0, 322.0).unwrap() - 0.1).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for phi in 0..200 {
            let r = ratio_bound(20.0, phi as f64).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn second_bound_cases() {
        assert_eq!(phi_second_bound(5, 2, &[1; 5]).unwrap(), (25.0 - 5.0) / 10.0);
        assert_eq!(phi_second_bound(7, 3, &[7]).unwrap(), 0.0);
        assert_eq!(phi_second_bound(100, 10, &[10; 10]).unwrap(), 9.0);
        assert!(phi_second_bound(10, 1, &[3, 3]).is_err());
    }

    #[test]
    fn size_condition_cases() {
        let c = lemma2_check(6, 4, &[1; 6], 0).unwrap();
        assert_eq!(c.lhs, 6 * 4 + 6 * 16);
        assert!(c.holds);
        // φ=20 breaks the second condition; just report
        let c = lemma2_check(100, 10, &[10; 10], 20).unwrap();
        assert_eq!(c.lhs, 10 * (900 * 10 + 30 * 100));
        assert_eq!(c.rhs, 100_000 + 10_000);
        assert!(!c.holds);
        assert!(!lemma2_conditions(100, 10, &[10; 10], 20).unwrap());
        assert!(lemma2_conditions(100, 10, &[10; 10], 9).unwrap());
    }

    #[test]
    fn time_difference_hand_value() {
        // n/α + φ = 6 → 72 + 24 subtracted from 200 + 40
        assert_eq!(time_diff_t(10.0, 2.0, 2.0, 1.0).unwrap(), 144.0);
        assert_eq!(time_diff_t(10.0, 3.0, 1e300, 0.0).unwrap(), 300.0 + 90.0);
    }

    #[test]
    fn time_difference_can_fall_when_phi_exceeds_outside_nodes() {
        // φ larger than n(1 − 1/α): small n are dominated by the φ term
        let a = time_diff_t(1.0, 2.0, 2.0, 10.0).unwrap();
        let b = time_diff_t(2.0, 2.0, 2.0, 10.0).unwrap();
        assert!(b < a);
    }

    #[test]
    fn region_grid() {
        let pts = feasibility_region(&[100, 1000], &[0.1, 0.9], 10, 5).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts[0].feasible && !pts[1].feasible);
        assert_eq!(balanced_sizes(10, 3), vec![4, 3, 3]);
    }

    proptest! {
        #[test]
        fn bounds_are_inverse(d in 3.0f64..500.0, r in 0.01f64..1.0) {
            let phi = phi_max_bound(d, r).unwrap();
            if phi > 0.0 {
                prop_assert!((ratio_bound(d, phi).unwrap() - r).abs() < 1e-9);
            }
        }

        #[test]
        fn conditions_imply_bound(sizes in proptest::collection::vec(1u64..40, 1..30), d in 1u64..64, phi in 0u64..80) {
            let n: u64 = sizes.iter().sum();
            if lemma2_conditions(n, d, &sizes, phi).unwrap() {
                prop_assert!(lemma2_check(n, d, &sizes, phi).unwrap().holds);
            }
        }

        #[test]
        fn gap_grows_with_n(n in 1.0f64..1e4, step in 1.0f64..1e4, d in 1.0f64..100.0, alpha in 1.01f64..50.0, frac in 0.0f64..1.0) {
            let phi = frac * n * (1.0 - 1.0 / alpha);
            let a = time_diff_t(n, d, alpha, phi).unwrap();
            let b = time_diff_t(n + step, d, alpha, phi).unwrap();
            prop_assert!(b > a);
        }
    }
}
