//! Two-proportion z-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionTest {
    pub z: f64,
    /// P(Z ≥ z) under H0: the alternative is "first proportion larger".
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

/// Pooled two-proportion z-test of `x1/n1` against `x2/n2`. When the pooled
/// proportion is 0 or 1 the samples are indistinguishable and `z = 0`.
pub fn two_proportion_z(x1: usize, n1: usize, x2: usize, n2: usize) -> ProportionTest {
    assert!(n1 > 0 && n2 > 0, "sample sizes must be positive");
    assert!(x1 <= n1 && x2 <= n2, "successes cannot exceed trials");
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = x1 as f64 / n1f;
    let p2 = x2 as f64 / n2f;
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = if se > 0.0 { (p1 - p2) / se } else { 0.0 };
    let normal = Normal::standard();
    ProportionTest {
        z,
        p_one_sided: normal.sf(z),
        p_two_sided: 2.0 * normal.sf(z.abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_case() {
        // p1 = .3, p2 = .15, pooled = .225, se = sqrt(.225 * .775 * .02)
        let t = two_proportion_z(30, 100, 15, 100);
        let z = 0.15 / (0.225f64 * 0.775 * 0.02).sqrt();
        assert!((t.z - z).abs() < 1e-12);
        assert!((t.p_two_sided - 2.0 * t.p_one_sided).abs() < 1e-12);
        assert!(t.p_one_sided < 0.01);
    }

    #[test]
    fn symmetric_and_degenerate() {
        let a = two_proportion_z(10, 50, 20, 50);
        let b = two_proportion_z(20, 50, 10, 50);
        assert!((a.z + b.z).abs() < 1e-12);
        assert!((a.p_two_sided - b.p_two_sided).abs() < 1e-12);
        let d = two_proportion_z(0, 10, 0, 10);
        assert_eq!((d.z, d.p_two_sided), (0.0, 1.0));
    }
}
