//! Dimension-dependent constants.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Ambient dimension `n` of the punctured ball, `3 <= n <= 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub const MIN: usize = 3;
    pub const MAX: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&n) {
            Ok(Dimension(n))
        } else {
            Err(Error::UnsupportedDimension(n))
        }
    }

    pub fn n(self) -> usize {
        self.0
    }

    pub fn nf(self) -> f64 {
        self.0 as f64
    }

    /// Exponent `4/(n-2)` in `g = u^{4/(n-2)} g0`.
    pub fn conformal_exponent(self) -> f64 {
        4.0 / (self.nf() - 2.0)
    }

    /// Conformal Laplacian constant `c(n) = (n-2) / (4(n-1))`.
    pub fn yamabe_constant(self) -> f64 {
        (self.nf() - 2.0) / (4.0 * (self.nf() - 1.0))
    }

    /// Area of the unit sphere `S^{n-1}`.
    pub fn sphere_area(self) -> f64 {
        sphere_area(self.0)
    }

    /// Volume of the unit ball in `R^n`.
    pub fn ball_volume(self) -> f64 {
        self.sphere_area() / self.nf()
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Dimension::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// `Gamma(k/2)` for a positive integer `k`, exact recursion.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k > 0);
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < k as f64 / 2.0 - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Area `2 pi^{n/2} / Gamma(n/2)` of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        // S^4: 8 pi^2 / 3
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constants() {
        let d = Dimension::new(4).unwrap();
        assert_eq!(d.conformal_exponent(), 2.0);
        assert!((d.yamabe_constant() - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.ball_volume() - PI * PI / 2.0).abs() < 1e-13);
        assert!(Dimension::new(2).is_err());
        assert!(Dimension::new(9).is_err());
    }
}
