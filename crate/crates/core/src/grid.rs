//! Log-radial product grids on annuli `B_{r_max} \ B_{r_min}`.

use crate::dim::Dimension;
use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, SphereQuadrature};
use rayon::prelude::*;
use std::sync::Arc;

/// Radial node count and sphere-quadrature degree for building grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub radial_count: usize,
    pub sphere_degree: usize,
}

impl Resolution {
    pub fn new(radial_count: usize, sphere_degree: usize) -> Self {
        Resolution {
            radial_count,
            sphere_degree,
        }
    }

    pub fn sphere(&self, n: Dimension) -> Result<Arc<SphereQuadrature>> {
        Ok(Arc::new(SphereQuadrature::new(n, self.sphere_degree)?))
    }

    pub fn grid(&self, n: Dimension, r_min: f64, r_max: f64) -> Result<AnnulusGrid> {
        AnnulusGrid::new(r_min, r_max, self.radial_count, self.sphere(n)?)
    }
}

/// Product grid: log-uniform radii times a sphere quadrature.
///
/// Radial weights integrate in `s = log r` (composite Simpson, closed by a
/// 3/8 panel when the interval count is odd), so `dx = r^n ds dS`.
#[derive(Debug, Clone)]
pub struct AnnulusGrid {
    r_min: f64,
    r_max: f64,
    radii: Vec<f64>,
    log_weights: Vec<f64>,
    sphere: Arc<SphereQuadrature>,
}

impl AnnulusGrid {
    pub fn new(
        r_min: f64,
        r_max: f64,
        radial_count: usize,
        sphere: Arc<SphereQuadrature>,
    ) -> Result<AnnulusGrid> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::BadRadii { r_min, r_max });
        }
        if radial_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "radial_count must be >= 2, got {radial_count}"
            )));
        }
        let (a, b) = (r_min.ln(), r_max.ln());
        let m = radial_count - 1;
        let radii = (0..radial_count)
            .map(|i| match i {
                0 => r_min,
                i if i == m => r_max,
                i => (a + (b - a) * i as f64 / m as f64).exp(),
            })
            .collect();
        let log_weights = composite_weights(m, (b - a) / m as f64);
        Ok(AnnulusGrid {
            r_min,
            r_max,
            radii,
            log_weights,
            sphere,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Quadrature weights in `log r`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }

    pub fn sphere_arc(&self) -> &Arc<SphereQuadrature> {
        &self.sphere
    }

    pub fn dimension(&self) -> usize {
        self.sphere.dimension()
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Chart point with radial index `i` and sphere index `j`.
    pub fn point(&self, i: usize, j: usize) -> Vec<f64> {
        let r = self.radii[i];
        self.sphere.nodes()[j].iter().map(|t| r * t).collect()
    }

    /// Flat point index `i * sphere_len + j`.
    pub fn point_flat(&self, k: usize) -> Vec<f64> {
        let m = self.sphere.len();
        self.point(k / m, k % m)
    }

    /// Coordinate volume weight of flat point `k` (`r^n` times both weights).
    pub fn volume_weight(&self, k: usize) -> f64 {
        let m = self.sphere.len();
        let (i, j) = (k / m, k % m);
        let n = self.dimension() as i32;
        self.log_weights[i] * self.sphere.weights()[j] * self.radii[i].powi(n)
    }

    /// `int f dx` over the annulus, evaluating `f` in parallel.
    pub fn integrate_volume<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let values: Result<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map(|k| Ok(self.volume_weight(k) * f(&self.point_flat(k))?))
            .collect();
        Ok(compensated_sum(values?))
    }
}

/// Weights of a 4th-order closed Newton-Cotes composite rule with `m` intervals.
pub fn composite_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    let add_simpson = |w: &mut [f64], start: usize| {
        w[start] += h / 3.0;
        w[start + 1] += 4.0 * h / 3.0;
        w[start + 2] += h / 3.0;
    };
    match m {
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let simpson_panels = if m % 2 == 0 { m / 2 } else { (m - 3) / 2 };
            for p in 0..simpson_panels {
                add_simpson(&mut w, 2 * p);
            }
            if m % 2 == 1 {
                let s = m - 3;
                for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[s + k] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere(n: usize, deg: usize) -> Arc<SphereQuadrature> {
        Arc::new(SphereQuadrature::new(Dimension::new(n).unwrap(), deg).unwrap())
    }

    #[test]
    fn radial_nodes_are_log_uniform() {
        let g = AnnulusGrid::new(1.0, 2.0, 4, sphere(4, 2)).unwrap();
        let expect = [1.0, 2f64.powf(1.0 / 3.0), 2f64.powf(2.0 / 3.0), 2.0];
        for (a, b) in g.radii().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let g = AnnulusGrid::new(0.5, 1.0, 2, sphere(4, 2)).unwrap();
        assert_eq!(g.radii(), &[0.5, 1.0]);
        assert_eq!(g.len(), 2 * g.sphere().len());
    }

    #[test]
    fn degenerate_radii_rejected() {
        assert!(matches!(
            AnnulusGrid::new(1.0, 1.0, 4, sphere(4, 2)),
            Err(Error::BadRadii { .. })
        ));
        assert!(AnnulusGrid::new(0.0, 1.0, 4, sphere(4, 2)).is_err());
    }

    #[test]
    fn shell_volume() {
        for count in [9, 10] {
            let g = AnnulusGrid::new(1.0, 2.0, count, sphere(4, 2)).unwrap();
            let v = g.integrate_volume(|_| Ok(1.0)).unwrap();
            let exact = 15.0 * PI * PI / 2.0;
            assert!((v - exact).abs() < 2e-4 * exact, "count={count} v={v}");
        }
    }

    #[test]
    fn composite_rule_is_fourth_order() {
        // int_0^1 e^s ds with m and 2m intervals, m odd (3/8 closing panel).
        let err = |m: usize| {
            let w = composite_weights(m, 1.0 / m as f64);
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * (i as f64 / m as f64).exp())
                .sum();
            (s - (1f64.exp() - 1.0)).abs()
        };
        let order = (err(9) / err(18)).log2();
        assert!(order > 3.5, "order {order}");
        let order = (err(11) / err(23)).log2();
        assert!(order > 3.5, "order {order}");
    }
}
