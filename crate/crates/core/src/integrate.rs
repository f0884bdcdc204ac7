//! Integrals of fields over annulus grids and coordinate spheres.

use crate::background::BackgroundMetric;
use crate::curvature::invert_jets;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::AnnulusGrid;
use crate::jet::{Jet, JetSpace};
use crate::quadrature::{compensated_sum, SphereQuadrature};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Measure to integrate against.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    /// Lebesgue measure `dx` of the chart.
    Coordinate,
    /// `dV_{g0}`.
    Background(&'a BackgroundMetric),
    /// `dV_g` with `g = u^{4/(n-2)} g0`.
    Conformal(&'a ConformalFactor, &'a BackgroundMetric),
}

impl Measure<'_> {
    /// Density of the measure against `dx` at `x`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        match self {
            Measure::Coordinate => Ok(1.0),
            Measure::Background(g0) => Ok(sqrt_det(&g0.components(x), x.len())),
            Measure::Conformal(u, g0) => {
                let n = g0.dimension();
                let w = u.value(x)?.powf(2.0 * n.nf() / (n.nf() - 2.0));
                Ok(w * sqrt_det(&g0.components(x), x.len()))
            }
        }
    }
}

pub(crate) fn sqrt_det(c: &[f64], n: usize) -> f64 {
    if c.iter().enumerate().all(|(k, v)| k / n == k % n || *v == 0.0) {
        return (0..n).map(|i| c[i * n + i]).product::<f64>().sqrt();
    }
    DMatrix::from_row_slice(n, n, c).determinant().sqrt()
}

/// `int field dmu` over the grid; with `p`, the `L^p` norm `(int |field|^p dmu)^{1/p}`.
pub fn integrate<F>(grid: &AnnulusGrid, measure: Measure<'_>, p: Option<f64>, field: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let total = grid.integrate_volume(|x| {
        let v = field(x)?;
        let v = match p {
            Some(p) => v.abs().powf(p),
            None => v,
        };
        Ok(v * measure.density(x)?)
    })?;
    Ok(match p {
        Some(p) => total.powf(1.0 / p),
        None => total,
    })
}

/// Density `Theta` of the induced measure of `g0` on `|x| = r` against the
/// unit-sphere measure: `dS_{g0} = Theta dS^{n-1}`.
pub fn sphere_density(g0: &BackgroundMetric, x: &[f64]) -> f64 {
    let n = x.len();
    let c = g0.components(x);
    let r = crate::background::norm(x);
    let m = DMatrix::from_row_slice(n, n, &c);
    let inv = m.clone().try_inverse().expect("background metric is positive-definite");
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += inv[(i, j)] * x[i] * x[j];
        }
    }
    // unit conormal dr = x/r; |dr|_{g0} = sqrt(g0^{ij} x_i x_j) / r
    m.determinant().sqrt() * (q.sqrt() / r) * r.powi(n as i32 - 1)
}

/// Jet (order >= 1 as requested) of `Theta` at `x`, for radial derivatives.
pub fn sphere_density_jet(g0: &BackgroundMetric, x: &[f64], order: usize) -> Result<Jet> {
    let n = x.len();
    let sp = JetSpace::get(n, order);
    let g = g0.metric_jets(x, order)?;
    let (inv, det) = invert_jets(&g, n);
    let xs = Jet::coordinates(&sp, x);
    let mut r2 = xs[0].mul(&xs[0]);
    for xi in &xs[1..] {
        r2 = r2.add(&xi.mul(xi));
    }
    let mut q = Jet::constant(&sp, 0.0);
    for i in 0..n {
        for j in 0..n {
            q = q.add(&inv[i * n + j].mul(&xs[i]).mul(&xs[j]));
        }
    }
    // sqrt(det) * sqrt(q) * r^{n-2}
    Ok(det
        .powf(0.5)
        .mul(&q.powf(0.5))
        .mul(&r2.powf((n as f64 - 2.0) / 2.0)))
}

/// Radial derivative `x/|x| . grad f` of a jet at its base point.
pub fn radial_derivative(f: &Jet, x: &[f64]) -> f64 {
    let r = crate::background::norm(x);
    x.iter().enumerate().map(|(i, xi)| f.d1(i) * xi / r).sum()
}

/// `int_{|x|=r} f dS^{n-1}` (unit-sphere measure, no `Theta`).
pub fn sphere_integral<F>(sphere: &SphereQuadrature, r: f64, f: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    let values: Result<Vec<f64>> = sphere
        .nodes()
        .par_iter()
        .zip(sphere.weights())
        .map(|(theta, w)| {
            let x: Vec<f64> = theta.iter().map(|t| r * t).collect();
            Ok(w * f(&x, theta)?)
        })
        .collect();
    Ok(compensated_sum(values?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dimension;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(r0: f64, r1: f64, count: usize, n: usize, deg: usize) -> AnnulusGrid {
        let s = SphereQuadrature::new(Dimension::new(n).unwrap(), deg).unwrap();
        AnnulusGrid::new(r0, r1, count, Arc::new(s)).unwrap()
    }

    #[test]
    fn inversion_metric_annulus_volume() {
        // g = |x|^{-4} delta in n = 4: vol(B_{2r} \ B_r) = omega_3 r^{-4} (1 - 2^{-4}) / 4
        let n = Dimension::new(4).unwrap();
        let u = ConformalFactor::parse("absx^(2-n)", n).unwrap();
        let g0 = BackgroundMetric::flat(n);
        let r = 0.3;
        let gr = grid(r, 2.0 * r, 41, 4, 2);
        let v = integrate(&gr, Measure::Conformal(&u, &g0), None, |_| Ok(1.0)).unwrap();
        let exact = 2.0 * PI * PI * r.powi(-4) * (1.0 - 1.0 / 16.0) / 4.0;
        assert!((v - exact).abs() < 1e-6 * exact, "{v} vs {exact}");
    }

    #[test]
    fn lp_norm_of_constant() {
        let gr = grid(1.0, 2.0, 21, 4, 2);
        let v = integrate(&gr, Measure::Coordinate, Some(2.0), |_| Ok(3.0)).unwrap();
        let vol = 15.0 * PI * PI / 2.0;
        assert!((v - 3.0 * vol.sqrt()).abs() < 1e-4 * v);
    }

    #[test]
    fn flat_sphere_density_is_power_of_radius() {
        let g0 = BackgroundMetric::flat(Dimension::new(4).unwrap());
        let x = [0.0, 0.5, 0.0, 0.0];
        assert!((sphere_density(&g0, &x) - 0.125).abs() < 1e-15);
        let j = sphere_density_jet(&g0, &x, 1).unwrap();
        assert!((radial_derivative(&j, &x) - 3.0 * 0.25).abs() < 1e-13);
    }

    #[test]
    fn round_chart_sphere_density() {
        // conformally flat psi delta: Theta = psi^{(n-1)/2} r^{n-1}
        let g0 = BackgroundMetric::round_sphere_chart(Dimension::new(4).unwrap());
        let x = [0.3, 0.4, 0.0, 0.0];
        let psi = (1.0f64 + 0.25 / 4.0).powi(-2);
        let expect = psi.powf(1.5) * 0.5f64.powi(3);
        assert!((sphere_density(&g0, &x) - expect).abs() < 1e-14);
        let j = sphere_density_jet(&g0, &x, 1).unwrap();
        assert!((j.value() - expect).abs() < 1e-14);
    }
}
