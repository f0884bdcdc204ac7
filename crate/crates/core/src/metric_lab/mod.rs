//! Geodesic distances, geodesic-ball volumes, blow-downs and the decay-ratio
//! suite for conformal metrics on punctured balls.
//!
//! Two distance engines share the work. [`DistanceGraph`] is a shortest-path
//! graph on the log-polar product grid, refined by minimizing the discrete
//! path energy. Metrics of the form `f(|x|)^2 delta` additionally get an exact
//! planar reduction: every geodesic lies in a 2-plane through the origin, and
//! in `(log r, angle)` that plane carries the isotropic metric `(f r)^2 (ds^2 + dpsi^2)`.

mod axial;
mod blowdown;
mod decay;
mod graph;
mod green;
mod path;
mod planar;
mod shortest;
mod volume;

pub use axial::{axial_density_lower_bound, AxialBoundOptions, AxialDensityBound};
pub use blowdown::{blow_down, distance_matrix_compare, BlowDownSequence};
pub use decay::{decay_ratio_suite, DecayOptions, DecayRatio, DecayReport, TargetKind};
pub use graph::{geodesic_distance, DistanceGraph, GeodesicSolver};
pub use green::{green_function_flat_ball, w_profile, HypothesisAudit, hypothesis_audit, WProfile};
pub use path::Endpoint;
pub use volume::{geodesic_ball_volume, BallDomain, volume_density_profile, VolumeDensityProfile};

use crate::background::{norm, BackgroundMetric};
use crate::curvature::conformal_metric_at;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use serde::{Deserialize, Serialize};

/// Discretization knobs for every distance computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceResolution {
    /// Radial shells of the graph.
    pub radial_count: usize,
    /// Sphere-quadrature degree fixing the angular graph nodes.
    pub sphere_degree: usize,
    /// Segments of the refined polyline.
    pub path_nodes: usize,
    /// Planar rows per doubling of the radius.
    pub planar_per_octave: usize,
    /// Planar stencil radius (offsets `|a|, |b| <= stencil`).
    pub stencil: usize,
}

impl Default for DistanceResolution {
    fn default() -> Self {
        DistanceResolution {
            radial_count: 33,
            sphere_degree: 12,
            path_nodes: 48,
            planar_per_octave: 32,
            stencil: 12,
        }
    }
}

impl DistanceResolution {
    /// Every length scale halved.
    pub fn doubled(&self) -> Self {
        DistanceResolution {
            radial_count: 2 * self.radial_count - 1,
            sphere_degree: 2 * self.sphere_degree,
            path_nodes: 2 * self.path_nodes,
            planar_per_octave: 2 * self.planar_per_octave,
            stencil: self.stencil,
        }
    }
}

/// Exact distance `|x/|x|^2 - y/|y|^2|` of `g_inf = |x|^{-4} delta` (any `n`,
/// with `g_inf = (|x|^{2-n})^{4/(n-2)} delta`).
pub fn inversion_oracle_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    let (rx, ry) = (norm(x), norm(y));
    if rx == 0.0 || ry == 0.0 {
        return Err(Error::OriginInput);
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| a / (rx * rx) - b / (ry * ry))
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt())
}

fn check_pair(u: &ConformalFactor, g0: &BackgroundMetric) -> Result<usize> {
    let n = u.dimension();
    if g0.dimension() != n {
        return Err(Error::InvalidArgument(format!(
            "factor has dimension {}, background {}",
            n.n(),
            g0.dimension().n()
        )));
    }
    Ok(n.n())
}

/// `|v|_g` at `x`.
fn speed(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64], v: &[f64]) -> Result<f64> {
    let n = x.len();
    let g = conformal_metric_at(u, g0, x)?;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += g[i * n + j] * v[i] * v[j];
        }
    }
    Ok(q.max(0.0).sqrt())
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Length of the straight chord `a -> b`, three-point Gauss.
fn chord_length(u: &ConformalFactor, g0: &BackgroundMetric, a: &[f64], b: &[f64]) -> Result<f64> {
    let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let mut total = 0.0;
    for (t, w) in GAUSS3 {
        let x: Vec<f64> = a.iter().zip(&v).map(|(p, d)| p + t * d).collect();
        total += w * speed(u, g0, &x, &v)?;
    }
    Ok(total)
}

/// `f` with `g = f(|x|)^2 delta`, when the metric has that form.
fn radial_profile<'a>(
    u: &'a ConformalFactor,
    g0: &'a BackgroundMetric,
) -> Option<impl Fn(f64) -> Result<f64> + Sync + 'a> {
    if !(u.is_radial() && g0.is_radially_conformal()) {
        return None;
    }
    let n = g0.dimension().n();
    Some(move |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        Ok(conformal_metric_at(u, g0, &x)?[0].sqrt())
    })
}

fn unit(x: &[f64]) -> Result<Vec<f64>> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::OriginInput);
    }
    Ok(x.iter().map(|v| v / r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0, 0.0];
        assert!((inversion_oracle_distance(&e1, &[2.0, 0.0, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(inversion_oracle_distance(&e1, &e1).unwrap(), 0.0);
        let d = inversion_oracle_distance(&e1, &e2).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            inversion_oracle_distance(&[0.0; 4], &e1),
            Err(Error::OriginInput)
        );
    }

    #[test]
    fn chord_length_of_flat_metric_is_euclidean() {
        let n = crate::Dimension::new(3).unwrap();
        let u = ConformalFactor::parse("1", n).unwrap();
        let g0 = BackgroundMetric::flat(n);
        let l = chord_length(&u, &g0, &[1.0, 0.0, 0.0], &[0.0, 2.0, 2.0]).unwrap();
        assert!((l - 3.0).abs() < 1e-14);
    }
}
