//! Background metrics `g0` in a chart around the puncture.

use crate::dim::Dimension;
use crate::error::{Error, Result};
use crate::fd::fd_jets;
use crate::jet::{Jet, JetSpace, Scalar};
use std::fmt;
use std::sync::Arc;

type ComponentFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Which family a background belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    Flat,
    RoundSphereChart,
    Sampled,
}

/// Background given by callbacks: components plus its own curvature data.
///
/// Derivatives of the components come from fourth-order central differences
/// with step `rel_step * |x|`, so at most two are available.
#[derive(Clone)]
pub struct SampledBackground {
    pub components: Arc<ComponentFn>,
    pub scalar_curvature: Arc<ScalarFn>,
    pub ricci: Arc<ComponentFn>,
    pub rel_step: f64,
}

impl fmt::Debug for SampledBackground {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledBackground")
            .field("rel_step", &self.rel_step)
            .finish_non_exhaustive()
    }
}

/// The background metric `g0`.
#[derive(Debug, Clone)]
pub enum BackgroundMetric {
    Flat(Dimension),
    /// Unit round sphere in the chart `g0 = (1 + |x|^2/4)^{-2} delta`,
    /// normal at the origin to second order.
    RoundSphereChart(Dimension),
    Sampled(Dimension, SampledBackground),
    /// `x -> g0(scale * x)` (components only, no factor of `scale^2`).
    Rescaled { inner: Arc<BackgroundMetric>, scale: f64 },
}

impl BackgroundMetric {
    pub fn flat(n: Dimension) -> Self {
        BackgroundMetric::Flat(n)
    }

    pub fn round_sphere_chart(n: Dimension) -> Self {
        BackgroundMetric::RoundSphereChart(n)
    }

    pub fn rescaled(self, scale: f64) -> Self {
        BackgroundMetric::Rescaled {
            inner: Arc::new(self),
            scale,
        }
    }

    pub fn dimension(&self) -> Dimension {
        match self {
            BackgroundMetric::Flat(n)
            | BackgroundMetric::RoundSphereChart(n)
            | BackgroundMetric::Sampled(n, _) => *n,
            BackgroundMetric::Rescaled { inner, .. } => inner.dimension(),
        }
    }

    pub fn kind(&self) -> BackgroundKind {
        match self {
            BackgroundMetric::Flat(_) => BackgroundKind::Flat,
            BackgroundMetric::RoundSphereChart(_) => BackgroundKind::RoundSphereChart,
            BackgroundMetric::Sampled(..) => BackgroundKind::Sampled,
            BackgroundMetric::Rescaled { inner, .. } => inner.kind(),
        }
    }

    pub fn is_flat(&self) -> bool {
        self.kind() == BackgroundKind::Flat
    }

    /// `psi(|x|) delta` with a closed-form `psi` (flat or round chart).
    pub fn is_radially_conformal(&self) -> bool {
        matches!(
            self.kind(),
            BackgroundKind::Flat | BackgroundKind::RoundSphereChart
        )
    }

    /// Highest derivative order available for the components.
    pub fn max_order(&self) -> usize {
        match self {
            BackgroundMetric::Sampled(..) => 2,
            BackgroundMetric::Rescaled { inner, .. } => inner.max_order(),
            _ => usize::MAX,
        }
    }

    /// Conformal scale `psi` with `g0 = psi delta`, for conformally flat
    /// closed-form backgrounds.
    fn conformal_scale<S: Scalar>(&self, x: &[S]) -> Option<S> {
        match self {
            BackgroundMetric::Flat(_) => Some(x[0].lift(1.0)),
            BackgroundMetric::RoundSphereChart(_) => {
                let mut s = x[0].mul(&x[0]);
                for xi in &x[1..] {
                    s = s.add(&xi.mul(xi));
                }
                Some(s.scale(0.25).add(&x[0].lift(1.0)).powf(-2.0))
            }
            BackgroundMetric::Sampled(..) => None,
            BackgroundMetric::Rescaled { inner, scale } => {
                let y: Vec<S> = x.iter().map(|v| v.scale(*scale)).collect();
                inner.conformal_scale(&y)
            }
        }
    }

    /// Row-major components `g0_ij(x)` on any scalar type, when closed form.
    pub fn components_generic<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let n = x.len();
        let psi = self.conformal_scale(x)?;
        let zero = x[0].lift(0.0);
        Some(
            (0..n * n)
                .map(|k| if k / n == k % n { psi.clone() } else { zero.clone() })
                .collect(),
        )
    }

    /// Row-major components at a point.
    pub fn components(&self, x: &[f64]) -> Vec<f64> {
        if let Some(c) = self.components_generic(x) {
            return c;
        }
        match self {
            BackgroundMetric::Sampled(_, s) => (s.components)(x),
            BackgroundMetric::Rescaled { inner, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                inner.components(&y)
            }
            _ => unreachable!("closed-form backgrounds handled above"),
        }
    }

    /// Jets of the components at `x` up to `order`.
    pub fn metric_jets(&self, x: &[f64], order: usize) -> Result<Vec<Jet>> {
        let sp = JetSpace::get(x.len(), order);
        let coords = Jet::coordinates(&sp, x);
        if let Some(c) = self.components_generic(&coords) {
            return Ok(c);
        }
        match self {
            BackgroundMetric::Sampled(_, s) => {
                let h = s.rel_step * norm(x).max(1e-12);
                fd_jets(|y| Ok((s.components)(y)), x, order, h, "sampled background")
            }
            BackgroundMetric::Rescaled { inner, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                Ok(inner
                    .metric_jets(&y, order)?
                    .into_iter()
                    .map(|j| j.rescale_argument(*scale))
                    .collect())
            }
            _ => unreachable!("closed-form backgrounds handled above"),
        }
    }

    /// Scalar curvature supplied with a sampled background.
    pub(crate) fn supplied_curvature(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        match self {
            BackgroundMetric::Sampled(_, s) => Some(((s.scalar_curvature)(x), (s.ricci)(x))),
            BackgroundMetric::Rescaled { inner, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                inner
                    .supplied_curvature(&y)
                    .map(|(r, ric)| (r * scale * scale, ric.iter().map(|v| v * scale * scale).collect()))
            }
            _ => None,
        }
    }

    /// Checks that the components are symmetric positive-definite at `x`.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let n = x.len();
        let c = self.components(x);
        let m = nalgebra::DMatrix::from_row_slice(n, n, &c);
        let sym = (&m - m.transpose()).abs().max();
        if sym > 1e-12 * m.abs().max() || m.cholesky().is_none() {
            return Err(Error::EvalOutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_chart_is_normal_at_origin() {
        let g0 = BackgroundMetric::round_sphere_chart(Dimension::new(4).unwrap());
        for t in [1e-2, 2e-2, 4e-2] {
            let x = [t, 0.0, 0.0, 0.0];
            let c = g0.components(&x);
            // |g0 - delta| <= C |x|^2 with C = 1/2
            assert!((c[0] - 1.0).abs() <= 0.51 * t * t);
            assert_eq!(c[1], 0.0);
        }
        g0.check_point(&[0.3, 0.1, 0.0, 0.0]).unwrap();
    }

    #[test]
    fn rescaled_jets_match_direct_evaluation() {
        let g0 = BackgroundMetric::round_sphere_chart(Dimension::new(3).unwrap()).rescaled(0.5);
        let x = [0.4, -0.2, 0.7];
        let jets = g0.metric_jets(&x, 2).unwrap();
        let direct = BackgroundMetric::round_sphere_chart(Dimension::new(3).unwrap())
            .components(&[0.2, -0.1, 0.35]);
        assert!((jets[0].value() - direct[0]).abs() < 1e-15);
        // d/dx1 of psi(x/2) at x1 = 0.4: psi = (1 + |y|^2/4)^{-2}, y = x/2
        let y2: f64 = x.iter().map(|v| v * v / 4.0).sum();
        let expect = -2.0 * (1.0 + y2 / 4.0).powi(-3) * (0.5 * 0.2 / 2.0) * 0.5 * 2.0;
        assert!((jets[0].d1(0) - expect).abs() < 1e-12, "{} vs {}", jets[0].d1(0), expect);
    }

    #[test]
    fn sampled_background_uses_finite_differences() {
        let n = Dimension::new(3).unwrap();
        let sampled = SampledBackground {
            components: Arc::new(|x: &[f64]| {
                let s = 1.0 + x[0] * x[0];
                vec![s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, s]
            }),
            scalar_curvature: Arc::new(|_| 0.0),
            ricci: Arc::new(|_| vec![0.0; 9]),
            rel_step: 1e-3,
        };
        let g0 = BackgroundMetric::Sampled(n, sampled);
        let jets = g0.metric_jets(&[0.5, 0.1, 0.2], 2).unwrap();
        assert!((jets[0].derivative(&[2, 0, 0]) - 2.0).abs() < 1e-7);
        assert!(g0.metric_jets(&[0.5, 0.1, 0.2], 3).is_err());
    }
}
