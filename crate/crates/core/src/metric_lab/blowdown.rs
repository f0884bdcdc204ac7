//! Blow-down rescalings `u_k = c_k r_k^{(n-2)/2} u(r_k x)` and distance-matrix comparison.

use super::graph::GeodesicSolver;
use super::{check_pair, DistanceResolution};
use crate::background::{norm, BackgroundMetric};
use crate::cylinder::CHART_RADIUS;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::Resolution;
use crate::Dimension;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Rescaled factors on a fixed reference annulus `B_{outer} \ B_{inner}`.
#[derive(Debug, Clone, Serialize)]
pub struct BlowDownSequence {
    pub r_k: Vec<f64>,
    pub c_k: Vec<f64>,
    /// `sup |u_k |x|^{n-2} - 1|` over the reference annulus.
    pub deviations: Vec<f64>,
    /// `int_{dB_1} log u_k dS` (zero by construction).
    pub normalization: Vec<f64>,
    pub reference: (f64, f64),
    #[serde(skip)]
    factors: Vec<ConformalFactor>,
    #[serde(skip)]
    backgrounds: Vec<BackgroundMetric>,
}

impl BlowDownSequence {
    pub fn len(&self) -> usize {
        self.r_k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_k.is_empty()
    }

    /// `u_k`.
    pub fn factor(&self, k: usize) -> &ConformalFactor {
        &self.factors[k]
    }

    /// `g0(r_k x)`, so that `g_k = u_k^{4/(n-2)} g0(r_k x)` is `r_k^{-2}` times the pull-back of `g`.
    pub fn background(&self, k: usize) -> &BackgroundMetric {
        &self.backgrounds[k]
    }
}

pub fn blow_down(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    r_k: &[f64],
    reference: (f64, f64),
    res: Resolution,
) -> Result<BlowDownSequence> {
    let n = Dimension::new(check_pair(u, g0)?)?;
    let base = Arc::new(u.clone());
    let sphere = res.sphere(n)?;
    let grid = res.grid(n, reference.0, reference.1)?;
    let area = sphere.total_weight();
    let p = (n.nf() - 2.0) / 2.0;
    let mut seq = BlowDownSequence {
        r_k: r_k.to_vec(),
        c_k: Vec::new(),
        deviations: Vec::new(),
        normalization: Vec::new(),
        reference,
        factors: Vec::new(),
        backgrounds: Vec::new(),
    };
    for &r in r_k {
        let needed = r * reference.1.max(1.0);
        if !(r > 0.0) || needed > CHART_RADIUS {
            return Err(Error::ChartTooSmall {
                needed,
                available: CHART_RADIUS,
            });
        }
        // log c_k = -mean over dB_1 of log(r^{(n-2)/2} u(r theta))
        let logs = sphere
            .nodes()
            .par_iter()
            .map(|t| {
                let x: Vec<f64> = t.iter().map(|v| v * r).collect();
                Ok(u.value(&x)?.ln() + p * r.ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = crate::quadrature::compensated_sum(logs.iter().zip(sphere.weights()).map(|(l, w)| l * w)) / area;
        let c = (-mean).exp();
        let uk = base.rescaled(c * r.powf(p), r);
        let norm_check = crate::quadrature::compensated_sum(
            sphere
                .nodes()
                .iter()
                .zip(sphere.weights())
                .map(|(t, w)| uk.value(t).map(|v| v.ln() * w))
                .collect::<Result<Vec<f64>>>()?,
        );
        let dev = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = grid.point_flat(k);
                Ok((uk.value(&x)? * norm(&x).powf(n.nf() - 2.0) - 1.0).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        seq.c_k.push(c);
        seq.normalization.push(norm_check);
        seq.deviations.push(dev);
        seq.factors.push(uk);
        seq.backgrounds.push(g0.clone().rescaled(r));
    }
    Ok(seq)
}

/// For each metric `u_k^{4/(n-2)} g0_k`, the sup over sample pairs of
/// `|d_k(x, y) - oracle(x, y)|`; distances are solved on the annulus `radii`.
pub fn distance_matrix_compare<O>(
    metrics: &[(&ConformalFactor, &BackgroundMetric)],
    points: &[Vec<f64>],
    oracle: O,
    radii: (f64, f64),
    res: &DistanceResolution,
) -> Result<Vec<f64>>
where
    O: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (i + 1..points.len()).map(move |j| (i, j)))
        .collect();
    metrics
        .iter()
        .map(|(u, g0)| {
            let solver = GeodesicSolver::new(u, g0, radii.0, radii.1, res)?;
            let devs = pairs
                .par_iter()
                .map(|&(i, j)| {
                    let d = solver.distance(&points[i], &points[j])?;
                    Ok((d - oracle(&points[i], &points[j])?).abs())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(devs.into_iter().fold(0.0, f64::max))
        })
        .collect()
}
