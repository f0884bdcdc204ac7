//! Geodesic-ball volumes from a single-source distance field.

use super::graph::GeodesicSolver;
use super::planar::PlanarGrid;
use super::{check_pair, radial_profile, DistanceResolution};
use crate::background::{norm, BackgroundMetric};
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::integrate::Measure;
use crate::quadrature::compensated_sum;
use crate::Dimension;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Where distances are solved and where volume is counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallDomain {
    /// Annulus `B_{r_max} \ B_{r_min}` carrying the distance field; geodesics
    /// stay inside it and `|x| = r_max` acts as a wall.
    pub r_min: f64,
    pub r_max: f64,
    /// Count volume only in `|x| <= clip` (the ball of the larger space
    /// intersected with `B_clip`).
    #[serde(default)]
    pub clip: Option<f64>,
}

impl BallDomain {
    pub fn annulus(r_min: f64, r_max: f64) -> Self {
        BallDomain {
            r_min,
            r_max,
            clip: None,
        }
    }

    pub fn clipped(self, clip: f64) -> Self {
        BallDomain {
            clip: Some(clip),
            ..self
        }
    }
}

/// Slack allowed when judging the approach to 1 monotone.
const MONOTONE_SLACK: f64 = 1e-4;

/// `vol_g(B^g_rho(center))` for each `rho`, from one distance sweep over the
/// domain. The inner sphere is an artificial cut: a ball touching it
/// is reported as escaping.
fn ball_volumes(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    center: &[f64],
    rhos: &[f64],
    domain: BallDomain,
    res: &DistanceResolution,
) -> Result<Vec<f64>> {
    let n = check_pair(u, g0)?;
    let rc = norm(center);
    if rc == 0.0 {
        return Err(Error::OriginInput);
    }
    let clip = domain.clip.unwrap_or(f64::INFINITY);
    if let Some(profile) = radial_profile(u, g0) {
        let grid = PlanarGrid::new(&profile, n, rc, domain.r_min, domain.r_max, res)?;
        let dist = grid.point_field(rc)?;
        return rhos
            .iter()
            .map(|rho| grid.sublevel_volume(&dist, *rho, clip))
            .collect();
    }
    let solver = GeodesicSolver::with_graph(u, g0, domain.r_min, domain.r_max, res)?;
    let graph = solver.graph().expect("graph engine");
    let (dist, _) = graph.field_from(center)?;
    let grid = graph.grid();
    let m = grid.sphere().len();
    let measure = Measure::Conformal(u, g0);
    let cells = (0..graph.vertex_count())
        .into_par_iter()
        .map(|v| {
            let mut spacing = (0.0, 0usize);
            graph.for_each_neighbor(v, &mut |_, l| {
                spacing.0 += l;
                spacing.1 += 1;
            });
            let delta = spacing.0 / spacing.1.max(1) as f64;
            let w = if norm(graph.point(v)) <= clip * (1.0 + 1e-12) {
                grid.volume_weight(v) * measure.density(graph.point(v))?
            } else {
                0.0
            };
            Ok((w, delta))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    rhos.iter()
        .map(|&rho| {
            let reached = (0..m).filter(|v| dist[*v] <= rho).count();
            if reached > 0 {
                return Err(Error::BallEscapesDomain {
                    reachable_fraction: reached as f64 / m as f64,
                });
            }
            Ok(compensated_sum(cells.iter().zip(&dist).map(|((w, delta), d)| {
                w * (0.5 + (rho - d) / delta).clamp(0.0, 1.0)
            })))
        })
        .collect()
}

/// `vol_g(B^g_rho(center))` within `domain`.
pub fn geodesic_ball_volume(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    center: &[f64],
    rho: f64,
    domain: BallDomain,
    res: &DistanceResolution,
) -> Result<f64> {
    Ok(ball_volumes(u, g0, center, &[rho], domain, res)?[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeDensityProfile {
    pub rhos: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `vol / (V_n rho^n)`.
    pub ratios: Vec<f64>,
    /// `|ratio - 1|` never grows (up to solver noise) along the list.
    pub monotone: bool,
    pub final_deviation: f64,
}

pub fn volume_density_profile(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    x0: &[f64],
    rhos: &[f64],
    domain: BallDomain,
    res: &DistanceResolution,
) -> Result<VolumeDensityProfile> {
    if rhos.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    let n = Dimension::new(check_pair(u, g0)?)?;
    let volumes = ball_volumes(u, g0, x0, rhos, domain, res)?;
    let ratios: Vec<f64> = volumes
        .iter()
        .zip(rhos)
        .map(|(v, rho)| v / (n.ball_volume() * rho.powi(n.n() as i32)))
        .collect();
    let dev: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    Ok(VolumeDensityProfile {
        rhos: rhos.to_vec(),
        monotone: dev.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK),
        final_deviation: *dev.last().expect("nonempty"),
        volumes,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(src: &str, n: usize) -> (ConformalFactor, BackgroundMetric) {
        let d = Dimension::new(n).unwrap();
        (ConformalFactor::parse(src, d).unwrap(), BackgroundMetric::flat(d))
    }

    #[test]
    fn flat_balls() {
        let (u, g0) = setup("1", 4);
        let res = DistanceResolution::default();
        let p = volume_density_profile(&u, &g0, &[1.0, 0.0, 0.0, 0.0], &[0.2, 0.4, 0.6], BallDomain::annulus(0.25, 2.0), &res)
            .unwrap();
        for r in &p.ratios {
            assert!((r - 1.0).abs() < 0.03, "{r}");
        }
    }

    #[test]
    fn inversion_ball_closed_form() {
        // center sigma e1 (sigma = 8), radius lambda (1 - 1/sigma) with lambda = 1,
        // ball of the punctured space cut to |x| <= sigma:
        // vol = V_4 ((lambda (1 - 1/sigma))^4 - sigma^-4)
        let (u, g0) = setup("absx^(-2)", 4);
        let sigma: f64 = 8.0;
        let rho = 1.0 - 1.0 / sigma;
        let v = geodesic_ball_volume(
            &u,
            &g0,
            &[sigma, 0.0, 0.0, 0.0],
            rho,
            BallDomain::annulus(0.5, 64.0 * sigma).clipped(sigma),
            &DistanceResolution::default(),
        )
        .unwrap();
        let v4 = Dimension::new(4).unwrap().ball_volume();
        let exact = v4 * (rho.powi(4) - sigma.powi(-4));
        assert!((v / exact - 1.0).abs() < 0.01, "{v} vs {exact}");
    }

    #[test]
    fn general_graph_path_is_close_for_flat_balls() {
        // a sampled factor forces the n-dimensional graph
        let d = Dimension::new(3).unwrap();
        let u = ConformalFactor::sampled(d, |_| 1.0);
        let g0 = BackgroundMetric::flat(d);
        let res = DistanceResolution {
            radial_count: 41,
            sphere_degree: 30,
            ..Default::default()
        };
        let v = geodesic_ball_volume(&u, &g0, &[1.0, 0.0, 0.0], 0.5, BallDomain::annulus(0.25, 2.0), &res).unwrap();
        let exact = d.ball_volume() * 0.125;
        assert!((v / exact - 1.0).abs() < 0.1, "{v} vs {exact}");
    }
}
