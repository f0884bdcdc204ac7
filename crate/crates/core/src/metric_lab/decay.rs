//! The nine dyadic decay ratios at scale `r`.

use super::graph::GeodesicSolver;
use super::planar::PlanarGrid;
use super::{check_pair, radial_profile, unit, DistanceResolution};
use crate::background::BackgroundMetric;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::Resolution;
use crate::integrate::{integrate, sphere_density, sphere_integral, Measure};
use crate::quadrature::SphereQuadrature;
use crate::Dimension;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Two-sided: the ratio tends to the target.
    Asymptotic,
    /// One-sided: the ratio stays below the target asymptotically.
    UpperBound,
    /// The ratio lies in `[target, upper]` asymptotically.
    Band { upper: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRatio {
    pub name: &'static str,
    pub value: f64,
    pub target: f64,
    pub kind: TargetKind,
}

impl DecayRatio {
    pub fn relative_deviation(&self) -> f64 {
        (self.value / self.target - 1.0).abs()
    }

    /// Within relative tolerance `tau` of its target relation.
    pub fn within(&self, tau: f64) -> bool {
        match self.kind {
            TargetKind::Asymptotic => self.relative_deviation() <= tau,
            TargetKind::UpperBound => self.value <= self.target * (1.0 + tau),
            TargetKind::Band { upper } => {
                self.value >= self.target * (1.0 - tau) && self.value <= upper * (1.0 + tau)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub r: f64,
    pub ratios: Vec<DecayRatio>,
}

impl DecayReport {
    pub fn get(&self, name: &str) -> Option<&DecayRatio> {
        self.ratios.iter().find(|q| q.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct DecayOptions {
    /// Unit direction `x0` (default `e1`).
    pub x0: Option<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// Chart radius: the manifold is `B_outer \ {0}`.
    pub outer: f64,
    pub integration: Resolution,
    pub distance: DistanceResolution,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            x0: None,
            alpha: 1.0,
            beta: 0.0,
            outer: 1.0,
            integration: Resolution::new(41, 8),
            distance: DistanceResolution::default(),
        }
    }
}

/// `|grad_{g0} u|_{g0}` and `u` at `x`.
fn grad_norm(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    let j = u.jet(x, 1)?;
    let du: Vec<f64> = (0..n).map(|i| j.d1(i)).collect();
    let inv = DMatrix::from_row_slice(n, n, &g0.components(x))
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("degenerate background metric".into()))?;
    let mut q = 0.0;
    for a in 0..n {
        for b in 0..n {
            q += inv[(a, b)] * du[a] * du[b];
        }
    }
    Ok((q.max(0.0).sqrt(), j.value()))
}

struct Distances {
    d_out: f64,
    d_in: f64,
    point_sphere: f64,
    diam_r: f64,
    diam_2r: f64,
    annulus_diam: f64,
    separation: f64,
}

fn row_max(grid: &PlanarGrid, dist: &[f64], j: usize) -> f64 {
    grid.row(dist, j).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn row_min(grid: &PlanarGrid, dist: &[f64], j: usize) -> f64 {
    grid.row(dist, j).iter().cloned().fold(f64::INFINITY, f64::min)
}

fn planar_distances<P>(profile: &P, n: usize, r: f64, opts: &DecayOptions) -> Result<Distances>
where
    P: Fn(f64) -> Result<f64> + Sync,
{
    let grid = PlanarGrid::new(profile, n, r, r / 4.0, opts.outer, &opts.distance)?;
    let (j1, j2) = (grid.row_of(r)?, grid.row_of(2.0 * r)?);
    let from_r = grid.point_field(r)?;
    let from_half = grid.point_field(r / 2.0)?;
    let from_2r = grid.point_field(2.0 * r)?;
    let from_sphere = grid.row_field(r)?;
    let annulus_diam = (j1..=j2)
        .into_par_iter()
        .map(|j| {
            let d = grid.field(&[(grid.index(j, 0), 0.0)]);
            (j1..=j2).map(|k| row_max(&grid, &d, k)).fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(Distances {
        d_out: from_r[grid.index(j2, 0)],
        d_in: from_half[grid.index(j1, 0)],
        point_sphere: row_min(&grid, &from_r, j2),
        diam_r: row_max(&grid, &from_r, j1),
        diam_2r: row_max(&grid, &from_2r, j2),
        annulus_diam,
        separation: row_min(&grid, &from_sphere, j2),
    })
}

/// Graph-based fallback for metrics without rotational symmetry. Diameters
/// are maxima over a degree-4 sample of each sphere and therefore coarse.
fn graph_distances(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    n: Dimension,
    r: f64,
    x0: &[f64],
    opts: &DecayOptions,
) -> Result<Distances> {
    let s = GeodesicSolver::with_graph(u, g0, r / 4.0, opts.outer, &opts.distance)?;
    let at = |t: f64| -> Vec<f64> { x0.iter().map(|v| v * t).collect() };
    let sample = SphereQuadrature::new(n, 4)?;
    let graph = s.graph().expect("graph engine");
    let sphere_pts = |rad: f64| -> Vec<Vec<f64>> {
        sample.nodes().iter().map(|t| t.iter().map(|v| v * rad).collect()).collect()
    };
    let diam = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Result<f64> {
        let targets = b
            .iter()
            .map(|y| graph.attachments(y))
            .collect::<Result<Vec<_>>>()?;
        let per = a
            .par_iter()
            .map(|x| {
                let (d, _) = graph.field_from(x)?;
                Ok(targets
                    .iter()
                    .map(|att| att.iter().map(|(v, c)| d[*v] + c).fold(f64::INFINITY, f64::min))
                    .fold(f64::NEG_INFINITY, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(per.into_iter().fold(f64::NEG_INFINITY, f64::max))
    };
    let (inner, outer) = (sphere_pts(r), sphere_pts(2.0 * r));
    let mut both = inner.clone();
    both.extend(outer.iter().cloned());
    let separation = inner
        .iter()
        .map(|x| s.point_to_sphere(x, 2.0 * r))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(Distances {
        d_out: s.distance(&at(2.0 * r), &at(r))?,
        d_in: s.distance(&at(r), &at(r / 2.0))?,
        point_sphere: s.point_to_sphere(&at(r), 2.0 * r)?,
        diam_r: diam(&inner, &inner)?,
        diam_2r: diam(&outer, &outer)?,
        annulus_diam: diam(&both, &both)?,
        separation,
    })
}

/// All nine ratios at scale `r`; the annuli `B_{2r} \ B_{r/2}` must lie in the chart.
pub fn decay_ratio_suite(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    r: f64,
    opts: &DecayOptions,
) -> Result<DecayReport> {
    let n = Dimension::new(check_pair(u, g0)?)?;
    if !(r > 0.0 && 2.0 * r < opts.outer) {
        return Err(Error::RadiusOutOfRange {
            r,
            lo: 0.0,
            hi: opts.outer / 2.0,
        });
    }
    let x0 = match &opts.x0 {
        Some(v) => unit(v)?,
        None => {
            let mut e = vec![0.0; n.n()];
            e[0] = 1.0;
            e
        }
    };
    let nf = n.nf();
    let (alpha, beta) = (opts.alpha, opts.beta);
    let outer_annulus = opts.integration.grid(n, r, 2.0 * r)?;
    let inner_annulus = opts.integration.grid(n, r / 2.0, r)?;

    let vol = Measure::Conformal(u, g0);
    let v_out = integrate(&outer_annulus, vol, None, |_| Ok(1.0))?;
    let v_in = integrate(&inner_annulus, vol, None, |_| Ok(1.0))?;

    let bg = Measure::Background(g0);
    let moment = |grid, grad: bool| {
        integrate(grid, bg, None, |x| {
            let (du, uv) = grad_norm(u, g0, x)?;
            let base = if grad { du } else { uv };
            Ok(crate::background::norm(x).powf(beta) * base.powf(alpha))
        })
    };
    let grad_ratio = moment(&inner_annulus, true)? / moment(&outer_annulus, true)?;
    let u_ratio = moment(&inner_annulus, false)? / moment(&outer_annulus, false)?;

    let sphere = opts.integration.sphere(n)?;
    let log_grad = |rad: f64| {
        sphere_integral(&sphere, rad, |x, _| {
            let (du, uv) = grad_norm(u, g0, x)?;
            Ok(du / uv * sphere_density(g0, x))
        })
    };
    let log_ratio = log_grad(r)? / log_grad(2.0 * r)?;

    let d = match radial_profile(u, g0) {
        Some(p) => planar_distances(&p, n.n(), r, opts)?,
        None => graph_distances(u, g0, n, r, &x0, opts)?,
    };

    let two = |e: f64| 2f64.powf(e);
    let q = |name, value, target, kind| DecayRatio {
        name,
        value,
        target,
        kind,
    };
    use TargetKind::*;
    Ok(DecayReport {
        r,
        ratios: vec![
            q("volume", v_out / v_in, two(-nf), Asymptotic),
            q(
                "volume-over-distance",
                v_out / (n.ball_volume() * d.d_out.powf(nf)),
                two(nf) - 1.0,
                Asymptotic,
            ),
            q("gradient", grad_ratio, two((nf - 1.0) * alpha - nf - beta), UpperBound),
            q("u-moment", u_ratio, two((nf - 2.0) * alpha - nf - beta), UpperBound),
            q("log-gradient", log_ratio, two(2.0 - nf), Asymptotic),
            q("distance", d.d_out / d.d_in, 0.5, Asymptotic),
            q("point-to-sphere", d.point_sphere / d.d_out, 1.0, Asymptotic),
            q("sphere-diameter", d.diam_2r / d.diam_r, 0.5, Asymptotic),
            q(
                "annulus-diameter",
                d.annulus_diam / d.separation,
                2.0,
                Band { upper: 4.0 * PI + 1.0 },
            ),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_fixture_hits_every_target() {
        for n in [3, 4] {
            let d = Dimension::new(n).unwrap();
            let u = ConformalFactor::parse("absx^(2-n)", d).unwrap();
            let g0 = BackgroundMetric::flat(d);
            let rep = decay_ratio_suite(&u, &g0, 1.0 / 256.0, &DecayOptions::default()).unwrap();
            for q in &rep.ratios {
                assert!(q.within(0.02), "n={n} {q:?}");
            }
            assert!((rep.get("volume").unwrap().value - two_pow(-(n as i32))).abs() < 1e-6);
            let a = rep.get("annulus-diameter").unwrap().value;
            assert!((a - 4.0).abs() < 0.1, "{a}");
        }
    }

    fn two_pow(e: i32) -> f64 {
        2f64.powi(e)
    }

    #[test]
    fn flat_fixture_is_out_of_band() {
        let d = Dimension::new(4).unwrap();
        let u = ConformalFactor::parse("1", d).unwrap();
        let g0 = BackgroundMetric::flat(d);
        let rep = decay_ratio_suite(&u, &g0, 0.1, &DecayOptions::default()).unwrap();
        let v = rep.get("volume").unwrap();
        assert!((v.value - 16.0).abs() < 1e-6);
        assert!(!v.within(0.5));
    }
}
