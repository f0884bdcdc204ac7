//! Lower bounds on geodesic-ball volumes for factors invariant under
//! rotations of `x1..x_{n-1}`, where the metric can be singular along the
//! whole `x_n`-axis and the n-dimensional graph cannot resolve the volume
//! piling up there.
//!
//! Any admissible path bounds the distance from above, so every point joined
//! to the center by a path of length `<= rho` lies in the ball. Two path
//! families are used: the straight chord, and a chord followed by a straight
//! drop toward the axis at fixed `x_n`. Both stay in the convex ball
//! `B_{r_max}`. Counting cells of the reduced coordinates
//! `(log rho_{n-1}, x_n, phi)` gives the bound.

use super::check_pair;
use crate::background::{norm, BackgroundMetric};
use crate::curvature::conformal_metric_at;
use crate::dim::sphere_area;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::integrate::Measure;
use crate::quadrature::{compensated_sum, gauss_gegenbauer};
use crate::Dimension;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AxialBoundOptions {
    /// Cells closer to the axis than `exp(log_axis_min)` are not counted.
    pub log_axis_min: f64,
    /// Cells along `log rho_{n-1}`, `x_n` and the angle `phi in [0, pi]`.
    pub cells: [usize; 3],
    /// Gauss nodes per graded piece of a chord.
    pub chord_nodes: usize,
}

impl Default for AxialBoundOptions {
    fn default() -> Self {
        AxialBoundOptions {
            log_axis_min: -16.0,
            cells: [160, 120, 24],
            chord_nodes: 8,
        }
    }
}

impl AxialBoundOptions {
    /// Twice as many cells in every direction.
    pub fn doubled(&self) -> Self {
        AxialBoundOptions {
            cells: self.cells.map(|c| 2 * c),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AxialDensityBound {
    pub rhos: Vec<f64>,
    /// Lower bounds on `vol_g(B^g_rho(center) cap B_{r_max})`.
    pub volumes: Vec<f64>,
    /// Lower bounds on `vol / (V_n rho^n)`.
    pub ratios: Vec<f64>,
}

/// Reduced coordinates `(a, b, z)` stand for `(a, b, 0, .., 0, z)`.
fn embed(n: usize, y: [f64; 3]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = y[0];
    x[1] = y[1];
    x[n - 1] += y[2];
    x
}

struct Reduced<'a> {
    u: &'a ConformalFactor,
    g0: &'a BackgroundMetric,
    n: usize,
    rule: Vec<(f64, f64)>,
}

impl Reduced<'_> {
    /// `f` with `g = f^2 delta` at the reduced point.
    fn scale(&self, y: [f64; 3]) -> Result<f64> {
        Ok(conformal_metric_at(self.u, self.g0, &embed(self.n, y))?[0].sqrt())
    }

    /// Gauss on `[t0, t1]` of the chord `p + t v`.
    fn piece(&self, p: [f64; 3], v: [f64; 3], t0: f64, t1: f64) -> Result<f64> {
        let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        let mut total = 0.0;
        for (t, w) in &self.rule {
            let s = mid + half * t;
            total += w * self.scale([p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2]])?;
        }
        Ok(total * half)
    }

    /// Length of the chord `p -> q`, with pieces graded geometrically toward
    /// its closest approach to the axis.
    fn chord(&self, p: [f64; 3], q: [f64; 3]) -> Result<f64> {
        let v = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
        let len = norm(&v);
        if len == 0.0 {
            return Ok(0.0);
        }
        let vv = v[0] * v[0] + v[1] * v[1];
        let star = if vv > 0.0 {
            (-(p[0] * v[0] + p[1] * v[1]) / vv).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let gap = {
            let (a, b) = (p[0] + star * v[0], p[1] + star * v[1]);
            (a * a + b * b).sqrt() / len
        };
        let mut total = 0.0;
        for (from, to) in [(star, 0.0), (star, 1.0)] {
            let span = (to - from).abs();
            if span == 0.0 {
                continue;
            }
            // breakpoints star + dir * span * 4^-k down to the axis gap
            let dir = (to - from).signum();
            let mut outer = span;
            while outer > 0.0 {
                let inner = if outer / 4.0 > gap.max(1e-12) { outer / 4.0 } else { 0.0 };
                let (a, b) = (from + dir * inner, from + dir * outer);
                total += self.piece(p, v, a.min(b), a.max(b))?;
                outer = inner;
            }
        }
        Ok(total * len)
    }
}

/// Lower bounds on the density ratios of `B^g_rho(center)` inside `B_{r_max}`
/// for a factor invariant under rotations of `x1..x_{n-1}`.
pub fn axial_density_lower_bound(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    center: &[f64],
    rhos: &[f64],
    r_max: f64,
    opts: &AxialBoundOptions,
) -> Result<AxialDensityBound> {
    let n = check_pair(u, g0)?;
    if !(u.is_rotation_invariant(n - 1) && g0.is_radially_conformal()) {
        return Err(Error::InvalidArgument(
            "axial bounds need a factor and background invariant under rotations of x1..x_{n-1}".into(),
        ));
    }
    if center.len() != n || norm(center) >= r_max {
        return Err(Error::InvalidArgument("center must lie inside B_{r_max}".into()));
    }
    let a0 = norm(&center[..n - 1]);
    if a0 == 0.0 {
        return Err(Error::InvalidArgument("center lies on the symmetry axis".into()));
    }
    let [ns, nz, nphi] = opts.cells;
    let s_top = r_max.ln();
    if rhos.is_empty() || ns == 0 || nz == 0 || nphi == 0 || opts.log_axis_min >= s_top {
        return Err(Error::InvalidArgument("empty axial bound request".into()));
    }
    let red = Reduced {
        u,
        g0,
        n,
        rule: gauss_gegenbauer(opts.chord_nodes, 0.0),
    };
    let x0 = [a0, 0.0, center[n - 1]];
    let hs = (s_top - opts.log_axis_min) / ns as f64;
    let hz = 2.0 * r_max / nz as f64;
    let hphi = PI / nphi as f64;
    let s_at = |i: f64| opts.log_axis_min + (i + 0.5) * hs;
    let measure = Measure::Conformal(u, g0);
    let orbit = sphere_area(n - 2);

    // per column: (weight, distance bound) of every counted cell
    let columns = (0..nz * nphi)
        .into_par_iter()
        .map(|col| {
            let z = -r_max + (col / nphi) as f64 * hz + 0.5 * hz;
            let phi = (col % nphi) as f64 * hphi + 0.5 * hphi;
            let (c, s) = (phi.cos(), phi.sin());
            let point = |sv: f64| {
                let a = sv.exp();
                [a * c, a * s, z]
            };
            let inside = (0..ns)
                .take_while(|i| {
                    let a = s_at(*i as f64).exp();
                    a * a + z * z <= r_max * r_max
                })
                .count();
            let mut climb = vec![0.0; inside];
            let mut chord = vec![0.0; inside];
            let mut weight = vec![0.0; inside];
            let radial = |sv: f64| -> Result<f64> { Ok(red.scale(point(sv))? * sv.exp()) };
            for i in 0..inside {
                let sv = s_at(i as f64);
                let y = point(sv);
                chord[i] = red.chord(x0, y)?;
                let a = sv.exp();
                weight[i] = measure.density(&embed(n, y))? * a.powi(n as i32 - 1)
                    * orbit
                    * s.powi(n as i32 - 3)
                    * hs
                    * hz
                    * hphi;
                if i > 0 {
                    let lo = s_at(i as f64 - 1.0);
                    climb[i] = climb[i - 1]
                        + hs / 6.0 * (radial(lo)? + 4.0 * radial(lo + 0.5 * hs)? + radial(sv)?);
                }
            }
            // bound(i) = min over i' >= i of chord(i') + climb(i') - climb(i)
            let mut best = f64::INFINITY;
            let mut bound = vec![0.0; inside];
            for i in (0..inside).rev() {
                best = best.min(chord[i] + climb[i]);
                bound[i] = (best - climb[i]).min(chord[i]);
            }
            Ok(weight.into_iter().zip(bound).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let volumes: Vec<f64> = rhos
        .iter()
        .map(|rho| {
            compensated_sum(
                columns
                    .iter()
                    .flatten()
                    .filter(|(_, d)| d <= rho)
                    .map(|(w, _)| *w),
            )
        })
        .collect();
    let vn = Dimension::new(n)?.ball_volume();
    Ok(AxialDensityBound {
        rhos: rhos.to_vec(),
        ratios: volumes
            .iter()
            .zip(rhos)
            .map(|(v, rho)| v / (vn * rho.powi(n as i32)))
            .collect(),
        volumes,
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
    fn chords_of_flat_space_are_euclidean() {
        let (u, g0) = setup("1", 4);
        let red = Reduced {
            u: &u,
            g0: &g0,
            n: 4,
            rule: gauss_gegenbauer(8, 0.0),
        };
        let l = red.chord([0.5, 0.0, 0.2], [-0.3, 0.1, -0.4]).unwrap();
        assert!((l - (0.64f64 + 0.01 + 0.36).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn graded_chord_resolves_near_axis_singularity() {
        // f = rho^{-4/3} along a chord ending at distance 1e-6 from the axis,
        // perpendicular to it: 3 (eps^{-1/3} - 1)
        let (u, g0) = setup("rho_4^(-2)", 5);
        let red = Reduced {
            u: &u,
            g0: &g0,
            n: 5,
            rule: gauss_gegenbauer(8, 0.0),
        };
        let eps: f64 = 1e-6;
        let l = red.chord([1.0, 0.0, 0.3], [eps, 0.0, 0.3]).unwrap();
        let exact = 3.0 * (eps.powf(-1.0 / 3.0) - 1.0);
        assert!((l / exact - 1.0).abs() < 1e-5, "{l} vs {exact}");
    }

    #[test]
    fn flat_balls_are_recovered_from_below() {
        let (u, g0) = setup("1", 4);
        let opts = AxialBoundOptions {
            log_axis_min: -8.0,
            cells: [96, 96, 32],
            chord_nodes: 4,
        };
        let b = axial_density_lower_bound(&u, &g0, &[0.0, 0.0, 0.0, 0.5], &[0.3], 1.0, &opts);
        assert!(b.is_err());
        let b = axial_density_lower_bound(&u, &g0, &[0.4, 0.0, 0.1, 0.0], &[0.3, 0.5], 1.0, &opts).unwrap();
        for r in &b.ratios {
            assert!((r - 1.0).abs() < 0.02, "{r}");
        }
    }

    #[test]
    fn rejects_factors_without_the_symmetry() {
        let (u, g0) = setup("1 + x1^2", 4);
        assert!(axial_density_lower_bound(&u, &g0, &[0.5, 0.0, 0.0, 0.0], &[0.1], 1.0, &AxialBoundOptions::default())
            .is_err());
    }

    #[test]
    fn codimension_four_fixture_exceeds_euclidean_density() {
        let (u, g0) = setup("rho_4^(-2)", 5);
        let b = axial_density_lower_bound(
            &u,
            &g0,
            &[0.5, 0.0, 0.0, 0.0, 0.0],
            &[16.0, 32.0],
            1.0,
            &AxialBoundOptions {
                cells: [96, 72, 16],
                ..Default::default()
            },
        )
        .unwrap();
        assert!(b.ratios[0] > 2.0 && b.ratios[1] > 10.0, "{:?}", b.ratios);
    }
}
