//! Planar reduction of `g = f(|x|)^2 delta`.
//!
//! In a 2-plane through the origin with polar coordinates `(r, psi)` and
//! `s = log r`, `g = F(s)^2 (ds^2 + dpsi^2)` with `F = f r`. Sources placed on
//! the ray `psi = 0` (or on whole rows) give fields symmetric under
//! `psi -> -psi`, so the half-strip `psi in [0, pi]` suffices. Rotating the
//! half-plane about the source axis sweeps `R^n`, hence
//! `dV_g = F^n omega_{n-2} sin^{n-2}(psi) ds dpsi`.

use super::path::Objective;
use super::shortest::dijkstra;
use super::GAUSS3;
use super::DistanceResolution;
use crate::dim::sphere_area;
use crate::error::{Error, Result};
use crate::quadrature::compensated_sum;
use rayon::prelude::*;
use std::f64::consts::{LN_2, PI};

/// Sub-cells per cell side at the ball frontier.
const SUB: usize = 8;

pub(crate) struct PlanarGrid {
    n: usize,
    s0: f64,
    hs: f64,
    rows: usize,
    cols: usize,
    hpsi: f64,
    /// `F` at half-row positions `s0 + k hs / 2`.
    f_half: Vec<f64>,
    /// `F^n` at the `SUB` sub-row midpoints of every row interval.
    fn_sub: Vec<f64>,
    stencil: Vec<(isize, isize, f64)>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl PlanarGrid {
    /// Rows at `anchor * 2^{k / per_octave}` covering `[r_lo, r_hi]` from inside.
    pub fn new<P>(profile: &P, n: usize, anchor: f64, r_lo: f64, r_hi: f64, res: &DistanceResolution) -> Result<Self>
    where
        P: Fn(f64) -> Result<f64> + Sync,
    {
        if !(r_lo > 0.0 && r_lo < r_hi && anchor > 0.0) {
            return Err(Error::BadRadii {
                r_min: r_lo,
                r_max: r_hi,
            });
        }
        if res.planar_per_octave == 0 || res.stencil == 0 {
            return Err(Error::InvalidArgument("planar resolution must be positive".into()));
        }
        let hs = LN_2 / res.planar_per_octave as f64;
        let la = anchor.ln();
        let k_lo = ((r_lo.ln() - la) / hs - 1e-9).ceil() as i64;
        let k_hi = ((r_hi.ln() - la) / hs + 1e-9).floor() as i64;
        if k_hi - k_lo < 1 {
            return Err(Error::BadRadii {
                r_min: r_lo,
                r_max: r_hi,
            });
        }
        let rows = (k_hi - k_lo + 1) as usize;
        let s0 = la + k_lo as f64 * hs;
        let cols = (PI / hs).round().max(2.0) as usize + 1;
        let hpsi = PI / (cols - 1) as f64;

        let big_f = |s: f64| -> Result<f64> { Ok(profile(s.exp())? * s.exp()) };
        let f_half = (0..2 * rows - 1)
            .into_par_iter()
            .map(|k| big_f(s0 + k as f64 * hs / 2.0))
            .collect::<Result<Vec<f64>>>()?;
        let fn_sub = (0..(rows - 1) * SUB)
            .into_par_iter()
            .map(|k| Ok(big_f(s0 + (k as f64 + 0.5) * hs / SUB as f64)?.powi(n as i32)))
            .collect::<Result<Vec<f64>>>()?;

        let k = res.stencil as isize;
        let mut stencil = Vec::new();
        for a in -k..=k {
            for b in -k..=k {
                if (a, b) != (0, 0) && gcd(a.unsigned_abs(), b.unsigned_abs()) == 1 {
                    let e = ((a as f64 * hs).powi(2) + (b as f64 * hpsi).powi(2)).sqrt();
                    stencil.push((a, b, e));
                }
            }
        }
        Ok(PlanarGrid {
            n,
            s0,
            hs,
            rows,
            cols,
            hpsi,
            f_half,
            fn_sub,
            stencil,
        })
    }

    #[cfg(test)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn radius(&self, j: usize) -> f64 {
        (self.s0 + j as f64 * self.hs).exp()
    }

    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * self.hpsi
    }

    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.cols + i
    }

    /// Row holding radius `r`, which must lie on the grid.
    pub fn row_of(&self, r: f64) -> Result<usize> {
        let t = (r.ln() - self.s0) / self.hs;
        let j = t.round();
        let hi = self.radius(self.rows - 1);
        if !(j >= 0.0 && (j as usize) < self.rows) {
            return Err(Error::RadiusOutOfRange {
                r,
                lo: self.radius(0),
                hi,
            });
        }
        if (t - j).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "radius {r} is not a row of the planar grid"
            )));
        }
        Ok(j as usize)
    }

    fn neighbors(&self, v: usize, push: &mut dyn FnMut(usize, f64)) {
        let (j, i) = ((v / self.cols) as isize, (v % self.cols) as isize);
        for &(a, b, e) in &self.stencil {
            let (j2, i2) = (j + a, i + b);
            if j2 < 0 || i2 < 0 || j2 >= self.rows as isize || i2 >= self.cols as isize {
                continue;
            }
            let f0 = self.f_half[2 * j as usize];
            let fm = self.f_half[(2 * j + a) as usize];
            let f1 = self.f_half[2 * j2 as usize];
            push(self.index(j2 as usize, i2 as usize), e * (f0 + 4.0 * fm + f1) / 6.0);
        }
    }

    pub fn field(&self, sources: &[(usize, f64)]) -> Vec<f64> {
        dijkstra(self.rows * self.cols, sources, |v, push| self.neighbors(v, push)).0
    }

    /// Distance field from the point at radius `r` on the axis.
    pub fn point_field(&self, r: f64) -> Result<Vec<f64>> {
        let j = self.row_of(r)?;
        Ok(self.field(&[(self.index(j, 0), 0.0)]))
    }

    /// Distance field and predecessors from the point at radius `r` on the axis.
    pub fn point_tree(&self, r: f64) -> Result<(Vec<f64>, Vec<usize>)> {
        let j = self.row_of(r)?;
        Ok(dijkstra(self.rows * self.cols, &[(self.index(j, 0), 0.0)], |v, push| {
            self.neighbors(v, push)
        }))
    }

    /// Vertex nearest to `(r, psi)` in `(log r, psi)`, clamped to the grid.
    pub fn nearest(&self, r: f64, psi: f64) -> usize {
        let j = ((r.ln() - self.s0) / self.hs).round().clamp(0.0, (self.rows - 1) as f64) as usize;
        let i = (psi / self.hpsi).round().clamp(0.0, (self.cols - 1) as f64) as usize;
        self.index(j, i)
    }

    /// `(r, psi)` of vertex `v`.
    pub fn position(&self, v: usize) -> (f64, f64) {
        (self.radius(v / self.cols), self.angle(v % self.cols))
    }

    /// Distance field from the whole sphere `|x| = r`.
    pub fn row_field(&self, r: f64) -> Result<Vec<f64>> {
        let j = self.row_of(r)?;
        let sources: Vec<(usize, f64)> = (0..self.cols).map(|i| (self.index(j, i), 0.0)).collect();
        Ok(self.field(&sources))
    }

    pub fn row<'a>(&self, dist: &'a [f64], j: usize) -> &'a [f64] {
        &dist[j * self.cols..(j + 1) * self.cols]
    }

    fn angular_density(&self, psi: f64) -> f64 {
        sphere_area(self.n - 1) * psi.sin().powi(self.n as i32 - 2)
    }

    /// `vol_g {d <= rho, |x| <= clip}` by cellwise quadrature; cells cut by the
    /// frontier are subdivided and the field interpolated bilinearly.
    pub fn sublevel_volume(&self, dist: &[f64], rho: f64, clip: f64) -> Result<f64> {
        let inner = self.row(dist, 0);
        let reached = inner.iter().filter(|d| **d <= rho).count();
        if reached > 0 {
            return Err(Error::BallEscapesDomain {
                reachable_fraction: reached as f64 / self.cols as f64,
            });
        }
        let (ds, dp) = (self.hs / SUB as f64, self.hpsi / SUB as f64);
        let col_sub: Vec<f64> = (0..(self.cols - 1) * SUB)
            .map(|k| self.angular_density((k as f64 + 0.5) * dp) * dp)
            .collect();
        let top = (0..self.rows)
            .take_while(|j| self.radius(*j) <= clip * (1.0 + 1e-12))
            .count();
        let per_row: Vec<f64> = (0..top.saturating_sub(1))
            .into_par_iter()
            .map(|j| {
                let a = &self.fn_sub[j * SUB..(j + 1) * SUB];
                let row_w: f64 = a.iter().sum::<f64>() * ds;
                let mut acc = Vec::with_capacity(self.cols);
                for i in 0..self.cols - 1 {
                    let c = [
                        dist[self.index(j, i)],
                        dist[self.index(j + 1, i)],
                        dist[self.index(j, i + 1)],
                        dist[self.index(j + 1, i + 1)],
                    ];
                    let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                    let b = &col_sub[i * SUB..(i + 1) * SUB];
                    if hi <= rho {
                        acc.push(row_w * b.iter().sum::<f64>());
                    } else if lo <= rho {
                        let mut v = 0.0;
                        for (p, ap) in a.iter().enumerate() {
                            let ts = (p as f64 + 0.5) / SUB as f64;
                            for (q, bq) in b.iter().enumerate() {
                                let tp = (q as f64 + 0.5) / SUB as f64;
                                let d = c[0] * (1.0 - ts) * (1.0 - tp)
                                    + c[1] * ts * (1.0 - tp)
                                    + c[2] * (1.0 - ts) * tp
                                    + c[3] * ts * tp;
                                if d <= rho {
                                    v += ap * ds * bq;
                                }
                            }
                        }
                        acc.push(v);
                    }
                }
                compensated_sum(acc)
            })
            .collect();
        Ok(compensated_sum(per_row))
    }
}

/// Paths in the half-strip `(s, psi) in [s_lo, s_hi] x [0, pi]` with metric
/// `F(s)^2 (ds^2 + dpsi^2)`, flattened as `[s_0, psi_0, s_1, psi_1, ...]`.
/// Straight chords never leave the strip, so no chord can shortcut through
/// the excluded ball.
pub(crate) struct StripPath<'a, F> {
    pub big_f: &'a F,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl<F> StripPath<'_, F>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    fn chord(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let (ds, dp) = (b[0] - a[0], b[1] - a[1]);
        let mut total = 0.0;
        for (t, w) in GAUSS3 {
            total += w * (self.big_f)(a[0] + t * ds)?;
        }
        Ok(total * (ds * ds + dp * dp).sqrt())
    }

    pub fn length(&self, pts: &[f64]) -> Result<f64> {
        let parts = pts
            .windows(4)
            .step_by(2)
            .map(|w| self.chord(&w[..2], &w[2..]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(parts))
    }

    /// `segments + 1` points equally spaced in length along `pts`.
    pub fn resample(&self, pts: &[f64], segments: usize) -> Result<Vec<f64>> {
        let lens = pts
            .windows(4)
            .step_by(2)
            .map(|w| self.chord(&w[..2], &w[2..]))
            .collect::<Result<Vec<f64>>>()?;
        let total: f64 = lens.iter().sum();
        let mut out = Vec::with_capacity(2 * (segments + 1));
        let (mut k, mut acc) = (0usize, 0.0);
        for i in 0..=segments {
            let target = total * i as f64 / segments as f64;
            while k + 1 < lens.len() && acc + lens[k] < target {
                acc += lens[k];
                k += 1;
            }
            let t = if lens[k] > 0.0 {
                ((target - acc) / lens[k]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            for c in 0..2 {
                out.push(pts[2 * k + c] + t * (pts[2 * k + 2 + c] - pts[2 * k + c]));
            }
        }
        let (m, p) = (out.len(), pts.len());
        out[m - 2..].copy_from_slice(&pts[p - 2..]);
        Ok(out)
    }
}

impl<F> Objective for StripPath<'_, F>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    /// `N sum_k F(mid)^2 |P_{k+1} - P_k|^2` with fixed ends.
    fn energy(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let segments = x.len() / 2 - 1;
        let scale = segments as f64;
        let parts = (0..segments)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (&x[2 * k..2 * k + 2], &x[2 * k + 2..2 * k + 4]);
                let m = 0.5 * (a[0] + b[0]);
                let h = 1e-5;
                let f = (self.big_f)(m)?;
                let df = ((self.big_f)(m + h)? - (self.big_f)(m - h)?) / (2.0 * h);
                let d = [b[0] - a[0], b[1] - a[1]];
                Ok((f, df, d))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; x.len()];
        let mut total = Vec::with_capacity(segments);
        for (k, (f, df, d)) in parts.into_iter().enumerate() {
            let q = d[0] * d[0] + d[1] * d[1];
            total.push(f * f * q);
            for c in 0..2 {
                grad[2 * k + c] -= scale * 2.0 * f * f * d[c];
                grad[2 * k + 2 + c] += scale * 2.0 * f * f * d[c];
            }
            grad[2 * k] += scale * f * df * q;
            grad[2 * k + 2] += scale * f * df * q;
        }
        let last = grad.len() - 2;
        for i in [0, 1, last, last + 1] {
            grad[i] = 0.0;
        }
        Ok((scale * compensated_sum(total), grad))
    }

    fn project(&self, x: &mut [f64]) {
        let last = x.len() / 2 - 1;
        for k in 1..last {
            x[2 * k] = x[2 * k].clamp(self.s_lo, self.s_hi);
            x[2 * k + 1] = x[2 * k + 1].clamp(0.0, PI);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dim::Dimension;

    fn flat(_: f64) -> Result<f64> {
        Ok(1.0)
    }

    fn inversion(r: f64) -> Result<f64> {
        Ok(r.powi(-2))
    }

    #[test]
    fn flat_plane_distances() {
        let res = DistanceResolution::default();
        let g = PlanarGrid::new(&flat, 4, 1.0, 0.25, 4.0, &res).unwrap();
        let d = g.point_field(1.0).unwrap();
        // radial neighbor at r = 2 and the point at angle ~ pi/2 on r = 1
        let j2 = g.row_of(2.0).unwrap();
        assert!((d[g.index(j2, 0)] - 1.0).abs() < 1e-3);
        let j1 = g.row_of(1.0).unwrap();
        let i = (g.cols() - 1) / 2;
        let exact = 2.0 * (g.angle(i) / 2.0).sin();
        assert!((d[g.index(j1, i)] - exact).abs() < 5e-3 * exact);
    }

    #[test]
    fn inversion_metric_is_flat_in_inverted_coordinates() {
        // d(r e1, 2r e1) = 1/r - 1/(2r)
        let res = DistanceResolution::default();
        let g = PlanarGrid::new(&inversion, 4, 0.125, 0.01, 1.0, &res).unwrap();
        let d = g.point_field(0.125).unwrap();
        let j = g.row_of(0.25).unwrap();
        assert!((d[g.index(j, 0)] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn flat_ball_volume() {
        let res = DistanceResolution::default();
        for n in [3, 4] {
            let g = PlanarGrid::new(&flat, n, 1.0, 0.25, 2.0, &res).unwrap();
            let d = g.point_field(1.0).unwrap();
            let v = g.sublevel_volume(&d, 0.5, f64::INFINITY).unwrap();
            let exact = Dimension::new(n).unwrap().ball_volume() * 0.5f64.powi(n as i32);
            assert!((v / exact - 1.0).abs() < 0.01, "n={n} {v} vs {exact}");
        }
    }

    #[test]
    fn escaping_ball_is_reported() {
        let res = DistanceResolution::default();
        let g = PlanarGrid::new(&flat, 3, 1.0, 0.5, 2.0, &res).unwrap();
        let d = g.point_field(1.0).unwrap();
        assert!(matches!(
            g.sublevel_volume(&d, 0.9, f64::INFINITY),
            Err(Error::BallEscapesDomain { .. })
        ));
    }
}
