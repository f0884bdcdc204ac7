//! Shortest-path graph on the log-polar product grid.

use super::path::{minimize, polyline_length, refine, Endpoint};
use super::shortest::{dijkstra, trace};
use super::planar::{PlanarGrid, StripPath};
use super::{check_pair, chord_length, radial_profile, unit, DistanceResolution};
use crate::background::{norm, BackgroundMetric};
use crate::curvature::conformal_metric_at;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::AnnulusGrid;
use crate::quadrature::gauss_gegenbauer;
use crate::Dimension;
use rayon::prelude::*;

/// Vertices: the points of an [`AnnulusGrid`]. Edges join a vertex to the
/// nodes of its angular neighborhood (symmetrized nearest sphere nodes, itself
/// included) on shells up to `radial_reach` steps away; lengths use the
/// endpoint-averaged metric. Nearest-node adjacency rather than index
/// adjacency keeps the stencil isotropic near the poles of the product rule.
pub struct DistanceGraph {
    u: ConformalFactor,
    g0: BackgroundMetric,
    grid: AnnulusGrid,
    n: usize,
    /// Coordinates, `n` per vertex.
    points: Vec<f64>,
    /// Metric components, `n * n` per vertex.
    metric: Vec<f64>,
    /// Angular neighbors of every sphere node.
    around: Vec<Vec<usize>>,
    radial_reach: usize,
}

impl DistanceGraph {
    pub fn new(u: &ConformalFactor, g0: &BackgroundMetric, grid: AnnulusGrid) -> Result<Self> {
        let n = check_pair(u, g0)?;
        if grid.dimension() != n {
            return Err(Error::InvalidArgument("grid dimension does not match the metric".into()));
        }
        let count = grid.len();
        let points: Vec<f64> = (0..count).flat_map(|k| grid.point_flat(k)).collect();
        let metric = points
            .par_chunks(n)
            .map(|x| conformal_metric_at(u, g0, x))
            .collect::<Result<Vec<_>>>()?
            .concat();
        let (around, spacing) = sphere_neighbors(grid.sphere());
        let ds = (grid.r_max() / grid.r_min()).ln() / (grid.radii().len() - 1) as f64;
        let radial_reach = ((spacing / ds).round() as usize).clamp(1, 4);
        Ok(DistanceGraph {
            u: u.clone(),
            g0: g0.clone(),
            grid,
            n,
            points,
            metric,
            around,
            radial_reach,
        })
    }

    pub fn grid(&self) -> &AnnulusGrid {
        &self.grid
    }

    pub fn vertex_count(&self) -> usize {
        self.grid.len()
    }

    pub fn point(&self, v: usize) -> &[f64] {
        &self.points[v * self.n..(v + 1) * self.n]
    }

    /// Length of the edge `a - b` (symmetric in `a`, `b`).
    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let n = self.n;
        let (pa, pb) = (self.point(a), self.point(b));
        let (ga, gb) = (&self.metric[a * n * n..(a + 1) * n * n], &self.metric[b * n * n..(b + 1) * n * n]);
        let mut q = 0.0;
        for i in 0..n {
            let di = pb[i] - pa[i];
            for j in 0..n {
                q += 0.5 * (ga[i * n + j] + gb[i * n + j]) * di * (pb[j] - pa[j]);
            }
        }
        q.sqrt()
    }

    /// Calls `push(w, length)` for every neighbor `w` of `v`.
    pub fn for_each_neighbor(&self, v: usize, push: &mut dyn FnMut(usize, f64)) {
        let m = self.grid.sphere().len();
        let shells = self.grid.radii().len() as isize;
        let (i, j) = ((v / m) as isize, v % m);
        let reach = self.radial_reach as isize;
        for a in -reach..=reach {
            let i2 = i + a;
            if i2 < 0 || i2 >= shells {
                continue;
            }
            let base = i2 as usize * m;
            if a != 0 {
                push(base + j, self.edge_length(v, base + j));
            }
            for &k in &self.around[j] {
                push(base + k, self.edge_length(v, base + k));
            }
        }
    }

    /// Vertices near `x` with chord lengths to them.
    pub fn attachments(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let r = norm(x);
        let radii = self.grid.radii();
        let (lo, hi) = (radii[0], radii[radii.len() - 1]);
        if !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) || x.len() != self.n {
            return Err(Error::Disconnected { point: x.to_vec() });
        }
        let i0 = radii.partition_point(|s| *s <= r).saturating_sub(1).min(radii.len() - 2);
        let sphere = self.grid.sphere();
        let nearest = sphere
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, t)| (t.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(), j))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("sphere has nodes")
            .1;
        let m = sphere.len();
        let mut out = Vec::new();
        for i in [i0, i0 + 1] {
            // nearest node plus its neighborhood on both bracketing shells
            for j in std::iter::once(nearest).chain(self.around[nearest].iter().copied()) {
                let v = i * m + j;
                out.push((v, chord_length(&self.u, &self.g0, x, self.point(v))?));
            }
        }
        Ok(out)
    }

    /// Graph distance field from the point `x`.
    pub fn field_from(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let sources = self.attachments(x)?;
        Ok(self.field(&sources))
    }

    pub fn field(&self, sources: &[(usize, f64)]) -> (Vec<f64>, Vec<usize>) {
        dijkstra(self.vertex_count(), sources, |v, push| self.for_each_neighbor(v, push))
    }

    /// Shortest graph path `x -> y` as a polyline, with its graph length.
    pub fn path(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        let (dist, pred) = self.field_from(x)?;
        let (d, v) = self
            .attachments(y)?
            .into_iter()
            .map(|(v, c)| (dist[v] + c, v))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("attachments are nonempty");
        if !d.is_finite() {
            return Err(Error::Disconnected { point: y.to_vec() });
        }
        let mut poly = vec![x.to_vec()];
        poly.extend(trace(&pred, v).into_iter().map(|w| self.point(w).to_vec()));
        poly.push(y.to_vec());
        Ok((d, poly))
    }
}

/// Angular neighborhoods: every node within `1.6` latitude steps of the
/// product rule (the Gegenbauer levels are close to equispaced in angle, while
/// the circle crowds toward the poles). Returns the lists and the step.
fn sphere_neighbors(sphere: &crate::quadrature::SphereQuadrature) -> (Vec<Vec<usize>>, f64) {
    let nodes = sphere.nodes();
    let step = std::f64::consts::PI / sphere.shape()[0] as f64;
    let cos_reach = (1.6 * step).cos();
    let around = nodes
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            nodes
                .iter()
                .enumerate()
                .filter(|(j, b)| *j != i && a.iter().zip(b.iter()).map(|(p, q)| p * q).sum::<f64>() >= cos_reach)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    (around, step)
}

/// Geodesic distances on `B_{r_max} \ B_{r_min}`: a shortest path seeds a
/// polyline that is then refined. Metrics `f(|x|)^2 delta` use the planar
/// reduction in the plane spanned by both endpoints; all others the
/// n-dimensional [`DistanceGraph`].
pub struct GeodesicSolver {
    engine: Engine,
    u: ConformalFactor,
    g0: BackgroundMetric,
    radii: (f64, f64),
    res: DistanceResolution,
}

enum Engine {
    Graph(DistanceGraph),
    Planar,
}

impl GeodesicSolver {
    pub fn new(
        u: &ConformalFactor,
        g0: &BackgroundMetric,
        r_min: f64,
        r_max: f64,
        res: &DistanceResolution,
    ) -> Result<Self> {
        check_pair(u, g0)?;
        if radial_profile(u, g0).is_none() {
            return Self::with_graph(u, g0, r_min, r_max, res);
        }
        if !(r_min > 0.0 && r_min < r_max) {
            return Err(Error::BadRadii { r_min, r_max });
        }
        Ok(GeodesicSolver {
            engine: Engine::Planar,
            u: u.clone(),
            g0: g0.clone(),
            radii: (r_min, r_max),
            res: *res,
        })
    }

    /// Always use the n-dimensional graph.
    pub fn with_graph(
        u: &ConformalFactor,
        g0: &BackgroundMetric,
        r_min: f64,
        r_max: f64,
        res: &DistanceResolution,
    ) -> Result<Self> {
        let n = Dimension::new(check_pair(u, g0)?)?;
        let grid = crate::grid::Resolution::new(res.radial_count, res.sphere_degree).grid(n, r_min, r_max)?;
        Ok(GeodesicSolver {
            engine: Engine::Graph(DistanceGraph::new(u, g0, grid)?),
            u: u.clone(),
            g0: g0.clone(),
            radii: (r_min, r_max),
            res: *res,
        })
    }

    /// The n-dimensional graph, unless the planar reduction is in use.
    pub fn graph(&self) -> Option<&DistanceGraph> {
        match &self.engine {
            Engine::Graph(g) => Some(g),
            Engine::Planar => None,
        }
    }

    fn check_inside(&self, x: &[f64]) -> Result<()> {
        let r = norm(x);
        let (lo, hi) = self.radii;
        if r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::Disconnected { point: x.to_vec() })
        }
    }

    /// Shortest path in the plane through `0, x, y`, optionally refined in
    /// `(log r, angle)`; returns its length and the path embedded in `R^n`.
    fn planar_geodesic(&self, x: &[f64], y: &[f64], refined: bool) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        let profile = radial_profile(&self.u, &self.g0).expect("planar engine needs a radial metric");
        let big_f = |s: f64| -> Result<f64> { Ok(profile(s.exp())? * s.exp()) };
        let (rx, ry) = (norm(x), norm(y));
        let grid = PlanarGrid::new(&profile, x.len(), rx, self.radii.0, self.radii.1, &self.res)?;
        let (_, pred) = grid.point_tree(rx)?;
        let e = unit(x)?;
        let along: f64 = e.iter().zip(y).map(|(a, b)| a * b).sum();
        let mut w: Vec<f64> = y.iter().zip(&e).map(|(b, a)| b - along * a).collect();
        let wn = norm(&w);
        if wn > 1e-14 * ry {
            w.iter_mut().for_each(|v| *v /= wn);
        } else {
            // any direction orthogonal to e
            let k = (0..e.len()).min_by(|a, b| e[*a].abs().total_cmp(&e[*b].abs())).expect("n >= 1");
            w = e.iter().map(|a| -a * e[k]).collect();
            w[k] += 1.0;
            let m = norm(&w);
            w.iter_mut().for_each(|v| *v /= m);
        }
        let psi = wn.atan2(along);
        let mut seed = vec![rx.ln(), 0.0];
        for v in trace(&pred, grid.nearest(ry, psi)).into_iter().skip(1) {
            let (r, a) = grid.position(v);
            seed.extend([r.ln(), a]);
        }
        if seed.len() > 2 {
            seed.truncate(seed.len() - 2);
        }
        seed.extend([ry.ln(), psi]);
        let strip = StripPath {
            big_f: &big_f,
            s_lo: self.radii.0.ln(),
            s_hi: self.radii.1.ln(),
        };
        let pts = if refined {
            minimize(&strip, strip.resample(&seed, self.res.path_nodes)?)?
        } else {
            seed
        };
        let embedded = pts
            .chunks(2)
            .map(|p| {
                let r = p[0].exp();
                e.iter().zip(&w).map(|(a, b)| r * (p[1].cos() * a + p[1].sin() * b)).collect()
            })
            .collect();
        Ok((strip.length(&pts)?, embedded))
    }

    /// Unrefined shortest-path length.
    pub fn graph_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.engine {
            Engine::Graph(g) => Ok(g.path(x, y)?.0),
            Engine::Planar => Ok(self.planar_geodesic(x, y, false)?.0),
        }
    }

    /// Refined distance and the discrete geodesic realizing it.
    pub fn geodesic(&self, x: &[f64], y: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        let g = match &self.engine {
            Engine::Graph(g) => g,
            Engine::Planar => {
                if x == y {
                    self.check_inside(x)?;
                    return Ok((0.0, vec![x.to_vec()]));
                }
                return self.planar_geodesic(x, y, true);
            }
        };
        let (_, poly) = g.path(x, y)?;
        if x == y {
            return Ok((0.0, vec![x.to_vec()]));
        }
        let pts = refine(
            &self.u,
            &self.g0,
            &poly,
            (Endpoint::Fixed, Endpoint::Fixed),
            self.res.path_nodes,
            self.radii,
        )?;
        Ok((polyline_length(&self.u, &self.g0, &pts)?, pts))
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.geodesic(x, y)?.0)
    }

    /// `d_g(x, {|y| = radius})`.
    pub fn point_to_sphere(&self, x: &[f64], radius: f64) -> Result<f64> {
        let (lo, hi) = self.radii;
        if !(radius >= lo && radius <= hi) {
            return Err(Error::RadiusOutOfRange { r: radius, lo, hi });
        }
        let g = match &self.engine {
            Engine::Graph(g) => g,
            Engine::Planar => {
                // the radial segment is minimal: any path crosses every sphere in between
                self.check_inside(x)?;
                let profile = radial_profile(&self.u, &self.g0).expect("planar engine needs a radial metric");
                let (a, b) = (norm(x).ln(), radius.ln());
                let panels = ((b - a).abs() * 16.0).ceil().max(1.0) as usize;
                let h = (b - a) / panels as f64;
                let rule = gauss_gegenbauer(8, 0.0);
                let mut total = 0.0;
                for k in 0..panels {
                    for (t, wt) in &rule {
                        let s = a + h * (k as f64 + 0.5 + 0.5 * t);
                        total += 0.5 * h.abs() * wt * profile(s.exp())? * s.exp();
                    }
                }
                return Ok(total);
            }
        };
        let (dist, pred) = g.field_from(x)?;
        let m = g.grid.sphere().len();
        let radii = g.grid.radii();
        let i = radii
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - radius).abs().total_cmp(&(b.1 - radius).abs()))
            .map(|(i, _)| i)
            .expect("grid has radii");
        let v = (i * m..(i + 1) * m)
            .min_by(|a, b| dist[*a].total_cmp(&dist[*b]))
            .expect("sphere has nodes");
        let mut poly = vec![x.to_vec()];
        poly.extend(trace(&pred, v).into_iter().map(|w| g.point(w).to_vec()));
        let tip = poly.last().expect("nonempty").clone();
        let s = radius / norm(&tip);
        poly.push(tip.iter().map(|t| t * s).collect());
        let pts = refine(
            &self.u,
            &self.g0,
            &poly,
            (Endpoint::Fixed, Endpoint::Sphere(radius)),
            self.res.path_nodes,
            self.radii,
        )?;
        polyline_length(&self.u, &self.g0, &pts)
    }
}

/// `d_g(x, y)` on the annulus `radii = (r_min, r_max)`: graph path, then refinement.
pub fn geodesic_distance(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    x: &[f64],
    y: &[f64],
    radii: (f64, f64),
    res: &DistanceResolution,
) -> Result<f64> {
    GeodesicSolver::new(u, g0, radii.0, radii.1, res)?.distance(x, y)
}
