//! Runs each suite against a validated scenario and turns results into rows.

use crate::report::{Comparison, Row, Scale, SuiteReport};
use crate::scenario::{Scenario, Suite};
use conflab::background::BackgroundMetric;
use conflab::conformal_4d::{gbc_annulus_check, riem_l2_profile, topological_target};
use conflab::curvature::{conformal_geometry, scalar_curvature_conformal};
use conflab::cylinder::{change_of_variables_check, to_cylinder};
use conflab::factor::ConformalFactor;
use conflab::metric_lab::{
    blow_down, decay_ratio_suite, volume_density_profile, w_profile, BallDomain, DecayOptions, TargetKind,
};
use conflab::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Context<'a> {
    scenario: &'a Scenario,
    u: ConformalFactor,
    g0: BackgroundMetric,
}

/// Runs one suite; an error inside it becomes a single failing row.
pub fn run_suite(scenario: &Scenario, suite: Suite) -> SuiteReport {
    let cx = Context {
        scenario,
        u: scenario.factor(),
        g0: scenario.background(),
    };
    let rows = match suite {
        Suite::Curvature => curvature(&cx),
        Suite::ThreeCircle => three_circle(&cx),
        Suite::Decay => decay(&cx),
        Suite::VolumeDensity => volume_density(&cx),
        Suite::BlowDown => blow_down_rows(&cx),
        Suite::Gbc => gbc(&cx),
        Suite::RiemL2 => riem_l2(&cx),
        Suite::WProfile => w_profile_rows(&cx),
    };
    let rows = rows.unwrap_or_else(|e| vec![Row::failure(format!("{suite} error"), e.to_string())]);
    SuiteReport::new(suite, rows)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Seeded probe points, log-uniform in radius over the annulus.
fn probes(s: &Scenario) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (lo, hi) = (s.annulus.inner_radius_chart.ln(), s.annulus.outer_radius_chart.ln());
    let n = s.dimension;
    (0..s.curvature.probes)
        .map(|_| loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-3 && norm <= 1.0 {
                let r = rng.gen_range(lo..=hi).exp();
                break v.iter().map(|c| c * r / norm).collect();
            }
        })
        .collect()
}

fn curvature(cx: &Context) -> Result<Vec<Row>> {
    let s = cx.scenario;
    let tol = s.curvature.tolerance;
    let (mut yamabe, mut trace, mut split) = (0.0f64, 0.0f64, 0.0f64);
    for x in probes(s) {
        let geo = conformal_geometry(&cx.u, &cx.g0, &x, 2)?;
        let c = geo.curvature();
        yamabe = yamabe.max(rel(scalar_curvature_conformal(&cx.u, &cx.g0, &x)?, c.scalar));
        trace = trace.max(rel(c.ricci_trace(&geo.inverse_values()), c.scalar));
        if s.dimension == 4 {
            let rhs = c.weyl_sq + 2.0 * c.ric_sq - c.scalar.powi(2) / 3.0;
            split = split.max(rel(rhs, c.riem_sq));
        }
    }
    let probes = s.curvature.probes as f64;
    let mut rows = vec![
        Row::new("yamabe-consistency", yamabe, 0.0, Comparison::AtMost, Scale::Absolute, tol)
            .note(format!("max over {probes} probes of |R_law - R| / max(|R|, 1)")),
        Row::new("ricci-trace", trace, 0.0, Comparison::AtMost, Scale::Absolute, tol)
            .note(format!("max over {probes} probes of |g^ij Ric_ij - R| / max(|R|, 1)")),
    ];
    if s.dimension == 4 {
        rows.push(
            Row::new("weyl-split", split, 0.0, Comparison::AtMost, Scale::Absolute, tol)
                .note("|Riem|^2 = |W|^2 + 2|Ric|^2 - R^2/3, relative to max(|Riem|^2, 1)"),
        );
    }
    Ok(rows)
}

fn three_circle(cx: &Context) -> Result<Vec<Row>> {
    let c = &cx.scenario.three_circle;
    let res = cx.scenario.resolution.quadrature();
    let len = c.segment_length;
    let field = to_cylinder(&cx.u, &cx.g0, c.anchor_radius_chart, len)?;
    let series = field.segment_series(c.segments, res)?;
    let k = (-len).exp();
    let mut rows: Vec<Row> = series
        .windows(3)
        .enumerate()
        .map(|(i, w)| {
            // at most 1 exactly when E2 <= e^{-L} E1 or E2 <= e^{-L} E3
            let ratio = |e: f64| if w[1] == 0.0 { 0.0 } else { w[1] / (k * e) };
            let m = ratio(w[0]).min(ratio(w[2]));
            Row::new("three-circle-ratio", m, 1.0, Comparison::AtMost, Scale::Absolute, 1e-12)
                .at(field.t0() + i as f64 * len)
                .note("min(E2 / (e^-L E1), E2 / (e^-L E3)) for the window starting at t")
        })
        .collect();
    let a = field.t0();
    let cov = change_of_variables_check(&cx.u, &cx.g0, a, a + c.segments as f64 * len, res)?;
    rows.push(
        Row::new(
            "change-of-variables",
            cov.relative_gap,
            0.0,
            Comparison::AtMost,
            Scale::Absolute,
            c.change_of_variables_tolerance,
        )
        .note(format!("cylinder {:.12e} vs annulus {:.12e}", cov.cylinder, cov.annulus)),
    );
    Ok(rows)
}

fn decay(cx: &Context) -> Result<Vec<Row>> {
    let s = cx.scenario;
    let c = &s.decay;
    let opts = DecayOptions {
        x0: None,
        alpha: c.alpha,
        beta: c.beta,
        outer: s.annulus.outer_radius_chart,
        integration: s.resolution.quadrature(),
        distance: s.resolution.distance,
    };
    let mut rows = Vec::new();
    for &r in &c.radii_chart {
        let rep = decay_ratio_suite(&cx.u, &cx.g0, r, &opts)?;
        for q in rep.ratios {
            let base = Row::new(q.name, q.value, q.target, Comparison::Equal, Scale::Relative, c.tolerance).at(r);
            rows.push(match q.kind {
                TargetKind::Asymptotic => base,
                TargetKind::UpperBound => {
                    let mut row = base;
                    row.comparison = Comparison::AtMost;
                    row.judge();
                    row
                }
                TargetKind::Band { upper } => base.band(upper),
            });
        }
    }
    Ok(rows)
}

fn volume_density(cx: &Context) -> Result<Vec<Row>> {
    let s = cx.scenario;
    let c = &s.volume_density;
    let center = c.center_chart.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; s.dimension];
        e[0] = 0.5;
        e
    });
    let mut domain = BallDomain::annulus(c.inner_radius_chart, c.outer_radius_chart);
    if let Some(clip) = c.clip_radius_chart {
        domain = domain.clipped(clip);
    }
    let p = volume_density_profile(&cx.u, &cx.g0, &center, &c.rhos, domain, &s.resolution.distance)?;
    let mut rows: Vec<Row> = p
        .rhos
        .iter()
        .zip(&p.ratios)
        .map(|(rho, ratio)| {
            Row::new("density-ratio", *ratio, 1.0, Comparison::Equal, Scale::Relative, c.tolerance)
                .at(*rho)
                .note("vol(B_rho) / (V_n rho^n)")
        })
        .collect();
    let growth = p
        .ratios
        .windows(2)
        .map(|w| (w[1] - 1.0).abs() - (w[0] - 1.0).abs())
        .fold(f64::NEG_INFINITY, f64::max);
    if growth.is_finite() {
        rows.push(
            Row::new("monotone-approach", growth, 0.0, Comparison::AtMost, Scale::Absolute, c.monotone_slack)
                .note("largest increase of |ratio - 1| between consecutive radii"),
        );
    }
    Ok(rows)
}

fn blow_down_rows(cx: &Context) -> Result<Vec<Row>> {
    let c = &cx.scenario.blow_down;
    let seq = blow_down(
        &cx.u,
        &cx.g0,
        &c.radii_chart,
        (c.reference_inner_chart, c.reference_outer_chart),
        cx.scenario.resolution.quadrature(),
    )?;
    let mut rows = Vec::new();
    for k in 0..seq.len() {
        let r = seq.r_k[k];
        rows.push(
            Row::new("deviation", seq.deviations[k], 0.0, Comparison::AtMost, Scale::Absolute, c.tolerance)
                .at(r)
                .note("sup |u_k |x|^(n-2) - 1| on the reference annulus"),
        );
        rows.push(
            Row::new(
                "normalization",
                seq.normalization[k].abs(),
                0.0,
                Comparison::AtMost,
                Scale::Absolute,
                c.normalization_tolerance,
            )
            .at(r)
            .note("|int over the unit sphere of log u_k|"),
        );
    }
    Ok(rows)
}

fn gbc(cx: &Context) -> Result<Vec<Row>> {
    let s = cx.scenario;
    let topo = s.topology.as_ref().expect("validated topology");
    let a = &s.annulus;
    let ledger = gbc_annulus_check(
        &cx.u,
        &cx.g0,
        a.inner_radius_chart,
        a.outer_radius_chart,
        s.resolution.quadrature(),
    )?;
    let target = topological_target(topo.chi, topo.m);
    Ok(vec![
        Row::new("pf-integral", ledger.pf_integral, target, Comparison::Equal, Scale::Absolute, s.gbc.tolerance)
            .note(format!("4 pi^2 chi - 8 pi^2 m with chi = {}, m = {}", topo.chi, topo.m)),
        Row::new("identity-defect", ledger.defect, 0.0, Comparison::Equal, Scale::Absolute, s.gbc.identity_tolerance)
            .note(format!(
                "int Pf(g) - int Pf(g0) - boundary terms; boundary sum {:.12e}",
                ledger.boundary_sum
            )),
    ])
}

fn riem_l2(cx: &Context) -> Result<Vec<Row>> {
    let s = cx.scenario;
    let c = &s.riem_l2;
    let p = riem_l2_profile(&cx.u, &cx.g0, c.outer_radius_chart, c.levels, s.resolution.quadrature())?;
    Ok((c.cauchy_level..c.levels)
        .map(|k| {
            Row::new("riem-l2-tail", p.tail_after(k - 1), 0.0, Comparison::AtMost, Scale::Absolute, c.tolerance)
                .at(p.outer_radii[k])
                .note("int |Riem|^2 dV inside this radius, over the computed levels")
        })
        .collect())
}

fn w_profile_rows(cx: &Context) -> Result<Vec<Row>> {
    let c = &cx.scenario.w_profile;
    let p = w_profile(&cx.u, &c.radii_chart, c.sphere_degree)?;
    // sup w should stop growing over the innermost half of the radii
    let start = p.radii.len() / 2;
    Ok((start.max(1)..p.radii.len())
        .map(|k| {
            Row::new("sup-w-growth", p.sup[k] / p.sup[k - 1], 1.0, Comparison::AtMost, Scale::Relative, c.growth_tolerance)
                .at(p.radii[k])
                .note(format!("sup w = {:.12e}, mean w = {:.12e}", p.sup[k], p.mean[k]))
        })
        .collect())
}
