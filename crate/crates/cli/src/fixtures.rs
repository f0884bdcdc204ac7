//! Built-in scenarios with known answers.

pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture {
        name: "round-s4-gbc",
        description: "round S^4 in a stereographic chart: int Pf = 8 pi^2 (chi = 2, no ends)",
        toml: r#"name = "round-s4-gbc"
dimension = 4
background = "flat"
factor = "2 / (1 + absx^2)"
suites = ["gbc", "curvature"]

[annulus]
inner_radius_chart = 1e-3
outer_radius_chart = 1e3

[resolution]
radial_count = 161
sphere_degree = 8

[topology]
chi = 2.0
m = 0.0

[gbc]
tolerance = 0.01
identity_tolerance = 1e-6
"#,
    },
    Fixture {
        name: "punctured-flat-ball",
        description: "g = |x|^-4 delta on the punctured ball: one flat end, int Pf = 4 pi^2 * 2 - 8 pi^2 = 0",
        toml: r#"name = "punctured-flat-ball"
dimension = 4
background = "flat"
factor = "absx^(2-n)"
suites = ["gbc", "curvature", "w-profile"]

[annulus]
inner_radius_chart = 0.00390625
outer_radius_chart = 1.0

[resolution]
radial_count = 41
sphere_degree = 8

[topology]
chi = 2.0
m = 1.0
"#,
    },
    Fixture {
        name: "g-inf",
        description: "g_inf = |x|^-4 delta (Euclidean space outside a ball): decay ratios, volume density, blow-down",
        toml: r#"name = "g-inf"
dimension = 4
background = "flat"
factor = "absx^(2-n)"
suites = ["decay", "volume-density", "blow-down"]

[decay]
radii_chart = [0.015625, 0.00390625]
tolerance = 0.02

[volume_density]
rhos = [4.0, 8.0, 16.0, 32.0]
inner_radius_chart = 0.015625
outer_radius_chart = 1.0
tolerance = 0.05
"#,
    },
    Fixture {
        name: "round-sphere-riem",
        description: "the round metric as background with u = 1: finite int |Riem|^2 with vanishing dyadic tails",
        toml: r#"name = "round-sphere-riem"
dimension = 4
background = "round-sphere"
factor = "1"
suites = ["riem-l2", "curvature"]

[resolution]
radial_count = 17
sphere_degree = 6
"#,
    },
    Fixture {
        name: "perturbed-inversion",
        description: "|x|^-2 (1 + x1/10) + 1/2: an asymptotically flat end with a dipole and a constant term",
        toml: r#"name = "perturbed-inversion"
dimension = 4
background = "flat"
factor = "absx^(2-n) * (1 + 0.1*x1) + 0.5"
suites = ["curvature", "three-circle", "blow-down", "w-profile"]
seed = 7

[three_circle]
anchor_radius_chart = 1.0
segment_length = 2.0
segments = 6
"#,
    },
];

pub fn find(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}
