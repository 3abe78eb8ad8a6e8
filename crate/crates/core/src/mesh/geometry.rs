use super::generate::{Domain, Hole, PlaneRule};
use super::{MeshError, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub center: [f64; 2],
    /// Semi-axes along x and y.
    pub semi: [f64; 2],
}

/// Base block with a through-hole along y and two arms rising from its
/// ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub base: [f64; 3],
    pub arm_thickness: f64,
    pub arm_height: f64,
    pub hole_radius: f64,
    /// Spacing every dimension above is a multiple of.
    pub unit: f64,
}

/// Specimen geometries. Lengths are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    /// Quarter of a square plate with a central circular hole; the hole
    /// centre sits at the origin corner of `[0, half_edge]²`.
    QuarterPlate { half_edge: f64, radius: f64 },
    /// Rectangular plate with elliptical holes.
    EllipsePlate { width: f64, height: f64, holes: Vec<EllipseSpec> },
    /// Square plate with circular holes.
    PerforatedSquare { edge: f64, holes: Vec<CircleSpec>, seed: u64 },
    /// One eighth of a cube with a central spherical hole at the origin
    /// corner of `[0, half_edge]³`.
    EighthCube { half_edge: f64, radius: f64 },
    /// `[-w/2, w/2]² × [0, w]` with a straight cylindrical hole along a
    /// tilted axis through the centre.
    ObliqueHoleCube { edge: f64, radius: f64, axis: [f64; 3] },
    Bracket(BracketSpec),
}

impl GeometrySpec {
    pub fn setup_id(&self) -> u8 {
        match self {
            GeometrySpec::QuarterPlate { .. } => 1,
            GeometrySpec::EllipsePlate { .. } => 2,
            GeometrySpec::PerforatedSquare { .. } => 3,
            GeometrySpec::EighthCube { .. } => 4,
            GeometrySpec::ObliqueHoleCube { .. } => 5,
            GeometrySpec::Bracket(_) => 6,
        }
    }

    pub fn dim(&self) -> usize {
        if self.setup_id() <= 3 {
            2
        } else {
            3
        }
    }

    /// Default geometry of a setup; `seed` only affects Setup 3.
    pub fn for_setup(setup_id: u8, seed: u64) -> Result<Self, MeshError> {
        Ok(match setup_id {
            1 => GeometrySpec::QuarterPlate { half_edge: 1.0, radius: 0.1 },
            2 => GeometrySpec::EllipsePlate {
                width: 2.0,
                height: 2.0,
                holes: vec![
                    EllipseSpec { center: [0.6, 1.3], semi: [0.35, 0.18] },
                    EllipseSpec { center: [1.4, 0.7], semi: [0.35, 0.18] },
                ],
            },
            3 => Self::random_perforated(seed)?,
            4 => GeometrySpec::EighthCube { half_edge: 1.0, radius: 0.5 },
            5 => GeometrySpec::ObliqueHoleCube { edge: 1.0, radius: 0.15, axis: [1.0, 0.3, 0.4] },
            6 => GeometrySpec::Bracket(BracketSpec {
                base: [2.0, 1.0, 0.5],
                arm_thickness: 0.3,
                arm_height: 1.0,
                hole_radius: 0.15,
                unit: 0.1,
            }),
            _ => return Err(MeshError::GeometryInfeasible(format!("unknown setup {setup_id}"))),
        })
    }

    /// Unit square with 1 to 3 non-overlapping circular holes of seeded
    /// random size and position.
    pub fn random_perforated(seed: u64) -> Result<Self, MeshError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.random_range(1..=3usize);
        let margin = 0.06;
        let mut holes: Vec<CircleSpec> = Vec::new();
        let mut tries = 0;
        while holes.len() < count {
            tries += 1;
            if tries > 10_000 {
                return Err(MeshError::GeometryInfeasible(format!("could not place {count} holes for seed {seed}")));
            }
            let r = rng.random_range(0.06..0.16);
            let lo = r + margin;
            let c = [rng.random_range(lo..1.0 - lo), rng.random_range(lo..1.0 - lo)];
            let clear = holes.iter().all(|h| {
                let d = ((h.center[0] - c[0]).powi(2) + (h.center[1] - c[1]).powi(2)).sqrt();
                d > h.radius + r + margin
            });
            if clear {
                holes.push(CircleSpec { center: c, radius: r });
            }
        }
        Ok(GeometrySpec::PerforatedSquare { edge: 1.0, holes, seed })
    }

    /// Element size giving node counts close to the reference meshes.
    pub fn reference_h(&self) -> f64 {
        match self.setup_id() {
            1 => 1.0 / 37.0,
            2 => 2.0 / 64.0,
            3 => 1.0 / 74.0,
            4 => 1.0 / 19.0,
            5 => 1.0 / 13.0,
            _ => 0.05,
        }
    }

    /// Coarse element size for quick runs.
    pub fn coarse_h(&self) -> f64 {
        match self.setup_id() {
            1 => 1.0 / 12.0,
            2 => 2.0 / 20.0,
            3 => 1.0 / 20.0,
            4 => 1.0 / 6.0,
            5 => 1.0 / 6.0,
            _ => 0.1,
        }
    }

    /// Signed clearance from the hole surfaces (positive in material).
    pub fn hole_clearance(&self, p: &Point) -> f64 {
        let d = self.domain();
        d.holes.iter().map(|(h, _)| h.phi(p)).fold(f64::INFINITY, f64::min)
    }

    /// Exact area (2D) or volume (3D) of the specimen.
    pub fn analytic_measure(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            GeometrySpec::QuarterPlate { half_edge, radius } => half_edge * half_edge - PI * radius * radius / 4.0,
            GeometrySpec::EllipsePlate { width, height, holes } => {
                width * height - holes.iter().map(|e| PI * e.semi[0] * e.semi[1]).sum::<f64>()
            }
            GeometrySpec::PerforatedSquare { edge, holes, .. } => {
                edge * edge - holes.iter().map(|c| PI * c.radius * c.radius).sum::<f64>()
            }
            GeometrySpec::EighthCube { half_edge, radius } => half_edge.powi(3) - PI * radius.powi(3) / 6.0,
            GeometrySpec::ObliqueHoleCube { edge, radius, axis } => {
                // The hole crosses the two x faces; its cross-section by planes
                // x = const is an ellipse of area π r² / cos(angle to x).
                let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                let cos = axis[0].abs() / n;
                edge.powi(3) - PI * radius * radius / cos * edge
            }
            GeometrySpec::Bracket(b) => {
                let base = b.base[0] * b.base[1] * b.base[2];
                let arms = 2.0 * b.arm_thickness * b.base[1] * b.arm_height;
                base + arms - PI * b.hole_radius * b.hole_radius * b.base[1]
            }
        }
    }

    pub(crate) fn domain(&self) -> Domain {
        let rule = |axis: usize, value: f64, sign: f64, tag: &str| PlaneRule { axis, value, sign, tag: tag.into(), region: None };
        match self {
            GeometrySpec::QuarterPlate { half_edge: e, radius } => Domain {
                dim: 2,
                boxes: vec![([0.0; 3], [*e, *e, 0.0])],
                grid_unit: [*e, *e, 1.0],
                holes: vec![(Hole::Ball { center: [0.0; 3], radius: *radius }, "hole".into())],
                plane_rules: vec![rule(0, 0.0, -1.0, "left"), rule(0, *e, 1.0, "right"), rule(1, 0.0, -1.0, "down"), rule(1, *e, 1.0, "up")],
                default_tag: "free".into(),
            },
            GeometrySpec::EllipsePlate { width, height, holes } => Domain {
                dim: 2,
                boxes: vec![([0.0; 3], [*width, *height, 0.0])],
                grid_unit: [*width, *height, 1.0],
                holes: holes.iter().map(|e| (Hole::Ellipse { center: e.center, semi: e.semi }, "hole".into())).collect(),
                plane_rules: vec![
                    rule(0, 0.0, -1.0, "left"),
                    rule(0, *width, 1.0, "right"),
                    rule(1, 0.0, -1.0, "down"),
                    rule(1, *height, 1.0, "up"),
                ],
                default_tag: "free".into(),
            },
            GeometrySpec::PerforatedSquare { edge, holes, .. } => Domain {
                dim: 2,
                boxes: vec![([0.0; 3], [*edge, *edge, 0.0])],
                grid_unit: [*edge, *edge, 1.0],
                holes: holes
                    .iter()
                    .map(|c| (Hole::Ball { center: [c.center[0], c.center[1], 0.0], radius: c.radius }, "hole".into()))
                    .collect(),
                plane_rules: vec![rule(0, 0.0, -1.0, "left"), rule(0, *edge, 1.0, "right"), rule(1, 0.0, -1.0, "down"), rule(1, *edge, 1.0, "up")],
                default_tag: "free".into(),
            },
            GeometrySpec::EighthCube { half_edge: e, radius } => Domain {
                dim: 3,
                boxes: vec![([0.0; 3], [*e; 3])],
                grid_unit: [*e; 3],
                holes: vec![(Hole::Ball { center: [0.0; 3], radius: *radius }, "hole".into())],
                plane_rules: vec![
                    rule(0, 0.0, -1.0, "left"),
                    rule(0, *e, 1.0, "right"),
                    rule(1, 0.0, -1.0, "front"),
                    rule(1, *e, 1.0, "back"),
                    rule(2, 0.0, -1.0, "down"),
                    rule(2, *e, 1.0, "up"),
                ],
                default_tag: "free".into(),
            },
            GeometrySpec::ObliqueHoleCube { edge: w, radius, axis } => {
                let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
                let dir = [axis[0] / n, axis[1] / n, axis[2] / n];
                Domain {
                    dim: 3,
                    boxes: vec![([-w / 2.0, -w / 2.0, 0.0], [w / 2.0, w / 2.0, *w])],
                    grid_unit: [*w; 3],
                    holes: vec![(Hole::Cylinder { point: [0.0, 0.0, w / 2.0], dir, radius: *radius }, "hole".into())],
                    plane_rules: vec![
                        rule(0, -w / 2.0, -1.0, "left"),
                        rule(0, w / 2.0, 1.0, "right"),
                        rule(1, -w / 2.0, -1.0, "front"),
                        rule(1, w / 2.0, 1.0, "back"),
                        rule(2, 0.0, -1.0, "down"),
                        rule(2, *w, 1.0, "up"),
                    ],
                    default_tag: "free".into(),
                }
            }
            GeometrySpec::Bracket(b) => {
                let [bx, by, bz] = b.base;
                let t = b.arm_thickness;
                let top = bz + b.arm_height;
                let arm_region = |x0: f64, x1: f64| Some(([x0, 0.0, bz], [x1, by, top]));
                Domain {
                    dim: 3,
                    boxes: vec![
                        ([0.0, 0.0, 0.0], [bx, by, bz]),
                        ([0.0, 0.0, bz], [t, by, top]),
                        ([bx - t, 0.0, bz], [bx, by, top]),
                    ],
                    grid_unit: [b.unit; 3],
                    holes: vec![(
                        Hole::Cylinder { point: [bx / 2.0, 0.0, bz / 2.0], dir: [0.0, 1.0, 0.0], radius: b.hole_radius },
                        "hole".into(),
                    )],
                    plane_rules: vec![
                        rule(2, 0.0, -1.0, "down"),
                        rule(1, 0.0, -1.0, "front"),
                        PlaneRule { axis: 0, value: t, sign: 1.0, tag: "back".into(), region: arm_region(0.0, t) },
                        PlaneRule { axis: 0, value: bx - t, sign: -1.0, tag: "back".into(), region: arm_region(bx - t, bx) },
                        rule(2, top, 1.0, "up"),
                    ],
                    default_tag: "free".into(),
                }
            }
        }
    }
}
