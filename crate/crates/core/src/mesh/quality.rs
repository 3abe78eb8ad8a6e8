use super::{exposed_faces, local_faces, Mesh, Point};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub n_nodes: usize,
    pub n_cells: usize,
    pub min_volume: f64,
    pub max_volume: f64,
    /// Smallest interior angle (2D) or dihedral angle (3D), in degrees.
    pub min_angle_deg: f64,
    pub inverted_cells: Vec<usize>,
    /// Cells whose smallest angle is below 2 degrees.
    pub sliver_cells: Vec<usize>,
    /// Tagged facets coincide exactly with the exposed cell faces.
    pub boundary_closed: bool,
}

impl QualityReport {
    pub fn is_valid(&self) -> bool {
        self.inverted_cells.is_empty() && self.boundary_closed
    }
}

fn angle(u: &Point, v: &Point) -> f64 {
    let d = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (d / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn min_cell_angle(dim: usize, x: &[Point]) -> f64 {
    let mut best = 180.0f64;
    if dim == 2 {
        for k in 0..3 {
            let a = &x[k];
            best = best.min(angle(&sub(&x[(k + 1) % 3], a), &sub(&x[(k + 2) % 3], a)));
        }
    } else {
        // Dihedral angle along edge (i, j) between faces through the other
        // two vertices.
        for i in 0..4 {
            for j in i + 1..4 {
                let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
                let e = sub(&x[j], &x[i]);
                let n1 = cross(&e, &sub(&x[others[0]], &x[i]));
                let n2 = cross(&e, &sub(&x[others[1]], &x[i]));
                best = best.min(angle(&n1, &n2));
            }
        }
    }
    best
}

pub fn mesh_quality(mesh: &Mesh) -> QualityReport {
    let dim = mesh.dim();
    let mut min_volume = f64::INFINITY;
    let mut max_volume = f64::NEG_INFINITY;
    let mut min_angle = 180.0f64;
    let mut inverted = Vec::new();
    let mut slivers = Vec::new();
    for c in 0..mesh.n_cells() {
        let x = mesh.cell_coords(c);
        let v = mesh.cell_volume(c);
        min_volume = min_volume.min(v);
        max_volume = max_volume.max(v);
        if !(v > 0.0) {
            inverted.push(c);
            continue;
        }
        let a = min_cell_angle(dim, &x);
        min_angle = min_angle.min(a);
        if a < 2.0 {
            slivers.push(c);
        }
    }
    let cells: Vec<Vec<usize>> = (0..mesh.n_cells()).map(|c| mesh.cell(c).to_vec()).collect();
    let mut exposed: Vec<Vec<usize>> = exposed_faces(dim, &cells)
        .into_iter()
        .map(|(c, k)| {
            let mut f: Vec<usize> = local_faces(dim)[k].iter().map(|&l| cells[c][l]).collect();
            f.sort_unstable();
            f
        })
        .collect();
    let mut tagged: Vec<Vec<usize>> = (0..mesh.n_facets())
        .map(|f| {
            let mut v = mesh.facet(f).to_vec();
            v.sort_unstable();
            v
        })
        .collect();
    exposed.sort();
    tagged.sort();
    QualityReport {
        n_nodes: mesh.n_nodes(),
        n_cells: mesh.n_cells(),
        min_volume,
        max_volume,
        min_angle_deg: min_angle,
        inverted_cells: inverted,
        sliver_cells: slivers,
        boundary_closed: exposed == tagged,
    }
}
