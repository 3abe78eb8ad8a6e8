//! Simplicial meshes (triangles for plane strain, tetrahedra in 3D), the
//! specimen generators and the line-oriented mesh file format.

mod generate;
mod geometry;
mod io;
mod quality;

pub use geometry::{BracketSpec, CircleSpec, EllipseSpec, GeometrySpec};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use quality::{mesh_quality, QualityReport};

use sha2::{Digest, Sha256};
use std::collections::HashMap;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("malformed mesh file, line {line}: {message}")]
    MalformedMeshFile { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Point = [f64; 3];

/// Conforming simplicial mesh with tagged boundary facets. Nodes always
/// carry three coordinates; in 2D the third is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_tags: Vec<usize>,
    tag_names: Vec<String>,
    facet_cells: Vec<usize>,
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed measure of a simplex given by its vertex coordinates.
pub fn simplex_volume(dim: usize, x: &[Point]) -> f64 {
    if dim == 2 {
        let a = sub(&x[1], &x[0]);
        let b = sub(&x[2], &x[0]);
        0.5 * (a[0] * b[1] - a[1] * b[0])
    } else {
        let a = sub(&x[1], &x[0]);
        let b = sub(&x[2], &x[0]);
        let c = sub(&x[3], &x[0]);
        dot(&a, &cross(&b, &c)) / 6.0
    }
}

/// The `dim + 1` faces of a simplex, each listed without the vertex it
/// omits (face `k` omits local vertex `k`).
pub(crate) fn local_faces(dim: usize) -> &'static [&'static [usize]] {
    if dim == 2 {
        &[&[1, 2], &[0, 2], &[0, 1]]
    } else {
        &[&[1, 2, 3], &[0, 2, 3], &[0, 1, 3], &[0, 1, 2]]
    }
}

fn face_key(nodes: &[usize]) -> Vec<usize> {
    let mut k = nodes.to_vec();
    k.sort_unstable();
    k
}

impl Mesh {
    /// Builds and validates a mesh. `facets` pairs node lists with tag names.
    pub fn new(dim: usize, nodes: Vec<Point>, cells: Vec<Vec<usize>>, facets: Vec<(Vec<usize>, String)>) -> Result<Self, MeshError> {
        let mesh = Self::new_unchecked(dim, nodes, cells, facets)?;
        for c in 0..mesh.n_cells() {
            let v = mesh.cell_volume(c);
            if !(v > 0.0) {
                return Err(MeshError::InvalidMesh(format!("cell {c} has non-positive volume {v}")));
            }
        }
        Ok(mesh)
    }

    /// Like [`Mesh::new`] but accepts inverted or degenerate cells, so that
    /// external meshes can be inspected with [`mesh_quality`].
    pub fn new_unchecked(dim: usize, nodes: Vec<Point>, cells: Vec<Vec<usize>>, facets: Vec<(Vec<usize>, String)>) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let n = nodes.len();
        let mut flat_cells = Vec::with_capacity(cells.len() * (dim + 1));
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(MeshError::InvalidMesh(format!("cell {c} has {} nodes", cell.len())));
            }
            if let Some(&i) = cell.iter().find(|&&i| i >= n) {
                return Err(MeshError::InvalidMesh(format!("cell {c} references node {i} (only {n} nodes)")));
            }
            flat_cells.extend_from_slice(cell);
        }
        let mut tag_names: Vec<String> = Vec::new();
        let mut flat_facets = Vec::with_capacity(facets.len() * dim);
        let mut facet_tags = Vec::with_capacity(facets.len());
        for (f, (fnodes, tag)) in facets.iter().enumerate() {
            if fnodes.len() != dim {
                return Err(MeshError::InvalidMesh(format!("facet {f} has {} nodes", fnodes.len())));
            }
            if let Some(&i) = fnodes.iter().find(|&&i| i >= n) {
                return Err(MeshError::InvalidMesh(format!("facet {f} references node {i} (only {n} nodes)")));
            }
            let t = match tag_names.iter().position(|t| t == tag) {
                Some(t) => t,
                None => {
                    tag_names.push(tag.clone());
                    tag_names.len() - 1
                }
            };
            flat_facets.extend_from_slice(fnodes);
            facet_tags.push(t);
        }
        let mut mesh = Mesh { dim, nodes, cells: flat_cells, facets: flat_facets, facet_tags, tag_names, facet_cells: Vec::new() };
        mesh.facet_cells = mesh.locate_facet_cells()?;
        Ok(mesh)
    }

    /// Builds a mesh whose boundary facets are all exposed cell faces,
    /// tagged by `tagger(facet nodes, outward unit normal, centroid)`.
    pub fn with_exposed_boundary<T>(dim: usize, nodes: Vec<Point>, cells: Vec<Vec<usize>>, mut tagger: T) -> Result<Self, MeshError>
    where
        T: FnMut(&[usize], &Point, &Point) -> String,
    {
        let exposed = exposed_faces(dim, &cells);
        let mut facets = Vec::with_capacity(exposed.len());
        for (c, k) in exposed {
            let cell = &cells[c];
            let fnodes: Vec<usize> = local_faces(dim)[k].iter().map(|&l| cell[l]).collect();
            let xs: Vec<Point> = fnodes.iter().map(|&i| nodes[i]).collect();
            let opposite = nodes[cell[k]];
            let (normal, _) = facet_geometry(dim, &xs, &opposite);
            let centroid = centroid(&xs);
            let tag = tagger(&fnodes, &normal, &centroid);
            facets.push((fnodes, tag));
        }
        Self::new(dim, nodes, cells, facets)
    }

    fn locate_facet_cells(&self) -> Result<Vec<usize>, MeshError> {
        let mut owners: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for face in local_faces(self.dim) {
                let nodes: Vec<usize> = face.iter().map(|&l| cell[l]).collect();
                owners.entry(face_key(&nodes)).or_default().push(c);
            }
        }
        let mut out = Vec::with_capacity(self.n_facets());
        for f in 0..self.n_facets() {
            match owners.get(&face_key(self.facet(f))).map(|v| v.as_slice()) {
                Some([c]) => out.push(*c),
                Some(v) => {
                    return Err(MeshError::InvalidMesh(format!("boundary facet {f} is shared by {} cells", v.len())));
                }
                None => return Err(MeshError::InvalidMesh(format!("boundary facet {f} is not a face of any cell"))),
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn n_facets(&self) -> usize {
        self.facet_tags.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        let s = self.dim;
        &self.facets[f * s..(f + 1) * s]
    }

    pub fn facet_tag_id(&self, f: usize) -> usize {
        self.facet_tags[f]
    }

    pub fn facet_tag(&self, f: usize) -> &str {
        &self.tag_names[self.facet_tags[f]]
    }

    /// Cell owning boundary facet `f`.
    pub fn facet_cell(&self, f: usize) -> usize {
        self.facet_cells[f]
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.tag_names.iter().position(|t| t == name)
    }

    pub fn has_tag(&self, name: &str) -> bool {
        self.tag_id(name).is_some()
    }

    pub fn facets_with_tag(&self, name: &str) -> Vec<usize> {
        match self.tag_id(name) {
            Some(t) => (0..self.n_facets()).filter(|&f| self.facet_tags[f] == t).collect(),
            None => Vec::new(),
        }
    }

    /// Sorted, deduplicated nodes on facets carrying `name`.
    pub fn nodes_with_tag(&self, name: &str) -> Vec<usize> {
        let mut v: Vec<usize> = self.facets_with_tag(name).into_iter().flat_map(|f| self.facet(f).to_vec()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut v = self.facets.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn cell_coords(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&i| self.nodes[i]).collect()
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        simplex_volume(self.dim, &self.cell_coords(c))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    /// Outward unit normal (reference configuration) and measure of a
    /// boundary facet.
    pub fn facet_normal_and_measure(&self, f: usize) -> (Point, f64) {
        let xs: Vec<Point> = self.facet(f).iter().map(|&i| self.nodes[i]).collect();
        let cell = self.cell(self.facet_cells[f]);
        let opposite = cell.iter().find(|i| !self.facet(f).contains(i)).copied().unwrap();
        facet_geometry(self.dim, &xs, &self.nodes[opposite])
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Characteristic element size: mean edge length.
    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for c in 0..self.n_cells() {
            let x = self.cell_coords(c);
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    let d = sub(&x[i], &x[j]);
                    sum += dot(&d, &d).sqrt();
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// SHA-256 of the canonical file serialization, hex encoded.
    pub fn checksum(&self) -> String {
        let text = write_mesh(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Outward unit normal and measure of a facet, oriented away from the
/// opposite vertex.
pub(crate) fn facet_geometry(dim: usize, xs: &[Point], opposite: &Point) -> (Point, f64) {
    let mut n;
    let measure;
    if dim == 2 {
        let t = sub(&xs[1], &xs[0]);
        measure = (t[0] * t[0] + t[1] * t[1]).sqrt();
        n = [t[1] / measure, -t[0] / measure, 0.0];
    } else {
        let c = cross(&sub(&xs[1], &xs[0]), &sub(&xs[2], &xs[0]));
        let norm = dot(&c, &c).sqrt();
        measure = 0.5 * norm;
        n = [c[0] / norm, c[1] / norm, c[2] / norm];
    }
    if dot(&n, &sub(opposite, &xs[0])) > 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    (n, measure)
}

pub(crate) fn centroid(xs: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for x in xs {
        for a in 0..3 {
            c[a] += x[a];
        }
    }
    let k = xs.len() as f64;
    [c[0] / k, c[1] / k, c[2] / k]
}

/// Faces appearing in exactly one cell, as (cell, local face) pairs in cell
/// order.
pub(crate) fn exposed_faces(dim: usize, cells: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
    for cell in cells {
        for face in local_faces(dim) {
            let nodes: Vec<usize> = face.iter().map(|&l| cell[l]).collect();
            *count.entry(face_key(&nodes)).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (k, face) in local_faces(dim).iter().enumerate() {
            let nodes: Vec<usize> = face.iter().map(|&l| cell[l]).collect();
            if count[&face_key(&nodes)] == 1 {
                out.push((c, k));
            }
        }
    }
    out
}

/// Structured mesh of an axis-aligned box: alternating diagonals in 2D,
/// six-tetrahedron (Kuhn) cubes in 3D. Faces are tagged left/right (x),
/// down/up (y in 2D, z in 3D) and front/back (y in 3D).
pub fn structured_box(dim: usize, lo: Point, hi: Point, divisions: [usize; 3]) -> Result<Mesh, MeshError> {
    generate::structured_box(dim, lo, hi, divisions)
}

/// Generates the specimen mesh for a geometry at target element size `h`.
pub fn generate_mesh(spec: &GeometrySpec, h: f64) -> Result<Mesh, MeshError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(MeshError::GeometryInfeasible(format!("element size {h} must be positive")));
    }
    generate::mesh_domain(&spec.domain(), h)
}
