use super::{centroid, exposed_faces, local_faces, simplex_volume, Mesh, MeshError, Point};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Hole {
    Ball { center: Point, radius: f64 },
    /// Axis-aligned ellipse in the xy plane.
    Ellipse { center: [f64; 2], semi: [f64; 2] },
    /// Infinite circular cylinder; `dir` is a unit vector.
    Cylinder { point: Point, dir: Point, radius: f64 },
}

impl Hole {
    /// Signed distance to the hole surface, positive in the material.
    pub fn phi(&self, p: &Point) -> f64 {
        match self {
            Hole::Ball { center, radius } => dist(p, center) - radius,
            Hole::Ellipse { center, semi } => {
                let q = self.project(p);
                let d = dist(p, &q);
                let x = (p[0] - center[0]) / semi[0];
                let y = (p[1] - center[1]) / semi[1];
                if x * x + y * y < 1.0 {
                    -d
                } else {
                    d
                }
            }
            Hole::Cylinder { point, dir, radius } => {
                let r = radial(p, point, dir);
                norm(&r) - radius
            }
        }
    }

    /// Closest point on the hole surface.
    pub fn project(&self, p: &Point) -> Point {
        match self {
            Hole::Ball { center, radius } => {
                let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
                let n = norm(&d);
                if n == 0.0 {
                    return [center[0] + radius, center[1], center[2]];
                }
                [center[0] + d[0] * radius / n, center[1] + d[1] * radius / n, center[2] + d[2] * radius / n]
            }
            Hole::Ellipse { center, semi } => {
                let (x, y) = ellipse_closest(p[0] - center[0], p[1] - center[1], semi[0], semi[1]);
                [center[0] + x, center[1] + y, p[2]]
            }
            Hole::Cylinder { point, dir, radius } => {
                let r = radial(p, point, dir);
                let n = norm(&r);
                if n == 0.0 {
                    return *p;
                }
                [p[0] - r[0] + r[0] * radius / n, p[1] - r[1] + r[1] * radius / n, p[2] - r[2] + r[2] * radius / n]
            }
        }
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn radial(p: &Point, point: &Point, dir: &Point) -> Point {
    let d = [p[0] - point[0], p[1] - point[1], p[2] - point[2]];
    let t = d[0] * dir[0] + d[1] * dir[1] + d[2] * dir[2];
    [d[0] - t * dir[0], d[1] - t * dir[1], d[2] - t * dir[2]]
}

/// Closest point on the ellipse `(x/a)² + (y/b)² = 1` to `(px, py)` by
/// bisection on the Lagrange multiplier.
fn ellipse_closest(px: f64, py: f64, a: f64, b: f64) -> (f64, f64) {
    let scale = a.max(b);
    let tiny = 1e-13 * scale;
    let sx = if px < 0.0 { -1.0 } else { 1.0 };
    let sy = if py < 0.0 { -1.0 } else { 1.0 };
    let x = px.abs().max(tiny);
    let y = py.abs().max(tiny);
    let f = |t: f64| (a * x / (t + a * a)).powi(2) + (b * y / (t + b * b)).powi(2) - 1.0;
    let m = a.min(b);
    let mut lo = -m * m;
    let mut hi = scale * (x * x + y * y).sqrt() + scale * scale;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let qx = a * a * x / (t + a * a);
    let qy = b * b * y / (t + b * b);
    // Renormalise onto the curve.
    let s = ((qx / a).powi(2) + (qy / b).powi(2)).sqrt();
    (sx * qx / s, sy * qy / s)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PlaneRule {
    pub axis: usize,
    pub value: f64,
    pub sign: f64,
    pub tag: String,
    pub region: Option<(Point, Point)>,
}

/// Union of axis-aligned boxes minus implicit holes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Domain {
    pub dim: usize,
    pub boxes: Vec<(Point, Point)>,
    /// Every box bound is an integer multiple of this spacing (per axis),
    /// measured from the lower corner of the bounding box.
    pub grid_unit: Point,
    pub holes: Vec<(Hole, String)>,
    pub plane_rules: Vec<PlaneRule>,
    pub default_tag: String,
}

impl Domain {
    fn phi(&self, p: &Point) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, (h, _)) in self.holes.iter().enumerate() {
            let v = h.phi(p);
            if v < best.0 {
                best = (v, k);
            }
        }
        best
    }

    fn in_boxes(&self, p: &Point) -> bool {
        self.boxes.iter().any(|(lo, hi)| (0..self.dim).all(|a| p[a] > lo[a] && p[a] < hi[a]))
    }
}

struct Grid {
    dim: usize,
    lo: Point,
    spacing: Point,
    counts: [usize; 3],
}

impl Grid {
    fn node_index(&self, i: [usize; 3]) -> usize {
        let n = [self.counts[0] + 1, self.counts[1] + 1, self.counts[2] + 1];
        i[0] + n[0] * (i[1] + n[1] * i[2])
    }

    fn coord(&self, i: [usize; 3]) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.lo[a] + i[a] as f64 * self.spacing[a];
        }
        p
    }

    /// Simplices of grid cube `c` as grid vertex indices.
    fn simplices(&self, c: [usize; 3]) -> Vec<Vec<[usize; 3]>> {
        if self.dim == 2 {
            let v = |dx: usize, dy: usize| [c[0] + dx, c[1] + dy, 0];
            if (c[0] + c[1]).is_multiple_of(2) {
                vec![vec![v(0, 0), v(1, 0), v(1, 1)], vec![v(0, 0), v(1, 1), v(0, 1)]]
            } else {
                vec![vec![v(0, 0), v(1, 0), v(0, 1)], vec![v(1, 0), v(1, 1), v(0, 1)]]
            }
        } else {
            const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            PERMS
                .iter()
                .map(|p| {
                    let mut cur = c;
                    let mut tet = vec![cur];
                    for &a in p {
                        cur[a] += 1;
                        tet.push(cur);
                    }
                    tet
                })
                .collect()
        }
    }
}

/// Structured mesh of a single box with standard face tags.
pub(crate) fn structured_box(dim: usize, lo: Point, hi: Point, divisions: [usize; 3]) -> Result<Mesh, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::InvalidMesh(format!("dimension {dim} not supported")));
    }
    let mut counts = [1; 3];
    let mut spacing = [1.0; 3];
    for a in 0..dim {
        if divisions[a] == 0 || !(hi[a] > lo[a]) {
            return Err(MeshError::GeometryInfeasible("empty box".into()));
        }
        counts[a] = divisions[a];
        spacing[a] = (hi[a] - lo[a]) / divisions[a] as f64;
    }
    if dim == 2 {
        counts[2] = 0;
    }
    let grid = Grid { dim, lo, spacing, counts };
    let mut nodes = Vec::new();
    let mut map = HashMap::new();
    let mut cells = Vec::new();
    for k in 0..counts[2].max(1) {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                for s in grid.simplices([i, j, if dim == 2 { 0 } else { k }]) {
                    let cell: Vec<usize> = s
                        .iter()
                        .map(|v| {
                            *map.entry(grid.node_index(*v)).or_insert_with(|| {
                                nodes.push(grid.coord(*v));
                                nodes.len() - 1
                            })
                        })
                        .collect();
                    cells.push(cell);
                }
            }
        }
    }
    orient(dim, &nodes, &mut cells);
    let names: [(&str, &str); 3] = if dim == 2 { [("left", "right"), ("down", "up"), ("", "")] } else { [("left", "right"), ("front", "back"), ("down", "up")] };
    Mesh::with_exposed_boundary(dim, nodes, cells, |_, n, _| {
        for a in 0..dim {
            if n[a] < -0.5 {
                return names[a].0.to_string();
            }
            if n[a] > 0.5 {
                return names[a].1.to_string();
            }
        }
        "free".to_string()
    })
}

fn orient(dim: usize, nodes: &[Point], cells: &mut [Vec<usize>]) {
    for c in cells.iter_mut() {
        let x: Vec<Point> = c.iter().map(|&i| nodes[i]).collect();
        if simplex_volume(dim, &x) < 0.0 {
            c.swap(0, 1);
        }
    }
}

/// Background-grid mesher: cubes inside the box union are split into
/// simplices, nodes next to a hole are snapped onto its surface and cells
/// inside holes are dropped.
pub(crate) fn mesh_domain(domain: &Domain, h: f64) -> Result<Mesh, MeshError> {
    let dim = domain.dim;
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        lo[a] = domain.boxes.iter().map(|b| b.0[a]).fold(f64::INFINITY, f64::min);
        hi[a] = domain.boxes.iter().map(|b| b.1[a]).fold(f64::NEG_INFINITY, f64::max);
    }
    let mut counts = [0usize; 3];
    let mut spacing = [1.0; 3];
    for a in 0..dim {
        let unit = domain.grid_unit[a];
        let per_unit = (unit / h - 1e-9).ceil().max(1.0);
        spacing[a] = unit / per_unit;
        counts[a] = ((hi[a] - lo[a]) / spacing[a]).round() as usize;
        if counts[a] == 0 {
            return Err(MeshError::GeometryInfeasible("degenerate bounding box".into()));
        }
        if counts[a] > 4000 {
            return Err(MeshError::GeometryInfeasible(format!("element size {h} too small")));
        }
    }
    let grid = Grid { dim, lo, spacing, counts };

    // Background cells inside the box union.
    let mut nodes: Vec<Point> = Vec::new();
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let kmax = if dim == 2 { 1 } else { counts[2] };
    for k in 0..kmax {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let c = [i, j, k];
                let mut center = grid.coord(c);
                for a in 0..dim {
                    center[a] += 0.5 * spacing[a];
                }
                if !domain.in_boxes(&center) {
                    continue;
                }
                for s in grid.simplices(c) {
                    let cell = s
                        .iter()
                        .map(|v| {
                            *map.entry(grid.node_index(*v)).or_insert_with(|| {
                                nodes.push(grid.coord(*v));
                                nodes.len() - 1
                            })
                        })
                        .collect();
                    cells.push(cell);
                }
            }
        }
    }
    orient(dim, &nodes, &mut cells);
    if domain.holes.is_empty() {
        return finish(domain, h, nodes, cells);
    }

    // Outer planes each node lies on (these constrain snapping).
    let mut planes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    for (c, k) in exposed_faces(dim, &cells) {
        let face: Vec<usize> = local_faces(dim)[k].iter().map(|&l| cells[c][l]).collect();
        for a in 0..dim {
            let v = nodes[face[0]][a];
            if face.iter().all(|&i| nodes[i][a] == v) {
                for &i in &face {
                    if !planes[i].contains(&(a, v)) {
                        planes[i].push((a, v));
                    }
                }
            }
        }
    }

    let original = nodes.clone();
    let mut phi: Vec<(f64, usize)> = nodes.iter().map(|p| domain.phi(p)).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for cell in &cells {
        for a in 0..cell.len() {
            for b in a + 1..cell.len() {
                let (i, j) = (cell[a].min(cell[b]), cell[a].max(cell[b]));
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let mut snap = vec![false; nodes.len()];
    for &(i, j) in &edges {
        if (phi[i].0 > 0.0) != (phi[j].0 > 0.0) {
            let k = if phi[i].0.abs() <= phi[j].0.abs() { i } else { j };
            if planes[k].len() < dim {
                snap[k] = true;
            }
        }
    }
    let zero_tol = 1e-12 * h;
    for i in 0..nodes.len() {
        if snap[i] {
            let hole = &domain.holes[phi[i].1].0;
            let mut p = nodes[i];
            for _ in 0..100 {
                p = hole.project(&p);
                for &(a, v) in &planes[i] {
                    p[a] = v;
                }
                if hole.phi(&p).abs() < zero_tol {
                    break;
                }
            }
            nodes[i] = p;
            phi[i] = (0.0, phi[i].1);
        }
    }

    // Keep cells in the material; revert snaps that spoil a kept cell.
    let min_vol = 1e-6 * h.powi(dim as i32);
    let mut kept: Vec<Vec<usize>>;
    let mut attempts = 0;
    loop {
        attempts += 1;
        kept = Vec::new();
        let mut revert = Vec::new();
        for cell in &cells {
            let x: Vec<Point> = cell.iter().map(|&i| nodes[i]).collect();
            let vals: Vec<f64> = cell.iter().map(|&i| phi[i].0).collect();
            let pos = vals.iter().any(|&v| v > zero_tol);
            let neg = vals.iter().any(|&v| v < -zero_tol);
            let keep = if pos && !neg {
                true
            } else if neg && !pos {
                false
            } else {
                domain.phi(&centroid(&x)).0 > 0.0
            };
            if !keep {
                continue;
            }
            if simplex_volume(dim, &x) <= min_vol {
                revert.extend(cell.iter().copied().filter(|&i| nodes[i] != original[i]));
            }
            kept.push(cell.clone());
        }
        if revert.is_empty() {
            break;
        }
        if attempts > 20 {
            return Err(MeshError::GeometryInfeasible("could not repair inverted cells near a hole".into()));
        }
        for i in revert {
            nodes[i] = original[i];
            phi[i] = domain.phi(&nodes[i]);
        }
    }
    finish(domain, h, nodes, kept)
}

/// Drops unused nodes, merges coincident ones, removes degenerate cells and
/// tags the boundary.
fn finish(domain: &Domain, h: f64, nodes: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Mesh, MeshError> {
    let dim = domain.dim;
    let tol = 1e-9 * h;
    let key = |p: &Point| [(p[0] / tol).round() as i64, (p[1] / tol).round() as i64, (p[2] / tol).round() as i64];
    let mut used = vec![false; nodes.len()];
    for c in &cells {
        for &i in c {
            used[i] = true;
        }
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut seen: HashMap<[i64; 3], usize> = HashMap::new();
    let mut out_nodes = Vec::new();
    for (i, p) in nodes.iter().enumerate() {
        if !used[i] {
            continue;
        }
        let k = key(p);
        let id = *seen.entry(k).or_insert_with(|| {
            out_nodes.push(*p);
            out_nodes.len() - 1
        });
        remap[i] = id;
    }
    let min_vol = 1e-6 * h.powi(dim as i32);
    let mut out_cells: Vec<Vec<usize>> = Vec::new();
    for c in cells {
        let m: Vec<usize> = c.iter().map(|&i| remap[i]).collect();
        let mut s = m.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != m.len() {
            continue;
        }
        let x: Vec<Point> = m.iter().map(|&i| out_nodes[i]).collect();
        if simplex_volume(dim, &x) <= min_vol {
            continue;
        }
        out_cells.push(m);
    }
    // Compact again in case a dropped cell orphaned a node.
    let mut used = vec![usize::MAX; out_nodes.len()];
    let mut nodes2 = Vec::new();
    for c in out_cells.iter_mut() {
        for i in c.iter_mut() {
            if used[*i] == usize::MAX {
                used[*i] = nodes2.len();
                nodes2.push(out_nodes[*i]);
            }
            *i = used[*i];
        }
    }
    if out_cells.is_empty() {
        return Err(MeshError::GeometryInfeasible("no cells left after carving holes".into()));
    }
    let plane_tol = 1e-9 * h;
    let holes = &domain.holes;
    let node_ref = nodes2.clone();
    Mesh::with_exposed_boundary(dim, nodes2, out_cells, |fnodes, n, c| {
        for r in &domain.plane_rules {
            if (n[r.axis] - r.sign).abs() > 1e-6 {
                continue;
            }
            if !fnodes.iter().all(|&i| (node_ref[i][r.axis] - r.value).abs() <= plane_tol) {
                continue;
            }
            if let Some((lo, hi)) = &r.region {
                if !(0..dim).all(|a| c[a] >= lo[a] - plane_tol && c[a] <= hi[a] + plane_tol) {
                    continue;
                }
            }
            return r.tag.clone();
        }
        let mut best = (f64::INFINITY, None);
        for (hole, tag) in holes {
            let d = hole.phi(c).abs();
            if d < best.0 {
                best = (d, Some(tag));
            }
        }
        match best {
            (d, Some(tag)) if d < 1.5 * h => tag.clone(),
            _ => domain.default_tag.clone(),
        }
    })
}
