use super::space::FeSpace;
use super::FemError;
use crate::mesh::Point;

/// A point expressed as barycentric weights on one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLocation {
    pub cell: usize,
    pub weights: [f64; 4],
}

const SLACK: f64 = 1e-10;

/// Uniform bucket grid over cell bounding boxes.
pub struct PointLocator<'a> {
    space: &'a FeSpace,
    lo: Point,
    cell_size: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(space: &'a FeSpace) -> Self {
        let mesh = space.mesh();
        let dim = space.dim();
        let (lo, hi) = mesh.bounding_box();
        let cell_size = (2.0 * space.h()).max(1e-12);
        let mut dims = [1usize; 3];
        for a in 0..dim {
            dims[a] = (((hi[a] - lo[a]) / cell_size).ceil() as usize).max(1);
        }
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let mut loc = Self { space, lo, cell_size, dims, buckets: Vec::new() };
        for c in 0..mesh.n_cells() {
            let x = mesh.cell_coords(c);
            let mut blo = [0usize; 3];
            let mut bhi = [0usize; 3];
            for a in 0..dim {
                let mn = x.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
                let mx = x.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
                blo[a] = loc.bin(a, mn);
                bhi[a] = loc.bin(a, mx);
            }
            for i in blo[0]..=bhi[0] {
                for j in blo[1]..=bhi[1] {
                    for k in blo[2]..=bhi[2] {
                        buckets[(k * dims[1] + j) * dims[0] + i].push(c);
                    }
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    fn bin(&self, a: usize, x: f64) -> usize {
        let b = ((x - self.lo[a]) / self.cell_size).floor();
        (b.max(0.0) as usize).min(self.dims[a] - 1)
    }

    fn weights(&self, c: usize, p: &Point) -> [f64; 4] {
        let mesh = self.space.mesh();
        let g = self.space.grads(c);
        let x0 = mesh.node(mesh.cell(c)[0]);
        let dim = self.space.dim();
        let mut w = [0.0; 4];
        for a in 1..=dim {
            w[a] = (0..dim).map(|k| g[a][k] * (p[k] - x0[k])).sum();
        }
        w[0] = 1.0 - w[1..=dim].iter().sum::<f64>();
        w
    }

    pub fn locate(&self, p: &Point) -> Option<PointLocation> {
        let dim = self.space.dim();
        let mut idx = [0usize; 3];
        for a in 0..dim {
            idx[a] = self.bin(a, p[a]);
        }
        let mut best: Option<(f64, PointLocation)> = None;
        for &c in &self.buckets[(idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]] {
            let w = self.weights(c, p);
            let m = w[..=dim].iter().copied().fold(f64::INFINITY, f64::min);
            if m >= -SLACK && best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                best = Some((m, PointLocation { cell: c, weights: w }));
            }
        }
        best.map(|(_, l)| l)
    }
}

pub fn locate_points(space: &FeSpace, points: &[Point]) -> Result<Vec<PointLocation>, FemError> {
    let loc = PointLocator::new(space);
    points.iter().enumerate().map(|(i, p)| loc.locate(p).ok_or(FemError::PointOutsideMesh(i))).collect()
}

/// P1 interpolation of a full nodal vector field.
pub fn interpolate_at(space: &FeSpace, full: &[f64], locations: &[PointLocation]) -> Vec<[f64; 3]> {
    let dim = space.dim();
    let mesh = space.mesh();
    locations
        .iter()
        .map(|l| {
            let mut v = [0.0; 3];
            for (a, &node) in mesh.cell(l.cell).iter().enumerate() {
                for k in 0..dim {
                    v[k] += l.weights[a] * full[node * dim + k];
                }
            }
            v
        })
        .collect()
}

pub fn interpolate_displacement(space: &FeSpace, full: &[f64], points: &[Point]) -> Result<Vec<[f64; 3]>, FemError> {
    Ok(interpolate_at(space, full, &locate_points(space, points)?))
}
