use super::bc::{BcProgram, BoundaryCondition, DisplacementField};
use super::FemError;
use crate::mesh::{Mesh, Point};
use faer::sparse::linalg::solvers::SymbolicLu;
use faer::sparse::SymbolicSparseColMatRef;
use nalgebra::{Matrix2, Matrix3};
use std::sync::{Arc, OnceLock};

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
enum ConstraintSource {
    /// `u = s · value`
    Scaled(f64),
    Field(DisplacementField, usize, usize),
}

#[derive(Debug, Clone)]
struct Constraint {
    dof: usize,
    source: ConstraintSource,
    by_vector: bool,
}

/// Compressed-column pattern of the free-dof tangent.
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl Pattern {
    /// Position of entry `(row, col)` in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        self.row_idx[lo..hi].binary_search(&row).ok().map(|k| lo + k)
    }
}

/// Vector P1 space on a simplex mesh, together with the split into
/// constrained and free degrees of freedom induced by a boundary program.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Mesh,
    dim: usize,
    constraints: Vec<Constraint>,
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    grads: Vec<[[f64; 3]; 4]>,
    volumes: Vec<f64>,
    facet_normals: Vec<Point>,
    facet_measures: Vec<f64>,
    h: f64,
    pattern: Arc<Pattern>,
    symbolic: OnceLock<Option<SymbolicLu<usize>>>,
}

impl Clone for FeSpace {
    fn clone(&self) -> Self {
        FeSpace {
            mesh: self.mesh.clone(),
            dim: self.dim,
            constraints: self.constraints.clone(),
            free_index: self.free_index.clone(),
            free_dofs: self.free_dofs.clone(),
            grads: self.grads.clone(),
            volumes: self.volumes.clone(),
            facet_normals: self.facet_normals.clone(),
            facet_measures: self.facet_measures.clone(),
            h: self.h,
            pattern: self.pattern.clone(),
            symbolic: OnceLock::new(),
        }
    }
}

fn shape_gradients(dim: usize, x: &[Point]) -> Option<[[f64; 3]; 4]> {
    let mut g = [[0.0; 3]; 4];
    if dim == 2 {
        let j = Matrix2::new(x[1][0] - x[0][0], x[2][0] - x[0][0], x[1][1] - x[0][1], x[2][1] - x[0][1]);
        let inv = j.try_inverse()?;
        for a in 0..2 {
            for k in 0..2 {
                g[a + 1][k] = inv[(a, k)];
            }
        }
    } else {
        let j = Matrix3::from_fn(|r, c| x[c + 1][r] - x[0][r]);
        let inv = j.try_inverse()?;
        for a in 0..3 {
            for k in 0..3 {
                g[a + 1][k] = inv[(a, k)];
            }
        }
    }
    for k in 0..3 {
        g[0][k] = -(1..=dim).map(|a| g[a][k]).sum::<f64>();
    }
    Some(g)
}

impl FeSpace {
    pub fn new(mesh: Mesh, bc: &BcProgram) -> Result<Self, FemError> {
        let dim = mesh.dim();
        for tag in bc.conditions.keys() {
            if !mesh.has_tag(tag) {
                return Err(FemError::UnknownTag(tag.clone()));
            }
        }
        if !bc.removes_rigid_modes() {
            return Err(FemError::RigidBodyModes);
        }
        let n_dofs = dim * mesh.n_nodes();
        let mut slot: Vec<Option<Constraint>> = vec![None; n_dofs];
        let mut facet_normals = Vec::with_capacity(mesh.n_facets());
        let mut facet_measures = Vec::with_capacity(mesh.n_facets());
        for f in 0..mesh.n_facets() {
            let (n, m) = mesh.facet_normal_and_measure(f);
            facet_normals.push(n);
            facet_measures.push(m);
        }
        // Vector conditions first so that they take precedence.
        for (tag, cond) in &bc.conditions {
            if let BoundaryCondition::DirichletVector { field } = cond {
                for node in mesh.nodes_with_tag(tag) {
                    for comp in 0..dim {
                        slot[node * dim + comp] = Some(Constraint {
                            dof: node * dim + comp,
                            source: ConstraintSource::Field(field.clone(), node, comp),
                            by_vector: true,
                        });
                    }
                }
            }
        }
        for (tag, cond) in &bc.conditions {
            if let BoundaryCondition::DirichletNormal { value } = cond {
                for f in mesh.facets_with_tag(tag) {
                    let n = facet_normals[f];
                    let axis = (0..dim).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
                    if n[axis].abs() < 1.0 - 1e-8 {
                        return Err(FemError::NonAxisAligned { tag: tag.clone(), facet: f });
                    }
                    let v = value * n[axis].signum();
                    for &node in mesh.facet(f) {
                        let dof = node * dim + axis;
                        match &slot[dof] {
                            Some(c) if c.by_vector => {}
                            Some(Constraint { source: ConstraintSource::Scaled(old), .. }) if *old == v => {}
                            Some(_) => return Err(FemError::ConflictingConstraint { node, component: axis }),
                            None => {
                                slot[dof] = Some(Constraint { dof, source: ConstraintSource::Scaled(v), by_vector: false })
                            }
                        }
                    }
                }
            }
        }
        let mut free_index = vec![NONE; n_dofs];
        let mut free_dofs = Vec::new();
        let mut constraints = Vec::new();
        for (dof, s) in slot.into_iter().enumerate() {
            match s {
                Some(c) => constraints.push(c),
                None => {
                    free_index[dof] = free_dofs.len();
                    free_dofs.push(dof);
                }
            }
        }
        let mut grads = Vec::with_capacity(mesh.n_cells());
        let mut volumes = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let x = mesh.cell_coords(c);
            let v = mesh.cell_volume(c);
            let g = shape_gradients(dim, &x).filter(|_| v > 0.0).ok_or(FemError::ElementInversion(c))?;
            grads.push(g);
            volumes.push(v);
        }
        let pattern = Arc::new(build_pattern(&mesh, dim, &free_index, free_dofs.len()));
        let h = mesh.mean_edge_length();
        Ok(FeSpace {
            mesh,
            dim,
            constraints,
            free_index,
            free_dofs,
            grads,
            volumes,
            facet_normals,
            facet_measures,
            h,
            pattern,
            symbolic: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.dim * self.mesh.n_nodes()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.constraints.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Free index of a global dof, `None` when constrained.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.free_index[dof];
        (i != NONE).then_some(i)
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.free_index[dof] == NONE
    }

    /// Mean edge length of the mesh.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub(crate) fn grads(&self, c: usize) -> &[[f64; 3]; 4] {
        &self.grads[c]
    }

    pub(crate) fn volume(&self, c: usize) -> f64 {
        self.volumes[c]
    }

    pub(crate) fn facet_normal(&self, f: usize) -> &Point {
        &self.facet_normals[f]
    }

    pub(crate) fn facet_measure(&self, f: usize) -> f64 {
        self.facet_measures[f]
    }

    pub(crate) fn free_index_raw(&self) -> &[usize] {
        &self.free_index
    }

    pub(crate) fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub(crate) fn symbolic_lu(&self) -> Option<SymbolicLu<usize>> {
        self.symbolic
            .get_or_init(|| {
                let n = self.n_free();
                let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.pattern.col_ptr, None, &self.pattern.row_idx);
                SymbolicLu::try_new(sym).ok()
            })
            .clone()
    }

    /// Full nodal displacement vector: free values from `free`, constrained
    /// values from the Dirichlet data at load scale `s`.
    pub fn expand(&self, free: &[f64], s: f64) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free());
        let mut full = vec![0.0; self.n_dofs()];
        for (k, &dof) in self.free_dofs.iter().enumerate() {
            full[dof] = free[k];
        }
        for c in &self.constraints {
            full[c.dof] = match &c.source {
                ConstraintSource::Scaled(v) => s * v,
                ConstraintSource::Field(field, node, comp) => field.eval(self.mesh.node(*node), s)[*comp],
            };
        }
        full
    }

    /// Free part of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }
}

fn build_pattern(mesh: &Mesh, dim: usize, free_index: &[usize], n_free: usize) -> Pattern {
    let nn = mesh.n_nodes();
    let mut adj: Vec<Vec<usize>> = (0..nn).map(|i| vec![i]).collect();
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        for &a in cell {
            for &b in cell {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut col_ptr = Vec::with_capacity(n_free + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for node in 0..nn {
        for comp in 0..dim {
            if free_index[node * dim + comp] == NONE {
                continue;
            }
            for &b in &adj[node] {
                for k in 0..dim {
                    let r = free_index[b * dim + k];
                    if r != NONE {
                        row_idx.push(r);
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
    }
    Pattern { col_ptr, row_idx }
}
