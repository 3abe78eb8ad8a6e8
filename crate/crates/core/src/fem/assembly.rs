use super::bc::{BcProgram, BoundaryCondition};
use super::space::{FeSpace, Pattern, NONE};
use super::FemError;
use crate::constitutive::{invariant_gradients, stress_from_eval, tangent_from_eval, ConstitutiveError, ConstitutiveModel, Tangent};
use crate::kinematics::{invariants, DeformationState, Tensor2};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;

const BATCH: usize = 2048;

/// Square sparse matrix over the free dofs in compressed-column form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub(crate) fn zeros(pattern: Arc<Pattern>) -> Self {
        let nnz = pattern.row_idx.len();
        SparseMatrix { pattern, values: vec![0.0; nnz] }
    }

    pub fn n(&self) -> usize {
        self.pattern.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.pattern.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.pattern.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub(crate) fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.pattern.position(row, col).expect("entry outside the sparsity pattern");
        self.values[k] += v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1] {
                m[(self.pattern.row_idx[k], j)] += self.values[k];
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        for (j, xj) in x.iter().enumerate() {
            for k in self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1] {
                y[self.pattern.row_idx[k]] += self.values[k] * xj;
            }
        }
        y
    }

    /// `max |A_ij − A_ji|` relative to `max |A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..self.n() {
            for k in self.pattern.col_ptr[j]..self.pattern.col_ptr[j + 1] {
                let i = self.pattern.row_idx[k];
                scale = scale.max(self.values[k].abs());
                diff = diff.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

fn model_error(c: usize, e: ConstitutiveError) -> FemError {
    if e.is_non_positive_jacobian() {
        FemError::ElementInversion(c)
    } else {
        FemError::Constitutive(e)
    }
}

/// Displacement gradient of cell `c` embedded in 3×3 (plane strain in 2D).
pub(crate) fn cell_displacement_gradient(space: &FeSpace, full: &[f64], c: usize) -> Tensor2 {
    let dim = space.dim();
    let g = space.grads(c);
    let mut h = Tensor2::zeros();
    for (a, &node) in space.mesh().cell(c).iter().enumerate() {
        for i in 0..dim {
            let u = full[node * dim + i];
            for j in 0..dim {
                h[(i, j)] += u * g[a][j];
            }
        }
    }
    h
}

pub(crate) fn cell_state(space: &FeSpace, full: &[f64], c: usize) -> Result<DeformationState, FemError> {
    let f = Tensor2::identity() + cell_displacement_gradient(space, full, c);
    invariants(&f).map_err(|_| FemError::ElementInversion(c))
}

struct Element {
    r: [f64; 12],
    k: Option<Box<[f64; 144]>>,
    w: f64,
}

fn element(space: &FeSpace, model: &ConstitutiveModel, full: &[f64], c: usize, tangent: bool) -> Result<Element, FemError> {
    let dim = space.dim();
    let nl = dim + 1;
    let s = cell_state(space, full, c)?;
    let e = model.energy(s.invariants()).map_err(|err| model_error(c, err))?;
    let p = stress_from_eval(&s, &e);
    let g = space.grads(c);
    let v = space.volume(c);
    let mut r = [0.0; 12];
    for a in 0..nl {
        for i in 0..dim {
            r[a * dim + i] = v * (0..dim).map(|j| p[(i, j)] * g[a][j]).sum::<f64>();
        }
    }
    let k = if tangent {
        let at: Tangent = tangent_from_eval(&s, &e);
        let nd = nl * dim;
        let mut k = Box::new([0.0; 144]);
        for a in 0..nl {
            for i in 0..dim {
                for b in 0..nl {
                    for kk in 0..dim {
                        let mut sum = 0.0;
                        for j in 0..dim {
                            for l in 0..dim {
                                sum += at[(3 * i + j, 3 * kk + l)] * g[a][j] * g[b][l];
                            }
                        }
                        k[(a * dim + i) * nd + b * dim + kk] = v * sum;
                    }
                }
            }
        }
        Some(k)
    } else {
        None
    };
    Ok(Element { r, k, w: v * e.w })
}

/// Evaluates `f` on every cell in parallel and feeds the results to `sink`
/// in cell order, so reductions are independent of the thread count.
pub(crate) fn for_cells<T, F, S>(n: usize, f: F, mut sink: S) -> Result<(), FemError>
where
    T: Send,
    F: Fn(usize) -> Result<T, FemError> + Sync,
    S: FnMut(usize, T),
{
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let out: Vec<Result<T, FemError>> = (start..end).into_par_iter().map(&f).collect();
        for (k, t) in out.into_iter().enumerate() {
            sink(start + k, t?);
        }
        start = end;
    }
    Ok(())
}

fn check_state(space: &FeSpace, full: &[f64]) -> Result<(), FemError> {
    if full.len() != space.n_dofs() {
        return Err(FemError::DimensionMismatch { expected: space.n_dofs(), got: full.len() });
    }
    if full.iter().any(|x| !x.is_finite()) {
        return Err(FemError::NonFiniteState);
    }
    Ok(())
}

fn skew(v: [f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Deformed area vector `∫ cof(F) N dA` of a boundary facet and its
/// derivative with respect to the facet node positions.
pub(crate) fn deformed_area_vector(space: &FeSpace, full: &[f64], f: usize) -> ([f64; 3], Vec<[[f64; 3]; 3]>) {
    let dim = space.dim();
    let mesh = space.mesh();
    let nodes = mesh.facet(f);
    let n_ref = space.facet_normal(f);
    let xr: Vec<[f64; 3]> = nodes.iter().map(|&i| *mesh.node(i)).collect();
    let x: Vec<[f64; 3]> = nodes
        .iter()
        .map(|&i| {
            let mut p = *mesh.node(i);
            for (k, pk) in p.iter_mut().enumerate().take(dim) {
                *pk += full[i * dim + k];
            }
            p
        })
        .collect();
    if dim == 2 {
        let e = sub3(&xr[1], &xr[0]);
        let sign = if e[1] * n_ref[0] - e[0] * n_ref[1] >= 0.0 { 1.0 } else { -1.0 };
        let d = sub3(&x[1], &x[0]);
        let a = [sign * d[1], -sign * d[0], 0.0];
        let r = [[0.0, sign, 0.0], [-sign, 0.0, 0.0], [0.0; 3]];
        let neg = r.map(|row| row.map(|v| -v));
        (a, vec![neg, r])
    } else {
        let e1 = sub3(&xr[1], &xr[0]);
        let e2 = sub3(&xr[2], &xr[0]);
        let cr = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
        let sign = if cr[0] * n_ref[0] + cr[1] * n_ref[1] + cr[2] * n_ref[2] >= 0.0 { 0.5 } else { -0.5 };
        let d1 = sub3(&x[1], &x[0]);
        let d2 = sub3(&x[2], &x[0]);
        let a = [
            sign * (d1[1] * d2[2] - d1[2] * d2[1]),
            sign * (d1[2] * d2[0] - d1[0] * d2[2]),
            sign * (d1[0] * d2[1] - d1[1] * d2[0]),
        ];
        let scale = |m: [[f64; 3]; 3]| m.map(|row| row.map(|v| sign * v));
        let d0 = scale(skew(sub3(&x[2], &x[1])));
        let dd1 = scale(skew(sub3(&x[2], &x[0])).map(|row| row.map(|v| -v)));
        let dd2 = scale(skew(d1));
        (a, vec![d0, dd1, dd2])
    }
}

/// Boundary contributions (dead loads, springs, follower pressure) added to
/// the full residual and, optionally, to the free tangent. Returns the
/// boundary part of the potential energy (follower terms excluded).
fn boundary_terms(
    space: &FeSpace,
    bc: &BcProgram,
    full: &[f64],
    s: f64,
    r: &mut [f64],
    mut k: Option<&mut SparseMatrix>,
) -> f64 {
    let dim = space.dim();
    let mesh = space.mesh();
    let fi = space.free_index_raw();
    let nf = dim as f64;
    let mut energy = 0.0;
    for f in 0..mesh.n_facets() {
        let cond = bc.get(mesh.facet_tag(f));
        let nodes = mesh.facet(f);
        let n = space.facet_normal(f);
        let area = space.facet_measure(f);
        let dead = |t: &[f64; 3], q: f64, r: &mut [f64], energy: &mut f64| {
            let h: Vec<f64> = (0..dim).map(|i| s * (t[i] + q * n[i])).collect();
            for &a in nodes {
                for i in 0..dim {
                    r[a * dim + i] -= h[i] * area / nf;
                    *energy -= h[i] * area / nf * full[a * dim + i];
                }
            }
        };
        match cond {
            BoundaryCondition::Traction { traction, normal } => dead(traction, *normal, r, &mut energy),
            BoundaryCondition::NormalSpring { stiffness, traction, normal } => {
                dead(traction, *normal, r, &mut energy);
                let kk = *stiffness;
                let un: Vec<f64> = nodes.iter().map(|&a| (0..dim).map(|i| n[i] * full[a * dim + i]).sum()).collect();
                for (ia, &a) in nodes.iter().enumerate() {
                    for (ib, &b) in nodes.iter().enumerate() {
                        let m = area * if ia == ib { 2.0 } else { 1.0 } / (nf * (nf + 1.0));
                        energy += 0.5 * kk * m * un[ia] * un[ib];
                        for i in 0..dim {
                            r[a * dim + i] += kk * m * un[ib] * n[i];
                        }
                        if let Some(k) = k.as_deref_mut() {
                            for i in 0..dim {
                                let row = fi[a * dim + i];
                                if row == NONE {
                                    continue;
                                }
                                for j in 0..dim {
                                    let col = fi[b * dim + j];
                                    if col != NONE {
                                        k.add(row, col, kk * m * n[i] * n[j]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            BoundaryCondition::FollowerPressure { pressure, dead: d } => {
                dead(d, 0.0, r, &mut energy);
                let (av, da) = deformed_area_vector(space, full, f);
                let c = s * pressure / nf;
                for &a in nodes {
                    for i in 0..dim {
                        r[a * dim + i] += c * av[i];
                    }
                }
                if let Some(k) = k.as_deref_mut() {
                    for &a in nodes {
                        for i in 0..dim {
                            let row = fi[a * dim + i];
                            if row == NONE {
                                continue;
                            }
                            for (ib, &b) in nodes.iter().enumerate() {
                                for j in 0..dim {
                                    let col = fi[b * dim + j];
                                    if col != NONE {
                                        k.add(row, col, c * da[ib][i][j]);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            BoundaryCondition::DirichletVector { .. } | BoundaryCondition::DirichletNormal { .. } | BoundaryCondition::Free => {}
        }
    }
    energy
}

/// Residual over all dofs (constrained rows included) for a full
/// displacement vector.
pub fn assemble_residual_full(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    full: &[f64],
    s: f64,
) -> Result<Vec<f64>, FemError> {
    check_state(space, full)?;
    let dim = space.dim();
    let mesh = space.mesh();
    let mut r = vec![0.0; space.n_dofs()];
    for_cells(
        mesh.n_cells(),
        |c| element(space, model, full, c, false),
        |c, e| {
            for (a, &node) in mesh.cell(c).iter().enumerate() {
                for i in 0..dim {
                    r[node * dim + i] += e.r[a * dim + i];
                }
            }
        },
    )?;
    boundary_terms(space, bc, full, s, &mut r, None);
    Ok(r)
}

/// Residual on the free dofs for the free-dof state `state` at load `s`.
pub fn assemble_residual(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    state: &[f64],
    s: f64,
) -> Result<Vec<f64>, FemError> {
    let full = space.expand(state, s);
    Ok(space.restrict(&assemble_residual_full(space, bc, model, &full, s)?))
}

/// Residual and tangent on the free dofs.
pub fn assemble_system(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    state: &[f64],
    s: f64,
) -> Result<(Vec<f64>, SparseMatrix), FemError> {
    let full = space.expand(state, s);
    assemble_system_full(space, bc, model, &full, s)
}

pub(crate) fn assemble_system_full(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    full: &[f64],
    s: f64,
) -> Result<(Vec<f64>, SparseMatrix), FemError> {
    check_state(space, full)?;
    let dim = space.dim();
    let nd = (dim + 1) * dim;
    let mesh = space.mesh();
    let fi = space.free_index_raw();
    let mut r = vec![0.0; space.n_dofs()];
    let mut k = SparseMatrix::zeros(space.pattern().clone());
    for_cells(
        mesh.n_cells(),
        |c| element(space, model, full, c, true),
        |c, e| {
            let cell = mesh.cell(c);
            let ke = e.k.as_ref().unwrap();
            for (a, &na) in cell.iter().enumerate() {
                for i in 0..dim {
                    r[na * dim + i] += e.r[a * dim + i];
                    let row = fi[na * dim + i];
                    if row == NONE {
                        continue;
                    }
                    for (b, &nb) in cell.iter().enumerate() {
                        for j in 0..dim {
                            let col = fi[nb * dim + j];
                            if col != NONE {
                                k.add(row, col, ke[(a * dim + i) * nd + b * dim + j]);
                            }
                        }
                    }
                }
            }
        },
    )?;
    boundary_terms(space, bc, full, s, &mut r, Some(&mut k));
    Ok((space.restrict(&r), k))
}

pub fn assemble_tangent(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    state: &[f64],
    s: f64,
) -> Result<SparseMatrix, FemError> {
    Ok(assemble_system(space, bc, model, state, s)?.1)
}

/// Discrete total potential energy. Follower loads are not conservative and
/// are left out.
pub fn assemble_energy(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    state: &[f64],
    s: f64,
) -> Result<f64, FemError> {
    let full = space.expand(state, s);
    check_state(space, &full)?;
    let mut w = 0.0;
    for_cells(space.mesh().n_cells(), |c| element(space, model, &full, c, false), |_, e| w += e.w)?;
    let mut scratch = vec![0.0; space.n_dofs()];
    Ok(w + boundary_terms(space, bc, &full, s, &mut scratch, None))
}

fn reaction_facets(space: &FeSpace, bc: &BcProgram, tag: &str) -> Result<Vec<usize>, FemError> {
    if !bc.get(tag).is_dirichlet() {
        return Err(FemError::TagNotDirichlet(tag.to_string()));
    }
    Ok(space.mesh().facets_with_tag(tag))
}

/// `∫ P N dA` over the facets carrying `tag`, with the element-constant
/// stress of the adjacent cell.
pub fn reaction_vector_full(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    full: &[f64],
    tag: &str,
) -> Result<[f64; 3], FemError> {
    let mut out = [0.0; 3];
    for f in reaction_facets(space, bc, tag)? {
        let c = space.mesh().facet_cell(f);
        let st = cell_state(space, full, c)?;
        let e = model.energy(st.invariants()).map_err(|err| model_error(c, err))?;
        let p = stress_from_eval(&st, &e);
        let n = space.facet_normal(f);
        let area = space.facet_measure(f);
        for i in 0..3 {
            out[i] += area * (0..3).map(|j| p[(i, j)] * n[j]).sum::<f64>();
        }
    }
    Ok(out)
}

/// `∫ (P N)·N dA` over the facets carrying `tag`.
pub fn reaction_force_full(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    full: &[f64],
    tag: &str,
) -> Result<f64, FemError> {
    Ok(reaction_sensitivity(space, bc, model, full, tag, false)?.value)
}

#[derive(Debug, Clone)]
pub struct ReactionSensitivity {
    pub value: f64,
    /// Derivative with respect to the free dofs.
    pub d_state: Vec<f64>,
    /// Derivative with respect to the raw model parameters.
    pub d_params: Vec<f64>,
}

pub fn reaction_sensitivity(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    full: &[f64],
    tag: &str,
    derivatives: bool,
) -> Result<ReactionSensitivity, FemError> {
    let dim = space.dim();
    let fi = space.free_index_raw();
    let mut value = 0.0;
    let mut d_state = vec![0.0; if derivatives { space.n_free() } else { 0 }];
    let mut d_params = vec![0.0; if derivatives { model.n_params() } else { 0 }];
    for f in reaction_facets(space, bc, tag)? {
        let c = space.mesh().facet_cell(f);
        let st = cell_state(space, full, c)?;
        let e = model.energy(st.invariants()).map_err(|err| model_error(c, err))?;
        let p = stress_from_eval(&st, &e);
        let n = space.facet_normal(f);
        let area = space.facet_measure(f);
        let pn = |m: &Tensor2| (0..3).map(|i| n[i] * (0..3).map(|j| m[(i, j)] * n[j]).sum::<f64>()).sum::<f64>();
        value += area * pn(&p);
        if !derivatives {
            continue;
        }
        let at = tangent_from_eval(&st, &e);
        let g = space.grads(c);
        for (b, &nb) in space.mesh().cell(c).iter().enumerate() {
            for k in 0..dim {
                let col = fi[nb * dim + k];
                if col == NONE {
                    continue;
                }
                let mut sum = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        for l in 0..dim {
                            sum += n[i] * n[j] * at[(3 * i + j, 3 * k + l)] * g[b][l];
                        }
                    }
                }
                d_state[col] += area * sum;
            }
        }
        let ig = invariant_gradients(&st);
        let seed = [area * pn(&ig[0]), area * pn(&ig[1]), area * pn(&ig[2])];
        model.accumulate_seeded_param_gradient(st.invariants(), seed, &mut d_params);
    }
    Ok(ReactionSensitivity { value, d_state, d_params })
}

/// `λᵀ ∂r/∂θ` for a free-dof vector `λ`, accumulated in cell order.
pub fn residual_param_vjp(
    space: &FeSpace,
    model: &ConstitutiveModel,
    full: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>, FemError> {
    let dim = space.dim();
    let mesh = space.mesh();
    let np = model.n_params();
    let lam_full = {
        let mut v = vec![0.0; space.n_dofs()];
        for (k, &d) in space.free_dofs().iter().enumerate() {
            v[d] = lambda[k];
        }
        v
    };
    let mut out = vec![0.0; np];
    for_cells(
        mesh.n_cells(),
        |c| {
            let st = cell_state(space, full, c)?;
            let lg = cell_displacement_gradient(space, &lam_full, c);
            let ig = invariant_gradients(&st);
            let v = space.volume(c);
            let mut seed = [0.0; 3];
            for (sk, gk) in seed.iter_mut().zip(&ig) {
                let mut d = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        d += gk[(i, j)] * lg[(i, j)];
                    }
                }
                *sk = v * d;
            }
            let mut local = vec![0.0; np];
            model.accumulate_seeded_param_gradient(st.invariants(), seed, &mut local);
            Ok(local)
        },
        |_, local| {
            for (o, l) in out.iter_mut().zip(&local) {
                *o += l;
            }
        },
    )?;
    Ok(out)
}

/// Per-cell deformation gradients of a full displacement vector.
pub fn cell_deformation_gradients(space: &FeSpace, full: &[f64]) -> Vec<Tensor2> {
    (0..space.mesh().n_cells())
        .map(|c| Tensor2::identity() + cell_displacement_gradient(space, full, c))
        .collect()
}
