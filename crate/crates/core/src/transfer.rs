//! Inter-level transfer operators.
//!
//! All three operators come from the pseudo-L2 projection `Π = D⁻¹B` with a
//! dual (biorthogonal) multiplier basis on the slave mesh, which makes `D`
//! diagonal:
//!
//! * prolongation `I` (coarse → fine): master = coarse, slave = fine. On
//!   nested grids this is plain FE interpolation, so it is built from exact
//!   interpolation stencils.
//! * projection `P` (fine → coarse, primal variables): master = fine,
//!   slave = coarse, assembled by quadrature.
//! * restriction `R = Iᵀ` (fine → coarse, dual variables).
//!
//! The scalar operators are replicated block-diagonally over the `d + 1`
//! interleaved fields.

use crate::mesh::{MeshHierarchy, MeshLevel};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Prolongation,
    Restriction,
    Projection,
}

#[derive(Debug, Clone)]
pub struct TransferOperator {
    pub matrix: CsrMatrix,
    pub from_level: usize,
    pub to_level: usize,
    pub kind: TransferKind,
}

impl TransferOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }
}

/// Scalar FE interpolation from `coarse` to its uniform refinement `fine`,
/// computed from index arithmetic (weights 1, 1/2, 1/4 exactly).
pub fn interpolation_stencil(coarse: &MeshLevel, fine: &MeshLevel) -> Result<CsrMatrix> {
    check_nested(coarse, fine)?;
    let dim = coarse.dim;
    let cx = coarse.grid.cells[0];
    let fx = fine.grid.cells[0];
    let fy = if dim == 2 { fine.grid.cells[1] } else { 0 };
    let axis_weights = |i: usize| -> Vec<(usize, f64)> {
        if i.is_multiple_of(2) {
            vec![(i / 2, 1.0)]
        } else {
            vec![(i / 2, 0.5), (i / 2 + 1, 0.5)]
        }
    };
    let mut triplets = Vec::new();
    for jf in 0..=fy {
        let wy = if dim == 2 { axis_weights(jf) } else { vec![(0, 1.0)] };
        for if_ in 0..=fx {
            let row = jf * (fx + 1) + if_;
            for &(ic, wxv) in &axis_weights(if_) {
                for &(jc, wyv) in &wy {
                    triplets.push((row, jc * (cx + 1) + ic, wxv * wyv));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(
        fine.node_count(),
        coarse.node_count(),
        &triplets,
    ))
}

fn check_nested(coarse: &MeshLevel, fine: &MeshLevel) -> Result<()> {
    let ok = coarse.dim == fine.dim
        && coarse.grid.origin == fine.grid.origin
        && coarse.grid.extents == fine.grid.extents
        && coarse.grid.cells.iter().zip(&fine.grid.cells).all(|(c, f)| 2 * c == *f);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidMesh(
            "transfer requires a mesh and its uniform refinement".into(),
        ))
    }
}

/// Dual basis coefficients `A = W M⁻¹` for one element, where `M` is the
/// element mass matrix and `W = diag(∫N_j)`; the dual function is
/// `q_k = Σ_l A[k][l] N_l`.
fn dual_coefficients(mesh: &MeshLevel, e: usize) -> Vec<Vec<f64>> {
    let nn = mesh.nodes_per_element();
    let mut mass = vec![vec![0.0; nn]; nn];
    let mut lumped = vec![0.0; nn];
    for q in mesh.quadrature(e) {
        for a in 0..nn {
            lumped[a] += q.weight * q.shape[a];
            for b in 0..nn {
                mass[a][b] += q.weight * q.shape[a] * q.shape[b];
            }
        }
    }
    let inv = invert_small(&mass);
    (0..nn)
        .map(|k| (0..nn).map(|l| lumped[k] * inv[k][l]).collect())
        .collect()
}

fn invert_small(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Assembles the scalar pseudo-L2 projection `D⁻¹B` from `master` to `slave`
/// (either nesting order), integrating over the finer of the two meshes.
pub fn assemble_pseudo_l2(master: &MeshLevel, slave: &MeshLevel) -> Result<CsrMatrix> {
    let master_is_fine = master.node_count() > slave.node_count();
    let (coarse, fine) = if master_is_fine {
        (slave, master)
    } else {
        (master, slave)
    };
    check_nested(coarse, fine)?;

    let mut dual_cache: Vec<Option<Vec<Vec<f64>>>> = vec![None; slave.elements.len()];
    let mut d = vec![0.0; slave.node_count()];
    let mut triplets = Vec::new();

    for e in 0..fine.elements.len() {
        for q in fine.quadrature(e) {
            let (em, xim) = master.locate(q.point);
            let (es, xis) = slave.locate(q.point);
            let nm = master.shape_values(xim);
            let ns = slave.shape_values(xis);
            let dual = dual_cache[es].get_or_insert_with(|| dual_coefficients(slave, es));
            let slave_nodes = &slave.elements[es];
            let master_nodes = &master.elements[em];
            for (k, &sk) in slave_nodes.iter().enumerate() {
                let qk: f64 = dual[k].iter().zip(&ns).map(|(a, n)| a * n).sum();
                d[sk] += q.weight * ns[k] * qk;
                for (i, &mi) in master_nodes.iter().enumerate() {
                    let v = q.weight * nm[i] * qk;
                    if v != 0.0 {
                        triplets.push((sk, mi, v));
                    }
                }
            }
        }
    }

    if let Some((index, &value)) = d.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::DegenerateTransfer { index, value });
    }
    for t in &mut triplets {
        t.2 /= d[t.0];
    }
    let pi = CsrMatrix::from_triplets(slave.node_count(), master.node_count(), &triplets);
    Ok(drop_roundoff(&pi, 1e-14))
}

fn drop_roundoff(a: &CsrMatrix, tol: f64) -> CsrMatrix {
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if v.abs() > tol {
                t.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &t)
}

/// Operators for every adjacent level pair, assembled once per hierarchy.
/// Index `l` refers to the pair (l, l + 1).
#[derive(Debug, Clone)]
pub struct TransferSet {
    prolongations: Vec<TransferOperator>,
    restrictions: Vec<TransferOperator>,
    projections: Vec<TransferOperator>,
    scalar_prolongations: Vec<CsrMatrix>,
}

impl TransferSet {
    pub fn assemble(hierarchy: &MeshHierarchy) -> Result<Self> {
        Self::assemble_with_fields(hierarchy, hierarchy.finest().dofs_per_node)
    }

    /// Assembles operators replicated over `fields` interleaved fields.
    pub fn assemble_with_fields(hierarchy: &MeshHierarchy, fields: usize) -> Result<Self> {
        let mut set = TransferSet {
            prolongations: Vec::new(),
            restrictions: Vec::new(),
            projections: Vec::new(),
            scalar_prolongations: Vec::new(),
        };
        for pair in hierarchy.levels().windows(2) {
            let (coarse, fine) = (&pair[0], &pair[1]);
            let l = coarse.level_index;
            let interp = interpolation_stencil(coarse, fine)?;
            let proj = assemble_pseudo_l2(fine, coarse)?;
            let i_full = interp.expand_fields(fields);
            set.restrictions.push(TransferOperator {
                matrix: i_full.transpose(),
                from_level: l + 1,
                to_level: l,
                kind: TransferKind::Restriction,
            });
            set.prolongations.push(TransferOperator {
                matrix: i_full,
                from_level: l,
                to_level: l + 1,
                kind: TransferKind::Prolongation,
            });
            set.projections.push(TransferOperator {
                matrix: proj.expand_fields(fields),
                from_level: l + 1,
                to_level: l,
                kind: TransferKind::Projection,
            });
            set.scalar_prolongations.push(interp);
        }
        Ok(set)
    }

    fn get(ops: &[TransferOperator], l: usize) -> Result<&TransferOperator> {
        ops.get(l).ok_or(Error::LevelOutOfRange {
            level: l,
            max: ops.len().saturating_sub(1),
        })
    }

    /// `I_l^{l+1}`.
    pub fn prolongation(&self, l: usize) -> Result<&TransferOperator> {
        Self::get(&self.prolongations, l)
    }

    /// `R^l_{l+1} = (I_l^{l+1})ᵀ`.
    pub fn restriction(&self, l: usize) -> Result<&TransferOperator> {
        Self::get(&self.restrictions, l)
    }

    /// `P^l_{l+1}`.
    pub fn projection(&self, l: usize) -> Result<&TransferOperator> {
        Self::get(&self.projections, l)
    }

    /// Scalar (single-field) interpolation for the pair (l, l + 1).
    pub fn scalar_prolongation(&self, l: usize) -> Result<&CsrMatrix> {
        self.scalar_prolongations.get(l).ok_or(Error::LevelOutOfRange {
            level: l,
            max: self.scalar_prolongations.len().saturating_sub(1),
        })
    }

    pub fn pairs(&self) -> usize {
        self.prolongations.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_hierarchy, GridSpec};

    fn hier_1d(cells: usize, levels: usize) -> MeshHierarchy {
        build_hierarchy(&GridSpec::new(vec![0.0], vec![1.0], vec![cells]).unwrap(), levels).unwrap()
    }

    fn hier_2d(levels: usize) -> MeshHierarchy {
        build_hierarchy(
            &GridSpec::new(vec![0.0, 0.0], vec![2.0, 1.0], vec![2, 1]).unwrap(),
            levels,
        )
        .unwrap()
    }

    #[test]
    fn midpoint_weights_in_1d() {
        let h = hier_1d(2, 1);
        let i = interpolation_stencil(h.level(0).unwrap(), h.level(1).unwrap()).unwrap();
        assert_eq!(i.nrows(), 5);
        assert_eq!(i.get(1, 0), 0.5);
        assert_eq!(i.get(1, 1), 0.5);
        assert_eq!(i.get(2, 1), 1.0);
    }

    #[test]
    fn pseudo_l2_with_coarse_master_is_interpolation() {
        for h in [hier_1d(3, 1), hier_2d(1)] {
            let (c, f) = (h.level(0).unwrap(), h.level(1).unwrap());
            let stencil = interpolation_stencil(c, f).unwrap();
            let integral = assemble_pseudo_l2(c, f).unwrap();
            assert!(stencil.max_abs_diff(&integral) < 1e-12);
        }
    }

    #[test]
    fn prolongation_reproduces_constants() {
        let h = hier_2d(2);
        let t = TransferSet::assemble(&h).unwrap();
        for l in 0..t.pairs() {
            let p = t.prolongation(l).unwrap();
            let ones = vec![1.0; p.matrix.ncols()];
            assert!(p.apply(&ones).iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn projection_left_inverts_prolongation() {
        let h = hier_1d(2, 2);
        let t = TransferSet::assemble(&h).unwrap();
        for l in 0..2 {
            let pi = t
                .projection(l)
                .unwrap()
                .matrix
                .matmul(&t.prolongation(l).unwrap().matrix);
            let id = CsrMatrix::identity(pi.nrows());
            assert!(pi.max_abs_diff(&id) < 1e-12);
        }
    }

    #[test]
    fn projection_differs_from_restriction() {
        let h = hier_1d(2, 1);
        let t = TransferSet::assemble(&h).unwrap();
        let p = &t.projection(0).unwrap().matrix;
        let r = &t.restriction(0).unwrap().matrix;
        assert!(p.max_abs_diff(r) > 0.1);
    }

    #[test]
    fn restriction_of_zero_is_zero() {
        let h = hier_2d(1);
        let t = TransferSet::assemble(&h).unwrap();
        let r = t.restriction(0).unwrap();
        assert!(r.apply(&vec![0.0; r.matrix.ncols()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fields_never_mix() {
        let h = hier_2d(1);
        let t = TransferSet::assemble(&h).unwrap();
        let p = &t.prolongation(0).unwrap().matrix;
        for i in 0..p.nrows() {
            let (cols, _) = p.row(i);
            assert!(cols.iter().all(|j| j % 3 == i % 3));
        }
    }

    #[test]
    fn out_of_range_level() {
        let h = hier_1d(2, 1);
        let t = TransferSet::assemble(&h).unwrap();
        assert!(matches!(t.projection(1), Err(Error::LevelOutOfRange { level: 1, .. })));
    }
}
