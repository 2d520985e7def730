//! Nested structured meshes and DOF numbering.
//!
//! Level 0 is a tensor grid of linear segments (1D) or bilinear quadrilaterals
//! (2D); each further level bisects every cell along every axis. Nodes are
//! numbered x-fastest, elements likewise, and quads are counterclockwise.

use std::collections::BTreeMap;

use crate::{Error, Result};

const COORD_TOL: f64 = 1e-12;

/// 2-point Gauss rule on [-1, 1].
pub const GAUSS_2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];

/// Domain extents and coarse cell counts of a tensor-product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, extents: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let spec = Self { origin, extents, cells };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.cells.len();
        if d == 0 || d > 2 {
            return Err(Error::InvalidMesh(format!("dimension {d} not supported")));
        }
        if self.origin.len() != d || self.extents.len() != d {
            return Err(Error::InvalidMesh(
                "origin, extents and cells must have equal length".into(),
            ));
        }
        if let Some(e) = self.extents.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidMesh(format!("extent {e} must be positive")));
        }
        if self.cells.contains(&0) {
            return Err(Error::InvalidMesh("cell counts must be at least 1".into()));
        }
        Ok(())
    }

    fn refined(&self, times: usize) -> Self {
        Self {
            origin: self.origin.clone(),
            extents: self.extents.clone(),
            cells: self.cells.iter().map(|c| c << times).collect(),
        }
    }
}

/// Node-major, field-minor DOF numbering: `dof = node * (d + 1) + field`,
/// with fields `0..d` the displacement components and field `d` the phase field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub node_count: usize,
    pub fields: usize,
}

impl DofMap {
    pub fn dof(&self, node: usize, field: usize) -> usize {
        debug_assert!(node < self.node_count && field < self.fields);
        node * self.fields + field
    }

    pub fn node_field(&self, dof: usize) -> (usize, usize) {
        (dof / self.fields, dof % self.fields)
    }

    pub fn n(&self) -> usize {
        self.node_count * self.fields
    }

    pub fn phase_field(&self) -> usize {
        self.fields - 1
    }

    pub fn is_phase(&self, dof: usize) -> bool {
        dof % self.fields == self.fields - 1
    }
}

/// Shape functions of one quadrature point in physical coordinates.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub shape: Vec<f64>,
    /// `grad[a][k]` = ∂N_a/∂x_k
    pub grad: Vec<[f64; 2]>,
    /// Quadrature weight times Jacobian determinant.
    pub weight: f64,
    pub point: [f64; 2],
}

/// One level of the hierarchy.
#[derive(Debug, Clone)]
pub struct MeshLevel {
    pub level_index: usize,
    pub dim: usize,
    pub grid: GridSpec,
    /// Node coordinates; the second component is 0 in 1D.
    pub node_coords: Vec<[f64; 2]>,
    /// Connectivity: 2 nodes per segment, 4 counterclockwise nodes per quad.
    pub elements: Vec<Vec<usize>>,
    pub h: f64,
    pub boundary_sets: BTreeMap<String, Vec<usize>>,
    pub dofs_per_node: usize,
}

impl MeshLevel {
    pub fn structured(grid: GridSpec, level_index: usize) -> Result<Self> {
        grid.validate()?;
        let dim = grid.dim();
        let nx = grid.cells[0];
        let ny = if dim == 2 { grid.cells[1] } else { 0 };
        let dx = grid.extents[0] / nx as f64;
        let dy = if dim == 2 { grid.extents[1] / ny as f64 } else { 0.0 };

        let mut node_coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = grid.origin[0] + grid.extents[0] * i as f64 / nx as f64;
                let y = if dim == 2 {
                    grid.origin[1] + grid.extents[1] * j as f64 / ny as f64
                } else {
                    0.0
                };
                node_coords.push([x, y]);
            }
        }

        let mut elements = Vec::with_capacity(nx * ny.max(1));
        if dim == 1 {
            for i in 0..nx {
                elements.push(vec![i, i + 1]);
            }
        } else {
            let row = nx + 1;
            for j in 0..ny {
                for i in 0..nx {
                    let n0 = j * row + i;
                    elements.push(vec![n0, n0 + 1, n0 + row + 1, n0 + row]);
                }
            }
        }

        let mut mesh = Self {
            level_index,
            dim,
            grid,
            node_coords,
            elements,
            h: dx.max(dy),
            boundary_sets: BTreeMap::new(),
            dofs_per_node: dim + 1,
        };
        mesh.tag_sides();
        Ok(mesh)
    }

    fn tag_sides(&mut self) {
        let lo = self.grid.origin.clone();
        let hi: Vec<f64> = lo.iter().zip(&self.grid.extents).map(|(o, e)| o + e).collect();
        let mut sets: Vec<(&str, usize, f64)> = vec![("left", 0, lo[0]), ("right", 0, hi[0])];
        if self.dim == 2 {
            sets.push(("bottom", 1, lo[1]));
            sets.push(("top", 1, hi[1]));
        }
        for (name, axis, value) in sets {
            let nodes = self
                .node_coords
                .iter()
                .enumerate()
                .filter(|(_, p)| (p[axis] - value).abs() <= COORD_TOL * (1.0 + value.abs()))
                .map(|(k, _)| k)
                .collect();
            self.boundary_sets.insert(name.to_string(), nodes);
        }
    }

    /// Tags every node lying on the segment `a`–`b` (tolerance 1e-12).
    pub fn tag_segment(&mut self, name: &str, a: [f64; 2], b: [f64; 2]) {
        let nodes: Vec<usize> = self
            .node_coords
            .iter()
            .enumerate()
            .filter(|(_, p)| on_segment(**p, a, b))
            .map(|(k, _)| k)
            .collect();
        let set = self.boundary_sets.entry(name.to_string()).or_default();
        set.extend(nodes);
        set.sort_unstable();
        set.dedup();
    }

    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn dof_map(&self) -> DofMap {
        DofMap {
            node_count: self.node_count(),
            fields: self.dofs_per_node,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.node_count() * self.dofs_per_node
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.dim == 1 {
            2
        } else {
            4
        }
    }

    pub fn cell_sizes(&self) -> [f64; 2] {
        let dx = self.grid.extents[0] / self.grid.cells[0] as f64;
        let dy = if self.dim == 2 {
            self.grid.extents[1] / self.grid.cells[1] as f64
        } else {
            1.0
        };
        [dx, dy]
    }

    /// Element containing `p` and the local coordinates of `p` in [-1, 1]^d.
    pub fn locate(&self, p: [f64; 2]) -> (usize, [f64; 2]) {
        let mut idx = [0usize; 2];
        let mut xi = [0.0; 2];
        for axis in 0..self.dim {
            let n = self.grid.cells[axis];
            let t = (p[axis] - self.grid.origin[axis]) / self.grid.extents[axis] * n as f64;
            let cell = (t.floor().max(0.0) as usize).min(n - 1);
            idx[axis] = cell;
            xi[axis] = 2.0 * (t - cell as f64) - 1.0;
        }
        let e = if self.dim == 1 {
            idx[0]
        } else {
            idx[1] * self.grid.cells[0] + idx[0]
        };
        (e, xi)
    }

    /// Shape function values of an element at local coordinates `xi`,
    /// ordered like the element connectivity.
    pub fn shape_values(&self, xi: [f64; 2]) -> Vec<f64> {
        if self.dim == 1 {
            vec![0.5 * (1.0 - xi[0]), 0.5 * (1.0 + xi[0])]
        } else {
            let (s, t) = (xi[0], xi[1]);
            vec![
                0.25 * (1.0 - s) * (1.0 - t),
                0.25 * (1.0 + s) * (1.0 - t),
                0.25 * (1.0 + s) * (1.0 + t),
                0.25 * (1.0 - s) * (1.0 + t),
            ]
        }
    }

    fn shape_local_grads(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        if self.dim == 1 {
            vec![[-0.5, 0.0], [0.5, 0.0]]
        } else {
            let (s, t) = (xi[0], xi[1]);
            vec![
                [-0.25 * (1.0 - t), -0.25 * (1.0 - s)],
                [0.25 * (1.0 - t), -0.25 * (1.0 + s)],
                [0.25 * (1.0 + t), 0.25 * (1.0 + s)],
                [-0.25 * (1.0 + t), 0.25 * (1.0 - s)],
            ]
        }
    }

    /// Local coordinates of the Gauss points (2 per axis) with reference weights.
    pub fn gauss_points(&self) -> Vec<([f64; 2], f64)> {
        if self.dim == 1 {
            GAUSS_2.iter().map(|&(x, w)| ([x, 0.0], w)).collect()
        } else {
            let mut pts = Vec::with_capacity(4);
            for &(y, wy) in &GAUSS_2 {
                for &(x, wx) in &GAUSS_2 {
                    pts.push(([x, y], wx * wy));
                }
            }
            pts
        }
    }

    /// Evaluates shape functions and physical gradients of element `e` at its
    /// Gauss points, using the isoparametric map of its nodes.
    pub fn quadrature(&self, e: usize) -> Vec<QuadPoint> {
        let nodes = &self.elements[e];
        self.gauss_points()
            .into_iter()
            .map(|(xi, w)| {
                let shape = self.shape_values(xi);
                let dl = self.shape_local_grads(xi);
                let mut point = [0.0; 2];
                for (a, &n) in nodes.iter().enumerate() {
                    point[0] += shape[a] * self.node_coords[n][0];
                    point[1] += shape[a] * self.node_coords[n][1];
                }
                if self.dim == 1 {
                    let jac: f64 = nodes
                        .iter()
                        .enumerate()
                        .map(|(a, &n)| dl[a][0] * self.node_coords[n][0])
                        .sum();
                    assert!(jac > 0.0, "non-positive Jacobian in element {e}");
                    let grad = dl.iter().map(|g| [g[0] / jac, 0.0]).collect();
                    QuadPoint {
                        shape,
                        grad,
                        weight: w * jac,
                        point,
                    }
                } else {
                    let mut j = [[0.0; 2]; 2];
                    for (a, &n) in nodes.iter().enumerate() {
                        for r in 0..2 {
                            for c in 0..2 {
                                j[r][c] += self.node_coords[n][r] * dl[a][c];
                            }
                        }
                    }
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    assert!(det > 0.0, "non-positive Jacobian in element {e}");
                    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
                    let grad = dl
                        .iter()
                        .map(|g| [g[0] * inv[0][0] + g[1] * inv[1][0], g[0] * inv[0][1] + g[1] * inv[1][1]])
                        .collect();
                    QuadPoint {
                        shape,
                        grad,
                        weight: w * det,
                        point,
                    }
                }
            })
            .collect()
    }

    /// Measure of the domain, summed from element quadrature.
    pub fn volume(&self) -> f64 {
        (0..self.elements.len())
            .flat_map(|e| self.quadrature(e))
            .map(|q| q.weight)
            .sum()
    }
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let (vx, vy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = ux * ux + uy * uy;
    let scale = 1.0 + a[0].abs().max(a[1].abs()).max(b[0].abs()).max(b[1].abs());
    let tol = COORD_TOL * scale;
    if len2 == 0.0 {
        return vx.abs() <= tol && vy.abs() <= tol;
    }
    let cross = ux * vy - uy * vx;
    if cross.abs() > tol * len2.sqrt() {
        return false;
    }
    let t = (ux * vx + uy * vy) / len2;
    t >= -tol && t <= 1.0 + tol
}

/// Meshes `T^0 ... T^L`, each a uniform refinement of its predecessor.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<MeshLevel>,
}

impl MeshHierarchy {
    pub fn levels(&self) -> &[MeshLevel] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> Result<&MeshLevel> {
        self.levels.get(l).ok_or(Error::LevelOutOfRange {
            level: l,
            max: self.finest_index(),
        })
    }

    pub fn finest_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy is never empty")
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Tags the nodes on segment `a`–`b` on every level.
    pub fn tag_segment(&mut self, name: &str, a: [f64; 2], b: [f64; 2]) {
        for level in &mut self.levels {
            level.tag_segment(name, a, b);
        }
    }
}

/// Builds levels `0..=levels` by uniform refinement of `coarse`.
pub fn build_hierarchy(coarse: &GridSpec, levels: usize) -> Result<MeshHierarchy> {
    coarse.validate()?;
    if levels == 0 {
        return Err(Error::InvalidMesh("level count L must be at least 1".into()));
    }
    let levels = (0..=levels)
        .map(|l| MeshLevel::structured(coarse.refined(l), l))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeshHierarchy { levels })
}

/// Phase-field length scale tied to the mesh size of a level.
pub fn level_length_scale(h: f64) -> f64 {
    2.0 * h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(cells: usize) -> GridSpec {
        GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells]).unwrap()
    }

    #[test]
    fn interval_bisection_counts() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let hier = build_hierarchy(&spec, 1).unwrap();
        assert_eq!(hier.level(0).unwrap().node_count(), 5);
        assert_eq!(hier.level(1).unwrap().node_count(), 9);
        assert_eq!(hier.level(1).unwrap().dofs_per_node, 2);
    }

    #[test]
    fn square_node_counts() {
        let hier = build_hierarchy(&unit_square(2), 2).unwrap();
        let counts: Vec<_> = hier.levels().iter().map(|m| m.node_count()).collect();
        assert_eq!(counts, vec![9, 25, 81]);
    }

    #[test]
    fn mesh_size_halves_and_dofs_grow() {
        let spec = GridSpec::new(vec![0.0, 0.0], vec![10.0, 5.0], vec![4, 2]).unwrap();
        let hier = build_hierarchy(&spec, 5).unwrap();
        for w in hier.levels().windows(2) {
            assert_eq!(w[1].h, w[0].h / 2.0);
            assert!(w[1].n_dofs() > w[0].n_dofs());
            assert_eq!(w[1].elements.len(), 4 * w[0].elements.len());
            let ratio = w[1].n_dofs() as f64 / w[0].n_dofs() as f64;
            assert!(ratio > 2.5 && ratio < 4.0 + 1e-12, "ratio {ratio}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(vec![0.0], vec![0.0], vec![3]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![-1.0], vec![3]).is_err());
        assert!(GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 0]).is_err());
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        assert!(build_hierarchy(&spec, 0).is_err());
    }

    #[test]
    fn nested_nodes_and_positive_jacobians() {
        let spec = GridSpec::new(vec![-1.0, 0.0], vec![2.0, 1.0], vec![3, 2]).unwrap();
        let hier = build_hierarchy(&spec, 2).unwrap();
        for w in hier.levels().windows(2) {
            for p in &w[0].node_coords {
                assert!(w[1]
                    .node_coords
                    .iter()
                    .any(|q| (q[0] - p[0]).abs() < 1e-12 && (q[1] - p[1]).abs() < 1e-12));
            }
        }
        let fine = hier.finest();
        for e in 0..fine.elements.len() {
            assert!(fine.quadrature(e).iter().all(|q| q.weight > 0.0));
        }
        assert!((fine.volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_tags_propagate() {
        let mut hier = build_hierarchy(&unit_square(2), 2).unwrap();
        hier.tag_segment("notch", [0.0, 0.5], [0.5, 0.5]);
        for (l, mesh) in hier.levels().iter().enumerate() {
            let per_side = (2 << l) + 1;
            assert_eq!(mesh.boundary_sets["top"].len(), per_side);
            assert_eq!(mesh.boundary_sets["notch"].len(), (1 << l) + 1);
            for &k in &mesh.boundary_sets["top"] {
                assert_eq!(mesh.node_coords[k][1], 1.0);
            }
        }
    }

    #[test]
    fn dof_map_is_node_major() {
        let hier = build_hierarchy(&unit_square(1), 1).unwrap();
        let map = hier.finest().dof_map();
        assert_eq!(map.n(), 27);
        let mut seen = vec![false; map.n()];
        for node in 0..map.node_count {
            for f in 0..map.fields {
                let d = map.dof(node, f);
                assert!(!seen[d]);
                seen[d] = true;
                assert_eq!(map.node_field(d), (node, f));
            }
        }
        assert!(map.is_phase(2) && !map.is_phase(1));
    }

    #[test]
    fn length_scale_is_twice_mesh_size() {
        assert!((level_length_scale(0.00625) - 0.0125).abs() < 1e-15);
        assert!((level_length_scale(0.1) - 0.2).abs() < 1e-15);
        assert_eq!(level_length_scale(1.0), 2.0);
    }

    #[test]
    fn locate_returns_local_coordinates() {
        let mesh = MeshLevel::structured(unit_square(2), 0).unwrap();
        let (e, xi) = mesh.locate([0.75, 0.25]);
        assert_eq!(e, 1);
        assert!(xi[0].abs() < 1e-12 && xi[1].abs() < 1e-12);
        let (e, xi) = mesh.locate([1.0, 1.0]);
        assert_eq!(e, 3);
        assert_eq!(xi, [1.0, 1.0]);
    }
}
