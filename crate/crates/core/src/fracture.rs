//! Phase-field fracture energy with a spectral tension/compression split.
//!
//! Strains are handled in Voigt form `[εxx, εyy, γxy]` with engineering
//! shear; 1D problems are embedded as `[εxx, 0, 0]`. The split is
//! `ε = ε⁺ + ε⁻` with `ε⁻` stored *signed* (non-positive principal values),
//! so `σ = d(c)·σ⁺ + σ⁻`.

use crate::mesh::{MeshLevel, QuadPoint};
use crate::sparse::CsrMatrix;
use crate::tr::Objective;
use crate::{Error, Result};

/// Residual stiffness used unless configured otherwise.
pub const DEFAULT_RESIDUAL_STIFFNESS: f64 = 1e-8;

/// Eigenvalue gap below which the split tangent uses its coincident limit.
const EIGEN_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub gc: f64,
    pub k: f64,
    pub ls: f64,
}

impl MaterialParams {
    pub fn new(lambda: f64, mu: f64, gc: f64, k: f64, ls: f64) -> Result<Self> {
        let p = MaterialParams { lambda, mu, gc, k, ls };
        p.validate(2)?;
        Ok(p)
    }

    /// Brittle parameters of the tension/shear specimens.
    pub fn fracture_modes(ls: f64) -> Self {
        MaterialParams {
            lambda: 12.1,
            mu: 7.9,
            gc: 5e-4,
            k: DEFAULT_RESIDUAL_STIFFNESS,
            ls,
        }
    }

    /// Parameters of the pressurized specimen.
    pub fn pressurized(ls: f64) -> Self {
        MaterialParams {
            lambda: 12.0,
            mu: 8.0,
            gc: 1e-3,
            k: DEFAULT_RESIDUAL_STIFFNESS,
            ls,
        }
    }

    pub fn with_length_scale(mut self, ls: f64) -> Self {
        self.ls = ls;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidMaterial(m.to_string()));
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.lambda > -2.0 * self.mu / dim as f64) {
            return bad("lambda must exceed -2 mu / d");
        }
        if !(self.gc > 0.0) {
            return bad("Gc must be positive");
        }
        if !(self.k > 0.0 && self.k < 1e-2) {
            return bad("residual stiffness k must lie in (0, 1e-2)");
        }
        if !(self.ls > 0.0) {
            return bad("length scale must be positive");
        }
        Ok(())
    }
}

/// `⟨x⟩₊` with the tie assigned to tension.
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Spectral decomposition of a 2×2 symmetric strain.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSplit {
    pub psi_plus: f64,
    pub psi_minus: f64,
    pub eps_plus: [[f64; 2]; 2],
    pub eps_minus: [[f64; 2]; 2],
    /// Descending.
    pub principal_values: [f64; 2],
    pub principal_dirs: [[f64; 2]; 2],
}

struct Eigen {
    values: [f64; 2],
    cos: f64,
    sin: f64,
}

fn eigen_voigt(e: [f64; 3]) -> Eigen {
    let mean = 0.5 * (e[0] + e[1]);
    let half_diff = 0.5 * (e[0] - e[1]);
    let exy = 0.5 * e[2];
    let r = half_diff.hypot(exy);
    let phi = 0.5 * exy.atan2(half_diff);
    Eigen {
        values: [mean + r, mean - r],
        cos: phi.cos(),
        sin: phi.sin(),
    }
}

/// Energies and stresses of one strain state.
#[derive(Debug, Clone, Copy)]
struct PointSplit {
    psi_plus: f64,
    psi_minus: f64,
    sig_plus: [f64; 3],
    sig_minus: [f64; 3],
}

fn split_voigt(e: [f64; 3], p: &MaterialParams) -> PointSplit {
    let tr = e[0] + e[1];
    let eig = eigen_voigt(e);
    let (c, s) = (eig.cos, eig.sin);
    let (p1, p2) = (pos(eig.values[0]), pos(eig.values[1]));
    // ε⁺ = p1 n1⊗n1 + p2 n2⊗n2, n1 = (c, s), n2 = (−s, c); tensor components.
    let ep = [p1 * c * c + p2 * s * s, p1 * s * s + p2 * c * c, (p1 - p2) * c * s];
    let em = [e[0] - ep[0], e[1] - ep[1], 0.5 * e[2] - ep[2]];
    let trp = pos(tr);
    let trm = tr - trp;
    let psi_plus = 0.5 * p.lambda * trp * trp + p.mu * (p1 * p1 + p2 * p2);
    let (m1, m2) = (eig.values[0] - p1, eig.values[1] - p2);
    let psi_minus = 0.5 * p.lambda * trm * trm + p.mu * (m1 * m1 + m2 * m2);
    let lp = p.lambda * trp;
    let lm = p.lambda * trm;
    PointSplit {
        psi_plus,
        psi_minus,
        sig_plus: [lp + 2.0 * p.mu * ep[0], lp + 2.0 * p.mu * ep[1], 2.0 * p.mu * ep[2]],
        sig_minus: [lm + 2.0 * p.mu * em[0], lm + 2.0 * p.mu * em[1], 2.0 * p.mu * em[2]],
    }
}

type Mat3 = [[f64; 3]; 3];

fn isotropic_tangent(p: &MaterialParams) -> Mat3 {
    let (l, m) = (p.lambda, p.mu);
    [[l + 2.0 * m, l, 0.0], [l, l + 2.0 * m, 0.0], [0.0, 0.0, m]]
}

/// Tangents `dσ⁺/dε` and `dσ⁻/dε` in Voigt form (engineering shear input).
fn split_tangents(e: [f64; 3], p: &MaterialParams) -> (Mat3, Mat3) {
    let tr = e[0] + e[1];
    let eig = eigen_voigt(e);
    let (e1, e2) = (eig.values[0], eig.values[1]);
    let (h1, h2) = (heaviside(e1), heaviside(e2));
    let theta = if (e1 - e2).abs() < EIGEN_GAP {
        heaviside(0.5 * (e1 + e2))
    } else {
        (pos(e1) - pos(e2)) / (e1 - e2)
    };
    let ht = heaviside(tr);
    let (c, s) = (eig.cos, eig.sin);
    let cs = c * s;
    // Rows map Voigt strain to principal-frame tensor components.
    let t = [
        [c * c, s * s, cs],
        [s * s, c * c, -cs],
        [-2.0 * cs, 2.0 * cs, c * c - s * s],
    ];
    let t = [t[0], t[1], [t[2][0] * 0.5, t[2][1] * 0.5, t[2][2] * 0.5]];
    let l = p.lambda * ht;
    let q = [
        [l + 2.0 * p.mu * h1, l, 0.0],
        [l, l + 2.0 * p.mu * h2, 0.0],
        [0.0, 0.0, 4.0 * p.mu * theta],
    ];
    let mut plus = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    v += t[a][i] * q[a][b] * t[b][j];
                }
            }
            plus[i][j] = v;
        }
    }
    // Symmetrize exactly.
    for i in 0..3 {
        for j in 0..i {
            let m = 0.5 * (plus[i][j] + plus[j][i]);
            plus[i][j] = m;
            plus[j][i] = m;
        }
    }
    let full = isotropic_tangent(p);
    let mut minus = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            minus[i][j] = full[i][j] - plus[i][j];
        }
    }
    (plus, minus)
}

/// Splits a symmetric strain tensor into tensile and compressive parts.
pub fn split_energy(eps: [[f64; 2]; 2], params: &MaterialParams) -> StrainSplit {
    let e = [eps[0][0], eps[1][1], eps[0][1] + eps[1][0]];
    let sp = split_voigt(e, params);
    let eig = eigen_voigt(e);
    let (c, s) = (eig.cos, eig.sin);
    let (p1, p2) = (pos(eig.values[0]), pos(eig.values[1]));
    let ep = [
        [p1 * c * c + p2 * s * s, (p1 - p2) * c * s],
        [(p1 - p2) * c * s, p1 * s * s + p2 * c * c],
    ];
    let em = [
        [eps[0][0] - ep[0][0], eps[0][1] - ep[0][1]],
        [eps[1][0] - ep[1][0], eps[1][1] - ep[1][1]],
    ];
    StrainSplit {
        psi_plus: sp.psi_plus,
        psi_minus: sp.psi_minus,
        eps_plus: ep,
        eps_minus: em,
        principal_values: eig.values,
        principal_dirs: [[c, s], [-s, c]],
    }
}

/// Cauchy stress `[(1−c)²(1−k)+k]σ⁺ + σ⁻` (σ⁻ signed).
pub fn stress(eps: [[f64; 2]; 2], c: f64, params: &MaterialParams) -> [[f64; 2]; 2] {
    let e = [eps[0][0], eps[1][1], eps[0][1] + eps[1][0]];
    let sp = split_voigt(e, params);
    let d = (1.0 - c).powi(2) * (1.0 - params.k) + params.k;
    let v: Vec<f64> = (0..3).map(|i| d * sp.sig_plus[i] + sp.sig_minus[i]).collect();
    [[v[0], v[2]], [v[2], v[1]]]
}

/// Principal values (descending) of a symmetric 2×2 tensor.
pub fn principal_values(t: [[f64; 2]; 2]) -> [f64; 2] {
    eigen_voigt([t[0][0], t[1][1], 2.0 * t[0][1]]).values
}

/// Crack indicator: 0 once any finest-level phase value exceeds `threshold`.
pub fn indicator_chi1(c_fine: &[f64], threshold: f64) -> f64 {
    if c_fine.iter().any(|&c| c > threshold) {
        0.0
    } else {
        1.0
    }
}

/// Which functional a [`FractureModel`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyVariant {
    Standard,
    /// Elastic factor `(1−c)² + k`, fracture term scaled by `chi1`.
    Modified {
        chi1: f64,
    },
}

/// Energy split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub elastic: f64,
    pub fracture: f64,
    pub pressure: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.elastic + self.fracture + self.pressure
    }
}

/// Phase-field energy on one mesh level, with cached quadrature and a fixed
/// Hessian sparsity pattern.
#[derive(Debug, Clone)]
pub struct FractureModel {
    dim: usize,
    fields: usize,
    n: usize,
    elements: Vec<Vec<usize>>,
    quad: Vec<Vec<QuadPoint>>,
    params: MaterialParams,
    pressure: Option<f64>,
    variant: EnergyVariant,
    pattern: CsrMatrix,
    scatter: Vec<Vec<usize>>,
}

impl FractureModel {
    pub fn new(mesh: &MeshLevel, params: MaterialParams) -> Result<Self> {
        params.validate(mesh.dim)?;
        let fields = mesh.dofs_per_node;
        let n = mesh.n_dofs();
        let quad: Vec<Vec<QuadPoint>> = (0..mesh.elements.len()).map(|e| mesh.quadrature(e)).collect();
        let elements = mesh.elements.clone();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in &elements {
            let dofs = element_dofs(el, fields);
            for &i in &dofs {
                rows[i].extend_from_slice(&dofs);
            }
        }
        let pattern = CsrMatrix::from_pattern(n, n, &rows);
        let scatter = elements
            .iter()
            .map(|el| {
                let dofs = element_dofs(el, fields);
                let mut pos = Vec::with_capacity(dofs.len() * dofs.len());
                for &i in &dofs {
                    for &j in &dofs {
                        pos.push(pattern.position(i, j).expect("pattern covers element"));
                    }
                }
                pos
            })
            .collect();
        Ok(FractureModel {
            dim: mesh.dim,
            fields,
            n,
            elements,
            quad,
            params,
            pressure: None,
            variant: EnergyVariant::Standard,
            pattern,
            scatter,
        })
    }

    pub fn with_pressure(mut self, pressure: Option<f64>) -> Self {
        self.pressure = pressure;
        self
    }

    pub fn with_variant(mut self, variant: EnergyVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn set_pressure(&mut self, pressure: Option<f64>) {
        self.pressure = pressure;
    }

    pub fn set_variant(&mut self, variant: EnergyVariant) {
        self.variant = variant;
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn variant(&self) -> EnergyVariant {
        self.variant
    }

    pub fn pressure(&self) -> Option<f64> {
        self.pressure
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Degradation scale `a` in `a(1−c)² + k` and fracture weight.
    fn factors(&self, variant: EnergyVariant) -> (f64, f64) {
        match variant {
            EnergyVariant::Standard => (1.0 - self.params.k, 1.0),
            EnergyVariant::Modified { chi1 } => (1.0, chi1),
        }
    }

    fn gather(&self, el: &[usize], x: &[f64], local: &mut [f64; 12]) {
        for (a, &node) in el.iter().enumerate() {
            for f in 0..self.fields {
                local[a * self.fields + f] = x[node * self.fields + f];
            }
        }
    }

    /// Strain (Voigt), div u, c and ∇c at a quadrature point.
    fn point_state(&self, q: &QuadPoint, local: &[f64; 12]) -> ([f64; 3], f64, f64, [f64; 2]) {
        let nf = self.fields;
        let pf = self.dim;
        let mut e = [0.0; 3];
        let mut c = 0.0;
        let mut gc = [0.0; 2];
        for (a, g) in q.grad.iter().enumerate() {
            let ux = local[a * nf];
            c += q.shape[a] * local[a * nf + pf];
            gc[0] += g[0] * local[a * nf + pf];
            gc[1] += g[1] * local[a * nf + pf];
            e[0] += g[0] * ux;
            if self.dim == 2 {
                let uy = local[a * nf + 1];
                e[1] += g[1] * uy;
                e[2] += g[1] * ux + g[0] * uy;
            }
        }
        (e, e[0] + e[1], c, gc)
    }

    /// Voigt strain rows for the displacement DOFs of node `a`.
    fn b_rows(&self, g: [f64; 2]) -> [[f64; 3]; 2] {
        if self.dim == 2 {
            [[g[0], 0.0, g[1]], [0.0, g[1], g[0]]]
        } else {
            [[g[0], 0.0, 0.0], [0.0; 3]]
        }
    }

    pub fn energy_parts(&self, x: &[f64]) -> EnergyParts {
        self.energy_parts_with(x, self.variant)
    }

    pub fn energy_parts_with(&self, x: &[f64], variant: EnergyVariant) -> EnergyParts {
        assert_eq!(x.len(), self.n, "state length");
        let (a_deg, w_f) = self.factors(variant);
        let p = &self.params;
        let mut parts = EnergyParts::default();
        let mut local = [0.0; 12];
        for (el, quad) in self.elements.iter().zip(&self.quad) {
            self.gather(el, x, &mut local);
            for q in quad {
                let (e, div, c, gc) = self.point_state(q, &local);
                let sp = split_voigt(e, p);
                let omc = 1.0 - c;
                let deg = a_deg * omc * omc + p.k;
                parts.elastic += q.weight * (deg * sp.psi_plus + sp.psi_minus);
                parts.fracture +=
                    q.weight * w_f * p.gc * (c * c / (2.0 * p.ls) + 0.5 * p.ls * (gc[0] * gc[0] + gc[1] * gc[1]));
                if let Some(pr) = self.pressure {
                    parts.pressure += q.weight * omc * omc * pr * div;
                }
            }
        }
        parts
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.energy_parts(x).total()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_with(x, self.variant)
    }

    pub fn gradient_with(&self, x: &[f64], variant: EnergyVariant) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "state length");
        let (a_deg, w_f) = self.factors(variant);
        let p = &self.params;
        let nf = self.fields;
        let pf = self.dim;
        let mut g = vec![0.0; self.n];
        let mut local = [0.0; 12];
        for (el, quad) in self.elements.iter().zip(&self.quad) {
            self.gather(el, x, &mut local);
            let mut r = [0.0; 12];
            for q in quad {
                let (e, div, c, gc) = self.point_state(q, &local);
                let sp = split_voigt(e, p);
                let omc = 1.0 - c;
                let deg = a_deg * omc * omc + p.k;
                let ddeg = -2.0 * a_deg * omc;
                let mut sig = [0.0; 3];
                for i in 0..3 {
                    sig[i] = deg * sp.sig_plus[i] + sp.sig_minus[i];
                }
                let pr = self.pressure.unwrap_or(0.0);
                for (a, gr) in q.grad.iter().enumerate() {
                    let b = self.b_rows(*gr);
                    for f in 0..self.dim {
                        let mut v = b[f][0] * sig[0] + b[f][1] * sig[1] + b[f][2] * sig[2];
                        v += pr * omc * omc * gr[f];
                        r[a * nf + f] += q.weight * v;
                    }
                    let w = q.shape[a];
                    let vc = ddeg * sp.psi_plus * w
                        + w_f * p.gc * (c * w / p.ls + p.ls * (gc[0] * gr[0] + gc[1] * gr[1]))
                        - 2.0 * pr * omc * div * w;
                    r[a * nf + pf] += q.weight * vc;
                }
            }
            for (a, &node) in el.iter().enumerate() {
                for f in 0..nf {
                    g[node * nf + f] += r[a * nf + f];
                }
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> CsrMatrix {
        self.hessian_with(x, self.variant)
    }

    pub fn hessian_with(&self, x: &[f64], variant: EnergyVariant) -> CsrMatrix {
        assert_eq!(x.len(), self.n, "state length");
        let (a_deg, w_f) = self.factors(variant);
        let p = &self.params;
        let nf = self.fields;
        let pf = self.dim;
        let mut h = self.pattern.clone();
        let mut local = [0.0; 12];
        for ((el, quad), scatter) in self.elements.iter().zip(&self.quad).zip(&self.scatter) {
            self.gather(el, x, &mut local);
            let nloc = el.len() * nf;
            let mut ke = [[0.0; 12]; 12];
            for q in quad {
                let (e, div, c, _) = self.point_state(q, &local);
                let sp = split_voigt(e, p);
                let (tp, tm) = split_tangents(e, p);
                let omc = 1.0 - c;
                let deg = a_deg * omc * omc + p.k;
                let ddeg = -2.0 * a_deg * omc;
                let d2deg = 2.0 * a_deg;
                let pr = self.pressure.unwrap_or(0.0);
                let mut dmat = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        dmat[i][j] = deg * tp[i][j] + tm[i][j];
                    }
                }
                let wq = q.weight;
                for (a, ga) in q.grad.iter().enumerate() {
                    let ba = self.b_rows(*ga);
                    let na = q.shape[a];
                    for (b, gb) in q.grad.iter().enumerate() {
                        let bb = self.b_rows(*gb);
                        let nb = q.shape[b];
                        // uu
                        for fa in 0..self.dim {
                            let mut db = [0.0; 3];
                            for i in 0..3 {
                                db[i] = ba[fa][0] * dmat[0][i] + ba[fa][1] * dmat[1][i] + ba[fa][2] * dmat[2][i];
                            }
                            for fb in 0..self.dim {
                                let v = db[0] * bb[fb][0] + db[1] * bb[fb][1] + db[2] * bb[fb][2];
                                ke[a * nf + fa][b * nf + fb] += wq * v;
                            }
                            // u_a – c_b coupling
                            let sv =
                                ba[fa][0] * sp.sig_plus[0] + ba[fa][1] * sp.sig_plus[1] + ba[fa][2] * sp.sig_plus[2];
                            let v = ddeg * sv * nb - 2.0 * pr * omc * ga[fa] * nb;
                            ke[a * nf + fa][b * nf + pf] += wq * v;
                            ke[b * nf + pf][a * nf + fa] += wq * v;
                        }
                        // cc
                        let v = d2deg * sp.psi_plus * na * nb
                            + w_f * p.gc * (na * nb / p.ls + p.ls * (ga[0] * gb[0] + ga[1] * gb[1]))
                            + 2.0 * pr * div * na * nb;
                        ke[a * nf + pf][b * nf + pf] += wq * v;
                    }
                }
            }
            let vals = h.values_mut();
            for i in 0..nloc {
                for j in 0..nloc {
                    let v = if i <= j { ke[i][j] } else { ke[j][i] };
                    vals[scatter[i * nloc + j]] += v;
                }
            }
        }
        h
    }

    /// Nodal averages of the principal stresses (descending), for output.
    pub fn nodal_principal_stresses(&self, x: &[f64]) -> Vec<[f64; 2]> {
        let nodes = self.n / self.fields;
        let mut acc = vec![[0.0; 2]; nodes];
        let mut count = vec![0usize; nodes];
        let mut local = [0.0; 12];
        for (el, quad) in self.elements.iter().zip(&self.quad) {
            self.gather(el, x, &mut local);
            let mut mean = [0.0; 2];
            for q in quad {
                let (e, _, c, _) = self.point_state(q, &local);
                let eps = [[e[0], 0.5 * e[2]], [0.5 * e[2], e[1]]];
                let pv = principal_values(stress(eps, c.clamp(0.0, 1.0), &self.params));
                mean[0] += pv[0] / quad.len() as f64;
                mean[1] += pv[1] / quad.len() as f64;
            }
            for &node in el {
                acc[node][0] += mean[0];
                acc[node][1] += mean[1];
                count[node] += 1;
            }
        }
        acc.iter()
            .zip(&count)
            .map(|(a, &c)| [a[0] / c as f64, a[1] / c as f64])
            .collect()
    }
}

/// Borrowed evaluation of a model under another energy variant.
#[derive(Debug, Clone, Copy)]
pub struct FractureView<'a> {
    pub model: &'a FractureModel,
    pub variant: EnergyVariant,
}

impl Objective for FractureView<'_> {
    fn dim(&self) -> usize {
        self.model.n()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.model.energy_parts_with(x, self.variant).total()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.model.gradient_with(x, self.variant)
    }
    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        self.model.hessian_with(x, self.variant)
    }
}

fn element_dofs(el: &[usize], fields: usize) -> Vec<usize> {
    el.iter()
        .flat_map(|&node| (0..fields).map(move |f| node * fields + f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_hierarchy, GridSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn params() -> MaterialParams {
        MaterialParams::fracture_modes(0.5)
    }

    fn mesh2d(cells: usize) -> MeshLevel {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells]).unwrap();
        build_hierarchy(&g, 1).unwrap().level(0).unwrap().clone()
    }

    fn random_state(model: &FractureModel, rng: &mut impl Rng) -> Vec<f64> {
        (0..model.n())
            .map(|i| {
                if i % 3 == 2 {
                    rng.gen_range(0.0..1.0)
                } else {
                    rng.gen_range(-0.1..0.1)
                }
            })
            .collect()
    }

    #[test]
    fn rejects_bad_material() {
        assert!(MaterialParams::new(12.1, -1.0, 5e-4, 1e-8, 1.0).is_err());
        assert!(MaterialParams::new(12.1, 7.9, 0.0, 1e-8, 1.0).is_err());
        assert!(MaterialParams::new(-20.0, 7.9, 5e-4, 1e-8, 1.0).is_err());
        assert!(MaterialParams::new(12.1, 7.9, 5e-4, 1e-8, 1.0).is_ok());
    }

    #[test]
    fn uniaxial_tension_split() {
        let p = params();
        let a = 0.01;
        let s = split_energy([[a, 0.0], [0.0, 0.0]], &p);
        assert_eq!(s.psi_minus, 0.0);
        assert_relative_eq!(s.psi_plus, 0.5 * p.lambda * a * a + p.mu * a * a, max_relative = 1e-14);
    }

    #[test]
    fn compression_split() {
        let p = params();
        let s = split_energy([[-0.01, 0.0], [0.0, -0.01]], &p);
        assert_eq!(s.psi_plus, 0.0);
        assert!(s.psi_minus > 0.0);
    }

    #[test]
    fn shear_split_is_symmetric() {
        let p = params();
        let g = 0.02;
        let s = split_energy([[0.0, g / 2.0], [g / 2.0, 0.0]], &p);
        assert_relative_eq!(s.principal_values[0], g / 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.principal_values[1], -g / 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.psi_plus, p.mu * g * g / 4.0, max_relative = 1e-12);
        assert_relative_eq!(s.psi_minus, p.mu * g * g / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn split_reconstructs_strain() {
        let p = params();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let eps = {
                let (a, b, c): (f64, f64, f64) = (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                [[a, c], [c, b]]
            };
            let s = split_energy(eps, &p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s.eps_plus[i][j] + s.eps_minus[i][j] - eps[i][j]).abs() < 1e-12);
                }
            }
            assert!(s.psi_plus >= 0.0 && s.psi_minus >= 0.0);
            let tr = eps[0][0] + eps[1][1];
            let full =
                0.5 * p.lambda * tr * tr + p.mu * (eps[0][0].powi(2) + eps[1][1].powi(2) + 2.0 * eps[0][1].powi(2));
            let same_sign = s.principal_values.iter().all(|v| v * tr >= 0.0);
            if same_sign {
                assert_relative_eq!(s.psi_plus + s.psi_minus, full, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let p = params();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let e: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let (tp, tm) = split_tangents(e, &p);
            let h = 1e-7;
            for j in 0..3 {
                let mut ep = e;
                let mut em = e;
                ep[j] += h;
                em[j] -= h;
                let (sp, sm) = (split_voigt(ep, &p), split_voigt(em, &p));
                for i in 0..3 {
                    let fd_p = (sp.sig_plus[i] - sm.sig_plus[i]) / (2.0 * h);
                    let fd_m = (sp.sig_minus[i] - sm.sig_minus[i]) / (2.0 * h);
                    assert!((fd_p - tp[i][j]).abs() < 1e-5 * (1.0 + fd_p.abs()), "{i}{j}");
                    assert!((fd_m - tm[i][j]).abs() < 1e-5 * (1.0 + fd_m.abs()));
                }
            }
            // stress is the derivative of the energy density
            for j in 0..3 {
                let mut ep = e;
                let mut em = e;
                ep[j] += 1e-7;
                em[j] -= 1e-7;
                let fd = (split_voigt(ep, &p).psi_plus - split_voigt(em, &p).psi_plus) / 2e-7;
                assert!((fd - split_voigt(e, &p).sig_plus[j]).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn stress_limits() {
        let p = MaterialParams { k: 1e-9, ..params() };
        let s = stress([[0.01, 0.0], [0.0, 0.005]], 1.0, &p);
        assert!(s.iter().flatten().all(|v| v.abs() < 1e-9));
        assert_eq!(stress([[0.0; 2]; 2], 0.3, &p), [[0.0; 2]; 2]);
        let eps = [[0.01, 0.002], [0.002, 0.006]];
        let s = stress(eps, 0.0, &p);
        let tr = 0.016;
        let lin = [
            [p.lambda * tr + 2.0 * p.mu * 0.01, 2.0 * p.mu * 0.002],
            [2.0 * p.mu * 0.002, p.lambda * tr + 2.0 * p.mu * 0.006],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(s[i][j], lin[i][j], max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn chi1_indicator() {
        assert_eq!(indicator_chi1(&[0.0; 4], 0.85), 1.0);
        assert_eq!(indicator_chi1(&[0.0, 0.9], 0.85), 0.0);
        assert_eq!(indicator_chi1(&[0.85], 0.85), 1.0);
    }

    #[test]
    fn zero_state_is_unloaded() {
        let m = FractureModel::new(&mesh2d(3), params()).unwrap();
        let x = vec![0.0; m.n()];
        assert_eq!(m.energy(&x), 0.0);
        assert!(m.gradient(&x).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fully_broken_reaction_energy() {
        let p = params();
        let m = FractureModel::new(&mesh2d(3), p).unwrap();
        let x: Vec<f64> = (0..m.n()).map(|i| if i % 3 == 2 { 1.0 } else { 0.0 }).collect();
        assert_relative_eq!(m.energy(&x), p.gc / (2.0 * p.ls), max_relative = 1e-12);
        let g = m.gradient(&x);
        assert!(g.iter().enumerate().filter(|(i, _)| i % 3 != 2).all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn modified_energy_without_fracture_term() {
        let m = FractureModel::new(&mesh2d(2), params())
            .unwrap()
            .with_variant(EnergyVariant::Modified { chi1: 0.0 });
        let x: Vec<f64> = (0..m.n()).map(|i| if i % 3 == 2 { 0.4 } else { 0.0 }).collect();
        assert_eq!(m.energy(&x), 0.0);
    }

    fn check_derivatives(model: &FractureModel, seed: u64) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let x = random_state(model, &mut rng);
        let g = model.gradient(&x);
        let mut fd = vec![0.0; x.len()];
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (model.energy(&xp) - model.energy(&xm)) / (2.0 * h);
        }
        let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err < 1e-6 * scale.max(1e-12), "gradient {err} / {scale}");

        let v: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hv = model.hessian(&x).mul_vec(&v);
        let t = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        let (gp, gm) = (model.gradient(&xp), model.gradient(&xm));
        let fdv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * t)).collect();
        let err: f64 = hv.iter().zip(&fdv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = hv.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err < 1e-5 * scale, "hessian {err} / {scale}");
    }

    #[test]
    fn derivatives_all_variants() {
        let mesh = mesh2d(3);
        for (s, variant) in [
            EnergyVariant::Standard,
            EnergyVariant::Modified { chi1: 1.0 },
            EnergyVariant::Modified { chi1: 0.0 },
        ]
        .into_iter()
        .enumerate()
        {
            for pressure in [None, Some(2.0)] {
                let m = FractureModel::new(&mesh, params())
                    .unwrap()
                    .with_variant(variant)
                    .with_pressure(pressure);
                check_derivatives(&m, 10 + s as u64);
            }
        }
    }

    #[test]
    fn derivatives_1d() {
        let g = GridSpec::new(vec![0.0], vec![1.0], vec![6]).unwrap();
        let mesh = build_hierarchy(&g, 1).unwrap().level(1).unwrap().clone();
        let m = FractureModel::new(&mesh, params()).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let x: Vec<f64> = (0..m.n())
            .map(|i| {
                if i % 2 == 1 {
                    rng.gen_range(0.0..1.0)
                } else {
                    rng.gen_range(-0.1..0.1)
                }
            })
            .collect();
        let g = m.gradient(&x);
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (m.energy(&xp) - m.energy(&xm)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()));
        }
    }

    #[test]
    fn hessian_is_exactly_symmetric() {
        let m = FractureModel::new(&mesh2d(3), params())
            .unwrap()
            .with_pressure(Some(1.0));
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        let x = random_state(&m, &mut rng);
        let h = m.hessian(&x);
        assert_eq!(h.max_abs_diff(&h.transpose()), 0.0);
    }

    #[test]
    fn undeformed_uu_block_is_isotropic() {
        let mesh = mesh2d(2);
        let p = params();
        let m = FractureModel::new(&mesh, p).unwrap();
        let c = 0.3;
        let x: Vec<f64> = (0..m.n()).map(|i| if i % 3 == 2 { c } else { 0.0 }).collect();
        let h = m.hessian(&x);
        let undamaged = m.hessian(&vec![0.0; m.n()]);
        let d = (1.0 - c) * (1.0 - c) * (1.0 - p.k) + p.k;
        for i in (0..m.n()).filter(|i| i % 3 != 2) {
            for j in (0..m.n()).filter(|j| j % 3 != 2) {
                assert!((h.get(i, j) - d * undamaged.get(i, j)).abs() < 1e-12 * (1.0 + undamaged.get(i, j).abs()));
            }
        }
    }
}
