//! Bound-constrained trust-region minimization with an ℓ∞ trust region.
//!
//! Two subproblem solvers are available: a Jacobi-preconditioned projected
//! CG (inexact, used for smoothing and single-level runs) and an active-set
//! projected Newton method with a banded Cholesky factorization (accurate,
//! used on the coarsest level).

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use crate::fracture::FractureModel;
use crate::sparse::{dot, norm2, BandedCholesky, CsrMatrix};
use crate::{Error, Result};

/// A twice differentiable objective on `R^n`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> CsrMatrix;
}

impl Objective for FractureModel {
    fn dim(&self) -> usize {
        self.n()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.energy(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        FractureModel::gradient(self, x)
    }
    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        FractureModel::hessian(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta0: f64,
    pub max_iterations: usize,
    pub cg_iterations: usize,
    /// Relative residual reduction that ends projected CG.
    pub cg_tolerance: f64,
    pub eps_g: f64,
    pub eps_s: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            eta1: 0.1,
            eta2: 0.75,
            gamma1: 0.5,
            gamma2: 2.0,
            delta0: 1.0,
            max_iterations: 10_000,
            cg_iterations: 10,
            cg_tolerance: 1e-8,
            eps_g: 1e-8,
            eps_s: 1e-14,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.eta1
            && self.eta1 <= self.eta2
            && self.eta2 < 1.0
            && 0.0 < self.gamma1
            && self.gamma1 < 1.0
            && self.gamma2 > 1.0
            && self.delta0 > 0.0
            && self.cg_iterations > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid trust-region constants".into()))
        }
    }
}

/// Componentwise box `lower ≤ x ≤ upper`; entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
                context: "box bounds",
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::Infeasible {
                index: i,
                value: f64::NAN,
                lower: lower[i],
                upper: upper[i],
            });
        }
        Ok(BoxBounds { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        BoxBounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| v.max(l).min(u))
            .collect()
    }

    /// Largest bound violation of `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Smallest lower slack `x − lower` over all components.
    pub fn min_lower_slack(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.lower)
            .map(|(v, l)| v - l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }
}

/// Step bounds `[max(lower − x, −Δ), min(upper − x, Δ)]`.
pub fn working_set(x: &[f64], bounds: &BoxBounds, delta: f64) -> Result<BoxBounds> {
    let mut lo = Vec::with_capacity(x.len());
    let mut hi = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let (l, u) = (bounds.lower[i], bounds.upper[i]);
        let tol = 1e-10 * (1.0 + xi.abs());
        if xi < l - tol || xi > u + tol {
            return Err(Error::Infeasible {
                index: i,
                value: xi,
                lower: l,
                upper: u,
            });
        }
        lo.push((l - xi).max(-delta).min(0.0));
        hi.push((u - xi).min(delta).max(0.0));
    }
    Ok(BoxBounds { lower: lo, upper: hi })
}

fn jacobi(h: &CsrMatrix) -> Vec<f64> {
    h.diagonal()
        .into_iter()
        .map(|d| if d.abs() > 1e-300 { d.abs() } else { 1.0 })
        .collect()
}

/// Outcome of one quadratic subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub s: Vec<f64>,
    /// `m(0) − m(s) ≥ 0`.
    pub decrease: f64,
    /// Decrease of the projected Cauchy point.
    pub cauchy_decrease: f64,
}

/// Projected-gradient arc search for a step from `s` along `−D⁻¹r`, with
/// `r = g + Hs`. Returns the new step if the model decreased.
fn projected_arc(
    g: &[f64],
    h: &CsrMatrix,
    d: &[f64],
    sb: &BoxBounds,
    s: &[f64],
    r: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = g.len();
    let p: Vec<f64> = (0..n)
        .map(|i| {
            let v = -r[i] / d[i];
            // drop components that immediately leave the box
            if (v < 0.0 && s[i] <= sb.lower[i]) || (v > 0.0 && s[i] >= sb.upper[i]) {
                0.0
            } else {
                v
            }
        })
        .collect();
    let slope = dot(r, &p);
    if !(slope < 0.0) {
        return None;
    }
    let hp = h.mul_vec(&p);
    let curv = dot(&p, &hp);
    let mut t_max: f64 = 0.0;
    for i in 0..n {
        if p[i] > 0.0 {
            t_max = t_max.max((sb.upper[i] - s[i]) / p[i]);
        } else if p[i] < 0.0 {
            t_max = t_max.max((sb.lower[i] - s[i]) / p[i]);
        }
    }
    let mut t = if curv > 0.0 { (-slope / curv).min(t_max) } else { t_max };
    if !t.is_finite() || t <= 0.0 {
        return None;
    }
    for _ in 0..60 {
        let trial: Vec<f64> = (0..n)
            .map(|i| (s[i] + t * p[i]).max(sb.lower[i]).min(sb.upper[i]))
            .collect();
        let ds: Vec<f64> = trial.iter().zip(s).map(|(a, b)| a - b).collect();
        let hds = h.mul_vec(&ds);
        // m(s + ds) − m(s) = rᵀds + ½ dsᵀH ds
        let change = dot(r, &ds) + 0.5 * dot(&ds, &hds);
        if change < 0.0 && change <= 0.1 * dot(r, &ds) {
            let r_new: Vec<f64> = r.iter().zip(&hds).map(|(a, b)| a + b).collect();
            return Some((trial, r_new));
        }
        t *= 0.5;
    }
    None
}

/// Approximately minimizes `⟨g,s⟩ + ½⟨s,Hs⟩` over the box `sb` (which must
/// contain 0) by a projected Cauchy point followed by Jacobi-preconditioned
/// CG on the free variables, restarting whenever the active face changes.
pub fn solve_subproblem(
    g: &[f64],
    h: &CsrMatrix,
    sb: &BoxBounds,
    max_iterations: usize,
    tolerance: f64,
) -> SubproblemResult {
    let n = g.len();
    let zero = SubproblemResult {
        s: vec![0.0; n],
        decrease: 0.0,
        cauchy_decrease: 0.0,
    };
    let g_norm = norm2(g);
    if g_norm == 0.0 {
        return zero;
    }
    let d = jacobi(h);
    let (mut s, mut r) = match projected_arc(g, h, &d, sb, &vec![0.0; n], g) {
        Some(v) => v,
        None => return zero,
    };
    let model = |s: &[f64], r: &[f64]| 0.5 * (dot(g, s) + dot(r, s));
    let cauchy_decrease = -model(&s, &r);
    let mut iterations = 1;
    let target = tolerance * g_norm;

    'outer: while iterations < max_iterations {
        let free: Vec<bool> = (0..n).map(|i| s[i] > sb.lower[i] && s[i] < sb.upper[i]).collect();
        let res_free = |r: &[f64]| -> f64 { (0..n).filter(|&i| free[i]).map(|i| r[i] * r[i]).sum::<f64>().sqrt() };
        let mut converged = res_free(&r) <= target;
        if !converged {
            let mut z: Vec<f64> = (0..n).map(|i| if free[i] { r[i] / d[i] } else { 0.0 }).collect();
            let mut p: Vec<f64> = z.iter().map(|v| -v).collect();
            let mut rz = dot(&r, &z);
            while iterations < max_iterations {
                iterations += 1;
                let q = h.mul_vec(&p);
                let curv = dot(&p, &q);
                let mut alpha_max = f64::INFINITY;
                let mut blocking = None;
                for i in 0..n {
                    let a = if p[i] > 0.0 {
                        (sb.upper[i] - s[i]) / p[i]
                    } else if p[i] < 0.0 {
                        (sb.lower[i] - s[i]) / p[i]
                    } else {
                        continue;
                    };
                    if a < alpha_max {
                        alpha_max = a;
                        blocking = Some(i);
                    }
                }
                let alpha = if curv > 0.0 { rz / curv } else { f64::INFINITY };
                if alpha < alpha_max {
                    for i in 0..n {
                        s[i] += alpha * p[i];
                        r[i] += alpha * q[i];
                    }
                    if res_free(&r) <= target {
                        converged = true;
                        break;
                    }
                    for i in 0..n {
                        z[i] = if free[i] { r[i] / d[i] } else { 0.0 };
                    }
                    let rz_new = dot(&r, &z);
                    let beta = rz_new / rz;
                    rz = rz_new;
                    for i in 0..n {
                        p[i] = -z[i] + beta * p[i];
                    }
                    continue;
                }
                // Step reaches the boundary of the box: compare the
                // truncated step with the projection of the full one.
                let mut best_s: Vec<f64> = (0..n).map(|i| s[i] + alpha_max * p[i]).collect();
                if let Some(b) = blocking {
                    best_s[b] = if p[b] > 0.0 { sb.upper[b] } else { sb.lower[b] };
                }
                for i in 0..n {
                    best_s[i] = best_s[i].max(sb.lower[i]).min(sb.upper[i]);
                }
                let mut best_r: Vec<f64> = g.iter().zip(h.mul_vec(&best_s)).map(|(a, b)| a + b).collect();
                if alpha.is_finite() {
                    let proj: Vec<f64> = (0..n)
                        .map(|i| (s[i] + alpha * p[i]).max(sb.lower[i]).min(sb.upper[i]))
                        .collect();
                    let proj_r: Vec<f64> = g.iter().zip(h.mul_vec(&proj)).map(|(a, b)| a + b).collect();
                    if model(&proj, &proj_r) < model(&best_s, &best_r) {
                        best_s = proj;
                        best_r = proj_r;
                    }
                }
                if model(&best_s, &best_r) <= model(&s, &r) {
                    s = best_s;
                    r = best_r;
                    continue 'outer;
                }
                break 'outer;
            }
        }
        if converged && iterations < max_iterations {
            // Face optimal: try to leave it along the projected gradient.
            iterations += 1;
            match projected_arc(g, h, &d, sb, &s, &r) {
                Some((s2, r2)) => {
                    s = s2;
                    r = r2;
                }
                None => break,
            }
        } else if converged {
            break;
        }
    }

    let m = model(&s, &r);
    if !(m < 0.0) {
        return SubproblemResult {
            cauchy_decrease,
            ..zero
        };
    }
    SubproblemResult {
        s,
        decrease: -m,
        cauchy_decrease,
    }
}

/// Minimizes the box-constrained quadratic model accurately by projected
/// Newton iterations with an ε-active set, until the KKT conditions hold.
///
/// When the reduced Hessian is not positive definite, the Newton direction
/// comes from a modified Cholesky factorization of `H + E` (non-negative
/// diagonal `E`, chosen pivot by pivot); the projected line search on the
/// true model keeps every step a decrease.
///
/// Unknowns are renumbered by reverse Cuthill–McKee first, which narrows the
/// band of the factorizations.
pub fn active_set_qp(g: &[f64], h: &CsrMatrix, sb: &BoxBounds, kkt_tol: f64) -> SubproblemResult {
    let perm = h.reverse_cuthill_mckee();
    let hp = h.permute_symmetric(&perm);
    if hp.bandwidth() >= h.bandwidth() {
        return active_set_qp_ordered(g, h, sb, kkt_tol);
    }
    let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let sbp = BoxBounds {
        lower: pick(&sb.lower),
        upper: pick(&sb.upper),
    };
    let mut res = active_set_qp_ordered(&pick(g), &hp, &sbp, kkt_tol);
    let mut s = vec![0.0; g.len()];
    for (new, &old) in perm.iter().enumerate() {
        s[old] = res.s[new];
    }
    res.s = s;
    res
}

fn active_set_qp_ordered(g: &[f64], h: &CsrMatrix, sb: &BoxBounds, kkt_tol: f64) -> SubproblemResult {
    let n = g.len();
    let mut s = vec![0.0; n];
    let mut r = g.to_vec();
    let max_diag = h.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = kkt_tol * (1.0 + norm2(g));
    let mut cauchy_decrease = None;
    let mut logged = false;
    let factor = |free: &[bool]| {
        let (bw, band) = BandedCholesky::band_from_csr(h, free, 0.0);
        BandedCholesky::factor_band(n, bw, band)
    };
    let modified_factor = |free: &[bool]| {
        let (bw, band) = BandedCholesky::band_from_csr(h, free, 0.0);
        BandedCholesky::factor_modified(n, bw, band, 1e-8 * (1.0 + max_diag)).0
    };
    for _ in 0..500 {
        let pg: Vec<f64> = (0..n)
            .map(|i| (s[i] - r[i]).max(sb.lower[i]).min(sb.upper[i]) - s[i])
            .collect();
        if norm2(&pg) <= tol {
            break;
        }
        // ε-active set
        let eps = norm2(&pg).min(1e-3);
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = s[i] <= sb.lower[i] + eps && r[i] > 0.0;
                let at_hi = s[i] >= sb.upper[i] - eps && r[i] < 0.0;
                !(at_lo || at_hi || sb.lower[i] == sb.upper[i])
            })
            .collect();
        let chol = factor(&free).unwrap_or_else(|| {
            if !logged {
                debug!("reduced coarse system not positive definite; modifying pivots");
                logged = true;
            }
            modified_factor(&free)
        });
        let rhs: Vec<f64> = (0..n).map(|i| if free[i] { -r[i] } else { 0.0 }).collect();
        let dir = chol.solve(&rhs);
        // Active components move by the projected gradient direction.
        let dir: Vec<f64> = (0..n).map(|i| if free[i] { dir[i] } else { -r[i] }).collect();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n)
                .map(|i| (s[i] + t * dir[i]).max(sb.lower[i]).min(sb.upper[i]))
                .collect();
            let ds: Vec<f64> = trial.iter().zip(&s).map(|(a, b)| a - b).collect();
            let hds = h.mul_vec(&ds);
            let change = dot(&r, &ds) + 0.5 * dot(&ds, &hds);
            if change < 0.0 && change <= 1e-4 * dot(&r, &ds) {
                s = trial;
                for i in 0..n {
                    r[i] += hds[i];
                }
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if cauchy_decrease.is_none() {
            cauchy_decrease = Some(-0.5 * (dot(g, &s) + dot(&r, &s)));
        }
        if !moved {
            break;
        }
    }
    let m = 0.5 * (dot(g, &s) + dot(&r, &s));
    if !(m < 0.0) {
        return SubproblemResult {
            s: vec![0.0; n],
            decrease: 0.0,
            cauchy_decrease: 0.0,
        };
    }
    SubproblemResult {
        s,
        decrease: -m,
        cauchy_decrease: cauchy_decrease.unwrap_or(-m),
    }
}

/// A predicted reduction is negligible when it is not positive or falls below
/// the floating-point resolution of the objective value itself.
pub(crate) fn negligible_reduction(predicted: f64, f_old: f64) -> bool {
    !(predicted > 0.0 && predicted >= 1e-16 * f_old.abs())
}

/// Actual over predicted reduction; `−∞` if the prediction is negligible or
/// the trial value is not finite.
pub fn tr_ratio(f_old: f64, f_new: f64, m0: f64, m_s: f64) -> f64 {
    let predicted = m0 - m_s;
    if !f_new.is_finite() || negligible_reduction(predicted, f_old) {
        return f64::NEG_INFINITY;
    }
    (f_old - f_new) / predicted
}

pub fn radius_update(rho: f64, delta: f64, config: &TrustRegionConfig) -> f64 {
    if rho < config.eta1 {
        config.gamma1 * delta
    } else if rho > config.eta2 {
        config.gamma2 * delta
    } else {
        delta
    }
}

/// `‖P(x − g) − x‖₂` with `P` the projection onto the box.
pub fn criticality(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (&xi, &gi))| {
            let p = (xi - gi).max(bounds.lower[i]).min(bounds.upper[i]);
            (p - xi) * (p - xi)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Criticality,
    StepSize,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct TRResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub delta: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub criticality: f64,
}

/// One trust-region iteration, as reported to trace callbacks.
#[derive(Debug, Clone, Copy)]
pub struct TrIterate {
    pub iteration: usize,
    pub f: f64,
    pub criticality: f64,
    pub delta: f64,
    pub rho: f64,
    pub accepted: bool,
    pub step_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemSolver {
    ProjectedCg,
    ActiveSet,
}

/// Trust-region iterations from `x0` with a chosen subproblem solver.
#[allow(clippy::too_many_arguments)]
pub fn trust_region(
    objective: &dyn Objective,
    x0: &[f64],
    bounds: &BoxBounds,
    delta0: f64,
    eps_g: f64,
    max_iterations: usize,
    config: &TrustRegionConfig,
    solver: SubproblemSolver,
    on_iterate: &mut dyn FnMut(&TrIterate, &[f64]),
) -> Result<TRResult> {
    let n = objective.dim();
    if x0.len() != n || bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len().min(bounds.len()),
            context: "trust-region start",
        });
    }
    let f = objective.value(x0);
    let g = objective.gradient(x0);
    trust_region_from(
        objective,
        x0.to_vec(),
        f,
        g,
        bounds,
        delta0,
        eps_g,
        max_iterations,
        config,
        solver,
        on_iterate,
    )
}

/// As [`trust_region`], with the value and gradient at `x0` supplied.
#[allow(clippy::too_many_arguments)]
pub fn trust_region_from(
    objective: &dyn Objective,
    x0: Vec<f64>,
    f0: f64,
    g0: Vec<f64>,
    bounds: &BoxBounds,
    delta0: f64,
    eps_g: f64,
    max_iterations: usize,
    config: &TrustRegionConfig,
    solver: SubproblemSolver,
    on_iterate: &mut dyn FnMut(&TrIterate, &[f64]),
) -> Result<TRResult> {
    let mut x = x0;
    let mut f = f0;
    let mut g = g0;
    let mut h: Option<CsrMatrix> = None;
    let mut delta = delta0;
    let mut iterations = 0;
    loop {
        let crit = criticality(&x, &g, bounds);
        if crit <= eps_g {
            return Ok(TRResult {
                x,
                f,
                g,
                delta,
                iterations,
                termination: Termination::Criticality,
                criticality: crit,
            });
        }
        if iterations >= max_iterations {
            return Ok(TRResult {
                x,
                f,
                g,
                delta,
                iterations,
                termination: Termination::MaxIter,
                criticality: crit,
            });
        }
        let sb = working_set(&x, bounds, delta)?;
        let hess = h.get_or_insert_with(|| objective.hessian(&x));
        let sub = match solver {
            SubproblemSolver::ProjectedCg => solve_subproblem(&g, hess, &sb, config.cg_iterations, config.cg_tolerance),
            SubproblemSolver::ActiveSet => active_set_qp(&g, hess, &sb, 1e-10),
        };
        let trial: Vec<f64> = x
            .iter()
            .zip(&sub.s)
            .enumerate()
            .map(|(i, (a, s))| (a + s).max(bounds.lower[i]).min(bounds.upper[i]))
            .collect();
        let f_trial = if sub.decrease > 0.0 { objective.value(&trial) } else { f };
        let rho = tr_ratio(f, f_trial, 0.0, -sub.decrease);
        let accepted = rho > config.eta1 && f_trial < f;
        let step_norm = sub.s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        iterations += 1;
        if accepted {
            x = trial;
            f = f_trial;
            g = objective.gradient(&x);
            h = None;
        }
        delta = radius_update(rho, delta, config);
        let it = TrIterate {
            iteration: iterations,
            f,
            criticality: crit,
            delta,
            rho,
            accepted,
            step_norm,
        };
        trace!(
            "tr it={} f={:.12e} crit={:.3e} delta={:.3e} rho={:.3} acc={}",
            iterations,
            f,
            crit,
            delta,
            rho,
            accepted
        );
        on_iterate(&it, &x);
        if (accepted && step_norm < config.eps_s) || delta < config.eps_s {
            let crit = criticality(&x, &g, bounds);
            return Ok(TRResult {
                x,
                f,
                g,
                delta,
                iterations,
                termination: Termination::StepSize,
                criticality: crit,
            });
        }
    }
}

/// Single-level trust-region solver with projected-CG subproblems.
#[allow(clippy::too_many_arguments)]
pub fn local_tr(
    objective: &dyn Objective,
    x0: &[f64],
    bounds: &BoxBounds,
    delta0: f64,
    eps_g: f64,
    max_iterations: usize,
    config: &TrustRegionConfig,
    on_iterate: &mut dyn FnMut(&TrIterate, &[f64]),
) -> Result<TRResult> {
    trust_region(
        objective,
        x0,
        bounds,
        delta0,
        eps_g,
        max_iterations,
        config,
        SubproblemSolver::ProjectedCg,
        on_iterate,
    )
}

/// Trust-region iterations whose subproblems are solved accurately by the
/// active-set method; used on the coarsest level.
#[allow(clippy::too_many_arguments)]
pub fn coarsest_solve(
    objective: &dyn Objective,
    x0: &[f64],
    bounds: &BoxBounds,
    delta: f64,
    eps_g: f64,
    max_iterations: usize,
    config: &TrustRegionConfig,
) -> Result<TRResult> {
    trust_region(
        objective,
        x0,
        bounds,
        delta,
        eps_g,
        max_iterations,
        config,
        SubproblemSolver::ActiveSet,
        &mut |_, _| {},
    )
}
