//! Recursive multilevel trust-region V-cycles.
//!
//! Level `L` minimizes the true objective; every coarser level `l` minimizes
//! a model `h^l` built from the restricted gradient (and optionally Hessian)
//! of level `l + 1`. A coarse correction is prolongated and accepted only if
//! the multilevel ratio exceeds `eta1`.

use std::str::FromStr;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::fracture::{indicator_chi1, EnergyVariant, FractureModel, FractureView};
use crate::sparse::{dot, CsrMatrix};
use crate::tr::{
    criticality, negligible_reduction, radius_update, trust_region_from, BoxBounds, Objective, SubproblemSolver,
    TRResult, Termination, TrustRegionConfig,
};
use crate::transfer::TransferSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseModelKind {
    FirstOrder,
    Galerkin,
    SecondOrder,
    SolutionDependent,
}

impl CoarseModelKind {
    pub const ALL: [CoarseModelKind; 4] = [
        CoarseModelKind::FirstOrder,
        CoarseModelKind::Galerkin,
        CoarseModelKind::SecondOrder,
        CoarseModelKind::SolutionDependent,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            CoarseModelKind::FirstOrder => "first",
            CoarseModelKind::Galerkin => "galerkin",
            CoarseModelKind::SecondOrder => "second",
            CoarseModelKind::SolutionDependent => "sd",
        }
    }
}

impl FromStr for CoarseModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first_order" => Ok(CoarseModelKind::FirstOrder),
            "galerkin" => Ok(CoarseModelKind::Galerkin),
            "second" | "second_order" => Ok(CoarseModelKind::SecondOrder),
            "sd" | "solution_dependent" => Ok(CoarseModelKind::SolutionDependent),
            other => Err(Error::Config(format!("unknown coarse model `{other}`"))),
        }
    }
}

/// How the crack indicator gates the second-order coupling of the
/// solution-dependent model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chi1Gating {
    /// Coupling weighted by `χ1` (active while no crack exists).
    AsPrinted,
    /// Coupling weighted by `1 − χ1` (active once a crack exists).
    Inverted,
}

/// Restriction rule for lower bounds of the phase field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerRestriction {
    /// One global max of the fine slack over all phase DOFs.
    GlobalMax,
    /// Max of the fine slack over the support of each coarse basis function.
    LocalSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmtrConfig {
    pub tr: TrustRegionConfig,
    pub model: CoarseModelKind,
    pub pre_smoothing: usize,
    pub post_smoothing: usize,
    pub coarse_iterations: usize,
    pub max_cycles: usize,
    pub chi1_threshold: f64,
    pub chi1_gates_second_order: Chi1Gating,
    pub lower_restriction: LowerRestriction,
    pub smoother: SubproblemSolver,
    pub coarse_solver: SubproblemSolver,
}

impl Default for RmtrConfig {
    fn default() -> Self {
        RmtrConfig {
            tr: TrustRegionConfig::default(),
            model: CoarseModelKind::SolutionDependent,
            pre_smoothing: 1,
            post_smoothing: 1,
            coarse_iterations: 2,
            max_cycles: 10_000,
            chi1_threshold: 0.85,
            chi1_gates_second_order: Chi1Gating::Inverted,
            lower_restriction: LowerRestriction::GlobalMax,
            smoother: SubproblemSolver::ProjectedCg,
            coarse_solver: SubproblemSolver::ActiveSet,
        }
    }
}

/// A level's own energy, able to produce its solution-dependent variant.
pub trait LevelEnergy: Objective {
    fn modified(&self, chi1: f64) -> Box<dyn Objective + '_>;
}

impl LevelEnergy for FractureModel {
    fn modified(&self, chi1: f64) -> Box<dyn Objective + '_> {
        Box::new(FractureView {
            model: self,
            variant: EnergyVariant::Modified { chi1 },
        })
    }
}

struct EnergyRef<'a>(&'a dyn LevelEnergy);

impl Objective for EnergyRef<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.0.gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        self.0.hessian(x)
    }
}

/// Transfer matrices between level `l` (coarse) and `l + 1` (fine).
#[derive(Debug, Clone, Copy)]
pub struct LevelTransfer<'a> {
    pub prolongation: &'a CsrMatrix,
    pub restriction: &'a CsrMatrix,
    pub projection: &'a CsrMatrix,
}

impl<'a> LevelTransfer<'a> {
    pub fn from_set(set: &'a TransferSet, l: usize) -> Result<Self> {
        Ok(LevelTransfer {
            prolongation: &set.prolongation(l)?.matrix,
            restriction: &set.restriction(l)?.matrix,
            projection: &set.projection(l)?.matrix,
        })
    }
}

/// Coarse-level objective `h^l`.
pub struct LevelObjective<'a> {
    pub kind: CoarseModelKind,
    base: Option<Box<dyn Objective + 'a>>,
    pub x0: Vec<f64>,
    pub delta_g: Vec<f64>,
    pub delta_h: Option<CsrMatrix>,
    /// Weight of the second-order coupling term.
    pub second_order_weight: f64,
    pub chi1: f64,
    pub restricted_g: Vec<f64>,
    /// `R H I`, kept only when the model uses it.
    pub restricted_h: Option<CsrMatrix>,
}

impl LevelObjective<'_> {
    fn shift(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x0).map(|(a, b)| a - b).collect()
    }
}

impl Objective for LevelObjective<'_> {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let e = self.shift(x);
        match &self.base {
            None => {
                let a = self.restricted_h.as_ref().expect("Galerkin operator");
                dot(&self.restricted_g, &e) + 0.5 * dot(&e, &a.mul_vec(&e))
            }
            Some(base) => {
                let mut v = base.value(x) + dot(&self.delta_g, &e);
                if let Some(dh) = &self.delta_h {
                    v += 0.5 * self.second_order_weight * dot(&e, &dh.mul_vec(&e));
                }
                v
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let e = self.shift(x);
        match &self.base {
            None => {
                let a = self.restricted_h.as_ref().expect("Galerkin operator");
                let ae = a.mul_vec(&e);
                self.restricted_g.iter().zip(ae).map(|(g, v)| g + v).collect()
            }
            Some(base) => {
                let mut g = base.gradient(x);
                for (gi, d) in g.iter_mut().zip(&self.delta_g) {
                    *gi += d;
                }
                if let Some(dh) = &self.delta_h {
                    for (gi, v) in g.iter_mut().zip(dh.mul_vec(&e)) {
                        *gi += self.second_order_weight * v;
                    }
                }
                g
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> CsrMatrix {
        match &self.base {
            None => self.restricted_h.clone().expect("Galerkin operator"),
            Some(base) => {
                let h = base.hessian(x);
                match &self.delta_h {
                    Some(dh) if self.second_order_weight != 0.0 => h.add_scaled(dh, self.second_order_weight),
                    _ => h,
                }
            }
        }
    }
}

fn check_len(v: &[f64], n: usize, context: &'static str) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
            context,
        })
    }
}

/// Builds `h^l` from the gradient and Hessian of level `l + 1` at `x_fine`.
#[allow(clippy::too_many_arguments)]
pub fn build_level_objective<'a>(
    kind: CoarseModelKind,
    fine_g: &[f64],
    fine_h: &CsrMatrix,
    x_fine: &[f64],
    energy: &'a dyn LevelEnergy,
    transfer: LevelTransfer<'_>,
    chi1: f64,
    gating: Chi1Gating,
) -> Result<LevelObjective<'a>> {
    let nf = transfer.prolongation.nrows();
    let nc = transfer.prolongation.ncols();
    check_len(fine_g, nf, "fine gradient")?;
    check_len(x_fine, nf, "fine iterate")?;
    if energy.dim() != nc || fine_h.nrows() != nf {
        return Err(Error::DimensionMismatch {
            expected: nc,
            got: energy.dim(),
            context: "coarse energy",
        });
    }
    let x0 = transfer.projection.mul_vec(x_fine);
    let restricted_g = transfer.restriction.mul_vec(fine_g);
    let weight = match kind {
        CoarseModelKind::FirstOrder => 0.0,
        CoarseModelKind::Galerkin | CoarseModelKind::SecondOrder => 1.0,
        CoarseModelKind::SolutionDependent => match gating {
            Chi1Gating::AsPrinted => chi1,
            Chi1Gating::Inverted => 1.0 - chi1,
        },
    };
    let restricted_h = if weight != 0.0 {
        Some(transfer.restriction.matmul(&fine_h.matmul(transfer.prolongation)))
    } else {
        None
    };
    let base: Option<Box<dyn Objective + 'a>> = match kind {
        CoarseModelKind::Galerkin => None,
        CoarseModelKind::SolutionDependent => Some(energy.modified(chi1)),
        _ => Some(Box::new(EnergyRef(energy))),
    };
    let (delta_g, delta_h) = match &base {
        None => (vec![0.0; nc], None),
        Some(b) => {
            let g0 = b.gradient(&x0);
            let dg = restricted_g.iter().zip(g0).map(|(r, g)| r - g).collect();
            let dh = restricted_h.as_ref().map(|rh| rh.add_scaled(&b.hessian(&x0), -1.0));
            (dg, dh)
        }
    };
    Ok(LevelObjective {
        kind,
        base,
        x0,
        delta_g,
        delta_h,
        second_order_weight: weight,
        chi1,
        restricted_g,
        restricted_h,
    })
}

/// Fine reduction over coarse reduction; `−∞` for a negligible coarse
/// reduction or a non-finite fine value.
pub fn multilevel_ratio(h_fine_old: f64, h_fine_new: f64, h_coarse_init: f64, h_coarse_final: f64) -> f64 {
    let coarse = h_coarse_init - h_coarse_final;
    if !h_fine_new.is_finite() || negligible_reduction(coarse, h_fine_old) {
        return f64::NEG_INFINITY;
    }
    (h_fine_old - h_fine_new) / coarse
}

/// Feasible set of a coarse level.
#[derive(Debug, Clone)]
pub struct LevelFeasibleSet {
    /// Restricted irreversibility (and pinning) bounds.
    pub irrev: BoxBounds,
    pub tr_lower: Vec<f64>,
    pub tr_upper: Vec<f64>,
    pub combined: BoxBounds,
}

impl LevelFeasibleSet {
    pub fn irrev_lower(&self) -> &[f64] {
        &self.irrev.lower
    }
}

/// Field layout needed by the bound restriction.
#[derive(Debug, Clone, Copy)]
pub struct FieldLayout {
    pub fields: usize,
    pub phase_field: Option<usize>,
}

/// Restricts the fine feasible set to level `l`.
///
/// Bounds of fine DOF `j` constrain coarse DOF `k` whenever `I_jk ≠ 0`, so
/// any coarse point inside the result prolongates to a fine-feasible point.
/// Phase lower bounds use a single global max under
/// [`LowerRestriction::GlobalMax`]. Trust-region bounds are projected with
/// `P` and relaxed to contain `x0 = P x_fine`.
#[allow(clippy::too_many_arguments)]
pub fn restrict_bounds(
    fine_irrev: &BoxBounds,
    fine_x: &[f64],
    fine_delta: f64,
    fine_tl: &[f64],
    fine_tu: &[f64],
    transfer: LevelTransfer<'_>,
    layout: FieldLayout,
    rule: LowerRestriction,
) -> Result<LevelFeasibleSet> {
    let nf = transfer.prolongation.nrows();
    check_len(fine_x, nf, "fine iterate")?;
    check_len(fine_tl, nf, "fine trust-region lower bound")?;
    check_len(fine_tu, nf, "fine trust-region upper bound")?;
    check_len(&fine_irrev.lower, nf, "fine bounds")?;
    let x0 = transfer.projection.mul_vec(fine_x);
    let nc = x0.len();
    let lo_slack: Vec<f64> = (0..nf).map(|j| (fine_irrev.lower[j] - fine_x[j]).min(0.0)).collect();
    let hi_slack: Vec<f64> = (0..nf).map(|j| (fine_irrev.upper[j] - fine_x[j]).max(0.0)).collect();
    let global_phase_max = layout.phase_field.map(|pf| {
        (0..nf)
            .filter(|j| j % layout.fields == pf)
            .map(|j| lo_slack[j])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let mut lb = vec![0.0; nc];
    let mut ub = vec![0.0; nc];
    for k in 0..nc {
        let (cols, vals) = transfer.restriction.row(k);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (&j, &w) in cols.iter().zip(vals) {
            if w != 0.0 {
                lo = lo.max(lo_slack[j]);
                hi = hi.min(hi_slack[j]);
            }
        }
        if rule == LowerRestriction::GlobalMax && layout.phase_field == Some(k % layout.fields) {
            lo = global_phase_max.unwrap_or(lo);
        }
        lb[k] = x0[k] + lo;
        ub[k] = x0[k] + hi;
    }
    let a: Vec<f64> = (0..nf).map(|j| fine_tl[j].max(fine_x[j] - fine_delta)).collect();
    let b: Vec<f64> = (0..nf).map(|j| fine_tu[j].min(fine_x[j] + fine_delta)).collect();
    let tl: Vec<f64> = transfer
        .projection
        .mul_vec(&a)
        .iter()
        .zip(&x0)
        .map(|(t, x)| t.min(*x))
        .collect();
    let tu: Vec<f64> = transfer
        .projection
        .mul_vec(&b)
        .iter()
        .zip(&x0)
        .map(|(t, x)| t.max(*x))
        .collect();
    let combined = BoxBounds {
        lower: (0..nc).map(|k| lb[k].max(tl[k])).collect(),
        upper: (0..nc).map(|k| ub[k].min(tu[k])).collect(),
    };
    Ok(LevelFeasibleSet {
        irrev: BoxBounds { lower: lb, upper: ub },
        tr_lower: tl,
        tr_upper: tu,
        combined,
    })
}

/// Levels, transfers and field layout of a multilevel problem.
pub struct RmtrProblem<'a> {
    /// Energies of levels 0 (coarsest) ..= L (finest).
    pub levels: Vec<&'a dyn LevelEnergy>,
    /// Transfers for the pairs (l, l + 1).
    pub transfers: Vec<LevelTransfer<'a>>,
    pub layout: FieldLayout,
}

impl<'a> RmtrProblem<'a> {
    pub fn new(levels: Vec<&'a dyn LevelEnergy>, set: &'a TransferSet, layout: FieldLayout) -> Result<Self> {
        if levels.is_empty() || set.pairs() + 1 != levels.len() {
            return Err(Error::LevelOutOfRange {
                level: levels.len(),
                max: set.pairs() + 1,
            });
        }
        let transfers = (0..set.pairs())
            .map(|l| LevelTransfer::from_set(set, l))
            .collect::<Result<_>>()?;
        Ok(RmtrProblem {
            levels,
            transfers,
            layout,
        })
    }

    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Summary of one V-cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub energy: f64,
    pub criticality: f64,
    pub delta: f64,
    pub chi1: f64,
    /// TR iterations per level, index = level.
    pub level_iterations: Vec<usize>,
    /// Coarse-correction outcome per level `l ≥ 1` (index = level receiving
    /// the correction); `None` where the recursion was skipped.
    pub accepted: Vec<Option<bool>>,
    pub rho: Vec<f64>,
    /// `‖x_new − x_old‖∞` on the finest level.
    pub correction: f64,
    /// Largest finest-level bound violation seen during the cycle.
    pub max_violation: f64,
    /// Largest `‖I s‖∞ / Δ` of finest-level coarse corrections.
    pub tr_excess: f64,
}

struct CycleState {
    chi1: f64,
    level_iterations: Vec<usize>,
    accepted: Vec<Option<bool>>,
    rho: Vec<f64>,
    max_violation: f64,
    tr_excess: f64,
}

struct Vcycle<'p, 'a> {
    problem: &'p RmtrProblem<'a>,
    config: &'p RmtrConfig,
    fine_bounds: &'p BoxBounds,
    state: CycleState,
}

struct LevelOutcome {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    delta: f64,
}

impl Vcycle<'_, '_> {
    fn smooth(
        &mut self,
        l: usize,
        h: &dyn Objective,
        x: Vec<f64>,
        f: f64,
        g: Vec<f64>,
        bounds: &BoxBounds,
        delta: f64,
        iterations: usize,
        solver: SubproblemSolver,
    ) -> Result<TRResult> {
        let finest = l == self.problem.finest();
        let fine_bounds = self.fine_bounds;
        let mut worst = 0.0f64;
        let r = trust_region_from(
            h,
            x,
            f,
            g,
            bounds,
            delta,
            self.config.tr.eps_g,
            iterations,
            &self.config.tr,
            solver,
            &mut |_, x| {
                if finest {
                    worst = worst.max(fine_bounds.max_violation(x));
                }
            },
        )?;
        self.state.max_violation = self.state.max_violation.max(worst);
        self.state.level_iterations[l] += r.iterations;
        Ok(r)
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        l: usize,
        h: &dyn Objective,
        x: Vec<f64>,
        f: f64,
        g: Vec<f64>,
        irrev: &BoxBounds,
        bounds: &BoxBounds,
        tl: &[f64],
        tu: &[f64],
        delta: f64,
    ) -> Result<LevelOutcome> {
        let cfg = self.config;
        if l == 0 {
            let r = self.smooth(l, h, x, f, g, bounds, delta, cfg.coarse_iterations, cfg.coarse_solver)?;
            return Ok(LevelOutcome {
                x: r.x,
                f: r.f,
                g: r.g,
                delta: r.delta,
            });
        }
        let pre = self.smooth(l, h, x, f, g, bounds, delta, cfg.pre_smoothing, cfg.smoother)?;
        let (mut x, mut f, mut g, mut delta) = (pre.x, pre.f, pre.g, pre.delta);
        if pre.termination == Termination::Criticality && pre.criticality <= cfg.tr.eps_g {
            return Ok(LevelOutcome { x, f, g, delta });
        }

        let transfer = self.problem.transfers[l - 1];
        let feas = restrict_bounds(
            irrev,
            &x,
            delta,
            tl,
            tu,
            transfer,
            self.problem.layout,
            cfg.lower_restriction,
        )?;
        let room = feas
            .combined
            .lower
            .iter()
            .zip(&feas.combined.upper)
            .map(|(a, b)| (b - a).min(2.0 * delta))
            .fold(0.0f64, f64::max);
        if room >= 1e-14 {
            let hess = h.hessian(&x);
            let coarse = build_level_objective(
                cfg.model,
                &g,
                &hess,
                &x,
                self.problem.levels[l - 1],
                transfer,
                self.state.chi1,
                cfg.chi1_gates_second_order,
            )?;
            drop(hess);
            let x0c = coarse.x0.clone();
            let hc0 = coarse.value(&x0c);
            let gc0 = coarse.gradient(&x0c);
            let out = self.run(
                l - 1,
                &coarse,
                x0c.clone(),
                hc0,
                gc0,
                &feas.irrev,
                &feas.combined,
                &feas.tr_lower,
                &feas.tr_upper,
                delta,
            )?;
            let ec: Vec<f64> = out.x.iter().zip(&x0c).map(|(a, b)| a - b).collect();
            let s = transfer.prolongation.mul_vec(&ec);
            let trial = bounds.project(&x.iter().zip(&s).map(|(a, b)| a + b).collect::<Vec<_>>());
            let f_trial = h.value(&trial);
            let rho = multilevel_ratio(f, f_trial, hc0, out.f);
            let accepted = rho > cfg.tr.eta1 && f_trial < f;
            debug!("level {l}: coarse correction rho={rho:.4} accepted={accepted}");
            self.state.accepted[l] = Some(accepted);
            self.state.rho[l] = rho;
            if l == self.problem.finest() {
                let s_norm = s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                self.state.tr_excess = self.state.tr_excess.max(s_norm / delta);
            }
            if accepted {
                if l == self.problem.finest() {
                    self.state.max_violation = self.state.max_violation.max(self.fine_bounds.max_violation(&trial));
                }
                x = trial;
                f = f_trial;
                g = h.gradient(&x);
            }
            delta = radius_update(rho, delta, &cfg.tr);
        }

        let post = self.smooth(l, h, x, f, g, bounds, delta, cfg.post_smoothing, cfg.smoother)?;
        Ok(LevelOutcome {
            x: post.x,
            f: post.f,
            g: post.g,
            delta: post.delta,
        })
    }
}

/// Runs V-cycles from `x0` until the finest level is critical, the
/// correction becomes negligible, or the cycle cap is reached.
/// `TRResult::iterations` counts V-cycles.
pub fn rmtr_solve(
    problem: &RmtrProblem<'_>,
    x0: &[f64],
    bounds: &BoxBounds,
    config: &RmtrConfig,
    on_cycle: &mut dyn FnMut(&CycleRecord, &[f64]),
) -> Result<TRResult> {
    config.tr.validate()?;
    let big_l = problem.finest();
    let finest = problem.levels[big_l];
    let n = finest.dim();
    check_len(x0, n, "initial iterate")?;
    check_len(&bounds.lower, n, "finest bounds")?;
    if let Some(i) = (0..n).find(|&i| !(x0[i] >= bounds.lower[i] - 1e-12 && x0[i] <= bounds.upper[i] + 1e-12)) {
        return Err(Error::Infeasible {
            index: i,
            value: x0[i],
            lower: bounds.lower[i],
            upper: bounds.upper[i],
        });
    }
    let h = EnergyRef(finest);
    let mut x = x0.to_vec();
    let mut f = h.value(&x);
    let mut g = h.gradient(&x);
    let mut delta = config.tr.delta0;
    let mut crit = criticality(&x, &g, bounds);
    if crit < config.tr.eps_g {
        return Ok(TRResult {
            x,
            f,
            g,
            delta,
            iterations: 0,
            termination: Termination::Criticality,
            criticality: crit,
        });
    }
    let tl = vec![f64::NEG_INFINITY; n];
    let tu = vec![f64::INFINITY; n];
    for cycle in 1..=config.max_cycles {
        let chi1 = match problem.layout.phase_field {
            Some(pf) => {
                let c: Vec<f64> = x.iter().skip(pf).step_by(problem.layout.fields).copied().collect();
                indicator_chi1(&c, config.chi1_threshold)
            }
            None => 1.0,
        };
        let mut vc = Vcycle {
            problem,
            config,
            fine_bounds: bounds,
            state: CycleState {
                chi1,
                level_iterations: vec![0; big_l + 1],
                accepted: vec![None; big_l + 1],
                rho: vec![f64::NAN; big_l + 1],
                max_violation: 0.0,
                tr_excess: 0.0,
            },
        };
        let out = vc.run(big_l, &h, x.clone(), f, g, bounds, bounds, &tl, &tu, delta)?;
        let correction = out.x.iter().zip(&x).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        x = out.x;
        f = out.f;
        g = out.g;
        delta = out.delta;
        crit = criticality(&x, &g, bounds);
        let st = vc.state;
        let record = CycleRecord {
            cycle,
            energy: f,
            criticality: crit,
            delta,
            chi1,
            level_iterations: st.level_iterations,
            accepted: st.accepted,
            rho: st.rho,
            correction,
            max_violation: st.max_violation,
            tr_excess: st.tr_excess,
        };
        debug!("cycle {cycle}: f={f:.12e} crit={crit:.3e} delta={delta:.3e}");
        on_cycle(&record, &x);
        if crit < config.tr.eps_g {
            return Ok(TRResult {
                x,
                f,
                g,
                delta,
                iterations: cycle,
                termination: Termination::Criticality,
                criticality: crit,
            });
        }
        if (correction > 0.0 && correction < config.tr.eps_s) || delta < config.tr.eps_s {
            return Ok(TRResult {
                x,
                f,
                g,
                delta,
                iterations: cycle,
                termination: Termination::StepSize,
                criticality: crit,
            });
        }
    }
    Ok(TRResult {
        x,
        f,
        g,
        delta,
        iterations: config.max_cycles,
        termination: Termination::MaxIter,
        criticality: crit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracture::MaterialParams;
    use crate::mesh::{build_hierarchy, GridSpec, MeshHierarchy};
    use crate::transfer::{assemble_pseudo_l2, interpolation_stencil};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// `½xᵀAx − bᵀx` with `A = K + M` assembled on a mesh (one field).
    struct FeQuadratic {
        a: CsrMatrix,
        b: Vec<f64>,
    }

    impl FeQuadratic {
        fn on(mesh: &crate::mesh::MeshLevel) -> Self {
            let n = mesh.node_count();
            let mut t = Vec::new();
            let mut b = vec![0.0; n];
            for e in 0..mesh.elements.len() {
                let nodes = &mesh.elements[e];
                for q in mesh.quadrature(e) {
                    for (i, &ni) in nodes.iter().enumerate() {
                        b[ni] += q.weight * q.shape[i];
                        for (j, &nj) in nodes.iter().enumerate() {
                            let k = q.grad[i][0] * q.grad[j][0] + q.grad[i][1] * q.grad[j][1];
                            t.push((ni, nj, q.weight * (k + q.shape[i] * q.shape[j])));
                        }
                    }
                }
            }
            FeQuadratic {
                a: CsrMatrix::from_triplets(n, n, &t),
                b,
            }
        }
    }

    impl Objective for FeQuadratic {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * dot(x, &self.a.mul_vec(x)) - dot(&self.b, x)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            self.a.mul_vec(x).iter().zip(&self.b).map(|(a, b)| a - b).collect()
        }
        fn hessian(&self, _: &[f64]) -> CsrMatrix {
            self.a.clone()
        }
    }

    impl LevelEnergy for FeQuadratic {
        fn modified(&self, _chi1: f64) -> Box<dyn Objective + '_> {
            Box::new(FeQuadratic {
                a: self.a.clone(),
                b: self.b.clone(),
            })
        }
    }

    struct Scalar {
        i: CsrMatrix,
        r: CsrMatrix,
        p: CsrMatrix,
    }

    fn scalar_ops(h: &MeshHierarchy, l: usize) -> Scalar {
        let (c, f) = (h.level(l).unwrap(), h.level(l + 1).unwrap());
        let i = interpolation_stencil(c, f).unwrap();
        Scalar {
            r: i.transpose(),
            p: assemble_pseudo_l2(f, c).unwrap(),
            i,
        }
    }

    impl Scalar {
        fn view(&self) -> LevelTransfer<'_> {
            LevelTransfer {
                prolongation: &self.i,
                restriction: &self.r,
                projection: &self.p,
            }
        }
    }

    fn hier_1d(cells: usize, levels: usize) -> MeshHierarchy {
        build_hierarchy(&GridSpec::new(vec![0.0], vec![1.0], vec![cells]).unwrap(), levels).unwrap()
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(multilevel_ratio(2.0, 1.5, 3.0, 2.0), 0.5);
        assert_eq!(multilevel_ratio(1.0, 0.0, 1.0, 0.0), 1.0);
        assert!(multilevel_ratio(1.0, 1.5, 1.0, 0.0) < 0.0);
        assert_eq!(multilevel_ratio(1.0, 0.5, 1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn model_names_parse() {
        for k in CoarseModelKind::ALL {
            assert_eq!(k.short_name().parse::<CoarseModelKind>().unwrap(), k);
        }
        assert!("third".parse::<CoarseModelKind>().is_err());
    }

    #[test]
    fn bounds_with_zero_and_uniform_slack() {
        let h = hier_1d(2, 1);
        let ops = scalar_ops(&h, 0);
        let layout = FieldLayout {
            fields: 1,
            phase_field: Some(0),
        };
        let nf = 5;
        let x: Vec<f64> = (0..nf).map(|i| 0.1 * i as f64).collect();
        let inf = vec![f64::INFINITY; nf];
        let ninf = vec![f64::NEG_INFINITY; nf];
        let tight = BoxBounds {
            lower: x.clone(),
            upper: inf.clone(),
        };
        let fs = restrict_bounds(
            &tight,
            &x,
            1.0,
            &ninf,
            &inf,
            ops.view(),
            layout,
            LowerRestriction::GlobalMax,
        )
        .unwrap();
        let x0 = ops.p.mul_vec(&x);
        assert_eq!(fs.irrev.lower, x0);
        let sigma = 0.05;
        let loose = BoxBounds {
            lower: x.iter().map(|v| v - sigma).collect(),
            upper: inf.clone(),
        };
        let fs = restrict_bounds(
            &loose,
            &x,
            1.0,
            &ninf,
            &inf,
            ops.view(),
            layout,
            LowerRestriction::GlobalMax,
        )
        .unwrap();
        for (a, b) in fs.irrev.lower.iter().zip(&x0) {
            assert!((a - (b - sigma)).abs() < 1e-15);
        }
        assert!(fs.combined.lower.iter().zip(&x0).all(|(a, b)| a <= b));
        assert!(fs.combined.upper.iter().zip(&x0).all(|(a, b)| a >= b));
    }

    #[test]
    fn pinned_fine_dofs_pin_their_coarse_neighbours() {
        let h = hier_1d(2, 1);
        let ops = scalar_ops(&h, 0);
        let layout = FieldLayout {
            fields: 1,
            phase_field: None,
        };
        let x = vec![0.0; 5];
        let mut lower = vec![-1.0; 5];
        let mut upper = vec![1.0; 5];
        lower[1] = 0.0;
        upper[1] = 0.0;
        let b = BoxBounds { lower, upper };
        let fs = restrict_bounds(
            &b,
            &x,
            1.0,
            &[f64::NEG_INFINITY; 5],
            &[f64::INFINITY; 5],
            ops.view(),
            layout,
            LowerRestriction::LocalSupport,
        )
        .unwrap();
        assert_eq!(fs.irrev.lower[0], fs.irrev.upper[0]);
        assert_eq!(fs.irrev.lower[1], fs.irrev.upper[1]);
        assert!(fs.irrev.lower[2] < fs.irrev.upper[2]);
    }

    fn prolongated_feasibility(dim: usize, levels: usize, seed: u64, rule: LowerRestriction) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let grid = if dim == 1 {
            GridSpec::new(vec![0.0], vec![1.0], vec![rng.gen_range(1..4)]).unwrap()
        } else {
            GridSpec::new(
                vec![0.0, 0.0],
                vec![1.0, 2.0],
                vec![rng.gen_range(1..3), rng.gen_range(1..3)],
            )
            .unwrap()
        };
        let h = build_hierarchy(&grid, levels).unwrap();
        let fields = dim + 1;
        let set = TransferSet::assemble(&h).unwrap();
        let l = rng.gen_range(0..levels);
        let t = LevelTransfer::from_set(&set, l).unwrap();
        let nf = t.prolongation.nrows();
        let x: Vec<f64> = (0..nf).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lower: Vec<f64> = (0..nf)
            .map(|j| match rng.gen_range(0..4) {
                0 => x[j],
                1 => f64::NEG_INFINITY,
                _ => x[j] - rng.gen_range(0.0..0.5),
            })
            .collect();
        let upper: Vec<f64> = (0..nf)
            .map(|j| match rng.gen_range(0..5) {
                0 => x[j],
                1 => lower[j].max(x[j]),
                2 => f64::INFINITY,
                _ => x[j] + rng.gen_range(0.0..0.5),
            })
            .collect();
        let b = BoxBounds { lower, upper };
        let layout = FieldLayout {
            fields,
            phase_field: Some(dim),
        };
        let fs = restrict_bounds(
            &b,
            &x,
            1.0,
            &vec![f64::NEG_INFINITY; nf],
            &vec![f64::INFINITY; nf],
            t,
            layout,
            rule,
        )
        .unwrap();
        let x0 = t.projection.mul_vec(&x);
        for _ in 0..5 {
            let xc: Vec<f64> = (0..x0.len())
                .map(|k| {
                    let lo = fs.irrev.lower[k].max(x0[k] - 1.0);
                    let hi = fs.irrev.upper[k].min(x0[k] + 1.0);
                    lo + rng.gen_range(0.0..=1.0) * (hi - lo)
                })
                .collect();
            let e: Vec<f64> = xc.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let xf: Vec<f64> = x.iter().zip(t.prolongation.mul_vec(&e)).map(|(a, b)| a + b).collect();
            assert!(b.max_violation(&xf) <= 1e-12, "violation {}", b.max_violation(&xf));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn prolongated_coarse_points_stay_feasible(seed in any::<u64>(), dim in 1usize..=2, levels in 1usize..=2, global in any::<bool>()) {
            let rule = if global { LowerRestriction::GlobalMax } else { LowerRestriction::LocalSupport };
            prolongated_feasibility(dim, levels, seed, rule);
        }
    }

    fn fracture_levels() -> (MeshHierarchy, Vec<FractureModel>) {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        let h = build_hierarchy(&g, 1).unwrap();
        let models = h
            .levels()
            .iter()
            .map(|m| FractureModel::new(m, MaterialParams::fracture_modes(2.0 * m.h)).unwrap())
            .collect();
        (h, models)
    }

    #[test]
    fn first_order_consistency_for_all_models() {
        let (h, models) = fracture_levels();
        let set = TransferSet::assemble(&h).unwrap();
        let t = LevelTransfer::from_set(&set, 0).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let xf: Vec<f64> = (0..models[1].n())
            .map(|i| {
                if i % 3 == 2 {
                    rng.gen_range(0.0..1.0)
                } else {
                    rng.gen_range(-0.05..0.05)
                }
            })
            .collect();
        let gf = models[1].gradient(&xf);
        let hf = models[1].hessian(&xf);
        let rg = t.restriction.mul_vec(&gf);
        let scale = 1.0 + gf.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for kind in CoarseModelKind::ALL {
            for chi1 in [0.0, 1.0] {
                for gating in [Chi1Gating::AsPrinted, Chi1Gating::Inverted] {
                    let hl = build_level_objective(kind, &gf, &hf, &xf, &models[0], t, chi1, gating).unwrap();
                    let g0 = hl.gradient(&hl.x0);
                    let err = g0.iter().zip(&rg).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
                    assert!(err <= 1e-12 * scale, "{kind:?} {err}");
                    if kind == CoarseModelKind::SecondOrder || kind == CoarseModelKind::Galerkin {
                        let rh = t.restriction.matmul(&hf.matmul(t.prolongation));
                        assert!(
                            hl.hessian(&hl.x0).max_abs_diff(&rh)
                                < 1e-12 * (1.0 + rh.values().iter().fold(0.0f64, |a, b| a.max(b.abs())))
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn solution_dependent_gating_weights() {
        let (h, models) = fracture_levels();
        let set = TransferSet::assemble(&h).unwrap();
        let t = LevelTransfer::from_set(&set, 0).unwrap();
        let xf = vec![0.0; models[1].n()];
        let (gf, hf) = (models[1].gradient(&xf), models[1].hessian(&xf));
        let kind = CoarseModelKind::SolutionDependent;
        let w = |chi1, gating| {
            build_level_objective(kind, &gf, &hf, &xf, &models[0], t, chi1, gating)
                .unwrap()
                .second_order_weight
        };
        assert_eq!(w(1.0, Chi1Gating::AsPrinted), 1.0);
        assert_eq!(w(0.0, Chi1Gating::AsPrinted), 0.0);
        assert_eq!(w(1.0, Chi1Gating::Inverted), 0.0);
        assert_eq!(w(0.0, Chi1Gating::Inverted), 1.0);
    }

    #[test]
    fn galerkin_with_zero_gradient_is_minimal_at_x0() {
        let h = hier_1d(2, 1);
        let ops = scalar_ops(&h, 0);
        let fine = FeQuadratic::on(h.level(1).unwrap());
        let coarse = FeQuadratic::on(h.level(0).unwrap());
        let x = vec![0.3; 5];
        let hl = build_level_objective(
            CoarseModelKind::Galerkin,
            &[0.0; 5],
            &fine.a,
            &x,
            &coarse,
            ops.view(),
            1.0,
            Chi1Gating::Inverted,
        )
        .unwrap();
        assert!(hl.gradient(&hl.x0).iter().all(|v| *v == 0.0));
        assert_eq!(hl.value(&hl.x0), 0.0);
        assert!(hl.value(&hl.x0.iter().map(|v| v + 0.1).collect::<Vec<_>>()) > 0.0);
    }

    #[test]
    fn second_order_coupling_vanishes_for_nested_linear_problem() {
        let h = hier_1d(3, 1);
        let ops = scalar_ops(&h, 0);
        let fine = FeQuadratic::on(h.level(1).unwrap());
        let coarse = FeQuadratic::on(h.level(0).unwrap());
        let xc: Vec<f64> = (0..4).map(|i| (i as f64 * 0.7).sin()).collect();
        let xf = ops.i.mul_vec(&xc);
        let gf = fine.gradient(&xf);
        let hl = build_level_objective(
            CoarseModelKind::SecondOrder,
            &gf,
            &fine.a,
            &xf,
            &coarse,
            ops.view(),
            1.0,
            Chi1Gating::Inverted,
        )
        .unwrap();
        assert!(hl.delta_g.iter().all(|v| v.abs() < 1e-12));
        let dh = hl.delta_h.as_ref().unwrap();
        assert!(dh.values().iter().all(|v| v.abs() < 1e-12));
    }

    fn quadratic_problem(levels: usize) -> (MeshHierarchy, Vec<FeQuadratic>, TransferSet) {
        let h = hier_1d(4, levels);
        let q = h.levels().iter().map(FeQuadratic::on).collect();
        let set = TransferSet::assemble_with_fields(&h, 1).unwrap();
        (h, q, set)
    }

    fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let v = nalgebra::DVector::from_column_slice(b);
        m.lu().solve(&v).unwrap().iter().copied().collect()
    }

    #[test]
    fn two_grid_exact_on_convex_quadratic() {
        let (_h, q, set) = quadratic_problem(1);
        let levels: Vec<&dyn LevelEnergy> = q.iter().map(|e| e as &dyn LevelEnergy).collect();
        let problem = RmtrProblem::new(
            levels,
            &set,
            FieldLayout {
                fields: 1,
                phase_field: None,
            },
        )
        .unwrap();
        let config = RmtrConfig {
            model: CoarseModelKind::Galerkin,
            smoother: SubproblemSolver::ActiveSet,
            tr: TrustRegionConfig {
                delta0: 1e3,
                eps_g: 1e-10,
                ..Default::default()
            },
            ..Default::default()
        };
        let n = q[1].dim();
        let r = rmtr_solve(
            &problem,
            &vec![0.0; n],
            &BoxBounds::unbounded(n),
            &config,
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.criticality < 1e-10);
        let exact = dense_solve(&q[1].a, &q[1].b);
        assert!(r.x.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn galerkin_correction_removes_coarse_error_exactly() {
        let (h, q, set) = quadratic_problem(1);
        let levels: Vec<&dyn LevelEnergy> = q.iter().map(|e| e as &dyn LevelEnergy).collect();
        let problem = RmtrProblem::new(
            levels,
            &set,
            FieldLayout {
                fields: 1,
                phase_field: None,
            },
        )
        .unwrap();
        let config = RmtrConfig {
            model: CoarseModelKind::Galerkin,
            pre_smoothing: 0,
            post_smoothing: 0,
            tr: TrustRegionConfig {
                delta0: 1e3,
                eps_g: 1e-10,
                ..Default::default()
            },
            ..Default::default()
        };
        let exact = dense_solve(&q[1].a, &q[1].b);
        let ec: Vec<f64> = (0..h.level(0).unwrap().node_count())
            .map(|k| 0.3 * (k as f64).cos())
            .collect();
        let err = set.prolongation(0).unwrap().apply(&ec);
        let x0: Vec<f64> = exact.iter().zip(&err).map(|(a, b)| a + b).collect();
        let mut rho = Vec::new();
        let r = rmtr_solve(&problem, &x0, &BoxBounds::unbounded(x0.len()), &config, &mut |c, _| {
            rho.push(c.rho[1])
        })
        .unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.x.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!((rho[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn critical_start_takes_no_cycles() {
        let (_h, q, set) = quadratic_problem(2);
        let levels: Vec<&dyn LevelEnergy> = q.iter().map(|e| e as &dyn LevelEnergy).collect();
        let problem = RmtrProblem::new(
            levels,
            &set,
            FieldLayout {
                fields: 1,
                phase_field: None,
            },
        )
        .unwrap();
        let exact = dense_solve(&q[2].a, &q[2].b);
        let r = rmtr_solve(
            &problem,
            &exact,
            &BoxBounds::unbounded(exact.len()),
            &RmtrConfig::default(),
            &mut |_, _| {},
        )
        .unwrap();
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn bound_constrained_quadratic_converges_feasibly() {
        let (_h, q, set) = quadratic_problem(2);
        let levels: Vec<&dyn LevelEnergy> = q.iter().map(|e| e as &dyn LevelEnergy).collect();
        let problem = RmtrProblem::new(
            levels,
            &set,
            FieldLayout {
                fields: 1,
                phase_field: Some(0),
            },
        )
        .unwrap();
        let n = q[2].dim();
        let bounds = BoxBounds::new(vec![0.0; n], vec![0.6; n]).unwrap();
        for kind in CoarseModelKind::ALL {
            let config = RmtrConfig {
                model: kind,
                ..Default::default()
            };
            let mut energies = Vec::new();
            let r = rmtr_solve(&problem, &vec![0.0; n], &bounds, &config, &mut |c, x| {
                assert!(bounds.max_violation(x) <= 1e-12);
                assert!(c.max_violation <= 1e-12);
                energies.push(c.energy);
            })
            .unwrap();
            assert_eq!(r.termination, Termination::Criticality, "{kind:?}");
            assert!(energies.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.x.contains(&0.6));
        }
    }
}
