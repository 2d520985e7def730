//! Load-stepping driver: scenarios, bounds, solver dispatch and output.
//!
//! Configuration files are TOML. A file names a `scenario`, whose preset
//! supplies every value; any key given in the file overrides the preset
//! (tables merge recursively, arrays replace).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::fracture::{FractureModel, MaterialParams, DEFAULT_RESIDUAL_STIFFNESS};
use crate::mesh::{build_hierarchy, level_length_scale, GridSpec, MeshHierarchy, MeshLevel};
use crate::rmtr::{rmtr_solve, CoarseModelKind, CycleRecord, FieldLayout, LevelEnergy, RmtrConfig, RmtrProblem};
use crate::tr::{local_tr, BoxBounds, Objective, TRResult, Termination};
use crate::transfer::TransferSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Tension,
    Shear,
    Pressure,
    Profile1d,
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tension" => Ok(Scenario::Tension),
            "shear" => Ok(Scenario::Shear),
            "pressure" => Ok(Scenario::Pressure),
            "profile1d" => Ok(Scenario::Profile1d),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub origin: Vec<f64>,
    pub extents: Vec<f64>,
    /// Cells per axis of the coarsest mesh.
    pub cells: Vec<usize>,
    /// Number of refinements `L`; the hierarchy has `L + 1` levels.
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LengthScale {
    /// `l_s = 2h` on every level.
    PerLevel,
    Fixed {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub gc: f64,
    pub k: f64,
    pub length_scale: LengthScale,
}

/// Displacement component `component` on node set `boundary` follows
/// `rate · t`. The set `all` means every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletBc {
    pub boundary: String,
    pub component: usize,
    #[serde(default)]
    pub rate: f64,
}

/// Segment of nodes whose phase field is pinned to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crack {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tr,
    Rmtr,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tr" => Ok(Method::Tr),
            "rmtr" => Ok(Method::Rmtr),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Method,
    pub rmtr: RmtrConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub scenario: Scenario,
    pub geometry: Geometry,
    pub material: Material,
    pub dirichlet: Vec<DirichletBc>,
    pub cracks: Vec<Crack>,
    /// Pressure `p(t) = p0 + t·p0`; present only for the pressure scenario.
    pub pressure_p0: Option<f64>,
    pub steps: usize,
    pub dt: f64,
    pub solver: SolverSpec,
}

fn bc(boundary: &str, component: usize, rate: f64) -> DirichletBc {
    DirichletBc {
        boundary: boundary.into(),
        component,
        rate,
    }
}

impl ProblemSpec {
    pub fn preset(scenario: Scenario) -> Self {
        let material = Material {
            lambda: 12.1,
            mu: 7.9,
            gc: 5e-4,
            k: DEFAULT_RESIDUAL_STIFFNESS,
            length_scale: LengthScale::PerLevel,
        };
        let solver = SolverSpec {
            method: Method::Rmtr,
            rmtr: RmtrConfig::default(),
        };
        let notch = vec![Crack {
            start: [0.0, 0.125],
            end: [0.25, 0.125],
        }];
        let geometry = Geometry {
            origin: vec![0.0, 0.0],
            extents: vec![0.5, 0.25],
            cells: vec![20, 10],
            levels: 2,
        };
        match scenario {
            Scenario::Tension => ProblemSpec {
                scenario,
                geometry,
                material,
                dirichlet: vec![
                    bc("bottom", 0, 0.0),
                    bc("bottom", 1, 0.0),
                    bc("top", 0, 0.0),
                    bc("top", 1, 1.0),
                ],
                cracks: notch,
                pressure_p0: None,
                steps: 50,
                dt: 1e-4,
                solver,
            },
            Scenario::Shear => ProblemSpec {
                scenario,
                geometry,
                material,
                dirichlet: vec![
                    bc("bottom", 0, 0.0),
                    bc("bottom", 1, 0.0),
                    bc("top", 0, 1.0),
                    bc("top", 1, 0.0),
                ],
                cracks: notch,
                pressure_p0: None,
                steps: 50,
                dt: 1e-4,
                solver,
            },
            Scenario::Pressure => ProblemSpec {
                scenario,
                geometry: Geometry {
                    origin: vec![0.0, 0.0],
                    extents: vec![1.0, 1.0],
                    cells: vec![8, 8],
                    levels: 2,
                },
                material: Material {
                    lambda: 12.0,
                    mu: 8.0,
                    gc: 1e-3,
                    ..material
                },
                dirichlet: ["bottom", "top", "left", "right"]
                    .iter()
                    .flat_map(|b| [bc(b, 0, 0.0), bc(b, 1, 0.0)])
                    .collect(),
                cracks: vec![
                    Crack {
                        start: [0.25, 0.375],
                        end: [0.4375, 0.375],
                    },
                    Crack {
                        start: [0.625, 0.25],
                        end: [0.625, 0.4375],
                    },
                    Crack {
                        start: [0.375, 0.6875],
                        end: [0.5625, 0.6875],
                    },
                ],
                pressure_p0: Some(1.0),
                steps: 10,
                dt: 1.0,
                solver,
            },
            Scenario::Profile1d => ProblemSpec {
                scenario,
                geometry: Geometry {
                    origin: vec![-10.0],
                    extents: vec![20.0],
                    cells: vec![20],
                    levels: 2,
                },
                material: Material {
                    length_scale: LengthScale::Fixed { value: 1.0 },
                    ..material
                },
                dirichlet: vec![bc("all", 0, 0.0)],
                cracks: vec![Crack {
                    start: [0.0, 0.0],
                    end: [0.0, 0.0],
                }],
                pressure_p0: None,
                steps: 1,
                dt: 1.0,
                solver,
            },
        }
    }

    /// Parses a TOML document over the preset of its `scenario` key
    /// (default `tension`).
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let scenario = match user.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
            None => Scenario::Tension,
        };
        let preset = toml::Table::try_from(Self::preset(scenario)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(preset, user);
        let spec: ProblemSpec = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.geometry.extents.len();
        if (self.scenario == Scenario::Profile1d) != (dim == 1) {
            return Err(Error::Config("profile1d is the only 1D scenario".into()));
        }
        if (self.scenario == Scenario::Pressure) != self.pressure_p0.is_some() {
            return Err(Error::Config(
                "pressure_p0 must be set exactly for the pressure scenario".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if let Some(d) = self.dirichlet.iter().find(|d| d.component >= dim) {
            return Err(Error::Config(format!(
                "component {} out of range on `{}`",
                d.component, d.boundary
            )));
        }
        self.solver.rmtr.tr.validate()?;
        Ok(())
    }

    pub fn pressure_at(&self, t: f64) -> Option<f64> {
        self.pressure_p0.map(|p0| p0 + t * p0)
    }

    fn params_for(&self, mesh: &MeshLevel) -> MaterialParams {
        let ls = match self.material.length_scale {
            LengthScale::PerLevel => level_length_scale(mesh.h),
            LengthScale::Fixed { value } => value,
        };
        MaterialParams {
            lambda: self.material.lambda,
            mu: self.material.mu,
            gc: self.material.gc,
            k: self.material.k,
            ls,
        }
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}

/// Solver selection for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Tr,
    Rmtr(CoarseModelKind),
}

impl SolverChoice {
    pub fn label(self) -> String {
        match self {
            SolverChoice::Tr => "tr".into(),
            SolverChoice::Rmtr(k) => format!("rmtr-{}", k.short_name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// V-cycles (RMTR) or trust-region iterations (TR).
    pub iterations: usize,
    pub final_energy: f64,
    pub final_criticality: f64,
    pub termination: Termination,
    pub wall_time_s: f64,
}

impl StepRecord {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIter
    }
}

/// Events streamed while a run progresses.
pub enum SimEvent<'a> {
    Cycle {
        step: usize,
        record: &'a CycleRecord,
        x: &'a [f64],
        bounds: &'a BoxBounds,
    },
    Step {
        record: &'a StepRecord,
        x: &'a [f64],
        bounds: &'a BoxBounds,
    },
}

/// Assembled problem: meshes, per-level energies, transfers and the
/// finest-level pinning data.
pub struct Simulation {
    pub spec: ProblemSpec,
    pub hierarchy: MeshHierarchy,
    pub models: Vec<FractureModel>,
    pub transfers: TransferSet,
    /// `(dof, rate)` of displacement Dirichlet conditions on the finest level.
    dirichlet: Vec<(usize, f64)>,
    /// Finest-level phase DOFs pinned to 1.
    seeded: Vec<usize>,
}

/// Result of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub x: Vec<f64>,
    /// Index of the step that hit the iteration cap, if any.
    pub failed_step: Option<usize>,
}

impl RunOutput {
    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations).sum()
    }
}

impl Simulation {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let g = &spec.geometry;
        let grid = GridSpec::new(g.origin.clone(), g.extents.clone(), g.cells.clone())?;
        let mut hierarchy = build_hierarchy(&grid, g.levels)?;
        for c in &spec.cracks {
            hierarchy.tag_segment("crack", c.start, c.end);
        }
        let models = hierarchy
            .levels()
            .iter()
            .map(|m| FractureModel::new(m, spec.params_for(m)).map(|f| f.with_pressure(spec.pressure_at(0.0))))
            .collect::<Result<Vec<_>>>()?;
        let transfers = TransferSet::assemble(&hierarchy)?;
        let fine = hierarchy.finest();
        let map = fine.dof_map();
        let mut dirichlet = BTreeMap::new();
        for d in &spec.dirichlet {
            let nodes: Vec<usize> = if d.boundary == "all" {
                (0..fine.node_count()).collect()
            } else {
                fine.boundary_sets
                    .get(&d.boundary)
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("unknown boundary set `{}`", d.boundary)))?
            };
            for n in nodes {
                dirichlet.insert(map.dof(n, d.component), d.rate);
            }
        }
        let seeded = fine
            .boundary_sets
            .get("crack")
            .map(|s| s.iter().map(|&n| map.dof(n, map.phase_field())).collect())
            .unwrap_or_default();
        if !spec.cracks.is_empty() && fine.boundary_sets.get("crack").is_none_or(|s| s.is_empty()) {
            warn!("crack segments do not pass through any mesh node");
        }
        Ok(Simulation {
            spec,
            hierarchy,
            models,
            transfers,
            dirichlet: dirichlet.into_iter().collect(),
            seeded,
        })
    }

    pub fn finest(&self) -> &MeshLevel {
        self.hierarchy.finest()
    }

    pub fn n(&self) -> usize {
        self.finest().n_dofs()
    }

    /// State at `t = 0`: zero displacement, seeded cracks at 1.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        for &d in &self.seeded {
            x[d] = 1.0;
        }
        x
    }

    /// Finest-level bounds at time `t`, given the previous phase field
    /// (one value per node).
    pub fn assemble_bounds(&self, prev_c: &[f64], t: f64) -> Result<BoxBounds> {
        let fine = self.finest();
        let map = fine.dof_map();
        let n = map.n();
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::INFINITY; n];
        for (node, &c) in prev_c.iter().enumerate() {
            let d = map.dof(node, map.phase_field());
            lower[d] = c;
            upper[d] = 1.0;
        }
        for &(dof, rate) in &self.dirichlet {
            lower[dof] = rate * t;
            upper[dof] = rate * t;
        }
        for &dof in &self.seeded {
            let value = 1.0;
            if value < lower[dof] {
                return Err(Error::DirichletBelowBound {
                    dof,
                    value,
                    lower: lower[dof],
                });
            }
            lower[dof] = value;
            upper[dof] = value;
        }
        BoxBounds::new(lower, upper)
    }

    pub fn phase_values(&self, x: &[f64]) -> Vec<f64> {
        let f = self.finest().dofs_per_node;
        x.iter().skip(f - 1).step_by(f).copied().collect()
    }

    /// `∫ c dΩ` on the finest level.
    pub fn crack_volume(&self, x: &[f64]) -> f64 {
        let fine = self.finest();
        let f = fine.dofs_per_node;
        (0..fine.elements.len())
            .flat_map(|e| {
                let nodes = &fine.elements[e];
                fine.quadrature(e).into_iter().map(move |q| {
                    q.weight
                        * nodes
                            .iter()
                            .zip(&q.shape)
                            .map(|(&n, s)| s * x[n * f + f - 1])
                            .sum::<f64>()
                })
            })
            .sum()
    }

    fn set_pressure(&mut self, t: f64) {
        let p = self.spec.pressure_at(t);
        for m in &mut self.models {
            m.set_pressure(p);
        }
    }

    /// Runs all load steps with the chosen solver.
    pub fn run(&mut self, choice: SolverChoice, on_event: &mut dyn FnMut(SimEvent<'_>)) -> Result<RunOutput> {
        let mut x = self.initial_state();
        let mut records = Vec::with_capacity(self.spec.steps);
        let mut failed_step = None;
        for step in 1..=self.spec.steps {
            let t = step as f64 * self.spec.dt;
            self.set_pressure(t);
            let prev_c = self.phase_values(&x);
            let bounds = self.assemble_bounds(&prev_c, t)?;
            for &(dof, _) in &self.dirichlet {
                x[dof] = bounds.lower[dof];
            }
            let start = Instant::now();
            let result = self.solve(choice, step, &x, &bounds, on_event)?;
            let record = StepRecord {
                step,
                t,
                iterations: result.iterations,
                final_energy: result.f,
                final_criticality: result.criticality,
                termination: result.termination,
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            info!(
                "step {step} t={t} its={} energy={:.10e} crit={:.2e} ({:?}, {:.2}s)",
                record.iterations,
                record.final_energy,
                record.final_criticality,
                record.termination,
                record.wall_time_s
            );
            x = result.x;
            on_event(SimEvent::Step {
                record: &record,
                x: &x,
                bounds: &bounds,
            });
            let converged = record.converged();
            records.push(record);
            if !converged {
                failed_step = Some(step);
                break;
            }
        }
        Ok(RunOutput {
            records,
            x,
            failed_step,
        })
    }

    fn solve(
        &self,
        choice: SolverChoice,
        step: usize,
        x: &[f64],
        bounds: &BoxBounds,
        on_event: &mut dyn FnMut(SimEvent<'_>),
    ) -> Result<TRResult> {
        let cfg = &self.spec.solver.rmtr;
        match choice {
            SolverChoice::Tr => {
                let fine = self.models.last().expect("at least one level");
                let mut noop = |_: &crate::tr::TrIterate, _: &[f64]| {};
                local_tr(
                    fine,
                    x,
                    bounds,
                    cfg.tr.delta0,
                    cfg.tr.eps_g,
                    cfg.tr.max_iterations,
                    &cfg.tr,
                    &mut noop,
                )
            }
            SolverChoice::Rmtr(kind) => {
                let levels: Vec<&dyn LevelEnergy> = self.models.iter().map(|m| m as &dyn LevelEnergy).collect();
                let layout = FieldLayout {
                    fields: self.finest().dofs_per_node,
                    phase_field: Some(self.finest().dim),
                };
                let problem = RmtrProblem::new(levels, &self.transfers, layout)?;
                let config = RmtrConfig { model: kind, ..*cfg };
                rmtr_solve(&problem, x, bounds, &config, &mut |record, xc| {
                    on_event(SimEvent::Cycle {
                        step,
                        record,
                        x: xc,
                        bounds,
                    });
                })
            }
        }
    }

    /// Energy of a finest-level state under the pressure at time `t`.
    pub fn energy_at(&mut self, x: &[f64], t: f64) -> f64 {
        self.set_pressure(t);
        self.models.last().expect("at least one level").value(x)
    }

    /// Writes a legacy-VTK unstructured grid with displacement, phase field
    /// and nodal-averaged principal stresses.
    pub fn export_fields(&self, x: &[f64], path: &Path) -> Result<()> {
        let model = self.models.last().expect("at least one level");
        export_fields(x, self.finest(), model, path)
    }
}

/// Writes `time,its` rows.
pub fn emit_csv(records: &[StepRecord], path: &Path) -> Result<()> {
    fs::write(path, csv_string(records)).map_err(|e| Error::io(path, e))
}

pub fn csv_string(records: &[StepRecord]) -> String {
    let mut s = String::from("time,its\n");
    for r in records {
        let _ = writeln!(s, "{},{}", r.t, r.iterations);
    }
    s
}

/// Legacy-VTK export of a finest-level state.
pub fn export_fields(x: &[f64], mesh: &MeshLevel, model: &FractureModel, path: &Path) -> Result<()> {
    let f = mesh.dofs_per_node;
    let dim = mesh.dim;
    let n = mesh.node_count();
    if x.len() != n * f {
        return Err(Error::DimensionMismatch {
            expected: n * f,
            got: x.len(),
            context: "field export",
        });
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nphase-field state\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.node_coords {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let ne = mesh.elements.len();
    let npe = mesh.nodes_per_element();
    let _ = writeln!(s, "CELLS {ne} {}", ne * (npe + 1));
    for el in &mesh.elements {
        let ids: Vec<String> = el.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{npe} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    let cell_type = if dim == 1 { 3 } else { 9 };
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("VECTORS displacement double\n");
    for node in 0..n {
        let ux = x[node * f];
        let uy = if dim == 2 { x[node * f + 1] } else { 0.0 };
        let _ = writeln!(s, "{ux} {uy} 0");
    }
    s.push_str("SCALARS phase double 1\nLOOKUP_TABLE default\n");
    for node in 0..n {
        let _ = writeln!(s, "{}", x[node * f + dim]);
    }
    let ps = model.nodal_principal_stresses(x);
    for (i, name) in ["principal_stress_1", "principal_stress_2"].iter().enumerate() {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in &ps {
            let _ = writeln!(s, "{}", v[i]);
        }
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads the point data arrays of a file written by [`export_fields`];
/// vectors are flattened.
pub fn read_point_data(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Config(format!("{}: {m}", path.display()));
    let mut lines = text.lines();
    let n: usize = lines
        .by_ref()
        .find_map(|l| l.strip_prefix("POINT_DATA "))
        .ok_or_else(|| bad("missing POINT_DATA"))?
        .trim()
        .parse()
        .map_err(|_| bad("bad point count"))?;
    let mut out = BTreeMap::new();
    while let Some(header) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (name, width) = match parts.as_slice() {
            ["VECTORS", name, ..] => (name.to_string(), 3),
            ["SCALARS", name, ..] => {
                lines.next();
                (name.to_string(), 1)
            }
            [] => continue,
            _ => return Err(bad("unexpected section")),
        };
        let mut values = Vec::with_capacity(n * width);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("truncated data"))?;
            for v in line.split_whitespace() {
                values.push(v.parse::<f64>().map_err(|_| bad("bad number"))?);
            }
        }
        out.insert(name, values);
    }
    Ok(out)
}

/// Human-readable run summary.
pub fn summary_text(sim: &Simulation, choice: SolverChoice, out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {:?}", sim.spec.scenario);
    let _ = writeln!(s, "solver: {}", choice.label());
    let dofs: Vec<String> = sim.hierarchy.levels().iter().map(|l| l.n_dofs().to_string()).collect();
    let _ = writeln!(s, "levels: {} (dofs {})", sim.hierarchy.len(), dofs.join(", "));
    let _ = writeln!(s, "steps completed: {}/{}", out.records.len(), sim.spec.steps);
    let unit = if choice == SolverChoice::Tr {
        "TR iterations"
    } else {
        "V-cycles"
    };
    let _ = writeln!(s, "accumulated {unit}: {}", out.total_iterations());
    let wall: f64 = out.records.iter().map(|r| r.wall_time_s).sum();
    let _ = writeln!(s, "wall time [s]: {wall:.3}");
    if let Some(r) = out.records.last() {
        let _ = writeln!(s, "final energy: {:e}", r.final_energy);
    }
    match out.failed_step {
        Some(step) => {
            let _ = writeln!(s, "status: step {step} hit the iteration cap");
        }
        None => s.push_str("status: converged\n"),
    }
    s
}
