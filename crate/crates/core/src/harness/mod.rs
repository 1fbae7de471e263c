//! Experiment drivers: field and forcing generators, error metrics against
//! the fine reference, and output files.

mod config;
mod errors;
mod fields;
mod forcing;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, FieldSpec, ForcingSpec, SchemeName};
pub use errors::{error_series, ErrorSeries};
pub use fields::{bundled_mask, channel_mask, gen_field, inclusion_mask, BUNDLED};
pub use forcing::{gen_forcing, indicator_raster, smooth_source, Source};

use crate::assembly::{assemble, load_vector, PermeabilityField, Raster, Weight};
use crate::error::{Error, Result};
use crate::fractional::L1Kernel;
use crate::grid::{build_grids, GridHierarchy};
use crate::linalg::SparseSym;
use crate::schemes::{reduce, run_scheme, Forcing, ReducedSystem, RunOutcome, Scheme};
use crate::spaces::{build_spaces, ReducedBasis, SpaceTag};
use crate::stability::StabilityReport;

/// Everything an experiment needs before time stepping.
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: GridHierarchy,
    pub field: PermeabilityField,
    pub source: Source,
    pub a: SparseSym,
    pub m: SparseSym,
    /// `V_cem` columns followed by `V_{H,2}` columns
    pub basis: ReducedBasis,
    pub cem: ReducedSystem,
    pub combined: ReducedSystem,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

fn load_basis(cfg: &ExperimentConfig, grid: &GridHierarchy, field: &PermeabilityField) -> Result<ReducedBasis> {
    let ne = grid.n_elements();
    let build = format!("L {} J {} layers {}", cfg.l, cfg.j, cfg.layers);
    let fits = |b: &ReducedBasis| {
        b.n_dofs() == grid.n_dofs()
            && b.select(SpaceTag::Cem).len() == ne * cfg.l
            && b.select(SpaceTag::V2).len() == ne * cfg.j
    };
    if let Some(path) = &cfg.basis_cache {
        if path.exists() {
            match ReducedBasis::read_cache(path, grid, field, &build) {
                Ok(b) if fits(&b) => return Ok(b),
                Ok(_) | Err(Error::Config(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let basis = build_spaces(grid, field, cfg.space_params())?.combined();
    if let Some(path) = &cfg.basis_cache {
        basis.write_cache(path, grid, field, &build)?;
    }
    Ok(basis)
}

impl Setup {
    /// Builds grid, field, source, fine matrices and both coarse systems.
    /// A basis cache is reused only when it matches the grid, the field and
    /// the space parameters.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        stage("config", config.validate())?;
        let grid = stage("grid", build_grids(config.coarse_n, config.refine))?;
        let field = stage("field", gen_field(&config.field, grid.fine_n()))?;
        let source = stage(
            "forcing",
            gen_forcing(&config.forcing, grid.fine_n(), config.steps(), config.dt),
        )?;
        let a = stage("assembly", assemble(&grid, Weight::Stiffness(&field)))?;
        let m = stage("assembly", assemble(&grid, Weight::Mass))?;
        let basis = stage("basis", load_basis(config, &grid, &field))?;
        let cem = stage("reduce", reduce(&a, &m, &basis.select(SpaceTag::Cem)))?;
        let combined = stage("reduce", reduce(&a, &m, &basis))?;
        Ok(Self {
            config: config.clone(),
            grid,
            field,
            source,
            a,
            m,
            basis,
            cem,
            combined,
        })
    }

    pub fn fine_system(&self) -> Result<ReducedSystem> {
        ReducedSystem::fine(self.a.clone(), self.m.clone())
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        stage(
            "stability",
            StabilityReport::compute(self.config.alpha, &self.fine_system()?, &self.combined),
        )
    }

    /// Fine load vector at time `t`.
    pub fn fine_load(&self, t: f64) -> Vec<f64> {
        load_vector(&self.grid, &self.source, t)
    }

    /// The system and scheme behind a name.
    pub fn system(&self, name: SchemeName) -> (&ReducedSystem, Scheme) {
        match name {
            SchemeName::Cem => (&self.cem, Scheme::Implicit),
            SchemeName::TildeU => (&self.combined, Scheme::Implicit),
            SchemeName::Scem => (&self.combined, Scheme::Partial),
            SchemeName::Fine => unreachable!("the fine system is built on demand"),
        }
    }

    /// Runs `scheme` on `sys` from zero initial data with this setup's source.
    pub fn run_on(&self, scheme: Scheme, sys: &ReducedSystem, kernel: &L1Kernel, label: &str) -> Result<RunOutcome> {
        let load = |t: f64| sys.load(&self.fine_load(t));
        let forcing = if self.source.is_time_independent() {
            Forcing::Constant(load(0.0))
        } else {
            Forcing::Timed(&load)
        };
        run_scheme(scheme, sys, kernel, &vec![0.0; sys.dim()], &forcing, label)
    }

    /// One named run with the configured `α`, steps and step sizes.
    pub fn run(&self, name: SchemeName) -> Result<RunOutcome> {
        let cfg = &self.config;
        if name == SchemeName::Fine {
            let kernel = L1Kernel::new(cfg.alpha, cfg.dt_fine, cfg.steps() * cfg.ratio())?;
            return self.run_on(Scheme::Implicit, &self.fine_system()?, &kernel, name.as_str());
        }
        let kernel = L1Kernel::new(cfg.alpha, cfg.dt, cfg.steps())?;
        let (sys, scheme) = self.system(name);
        self.run_on(scheme, sys, &kernel, name.as_str())
    }
}

/// What one scheme produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub diverged_at: Option<usize>,
    /// errors against the fine reference; `None` for the reference itself
    pub errors: Option<ErrorSeries>,
    /// final state in fine coordinates
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub stability: StabilityReport,
    pub runs: BTreeMap<SchemeName, RunSummary>,
    pub files: Vec<PathBuf>,
}

/// Nodal values with the zero boundary, `(n+1) × (n+1)`.
pub fn nodal_raster(grid: &GridHierarchy, u: &[f64]) -> Result<Raster> {
    let side = grid.nodes_per_side();
    let mut values = vec![0.0; side * side];
    for (dof, v) in u.iter().enumerate() {
        values[grid.node_of_dof(dof)] = *v;
    }
    Raster::new(side, side, values)
}

const CSV_COLUMNS: [(SchemeName, &str); 3] = [
    (SchemeName::Cem, "cem"),
    (SchemeName::TildeU, "tildeU"),
    (SchemeName::Scem, "scem"),
];

/// Error table with one row per coarse level. Missing entries are empty.
pub fn errors_csv(dt: f64, steps: usize, runs: &BTreeMap<SchemeName, RunSummary>) -> String {
    let mut s = String::from("step,time");
    for (_, tag) in CSV_COLUMNS {
        let _ = write!(s, ",err_L2_{tag},err_en_{tag}");
    }
    s.push('\n');
    for k in 0..=steps {
        let _ = write!(s, "{k},{}", k as f64 * dt);
        for (name, _) in CSV_COLUMNS {
            match runs.get(&name).and_then(|r| r.errors.as_ref()).filter(|e| k < e.len()) {
                Some(e) => {
                    let _ = write!(s, ",{},{}", e.l2[k], e.energy[k]);
                }
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    s
}

fn write_file(path: &Path, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Runs every configured scheme plus the fine reference and writes
/// `field.txt`, `stability.txt`, `errors.csv`, `final_<scheme>.txt` and,
/// if enabled, `traj_<scheme>.txt` into the output directory. A diverging
/// run is recorded, not treated as a failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let setup = Setup::new(config)?;
    let out = &config.output;
    stage("output", fs::create_dir_all(out).map_err(|e| Error::io(out, e)))?;
    let mut files = Vec::new();
    stage("output", setup.field.write(&out.join("field.txt")))?;
    files.push(out.join("field.txt"));
    let stability = setup.stability()?;
    stage("output", write_file(&out.join("stability.txt"), &stability.to_text(), &mut files))?;

    let mut names: Vec<SchemeName> = config.schemes.clone();
    if !names.contains(&SchemeName::Fine) {
        names.push(SchemeName::Fine);
    }
    names.sort();
    names.dedup();
    let outcomes: Vec<(SchemeName, RunOutcome)> = names
        .par_iter()
        .map(|&name| stage("solve", setup.run(name)).map(|o| (name, o)))
        .collect::<Result<_>>()?;
    let fine = &outcomes.iter().find(|(n, _)| *n == SchemeName::Fine).expect("fine run").1;

    let mut runs = BTreeMap::new();
    for (name, o) in &outcomes {
        let traj = &o.trajectory;
        let (errors, final_state, dump) = if *name == SchemeName::Fine {
            (None, traj.last().to_vec(), traj.subsample(config.ratio())?)
        } else {
            let (sys, _) = setup.system(*name);
            let e = stage("errors", error_series(traj, sys.basis(), &fine.trajectory, &setup.a, &setup.m))?;
            (Some(e), sys.lift(traj.last()), traj.clone())
        };
        if !config.schemes.contains(name) {
            continue;
        }
        let tag = name.as_str();
        let raster = nodal_raster(&setup.grid, &final_state)?;
        let p = out.join(format!("final_{tag}.txt"));
        stage("output", raster.write(&p))?;
        files.push(p);
        if config.write_trajectories {
            let p = out.join(format!("traj_{tag}.txt"));
            stage("output", dump.write(&p))?;
            files.push(p);
        }
        runs.insert(
            *name,
            RunSummary {
                steps: traj.steps(),
                diverged_at: o.diverged_at,
                errors,
                final_state,
            },
        );
    }
    let csv = errors_csv(config.dt, config.steps(), &runs);
    stage("output", write_file(&out.join("errors.csv"), &csv, &mut files))?;
    Ok(ExperimentReport { stability, runs, files })
}
