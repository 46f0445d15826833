//! Experiment orchestration: expands the configured grids, evaluates grid
//! points on a worker pool and writes the tables in grid order.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use qsky_core::{
    build_hamiltonian_capped, build_lattice, diagonalize_with, free_energy_change, irreversible_work, mean_work,
    phase_decomposition, populations, retained_weight_bound, run_otto_cycle, spin_texture, topological_index,
    transition_matrix, winding_parameter, CycleConfig, CycleMode, DrivenStrokes, EigenSystem, Lattice, LatticeSpec,
    ModelParams, PhaseControl, Quench, QuenchProtocol, SolveMode, SolverConfig, SpinField, StepControl,
    TransitionMatrix,
};

use crate::cache::{default_cache_dir, SpectrumCache, SpectrumKey};
use crate::config::{ExperimentConfig, ExperimentKind, OutputConfig};
use crate::output::{fmt_f64, PointRecord, PointStatus, RunManifest, Table, CONFIG_FILE, MANIFEST_FILE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheChoice {
    Disabled,
    /// `QSKY_CACHE_DIR`, else the user cache directory.
    Default,
    Dir(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker count; the global pool when `None`.
    pub threads: Option<usize>,
    pub strict: bool,
    pub cache: CacheChoice,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            threads: None,
            strict: false,
            cache: CacheChoice::Default,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{0}")]
    Setup(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failures} grid point(s) failed in strict mode")]
    Strict {
        failures: usize,
        manifest: Box<RunManifest>,
    },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
}

impl RunOutcome {
    /// 0 on full success, 2 when some points failed.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.failures == 0 {
            0
        } else {
            2
        }
    }
}

/// Hash of everything that affects results.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output = OutputConfig::default();
    hex::encode(Sha256::digest(c.to_toml().as_bytes()))
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let started = Instant::now();
    let cache = SpectrumCache::new(match &opts.cache {
        CacheChoice::Disabled => None,
        CacheChoice::Default => Some(default_cache_dir()),
        CacheChoice::Dir(d) => Some(d.clone()),
    });
    let ctx = Context::new(config, &cache)?;

    let pool = match opts.threads {
        Some(k) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| RunError::Setup(format!("cannot start {k} workers: {e}")))?,
        ),
        None => None,
    };
    let threads = pool
        .as_ref()
        .map_or_else(rayon::current_num_threads, |p| p.current_num_threads());
    let run = || match config.kind {
        ExperimentKind::Spectrum => spectrum(&ctx),
        ExperimentKind::TopologySweep => topology_sweep(&ctx),
        ExperimentKind::IrrworkSweep => irrwork_sweep(&ctx),
        ExperimentKind::TransitionMatrix => transition_sweep(&ctx),
        ExperimentKind::Phases => phases(&ctx),
        ExperimentKind::EfficiencyCurve => cycle_sweep(&ctx, false),
        ExperimentKind::OttoCycle => cycle_sweep(&ctx, true),
    };
    let (tables, records) = match &pool {
        Some(p) => p.install(run),
        None => run(),
    };

    let dir = &opts.out_dir;
    let io = |path: &str| {
        let path = dir.join(path).display().to_string();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(""))?;
    let mut files = Vec::new();
    for t in &tables {
        t.write(dir).map_err(io(&t.file))?;
        files.push(t.file.clone());
    }
    let mut resolved = config.clone();
    resolved.output.dir = dir.display().to_string();
    std::fs::write(dir.join(CONFIG_FILE), resolved.to_toml()).map_err(io(CONFIG_FILE))?;
    files.push(CONFIG_FILE.into());
    files.push(MANIFEST_FILE.into());

    let failures = records.iter().filter(|r| r.status == PointStatus::Error).count();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: config.kind.name().into(),
        config_hash: config_hash(config),
        wall_seconds: started.elapsed().as_secs_f64(),
        threads,
        spectra_computed: cache.computed(),
        cache_hits: cache.hits(),
        cache_corrupt: cache.corrupt(),
        cache_dir: cache.dir().map(|d| d.display().to_string()),
        failures,
        files,
        points: records,
    };
    std::fs::write(dir.join(MANIFEST_FILE), manifest.to_toml()).map_err(io(MANIFEST_FILE))?;
    if opts.strict && failures > 0 {
        return Err(RunError::Strict {
            failures,
            manifest: Box::new(manifest),
        });
    }
    Ok(RunOutcome { manifest })
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    cache: &'a SpectrumCache,
    lattice: Lattice,
    solver: SolverConfig,
    control: StepControl,
    phase: PhaseControl,
    mode: SolveMode,
}

type PointResult = Result<PointRows, String>;

/// Rows produced by one grid point, per table, plus an optional problem
/// that marks the point as failed while keeping its rows.
struct PointRows {
    tables: Vec<Vec<Vec<String>>>,
    problem: Option<String>,
}

impl PointRows {
    fn main(rows: Vec<Vec<String>>) -> Self {
        PointRows {
            tables: vec![rows],
            problem: None,
        }
    }
}

fn blank_row(mut keys: Vec<String>, width: usize, message: &str) -> Vec<String> {
    keys.resize(width - 1, String::new());
    keys.push(format!("error: {message}"));
    keys
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn mode_name(m: CycleMode) -> &'static str {
    match m {
        CycleMode::Engine => "engine",
        CycleMode::Refrigerator => "refrigerator",
        CycleMode::Accelerator => "accelerator",
        CycleMode::Other => "other",
    }
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, cache: &'a SpectrumCache) -> Result<Self, RunError> {
        let m = &config.model;
        let lattice =
            build_lattice(LatticeSpec::new(m.n, m.boundary.into())).map_err(|e| RunError::Setup(e.to_string()))?;
        let nu = &config.numeric;
        let solver = SolverConfig {
            dense_cap: nu.dense_cap,
            residual_tol: nu.residual_tol,
            orthonormality_tol: nu.orthonormality_tol,
            cluster_tol: nu.cluster_tol,
            ..SolverConfig::default()
        };
        let control = StepControl {
            initial_steps: nu.initial_steps,
            max_halvings: nu.max_halvings,
            step_tol: nu.step_tol,
            global_tol: nu.global_tol,
            chunk_columns: nu.chunk_columns,
            snapshots: 0,
            integrator: nu.integrator.into(),
        };
        let phase = PhaseControl {
            gap_floor: nu.gap_floor,
            grid_intervals: nu.phase_grid,
        };
        let dim = 1usize << lattice.num_quantum();
        let mode = if dim <= nu.dense_cap {
            SolveMode::Full
        } else {
            SolveMode::LowestK(nu.lowest_k.min(dim))
        };
        Ok(Context {
            config,
            cache,
            lattice,
            solver,
            control,
            phase,
            mode,
        })
    }

    fn full_dim(&self) -> usize {
        1usize << self.lattice.num_quantum()
    }

    fn spectrum(&self, delta: f64, dmi: f64) -> Result<EigenSystem, String> {
        let spec = self.lattice.spec();
        let key = SpectrumKey {
            n: spec.n,
            boundary: spec.boundary,
            classical_spin_length: spec.classical_spin_length,
            j: 1.0,
            delta,
            dmi,
            mode: self.mode,
        };
        self.cache.get_or_compute(&key, || {
            let h = build_hamiltonian_capped(
                &self.lattice,
                &ModelParams::new(delta, dmi),
                self.config.numeric.max_spins,
            )
            .map_err(|e| e.to_string())?;
            diagonalize_with(&h, self.mode, &self.solver).map_err(|e| e.to_string())
        })
    }

    fn full_spectrum(&self, delta: f64, dmi: f64) -> Result<EigenSystem, String> {
        let sys = self.spectrum(delta, dmi)?;
        if !sys.is_complete() {
            return Err(format!(
                "driven strokes need the full spectrum; dimension {} exceeds the dense cap {}",
                self.full_dim(),
                self.config.numeric.dense_cap
            ));
        }
        Ok(sys)
    }

    fn quench(&self, delta: f64, d0: f64, d1: f64, rate: f64) -> Result<Quench, String> {
        let protocol = QuenchProtocol::new(delta, d0, d1, rate).map_err(|e| e.to_string())?;
        Quench::with_cap(&self.lattice, protocol, self.config.numeric.max_spins).map_err(|e| e.to_string())
    }

    /// Propagates every start level between full spectra.
    fn full_transitions(
        &self,
        delta: f64,
        d0: f64,
        d1: f64,
        rate: f64,
    ) -> Result<(TransitionMatrix, EigenSystem, EigenSystem), String> {
        let start = self.full_spectrum(delta, d0)?;
        let end = self.full_spectrum(delta, d1)?;
        let quench = self.quench(delta, d0, d1, rate)?;
        let levels: Vec<usize> = (0..start.len()).collect();
        let tm = transition_matrix(
            &quench,
            &start,
            &end,
            &levels,
            &self.control,
            self.config.numeric.cluster_tol,
        )
        .map_err(|e| e.to_string())?;
        Ok((tm, start, end))
    }

    /// Thermal sums over a truncated spectrum must keep enough weight.
    fn check_truncation(&self, eigs: &[f64], beta: f64) -> Result<(), String> {
        if eigs.len() == self.full_dim() {
            return Ok(());
        }
        let retained = retained_weight_bound(eigs, self.full_dim(), beta).map_err(|e| e.to_string())?;
        let required = self.config.numeric.min_retained_weight;
        if retained < required {
            return Err(qsky_core::Error::Truncation { retained, required }.to_string());
        }
        Ok(())
    }
}

/// Evaluates `f` on every point in parallel; results come back in grid order.
fn sweep<P: Sync>(
    points: &[P],
    label: impl Fn(&P) -> String + Sync,
    f: impl Fn(&P) -> PointResult + Sync,
) -> Vec<(String, f64, PointResult)> {
    points
        .par_iter()
        .map(|p| {
            let t0 = Instant::now();
            let r = f(p);
            (label(p), t0.elapsed().as_secs_f64(), r)
        })
        .collect()
}

/// Collects point rows into `tables`; failed points get one error row per
/// entry of `error_keys` in the first table.
fn assemble<P>(
    mut tables: Vec<Table>,
    points: &[P],
    outcomes: Vec<(String, f64, PointResult)>,
    error_keys: impl Fn(&P) -> Vec<Vec<String>>,
) -> (Vec<Table>, Vec<PointRecord>) {
    let mut records = Vec::with_capacity(outcomes.len());
    for (p, (label, seconds, result)) in points.iter().zip(outcomes) {
        let (status, message) = match result {
            Ok(rows) => {
                for (t, r) in tables.iter_mut().zip(rows.tables) {
                    t.rows.extend(r);
                }
                match rows.problem {
                    None => (PointStatus::Ok, None),
                    Some(m) => (PointStatus::Error, Some(m)),
                }
            }
            Err(msg) => {
                let width = tables[0].header.len();
                for keys in error_keys(p) {
                    tables[0].rows.push(blank_row(keys, width, &msg));
                }
                (PointStatus::Error, Some(msg))
            }
        };
        records.push(PointRecord {
            label,
            status,
            message,
            seconds,
        });
    }
    (tables, records)
}

fn grid2(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

fn grid3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<(f64, f64, f64)> {
    grid2(a, b)
        .into_iter()
        .flat_map(|(x, y)| c.iter().map(move |&z| (x, y, z)))
        .collect()
}

fn spectrum(ctx: &Context) -> (Vec<Table>, Vec<PointRecord>) {
    let m = &ctx.config.model;
    let points = grid2(&m.delta.values(), &m.dmi.values());
    let outcomes = sweep(
        &points,
        |&(d, x)| format!("delta={d} dmi={x}"),
        |&(delta, dmi)| {
            let sys = ctx.spectrum(delta, dmi)?;
            let rows = sys
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, e)| vec![fmt_f64(delta), fmt_f64(dmi), k.to_string(), fmt_f64(*e), "ok".into()])
                .collect();
            Ok(PointRows::main(rows))
        },
    );
    let table = Table::new("spectrum.csv", &["delta", "dmi", "level", "energy", "status"]);
    assemble(vec![table], &points, outcomes, |&(d, x)| {
        vec![vec![fmt_f64(d), fmt_f64(x)]]
    })
}

fn topology_sweep(ctx: &Context) -> (Vec<Table>, Vec<PointRecord>) {
    let m = &ctx.config.model;
    let points = grid2(&m.delta.values(), &m.dmi.values());
    let tri = &ctx.lattice.triangulation;
    let outcomes = sweep(
        &points,
        |&(d, x)| format!("delta={d} dmi={x}"),
        |&(delta, dmi)| {
            let sys = ctx.spectrum(delta, dmi)?;
            let degeneracy = sys
                .clusters(ctx.config.numeric.cluster_tol)
                .first()
                .map_or(0, |c| c.len());
            let texture = spin_texture(&sys.state(0), &ctx.lattice).map_err(|e| e.to_string())?;
            let winding = winding_parameter(&SpinField::winding(&texture), tri).map_err(|e| e.to_string())?;
            let index =
                SpinField::index(&texture, ctx.config.numeric.moment_floor).and_then(|f| topological_index(&f, tri));
            let (c, c_value, problem) = match index {
                Ok(c) => (c.rounded.to_string(), fmt_f64(c.value), None),
                Err(e) => (
                    String::new(),
                    String::new(),
                    Some(format!("topological index undefined: {e}")),
                ),
            };
            let row = vec![
                fmt_f64(delta),
                fmt_f64(dmi),
                c,
                c_value,
                fmt_f64(winding),
                fmt_f64(sys.ground_energy()),
                degeneracy.to_string(),
                problem.as_ref().map_or("ok".into(), |p| format!("error: {p}")),
            ];
            Ok(PointRows {
                tables: vec![vec![row]],
                problem,
            })
        },
    );
    let table = Table::new(
        "topology.csv",
        &[
            "delta",
            "dmi",
            "index",
            "index_value",
            "winding",
            "ground_energy",
            "ground_degeneracy",
            "status",
        ],
    );
    assemble(vec![table], &points, outcomes, |&(d, x)| {
        vec![vec![fmt_f64(d), fmt_f64(x)]]
    })
}

fn irrwork_sweep(ctx: &Context) -> (Vec<Table>, Vec<PointRecord>) {
    let cfg = ctx.config;
    let d0 = cfg.protocol.d0;
    let betas = cfg.thermal.beta.values();
    let points = grid3(&cfg.model.delta.values(), &cfg.d1_grid(), &cfg.protocol.rates);
    let outcomes = sweep(
        &points,
        |&(d, x, v)| format!("delta={d} d_end={x} rate={v}"),
        |&(delta, d1, rate)| {
            let (tm, start, end) = ctx.full_transitions(delta, d0, d1, rate)?;
            let probs = tm.probabilities.view();
            let mut rows = Vec::new();
            for &beta in &betas {
                let values = (|| {
                    let p0 = populations(&start.eigenvalues, beta)?;
                    let w_irr = irreversible_work(&p0, probs, &end.eigenvalues, beta, cfg.thermal.kl_reference())?;
                    let work = mean_work(&p0, probs, &start.eigenvalues, &end.eigenvalues)?;
                    let df = free_energy_change(&start.eigenvalues, &end.eigenvalues, beta)?;
                    Ok::<_, qsky_core::Error>((w_irr, work, df))
                })()
                .map_err(|e| e.to_string())?;
                rows.push(vec![
                    fmt_f64(delta),
                    fmt_f64(d0),
                    fmt_f64(d1),
                    fmt_f64(rate),
                    fmt_f64(beta),
                    fmt_f64(values.0),
                    fmt_f64(values.1),
                    fmt_f64(values.2),
                    fmt_f64(tm.unitarity_defect),
                    tm.steps.to_string(),
                    "ok".into(),
                ]);
            }
            Ok(PointRows::main(rows))
        },
    );
    let table = Table::new(
        "irrwork.csv",
        &[
            "delta",
            "d0",
            "d_end",
            "rate",
            "beta",
            "w_irr",
            "mean_work",
            "free_energy_change",
            "unitarity_defect",
            "steps",
            "status",
        ],
    );
    assemble(vec![table], &points, outcomes, |&(d, x, v)| {
        betas
            .iter()
            .map(|&b| vec![fmt_f64(d), fmt_f64(d0), fmt_f64(x), fmt_f64(v), fmt_f64(b)])
            .collect()
    })
}

fn transition_sweep(ctx: &Context) -> (Vec<Table>, Vec<PointRecord>) {
    let cfg = ctx.config;
    let d0 = cfg.protocol.d0;
    let points = grid3(&cfg.model.delta.values(), &cfg.d1_grid(), &cfg.protocol.rates);
    let outcomes = sweep(
        &points,
        |&(d, x, v)| format!("delta={d} d1={x} rate={v}"),
        |&(delta, d1, rate)| {
            let start = ctx.full_spectrum(delta, d0)?;
            let end = ctx.full_spectrum(delta, d1)?;
            let quench = ctx.quench(delta, d0, d1, rate)?;
            let want = match cfg.protocol.levels {
                0 => start.len(),
                l => l.min(start.len()),
            };
            let levels: Vec<usize> = (0..want).collect();
            let tm = transition_matrix(&quench, &start, &end, &levels, &ctx.control, cfg.numeric.cluster_tol)
                .map_err(|e| e.to_string())?;
            let row_defect = tm.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            let col_defect = tm
                .is_complete()
                .then(|| tm.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
            let summary = vec![
                fmt_f64(delta),
                fmt_f64(d0),
                fmt_f64(d1),
                fmt_f64(rate),
                want.to_string(),
                fmt_f64(tm.cluster_summed().max_offdiagonal()),
                fmt_f64(row_defect),
                opt(col_defect),
                fmt_f64(tm.unitarity_defect),
                tm.steps.to_string(),
                "ok".into(),
            ];
            let mut entries = Vec::with_capacity(want * want);
            for (r, &m) in levels.iter().enumerate() {
                for n in 0..want {
                    entries.push(vec![
                        fmt_f64(delta),
                        fmt_f64(d1),
                        fmt_f64(rate),
                        m.to_string(),
                        n.to_string(),
                        fmt_f64(tm.probabilities[[r, n]]),
                    ]);
                }
            }
            Ok(PointRows {
                tables: vec![vec![summary], entries],
                problem: None,
            })
        },
    );
    let summary = Table::new(
        "transition_summary.csv",
        &[
            "delta",
            "d0",
            "d1",
            "rate",
            "levels",
            "max_offdiagonal",
            "max_row_defect",
            "max_column_defect",
            "unitarity_defect",
            "steps",
            "status",
        ],
    );
    let entries = Table::new("transition_probabilities.csv", &["delta", "d1", "rate", "m", "n", "p"]);
    assemble(vec![summary, entries], &points, outcomes, |&(d, x, v)| {
        vec![vec![fmt_f64(d), fmt_f64(d0), fmt_f64(x), fmt_f64(v)]]
    })
}

fn phases(ctx: &Context) -> (Vec<Table>, Vec<PointRecord>) {
    let cfg = ctx.config;
    let d0 = cfg.protocol.d0;
    let level = cfg.protocol.level;
    let points = grid3(&cfg.model.delta.values(), &cfg.d1_grid(), &cfg.protocol.rates);
    let outcomes = sweep(
        &points,
        |&(d, x, v)| format!("delta={d} d1={x} rate={v}"),
        |&(delta, d1, rate)| {
            let quench = ctx.quench(delta, d0, d1, rate)?;
            let p = phase_decomposition(&quench, level, &ctx.control, &ctx.phase, &ctx.solver)
                .map_err(|e| e.to_string())?;
            Ok(PointRows::main(vec![vec![
                fmt_f64(delta),
                fmt_f64(d0),
                fmt_f64(d1),
                fmt_f64(rate),
                level.to_string(),
                fmt_f64(p.dynamical),
                fmt_f64(p.geometric),
                fmt_f64(p.propagated),
                fmt_f64(p.mismatch),
                fmt_f64(p.residual_infidelity),
                fmt_f64(p.min_gap),
                p.steps.to_string(),
                "ok".into(),
            ]]))
        },
    );
    let table = Table::new(
        "phases.csv",
        &[
            "delta",
            "d0",
            "d1",
            "rate",
            "level",
            "dynamical",
            "geometric",
            "propagated",
            "mismatch",
            "residual_infidelity",
            "min_gap",
            "steps",
            "status",
        ],
    );
    assemble(vec![table], &points, outcomes, |&(d, x, v)| {
        vec![vec![fmt_f64(d), fmt_f64(d0), fmt_f64(x), fmt_f64(v), level.to_string()]]
    })
}

/// `efficiency-curve` (ideal strokes, compact columns) and `otto-cycle`
/// (full report, optionally finite-rate strokes).
fn cycle_sweep(ctx: &Context, full_report: bool) -> (Vec<Table>, Vec<PointRecord>) {
    let cfg = ctx.config;
    let th = &cfg.thermal;
    let d0 = cfg.protocol.d0;
    let t_hots = cfg.t_hot_grid();
    let rate = if full_report { th.driven_rate } else { None };
    let points = grid2(&cfg.model.delta.values(), &cfg.d1_grid());
    let outcomes = sweep(
        &points,
        |&(d, x)| format!("delta={d} d1={x}"),
        |&(delta, d1)| {
            let (e0, e1, driven) = match rate {
                None => (ctx.spectrum(delta, d0)?, ctx.spectrum(delta, d1)?, None),
                Some(v) => {
                    let (fwd, a, b) = ctx.full_transitions(delta, d0, d1, v)?;
                    let (back, _, _) = ctx.full_transitions(delta, d1, d0, v)?;
                    (a, b, Some((fwd, back)))
                }
            };
            let mut rows = Vec::with_capacity(t_hots.len());
            let mut problem = None;
            for &t_hot in &t_hots {
                let report = (|| {
                    for eigs in [&e0.eigenvalues, &e1.eigenvalues] {
                        for t in [t_hot, th.t_cold] {
                            ctx.check_truncation(eigs, 1.0 / t)?;
                        }
                    }
                    let cycle = CycleConfig {
                        t_hot,
                        t_cold: th.t_cold,
                        d0,
                        d1,
                        skyrmion_count: th.skyrmion_count,
                        stroke4_bath: th.stroke4_bath(),
                        kl_reference: th.kl_reference(),
                    };
                    let strokes = driven.as_ref().map(|(f, b)| DrivenStrokes {
                        stroke2: f.probabilities.view(),
                        stroke4: b.probabilities.view(),
                    });
                    run_otto_cycle(&e0.eigenvalues, &e1.eigenvalues, &cycle, strokes).map_err(|e| e.to_string())
                })();
                let r = match report {
                    Ok(r) => r,
                    Err(e) => {
                        let keys = if full_report {
                            vec![
                                fmt_f64(delta),
                                fmt_f64(d0),
                                fmt_f64(d1),
                                fmt_f64(t_hot),
                                fmt_f64(th.t_cold),
                                opt(rate),
                            ]
                        } else {
                            vec![
                                fmt_f64(delta),
                                fmt_f64(d0),
                                fmt_f64(d1),
                                fmt_f64(th.t_cold),
                                fmt_f64(t_hot),
                            ]
                        };
                        let width = if full_report { 18 } else { 11 };
                        rows.push(blank_row(keys, width, &e));
                        problem.get_or_insert(format!("T_H = {t_hot}: {e}"));
                        continue;
                    }
                };
                rows.push(if full_report {
                    vec![
                        fmt_f64(delta),
                        fmt_f64(d0),
                        fmt_f64(d1),
                        fmt_f64(t_hot),
                        fmt_f64(th.t_cold),
                        opt(rate),
                        fmt_f64(r.w2),
                        fmt_f64(r.w4),
                        fmt_f64(r.q_in),
                        fmt_f64(r.df2),
                        fmt_f64(r.df4),
                        fmt_f64(r.w_irr_2),
                        fmt_f64(r.w_irr_4),
                        fmt_f64(r.total_work),
                        opt(r.efficiency),
                        fmt_f64(r.carnot_bound),
                        mode_name(r.mode).into(),
                        "ok".into(),
                    ]
                } else {
                    vec![
                        fmt_f64(delta),
                        fmt_f64(d0),
                        fmt_f64(d1),
                        fmt_f64(th.t_cold),
                        fmt_f64(t_hot),
                        opt(r.efficiency),
                        fmt_f64(r.carnot_bound),
                        fmt_f64(r.q_in),
                        fmt_f64(r.total_work),
                        mode_name(r.mode).into(),
                        "ok".into(),
                    ]
                });
            }
            Ok(PointRows {
                tables: vec![rows],
                problem,
            })
        },
    );
    let table = if full_report {
        Table::new(
            "otto_cycle.csv",
            &[
                "delta",
                "d0",
                "d1",
                "t_hot",
                "t_cold",
                "rate",
                "w2",
                "w4",
                "q_in",
                "df2",
                "df4",
                "w_irr_2",
                "w_irr_4",
                "total_work",
                "efficiency",
                "carnot_bound",
                "mode",
                "status",
            ],
        )
    } else {
        Table::new(
            "efficiency.csv",
            &[
                "delta",
                "d0",
                "d1",
                "t_cold",
                "t_hot",
                "efficiency",
                "carnot_bound",
                "q_in",
                "total_work",
                "mode",
                "status",
            ],
        )
    };
    assemble(vec![table], &points, outcomes, |&(d, x)| {
        t_hots
            .iter()
            .map(|&t| {
                if full_report {
                    vec![
                        fmt_f64(d),
                        fmt_f64(d0),
                        fmt_f64(x),
                        fmt_f64(t),
                        fmt_f64(th.t_cold),
                        opt(rate),
                    ]
                } else {
                    vec![fmt_f64(d), fmt_f64(d0), fmt_f64(x), fmt_f64(th.t_cold), fmt_f64(t)]
                }
            })
            .collect()
    })
}
