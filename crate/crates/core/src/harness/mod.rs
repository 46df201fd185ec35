//! Monte-Carlo driver: scenario presets, method dispatch, SNR and
//! correlation sweeps, CSV output.

mod output;
mod preset;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use output::{aggregate_rows, read_rows, write_aggregates, write_rows, AggregateRow, AGG_HEADER, CSV_HEADER};
pub use preset::{preset, preset_spec, Preset, DESK_ANTENNAS, PAPER_ANTENNAS, PRESET_NAMES};
pub use settings::{parse_grid, parse_list, Settings};

use crate::baselines::{bca_run, evd_estimate};
use crate::bss::{resolve_ambiguity, run_bss, BssParams, EstimateSet};
use crate::error::{Error, Result};
use crate::metrics::{ber, nmse, zf_filter, zf_sinr};
use crate::model::{
    draw_channels, draw_signals, pilot_phase_estimate, synthesize_rx, CMatrix, ChannelSet, Reception, ScenarioConfig,
    SignalBlock,
};
use crate::par::{map_indexed, Execution};

/// Channel estimation method under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Proposed,
    Bca,
    /// True channels; the zero-forcing reference.
    Perfect,
    /// Eigenvector baseline run with the reflected channels attenuated to
    /// `path_loss`.
    Evd { path_loss: f64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Proposed => f.write_str("proposed"),
            Method::Bca => f.write_str("bca"),
            Method::Perfect => f.write_str("perfect"),
            Method::Evd { path_loss } => write!(f, "evd-{path_loss}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "bca" => Ok(Method::Bca),
            "perfect" => Ok(Method::Perfect),
            "evd" => Ok(Method::Evd { path_loss: 0.3 }),
            _ => {
                let pl = s
                    .strip_prefix("evd-")
                    .and_then(|x| x.parse::<f64>().ok())
                    .filter(|x| *x > 0.0 && *x <= 1.0);
                pl.map(|path_loss| Method::Evd { path_loss })
                    .ok_or_else(|| Error::UnknownMethod(s.to_string()))
            }
        }
    }
}

/// A full sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: ScenarioConfig,
    pub methods: Vec<Method>,
    pub snr_grid: Vec<f64>,
    /// Correlation coefficients applied to every element; `None` keeps the
    /// scenario's reflection table.
    pub rho_grid: Option<Vec<f64>>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub exec: Execution,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.snr_grid.is_empty() || self.rho_grid.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::Config("empty sweep grid".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(r) = self.rho_grid.as_ref().and_then(|g| g.iter().find(|r| !(-1.0..=1.0).contains(*r))) {
            return Err(Error::Config(format!("correlation {r} outside [-1, 1]")));
        }
        if self.snr_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be finite".into()));
        }
        Ok(())
    }

    /// `(snr_db, rho)` grid in output order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let rhos: Vec<Option<f64>> = match &self.rho_grid {
            Some(g) => g.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        self.snr_grid
            .iter()
            .flat_map(|&snr_db| rhos.iter().map(move |&rho| GridPoint { snr_db, rho }))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub snr_db: f64,
    pub rho: Option<f64>,
}

impl GridPoint {
    /// Scenario at this grid point.
    pub fn apply(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.set_snr_db(self.snr_db);
        if let Some(rho) = self.rho {
            cfg.set_correlation(rho);
        }
        cfg
    }

    /// Correlation reported in the output: the swept value, or the common
    /// value of the reflection table, or NaN when elements differ.
    pub fn reported_rho(&self, cfg: &ScenarioConfig) -> f64 {
        if let Some(r) = self.rho {
            return r;
        }
        let mut probs = cfg.reflect_prob.iter().flatten();
        match probs.next() {
            // 2p - 1 rounded off, so p = 0.8 reports 0.6
            Some(&p) if probs.all(|&q| q == p) => ((2.0 * p - 1.0) * 1e12).round() / 1e12,
            _ => f64::NAN,
        }
    }
}

/// One output line: a single stream of a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub method: String,
    pub snr_db: f64,
    pub rho: f64,
    /// Column of `C = [H, G]`: legitimate users first.
    pub user: usize,
    pub nmse: f64,
    pub sinr_db: f64,
    pub ber: f64,
    /// `;`-separated markers: `lu`/`mu`, then any failure notes.
    pub flags: String,
}

impl ResultRow {
    pub fn is_legitimate(&self) -> bool {
        self.flags.split(';').next() == Some("lu")
    }
}

const SCENARIO_STREAM: u64 = 0;
const ALGORITHM_STREAM: u64 = 1;

/// Random stream for `(seed, trial, purpose)`; disjoint across trials and
/// purposes and independent of the grid point, so every grid point of a
/// trial sees the same underlying draws.
pub fn trial_rng(seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 8) | purpose);
    rng
}

/// Everything drawn for one trial at one grid point.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub cfg: ScenarioConfig,
    pub channels: ChannelSet,
    pub block: SignalBlock,
    pub rx: Reception,
    pub pilot: CMatrix,
}

pub fn draw_trial(cfg: &ScenarioConfig, seed: u64, trial: usize) -> Result<TrialDraw> {
    let mut rng = trial_rng(seed, trial, SCENARIO_STREAM);
    let channels = draw_channels(cfg, &mut rng)?;
    let block = draw_signals(cfg, &mut rng)?;
    let rx = synthesize_rx(&channels, &block, cfg, &mut rng)?;
    let pilot = pilot_phase_estimate(cfg, &channels, &mut rng)?;
    Ok(TrialDraw {
        cfg: cfg.clone(),
        channels,
        block,
        rx,
        pilot,
    })
}

/// Transmitted symbol stream of column `k` (`a` for users, `b` for
/// reflections).
fn source_row(block: &SignalBlock, users: usize, k: usize) -> Vec<Complex64> {
    if k < users {
        block.a.row(k).iter().copied().collect()
    } else {
        block.b.row(k - users).iter().copied().collect()
    }
}

struct StreamOutcome {
    nmse: f64,
    ber: f64,
    notes: Vec<String>,
}

fn blank_rows(trial: usize, method: &Method, point: &GridPoint, cfg: &ScenarioConfig, note: &str) -> Vec<ResultRow> {
    (0..cfg.streams())
        .map(|k| ResultRow {
            trial,
            method: method.to_string(),
            snr_db: point.snr_db,
            rho: point.reported_rho(cfg),
            user: k,
            nmse: f64::NAN,
            sinr_db: f64::NAN,
            ber: f64::NAN,
            flags: format!("{};{note}", if k < cfg.users { "lu" } else { "mu" }),
        })
        .collect()
}

/// Runs one method on one trial at one grid point.
pub fn run_trial(
    base: &ScenarioConfig,
    method: Method,
    point: &GridPoint,
    seed: u64,
    trial: usize,
    exec: Execution,
) -> Vec<ResultRow> {
    let mut cfg = point.apply(base);
    if let Method::Evd { path_loss } = method {
        cfg.path_loss = vec![path_loss; cfg.users];
    }
    match run_trial_inner(&cfg, method, point, seed, trial, exec) {
        Ok(rows) => rows,
        Err(e) => blank_rows(trial, &method, point, &cfg, &format!("error={e}")),
    }
}

fn run_trial_inner(
    cfg: &ScenarioConfig,
    method: Method,
    point: &GridPoint,
    seed: u64,
    trial: usize,
    exec: Execution,
) -> Result<Vec<ResultRow>> {
    let draw = draw_trial(cfg, seed, trial)?;
    let c = &draw.channels.c;
    let k_total = cfg.streams();
    let mut rng = trial_rng(seed, trial, ALGORITHM_STREAM);
    let params = BssParams {
        exec,
        ..BssParams::default()
    };

    // per-column estimates (None when not produced) and separated streams
    let (estimates, streams, mut trial_notes): (Vec<Option<DVector<Complex64>>>, Vec<Option<Vec<Complex64>>>, Vec<String>) =
        match method {
            Method::Perfect => {
                let w = zf_filter(c)?;
                let s = &w * &draw.rx.y;
                (
                    (0..k_total).map(|k| Some(c.column(k).into_owned())).collect(),
                    (0..k_total).map(|k| Some(s.row(k).iter().copied().collect())).collect(),
                    vec![],
                )
            }
            Method::Proposed | Method::Bca => {
                let est = if method == Method::Proposed {
                    run_bss(&draw.rx.y, cfg, &params, &mut rng)?
                } else {
                    bca_run(&draw.rx.y, cfg, &params, &mut rng)?
                };
                separated(&est, c, k_total)
            }
            Method::Evd { .. } => {
                let evd = evd_estimate(&draw.rx.y, cfg, &draw.pilot)?;
                let detected = zf_filter(&evd.h_hat).map(|w| &w * &draw.rx.y);
                let mut notes = vec![];
                if let Err(e) = &detected {
                    notes.push(format!("zf={e}"));
                }
                (
                    (0..k_total)
                        .map(|k| (k < cfg.users).then(|| evd.h_hat.column(k).into_owned()))
                        .collect(),
                    (0..k_total)
                        .map(|k| {
                            detected
                                .as_ref()
                                .ok()
                                .filter(|_| k < cfg.users)
                                .map(|s| s.row(k).iter().copied().collect())
                        })
                        .collect(),
                    notes,
                )
            }
        };

    // zero-forcing over the estimated columns, which must lead with the users
    let known = estimates.iter().take_while(|e| e.is_some()).count();
    let sinr = if known >= cfg.users && known > 0 {
        let c_hat = CMatrix::from_columns(&estimates[..known].iter().map(|e| e.clone().unwrap()).collect::<Vec<_>>());
        match zf_sinr(&c_hat, c, cfg.power, cfg.sigma2) {
            Ok(v) => v,
            Err(e) => {
                trial_notes.push(format!("sinr={e}"));
                vec![f64::NAN; known]
            }
        }
    } else {
        trial_notes.push("sinr=missing_users".into());
        vec![]
    };

    let rows = (0..k_total)
        .map(|k| {
            let out = stream_outcome(estimates[k].as_ref(), streams[k].as_ref(), c, &draw.block, cfg.users, k);
            let mut flags = vec![if k < cfg.users { "lu".to_string() } else { "mu".to_string() }];
            flags.extend(out.notes);
            flags.extend(trial_notes.iter().cloned());
            ResultRow {
                trial,
                method: method.to_string(),
                snr_db: point.snr_db,
                rho: point.reported_rho(cfg),
                user: k,
                nmse: out.nmse,
                sinr_db: sinr.get(k).copied().unwrap_or(f64::NAN),
                ber: out.ber,
                flags: flags.join(";"),
            }
        })
        .collect();
    Ok(rows)
}

type Separated = (Vec<Option<DVector<Complex64>>>, Vec<Option<Vec<Complex64>>>, Vec<String>);

/// Oracle-aligned BSS output laid out by true column.
fn separated(est: &EstimateSet, c: &CMatrix, k_total: usize) -> Separated {
    let aligned = resolve_ambiguity(est, c);
    let mut notes = vec![];
    if let Some(a) = &est.aborted {
        notes.push(format!("aborted={}", a.replace(';', ",")));
    }
    let flagged: usize = est.streams.iter().map(|s| s.flagged_rows).sum();
    if flagged > 0 {
        notes.push(format!("flagged_rows={flagged}"));
    }
    let estimates = (0..k_total)
        .map(|k| aligned.for_column(k).map(|s| s.c_hat.clone()))
        .collect();
    let streams = (0..k_total)
        .map(|k| aligned.for_column(k).map(|s| s.s.iter().copied().collect()))
        .collect();
    (estimates, streams, notes)
}

fn stream_outcome(
    c_hat: Option<&DVector<Complex64>>,
    s: Option<&Vec<Complex64>>,
    c: &CMatrix,
    block: &SignalBlock,
    users: usize,
    k: usize,
) -> StreamOutcome {
    let mut notes = vec![];
    let nmse = match c_hat {
        Some(h) => nmse(h, &c.column(k).into_owned()).unwrap_or_else(|e| {
            notes.push(format!("nmse={e}"));
            f64::NAN
        }),
        None => {
            notes.push("not_estimated".into());
            f64::NAN
        }
    };
    let ber = match s {
        Some(s) => ber(s, &source_row(block, users, k)).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    StreamOutcome { nmse, ber, notes }
}

/// Rows and per-grid-point aggregates of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Runs every trial, method and grid point; rows are ordered by trial,
/// then method, then grid point, then user. Writes `out` and its
/// `.agg.csv` companion when the spec names an output path.
pub fn sweep(spec: &RunSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let grid = spec.grid();
    let per_trial = map_indexed(spec.exec, spec.trials, |trial| {
        let mut rows = Vec::new();
        for &method in &spec.methods {
            for point in &grid {
                rows.extend(run_trial(&spec.config, method, point, spec.seed, trial, spec.exec));
            }
        }
        rows
    });
    let rows: Vec<ResultRow> = per_trial.into_iter().flatten().collect();
    let aggregates = aggregate_rows(&rows);
    if let Some(path) = &spec.out {
        write_rows(path, &rows)?;
        write_aggregates(&aggregate_path(path), &aggregates)?;
    }
    Ok(SweepOutput { rows, aggregates })
}

/// `results.csv` -> `results.agg.csv`.
pub fn aggregate_path(path: &std::path::Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.agg.csv"))
}
