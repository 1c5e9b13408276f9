//! Config-driven τ sweeps: run a phase-estimation variant at every τ point,
//! reduce each readout to (estimate, σ), fit the phase against τ and write
//! plot-ready tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circstats::{self, circular_std, sample_moment, Estimator};
use crate::error::{Error, Result};
use crate::fitting::{self, DataPoint, FitModel, FitOptions, FitResult};
use crate::models::{self, groundstate_circuit_hubbard, PauliTermSum, Propagator, TrotterPlan};
use crate::qpe::{self, PhaseMass, QpeSetup};
use crate::rng::Streams;
use crate::statevec::{Statevector, C64};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Zeeman { omega: f64 },
    Ising { omega1: f64, omega2: f64, omega_j: f64 },
    HubbardCompact { t: f64, u: f64 },
    HubbardJw { t: f64, u: f64 },
}

impl ModelSpec {
    pub fn hamiltonian(&self) -> PauliTermSum {
        match *self {
            ModelSpec::Zeeman { omega } => PauliTermSum::zeeman(omega),
            ModelSpec::Ising { omega1, omega2, omega_j } => PauliTermSum::ising(omega1, omega2, omega_j),
            ModelSpec::HubbardCompact { t, u } => PauliTermSum::hubbard_compact(t, u),
            ModelSpec::HubbardJw { t, u } => PauliTermSum::hubbard_jw(t, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pea,
    IpeaExhaustive,
    IpeaNonexhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TauGrid {
    /// `count` points from `start` to `stop` inclusive.
    Range { start: f64, stop: f64, count: usize },
    /// Symmetric: cell midpoints of (−abs_max, abs_max). Otherwise: abs_max·(i+1)/count.
    Abs { abs_max: f64, count: usize, symmetric: bool },
}

impl TauGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            TauGrid::Range { start, stop, count } => {
                if count < 2 || !start.is_finite() || !stop.is_finite() || start == stop {
                    return Err(config_err("tau range needs count >= 2 and distinct finite ends"));
                }
                let step = (stop - start) / (count - 1) as f64;
                Ok((0..count).map(|i| if i == count - 1 { stop } else { start + step * i as f64 }).collect())
            }
            TauGrid::Abs { abs_max, count, symmetric } => {
                if count < 2 || !(abs_max > 0.0) || !abs_max.is_finite() {
                    return Err(config_err("tau grid needs count >= 2 and a positive abs_max"));
                }
                let n = count as f64;
                Ok((0..count)
                    .map(|i| {
                        if symmetric {
                            abs_max * (2.0 * i as f64 + 1.0 - n) / n
                        } else {
                            abs_max * (i as f64 + 1.0) / n
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Linear,
    MuWrapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub model: FitKind,
    /// Only points with |τ| < tau_max enter the fit.
    #[serde(default)]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub slope_window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrotterSpec {
    Plan { order: u8, n: u64 },
    Named(String),
}

impl Default for TrotterSpec {
    fn default() -> Self {
        TrotterSpec::Named("exact".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

/// A basis label, `"ground"`, an amplitude list, or several labels run one
/// after another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Label(String),
    Amplitudes(Vec<Amplitude>),
    Runs(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub algorithm: Algorithm,
    #[serde(rename = "R")]
    pub r: usize,
    pub shots: u64,
    pub tau: TauGrid,
    pub fit: FitSpec,
    pub estimator: Estimator,
    #[serde(default)]
    pub trotter: TrotterSpec,
    pub initial_state: InitialSpec,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn propagator(&self, h: &PauliTermSum) -> Result<Propagator> {
        match &self.trotter {
            TrotterSpec::Named(s) if s == "exact" => {
                if !h.all_commute() {
                    return Err(config_err("exact propagation needs commuting terms; give trotter {order, n}"));
                }
                Ok(Propagator::Exact)
            }
            TrotterSpec::Named(s) => Err(config_err(format!("unknown trotter setting {s:?}"))),
            TrotterSpec::Plan { order, n } => {
                TrotterPlan::new(h, *order, *n).map(Propagator::Trotter).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    fn initial_states(&self, h: &PauliTermSum) -> Result<Vec<(String, Statevector)>> {
        let n = h.n_qubits();
        let one = |label: &str| -> Result<(String, Statevector)> {
            let sv = if label == "ground" {
                ground_state(&self.model, h)?
            } else {
                Statevector::from_label(label).map_err(|e| config_err(format!("initial state {label:?}: {e}")))?
            };
            if sv.n_qubits() != n {
                return Err(config_err(format!("initial state {label:?} has {} qubits, model has {n}", sv.n_qubits())));
            }
            Ok((label.to_string(), sv))
        };
        match &self.initial_state {
            InitialSpec::Label(l) => Ok(vec![one(l)?]),
            InitialSpec::Runs(ls) if !ls.is_empty() => ls.iter().map(|l| one(l)).collect(),
            InitialSpec::Runs(_) => Err(config_err("initial_state list is empty")),
            InitialSpec::Amplitudes(a) => {
                let amps = a
                    .iter()
                    .map(|x| match *x {
                        Amplitude::Real(re) => C64::new(re, 0.0),
                        Amplitude::Complex([re, im]) => C64::new(re, im),
                    })
                    .collect();
                let sv = Statevector::inject_amplitudes(amps).map_err(|e| config_err(e.to_string()))?;
                if sv.n_qubits() != n {
                    return Err(config_err(format!("amplitude list spans {} qubits, model has {n}", sv.n_qubits())));
                }
                Ok(vec![("amplitudes".into(), sv)])
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(config_err("shots must be positive"));
        }
        if self.r == 0 {
            return Err(config_err("R must be at least 1"));
        }
        if self.algorithm == Algorithm::IpeaNonexhaustive && self.estimator != Estimator::Majority {
            return Err(config_err("the mean-direction estimators need pea or ipea-exhaustive"));
        }
        if self.fit.model == FitKind::MuWrapped && self.r < 2 {
            return Err(config_err("mu_wrapped fits need R >= 2"));
        }
        if let Some(t) = self.fit.tau_max {
            if !(t > 0.0) {
                return Err(config_err("fit.tau_max must be positive"));
            }
        }
        if let Some(w) = self.fit.slope_window {
            if !(w > 0.0) || !w.is_finite() {
                return Err(config_err("fit.slope_window must be positive"));
            }
        }
        Ok(())
    }
}

fn ground_state(model: &ModelSpec, h: &PauliTermSum) -> Result<Statevector> {
    match *model {
        ModelSpec::HubbardCompact { t, u } => {
            let (c, _) = groundstate_circuit_hubbard(t, u).map_err(|e| config_err(e.to_string()))?;
            let mut sv = Statevector::zero(2)?;
            sv.run(&c)?;
            Ok(sv)
        }
        _ => models::exact_eigensystem(h)?.eigenvector(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Counts {
    Histogram(BTreeMap<String, u64>),
    Rounds(Vec<qpe::LpmfLevel>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub tau: f64,
    pub estimate: f64,
    pub sigma: f64,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub initial_state: String,
    pub points: Vec<PointRecord>,
    pub fit: FitResult,
    pub fit_points: usize,
    pub slope_window: f64,
    /// Constant term removed before exponentiation; ε̂ + shift is the
    /// eigenvalue of the full Hamiltonian.
    pub energy_shift: f64,
    pub eps_hat_unshifted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

/// min(aliasing limit, 1.25·Σ|c_j|/2π).
pub fn default_slope_window(h: &PauliTermSum, data: &[DataPoint]) -> Result<f64> {
    let nyq = fitting::nyquist_window(data)?;
    let bound = 1.25 * h.spectral_bound() / (2.0 * PI);
    Ok(if bound > 0.0 { nyq.min(bound) } else { nyq })
}

fn point_sigma(m: &impl PhaseMass, r: usize) -> f64 {
    let s = sample_moment(m).and_then(|cm| circular_std(cm.rho)).unwrap_or(f64::INFINITY);
    s.max(fitting::sigma_floor(r))
}

fn run_point(cfg: &ExperimentConfig, setup: &QpeSetup, streams: &Streams, path: [u64; 2]) -> Result<PointRecord> {
    let mut rng = streams.stream(&path);
    let (estimate, sigma, counts) = match cfg.algorithm {
        Algorithm::Pea | Algorithm::IpeaExhaustive => {
            let sample = if cfg.algorithm == Algorithm::Pea {
                qpe::run_pea(setup, cfg.shots, &mut rng)?
            } else {
                qpe::run_ipea_exhaustive(setup, cfg.shots, &mut rng)?
            };
            let est = circstats::estimate(&sample, cfg.estimator)?;
            (est.value, point_sigma(&sample, cfg.r), Counts::Histogram(sample.to_map()))
        }
        Algorithm::IpeaNonexhaustive => {
            let (j, tree) = qpe::run_ipea_nonexhaustive(setup, cfg.shots, &mut rng)?;
            let lpmf = qpe::lpmf_reconstruct(&tree)?;
            let value = j as f64 / (1usize << cfg.r) as f64;
            (value, point_sigma(&lpmf, cfg.r), Counts::Rounds(tree.levels))
        }
    };
    Ok(PointRecord {
        tau: setup.tau,
        estimate,
        sigma,
        counts,
    })
}

/// Run every initial state over the τ grid and fit each sweep. Points run in
/// parallel on the current rayon pool; results keep τ order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let h = cfg.model.hamiltonian();
    let prop = cfg.propagator(&h)?;
    let taus = cfg.tau.points()?;
    let inits = cfg.initial_states(&h)?;
    let wires = h.n_qubits() + if cfg.algorithm == Algorithm::Pea { cfg.r } else { 1 };
    if wires > crate::statevec::MAX_QUBITS {
        return Err(Error::TooManyQubits {
            requested: wires,
            limit: crate::statevec::MAX_QUBITS,
        });
    }
    let streams = Streams::new(cfg.seed);
    let fit_model = match cfg.fit.model {
        FitKind::Linear => FitModel::Linear,
        FitKind::MuWrapped => FitModel::MuWrapped { r: cfg.r },
    };

    let mut runs = Vec::with_capacity(inits.len());
    for (run_idx, (label, init)) in inits.iter().enumerate() {
        let points: Vec<PointRecord> = taus
            .par_iter()
            .enumerate()
            .map(|(i, &tau)| {
                let setup = QpeSetup {
                    hamiltonian: &h,
                    initial: init,
                    tau,
                    r: cfg.r,
                    propagator: &prop,
                };
                run_point(cfg, &setup, &streams, [run_idx as u64, i as u64])
            })
            .collect::<Result<_>>()?;

        let data: Vec<DataPoint> = points
            .iter()
            .filter(|p| cfg.fit.tau_max.is_none_or(|t| p.tau.abs() < t))
            .map(|p| DataPoint {
                tau: p.tau,
                phi: p.estimate,
                sigma: p.sigma,
            })
            .collect();
        let window = match cfg.fit.slope_window {
            Some(w) => w,
            None => default_slope_window(&h, &data)?,
        };
        let fit = fitting::fit(&data, fit_model, FitOptions { slope_window: Some(window) })?;
        let energy_shift = h.constant_shift();
        runs.push(RunRecord {
            initial_state: label.clone(),
            fit_points: data.len(),
            slope_window: window,
            energy_shift,
            eps_hat_unshifted: fit.eps_hat + energy_shift,
            points,
            fit,
        });
    }
    Ok(ExperimentRecord {
        config: cfg.clone(),
        runs,
    })
}

/// A header plus rows, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn points_table(run: &RunRecord) -> Result<Table> {
    let mut t = Table::new(&["tau", "estimate", "sigma", "counts_json"]);
    for p in &run.points {
        let counts = serde_json::to_string(&p.counts).map_err(|e| config_err(e.to_string()))?;
        t.push(vec![p.tau.to_string(), p.estimate.to_string(), p.sigma.to_string(), counts]);
    }
    Ok(t)
}

pub fn fit_table(rec: &ExperimentRecord) -> Table {
    let mut t = Table::new(&[
        "run",
        "initial_state",
        "m",
        "dm",
        "b",
        "db",
        "chi2",
        "ndf",
        "chi2_per_ndf",
        "eps_hat",
        "d_eps",
        "energy_shift",
        "eps_hat_unshifted",
    ]);
    for (i, r) in rec.runs.iter().enumerate() {
        let f = &r.fit;
        t.push(vec![
            i.to_string(),
            r.initial_state.clone(),
            f.m.to_string(),
            f.dm.to_string(),
            f.b.to_string(),
            f.db.to_string(),
            f.chi2.to_string(),
            f.ndf.to_string(),
            f.chi2_per_ndf.to_string(),
            f.eps_hat.to_string(),
            f.d_eps.to_string(),
            r.energy_shift.to_string(),
            r.eps_hat_unshifted.to_string(),
        ]);
    }
    t
}

/// Writes `record.json`, `fit.csv` and one `points_<run>.csv` per initial
/// state. Returns the files written.
pub fn write_outputs(rec: &ExperimentRecord, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let to_io = |e: Error| std::io::Error::other(e.to_string());
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> std::io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let mut json = serde_json::to_string_pretty(rec).map_err(std::io::Error::other)?;
    json.push('\n');
    put("record.json".into(), json)?;
    put("fit.csv".into(), fit_table(rec).to_csv().map_err(to_io)?)?;
    for (i, run) in rec.runs.iter().enumerate() {
        put(format!("points_{i}.csv"), points_table(run).and_then(|t| t.to_csv()).map_err(to_io)?)?;
    }
    Ok(written)
}

/// Least-squares slope of y against x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    num / den
}

fn check_r_range(r_min: usize, r_max: usize) -> Result<()> {
    if r_min == 0 || r_min > r_max || r_max > crate::statevec::MAX_QUBITS {
        return Err(config_err(format!("invalid R range {r_min}..={r_max}")));
    }
    Ok(())
}

/// Accuracy error |estimate − φ| over one readout cell, for each R and estimator.
pub fn analyze_error_curves(r_min: usize, r_max: usize, points: usize) -> Result<Table> {
    check_r_range(r_min, r_max)?;
    if points == 0 {
        return Err(config_err("points must be positive"));
    }
    let mut t = Table::new(&["R", "estimator", "phi", "error"]);
    for r in r_min..=r_max {
        for est in [Estimator::Majority, Estimator::MeanDirection] {
            if est == Estimator::MeanDirection && r < 2 {
                continue;
            }
            let name = serde_json::to_value(est).expect("estimator serializes");
            for (phi, err) in circstats::error_curves(r, est, points)? {
                t.push(vec![r.to_string(), name.as_str().unwrap_or_default().to_string(), phi.to_string(), err.to_string()]);
            }
        }
    }
    Ok(t)
}

/// Sampling spread of the mean-direction estimate against shot count.
pub fn analyze_dispersion(
    r_min: usize,
    r_max: usize,
    shots: &[u64],
    reps: usize,
    phi: f64,
    seed: u64,
) -> Result<(Table, Vec<(usize, f64)>)> {
    check_r_range(r_min, r_max.max(r_min))?;
    if r_min < 2 || shots.len() < 2 || shots.contains(&0) || reps < 2 {
        return Err(config_err("dispersion needs R >= 2, two or more positive shot counts and reps >= 2"));
    }
    let mut t = Table::new(&["R", "shots", "sigma", "log10_shots", "log10_sigma"]);
    let mut slopes = Vec::new();
    for r in r_min..=r_max {
        let mut pts = Vec::new();
        for (i, &o) in shots.iter().enumerate() {
            let s = circstats::sampling_sigma(phi, r, o, reps, Estimator::MeanDirection, seed ^ ((r as u64) << 32) ^ i as u64)?;
            let (lx, ly) = ((o as f64).log10(), s.log10());
            pts.push((lx, ly));
            t.push(vec![r.to_string(), o.to_string(), s.to_string(), lx.to_string(), ly.to_string()]);
        }
        slopes.push((r, loglog_slope(&pts)));
    }
    Ok((t, slopes))
}

/// Spectral-norm error of the product formula against τ on the compact
/// Hubbard dimer.
pub fn analyze_trotter_error(
    orders: &[u8],
    t_hop: f64,
    u: f64,
    n: u64,
    taus: &[f64],
) -> Result<(Table, Vec<(u8, f64)>)> {
    if taus.len() < 2 || taus.iter().any(|&x| !(x > 0.0)) {
        return Err(config_err("trotter-error needs two or more positive tau values"));
    }
    let h = PauliTermSum::hubbard_compact(t_hop, u);
    let mut t = Table::new(&["order", "n", "tau", "error_norm"]);
    let mut slopes = Vec::new();
    for &order in orders {
        let plan = TrotterPlan::new(&h, order, n).map_err(|e| config_err(e.to_string()))?;
        let mut pts = Vec::new();
        for &tau in taus {
            let e = models::trotter_error_norm(&h, tau, &plan)?;
            pts.push((tau.ln(), e.ln()));
            t.push(vec![order.to_string(), n.to_string(), tau.to_string(), e.to_string()]);
        }
        slopes.push((order, loglog_slope(&pts)));
    }
    Ok((t, slopes))
}
