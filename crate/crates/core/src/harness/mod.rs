//! Experiment harness: synthetic data, CSV ingestion, per-step streaming of
//! any model with forecast scoring, and reports.

mod data;
mod ltv;
mod metrics;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use data::{ingest_csv, write_dataset_csv, Dataset, Layout};
pub use ltv::{gen_ltv, LtvSpec, LtvSystem};
pub use metrics::{frob_pred_error, mean_nrmse, nrmse};
pub use report::{emit_report, load_report_json, read_records_csv, ReportFormat, RunMeta, StepRecord, StreamReport};

use crate::config::StreamConfig;
use crate::dmd::{spectrum_of, DmdModel, ModeKind, Spectrum};
use crate::dmdc::DmdcModel;
use crate::error::{Error, Result};
use crate::incsvd::Mode;
use crate::linalg::{eig, TruncationPolicy};
use crate::online::{default_alpha, online_init, OnlineState};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Dmd,
    Dmdc,
    /// Recursive least-squares baseline without inputs.
    Online,
    /// Recursive least-squares baseline with inputs.
    Onlinec,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dmd => "dmd",
            ModelKind::Dmdc => "dmdc",
            ModelKind::Online => "online",
            ModelKind::Onlinec => "onlinec",
        }
    }

    pub fn uses_inputs(self) -> bool {
        matches!(self, ModelKind::Dmdc | ModelKind::Onlinec)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ModelKind::Dmd, ModelKind::Dmdc, ModelKind::Online, ModelKind::Onlinec]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// Everything `run_stream` needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub model: ModelKind,
    pub config: StreamConfig,
    /// Truncation of the state-only regressor (DMDc reduced basis).
    pub state_truncation: TruncationPolicy,
    /// Pairs used for the batch initialization.
    pub init_window: usize,
    pub horizon: usize,
    /// Baseline `P = alpha I`; defaults to the data-scaled heuristic.
    pub alpha: Option<f64>,
    /// Seed the baseline with the exact inverse Gramian of the init window.
    pub exact_seed: bool,
    /// Score nrmse on one channel instead of averaging over channels.
    pub nrmse_channel: Option<usize>,
    pub record_timing: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            model: ModelKind::Dmd,
            config: StreamConfig::default(),
            state_truncation: TruncationPolicy::None,
            init_window: 40,
            horizon: 10,
            alpha: None,
            exact_seed: false,
            nrmse_channel: None,
            record_timing: false,
        }
    }
}

/// A streaming model of any supported kind.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum AnyModel {
    Dmd(DmdModel),
    Dmdc(DmdcModel),
    Online(OnlineState),
}

impl AnyModel {
    /// Initialize from pairs `0 .. spec.init_window` of `data`. Windowed SVD
    /// models use the last `w` of those pairs.
    pub fn init(spec: &RunSpec, data: &Dataset) -> Result<Self> {
        let m0 = spec.init_window;
        if m0 == 0 || m0 + 1 > data.len() {
            return Err(Error::InvalidInput(format!("init window {m0} does not fit {} snapshots", data.len())));
        }
        if spec.model.uses_inputs() && data.l() == 0 {
            return Err(Error::InvalidInput(format!("model {} needs input channels", spec.model)));
        }
        let cfg = &spec.config;
        let start = match (cfg.mode, spec.model) {
            (Mode::Windowed, ModelKind::Dmd | ModelKind::Dmdc) => {
                if m0 < cfg.window {
                    return Err(Error::InvalidInput(format!("init window {m0} is shorter than w = {}", cfg.window)));
                }
                m0 - cfg.window
            }
            _ => 0,
        };
        let (x, y, g) = data.pairs(start, m0 - start);
        match spec.model {
            ModelKind::Dmd => Ok(AnyModel::Dmd(DmdModel::init(&x, &y, cfg.clone())?)),
            ModelKind::Dmdc => Ok(AnyModel::Dmdc(DmdcModel::init(&x, &y, &g, cfg.clone(), spec.state_truncation)?)),
            ModelKind::Online | ModelKind::Onlinec => {
                cfg.validate()?;
                let gamma = (spec.model == ModelKind::Onlinec).then_some(&g);
                if spec.exact_seed {
                    let rho = if cfg.mode == Mode::Windowed { 1.0 } else { cfg.rho };
                    if cfg.mode == Mode::Windowed && m0 != cfg.window {
                        return Err(Error::InvalidInput("exact windowed seed needs init window = w".into()));
                    }
                    return Ok(AnyModel::Online(OnlineState::seed_exact(&x, &y, gamma, cfg.mode, rho)?));
                }
                let alpha = spec.alpha.unwrap_or_else(|| default_alpha(&x));
                let l = gamma.map_or(0, |g| g.nrows());
                let s = online_init(None, alpha, data.n(), l)?;
                let mut s = match cfg.mode {
                    Mode::Weighted => s.with_rho(cfg.rho)?,
                    Mode::Windowed => s.with_window(cfg.window)?,
                };
                for k in 0..m0 {
                    let gk = gamma.map(|g| g.column(k).into_owned());
                    s.step(&x.column(k).into_owned(), &y.column(k).into_owned(), gk.as_ref())?;
                }
                Ok(AnyModel::Online(s))
            }
        }
    }

    pub fn step(&mut self, x: &DVector<f64>, y: &DVector<f64>, gamma: &DVector<f64>) -> Result<()> {
        match self {
            AnyModel::Dmd(m) => m.step_pair(x, y),
            AnyModel::Dmdc(m) => m.step_triplet(x, y, gamma),
            AnyModel::Online(s) => s.step(x, y, (s.l() > 0).then_some(gamma)),
        }
    }

    /// Forecast from `x0`, driven by `inputs` when the model uses them.
    pub fn predict(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        match self {
            AnyModel::Dmd(m) => m.predict(x0, inputs.len()),
            AnyModel::Dmdc(m) => m.predict_with_input(x0, inputs),
            AnyModel::Online(s) if s.l() > 0 => s.predict(x0, inputs.len(), inputs),
            AnyModel::Online(s) => s.predict(x0, inputs.len(), &[]),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            AnyModel::Dmd(m) => m.rank(),
            AnyModel::Dmdc(m) => m.rank(),
            AnyModel::Online(s) => s.n(),
        }
    }

    /// Singular values of the state regressor; empty for the baseline.
    pub fn singular_values(&self) -> Vec<f64> {
        match self {
            AnyModel::Dmd(m) => m.svd().s().iter().copied().collect(),
            AnyModel::Dmdc(m) => m.svd_state().s().iter().copied().collect(),
            AnyModel::Online(_) => Vec::new(),
        }
    }

    /// Full state operator `A`.
    pub fn operator(&self) -> DMatrix<f64> {
        match self {
            AnyModel::Dmd(m) => m.operator(),
            AnyModel::Dmdc(m) => m.a_full(),
            AnyModel::Online(s) => s.a(),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        match self {
            AnyModel::Dmd(m) => Ok(eig(m.a_tilde())?.0),
            AnyModel::Dmdc(m) => Ok(eig(m.a_tilde())?.0),
            AnyModel::Online(s) => Ok(eig(&s.a())?.0),
        }
    }

    pub fn spectrum(&self, kind: ModeKind, dt: f64) -> Result<Spectrum> {
        match self {
            AnyModel::Dmd(m) => m.spectrum(kind),
            AnyModel::Dmdc(m) => m.spectrum(kind),
            AnyModel::Online(s) => {
                let a = s.a();
                match kind {
                    ModeKind::Projected => spectrum_of(&a, &DMatrix::identity(s.n(), s.n()), dt),
                    ModeKind::Exact => spectrum_of(&a, &a, dt),
                }
            }
        }
    }

    pub fn last_step_rebuilt(&self) -> bool {
        match self {
            AnyModel::Dmd(m) => m.last_step_rebuilt(),
            AnyModel::Dmdc(m) => m.last_step_rebuilt(),
            AnyModel::Online(_) => false,
        }
    }
}

/// Number of records `run_stream` produces for `len` snapshots.
pub fn record_count(len: usize, init_window: usize, horizon: usize) -> usize {
    len.saturating_sub(1 + init_window + horizon)
}

/// Stream `data` through the model described by `spec`.
pub fn run_stream(spec: &RunSpec, data: &Dataset) -> Result<StreamReport> {
    run_stream_observed(spec, data, |_, _| true)
}

/// As [`run_stream`], calling `observe(k, model)` after the model has absorbed
/// pair `k` (first with `k = init_window - 1`). Returning `false` stops early.
pub fn run_stream_observed<F>(spec: &RunSpec, data: &Dataset, mut observe: F) -> Result<StreamReport>
where
    F: FnMut(usize, &AnyModel) -> bool,
{
    if spec.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if record_count(data.len(), spec.init_window, spec.horizon) == 0 {
        return Err(Error::InvalidInput(format!(
            "{} snapshots leave no steps after init window {} and horizon {}",
            data.len(),
            spec.init_window,
            spec.horizon
        )));
    }
    if let Some(c) = spec.nrmse_channel {
        if c >= data.n() {
            return Err(Error::InvalidInput(format!("nrmse channel {c} out of range")));
        }
    }
    let started = Instant::now();
    let mut model = AnyModel::init(spec, data)?;
    let mut records = Vec::with_capacity(record_count(data.len(), spec.init_window, spec.horizon));
    if observe(spec.init_window - 1, &model) {
        for k in spec.init_window..=data.len() - 2 - spec.horizon {
            model.step(&data.x(k), &data.x(k + 1), &data.gamma(k))?;
            let inputs: Vec<DVector<f64>> = (k + 1..k + 1 + spec.horizon).map(|j| data.gamma(j)).collect();
            let pred = model.predict(&data.x(k + 1), &inputs)?;
            let actual: Vec<DVector<f64>> = (k + 2..k + 2 + spec.horizon).map(|j| data.x(j)).collect();
            let nrmse = match spec.nrmse_channel {
                Some(c) => match metrics::nrmse(&pred, &actual, c) {
                    Ok(v) => Some(v),
                    Err(Error::DegenerateRange) => None,
                    Err(e) => return Err(e),
                },
                None => mean_nrmse(&pred, &actual)?,
            };
            records.push(StepRecord {
                k,
                rank: model.rank(),
                rebuild: model.last_step_rebuilt(),
                nrmse,
                frob_error: frob_pred_error(&pred, &actual)?,
                singular_values: model.singular_values(),
                eigenvalues: model.eigenvalues()?,
            });
            if !observe(k, &model) {
                break;
            }
        }
    }
    Ok(StreamReport {
        meta: RunMeta {
            spec: spec.clone(),
            n: data.n(),
            l: data.l(),
            samples: data.len(),
            seed: None,
            wall_clock_s: spec.record_timing.then(|| started.elapsed().as_secs_f64()),
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lti(seed: u64) -> Dataset {
        gen_ltv(&LtvSpec {
            n: 6,
            l: 2,
            m: 80,
            epsilon: 0.0,
            seed,
            ..Default::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn record_conservation() {
        let d = lti(1);
        let spec = RunSpec {
            model: ModelKind::Dmdc,
            init_window: 20,
            horizon: 5,
            ..Default::default()
        };
        let r = run_stream(&spec, &d).unwrap();
        assert_eq!(r.records.len(), record_count(80, 20, 5));
        assert_eq!(r.records.len(), 80 - 1 - 20 - 5);
        assert_eq!(r.records[0].k, 20);
        assert!(r.meta.wall_clock_s.is_none());
    }

    #[test]
    fn exact_identification() {
        let d = lti(2);
        for config in [StreamConfig::weighted(0.9), StreamConfig::windowed(20)] {
            let spec = RunSpec {
                model: ModelKind::Dmdc,
                config,
                init_window: 20,
                horizon: 10,
                ..Default::default()
            };
            let r = run_stream(&spec, &d).unwrap();
            for rec in &r.records {
                assert!(rec.frob_error < 1e-6, "k = {} error {}", rec.k, rec.frob_error);
            }
        }
    }

    #[test]
    fn autonomous_dmd_identification() {
        let (d, _) = gen_ltv(&LtvSpec {
            n: 5,
            l: 0,
            m: 60,
            epsilon: 0.0,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let spec = RunSpec {
            init_window: 10,
            ..Default::default()
        };
        let r = run_stream(&spec, &d).unwrap();
        assert!(r.records.iter().all(|rec| rec.frob_error < 1e-6));
    }

    #[test]
    fn baseline_tracks_dmd_with_exact_seed() {
        let d = lti(4);
        let base = RunSpec {
            model: ModelKind::Onlinec,
            config: StreamConfig::weighted(0.95),
            init_window: 20,
            exact_seed: true,
            ..Default::default()
        };
        let mut ops = Vec::new();
        run_stream_observed(&base, &d, |_, m| {
            ops.push(m.operator());
            true
        })
        .unwrap();
        let mut i = 0;
        run_stream_observed(&RunSpec { model: ModelKind::Dmdc, ..base.clone() }, &d, |_, m| {
            assert!((m.operator() - &ops[i]).norm() < 1e-6);
            i += 1;
            true
        })
        .unwrap();
        assert_eq!(i, ops.len());
    }

    #[test]
    fn misconfigured_runs() {
        let d = lti(5);
        let too_long = RunSpec { init_window: 75, ..Default::default() };
        assert!(matches!(run_stream(&too_long, &d), Err(Error::InvalidInput(_))));
        let short = RunSpec {
            config: StreamConfig::windowed(30),
            init_window: 20,
            ..Default::default()
        };
        assert!(matches!(run_stream(&short, &d), Err(Error::InvalidInput(_))));
        let plain = Dataset::new(d.states().clone(), None).unwrap();
        let needs_inputs = RunSpec { model: ModelKind::Dmdc, ..Default::default() };
        assert!(matches!(run_stream(&needs_inputs, &plain), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn deterministic_reports() {
        let d = lti(6);
        for model in [ModelKind::Dmd, ModelKind::Dmdc, ModelKind::Online, ModelKind::Onlinec] {
            let spec = RunSpec {
                model,
                init_window: 20,
                ..Default::default()
            };
            let a = run_stream(&spec, &d).unwrap();
            let b = run_stream(&spec, &d).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn early_stop() {
        let d = lti(7);
        let spec = RunSpec { init_window: 20, ..Default::default() };
        let r = run_stream_observed(&spec, &d, |k, _| k < 25).unwrap();
        assert_eq!(r.records.last().unwrap().k, 25);
    }

    #[test]
    fn model_names() {
        for k in [ModelKind::Dmd, ModelKind::Dmdc, ModelKind::Online, ModelKind::Onlinec] {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svd".parse::<ModelKind>().is_err());
    }
}
