use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incsvd::{Mode, SvdOptions};
use crate::linalg::TruncationPolicy;

/// How a streaming model discounts or forgets old snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub mode: Mode,
    pub rho: f64,
    /// Window width in samples (windowed mode).
    pub window: usize,
    pub truncation: TruncationPolicy,
    /// Sampling period used for continuous-time eigenvalues.
    pub dt: f64,
    /// Keep the full n x n operator next to the reduced one.
    pub maintain_full: bool,
    /// Permit `rho = 1` in weighted mode, i.e. an ever-growing batch.
    pub allow_unit_rho: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            mode: Mode::Weighted,
            rho: 0.9,
            window: 40,
            truncation: TruncationPolicy::None,
            dt: 1.0,
            maintain_full: true,
            allow_unit_rho: false,
        }
    }
}

impl StreamConfig {
    pub fn weighted(rho: f64) -> Self {
        StreamConfig {
            mode: Mode::Weighted,
            rho,
            ..Default::default()
        }
    }

    pub fn windowed(window: usize) -> Self {
        StreamConfig {
            mode: Mode::Windowed,
            rho: 1.0,
            window,
            ..Default::default()
        }
    }

    /// Undiscounted growing batch, the configuration behind `batch_dmd`.
    pub fn batch(truncation: TruncationPolicy) -> Self {
        StreamConfig {
            mode: Mode::Weighted,
            rho: 1.0,
            truncation,
            allow_unit_rho: true,
            ..Default::default()
        }
    }

    pub fn with_truncation(mut self, t: TruncationPolicy) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_full(mut self, maintain_full: bool) -> Self {
        self.maintain_full = maintain_full;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        self.svd_options(false).validate()
    }

    pub(crate) fn svd_options(&self, store_v: bool) -> SvdOptions {
        let base = match self.mode {
            Mode::Weighted => SvdOptions::weighted(self.rho).with_store_v(store_v),
            Mode::Windowed => SvdOptions {
                rho: self.rho,
                ..SvdOptions::windowed(self.window)
            },
        };
        let base = base.with_truncation(self.truncation);
        if self.allow_unit_rho {
            base.with_unit_rho()
        } else {
            base
        }
    }

    /// Columns the initial batch must have, if the mode fixes it.
    pub fn required_init(&self) -> Option<usize> {
        (self.mode == Mode::Windowed).then_some(self.window)
    }
}
