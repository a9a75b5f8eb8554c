//! Streaming time-varying DMD and DMD with control, built on an incrementally
//! updated (weighted or sliding-window) SVD.

// NaN must fail the validity checks, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dmd;
pub mod dmdc;
pub mod error;
pub mod harness;
pub mod incsvd;
pub mod linalg;
pub mod online;
mod operator;

pub use config::StreamConfig;
pub use dmd::{batch_dmd, free_run_reconstruct, DmdModel, ModeKind, Spectrum};
pub use dmdc::{batch_dmdc, DmdcModel};
pub use error::{Error, Result};
pub use harness::{gen_ltv, run_stream, AnyModel, Dataset, Layout, LtvSpec, ModelKind, ReportFormat, RunSpec, StreamReport};
pub use incsvd::{Mode, SvdOptions, SvdState};
pub use linalg::{Factorization, TruncationPolicy};
pub use online::{online_init, OnlineState};
