//! Time-varying DMD: batch least squares plus discounted and sliding-window
//! streaming updates of the operator `A` with `y_k ~ A x_k`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::StreamConfig;
use crate::error::{Error, Result};
use crate::incsvd::{discount, Mode, SvdState};
use crate::linalg::{complexify, eig, TruncationPolicy};
use crate::operator::Tracked;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    /// `U W`
    Projected,
    /// `A U W`
    Exact,
}

/// Eigen-decomposition of a reduced operator and its lifted modes.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Sorted by descending modulus.
    pub eigenvalues: Vec<Complex64>,
    /// Columns are unit eigenvectors of the reduced operator.
    pub eigvecs: DMatrix<Complex64>,
    pub modes: DMatrix<Complex64>,
    /// `ln(lambda) / dt` on the principal branch; a zero eigenvalue maps to
    /// real part `-inf`.
    pub cont_eigenvalues: Vec<Complex64>,
}

pub fn continuous(lambda: Complex64, dt: f64) -> Complex64 {
    if lambda.norm() == 0.0 {
        Complex64::new(f64::NEG_INFINITY, 0.0)
    } else {
        lambda.ln() / dt
    }
}

/// Spectrum of `a_tilde` with modes `lift * W`.
pub(crate) fn spectrum_of(a_tilde: &DMatrix<f64>, lift: &DMatrix<f64>, dt: f64) -> Result<Spectrum> {
    if a_tilde.nrows() == 0 {
        return Err(Error::DegenerateData("spectrum of a rank-0 model".into()));
    }
    let (eigenvalues, eigvecs) = eig(a_tilde)?;
    let modes = complexify(lift) * &eigvecs;
    let cont_eigenvalues = eigenvalues.iter().map(|&l| continuous(l, dt)).collect();
    Ok(Spectrum {
        eigenvalues,
        eigvecs,
        modes,
        cont_eigenvalues,
    })
}

pub(crate) fn check_pair(x: &DVector<f64>, y: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n || y.len() != n {
        return Err(Error::ShapeError(format!(
            "expected snapshots of length {n}, got x {} and y {}",
            x.len(),
            y.len()
        )));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("response has non-finite entries".into()));
    }
    Ok(())
}

/// Streaming DMD model.
#[derive(Clone, Debug)]
pub struct DmdModel {
    svd: SvdState,
    op: Tracked,
    a_tilde: DMatrix<f64>,
    config: StreamConfig,
    step: usize,
    y_buffer: VecDeque<DVector<f64>>,
    rebuilds: usize,
    last_rebuilt: bool,
}

/// Minimum-norm least-squares DMD of the pairs `(X, Y)`.
pub fn batch_dmd(x: &DMatrix<f64>, y: &DMatrix<f64>, truncation: TruncationPolicy) -> Result<DmdModel> {
    DmdModel::init(x, y, StreamConfig::batch(truncation))
}

impl DmdModel {
    /// Batch solution over an initial window, ready to stream in `config`'s mode.
    pub fn init(x: &DMatrix<f64>, y: &DMatrix<f64>, config: StreamConfig) -> Result<Self> {
        config.validate()?;
        if x.shape() != y.shape() {
            return Err(Error::ShapeError(format!(
                "X is {:?} but Y is {:?}",
                x.shape(),
                y.shape()
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("Y has non-finite entries".into()));
        }
        let (svd, v) = SvdState::from_batch_with_v(x, config.svd_options(false))?;
        if svd.rank() == 0 {
            return Err(Error::DegenerateData("no singular value above threshold".into()));
        }
        let yw = match config.mode {
            Mode::Weighted => discount(y, config.rho),
            Mode::Windowed => y.clone(),
        };
        let op = Tracked::from_batch(&yw, svd.u(), svd.s(), &v, config.maintain_full);
        let y_buffer = match config.mode {
            Mode::Windowed => y.column_iter().map(|c| c.into_owned()).collect(),
            Mode::Weighted => VecDeque::new(),
        };
        let mut model = DmdModel {
            a_tilde: DMatrix::zeros(0, 0),
            svd,
            op,
            step: x.ncols(),
            config,
            y_buffer,
            rebuilds: 0,
            last_rebuilt: false,
        };
        model.refresh();
        Ok(model)
    }

    fn refresh(&mut self) {
        self.a_tilde = self.svd.u().tr_mul(self.op.lifted());
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn svd(&self) -> &SvdState {
        &self.svd
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        self.svd.u()
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Explicit full operator, when maintained.
    pub fn a_bar(&self) -> Option<&DMatrix<f64>> {
        self.op.full()
    }

    /// Full operator, materialized from the lifted factor if not maintained.
    pub fn operator(&self) -> DMatrix<f64> {
        self.op.matrix(self.svd.u())
    }

    pub fn a_tilde(&self) -> &DMatrix<f64> {
        &self.a_tilde
    }

    /// `A U`, n x r.
    pub fn lifted(&self) -> &DMatrix<f64> {
        self.op.lifted()
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Whether the most recent step rebuilt the model from its buffers.
    pub fn last_step_rebuilt(&self) -> bool {
        self.last_rebuilt
    }

    /// Advance by one snapshot pair in the configured mode.
    pub fn step_pair(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        match self.config.mode {
            Mode::Weighted => self.weighted_step(x, y),
            Mode::Windowed => self.windowed_step(x, y),
        }
    }

    pub fn weighted_step(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if self.config.mode != Mode::Weighted {
            return Err(Error::ModeError("windowed"));
        }
        check_pair(x, y, self.svd.nrows())?;
        let info = self.svd.weighted_update(x)?;
        self.op.on_append(&info, x, y, self.svd.u());
        self.refresh();
        self.step += 1;
        self.last_rebuilt = false;
        Ok(())
    }

    pub fn windowed_step(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if self.config.mode != Mode::Windowed {
            return Err(Error::ModeError("weighted"));
        }
        check_pair(x, y, self.svd.nrows())?;
        let y_old = self.y_buffer.front().expect("full window").clone();
        let mut svd = self.svd.clone();
        let mut op = self.op.clone();
        let slid = svd.downdate_oldest().and_then(|d| {
            op.on_downdate(&d, &y_old, svd.u());
            let a = svd.append_column(x)?;
            op.on_append(&a, x, y, svd.u());
            Ok(())
        });
        match slid {
            Ok(()) => {
                self.svd = svd;
                self.op = op;
                self.y_buffer.pop_front();
                self.y_buffer.push_back(y.clone());
                self.refresh();
                self.last_rebuilt = false;
            }
            Err(Error::ConditioningError(_) | Error::DriftTooLarge { .. }) => self.rebuild(x, y)?,
            Err(e) => return Err(e),
        }
        self.step += 1;
        Ok(())
    }

    /// Re-solve from the buffered window shifted by `(x, y)`.
    fn rebuild(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        let xs: Vec<DVector<f64>> = self.svd.buffer().iter().skip(1).cloned().chain([x.clone()]).collect();
        let ys: Vec<DVector<f64>> = self.y_buffer.iter().skip(1).cloned().chain([y.clone()]).collect();
        let fresh = DmdModel::init(&DMatrix::from_columns(&xs), &DMatrix::from_columns(&ys), self.config.clone())?;
        let rebuilds = self.rebuilds + 1;
        let step = self.step;
        *self = fresh;
        self.step = step;
        self.rebuilds = rebuilds;
        self.last_rebuilt = true;
        Ok(())
    }

    pub fn spectrum(&self, kind: ModeKind) -> Result<Spectrum> {
        match kind {
            ModeKind::Projected => spectrum_of(&self.a_tilde, self.svd.u(), self.config.dt),
            ModeKind::Exact => spectrum_of(&self.a_tilde, self.op.lifted(), self.config.dt),
        }
    }

    /// Frozen-operator forecast `U A~^j U^T x0`, j = 1..h.
    pub fn predict(&self, x0: &DVector<f64>, h: usize) -> Result<Vec<DVector<f64>>> {
        let u = self.svd.u();
        if x0.len() != u.nrows() {
            return Err(Error::ShapeError(format!("x0 has length {}, expected {}", x0.len(), u.nrows())));
        }
        let mut z = u.tr_mul(x0);
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            z = &self.a_tilde * z;
            out.push(u * &z);
        }
        Ok(out)
    }
}

/// Free run `x_{j+1} = A_j x_j` through per-step operators. `operator(j)`
/// returns the operator current at step `j`.
pub fn free_run_reconstruct<F>(operator: F, x0: &DVector<f64>, steps: usize) -> Result<Vec<DVector<f64>>>
where
    F: Fn(usize) -> Option<DMatrix<f64>>,
{
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(steps);
    for j in 0..steps {
        let a = operator(j).ok_or(Error::MissingState(j))?;
        if a.ncols() != x.len() {
            return Err(Error::ShapeError(format!("operator {j} is {:?}", a.shape())));
        }
        x = a * x;
        out.push(x.clone());
    }
    Ok(out)
}
