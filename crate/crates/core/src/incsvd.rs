//! Incremental SVD of a discounted or sliding-window snapshot matrix.
//!
//! Weighted mode tracks `X_k = [rho^{k-1} x_1, ..., rho x_{k-1}, x_k]`;
//! windowed mode tracks the last `w` raw columns. Updates return the small
//! rotation data the operator trackers in [`crate::dmd`] and [`crate::dmdc`]
//! need, so neither has to touch the data matrix again.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    broken_arrow_svd, fix_signs, guarded_recip, orth_drift, reduced_svd, repair, scale_columns,
    Factorization, TruncationPolicy, DRIFT_REPAIR, RANK_TOL,
};


/// Repaired `(u, s, v)` plus the basis change applied, if any.
type Repaired = (DMatrix<f64>, DVector<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>);
/// Relative residual above which an appended column extends the basis.
const EXPAND_TOL: f64 = 1e-10;
/// Norm of the out-of-span part of the departing row above which the right
/// basis is augmented during a downdate.
const AUGMENT_TOL: f64 = 1e-10;
/// Largest admissible singular value discarded because the window lost a column.
const SPURIOUS_TOL: f64 = 1e-8;
/// Discount below which the `1/rho` amplification is refused.
pub const MIN_RHO: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Weighted,
    Windowed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Weighted => "weighted",
            Mode::Windowed => "windowed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdOptions {
    pub mode: Mode,
    pub rho: f64,
    pub window: usize,
    pub store_v: bool,
    pub truncation: TruncationPolicy,
    /// Permit `rho = 1` in weighted mode (a growing, undiscounted window).
    pub allow_unit_rho: bool,
}

impl SvdOptions {
    pub fn weighted(rho: f64) -> Self {
        SvdOptions {
            mode: Mode::Weighted,
            rho,
            window: 0,
            store_v: false,
            truncation: TruncationPolicy::None,
            allow_unit_rho: false,
        }
    }

    pub fn windowed(window: usize) -> Self {
        SvdOptions {
            mode: Mode::Windowed,
            rho: 1.0,
            window,
            store_v: true,
            truncation: TruncationPolicy::None,
            allow_unit_rho: false,
        }
    }

    pub fn with_truncation(mut self, t: TruncationPolicy) -> Self {
        self.truncation = t;
        self
    }

    pub fn with_store_v(mut self, store_v: bool) -> Self {
        self.store_v = store_v;
        self
    }

    pub fn with_unit_rho(mut self) -> Self {
        self.allow_unit_rho = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        match self.mode {
            Mode::Weighted if self.rho == 1.0 && !self.allow_unit_rho => Err(Error::InvalidInput(
                "weighted mode with rho = 1 needs an explicit opt-in".into(),
            )),
            Mode::Windowed if self.rho != 1.0 => {
                Err(Error::InvalidInput("windowed mode requires rho = 1".into()))
            }
            Mode::Windowed if self.window < 2 => {
                Err(Error::InvalidInput("window width must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Small-factor data from appending one column.
#[derive(Clone, Debug)]
pub struct AppendInfo {
    /// `U_old^T x`.
    pub coeffs: DVector<f64>,
    /// `U_old^T U_new`, read off the small left factor.
    pub rotation: DMatrix<f64>,
    /// Last row of the (truncated) small right factor.
    pub v_last_row: DVector<f64>,
    /// `Sigma_new^{-1} v_last_row`.
    pub gain: DVector<f64>,
    /// `U_new Sigma_new^{-1} v_last_row`, length n.
    pub gain_full: DVector<f64>,
    /// A triplet was discarded, so `span(U_new)` may miss part of `span(U_old)`.
    pub dropped: bool,
    /// Set when the drift watchdog repaired the basis: `U_before^T U_after`.
    pub basis_change: Option<DMatrix<f64>>,
}

/// Contribution of the departing column when it was not fully explained by
/// the other window columns.
#[derive(Clone, Debug)]
pub struct Departure {
    /// Norm of the component of the departing coordinate row outside span(V).
    pub qnorm: f64,
    pub gain: DVector<f64>,
    pub gain_full: DVector<f64>,
}

/// Small-factor data from removing the oldest window column.
#[derive(Clone, Debug)]
pub struct DowndateInfo {
    /// `U_old^T x_old`.
    pub coeffs: DVector<f64>,
    pub rotation: DMatrix<f64>,
    pub departure: Option<Departure>,
    pub x_old: DVector<f64>,
    /// `max |[v_1, q] . V_s|` over kept columns; zero in exact arithmetic.
    pub orthogonality: f64,
    pub dropped: bool,
    pub basis_change: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct SvdState {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: Option<DMatrix<f64>>,
    opts: SvdOptions,
    ncols: usize,
    buffer: VecDeque<DVector<f64>>,
    repairs: usize,
}

/// Number of leading entries of a descending vector kept after dropping
/// numerical zeros.
fn numerical_rank(s: &DVector<f64>) -> usize {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    s.iter().take_while(|&&x| x > RANK_TOL * smax && x > 0.0).count()
}

fn row_head(m: &DMatrix<f64>, i: usize, k: usize) -> DVector<f64> {
    DVector::from_iterator(k, m.row(i).iter().take(k).cloned())
}

fn check_column(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::ShapeError(format!("expected a column of length {n}, got {}", x.len())));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("column has non-finite entries".into()));
    }
    Ok(())
}

/// Scale column `j` of an `m0`-column batch by `rho^(m0 - 1 - j)`.
pub fn discount(x: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let m0 = x.ncols();
    let mut xw = x.clone();
    if rho != 1.0 {
        for (j, mut col) in xw.column_iter_mut().enumerate() {
            col *= rho.powi((m0 - 1 - j) as i32);
        }
    }
    xw
}

/// Project `x` off `span(u)` twice; returns (coefficients, residual).
fn split(u: &DMatrix<f64>, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut c = u.tr_mul(x);
    let mut p = x - u * &c;
    let c2 = u.tr_mul(&p);
    p -= u * &c2;
    c += c2;
    (c, p)
}

impl SvdState {
    pub fn from_batch(x: &DMatrix<f64>, opts: SvdOptions) -> Result<Self> {
        Self::from_batch_with_v(x, opts).map(|(s, _)| s)
    }

    /// Like [`SvdState::from_batch`], also returning the right factor of the
    /// weighted batch whether or not the state keeps it.
    pub fn from_batch_with_v(x: &DMatrix<f64>, opts: SvdOptions) -> Result<(Self, DMatrix<f64>)> {
        opts.validate()?;
        let m0 = x.ncols();
        if m0 == 0 {
            return Err(Error::InvalidInput("initial batch has no columns".into()));
        }
        if opts.mode == Mode::Windowed && m0 != opts.window {
            return Err(Error::WindowSizeMismatch {
                window: opts.window,
                got: m0,
            });
        }
        let xw = match opts.mode {
            Mode::Weighted => discount(x, opts.rho),
            Mode::Windowed => x.clone(),
        };
        let f = reduced_svd(&xw)?;
        let k = numerical_rank(&f.s);
        let k = if k == 0 { 0 } else { opts.truncation.keep_count(&f.s.as_slice()[..k]) };
        let f = f.leading(k);
        let keep_v = opts.mode == Mode::Windowed || opts.store_v;
        let buffer = if opts.mode == Mode::Windowed {
            x.column_iter().map(|c| c.into_owned()).collect()
        } else {
            VecDeque::new()
        };
        let state = SvdState {
            u: f.u,
            s: f.s,
            v: keep_v.then(|| f.v.clone()),
            opts,
            ncols: m0,
            buffer,
            repairs: 0,
        };
        Ok((state, f.v))
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn v(&self) -> Option<&DMatrix<f64>> {
        self.v.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn mode(&self) -> Mode {
        self.opts.mode
    }

    pub fn rho(&self) -> f64 {
        self.opts.rho
    }

    pub fn window(&self) -> usize {
        self.opts.window
    }

    pub fn options(&self) -> &SvdOptions {
        &self.opts
    }

    pub fn buffer(&self) -> &VecDeque<DVector<f64>> {
        &self.buffer
    }

    /// Times the drift watchdog has re-orthonormalized the factors.
    pub fn repairs(&self) -> usize {
        self.repairs
    }

    pub fn factors(&self) -> Option<Factorization> {
        self.v.as_ref().map(|v| Factorization {
            u: self.u.clone(),
            s: self.s.clone(),
            v: v.clone(),
        })
    }

    /// Add `x` with the older columns discounted by `rho`.
    pub fn weighted_update(&mut self, x: &DVector<f64>) -> Result<AppendInfo> {
        if self.opts.mode != Mode::Weighted {
            return Err(Error::ModeError("windowed"));
        }
        let rho = self.opts.rho;
        if rho < MIN_RHO {
            return Err(Error::ConditioningError(format!(
                "rho = {rho} amplifies the new column beyond working accuracy"
            )));
        }
        self.append_scaled(x, rho)
    }

    /// Add `x` with weight 1 and no discount.
    pub fn append_column(&mut self, x: &DVector<f64>) -> Result<AppendInfo> {
        if self.opts.mode == Mode::Windowed && self.buffer.len() >= self.opts.window {
            return Err(Error::BufferOverflow {
                len: self.buffer.len(),
                window: self.opts.window,
            });
        }
        self.append_scaled(x, 1.0)
    }

    fn append_scaled(&mut self, x: &DVector<f64>, rho: f64) -> Result<AppendInfo> {
        check_column(x, self.nrows())?;
        let r = self.rank();
        let (c, p) = split(&self.u, x);
        let beta = p.norm();
        let expand = beta > EXPAND_TOL * x.norm() && beta > 0.0;

        let b = &c / rho;
        let small = if expand {
            let mut k = DMatrix::zeros(r + 1, r + 1);
            for i in 0..r {
                k[(i, i)] = self.s[i];
                k[(i, r)] = b[i];
            }
            k[(r, r)] = beta / rho;
            reduced_svd(&k)?
        } else {
            broken_arrow_svd(&self.s, &b)?
        };
        let s_all = &small.s * rho;
        let k_num = numerical_rank(&s_all);
        let k = if k_num == 0 { 0 } else { self.opts.truncation.keep_count(&s_all.as_slice()[..k_num]) };
        let dropped = k < small.rank();

        let uk = small.u.columns(0, k);
        let u_new = if expand {
            let mut ext = self.u.clone().insert_column(r, 0.0);
            ext.set_column(r, &(&p / beta));
            ext * uk
        } else {
            &self.u * uk
        };
        let s_new = s_all.rows(0, k).into_owned();
        let v_last = row_head(&small.v, r, k);
        let gain = v_last.component_mul(&guarded_recip(&s_new));
        let gain_full = &u_new * &gain;
        let rotation = small.u.view((0, 0), (r, k)).into_owned();

        let v_new = self.v.as_ref().map(|v| {
            let top = v * small.v.view((0, 0), (r, k));
            top.insert_row(v.nrows(), 0.0)
        });
        let v_new = v_new.map(|mut v| {
            let last = v.nrows() - 1;
            v.row_mut(last).copy_from(&v_last.transpose());
            v
        });

        let (u_new, s_new, v_new, basis_change) = self.watchdog(u_new, s_new, v_new)?;
        self.u = u_new;
        self.s = s_new;
        self.v = v_new;
        self.ncols += 1;
        if self.opts.mode == Mode::Windowed {
            self.buffer.push_back(x.clone());
        }
        Ok(AppendInfo {
            coeffs: c,
            rotation,
            v_last_row: v_last,
            gain,
            gain_full,
            dropped,
            basis_change,
        })
    }

    /// Remove the oldest window column.
    pub fn downdate_oldest(&mut self) -> Result<DowndateInfo> {
        if self.opts.mode != Mode::Windowed {
            return Err(Error::ModeError("weighted"));
        }
        let w = self.opts.window;
        if self.buffer.len() != w {
            return Err(Error::BufferUnderflow {
                len: self.buffer.len(),
                window: w,
            });
        }
        let v = self.v.as_ref().expect("windowed state keeps V");
        let r = self.rank();
        let x_old = self.buffer.front().expect("full buffer").clone();

        // Component of the first coordinate vector outside span(V).
        let v1: DVector<f64> = v.row(0).transpose();
        let mut q = -(v * &v1);
        q[0] += 1.0;
        let q2 = v.tr_mul(&q);
        q -= v * q2;
        let qnorm = q.norm();
        let augment = qnorm > AUGMENT_TOL;
        let width = r + augment as usize;

        let mut v1e = DVector::zeros(width);
        v1e.rows_mut(0, r).copy_from(&v1);
        if augment {
            v1e[r] = qnorm;
        }
        let c_old = self.u.tr_mul(&x_old);
        let mut sm = DMatrix::zeros(r, width);
        for i in 0..r {
            sm[(i, i)] = self.s[i];
        }
        sm -= &c_old * v1e.transpose();
        let small = reduced_svd(&sm)?;

        // The window now has w - 1 columns: anything beyond that is padding.
        let smax = small.s.iter().cloned().fold(0.0, f64::max);
        let cap = small.rank().min(w - 1);
        if let Some(&worst) = small.s.as_slice()[cap..].first() {
            if worst > SPURIOUS_TOL * smax {
                return Err(Error::ConditioningError(format!(
                    "downdate left a padding singular value {worst:.3e} (sigma_max {smax:.3e})"
                )));
            }
        }
        let s_cap = small.s.rows(0, cap).into_owned();
        let k_num = numerical_rank(&s_cap);
        let k = if k_num == 0 { 0 } else { self.opts.truncation.keep_count(&s_cap.as_slice()[..k_num]) };
        let dropped = k < r;

        let vs = small.v.columns(0, k);
        let orthogonality = (v1e.transpose() * vs).amax();
        let u_new = &self.u * small.u.columns(0, k);
        let s_new = small.s.rows(0, k).into_owned();
        let mut v_ext = v.clone();
        if augment {
            v_ext = v_ext.insert_column(r, 0.0);
            v_ext.set_column(r, &(&q / qnorm));
        }
        let v_new = v_ext.rows(1, w - 1) * vs;
        let rotation = small.u.columns(0, k).into_owned();

        let departure = augment.then(|| {
            let v_bot = row_head(&small.v, r, k);
            let gain = v_bot.component_mul(&guarded_recip(&s_new));
            let gain_full = &u_new * &gain;
            Departure { qnorm, gain, gain_full }
        });

        let (u_new, s_new, v_new, basis_change) = self.watchdog(u_new, s_new, Some(v_new))?;
        self.u = u_new;
        self.s = s_new;
        self.v = v_new;
        self.ncols -= 1;
        self.buffer.pop_front();
        Ok(DowndateInfo {
            coeffs: c_old,
            rotation,
            departure,
            x_old,
            orthogonality,
            dropped,
            basis_change,
        })
    }

    /// Slide the window one column: drop the oldest, append `x`.
    pub fn window_update(&mut self, x: &DVector<f64>) -> Result<(DowndateInfo, AppendInfo)> {
        check_column(x, self.nrows())?;
        let mut next = self.clone();
        let d = next.downdate_oldest()?;
        let a = next.append_column(x)?;
        *self = next;
        Ok((d, a))
    }

    /// SVD of `[X; Gamma]` from the stored factors of `X`.
    pub fn augment_rows(&self, gamma: &DMatrix<f64>) -> Result<Factorization> {
        let f = self.factors().ok_or(Error::MissingRightFactors)?;
        augment_factor_rows(&f, gamma)
    }

    fn watchdog(
        &mut self,
        u: DMatrix<f64>,
        s: DVector<f64>,
        v: Option<DMatrix<f64>>,
    ) -> Result<Repaired> {
        let drift = orth_drift(&u).max(v.as_ref().map(orth_drift).unwrap_or(0.0));
        if drift <= DRIFT_REPAIR {
            return Ok((u, s, v, None));
        }
        let fixed = repair(&u, &s, v.as_ref())?;
        self.repairs += 1;
        Ok((fixed.u, fixed.s, fixed.v, Some(fixed.basis_change)))
    }
}

/// Row augmentation of a thin SVD: factors of `[U S V^T; Gamma]`.
///
/// `Gamma^T` is split into its part in span(V) and an orthonormal complement
/// `Q R`, so the small core is `[[S, 0], [Gamma V, R^T]]`. With `Gamma`'s rows
/// inside span(V) the complement is empty and the core is `[S; Gamma V]`.
pub fn augment_factor_rows(f: &Factorization, gamma: &DMatrix<f64>) -> Result<Factorization> {
    let (m, r) = f.v.shape();
    let l = gamma.nrows();
    if gamma.ncols() != m {
        return Err(Error::ShapeError(format!(
            "Gamma has {} columns, factors represent {m}",
            gamma.ncols()
        )));
    }
    let gt = gamma.transpose();
    let mut ct = f.v.tr_mul(&gt);
    let mut e = &gt - &f.v * &ct;
    let ct2 = f.v.tr_mul(&e);
    e -= &f.v * &ct2;
    ct += ct2;

    let scale = f.s.iter().cloned().fold(gamma.norm(), f64::max);
    let (q, rt) = if e.norm() > 1e-13 * scale {
        let fe = reduced_svd(&e)?;
        let t = fe.s.iter().take_while(|&&x| x > 1e-13 * scale).count();
        let q = fe.u.columns(0, t).into_owned();
        let rt = scale_columns(&fe.v.columns(0, t).into_owned(), &fe.s.rows(0, t).into_owned());
        (q, rt)
    } else {
        (DMatrix::zeros(m, 0), DMatrix::zeros(l, 0))
    };
    let t = q.ncols();

    let mut core = DMatrix::zeros(r + l, r + t);
    for i in 0..r {
        core[(i, i)] = f.s[i];
    }
    core.view_mut((r, 0), (l, r)).copy_from(&ct.transpose());
    core.view_mut((r, r), (l, t)).copy_from(&rt);
    let small = reduced_svd(&core)?;

    let n = f.u.nrows();
    let k = small.rank();
    let mut u = DMatrix::zeros(n + l, k);
    u.view_mut((0, 0), (n, k)).copy_from(&(&f.u * small.u.rows(0, r)));
    u.view_mut((n, 0), (l, k)).copy_from(&small.u.rows(r, l));
    let mut basis = f.v.clone();
    if t > 0 {
        basis = basis.resize_horizontally(r + t, 0.0);
        basis.view_mut((0, r), (m, t)).copy_from(&q);
    }
    let mut v = basis * small.v;
    fix_signs(&mut u, Some(&mut v));
    Ok(Factorization { u, s: small.s, v })
}
