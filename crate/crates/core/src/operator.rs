//! Least-squares operator `A = Y V Sigma^{-1} U^T` carried along an
//! incremental SVD of the regressor matrix.
//!
//! The operator is stored as the lifted factor `L = A U` (so `A = L U^T`) and,
//! when requested, also as the explicit matrix updated by rank-one
//! corrections. Both forms see the same corrections; the explicit form is
//! authoritative when present.

use nalgebra::{DMatrix, DVector};

use crate::incsvd::{AppendInfo, DowndateInfo};
use crate::linalg::{guarded_recip, scale_columns};

#[derive(Clone, Debug)]
pub(crate) struct Tracked {
    full: Option<DMatrix<f64>>,
    lifted: DMatrix<f64>,
}

impl Tracked {
    /// Batch solution from the (weighted) response `yw` and the thin SVD of
    /// the regressor.
    pub fn from_batch(
        yw: &DMatrix<f64>,
        u: &DMatrix<f64>,
        s: &DVector<f64>,
        v: &DMatrix<f64>,
        maintain_full: bool,
    ) -> Self {
        let lifted = scale_columns(&(yw * v), &guarded_recip(s));
        let full = maintain_full.then(|| &lifted * u.transpose());
        Tracked { full, lifted }
    }

    pub fn lifted(&self) -> &DMatrix<f64> {
        &self.lifted
    }

    pub fn full(&self) -> Option<&DMatrix<f64>> {
        self.full.as_ref()
    }

    pub fn matrix(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.full {
            Some(a) => a.clone(),
            None => &self.lifted * u.transpose(),
        }
    }

    fn residual(&self, x: &DVector<f64>, coeffs: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match &self.full {
            Some(a) => y - a * x,
            None => y - &self.lifted * coeffs,
        }
    }

    /// Account for a column pair `(x, y)` appended to the SVD; `u` is the
    /// basis after the update.
    pub fn on_append(&mut self, info: &AppendInfo, x: &DVector<f64>, y: &DVector<f64>, u: &DMatrix<f64>) {
        let res = self.residual(x, &info.coeffs, y);
        match self.full.as_mut() {
            Some(a) => {
                if info.dropped {
                    *a = &*a * u * u.transpose();
                }
                a.ger(1.0, &res, &info.gain_full, 1.0);
                self.lifted = &*a * u;
            }
            None => {
                let mut l = &self.lifted * &info.rotation;
                l.ger(1.0, &res, &info.gain, 1.0);
                if let Some(t) = &info.basis_change {
                    l *= t;
                }
                self.lifted = l;
            }
        }
    }

    /// Account for the oldest window pair leaving; `y_old` is its response.
    pub fn on_downdate(&mut self, info: &DowndateInfo, y_old: &DVector<f64>, u: &DMatrix<f64>) {
        let departing = info.departure.as_ref().map(|d| {
            let res = self.residual(&info.x_old, &info.coeffs, y_old) / d.qnorm;
            (res, d)
        });
        match self.full.as_mut() {
            Some(a) => {
                if info.dropped {
                    *a = &*a * u * u.transpose();
                }
                if let Some((res, d)) = &departing {
                    a.ger(1.0, res, &d.gain_full, 1.0);
                }
                self.lifted = &*a * u;
            }
            None => {
                let mut l = &self.lifted * &info.rotation;
                if let Some((res, d)) = &departing {
                    l.ger(1.0, res, &d.gain, 1.0);
                }
                if let Some(t) = &info.basis_change {
                    l *= t;
                }
                self.lifted = l;
            }
        }
    }
}
