//! Dense kernels shared by the incremental SVD and the operator trackers.
//!
//! Everything here is a pure function of its arguments. Singular triplets are
//! always returned sorted by descending singular value, and the sign of each
//! left singular vector is fixed so that its largest-magnitude entry is
//! nonnegative (the matching right vector is flipped with it).

use nalgebra::{DMatrix, DVector, QR};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default orthonormality tolerance.
pub const TAU_ORTH: f64 = 1e-10;
/// Default relative reconstruction tolerance.
pub const TAU_RECON: f64 = 1e-10;
/// Singular values below this fraction of the largest are inverted as zero.
pub const INV_GUARD: f64 = 1e-14;
/// Triplets below this fraction of the largest are dropped after an update.
pub const RANK_TOL: f64 = 1e-12;
/// Drift past which repair is refused.
pub const DRIFT_LIMIT: f64 = 0.1;
/// Drift past which the update watchdog repairs.
pub const DRIFT_REPAIR: f64 = 1e-11;

/// Thin SVD `U diag(S) V^T` with `r` triplets.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Factorization {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        scale_columns(&self.u, &self.s) * self.v.transpose()
    }

    /// The first `k` triplets.
    pub fn leading(&self, k: usize) -> Factorization {
        let k = k.min(self.rank());
        Factorization {
            u: self.u.columns(0, k).into_owned(),
            s: self.s.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }
}

/// Rule for how many leading singular triplets survive truncation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// Keep singular values strictly greater than the threshold.
    Absolute(f64),
    /// Keep singular values strictly greater than `value * sigma_max`.
    Relative(f64),
    FixedRank(usize),
    #[default]
    None,
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Absolute(t) | TruncationPolicy::Relative(t) if !(t > 0.0) || !t.is_finite() => {
                Err(Error::InvalidInput(format!("truncation threshold must be positive, got {t}")))
            }
            TruncationPolicy::FixedRank(0) => {
                Err(Error::InvalidInput("fixed rank must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of leading values kept from a descending slice. Never zero for
    /// a nonempty slice.
    pub fn keep_count(&self, s: &[f64]) -> usize {
        if s.is_empty() {
            return 0;
        }
        let k = match *self {
            TruncationPolicy::Absolute(t) => s.iter().take_while(|&&x| x > t).count(),
            TruncationPolicy::Relative(t) => {
                let cut = t * s[0];
                s.iter().take_while(|&&x| x > cut).count()
            }
            TruncationPolicy::FixedRank(k) => k.min(s.len()),
            TruncationPolicy::None => s.len(),
        };
        k.max(1)
    }
}

/// Multiply column `j` of `m` by `d[j]`.
pub fn scale_columns(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

/// `||Q^T Q - I||_F`.
pub fn orth_drift(q: &DMatrix<f64>) -> f64 {
    let mut g = q.tr_mul(q);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

/// Reciprocals of `s`, with values at or below `INV_GUARD * max(s)` mapped to 0.
pub fn guarded_recip(s: &DVector<f64>) -> DVector<f64> {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = INV_GUARD * smax;
    s.map(|x| if x > cut { 1.0 / x } else { 0.0 })
}

/// Flip column signs so the largest-magnitude entry of each `u` column is
/// nonnegative; `v` columns follow.
pub(crate) fn fix_signs(u: &mut DMatrix<f64>, mut v: Option<&mut DMatrix<f64>>) {
    for j in 0..u.ncols() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..u.nrows() {
            let a = u[(i, j)];
            if a.abs() > best {
                best = a.abs();
                sign = a.signum();
            }
        }
        if sign < 0.0 {
            u.column_mut(j).neg_mut();
            if let Some(v) = v.as_deref_mut() {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Thin SVD with `r = min(n, m)` triplets, sorted and sign-normalized.
pub fn reduced_svd(m: &DMatrix<f64>) -> Result<Factorization> {
    check_finite(m, "matrix")?;
    let (nr, nc) = m.shape();
    let r = nr.min(nc);
    if r == 0 {
        return Ok(Factorization {
            u: DMatrix::zeros(nr, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(nc, 0),
        });
    }
    let a = faer::Mat::<f64>::from_fn(nr, nc, |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::NumericalError(format!("SVD did not converge: {e:?}")))?;
    let (u0, s0, v0) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s0[b].total_cmp(&s0[a]));

    let mut u = DMatrix::zeros(nr, r);
    let mut v = DMatrix::zeros(nc, r);
    let mut s = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..nr {
            u[(i, dst)] = u0[(i, src)];
        }
        for i in 0..nc {
            v[(i, dst)] = v0[(i, src)];
        }
        s[dst] = s0[src].max(0.0);
    }
    fix_signs(&mut u, Some(&mut v));
    Ok(Factorization { u, s, v })
}

/// SVD of the `r x (r+1)` matrix `[diag(sigma) | b]`.
pub fn broken_arrow_svd(sigma: &DVector<f64>, b: &DVector<f64>) -> Result<Factorization> {
    let r = sigma.len();
    if b.len() != r {
        return Err(Error::InvalidInput(format!(
            "broken arrow needs |b| = |sigma| = {r}, got {}",
            b.len()
        )));
    }
    if sigma.iter().any(|&x| x < 0.0) || sigma.as_slice().windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("sigma must be descending and nonnegative".into()));
    }
    let mut k = DMatrix::zeros(r, r + 1);
    for i in 0..r {
        k[(i, i)] = sigma[i];
        k[(i, r)] = b[i];
    }
    reduced_svd(&k)
}

/// Result of re-orthonormalizing a left factor and, optionally, a right one.
pub(crate) struct Repaired {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: Option<DMatrix<f64>>,
    /// `T` with `U_repaired ~= U_input T`, i.e. `R_u^T U_core`.
    pub basis_change: DMatrix<f64>,
}

/// QR both factors, re-diagonalize the small core. The represented matrix
/// `U S V^T` is preserved up to the input drift.
pub(crate) fn repair(u: &DMatrix<f64>, s: &DVector<f64>, v: Option<&DMatrix<f64>>) -> Result<Repaired> {
    let drift = orth_drift(u).max(v.map(orth_drift).unwrap_or(0.0));
    if !(drift < DRIFT_LIMIT) {
        return Err(Error::DriftTooLarge { drift });
    }
    let qr_u = QR::new(u.clone());
    let (qu, ru) = (qr_u.q(), qr_u.r());
    let mut core = ru.clone() * DMatrix::from_diagonal(s);
    let mut qv = None;
    if let Some(v) = v {
        let qr_v = QR::new(v.clone());
        core *= qr_v.r().transpose();
        qv = Some(qr_v.q());
    }
    let c = reduced_svd(&core)?;
    let mut u_new = &qu * &c.u;
    let mut v_new = match &qv {
        Some(q) => Some(q * &c.v),
        None => None,
    };
    // Sign-fix the lifted basis and carry the flips into the core rotation.
    let mut uc = c.u.clone();
    for j in 0..u_new.ncols() {
        let col = u_new.column(j);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            u_new.column_mut(j).neg_mut();
            uc.column_mut(j).neg_mut();
            if let Some(v) = v_new.as_mut() {
                v.column_mut(j).neg_mut();
            }
        }
    }
    Ok(Repaired {
        u: u_new,
        s: c.s,
        v: v_new,
        basis_change: ru.transpose() * uc,
    })
}

/// Restore exact orthonormality of `U` and `V`.
pub fn reorthonormalize(f: &Factorization) -> Result<Factorization> {
    let r = repair(&f.u, &f.s, Some(&f.v))?;
    Ok(Factorization {
        u: r.u,
        s: r.s,
        v: r.v.expect("right factor requested"),
    })
}

/// Keep the leading triplets selected by `policy`.
pub fn truncate(f: &Factorization, policy: TruncationPolicy) -> Factorization {
    f.leading(policy.keep_count(f.s.as_slice()))
}

/// Truncated-SVD pseudo-inverse, values at or below `rel_tol * sigma_max` dropped.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let f = reduced_svd(m)?;
    let smax = f.s.iter().cloned().fold(0.0, f64::max);
    let inv = f.s.map(|x| if x > rel_tol * smax { 1.0 / x } else { 0.0 });
    Ok(scale_columns(&f.v, &inv) * f.u.transpose())
}

/// Eigen-decomposition of a real square matrix.
///
/// Eigenvalues are sorted by descending modulus, ties broken by descending
/// real then imaginary part. Each eigenvector column has unit norm and its
/// largest-magnitude entry real and positive.
pub fn eig(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeError(format!("eig needs a square matrix, got {n}x{}", a.ncols())));
    }
    check_finite(a, "matrix")?;
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let e = m
        .eigen()
        .map_err(|e| Error::NumericalError(format!("eigen-solver failed: {e:?}")))?;
    let (vals, vecs) = (e.S().column_vector(), e.U());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (vals[i], vals[j]);
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });

    let mut lambda = Vec::with_capacity(n);
    let mut w = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        lambda.push(Complex64::new(vals[src].re, vals[src].im));
        let mut col: Vec<Complex64> = (0..n).map(|i| Complex64::new(vecs[(i, src)].re, vecs[(i, src)].im)).collect();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut lead = 0;
        for i in 1..n {
            if col[i].norm() > col[lead].norm() {
                lead = i;
            }
        }
        let phase = if col[lead].norm() > 0.0 { col[lead].conj() / col[lead].norm() } else { Complex64::new(1.0, 0.0) };
        let scale = if norm > 0.0 { phase / norm } else { phase };
        for z in col.iter_mut() {
            *z *= scale;
        }
        col[lead] = Complex64::new(col[lead].norm(), 0.0);
        for (i, z) in col.into_iter().enumerate() {
            w[(i, dst)] = z;
        }
    }
    Ok((lambda, w))
}

/// Real matrix to complex.
pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}
