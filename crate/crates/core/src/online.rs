//! Recursive least-squares online DMD (optionally with inputs), the baseline
//! the SVD-based models are compared against.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::incsvd::{discount, Mode};

const DENOM_GUARD: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OnlineState {
    /// `[A B]`, n x (n + l).
    g: DMatrix<f64>,
    /// Inverse Gramian of the regressor, (n + l) square.
    p: DMatrix<f64>,
    rho: f64,
    mode: Mode,
    window: usize,
    n: usize,
    l: usize,
    z_buffer: VecDeque<DVector<f64>>,
    y_buffer: VecDeque<DVector<f64>>,
    steps: usize,
}

/// `P = alpha I`, operator `a0` (or zero), discount 1.
pub fn online_init(a0: Option<&DMatrix<f64>>, alpha: f64, n: usize, l: usize) -> Result<OnlineState> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    let mut g = DMatrix::zeros(n, n + l);
    if let Some(a0) = a0 {
        if a0.shape() != (n, n) && a0.shape() != (n, n + l) {
            return Err(Error::ShapeError(format!("initial operator is {:?}", a0.shape())));
        }
        g.columns_mut(0, a0.ncols()).copy_from(a0);
    }
    Ok(OnlineState {
        g,
        p: DMatrix::identity(n + l, n + l) * alpha,
        rho: 1.0,
        mode: Mode::Weighted,
        window: 0,
        n,
        l,
        z_buffer: VecDeque::new(),
        y_buffer: VecDeque::new(),
        steps: 0,
    })
}

/// Heuristic `alpha = 1e6 / s^2`, `s` the RMS entry of the seed data.
pub fn default_alpha(x: &DMatrix<f64>) -> f64 {
    let s2 = if x.is_empty() { 0.0 } else { x.norm_squared() / x.len() as f64 };
    if s2 > 0.0 && s2.is_finite() {
        1e6 / s2
    } else {
        1e6
    }
}

fn stack_cols(x: &DMatrix<f64>, gamma: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    match gamma {
        Some(g) if g.nrows() > 0 => {
            let mut z = DMatrix::zeros(x.nrows() + g.nrows(), x.ncols());
            z.rows_mut(0, x.nrows()).copy_from(x);
            z.rows_mut(x.nrows(), g.nrows()).copy_from(g);
            z
        }
        _ => x.clone(),
    }
}

impl OnlineState {
    /// Exact seed from a batch: `P = (Z Z^T)^-1`, `G = Y Z^T P` on the
    /// discounted (weighted) or raw (windowed) data. Requires `Z Z^T` invertible.
    pub fn seed_exact(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        gamma: Option<&DMatrix<f64>>,
        mode: Mode,
        rho: f64,
    ) -> Result<Self> {
        if x.shape() != y.shape() || gamma.is_some_and(|g| g.ncols() != x.ncols()) {
            return Err(Error::ShapeError("seed matrices disagree in shape".into()));
        }
        let z = stack_cols(x, gamma);
        let (zw, yw) = match mode {
            Mode::Weighted => (discount(&z, rho), discount(y, rho)),
            Mode::Windowed => (z.clone(), y.clone()),
        };
        let gram = &zw * zw.transpose();
        let ev = gram.clone().symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        if !(lo > 1e-12 * hi) {
            return Err(Error::ConditioningError(format!("seed Gramian is singular (eigenvalues {lo:e}..{hi:e})")));
        }
        let p = gram
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::ConditioningError("seed Gramian is not positive definite".into()))?;
        let g = &yw * zw.transpose() * &p;
        let mut s = OnlineState {
            g,
            p,
            rho: if mode == Mode::Windowed { 1.0 } else { rho },
            mode,
            window: if mode == Mode::Windowed { x.ncols() } else { 0 },
            n: x.nrows(),
            l: z.nrows() - x.nrows(),
            z_buffer: VecDeque::new(),
            y_buffer: VecDeque::new(),
            steps: 0,
        };
        if mode == Mode::Windowed {
            s.z_buffer = z.column_iter().map(|c| c.into_owned()).collect();
            s.y_buffer = y.column_iter().map(|c| c.into_owned()).collect();
        }
        s.validate()?;
        Ok(s)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        self.rho = rho;
        self.validate()?;
        Ok(self)
    }

    /// Sliding window of `w` pairs; departures start once `w` pairs are held.
    pub fn with_window(mut self, w: usize) -> Result<Self> {
        self.mode = Mode::Windowed;
        self.window = w;
        self.rho = 1.0;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidInput(format!("rho must be in (0, 1], got {}", self.rho)));
        }
        if self.mode == Mode::Windowed && self.window < 1 {
            return Err(Error::InvalidInput("window must hold at least one pair".into()));
        }
        Ok(())
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.g.columns(0, self.n).into_owned()
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.g.columns(self.n, self.l).into_owned()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn regressor(&self, x: &DVector<f64>, gamma: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        let gl = gamma.map_or(0, |g| g.len());
        if x.len() != self.n || gl != self.l {
            return Err(Error::ShapeError(format!(
                "expected state {} and input {}, got {} and {gl}",
                self.n,
                self.l,
                x.len()
            )));
        }
        let mut z = DVector::zeros(self.n + self.l);
        z.rows_mut(0, self.n).copy_from(x);
        if let Some(g) = gamma {
            z.rows_mut(self.n, self.l).copy_from(g);
        }
        Ok(z)
    }

    fn symmetrize(&mut self) {
        self.p = (&self.p + self.p.transpose()) * 0.5;
    }

    /// Absorb one pair; in windowed mode also forget the oldest held pair.
    pub fn step(&mut self, x: &DVector<f64>, y: &DVector<f64>, gamma: Option<&DVector<f64>>) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::ShapeError(format!("response has length {}, expected {}", y.len(), self.n)));
        }
        let z = self.regressor(x, gamma)?;
        let (g0, p0) = (self.g.clone(), self.p.clone());
        let result = self.add(&z, y).and_then(|()| {
            if self.mode == Mode::Windowed && self.z_buffer.len() == self.window {
                let zo = self.z_buffer.front().expect("nonempty").clone();
                let yo = self.y_buffer.front().expect("nonempty").clone();
                self.remove(&zo, &yo)?;
            }
            Ok(())
        });
        if let Err(e) = result {
            self.g = g0;
            self.p = p0;
            return Err(e);
        }
        if self.mode == Mode::Windowed {
            if self.z_buffer.len() == self.window {
                self.z_buffer.pop_front();
                self.y_buffer.pop_front();
            }
            self.z_buffer.push_back(z);
            self.y_buffer.push_back(y.clone());
        }
        self.steps += 1;
        Ok(())
    }

    fn add(&mut self, z: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        let rho2 = self.rho * self.rho;
        let pz = &self.p * z;
        let denom = rho2 + z.dot(&pz);
        if !(denom > DENOM_GUARD) {
            return Err(Error::ConditioningError(format!("update denominator {denom:e}")));
        }
        let gain = &pz / denom;
        let res = y - &self.g * z;
        self.g.ger(1.0, &res, &gain, 1.0);
        self.p.ger(-1.0, &pz, &gain, 1.0);
        self.p /= rho2;
        self.symmetrize();
        Ok(())
    }

    fn remove(&mut self, z: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        let pz = &self.p * z;
        let denom = 1.0 - z.dot(&pz);
        if !(denom > DENOM_GUARD) {
            return Err(Error::ConditioningError(format!("downdate denominator {denom:e}")));
        }
        // Row z^T P' of the downdated inverse.
        let gain = &pz / denom;
        let res = y - &self.g * z;
        self.g.ger(-1.0, &res, &gain, 1.0);
        self.p.ger(1.0, &pz, &gain, 1.0);
        self.symmetrize();
        Ok(())
    }

    /// Frozen-operator forecast, zero input when `inputs` is empty.
    pub fn predict(&self, x0: &DVector<f64>, h: usize, inputs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        if x0.len() != self.n {
            return Err(Error::ShapeError(format!("x0 has length {}, expected {}", x0.len(), self.n)));
        }
        let (a, b) = (self.a(), self.b());
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(h);
        for j in 0..h {
            x = &a * &x;
            if let Some(g) = inputs.get(j) {
                if g.len() != self.l {
                    return Err(Error::ShapeError(format!("input has length {}", g.len())));
                }
                x += &b * g;
            }
            out.push(x.clone());
        }
        Ok(out)
    }
}

/// Free-function form of [`OnlineState::step`].
pub fn online_step(state: &mut OnlineState, x: &DVector<f64>, y: &DVector<f64>, gamma: Option<&DVector<f64>>) -> Result<()> {
    state.step(x, y, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StreamConfig;
    use crate::dmd::DmdModel;
    use crate::linalg::pinv;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn col(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn init_contract() {
        let s = online_init(None, 1e3, 2, 0).unwrap();
        assert_eq!(s.p(), &(DMatrix::identity(2, 2) * 1e3));
        assert_eq!(s.a(), DMatrix::zeros(2, 2));
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(online_init(Some(&a0), 1.0, 2, 0).unwrap().a(), a0);
        assert_eq!(online_init(None, 1.0, 3, 1).unwrap().p().shape(), (4, 4));
        assert!(matches!(online_init(None, 0.0, 2, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(online_init(None, -1.0, 2, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn default_alpha_scales() {
        assert_eq!(default_alpha(&DMatrix::from_element(2, 2, 2.0)), 1e6 / 4.0);
        assert_eq!(default_alpha(&DMatrix::zeros(2, 2)), 1e6);
    }

    #[test]
    fn zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a0 = rand_mat(&mut rng, 3, 3);
        let mut s = online_init(Some(&a0), 100.0, 3, 0).unwrap().with_rho(0.9).unwrap();
        for _ in 0..10 {
            let x = col(&mut rng, 3);
            s.step(&x, &(&a0 * &x), None).unwrap();
            assert!((s.a() - &a0).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_seed_matches_weighted_dmd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, rho) = (4, 0.95);
        let x = rand_mat(&mut rng, n, 12);
        let y = rand_mat(&mut rng, n, 12);
        let mut s = OnlineState::seed_exact(&x, &y, None, Mode::Weighted, rho).unwrap();
        let mut d = DmdModel::init(&x, &y, StreamConfig::weighted(rho)).unwrap();
        assert!((s.a() - d.operator()).norm() < 1e-8);
        for _ in 0..60 {
            let (xk, yk) = (col(&mut rng, n), col(&mut rng, n));
            s.step(&xk, &yk, None).unwrap();
            d.weighted_step(&xk, &yk).unwrap();
            assert!((s.a() - d.operator()).norm() < 1e-6);
            assert!((s.p() - s.p().transpose()).norm() < 1e-8);
        }
    }

    #[test]
    fn windowed_matches_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, l, w) = (3, 1, 12);
        let mut zs: VecDeque<(DVector<f64>, DVector<f64>, DVector<f64>)> =
            (0..w).map(|_| (col(&mut rng, n), col(&mut rng, l), col(&mut rng, n))).collect();
        let mats = |zs: &VecDeque<(DVector<f64>, DVector<f64>, DVector<f64>)>| {
            let x = DMatrix::from_columns(&zs.iter().map(|t| t.0.clone()).collect::<Vec<_>>());
            let g = DMatrix::from_columns(&zs.iter().map(|t| t.1.clone()).collect::<Vec<_>>());
            let y = DMatrix::from_columns(&zs.iter().map(|t| t.2.clone()).collect::<Vec<_>>());
            (x, g, y)
        };
        let (x, g, y) = mats(&zs);
        let mut s = OnlineState::seed_exact(&x, &y, Some(&g), Mode::Windowed, 1.0).unwrap();
        for _ in 0..30 {
            let t = (col(&mut rng, n), col(&mut rng, l), col(&mut rng, n));
            s.step(&t.0, &t.2, Some(&t.1)).unwrap();
            zs.pop_front();
            zs.push_back(t);
            let (x, g, y) = mats(&zs);
            let want = &y * pinv(&stack_cols(&x, Some(&g)), 1e-12).unwrap();
            assert!((s.g() - want).norm() < 1e-6);
        }
    }

    #[test]
    fn singular_seed_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(OnlineState::seed_exact(&x, &x, None, Mode::Windowed, 1.0), Err(Error::ConditioningError(_))));
    }

    #[test]
    fn shape_checks() {
        let mut s = online_init(None, 1.0, 2, 1).unwrap();
        let x = DVector::zeros(2);
        assert!(matches!(s.step(&x, &x, None), Err(Error::ShapeError(_))));
        assert!(s.step(&x, &x, Some(&DVector::zeros(1))).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn p_stays_symmetric_positive(seed in any::<u64>(), n in 1usize..6, steps in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = online_init(None, 10.0, n, 0).unwrap().with_rho(0.95).unwrap();
            for _ in 0..steps {
                let (x, y) = (col(&mut rng, n), col(&mut rng, n));
                s.step(&x, &y, None).unwrap();
            }
            prop_assert!((s.p() - s.p().transpose()).norm() <= 1e-8 * s.p().norm());
            prop_assert!(s.p().clone().cholesky().is_some());
        }
    }
}
