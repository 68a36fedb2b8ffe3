//! The classical continuous-time Markov chain carried by `Φ_D`.

use crate::error::{QrmError, Result};
use crate::linalg::{self, expm_real};
use crate::model::QrmModel;
use crate::perturbation::{build_phi, coup_from_generator, PhiMaps};
use ndarray::Array2;

/// Entries this close below zero are treated as rounding noise.
pub const CLAMP_TOL: f64 = 1e-12;

/// `Q = Φ_Dᵀ`: non-negative off-diagonals, zero row sums.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub n: usize,
    pub q: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub s: f64,
    /// `p[[i, j]] = P(X_s = j | X_0 = i)`.
    pub p: Array2<f64>,
    /// Most negative entry before clamping (0 if none).
    pub raw_min: f64,
    /// Largest magnitude set to zero by the clamp.
    pub clamped: f64,
}

impl RateMatrix {
    pub fn from_phi_d(phi_d: &Array2<f64>) -> Result<Self> {
        let q = phi_d.t().to_owned();
        let rm = RateMatrix { n: q.nrows(), q };
        let scale = rm.q.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let rows = rm.row_sum_defect();
        if rows > 1e-10 * scale {
            return Err(QrmError::residual("rate matrix row sums", rows, 1e-10 * scale));
        }
        let sign = rm.sign_defect();
        if sign > CLAMP_TOL * scale {
            return Err(QrmError::residual("rate matrix off-diagonal sign", sign, CLAMP_TOL * scale));
        }
        Ok(rm)
    }

    pub fn row_sum_defect(&self) -> f64 {
        self.q.rows().into_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    pub fn sign_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((i, j), &x) in self.q.indexed_iter() {
            if i != j {
                worst = worst.max(-x);
            }
        }
        worst
    }

    /// `e^{sQ}`, with rounding-level negative entries clamped and rows renormalised.
    pub fn transition_probabilities(&self, s: f64) -> Result<TransitionKernel> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(QrmError::Config(format!("time s = {s} must be finite and non-negative")));
        }
        let mut p = expm_real(&self.q.mapv(|x| x * s))?;
        let raw_min = p.iter().copied().fold(0.0f64, f64::min);
        let mut clamped: f64 = 0.0;
        for x in p.iter_mut() {
            if *x < 0.0 && *x >= -CLAMP_TOL {
                clamped = clamped.max(-*x);
                *x = 0.0;
            }
        }
        for mut row in p.rows_mut() {
            let t = row.sum();
            row.mapv_inplace(|x| x / t);
        }
        Ok(TransitionKernel { s, p, raw_min, clamped })
    }

    /// Unique `π` with `πQ = 0`, `Σπ = 1`; fails when the kernel is not one-dimensional.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let r = coup_from_generator(&self.q.t().to_owned())?;
        r.kernel_vector
            .ok_or_else(|| QrmError::Coup(format!("rate matrix has rank {} < {}", r.rank, self.n - 1)))
    }

    /// Eigenvalues of `Q` sorted by real part, largest first.
    pub fn spectrum(&self) -> Result<Vec<linalg::C64>> {
        let mut ev = linalg::eigvals(&linalg::from_real(&self.q))?;
        ev.reverse();
        Ok(ev)
    }
}

impl TransitionKernel {
    pub fn row_sum_defect(&self) -> f64 {
        self.p.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn rate_matrix_from_phi(phi: &PhiMaps) -> Result<RateMatrix> {
    RateMatrix::from_phi_d(&phi.phi_d)
}

/// Rate matrix of a model with `L₀ = D`; driven models are refused.
pub fn rate_matrix(model: &QrmModel) -> Result<RateMatrix> {
    if !model.is_undriven() {
        return Err(QrmError::Unsupported("the Markov chain is extracted only when H_A = H_B = H_C = 0".into()));
    }
    rate_matrix_from_phi(&build_phi(model)?)
}
