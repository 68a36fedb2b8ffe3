//! Exact propagation `e^{tL_g}`, the reduced slow dynamics, and measured time scales.

use crate::error::{QrmError, Result};
use crate::linalg::{self, c, devectorize, expm, fro_norm, vectorize, CMatrix, C64};
use crate::model::{build_lindbladian, build_uncoupled, QrmModel};
use crate::perturbation::{Branch, Machinery};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropagationMethod {
    Exact,
    Reduced,
    SteadyProjector,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub method: PropagationMethod,
}

impl PropagationResult {
    /// `(max |tr ρ − 1|, max Hermiticity defect)` over the trajectory.
    pub fn trace_hermiticity_drift(&self) -> (f64, f64) {
        let t = self.states.iter().map(|r| (linalg::trace(r) - c(1.0, 0.0)).norm()).fold(0.0, f64::max);
        let h = self.states.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max);
        (t, h)
    }

    /// Smallest eigenvalue of any state.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for r in &self.states {
            let (e, _) = linalg::eigh(r)?;
            m = m.min(e[0]);
        }
        Ok(m)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(QrmError::Config("times must be finite and non-negative".into()));
    }
    Ok(())
}

/// `ρ(t) = e^{tL_g} ρ₀` by dense matrix exponentials.
pub fn propagate_exact(model: &QrmModel, rho0: &CMatrix, times: &[f64]) -> Result<PropagationResult> {
    check_times(times)?;
    crate::model::validate_density(rho0, "rho0")?;
    let l = build_lindbladian(model).matrix;
    let v0 = vectorize(rho0);
    let n = model.n();
    let states = times
        .iter()
        .map(|&t| {
            let e = expm(&l.mapv(|z| z * t))?;
            Ok(devectorize(&e.dot(&v0), n)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagationResult { times: times.to_vec(), states, method: PropagationMethod::Exact })
}

/// `τ_A ⊗ e^{tg²Φ_D} Diag tr_AB(ρ₀) ⊗ τ_B`.
pub fn propagate_reduced(model: &QrmModel, rho0: &CMatrix, times: &[f64]) -> Result<PropagationResult> {
    let mach = Machinery::new(model)?;
    propagate_reduced_with(&mach, rho0, times)
}

pub fn propagate_reduced_with(mach: &Machinery, rho0: &CMatrix, times: &[f64]) -> Result<PropagationResult> {
    check_times(times)?;
    if !mach.coup.holds {
        return Err(QrmError::Coup(format!("rank Phi_D = {}", mach.coup.rank)));
    }
    let model = &mach.model;
    let g2 = model.g * model.g;
    let d0 = mach.basis.coords(&model.tr_ab(rho0));
    let phi = linalg::from_real(&mach.phi.phi_d);
    let states = times
        .iter()
        .map(|&t| {
            let e = expm(&phi.mapv(|z| z * (t * g2)))?;
            Ok(model.embed(&mach.basis.from_coords(&e.dot(&d0))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagationResult { times: times.to_vec(), states, method: PropagationMethod::Reduced })
}

/// Least-squares line `y = slope·x + intercept` with the standard error of the slope.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LineFit { slope, intercept, slope_stderr }
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> LineFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    line_fit(&lx, &ly)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorScalingReport {
    pub g_values: Vec<f64>,
    pub times: Vec<Vec<f64>>,
    /// Frobenius distance between exact and reduced states.
    pub errors: Vec<Vec<f64>>,
    pub max_errors: Vec<f64>,
    /// Exponent `p` in `max error ∝ g^p`; the reduced dynamics predicts `p = 1`.
    pub fit: LineFit,
}

/// Compares exact and reduced dynamics on `t ∈ [lo/g², hi/g²]` with `points` samples per `g`.
pub fn error_scaling_sweep(
    model: &QrmModel,
    rho0: &CMatrix,
    g_list: &[f64],
    window: (f64, f64),
    points: usize,
) -> Result<ErrorScalingReport> {
    if g_list.is_empty() || points < 2 || !(window.0 > 0.0 && window.1 > window.0) {
        return Err(QrmError::Config("error sweep needs g values, points >= 2 and 0 < lo < hi".into()));
    }
    let mut times = Vec::new();
    let mut errors = Vec::new();
    let mut max_errors = Vec::new();
    for &g in g_list {
        let m = model.with_g(g);
        let ts: Vec<f64> = (0..points)
            .map(|k| (window.0 + (window.1 - window.0) * k as f64 / (points - 1) as f64) / (g * g))
            .collect();
        let ex = propagate_exact(&m, rho0, &ts)?;
        let red = propagate_reduced(&m, rho0, &ts)?;
        let err: Vec<f64> = ex.states.iter().zip(&red.states).map(|(a, b)| fro_norm(&(a - b))).collect();
        max_errors.push(err.iter().copied().fold(0.0, f64::max));
        times.push(ts);
        errors.push(err);
    }
    let fit = loglog_fit(g_list, &max_errors);
    Ok(ErrorScalingReport { g_values: g_list.to_vec(), times, errors, max_errors, fit })
}

/// First time after which `‖e^{tL_g}ρ₀ − ρ∞‖_F` stays below `eps`, located on a
/// geometric grid up to `t_max` and refined by bisection.
pub fn reach_time(model: &QrmModel, rho0: &CMatrix, rho_inf: &CMatrix, eps: f64, t_max: f64) -> Result<f64> {
    let l = build_lindbladian(model).matrix;
    let v0 = vectorize(rho0);
    let n = model.n();
    let dist = |t: f64| -> Result<f64> {
        let v = expm(&l.mapv(|z| z * t))?.dot(&v0);
        Ok(fro_norm(&(devectorize(&v, n)? - rho_inf)))
    };
    let steps = 400;
    let t_min = t_max * 1e-6;
    let grid: Vec<f64> = (0..=steps).map(|k| t_min * (t_max / t_min).powf(k as f64 / steps as f64)).collect();
    let d: Vec<f64> = grid.iter().map(|&t| dist(t)).collect::<Result<_>>()?;
    if *d.last().expect("grid nonempty") > eps {
        return Err(QrmError::residual("reach_time: threshold not reached by t_max", d[steps], eps));
    }
    let last_above = match d.iter().rposition(|&x| x > eps) {
        Some(k) => k,
        None => return Ok(0.0),
    };
    let (mut lo, mut hi) = (grid[last_above], grid[last_above + 1]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dist(mid)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackedEigenvalue {
    pub j: usize,
    pub k: usize,
    pub predicted: (f64, f64),
    pub numeric: (f64, f64),
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapDiagnostics {
    pub g: f64,
    /// Distance to the imaginary axis of the eigenvalues outside the slow group.
    pub gamma: f64,
    /// `min_{j≠k} |Re λ̃_jk|`, for `H_C = 0`.
    pub eta: Option<f64>,
    /// `max |Re λ|` over `σ(Φ_D)`.
    pub f: Option<f64>,
    pub tracked: Vec<TrackedEigenvalue>,
    pub max_real_part: f64,
}

/// The slow group is the `n_C²` eigenvalues of `L_g` closest to the imaginary axis.
pub fn slow_and_fast(model: &QrmModel, g: f64) -> Result<(Vec<C64>, Vec<C64>)> {
    let l = build_lindbladian(&model.with_g(g));
    let ev = linalg::eigvals(&l.matrix)?;
    let mut by_re = ev.clone();
    by_re.sort_by(|a, b| b.re.total_cmp(&a.re));
    let k = model.dims.n_c * model.dims.n_c;
    Ok((by_re[..k].to_vec(), by_re[k..].to_vec()))
}

pub fn spectral_gap_diagnostics(model: &QrmModel, g: f64) -> Result<GapDiagnostics> {
    let (slow, fast) = slow_and_fast(model, g)?;
    let gamma = fast.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    let max_real_part = slow.iter().chain(&fast).map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mach = Machinery::new(model).ok();
    let f = match &mach {
        Some(m) => {
            let ev = linalg::eigvals(&linalg::from_real(&m.phi.phi_d))?;
            Some(ev.iter().map(|z| z.re.abs()).fold(0.0, f64::max))
        }
        None => None,
    };
    let mut eta = None;
    let mut tracked = Vec::new();
    if let Some(m) = mach.as_ref().filter(|m| m.branch() == Branch::HcZero) {
        if let Ok(corr) = m.second_order_eigenvalues() {
            eta = Some(corr.iter().map(|e| e.lambda2.re.abs()).fold(f64::INFINITY, f64::min));
            for e in corr {
                let p = e.first_order * g + e.lambda2 * (g * g);
                let mut d: Vec<(f64, C64)> = slow.iter().map(|z| ((z - p).norm(), *z)).collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0));
                let ambiguous = d.len() > 1 && d[1].0 < 2.0 * d[0].0;
                tracked.push(TrackedEigenvalue {
                    j: e.j,
                    k: e.k,
                    predicted: (p.re, p.im),
                    numeric: (d[0].1.re, d[0].1.im),
                    ambiguous,
                });
            }
        }
    }
    Ok(GapDiagnostics { g, gamma, eta, f, tracked, max_real_part })
}

/// `Γ` at `g = 0` computed from `L₀` alone.
pub fn uncoupled_gap(model: &QrmModel) -> Result<f64> {
    let ev = linalg::eigvals(&build_uncoupled(model).matrix)?;
    Ok(ev.iter().map(|z| -z.re).filter(|x| *x > 1e-9).fold(f64::INFINITY, f64::min))
}
