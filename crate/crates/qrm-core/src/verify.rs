//! Seeded oracle-equivalence checks run by `qrm verify`.

use crate::config::default_qubit_n_qubit;
use crate::error::Result;
use crate::examples::{qubit_projector, QubitNQubitParams, ThreeQubitParams};
use crate::linalg::{self, max_abs, max_abs_diff, HilbertDims};
use crate::markov::rate_matrix_from_phi;
use crate::model::{build_dissipator, build_kraus_dissipator, random_model, KrausSide, QrmModel, RandomModelOptions};
use crate::perturbation::{numeric_steady_state, Machinery};
use crate::random::rng_from_seed;
use crate::uncoupled::{eigentable_max_residual, eigentable_rank_condition, uncoupled_eigentable};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Worst deviation observed.
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, value: f64, tol: f64, detail: impl Into<String>) -> Self {
        Check { name, value, tol, pass: value.is_finite() && value <= tol, detail: detail.into() }
    }

    fn failed(name: &'static str, err: impl std::fmt::Display) -> Self {
        Check { name, value: f64::NAN, tol: 0.0, pass: false, detail: err.to_string() }
    }
}

fn run(name: &'static str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, e))
}

fn random(seed: u64, dims: (usize, usize, usize), drive: bool) -> QrmModel {
    let opts = RandomModelOptions { drive_a: drive, drive_b: drive, drive_c: drive, ..Default::default() };
    random_model(&mut rng_from_seed(seed), HilbertDims::new(dims.0, dims.1, dims.2).unwrap(), opts)
}

/// Distance of each predicted eigenvalue cluster from its expected multiplicity.
fn dissipator_spectrum(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 3, 2), true);
    let ev = linalg::eigvals(&build_dissipator(&m).matrix)?;
    let (ga, gb) = (m.gamma_a(), m.gamma_b());
    let (na, nc, nb) = (m.dims.n_a * m.dims.n_a, m.dims.n_c * m.dims.n_c, m.dims.n_b * m.dims.n_b);
    let expected = [(0.0, nc), (-ga, (na - 1) * nc), (-gb, (nb - 1) * nc), (-ga - gb, (na - 1) * (nb - 1) * nc)];
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for (lam, mult) in expected {
        let near = ev.iter().filter(|z| (z.re - lam).abs() < 1e-8 && z.im.abs() < 1e-8).count();
        counts.push(format!("{lam:.4}:{near}/{mult}"));
        if near != mult {
            worst = f64::INFINITY;
        }
    }
    for z in &ev {
        let d = expected.iter().map(|(l, _)| (z - linalg::c(*l, 0.0)).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    Ok(Check::new("dissipator_spectrum", worst, 1e-8, counts.join(" ")))
}

fn kraus(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 2, 3), false);
    let ka = build_kraus_dissipator(m.tau_a(), m.dims, KrausSide::A)?.superop.matrix;
    let kb = build_kraus_dissipator(m.tau_b(), m.dims, KrausSide::B)?.superop.matrix;
    let sum = ka.mapv(|z| z * m.gamma_a()) + kb.mapv(|z| z * m.gamma_b());
    let d = max_abs_diff(&sum, &build_dissipator(&m).matrix);
    Ok(Check::new("kraus_equivalence", d, 1e-12, "dims (2,2,3)"))
}

fn eigentable(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 2, 2), true);
    let table = uncoupled_eigentable(&m)?;
    let res = eigentable_max_residual(&m, &table);
    let (rank, cond) = eigentable_rank_condition(&table)?;
    let full = rank == m.n() * m.n();
    Ok(Check::new(
        "eigentable",
        if full { res } else { f64::INFINITY },
        1e-10,
        format!("rank {rank}/{} cond {cond:.2e}", m.n() * m.n()),
    ))
}

fn unique_steady_state() -> Result<Check> {
    let m = ThreeQubitParams::default().build()?;
    let mut dims = Vec::new();
    for g in [1e-1, 1e-2] {
        dims.push(numeric_steady_state(&m.with_g(g))?.1);
    }
    let bad = dims.iter().filter(|&&d| d != 1).count();
    Ok(Check::new("unique_steady_state", bad as f64, 0.0, format!("kernel dims {dims:?}")))
}

fn series_against_kernel(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (label, m) in [("hc=0", random(seed, (2, 2, 2), false)), ("hc!=0", random(seed, (2, 2, 2), true))] {
        let mach = Machinery::new(&m)?;
        let s = mach.steady_state_series(3)?;
        let g = 0.05;
        let (exact, _) = numeric_steady_state(&m.with_g(g))?;
        let err = linalg::fro_norm(&(s.partial_sum(g, 3) - &exact));
        parts.push(format!("{label}:{err:.2e}"));
        worst = worst.max(err);
    }
    Ok(Check::new("series_K3_at_g0.05", worst, 1e-5, parts.join(" ")))
}

fn resolvent(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 2, 2), false);
    let mach = Machinery::new(&m)?;
    let g0 = mach.radius_estimate(&mach.series_map()?)?;
    let g = (0.5 * g0).min(0.5);
    let r = mach.resolvent_steady_state(g)?;
    let (exact, _) = numeric_steady_state(&m.with_g(g))?;
    let rho = r.rho.mapv(|z| z / linalg::trace(&r.rho));
    let d = max_abs_diff(&rho, &exact);
    Ok(Check::new("resolvent_form", d, 1e-8, format!("g0 {g0:.3e}, g {g:.3e}")))
}

/// Closed forms of the three-qubit chain against the generic series and `Φ`.
pub fn three_qubit_check(p: &ThreeQubitParams) -> Result<Check> {
    let cf = p.closed_forms();
    let mach = Machinery::new(&p.build()?)?;
    let s = mach.steady_state_series(2)?;
    let mut worst = max_abs_diff(&s.r_c[0], &cf.rho_c0);
    worst = worst.max(max_abs_diff(&s.pieces[1], &cf.r1));
    worst = worst.max(max_abs(&s.r_c[1]));
    worst = worst.max(max_abs_diff(&s.pieces[2], &cf.r2));
    worst = worst.max(max_abs_diff(&s.r_c[2], &p.r_c2()));
    for k in 0..2 {
        let col = mach.phi.phi.apply(&qubit_projector(k));
        for j in 0..2 {
            worst = worst.max((col[[j, j]].re - cf.phi_d[j][k]).abs());
        }
    }
    Ok(Check::new("three_qubit_closed_forms", worst, 1e-9, "rho_C0, R1, R2, r_C, Phi_D"))
}

/// Both kernel formulas against each other and against the generic `ρ₀`.
pub fn qubit_n_qubit_check(p: &QubitNQubitParams) -> Result<Check> {
    let mach = Machinery::new(&p.build()?)?;
    let (_, _, rho0) = p.closed_form_rho0()?;
    let rec = p.kernel_recursive()?;
    let exp = p.kernel_explicit()?;
    let forms = rec.iter().zip(&exp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let d = max_abs_diff(&mach.rho0()?, &rho0).max(forms);
    Ok(Check::new("qubit_n_qubit_kernel", d, 1e-10, format!("N = {}", p.n)))
}

fn markov(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 3, 2), false);
    let mach = Machinery::new(&m)?;
    let rm = rate_matrix_from_phi(&mach.phi)?;
    let mut worst: f64 = 0.0;
    for s in [0.01, 0.1, 1.0, 10.0] {
        let k = rm.transition_probabilities(s)?;
        worst = worst.max(k.row_sum_defect()).max((-k.raw_min - 1e-12).max(0.0));
    }
    let pi = rm.stationary_distribution()?;
    let rc = mach.basis.to_basis(&mach.rho_c0()?);
    for (j, p) in pi.iter().enumerate() {
        worst = worst.max((rc[[j, j]].re - p).abs());
    }
    Ok(Check::new("markov_kernel", worst, 1e-10, "s in {0.01, 0.1, 1, 10}"))
}

/// `Re λ̃ ≤ 0` for every pair; the quadratic bound is reported, not enforced,
/// since generic couplings violate it.
fn eigenvalue_sign(seed: u64) -> Result<Check> {
    let m = random(seed, (2, 3, 2), false);
    let ec = Machinery::new(&m)?.second_order_eigenvalues()?;
    let top = ec.iter().map(|e| e.lambda2.re).fold(f64::NEG_INFINITY, f64::max);
    let excess = ec.iter().map(|e| e.lambda2.re - e.bound).fold(f64::NEG_INFINITY, f64::max);
    Ok(Check::new("second_order_sign", top.max(0.0), 1e-12, format!("max Re(lambda2) = {top:.3e}, max Re(lambda2) - bound = {excess:.3e}")))
}

/// Runs every check with seeds derived from `seed`.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        run("dissipator_spectrum", || dissipator_spectrum(seed)),
        run("kraus_equivalence", || kraus(seed.wrapping_add(1))),
        run("eigentable", || eigentable(seed.wrapping_add(2))),
        run("unique_steady_state", unique_steady_state),
        run("series_K3_at_g0.05", || series_against_kernel(seed.wrapping_add(3))),
        run("resolvent_form", || resolvent(seed.wrapping_add(4))),
        run("three_qubit_closed_forms", || three_qubit_check(&ThreeQubitParams::default())),
        run("qubit_n_qubit_kernel", || qubit_n_qubit_check(&default_qubit_n_qubit())),
        run("markov_kernel", || markov(seed.wrapping_add(5))),
        run("second_order_sign", || eigenvalue_sign(seed.wrapping_add(6))),
    ]
}
