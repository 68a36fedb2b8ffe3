//! Weak-coupling machinery: effective Hamiltonians, the reduced resolvent of
//! `L₀`, the maps `Φ`/`Φ_D`, the `Coup` test, the steady-state series with its
//! resolvent form, and second-order eigenvalue corrections.

use crate::error::{QrmError, Result};
use crate::linalg::{
    self, c, commutator, dagger, eigh, identity, kron, kron3, max_abs, trace, CMatrix, CVector, HilbertDims,
    SuperOp, C64, I, ZERO,
};
use crate::model::{build_perturbation, build_uncoupled, QrmModel};
use crate::uncoupled::dissipator_inverse_unchecked;
use ndarray::{Array1, Array2};
use serde::Serialize;

/// Relative tolerance below which two energies count as equal.
pub const SPEC_TOL: f64 = 1e-8;

/// Simplicity of a spectrum and distinctness of its Bohr frequencies.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpecDiagnostics {
    pub min_gap: f64,
    pub min_bohr_separation: f64,
    pub simple: bool,
    pub distinct_bohr: bool,
}

pub fn spec_diagnostics(energies: &[f64]) -> SpecDiagnostics {
    let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let n = energies.len();
    let mut min_gap = f64::INFINITY;
    let mut bohr = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if j != k {
                min_gap = min_gap.min((energies[j] - energies[k]).abs());
                bohr.push(energies[j] - energies[k]);
            }
        }
    }
    let mut min_bohr_separation = f64::INFINITY;
    for (p, x) in bohr.iter().enumerate() {
        for y in &bohr[p + 1..] {
            min_bohr_separation = min_bohr_separation.min((x - y).abs());
        }
    }
    SpecDiagnostics {
        min_gap,
        min_bohr_separation,
        simple: min_gap > SPEC_TOL * scale,
        distinct_bohr: min_bohr_separation > SPEC_TOL * scale,
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    /// `H̄^τ = tr_AB(H τ_A⊗I⊗τ_B)` on `H_C`.
    pub h_bar_tau: CMatrix,
    /// `H̄^{τ_A} = tr_A(H τ_A⊗I⊗I)` on `H_C⊗H_B`.
    pub h_bar_tau_a: CMatrix,
    /// `H̄^{τ_B} = tr_B(H I⊗I⊗τ_B)` on `H_A⊗H_C`.
    pub h_bar_tau_b: CMatrix,
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
    pub spec: SpecDiagnostics,
}

pub fn effective_hamiltonians(model: &QrmModel) -> Result<EffectiveHamiltonian> {
    let d = model.dims;
    let h = &model.h_coupling;
    let h_bar_tau = model.tr_ab(&h.dot(&kron3(model.tau_a(), &identity(d.n_c), model.tau_b())));
    let h_bar_tau_a = model.tr_a(&h.dot(&kron(model.tau_a(), &identity(d.n_c * d.n_b))));
    let h_bar_tau_b = model.tr_b(&h.dot(&kron(&identity(d.n_a * d.n_c), model.tau_b())));
    let (energies, vectors) = eigh(&h_bar_tau)?;
    let spec = spec_diagnostics(&energies);
    Ok(EffectiveHamiltonian { h_bar_tau, h_bar_tau_a, h_bar_tau_b, energies, vectors, spec })
}

/// `Σ_{a,b} t^A_a t^B_b ⟨a|⊗I⊗⟨b| H |a⟩⊗I⊗|b⟩` over the eigenbases of the reset states.
pub fn h_bar_tau_double_sum(model: &QrmModel) -> Result<CMatrix> {
    let d = model.dims;
    let (pa, ua) = eigh(model.tau_a())?;
    let (pb, ub) = eigh(model.tau_b())?;
    let mut out = linalg::zeros(d.n_c);
    for (a, ta) in pa.iter().enumerate() {
        let ka = ua.column(a).to_owned().insert_axis(ndarray::Axis(1));
        for (b, tb) in pb.iter().enumerate() {
            let kb = ub.column(b).to_owned().insert_axis(ndarray::Axis(1));
            let w = kron3(&ka, &identity(d.n_c), &kb);
            out = out + dagger(&w).dot(&model.h_coupling).dot(&w).mapv(|z| z * (ta * tb));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagBasisKind {
    /// Eigenbasis of `H_C` (driven branch).
    HcEigenbasis,
    /// Eigenbasis of `H̄^τ` (branch `H_C = 0`).
    HbarTauEigenbasis,
}

/// Orthonormal basis `φ_j` of `H_C` defining `Diag`.
#[derive(Debug, Clone)]
pub struct DiagBasis {
    pub kind: DiagBasisKind,
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
}

impl DiagBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `|φ_j⟩⟨φ_k|`.
    pub fn unit(&self, j: usize, k: usize) -> CMatrix {
        linalg::outer(&self.vectors.column(j).to_owned(), &self.vectors.column(k).to_owned())
    }

    /// Matrix elements in the basis.
    pub fn to_basis(&self, x: &CMatrix) -> CMatrix {
        dagger(&self.vectors).dot(x).dot(&self.vectors)
    }

    pub fn from_basis(&self, x: &CMatrix) -> CMatrix {
        self.vectors.dot(x).dot(&dagger(&self.vectors))
    }

    /// `(⟨φ_j|x|φ_j⟩)_j`.
    pub fn coords(&self, x: &CMatrix) -> CVector {
        let y = self.to_basis(x);
        Array1::from_shape_fn(self.dim(), |j| y[[j, j]])
    }

    pub fn from_coords(&self, v: &CVector) -> CMatrix {
        self.from_basis(&CMatrix::from_diag(v))
    }

    pub fn diag(&self, x: &CMatrix) -> CMatrix {
        self.from_coords(&self.coords(x))
    }

    pub fn offdiag(&self, x: &CMatrix) -> CMatrix {
        x - &self.diag(x)
    }

    /// Solves `[D_e, y] = x` for off-diagonal `x`, `D_e = Σ e_j P_j`.
    pub fn inverse_commutator(&self, x: &CMatrix) -> CMatrix {
        let mut y = self.to_basis(x);
        for ((j, k), z) in y.indexed_iter_mut() {
            *z = if j == k { ZERO } else { *z / (self.energies[j] - self.energies[k]) };
        }
        self.from_basis(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    HcZero,
    HcDriven,
}

pub fn branch(model: &QrmModel) -> Branch {
    if model.hc_is_zero() {
        Branch::HcZero
    } else {
        Branch::HcDriven
    }
}

/// The `Diag` basis of the relevant branch; fails when its spectrum is degenerate.
pub fn diag_basis(model: &QrmModel, eff: &EffectiveHamiltonian) -> Result<DiagBasis> {
    match branch(model) {
        Branch::HcZero => {
            if !eff.spec.simple {
                return Err(QrmError::Spec(format!(
                    "spectrum of the effective Hamiltonian is degenerate (min gap {:.2e})",
                    eff.spec.min_gap
                )));
            }
            Ok(DiagBasis {
                kind: DiagBasisKind::HbarTauEigenbasis,
                energies: eff.energies.clone(),
                vectors: eff.vectors.clone(),
            })
        }
        Branch::HcDriven => {
            let (e, v) = eigh(&model.h_c)?;
            let s = spec_diagnostics(&e);
            if !s.simple {
                return Err(QrmError::Spec(format!("H_C has a degenerate spectrum (min gap {:.2e})", s.min_gap)));
            }
            Ok(DiagBasis { kind: DiagBasisKind::HcEigenbasis, energies: e, vectors: v })
        }
    }
}

/// `Q₀`: `τ_A⊗tr_AB⊗τ_B` when `H_C = 0`, `τ_A⊗Diag_C tr_AB⊗τ_B` otherwise.
pub fn kernel_projector(model: &QrmModel, basis: &DiagBasis) -> SuperOp {
    match basis.kind {
        DiagBasisKind::HbarTauEigenbasis => SuperOp::from_map(model.n(), |x| model.embed(&model.tr_ab(x))),
        DiagBasisKind::HcEigenbasis => SuperOp::from_map(model.n(), |x| model.embed(&basis.diag(&model.tr_ab(x)))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResolventRoute {
    /// `(L₀+Q₀)⁻¹(I−Q₀)`.
    Shifted,
    /// `V (V*L₀V)⁻¹ V*(I−Q₀)` with `V` an orthonormal basis of `ran(I−Q₀)`.
    Restricted,
    /// Closed-form `D⁻¹`, only when `L₀ = D`.
    ClosedForm,
}

/// `S₀ = L₀⁻¹(I−Q₀)`, the inverse of `L₀` on `ran(I−Q₀)` extended by zero on `ran Q₀`.
#[derive(Debug, Clone)]
pub struct ReducedResolvent {
    pub route: ResolventRoute,
    pub q0: SuperOp,
    pub s0: SuperOp,
}

impl ReducedResolvent {
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        self.s0.apply(x)
    }
}

pub fn reduced_resolvent(model: &QrmModel, basis: &DiagBasis, route: ResolventRoute) -> Result<ReducedResolvent> {
    let n = model.n();
    let q0 = kernel_projector(model, basis);
    let comp = SuperOp::identity(n).sub(&q0);
    let l0 = build_uncoupled(model);
    let s0 = match route {
        ResolventRoute::Shifted => {
            let m = linalg::solve(&l0.add(&q0).matrix, &comp.matrix)?;
            SuperOp::from_matrix(n, m)?
        }
        ResolventRoute::Restricted => {
            let (u, s, _) = linalg::svd(&comp.matrix)?;
            let r = s.iter().filter(|&&x| x > 1e-9 * s[0]).count();
            let v = u.slice(ndarray::s![.., ..r]).to_owned();
            let vd = dagger(&v);
            let mm = vd.dot(&l0.matrix).dot(&v);
            let m = v.dot(&linalg::solve(&mm, &vd.dot(&comp.matrix))?);
            SuperOp::from_matrix(n, m)?
        }
        ResolventRoute::ClosedForm => {
            if !model.is_undriven() {
                return Err(QrmError::Unsupported("closed-form inverse requires L0 = D".into()));
            }
            SuperOp::from_map(n, |x| dissipator_inverse_unchecked(model, &(x - &q0.apply(x))))
        }
    };
    Ok(ReducedResolvent { route, q0, s0 })
}

/// `Q₀L₁Q₀` assembled numerically, with its deviation from the closed form
/// `−iτ_A⊗[H̄^τ, tr_AB ·]⊗τ_B` (`H_C = 0`) or `0` (`H_C ≠ 0`).
#[derive(Debug, Clone)]
pub struct Q0L1Q0 {
    pub op: SuperOp,
    pub formula_deviation: f64,
}

pub fn q0_l1_q0(model: &QrmModel) -> Result<Q0L1Q0> {
    let eff = effective_hamiltonians(model)?;
    let basis = match branch(model) {
        Branch::HcDriven => diag_basis(model, &eff)?,
        Branch::HcZero => DiagBasis {
            kind: DiagBasisKind::HbarTauEigenbasis,
            energies: eff.energies.clone(),
            vectors: eff.vectors.clone(),
        },
    };
    let q0 = kernel_projector(model, &basis);
    let op = q0.compose(&build_perturbation(model)).compose(&q0);
    let formula_deviation = match basis.kind {
        DiagBasisKind::HbarTauEigenbasis => op.deviation_from_map(|x| {
            model.embed(&commutator(&eff.h_bar_tau, &model.tr_ab(x))).mapv(|z| z * -I)
        }),
        DiagBasisKind::HcEigenbasis => {
            let dev = max_abs(&op.matrix);
            if dev > 1e-12 {
                return Err(QrmError::residual("Q0 L1 Q0 for H_C != 0", dev, 1e-12));
            }
            dev
        }
    };
    Ok(Q0L1Q0 { op, formula_deviation })
}

/// `Φ` as a matrix on `B(H_C)` and its diagonal restriction `Φ_D` in `basis`.
#[derive(Debug, Clone)]
pub struct PhiMaps {
    pub phi: SuperOp,
    pub phi_d: Array2<f64>,
    pub basis: DiagBasis,
    /// Largest imaginary part discarded when forming `Φ_D`.
    pub phi_d_imag: f64,
}

impl PhiMaps {
    /// `max_k |Σ_j (Φ_D)_jk|`.
    pub fn column_sum_defect(&self) -> f64 {
        self.phi_d.columns().into_iter().map(|col| col.sum().abs()).fold(0.0, f64::max)
    }

    /// `max(0, −min_{j≠k} (Φ_D)_jk)`.
    pub fn sign_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((j, k), &x) in self.phi_d.indexed_iter() {
            if j != k {
                worst = worst.max(-x);
            }
        }
        worst
    }
}

/// `Φ(x) = tr_AB([H, S₀[H, τ_A⊗Diag(x)⊗τ_B]])`.
pub fn phi_apply(model: &QrmModel, s0: &ReducedResolvent, basis: &DiagBasis, x: &CMatrix) -> CMatrix {
    let h = &model.h_coupling;
    let y = s0.apply(&commutator(h, &model.embed(&basis.diag(x))));
    model.tr_ab(&commutator(h, &y))
}

pub fn phi_maps_with(model: &QrmModel, s0: &ReducedResolvent, basis: &DiagBasis) -> PhiMaps {
    let nc = model.dims.n_c;
    let phi = SuperOp::from_map(nc, |x| phi_apply(model, s0, basis, x));
    let mut phi_d = Array2::zeros((nc, nc));
    let mut phi_d_imag: f64 = 0.0;
    for k in 0..nc {
        let col = basis.coords(&phi.apply(&basis.unit(k, k)));
        for j in 0..nc {
            phi_d[[j, k]] = col[j].re;
            phi_d_imag = phi_d_imag.max(col[j].im.abs());
        }
    }
    PhiMaps { phi, phi_d, basis: basis.clone(), phi_d_imag }
}

pub fn build_phi(model: &QrmModel) -> Result<PhiMaps> {
    let eff = effective_hamiltonians(model)?;
    let basis = diag_basis(model, &eff)?;
    let s0 = reduced_resolvent(model, &basis, ResolventRoute::Shifted)?;
    Ok(phi_maps_with(model, &s0, &basis))
}

/// The operators `h(k)` on `H_C` for `L₀ = D`, in the eigenbasis of `H̄^τ`.
pub fn h_operators(model: &QrmModel, eff: &EffectiveHamiltonian) -> Result<Vec<CMatrix>> {
    if !model.is_undriven() {
        return Err(QrmError::Unsupported("h(k) operators require L0 = D".into()));
    }
    let d = model.dims;
    let (ga, gb) = (model.gamma_a(), model.gamma_b());
    let s = ga + gb;
    let h = &model.h_coupling;
    let cb = HilbertDims::new(1, d.n_c, d.n_b)?;
    let ac = HilbertDims::new(d.n_a, d.n_c, 1)?;
    let mut out = Vec::with_capacity(d.n_c);
    for k in 0..d.n_c {
        let v = eff.vectors.column(k).to_owned();
        let pk = linalg::outer(&v, &v);
        let t1 = model.tr_ab(&h.dot(&model.embed(&pk)).dot(h)).mapv(|z| z * (2.0 / s));
        let xa = kron(&pk, model.tau_b());
        let t2 = linalg::tr_b(&eff.h_bar_tau_a.dot(&xa).dot(&eff.h_bar_tau_a), cb).mapv(|z| z * (2.0 * ga / gb / s));
        let xb = kron(model.tau_a(), &pk);
        let t3 = linalg::tr_a(&eff.h_bar_tau_b.dot(&xb).dot(&eff.h_bar_tau_b), ac).mapv(|z| z * (2.0 * gb / ga / s));
        out.push(t1 + t2 + t3);
    }
    Ok(out)
}

/// `Φ_D` from `h(k)`: off-diagonal `(j,k)` entry `⟨φ_j|h(k)|φ_j⟩`, diagonal minus the column sum.
pub fn phi_d_from_h(model: &QrmModel, eff: &EffectiveHamiltonian) -> Result<Array2<f64>> {
    let hs = h_operators(model, eff)?;
    let n = model.dims.n_c;
    let mut m = Array2::zeros((n, n));
    for (k, hk) in hs.iter().enumerate() {
        let y = dagger(&eff.vectors).dot(hk).dot(&eff.vectors);
        for j in 0..n {
            if j != k {
                m[[j, k]] = y[[j, j]].re;
            }
        }
        let col: f64 = m.column(k).sum();
        m[[k, k]] = -col;
    }
    Ok(m)
}

/// Result of the `Coup` test on a generator matrix (zero column sums, non-negative off-diagonals).
#[derive(Debug, Clone, Serialize)]
pub struct CoupReport {
    pub holds: bool,
    pub rank: usize,
    /// Kernel vector normalised to unit sum, when the kernel is one-dimensional.
    pub kernel_vector: Option<Vec<f64>>,
    /// A state `j` with `(Φ_D)_jk > 0` for every `k ≠ j`, if any.
    pub witness: Option<usize>,
    /// Number of closed communicating classes of the transition graph.
    pub closed_classes: usize,
    pub min_kernel_component: Option<f64>,
}

impl CoupReport {
    /// Verdict of the single-witness test.
    pub fn witness_test(&self) -> bool {
        self.witness.is_some()
    }

    /// Verdict of the closed-class count.
    pub fn graph_test(&self) -> bool {
        self.closed_classes == 1
    }
}

/// Edges `k → j` whenever `(Φ_D)_jk > tol`.
fn closed_class_count(m: &Array2<f64>, tol: f64) -> usize {
    let n = m.nrows();
    let mut reach = vec![vec![false; n]; n];
    for k in 0..n {
        reach[k][k] = true;
        for j in 0..n {
            if j != k && m[[j, k]] > tol {
                reach[k][j] = true;
            }
        }
    }
    for w in 0..n {
        for a in 0..n {
            if reach[a][w] {
                for b in 0..n {
                    if reach[w][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
    }
    // A class is closed when everything it reaches reaches back; count representatives.
    let mut count = 0;
    for a in 0..n {
        let closed = (0..n).all(|b| !reach[a][b] || reach[b][a]);
        let representative = (0..a).all(|b| !(reach[a][b] && reach[b][a]));
        if closed && representative {
            count += 1;
        }
    }
    count
}

pub fn coup_from_generator(m: &Array2<f64>) -> Result<CoupReport> {
    let n = m.nrows();
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-12 * scale.max(1e-300);
    let witness = (0..n).find(|&j| (0..n).all(|k| k == j || m[[j, k]] > tol));
    let closed_classes = closed_class_count(m, tol);
    let cm = linalg::from_real(m);
    let rank = if scale == 0.0 { 0 } else { linalg::numeric_rank(&cm, 1e-9)? };
    let holds = rank + 1 == n;
    let kernel_vector = if holds {
        let ns = if scale == 0.0 { vec![Array1::from_elem(1, c(1.0, 0.0))] } else { linalg::null_space(&cm, 1e-9)? };
        let mut v = ns[0].clone();
        let mut col = v.view_mut();
        linalg::fix_phase(&mut col);
        let s: f64 = v.iter().map(|z| z.re).sum();
        Some(v.iter().map(|z| z.re / s).collect::<Vec<f64>>())
    } else {
        None
    };
    let min_kernel_component = kernel_vector.as_ref().map(|v| v.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(CoupReport { holds, rank, kernel_vector, witness, closed_classes, min_kernel_component })
}

pub fn check_coup(phi: &PhiMaps) -> Result<CoupReport> {
    coup_from_generator(&phi.phi_d)
}

/// Solves `Φ_D x = y` for traceless `y`, picking the traceless solution.
pub fn phi_d_inverse(phi_d: &Array2<f64>, kernel: &[f64], y: &CVector) -> Result<CVector> {
    let n = phi_d.nrows();
    let mut a = Array2::<C64>::zeros((n + 1, n + 1));
    let mut rhs = Array1::<C64>::zeros(n + 1);
    for j in 0..n {
        for k in 0..n {
            a[[j, k]] = c(phi_d[[j, k]], 0.0);
        }
        a[[j, n]] = c(kernel[j], 0.0);
        a[[n, j]] = c(1.0, 0.0);
        rhs[j] = y[j];
    }
    let sol = linalg::solve_vec(&a, &rhs)?;
    let scale = y.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if sol[n].norm() > 1e-8 * scale {
        return Err(QrmError::residual("Phi_D inverse: right-hand side not traceless", sol[n].norm(), 1e-8 * scale));
    }
    Ok(sol.slice(ndarray::s![..n]).to_owned())
}

/// Everything the series construction needs, built once.
#[derive(Debug, Clone)]
pub struct Machinery {
    pub model: QrmModel,
    pub eff: EffectiveHamiltonian,
    pub basis: DiagBasis,
    pub resolvent: ReducedResolvent,
    pub phi: PhiMaps,
    pub coup: CoupReport,
}

impl Machinery {
    pub fn new(model: &QrmModel) -> Result<Self> {
        Self::with_route(model, ResolventRoute::Shifted)
    }

    pub fn with_route(model: &QrmModel, route: ResolventRoute) -> Result<Self> {
        let eff = effective_hamiltonians(model)?;
        let basis = diag_basis(model, &eff)?;
        let resolvent = reduced_resolvent(model, &basis, route)?;
        let phi = phi_maps_with(model, &resolvent, &basis);
        let coup = check_coup(&phi)?;
        Ok(Machinery { model: model.clone(), eff, basis, resolvent, phi, coup })
    }

    pub fn branch(&self) -> Branch {
        branch(&self.model)
    }

    fn kernel(&self) -> Result<&[f64]> {
        self.coup.kernel_vector.as_deref().ok_or_else(|| {
            QrmError::Coup(format!("dim ker Phi_D = {} (rank {})", self.basis.dim() - self.coup.rank, self.coup.rank))
        })
    }

    /// `ρ_C^(0)`, the normalised kernel of `Φ_D` as an operator.
    pub fn rho_c0(&self) -> Result<CMatrix> {
        let k = self.kernel()?;
        Ok(self.basis.from_coords(&k.iter().map(|&x| c(x, 0.0)).collect()))
    }

    pub fn rho0(&self) -> Result<CMatrix> {
        Ok(self.model.embed(&self.rho_c0()?))
    }

    /// `x ↦ tr_AB([H, S₀[H, x]])`.
    fn second_order(&self, x: &CMatrix) -> CMatrix {
        let h = &self.model.h_coupling;
        self.model.tr_ab(&commutator(h, &self.resolvent.apply(&commutator(h, x))))
    }

    fn phi_d_inv(&self, x: &CMatrix) -> Result<CMatrix> {
        let y = self.basis.coords(x);
        let sol = phi_d_inverse(&self.phi.phi_d, self.kernel()?, &y)?;
        Ok(self.basis.from_coords(&sol))
    }

    /// One step `ρ_{j−1} ↦ ρ_j` of the hierarchy, returning `(R_j, r_C^(j), ρ_j)`.
    pub fn series_step(&self, prev: &CMatrix) -> Result<(CMatrix, CMatrix, CMatrix)> {
        let h = &self.model.h_coupling;
        let big_r = self.resolvent.apply(&commutator(h, prev)).mapv(|z| z * I);
        let r = match self.branch() {
            Branch::HcZero => {
                let w = self.basis.offdiag(&self.second_order(prev));
                let off = self.basis.inverse_commutator(&w).mapv(|z| z * -I);
                let y = self.basis.diag(&self.second_order(&(&big_r + &self.model.embed(&off))));
                off - self.phi_d_inv(&y)?
            }
            Branch::HcDriven => {
                let y = self.basis.diag(&self.second_order(&big_r));
                -self.phi_d_inv(&y)?
            }
        };
        let rho = &big_r + &self.model.embed(&r);
        Ok((big_r, r, rho))
    }

    pub fn steady_state_series(&self, order: usize) -> Result<SteadySeries> {
        let rho0 = self.rho0()?;
        let mut coefficients = vec![rho0];
        let mut pieces = vec![linalg::zeros(self.model.n())];
        let mut r_c = vec![self.rho_c0()?];
        for j in 1..=order {
            let (big_r, r, rho) = self.series_step(&coefficients[j - 1])?;
            pieces.push(big_r);
            r_c.push(r);
            coefficients.push(rho);
        }
        Ok(SteadySeries { order, coefficients, pieces, r_c })
    }

    /// The linear map `R: ρ_{j−1} ↦ ρ_j` on `B(H)`.
    pub fn series_map(&self) -> Result<SuperOp> {
        let n = self.model.n();
        let mut m = Array2::zeros((n * n, n * n));
        for col in 0..n * n {
            let x = linalg::devectorize(&linalg::CVector::from_shape_fn(n * n, |i| if i == col { c(1.0, 0.0) } else { ZERO }), n)?;
            let (_, _, y) = self.series_step(&x)?;
            m.column_mut(col).assign(&linalg::vectorize(&y));
        }
        Ok(SuperOp::from_matrix(n, m)?)
    }

    /// `g₀ = 1 / max|σ(R)|`.
    pub fn radius_estimate(&self, r: &SuperOp) -> Result<f64> {
        let ev = linalg::eigvals(&r.matrix)?;
        let mx = ev.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        Ok(if mx == 0.0 { f64::INFINITY } else { 1.0 / mx })
    }

    /// `ρ₀(g) = (I − gR)⁻¹ ρ₀`.
    pub fn resolvent_steady_state(&self, g: f64) -> Result<ResolventSteadyState> {
        let r = self.series_map()?;
        let g0 = self.radius_estimate(&r)?;
        let n = self.model.n();
        let a = identity(n * n) - r.matrix.mapv(|z| z * g);
        let v = linalg::solve_vec(&a, &linalg::vectorize(&self.rho0()?))?;
        let rho = linalg::devectorize(&v, n)?;
        let lg = crate::model::build_lindbladian(&self.model.with_g(g));
        let residual = linalg::fro_norm(&lg.apply(&rho));
        Ok(ResolventSteadyState { g, rho, g0, beyond_radius: g.abs() >= g0, residual })
    }

    /// `λ̃_jk = ⟨φ_j| tr_AB[H, S₀[H, τ_A⊗|φ_j⟩⟨φ_k|⊗τ_B]] |φ_k⟩` for `j ≠ k`.
    pub fn second_order_eigenvalues(&self) -> Result<Vec<EigenCorrection>> {
        if self.branch() != Branch::HcZero {
            return Err(QrmError::Unsupported("second-order corrections are defined for H_C = 0".into()));
        }
        if !self.eff.spec.distinct_bohr {
            return Err(QrmError::Spec("Bohr frequencies of the effective Hamiltonian are not distinct".into()));
        }
        let n = self.basis.dim();
        let bound_c = bound_constant(self.model.gamma_a(), self.model.gamma_b());
        let mut out = Vec::new();
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let y = self.basis.to_basis(&self.second_order(&self.model.embed(&self.basis.unit(j, k))));
                let de = self.basis.energies[j] - self.basis.energies[k];
                out.push(EigenCorrection {
                    j,
                    k,
                    first_order: c(0.0, -de),
                    lambda2: y[[j, k]],
                    bound: -bound_c * de * de,
                });
            }
        }
        Ok(out)
    }
}

/// `(γ_A²+γ_Aγ_B+γ_B²)/(γ_Aγ_B(γ_A+γ_B))`.
pub fn bound_constant(ga: f64, gb: f64) -> f64 {
    (ga * ga + ga * gb + gb * gb) / (ga * gb * (ga + gb))
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenCorrection {
    pub j: usize,
    pub k: usize,
    /// `−i(e_j − e_k)`.
    #[serde(serialize_with = "ser_c64")]
    pub first_order: C64,
    #[serde(serialize_with = "ser_c64")]
    pub lambda2: C64,
    /// `−c(e_j − e_k)²`. Proposed as an upper bound for `Re λ̃_jk`; generic couplings violate it.
    pub bound: f64,
}

impl EigenCorrection {
    pub fn satisfies_bound(&self, margin: f64) -> bool {
        self.lambda2.re <= self.bound + margin
    }
}

fn ser_c64<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

#[derive(Debug, Clone)]
pub struct SteadySeries {
    pub order: usize,
    pub coefficients: Vec<CMatrix>,
    /// `R_j` (zero at `j = 0`).
    pub pieces: Vec<CMatrix>,
    /// `r_C^(j)`, with `r_C^(0) = ρ_C^(0)`.
    pub r_c: Vec<CMatrix>,
}

impl SteadySeries {
    pub fn partial_sum(&self, g: f64, k: usize) -> CMatrix {
        self.coefficients
            .iter()
            .take(k + 1)
            .rev()
            .fold(linalg::zeros(self.coefficients[0].nrows()), |acc, r| acc.mapv(|z| z * g) + r)
    }

    /// `max_j ‖L₀(ρ_j) + L₁(ρ_{j−1})‖_max`.
    pub fn hierarchy_residual(&self, model: &QrmModel) -> f64 {
        let l0 = build_uncoupled(model);
        let l1 = build_perturbation(model);
        let mut worst = max_abs(&l0.apply(&self.coefficients[0]));
        for j in 1..self.coefficients.len() {
            let r = l0.apply(&self.coefficients[j]) + l1.apply(&self.coefficients[j - 1]);
            worst = worst.max(max_abs(&r));
        }
        worst
    }

    /// `(|tr ρ₀ − 1|, max_{j≥1} |tr ρ_j|, max_j Hermiticity defect)`.
    pub fn trace_and_hermiticity(&self) -> (f64, f64, f64) {
        let t0 = (trace(&self.coefficients[0]) - c(1.0, 0.0)).norm();
        let tj = self.coefficients[1..].iter().map(|r| trace(r).norm()).fold(0.0, f64::max);
        let herm = self.coefficients.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max);
        (t0, tj, herm)
    }
}

#[derive(Debug, Clone)]
pub struct ResolventSteadyState {
    pub g: f64,
    pub rho: CMatrix,
    pub g0: f64,
    pub beyond_radius: bool,
    /// `‖L_g ρ‖_F`.
    pub residual: f64,
}

/// Numeric kernel of `L_g`, normalised to unit trace.
pub fn numeric_steady_state(model: &QrmModel) -> Result<(CMatrix, usize)> {
    let lg = crate::model::build_lindbladian(model);
    let ns = linalg::null_space(&lg.matrix, 1e-9)?;
    if ns.is_empty() {
        return Err(QrmError::residual("numeric kernel of L_g is empty", 0.0, 1e-9));
    }
    let n = model.n();
    let rho = linalg::devectorize(&ns[0], n)?;
    let t = trace(&rho);
    Ok((rho.mapv(|z| z / t), ns.len()))
}

pub fn steady_state_series(model: &QrmModel, order: usize) -> Result<SteadySeries> {
    Machinery::new(model)?.steady_state_series(order)
}

pub fn resolvent_steady_state(model: &QrmModel, g: f64) -> Result<ResolventSteadyState> {
    Machinery::new(model)?.resolvent_steady_state(g)
}

pub fn second_order_eigenvalues(model: &QrmModel) -> Result<Vec<EigenCorrection>> {
    Machinery::new(model)?.second_order_eigenvalues()
}
