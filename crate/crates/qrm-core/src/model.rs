//! Quantum reset models and their generators.
//!
//! The tri-partite generator is
//! `L_g(ρ) = −i[H_A + H_C + H_B + gH, ρ] + γ_A(τ_A⊗tr_A ρ − ρ) + γ_B(tr_B ρ⊗τ_B − ρ)`.

use crate::error::{QrmError, Result};
use crate::linalg::{
    self, c, commutator, dagger, eigh, hermiticity_defect, identity, kron, kron3, max_abs, trace, zeros,
    CMatrix, HilbertDims, SuperOp, I, ONE,
};
use crate::random::{self, QrmRng};

/// Entrywise tolerance for Hermiticity, trace and commutation checks.
pub const MODEL_TOL: f64 = 1e-12;

pub fn validate_density(tau: &CMatrix, what: &str) -> Result<()> {
    linalg::check_square(tau)?;
    linalg::check_matrix(tau)?;
    let herm = hermiticity_defect(tau);
    if herm > MODEL_TOL {
        return Err(QrmError::InvalidModel(format!("{what} is not Hermitian (defect {herm:.2e})")));
    }
    let tr = trace(tau);
    if (tr - ONE).norm() > MODEL_TOL {
        return Err(QrmError::InvalidModel(format!("{what} has trace {tr}, expected 1")));
    }
    let (ev, _) = eigh(tau)?;
    if ev[0] < -MODEL_TOL {
        return Err(QrmError::InvalidModel(format!("{what} has negative eigenvalue {:.3e}", ev[0])));
    }
    Ok(())
}

fn validate_hermitian(h: &CMatrix, n: usize, what: &str) -> Result<()> {
    linalg::check_matrix(h)?;
    if h.dim() != (n, n) {
        return Err(QrmError::InvalidModel(format!("{what} has shape {:?}, expected {n}x{n}", h.dim())));
    }
    let herm = hermiticity_defect(h);
    if herm > MODEL_TOL {
        return Err(QrmError::InvalidModel(format!("{what} is not Hermitian (defect {herm:.2e})")));
    }
    Ok(())
}

/// A reset state and its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetSpec {
    pub tau: CMatrix,
    pub gamma: f64,
}

impl ResetSpec {
    pub fn new(tau: CMatrix, gamma: f64) -> Result<Self> {
        validate_density(&tau, "reset state")?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(QrmError::InvalidModel(format!("reset rate {gamma} must be positive")));
        }
        Ok(ResetSpec { tau, gamma })
    }

    /// `τ = diag(p)`.
    pub fn diagonal(p: &[f64], gamma: f64) -> Result<Self> {
        Self::new(linalg::diag_real(p), gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrmModel {
    pub dims: HilbertDims,
    pub reset_a: ResetSpec,
    pub reset_b: ResetSpec,
    pub h_a: CMatrix,
    pub h_b: CMatrix,
    pub h_c: CMatrix,
    pub h_coupling: CMatrix,
    pub g: f64,
}

impl QrmModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dims: HilbertDims,
        reset_a: ResetSpec,
        reset_b: ResetSpec,
        h_a: CMatrix,
        h_b: CMatrix,
        h_c: CMatrix,
        h_coupling: CMatrix,
        g: f64,
    ) -> Result<Self> {
        let m = QrmModel { dims, reset_a, reset_b, h_a, h_b, h_c, h_coupling, g };
        m.validate()?;
        Ok(m)
    }

    /// Model without leading-order drive: `H_A = H_B = H_C = 0`, so `L₀ = D`.
    pub fn undriven(dims: HilbertDims, reset_a: ResetSpec, reset_b: ResetSpec, h_coupling: CMatrix, g: f64) -> Result<Self> {
        Self::new(
            dims,
            reset_a,
            reset_b,
            zeros(dims.n_a),
            zeros(dims.n_b),
            zeros(dims.n_c),
            h_coupling,
            g,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        if self.reset_a.tau.nrows() != d.n_a || self.reset_b.tau.nrows() != d.n_b {
            return Err(QrmError::InvalidModel("reset state dimensions do not match n_a/n_b".into()));
        }
        validate_density(&self.reset_a.tau, "tau_a")?;
        validate_density(&self.reset_b.tau, "tau_b")?;
        for (g, what) in [(self.reset_a.gamma, "gamma_a"), (self.reset_b.gamma, "gamma_b")] {
            if !(g.is_finite() && g > 0.0) {
                return Err(QrmError::InvalidModel(format!("{what} = {g} must be positive")));
            }
        }
        validate_hermitian(&self.h_a, d.n_a, "h_a")?;
        validate_hermitian(&self.h_b, d.n_b, "h_b")?;
        validate_hermitian(&self.h_c, d.n_c, "h_c")?;
        validate_hermitian(&self.h_coupling, d.total(), "h_coupling")?;
        let ca = max_abs(&commutator(&self.h_a, &self.reset_a.tau));
        if ca > MODEL_TOL {
            return Err(QrmError::InvalidModel(format!("[h_a, tau_a] = {ca:.2e} != 0")));
        }
        let cb = max_abs(&commutator(&self.h_b, &self.reset_b.tau));
        if cb > MODEL_TOL {
            return Err(QrmError::InvalidModel(format!("[h_b, tau_b] = {cb:.2e} != 0")));
        }
        if !self.g.is_finite() {
            return Err(QrmError::InvalidModel("g must be finite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.dims.total()
    }

    pub fn tau_a(&self) -> &CMatrix {
        &self.reset_a.tau
    }

    pub fn tau_b(&self) -> &CMatrix {
        &self.reset_b.tau
    }

    pub fn gamma_a(&self) -> f64 {
        self.reset_a.gamma
    }

    pub fn gamma_b(&self) -> f64 {
        self.reset_b.gamma
    }

    pub fn with_g(&self, g: f64) -> Self {
        QrmModel { g, ..self.clone() }
    }

    pub fn with_coupling(&self, h: CMatrix) -> Result<Self> {
        let m = QrmModel { h_coupling: h, ..self.clone() };
        m.validate()?;
        Ok(m)
    }

    /// `H_A⊗I⊗I + I⊗H_C⊗I + I⊗I⊗H_B` on the full space.
    pub fn h0(&self) -> CMatrix {
        let d = self.dims;
        let (ia, ic, ib) = (identity(d.n_a), identity(d.n_c), identity(d.n_b));
        kron3(&self.h_a, &ic, &ib) + kron3(&ia, &self.h_c, &ib) + kron3(&ia, &ic, &self.h_b)
    }

    /// True when `H_A = H_B = H_C = 0`, i.e. `L₀ = D`.
    pub fn is_undriven(&self) -> bool {
        max_abs(&self.h_a) <= MODEL_TOL && max_abs(&self.h_b) <= MODEL_TOL && self.hc_is_zero()
    }

    pub fn hc_is_zero(&self) -> bool {
        max_abs(&self.h_c) <= MODEL_TOL
    }

    /// `τ_A ⊗ x ⊗ τ_B`.
    pub fn embed(&self, x: &CMatrix) -> CMatrix {
        kron3(self.tau_a(), x, self.tau_b())
    }

    pub fn tr_a(&self, rho: &CMatrix) -> CMatrix {
        linalg::tr_a(rho, self.dims)
    }

    pub fn tr_b(&self, rho: &CMatrix) -> CMatrix {
        linalg::tr_b(rho, self.dims)
    }

    pub fn tr_ab(&self, rho: &CMatrix) -> CMatrix {
        linalg::tr_ab(rho, self.dims)
    }

    /// `D(ρ)` applied directly.
    pub fn apply_dissipator(&self, rho: &CMatrix) -> CMatrix {
        let ra = kron(self.tau_a(), &self.tr_a(rho));
        let rb = kron(&self.tr_b(rho), self.tau_b());
        let ga = self.gamma_a();
        let gb = self.gamma_b();
        (ra - rho).mapv(|z| z * ga) + (rb - rho).mapv(|z| z * gb)
    }
}

/// Dissipator `D` as a superoperator.
pub fn build_dissipator(model: &QrmModel) -> SuperOp {
    SuperOp::from_map(model.n(), |x| model.apply_dissipator(x))
}

/// `ρ ↦ −i[h, ρ]`.
pub fn build_hamiltonian_part(h: &CMatrix) -> SuperOp {
    SuperOp::commutator(h).scale(-I)
}

/// `L₀ = −i[H₀,·] + D`.
pub fn build_uncoupled(model: &QrmModel) -> SuperOp {
    build_hamiltonian_part(&model.h0()).add(&build_dissipator(model))
}

/// `L₁ = −i[H,·]`.
pub fn build_perturbation(model: &QrmModel) -> SuperOp {
    build_hamiltonian_part(&model.h_coupling)
}

/// `L_g = L₀ + g L₁` at the model's coupling constant.
pub fn build_lindbladian(model: &QrmModel) -> SuperOp {
    build_uncoupled(model).add(&build_perturbation(model).scale(c(model.g, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrausSide {
    A,
    B,
}

#[derive(Debug, Clone)]
pub struct KrausDissipator {
    pub operators: Vec<CMatrix>,
    pub superop: SuperOp,
}

/// Kraus form of the reset `τ⊗tr_A(ρ) − ρ` (or `tr_B(ρ)⊗τ − ρ`):
/// `A_jk = √t_j |φ_j⟩⟨φ_k| ⊗ I`, assembled as `Σ A ρ A* − ½{A*A, ρ}`.
pub fn build_kraus_dissipator(tau: &CMatrix, dims: HilbertDims, side: KrausSide) -> Result<KrausDissipator> {
    validate_density(tau, "reset state")?;
    let (n_res, n_rest) = match side {
        KrausSide::A => (dims.n_a, dims.n_c * dims.n_b),
        KrausSide::B => (dims.n_b, dims.n_a * dims.n_c),
    };
    if tau.nrows() != n_res {
        return Err(QrmError::InvalidModel(format!("reset state of size {} for factor of size {n_res}", tau.nrows())));
    }
    let (t, phi) = eigh(tau)?;
    let rest = identity(n_rest);
    let mut ops = Vec::new();
    for (j, &tj) in t.iter().enumerate() {
        if tj <= 1e-15 {
            continue;
        }
        let sj = tj.sqrt();
        for k in 0..n_res {
            let local = linalg::outer(&phi.column(j).to_owned(), &phi.column(k).to_owned()).mapv(|z| z * sj);
            ops.push(match side {
                KrausSide::A => kron(&local, &rest),
                KrausSide::B => kron(&rest, &local),
            });
        }
    }
    let n = dims.total();
    let id = identity(n);
    let mut m = zeros(n * n);
    for a in &ops {
        let ada = dagger(a).dot(a);
        m = m + kron(&a.mapv(|z| z.conj()), a) - (kron(&id, &ada) + kron(&ada.t().to_owned(), &id)).mapv(|z| z * 0.5);
    }
    Ok(KrausDissipator { operators: ops, superop: SuperOp { dim: n, matrix: m } })
}

/// Single-system reset model `L(ρ) = −i[H,ρ] + Σ_l γ_l(τ_l tr ρ − ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleQrm {
    pub hamiltonian: CMatrix,
    pub resets: Vec<(CMatrix, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimpleMethod {
    ClosedForm,
    Expm,
}

#[derive(Debug, Clone)]
pub struct SimpleSolution {
    pub rho: CMatrix,
    pub method: SimpleMethod,
    /// Simple spectrum with pairwise distinct Bohr frequencies.
    pub gen_holds: bool,
}

impl SimpleQrm {
    pub fn new(hamiltonian: CMatrix, resets: Vec<(CMatrix, f64)>) -> Result<Self> {
        let n = linalg::check_square(&hamiltonian)?;
        validate_hermitian(&hamiltonian, n, "hamiltonian")?;
        if resets.is_empty() {
            return Err(QrmError::InvalidModel("at least one reset is required".into()));
        }
        for (tau, gamma) in &resets {
            if tau.nrows() != n {
                return Err(QrmError::InvalidModel("reset state dimension mismatch".into()));
            }
            ResetSpec::new(tau.clone(), *gamma)?;
        }
        Ok(SimpleQrm { hamiltonian, resets })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// `Γ = Σ γ_l`.
    pub fn gamma_total(&self) -> f64 {
        self.resets.iter().map(|(_, g)| g).sum()
    }

    /// `T = Γ⁻¹ Σ γ_l τ_l`.
    pub fn mixture(&self) -> CMatrix {
        let gt = self.gamma_total();
        self.resets.iter().fold(zeros(self.dim()), |acc, (tau, g)| acc + tau.mapv(|z| z * (g / gt)))
    }

    pub fn generator(&self) -> SuperOp {
        let n = self.dim();
        let gt = self.gamma_total();
        let t = self.mixture();
        let reset = SuperOp::from_map(n, |x| t.mapv(|z| z * (gt * trace(x))) - x.mapv(|z| z * gt));
        build_hamiltonian_part(&self.hamiltonian).add(&reset)
    }

    /// Checks the genericity assumption Gen: simple spectrum and distinct Bohr frequencies.
    pub fn gen_holds(&self) -> Result<bool> {
        let (e, _) = eigh(&self.hamiltonian)?;
        let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-9 * scale;
        let mut bohr = Vec::new();
        for j in 0..e.len() {
            for k in 0..e.len() {
                if j != k {
                    bohr.push(e[j] - e[k]);
                }
            }
        }
        bohr.sort_by(f64::total_cmp);
        let simple = e.windows(2).all(|w| w[1] - w[0] > tol);
        Ok(simple && bohr.windows(2).all(|w| w[1] - w[0] > tol))
    }

    /// Closed-form `ρ(t)` in the eigenbasis of `H`, falling back to `expm(tL)`
    /// when Gen fails.
    pub fn solve(&self, rho0: &CMatrix, t: f64) -> Result<SimpleSolution> {
        let n = self.dim();
        if rho0.dim() != (n, n) {
            return Err(QrmError::InvalidModel("initial state dimension mismatch".into()));
        }
        let gen = self.gen_holds()?;
        if !gen {
            let v = linalg::expm(&self.generator().matrix.mapv(|z| z * t))?.dot(&linalg::vectorize(rho0));
            return Ok(SimpleSolution { rho: linalg::devectorize(&v, n)?, method: SimpleMethod::Expm, gen_holds: false });
        }
        let (e, u) = eigh(&self.hamiltonian)?;
        let ud = dagger(&u);
        let r0 = ud.dot(rho0).dot(&u);
        let tm = ud.dot(&self.mixture()).dot(&u);
        let gt = self.gamma_total();
        let tr0 = trace(rho0);
        let mut r = zeros(n);
        for j in 0..n {
            for k in 0..n {
                let lam = c(gt, e[j] - e[k]);
                let decay = (-lam * t).exp();
                r[[j, k]] = decay * r0[[j, k]] + tr0 * gt * tm[[j, k]] / lam * (ONE - decay);
            }
        }
        Ok(SimpleSolution { rho: u.dot(&r).dot(&ud), method: SimpleMethod::ClosedForm, gen_holds: true })
    }

    /// `Γ (i[H,·] + Γ)⁻¹ (T)`.
    pub fn steady_state(&self) -> Result<CMatrix> {
        let n = self.dim();
        let (e, u) = eigh(&self.hamiltonian)?;
        let ud = dagger(&u);
        let tm = ud.dot(&self.mixture()).dot(&u);
        let gt = self.gamma_total();
        let r = ndarray::Array2::from_shape_fn((n, n), |(j, k)| gt * tm[[j, k]] / c(gt, e[j] - e[k]));
        Ok(u.dot(&r).dot(&ud))
    }
}

/// Options for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct RandomModelOptions {
    pub drive_a: bool,
    pub drive_b: bool,
    pub drive_c: bool,
    /// Operator-norm-ish scale of the coupling: `H` is normalised to Frobenius norm `coupling_scale`.
    pub coupling_scale: f64,
    pub g: f64,
}

impl Default for RandomModelOptions {
    fn default() -> Self {
        RandomModelOptions { drive_a: false, drive_b: false, drive_c: false, coupling_scale: 1.0, g: 0.0 }
    }
}

/// Random valid model: full-rank reset states, rates in `[0.5, 2]`, optional
/// commuting drives, generic coupling.
pub fn random_model(rng: &mut QrmRng, dims: HilbertDims, opts: RandomModelOptions) -> QrmModel {
    let side = |rng: &mut QrmRng, n: usize, drive: bool| {
        if drive {
            random::random_commuting_pair(rng, n)
        } else {
            (zeros(n), random::random_density(rng, n))
        }
    };
    let (h_a, tau_a) = side(rng, dims.n_a, opts.drive_a);
    let (h_b, tau_b) = side(rng, dims.n_b, opts.drive_b);
    let h_c = if opts.drive_c {
        let e: Vec<f64> = (0..dims.n_c).map(|k| k as f64 + random::uniform(rng, -0.3, 0.3)).collect();
        let u = random::random_unitary(rng, dims.n_c);
        u.dot(&linalg::diag_real(&e)).dot(&dagger(&u))
    } else {
        zeros(dims.n_c)
    };
    let h = random::random_hermitian(rng, dims.total());
    let nrm = linalg::fro_norm(&h);
    let h = h.mapv(|z| z * (opts.coupling_scale / nrm));
    let ga = random::uniform(rng, 0.5, 2.0);
    let gb = random::uniform(rng, 0.5, 2.0);
    QrmModel::new(
        dims,
        ResetSpec::new(tau_a, ga).expect("random density is valid"),
        ResetSpec::new(tau_b, gb).expect("random density is valid"),
        h_a,
        h_b,
        h_c,
        h,
        opts.g,
    )
    .expect("random model satisfies invariants")
}
