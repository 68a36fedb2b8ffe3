//! Analytic spectral data of the uncoupled generator `L₀ = −i[H₀,·] + D`.

use crate::error::{QrmError, Result};
use crate::linalg::{
    self, c, dagger, eigh, fro_norm, identity, kron, kron3, max_abs, max_abs_diff, outer, trace, CMatrix,
    SuperOp, C64, ONE, ZERO,
};
use crate::model::{build_uncoupled, QrmModel};
use serde::Serialize;

/// Orthonormal basis of one factor diagonalising both `H_#` and `τ_#`.
#[derive(Debug, Clone)]
pub struct FactorBasis {
    pub energies: Vec<f64>,
    pub populations: Vec<f64>,
    /// Basis vectors as columns.
    pub vectors: CMatrix,
}

impl FactorBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ket(&self, j: usize) -> linalg::CVector {
        self.vectors.column(j).to_owned()
    }

    /// `|φ_j⟩⟨φ_k|`.
    pub fn p(&self, j: usize, k: usize) -> CMatrix {
        outer(&self.ket(j), &self.ket(k))
    }

    /// `Δ_j = |φ_j⟩⟨φ_j| − |φ_{j+1}⟩⟨φ_{j+1}|`.
    pub fn delta(&self, j: usize) -> CMatrix {
        self.p(j, j) - self.p(j + 1, j + 1)
    }
}

/// Eigenbasis of `h`, with `tau` diagonalised inside each degenerate eigenspace.
/// For `h = 0` this is the eigenbasis of `tau`.
pub fn factor_basis(h: &CMatrix, tau: &CMatrix) -> Result<FactorBasis> {
    let n = h.nrows();
    let (e, u) = eigh(h)?;
    let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut vectors = u.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (e[end] - e[start]).abs() <= 1e-10 * scale {
            end += 1;
        }
        if end - start > 1 {
            let ug = u.slice(ndarray::s![.., start..end]).to_owned();
            let t = dagger(&ug).dot(tau).dot(&ug);
            let (_, w) = eigh(&t)?;
            let mut blk = ug.dot(&w);
            for mut col in blk.columns_mut() {
                linalg::fix_phase(&mut col);
            }
            vectors.slice_mut(ndarray::s![.., start..end]).assign(&blk);
        }
        start = end;
    }
    let tdiag = dagger(&vectors).dot(tau).dot(&vectors);
    let mut off: f64 = 0.0;
    for ((i, j), z) in tdiag.indexed_iter() {
        if i != j {
            off = off.max(z.norm());
        }
    }
    if off > 1e-10 {
        return Err(QrmError::InvalidModel(format!(
            "reset state is not diagonal in the Hamiltonian eigenbasis (off-diagonal {off:.2e})"
        )));
    }
    let populations = (0..n).map(|j| tdiag[[j, j]].re).collect();
    let energies = (0..n)
        .map(|j| (dagger(&vectors).dot(h).dot(&vectors))[[j, j]].re)
        .collect();
    Ok(FactorBasis { energies, populations, vectors })
}

/// The four dissipator projectors.
#[derive(Debug, Clone)]
pub struct DissipatorProjectors {
    pub q0: SuperOp,
    pub qa: SuperOp,
    pub qb: SuperOp,
    pub qab: SuperOp,
}

pub fn apply_q0(model: &QrmModel, rho: &CMatrix) -> CMatrix {
    model.embed(&model.tr_ab(rho))
}

pub fn dissipator_projectors(model: &QrmModel) -> DissipatorProjectors {
    let n = model.n();
    let ta = model.tau_a();
    let tb = model.tau_b();
    let q0 = SuperOp::from_map(n, |x| apply_q0(model, x));
    let qa = SuperOp::from_map(n, |x| kron(&model.tr_b(x), tb) - apply_q0(model, x));
    let qb = SuperOp::from_map(n, |x| kron(ta, &model.tr_a(x)) - apply_q0(model, x));
    let qab = SuperOp::from_map(n, |x| {
        x - &kron(&model.tr_b(x), tb) - kron(ta, &model.tr_a(x)) + apply_q0(model, x)
    });
    DissipatorProjectors { q0, qa, qb, qab }
}

/// Eigenvalues with spectral projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<C64>,
    pub projectors: Vec<SuperOp>,
    pub semisimple: Vec<bool>,
}

impl SpectralDecomp {
    /// `D = 0·Q₀ − γ_A Q_A − γ_B Q_B − (γ_A+γ_B) Q_AB`.
    pub fn of_dissipator(model: &QrmModel) -> Self {
        let p = dissipator_projectors(model);
        let (ga, gb) = (model.gamma_a(), model.gamma_b());
        SpectralDecomp {
            eigenvalues: vec![ZERO, c(-ga, 0.0), c(-gb, 0.0), c(-ga - gb, 0.0)],
            projectors: vec![p.q0, p.qa, p.qb, p.qab],
            semisimple: vec![true; 4],
        }
    }

    /// `‖Σ Q_i − I‖_max`.
    pub fn completeness_defect(&self) -> f64 {
        let dim = self.projectors[0].dim;
        let sum = self.projectors.iter().fold(SuperOp::zero(dim), |a, q| a.add(q));
        max_abs_diff(&sum.matrix, &identity(dim * dim))
    }

    /// `max_{i,j} ‖Q_i Q_j − δ_ij Q_i‖_max`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, qi) in self.projectors.iter().enumerate() {
            for (j, qj) in self.projectors.iter().enumerate() {
                let p = qi.compose(qj).matrix;
                let d = if i == j { max_abs_diff(&p, &qi.matrix) } else { max_abs(&p) };
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn reconstruct(&self) -> SuperOp {
        let dim = self.projectors[0].dim;
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(SuperOp::zero(dim), |a, (l, q)| a.add(&q.scale(*l)))
    }

    pub fn ranks(&self) -> Result<Vec<usize>> {
        self.projectors
            .iter()
            .map(|q| linalg::numeric_rank(&q.matrix, 1e-9).map_err(QrmError::from))
            .collect()
    }
}

/// How one of the `A`/`B` factors enters an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FactorPart {
    Tau,
    Delta(usize),
    P(usize, usize),
}

impl FactorPart {
    fn tag(&self) -> &'static str {
        match self {
            FactorPart::Tau => "tau",
            FactorPart::Delta(_) => "Delta",
            FactorPart::P(..) => "P",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sector {
    Q0,
    A,
    B,
    AB,
}

/// One entry of the full uncoupled eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenTableEntry {
    pub eigenvalue: C64,
    pub eigenvector: CMatrix,
    pub a: FactorPart,
    pub c: (usize, usize),
    pub b: FactorPart,
}

impl EigenTableEntry {
    pub fn sector(&self) -> Sector {
        match (self.a, self.b) {
            (FactorPart::Tau, FactorPart::Tau) => Sector::Q0,
            (_, FactorPart::Tau) => Sector::A,
            (FactorPart::Tau, _) => Sector::B,
            _ => Sector::AB,
        }
    }

    /// Family label such as `"Delta⊗P⊗tau"`.
    pub fn family(&self) -> String {
        format!("{}⊗P⊗{}", self.a.tag(), self.b.tag())
    }
}

fn factor_parts(n: usize) -> Vec<FactorPart> {
    let mut v = vec![FactorPart::Tau];
    v.extend((0..n.saturating_sub(1)).map(FactorPart::Delta));
    for j in 0..n {
        for k in 0..n {
            if j != k {
                v.push(FactorPart::P(j, k));
            }
        }
    }
    v
}

fn part_matrix(basis: &FactorBasis, tau: &CMatrix, part: FactorPart) -> CMatrix {
    match part {
        FactorPart::Tau => tau.clone(),
        FactorPart::Delta(j) => basis.delta(j),
        FactorPart::P(j, k) => basis.p(j, k),
    }
}

fn part_frequency(basis: &FactorBasis, part: FactorPart) -> f64 {
    match part {
        FactorPart::P(j, k) => basis.energies[j] - basis.energies[k],
        _ => 0.0,
    }
}

/// All `(n_A n_C n_B)²` eigenpairs of `L₀` from the analytic table.
pub fn uncoupled_eigentable(model: &QrmModel) -> Result<Vec<EigenTableEntry>> {
    let d = model.dims;
    let ba = factor_basis(&model.h_a, model.tau_a())?;
    let bb = factor_basis(&model.h_b, model.tau_b())?;
    let bc = factor_basis(&model.h_c, &identity(d.n_c))?;
    let (ga, gb) = (model.gamma_a(), model.gamma_b());
    let mut out = Vec::with_capacity(d.total() * d.total());
    for pa in factor_parts(d.n_a) {
        let ma = part_matrix(&ba, model.tau_a(), pa);
        for j in 0..d.n_c {
            for k in 0..d.n_c {
                let mc = bc.p(j, k);
                let mac = kron(&ma, &mc);
                for pb in factor_parts(d.n_b) {
                    let mb = part_matrix(&bb, model.tau_b(), pb);
                    let re = -(if pa == FactorPart::Tau { 0.0 } else { ga }) - (if pb == FactorPart::Tau { 0.0 } else { gb });
                    let freq = part_frequency(&ba, pa) + (bc.energies[j] - bc.energies[k]) + part_frequency(&bb, pb);
                    out.push(EigenTableEntry {
                        eigenvalue: c(re, -freq),
                        eigenvector: kron(&mac, &mb),
                        a: pa,
                        c: (j, k),
                        b: pb,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// `max ‖L₀v − λv‖/‖v‖` over the table.
pub fn eigentable_max_residual(model: &QrmModel, table: &[EigenTableEntry]) -> f64 {
    let l0 = build_uncoupled(model);
    table
        .iter()
        .map(|e| {
            let r = l0.apply(&e.eigenvector) - e.eigenvector.mapv(|z| z * e.eigenvalue);
            fro_norm(&r) / fro_norm(&e.eigenvector)
        })
        .fold(0.0, f64::max)
}

/// Rank and 2-norm condition number of the vectorised table.
pub fn eigentable_rank_condition(table: &[EigenTableEntry]) -> Result<(usize, f64)> {
    let n2 = table.len();
    let mut m = linalg::zeros(n2);
    for (k, e) in table.iter().enumerate() {
        let v = linalg::vectorize(&e.eigenvector);
        let nrm = linalg::vec_norm(&v);
        m.column_mut(k).assign(&v.mapv(|z| z / nrm));
    }
    let s = linalg::singular_values(&m)?;
    let rank = s.iter().filter(|&&x| x > 1e-10 * s[0]).count();
    Ok((rank, s[0] / s[s.len() - 1]))
}

/// Named rank-one projector of a single-factor reset map.
#[derive(Debug, Clone)]
pub struct RankOneProjector {
    pub label: String,
    pub op: SuperOp,
}

/// `Q₀(·) = τ tr(·)`, `Q_j(·) = Δ_j tr(σ_j(· − τ tr ·))`, `Q_jk(·) = P_jk tr(P_jk* ·)`
/// with `σ_j = Σ_{k≤j} |φ_k⟩⟨φ_k|`; `basis` holds the `φ_k` as columns.
pub fn rank_one_projectors(tau: &CMatrix, basis: &CMatrix) -> Result<Vec<RankOneProjector>> {
    let n = linalg::check_square(tau)?;
    let fb = FactorBasis { energies: vec![0.0; n], populations: vec![0.0; n], vectors: basis.clone() };
    let tdiag = dagger(basis).dot(tau).dot(basis);
    for ((i, j), z) in tdiag.indexed_iter() {
        if i != j && z.norm() > 1e-10 {
            return Err(QrmError::InvalidModel("reset state is not diagonal in the supplied basis".into()));
        }
    }
    let mut out = vec![RankOneProjector {
        label: "Q0".into(),
        op: SuperOp::from_map(n, |x| tau.mapv(|z| z * trace(x))),
    }];
    for j in 0..n.saturating_sub(1) {
        let sigma = (0..=j).fold(linalg::zeros(n), |a, k| a + fb.p(k, k));
        let delta = fb.delta(j);
        out.push(RankOneProjector {
            label: format!("Q_{}", j + 1),
            op: SuperOp::from_map(n, |x| {
                let y = x - &tau.mapv(|z| z * trace(x));
                delta.mapv(|z| z * trace(&sigma.dot(&y)))
            }),
        });
    }
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let p = fb.p(j, k);
                let pd = dagger(&p);
                out.push(RankOneProjector {
                    label: format!("Q_{}{}", j + 1, k + 1),
                    op: SuperOp::from_map(n, |x| p.mapv(|z| z * trace(&pd.dot(x)))),
                });
            }
        }
    }
    Ok(out)
}

/// Closed-form `D⁻¹` on `ran(I − Q₀)`:
/// `−(γ_A+γ_B)⁻¹ {ρ̃ + (γ_A/γ_B) τ_A⊗tr_A ρ̃ + (γ_B/γ_A) tr_B ρ̃⊗τ_B}`.
pub fn dissipator_inverse(model: &QrmModel, rho_tilde: &CMatrix) -> Result<CMatrix> {
    let q0_part = max_abs(&model.tr_ab(rho_tilde));
    let tol = 1e-10 * max_abs(rho_tilde).max(1.0);
    if q0_part > tol {
        return Err(QrmError::residual("dissipator_inverse: input has tr_AB != 0", q0_part, tol));
    }
    Ok(dissipator_inverse_unchecked(model, rho_tilde))
}

pub(crate) fn dissipator_inverse_unchecked(model: &QrmModel, x: &CMatrix) -> CMatrix {
    let (ga, gb) = (model.gamma_a(), model.gamma_b());
    let s = kron(model.tau_a(), &model.tr_a(x)).mapv(|z| z * (ga / gb))
        + kron(&model.tr_b(x), model.tau_b()).mapv(|z| z * (gb / ga))
        + x;
    s.mapv(|z| z * (-1.0 / (ga + gb)))
}

/// Uncoupled asymptotics `τ_A ⊗ e^{−i t[H_C,·]}(tr_AB ρ) ⊗ τ_B`.
pub fn uncoupled_asymptote(model: &QrmModel, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    let u = linalg::expm(&model.h_c.mapv(|z| z * c(0.0, -t)))?;
    let rc = u.dot(&model.tr_ab(rho0)).dot(&dagger(&u));
    Ok(kron3(model.tau_a(), &rc, model.tau_b()))
}

#[allow(dead_code)]
fn is_identity(m: &CMatrix) -> bool {
    max_abs_diff(m, &identity(m.nrows())) < 1e-14 && m[[0, 0]] == ONE
}
