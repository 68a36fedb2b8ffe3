//! Worked models: a qubit–`C^N`–qubit chain and a chain of three qubits, with
//! their closed-form leading-order data.

use crate::error::{QrmError, Result};
use crate::linalg::{c, dagger, diag_real, identity, kron, kron3, outer, unit, zeros, CMatrix, HilbertDims, C64, I, ZERO};
use crate::model::{QrmModel, ResetSpec};
use serde::{Deserialize, Serialize};

/// `C² ⊗ C^N ⊗ C²` with `A = {g, e}`, `C = {φ_1..φ_N}`, `B = {↓, ↑}` in that index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitNQubitParams {
    pub n: usize,
    pub a_g: Vec<f64>,
    pub a_e: Vec<f64>,
    pub b_down: Vec<f64>,
    pub b_up: Vec<f64>,
    pub alpha: Vec<(f64, f64)>,
    pub beta: Vec<(f64, f64)>,
    pub t_a: f64,
    pub t_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
}

fn cplx(p: (f64, f64)) -> C64 {
    c(p.0, p.1)
}

impl QubitNQubitParams {
    /// Real couplings, zero energies except for the given effective energies `a_g`.
    pub fn with_couplings(alpha: &[f64], beta: &[f64], energies: &[f64], t_a: f64, t_b: f64, gamma_a: f64, gamma_b: f64) -> Self {
        let n = alpha.len();
        QubitNQubitParams {
            n,
            a_g: energies.to_vec(),
            a_e: energies.to_vec(),
            b_down: vec![0.0; n],
            b_up: vec![0.0; n],
            alpha: alpha.iter().map(|&x| (x, 0.0)).collect(),
            beta: beta.iter().map(|&x| (x, 0.0)).collect(),
            t_a,
            t_b,
            gamma_a,
            gamma_b,
        }
    }

    fn abs2_alpha(&self, k: usize) -> f64 {
        cplx(self.alpha[k]).norm_sqr()
    }

    fn abs2_beta(&self, k: usize) -> f64 {
        cplx(self.beta[k]).norm_sqr()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(QrmError::Config("N must be at least 2".into()));
        }
        for (v, what) in [(&self.a_g, "a_g"), (&self.a_e, "a_e"), (&self.b_down, "b_down"), (&self.b_up, "b_up")] {
            if v.len() != n {
                return Err(QrmError::Config(format!("{what} has length {} != N = {n}", v.len())));
            }
        }
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(QrmError::Config("alpha and beta need N entries".into()));
        }
        if !(0.0 < self.t_a && self.t_a < 1.0 && 0.0 < self.t_b && self.t_b < 1.0) {
            return Err(QrmError::Config("t_a and t_b must lie in (0, 1)".into()));
        }
        if !(self.gamma_a > 0.0 && self.gamma_b > 0.0) {
            return Err(QrmError::Config("rates must be positive".into()));
        }
        Ok(())
    }

    /// `(α_2⋯α_{N−1} ≠ 0 or β_2⋯β_{N−1} ≠ 0) and |β_1|² + |α_N|² ≠ 0`.
    pub fn coupling_hypothesis(&self) -> bool {
        let n = self.n;
        let interior_a = (1..n - 1).all(|k| self.abs2_alpha(k) > 0.0);
        let interior_b = (1..n - 1).all(|k| self.abs2_beta(k) > 0.0);
        (interior_a || interior_b) && self.abs2_beta(0) + self.abs2_alpha(n - 1) > 0.0
    }

    /// `e_j^τ = t_A a_j^(g) + (1−t_A) a_j^(e) + t_B b_j^(↓) + (1−t_B) b_j^(↑)`.
    pub fn effective_energies(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                self.t_a * self.a_g[j] + (1.0 - self.t_a) * self.a_e[j] + self.t_b * self.b_down[j]
                    + (1.0 - self.t_b) * self.b_up[j]
            })
            .collect()
    }

    pub fn h_alpha(&self) -> CMatrix {
        let n = self.n;
        let g = unit(2, 0, 0);
        let e = unit(2, 1, 1);
        let mut h = kron(&g, &diag_real(&self.a_g)) + kron(&e, &diag_real(&self.a_e));
        let mut lower = zeros(2 * n);
        for k in 0..n {
            // |g φ_1⟩⟨e φ_k|
            lower[[0, n + k]] += cplx(self.alpha[k]);
        }
        h = h + &lower + dagger(&lower);
        h
    }

    pub fn h_beta(&self) -> CMatrix {
        let n = self.n;
        let down = unit(2, 0, 0);
        let up = unit(2, 1, 1);
        let mut h = kron(&diag_real(&self.b_down), &down) + kron(&diag_real(&self.b_up), &up);
        let mut t = zeros(2 * n);
        for k in 0..n {
            // |φ_N ↓⟩⟨φ_k ↑|
            t[[2 * (n - 1), 2 * k + 1]] += cplx(self.beta[k]);
        }
        h = h + &t + dagger(&t);
        h
    }

    /// `H_A = H_B = H_C = 0`, coupling `H_α⊗I_B + I_A⊗H_β`.
    pub fn build(&self) -> Result<QrmModel> {
        self.validate()?;
        let dims = HilbertDims::new(2, self.n, 2)?;
        let h = kron(&self.h_alpha(), &identity(2)) + kron(&identity(2), &self.h_beta());
        QrmModel::undriven(
            dims,
            ResetSpec::diagonal(&[self.t_a, 1.0 - self.t_a], self.gamma_a)?,
            ResetSpec::diagonal(&[self.t_b, 1.0 - self.t_b], self.gamma_b)?,
            h,
            0.0,
        )
    }

    /// `(S_k, U_k, T_k, V_k)`.
    pub fn rate_coefficients(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (ta, tb, ga, gb) = (self.t_a, self.t_b, self.gamma_a, self.gamma_b);
        let s = (0..self.n).map(|k| gb * (1.0 - ta) * self.abs2_alpha(k)).collect();
        let u = (0..self.n).map(|k| gb * ta * self.abs2_alpha(k)).collect();
        let t = (0..self.n).map(|k| ga * (1.0 - tb) * self.abs2_beta(k)).collect();
        let v = (0..self.n).map(|k| ga * tb * self.abs2_beta(k)).collect();
        (s, u, t, v)
    }

    /// `y(N) = Σ_{j=2}^{N−1} γ_Aγ_B|α_jβ_j|² / ((1−t_A)γ_B|α_j|² + (1−t_B)γ_A|β_j|²)`.
    pub fn y_sum(&self) -> Result<f64> {
        let mut y = 0.0;
        for j in 1..self.n - 1 {
            let den = self.interior_denominator(j)?;
            y += self.gamma_a * self.gamma_b * self.abs2_alpha(j) * self.abs2_beta(j) / den;
        }
        Ok(y)
    }

    fn interior_denominator(&self, j: usize) -> Result<f64> {
        let den = (1.0 - self.t_a) * self.gamma_b * self.abs2_alpha(j) + (1.0 - self.t_b) * self.gamma_a * self.abs2_beta(j);
        if den <= 0.0 {
            return Err(QrmError::Coup(format!("S_j + T_j = 0 at interior site j = {}", j + 1)));
        }
        Ok(den)
    }

    /// Kernel vector of `Φ_D` from the recursive formulas.
    pub fn kernel_recursive(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let (s, u, t, v) = self.rate_coefficients();
        let mut x1 = s[n - 1] + v[0];
        let mut xn = u[n - 1] + t[0];
        for j in 1..n - 1 {
            let d = s[j] + t[j];
            if d <= 0.0 {
                return Err(QrmError::Coup(format!("S_j + T_j = 0 at interior site j = {}", j + 1)));
            }
            x1 += v[j] * s[j] / d;
            xn += u[j] * t[j] / d;
        }
        let mut x = vec![0.0; n];
        x[0] = x1;
        x[n - 1] = xn;
        for j in 1..n - 1 {
            x[j] = (u[j] * x1 + v[j] * xn) / (s[j] + t[j]);
        }
        Ok(x)
    }

    /// Kernel vector of `Φ_D` from the explicit `y(N)` formulas.
    pub fn kernel_explicit(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let (ta, tb, ga, gb) = (self.t_a, self.t_b, self.gamma_a, self.gamma_b);
        let an = self.abs2_alpha(n - 1);
        let b1 = self.abs2_beta(0);
        let y = self.y_sum()?;
        let mut x = vec![0.0; n];
        x[0] = (1.0 - ta) * an * gb + y * tb * (1.0 - ta) + tb * b1 * ga;
        x[n - 1] = ta * an * gb + y * ta * (1.0 - tb) + (1.0 - tb) * b1 * ga;
        for j in 1..n - 1 {
            let den = self.interior_denominator(j)?;
            x[j] = ta * an * gb + tb * b1 * ga + y * ta * tb
                + ga * gb * (an * ta * (2.0 * tb - 1.0) * self.abs2_beta(j) + b1 * tb * (2.0 * ta - 1.0) * self.abs2_alpha(j)) / den;
        }
        Ok(x)
    }

    /// `ρ₀ = Z⁻¹ τ_A ⊗ Σ x_j |φ_j⟩⟨φ_j| ⊗ τ_B` with `Z = Σ x_j`.
    pub fn closed_form_rho0(&self) -> Result<(Vec<f64>, f64, CMatrix)> {
        let x = self.kernel_recursive()?;
        let z: f64 = x.iter().sum();
        let rc = diag_real(&x.iter().map(|v| v / z).collect::<Vec<_>>());
        let ta = diag_real(&[self.t_a, 1.0 - self.t_a]);
        let tb = diag_real(&[self.t_b, 1.0 - self.t_b]);
        Ok((x, z, kron3(&ta, &rc, &tb)))
    }

    /// `(2t_A−1)t_Bγ_A|β_1|²/(1−t_A) − (2t_B−1)t_Aγ_B|α_N|²/(1−t_B)`; zero makes interior `x_j` constant.
    pub fn constant_population_defect(&self) -> f64 {
        let (ta, tb) = (self.t_a, self.t_b);
        (2.0 * ta - 1.0) * tb * self.gamma_a * self.abs2_beta(0) / (1.0 - ta)
            - (2.0 * tb - 1.0) * ta * self.gamma_b * self.abs2_alpha(self.n - 1) / (1.0 - tb)
    }
}

/// Three qubits `A⊗C⊗B` in the computational basis, index `4a + 2c + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeQubitParams {
    pub e_a: f64,
    pub e_b: f64,
    pub e_c: f64,
    pub u: f64,
    pub j_alpha: f64,
    pub j_beta: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
}

impl Default for ThreeQubitParams {
    fn default() -> Self {
        ThreeQubitParams::thermal(1.0, 1.2, 1.1, 0.8, 0.5, 0.7, 1.0, 0.5, 0.9, 1.3)
    }
}

/// Ground-state population of a thermal qubit, `1/(1 + e^{−βe})`.
pub fn thermal_population(beta: f64, e: f64) -> f64 {
    1.0 / (1.0 + (-beta * e).exp())
}

/// `i(|01⟩⟨10| − |10⟩⟨01|)` on two qubits.
pub fn f1() -> CMatrix {
    (unit(4, 1, 2) - unit(4, 2, 1)).mapv(|z| z * I)
}

/// `|01⟩⟨10| + |10⟩⟨01|` on two qubits.
pub fn f2() -> CMatrix {
    unit(4, 1, 2) + unit(4, 2, 1)
}

/// Closed-form data of the three-qubit chain.
#[derive(Debug, Clone)]
pub struct ThreeQubitClosedForms {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub rho_c0: CMatrix,
    /// `Φ_D` as a 2×2 matrix on the populations of `|0⟩, |1⟩`.
    pub phi_d: [[f64; 2]; 2],
    pub phi_d_spectrum: [f64; 2],
    pub r1: CMatrix,
    pub r2: CMatrix,
    /// The eight-entry list whose multiple is `Diag(R₂)`.
    pub r2_diag_list: [f64; 8],
    pub x2: f64,
}

impl ThreeQubitParams {
    #[allow(clippy::too_many_arguments)]
    pub fn thermal(
        e_a: f64,
        e_b: f64,
        e_c: f64,
        u: f64,
        j_alpha: f64,
        j_beta: f64,
        beta_a: f64,
        beta_b: f64,
        gamma_a: f64,
        gamma_b: f64,
    ) -> Self {
        ThreeQubitParams {
            e_a,
            e_b,
            e_c,
            u,
            j_alpha,
            j_beta,
            t_a: thermal_population(beta_a, e_a),
            t_b: thermal_population(beta_b, e_b),
            gamma_a,
            gamma_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t_a && self.t_a < 1.0 && 0.0 < self.t_b && self.t_b < 1.0) {
            return Err(QrmError::Config("t_a and t_b must lie in (0, 1)".into()));
        }
        if !(self.gamma_a > 0.0 && self.gamma_b > 0.0) {
            return Err(QrmError::Config("rates must be positive".into()));
        }
        Ok(())
    }

    /// `U ≠ 0` and `t_A + t_B ≠ 2`.
    pub fn spec_holds(&self) -> bool {
        self.u != 0.0 && (self.t_a + self.t_b - 2.0).abs() > 1e-14
    }

    pub fn tau_a(&self) -> CMatrix {
        diag_real(&[self.t_a, 1.0 - self.t_a])
    }

    pub fn tau_b(&self) -> CMatrix {
        diag_real(&[self.t_b, 1.0 - self.t_b])
    }

    /// The interaction `H`.
    pub fn coupling(&self) -> CMatrix {
        let i2 = identity(2);
        let n11 = unit(4, 3, 3);
        let flip = unit(4, 1, 2);
        let flip = &flip + &dagger(&flip);
        kron(&n11, &i2).mapv(|z| z * self.u)
            + kron(&i2, &n11).mapv(|z| z * self.u)
            + kron(&flip, &i2).mapv(|z| z * self.j_alpha)
            + kron(&i2, &flip).mapv(|z| z * self.j_beta)
    }

    /// `H₀ = e_A|1⟩⟨1|⊗I⊗I + I⊗e_C|1⟩⟨1|⊗I + I⊗I⊗e_B|1⟩⟨1|`.
    pub fn bare_hamiltonian(&self) -> CMatrix {
        let n1 = unit(2, 1, 1);
        let i2 = identity(2);
        kron3(&n1, &i2, &i2).mapv(|z| z * self.e_a)
            + kron3(&i2, &n1, &i2).mapv(|z| z * self.e_c)
            + kron3(&i2, &i2, &n1).mapv(|z| z * self.e_b)
    }

    /// `H_tot = H₀ + gH`.
    pub fn h_tot(&self, g: f64) -> CMatrix {
        self.bare_hamiltonian() + self.coupling().mapv(|z| z * g)
    }

    /// The undriven model used for all closed forms.
    pub fn build(&self) -> Result<QrmModel> {
        self.validate()?;
        QrmModel::undriven(
            HilbertDims::new(2, 2, 2)?,
            ResetSpec::diagonal(&[self.t_a, 1.0 - self.t_a], self.gamma_a)?,
            ResetSpec::diagonal(&[self.t_b, 1.0 - self.t_b], self.gamma_b)?,
            self.coupling(),
            0.0,
        )
    }

    /// The same chain with the bare energies as drives.
    pub fn build_driven(&self) -> Result<QrmModel> {
        self.validate()?;
        let n1 = |e: f64| diag_real(&[0.0, e]);
        QrmModel::new(
            HilbertDims::new(2, 2, 2)?,
            ResetSpec::diagonal(&[self.t_a, 1.0 - self.t_a], self.gamma_a)?,
            ResetSpec::diagonal(&[self.t_b, 1.0 - self.t_b], self.gamma_b)?,
            n1(self.e_a),
            n1(self.e_b),
            n1(self.e_c),
            self.coupling(),
            0.0,
        )
    }

    /// Parameters of the qubit–`C²`–qubit chain describing the same model.
    pub fn to_qubit_n_qubit(&self) -> QubitNQubitParams {
        QubitNQubitParams {
            n: 2,
            a_g: vec![0.0, 0.0],
            a_e: vec![self.u, 0.0],
            b_down: vec![self.u, 0.0],
            b_up: vec![0.0, 0.0],
            alpha: vec![(0.0, 0.0), (self.j_alpha, 0.0)],
            beta: vec![(self.j_beta, 0.0), (0.0, 0.0)],
            t_a: self.t_a,
            t_b: 1.0 - self.t_b,
            gamma_a: self.gamma_a,
            gamma_b: self.gamma_b,
        }
    }

    /// `I⊗X⊗X`, carrying the computational basis to the `{g,e}⊗{φ_1,φ_2}⊗{↓,↑}` ordering.
    pub fn relabeling(&self) -> CMatrix {
        let x = unit(2, 0, 1) + unit(2, 1, 0);
        kron3(&identity(2), &x, &x)
    }

    pub fn closed_forms(&self) -> ThreeQubitClosedForms {
        let (ta, tb, ga, gb) = (self.t_a, self.t_b, self.gamma_a, self.gamma_b);
        let (ja, jb, u) = (self.j_alpha, self.j_beta, self.u);
        let (ja2, jb2) = (ja * ja, jb * jb);
        let phi_plus = ga * jb2 * tb + gb * ja2 * ta;
        let phi_minus = ga * jb2 * (1.0 - tb) + gb * ja2 * (1.0 - ta);
        let sum = phi_plus + phi_minus;
        let rho_c0 = diag_real(&[phi_plus / sum, phi_minus / sum]);
        let k = -2.0 / (ga * gb);
        let phi_d = [[k * phi_minus, -k * phi_plus], [-k * phi_minus, k * phi_plus]];
        let phi_d_spectrum = [0.0, k * sum];

        let w = jb2 * ga + ja2 * gb;
        let tau_a = self.tau_a();
        let tau_b = self.tau_b();
        let r1 = (kron(&f1(), &tau_b).mapv(|z| z * jb) + kron(&tau_a, &f1()).mapv(|z| z * ja))
            .mapv(|z| z * ((ta - tb) * ja * jb / w));

        let r2_diag_list = [
            ta * tb * (ga - gb),
            -ta * (tb * ga + gb * (1.0 - tb)),
            ta * ga * (1.0 - tb) - tb * gb * (1.0 - ta),
            -(1.0 - tb) * (ta * ga + gb * (1.0 - ta)),
            tb * (gb * ta + ga * (1.0 - ta)),
            gb * ta * (1.0 - tb) - ga * tb * (1.0 - ta),
            (1.0 - ta) * (gb * tb + ga * (1.0 - tb)),
            (1.0 - ta) * (1.0 - tb) * (gb - ga),
        ];
        let pref = 2.0 * ja * jb * (ta - tb) / w;
        let gamma_a_m = diag_real(&[ga, ga + gb / (1.0 - ta)]);
        let gamma_b_m = diag_real(&[gb, gb + ga / (1.0 - tb)]);
        let e001_100 = unit(8, 1, 4);
        let e110_011 = unit(8, 6, 3);
        let off = kron(&tau_a.dot(&gamma_a_m), &f2()).mapv(|z| z * (-ja * u * (1.0 - ta) / (2.0 * gb)))
            + kron(&f2(), &tau_b.dot(&gamma_b_m)).mapv(|z| z * (jb * u * (1.0 - tb) / (2.0 * ga)))
            + (&e001_100 + &dagger(&e001_100)).mapv(|z| z * (-0.5 * (ja2 * ta - jb2 * tb)))
            + (&e110_011 + &dagger(&e110_011)).mapv(|z| z * (0.5 * (ja2 * (1.0 - ta) - jb2 * (1.0 - tb))));
        let diag_scale = ja * jb / (ga * gb);
        let diag = diag_real(&r2_diag_list.map(|x| x * diag_scale));
        let r2 = (diag + off.mapv(|z| z / (ga + gb))).mapv(|z| z * pref);

        let x2 = ja2 * jb2 * (ta - tb) / (ga * gb * (ga + gb) * w * w)
            * ((ga + gb) * (jb2 * ga * (2.0 * ga - gb) - ja2 * gb * (2.0 * gb - ga))
                + u * u
                    * ((1.0 - ta) * ga * ga * (gb + (1.0 - ta) * ga)
                        - (1.0 - tb) * gb * gb * (ga + (1.0 - tb) * gb)));

        ThreeQubitClosedForms { phi_plus, phi_minus, rho_c0, phi_d, phi_d_spectrum, r1, r2, r2_diag_list, x2 }
    }

    /// `s̃ = 2s(φ₊+φ₋)/(γ_Aγ_B)`.
    pub fn rescaled_time(&self, s: f64) -> f64 {
        let cf = self.closed_forms();
        2.0 * s * (cf.phi_plus + cf.phi_minus) / (self.gamma_a * self.gamma_b)
    }

    /// `P(X_s = j | X_0 = i)` as `[[P(0|0), P(1|0)], [P(0|1), P(1|1)]]`.
    pub fn transition_probabilities(&self, s: f64) -> [[f64; 2]; 2] {
        let cf = self.closed_forms();
        let (p, m) = (cf.phi_plus, cf.phi_minus);
        let e = (-self.rescaled_time(s)).exp();
        let z = p + m;
        [[(p + e * m) / z, m * (1.0 - e) / z], [p * (1.0 - e) / z, (m + e * p) / z]]
    }

    /// `r_C^(2) = diag(X⁽²⁾, −X⁽²⁾)` on `|0⟩, |1⟩`.
    pub fn r_c2(&self) -> CMatrix {
        let x = self.closed_forms().x2;
        diag_real(&[x, -x])
    }

    /// `H̄^τ = U(2 − t_A − t_B)|1⟩⟨1|`.
    pub fn h_bar_tau(&self) -> CMatrix {
        diag_real(&[0.0, self.u * (2.0 - self.t_a - self.t_b)])
    }
}

/// Computational-basis projector `|k⟩⟨k|` on a qubit.
pub fn qubit_projector(k: usize) -> CMatrix {
    let v = ndarray::Array1::from_shape_fn(2, |i| if i == k { c(1.0, 0.0) } else { ZERO });
    outer(&v, &v)
}
