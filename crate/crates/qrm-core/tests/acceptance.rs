//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines land in the test log. The
//! process fails when a criterion outside `KNOWN_FAILURES` fails, or when a
//! known failure starts passing (so the list cannot go stale).

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, SVD, UPLO};
use num_complex::Complex64 as C;
use qrm_core::examples::{qubit_projector, QubitNQubitParams, ThreeQubitParams};
use qrm_core::linalg::HilbertDims;
use qrm_core::markov::rate_matrix_from_phi;
use qrm_core::model::{
    build_dissipator, build_kraus_dissipator, random_model, KrausSide, QrmModel, RandomModelOptions,
};
use qrm_core::perturbation::{coup_from_generator, Machinery};
use qrm_core::random::{random_density, rng_from_seed, uniform, QrmRng};
use qrm_core::uncoupled::{eigentable_max_residual, uncoupled_eigentable};
use qrm_core::dynamics::{error_scaling_sweep, reach_time};
use std::time::Instant;

/// Criterion 10: the quadratic bound on the real parts fails for generic
/// couplings. A coupling close to `I_A⊗h_C⊗I_B` keeps Coup but has
/// `Re λ_jk(g) = O(ε²g²)` against a bound of order `g²(e_j − e_k)²`.
///
/// Criterion 12: the single-witness test is sufficient for rank `n − 1` but
/// not necessary; an irreducible cycle has rank `n − 1` and no witness. The
/// closed-class count is the exact criterion and is checked alongside.
const KNOWN_FAILURES: &[usize] = &[10, 12];

type M = Array2<C>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

mod oracle {
    //! Definitions re-derived directly, independent of the library routines.
    use super::*;

    pub fn cz(x: f64) -> C {
        C::new(x, 0.0)
    }

    pub fn kron(a: &M, b: &M) -> M {
        let (ar, ac) = a.dim();
        let (br, bc) = b.dim();
        Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
    }

    pub fn kron3(a: &M, b: &M, c: &M) -> M {
        kron(&kron(a, b), c)
    }

    pub fn eye(n: usize) -> M {
        Array2::from_shape_fn((n, n), |(i, j)| if i == j { cz(1.0) } else { cz(0.0) })
    }

    pub fn dag(a: &M) -> M {
        a.t().mapv(|z| z.conj())
    }

    pub fn max_abs(a: &M) -> f64 {
        a.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn fro(a: &M) -> f64 {
        a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(a: &M) -> C {
        a.diag().sum()
    }

    fn at(d: HilbertDims, a: usize, c: usize, b: usize) -> usize {
        (a * d.n_c + c) * d.n_b + b
    }

    pub fn tr_a(r: &M, d: HilbertDims) -> M {
        Array2::from_shape_fn((d.n_c * d.n_b, d.n_c * d.n_b), |(i, j)| {
            let (c1, b1, c2, b2) = (i / d.n_b, i % d.n_b, j / d.n_b, j % d.n_b);
            (0..d.n_a).map(|a| r[[at(d, a, c1, b1), at(d, a, c2, b2)]]).sum()
        })
    }

    pub fn tr_b(r: &M, d: HilbertDims) -> M {
        Array2::from_shape_fn((d.n_a * d.n_c, d.n_a * d.n_c), |(i, j)| {
            let (a1, c1, a2, c2) = (i / d.n_c, i % d.n_c, j / d.n_c, j % d.n_c);
            (0..d.n_b).map(|b| r[[at(d, a1, c1, b), at(d, a2, c2, b)]]).sum()
        })
    }

    pub fn tr_ab(r: &M, d: HilbertDims) -> M {
        Array2::from_shape_fn((d.n_c, d.n_c), |(c1, c2)| {
            let mut s = cz(0.0);
            for a in 0..d.n_a {
                for b in 0..d.n_b {
                    s += r[[at(d, a, c1, b), at(d, a, c2, b)]];
                }
            }
            s
        })
    }

    /// `γ_A(τ_A⊗tr_A ρ − ρ) + γ_B(tr_B ρ⊗τ_B − ρ)`.
    pub fn dissipator(m: &QrmModel, r: &M) -> M {
        let d = m.dims;
        let (ga, gb) = (m.reset_a.gamma, m.reset_b.gamma);
        (kron(&m.reset_a.tau, &tr_a(r, d)) - r).mapv(|z| z * ga) + (kron(&tr_b(r, d), &m.reset_b.tau) - r).mapv(|z| z * gb)
    }

    pub fn comm(h: &M, x: &M) -> M {
        h.dot(x) - x.dot(h)
    }

    /// Column-stacking: `vec(X)[i + n j] = X[i, j]`.
    pub fn vec(x: &M) -> Array1<C> {
        let n = x.nrows();
        Array1::from_shape_fn(n * n, |k| x[[k % n, k / n]])
    }

    pub fn unvec(v: &Array1<C>, n: usize) -> M {
        Array2::from_shape_fn((n, n), |(i, j)| v[i + n * j])
    }

    pub fn superop(n: usize, f: impl Fn(&M) -> M) -> M {
        let mut out = Array2::zeros((n * n, n * n));
        for col in 0..n * n {
            let mut e = Array2::zeros((n, n));
            e[[col % n, col / n]] = cz(1.0);
            out.column_mut(col).assign(&vec(&f(&e)));
        }
        out
    }

    pub fn h0(m: &QrmModel) -> M {
        let d = m.dims;
        kron3(&m.h_a, &eye(d.n_c), &eye(d.n_b)) + kron3(&eye(d.n_a), &m.h_c, &eye(d.n_b)) + kron3(&eye(d.n_a), &eye(d.n_c), &m.h_b)
    }

    pub fn l0(m: &QrmModel) -> M {
        let h = h0(m);
        superop(m.dims.total(), |x| comm(&h, x).mapv(|z| z * C::new(0.0, -1.0)) + dissipator(m, x))
    }

    pub fn l1(m: &QrmModel) -> M {
        let h = m.h_coupling.clone();
        superop(m.dims.total(), |x| comm(&h, x).mapv(|z| z * C::new(0.0, -1.0)))
    }

    pub fn lg(m: &QrmModel, g: f64) -> M {
        l0(m) + l1(m).mapv(|z| z * g)
    }

    /// Hermitian eigenpairs, ascending; the residual guards against layout mistakes.
    pub fn herm_eig(h: &M) -> (Vec<f64>, M) {
        let (e, v) = h.eigh(UPLO::Upper).expect("eigh");
        let mut v = v;
        let resid = |v: &M| fro(&(h.dot(v) - v.dot(&Array2::from_diag(&e.mapv(cz)))));
        if resid(&v) > 1e-10 * (1.0 + fro(h)) {
            v = v.mapv(|z| z.conj());
        }
        assert!(resid(&v) <= 1e-10 * (1.0 + fro(h)), "eigh residual");
        (e.to_vec(), v)
    }

    /// Right singular vectors with singular value at most `tol`.
    pub fn null_space(a: &M, tol: f64) -> Vec<Array1<C>> {
        let (_, sv, vt) = a.svd(false, true).expect("svd");
        let vt = vt.unwrap();
        let n = a.ncols();
        (0..n)
            .filter(|&k| if k < sv.len() { sv[k] <= tol } else { true })
            .map(|k| vt.row(k).mapv(|z| z.conj()))
            .collect()
    }

    pub fn singular_values(a: &M) -> Vec<f64> {
        a.svd(false, false).expect("svd").1.to_vec()
    }

    pub fn normalise(r: M) -> M {
        let t = trace(&r);
        r.mapv(|z| z / t)
    }

    /// Kernel of `L_g` by SVD; returns the state and the kernel dimension.
    pub fn steady_svd(m: &QrmModel, g: f64, tol: f64) -> (M, usize) {
        let ns = null_space(&lg(m, g), tol);
        let n = m.dims.total();
        (normalise(unvec(&ns[0], n)), ns.len())
    }

    fn cols(vs: &[Array1<C>]) -> M {
        let mut w = Array2::zeros((vs[0].len(), vs.len()));
        for (k, v) in vs.iter().enumerate() {
            w.column_mut(k).assign(v);
        }
        w
    }

    fn pick(a: &M, rows: &[usize], cs: &[usize]) -> M {
        Array2::from_shape_fn((rows.len(), cs.len()), |(i, j)| a[[rows[i], cs[j]]])
    }

    fn smallest_right_singular(a: &M) -> Array1<C> {
        let (_, sv, vt) = a.svd(false, true).expect("svd");
        let vt = vt.unwrap();
        let k = sv.len() - 1;
        assert!(sv[k] < 1e-8 * sv[0].max(1e-300) || sv.len() == 1, "reduced kernel not isolated: {sv:?}");
        vt.row(vt.nrows() - 1).mapv(|z| z.conj())
    }

    /// Kernel of `L_g` by an exact Schur-complement reduction onto `ran Q₀`.
    ///
    /// With `ρ = W a + V b` (`W` spanning `ran Q₀`, `V` spanning `ran(I − Q₀)`),
    /// `L_g ρ = 0` is equivalent to `b = −g A⁻¹ V†(I−Q₀)L₁W a` and `K(g) a = 0`,
    /// where `A = V†L₀V + gV†(I−Q₀)L₁V`. For `H_C = 0` the off-diagonal block of
    /// `K` (in the eigenbasis of `H̄^τ`) is eliminated once more, leaving an
    /// `O(1)` system on the diagonal whose kernel is well conditioned for small `g`.
    pub fn steady_schur(m: &QrmModel, g: f64) -> M {
        let d = m.dims;
        let n = d.total();
        let nn = n * n;
        let (ta, tb) = (&m.reset_a.tau, &m.reset_b.tau);
        let hc_zero = max_abs(&m.h_c) < 1e-14;
        let mut vs = Vec::new();
        let mut diag = Vec::new();
        let proj: Box<dyn Fn(&M) -> M>;
        let nrm = (fro(ta) * fro(tb)).recip();
        if hc_zero {
            let hbar = tr_ab(&m.h_coupling.dot(&kron3(ta, &eye(d.n_c), tb)), d);
            let (_, phi) = herm_eig(&hbar);
            for k in 0..d.n_c {
                for j in 0..d.n_c {
                    let e = kron(&phi.column(j).to_owned().insert_axis(ndarray::Axis(1)), &dag(&phi.column(k).to_owned().insert_axis(ndarray::Axis(1))));
                    vs.push(vec(&kron3(ta, &e, tb)).mapv(|z| z * nrm));
                    diag.push(j == k);
                }
            }
            let (ta, tb) = (ta.clone(), tb.clone());
            proj = Box::new(move |x: &M| kron3(&ta, &tr_ab(x, d), &tb));
        } else {
            let (_, psi) = herm_eig(&m.h_c);
            let ps: Vec<M> = (0..d.n_c)
                .map(|j| {
                    let v = psi.column(j).to_owned().insert_axis(ndarray::Axis(1));
                    v.dot(&dag(&v))
                })
                .collect();
            for p in &ps {
                vs.push(vec(&kron3(ta, p, tb)).mapv(|z| z * nrm));
                diag.push(true);
            }
            let (ta, tb) = (ta.clone(), tb.clone());
            proj = Box::new(move |x: &M| {
                let r = tr_ab(x, d);
                let dg = ps.iter().fold(Array2::zeros((d.n_c, d.n_c)), |acc: M, p| acc + p.dot(&r).dot(p));
                kron3(&ta, &dg, &tb)
            });
        }
        let w = cols(&vs);
        let nw = w.ncols();
        let p = superop(n, |x| proj(x));
        let q = eye(nn) - &p;
        let (u, sv, _) = q.svd(true, false).expect("svd");
        let u = u.unwrap();
        assert!(sv[nn - nw - 1] > 0.5 && sv[nn - nw] < 1e-10, "I - Q0 rank");
        let v = u.slice(s![.., ..nn - nw]).to_owned();
        let (wh, vh) = (dag(&w), dag(&v));
        let (l0, l1) = (l0(m), l1(m));
        let ql1 = q.dot(&l1);
        let pl1 = p.dot(&l1);
        let a = vh.dot(&l0).dot(&v) + vh.dot(&ql1).dot(&v).mapv(|z| z * g);
        let a_inv = a.inv().expect("A invertible");
        let coupling_back = vh.dot(&ql1).dot(&w);
        let k = wh.dot(&pl1).dot(&w) - wh.dot(&pl1).dot(&v).dot(&a_inv).dot(&coupling_back).mapv(|z| z * g);
        let coeff = if hc_zero {
            let di: Vec<usize> = (0..nw).filter(|&i| diag[i]).collect();
            let oi: Vec<usize> = (0..nw).filter(|&i| !diag[i]).collect();
            let koo_inv = pick(&k, &oi, &oi).inv().expect("K_oo invertible");
            let kod = pick(&k, &oi, &di);
            let red = (pick(&k, &di, &di) - pick(&k, &di, &oi).dot(&koo_inv).dot(&kod)).mapv(|z| z / g);
            let ad = smallest_right_singular(&red);
            let ao = -koo_inv.dot(&kod).dot(&ad);
            let mut full = Array1::zeros(nw);
            for (x, &i) in ad.iter().zip(&di) {
                full[i] = *x;
            }
            for (x, &i) in ao.iter().zip(&oi) {
                full[i] = *x;
            }
            full
        } else {
            smallest_right_singular(&k.mapv(|z| z / g))
        };
        let b = -a_inv.dot(&coupling_back).dot(&coeff).mapv(|z| z * g);
        normalise(unvec(&(w.dot(&coeff) + v.dot(&b)), n))
    }

    pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    }

    /// `e^{sG}` for a generator with zero column sums, by uniformisation.
    pub fn uniformised_exp(gen: &Array2<f64>, s: f64) -> Array2<f64> {
        let n = gen.nrows();
        let lam = (0..n).map(|i| -gen[[i, i]]).fold(0.0, f64::max).max(1e-300);
        let step = Array2::<f64>::eye(n) + gen.mapv(|x| x / lam);
        let mu = lam * s;
        let mut term = Array2::<f64>::eye(n);
        let mut out = Array2::<f64>::zeros((n, n));
        let mut log_w = -mu;
        let kmax = (mu + 12.0 * mu.sqrt() + 60.0) as usize;
        for k in 0..=kmax {
            if k > 0 {
                term = step.dot(&term);
                log_w += mu.ln() - (k as f64).ln();
            }
            out = out + term.mapv(|x| x * log_w.exp());
        }
        out
    }
}

use oracle::*;

fn rng_model(rng: &mut QrmRng, dims: (usize, usize, usize), opts: RandomModelOptions) -> QrmModel {
    random_model(rng, HilbertDims::new(dims.0, dims.1, dims.2).unwrap(), opts)
}

fn undriven() -> RandomModelOptions {
    RandomModelOptions::default()
}

fn driven() -> RandomModelOptions {
    RandomModelOptions { drive_a: true, drive_b: true, drive_c: true, ..Default::default() }
}

fn c1_dissipator_spectrum() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from_seed(101);
    let dims_pool = [(2, 2, 2), (3, 2, 2), (2, 3, 2), (2, 2, 3), (3, 3, 2), (2, 4, 2), (3, 2, 3), (2, 1, 3), (3, 4, 3)];
    let mut worst: f64 = 0.0;
    let mut mult_ok = true;
    let mut lib_dev: f64 = 0.0;
    for i in 0..20 {
        let dims = dims_pool[if i == 19 { 8 } else { i % 8 }];
        let opts = if i % 2 == 0 { driven() } else { undriven() };
        let m = rng_model(&mut rng, dims, opts);
        let n = m.dims.total();
        let d = superop(n, |x| dissipator(&m, x));
        lib_dev = lib_dev.max(max_abs(&(&d - &build_dissipator(&m).matrix)));
        let (ev, _) = d.eig().expect("eig");
        let (ga, gb) = (m.reset_a.gamma, m.reset_b.gamma);
        let (na2, nc2, nb2) = (m.dims.n_a.pow(2), m.dims.n_c.pow(2), m.dims.n_b.pow(2));
        let expect = [(0.0, nc2), (-ga, (na2 - 1) * nc2), (-gb, (nb2 - 1) * nc2), (-ga - gb, (na2 - 1) * (nb2 - 1) * nc2)];
        for z in ev.iter() {
            let dist = expect.iter().map(|(l, _)| (z - cz(*l)).norm()).fold(f64::INFINITY, f64::min);
            worst = worst.max(dist);
        }
        for (l, mult) in expect {
            let cnt = ev.iter().filter(|z| (*z - cz(l)).norm() <= 1e-8).count();
            mult_ok &= cnt == mult;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && mult_ok && lib_dev <= 1e-14 && secs < 10.0,
        format!("20 models up to (3,4,3): max eigenvalue error {worst:.1e}, multiplicities ok {mult_ok}, library vs definition {lib_dev:.1e}, {secs:.1}s"),
    )
}

fn c2_kraus() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let dims = HilbertDims::new(2 + i % 2, 1 + i % 3, 2 + (i / 2) % 2).unwrap();
        let ta = random_density(&mut rng, dims.n_a);
        let tb = random_density(&mut rng, dims.n_b);
        let m = random_model(&mut rng, dims, undriven());
        let m = QrmModel::new(
            dims,
            qrm_core::model::ResetSpec::new(ta, m.reset_a.gamma).unwrap(),
            qrm_core::model::ResetSpec::new(tb, m.reset_b.gamma).unwrap(),
            m.h_a.clone(),
            m.h_b.clone(),
            m.h_c.clone(),
            m.h_coupling.clone(),
            0.0,
        )
        .unwrap();
        let ka = build_kraus_dissipator(&m.reset_a.tau, dims, KrausSide::A).unwrap().superop.matrix;
        let kb = build_kraus_dissipator(&m.reset_b.tau, dims, KrausSide::B).unwrap().superop.matrix;
        let kraus = ka.mapv(|z| z * m.reset_a.gamma) + kb.mapv(|z| z * m.reset_b.gamma);
        let direct = superop(dims.total(), |x| dissipator(&m, x));
        worst = worst.max(max_abs(&(kraus - direct)));
    }
    outcome(worst <= 1e-12, format!("20 random reset states: max entrywise deviation {worst:.1e}"))
}

fn c3_eigentable() -> Outcome {
    let mut rng = rng_from_seed(303);
    let mut worst_res: f64 = 0.0;
    let mut own_res: f64 = 0.0;
    let mut complete = true;
    let mut min_sv = f64::INFINITY;
    for dims in [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 2, 3)] {
        for _ in 0..2 {
            let m = rng_model(&mut rng, dims, driven());
            let table = uncoupled_eigentable(&m).unwrap();
            worst_res = worst_res.max(eigentable_max_residual(&m, &table));
            let l0m = l0(&m);
            let n = m.dims.total();
            let mut basis = Array2::zeros((n * n, table.len()));
            for (k, e) in table.iter().enumerate() {
                let v = vec(&e.eigenvector);
                let r = l0m.dot(&v) - v.mapv(|z| z * e.eigenvalue);
                let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                own_res = own_res.max(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / nv);
                basis.column_mut(k).assign(&v.mapv(|z| z / nv));
            }
            complete &= table.len() == n * n;
            let sv = singular_values(&basis);
            min_sv = min_sv.min(*sv.last().unwrap());
        }
    }
    complete &= min_sv > 1e-8;
    outcome(
        worst_res <= 1e-10 && own_res <= 1e-10 && complete,
        format!("8 driven models: residual {own_res:.1e} (library {worst_res:.1e}), complete {complete}, min singular value {min_sv:.1e}"),
    )
}

fn c4_unique_steady_state() -> Outcome {
    let mut rng = rng_from_seed(404);
    let mut models = vec![("three-qubit".to_string(), ThreeQubitParams::default().build().unwrap())];
    let mut skipped = 0;
    while models.len() < 11 {
        let opts = if models.len() % 2 == 0 { driven() } else { undriven() };
        let m = rng_model(&mut rng, (2, 2, 2), opts);
        let coup = Machinery::new(&m).map(|mach| mach.coup.holds).unwrap_or(false);
        if coup {
            models.push((format!("random{}", models.len()), m));
        } else {
            skipped += 1;
        }
    }
    let mut bad = Vec::new();
    for (name, m) in &models {
        for g in [1e-1, 1e-2, 1e-3] {
            let dim = null_space(&lg(m, g), 1e-9).len();
            if dim != 1 {
                bad.push(format!("{name}@{g}:{dim}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("three-qubit + 10 random models passing Coup ({skipped} skipped), g in {{1e-1,1e-2,1e-3}}: kernel dims != 1: {bad:?}"),
    )
}

fn c5_series_order() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_from_seed(505);
    let gs: Vec<f64> = [-1.0, -1.5, -2.0, -2.5].iter().map(|e: &f64| 10f64.powf(*e)).collect();
    let lg_: Vec<f64> = gs.iter().map(|g| g.log10()).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    let cases = [
        ("H_C=0", rng_model(&mut rng, (2, 2, 2), undriven())),
        ("H_C=0", ThreeQubitParams::default().build().unwrap()),
        ("H_C!=0", rng_model(&mut rng, (2, 2, 2), driven())),
        ("H_C!=0", ThreeQubitParams::default().build_driven().unwrap()),
    ];
    let mut oracle_check: f64 = 0.0;
    for (label, m) in &cases {
        let mach = Machinery::new(m).unwrap();
        let series = mach.steady_state_series(3).unwrap();
        let exact: Vec<M> = gs.iter().map(|&g| steady_schur(m, g)).collect();
        // the reduction agrees with a plain SVD kernel where the latter is well conditioned
        let (svd, _) = steady_svd(m, 0.1, 1e-9);
        oracle_check = oracle_check.max(max_abs(&(&svd - &exact[0])));
        let mut slopes = Vec::new();
        for k in 0..=3 {
            let errs: Vec<f64> = gs.iter().zip(&exact).map(|(&g, e)| fro(&(series.partial_sum(g, k) - e)).log10()).collect();
            let (slope, _) = line_fit(&lg_, &errs);
            ok &= (slope - (k as f64 + 1.0)).abs() <= 0.2;
            slopes.push(format!("{slope:.2}"));
        }
        lines.push(format!("{label} slopes K=0..3 [{}]", slopes.join(",")));
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= oracle_check < 1e-8 && secs < 60.0;
    outcome(ok, format!("{}; reduction vs SVD at g=0.1 {oracle_check:.1e}; {secs:.1}s", lines.join("; ")))
}

fn c6_resolvent() -> Outcome {
    let mut rng = rng_from_seed(606);
    let mut cases = vec![ThreeQubitParams::default().build().unwrap()];
    for i in 0..4 {
        cases.push(rng_model(&mut rng, (2, 2 + i % 2, 2), if i % 2 == 0 { undriven() } else { driven() }));
    }
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for m in &cases {
        let mach = Machinery::new(m).unwrap();
        let g0 = mach.radius_estimate(&mach.series_map().unwrap()).unwrap();
        let g = 0.5 * g0;
        let r = mach.resolvent_steady_state(g).unwrap();
        let (exact, dim) = steady_svd(m, g, 1e-9);
        let d = max_abs(&(normalise(r.rho.clone()) - exact));
        worst = worst.max(d);
        notes.push(format!("g0={g0:.2e}/dim {dim}"));
    }
    outcome(worst <= 1e-8, format!("5 models at g0/2: max deviation {worst:.1e} [{}]", notes.join(" ")))
}

fn random_three_qubit(rng: &mut QrmRng) -> ThreeQubitParams {
    let sign = |rng: &mut QrmRng| if uniform(rng, 0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
    ThreeQubitParams {
        e_a: uniform(rng, 0.5, 2.0),
        e_b: uniform(rng, 0.5, 2.0),
        e_c: uniform(rng, 0.5, 2.0),
        u: sign(rng) * uniform(rng, 0.2, 1.5),
        j_alpha: sign(rng) * uniform(rng, 0.2, 1.5),
        j_beta: sign(rng) * uniform(rng, 0.2, 1.5),
        t_a: uniform(rng, 0.05, 0.95),
        t_b: uniform(rng, 0.05, 0.95),
        gamma_a: uniform(rng, 0.5, 2.0),
        gamma_b: uniform(rng, 0.5, 2.0),
    }
}

fn c7_three_qubit() -> Outcome {
    let mut rng = rng_from_seed(707);
    let mut worst: f64 = 0.0;
    let mut what = "";
    let bump = |x: f64, w: &'static str, worst: &mut f64, what: &mut &'static str| {
        if x > *worst {
            *worst = x;
            *what = w;
        }
    };
    for _ in 0..10 {
        let p = random_three_qubit(&mut rng);
        let cf = p.closed_forms();
        let mach = Machinery::new(&p.build().unwrap()).unwrap();
        let s = mach.steady_state_series(2).unwrap();
        bump(max_abs(&(mach.rho_c0().unwrap() - &cf.rho_c0)), "rho_C0", &mut worst, &mut what);
        bump(max_abs(&(&s.pieces[1] - &cf.r1)), "R1", &mut worst, &mut what);
        bump(max_abs(&s.r_c[1]), "r_C1", &mut worst, &mut what);
        bump(max_abs(&(&s.pieces[2] - &cf.r2)), "R2", &mut worst, &mut what);
        bump((s.r_c[2][[0, 0]].re - cf.x2).abs().max((s.r_c[2][[1, 1]].re + cf.x2).abs()), "X2", &mut worst, &mut what);
        bump(s.r_c[2][[0, 1]].norm().max(s.r_c[2][[1, 0]].norm()), "Offdiag r_C2", &mut worst, &mut what);
        let (ev, _) = mach.phi.phi_d.mapv(cz).eig().unwrap();
        let mut ev: Vec<f64> = ev.iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let mut want = cf.phi_d_spectrum.to_vec();
        want.sort_by(f64::total_cmp);
        bump((ev[0] - want[0]).abs().max((ev[1] - want[1]).abs()), "spectrum Phi_D", &mut worst, &mut what);
        let gg = p.gamma_a * p.gamma_b / 2.0;
        let phi_minus = gg * mach.phi.phi.apply(&qubit_projector(0))[[1, 1]].re;
        let phi_plus = gg * mach.phi.phi.apply(&qubit_projector(1))[[0, 0]].re;
        bump((phi_plus - cf.phi_plus).abs().max((phi_minus - cf.phi_minus).abs()), "phi+-", &mut worst, &mut what);
        let rm = rate_matrix_from_phi(&mach.phi).unwrap();
        let i0 = if mach.basis.vectors[[0, 0]].norm() > 0.5 { 0 } else { 1 };
        let idx = [i0, 1 - i0];
        for sv in [0.0, 0.1, 0.5, 2.0, 10.0] {
            let pm = rm.transition_probabilities(sv).unwrap().p;
            let pc = p.transition_probabilities(sv);
            for a in 0..2 {
                for b in 0..2 {
                    bump((pm[[idx[a], idx[b]]] - pc[a][b]).abs(), "transition", &mut worst, &mut what);
                }
            }
        }
    }
    // equilibrium draw
    let mut p = random_three_qubit(&mut rng);
    p.t_b = p.t_a;
    let m = p.build().unwrap();
    let tau = p.tau_a();
    let ttt = kron3(&tau, &tau, &tau);
    let mut eq: f64 = 0.0;
    for g in [0.05, 0.2] {
        eq = eq.max(max_abs(&(steady_schur(&m, g) - &ttt)));
    }
    let s = Machinery::new(&m).unwrap().steady_state_series(3).unwrap();
    eq = eq.max(max_abs(&(&s.coefficients[0] - &ttt)));
    for k in 1..=3 {
        eq = eq.max(max_abs(&s.coefficients[k]));
    }
    let cf = p.closed_forms();
    eq = eq.max(max_abs(&cf.r1)).max(max_abs(&cf.r2)).max(cf.x2.abs());
    // reference value of the second-order population shift
    let reference = ThreeQubitParams { u: 0.9, j_alpha: 0.5, j_beta: 1.1, t_a: 0.8, t_b: 0.6, gamma_a: 0.7, gamma_b: 1.3, ..Default::default() };
    let x2_ref = (reference.closed_forms().x2 - -0.0391886560916631).abs();
    outcome(
        worst <= 1e-9 && eq <= 1e-12 && x2_ref < 1e-14,
        format!("10 draws: max deviation {worst:.1e} (largest in {what}); equilibrium draw deviation {eq:.1e}; X2 reference {x2_ref:.1e}"),
    )
}

fn random_chain(rng: &mut QrmRng, n: usize) -> QubitNQubitParams {
    let amp = |rng: &mut QrmRng| {
        let r = uniform(rng, 0.3, 1.2);
        let th = uniform(rng, 0.0, std::f64::consts::TAU);
        (r * th.cos(), r * th.sin())
    };
    let energies = |rng: &mut QrmRng| (0..n).map(|j| j as f64 + uniform(rng, -0.2, 0.2)).collect::<Vec<_>>();
    QubitNQubitParams {
        n,
        a_g: energies(rng),
        a_e: energies(rng),
        b_down: energies(rng),
        b_up: energies(rng),
        alpha: (0..n).map(|_| amp(rng)).collect(),
        beta: (0..n).map(|_| amp(rng)).collect(),
        t_a: uniform(rng, 0.1, 0.9),
        t_b: uniform(rng, 0.1, 0.9),
        gamma_a: uniform(rng, 0.5, 2.0),
        gamma_b: uniform(rng, 0.5, 2.0),
    }
}

fn c8_chain_kernel() -> Outcome {
    let mut rng = rng_from_seed(808);
    let mut resid: f64 = 0.0;
    let mut forms: f64 = 0.0;
    let mut hyp = true;
    for n in [2, 3, 5, 8] {
        let p = random_chain(&mut rng, n);
        hyp &= p.coupling_hypothesis();
        let mach = Machinery::new(&p.build().unwrap()).unwrap();
        let scale = mach.phi.phi_d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rec = p.kernel_recursive().unwrap();
        let exp = p.kernel_explicit().unwrap();
        let vecs = &mach.basis.vectors;
        for x in [&rec, &exp] {
            // populations in the eigenbasis used for Φ_D
            let xb = Array1::from_shape_fn(n, |j| (0..n).map(|c| vecs[[c, j]].norm_sqr() * x[c]).sum::<f64>());
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = mach.phi.phi_d.dot(&xb);
            resid = resid.max(r.iter().map(|v| v * v).sum::<f64>().sqrt() / (scale * xn));
        }
        for (a, b) in rec.iter().zip(&exp) {
            forms = forms.max((a - b).abs() / a.abs());
        }
    }
    // balance condition: choose |α_N|² to satisfy it
    let mut p = random_chain(&mut rng, 5);
    p.t_a = uniform(&mut rng, 0.55, 0.9);
    p.t_b = uniform(&mut rng, 0.55, 0.9);
    let b1 = p.beta[0].0.powi(2) + p.beta[0].1.powi(2);
    let an2 = (2.0 * p.t_a - 1.0) * p.t_b * p.gamma_a * b1 / (1.0 - p.t_a) * (1.0 - p.t_b) / ((2.0 * p.t_b - 1.0) * p.t_a * p.gamma_b);
    p.alpha[4] = (an2.sqrt(), 0.0);
    let x = p.kernel_recursive().unwrap();
    let spread = x[1..4].iter().map(|v| (v - x[1]).abs() / x[1]).fold(0.0, f64::max);
    outcome(
        resid <= 1e-10 && forms <= 1e-12 && spread <= 1e-12 && hyp,
        format!("N in {{2,3,5,8}}: relative Phi_D residual {resid:.1e}, recursive vs explicit {forms:.1e}; balanced interior spread {spread:.1e}"),
    )
}

fn c9_markov() -> Outcome {
    let mut rng = rng_from_seed(909);
    let mut models = vec![ThreeQubitParams::default().build().unwrap(), random_chain(&mut rng, 4).build().unwrap()];
    for _ in 0..4 {
        models.push(rng_model(&mut rng, (2, 3, 2), undriven()));
    }
    let (mut rows, mut neg, mut vs_oracle, mut stat): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for m in &models {
        let mach = Machinery::new(m).unwrap();
        let rm = rate_matrix_from_phi(&mach.phi).unwrap();
        for s in [0.01, 0.1, 1.0, 10.0] {
            let raw = uniformised_exp(&mach.phi.phi_d, s).t().to_owned();
            for r in raw.rows() {
                rows = rows.max((r.sum() - 1.0).abs());
            }
            let k = rm.transition_probabilities(s).unwrap();
            neg = neg.max(-k.raw_min);
            vs_oracle = vs_oracle.max((&k.p - &raw).iter().fold(0.0, |a, x| a.max(x.abs())));
        }
        let pi = rm.stationary_distribution().unwrap();
        let rc = mach.basis.to_basis(&mach.rho_c0().unwrap());
        let ns = null_space(&mach.phi.phi_d.mapv(cz), 1e-10 * mach.phi.phi_d.iter().fold(0.0f64, |a, x| a.max(x.abs())));
        let sum: C = ns[0].sum();
        for (j, p) in pi.iter().enumerate() {
            stat = stat.max((rc[[j, j]].re - p).abs()).max((ns[0][j] / sum).re - p);
        }
    }
    outcome(
        rows <= 1e-10 && neg <= 1e-12 && vs_oracle <= 1e-10 && stat <= 1e-10,
        format!("6 models, s in {{0.01,0.1,1,10}}: row sums {rows:.1e}, most negative raw entry {neg:.1e}, vs uniformisation {vs_oracle:.1e}, stationary vs diag rho_C0 {stat:.1e}"),
    )
}

/// Fitted `lim Re λ_jk(g)/g²` for every ordered pair `j ≠ k`, from eigenvalues
/// of `L_g` matched to the Bohr frequency `−g(e_j − e_k)`. Returns
/// `(e_j − e_k, limit, bound constant)` and the number of ambiguous matches.
fn fitted_second_order(m: &QrmModel, gs: &[f64]) -> (Vec<(f64, f64, f64)>, usize) {
    let d = m.dims;
    let hbar = tr_ab(&m.h_coupling.dot(&kron3(&m.reset_a.tau, &eye(d.n_c), &m.reset_b.tau)), d);
    let (e, _) = herm_eig(&hbar);
    let (ga, gb) = (m.reset_a.gamma, m.reset_b.gamma);
    let c = (ga * ga + ga * gb + gb * gb) / (ga * gb * (ga + gb));
    let mut per_g: Vec<Vec<C>> = Vec::new();
    for &g in gs {
        let (ev, _) = lg(m, g).eig().unwrap();
        let mut ev = ev.to_vec();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re));
        per_g.push(ev[..d.n_c * d.n_c].to_vec());
    }
    let mut out = Vec::new();
    let mut ambiguous = 0;
    for j in 0..d.n_c {
        for k in 0..d.n_c {
            if j == k {
                continue;
            }
            let de = e[j] - e[k];
            let mut ys = Vec::new();
            for (gi, &g) in gs.iter().enumerate() {
                let target = -g * de;
                let mut by_dist: Vec<&C> = per_g[gi].iter().collect();
                by_dist.sort_by(|a, b| (a.im - target).abs().total_cmp(&(b.im - target).abs()));
                if (by_dist[1].im - target).abs() < 4.0 * (by_dist[0].im - target).abs() + 1e-12 {
                    ambiguous += 1;
                }
                ys.push(by_dist[0].re / (g * g));
            }
            let (_, limit) = line_fit(gs, &ys);
            out.push((de, limit, c));
        }
    }
    (out, ambiguous)
}

fn c10_eigenvalue_bound() -> Outcome {
    let mut rng = rng_from_seed(1010);
    let gs = [0.02, 0.01, 0.005];
    let mut excess = f64::NEG_INFINITY;
    let mut violating = 0;
    let mut vs_lib: f64 = 0.0;
    let mut ambiguous = 0;
    for _ in 0..10 {
        let m = rng_model(&mut rng, (2, 3, 2), undriven());
        let lib = Machinery::new(&m).unwrap().second_order_eigenvalues().unwrap();
        let (pairs, amb) = fitted_second_order(&m, &gs);
        ambiguous += amb;
        let mut bad = false;
        for (de, limit, c) in pairs {
            excess = excess.max(limit + c * de * de);
            bad |= limit + c * de * de > 1e-3;
            let l = lib.iter().find(|x| (x.first_order.im + de).abs() < 1e-9).expect("matching library pair");
            vs_lib = vs_lib.max((l.lambda2.re - limit).abs());
        }
        violating += bad as usize;
    }
    // A coupling close to a pure C Hamiltonian: τ_A⊗P_jk⊗τ_B is almost an exact
    // eigenvector, so Re λ_jk(g) = O(ε²g²) while the bound stays O(g²).
    let base = rng_model(&mut rng, (2, 3, 2), undriven());
    let h_c = Array2::from_diag(&Array1::from(vec![cz(0.0), cz(1.0), cz(2.5)]));
    let eps = 0.05;
    let near_local = base.with_coupling(kron3(&eye(2), &h_c, &eye(2)) + base.h_coupling.mapv(|z| z * eps)).unwrap();
    let coup = Machinery::new(&near_local).unwrap().coup.holds;
    let (pairs, _) = fitted_second_order(&near_local, &gs);
    let (de, limit, c) = pairs.iter().cloned().max_by(|a, b| (a.1 + a.2 * a.0 * a.0).total_cmp(&(b.1 + b.2 * b.0 * b.0))).unwrap();
    outcome(
        excess <= 1e-3 && ambiguous == 0,
        format!(
            "10 models: max fitted Re(lambda)/g^2 minus bound {excess:.2e} (margin 1e-3), {violating} models violate; fit vs second-order formula {vs_lib:.1e}; ambiguous matches {ambiguous}; near-local coupling (Coup {coup}): Re(lambda)/g^2 {limit:.2e} against bound {:.2e}",
            -c * de * de
        ),
    )
}

fn c11_dynamics() -> Outcome {
    let t = Instant::now();
    let p = ThreeQubitParams::default();
    let model = p.build().unwrap();
    let init = kron3(&p.tau_a(), &qubit_projector(1), &p.tau_b());
    let gs = [0.04, 0.02, 0.01];
    let mut times = Vec::new();
    for &g in &gs {
        let m = model.with_g(g);
        let inf = steady_schur(&m, g);
        let eps = 1e-3 * fro(&(&init - &inf));
        times.push(reach_time(&m, &init, &inf, eps, 400.0 / (g * g)).unwrap());
    }
    let lx: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let ly: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (slope, _) = line_fit(&lx, &ly);
    let sweep = error_scaling_sweep(&model, &init, &gs, (1.0, 5.0), 6).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        (slope + 2.0).abs() <= 0.2 && (sweep.fit.slope - 1.0).abs() <= 0.2 && secs < 120.0,
        format!(
            "reach times {:?}: exponent {slope:.3}; reduced error max {:?} on [1/g^2,5/g^2]: exponent {:.3}; {secs:.1}s",
            times.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>(),
            sweep.max_errors.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>(),
            sweep.fit.slope
        ),
    )
}

fn c12_coup_criterion() -> Outcome {
    let mut rng = rng_from_seed(1212);
    // the reducible example: Φ_D = −h with h = [[1,0,0],[−1,1,−1],[0,−1,1]]
    let example = ndarray::array![[-1.0, 0.0, 0.0], [1.0, -1.0, 1.0], [0.0, 1.0, -1.0]];
    let mut patterns = vec![example.clone()];
    while patterns.len() < 50 {
        let n = 3 + patterns.len() % 3;
        let mut m = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            for k in 0..n {
                if j != k && uniform(&mut rng, 0.0, 1.0) < 0.4 {
                    m[[j, k]] = uniform(&mut rng, 0.1, 1.0);
                }
            }
        }
        for k in 0..n {
            let s: f64 = m.column(k).sum();
            m[[k, k]] = -s;
        }
        patterns.push(m);
    }
    let (mut witness_disagree, mut graph_disagree, mut rank_mismatch) = (0, 0, 0);
    let mut example_ok = false;
    for (i, m) in patterns.iter().enumerate() {
        let n = m.nrows();
        let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let sv = singular_values(&m.mapv(cz));
        let rank = sv.iter().filter(|&&x| x > 1e-10 * scale).count();
        let full = rank == n - 1;
        let witness = (0..n).any(|j| (0..n).all(|k| k == j || m[[j, k]] > 0.0));
        let r = coup_from_generator(m).unwrap();
        rank_mismatch += (r.rank != rank) as usize;
        witness_disagree += (witness != full || r.witness_test() != witness) as usize;
        graph_disagree += (r.graph_test() != full) as usize;
        if i == 0 {
            let kv = r.kernel_vector.clone().unwrap_or_default();
            example_ok = full && witness && kv.len() == 3 && kv[0].abs() < 1e-14 && (kv[1] - 0.5).abs() < 1e-14 && (kv[2] - 0.5).abs() < 1e-14;
        }
    }
    outcome(
        witness_disagree == 0 && rank_mismatch == 0 && example_ok,
        format!(
            "50 sign patterns: single-witness test disagrees with rank on {witness_disagree}, closed-class test on {graph_disagree}, library rank mismatches {rank_mismatch}; reducible example kernel (0,1,1) ok {example_ok}"
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "dissipator spectrum", c1_dissipator_spectrum),
        (2, "Kraus equivalence", c2_kraus),
        (3, "uncoupled eigen-table", c3_eigentable),
        (4, "unique steady state", c4_unique_steady_state),
        (5, "series convergence order", c5_series_order),
        (6, "resolvent form", c6_resolvent),
        (7, "three-qubit closed forms", c7_three_qubit),
        (8, "qubit-N-qubit kernel", c8_chain_kernel),
        (9, "Markov extraction", c9_markov),
        (10, "second-order eigenvalue bound", c10_eigenvalue_bound),
        (11, "dynamics time scale", c11_dynamics),
        (12, "Coup witness criterion", c12_coup_criterion),
    ];
    let mut unexpected = Vec::new();
    for (id, title, f) in criteria {
        let o = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, false) => "PASS",
            (false, true) => "FAIL (known)",
            _ => "FAIL",
        };
        println!("{tag} criterion {id:>2} {title}: {}", o.detail);
        if o.pass == known {
            unexpected.push(if known { format!("{id} passed but is listed as a known failure") } else { format!("{id} failed") });
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria as expected; known failures: {KNOWN_FAILURES:?}");
    } else {
        println!("acceptance: unexpected outcomes: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}

