//! Certificates for the maximal tensor cone.
//!
//! Two routes. When one factor admits a UCP idempotent `Π : M_p → S` onto
//! itself (full algebras, *-subalgebras, or anything the SDP finds), a
//! min-positive `Y` decomposes as a single atom: `P = [Π(E_ab)]` and `Y`
//! read as an element of `M_{np}(T)^+`. Otherwise a fully corrective
//! conditional-gradient search collects atoms `L_P(W)` and refits their
//! weights by nonnegative least squares after every step.

use serde::{Deserialize, Serialize};

use super::atoms::{selector, selector_right, MaxAtom, MaxDecomposition};
use super::lmo::AtomSearch;
use super::TensorSystem;
use crate::conic::{eig_herm, nnls::nnls_gram, CMatrix, C64};
use crate::error::{Error, Result};
use crate::maps::{apply_choi, cp_extension_into, SystemMap};
use crate::system::{LevelElement, MatrixOperatorSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Archimedean shift; `None` means `1e-3·‖X‖_F`.
    pub epsilon: Option<f64>,
    /// Budget in inner cone-LMO iterations.
    pub budget: usize,
    pub seed: u64,
    /// Level of the `P` side of each atom; `None` means the ambient size of `S`.
    pub k_cap: Option<usize>,
    pub restarts: usize,
    /// Success when the residual is at most `tol·(1 + ‖X‖_F)`.
    pub tol: f64,
    /// Try the single-atom idempotent route first.
    pub injective_route: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            budget: 400_000,
            seed: 0,
            k_cap: None,
            restarts: 8,
            tol: 1e-6,
            injective_route: true,
        }
    }
}

impl CertifyOptions {
    pub fn epsilon_for(&self, x: &CMatrix) -> f64 {
        self.epsilon.unwrap_or(1e-3 * x.frobenius_norm())
    }
}

/// Why a search stopped without a decomposition. Not a proof of anything.
#[derive(Debug, Clone)]
pub struct MaxFailure {
    pub budget: usize,
    pub iterations: usize,
    pub residual: f64,
    /// Final residual `R = Y − Σ atoms`; when `stalled`, no atom found has
    /// positive pairing with it.
    pub separator: CMatrix,
    pub stalled: bool,
    pub atoms: usize,
}

#[derive(Debug, Clone)]
pub enum MaxOutcome {
    Certified(MaxDecomposition),
    Fail(MaxFailure),
}

impl MaxOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, MaxOutcome::Certified(_))
    }

    pub fn residual(&self) -> f64 {
        match self {
            MaxOutcome::Certified(d) => d.residual,
            MaxOutcome::Fail(f) => f.residual,
        }
    }
}

/// `[Π(E_ab)]_{ab}` for a UCP idempotent `Π` of `M_p` onto `S`, when one is
/// available.
pub fn idempotent_block(s: &MatrixOperatorSystem) -> Option<CMatrix> {
    let p = s.ambient_dim();
    let units = |f: &dyn Fn(&CMatrix) -> CMatrix| {
        let mut out = CMatrix::zeros(p * p, p * p);
        for a in 0..p {
            for b in 0..p {
                out.set_block(a * p, b * p, &f(&CMatrix::unit(p, a, b)));
            }
        }
        out
    };
    if s.is_full() {
        return Some(units(&|e| e.clone()));
    }
    if s.is_closed_under_products() {
        // trace-preserving projection onto a unital *-subalgebra is a
        // conditional expectation
        return Some(units(&|e| s.project(e).expect("square input")));
    }
    idempotent_by_sdp(s)
}

fn idempotent_by_sdp(s: &MatrixOperatorSystem) -> Option<CMatrix> {
    let p = s.ambient_dim();
    let choi = cp_extension_into(&SystemMap::identity(s)).ok()??;
    let mut block = CMatrix::zeros(p * p, p * p);
    for a in 0..p {
        for b in 0..p {
            let img = apply_choi(p, p, &choi, &CMatrix::unit(p, a, b));
            block.set_block(a * p, b * p, &s.project(&img).ok()?);
        }
    }
    Some(block)
}

fn shifted_target(x: &LevelElement, epsilon: f64) -> CMatrix {
    let xr = x.realize();
    &xr + &CMatrix::identity(xr.rows()).scale(epsilon)
}

/// Exact route for `X = A ⊗ B` with `A ∈ M_n(S)`, `B ∈ T` both positive
/// (after a common sign flip): atoms `(A, B, I_n)` and `(ε·I_n⊗1, 1, I_n)`,
/// merged when `B` is a multiple of the unit.
fn product_route(ts: &TensorSystem, x: &LevelElement, epsilon: f64) -> Result<Option<MaxDecomposition>> {
    let n = x.level();
    let mt = ts.right().dim();
    let rows = x.coeffs().len() / mt;
    let c = |r: usize, b: usize| x.coeffs()[r * mt + b];
    let (mut pr, mut pb, mut best) = (0, 0, 0.0);
    for r in 0..rows {
        for b in 0..mt {
            if c(r, b).norm() > best {
                (pr, pb, best) = (r, b, c(r, b).norm());
            }
        }
    }
    if best == 0.0 {
        return Ok(None);
    }
    // C_rb = A_r B_b with B normalized to B_pb = 1; hermiticity of X then
    // makes both factors hermitian
    let pivot = c(pr, pb);
    let bcoef: Vec<C64> = (0..mt).map(|b| c(pr, b) / pivot).collect();
    let acoef: Vec<C64> = (0..rows).map(|r| c(r, pb)).collect();
    let mut defect = 0.0f64;
    for r in 0..rows {
        for b in 0..mt {
            defect = defect.max((c(r, b) - acoef[r] * bcoef[b]).norm());
        }
    }
    if defect > 1e-12 * best {
        return Ok(None);
    }
    let mut a = LevelElement::new(ts.left(), n, acoef)?;
    let mut b = crate::system::SystemElement::new(ts.right(), bcoef)?.realize();
    let ar = a.realize();
    if ar.hermitian_residual() > 1e-10 * (1.0 + ar.frobenius_norm()) || b.hermitian_residual() > 1e-10 * (1.0 + b.frobenius_norm()) {
        return Ok(None);
    }
    let (amin, bmin) = (eig_herm(&ar.hermitian_part())?.min(), eig_herm(&b.hermitian_part())?.min());
    let (amax, bmax) = (eig_herm(&ar.hermitian_part())?.max(), eig_herm(&b.hermitian_part())?.max());
    let tol = 1e-12;
    if amin >= -tol * amax.abs() && bmin >= -tol * bmax.abs() {
    } else if amax <= tol * amin.abs() && bmax <= tol * bmin.abs() {
        a = a.scale(-1.0);
        b = b.scale(-1.0);
    } else {
        return Ok(None);
    }
    let q = ts.right().ambient_dim();
    let alpha = CMatrix::identity(n);
    let unit_s = LevelElement::unit(ts.left(), n);
    let unit_t = LevelElement::unit(ts.right(), 1);
    let bel = LevelElement::from_realization(ts.right(), 1, &b.hermitian_part(), 1e-9 * (1.0 + b.frobenius_norm()))?;
    // B = β·1_T exactly when its coefficients past the unit vanish
    let beta = b.trace().re / q as f64;
    let scalar_b = (&b - &CMatrix::identity(q).scale(beta)).frobenius_norm() <= 1e-13 * (1.0 + b.frobenius_norm());
    let atoms = if scalar_b {
        vec![MaxAtom {
            k: n,
            l: 1,
            p: a.scale(beta).add(&unit_s.scale(epsilon))?,
            q: unit_t,
            alpha,
        }]
    } else {
        let mut v = vec![MaxAtom {
            k: n,
            l: 1,
            p: a,
            q: bel,
            alpha: alpha.clone(),
        }];
        if epsilon > 0.0 {
            v.push(MaxAtom {
                k: n,
                l: 1,
                p: unit_s.scale(epsilon),
                q: unit_t,
                alpha,
            });
        }
        v
    };
    Ok(Some(finish(atoms, x, epsilon)?))
}

/// Single atom through the idempotent of the left factor.
fn left_route(ts: &TensorSystem, block: &CMatrix, x: &LevelElement, y: &CMatrix, epsilon: f64) -> Result<MaxDecomposition> {
    let (p, n) = (ts.left().ambient_dim(), x.level());
    let pe = LevelElement::from_realization(ts.left(), p, block, 1e-8)?;
    // rows of Y indexed (i, u, v) are rows (i·p + u, v) of an element of M_{np}(T)
    let qe = LevelElement::from_realization(ts.right(), n * p, y, 1e-8 * (1.0 + y.frobenius_norm()))?;
    let atom = MaxAtom {
        k: p,
        l: n * p,
        p: pe,
        q: qe,
        alpha: selector(n, p),
    };
    finish(vec![atom], x, epsilon)
}

/// Single atom through the idempotent of the right factor.
fn right_route(ts: &TensorSystem, block: &CMatrix, x: &LevelElement, y: &CMatrix, epsilon: f64) -> Result<MaxDecomposition> {
    let (p, q, n) = (ts.left().ambient_dim(), ts.right().ambient_dim(), x.level());
    let qe = LevelElement::from_realization(ts.right(), q, block, 1e-8)?;
    let pr = CMatrix::from_fn(n * q * p, n * q * p, |r, c| {
        let (i, cc, u) = (r / (q * p), (r / p) % q, r % p);
        let (j, cc2, u2) = (c / (q * p), (c / p) % q, c % p);
        y[(i * p * q + u * q + cc, j * p * q + u2 * q + cc2)]
    });
    let pe = LevelElement::from_realization(ts.left(), n * q, &pr, 1e-8 * (1.0 + y.frobenius_norm()))?;
    let atom = MaxAtom {
        k: n * q,
        l: q,
        p: pe,
        q: qe,
        alpha: selector_right(n, q),
    };
    finish(vec![atom], x, epsilon)
}

fn finish(atoms: Vec<MaxAtom>, x: &LevelElement, epsilon: f64) -> Result<MaxDecomposition> {
    let mut d = MaxDecomposition {
        atoms,
        target: x.clone(),
        epsilon,
        residual: 0.0,
    };
    d.residual = d.recompute_residual();
    Ok(d)
}

fn check_hermitian(x: &LevelElement) -> Result<()> {
    let r = x.hermitian_residual();
    if r > 1e-9 * (1.0 + x.realize().frobenius_norm()) {
        return Err(Error::NonHermitian { residual: r });
    }
    Ok(())
}

/// Exact decomposition of `X ∈ M_k(M_n ⊗ R)^+` when the left factor is a
/// full matrix algebra; `ε = 0`.
pub fn matrix_factor_decompose(ts: &TensorSystem, x: &LevelElement) -> Result<MaxDecomposition> {
    if !ts.left().is_full() {
        return Err(Error::DomainNotFull {
            dim: ts.left().dim(),
            ambient: ts.left().ambient_dim(),
        });
    }
    check_hermitian(x)?;
    let y = x.realize();
    let lmin = eig_herm(&y)?.min();
    if lmin < -1e-10 * (1.0 + y.frobenius_norm()) {
        return Err(Error::NotPositive { min_eig: lmin });
    }
    let block = idempotent_block(ts.left()).expect("full algebra");
    left_route(ts, &block, x, &y, 0.0)
}

/// Searches for `X + εI ∈ D_n^max` as a sum of atoms.
pub fn max_certify(ts: &TensorSystem, x: &LevelElement, opts: &CertifyOptions) -> Result<MaxOutcome> {
    ts.check(x)?;
    check_hermitian(x)?;
    let xr = x.realize();
    let epsilon = opts.epsilon_for(&xr);
    if !(epsilon > 0.0) {
        return Err(Error::Malformed(format!("epsilon must be positive, got {epsilon}")));
    }
    let y = shifted_target(x, epsilon);
    let target = opts.tol * (1.0 + xr.frobenius_norm());

    if let Some(d) = product_route(ts, x, epsilon)? {
        if d.residual <= target {
            return Ok(MaxOutcome::Certified(d));
        }
    }
    if opts.injective_route && eig_herm(&y)?.min() >= 0.0 {
        if let Some(block) = ts.left_idempotent() {
            let d = left_route(ts, block, x, &y, epsilon)?;
            if d.residual <= target {
                return Ok(MaxOutcome::Certified(d));
            }
        }
        if let Some(block) = ts.right_idempotent() {
            let d = right_route(ts, block, x, &y, epsilon)?;
            if d.residual <= target {
                return Ok(MaxOutcome::Certified(d));
            }
        }
    }
    frank_wolfe(ts, x, &y, epsilon, target, opts, None)
}

/// Snapshot handed to a search monitor after every conditional-gradient step.
pub struct SearchState<'a> {
    pub step: u64,
    pub iterations: usize,
    pub residual: f64,
    /// `Y − Σ atoms`.
    pub separator: &'a CMatrix,
    /// Best pairing of a normalized atom with the separator found this step.
    pub lmo_value: f64,
}

/// [`max_certify`] without the exact routes, reporting each step to
/// `monitor`; the search stops early when the monitor returns `true`.
pub fn certify_search(
    ts: &TensorSystem,
    x: &LevelElement,
    opts: &CertifyOptions,
    monitor: &mut dyn FnMut(&SearchState) -> bool,
) -> Result<MaxOutcome> {
    ts.check(x)?;
    check_hermitian(x)?;
    let xr = x.realize();
    let epsilon = opts.epsilon_for(&xr);
    let y = shifted_target(x, epsilon);
    let target = opts.tol * (1.0 + xr.frobenius_norm());
    frank_wolfe(ts, x, &y, epsilon, target, opts, Some(monitor))
}

fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.inner(b).re
}

struct Collected {
    p: CMatrix,
    w: CMatrix,
    realized: CMatrix,
}

fn frank_wolfe(
    ts: &TensorSystem,
    x: &LevelElement,
    y: &CMatrix,
    epsilon: f64,
    target: f64,
    opts: &CertifyOptions,
    mut monitor: Option<&mut dyn FnMut(&SearchState) -> bool>,
) -> Result<MaxOutcome> {
    let n = x.level();
    let (p, q) = (ts.left().ambient_dim(), ts.right().ambient_dim());
    let k = opts.k_cap.unwrap_or(p).max(1);
    let mut search = AtomSearch::new(ts.left(), ts.right(), n, k);
    search.restarts = opts.restarts.max(1);

    let kp = k * p;
    let nkq = n * k * q;
    let unit_p = CMatrix::identity(kp).scale(1.0 / kp as f64);
    let unit_w = CMatrix::identity(nkq).scale(1.0 / nkq as f64);
    let unit_atom = search.realize(&unit_p, &unit_w);
    let mut atoms = vec![Collected {
        p: unit_p,
        w: unit_w,
        realized: unit_atom,
    }];
    let mut gram = vec![vec![real_inner(&atoms[0].realized, &atoms[0].realized)]];
    let mut corr = vec![real_inner(&atoms[0].realized, y)];
    let mut iterations = 0usize;
    let mut step = 0u64;
    let mut warm: Option<CMatrix> = None;

    loop {
        let w = nnls_gram(&gram, &corr);
        let mut r = y.clone();
        for (a, wi) in atoms.iter().zip(&w) {
            if *wi != 0.0 {
                r.axpy(C64::new(-wi, 0.0), &a.realized);
            }
        }
        let residual = r.frobenius_norm();
        if residual <= target {
            let decomposition = assemble(ts, x, epsilon, n, k, &atoms, &w)?;
            if decomposition.residual <= target {
                return Ok(MaxOutcome::Certified(decomposition));
            }
        }
        // drop atoms the fit no longer uses
        if atoms.len() > 4 * (ts.dim() * n * n).max(8) {
            let keep: Vec<usize> = (0..atoms.len()).filter(|&i| w[i] > 0.0).collect();
            atoms = keep.iter().map(|&i| std::mem::replace(&mut atoms[i], dummy())).collect();
            gram = keep.iter().map(|&i| keep.iter().map(|&j| gram[i][j]).collect()).collect();
            corr = keep.iter().map(|&i| corr[i]).collect();
        }
        if iterations >= opts.budget {
            return Ok(MaxOutcome::Fail(MaxFailure {
                budget: opts.budget,
                iterations,
                residual,
                separator: r,
                stalled: false,
                atoms: atoms.len(),
            }));
        }
        let choice = search.search(&r, opts.seed.wrapping_add(step * 1000), warm.as_ref());
        iterations += choice.iterations;
        let stalled = choice.value <= 1e-12 * residual;
        if let Some(m) = monitor.as_mut() {
            let state = SearchState {
                step,
                iterations,
                residual,
                separator: &r,
                lmo_value: choice.value,
            };
            if m(&state) {
                return Ok(MaxOutcome::Fail(MaxFailure {
                    budget: opts.budget,
                    iterations,
                    residual,
                    separator: r,
                    stalled,
                    atoms: atoms.len(),
                }));
            }
        }
        step += 1;
        if stalled {
            return Ok(MaxOutcome::Fail(MaxFailure {
                budget: opts.budget,
                iterations,
                residual,
                separator: r,
                stalled: true,
                atoms: atoms.len(),
            }));
        }
        let realized = search.realize(&choice.p, &choice.w);
        let row: Vec<f64> = atoms.iter().map(|a| real_inner(&a.realized, &realized)).collect();
        for (g, v) in gram.iter_mut().zip(&row) {
            g.push(*v);
        }
        let mut last = row;
        last.push(real_inner(&realized, &realized));
        gram.push(last);
        corr.push(real_inner(&realized, y));
        warm = Some(choice.p.clone());
        atoms.push(Collected {
            p: choice.p,
            w: choice.w,
            realized,
        });
    }
}

fn dummy() -> Collected {
    Collected {
        p: CMatrix::zeros(0, 0),
        w: CMatrix::zeros(0, 0),
        realized: CMatrix::zeros(0, 0),
    }
}

fn assemble(ts: &TensorSystem, x: &LevelElement, epsilon: f64, n: usize, k: usize, atoms: &[Collected], w: &[f64]) -> Result<MaxDecomposition> {
    let mut out = Vec::new();
    for (a, wi) in atoms.iter().zip(w) {
        if *wi <= 0.0 {
            continue;
        }
        let (pe, _) = LevelElement::project_realization(ts.left(), k, &a.p)?;
        let (qe, _) = LevelElement::project_realization(ts.right(), n * k, &a.w.scale(*wi))?;
        out.push(MaxAtom {
            k,
            l: n * k,
            p: pe,
            q: qe,
            alpha: selector(n, k),
        });
    }
    finish(out, x, epsilon)
}
