//! Semidefinite feasibility over block-diagonal hermitian variables.
//!
//! The affine constraints are eliminated up front: the variable becomes
//! `X(z) = X0 + Σ z_k N_k` with `N_k` an orthonormal basis of the null space
//! of the constraint map. Feasibility then asks whether the smallest
//! eigenvalue of `X(z)` can be made nonnegative, which is decided by a
//! log-barrier path-following method on `max t s.t. X(z) - tI ⪰ 0`.
//!
//! At every centered point the barrier supplies a positive definite dual
//! matrix `W = μ (X(z) - tI)^{-1}` orthogonal to the null space. Once
//! `⟨W, X0⟩ < 0`, projecting `W` onto the row space of the constraint map
//! yields multipliers `y` with `Σ y_i A_i ⪰ 0` and `bᵀy < 0`, which rules out
//! any PSD solution.

use serde::{Deserialize, Serialize};

use super::eigen::{eig_lenient, HermMatrix};
use super::matrix::{CMatrix, C64};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// One real affine constraint `Σ_b tr(C_b X_b) = rhs`. Blocks not listed
/// have zero coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineConstraint {
    pub terms: Vec<(usize, HermMatrix)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    pub blocks: Vec<usize>,
    pub constraints: Vec<AffineConstraint>,
    /// Linear functional `Σ_b tr(C_b X_b)` to minimize over the feasible set.
    pub objective: Option<Vec<(usize, HermMatrix)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub status: FeasibilityStatus,
    pub witness: Option<Vec<HermMatrix>>,
    /// Constraint multipliers `y` with `Σ y_i A_i ⪰ 0` and `bᵀy < 0`.
    pub dual_certificate: Option<Vec<f64>>,
    /// Feasible: max of constraint violation and negative eigenvalue mass.
    /// Infeasible: the certificate margin `-bᵀy` after normalizing
    /// `‖Σ y_i A_i‖_F = 1`.
    pub residual: f64,
    pub iterations: usize,
    pub objective_value: Option<f64>,
}

impl FeasibilityProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        Self {
            blocks,
            ..Default::default()
        }
    }

    pub fn add(&mut self, terms: Vec<(usize, HermMatrix)>, rhs: f64) {
        self.constraints.push(AffineConstraint { terms, rhs });
    }

    /// Adds the complex equation `tr(B X_block) = rhs` as its real and
    /// imaginary parts.
    pub fn add_complex(&mut self, block: usize, b: &CMatrix, rhs: C64) {
        let re = (b + &b.adjoint()).scale(0.5);
        let im = (b - &b.adjoint()).scale_c(C64::new(0.0, -0.5));
        self.add(vec![(block, HermMatrix::new(re).expect("hermitian by construction"))], rhs.re);
        self.add(vec![(block, HermMatrix::new(im).expect("hermitian by construction"))], rhs.im);
    }

    fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            for (b, m) in &c.terms {
                let Some(&d) = self.blocks.get(*b) else {
                    return Err(Error::DimensionMismatch {
                        expected: self.blocks.len(),
                        found: *b + 1,
                    });
                };
                if m.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: m.dim(),
                    });
                }
            }
        }
        if let Some(obj) = &self.objective {
            for (b, m) in obj {
                if self.blocks.get(*b) != Some(&m.dim()) {
                    return Err(Error::DimensionMismatch {
                        expected: self.blocks.get(*b).copied().unwrap_or(0),
                        found: m.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        off.push(0);
        for &d in &self.blocks {
            acc += d * d;
            off.push(acc);
        }
        off
    }

    fn terms_to_vec(&self, terms: &[(usize, HermMatrix)], off: &[usize]) -> Vec<f64> {
        let mut row = vec![0.0; *off.last().unwrap()];
        for (b, m) in terms {
            let v = hvec(m.matrix());
            for (r, x) in row[off[*b]..off[b + 1]].iter_mut().zip(v) {
                *r += x;
            }
        }
        row
    }

    /// Largest violation of the affine constraints at `x`.
    pub fn constraint_violation(&self, x: &[HermMatrix]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c
                    .terms
                    .iter()
                    .map(|(b, m)| m.matrix().trace_product(x[*b].matrix()).re)
                    .sum();
                (lhs - c.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Real coordinates of a hermitian matrix in which the trace pairing
/// `tr(AB)` becomes the Euclidean dot product.
pub fn hvec(m: &CMatrix) -> Vec<f64> {
    let d = m.rows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
        for j in i + 1..d {
            v.push(std::f64::consts::SQRT_2 * m[(i, j)].re);
            v.push(std::f64::consts::SQRT_2 * m[(i, j)].im);
        }
    }
    v
}

pub fn unhvec(v: &[f64], d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    let mut k = 0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        m[(i, i)] = C64::new(v[k], 0.0);
        k += 1;
        for j in i + 1..d {
            let z = C64::new(v[k] * s, v[k + 1] * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Orthonormal basis of the row space, each basis vector recorded as a
/// combination of the original rows.
struct RowSpace {
    q: Vec<Vec<f64>>,
    combo: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

enum RowSpaceResult {
    Ok(RowSpace),
    /// A combination `y` of rows vanishes while `bᵀy < 0`.
    Inconsistent(Vec<f64>, f64),
}

fn row_space(rows: &[Vec<f64>], b: &[f64]) -> RowSpaceResult {
    let m = rows.len();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut combo: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..m {
        let norm0 = dot(&rows[i], &rows[i]).sqrt();
        let mut v = rows[i].clone();
        let mut c = vec![0.0; m];
        c[i] = 1.0;
        let mut r = b[i];
        for _ in 0..2 {
            for k in 0..q.len() {
                let h = dot(&q[k], &v);
                axpy(&mut v, -h, &q[k]);
                axpy(&mut c, -h, &combo[k]);
                r -= h * rhs[k];
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-10 * norm0.max(1e-300) || norm0 == 0.0 {
            let scale = 1.0 + b.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if r.abs() > 1e-10 * scale {
                let sign = if r > 0.0 { -1.0 } else { 1.0 };
                let y: Vec<f64> = c.iter().map(|x| sign * x).collect();
                return RowSpaceResult::Inconsistent(y, -r.abs());
            }
            continue;
        }
        let inv = 1.0 / norm;
        v.iter_mut().for_each(|x| *x *= inv);
        c.iter_mut().for_each(|x| *x *= inv);
        q.push(v);
        combo.push(c);
        rhs.push(r * inv);
    }
    RowSpaceResult::Ok(RowSpace { q, combo, rhs })
}

fn null_space(q: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for e in 0..n {
        if q.len() + basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for _ in 0..2 {
            for u in q.iter().chain(basis.iter()) {
                let h = dot(u, &v);
                axpy(&mut v, -h, u);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

struct Blocks<'a> {
    dims: &'a [usize],
    off: Vec<usize>,
}

impl Blocks<'_> {
    fn split(&self, v: &[f64]) -> Vec<CMatrix> {
        self.dims
            .iter()
            .enumerate()
            .map(|(b, &d)| unhvec(&v[self.off[b]..self.off[b + 1]], d))
            .collect()
    }
}

/// Decides whether the affine constraints admit a block PSD solution.
pub fn solve_feasibility(p: &FeasibilityProblem, tol: f64, max_iter: usize) -> Result<FeasibilityOutcome> {
    p.validate()?;
    assert!(tol > 0.0, "tolerance must be positive");
    let off = p.offsets();
    let n = *off.last().unwrap();
    let blocks = Blocks {
        dims: &p.blocks,
        off: off.clone(),
    };
    let rows: Vec<Vec<f64>> = p.constraints.iter().map(|c| p.terms_to_vec(&c.terms, &off)).collect();
    let b: Vec<f64> = p.constraints.iter().map(|c| c.rhs).collect();

    let rs = match row_space(&rows, &b) {
        RowSpaceResult::Ok(rs) => rs,
        RowSpaceResult::Inconsistent(y, by) => {
            return Ok(FeasibilityOutcome {
                status: FeasibilityStatus::Infeasible,
                witness: None,
                dual_certificate: Some(y),
                residual: -by,
                iterations: 0,
                objective_value: None,
            })
        }
    };
    let mut x0 = vec![0.0; n];
    for (qk, ck) in rs.q.iter().zip(&rs.rhs) {
        axpy(&mut x0, *ck, qk);
    }
    let null = null_space(&rs.q, n);
    let dirs: Vec<Vec<CMatrix>> = null.iter().map(|v| blocks.split(v)).collect();
    let base = blocks.split(&x0);

    let mut solver = Barrier {
        base: &base,
        dirs: &dirs,
        z: vec![0.0; null.len()],
        iterations: 0,
        max_iter,
    };

    let phase1 = solver.maximize_min_eig(tol);
    let outcome = match phase1 {
        Phase1::Feasible => {
            let x = solver.point();
            let witness = to_herm(&x);
            let min_eig = x.iter().map(|m| eig_lenient(m).min()).fold(f64::INFINITY, f64::min);
            let viol = p.constraint_violation(&witness);
            let mut out = FeasibilityOutcome {
                status: FeasibilityStatus::Feasible,
                residual: viol.max((-min_eig).max(0.0)),
                witness: Some(witness),
                dual_certificate: None,
                iterations: solver.iterations,
                objective_value: None,
            };
            if let Some(obj) = &p.objective {
                let c = p.terms_to_vec(obj, &off);
                let cb = blocks.split(&c);
                if min_eig > 0.0 {
                    solver.minimize_linear(&cb, tol);
                    let x = solver.point();
                    let witness = to_herm(&x);
                    let min_eig = x.iter().map(|m| eig_lenient(m).min()).fold(f64::INFINITY, f64::min);
                    out.residual = p.constraint_violation(&witness).max((-min_eig).max(0.0));
                    out.witness = Some(witness);
                    out.iterations = solver.iterations;
                }
                let val: f64 = out
                    .witness
                    .as_ref()
                    .unwrap()
                    .iter()
                    .zip(&cb)
                    .map(|(x, c)| c.trace_product(x.matrix()).re)
                    .sum();
                out.objective_value = Some(val);
            }
            out
        }
        Phase1::Infeasible(w) => {
            // project the dual matrix onto the row space and express it in
            // the original constraint rows
            let wv: Vec<f64> = w.iter().flat_map(hvec).collect();
            let mut y = vec![0.0; rows.len()];
            let mut wrow = vec![0.0; n];
            let mut by = 0.0;
            for k in 0..rs.q.len() {
                let h = dot(&rs.q[k], &wv);
                axpy(&mut wrow, h, &rs.q[k]);
                axpy(&mut y, h, &rs.combo[k]);
                by += h * rs.rhs[k];
            }
            let norm = dot(&wrow, &wrow).sqrt();
            let wb = blocks.split(&wrow);
            let min_eig = wb.iter().map(|m| eig_lenient(m).min()).fold(f64::INFINITY, f64::min);
            let margin = -by / norm;
            if min_eig / norm >= -tol && margin >= tol {
                y.iter_mut().for_each(|v| *v /= norm);
                FeasibilityOutcome {
                    status: FeasibilityStatus::Infeasible,
                    witness: None,
                    dual_certificate: Some(y),
                    residual: margin,
                    iterations: solver.iterations,
                    objective_value: None,
                }
            } else {
                undecided(solver.iterations)
            }
        }
        Phase1::Undecided => undecided(solver.iterations),
    };
    Ok(outcome)
}

fn undecided(iterations: usize) -> FeasibilityOutcome {
    FeasibilityOutcome {
        status: FeasibilityStatus::Undecided,
        witness: None,
        dual_certificate: None,
        residual: f64::INFINITY,
        iterations,
        objective_value: None,
    }
}

fn to_herm(x: &[CMatrix]) -> Vec<HermMatrix> {
    x.iter()
        .map(|m| HermMatrix::new(m.hermitian_part()).expect("hermitian by construction"))
        .collect()
}

/// Checks a dual certificate against the problem it claims to refute:
/// returns `(min eigenvalue of Σ y_i A_i, bᵀy)`.
pub fn check_dual_certificate(p: &FeasibilityProblem, y: &[f64]) -> (f64, f64) {
    let mut acc: Vec<CMatrix> = p.blocks.iter().map(|&d| CMatrix::zeros(d, d)).collect();
    let mut by = 0.0;
    for (c, &yi) in p.constraints.iter().zip(y) {
        by += yi * c.rhs;
        for (b, m) in &c.terms {
            acc[*b].axpy(C64::new(yi, 0.0), m.matrix());
        }
    }
    let min_eig = acc.iter().map(|m| eig_lenient(m).min()).fold(f64::INFINITY, f64::min);
    (min_eig, by)
}

enum Phase1 {
    Feasible,
    Infeasible(Vec<CMatrix>),
    Undecided,
}

struct Barrier<'a> {
    base: &'a [CMatrix],
    dirs: &'a [Vec<CMatrix>],
    z: Vec<f64>,
    iterations: usize,
    max_iter: usize,
}

/// Spectral data of one block of the slack matrix.
struct SlackBlock {
    inv_sqrt: CMatrix,
    inv: CMatrix,
    log_det: f64,
}

impl Barrier<'_> {
    fn point_at(&self, z: &[f64]) -> Vec<CMatrix> {
        let mut x: Vec<CMatrix> = self.base.to_vec();
        for (zk, dk) in z.iter().zip(self.dirs) {
            if *zk == 0.0 {
                continue;
            }
            for (xb, db) in x.iter_mut().zip(dk) {
                xb.axpy(C64::new(*zk, 0.0), db);
            }
        }
        x
    }

    fn point(&self) -> Vec<CMatrix> {
        self.point_at(&self.z)
    }

    fn min_eig_at(&self, z: &[f64]) -> f64 {
        self.point_at(z)
            .iter()
            .map(|m| eig_lenient(m).min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Slack blocks `X(z) - tI`; `None` if not positive definite.
    fn slack(&self, z: &[f64], t: f64) -> Option<Vec<SlackBlock>> {
        let x = self.point_at(z);
        let mut out = Vec::with_capacity(x.len());
        for m in &x {
            let e = eig_lenient(m);
            if e.values.iter().any(|&l| l - t <= 0.0) {
                return None;
            }
            let log_det = e.values.iter().map(|&l| (l - t).ln()).sum();
            out.push(SlackBlock {
                inv_sqrt: e.apply(|l| 1.0 / (l - t).sqrt()),
                inv: e.apply(|l| 1.0 / (l - t)),
                log_det,
            });
        }
        Some(out)
    }

    /// Gradient and negated Hessian of `Σ_b log det S_b` in the
    /// directions `dirs` plus, if `with_t`, the direction `-I`.
    fn derivatives(&self, s: &[SlackBlock], with_t: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let r = self.dirs.len();
        let dim = r + usize::from(with_t);
        let mut scaled: Vec<Vec<CMatrix>> = Vec::with_capacity(dim);
        let mut grad = vec![0.0; dim];
        for (k, dk) in self.dirs.iter().enumerate() {
            let mut per_block = Vec::with_capacity(s.len());
            for (sb, db) in s.iter().zip(dk) {
                grad[k] += sb.inv.trace_product(db).re;
                per_block.push(sb.inv_sqrt.matmul(db).matmul(&sb.inv_sqrt));
            }
            scaled.push(per_block);
        }
        if with_t {
            let mut per_block = Vec::with_capacity(s.len());
            for sb in s {
                grad[r] -= sb.inv.trace().re;
                per_block.push(sb.inv.scale(-1.0));
            }
            scaled.push(per_block);
        }
        let mut hess = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = scaled[i]
                    .iter()
                    .zip(&scaled[j])
                    .map(|(a, b)| a.inner(b).re)
                    .sum();
                hess[i][j] = v;
                hess[j][i] = v;
            }
        }
        (grad, hess)
    }

    fn maximize_min_eig(&mut self, tol: f64) -> Phase1 {
        let total_dim: f64 = self.base.iter().map(|m| m.rows() as f64).sum();
        let lmin = self.min_eig_at(&self.z);
        if lmin >= 0.0 {
            return Phase1::Feasible;
        }
        let scale = 1.0 + self.base.iter().map(|m| m.frobenius_norm()).fold(0.0, f64::max);
        if self.dirs.is_empty() {
            return self.certify_or_give_up(lmin, 0.0, tol);
        }
        let mut t = lmin - 1.0 - 0.1 * lmin.abs();
        let mut mu = scale;
        while self.iterations < self.max_iter {
            // centering: maximize t + μ Σ log det (X(z) - tI)
            for _ in 0..60 {
                if self.iterations >= self.max_iter {
                    break;
                }
                self.iterations += 1;
                let s = self.slack(&self.z, t).expect("iterate stays interior");
                let (g, h) = self.derivatives(&s, true);
                let r = self.dirs.len();
                let mut grad: Vec<f64> = g.iter().map(|v| mu * v).collect();
                grad[r] += 1.0;
                let neg_hess: Vec<Vec<f64>> = h.iter().map(|row| row.iter().map(|v| mu * v).collect()).collect();
                let Some(step) = solve_spd(&neg_hess, &grad) else {
                    break;
                };
                let decrement: f64 = dot(&step, &grad);
                let f0 = t + mu * s.iter().map(|b| b.log_det).sum::<f64>();
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let zt: Vec<f64> = self.z.iter().zip(&step).map(|(z, d)| z + alpha * d).collect();
                    let tt = t + alpha * step[r];
                    if let Some(s2) = self.slack(&zt, tt) {
                        let f1 = tt + mu * s2.iter().map(|b| b.log_det).sum::<f64>();
                        if f1 >= f0 + 0.25 * alpha * decrement {
                            self.z = zt;
                            t = tt;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if self.min_eig_at(&self.z) >= 0.0 {
                    return Phase1::Feasible;
                }
                if !moved || decrement < 1e-10 * mu.max(1e-300) {
                    break;
                }
            }
            let lmin = self.min_eig_at(&self.z);
            if lmin >= 0.0 {
                return Phase1::Feasible;
            }
            // duality gap of the centered point is about μ·dim
            let s = self.slack(&self.z, t).expect("iterate stays interior");
            let w: Vec<CMatrix> = s.iter().map(|b| b.inv.scale(mu)).collect();
            let gap_bound = t + mu * total_dim;
            if gap_bound < -tol {
                return Phase1::Infeasible(w);
            }
            if mu * total_dim < 1e-3 * tol {
                return self.certify_or_give_up(lmin, mu, tol);
            }
            mu *= 0.125;
        }
        Phase1::Undecided
    }

    fn certify_or_give_up(&self, lmin: f64, _mu: f64, tol: f64) -> Phase1 {
        if lmin >= -tol {
            return Phase1::Feasible;
        }
        if self.dirs.is_empty() {
            // single candidate point: the negative eigenspace refutes it
            let x = self.point();
            let w = x
                .iter()
                .map(|m| {
                    let e = eig_lenient(m);
                    e.apply(|l| if l < 0.0 { 1.0 } else { 0.0 })
                })
                .collect();
            return Phase1::Infeasible(w);
        }
        Phase1::Undecided
    }

    /// Barrier descent on a linear objective from a strictly feasible point.
    fn minimize_linear(&mut self, c: &[CMatrix], tol: f64) {
        if self.dirs.is_empty() {
            return;
        }
        let total_dim: f64 = self.base.iter().map(|m| m.rows() as f64).sum();
        let cdir: Vec<f64> = self
            .dirs
            .iter()
            .map(|dk| dk.iter().zip(c).map(|(d, cb)| cb.trace_product(d).re).sum())
            .collect();
        let obj = |z: &[f64]| -> f64 { dot(&cdir, z) };
        let scale = 1.0 + c.iter().map(|m| m.frobenius_norm()).fold(0.0, f64::max);
        let mut mu = scale;
        while mu * total_dim > 1e-2 * tol && self.iterations < self.max_iter {
            for _ in 0..60 {
                if self.iterations >= self.max_iter {
                    break;
                }
                self.iterations += 1;
                let Some(s) = self.slack(&self.z, 0.0) else { break };
                let (g, h) = self.derivatives(&s, false);
                let grad: Vec<f64> = g.iter().zip(&cdir).map(|(gi, ci)| mu * gi - ci).collect();
                let neg_hess: Vec<Vec<f64>> = h.iter().map(|row| row.iter().map(|v| mu * v).collect()).collect();
                let Some(step) = solve_spd(&neg_hess, &grad) else { break };
                let decrement = dot(&step, &grad);
                let f0 = -obj(&self.z) + mu * s.iter().map(|b| b.log_det).sum::<f64>();
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let zt: Vec<f64> = self.z.iter().zip(&step).map(|(z, d)| z + alpha * d).collect();
                    if let Some(s2) = self.slack(&zt, 0.0) {
                        let f1 = -obj(&zt) + mu * s2.iter().map(|b| b.log_det).sum::<f64>();
                        if f1 >= f0 + 0.25 * alpha * decrement {
                            self.z = zt;
                            moved = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved || decrement < 1e-12 * mu {
                    break;
                }
            }
            mu *= 0.125;
        }
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub(crate) fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    let diag_scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                let s = s + 1e-14 * diag_scale;
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
