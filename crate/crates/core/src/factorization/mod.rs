//! Approximate factorization of a UCP map `Φ : S → T` through matrix
//! algebras, one step per `(E, ε)`.
//!
//! Each step writes `Φ|_E + ε·ω_1(·)1_T = α(f ⊗ Q)α*` with `f : E → M_r`
//! CP and `Q ∈ M_m(T)^+`, normalizes `f` to a UCP map, extends it to `S`,
//! and unitalizes `ψ′(A) = α(A ⊗ Q)α*`.
//!
//! The decomposition is explicit. If `Φ|_E` has a CP extension `Φ̃ : M_p → M_q`
//! taking every matrix unit into `T`, then `f` is the inclusion `E ⊆ M_p`,
//! `Q = [Φ̃(E_ij)] + (ε/p)·I_p ⊗ 1_T` and `α = vec(I_p)ᵀ`. Scalar-valued
//! maps use `r = m = 1` instead.

mod dual;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::maps::{arveson_extend, cp_extension_into, normalize_to_ucp, unitalize_psi, verify_ucp, MapFile, SystemMap};
use crate::system::MatrixOperatorSystem;

pub use dual::{inclusion_as_tensor_element, unit_state_value, DualSystemElement, InclusionElement};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Largest `r` the explicit route may use.
    pub r_cap: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { r_cap: 16 }
    }
}

/// `Φ|_E + ε·ω_1(·)1_T = α(f ⊗ Q)α*` with `f : E → M_r`, `Q ∈ M_m(T)^+`
/// and `α` a `1 × rm` row indexed by `a·m + i`.
#[derive(Debug, Clone)]
pub struct RestrictedDecomposition {
    pub f: SystemMap,
    pub q: CMatrix,
    pub alpha: CMatrix,
    pub r: usize,
    pub m: usize,
    pub epsilon: f64,
    /// Largest entry of the reconstruction error over the basis of `E`.
    pub residual: f64,
}

impl RestrictedDecomposition {
    /// `α(A ⊗ Q)α*` for `A ∈ M_r`.
    pub fn contract(&self, a: &CMatrix) -> CMatrix {
        let (r, m) = (self.r, self.m);
        let qd = self.q.rows() / m;
        let mut out = CMatrix::zeros(qd, qd);
        for i in 0..r {
            for u in 0..m {
                let wi = self.alpha[(0, i * m + u)];
                if wi == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..r {
                    for v in 0..m {
                        let c = wi * self.alpha[(0, j * m + v)].conj() * a[(i, j)];
                        if c == C64::new(0.0, 0.0) {
                            continue;
                        }
                        out.axpy(c, &self.q.block(u * qd, v * qd, qd, qd));
                    }
                }
            }
        }
        out
    }

    pub fn reconstruct(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(self.contract(&self.f.apply(x)?))
    }

    /// Largest entry of `Φ(x) + ε·ω_1(x)1 − α(f(x) ⊗ Q)α*`.
    pub fn error_at(&self, phi: &SystemMap, x: &CMatrix) -> Result<f64> {
        let mut lhs = phi.apply(x)?;
        lhs.axpy(unit_state_value(x) * self.epsilon, &phi.codomain().unit());
        Ok((&lhs - &self.reconstruct(x)?).max_abs())
    }
}

#[derive(Debug, Clone)]
pub enum RestrictedOutcome {
    Decomposed(RestrictedDecomposition),
    Fail { reason: String, residual: f64 },
}

/// Writes `Φ|_E + ε·ω_1 ⊗ 1_T` as a single atom `α(f ⊗ Q)α*`.
pub fn decompose_restricted_map(phi: &SystemMap, e: &MatrixOperatorSystem, epsilon: f64, opts: &DecomposeOptions) -> Result<RestrictedOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::Malformed(format!("epsilon must be positive, got {epsilon}")));
    }
    let phi_e = phi.restrict(e)?;
    let t = phi.codomain();
    let (p, qd) = (e.ambient_dim(), t.ambient_dim());
    let d = if qd == 1 && p > 1 {
        // a scalar-valued map factors through M_1
        let f = SystemMap::from_fn(e, &MatrixOperatorSystem::full(1), |x| {
            let mut y = phi_e.apply(x).expect("x lies in E");
            y[(0, 0)] += unit_state_value(x) * epsilon;
            y
        })?;
        RestrictedDecomposition {
            f,
            q: CMatrix::identity(1),
            alpha: CMatrix::identity(1),
            r: 1,
            m: 1,
            epsilon,
            residual: 0.0,
        }
    } else {
        if p > opts.r_cap {
            return Ok(RestrictedOutcome::Fail {
                reason: format!("ambient size {p} exceeds the cap {}", opts.r_cap),
                residual: f64::INFINITY,
            });
        }
        let Some(choi) = cp_extension_into(&phi_e)? else {
            return Ok(RestrictedOutcome::Fail {
                reason: "no completely positive extension of the restriction takes values in the codomain".into(),
                residual: f64::INFINITY,
            });
        };
        let f = SystemMap::from_fn(e, &MatrixOperatorSystem::full(p), |x| x.clone())?;
        let mut q = choi;
        q.axpy(C64::new(epsilon / p as f64, 0.0), &CMatrix::identity(p).kron(&t.unit()));
        let alpha = CMatrix::from_fn(1, p * p, |_, c| if c / p == c % p { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        RestrictedDecomposition {
            f,
            q,
            alpha,
            r: p,
            m: p,
            epsilon,
            residual: 0.0,
        }
    };
    let mut d = d;
    let mut residual = 0.0f64;
    for b in e.basis() {
        residual = residual.max(d.error_at(&phi_e, b.matrix())?);
    }
    d.residual = residual;
    if residual > 1e-6 {
        return Ok(RestrictedOutcome::Fail {
            reason: "reconstruction does not match the restriction".into(),
            residual,
        });
    }
    Ok(RestrictedOutcome::Decomposed(d))
}

/// One `(E, ε)` stage: `φ : S → M_r` UCP, `ψ : M_r → T` UCP.
#[derive(Debug, Clone)]
pub struct FactorizationStep {
    pub e: MatrixOperatorSystem,
    pub epsilon: f64,
    pub r: usize,
    pub phi: SystemMap,
    pub psi: SystemMap,
    /// `‖x‖` for the basis of `E`.
    pub norms: Vec<f64>,
    /// `‖Φ(x) − ψφ(x)‖` on the basis of `E`.
    pub errors: Vec<f64>,
    /// The same with the non-unital `ψ′` in place of `ψ`.
    pub prime_errors: Vec<f64>,
    pub phi_ucp: bool,
    pub psi_ucp: bool,
}

impl FactorizationStep {
    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }

    /// `‖Φ(x) − ψφ(x)‖ ≤ (ε + 1e-6)‖x‖` for every basis element.
    pub fn within_bound(&self) -> bool {
        self.errors.iter().zip(&self.norms).all(|(e, n)| *e <= (self.epsilon + 1e-6) * n)
    }
}

/// Runs the normalization, extension and unitalization on one
/// decomposition.
pub fn assemble_step(phi: &SystemMap, e: &MatrixOperatorSystem, d: &RestrictedDecomposition) -> Result<FactorizationStep> {
    let s = phi.domain();
    let nm = normalize_to_ucp(&d.f)?;
    let r = nm.rank;
    let ext = arveson_extend(&nm.map)?;
    let phi_step = ext.restrict(s)?;
    // ψ′(A) = α(V A V* ⊗ Q)α* with V = f(1)^{1/2} U [I_r 0]ᵀ
    let v = nm.sqrt_unit.matmul(&nm.support_isometry());
    let psi_prime = SystemMap::from_fn(&MatrixOperatorSystem::full(r), phi.codomain(), |a| d.contract(&v.congruence(a)))?;
    let psi = unitalize_psi(&psi_prime, &CMatrix::identity(r).scale(1.0 / r as f64))?;
    let mut norms = Vec::new();
    let mut errors = Vec::new();
    let mut prime_errors = Vec::new();
    for b in e.basis() {
        let x = b.matrix();
        let target = phi.apply(x)?;
        let mid = phi_step.apply(x)?;
        norms.push(x.op_norm());
        errors.push((&target - &psi.apply(&mid)?).op_norm());
        prime_errors.push((&target - &psi_prime.apply(&mid)?).op_norm());
    }
    let phi_ucp = verify_ucp(&phi_step)?.is_ucp(1e-8);
    let psi_ucp = verify_ucp(&psi)?.is_ucp(1e-8);
    Ok(FactorizationStep {
        e: e.clone(),
        epsilon: d.epsilon,
        r,
        phi: phi_step,
        psi,
        norms,
        errors,
        prime_errors,
        phi_ucp,
        psi_ucp,
    })
}

/// One step per `(E, ε)` in the schedule; steps run in parallel.
pub fn extract_factorization(
    phi: &SystemMap,
    schedule: &[(MatrixOperatorSystem, f64)],
    opts: &DecomposeOptions,
) -> Result<Vec<FactorizationStep>> {
    schedule
        .par_iter()
        .map(|(e, eps)| match decompose_restricted_map(phi, e, *eps, opts)? {
            RestrictedOutcome::Decomposed(d) => assemble_step(phi, e, &d),
            RestrictedOutcome::Fail { residual, .. } => Err(Error::ExtensionSearchFailed { residual }),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub e_dim: usize,
    pub epsilon: f64,
    pub r: usize,
    pub max_error: f64,
    pub max_prime_error: f64,
    pub within_bound: bool,
    pub ucp: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceAudit {
    pub rows: Vec<AuditRow>,
    pub all_within_bound: bool,
    /// Errors never grow between consecutive steps on the same `E` with
    /// shrinking `ε`.
    pub monotone: bool,
}

pub fn convergence_audit(steps: &[FactorizationStep]) -> ConvergenceAudit {
    let rows: Vec<AuditRow> = steps
        .iter()
        .map(|s| AuditRow {
            e_dim: s.e.dim(),
            epsilon: s.epsilon,
            r: s.r,
            max_error: s.max_error(),
            max_prime_error: s.prime_errors.iter().cloned().fold(0.0, f64::max),
            within_bound: s.within_bound(),
            ucp: s.phi_ucp && s.psi_ucp,
        })
        .collect();
    let monotone = steps.windows(2).all(|w| {
        let same = w[0].e.same_span(&w[1].e) && w[1].epsilon < w[0].epsilon;
        !same || w[1].max_error() <= w[0].max_error() + 1e-9
    });
    ConvergenceAudit {
        all_within_bound: rows.iter().all(|r| r.within_bound && r.ucp),
        rows,
        monotone,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReport {
    #[serde(rename = "E_dim")]
    pub e_dim: usize,
    pub epsilon: f64,
    pub r: usize,
    pub max_error: f64,
    pub phi: MapFile,
    pub psi: MapFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub steps: Vec<StepReport>,
    pub audit: ConvergenceAudit,
}

impl FactorizationReport {
    pub fn new(steps: &[FactorizationStep]) -> Self {
        Self {
            steps: steps
                .iter()
                .map(|s| StepReport {
                    e_dim: s.e.dim(),
                    epsilon: s.epsilon,
                    r: s.r,
                    max_error: s.max_error(),
                    phi: MapFile::from_map(&s.phi),
                    psi: MapFile::from_map(&s.psi),
                })
                .collect(),
            audit: convergence_audit(steps),
        }
    }
}
