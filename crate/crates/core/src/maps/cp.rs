use serde::{Deserialize, Serialize};

use super::{apply_choi, SystemMap};
use crate::certificate::Certificate;
use crate::conic::{
    eig_herm, solve_feasibility, CMatrix, FeasibilityProblem, FeasibilityStatus, HermMatrix, C64,
    DEFAULT_MAX_ITER,
};
use crate::error::{Error, Result};
use crate::system::{LevelElement, MatrixOperatorSystem};

/// Choi threshold for [`is_cp_full`].
pub const CP_TOL: f64 = 1e-9;

/// A PSD Choi matrix on `M_p ⊗ M_q` whose map agrees with the checked map
/// on its domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChoiCertificate {
    pub choi: CMatrix,
    /// Largest Frobenius disagreement on the domain basis.
    pub agreement: f64,
    pub min_eig: f64,
}

/// A positive element `P ∈ M_k(S)^+` whose image `Φ^{(k)}(P)` has the
/// negative eigenvalue `min_eig`.
#[derive(Debug, Clone)]
pub struct CpWitness {
    pub element: LevelElement,
    pub element_min_eig: f64,
    pub min_eig: f64,
    /// Set when the witness level exceeds the ambient dimension of the
    /// domain and no witness was found at a level `≤ p`.
    pub beyond_scanned_levels: bool,
}

pub type CpCertificate = Certificate<ChoiCertificate, CpWitness>;

/// Complete positivity via the Choi matrix; the domain must be `M_p`.
pub fn is_cp_full(phi: &SystemMap) -> Result<bool> {
    let c = phi.choi_full()?;
    Ok(eig_herm(&c)?.min() >= -CP_TOL)
}

/// Complete positivity of `Φ : S → M_q` for `S ⊆ M_p`, decided by
/// searching for a PSD Choi matrix on `M_p ⊗ M_q` that agrees with `Φ` on
/// `S`. Such a matrix exists exactly when `Φ` is CP (Arveson).
///
/// When the search is infeasible, the dual multipliers are turned into a
/// positive `P ∈ M_q(S)^+` with `⟨Ω, Φ^{(q)}(P) Ω⟩ < 0` for the
/// unnormalized maximally entangled vector `Ω`. If `q > p` the witness is
/// compressed to level `p` along the Schmidt vectors of its negative
/// eigenvector; the output flags when that compression loses negativity.
pub fn is_cp_subsystem(phi: &SystemMap, tol: f64) -> Result<CpCertificate> {
    let s = phi.domain();
    let p = s.ambient_dim();
    let q = phi.codomain().ambient_dim();
    let images: Vec<CMatrix> = s
        .basis()
        .iter()
        .map(|b| phi.apply(b.matrix()))
        .collect::<Result<_>>()?;

    let mut prob = FeasibilityProblem::new(vec![p * q]);
    for (b, img) in s.basis().iter().zip(&images) {
        let bt = b.matrix().transpose();
        for u in 0..q {
            for v in u..q {
                let coeff = bt.kron(&CMatrix::unit(q, v, u));
                if u == v {
                    prob.add(vec![(0, HermMatrix::new(coeff)?)], img[(u, u)].re);
                } else {
                    prob.add_complex(0, &coeff, img[(u, v)]);
                }
            }
        }
    }
    let out = solve_feasibility(&prob, tol, DEFAULT_MAX_ITER)?;
    match out.status {
        FeasibilityStatus::Feasible => {
            let choi = out.witness.expect("feasible outcome has a witness")[0].clone().into_matrix();
            let min_eig = eig_herm(&choi)?.min();
            let agreement = s
                .basis()
                .iter()
                .zip(&images)
                .map(|(b, img)| (&apply_choi(p, q, &choi, b.matrix()) - img).frobenius_norm())
                .fold(0.0, f64::max);
            if min_eig < -tol || agreement > tol {
                return Ok(Certificate::Undecided {
                    budget: DEFAULT_MAX_ITER,
                    residual: agreement.max(-min_eig),
                });
            }
            Ok(Certificate::CertifiedMember(ChoiCertificate {
                choi,
                agreement,
                min_eig,
            }))
        }
        FeasibilityStatus::Infeasible => {
            let y = out.dual_certificate.expect("infeasible outcome has multipliers");
            let mut z = CMatrix::zeros(p * q, p * q);
            for (c, yi) in prob.constraints.iter().zip(&y) {
                for (_, m) in &c.terms {
                    z.axpy(C64::new(*yi, 0.0), m.matrix());
                }
            }
            // P_{(u,i),(v,j)} = Z_{(j,v),(i,u)}
            let praw = CMatrix::from_fn(q * p, q * p, |r, c| {
                let (u, i) = (r / p, r % p);
                let (v, j) = (c / p, c % p);
                z[(j * q + v, i * q + u)]
            });
            let witness = positive_witness(phi, q, &praw)?;
            if q <= p || witness.min_eig > -tol {
                return Ok(finish(witness, q, p, tol));
            }
            let compressed = compress_witness(phi, &witness, p)?;
            if compressed.min_eig <= -tol {
                Ok(Certificate::RefutedAtLevel {
                    witness: compressed,
                    level: p,
                })
            } else {
                Ok(finish(witness, q, p, tol))
            }
        }
        FeasibilityStatus::Undecided => Ok(Certificate::Undecided {
            budget: DEFAULT_MAX_ITER,
            residual: out.residual,
        }),
    }
}

fn finish(mut witness: CpWitness, level: usize, p: usize, tol: f64) -> CpCertificate {
    if witness.min_eig > -tol {
        return Certificate::Undecided {
            budget: DEFAULT_MAX_ITER,
            residual: witness.min_eig,
        };
    }
    witness.beyond_scanned_levels = level > p;
    Certificate::RefutedAtLevel { witness, level }
}

/// Projects a raw level-`k` matrix into `M_k(S)`, normalizes it, clears any
/// rounding-level negativity with a multiple of the unit and evaluates
/// `Φ^{(k)}` on it.
fn positive_witness(phi: &SystemMap, k: usize, raw: &CMatrix) -> Result<CpWitness> {
    let s = phi.domain();
    let (elem, _) = LevelElement::project_realization(s, k, &raw.hermitian_part())?;
    let norm = elem.realize().frobenius_norm().max(1e-300);
    let mut elem = elem.scale(1.0 / norm);
    let lmin = eig_herm(&elem.realize())?.min();
    if lmin < 0.0 {
        elem = elem.add(&LevelElement::unit(s, k).scale(-lmin))?;
    }
    let element_min_eig = eig_herm(&elem.realize())?.min();
    let min_eig = eig_herm(&phi.amplify(&elem))?.min();
    Ok(CpWitness {
        element: elem,
        element_min_eig,
        min_eig,
        beyond_scanned_levels: false,
    })
}

/// Compresses a level-`q` witness to level `k` along the leading Schmidt
/// vectors (level side) of the most negative eigenvector of its image.
fn compress_witness(phi: &SystemMap, w: &CpWitness, k: usize) -> Result<CpWitness> {
    let q_level = w.element.level();
    let qc = phi.codomain().ambient_dim();
    let img = phi.amplify(&w.element);
    let e = eig_herm(&img)?;
    let xi = e.vectors.col(0);
    let xm = CMatrix::from_fn(q_level, qc, |u, t| xi[u * qc + t]);
    let left = eig_herm(&xm.matmul(&xm.adjoint()))?;
    let v = CMatrix::from_fn(q_level, k, |u, c| left.vectors[(u, q_level - 1 - c)]);
    let p = phi.domain().ambient_dim();
    let big = v.kron(&CMatrix::identity(p));
    let raw = big.adjoint().matmul(&w.element.realize()).matmul(&big);
    positive_witness(phi, k, &raw)
}

/// Result of an independent UCP check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UcpCheck {
    pub cp: bool,
    pub unital_residual: f64,
}

impl UcpCheck {
    pub fn is_ucp(&self, tol: f64) -> bool {
        self.cp && self.unital_residual <= tol
    }
}

/// Complete positivity (Choi test on full domains, the extension search
/// otherwise) together with the unitality defect.
pub fn verify_ucp(phi: &SystemMap) -> Result<UcpCheck> {
    let cp = if phi.domain().is_full() {
        is_cp_full(phi)?
    } else {
        is_cp_subsystem(phi, 1e-8)?.is_member()
    };
    Ok(UcpCheck {
        cp,
        unital_residual: phi.unital_residual(),
    })
}

/// A CP map `M_p → M_q` agreeing with `Φ` on its domain.
pub fn arveson_extend(phi: &SystemMap) -> Result<SystemMap> {
    let p = phi.domain().ambient_dim();
    let q = phi.codomain().ambient_dim();
    match is_cp_subsystem(phi, 1e-8)? {
        Certificate::CertifiedMember(c) => SystemMap::from_choi(p, q, &c.choi),
        Certificate::ExactMember => SystemMap::from_fn(
            &MatrixOperatorSystem::full(p),
            &MatrixOperatorSystem::full(q),
            |x| phi.apply(x).expect("domain is full"),
        ),
        Certificate::RefutedAtLevel { witness, .. } => Err(Error::ExtensionSearchFailed {
            residual: -witness.min_eig,
        }),
        Certificate::Undecided { residual, .. } => Err(Error::ExtensionSearchFailed { residual }),
    }
}

/// Choi matrix of a CP map `M_p → M_q` that agrees with `Φ` on its domain
/// and takes every matrix unit into the codomain of `Φ`. `None` when the
/// SDP finds no such map.
pub fn cp_extension_into(phi: &SystemMap) -> Result<Option<CMatrix>> {
    let (s, t) = (phi.domain(), phi.codomain());
    let (p, q) = (s.ambient_dim(), t.ambient_dim());
    let mut prob = FeasibilityProblem::new(vec![p * q]);
    for b in s.basis() {
        let bt = b.matrix().transpose();
        let img = phi.apply(b.matrix())?;
        for u in 0..q {
            for v in u..q {
                let coeff = bt.kron(&CMatrix::unit(q, v, u));
                if u == v {
                    prob.add(vec![(0, HermMatrix::new(coeff)?)], img[(u, v)].re);
                } else {
                    prob.add_complex(0, &coeff, img[(u, v)]);
                }
            }
        }
    }
    for f in t.perp_basis() {
        for i in 0..p {
            for j in i..p {
                let coeff = CMatrix::unit(p, j, i).kron(&f);
                if i == j {
                    prob.add(vec![(0, HermMatrix::new(coeff)?)], 0.0);
                } else {
                    prob.add_complex(0, &coeff, C64::new(0.0, 0.0));
                }
            }
        }
    }
    let out = solve_feasibility(&prob, 1e-10, DEFAULT_MAX_ITER)?;
    if out.status != FeasibilityStatus::Feasible {
        return Ok(None);
    }
    let Some(w) = out.witness else { return Ok(None) };
    let choi = w[0].clone().into_matrix();
    if eig_herm(&choi)?.min() < -1e-10 {
        return Ok(None);
    }
    for b in s.basis() {
        let d = &apply_choi(p, q, &choi, b.matrix()) - &phi.apply(b.matrix())?;
        if d.frobenius_norm() > 1e-8 * (1.0 + b.matrix().frobenius_norm()) {
            return Ok(None);
        }
    }
    Ok(Some(choi))
}
