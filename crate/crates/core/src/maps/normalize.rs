use super::SystemMap;
use crate::conic::{eig_herm, CMatrix, C64};
use crate::error::{Error, Result};
use crate::system::MatrixOperatorSystem;

/// Relative eigenvalue cut-off for the support of `f(1)`.
pub const SUPPORT_CUTOFF: f64 = 1e-8;

/// A CP map compressed to the support of `f(1)` and made unital, with the
/// data needed to undo the normalization.
#[derive(Debug, Clone)]
pub struct NormalizedMap {
    /// `f̃ : E → M_r`, unital.
    pub map: SystemMap,
    pub rank: usize,
    /// Unitary with the support of `f(1)` in its first `r` columns, so
    /// `U* P U = I_r ⊕ 0`.
    pub u: CMatrix,
    pub sqrt_unit: CMatrix,
    /// Pseudo-inverse square root of `f(1)` (zero off the support).
    pub inv_sqrt_unit: CMatrix,
}

impl NormalizedMap {
    /// `f(1)^{1/2} U (f̃(x) ⊕ 0) U* f(1)^{1/2}`, which equals `f(x)`.
    pub fn reassemble(&self, x: &CMatrix) -> Result<CMatrix> {
        let n = self.u.rows();
        let inner = self.map.apply(x)?;
        let mut padded = CMatrix::zeros(n, n);
        padded.set_block(0, 0, &inner);
        Ok(self.sqrt_unit.matmul(&self.u.congruence(&padded)).matmul(&self.sqrt_unit))
    }

    /// `U [I_r 0]^T`, an isometry `ℂ^r → ℂ^n`.
    pub fn support_isometry(&self) -> CMatrix {
        self.u.block(0, 0, self.u.rows(), self.rank)
    }
}

/// `f̃(x) = [I_r 0] U* f(1)^{-1/2} f(x) f(1)^{-1/2} U [I_r 0]^T`.
pub fn normalize_to_ucp(f: &SystemMap) -> Result<NormalizedMap> {
    let a = f.apply(&f.domain().unit())?;
    let e = eig_herm(&a)?;
    let norm = e.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if norm == 0.0 {
        return Err(Error::ZeroUnitImage);
    }
    let cut = SUPPORT_CUTOFF * norm;
    let n = a.rows();
    // support first, largest eigenvalues first
    let order: Vec<usize> = (0..n).rev().collect();
    let rank = e.values.iter().filter(|&&l| l > cut).count();
    if rank == 0 {
        return Err(Error::ZeroUnitImage);
    }
    let u = CMatrix::from_fn(n, n, |i, k| e.vectors[(i, order[k])]);
    let sqrt_unit = e.apply(|l| if l > cut { l.sqrt() } else { 0.0 });
    let inv_sqrt_unit = e.apply(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 });
    let v = u.block(0, 0, n, rank);
    let w = inv_sqrt_unit.matmul(&v);
    let wa = w.adjoint();
    let map = SystemMap::from_fn(f.domain(), &MatrixOperatorSystem::full(rank), |x| {
        let y = f.apply(x).expect("x lies in the domain");
        wa.matmul(&y).matmul(&w)
    })?;
    Ok(NormalizedMap {
        map,
        rank,
        u,
        sqrt_unit,
        inv_sqrt_unit,
    })
}

/// `ψ(A) = ψ′(A)/‖ψ′‖ + ω(A)(1_T − ψ′(I)/‖ψ′‖)` with `‖ψ′‖ = ‖ψ′(I)‖` and
/// `ω(A) = tr(ρA)`.
pub fn unitalize_psi(psi_prime: &SystemMap, rho: &CMatrix) -> Result<SystemMap> {
    let dom = psi_prime.domain();
    let n = dom.ambient_dim();
    if rho.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.rows(),
        });
    }
    let img = psi_prime.apply(&dom.unit())?;
    let norm = img.op_norm();
    if norm <= 0.0 {
        return Err(Error::ZeroUnitImage);
    }
    let defect = &psi_prime.codomain().unit() - &img.scale(1.0 / norm);
    let min_eig = eig_herm(&defect)?.min();
    if min_eig < -1e-8 {
        return Err(Error::DefectNotPositive { min_eig });
    }
    SystemMap::from_fn(dom, psi_prime.codomain(), |x| {
        let mut y = psi_prime.apply(x).expect("x lies in the domain").scale(1.0 / norm);
        let w: C64 = rho.trace_product(x);
        y.axpy(w, &defect);
        y
    })
}
