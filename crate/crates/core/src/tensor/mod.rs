//! Minimal and maximal tensor cones of concrete operator systems.

pub mod atoms;
pub mod certify;
pub mod io;
pub mod lmo;
pub mod nuclearity;
pub mod refute;

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{eig_herm, CMatrix};
use crate::error::{Error, Result};
use crate::maps::{random_ucp_to_matrices, tensor_maps, SystemMap};
use crate::system::{tensor_product, LevelElement, MatrixOperatorSystem};

pub use atoms::{selector, selector_right, AtomCheck, MaxAtom, MaxDecomposition};
pub use nuclearity::{nuclearity_report, structured_candidates, NuclearityOptions, NuclearityReport, PartnerReport, Verdict};
pub use refute::{max_refute, tri3_pattern_element, FunctionalSource, LevelCheck, RefutationEvidence, RefuteOptions, RefuteOutcome};
pub use certify::{idempotent_block, matrix_factor_decompose, max_certify, CertifyOptions, MaxFailure, MaxOutcome};

/// `S ⊗ T` inside `M_p ⊗ M_q`, carrying both factors.
#[derive(Debug, Clone)]
pub struct TensorSystem {
    left: MatrixOperatorSystem,
    right: MatrixOperatorSystem,
    product: MatrixOperatorSystem,
    idempotents: Arc<[OnceLock<Option<CMatrix>>; 2]>,
}

impl TensorSystem {
    pub fn new(left: &MatrixOperatorSystem, right: &MatrixOperatorSystem) -> Self {
        Self {
            left: left.clone(),
            right: right.clone(),
            product: tensor_product(left, right),
            idempotents: Arc::new([OnceLock::new(), OnceLock::new()]),
        }
    }

    pub fn left(&self) -> &MatrixOperatorSystem {
        &self.left
    }

    pub fn right(&self) -> &MatrixOperatorSystem {
        &self.right
    }

    pub fn product(&self) -> &MatrixOperatorSystem {
        &self.product
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }

    pub fn swapped(&self) -> Self {
        Self::new(&self.right, &self.left)
    }

    /// Coefficient index of `s_a ⊗ t_b`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.right.dim() + b
    }

    /// `[Π(E_ab)]` for a UCP idempotent onto the left factor, computed once.
    pub fn left_idempotent(&self) -> Option<&CMatrix> {
        self.idempotents[0].get_or_init(|| idempotent_block(&self.left)).as_ref()
    }

    pub fn right_idempotent(&self) -> Option<&CMatrix> {
        self.idempotents[1].get_or_init(|| idempotent_block(&self.right)).as_ref()
    }

    pub(crate) fn check(&self, x: &LevelElement) -> Result<()> {
        if !x.system().ptr_eq(&self.product) && !x.system().same_span(&self.product) {
            return Err(Error::Malformed("element does not live in this tensor product".into()));
        }
        Ok(())
    }

    /// Reads a realized level-`n` matrix as an element of `S ⊗ T`.
    pub fn element(&self, n: usize, x: &CMatrix, tol: f64) -> Result<LevelElement> {
        LevelElement::from_realization(&self.product, n, x, tol)
    }

    /// `P ⊗ Q` for single-level elements `P ∈ S`, `Q ∈ T` given as matrices.
    pub fn simple(&self, p: &CMatrix, q: &CMatrix) -> Result<LevelElement> {
        self.element(1, &p.kron(q), crate::system::MEMBERSHIP_TOL * (1.0 + p.frobenius_norm() * q.frobenius_norm()))
    }

    /// The same element read in `T ⊗ S`, with each `M_p ⊗ M_q` block flipped.
    pub fn swap_element(&self, x: &LevelElement) -> Result<LevelElement> {
        self.check(x)?;
        let (p, q) = (self.left.ambient_dim(), self.right.ambient_dim());
        let n = x.level();
        let r = x.realize();
        let perm = |idx: usize| {
            let (i, u, v) = (idx / (p * q), (idx / q) % p, idx % q);
            i * p * q + v * p + u
        };
        let mut out = CMatrix::zeros(r.rows(), r.cols());
        for a in 0..r.rows() {
            for b in 0..r.cols() {
                out[(perm(a), perm(b))] = r[(a, b)];
            }
        }
        LevelElement::from_realization(&tensor_product(&self.right, &self.left), n, &out, 1e-8 * (1.0 + r.frobenius_norm()))
    }
}

/// Exact minimal-cone membership: the realization has no eigenvalue below
/// `-tol`.
pub fn min_member(ts: &TensorSystem, x: &LevelElement, tol: f64) -> Result<bool> {
    ts.check(x)?;
    Ok(eig_herm(&x.realize())?.min() >= -tol)
}

/// Result of the state-sampling test for the minimal cone.
#[derive(Debug, Clone)]
pub struct StateSampling {
    pub member: bool,
    pub min_eig: f64,
    /// Seeds of the first `(φ, ψ)` pair whose amplification is not PSD.
    pub witness: Option<(u64, u64)>,
}

/// Necessary test for the minimal cone: `(φ ⊗ ψ)^{(n)}(X) ⪰ 0` for sampled
/// UCP maps `φ: S → M_k`, `ψ: T → M_m`.
pub fn min_member_by_states(ts: &TensorSystem, x: &LevelElement, samples: usize, seed: u64, tol: f64) -> Result<StateSampling> {
    ts.check(x)?;
    if x.hermitian_residual() > 1e-9 * (1.0 + x.realize().frobenius_norm()) {
        return Err(Error::NonHermitian {
            residual: x.hermitian_residual(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, q) = (ts.left.ambient_dim(), ts.right.ambient_dim());
    let mut min_eig = f64::INFINITY;
    let mut witness = None;
    let xr = x.realize();
    let scale = 1.0 + xr.frobenius_norm();
    for _ in 0..samples {
        use rand::Rng;
        let (s1, s2): (u64, u64) = (rng.gen(), rng.gen());
        let k = rng.gen_range(1..=p);
        let m = rng.gen_range(1..=q);
        let phi = random_ucp_to_matrices(&ts.left, k, s1);
        let psi = random_ucp_to_matrices(&ts.right, m, s2);
        let joint: SystemMap = tensor_maps(&phi, &psi);
        let y = joint.amplify(x);
        let l = eig_herm(&y.hermitian_part())?.min();
        if l < min_eig {
            min_eig = l;
        }
        if l < -tol * scale && witness.is_none() {
            witness = Some((s1, s2));
        }
    }
    Ok(StateSampling {
        member: witness.is_none(),
        min_eig,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{random_positive, tri3};

    #[test]
    fn unit_and_products_are_min_positive() {
        let ts = TensorSystem::new(&tri3(), &MatrixOperatorSystem::full(2));
        assert!(min_member(&ts, &LevelElement::unit(ts.product(), 2), 1e-9).unwrap());
        let p = random_positive(&tri3(), 1, 1).realize();
        let q = random_positive(&MatrixOperatorSystem::full(2), 1, 2).realize();
        let x = ts.simple(&p, &q).unwrap();
        assert!(min_member(&ts, &x, 1e-9).unwrap());
        assert!(min_member_by_states(&ts, &x, 30, 4, 1e-9).unwrap().member);
    }

    #[test]
    fn negative_element_is_rejected_by_both() {
        let ts = TensorSystem::new(&MatrixOperatorSystem::full(2), &MatrixOperatorSystem::full(2));
        // ambient eigenvalues {1, 1, 1, -0.5}
        let v = [0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()];
        let vv = CMatrix::from_fn(4, 4, |i, j| crate::conic::C64::new(v[i] * v[j], 0.0));
        let x = &CMatrix::identity(4) - &vv.scale(1.5);
        let x = ts.element(1, &x, 1e-12).unwrap();
        assert!(!min_member(&ts, &x, 1e-9).unwrap());
        let r = min_member_by_states(&ts, &x, 200, 7, 1e-9).unwrap();
        assert!(!r.member);
        assert!(r.witness.is_some());
    }

    #[test]
    fn swap_round_trip() {
        let ts = TensorSystem::new(&tri3(), &MatrixOperatorSystem::full(2));
        let x = random_positive(ts.product(), 2, 3);
        let y = ts.swap_element(&x).unwrap();
        let back = ts.swapped().swap_element(&y).unwrap();
        assert!((&back.realize() - &x.realize()).frobenius_norm() < 1e-10);
        let e1 = eig_herm(&x.realize()).unwrap().values;
        let e2 = eig_herm(&y.realize()).unwrap().values;
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
