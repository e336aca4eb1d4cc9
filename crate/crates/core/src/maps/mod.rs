//! Linear maps between operator systems: Choi calculus, complete positivity
//! checks, Arveson extension and the two normalizations used when
//! factoring maps through matrix algebras.

mod cp;
mod io;
mod normalize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::system::{tensor_product, LevelElement, MatrixOperatorSystem};

pub use cp::{arveson_extend, cp_extension_into, is_cp_full, is_cp_subsystem, verify_ucp, ChoiCertificate, CpCertificate, CpWitness, UcpCheck};
pub use io::{MapFile, SystemRef};
pub use normalize::{normalize_to_ucp, unitalize_psi, NormalizedMap};

/// Images of non-self-adjoint-preserving maps are rejected above this
/// imaginary coefficient size.
const ADJOINT_TOL: f64 = 1e-9;

/// A linear map `S → T` between concrete systems, stored as the real
/// matrix taking hermitian basis coefficients of `S` to those of `T`
/// (`action[b·dim S + a]` is the `t_b`-coefficient of the image of `s_a`).
///
/// Only adjoint-preserving maps are representable, which covers every
/// completely positive map.
#[derive(Debug, Clone)]
pub struct SystemMap {
    domain: MatrixOperatorSystem,
    codomain: MatrixOperatorSystem,
    action: Vec<f64>,
}

impl SystemMap {
    pub fn new(domain: &MatrixOperatorSystem, codomain: &MatrixOperatorSystem, action: Vec<f64>) -> Result<Self> {
        let expected = domain.dim() * codomain.dim();
        if action.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: action.len(),
            });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("non-finite map action".into()));
        }
        Ok(Self {
            domain: domain.clone(),
            codomain: codomain.clone(),
            action,
        })
    }

    /// Tabulates `f` on the domain basis. Fails if some image leaves the
    /// codomain or the map does not preserve adjoints.
    pub fn from_fn(
        domain: &MatrixOperatorSystem,
        codomain: &MatrixOperatorSystem,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let (m, n) = (domain.dim(), codomain.dim());
        let mut action = vec![0.0; m * n];
        for (a, s) in domain.basis().iter().enumerate() {
            let y = f(s.matrix());
            let scale = 1.0 + y.max_abs();
            let mem = codomain.contains(&y, 1e-9 * scale)?;
            if !mem.member {
                return Err(Error::NotInSystem { residual: mem.residual });
            }
            let c = codomain.coefficients(&y)?;
            for (b, cb) in c.iter().enumerate() {
                if cb.im.abs() > ADJOINT_TOL * scale {
                    return Err(Error::Malformed("map does not preserve adjoints".into()));
                }
                action[b * m + a] = cb.re;
            }
        }
        Self::new(domain, codomain, action)
    }

    /// The map `M_p → M_q` with Choi matrix `c = [Φ(E_ij)]`.
    pub fn from_choi(p: usize, q: usize, c: &CMatrix) -> Result<Self> {
        if c.rows() != p * q || c.cols() != p * q {
            return Err(Error::DimensionMismatch {
                expected: p * q,
                found: c.rows(),
            });
        }
        let c = c.hermitian_part();
        Self::from_fn(&MatrixOperatorSystem::full(p), &MatrixOperatorSystem::full(q), |x| {
            apply_choi(p, q, &c, x)
        })
    }

    pub fn identity(s: &MatrixOperatorSystem) -> Self {
        let m = s.dim();
        let mut action = vec![0.0; m * m];
        for a in 0..m {
            action[a * m + a] = 1.0;
        }
        Self::new(s, s, action).expect("square action")
    }

    pub fn domain(&self) -> &MatrixOperatorSystem {
        &self.domain
    }

    pub fn codomain(&self) -> &MatrixOperatorSystem {
        &self.codomain
    }

    pub fn action(&self) -> &[f64] {
        &self.action
    }

    pub fn apply_coeffs(&self, x: &[C64]) -> Vec<C64> {
        let m = self.domain.dim();
        (0..self.codomain.dim())
            .map(|b| {
                let row = &self.action[b * m..(b + 1) * m];
                row.iter().zip(x).map(|(w, c)| c * *w).sum()
            })
            .collect()
    }

    /// `Φ(x)` for `x` in the domain (projected onto it first).
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let c = self.domain.coefficients(x)?;
        Ok(self.codomain.realize(&self.apply_coeffs(&c)))
    }

    /// `Φ^{(n)}(X) = [Φ(x_ij)]`, realized.
    pub fn amplify(&self, x: &LevelElement) -> CMatrix {
        let n = x.level();
        let q = self.codomain.ambient_dim();
        let mut out = CMatrix::zeros(n * q, n * q);
        for i in 0..n {
            for j in 0..n {
                let y = self.codomain.realize(&self.apply_coeffs(x.block(i, j).coeffs()));
                out.set_block(i * q, j * q, &y);
            }
        }
        out
    }

    /// Choi matrix `[Φ(E_ij)]`; needs a full matrix algebra as domain.
    pub fn choi_full(&self) -> Result<CMatrix> {
        if !self.domain.is_full() {
            return Err(Error::DomainNotFull {
                dim: self.domain.dim(),
                ambient: self.domain.ambient_dim(),
            });
        }
        let p = self.domain.ambient_dim();
        let q = self.codomain.ambient_dim();
        let mut c = CMatrix::zeros(p * q, p * q);
        for i in 0..p {
            for j in 0..p {
                let y = self.apply(&CMatrix::unit(p, i, j))?;
                c.set_block(i * q, j * q, &y);
            }
        }
        Ok(c.hermitian_part())
    }

    /// `‖Φ(1) - 1‖_F`
    pub fn unital_residual(&self) -> f64 {
        let y = self.apply(&self.domain.unit()).expect("unit lies in the domain");
        (&y - &self.codomain.unit()).frobenius_norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            action: self.action.iter().map(|v| v * s).collect(),
        }
    }

    /// Restriction to a subsystem of the domain.
    pub fn restrict(&self, sub: &MatrixOperatorSystem) -> Result<Self> {
        Self::from_fn(sub, &self.codomain, |x| self.apply(x).expect("dimensions agree"))
    }

    /// The same map with a larger codomain.
    pub fn with_codomain(&self, codomain: &MatrixOperatorSystem) -> Result<Self> {
        Self::from_fn(&self.domain, codomain, |x| self.apply(x).expect("dimensions agree"))
    }
}

/// `Φ(X)_{uv} = Σ_ij X_ij C_{(i,u),(j,v)}`
pub(crate) fn apply_choi(p: usize, q: usize, c: &CMatrix, x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(q, q);
    for i in 0..p {
        for j in 0..p {
            let xij = x[(i, j)];
            if xij == C64::new(0.0, 0.0) {
                continue;
            }
            for u in 0..q {
                for v in 0..q {
                    out[(u, v)] += xij * c[(i * q + u, j * q + v)];
                }
            }
        }
    }
    out
}

/// `ψ ∘ φ`
pub fn compose(phi: &SystemMap, psi: &SystemMap) -> Result<SystemMap> {
    if phi.codomain.ambient_dim() != psi.domain.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.domain.ambient_dim(),
            found: phi.codomain.ambient_dim(),
        });
    }
    SystemMap::from_fn(&phi.domain, &psi.codomain, |x| {
        let y = phi.apply(x).expect("x lies in the domain");
        psi.apply(&y).expect("dimensions agree")
    })
}

/// `φ ⊗ ψ : S1 ⊗ S2 → T1 ⊗ T2` on the product bases.
pub fn tensor_maps(phi: &SystemMap, psi: &SystemMap) -> SystemMap {
    let dom = tensor_product(&phi.domain, &psi.domain);
    let cod = tensor_product(&phi.codomain, &psi.codomain);
    let (m1, m2) = (phi.domain.dim(), psi.domain.dim());
    let (n1, n2) = (phi.codomain.dim(), psi.codomain.dim());
    let mut action = vec![0.0; m1 * m2 * n1 * n2];
    let cols = m1 * m2;
    for b1 in 0..n1 {
        for b2 in 0..n2 {
            for a1 in 0..m1 {
                let w1 = phi.action[b1 * m1 + a1];
                if w1 == 0.0 {
                    continue;
                }
                for a2 in 0..m2 {
                    action[(b1 * n2 + b2) * cols + a1 * m2 + a2] = w1 * psi.action[b2 * m2 + a2];
                }
            }
        }
    }
    SystemMap::new(&dom, &cod, action).expect("sizes agree")
}

/// `X ↦ V* X V` restricted to `S`, with `V : ℂ^k → ℂ^d`.
pub fn compression(s: &MatrixOperatorSystem, v: &CMatrix) -> Result<SystemMap> {
    if v.rows() != s.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.ambient_dim(),
            found: v.rows(),
        });
    }
    let va = v.adjoint();
    SystemMap::from_fn(s, &MatrixOperatorSystem::full(v.cols()), |x| va.matmul(x).matmul(v))
}

/// `X ↦ Σ_r K_r* X K_r` restricted to `S`.
pub fn kraus(s: &MatrixOperatorSystem, ks: &[CMatrix]) -> Result<SystemMap> {
    let k = ks.first().map(|m| m.cols()).unwrap_or(1);
    SystemMap::from_fn(s, &MatrixOperatorSystem::full(k), |x| {
        let mut out = CMatrix::zeros(k, k);
        for kr in ks {
            out += &kr.adjoint().matmul(x).matmul(kr);
        }
        out
    })
}

/// An isometry `ℂ^k → ℂ^rows` from the polar part of a gaussian matrix.
pub fn random_isometry(rows: usize, k: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    assert!(rows >= k, "isometry needs rows ≥ k");
    let g = CMatrix::random_gaussian(rows, k, rng);
    let gram = g.adjoint().matmul(&g);
    let inv_sqrt = crate::conic::eig_herm(&gram)
        .expect("Gram matrices are hermitian")
        .apply(|l| 1.0 / l.max(1e-300).sqrt());
    g.matmul(&inv_sqrt)
}

/// A random UCP map `S → M_k`: the restriction of `X ↦ V*(X ⊗ I_r)V` for
/// a random isometry `V : ℂ^k → ℂ^d ⊗ ℂ^r`.
pub fn random_ucp_to_matrices(s: &MatrixOperatorSystem, k: usize, seed: u64) -> SystemMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = s.ambient_dim();
    let r = k.div_ceil(d) + 1;
    let v = random_isometry(d * r, k, &mut rng);
    let ks: Vec<CMatrix> = (0..r)
        .map(|t| CMatrix::from_fn(d, k, |i, j| v[(i * r + t, j)]))
        .collect();
    kraus(s, &ks).expect("Kraus images lie in M_k")
}

/// A random state `A ↦ tr(ρA)` on `M_n`, as its density matrix.
pub fn random_density(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::random_gaussian(n, n, rng);
    let r = g.matmul(&g.adjoint());
    let t = r.trace().re;
    r.scale(1.0 / t)
}
