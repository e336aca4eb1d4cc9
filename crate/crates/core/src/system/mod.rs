//! Concrete operator systems `S ⊆ M_d` and their matrix-level cones.

mod io;
mod level;

use std::fmt;
use std::sync::Arc;

use crate::conic::{CMatrix, HermMatrix, C64};
use crate::error::{Error, Result};

pub use io::{matrix_from_pairs, matrix_to_pairs, SystemFile};

pub use level::{cone_member, random_positive, LevelElement, SystemElement};

/// Default tolerance for cone and span membership decisions.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Candidates whose Gram-Schmidt remainder falls below this (relative to
/// their own norm) are treated as already in the span.
const DEPENDENCE_TOL: f64 = 1e-10;

/// A unital, adjoint-closed subspace of `M_d`, carried by a self-adjoint
/// basis that is orthogonal under the trace inner product. `basis[0]` is
/// `I_d`; every other basis element has unit Frobenius norm.
///
/// Cloning is cheap; clones share the basis.
#[derive(Clone)]
pub struct MatrixOperatorSystem {
    inner: Arc<Inner>,
}

struct Inner {
    d: usize,
    generators: Vec<CMatrix>,
    basis: Vec<HermMatrix>,
    norms2: Vec<f64>,
}

/// Outcome of a span membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
}

impl fmt::Debug for MatrixOperatorSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixOperatorSystem")
            .field("ambient_dim", &self.inner.d)
            .field("dim", &self.dim())
            .finish()
    }
}

/// Builds the operator system spanned by `generators`, their adjoints and
/// the identity.
pub fn make_system(d: usize, generators: &[CMatrix]) -> Result<MatrixOperatorSystem> {
    MatrixOperatorSystem::new(d, generators.to_vec())
}

impl MatrixOperatorSystem {
    pub fn new(d: usize, generators: Vec<CMatrix>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Malformed("ambient dimension must be positive".into()));
        }
        for g in &generators {
            if g.rows() != d || g.cols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: g.rows().max(g.cols()),
                });
            }
            if !g.is_finite() {
                return Err(Error::Malformed("generator has non-finite entries".into()));
            }
        }
        let half_i = C64::new(0.0, -0.5);
        let mut candidates = Vec::with_capacity(2 * generators.len());
        for g in &generators {
            let ga = g.adjoint();
            candidates.push((g + &ga).scale(0.5));
            candidates.push((g - &ga).scale_c(half_i));
        }
        let mut basis = vec![CMatrix::identity(d)];
        let mut norms2 = vec![d as f64];
        for c in candidates {
            if let Some(b) = orthogonalize(&basis, &norms2, c) {
                basis.push(b);
                norms2.push(1.0);
            }
        }
        Ok(Self::assemble(d, generators, basis, norms2))
    }

    /// Adopts a basis that is already self-adjoint and trace-orthogonal with
    /// `basis[0] = I_d`. Generators are recorded as the basis itself.
    pub fn from_orthogonal_basis(d: usize, basis: Vec<CMatrix>) -> Result<Self> {
        if basis.is_empty() || basis[0] != CMatrix::identity(d) {
            return Err(Error::Malformed("first basis element must be the identity".into()));
        }
        let norms2: Vec<f64> = basis.iter().map(|b| b.inner(b).re).collect();
        debug_assert!(basis.iter().enumerate().all(|(i, a)| {
            basis[..i]
                .iter()
                .all(|b| a.inner(b).norm() <= 1e-9 * (1.0 + norms2[0]))
        }));
        Ok(Self::assemble(d, basis.clone(), basis, norms2))
    }

    fn assemble(d: usize, generators: Vec<CMatrix>, basis: Vec<CMatrix>, norms2: Vec<f64>) -> Self {
        let basis = basis
            .into_iter()
            .map(|b| HermMatrix::new(b).expect("basis elements are hermitian"))
            .collect();
        Self {
            inner: Arc::new(Inner {
                d,
                generators,
                basis,
                norms2,
            }),
        }
    }

    /// The full matrix algebra `M_d`.
    pub fn full(d: usize) -> Self {
        let mut basis = vec![CMatrix::identity(d)];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // traceless diagonal: normalized differences of the first k units
        for k in 1..d {
            let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
            let mut m = CMatrix::zeros(d, d);
            for i in 0..k {
                m[(i, i)] = C64::new(c, 0.0);
            }
            m[(k, k)] = C64::new(-(k as f64) * c, 0.0);
            basis.push(m);
        }
        for i in 0..d {
            for j in i + 1..d {
                let mut re = CMatrix::zeros(d, d);
                re[(i, j)] = C64::new(s, 0.0);
                re[(j, i)] = C64::new(s, 0.0);
                basis.push(re);
                let mut im = CMatrix::zeros(d, d);
                im[(i, j)] = C64::new(0.0, -s);
                im[(j, i)] = C64::new(0.0, s);
                basis.push(im);
            }
        }
        let generators: Vec<CMatrix> = (0..d)
            .flat_map(|i| (0..d).map(move |j| CMatrix::unit(d, i, j)))
            .collect();
        let norms2 = basis.iter().map(|b| b.inner(b).re).collect();
        Self::assemble(d, generators, basis, norms2)
    }

    /// `span{I_d}`.
    pub fn scalars(d: usize) -> Self {
        Self::assemble(d, Vec::new(), vec![CMatrix::identity(d)], vec![d as f64])
    }

    pub fn ambient_dim(&self) -> usize {
        self.inner.d
    }

    pub fn dim(&self) -> usize {
        self.inner.basis.len()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.inner.d * self.inner.d
    }

    pub fn basis(&self) -> &[HermMatrix] {
        &self.inner.basis
    }

    /// Squared Frobenius norms of the basis elements.
    pub fn basis_norms2(&self) -> &[f64] {
        &self.inner.norms2
    }

    /// The generators exactly as supplied at construction.
    pub fn generators(&self) -> &[CMatrix] {
        &self.inner.generators
    }

    pub fn unit(&self) -> CMatrix {
        CMatrix::identity(self.inner.d)
    }

    /// True when both handles share the same construction.
    pub fn ptr_eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// True when the two systems have the same span.
    pub fn same_span(&self, other: &Self) -> bool {
        self.inner.d == other.inner.d
            && self.dim() == other.dim()
            && other
                .basis()
                .iter()
                .all(|b| self.residual(b.matrix()) <= 1e-9 * (1.0 + b.matrix().frobenius_norm()))
    }

    fn check_dim(&self, a: &CMatrix) -> Result<()> {
        if a.rows() != self.inner.d || a.cols() != self.inner.d {
            return Err(Error::DimensionMismatch {
                expected: self.inner.d,
                found: a.rows().max(a.cols()),
            });
        }
        Ok(())
    }

    /// Coefficients of the orthogonal projection of `a` onto the span.
    pub fn coefficients(&self, a: &CMatrix) -> Result<Vec<C64>> {
        self.check_dim(a)?;
        Ok(self.coefficients_unchecked(a))
    }

    pub(crate) fn coefficients_unchecked(&self, a: &CMatrix) -> Vec<C64> {
        self.inner
            .basis
            .iter()
            .zip(&self.inner.norms2)
            .map(|(b, n2)| b.matrix().inner(a) / *n2)
            .collect()
    }

    /// `Σ c_a b_a`
    pub fn realize(&self, coeffs: &[C64]) -> CMatrix {
        assert_eq!(coeffs.len(), self.dim(), "coefficient count");
        let d = self.inner.d;
        let mut out = CMatrix::zeros(d, d);
        for (c, b) in coeffs.iter().zip(&self.inner.basis) {
            if *c != C64::new(0.0, 0.0) {
                out.axpy(*c, b.matrix());
            }
        }
        out
    }

    pub fn realize_real(&self, coeffs: &[f64]) -> CMatrix {
        let c: Vec<C64> = coeffs.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.realize(&c)
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, a: &CMatrix) -> Result<CMatrix> {
        Ok(self.realize(&self.coefficients(a)?))
    }

    pub(crate) fn residual(&self, a: &CMatrix) -> f64 {
        (a - &self.realize(&self.coefficients_unchecked(a))).frobenius_norm()
    }

    /// Whether `a` lies in the span, by the Frobenius norm of its
    /// projection remainder.
    pub fn contains(&self, a: &CMatrix, tol: f64) -> Result<Membership> {
        self.check_dim(a)?;
        let residual = self.residual(a);
        Ok(Membership {
            member: residual <= tol,
            residual,
        })
    }

    /// Trace-orthonormal hermitian basis of the complement of the span in
    /// the hermitian part of `M_d`.
    pub fn perp_basis(&self) -> Vec<CMatrix> {
        let mut basis: Vec<CMatrix> = self.basis().iter().map(|b| b.matrix().clone()).collect();
        let mut norms2 = self.inner.norms2.clone();
        let mut out = Vec::new();
        for c in Self::full(self.inner.d).basis().iter().skip(1) {
            if let Some(r) = orthogonalize(&basis, &norms2, c.matrix().clone()) {
                basis.push(r.clone());
                norms2.push(1.0);
                out.push(r);
            }
        }
        out
    }

    /// Whether the system is closed under products of basis elements.
    pub fn is_closed_under_products(&self) -> bool {
        let b = self.basis();
        (1..b.len()).all(|i| {
            (i..b.len()).all(|j| {
                let prod = b[i].matrix().matmul(b[j].matrix());
                self.residual(&prod) <= 1e-9
            })
        })
    }
}

/// Gram-Schmidt step with one round of reorthogonalization; returns the
/// normalized remainder or `None` when `c` is already in the span.
fn orthogonalize(basis: &[CMatrix], norms2: &[f64], mut c: CMatrix) -> Option<CMatrix> {
    let n0 = c.frobenius_norm();
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for (b, n2) in basis.iter().zip(norms2) {
            let coef = b.inner(&c) / *n2;
            c.axpy(-coef, b);
        }
    }
    let n = c.frobenius_norm();
    if n <= DEPENDENCE_TOL * n0.max(1.0) {
        return None;
    }
    // remainders of hermitian inputs are hermitian up to rounding
    Some(c.hermitian_part().scale(1.0 / n))
}

/// `S ⊗ T ⊆ M_p ⊗ M_q` with the product basis `s_a ⊗ t_b` at index
/// `a·dim T + b`. Products of trace-orthogonal bases stay orthogonal.
pub fn tensor_product(s: &MatrixOperatorSystem, t: &MatrixOperatorSystem) -> MatrixOperatorSystem {
    let d = s.ambient_dim() * t.ambient_dim();
    let mut basis = Vec::with_capacity(s.dim() * t.dim());
    for a in s.basis() {
        for b in t.basis() {
            basis.push(a.matrix().kron(b.matrix()));
        }
    }
    let norms2 = s
        .basis_norms2()
        .iter()
        .flat_map(|x| t.basis_norms2().iter().map(move |y| x * y))
        .collect();
    MatrixOperatorSystem::assemble(d, basis.clone(), basis, norms2)
}

/// `TRI3 = span{E11, E12, E21, E22, E23, E32, E33} ⊂ M_3`.
pub fn tri3() -> MatrixOperatorSystem {
    let gens = [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
        .iter()
        .map(|&(i, j)| CMatrix::unit(3, i, j))
        .collect::<Vec<_>>();
    make_system(3, &gens).expect("valid generators")
}

/// Diagonal matrices in `M_d`.
pub fn diagonal(d: usize) -> MatrixOperatorSystem {
    let gens = (0..d).map(|i| CMatrix::unit(d, i, i)).collect::<Vec<_>>();
    make_system(d, &gens).expect("valid generators")
}

/// A random operator system of dimension `dim` in `M_d`: the identity plus
/// `dim - 1` random hermitian generators.
pub fn random_system(d: usize, dim: usize, seed: u64) -> MatrixOperatorSystem {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    assert!(dim >= 1 && dim <= d * d);
    let gens: Vec<CMatrix> = (0..dim - 1).map(|_| CMatrix::random_hermitian(d, &mut rng)).collect();
    make_system(d, &gens).expect("valid generators")
}

/// Systems addressable by name from the command line and the demo.
pub fn named_system(name: &str) -> Option<MatrixOperatorSystem> {
    match name {
        "tri3" => Some(tri3()),
        "m1" => Some(MatrixOperatorSystem::full(1)),
        "m2" => Some(MatrixOperatorSystem::full(2)),
        "m3" => Some(MatrixOperatorSystem::full(3)),
        "diag3" => Some(diagonal(3)),
        "trivial2" => Some(MatrixOperatorSystem::scalars(2)),
        _ => None,
    }
}
