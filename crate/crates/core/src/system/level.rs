use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::MatrixOperatorSystem;
use crate::conic::{eig_herm, CMatrix, C64};
use crate::error::{Error, Result};

/// An element of `S`, by its coefficients over the system basis.
#[derive(Debug, Clone)]
pub struct SystemElement {
    system: MatrixOperatorSystem,
    coeffs: Vec<C64>,
}

impl SystemElement {
    pub fn new(system: &MatrixOperatorSystem, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            system: system.clone(),
            coeffs,
        })
    }

    /// Projects `a` onto the system; fails if the remainder exceeds `tol`.
    pub fn from_matrix(system: &MatrixOperatorSystem, a: &CMatrix, tol: f64) -> Result<Self> {
        let m = system.contains(a, tol)?;
        if !m.member {
            return Err(Error::NotInSystem { residual: m.residual });
        }
        Self::new(system, system.coefficients(a)?)
    }

    pub fn system(&self) -> &MatrixOperatorSystem {
        &self.system
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn realize(&self) -> CMatrix {
        self.system.realize(&self.coeffs)
    }

    /// Self-adjoint elements have real coefficients in the hermitian basis.
    pub fn is_selfadjoint(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.im.abs() <= tol)
    }
}

/// An element of `M_n(S)`: an `n×n` array of system elements, stored as
/// coefficients at `(i·n + j)·m + a`.
#[derive(Debug, Clone)]
pub struct LevelElement {
    system: MatrixOperatorSystem,
    n: usize,
    coeffs: Vec<C64>,
}

impl LevelElement {
    pub fn new(system: &MatrixOperatorSystem, n: usize, coeffs: Vec<C64>) -> Result<Self> {
        let expected = n * n * system.dim();
        if n == 0 || coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self {
            system: system.clone(),
            n,
            coeffs,
        })
    }

    pub fn from_blocks(system: &MatrixOperatorSystem, blocks: &[Vec<SystemElement>]) -> Result<Self> {
        let n = blocks.len();
        let mut coeffs = Vec::with_capacity(n * n * system.dim());
        for row in blocks {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for e in row {
                if e.coeffs.len() != system.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: system.dim(),
                        found: e.coeffs.len(),
                    });
                }
                coeffs.extend_from_slice(&e.coeffs);
            }
        }
        Self::new(system, n, coeffs)
    }

    /// `I_n ⊗ 1_S`
    pub fn unit(system: &MatrixOperatorSystem, n: usize) -> Self {
        let m = system.dim();
        let mut coeffs = vec![C64::new(0.0, 0.0); n * n * m];
        for i in 0..n {
            coeffs[(i * n + i) * m] = C64::new(1.0, 0.0);
        }
        Self {
            system: system.clone(),
            n,
            coeffs,
        }
    }

    /// Blockwise projection of an `(n·d)×(n·d)` matrix; returns the element
    /// and the Frobenius norm of the discarded remainder.
    pub fn project_realization(system: &MatrixOperatorSystem, n: usize, x: &CMatrix) -> Result<(Self, f64)> {
        let d = system.ambient_dim();
        if x.rows() != n * d || x.cols() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: x.rows().max(x.cols()),
            });
        }
        let mut coeffs = Vec::with_capacity(n * n * system.dim());
        for i in 0..n {
            for j in 0..n {
                coeffs.extend(system.coefficients_unchecked(&x.block(i * d, j * d, d, d)));
            }
        }
        let elem = Self::new(system, n, coeffs)?;
        let residual = (x - &elem.realize()).frobenius_norm();
        Ok((elem, residual))
    }

    /// Reads an element off its realization; fails with `NotInSystem` when
    /// some block leaves the span by more than `tol`.
    pub fn from_realization(system: &MatrixOperatorSystem, n: usize, x: &CMatrix, tol: f64) -> Result<Self> {
        let (elem, residual) = Self::project_realization(system, n, x)?;
        if residual > tol {
            return Err(Error::NotInSystem { residual });
        }
        Ok(elem)
    }

    pub fn system(&self) -> &MatrixOperatorSystem {
        &self.system
    }

    pub fn level(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn block(&self, i: usize, j: usize) -> SystemElement {
        let m = self.system.dim();
        let start = (i * self.n + j) * m;
        SystemElement {
            system: self.system.clone(),
            coeffs: self.coeffs[start..start + m].to_vec(),
        }
    }

    /// The `(n·d)×(n·d)` matrix `[x_ij]`.
    pub fn realize(&self) -> CMatrix {
        let d = self.system.ambient_dim();
        let m = self.system.dim();
        let mut out = CMatrix::zeros(self.n * d, self.n * d);
        for i in 0..self.n {
            for j in 0..self.n {
                let start = (i * self.n + j) * m;
                let b = self.system.realize(&self.coeffs[start..start + m]);
                out.set_block(i * d, j * d, &b);
            }
        }
        out
    }

    /// Largest deviation from `x_ij = x_ji*` in coefficient terms.
    pub fn hermitian_residual(&self) -> f64 {
        let m = self.system.dim();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                for a in 0..m {
                    let x = self.coeffs[(i * self.n + j) * m + a];
                    let y = self.coeffs[(j * self.n + i) * m + a];
                    worst = worst.max((x - y.conj()).norm());
                }
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            system: self.system.clone(),
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || !self.system.ptr_eq(&other.system) && !self.system.same_span(&other.system) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self::new(&self.system, self.n, coeffs)
    }
}

/// Whether `X ∈ M_n(S)^+`: the realization has no eigenvalue below `-tol`.
pub fn cone_member(x: &LevelElement, tol: f64) -> Result<bool> {
    let r = x.realize();
    Ok(eig_herm(&r)?.min() >= -tol)
}

/// A random interior point of `M_n(S)^+`: gaussian hermitian coefficients,
/// shifted by `(|λ_min| + u)·I_n ⊗ 1` with `u` uniform on `[0, 1]`.
pub fn random_positive(system: &MatrixOperatorSystem, n: usize, seed: u64) -> LevelElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = system.dim();
    let mut coeffs = vec![C64::new(0.0, 0.0); n * n * m];
    for i in 0..n {
        for j in i..n {
            for a in 0..m {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = if i == j { 0.0 } else { rng.sample(StandardNormal) };
                coeffs[(i * n + j) * m + a] = C64::new(re, im);
                coeffs[(j * n + i) * m + a] = C64::new(re, -im);
            }
        }
    }
    let u: f64 = rng.gen_range(0.0..=1.0);
    let mut x = LevelElement::new(system, n, coeffs).expect("consistent sizes");
    let lmin = eig_herm(&x.realize()).expect("hermitian by construction").min();
    let shift = lmin.abs() + u;
    for i in 0..n {
        x.coeffs[(i * n + i) * m] += shift;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{tri3, MEMBERSHIP_TOL};
    use proptest::prelude::*;

    #[test]
    fn unit_is_positive() {
        let s = tri3();
        assert!(cone_member(&LevelElement::unit(&s, 1), MEMBERSHIP_TOL).unwrap());
        assert!(cone_member(&LevelElement::unit(&s, 3), MEMBERSHIP_TOL).unwrap());
    }

    #[test]
    fn symmetric_unit_is_not_positive() {
        let s = MatrixOperatorSystem::full(2);
        let x = &CMatrix::unit(2, 0, 1) + &CMatrix::unit(2, 1, 0);
        let e = LevelElement::from_realization(&s, 1, &x, 1e-12).unwrap();
        assert!(!cone_member(&e, MEMBERSHIP_TOL).unwrap());
        assert!((eig_herm(&e.realize()).unwrap().min() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_level_element_is_rejected() {
        let s = MatrixOperatorSystem::full(2);
        let e = LevelElement::from_realization(&s, 1, &CMatrix::unit(2, 0, 1), 1e-12).unwrap();
        assert!(matches!(cone_member(&e, 1e-9), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn shifted_level_two_element_is_positive() {
        let s = tri3();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = CMatrix::random_hermitian(6, &mut rng);
        let (x0, _) = LevelElement::project_realization(&s, 2, &raw).unwrap();
        let norm = x0.realize().op_norm();
        let shifted = x0.add(&LevelElement::unit(&s, 2).scale(norm + 1.0)).unwrap();
        assert!(cone_member(&shifted, MEMBERSHIP_TOL).unwrap());
        let lmin = eig_herm(&shifted.realize()).unwrap().min();
        assert!(lmin >= 1.0 - 1e-9);
    }

    #[test]
    fn random_positive_on_scalars_is_multiple_of_unit() {
        let s = MatrixOperatorSystem::scalars(2);
        for seed in 0..5 {
            let x = random_positive(&s, 1, seed);
            assert_eq!(x.coeffs().len(), 1);
            assert!(x.coeffs()[0].re >= 0.0 && x.coeffs()[0].im == 0.0);
        }
    }

    #[test]
    fn random_positive_is_deterministic() {
        let s = tri3();
        let a = random_positive(&s, 2, 7);
        let b = random_positive(&s, 2, 7);
        assert_eq!(a.coeffs(), b.coeffs());
        assert!(cone_member(&a, 1e-9).unwrap());
    }

    #[test]
    fn archimedean_shift_equals_negative_min_eig() {
        let s = tri3();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let raw = CMatrix::random_hermitian(6, &mut rng);
            let (x, _) = LevelElement::project_realization(&s, 2, &raw).unwrap();
            let lmin = eig_herm(&x.realize()).unwrap().min();
            // bisection for the smallest admissible shift
            let (mut lo, mut hi) = (-10.0f64, 10.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let y = x.add(&LevelElement::unit(&s, 2).scale(mid)).unwrap();
                if cone_member(&y, 0.0).unwrap() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!((hi - (-lmin)).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cone_is_convex(s1 in 0u64..1000, s2 in 0u64..1000, g in 0.0f64..5.0) {
            let s = tri3();
            let x = random_positive(&s, 2, s1);
            let y = random_positive(&s, 2, s2);
            prop_assert!(cone_member(&x.add(&y).unwrap(), MEMBERSHIP_TOL).unwrap());
            prop_assert!(cone_member(&x.scale(g), MEMBERSHIP_TOL).unwrap());
        }
    }
}
