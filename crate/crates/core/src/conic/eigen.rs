//! Hermitian eigendecomposition by cyclic complex Jacobi rotations, and the
//! spectral helpers built on it.

use serde::{Deserialize, Serialize};

use super::matrix::{CMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Symmetry residual above which an input is rejected as non-hermitian.
pub const HERMITIAN_REJECT: f64 = 1e-8;

const MAX_SWEEPS: usize = 80;

/// A square matrix known to be hermitian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct HermMatrix(CMatrix);

impl HermMatrix {
    /// Accepts `m` if its symmetry residual is within [`HERMITIAN_REJECT`]
    /// (scaled by the matrix size) and stores the exact hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        let residual = m.hermitian_residual();
        if residual > HERMITIAN_REJECT * (1.0 + m.max_abs()) {
            return Err(Error::NonHermitian { residual });
        }
        Ok(Self(m.hermitian_part()))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(CMatrix::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

impl TryFrom<CMatrix> for HermMatrix {
    type Error = Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<HermMatrix> for CMatrix {
    fn from(h: HermMatrix) -> CMatrix {
        h.0
    }
}

impl AsRef<CMatrix> for HermMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unitary; column `k` belongs to `values[k]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `U f(Λ) U*`
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n, n);
        for (k, &w) in fv.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                if vik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out.hermitian_part()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|l| l)
    }
}

/// Eigendecomposition of a hermitian matrix, eigenvalues ascending.
pub fn eig_herm(a: &CMatrix) -> Result<Eigen> {
    HermMatrix::new(a.clone()).map(|h| eig_checked(&h))
}

/// Eigendecomposition of a matrix already known to be hermitian.
pub fn eig_checked(h: &HermMatrix) -> Eigen {
    jacobi(h.matrix())
}

fn jacobi(input: &CMatrix) -> Eigen {
    let n = input.rows();
    let mut a = input.clone();
    let mut v = CMatrix::identity(n);
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let scale = a.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        return sorted(a, v);
    }
    let tiny = f64::EPSILON * f64::EPSILON * scale * scale;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off <= tiny * (n * n) as f64 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let b = a[(p, q)];
                let babs = b.norm();
                if babs * babs <= tiny {
                    continue;
                }
                rotate(&mut a, &mut v, p, q, b, babs);
            }
        }
    }
    sorted(a, v)
}

#[inline]
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, b: C64, babs: f64) {
    let n = a.rows();
    let phase = b / babs;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let zeta = (aqq - app) / (2.0 * babs);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // G = diag(1, conj(phase)) · [[c, s], [-s, c]]
    let gpp = C64::new(c, 0.0);
    let gpq = C64::new(s, 0.0);
    let gqp = phase.conj() * (-s);
    let gqq = phase.conj() * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * gpp + akq * gqp;
        a[(k, q)] = akp * gpq + akq * gqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
        a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(app - t * babs, 0.0);
    a[(q, q)] = C64::new(aqq + t * babs, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * gpp + vkq * gqp;
        v[(k, q)] = vkp * gpq + vkq * gqq;
    }
}

fn sorted(a: CMatrix, v: CMatrix) -> Eigen {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Eigen { values, vectors }
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn project_psd(a: &CMatrix) -> Result<CMatrix> {
    Ok(eig_herm(a)?.apply(|l| l.max(0.0)))
}

/// Smallest eigenvalue of a hermitian matrix.
pub fn min_eig(a: &CMatrix) -> Result<f64> {
    Ok(eig_herm(a)?.min())
}

pub(crate) fn eig_lenient(a: &CMatrix) -> Eigen {
    jacobi(&a.hermitian_part())
}

/// Positive square root of a PSD matrix (negative eigenvalues clipped).
pub fn sqrt_psd(a: &CMatrix) -> Result<CMatrix> {
    Ok(eig_herm(a)?.apply(|l| l.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Real roots of the characteristic polynomial of a hermitian matrix,
    /// located by sign changes of det(A - xI) on a fine grid then bisection.
    /// Determinants via complex Gaussian elimination with partial pivoting.
    fn charpoly_roots(a: &CMatrix) -> Vec<f64> {
        fn det(m: &CMatrix) -> f64 {
            let n = m.rows();
            let mut m = m.clone();
            let mut d = crate::conic::matrix::ONE;
            for c in 0..n {
                let piv = (c..n)
                    .max_by(|&i, &j| m[(i, c)].norm().total_cmp(&m[(j, c)].norm()))
                    .unwrap();
                if m[(piv, c)].norm() == 0.0 {
                    return 0.0;
                }
                if piv != c {
                    for k in 0..n {
                        let t = m[(c, k)];
                        m[(c, k)] = m[(piv, k)];
                        m[(piv, k)] = t;
                    }
                    d = -d;
                }
                d *= m[(c, c)];
                for r in c + 1..n {
                    let f = m[(r, c)] / m[(c, c)];
                    for k in c..n {
                        let t = m[(c, k)];
                        m[(r, k)] -= f * t;
                    }
                }
            }
            d.re
        }
        let n = a.rows();
        let shifted = |x: f64| det(&(a - &CMatrix::identity(n).scale(x)));
        let bound = a.frobenius_norm() + 1.0;
        let steps = 20000;
        let h = 2.0 * bound / steps as f64;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut f0 = shifted(x0);
        for s in 1..=steps {
            let x1 = -bound + s as f64 * h;
            let f1 = shifted(x1);
            if f0 == 0.0 {
                roots.push(x0);
            } else if f0 * f1 < 0.0 {
                let (mut lo, mut hi, mut flo) = (x0, x1, f0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = shifted(mid);
                    if fm * flo <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            f0 = f1;
        }
        roots
    }

    #[test]
    fn identity_and_diagonal() {
        let e = eig_herm(&CMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = eig_herm(&CMatrix::diag(&[2.0, -3.0])).unwrap();
        assert_eq!(e.values, vec![-3.0, 2.0]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::unit(2, 0, 1);
        assert!(matches!(eig_herm(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn random_4x4_matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..3 {
            let a = CMatrix::random_hermitian(4, &mut rng);
            let e = eig_herm(&a).unwrap();
            let roots = charpoly_roots(&a);
            assert_eq!(roots.len(), 4, "generic spectrum is simple");
            for (x, y) in e.values.iter().zip(&roots) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 5, 17, 40] {
            let a = CMatrix::random_hermitian(n, &mut rng);
            let e = eig_herm(&a).unwrap();
            let err = (&e.reconstruct() - &a).frobenius_norm();
            assert!(err <= 1e-9 * (1.0 + a.frobenius_norm()), "n={n} err={err}");
            let g = e.vectors.adjoint().matmul(&e.vectors);
            assert!((&g - &CMatrix::identity(n)).frobenius_norm() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // rank-one projector plus identity: eigenvalues (1,1,1,5)
        let v = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0)];
        let a = &CMatrix::identity(4) + &CMatrix::outer(&v);
        let e = eig_herm(&a).unwrap();
        for (x, y) in e.values.iter().zip([1.0, 1.0, 1.0, 5.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn project_psd_examples() {
        let p = project_psd(&CMatrix::diag(&[1.0, -1.0])).unwrap();
        assert!((&p - &CMatrix::diag(&[1.0, 0.0])).frobenius_norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = CMatrix::random_gaussian(3, 3, &mut rng);
        let psd = g.matmul(&g.adjoint());
        let p = project_psd(&psd).unwrap();
        assert!((&p - &psd).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn project_psd_beats_random_psd_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CMatrix::random_hermitian(3, &mut rng);
        let p = project_psd(&a).unwrap();
        let best = (&a - &p).frobenius_norm();
        for _ in 0..1000 {
            let g = CMatrix::random_gaussian(3, 3, &mut rng).scale(0.1);
            let cand = project_psd(&(&p + &g.matmul(&g.adjoint()).scale(0.5)).hermitian_part())
                .unwrap();
            let cand = &cand + &CMatrix::random_hermitian(3, &mut rng).scale(1e-3);
            let cand = project_psd(&cand).unwrap();
            assert!((&a - &cand).frobenius_norm() >= best - 1e-12);
        }
    }
}
