//! Positivity in the duals of the truncated systems and in the bidual of
//! `S_0`. Dual elements are pairs `(β, T)` with `T` an `N×N` hermitian
//! matrix, paired with `λI + K` as `βλ + tr(TᵗK)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conic::{eig_herm, CMatrix, C64};
use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

fn check_square(t: &CMatrix) -> Result<()> {
    if t.rows() != t.cols() {
        return Err(Error::DimensionMismatch {
            expected: t.rows(),
            found: t.cols(),
        });
    }
    Ok(())
}

fn check_corner_free(x: &CMatrix, what: &str) -> Result<()> {
    check_square(x)?;
    if x[(0, 0)].norm() > 1e-12 {
        return Err(Error::Malformed(format!("{what} must have a zero (1,1) entry")));
    }
    Ok(())
}

/// `βλ + tr(TᵗK)`
pub fn pairing_s(beta: f64, t: &CMatrix, lambda: f64, k: &CMatrix) -> C64 {
    t.transpose().trace_product(k) + C64::new(beta * lambda, 0.0)
}

/// `(β, T) ≥ 0` on the unitized compacts iff `T ≥ 0` and `β ≥ tr T`.
pub fn dual_positive_s(beta: f64, t: &CMatrix) -> Result<bool> {
    check_square(t)?;
    let e = eig_herm(t)?;
    Ok(e.min() >= -TOL && beta >= t.trace().re - TOL)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S0DualCheck {
    pub positive: bool,
    /// Smallest `α` making `T_0 + αE_11` positive, when one exists within
    /// `[0, β − tr T_0]`.
    pub alpha: Option<f64>,
}

fn psd_with_corner(t0: &CMatrix, alpha: f64) -> Result<bool> {
    let mut m = t0.clone();
    m[(0, 0)] += alpha;
    Ok(eig_herm(&m)?.min() >= -TOL)
}

/// `(β, T_0) ≥ 0` on `S_0` iff some `α ∈ [0, β − tr T_0]` makes
/// `T_0 + αE_11` positive. Positivity is monotone in `α`, so the least such
/// `α` is found by bisection.
pub fn dual_positive_s0(beta: f64, t0: &CMatrix) -> Result<S0DualCheck> {
    check_corner_free(t0, "T_0")?;
    let upper = beta - t0.trace().re;
    let none = S0DualCheck {
        positive: false,
        alpha: None,
    };
    if upper < -TOL {
        return Ok(none);
    }
    let upper = upper.max(0.0);
    if !psd_with_corner(t0, upper)? {
        return Ok(none);
    }
    if psd_with_corner(t0, 0.0)? {
        return Ok(S0DualCheck {
            positive: true,
            alpha: Some(0.0),
        });
    }
    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if psd_with_corner(t0, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(S0DualCheck {
        positive: true,
        alpha: Some(hi),
    })
}

/// `(μ, X_0) ≥ 0` in the bidual of `S_0` iff `μI + X_0 ≥ 0`; the tail
/// coordinate contributes the condition `μ ≥ 0`.
pub fn bidual_positive(mu: f64, x0: &CMatrix) -> Result<bool> {
    check_corner_free(x0, "X_0")?;
    let shifted = x0 + &CMatrix::identity(x0.rows()).scale(mu);
    Ok(mu >= -TOL && eig_herm(&shifted)?.min() >= -TOL)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidualRow {
    pub mu: f64,
    pub oracle: bool,
    /// Smallest value of `μβ + Σ x_ij t_ij` over the mesh.
    pub mesh_min: f64,
    pub mesh_falsifies: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidualAudit {
    pub truncation: usize,
    pub mesh_size: usize,
    pub rows: Vec<BidualRow>,
    /// Oracle and mesh give the same answer.
    pub agreements: usize,
    /// Oracle says not positive and the mesh finds no violation.
    pub unfalsified_negatives: usize,
    /// Mesh finds a violation the oracle missed; must be zero.
    pub contradictions: usize,
}

impl BidualAudit {
    pub fn passes(&self) -> bool {
        self.contradictions == 0
    }
}

fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

/// Positive `(β, T_0)` in the dual of `S_0`: `T ≥ 0`, `α = t_11`,
/// `T_0 = T − αE_11` and `β ≥ tr T`. Rank-one `T` with `β = tr T` are the
/// extreme rays; `(1, 0)` covers the tail.
fn dual_s0_mesh(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, CMatrix)> {
    let mut mesh = vec![(1.0, CMatrix::zeros(n, n))];
    while mesh.len() < size {
        let rank = if mesh.len() % 4 == 0 { 1 + rng.gen_range(0..n) } else { 1 };
        let mut t = CMatrix::zeros(n, n);
        for _ in 0..rank {
            let v = gaussian_vector(n, rng);
            t += &CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        }
        let tr = t.trace().re;
        t = t.scale(1.0 / tr);
        let slack = if mesh.len() % 3 == 0 { rng.gen_range(0.0..0.5) } else { 0.0 };
        t[(0, 0)] = C64::new(0.0, 0.0);
        mesh.push((1.0 + slack, t));
    }
    mesh
}

/// Random `(μ, X_0)` at truncation `N`, compared between
/// [`bidual_positive`] and the defining condition over a mesh of positive
/// dual elements. The mesh can only falsify positivity.
pub fn bidual_equivalence_audit(n: usize, samples: usize, seed: u64) -> Result<BidualAudit> {
    if n < 2 {
        return Err(Error::Malformed(format!("truncation must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh_size = 400 * n;
    let mesh = dual_s0_mesh(n, mesh_size, &mut rng);
    let mut rows = Vec::with_capacity(samples);
    let (mut agreements, mut unfalsified, mut contradictions) = (0, 0, 0);
    for _ in 0..samples {
        let mu = rng.gen_range(-0.5..2.0);
        let mut x0 = CMatrix::random_hermitian(n, &mut rng).scale(0.5);
        x0[(0, 0)] = C64::new(0.0, 0.0);
        let oracle = bidual_positive(mu, &x0)?;
        let scale = 1.0 + mu.abs() + x0.max_abs();
        let mesh_min = mesh
            .iter()
            .map(|(beta, t0)| mu * beta + x0.transpose().trace_product(t0).re)
            .fold(f64::INFINITY, f64::min);
        let mesh_falsifies = mesh_min < -TOL * scale;
        match (oracle, mesh_falsifies) {
            (true, false) | (false, true) => agreements += 1,
            (false, false) => unfalsified += 1,
            (true, true) => contradictions += 1,
        }
        rows.push(BidualRow {
            mu,
            oracle,
            mesh_min,
            mesh_falsifies,
        });
    }
    Ok(BidualAudit {
        truncation: n,
        mesh_size,
        rows,
        agreements,
        unfalsified_negatives: unfalsified,
        contradictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(n: usize, entries: &[(usize, usize, f64)]) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for &(i, j, v) in entries {
            m[(i, j)] = C64::new(v, 0.0);
            m[(j, i)] = C64::new(v, 0.0);
        }
        m
    }

    #[test]
    fn dual_s_examples() {
        let half_e11 = sym(2, &[(0, 0, 0.5)]);
        assert!(dual_positive_s(1.0, &half_e11).unwrap());
        let t = sym(2, &[(0, 0, 0.5), (1, 1, 0.5)]);
        assert!(!dual_positive_s(0.9, &t).unwrap());
    }

    #[test]
    fn dual_s_cone_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = CMatrix::random_hermitian(3, &mut rng);
            let b = CMatrix::random_hermitian(3, &mut rng);
            let (ta, tb) = (a.matmul(&a), b.matmul(&b));
            let (ba, bb) = (ta.trace().re + rng.gen_range(0.0..1.0), tb.trace().re);
            assert!(dual_positive_s(ba, &ta).unwrap() && dual_positive_s(bb, &tb).unwrap());
            let s = rng.gen_range(0.0..3.0);
            assert!(dual_positive_s(ba + s * bb, &(&ta + &tb.scale(s))).unwrap());
        }
    }

    #[test]
    fn dual_s0_examples() {
        assert!(dual_positive_s0(0.0, &CMatrix::zeros(3, 3)).unwrap().positive);
        assert!(!dual_positive_s0(10.0, &sym(2, &[(0, 1, 1.0)])).unwrap().positive);
        let t = sym(2, &[(1, 1, 1.0)]);
        assert!(dual_positive_s0(1.0, &t).unwrap().positive);
        assert!(!dual_positive_s0(0.999, &t).unwrap().positive);
        assert!(dual_positive_s0(1.0, &sym(2, &[(0, 0, 0.3)])).is_err());
    }

    #[test]
    fn dual_s0_finds_the_least_alpha() {
        // [[α, 1], [1, 2]] ≥ 0 iff α ≥ 1/2
        let t0 = sym(2, &[(0, 1, 1.0), (1, 1, 2.0)]);
        let c = dual_positive_s0(3.0, &t0).unwrap();
        assert!(c.positive && (c.alpha.unwrap() - 0.5).abs() < 1e-8);
        assert!(!dual_positive_s0(2.4, &t0).unwrap().positive);
    }

    #[test]
    fn bidual_examples() {
        assert!(bidual_positive(1.0, &CMatrix::zeros(3, 3)).unwrap());
        let x0 = sym(3, &[(0, 1, 1.0)]);
        assert!(!bidual_positive(0.0, &x0).unwrap());
        assert!(bidual_positive(1.0, &x0).unwrap());
        assert!(!bidual_positive(-0.1, &sym(3, &[(1, 1, 1.0), (2, 2, 1.0)])).unwrap());
    }

    #[test]
    fn bidual_audit_at_four() {
        let audit = bidual_equivalence_audit(4, 200, 0).unwrap();
        assert!(audit.passes());
        assert_eq!(audit.rows.len(), 200);
        assert!(audit.agreements >= 190, "{} agreements", audit.agreements);
    }
}
