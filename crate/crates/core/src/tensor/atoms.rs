//! Atoms `α(P ⊗ Q)α*` of the maximal tensor cone and their realizations in
//! `M_n(M_p ⊗ M_q)`.
//!
//! Index conventions: a level-`n` element of `S ⊗ T` is realized with row
//! index `(i, u, v) ↦ i·pq + u·q + v`; `P ∈ M_k(S)` uses `(a, u) ↦ a·p + u`;
//! the columns of `α` are indexed by `(a, c) ↦ a·l + c`.

use serde::{Deserialize, Serialize};

use crate::conic::{eig_herm, CMatrix, C64};
use crate::error::{Error, Result};
use crate::system::{LevelElement, MatrixOperatorSystem};

/// One term `α(P ⊗ Q)α*` with `P ∈ M_k(S)^+`, `Q ∈ M_l(T)^+`, `α ∈ M_{n,kl}`.
#[derive(Debug, Clone)]
pub struct MaxAtom {
    pub k: usize,
    pub l: usize,
    pub p: LevelElement,
    pub q: LevelElement,
    pub alpha: CMatrix,
}

/// `target + ε·I_n ⊗ 1 ⊗ 1 ≈ Σ atoms`, with the Frobenius defect recorded.
#[derive(Debug, Clone)]
pub struct MaxDecomposition {
    pub atoms: Vec<MaxAtom>,
    pub target: LevelElement,
    pub epsilon: f64,
    pub residual: f64,
}

/// Per-atom validity report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomCheck {
    pub p_min_eig: f64,
    pub q_min_eig: f64,
    pub p_span_residual: f64,
    pub q_span_residual: f64,
    pub atom_min_eig: f64,
}

impl AtomCheck {
    pub fn valid(&self, tol: f64) -> bool {
        self.p_min_eig >= -tol
            && self.q_min_eig >= -tol
            && self.p_span_residual <= tol
            && self.q_span_residual <= tol
            && self.atom_min_eig >= -tol
    }
}

/// The selector `α_{i,(a,(j,b))} = δ_ij δ_ab` of size `n × (k·nk)`, which
/// turns `α(P ⊗ W)α*` into `[Σ_{a,a'} P_{aa'} ⊗ W_{(i,a),(j,a')}]_{ij}`.
pub fn selector(n: usize, k: usize) -> CMatrix {
    let l = n * k;
    let mut a = CMatrix::zeros(n, k * l);
    for i in 0..n {
        for b in 0..k {
            a[(i, b * l + i * k + b)] = C64::new(1.0, 0.0);
        }
    }
    a
}

/// The mirrored selector of size `n × (nl·l)`, for atoms whose `P` side is
/// the reshuffled target and whose `Q` side is a matrix-unit block.
pub fn selector_right(n: usize, l: usize) -> CMatrix {
    let k = n * l;
    let mut a = CMatrix::zeros(n, k * l);
    for i in 0..n {
        for c in 0..l {
            a[(i, (i * l + c) * l + c)] = C64::new(1.0, 0.0);
        }
    }
    a
}

/// `L_P(W) = [Σ_{a,a'} P_{aa'} ⊗ W_{(i,a),(j,a')}]_{ij}` for realized
/// `P ∈ M_k(M_p)` and `W ∈ M_{nk}(M_q)`.
pub fn lp_w(pm: &CMatrix, w: &CMatrix, n: usize, k: usize, p: usize, q: usize) -> CMatrix {
    let d = n * p * q;
    let mut out = CMatrix::zeros(d, d);
    for a in 0..k {
        for a2 in 0..k {
            for u in 0..p {
                for u2 in 0..p {
                    let pv = pm[(a * p + u, a2 * p + u2)];
                    if pv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let r0 = i * p * q + u * q;
                            let c0 = j * p * q + u2 * q;
                            let wr = (i * k + a) * q;
                            let wc = (j * k + a2) * q;
                            for v in 0..q {
                                for v2 in 0..q {
                                    out[(r0 + v, c0 + v2)] += pv * w[(wr + v, wc + v2)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `H` with `tr(H P) = tr(G L_P(W))` for all `P`.
pub fn lp_adjoint_p(g: &CMatrix, w: &CMatrix, n: usize, k: usize, p: usize, q: usize) -> CMatrix {
    let mut h = CMatrix::zeros(k * p, k * p);
    for a in 0..k {
        for a2 in 0..k {
            for u in 0..p {
                for u2 in 0..p {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            let wr = (i * k + a) * q;
                            let wc = (j * k + a2) * q;
                            let gr = j * p * q + u2 * q;
                            let gc = i * p * q + u * q;
                            for v in 0..q {
                                for v2 in 0..q {
                                    acc += w[(wr + v, wc + v2)] * g[(gr + v2, gc + v)];
                                }
                            }
                        }
                    }
                    h[(a2 * p + u2, a * p + u)] = acc;
                }
            }
        }
    }
    h.hermitian_part()
}

/// `K` with `tr(K W) = tr(G L_P(W))` for all `W`.
pub fn lp_adjoint_w(g: &CMatrix, pm: &CMatrix, n: usize, k: usize, p: usize, q: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n * k * q, n * k * q);
    for a in 0..k {
        for a2 in 0..k {
            for u in 0..p {
                for u2 in 0..p {
                    let pv = pm[(a * p + u, a2 * p + u2)];
                    if pv == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let gr = j * p * q + u2 * q;
                            let gc = i * p * q + u * q;
                            let kr = (j * k + a2) * q;
                            let kc = (i * k + a) * q;
                            for v in 0..q {
                                for v2 in 0..q {
                                    out[(kr + v2, kc + v)] += pv * g[(gr + v2, gc + v)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.hermitian_part()
}

/// Realization of `α(P ⊗ Q)α*` from realized factors: first contract
/// `W = (B ⊗ I_q) Q (B ⊗ I_q)*` with `B_{(i,a),c} = α_{i,(a,c)}`, then apply
/// [`lp_w`].
pub fn realize_atom(pm: &CMatrix, qm: &CMatrix, alpha: &CMatrix, k: usize, l: usize, p: usize, q: usize) -> CMatrix {
    let n = alpha.rows();
    let b = CMatrix::from_fn(n * k, l, |r, c| alpha[(r / k, (r % k) * l + c)]);
    let bq = b.kron(&CMatrix::identity(q));
    let w = bq.matmul(qm).matmul(&bq.adjoint());
    lp_w(pm, &w, n, k, p, q)
}

impl MaxAtom {
    pub fn level(&self) -> usize {
        self.alpha.rows()
    }

    pub fn realize(&self) -> CMatrix {
        let p = self.p.system().ambient_dim();
        let q = self.q.system().ambient_dim();
        realize_atom(&self.p.realize(), &self.q.realize(), &self.alpha, self.k, self.l, p, q)
    }

    /// Positivity and span checks for `P`, `Q` and the realized atom.
    pub fn check(&self, s: &MatrixOperatorSystem, t: &MatrixOperatorSystem) -> Result<AtomCheck> {
        let pr = self.p.realize();
        let qr = self.q.realize();
        let (_, p_span_residual) = LevelElement::project_realization(s, self.k, &pr)?;
        let (_, q_span_residual) = LevelElement::project_realization(t, self.l, &qr)?;
        let scale_p = 1.0 + pr.frobenius_norm();
        let scale_q = 1.0 + qr.frobenius_norm();
        let atom = self.realize();
        let scale_a = 1.0 + atom.frobenius_norm();
        Ok(AtomCheck {
            p_min_eig: eig_herm(&pr)?.min() / scale_p,
            q_min_eig: eig_herm(&qr)?.min() / scale_q,
            p_span_residual: p_span_residual / scale_p,
            q_span_residual: q_span_residual / scale_q,
            atom_min_eig: eig_herm(&atom)?.min() / scale_a,
        })
    }
}

impl MaxDecomposition {
    /// `Σ atoms`, realized.
    pub fn reconstruction(&self) -> CMatrix {
        let d = self.target.realize().rows();
        let mut acc = CMatrix::zeros(d, d);
        for a in &self.atoms {
            acc += &a.realize();
        }
        acc
    }

    /// `‖target + ε·I − Σ atoms‖_F`, recomputed from scratch.
    pub fn recompute_residual(&self) -> f64 {
        let x = self.target.realize();
        let shifted = &x + &CMatrix::identity(x.rows()).scale(self.epsilon);
        (&shifted - &self.reconstruction()).frobenius_norm()
    }

    /// Target with the left and right factors exchanged, atoms mirrored.
    pub fn swapped(&self, swapped_target: LevelElement) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                // α(P⊗Q)α* ↦ α'(Q⊗P)α'* with α' permuting the (a, c) columns
                let alpha = CMatrix::from_fn(a.alpha.rows(), a.k * a.l, |i, col| {
                    let (c, x) = (col / a.k, col % a.k);
                    a.alpha[(i, x * a.l + c)]
                });
                MaxAtom {
                    k: a.l,
                    l: a.k,
                    p: a.q.clone(),
                    q: a.p.clone(),
                    alpha,
                }
            })
            .collect();
        let mut out = Self {
            atoms,
            target: swapped_target,
            epsilon: self.epsilon,
            residual: 0.0,
        };
        out.residual = out.recompute_residual();
        if !out.residual.is_finite() {
            return Err(Error::Malformed("swapped decomposition is not finite".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let g = CMatrix::random_gaussian(n, n, rng);
        g.matmul(&g.adjoint())
    }

    /// Direct oracle: entrywise `Σ α_{i,(a,c)} conj(α_{j,(a',c')}) P_{aa'} ⊗ Q_{cc'}`.
    fn brute_atom(pm: &CMatrix, qm: &CMatrix, alpha: &CMatrix, k: usize, l: usize, p: usize, q: usize) -> CMatrix {
        let n = alpha.rows();
        let mut out = CMatrix::zeros(n * p * q, n * p * q);
        for i in 0..n {
            for j in 0..n {
                for a in 0..k {
                    for c in 0..l {
                        for a2 in 0..k {
                            for c2 in 0..l {
                                let w = alpha[(i, a * l + c)] * alpha[(j, a2 * l + c2)].conj();
                                let blk = pm.block(a * p, a2 * p, p, p).kron(&qm.block(c * q, c2 * q, q, q));
                                for r in 0..p * q {
                                    for s in 0..p * q {
                                        out[(i * p * q + r, j * p * q + s)] += w * blk[(r, s)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn realization_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(n, k, l, p, q) in &[(1, 1, 1, 2, 3), (2, 2, 3, 2, 2), (3, 1, 2, 1, 2), (2, 3, 1, 3, 1)] {
            let pm = random_psd(k * p, &mut rng);
            let qm = random_psd(l * q, &mut rng);
            let alpha = CMatrix::random_gaussian(n, k * l, &mut rng);
            let fast = realize_atom(&pm, &qm, &alpha, k, l, p, q);
            let slow = brute_atom(&pm, &qm, &alpha, k, l, p, q);
            assert!((&fast - &slow).frobenius_norm() < 1e-10 * (1.0 + slow.frobenius_norm()));
            assert!(eig_herm(&fast).unwrap().min() > -1e-9);
        }
    }

    #[test]
    fn adjoints_match_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, k, p, q) = (2, 2, 2, 3);
        let g = CMatrix::random_hermitian(n * p * q, &mut rng);
        let pm = random_psd(k * p, &mut rng);
        let w = random_psd(n * k * q, &mut rng);
        let val = g.trace_product(&lp_w(&pm, &w, n, k, p, q)).re;
        let h = lp_adjoint_p(&g, &w, n, k, p, q);
        let kk = lp_adjoint_w(&g, &pm, n, k, p, q);
        assert!((h.trace_product(&pm).re - val).abs() < 1e-9 * (1.0 + val.abs()));
        assert!((kk.trace_product(&w).re - val).abs() < 1e-9 * (1.0 + val.abs()));
    }

    #[test]
    fn selectors_reproduce_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (n, k, p, q) = (2, 2, 2, 2);
        let pm = random_psd(k * p, &mut rng);
        let w = random_psd(n * k * q, &mut rng);
        let via_alpha = realize_atom(&pm, &w, &selector(n, k), k, n * k, p, q);
        assert!((&via_alpha - &lp_w(&pm, &w, n, k, p, q)).frobenius_norm() < 1e-10);

        // mirrored selector with matrix units on the right returns the target
        let l = q;
        let target = random_psd(n * p * q, &mut rng);
        let pr = CMatrix::from_fn(n * l * p, n * l * p, |r, c| {
            let (i, cc, u) = (r / (l * p), (r / p) % l, r % p);
            let (j, cc2, u2) = (c / (l * p), (c / p) % l, c % p);
            target[(i * p * q + u * q + cc, j * p * q + u2 * q + cc2)]
        });
        let mut units = CMatrix::zeros(l * q, l * q);
        for c in 0..l {
            for d in 0..l {
                units[(c * q + c, d * q + d)] = C64::new(1.0, 0.0);
            }
        }
        let back = realize_atom(&pr, &units, &selector_right(n, l), n * l, l, p, q);
        assert!((&back - &target).frobenius_norm() < 1e-10);
    }
}
