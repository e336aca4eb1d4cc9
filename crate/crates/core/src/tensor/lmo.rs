//! Linear maximization over normalized cone points and over atoms.
//!
//! `cone_lmo` maximizes `tr(H P)` over `P ∈ M_k(S)^+` with `tr P = 1`. For a
//! full matrix algebra this is the top eigenvector. Otherwise it solves the
//! dual `min_{Z ⊥ M_k(S)} λ_max(H + Z)` after smoothing `λ_max` into
//! `μ log tr exp(·/μ)`, with accelerated gradient steps and a decreasing `μ`.
//! The primal point is the projected softmax density, shifted back into the
//! cone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::atoms::{lp_adjoint_p, lp_adjoint_w, lp_w};
use crate::conic::{eig_herm, CMatrix};
use crate::maps::random_density;
use crate::system::MatrixOperatorSystem;

/// Orthogonal projection of `M_{kd}` onto `M_k(S)`.
#[derive(Debug, Clone)]
pub struct LevelProjector {
    system: MatrixOperatorSystem,
    k: usize,
}

impl LevelProjector {
    pub fn new(system: &MatrixOperatorSystem, k: usize) -> Self {
        Self {
            system: system.clone(),
            k,
        }
    }

    pub fn size(&self) -> usize {
        self.k * self.system.ambient_dim()
    }

    pub fn project(&self, x: &CMatrix) -> CMatrix {
        if self.system.is_full() {
            return x.clone();
        }
        let d = self.system.ambient_dim();
        let mut out = CMatrix::zeros(x.rows(), x.cols());
        for i in 0..self.k {
            for j in 0..self.k {
                let blk = x.block(i * d, j * d, d, d);
                let c = self.system.coefficients_unchecked(&blk);
                out.set_block(i * d, j * d, &self.system.realize(&c));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LmoResult {
    /// Trace-one point of the cone.
    pub point: CMatrix,
    pub value: f64,
    /// Dual bound `λ_max(H + Z) ≥ value`.
    pub upper: f64,
    pub iterations: usize,
}

const MU_STAGES: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

fn softmax_density(a: &CMatrix, mu: f64) -> (CMatrix, f64) {
    let e = eig_herm(&a.hermitian_part()).expect("hermitized input");
    let top = e.max();
    let rho = e.apply(|l| ((l - top) / mu).exp());
    let tr = rho.trace().re;
    (rho.scale(1.0 / tr), top)
}

fn top_state(h: &CMatrix) -> (CMatrix, f64) {
    let e = eig_herm(&h.hermitian_part()).expect("hermitized input");
    let v = e.vectors.col(e.values.len() - 1);
    (CMatrix::outer(&v), e.max())
}

/// Pulls a trace-one element of `M_k(S)` back into the cone by mixing in
/// the normalized unit.
fn shift_into_cone(x: &CMatrix) -> CMatrix {
    let n = x.rows();
    let lmin = eig_herm(&x.hermitian_part()).expect("hermitized").min();
    let x = x.hermitian_part();
    if lmin >= 0.0 {
        return x;
    }
    let d = -lmin;
    let mut y = &x + &CMatrix::identity(n).scale(d);
    let tr = y.trace().re;
    y = y.scale(1.0 / tr);
    y
}

pub fn cone_lmo(proj: &LevelProjector, h: &CMatrix, iters_per_stage: usize, rel_gap: f64) -> LmoResult {
    let n = proj.size();
    if proj.system.is_full() {
        let (point, value) = top_state(h);
        return LmoResult {
            point,
            value,
            upper: value,
            iterations: 1,
        };
    }
    let hl = proj.project(&h.hermitian_part());
    let spread = {
        let e = eig_herm(&hl).expect("hermitian");
        (e.max() - e.min()).max(1e-300)
    };
    let mut best_point = CMatrix::identity(n).scale(1.0 / n as f64);
    let mut best_value = hl.trace_product(&best_point).re;
    let mut upper = eig_herm(&hl).expect("hermitian").max();
    let mut z = CMatrix::zeros(n, n);
    let mut iterations = 0;
    'stages: for &rel in &MU_STAGES {
        let mu = rel * spread;
        let mut y = z.clone();
        let mut t = 1.0f64;
        for step in 0..iters_per_stage {
            iterations += 1;
            let (rho, top) = softmax_density(&(&hl + &y), mu);
            upper = upper.min(top);
            let rho_l = proj.project(&rho);
            let g = &rho - &rho_l;
            let z_new = &y - &g.scale(mu);
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_new;
            y = &z_new + &(&z_new - &z).scale(mom);
            z = z_new;
            t = t_new;
            // primal recovery costs a second eigendecomposition, so only
            // every few steps
            if (step + 1) % 4 == 0 || step + 1 == iters_per_stage {
                let cand = shift_into_cone(&rho_l);
                let v = hl.trace_product(&cand).re;
                if v > best_value {
                    best_value = v;
                    best_point = cand;
                }
                if upper - best_value <= rel_gap * spread {
                    break 'stages;
                }
            }
        }
    }
    // the returned value is measured against the unprojected H
    let value = h.trace_product(&best_point).re;
    LmoResult {
        point: best_point,
        value,
        upper: upper + (value - best_value),
        iterations,
    }
}

/// Best normalized atom `L_P(W)` for the pairing `⟨G, ·⟩`, with `P` of
/// level `k` over `S` and `W` of level `nk` over `T`.
#[derive(Debug, Clone)]
pub struct AtomChoice {
    pub p: CMatrix,
    pub w: CMatrix,
    pub value: f64,
    pub seed: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct AtomSearch {
    pub s: LevelProjector,
    pub t: LevelProjector,
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub restarts: usize,
    pub alternations: usize,
    pub iters_per_stage: usize,
    pub rel_gap: f64,
}

impl AtomSearch {
    pub fn new(s: &MatrixOperatorSystem, t: &MatrixOperatorSystem, n: usize, k: usize) -> Self {
        Self {
            s: LevelProjector::new(s, k),
            t: LevelProjector::new(t, n * k),
            n,
            k,
            p: s.ambient_dim(),
            q: t.ambient_dim(),
            restarts: 8,
            alternations: 12,
            iters_per_stage: 40,
            rel_gap: 1e-4,
        }
    }

    fn run_one(&self, g: &CMatrix, init: CMatrix, seed: u64) -> AtomChoice {
        let (n, k, p, q) = (self.n, self.k, self.p, self.q);
        let mut pm = init;
        let mut w = CMatrix::identity(n * k * q).scale(1.0 / (n * k * q) as f64);
        let mut value = f64::NEG_INFINITY;
        let mut iterations = 0;
        for _ in 0..self.alternations {
            let kw = lp_adjoint_w(g, &pm, n, k, p, q);
            let rw = cone_lmo(&self.t, &kw, self.iters_per_stage, self.rel_gap);
            iterations += rw.iterations;
            w = rw.point;
            let hp = lp_adjoint_p(g, &w, n, k, p, q);
            let rp = cone_lmo(&self.s, &hp, self.iters_per_stage, self.rel_gap);
            iterations += rp.iterations;
            let improved = rp.value - value;
            pm = rp.point;
            value = rp.value;
            if improved.abs() <= 1e-9 * (1.0 + value.abs()) {
                break;
            }
        }
        AtomChoice {
            p: pm,
            w,
            value,
            seed,
            iterations,
        }
    }

    /// Runs `restarts` alternating searches (restart 0 starts from `warm` when
    /// given) and keeps the best by `(value, seed)`.
    pub fn search(&self, g: &CMatrix, seed: u64, warm: Option<&CMatrix>) -> AtomChoice {
        use rayon::prelude::*;
        let g = g.hermitian_part();
        let size = self.k * self.p;
        let runs: Vec<AtomChoice> = (0..self.restarts)
            .into_par_iter()
            .map(|r| {
                let s = seed.wrapping_add(r as u64);
                let init = match (r, warm) {
                    (0, Some(w)) => w.clone(),
                    _ => {
                        let mut rng = ChaCha8Rng::seed_from_u64(s);
                        self.s.project(&random_density(size, &mut rng))
                    }
                };
                let init = shift_into_cone(&init);
                self.run_one(&g, init, s)
            })
            .collect();
        let iterations = runs.iter().map(|r| r.iterations).sum();
        let mut best = runs
            .into_iter()
            .reduce(|a, b| if b.value > a.value { b } else { a })
            .expect("at least one restart");
        best.iterations = iterations;
        best
    }

    pub fn realize(&self, pm: &CMatrix, w: &CMatrix) -> CMatrix {
        lp_w(pm, w, self.n, self.k, self.p, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{FeasibilityProblem, HermMatrix, C64};
    use crate::system::tri3;

    #[test]
    fn full_algebra_lmo_is_top_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = CMatrix::random_hermitian(4, &mut rng);
        let r = cone_lmo(&LevelProjector::new(&MatrixOperatorSystem::full(2), 2), &h, 10, 1e-10);
        let top = eig_herm(&h).unwrap().max();
        assert!((r.value - top).abs() < 1e-10);
    }

    /// Oracle: the optimal value is the smallest `t` with `tI - H` positive
    /// on `M_k(S)`, found by bisection over the SDP feasibility engine.
    fn sdp_value(s: &MatrixOperatorSystem, k: usize, h: &CMatrix) -> f64 {
        let proj = LevelProjector::new(s, k);
        let hl = proj.project(h);
        let n = proj.size();
        let e = eig_herm(&hl).unwrap();
        let (mut lo, mut hi) = (e.min(), e.max());
        // feasible iff some trace-one P in the cone has tr(HP) ≥ t
        let perp: Vec<CMatrix> = s.perp_basis();
        for _ in 0..30 {
            let t = 0.5 * (lo + hi);
            let mut prob = FeasibilityProblem::new(vec![n]);
            prob.add(vec![(0, HermMatrix::new(CMatrix::identity(n)).unwrap())], 1.0);
            for i in 0..k {
                for j in 0..k {
                    for f in &perp {
                        let d = s.ambient_dim();
                        let mut b = CMatrix::zeros(n, n);
                        b.set_block(j * d, i * d, f);
                        prob.add_complex(0, &b, C64::new(0.0, 0.0));
                    }
                }
            }
            // tr(HP) - s = t with slack folded into a second block
            let mut prob2 = FeasibilityProblem::new(vec![n, 1]);
            for c in prob.constraints {
                prob2.add(c.terms, c.rhs);
            }
            prob2.add(
                vec![
                    (0, HermMatrix::new(hl.clone()).unwrap()),
                    (1, HermMatrix::new(CMatrix::identity(1).scale(-1.0)).unwrap()),
                ],
                t,
            );
            let out = crate::conic::solve_feasibility(&prob2, 1e-9, 5000).unwrap();
            if out.status == crate::conic::FeasibilityStatus::Feasible {
                lo = t;
            } else {
                hi = t;
            }
        }
        lo
    }

    #[test]
    fn subsystem_lmo_matches_sdp_oracle() {
        let s = tri3();
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = CMatrix::random_hermitian(6, &mut rng);
            let r = cone_lmo(&LevelProjector::new(&s, 2), &h, 60, 1e-10);
            let oracle = sdp_value(&s, 2, &h);
            assert!(r.value <= r.upper + 1e-9);
            assert!((r.value - oracle).abs() < 1e-3 * (1.0 + oracle.abs()), "{} vs {}", r.value, oracle);
            let lmin = eig_herm(&r.point).unwrap().min();
            assert!(lmin > -1e-12);
            assert!((r.point.trace().re - 1.0).abs() < 1e-12);
            let back = LevelProjector::new(&s, 2).project(&r.point);
            assert!((&back - &r.point).frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn atom_search_beats_random_atoms() {
        let s = tri3();
        let search = AtomSearch::new(&s, &s, 1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = CMatrix::random_hermitian(9, &mut rng);
        let best = search.search(&g, 3, None);
        let a = search.realize(&best.p, &best.w);
        assert!((g.trace_product(&a).re - best.value).abs() < 1e-9);
        for r in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
            let pm = search.s.project(&random_density(9, &mut rng));
            let w = search.t.project(&random_density(9, &mut rng));
            let (pm, w) = (shift_into_cone(&pm), shift_into_cone(&w));
            assert!(g.trace_product(&search.realize(&pm, &w)).re <= best.value + 1e-9);
        }
    }
}
