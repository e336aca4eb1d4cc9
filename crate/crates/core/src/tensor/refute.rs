//! Functional refutation of maximal-cone membership.
//!
//! A hermitian `F` on `M_n(S ⊗ T)` with `F(unit) = 1` is nonnegative on the
//! maximal cone exactly when, for all `P ∈ M_k(S)^+`, `Q ∈ M_l(T)^+`, the
//! matrix `H_{(r,i,u),(s,j,v)} = F(E_rs ⊗ P_ij ⊗ Q_uv)` is PSD. That is
//! only sampled here, so the output is evidence at the listed levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::certify::{certify_search, max_certify, CertifyOptions, MaxOutcome, SearchState};
use super::lmo::{AtomSearch, LevelProjector};
use super::TensorSystem;
use crate::conic::{eig_herm, CMatrix, C64};
use crate::error::Result;
use crate::system::{random_positive, LevelElement, MatrixOperatorSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefuteOptions {
    pub levels: Vec<(usize, usize)>,
    pub mesh_size: usize,
    pub seed: u64,
    /// Budget handed to the certification attempt that produces the
    /// separator.
    pub budget: usize,
    pub epsilon: Option<f64>,
    /// Required margin `F(X) ≤ −threshold·‖X‖_F`.
    pub threshold: f64,
}

impl Default for RefuteOptions {
    fn default() -> Self {
        Self {
            levels: vec![(2, 2), (3, 3)],
            mesh_size: 60,
            seed: 0,
            budget: 3_000_000,
            epsilon: None,
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub k: usize,
    pub l: usize,
    pub samples: usize,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionalSource {
    /// Vector state of the ambient matrix algebra; positive on the minimal
    /// cone and therefore on every tensor cone.
    VectorState,
    /// Negated residual of a stalled certification search.
    Separator,
}

#[derive(Debug, Clone)]
pub struct RefutationEvidence {
    /// `F` as an element of `M_n(S ⊗ T)`, paired through `tr(F ·)`.
    pub functional: LevelElement,
    pub source: FunctionalSource,
    /// Weight of the normalized trace mixed into the raw separator.
    pub mixing: f64,
    pub checked_levels: Vec<(usize, usize)>,
    pub margin: f64,
    pub threshold: f64,
    pub jointcp_residuals: Vec<LevelCheck>,
    pub fresh_mesh: Vec<LevelCheck>,
    /// Largest `⟨−F, atom⟩` found by the adversarial atom search.
    pub adversarial_max: f64,
}

impl RefutationEvidence {
    pub fn functional_vector(&self) -> Vec<f64> {
        functional_vector(&self.functional)
    }

    pub fn label(&self) -> String {
        let lv: Vec<String> = self.checked_levels.iter().map(|(k, l)| format!("({k},{l})")).collect();
        format!("evidence at levels {}", lv.join(", "))
    }
}

#[derive(Debug, Clone)]
pub enum RefuteOutcome {
    Evidence(RefutationEvidence),
    NotFound { budget: usize, reason: String },
}

/// Real coordinates of a hermitian level element: real parts of the
/// diagonal-block coefficients, then real and imaginary parts of the
/// strictly upper blocks.
pub fn functional_vector(f: &LevelElement) -> Vec<f64> {
    let n = f.level();
    let m = f.system().dim();
    let c = f.coeffs();
    let mut out = Vec::with_capacity(n * n * m);
    for i in 0..n {
        for j in i..n {
            for a in 0..m {
                let z = c[(i * n + j) * m + a];
                out.push(z.re);
                if i != j {
                    out.push(z.im);
                }
            }
        }
    }
    out
}

/// `F(E_rs ⊗ P_ij ⊗ Q_uv)` assembled into an `(n·k·l)`-square matrix.
pub fn joint_matrix(f: &CMatrix, n: usize, pm: &CMatrix, k: usize, qm: &CMatrix, l: usize, p: usize, q: usize) -> CMatrix {
    let pq = p * q;
    let dim = n * k * l;
    let mut h = CMatrix::zeros(dim, dim);
    // G_{sr,ij}[y', y] = Σ_{x,x'} F_sr[(x',y'),(x,y)] (P_ij)[x,x']
    for r in 0..n {
        for s in 0..n {
            for i in 0..k {
                for j in 0..k {
                    let mut g = CMatrix::zeros(q, q);
                    for x in 0..p {
                        for x2 in 0..p {
                            let pv = pm[(i * p + x, j * p + x2)];
                            if pv == C64::new(0.0, 0.0) {
                                continue;
                            }
                            for y in 0..q {
                                for y2 in 0..q {
                                    g[(y2, y)] += f[(s * pq + x2 * q + y2, r * pq + x * q + y)] * pv;
                                }
                            }
                        }
                    }
                    for u in 0..l {
                        for v in 0..l {
                            let mut acc = C64::new(0.0, 0.0);
                            for y in 0..q {
                                for y2 in 0..q {
                                    acc += g[(y2, y)] * qm[(u * q + y, v * q + y2)];
                                }
                            }
                            h[((r * k + i) * l + u, (s * k + j) * l + v)] = acc;
                        }
                    }
                }
            }
        }
    }
    h
}

/// Random trace-one point of `M_k(S)^+`; odd draws are pushed to the
/// boundary of the cone.
fn sample_cone(s: &MatrixOperatorSystem, k: usize, seed: u64) -> CMatrix {
    let x = random_positive(s, k, seed).realize();
    let e = eig_herm(&x).expect("hermitian");
    let d = x.rows();
    let x = if seed % 2 == 1 {
        &x - &CMatrix::identity(d).scale(e.min())
    } else {
        x
    };
    let tr = x.trace().re;
    x.scale(1.0 / tr)
}

/// Smallest eigenvalue of the joint matrix over a random mesh at each level,
/// scaled by `‖F‖_F`.
pub fn mesh_check(ts: &TensorSystem, f: &CMatrix, n: usize, levels: &[(usize, usize)], mesh_size: usize, seed: u64) -> Vec<LevelCheck> {
    let (p, q) = (ts.left().ambient_dim(), ts.right().ambient_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    levels
        .iter()
        .map(|&(k, l)| {
            let mut min_eig = f64::INFINITY;
            for _ in 0..mesh_size {
                let pm = sample_cone(ts.left(), k, rng.gen());
                let qm = sample_cone(ts.right(), l, rng.gen());
                let h = joint_matrix(f, n, &pm, k, &qm, l, p, q);
                let e = eig_herm(&h.hermitian_part()).expect("hermitized").min();
                min_eig = min_eig.min(e);
            }
            LevelCheck {
                k,
                l,
                samples: mesh_size,
                min_eig,
            }
        })
        .collect()
}

/// `⟨−F, atom⟩` maximized over normalized atoms with `P` at level `k`; a
/// positive value is a concrete violation of joint positivity.
pub fn adversarial_max(ts: &TensorSystem, f: &CMatrix, n: usize, k: usize, seed: u64) -> f64 {
    let search = AtomSearch::new(ts.left(), ts.right(), n, k);
    search.search(&f.scale(-1.0), seed, None).value
}

fn normalize(f: &CMatrix) -> Option<CMatrix> {
    let t = f.trace().re;
    (t > 0.0).then(|| f.scale(1.0 / t))
}

fn project_functional(ts: &TensorSystem, n: usize, f: &CMatrix) -> CMatrix {
    LevelProjector::new(ts.product(), n).project(&f.hermitian_part())
}

pub fn max_refute(ts: &TensorSystem, x: &LevelElement, opts: &RefuteOptions) -> Result<RefuteOutcome> {
    ts.check(x)?;
    let n = x.level();
    let xr = x.realize();
    let xnorm = xr.frobenius_norm();
    let need = -opts.threshold * xnorm;
    let d = xr.rows();
    let e = eig_herm(&xr)?;

    // states refute anything outside the minimal cone
    if e.min() <= need {
        let xi = e.vectors.col(0);
        let f = project_functional(ts, n, &CMatrix::outer(&xi));
        let margin = f.trace_product(&xr).re;
        return Ok(RefuteOutcome::Evidence(RefutationEvidence {
            functional: LevelElement::from_realization(ts.product(), n, &f, 1e-9)?,
            source: FunctionalSource::VectorState,
            mixing: 0.0,
            checked_levels: opts.levels.clone(),
            margin,
            threshold: opts.threshold,
            jointcp_residuals: mesh_check(ts, &f, n, &opts.levels, opts.mesh_size, opts.seed),
            fresh_mesh: mesh_check(ts, &f, n, &opts.levels, 10 * opts.mesh_size, opts.seed ^ 0x5eed_f00d),
            adversarial_max: adversarial_max(ts, &f, n, ts.left().ambient_dim(), opts.seed),
        }));
    }

    let copts = CertifyOptions {
        epsilon: opts.epsilon,
        budget: opts.budget,
        seed: opts.seed,
        ..Default::default()
    };
    // exact routes first: a certified element cannot be refuted
    if let Ok(MaxOutcome::Certified(_)) = max_certify(ts, x, &CertifyOptions { budget: 0, ..copts.clone() }) {
        return Ok(RefuteOutcome::NotFound {
            budget: opts.budget,
            reason: "element certified in the maximal cone".into(),
        });
    }
    let tau = CMatrix::identity(d).scale(1.0 / d as f64);
    let mut found: Option<RefutationEvidence> = None;
    let mut last_try = 0u64;
    let mut monitor = |st: &SearchState| -> bool {
        // candidates are only worth validating once the search slows down
        let slow = st.lmo_value <= 1e-3 * st.residual * st.residual;
        if !slow || (st.step < last_try + 5 && st.lmo_value > 1e-12 * st.residual) {
            return false;
        }
        last_try = st.step;
        found = validate_separator(ts, n, &xr, &tau, st.separator, need, opts);
        found.is_some()
    };
    let outcome = certify_search(ts, x, &copts, &mut monitor)?;
    if let Some(ev) = found {
        return Ok(RefuteOutcome::Evidence(ev));
    }
    let residual = match outcome {
        MaxOutcome::Certified(_) => {
            return Ok(RefuteOutcome::NotFound {
                budget: opts.budget,
                reason: "element certified in the maximal cone".into(),
            })
        }
        MaxOutcome::Fail(f) => {
            if let Some(ev) = validate_separator(ts, n, &xr, &tau, &f.separator, need, opts) {
                return Ok(RefuteOutcome::Evidence(ev));
            }
            f.residual
        }
    };
    Ok(RefuteOutcome::NotFound {
        budget: opts.budget,
        reason: format!(
            "no jointly positive functional with margin below {:.3e} (search residual {:.3e})",
            need, residual
        ),
    })
}

/// Turns a search residual `R` into `F = −R/tr(−R)`, mixed with the
/// normalized trace if needed, and runs every check.
fn validate_separator(
    ts: &TensorSystem,
    n: usize,
    xr: &CMatrix,
    tau: &CMatrix,
    separator: &CMatrix,
    need: f64,
    opts: &RefuteOptions,
) -> Option<RefutationEvidence> {
    let raw = normalize(&project_functional(ts, n, &separator.scale(-1.0)))?;
    let tol = 1e-8;
    for &t in &[0.0, 1e-3, 1e-2, 3e-2, 0.1, 0.2, 0.3, 0.5] {
        let f = &raw.scale(1.0 - t) + &tau.scale(t);
        let margin = f.trace_product(xr).re;
        if margin > need {
            break;
        }
        let scale = f.frobenius_norm();
        let mesh = mesh_check(ts, &f, n, &opts.levels, opts.mesh_size, opts.seed);
        if mesh.iter().any(|c| c.min_eig < -tol * scale) {
            continue;
        }
        let adv = adversarial_max(ts, &f, n, ts.left().ambient_dim(), opts.seed.wrapping_add(77));
        if adv > tol * scale {
            continue;
        }
        let fresh = mesh_check(ts, &f, n, &opts.levels, 10 * opts.mesh_size, opts.seed ^ 0x5eed_f00d);
        if fresh.iter().any(|c| c.min_eig < -tol * scale) {
            continue;
        }
        return Some(RefutationEvidence {
            functional: LevelElement::from_realization(ts.product(), n, &f, 1e-8).ok()?,
            source: FunctionalSource::Separator,
            mixing: t,
            checked_levels: opts.levels.clone(),
            margin,
            threshold: opts.threshold,
            jointcp_residuals: mesh,
            fresh_mesh: fresh,
            adversarial_max: adv,
        });
    }
    None
}

/// `Σ c_ij E_ij ⊗ E_ij` with `c = [[1, a, 0], [a, 1, b], [0, b, 1]]`, an
/// element of `TRI3 ⊗ TRI3` that is min-positive iff `a² + b² ≤ 1`.
pub fn tri3_pattern_element(ts: &TensorSystem, a: f64, b: f64) -> Result<LevelElement> {
    let c = [[1.0, a, 0.0], [a, 1.0, b], [0.0, b, 1.0]];
    let mut x = CMatrix::zeros(9, 9);
    for i in 0..3 {
        for j in 0..3 {
            x[(i * 3 + i, j * 3 + j)] = C64::new(c[i][j], 0.0);
        }
    }
    ts.element(1, &x, 1e-12)
}
