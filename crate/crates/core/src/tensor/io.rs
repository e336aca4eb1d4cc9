//! Certificate files and their one-pass checker.

use serde::{Deserialize, Serialize};

use super::atoms::realize_atom;
use super::refute::{mesh_check, RefutationEvidence};
use super::{MaxDecomposition, TensorSystem};
use crate::conic::{eig_herm, CMatrix};
use crate::error::{Error, Result};
use crate::maps::SystemRef;
use crate::system::{matrix_from_pairs, matrix_to_pairs, LevelElement, MatrixOperatorSystem};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Member,
    Refute,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFile {
    pub k: usize,
    pub l: usize,
    #[serde(rename = "P")]
    pub p: Vec<[f64; 2]>,
    #[serde(rename = "Q")]
    pub q: Vec<[f64; 2]>,
    pub alpha: Vec<[f64; 2]>,
}

/// Everything a checker needs: both factors, the target (realized, row
/// major), and either atoms or a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub kind: CertificateKind,
    pub epsilon: f64,
    pub residual: f64,
    pub atoms: Vec<AtomFile>,
    pub levels: Vec<(usize, usize)>,
    pub seed: u64,
    pub tool_version: String,
    pub left: SystemRef,
    pub right: SystemRef,
    pub level: usize,
    pub target: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl CertificateFile {
    fn base(ts: &TensorSystem, x: &LevelElement, kind: CertificateKind, seed: u64) -> Self {
        Self {
            kind,
            epsilon: 0.0,
            residual: 0.0,
            atoms: Vec::new(),
            levels: Vec::new(),
            seed,
            tool_version: TOOL_VERSION.into(),
            left: SystemRef::of(ts.left()),
            right: SystemRef::of(ts.right()),
            level: x.level(),
            target: matrix_to_pairs(&x.realize()),
            functional: None,
            margin: None,
            threshold: None,
        }
    }

    pub fn member(ts: &TensorSystem, d: &MaxDecomposition, seed: u64) -> Self {
        let mut f = Self::base(ts, &d.target, CertificateKind::Member, seed);
        f.epsilon = d.epsilon;
        f.residual = d.residual;
        f.atoms = d
            .atoms
            .iter()
            .map(|a| AtomFile {
                k: a.k,
                l: a.l,
                p: matrix_to_pairs(&a.p.realize()),
                q: matrix_to_pairs(&a.q.realize()),
                alpha: matrix_to_pairs(&a.alpha),
            })
            .collect();
        f.levels = d.atoms.iter().map(|a| (a.k, a.l)).collect();
        f.levels.sort_unstable();
        f.levels.dedup();
        f
    }

    pub fn refute(ts: &TensorSystem, x: &LevelElement, ev: &RefutationEvidence, seed: u64) -> Self {
        let mut f = Self::base(ts, x, CertificateKind::Refute, seed);
        f.levels = ev.checked_levels.clone();
        f.functional = Some(matrix_to_pairs(&ev.functional.realize()));
        f.margin = Some(ev.margin);
        f.threshold = Some(ev.threshold);
        f
    }

    pub fn fail(ts: &TensorSystem, x: &LevelElement, epsilon: f64, residual: f64, seed: u64) -> Self {
        let mut f = Self::base(ts, x, CertificateKind::Fail, seed);
        f.epsilon = epsilon;
        f.residual = residual;
        f
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// `{"level": n, "matrix": [...]}` with the realization in
/// `M_n(M_p ⊗ M_q)` as row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFile {
    pub level: usize,
    pub matrix: Vec<[f64; 2]>,
}

impl ElementFile {
    pub fn from_element(x: &LevelElement) -> Self {
        Self {
            level: x.level(),
            matrix: matrix_to_pairs(&x.realize()),
        }
    }

    pub fn to_matrix(&self, ts: &TensorSystem) -> Result<CMatrix> {
        let d = self.level * ts.left().ambient_dim() * ts.right().ambient_dim();
        matrix_from_pairs(d, d, &self.matrix)
    }

    /// Reads the element back, rejecting anything outside `M_n(S ⊗ T)`.
    pub fn to_element(&self, ts: &TensorSystem) -> Result<LevelElement> {
        if self.level == 0 {
            return Err(Error::Malformed("level must be positive".into()));
        }
        let x = self.to_matrix(ts)?;
        ts.element(self.level, &x, 1e-8 * (1.0 + x.frobenius_norm()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub kind: CertificateKind,
    pub valid: bool,
    pub stored_residual: f64,
    pub recomputed_residual: f64,
    pub messages: Vec<String>,
}

fn cone_and_span(s: &MatrixOperatorSystem, level: usize, m: &CMatrix, what: &str, messages: &mut Vec<String>) {
    let scale = 1.0 + m.frobenius_norm();
    match LevelElement::project_realization(s, level, m) {
        Ok((_, r)) if r <= 1e-9 * scale => {}
        Ok((_, r)) => messages.push(format!("{what} leaves the system (residual {r:.3e})")),
        Err(e) => messages.push(format!("{what}: {e}")),
    }
    match eig_herm(m) {
        Ok(e) if e.min() >= -1e-9 * scale => {}
        Ok(e) => messages.push(format!("{what} is not positive (min eigenvalue {:.3e})", e.min())),
        Err(e) => messages.push(format!("{what}: {e}")),
    }
}

/// Re-checks a certificate from its own data. `element`, when given, must
/// match the stored target.
pub fn verify_certificate(cert: &CertificateFile, element: Option<&CMatrix>) -> Result<VerifyReport> {
    let s = cert.left.resolve()?;
    let t = cert.right.resolve()?;
    let (p, q, n) = (s.ambient_dim(), t.ambient_dim(), cert.level);
    let d = n * p * q;
    let x = matrix_from_pairs(d, d, &cert.target)?;
    let mut messages = Vec::new();
    if let Some(e) = element {
        if e.rows() != d || (e - &x).frobenius_norm() > 1e-12 * (1.0 + x.frobenius_norm()) {
            messages.push("target does not match the supplied element".into());
        }
    }
    let ts = TensorSystem::new(&s, &t);
    if LevelElement::project_realization(ts.product(), n, &x)?.1 > 1e-8 * (1.0 + x.frobenius_norm()) {
        messages.push("target is not in the tensor product".into());
    }
    let recomputed;
    match cert.kind {
        CertificateKind::Member => {
            let mut acc = CMatrix::zeros(d, d);
            for (idx, a) in cert.atoms.iter().enumerate() {
                let pm = matrix_from_pairs(a.k * p, a.k * p, &a.p)?;
                let qm = matrix_from_pairs(a.l * q, a.l * q, &a.q)?;
                let alpha = matrix_from_pairs(n, a.k * a.l, &a.alpha)?;
                cone_and_span(&s, a.k, &pm, &format!("atom {idx} P"), &mut messages);
                cone_and_span(&t, a.l, &qm, &format!("atom {idx} Q"), &mut messages);
                acc += &realize_atom(&pm, &qm, &alpha, a.k, a.l, p, q);
            }
            let shifted = &x + &CMatrix::identity(d).scale(cert.epsilon);
            recomputed = (&shifted - &acc).frobenius_norm();
            if (recomputed - cert.residual).abs() > 1e-10 {
                messages.push(format!(
                    "stored residual {:.3e} does not match recomputed {:.3e}",
                    cert.residual, recomputed
                ));
            }
            if recomputed > 1e-6 * (1.0 + x.frobenius_norm()) {
                messages.push(format!("residual {recomputed:.3e} exceeds the acceptance bound"));
            }
            if !(cert.epsilon >= 0.0) {
                messages.push("negative epsilon".into());
            }
        }
        CertificateKind::Refute => {
            let f = cert
                .functional
                .as_ref()
                .ok_or_else(|| Error::Malformed("refutation without a functional".into()))?;
            let f = matrix_from_pairs(d, d, f)?;
            let unit = f.trace().re;
            if (unit - 1.0).abs() > 1e-9 {
                messages.push(format!("functional is not unital (F(1) = {unit:.6e})"));
            }
            let margin = f.trace_product(&x).re;
            recomputed = margin;
            let threshold = cert.threshold.unwrap_or(1e-3);
            if margin > -threshold * x.frobenius_norm() {
                messages.push(format!("margin {margin:.3e} does not clear the threshold"));
            }
            if let Some(m) = cert.margin {
                if (m - margin).abs() > 1e-10 * (1.0 + m.abs()) {
                    messages.push(format!("stored margin {m:.3e} does not match recomputed {margin:.3e}"));
                }
            }
            let scale = f.frobenius_norm();
            for c in mesh_check(&ts, &f, n, &cert.levels, 40, cert.seed ^ 0xc4ec_0001) {
                if c.min_eig < -1e-8 * scale {
                    messages.push(format!("joint positivity fails at ({}, {}): {:.3e}", c.k, c.l, c.min_eig));
                }
            }
        }
        CertificateKind::Fail => {
            recomputed = cert.residual;
        }
    }
    Ok(VerifyReport {
        kind: cert.kind,
        valid: messages.is_empty(),
        stored_residual: cert.residual,
        recomputed_residual: recomputed,
        messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{random_positive, tri3};
    use crate::tensor::{matrix_factor_decompose, max_certify, CertifyOptions, MaxOutcome};

    #[test]
    fn member_certificate_round_trip() {
        let ts = TensorSystem::new(&MatrixOperatorSystem::full(2), &tri3());
        let x = random_positive(ts.product(), 2, 1);
        let MaxOutcome::Certified(d) = max_certify(&ts, &x, &CertifyOptions::default()).unwrap() else { panic!() };
        let cert = CertificateFile::member(&ts, &d, 0);
        let back = CertificateFile::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        let rep = verify_certificate(&back, Some(&x.realize())).unwrap();
        assert!(rep.valid, "{:?}", rep.messages);
        assert!((rep.recomputed_residual - d.residual).abs() <= 1e-10);
    }

    #[test]
    fn tampered_certificates_are_rejected() {
        let ts = TensorSystem::new(&MatrixOperatorSystem::full(2), &tri3());
        let x = random_positive(ts.product(), 1, 2);
        let d = matrix_factor_decompose(&ts, &x).unwrap();
        let mut cert = CertificateFile::member(&ts, &d, 0);
        cert.residual += 1e-6;
        assert!(!verify_certificate(&cert, None).unwrap().valid);

        let mut cert = CertificateFile::member(&ts, &d, 0);
        cert.atoms[0].q[0][0] += 0.5;
        assert!(!verify_certificate(&cert, None).unwrap().valid);

        let cert = CertificateFile::member(&ts, &d, 0);
        let other = random_positive(ts.product(), 1, 3).realize();
        assert!(!verify_certificate(&cert, Some(&other)).unwrap().valid);
    }

    #[test]
    fn kind_names_match_the_file_format() {
        let ts = TensorSystem::new(&tri3(), &tri3());
        let x = LevelElement::unit(ts.product(), 1);
        let text = CertificateFile::fail(&ts, &x, 1e-3, 0.5, 7).to_json();
        assert!(text.contains("\"kind\": \"fail\""));
        assert!(text.contains("\"tool_version\""));
    }
}
