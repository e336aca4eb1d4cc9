//! Sampling report comparing the minimal and maximal cones of `S ⊗ E` for
//! a list of partners `E`.

use serde::{Deserialize, Serialize};

use super::certify::{max_certify, CertifyOptions, MaxOutcome};
use super::refute::{max_refute, tri3_pattern_element, RefuteOptions, RefuteOutcome};
use super::TensorSystem;
use crate::conic::{eig_herm, CMatrix};
use crate::error::Result;
use crate::system::{random_positive, tri3, LevelElement, MatrixOperatorSystem};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuclearityOptions {
    pub n_max: usize,
    /// Random interior and boundary samples per level, each.
    pub samples_per_level: usize,
    pub budget: usize,
    pub seed: u64,
    /// Refutation attempts on failed elements, structured candidates first.
    pub max_refutations: usize,
    pub refute: RefuteOptions,
}

impl Default for NuclearityOptions {
    fn default() -> Self {
        Self {
            n_max: 2,
            samples_per_level: 3,
            budget: 200_000,
            seed: 0,
            max_refutations: 1,
            refute: RefuteOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Interior,
    Boundary,
    Candidate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementOutcome {
    pub kind: SampleKind,
    pub seed: u64,
    pub certified: bool,
    pub residual: f64,
    pub atoms: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub outcomes: Vec<ElementOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithNuclear,
    EvidenceAgainst {
        partner: usize,
        level: usize,
        margin: f64,
        label: String,
        functional: Vec<f64>,
    },
    Inconclusive {
        failures: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartnerReport {
    pub partner_dim: usize,
    pub partner_ambient: usize,
    pub levels: Vec<LevelReport>,
    pub certified: usize,
    pub total: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuclearityReport {
    pub system_dim: usize,
    pub system_ambient: usize,
    pub partners: Vec<PartnerReport>,
    pub verdict: Verdict,
}

/// Elements known to sit on the boundary of the minimal cone in a
/// structured way; currently the pattern family on `TRI3 ⊗ TRI3`.
pub fn structured_candidates(ts: &TensorSystem, n: usize) -> Vec<LevelElement> {
    let t3 = tri3();
    if n == 1 && ts.left().same_span(&t3) && ts.right().same_span(&t3) {
        let h = 0.5f64.sqrt();
        if let Ok(x) = tri3_pattern_element(&TensorSystem::new(&t3, &t3), h, h) {
            // re-read in this product's own basis
            if let Ok(y) = ts.element(1, &x.realize(), 1e-10) {
                return vec![y];
            }
        }
    }
    Vec::new()
}

fn boundary(x: &LevelElement) -> Result<LevelElement> {
    let r = x.realize();
    let lmin = eig_herm(&r)?.min();
    let shifted = &r - &CMatrix::identity(r.rows()).scale(lmin);
    LevelElement::from_realization(x.system(), x.level(), &shifted, 1e-8 * (1.0 + r.frobenius_norm()))
}

pub fn nuclearity_report(s: &MatrixOperatorSystem, partners: &[MatrixOperatorSystem], opts: &NuclearityOptions) -> Result<NuclearityReport> {
    let mut reports = Vec::with_capacity(partners.len());
    let mut overall_failures = 0;
    let mut overall_evidence: Option<Verdict> = None;
    for (pi, e) in partners.iter().enumerate() {
        let ts = TensorSystem::new(s, e);
        let mut levels = Vec::new();
        let mut failed: Vec<(usize, SampleKind, LevelElement)> = Vec::new();
        let (mut certified, mut total) = (0, 0);
        for n in 1..=opts.n_max {
            let mut samples: Vec<(SampleKind, u64, LevelElement)> = Vec::new();
            for c in structured_candidates(&ts, n) {
                samples.push((SampleKind::Candidate, 0, c));
            }
            for i in 0..opts.samples_per_level {
                let seed = opts.seed.wrapping_add((pi as u64) << 32 | (n as u64) << 16 | i as u64);
                let x = random_positive(ts.product(), n, seed);
                samples.push((SampleKind::Boundary, seed, boundary(&x)?));
                samples.push((SampleKind::Interior, seed, x));
            }
            let mut outcomes = Vec::new();
            for (kind, seed, x) in samples {
                let copts = CertifyOptions {
                    budget: opts.budget,
                    seed,
                    ..Default::default()
                };
                let out = max_certify(&ts, &x, &copts)?;
                total += 1;
                let (ok, residual, atoms) = match &out {
                    MaxOutcome::Certified(d) => (true, d.residual, d.atoms.len()),
                    MaxOutcome::Fail(f) => (false, f.residual, f.atoms),
                };
                if ok {
                    certified += 1;
                } else {
                    failed.push((n, kind, x.clone()));
                }
                outcomes.push(ElementOutcome {
                    kind,
                    seed,
                    certified: ok,
                    residual,
                    atoms,
                });
            }
            levels.push(LevelReport { n, outcomes });
        }
        // structured candidates first, then by level
        failed.sort_by_key(|(n, kind, _)| (*kind != SampleKind::Candidate, *n));
        let mut verdict = if failed.is_empty() {
            Verdict::ConsistentWithNuclear
        } else {
            Verdict::Inconclusive { failures: failed.len() }
        };
        for (n, _, x) in failed.iter().take(opts.max_refutations) {
            if let RefuteOutcome::Evidence(ev) = max_refute(&ts, x, &opts.refute)? {
                verdict = Verdict::EvidenceAgainst {
                    partner: pi,
                    level: *n,
                    margin: ev.margin,
                    label: ev.label(),
                    functional: ev.functional_vector(),
                };
                break;
            }
        }
        overall_failures += failed.len();
        if overall_evidence.is_none() && matches!(verdict, Verdict::EvidenceAgainst { .. }) {
            overall_evidence = Some(verdict.clone());
        }
        reports.push(PartnerReport {
            partner_dim: e.dim(),
            partner_ambient: e.ambient_dim(),
            levels,
            certified,
            total,
            verdict,
        });
    }
    let verdict = match overall_evidence {
        Some(v) => v,
        None if overall_failures == 0 => Verdict::ConsistentWithNuclear,
        None => Verdict::Inconclusive {
            failures: overall_failures,
        },
    };
    Ok(NuclearityReport {
        system_dim: s.dim(),
        system_ambient: s.ambient_dim(),
        partners: reports,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::diagonal;

    #[test]
    fn matrix_algebra_is_consistent_with_nuclear() {
        let partners = [tri3(), MatrixOperatorSystem::full(2), MatrixOperatorSystem::scalars(1)];
        let r = nuclearity_report(&MatrixOperatorSystem::full(2), &partners, &NuclearityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWithNuclear);
        for p in &r.partners {
            assert_eq!(p.certified, p.total);
        }
    }

    #[test]
    fn diagonal_algebra_against_tri3() {
        let r = nuclearity_report(&diagonal(3), &[tri3()], &NuclearityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWithNuclear);
    }

    #[test]
    fn scalars_are_trivially_nuclear() {
        let opts = NuclearityOptions {
            n_max: 1,
            ..Default::default()
        };
        let r = nuclearity_report(&MatrixOperatorSystem::scalars(1), &[tri3()], &opts).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWithNuclear);
    }

    #[test]
    fn candidates_only_for_tri3_pairs() {
        let ts = TensorSystem::new(&tri3(), &tri3());
        assert_eq!(structured_candidates(&ts, 1).len(), 1);
        assert!(structured_candidates(&ts, 2).is_empty());
        let ts = TensorSystem::new(&tri3(), &MatrixOperatorSystem::full(3));
        assert!(structured_candidates(&ts, 1).is_empty());
    }
}
