//! Products of spanning elements that leave the system.

use serde::{Deserialize, Serialize};

use crate::conic::CMatrix;
use crate::error::Result;
use crate::system::MatrixOperatorSystem;

/// Products are flagged only when they sit at least this far from the span.
pub const WITNESS_RESIDUAL: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionWitness {
    pub a_label: String,
    pub b_label: String,
    pub product_label: String,
    pub a: CMatrix,
    pub b: CMatrix,
    pub product: CMatrix,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub witnesses: Vec<ObstructionWitness>,
    /// Products left the span by less than [`WITNESS_RESIDUAL`] but more
    /// than round-off.
    pub near_misses: usize,
    /// No scanned product leaves the span. Says nothing about products of
    /// elements outside the scanned set.
    pub closed_under_scanned_products: bool,
}

fn unit_label(i: usize, j: usize) -> String {
    format!("E_{}{}", i + 1, j + 1)
}

fn label_of(m: &CMatrix) -> String {
    let nz: Vec<(usize, usize)> = (0..m.rows())
        .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| m[(i, j)].norm() > 1e-12)
        .collect();
    match nz.as_slice() {
        [(i, j)] if (m[(*i, *j)].re - 1.0).abs() < 1e-12 && m[(*i, *j)].im.abs() < 1e-12 => unit_label(*i, *j),
        _ => "product".into(),
    }
}

/// Scans `a·b` over the matrix units lying in `S` and the hermitian basis.
pub fn algebra_obstruction(s: &MatrixOperatorSystem) -> Result<ObstructionReport> {
    let d = s.ambient_dim();
    let mut scan: Vec<(String, CMatrix)> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let u = CMatrix::unit(d, i, j);
            if s.contains(&u, 1e-9)?.member {
                scan.push((unit_label(i, j), u));
            }
        }
    }
    for (k, b) in s.basis().iter().enumerate().skip(1) {
        scan.push((format!("h_{k}"), b.matrix().clone()));
    }
    let mut witnesses = Vec::new();
    let mut near_misses = 0;
    for (la, a) in &scan {
        for (lb, b) in &scan {
            let ab = a.matmul(b);
            let scale = ab.frobenius_norm();
            if scale < 1e-12 {
                continue;
            }
            let residual = s.contains(&ab, 0.0)?.residual;
            if residual >= WITNESS_RESIDUAL * scale.max(1.0) {
                witnesses.push(ObstructionWitness {
                    a_label: la.clone(),
                    b_label: lb.clone(),
                    product_label: label_of(&ab),
                    a: a.clone(),
                    b: b.clone(),
                    product: ab,
                    residual,
                });
            } else if residual > 1e-9 * (1.0 + scale) {
                near_misses += 1;
            }
        }
    }
    Ok(ObstructionReport {
        closed_under_scanned_products: witnesses.is_empty() && near_misses == 0,
        witnesses,
        near_misses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compacts::build_s0;
    use crate::system::tri3;

    fn has(r: &ObstructionReport, a: &str, b: &str, p: &str) -> bool {
        r.witnesses.iter().any(|w| w.a_label == a && w.b_label == b && w.product_label == p)
    }

    #[test]
    fn s0_witness() {
        let s0 = build_s0(2).unwrap();
        let sys = s0.system();
        let r = algebra_obstruction(&sys).unwrap();
        assert!(has(&r, "E_12", "E_21", "E_11"));
        for w in &r.witnesses {
            assert!(!sys.contains(&w.product, 1e-9).unwrap().member);
            assert!(!s0.contains(&w.product, 1e-9).unwrap());
        }
    }

    #[test]
    fn full_algebra_is_closed() {
        let r = algebra_obstruction(&MatrixOperatorSystem::full(3)).unwrap();
        assert!(r.witnesses.is_empty() && r.closed_under_scanned_products);
    }

    #[test]
    fn tri3_witness() {
        let r = algebra_obstruction(&tri3()).unwrap();
        let w = r.witnesses.iter().find(|w| w.a_label == "E_12" && w.b_label == "E_23").unwrap();
        assert_eq!(w.product_label, "E_13");
        assert!((w.residual - 1.0).abs() < 1e-12);
    }
}
