//! The report behind `opsys s0-demo`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    algebra_obstruction, bidual_equivalence_audit, build_s0, convergence_test, corner_free, dual_positive_s0, BidualAudit,
    S0DualCheck,
};
use crate::conic::{CMatrix, C64};
use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveReport {
    pub label: String,
    pub in_s0: bool,
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualExample {
    pub label: String,
    pub beta: f64,
    pub check: S0DualCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessRow {
    pub a: String,
    pub b: String,
    pub product: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct S0Demo {
    pub truncation: usize,
    pub dim: usize,
    pub curves: Vec<CurveReport>,
    pub dual_examples: Vec<DualExample>,
    pub bidual_audit: BidualAudit,
    /// Scanned on the `N = 2` system, where the concrete basis is small.
    pub witnesses: Vec<WitnessRow>,
}

/// Convergence curves for a corner-supported element, a decaying compact
/// and `E_11`, the duality checks and the product obstruction.
pub fn s0_demo(n: usize, samples: usize, seed: u64) -> Result<S0Demo> {
    let model = build_s0(n)?;
    let levels: Vec<usize> = (1..=n).collect();
    let n0 = 3.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corner = CMatrix::random_hermitian(n0, &mut rng);
    corner[(0, 0)] = C64::new(0.0, 0.0);
    let mut k = CMatrix::zeros(n, n);
    k.set_block(0, 0, &corner);
    let inputs = [
        (format!("corner-supported, n0 = {n0}"), model.compact(&k)?),
        ("(i+j)^-2 with zero (1,1) entry".to_string(), model.compact(&corner_free(n, |i, j| 1.0 / ((i + j + 2) as f64).powi(2)))?),
        ("E_11".to_string(), {
            let mut e = CMatrix::zeros(n + 1, n + 1);
            e[(0, 0)] = C64::new(1.0, 0.0);
            e
        }),
    ];
    let mut curves = Vec::new();
    for (label, x) in inputs {
        let c = convergence_test(&model, &x, &levels)?;
        curves.push(CurveReport {
            label,
            in_s0: c.in_s0,
            levels: c.levels,
            errors: c.errors,
            nonincreasing: c.nonincreasing,
        });
    }
    let off = {
        let mut t = CMatrix::zeros(2, 2);
        t[(0, 1)] = C64::new(1.0, 0.0);
        t[(1, 0)] = C64::new(1.0, 0.0);
        t
    };
    let diag = CMatrix::diag(&[0.0, 1.0]);
    let dual_examples = vec![
        DualExample {
            label: "E_12 + E_21".into(),
            beta: 10.0,
            check: dual_positive_s0(10.0, &off)?,
        },
        DualExample {
            label: "diag(0, 1)".into(),
            beta: 1.0,
            check: dual_positive_s0(1.0, &diag)?,
        },
        DualExample {
            label: "diag(0, 1)".into(),
            beta: 0.5,
            check: dual_positive_s0(0.5, &diag)?,
        },
    ];
    let bidual_audit = bidual_equivalence_audit(n.min(8), samples, seed)?;
    let witnesses = algebra_obstruction(&build_s0(2)?.system())?
        .witnesses
        .into_iter()
        .map(|w| WitnessRow {
            a: w.a_label,
            b: w.b_label,
            product: w.product_label,
            residual: w.residual,
        })
        .collect();
    Ok(S0Demo {
        truncation: n,
        dim: model.dim(),
        curves,
        dual_examples,
        bidual_audit,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_at_sixteen() {
        let d = s0_demo(16, 50, 0).unwrap();
        assert_eq!(d.curves.len(), 3);
        assert!(d.curves[0].errors[2..].iter().all(|&e| e <= 1e-12));
        assert!(d.curves[1].nonincreasing);
        assert!(!d.curves[2].in_s0);
        assert!(!d.dual_examples[0].check.positive);
        assert!(d.bidual_audit.passes());
        assert!(d.witnesses.iter().any(|w| w.a == "E_12" && w.b == "E_21" && w.product == "E_11"));
    }
}
