//! The unitized compacts with the `(1,1)` matrix unit removed, cut down to
//! `N` coordinates.
//!
//! Everything lives in `M_{N+1}`. Coordinates `0..N` carry the compact part
//! and coordinate `N` is a tail that only the identity reaches, standing in
//! for the infinitely many coordinates the compacts cannot fill. Without it
//! `I − Σ_{j≥2} E_jj` would put `E_11` back into the span.

mod demo;
mod duality;
mod obstruction;

use serde::{Deserialize, Serialize};

use crate::conic::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::maps::SystemMap;
use crate::system::MatrixOperatorSystem;

pub use demo::{s0_demo, CurveReport, S0Demo};
pub use duality::{
    bidual_equivalence_audit, bidual_positive, dual_positive_s, dual_positive_s0, pairing_s, BidualAudit, BidualRow,
    S0DualCheck,
};
pub use obstruction::{algebra_obstruction, ObstructionReport, ObstructionWitness};

/// `span{I} + span{E_ij : i, j < N}` (the unitized truncation), or the same
/// without `E_11` when `drops_corner` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedCompacts {
    n: usize,
    drops_corner: bool,
}

pub fn build_s0(n: usize) -> Result<TruncatedCompacts> {
    TruncatedCompacts::new(n, true)
}

pub fn build_s(n: usize) -> Result<TruncatedCompacts> {
    TruncatedCompacts::new(n, false)
}

impl TruncatedCompacts {
    fn new(n: usize, drops_corner: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::Malformed(format!("truncation must be at least 2, got {n}")));
        }
        Ok(Self { n, drops_corner })
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn drops_corner(&self) -> bool {
        self.drops_corner
    }

    pub fn ambient_dim(&self) -> usize {
        self.n + 1
    }

    pub fn dim(&self) -> usize {
        if self.drops_corner {
            self.n * self.n
        } else {
            self.n * self.n + 1
        }
    }

    pub fn unit(&self) -> CMatrix {
        CMatrix::identity(self.n + 1)
    }

    /// Frobenius distance to the span. The complement is spanned by the
    /// off-diagonal tail entries and, for `S_0`, by `(E_11 − E_tt)/√2`.
    pub fn residual(&self, x: &CMatrix) -> Result<f64> {
        let d = self.n + 1;
        if x.rows() != d || x.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.rows(),
            });
        }
        let t = self.n;
        let mut r2 = (0..t).map(|i| x[(i, t)].norm_sqr() + x[(t, i)].norm_sqr()).sum::<f64>();
        if self.drops_corner {
            r2 += (x[(0, 0)] - x[(t, t)]).norm_sqr() / 2.0;
        }
        Ok(r2.sqrt())
    }

    pub fn contains(&self, x: &CMatrix, tol: f64) -> Result<bool> {
        Ok(self.residual(x)? <= tol)
    }

    /// The concrete system; sizes grow as `N^4`, so keep `N` small.
    pub fn system(&self) -> MatrixOperatorSystem {
        let d = self.n + 1;
        let gens: Vec<CMatrix> = (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| !(self.drops_corner && i == 0 && j == 0))
            .map(|(i, j)| CMatrix::unit(d, i, j))
            .collect();
        MatrixOperatorSystem::new(d, gens).expect("matrix units are valid generators")
    }

    /// `φ_n(X) = V_n* X V_n`, the top-left `n×n` corner.
    pub fn phi_n(&self, x: &CMatrix, n: usize) -> Result<CMatrix> {
        self.check_level(n)?;
        let d = self.n + 1;
        if x.rows() != d || x.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.rows(),
            });
        }
        Ok(x.block(0, 0, n, n))
    }

    /// `ψ_n(Y) = V_n Y V_n* + y_11 Q_n` with `Q_n` the projection onto the
    /// coordinates from `n` on, tail included.
    pub fn psi_n(&self, y: &CMatrix, n: usize) -> Result<CMatrix> {
        self.check_level(n)?;
        if y.rows() != n || y.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.rows(),
            });
        }
        let d = self.n + 1;
        let mut out = CMatrix::zeros(d, d);
        out.set_block(0, 0, y);
        for i in n..d {
            out[(i, i)] = y[(0, 0)];
        }
        Ok(out)
    }

    pub fn phi_map(&self, n: usize) -> Result<SystemMap> {
        self.check_level(n)?;
        SystemMap::from_fn(&MatrixOperatorSystem::full(self.n + 1), &MatrixOperatorSystem::full(n), |x| x.block(0, 0, n, n))
    }

    pub fn psi_map(&self, n: usize) -> Result<SystemMap> {
        self.check_level(n)?;
        SystemMap::from_fn(&MatrixOperatorSystem::full(n), &MatrixOperatorSystem::full(self.n + 1), |y| {
            self.psi_n(y, n).expect("level checked")
        })
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    /// `(ψ_n ∘ φ_n)^{(m)}` on an `m×m` block matrix.
    pub fn round_trip(&self, x: &CMatrix, n: usize) -> Result<CMatrix> {
        let d = self.n + 1;
        let m = self.level_of(x)?;
        let mut out = CMatrix::zeros(m * d, m * d);
        for i in 0..m {
            for j in 0..m {
                let b = x.block(i * d, j * d, d, d);
                out.set_block(i * d, j * d, &self.psi_n(&self.phi_n(&b, n)?, n)?);
            }
        }
        Ok(out)
    }

    fn level_of(&self, x: &CMatrix) -> Result<usize> {
        let d = self.n + 1;
        if x.rows() != x.cols() || x.rows() % d != 0 || x.rows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.rows(),
            });
        }
        Ok(x.rows() / d)
    }

    /// Whether every block of an `m×m` block matrix lies in the span.
    pub fn contains_blocks(&self, x: &CMatrix, tol: f64) -> Result<bool> {
        let d = self.n + 1;
        let m = self.level_of(x)?;
        for i in 0..m {
            for j in 0..m {
                if !self.contains(&x.block(i * d, j * d, d, d), tol)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Embeds an `N×N` matrix as the compact part.
    pub fn compact(&self, k: &CMatrix) -> Result<CMatrix> {
        if k.rows() != self.n || k.cols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: k.rows(),
            });
        }
        let mut out = CMatrix::zeros(self.n + 1, self.n + 1);
        out.set_block(0, 0, k);
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    /// Whether the input has all its blocks in `S_0`.
    pub in_s0: bool,
    pub nonincreasing: bool,
}

/// `‖X − (ψ_n φ_n)^{(m)}(X)‖` for each `n` in `levels`.
pub fn convergence_test(model: &TruncatedCompacts, x: &CMatrix, levels: &[usize]) -> Result<ConvergenceCurve> {
    let s0 = build_s0(model.truncation())?;
    let in_s0 = s0.contains_blocks(x, 1e-12 * (1.0 + x.max_abs()))?;
    let mut errors = Vec::with_capacity(levels.len());
    for &n in levels {
        errors.push((x - &model.round_trip(x, n)?).op_norm());
    }
    let nonincreasing = errors.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(ConvergenceCurve {
        levels: levels.to_vec(),
        errors,
        in_s0,
        nonincreasing,
    })
}

/// `N×N` matrix with entries `f(i, j)` (zero-based) and a zero `(1,1)` entry.
pub fn corner_free(n: usize, f: impl Fn(usize, usize) -> f64) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| if i == 0 && j == 0 { C64::new(0.0, 0.0) } else { C64::new(f(i, j), 0.0) })
}
