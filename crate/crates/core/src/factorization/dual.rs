//! Elements of `M_k(E*)` as maps `E → M_k`, and the inclusion `E ⊆ S` as a
//! tensor in `E* ⊗ S`.

use crate::conic::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::maps::{is_cp_subsystem, SystemMap};
use crate::system::MatrixOperatorSystem;

/// `ω_1(x) = tr(x)/p`, the unit state used on every `E ⊆ M_p`.
pub fn unit_state_value(x: &CMatrix) -> C64 {
    x.trace() / x.rows() as f64
}

/// A `k×k` array of functionals on `E`, stored as the map `E → M_k`.
#[derive(Debug, Clone)]
pub struct DualSystemElement {
    map: SystemMap,
}

impl DualSystemElement {
    pub fn new(map: SystemMap) -> Result<Self> {
        if !map.codomain().is_full() {
            return Err(Error::Malformed("dual elements take values in a full matrix algebra".into()));
        }
        Ok(Self { map })
    }

    /// `ω_1` as a level-one element.
    pub fn unit_state(e: &MatrixOperatorSystem) -> Self {
        let map = SystemMap::from_fn(e, &MatrixOperatorSystem::full(1), |x| {
            CMatrix::identity(1).scale_c(unit_state_value(x))
        })
        .expect("the trace state is adjoint preserving");
        Self { map }
    }

    pub fn base(&self) -> &MatrixOperatorSystem {
        self.map.domain()
    }

    pub fn level(&self) -> usize {
        self.map.codomain().ambient_dim()
    }

    pub fn map(&self) -> &SystemMap {
        &self.map
    }

    /// `[f_ij(x)]`
    pub fn evaluate(&self, x: &CMatrix) -> Result<CMatrix> {
        self.map.apply(x)
    }

    /// Positive in `M_k(E*)` iff the map is completely positive.
    pub fn is_positive(&self, tol: f64) -> Result<bool> {
        Ok(is_cp_subsystem(&self.map, tol)?.is_member())
    }
}

/// `ι = Σ_a e_a* ⊗ e_a`, stored as `coeffs[a·dim S + b]`, the coefficient
/// of `e_a* ⊗ s_b`.
#[derive(Debug, Clone)]
pub struct InclusionElement {
    sub: MatrixOperatorSystem,
    system: MatrixOperatorSystem,
    coeffs: Vec<C64>,
}

pub fn inclusion_as_tensor_element(e: &MatrixOperatorSystem, s: &MatrixOperatorSystem) -> Result<InclusionElement> {
    if e.ambient_dim() != s.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: s.ambient_dim(),
            found: e.ambient_dim(),
        });
    }
    let mut coeffs = Vec::with_capacity(e.dim() * s.dim());
    for b in e.basis() {
        let m = b.matrix();
        let mem = s.contains(m, 1e-9 * (1.0 + m.frobenius_norm()))?;
        if !mem.member {
            return Err(Error::NotInSystem { residual: mem.residual });
        }
        coeffs.extend(s.coefficients(m)?);
    }
    Ok(InclusionElement {
        sub: e.clone(),
        system: s.clone(),
        coeffs,
    })
}

impl InclusionElement {
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `⟨y ⊗ g, ι⟩ = Σ_a e_a*(y) g(e_a)` for `y ∈ E` and the functional
    /// `g(s) = tr(ρ s)`.
    pub fn pair(&self, y: &CMatrix, rho: &CMatrix) -> Result<C64> {
        let ya = self.sub.coefficients(y)?;
        let gs: Vec<C64> = self.system.basis().iter().map(|b| rho.trace_product(b.matrix())).collect();
        let ds = self.system.dim();
        Ok(ya
            .iter()
            .enumerate()
            .map(|(a, ca)| *ca * (0..ds).map(|b| self.coeffs[a * ds + b] * gs[b]).sum::<C64>())
            .sum())
    }

    /// The inclusion read back as a map `E → S`.
    pub fn as_map(&self) -> Result<SystemMap> {
        let (de, ds) = (self.sub.dim(), self.system.dim());
        let mut action = vec![0.0; de * ds];
        for a in 0..de {
            for b in 0..ds {
                action[b * de + a] = self.coeffs[a * ds + b].re;
            }
        }
        SystemMap::new(&self.sub, &self.system, action)
    }
}
