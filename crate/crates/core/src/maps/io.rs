use serde::{Deserialize, Serialize};

use super::SystemMap;
use crate::error::{Error, Result};
use crate::system::{named_system, MatrixOperatorSystem, SystemFile};

/// A system inside a map or certificate file: a built-in name, `{"full": q}`
/// for `M_q`, or an inline system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Full { full: usize },
    Named(String),
    Inline(SystemFile),
}

impl SystemRef {
    pub fn of(s: &MatrixOperatorSystem) -> Self {
        if s.is_full() {
            Self::Full { full: s.ambient_dim() }
        } else {
            Self::Inline(SystemFile::from_system(s))
        }
    }

    pub fn resolve(&self) -> Result<MatrixOperatorSystem> {
        match self {
            Self::Full { full } if *full > 0 => Ok(MatrixOperatorSystem::full(*full)),
            Self::Full { .. } => Err(Error::Malformed("full matrix algebra of size 0".into())),
            Self::Named(name) => named_system(name).ok_or_else(|| Error::Malformed(format!("unknown system `{name}`"))),
            Self::Inline(f) => f.to_system(),
        }
    }
}

/// `{"domain", "codomain", "action"}` with `action[b][a]` the coefficient of
/// the codomain basis element `b` in the image of domain basis element `a`.
/// Bases are the canonical ones rebuilt from the referenced systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub domain: SystemRef,
    pub codomain: SystemRef,
    pub action: Vec<Vec<f64>>,
}

impl MapFile {
    pub fn from_map(f: &SystemMap) -> Self {
        let m = f.domain().dim();
        Self {
            domain: SystemRef::of(f.domain()),
            codomain: SystemRef::of(f.codomain()),
            action: f.action().chunks(m).map(|r| r.to_vec()).collect(),
        }
    }

    pub fn to_map(&self) -> Result<SystemMap> {
        let dom = self.domain.resolve()?;
        let cod = self.codomain.resolve()?;
        if self.action.len() != cod.dim() || self.action.iter().any(|r| r.len() != dom.dim()) {
            return Err(Error::Malformed(format!(
                "action must be {}x{} for these systems",
                cod.dim(),
                dom.dim()
            )));
        }
        SystemMap::new(&dom, &cod, self.action.concat())
    }
}

impl SystemMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MapFile::from_map(self)).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: MapFile = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        f.to_map()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::random_ucp_to_matrices;
    use crate::system::tri3;

    #[test]
    fn map_round_trip() {
        let f = random_ucp_to_matrices(&tri3(), 2, 1);
        let text = f.to_json();
        assert!(text.contains(r#""codomain":{"full":2}"#));
        let g = SystemMap::from_json(&text).unwrap();
        assert_eq!(g.action(), f.action());
        for b in tri3().basis() {
            let d = &g.apply(b.matrix()).unwrap() - &f.apply(b.matrix()).unwrap();
            assert_eq!(d.frobenius_norm(), 0.0);
        }
    }

    #[test]
    fn named_domain_resolves() {
        let text = r#"{"domain":"trivial2","codomain":{"full":1},"action":[[1.0]]}"#;
        let f = SystemMap::from_json(text).unwrap();
        assert!(f.unital_residual() < 1e-12);
    }

    #[test]
    fn wrong_action_shape_is_rejected() {
        let text = r#"{"domain":{"full":2},"codomain":{"full":1},"action":[[1.0]]}"#;
        assert!(matches!(SystemMap::from_json(text), Err(Error::Malformed(_))));
    }
}
