use serde::{Deserialize, Serialize};

use super::MatrixOperatorSystem;
use crate::conic::{CMatrix, C64};
use crate::error::{Error, Result};

/// On-disk form of a system: `{"ambient_dim": d, "generators": [...]}`,
/// each generator a row-major list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub ambient_dim: usize,
    pub generators: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

pub fn matrix_from_pairs(rows: usize, cols: usize, pairs: &[[f64; 2]]) -> Result<CMatrix> {
    if pairs.len() != rows * cols {
        return Err(Error::Malformed(format!(
            "expected {} entries for a {rows}x{cols} matrix, found {}",
            rows * cols,
            pairs.len()
        )));
    }
    if pairs.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Malformed("non-finite matrix entry".into()));
    }
    CMatrix::from_vec(rows, cols, pairs.iter().map(|p| C64::new(p[0], p[1])).collect())
}

impl SystemFile {
    pub fn from_system(s: &MatrixOperatorSystem) -> Self {
        Self {
            ambient_dim: s.ambient_dim(),
            generators: s.generators().iter().map(matrix_to_pairs).collect(),
        }
    }

    pub fn to_system(&self) -> Result<MatrixOperatorSystem> {
        let d = self.ambient_dim;
        let gens = self
            .generators
            .iter()
            .map(|g| matrix_from_pairs(d, d, g))
            .collect::<Result<Vec<_>>>()?;
        MatrixOperatorSystem::new(d, gens)
    }
}

impl MatrixOperatorSystem {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&SystemFile::from_system(self)).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        f.to_system()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::tri3;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let gens: Vec<CMatrix> = (0..3).map(|_| CMatrix::random_gaussian(3, 3, &mut rng)).collect();
        let s = MatrixOperatorSystem::new(3, gens.clone()).unwrap();
        let text = s.to_json();
        let back = MatrixOperatorSystem::from_json(&text).unwrap();
        for (a, b) in back.generators().iter().zip(&gens) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        assert_eq!(back.to_json(), text);
        for (a, b) in back.basis().iter().zip(s.basis()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tri3_round_trip() {
        let s = tri3();
        let back = MatrixOperatorSystem::from_json(&s.to_json()).unwrap();
        assert_eq!(back.dim(), 7);
        assert!(back.same_span(&s));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(MatrixOperatorSystem::from_json("{").is_err());
        assert!(MatrixOperatorSystem::from_json(r#"{"ambient_dim":2,"generators":[[[1,0]]]}"#).is_err());
        assert!(MatrixOperatorSystem::from_json(r#"{"ambient_dim":0,"generators":[]}"#).is_err());
    }
}
