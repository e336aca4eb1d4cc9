//! Three small computations for the static page in `www/`. Each export
//! returns a JSON string; the plain functions underneath are what the tests
//! call.

use opsys::compacts::{bidual_positive, build_s0, convergence_test, corner_free};
use opsys::conic::{eig_herm, CMatrix, C64};
use opsys::system::tri3;
use opsys::tensor::{max_certify, min_member, tri3_pattern_element, CertifyOptions, TensorSystem};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curves {
    pub levels: Vec<usize>,
    pub compact: Vec<f64>,
    pub e11: Vec<f64>,
}

/// Error curves of `ψ_n φ_n` at truncation `n` for the compact with
/// entries `(i + j + 2)^-decay` and for `E_11`.
pub fn s0_curves(n: usize, decay: f64) -> opsys::Result<Curves> {
    let model = build_s0(n)?;
    let levels: Vec<usize> = (1..=n).collect();
    let k = corner_free(n, |i, j| ((i + j + 2) as f64).powf(-decay));
    let compact = convergence_test(&model, &model.compact(&k)?, &levels)?.errors;
    let e11 = convergence_test(&model, &CMatrix::unit(n + 1, 0, 0), &levels)?.errors;
    Ok(Curves { levels, compact, e11 })
}

#[derive(Debug, Serialize)]
pub struct Region {
    pub mu: f64,
    pub extent: f64,
    pub steps: usize,
    /// Row-major over `(x_22, x_12)`, both in `[-extent, extent]`.
    pub positive: Vec<bool>,
}

/// Bidual positivity of `(μ, X_0)` for `X_0 = [[0, c], [c, d]]` over a grid.
pub fn bidual_grid(mu: f64, extent: f64, steps: usize) -> opsys::Result<Region> {
    let steps = steps.max(2);
    let at = |i: usize| -extent + 2.0 * extent * i as f64 / (steps - 1) as f64;
    let mut positive = Vec::with_capacity(steps * steps);
    for r in 0..steps {
        for c in 0..steps {
            let (d, off) = (at(steps - 1 - r), at(c));
            let mut x0 = CMatrix::zeros(2, 2);
            x0[(0, 1)] = C64::new(off, 0.0);
            x0[(1, 0)] = C64::new(off, 0.0);
            x0[(1, 1)] = C64::new(d, 0.0);
            positive.push(bidual_positive(mu, &x0)?);
        }
    }
    Ok(Region { mu, extent, steps, positive })
}

#[derive(Debug, Serialize)]
pub struct Spectrum {
    pub a: f64,
    pub b: f64,
    pub eigenvalues: Vec<f64>,
    pub min_positive: bool,
    pub certified: bool,
    pub residual: f64,
}

/// Spectrum of the pattern element with parameters `(a, b)` in
/// `TRI3 ⊗ TRI3`, with a short max-cone certification attempt.
pub fn tri3_spectrum(a: f64, b: f64, budget: usize) -> opsys::Result<Spectrum> {
    let ts = TensorSystem::new(&tri3(), &tri3());
    let x = tri3_pattern_element(&ts, a, b)?;
    let eigenvalues = eig_herm(&x.realize())?.values;
    let min_positive = min_member(&ts, &x, 1e-10)?;
    let (certified, residual) = if min_positive {
        let out = max_certify(&ts, &x, &CertifyOptions { budget, ..Default::default() })?;
        (out.is_certified(), out.residual())
    } else {
        (false, f64::NAN)
    };
    Ok(Spectrum {
        a,
        b,
        eigenvalues,
        min_positive,
        certified,
        residual,
    })
}

fn to_js<T: Serialize>(r: opsys::Result<T>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn s0_convergence(n: usize, decay: f64) -> Result<String, JsValue> {
    to_js(s0_curves(n, decay))
}

#[wasm_bindgen]
pub fn bidual_region(mu: f64, extent: f64, steps: usize) -> Result<String, JsValue> {
    to_js(bidual_grid(mu, extent, steps))
}

#[wasm_bindgen]
pub fn tri3_family_spectrum(a: f64, b: f64, budget: usize) -> Result<String, JsValue> {
    to_js(tri3_spectrum(a, b, budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_decay_and_e11_stalls() {
        let c = s0_curves(12, 2.0).unwrap();
        assert!(c.compact.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(c.compact[11] < 1e-12);
        assert!(c.e11.iter().all(|e| (e - 1.0).abs() < 1e-12));
    }

    #[test]
    fn region_matches_the_spectral_condition() {
        let r = bidual_grid(1.0, 2.0, 9);
        let r = r.unwrap();
        let at = |i: usize| -2.0 + 4.0 * i as f64 / 8.0;
        for (idx, &p) in r.positive.iter().enumerate() {
            let (d, c) = (at(8 - idx / 9), at(idx % 9));
            // μI + X_0 = [[1, c], [c, 1 + d]]
            let ok = 1.0 + d >= -1e-9 && (1.0 + d) - c * c >= -1e-9;
            assert_eq!(p, ok, "d = {d}, c = {c}");
        }
        assert!(!bidual_grid(-0.1, 1.0, 3).unwrap().positive.iter().any(|&p| p));
    }

    #[test]
    fn spectrum_tracks_the_disc() {
        let inside = tri3_spectrum(0.5, 0.5, 2000).unwrap();
        assert!(inside.min_positive);
        let outside = tri3_spectrum(0.9, 0.9, 2000).unwrap();
        assert!(!outside.min_positive && !outside.certified);
        assert!(outside.eigenvalues[0] < 0.0);
        let json = tri3_family_spectrum(0.9, 0.9, 10).unwrap();
        assert!(json.contains("\"min_positive\":false"));
    }
}
