//! Browser bindings for three interactive panels: the sliding cutoff
//! profile, the kinked-profile energy comparison, and a one-dimensional
//! gradient flow that relaxes a perturbed transition layer.
//!
//! Build the wasm package with
//! `wasm-pack build crates/demo --target web --out-dir www/pkg`
//! and serve `crates/demo/www/`. The numerical entry points live in
//! plain Rust functions so the host test suite exercises them directly;
//! the `wasm_bindgen` wrappers only translate errors into JS values.

use wasm_bindgen::prelude::*;

use varslide::deformation::CutoffProfile;
use varslide::energy::{energy, QuadratureRule};
use varslide::field::{Grid, ScalarField};
use varslide::integrand::{Integrand, Params};
use varslide::solver::{gradient_flow, BoundaryRule, FlowConfig};
use varslide::Result as CoreResult;

/// Sample the cutoff profile and its derivative on a log-spaced axis
/// from 1 to `1.5 * radius`. Returns flattened triples
/// `(s, psi(s), psi'(s))`.
fn cutoff_samples_impl(radius: f64, level: u32, shift: f64, count: usize) -> CoreResult<Vec<f64>> {
    let profile = CutoffProfile::new(radius, level, shift)?;
    let count = count.max(2);
    let top = 1.5 * radius;
    let mut out = Vec::with_capacity(3 * count);
    for i in 0..count {
        let frac = i as f64 / (count - 1) as f64;
        let s = top.powf(frac);
        out.push(s);
        out.push(profile.value(s));
        out.push(profile.derivative(s));
    }
    Ok(out)
}

/// Measured ball energies of the kink `|t|` and its piecewise-deformed
/// competitor `2(|t| + 1)/3`, followed by the continuum targets `2R` and
/// `8R/9`.
fn kink_energies_impl(radius: f64, spacing: f64) -> CoreResult<Vec<f64>> {
    let grid = Grid::symmetric(&[2.0 * radius], spacing, 1)?;
    let u = ScalarField::from_fn(grid.clone(), |x| x[0].abs());
    let v = ScalarField::from_fn(grid, |x| 2.0 * (x[0].abs() + 1.0) / 3.0);
    let f = Integrand::catalog("abs_example", 1, &Params::new())?;
    let rule = QuadratureRule::midpoint();
    Ok(vec![
        energy(&u, &f, radius, &rule)?,
        energy(&v, &f, radius, &rule)?,
        2.0 * radius,
        8.0 * radius / 9.0,
    ])
}

#[wasm_bindgen]
pub fn cutoff_samples(radius: f64, level: u32, shift: f64, count: usize) -> Result<Vec<f64>, JsValue> {
    cutoff_samples_impl(radius, level, shift, count).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn kink_energies(radius: f64, spacing: f64) -> Result<Vec<f64>, JsValue> {
    kink_energies_impl(radius, spacing).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Interactive gradient flow of a perturbed one-dimensional transition
/// layer under the double-well density. The endpoints stay pinned; the
/// `step` method advances a fixed number of explicit Euler steps and
/// reports the residual, so the page can animate the relaxation.
#[wasm_bindgen]
pub struct FlowDemo {
    field: ScalarField,
    integrand: Integrand,
    dt: f64,
    residual: f64,
}

impl FlowDemo {
    fn build(half_width: f64, spacing: f64, amplitude: f64) -> CoreResult<FlowDemo> {
        let grid = Grid::symmetric(&[half_width], spacing, 1)?;
        let root2 = f64::sqrt(2.0);
        let field = ScalarField::from_fn(grid, move |x| {
            let bump = amplitude * (std::f64::consts::PI * x[0] / half_width).sin();
            (x[0] / root2).tanh() + bump
        });
        let integrand = Integrand::catalog("allen_cahn", 1, &Params::new())?;
        // Explicit stability cap is h^2 / 2 in one dimension; keep a margin.
        let dt = 0.45 * spacing * spacing;
        Ok(FlowDemo { field, integrand, dt, residual: f64::NAN })
    }

    fn advance(&mut self, steps: usize) -> CoreResult<f64> {
        let cfg = FlowConfig {
            dt: self.dt,
            max_steps: steps.max(1),
            tolerance: 0.0,
            bc: vec![BoundaryRule::Fixed],
            check_every: 0,
        };
        let out = gradient_flow(&self.field, &self.integrand, &cfg)?;
        self.field = out.field;
        self.residual = out.residual;
        Ok(self.residual)
    }
}

#[wasm_bindgen]
impl FlowDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(half_width: f64, spacing: f64, amplitude: f64) -> Result<FlowDemo, JsValue> {
        FlowDemo::build(half_width, spacing, amplitude)
            .map_err(|e| JsValue::from_str(&e.to_string()))
    }

    /// Advance `steps` explicit Euler steps; returns the new residual.
    pub fn step(&mut self, steps: usize) -> Result<f64, JsValue> {
        self.advance(steps).map_err(|e| JsValue::from_str(&e.to_string()))
    }

    /// Node positions along the axis.
    pub fn positions(&self) -> Vec<f64> {
        let grid = self.field.grid();
        (0..grid.extent_of(0)).map(|i| grid.pos(0, i)).collect()
    }

    /// Current field values, one per node.
    pub fn values(&self) -> Vec<f64> {
        self.field.values().to_vec()
    }

    /// Current total energy of the field.
    pub fn energy(&self) -> Result<f64, JsValue> {
        energy(&self.field, &self.integrand, f64::INFINITY, &QuadratureRule::midpoint())
            .map_err(|e| JsValue::from_str(&e.to_string()))
    }

    /// Residual after the last `step` call (NaN before the first).
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_samples_cover_the_plateau_and_the_tail() {
        let radius = 1e4;
        let samples = cutoff_samples_impl(radius, 0, 0.0, 200).unwrap();
        assert_eq!(samples.len(), 600);
        // s-coordinates increase and span 1 .. 1.5 R.
        assert!((samples[0] - 1.0).abs() < 1e-12);
        assert!((samples[597] - 1.5 * radius).abs() < 1e-6 * radius);
        // The profile starts at 1 and dies beyond R.
        assert_eq!(samples[1], 1.0);
        assert_eq!(samples[598], 0.0);
        // Derivative is nonpositive everywhere.
        for triple in samples.chunks(3) {
            assert!(triple[2] <= 0.0, "psi' = {} at s = {}", triple[2], triple[0]);
        }
    }

    #[test]
    fn kink_energies_match_the_closed_forms() {
        let e = kink_energies_impl(2.0, 1e-3).unwrap();
        assert!((e[0] - e[2]).abs() / e[2] < 1e-3, "E_u = {}", e[0]);
        assert!((e[1] - e[3]).abs() / e[3] < 1e-3, "E_v = {}", e[1]);
        assert!(e[1] < e[0], "the competitor must win");
    }

    #[test]
    fn flow_demo_relaxes_the_perturbation() {
        let mut demo = FlowDemo::build(6.0, 0.05, 0.2).unwrap();
        let e0 = energy(
            &demo.field,
            &demo.integrand,
            f64::INFINITY,
            &QuadratureRule::midpoint(),
        )
        .unwrap();
        let r1 = demo.advance(200).unwrap();
        let r2 = demo.advance(2000).unwrap();
        let e1 = energy(
            &demo.field,
            &demo.integrand,
            f64::INFINITY,
            &QuadratureRule::midpoint(),
        )
        .unwrap();
        assert!(r2 < r1, "residual should fall: {r1} -> {r2}");
        assert!(e1 < e0, "energy should fall: {e0} -> {e1}");
        // Endpoints stay pinned.
        let vals = demo.field.values();
        let grid = demo.field.grid();
        let first = (grid.pos(0, 0) / f64::sqrt(2.0)).tanh() + 0.0;
        assert!((vals[0] - first).abs() < 1e-12);
    }
}
