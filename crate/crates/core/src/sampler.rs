//! Seeded random Lipschitz fields for stability probes.
//!
//! Displacements are sums of two separable terms, each a product of 1D
//! low-pass Fourier profiles `sum_m c_m / m^2 * sin(m pi (s + R) / (2 R))`
//! with coefficients drawn uniformly from `[-1, 1]`. A radial mask clips
//! the sum to the support ball (identically 1 inside `0.8 R`, smoothly 0
//! beyond `0.95 R`), and the result is rescaled so its grid-measured
//! Lipschitz norm hits the requested target exactly.
//!
//! Every draw is keyed by `(seed, stream)` through a counter-based
//! generator, so samples are reproducible individually and independent of
//! evaluation order and thread count.

use crate::deformation::c01_norm;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of separable terms summed per field.
const TERMS: usize = 2;

/// Reproducible generator for sample `stream` of experiment `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shape parameters of a random displacement draw.
#[derive(Clone, Copy, Debug)]
pub struct SampleSpec {
    /// Fourier modes per axis.
    pub modes: usize,
    /// Fields vanish identically outside `0.95` of this radius.
    pub support_radius: f64,
    /// Exact grid-measured Lipschitz norm after rescaling.
    pub target_norm: f64,
}

impl SampleSpec {
    fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::Sampler("at least one Fourier mode".into()));
        }
        if !(self.support_radius > 0.0) {
            return Err(Error::Sampler(format!(
                "support radius {} not positive",
                self.support_radius
            )));
        }
        if !(self.target_norm > 0.0) {
            return Err(Error::Sampler(format!("target norm {} not positive", self.target_norm)));
        }
        Ok(())
    }
}

/// Low-pass 1D profile on `[-half, half]`.
struct Profile {
    coeffs: Vec<f64>,
    half: f64,
}

impl Profile {
    fn draw(rng: &mut ChaCha8Rng, modes: usize, half: f64) -> Profile {
        let coeffs = (1..=modes)
            .map(|m| rng.gen_range(-1.0..1.0) / (m * m) as f64)
            .collect();
        Profile { coeffs, half }
    }

    fn eval(&self, s: f64) -> f64 {
        let phase = std::f64::consts::PI * (s + self.half) / (2.0 * self.half);
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * phase).sin())
            .sum()
    }
}

/// Radial support mask: 1 inside `0.8 R`, raised-cosine down to 0 at
/// `0.95 R`, identically 0 beyond.
fn support_mask(r: f64, radius: f64) -> f64 {
    let inner = 0.8 * radius;
    let outer = 0.95 * radius;
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * (r - inner) / (outer - inner)).cos();
        c * c
    }
}

/// Random Lipschitz field with exact target norm, supported strictly
/// inside the ball of `spec.support_radius`.
pub fn lipschitz_field(
    grid: &Grid,
    spec: &SampleSpec,
    seed: u64,
    stream: u64,
) -> Result<ScalarField> {
    spec.validate()?;
    grid.covers_ball(spec.support_radius)?;
    let n = grid.dim();
    let mut rng = seeded_rng(seed, stream);
    for _attempt in 0..20 {
        let profiles: Vec<Vec<Profile>> = (0..TERMS)
            .map(|_| (0..n).map(|_| Profile::draw(&mut rng, spec.modes, spec.support_radius)).collect())
            .collect();
        let radius = spec.support_radius;
        let raw = ScalarField::from_fn(grid.clone(), move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mask = support_mask(r, radius);
            if mask == 0.0 {
                return 0.0;
            }
            let mut total = 0.0;
            for term in &profiles {
                let mut prod = 1.0;
                for (a, profile) in term.iter().enumerate() {
                    prod *= profile.eval(x[a]);
                }
                total += prod;
            }
            total * mask
        });
        let norm = c01_norm(&raw);
        if norm > 1e-9 {
            let scale = spec.target_norm / norm;
            let values = raw.values().iter().map(|v| v * scale).collect();
            return ScalarField::from_values(grid.clone(), values);
        }
    }
    Err(Error::Sampler("all draws degenerate (zero Lipschitz norm)".into()))
}

/// Constrained 1D perturbation for the obstacle-type example: vanishes
/// identically on the plateau `[gap - pi/2, pi/2 - gap]`, is nonpositive on
/// `[-pi/2, pi/2]`, and is supported in `(-radius, radius)`.
///
/// Built as `f chi mu - max(f chi mu, 0) eta` where `chi` masks the plateau
/// out (linear ramp of width `gap / 2`), `mu` is the support mask, and
/// `eta` is 1 on `[-pi/2, pi/2]` with a linear ramp to 0 at
/// `pi/2 + gap / 2`. Rescaled to the exact target norm.
pub fn constrained_negative_profile(
    grid: &Grid,
    spec: &SampleSpec,
    gap: f64,
    seed: u64,
    stream: u64,
) -> Result<ScalarField> {
    spec.validate()?;
    if grid.dim() != 1 {
        return Err(Error::Sampler("constrained profiles are one-dimensional".into()));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !(gap > 0.0 && gap < half_pi) {
        return Err(Error::Sampler(format!("gap {gap} outside (0, pi/2)")));
    }
    if spec.support_radius <= half_pi + gap / 2.0 {
        return Err(Error::Sampler(format!(
            "support radius {} must exceed pi/2 + gap/2",
            spec.support_radius
        )));
    }
    grid.covers_ball(spec.support_radius)?;
    let mut rng = seeded_rng(seed, stream);
    let radius = spec.support_radius;
    for _attempt in 0..20 {
        let profile = Profile::draw(&mut rng, spec.modes, radius);
        let raw = ScalarField::from_fn(grid.clone(), move |x| {
            let s = x[0];
            let plateau_edge = half_pi - gap;
            // chi: 0 on the plateau, 1 at distance gap/2 outside it.
            let dist = (s.abs() - plateau_edge).max(0.0);
            let chi = (dist / (gap / 2.0)).min(1.0);
            let mu = support_mask(s.abs(), radius);
            let base = profile.eval(s) * chi * mu;
            // eta: 1 where the sign constraint applies, ramp out after.
            let eta = (1.0 - (s.abs() - half_pi).max(0.0) / (gap / 2.0)).max(0.0);
            base - base.max(0.0) * eta
        });
        let norm = c01_norm(&raw);
        if norm > 1e-9 {
            let scale = spec.target_norm / norm;
            let values = raw.values().iter().map(|v| v * scale).collect();
            return ScalarField::from_values(grid.clone(), values);
        }
    }
    Err(Error::Sampler("all constrained draws degenerate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SampleSpec {
        SampleSpec { modes: 6, support_radius: 2.0, target_norm: 0.3 }
    }

    #[test]
    fn draws_are_reproducible_and_streams_differ() {
        let grid = Grid::symmetric(&[3.0, 3.0], 0.1, 1).unwrap();
        let a = lipschitz_field(&grid, &spec(), 7, 0).unwrap();
        let b = lipschitz_field(&grid, &spec(), 7, 0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let c = lipschitz_field(&grid, &spec(), 7, 1).unwrap();
        assert!(a.values().iter().zip(c.values()).any(|(x, y)| x != y));
        let d = lipschitz_field(&grid, &spec(), 8, 0).unwrap();
        assert!(a.values().iter().zip(d.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn support_and_norm_are_exact() {
        let grid = Grid::symmetric(&[3.0], 0.01, 1).unwrap();
        let f = lipschitz_field(&grid, &spec(), 3, 2).unwrap();
        let norm = c01_norm(&f);
        assert!((norm - 0.3).abs() < 1e-12 * 0.3, "norm {norm}");
        for flat in 0..grid.node_count() {
            if grid.pos(0, flat).abs() >= 0.95 * 2.0 {
                assert_eq!(f.values()[flat], 0.0);
            }
        }
    }

    #[test]
    fn constrained_profile_obeys_all_three_constraints() {
        let grid = Grid::symmetric(&[std::f64::consts::PI], 1e-3, 1).unwrap();
        let s = SampleSpec { modes: 8, support_radius: 3.0, target_norm: 0.2 };
        let gap = 0.5;
        let half_pi = std::f64::consts::FRAC_PI_2;
        for stream in 0..5 {
            let phi = constrained_negative_profile(&grid, &s, gap, 11, stream).unwrap();
            let norm = c01_norm(&phi);
            assert!((norm - 0.2).abs() < 1e-12, "norm {norm}");
            for flat in 0..grid.node_count() {
                let x = grid.pos(0, flat);
                let v = phi.values()[flat];
                if x.abs() <= half_pi - gap {
                    assert_eq!(v, 0.0, "plateau at {x}");
                }
                if x.abs() <= half_pi {
                    assert!(v <= 0.0, "sign constraint at {x}: {v}");
                }
                if x.abs() >= 3.0 {
                    assert_eq!(v, 0.0, "support at {x}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let grid = Grid::symmetric(&[2.0], 0.1, 1).unwrap();
        let bad = SampleSpec { modes: 0, support_radius: 1.0, target_norm: 0.1 };
        assert!(lipschitz_field(&grid, &bad, 0, 0).is_err());
        let wide = SampleSpec { modes: 4, support_radius: 5.0, target_norm: 0.1 };
        assert!(lipschitz_field(&grid, &wide, 0, 0).is_err(), "support beyond hull");
        let s = SampleSpec { modes: 4, support_radius: 1.0, target_norm: 0.1 };
        assert!(
            constrained_negative_profile(&grid, &s, 0.5, 0, 0).is_err(),
            "support radius below pi/2 + gap/2"
        );
    }
}
