//! Experiment catalog: names, one-line blurbs, and longer descriptions
//! with the config sections each experiment reads.

use anyhow::{bail, Result};

/// (name, blurb, sections read, long description).
pub const CATALOG: &[(&str, &str, &str, &str)] = &[
    (
        "energy",
        "ball energies E(R) of a field across radii",
        "[grid] [integrand] [field] [energy]",
        "Integrates the density F(grad u, u, x') over the balls named in\n\
         [energy] radii and writes one E(R) row per radius. Gates:\n\
         energy_between on the last radius.",
    ),
    (
        "growth",
        "Hessian-weighted growth a(r) with log-log exponent fit",
        "[grid] [integrand] [field] [energy]",
        "Accumulates a(r) = integral of |F_pp| |grad u|^2 over the balls,\n\
         fits a(r) ~ C r^alpha on the upper radii, and tests whether the\n\
         ratios a(r) / (r pi_k(r)) stop growing, with pi_k the iterated-log\n\
         weight at [energy] level. Gates: growth_pass, exponent_between.",
    ),
    (
        "slide",
        "second energy difference of the sliding construction",
        "[grid] [integrand] [field] [energy] [cutoff]",
        "Slides the field along its invariant last axis under the\n\
         logarithmic cutoff at shift t (both signs), pulls the energies\n\
         back to the fixed grid, and reports E(u+) + E(u-) - 2 E(u), raw\n\
         and normalized by t^2, at each cutoff radius in [energy] radii.\n\
         Gates: norm_second_diff_at_most, decreasing.",
    ),
    (
        "compare",
        "lattice identity residual for max/min of two linears",
        "[grid] [integrand] [field] [field_b] [compare]",
        "Rebuilds two crossing linear fields at every spacing in\n\
         [compare] spacings and measures the residual of\n\
         E(max) + E(min) = E(a) + E(b). Only cells straddling the contact\n\
         set contribute, so the residual should shrink linearly with the\n\
         spacing. Gates: ratio_halving_between on successive residual\n\
         ratios.",
    ),
    (
        "improve",
        "energy drop from lifting the crease of two crossing planes",
        "[grid] [integrand] [improve]",
        "Takes the pointwise maximum of the planes a . x and b . x + alpha,\n\
         replaces it near the crease by a one-dimensional profile that is\n\
         flat on a plateau of the given radius, and reports the energy\n\
         change together with a two-resolution error estimate from a\n\
         doubled-spacing rerun. Gates: delta_negative,\n\
         delta_over_error_at_least, delta_between.",
    ),
    (
        "probe",
        "random sliding deformations against a stability bound",
        "[grid] [integrand] [field] [energy] [probe]",
        "Draws seeded random Lipschitz displacements of size t (class\n\
         last_axis, horizontal_vertical, or multi_direction), deforms the\n\
         field by each, and reports (E(w) - E(u)) / t^2 per draw, smallest\n\
         first in the summary. Gates: min_ratio_at_least.",
    ),
    (
        "exa",
        "sign-constrained perturbations of the plateau bump",
        "[exa] + [experiment] seed",
        "Perturbs the one-dimensional plateau bump by random fields that\n\
         vanish on the plateau and stay nonpositive where the bump sits at\n\
         its maximum, recording energy differences, first variations, and\n\
         Rayleigh quotients against the interval eigenvalue. Gates:\n\
         min_diff_at_least.",
    ),
    (
        "exa2",
        "delta-bounded slides of the tailed bump plus run scans",
        "[exa2] + [experiment] seed",
        "Probes the tailed bump with delta-bounded random displacements\n\
         and normalizes each energy change by t^2, then scans monotone\n\
         runs: every short window is monotone while some long window mixes\n\
         rises and falls. Gates: min_ratio_at_least,\n\
         short_windows_monotone, long_window_mixed.",
    ),
    (
        "abs",
        "kinked profile |t| against its piecewise competitor",
        "[abs] + [experiment] seed",
        "Measures the ball energies of u = |t| and of the deformed\n\
         competitor v = 2(|t| + 1)/3, which target 2R and 8R/9, and checks\n\
         that random single displacements never lower the energy of u.\n\
         Gates: min_diff_at_least, energy_rel_err_at_most.",
    ),
    (
        "solve",
        "explicit gradient descent to a critical field",
        "[grid] [integrand] [field] [solver]",
        "Runs explicit Euler steps of du/dt = div F_p - F_z with per-axis\n\
         boundary rules (fixed, periodic, zero_flux) until the sup-norm\n\
         residual drops below tolerance, then writes the relaxed field to\n\
         solved_field.txt and the residual history to CSV. Gates:\n\
         converged, residual_at_most.",
    ),
    (
        "onedim",
        "best one-dimensional monotone fit and line monotonicity",
        "[field] [onedim] (+ [grid] unless the field is file-backed)",
        "Fits u ~ f(x . xi) by isotonic regression over binned projections\n\
         across scanned directions, reporting the fitted direction and the\n\
         relative residual, plus per-line monotonicity counts along\n\
         [onedim] axis. Reads file-backed fields, so it chains after\n\
         solve. Gates: onedim_residual_at_most, mixed_lines,\n\
         direction_cos_at_least (component [onedim] axis or\n\
         direction_axis).",
    ),
    (
        "accept-all",
        "full built-in acceptance suite, one CSV per criterion",
        "(none)",
        "Runs every built-in acceptance scenario, prints one PASS/FAIL\n\
         line per criterion, and writes each criterion's CSV artifact to\n\
         the output directory. Exits nonzero if any criterion fails.",
    ),
];

pub fn names() -> Vec<&'static str> {
    CATALOG.iter().map(|(name, ..)| *name).collect()
}

pub fn lookup(name: &str) -> Result<String> {
    for (candidate, blurb, sections, long) in CATALOG {
        if *candidate == name {
            return Ok(format!(
                "{candidate}: {blurb}\n\nreads: {sections}\n\n{long}"
            ));
        }
    }
    bail!("unknown experiment {name:?}; valid names: {}", names().join(", "))
}
