//! Experiment runners: one function per experiment name, each reading
//! its config sections, writing CSV artifacts, and evaluating the
//! in-config gates.
//!
//! Every runner is deterministic for a fixed config: CSV artifacts are
//! byte-identical across reruns and across `--threads` values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use varslide::acceptance;
use varslide::energy::{
    energy, energy_identity_residual, growth_profile, second_difference,
};
use varslide::experiments::{
    example_abs, example_exa, example_exa2, plane_improvement, monotonicity_check,
    one_dimensionality, stability_probe, AbsConfig, Exa2Config, ExaConfig, ImprovementConfig,
    ProbeClass, StabilityProbeConfig,
};
use varslide::field::Grid;
use varslide::deformation::CutoffProfile;
use varslide::solver::gradient_flow;

use crate::config::{build_field_on, Config};

/// What a runner hands back to `main`: the one-line summary and any
/// failed gates. Artifacts are already on disk at this point.
pub struct Outcome {
    pub summary: String,
    pub failures: Vec<String>,
}

/// Gates an experiment can evaluate; any other gate in the config is a
/// config error, caught before the experiment starts.
fn supported_gates(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "energy" => &["energy_between"],
        "growth" => &["growth_pass", "exponent_between"],
        "slide" => &["norm_second_diff_at_most", "decreasing"],
        "compare" => &["ratio_halving_between"],
        "improve" => &["delta_negative", "delta_over_error_at_least", "delta_between"],
        "probe" => &["min_ratio_at_least"],
        "exa" => &["min_diff_at_least"],
        "exa2" => &["min_ratio_at_least", "short_windows_monotone", "long_window_mixed"],
        "abs" => &["min_diff_at_least", "energy_rel_err_at_most"],
        "solve" => &["converged", "residual_at_most"],
        "onedim" => &[
            "onedim_residual_at_most",
            "mixed_lines",
            "direction_axis",
            "direction_cos_at_least",
        ],
        "accept-all" => &[],
        _ => return None,
    })
}

/// Collected gate failures; `check` records a message when a gate does
/// not hold.
#[derive(Default)]
struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, ok: bool, message: String) {
        if !ok {
            self.failures.push(message);
        }
    }
}

fn write_artifact(out: &Path, name: &str, content: &str) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
}

fn push_row(csv: &mut String, name: &str, value: f64) {
    let _ = writeln!(csv, "{name},{value:.17e}");
}

/// Dispatch on the experiment name. `base` anchors relative paths in the
/// config (field files); `out` receives the artifacts.
pub fn run(cfg: &Config, base: &Path, out: &Path) -> Result<Outcome> {
    let name = cfg.experiment.name.as_str();
    let supported = supported_gates(name).with_context(|| {
        format!(
            "unknown experiment {name:?}; valid names: {}",
            crate::describe::names().join(", ")
        )
    })?;
    for key in cfg.assert.set_keys() {
        if !supported.contains(&key) {
            bail!("gate {key:?} is not supported by experiment {name:?}");
        }
    }
    match name {
        "energy" => run_energy(cfg, out),
        "growth" => run_growth(cfg, out),
        "slide" => run_slide(cfg, out),
        "compare" => run_compare(cfg, out),
        "improve" => run_improve(cfg, out),
        "probe" => run_probe(cfg, out),
        "exa" => run_exa(cfg, out),
        "exa2" => run_exa2(cfg, out),
        "abs" => run_abs(cfg, out),
        "solve" => run_solve(cfg, out),
        "onedim" => run_onedim(cfg, base, out),
        "accept-all" => run_accept_all(out),
        _ => unreachable!("gate table covers every experiment"),
    }
}

fn finish(name: &str, body: String, gate: Gate) -> Outcome {
    let status = if gate.failures.is_empty() { "PASS" } else { "FAIL" };
    Outcome { summary: format!("{name} {status} {body}"), failures: gate.failures }
}

fn run_energy(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let u = cfg.build_field(Path::new("."))?;
    let rule = cfg.quadrature()?;
    let radii = cfg.radii()?;
    let mut csv = String::from("r,E\n");
    let mut last = f64::NAN;
    for &r in &radii {
        last = energy(&u, &f, r, &rule)?;
        let _ = writeln!(csv, "{r:.17e},{last:.17e}");
    }
    write_artifact(out, "energy.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some([lo, hi]) = cfg.assert.energy_between {
        gate.check(
            last >= lo && last <= hi,
            format!("energy {last:.6e} outside [{lo:.6e}, {hi:.6e}]"),
        );
    }
    let body = format!("E({})={last:.6} over {} radii", radii[radii.len() - 1], radii.len());
    Ok(finish("energy", body, gate))
}

fn run_growth(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let u = cfg.build_field(Path::new("."))?;
    let rule = cfg.quadrature()?;
    let radii = cfg.radii()?;
    let norm = cfg.hessian_norm()?;
    let level = cfg.energy.as_ref().map_or(0, |s| s.level);
    let mut report = growth_profile(&u, &f, &radii, norm, &rule)?;
    let check = varslide::energy::check_growth(&mut report, level)?;
    write_artifact(out, "growth.csv", &report.to_csv())?;
    let mut gate = Gate::default();
    if let Some(expected) = cfg.assert.growth_pass {
        gate.check(
            check.pass == expected,
            format!("growth test returned pass={} (wanted {expected})", check.pass),
        );
    }
    if let Some([lo, hi]) = cfg.assert.exponent_between {
        gate.check(
            report.exponent >= lo && report.exponent <= hi,
            format!("exponent {:.4} outside [{lo}, {hi}]", report.exponent),
        );
    }
    let body = format!(
        "exponent={:.3} constant={:.3e} growth_pass={}",
        report.exponent, check.constant, check.pass
    );
    Ok(finish("growth", body, gate))
}

fn run_slide(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let u = cfg.build_field(Path::new("."))?;
    let rule = cfg.quadrature()?;
    let cutoff = cfg.cutoff.as_ref().context("missing [cutoff] section")?;
    let radii = match cfg.energy.as_ref().and_then(|s| s.radii.clone()) {
        Some(r) if r.is_empty() => bail!("radii list empty"),
        Some(r) => r,
        None => vec![cutoff.radius.context("[cutoff] needs radius or [energy] radii")?],
    };
    let t = cutoff.shift;
    let mut csv = String::from("r,delta,delta_over_t2\n");
    let mut normalized = Vec::with_capacity(radii.len());
    for &r in &radii {
        let profile = CutoffProfile::new(r, cutoff.level, t)?;
        let delta = second_difference(&u, &f, &profile, &rule)?;
        let d = delta / (t * t);
        normalized.push(d);
        let _ = writeln!(csv, "{r:.17e},{delta:.17e},{d:.17e}");
    }
    write_artifact(out, "slide.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some(bound) = cfg.assert.norm_second_diff_at_most {
        for (&r, &d) in radii.iter().zip(&normalized) {
            gate.check(d <= bound, format!("delta/t^2 = {d:.4e} at R={r} exceeds {bound:.4e}"));
        }
    }
    if cfg.assert.decreasing == Some(true) {
        for w in normalized.windows(2) {
            gate.check(
                w[1] < w[0],
                format!("normalized differences not decreasing: {:.4e} then {:.4e}", w[0], w[1]),
            );
        }
    }
    let body = format!(
        "delta/t^2={:.4e} at R={} (t={t})",
        normalized[normalized.len() - 1],
        radii[radii.len() - 1]
    );
    Ok(finish("slide", body, gate))
}

fn run_compare(cfg: &Config, out: &Path) -> Result<Outcome> {
    let section = cfg.compare.as_ref().context("missing [compare] section")?;
    if section.spacings.is_empty() {
        bail!("spacings list empty");
    }
    let grid_section = cfg.grid.as_ref().context("missing [grid] section")?;
    let hw = grid_section
        .half_widths
        .as_ref()
        .context("compare rebuilds grids per spacing and needs [grid] half_widths")?;
    let field_a = cfg.field.as_ref().context("missing [field] section")?;
    let field_b = cfg.field_b.as_ref().context("missing [field_b] section")?;
    if field_a.kind == "file" || field_b.kind == "file" {
        bail!("compare rebuilds fields per spacing; file-backed fields are not supported");
    }
    let f = cfg.build_integrand(hw.len())?;
    let rule = cfg.quadrature()?;
    let radius = section.radius.unwrap_or(f64::INFINITY);
    let mut csv = String::from("h,residual\n");
    let mut residuals = Vec::with_capacity(section.spacings.len());
    for &h in &section.spacings {
        let grid = Grid::symmetric(hw, h, grid_section.split)?;
        let a = build_field_on(field_a, &grid)?;
        let b = build_field_on(field_b, &grid)?;
        let res = energy_identity_residual(&a, &b, &f, radius, &rule)?;
        residuals.push(res);
        let _ = writeln!(csv, "{h:.17e},{res:.17e}");
    }
    write_artifact(out, "compare.csv", &csv)?;
    let mut gate = Gate::default();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    if let Some([lo, hi]) = cfg.assert.ratio_halving_between {
        for (w, &ratio) in section.spacings.windows(2).zip(&ratios) {
            gate.check(
                ratio >= lo && ratio <= hi,
                format!("residual ratio {ratio:.3} from h={} to h={} outside [{lo}, {hi}]", w[0], w[1]),
            );
        }
    }
    let body = format!(
        "residual {:.3e} -> {:.3e} over {} spacings",
        residuals[0],
        residuals[residuals.len() - 1],
        residuals.len()
    );
    Ok(finish("compare", body, gate))
}

fn run_improve(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let rule = cfg.quadrature()?;
    let icfg = match cfg.improve.as_ref() {
        Some(s) => ImprovementConfig {
            a: s.a.clone(),
            b: s.b.clone(),
            alpha: s.alpha,
            radius: s.radius,
        },
        None => ImprovementConfig::canonical_2d(),
    };
    let result = plane_improvement(&grid, &f, &icfg, &rule)?;
    let mut csv = String::from("name,value\n");
    push_row(&mut csv, "energy_original", result.energy_original);
    push_row(&mut csv, "energy_improved", result.energy_improved);
    push_row(&mut csv, "delta", result.delta);
    push_row(&mut csv, "coarse_delta", result.coarse_delta);
    push_row(&mut csv, "error_estimate", result.error_estimate);
    write_artifact(out, "improve.csv", &csv)?;
    let mut gate = Gate::default();
    if cfg.assert.delta_negative == Some(true) {
        gate.check(result.delta < 0.0, format!("delta {:.4e} not negative", result.delta));
    }
    if let Some(factor) = cfg.assert.delta_over_error_at_least {
        gate.check(
            result.delta.abs() >= factor * result.error_estimate,
            format!(
                "|delta| {:.4e} below {factor} x error estimate {:.4e}",
                result.delta.abs(),
                result.error_estimate
            ),
        );
    }
    if let Some([lo, hi]) = cfg.assert.delta_between {
        gate.check(
            result.delta >= lo && result.delta <= hi,
            format!("delta {:.4e} outside [{lo}, {hi}]", result.delta),
        );
    }
    let body = format!("delta={:.4} error_estimate={:.2e}", result.delta, result.error_estimate);
    Ok(finish("improve", body, gate))
}

fn run_probe(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let u = cfg.build_field(Path::new("."))?;
    let rule = cfg.quadrature()?;
    let section = cfg.probe.as_ref().context("missing [probe] section")?;
    let class = match section.class.as_str() {
        "last_axis" => ProbeClass::LastAxis,
        "horizontal_vertical" => ProbeClass::HorizontalVertical,
        "multi_direction" => ProbeClass::MultiDirection(
            section.axes.clone().context("probe class \"multi_direction\" needs axes")?,
        ),
        other => bail!(
            "unknown probe class {other:?} (last_axis, horizontal_vertical, multi_direction)"
        ),
    };
    let pcfg = StabilityProbeConfig {
        class,
        samples: section.samples,
        shift: section.shift,
        delta: section.delta,
        radius: section.radius,
        seed: cfg.seed()?,
        modes: section.modes,
    };
    let report = stability_probe(&u, &f, &pcfg, &rule)?;
    write_artifact(out, "probe.csv", &report.to_csv())?;
    let mut gate = Gate::default();
    if let Some(bound) = cfg.assert.min_ratio_at_least {
        gate.check(
            report.min_ratio >= bound,
            format!("min ratio {:.4e} below {bound:.4e}", report.min_ratio),
        );
    }
    let body = format!(
        "min_ratio={:.4e} mean_ratio={:.4e} over {} draws ({} redraws)",
        report.min_ratio,
        report.mean_ratio,
        report.ratios.len(),
        report.redraws
    );
    Ok(finish("probe", body, gate))
}

fn run_exa(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut ecfg = ExaConfig::default();
    if let Some(s) = cfg.exa.as_ref() {
        if let Some(v) = s.radius {
            ecfg.radius = v;
        }
        if let Some(v) = s.gap {
            ecfg.gap = v;
        }
        if let Some(v) = s.spacing {
            ecfg.spacing = v;
        }
        if let Some(v) = s.samples {
            ecfg.samples = v;
        }
        if let Some(v) = s.amplitude {
            ecfg.amplitude = v;
        }
        if let Some(v) = s.modes {
            ecfg.modes = v;
        }
    }
    ecfg.seed = cfg.seed()?;
    let report = example_exa(&ecfg)?;
    let mut csv = String::from("sample,diff,linear_term\n");
    for (i, (d, l)) in report.diffs.iter().zip(&report.linear_terms).enumerate() {
        let _ = writeln!(csv, "{i},{d:.17e},{l:.17e}");
    }
    write_artifact(out, "exa.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some(bound) = cfg.assert.min_diff_at_least {
        gate.check(
            report.min_diff >= bound,
            format!("min diff {:.4e} below {bound:.4e}", report.min_diff),
        );
    }
    let body = format!(
        "min_diff={:.4e} min_rayleigh={:.3} lambda={:.3} over {} draws",
        report.min_diff,
        report.min_rayleigh,
        report.lambda,
        report.diffs.len()
    );
    Ok(finish("exa", body, gate))
}

fn run_exa2(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut ecfg = Exa2Config::default();
    if let Some(s) = cfg.exa2.as_ref() {
        if let Some(v) = s.spacing {
            ecfg.spacing = v;
        }
        if let Some(v) = s.samples {
            ecfg.samples = v;
        }
        if let Some(v) = s.shift {
            ecfg.shift = v;
        }
        if let Some(v) = s.delta {
            ecfg.delta = v;
        }
        if let Some(v) = s.support_radius {
            ecfg.support_radius = v;
        }
        if let Some(v) = s.half_width {
            ecfg.half_width = v;
        }
        if let Some(v) = s.modes {
            ecfg.modes = v;
        }
    }
    ecfg.seed = cfg.seed()?;
    let report = example_exa2(&ecfg)?;
    let mut csv = String::from("sample,ratio\n");
    for (i, r) in report.ratios.iter().enumerate() {
        let _ = writeln!(csv, "{i},{r:.17e}");
    }
    write_artifact(out, "exa2.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some(bound) = cfg.assert.min_ratio_at_least {
        gate.check(
            report.min_ratio >= bound,
            format!("min ratio {:.4e} below {bound:.4e}", report.min_ratio),
        );
    }
    if let Some(expected) = cfg.assert.short_windows_monotone {
        gate.check(
            report.short_windows_monotone == expected,
            format!(
                "short windows monotone = {} (wanted {expected})",
                report.short_windows_monotone
            ),
        );
    }
    if let Some(expected) = cfg.assert.long_window_mixed {
        gate.check(
            report.long_window_mixed == expected,
            format!("long window mixed = {} (wanted {expected})", report.long_window_mixed),
        );
    }
    let body = format!(
        "min_ratio={:.4e} short_monotone={} long_mixed={}",
        report.min_ratio, report.short_windows_monotone, report.long_window_mixed
    );
    Ok(finish("exa2", body, gate))
}

fn run_abs(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut acfg = AbsConfig::default();
    if let Some(s) = cfg.abs.as_ref() {
        if let Some(v) = s.spacing {
            acfg.spacing = v;
        }
        if let Some(v) = s.samples {
            acfg.samples = v;
        }
        if let Some(v) = s.slope {
            acfg.slope = v;
        }
        if let Some(v) = s.half_width {
            acfg.half_width = v;
        }
        if let Some(v) = s.radius {
            acfg.radius = v;
        }
        if let Some(v) = s.modes {
            acfg.modes = v;
        }
    }
    acfg.seed = cfg.seed()?;
    let report = example_abs(&acfg)?;
    let mut csv = String::from("name,value\n");
    push_row(&mut csv, "energy_u", report.energy_u);
    push_row(&mut csv, "energy_v", report.energy_v);
    push_row(&mut csv, "min_diff", report.min_diff);
    push_row(&mut csv, "oracle_gap", report.oracle_gap);
    for (i, d) in report.diffs.iter().enumerate() {
        push_row(&mut csv, &format!("diff_{i:03}"), *d);
    }
    write_artifact(out, "abs.csv", &csv)?;
    let mut gate = Gate::default();
    // Closed-form ball energies of the kink and its competitor.
    let target_u = 2.0 * acfg.radius;
    let target_v = 8.0 * acfg.radius / 9.0;
    if let Some(tol) = cfg.assert.energy_rel_err_at_most {
        let err_u = (report.energy_u - target_u).abs() / target_u;
        let err_v = (report.energy_v - target_v).abs() / target_v;
        gate.check(err_u <= tol, format!("E_u relative error {err_u:.2e} above {tol:.2e}"));
        gate.check(err_v <= tol, format!("E_v relative error {err_v:.2e} above {tol:.2e}"));
    }
    if let Some(bound) = cfg.assert.min_diff_at_least {
        gate.check(
            report.min_diff >= bound,
            format!("min diff {:.4e} below {bound:.4e}", report.min_diff),
        );
    }
    let body = format!(
        "E_u={:.3} E_v={:.3} min_diff={:.4e} oracle_gap={:.2e}",
        report.energy_u, report.energy_v, report.min_diff, report.oracle_gap
    );
    Ok(finish("abs", body, gate))
}

fn run_solve(cfg: &Config, out: &Path) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let f = cfg.build_integrand(grid.dim())?;
    let u0 = cfg.build_field(Path::new("."))?;
    let flow = cfg.flow_config()?;
    let result = gradient_flow(&u0, &f, &flow)?;
    result.field.write_file(&out.join("solved_field.txt"))?;
    let mut csv = String::from("step,residual\n");
    for (step, r) in &result.residual_history {
        let _ = writeln!(csv, "{step},{r:.17e}");
    }
    write_artifact(out, "solve.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some(expected) = cfg.assert.converged {
        gate.check(
            result.converged == expected,
            format!("converged = {} (wanted {expected})", result.converged),
        );
    }
    if let Some(bound) = cfg.assert.residual_at_most {
        gate.check(
            result.residual <= bound,
            format!("residual {:.4e} above {bound:.4e}", result.residual),
        );
    }
    let body = format!(
        "residual={:.3e} after {} steps converged={}",
        result.residual, result.steps, result.converged
    );
    Ok(finish("solve", body, gate))
}

fn run_onedim(cfg: &Config, base: &Path, out: &Path) -> Result<Outcome> {
    let u = cfg.build_field(base)?;
    let dim = u.grid().dim();
    let section = cfg.onedim.as_ref();
    let bins = section.and_then(|s| s.bins).unwrap_or(1000);
    let axis = section.and_then(|s| s.axis).unwrap_or(dim - 1);
    let rep = one_dimensionality(&u, bins)?;
    let mono = monotonicity_check(&u, axis)?;
    let mut csv = String::from("name,value\n");
    push_row(&mut csv, "residual", rep.residual);
    for (i, d) in rep.direction.iter().enumerate() {
        push_row(&mut csv, &format!("direction_{i}"), *d);
    }
    push_row(&mut csv, "degenerate", rep.degenerate as u8 as f64);
    push_row(&mut csv, "lines", mono.lines as f64);
    push_row(&mut csv, "nondecreasing", mono.nondecreasing as f64);
    push_row(&mut csv, "nonincreasing", mono.nonincreasing as f64);
    push_row(&mut csv, "constant", mono.constant as f64);
    push_row(&mut csv, "mixed", mono.mixed as f64);
    write_artifact(out, "onedim.csv", &csv)?;
    let mut gate = Gate::default();
    if let Some(bound) = cfg.assert.onedim_residual_at_most {
        gate.check(
            rep.residual <= bound,
            format!("one-dimensional residual {:.4e} above {bound:.4e}", rep.residual),
        );
    }
    if let Some(expected) = cfg.assert.mixed_lines {
        gate.check(
            mono.mixed == expected,
            format!("{} mixed lines (wanted {expected})", mono.mixed),
        );
    }
    if let Some(bound) = cfg.assert.direction_cos_at_least {
        let comp_axis = cfg.assert.direction_axis.unwrap_or(dim - 1);
        if comp_axis >= dim {
            bail!("direction_axis {comp_axis} outside 0..{dim}");
        }
        gate.check(
            rep.direction[comp_axis] >= bound,
            format!(
                "direction component {:.5} along axis {comp_axis} below {bound:.5}",
                rep.direction[comp_axis]
            ),
        );
    }
    let dir = rep
        .direction
        .iter()
        .map(|d| format!("{d:.4}"))
        .collect::<Vec<_>>()
        .join(",");
    let body = format!(
        "residual={:.3e} direction=({dir}) mixed_lines={}",
        rep.residual, mono.mixed
    );
    Ok(finish("onedim", body, gate))
}

fn run_accept_all(out: &Path) -> Result<Outcome> {
    let results = acceptance::run_all();
    let mut gate = Gate::default();
    let mut lines = String::new();
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("{status} {} ({:.2}s): {}", r.name, r.seconds, r.detail);
        let _ = writeln!(lines, "{status} {}", r.name);
        write_artifact(out, &format!("{}.csv", r.name), &r.csv)?;
        gate.check(r.pass, format!("criterion {} failed: {}", r.name, r.detail));
    }
    write_artifact(out, "criteria.txt", &lines)?;
    let passed = results.iter().filter(|r| r.pass).count();
    let body = format!("{passed}/{} criteria", results.len());
    Ok(finish("accept-all", body, gate))
}
