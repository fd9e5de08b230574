//! Configuration schema for the experiment runner.
//!
//! One TOML file per run, with one section per module of the underlying
//! library. Every section is strictly checked: unknown keys are rejected
//! so a typo cannot silently fall back to a default. All validation
//! errors surface before the experiment starts.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use varslide::energy::QuadratureRule;
use varslide::field::{Grid, ScalarField};
use varslide::integrand::{Integrand, MatrixNorm, Params};
use varslide::solver::{BoundaryRule, FlowConfig};

/// Top-level configuration: the experiment name plus one optional
/// section per concern. Experiments read only the sections they need.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub grid: Option<GridSection>,
    pub integrand: Option<IntegrandSection>,
    pub field: Option<FieldSection>,
    /// Second field for experiments that compare two of them.
    pub field_b: Option<FieldSection>,
    pub energy: Option<EnergySection>,
    pub cutoff: Option<CutoffSection>,
    pub probe: Option<ProbeSection>,
    pub improve: Option<ImproveSection>,
    pub solver: Option<SolverSection>,
    pub abs: Option<AbsSection>,
    pub exa: Option<ExaSection>,
    pub exa2: Option<Exa2Section>,
    pub onedim: Option<OnedimSection>,
    pub compare: Option<CompareSection>,
    pub output: Option<OutputSection>,
    #[serde(default)]
    pub assert: Asserts,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    /// Seed for stochastic experiments; those refuse to run without one.
    pub seed: Option<u64>,
}

/// Rectangular grid: either `half_widths` + `spacing` for a symmetric
/// box, or explicit `origin` + `spacings` + `extent`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_widths: Option<Vec<f64>>,
    pub spacing: Option<f64>,
    pub origin: Option<Vec<f64>>,
    pub spacings: Option<Vec<f64>>,
    pub extent: Option<Vec<usize>>,
    /// 1-based index of the first translation-invariant axis; the
    /// default 1 makes every axis translation-invariant.
    #[serde(default = "default_split")]
    pub split: usize,
}

fn default_split() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSection {
    /// Catalog name, e.g. "dirichlet" or "allen_cahn".
    pub name: String,
    /// Defaults to the grid dimension.
    pub dim: Option<usize>,
    /// Named scalar parameters forwarded to the catalog constructor.
    pub params: Option<BTreeMap<String, f64>>,
}

/// Initial / probed field. `kind` selects the closed form:
/// `linear` (slope . x + offset), `constant`, `kink` (|x_axis|),
/// `tanh_interface` (tanh((x_axis + ripple) / width) with an optional
/// cosine ripple riding on the first axis), or `file`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub kind: String,
    pub slope: Option<Vec<f64>>,
    pub offset: Option<f64>,
    pub value: Option<f64>,
    pub axis: Option<usize>,
    pub width: Option<f64>,
    pub ripple_amplitude: Option<f64>,
    pub ripple_period: Option<f64>,
    /// Field file path, resolved relative to the config file.
    pub path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub radii: Option<Vec<f64>>,
    /// "midpoint" (default) or "trapezoid".
    pub rule: Option<String>,
    /// "spectral" (default) or "frobenius" Hessian norm for growth.
    pub norm: Option<String>,
    /// Iterated-log level of the growth weight r * pi_k(r).
    #[serde(default)]
    pub level: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub radius: Option<f64>,
    #[serde(default)]
    pub level: u32,
    /// Slide distance t.
    pub shift: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// "last_axis", "horizontal_vertical", or "multi_direction".
    pub class: String,
    /// Axes for the multi-direction class.
    pub axes: Option<Vec<usize>>,
    pub samples: usize,
    pub shift: f64,
    pub delta: Option<f64>,
    pub radius: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

fn default_modes() -> usize {
    8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproveSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: f64,
    pub radius: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub max_steps: usize,
    pub tolerance: f64,
    /// One rule per axis: "fixed", "periodic", or "zero_flux".
    pub bc: Vec<String>,
    #[serde(default)]
    pub check_every: usize,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AbsSection {
    pub spacing: Option<f64>,
    pub samples: Option<usize>,
    pub slope: Option<f64>,
    pub half_width: Option<f64>,
    pub radius: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExaSection {
    pub radius: Option<f64>,
    pub gap: Option<f64>,
    pub spacing: Option<f64>,
    pub samples: Option<usize>,
    pub amplitude: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Exa2Section {
    pub spacing: Option<f64>,
    pub samples: Option<usize>,
    pub shift: Option<f64>,
    pub delta: Option<f64>,
    pub support_radius: Option<f64>,
    pub half_width: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnedimSection {
    pub bins: Option<usize>,
    /// Axis for the per-line monotonicity classification; defaults to
    /// the last axis.
    pub axis: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Spacings for the halving sweep, finest last.
    pub spacings: Vec<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// In-config pass/fail gates. Each experiment accepts a fixed subset;
/// setting a gate an experiment cannot evaluate is a config error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asserts {
    pub energy_between: Option<[f64; 2]>,
    pub growth_pass: Option<bool>,
    pub exponent_between: Option<[f64; 2]>,
    pub norm_second_diff_at_most: Option<f64>,
    pub decreasing: Option<bool>,
    pub ratio_halving_between: Option<[f64; 2]>,
    pub delta_negative: Option<bool>,
    pub delta_over_error_at_least: Option<f64>,
    pub delta_between: Option<[f64; 2]>,
    pub min_ratio_at_least: Option<f64>,
    pub min_diff_at_least: Option<f64>,
    pub energy_rel_err_at_most: Option<f64>,
    pub short_windows_monotone: Option<bool>,
    pub long_window_mixed: Option<bool>,
    pub converged: Option<bool>,
    pub residual_at_most: Option<f64>,
    pub onedim_residual_at_most: Option<f64>,
    pub mixed_lines: Option<usize>,
    pub direction_axis: Option<usize>,
    pub direction_cos_at_least: Option<f64>,
}

impl Asserts {
    /// Names of every gate present in the config.
    pub fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! record {
            ($field:ident) => {
                if self.$field.is_some() {
                    keys.push(stringify!($field));
                }
            };
        }
        record!(energy_between);
        record!(growth_pass);
        record!(exponent_between);
        record!(norm_second_diff_at_most);
        record!(decreasing);
        record!(ratio_halving_between);
        record!(delta_negative);
        record!(delta_over_error_at_least);
        record!(delta_between);
        record!(min_ratio_at_least);
        record!(min_diff_at_least);
        record!(energy_rel_err_at_most);
        record!(short_windows_monotone);
        record!(long_window_mixed);
        record!(converged);
        record!(residual_at_most);
        record!(onedim_residual_at_most);
        record!(mixed_lines);
        record!(direction_axis);
        record!(direction_cos_at_least);
        keys
    }
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: Config =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

impl Config {
    pub fn build_grid(&self) -> Result<Grid> {
        let section = self.grid.as_ref().context("missing [grid] section")?;
        if let Some(hw) = &section.half_widths {
            let h = section.spacing.context("[grid] half_widths needs spacing")?;
            if section.origin.is_some() || section.spacings.is_some() || section.extent.is_some() {
                bail!("[grid] mixes half_widths with explicit origin/spacings/extent");
            }
            return Ok(Grid::symmetric(hw, h, section.split)?);
        }
        let origin = section.origin.as_ref().context("[grid] needs half_widths or origin")?;
        let spacings = section.spacings.as_ref().context("[grid] origin needs spacings")?;
        let extent = section.extent.as_ref().context("[grid] origin needs extent")?;
        Ok(Grid::new(origin, spacings, extent, section.split)?)
    }

    pub fn build_integrand(&self, dim: usize) -> Result<Integrand> {
        let section = self.integrand.as_ref().context("missing [integrand] section")?;
        let mut params = Params::new();
        if let Some(map) = &section.params {
            for (key, value) in map {
                params = params.set(key, *value);
            }
        }
        Ok(Integrand::catalog(&section.name, section.dim.unwrap_or(dim), &params)?)
    }

    pub fn build_field(&self, base: &Path) -> Result<ScalarField> {
        let section = self.field.as_ref().context("missing [field] section")?;
        self.realize_field(section, base)
    }

    fn realize_field(&self, section: &FieldSection, base: &Path) -> Result<ScalarField> {
        if section.kind == "file" {
            let rel = section.path.as_ref().context("field kind \"file\" needs path")?;
            let path = base.join(rel);
            return Ok(ScalarField::read_file(&path)
                .with_context(|| format!("reading field {}", path.display()))?);
        }
        let grid = self.build_grid()?;
        build_field_on(section, &grid)
    }

    pub fn quadrature(&self) -> Result<QuadratureRule> {
        let name = self
            .energy
            .as_ref()
            .and_then(|s| s.rule.as_deref())
            .unwrap_or("midpoint");
        match name {
            "midpoint" => Ok(QuadratureRule::midpoint()),
            "trapezoid" => Ok(QuadratureRule::trapezoid()),
            other => bail!("unknown quadrature rule {other:?} (midpoint, trapezoid)"),
        }
    }

    pub fn hessian_norm(&self) -> Result<MatrixNorm> {
        let name = self
            .energy
            .as_ref()
            .and_then(|s| s.norm.as_deref())
            .unwrap_or("spectral");
        match name {
            "spectral" => Ok(MatrixNorm::Spectral),
            "frobenius" => Ok(MatrixNorm::Frobenius),
            other => bail!("unknown matrix norm {other:?} (spectral, frobenius)"),
        }
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        let radii = self
            .energy
            .as_ref()
            .and_then(|s| s.radii.clone())
            .context("missing [energy] radii")?;
        if radii.is_empty() {
            bail!("radii list empty");
        }
        Ok(radii)
    }

    /// Seed for stochastic experiments; refuse defaults so reruns are
    /// reproducible by construction.
    pub fn seed(&self) -> Result<u64> {
        self.experiment
            .seed
            .context("stochastic experiments need an [experiment] seed")
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let section = self.solver.as_ref().context("missing [solver] section")?;
        let mut bc = Vec::with_capacity(section.bc.len());
        for name in &section.bc {
            bc.push(match name.as_str() {
                "fixed" => BoundaryRule::Fixed,
                "periodic" => BoundaryRule::Periodic,
                "zero_flux" => BoundaryRule::ZeroFlux,
                other => bail!("unknown boundary rule {other:?} (fixed, periodic, zero_flux)"),
            });
        }
        Ok(FlowConfig {
            dt: section.dt,
            max_steps: section.max_steps,
            tolerance: section.tolerance,
            bc,
            check_every: section.check_every,
        })
    }

    pub fn out_dir(&self) -> Option<&str> {
        self.output.as_ref().and_then(|s| s.dir.as_deref())
    }
}

pub fn build_field_on(section: &FieldSection, grid: &Grid) -> Result<ScalarField> {
    let n = grid.dim();
    match section.kind.as_str() {
        "linear" => {
            let slope = section.slope.as_ref().context("field kind \"linear\" needs slope")?;
            if slope.len() != n {
                bail!("slope has {} entries on a {}-dimensional grid", slope.len(), n);
            }
            let slope = slope.clone();
            let offset = section.offset.unwrap_or(0.0);
            Ok(ScalarField::from_fn(grid.clone(), move |x| {
                slope.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>() + offset
            }))
        }
        "constant" => {
            let value = section.value.context("field kind \"constant\" needs value")?;
            Ok(ScalarField::constant(grid.clone(), value))
        }
        "kink" => {
            let axis = section.axis.unwrap_or(n - 1);
            if axis >= n {
                bail!("axis {axis} outside 0..{n}");
            }
            Ok(ScalarField::from_fn(grid.clone(), move |x| x[axis].abs()))
        }
        "tanh_interface" => {
            let axis = section.axis.unwrap_or(n - 1);
            if axis >= n {
                bail!("axis {axis} outside 0..{n}");
            }
            let width = section.width.unwrap_or(f64::sqrt(2.0));
            if !(width > 0.0) {
                bail!("interface width {width} not positive");
            }
            let amplitude = section.ripple_amplitude.unwrap_or(0.0);
            let period = section.ripple_period.unwrap_or(3.0);
            if amplitude != 0.0 && !(period > 0.0) {
                bail!("ripple period {period} not positive");
            }
            Ok(ScalarField::from_fn(grid.clone(), move |x| {
                let ripple = if amplitude == 0.0 {
                    0.0
                } else {
                    amplitude * (2.0 * std::f64::consts::PI * x[0] / period).cos()
                };
                ((x[axis] + ripple) / width).tanh()
            }))
        }
        "file" => bail!("field kind \"file\" is not valid here"),
        other => bail!(
            "unknown field kind {other:?} (linear, constant, kink, tanh_interface, file)"
        ),
    }
}
