//! Energy integrals, growth profiles, and variations.
//!
//! Energies are evaluated over the part of the grid hull inside a ball,
//! `E_R(u) = sum_cells F(grad u, u, x') * vol`, with a midpoint rule as the
//! workhorse: per cell the value is the corner average and the gradient the
//! staggered average of forward differences, both second-order accurate at
//! the cell center. A trapezoid rule over nodes is available for
//! cross-checks. Singular integrands (weights degenerating on the face
//! `x_1 = 0`) are restricted to the midpoint rule, whose evaluation points
//! sit at half-cell offsets and never touch the face.
//!
//! The growth profile `a(r)` integrates `|F_pp| |grad u|^2` over expanding
//! balls; its log-log slope and the ratio test against `r * pi_k(r)` decide
//! whether a field satisfies the quadratic growth bound that drives the
//! monotonicity machinery.
//!
//! The second difference of the sliding construction is assembled on the
//! fixed grid by pulling both slid energies back through the slide map:
//! with `tau = t psi'(|x|)` and `beta = tau x_n / |x|`, each cell
//! contributes
//!
//! ```text
//! F(p - tau p_n / (1 + beta) * xhat) (1 + beta)
//!   + F(p + tau p_n / (1 - beta) * xhat) (1 - beta) - 2 F(p)
//! ```
//!
//! which is exactly symmetric in `t -> -t` and free of the cancellation
//! that plagues differencing two large energies.

use crate::deformation::CutoffProfile;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, MAX_DIM};
use crate::integrand::{matrix_norm, Integrand, MatrixNorm};
use crate::reduce::{tiled_sum, tiled_sum_multi};
use std::fmt::Write as _;

/// Quadrature scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Cell-center rule: corner-averaged values, staggered gradients.
    Midpoint,
    /// Node rule with halved weights on hull faces and nodal gradients.
    Trapezoid,
}

/// Quadrature rule for all energy-type integrals.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureRule {
    scheme: Scheme,
}

impl QuadratureRule {
    pub fn midpoint() -> QuadratureRule {
        QuadratureRule { scheme: Scheme::Midpoint }
    }

    pub fn trapezoid() -> QuadratureRule {
        QuadratureRule { scheme: Scheme::Trapezoid }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

/// Precomputed cell geometry for the midpoint rule.
struct CellGeom {
    n: usize,
    strides: [usize; MAX_DIM],
    cextent: [usize; MAX_DIM],
    cell_count: usize,
    vol: f64,
    corner_offsets: Vec<usize>,
    corner_count: usize,
}

impl CellGeom {
    fn new(grid: &Grid) -> CellGeom {
        let n = grid.dim();
        let mut strides = [0usize; MAX_DIM];
        let mut acc = 1;
        for a in (0..n).rev() {
            strides[a] = acc;
            acc *= grid.extent_of(a);
        }
        let mut cextent = [1usize; MAX_DIM];
        let mut cell_count = 1;
        let mut vol = 1.0;
        for a in 0..n {
            cextent[a] = grid.extent_of(a) - 1;
            cell_count *= cextent[a];
            vol *= grid.spacing_of(a);
        }
        let corner_count = 1 << n;
        let mut corner_offsets = Vec::with_capacity(corner_count);
        for mask in 0..corner_count {
            let mut off = 0;
            for a in 0..n {
                if mask & (1 << a) != 0 {
                    off += strides[a];
                }
            }
            corner_offsets.push(off);
        }
        CellGeom { n, strides: strides_from(&strides), cextent, cell_count, vol, corner_offsets, corner_count }
    }

    fn decode(&self, cell: usize, idx: &mut [usize; MAX_DIM]) -> usize {
        let mut rest = cell;
        let mut base = 0;
        for a in (0..self.n).rev() {
            idx[a] = rest % self.cextent[a];
            rest /= self.cextent[a];
            base += idx[a] * self.strides[a];
        }
        base
    }

    /// Corner average and staggered gradient at the cell center.
    fn sample(&self, grid: &Grid, values: &[f64], base: usize, p: &mut [f64; MAX_DIM]) -> f64 {
        let mut z = 0.0;
        p[..self.n].fill(0.0);
        for (mask, &off) in self.corner_offsets.iter().enumerate() {
            let v = values[base + off];
            z += v;
            for a in 0..self.n {
                if mask & (1 << a) != 0 {
                    p[a] += v;
                } else {
                    p[a] -= v;
                }
            }
        }
        let half = (self.corner_count / 2) as f64;
        for a in 0..self.n {
            p[a] /= half * grid.spacing_of(a);
        }
        z / self.corner_count as f64
    }
}

fn strides_from(s: &[usize; MAX_DIM]) -> [usize; MAX_DIM] {
    *s
}

fn center(grid: &Grid, idx: &[usize; MAX_DIM], out: &mut [f64; MAX_DIM]) {
    for a in 0..grid.dim() {
        out[a] = grid.origin_of(a) + (idx[a] as f64 + 0.5) * grid.spacing_of(a);
    }
}

fn validate(u: &ScalarField, f: &Integrand, radius: f64, rule: &QuadratureRule) -> Result<()> {
    let grid = u.grid();
    if f.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "integrand dimension {} vs grid dimension {}",
            f.dim(),
            grid.dim()
        )));
    }
    if radius.is_finite() {
        if !(radius > 0.0) {
            return Err(Error::Quadrature(format!("radius {radius} not positive")));
        }
        grid.covers_ball(radius)?;
    }
    if f.is_singular() {
        if rule.scheme() == Scheme::Trapezoid {
            return Err(Error::Quadrature(
                "trapezoid rule evaluates at nodes; singular weights need the \
                 midpoint rule's offset evaluation points"
                    .into(),
            ));
        }
        if grid.origin_of(0) < 0.0 {
            return Err(Error::Quadrature(format!(
                "singular weight needs the first axis in [0, inf), origin is {}",
                grid.origin_of(0)
            )));
        }
    }
    Ok(())
}

/// Energy over the hull cells whose centers lie in the ball of `radius`
/// (`f64::INFINITY` integrates the whole hull).
pub fn energy(u: &ScalarField, f: &Integrand, radius: f64, rule: &QuadratureRule) -> Result<f64> {
    energy_shell(u, f, -1.0, radius, rule)
}

/// Energy over the shell `r0 < |x| <= r1`. Shells partition exactly: the
/// same cell membership predicate drives every radius.
pub fn energy_shell(
    u: &ScalarField,
    f: &Integrand,
    r0: f64,
    r1: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    validate(u, f, r1, rule)?;
    let grid = u.grid();
    let n = grid.dim();
    let bounded = grid.bounded_len();
    match rule.scheme() {
        Scheme::Midpoint => {
            let geom = CellGeom::new(grid);
            let values = u.values();
            Ok(tiled_sum(geom.cell_count, |cell| {
                let mut idx = [0usize; MAX_DIM];
                let mut x = [0.0; MAX_DIM];
                let mut p = [0.0; MAX_DIM];
                let base = geom.decode(cell, &mut idx);
                center(grid, &idx, &mut x);
                let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                if r <= r0 || r > r1 {
                    return 0.0;
                }
                let z = geom.sample(grid, values, base, &mut p);
                f.eval(&p[..n], z, &x[..bounded]) * geom.vol
            }))
        }
        Scheme::Trapezoid => {
            let grad = u.gradient()?;
            let values = u.values();
            let comps: Vec<&[f64]> = (0..n).map(|a| grad.component(a)).collect();
            let vol: f64 = (0..n).map(|a| grid.spacing_of(a)).product();
            Ok(tiled_sum(grid.node_count(), |flat| {
                let idx = grid.node_coords(flat);
                let mut x = [0.0; MAX_DIM];
                grid.node_pos(flat, &mut x);
                let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                if r <= r0 || r > r1 {
                    return 0.0;
                }
                let mut w = vol;
                for a in 0..n {
                    if idx[a] == 0 || idx[a] + 1 == grid.extent_of(a) {
                        w *= 0.5;
                    }
                }
                let mut p = [0.0; MAX_DIM];
                for a in 0..n {
                    p[a] = comps[a][flat];
                }
                f.eval(&p[..n], values[flat], &x[..bounded]) * w
            }))
        }
    }
}

/// Trace energy over the face `x_1 = 0`: an `(n-1)`-dimensional midpoint
/// rule with one-sided normal derivatives. The grid must start exactly at
/// the face.
pub fn boundary_energy(u: &ScalarField, f: &Integrand, rule: &QuadratureRule) -> Result<f64> {
    let grid = u.grid();
    let n = grid.dim();
    if f.dim() != n {
        return Err(Error::GridMismatch(format!(
            "integrand dimension {} vs grid dimension {n}",
            f.dim()
        )));
    }
    if n < 2 || grid.split() < 2 {
        return Err(Error::Quadrature(
            "trace energy needs a bounded first axis and dimension >= 2".into(),
        ));
    }
    if grid.origin_of(0) != 0.0 {
        return Err(Error::Quadrature(format!(
            "trace face is x_1 = 0 but the first axis starts at {}",
            grid.origin_of(0)
        )));
    }
    if grid.extent_of(0) < 3 {
        return Err(Error::Quadrature("one-sided normal derivative needs 3 nodes".into()));
    }
    if rule.scheme() != Scheme::Midpoint {
        return Err(Error::Quadrature("trace energy uses the midpoint rule".into()));
    }
    let geom = CellGeom::new(grid);
    let values = u.values();
    let bounded = grid.bounded_len();
    let s0 = geom.strides[0];
    let h0 = grid.spacing_of(0);
    // Face cells: cells of the remaining n-1 axes.
    let face_cells: usize = (1..n).map(|a| geom.cextent[a]).product();
    let face_vol: f64 = (1..n).map(|a| grid.spacing_of(a)).product();
    let tangential_corners = geom.corner_count / 2;
    Ok(tiled_sum(face_cells, |cell| {
        // Decode over axes 1..n.
        let mut rest = cell;
        let mut base = 0;
        let mut idx = [0usize; MAX_DIM];
        for a in (1..n).rev() {
            idx[a] = rest % geom.cextent[a];
            rest /= geom.cextent[a];
            base += idx[a] * geom.strides[a];
        }
        let mut x = [0.0; MAX_DIM];
        x[0] = 0.0;
        for a in 1..n {
            x[a] = grid.origin_of(a) + (idx[a] as f64 + 0.5) * grid.spacing_of(a);
        }
        let mut z = 0.0;
        let mut p = [0.0; MAX_DIM];
        for mask in 0..geom.corner_count {
            if mask & 1 != 0 {
                continue; // corners stay on the face i_0 = 0
            }
            let off = geom.corner_offsets[mask];
            let v = values[base + off];
            z += v;
            p[0] += (-3.0 * v + 4.0 * values[base + off + s0] - values[base + off + 2 * s0])
                / (2.0 * h0);
            for a in 1..n {
                if mask & (1 << a) != 0 {
                    p[a] += v;
                } else {
                    p[a] -= v;
                }
            }
        }
        z /= tangential_corners as f64;
        p[0] /= tangential_corners as f64;
        for a in 1..n {
            p[a] /= (tangential_corners / 2).max(1) as f64 * grid.spacing_of(a);
        }
        f.eval(&p[..n], z, &x[..bounded]) * face_vol
    }))
}

/// Growth profile of a field: `a(r)`, the plain energy `E(r)`, and a
/// power-law fit of `a` over the upper half of the radii.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub radii: Vec<f64>,
    /// `a(r) = integral of |F_pp| |grad u|^2` over the ball of radius r.
    pub growth: Vec<f64>,
    /// Plain energy over the same balls.
    pub energies: Vec<f64>,
    /// Log-log least-squares slope of `a(r)` on the upper half of the radii.
    pub exponent: f64,
    /// Multiplicative constant of the fit `a(r) ~ constant * r^exponent`.
    pub constant: f64,
    /// Filled by [`check_growth`]: `a(r) / (r * pi_k(r))`.
    pub ratios: Option<Vec<f64>>,
    /// Set when some `a(r)` is nonpositive or non-finite; the fit is then
    /// meaningless.
    pub degenerate: bool,
}

impl EnergyReport {
    /// CSV table `r,a_r,E_r[,ratio]` with one row per radius.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.ratios.is_some() {
            out.push_str("r,a_r,E_r,ratio\n");
        } else {
            out.push_str("r,a_r,E_r\n");
        }
        for (i, &r) in self.radii.iter().enumerate() {
            let _ = write!(out, "{r:.12e},{:.12e},{:.12e}", self.growth[i], self.energies[i]);
            if let Some(ratios) = &self.ratios {
                let _ = write!(out, ",{:.12e}", ratios[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Compute `a(r)` and `E(r)` across strictly increasing radii in one pass
/// over the cells, then fit `a(r) ~ C r^alpha` on the upper half.
pub fn growth_profile(
    u: &ScalarField,
    f: &Integrand,
    radii: &[f64],
    norm: MatrixNorm,
    rule: &QuadratureRule,
) -> Result<EnergyReport> {
    if radii.is_empty() {
        return Err(Error::Quadrature("no radii".into()));
    }
    for w in radii.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Quadrature(format!("radii not increasing: {} then {}", w[0], w[1])));
        }
    }
    if !(radii[0] > 0.0) {
        return Err(Error::Quadrature(format!("radius {} not positive", radii[0])));
    }
    let top = *radii.last().unwrap();
    validate(u, f, top, rule)?;
    if rule.scheme() != Scheme::Midpoint {
        return Err(Error::Quadrature("growth profiles use the midpoint rule".into()));
    }
    let grid = u.grid();
    let n = grid.dim();
    let bounded = grid.bounded_len();
    let geom = CellGeom::new(grid);
    let values = u.values();
    let m = radii.len();
    let shells = tiled_sum_multi(geom.cell_count, 2 * m, |cell, slots| {
        let mut idx = [0usize; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        let mut hess = [0.0; MAX_DIM * MAX_DIM];
        let base = geom.decode(cell, &mut idx);
        center(grid, &idx, &mut x);
        let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let bin = radii.partition_point(|&cut| cut < r);
        if bin >= m {
            return;
        }
        let z = geom.sample(grid, values, base, &mut p);
        let p2: f64 = p[..n].iter().map(|v| v * v).sum();
        f.hess_pp(&p[..n], z, &x[..bounded], &mut hess[..n * n]);
        let a_c = matrix_norm(&hess[..n * n], n, norm) * p2 * geom.vol;
        let e_c = f.eval(&p[..n], z, &x[..bounded]) * geom.vol;
        slots[2 * bin] += a_c;
        slots[2 * bin + 1] += e_c;
    });
    let mut growth = Vec::with_capacity(m);
    let mut energies = Vec::with_capacity(m);
    let (mut acc_a, mut acc_e) = (0.0, 0.0);
    for i in 0..m {
        acc_a += shells[2 * i];
        acc_e += shells[2 * i + 1];
        growth.push(acc_a);
        energies.push(acc_e);
    }
    let degenerate = growth.iter().any(|&a| !(a > 0.0));
    let (exponent, constant) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        fit_power_law(&radii[m / 2..], &growth[m / 2..])
    };
    Ok(EnergyReport { radii: radii.to_vec(), growth, energies, exponent, constant, ratios: None, degenerate })
}

fn fit_power_law(r: &[f64], a: &[f64]) -> (f64, f64) {
    let m = r.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&ri, &ai) in r.iter().zip(a) {
        let x = ri.ln();
        let y = ai.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return (f64::NAN, f64::NAN);
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    (slope, intercept.exp())
}

/// Outcome of the weak growth test `a(r) <= C r pi_k(r)`.
#[derive(Clone, Debug)]
pub struct GrowthCheck {
    /// True when the ratios on the upper half of the radii are
    /// non-increasing within a 5% slack.
    pub pass: bool,
    /// Largest observed ratio: the smallest admissible `C`.
    pub constant: f64,
}

/// Test the growth profile against `r * pi_k(r)` and record the ratios in
/// the report.
pub fn check_growth(report: &mut EnergyReport, level: u32) -> Result<GrowthCheck> {
    if report.degenerate {
        return Err(Error::Quadrature("degenerate growth profile (some a(r) <= 0)".into()));
    }
    let mut ratios = Vec::with_capacity(report.radii.len());
    for (&r, &a) in report.radii.iter().zip(&report.growth) {
        let weight = r * crate::deformation::pi(level as i32, r)?;
        ratios.push(a / weight);
    }
    let half = report.radii.len() / 2;
    let mut pass = true;
    for w in ratios[half..].windows(2) {
        if w[1] > 1.05 * w[0] {
            pass = false;
        }
    }
    let constant = ratios.iter().cloned().fold(0.0, f64::max);
    report.ratios = Some(ratios);
    Ok(GrowthCheck { pass, constant })
}

/// Second energy difference `E(u_+) + E(u_-) - 2 E(u)` of the sliding
/// construction, assembled per cell by pulling both slid energies back to
/// the fixed grid (see the module docs for the formula). Exactly symmetric
/// under `t -> -t`; cells with zero ramp slope contribute exactly zero.
pub fn second_difference(
    u: &ScalarField,
    f: &Integrand,
    cutoff: &CutoffProfile,
    rule: &QuadratureRule,
) -> Result<f64> {
    validate(u, f, cutoff.radius(), rule)?;
    if rule.scheme() != Scheme::Midpoint {
        return Err(Error::Quadrature("second differences use the midpoint rule".into()));
    }
    let grid = u.grid();
    let n = grid.dim();
    if !grid.is_invariant(n - 1) {
        return Err(Error::InvalidDeformation(
            "slide axis (the last axis) must be translation-invariant".into(),
        ));
    }
    let bounded = grid.bounded_len();
    let geom = CellGeom::new(grid);
    let values = u.values();
    let t = cutoff.shift();
    Ok(tiled_sum(geom.cell_count, |cell| {
        let mut idx = [0usize; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        let base = geom.decode(cell, &mut idx);
        center(grid, &idx, &mut x);
        let r = x[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let slope = cutoff.derivative(r);
        if slope == 0.0 {
            return 0.0;
        }
        let tau = t * slope;
        let beta = tau * x[n - 1] / r;
        let z = geom.sample(grid, values, base, &mut p);
        let base_val = f.eval(&p[..n], z, &x[..bounded]);
        let pn = p[n - 1];
        let mut shifted = [0.0; MAX_DIM];
        let mut delta = 0.0;
        for sgn in [1.0, -1.0] {
            let jac = 1.0 + sgn * beta;
            let coeff = sgn * tau * pn / jac;
            for a in 0..n {
                shifted[a] = p[a] - coeff * x[a] / r;
            }
            delta += f.eval(&shifted[..n], z, &x[..bounded]) * jac;
        }
        (delta - 2.0 * base_val) * geom.vol
    }))
}

fn check_support(g: &ScalarField) -> Result<()> {
    let grid = g.grid();
    let n = grid.dim();
    let tol = 1e-12 * g.linf_norm().max(1.0);
    for flat in 0..grid.node_count() {
        let idx = grid.node_coords(flat);
        let on_boundary = (0..n).any(|a| idx[a] == 0 || idx[a] + 1 == grid.extent_of(a));
        if on_boundary && g.values()[flat].abs() > tol {
            return Err(Error::SupportEscape(format!(
                "test field is {} on the hull boundary",
                g.values()[flat]
            )));
        }
    }
    Ok(())
}

/// First variation `L(g) = integral of F_p . grad g + F_z g` at `u`, for a
/// test field `g` supported strictly inside the hull.
pub fn first_variation(
    u: &ScalarField,
    g: &ScalarField,
    f: &Integrand,
    rule: &QuadratureRule,
) -> Result<f64> {
    variation(u, g, f, rule, false)
}

/// Second variation `Q(g) = integral of (grad g)^T F_pp grad g
/// + 2 g F_pz . grad g + F_zz g^2` at `u`.
pub fn second_variation(
    u: &ScalarField,
    g: &ScalarField,
    f: &Integrand,
    rule: &QuadratureRule,
) -> Result<f64> {
    variation(u, g, f, rule, true)
}

fn variation(
    u: &ScalarField,
    g: &ScalarField,
    f: &Integrand,
    rule: &QuadratureRule,
    second: bool,
) -> Result<f64> {
    validate(u, f, f64::INFINITY, rule)?;
    if u.grid() != g.grid() {
        return Err(Error::GridMismatch("field vs test field".into()));
    }
    if rule.scheme() != Scheme::Midpoint {
        return Err(Error::Quadrature("variations use the midpoint rule".into()));
    }
    check_support(g)?;
    let grid = u.grid();
    let n = grid.dim();
    let bounded = grid.bounded_len();
    let geom = CellGeom::new(grid);
    let uv = u.values();
    let gv = g.values();
    Ok(tiled_sum(geom.cell_count, |cell| {
        let mut idx = [0usize; MAX_DIM];
        let mut x = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        let mut q = [0.0; MAX_DIM];
        let base = geom.decode(cell, &mut idx);
        center(grid, &idx, &mut x);
        let z = geom.sample(grid, uv, base, &mut p);
        let w = geom.sample(grid, gv, base, &mut q);
        if second {
            let mut hess = [0.0; MAX_DIM * MAX_DIM];
            let mut cross = [0.0; MAX_DIM];
            f.hess_pp(&p[..n], z, &x[..bounded], &mut hess[..n * n]);
            f.grad_pz(&p[..n], z, &x[..bounded], &mut cross[..n]);
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += q[i] * hess[i * n + j] * q[j];
                }
                quad += 2.0 * w * cross[i] * q[i];
            }
            quad += f.deriv_zz(&p[..n], z, &x[..bounded]) * w * w;
            quad * geom.vol
        } else {
            let mut fp = [0.0; MAX_DIM];
            f.grad_p(&p[..n], z, &x[..bounded], &mut fp[..n]);
            let mut lin: f64 = (0..n).map(|a| fp[a] * q[a]).sum();
            lin += f.deriv_z(&p[..n], z, &x[..bounded]) * w;
            lin * geom.vol
        }
    }))
}

/// Residual of the lattice identity
/// `E(max(a, b)) + E(min(a, b)) = E(a) + E(b)` over the ball of `radius`.
/// Exact in the continuum; discretely it decays with the spacing because
/// only cells straddling the contact set `{a = b}` contribute.
pub fn energy_identity_residual(
    a: &ScalarField,
    b: &ScalarField,
    f: &Integrand,
    radius: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let hi = a.pointwise_max(b)?;
    let lo = a.pointwise_min(b)?;
    let lhs = energy(&hi, f, radius, rule)? + energy(&lo, f, radius, rule)?;
    let rhs = energy(a, f, radius, rule)? + energy(b, f, radius, rule)?;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{slide_field, Sign};
    use crate::integrand::Params;

    fn dirichlet(n: usize) -> Integrand {
        Integrand::catalog("dirichlet", n, &Params::new()).unwrap()
    }

    #[test]
    fn linear_field_energy_is_exact() {
        let grid = Grid::symmetric(&[1.0, 1.0], 0.25, 1).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[0] + 0.5);
        let f = dirichlet(2);
        let mid = energy(&u, &f, f64::INFINITY, &QuadratureRule::midpoint()).unwrap();
        let trap = energy(&u, &f, f64::INFINITY, &QuadratureRule::trapezoid()).unwrap();
        // E = area * |grad|^2 / 2 = 4 * 0.5 = 2.
        assert!((mid - 2.0).abs() < 1e-12, "midpoint {mid}");
        assert!((trap - 2.0).abs() < 1e-12, "trapezoid {trap}");
    }

    #[test]
    fn midpoint_rule_is_second_order()  {
        let f = dirichlet(1);
        let exact = std::f64::consts::PI * std::f64::consts::PI / 2.0;
        let err = |h: f64| {
            let grid = Grid::symmetric(&[1.0], h, 1).unwrap();
            let u = ScalarField::from_fn(grid, |x| (std::f64::consts::PI * x[0]).sin());
            (energy(&u, &f, f64::INFINITY, &QuadratureRule::midpoint()).unwrap() - exact).abs()
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        let ratio = e1 / e2;
        assert!((3.4..4.6).contains(&ratio), "halving ratio {ratio}");
    }

    #[test]
    fn shells_partition_the_ball() {
        let grid = Grid::symmetric(&[4.0, 4.0], 0.1, 1).unwrap();
        let u = ScalarField::from_fn(grid, |x| (x[1] + 0.2 * x[0]).tanh());
        let f = dirichlet(2);
        let rule = QuadratureRule::midpoint();
        let whole = energy(&u, &f, 3.5, &rule).unwrap();
        let inner = energy_shell(&u, &f, -1.0, 2.0, &rule).unwrap();
        let outer = energy_shell(&u, &f, 2.0, 3.5, &rule).unwrap();
        assert!(
            ((inner + outer) - whole).abs() <= 1e-12 * whole.abs().max(1.0),
            "{inner} + {outer} vs {whole}"
        );
    }

    #[test]
    fn singular_weight_integrates_cleanly_from_the_offset_centers() {
        let mut params = Params::new();
        params = params.set("s", 0.5);
        let f = Integrand::catalog("weighted_dirichlet", 2, &params).unwrap();
        // u = x_2 on [0,1] x [-1,1]: F = sqrt(x_1), integral = 2/3 * 2 = 4/3.
        let exact = 4.0 / 3.0;
        let err = |h: f64| {
            let extent = [(1.0 / h) as usize + 1, (2.0 / h) as usize + 1];
            let grid = Grid::new(&[0.0, -1.0], &[h, h], &extent, 2).unwrap();
            let u = ScalarField::from_fn(grid, |x| x[1]);
            (energy(&u, &f, f64::INFINITY, &QuadratureRule::midpoint()).unwrap() - exact).abs()
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        assert!(e2 < e1 / 2.5, "singular convergence {e1} -> {e2}");
        // The trapezoid rule would place an evaluation on the singular face.
        let grid = Grid::new(&[0.0, -1.0], &[0.1, 0.1], &[11, 21], 2).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[1]);
        assert!(energy(&u, &f, f64::INFINITY, &QuadratureRule::trapezoid()).is_err());
        // Negative first axis is outside the weight's domain.
        let bad = Grid::symmetric(&[1.0, 1.0], 0.1, 2).unwrap();
        let v = ScalarField::from_fn(bad, |x| x[1]);
        assert!(energy(&v, &f, f64::INFINITY, &QuadratureRule::midpoint()).is_err());
    }

    #[test]
    fn trace_energy_on_the_face() {
        // u = x_1 + 3 x_2 on [0,2] x [-1,1]; on the face: grad = (1, 3),
        // z = 3 x_2, two-phase-free integrand |p|^2 / 2 -> 5 * length 2 = 10.
        let grid = Grid::new(&[0.0, -1.0], &[0.05, 0.05], &[41, 41], 2).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[0] + 3.0 * x[1]);
        let f = dirichlet(2);
        let e = boundary_energy(&u, &f, &QuadratureRule::midpoint()).unwrap();
        assert!((e - 10.0).abs() < 1e-10, "trace energy {e}");
        let centered = Grid::symmetric(&[1.0, 1.0], 0.1, 2).unwrap();
        let v = ScalarField::from_fn(centered, |x| x[0]);
        assert!(boundary_energy(&v, &f, &QuadratureRule::midpoint()).is_err(), "face not at 0");
    }

    #[test]
    fn growth_profile_of_a_linear_field() {
        let grid = Grid::symmetric(&[4.2, 4.2], 0.05, 1).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[1]);
        let f = dirichlet(2);
        let radii: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
        let mut report =
            growth_profile(&u, &f, &radii, MatrixNorm::Spectral, &QuadratureRule::midpoint())
                .unwrap();
        // a(r) = |I| * 1 * pi r^2.
        for (&r, &a) in report.radii.iter().zip(&report.growth) {
            let exact = std::f64::consts::PI * r * r;
            assert!((a - exact).abs() < 0.05 * exact, "a({r}) = {a} vs {exact}");
        }
        assert!((report.exponent - 2.0).abs() < 0.02, "exponent {}", report.exponent);
        let check = check_growth(&mut report, 0).unwrap();
        assert!(check.pass);
        assert!((check.constant - std::f64::consts::PI).abs() < 0.1);
        let csv = report.to_csv();
        assert!(csv.starts_with("r,a_r,E_r,ratio\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn degenerate_growth_is_flagged() {
        let grid = Grid::symmetric(&[2.0], 0.1, 1).unwrap();
        let u = ScalarField::constant(grid, 1.0);
        let f = dirichlet(1);
        let report =
            growth_profile(&u, &f, &[0.5, 1.0, 1.5], MatrixNorm::Spectral, &QuadratureRule::midpoint())
                .unwrap();
        assert!(report.degenerate);
        assert!(report.exponent.is_nan());
        let mut r = report;
        assert!(check_growth(&mut r, 0).is_err());
    }

    #[test]
    fn second_difference_matches_the_rank_one_oracle() {
        // Linear field and Dirichlet density: the pullback algebra reduces
        // per cell to tau^2 p_n^2 / (1 - beta^2) * vol, computable directly.
        let grid = Grid::symmetric(&[6.5, 6.5], 0.05, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.4 * x[0] + 1.3 * x[1]);
        let f = dirichlet(2);
        let c = CutoffProfile::new(6.0, 0, 0.3).unwrap();
        let got = second_difference(&u, &f, &c, &QuadratureRule::midpoint()).unwrap();
        let mut expect = 0.0;
        let m = [grid.extent_of(0) - 1, grid.extent_of(1) - 1];
        for i in 0..m[0] {
            for j in 0..m[1] {
                let x = grid.origin_of(0) + (i as f64 + 0.5) * grid.spacing_of(0);
                let y = grid.origin_of(1) + (j as f64 + 0.5) * grid.spacing_of(1);
                let r = (x * x + y * y).sqrt();
                let tau = c.shift() * c.derivative(r);
                if tau == 0.0 {
                    continue;
                }
                let beta = tau * y / r;
                expect += tau * tau * 1.3 * 1.3 / (1.0 - beta * beta)
                    * grid.spacing_of(0)
                    * grid.spacing_of(1);
            }
        }
        assert!((got - expect).abs() < 1e-12 * expect.max(1.0), "{got} vs {expect}");
        assert!(got > 0.0);
        // Symmetry in the sign of the shift is exact by construction.
        let c_neg = CutoffProfile::new(6.0, 0, -0.3).unwrap();
        let neg = second_difference(&u, &f, &c_neg, &QuadratureRule::midpoint()).unwrap();
        assert_eq!(got.to_bits(), neg.to_bits());
    }

    #[test]
    fn second_difference_agrees_with_slid_energies() {
        let grid = Grid::symmetric(&[7.0], 0.002, 1).unwrap();
        let u = ScalarField::from_fn(grid, |x| (0.8 * x[0]).tanh());
        let f = dirichlet(1);
        let c = CutoffProfile::new(6.0, 0, 0.25).unwrap();
        let rule = QuadratureRule::midpoint();
        let pullback = second_difference(&u, &f, &c, &rule).unwrap();
        let plus = slide_field(&u, &c, Sign::Plus).unwrap();
        let minus = slide_field(&u, &c, Sign::Minus).unwrap();
        let direct = energy(&plus, &f, f64::INFINITY, &rule).unwrap()
            + energy(&minus, &f, f64::INFINITY, &rule).unwrap()
            - 2.0 * energy(&u, &f, f64::INFINITY, &rule).unwrap();
        assert!(
            (pullback - direct).abs() < 0.2 * pullback.abs().max(1e-4),
            "pullback {pullback} vs direct {direct}"
        );
    }

    #[test]
    fn first_variation_vanishes_at_linear_fields() {
        let grid = Grid::symmetric(&[2.0, 2.0], 0.05, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.7 * x[0] - 0.2 * x[1]);
        let g = ScalarField::from_fn(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 1.5 {
                let c = (std::f64::consts::FRAC_PI_2 * r / 1.5).cos();
                c * c
            } else {
                0.0
            }
        });
        let f = dirichlet(2);
        let l = first_variation(&u, &g, &f, &QuadratureRule::midpoint()).unwrap();
        assert!(l.abs() < 1e-12, "first variation {l}");
    }

    #[test]
    fn second_variation_scales_quadratically_and_stays_nonnegative() {
        let grid = Grid::symmetric(&[2.0], 0.01, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0].tanh());
        let g = ScalarField::from_fn(grid.clone(), |x| {
            if x[0].abs() < 1.5 {
                (std::f64::consts::PI * x[0] / 1.5).sin() * (1.0 - (x[0] / 1.5).powi(2))
            } else {
                0.0
            }
        });
        let f = dirichlet(1);
        let rule = QuadratureRule::midpoint();
        let q1 = second_variation(&u, &g, &f, &rule).unwrap();
        let scaled = ScalarField::from_values(
            grid,
            g.values().iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let q3 = second_variation(&u, &scaled, &f, &rule).unwrap();
        assert!((q3 - 9.0 * q1).abs() < 1e-12 * q3.abs(), "{q3} vs 9 * {q1}");
        assert!(q1 >= 0.0);
    }

    #[test]
    fn variation_rejects_fields_touching_the_boundary() {
        let grid = Grid::symmetric(&[1.0], 0.1, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0]);
        let g = ScalarField::constant(grid, 1.0);
        let f = dirichlet(1);
        assert!(matches!(
            first_variation(&u, &g, &f, &QuadratureRule::midpoint()),
            Err(Error::SupportEscape(_))
        ));
    }

    #[test]
    fn lattice_identity_residual_decays_linearly() {
        let f = dirichlet(2);
        let residual = |h: f64| {
            let grid = Grid::symmetric(&[2.0, 2.0], h, 1).unwrap();
            let a = ScalarField::from_fn(grid.clone(), |x| 0.9 * x[1] + 0.1 * x[0]);
            let b = ScalarField::from_fn(grid, |x| -0.7 * x[1] + 0.23 * x[0] + 0.11);
            energy_identity_residual(&a, &b, &f, 1.8, &QuadratureRule::midpoint()).unwrap()
        };
        let r1 = residual(0.04);
        let r2 = residual(0.02);
        assert!(r1 > 1e-8, "interface cells must contribute, got {r1}");
        let ratio = r1 / r2;
        assert!((1.5..3.0).contains(&ratio), "halving ratio {ratio}");
    }
}
