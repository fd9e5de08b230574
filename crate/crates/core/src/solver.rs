//! Relaxation toward critical fields.
//!
//! [`gradient_flow`] runs explicit-Euler descent `u += dt (div F_p - F_z)`
//! with per-axis boundary rules (frozen values, periodic wrap, or zero
//! flux). The divergence is assembled in flux form: `F_p` is evaluated on
//! cell faces from compact differences and differenced back to the nodes.
//! The compact stencil couples neighboring nodes directly, so no
//! checkerboard component survives the flow (a wide centered-centered
//! composition would let the two sublattices relax independently). The
//! residual is the sup norm of the descent direction over the updateable
//! nodes, so a converged flow is a genuine discrete critical point of the
//! scheme. All per-node passes are elementwise, which keeps results
//! bitwise identical across thread counts.
//!
//! [`heteroclinic_1d`] computes the transition profile of a double-well
//! potential by semi-implicit descent (implicit diffusion via a
//! tridiagonal solve, explicit reaction), which tolerates the large time
//! steps that the profile needs on fine grids. For the well
//! `scale (z - a)^2 (z - b)^2` the limit is
//! `(a+b)/2 + (b-a)/2 * tanh(kappa s)` with
//! `kappa = (b-a)/2 * sqrt(2 scale)`.

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, MAX_DIM};
use crate::integrand::Integrand;
use crate::reduce::map_indices;

/// Boundary handling along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Boundary nodes keep their initial values and are never updated.
    Fixed,
    /// Indices wrap around; the hull is a period cell without a duplicate
    /// endpoint.
    Periodic,
    /// Mirror (homogeneous Neumann) ghost values.
    ZeroFlux,
}

/// Gradient-flow parameters.
#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub dt: f64,
    pub max_steps: usize,
    /// Convergence threshold on the sup norm of the descent direction.
    pub tolerance: f64,
    /// One rule per axis.
    pub bc: Vec<BoundaryRule>,
    /// Record the residual (and check energy decrease) every this many
    /// steps; 0 records only start and end.
    pub check_every: usize,
}

/// Flow outcome.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub field: ScalarField,
    pub steps: usize,
    /// Final sup-norm residual.
    pub residual: f64,
    /// `(step, residual)` samples.
    pub residual_history: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Neighbor value along `axis` in direction `dir`, honoring the boundary
/// rule; `None` means the stencil must fall back to a one-sided form.
fn neighbor(
    values: &[f64],
    flat: usize,
    coord: usize,
    axis_len: usize,
    stride: usize,
    dir: isize,
    bc: BoundaryRule,
) -> Option<f64> {
    let inside = if dir > 0 { coord + 1 < axis_len } else { coord > 0 };
    if inside {
        return Some(values[(flat as isize + dir * stride as isize) as usize]);
    }
    match bc {
        BoundaryRule::Fixed => None,
        BoundaryRule::Periodic => {
            let wrapped = if dir > 0 {
                flat - (axis_len - 1) * stride
            } else {
                flat + (axis_len - 1) * stride
            };
            Some(values[wrapped])
        }
        BoundaryRule::ZeroFlux => {
            // Mirror: ghost equals the inner neighbor.
            Some(values[(flat as isize - dir * stride as isize) as usize])
        }
    }
}

/// Centered derivative with boundary-rule fallback (one-sided second order
/// where a frozen boundary blocks the stencil).
fn derivative_bc(
    values: &[f64],
    flat: usize,
    coord: usize,
    axis_len: usize,
    stride: usize,
    h: f64,
    bc: BoundaryRule,
) -> f64 {
    let left = neighbor(values, flat, coord, axis_len, stride, -1, bc);
    let right = neighbor(values, flat, coord, axis_len, stride, 1, bc);
    match (left, right) {
        (Some(l), Some(r)) => (r - l) / (2.0 * h),
        (None, Some(_)) => {
            (-3.0 * values[flat] + 4.0 * values[flat + stride] - values[flat + 2 * stride])
                / (2.0 * h)
        }
        (Some(_), None) => {
            (3.0 * values[flat] - 4.0 * values[flat - stride] + values[flat - 2 * stride])
                / (2.0 * h)
        }
        (None, None) => 0.0,
    }
}

struct FlowGeometry {
    strides: [usize; MAX_DIM],
    extents: [usize; MAX_DIM],
    spacings: [f64; MAX_DIM],
}

impl FlowGeometry {
    fn new(grid: &Grid) -> FlowGeometry {
        let n = grid.dim();
        let mut strides = [0usize; MAX_DIM];
        let mut extents = [0usize; MAX_DIM];
        let mut spacings = [0.0; MAX_DIM];
        let mut acc = 1;
        for a in (0..n).rev() {
            strides[a] = acc;
            acc *= grid.extent_of(a);
            extents[a] = grid.extent_of(a);
            spacings[a] = grid.spacing_of(a);
        }
        FlowGeometry { strides, extents, spacings }
    }
}

/// Explicit-Euler descent on the energy, `u += dt * (div F_p - F_z)`.
/// Converges when the sup norm of the bracket drops below the tolerance;
/// a field that is already critical returns after zero steps.
pub fn gradient_flow(u0: &ScalarField, f: &Integrand, cfg: &FlowConfig) -> Result<FlowResult> {
    let grid = u0.grid();
    let n = grid.dim();
    if f.dim() != n {
        return Err(Error::GridMismatch(format!(
            "integrand dimension {} vs grid dimension {n}",
            f.dim()
        )));
    }
    if cfg.bc.len() != n {
        return Err(Error::Solver(format!(
            "{} boundary rules for {n} axes",
            cfg.bc.len()
        )));
    }
    if f.is_singular() {
        return Err(Error::Solver("flows are defined for regular integrands".into()));
    }
    let h_min = (0..n).map(|a| grid.spacing_of(a)).fold(f64::INFINITY, f64::min);
    let dt_max = h_min * h_min / (2.0 * n as f64);
    if !(cfg.dt > 0.0 && cfg.dt <= dt_max) {
        return Err(Error::Solver(format!(
            "dt {} outside (0, {dt_max:.3e}] (diffusion stability)",
            cfg.dt
        )));
    }
    for a in 0..n {
        if cfg.bc[a] == BoundaryRule::Fixed && grid.extent_of(a) < 3 {
            return Err(Error::Solver(format!("axis {a} has no interior nodes")));
        }
    }
    let geom = FlowGeometry::new(grid);
    let bounded = grid.bounded_len();
    let count = grid.node_count();
    let bc = cfg.bc.clone();

    let updateable = {
        let bc = bc.clone();
        move |coords: &[usize; MAX_DIM]| -> bool {
            (0..n).all(|a| {
                bc[a] != BoundaryRule::Fixed
                    || (coords[a] > 0 && coords[a] + 1 < geom.extents[a])
            })
        }
    };

    let descent = |values: &[f64]| -> Vec<f64> {
        // Nodal gradient components under the boundary rules; these feed
        // the zero-order term and the tangential parts of the face fluxes.
        let grads: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                map_indices(count, |flat| {
                    let coords = grid.node_coords(flat);
                    derivative_bc(
                        values,
                        flat,
                        coords[a],
                        geom.extents[a],
                        geom.strides[a],
                        geom.spacings[a],
                        bc[a],
                    )
                })
            })
            .collect();
        // Normal flux component on the face between a node and its
        // successor along each axis. The slot at the last coordinate is
        // unused except under periodic wrap, where it holds the seam face.
        let faces: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                let grads = &grads;
                map_indices(count, |flat| {
                    let coords = grid.node_coords(flat);
                    let succ = if coords[a] + 1 < geom.extents[a] {
                        flat + geom.strides[a]
                    } else if bc[a] == BoundaryRule::Periodic {
                        flat - (geom.extents[a] - 1) * geom.strides[a]
                    } else {
                        return 0.0;
                    };
                    let mut p = [0.0; MAX_DIM];
                    for b in 0..n {
                        p[b] = if b == a {
                            (values[succ] - values[flat]) / geom.spacings[a]
                        } else {
                            0.5 * (grads[b][flat] + grads[b][succ])
                        };
                    }
                    let z = 0.5 * (values[flat] + values[succ]);
                    let mut x = [0.0; MAX_DIM];
                    grid.node_pos(flat, &mut x);
                    x[a] += 0.5 * geom.spacings[a];
                    let mut w = [0.0; MAX_DIM];
                    f.grad_p(&p[..n], z, &x[..bounded], &mut w[..n]);
                    w[a]
                })
            })
            .collect();
        // (div F_p - F_z) by face differences; outer zero-flux faces carry
        // no flux, frozen nodes are never updated so their slots are moot.
        map_indices(count, |flat| {
            let coords = grid.node_coords(flat);
            let mut div = 0.0;
            for a in 0..n {
                let hi = if coords[a] + 1 < geom.extents[a] || bc[a] == BoundaryRule::Periodic {
                    faces[a][flat]
                } else {
                    0.0
                };
                let lo = if coords[a] > 0 {
                    faces[a][flat - geom.strides[a]]
                } else if bc[a] == BoundaryRule::Periodic {
                    faces[a][flat + (geom.extents[a] - 1) * geom.strides[a]]
                } else {
                    0.0
                };
                div += (hi - lo) / geom.spacings[a];
            }
            let mut x = [0.0; MAX_DIM];
            grid.node_pos(flat, &mut x);
            let mut p = [0.0; MAX_DIM];
            for a in 0..n {
                p[a] = grads[a][flat];
            }
            div - f.deriv_z(&p[..n], values[flat], &x[..bounded])
        })
    };

    let sup_residual = |g: &[f64]| -> f64 {
        let mut sup = 0.0f64;
        for flat in 0..count {
            if updateable(&grid.node_coords(flat)) {
                sup = sup.max(g[flat].abs());
            }
        }
        sup
    };

    let mut values = u0.values().to_vec();
    let mut history = Vec::new();
    let g0 = descent(&values);
    let mut residual = sup_residual(&g0);
    history.push((0, residual));
    if residual <= cfg.tolerance {
        return Ok(FlowResult {
            field: ScalarField::from_values(grid.clone(), values)?,
            steps: 0,
            residual,
            residual_history: history,
            converged: true,
        });
    }
    let mut g = g0;
    let mut steps = 0;
    let mut converged = false;
    while steps < cfg.max_steps {
        let next: Vec<f64> = map_indices(count, |flat| {
            if updateable(&grid.node_coords(flat)) {
                values[flat] + cfg.dt * g[flat]
            } else {
                values[flat]
            }
        });
        values = next;
        steps += 1;
        g = descent(&values);
        residual = sup_residual(&g);
        let record = cfg.check_every > 0 && steps % cfg.check_every == 0;
        if record {
            history.push((steps, residual));
        }
        if !residual.is_finite() {
            return Err(Error::Solver(format!("residual diverged at step {steps}")));
        }
        if residual <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    if history.last().map(|&(s, _)| s) != Some(steps) {
        history.push((steps, residual));
    }
    Ok(FlowResult {
        field: ScalarField::from_values(grid.clone(), values)?,
        steps,
        residual,
        residual_history: history,
        converged,
    })
}

/// Symmetric double-well potential `scale (z - a)^2 (z - b)^2`.
#[derive(Clone, Copy, Debug)]
pub struct DoubleWell {
    a: f64,
    b: f64,
    scale: f64,
}

impl DoubleWell {
    pub fn new(a: f64, b: f64, scale: f64) -> Result<DoubleWell> {
        if !(a < b) {
            return Err(Error::Param(format!("wells {a} and {b} must be ordered")));
        }
        if !(scale > 0.0) {
            return Err(Error::Param(format!("scale {scale} not positive")));
        }
        Ok(DoubleWell { a, b, scale })
    }

    /// Wells at -1 and 1 with `W'(z) = z^3 - z`.
    pub fn standard() -> DoubleWell {
        DoubleWell { a: -1.0, b: 1.0, scale: 0.25 }
    }

    pub fn wells(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn value(&self, z: f64) -> f64 {
        let (p, q) = (z - self.a, z - self.b);
        self.scale * p * p * q * q
    }

    pub fn derivative(&self, z: f64) -> f64 {
        2.0 * self.scale * (z - self.a) * (z - self.b) * (2.0 * z - self.a - self.b)
    }

    /// Decay rate of the transition profile: the limit is
    /// `(a+b)/2 + (b-a)/2 tanh(kappa s)`.
    pub fn kappa(&self) -> f64 {
        (self.b - self.a) / 2.0 * (2.0 * self.scale).sqrt()
    }

    /// Interface energy `int sqrt(2 W)` between the wells:
    /// `sqrt(2 scale) (b - a)^3 / 6`.
    pub fn interface_energy(&self) -> f64 {
        (2.0 * self.scale).sqrt() * (self.b - self.a).powi(3) / 6.0
    }
}

/// Transition profile between the wells on `[-half_width, half_width]` by
/// semi-implicit descent with endpoint values pinned to the wells.
pub fn heteroclinic_1d(well: &DoubleWell, half_width: f64, spacing: f64) -> Result<ScalarField> {
    if !(half_width > 0.0 && spacing > 0.0 && half_width > 4.0 * spacing) {
        return Err(Error::Solver(format!(
            "degenerate interval: half width {half_width}, spacing {spacing}"
        )));
    }
    let grid = Grid::symmetric(&[half_width], spacing, 1)?;
    let count = grid.node_count();
    let h = grid.spacing_of(0);
    let (a, b) = well.wells();
    let mid = 0.5 * (a + b);
    let rad = 0.5 * (b - a);
    let mut u: Vec<f64> = (0..count)
        .map(|i| mid + rad * (well.kappa() * grid.pos(0, i)).tanh())
        .collect();
    u[0] = a;
    u[count - 1] = b;

    let mut dt = 0.25f64.min(0.45 / well_curvature_bound(well));
    let tol = 1e-10;
    let max_iters = 200_000;
    let energy_of = |u: &[f64]| -> f64 {
        let mut e = 0.0;
        for i in 0..count - 1 {
            let slope = (u[i + 1] - u[i]) / h;
            let zmid = 0.5 * (u[i + 1] + u[i]);
            e += (0.5 * slope * slope + well.value(zmid)) * h;
        }
        e
    };
    let mut last_energy = energy_of(&u);
    // Thomas factorization of (I - dt D) with identity boundary rows,
    // refreshed whenever dt changes.
    let mut sweep = ThomasSweep::new(count, dt / (h * h));
    let mut rhs = vec![0.0f64; count];
    for iter in 0..max_iters {
        rhs[0] = u[0];
        rhs[count - 1] = u[count - 1];
        for i in 1..count - 1 {
            rhs[i] = u[i] - dt * well.derivative(u[i]);
        }
        let next = sweep.solve(&rhs);
        let mut change = 0.0f64;
        for (x, y) in next.iter().zip(&u) {
            change = change.max((x - y).abs());
        }
        u = next;
        if change / dt <= tol {
            return ScalarField::from_values(grid, u);
        }
        if iter % 100 == 99 {
            let e = energy_of(&u);
            if e > last_energy + 1e-12 * (last_energy.abs() + 1.0) {
                dt *= 0.5;
                if dt < 1e-6 {
                    return Err(Error::Solver("descent step collapsed".into()));
                }
                sweep = ThomasSweep::new(count, dt / (h * h));
            }
            last_energy = e;
        }
    }
    Err(Error::Solver(format!("profile not converged after {max_iters} sweeps")))
}

fn well_curvature_bound(well: &DoubleWell) -> f64 {
    // |W''| on [a, b] is maximal at the wells: 2 scale (b - a)^2.
    let (a, b) = well.wells();
    2.0 * well.scale * (b - a) * (b - a)
}

/// Prefactored tridiagonal solve for `(I - lambda D)` with unit boundary
/// rows, `D` the second-difference stencil.
struct ThomasSweep {
    c_prime: Vec<f64>,
    lambda: f64,
}

impl ThomasSweep {
    fn new(count: usize, lambda: f64) -> ThomasSweep {
        let mut c_prime = vec![0.0f64; count];
        // Row 0: identity.
        c_prime[0] = 0.0;
        let mut last_c = 0.0;
        for i in 1..count - 1 {
            let denom = 1.0 + 2.0 * lambda - (-lambda) * last_c;
            c_prime[i] = -lambda / denom;
            last_c = c_prime[i];
        }
        ThomasSweep { c_prime, lambda }
    }

    fn solve(&mut self, rhs: &[f64]) -> Vec<f64> {
        let count = rhs.len();
        let lambda = self.lambda;
        let mut d_prime = vec![0.0f64; count];
        d_prime[0] = rhs[0];
        for i in 1..count - 1 {
            let denom = 1.0 + 2.0 * lambda - (-lambda) * self.c_prime[i - 1];
            d_prime[i] = (rhs[i] + lambda * d_prime[i - 1]) / denom;
        }
        d_prime[count - 1] = rhs[count - 1];
        let mut out = vec![0.0f64; count];
        out[count - 1] = d_prime[count - 1];
        for i in (1..count - 1).rev() {
            out[i] = d_prime[i] - self.c_prime[i] * out[i + 1];
        }
        out[0] = d_prime[0];
        out
    }
}
