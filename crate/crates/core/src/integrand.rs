//! Integrands `F(p, z, x')` and their derivative bundles.
//!
//! An [`Integrand`] packages the density `F` together with the first and
//! second derivatives in the gradient slot `p` and the value slot `z`:
//! `F_p`, `F_z`, `F_pp`, `F_pz`, `F_zz`. Quadrature, variation forms and the
//! sliding machinery only ever talk to this interface. Derivatives that a
//! caller does not supply are synthesized by central finite differences.
//!
//! `x'` is the bounded part of the coordinate (the cross-section variables);
//! integrands that live on fully translation-invariant domains ignore it.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

type ValueFn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;
type ScalarDerivFn = dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync;
type VectorDerivFn = dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync;
type MatrixDerivFn = dyn Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync;
type SmoothFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Step (relative to `max(1, |p|, |z|)`) for first finite differences.
const FD_STEP_FIRST: f64 = 1e-5;
/// Step for second finite differences; larger to tame rounding noise.
const FD_STEP_SECOND: f64 = 5e-4;

/// Named scalar parameters for catalog constructors.
#[derive(Clone, Debug, Default)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Params {
        Params(BTreeMap::new())
    }

    pub fn set(mut self, key: &str, value: f64) -> Params {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::Param(format!("missing parameter `{key}`")))
    }
}

/// Density `F(p, z, x')` with derivative evaluators.
#[derive(Clone)]
pub struct Integrand {
    n: usize,
    name: String,
    value: Arc<ValueFn>,
    dp: Arc<VectorDerivFn>,
    dz: Arc<ScalarDerivFn>,
    dpp: Arc<MatrixDerivFn>,
    dpz: Arc<VectorDerivFn>,
    dzz: Arc<ScalarDerivFn>,
    smooth: Arc<SmoothFn>,
    singular: bool,
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrand")
            .field("n", &self.n)
            .field("name", &self.name)
            .field("singular", &self.singular)
            .finish()
    }
}

impl Integrand {
    /// Start building an integrand from the density alone; unspecified
    /// derivatives fall back to central finite differences.
    pub fn builder<F>(n: usize, name: &str, value: F) -> IntegrandBuilder
    where
        F: Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        IntegrandBuilder {
            n,
            name: name.to_string(),
            value: Arc::new(value),
            dp: None,
            dz: None,
            dpp: None,
            dpz: None,
            dzz: None,
            smooth: None,
            singular: false,
        }
    }

    /// Members of the built-in catalog, by name:
    ///
    /// | name                 | density                                         |
    /// |----------------------|-------------------------------------------------|
    /// | `dirichlet`          | `|p|^2 / 2`                                     |
    /// | `allen_cahn`         | `|p|^2 / 2 + c (1 - z^2)^2 / 4`                 |
    /// | `weighted_dirichlet` | `x_1^(1-s) |p|^2`, singular weight, `s in (0,1)`|
    /// | `two_phase_smoothed` | `|p|^2 + (1 + tanh(z / w)) / 2`                 |
    /// | `oned_example`       | `p^2 - z^2` (dimension 1)                       |
    /// | `oned_example2`      | `p^2 - max(z, 0)^2` (dimension 1)               |
    /// | `abs_example`        | `|p|^2`                                         |
    ///
    /// Parameters: `well_scale` (`c`, default 1) for `allen_cahn`; `s`
    /// (required) for `weighted_dirichlet`; `width` (`w`, default 0.1) for
    /// `two_phase_smoothed`.
    pub fn catalog(name: &str, n: usize, params: &Params) -> Result<Integrand> {
        match name {
            "dirichlet" => Ok(quadratic_gradient(n, "dirichlet", 0.5)),
            "abs_example" => Ok(quadratic_gradient(n, "abs_example", 1.0)),
            "allen_cahn" => {
                let c = params.get_or("well_scale", 1.0);
                if !(c > 0.0) {
                    return Err(Error::Param(format!("well_scale {c} must be positive")));
                }
                let b = Integrand::builder(n, "allen_cahn", move |p, z, _| {
                    let w = 1.0 - z * z;
                    0.5 * dot(p, p) + c * w * w / 4.0
                })
                .grad_p(|p, _, _, out| out[..p.len()].copy_from_slice(p))
                .dz(move |_, z, _| c * (z * z * z - z))
                .hess_pp(move |p, _, _, out| identity_times(1.0, p.len(), out))
                .grad_pz(|p, _, _, out| out[..p.len()].fill(0.0))
                .dzz(move |_, z, _| c * (3.0 * z * z - 1.0));
                Ok(b.build())
            }
            "weighted_dirichlet" => {
                let s = params.require("s")?;
                if !(0.0 < s && s < 1.0) {
                    return Err(Error::Param(format!("exponent s={s} outside (0, 1)")));
                }
                let e = 1.0 - s;
                let b = Integrand::builder(n, "weighted_dirichlet", move |p, _, xp| {
                    xp[0].powf(e) * dot(p, p)
                })
                .grad_p(move |p, _, xp, out| {
                    let w = 2.0 * xp[0].powf(e);
                    for (o, &pi) in out.iter_mut().zip(p) {
                        *o = w * pi;
                    }
                })
                .dz(|_, _, _| 0.0)
                .hess_pp(move |p, _, xp, out| identity_times(2.0 * xp[0].powf(e), p.len(), out))
                .grad_pz(|p, _, _, out| out[..p.len()].fill(0.0))
                .dzz(|_, _, _| 0.0)
                .singular(true);
                Ok(b.build())
            }
            "two_phase_smoothed" => {
                let w = params.get_or("width", 0.1);
                if !(w > 0.0) {
                    return Err(Error::Param(format!("smoothing width {w} must be positive")));
                }
                let b = Integrand::builder(n, "two_phase_smoothed", move |p, z, _| {
                    dot(p, p) + 0.5 * (1.0 + (z / w).tanh())
                })
                .grad_p(|p, _, _, out| {
                    for (o, &pi) in out.iter_mut().zip(p) {
                        *o = 2.0 * pi;
                    }
                })
                .dz(move |_, z, _| {
                    let c = (z / w).cosh();
                    0.5 / (w * c * c)
                })
                .hess_pp(move |p, _, _, out| identity_times(2.0, p.len(), out))
                .grad_pz(|p, _, _, out| out[..p.len()].fill(0.0))
                .dzz(move |_, z, _| {
                    let t = (z / w).tanh();
                    let c = (z / w).cosh();
                    -t / (w * w * c * c)
                });
                Ok(b.build())
            }
            "oned_example" => {
                require_dim_1(n, name)?;
                let b = Integrand::builder(1, "oned_example", |p, z, _| p[0] * p[0] - z * z)
                    .grad_p(|p, _, _, out| out[0] = 2.0 * p[0])
                    .dz(|_, z, _| -2.0 * z)
                    .hess_pp(|_, _, _, out| out[0] = 2.0)
                    .grad_pz(|_, _, _, out| out[0] = 0.0)
                    .dzz(|_, _, _| -2.0);
                Ok(b.build())
            }
            "oned_example2" => {
                require_dim_1(n, name)?;
                let b = Integrand::builder(1, "oned_example2", |p, z, _| {
                    p[0] * p[0] - z.max(0.0) * z.max(0.0)
                })
                .grad_p(|p, _, _, out| out[0] = 2.0 * p[0])
                .dz(|_, z, _| -2.0 * z.max(0.0))
                .hess_pp(|_, _, _, out| out[0] = 2.0)
                .grad_pz(|_, _, _, out| out[0] = 0.0)
                .dzz(|_, z, _| if z > 0.0 { -2.0 } else { 0.0 });
                Ok(b.build())
            }
            other => Err(Error::UnknownIntegrand(other.to_string())),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Whether the density has a singular spatial weight (like `x_1^(1-s)`),
    /// so evaluation points must stay off the hyperplane `x_1 = 0`.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Whether `p` lies in the smoothness domain of the `p`-Hessian.
    pub fn smooth_at(&self, p: &[f64]) -> bool {
        (self.smooth)(p)
    }

    pub fn eval(&self, p: &[f64], z: f64, xp: &[f64]) -> f64 {
        (self.value)(p, z, xp)
    }

    pub fn grad_p(&self, p: &[f64], z: f64, xp: &[f64], out: &mut [f64]) {
        (self.dp)(p, z, xp, out)
    }

    pub fn deriv_z(&self, p: &[f64], z: f64, xp: &[f64]) -> f64 {
        (self.dz)(p, z, xp)
    }

    /// Row-major `n x n` Hessian in `p`.
    pub fn hess_pp(&self, p: &[f64], z: f64, xp: &[f64], out: &mut [f64]) {
        (self.dpp)(p, z, xp, out)
    }

    pub fn grad_pz(&self, p: &[f64], z: f64, xp: &[f64], out: &mut [f64]) {
        (self.dpz)(p, z, xp, out)
    }

    pub fn deriv_zz(&self, p: &[f64], z: f64, xp: &[f64]) -> f64 {
        (self.dzz)(p, z, xp)
    }
}

fn require_dim_1(n: usize, name: &str) -> Result<()> {
    if n != 1 {
        return Err(Error::Param(format!("`{name}` is one-dimensional, got n={n}")));
    }
    Ok(())
}

/// `c |p|^2` with exact derivatives; the two gradient-only catalog members.
fn quadratic_gradient(n: usize, name: &str, c: f64) -> Integrand {
    Integrand::builder(n, name, move |p, _, _| c * dot(p, p))
        .grad_p(move |p, _, _, out| {
            for (o, &pi) in out.iter_mut().zip(p) {
                *o = 2.0 * c * pi;
            }
        })
        .dz(|_, _, _| 0.0)
        .hess_pp(move |p, _, _, out| identity_times(2.0 * c, p.len(), out))
        .grad_pz(|p, _, _, out| out[..p.len()].fill(0.0))
        .dzz(|_, _, _| 0.0)
        .build()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn identity_times(c: f64, n: usize, out: &mut [f64]) {
    out[..n * n].fill(0.0);
    for i in 0..n {
        out[i * n + i] = c;
    }
}

/// Builder collecting optional analytic derivatives.
pub struct IntegrandBuilder {
    n: usize,
    name: String,
    value: Arc<ValueFn>,
    dp: Option<Arc<VectorDerivFn>>,
    dz: Option<Arc<ScalarDerivFn>>,
    dpp: Option<Arc<MatrixDerivFn>>,
    dpz: Option<Arc<VectorDerivFn>>,
    dzz: Option<Arc<ScalarDerivFn>>,
    smooth: Option<Arc<SmoothFn>>,
    singular: bool,
}

impl IntegrandBuilder {
    pub fn grad_p<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.dp = Some(Arc::new(f));
        self
    }

    pub fn dz<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.dz = Some(Arc::new(f));
        self
    }

    pub fn hess_pp<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.dpp = Some(Arc::new(f));
        self
    }

    pub fn grad_pz<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.dpz = Some(Arc::new(f));
        self
    }

    pub fn dzz<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.dzz = Some(Arc::new(f));
        self
    }

    /// Restrict where the `p`-Hessian is trusted (e.g. `p_n != 0`).
    pub fn smooth<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.smooth = Some(Arc::new(f));
        self
    }

    pub fn singular(mut self, flag: bool) -> Self {
        self.singular = flag;
        self
    }

    pub fn build(self) -> Integrand {
        let n = self.n;
        let value = self.value;

        let dp = self.dp.unwrap_or_else(|| {
            let value = value.clone();
            Arc::new(move |p: &[f64], z: f64, xp: &[f64], out: &mut [f64]| {
                let eps = fd_step(FD_STEP_FIRST, p, z);
                let mut pp = [0.0; crate::field::MAX_DIM];
                pp[..p.len()].copy_from_slice(p);
                for i in 0..p.len() {
                    pp[i] = p[i] + eps;
                    let hi = value(&pp[..p.len()], z, xp);
                    pp[i] = p[i] - eps;
                    let lo = value(&pp[..p.len()], z, xp);
                    pp[i] = p[i];
                    out[i] = (hi - lo) / (2.0 * eps);
                }
            })
        });

        let dz = self.dz.unwrap_or_else(|| {
            let value = value.clone();
            Arc::new(move |p: &[f64], z: f64, xp: &[f64]| {
                let eps = fd_step(FD_STEP_FIRST, p, z);
                (value(p, z + eps, xp) - value(p, z - eps, xp)) / (2.0 * eps)
            })
        });

        let dpp = self.dpp.unwrap_or_else(|| {
            let value = value.clone();
            Arc::new(move |p: &[f64], z: f64, xp: &[f64], out: &mut [f64]| {
                let n = p.len();
                let eps = fd_step(FD_STEP_SECOND, p, z);
                let mut pp = [0.0; crate::field::MAX_DIM];
                pp[..n].copy_from_slice(p);
                let base = value(p, z, xp);
                for i in 0..n {
                    // Diagonal: standard three-point second difference.
                    pp[i] = p[i] + eps;
                    let hi = value(&pp[..n], z, xp);
                    pp[i] = p[i] - eps;
                    let lo = value(&pp[..n], z, xp);
                    pp[i] = p[i];
                    out[i * n + i] = (hi - 2.0 * base + lo) / (eps * eps);
                    // Off-diagonal: four-point cross difference, symmetrized.
                    for j in (i + 1)..n {
                        let mut probe = |si: f64, sj: f64| {
                            pp[i] = p[i] + si * eps;
                            pp[j] = p[j] + sj * eps;
                            let v = value(&pp[..n], z, xp);
                            pp[i] = p[i];
                            pp[j] = p[j];
                            v
                        };
                        let m = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                            + probe(-1.0, -1.0))
                            / (4.0 * eps * eps);
                        out[i * n + j] = m;
                        out[j * n + i] = m;
                    }
                }
            })
        });

        let dpz = self.dpz.unwrap_or_else(|| {
            let value = value.clone();
            Arc::new(move |p: &[f64], z: f64, xp: &[f64], out: &mut [f64]| {
                let n = p.len();
                let eps = fd_step(FD_STEP_SECOND, p, z);
                let mut pp = [0.0; crate::field::MAX_DIM];
                pp[..n].copy_from_slice(p);
                for i in 0..n {
                    let mut probe = |si: f64, sz: f64| {
                        pp[i] = p[i] + si * eps;
                        let v = value(&pp[..n], z + sz * eps, xp);
                        pp[i] = p[i];
                        v
                    };
                    out[i] = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                        + probe(-1.0, -1.0))
                        / (4.0 * eps * eps);
                }
            })
        });

        let dzz = self.dzz.unwrap_or_else(|| {
            let value = value.clone();
            Arc::new(move |p: &[f64], z: f64, xp: &[f64]| {
                let eps = fd_step(FD_STEP_SECOND, p, z);
                (value(p, z + eps, xp) - 2.0 * value(p, z, xp) + value(p, z - eps, xp))
                    / (eps * eps)
            })
        });

        Integrand {
            n,
            name: self.name,
            value,
            dp,
            dz,
            dpp,
            dpz,
            dzz,
            smooth: self.smooth.unwrap_or_else(|| Arc::new(|_| true)),
            singular: self.singular,
        }
    }
}

fn fd_step(base: f64, p: &[f64], z: f64) -> f64 {
    let scale = p.iter().fold(z.abs().max(1.0), |m, v| m.max(v.abs()));
    base * scale
}

/// Matrix norm used when reducing the `p`-Hessian to a scalar weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixNorm {
    /// Largest absolute eigenvalue (closed form for symmetric `n <= 3`).
    Spectral,
    /// Square root of the sum of squared entries.
    Frobenius,
}

/// Norm of a row-major `n x n` matrix; symmetrized first, since every matrix
/// this crate produces is a Hessian up to finite-difference noise.
pub fn matrix_norm(m: &[f64], n: usize, norm: MatrixNorm) -> f64 {
    debug_assert!(m.len() >= n * n);
    let mut s = [0.0f64; 9];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (m[i * n + j] + m[j * n + i]);
        }
    }
    match norm {
        MatrixNorm::Frobenius => s[..n * n].iter().map(|v| v * v).sum::<f64>().sqrt(),
        MatrixNorm::Spectral => match n {
            1 => s[0].abs(),
            2 => {
                let half_tr = 0.5 * (s[0] + s[3]);
                let disc = (0.5 * (s[0] - s[3])).hypot(s[1]);
                (half_tr + disc).abs().max((half_tr - disc).abs())
            }
            3 => {
                let off = s[1] * s[1] + s[2] * s[2] + s[5] * s[5];
                if off == 0.0 {
                    return s[0].abs().max(s[4].abs()).max(s[8].abs());
                }
                // Trigonometric closed form for symmetric 3x3 eigenvalues.
                let q = (s[0] + s[4] + s[8]) / 3.0;
                let p2 = (s[0] - q).powi(2) + (s[4] - q).powi(2) + (s[8] - q).powi(2) + 2.0 * off;
                let p = (p2 / 6.0).sqrt();
                let b = [
                    (s[0] - q) / p,
                    s[1] / p,
                    s[2] / p,
                    s[3] / p,
                    (s[4] - q) / p,
                    s[5] / p,
                    s[6] / p,
                    s[7] / p,
                    (s[8] - q) / p,
                ];
                let det_b = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
                    + b[2] * (b[3] * b[7] - b[4] * b[6]);
                let r = (det_b / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let e1 = q + 2.0 * p * phi.cos();
                let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
                let e2 = 3.0 * q - e1 - e3;
                e1.abs().max(e2.abs()).max(e3.abs())
            }
            _ => unreachable!("dimension above 3"),
        },
    }
}

/// One probe point for the Hessian-comparability check: the Hessian at
/// `p + q` is compared against the Hessian at `p`, with `|q| <= |p_n| / 2`.
#[derive(Clone, Debug)]
pub struct H2Sample {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub z: f64,
    pub xp: Vec<f64>,
}

/// Outcome of [`check_h2`]: per-sample ratios and the worst offender.
#[derive(Clone, Debug)]
pub struct H2Report {
    pub worst_ratio: f64,
    pub worst_index: usize,
    pub ratios: Vec<f64>,
}

/// Measure `|F_pp(p + q)| / |F_pp(p)|` over the given samples and report the
/// worst ratio. This is an empirical comparability constant, not a proof:
/// the density satisfies the underlying hypothesis if the ratio stays
/// bounded over representative samples.
pub fn check_h2(f: &Integrand, samples: &[H2Sample], norm: MatrixNorm) -> Result<H2Report> {
    if samples.is_empty() {
        return Err(Error::InvalidSample("empty sample list".into()));
    }
    let n = f.dim();
    let mut ratios = Vec::with_capacity(samples.len());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut h = [0.0f64; 9];
    for (i, s) in samples.iter().enumerate() {
        if s.p.len() != n || s.q.len() != n {
            return Err(Error::InvalidSample(format!("sample {i}: dimension mismatch")));
        }
        let pn = s.p[n - 1].abs();
        let qn = dot(&s.q, &s.q).sqrt();
        if qn > 0.5 * pn * (1.0 + 1e-12) {
            return Err(Error::InvalidSample(format!(
                "sample {i}: |q| = {qn} exceeds |p_n| / 2 = {}",
                0.5 * pn
            )));
        }
        let shifted: Vec<f64> = s.p.iter().zip(&s.q).map(|(&a, &b)| a + b).collect();
        if !f.smooth_at(&s.p) || !f.smooth_at(&shifted) {
            return Err(Error::OutsideSmoothDomain(format!("sample {i}")));
        }
        f.hess_pp(&s.p, s.z, &s.xp, &mut h);
        let base = matrix_norm(&h, n, norm);
        if base == 0.0 {
            return Err(Error::InvalidSample(format!(
                "sample {i}: vanishing Hessian at the base point"
            )));
        }
        f.hess_pp(&shifted, s.z, &s.xp, &mut h);
        let ratio = matrix_norm(&h, n, norm) / base;
        if ratio > worst {
            worst = ratio;
            worst_index = i;
        }
        ratios.push(ratio);
    }
    Ok(H2Report { worst_ratio: worst, worst_index, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let d = Integrand::catalog("dirichlet", 2, &Params::new()).unwrap();
        assert_eq!(d.eval(&[1.0, 2.0], 0.3, &[]), 2.5);
        let w = Integrand::catalog("weighted_dirichlet", 1, &Params::new().set("s", 0.5)).unwrap();
        assert!((w.eval(&[1.0], 0.0, &[4.0]) - 2.0).abs() < 1e-14);
        assert!(w.is_singular());
        let a = Integrand::catalog("allen_cahn", 2, &Params::new()).unwrap();
        let mut h = [0.0; 9];
        a.hess_pp(&[0.3, -0.4], 0.2, &[], &mut h);
        assert_eq!(&h[..4], &[1.0, 0.0, 0.0, 1.0]);
        assert!((a.eval(&[0.0, 0.0], 0.0, &[]) - 0.25).abs() < 1e-15);
        let e1 = Integrand::catalog("oned_example", 1, &Params::new()).unwrap();
        assert_eq!(e1.eval(&[2.0], 3.0, &[]), 4.0 - 9.0);
        let e2 = Integrand::catalog("oned_example2", 1, &Params::new()).unwrap();
        assert_eq!(e2.eval(&[2.0], -3.0, &[]), 4.0);
        assert_eq!(e2.deriv_zz(&[0.0], -1.0, &[]), 0.0);
        assert_eq!(e2.deriv_zz(&[0.0], 1.0, &[]), -2.0);
    }

    #[test]
    fn catalog_rejects_bad_parameters() {
        assert!(matches!(
            Integrand::catalog("weighted_dirichlet", 2, &Params::new()),
            Err(Error::Param(_))
        ));
        assert!(Integrand::catalog("weighted_dirichlet", 2, &Params::new().set("s", 1.5)).is_err());
        assert!(Integrand::catalog("two_phase_smoothed", 2, &Params::new().set("width", 0.0))
            .is_err());
        assert!(matches!(
            Integrand::catalog("nonsense", 2, &Params::new()),
            Err(Error::UnknownIntegrand(_))
        ));
        assert!(Integrand::catalog("oned_example", 2, &Params::new()).is_err());
    }

    #[test]
    fn finite_differences_match_analytic_derivatives() {
        let exact = Integrand::catalog("allen_cahn", 2, &Params::new()).unwrap();
        let fd = Integrand::builder(2, "allen_cahn_fd", |p, z, _| {
            let w = 1.0 - z * z;
            0.5 * (p[0] * p[0] + p[1] * p[1]) + w * w / 4.0
        })
        .build();
        let p = [0.3, -0.2];
        let z = 0.5;
        let mut ga = [0.0; 3];
        let mut gb = [0.0; 3];
        exact.grad_p(&p, z, &[], &mut ga);
        fd.grad_p(&p, z, &[], &mut gb);
        for i in 0..2 {
            assert!((ga[i] - gb[i]).abs() < 1e-6, "grad_p[{i}]");
        }
        assert!((exact.deriv_z(&p, z, &[]) - fd.deriv_z(&p, z, &[])).abs() < 1e-6);
        let mut ha = [0.0; 9];
        let mut hb = [0.0; 9];
        exact.hess_pp(&p, z, &[], &mut ha);
        fd.hess_pp(&p, z, &[], &mut hb);
        for i in 0..4 {
            assert!((ha[i] - hb[i]).abs() < 1e-6, "hess_pp[{i}]: {} vs {}", ha[i], hb[i]);
        }
        exact.grad_pz(&p, z, &[], &mut ga);
        fd.grad_pz(&p, z, &[], &mut gb);
        for i in 0..2 {
            assert!((ga[i] - gb[i]).abs() < 1e-6, "grad_pz[{i}]");
        }
        assert!((exact.deriv_zz(&p, z, &[]) - fd.deriv_zz(&p, z, &[])).abs() < 1e-6);
    }

    #[test]
    fn matrix_norms() {
        assert_eq!(matrix_norm(&[2.0, 1.0, 1.0, 2.0], 2, MatrixNorm::Spectral), 3.0);
        assert!(
            (matrix_norm(&[2.0, 1.0, 1.0, 2.0], 2, MatrixNorm::Frobenius) - 10f64.sqrt()).abs()
                < 1e-14
        );
        let d3 = [1.0, 0.0, 0.0, 0.0, -4.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(matrix_norm(&d3, 3, MatrixNorm::Spectral), 4.0);
        // Full symmetric 3x3 with characteristic polynomial
        // (x - 2)(x - 4)(x - 7), so the spectral norm is exactly 7.
        let m = [5.0, 1.0, 1.0, 1.0, 4.0, 2.0, 1.0, 2.0, 4.0];
        let spec = matrix_norm(&m, 3, MatrixNorm::Spectral);
        assert!((spec - 7.0).abs() < 1e-12, "spec {spec}");
    }

    #[test]
    fn hessian_ratio_check() {
        // Pure gradient quadratic: the Hessian is constant, so the ratio is 1.
        let d = Integrand::catalog("dirichlet", 2, &Params::new()).unwrap();
        let samples = vec![H2Sample {
            p: vec![0.0, 1.0],
            q: vec![0.0, 0.5],
            z: 0.0,
            xp: vec![],
        }];
        let rep = check_h2(&d, &samples, MatrixNorm::Spectral).unwrap();
        assert!((rep.worst_ratio - 1.0).abs() < 1e-14);

        // |p|^4: Hessian 4|p|^2 I + 8 p (x) p; spectral norms 12 at e_n and
        // 27 at 1.5 e_n, hence ratio 27 / 12 = 2.25.
        let quartic = Integrand::builder(2, "quartic", |p, _, _| {
            let s = p[0] * p[0] + p[1] * p[1];
            s * s
        })
        .hess_pp(|p, _, _, out| {
            let n = p.len();
            let s = p.iter().map(|v| v * v).sum::<f64>();
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = 8.0 * p[i] * p[j] + if i == j { 4.0 * s } else { 0.0 };
                }
            }
        })
        .build();
        let samples = vec![H2Sample {
            p: vec![0.0, 1.0],
            q: vec![0.0, 0.5],
            z: 0.0,
            xp: vec![],
        }];
        let rep = check_h2(&quartic, &samples, MatrixNorm::Spectral).unwrap();
        assert!((rep.worst_ratio - 2.25).abs() < 1e-12, "ratio {}", rep.worst_ratio);
        assert_eq!(rep.worst_index, 0);
    }

    #[test]
    fn hessian_check_rejects_bad_samples() {
        let d = Integrand::catalog("dirichlet", 2, &Params::new()).unwrap();
        let too_big = vec![H2Sample {
            p: vec![0.0, 1.0],
            q: vec![0.0, 0.75],
            z: 0.0,
            xp: vec![],
        }];
        assert!(matches!(
            check_h2(&d, &too_big, MatrixNorm::Spectral),
            Err(Error::InvalidSample(_))
        ));

        let guarded = Integrand::builder(1, "guarded", |p, _, _| p[0].abs().powi(3))
            .smooth(|p| p[p.len() - 1] != 0.0)
            .build();
        let at_zero = vec![H2Sample { p: vec![0.0], q: vec![0.0], z: 0.0, xp: vec![] }];
        assert!(matches!(
            check_h2(&guarded, &at_zero, MatrixNorm::Spectral),
            Err(Error::OutsideSmoothDomain(_))
        ));
    }
}
