//! Sliding deformations and the logarithmic cutoff scale.
//!
//! The sliding construction translates a field along the last axis by a
//! radially modulated amount `t * psi_R(|x|)`. The modulation profile is 1 on
//! an inner ball, decays like an iterated-logarithm ramp, and vanishes
//! outside the ball of radius `R`; its slope is what makes second energy
//! differences small compared to `t^2`.
//!
//! Iterated-logarithm helpers: `ell(k, r)` is the k-fold logarithm,
//! `exp_iter` its inverse, `pi(k, r) = r * ell_1(r) * ... * ell_k(r)` the
//! product weight, and `theta(k, r) = exp_iter(k, sqrt(ell(k, r)))` the inner
//! plateau radius. The half-way identity
//! `ell(k+1, theta(k, r)) = ell(k+1, r) / 2` pins the ramp's midpoint.

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, MAX_DIM};
use std::fmt::Write as _;

/// Slack accepted on the strict slope inequality: grid estimates of the
/// Lipschitz seminorm converge from below, and the canonical piecewise
/// examples sit exactly on the threshold.
const SLOPE_SLACK: f64 = 1e-9;

/// Jump tolerance factor for piecewise assembly, in units of `h * scale`.
const CONTINUITY_FACTOR: f64 = 10.0;

/// k-fold logarithm `ell_k(r)`; `ell_0` is the identity.
pub fn ell(k: u32, r: f64) -> Result<f64> {
    let mut x = r;
    for level in 0..k {
        if !(x > 0.0) {
            return Err(Error::DomainViolation(format!(
                "iterated log level {}: argument {x} not positive (r = {r})",
                level + 1
            )));
        }
        x = x.ln();
    }
    Ok(x)
}

/// k-fold exponential, the inverse of [`ell`]. Overflows to infinity.
pub fn exp_iter(k: u32, s: f64) -> f64 {
    let mut x = s;
    for _ in 0..k {
        x = x.exp();
    }
    x
}

/// Product weight `pi_k(r) = prod_(j=0..k) ell_j(r)`, with `pi_(-1) = 1`.
/// Defined where every factor is positive.
pub fn pi(k: i32, r: f64) -> Result<f64> {
    if k < -1 {
        return Err(Error::DomainViolation(format!("pi level {k} below -1")));
    }
    let mut prod = 1.0;
    let mut x = r;
    for level in 0..=k {
        if level > 0 {
            x = x.ln();
        }
        if !(x > 0.0) {
            return Err(Error::DomainViolation(format!(
                "pi factor ell_{level}({r}) = {x} not positive"
            )));
        }
        prod *= x;
    }
    Ok(prod)
}

/// Inner plateau radius `theta_k(r) = exp_iter(k, sqrt(ell_k(r)))`.
pub fn theta(k: u32, r: f64) -> Result<f64> {
    let l = ell(k, r)?;
    if !(l > 0.0) {
        return Err(Error::DomainViolation(format!("theta needs ell_{k}({r}) > 0, got {l}")));
    }
    Ok(exp_iter(k, l.sqrt()))
}

/// Dyadic summation weight `sigma(r) = pi_k(r)^(-2)`.
pub fn sigma(k: u32, r: f64) -> Result<f64> {
    let p = pi(k as i32, r)?;
    Ok(1.0 / (p * p))
}

/// Radial sliding profile: 1 on `[0, theta_k(R)]`, the iterated-log ramp
/// `2 - 2 ell_(k+1)(s) / ell_(k+1)(R)` on `(theta_k(R), R]`, 0 beyond.
/// Carries the slide amplitude `t` with the bound `|t| <= theta_k(R) / 4`.
#[derive(Clone, Debug)]
pub struct CutoffProfile {
    radius: f64,
    level: u32,
    shift: f64,
    theta: f64,
    ell_top: f64,
}

impl CutoffProfile {
    pub fn new(radius: f64, level: u32, shift: f64) -> Result<CutoffProfile> {
        let ell_top = ell(level + 1, radius)?;
        if !(ell_top > 0.0) {
            return Err(Error::DomainViolation(format!(
                "cutoff needs ell_{}({radius}) > 0, got {ell_top}",
                level + 1
            )));
        }
        let theta = theta(level, radius)?;
        if !shift.is_finite() {
            return Err(Error::InvalidDeformation(format!("shift {shift} not finite")));
        }
        if shift.abs() > theta / 4.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidDeformation(format!(
                "shift {shift} exceeds theta_{level}({radius}) / 4 = {}",
                theta / 4.0
            )));
        }
        Ok(CutoffProfile { radius, level, shift, theta, ell_top })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Plateau radius `theta_k(R)`.
    pub fn plateau(&self) -> f64 {
        self.theta
    }

    /// Profile value at radial coordinate `s >= 0`.
    pub fn value(&self, s: f64) -> f64 {
        let s = s.abs();
        if s <= self.theta {
            1.0
        } else if s <= self.radius {
            // Intermediate logs are safe: s > theta implies
            // ell_(k+1)(s) > ell_top / 2 > 0.
            let mut x = s;
            for _ in 0..=self.level {
                x = x.ln();
            }
            2.0 - 2.0 * x / self.ell_top
        } else {
            0.0
        }
    }

    /// Radial derivative `-2 / (ell_(k+1)(R) * pi_k(s))` on the ramp,
    /// 0 on the plateau and outside the support.
    pub fn derivative(&self, s: f64) -> f64 {
        let s = s.abs();
        if s <= self.theta || s >= self.radius {
            return 0.0;
        }
        let mut prod = 1.0;
        let mut x = s;
        for level in 0..=self.level {
            if level > 0 {
                x = x.ln();
            }
            prod *= x;
        }
        -2.0 / (self.ell_top * prod)
    }

    /// Largest slope magnitude, attained just past the plateau.
    pub fn max_slope(&self) -> f64 {
        // pi_k is increasing on the ramp, so the supremum is at s = theta.
        let p = pi(self.level as i32, self.theta).expect("plateau inside pi domain");
        2.0 / (self.ell_top * p)
    }
}

/// Lipschitz norm estimate of a displacement field: the larger of the sup
/// norm and the largest grid difference quotient over all axes.
pub fn c01_norm(f: &ScalarField) -> f64 {
    let mut norm = f.linf_norm();
    for axis in 0..f.grid().dim() {
        norm = norm.max(f.slope_sup(axis));
    }
    norm
}

/// Displacement of a field along one or more translation-invariant axes:
/// `v(x) = u(x + sum_j psi_j(x) e_j)`, with all `psi_j` supported in the
/// ball of radius `radius`.
#[derive(Clone, Debug)]
pub struct Deformation {
    directions: Vec<usize>,
    fields: Vec<ScalarField>,
    radius: f64,
    delta: Option<f64>,
}

impl Deformation {
    /// Validates the structural invariants:
    /// directions are distinct translation-invariant axes; all displacement
    /// fields share one grid and vanish outside the support ball; the summed
    /// squared slopes over invariant axes stay within the unit bound; and
    /// each field obeys a claimed Lipschitz bound `delta` when one is given.
    pub fn new(
        directions: Vec<usize>,
        fields: Vec<ScalarField>,
        radius: f64,
        delta: Option<f64>,
    ) -> Result<Deformation> {
        if directions.is_empty() || directions.len() != fields.len() {
            return Err(Error::InvalidDeformation(format!(
                "{} directions vs {} fields",
                directions.len(),
                fields.len()
            )));
        }
        let grid = fields[0].grid().clone();
        let n = grid.dim();
        for (idx, &j) in directions.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidDeformation(format!("direction {j} outside 0..{n}")));
            }
            if !grid.is_invariant(j) {
                return Err(Error::InvalidDeformation(format!(
                    "direction {j} is not translation-invariant (split {})",
                    grid.split()
                )));
            }
            if directions[..idx].contains(&j) {
                return Err(Error::InvalidDeformation(format!("direction {j} repeated")));
            }
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidDeformation(format!("support radius {radius} not positive")));
        }
        let mut slope_sum = 0.0;
        for (fi, f) in fields.iter().enumerate() {
            if f.grid() != &grid {
                return Err(Error::GridMismatch(format!("displacement field {fi}")));
            }
            let support_tol = 1e-12 * f.linf_norm().max(1.0);
            let mut x = [0.0; MAX_DIM];
            for flat in 0..grid.node_count() {
                grid.node_pos(flat, &mut x);
                let r2: f64 = x[..n].iter().map(|v| v * v).sum();
                if r2 > radius * radius && f.values()[flat].abs() > support_tol {
                    return Err(Error::InvalidDeformation(format!(
                        "field {fi} is {} at |x| = {} > support radius {radius}",
                        f.values()[flat],
                        r2.sqrt()
                    )));
                }
            }
            for axis in 0..n {
                if grid.is_invariant(axis) {
                    let s = f.slope_sup(axis);
                    slope_sum += s * s;
                }
            }
            if let Some(d) = delta {
                let c = c01_norm(f);
                if c > d + SLOPE_SLACK * d.max(1.0) {
                    return Err(Error::InvalidDeformation(format!(
                        "field {fi} has C^0,1 norm {c} above the claimed bound {d}"
                    )));
                }
            }
        }
        if slope_sum > 1.0 + SLOPE_SLACK {
            return Err(Error::InvalidDeformation(format!(
                "summed squared slopes {slope_sum} reach the unit bound"
            )));
        }
        Ok(Deformation { directions, fields, radius, delta })
    }

    pub fn directions(&self) -> &[usize] {
        &self.directions
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    /// Largest Lipschitz norm over the displacement fields.
    pub fn lipschitz_norm(&self) -> f64 {
        self.fields.iter().map(c01_norm).fold(0.0, f64::max)
    }

    /// Displaced value of `u` at one node.
    fn displaced_value(&self, u: &ScalarField, flat: usize) -> Result<f64> {
        let grid = u.grid();
        let n = grid.dim();
        let mut x = [0.0; MAX_DIM];
        grid.node_pos(flat, &mut x);
        let mut moved = false;
        for (&j, f) in self.directions.iter().zip(&self.fields) {
            let d = f.values()[flat];
            if d != 0.0 {
                x[j] += d;
                moved = true;
            }
        }
        if moved {
            u.sample(&x[..n])
        } else {
            Ok(u.values()[flat])
        }
    }

    /// Deform `u`: sample it at the displaced nodes. Nodes that are not
    /// displaced copy their value bit-for-bit.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.grid() != self.grid() {
            return Err(Error::GridMismatch("deformation vs field".into()));
        }
        let values = crate::reduce::map_indices(u.grid().node_count(), |flat| {
            self.displaced_value(u, flat)
        });
        collect_nodes(u.grid().clone(), values)
    }

    /// Serialize: manifest line `directions=.. delta=.. R=..` (directions
    /// 1-based), followed by one field block per direction.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dirs: Vec<String> = self.directions.iter().map(|j| (j + 1).to_string()).collect();
        let delta = match self.delta {
            Some(d) => format!("{d:.17e}"),
            None => "none".to_string(),
        };
        let _ = writeln!(
            out,
            "directions={} delta={} R={:.17e}",
            dirs.join(","),
            delta,
            self.radius
        );
        for f in &self.fields {
            out.push_str(&f.to_text());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Deformation> {
        let mut lines = text.lines();
        let manifest = lines.next().ok_or_else(|| Error::Parse("empty deformation".into()))?;
        let mut directions = Vec::new();
        let mut delta = None;
        let mut radius = None;
        for token in manifest.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("manifest token `{token}`")))?;
            match key {
                "directions" => {
                    for d in value.split(',') {
                        let j: usize = d
                            .parse()
                            .map_err(|_| Error::Parse(format!("direction `{d}`")))?;
                        if j == 0 {
                            return Err(Error::Parse("directions are 1-based".into()));
                        }
                        directions.push(j - 1);
                    }
                }
                "delta" => {
                    if value != "none" {
                        delta = Some(
                            value.parse().map_err(|_| Error::Parse(format!("delta `{value}`")))?,
                        );
                    }
                }
                "R" => {
                    radius =
                        Some(value.parse().map_err(|_| Error::Parse(format!("R `{value}`")))?);
                }
                other => return Err(Error::Parse(format!("manifest key `{other}`"))),
            }
        }
        let radius = radius.ok_or_else(|| Error::Parse("manifest missing R".into()))?;
        let rest: Vec<&str> = lines.collect();
        let mut fields = Vec::new();
        let mut at = 0;
        for _ in 0..directions.len() {
            if at >= rest.len() {
                return Err(Error::Parse("missing displacement block".into()));
            }
            let header: Vec<&str> = rest[at].split_whitespace().collect();
            let n: usize = header
                .first()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse("bad block header".into()))?;
            let extents: std::result::Result<Vec<usize>, _> =
                (0..n).map(|a| header[1 + 2 * n + a].parse::<usize>()).collect();
            let count: usize = extents
                .map_err(|_| Error::Parse("bad block extent".into()))?
                .iter()
                .product();
            let end = at + 1 + count;
            if end > rest.len() {
                return Err(Error::Parse("truncated displacement block".into()));
            }
            fields.push(ScalarField::from_text(&rest[at..end].join("\n"))?);
            at = end;
        }
        Deformation::new(directions, fields, radius, delta)
    }
}

fn collect_nodes(grid: Grid, values: Vec<Result<f64>>) -> Result<ScalarField> {
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        out.push(v?);
    }
    ScalarField::from_values(grid, out)
}

/// Piecewise deformation: a node-indexed selector chooses which member
/// deformation acts where. The assembled field must be continuous across
/// selector interfaces.
#[derive(Clone, Debug)]
pub struct PiecewiseDeformation {
    pieces: Vec<Deformation>,
    selector: Vec<u32>,
}

impl PiecewiseDeformation {
    pub fn new(pieces: Vec<Deformation>, selector: Vec<u32>) -> Result<PiecewiseDeformation> {
        if pieces.is_empty() {
            return Err(Error::InvalidDeformation("no pieces".into()));
        }
        let grid = pieces[0].grid().clone();
        for (i, p) in pieces.iter().enumerate() {
            if p.grid() != &grid {
                return Err(Error::GridMismatch(format!("piece {i}")));
            }
        }
        if selector.len() != grid.node_count() {
            return Err(Error::InvalidDeformation(format!(
                "selector length {} vs node count {}",
                selector.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = selector.iter().find(|&&s| s as usize >= pieces.len()) {
            return Err(Error::InvalidDeformation(format!(
                "selector value {bad} with only {} pieces",
                pieces.len()
            )));
        }
        Ok(PiecewiseDeformation { pieces, selector })
    }

    pub fn pieces(&self) -> &[Deformation] {
        &self.pieces
    }

    pub fn selector(&self) -> &[u32] {
        &self.selector
    }

    /// Apply the selected piece at every node, then verify that adjacent
    /// nodes assigned to different pieces agree to within a jump tolerance
    /// proportional to the spacing (continuity of the assembly).
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        let grid = u.grid();
        if grid != self.pieces[0].grid() {
            return Err(Error::GridMismatch("piecewise deformation vs field".into()));
        }
        let n = grid.dim();
        let values = crate::reduce::map_indices(grid.node_count(), |flat| {
            self.pieces[self.selector[flat] as usize].displaced_value(u, flat)
        });
        let v = collect_nodes(grid.clone(), values)?;

        // Continuity across interfaces: where the selector switches between
        // adjacent nodes, evaluating either piece at the same node must give
        // nearly the same value.
        let mut lip_u = 0.0f64;
        for axis in 0..n {
            lip_u = lip_u.max(u.slope_sup(axis));
        }
        let max_slope = self
            .pieces
            .iter()
            .map(Deformation::lipschitz_norm)
            .fold(0.0, f64::max);
        let scale = (lip_u * (1.0 + max_slope)).max(1.0);
        for axis in 0..n {
            let stride: usize = (axis + 1..n).map(|a| grid.extent_of(a)).product();
            let tol = CONTINUITY_FACTOR * grid.spacing_of(axis) * scale;
            for flat in 0..grid.node_count() {
                let idx = grid.node_coords(flat);
                if idx[axis] + 1 >= grid.extent_of(axis) {
                    continue;
                }
                let next = flat + stride;
                let (a, b) = (self.selector[flat], self.selector[next]);
                if a == b {
                    continue;
                }
                for &node in &[flat, next] {
                    let va = self.pieces[a as usize].displaced_value(u, node)?;
                    let vb = self.pieces[b as usize].displaced_value(u, node)?;
                    if (va - vb).abs() > tol {
                        return Err(Error::DiscontinuousAssembly(format!(
                            "pieces {a} and {b} differ by {} at node {node} (tolerance {tol})",
                            (va - vb).abs()
                        )));
                    }
                }
            }
        }
        Ok(v)
    }
}

/// Which side of the slide: `Plus` realizes the graph shifted by `+t`
/// (agrees with `u(x - t e_n)` on the plateau), `Minus` the opposite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Slid field: solve `x_n + t psi_R(|x|) = y_n` for each node `y` and set
/// `v(y) = u(x)`. Outside the support ball the map is the identity and the
/// values are copied bit-for-bit; on the plateau it is the exact translation
/// by `t e_n`.
pub fn slide_field(u: &ScalarField, cutoff: &CutoffProfile, sign: Sign) -> Result<ScalarField> {
    let grid = u.grid();
    let n = grid.dim();
    let t = sign.factor() * cutoff.shift();
    if !grid.is_invariant(n - 1) {
        return Err(Error::InvalidDeformation(
            "slide axis (the last axis) must be translation-invariant".into(),
        ));
    }
    grid.covers_ball(cutoff.radius() + t.abs())?;
    let contraction = t.abs() * cutoff.max_slope();
    if contraction >= 0.25 {
        return Err(Error::InvalidDeformation(format!(
            "inversion contraction factor {contraction} reaches 1/4; \
             reduce the shift or enlarge the radius"
        )));
    }
    let reach = cutoff.radius() + t.abs();
    let tol = 1e-12 * t.abs().max(1.0);
    let values = crate::reduce::map_indices(grid.node_count(), |flat| -> Result<f64> {
        let mut y = [0.0; MAX_DIM];
        grid.node_pos(flat, &mut y);
        let rho2: f64 = y[..n - 1].iter().map(|v| v * v).sum();
        let yn = y[n - 1];
        if rho2 + yn * yn >= reach * reach {
            return Ok(u.values()[flat]);
        }
        let mut xn = yn;
        let mut converged = false;
        for _ in 0..50 {
            let r = (rho2 + xn * xn).sqrt();
            let next = yn - t * cutoff.value(r);
            if (next - xn).abs() <= tol {
                xn = next;
                converged = true;
                break;
            }
            xn = next;
        }
        if !converged {
            return Err(Error::NonConvergentInversion(format!(
                "node at |y'| = {}, y_n = {yn}",
                rho2.sqrt()
            )));
        }
        if xn == yn {
            return Ok(u.values()[flat]);
        }
        y[n - 1] = xn;
        u.sample(&y[..n])
    });
    collect_nodes(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn iterated_log_basics() {
        assert_eq!(ell(0, 7.5).unwrap(), 7.5);
        assert!((ell(1, E).unwrap() - 1.0).abs() < 1e-15);
        assert!((ell(2, E.exp()).unwrap() - 1.0).abs() < 1e-14);
        assert!(ell(1, 0.0).is_err());
        assert!(ell(2, 1.0).is_err(), "log log 1 hits log 0");
        for k in 0..=3u32 {
            let s = 1.3;
            assert!((ell(k, exp_iter(k, s)).unwrap() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_and_sigma() {
        assert_eq!(pi(-1, 0.5).unwrap(), 1.0);
        assert_eq!(pi(0, 3.0).unwrap(), 3.0);
        let r = 100.0;
        assert!((pi(1, r).unwrap() - r * r.ln()).abs() < 1e-12);
        assert!((pi(2, r).unwrap() - r * r.ln() * r.ln().ln()).abs() < 1e-12);
        assert!(pi(1, 1.0).is_err(), "ell_1(1) = 0 factor");
        let s = sigma(1, r).unwrap();
        assert!((s - 1.0 / (r * r.ln()).powi(2)).abs() < 1e-18);
    }

    #[test]
    fn pi_is_the_reciprocal_derivative_of_ell() {
        // d/dr ell_k(r) = 1 / pi_(k-1)(r), checked by central differences.
        let r = 50.0;
        for k in 1..=3u32 {
            let d = 1e-4;
            let fd = (ell(k, r + d).unwrap() - ell(k, r - d).unwrap()) / (2.0 * d);
            let exact = 1.0 / pi(k as i32 - 1, r).unwrap();
            assert!((fd - exact).abs() < 1e-9, "k = {k}: {fd} vs {exact}");
        }
    }

    #[test]
    fn theta_values_and_halfway_identity() {
        assert!((theta(0, 16.0).unwrap() - 4.0).abs() < 1e-12);
        let r = 1e6;
        assert!((theta(1, r).unwrap() - r.ln().sqrt().exp()).abs() < 1e-9);
        for k in 0..=2u32 {
            let lhs = ell(k + 1, theta(k, r).unwrap()).unwrap();
            let rhs = ell(k + 1, r).unwrap() / 2.0;
            assert!((lhs - rhs).abs() < 1e-12, "k = {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn cutoff_profile_shape() {
        let c = CutoffProfile::new(E * E, 0, 0.0).unwrap();
        assert_eq!(c.value(0.5), 1.0);
        assert!((c.plateau() - E).abs() < 1e-12);
        assert!((c.value(E.powf(1.5)) - 0.5).abs() < 1e-12);
        assert_eq!(c.value(E * E + 0.1), 0.0);
        // Continuity at the plateau edge and the support edge.
        for (s, expect) in [(c.plateau(), 1.0), (c.radius(), 0.0)] {
            let lo = c.value(s * (1.0 - 1e-11));
            let hi = c.value(s * (1.0 + 1e-11));
            assert!((lo - expect).abs() < 1e-9 && (hi - expect).abs() < 1e-9);
        }
        // Level-1 profile at the plateau edge: ramp value 1 by the halfway
        // identity.
        let r = (E * E).exp(); // ell_2(r) = 2
        let c1 = CutoffProfile::new(r, 1, 0.0).unwrap();
        let edge = c1.plateau();
        assert!((c1.value(edge * (1.0 + 1e-9)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cutoff_derivative_matches_finite_differences() {
        for (level, radius) in [(0u32, 1e4f64), (1, 1e6)] {
            let c = CutoffProfile::new(radius, level, 0.0).unwrap();
            for frac in [0.3, 0.5, 0.8] {
                let s = c.plateau() * (1.0 - frac) + radius * frac;
                let d = 1e-4 * s;
                let fd = (c.value(s + d) - c.value(s - d)) / (2.0 * d);
                assert!(
                    (fd - c.derivative(s)).abs() < 1e-8,
                    "level {level}, s = {s}: {fd} vs {}",
                    c.derivative(s)
                );
            }
            assert_eq!(c.derivative(c.plateau() * 0.5), 0.0);
            assert_eq!(c.derivative(radius * 1.1), 0.0);
        }
    }

    #[test]
    fn cutoff_rejects_out_of_domain_input() {
        assert!(CutoffProfile::new(0.9, 0, 0.0).is_err(), "log R < 0");
        assert!(CutoffProfile::new(2.0, 1, 0.0).is_err(), "log log 2 < 0");
        // Shift above theta / 4.
        assert!(CutoffProfile::new(100.0, 0, 2.6).is_err());
        assert!(CutoffProfile::new(100.0, 0, 2.4).is_ok());
    }

    fn plateau_bump(grid: &Grid, amplitude: f64, half: f64) -> ScalarField {
        // C^1 radial bump: amplitude * cos(pi r / (2 half))^2 inside r < half.
        ScalarField::from_fn(grid.clone(), move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < half {
                let c = (std::f64::consts::FRAC_PI_2 * r / half).cos();
                amplitude * c * c
            } else {
                0.0
            }
        })
    }

    #[test]
    fn deformation_validation() {
        let grid = Grid::symmetric(&[2.0, 2.0], 0.1, 2).unwrap();
        let psi = plateau_bump(&grid, 0.2, 1.5);
        // Axis 0 is bounded under split 2: not a legal direction.
        assert!(Deformation::new(vec![0], vec![psi.clone()], 2.0, None).is_err());
        assert!(Deformation::new(vec![1], vec![psi.clone()], 2.0, None).is_ok());
        // Support violation: bump wider than the claimed ball.
        assert!(Deformation::new(vec![1], vec![psi.clone()], 1.0, None).is_err());
        // Claimed delta below the actual norm.
        assert!(Deformation::new(vec![1], vec![psi.clone()], 2.0, Some(0.1)).is_err());
        assert!(Deformation::new(vec![1], vec![psi], 2.0, Some(0.25)).is_ok());
        // Steep displacement: slope 1.2 breaks the unit slope bound.
        let steep = ScalarField::from_fn(grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            1.2 * (1.0 - r).max(0.0)
        });
        assert!(Deformation::new(vec![1], vec![steep], 2.0, None).is_err());
    }

    #[test]
    fn apply_translates_affine_fields_exactly() {
        let grid = Grid::symmetric(&[3.0, 3.0], 0.05, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| 0.5 * x[0] + 2.0 * x[1] - 1.0);
        let psi = plateau_bump(&grid, 0.3, 2.0);
        let d = Deformation::new(vec![1], vec![psi.clone()], 2.5, None).unwrap();
        let v = d.apply(&u).unwrap();
        let mut x = [0.0; MAX_DIM];
        for flat in 0..grid.node_count() {
            grid.node_pos(flat, &mut x);
            let expected = 0.5 * x[0] + 2.0 * (x[1] + psi.values()[flat]) - 1.0;
            assert!((v.values()[flat] - expected).abs() < 1e-10);
        }
        // Outside the support: bitwise copies.
        for flat in 0..grid.node_count() {
            grid.node_pos(flat, &mut x);
            if x[0] * x[0] + x[1] * x[1] > 2.5 * 2.5 {
                assert_eq!(v.values()[flat].to_bits(), u.values()[flat].to_bits());
            }
        }
    }

    #[test]
    fn apply_then_inverse_displacement_recovers_the_field() {
        let grid = Grid::symmetric(&[3.0], 0.01, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (0.9 * x[0]).tanh());
        let psi = plateau_bump(&grid, 0.2, 1.5);
        let d = Deformation::new(vec![0], vec![psi.clone()], 2.0, None).unwrap();
        let v = d.apply(&u).unwrap();
        // Exact inverse displacement: solve s + psi(s) = y per node, then
        // psi_inv(y) = -(y - s) = s - y.
        let inv = ScalarField::from_fn(grid.clone(), |x| {
            let y = x[0];
            let mut s = y;
            for _ in 0..60 {
                s = y - psi.sample(&[s]).unwrap_or(0.0);
            }
            s - y
        });
        let d_inv = Deformation::new(vec![0], vec![inv], 2.5, None).unwrap();
        let w = d_inv.apply(&v).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in w.values().iter().zip(u.values()) {
            worst = worst.max((a - b).abs());
        }
        // Twice the interpolation tolerance of the sampled composition.
        let h = grid.spacing_of(0);
        assert!(worst < 2.0 * h * h * 2.0, "round trip error {worst}");
    }

    #[test]
    fn composition_stays_within_tripled_bound() {
        let delta = 0.2;
        let grid = Grid::symmetric(&[3.0, 3.0], 0.05, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| (x[1] + 0.3 * x[0]).tanh());
        let psi1 = plateau_bump(&grid, delta, 1.8);
        let psi2 = ScalarField::from_fn(grid.clone(), |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 1.8 {
                let c = (std::f64::consts::FRAC_PI_2 * r / 1.8).cos();
                -delta * c * c * (0.7 + 0.3 * (x[0]).cos())
            } else {
                0.0
            }
        });
        let d1 = Deformation::new(vec![1], vec![psi1.clone()], 2.5, Some(delta)).unwrap();
        let d2 = Deformation::new(vec![1], vec![psi2.clone()], 2.5, Some(delta)).unwrap();
        let w = d2.apply(&d1.apply(&u).unwrap()).unwrap();
        // Composite displacement psi2(x) + psi1(x + psi2(x) e_n).
        let combined = ScalarField::from_fn(grid.clone(), |x| {
            let p2 = psi2.sample(x).unwrap();
            let shifted = [x[0], x[1] + p2];
            p2 + psi1.sample(&shifted).unwrap_or(0.0)
        });
        assert!(
            c01_norm(&combined) <= 3.0 * delta + 0.02,
            "composite norm {}",
            c01_norm(&combined)
        );
        let d3 = Deformation::new(vec![1], vec![combined], 2.5, Some(3.0 * delta)).unwrap();
        let w2 = d3.apply(&u).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in w.values().iter().zip(w2.values()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-3, "composition mismatch {worst}");
    }

    #[test]
    fn piecewise_assembly_checks_continuity() {
        let grid = Grid::symmetric(&[2.0], 1e-3, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0].abs());
        // The canonical continuous pair: both pieces send 0 to the same
        // displaced point |0 - 2/3|.
        let psi1 = ScalarField::from_fn(grid.clone(), |x| {
            let t = x[0];
            if t <= 1.0 {
                -(2.0 + t) / 3.0
            } else {
                t - 2.0
            }
        });
        let psi2 = ScalarField::from_fn(grid.clone(), |x| {
            let t = x[0];
            if t <= -1.0 {
                t + 2.0
            } else {
                (2.0 - t) / 3.0
            }
        });
        let d1 = Deformation::new(vec![0], vec![psi1], 2.0, None).unwrap();
        let d2 = Deformation::new(vec![0], vec![psi2.clone()], 2.0, None).unwrap();
        let selector: Vec<u32> = (0..grid.node_count())
            .map(|flat| if grid.pos(0, flat) <= 0.0 { 0 } else { 1 })
            .collect();
        let pd = PiecewiseDeformation::new(vec![d1.clone(), d2], selector.clone()).unwrap();
        let v = pd.apply(&u).unwrap();
        // v(t) = 2 (|t| + 1) / 3 away from rounding.
        for flat in (0..grid.node_count()).step_by(97) {
            let t = grid.pos(0, flat);
            assert!((v.values()[flat] - 2.0 * (t.abs() + 1.0) / 3.0).abs() < 1e-9);
        }
        // A genuinely discontinuous pairing must be rejected.
        let jump = ScalarField::constant(grid.clone(), 0.0);
        let d_zero = Deformation::new(vec![0], vec![jump], 2.0, None).unwrap();
        let pd_bad = PiecewiseDeformation::new(vec![d1, d_zero], selector).unwrap();
        assert!(matches!(pd_bad.apply(&u), Err(Error::DiscontinuousAssembly(_))));
    }

    #[test]
    fn slide_matches_translation_on_the_plateau() {
        let grid = Grid::symmetric(&[8.0], 0.01, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0].tanh());
        let c = CutoffProfile::new(4.0, 0, 0.3).unwrap();
        let plus = slide_field(&u, &c, Sign::Plus).unwrap();
        let minus = slide_field(&u, &c, Sign::Minus).unwrap();
        for flat in 0..grid.node_count() {
            let y = grid.pos(0, flat);
            if y.abs() < c.plateau() / 2.0 {
                assert!((plus.values()[flat] - (y - 0.3).tanh()).abs() < 1e-4);
                assert!((minus.values()[flat] - (y + 0.3).tanh()).abs() < 1e-4);
            }
            if y.abs() > c.radius() + c.shift() {
                assert_eq!(plus.values()[flat].to_bits(), u.values()[flat].to_bits());
            }
        }
    }

    #[test]
    fn slide_inversion_error_is_quadratic_in_the_shift() {
        let grid = Grid::symmetric(&[8.0], 0.005, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0].tanh());
        let round_trip_err = |t: f64| -> f64 {
            let c = CutoffProfile::new(6.0, 0, t).unwrap();
            let fwd = slide_field(&u, &c, Sign::Plus).unwrap();
            let back = slide_field(&fwd, &c, Sign::Minus).unwrap();
            back.values()
                .iter()
                .zip(u.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e2 = round_trip_err(0.2);
        let e1 = round_trip_err(0.1);
        assert!(e2 < 0.05, "round trip error {e2}");
        assert!(e1 / e2 < 0.4, "expected near-quadratic decay: {e1} vs {e2}");
    }

    #[test]
    fn slide_rejects_unstable_configurations() {
        let grid = Grid::symmetric(&[4.0], 0.01, 1).unwrap();
        let u = ScalarField::from_fn(grid.clone(), |x| x[0]);
        // R barely above 1: the ramp slope explodes and the contraction
        // margin fails even for shifts inside the theta/4 bound.
        let c = CutoffProfile::new(1.2, 0, 0.25).unwrap();
        assert!(matches!(slide_field(&u, &c, Sign::Plus), Err(Error::InvalidDeformation(_))));
        // Grid too small for the requested radius.
        let c2 = CutoffProfile::new(16.0, 0, 0.5).unwrap();
        assert!(matches!(slide_field(&u, &c2, Sign::Plus), Err(Error::Coverage(_))));
    }

    #[test]
    fn deformation_serialization_round_trip() {
        let grid = Grid::symmetric(&[2.0, 2.0], 0.25, 1).unwrap();
        let psi = plateau_bump(&grid, 0.15, 1.5);
        let d = Deformation::new(vec![0, 1], vec![psi.clone(), psi], 1.8, Some(0.2)).unwrap();
        let text = d.to_text();
        let back = Deformation::from_text(&text).unwrap();
        assert_eq!(back.directions(), d.directions());
        assert_eq!(back.delta(), d.delta());
        assert_eq!(back.radius(), d.radius());
        for (f, g) in back.fields().iter().zip(d.fields()) {
            for (a, b) in f.values().iter().zip(g.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert!(Deformation::from_text("directions=1 delta=none\n").is_err());
    }
}
