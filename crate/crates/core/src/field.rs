//! Grids and discrete fields.
//!
//! A [`Grid`] is a uniform rectangular lattice in dimension `n <= 3`. The
//! underlying domain has the cylindrical shape `U x R^(n-k+1)`: the first
//! `k-1` axes span the bounded cross-section `U`, the remaining axes are
//! translation-invariant. The 1-based index `k` of the first
//! translation-invariant axis is stored as [`Grid::split`].
//!
//! [`ScalarField`] stores one value per node in row-major order (last axis
//! fastest). Gradients use centered second-order differences in the interior
//! and one-sided second-order stencils on the boundary, so affine fields
//! differentiate exactly. Off-node evaluation is multilinear.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Maximum supported dimension. Coordinate buffers are fixed-size arrays
/// padded with zeros beyond `n`, which keeps hot loops allocation-free.
pub const MAX_DIM: usize = 3;

/// Relative slack when testing hull membership, in units of one spacing.
const HULL_SLACK: f64 = 1e-9;

/// Uniform rectangular lattice with a cylindrical domain convention.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    origin: [f64; MAX_DIM],
    spacing: [f64; MAX_DIM],
    extent: [usize; MAX_DIM],
    split: usize,
}

impl Grid {
    /// Build a grid from per-axis origin, spacing and node count.
    ///
    /// `split` is the 1-based index of the first translation-invariant axis;
    /// axes `split..=n` are translation-invariant, axes `1..split` span the
    /// bounded cross-section. `split = 1` means the whole domain is
    /// translation-invariant; `split = n + 1` means none of it is.
    pub fn new(origin: &[f64], spacing: &[f64], extent: &[usize], split: usize) -> Result<Grid> {
        let n = origin.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Grid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        if spacing.len() != n || extent.len() != n {
            return Err(Error::Grid(format!(
                "axis count mismatch: origin {}, spacing {}, extent {}",
                n,
                spacing.len(),
                extent.len()
            )));
        }
        if split == 0 || split > n + 1 {
            return Err(Error::Grid(format!("split index {split} outside 1..={}", n + 1)));
        }
        let mut g = Grid {
            n,
            origin: [0.0; MAX_DIM],
            spacing: [1.0; MAX_DIM],
            extent: [1; MAX_DIM],
            split,
        };
        for a in 0..n {
            if !origin[a].is_finite() || !spacing[a].is_finite() {
                return Err(Error::Grid(format!("non-finite origin or spacing on axis {a}")));
            }
            if spacing[a] <= 0.0 {
                return Err(Error::Grid(format!("spacing {} on axis {a} not positive", spacing[a])));
            }
            if extent[a] < 2 {
                return Err(Error::Grid(format!("extent {} on axis {a} below 2", extent[a])));
            }
            g.origin[a] = origin[a];
            g.spacing[a] = spacing[a];
            g.extent[a] = extent[a];
        }
        Ok(g)
    }

    /// Symmetric box `[-W_a, W_a]` per axis with uniform spacing `h`,
    /// rounded so that the origin of coordinates is exactly a node.
    pub fn symmetric(half_widths: &[f64], h: f64, split: usize) -> Result<Grid> {
        let n = half_widths.len();
        let mut origin = Vec::with_capacity(n);
        let mut spacing = Vec::with_capacity(n);
        let mut extent = Vec::with_capacity(n);
        for &w in half_widths {
            if !(w > 0.0) {
                return Err(Error::Grid(format!("half width {w} not positive")));
            }
            let m = (w / h).round().max(1.0);
            // Store the origin as -(m*h) so that node m sits at exactly 0.
            origin.push(-(m * h));
            spacing.push(h);
            extent.push(2 * m as usize + 1);
        }
        Grid::new(&origin, &spacing, &extent, split)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 1-based index of the first translation-invariant axis.
    pub fn split(&self) -> usize {
        self.split
    }

    /// Number of leading bounded coordinates (the cross-section dimension).
    pub fn bounded_len(&self) -> usize {
        self.split - 1
    }

    /// Whether the 0-based axis is translation-invariant.
    pub fn is_invariant(&self, axis: usize) -> bool {
        axis + 1 >= self.split
    }

    pub fn spacing_of(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn extent_of(&self, axis: usize) -> usize {
        self.extent[axis]
    }

    pub fn origin_of(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    /// Coordinate of node `i` on `axis`.
    pub fn pos(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + (i as f64) * self.spacing[axis]
    }

    /// Hull interval of `axis`.
    pub fn hull(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis], self.pos(axis, self.extent[axis] - 1))
    }

    pub fn node_count(&self) -> usize {
        self.extent[..self.n].iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.extent[..self.n].iter().map(|e| e - 1).product()
    }

    /// Flat row-major node index (last axis fastest).
    pub fn node_index(&self, idx: &[usize; MAX_DIM]) -> usize {
        let mut flat = 0;
        for a in 0..self.n {
            flat = flat * self.extent[a] + idx[a];
        }
        flat
    }

    /// Inverse of [`Grid::node_index`].
    pub fn node_coords(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        for a in (0..self.n).rev() {
            idx[a] = flat % self.extent[a];
            flat /= self.extent[a];
        }
        idx
    }

    /// Position of a node given its flat index.
    pub fn node_pos(&self, flat: usize, out: &mut [f64; MAX_DIM]) {
        let idx = self.node_coords(flat);
        for a in 0..self.n {
            out[a] = self.pos(a, idx[a]);
        }
        for a in self.n..MAX_DIM {
            out[a] = 0.0;
        }
    }

    /// Check that the hull covers `[-r, r]` on every translation-invariant
    /// axis, which is what quadrature over the ball of radius `r` needs.
    /// Bounded axes define the cross-section themselves and are exempt.
    pub fn covers_ball(&self, r: f64) -> Result<()> {
        if !r.is_finite() {
            return Ok(());
        }
        for a in 0..self.n {
            if !self.is_invariant(a) {
                continue;
            }
            let (lo, hi) = self.hull(a);
            let slack = HULL_SLACK * self.spacing[a];
            if lo > -r + slack || hi < r - slack {
                return Err(Error::Coverage(format!(
                    "axis {a} hull [{lo}, {hi}] does not cover [-{r}, {r}]"
                )));
            }
        }
        Ok(())
    }
}

/// One `f64` per grid node, row-major.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Evaluate `f` at every node. The closure receives the node coordinates
    /// as a slice of length `grid.dim()`.
    pub fn from_fn<F>(grid: Grid, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = grid.dim();
        let values = crate::reduce::map_indices(grid.node_count(), |flat| {
            let mut x = [0.0; MAX_DIM];
            grid.node_pos(flat, &mut x);
            f(&x[..n])
        });
        ScalarField { grid, values }
    }

    /// Wrap an existing value vector; its length must match the grid.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "value count {} vs node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> ScalarField {
        let values = vec![value; grid.node_count()];
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute forward difference quotient along `axis`,
    /// a grid estimate of the Lipschitz seminorm in that direction.
    pub fn slope_sup(&self, axis: usize) -> f64 {
        let g = &self.grid;
        let h = g.spacing_of(axis);
        let stride = self.axis_stride(axis);
        let ext = g.extent_of(axis);
        let mut sup = 0.0f64;
        for flat in 0..g.node_count() {
            let idx = g.node_coords(flat);
            if idx[axis] + 1 >= ext {
                continue;
            }
            let d = (self.values[flat + stride] - self.values[flat]).abs() / h;
            sup = sup.max(d);
        }
        sup
    }

    fn axis_stride(&self, axis: usize) -> usize {
        let g = &self.grid;
        let mut stride = 1;
        for a in (axis + 1)..g.dim() {
            stride *= g.extent_of(a);
        }
        stride
    }

    /// Nodal gradient: centered differences inside, one-sided second-order
    /// stencils on the boundary. Exact for affine fields.
    pub fn gradient(&self) -> Result<VectorField> {
        let g = &self.grid;
        for a in 0..g.dim() {
            if g.extent_of(a) < 3 {
                return Err(Error::Grid(format!(
                    "axis {a} has extent {} < 3; second-order stencils need 3 nodes",
                    g.extent_of(a)
                )));
            }
        }
        let mut comps = Vec::with_capacity(g.dim());
        for axis in 0..g.dim() {
            let h = g.spacing_of(axis);
            let ext = g.extent_of(axis);
            let stride = self.axis_stride(axis);
            let v = &self.values;
            let comp = crate::reduce::map_indices(g.node_count(), |flat| {
                let i = g.node_coords(flat)[axis];
                if i == 0 {
                    (-3.0 * v[flat] + 4.0 * v[flat + stride] - v[flat + 2 * stride]) / (2.0 * h)
                } else if i == ext - 1 {
                    (3.0 * v[flat] - 4.0 * v[flat - stride] + v[flat - 2 * stride]) / (2.0 * h)
                } else {
                    (v[flat + stride] - v[flat - stride]) / (2.0 * h)
                }
            });
            comps.push(comp);
        }
        Ok(VectorField { grid: g.clone(), comps })
    }

    /// Node-wise maximum of two fields on the same grid.
    pub fn pointwise_max(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, f64::max)
    }

    /// Node-wise minimum of two fields on the same grid.
    pub fn pointwise_min(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, f64::min)
    }

    fn zip(&self, other: &ScalarField, op: fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("pointwise combination".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    /// Multilinear interpolation at an arbitrary point of the hull.
    pub fn sample(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let n = g.dim();
        debug_assert_eq!(x.len(), n);
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..n {
            let h = g.spacing_of(a);
            let t = (x[a] - g.origin_of(a)) / h;
            let top = (g.extent_of(a) - 1) as f64;
            if t < -HULL_SLACK || t > top + HULL_SLACK {
                return Err(Error::HullEscape(format!(
                    "coordinate {} outside axis {a} hull [{}, {}]",
                    x[a],
                    g.origin_of(a),
                    g.pos(a, g.extent_of(a) - 1)
                )));
            }
            let t = t.clamp(0.0, top);
            let mut i = t.floor() as usize;
            if i >= g.extent_of(a) - 1 {
                i = g.extent_of(a) - 2;
            }
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..n {
                if corner & (1 << a) != 0 {
                    w *= frac[a];
                    idx[a] += 1;
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            acc += w * self.values[g.node_index(&idx)];
        }
        Ok(acc)
    }

    /// Serialize to the plain-text field format: one header line
    /// `n h_1..h_n origin_1..origin_n extent_1..extent_n k`, then one value
    /// per line with 17 significant digits (lossless for `f64`).
    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// In-memory form of [`ScalarField::write_file`].
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let n = g.dim();
        let mut out = String::with_capacity(self.values.len() * 25 + 64);
        let _ = write!(out, "{n}");
        for a in 0..n {
            let _ = write!(out, " {:.17e}", g.spacing_of(a));
        }
        for a in 0..n {
            let _ = write!(out, " {:.17e}", g.origin_of(a));
        }
        for a in 0..n {
            let _ = write!(out, " {}", g.extent_of(a));
        }
        let _ = writeln!(out, " {}", g.split());
        for v in &self.values {
            let _ = writeln!(out, "{v:.17e}");
        }
        out
    }

    pub fn read_file(path: &Path) -> Result<ScalarField> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Parse the plain-text field format.
    pub fn from_text(text: &str) -> Result<ScalarField> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        let n: usize = tok
            .first()
            .ok_or_else(|| Error::Parse("empty header".into()))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension `{}`", tok[0])))?;
        if tok.len() != 2 + 3 * n {
            return Err(Error::Parse(format!(
                "header has {} tokens, expected {} for dimension {n}",
                tok.len(),
                2 + 3 * n
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")))
        };
        let mut spacing = Vec::with_capacity(n);
        let mut origin = Vec::with_capacity(n);
        let mut extent = Vec::with_capacity(n);
        for a in 0..n {
            spacing.push(num(tok[1 + a])?);
        }
        for a in 0..n {
            origin.push(num(tok[1 + n + a])?);
        }
        for a in 0..n {
            extent.push(
                tok[1 + 2 * n + a]
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad extent `{}`", tok[1 + 2 * n + a])))?,
            );
        }
        let split: usize = tok[1 + 3 * n]
            .parse()
            .map_err(|_| Error::Parse(format!("bad split index `{}`", tok[1 + 3 * n])))?;
        let grid = Grid::new(&origin, &spacing, &extent, split)?;
        let mut values = Vec::with_capacity(grid.node_count());
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(num(line)?);
        }
        if values.len() != grid.node_count() {
            return Err(Error::Parse(format!(
                "value count {} vs node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        ScalarField::from_values(grid, values)
    }
}

/// `n` real components per node, stored per component.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    /// Extract one component as a scalar field (borrowing the grid).
    pub fn component_field(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.comps[axis].clone(),
        }
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Result<VectorField> {
        if comps.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "component count {} vs dimension {}",
                comps.len(),
                grid.dim()
            )));
        }
        for (a, c) in comps.iter().enumerate() {
            if c.len() != grid.node_count() {
                return Err(Error::GridMismatch(format!(
                    "component {a} length {} vs node count {}",
                    c.len(),
                    grid.node_count()
                )));
            }
        }
        Ok(VectorField { grid, comps })
    }
}
