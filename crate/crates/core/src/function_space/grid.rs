use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule for evaluating a grid function outside its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    /// Use the value at the nearest boundary point.
    Clamp,
    /// Extend the boundary cell's multilinear interpolant.
    #[default]
    Linear,
}

/// Tensor grid with strictly increasing nodes per dimension.
///
/// A zero-dimensional grid has exactly one node and represents functions on
/// a single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    axes: Vec<Vec<f64>>,
    pub policy: Extrapolation,
}

/// Interpolation weights: flat node indices with multilinear weights.
pub type Stencil = Vec<(usize, f64)>;

impl StateGrid {
    /// Uniform grid over `bounds` with `counts[i] >= 2` nodes per dimension.
    pub fn build(bounds: &[(f64, f64)], counts: &[usize], policy: Extrapolation) -> Result<Self> {
        if bounds.len() != counts.len() {
            return Err(Error::invalid("bounds and counts must have the same length"));
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (&(lo, hi), &n) in bounds.iter().zip(counts) {
            if n < 2 {
                return Err(Error::invalid("each grid dimension needs at least 2 nodes"));
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::invalid("grid bounds must be finite"));
            }
            if lo >= hi {
                return Err(Error::invalid(format!("inverted grid bounds ({lo}, {hi})")));
            }
            let step = (hi - lo) / (n - 1) as f64;
            let mut axis: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            axis[n - 1] = hi;
            axes.push(axis);
        }
        Ok(Self { axes, policy })
    }

    /// Grid from explicit node arrays. Single-node axes are allowed and
    /// interpolate as constants.
    pub fn from_axes(axes: Vec<Vec<f64>>, policy: Extrapolation) -> Result<Self> {
        for axis in &axes {
            if axis.is_empty() {
                return Err(Error::invalid("grid axes must be non-empty"));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("grid nodes must be finite and strictly increasing"));
            }
        }
        Ok(Self { axes, policy })
    }

    pub fn with_policy(&self, policy: Extrapolation) -> Self {
        Self {
            axes: self.axes.clone(),
            policy,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    /// Coordinates of flat node `k` (first dimension varies fastest).
    pub fn node(&self, mut k: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for axis in &self.axes {
            x.push(axis[k % axis.len()]);
            k /= axis.len();
        }
        x
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    /// Flat index of the multi-index `idx`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        let mut stride = 1;
        for (i, axis) in self.axes.iter().enumerate() {
            k += idx[i] * stride;
            stride *= axis.len();
        }
        k
    }

    /// Interpolation stencil at `x` under `policy`. Entries with zero weight
    /// are dropped so that evaluation at nodes is exact.
    pub fn stencil_with(&self, x: &[f64], policy: Extrapolation) -> Stencil {
        let mut out: Stencil = vec![(0, 1.0)];
        let mut stride = 1;
        for (i, axis) in self.axes.iter().enumerate() {
            let n = axis.len();
            let mut next = Vec::with_capacity(out.len() * 2);
            if n == 1 {
                next = out;
            } else {
                let xi = x[i];
                let j = match axis.partition_point(|v| *v <= xi) {
                    0 => 0,
                    p if p >= n => n - 2,
                    p => p - 1,
                };
                let mut t = (xi - axis[j]) / (axis[j + 1] - axis[j]);
                if policy == Extrapolation::Clamp {
                    t = t.clamp(0.0, 1.0);
                }
                for &(k, w) in &out {
                    if 1.0 - t != 0.0 {
                        next.push((k + j * stride, w * (1.0 - t)));
                    }
                    if t != 0.0 {
                        next.push((k + (j + 1) * stride, w * t));
                    }
                }
            }
            out = next;
            stride *= n;
        }
        out
    }

    pub fn stencil(&self, x: &[f64]) -> Stencil {
        self.stencil_with(x, self.policy)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(a, v)| *v >= a[0] && *v <= a[a.len() - 1])
    }
}

/// Values on the nodes of a [`StateGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: StateGrid,
    pub values: Vec<f64>,
    /// Set when some value overflowed; such functions cannot be evaluated.
    pub diverged: bool,
}

impl GridFunction {
    pub fn new(grid: StateGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let diverged = values.iter().any(|v| !v.is_finite());
        Ok(Self { grid, values, diverged })
    }

    pub fn from_fn(grid: &StateGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len()).map(|k| f(&grid.node(k))).collect();
        let diverged = values.iter().any(|v| !v.is_finite());
        Self {
            grid: grid.clone(),
            values,
            diverged,
        }
    }

    pub fn constant(grid: &StateGrid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        let diverged = values.iter().any(|v| !v.is_finite());
        Self {
            grid: self.grid.clone(),
            values,
            diverged,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.diverged {
            return Err(Error::Divergence("cannot evaluate a diverged function".into()));
        }
        if x.len() != self.grid.dim() {
            return Err(Error::invalid("query point has the wrong dimension"));
        }
        Ok(self.eval_stencil(&self.grid.stencil(x)))
    }

    pub fn eval_stencil(&self, stencil: &[(usize, f64)]) -> f64 {
        stencil.iter().map(|(k, w)| w * self.values[*k]).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        crate::numerics::sup_abs(&self.values)
    }

    pub fn sup_diff(&self, other: &Self) -> f64 {
        crate::numerics::sup_diff(&self.values, &other.values)
    }

    /// CSV with one column per coordinate and a `value` column.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.grid.dim() {
            let _ = write!(s, "x{i},");
        }
        s.push_str("value\n");
        for k in 0..self.grid.len() {
            for x in self.grid.node(k) {
                let _ = write!(s, "{x:.12e},");
            }
            let _ = writeln!(s, "{:.12e}", self.values[k]);
        }
        s
    }
}
