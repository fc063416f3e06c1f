//! Graded tensor-product meshes on [0,a]×[0,b] and scalar fields on them.
//!
//! Solutions of the weakly singular integral equations behave like powers of
//! ψ(x)-ψ(0) near the base point, so node spacing is graded toward the lower
//! endpoint: node i sits at `lo + (hi-lo)·(i/(n-1))^r` with grading exponent
//! r ≥ 1 (r = 1 is uniform; the default r = 2 concentrates nodes at 0).

use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("invalid extent: lo={lo}, hi={hi}")]
    BadExtent { lo: f64, hi: f64 },
    #[error("grading exponent must be >= 1, got {0}")]
    BadGrading(f64),
    #[error("non-finite value at node ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error("values length {got} does not match grid size {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

pub const DEFAULT_GRADING: f64 = 2.0;

/// Strictly increasing nodes on [lo, hi] including both endpoints, graded
/// toward lo.
pub fn graded_nodes(lo: f64, hi: f64, n: usize, r: f64) -> Result<Vec<f64>, GridError> {
    if n < 2 {
        return Err(GridError::TooFewNodes(n));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(GridError::BadExtent { lo, hi });
    }
    if !(r >= 1.0) {
        return Err(GridError::BadGrading(r));
    }
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        nodes.push(lo + (hi - lo) * s.powf(r));
    }
    // endpoints exact
    nodes[0] = lo;
    nodes[n - 1] = hi;
    Ok(nodes)
}

/// Tensor-product evaluation mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Grid2D {
    /// Mesh on [0,a]×[0,b] graded toward the origin.
    pub fn graded(a: f64, b: f64, nx: usize, ny: usize, r: f64) -> Result<Arc<Grid2D>, GridError> {
        Self::graded_on((0.0, a), (0.0, b), nx, ny, r)
    }

    /// Mesh on a general rectangle (for weight functions with a positive
    /// lower endpoint, e.g. the Hadamard base point 1).
    pub fn graded_on(
        x_range: (f64, f64),
        y_range: (f64, f64),
        nx: usize,
        ny: usize,
        r: f64,
    ) -> Result<Arc<Grid2D>, GridError> {
        Ok(Arc::new(Grid2D {
            xs: graded_nodes(x_range.0, x_range.1, nx, r)?,
            ys: graded_nodes(y_range.0, y_range.1, ny, r)?,
        }))
    }

    /// Mesh from explicit node arrays (strictly increasing, ≥ 2 per axis).
    pub fn from_nodes(xs: Vec<f64>, ys: Vec<f64>) -> Result<Arc<Grid2D>, GridError> {
        for nodes in [&xs, &ys] {
            if nodes.len() < 2 {
                return Err(GridError::TooFewNodes(nodes.len()));
            }
            if nodes.windows(2).any(|p| p[1] <= p[0]) {
                return Err(GridError::BadExtent {
                    lo: nodes[0],
                    hi: *nodes.last().unwrap(),
                });
            }
        }
        Ok(Arc::new(Grid2D { xs, ys }))
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn x_extent(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn y_extent(&self) -> f64 {
        *self.ys.last().unwrap()
    }
}

/// A scalar field sampled on a [`Grid2D`], stored row-major in x.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl GridFn {
    pub fn from_fn(
        grid: &Arc<Grid2D>,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<GridFn, GridError> {
        let mut values = Vec::with_capacity(grid.nx() * grid.ny());
        for &x in grid.xs() {
            for &y in grid.ys() {
                let v = f(x, y);
                if !v.is_finite() {
                    return Err(GridError::NonFinite { x, y });
                }
                values.push(v);
            }
        }
        Ok(GridFn {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Like [`GridFn::from_fn`] but the sampler may fail.
    pub fn try_from_fn<E>(
        grid: &Arc<Grid2D>,
        mut f: impl FnMut(f64, f64) -> Result<f64, E>,
    ) -> Result<Result<GridFn, GridError>, E> {
        let mut values = Vec::with_capacity(grid.nx() * grid.ny());
        for &x in grid.xs() {
            for &y in grid.ys() {
                let v = f(x, y)?;
                if !v.is_finite() {
                    return Ok(Err(GridError::NonFinite { x, y }));
                }
                values.push(v);
            }
        }
        Ok(Ok(GridFn {
            grid: Arc::clone(grid),
            values,
        }))
    }

    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<f64>) -> Result<GridFn, GridError> {
        let expected = grid.nx() * grid.ny();
        if values.len() != expected {
            return Err(GridError::SizeMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos / grid.ny(), pos % grid.ny());
            return Err(GridError::NonFinite {
                x: grid.xs()[i],
                y: grid.ys()[j],
            });
        }
        Ok(GridFn {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn zeros(grid: &Arc<Grid2D>) -> GridFn {
        GridFn {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.nx() * grid.ny()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.ny() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.grid.ny() + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// sup_ij |self - other|.
    pub fn sup_diff(&self, other: &GridFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// sup_ij |self - other| · exp(-τ(x_i + y_j)) — the Bielecki-weighted
    /// distance the Picard contraction argument is stated in.
    pub fn weighted_sup_diff(&self, other: &GridFn, tau: f64) -> f64 {
        let ny = self.grid.ny();
        let mut worst = 0.0f64;
        for (i, &x) in self.grid.xs().iter().enumerate() {
            for (j, &y) in self.grid.ys().iter().enumerate() {
                let d = (self.values[i * ny + j] - other.values[i * ny + j]).abs()
                    * (-tau * (x + y)).exp();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
