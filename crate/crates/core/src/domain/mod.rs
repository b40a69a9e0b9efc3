//! Uniform grids on boxes and tori, cell fields, midpoint quadrature,
//! closed-form test functions and the Neumann-Laplacian inverse.

mod poisson;
mod testfn;

pub use poisson::{neumann_poisson_solve, neumann_poisson_solve_with, PoissonMode};
pub use testfn::{battery, Admissibility, Factor, Separable, Shape, SpatialEval, Tabulated, Term, TestEval, TestFunction, TimeFactor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symcone::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Box,
    Torus,
}

/// Axis-aligned uniform grid. Unused axes carry extent 1 and one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    topology: Topology,
    extent: [f64; 3],
    cells: [usize; 3],
}

impl Grid {
    pub fn new(dim: usize, topology: Topology, extent: &[f64], cells: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Input(format!("grid dimension {dim} not in 1..=3")));
        }
        if extent.len() != dim || cells.len() != dim {
            return Err(Error::Input("extent and cell lists must have length dim".into()));
        }
        let mut g = Grid { dim, topology, extent: [1.0; 3], cells: [1; 3] };
        for a in 0..dim {
            if !(extent[a] > 0.0 && extent[a].is_finite()) || cells[a] == 0 {
                return Err(Error::Input("extents and cell counts must be positive".into()));
            }
            g.extent[a] = extent[a];
            g.cells[a] = cells[a];
        }
        Ok(g)
    }

    /// `[0,1]^d` with `n` cells per axis.
    pub fn unit(dim: usize, topology: Topology, n: usize) -> Self {
        Grid::new(dim, topology, &vec![1.0; dim], &vec![n; dim]).expect("valid unit grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn topology(&self) -> Topology {
        self.topology
    }
    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }
    /// Largest cell width.
    pub fn h(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }
    pub fn volume(&self) -> f64 {
        self.extent[..self.dim].iter().product()
    }
    pub fn diameter(&self) -> f64 {
        self.extent[..self.dim].iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Linear cell index; axis 0 varies fastest.
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.cells[0] * (ijk[1] + self.cells[1] * ijk[2])
    }

    pub fn multi_index(&self, c: usize) -> [usize; 3] {
        let i = c % self.cells[0];
        let r = c / self.cells[0];
        [i, r % self.cells[1], r / self.cells[1]]
    }

    pub fn center(&self, c: usize) -> Vec3 {
        let ijk = self.multi_index(c);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (ijk[a] as f64 + 0.5) * self.spacing(a);
        }
        x
    }

    pub fn centers(&self) -> Vec<Vec3> {
        (0..self.len()).map(|c| self.center(c)).collect()
    }

    /// Whether the point lies in the closed domain.
    pub fn contains(&self, x: &Vec3) -> bool {
        (0..self.dim).all(|a| x[a].is_finite() && x[a] >= 0.0 && x[a] <= self.extent[a])
    }

    /// Cell holding `x` (boundary points go to the adjacent cell).
    pub fn locate(&self, x: &Vec3) -> usize {
        let mut ijk = [0usize; 3];
        for a in 0..self.dim {
            let k = (x[a] / self.spacing(a)).floor();
            ijk[a] = (k.max(0.0) as usize).min(self.cells[a] - 1);
        }
        self.index(ijk)
    }

    /// Whether cell `c` touches the boundary of a box domain.
    pub fn is_boundary_cell(&self, c: usize) -> bool {
        if self.topology == Topology::Torus {
            return false;
        }
        let ijk = self.multi_index(c);
        (0..self.dim).any(|a| ijk[a] == 0 || ijk[a] + 1 == self.cells[a])
    }

    /// Displacement `y - x`, wrapped to the nearest image on a torus.
    pub fn displacement(&self, x: &Vec3, y: &Vec3) -> Vec3 {
        let mut d = [0.0; 3];
        for a in 0..self.dim {
            let mut v = y[a] - x[a];
            if self.topology == Topology::Torus {
                let l = self.extent[a];
                v -= l * (v / l).round();
            }
            d[a] = v;
        }
        d
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Uniform time samples `t_i = i T / N`, `i = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if steps < 2 || !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Input("time grid needs T > 0 and at least 2 steps".into()));
        }
        Ok(TimeGrid { t_final, steps })
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn samples(&self) -> usize {
        self.steps + 1
    }
    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_final
        } else {
            i as f64 * self.dt()
        }
    }
    pub fn times(&self) -> Vec<f64> {
        (0..self.samples()).map(|i| self.time(i)).collect()
    }

    /// Running trapezoidal integral: `out[i] = int_0^{t_i} f`.
    pub fn cumulative_trapezoid(&self, f: &[f64]) -> Vec<f64> {
        let dt = self.dt();
        let mut out = Vec::with_capacity(f.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..f.len() {
            acc += 0.5 * dt * (f[i - 1] + f[i]);
            out.push(acc);
        }
        out
    }
}

/// Per-cell samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<Vec3>;

impl<T: Clone> Field<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn filled(grid: Grid, value: T) -> Self {
        Field { values: vec![value; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&Vec3) -> T) -> Self {
        Field { values: grid.centers().iter().map(f).collect(), grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Field<U> {
        Field { grid: self.grid, values: self.values.iter().map(f).collect() }
    }
}

/// Midpoint rule.
pub fn quad(f: &ScalarField) -> f64 {
    quad_values(f.grid(), f.values())
}

pub fn quad_values(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

pub fn mean(f: &ScalarField) -> f64 {
    quad(f) / f.grid().volume()
}

/// Second-order gradient: centered in the interior and on tori, one-sided
/// at box faces.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let v = f.values();
    let mut out = vec![[0.0; 3]; g.len()];
    for a in 0..g.dim() {
        let n = g.cells()[a];
        let h = g.spacing(a);
        let stride = match a {
            0 => 1,
            1 => g.cells[0],
            _ => g.cells[0] * g.cells[1],
        };
        for (c, o) in out.iter_mut().enumerate() {
            let i = g.multi_index(c)[a];
            let base = c - i * stride;
            let at = |k: usize| v[base + k * stride];
            o[a] = if n == 1 {
                0.0
            } else if g.topology() == Topology::Torus {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                (at(ip) - at(im)) / (2.0 * h)
            } else if n == 2 {
                (at(1) - at(0)) / h
            } else if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i + 1 == n {
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
    }
    Field { grid: g, values: out }
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm_sq(a: &Vec3) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quad_of_one_is_volume() {
        let g = Grid::unit(2, Topology::Box, 7);
        assert!((quad(&Field::filled(g, 1.0)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quad_of_periodic_sine_vanishes() {
        let g = Grid::unit(1, Topology::Torus, 64);
        let f = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(quad(&f).abs() < 1e-12);
    }

    #[test]
    fn quad_of_square_is_second_order() {
        let g = Grid::unit(1, Topology::Box, 100);
        let f = Field::from_fn(g, |x| x[0] * x[0]);
        assert!((quad(&f) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(3, Topology::Box, &[1.0, 2.0, 3.0], &[3, 4, 5]).unwrap();
        for c in 0..g.len() {
            assert_eq!(g.index(g.multi_index(c)), c);
            assert_eq!(g.locate(&g.center(c)), c);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, Topology::Box, &[], &[]).is_err());
        assert!(Grid::new(1, Topology::Box, &[-1.0], &[4]).is_err());
        assert!(Grid::new(1, Topology::Box, &[1.0], &[0]).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn gradient_is_second_order_on_box() {
        let err = |n: usize| {
            let g = Grid::unit(1, Topology::Box, n);
            let f = Field::from_fn(g, |x| (PI * x[0]).cos() + x[0] * x[0] * x[0]);
            let d = gradient(&f);
            g.centers()
                .iter()
                .zip(d.values())
                .map(|(x, v)| (v[0] - (-PI * (PI * x[0]).sin() + 3.0 * x[0] * x[0])).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.5, "ratio {ratio}");
    }

    #[test]
    fn trapezoid_prefix() {
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let f: Vec<f64> = tg.times().iter().map(|t| 2.0 * t).collect();
        let c = tg.cumulative_trapezoid(&f);
        assert!((c[4] - 1.0).abs() < 1e-15);
    }
}
