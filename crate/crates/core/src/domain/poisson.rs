use std::f64::consts::PI;

use super::{Field, Grid, ScalarField, Topology};

/// Symbol used when inverting the Laplacian in the per-axis eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoissonMode {
    /// Eigenvalues of the 5-point stencil (reflective ghost cells on boxes).
    Stencil,
    /// Eigenvalues of the continuous operator.
    Spectral,
}

impl PoissonMode {
    pub fn default_for(topology: Topology) -> Self {
        match topology {
            Topology::Box => PoissonMode::Stencil,
            Topology::Torus => PoissonMode::Spectral,
        }
    }
}

/// Orthonormal eigenbasis of the 1D Laplacian on `n` cell centers, stored
/// column-major as `basis[k * n + i]`, with its eigenvalues.
fn axis_basis(n: usize, len: f64, topology: Topology, mode: PoissonMode) -> (Vec<f64>, Vec<f64>) {
    let h = len / n as f64;
    let nf = n as f64;
    let mut basis = vec![0.0; n * n];
    let mut eig = vec![0.0; n];
    match topology {
        Topology::Box => {
            for k in 0..n {
                let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                for i in 0..n {
                    basis[k * n + i] = scale * (PI * k as f64 * (i as f64 + 0.5) / nf).cos();
                }
                eig[k] = match mode {
                    PoissonMode::Stencil => (2.0 - 2.0 * (PI * k as f64 / nf).cos()) / (h * h),
                    PoissonMode::Spectral => (PI * k as f64 / len).powi(2),
                };
            }
        }
        Topology::Torus => {
            // columns: constant, (cos, sin) pairs, alternating mode for even n
            let mut col = 0;
            let mut push = |wave: usize, f: &dyn Fn(usize) -> f64, basis: &mut Vec<f64>, eig: &mut Vec<f64>| {
                for i in 0..n {
                    basis[col * n + i] = f(i);
                }
                eig[col] = match mode {
                    PoissonMode::Stencil => (2.0 - 2.0 * (2.0 * PI * wave as f64 / nf).cos()) / (h * h),
                    PoissonMode::Spectral => (2.0 * PI * wave as f64 / len).powi(2),
                };
                col += 1;
            };
            push(0, &|_| (1.0 / nf).sqrt(), &mut basis, &mut eig);
            for k in 1..n.div_ceil(2) {
                let w = 2.0 * PI * k as f64 / nf;
                push(k, &|i| (2.0 / nf).sqrt() * (w * i as f64).cos(), &mut basis, &mut eig);
                push(k, &|i| (2.0 / nf).sqrt() * (w * i as f64).sin(), &mut basis, &mut eig);
            }
            if n % 2 == 0 && n > 1 {
                push(n / 2, &|i| if i % 2 == 0 { (1.0 / nf).sqrt() } else { -(1.0 / nf).sqrt() }, &mut basis, &mut eig);
            }
        }
    }
    (basis, eig)
}

/// Applies the basis (or its transpose) along one axis of a grid array.
fn transform_axis(data: &mut [f64], grid: &Grid, axis: usize, basis: &[f64], transpose: bool) {
    let cells = [grid.cells()[0], *grid.cells().get(1).unwrap_or(&1), *grid.cells().get(2).unwrap_or(&1)];
    let n = cells[axis];
    let stride: usize = cells[..axis].iter().product();
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for c in 0..data.len() {
        let i = (c / stride) % n;
        if i != 0 {
            continue;
        }
        for (k, l) in line.iter_mut().enumerate() {
            *l = data[c + k * stride];
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o = if transpose {
                (0..n).map(|i| basis[k * n + i] * line[i]).sum()
            } else {
                (0..n).map(|j| basis[j * n + k] * line[j]).sum()
            };
        }
        for (k, o) in out.iter().enumerate() {
            data[c + k * stride] = *o;
        }
    }
}

/// Solves `-lap V = rho - mean(rho)` with zero-flux (box) or periodic (torus)
/// conditions and zero mean, using the default symbol for the topology.
pub fn neumann_poisson_solve(rho: &ScalarField) -> ScalarField {
    neumann_poisson_solve_with(rho, PoissonMode::default_for(rho.grid().topology()))
}

pub fn neumann_poisson_solve_with(rho: &ScalarField, mode: PoissonMode) -> ScalarField {
    let grid = *rho.grid();
    let d = grid.dim();
    let bases: Vec<(Vec<f64>, Vec<f64>)> =
        (0..d).map(|a| axis_basis(grid.cells()[a], grid.extent()[a], grid.topology(), mode)).collect();
    let mut data = rho.values().to_vec();
    for (a, (b, _)) in bases.iter().enumerate() {
        transform_axis(&mut data, &grid, a, b, true);
    }
    for (c, v) in data.iter_mut().enumerate() {
        let ijk = grid.multi_index(c);
        let lam: f64 = (0..d).map(|a| bases[a].1[ijk[a]]).sum();
        *v = if ijk[..d].iter().all(|&k| k == 0) || lam <= 0.0 { 0.0 } else { *v / lam };
    }
    for (a, (b, _)) in bases.iter().enumerate() {
        transform_axis(&mut data, &grid, a, b, false);
    }
    Field::new(grid, data).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::quad;

    fn stencil_laplacian(v: &ScalarField) -> Vec<f64> {
        let g = v.grid();
        let vals = v.values();
        (0..g.len())
            .map(|c| {
                let ijk = g.multi_index(c);
                let mut acc = 0.0;
                for a in 0..g.dim() {
                    let n = g.cells()[a];
                    let h = g.spacing(a);
                    let nb = |off: i64| {
                        let mut m = ijk;
                        let k = ijk[a] as i64 + off;
                        m[a] = match g.topology() {
                            Topology::Torus => k.rem_euclid(n as i64) as usize,
                            Topology::Box => k.clamp(0, n as i64 - 1) as usize,
                        };
                        vals[g.index(m)]
                    };
                    acc += (nb(1) - 2.0 * vals[c] + nb(-1)) / (h * h);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn constant_density_gives_zero() {
        let g = Grid::unit(2, Topology::Box, 8);
        let v = neumann_poisson_solve(&Field::filled(g, 3.0));
        assert!(v.values().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn stencil_residual_is_small() {
        for topo in [Topology::Box, Topology::Torus] {
            let g = Grid::new(2, topo, &[1.0, 2.0], &[12, 10]).unwrap();
            let rho = Field::from_fn(g, |x| (3.0 * x[0]).sin() + x[1] * x[1] + (x[0] * x[1]).exp());
            let v = neumann_poisson_solve_with(&rho, PoissonMode::Stencil);
            let lap = stencil_laplacian(&v);
            let mean = quad(&rho) / g.volume();
            let scale = rho.values().iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
            for (l, r) in lap.iter().zip(rho.values()) {
                assert!((-l - (r - mean)).abs() <= 1e-8 * scale);
            }
            assert!(quad(&v).abs() < 1e-10);
        }
    }
}
