//! Discrete finite measures on the closed domain: a per-cell density plus
//! point atoms, with scalar or symmetric-matrix weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::symcone::{polar_cone, MatCone, MatNormKind, SymMat, Vec3};

const CONE_TOL: f64 = 1e-10;
const DUALITY_TOL: f64 = 1e-9;

/// Weight values a measure may carry.
pub trait Weight: Copy + std::fmt::Debug + PartialEq + Send + Sync {
    fn zero(dim: usize) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, a: f64) -> Self;
    /// Frobenius pairing (product for scalars).
    fn pair(&self, other: &Self) -> f64;
    fn in_cone(&self, cone: MatCone, tol: f64) -> bool;
    fn sample_polar<R: Rng>(cone: MatCone, dim: usize, rng: &mut R) -> Self;
    fn is_finite(&self) -> bool;
}

impl Weight for f64 {
    fn zero(_dim: usize) -> Self {
        0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn scale(&self, a: f64) -> Self {
        self * a
    }
    fn pair(&self, other: &Self) -> f64 {
        self * other
    }
    fn in_cone(&self, cone: MatCone, tol: f64) -> bool {
        cone.contains_scalar(*self, tol)
    }
    fn sample_polar<R: Rng>(cone: MatCone, _dim: usize, rng: &mut R) -> Self {
        polar_cone(cone).sample_scalar(rng)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Weight for SymMat {
    fn zero(dim: usize) -> Self {
        SymMat::zeros(dim)
    }
    fn add(&self, other: &Self) -> Self {
        SymMat::add(self, other)
    }
    fn scale(&self, a: f64) -> Self {
        SymMat::scale(self, a)
    }
    fn pair(&self, other: &Self) -> f64 {
        self.frob(other)
    }
    fn in_cone(&self, cone: MatCone, tol: f64) -> bool {
        cone.contains(self, tol)
    }
    fn sample_polar<R: Rng>(cone: MatCone, dim: usize, rng: &mut R) -> Self {
        polar_cone(cone).sample(dim, rng)
    }
    fn is_finite(&self) -> bool {
        SymMat::is_finite(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom<W> {
    pub x: Vec3,
    pub w: W,
}

/// Density (weight per unit volume, one per cell) plus atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscMeasure<W> {
    grid: Grid,
    ac: Vec<W>,
    atoms: Vec<Atom<W>>,
}

/// Result of [`DiscMeasure::cone_duality_test`].
#[derive(Clone, Debug, PartialEq)]
pub struct DualityOutcome {
    pub passed: bool,
    pub samples: usize,
    /// Largest pairing seen and the sample index that produced it.
    pub worst_pairing: f64,
    pub worst_sample: usize,
}

impl<W: Weight> DiscMeasure<W> {
    pub fn new(grid: Grid, ac: Vec<W>, atoms: Vec<Atom<W>>) -> Result<Self> {
        if ac.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "density has {} values, grid has {} cells",
                ac.len(),
                grid.len()
            )));
        }
        if ac.iter().any(|w| !w.is_finite()) || atoms.iter().any(|a| !a.w.is_finite()) {
            return Err(Error::Input("measure weights must be finite".into()));
        }
        if let Some(a) = atoms.iter().find(|a| !grid.contains(&a.x)) {
            return Err(Error::Input(format!("atom at {:?} outside the closed domain", a.x)));
        }
        Ok(DiscMeasure { grid, ac, atoms })
    }

    pub fn zero(grid: Grid) -> Self {
        DiscMeasure { ac: vec![W::zero(grid.dim()); grid.len()], atoms: Vec::new(), grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn density(&self) -> &[W] {
        &self.ac
    }
    pub fn atoms(&self) -> &[Atom<W>] {
        &self.atoms
    }

    /// Integral of `f` against the measure: midpoint rule on the density,
    /// exact evaluation at atoms.
    pub fn pair(&self, f: impl Fn(&Vec3) -> W) -> f64 {
        let vol = self.grid.cell_volume();
        let mut acc = 0.0;
        for (c, w) in self.ac.iter().enumerate() {
            acc += f(&self.grid.center(c)).pair(w) * vol;
        }
        for a in &self.atoms {
            acc += f(&a.x).pair(&a.w);
        }
        acc
    }

    /// Pairing with per-cell values of the test field (density part) and an
    /// evaluator for atoms.
    pub fn pair_cells(&self, cell_values: &[W], atom_value: impl Fn(&Vec3) -> W) -> f64 {
        let vol = self.grid.cell_volume();
        let mut acc: f64 = self.ac.iter().zip(cell_values).map(|(w, f)| f.pair(w)).sum::<f64>() * vol;
        for a in &self.atoms {
            acc += atom_value(&a.x).pair(&a.w);
        }
        acc
    }

    /// Total weight `mu(closure of domain)`.
    pub fn total(&self) -> W {
        let vol = self.grid.cell_volume();
        let mut acc = W::zero(self.grid.dim());
        for w in &self.ac {
            acc = acc.add(&w.scale(vol));
        }
        for a in &self.atoms {
            acc = acc.add(&a.w);
        }
        acc
    }

    pub fn cone_membership(&self, cone: MatCone) -> bool {
        self.ac.iter().all(|w| w.in_cone(cone, CONE_TOL)) && self.atoms.iter().all(|a| a.w.in_cone(cone, CONE_TOL))
    }

    /// Samples fields `B * bump(x)` with `B` in the polar cone and Gaussian
    /// bumps of radius in `[h, diam/4]`; passes iff every pairing is at most
    /// `1e-9`. Half of the bumps are centered at support points of the
    /// measure, the other half uniformly.
    pub fn cone_duality_test(&self, cone: MatCone, n_samples: usize, seed: u64) -> DualityOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.grid;
        let d = g.dim();
        let support: Vec<Vec3> = self
            .atoms
            .iter()
            .map(|a| a.x)
            .chain(self.ac.iter().enumerate().filter(|(_, w)| **w != W::zero(d)).map(|(c, _)| g.center(c)))
            .collect();
        let r_lo = g.h();
        let r_hi = (0.25 * g.diameter()).max(r_lo);
        let mut out = DualityOutcome { passed: true, samples: n_samples, worst_pairing: f64::NEG_INFINITY, worst_sample: 0 };
        for s in 0..n_samples {
            let b = W::sample_polar(cone, d, &mut rng);
            let center = if !support.is_empty() && rng.gen_bool(0.5) {
                support[rng.gen_range(0..support.len())]
            } else {
                let mut x = [0.0; 3];
                for a in 0..d {
                    x[a] = rng.gen_range(0.0..=g.extent()[a]);
                }
                x
            };
            let r = rng.gen_range(r_lo..=r_hi);
            let value = self.pair(|x| {
                let dx = g.displacement(&center, x);
                let q = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]) / (r * r);
                b.scale((-q).exp())
            });
            if value > out.worst_pairing {
                out.worst_pairing = value;
                out.worst_sample = s;
            }
            if value > DUALITY_TOL {
                out.passed = false;
            }
        }
        out
    }

    /// Splits into the density part and the atomic part.
    pub fn rn_split(&self) -> (DiscMeasure<W>, DiscMeasure<W>) {
        let ac = DiscMeasure { grid: self.grid, ac: self.ac.clone(), atoms: Vec::new() };
        let sing = DiscMeasure { grid: self.grid, ac: vec![W::zero(self.grid.dim()); self.grid.len()], atoms: self.atoms.clone() };
        (ac, sing)
    }

    pub fn add(&self, other: &DiscMeasure<W>) -> Result<DiscMeasure<W>> {
        self.grid.check_same(&other.grid)?;
        let ac = self.ac.iter().zip(&other.ac).map(|(a, b)| a.add(b)).collect();
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        Ok(DiscMeasure { grid: self.grid, ac, atoms })
    }

    pub fn scale(&self, a: f64) -> DiscMeasure<W> {
        DiscMeasure {
            grid: self.grid,
            ac: self.ac.iter().map(|w| w.scale(a)).collect(),
            atoms: self.atoms.iter().map(|t| Atom { x: t.x, w: t.w.scale(a) }).collect(),
        }
    }
}

impl DiscMeasure<SymMat> {
    pub fn total_variation(&self, kind: MatNormKind) -> f64 {
        let vol = self.grid.cell_volume();
        self.ac.iter().map(|w| w.norm(kind)).sum::<f64>() * vol + self.atoms.iter().map(|a| a.w.norm(kind)).sum::<f64>()
    }

    /// Trace measure.
    pub fn trace(&self) -> DiscMeasure<f64> {
        DiscMeasure {
            grid: self.grid,
            ac: self.ac.iter().map(|w| w.trace()).collect(),
            atoms: self.atoms.iter().map(|a| Atom { x: a.x, w: a.w.trace() }).collect(),
        }
    }

    /// Adds a uniform multiple of the identity to the density so that the
    /// total trace becomes `2 zeta`.
    pub fn trace_adjust(&self, zeta: f64) -> Result<DiscMeasure<SymMat>> {
        let tr = self.total().trace();
        if zeta < 0.5 * tr - 1e-12 {
            return Err(Error::Precondition(format!("budget {zeta} below half the total trace {tr}")));
        }
        let d = self.grid.dim() as f64;
        let shift = (2.0 * zeta - tr) / (self.grid.volume() * d);
        Ok(DiscMeasure {
            grid: self.grid,
            ac: self.ac.iter().map(|w| w.add_identity(shift)).collect(),
            atoms: self.atoms.clone(),
        })
    }
}

impl DiscMeasure<f64> {
    pub fn total_variation(&self) -> f64 {
        self.ac.iter().map(|w| w.abs()).sum::<f64>() * self.grid.cell_volume()
            + self.atoms.iter().map(|a| a.w.abs()).sum::<f64>()
    }
}
