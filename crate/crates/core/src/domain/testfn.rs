use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::{Grid, TimeGrid, Topology};
use crate::symcone::{Mat3, Vec3};

/// One-dimensional factor `cos(omega x + phase)`, optionally multiplied by the
/// bubble `4 x (L - x) / L^2` which vanishes at both ends of `[0, L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor {
    pub omega: f64,
    pub phase: f64,
    pub bubble_len: Option<f64>,
}

impl Factor {
    pub const ONE: Factor = Factor { omega: 0.0, phase: 0.0, bubble_len: None };

    /// Value and first two derivatives.
    fn eval(&self, x: f64) -> [f64; 3] {
        let (s, c) = (self.omega * x + self.phase).sin_cos();
        let w = self.omega;
        let q = [c, -w * s, -w * w * c];
        match self.bubble_len {
            None => q,
            Some(l) => {
                let b = [4.0 * x * (l - x) / (l * l), 4.0 * (l - 2.0 * x) / (l * l), -8.0 / (l * l)];
                [
                    b[0] * q[0],
                    b[1] * q[0] + b[0] * q[1],
                    b[2] * q[0] + 2.0 * b[1] * q[1] + b[0] * q[2],
                ]
            }
        }
    }
}

/// Product of one-dimensional factors over the active axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separable {
    pub dim: usize,
    pub factors: [Factor; 3],
}

struct Jet {
    value: f64,
    grad: Vec3,
    hess: Mat3,
}

impl Separable {
    fn eval(&self, x: &Vec3) -> Jet {
        let d = self.dim;
        let mut f = [[1.0, 0.0, 0.0]; 3];
        for a in 0..d {
            f[a] = self.factors[a].eval(x[a]);
        }
        // product of order-k derivatives, k[a] in {0,1,2}
        let prod = |k: [usize; 3]| (0..d).map(|a| f[a][k[a]]).product::<f64>();
        let mut jet = Jet { value: prod([0, 0, 0]), grad: [0.0; 3], hess: [[0.0; 3]; 3] };
        for a in 0..d {
            let mut k = [0; 3];
            k[a] = 1;
            jet.grad[a] = prod(k);
            for b in a..d {
                let mut k = [0; 3];
                k[a] += 1;
                k[b] += 1;
                let v = prod(k);
                jet.hess[a][b] = v;
                jet.hess[b][a] = v;
            }
        }
        jet
    }

    fn max_omega(&self) -> f64 {
        self.factors[..self.dim].iter().map(|f| f.omega).fold(0.0, f64::max)
    }
}

/// Spatial shape of a test-function term.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Scalar test function for the mass equation.
    Scalar(Separable),
    /// `phi = (d_y chi, -d_x chi)`, divergence free in 2D.
    Stream2(Separable),
    /// `phi = grad chi x axis`, divergence free in 3D.
    Curl3 { chi: Separable, axis: Vec3 },
    /// `phi_i = amp_i chi_i`.
    Components { parts: [Separable; 3], amp: Vec3 },
    Constant(Vec3),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeFactor {
    Const,
    /// `cos(omega t + phase)`
    Cos { omega: f64, phase: f64 },
}

impl TimeFactor {
    /// `(g(t), g'(t))`
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeFactor::Const => (1.0, 0.0),
            TimeFactor::Cos { omega, phase } => {
                let (s, c) = (omega * t + phase).sin_cos();
                (c, -omega * s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub time: TimeFactor,
    pub shape: Shape,
}

/// Spatial values of a term without its time factor and coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpatialEval {
    pub psi: f64,
    pub grad_psi: Vec3,
    pub phi: Vec3,
    pub grad_phi: Mat3,
    pub grad_div_phi: Vec3,
}

impl SpatialEval {
    pub fn div_phi(&self) -> f64 {
        self.grad_phi[0][0] + self.grad_phi[1][1] + self.grad_phi[2][2]
    }
}

impl Shape {
    pub fn is_vector(&self) -> bool {
        !matches!(self, Shape::Scalar(_))
    }

    /// `grad_phi[i][j] = d_j phi_i`.
    pub fn eval(&self, x: &Vec3) -> SpatialEval {
        let mut e = SpatialEval::default();
        match self {
            Shape::Scalar(s) => {
                let j = s.eval(x);
                e.psi = j.value;
                e.grad_psi = j.grad;
            }
            Shape::Stream2(s) => {
                let j = s.eval(x);
                e.phi = [j.grad[1], -j.grad[0], 0.0];
                for c in 0..2 {
                    e.grad_phi[0][c] = j.hess[1][c];
                    e.grad_phi[1][c] = -j.hess[0][c];
                }
            }
            Shape::Curl3 { chi, axis: a } => {
                let j = chi.eval(x);
                let g = j.grad;
                e.phi = [g[1] * a[2] - g[2] * a[1], g[2] * a[0] - g[0] * a[2], g[0] * a[1] - g[1] * a[0]];
                let h = j.hess;
                for l in 0..3 {
                    e.grad_phi[0][l] = h[1][l] * a[2] - h[2][l] * a[1];
                    e.grad_phi[1][l] = h[2][l] * a[0] - h[0][l] * a[2];
                    e.grad_phi[2][l] = h[0][l] * a[1] - h[1][l] * a[0];
                }
            }
            Shape::Components { parts, amp } => {
                let d = parts[0].dim;
                for i in 0..d {
                    let j = parts[i].eval(x);
                    e.phi[i] = amp[i] * j.value;
                    for l in 0..d {
                        e.grad_phi[i][l] = amp[i] * j.grad[l];
                        e.grad_div_phi[l] += amp[i] * j.hess[i][l];
                    }
                }
            }
            Shape::Constant(c) => e.phi = *c,
        }
        e
    }
}

/// Values of a full test function at `(x, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TestEval {
    pub psi: f64,
    pub dt_psi: f64,
    pub grad_psi: Vec3,
    pub phi: Vec3,
    pub dt_phi: Vec3,
    pub grad_phi: Mat3,
    pub div_phi: f64,
    pub grad_div_phi: Vec3,
}

impl TestEval {
    /// Accumulates `g * s` into the value slots and `dg * s` into the time
    /// derivative slots.
    pub fn accumulate(&mut self, s: &SpatialEval, g: f64, dg: f64) {
        self.psi += g * s.psi;
        self.dt_psi += dg * s.psi;
        for a in 0..3 {
            self.grad_psi[a] += g * s.grad_psi[a];
            self.phi[a] += g * s.phi[a];
            self.dt_phi[a] += dg * s.phi[a];
            self.grad_div_phi[a] += g * s.grad_div_phi[a];
            for b in 0..3 {
                self.grad_phi[a][b] += g * s.grad_phi[a][b];
            }
        }
        self.div_phi += g * s.div_phi();
    }
}

/// Space-time test pair `(psi, phi)` as a finite sum of separable terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TestFunction {
    pub terms: Vec<Term>,
}

impl TestFunction {
    pub fn zero() -> Self {
        TestFunction { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            t.coef *= alpha;
        }
        out
    }

    pub fn plus(&self, other: &TestFunction) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    /// Only the vector part.
    pub fn vector_part(&self) -> Self {
        TestFunction { terms: self.terms.iter().filter(|t| t.shape.is_vector()).cloned().collect() }
    }

    /// Only the scalar part.
    pub fn scalar_part(&self) -> Self {
        TestFunction { terms: self.terms.iter().filter(|t| !t.shape.is_vector()).cloned().collect() }
    }

    pub fn has_time_dependence(&self) -> bool {
        self.terms.iter().any(|t| t.coef != 0.0 && !matches!(t.time, TimeFactor::Const))
    }

    pub fn eval(&self, x: &Vec3, t: f64) -> TestEval {
        let mut out = TestEval::default();
        for term in &self.terms {
            let (g, dg) = term.time.eval(t);
            out.accumulate(&term.shape.eval(x), term.coef * g, term.coef * dg);
        }
        out
    }

    /// Spatial values of every term at every cell center, for repeated
    /// evaluation at many times.
    pub fn tabulate(&self, grid: &Grid) -> Tabulated {
        let centers = grid.centers();
        Tabulated {
            terms: self
                .terms
                .iter()
                .map(|t| (t.coef, t.time, centers.iter().map(|x| t.shape.eval(x)).collect()))
                .collect(),
            cells: centers.len(),
        }
    }
}

/// Cell-center table produced by [`TestFunction::tabulate`].
#[derive(Clone, Debug)]
pub struct Tabulated {
    terms: Vec<(f64, TimeFactor, Vec<SpatialEval>)>,
    cells: usize,
}

impl Tabulated {
    pub fn at(&self, t: f64) -> Vec<TestEval> {
        let mut out = vec![TestEval::default(); self.cells];
        for (coef, time, vals) in &self.terms {
            let (g, dg) = time.eval(t);
            for (o, v) in out.iter_mut().zip(vals) {
                o.accumulate(v, coef * g, coef * dg);
            }
        }
        out
    }
}

/// Constraint class of a battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Admissibility {
    /// `div phi = 0`, `phi . n = 0` on box faces, no scalar part.
    DivergenceFree,
    /// `phi . n = 0` on box faces, with scalar mass test functions.
    Tangential,
}

fn random_factor(rng: &mut ChaCha8Rng, grid: &Grid, axis: usize, bubble: bool, kmax: u32) -> Factor {
    let l = grid.extent()[axis];
    let k = rng.gen_range(0..=kmax) as f64;
    let omega = match grid.topology() {
        Topology::Torus => 2.0 * PI * k / l,
        Topology::Box => PI * k / l,
    };
    let phase = match grid.topology() {
        Topology::Torus => rng.gen_range(0.0..2.0 * PI),
        Topology::Box => rng.gen_range(0.0..PI),
    };
    let bubble_len = (bubble && grid.topology() == Topology::Box).then_some(l);
    Factor { omega, phase, bubble_len }
}

fn random_separable(rng: &mut ChaCha8Rng, grid: &Grid, bubble_axes: [bool; 3], nonconstant: bool) -> Separable {
    let d = grid.dim();
    loop {
        let mut factors = [Factor::ONE; 3];
        for a in 0..d {
            factors[a] = random_factor(rng, grid, a, bubble_axes[a], 3);
        }
        let s = Separable { dim: d, factors };
        let has_bubble = s.factors[..d].iter().any(|f| f.bubble_len.is_some());
        if !nonconstant || has_bubble || s.max_omega() > 0.0 {
            return s;
        }
    }
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn amplitude(rng: &mut ChaCha8Rng, omega: f64, power: i32) -> f64 {
    random_sign(rng) * rng.gen_range(0.5..1.0) / (1.0 + omega).powi(power)
}

fn divergence_free_shape(rng: &mut ChaCha8Rng, grid: &Grid) -> Option<(Shape, f64)> {
    let d = grid.dim();
    match d {
        1 => match grid.topology() {
            Topology::Torus => Some((Shape::Constant([1.0, 0.0, 0.0]), 1.0)),
            Topology::Box => None,
        },
        2 => {
            let chi = random_separable(rng, grid, [true; 3], true);
            let a = amplitude(rng, chi.max_omega(), 2);
            Some((Shape::Stream2(chi), a))
        }
        _ => {
            let chi = random_separable(rng, grid, [true; 3], true);
            let axis = crate::symcone::random_unit(3, rng);
            let a = amplitude(rng, chi.max_omega(), 2);
            Some((Shape::Curl3 { chi, axis }, a))
        }
    }
}

fn component_shape(rng: &mut ChaCha8Rng, grid: &Grid) -> (Shape, f64) {
    let d = grid.dim();
    let first = random_separable(rng, grid, [true, false, false], false);
    let mut parts = [first; 3];
    let mut omega = first.max_omega();
    for (i, part) in parts.iter_mut().enumerate().take(d).skip(1) {
        let mut mask = [false; 3];
        mask[i] = true;
        *part = random_separable(rng, grid, mask, false);
        omega = omega.max(part.max_omega());
    }
    let amp = crate::symcone::random_unit(d, rng);
    (Shape::Components { parts, amp }, amplitude(rng, omega, 1))
}

fn random_time(rng: &mut ChaCha8Rng, t_final: f64, force: bool) -> TimeFactor {
    if !force && rng.gen_bool(0.5) {
        TimeFactor::Const
    } else {
        let omega = if rng.gen_bool(0.5) { PI / t_final } else { 0.5 * PI / t_final };
        TimeFactor::Cos { omega, phase: rng.gen_range(0.0..2.0 * PI) }
    }
}

/// Deterministic battery of `size` admissible test functions. Member 0 is
/// the zero function and member 1 (if present) depends on time.
pub fn battery(
    admissibility: Admissibility,
    grid: &Grid,
    time: &TimeGrid,
    size: usize,
    seed: u64,
) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![TestFunction::zero()];
    for m in 1..size {
        let tf = random_time(&mut rng, time.t_final(), m == 1);
        let mut terms = Vec::new();
        match admissibility {
            Admissibility::DivergenceFree => {
                if let Some((shape, coef)) = divergence_free_shape(&mut rng, grid) {
                    terms.push(Term { coef, time: tf, shape });
                }
            }
            Admissibility::Tangential => {
                let (with_psi, with_phi) = match m % 3 {
                    1 => (true, true),
                    2 => (false, true),
                    _ => (true, false),
                };
                if with_phi {
                    let (shape, coef) = component_shape(&mut rng, grid);
                    terms.push(Term { coef, time: tf, shape });
                }
                if with_psi {
                    let chi = random_separable(&mut rng, grid, [false; 3], false);
                    let coef = amplitude(&mut rng, chi.max_omega(), 1);
                    terms.push(Term { coef, time: tf, shape: Shape::Scalar(chi) });
                }
            }
        }
        out.push(TestFunction { terms });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: &TestFunction, x: &Vec3, t: f64, dim: usize) -> Mat3 {
        let eps = 1e-6;
        let mut g = [[0.0; 3]; 3];
        for l in 0..dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[l] += eps;
            xm[l] -= eps;
            let (p, q) = (f.eval(&xp, t).phi, f.eval(&xm, t).phi);
            for i in 0..dim {
                g[i][l] = (p[i] - q[i]) / (2.0 * eps);
            }
        }
        g
    }

    #[test]
    fn analytic_gradients_match_differences() {
        let time = TimeGrid::new(1.0, 4).unwrap();
        for (dim, topo, adm) in [
            (2, Topology::Torus, Admissibility::DivergenceFree),
            (3, Topology::Box, Admissibility::DivergenceFree),
            (2, Topology::Box, Admissibility::Tangential),
            (3, Topology::Torus, Admissibility::Tangential),
        ] {
            let g = Grid::unit(dim, topo, 8);
            for f in battery(adm, &g, &time, 8, 5) {
                let x = [0.31, 0.62, 0.17];
                let e = f.eval(&x, 0.3);
                let n = numeric_grad(&f, &x, 0.3, dim);
                for i in 0..dim {
                    for l in 0..dim {
                        assert!((e.grad_phi[i][l] - n[i][l]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn size_one_is_zero() {
        let g = Grid::unit(2, Topology::Torus, 4);
        let time = TimeGrid::new(1.0, 2).unwrap();
        let b = battery(Admissibility::DivergenceFree, &g, &time, 1, 0);
        assert_eq!(b.len(), 1);
        assert!(b[0].is_zero());
    }
}
