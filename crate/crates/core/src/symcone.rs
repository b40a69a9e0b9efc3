//! Small symmetric matrices, their spectral norms, and the matrix cones used
//! for defect measures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
/// General square matrix; only the leading `d x d` block is meaningful.
pub type Mat3 = [[f64; 3]; 3];

/// Symmetric `d x d` matrix with `d` in 1..=3, stored as a full 3x3 block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    dim: usize,
    m: Mat3,
}

/// Eigenvalues (descending) with orthonormal eigenvectors as columns.
#[derive(Clone, Copy, Debug)]
pub struct Eigen {
    pub dim: usize,
    pub values: Vec3,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: [Vec3; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatNormKind {
    Spectral,
    Trace,
    Frobenius,
    /// `max(trace / 2, spectral)`
    MMax,
    /// `2 * spectral + trace`
    MDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatCone {
    Psd,
    Nsd,
    IdentityRay,
    FullSym,
}

/// Polar of a [`MatCone`]. Two of the polars are not cones of the same
/// family, so they are carried as predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolarCone {
    Psd,
    Nsd,
    /// `{0}`
    Zero,
    /// `{S : tr S <= 0}`
    TraceNonpositive,
}

/// Output of [`sym_split`].
#[derive(Clone, Copy, Debug)]
pub struct SymSplit {
    pub pos: SymMat,
    pub neg: SymMat,
    pub dev: SymMat,
}

const JACOBI_TOL: f64 = 1e-13;
const TIE_TOL: f64 = 1e-14;

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Input(format!("matrix dimension {dim} not in 1..=3")))
    }
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension {dim} not in 1..=3");
        SymMat { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.m[i][i] = 1.0;
        }
        s
    }

    /// Symmetric part of the leading block of `a`.
    pub fn from_full(dim: usize, a: &Mat3) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.m[i][j] = 0.5 * (a[i][j] + a[j][i]);
            }
        }
        s
    }

    /// Builds from row-major upper-triangle entries (`d(d+1)/2` values).
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let n = dim * (dim + 1) / 2;
        if upper.len() != n {
            return Err(Error::Input(format!(
                "expected {n} upper-triangle entries for d = {dim}, got {}",
                upper.len()
            )));
        }
        let mut s = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                s.m[i][j] = upper[k];
                s.m[j][i] = upper[k];
                k += 1;
            }
        }
        Ok(s)
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(self.m[i][j]);
            }
        }
        out
    }

    /// `u u^T`
    pub fn outer(dim: usize, u: &Vec3) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.m[i][j] = u[i] * u[j];
            }
        }
        s
    }

    /// `sum_k values[k] * v_k v_k^T`
    pub fn from_eigen(dim: usize, values: &Vec3, vectors: &[Vec3; 3]) -> Self {
        let mut s = Self::zeros(dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    s.m[i][j] += values[k] * vectors[k][i] * vectors[k][j];
                }
            }
        }
        s.symmetrize();
        s
    }

    fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let a = 0.5 * (self.m[i][j] + self.m[j][i]);
                self.m[i][j] = a;
                self.m[j][i] = a;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn as_array(&self) -> &Mat3 {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    /// Frobenius inner product `A : B`.
    pub fn frob(&self, other: &SymMat) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.m[i][j] * other.m[i][j];
            }
        }
        acc
    }

    /// `A : G` against a general matrix.
    pub fn frob_full(&self, g: &Mat3) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.m[i][j] * g[i][j];
            }
        }
        acc
    }

    /// `u^T A u`
    pub fn quad_form(&self, u: &Vec3) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += u[i] * self.m[i][j] * u[j];
            }
        }
        acc
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        let mut s = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.m[i][j] += other.m[i][j];
            }
        }
        s
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, a: f64) -> SymMat {
        let mut s = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s.m[i][j] *= a;
            }
        }
        s
    }

    pub fn add_identity(&self, a: f64) -> SymMat {
        let mut s = *self;
        for i in 0..self.dim {
            s.m[i][i] += a;
        }
        s
    }

    pub fn max_abs_entry(&self) -> f64 {
        let mut mx = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                mx = mx.max(self.m[i][j].abs());
            }
        }
        mx
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.m[i][j].is_finite()))
    }

    pub fn eigen(&self) -> Eigen {
        let (values, vectors) = match self.dim {
            1 => ([self.m[0][0], 0.0, 0.0], [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]),
            2 => eigen2(&self.m),
            _ => jacobi3(&self.m),
        };
        order_eigenpairs(self.dim, values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec3 {
        self.eigen().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values[self.dim - 1]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().values[0]
    }

    pub fn norm(&self, kind: MatNormKind) -> f64 {
        norm_of_eigenvalues(&self.eigenvalues()[..self.dim], kind)
    }

    /// Keeps eigenvalues for which `keep` holds, zeroes the rest.
    fn clip(&self, keep: impl Fn(f64) -> bool) -> SymMat {
        let e = self.eigen();
        let mut vals = e.values;
        for v in vals.iter_mut().take(self.dim) {
            if !keep(*v) {
                *v = 0.0;
            }
        }
        SymMat::from_eigen(self.dim, &vals, &e.vectors)
    }

    pub fn positive_part(&self) -> SymMat {
        self.clip(|v| v > 0.0)
    }

    pub fn negative_part(&self) -> SymMat {
        self.clip(|v| v < 0.0)
    }
}

/// Norm of a symmetric matrix given its eigenvalues.
pub fn norm_of_eigenvalues(vals: &[f64], kind: MatNormKind) -> f64 {
    let spectral = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let trace: f64 = vals.iter().map(|v| v.abs()).sum();
    match kind {
        MatNormKind::Spectral => spectral,
        MatNormKind::Trace => trace,
        MatNormKind::Frobenius => vals.iter().map(|v| v * v).sum::<f64>().sqrt(),
        MatNormKind::MMax => (0.5 * trace).max(spectral),
        MatNormKind::MDual => 2.0 * spectral + trace,
    }
}

pub fn mat_norm(a: &SymMat, kind: MatNormKind) -> f64 {
    a.norm(kind)
}

pub fn dual_norm_kind(kind: MatNormKind) -> MatNormKind {
    match kind {
        MatNormKind::Spectral => MatNormKind::Trace,
        MatNormKind::Trace => MatNormKind::Spectral,
        MatNormKind::Frobenius => MatNormKind::Frobenius,
        MatNormKind::MMax => MatNormKind::MDual,
        MatNormKind::MDual => MatNormKind::MMax,
    }
}

fn eigen2(m: &Mat3) -> (Vec3, [Vec3; 3]) {
    let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    let l1 = a * co * co + 2.0 * b * s * co + c * s * s;
    let l2 = a * s * s - 2.0 * b * s * co + c * co * co;
    (
        [l1, l2, 0.0],
        [[co, s, 0.0], [-s, co, 0.0], [0.0; 3]],
    )
}

fn jacobi3(m: &Mat3) -> (Vec3, [Vec3; 3]) {
    let mut a = *m;
    let mut v: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..64 {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= JACOBI_TOL * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
            let t = if tau == 0.0 { 1.0 } else { t };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let vals = [a[0][0], a[1][1], a[2][2]];
    let vecs = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    (vals, vecs)
}

fn sign_normalize(u: &mut Vec3, dim: usize) {
    for i in 0..dim {
        if u[i].abs() > TIE_TOL {
            if u[i] < 0.0 {
                for x in u.iter_mut().take(dim) {
                    *x = -*x;
                }
            }
            return;
        }
    }
}

fn order_eigenpairs(dim: usize, values: Vec3, vectors: [Vec3; 3]) -> Eigen {
    let mut pairs: Vec<(f64, Vec3)> = (0..dim).map(|k| (values[k], vectors[k])).collect();
    for p in pairs.iter_mut() {
        sign_normalize(&mut p.1, dim);
    }
    let scale = pairs.iter().fold(1.0f64, |a, p| a.max(p.0.abs()));
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= TIE_TOL * scale {
            // ties: lexicographically descending components
            for i in 0..dim {
                if (a.1[i] - b.1[i]).abs() > TIE_TOL {
                    return b.1[i].partial_cmp(&a.1[i]).unwrap();
                }
            }
            std::cmp::Ordering::Equal
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    });
    let mut e = Eigen { dim, values: [0.0; 3], vectors: [[0.0; 3]; 3] };
    for (k, (val, vec)) in pairs.into_iter().enumerate() {
        e.values[k] = val;
        e.vectors[k] = vec;
    }
    e
}

/// Symmetric, positive, negative and deviatoric parts of a general matrix.
pub fn sym_split(dim: usize, a: &Mat3) -> SymSplit {
    let sym = SymMat::from_full(dim, a);
    let pos = sym.positive_part();
    let neg = sym.negative_part();
    let dev = sym.add_identity(-sym.trace() / dim as f64);
    SymSplit { pos, neg, dev }
}

impl MatCone {
    pub fn contains(&self, a: &SymMat, tol: f64) -> bool {
        match self {
            MatCone::Psd => a.min_eigenvalue() >= -tol,
            MatCone::Nsd => a.max_eigenvalue() <= tol,
            MatCone::IdentityRay => {
                let t = a.trace() / a.dim() as f64;
                t >= -tol && a.add_identity(-t).max_abs_entry() <= tol
            }
            MatCone::FullSym => true,
        }
    }

    /// Frobenius-nearest point of the cone.
    pub fn project(&self, a: &SymMat) -> SymMat {
        match self {
            MatCone::Psd => a.positive_part(),
            MatCone::Nsd => a.negative_part(),
            MatCone::IdentityRay => {
                let t = (a.trace() / a.dim() as f64).max(0.0);
                SymMat::identity(a.dim()).scale(t)
            }
            MatCone::FullSym => *a,
        }
    }

    /// Scalar (1x1) membership.
    pub fn contains_scalar(&self, a: f64, tol: f64) -> bool {
        match self {
            MatCone::Psd | MatCone::IdentityRay => a >= -tol,
            MatCone::Nsd => a <= tol,
            MatCone::FullSym => true,
        }
    }
}

pub fn project_cone(a: &SymMat, cone: MatCone) -> SymMat {
    cone.project(a)
}

pub fn polar_cone(cone: MatCone) -> PolarCone {
    match cone {
        MatCone::Psd => PolarCone::Nsd,
        MatCone::Nsd => PolarCone::Psd,
        MatCone::IdentityRay => PolarCone::TraceNonpositive,
        MatCone::FullSym => PolarCone::Zero,
    }
}

impl PolarCone {
    pub fn contains(&self, a: &SymMat, tol: f64) -> bool {
        match self {
            PolarCone::Psd => a.min_eigenvalue() >= -tol,
            PolarCone::Nsd => a.max_eigenvalue() <= tol,
            PolarCone::Zero => a.max_abs_entry() <= tol,
            PolarCone::TraceNonpositive => a.trace() <= tol,
        }
    }

    pub fn project(&self, a: &SymMat) -> SymMat {
        match self {
            PolarCone::Psd => a.positive_part(),
            PolarCone::Nsd => a.negative_part(),
            PolarCone::Zero => SymMat::zeros(a.dim()),
            PolarCone::TraceNonpositive => {
                let t = (a.trace() / a.dim() as f64).max(0.0);
                a.add_identity(-t)
            }
        }
    }

    /// Random member. Half of the draws are extreme rays where the set has
    /// them.
    pub fn sample<R: Rng>(&self, dim: usize, rng: &mut R) -> SymMat {
        match self {
            PolarCone::Zero => SymMat::zeros(dim),
            PolarCone::Psd => sample_psd(dim, rng),
            PolarCone::Nsd => sample_psd(dim, rng).scale(-1.0),
            PolarCone::TraceNonpositive => {
                let s = random_sym(dim, rng);
                let shift = s.trace() / dim as f64 + rng.gen::<f64>();
                s.add_identity(-shift)
            }
        }
    }

    /// Random scalar member when the weights are 1x1.
    pub fn sample_scalar<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.gen::<f64>();
        match self {
            PolarCone::Zero => 0.0,
            PolarCone::Psd => z,
            PolarCone::Nsd | PolarCone::TraceNonpositive => -z,
        }
    }
}

fn sample_psd<R: Rng>(dim: usize, rng: &mut R) -> SymMat {
    if rng.gen_bool(0.5) {
        SymMat::outer(dim, &random_unit(dim, rng))
    } else {
        let mut g = [[0.0; 3]; 3];
        for row in g.iter_mut().take(dim) {
            for x in row.iter_mut().take(dim) {
                *x = gaussian(rng);
            }
        }
        let mut s = SymMat::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                s.m[i][j] = (0..dim).map(|k| g[i][k] * g[j][k]).sum();
            }
        }
        let n = s.norm(MatNormKind::Spectral).max(f64::MIN_POSITIVE);
        s.scale(1.0 / n)
    }
}

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec3 {
    loop {
        let mut u = [0.0; 3];
        for x in u.iter_mut().take(dim) {
            *x = gaussian(rng);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return [u[0] / n, u[1] / n, u[2] / n];
        }
    }
}

/// Symmetric matrix with independent standard normal upper entries.
pub fn random_sym<R: Rng>(dim: usize, rng: &mut R) -> SymMat {
    let mut s = SymMat::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let g = gaussian(rng);
            s.m[i][j] = g;
            s.m[j][i] = g;
        }
    }
    s
}

/// Haar-ish random rotation from Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> [Vec3; 3] {
    let mut q = [[0.0; 3]; 3];
    let mut k = 0;
    while k < dim {
        let mut u = random_unit(dim, rng);
        for prev in q.iter().take(k) {
            let d: f64 = (0..dim).map(|i| u[i] * prev[i]).sum();
            for i in 0..dim {
                u[i] -= d * prev[i];
            }
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            for x in u.iter_mut() {
                *x /= n;
            }
            q[k] = u;
            k += 1;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_eigen_is_sorted() {
        let a = SymMat::from_upper(3, &[1.0, 0.0, 0.0, 3.0, 0.0, 2.0]).unwrap();
        let e = a.eigen();
        assert_eq!(&e.values, &[3.0, 2.0, 1.0]);
        assert_eq!(e.vectors[0], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_ties_give_standard_basis() {
        let e = SymMat::identity(3).eigen();
        assert_eq!(e.vectors[0], [1.0, 0.0, 0.0]);
        assert_eq!(e.vectors[1], [0.0, 1.0, 0.0]);
        assert_eq!(e.vectors[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn reconstruction_from_eigenpairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=3 {
            for _ in 0..200 {
                let a = random_sym(dim, &mut rng);
                let e = a.eigen();
                let b = SymMat::from_eigen(dim, &e.values, &e.vectors);
                assert!(a.sub(&b).max_abs_entry() < 1e-12);
                for k in 1..dim {
                    assert!(e.values[k - 1] >= e.values[k]);
                }
            }
        }
    }

    #[test]
    fn norms_of_known_matrix() {
        let a = SymMat::from_upper(2, &[2.0, 0.0, -1.0]).unwrap();
        assert_eq!(a.norm(MatNormKind::Spectral), 2.0);
        assert_eq!(a.norm(MatNormKind::Trace), 3.0);
        assert_eq!(a.norm(MatNormKind::MMax), 2.0);
        assert_eq!(a.norm(MatNormKind::MDual), 7.0);
        assert!((a.norm(MatNormKind::Frobenius) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn upper_round_trip_and_bad_length() {
        let a = SymMat::from_upper(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.upper(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(SymMat::from_upper(2, &[1.0]).is_err());
        assert!(SymMat::from_upper(4, &[1.0]).is_err());
    }

    #[test]
    fn identity_ray_projection_clips_negative_trace() {
        let a = SymMat::from_upper(2, &[-1.0, 5.0, -1.0]).unwrap();
        let p = MatCone::IdentityRay.project(&a);
        assert_eq!(p.max_abs_entry(), 0.0);
        let b = SymMat::from_upper(2, &[3.0, 5.0, 1.0]).unwrap();
        let q = MatCone::IdentityRay.project(&b);
        assert_eq!(q, SymMat::identity(2).scale(2.0));
    }

    #[test]
    fn sym_split_parts() {
        let a: Mat3 = [[1.0, 2.0, 0.0], [0.0, -3.0, 0.0], [0.0; 3]];
        let s = sym_split(2, &a);
        let sym = SymMat::from_full(2, &a);
        assert!(s.pos.add(&s.neg).sub(&sym).max_abs_entry() < 1e-12);
        assert!(s.dev.trace().abs() < 1e-14);
        assert!(MatCone::Psd.contains(&s.pos, 1e-12));
        assert!(MatCone::Nsd.contains(&s.neg, 1e-12));
    }
}
