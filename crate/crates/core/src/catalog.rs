//! Generators for example certificates with known verification outcomes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::certify::{DissWeakCert, EnVarCert, MvCert, MvSlice};
use crate::convert::ray_fan;
use crate::dmeasure::{Atom, DiscMeasure};
use crate::domain::{Field, Grid, ScalarField, TimeGrid, Topology, VectorField};
use crate::error::{Error, Result};
use crate::io::{Certificate, CertificateFile};
use crate::symcone::SymMat;
use crate::systems::{self, State, SystemKind, SystemSpec, Trajectory};

pub const NAMES: [&str; 5] = ["zero", "shear", "constant-state", "energy-jump", "poisson-mms"];

/// Named example as a file with its expected outcome.
pub fn example(name: &str, n: usize, t_final: f64, steps: usize) -> Result<CertificateFile> {
    let time = TimeGrid::new(t_final, steps)?;
    let (cert, expected) = match name {
        "zero" => (Certificate::DissWeak(zero(n, time)?), json!({"dissweak": "pass", "envar": "pass"})),
        "shear" => (Certificate::EnVar(shear(n, time)?), json!({"envar": "pass"})),
        "constant-state" => (Certificate::EnVar(constant_state(n, time)?), json!({"envar": "pass"})),
        "energy-jump" => (Certificate::EnVar(energy_jump(n, time, 1.0)?), json!({"envar": "pass", "strict": true})),
        "poisson-mms" => (Certificate::DissWeak(poisson_mms(n, time, 0.2)?), json!({"dissweak": "pass", "envar": "pass"})),
        other => return Err(Error::Input(format!("unknown example {other:?}; expected one of {NAMES:?}"))),
    };
    Ok(CertificateFile { cert, expected: Some(expected) })
}

fn constant_traj(sys: SystemSpec, grid: Grid, time: TimeGrid, state: State) -> Result<Trajectory> {
    Trajectory::new(sys, grid, time, vec![state; time.samples()])
}

/// Dissipative weak certificate with zero defects and `E = energy(state)`.
pub fn exact_dissweak(envar: EnVarCert) -> Result<DissWeakCert> {
    let grid = *envar.grid();
    let n = envar.time().samples();
    let r1 = vec![DiscMeasure::zero(grid); n];
    let r2 = envar.system().is_compressible().then(|| vec![DiscMeasure::zero(grid); n]);
    DissWeakCert::new(envar, r1, r2)
}

/// Certificate whose energy is exactly the state energy.
pub fn exact_envar(traj: Trajectory) -> Result<EnVarCert> {
    let e = traj.energies()?;
    EnVarCert::new(traj, e)
}

/// Incompressible zero flow on the unit 2D torus.
pub fn zero(n: usize, time: TimeGrid) -> Result<DissWeakCert> {
    let sys = SystemSpec::incompressible();
    let grid = Grid::unit(2, Topology::Torus, n);
    exact_dissweak(exact_envar(constant_traj(sys, grid, time, systems::zero_state(&sys, grid))?)?)
}

/// Stationary shear `v = (U(y), 0)` on the unit 2D torus.
pub fn shear(n: usize, time: TimeGrid) -> Result<EnVarCert> {
    let sys = SystemSpec::incompressible();
    let grid = Grid::unit(2, Topology::Torus, n);
    let v = Field::from_fn(grid, |x| [(2.0 * PI * x[1]).sin() + 0.5 * (4.0 * PI * x[1]).cos(), 0.0, 0.0]);
    exact_envar(constant_traj(sys, grid, time, State::Incompressible { v })?)
}

/// Dirac measure-valued certificate of a velocity trajectory.
pub fn dirac_mv(cert: &EnVarCert) -> Result<MvCert> {
    let grid = *cert.grid();
    let dim = grid.dim();
    let slices = cert
        .traj
        .states
        .iter()
        .map(|s| MvSlice {
            mean: s.momentum().clone(),
            cov: Field::filled(grid, SymMat::zeros(dim)),
            lambda: DiscMeasure::zero(grid),
            angles_ac: Vec::new(),
            angles_atoms: Vec::new(),
        })
        .collect();
    MvCert::new(grid, *cert.time(), slices)
}

/// Isentropic constant state with uniform momentum on the unit 2D torus.
pub fn constant_state(n: usize, time: TimeGrid) -> Result<EnVarCert> {
    let sys = SystemSpec::isentropic(1.4)?;
    let grid = Grid::unit(2, Topology::Torus, n);
    let state = State::Compressible { rho: Field::filled(grid, 1.5), m: Field::filled(grid, [0.3, -0.2, 0.0]) };
    exact_envar(constant_traj(sys, grid, time, state)?)
}

/// Constant state at rest in a box.
pub fn resting_state(sys: SystemSpec, grid: Grid, time: TimeGrid, rho: f64) -> Result<EnVarCert> {
    let state = if sys.is_compressible() {
        State::Compressible { rho: Field::filled(grid, rho), m: Field::filled(grid, [0.0; 3]) }
    } else {
        systems::zero_state(&sys, grid)
    };
    exact_envar(constant_traj(sys, grid, time, state)?)
}

/// `v = 0` in the unit square with `E = c`.
pub fn energy_jump(n: usize, time: TimeGrid, c: f64) -> Result<EnVarCert> {
    let sys = SystemSpec::incompressible();
    let grid = Grid::unit(2, Topology::Box, n);
    let traj = constant_traj(sys, grid, time, systems::zero_state(&sys, grid))?;
    EnVarCert::new(traj, vec![c; time.samples()])
}

/// The explicit defect `(2c / (d |Omega|)) I dx` for [`energy_jump`].
pub fn energy_jump_defect(cert: &EnVarCert) -> Result<DissWeakCert> {
    let grid = *cert.grid();
    let d = grid.dim();
    let r1 = cert
        .energy
        .iter()
        .map(|c| DiscMeasure::new(grid, vec![SymMat::identity(d).scale(2.0 * c / (d as f64 * grid.volume())); grid.len()], vec![]))
        .collect::<Result<_>>()?;
    DissWeakCert::new(cert.clone(), r1, None)
}

/// Steady Euler–Poisson state at rest in the unit square with density
/// `1 + eps cos(pi x)`, balanced by an isotropic sign-free defect.
pub fn poisson_mms(n: usize, time: TimeGrid, eps: f64) -> Result<DissWeakCert> {
    let sys = SystemSpec::poisson(2.0, 0.5)?;
    let grid = Grid::unit(2, Topology::Box, n);
    let rho: ScalarField = Field::from_fn(grid, |x| 1.0 + eps * (PI * x[0]).cos());
    let q = |x: f64| {
        let c = (PI * x).cos();
        eps / (PI * PI) * c + eps * eps / (2.0 * PI * PI) * c * c
    };
    let load: Vec<f64> = grid.centers().iter().zip(rho.values()).map(|(x, r)| r.powf(sys.gamma()) + q(x[0])).collect();
    let k = load.iter().sum::<f64>() / load.len() as f64;
    let f: Vec<f64> = load.iter().map(|l| k - l).collect();
    let state = State::Compressible { rho, m: Field::filled(grid, [0.0; 3]) };
    let traj = constant_traj(sys, grid, time, state)?;
    let base = traj.energies()?;
    let r1m = DiscMeasure::new(grid, f.iter().map(|v| SymMat::identity(2).scale(*v)).collect(), vec![])?;
    let budget = sys.defect_budget(&r1m, None);
    let energy = base.iter().map(|e| e + budget).collect();
    let n_s = time.samples();
    DissWeakCert::new(EnVarCert::new(traj, energy)?, vec![r1m; n_s], Some(vec![DiscMeasure::zero(grid); n_s]))
}

/// Seeded dissipative weak certificate on the unit 2D torus: a shear flow
/// driven by a `y`-dependent PSD defect built from fan directions.
///
/// Incompressible variant: isotropic terms and identity atoms are added on
/// top, which divergence-free tests cannot see. Isentropic variant
/// (`rho = 1`, `gamma = 1.4`): the scalar defect cancels the normal-stress
/// component so only the shear stress drives the flow.
pub fn sheared_defect(kind: SystemKind, seed: u64, n: usize, time: TimeGrid) -> Result<DissWeakCert> {
    let sys = match kind {
        SystemKind::IncompressibleEuler => SystemSpec::incompressible(),
        SystemKind::IsentropicEuler => SystemSpec::isentropic(1.4)?,
        other => return Err(Error::Unsupported(format!("no sheared generator for {other:?}"))),
    };
    let grid = Grid::unit(2, Topology::Torus, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fan = ray_fan(2, None, 0)?;

    // G(y) = sum_l beta_l (1 + cos(2 pi k_l y + theta_l)) n_l n_l^T
    let modes: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let beta = rng.gen_range(0.05..0.3);
            let k = rng.gen_range(1..=2) as f64;
            let theta = rng.gen_range(0.0..2.0 * PI);
            (beta, k, theta, fan[rng.gen_range(0..fan.len())])
        })
        .collect();
    let g_at = |y: f64| {
        let mut g = SymMat::zeros(2);
        for (beta, k, theta, u) in &modes {
            g = g.add(&SymMat::outer(2, u).scale(beta * (1.0 + (2.0 * PI * k * y + theta).cos())));
        }
        g
    };
    // d/dy G_12
    let dg12 = |y: f64| {
        modes.iter().map(|(beta, k, theta, u)| -beta * u[0] * u[1] * 2.0 * PI * k * (2.0 * PI * k * y + theta).sin()).sum::<f64>()
    };
    // a(t) = a0 + a1 t >= 0, A(t) = int_0^t a
    let a0 = rng.gen_range(0.2..1.0);
    let a1 = rng.gen_range(-0.15..0.15);
    let a = |t: f64| a0 + a1 * t;
    let big_a = |t: f64| a0 * t + 0.5 * a1 * t * t;
    let u_amp = rng.gen_range(0.3..1.0);
    let u_phase = rng.gen_range(0.0..2.0 * PI);
    let u0 = |y: f64| u_amp * (2.0 * PI * y + u_phase).sin();

    let (fx, fy, fphase, famp) = (rng.gen_range(1..=2) as f64, rng.gen_range(0..=2) as f64, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..0.3));
    let iso = |x: &[f64; 3]| famp * (1.0 + (2.0 * PI * (fx * x[0] + fy * x[1]) + fphase).cos());

    let mut states = Vec::new();
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let centers = grid.centers();
    let atom_x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0];
    let atom_w = rng.gen_range(0.0..0.2);
    for i in 0..time.samples() {
        let t = time.time(i);
        let vel: VectorField = Field::from_fn(grid, |x| [u0(x[1]) - big_a(t) * dg12(x[1]), 0.0, 0.0]);
        match kind {
            SystemKind::IncompressibleEuler => {
                let dens = centers.iter().map(|x| g_at(x[1]).scale(a(t)).add_identity(iso(x))).collect();
                let atoms = vec![Atom { x: atom_x, w: SymMat::identity(2).scale(a(t) * atom_w) }];
                r1.push(DiscMeasure::new(grid, dens, atoms)?);
                states.push(State::Incompressible { v: vel });
            }
            _ => {
                let g22max = modes.iter().map(|(beta, _, _, u)| 2.0 * beta * u[1] * u[1]).sum::<f64>();
                let k = a(t) * g22max + 2.0 * famp + 0.05;
                let mut dens = Vec::with_capacity(grid.len());
                let mut scal = Vec::with_capacity(grid.len());
                for x in &centers {
                    let g = g_at(x[1]).scale(a(t)).add_identity(iso(x));
                    scal.push(k - g.get(1, 1));
                    dens.push(g);
                }
                r1.push(DiscMeasure::new(grid, dens, vec![])?);
                r2.push(DiscMeasure::new(grid, scal, vec![])?);
                states.push(State::Compressible { rho: Field::filled(grid, 1.0), m: vel });
            }
        }
    }
    let traj = Trajectory::new(sys, grid, time, states)?;
    let base = traj.energies()?;
    let budget: Vec<f64> = (0..time.samples())
        .map(|i| sys.defect_budget(&r1[i], if sys.is_compressible() { Some(&r2[i]) } else { None }))
        .collect();
    let slack = rng.gen_range(0.0..0.05);
    let mut energy = vec![0.0; time.samples()];
    let mut running = f64::NEG_INFINITY;
    for i in (0..time.samples()).rev() {
        running = running.max(base[i] + budget[i]);
        energy[i] = running + slack;
    }
    let r2 = sys.is_compressible().then_some(r2);
    DissWeakCert::new(EnVarCert::new(traj, energy)?, r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds() {
        for name in NAMES {
            let f = example(name, 8, 1.0, 4).unwrap();
            assert!(f.expected.is_some());
        }
        assert!(example("nope", 8, 1.0, 4).is_err());
    }

    #[test]
    fn sheared_energy_is_nonincreasing_and_dominates() {
        let time = TimeGrid::new(1.0, 8).unwrap();
        for kind in [SystemKind::IncompressibleEuler, SystemKind::IsentropicEuler] {
            let c = sheared_defect(kind, 3, 16, time).unwrap();
            let base = c.envar.traj.energies().unwrap();
            for i in 0..9 {
                assert!(c.envar.energy[i] - base[i] >= c.budget(i) - 1e-12);
                if i > 0 {
                    assert!(c.envar.energy[i] <= c.envar.energy[i - 1]);
                }
            }
            if let Some(r2) = &c.r2 {
                assert!(r2.iter().all(|m| m.density().iter().all(|w| *w >= 0.0)));
            }
        }
    }
}
