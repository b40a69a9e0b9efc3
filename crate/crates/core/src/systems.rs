//! The four fluid systems: energies, the potential `eta`, regularity
//! weights and weak-form residuals.

use crate::dmeasure::DiscMeasure;
use crate::domain::{
    self, gradient, neumann_poisson_solve, Admissibility, Field, Grid, ScalarField, TestEval, TestFunction, TimeGrid,
    VectorField,
};
use crate::error::{Error, Result};
use crate::symcone::{MatCone, MatNormKind, SymMat, Vec3};

/// Densities below this count as vacuum.
pub const VACUUM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    IncompressibleEuler,
    IsentropicEuler,
    EulerKorteweg,
    EulerPoisson,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemSpec {
    kind: SystemKind,
    gamma: f64,
    alpha: f64,
}

impl SystemSpec {
    pub fn incompressible() -> Self {
        SystemSpec { kind: SystemKind::IncompressibleEuler, gamma: 0.0, alpha: 0.0 }
    }

    pub fn isentropic(gamma: f64) -> Result<Self> {
        Self::new(SystemKind::IsentropicEuler, gamma, 0.0)
    }

    pub fn korteweg(gamma: f64) -> Result<Self> {
        Self::new(SystemKind::EulerKorteweg, gamma, 0.0)
    }

    pub fn poisson(gamma: f64, alpha: f64) -> Result<Self> {
        Self::new(SystemKind::EulerPoisson, gamma, alpha)
    }

    pub fn new(kind: SystemKind, gamma: f64, alpha: f64) -> Result<Self> {
        if kind == SystemKind::IncompressibleEuler {
            return Ok(Self::incompressible());
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::Input(format!("adiabatic exponent must exceed 1, got {gamma}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Input(format!("friction must be nonnegative, got {alpha}")));
        }
        let alpha = if kind == SystemKind::EulerPoisson { alpha } else { 0.0 };
        Ok(SystemSpec { kind, gamma, alpha })
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn is_compressible(&self) -> bool {
        self.kind != SystemKind::IncompressibleEuler
    }

    pub fn admissibility(&self) -> Admissibility {
        if self.is_compressible() {
            Admissibility::Tangential
        } else {
            Admissibility::DivergenceFree
        }
    }

    pub fn battery(&self, grid: &Grid, time: &TimeGrid, size: usize, seed: u64) -> Vec<TestFunction> {
        domain::battery(self.admissibility(), grid, time, size, seed)
    }

    /// Cone the matrix defect must lie in.
    pub fn defect_cone(&self) -> MatCone {
        if self.kind == SystemKind::EulerPoisson {
            MatCone::FullSym
        } else {
            MatCone::Psd
        }
    }

    /// Norm and factor `c` such that the matrix part of the defect budget
    /// is `c * |r1|_norm`.
    pub fn budget_norm(&self) -> (MatNormKind, f64) {
        match self.kind {
            SystemKind::EulerKorteweg => (MatNormKind::MMax, 1.0),
            _ => (MatNormKind::Trace, 0.5),
        }
    }

    /// Factor in front of the scalar defect in the budget.
    pub fn scalar_budget_factor(&self) -> f64 {
        1.0 / (self.gamma - 1.0)
    }

    /// Left side of the defect-budget inequality.
    pub fn defect_budget(&self, r1: &DiscMeasure<SymMat>, r2: Option<&DiscMeasure<f64>>) -> f64 {
        let (kind, c) = self.budget_norm();
        let mut b = c * r1.total_variation(kind);
        if let (true, Some(r2)) = (self.is_compressible(), r2) {
            b += self.scalar_budget_factor() * r2.total_variation();
        }
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Incompressible { v: VectorField },
    Compressible { rho: ScalarField, m: VectorField },
}

impl State {
    pub fn grid(&self) -> &Grid {
        match self {
            State::Incompressible { v } => v.grid(),
            State::Compressible { rho, .. } => rho.grid(),
        }
    }

    /// Velocity for incompressible states, momentum otherwise.
    pub fn momentum(&self) -> &VectorField {
        match self {
            State::Incompressible { v } => v,
            State::Compressible { m, .. } => m,
        }
    }

    pub fn density(&self) -> Option<&ScalarField> {
        match self {
            State::Incompressible { .. } => None,
            State::Compressible { rho, .. } => Some(rho),
        }
    }

    pub fn check(&self, system: &SystemSpec) -> Result<()> {
        match (self, system.is_compressible()) {
            (State::Incompressible { v }, false) => {
                if v.values().iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Input("non-finite velocity".into()));
                }
                Ok(())
            }
            (State::Compressible { rho, m }, true) => {
                rho.grid().check_same(m.grid())?;
                for (c, (r, mm)) in rho.values().iter().zip(m.values()).enumerate() {
                    if !r.is_finite() || mm.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Input(format!("non-finite state at cell {c}")));
                    }
                    if *r < 0.0 {
                        return Err(Error::Input(format!("negative density {r} at cell {c}")));
                    }
                }
                Ok(())
            }
            _ => Err(Error::Input("state does not match the system".into())),
        }
    }
}

/// `|m|^2 / (2 rho) + rho^gamma / (gamma - 1)`, extended by 0 at `(0, 0)` and
/// `+inf` on vacuum with nonzero momentum.
pub fn eta(rho: f64, m: &Vec3, gamma: f64) -> Result<f64> {
    if rho < 0.0 || rho.is_nan() {
        return Err(Error::Input(format!("negative density {rho}")));
    }
    let m2 = domain::norm_sq(m);
    if rho < VACUUM {
        return Ok(if m2.sqrt() < VACUUM { 0.0 } else { f64::INFINITY });
    }
    Ok(0.5 * m2 / rho + rho.powf(gamma) / (gamma - 1.0))
}

/// Quantities derived from a state that several functionals share.
#[derive(Clone, Debug)]
pub struct Derived {
    pub grad_rho: Option<Vec<Vec3>>,
    pub potential: Option<Vec<f64>>,
    pub grad_potential: Option<Vec<Vec3>>,
    pub mean_rho: f64,
}

pub fn derive(system: &SystemSpec, state: &State) -> Derived {
    let mut d = Derived { grad_rho: None, potential: None, grad_potential: None, mean_rho: 0.0 };
    if let Some(rho) = state.density() {
        d.mean_rho = domain::mean(rho);
        match system.kind {
            SystemKind::EulerKorteweg => d.grad_rho = Some(gradient(rho).into_values()),
            SystemKind::EulerPoisson => {
                let v = neumann_poisson_solve(rho);
                d.grad_potential = Some(gradient(&v).into_values());
                d.potential = Some(v.into_values());
            }
            _ => {}
        }
    }
    d
}

pub fn energy(system: &SystemSpec, state: &State) -> Result<f64> {
    energy_with(system, state, &derive(system, state))
}

pub fn energy_with(system: &SystemSpec, state: &State, derived: &Derived) -> Result<f64> {
    state.check(system)?;
    let grid = state.grid();
    let vol = grid.cell_volume();
    match state {
        State::Incompressible { v } => Ok(0.5 * v.values().iter().map(domain::norm_sq).sum::<f64>() * vol),
        State::Compressible { rho, m } => {
            let mut acc = 0.0;
            for (r, mm) in rho.values().iter().zip(m.values()) {
                acc += eta(*r, mm, system.gamma)?;
            }
            if let Some(g) = &derived.grad_rho {
                acc += 0.5 * g.iter().map(domain::norm_sq).sum::<f64>();
            }
            if let Some(g) = &derived.grad_potential {
                acc += 0.5 * g.iter().map(domain::norm_sq).sum::<f64>();
            }
            Ok(acc * vol)
        }
    }
}

/// `int alpha |m|^2 / rho`, the friction dissipation rate (zero unless
/// the system has friction).
pub fn friction_rate(system: &SystemSpec, state: &State) -> Result<f64> {
    if system.alpha == 0.0 {
        return Ok(0.0);
    }
    let State::Compressible { rho, m } = state else {
        return Ok(0.0);
    };
    let mut acc = 0.0;
    for (c, (r, mm)) in rho.values().iter().zip(m.values()).enumerate() {
        acc += kinetic_ratio(*r, mm, c)?;
    }
    Ok(system.alpha * acc * rho.grid().cell_volume())
}

/// `|m|^2 / rho` with the vacuum convention.
fn kinetic_ratio(rho: f64, m: &Vec3, cell: usize) -> Result<f64> {
    let m2 = domain::norm_sq(m);
    if rho < VACUUM {
        if m2.sqrt() >= VACUUM {
            return Err(Error::InfiniteFlux { cell, momentum: m2.sqrt() });
        }
        return Ok(0.0);
    }
    Ok(m2 / rho)
}

/// Pointwise suprema that the regularity weights are built from.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientSups {
    /// sup of the spectral norm of the negative part of `(grad phi)_sym`
    pub neg: f64,
    /// same for the positive part
    pub pos: f64,
    /// sup of the spectral norm of `(grad phi)_sym`
    pub sym: f64,
    /// sup of `(div phi)_-`
    pub div_neg: f64,
}

impl GradientSups {
    pub fn from_evals(dim: usize, evals: &[TestEval]) -> Self {
        let mut s = GradientSups::default();
        for e in evals {
            let a = SymMat::from_full(dim, &e.grad_phi);
            let ev = a.eigenvalues();
            let (hi, lo) = (ev[0], ev[dim - 1]);
            s.neg = s.neg.max((-lo).max(0.0));
            s.pos = s.pos.max(hi.max(0.0));
            s.sym = s.sym.max(hi.abs().max(lo.abs()));
            s.div_neg = s.div_neg.max((-e.div_phi).max(0.0));
        }
        s
    }
}

/// Regularity weight from precomputed suprema; `finer` selects the sharper
/// Poisson weight.
pub fn regweight_from_sups(system: &SystemSpec, dim: usize, s: &GradientSups, finer: bool) -> f64 {
    let g1 = system.gamma - 1.0;
    match system.kind {
        SystemKind::IncompressibleEuler => 2.0 * s.neg,
        SystemKind::IsentropicEuler => (2.0 * s.neg).max(g1 * s.div_neg),
        SystemKind::EulerKorteweg => (2.0 * s.neg + s.div_neg).max(g1 * s.div_neg),
        SystemKind::EulerPoisson => {
            if finer {
                (2.0 * s.neg).max(2.0 * s.pos + s.div_neg).max(g1 * s.div_neg)
            } else {
                ((2.0 + dim as f64) * s.sym).max(g1 * s.div_neg)
            }
        }
    }
}

/// Regularity weight of `phi(., t)`, sup over cell centers.
pub fn regweight(system: &SystemSpec, phi: &TestFunction, grid: &Grid, t: f64, finer: bool) -> f64 {
    let evals: Vec<TestEval> = grid.centers().iter().map(|x| phi.eval(x, t)).collect();
    regweight_from_sups(system, grid.dim(), &GradientSups::from_evals(grid.dim(), &evals), finer)
}

/// Instantaneous spatial integrals at one sample time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Instant {
    /// `int rho psi`
    pub mass_boundary: f64,
    /// `int rho d_t psi + m . grad psi`
    pub mass_flux: f64,
    /// `int m . phi` (velocity for incompressible)
    pub momentum_boundary: f64,
    /// `int m . d_t phi + flux : grad phi + system terms`
    pub momentum_flux: f64,
    /// largest absolute contribution, for tolerance scaling
    pub magnitude: f64,
}

/// Spatial integrals of the weak forms for one state and one set of cell
/// evaluations of the test function. `time_part` toggles the `d_t` terms.
pub fn instant(system: &SystemSpec, state: &State, derived: &Derived, evals: &[TestEval], time_part: bool) -> Result<Instant> {
    let grid = state.grid();
    let vol = grid.cell_volume();
    let dim = grid.dim();
    let dt = if time_part { 1.0 } else { 0.0 };
    let mut out = Instant::default();
    let mut mag = 0.0f64;
    match state {
        State::Incompressible { v } => {
            for (vv, e) in v.values().iter().zip(evals) {
                out.momentum_boundary += domain::dot(vv, &e.phi);
                let conv = quad_form_full(vv, &e.grad_phi, dim);
                let a = dt * domain::dot(vv, &e.dt_phi);
                out.momentum_flux += a + conv;
                mag = mag.max(a.abs()).max(conv.abs());
            }
        }
        State::Compressible { rho, m } => {
            let gamma = system.gamma;
            for (c, ((r, mm), e)) in rho.values().iter().zip(m.values()).zip(evals).enumerate() {
                out.mass_boundary += r * e.psi;
                out.mass_flux += dt * r * e.dt_psi + domain::dot(mm, &e.grad_psi);
                out.momentum_boundary += domain::dot(mm, &e.phi);
                let conv = if *r < VACUUM {
                    if domain::norm_sq(mm).sqrt() >= VACUUM {
                        return Err(Error::InfiniteFlux { cell: c, momentum: domain::norm_sq(mm).sqrt() });
                    }
                    0.0
                } else {
                    quad_form_full(mm, &e.grad_phi, dim) / r
                };
                let pressure = r.max(0.0).powf(gamma) * e.div_phi;
                let mut extra = 0.0;
                if let Some(g) = &derived.grad_rho {
                    let gr = &g[c];
                    extra += r * domain::dot(gr, &e.grad_div_phi)
                        + 0.5 * domain::norm_sq(gr) * e.div_phi
                        + quad_form_full(gr, &e.grad_phi, dim);
                }
                if let (Some(v), Some(gv)) = (&derived.potential, &derived.grad_potential) {
                    let gv = &gv[c];
                    extra += -system.alpha * domain::dot(mm, &e.phi)
                        + (0.5 * domain::norm_sq(gv) + derived.mean_rho * v[c]) * e.div_phi
                        - quad_form_full(gv, &e.grad_phi, dim);
                }
                let a = dt * domain::dot(mm, &e.dt_phi);
                out.momentum_flux += a + conv + pressure + extra;
                mag = mag.max(a.abs()).max(conv.abs()).max(pressure.abs()).max(extra.abs());
            }
        }
    }
    out.mass_boundary *= vol;
    out.mass_flux *= vol;
    out.momentum_boundary *= vol;
    out.momentum_flux *= vol;
    out.magnitude = (mag * grid.volume())
        .max(out.mass_boundary.abs())
        .max(out.mass_flux.abs())
        .max(out.momentum_boundary.abs())
        .max(out.momentum_flux.abs());
    Ok(out)
}

/// `u^T G u = u (x) u : G`
fn quad_form_full(u: &Vec3, g: &[[f64; 3]; 3], dim: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += u[i] * g[i][j] * u[j];
        }
    }
    acc
}

/// States on every sample of a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub system: SystemSpec,
    pub grid: Grid,
    pub time: TimeGrid,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn new(system: SystemSpec, grid: Grid, time: TimeGrid, states: Vec<State>) -> Result<Self> {
        if states.len() != time.samples() {
            return Err(Error::Input(format!("{} states for {} time samples", states.len(), time.samples())));
        }
        for s in &states {
            s.grid().check_same(&grid)?;
            s.check(&system)?;
        }
        Ok(Trajectory { system, grid, time, states })
    }

    pub fn derived(&self) -> Vec<Derived> {
        self.states.iter().map(|s| derive(&self.system, s)).collect()
    }

    pub fn energies(&self) -> Result<Vec<f64>> {
        self.states.iter().map(|s| energy(&self.system, s)).collect()
    }

    /// Instantaneous integrals for a test function at every sample time.
    pub fn instants(&self, f: &TestFunction, derived: &[Derived]) -> Result<Vec<Instant>> {
        let table = f.tabulate(&self.grid);
        self.states
            .iter()
            .zip(derived)
            .enumerate()
            .map(|(i, (s, d))| instant(&self.system, s, d, &table.at(self.time.time(i)), true))
            .collect()
    }
}

/// Window sums over sample pairs from per-sample data.
#[derive(Clone, Debug)]
pub struct Windows {
    boundary: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Windows {
    pub fn new(time: &TimeGrid, boundary: Vec<f64>, rate: &[f64]) -> Self {
        Windows { cumulative: time.cumulative_trapezoid(rate), boundary }
    }

    /// `-[boundary]_s^t + int_s^t rate`
    pub fn residual(&self, s: usize, t: usize) -> f64 {
        -(self.boundary[t] - self.boundary[s]) + (self.cumulative[t] - self.cumulative[s])
    }

    pub fn integral(&self, s: usize, t: usize) -> f64 {
        self.cumulative[t] - self.cumulative[s]
    }
}

/// `-int rho psi |_s^t + int_s^t int rho d_t psi + m . grad psi`.
pub fn mass_residual(traj: &Trajectory, psi: &TestFunction, s: usize, t: usize) -> Result<f64> {
    if !traj.system.is_compressible() {
        return Err(Error::Input("the incompressible system has no mass equation".into()));
    }
    check_pair(traj, s, t)?;
    let inst = traj.instants(&psi.scalar_part(), &traj.derived())?;
    let w = Windows::new(
        &traj.time,
        inst.iter().map(|i| i.mass_boundary).collect(),
        &inst.iter().map(|i| i.mass_flux).collect::<Vec<_>>(),
    );
    Ok(w.residual(s, t))
}

/// Weak momentum balance without defect terms.
pub fn momentum_residual(traj: &Trajectory, phi: &TestFunction, s: usize, t: usize) -> Result<f64> {
    check_pair(traj, s, t)?;
    let inst = traj.instants(&phi.vector_part(), &traj.derived())?;
    let w = Windows::new(
        &traj.time,
        inst.iter().map(|i| i.momentum_boundary).collect(),
        &inst.iter().map(|i| i.momentum_flux).collect::<Vec<_>>(),
    );
    Ok(w.residual(s, t))
}

fn check_pair(traj: &Trajectory, s: usize, t: usize) -> Result<()> {
    if s < t && t < traj.time.samples() {
        Ok(())
    } else {
        Err(Error::Input(format!("invalid sample pair ({s}, {t})")))
    }
}

/// Zero state for a system on a grid.
pub fn zero_state(system: &SystemSpec, grid: Grid) -> State {
    if system.is_compressible() {
        State::Compressible { rho: Field::filled(grid, 0.0), m: Field::filled(grid, [0.0; 3]) }
    } else {
        State::Incompressible { v: Field::filled(grid, [0.0; 3]) }
    }
}
