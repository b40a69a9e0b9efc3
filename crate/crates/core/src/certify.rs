//! Certificates for the three solution concepts and their verification
//! against a test battery.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmeasure::DiscMeasure;
use crate::domain::{self, Admissibility, Field, Grid, TestEval, TestFunction, TimeGrid, VectorField};
use crate::error::{Error, Result};
use crate::symcone::{MatCone, SymMat, Vec3};
use crate::systems::{
    self, instant, regweight_from_sups, Derived, GradientSups, Instant, SystemSpec, Trajectory, Windows,
};

/// Tolerance for algebraic (quadrature-free) clauses, relative to `1 + |E|`.
pub const ALGEBRAIC_TOL: f64 = 1e-10;

pub mod clause {
    pub const ENERGY_DOMINATION: &str = "energy-domination";
    pub const ENVAR_INEQUALITY: &str = "envar-inequality";
    pub const ENERGY_MONOTONE: &str = "energy-monotone";
    pub const MASS_EQUATION: &str = "mass-equation";
    pub const MOMENTUM_EQUATION: &str = "momentum-equation";
    pub const DEFECT_BUDGET: &str = "defect-budget";
    pub const CONE_R1: &str = "cone-r1";
    pub const CONE_R2: &str = "cone-r2";
    pub const MOMENT_EQUATION: &str = "moment-equation";
    pub const MEAN_DIVERGENCE: &str = "mean-divergence";
    pub const MV_ENERGY_MONOTONE: &str = "mv-energy-monotone";
    pub const COVARIANCE_PSD: &str = "covariance-psd";
    pub const CONCENTRATION_NONNEG: &str = "concentration-nonneg";
    pub const ANGLE_PROBABILITY: &str = "angle-probability";
}

/// `tol = c_tol (h^2 + dt^2) (1 + magnitude)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TolModel {
    pub c_tol: f64,
    pub h: f64,
    pub dt: f64,
}

impl TolModel {
    pub const DEFAULT_C: f64 = 10.0;

    pub fn new(c_tol: f64, grid: &Grid, time: &TimeGrid) -> Self {
        TolModel { c_tol, h: grid.h(), dt: time.dt() }
    }

    pub fn tol(&self, magnitude: f64) -> f64 {
        self.c_tol * (self.h * self.h + self.dt * self.dt) * (1.0 + magnitude.abs())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TolModel { c_tol: self.c_tol * factor, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub clause: String,
    pub test_fn: Option<usize>,
    pub s: Option<usize>,
    pub t: Option<usize>,
    #[serde(with = "crate::io::ext_f64")]
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Record {
    fn le(clause: &str, f: Option<usize>, s: Option<usize>, t: Option<usize>, residual: f64, tol: f64) -> Self {
        Record { clause: clause.into(), test_fn: f, s, t, residual, tol, pass: residual <= tol }
    }

    fn eq(clause: &str, f: Option<usize>, s: Option<usize>, t: Option<usize>, residual: f64, tol: f64) -> Self {
        Record { clause: clause.into(), test_fn: f, s, t, residual, tol, pass: residual.abs() <= tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: String,
    pub pass: bool,
    pub records: Vec<Record>,
}

impl Report {
    fn new(kind: &str, records: Vec<Record>) -> Self {
        Report { kind: kind.into(), pass: records.iter().all(|r| r.pass), records }
    }

    pub fn failing(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn failing_clauses(&self) -> Vec<String> {
        let mut out: Vec<String> = self.failing().map(|r| r.clause.clone()).collect();
        out.dedup();
        out.sort();
        out.dedup();
        out
    }

    pub fn clause(&self, name: &str) -> impl Iterator<Item = &Record> {
        let name = name.to_string();
        self.records.iter().filter(move |r| r.clause == name)
    }

    /// Largest `|residual|` over records of the given clause.
    pub fn max_abs_residual(&self, name: &str) -> f64 {
        self.clause(name).map(|r| r.residual.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnVarCert {
    pub traj: Trajectory,
    /// `E(t_i)`
    pub energy: Vec<f64>,
}

impl EnVarCert {
    pub fn new(traj: Trajectory, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != traj.time.samples() {
            return Err(Error::Input(format!("{} energy values for {} samples", energy.len(), traj.time.samples())));
        }
        if energy.iter().any(|e| !e.is_finite()) {
            return Err(Error::Input("energy values must be finite".into()));
        }
        Ok(EnVarCert { traj, energy })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.traj.system
    }
    pub fn grid(&self) -> &Grid {
        &self.traj.grid
    }
    pub fn time(&self) -> &TimeGrid {
        &self.traj.time
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissWeakCert {
    pub envar: EnVarCert,
    pub r1: Vec<DiscMeasure<SymMat>>,
    /// Absent for the incompressible system.
    pub r2: Option<Vec<DiscMeasure<f64>>>,
}

impl DissWeakCert {
    pub fn new(envar: EnVarCert, r1: Vec<DiscMeasure<SymMat>>, r2: Option<Vec<DiscMeasure<f64>>>) -> Result<Self> {
        let n = envar.time().samples();
        if r1.len() != n {
            return Err(Error::Input(format!("{} defect measures for {n} samples", r1.len())));
        }
        for m in &r1 {
            m.grid().check_same(envar.grid())?;
        }
        match (&r2, envar.system().is_compressible()) {
            (Some(r2), true) => {
                if r2.len() != n {
                    return Err(Error::Input(format!("{} scalar defects for {n} samples", r2.len())));
                }
                for m in r2 {
                    m.grid().check_same(envar.grid())?;
                }
            }
            (None, false) => {}
            (None, true) => return Err(Error::Input("compressible systems need a scalar defect".into())),
            (Some(_), false) => return Err(Error::Input("the incompressible system has no scalar defect".into())),
        }
        Ok(DissWeakCert { envar, r1, r2 })
    }

    pub fn budget(&self, i: usize) -> f64 {
        self.envar.system().defect_budget(&self.r1[i], self.r2.as_ref().map(|r| &r[i]))
    }
}

/// Finite probability measure on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereMeasure {
    pub points: Vec<(f64, Vec3)>,
}

impl SphereMeasure {
    /// `sum w theta theta^T`
    pub fn second_moment(&self, dim: usize) -> SymMat {
        let mut s = SymMat::zeros(dim);
        for (w, th) in &self.points {
            s = s.add(&SymMat::outer(dim, th).scale(*w));
        }
        s
    }

    pub fn first_moment(&self) -> Vec3 {
        let mut m = [0.0; 3];
        for (w, th) in &self.points {
            for a in 0..3 {
                m[a] += w * th[a];
            }
        }
        m
    }

    /// Largest deviation from being a probability measure on unit vectors.
    pub fn probability_defect(&self, dim: usize) -> f64 {
        let mass: f64 = self.points.iter().map(|p| p.0).sum();
        let mut worst = (mass - 1.0).abs();
        for (w, th) in &self.points {
            worst = worst.max((-w).max(0.0));
            let n: f64 = th[..dim].iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max((n - 1.0).abs());
        }
        if self.points.is_empty() {
            worst = 1.0;
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvSlice {
    pub mean: VectorField,
    pub cov: Field<SymMat>,
    pub lambda: DiscMeasure<f64>,
    /// One per cell when the concentration has a density, else empty.
    pub angles_ac: Vec<SphereMeasure>,
    /// One per concentration atom.
    pub angles_atoms: Vec<SphereMeasure>,
}

impl MvSlice {
    /// `int grad_phi : <nu_inf, theta theta> d lambda`; `cell_grads` holds
    /// `grad phi` at cell centers, `atom_grad` evaluates it anywhere.
    pub fn concentration_pairing(&self, cell_grads: &[[[f64; 3]; 3]], atom_grad: impl Fn(&Vec3) -> [[f64; 3]; 3]) -> f64 {
        let g = self.lambda.grid();
        let d = g.dim();
        let mut acc = 0.0;
        if !self.angles_ac.is_empty() {
            for ((l, nu), gr) in self.lambda.density().iter().zip(&self.angles_ac).zip(cell_grads) {
                if *l != 0.0 {
                    acc += l * nu.second_moment(d).frob_full(gr) * g.cell_volume();
                }
            }
        }
        for (a, nu) in self.lambda.atoms().iter().zip(&self.angles_atoms) {
            acc += a.w * nu.second_moment(d).frob_full(&atom_grad(&a.x));
        }
        acc
    }

    /// `1/2 int (|v|^2 + tr R) + 1/2 lambda(closure)`
    pub fn total_energy(&self) -> f64 {
        let g = self.mean.grid();
        let kin: f64 = self.mean.values().iter().map(domain::norm_sq).sum::<f64>() * g.cell_volume();
        let cov: f64 = self.cov.values().iter().map(|r| r.trace()).sum::<f64>() * g.cell_volume();
        0.5 * (kin + cov) + 0.5 * self.lambda.total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MvCert {
    pub grid: Grid,
    pub time: TimeGrid,
    pub slices: Vec<MvSlice>,
}

impl MvCert {
    pub fn new(grid: Grid, time: TimeGrid, slices: Vec<MvSlice>) -> Result<Self> {
        if slices.len() != time.samples() {
            return Err(Error::Input(format!("{} slices for {} samples", slices.len(), time.samples())));
        }
        for s in &slices {
            s.mean.grid().check_same(&grid)?;
            s.cov.grid().check_same(&grid)?;
            s.lambda.grid().check_same(&grid)?;
            if !s.angles_ac.is_empty() && s.angles_ac.len() != grid.len() {
                return Err(Error::Input("density angle measures must cover every cell".into()));
            }
            if s.angles_ac.is_empty() && s.lambda.density().iter().any(|l| *l != 0.0) {
                return Err(Error::Input("concentration density without angle measures".into()));
            }
            if s.angles_atoms.len() != s.lambda.atoms().len() {
                return Err(Error::Input("one angle measure per concentration atom required".into()));
            }
            let sphere_ok = |nu: &SphereMeasure| {
                nu.points.iter().all(|(w, th)| w.is_finite() && th.iter().all(|x| x.is_finite()))
            };
            if !s.angles_ac.iter().chain(&s.angles_atoms).all(sphere_ok) {
                return Err(Error::Input("non-finite sphere measure".into()));
            }
        }
        Ok(MvCert { grid, time, slices })
    }

    pub fn system(&self) -> SystemSpec {
        SystemSpec::incompressible()
    }
}

/// `1/2 quad(tr R) + 1/2 lambda(closure)` at one sample time.
pub fn jensen_gap(cert: &MvCert, i: usize) -> f64 {
    let s = &cert.slices[i];
    let vol = cert.grid.cell_volume();
    0.5 * s.cov.values().iter().map(|r| r.trace()).sum::<f64>() * vol + 0.5 * s.lambda.total()
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |s| ((s + 1)..n).map(move |t| (s, t)))
}

/// Energies of every state, rejecting infinite ones.
fn finite_energies(traj: &Trajectory, derived: &[Derived]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traj.states.len());
    for (i, (s, d)) in traj.states.iter().zip(derived).enumerate() {
        let e = systems::energy_with(&traj.system, s, d)?;
        if !e.is_finite() {
            return Err(Error::Input(format!("state at sample {i} has infinite energy")));
        }
        out.push(e);
    }
    Ok(out)
}

fn domination_records(energy: &[f64], e_cert: &[f64]) -> Vec<Record> {
    energy
        .iter()
        .zip(e_cert)
        .enumerate()
        .map(|(i, (en, e))| Record::le(clause::ENERGY_DOMINATION, None, Some(i), None, en - e, ALGEBRAIC_TOL * (1.0 + e.abs())))
        .collect()
}

/// Per-sample data of one test function along a trajectory.
struct Scan {
    inst: Vec<Instant>,
    weight: Vec<f64>,
    defect: Vec<f64>,
}

fn scan(
    traj: &Trajectory,
    derived: &[Derived],
    f: &TestFunction,
    mut defect: impl FnMut(usize, f64, &[TestEval]) -> f64,
) -> Result<Scan> {
    let table = f.tabulate(&traj.grid);
    let dim = traj.grid.dim();
    let mut out = Scan { inst: Vec::new(), weight: Vec::new(), defect: Vec::new() };
    for (i, (s, d)) in traj.states.iter().zip(derived).enumerate() {
        let t = traj.time.time(i);
        let evals = table.at(t);
        out.inst.push(instant(&traj.system, s, d, &evals, true)?);
        out.weight.push(regweight_from_sups(&traj.system, dim, &GradientSups::from_evals(dim, &evals), false));
        out.defect.push(defect(i, t, &evals));
    }
    Ok(out)
}

pub fn verify_envar(cert: &EnVarCert, battery: &[TestFunction], tol: &TolModel) -> Result<Report> {
    let traj = &cert.traj;
    let derived = traj.derived();
    let energy = finite_energies(traj, &derived)?;
    let friction: Vec<f64> = traj.states.iter().map(|s| systems::friction_rate(&traj.system, s)).collect::<Result<_>>()?;
    let e = &cert.energy;
    let n = traj.time.samples();
    let mut records = domination_records(&energy, e);
    let per_member: Vec<Result<Vec<Record>>> = battery
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let sc = scan(traj, &derived, f, |_, _, _| 0.0)?;
            let boundary: Vec<f64> = sc.inst.iter().map(|i| i.mass_boundary + i.momentum_boundary).collect();
            let rate: Vec<f64> = sc.inst.iter().map(|i| i.mass_flux + i.momentum_flux).collect();
            let w = Windows::new(&traj.time, boundary, &rate);
            let extra: Vec<f64> = (0..n).map(|i| sc.weight[i] * (energy[i] - e[i]) + friction[i]).collect();
            let xw = Windows::new(&traj.time, vec![0.0; n], &extra);
            let mag_inst = sc.inst.iter().map(|i| i.magnitude).fold(0.0, f64::max) * traj.time.t_final();
            Ok(pairs(n)
                .map(|(s, t)| {
                    let de = e[t] - e[s];
                    let r = w.residual(s, t);
                    let x = xw.integral(s, t);
                    let mag = e[s].abs().max(e[t].abs()).max(r.abs()).max(x.abs()).max(mag_inst);
                    Record::le(clause::ENVAR_INEQUALITY, Some(k), Some(s), Some(t), de + r + x, tol.tol(mag))
                })
                .collect())
        })
        .collect();
    for r in per_member {
        records.extend(r?);
    }
    Ok(Report::new("envar", records))
}

fn cone_violation(m: &DiscMeasure<SymMat>, cone: MatCone) -> f64 {
    let viol = |w: &SymMat| match cone {
        MatCone::Psd => (-w.min_eigenvalue()).max(0.0),
        _ => {
            let r = w.sub(&cone.project(w));
            r.frob(&r).sqrt()
        }
    };
    let dens = m.density().iter().map(viol).fold(0.0, f64::max);
    let atoms = m.atoms().iter().map(|a| viol(&a.w)).fold(0.0, f64::max);
    dens.max(atoms)
}

fn scalar_violation(m: &DiscMeasure<f64>) -> f64 {
    m.density().iter().chain(m.atoms().iter().map(|a| &a.w)).map(|w| (-w).max(0.0)).fold(0.0, f64::max)
}

fn max_weight_scale(m: &DiscMeasure<SymMat>) -> f64 {
    m.density().iter().chain(m.atoms().iter().map(|a| &a.w)).map(|w| w.max_abs_entry()).fold(0.0, f64::max)
}

pub fn verify_dissweak(cert: &DissWeakCert, battery: &[TestFunction], tol: &TolModel) -> Result<Report> {
    let env = &cert.envar;
    let traj = &env.traj;
    let sys = &traj.system;
    let dim = traj.grid.dim();
    let derived = traj.derived();
    let energy = finite_energies(traj, &derived)?;
    let friction: Vec<f64> = traj.states.iter().map(|s| systems::friction_rate(sys, s)).collect::<Result<_>>()?;
    let e = &env.energy;
    let n = traj.time.samples();
    let mut records = domination_records(&energy, e);

    let fw = Windows::new(&traj.time, vec![0.0; n], &friction);
    let monotone = if sys.alpha() > 0.0 { "friction-dissipation" } else { clause::ENERGY_MONOTONE };
    for (s, t) in pairs(n) {
        let v = e[t] - e[s] + fw.integral(s, t);
        records.push(Record::le(monotone, None, Some(s), Some(t), v, tol.tol(e[s].abs().max(e[t].abs()))));
    }

    for i in 0..n {
        let budget = cert.budget(i);
        let gap = e[i] - energy[i];
        records.push(Record::le(clause::DEFECT_BUDGET, None, Some(i), None, budget - gap, ALGEBRAIC_TOL * (1.0 + e[i].abs())));
    }
    let cone = sys.defect_cone();
    for (i, m) in cert.r1.iter().enumerate() {
        let v = cone_violation(m, cone);
        records.push(Record::le(clause::CONE_R1, None, Some(i), None, v, ALGEBRAIC_TOL * (1.0 + max_weight_scale(m))));
    }
    if let Some(r2) = &cert.r2 {
        for (i, m) in r2.iter().enumerate() {
            let scale = m.density().iter().chain(m.atoms().iter().map(|a| &a.w)).map(|w| w.abs()).fold(0.0, f64::max);
            records.push(Record::le(clause::CONE_R2, None, Some(i), None, scalar_violation(m), ALGEBRAIC_TOL * (1.0 + scale)));
        }
    }

    let per_member: Vec<Result<Vec<Record>>> = battery
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let mut out = Vec::new();
            let vec_part = f.vector_part();
            let scal_part = f.scalar_part();
            if sys.is_compressible() && !scal_part.is_zero() {
                let inst = traj.instants(&scal_part, &derived)?;
                let w = Windows::new(
                    &traj.time,
                    inst.iter().map(|i| i.mass_boundary).collect(),
                    &inst.iter().map(|i| i.mass_flux).collect::<Vec<_>>(),
                );
                let mag = inst.iter().map(|i| i.mass_boundary.abs().max(i.mass_flux.abs())).fold(0.0, f64::max);
                for (s, t) in pairs(n) {
                    out.push(Record::eq(clause::MASS_EQUATION, Some(k), Some(s), Some(t), w.residual(s, t), tol.tol(mag)));
                }
            }
            if !vec_part.is_zero() {
                let sc = scan(traj, &derived, &vec_part, |i, t, evals| {
                    let cells: Vec<SymMat> = evals.iter().map(|ev| SymMat::from_full(dim, &ev.grad_phi)).collect();
                    let mut d = cert.r1[i].pair_cells(&cells, |x| SymMat::from_full(dim, &vec_part.eval(x, t).grad_phi));
                    if let Some(r2) = &cert.r2 {
                        let divs: Vec<f64> = evals.iter().map(|ev| ev.div_phi).collect();
                        d += r2[i].pair_cells(&divs, |x| vec_part.eval(x, t).div_phi);
                    }
                    d
                })?;
                let rate: Vec<f64> = sc.inst.iter().zip(&sc.defect).map(|(i, d)| i.momentum_flux + d).collect();
                let w = Windows::new(&traj.time, sc.inst.iter().map(|i| i.momentum_boundary).collect(), &rate);
                let mag = sc
                    .inst
                    .iter()
                    .zip(&sc.defect)
                    .map(|(i, d)| i.magnitude.max(d.abs()))
                    .fold(0.0, f64::max);
                for (s, t) in pairs(n) {
                    out.push(Record::eq(clause::MOMENTUM_EQUATION, Some(k), Some(s), Some(t), w.residual(s, t), tol.tol(mag)));
                }
            }
            Ok(out)
        })
        .collect();
    for r in per_member {
        records.extend(r?);
    }
    Ok(Report::new("dissweak", records))
}

pub fn verify_mv(cert: &MvCert, battery: &[TestFunction], tol: &TolModel) -> Result<Report> {
    let grid = &cert.grid;
    let time = &cert.time;
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let n = time.samples();
    let mut records = Vec::new();

    for (i, s) in cert.slices.iter().enumerate() {
        let scale = s.cov.values().iter().map(|r| r.max_abs_entry()).fold(0.0, f64::max);
        let v = s.cov.values().iter().map(|r| (-r.min_eigenvalue()).max(0.0)).fold(0.0, f64::max);
        records.push(Record::le(clause::COVARIANCE_PSD, None, Some(i), None, v, ALGEBRAIC_TOL * (1.0 + scale)));
        let lscale = s.lambda.total().abs().max(s.lambda.density().iter().map(|x| x.abs()).fold(0.0, f64::max));
        records.push(Record::le(
            clause::CONCENTRATION_NONNEG,
            None,
            Some(i),
            None,
            scalar_violation(&s.lambda),
            ALGEBRAIC_TOL * (1.0 + lscale),
        ));
        let mut worst = 0.0f64;
        if !s.angles_ac.is_empty() {
            for (l, nu) in s.lambda.density().iter().zip(&s.angles_ac) {
                if *l != 0.0 {
                    worst = worst.max(nu.probability_defect(dim));
                }
            }
        }
        for nu in &s.angles_atoms {
            worst = worst.max(nu.probability_defect(dim));
        }
        records.push(Record::le(clause::ANGLE_PROBABILITY, None, Some(i), None, worst, ALGEBRAIC_TOL));
    }

    let e: Vec<f64> = cert.slices.iter().map(|s| s.total_energy()).collect();
    for (s, t) in pairs(n) {
        records.push(Record::le(
            clause::MV_ENERGY_MONOTONE,
            None,
            Some(s),
            Some(t),
            e[t] - e[s],
            tol.tol(e[s].abs().max(e[t].abs())),
        ));
    }

    let per_member: Vec<Vec<Record>> = battery
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            let mut out = Vec::new();
            let vp = f.vector_part();
            if vp.is_zero() {
                return out;
            }
            let table = vp.tabulate(grid);
            let mut boundary = Vec::with_capacity(n);
            let mut rate = Vec::with_capacity(n);
            let mut mag = 0.0f64;
            for (i, sl) in cert.slices.iter().enumerate() {
                let t = time.time(i);
                let evals = table.at(t);
                let mut b = 0.0;
                let mut r = 0.0;
                for ((v, cov), ev) in sl.mean.values().iter().zip(sl.cov.values()).zip(&evals) {
                    b += domain::dot(v, &ev.phi);
                    let a = domain::dot(v, &ev.dt_phi);
                    let mut flux = cov.frob_full(&ev.grad_phi);
                    for p in 0..dim {
                        for q in 0..dim {
                            flux += v[p] * v[q] * ev.grad_phi[p][q];
                        }
                    }
                    mag = mag.max(a.abs()).max(flux.abs());
                    r += a + flux;
                }
                let grads: Vec<[[f64; 3]; 3]> = evals.iter().map(|ev| ev.grad_phi).collect();
                let conc = sl.concentration_pairing(&grads, |x| vp.eval(x, t).grad_phi);
                mag = mag.max(conc.abs());
                boundary.push(b * vol);
                rate.push(r * vol + conc);
            }
            let w = Windows::new(time, boundary.clone(), &rate);
            let m = (mag * grid.volume())
                .max(boundary.iter().map(|x| x.abs()).fold(0.0, f64::max))
                .max(rate.iter().map(|x| x.abs()).fold(0.0, f64::max));
            for (s, t) in pairs(n) {
                out.push(Record::eq(clause::MOMENT_EQUATION, Some(k), Some(s), Some(t), w.residual(s, t), tol.tol(m)));
            }
            out
        })
        .collect();
    for r in per_member {
        records.extend(r);
    }

    // Pressure test functions: scalar parts of a tangential battery.
    let scalars: Vec<TestFunction> = domain::battery(Admissibility::Tangential, grid, time, battery.len().max(2), 0x5eed)
        .into_iter()
        .map(|f| f.scalar_part())
        .filter(|f| !f.is_zero())
        .collect();
    for (k, q) in scalars.iter().enumerate() {
        let table = q.tabulate(grid);
        for (i, sl) in cert.slices.iter().enumerate() {
            let evals = table.at(time.time(i));
            let mut acc = 0.0;
            let mut mag = 0.0f64;
            for (v, ev) in sl.mean.values().iter().zip(&evals) {
                let x = domain::dot(v, &ev.grad_psi);
                acc += x;
                mag = mag.max(x.abs());
            }
            records.push(Record::eq(
                clause::MEAN_DIVERGENCE,
                Some(k),
                Some(i),
                None,
                acc * vol,
                tol.tol(mag * grid.volume()),
            ));
        }
    }
    Ok(Report::new("mv", records))
}

/// Per-sample energy profile for plotting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    pub certified: f64,
    pub energy: f64,
    pub budget: f64,
}

pub fn envar_profile(cert: &EnVarCert) -> Result<Vec<ProfileRow>> {
    let energy = cert.traj.energies()?;
    Ok((0..cert.energy.len())
        .map(|i| ProfileRow { t: cert.time().time(i), certified: cert.energy[i], energy: energy[i], budget: f64::NAN })
        .collect())
}

pub fn dissweak_profile(cert: &DissWeakCert) -> Result<Vec<ProfileRow>> {
    let mut rows = envar_profile(&cert.envar)?;
    for (i, r) in rows.iter_mut().enumerate() {
        r.budget = cert.budget(i);
    }
    Ok(rows)
}

pub fn mv_profile(cert: &MvCert) -> Vec<ProfileRow> {
    let vol = cert.grid.cell_volume();
    cert.slices
        .iter()
        .enumerate()
        .map(|(i, s)| ProfileRow {
            t: cert.time.time(i),
            certified: s.total_energy(),
            energy: 0.5 * s.mean.values().iter().map(domain::norm_sq).sum::<f64>() * vol,
            budget: jensen_gap(cert, i),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Topology;

    fn still(n: usize) -> EnVarCert {
        let sys = SystemSpec::incompressible();
        let g = Grid::unit(2, Topology::Torus, n);
        let time = TimeGrid::new(1.0, 4).unwrap();
        let states = (0..time.samples()).map(|_| systems::zero_state(&sys, g)).collect();
        let traj = Trajectory::new(sys, g, time, states).unwrap();
        EnVarCert::new(traj, vec![0.0; 5]).unwrap()
    }

    #[test]
    fn zero_state_passes_envar() {
        let c = still(8);
        let b = c.system().battery(c.grid(), c.time(), 5, 1);
        let r = verify_envar(&c, &b, &TolModel::new(10.0, c.grid(), c.time())).unwrap();
        assert!(r.pass);
        assert_eq!(r.clause(clause::ENVAR_INEQUALITY).count(), 5 * 10);
    }

    #[test]
    fn energy_below_state_fails_domination() {
        let mut c = still(8);
        c.energy[2] = -1e-6;
        let r = verify_envar(&c, &[], &TolModel::new(10.0, c.grid(), c.time())).unwrap();
        assert_eq!(r.failing_clauses(), vec![clause::ENERGY_DOMINATION.to_string()]);
    }

    #[test]
    fn budget_clause_reads_trace() {
        let c = still(4);
        let g = *c.grid();
        let mut r1: Vec<DiscMeasure<SymMat>> = (0..5).map(|_| DiscMeasure::zero(g)).collect();
        r1[1] = DiscMeasure::new(g, vec![SymMat::identity(2); 16], vec![]).unwrap();
        let d = DissWeakCert::new(c.clone(), r1, None).unwrap();
        assert!((d.budget(1) - 1.0).abs() < 1e-12);
        let r = verify_dissweak(&d, &[], &TolModel::new(10.0, c.grid(), c.time())).unwrap();
        assert!(r.failing_clauses().contains(&clause::DEFECT_BUDGET.to_string()));
    }

    #[test]
    fn sphere_measure_moments() {
        let nu = SphereMeasure { points: vec![(0.5, [1.0, 0.0, 0.0]), (0.5, [-1.0, 0.0, 0.0])] };
        assert_eq!(nu.first_moment(), [0.0; 3]);
        assert!((nu.second_moment(2).get(0, 0) - 1.0).abs() < 1e-15);
        assert!(nu.probability_defect(2) < 1e-15);
    }
}
