//! JSON certificate files.
//!
//! Layout (version 1):
//!
//! ```text
//! { "version": 1,
//!   "system": { "name": "incompressible" | "isentropic" | "korteweg" | "poisson",
//!               "gamma": f, "alpha": f },
//!   "grid":   { "dim": d, "topology": "box" | "torus", "extent": [..], "cells": [..] },
//!   "time":   { "T": f, "steps": n },
//!   "kind":   "envar" | "dissweak" | "mv",
//!   "data":   { ... },
//!   "expected": { ... } }
//! ```
//!
//! Vectors carry `dim` components and symmetric matrices their upper
//! triangle in row-major order. Cells are ordered with axis 0 fastest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certify::{DissWeakCert, EnVarCert, MvCert, MvSlice, SphereMeasure};
use crate::dmeasure::{Atom, DiscMeasure};
use crate::domain::{Field, Grid, TimeGrid, Topology};
use crate::error::{Error, Result};
use crate::symcone::{SymMat, Vec3};
use crate::systems::{State, SystemKind, SystemSpec, Trajectory};

pub const VERSION: u32 = 1;

/// Serde helper writing non-finite floats as `{"inf": true}` (with
/// `"sign": -1` for negative infinity) and NaN as `null`.
pub mod ext_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::{json, Value};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_none()
        } else {
            let v = if *x > 0.0 { json!({"inf": true}) } else { json!({"inf": true, "sign": -1}) };
            serde::Serialize::serialize(&v, s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::Number(n) => n.as_f64().ok_or_else(|| D::Error::custom("bad number")),
            Value::Null => Ok(f64::NAN),
            Value::Object(o) if o.get("inf") == Some(&Value::Bool(true)) => {
                let neg = o.get("sign").and_then(Value::as_f64).is_some_and(|s| s < 0.0);
                Ok(if neg { f64::NEG_INFINITY } else { f64::INFINITY })
            }
            _ => Err(D::Error::custom(format!("expected a number, got {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertKind {
    Envar,
    Dissweak,
    Mv,
}

impl CertKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertKind::Envar => "envar",
            CertKind::Dissweak => "dissweak",
            CertKind::Mv => "mv",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    EnVar(EnVarCert),
    DissWeak(DissWeakCert),
    Mv(MvCert),
}

impl Certificate {
    pub fn kind(&self) -> CertKind {
        match self {
            Certificate::EnVar(_) => CertKind::Envar,
            Certificate::DissWeak(_) => CertKind::Dissweak,
            Certificate::Mv(_) => CertKind::Mv,
        }
    }

    pub fn system(&self) -> SystemSpec {
        match self {
            Certificate::EnVar(c) => *c.system(),
            Certificate::DissWeak(c) => *c.envar.system(),
            Certificate::Mv(c) => c.system(),
        }
    }

    pub fn grid(&self) -> Grid {
        match self {
            Certificate::EnVar(c) => *c.grid(),
            Certificate::DissWeak(c) => *c.envar.grid(),
            Certificate::Mv(c) => c.grid,
        }
    }

    pub fn time(&self) -> TimeGrid {
        match self {
            Certificate::EnVar(c) => *c.time(),
            Certificate::DissWeak(c) => *c.envar.time(),
            Certificate::Mv(c) => c.time,
        }
    }
}

/// A certificate plus the optional expected-outcome annotation.
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateFile {
    pub cert: Certificate,
    pub expected: Option<Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemRepr {
    name: String,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRepr {
    dim: usize,
    topology: Topology,
    extent: Vec<f64>,
    cells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeRepr {
    #[serde(rename = "T")]
    t_final: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
struct FileRepr {
    version: u32,
    system: SystemRepr,
    grid: GridRepr,
    time: TimeRepr,
    kind: CertKind,
    data: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected: Option<Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr<W> {
    x: Vec<f64>,
    w: W,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr<W> {
    ac: Vec<W>,
    #[serde(default)]
    atoms: Vec<AtomRepr<W>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvarRepr {
    states: Vec<StateRepr>,
    #[serde(rename = "E")]
    energy: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DissRepr {
    states: Vec<StateRepr>,
    #[serde(rename = "E")]
    energy: Vec<f64>,
    r1: Vec<MeasureRepr<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r2: Option<Vec<MeasureRepr<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereRepr {
    w: Vec<f64>,
    theta: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceRepr {
    mean: Vec<Vec<f64>>,
    cov: Vec<Vec<f64>>,
    lambda: MeasureRepr<f64>,
    #[serde(default)]
    angles_ac: Vec<SphereRepr>,
    #[serde(default)]
    angles_atoms: Vec<SphereRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MvRepr {
    slices: Vec<SliceRepr>,
}

fn system_name(kind: SystemKind) -> &'static str {
    match kind {
        SystemKind::IncompressibleEuler => "incompressible",
        SystemKind::IsentropicEuler => "isentropic",
        SystemKind::EulerKorteweg => "korteweg",
        SystemKind::EulerPoisson => "poisson",
    }
}

pub fn parse_system_name(name: &str) -> Result<SystemKind> {
    Ok(match name {
        "incompressible" => SystemKind::IncompressibleEuler,
        "isentropic" => SystemKind::IsentropicEuler,
        "korteweg" => SystemKind::EulerKorteweg,
        "poisson" => SystemKind::EulerPoisson,
        other => return Err(Error::Input(format!("unknown system {other:?}"))),
    })
}

fn vec_in(dim: usize, v: &[f64]) -> Result<Vec3> {
    if v.len() != dim {
        return Err(Error::Input(format!("vector of length {} in dimension {dim}", v.len())));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

fn vec_out(dim: usize, v: &Vec3) -> Vec<f64> {
    v[..dim].to_vec()
}

fn vfield_in(grid: &Grid, v: &[Vec<f64>]) -> Result<Field<Vec3>> {
    Field::new(*grid, v.iter().map(|x| vec_in(grid.dim(), x)).collect::<Result<_>>()?)
}

fn vfield_out(f: &Field<Vec3>) -> Vec<Vec<f64>> {
    let d = f.grid().dim();
    f.values().iter().map(|x| vec_out(d, x)).collect()
}

fn state_in(sys: &SystemSpec, grid: &Grid, s: &StateRepr) -> Result<State> {
    if sys.is_compressible() {
        match (&s.rho, &s.m, &s.v) {
            (Some(rho), Some(m), None) => {
                Ok(State::Compressible { rho: Field::new(*grid, rho.clone())?, m: vfield_in(grid, m)? })
            }
            _ => Err(Error::Input("compressible states need \"rho\" and \"m\"".into())),
        }
    } else {
        match (&s.rho, &s.m, &s.v) {
            (None, None, Some(v)) => Ok(State::Incompressible { v: vfield_in(grid, v)? }),
            _ => Err(Error::Input("incompressible states need \"v\" only".into())),
        }
    }
}

fn state_out(s: &State) -> StateRepr {
    match s {
        State::Incompressible { v } => StateRepr { v: Some(vfield_out(v)), rho: None, m: None },
        State::Compressible { rho, m } => StateRepr { v: None, rho: Some(rho.values().to_vec()), m: Some(vfield_out(m)) },
    }
}

fn mat_measure_in(grid: &Grid, m: &MeasureRepr<Vec<f64>>) -> Result<DiscMeasure<SymMat>> {
    let d = grid.dim();
    let ac = m.ac.iter().map(|u| SymMat::from_upper(d, u)).collect::<Result<_>>()?;
    let atoms = m
        .atoms
        .iter()
        .map(|a| Ok(Atom { x: vec_in(d, &a.x)?, w: SymMat::from_upper(d, &a.w)? }))
        .collect::<Result<_>>()?;
    DiscMeasure::new(*grid, ac, atoms)
}

fn mat_measure_out(m: &DiscMeasure<SymMat>) -> MeasureRepr<Vec<f64>> {
    let d = m.grid().dim();
    MeasureRepr {
        ac: m.density().iter().map(|w| w.upper()).collect(),
        atoms: m.atoms().iter().map(|a| AtomRepr { x: vec_out(d, &a.x), w: a.w.upper() }).collect(),
    }
}

fn scalar_measure_in(grid: &Grid, m: &MeasureRepr<f64>) -> Result<DiscMeasure<f64>> {
    let atoms = m.atoms.iter().map(|a| Ok(Atom { x: vec_in(grid.dim(), &a.x)?, w: a.w })).collect::<Result<_>>()?;
    DiscMeasure::new(*grid, m.ac.clone(), atoms)
}

fn scalar_measure_out(m: &DiscMeasure<f64>) -> MeasureRepr<f64> {
    let d = m.grid().dim();
    MeasureRepr {
        ac: m.density().to_vec(),
        atoms: m.atoms().iter().map(|a| AtomRepr { x: vec_out(d, &a.x), w: a.w }).collect(),
    }
}

fn sphere_in(dim: usize, s: &SphereRepr) -> Result<SphereMeasure> {
    if s.w.len() != s.theta.len() {
        return Err(Error::Input("sphere measure weights and points differ in length".into()));
    }
    Ok(SphereMeasure { points: s.w.iter().zip(&s.theta).map(|(w, t)| Ok((*w, vec_in(dim, t)?))).collect::<Result<_>>()? })
}

fn sphere_out(dim: usize, s: &SphereMeasure) -> SphereRepr {
    SphereRepr { w: s.points.iter().map(|p| p.0).collect(), theta: s.points.iter().map(|p| vec_out(dim, &p.1)).collect() }
}

fn trajectory_in(sys: SystemSpec, grid: Grid, time: TimeGrid, states: &[StateRepr]) -> Result<Trajectory> {
    let states = states.iter().map(|s| state_in(&sys, &grid, s)).collect::<Result<_>>()?;
    Trajectory::new(sys, grid, time, states)
}

impl CertificateFile {
    pub fn new(cert: Certificate) -> Self {
        CertificateFile { cert, expected: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: FileRepr = serde_json::from_str(text)?;
        if repr.version != VERSION {
            return Err(Error::Input(format!("unsupported version {}", repr.version)));
        }
        let kind = parse_system_name(&repr.system.name)?;
        let sys = SystemSpec::new(kind, repr.system.gamma, repr.system.alpha)?;
        let grid = Grid::new(repr.grid.dim, repr.grid.topology, &repr.grid.extent, &repr.grid.cells)?;
        let time = TimeGrid::new(repr.time.t_final, repr.time.steps)?;
        let cert = match repr.kind {
            CertKind::Envar => {
                let d: EnvarRepr = serde_json::from_value(repr.data)?;
                Certificate::EnVar(EnVarCert::new(trajectory_in(sys, grid, time, &d.states)?, d.energy)?)
            }
            CertKind::Dissweak => {
                let d: DissRepr = serde_json::from_value(repr.data)?;
                let env = EnVarCert::new(trajectory_in(sys, grid, time, &d.states)?, d.energy)?;
                let r1 = d.r1.iter().map(|m| mat_measure_in(&grid, m)).collect::<Result<_>>()?;
                let r2 = match &d.r2 {
                    Some(r2) => Some(r2.iter().map(|m| scalar_measure_in(&grid, m)).collect::<Result<_>>()?),
                    None => None,
                };
                Certificate::DissWeak(DissWeakCert::new(env, r1, r2)?)
            }
            CertKind::Mv => {
                if kind != SystemKind::IncompressibleEuler {
                    return Err(Error::Unsupported("measure-valued certificates exist only for the incompressible system".into()));
                }
                let d: MvRepr = serde_json::from_value(repr.data)?;
                let dim = grid.dim();
                let slices = d
                    .slices
                    .iter()
                    .map(|s| {
                        Ok(MvSlice {
                            mean: vfield_in(&grid, &s.mean)?,
                            cov: Field::new(grid, s.cov.iter().map(|u| SymMat::from_upper(dim, u)).collect::<Result<_>>()?)?,
                            lambda: scalar_measure_in(&grid, &s.lambda)?,
                            angles_ac: s.angles_ac.iter().map(|a| sphere_in(dim, a)).collect::<Result<_>>()?,
                            angles_atoms: s.angles_atoms.iter().map(|a| sphere_in(dim, a)).collect::<Result<_>>()?,
                        })
                    })
                    .collect::<Result<_>>()?;
                Certificate::Mv(MvCert::new(grid, time, slices)?)
            }
        };
        Ok(CertificateFile { cert, expected: repr.expected })
    }

    pub fn to_json(&self) -> Result<String> {
        let sys = self.cert.system();
        let grid = self.cert.grid();
        let time = self.cert.time();
        let d = grid.dim();
        let data = match &self.cert {
            Certificate::EnVar(c) => serde_json::to_value(EnvarRepr {
                states: c.traj.states.iter().map(state_out).collect(),
                energy: c.energy.clone(),
            })?,
            Certificate::DissWeak(c) => serde_json::to_value(DissRepr {
                states: c.envar.traj.states.iter().map(state_out).collect(),
                energy: c.envar.energy.clone(),
                r1: c.r1.iter().map(mat_measure_out).collect(),
                r2: c.r2.as_ref().map(|r| r.iter().map(scalar_measure_out).collect()),
            })?,
            Certificate::Mv(c) => serde_json::to_value(MvRepr {
                slices: c
                    .slices
                    .iter()
                    .map(|s| SliceRepr {
                        mean: vfield_out(&s.mean),
                        cov: s.cov.values().iter().map(|m| m.upper()).collect(),
                        lambda: scalar_measure_out(&s.lambda),
                        angles_ac: s.angles_ac.iter().map(|a| sphere_out(d, a)).collect(),
                        angles_atoms: s.angles_atoms.iter().map(|a| sphere_out(d, a)).collect(),
                    })
                    .collect(),
            })?,
        };
        let repr = FileRepr {
            version: VERSION,
            system: SystemRepr { name: system_name(sys.kind()).into(), gamma: sys.gamma(), alpha: sys.alpha() },
            grid: GridRepr {
                dim: d,
                topology: grid.topology(),
                extent: grid.extent().to_vec(),
                cells: grid.cells().to_vec(),
            },
            time: TimeRepr { t_final: time.t_final(), steps: time.steps() },
            kind: self.cert.kind(),
            data,
            expected: self.expected.clone(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Input(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
