//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails or overruns its time limit.

use std::f64::consts::PI;
use std::time::Instant;

use gensol::catalog;
use gensol::certify::{self, clause, Report, TolModel};
use gensol::convert::{self, DissOutcome, SolverOptions};
use gensol::dmeasure::{Atom, DiscMeasure};
use gensol::domain::{self, neumann_poisson_solve_with, Admissibility, Field, Grid, PoissonMode, TimeGrid, Topology};
use gensol::symcone::{
    dual_norm_kind, norm_of_eigenvalues, polar_cone, random_orthogonal, random_sym, random_unit, MatCone, MatNormKind,
    SymMat,
};
use gensol::systems::{self, regweight, GradientSups, State, SystemKind, SystemSpec, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const BATTERY: usize = 12;
const SEED: u64 = 20240611;

// ---------------------------------------------------------------- 1

fn cone_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cones = [MatCone::Psd, MatCone::Nsd, MatCone::IdentityRay, MatCone::FullSym];
    let mut worst_decomp = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut worst_member = 0.0f64;
    for i in 0..2000 {
        let d = 2 + i % 2;
        let z = random_sym(d, &mut rng);
        for cone in cones {
            let p = cone.project(&z);
            let q = polar_cone(cone).project(&z);
            let r = z.sub(&p).sub(&q);
            worst_decomp = worst_decomp.max(r.frob(&r).sqrt());
            worst_orth = worst_orth.max(p.frob(&q).abs());
            if !cone.contains(&p, 1e-10) || !polar_cone(cone).contains(&q, 1e-10) {
                worst_member = f64::INFINITY;
            }
        }
    }
    let mut worst_ineq = f64::NEG_INFINITY;
    for i in 0..2000 {
        let d = 2 + i % 2;
        let cone = cones[i % cones.len()];
        let z = random_sym(d, &mut rng);
        let y = cone.project(&random_sym(d, &mut rng));
        worst_ineq = worst_ineq.max(z.frob(&y) - cone.project(&z).frob(&y));
    }
    let pass = worst_decomp <= 1e-10 && worst_orth <= 1e-10 && worst_member == 0.0 && worst_ineq <= 1e-10;
    outcome(
        pass,
        format!(
            "moreau residual {worst_decomp:.1e}, orthogonality {worst_orth:.1e}, projection inequality excess {worst_ineq:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Eigenvalue vector on the unit sphere of `kind`, mixing Gaussian
/// directions with sparse sign patterns so that polytope vertices are hit.
fn sample_ball_eigs(d: usize, kind: MatNormKind, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut mu = [0.0; 3];
    if rng.gen_bool(0.5) {
        for m in mu.iter_mut().take(d) {
            *m = domain_gauss(rng);
        }
    } else {
        for m in mu.iter_mut().take(d) {
            *m = match rng.gen_range(0..3) {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            } + 0.01 * domain_gauss(rng);
        }
    }
    let n = norm_of_eigenvalues(&mu[..d], kind);
    if n > 0.0 {
        for m in mu.iter_mut() {
            *m /= n;
        }
    }
    mu
}

fn domain_gauss(rng: &mut ChaCha8Rng) -> f64 {
    gensol::symcone::gaussian(rng)
}

fn norm_duality() -> Outcome {
    let kinds = [MatNormKind::Spectral, MatNormKind::Trace, MatNormKind::Frobenius, MatNormKind::MMax, MatNormKind::MDual];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in kinds {
        let dual = dual_norm_kind(kind);
        let mut min_ratio = f64::INFINITY;
        let mut max_excess = f64::NEG_INFINITY;
        for i in 0..200 {
            let d = 2 + i % 2;
            let a = random_sym(d, &mut rng);
            let closed = a.norm(dual);
            let eig = a.eigen();
            let mut best = f64::NEG_INFINITY;
            for s in 0..10_000 {
                let mu = sample_ball_eigs(d, kind, &mut rng);
                let vectors = if s % 2 == 0 {
                    random_orthogonal(d, &mut rng)
                } else {
                    let mut v = eig.vectors;
                    for k in (1..d).rev() {
                        v.swap(k, rng.gen_range(0..=k));
                    }
                    v
                };
                let b = SymMat::from_eigen(d, &mu, &vectors);
                best = best.max(a.frob(&b));
            }
            min_ratio = min_ratio.min(best / closed);
            max_excess = max_excess.max(best - closed);
        }
        let ok = min_ratio >= 0.98 && max_excess <= 1e-9;
        pass &= ok;
        lines.push(format!("{kind:?}->{dual:?} ratio {min_ratio:.3} excess {max_excess:.1e}{}", if ok { "" } else { " (fails)" }));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 3

fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> SymMat {
    let mut m = SymMat::zeros(d);
    for _ in 0..rng.gen_range(1..=d) {
        m = m.add(&SymMat::outer(d, &random_unit(d, rng)).scale(rng.gen_range(0.1..1.0)));
    }
    m
}

fn random_measure(rng: &mut ChaCha8Rng) -> DiscMeasure<SymMat> {
    let d = rng.gen_range(2..=3);
    let topo = if rng.gen_bool(0.5) { Topology::Box } else { Topology::Torus };
    let n = if d == 2 { rng.gen_range(4..=8) } else { rng.gen_range(3..=4) };
    let grid = Grid::unit(d, topo, n);
    let ac = (0..grid.len())
        .map(|_| if rng.gen_bool(0.4) { random_psd(d, rng) } else { SymMat::zeros(d) })
        .collect();
    let atoms = (0..rng.gen_range(0..=3))
        .map(|_| {
            let mut x = [0.0; 3];
            for a in x.iter_mut().take(d) {
                *a = rng.gen_range(0.0..=1.0);
            }
            Atom { x, w: random_psd(d, rng).scale(grid.cell_volume()) }
        })
        .collect();
    DiscMeasure::new(grid, ac, atoms).unwrap()
}

/// Replaces one weight by an indefinite one whose negative eigenvalue
/// carries three times the total variation of the measure.
fn plant_indefinite(m: &DiscMeasure<SymMat>, rng: &mut ChaCha8Rng) -> DiscMeasure<SymMat> {
    let g = *m.grid();
    let d = g.dim();
    let tv = m.total_variation(MatNormKind::Trace).max(g.cell_volume());
    let u = random_unit(d, rng);
    let w = random_unit(d, rng);
    let mut ac = m.density().to_vec();
    let mut atoms = m.atoms().to_vec();
    if atoms.is_empty() || rng.gen_bool(0.5) {
        let c = rng.gen_range(0..g.len());
        ac[c] = SymMat::outer(d, &u).scale(0.5 * tv / g.cell_volume()).sub(&SymMat::outer(d, &w).scale(3.0 * tv / g.cell_volume()));
    } else {
        let k = rng.gen_range(0..atoms.len());
        atoms[k] = Atom { x: atoms[k].x, w: SymMat::outer(d, &u).scale(0.5 * tv).sub(&SymMat::outer(d, &w).scale(3.0 * tv)) };
    }
    DiscMeasure::new(g, ac, atoms).unwrap()
}

fn measure_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut false_alarms = 0;
    let mut missed = 0;
    for i in 0..100u64 {
        let m = random_measure(&mut rng);
        if !m.cone_duality_test(MatCone::Psd, 500, i).passed {
            false_alarms += 1;
        }
        let bad = plant_indefinite(&m, &mut rng);
        if bad.cone_duality_test(MatCone::Psd, 500, 1000 + i).passed {
            missed += 1;
        }
    }
    outcome(false_alarms == 0 && missed == 0, format!("PSD measures rejected {false_alarms}/100, planted indefinite accepted {missed}/100"))
}

// ---------------------------------------------------------------- 4

const WEAK_FORM: [&str; 4] = [clause::MASS_EQUATION, clause::MOMENTUM_EQUATION, clause::MOMENT_EQUATION, clause::ENVAR_INEQUALITY];

/// Largest weak-form residual against `10 (h^2 + dt^2)`, one-sided for the
/// inequality clause.
fn weak_form_check(r: &Report, bound: f64) -> (bool, f64) {
    let mut ok = r.pass;
    let mut worst = 0.0f64;
    for rec in r.records.iter().filter(|x| WEAK_FORM.contains(&x.clause.as_str())) {
        let v = if rec.clause == clause::ENVAR_INEQUALITY { rec.residual.max(0.0) } else { rec.residual.abs() };
        if rec.clause != clause::ENVAR_INEQUALITY {
            worst = worst.max(v);
        }
        ok &= v <= bound;
    }
    (ok, worst)
}

fn exact_case(name: &str, n: usize) -> Vec<(String, Report)> {
    let time = TimeGrid::new(1.0, n).unwrap();
    let envar = match name {
        "shear" => catalog::shear(n, time).unwrap(),
        "isentropic-torus" => catalog::constant_state(n, time).unwrap(),
        "isentropic-box" => {
            catalog::resting_state(SystemSpec::isentropic(1.4).unwrap(), Grid::unit(2, Topology::Box, n), time, 1.5).unwrap()
        }
        "korteweg-box" => {
            catalog::resting_state(SystemSpec::korteweg(1.6).unwrap(), Grid::unit(2, Topology::Box, n), time, 0.8).unwrap()
        }
        "poisson-box" => {
            catalog::resting_state(SystemSpec::poisson(2.0, 0.3).unwrap(), Grid::unit(2, Topology::Box, n), time, 1.2).unwrap()
        }
        _ => unreachable!(),
    };
    let sys = *envar.system();
    let battery = sys.battery(envar.grid(), envar.time(), BATTERY, SEED);
    let tol = TolModel::new(TolModel::DEFAULT_C, envar.grid(), envar.time());
    let mut out = vec![("envar".to_string(), certify::verify_envar(&envar, &battery, &tol).unwrap())];
    if sys.kind() == SystemKind::IncompressibleEuler {
        let mv = catalog::dirac_mv(&envar).unwrap();
        out.push(("mv".into(), certify::verify_mv(&mv, &battery, &tol).unwrap()));
    }
    let diss = catalog::exact_dissweak(envar).unwrap();
    out.push(("dissweak".into(), certify::verify_dissweak(&diss, &battery, &tol).unwrap()));
    out
}

fn exact_regression() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for name in ["shear", "isentropic-torus", "isentropic-box", "korteweg-box", "poisson-box"] {
        let mut worst = Vec::new();
        for n in [32, 64] {
            let h = 1.0 / n as f64;
            let bound = 10.0 * (h * h + h * h);
            let mut w = 0.0f64;
            for (kind, rep) in exact_case(name, n) {
                let (ok, m) = weak_form_check(&rep, bound);
                if !ok {
                    pass = false;
                    lines.push(format!("{name}/{kind} n={n} fails: {:?}", rep.failing_clauses()));
                }
                w = w.max(m);
            }
            worst.push(w);
        }
        // Residuals at roundoff level cannot shrink further.
        let ratio = worst[0] / worst[1];
        let converged = worst[0] < 1e-12;
        if !(converged || ratio >= 3.5) {
            pass = false;
        }
        lines.push(format!("{name} max residual {:.2e} -> {:.2e} (ratio {ratio:.2})", worst[0], worst[1]));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 5

fn round_trip() -> Outcome {
    let mut pass = true;
    let mut worst_e = 0.0f64;
    let mut notes = Vec::new();
    for seed in 0..20u64 {
        let time = TimeGrid::new(1.0, 16).unwrap();
        let diss = catalog::sheared_defect(SystemKind::IncompressibleEuler, seed, 16, time).unwrap();
        let grid = *diss.envar.grid();
        let battery = SystemSpec::incompressible().battery(&grid, &time, BATTERY, SEED + seed);
        let tol = TolModel::new(TolModel::DEFAULT_C, &grid, &time);
        let pre = certify::verify_dissweak(&diss, &battery, &tol).unwrap();
        if !pre.pass {
            pass = false;
            notes.push(format!("seed {seed}: input fails {:?}", pre.failing_clauses()));
            continue;
        }
        let mv = convert::diss_to_mv(&diss).unwrap();
        let rmv = certify::verify_mv(&mv, &battery, &tol).unwrap();
        let back = convert::mv_to_envar(&mv).unwrap();
        let same_v = back.traj.states == diss.envar.traj.states;
        let de = back.energy.iter().zip(&diss.envar.energy).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_e = worst_e.max(de);
        let renv = certify::verify_envar(&back, &battery, &tol.scaled(2.0)).unwrap();
        if !(rmv.pass && same_v && de <= 1e-10 && renv.pass) {
            pass = false;
            notes.push(format!(
                "seed {seed}: mv {:?}, v equal {same_v}, dE {de:.1e}, envar {:?}",
                rmv.failing_clauses(),
                renv.failing_clauses()
            ));
        }
    }
    outcome(pass, format!("20 certificates, max |dE| {worst_e:.1e} {}", notes.join("; ")))
}

// ---------------------------------------------------------------- 6

/// Per sample, the largest budget lower bound `max_k max(-c_k/K(chi_k),
/// c_k/K(-chi_k))` together with `|c_k|` of the maximizing constraint. Any
/// nonnegative ray/scalar defect reproducing `c` has budget at least this.
fn required_budget(cert: &certify::EnVarCert, battery: &[gensol::domain::TestFunction]) -> Vec<(f64, f64)> {
    let sys = *cert.system();
    let grid = *cert.grid();
    let (shapes, rhs) = convert::constraint_targets(cert, battery).unwrap();
    let weights: Vec<(f64, f64)> = shapes
        .iter()
        .map(|chi| {
            let evals = chi.tabulate(&grid).at(0.0);
            let neg: Vec<_> = evals
                .iter()
                .map(|e| {
                    let mut m = *e;
                    m.grad_phi.iter_mut().for_each(|r| r.iter_mut().for_each(|x| *x = -*x));
                    m.div_phi = -m.div_phi;
                    m
                })
                .collect();
            let k_plus = systems::regweight_from_sups(&sys, grid.dim(), &GradientSups::from_evals(grid.dim(), &evals), false);
            let k_minus = systems::regweight_from_sups(&sys, grid.dim(), &GradientSups::from_evals(grid.dim(), &neg), false);
            (k_plus, k_minus)
        })
        .collect();
    rhs.iter()
        .map(|row| {
            row.iter()
                .zip(&weights)
                .map(|(c, (kp, km))| {
                    let lo = if *kp > 0.0 { -c / kp } else if *c < 0.0 { f64::INFINITY } else { 0.0 };
                    let hi = if *km > 0.0 { c / km } else if *c > 0.0 { f64::INFINITY } else { 0.0 };
                    (lo.max(hi), c.abs())
                })
                .fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a })
        })
        .collect()
}

fn recover(cert: &certify::EnVarCert, label: &str, notes: &mut Vec<String>) -> bool {
    let sys = *cert.system();
    let battery = sys.battery(cert.grid(), cert.time(), BATTERY, SEED);
    let tol = TolModel::new(TolModel::DEFAULT_C, cert.grid(), cert.time());
    match convert::envar_to_diss(cert, &battery, &SolverOptions::default()).unwrap() {
        DissOutcome::Feasible { cert: d, slabs } => {
            let r = certify::verify_dissweak(&d, &battery, &tol).unwrap();
            let slack = slabs.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
            if !(r.pass && slack >= -1e-10) {
                notes.push(format!("{label}: recovered defects fail {:?}, slack {slack:.1e}", r.failing_clauses()));
                return false;
            }
            true
        }
        other => {
            notes.push(format!("{label}: {}", describe(&other)));
            false
        }
    }
}

fn describe(o: &DissOutcome) -> String {
    match o {
        DissOutcome::Feasible { .. } => "feasible".into(),
        DissOutcome::Infeasible { sample, violation, .. } => format!("infeasible at sample {sample}, violation {violation:.2e}"),
        DissOutcome::NotConverged { sample, violation, iterations } => {
            format!("not converged at sample {sample} after {iterations} iterations, violation {violation:.2e}")
        }
    }
}

fn constructive_direction() -> Outcome {
    let mut notes = Vec::new();
    let mut recovered = 0;
    let time = TimeGrid::new(1.0, 16).unwrap();
    let jump = catalog::energy_jump(16, time, 1.0).unwrap();
    let jump_ok = recover(&jump, "energy-jump", &mut notes);
    let kind_of = |seed: u64| if seed % 2 == 0 { SystemKind::IncompressibleEuler } else { SystemKind::IsentropicEuler };
    for seed in 0..10u64 {
        let diss = catalog::sheared_defect(kind_of(seed), 100 + seed, 16, time).unwrap();
        if recover(&diss.envar, &format!("random {seed}"), &mut notes) {
            recovered += 1;
        }
    }

    // Planted: E = energy + 0.9 * (budget any defect would need). With that
    // energy every defect leaves a residual of at least 0.1 |c| in the
    // binding constraint; candidates where this stays below 1.5x the solver
    // tolerance are not resolvable non-solutions at this grid and are skipped.
    let mut rejected = 0;
    let mut planted = 0;
    let mut skipped = 0;
    let mut seed = 200u64;
    while planted < 10 && seed < 260 {
        let envar = catalog::sheared_defect(kind_of(seed), seed, 16, time).unwrap().envar;
        seed += 1;
        let battery = envar.system().battery(envar.grid(), envar.time(), BATTERY, SEED);
        let need = required_budget(&envar, &battery);
        let tol = convert::default_solver_tol(&envar);
        if need.iter().all(|(_, c)| 0.1 * c < 1.5 * tol) {
            skipped += 1;
            continue;
        }
        planted += 1;
        let base = envar.traj.energies().unwrap();
        let cert = certify::EnVarCert::new(envar.traj.clone(), base.iter().zip(&need).map(|(e, z)| e + 0.9 * z.0).collect()).unwrap();
        match convert::envar_to_diss(&cert, &battery, &SolverOptions::default()).unwrap() {
            DissOutcome::Infeasible { .. } => rejected += 1,
            other => notes.push(format!("planted seed {}: {}", seed - 1, describe(&other))),
        }
    }
    let pass = jump_ok && recovered == 10 && planted == 10 && rejected == 10;
    outcome(
        pass,
        format!(
            "energy-jump recovered {jump_ok}, random recovered {recovered}/10, planted rejected {rejected}/{planted} ({skipped} unresolvable candidates skipped) {}",
            notes.join("; ")
        ),
    )
}

// ---------------------------------------------------------------- 7

fn budget_case(sys: SystemSpec, a: SymMat, b: f64, zeta: f64) -> Report {
    let grid = Grid::unit(2, Topology::Torus, 8);
    let time = TimeGrid::new(1.0, 4).unwrap();
    let state = State::Compressible { rho: Field::filled(grid, 1.0), m: Field::filled(grid, [0.0; 3]) };
    let traj = Trajectory::new(sys, grid, time, vec![state; 5]).unwrap();
    let base = traj.energies().unwrap();
    let envar = certify::EnVarCert::new(traj, base.iter().map(|e| e + zeta).collect()).unwrap();
    let r1 = DiscMeasure::new(grid, vec![a; grid.len()], vec![]).unwrap();
    let r2 = DiscMeasure::new(grid, vec![b; grid.len()], vec![]).unwrap();
    let diss = certify::DissWeakCert::new(envar, vec![r1; 5], Some(vec![r2; 5])).unwrap();
    let battery = sys.battery(&grid, &time, BATTERY, SEED);
    certify::verify_dissweak(&diss, &battery, &TolModel::new(TolModel::DEFAULT_C, &grid, &time)).unwrap()
}

fn budget_norms() -> Outcome {
    let b = 0.3;
    let cases = [
        (SystemSpec::isentropic(1.4).unwrap(), SymMat::from_upper(2, &[1.0, 0.0, 0.2]).unwrap(), 0.5, MatNormKind::Trace, MatNormKind::MMax),
        (SystemSpec::korteweg(1.4).unwrap(), SymMat::from_upper(2, &[1.0, 0.0, 0.2]).unwrap(), 1.0, MatNormKind::MMax, MatNormKind::Trace),
        (SystemSpec::poisson(1.4, 0.0).unwrap(), SymMat::from_upper(2, &[1.0, 0.0, -0.5]).unwrap(), 0.5, MatNormKind::Trace, MatNormKind::Spectral),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (sys, a, c, right, wrong) in cases {
        let scalar = b / (sys.gamma() - 1.0);
        let correct = c * a.norm(right) + scalar;
        let other = c * a.norm(wrong) + scalar;
        // the signed trace is what a sign-unaware Poisson budget would use
        let signed = 0.5 * a.trace() + scalar;
        let mut flips = true;
        for (zeta, expect) in [(correct * (1.0 + 1e-6), true), (correct * (1.0 - 1e-6), false)] {
            let r = budget_case(sys, a, b, zeta);
            let budget_ok = r.clause(clause::DEFECT_BUDGET).all(|x| x.pass);
            flips &= budget_ok == expect && r.pass == expect;
        }
        // between the correct and an alternative budget the verdict follows the correct norm
        let mid = 0.5 * (correct + other);
        let r = budget_case(sys, a, b, mid);
        flips &= r.pass == (mid >= correct);
        if sys.kind() == SystemKind::EulerPoisson {
            let r = budget_case(sys, a, b, 0.5 * (signed + correct));
            flips &= !r.pass;
        }
        pass &= flips && (correct - other).abs() > 1e-3;
        lines.push(format!("{:?}: correct {correct:.3} vs {wrong:?} {other:.3} flips {flips}", sys.kind()));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 8

fn poisson_error(topo: Topology, n: usize, mode: PoissonMode) -> f64 {
    let grid = Grid::unit(2, topo, n);
    let (k, lam) = match topo {
        Topology::Box => (PI, PI * PI * (1.0 + 4.0)),
        Topology::Torus => (2.0 * PI, 4.0 * PI * PI * (1.0 + 4.0)),
    };
    let f = |x: &[f64; 3]| (k * x[0]).cos() * (2.0 * k * x[1]).cos();
    let rho = Field::from_fn(grid, |x| 2.0 + f(x));
    let v = neumann_poisson_solve_with(&rho, mode);
    grid.centers().iter().zip(v.values()).map(|(x, v)| (v - f(x) / lam).abs()).fold(0.0, f64::max)
}

fn poisson_mms() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for topo in [Topology::Box, Topology::Torus] {
        let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| poisson_error(topo, n, PoissonMode::Stencil)).collect();
        let spectral = poisson_error(topo, 32, PoissonMode::Spectral);
        let ok = errs[0] / errs[1] >= 3.5 && errs[1] / errs[2] >= 3.5 && spectral <= 1e-10;
        pass &= ok;
        lines.push(format!("{topo:?} stencil {:.2e}/{:.2e}/{:.2e}, spectral {spectral:.1e}", errs[0], errs[1], errs[2]));
    }
    for n in [32, 64] {
        let time = TimeGrid::new(1.0, 8).unwrap();
        let diss = catalog::poisson_mms(n, time, 0.2).unwrap();
        let sys = *diss.envar.system();
        let battery = sys.battery(diss.envar.grid(), &time, BATTERY, SEED);
        let tol = TolModel::new(TolModel::DEFAULT_C, diss.envar.grid(), &time);
        let re = certify::verify_envar(&diss.envar, &battery, &tol).unwrap();
        let rd = certify::verify_dissweak(&diss, &battery, &tol).unwrap();
        pass &= re.pass && rd.pass;
        lines.push(format!(
            "mms n={n}: envar {} dissweak {} (momentum residual {:.1e})",
            re.pass,
            rd.pass,
            rd.max_abs_residual(clause::MOMENTUM_EQUATION)
        ));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 9

fn regweight_comparison() -> Outcome {
    let sys = SystemSpec::poisson(1.6, 0.0).unwrap();
    let mut pass = true;
    let mut strict = 0;
    let mut total = 0;
    for d in [2, 3] {
        for topo in [Topology::Box, Topology::Torus] {
            let grid = Grid::unit(d, topo, if d == 2 { 12 } else { 6 });
            let time = TimeGrid::new(1.0, 4).unwrap();
            for f in domain::battery(Admissibility::Tangential, &grid, &time, 24, 9) {
                for t in [0.0, 0.5, 1.0] {
                    let fine = regweight(&sys, &f, &grid, t, true);
                    let coarse = regweight(&sys, &f, &grid, t, false);
                    total += 1;
                    if fine > coarse + 1e-12 {
                        pass = false;
                    }
                    if fine < coarse - 1e-12 {
                        strict += 1;
                    }
                }
            }
        }
    }
    outcome(pass && strict > 0, format!("{total} comparisons, strict in {strict}"))
}

// ---------------------------------------------------------------- main

fn main() {
    let criteria: [(u32, &str, f64, fn() -> Outcome); 9] = [
        (1, "cone calculus", 1.0, cone_calculus),
        (2, "norm duality oracle", 10.0, norm_duality),
        (3, "cone-valued measure duality", 10.0, measure_duality),
        (4, "exact-solution regression", 30.0, exact_regression),
        (5, "dissipative weak -> measure-valued -> energy-variational round trip", 30.0, round_trip),
        (6, "defect recovery and planted infeasibility", 300.0, constructive_direction),
        (7, "per-system budget norms", 10.0, budget_norms),
        (8, "Poisson solver and manufactured steady state", 10.0, poisson_mms),
        (9, "Poisson regularity weights", 1.0, regweight_comparison),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let ok = out.pass && secs <= limit;
        println!(
            "criterion {id} [{name}]: {} ({:.2}s of {limit}s) {}",
            if ok { "PASS" } else { "FAIL" },
            secs,
            out.detail
        );
        if !ok {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
