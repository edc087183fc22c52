//! Randomised checks of variable elimination and satisfiability for linear
//! rational constraints, against exact point tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::logic::{rat, Domain, Instantiation, LinExpr, Rat, Rel, Sort, Term, Var};
use crate::theory::lra::{fm_eliminate, lra_sat, LinAtom, LraTheory, Norm, PolyConstraint, System};
use crate::theory::Theory;

#[derive(Clone, Debug, Default, Serialize)]
pub struct FmReport {
    pub cases: usize,
    /// Cases whose constraint had a solution.
    pub satisfiable: usize,
    pub failures: Vec<String>,
}

impl FmReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn random_atom(rng: &mut ChaCha8Rng, vars: &[Var]) -> Norm {
    let mut e = LinExpr::constant(rat(rng.random_range(-6..=6)));
    for v in vars {
        if rng.random_bool(0.7) {
            e.add_term(v.clone(), rat(rng.random_range(-3..=3)));
        }
    }
    let rel = [Rel::Le, Rel::Le, Rel::Lt, Rel::Eq][rng.random_range(0..4)];
    LinAtom::new(e, rel)
}

/// One or two systems of one to four atoms.
pub fn random_constraint(rng: &mut ChaCha8Rng, vars: &[Var]) -> PolyConstraint {
    let systems = rng.random_range(1..=2);
    let mut out = PolyConstraint::falsity();
    for _ in 0..systems {
        let n = rng.random_range(1..=4);
        out = out.or(&PolyConstraint::conj(
            (0..n).map(|_| random_atom(rng, vars)),
        ));
    }
    out
}

fn atoms(c: &PolyConstraint) -> Vec<&LinAtom> {
    c.systems().iter().flat_map(System::iter).collect()
}

/// Every critical value, every midpoint between neighbours, and one point beyond each end.
fn spread(mut pts: Vec<Rat>) -> Vec<Rat> {
    pts.sort();
    pts.dedup();
    let mut out = pts.clone();
    for w in pts.windows(2) {
        out.push((&w[0] + &w[1]) / rat(2));
    }
    let lo = pts.first().cloned().unwrap_or_else(|| rat(0));
    let hi = pts.last().cloned().unwrap_or_else(|| rat(0));
    out.push(lo - rat(1));
    out.push(hi + rat(1));
    out
}

/// Values of `v` covering every sign pattern of the atoms, once all other
/// variables are fixed by `fixed`.
fn line_points(c: &PolyConstraint, v: &Var, fixed: &BTreeMap<Var, Rat>) -> Vec<Rat> {
    let mut pts = Vec::new();
    for a in atoms(c) {
        let k = a.expr.coeff(v);
        if k == rat(0) {
            continue;
        }
        let mut rest = a.expr.constant.clone();
        for (w, c) in &a.expr.coeffs {
            if w != v {
                rest += c * fixed.get(w).cloned().unwrap_or_else(|| rat(0));
            }
        }
        pts.push(-rest / k);
    }
    spread(pts)
}

/// A solution of a constraint over at most two variables, found by exact
/// point tests: the first variable ranges over boundary intersections and the
/// second is then decided on its own line.
pub fn grid_solution(c: &PolyConstraint, vars: &[Var]) -> Option<BTreeMap<Var, Rat>> {
    assert!(vars.len() <= 2, "point tests handle at most two variables");
    let holds = |pt: &BTreeMap<Var, Rat>| c.eval(&|v| pt.get(v).cloned()).unwrap_or(false);
    match vars {
        [] => holds(&BTreeMap::new()).then(BTreeMap::new),
        [x] => line_points(c, x, &BTreeMap::new())
            .into_iter()
            .map(|r| BTreeMap::from([(x.clone(), r)]))
            .find(holds),
        [x, y] => {
            let all = atoms(c);
            let mut xs = Vec::new();
            for (i, a) in all.iter().enumerate() {
                let (ax, ay) = (a.expr.coeff(x), a.expr.coeff(y));
                if ay == rat(0) && ax != rat(0) {
                    xs.push(-a.expr.constant.clone() / ax.clone());
                }
                for b in &all[i + 1..] {
                    let (bx, by) = (b.expr.coeff(x), b.expr.coeff(y));
                    let det = &ax * &by - &bx * &ay;
                    if det != rat(0) {
                        // a: ax·x + ay·y + ac = 0, b: bx·x + by·y + bc = 0
                        xs.push((&ay * &b.expr.constant - &by * &a.expr.constant) / det);
                    }
                }
            }
            for xv in spread(xs) {
                let fixed = BTreeMap::from([(x.clone(), xv.clone())]);
                for yv in line_points(c, y, &fixed) {
                    let pt = BTreeMap::from([(x.clone(), xv.clone()), (y.clone(), yv)]);
                    if holds(&pt) {
                        return Some(pt);
                    }
                }
            }
            None
        }
        _ => unreachable!(),
    }
}

/// Eliminate the last of three variables, pick a solution of the result by
/// point tests, extend it with the backend's witness and check the original.
/// Points of the original found on a sample grid must survive elimination.
pub fn round_trip_suite(cases: usize, seed: u64) -> FmReport {
    let th = LraTheory::default();
    let r = Sort::Rational;
    let (x, y, z) = (Var::meta("X", r), Var::meta("Y", r), Var::meta("Z", r));
    let d = Domain::default()
        .add_meta(x.clone())
        .and_then(|d| d.add_meta(y.clone()))
        .and_then(|d| d.add_meta(z.clone()));
    let d = d.expect("fresh metas");
    let grid: Vec<Rat> = (-4..=4).map(|k| crate::logic::ratio(k, 2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FmReport {
        cases,
        ..FmReport::default()
    };
    for case in 0..cases {
        let sigma = random_constraint(&mut rng, &[x.clone(), y.clone(), z.clone()]);
        let mut fail = |msg: String| {
            report
                .failures
                .push(format!("case {}: {}: {}", case, sigma, msg))
        };
        let down = match fm_eliminate(&sigma, &z, th.caps) {
            Ok(c) => c,
            Err(e) => {
                fail(format!("elimination failed: {}", e));
                continue;
            }
        };
        for _ in 0..8 {
            let pick = |rng: &mut ChaCha8Rng| grid[rng.random_range(0..grid.len())].clone();
            let pt = BTreeMap::from([
                (x.clone(), pick(&mut rng)),
                (y.clone(), pick(&mut rng)),
                (z.clone(), pick(&mut rng)),
            ]);
            if sigma.eval(&|v| pt.get(v).cloned()) == Some(true)
                && down.eval(&|v| pt.get(v).cloned()) != Some(true)
            {
                fail(format!(
                    "{:?} solves the constraint but not its projection {}",
                    pt, down
                ));
            }
        }
        let Some(sample) = grid_solution(&down, &[x.clone(), y.clone()]) else {
            if lra_sat(&sigma, th.caps) != Ok(false) {
                fail(format!(
                    "projection {} has no solution but the constraint is satisfiable",
                    down
                ));
            }
            continue;
        };
        report.satisfiable += 1;
        let map = sample
            .iter()
            .map(|(v, r)| (v.name.clone(), Term::Num(r.clone())))
            .collect();
        let rho = Instantiation::from_map_unchecked(map);
        let t = match th.witness(&sigma, &rho, &d) {
            Ok(t) => t,
            Err(e) => {
                fail(format!("no witness over {}: {}", rho, e));
                continue;
            }
        };
        let full = rho.extended(&z.name, t.clone());
        if th.compatible(&full, &sigma, &d) != Ok(true) {
            fail(format!("witness {} over {} does not solve it", t, rho));
        }
    }
    report
}

/// Satisfiability over two variables against exact point tests.
pub fn sat_suite(cases: usize, seed: u64) -> FmReport {
    let caps = LraTheory::default().caps;
    let r = Sort::Rational;
    let vars = [Var::meta("X", r), Var::meta("Y", r)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FmReport {
        cases,
        ..FmReport::default()
    };
    for case in 0..cases {
        let c = random_constraint(&mut rng, &vars);
        let expected = grid_solution(&c, &vars).is_some();
        report.satisfiable += expected as usize;
        match lra_sat(&c, caps) {
            Ok(got) if got == expected => {}
            Ok(got) => report.failures.push(format!(
                "case {}: {}: lra_sat = {}, point tests = {}",
                case, c, got, expected
            )),
            Err(e) => report.failures.push(format!("case {}: {}: {}", case, c, e)),
        }
    }
    report
}
