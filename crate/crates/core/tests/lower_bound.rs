use bidlab::classes::class_e;
use bidlab::lower_bound::{build_dual_certificate, build_primal, discretize, export_lp_text, PrimalLP, Sense, Var};
use bidlab::pareto::{build_algorithm_a, DEFAULT_TAIL_TOL};
use bidlab::WorkBounds;
use minilp::{ComparisonOp, OptimizationDirection, Problem};

/// Solves an LP with the independent simplex solver from `minilp`.
fn solve(lp: &PrimalLP) -> f64 {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = lp
        .variables()
        .iter()
        .map(|v| {
            let obj = if *v == Var::C { 1.0 } else { 0.0 };
            (*v, problem.add_var(obj, (0.0, f64::INFINITY)))
        })
        .collect();
    let lookup = |v: Var| vars.iter().find(|(w, _)| *w == v).unwrap().1;
    for row in &lp.rows {
        let expr: Vec<_> = row.terms.iter().map(|&(v, c)| (lookup(v), c)).collect();
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
        };
        problem.add_constraint(expr.as_slice(), op, row.rhs);
    }
    problem.solve().expect("LP solvable").objective()
}

#[test]
fn two_variable_instance_has_unit_optimum() {
    let lp = build_primal(4.0, 1, 1, 0).unwrap();
    assert_eq!(lp.rows.len(), 5);
    assert_eq!(lp.variables().len(), 3);
    assert!((solve(&lp) - 1.0).abs() < 1e-12);
}

#[test]
fn exported_lp_solves_between_bounds() {
    let lp = build_primal(4.0, 10, 200, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.lp");
    export_lp_text(&lp, &path).unwrap();
    let parsed = PrimalLP::from_lp_text(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed, lp);
    let opt = solve(&parsed);
    let w_hi = WorkBounds::new(4.0).unwrap().w_hi;
    assert!(opt >= 1.0 && opt <= 4.0 - w_hi + 0.1, "opt={opt}");
    // Weak duality against the analytic certificate with the same a, N, M.
    // The simplex solver accepts rows violated by up to ~1e-8, which can
    // put its optimum that far below the true one.
    let cert = build_dual_certificate(10, 200, 4.0).unwrap();
    assert_eq!(cert.m, 9);
    assert!(cert.lambda <= opt + 1e-7, "lambda={} opt={opt}", cert.lambda);
}

#[test]
fn discretized_functions_bound_every_certificate() {
    let (a, n) = (20, 400);
    let cert = build_dual_certificate(a, n, 4.0).unwrap();
    let lp = build_primal(4.0, a, n, a - 1).unwrap();
    let b = build_algorithm_a(4.0, DEFAULT_TAIL_TOL).unwrap();
    let p = discretize(&b, &lp, 0.0);
    assert!(lp.max_violation(&p) <= 1e-9, "violation={}", lp.max_violation(&p));
    assert!(p.c >= cert.lambda);

    // Class E with w = w_hi(4) is exactly 4-robust.
    let w = WorkBounds::new(4.0).unwrap().w_hi;
    let e = class_e(w).unwrap();
    let lp4 = build_primal(w * (1.0 / w).exp(), a, n, a - 1).unwrap();
    let p = discretize(&e, &lp4, 0.0);
    assert!(lp4.max_violation(&p) <= 1e-9);
    assert!(p.c >= cert.lambda);
}

#[test]
fn large_certificate_is_feasible_and_tight() {
    let cert = build_dual_certificate(50, 2000, 4.0).unwrap();
    let check = cert.check();
    assert!(check.max_violation <= 1e-9);
    let w_hi = WorkBounds::new(4.0).unwrap().w_hi;
    assert!(cert.lambda >= 4.0 - w_hi - 0.01);
    assert!(cert.lambda <= 4.0 - w_hi);
}
