use std::collections::BTreeSet;

use proptest::prelude::*;

use reachkit::lp::format::{parse_lp, write_lp};
use reachkit::lp::{self, Direction, LinearProgram, LpResult, Relation};
use reachkit::rational::{q, qi};
use reachkit::{LinearTerm, Rational};

/// Rows `a·x ≤ b` with small integer data.
type Row = (Vec<i64>, i64);

fn program(n: usize, rows: &[Row], boxed: i64) -> LinearProgram {
    let mut lp = LinearProgram::with_vars(n);
    for i in 0..n {
        lp.add_le(LinearTerm::var(i), qi(boxed));
        lp.add_ge(LinearTerm::var(i), qi(-boxed));
    }
    for (a, b) in rows {
        lp.add_le(LinearTerm::from_pairs(a.iter().enumerate().map(|(i, &c)| (i, qi(c)))), qi(*b));
    }
    lp
}

/// Solves the square system `m·x = r`, `None` when singular.
fn solve_square(mut m: Vec<Vec<Rational>>, mut r: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = r.len();
    for col in 0..n {
        let p = (col..n).find(|&i| !m[i][col].is_zero())?;
        m.swap(col, p);
        r.swap(col, p);
        for i in 0..n {
            if i == col || m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] / &m[col][col];
            let pivot = m[col].clone();
            for (v, p) in m[i].iter_mut().zip(&pivot).skip(col) {
                *v -= &(&f * p);
            }
            let d = &f * &r[col];
            r[i] -= &d;
        }
    }
    Some((0..n).map(|i| &r[i] / &m[i][i]).collect())
}

/// Every vertex of `{x : A x ≤ b}`: each choice of `n` rows whose system has
/// a unique solution satisfying all rows.
fn vertices(lp: &LinearProgram) -> Vec<Vec<Rational>> {
    let n = lp.num_vars();
    let rows: Vec<(Vec<Rational>, Rational)> = lp
        .constraints
        .iter()
        .map(|c| ((0..n).map(|i| c.term.get(i).cloned().unwrap_or_else(Rational::zero)).collect(), c.bound.clone()))
        .collect();
    let mut out = Vec::new();
    let mut pick = Vec::new();
    fn rec(rows: &[(Vec<Rational>, Rational)], n: usize, start: usize, pick: &mut Vec<usize>, lp: &LinearProgram, out: &mut Vec<Vec<Rational>>) {
        if pick.len() == n {
            let m = pick.iter().map(|&k| rows[k].0.clone()).collect();
            let r = pick.iter().map(|&k| rows[k].1.clone()).collect();
            if let Some(x) = solve_square(m, r) {
                if lp.satisfied_by(&x) {
                    out.push(x);
                }
            }
            return;
        }
        for k in start..rows.len() {
            pick.push(k);
            rec(rows, n, k + 1, pick, lp, out);
            pick.pop();
        }
    }
    rec(&rows, n, 0, &mut pick, lp, &mut out);
    out
}

fn rows_strategy(n: usize) -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec((prop::collection::vec(-3i64..=3, n), -4i64..=4), 1..=5)
}

fn lp_strategy() -> impl Strategy<Value = (usize, Vec<Row>, Vec<i64>)> {
    (1usize..=3).prop_flat_map(|n| (Just(n), rows_strategy(n), prop::collection::vec(-3i64..=3, n)))
}

#[test]
fn documented_examples() {
    let mut lp = LinearProgram::with_vars(1);
    lp.add_le(LinearTerm::var(0), qi(1));
    lp.add_ge(LinearTerm::var(0), qi(2));
    assert_eq!(lp::solve(&lp).unwrap(), LpResult::Infeasible);

    let mut lp = LinearProgram::with_vars(1);
    lp.add_ge(LinearTerm::var(0), q(3, 2));
    lp.set_objective(Direction::Minimize, LinearTerm::var(0));
    assert_eq!(
        lp::solve(&lp).unwrap(),
        LpResult::Optimal {
            assignment: vec![q(3, 2)],
            value: q(3, 2)
        }
    );

    let mut lp = LinearProgram::with_vars(1);
    lp.add_lt(LinearTerm::var(0), qi(0));
    lp.add_gt(LinearTerm::var(0), qi(-1));
    let r = lp::solve(&lp).unwrap();
    let x = &r.assignment().expect("feasible")[0];
    assert!(*x < qi(0) && *x > qi(-1));

    // x ≥ 1 and x ≤ z with z a slack to be negative
    let mut lp = LinearProgram::with_vars(2);
    lp.add_ge(LinearTerm::var(0), qi(1));
    lp.add_le(LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))]), qi(0));
    assert_eq!(lp::minimize_slacks(&lp, &[1]).unwrap(), LpResult::Infeasible);
    let mut lp = LinearProgram::with_vars(2);
    lp.add_ge(LinearTerm::var(0), qi(0));
    lp.add_le(LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))]), qi(5));
    let r = lp::minimize_slacks(&lp, &[1]).unwrap();
    assert!(r.assignment().unwrap()[1].is_negative());
}

#[test]
fn ranges_of_a_triangle() {
    // x ≥ 0, y ≥ 0, x + y < 2
    let mut lp = LinearProgram::with_vars(2);
    lp.add_ge(LinearTerm::var(0), qi(0));
    lp.add_ge(LinearTerm::var(1), qi(0));
    lp.add_lt(LinearTerm::from_pairs([(0, qi(1)), (1, qi(1))]), qi(2));
    let terms = [LinearTerm::var(0), LinearTerm::from_pairs([(0, qi(1)), (1, qi(-1))])];
    let (r, _) = lp::ranges(&lp, &terms).unwrap();
    assert_eq!(r.unwrap(), vec![(Some(qi(0)), Some(qi(2))), (Some(qi(-2)), Some(qi(2)))]);

    let mut open = LinearProgram::with_vars(1);
    open.add_ge(LinearTerm::var(0), qi(1));
    let (r, _) = lp::ranges(&open, &[LinearTerm::var(0)]).unwrap();
    assert_eq!(r.unwrap(), vec![(Some(qi(1)), None)]);
    open.add_le(LinearTerm::var(0), qi(0));
    assert!(lp::ranges(&open, &[LinearTerm::var(0)]).unwrap().0.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn feasibility_and_optimum_match_vertex_enumeration((n, rows, c) in lp_strategy()) {
        let mut lp = program(n, &rows, 3);
        let vs = vertices(&lp);
        let objective = LinearTerm::from_pairs(c.iter().enumerate().map(|(i, &v)| (i, qi(v))));
        lp.set_objective(Direction::Minimize, objective.clone());
        match lp::solve(&lp).unwrap() {
            LpResult::Optimal { assignment, value } => {
                prop_assert!(lp.satisfied_by(&assignment));
                prop_assert_eq!(&objective.eval(&assignment), &value);
                let best = vs.iter().map(|v| objective.eval(v)).min().expect("a vertex");
                prop_assert_eq!(value, best);
            }
            LpResult::Infeasible => prop_assert!(vs.is_empty()),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn feasible_grid_points_imply_feasibility((n, rows, _) in lp_strategy()) {
        let lp = program(n, &rows, 2);
        let grid: Vec<i64> = (-4..=4).collect();
        let mut any = false;
        let mut x = vec![0usize; n];
        'outer: loop {
            let point: Vec<Rational> = x.iter().map(|&k| q(grid[k], 2)).collect();
            if lp.satisfied_by(&point) {
                any = true;
                break;
            }
            for d in x.iter_mut() {
                *d += 1;
                if *d < grid.len() {
                    continue 'outer;
                }
                *d = 0;
            }
            break;
        }
        let r = lp::solve(&lp).unwrap();
        if any {
            prop_assert!(r.is_feasible());
        }
        if let Some(a) = r.assignment() {
            prop_assert!(lp.satisfied_by(a));
        }
    }

    #[test]
    fn scaling_rows_keeps_the_answer((n, rows, c) in lp_strategy(), k in 1i64..=9, den in 1i64..=7) {
        let mut lp = program(n, &rows, 3);
        let objective = LinearTerm::from_pairs(c.iter().enumerate().map(|(i, &v)| (i, qi(v))));
        lp.set_objective(Direction::Maximize, objective);
        let mut scaled = lp.clone();
        let f = q(k, den);
        for row in &mut scaled.constraints {
            row.term = row.term.scale(&f);
            row.bound = &row.bound * &f;
        }
        let a = lp::solve(&lp).unwrap();
        let b = lp::solve(&scaled).unwrap();
        prop_assert_eq!(a.is_feasible(), b.is_feasible());
        if let (LpResult::Optimal { value: va, .. }, LpResult::Optimal { value: vb, .. }) = (&a, &b) {
            prop_assert_eq!(va, vb);
        }
        if let Some(x) = a.assignment() {
            prop_assert!(scaled.satisfied_by(x));
        }
    }

    #[test]
    fn optimum_is_not_improved_along_probe_directions((n, rows, c) in lp_strategy()) {
        let mut lp = program(n, &rows, 3);
        let objective = LinearTerm::from_pairs(c.iter().enumerate().map(|(i, &v)| (i, qi(v))));
        lp.set_objective(Direction::Minimize, objective.clone());
        if let LpResult::Optimal { assignment, value } = lp::solve(&lp).unwrap() {
            let step = q(1, 64);
            for i in 0..n {
                for sign in [1, -1] {
                    let mut y = assignment.clone();
                    y[i] += &(&step * &qi(sign));
                    if lp.satisfied_by(&y) {
                        prop_assert!(objective.eval(&y) >= value);
                    }
                }
            }
        }
    }

    #[test]
    fn ranges_agree_with_separate_solves((n, rows, _) in lp_strategy()) {
        let lp = program(n, &rows, 3);
        let terms: Vec<LinearTerm> = (0..n).map(LinearTerm::var).collect();
        let (r, _) = lp::ranges(&lp, &terms).unwrap();
        let Some(r) = r else {
            prop_assert!(!lp::solve(&lp).unwrap().is_feasible());
            return Ok(());
        };
        for (t, (lo, hi)) in terms.iter().zip(r) {
            for (dir, got) in [(Direction::Minimize, lo), (Direction::Maximize, hi)] {
                let mut single = lp.clone();
                single.set_objective(dir, t.clone());
                match lp::solve(&single).unwrap() {
                    LpResult::Optimal { value, .. } => prop_assert_eq!(Some(value), got),
                    other => prop_assert!(false, "unexpected {:?}", other),
                }
            }
        }
    }

    #[test]
    fn lp_text_round_trips((n, rows, c) in lp_strategy(), binary in any::<bool>()) {
        let mut lp = program(n, &rows, 3);
        lp.push(LinearTerm::from_pairs([(0, q(1, 3))]), Relation::Eq, q(1, 7));
        lp.set_objective(Direction::Minimize, LinearTerm::from_pairs(c.iter().enumerate().map(|(i, &v)| (i, qi(v)))));
        let bins: BTreeSet<usize> = if binary { [0].into_iter().collect() } else { BTreeSet::new() };
        let text = write_lp(&lp, &bins, &[]);
        let (back, back_bins) = parse_lp(&text).unwrap();
        // variables are renumbered by first appearance; names survive
        let names = |lp: &LinearProgram, set: &BTreeSet<usize>| set.iter().map(|&v| lp.names[v].clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(names(&back, &back_bins), names(&lp, &bins));
        prop_assert_eq!(back.constraints.len(), lp.constraints.len());
        prop_assert_eq!(lp::solve(&back).unwrap().is_feasible(), lp::solve(&lp).unwrap().is_feasible());
    }
}
