use reachkit::rational::{q, qi};
use reachkit::reductions::gadgets::{default_eps, eval_gadget};
use reachkit::reductions::GadgetKind;
use reachkit::Rational;

fn ev(kind: &GadgetKind, x: &[Rational]) -> Rational {
    eval_gadget(kind, x).unwrap()
}

fn bits(n: usize) -> impl Iterator<Item = Vec<Rational>> {
    (0..1u32 << n).map(move |m| (0..n).map(|i| qi((m >> i & 1) as i64)).collect())
}

/// Rationals from −3 to 3 in steps of 1/12, plus some odd denominators.
fn probe_points() -> Vec<Rational> {
    let mut v: Vec<Rational> = (-36..=36).map(|k| q(k, 12)).collect();
    v.extend([q(1, 7), q(-5, 9), q(11, 13), q(-2, 3) * q(3, 5)]);
    v
}

const PARAMS: [(i64, i64, i64, i64); 3] = [(1, 1, 1, 1), (3, 2, 2, 1), (1, 2, 1, 3)];

fn params() -> impl Iterator<Item = (Rational, Rational)> {
    PARAMS.iter().map(|&(cn, cd, dn, dd)| (q(cn, cd), q(dn, dd)))
}

#[test]
fn not_gadget() {
    assert_eq!(ev(&GadgetKind::Not, &[qi(1)]), qi(0));
    assert_eq!(ev(&GadgetKind::Not, &[qi(0)]), qi(1));
}

#[test]
fn or_gadget() {
    assert_eq!(ev(&GadgetKind::Or3, &[qi(0), qi(0), qi(0)]), qi(0));
    for r in bits(3) {
        let any = r.iter().any(|v| *v == qi(1));
        assert_eq!(ev(&GadgetKind::Or3, &r) == qi(1), any, "{r:?}");
    }
}

#[test]
fn and_gadget() {
    for n in 1..=5 {
        for r in bits(n) {
            let all = r.iter().all(|v| *v == qi(1));
            assert_eq!(ev(&GadgetKind::AndN(n), &r) == qi(n as i64), all, "{r:?}");
        }
    }
}

#[test]
fn repaired_bool_is_zero_exactly_on_zero_and_one() {
    for x in probe_points() {
        let zero = ev(&GadgetKind::BoolRepaired, std::slice::from_ref(&x)).is_zero();
        assert_eq!(zero, x == qi(0) || x == qi(1), "x = {x}");
    }
}

#[test]
fn flawed_bool_stays_within_eps_on_the_unit_interval() {
    let eps = default_eps();
    assert_eq!(eps, q(1, 10));
    let kind = GadgetKind::BoolEps(eps.clone());
    for k in 0..=100 {
        let z = ev(&kind, &[q(k, 100)]);
        assert!(!z.is_negative() && z <= eps, "x = {k}/100 gives {z}");
    }
    assert_eq!(ev(&kind, &[&eps * &qi(2)]), qi(0));
}

#[test]
fn discrete_gadget() {
    for (c, d) in params() {
        let kind = GadgetKind::Discrete(c.clone(), d.clone());
        let a = -(&d / &(&c * &c));
        let b = c.recip();
        assert_eq!(ev(&kind, std::slice::from_ref(&a)), qi(0));
        assert_eq!(ev(&kind, std::slice::from_ref(&b)), qi(0));
        assert_eq!(ev(&kind, &[qi(0)]), d);
        for x in probe_points() {
            let zero = ev(&kind, std::slice::from_ref(&x)).is_zero();
            assert_eq!(zero, x == a || x == b, "c = {c}, d = {d}, x = {x}");
        }
    }
}

#[test]
fn inverse_eq_gadget() {
    for (c, _) in params() {
        let kind = GadgetKind::InverseEq(c.clone());
        for a in probe_points().into_iter().step_by(5) {
            for b in probe_points().into_iter().step_by(7) {
                let zero = ev(&kind, &[a.clone(), b.clone()]).is_zero();
                assert_eq!(zero, a == -&b, "{a}, {b}");
            }
            assert!(ev(&kind, &[a.clone(), -&a]).is_zero());
        }
    }
}

#[test]
fn norm_gadgets() {
    for (c, d) in params() {
        let dc = &d * &c;
        let d_c2 = &d / &(&c * &c);
        let norm = GadgetKind::Norm(c.clone(), d.clone());
        assert_eq!(ev(&norm, &[-&d_c2]), qi(0));
        assert_eq!(ev(&norm, &[c.recip()]), -&dc);
        let not = GadgetKind::NormNot(c.clone(), d.clone());
        assert_eq!(ev(&not, std::slice::from_ref(&d_c2)), -&dc);
        assert_eq!(ev(&not, &[-c.recip()]), qi(0));
    }
}

#[test]
fn restricted_or_at_zero() {
    for (c, d) in params() {
        let zeros = [qi(0), qi(0), qi(0)];
        let le = ev(&GadgetKind::OrLeOne(c.clone(), d.clone()), &zeros);
        assert_eq!(le, &(&d * &c.pow(4)) - &(&d * &c.pow(5)));
        let geq = ev(&GadgetKind::OrGeqOne(c.clone(), d.clone()), &zeros);
        assert_eq!(geq, &(&d * &c.pow(4)) - &(&d * &c.pow(3)));
    }
}

/// Cases for `r ∈ {−dc, 0}³`. The or gadget reads each literal with weight
/// `−c`, so the values on its input layer are `−c·r`.
fn restricted_or_cases(kind: impl Fn(Rational, Rational) -> GadgetKind, applies: impl Fn(&Rational) -> bool) -> usize {
    let mut checked = 0;
    for (c, d) in params() {
        if !applies(&c) {
            continue;
        }
        let dc = &d * &c;
        let kind = kind(c.clone(), d.clone());
        for r in bits(3) {
            let r: Vec<Rational> = r.iter().map(|b| -&(b * &dc)).collect();
            if r.iter().all(Rational::is_zero) {
                continue;
            }
            let inputs: Vec<Rational> = r.iter().map(|v| -&(&c * v)).collect();
            assert_eq!(ev(&kind, &inputs), &d * &c.pow(4), "c = {c}, d = {d}, r = {r:?}");
            checked += 1;
        }
    }
    checked
}

#[test]
fn or_le_one_below_one() {
    assert_eq!(restricted_or_cases(GadgetKind::OrLeOne, |c| *c < qi(1)), 7);
}

#[test]
fn or_geq_one_from_one() {
    assert_eq!(restricted_or_cases(GadgetKind::OrGeqOne, |c| *c >= qi(1)), 14);
}
