use std::collections::BTreeSet;

use num_traits::{One, Zero};
use proptest::prelude::*;

use farkas_core::certificates::{frequencies_from_scheduler, scheduler_from_y, write_certificate};
use farkas_core::hardness::{brute_force_min_witness, clique_to_witness_instance, random_graph, random_model, random_tree};
use farkas_core::linsys::{build_farkas_system, reach_probabilities, reach_probability, solve_lp, Cmp, LinearProgram, LpStatus, Sense};
use farkas_core::model::{
    induced_dtmc, parse_model, restrict, serialize_model, validate, Direction, ModelBuilder, MrScheduler, ReachMdp, Selection,
};
use farkas_core::scalar::{rat, Rational};
use farkas_core::treedp::{binarize, dp_tables};
use farkas_core::witness::{exact_minimal_witness, BnbOptions, Flavor, PolytopeSpec};
use farkas_core::{generate_certificate, PropertySpec};

fn small_model(seed: u64, n: usize) -> ReachMdp {
    random_model(seed, n, 3, 3)
}

/// `m` with every edge into fail redirected to goal.
fn merged_target(m: &ReachMdp) -> ReachMdp {
    let mut b = ModelBuilder::new(m.kind(), m.state_count(), m.initial(), m.goal(), m.fail());
    for s in m.nonterminal_states() {
        for a in m.actions(s) {
            for (t, p) in &a.successors {
                let t = if *t == m.fail() { m.goal() } else { *t };
                b.accumulate(s, &a.label, t, p.clone());
            }
        }
    }
    b.build().unwrap()
}

fn subset(states: &[usize], mask: u64) -> BTreeSet<usize> {
    states.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialization_round_trip(seed in any::<u64>(), n in 1usize..15, acts in 1usize..4) {
        let m = random_model(seed, n, acts, 3);
        prop_assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn subsystem_rows_are_stochastic(seed in any::<u64>(), n in 1usize..12, mask in any::<u64>()) {
        let m = small_model(seed, n);
        let sub = restrict(&m, &Selection::States(subset(&m.nonterminal_states(), mask))).unwrap();
        for s in sub.mdp.nonterminal_states() {
            for a in sub.mdp.actions(s) {
                let total: Rational = a.successors.iter().map(|(_, p)| p.clone()).sum();
                prop_assert!(total.is_one());
            }
        }
    }

    #[test]
    fn restrict_is_monotone(seed in any::<u64>(), n in 1usize..10, small in any::<u64>(), extra in any::<u64>()) {
        let m = small_model(seed, n);
        let states = m.nonterminal_states();
        let r = subset(&states, small);
        let r2: BTreeSet<usize> = r.union(&subset(&states, extra)).copied().collect();
        let a = restrict(&m, &Selection::States(r)).unwrap();
        let b = restrict(&m, &Selection::States(r2)).unwrap();
        for d in [Direction::Min, Direction::Max] {
            prop_assert!(reach_probability(&a.mdp, d).unwrap() <= reach_probability(&b.mdp, d).unwrap());
        }
    }

    #[test]
    fn validated_models_stop_almost_surely(seed in any::<u64>(), n in 1usize..15) {
        let m = small_model(seed, n);
        prop_assert!(validate(&m).ok);
        for p in reach_probabilities(&merged_target(&m), Direction::Min).unwrap() {
            prop_assert!(p.is_one());
        }
    }

    /// Every `z` with `Az <= b` lies below `Pr^min`, every `z` with
    /// `Az >= b` above `Pr^max`.
    #[test]
    fn farkas_rows_bound_the_probabilities(seed in any::<u64>(), n in 1usize..15, shifts in prop::collection::vec(-20i64..=5, 15)) {
        let m = small_model(seed, n);
        let sys = build_farkas_system::<Rational>(&m);
        for (d, sign) in [(Direction::Min, 1i64), (Direction::Max, -1)] {
            let pr = reach_probabilities(&m, d).unwrap();
            let z: Vec<Rational> = pr.iter().zip(&shifts).map(|(p, s)| p + rat(sign * s, 100)).collect();
            let az = sys.a_mul(&z);
            let inside = az.iter().zip(&sys.b).all(|(l, r)| if d == Direction::Min { l <= r } else { l >= r });
            if inside {
                for (zi, pi) in z.iter().zip(&pr) {
                    let below = if d == Direction::Min { zi <= pi } else { zi >= pi };
                    prop_assert!(below);
                }
            }
        }
    }

    #[test]
    fn lp_is_deterministic(seed in any::<u64>(), n in 1usize..12, weights in prop::collection::vec(-1.0f64..1.0, 40)) {
        let m = small_model(seed, n);
        let sys = build_farkas_system::<f64>(&m);
        let mut lp = LinearProgram::new(Sense::Minimize, weights[..sys.cols()].to_vec());
        for (row, b) in sys.a.iter().zip(&sys.b) {
            lp.add_constraint(row.clone(), Cmp::Le, *b);
        }
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn frequencies_are_dual_to_schedulers(seed in any::<u64>(), n in 1usize..8, picks in prop::collection::vec(0usize..3, 8)) {
        let m = small_model(seed, n);
        let choice: Vec<usize> = (0..m.state_count()).map(|s| if m.is_terminal(s) { 0 } else { picks[s] % m.actions(s).len() }).collect();
        let sched = MrScheduler::deterministic(&m, &choice);
        let y = frequencies_from_scheduler(&m, &sched).unwrap();
        let sys = build_farkas_system::<Rational>(&m);
        prop_assert_eq!(sys.mul_a(&y), sys.delta0.clone());
        let dtmc = induced_dtmc(&m, &sched).unwrap();
        prop_assert_eq!(sys.b_dot(&y), reach_probability(&dtmc, Direction::Min).unwrap());
        let back = scheduler_from_y(&m, &y).unwrap();
        for s in m.nonterminal_states() {
            let visited = m.pairs().iter().zip(&y).any(|(&(t, _), v)| t == s && !v.is_zero());
            if visited {
                prop_assert_eq!(back.choice(s), Some(choice[s]));
            }
        }
    }

    #[test]
    fn certificates_round_trip(seed in any::<u64>(), n in 1usize..10, dir in 0usize..2, frac in 0i64..=4) {
        let m = small_model(seed, n);
        let d = [Direction::Min, Direction::Max][dir];
        let p = reach_probability(&m, d).unwrap();
        let prop = PropertySpec::new(d, farkas_core::Relation::Ge, p * rat(frac, 4)).unwrap();
        let cert = generate_certificate(&m, &prop).unwrap();
        let back = farkas_core::certificates::read_certificate(&write_certificate(&cert), &m).unwrap();
        prop_assert_eq!(back, cert);
    }

    #[test]
    fn tree_tables(seed in any::<u64>(), n in 1usize..40) {
        let m = random_tree(seed, n);
        let (bin, map) = binarize(&m).unwrap();
        prop_assert!(bin.state_count() <= m.state_count() + m.transition_count());
        let pr = reach_probability(&m, Direction::Min).unwrap();
        prop_assert_eq!(&reach_probability(&bin, Direction::Min).unwrap(), &pr);
        let t = dp_tables(&bin, map.original_count).unwrap();
        let root = &t.l[bin.initial()];
        prop_assert_eq!(root.len(), n + 1);
        prop_assert_eq!(root.last().unwrap(), &pr);
        for row in &t.l {
            prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn clique_instances(seed in any::<u64>(), n in 3usize..9, density in 0.0f64..1.0, k in 3usize..5) {
        let g = random_graph(seed, n, density);
        prop_assume!(k <= n);
        let inst = clique_to_witness_instance(&g, k).unwrap();
        let m = &inst.model;
        prop_assert!(validate(m).ok);
        for s in m.nonterminal_states() {
            prop_assert!(m.successors(s).all(|t| t > s));
        }
        let edges = g.edges().len() as i64;
        prop_assert_eq!(reach_probability(m, Direction::Min).unwrap(), rat(2 * edges, (n * n) as i64));
    }
}

/// Float LP over the polytope with the coordinates outside `keep` fixed to
/// zero.
fn restricted_polytope(m: &ReachMdp, flavor: Flavor, lambda: &Rational, keep: &BTreeSet<usize>) -> LinearProgram<Rational> {
    let sys = build_farkas_system::<Rational>(m);
    let dim = match flavor {
        Flavor::MinNonneg => sys.cols(),
        Flavor::Max => sys.rows(),
    };
    let mut lp = LinearProgram::new(Sense::Minimize, vec![Rational::zero(); dim]);
    match flavor {
        Flavor::MinNonneg => {
            for (row, b) in sys.a.iter().zip(&sys.b) {
                lp.add_constraint(row.clone(), Cmp::Le, b.clone());
            }
            lp.add_constraint(vec![(sys.initial_col(), Rational::one())], Cmp::Ge, lambda.clone());
            for (c, s) in sys.col_index.iter().enumerate() {
                if !keep.contains(s) {
                    lp.set_bounds(c, Some(Rational::zero()), Some(Rational::zero()));
                }
            }
        }
        Flavor::Max => {
            let mut cols = vec![Vec::new(); sys.cols()];
            for (r, row) in sys.a.iter().enumerate() {
                for (c, v) in row {
                    cols[*c].push((r, v.clone()));
                }
            }
            for (c, coeffs) in cols.into_iter().enumerate() {
                lp.add_constraint(coeffs, Cmp::Le, sys.delta0[c].clone());
            }
            lp.add_constraint(sys.b.iter().cloned().enumerate().collect(), Cmp::Ge, lambda.clone());
            for (r, (s, _)) in sys.row_index.iter().enumerate() {
                if !keep.contains(s) {
                    lp.set_bounds(r, Some(Rational::zero()), Some(Rational::zero()));
                }
            }
        }
    }
    lp
}

/// Every witnessing state set carries a polytope point, and every
/// non-witnessing one does not.
#[test]
fn witness_sets_are_exactly_the_feasible_supports() {
    let mut witnesses = 0;
    for seed in 0..30u64 {
        let m = small_model(900 + seed, 1 + seed as usize % 5);
        let states = m.nonterminal_states();
        let others: Vec<usize> = states.iter().copied().filter(|&s| s != m.initial()).collect();
        for flavor in [Flavor::MinNonneg, Flavor::Max] {
            let d = flavor.direction();
            let lambda = reach_probability(&m, d).unwrap() * rat(1 + seed as i64 % 3, 3);
            for mask in 0..1u64 << others.len() {
                let mut r = subset(&others, mask);
                r.insert(m.initial());
                let sub = restrict(&m, &Selection::States(r.clone())).unwrap();
                let is_witness = reach_probability(&sub.mdp, d).unwrap() >= lambda;
                let sol = solve_lp(&restricted_polytope(&m, flavor, &lambda, &r)).unwrap();
                assert_eq!(sol.status == LpStatus::Optimal, is_witness, "seed {seed} {flavor:?} set {r:?}");
                witnesses += usize::from(is_witness);
            }
        }
    }
    assert!(witnesses > 0);
}

/// Bounds of an interrupted search bracket the true minimum.
#[test]
fn anytime_bounds_bracket_the_minimum() {
    for seed in 0..40u64 {
        let m = small_model(1200 + seed, 4 + seed as usize % 8);
        for flavor in [Flavor::MinNonneg, Flavor::Max] {
            let d = flavor.direction();
            let lambda = reach_probability(&m, d).unwrap() * rat(3, 4);
            let truth = brute_force_min_witness(&m, &lambda, d).unwrap().unwrap();
            for limit in [0, 1, 3] {
                let opts = BnbOptions { budget: None, node_limit: Some(limit) };
                let w = exact_minimal_witness(&m, &PolytopeSpec::new(flavor, lambda.clone()), &opts).unwrap();
                assert!(w.bounds.0 <= truth && truth <= w.bounds.1, "seed {seed} {flavor:?}: {:?} vs {truth}", w.bounds);
                assert_eq!(w.bounds.1, w.state_count);
                assert!(reach_probability(&w.subsystem.mdp, d).unwrap() >= lambda);
            }
        }
    }
}

/// All subset pairs of small models.
#[test]
fn restrict_is_monotone_exhaustively() {
    for seed in 0..10u64 {
        let m = small_model(1500 + seed, 1 + seed as usize % 5);
        let states = m.nonterminal_states();
        let values: Vec<(u64, [Rational; 2])> = (0..1u64 << states.len())
            .map(|mask| {
                let sub = restrict(&m, &Selection::States(subset(&states, mask))).unwrap();
                (mask, [Direction::Min, Direction::Max].map(|d| reach_probability(&sub.mdp, d).unwrap()))
            })
            .collect();
        for (a, va) in &values {
            for (b, vb) in &values {
                if a & b == *a {
                    assert!(va[0] <= vb[0] && va[1] <= vb[1], "seed {seed}: {a:b} vs {b:b}");
                }
            }
        }
    }
}
