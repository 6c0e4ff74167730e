mod common;

use chebclust::clustering::{assign, chebyshev_distance};
use chebclust::envelope::update_envelope;
use chebclust::lpsolver::{solve_simplex_with, Route, SimplexOptions};
use chebclust::optimality::{check_alternation, check_subdifferential, deviation_profile};
use chebclust::{
    build_envelope, build_lp, lower_bound, solve_exchange, solve_simplex, ChebyshevBasis, Envelope, ExchangeOptions,
    Grid, LpStatus, SignalGroup, SignalId, Termination,
};
use proptest::prelude::*;

fn group_strategy(max_points: usize, max_signals: usize) -> impl Strategy<Value = SignalGroup> {
    (3..=max_points, 1..=max_signals).prop_flat_map(|(points, signals)| {
        prop::collection::vec(prop::collection::vec(-10.0..10.0f64, points), signals).prop_map(move |rows| {
            let grid = Grid::uniform(0.0, 1.0, points).unwrap();
            SignalGroup::from_rows(grid, rows).unwrap()
        })
    })
}

fn instance_strategy() -> impl Strategy<Value = (SignalGroup, usize)> {
    group_strategy(30, 6).prop_flat_map(|g| {
        let max_n = (g.grid().len() - 2).min(3);
        (Just(g), 0..=max_n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_dominates_every_signal(g in group_strategy(40, 8)) {
        let env = build_envelope(&g).unwrap();
        for row in g.samples() {
            for ((u, l), v) in env.upper().iter().zip(env.lower()).zip(row) {
                prop_assert!(l <= v && v <= u);
            }
        }
        // each curve value is attained by some signal
        for i in 0..env.len() {
            prop_assert!(g.samples().iter().any(|r| r[i] == env.upper()[i]));
            prop_assert!(g.samples().iter().any(|r| r[i] == env.lower()[i]));
        }
    }

    #[test]
    fn incremental_update_matches_rebuild(
        g in group_strategy(20, 6),
        extra in prop::collection::vec(-12.0..12.0f64, 20),
        drop_mask in prop::collection::vec(any::<bool>(), 6),
    ) {
        let env = build_envelope(&g).unwrap();
        let added = vec![(SignalId::new("extra"), extra[..g.grid().len()].to_vec())];
        let removed: Vec<SignalId> = g.ids().iter().zip(&drop_mask).filter(|(_, d)| **d).map(|(id, _)| id.clone()).collect();
        let upd = update_envelope(&env, &g, &added, &removed).unwrap();
        let rebuilt = build_envelope(&g.with_changes(&added, &removed).unwrap()).unwrap();
        prop_assert_eq!(upd.envelope.upper(), rebuilt.upper());
        prop_assert_eq!(upd.envelope.lower(), rebuilt.lower());
    }

    #[test]
    fn exchange_matches_lp_and_bound((g, n) in instance_strategy()) {
        let env = build_envelope(&g).unwrap();
        let basis = ChebyshevBasis::chebyshev(n, 0.0, 1.0).unwrap();
        let rep = solve_exchange(&env, &basis, None, &ExchangeOptions::default()).unwrap();
        prop_assert!(rep.termination.is_optimal());
        let lp = solve_simplex(&build_lp(&env, &basis).unwrap(), 50_000);
        prop_assert_eq!(lp.status, LpStatus::Optimal);
        prop_assert!((rep.delta - lp.objective).abs() <= 1e-7, "exchange {} lp {}", rep.delta, lp.objective);
        prop_assert!(rep.delta >= lower_bound(&env, 0.0).delta_star - 1e-9);
        let profile = deviation_profile(&env, &basis, &rep.coeffs).unwrap();
        prop_assert!(check_alternation(&profile, n).optimal);
        prop_assert!(check_subdifferential(&profile, &basis, env.grid()).unwrap().optimal);
    }

    #[test]
    fn primal_and_dual_routes_agree((g, n) in instance_strategy()) {
        let env = build_envelope(&g).unwrap();
        let lp = build_lp(&env, &ChebyshevBasis::monomial(n)).unwrap();
        let dual = solve_simplex_with(&lp, &SimplexOptions { limit: 50_000, route: Route::Dual });
        let primal = solve_simplex_with(&lp, &SimplexOptions { limit: 50_000, route: Route::Primal });
        prop_assert_eq!(dual.status, LpStatus::Optimal);
        prop_assert_eq!(primal.status, LpStatus::Optimal);
        prop_assert!((dual.objective - primal.objective).abs() <= 1e-7);
        prop_assert!(lp.max_violation(&dual.x) <= 1e-8);
    }

    #[test]
    fn deviation_scales_with_the_data((g, n) in instance_strategy(), c in 0.01..100.0f64) {
        let env = build_envelope(&g).unwrap();
        let basis = ChebyshevBasis::monomial(n);
        let opts = ExchangeOptions::default();
        let base = solve_exchange(&env, &basis, None, &opts).unwrap();
        let scaled = solve_exchange(&env.scaled(c), &basis, None, &opts).unwrap();
        prop_assert!((scaled.delta - c * base.delta).abs() <= 1e-8 * (1.0 + c * base.delta));
    }

    #[test]
    fn shifting_by_a_basis_function_keeps_delta((g, n) in instance_strategy(), shift in prop::collection::vec(-3.0..3.0f64, 4)) {
        let env = build_envelope(&g).unwrap();
        let basis = ChebyshevBasis::chebyshev(n, 0.0, 1.0).unwrap();
        let s = basis.evaluate_on_grid(&shift[..=n], env.grid()).unwrap();
        let moved = Envelope::from_curves(
            env.grid().clone(),
            env.upper().iter().zip(&s).map(|(u, v)| u + v).collect(),
            env.lower().iter().zip(&s).map(|(l, v)| l + v).collect(),
        ).unwrap();
        let opts = ExchangeOptions::default();
        let a = solve_exchange(&env, &basis, None, &opts).unwrap();
        let b = solve_exchange(&moved, &basis, None, &opts).unwrap();
        prop_assert!((a.delta - b.delta).abs() <= 1e-8, "{} vs {}", a.delta, b.delta);
    }

    #[test]
    fn history_strictly_increases((g, n) in instance_strategy()) {
        let env = build_envelope(&g).unwrap();
        let rep = solve_exchange(&env, &ChebyshevBasis::monomial(n), None, &ExchangeOptions::default()).unwrap();
        for w in rep.history.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        if rep.termination == Termination::OptimalDoublePoint {
            prop_assert!((rep.delta - rep.delta_star).abs() <= 1e-9);
        }
    }

    #[test]
    fn distance_is_a_metric(
        a in prop::collection::vec(-5.0..5.0f64, 8),
        b in prop::collection::vec(-5.0..5.0f64, 8),
        c in prop::collection::vec(-5.0..5.0f64, 8),
    ) {
        let d = |x: &[f64], y: &[f64]| chebyshev_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn assignment_picks_a_nearest_prototype(
        g in group_strategy(10, 8),
        protos in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 10), 1..4),
    ) {
        let len = g.grid().len();
        let protos: Vec<Vec<f64>> = protos.into_iter().map(|p| p[..len].to_vec()).collect();
        let refs: Vec<Option<&[f64]>> = protos.iter().map(|p| Some(p.as_slice())).collect();
        let a = assign(&g, &refs, None).unwrap();
        for (row, &c) in g.samples().iter().zip(&a) {
            let best = protos.iter().map(|p| chebyshev_distance(row, p).unwrap()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(chebyshev_distance(row, &protos[c]).unwrap(), best);
        }
    }
}

/// The LP optimum equals the minimum over all basic feasible solutions.
#[test]
fn lp_matches_vertex_enumeration_on_monomials() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..40 {
        let n = rng.gen_range(0..=2usize);
        let points = rng.gen_range(n + 2..=7);
        let grid = Grid::uniform(-1.0, 2.0, points).unwrap();
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..points).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let env = build_envelope(&SignalGroup::from_rows(grid, rows).unwrap()).unwrap();
        let basis = ChebyshevBasis::monomial(n);
        let z = common::vertex_enumeration(&env, &basis).unwrap();
        let lp = solve_simplex(&build_lp(&env, &basis).unwrap(), 10_000);
        let ex = solve_exchange(&env, &basis, None, &ExchangeOptions::default()).unwrap();
        assert!((lp.objective - z).abs() <= 1e-9, "lp {} enum {z}", lp.objective);
        assert!((ex.delta - z).abs() <= 1e-9, "exchange {} enum {z}", ex.delta);
    }
}
