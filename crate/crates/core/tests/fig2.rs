//! Golden checks of the branching example against hand-derived structure:
//! the reference unfolding, the engine's interned events, causality and
//! conflict queries, extension computation, and the exploration counts.

mod common;

use common::{fig2, fig2_expected, fig2_maximal, push_action};
use por_core::explore::Observer;
use por_core::oracle::{describe_ref, describe_unfolding, match_structures, ref_unfold, OracleLimits};
use por_core::{
    alt, cexp, en, enumerate_runs, explore_keeping_unfolding, extensions, interleavings, is_alternative,
    state_of, trace_classes, Action, AltConfig, AltCost, Config, Effect, EventId, ExploreParams,
    KLimit, Unfolding,
};

/// Figure number -> engine event id, built by structural matching.
fn paper_to_engine(unf: &Unfolding) -> Vec<EventId> {
    let expected = fig2_expected();
    let actual = describe_unfolding(unf);
    let map = match_structures(&expected, &actual).expect("engine unfolding matches the figure");
    map.iter().map(|&i| i as EventId + 1).collect()
}

#[test]
fn reference_unfolding_has_the_expected_19_events() {
    let p = fig2();
    let pes = ref_unfold(&p, &OracleLimits::default()).unwrap();
    assert_eq!(pes.n(), 19);
    let map = match_structures(&fig2_expected(), &describe_ref(&pes)).unwrap();
    assert_eq!(map.len(), 19);

    // Causality and conflict spot checks from the figure: 1 < 5, 8 < 12,
    // 2 # 8, 13 # 15, plus 1 < 11 across threads.
    let causality = pes.causality();
    let conflict = pes.conflict();
    let at = |n: usize| map[n - 1];
    assert!(causality[at(5)].get(at(1)));
    assert!(causality[at(12)].get(at(8)));
    assert!(causality[at(11)].get(at(1)));
    assert!(conflict[at(2)].get(at(8)));
    assert!(conflict[at(13)].get(at(15)));
    assert!(!conflict[at(1)].get(at(8)));
    assert!(!causality[at(8)].get(at(1)));

    // Three maximal configurations, matching the figure's sets.
    assert_eq!(pes.maximal.len(), 3);
    let mut expected_max: Vec<Vec<usize>> = fig2_maximal()
        .iter()
        .map(|ns| {
            let mut v: Vec<usize> = ns.iter().map(|&n| at(n)).collect();
            v.sort_unstable();
            v
        })
        .collect();
    expected_max.sort();
    let mut actual_max: Vec<Vec<usize>> = pes
        .maximal
        .iter()
        .map(|b| b.iter_ones().collect::<Vec<_>>())
        .collect();
    actual_max.sort();
    assert_eq!(expected_max, actual_max);
}

#[test]
fn runs_partition_into_three_trace_classes() {
    let p = fig2();
    let runs = enumerate_runs(&p, &OracleLimits::default()).unwrap();
    assert_eq!(trace_classes(&runs).len(), 3);
}

#[derive(Default)]
struct MaxCollector {
    maxima: Vec<Vec<EventId>>,
}

impl Observer for MaxCollector {
    fn on_maximal(&mut self, _unf: &Unfolding, config: &Config) {
        let mut m = config.members().to_vec();
        m.sort_unstable();
        self.maxima.push(m);
    }
}

#[test]
fn exploration_visits_exactly_the_three_maximal_configurations() {
    let p = fig2();
    let mut collector = MaxCollector::default();
    let (stats, unf) =
        explore_keeping_unfolding(&p, ExploreParams::default(), &mut collector).unwrap();
    assert_eq!(stats.max_configs, 3);
    assert_eq!(stats.ssbs, 0);
    assert_eq!(stats.events_interned, 19);
    // In [14] thread 0 keeps both mutexes, leaving thread 2 blocked.
    assert_eq!(stats.blocked_deadlocks, 1);
    assert!(stats.assert_violations.is_empty());

    // Interned events are exactly the unfolding (criterion-5 shape).
    let ids = paper_to_engine(&unf);
    let at = |n: usize| ids[n - 1];

    // The visited maxima are the figure's, each exactly once.
    let mut expected: Vec<Vec<EventId>> = fig2_maximal()
        .iter()
        .map(|ns| {
            let mut v: Vec<EventId> = ns.iter().map(|&n| at(n)).collect();
            v.sort_unstable();
            v
        })
        .collect();
    expected.sort();
    let mut visited = collector.maxima.clone();
    visited.sort();
    assert_eq!(visited.len(), 3);
    assert_eq!(visited, expected);

    // Thm. 5 queries on the engine structures.
    assert!(unf.less(at(1), at(5)));
    assert!(unf.less(at(8), at(12)));
    assert!(unf.less(at(1), at(11)));
    assert!(!unf.less(at(11), at(11)));
    assert!(unf.in_conflict(at(2), at(8)));
    assert!(unf.in_conflict(at(13), at(15)));
    assert!(unf.in_conflict(at(13), at(18)));
    assert!(!unf.in_conflict(at(8), at(11)));
    assert!(!unf.in_conflict(at(15), at(15)));

    // Local configurations: [11] = {1, 8, 9, 10, 11}.
    let mut local = unf.local_config(at(11));
    local.sort_unstable();
    let mut want: Vec<EventId> = [1, 8, 9, 10, 11].iter().map(|&n| at(n)).collect();
    want.sort_unstable();
    assert_eq!(local, want);
    assert!(unf.local_config(por_core::BOT).is_empty());
    assert_eq!(unf.local_config(at(1)), vec![at(1)]);
}

#[test]
fn extensions_of_the_empty_and_small_configurations() {
    let p = fig2();
    let mut unf = Unfolding::new(p.n_threads(), p.n_mutexes(), 4);
    let mut config = Config::new(&p);

    // ex(∅) = en(∅): the three thread roots; cexp(∅) = ∅.
    let (en0, cex0) = extensions(&mut unf, &p, &config).unwrap();
    assert_eq!(en0.len(), 3);
    assert!(cex0.is_empty());

    // Build C = {1, 8} (t0's local, then t1's first lock).
    let e1 = push_action(&mut unf, &p, &mut config, Action { thread: 0, effect: Effect::Local });
    let e8 = push_action(&mut unf, &p, &mut config, Action { thread: 1, effect: Effect::Lock(0) });

    let (en18, cex18) = extensions(&mut unf, &p, &config).unwrap();
    // en({1,8}) = {9, 15}: t1's local and t2's lock.
    let en_actions: Vec<Action> = en18.iter().map(|&e| unf.get(e).action).collect();
    assert_eq!(en_actions.len(), 2);
    assert!(en_actions.contains(&Action { thread: 1, effect: Effect::Local }));
    assert!(en_actions.contains(&Action { thread: 2, effect: Effect::Lock(1) }));
    // cex({1,8}) = {2}: t0's lock placed before t1's.
    assert_eq!(cex18.len(), 1);
    let two = cex18[0];
    assert_eq!(unf.get(two).action, Action { thread: 0, effect: Effect::Lock(0) });
    assert_eq!(unf.get(two).pt, e1);
    assert_eq!(unf.get(two).pm, por_core::BOT);
    assert!(unf.in_conflict(two, e8));

    // inter({1,8}) = {ab, ba}.
    let seqs = interleavings(&unf, config.members(), 16).unwrap();
    assert_eq!(seqs.len(), 2);
    let a = Action { thread: 0, effect: Effect::Local };
    let b = Action { thread: 1, effect: Effect::Lock(0) };
    assert!(seqs.contains(&vec![a, b]));
    assert!(seqs.contains(&vec![b, a]));

    // state({1,8}): x = 0 and m held.
    let st = state_of(&unf, &p, config.members()).unwrap();
    assert_eq!(st.mem[0], 0);
    assert!(st.locks[0]);
    assert_eq!(&st, config.state());

    // alt({1}, {2}) yields an alternative locking m for t1 first.
    config.pop(&mut unf); // drop 8, back to C = {1}
    unf.get_mut(two).in_d = true;
    let mut cost = AltCost::default();
    let j = alt(&mut unf, &config, &[two], AltConfig::new(KLimit::Infinite), &mut cost)
        .expect("an alternative to {2} after {1} exists");
    assert!(is_alternative(&unf, &config, &[two], &j));
    assert!(j.iter().any(|&e| unf.in_conflict(e, two)));
    unf.get_mut(two).in_d = false;
}

#[test]
fn cexp_walk_from_the_late_lock_recreates_the_early_lock() {
    let p = fig2();
    let mut unf = Unfolding::new(p.n_threads(), p.n_mutexes(), 4);
    let mut config = Config::new(&p);

    // Path to [11]: 1, 8, 9, 10, 11.
    let e1 = push_action(&mut unf, &p, &mut config, Action { thread: 0, effect: Effect::Local });
    push_action(&mut unf, &p, &mut config, Action { thread: 1, effect: Effect::Lock(0) });
    push_action(&mut unf, &p, &mut config, Action { thread: 1, effect: Effect::Local });
    push_action(&mut unf, &p, &mut config, Action { thread: 1, effect: Effect::Unlock(0) });
    push_action(&mut unf, &p, &mut config, Action { thread: 0, effect: Effect::Lock(0) });

    let en_events = en(&mut unf, &p, &config).unwrap();
    let cex = cexp(&mut unf, &p, &config, &en_events).unwrap();
    // cexp([11]) = {2}: the walk from 11 over (10, 8) to the chain root.
    assert_eq!(cex.len(), 1);
    let two = cex[0];
    assert_eq!(unf.get(two).action, Action { thread: 0, effect: Effect::Lock(0) });
    assert_eq!(unf.get(two).pt, e1);
    assert_eq!(unf.get(two).pm, por_core::BOT);
    // Everything cexp returns is lock-labelled.
    assert!(matches!(unf.get(two).action.effect, Effect::Lock(_)));
}
