//! Shared fixtures for the integration tests.

use por_core::ast::{self, ProgramBuilder};
use por_core::{Action, Config, Effect, EventDesc, EventId, Program, Unfolding};

/// The three-thread two-mutex branching program whose unfolding has 19
/// events and 3 maximal configurations.
///
/// ```text
/// t0: x = 0; lock(m); if (y == 0) { unlock(m) } else { lock(mp); z = 2 }
/// t1: lock(m); y = 1; unlock(m)
/// t2: lock(mp); z = 3; unlock(mp)
/// ```
pub fn fig2() -> Program {
    ProgramBuilder::new()
        .var("x", 0)
        .var("y", 0)
        .var("z", 0)
        .mutex("m")
        .mutex("mp")
        .thread("t0", vec![
            ast::assign("x", ast::int(0)),
            ast::lock("m"),
            ast::if_else(
                ast::eq(ast::var("y"), ast::int(0)),
                vec![ast::unlock("m")],
                vec![ast::lock("mp"), ast::assign("z", ast::int(2))],
            ),
        ])
        .thread("t1", vec![ast::lock("m"), ast::assign("y", ast::int(1)), ast::unlock("m")])
        .thread("t2", vec![ast::lock("mp"), ast::assign("z", ast::int(3)), ast::unlock("mp")])
        .build()
        .unwrap()
}

fn act(thread: usize, effect: Effect) -> Action {
    Action { thread, effect }
}

/// The expected unfolding of [`fig2`], with events in the figure's
/// numbering (index i holds event i+1) and histories as index sets.
/// Mutex 0 is `m`, mutex 1 is `mp`.
pub fn fig2_expected() -> Vec<EventDesc> {
    let l = Effect::Local;
    let lk = |m| Effect::Lock(m);
    let ul = |m| Effect::Unlock(m);
    let h = |v: &[usize]| v.iter().map(|x| x - 1).collect::<Vec<_>>();
    vec![
        (act(0, l), h(&[])),                                   // 1: x = 0
        (act(0, lk(0)), h(&[1])),                              // 2: lock m after 1
        (act(0, l), h(&[1, 2])),                               // 3: guard, then-side
        (act(0, ul(0)), h(&[1, 2, 3])),                        // 4: unlock m
        (act(1, lk(0)), h(&[1, 2, 3, 4])),                     // 5: t1 locks second
        (act(1, l), h(&[1, 2, 3, 4, 5])),                      // 6: y = 1
        (act(1, ul(0)), h(&[1, 2, 3, 4, 5, 6])),               // 7
        (act(1, lk(0)), h(&[])),                               // 8: t1 locks first
        (act(1, l), h(&[8])),                                  // 9
        (act(1, ul(0)), h(&[8, 9])),                           // 10
        (act(0, lk(0)), h(&[1, 8, 9, 10])),                    // 11: t0 locks second
        (act(0, l), h(&[1, 8, 9, 10, 11])),                    // 12: guard, else-side
        (act(0, lk(1)), h(&[1, 8, 9, 10, 11, 12])),            // 13: lock mp first
        (act(0, l), h(&[1, 8, 9, 10, 11, 12, 13])),            // 14: z = 2
        (act(2, lk(1)), h(&[])),                               // 15: t2 locks mp first
        (act(2, l), h(&[15])),                                 // 16: z = 3
        (act(2, ul(1)), h(&[15, 16])),                         // 17
        (act(0, lk(1)), h(&[1, 8, 9, 10, 11, 12, 15, 16, 17])), // 18: lock mp second
        (act(0, l), h(&[1, 8, 9, 10, 11, 12, 15, 16, 17, 18])), // 19: z = 2
    ]
}

/// Maximal configurations of [`fig2`], as sets of figure numbers.
pub fn fig2_maximal() -> Vec<Vec<usize>> {
    vec![
        vec![1, 2, 3, 4, 5, 6, 7, 15, 16, 17], // [7] ∪ [17]
        vec![1, 8, 9, 10, 11, 12, 13, 14],     // [14]
        vec![1, 8, 9, 10, 11, 12, 15, 16, 17, 18, 19], // [19]
    ]
}

/// Pushes the enabled event with the given action, returning its id.
pub fn push_action(
    unf: &mut Unfolding,
    program: &Program,
    config: &mut Config,
    action: Action,
) -> EventId {
    let en = por_core::en(unf, program, config).unwrap();
    let e = en
        .iter()
        .copied()
        .find(|&e| unf.get(e).action == action)
        .unwrap_or_else(|| panic!("action {action:?} not enabled"));
    config.push(unf, program, e, 100_000).unwrap();
    e
}
