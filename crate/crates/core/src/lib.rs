//! Stateless model checking of mutex-threaded programs by event-structure
//! unfolding with partial-order reduction.
//!
//! The engine explores every Mazurkiewicz trace of a deterministic
//! multithreaded program (shared variables plus mutexes). Executions are
//! organized as configurations of a prime event structure; races are
//! reversed through clue search over a comb of conflicting events, with a
//! tunable `k` trading redundant exploration against clue-search cost.
//! A brute-force oracle (exhaustive interleaving enumeration and a literal
//! fixpoint unfolding) ships alongside the engine as test-time ground truth.

pub mod alt;
pub mod ast;
pub mod causality;
pub mod config;
pub mod event;
pub mod explore;
pub mod oracle;
pub mod program;

pub use alt::{alt, is_alternative, is_clue, AltConfig, AltCost, Comb, KLimit};
pub use config::{cexp, en, extensions, interleavings, state_of, Config, ExtendError};
pub use event::{EventId, StructureError, Unfolding, BOT};
pub use explore::{
    explore, explore_keeping_unfolding, explore_with, Choice, ExplorationStats, ExploreError,
    ExploreParams, NoObserver, Observer, PhaseTimes, Violation,
};
pub use oracle::{
    canonicalize, describe_ref, describe_unfolding, enumerate_runs, match_structures, ref_unfold,
    trace_classes, Bits, EventDesc, OracleError, OracleLimits, RefPes, TraceClass,
};
pub use program::{
    enabled, independent, run, step, Action, Effect, ExecError, MutexId, Program, RunError, Span,
    State, StepInfo, ThreadId,
};
