//! The exploration recursion: left/right branching over the unfolding,
//! sleep-set-blocked accounting, live-set pruning, and result collection.
//!
//! Each call works on a configuration C, a disabled set D and a guidance
//! set A. It first materializes the extensions of C into the global event
//! set, returns when everything enabled is disabled (counting a maximal
//! configuration or a sleep-set block), otherwise picks one enabled event,
//! explores everything containing it, and — when a clue certifies that
//! something avoiding it remains — explores the rest with the event
//! disabled. On the way out it retires events that can no longer matter.

use crate::alt::{alt, is_alternative, is_clue, AltConfig, AltCost, KLimit};
use crate::config::{cexp, en, Config, ExtendError};
use crate::event::{EventId, Unfolding, BOT};
use crate::program::{Action, Program, Span, ThreadId};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// Deterministic smallest-id tie-break (the default).
    MinId,
    /// Largest-id tie-break, for order-independence checks.
    MaxId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreParams {
    pub k: KLimit,
    pub skip_step: u32,
    /// Per-run action guard; exceeding it is an error, not nontermination.
    pub max_steps: u32,
    /// Total recursion guard.
    pub max_frames: u64,
    pub prune: bool,
    pub choice: Choice,
}

impl Default for ExploreParams {
    fn default() -> Self {
        ExploreParams {
            k: KLimit::Infinite,
            skip_step: 4,
            max_steps: 100_000,
            max_frames: 1_000_000,
            prune: true,
            choice: Choice::MinId,
        }
    }
}

/// An assertion failure, with the interleaving that exposes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub witness: Vec<Action>,
    pub thread: ThreadId,
    pub site: Span,
}

#[derive(Debug, Clone, Default)]
pub struct PhaseTimes {
    pub execute: Duration,
    pub extensions: Duration,
    pub comb_build: Duration,
    pub comb_search: Duration,
}

/// Observable outcome of one exploration.
#[derive(Debug, Clone, Default)]
pub struct ExplorationStats {
    pub max_configs: u64,
    pub ssbs: u64,
    pub events_interned: u64,
    pub blocked_deadlocks: u64,
    pub assert_violations: Vec<Violation>,
    pub wall_time: Duration,
    pub phase: PhaseTimes,
    pub frames: u64,
    pub alt_calls: u64,
    pub comb_search_visits: u64,
    pub comb_build_scanned: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExploreError {
    #[error("{source} (run prefix of {} actions: {prefix:?})", prefix.len())]
    Extend {
        source: ExtendError,
        prefix: Vec<Action>,
    },
    #[error("exploration exceeded the frame guard of {limit} calls")]
    FrameGuard { limit: u64 },
}

/// Exploration callbacks; every hook has a no-op default.
#[allow(unused_variables)]
pub trait Observer {
    /// After the extensions of the current configuration were added.
    fn on_call(&mut self, unf: &Unfolding, config: &Config, d: &[EventId], en: &[EventId], cex: &[EventId]) {}
    /// A maximal configuration was reached.
    fn on_maximal(&mut self, unf: &Unfolding, config: &Config) {}
    /// A sleep-set block was hit.
    fn on_ssb(&mut self, unf: &Unfolding, config: &Config, d: &[EventId]) {}
    /// A clue request completed.
    fn on_alt(
        &mut self,
        unf: &Unfolding,
        config: &Config,
        d: &[EventId],
        result: Option<&[EventId]>,
        cost: &AltCost,
    ) {
    }
}

/// The default observer: collect nothing.
pub struct NoObserver;
impl Observer for NoObserver {}

struct Engine<'a, O: Observer> {
    program: &'a Program,
    params: ExploreParams,
    unf: Unfolding,
    config: Config,
    d_list: Vec<EventId>,
    stats: ExplorationStats,
    obs: &'a mut O,
}

/// Explores every maximal configuration of the program's unfolding.
pub fn explore(program: &Program, params: ExploreParams) -> Result<ExplorationStats, ExploreError> {
    explore_with(program, params, &mut NoObserver)
}

/// Exploration with callbacks; returns the stats and hands the final
/// unfolding to the caller through the observer hooks.
pub fn explore_with<O: Observer>(
    program: &Program,
    params: ExploreParams,
    obs: &mut O,
) -> Result<ExplorationStats, ExploreError> {
    let (stats, _) = explore_keeping_unfolding(program, params, obs)?;
    Ok(stats)
}

/// Like [`explore_with`] but also returns the final event store (all events
/// ever interned; the live set reflects the last pruning).
pub fn explore_keeping_unfolding<O: Observer>(
    program: &Program,
    params: ExploreParams,
    obs: &mut O,
) -> Result<(ExplorationStats, Unfolding), ExploreError> {
    if let KLimit::Finite(k) = params.k {
        assert!(k >= 1, "k must be at least 1 (or unbounded)");
    }
    let start = Instant::now();
    let mut engine = Engine {
        program,
        params,
        unf: Unfolding::new(program.n_threads(), program.n_mutexes(), params.skip_step),
        config: Config::new(program),
        d_list: Vec::new(),
        stats: ExplorationStats::default(),
        obs,
    };
    engine.explore(Vec::new())?;
    let Engine { unf, mut stats, .. } = engine;
    stats.events_interned = unf.len() as u64;
    stats.wall_time = start.elapsed();
    Ok((stats, unf))
}

impl<O: Observer> Engine<'_, O> {
    fn err(&self, source: ExtendError) -> ExploreError {
        ExploreError::Extend { source, prefix: self.config.trace(&self.unf) }
    }

    fn explore(&mut self, a_set: Vec<EventId>) -> Result<(), ExploreError> {
        self.stats.frames += 1;
        if self.stats.frames > self.params.max_frames {
            return Err(ExploreError::FrameGuard { limit: self.params.max_frames });
        }

        // Materialize ex(C) into the event set.
        let t0 = Instant::now();
        let en_events = en(&mut self.unf, self.program, &self.config).map_err(|e| self.err(e))?;
        let cex_events =
            cexp(&mut self.unf, self.program, &self.config, &en_events).map_err(|e| self.err(e))?;
        self.stats.phase.extensions += t0.elapsed();
        self.obs
            .on_call(&self.unf, &self.config, &self.d_list, &en_events, &cex_events);
        self.check_frame_invariants(&a_set, &en_events);

        // Return when everything enabled is already disabled.
        if en_events.iter().all(|&e| self.unf.get(e).in_d) {
            if en_events.is_empty() {
                self.record_maximal();
            } else {
                self.stats.ssbs += 1;
                self.obs.on_ssb(&self.unf, &self.config, &self.d_list);
            }
            return Ok(());
        }

        // Pick the next event, following the guidance set when present.
        let candidates: Vec<EventId> = if a_set.is_empty() {
            en_events
                .iter()
                .copied()
                .filter(|&e| !self.unf.get(e).in_d)
                .collect()
        } else {
            let from_a: Vec<EventId> = en_events
                .iter()
                .copied()
                .filter(|e| a_set.contains(e))
                .collect();
            debug_assert!(!from_a.is_empty(), "guidance set must intersect en(C)");
            if from_a.is_empty() {
                en_events
                    .iter()
                    .copied()
                    .filter(|&e| !self.unf.get(e).in_d)
                    .collect()
            } else {
                from_a
            }
        };
        let e = match self.params.choice {
            Choice::MinId => *candidates.iter().min().unwrap(),
            Choice::MaxId => *candidates.iter().max().unwrap(),
        };

        // Left: everything containing C ∪ {e} and avoiding D.
        let t1 = Instant::now();
        self.config
            .push(&mut self.unf, self.program, e, self.params.max_steps)
            .map_err(|err| self.err(err))?;
        self.stats.phase.execute += t1.elapsed();
        let a_left: Vec<EventId> = a_set.iter().copied().filter(|&x| x != e).collect();
        self.explore(a_left)?;
        self.config.pop(&mut self.unf);

        // Right: everything containing C and avoiding D ∪ {e}, if any.
        self.d_list.push(e);
        self.unf.get_mut(e).in_d = true;
        self.stats.alt_calls += 1;
        let mut cost = AltCost::default();
        let t2 = Instant::now();
        let clue = alt(
            &mut self.unf,
            &self.config,
            &self.d_list,
            AltConfig { k: self.params.k },
            &mut cost,
        );
        let dt = t2.elapsed();
        self.stats.phase.comb_build += dt.saturating_sub(cost.search_time);
        self.stats.phase.comb_search += cost.search_time;
        self.stats.comb_search_visits += cost.search_visits;
        self.stats.comb_build_scanned += cost.build_scanned;
        self.obs
            .on_alt(&self.unf, &self.config, &self.d_list, clue.as_deref(), &cost);
        if let Some(j) = clue {
            debug_assert!(is_clue(&self.unf, &self.config, &self.d_list, &j));
            if matches!(self.params.k, KLimit::Infinite) {
                debug_assert!(is_alternative(&self.unf, &self.config, &self.d_list, &j));
            }
            let a_right: Vec<EventId> = j
                .iter()
                .copied()
                .filter(|&x| !self.unf.get(x).in_c)
                .collect();
            self.explore(a_right)?;
        }
        let popped = self.d_list.pop().unwrap();
        self.unf.get_mut(popped).in_d = false;

        if self.params.prune {
            self.prune();
        }
        Ok(())
    }

    fn record_maximal(&mut self) {
        self.stats.max_configs += 1;
        if (0..self.program.n_threads())
            .any(|t| !self.config.state().terminated(self.program, t))
        {
            self.stats.blocked_deadlocks += 1;
        }
        for &m in self.config.members() {
            let ev = self.unf.get(m);
            if ev.assert_failed {
                self.stats.assert_violations.push(Violation {
                    witness: self.config.trace(&self.unf),
                    thread: ev.action.thread,
                    site: ev.site,
                });
            }
        }
        self.obs.on_maximal(&self.unf, &self.config);
    }

    /// U := U ∩ Q_{C,D}: keep C, D, and whatever conflicts with them.
    fn prune(&mut self) {
        let cut: Vec<EventId> = self
            .config
            .cut_thread()
            .iter()
            .copied()
            .filter(|&e| e != BOT)
            .collect();
        let ids: Vec<EventId> = self.unf.live_ids().collect();
        for e in ids {
            let ev = self.unf.get(e);
            if ev.in_c || ev.in_d {
                continue;
            }
            let keeps = cut.iter().any(|&c| self.unf.in_conflict(e, c))
                || self.d_list.iter().any(|&d| self.unf.in_conflict(e, d));
            if !keeps {
                self.unf.drop_from_live(e);
            }
        }
    }

    fn check_frame_invariants(&self, a_set: &[EventId], _en_events: &[EventId]) {
        // C ∩ D = ∅, C ∩ A = ∅ and D ∩ A = ∅; D ⊆ ex(C) holds structurally.
        debug_assert!(self.d_list.iter().all(|&d| !self.unf.get(d).in_c));
        debug_assert!(a_set.iter().all(|&a| !self.unf.get(a).in_d));
        debug_assert!(a_set.iter().all(|&a| !self.unf.get(a).in_c));
    }
}
