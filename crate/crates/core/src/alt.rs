//! Clue computation: k-partial alternatives via comb construction and
//! combination search.
//!
//! Given the configuration C and the disabled set D, the search picks the
//! k most recently disabled events, builds one spike per pick out of all
//! live events in conflict with it, prunes spike entries that cannot extend
//! C or whose history meets D, and then looks for one pairwise
//! conflict-free combination across the spikes. The union of the local
//! configurations of a combination is a clue: a configuration compatible
//! with C, disjoint from D, witnessing an unexplored maximal configuration.

use crate::config::Config;
use crate::event::{EventId, Unfolding, BOT};

/// How many disabled events a clue must conflict with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KLimit {
    Finite(usize),
    Infinite,
}

impl KLimit {
    pub fn pick(self, d_len: usize) -> usize {
        match self {
            KLimit::Finite(k) => k.min(d_len),
            KLimit::Infinite => d_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AltConfig {
    pub k: KLimit,
}

impl AltConfig {
    pub fn new(k: KLimit) -> Self {
        if let KLimit::Finite(k) = k {
            assert!(k >= 1, "k must be at least 1");
        }
        AltConfig { k }
    }
}

/// Ordered spikes of candidate events; a combination draws one per spike.
#[derive(Debug, Clone, Default)]
pub struct Comb {
    pub spikes: Vec<Vec<EventId>>,
}

/// Counters reported back to the exploration statistics.
#[derive(Debug, Clone, Copy, Default)]
pub struct AltCost {
    /// Candidates considered during the combination search.
    pub search_visits: u64,
    /// Product of spike lengths (the search-space bound).
    pub comb_size: f64,
    /// Live events scanned while building spikes.
    pub build_scanned: u64,
    /// Time spent in the combination search (the rest built the comb).
    pub search_time: std::time::Duration,
}

/// Computes a clue to `d_list` after `config`, or `None` when the comb has
/// no combination (pruning the right branch).
pub fn alt(
    unf: &mut Unfolding,
    config: &Config,
    d_list: &[EventId],
    cfg: AltConfig,
    cost: &mut AltCost,
) -> Option<Vec<EventId>> {
    debug_assert!(!d_list.is_empty());
    let k = cfg.k.pick(d_list.len());
    let picked: Vec<EventId> = d_list[d_list.len() - k..].to_vec();

    // Build the spikes: live events in conflict with each pick, filtered to
    // those that can extend C without touching D.
    let mut comb = Comb { spikes: vec![Vec::new(); k] };
    let cut: Vec<EventId> = config
        .cut_thread()
        .iter()
        .copied()
        .filter(|&e| e != BOT)
        .collect();
    let mut hits = vec![false; k];
    for e in unf.ids() {
        if !unf.get(e).live {
            continue;
        }
        cost.build_scanned += 1;
        let mut any = false;
        for (i, &d) in picked.iter().enumerate() {
            hits[i] = unf.in_conflict(e, d);
            any |= hits[i];
        }
        if !any {
            continue;
        }
        // [e] ∪ C must be a configuration: by conflict inheritance it is
        // enough that e clears the causally maximal members of C.
        if cut.iter().any(|&c| unf.in_conflict(e, c)) {
            continue;
        }
        if unf.local_config_meets_d(e) {
            continue;
        }
        for i in 0..k {
            if hits[i] {
                comb.spikes[i].push(e);
            }
        }
    }

    if comb.spikes.iter().any(|s| s.is_empty()) {
        return None;
    }

    // Fail-fast ordering: shortest spike first; inside a spike, deepest
    // (latest) candidates first, ties by id for reproducibility.
    comb.spikes.sort_by_key(|s| s.len());
    for spike in &mut comb.spikes {
        spike.sort_by_key(|&e| {
            (
                std::cmp::Reverse(unf.thread_depth(e) + unf.lock_depth(e)),
                e,
            )
        });
    }
    cost.comb_size = comb.spikes.iter().map(|s| s.len() as f64).product();

    let t0 = std::time::Instant::now();
    let mut chosen: Vec<EventId> = Vec::with_capacity(k);
    let found = search(unf, &comb, 0, &mut chosen, &mut cost.search_visits);
    cost.search_time = t0.elapsed();
    if !found {
        return None;
    }

    // J := union of the chosen local configurations.
    let mut j: Vec<EventId> = Vec::new();
    for &e in &chosen {
        j.extend(unf.local_config(e));
    }
    j.sort_unstable();
    j.dedup();
    // A clue lives in U; pruning may have retired parts of these histories.
    for &e in &j {
        unf.revive(e);
    }
    Some(j)
}

fn search(
    unf: &Unfolding,
    comb: &Comb,
    depth: usize,
    chosen: &mut Vec<EventId>,
    visits: &mut u64,
) -> bool {
    if depth == comb.spikes.len() {
        return true;
    }
    for &cand in &comb.spikes[depth] {
        *visits += 1;
        if chosen.iter().any(|&c| unf.in_conflict(c, cand)) {
            continue;
        }
        chosen.push(cand);
        if search(unf, comb, depth + 1, chosen, visits) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Whether `j` is a clue to `d_list` after `config`: `C ∪ J` is a
/// configuration and `J ∩ D = ∅`.
pub fn is_clue(unf: &Unfolding, config: &Config, d_list: &[EventId], j: &[EventId]) -> bool {
    if j.iter().any(|e| d_list.contains(e)) {
        return false;
    }
    // Causal closure of C ∪ J.
    let in_cj = |e: EventId| -> bool {
        e == BOT || unf.get(e).in_c || j.contains(&e)
    };
    for &e in j {
        let ev = unf.get(e);
        if !in_cj(ev.pt) || !in_cj(ev.pm) {
            return false;
        }
    }
    // Conflict-freeness: J internally and against C's maximal members.
    for (i, &a) in j.iter().enumerate() {
        for &b in &j[i + 1..] {
            if unf.in_conflict(a, b) {
                return false;
            }
        }
        for &c in config.cut_thread() {
            if c != BOT && unf.in_conflict(a, c) {
                return false;
            }
        }
    }
    true
}

/// Whether `j` is an alternative to `d_list` after `config`: a clue that
/// conflicts with every disabled event.
pub fn is_alternative(unf: &Unfolding, config: &Config, d_list: &[EventId], j: &[EventId]) -> bool {
    is_clue(unf, config, d_list, j)
        && d_list
            .iter()
            .all(|&d| j.iter().any(|&e| unf.in_conflict(e, d)))
}
