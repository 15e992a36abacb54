//! Graphviz rendering of an unfolding: solid arrows for immediate
//! causality, dotted edges between lock-tree siblings (the immediate
//! conflicts of the structure).

use por_core::{Effect, EventId, Program, Unfolding, BOT};
use std::collections::BTreeSet;
use std::fmt::Write as _;

fn label(program: &Program, unf: &Unfolding, e: EventId) -> String {
    let a = unf.get(e).action;
    let effect = match a.effect {
        Effect::Local => "local".to_string(),
        Effect::Lock(m) => format!("lock {}", program.mutexes[m]),
        Effect::Unlock(m) => format!("unlock {}", program.mutexes[m]),
    };
    format!("{}: \u{27e8}{},{}\u{27e9}", e, a.thread, effect)
}

/// Renders the given events. Node and edge emission is sorted, so the
/// output is deterministic.
pub fn export_dot(program: &Program, unf: &Unfolding, ids: &[EventId]) -> String {
    let included: BTreeSet<EventId> = ids.iter().copied().collect();
    let mut out = String::new();
    out.push_str("digraph unfolding {\n");
    out.push_str("  node [shape=box, fontsize=10];\n");
    for &e in &included {
        let _ = writeln!(out, "  e{} [label=\"{}\"];", e, label(program, unf, e));
    }
    // Immediate causality; a node's two parent links can coincide.
    let mut solid: BTreeSet<(EventId, EventId)> = BTreeSet::new();
    for &e in &included {
        let ev = unf.get(e);
        for p in [ev.pt, ev.pm] {
            if p != BOT && included.contains(&p) {
                solid.insert((p, e));
            }
        }
    }
    for (a, b) in solid {
        let _ = writeln!(out, "  e{a} -> e{b};");
    }
    // Immediate conflicts: siblings in some lock tree.
    let mut dotted: BTreeSet<(EventId, EventId)> = BTreeSet::new();
    for tree in &unf.index.lock_trees {
        for node in 0..tree.len() as u32 {
            let kids: Vec<EventId> = tree
                .children_of(node)
                .iter()
                .map(|&k| tree.node(k).owner)
                .filter(|o| included.contains(o))
                .collect();
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    dotted.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    for (a, b) in dotted {
        let _ = writeln!(out, "  e{a} -> e{b} [style=dotted, dir=none, constraint=false];");
    }
    out.push_str("}\n");
    out
}

/// The sibling pairs the renderer would draw, for tests.
pub fn conflict_edges(unf: &Unfolding, ids: &[EventId]) -> Vec<(EventId, EventId)> {
    let included: BTreeSet<EventId> = ids.iter().copied().collect();
    let mut out = BTreeSet::new();
    for tree in &unf.index.lock_trees {
        for node in 0..tree.len() as u32 {
            let kids: Vec<EventId> = tree
                .children_of(node)
                .iter()
                .map(|&k| tree.node(k).owner)
                .filter(|o| included.contains(o))
                .collect();
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    out.into_iter().collect()
}
