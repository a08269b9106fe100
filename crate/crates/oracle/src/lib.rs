//! Reference reachability checker for stwgc heaps.
//!
//! The checker reads the stopped heap through [`HeapView`] only and shares
//! no code with the collector: it marks from the roots with an explicit
//! work list and numbers blocks in breadth-first discovery order. Two heaps
//! whose canonical graphs compare equal hold isomorphic reachable graphs,
//! sharing and opaque payloads included.

pub mod trace;

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use stwgc::{CollectionKind, CycleInfo, GcObserver, HeapView, Value};

/// A field or root after canonical renumbering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Imm(i64),
    /// Index of a node in discovery order.
    Ref(usize),
    /// Untraced payload word.
    Raw(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub tag: u8,
    pub size: usize,
    pub fields: Vec<Slot>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    pub roots: Vec<Slot>,
    pub nodes: Vec<Node>,
}

impl Graph {
    /// Words occupied by the reachable blocks, headers included.
    pub fn footprint(&self) -> usize {
        self.nodes.iter().map(|n| n.size + 1).sum()
    }
}

/// Why a heap could not be read as a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Broken {
    /// A reachable reference has no readable header (dangling or forwarded).
    Dangling { from_node: Option<usize>, raw: usize },
}

/// Canonical graph reachable from `roots`.
pub fn canonical(view: &HeapView<'_>, roots: &[Value]) -> Result<Graph, Broken> {
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<Value> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    let visit = |v: Value, from: Option<usize>, ids: &mut HashMap<usize, usize>,
                     order: &mut Vec<Value>, queue: &mut VecDeque<usize>|
     -> Result<Slot, Broken> {
        if let Some(n) = v.read_immediate() {
            return Ok(Slot::Imm(n));
        }
        if let Some(&id) = ids.get(&v.raw()) {
            return Ok(Slot::Ref(id));
        }
        if view.header(v).is_none() {
            return Err(Broken::Dangling { from_node: from, raw: v.raw() });
        }
        let id = order.len();
        ids.insert(v.raw(), id);
        order.push(v);
        queue.push_back(id);
        Ok(Slot::Ref(id))
    };

    let mut graph = Graph::default();
    for &r in roots {
        let s = visit(r, None, &mut ids, &mut order, &mut queue)?;
        graph.roots.push(s);
    }
    while let Some(id) = queue.pop_front() {
        let v = order[id];
        let hd = view.header(v).expect("checked on discovery");
        let traced = view.is_traceable(hd.tag);
        let mut fields = Vec::with_capacity(hd.size);
        for i in 0..hd.size {
            let w = view.field(v, i).expect("index within size");
            let s = if traced {
                visit(Value::from_raw(w), Some(id), &mut ids, &mut order, &mut queue)?
            } else {
                Slot::Raw(w)
            };
            fields.push(s);
        }
        graph.nodes.push(Node {
            tag: hd.tag,
            size: hd.size,
            fields,
        });
    }
    Ok(graph)
}

/// Every reachable block reference, roots first, in discovery order.
pub fn reachable(view: &HeapView<'_>, roots: &[Value]) -> Result<Vec<Value>, Broken> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut work: Vec<Value> = roots.iter().copied().filter(|v| v.is_block()).collect();
    while let Some(v) = work.pop() {
        if !seen.insert(v.raw()) {
            continue;
        }
        let Some(hd) = view.header(v) else {
            return Err(Broken::Dangling { from_node: None, raw: v.raw() });
        };
        out.push(v);
        if view.is_traceable(hd.tag) {
            for i in 0..hd.size {
                let f = Value::from_raw(view.field(v, i).expect("index within size"));
                if f.is_block() {
                    work.push(f);
                }
            }
        }
    }
    Ok(out)
}

/// Reachable references (roots included) that point into a page.
pub fn page_refs(view: &HeapView<'_>, roots: &[Value]) -> Result<usize, Broken> {
    let mut n = roots.iter().filter(|r| view.in_pages(**r)).count();
    for v in reachable(view, roots)? {
        let hd = view.header(v).expect("reachable blocks have headers");
        if view.is_traceable(hd.tag) {
            n += (0..hd.size)
                .filter(|&i| view.in_pages(Value::from_raw(view.field(v, i).unwrap())))
                .count();
        }
    }
    Ok(n)
}

/// Outcome of checking every cycle seen by a [`CycleChecker`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub cycles: u64,
    pub full: u64,
    pub partial: u64,
    /// Cycles whose post-collection graph differed from the pre-collection one.
    pub mismatches: u64,
    /// Cycles that left a dangling or forwarded reachable reference.
    pub broken: u64,
    /// Reachable page references found after partial cycles.
    pub page_refs_after_partial: u64,
    /// Full cycles where shared used space, copied words and the live
    /// footprint did not all agree.
    pub footprint_errors: u64,
    pub first_failure: Option<String>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches == 0
            && self.broken == 0
            && self.page_refs_after_partial == 0
            && self.footprint_errors == 0
    }

    fn fail(&mut self, msg: String) {
        self.first_failure.get_or_insert(msg);
    }
}

/// Observer comparing the reachable graph before and after every cycle.
#[derive(Default)]
pub struct CycleChecker {
    pending: Mutex<Option<Result<Graph, Broken>>>,
    report: Mutex<CheckReport>,
}

impl CycleChecker {
    pub fn new() -> CycleChecker {
        CycleChecker::default()
    }

    pub fn report(&self) -> CheckReport {
        self.report.lock().unwrap().clone()
    }
}

impl GcObserver for CycleChecker {
    fn before_cycle(&self, view: &HeapView<'_>) {
        let g = canonical(view, &view.roots());
        *self.pending.lock().unwrap() = Some(g);
    }

    fn after_cycle(&self, info: &CycleInfo, view: &HeapView<'_>) {
        let before = self.pending.lock().unwrap().take();
        let roots = view.roots();
        let after = canonical(view, &roots);
        let mut rep = self.report.lock().unwrap();
        rep.cycles += 1;
        match info.kind {
            CollectionKind::Full => rep.full += 1,
            CollectionKind::Partial => rep.partial += 1,
        }
        let n = rep.cycles;
        let after = match after {
            Ok(g) => g,
            Err(e) => {
                rep.broken += 1;
                rep.fail(format!("cycle {n}: heap broken after collection: {e:?}"));
                return;
            }
        };
        match before {
            Some(Ok(b)) if b == after => {}
            Some(Ok(_)) => {
                rep.mismatches += 1;
                rep.fail(format!("cycle {n} ({:?}): reachable graph changed", info.kind));
            }
            Some(Err(e)) => {
                rep.broken += 1;
                rep.fail(format!("cycle {n}: heap broken before collection: {e:?}"));
            }
            None => {
                rep.mismatches += 1;
                rep.fail(format!("cycle {n}: no snapshot taken"));
            }
        }
        if info.kind == CollectionKind::Partial {
            let refs = page_refs(view, &roots).unwrap_or(usize::MAX);
            if refs != 0 {
                rep.page_refs_after_partial += refs as u64;
                rep.fail(format!("cycle {n}: {refs} page references after partial"));
            }
        }
        if info.kind == CollectionKind::Full {
            let live = after.footprint();
            let used = view.shared_used();
            if live != used || info.words_copied != used as u64 {
                rep.footprint_errors += 1;
                rep.fail(format!(
                    "cycle {n}: live {live}, shared used {used}, copied {}",
                    info.words_copied
                ));
            }
        }
    }
}
