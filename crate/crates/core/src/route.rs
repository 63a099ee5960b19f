// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Routing of Bernstein-Vazirani circuits onto sparse coupling graphs.
//!
//! The ancilla walks through the graph. A CNOT followed by a SWAP of the
//! same pair collapses to two CNOTs, so stepping onto a marked qubit costs 2
//! CNOTs, stepping onto anything else costs a full 3-CNOT SWAP, and a marked
//! qubit next to the ancilla's current position costs a single CNOT.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bv::OracleSpec;
use crate::circuit::{Bitstring, Dt, GateDurations, GateKind, Program, Scheduler};
use crate::error::{invalid, Error, Result};

/// Default node expansion budget for the exhaustive embedding search.
pub const DEFAULT_SEARCH_BUDGET: u64 = 50_000_000;

/// Undirected coupling graph with an optional blacklist of unusable nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingGraph {
    num_physical: usize,
    edges: BTreeSet<(usize, usize)>,
    blacklist: BTreeSet<usize>,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    nodes: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    blacklist: Vec<usize>,
}

const HEAVY_HEX_27_EDGES: [(usize, usize); 28] = [
    (0, 1),
    (1, 2),
    (1, 4),
    (2, 3),
    (3, 5),
    (4, 7),
    (5, 8),
    (6, 7),
    (7, 10),
    (8, 9),
    (8, 11),
    (10, 12),
    (11, 14),
    (12, 13),
    (12, 15),
    (13, 14),
    (14, 16),
    (15, 18),
    (16, 19),
    (17, 18),
    (18, 21),
    (19, 20),
    (19, 22),
    (21, 23),
    (22, 25),
    (23, 24),
    (24, 25),
    (25, 26),
];

impl CouplingGraph {
    pub fn new(
        num_physical: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        blacklist: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= num_physical || b >= num_physical {
                return invalid(format!("edge ({a}, {b}) outside {num_physical} nodes"));
            }
            if a == b {
                return invalid(format!("self-loop on node {a}"));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let blacklist: BTreeSet<usize> = blacklist.into_iter().collect();
        if let Some(&q) = blacklist.iter().find(|&&q| q >= num_physical) {
            return invalid(format!("blacklisted node {q} outside {num_physical} nodes"));
        }
        let mut adj = vec![Vec::new(); num_physical];
        for &(a, b) in &set {
            if !blacklist.contains(&a) && !blacklist.contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        Ok(Self {
            num_physical,
            edges: set,
            blacklist,
            adj,
        })
    }

    /// The 27-qubit heavy-hex layout of Falcon-generation processors.
    pub fn heavy_hex_27() -> Self {
        Self::new(27, HEAVY_HEX_27_EDGES, []).expect("static layout is valid")
    }

    /// A line `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i)), []).expect("chain is valid")
    }

    pub fn fully_connected(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::new(n, edges, []).expect("complete graph is valid")
    }

    pub fn with_blacklist(&self, blacklist: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut all = self.blacklist.clone();
        all.extend(blacklist);
        Self::new(self.num_physical, self.edges.iter().copied(), all)
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn blacklist(&self) -> &BTreeSet<usize> {
        &self.blacklist
    }

    pub fn is_usable(&self, v: usize) -> bool {
        v < self.num_physical && !self.blacklist.contains(&v)
    }

    pub fn usable_nodes(&self) -> Vec<usize> {
        (0..self.num_physical)
            .filter(|&v| self.is_usable(v))
            .collect()
    }

    /// Neighbours within the blacklist-filtered graph, ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        a < self.num_physical && self.adj[a].binary_search(&b).is_ok()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges of the filtered graph.
    pub fn active_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .copied()
            .filter(|&(a, b)| self.is_usable(a) && self.is_usable(b))
    }

    /// Breadth-first shortest path between usable nodes.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.num_physical];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &self.adj[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub fn to_toml(&self) -> String {
        let file = GraphFile {
            nodes: self.num_physical,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            blacklist: self.blacklist.iter().copied().collect(),
        };
        toml::to_string(&file).expect("graph serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: GraphFile =
            toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("graph file: {e}")))?;
        Self::new(
            file.nodes,
            file.edges.into_iter().map(|[a, b]| (a, b)),
            file.blacklist,
        )
    }
}

/// Where the marked qubits start and how the ancilla moves.
///
/// `ancilla_walk[0]` is the ancilla's starting node. Marked qubits whose node
/// the walk steps onto get the fused CNOT+SWAP; those in `direct_hits` get a
/// single CNOT from the first walk position adjacent to them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub logical_to_physical: BTreeMap<usize, usize>,
    pub ancilla_walk: Vec<usize>,
    pub direct_hits: BTreeSet<usize>,
    /// Found by the exhaustive search, so no simple walk is cheaper.
    #[serde(default)]
    pub optimal: bool,
}

impl Embedding {
    pub fn ancilla_start(&self) -> usize {
        self.ancilla_walk[0]
    }

    pub fn steps(&self) -> usize {
        self.ancilla_walk.len().saturating_sub(1)
    }
}

/// Whether unmarked data qubits appear in the routed circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    /// Unmarked qubits off the walk are left out and read as 0.
    #[default]
    Reduced,
    /// Every data qubit is present; unmarked ones get an H-H pair.
    Standard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouteOptions {
    pub setup: Setup,
    /// Use the two-CNOT fused step. Off means CNOT followed by a 3-CNOT SWAP.
    pub fuse: bool,
    pub durations: GateDurations,
    pub dt: Dt,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self {
            setup: Setup::Reduced,
            fuse: true,
            durations: GateDurations::UNIT,
            dt: Dt::DEFAULT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RouteStats {
    pub direct_hits: usize,
    pub fused_steps: usize,
    pub plain_steps: usize,
    /// Naive mode only: CNOT into the ancilla before a SWAP.
    pub unfused_hits: usize,
}

impl RouteStats {
    /// CNOTs implied by the cost model.
    pub fn predicted_cnots(&self) -> usize {
        self.direct_hits + 2 * self.fused_steps + 3 * self.plain_steps + self.unfused_hits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoutedCircuit {
    pub oracle: OracleSpec,
    /// Circuit on wires; `program.physical` maps wires to device nodes.
    pub program: Program,
    pub cnot_count: usize,
    /// Device node holding each present data qubit at measurement time.
    pub final_permutation: BTreeMap<usize, usize>,
    pub embedding: Embedding,
    pub stats: RouteStats,
    pub ancilla_wire: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Occupant {
    Empty,
    Ancilla,
    Data(usize),
}

fn check_walk(graph: &CouplingGraph, walk: &[usize]) -> Result<()> {
    if walk.is_empty() {
        return invalid("ancilla walk is empty");
    }
    if let Some(&v) = walk.iter().find(|&&v| !graph.is_usable(v)) {
        return invalid(format!("walk visits unusable node {v}"));
    }
    for w in walk.windows(2) {
        if !graph.is_adjacent(w[0], w[1]) {
            return invalid(format!("walk step {} -> {} is not an edge", w[0], w[1]));
        }
    }
    Ok(())
}

/// Emits the routed circuit for `spec` following `embedding`.
pub fn route_bv(
    spec: &OracleSpec,
    graph: &CouplingGraph,
    embedding: &Embedding,
    options: &RouteOptions,
) -> Result<RoutedCircuit> {
    check_walk(graph, &embedding.ancilla_walk)?;
    let n = spec.n();
    let marked: BTreeSet<usize> = spec.marked().into_iter().collect();
    let start = embedding.ancilla_start();

    let mut occ: BTreeMap<usize, Occupant> = BTreeMap::new();
    occ.insert(start, Occupant::Ancilla);
    for (&q, &v) in &embedding.logical_to_physical {
        if q >= n {
            return invalid(format!("embedding places logical qubit {q} but n = {n}"));
        }
        if !graph.is_usable(v) {
            return invalid(format!("logical qubit {q} placed on unusable node {v}"));
        }
        if occ.insert(v, Occupant::Data(q)).is_some() {
            return invalid(format!("node {v} assigned twice"));
        }
    }
    if let Some(q) = marked
        .iter()
        .find(|q| !embedding.logical_to_physical.contains_key(q))
    {
        return invalid(format!("marked qubit {q} has no position"));
    }
    if let Some(q) = embedding.direct_hits.iter().find(|q| !marked.contains(q)) {
        return invalid(format!("direct hit {q} is not a marked qubit"));
    }
    if options.setup == Setup::Standard {
        let spare_on_walk: Vec<usize> = embedding
            .ancilla_walk
            .iter()
            .copied()
            .filter(|v| !occ.contains_key(v))
            .collect();
        let walk_set: BTreeSet<usize> = embedding.ancilla_walk.iter().copied().collect();
        let mut free = graph
            .usable_nodes()
            .into_iter()
            .filter(|v| !occ.contains_key(v) && !walk_set.contains(v))
            .chain(spare_on_walk)
            .collect::<Vec<_>>()
            .into_iter();
        for q in 0..n {
            if embedding.logical_to_physical.contains_key(&q) {
                continue;
            }
            let v = free.next().ok_or_else(|| {
                Error::Infeasible(format!(
                    "no node left for unmarked qubit {q} in standard setup"
                ))
            })?;
            occ.insert(v, Occupant::Data(q));
        }
    }

    let mut nodes: BTreeSet<usize> = occ.keys().copied().collect();
    nodes.extend(embedding.ancilla_walk.iter().copied());
    let physical: Vec<usize> = nodes.into_iter().collect();
    let wire_of = |v: usize| physical.binary_search(&v).expect("node has a wire");
    let occupant = |v: usize, occ: &BTreeMap<usize, Occupant>| -> Occupant {
        occ.get(&v).copied().unwrap_or(Occupant::Empty)
    };

    let mut s = Scheduler::new(physical.len(), options.durations);
    let anc0 = wire_of(start);
    s.push(GateKind::X, &[anc0]);
    for (&v, o) in &occ {
        if let Occupant::Data(_) = o {
            s.push(GateKind::H, &[wire_of(v)]);
        }
    }
    s.push(GateKind::H, &[anc0]);

    let mut stats = RouteStats::default();
    let mut hit: BTreeSet<usize> = BTreeSet::new();
    let walk = &embedding.ancilla_walk;
    for (j, &pos) in walk.iter().enumerate() {
        let a = wire_of(pos);
        for &v in graph.neighbors(pos) {
            if let Occupant::Data(q) = occupant(v, &occ) {
                if embedding.direct_hits.contains(&q) && !hit.contains(&q) {
                    s.push(GateKind::Cnot, &[wire_of(v), a]);
                    hit.insert(q);
                    stats.direct_hits += 1;
                }
            }
        }
        let Some(&next) = walk.get(j + 1) else { break };
        let d = wire_of(next);
        let o = occupant(next, &occ);
        let pending = matches!(o, Occupant::Data(q)
            if marked.contains(&q) && !hit.contains(&q) && !embedding.direct_hits.contains(&q));
        if pending && options.fuse {
            s.push(GateKind::Cnot, &[a, d]);
            s.push(GateKind::Cnot, &[d, a]);
            stats.fused_steps += 1;
        } else {
            if pending {
                s.push(GateKind::Cnot, &[d, a]);
                stats.unfused_hits += 1;
            }
            s.push(GateKind::Cnot, &[a, d]);
            s.push(GateKind::Cnot, &[d, a]);
            s.push(GateKind::Cnot, &[a, d]);
            stats.plain_steps += 1;
        }
        if let (true, Occupant::Data(q)) = (pending, o) {
            hit.insert(q);
        }
        occ.insert(pos, o);
        occ.insert(next, Occupant::Ancilla);
    }
    if let Some(q) = marked.iter().find(|q| !hit.contains(q)) {
        return invalid(format!("marked qubit {q} is never coupled to the ancilla"));
    }

    let anc_node = *walk.last().expect("walk is non-empty");
    let mut final_wires: Vec<usize> = vec![wire_of(anc_node)];
    let mut readout = vec![None; n];
    let mut final_permutation = BTreeMap::new();
    for (&v, o) in &occ {
        if let Occupant::Data(q) = o {
            final_wires.push(wire_of(v));
            readout[*q] = Some(wire_of(v));
            final_permutation.insert(v, *q);
        }
    }
    final_wires.sort_unstable();
    s.align(&final_wires);
    for &w in &final_wires {
        s.push(GateKind::H, &[w]);
    }
    let ancilla_wire = wire_of(anc_node);
    let circuit = s.finish(options.dt);
    let cnot_count = circuit.cnot_count();
    debug_assert_eq!(cnot_count, stats.predicted_cnots());
    Ok(RoutedCircuit {
        oracle: *spec,
        program: Program {
            circuit,
            physical,
            readout,
        },
        cnot_count,
        final_permutation,
        embedding: embedding.clone(),
        stats,
        ancilla_wire,
    })
}

/// Tunables for [`find_embedding_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Node expansions allowed for the exhaustive search before falling back
    /// to the greedy walk. Zero forces the greedy walk.
    pub budget: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_SEARCH_BUDGET,
        }
    }
}

pub fn find_embedding(
    graph: &CouplingGraph,
    marked: &[usize],
    ancilla_start: Option<usize>,
) -> Result<Embedding> {
    find_embedding_with(graph, marked, ancilla_start, &SearchConfig::default())
}

/// Cheapest embedding under the route cost model.
///
/// A simple walk of `L` steps whose nodes all hold marked qubits, plus
/// direct hits on off-walk neighbours, costs `k + L` CNOTs; the search
/// finds the smallest feasible `L` by iterative deepening. When no simple
/// walk suffices or the budget runs out, a greedy walk with revisits is used.
pub fn find_embedding_with(
    graph: &CouplingGraph,
    marked: &[usize],
    ancilla_start: Option<usize>,
    config: &SearchConfig,
) -> Result<Embedding> {
    let mut marked: Vec<usize> = marked.to_vec();
    marked.sort_unstable();
    marked.dedup();
    let k = marked.len();
    let usable = graph.usable_nodes();
    if let Some(s) = ancilla_start {
        if !graph.is_usable(s) {
            return invalid(format!("ancilla start {s} is not a usable node"));
        }
    }
    if k + 1 > usable.len() {
        return Err(Error::Infeasible(format!(
            "{k} marked qubits and an ancilla need {} nodes, graph has {}",
            k + 1,
            usable.len()
        )));
    }
    let starts: Vec<usize> = match ancilla_start {
        Some(s) => vec![s],
        None => usable.clone(),
    };
    if k == 0 {
        return Ok(Embedding {
            logical_to_physical: BTreeMap::new(),
            ancilla_walk: vec![starts[0]],
            direct_hits: BTreeSet::new(),
            optimal: true,
        });
    }
    let path = if config.budget > 0 {
        exhaustive_path(graph, k, &starts, config.budget)
    } else {
        None
    };
    let optimal = path.is_some();
    let (walk, hits) = match path {
        Some(p) => {
            let hits = hits_along_simple_path(graph, &p, k);
            (p, hits)
        }
        None => greedy_walk(graph, k, &starts)?,
    };
    let mut logical_to_physical = BTreeMap::new();
    let mut direct_hits = BTreeSet::new();
    for (&q, &(node, direct)) in marked.iter().zip(&hits) {
        logical_to_physical.insert(q, node);
        if direct {
            direct_hits.insert(q);
        }
    }
    Ok(Embedding {
        logical_to_physical,
        ancilla_walk: walk,
        direct_hits,
        optimal,
    })
}

struct PathSearch<'a> {
    graph: &'a CouplingGraph,
    k: usize,
    gain_bound: usize,
    on_path: Vec<bool>,
    adj_count: Vec<u32>,
    frontier: usize,
    path: Vec<usize>,
    expansions: u64,
    budget: u64,
}

impl PathSearch<'_> {
    fn coverage(&self) -> usize {
        self.path.len() - 1 + self.frontier
    }

    fn push(&mut self, v: usize) {
        if self.adj_count[v] > 0 {
            self.frontier -= 1;
        }
        self.on_path[v] = true;
        self.path.push(v);
        for &w in self.graph.neighbors(v) {
            if self.adj_count[w] == 0 && !self.on_path[w] {
                self.frontier += 1;
            }
            self.adj_count[w] += 1;
        }
    }

    fn pop(&mut self) {
        let v = self.path.pop().expect("non-empty path");
        for &w in self.graph.neighbors(v) {
            self.adj_count[w] -= 1;
            if self.adj_count[w] == 0 && !self.on_path[w] {
                self.frontier -= 1;
            }
        }
        self.on_path[v] = false;
        if self.adj_count[v] > 0 {
            self.frontier += 1;
        }
    }

    /// Returns `Some(true)` on success, `None` when out of budget.
    fn dfs(&mut self, steps_left: usize) -> Option<bool> {
        self.expansions += 1;
        if self.expansions > self.budget {
            return None;
        }
        if steps_left == 0 {
            return Some(self.coverage() >= self.k);
        }
        if self.coverage() + self.gain_bound * steps_left < self.k {
            return Some(false);
        }
        let end = *self.path.last().expect("non-empty path");
        for &w in self.graph.neighbors(end) {
            if self.on_path[w] {
                continue;
            }
            self.push(w);
            match self.dfs(steps_left - 1) {
                Some(false) => self.pop(),
                other => return other,
            }
        }
        Some(false)
    }
}

fn exhaustive_path(
    graph: &CouplingGraph,
    k: usize,
    starts: &[usize],
    budget: u64,
) -> Option<Vec<usize>> {
    let n = graph.num_physical();
    let mut search = PathSearch {
        graph,
        k,
        gain_bound: graph.max_degree().saturating_sub(1).max(1),
        on_path: vec![false; n],
        adj_count: vec![0; n],
        frontier: 0,
        path: Vec::new(),
        expansions: 0,
        budget,
    };
    let max_steps = graph.usable_nodes().len().saturating_sub(1).min(k);
    for steps in 0..=max_steps {
        for &s in starts {
            search.push(s);
            match search.dfs(steps) {
                Some(true) => return Some(search.path.clone()),
                Some(false) => search.pop(),
                None => return None,
            }
        }
    }
    None
}

/// Hit order along a simple path: at each position, unclaimed off-path
/// neighbours (ascending) as direct hits, then the next walk node as a fused
/// step. Direct hits are trimmed so exactly `k` nodes are used.
fn hits_along_simple_path(graph: &CouplingGraph, path: &[usize], k: usize) -> Vec<(usize, bool)> {
    let on_path: BTreeSet<usize> = path.iter().copied().collect();
    let mut direct_budget = k - (path.len() - 1);
    let mut claimed = BTreeSet::new();
    let mut hits = Vec::with_capacity(k);
    for (j, &pos) in path.iter().enumerate() {
        for &v in graph.neighbors(pos) {
            if direct_budget > 0 && !on_path.contains(&v) && claimed.insert(v) {
                hits.push((v, true));
                direct_budget -= 1;
            }
        }
        if let Some(&next) = path.get(j + 1) {
            hits.push((next, false));
        }
    }
    hits
}

/// Greedy fallback: step to the neighbour that uncovers the most unused
/// nodes within two moves, preferring degree-3 junctions, then the lowest
/// index. Unused neighbours of each position become direct hits, except the
/// node about to be stepped onto. Revisits cost a plain SWAP.
fn greedy_walk(
    graph: &CouplingGraph,
    k: usize,
    starts: &[usize],
) -> Result<(Vec<usize>, Vec<(usize, bool)>)> {
    let mut best: Option<(usize, Vec<usize>, Vec<(usize, bool)>)> = None;
    for &s in starts {
        if let Some((walk, hits)) = greedy_from(graph, k, s) {
            let cost = cost_of(&walk, &hits);
            if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
                best = Some((cost, walk, hits));
            }
        }
    }
    best.map(|(_, w, h)| (w, h)).ok_or_else(|| {
        Error::Infeasible(format!(
            "no walk reaches {k} marked positions; graph disconnected?"
        ))
    })
}

fn cost_of(walk: &[usize], hits: &[(usize, bool)]) -> usize {
    let direct = hits.iter().filter(|h| h.1).count();
    let fused = hits.len() - direct;
    let plain = walk.len() - 1 - fused;
    direct + 2 * fused + 3 * plain
}

fn greedy_from(
    graph: &CouplingGraph,
    k: usize,
    start: usize,
) -> Option<(Vec<usize>, Vec<(usize, bool)>)> {
    let n = graph.num_physical();
    let mut used = vec![false; n];
    used[start] = true;
    let mut walk = vec![start];
    let mut hits: Vec<(usize, bool)> = Vec::new();
    let unused_near =
        |v: usize, used: &[bool]| graph.neighbors(v).iter().filter(|&&w| !used[w]).count();
    while hits.len() < k {
        let pos = *walk.last().expect("non-empty walk");
        let score = |v: usize| -> (usize, usize, std::cmp::Reverse<usize>) {
            let own = usize::from(!used[v]);
            let two = graph
                .neighbors(v)
                .iter()
                .filter(|&&w| w != pos)
                .map(|&w| usize::from(!used[w]) + unused_near(w, &used))
                .max()
                .unwrap_or(0);
            (
                own + unused_near(v, &used) + two,
                graph.degree(v),
                std::cmp::Reverse(v),
            )
        };
        let next = graph
            .neighbors(pos)
            .iter()
            .copied()
            .filter(|&v| !used[v])
            .max_by_key(|&v| score(v));
        for &v in graph.neighbors(pos) {
            if hits.len() + usize::from(next.is_some()) >= k {
                break;
            }
            if !used[v] && Some(v) != next {
                used[v] = true;
                hits.push((v, true));
            }
        }
        if hits.len() >= k {
            break;
        }
        match next {
            Some(v) => {
                used[v] = true;
                hits.push((v, false));
                walk.push(v);
            }
            None => {
                let target = (0..n)
                    .filter(|&v| graph.is_usable(v) && !used[v])
                    .min_by_key(|&v| graph.shortest_path(pos, v).map_or(usize::MAX, |p| p.len()))?;
                let path = graph.shortest_path(pos, target)?;
                // Travel over used nodes up to the target's neighbour.
                walk.extend(&path[1..path.len() - 1]);
                if path.len() == 2 {
                    continue;
                }
            }
        }
    }
    Some((walk, hits))
}

/// Routes `spec` with a freshly searched embedding.
pub fn route_oracle(
    spec: &OracleSpec,
    graph: &CouplingGraph,
    ancilla_start: Option<usize>,
    options: &RouteOptions,
) -> Result<RoutedCircuit> {
    let embedding = find_embedding(graph, &spec.marked(), ancilla_start)?;
    route_bv(spec, graph, &embedding, options)
}

/// CNOT counts for `b = 1^n` over `ns`, and their least-squares slope.
pub fn cnot_scaling(
    graph: &CouplingGraph,
    ns: impl IntoIterator<Item = usize>,
    ancilla_start: Option<usize>,
) -> Result<(f64, Vec<(usize, usize)>)> {
    let mut counts = Vec::new();
    for n in ns {
        let spec = OracleSpec::new(Bitstring::ones_then_zeros(n, n)?);
        let routed = route_oracle(&spec, graph, ancilla_start, &RouteOptions::default())?;
        counts.push((n, routed.cnot_count));
    }
    if counts.len() < 2 {
        return invalid("need at least two sizes to fit a slope");
    }
    let xs: Vec<f64> = counts.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.1 as f64).collect();
    let (slope, _) = crate::analysis::ols(&xs, &ys, None);
    Ok((slope, counts))
}

/// Checks that the noiseless routed circuit reads out `spec.b`.
///
/// Small circuits are simulated; larger ones are checked by tracking the
/// X-basis value of each wire through the CNOT network, which is exact for
/// this circuit family. Complete DD runs whose ideal product is the identity
/// are skipped.
pub fn verify_routed(routed: &RoutedCircuit, spec: &OracleSpec) -> bool {
    if routed.program.num_data() != spec.n() {
        return false;
    }
    if routed.program.num_wires() <= crate::sim::VERIFY_STATEVECTOR_WIRES {
        return match crate::sim::ideal_distribution(&routed.program) {
            Ok(dist) => dist.get(&spec.b).is_some_and(|&p| (p - 1.0).abs() < 1e-9),
            Err(_) => false,
        };
    }
    structural_check(&routed.program, spec)
}

fn structural_check(program: &Program, spec: &OracleSpec) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Phase {
        Pre,
        In,
        Post,
    }
    let c = &program.circuit;
    let w = c.num_qubits;
    let mut events: Vec<&crate::circuit::GateEvent> = c.events.iter().collect();
    events.sort_by_key(|e| e.start());
    let has_h: Vec<bool> = (0..w)
        .map(|q| {
            events
                .iter()
                .any(|e| e.kind() == GateKind::H && e.acts_on(q))
        })
        .collect();
    // Each wire's X-frame value is an affine GF(2) form: (random mask, const).
    let mut phase: Vec<Phase> = (0..w)
        .map(|q| if has_h[q] { Phase::Pre } else { Phase::In })
        .collect();
    let mut value: Vec<(u128, bool)> = vec![(0, false); w];
    let mut fresh = 0u32;
    for q in 0..w {
        if !has_h[q] {
            if fresh >= 128 {
                return false;
            }
            value[q] = (1u128 << fresh, false);
            fresh += 1;
        }
    }
    let mut pulses: Vec<Vec<f64>> = vec![Vec::new(); w];
    let flush = |p: &mut Vec<f64>| -> bool {
        let ok = p.is_empty() || crate::dd::is_identity_up_to_phase(p, 1e-9);
        p.clear();
        ok
    };
    for e in events {
        let qs = e.qubits();
        if !matches!(e.kind(), GateKind::PhasedPi(_) | GateKind::Delay) {
            for &q in qs {
                if !flush(&mut pulses[q]) {
                    return false;
                }
            }
        }
        match e.kind() {
            GateKind::X => {
                let q = qs[0];
                match phase[q] {
                    Phase::Pre => value[q].1 ^= true,
                    _ => return false,
                }
            }
            GateKind::H => {
                let q = qs[0];
                phase[q] = match phase[q] {
                    Phase::Pre => Phase::In,
                    Phase::In => Phase::Post,
                    Phase::Post => return false,
                };
            }
            GateKind::Cnot => {
                let (ctl, tgt) = (qs[0], qs[1]);
                if phase[ctl] != Phase::In || phase[tgt] != Phase::In {
                    return false;
                }
                let t = value[tgt];
                value[ctl] = (value[ctl].0 ^ t.0, value[ctl].1 ^ t.1);
            }
            GateKind::PhasedPi(p) => pulses[qs[0]].push(p),
            GateKind::Delay => {}
        }
    }
    if !pulses.iter_mut().all(flush) {
        return false;
    }
    (0..spec.n()).all(|i| match program.readout[i] {
        None => !spec.b.bit(i),
        Some(q) => phase[q] == Phase::Post && value[q] == (0, spec.b.bit(i)),
    })
}
