//! Directed acyclic graphs with 1-based node labels.
//!
//! An edge `(j, i)` means `j -> i`. Storage is 0-based internally; every
//! public method takes and returns 1-based labels.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on the number of paths returned by [`Dag::enumerate_paths`].
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

pub type NodeSet = BTreeSet<usize>;

/// An immutable directed acyclic graph on nodes `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    d: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Nodes in a topological order (parents before children), 0-based.
    topo: Vec<usize>,
}

/// A directed path `l0 -> l1 -> ... -> lm`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    nodes: Vec<usize>,
}

impl Path {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Number of edges on the path.
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Consecutive `(from, to)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.contains(&node)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join("->"))
    }
}

/// A relabeling of nodes: `apply(old) = new`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Permutation {
            map: (1..=d).collect(),
        }
    }

    /// Builds a permutation from `images[old - 1] = new`.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        check_permutation(&images)?;
        Ok(Permutation { map: images })
    }

    pub fn apply(&self, node: usize) -> usize {
        self.map[node - 1]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (old, &new) in self.map.iter().enumerate() {
            inv[new - 1] = old + 1;
        }
        Permutation { map: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &v)| v == k + 1)
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }
}

/// Checks that `order` is a permutation of `1..=order.len()`.
pub fn check_permutation(order: &[usize]) -> Result<()> {
    let d = order.len();
    let mut seen = vec![false; d];
    for &v in order {
        if v == 0 || v > d || seen[v - 1] {
            return Err(Error::NotPermutation(d));
        }
        seen[v - 1] = true;
    }
    Ok(())
}

impl Dag {
    /// Builds a DAG from 1-based `(from, to)` edges.
    pub fn new(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut parents = vec![Vec::new(); d];
        let mut children = vec![Vec::new(); d];
        for &(j, i) in edges {
            for node in [j, i] {
                if node == 0 || node > d {
                    return Err(Error::InvalidNode { node, d });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if parents[i - 1].contains(&(j - 1)) {
                return Err(Error::DuplicateEdge(j, i));
            }
            parents[i - 1].push(j - 1);
            children[j - 1].push(i - 1);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let topo = kahn(&parents, &children).ok_or(Error::Cycle)?;
        Ok(Dag {
            d,
            parents,
            children,
            topo,
        })
    }

    /// The graph on `d` nodes with no edges.
    pub fn empty(d: usize) -> Result<Self> {
        Self::new(d, &[])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..=self.d
    }

    /// All edges `(from, to)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(i, ps)| ps.iter().map(move |&j| (j + 1, i + 1)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from >= 1
            && to >= 1
            && from <= self.d
            && to <= self.d
            && self.parents[to - 1].binary_search(&(from - 1)).is_ok()
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.d {
            Err(Error::InvalidNode { node, d: self.d })
        } else {
            Ok(())
        }
    }

    pub fn parents(&self, i: usize) -> Result<NodeSet> {
        self.check_node(i)?;
        Ok(self.parents[i - 1].iter().map(|p| p + 1).collect())
    }

    pub fn children(&self, i: usize) -> Result<NodeSet> {
        self.check_node(i)?;
        Ok(self.children[i - 1].iter().map(|c| c + 1).collect())
    }

    /// Nodes with a directed path to `i` (excluding `i`).
    pub fn ancestors(&self, i: usize) -> Result<NodeSet> {
        self.check_node(i)?;
        Ok(reach(&self.parents, i - 1, None)
            .into_iter()
            .map(|v| v + 1)
            .collect())
    }

    /// `an(i) ∪ {i}`.
    pub fn ancestors_inclusive(&self, i: usize) -> Result<NodeSet> {
        let mut out = self.ancestors(i)?;
        out.insert(i);
        Ok(out)
    }

    /// Nodes reachable from `i` by a directed path (excluding `i`).
    pub fn descendants(&self, i: usize) -> Result<NodeSet> {
        self.check_node(i)?;
        Ok(reach(&self.children, i - 1, None)
            .into_iter()
            .map(|v| v + 1)
            .collect())
    }

    /// Ancestors of every node in `set`, together with `set` itself.
    pub fn ancestral_closure(&self, set: &[usize]) -> Result<NodeSet> {
        let mut out = NodeSet::new();
        for &v in set {
            out.extend(self.ancestors_inclusive(v)?);
        }
        Ok(out)
    }

    /// Source nodes (no parents). Never empty.
    pub fn source_nodes(&self) -> NodeSet {
        (0..self.d)
            .filter(|&i| self.parents[i].is_empty())
            .map(|i| i + 1)
            .collect()
    }

    /// A topological order, parents before children.
    pub fn topological_order(&self) -> Vec<usize> {
        self.topo.iter().map(|v| v + 1).collect()
    }

    /// True iff every edge `j -> i` has `j > i`.
    pub fn is_well_ordered(&self) -> bool {
        self.parents
            .iter()
            .enumerate()
            .all(|(i, ps)| ps.iter().all(|&j| j > i))
    }

    /// Checks whether `ancestral_order` (upstream nodes first) is consistent
    /// with every edge of the graph.
    pub fn is_causal_order(&self, ancestral_order: &[usize]) -> Result<bool> {
        if ancestral_order.len() != self.d {
            return Err(Error::NotPermutation(self.d));
        }
        check_permutation(ancestral_order)?;
        let mut position = vec![0; self.d];
        for (pos, &v) in ancestral_order.iter().enumerate() {
            position[v - 1] = pos;
        }
        Ok(self
            .edges()
            .iter()
            .all(|&(j, i)| position[j - 1] < position[i - 1]))
    }

    /// Relabels nodes so that every parent carries a larger label than its
    /// child. Returns the new graph and the map `old -> new`.
    ///
    /// Already well-ordered graphs come back unchanged with the identity.
    pub fn relabel_well_ordered(&self) -> (Dag, Permutation) {
        // Kahn's algorithm taking the largest available label first; the
        // k-th node emitted (0-based) receives label d - k.
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.d).filter(|&v| indegree[v] == 0).collect();
        let mut images = vec![0; self.d];
        let mut k = 0;
        while let Some(&v) = ready.iter().next_back() {
            ready.remove(&v);
            images[v] = self.d - k;
            k += 1;
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        let perm = Permutation { map: images };
        (self.relabel(&perm), perm)
    }

    /// Applies `perm` (old -> new) to every node.
    pub fn relabel(&self, perm: &Permutation) -> Dag {
        let edges: Vec<(usize, usize)> = self
            .edges()
            .into_iter()
            .map(|(j, i)| (perm.apply(j), perm.apply(i)))
            .collect();
        Dag::new(self.d, &edges).expect("relabeling preserves acyclicity")
    }

    /// All directed paths from `j` to `i`, capped at [`DEFAULT_PATH_CAP`].
    pub fn enumerate_paths(&self, j: usize, i: usize) -> Result<Vec<Path>> {
        self.enumerate_paths_capped(j, i, DEFAULT_PATH_CAP)
    }

    /// Depth-first enumeration of all directed paths `j ~> i`; errors once
    /// more than `cap` paths have been found.
    pub fn enumerate_paths_capped(&self, j: usize, i: usize, cap: usize) -> Result<Vec<Path>> {
        self.check_node(j)?;
        self.check_node(i)?;
        if i == j {
            return Err(Error::OverlappingNodes(format!("path endpoints {j} and {i}")));
        }
        let target = i - 1;
        // Only nodes that can still reach the target are worth visiting.
        let mut useful = reach(&self.parents, target, None);
        useful.insert(target);

        let mut out = Vec::new();
        let mut stack = vec![j - 1];
        self.paths_dfs(target, &useful, &mut stack, &mut out, cap)?;
        Ok(out)
    }

    fn paths_dfs(
        &self,
        target: usize,
        useful: &BTreeSet<usize>,
        stack: &mut Vec<usize>,
        out: &mut Vec<Path>,
        cap: usize,
    ) -> Result<()> {
        let v = *stack.last().expect("non-empty stack");
        if v == target {
            if out.len() == cap {
                return Err(Error::PathCapExceeded { cap });
            }
            out.push(Path {
                nodes: stack.iter().map(|x| x + 1).collect(),
            });
            return Ok(());
        }
        for &c in &self.children[v] {
            if useful.contains(&c) {
                stack.push(c);
                self.paths_dfs(target, useful, stack, out, cap)?;
                stack.pop();
            }
        }
        Ok(())
    }

    /// True iff there is a path `i ~> j` avoiding `k` and a path `i ~> k`
    /// avoiding `j`.
    pub fn is_confounder(&self, i: usize, j: usize, k: usize) -> Result<bool> {
        for v in [i, j, k] {
            self.check_node(v)?;
        }
        if i == j || i == k || j == k {
            return Err(Error::OverlappingNodes(format!("{i}, {j}, {k}")));
        }
        let to_j = reach(&self.children, i - 1, Some(k - 1)).contains(&(j - 1));
        let to_k = reach(&self.children, i - 1, Some(j - 1)).contains(&(k - 1));
        Ok(to_j && to_k)
    }

    /// d-separation of `i` and `j` given `z`, via the reachable-trail
    /// ("Bayes ball") algorithm.
    pub fn d_separated(&self, i: usize, j: usize, z: &NodeSet) -> Result<bool> {
        self.d_separated_with(i, j, z, |_, _| true)
    }

    /// d-separation in the subgraph keeping only edges for which
    /// `keep(from, to)` (1-based) holds.
    pub(crate) fn d_separated_with<F>(&self, i: usize, j: usize, z: &NodeSet, keep: F) -> Result<bool>
    where
        F: Fn(usize, usize) -> bool,
    {
        self.check_node(i)?;
        self.check_node(j)?;
        for &v in z {
            self.check_node(v)?;
        }
        if i == j || z.contains(&i) || z.contains(&j) {
            return Err(Error::OverlappingNodes(format!(
                "i = {i}, j = {j}, conditioning set {z:?}"
            )));
        }
        let d = self.d;
        let kept = |from: usize, to: usize| keep(from + 1, to + 1);
        let in_z: Vec<bool> = (0..d).map(|v| z.contains(&(v + 1))).collect();

        // Nodes that are in z or have a descendant in z.
        let mut opens_collider = vec![false; d];
        let mut queue: VecDeque<usize> = (0..d).filter(|&v| in_z[v]).collect();
        while let Some(v) = queue.pop_front() {
            if opens_collider[v] {
                continue;
            }
            opens_collider[v] = true;
            for &p in &self.parents[v] {
                if kept(p, v) && !opens_collider[p] {
                    queue.push_back(p);
                }
            }
        }

        // (node, arrived_from_child): true = travelling up, false = down.
        let mut visited = vec![[false; 2]; d];
        let mut queue = VecDeque::from([(i - 1, true)]);
        while let Some((v, up)) = queue.pop_front() {
            if visited[v][up as usize] {
                continue;
            }
            visited[v][up as usize] = true;
            if v == j - 1 {
                return Ok(false);
            }
            if up {
                if !in_z[v] {
                    for &p in &self.parents[v] {
                        if kept(p, v) {
                            queue.push_back((p, true));
                        }
                    }
                    for &c in &self.children[v] {
                        if kept(v, c) {
                            queue.push_back((c, false));
                        }
                    }
                }
            } else {
                if !in_z[v] {
                    for &c in &self.children[v] {
                        if kept(v, c) {
                            queue.push_back((c, false));
                        }
                    }
                }
                if opens_collider[v] {
                    for &p in &self.parents[v] {
                        if kept(p, v) {
                            queue.push_back((p, true));
                        }
                    }
                }
            }
        }
        Ok(true)
    }

    /// Samples a well-ordered DAG whose entries `(j, i)`, `j > i`, are
    /// independent Bernoulli(`p`). Draws follow row-major order over the
    /// strictly upper triangle (row `i` = child, column `j` = parent).
    pub fn random<R: Rng + ?Sized>(d: usize, p: f64, rng: &mut R) -> Result<Dag> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::InvalidProbability(p));
        }
        if d == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut edges = Vec::new();
        for i in 1..=d {
            for j in (i + 1)..=d {
                if rng.random::<f64>() < p {
                    edges.push((j, i));
                }
            }
        }
        Dag::new(d, &edges)
    }

    /// Every labeled DAG on `d` nodes (feasible for `d <= 5`).
    pub fn all(d: usize) -> Vec<Dag> {
        let pairs: Vec<(usize, usize)> = (1..=d)
            .flat_map(|a| ((a + 1)..=d).map(move |b| (a, b)))
            .collect();
        let total = 3usize.pow(pairs.len() as u32);
        let mut out = Vec::new();
        let mut edges = Vec::with_capacity(pairs.len());
        for code in 0..total {
            edges.clear();
            let mut c = code;
            for &(a, b) in &pairs {
                match c % 3 {
                    1 => edges.push((a, b)),
                    2 => edges.push((b, a)),
                    _ => {}
                }
                c /= 3;
            }
            if let Ok(g) = Dag::new(d, &edges) {
                out.push(g);
            }
        }
        out
    }

    /// Text form: `d` on the first line, then one `j i` pair per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.d);
        for (j, i) in self.edges() {
            s.push_str(&format!("{j} {i}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Dag> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let d: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty DAG file".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("node count: {e}")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "edge line {}: expected two node labels, got {:?}",
                    lineno + 1,
                    line
                )));
            }
            let parse = |f: &str| {
                f.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("edge line {}: {e}", lineno + 1)))
            };
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        Dag::new(d, &edges)
    }
}

impl FromStr for Dag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dag::from_text(s)
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn kahn(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let d = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..d).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    (order.len() == d).then_some(order)
}

/// Nodes reachable from `start` along `adjacency`, never entering `blocked`.
fn reach(adjacency: &[Vec<usize>], start: usize, blocked: Option<usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if Some(w) != blocked && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.remove(&start);
    seen
}

/// The DAG of the running example: edges 4->2, 3->2, 3->1, 2->1, 4->1.
pub fn four_node_example() -> Dag {
    Dag::new(4, &[(4, 2), (3, 2), (3, 1), (2, 1), (4, 1)]).expect("valid example DAG")
}
