//! Small named digraph with d-separation.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("edge {0} -> {1} would create a cycle")]
    Cycle(String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Digraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
}

impl Digraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node if absent and returns its index.
    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.parents.push(BTreeSet::new());
        self.children.push(BTreeSet::new());
        i
    }

    /// Adds `a -> b`, creating endpoints as needed. No cycle check.
    pub fn add_edge(&mut self, a: &str, b: &str) {
        let i = self.add_node(a);
        let j = self.add_node(b);
        self.parents[j].insert(i);
        self.children[i].insert(j);
    }

    pub fn remove_edge(&mut self, a: &str, b: &str) {
        if let (Some(&i), Some(&j)) = (self.index.get(a), self.index.get(b)) {
            self.parents[j].remove(&i);
            self.children[i].remove(&j);
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.id(a), self.id(b)) {
            (Some(i), Some(j)) => self.children[i].contains(&j),
            _ => false,
        }
    }

    pub fn parents_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.parents[i]
    }

    pub fn children_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.children[i]
    }

    pub fn parent_names(&self, name: &str) -> BTreeSet<String> {
        self.id(name)
            .map(|i| self.parents[i].iter().map(|&p| self.names[p].clone()).collect())
            .unwrap_or_default()
    }

    /// All edges as name pairs, sorted.
    pub fn edge_list(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = (0..self.len())
            .flat_map(|i| self.children[i].iter().map(move |&j| (i, j)))
            .map(|(i, j)| (self.names[i].clone(), self.names[j].clone()))
            .collect();
        out.sort();
        out
    }

    /// Indices reachable from `i` by directed edges, excluding `i`.
    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.children[i].iter().copied().collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.children[v].iter().copied());
            }
        }
        seen
    }

    pub fn ancestors(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.parents[i].iter().copied().collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.parents[v].iter().copied());
            }
        }
        seen
    }

    pub fn is_acyclic(&self) -> bool {
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut q: VecDeque<usize> = (0..self.len()).filter(|&i| indeg[i] == 0).collect();
        let mut n = 0;
        while let Some(v) = q.pop_front() {
            n += 1;
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    q.push_back(c);
                }
            }
        }
        n == self.len()
    }

    fn ids(&self, names: &BTreeSet<String>) -> Result<BTreeSet<usize>, GraphError> {
        names
            .iter()
            .map(|n| self.id(n).ok_or_else(|| GraphError::UnknownVariable(n.clone())))
            .collect()
    }

    /// True iff every node of `a` is d-separated from every node of `b`
    /// given `z`. Nodes in `z` are treated as observed, so `a ⊆ z` gives true.
    pub fn d_separated(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        z: &BTreeSet<String>,
    ) -> Result<bool, GraphError> {
        let a = self.ids(a)?;
        let b = self.ids(b)?;
        let z = self.ids(z)?;
        let reach = self.reachable(&a, &z);
        Ok(b.iter().all(|x| z.contains(x) || !reach.contains(x)))
    }

    /// Nodes reachable from `sources` by an active trail given `z`
    /// (Bayes-ball). Observed sources start no trail.
    pub fn reachable(&self, sources: &BTreeSet<usize>, z: &BTreeSet<usize>) -> BTreeSet<usize> {
        // ancestors of z, for collider activation
        let mut anc_z: BTreeSet<usize> = z.clone();
        let mut stack: Vec<usize> = z.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if anc_z.insert(p) {
                    stack.push(p);
                }
            }
        }
        // (node, arrived_from_child) where "up" means travelling against edges
        let mut visited: BTreeSet<(usize, bool)> = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut queue: VecDeque<(usize, bool)> = VecDeque::new();
        for &s in sources {
            if !z.contains(&s) {
                queue.push_back((s, true));
            }
        }
        while let Some((v, up)) = queue.pop_front() {
            if !visited.insert((v, up)) {
                continue;
            }
            if !z.contains(&v) {
                out.insert(v);
            }
            if up {
                // arrived from a child (or is a source)
                if !z.contains(&v) {
                    for &p in &self.parents[v] {
                        queue.push_back((p, true));
                    }
                    for &c in &self.children[v] {
                        queue.push_back((c, false));
                    }
                }
            } else {
                // arrived from a parent
                if !z.contains(&v) {
                    for &c in &self.children[v] {
                        queue.push_back((c, false));
                    }
                }
                if anc_z.contains(&v) {
                    for &p in &self.parents[v] {
                        queue.push_back((p, true));
                    }
                }
            }
        }
        out
    }

    /// Reference d-separation by enumerating every simple trail in the
    /// skeleton and testing each for blocking. Exponential; small graphs only.
    pub fn d_separated_by_trails(
        &self,
        a: &BTreeSet<String>,
        b: &BTreeSet<String>,
        z: &BTreeSet<String>,
    ) -> Result<bool, GraphError> {
        let a = self.ids(a)?;
        let b = self.ids(b)?;
        let z = self.ids(z)?;
        for &s in &a {
            for &t in &b {
                if z.contains(&s) || z.contains(&t) {
                    continue;
                }
                if s == t {
                    return Ok(false);
                }
                let mut path = vec![s];
                let mut on = vec![false; self.len()];
                on[s] = true;
                if self.open_trail_exists(&mut path, &mut on, t, &z) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn open_trail_exists(&self, path: &mut Vec<usize>, on: &mut [bool], t: usize, z: &BTreeSet<usize>) -> bool {
        let v = *path.last().unwrap();
        if v == t {
            return self.trail_open(path, z);
        }
        let neighbours: BTreeSet<usize> = self.parents[v].union(&self.children[v]).copied().collect();
        for n in neighbours {
            if on[n] {
                continue;
            }
            on[n] = true;
            path.push(n);
            if self.open_trail_exists(path, on, t, z) {
                return true;
            }
            path.pop();
            on[n] = false;
        }
        false
    }

    fn trail_open(&self, path: &[usize], z: &BTreeSet<usize>) -> bool {
        for k in 1..path.len().saturating_sub(1) {
            let (p, v, n) = (path[k - 1], path[k], path[k + 1]);
            let collider = self.children[p].contains(&v) && self.children[n].contains(&v);
            if collider {
                let mut active = z.contains(&v);
                if !active {
                    active = self.descendants(v).iter().any(|d| z.contains(d));
                }
                if !active {
                    return false;
                }
            } else if z.contains(&v) {
                return false;
            }
        }
        true
    }
}

pub fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}
