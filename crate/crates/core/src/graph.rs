//! Region contiguity graph and the intrinsic CAR quadratic form.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    component: Vec<usize>,
    n_components: usize,
}

impl AdjacencyGraph {
    /// Builds a graph over `nodes`; edges are symmetrized and deduplicated.
    pub fn build<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let ids: Vec<String> = nodes.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(id.clone()));
            }
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownNode(s.to_owned()));
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            let (i, j) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if i == j {
                return Err(Error::SelfLoop(ids[i].clone()));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); ids.len()];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let (component, n_components) = label_components(&neighbors);
        Ok(AdjacencyGraph { ids, index, neighbors, edges, component, n_components })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// `m_i`.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn isolated(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.degree(i) == 0).collect()
    }

    /// Connected components, counting isolated nodes as singletons.
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn component(&self, i: usize) -> usize {
        self.component[i]
    }

    pub fn is_connected(&self) -> bool {
        self.n_components == 1
    }

    /// SHA-256 over the sorted edge list by id, independent of node order.
    pub fn fingerprint(&self) -> String {
        let mut pairs: Vec<(&str, &str)> = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (self.ids[i].as_str(), self.ids[j].as_str());
                if a <= b { (a, b) } else { (b, a) }
            })
            .collect();
        pairs.sort_unstable();
        let mut nodes: Vec<&str> = self.ids.iter().map(String::as_str).collect();
        nodes.sort_unstable();
        let mut h = Sha256::new();
        for n in nodes {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        for (a, b) in pairs {
            h.update(a.as_bytes());
            h.update(b"\t");
            h.update(b.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }

    /// `Σ_{i~j} (z_i − z_j)²`, i.e. `zᵀ(D − W)z`.
    pub fn icar_quadratic<F: Real>(&self, z: &[F]) -> Result<F> {
        self.check_len(z.len())?;
        Ok(self.edges.iter().fold(F::zero(), |acc, &(i, j)| {
            let d = z[i] - z[j];
            acc + d * d
        }))
    }

    /// Mean and variance of `z_i` given its neighbors under `CAR(τ²)`:
    /// `(mean of neighbor values, τ²/m_i)`.
    pub fn car_full_conditional<F: Real>(&self, i: usize, z: &[F], tau2: F) -> Result<(F, F)> {
        self.check_len(z.len())?;
        let nb = &self.neighbors[i];
        if nb.is_empty() {
            return Err(Error::IsolatedNode(self.ids[i].clone()));
        }
        let m = lit::<F>(nb.len() as f64);
        let sum = nb.iter().fold(F::zero(), |acc, &j| acc + z[j]);
        Ok((sum / m, tau2 / m))
    }

    /// Subtracts the mean of each connected component (isolated nodes are set to 0).
    pub fn center_components<F: Real>(&self, z: &mut [F]) -> Result<()> {
        self.check_len(z.len())?;
        let mut sums = vec![F::zero(); self.n_components];
        let mut counts = vec![0usize; self.n_components];
        for (i, &v) in z.iter().enumerate() {
            sums[self.component[i]] = sums[self.component[i]] + v;
            counts[self.component[i]] += 1;
        }
        for (i, v) in z.iter_mut().enumerate() {
            let c = self.component[i];
            *v = *v - sums[c] / lit(counts[c] as f64);
        }
        Ok(())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found });
        }
        Ok(())
    }
}

fn label_components(neighbors: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; neighbors.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..neighbors.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &neighbors[v] {
                if label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses `id1<TAB>id2` lines; blank lines and `#` comments are skipped.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split('\t').map(str::trim);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                edges.push((a.to_owned(), b.to_owned()))
            }
            _ => {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!("expected `id1<TAB>id2`, got `{content}`"),
                })
            }
        }
    }
    Ok(edges)
}
