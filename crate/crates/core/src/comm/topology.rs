use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CommError;
use crate::Rank;

/// Cut points `c_i = floor(i * n / parts)` for `i = 0..=parts`.
///
/// Part `i` is `[c_i, c_{i+1})`. Shared by hostfile block-fill and the
/// block distribution.
pub fn cut_points(n: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * n / parts).collect()
}

/// Launch geometry: nodes x processes-per-node, with an optional thread count
/// that is recorded but otherwise unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triples {
    pub nodes: usize,
    pub ppn: usize,
    pub threads: usize,
}

impl Triples {
    pub fn new(nodes: usize, ppn: usize) -> Self {
        Self { nodes, ppn, threads: 1 }
    }

    pub fn size(&self) -> usize {
        self.nodes * self.ppn
    }
}

impl FromStr for Triples {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('x').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(format!("expected NxP or NxPxT, got {s:?}"));
        }
        let mut nums = Vec::with_capacity(3);
        for p in &parts {
            let n: usize = p.trim().parse().map_err(|_| format!("bad number {p:?} in {s:?}"))?;
            if n == 0 {
                return Err(format!("zero component in {s:?}"));
            }
            nums.push(n);
        }
        Ok(Triples { nodes: nums[0], ppn: nums[1], threads: nums.get(2).copied().unwrap_or(1) })
    }
}

impl fmt::Display for Triples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nodes, self.ppn)?;
        if self.threads != 1 {
            write!(f, "x{}", self.threads)?;
        }
        Ok(())
    }
}

/// How ranks are placed on nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeMap {
    Triples(Triples),
    Hostfile(PathBuf),
    /// Host names already read from a hostfile.
    Hosts(Vec<String>),
}

impl FromStr for NodeMap {
    type Err = String;

    /// Parses `triples:<nodes>x<ppn>` or `hostfile:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(t) = s.strip_prefix("triples:") {
            Ok(NodeMap::Triples(t.parse()?))
        } else if let Some(p) = s.strip_prefix("hostfile:") {
            Ok(NodeMap::Hostfile(PathBuf::from(p)))
        } else {
            Err(format!("node map must be triples:NxP or hostfile:PATH, got {s:?}"))
        }
    }
}

impl fmt::Display for NodeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeMap::Triples(t) => write!(f, "triples:{t}"),
            NodeMap::Hostfile(p) => write!(f, "hostfile:{}", p.display()),
            NodeMap::Hosts(h) => write!(f, "hosts:{}", h.join(",")),
        }
    }
}

/// One hostname per line; blank lines and `#` comments are skipped.
pub fn read_hostfile(path: &Path) -> Result<Vec<String>, CommError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CommError::InconsistentNodeMap(format!("reading {}: {e}", path.display())))?;
    let hosts: Vec<String> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if hosts.is_empty() {
        return Err(CommError::InconsistentNodeMap(format!("{} lists no hosts", path.display())));
    }
    Ok(hosts)
}

/// Rank-to-node placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTopology {
    node_of: Vec<usize>,
    nodes: Vec<Vec<Rank>>,
    hosts: Vec<String>,
}

impl NodeTopology {
    /// Everything on one node.
    pub fn single_node(size: usize) -> Self {
        Self::from_triples(Triples::new(1, size))
    }

    /// Node-major contiguous blocks of `ppn` ranks.
    pub fn from_triples(t: Triples) -> Self {
        let nodes: Vec<Vec<Rank>> =
            (0..t.nodes).map(|n| (n * t.ppn..(n + 1) * t.ppn).collect()).collect();
        let hosts = (0..t.nodes).map(|n| format!("node{n}")).collect();
        Self::from_parts(nodes, hosts)
    }

    /// Contiguous block-fill of `size` ranks over `hosts` using the cut-point rule.
    pub fn from_hosts(hosts: Vec<String>, size: usize) -> Result<Self, CommError> {
        if hosts.is_empty() || size < hosts.len() {
            return Err(CommError::InconsistentNodeMap(format!(
                "{size} ranks cannot fill {} hosts",
                hosts.len()
            )));
        }
        let cuts = cut_points(size, hosts.len());
        let nodes = cuts.windows(2).map(|w| (w[0]..w[1]).collect()).collect();
        Ok(Self::from_parts(nodes, hosts))
    }

    fn from_parts(nodes: Vec<Vec<Rank>>, hosts: Vec<String>) -> Self {
        let size = nodes.iter().map(Vec::len).sum();
        let mut node_of = vec![0; size];
        for (n, ranks) in nodes.iter().enumerate() {
            for &r in ranks {
                node_of[r] = n;
            }
        }
        Self { node_of, nodes, hosts }
    }

    pub fn size(&self) -> usize {
        self.node_of.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_of(&self, rank: Rank) -> usize {
        self.node_of[rank]
    }

    pub fn node_map(&self) -> &[usize] {
        &self.node_of
    }

    pub fn nodes(&self) -> &[Vec<Rank>] {
        &self.nodes
    }

    pub fn ranks_on(&self, node: usize) -> &[Rank] {
        &self.nodes[node]
    }

    pub fn leader_of_node(&self, node: usize) -> Rank {
        self.nodes[node][0]
    }

    pub fn leaders(&self) -> Vec<Rank> {
        self.nodes.iter().map(|n| n[0]).collect()
    }

    pub fn is_leader(&self, rank: Rank) -> bool {
        self.leader_of_node(self.node_of(rank)) == rank
    }

    pub fn global_leader(&self) -> Rank {
        0
    }

    pub fn host_of(&self, rank: Rank) -> &str {
        &self.hosts[self.node_of(rank)]
    }

    pub fn hosts(&self) -> &[String] {
        &self.hosts
    }

    /// Position of `rank` within its node.
    pub fn local_rank(&self, rank: Rank) -> usize {
        let node = &self.nodes[self.node_of(rank)];
        node.iter().position(|&r| r == rank).expect("rank is on its node")
    }

    /// Largest number of ranks on any node.
    pub fn max_ppn(&self) -> usize {
        self.nodes.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Resolves a node-map descriptor for `size` ranks.
pub fn build_topology(map: &NodeMap, size: usize) -> Result<NodeTopology, CommError> {
    match map {
        NodeMap::Triples(t) => {
            if t.size() != size {
                return Err(CommError::InconsistentNodeMap(format!(
                    "triples {t} give {} ranks, size is {size}",
                    t.size()
                )));
            }
            Ok(NodeTopology::from_triples(*t))
        }
        NodeMap::Hostfile(path) => NodeTopology::from_hosts(read_hostfile(path)?, size),
        NodeMap::Hosts(hosts) => NodeTopology::from_hosts(hosts.clone(), size),
    }
}
