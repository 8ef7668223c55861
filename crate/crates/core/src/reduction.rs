//! Independent set as URLLC admission: vertices become users, edges become
//! resource blocks, and a user is active exactly on its incident edges with a
//! demand equal to its degree. A vertex set is then schedulable iff no two of
//! its vertices share an edge.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::BinaryInstance;

/// Largest vertex count [`independent_set_brute_force`] accepts.
pub const BRUTE_FORCE_CAP: usize = 20;

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    /// Rejects self-loops, repeated edges and out-of-range endpoints. Edges
    /// are stored as `(min, max)` in insertion order.
    pub fn new(vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::invalid("edges", format!("self-loop at vertex {u}")));
            }
            if u.max(v) >= vertices {
                return Err(Error::invalid(
                    "edges",
                    format!("edge ({u}, {v}) outside {vertices} vertices"),
                ));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(Error::invalid("edges", format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            list.push(e);
        }
        Ok(UndirectedGraph { vertices, edges: list })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(a, b)| *a == v || *b == v).count()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let members: BTreeSet<usize> = set.iter().copied().collect();
        !self.edges.iter().any(|(a, b)| members.contains(a) && members.contains(b))
    }

    /// Parses an edge list: one `u v` pair per line, `#` starts a comment.
    /// The vertex count is one more than the largest id mentioned, or taken
    /// from a `# vertices N` header line when present.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let (body, comment) = raw.split_once('#').unwrap_or((raw, ""));
            if let Some(n) = comment.trim().strip_prefix("vertices") {
                let n = n.trim().parse::<usize>().map_err(|e| Error::EdgeList {
                    line,
                    reason: format!("bad vertex count: {e}"),
                })?;
                declared = Some(n);
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                [u, v] => {
                    let parse = |s: &str| {
                        s.parse::<usize>().map_err(|e| Error::EdgeList {
                            line,
                            reason: format!("bad vertex id {s:?}: {e}"),
                        })
                    };
                    edges.push((parse(u)?, parse(v)?));
                }
                _ => {
                    return Err(Error::EdgeList {
                        line,
                        reason: format!("expected two vertex ids, found {}", fields.len()),
                    })
                }
            }
        }
        let implied = edges.iter().map(|(u, v)| u.max(v) + 1).max().unwrap_or(0);
        UndirectedGraph::new(declared.unwrap_or(implied).max(implied), edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_edge_list(&text)
    }
}

impl FromStr for UndirectedGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_edge_list(s)
    }
}

impl fmt::Display for UndirectedGraph {
    /// Edge-list form accepted by [`UndirectedGraph::from_edge_list`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# vertices {}", self.vertices)?;
        self.edges.iter().try_for_each(|(u, v)| writeln!(f, "{u} {v}"))
    }
}

/// Users = vertices, blocks = edges, `δ[v][e] = 1` iff `v ∈ e`,
/// `d_v = deg(v)`, unit utilities. Isolated vertices get demand 0 and are
/// always admissible.
pub fn graph_to_urllc(g: &UndirectedGraph) -> BinaryInstance {
    let blocks = g.edges.len();
    let mut active = vec![false; g.vertices * blocks];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        active[u * blocks + e] = true;
        active[v * blocks + e] = true;
    }
    let demands = (0..g.vertices).map(|v| g.degree(v)).collect();
    BinaryInstance::new(g.vertices, blocks, active, demands, vec![1.0; g.vertices])
        .expect("construction yields consistent dimensions and unit utilities")
}

/// Size of a maximum independent set by checking every vertex subset.
pub fn independent_set_brute_force(g: &UndirectedGraph) -> Result<usize> {
    if g.vertices > BRUTE_FORCE_CAP {
        return Err(Error::CapExceeded {
            what: "brute-force independent set vertices",
            size: g.vertices,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let masks: Vec<u32> = g.edges.iter().map(|(u, v)| 1 << u | 1 << v).collect();
    Ok((0u32..1 << g.vertices)
        .filter(|s| masks.iter().all(|m| s & m != *m))
        .map(|s| s.count_ones() as usize)
        .max()
        .unwrap_or(0))
}
