//! Explicit Erdős–Rényi graphs and the coupon exploration run on them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::chain::{ChainState, Trajectory};
use crate::error::{Error, Result};
use crate::params::ModelParams;

pub type Vertex = u32;

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<Vertex>>,
}

impl Graph {
    pub fn empty(n_vertices: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n_vertices],
        }
    }

    /// Builds a graph from an edge list; duplicates collapse, self-loops are rejected.
    pub fn from_edges(n_vertices: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut g = Graph::empty(n_vertices);
        for &(u, v) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            if u as usize >= n_vertices || v as usize >= n_vertices {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n_vertices} vertices")));
            }
            g.adjacency[u as usize].push(v);
            g.adjacency[v as usize].push(u);
        }
        for list in &mut g.adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v as usize > u).map(move |&v| (u as Vertex, v)))
    }

    /// One `u v` line per edge, 0-indexed, `u < v`.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Samples `G(N, λ/N)` with geometric skips over the `N(N-1)/2` vertex pairs,
/// in expected time `O(N + λN)`.
pub fn generate_er<R: Rng + ?Sized>(n_vertices: usize, lambda: f64, rng: &mut R) -> Result<Graph> {
    if !(lambda >= 0.0) || lambda > n_vertices as f64 {
        return Err(Error::invalid(format!("lambda={lambda} must lie in [0, N={n_vertices}]")));
    }
    if n_vertices > Vertex::MAX as usize {
        return Err(Error::invalid(format!("{n_vertices} vertices exceed the u32 vertex range")));
    }
    let mut g = Graph::empty(n_vertices);
    if n_vertices < 2 || lambda == 0.0 {
        return Ok(g);
    }
    let p = lambda / n_vertices as f64;
    if p >= 1.0 {
        for u in 0..n_vertices {
            g.adjacency[u] = (0..n_vertices as Vertex).filter(|&v| v as usize != u).collect();
        }
        return Ok(g);
    }
    // Pairs (w, v) with w < v enumerated row by row.
    let log_q = (1.0 - p).ln();
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n_vertices {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor();
        w += 1 + if skip.is_finite() { skip.min(i64::MAX as f64 / 4.0) as i64 } else { i64::MAX / 4 };
        while w >= v as i64 && v < n_vertices {
            w -= v as i64;
            v += 1;
        }
        if v < n_vertices {
            g.adjacency[w as usize].push(v as Vertex);
            g.adjacency[v].push(w as Vertex);
        }
    }
    for list in &mut g.adjacency {
        list.sort_unstable();
    }
    Ok(g)
}

/// Status of a vertex during exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Unexplored,
    NamedNoCoupon,
    CouponHolder,
    Interviewed,
}

/// Set of vertices with O(1) insert, remove and uniform draw.
#[derive(Debug, Clone)]
struct VertexPool {
    items: Vec<Vertex>,
    slot: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl VertexPool {
    fn new(n: usize) -> Self {
        VertexPool {
            items: Vec::new(),
            slot: vec![ABSENT; n],
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn insert(&mut self, v: Vertex) {
        debug_assert_eq!(self.slot[v as usize], ABSENT);
        self.slot[v as usize] = self.items.len() as u32;
        self.items.push(v);
    }

    fn remove(&mut self, v: Vertex) {
        let i = self.slot[v as usize] as usize;
        self.items.swap_remove(i);
        if let Some(&moved) = self.items.get(i) {
            self.slot[moved as usize] = i as u32;
        }
        self.slot[v as usize] = ABSENT;
    }

    fn take_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Vertex> {
        if self.items.is_empty() {
            return None;
        }
        let v = self.items[rng.random_range(0..self.items.len())];
        self.remove(v);
        Some(v)
    }
}

/// Mutable exploration of one graph.
#[derive(Debug, Clone)]
pub struct Exploration<'g> {
    graph: &'g Graph,
    coupons: usize,
    labels: Vec<Label>,
    unexplored: VertexPool,
    named: VertexPool,
    holders: VertexPool,
    interview_order: Vec<Vertex>,
    referrals: Vec<(Vertex, Vertex)>,
    seeds: Vec<Vertex>,
    eligible: Vec<Vertex>,
}

impl<'g> Exploration<'g> {
    /// Starts from `params.initial_holders` uniform coupon holders and
    /// `params.initial_named` uniform named vertices.
    pub fn new<R: Rng + ?Sized>(graph: &'g Graph, params: &ModelParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        if params.population != graph.n_vertices() {
            return Err(Error::invalid(format!(
                "params.N={} but the graph has {} vertices",
                params.population,
                graph.n_vertices()
            )));
        }
        let picked = index::sample(rng, graph.n_vertices(), params.initial_holders + params.initial_named);
        let picked: Vec<Vertex> = picked.iter().map(|i| i as Vertex).collect();
        let (holders, named) = picked.split_at(params.initial_holders);
        Self::with_start(graph, params.coupons, holders, named)
    }

    /// Starts from explicit holder and named vertex sets.
    pub fn with_start(graph: &'g Graph, coupons: usize, holders: &[Vertex], named: &[Vertex]) -> Result<Self> {
        let n = graph.n_vertices();
        let mut labels = vec![Label::Unexplored; n];
        for (&v, label) in holders
            .iter()
            .map(|v| (v, Label::CouponHolder))
            .chain(named.iter().map(|v| (v, Label::NamedNoCoupon)))
        {
            if v as usize >= n || labels[v as usize] != Label::Unexplored {
                return Err(Error::invalid(format!("start vertex {v} out of range or repeated")));
            }
            labels[v as usize] = label;
        }
        let mut state = Exploration {
            graph,
            coupons,
            labels,
            unexplored: VertexPool::new(n),
            named: VertexPool::new(n),
            holders: VertexPool::new(n),
            interview_order: Vec::new(),
            referrals: Vec::new(),
            seeds: holders.to_vec(),
            eligible: Vec::new(),
        };
        for v in 0..n as Vertex {
            match state.labels[v as usize] {
                Label::Unexplored => state.unexplored.insert(v),
                Label::NamedNoCoupon => state.named.insert(v),
                Label::CouponHolder => state.holders.insert(v),
                Label::Interviewed => unreachable!(),
            }
        }
        Ok(state)
    }

    pub fn state(&self) -> ChainState {
        ChainState::new(self.interview_order.len(), self.holders.len(), self.named.len())
    }

    pub fn unexplored_count(&self) -> usize {
        self.unexplored.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn interview_order(&self) -> &[Vertex] {
        &self.interview_order
    }

    /// `(giver, recipient)` coupon edges.
    pub fn referrals(&self) -> &[(Vertex, Vertex)] {
        &self.referrals
    }

    /// Initial holders and every fresh seed, in order.
    pub fn seeds(&self) -> &[Vertex] {
        &self.seeds
    }

    pub fn is_finished(&self) -> bool {
        self.interview_order.len() == self.graph.n_vertices()
    }

    /// Performs one interview; returns whether it was a fresh seed, or `None`
    /// once every vertex has been interviewed.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<bool> {
        let (v, reseed) = if let Some(v) = self.holders.take_uniform(rng) {
            (v, false)
        } else if let Some(v) = self.unexplored.take_uniform(rng) {
            (v, true)
        } else {
            (self.named.take_uniform(rng)?, true)
        };
        if reseed {
            self.seeds.push(v);
        }
        self.labels[v as usize] = Label::Interviewed;
        self.interview_order.push(v);

        self.eligible.clear();
        self.eligible.extend(
            self.graph
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| matches!(self.labels[w as usize], Label::Unexplored | Label::NamedNoCoupon)),
        );
        let given = self.coupons.min(self.eligible.len());
        // Partial Fisher-Yates: the first `given` entries become recipients.
        for i in 0..given {
            let j = rng.random_range(i..self.eligible.len());
            self.eligible.swap(i, j);
        }
        for i in 0..self.eligible.len() {
            let w = self.eligible[i];
            let label = self.labels[w as usize];
            if i < given {
                match label {
                    Label::Unexplored => self.unexplored.remove(w),
                    _ => self.named.remove(w),
                }
                self.holders.insert(w);
                self.labels[w as usize] = Label::CouponHolder;
                self.referrals.push((v, w));
            } else if label == Label::Unexplored {
                self.unexplored.remove(w);
                self.named.insert(w);
                self.labels[w as usize] = Label::NamedNoCoupon;
            }
        }
        Some(reseed)
    }
}

/// Explores until `horizon` interviews have been made (or the graph is exhausted).
pub fn explore_to<R: Rng + ?Sized>(
    graph: &Graph,
    params: &ModelParams,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut run = Exploration::new(graph, params, rng)?;
    let mut states = vec![run.state()];
    let mut reseeds = Vec::new();
    while states.len() <= horizon {
        match run.step(rng) {
            Some(reseed) => {
                let s = run.state();
                if reseed {
                    reseeds.push(s.n);
                }
                states.push(s);
            }
            None => break,
        }
    }
    Ok(Trajectory::from_states(*params, states, reseeds))
}

/// Explores the whole graph.
pub fn explore<R: Rng + ?Sized>(graph: &Graph, params: &ModelParams, rng: &mut R) -> Result<Trajectory> {
    explore_to(graph, params, graph.n_vertices(), rng)
}
