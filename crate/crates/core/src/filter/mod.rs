//! Graph-based dialogue filtering: dual-threshold similarity graph,
//! community detection, and proportional sampling.
//!
//! Two dialogues are linked when BOTH their user-side and agent-side
//! representations are strictly more similar than the respective threshold;
//! communities over that graph group near-duplicates, and sampling
//! ceil(rho * |C|) from each community caps redundancy while keeping every
//! community represented.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::{cosine, EmbeddingProvider, EmbeddingVector};
use crate::schema::{Role, SessionQuadruplet};
use crate::util::derive_seed;

pub const DEFAULT_TAU_U: f64 = 0.85;
pub const DEFAULT_TAU_A: f64 = 0.85;
pub const DEFAULT_RHO: f64 = 0.6;

/// Side-aggregated embedding of one dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueRepresentation {
    pub dialogue_id: String,
    pub u_vec: EmbeddingVector,
    pub a_vec: EmbeddingVector,
}

/// Aggregates a dialogue into per-side vectors: the normalized mean of the
/// turn embeddings of each role.
pub fn aggregate_representations(
    d: &SessionQuadruplet,
    provider: &dyn EmbeddingProvider,
) -> Result<DialogueRepresentation> {
    let mut user_vecs: Vec<EmbeddingVector> = Vec::new();
    let mut agent_vecs: Vec<EmbeddingVector> = Vec::new();
    for turn in &d.history {
        let vec = provider.embed(&turn.text)?;
        match turn.role {
            Role::User => user_vecs.push(vec),
            Role::Agent => agent_vecs.push(vec),
        }
    }
    let u_vec = EmbeddingVector::normalized_mean(&user_vecs).ok_or_else(|| {
        Error::Precondition(format!("dialogue {} has no user turns", d.dialogue_id))
    })?;
    let a_vec = EmbeddingVector::normalized_mean(&agent_vecs).ok_or_else(|| {
        Error::Precondition(format!("dialogue {} has no agent turns", d.dialogue_id))
    })?;
    Ok(DialogueRepresentation {
        dialogue_id: d.dialogue_id.clone(),
        u_vec,
        a_vec,
    })
}

/// Undirected similarity graph over dialogues. Edges hold node indices with
/// `i < j`; the node list fixes the index → dialogue_id mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub tau_u: f64,
    pub tau_a: f64,
}

impl SimilarityGraph {
    pub fn edge_ids(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(i, j)| (self.nodes[i].as_str(), self.nodes[j].as_str()))
            .collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }
}

/// Builds the dual-threshold graph. An edge exists iff the user-side AND the
/// agent-side similarity each STRICTLY exceed their threshold; a similarity
/// exactly at the threshold never links.
pub fn build_similarity_graph(
    reps: &[DialogueRepresentation],
    tau_u: f64,
    tau_a: f64,
) -> Result<SimilarityGraph> {
    for (name, tau) in [("tau_u", tau_u), ("tau_a", tau_a)] {
        if !(-1.0 < tau && tau < 1.0) {
            return Err(Error::Precondition(format!(
                "{name} must lie in (-1, 1), got {tau}"
            )));
        }
    }
    let n = reps.len();
    let mut edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let reps = &reps;
            (i + 1..n).filter_map(move |j| {
                let sim_u = f64::from(cosine(&reps[i].u_vec, &reps[j].u_vec));
                let sim_a = f64::from(cosine(&reps[i].a_vec, &reps[j].a_vec));
                (sim_u > tau_u && sim_a > tau_a).then_some((i, j))
            })
        })
        .collect();
    edges.sort_unstable();
    Ok(SimilarityGraph {
        nodes: reps.iter().map(|r| r.dialogue_id.clone()).collect(),
        edges,
        tau_u,
        tau_a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunityMethod {
    ConnectedComponents,
    LabelPropagation,
}

impl std::fmt::Display for CommunityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CommunityMethod::ConnectedComponents => "components",
            CommunityMethod::LabelPropagation => "label_propagation",
        })
    }
}

impl std::str::FromStr for CommunityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<CommunityMethod> {
        match s {
            "components" | "connected_components" => Ok(CommunityMethod::ConnectedComponents),
            "label_propagation" | "lpa" => Ok(CommunityMethod::LabelPropagation),
            other => Err(Error::Config(format!(
                "unknown community method `{other}` (expected components|label_propagation)"
            ))),
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn components(g: &SimilarityGraph) -> Vec<usize> {
    let mut uf = UnionFind::new(g.nodes.len());
    for &(i, j) in &g.edges {
        uf.union(i, j);
    }
    (0..g.nodes.len()).map(|i| uf.find(i)).collect()
}

/// Synchronous-sweep label propagation. Nodes are visited in a seeded order;
/// each adopts the most frequent label among its neighbors, smallest label on
/// ties. Converges (or stops after a bounded number of sweeps) to a
/// seed-deterministic labeling.
fn label_propagation(g: &SimilarityGraph, seed: u64) -> Vec<usize> {
    let n = g.nodes.len();
    let adj = g.adjacency();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if n == 0 {
        Vec::new()
    } else {
        rand::seq::index::sample(&mut rng, n, n).into_vec()
    };
    for _ in 0..100 {
        let mut changed = false;
        for &node in &order {
            if adj[node].is_empty() {
                continue;
            }
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for &nb in &adj[node] {
                *counts.entry(labels[nb]).or_insert(0) += 1;
            }
            // Highest count wins; BTreeMap order makes the smallest label the
            // tiebreaker.
            let best = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(label, _)| *label)
                .expect("non-empty neighbor list");
            if labels[node] != best {
                labels[node] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Partitions the graph's nodes into communities.
///
/// Output is canonical: members sorted within each community, communities
/// sorted by their first member, every node in exactly one community.
pub fn detect_communities(
    g: &SimilarityGraph,
    method: CommunityMethod,
    seed: u64,
) -> Vec<Vec<String>> {
    let labels = match method {
        CommunityMethod::ConnectedComponents => components(g),
        CommunityMethod::LabelPropagation => label_propagation(g, seed),
    };
    let mut grouped: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (node, label) in labels.iter().enumerate() {
        grouped
            .entry(*label)
            .or_default()
            .push(g.nodes[node].clone());
    }
    let mut communities: Vec<Vec<String>> = grouped.into_values().collect();
    for c in &mut communities {
        c.sort_unstable();
    }
    communities.sort();
    communities
}

/// Retains ceil(rho * |C|) members of each community, sampled uniformly
/// without replacement. Sampling is content-seeded per community, so the
/// result does not depend on community order.
pub fn proportional_sample(
    communities: &[Vec<String>],
    rho: f64,
    seed: u64,
) -> Result<Vec<String>> {
    if !(0.0 < rho && rho <= 1.0) {
        return Err(Error::Precondition(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    let mut retained: Vec<String> = Vec::new();
    for community in communities {
        if community.is_empty() {
            continue;
        }
        let quota = ((rho * community.len() as f64).ceil() as usize)
            .clamp(1, community.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &community[0]));
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, community.len(), quota).into_vec();
        picked.sort_unstable();
        retained.extend(picked.into_iter().map(|i| community[i].clone()));
    }
    Ok(retained)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterOptions {
    pub tau_u: f64,
    pub tau_a: f64,
    pub rho: f64,
    pub method: CommunityMethod,
    pub seed: u64,
}

impl Default for FilterOptions {
    fn default() -> FilterOptions {
        FilterOptions {
            tau_u: DEFAULT_TAU_U,
            tau_a: DEFAULT_TAU_A,
            rho: DEFAULT_RHO,
            method: CommunityMethod::ConnectedComponents,
            seed: 0,
        }
    }
}

/// Audit record for one filtering run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub edges: usize,
    /// Community sizes in canonical partition order.
    pub community_sizes: Vec<usize>,
    pub tau_u: f64,
    pub tau_a: f64,
    pub rho: f64,
    pub method: CommunityMethod,
    pub seed: u64,
}

/// Full phase: aggregate, link, partition, sample. Returns the retained
/// sessions in their input order plus the audit report.
pub fn run_filter_phase(
    sessions: &[SessionQuadruplet],
    provider: &dyn EmbeddingProvider,
    opts: &FilterOptions,
) -> Result<(Vec<SessionQuadruplet>, FilterReport)> {
    let reps = sessions
        .iter()
        .map(|s| aggregate_representations(s, provider))
        .collect::<Result<Vec<_>>>()?;
    let graph = build_similarity_graph(&reps, opts.tau_u, opts.tau_a)?;
    let communities = detect_communities(&graph, opts.method, opts.seed);
    let retained_ids = proportional_sample(&communities, opts.rho, opts.seed)?;
    let retained_set: std::collections::BTreeSet<&str> =
        retained_ids.iter().map(String::as_str).collect();
    let retained: Vec<SessionQuadruplet> = sessions
        .iter()
        .filter(|s| retained_set.contains(s.dialogue_id.as_str()))
        .cloned()
        .collect();
    let report = FilterReport {
        input: sessions.len(),
        retained: retained.len(),
        edges: graph.edges.len(),
        community_sizes: communities.iter().map(Vec::len).collect(),
        tau_u: opts.tau_u,
        tau_a: opts.tau_a,
        rho: opts.rho,
        method: opts.method,
        seed: opts.seed,
    };
    Ok((retained, report))
}
