//! Response-rate estimation.
//!
//! Each of the advertiser, publisher and user dimensions is a tree whose
//! nodes carry impression and action counts. Raw rates are aggregated bottom
//! up, then shrunk top down towards the parent's smoothed rate with a prior of
//! strength `k`. A request is scored by averaging the log-odds of its three
//! leaf rates.
//!
//! The noisy oracle estimator perturbs the simulator's hidden truth and exists
//! only for controlled experiments.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{AdRequest, FeaturePath};
use crate::error::{Error, Result};

pub const DEFAULT_PRIOR_STRENGTH: f64 = 100.0;
pub const RATE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    Hierarchical {
        #[serde(default = "default_prior")]
        prior_strength: f64,
    },
    NoisyOracle {
        #[serde(default)]
        sigma: f64,
        #[serde(default = "default_bias")]
        bias: f64,
    },
}

fn default_prior() -> f64 {
    DEFAULT_PRIOR_STRENGTH
}

fn default_bias() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    pub parent: Option<usize>,
    pub depth: usize,
    children: Vec<(u32, usize)>,
    /// Counts recorded directly on this node (leaf data).
    own_impressions: u64,
    own_actions: u64,
    pub impressions: u64,
    pub actions: u64,
    pub raw_rate: f64,
    pub smoothed_rate: f64,
}

impl Node {
    fn new(id: u32, parent: Option<usize>, depth: usize) -> Self {
        Self {
            id,
            parent,
            depth,
            children: Vec::new(),
            own_impressions: 0,
            own_actions: 0,
            impressions: 0,
            actions: 0,
            raw_rate: 0.0,
            smoothed_rate: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Count tree for one hierarchy dimension. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyTree {
    nodes: Vec<Node>,
}

impl Default for HierarchyTree {
    fn default() -> Self {
        Self::new()
    }
}

impl HierarchyTree {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::new(0, None, 0)],
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    fn child(&self, node: usize, id: u32) -> Option<usize> {
        let c = &self.nodes[node].children;
        c.binary_search_by_key(&id, |&(cid, _)| cid)
            .ok()
            .map(|i| c[i].1)
    }

    fn ensure_path(&mut self, path: &FeaturePath) -> usize {
        let mut cur = 0;
        for (depth, &id) in path.as_slice().iter().enumerate() {
            cur = match self.child(cur, id) {
                Some(n) => n,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node::new(id, Some(cur), depth + 1));
                    let c = &mut self.nodes[cur].children;
                    let pos = c.partition_point(|&(cid, _)| cid < id);
                    c.insert(pos, (id, idx));
                    idx
                }
            };
        }
        cur
    }

    /// Adds counts at `path`, creating nodes as needed.
    pub fn record(&mut self, path: &FeaturePath, impressions: u64, actions: u64) -> Result<()> {
        if actions > impressions {
            return Err(Error::invalid(format!(
                "{path}: {actions} actions exceed {impressions} impressions"
            )));
        }
        let n = self.ensure_path(path);
        self.nodes[n].own_impressions += impressions;
        self.nodes[n].own_actions += actions;
        Ok(())
    }

    /// Sets every node's counts to its own plus its descendants' counts, and
    /// its raw rate to `actions / impressions` (0 without impressions).
    pub fn aggregate_raw_rates(&mut self) {
        // children are always pushed after their parent
        for n in &mut self.nodes {
            n.impressions = n.own_impressions;
            n.actions = n.own_actions;
        }
        for i in (1..self.nodes.len()).rev() {
            let (imps, acts) = (self.nodes[i].impressions, self.nodes[i].actions);
            let p = self.nodes[i].parent.expect("non-root has a parent");
            self.nodes[p].impressions += imps;
            self.nodes[p].actions += acts;
        }
        for n in &mut self.nodes {
            n.raw_rate = if n.impressions == 0 {
                0.0
            } else {
                n.actions as f64 / n.impressions as f64
            };
        }
    }

    /// `smoothed = (actions + k * parent_smoothed) / (impressions + k)`, top
    /// down; the root keeps its raw rate.
    pub fn smooth_rates(&mut self, prior_strength: f64) {
        let k = prior_strength.max(0.0);
        self.nodes[0].smoothed_rate = self.nodes[0].raw_rate;
        for i in 1..self.nodes.len() {
            let p = self.nodes[i].parent.expect("non-root has a parent");
            let parent = self.nodes[p].smoothed_rate;
            let n = &mut self.nodes[i];
            n.smoothed_rate = if k == 0.0 {
                n.raw_rate
            } else {
                (n.actions as f64 + k * parent) / (n.impressions as f64 + k)
            };
        }
    }

    /// Deepest node on `path` with at least one impression (the root otherwise).
    pub fn resolve(&self, path: &FeaturePath) -> &Node {
        let mut cur = 0;
        let mut best = 0;
        for &id in path.as_slice() {
            match self.child(cur, id) {
                Some(n) => {
                    cur = n;
                    if self.nodes[n].impressions > 0 {
                        best = n;
                    }
                }
                None => break,
            }
        }
        &self.nodes[best]
    }

    pub fn smoothed_rate(&self, path: &FeaturePath) -> f64 {
        self.resolve(path).smoothed_rate
    }

    fn path_of(&self, mut idx: usize) -> FeaturePath {
        let mut ids = Vec::new();
        while let Some(p) = self.nodes[idx].parent {
            ids.push(self.nodes[idx].id);
            idx = p;
        }
        ids.reverse();
        FeaturePath::new(&ids).expect("tree depth is bounded by path depth")
    }

    /// Reads `path impressions actions` lines; `#` starts a comment.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut tree = Self::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<tree>", e))?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [path, imps, acts] = fields[..] else {
                return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
            };
            let path: FeaturePath = path.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let count = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| parse_err(format!("count {s:?} is not a nonnegative integer")))
            };
            tree.record(&path, count(imps)?, count(acts)?)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        tree.aggregate_raw_rates();
        Ok(tree)
    }

    /// Writes the recorded (own) counts, one node per line, in path order.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut rows: Vec<(FeaturePath, u64, u64)> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.own_impressions > 0 || n.own_actions > 0)
            .map(|(i, n)| (self.path_of(i), n.own_impressions, n.own_actions))
            .collect();
        rows.sort();
        for (p, imps, acts) in rows {
            writeln!(out, "{p} {imps} {acts}").map_err(|e| Error::io("<tree>", e))?;
        }
        Ok(())
    }
}

/// Averages log-odds of the inputs and maps back through the logistic.
pub fn combine_rates(rates: &[f64]) -> f64 {
    if rates.is_empty() {
        return RATE_FLOOR;
    }
    let clamp = |r: f64| r.clamp(RATE_FLOOR, 1.0 - RATE_FLOOR);
    let mean_logit = rates
        .iter()
        .map(|&r| {
            let r = clamp(r);
            (r / (1.0 - r)).ln()
        })
        .sum::<f64>()
        / rates.len() as f64;
    clamp(1.0 / (1.0 + (-mean_logit).exp()))
}

/// Smoothed trees for the three dimensions of a request.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeSet {
    pub advertiser: HierarchyTree,
    pub publisher: HierarchyTree,
    pub user: HierarchyTree,
}

impl TreeSet {
    /// Aggregates and smooths all three trees.
    pub fn prepare(&mut self, prior_strength: f64) {
        for t in [&mut self.advertiser, &mut self.publisher, &mut self.user] {
            t.aggregate_raw_rates();
            t.smooth_rates(prior_strength);
        }
    }

    pub fn predict_rate(&self, request: &AdRequest) -> f64 {
        combine_rates(&[
            self.advertiser.smoothed_rate(&request.advertiser),
            self.publisher.smoothed_rate(&request.publisher),
            self.user.smoothed_rate(&request.user),
        ])
    }
}

/// Leaf counts accumulated from served impressions, rebuilt into a
/// [`TreeSet`] on demand.
#[derive(Clone, Debug, Default)]
pub struct TreeCounts {
    advertiser: HashMap<FeaturePath, (u64, u64)>,
    publisher: HashMap<FeaturePath, (u64, u64)>,
    user: HashMap<FeaturePath, (u64, u64)>,
}

impl TreeCounts {
    pub fn add_impression(&mut self, request: &AdRequest) {
        self.advertiser.entry(request.advertiser).or_default().0 += 1;
        self.publisher.entry(request.publisher).or_default().0 += 1;
        self.user.entry(request.user).or_default().0 += 1;
    }

    pub fn add_action(&mut self, request: &AdRequest) {
        self.advertiser.entry(request.advertiser).or_default().1 += 1;
        self.publisher.entry(request.publisher).or_default().1 += 1;
        self.user.entry(request.user).or_default().1 += 1;
    }

    pub fn build(&self, prior_strength: f64) -> TreeSet {
        let build = |m: &HashMap<FeaturePath, (u64, u64)>| {
            let mut rows: Vec<_> = m.iter().collect();
            rows.sort();
            let mut t = HierarchyTree::new();
            for (p, &(imps, acts)) in rows {
                t.record(p, imps, acts.min(imps)).expect("clamped counts");
            }
            t
        };
        let mut set = TreeSet {
            advertiser: build(&self.advertiser),
            publisher: build(&self.publisher),
            user: build(&self.user),
        };
        set.prepare(prior_strength);
        set
    }
}

/// `clamp(bias * truth * exp(sigma * z), 1e-6, 1)` for a standard normal `z`.
pub fn noisy_oracle_predict<R: Rng + ?Sized>(truth: f64, sigma: f64, bias: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    noisy_oracle_with_draw(truth, sigma, bias, z)
}

/// [`noisy_oracle_predict`] with the normal draw supplied.
pub fn noisy_oracle_with_draw(truth: f64, sigma: f64, bias: f64, z: f64) -> f64 {
    let noise = if sigma == 0.0 { 1.0 } else { (sigma * z).exp() };
    (bias * truth * noise).clamp(RATE_FLOOR, 1.0)
}
