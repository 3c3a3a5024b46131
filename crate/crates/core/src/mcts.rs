//! Plain UCT tree search over the masked mission environment.
//!
//! Each decision builds a fresh tree. Leaves are valued by uniform-random
//! masked rollouts cut off at a fixed depth; there is no value bootstrap.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, MissionState};

#[derive(Debug, Error, PartialEq)]
pub enum MctsError {
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("no feasible action in the root state")]
    NoFeasibleAction,
    #[error("node {0} has no untried actions")]
    FullyExpanded(usize),
}

pub type Result<T> = std::result::Result<T, MctsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub simulations_per_step: usize,
    pub c_uct: f64,
    pub rollout_depth: usize,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            simulations_per_step: 200,
            c_uct: 1.5,
            rollout_depth: 15,
            seed: 0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations_per_step == 0 {
            return Err(MctsError::InvalidConfig("simulations_per_step must be >= 1"));
        }
        if self.rollout_depth == 0 {
            return Err(MctsError::InvalidConfig("rollout_depth must be >= 1"));
        }
        if !(self.c_uct >= 0.0 && self.c_uct.is_finite()) {
            return Err(MctsError::InvalidConfig("c_uct must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `q + c * sqrt(ln(n_s) / (1 + n_sa))`.
pub fn uct_score(q: f64, n_sa: u64, n_s: u64, c: f64) -> f64 {
    q + c * ((n_s as f64).ln() / (1.0 + n_sa as f64)).sqrt()
}

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Edge {
    pub action: Action,
    pub child: NodeId,
    /// N(s,a)
    pub visits: u64,
    /// Q(s,a), mean of all returns backed up through this edge.
    pub q: f64,
}

#[derive(Debug, Clone)]
pub struct SearchNode {
    pub state: MissionState,
    /// N(s): one creation visit plus one per backup through an outgoing edge.
    pub visits: u64,
    pub edges: Vec<Edge>,
    pub untried: Vec<Action>,
    pub terminal: bool,
    /// Sum of rewards from the tree root to this node.
    pub prefix_reward: f64,
}

impl SearchNode {
    fn new(state: MissionState, prefix_reward: f64, terminal: bool) -> Self {
        let untried = if terminal {
            Vec::new()
        } else {
            feasible_actions(&state)
        };
        Self {
            state,
            visits: 1,
            edges: Vec::new(),
            untried,
            terminal,
            prefix_reward,
        }
    }

    pub fn edge(&self, action: Action) -> Option<&Edge> {
        self.edges.iter().find(|e| e.action == action)
    }
}

fn feasible_actions(state: &MissionState) -> Vec<Action> {
    let mut mask = Vec::with_capacity(state.n_actions());
    state.fill_mask(&mut mask);
    let n = state.n_debris();
    mask.iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(i, _)| if i == n { Action::Refuel } else { Action::Rendezvous(i) })
        .collect()
}

/// Result of a descent: the traversed edges and the node where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub path: Vec<(NodeId, Action)>,
    pub leaf: NodeId,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    pub config: MctsConfig,
}

pub const ROOT: NodeId = 0;

impl SearchTree {
    pub fn new(root: MissionState, config: MctsConfig) -> Self {
        let (terminal, _) = crate::env::is_terminal(&root);
        Self {
            nodes: vec![SearchNode::new(root, 0.0, terminal)],
            config,
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[ROOT]
    }

    fn n_debris(&self) -> usize {
        self.root().state.n_debris()
    }

    /// Descends by maximum UCT score until a node with untried actions or a
    /// terminal node. Ties go to the lowest action index.
    pub fn select(&self) -> Selection {
        let n = self.n_debris();
        let mut path = Vec::new();
        let mut id = ROOT;
        loop {
            let node = &self.nodes[id];
            if node.terminal || !node.untried.is_empty() || node.edges.is_empty() {
                return Selection { path, leaf: id };
            }
            let mut best: Option<(&Edge, f64)> = None;
            for e in &node.edges {
                let s = uct_score(e.q, e.visits, node.visits, self.config.c_uct);
                best = match best {
                    None => Some((e, s)),
                    Some((b, bs)) => {
                        if s > bs || (s == bs && e.action.index(n) < b.action.index(n)) {
                            Some((e, s))
                        } else {
                            Some((b, bs))
                        }
                    }
                };
            }
            let (edge, _) = best.expect("non-empty edge list");
            path.push((id, edge.action));
            id = edge.child;
        }
    }

    /// Expands one uniformly chosen untried action of `id` and returns the
    /// new child.
    pub fn expand<R: Rng + ?Sized>(&mut self, id: NodeId, rng: &mut R) -> Result<NodeId> {
        let node = &mut self.nodes[id];
        if node.untried.is_empty() {
            return Err(MctsError::FullyExpanded(id));
        }
        let pick = rng.gen_range(0..node.untried.len());
        let action = node.untried.swap_remove(pick);
        let mut state = node.state.clone();
        let prefix = node.prefix_reward;
        let t = state
            .apply(action)
            .expect("untried actions are feasible at their node");
        let child = self.nodes.len();
        self.nodes
            .push(SearchNode::new(state, prefix + t.reward, t.terminated));
        self.nodes[id].edges.push(Edge {
            action,
            child,
            visits: 0,
            q: 0.0,
        });
        Ok(child)
    }

    /// Adds `value` to every edge on `path` as a running mean and counts one
    /// visit for each node on it.
    pub fn backpropagate(&mut self, path: &[(NodeId, Action)], value: f64) {
        for &(id, action) in path {
            let node = &mut self.nodes[id];
            node.visits += 1;
            let edge = node
                .edges
                .iter_mut()
                .find(|e| e.action == action)
                .expect("path edges exist in the tree");
            edge.visits += 1;
            edge.q += (value - edge.q) / edge.visits as f64;
        }
    }

    /// One select / expand / rollout / backpropagate iteration.
    pub fn simulate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let Selection { mut path, leaf } = self.select();
        let leaf = if !self.nodes[leaf].untried.is_empty() {
            let child = self.expand(leaf, rng).expect("leaf has untried actions");
            let action = self.nodes[leaf].edges.last().expect("just expanded").action;
            path.push((leaf, action));
            child
        } else {
            leaf
        };
        let node = &self.nodes[leaf];
        let value = node.prefix_reward + rollout(&node.state, self.config.rollout_depth, rng);
        self.backpropagate(&path, value);
    }

    /// Root action with the most visits, ties to the lowest index.
    pub fn best_action(&self) -> Option<Action> {
        let n = self.n_debris();
        self.root()
            .edges
            .iter()
            .max_by(|a, b| {
                a.visits
                    .cmp(&b.visits)
                    .then_with(|| b.action.index(n).cmp(&a.action.index(n)))
            })
            .map(|e| e.action)
    }
}

/// Uniform-random masked playout for at most `depth` steps; returns the
/// undiscounted reward sum.
pub fn rollout<R: Rng + ?Sized>(state: &MissionState, depth: usize, rng: &mut R) -> f64 {
    let (terminal, _) = crate::env::is_terminal(state);
    if terminal || depth == 0 {
        return 0.0;
    }
    let mut s = state.clone();
    let mut mask = Vec::with_capacity(s.n_actions());
    let mut valid = Vec::with_capacity(s.n_actions());
    let n = s.n_debris();
    let mut total = 0.0;
    for _ in 0..depth {
        s.fill_mask(&mut mask);
        valid.clear();
        valid.extend(mask.iter().enumerate().filter(|(_, &ok)| ok).map(|(i, _)| i));
        let Some(&i) = valid.choose(rng) else { break };
        let action = if i == n { Action::Refuel } else { Action::Rendezvous(i) };
        let t = s.apply(action).expect("masked-valid actions apply");
        total += t.reward;
        if t.terminated {
            break;
        }
    }
    total
}

/// Full search from `state`; returns the chosen action and the final tree.
pub fn search(state: &MissionState, config: &MctsConfig) -> Result<(Action, SearchTree)> {
    config.validate()?;
    let mut tree = SearchTree::new(state.clone(), *config);
    let root = tree.root();
    if root.terminal || root.untried.is_empty() {
        return Err(MctsError::NoFeasibleAction);
    }
    if root.untried.len() == 1 {
        let only = root.untried[0];
        return Ok((only, tree));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.simulations_per_step {
        tree.simulate(&mut rng);
    }
    let action = tree.best_action().ok_or(MctsError::NoFeasibleAction)?;
    Ok((action, tree))
}

pub fn plan(state: &MissionState, config: &MctsConfig) -> Result<Action> {
    search(state, config).map(|(a, _)| a)
}
