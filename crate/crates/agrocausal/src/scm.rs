//! Structural causal model over a [`CausalGraph`]: synthetic dataset
//! generation and the ground-truth ATE by interventional simulation.

use crate::dataset::{ColumnData, FieldDataset};
use crate::exec;
use crate::graph::{CausalGraph, GraphError, GraphFile, NodeRole};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("spec/graph mismatch at node `{node}`: {detail}")]
    SpecGraphMismatch { node: String, detail: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unparseable SCM file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    BernoulliSigmoid,
    CategoricalSoftmax { levels: usize },
}

impl Default for Link {
    fn default() -> Self {
        Link::Identity
    }
}

/// Structural equation: linear combination of parents plus Gaussian noise,
/// pushed through the link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equation {
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub link: Link,
}

/// On-disk SCM: equations keyed by node, over an inline or referenced graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmFile {
    #[serde(default)]
    pub graph: Option<GraphFile>,
    /// Relative path used by loaders that resolve the graph separately.
    #[serde(default)]
    pub graph_file: Option<String>,
    pub equations: BTreeMap<String, Equation>,
}

#[derive(Debug, Clone)]
pub struct ScmSpec {
    graph: CausalGraph,
    equations: Vec<Equation>, // indexed by node id
    order: Vec<usize>,
}

impl ScmSpec {
    pub fn new(graph: CausalGraph, equations: &BTreeMap<String, Equation>) -> Result<Self, ScmError> {
        let mut by_id: Vec<Option<Equation>> = vec![None; graph.node_count()];
        for (name, eq) in equations {
            let id = graph.node_id(name)?;
            by_id[id] = Some(eq.clone());
        }
        for id in 0..graph.node_count() {
            let name = graph.name(id).to_string();
            let eq = by_id[id].as_ref().ok_or_else(|| ScmError::SpecGraphMismatch {
                node: name.clone(),
                detail: "no equation".into(),
            })?;
            // parent lists must match graph edges exactly
            let mut graph_parents: Vec<String> = graph
                .parents_of(id)
                .iter()
                .map(|&p| graph.name(p).to_string())
                .collect();
            graph_parents.sort();
            let eq_parents: Vec<String> = eq.coefficients.keys().cloned().collect();
            if graph_parents != eq_parents {
                return Err(ScmError::SpecGraphMismatch {
                    node: name,
                    detail: format!(
                        "equation parents {eq_parents:?} != graph parents {graph_parents:?}"
                    ),
                });
            }
            match graph.role(&name).unwrap() {
                NodeRole::Treatment => {
                    if eq.link != Link::BernoulliSigmoid {
                        return Err(ScmError::SpecGraphMismatch {
                            node: name,
                            detail: "treatment equation must use the bernoulli_sigmoid link".into(),
                        });
                    }
                }
                NodeRole::Outcome => {
                    if eq.link != Link::Identity {
                        return Err(ScmError::SpecGraphMismatch {
                            node: name,
                            detail: "outcome equation must use the identity link".into(),
                        });
                    }
                }
                _ => {}
            }
        }
        let order = graph.topological_order();
        Ok(ScmSpec {
            graph,
            equations: by_id.into_iter().map(Option::unwrap).collect(),
            order,
        })
    }

    pub fn from_file(file: &ScmFile) -> Result<Self, ScmError> {
        let graph_file = file
            .graph
            .clone()
            .ok_or_else(|| ScmError::Parse("SCM file has no inline graph".into()))?;
        Self::new(CausalGraph::from_file(&graph_file)?, &file.equations)
    }

    pub fn from_json(json: &str) -> Result<Self, ScmError> {
        let file: ScmFile = serde_json::from_str(json).map_err(|e| ScmError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    /// The shipped farm SCM over the built-in farm graph.
    pub fn farm_default() -> Self {
        let mut file: ScmFile =
            serde_json::from_str(crate::FARM_SCM_JSON).expect("shipped SCM parses");
        file.graph = Some(CausalGraph::farm_default().to_file());
        Self::from_file(&file).expect("shipped SCM is valid")
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// Value a node contributes to its children's linear terms. Categorical
    /// levels enter centered so coefficients act as per-step effects.
    fn parent_value(&self, id: usize, raw: f64) -> f64 {
        match &self.equations[id].link {
            Link::CategoricalSoftmax { levels } => raw - (*levels as f64 - 1.0) / 2.0,
            _ => raw,
        }
    }

    /// Simulates all nodes in topological order. `force_t` intervenes on the
    /// treatment (severing its parents). Exogenous noise comes from
    /// `noise[node][row]`, so paired interventional runs can share it.
    fn simulate(&self, n: usize, noise: &[Vec<f64>], force_t: Option<u8>) -> Vec<Vec<f64>> {
        let t_node = self.graph.treatment().ok();
        let mut values = vec![vec![0.0; n]; self.graph.node_count()];
        for &id in &self.order {
            let eq = &self.equations[id];
            if Some(id) == t_node {
                if let Some(forced) = force_t {
                    values[id] = vec![forced as f64; n];
                    continue;
                }
            }
            let parents: Vec<(usize, f64)> = eq
                .coefficients
                .iter()
                .map(|(p, &c)| (self.graph.node_id(p).unwrap(), c))
                .collect();
            for row in 0..n {
                let mut lin = eq.intercept;
                for &(pid, c) in &parents {
                    lin += c * self.parent_value(pid, values[pid][row]);
                }
                let u = noise[id][row];
                values[id][row] = match &eq.link {
                    Link::Identity => lin + eq.noise_sd * u,
                    Link::BernoulliSigmoid => {
                        // the exogenous draw doubles as the Bernoulli
                        // threshold via the normal CDF; optional logit noise
                        // comes from a decorrelated re-hash of the same draw
                        let logit_noise = if eq.noise_sd == 0.0 {
                            0.0
                        } else {
                            eq.noise_sd * rehash_normal(u)
                        };
                        let p = 1.0 / (1.0 + (-(lin + logit_noise)).exp());
                        (normal_cdf(u) < p) as u8 as f64
                    }
                    Link::CategoricalSoftmax { levels } => {
                        let k = *levels;
                        let logits: Vec<f64> = (0..k)
                            .map(|j| lin * (j as f64 / (k as f64 - 1.0).max(1.0) - 0.5))
                            .collect();
                        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                        let total: f64 = weights.iter().sum();
                        let mut u01 = normal_cdf(u) * total;
                        let mut level = k - 1;
                        for (j, w) in weights.iter().enumerate() {
                            if u01 < *w {
                                level = j;
                                break;
                            }
                            u01 -= w;
                        }
                        level as f64
                    }
                };
            }
        }
        values
    }

    fn draw_noise(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..self.graph.node_count())
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(exec::derive_seed(seed, id as u64));
                (0..n).map(|_| rng.sample(StandardNormal)).collect()
            })
            .collect()
    }

    /// Samples an observational dataset. Treatment comes out binary, the
    /// outcome real, categorical nodes as labeled levels.
    pub fn sample(&self, n: usize, seed: u64) -> Result<FieldDataset, ScmError> {
        let noise = self.draw_noise(n, seed);
        let values = self.simulate(n, &noise, None);

        let mut ds = FieldDataset::new((0..n).map(|i| format!("sim_{i:06}")).collect());
        for &id in &self.order {
            let name = self.graph.name(id).to_string();
            let col = match (&self.equations[id].link, self.graph.role(&name).unwrap()) {
                (_, NodeRole::Treatment) => {
                    ColumnData::Binary(values[id].iter().map(|&v| v as u8).collect())
                }
                (Link::CategoricalSoftmax { .. }, _) => ColumnData::Categorical(
                    values[id].iter().map(|&v| format!("v{:02}", v as usize)).collect(),
                ),
                _ => ColumnData::Real(values[id].clone()),
            };
            ds.set_column(&name, col);
        }
        let t_name = self.graph.name(self.graph.treatment()?).to_string();
        let y_name = self.graph.name(self.graph.outcome()?).to_string();
        ds.treatment_column = Some(t_name);
        ds.outcome_column = Some(y_name);
        Ok(ds)
    }

    /// Interventional ATE by paired simulation with shared exogenous noise.
    /// Returns the Monte-Carlo mean difference and its standard error.
    pub fn true_ate(&self, n_mc: usize, seed: u64) -> Result<(f64, f64), ScmError> {
        let y = self.graph.outcome()?;
        self.graph.treatment()?;
        let noise = self.draw_noise(n_mc, seed);
        let y1 = &self.simulate(n_mc, &noise, Some(1))[y];
        let y0 = &self.simulate(n_mc, &noise, Some(0))[y];
        let diffs: Vec<f64> = y1.iter().zip(y0).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / n_mc as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_mc as f64 - 1.0);
        Ok((mean, (var / n_mc as f64).sqrt()))
    }
}

/// Deterministic standard-normal re-hash of an exogenous draw.
fn rehash_normal(u: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(u.to_bits());
    rng.sample(StandardNormal)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2))
}
