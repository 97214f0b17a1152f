//! The five survival classifiers: collaboration-only GNN, comorbidity-only,
//! combined, attribute-only and topology-only.
//!
//! GNN trunks stack four GraphSAGE layers, concatenate their outputs
//! (4 × hidden) and max-pool over nodes into a graph embedding; a single
//! sigmoid unit produces the survival probability.

mod train;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{encode_features, CollabGraph, SimplifiedGraph, SimplifiedKind, FEATURE_DIM};
use crate::nn::{
    dense_affine, dense_backward, maxpool_backward, maxpool_readout, sage_backward,
    sage_forward_cached, sigmoid, AdjacencyList, Checkpoint, Matrix, MaxPool, ParamSet, SageCache,
    SageLayerParams,
};
use crate::synth::taxonomy::N_COMORBIDITIES;

pub use train::{
    class_weights, stratified_holdout, train, TrainConfig, TrainHistory, TrainedModel,
};

pub const DEFAULT_HIDDEN: usize = 32;
pub const N_SAGE_LAYERS: usize = 4;
/// Width of the structural input of the topology-only model.
pub const TOPO_FEATURE_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    CollabOnly,
    ComorbidityOnly,
    Combined,
    AttrOnly,
    TopoOnly(SimplifiedKind),
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::CollabOnly,
        ModelKind::ComorbidityOnly,
        ModelKind::Combined,
        ModelKind::AttrOnly,
        ModelKind::TopoOnly(SimplifiedKind::AllHcp),
        ModelKind::TopoOnly(SimplifiedKind::AllNote),
    ];

    /// The three models compared per cancer type.
    pub const COMPARED: [ModelKind; 3] = [
        ModelKind::CollabOnly,
        ModelKind::ComorbidityOnly,
        ModelKind::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::CollabOnly => "collab-only",
            ModelKind::ComorbidityOnly => "comorbidity-only",
            ModelKind::Combined => "combined",
            ModelKind::AttrOnly => "attr-only",
            ModelKind::TopoOnly(SimplifiedKind::AllHcp) => "topo-only-hcp",
            ModelKind::TopoOnly(SimplifiedKind::AllNote) => "topo-only-note",
        }
    }

    pub fn has_trunk(self) -> bool {
        matches!(
            self,
            ModelKind::CollabOnly | ModelKind::Combined | ModelKind::TopoOnly(_)
        )
    }

    /// Width of each node feature row this kind consumes.
    pub fn node_input_dim(self) -> usize {
        match self {
            ModelKind::TopoOnly(_) => TOPO_FEATURE_DIM,
            _ => FEATURE_DIM,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::config(
                    "model_kind",
                    format!("unknown `{s}`; expected one of {known:?}"),
                )
            })
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Node features plus in-neighbor lists of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Matrix,
    pub adj: AdjacencyList,
}

impl GraphInput {
    pub fn new(features: Matrix, edges: &[(usize, usize)]) -> Result<Self> {
        let adj = AdjacencyList::from_edges(features.rows(), edges)?;
        Ok(GraphInput { features, adj })
    }

    pub fn from_graph(graph: &CollabGraph) -> Result<Self> {
        Self::new(encode_features(graph)?, &graph.edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// Structural features `[ln(1 + in-degree), ln(1 + out-degree)]` per node.
pub fn degree_features(graph: &SimplifiedGraph) -> Result<GraphInput> {
    let n = graph.num_nodes();
    let adj = AdjacencyList::from_edges(n, &graph.edges)?;
    let out = adj.out_degrees();
    let mut features = Matrix::zeros(n, TOPO_FEATURE_DIM);
    for v in 0..n {
        features.set(v, 0, (adj.in_degree(v) as f64).ln_1p());
        features.set(v, 1, (out[v] as f64).ln_1p());
    }
    Ok(GraphInput { features, adj })
}

/// Model input; each model kind accepts exactly one variant.
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    /// Attributed bipartite graph (collaboration-only and attribute-only).
    Graph(&'a GraphInput),
    /// 39-dim comorbidity indicator vector.
    Comorbidity(&'a [f64]),
    Combined(&'a GraphInput, &'a [f64]),
    /// Degree features of a simplified graph.
    Topo(SimplifiedKind, &'a GraphInput),
}

impl Instance<'_> {
    fn describe(&self) -> String {
        match self {
            Instance::Graph(_) => "graph".into(),
            Instance::Comorbidity(_) => "comorbidity vector".into(),
            Instance::Combined(..) => "graph + comorbidity vector".into(),
            Instance::Topo(k, _) => format!("{} topology", k.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
struct TrunkTrace {
    caches: Vec<SageCache>,
    pool: Option<MaxPool>,
    n: usize,
}

#[derive(Debug, Clone)]
struct ForwardTrace {
    trunk: Option<TrunkTrace>,
    dense_input: Vec<f64>,
    prob: f64,
}

/// Holds the intermediate values of one forward pass until `backward`.
#[derive(Debug, Default)]
pub struct Tape {
    pending: Option<ForwardTrace>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    hidden: usize,
    sage: Vec<SageLayerParams>,
    out_w: Matrix,
    out_b: Matrix,
}

impl Model {
    /// Glorot-uniform initialisation from `seed` (zero for trunk-less models).
    pub fn new(kind: ModelKind, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::config("hidden", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sage = Vec::new();
        if kind.has_trunk() {
            let mut d_in = kind.node_input_dim();
            for _ in 0..N_SAGE_LAYERS {
                sage.push(SageLayerParams::glorot(d_in, hidden, &mut rng));
                d_in = hidden;
            }
        }
        let d = Self::dense_width(kind, hidden);
        let mut out_w = Matrix::zeros(1, d);
        // Without a trunk the model is a logistic regression: convex, so it
        // starts from zero and no feature carries an arbitrary initial weight.
        if kind.has_trunk() {
            let limit = (6.0 / (d + 1) as f64).sqrt();
            out_w
                .data_mut()
                .iter_mut()
                .for_each(|x| *x = rand::Rng::random_range(&mut rng, -limit..limit));
        }
        Ok(Model {
            kind,
            hidden,
            sage,
            out_w,
            out_b: Matrix::zeros(1, 1),
        })
    }

    /// A model whose parameters are all zero.
    pub fn zeros(kind: ModelKind, hidden: usize) -> Result<Self> {
        let mut m = Self::new(kind, hidden, 0)?;
        let mut p = m.params();
        p.scale(0.0);
        m.set_params(&p)?;
        Ok(m)
    }

    fn dense_width(kind: ModelKind, hidden: usize) -> usize {
        match kind {
            ModelKind::CollabOnly | ModelKind::TopoOnly(_) => N_SAGE_LAYERS * hidden,
            ModelKind::Combined => N_SAGE_LAYERS * hidden + N_COMORBIDITIES,
            ModelKind::ComorbidityOnly => N_COMORBIDITIES,
            ModelKind::AttrOnly => FEATURE_DIM,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Width of the graph embedding fed to the output layer (0 without a trunk).
    pub fn embedding_width(&self) -> usize {
        if self.kind.has_trunk() {
            N_SAGE_LAYERS * self.hidden
        } else if self.kind == ModelKind::AttrOnly {
            FEATURE_DIM
        } else {
            0
        }
    }

    /// Input width of the final dense layer.
    pub fn dense_input_width(&self) -> usize {
        self.out_w.cols()
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::default();
        for (l, layer) in self.sage.iter().enumerate() {
            p.push(format!("sage{l}.w"), layer.w.clone());
            p.push(format!("sage{l}.b"), layer.b.clone());
        }
        p.push("out.w", self.out_w.clone());
        p.push("out.b", self.out_b.clone());
        p
    }

    pub fn set_params(&mut self, params: &ParamSet) -> Result<()> {
        self.params().check_same_layout(params)?;
        params.check_finite()?;
        let mut it = params.entries.iter().map(|(_, m)| m.clone());
        for layer in &mut self.sage {
            layer.w = it.next().expect("layout checked");
            layer.b = it.next().expect("layout checked");
        }
        self.out_w = it.next().expect("layout checked");
        self.out_b = it.next().expect("layout checked");
        Ok(())
    }

    /// Mutable access to the output layer, for hand-built models in tests and examples.
    pub fn output_layer_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.out_w, &mut self.out_b)
    }

    fn check_contract<'a>(
        &self,
        instance: Instance<'a>,
    ) -> Result<(Option<&'a GraphInput>, Option<&'a [f64]>)> {
        let mismatch = || {
            Error::Contract(format!(
                "{} model cannot consume a {}",
                self.kind,
                instance.describe()
            ))
        };
        let (graph, comorb) = match (self.kind, instance) {
            (ModelKind::CollabOnly | ModelKind::AttrOnly, Instance::Graph(g)) => (Some(g), None),
            (ModelKind::ComorbidityOnly, Instance::Comorbidity(c)) => (None, Some(c)),
            (ModelKind::Combined, Instance::Combined(g, c)) => (Some(g), Some(c)),
            (ModelKind::TopoOnly(k), Instance::Topo(kk, g)) if k == kk => (Some(g), None),
            _ => return Err(mismatch()),
        };
        if let Some(g) = graph {
            let want = self.kind.node_input_dim();
            if g.features.cols() != want {
                return Err(Error::dimension(
                    "node feature width",
                    want,
                    g.features.cols(),
                ));
            }
        }
        if let Some(c) = comorb {
            if c.len() != N_COMORBIDITIES {
                return Err(Error::dimension(
                    "comorbidity vector",
                    N_COMORBIDITIES,
                    c.len(),
                ));
            }
        }
        Ok((graph, comorb))
    }

    /// Concatenated per-layer node embeddings (n × 4·hidden).
    pub fn node_embeddings(&self, graph: &GraphInput) -> Result<Matrix> {
        if !self.kind.has_trunk() {
            return Err(Error::Contract(format!(
                "{} model has no GNN trunk",
                self.kind
            )));
        }
        let (outs, _) = self.run_trunk(graph)?;
        let refs: Vec<&Matrix> = outs.iter().collect();
        Matrix::hconcat(&refs)
    }

    fn run_trunk(&self, graph: &GraphInput) -> Result<(Vec<Matrix>, Vec<SageCache>)> {
        let mut outs = Vec::with_capacity(self.sage.len());
        let mut caches = Vec::with_capacity(self.sage.len());
        let mut h = &graph.features;
        for layer in &self.sage {
            let (out, cache) = sage_forward_cached(h, &graph.adj, layer)?;
            outs.push(out);
            caches.push(cache);
            h = outs.last().expect("just pushed");
        }
        Ok((outs, caches))
    }

    fn forward_trace(&self, instance: Instance<'_>) -> Result<ForwardTrace> {
        let (graph, comorb) = self.check_contract(instance)?;
        let mut trunk = None;
        let mut dense_input = Vec::with_capacity(self.dense_input_width());
        if let Some(g) = graph {
            let width = self.embedding_width();
            if g.num_nodes() == 0 {
                // No observed activity: predict from the zero embedding.
                dense_input.extend(std::iter::repeat_n(0.0, width));
                trunk = Some(TrunkTrace {
                    caches: Vec::new(),
                    pool: None,
                    n: 0,
                });
            } else if self.kind == ModelKind::AttrOnly {
                g.features.check_finite("node features")?;
                let pool = maxpool_readout(&g.features)?;
                dense_input.extend_from_slice(&pool.values);
            } else {
                let (outs, caches) = self.run_trunk(g)?;
                let refs: Vec<&Matrix> = outs.iter().collect();
                let pool = maxpool_readout(&Matrix::hconcat(&refs)?)?;
                dense_input.extend_from_slice(&pool.values);
                trunk = Some(TrunkTrace {
                    caches,
                    pool: Some(pool),
                    n: g.num_nodes(),
                });
            }
        }
        if let Some(c) = comorb {
            dense_input.extend_from_slice(c);
        }
        if dense_input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense input".into()));
        }
        let z = dense_affine(&dense_input, &self.out_w, self.out_b.row(0))?[0];
        Ok(ForwardTrace {
            trunk,
            dense_input,
            prob: sigmoid(z),
        })
    }

    /// Survival probability for `instance`.
    pub fn predict(&self, instance: Instance<'_>) -> Result<f64> {
        self.forward_trace(instance).map(|t| t.prob)
    }

    /// Survival probability of the attribute-only model straight from a pooled
    /// presence vector, the input space its explanations are computed in.
    pub fn predict_pooled(&self, pooled: &[f64]) -> Result<f64> {
        if self.kind != ModelKind::AttrOnly {
            return Err(Error::Contract(format!(
                "{} model has no pooled-input form",
                self.kind
            )));
        }
        let z = dense_affine(pooled, &self.out_w, self.out_b.row(0))?[0];
        Ok(sigmoid(z))
    }

    /// Logit of the survival probability (pre-sigmoid output).
    pub fn logit(&self, instance: Instance<'_>) -> Result<f64> {
        let t = self.forward_trace(instance)?;
        Ok(dense_affine(&t.dense_input, &self.out_w, self.out_b.row(0))?[0])
    }

    /// Forward pass that records what `backward` needs on `tape`.
    pub fn forward(&self, tape: &mut Tape, instance: Instance<'_>) -> Result<f64> {
        let trace = self.forward_trace(instance)?;
        let p = trace.prob;
        tape.pending = Some(trace);
        Ok(p)
    }

    /// Gradients of a scalar loss given `d_logit`, its derivative with
    /// respect to the output logit. Consumes the pending forward pass.
    pub fn backward(
        &self,
        tape: &mut Tape,
        instance: Instance<'_>,
        d_logit: f64,
    ) -> Result<ParamSet> {
        let trace = tape.pending.take().ok_or(Error::State)?;
        let (graph, _) = self.check_contract(instance)?;
        let mut grads = self.params().zeros_like();
        let (dw, db, dx) = dense_backward(&trace.dense_input, &self.out_w, &[d_logit]);
        let n_entries = grads.entries.len();
        grads.entries[n_entries - 2].1 = dw;
        grads.entries[n_entries - 1].1 = Matrix::from_vec(1, 1, db)?;

        let (Some(trunk), Some(g)) = (trace.trunk, graph) else {
            return Ok(grads);
        };
        let Some(pool) = trunk.pool else {
            return Ok(grads);
        };
        let hidden = self.hidden;
        let d_concat = maxpool_backward(&pool, trunk.n, &dx[..N_SAGE_LAYERS * hidden]);
        let mut upstream: Option<Matrix> = None;
        for l in (0..self.sage.len()).rev() {
            let mut d_out = Matrix::zeros(trunk.n, hidden);
            for v in 0..trunk.n {
                let src = &d_concat.row(v)[l * hidden..(l + 1) * hidden];
                let dst = d_out.row_mut(v);
                dst.copy_from_slice(src);
                if let Some(up) = &upstream {
                    for (a, b) in dst.iter_mut().zip(up.row(v)) {
                        *a += b;
                    }
                }
            }
            let sg = sage_backward(&trunk.caches[l], &g.adj, &self.sage[l], &d_out, l > 0)?;
            grads.entries[2 * l].1 = sg.dw;
            grads.entries[2 * l + 1].1 = sg.db;
            upstream = sg.dh;
        }
        Ok(grads)
    }

    /// Checkpoint tagged with the model kind, width and caller metadata.
    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        Checkpoint::new(
            &self.params(),
            serde_json::json!({
                "model_kind": self.kind,
                "hidden": self.hidden,
                "extra": extra,
            }),
        )
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let kind: ModelKind = serde_json::from_value(ck.meta["model_kind"].clone())
            .map_err(|e| Error::invariant("checkpoint.meta.model_kind", e.to_string()))?;
        let hidden = ck.meta["hidden"].as_u64().ok_or_else(|| {
            Error::invariant("checkpoint.meta.hidden", "missing or not an integer")
        })? as usize;
        let mut model = Model::zeros(kind, hidden)?;
        model.set_params(&ck.params()?)?;
        Ok(model)
    }
}
