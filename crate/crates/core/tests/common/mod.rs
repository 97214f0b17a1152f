//! Oracles and property checks shared by the integration tests and the
//! acceptance run. Each `check_*` returns `Err` with a description of the
//! first violation instead of panicking, so callers can report it.
#![allow(dead_code)]

use std::collections::BTreeSet;

use collab_core::eval::{assert_no_leakage, build_cohort_graphs, prepare_datasets};
use collab_core::graph::{
    build_graph, simplify_to_hcp, simplify_to_notes, NodeKind, ProfileIndex, SimplifiedGraph,
    SimplifiedKind, TimeWindows,
};
use collab_core::models::{GraphInput, Instance, Model, ModelKind, Tape};
use collab_core::nn::{bce_grad_logit, bce_loss, Matrix, ParamSet};
use collab_core::synth::taxonomy::{
    N_COMORBIDITIES, N_CONTENTS, N_HCP_TYPES, N_INTENTS, N_SPECIALTIES, N_TITLES,
};
use collab_core::synth::{
    generate_cohort, AccessLogEvent, Action, HcpProfile, NoteProfile, SynthConfig,
};
use collab_core::Error;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// A random directed graph with `n` nodes and dense features in [-1, 1].
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, width: usize) -> GraphInput {
    random_graph_with_density(rng, n, width, 0.15)
}

pub fn random_graph_with_density(
    rng: &mut ChaCha8Rng,
    n: usize,
    width: usize,
    p: f64,
) -> GraphInput {
    let features = random_features(rng, n, width);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    GraphInput::new(features, &edges).unwrap()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, width: usize) -> Matrix {
    let data = (0..n * width)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(n, width, data).unwrap()
}

pub struct RandomInput {
    pub graph: GraphInput,
    pub comorbidity: Vec<f64>,
}

impl RandomInput {
    pub fn new(rng: &mut ChaCha8Rng, kind: ModelKind, max_nodes: usize) -> Self {
        let n = rng.random_range(1..=max_nodes);
        RandomInput {
            graph: random_graph(rng, n, kind.node_input_dim()),
            comorbidity: (0..N_COMORBIDITIES)
                .map(|_| f64::from(u8::from(rng.random_bool(0.3))))
                .collect(),
        }
    }

    pub fn instance(&self, kind: ModelKind) -> Instance<'_> {
        match kind {
            ModelKind::CollabOnly | ModelKind::AttrOnly => Instance::Graph(&self.graph),
            ModelKind::ComorbidityOnly => Instance::Comorbidity(&self.comorbidity),
            ModelKind::Combined => Instance::Combined(&self.graph, &self.comorbidity),
            ModelKind::TopoOnly(k) => Instance::Topo(k, &self.graph),
        }
    }
}

pub fn all_kinds() -> [ModelKind; 6] {
    [
        ModelKind::CollabOnly,
        ModelKind::ComorbidityOnly,
        ModelKind::Combined,
        ModelKind::AttrOnly,
        ModelKind::TopoOnly(SimplifiedKind::AllHcp),
        ModelKind::TopoOnly(SimplifiedKind::AllNote),
    ]
}

/// Weighted BCE of `model` on one instance.
pub fn loss_of(model: &Model, x: Instance<'_>, y: bool, w: f64) -> f64 {
    bce_loss(model.predict(x).unwrap(), y, w)
}

/// Analytic gradient of the weighted BCE.
pub fn analytic_grads(model: &Model, x: Instance<'_>, y: bool, w: f64) -> ParamSet {
    let mut tape = Tape::new();
    let p = model.forward(&mut tape, x).unwrap();
    model
        .backward(&mut tape, x, bce_grad_logit(p, y, w))
        .unwrap()
}

/// Central difference of the loss with respect to one scalar parameter.
pub fn numeric_grad(
    model: &Model,
    x: Instance<'_>,
    y: bool,
    w: f64,
    tensor: usize,
    index: usize,
) -> f64 {
    let base = model.params();
    let eval = |delta: f64| {
        let mut p = base.clone();
        p.entries[tensor].1.data_mut()[index] += delta;
        let mut m = model.clone();
        m.set_params(&p).unwrap();
        loss_of(&m, x, y, w)
    };
    (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP)
}

/// `|a - n| / max(|a|, |n|)`, with an absolute floor so that two values that
/// are both essentially zero compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Glorot weights plus random biases, so no pre-activation sits exactly on
/// the ReLU kink the way zero-initialised biases can make it. Trunk-less
/// models start from zero, so their weights are randomized too.
pub fn randomized_model(rng: &mut ChaCha8Rng, kind: ModelKind, hidden: usize) -> Model {
    let mut model = Model::new(kind, hidden, rng.random()).unwrap();
    let mut p = model.params();
    for (name, m) in &mut p.entries {
        if name.ends_with(".b") || !kind.has_trunk() {
            m.data_mut()
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.3..0.3));
        }
    }
    model.set_params(&p).unwrap();
    model
}

/// Compares `per_tensor` random coordinates of every parameter tensor of a
/// random model on a random instance (at most 20 nodes) with central
/// differences; returns the worst relative error.
pub fn check_gradient_instance(
    seed: u64,
    kind: ModelKind,
    hidden: usize,
    per_tensor: usize,
) -> Result<f64, String> {
    let mut rng = seeded(seed);
    let model = randomized_model(&mut rng, kind, hidden);
    let input = RandomInput::new(&mut rng, kind, 20);
    let x = input.instance(kind);
    let y = rng.random_bool(0.5);
    let w = rng.random_range(0.5..2.0);
    let grads = analytic_grads(&model, x, y, w);
    let mut worst: f64 = 0.0;
    for (t, (name, g)) in grads.entries.iter().enumerate() {
        let len = g.data().len();
        for i in sample(&mut rng, len, per_tensor.min(len)) {
            let a = g.data()[i];
            let n = numeric_grad(&model, x, y, w, t, i);
            let err = relative_error(a, n);
            if err > FD_TOLERANCE {
                return Err(format!(
                    "{kind} seed {seed} {name}[{i}]: analytic {a:e} numeric {n:e} rel {err:e}"
                ));
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Graph construction and rerouting
// ---------------------------------------------------------------------------

pub struct EventStream {
    pub hcps: Vec<HcpProfile>,
    pub notes: Vec<NoteProfile>,
    pub events: Vec<AccessLogEvent>,
}

/// Random profiles and up to 40 read/write events among them; any HCP may
/// touch any note in any order.
pub fn random_event_stream(rng: &mut ChaCha8Rng) -> EventStream {
    let n_hcps = rng.random_range(1..=8);
    let n_notes = rng.random_range(1..=8);
    let hcps: Vec<HcpProfile> = (0..n_hcps)
        .map(|i| HcpProfile {
            hcp_id: format!("H{i}"),
            title: rng.random_range(0..N_TITLES),
            hcp_type: rng.random_range(0..N_HCP_TYPES),
            specialty: rng.random_range(0..N_SPECIALTIES),
            is_resident: rng.random_bool(0.2),
        })
        .collect();
    let notes: Vec<NoteProfile> = (0..n_notes)
        .map(|i| NoteProfile {
            note_id: format!("N{i}"),
            intent: rng.random_range(0..N_INTENTS),
            content: rng.random_range(0..N_CONTENTS),
            is_inpatient: rng.random_bool(0.3),
        })
        .collect();
    let n_events = rng.random_range(0..=40);
    let events = (0..n_events)
        .map(|_| AccessLogEvent {
            patient_id: "P".into(),
            hcp_id: format!("H{}", rng.random_range(0..n_hcps)),
            note_id: format!("N{}", rng.random_range(0..n_notes)),
            action: if rng.random_bool(0.4) {
                Action::Write
            } else {
                Action::Read
            },
            t: rng.random_range(-90.0..270.0),
        })
        .collect();
    EventStream {
        hcps,
        notes,
        events,
    }
}

type IdEdge = (String, String);

/// Every length-2 path `a -> mid -> b` with `a != b` of the kept kind, found
/// by trying all node triples of the edge set implied by the events.
pub fn two_path_oracle(events: &[AccessLogEvent], keep: NodeKind) -> BTreeSet<IdEdge> {
    let mut edges: BTreeSet<((NodeKind, &str), (NodeKind, &str))> = BTreeSet::new();
    let mut nodes: BTreeSet<(NodeKind, &str)> = BTreeSet::new();
    for e in events {
        let h = (NodeKind::Hcp, e.hcp_id.as_str());
        let n = (NodeKind::Note, e.note_id.as_str());
        nodes.insert(h);
        nodes.insert(n);
        edges.insert(match e.action {
            Action::Write => (h, n),
            Action::Read => (n, h),
        });
    }
    let mut out = BTreeSet::new();
    for &a in &nodes {
        for &mid in &nodes {
            for &b in &nodes {
                if a.0 == keep
                    && b.0 == keep
                    && a != b
                    && edges.contains(&(a, mid))
                    && edges.contains(&(mid, b))
                {
                    out.insert((a.1.to_string(), b.1.to_string()));
                }
            }
        }
    }
    out
}

fn simplified_edges(g: &SimplifiedGraph) -> BTreeSet<IdEdge> {
    g.edges
        .iter()
        .map(|&(s, d)| (g.nodes[s].clone(), g.nodes[d].clone()))
        .collect()
}

/// Builds the graph of one random stream and checks node set, bipartiteness,
/// edge directions and both projections against brute-force oracles.
pub fn check_event_stream(seed: u64) -> Result<(), String> {
    let mut rng = seeded(seed);
    let s = random_event_stream(&mut rng);
    let profiles = ProfileIndex::new(&s.hcps, &s.notes);
    let g = build_graph("P", &s.events, &profiles).map_err(|e| e.to_string())?;
    let fail = |what: &str| Err(format!("stream {seed}: {what}"));

    let expected_nodes: BTreeSet<(NodeKind, String)> = s
        .events
        .iter()
        .flat_map(|e| {
            [
                (NodeKind::Hcp, e.hcp_id.clone()),
                (NodeKind::Note, e.note_id.clone()),
            ]
        })
        .collect();
    let nodes: BTreeSet<(NodeKind, String)> =
        g.nodes.iter().map(|n| (n.kind(), n.id.clone())).collect();
    if nodes != expected_nodes || nodes.len() != g.nodes.len() {
        return fail("node set differs from the ids in the events");
    }
    if !g.is_bipartite() {
        return fail("an edge joins two nodes of the same kind");
    }
    let expected_edges: BTreeSet<(NodeKind, IdEdge)> = s
        .events
        .iter()
        .map(|e| match e.action {
            Action::Write => (NodeKind::Hcp, (e.hcp_id.clone(), e.note_id.clone())),
            Action::Read => (NodeKind::Note, (e.note_id.clone(), e.hcp_id.clone())),
        })
        .collect();
    let edges: BTreeSet<(NodeKind, IdEdge)> = g
        .edges
        .iter()
        .map(|&(a, b)| {
            (
                g.nodes[a].kind(),
                (g.nodes[a].id.clone(), g.nodes[b].id.clone()),
            )
        })
        .collect();
    if edges != expected_edges || edges.len() != g.edges.len() {
        return fail("edges are not writer -> note and note -> reader");
    }

    for (simplified, keep) in [
        (simplify_to_hcp(&g), NodeKind::Hcp),
        (simplify_to_notes(&g), NodeKind::Note),
    ] {
        let expected_ids: Vec<String> = expected_nodes
            .iter()
            .filter(|(k, _)| *k == keep)
            .map(|(_, id)| id.clone())
            .collect();
        let mut ids = simplified.nodes.clone();
        ids.sort();
        if ids != expected_ids {
            return fail(&format!("{keep:?} projection has the wrong node set"));
        }
        if simplified_edges(&simplified) != two_path_oracle(&s.events, keep)
            || simplified.edges.len() != two_path_oracle(&s.events, keep).len()
        {
            return fail(&format!(
                "{keep:?} projection differs from the 2-path oracle"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Receptive field
// ---------------------------------------------------------------------------

/// Hop distance from `source` along edge direction (the direction messages
/// travel); `usize::MAX` when unreachable.
pub fn hops_from(n: usize, edges: &[(usize, usize)], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; n];
    dist[source] = 0;
    let mut frontier = vec![source];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &(s, d) in edges {
                if s == u && dist[d] == usize::MAX {
                    dist[d] = dist[u] + 1;
                    next.push(d);
                }
            }
        }
        frontier = next;
    }
    dist
}

/// Outcome of one perturbation: how many nodes were at least five hops away
/// (all must be bitwise unchanged) and how many within four hops changed.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReceptiveFieldCount {
    pub far_unchanged: usize,
    pub near_changed: usize,
    pub at_four_changed: bool,
}

/// Random graph containing a directed chain `0 -> 1 -> ... -> 6` plus extra
/// nodes wired at random; perturbs the features of node 0 and compares every
/// node's four-layer embedding bit for bit against hop distances from it.
pub fn check_receptive_field(seed: u64) -> Result<ReceptiveFieldCount, String> {
    let mut rng = seeded(seed);
    let kind = ModelKind::CollabOnly;
    let width = kind.node_input_dim();
    let chain = 7;
    let n = rng.random_range(chain + 1..=20);
    let mut edges: Vec<(usize, usize)> = (0..chain - 1).map(|i| (i, i + 1)).collect();
    for u in 0..n {
        for v in chain..n {
            if u != v && rng.random_bool(0.12) {
                edges.push((u, v));
            }
        }
        if u >= chain && rng.random_bool(0.3) {
            edges.push((u, rng.random_range(0..chain)));
        }
    }
    let features = random_features(&mut rng, n, width);
    let model = randomized_model(&mut rng, kind, 8);
    let base = model
        .node_embeddings(&GraphInput::new(features.clone(), &edges).unwrap())
        .map_err(|e| e.to_string())?;
    let mut perturbed = features;
    for j in 0..width {
        perturbed.set(0, j, rng.random_range(-1.0..1.0));
    }
    let after = model
        .node_embeddings(&GraphInput::new(perturbed, &edges).unwrap())
        .map_err(|e| e.to_string())?;

    let dist = hops_from(n, &edges, 0);
    let mut count = ReceptiveFieldCount::default();
    for u in 0..n {
        let same = base
            .row(u)
            .iter()
            .zip(after.row(u))
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if dist[u] >= 5 {
            if !same {
                return Err(format!("seed {seed}: node {u} at {} hops changed", dist[u]));
            }
            count.far_unchanged += 1;
        } else if !same {
            count.near_changed += 1;
            if dist[u] == 4 {
                count.at_four_changed = true;
            }
        }
    }
    Ok(count)
}

// ---------------------------------------------------------------------------
// Leakage
// ---------------------------------------------------------------------------

/// Injects a read at day 300 by an HCP otherwise absent from the patient's
/// log; the windowed graphs must not contain it and a graph built without the
/// window must trip the guard.
pub fn check_leakage_guard(seed: u64) -> Result<(), String> {
    let mut cohort = generate_cohort(&SynthConfig {
        seed,
        patients_per_cancer: 20,
        hcp_pool_size: 120,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let windows = TimeWindows::default();
    let pid = cohort.patients[0].patient_id.clone();
    let own: Vec<&AccessLogEvent> = cohort
        .events
        .iter()
        .filter(|e| e.patient_id == pid)
        .collect();
    let note = own[0].note_id.clone();
    let outsider = cohort
        .hcps
        .iter()
        .find(|h| own.iter().all(|e| e.hcp_id != h.hcp_id))
        .ok_or("every HCP already treats the patient")?
        .hcp_id
        .clone();
    let injected = AccessLogEvent {
        patient_id: pid.clone(),
        hcp_id: outsider.clone(),
        note_id: note,
        action: Action::Read,
        t: 300.0,
    };
    cohort.events.push(injected.clone());

    let graphs = build_cohort_graphs(&cohort, &windows).map_err(|e| e.to_string())?;
    for g in &graphs {
        if g.latest_event.is_some_and(|t| t > windows.observation_end) {
            return Err(format!(
                "graph {} holds an event after day 270",
                g.patient_id
            ));
        }
        if g.patient_id == pid && g.nodes.iter().any(|n| n.id == outsider) {
            return Err("the injected reader appears in the training graph".into());
        }
    }
    prepare_datasets(&cohort.patients, &graphs, &windows).map_err(|e| e.to_string())?;

    // Bypass the window: the guard must fire, both directly and in the harness.
    let profiles = ProfileIndex::new(&cohort.hcps, &cohort.notes);
    let unwindowed: Vec<AccessLogEvent> = cohort
        .events
        .iter()
        .filter(|e| e.patient_id == pid)
        .cloned()
        .collect();
    let leaky = build_graph(&pid, &unwindowed, &profiles).map_err(|e| e.to_string())?;
    match assert_no_leakage(&leaky, &windows) {
        Err(Error::Leakage { t, .. }) if t >= 300.0 => {}
        other => {
            return Err(format!(
                "guard did not fire on a bypassed window: {other:?}"
            ))
        }
    }
    let mut tampered = graphs;
    tampered[0] = leaky;
    match prepare_datasets(&cohort.patients, &tampered, &windows) {
        Err(Error::Leakage { .. }) => Ok(()),
        other => Err(format!(
            "harness accepted a leaking graph: {:?}",
            other.map(|d| d.len())
        )),
    }
}

// ---------------------------------------------------------------------------
// Shapley values
// ---------------------------------------------------------------------------

/// A small random nonlinear model: tanh of a random quadratic form, so
/// features interact.
pub struct RandomModel {
    w: Vec<f64>,
    q: Vec<Vec<f64>>,
    b: f64,
}

impl RandomModel {
    pub fn new(d: usize, rng: &mut ChaCha8Rng) -> Self {
        RandomModel {
            w: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            q: (0..d)
                .map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5)).collect())
                .collect(),
            b: rng.random_range(-0.5..0.5),
        }
    }

    pub fn eval(&self, z: &[f64]) -> collab_core::Result<f64> {
        let mut s = self.b;
        for i in 0..z.len() {
            s += self.w[i] * z[i];
            for j in 0..z.len() {
                s += self.q[i][j] * z[i] * z[j];
            }
        }
        Ok(s.tanh())
    }
}

/// Shapley values straight from the definition: the average, over all d!
/// orderings, of each feature's marginal contribution when added.
pub fn shapley_brute_force(f: &dyn Fn(&[f64]) -> f64, x: &[f64], baseline: &[f64]) -> Vec<f64> {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let d = x.len();
    let mut perms = Vec::new();
    permutations(&mut (0..d).collect(), 0, &mut perms);
    let mut phi = vec![0.0; d];
    for p in &perms {
        let mut z = baseline.to_vec();
        for &j in p {
            let before = f(&z);
            z[j] = x[j];
            phi[j] += f(&z) - before;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

pub fn random_instance(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.5)).collect()
}

// ---------------------------------------------------------------------------
// Correlation p-values
// ---------------------------------------------------------------------------

/// Student-t CDF by composite Simpson integration of the unnormalised
/// density after substituting t = tan θ, which maps the real line onto a
/// bounded interval with a smooth integrand. Normalising by the integral
/// over the whole line avoids any gamma function.
pub fn t_cdf_oracle(t: f64, df: f64) -> f64 {
    let g = |theta: f64| {
        let u = theta.tan();
        let c = theta.cos();
        (1.0 + u * u / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let simpson = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n)
            .map(|i| g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        // The integrand vanishes at ±π/2 for df > 1.
        let ends = |x: f64| {
            if (x.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
                0.0
            } else {
                g(x)
            }
        };
        h / 3.0 * (ends(a) + inner + ends(b))
    };
    let half = std::f64::consts::FRAC_PI_2;
    let total = simpson(-half, half, 200_000);
    simpson(-half, t.atan(), 200_000) / total
}

/// Two-sided p-value of a correlation coefficient from the oracle CDF.
pub fn p_oracle(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    2.0 * (1.0 - t_cdf_oracle(t.abs(), df))
}
