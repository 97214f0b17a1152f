//! GraphSAGE mean-aggregation layer and max-pool readout.

use rand::Rng;

use super::Matrix;
use crate::error::{Error, Result};

/// In-neighbor lists; messages flow along edge direction, so node `v`
/// aggregates from every `u` with an edge `u -> v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyList {
    in_nbrs: Vec<Vec<usize>>,
}

impl AdjacencyList {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut in_nbrs = vec![Vec::new(); n];
        for &(s, d) in edges {
            if s >= n || d >= n {
                return Err(Error::dimension(
                    "adjacency edge endpoint",
                    format!("< {n}"),
                    format!("({s}, {d})"),
                ));
            }
            in_nbrs[d].push(s);
        }
        for list in &mut in_nbrs {
            list.sort_unstable();
            list.dedup();
        }
        Ok(AdjacencyList { in_nbrs })
    }

    pub fn num_nodes(&self) -> usize {
        self.in_nbrs.len()
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_nbrs[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_nbrs[v].len()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut out = vec![0; self.in_nbrs.len()];
        for list in &self.in_nbrs {
            for &u in list {
                out[u] += 1;
            }
        }
        out
    }
}

/// `W` has shape (d_out, 2·d_in) and multiplies `[h_v | mean_{u in N(v)} h_u]`;
/// `b` has shape (1, d_out).
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayerParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl SageLayerParams {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        SageLayerParams {
            w: Matrix::zeros(d_out, 2 * d_in),
            b: Matrix::zeros(1, d_out),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(d_in, d_out);
        let limit = (6.0 / (2 * d_in + d_out) as f64).sqrt();
        p.w.data_mut()
            .iter_mut()
            .for_each(|x| *x = rng.random_range(-limit..limit));
        p
    }

    pub fn d_in(&self) -> usize {
        self.w.cols() / 2
    }

    pub fn d_out(&self) -> usize {
        self.w.rows()
    }

    fn validate(&self) -> Result<()> {
        if self.w.cols() % 2 != 0 {
            return Err(Error::dimension(
                "sage weight columns",
                "even",
                self.w.cols(),
            ));
        }
        if self.b.shape() != (1, self.d_out()) {
            return Err(Error::dimension(
                "sage bias",
                format!("(1, {})", self.d_out()),
                format!("{:?}", self.b.shape()),
            ));
        }
        Ok(())
    }
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct SageCache {
    input: Matrix,
    pre: Matrix,
}

#[derive(Debug, Clone)]
pub struct SageGrads {
    pub dw: Matrix,
    pub db: Matrix,
    /// Gradient with respect to the layer input, if requested.
    pub dh: Option<Matrix>,
}

pub fn sage_forward(h: &Matrix, adj: &AdjacencyList, params: &SageLayerParams) -> Result<Matrix> {
    sage_forward_cached(h, adj, params).map(|(out, _)| out)
}

/// Forward pass returning the output and a cache for [`sage_backward`].
pub fn sage_forward_cached(
    h: &Matrix,
    adj: &AdjacencyList,
    params: &SageLayerParams,
) -> Result<(Matrix, SageCache)> {
    params.validate()?;
    let (n, d_in) = h.shape();
    if d_in != params.d_in() {
        return Err(Error::dimension("sage input width", params.d_in(), d_in));
    }
    if n != adj.num_nodes() {
        return Err(Error::dimension("sage node count", adj.num_nodes(), n));
    }
    h.check_finite("sage input")?;
    let d_out = params.d_out();
    let wt = params.w.transpose();

    // Self and neighbor projections; input rows are often one-hot sparse.
    let mut s = Matrix::zeros(n, d_out);
    let mut t = Matrix::zeros(n, d_out);
    for v in 0..n {
        let hv = h.row(v);
        for (k, &x) in hv.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let ws = wt.row(k);
            let wn = wt.row(d_in + k);
            for (o, sv) in s.row_mut(v).iter_mut().enumerate() {
                *sv += x * ws[o];
            }
            for (o, tv) in t.row_mut(v).iter_mut().enumerate() {
                *tv += x * wn[o];
            }
        }
    }

    let bias = params.b.row(0);
    let mut pre = Matrix::zeros(n, d_out);
    for v in 0..n {
        let nbrs = adj.in_neighbors(v);
        let z = pre.row_mut(v);
        if !nbrs.is_empty() {
            for &u in nbrs {
                for (zo, to) in z.iter_mut().zip(t.row(u)) {
                    *zo += to;
                }
            }
            let inv = 1.0 / nbrs.len() as f64;
            z.iter_mut().for_each(|x| *x *= inv);
        }
        for ((zo, so), bo) in z.iter_mut().zip(s.row(v)).zip(bias) {
            *zo += so + bo;
        }
    }
    let mut out = pre.clone();
    out.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
    out.check_finite("sage output")?;
    Ok((
        out,
        SageCache {
            input: h.clone(),
            pre,
        },
    ))
}

/// Backward pass for upstream gradient `d_out` (shape of the layer output).
pub fn sage_backward(
    cache: &SageCache,
    adj: &AdjacencyList,
    params: &SageLayerParams,
    d_out: &Matrix,
    need_input_grad: bool,
) -> Result<SageGrads> {
    let h = &cache.input;
    let (n, d_in) = h.shape();
    let width = params.d_out();
    if d_out.shape() != (n, width) {
        return Err(Error::dimension(
            "sage upstream gradient",
            format!("({n}, {width})"),
            format!("{:?}", d_out.shape()),
        ));
    }

    let mut dz = d_out.clone();
    for (g, &z) in dz.data_mut().iter_mut().zip(cache.pre.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }

    // g[u] = sum over v that aggregate from u of dz[v] / |N(v)|.
    let mut g = Matrix::zeros(n, width);
    for v in 0..n {
        let nbrs = adj.in_neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        for &u in nbrs {
            let dzv = dz.row(v).to_vec();
            for (gu, d) in g.row_mut(u).iter_mut().zip(dzv) {
                *gu += d * inv;
            }
        }
    }

    let mut db = Matrix::zeros(1, width);
    let mut dw = Matrix::zeros(width, 2 * d_in);
    for v in 0..n {
        let dzv = dz.row(v);
        let gv = g.row(v);
        for (o, dbo) in db.row_mut(0).iter_mut().enumerate() {
            *dbo += dzv[o];
        }
        for (k, &x) in h.row(v).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for o in 0..width {
                let row = dw.row_mut(o);
                row[k] += dzv[o] * x;
                row[d_in + k] += gv[o] * x;
            }
        }
    }

    let dh = if need_input_grad {
        let mut dh = Matrix::zeros(n, d_in);
        for v in 0..n {
            let dzv = dz.row(v);
            let gv = g.row(v);
            let out = dh.row_mut(v);
            for o in 0..width {
                let (a, c) = (dzv[o], gv[o]);
                if a == 0.0 && c == 0.0 {
                    continue;
                }
                let w = params.w.row(o);
                for k in 0..d_in {
                    out[k] += a * w[k] + c * w[d_in + k];
                }
            }
        }
        Some(dh)
    } else {
        None
    };

    Ok(SageGrads { dw, db, dh })
}

/// Column-wise maximum with the winning row of each column.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool {
    pub values: Vec<f64>,
    /// Row index of the first maximum in each column.
    pub argmax: Vec<usize>,
}

pub fn maxpool_readout(h: &Matrix) -> Result<MaxPool> {
    if h.rows() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut values = h.row(0).to_vec();
    let mut argmax = vec![0; h.cols()];
    for i in 1..h.rows() {
        for (j, &x) in h.row(i).iter().enumerate() {
            if x > values[j] {
                values[j] = x;
                argmax[j] = i;
            }
        }
    }
    Ok(MaxPool { values, argmax })
}

/// Routes the readout gradient to the winning row of each column.
pub fn maxpool_backward(pool: &MaxPool, rows: usize, d_values: &[f64]) -> Matrix {
    let mut d = Matrix::zeros(rows, pool.values.len());
    for (j, (&i, &g)) in pool.argmax.iter().zip(d_values).enumerate() {
        d.set(i, j, g);
    }
    d
}
