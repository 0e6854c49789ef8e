use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};

use super::{GnnError, GnnParams};
use crate::graph::{HeteroGraph, NodeKind, Relation};

/// Layer-2 node states, one matrix per node kind.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub layer: usize,
    pub per_kind: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding(pub Array1<f64>);

/// Incoming edges of one relation with mean-normalization weights.
#[derive(Debug, Clone)]
struct Adjacency {
    edges: Vec<(usize, usize)>,
    inv_deg: Vec<f64>,
}

/// Upstream gradients fed into [`Forward::backward`].
#[derive(Debug, Clone, Default)]
pub struct Seeds {
    /// d loss / d layer-2 states, per kind.
    pub h2: Option<Vec<Array2<f64>>>,
    /// d loss / d graph embedding.
    pub graph: Option<Array1<f64>>,
    /// d loss / d projected node embeddings, per kind (`count x embed`).
    pub nodes: Option<Vec<Array2<f64>>>,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Inputs after mask substitution.
    pub x: Vec<Array2<f64>>,
    /// `h[l][kind]`: l = 0 is the input projection, 1 and 2 the layers.
    pub h: Vec<Vec<Array2<f64>>>,
    agg: Vec<BTreeMap<Relation, Array2<f64>>>,
    adj: BTreeMap<Relation, Adjacency>,
    pub pooled: Array1<f64>,
    pub graph: Array1<f64>,
    masked: Option<(NodeKind, Vec<u32>)>,
    n_total: usize,
}

pub fn forward(g: &HeteroGraph, p: &GnnParams) -> Result<(NodeEmbeddings, GraphEmbedding), GnnError> {
    let f = Forward::run(g, p, None)?;
    Ok((
        NodeEmbeddings {
            layer: 2,
            per_kind: f.h[2].clone(),
        },
        GraphEmbedding(f.graph.clone()),
    ))
}

impl Forward {
    /// Runs the encoder. `masked` replaces the listed nodes' features with the
    /// kind's learned mask vector.
    pub fn run(
        g: &HeteroGraph,
        p: &GnnParams,
        masked: Option<(NodeKind, &[u32])>,
    ) -> Result<Forward, GnnError> {
        p.check_spec(&g.feature_spec)?;
        for rel in g.relations() {
            if !p.layers[0].messages.contains_key(&rel) {
                return Err(GnnError::ShapeMismatch(format!(
                    "no message weights for relation {rel}"
                )));
            }
        }

        let mut x: Vec<Array2<f64>> = g.nodes.iter().map(|m| m.mapv(f64::from)).collect();
        if let Some((kind, ids)) = masked {
            let m = &mut x[kind.index()];
            for &i in ids {
                m.row_mut(i as usize).assign(&p.mask[kind.index()]);
            }
        }

        let mut adj = BTreeMap::new();
        for (&rel, list) in &g.edges {
            let mut deg = vec![0usize; g.count(rel.dst)];
            for &(_, d) in list {
                deg[d as usize] += 1;
            }
            let inv_deg = deg
                .iter()
                .map(|&n| if n == 0 { 0.0 } else { 1.0 / n as f64 })
                .collect();
            let edges = list.iter().map(|&(s, d)| (s as usize, d as usize)).collect();
            adj.insert(rel, Adjacency { edges, inv_deg });
        }

        let h0: Vec<Array2<f64>> = NodeKind::ALL
            .iter()
            .map(|&k| x[k.index()].dot(&p.input[k.index()]))
            .collect();
        let mut h = vec![h0];
        let mut aggs = Vec::new();
        for layer in &p.layers {
            let prev = h.last().unwrap();
            let mut z: Vec<Array2<f64>> = NodeKind::ALL
                .iter()
                .map(|&k| layer.self_loop[k.index()].apply(&prev[k.index()]))
                .collect();
            let mut agg_l = BTreeMap::new();
            for (&rel, a) in &adj {
                let src = &prev[rel.src.index()];
                let mut agg = Array2::zeros((g.count(rel.dst), src.ncols()));
                for &(s, d) in &a.edges {
                    agg.row_mut(d).scaled_add(a.inv_deg[d], &src.row(s));
                }
                let msg = &layer.messages[&rel];
                let mut out = agg.dot(&msg.w);
                for (i, mut row) in out.rows_mut().into_iter().enumerate() {
                    if a.inv_deg[i] > 0.0 {
                        row += &msg.b;
                    }
                }
                z[rel.dst.index()] += &out;
                agg_l.insert(rel, agg);
            }
            for m in z.iter_mut() {
                m.mapv_inplace(|v| v.max(0.0));
            }
            h.push(z);
            aggs.push(agg_l);
        }

        let n_total: usize = h[2].iter().map(|m| m.nrows()).sum();
        let mut pooled = Array1::zeros(p.dims.h2);
        for m in &h[2] {
            pooled += &m.sum_axis(Axis(0));
        }
        if n_total > 0 {
            pooled /= n_total as f64;
        }
        let graph = pooled.dot(&p.pool);
        Ok(Forward {
            x,
            h,
            agg: aggs,
            adj,
            pooled,
            graph,
            masked: masked.map(|(k, ids)| (k, ids.to_vec())),
            n_total,
        })
    }

    pub fn h2(&self, kind: NodeKind) -> &Array2<f64> {
        &self.h[2][kind.index()]
    }

    /// Layer-2 states projected by the pooling matrix, per kind.
    pub fn projected_nodes(&self, p: &GnnParams) -> Vec<Array2<f64>> {
        self.h[2].iter().map(|m| m.dot(&p.pool)).collect()
    }

    /// Gradients of every parameter given upstream gradients.
    pub fn backward(&self, p: &GnnParams, seeds: &Seeds) -> GnnParams {
        let mut grad = p.zeros_like();
        let mut dh: Vec<Array2<f64>> = match &seeds.h2 {
            Some(d) => d.clone(),
            None => self.h[2].iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
        };

        if let Some(dg) = &seeds.graph {
            // graph = pooled P, pooled = mean of all layer-2 rows.
            let dg2 = dg.view().insert_axis(Axis(0));
            let pooled2 = self.pooled.view().insert_axis(Axis(1));
            grad.pool += &pooled2.dot(&dg2);
            if self.n_total > 0 {
                let dpooled = p.pool.dot(dg) / self.n_total as f64;
                for m in dh.iter_mut() {
                    *m += &dpooled.view().insert_axis(Axis(0));
                }
            }
        }
        if let Some(dn) = &seeds.nodes {
            for k in NodeKind::ALL {
                let i = k.index();
                grad.pool += &self.h[2][i].t().dot(&dn[i]);
                dh[i] += &dn[i].dot(&p.pool.t());
            }
        }

        for l in (0..p.layers.len()).rev() {
            let layer = &p.layers[l];
            let prev = &self.h[l];
            let dz: Vec<Array2<f64>> = dh
                .iter()
                .zip(&self.h[l + 1])
                .map(|(d, out)| {
                    let mut d = d.clone();
                    d.zip_mut_with(out, |g, &o| {
                        if o <= 0.0 {
                            *g = 0.0
                        }
                    });
                    d
                })
                .collect();
            let mut dprev: Vec<Array2<f64>> = prev.iter().map(|m| Array2::zeros(m.raw_dim())).collect();
            for k in NodeKind::ALL {
                let i = k.index();
                let s = &layer.self_loop[i];
                let gs = &mut grad.layers[l].self_loop[i];
                gs.w += &prev[i].t().dot(&dz[i]);
                gs.b += &dz[i].sum_axis(Axis(0));
                dprev[i] += &dz[i].dot(&s.w.t());
            }
            for (rel, a) in &self.adj {
                let d = rel.dst.index();
                let msg = &layer.messages[rel];
                let gm = grad.layers[l].messages.get_mut(rel).expect("relation present");
                gm.w += &self.agg[l][rel].t().dot(&dz[d]);
                for (i, row) in dz[d].rows().into_iter().enumerate() {
                    if a.inv_deg[i] > 0.0 {
                        gm.b += &row;
                    }
                }
                let dagg = dz[d].dot(&msg.w.t());
                let ds = &mut dprev[rel.src.index()];
                for &(s, dst) in &a.edges {
                    ds.row_mut(s).scaled_add(a.inv_deg[dst], &dagg.row(dst));
                }
            }
            dh = dprev;
        }

        for k in NodeKind::ALL {
            let i = k.index();
            grad.input[i] += &self.x[i].t().dot(&dh[i]);
        }
        if let Some((kind, ids)) = &self.masked {
            let i = kind.index();
            let dx = dh[i].dot(&p.input[i].t());
            for &id in ids {
                grad.mask[i] += &dx.row(id as usize);
            }
        }
        grad
    }
}
