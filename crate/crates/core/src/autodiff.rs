//! Minimal reverse-mode autodiff over 1-D value vectors and 2-D
//! parameter tensors. Just enough ops for gated recurrent cells,
//! embedding lookups, and log-softmax losses; values are computed
//! eagerly at node creation and gradients by a single reverse sweep.

use ndarray::{Array1, Array2};

pub type NodeId = usize;
pub type ParamId = usize;

#[derive(Debug, Clone)]
enum Op {
    Const,
    Matvec { w: ParamId, x: NodeId },
    AddBias { b: ParamId, x: NodeId },
    EmbedRow { table: ParamId, row: usize },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Concat { parts: Vec<NodeId> },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Slice { x: NodeId, start: usize, len: usize },
    /// log softmax(logits)[index], emitted as a length-1 node.
    LogSoftmaxPick { logits: NodeId, index: usize },
    /// Elementwise weighted sum of same-shaped nodes.
    ScaledSum { terms: Vec<(NodeId, f64)> },
}

pub struct Tape<'p> {
    params: &'p [Array2<f64>],
    nodes: Vec<(Op, Array1<f64>)>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Array2<f64>]) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Array1<f64> {
        &self.nodes[id].1
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].1[0]
    }

    fn push(&mut self, op: Op, value: Array1<f64>) -> NodeId {
        self.nodes.push((op, value));
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Array1<f64>) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.constant(Array1::zeros(len))
    }

    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> NodeId {
        let value = self.params[w].dot(self.value(x));
        self.push(Op::Matvec { w, x }, value)
    }

    /// Adds the single-column bias parameter `b` to `x`.
    pub fn add_bias(&mut self, b: ParamId, x: NodeId) -> NodeId {
        let value = self.value(x) + &self.params[b].column(0);
        self.push(Op::AddBias { b, x }, value)
    }

    pub fn embed_row(&mut self, table: ParamId, row: usize) -> NodeId {
        let value = self.params[table].row(row).to_owned();
        self.push(Op::EmbedRow { table, row }, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a) + self.value(b);
        self.push(Op::Add { a, b }, value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.value(a) * self.value(b);
        self.push(Op::Mul { a, b }, value)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut value = Vec::new();
        for &p in parts {
            value.extend(self.value(p).iter());
        }
        self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Array1::from_vec(value),
        )
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(Op::Sigmoid { x }, value)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).mapv(f64::tanh);
        self.push(Op::Tanh { x }, value)
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let value = self.value(x).slice(ndarray::s![start..start + len]).to_owned();
        self.push(Op::Slice { x, start, len }, value)
    }

    pub fn log_softmax_pick(&mut self, logits: NodeId, index: usize) -> NodeId {
        let l = self.value(logits);
        let max = l.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum = l.mapv(|v| (v - max).exp()).sum().ln() + max;
        let value = Array1::from_vec(vec![l[index] - log_sum]);
        self.push(Op::LogSoftmaxPick { logits, index }, value)
    }

    pub fn scaled_sum(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        assert!(!terms.is_empty());
        let mut value = self.value(terms[0].0) * terms[0].1;
        for &(node, w) in &terms[1..] {
            value += &(self.value(node) * w);
        }
        self.push(
            Op::ScaledSum {
                terms: terms.to_vec(),
            },
            value,
        )
    }

    /// Reverse sweep from the scalar node `root`; returns one gradient
    /// tensor per parameter, in parameter order.
    pub fn backward(&self, root: NodeId) -> Vec<Array2<f64>> {
        let mut param_grads: Vec<Array2<f64>> = self
            .params
            .iter()
            .map(|p| Array2::zeros(p.raw_dim()))
            .collect();
        let mut grads: Vec<Option<Array1<f64>>> = vec![None; self.nodes.len()];
        grads[root] = Some(Array1::from_vec(vec![1.0; self.value(root).len()]));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].0 {
                Op::Const => {}
                Op::Matvec { w, x } => {
                    let xv = self.value(*x);
                    for (i, &gi) in g.iter().enumerate() {
                        if gi != 0.0 {
                            param_grads[*w]
                                .row_mut(i)
                                .iter_mut()
                                .zip(xv.iter())
                                .for_each(|(dw, &xj)| *dw += gi * xj);
                        }
                    }
                    accumulate(&mut grads, *x, self.params[*w].t().dot(&g));
                }
                Op::AddBias { b, x } => {
                    param_grads[*b]
                        .column_mut(0)
                        .iter_mut()
                        .zip(g.iter())
                        .for_each(|(db, &gi)| *db += gi);
                    accumulate(&mut grads, *x, g);
                }
                Op::EmbedRow { table, row } => {
                    param_grads[*table]
                        .row_mut(*row)
                        .iter_mut()
                        .zip(g.iter())
                        .for_each(|(dt, &gi)| *dt += gi);
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Mul { a, b } => {
                    accumulate(&mut grads, *a, &g * self.value(*b));
                    accumulate(&mut grads, *b, &g * self.value(*a));
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        accumulate(
                            &mut grads,
                            p,
                            g.slice(ndarray::s![offset..offset + len]).to_owned(),
                        );
                        offset += len;
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &self.nodes[id].1;
                    accumulate(&mut grads, *x, &g * &y.mapv(|v| v * (1.0 - v)));
                }
                Op::Tanh { x } => {
                    let y = &self.nodes[id].1;
                    accumulate(&mut grads, *x, &g * &y.mapv(|v| 1.0 - v * v));
                }
                Op::Slice { x, start, len } => {
                    let mut gx = Array1::zeros(self.value(*x).len());
                    gx.slice_mut(ndarray::s![*start..*start + *len]).assign(&g);
                    accumulate(&mut grads, *x, gx);
                }
                Op::LogSoftmaxPick { logits, index } => {
                    let l = self.value(*logits);
                    let max = l.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let exps = l.mapv(|v| (v - max).exp());
                    let sum = exps.sum();
                    let mut gl = exps.mapv(|e| -g[0] * e / sum);
                    gl[*index] += g[0];
                    accumulate(&mut grads, *logits, gl);
                }
                Op::ScaledSum { terms } => {
                    for &(node, w) in terms {
                        accumulate(&mut grads, node, &g * w);
                    }
                }
            }
        }
        param_grads
    }
}

fn accumulate(grads: &mut [Option<Array1<f64>>], id: NodeId, g: Array1<f64>) {
    match &mut grads[id] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}
