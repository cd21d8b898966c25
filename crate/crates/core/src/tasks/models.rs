//! Baseline networks for the three tasks, built per example.
//!
//! Graphs are unrolled for one example's lengths, but every parameter is
//! named, so all per-example graphs share one [`ParamStore`](crate::runtime::ParamStore).

use serde::{Deserialize, Serialize};

use super::data::{Example, Vocab, NLI_LABELS, TAG_LABELS};
use crate::augment::{GroundingContext, IndexSet};
use crate::graph::{ComputationGraph, NodeId, Op};
use crate::runtime::Feed;
use crate::tensor::Tensor;

use super::data::TaskData;

/// Layer sizes. The same struct serves all three models; `hidden` is the
/// recurrent state (tagger) or comparison width (alignment, inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab: 0,
            embed: 8,
            hidden: 8,
        }
    }
}

/// One example, ready to augment and run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: ComputationGraph,
    pub feed: Feed,
    pub ctx: GroundingContext,
}

fn one_hot(vocab: &Vocab, words: &[String]) -> Tensor {
    let v = vocab.len();
    let mut data = vec![0.0; words.len() * v];
    for (t, w) in words.iter().enumerate() {
        data[t * v + vocab.id(w)] = 1.0;
    }
    Tensor::new(vec![words.len(), v], data)
}

fn positions(words: &[String], keep: impl Fn(usize) -> bool) -> IndexSet {
    IndexSet::ordered(
        words
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(i, w)| (i, w.clone())),
    )
}

/// Build the graph, feed and grounding context for `example`.
pub fn build_instance(cfg: &ModelConfig, data: &TaskData, example: &Example) -> Instance {
    let cfg = ModelConfig {
        vocab: data.vocab.len(),
        ..*cfg
    };
    let mut ctx = GroundingContext::new();
    for (name, t) in &data.tables {
        ctx = ctx.with_table(name.clone(), t.clone());
    }
    match example {
        Example::Tag(e) => {
            let graph = build_tagger_model(&cfg, e.tokens.len(), Some(&e.labels));
            let feed = Feed::from([("tokens".to_string(), one_hot(&data.vocab, &e.tokens))]);
            let ctx = ctx.with_set("T", positions(&e.tokens, |_| true));
            Instance { graph, feed, ctx }
        }
        Example::Nli(e) => {
            let graph = build_inference_model(&cfg, e.premise.len(), e.hypothesis.len(), Some(e.label));
            let feed = Feed::from([
                ("premise".to_string(), one_hot(&data.vocab, &e.premise)),
                ("hypothesis".to_string(), one_hot(&data.vocab, &e.hypothesis)),
            ]);
            let ctx = ctx
                .with_set("P", positions(&e.premise, |i| e.premise_content[i]))
                .with_set("H", positions(&e.hypothesis, |i| e.hypothesis_content[i]));
            Instance { graph, feed, ctx }
        }
        Example::Align(e) => {
            let graph = build_alignment_model(&cfg, e.paragraph.len(), e.query.len(), Some(e.answer));
            let feed = Feed::from([
                ("paragraph".to_string(), one_hot(&data.vocab, &e.paragraph)),
                ("query".to_string(), one_hot(&data.vocab, &e.query)),
            ]);
            let ctx = ctx
                .with_set("Cp", positions(&e.paragraph, |i| e.paragraph_content[i]))
                .with_set("Cq", positions(&e.query, |i| e.query_content[i]));
            Instance { graph, feed, ctx }
        }
    }
}

fn embed(g: &mut ComputationGraph, input: &str, len: usize, cfg: &ModelConfig) -> NodeId {
    let x = g.input(input, &[len, cfg.vocab]).expect("fresh input name");
    let emb = g.parameter("emb", &[cfg.vocab, cfg.embed]).expect("fresh parameter");
    g.matmul(x, emb)
}

fn param(g: &mut ComputationGraph, name: &str, shape: &[usize]) -> NodeId {
    g.parameter(name, shape)
        .unwrap_or_else(|e| panic!("model construction bug: {e}"))
}

fn dense(g: &mut ComputationGraph, x: NodeId, prefix: &str, inputs: usize, outputs: usize) -> NodeId {
    let w = param(g, &format!("{prefix}.w"), &[inputs, outputs]);
    let b = param(g, &format!("{prefix}.b"), &[outputs]);
    let xw = g.matmul(x, w);
    g.add2(xw, b)
}

/// Stack `[1, n]` rows into `[len, n]`; an empty sequence yields a zero-row constant.
fn stack_rows(g: &mut ComputationGraph, rows: &[NodeId], width: usize) -> NodeId {
    match rows.len() {
        0 => g.constant(Tensor::zeros(&[0, width])),
        1 => rows[0],
        _ => g.op(Op::Concat { axis: 0 }, rows),
    }
}

/// One direction of a gated recurrent layer over `xs` (`[len, embed]`).
fn gru(g: &mut ComputationGraph, xs: NodeId, len: usize, cfg: &ModelConfig, prefix: &str, reverse: bool) -> NodeId {
    let (e, h) = (cfg.embed, cfg.hidden);
    let mut proj = Vec::new();
    let mut rec = Vec::new();
    let mut bias = Vec::new();
    for gate in ["z", "r", "n"] {
        let w = param(g, &format!("{prefix}.w{gate}"), &[e, h]);
        rec.push(param(g, &format!("{prefix}.u{gate}"), &[h, h]));
        bias.push(param(g, &format!("{prefix}.b{gate}"), &[h]));
        proj.push(if len > 0 { Some(g.matmul(xs, w)) } else { None });
    }
    let mut state = g.constant(Tensor::zeros(&[1, h]));
    let mut states = vec![state; len];
    let order: Vec<usize> = if reverse { (0..len).rev().collect() } else { (0..len).collect() };
    for t in order {
        let mut pre = Vec::with_capacity(3);
        for k in 0..2 {
            let x = g.op(Op::Slice { axis: 0, start: t, len: 1 }, &[proj[k].expect("non-empty")]);
            let hu = g.matmul(state, rec[k]);
            let s = g.add2(x, hu);
            let s = g.add2(s, bias[k]);
            pre.push(g.unary(Op::Sigmoid, s));
        }
        let (z, r) = (pre[0], pre[1]);
        let xn = g.op(Op::Slice { axis: 0, start: t, len: 1 }, &[proj[2].expect("non-empty")]);
        let rh = g.mul(r, state);
        let hu = g.matmul(rh, rec[2]);
        let s = g.add2(xn, hu);
        let s = g.add2(s, bias[2]);
        let n = g.unary(Op::Tanh, s);
        // h' = n + z * (h - n)
        let neg_n = g.affine(n, -1.0, 0.0);
        let diff = g.add2(state, neg_n);
        let keep = g.mul(z, diff);
        state = g.add2(n, keep);
        states[t] = state;
    }
    stack_rows(g, &states, h)
}

/// Bidirectional gated recurrent tagger: `y[t, l]` is a per-token softmax over
/// the seven chunk labels. With `gold`, a summed negative log-likelihood is
/// registered as the `loss` output.
pub fn build_tagger_model(cfg: &ModelConfig, len: usize, gold: Option<&[usize]>) -> ComputationGraph {
    let mut g = ComputationGraph::new();
    let x = embed(&mut g, "tokens", len, cfg);
    let fw = gru(&mut g, x, len, cfg, "fw", false);
    let bw = gru(&mut g, x, len, cfg, "bw", true);
    let both = g.op(Op::Concat { axis: 1 }, &[fw, bw]);
    let logits = dense(&mut g, both, "out", 2 * cfg.hidden, TAG_LABELS.len());
    let y = g.unary(Op::Softmax, logits);
    g.set_name(y, "y").expect("fresh name");
    g.set_axis_labels(y, 1, TAG_LABELS.iter().map(|s| s.to_string()).collect())
        .expect("label axis");
    g.set_output("prediction", y).expect("role");
    if let Some(gold) = gold {
        let loss = g.op(
            Op::Nll {
                targets: gold.iter().map(|&l| Some(l)).collect(),
            },
            &[y],
        );
        g.set_name(loss, "loss").expect("fresh name");
        g.set_output("loss", loss).expect("role");
    }
    g
}

/// Closed-form trainable parameter count of [`build_tagger_model`].
pub fn tagger_parameter_count(cfg: &ModelConfig) -> usize {
    let (v, e, h) = (cfg.vocab, cfg.embed, cfg.hidden);
    v * e + 2 * 3 * (e * h + h * h + h) + 2 * h * TAG_LABELS.len() + TAG_LABELS.len()
}

/// Softmax attention `softmax(a W bᵀ)` of each row of `a` over the rows of `b`.
fn bilinear(g: &mut ComputationGraph, a: NodeId, b: NodeId, cfg: &ModelConfig, prefix: &str) -> NodeId {
    let w = param(g, &format!("{prefix}.w"), &[cfg.embed, cfg.embed]);
    let aw = g.matmul(a, w);
    let bt = g.unary(Op::Transpose, b);
    let s = g.matmul(aw, bt);
    g.unary(Op::Softmax, s)
}

/// Question-answering analog: bilinear paragraph→query attention `att[i, j]`
/// (softmax over query words), attention-weighted query summaries per
/// paragraph word, and start/end softmax heads over the paragraph.
pub fn build_alignment_model(cfg: &ModelConfig, p_len: usize, q_len: usize, answer: Option<(usize, usize)>) -> ComputationGraph {
    let mut g = ComputationGraph::new();
    let p = embed(&mut g, "paragraph", p_len, cfg);
    let q = g.input("query", &[q_len, cfg.vocab]).expect("fresh input");
    let emb = g.lookup("emb").expect("embedding");
    let q = g.matmul(q, emb);
    let att = bilinear(&mut g, p, q, cfg, "att");
    g.set_name(att, "att").expect("fresh name");
    let ctx = g.matmul(att, q);
    let both = g.op(Op::Concat { axis: 1 }, &[p, ctx]);
    let h = dense(&mut g, both, "enc", 2 * cfg.embed, cfg.hidden);
    let h = g.unary(Op::Tanh, h);
    let mut heads = Vec::new();
    for name in ["start", "end"] {
        let w = param(&mut g, &format!("{name}.w"), &[cfg.hidden, 1]);
        let s = g.matmul(h, w);
        let s = g.op(Op::Reshape { shape: vec![1, p_len] }, &[s]);
        let y = g.unary(Op::Softmax, s);
        g.set_name(y, name).expect("fresh name");
        g.set_output(name, y).expect("role");
        heads.push(y);
    }
    g.set_output("prediction", heads[0]).expect("role");
    if let Some((s, e)) = answer {
        let ls = g.op(Op::Nll { targets: vec![Some(s)] }, &[heads[0]]);
        let le = g.op(Op::Nll { targets: vec![Some(e)] }, &[heads[1]]);
        let loss = g.add2(ls, le);
        g.set_name(loss, "loss").expect("fresh name");
        g.set_output("loss", loss).expect("role");
    }
    g
}

pub fn alignment_parameter_count(cfg: &ModelConfig) -> usize {
    let (v, e, h) = (cfg.vocab, cfg.embed, cfg.hidden);
    v * e + e * e + (2 * e * h + h) + 2 * h
}

/// Inference analog of a decomposable-attention model. Each premise word
/// attends over the hypothesis words plus a learned null slot
/// (`att_ph[i, j]`, shape `[P, H + 1]`), and each hypothesis word over the
/// premise plus null (`att_hp[j, i]`, shape `[H, P + 1]`); mass on the null
/// slot is how a word stays unaligned. Words are compared with what they
/// attend to, summed, and classified by a three-way `label` softmax.
pub fn build_inference_model(cfg: &ModelConfig, p_len: usize, h_len: usize, label: Option<usize>) -> ComputationGraph {
    let mut g = ComputationGraph::new();
    let p = embed(&mut g, "premise", p_len, cfg);
    let h = g.input("hypothesis", &[h_len, cfg.vocab]).expect("fresh input");
    let emb = g.lookup("emb").expect("embedding");
    let h = g.matmul(h, emb);
    let null = param(&mut g, "null", &[1, cfg.embed]);
    let p_null = g.op(Op::Concat { axis: 0 }, &[p, null]);
    let h_null = g.op(Op::Concat { axis: 0 }, &[h, null]);
    let att_ph = bilinear(&mut g, p, h_null, cfg, "att_ph");
    g.set_name(att_ph, "att_ph").expect("fresh name");
    let att_hp = bilinear(&mut g, h, p_null, cfg, "att_hp");
    g.set_name(att_hp, "att_hp").expect("fresh name");

    let mut pooled = Vec::new();
    for (own, other, att, len, prefix) in [
        (h, p_null, att_hp, h_len, "cmp_h"),
        (p, h_null, att_ph, p_len, "cmp_p"),
    ] {
        let aligned = g.matmul(att, other);
        let both = g.op(Op::Concat { axis: 1 }, &[own, aligned]);
        let v = dense(&mut g, both, prefix, 2 * cfg.embed, cfg.hidden);
        let v = g.unary(Op::Relu, v);
        let ones = g.constant(Tensor::filled(&[1, len], 1.0));
        pooled.push(g.matmul(ones, v));
    }
    let feats = g.op(Op::Concat { axis: 1 }, &pooled);
    let logits = dense(&mut g, feats, "cls", 2 * cfg.hidden, NLI_LABELS.len());
    let y = g.unary(Op::Softmax, logits);
    g.set_name(y, "label").expect("fresh name");
    g.set_axis_labels(y, 1, NLI_LABELS.iter().map(|s| s.to_string()).collect())
        .expect("label axis");
    g.set_output("prediction", y).expect("role");
    if let Some(l) = label {
        let loss = g.op(Op::Nll { targets: vec![Some(l)] }, &[y]);
        g.set_name(loss, "loss").expect("fresh name");
        g.set_output("loss", loss).expect("role");
    }
    g
}

pub fn inference_parameter_count(cfg: &ModelConfig) -> usize {
    let (v, e, h) = (cfg.vocab, cfg.embed, cfg.hidden);
    v * e + e + 2 * e * e + 2 * (2 * e * h + h) + 2 * h * NLI_LABELS.len() + NLI_LABELS.len()
}
