use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{LayerSlots, ModelParams, Slot};
use super::vocab::TokenVocab;
use super::MlmError;
use crate::masking::MaskedInstance;
use crate::vector;

const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, gamma: ArrayView1<f64>, beta: ArrayView1<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        let s = *inv;
        row.mapv_inplace(|v| v * s);
    }
    let y = &xhat * &gamma + &beta;
    (y, LnCache { xhat, inv_std })
}

/// Returns dx and accumulates dgamma / dbeta.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gamma: ArrayView1<f64>,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    add_into(dgamma, &(dy * &cache.xhat).sum_axis(Axis(0)));
    add_into(dbeta, &dy.sum_axis(Axis(0)));
    let dxhat = dy * &gamma;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let g = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        let inv = cache.inv_std[i];
        Zip::from(dx.row_mut(i))
            .and(g)
            .and(xh)
            .for_each(|o, &gv, &xv| *o = inv * (gv - mean_g - xv * mean_gx));
    }
    dx
}

fn add_into(out: &mut [f64], v: &Array1<f64>) {
    for (o, x) in out.iter_mut().zip(v.iter()) {
        *o += x;
    }
}

fn affine(x: &Array2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    x.dot(&w) + &b
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln1: LnCache,
    h1: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
    ln2: LnCache,
}

struct Forward {
    ids: Vec<usize>,
    emb_ln: LnCache,
    layers: Vec<LayerCache>,
    hidden: Array2<f64>,
}

fn forward(params: &ModelParams, ids: &[usize]) -> Forward {
    let cfg = params.config();
    let lay = params.layout();
    let p = params.values();
    let n = ids.len();
    let d = cfg.d_model;
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let tok = lay.tok_emb.mat(p);
    let pos = lay.pos_emb.mat(p);
    let mut x0 = Array2::zeros((n, d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x0.row_mut(i);
        row += &tok.row(id);
        row += &pos.row(i);
    }
    let (mut x, emb_ln) = layer_norm(&x0, lay.emb_ln_gamma.vec(p), lay.emb_ln_beta.vec(p));

    let mut layers = Vec::with_capacity(lay.layers.len());
    for ls in &lay.layers {
        let q = affine(&x, ls.wq.mat(p), ls.bq.vec(p));
        let k = affine(&x, ls.wk.mat(p), ls.bk.vec(p));
        let v = affine(&x, ls.wv.mat(p), ls.bv.vec(p));
        let mut ctx = Array2::zeros((n, d));
        let mut attn = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut a);
            ctx.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
            attn.push(a);
        }
        let attn_out = affine(&ctx, ls.wo.mat(p), ls.bo.vec(p));
        let (h1, ln1) = layer_norm(&(&x + &attn_out), ls.ln1_gamma.vec(p), ls.ln1_beta.vec(p));
        let pre = affine(&h1, ls.w1.mat(p), ls.b1.vec(p));
        let act = pre.mapv(gelu);
        let ff = affine(&act, ls.w2.mat(p), ls.b2.vec(p));
        let (out, ln2) = layer_norm(&(&h1 + &ff), ls.ln2_gamma.vec(p), ls.ln2_beta.vec(p));
        layers.push(LayerCache {
            input: x,
            q,
            k,
            v,
            attn,
            ctx,
            ln1,
            h1,
            pre,
            act,
            ln2,
        });
        x = out;
    }
    Forward {
        ids: ids.to_vec(),
        emb_ln,
        layers,
        hidden: x,
    }
}

fn add_mat(slot: &Slot, grad: &mut [f64], m: &Array2<f64>) {
    let mut view = slot.mat_mut(grad);
    view += m;
}

fn add_vec(slot: &Slot, grad: &mut [f64], v: &Array1<f64>) {
    let mut view = slot.vec_mut(grad);
    view += v;
}

/// `dx = dy W^T`, `dW += x^T dy`, `db += sum_rows dy`.
fn affine_backward(
    x: &Array2<f64>,
    dy: &Array2<f64>,
    w: &Slot,
    b: &Slot,
    params: &[f64],
    grad: &mut [f64],
) -> Array2<f64> {
    add_mat(w, grad, &x.t().dot(dy));
    add_vec(b, grad, &dy.sum_axis(Axis(0)));
    dy.dot(&w.mat(params).t())
}

fn layer_backward(
    params: &ModelParams,
    ls: &LayerSlots,
    c: &LayerCache,
    dout: &Array2<f64>,
    grad: &mut [f64],
) -> Array2<f64> {
    let cfg = params.config();
    let p = params.values();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let du2 = {
        let (dg, db) = split_pair(grad, &ls.ln2_gamma, &ls.ln2_beta);
        layer_norm_backward(dout, &c.ln2, ls.ln2_gamma.vec(p), dg, db)
    };
    // residual: u2 = h1 + ff
    let dact = affine_backward(&c.act, &du2, &ls.w2, &ls.b2, p, grad);
    let dpre = {
        let mut m = dact;
        Zip::from(&mut m).and(&c.pre).for_each(|g, &x| *g *= gelu_grad(x));
        m
    };
    let mut dh1 = du2;
    dh1 += &affine_backward(&c.h1, &dpre, &ls.w1, &ls.b1, p, grad);

    let du1 = {
        let (dg, db) = split_pair(grad, &ls.ln1_gamma, &ls.ln1_beta);
        layer_norm_backward(&dh1, &c.ln1, ls.ln1_gamma.vec(p), dg, db)
    };
    // residual: u1 = input + attn_out
    let dctx = affine_backward(&c.ctx, &du1, &ls.wo, &ls.bo, p, grad);

    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for (h, a) in c.attn.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let da = dctx_h.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&a.t().dot(&dctx_h));
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(&da - &row_dot);
        dq.slice_mut(cols).assign(&(ds.dot(&c.k.slice(cols)) * scale));
        dk.slice_mut(cols).assign(&(ds.t().dot(&c.q.slice(cols)) * scale));
    }
    let mut dinput = du1;
    dinput += &affine_backward(&c.input, &dq, &ls.wq, &ls.bq, p, grad);
    dinput += &affine_backward(&c.input, &dk, &ls.wk, &ls.bk, p, grad);
    dinput += &affine_backward(&c.input, &dv, &ls.wv, &ls.bv, p, grad);
    dinput
}

/// Disjoint mutable views of two slots. `first` must precede `second`.
fn split_pair<'a>(grad: &'a mut [f64], first: &Slot, second: &Slot) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(first.offset + first.size() <= second.offset);
    let (head, tail) = grad.split_at_mut(second.offset);
    (
        &mut head[first.offset..first.offset + first.size()],
        &mut tail[..second.size()],
    )
}

fn backward(params: &ModelParams, fwd: &Forward, dhidden: Array2<f64>, grad: &mut [f64]) {
    let lay = params.layout();
    let p = params.values();
    let mut dx = dhidden;
    for (ls, c) in lay.layers.iter().zip(&fwd.layers).rev() {
        dx = layer_backward(params, ls, c, &dx, grad);
    }
    let dx0 = {
        let (dg, db) = split_pair(grad, &lay.emb_ln_gamma, &lay.emb_ln_beta);
        layer_norm_backward(&dx, &fwd.emb_ln, lay.emb_ln_gamma.vec(p), dg, db)
    };
    let mut dtok = lay.tok_emb.mat_mut(grad);
    for (i, &id) in fwd.ids.iter().enumerate() {
        let mut row = dtok.row_mut(id);
        row += &dx0.row(i);
    }
    let mut dpos = lay.pos_emb.mat_mut(grad);
    for i in 0..fwd.ids.len() {
        let mut row = dpos.row_mut(i);
        row += &dx0.row(i);
    }
}

/// Token ids of an instance input and `(position, original id)` pairs for
/// every target position.
struct Prepared {
    ids: Vec<usize>,
    targets: Vec<(usize, usize)>,
}

fn prepare(params: &ModelParams, vocab: &TokenVocab, inst: &MaskedInstance) -> Result<Prepared, MlmError> {
    check_vocab(params, vocab)?;
    let max_len = params.config().max_len;
    if inst.input.len() > max_len {
        return Err(MlmError::TooLong { len: inst.input.len(), max_len });
    }
    let ids = vocab.ids(&inst.input)?;
    let mut targets = Vec::new();
    for t in &inst.targets {
        for (pos, tok) in t.span.range().zip(&t.tokens) {
            if pos >= ids.len() {
                return Err(MlmError::Config(format!("target position {pos} outside input")));
            }
            targets.push((pos, vocab.id(tok)?));
        }
    }
    Ok(Prepared { ids, targets })
}

fn check_vocab(params: &ModelParams, vocab: &TokenVocab) -> Result<(), MlmError> {
    if vocab.len() != params.config().vocab_size {
        return Err(MlmError::Config(format!(
            "vocabulary has {} tokens but model expects {}",
            vocab.len(),
            params.config().vocab_size
        )));
    }
    Ok(())
}

/// Output logits at one position: `h E^T + b`.
fn logits(params: &ModelParams, h: ArrayView1<f64>) -> Array1<f64> {
    let lay = params.layout();
    let p = params.values();
    lay.tok_emb.mat(p).dot(&h) + &lay.out_bias.vec(p)
}

fn log_sum_exp(z: &Array1<f64>) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean masked-token negative log-likelihood of one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub value: f64,
    /// Number of predicted positions.
    pub positions: usize,
}

impl Loss {
    /// An instance without targets has loss 0 by convention.
    pub fn is_degenerate(&self) -> bool {
        self.positions == 0
    }
}

/// Loss and, when `grad` is given, its gradient scaled by `weight`.
fn instance_loss(params: &ModelParams, prep: &Prepared, grad: Option<(&mut [f64], f64)>) -> Loss {
    if prep.targets.is_empty() {
        return Loss { value: 0.0, positions: 0 };
    }
    let fwd = forward(params, &prep.ids);
    let m = prep.targets.len() as f64;
    let mut total = 0.0;
    let mut dz_all = Vec::with_capacity(prep.targets.len());
    for &(pos, y) in &prep.targets {
        let z = logits(params, fwd.hidden.row(pos));
        let lse = log_sum_exp(&z);
        total += lse - z[y];
        if grad.is_some() {
            let mut dz = z.mapv(|v| (v - lse).exp());
            dz[y] -= 1.0;
            dz_all.push((pos, dz));
        }
    }
    let value = total / m;
    if let Some((g, weight)) = grad {
        let lay = params.layout();
        let scale = weight / m;
        let mut dhidden = Array2::zeros(fwd.hidden.raw_dim());
        {
            let emb = lay.tok_emb.mat(params.values());
            for (pos, dz) in &dz_all {
                let dz = dz * scale;
                let mut drow = dhidden.row_mut(*pos);
                drow += &emb.t().dot(&dz);
            }
        }
        for (pos, dz) in &dz_all {
            let dz = dz * scale;
            let h = fwd.hidden.row(*pos);
            let mut demb = lay.tok_emb.mat_mut(g);
            for (v, &dzv) in dz.iter().enumerate() {
                if dzv != 0.0 {
                    demb.row_mut(v).scaled_add(dzv, &h);
                }
            }
            add_vec(&lay.out_bias, g, &dz);
        }
        backward(params, &fwd, dhidden, g);
    }
    Loss { value, positions: prep.targets.len() }
}

/// Mean negative log-likelihood over the target positions of `inst`.
pub fn mlm_loss(params: &ModelParams, vocab: &TokenVocab, inst: &MaskedInstance) -> Result<Loss, MlmError> {
    let prep = prepare(params, vocab, inst)?;
    Ok(instance_loss(params, &prep, None))
}

/// Gradient in the same flat layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
}

/// Mean batch loss and its exact gradient.
pub fn grad(params: &ModelParams, vocab: &TokenVocab, batch: &[MaskedInstance]) -> Result<(f64, Gradient), MlmError> {
    if batch.is_empty() {
        return Err(MlmError::EmptyBatch);
    }
    let prepared = batch
        .iter()
        .map(|inst| prepare(params, vocab, inst))
        .collect::<Result<Vec<_>, _>>()?;
    let weight = 1.0 / batch.len() as f64;
    let mut g = vec![0.0; params.len()];
    let mut loss = 0.0;
    for prep in &prepared {
        loss += instance_loss(params, prep, Some((&mut g, weight))).value;
    }
    Ok((loss * weight, Gradient { values: g }))
}

/// Mean-pooled, unit-normalized final hidden states of `[CLS] tokens [SEP]`
/// over the content positions.
pub fn embed<S: AsRef<str>>(params: &ModelParams, vocab: &TokenVocab, tokens: &[S]) -> Result<Vec<f64>, MlmError> {
    check_vocab(params, vocab)?;
    let content = vocab.ids(tokens)?;
    let mut ids = Vec::with_capacity(content.len() + 2);
    ids.push(vocab.cls_id());
    ids.extend(content);
    ids.push(vocab.sep_id());
    embed_ids(params, &ids)
}

/// Like [`embed`] for an id sequence that already carries cls/sep.
pub fn embed_ids(params: &ModelParams, ids: &[usize]) -> Result<Vec<f64>, MlmError> {
    let max_len = params.config().max_len;
    if ids.len() > max_len {
        return Err(MlmError::TooLong { len: ids.len(), max_len });
    }
    if ids.len() < 3 {
        return Err(MlmError::DegenerateEmbedding);
    }
    let fwd = forward(params, ids);
    let content = fwd.hidden.slice(s![1..ids.len() - 1, ..]);
    let mut mean = content.mean_axis(Axis(0)).expect("non-empty").to_vec();
    if !vector::normalize(&mut mean) {
        return Err(MlmError::DegenerateEmbedding);
    }
    Ok(mean)
}

#[cfg(test)]
pub(crate) fn hidden_states(params: &ModelParams, ids: &[usize]) -> Array2<f64> {
    forward(params, ids).hidden
}
