//! Single-layer LSTM cells and a bidirectional runner built from graph primitives.
//!
//! Gate layout in the stacked weights is `[input, forget, candidate, output]`.

use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{init_uniform, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct Lstm {
    pub input_size: usize,
    pub hidden: usize,
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
}

/// Graph handles for one forward pass through an [`Lstm`].
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    hidden: usize,
    w_x: Var,
    w_h: Var,
    bias: Var,
}

impl Lstm {
    /// Registers `{prefix}.w_x`, `{prefix}.w_h` and `{prefix}.bias`. Biases
    /// start at zero except the forget gate, which starts at one.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w_x = store.add(
            format!("{prefix}.w_x"),
            init_uniform(&[4 * hidden, input_size], input_size, rng),
        )?;
        let w_h = store.add(
            format!("{prefix}.w_h"),
            init_uniform(&[4 * hidden, hidden], hidden, rng),
        )?;
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{prefix}.bias"), Tensor::vector(b))?;
        Ok(Lstm {
            input_size,
            hidden,
            w_x,
            w_h,
            bias,
        })
    }

    /// Looks the weights up by name in a store that already holds them.
    pub fn attach(store: &ParamStore, prefix: &str, input_size: usize, hidden: usize) -> Result<Self> {
        let find = |suffix: &str| {
            store.find(&format!("{prefix}.{suffix}")).ok_or_else(|| {
                crate::error::Error::Checkpoint(format!("missing parameter {prefix}.{suffix}"))
            })
        };
        Ok(Lstm {
            input_size,
            hidden,
            w_x: find("w_x")?,
            w_h: find("w_h")?,
            bias: find("bias")?,
        })
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> LstmVars {
        LstmVars {
            hidden: self.hidden,
            w_x: g.param(store, self.w_x),
            w_h: g.param(store, self.w_h),
            bias: g.param(store, self.bias),
        }
    }

    pub fn zero_state(&self, g: &mut Graph) -> (Var, Var) {
        let h = g.constant(Tensor::zeros(&[self.hidden]));
        let c = g.constant(Tensor::zeros(&[self.hidden]));
        (h, c)
    }
}

/// One step: `i, f, o = sigmoid(.)`, `g = tanh(.)`, `c = f*c_prev + i*g`,
/// `h = o*tanh(c)`.
pub fn lstm_step(g: &mut Graph, p: &LstmVars, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
    let n = p.hidden;
    let zx = g.matvec(p.w_x, x)?;
    let zh = g.matvec(p.w_h, h_prev)?;
    let z = g.add(zx, zh)?;
    let z = g.add(z, p.bias)?;
    let i = g.slice(z, 0, n)?;
    let i = g.sigmoid(i);
    let f = g.slice(z, n, n)?;
    let f = g.sigmoid(f);
    let cand = g.slice(z, 2 * n, n)?;
    let cand = g.tanh(cand);
    let o = g.slice(z, 3 * n, n)?;
    let o = g.sigmoid(o);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Runs a unidirectional LSTM from the zero state, returning every hidden state.
pub fn run_lstm(g: &mut Graph, p: &LstmVars, inputs: &[Var]) -> Result<Vec<Var>> {
    let mut h = g.constant(Tensor::zeros(&[p.hidden]));
    let mut c = g.constant(Tensor::zeros(&[p.hidden]));
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        (h, c) = lstm_step(g, p, x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// Forward and backward passes with independent weights; position `t` yields
/// `[h_fwd_t; h_bwd_t]`.
pub fn run_bilstm(g: &mut Graph, fwd: &LstmVars, bwd: &LstmVars, inputs: &[Var]) -> Result<Vec<Var>> {
    let forward = run_lstm(g, fwd, inputs)?;
    let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
    let mut backward = run_lstm(g, bwd, &reversed)?;
    backward.reverse();
    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect()
}
