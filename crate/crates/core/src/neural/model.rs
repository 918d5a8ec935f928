//! Pointer-attention colorer.
//!
//! Edges are embedded from row/column one-hots, read by a forward and a
//! backward GRU, and decoded one edge at a time. At step `t` the decoder
//! attends over encoder states to build a context vector, advances its GRU,
//! and scores candidate input positions with `βᵀ tanh(W¹ s_j + W² d_t)`.
//! Pointing at itself gives edge `t` a fresh color; pointing at an earlier
//! edge copies that edge's color.
//!
//! Back-pointer candidates are the first edge of every color seen so far
//! (its representative). With a window `w`, attention spans positions
//! `t-w..=t+w` and only the `w` most recently opened colors are offered, so
//! decoding is linear in the sequence length.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gru::{GruParams, GruTrace};
use super::tensor::{axpy, dot, softmax, uniform_vec, Matrix};
use super::NeuralError;
use crate::pda::{verify, Grid};
use crate::seqcodec::{assemble_array, extract_edge_sequence, AdjacencyMatrix, ColorSequence, EdgeSequence};

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

/// Shapes and seed of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden width h of every GRU and of the attention layer.
    pub hidden: usize,
    /// Edge embedding width d.
    pub embed: usize,
    /// Largest row count F the embedding accepts.
    pub f_max: usize,
    /// Largest column count K the embedding accepts.
    pub k_max: usize,
    /// Attention half-span and back-pointer budget; `None` is global.
    pub window: Option<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: 16, embed: 16, f_max: 8, k_max: 8, window: None, seed: 0 }
    }
}

/// All learnable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// d × (F_max + K_max): row one-hots first, then column one-hots.
    pub embed: Matrix,
    pub fwd: GruParams,
    pub bwd: GruParams,
    /// Input is `[context (2h); previous edge (d); current edge (d)]`.
    pub dec: GruParams,
    pub beta: Vec<f64>,
    /// h × 2h, applied to encoder states.
    pub w1: Matrix,
    /// h × h, applied to decoder states.
    pub w2: Matrix,
    /// Stands in for the previous edge at the first decoding step.
    pub start: Vec<f64>,
}

impl ModelParams {
    /// Uniform initialization in `[-0.08, 0.08]` from `config.seed`.
    pub fn new(config: ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (h, d) = (config.hidden, config.embed);
        let s = INIT_SCALE;
        ModelParams {
            embed: Matrix::uniform(d, config.f_max + config.k_max, s, &mut rng),
            fwd: GruParams::uniform(d, h, s, &mut rng),
            bwd: GruParams::uniform(d, h, s, &mut rng),
            dec: GruParams::uniform(2 * h + 2 * d, h, s, &mut rng),
            beta: uniform_vec(h, s, &mut rng),
            w1: Matrix::uniform(h, 2 * h, s, &mut rng),
            w2: Matrix::uniform(h, h, s, &mut rng),
            start: uniform_vec(d, s, &mut rng),
            config,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed
    }

    /// `(name, shape, data)` for every tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let (h, d) = (self.hidden(), self.embed_dim());
        let mut out: Vec<(String, Vec<usize>, &[f64])> =
            vec![("embed".into(), vec![d, self.embed.cols()], self.embed.data())];
        for (prefix, g) in [("fwd", &self.fwd), ("bwd", &self.bwd), ("dec", &self.dec)] {
            out.extend(g.tensors().into_iter().map(|(n, s, t)| (format!("{prefix}.{n}"), s, t)));
        }
        out.push(("attn.beta".into(), vec![h], &self.beta));
        out.push(("attn.w1".into(), vec![h, 2 * h], self.w1.data()));
        out.push(("attn.w2".into(), vec![h, h], self.w2.data()));
        out.push(("start".into(), vec![d], &self.start));
        out
    }

    /// Mutable views matching the order of [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.embed.data_mut()];
        out.extend(self.fwd.tensors_mut());
        out.extend(self.bwd.tensors_mut());
        out.extend(self.dec.tensors_mut());
        out.push(&mut self.beta);
        out.push(self.w1.data_mut());
        out.push(self.w2.data_mut());
        out.push(&mut self.start);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// All parameters flattened in tensor order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|(_, _, t)| t.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, _, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, other: &ModelParams, alpha: f64) {
        let src: Vec<Vec<f64>> = other.tensors().iter().map(|(_, _, t)| t.to_vec()).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(&src) {
            axpy(alpha, s, dst);
        }
    }

    fn embed_edge(&self, (row, col): (usize, usize)) -> Result<Vec<f64>, NeuralError> {
        if row >= self.config.f_max || col >= self.config.k_max {
            return Err(NeuralError::VocabularyError {
                edge: (row, col),
                f_max: self.config.f_max,
                k_max: self.config.k_max,
            });
        }
        let mut x = vec![0.0; self.embed_dim()];
        self.embed.add_column_into(row, &mut x);
        self.embed.add_column_into(self.config.f_max + col, &mut x);
        Ok(x)
    }
}

/// Concatenated forward/backward states, one 2h vector per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStates {
    pub states: Vec<Vec<f64>>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

struct EncoderTrace {
    edges: Vec<(usize, usize)>,
    x: Vec<Vec<f64>>,
    fwd: Vec<GruTrace>,
    /// Indexed by position, not by processing order.
    bwd: Vec<GruTrace>,
    s: Vec<Vec<f64>>,
    /// `W¹ s_j`
    proj: Vec<Vec<f64>>,
}

fn encode_trace(params: &ModelParams, edges: &EdgeSequence) -> Result<EncoderTrace, NeuralError> {
    let h = params.hidden();
    let x = edges
        .iter()
        .map(|&e| params.embed_edge(e))
        .collect::<Result<Vec<_>, _>>()?;
    let l = x.len();
    let mut fwd = Vec::with_capacity(l);
    let mut state = vec![0.0; h];
    for xi in &x {
        let t = params.fwd.forward(xi, &state);
        state.clone_from(&t.y);
        fwd.push(t);
    }
    let mut bwd_rev = Vec::with_capacity(l);
    let mut state = vec![0.0; h];
    for xi in x.iter().rev() {
        let t = params.bwd.forward(xi, &state);
        state.clone_from(&t.y);
        bwd_rev.push(t);
    }
    bwd_rev.reverse();
    let s: Vec<Vec<f64>> = fwd
        .iter()
        .zip(&bwd_rev)
        .map(|(f, b)| [f.y.as_slice(), b.y.as_slice()].concat())
        .collect();
    let proj = s.iter().map(|sj| params.w1.matvec(sj)).collect();
    Ok(EncoderTrace { edges: edges.0.clone(), x, fwd, bwd: bwd_rev, s, proj })
}

/// Runs the bidirectional encoder.
pub fn encode(edges: &EdgeSequence, params: &ModelParams) -> Result<EncoderStates, NeuralError> {
    if edges.is_empty() {
        return Err(NeuralError::ShapeError("cannot encode an empty edge sequence".into()));
    }
    Ok(EncoderStates { states: encode_trace(params, edges)?.s })
}

/// Attention scores `βᵀ tanh(P_j + q)` over `positions`, with the tanh
/// activations kept for backprop.
fn score(params: &ModelParams, proj: &[Vec<f64>], positions: &[usize], q: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut logits = Vec::with_capacity(positions.len());
    let mut acts = Vec::with_capacity(positions.len());
    for &j in positions {
        let e: Vec<f64> = proj[j].iter().zip(q).map(|(p, q)| (p + q).tanh()).collect();
        logits.push(dot(&params.beta, &e));
        acts.push(e);
    }
    (logits, acts)
}

/// Pointer distribution over all `L` positions for decoder state `d_t`;
/// positions with `mask[l] == false` get probability 0.
pub fn decode_step(
    params: &ModelParams,
    states: &EncoderStates,
    d_t: &[f64],
    mask: &[bool],
) -> Result<Vec<f64>, NeuralError> {
    if mask.len() != states.len() || d_t.len() != params.hidden() {
        return Err(NeuralError::ShapeError(format!(
            "decode_step: {} states, mask of {}, decoder state of {}",
            states.len(),
            mask.len(),
            d_t.len()
        )));
    }
    let positions: Vec<usize> = (0..mask.len()).filter(|&l| mask[l]).collect();
    if positions.is_empty() {
        return Err(NeuralError::NoFeasibleAction);
    }
    let proj: Vec<Vec<f64>> = states.states.iter().map(|s| params.w1.matvec(s)).collect();
    let q = params.w2.matvec(d_t);
    let (logits, _) = score(params, &proj, &positions, &q);
    let mut out = vec![0.0; mask.len()];
    for (&j, p) in positions.iter().zip(softmax(&logits)) {
        out[j] = p;
    }
    Ok(out)
}

/// Turns pointer choices into colors: a self-pointer opens the next color,
/// a back-pointer copies the color of the edge it points at.
pub fn pointer_to_colors(choices: &[usize]) -> Result<ColorSequence, NeuralError> {
    let mut colors = Vec::with_capacity(choices.len());
    let mut next = 1;
    for (step, &target) in choices.iter().enumerate() {
        if target > step {
            return Err(NeuralError::InvalidPointer { step, target });
        }
        if target == step {
            colors.push(next);
            next += 1;
        } else {
            colors.push(colors[target]);
        }
    }
    Ok(ColorSequence(colors))
}

/// Pointer targets for a canonical color sequence: first occurrences point
/// at themselves, repeats at the first occurrence of their color.
pub fn encode_targets(colors: &ColorSequence) -> Result<Vec<usize>, NeuralError> {
    if !colors.is_canonical() {
        return Err(NeuralError::BadTarget(format!("colors {:?} are not canonical", colors.0)));
    }
    let mut first = Vec::new();
    Ok(colors
        .0
        .iter()
        .enumerate()
        .map(|(l, &c)| {
            let idx = c as usize - 1;
            if idx == first.len() {
                first.push(l);
            }
            first[idx]
        })
        .collect())
}

/// Bookkeeping of the colors assigned so far and which choices are allowed.
struct ColorState<'a> {
    edges: &'a [(usize, usize)],
    edge_set: HashSet<(usize, usize)>,
    /// Representative position of color `c` at index `c - 1`.
    reps: Vec<usize>,
    classes: Vec<Vec<(usize, usize)>>,
    colors: Vec<u32>,
    mask: bool,
    window: Option<usize>,
}

impl<'a> ColorState<'a> {
    fn new(edges: &'a EdgeSequence, mask: bool, window: Option<usize>) -> Self {
        ColorState {
            edges: &edges.0,
            edge_set: edges.iter().copied().collect(),
            reps: Vec::new(),
            classes: Vec::new(),
            colors: Vec::with_capacity(edges.len()),
            mask,
            window,
        }
    }

    /// Whether color class `c` (0-based) can take edge `(i, j)` without
    /// breaking C2 against its current members.
    fn compatible(&self, c: usize, (i, j): (usize, usize)) -> bool {
        self.classes[c].iter().all(|&(i2, j2)| {
            i2 != i && j2 != j && !self.edge_set.contains(&(i, j2)) && !self.edge_set.contains(&(i2, j))
        })
    }

    /// Candidate positions for step `t`, ascending; `t` itself is last.
    fn candidates(&self, t: usize) -> Vec<usize> {
        let first = match self.window {
            Some(w) => self.reps.len().saturating_sub(w),
            None => 0,
        };
        let mut out: Vec<usize> = (first..self.reps.len())
            .filter(|&c| !self.mask || self.compatible(c, self.edges[t]))
            .map(|c| self.reps[c])
            .collect();
        out.push(t);
        out
    }

    fn apply(&mut self, t: usize, target: usize) {
        let color = if target == t {
            self.reps.push(t);
            self.classes.push(Vec::new());
            self.reps.len() as u32
        } else {
            self.colors[target]
        };
        self.classes[color as usize - 1].push(self.edges[t]);
        self.colors.push(color);
    }
}

struct StepTrace {
    ctx_pos: Vec<usize>,
    ctx_act: Vec<Vec<f64>>,
    ctx_attn: Vec<f64>,
    gru: GruTrace,
    cand: Vec<usize>,
    ptr_act: Vec<Vec<f64>>,
    probs: Vec<f64>,
    /// Index into `cand`.
    choice: usize,
}

struct RunTrace {
    enc: EncoderTrace,
    steps: Vec<StepTrace>,
    choices: Vec<usize>,
    colors: Vec<u32>,
    logprob: f64,
}

enum Chooser<'a> {
    Forced(&'a [usize]),
    Greedy,
    Sample(&'a mut ChaCha8Rng),
}

fn context_positions(t: usize, l: usize, window: Option<usize>) -> std::ops::Range<usize> {
    match window {
        Some(w) => t.saturating_sub(w)..(t + w + 1).min(l),
        None => 0..l,
    }
}

fn run(
    params: &ModelParams,
    edges: &EdgeSequence,
    mask: bool,
    mut chooser: Chooser<'_>,
) -> Result<RunTrace, NeuralError> {
    let enc = encode_trace(params, edges)?;
    let (h, l) = (params.hidden(), edges.len());
    let window = params.config.window;
    let mut state = ColorState::new(edges, mask, window);
    let mut steps = Vec::with_capacity(l);
    let mut choices = Vec::with_capacity(l);
    let mut logprob = 0.0;
    let mut d_prev = vec![0.0; h];

    for t in 0..l {
        // context from the previous decoder state
        let ctx_pos: Vec<usize> = context_positions(t, l, window).collect();
        let q_prev = params.w2.matvec(&d_prev);
        let (ctx_logits, ctx_act) = score(params, &enc.proj, &ctx_pos, &q_prev);
        let ctx_attn = softmax(&ctx_logits);
        let mut input = vec![0.0; 2 * h];
        for (&j, &a) in ctx_pos.iter().zip(&ctx_attn) {
            axpy(a, &enc.s[j], &mut input);
        }
        input.extend_from_slice(if t == 0 { &params.start } else { &enc.x[t - 1] });
        input.extend_from_slice(&enc.x[t]);
        let gru = params.dec.forward(&input, &d_prev);

        let cand = state.candidates(t);
        let q = params.w2.matvec(&gru.y);
        let (logits, ptr_act) = score(params, &enc.proj, &cand, &q);
        let probs = softmax(&logits);
        let choice = match &mut chooser {
            Chooser::Forced(targets) => cand.iter().position(|&c| c == targets[t]).ok_or_else(|| {
                NeuralError::BadTarget(format!("step {t} target {} is not an allowed pointer", targets[t]))
            })?,
            Chooser::Greedy => argmax(&probs),
            Chooser::Sample(rng) => sample(&probs, rng),
        };
        logprob += probs[choice].ln();
        state.apply(t, cand[choice]);
        choices.push(cand[choice]);
        d_prev.clone_from(&gru.y);
        steps.push(StepTrace { ctx_pos, ctx_act, ctx_attn, gru, cand, ptr_act, probs, choice });
    }
    Ok(RunTrace { enc, steps, choices, colors: state.colors, logprob })
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn sample(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Backprop of `coeff · Σ_t log p_t(choice_t)` into `grads`.
fn backward(params: &ModelParams, trace: &RunTrace, coeff: f64, grads: &mut ModelParams) {
    let h = params.hidden();
    let d = params.embed_dim();
    let l = trace.steps.len();
    let enc = &trace.enc;
    let mut d_proj = vec![vec![0.0; h]; l];
    let mut d_s = vec![vec![0.0; 2 * h]; l];
    let mut d_x = vec![vec![0.0; d]; l];
    let mut dd_carry = vec![0.0; h];

    // shared by both attention uses: scores βᵀ tanh(P_j + q)
    let attend_back = |positions: &[usize],
                       acts: &[Vec<f64>],
                       dlogits: &[f64],
                       grads: &mut ModelParams,
                       d_proj: &mut [Vec<f64>]|
     -> Vec<f64> {
        let mut dq = vec![0.0; h];
        for ((&j, e), &du) in positions.iter().zip(acts).zip(dlogits) {
            if du == 0.0 {
                continue;
            }
            axpy(du, e, &mut grads.beta);
            for k in 0..h {
                let dpre = du * params.beta[k] * (1.0 - e[k] * e[k]);
                d_proj[j][k] += dpre;
                dq[k] += dpre;
            }
        }
        dq
    };

    for t in (0..l).rev() {
        let st = &trace.steps[t];
        let d_t = &st.gru.y;

        // pointer softmax
        let dlogits: Vec<f64> = st
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| coeff * (if i == st.choice { 1.0 } else { 0.0 } - p))
            .collect();
        let dq = attend_back(&st.cand, &st.ptr_act, &dlogits, grads, &mut d_proj);
        grads.w2.add_outer(&dq, d_t);
        let mut dd = std::mem::take(&mut dd_carry);
        params.w2.t_matvec_add(&dq, &mut dd);

        // decoder GRU
        let (d_in, mut dd_prev) = params.dec.backward(&st.gru, &dd, &mut grads.dec);
        let (dc, rest) = d_in.split_at(2 * h);
        let (d_prev_edge, d_cur_edge) = rest.split_at(d);
        axpy(1.0, d_cur_edge, &mut d_x[t]);
        if t == 0 {
            axpy(1.0, d_prev_edge, &mut grads.start);
        } else {
            axpy(1.0, d_prev_edge, &mut d_x[t - 1]);
        }

        // context attention
        let da: Vec<f64> = st.ctx_pos.iter().map(|&j| dot(dc, &enc.s[j])).collect();
        let mean: f64 = st.ctx_attn.iter().zip(&da).map(|(a, g)| a * g).sum();
        let du: Vec<f64> = st.ctx_attn.iter().zip(&da).map(|(a, g)| a * (g - mean)).collect();
        for (&j, &a) in st.ctx_pos.iter().zip(&st.ctx_attn) {
            axpy(a, dc, &mut d_s[j]);
        }
        let dq_prev = attend_back(&st.ctx_pos, &st.ctx_act, &du, grads, &mut d_proj);
        // d_{-1} is the constant zero vector
        if t > 0 {
            let d_prev = &trace.steps[t - 1].gru.y;
            grads.w2.add_outer(&dq_prev, d_prev);
            params.w2.t_matvec_add(&dq_prev, &mut dd_prev);
        }
        dd_carry = dd_prev;
    }

    for j in 0..l {
        grads.w1.add_outer(&d_proj[j], &enc.s[j]);
        params.w1.t_matvec_add(&d_proj[j], &mut d_s[j]);
    }

    let mut carry = vec![0.0; h];
    for j in (0..l).rev() {
        let mut dy = d_s[j][..h].to_vec();
        axpy(1.0, &carry, &mut dy);
        let (dx, dprev) = params.fwd.backward(&enc.fwd[j], &dy, &mut grads.fwd);
        axpy(1.0, &dx, &mut d_x[j]);
        carry = dprev;
    }
    let mut carry = vec![0.0; h];
    for j in 0..l {
        let mut dy = d_s[j][h..].to_vec();
        axpy(1.0, &carry, &mut dy);
        let (dx, dprev) = params.bwd.backward(&enc.bwd[j], &dy, &mut grads.bwd);
        axpy(1.0, &dx, &mut d_x[j]);
        carry = dprev;
    }

    let f_max = params.config.f_max;
    for (&(row, col), dx) in enc.edges.iter().zip(&d_x) {
        grads.embed.add_to_column(row, dx);
        grads.embed.add_to_column(f_max + col, dx);
    }
}

/// `log p(choices | edges)` and, when `grads` is given, accumulates
/// `coeff · ∇ log p` into it. Candidate sets follow `mask` exactly as in
/// [`rollout`].
pub fn sequence_log_prob(
    params: &ModelParams,
    edges: &EdgeSequence,
    choices: &[usize],
    mask: bool,
    grad: Option<(f64, &mut ModelParams)>,
) -> Result<f64, NeuralError> {
    if choices.len() != edges.len() {
        return Err(NeuralError::ShapeError(format!(
            "{} choices for {} edges",
            choices.len(),
            edges.len()
        )));
    }
    if edges.is_empty() {
        return Ok(0.0);
    }
    let trace = run(params, edges, mask, Chooser::Forced(choices))?;
    if let Some((coeff, grads)) = grad {
        backward(params, &trace, coeff, grads);
    }
    Ok(trace.logprob)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// One decoded coloring and its verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub adjacency: AdjacencyMatrix,
    pub edges: EdgeSequence,
    pub colors: ColorSequence,
    pub choices: Vec<usize>,
    pub logprob: f64,
    /// +1 when the assembled array is a PDA, -1 otherwise.
    pub reward: f64,
    pub grid: Grid,
    /// Whether the C2 feasibility mask shaped the candidate sets.
    pub mask: bool,
}

impl Episode {
    pub fn is_valid(&self) -> bool {
        self.reward > 0.0
    }
}

/// Colors the edges of `adjacency` (column-major order) with the model.
pub fn rollout(
    adjacency: &AdjacencyMatrix,
    params: &ModelParams,
    mode: DecodeMode,
    mask: bool,
    seed: u64,
) -> Result<Episode, NeuralError> {
    let edges = extract_edge_sequence(adjacency);
    let (choices, colors, logprob) = if edges.is_empty() {
        (Vec::new(), Vec::new(), 0.0)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chooser = match mode {
            DecodeMode::Greedy => Chooser::Greedy,
            DecodeMode::Sample => Chooser::Sample(&mut rng),
        };
        let trace = run(params, &edges, mask, chooser)?;
        (trace.choices, trace.colors, trace.logprob)
    };
    let colors = ColorSequence(colors);
    let grid = assemble_array(adjacency, &edges, &colors)?;
    let reward = if verify(&grid).valid { 1.0 } else { -1.0 };
    Ok(Episode { adjacency: adjacency.clone(), edges, colors, choices, logprob, reward, grid, mask })
}
