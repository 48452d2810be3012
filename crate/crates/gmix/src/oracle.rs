//! Exact brute-force ground truth for small finite-memory, finite-alphabet
//! models: marginal laws by transfer-operator iteration and the exact
//! per-block failure probabilities of the block-maximal coupling.
//!
//! Capacity limits are explicit parameters with hard errors; an oracle is
//! exact or absent.

use crate::coupling::BlockSchedule;
use crate::divergence::{tv_slice, Dist};
use crate::error::{GmixError, Result};
use crate::history::History;
use crate::potential::{MarkovModel, PotentialModel};

/// Probability vector over the `|A|^m` context states of a Markov model.
#[derive(Debug, Clone)]
pub struct StateDist {
    pub probs: Vec<f64>,
}

impl StateDist {
    fn point(idx: usize, n: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[idx] = 1.0;
        Self { probs }
    }
}

fn require_markov(model: &PotentialModel) -> Result<&MarkovModel> {
    match model {
        PotentialModel::Markov(m) => Ok(m),
        _ => Err(GmixError::InvalidArgument(
            "oracle requires a finite-order Markov model".into(),
        )),
    }
}

fn shifted_context(m: &MarkovModel, ctx: usize, symbol: usize) -> usize {
    if m.order == 0 {
        return 0;
    }
    let a = m.alphabet_size;
    let keep = a.pow(m.order as u32 - 1);
    symbol + (ctx % keep) * a
}

const STATE_CAP: usize = 1_000_000;

/// Exact law of `eta_n` under the chain started from past `y`.
pub fn exact_marginal(model: &PotentialModel, y: &History, n: u64) -> Result<Dist> {
    let m = require_markov(model)?;
    let a = m.alphabet_size;
    let n_ctx = a.pow(m.order as u32);
    if n_ctx > STATE_CAP {
        return Err(GmixError::Capacity {
            context: "oracle state space",
            needed: n_ctx as u128,
            limit: STATE_CAP as u128,
        });
    }
    if n == 0 {
        return Err(GmixError::InvalidArgument("coordinate index must be >= 1".into()));
    }
    let mut dist = StateDist::point(m.context_index(y), n_ctx);
    let mut marginal = vec![0.0; a];
    for step in 1..=n {
        let mut next = vec![0.0; n_ctx];
        if step == n {
            marginal.iter_mut().for_each(|x| *x = 0.0);
        }
        for (ctx, &w) in dist.probs.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = m.row(ctx);
            for (s, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                next[shifted_context(m, ctx, s)] += w * p;
                if step == n {
                    marginal[s] += w * p;
                }
            }
        }
        dist.probs = next;
    }
    Dist::new(marginal.iter().map(|&p| p.max(0.0)).collect()).or_else(|_| {
        // tiny negative rounding already clipped; renormalize drift
        Dist::from_weights(marginal)
    })
}

/// Exact `d_TV(law of eta_n from y, law of eta_n from z)`.
pub fn exact_tv_coordinate(
    model: &PotentialModel,
    y: &History,
    z: &History,
    n: u64,
) -> Result<f64> {
    let py = exact_marginal(model, y, n)?;
    let pz = exact_marginal(model, z, n)?;
    Ok(tv_slice(py.probs(), pz.probs()))
}

/// Exact `P[X_n = 1]` for `n = 1..=n_max` under the block-maximal coupling,
/// by propagating the full coupled-state distribution.
pub fn exact_block_coupling_fail(
    model: &PotentialModel,
    y: &History,
    z: &History,
    schedule: &BlockSchedule,
    n_max: u64,
    max_block_states: usize,
) -> Result<Vec<f64>> {
    let m = require_markov(model)?;
    let a = m.alphabet_size;
    let n_ctx = a.pow(m.order as u32);
    if n_ctx * n_ctx > STATE_CAP {
        return Err(GmixError::Capacity {
            context: "oracle coupled state space",
            needed: (n_ctx * n_ctx) as u128,
            limit: STATE_CAP as u128,
        });
    }
    // coupled mass over (ctx_y, ctx_z)
    let mut mass = vec![0.0; n_ctx * n_ctx];
    mass[m.context_index(y) * n_ctx + m.context_index(z)] = 1.0;
    let mut out = Vec::with_capacity(n_max as usize);

    for n in 1..=n_max {
        let (lo, hi) = schedule.block_bounds(n);
        let len = (hi - lo) as usize;
        let outcomes = (a as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
        if outcomes > max_block_states as u128 {
            return Err(GmixError::Capacity {
                context: "oracle block enumeration",
                needed: outcomes,
                limit: max_block_states as u128,
            });
        }
        let outcomes = outcomes as usize;
        let mut laws: Vec<Option<Vec<f64>>> = vec![None; n_ctx];
        let block_law_from = |ctx: usize| -> Vec<f64> {
            let mut law = vec![0.0; outcomes];
            // iterative DFS over outcomes in digit order
            fn walk(
                m: &MarkovModel,
                ctx: usize,
                depth_left: usize,
                prob: f64,
                idx: usize,
                stride: usize,
                law: &mut [f64],
            ) {
                if depth_left == 0 {
                    law[idx] += prob;
                    return;
                }
                let row = m.row(ctx);
                for (s, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    walk(
                        m,
                        shifted_context(m, ctx, s),
                        depth_left - 1,
                        prob * p,
                        idx + s * stride,
                        stride * m.alphabet_size,
                        law,
                    );
                }
            }
            walk(m, ctx, len, 1.0, 0, 1, &mut law);
            law
        };
        let end_context = |start_ctx: usize, outcome: usize| -> usize {
            let mut ctx = start_ctx;
            let mut w = outcome;
            for _ in 0..len {
                ctx = shifted_context(m, ctx, w % a);
                w /= a;
            }
            ctx
        };

        let mut fail = 0.0;
        let mut next = vec![0.0; n_ctx * n_ctx];
        for cy in 0..n_ctx {
            for cz in 0..n_ctx {
                let w = mass[cy * n_ctx + cz];
                if w == 0.0 {
                    continue;
                }
                if laws[cy].is_none() {
                    laws[cy] = Some(block_law_from(cy));
                }
                if laws[cz].is_none() {
                    laws[cz] = Some(block_law_from(cz));
                }
                let p = laws[cy].as_ref().unwrap().clone();
                let q = laws[cz].as_ref().unwrap().clone();
                let tvpq = tv_slice(&p, &q);
                fail += w * tvpq;
                // diagonal (met) part
                for o in 0..outcomes {
                    let c = p[o].min(q[o]);
                    if c > 0.0 {
                        let e = end_context(cy, o);
                        debug_assert_eq!(e, end_context(cz, o));
                        next[e * n_ctx + e] += w * c;
                    }
                }
                if tvpq > 0.0 {
                    // independent residuals, pushed through per-chain end states
                    let mut uy = vec![0.0; n_ctx];
                    let mut uz = vec![0.0; n_ctx];
                    for o in 0..outcomes {
                        let ry = (p[o] - q[o]).max(0.0);
                        if ry > 0.0 {
                            uy[end_context(cy, o)] += ry;
                        }
                        let rz = (q[o] - p[o]).max(0.0);
                        if rz > 0.0 {
                            uz[end_context(cz, o)] += rz;
                        }
                    }
                    for (ey, &wy) in uy.iter().enumerate() {
                        if wy == 0.0 {
                            continue;
                        }
                        for (ez, &wz) in uz.iter().enumerate() {
                            if wz == 0.0 {
                                continue;
                            }
                            next[ey * n_ctx + ez] += w * wy * wz / tvpq;
                        }
                    }
                }
            }
        }
        mass = next;
        out.push(fail.clamp(0.0, 1.0));
    }
    Ok(out)
}
