//! Block coupling of two chains started from different pasts.
//!
//! Coordinates are tiled into blocks `[M_n, M_{n+1})` with `M_n = floor(n^beta)`.
//! Given both realized pasts, each block of the two chains is coupled so that
//! every marginal stays exactly compatible with the kernel, and the indicator
//! `X_n` records whether the chains disagreed anywhere inside block `n`.
//! Disagreement frequencies estimated here sit below the certified renewal
//! bound computed in [`crate::renewal`].

use rand::Rng;
use rayon::prelude::*;

use crate::divergence::maximal_coupling_sample_slice;
use crate::error::{GmixError, Result};
use crate::history::{ExtendedPast, History};
use crate::num::binomial_se;
use crate::potential::{Alphabet, PotentialModel};
use crate::rng::RngStream;

/// Block boundaries `M_n = floor(n^beta)`, `beta >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchedule {
    beta: f64,
}

impl BlockSchedule {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 1.0) {
            return Err(GmixError::InvalidArgument(format!(
                "block exponent beta must be >= 1, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `M_n`; exact integer arithmetic when beta is integral.
    pub fn block_start(&self, n: u64) -> u128 {
        if self.beta.fract() == 0.0 && self.beta <= 8.0 {
            (n as u128).pow(self.beta as u32)
        } else {
            (n as f64).powf(self.beta).floor() as u128
        }
    }

    /// The coordinate interval `[M_n, M_{n+1})` of block `n >= 1`.
    pub fn block_bounds(&self, n: u64) -> (u128, u128) {
        (self.block_start(n), self.block_start(n + 1))
    }

    /// Number of blocks needed so that coordinate `k` is covered.
    pub fn blocks_covering(&self, k: u128) -> u64 {
        let mut n = 1u64;
        while self.block_start(n + 1) <= k {
            n += 1;
        }
        n
    }
}

/// How a block of the two chains is coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Exact maximal coupling of the two full-block conditional laws, by
    /// enumeration of all `|A|^L` outcomes. Attains the block TV distance;
    /// this is the construction whose failure probability the renewal bound
    /// certifies.
    BlockMaximal { max_block_states: usize },
    /// Maximal coupling one coordinate at a time given the coupled
    /// within-block past. Scales to long blocks and countable alphabets; a
    /// valid coupling of the two chains but not block-maximal, so results
    /// under it are diagnostic only.
    CoordinateSequential,
}

/// Outcome of one coupled run.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    /// `X_1 .. X_N`: disagreement indicator per block.
    pub x_indicators: Vec<bool>,
    /// First block index after which all later blocks agree within the
    /// horizon; `None` when the final block still disagrees (right-censored).
    pub theta_block: Option<u64>,
    /// Realized coordinate trajectories, when retained.
    pub trajectories: Option<(Vec<u32>, Vec<u32>)>,
}

/// Two chains evolving under a common coupling.
pub struct CoupledChains<'m> {
    model: &'m PotentialModel,
    base_y: History,
    base_z: History,
    pub seq_y: Vec<u32>,
    pub seq_z: Vec<u32>,
}

impl<'m> CoupledChains<'m> {
    pub fn new(model: &'m PotentialModel, y: History, z: History) -> Self {
        Self { model, base_y: y, base_z: z, seq_y: Vec::new(), seq_z: Vec::new() }
    }

    fn past_y(&self) -> ExtendedPast<'_> {
        ExtendedPast { base: &self.base_y, appended: &self.seq_y }
    }

    fn past_z(&self) -> ExtendedPast<'_> {
        ExtendedPast { base: &self.base_z, appended: &self.seq_z }
    }

    /// Advance both chains through block `n`; returns `X_n`.
    ///
    /// Both full realized blocks are appended to their chains' pasts whether
    /// or not they agree; the construction never resets histories.
    pub fn step_block<R: Rng>(
        &mut self,
        schedule: &BlockSchedule,
        n: u64,
        mode: CouplingMode,
        rng: &mut R,
    ) -> Result<bool> {
        let (lo, hi) = schedule.block_bounds(n);
        let len = (hi - lo) as usize;
        debug_assert_eq!(self.seq_y.len() as u128 + 1, lo, "blocks must be stepped in order");
        match mode {
            CouplingMode::BlockMaximal { max_block_states } => {
                self.step_block_maximal(len, max_block_states, rng)
            }
            CouplingMode::CoordinateSequential => {
                let mut differ = false;
                for _ in 0..len {
                    let (a, b) = self.couple_one_coordinate(rng);
                    differ |= a != b;
                    self.seq_y.push(a);
                    self.seq_z.push(b);
                }
                Ok(differ)
            }
        }
    }

    fn couple_one_coordinate<R: Rng>(&self, rng: &mut R) -> (u32, u32) {
        let mut p = self.model.cond_dist(&self.past_y());
        let mut q = self.model.cond_dist(&self.past_z());
        // countable supports are truncated independently; align them
        let len = p.len().max(q.len());
        p.resize(len, 0.0);
        q.resize(len, 0.0);
        let (a, b) = maximal_coupling_sample_slice(&p, &q, rng);
        (a as u32, b as u32)
    }

    fn step_block_maximal<R: Rng>(
        &mut self,
        len: usize,
        max_block_states: usize,
        rng: &mut R,
    ) -> Result<bool> {
        let a = match self.model.alphabet() {
            Alphabet::Finite(a) => a,
            Alphabet::CountableNonNegInts => {
                return Err(GmixError::Capacity {
                    context: "block-maximal enumeration over a countable alphabet",
                    needed: u128::MAX,
                    limit: max_block_states as u128,
                })
            }
        };
        let states = (a as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
        if states > max_block_states as u128 {
            return Err(GmixError::Capacity {
                context: "block-maximal enumeration",
                needed: states,
                limit: max_block_states as u128,
            });
        }
        let p = block_law(self.model, &self.base_y, &self.seq_y, a, len);
        let q = block_law(self.model, &self.base_z, &self.seq_z, a, len);
        let (i, j) = maximal_coupling_sample_slice(&p, &q, rng);
        let wy = decode_block(i, a, len);
        let wz = decode_block(j, a, len);
        let differ = wy != wz;
        self.seq_y.extend_from_slice(&wy);
        self.seq_z.extend_from_slice(&wz);
        Ok(differ)
    }
}

/// Joint law of the next `len` coordinates given a realized past, as a dense
/// vector over all `a^len` outcomes. Outcome index uses the first block
/// coordinate as the least significant digit.
fn block_law(
    model: &PotentialModel,
    base: &History,
    seq: &[u32],
    a: usize,
    len: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; a.pow(len as u32)];
    let mut scratch: Vec<u32> = Vec::with_capacity(seq.len() + len);
    scratch.extend_from_slice(seq);
    // depth-first over the outcome tree, sharing conditional evaluations
    fn walk(
        model: &PotentialModel,
        base: &History,
        scratch: &mut Vec<u32>,
        depth_left: usize,
        a: usize,
        prob: f64,
        idx: usize,
        stride: usize,
        out: &mut [f64],
    ) {
        if depth_left == 0 {
            out[idx] = prob;
            return;
        }
        let past = ExtendedPast { base, appended: scratch };
        let cond = model.cond_dist(&past);
        for s in 0..a {
            let p = prob * cond[s];
            if p == 0.0 {
                continue;
            }
            scratch.push(s as u32);
            walk(model, base, scratch, depth_left - 1, a, p, idx + s * stride, stride * a, out);
            scratch.pop();
        }
    }
    walk(model, base, &mut scratch, len, a, 1.0, 0, 1, &mut out);
    out
}

fn decode_block(mut idx: usize, a: usize, len: usize) -> Vec<u32> {
    let mut w = Vec::with_capacity(len);
    for _ in 0..len {
        w.push((idx % a) as u32);
        idx /= a;
    }
    w
}

/// Run the block coupling for `n_blocks` blocks.
pub fn run_coupling(
    model: &PotentialModel,
    y: &History,
    z: &History,
    n_blocks: u64,
    schedule: &BlockSchedule,
    mode: CouplingMode,
    stream: &RngStream,
    retain_trajectories: bool,
) -> Result<CoupledRun> {
    let mut rng = stream.rng();
    let mut chains = CoupledChains::new(model, y.clone(), z.clone());
    let mut x = Vec::with_capacity(n_blocks as usize);
    for n in 1..=n_blocks {
        x.push(chains.step_block(schedule, n, mode, &mut rng)?);
    }
    let last_fail = x.iter().rposition(|&b| b).map(|i| i as u64 + 1);
    let theta_block = match last_fail {
        None => Some(1),
        Some(n) if n < n_blocks => Some(n + 1),
        Some(_) => None,
    };
    Ok(CoupledRun {
        x_indicators: x,
        theta_block,
        trajectories: retain_trajectories.then_some((chains.seq_y, chains.seq_z)),
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

fn replicate_counts<F>(replicates: usize, stream: &RngStream, n_slots: usize, per_rep: F) -> Result<Vec<u64>>
where
    F: Fn(&RngStream, &mut [u64]) -> Result<()> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .try_fold(
            || vec![0u64; n_slots],
            |mut acc, i| {
                per_rep(&stream.substream(i as u64), &mut acc)?;
                Ok::<Vec<u64>, GmixError>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n_slots],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}

/// Monte Carlo estimates of `P[X_n = 1]` for `n = 1..=n_blocks`.
pub fn estimate_block_disagreement(
    model: &PotentialModel,
    y: &History,
    z: &History,
    n_blocks: u64,
    replicates: usize,
    schedule: &BlockSchedule,
    mode: CouplingMode,
    stream: &RngStream,
) -> Result<Vec<Estimate>> {
    let counts = replicate_counts(replicates, stream, n_blocks as usize, |s, acc| {
        let run = run_coupling(model, y, z, n_blocks, schedule, mode, s, false)?;
        for (slot, &hit) in acc.iter_mut().zip(&run.x_indicators) {
            *slot += u64::from(hit);
        }
        Ok(())
    })?;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / replicates as f64;
            Estimate { value: p, se: binomial_se(p, replicates) }
        })
        .collect())
}

/// Per-coordinate disagreement frequencies `P[eta_k != omega_k]`; each is an
/// upper estimate of the relaxation rate at that coordinate.
pub fn estimate_coordinate_disagreement(
    model: &PotentialModel,
    y: &History,
    z: &History,
    coords: &[u64],
    replicates: usize,
    schedule: &BlockSchedule,
    mode: CouplingMode,
    stream: &RngStream,
) -> Result<Vec<Estimate>> {
    let max_k = *coords.iter().max().ok_or_else(|| {
        GmixError::InvalidArgument("coordinate list must be nonempty".into())
    })?;
    let n_blocks = schedule.blocks_covering(max_k as u128);
    let counts = replicate_counts(replicates, stream, coords.len(), |s, acc| {
        let run = run_coupling(model, y, z, n_blocks, schedule, mode, s, true)?;
        let (sy, sz) = run.trajectories.as_ref().unwrap();
        for (slot, &k) in acc.iter_mut().zip(coords) {
            let i = (k - 1) as usize;
            *slot += u64::from(sy[i] != sz[i]);
        }
        Ok(())
    })?;
    Ok(counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / replicates as f64;
            Estimate { value: p, se: binomial_se(p, replicates) }
        })
        .collect())
}

/// Tail of the meeting time: estimates of `P[theta > k]` for each requested
/// `k`, right-censored at the simulated horizon.
#[derive(Debug, Clone)]
pub struct MeetingTailEstimate {
    pub k: u64,
    pub estimate: Estimate,
    /// Largest simulated coordinate; disagreements beyond it are invisible,
    /// so `estimate` is a lower (censored) estimate of the true tail.
    pub censored_at: u128,
}

pub fn estimate_meeting_tail(
    model: &PotentialModel,
    y: &History,
    z: &History,
    ks: &[u64],
    horizon_blocks: u64,
    replicates: usize,
    schedule: &BlockSchedule,
    mode: CouplingMode,
    stream: &RngStream,
) -> Result<Vec<MeetingTailEstimate>> {
    let horizon_coord = schedule.block_start(horizon_blocks + 1) - 1;
    if let Some(&bad) = ks.iter().find(|&&k| k as u128 > horizon_coord) {
        return Err(GmixError::InvalidArgument(format!(
            "k = {bad} exceeds the simulated horizon {horizon_coord}"
        )));
    }
    let counts = replicate_counts(replicates, stream, ks.len(), |s, acc| {
        let run = run_coupling(model, y, z, horizon_blocks, schedule, mode, s, true)?;
        let (sy, sz) = run.trajectories.as_ref().unwrap();
        // last disagreeing coordinate, if any
        let last = sy
            .iter()
            .zip(sz)
            .rposition(|(a, b)| a != b)
            .map(|i| i as u64 + 1);
        if let Some(d) = last {
            for (slot, &k) in acc.iter_mut().zip(ks) {
                // theta > k iff some coordinate >= k disagrees
                *slot += u64::from(d >= k);
            }
        }
        Ok(())
    })?;
    Ok(counts
        .into_iter()
        .zip(ks)
        .map(|(c, &k)| {
            let p = c as f64 / replicates as f64;
            MeetingTailEstimate {
                k,
                estimate: Estimate { value: p, se: binomial_se(p, replicates) },
                censored_at: horizon_coord,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{two_state_example, LongMemoryBinaryModel};

    const BM: CouplingMode = CouplingMode::BlockMaximal { max_block_states: 1 << 20 };

    #[test]
    fn block_bounds_follow_the_floor_formula() {
        let s1 = BlockSchedule::new(1.0).unwrap();
        assert_eq!(s1.block_bounds(5), (5, 6));
        let s2 = BlockSchedule::new(2.0).unwrap();
        assert_eq!(s2.block_bounds(2), (4, 9));
        let s15 = BlockSchedule::new(1.5).unwrap();
        assert_eq!(s15.block_bounds(3), (5, 8));
        assert!(BlockSchedule::new(0.9).is_err());
        assert_eq!(s2.blocks_covering(8), 2);
        assert_eq!(s2.blocks_covering(9), 3);
    }

    #[test]
    fn identical_pasts_never_disagree() {
        let model = two_state_example();
        let y = History::constant(0);
        let run = run_coupling(
            &model,
            &y,
            &y,
            30,
            &BlockSchedule::new(1.0).unwrap(),
            BM,
            &RngStream::new(1, 0),
            false,
        )
        .unwrap();
        assert!(run.x_indicators.iter().all(|&b| !b));
        assert_eq!(run.theta_block, Some(1));
    }

    #[test]
    fn iid_blocks_always_agree() {
        let model = PotentialModel::iid(vec![0.3, 0.7]).unwrap();
        let y = History::constant(0);
        let z = History::constant(1);
        for mode in [BM, CouplingMode::CoordinateSequential] {
            let ests = estimate_block_disagreement(
                &model,
                &y,
                &z,
                10,
                500,
                &BlockSchedule::new(1.5).unwrap(),
                mode,
                &RngStream::new(2, 0),
            )
            .unwrap();
            assert!(ests.iter().all(|e| e.value == 0.0));
        }
    }

    #[test]
    fn one_step_disagreement_equals_row_tv() {
        // P[X_1 = 1 | y, z] is exactly the TV between the two one-step rows
        let model = two_state_example();
        let y = History::constant(0);
        let z = History::constant(1);
        let reps = 40_000;
        let ests = estimate_block_disagreement(
            &model,
            &y,
            &z,
            1,
            reps,
            &BlockSchedule::new(1.0).unwrap(),
            BM,
            &RngStream::new(3, 0),
        )
        .unwrap();
        assert!((ests[0].value - 0.7).abs() <= 3.0 * ests[0].se, "{}", ests[0].value);
    }

    #[test]
    fn capacity_error_on_oversized_blocks() {
        let model = two_state_example();
        let y = History::constant(0);
        let z = History::constant(1);
        let err = run_coupling(
            &model,
            &y,
            &z,
            3,
            &BlockSchedule::new(2.0).unwrap(),
            CouplingMode::BlockMaximal { max_block_states: 8 },
            &RngStream::new(4, 0),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, GmixError::Capacity { .. }));
    }

    #[test]
    fn reproducible_under_fixed_stream() {
        let model = two_state_example();
        let y = History::constant(0);
        let z = History::constant(1);
        let s = &BlockSchedule::new(1.5).unwrap();
        let stream = RngStream::new(5, 0);
        let a = run_coupling(&model, &y, &z, 8, s, BM, &stream, true).unwrap();
        let b = run_coupling(&model, &y, &z, 8, s, BM, &stream, true).unwrap();
        assert_eq!(a.x_indicators, b.x_indicators);
        assert_eq!(a.trajectories, b.trajectories);
    }

    #[test]
    fn marginals_survive_the_coupling() {
        // each coupled chain's one-step conditional frequencies given the
        // realized state match the kernel rows
        let model = two_state_example();
        let y = History::constant(0);
        let z = History::constant(1);
        let mut counts = [[0usize; 2]; 2]; // [state][next] for chain y
        let mut rng_stream = 0u64;
        for _ in 0..4000 {
            let run = run_coupling(
                &model,
                &y,
                &z,
                12,
                &BlockSchedule::new(1.0).unwrap(),
                BM,
                &RngStream::new(6, rng_stream),
                true,
            )
            .unwrap();
            rng_stream += 1;
            let (sy, _) = run.trajectories.unwrap();
            let mut prev = 0usize; // base history is constant 0
            for &s in &sy {
                counts[prev][s as usize] += 1;
                prev = s as usize;
            }
        }
        let rows = [[0.9, 0.1], [0.2, 0.8]];
        for st in 0..2 {
            let tot: usize = counts[st].iter().sum();
            let f = counts[st][1] as f64 / tot as f64;
            assert!(
                (f - rows[st][1]).abs() <= 4.0 * binomial_se(rows[st][1], tot),
                "state {st}: {f}"
            );
        }
    }

    #[test]
    fn block_maximal_beats_coordinate_sequential() {
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 30).unwrap(),
        );
        let y = History::constant(1);
        let z = History::constant(0);
        let sched = BlockSchedule::new(1.5).unwrap();
        let reps = 30_000;
        let bm = estimate_block_disagreement(
            &model, &y, &z, 6, reps, &sched, BM, &RngStream::new(7, 0),
        )
        .unwrap();
        let cs = estimate_block_disagreement(
            &model, &y, &z, 6, reps, &sched, CouplingMode::CoordinateSequential,
            &RngStream::new(7, 50_000),
        )
        .unwrap();
        for (b, c) in bm.iter().zip(&cs) {
            assert!(
                b.value <= c.value + 3.0 * (b.se.hypot(c.se)),
                "block-maximal {} vs sequential {}",
                b.value,
                c.value
            );
        }
    }

    #[test]
    fn theta_block_is_consistent_with_indicators() {
        let model = two_state_example();
        let y = History::constant(0);
        let z = History::constant(1);
        for i in 0..50 {
            let run = run_coupling(
                &model,
                &y,
                &z,
                10,
                &BlockSchedule::new(1.0).unwrap(),
                BM,
                &RngStream::new(8, i),
                false,
            )
            .unwrap();
            match run.theta_block {
                Some(t) => {
                    for (idx, &x) in run.x_indicators.iter().enumerate() {
                        let n = idx as u64 + 1;
                        if n >= t {
                            assert!(!x);
                        }
                    }
                    if t > 1 {
                        assert!(run.x_indicators[(t - 2) as usize]);
                    }
                }
                None => assert!(*run.x_indicators.last().unwrap()),
            }
        }
    }
}
