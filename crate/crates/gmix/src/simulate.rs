//! Trajectory sampling for a chain driven by a [`PotentialModel`] from a
//! given past, plus burn-in approximations of the stationary law.

use rand::Rng;

use crate::error::{GmixError, Result};
use crate::history::{ExtendedPast, History, Past};
use crate::potential::{Alphabet, PotentialModel};
use crate::rng::RngStream;

/// A realized path `eta_1 .. eta_n` together with the past it grew from.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start_history: History,
    pub symbols: Vec<u32>,
}

impl Trajectory {
    /// View of the past as seen just before emitting symbol `i` (0-based).
    pub fn past_before(&self, i: usize) -> ExtendedPast<'_> {
        ExtendedPast { base: &self.start_history, appended: &self.symbols[..i] }
    }
}

/// Draw one symbol from the conditional law given `past`.
pub(crate) fn draw_symbol<P: Past + ?Sized, R: Rng>(
    model: &PotentialModel,
    past: &P,
    rng: &mut R,
) -> u32 {
    match model {
        PotentialModel::PoissonAr(m) => {
            // inverse-CDF walk, clamped at the 1 - tail_mass_tol quantile
            let lambda = m.lambda(past);
            let u: f64 = rng.random();
            let mut pmf = (-lambda).exp();
            let mut cdf = pmf;
            let mut a = 0u32;
            while u > cdf && 1.0 - cdf > m.tail_mass_tol {
                a += 1;
                pmf *= lambda / a as f64;
                cdf += pmf;
            }
            a
        }
        _ => {
            let probs = model.cond_dist(past);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i as u32;
                }
            }
            (probs.len() - 1) as u32
        }
    }
}

/// Sample `eta_1 .. eta_n` sequentially from the kernel, starting at `y`.
pub fn sample_path(
    model: &PotentialModel,
    y: &History,
    n: usize,
    stream: &RngStream,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(GmixError::InvalidArgument("path length must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut symbols = Vec::with_capacity(n);
    for _ in 0..n {
        let past = ExtendedPast { base: y, appended: &symbols };
        let s = draw_symbol(model, &past, &mut rng);
        symbols.push(s);
    }
    Ok(Trajectory { start_history: y.clone(), symbols })
}

/// Approximate stationary sampling: run `burn_in + n` steps from the all-zero
/// reference past and keep the last `n` symbols.
///
/// The bias of any marginal statistic is controlled by the relaxation rate at
/// `burn_in`: the returned window is within `relaxation_rate_bound(burn_in)`
/// of the stationary law in total variation, coordinate by coordinate (see
/// [`crate::renewal::relaxation_rate_bound`]). Burn-in sufficiency should be
/// checked by doubling, as the correlation experiments do.
pub fn sample_stationary(
    model: &PotentialModel,
    burn_in: usize,
    n: usize,
    stream: &RngStream,
) -> Result<Trajectory> {
    let reference = History::constant(0);
    let mut t = sample_path(model, &reference, burn_in + n, stream)?;
    let kept: Vec<u32> = t.symbols.split_off(burn_in);
    let mut prefix: Vec<u32> = t.symbols;
    prefix.reverse(); // most-recent-first
    Ok(Trajectory { start_history: History::new(prefix, 0), symbols: kept })
}

/// Empirical symbol frequencies of a path over a finite alphabet.
pub fn symbol_frequencies(model: &PotentialModel, t: &Trajectory) -> Result<Vec<f64>> {
    let n = match model.alphabet() {
        Alphabet::Finite(n) => n,
        Alphabet::CountableNonNegInts => {
            return Err(GmixError::InvalidArgument(
                "symbol frequencies need a finite alphabet".into(),
            ))
        }
    };
    let mut counts = vec![0usize; n];
    for &s in &t.symbols {
        counts[s as usize] += 1;
    }
    Ok(counts.iter().map(|&c| c as f64 / t.symbols.len() as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::binomial_se;
    use crate::potential::{two_state_example, LongMemoryBinaryModel, MarkovModel};

    #[test]
    fn fixed_stream_reproduces_trajectories() {
        let model = two_state_example();
        let y = History::constant(0);
        let s = RngStream::new(42, 9);
        let a = sample_path(&model, &y, 500, &s).unwrap();
        let b = sample_path(&model, &y, 500, &s).unwrap();
        assert_eq!(a.symbols, b.symbols);
        let c = sample_path(&model, &y, 500, &RngStream::new(42, 10)).unwrap();
        assert_ne!(a.symbols, c.symbols);
    }

    #[test]
    fn iid_frequencies_match_weights() {
        let p = vec![0.2, 0.5, 0.3];
        let model = PotentialModel::iid(p.clone()).unwrap();
        let t = sample_path(&model, &History::constant(0), 100_000, &RngStream::new(1, 0)).unwrap();
        let freq = symbol_frequencies(&model, &t).unwrap();
        for (f, p0) in freq.iter().zip(&p) {
            assert!((f - p0).abs() <= 4.0 * binomial_se(*p0, 100_000));
        }
    }

    #[test]
    fn markov_transition_counts_match_rows() {
        let model = two_state_example();
        let t = sample_path(&model, &History::constant(0), 200_000, &RngStream::new(3, 0)).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for w in t.symbols.windows(2) {
            counts[w[0] as usize][w[1] as usize] += 1;
        }
        let rows = [[0.9, 0.1], [0.2, 0.8]];
        for s in 0..2 {
            let total: usize = counts[s].iter().sum();
            for a in 0..2 {
                let f = counts[s][a] as f64 / total as f64;
                assert!(
                    (f - rows[s][a]).abs() <= 4.0 * binomial_se(rows[s][a], total),
                    "state {s} symbol {a}: {f}"
                );
            }
        }
    }

    #[test]
    fn conditional_frequencies_match_kernel_to_depth_three() {
        // exhaustive fixed contexts of depth <= 3 on the binary long-memory model
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 30).unwrap(),
        );
        let t = sample_path(&model, &History::constant(0), 400_000, &RngStream::new(4, 0)).unwrap();
        for ctx_len in 1..=3usize {
            for ctx in 0..(1u32 << ctx_len) {
                let bits: Vec<u32> = (0..ctx_len).map(|j| (ctx >> j) & 1).collect();
                let mut hits = 0usize;
                let mut ones = 0usize;
                let mut g_sum = 0.0;
                for i in ctx_len..t.symbols.len() {
                    let matches = (0..ctx_len).all(|d| t.symbols[i - 1 - d] == bits[d]);
                    if matches {
                        hits += 1;
                        ones += usize::from(t.symbols[i] == 1);
                        g_sum += model.cond_dist(&t.past_before(i))[1];
                    }
                }
                assert!(hits > 1000, "context occurs often enough");
                let f = ones as f64 / hits as f64;
                let g_avg = g_sum / hits as f64;
                assert!(
                    (f - g_avg).abs() <= 4.0 * binomial_se(g_avg, hits),
                    "ctx {bits:?}: freq {f} vs kernel {g_avg}"
                );
            }
        }
    }

    #[test]
    fn stationary_marginal_matches_eigenvector() {
        let model = two_state_example();
        // stationary law of the two-state example is (2/3, 1/3)
        let n = 100_000;
        let t = sample_stationary(&model, 1000, n, &RngStream::new(5, 0)).unwrap();
        let freq = symbol_frequencies(&model, &t).unwrap();
        // correlated samples: visit counts have an effective sample size
        // reduced by roughly (1+lambda2)/(1-lambda2) = 5.67 at lambda2 = 0.7
        let se = (0.333f64 * 0.667 / (n as f64 / 5.67)).sqrt();
        assert!((freq[1] - 1.0 / 3.0).abs() <= 4.0 * se, "freq {}", freq[1]);
    }

    #[test]
    fn stationary_window_is_stable_under_doubled_burn_in() {
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 50).unwrap(),
        );
        let n = 200_000;
        let f1 = {
            let t = sample_stationary(&model, 10_000, n, &RngStream::new(6, 0)).unwrap();
            symbol_frequencies(&model, &t).unwrap()[1]
        };
        let f2 = {
            let t = sample_stationary(&model, 20_000, n, &RngStream::new(6, 1)).unwrap();
            symbol_frequencies(&model, &t).unwrap()[1]
        };
        // generous effective-sample-size deflation for long memory
        let se = (0.25 / (n as f64 / 10.0)).sqrt();
        assert!((f1 - f2).abs() <= 4.0 * (2.0f64).sqrt() * se, "{f1} vs {f2}");
    }

    #[test]
    fn order_zero_markov_acts_iid() {
        let m = MarkovModel::new(2, 0, vec![vec![0.4, 0.6]]).unwrap();
        let model = PotentialModel::Markov(m);
        let t = sample_path(&model, &History::constant(1), 50_000, &RngStream::new(7, 0)).unwrap();
        let freq = symbol_frequencies(&model, &t).unwrap();
        assert!((freq[1] - 0.6).abs() <= 4.0 * binomial_se(0.6, 50_000));
    }
}
