//! Statistical post-processing: cylinder observables and their seminorm,
//! empirical correlation decay, invariance-principle path checks, and
//! concentration experiments.
//!
//! Standard errors are taken across independent replicates (each replicate
//! owns one random stream and contributes one number), which stays valid
//! under long memory where within-path batching is easy to get wrong.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::coupling::Estimate;
use crate::error::{GmixError, Result};
use crate::num::{binomial_se, mean_se};
use crate::potential::PotentialModel;
use crate::rng::RngStream;
use crate::simulate::sample_stationary;

/// A function of finitely many most-recent coordinates: a table over all
/// cylinders of length `depth`. The window `(eta_t, eta_{t-1}, ...)` is
/// indexed with the most recent symbol as the least significant digit.
#[derive(Debug, Clone)]
pub struct Observable {
    alphabet_size: usize,
    depth: usize,
    table: Vec<f64>,
}

impl Observable {
    pub fn new(alphabet_size: usize, depth: usize, table: Vec<f64>) -> Result<Self> {
        let expect = alphabet_size.pow(depth as u32);
        if alphabet_size < 2 || table.len() != expect {
            return Err(GmixError::InvalidArgument(format!(
                "observable table needs {expect} entries for alphabet {alphabet_size} and depth {depth}, got {}",
                table.len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(GmixError::InvalidArgument("observable table must be finite".into()));
        }
        Ok(Self { alphabet_size, depth, table })
    }

    /// Constant observable (depth 0).
    pub fn constant(alphabet_size: usize, value: f64) -> Self {
        Self { alphabet_size, depth: 0, table: vec![value] }
    }

    /// Indicator of a single cylinder.
    pub fn indicator(alphabet_size: usize, depth: usize, cylinder: usize) -> Result<Self> {
        let mut table = vec![0.0; alphabet_size.pow(depth as u32)];
        if cylinder >= table.len() {
            return Err(GmixError::InvalidArgument("cylinder index out of range".into()));
        }
        table[cylinder] = 1.0;
        Self::new(alphabet_size, depth, table)
    }

    /// `h: A -> R` from per-symbol values (depth 1).
    pub fn from_symbol_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(n, 1, values)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `max - min` of the table.
    pub fn range(&self) -> f64 {
        let lo = self.table.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.table.is_empty() { 0.0 } else { hi - lo }
    }

    /// Evaluate at position `t` of a symbol sequence (needs `t >= depth-1`).
    pub fn eval_at(&self, symbols: &[u32], t: usize) -> f64 {
        if self.depth == 0 {
            return self.table[0];
        }
        let mut idx = 0usize;
        let mut base = 1usize;
        for d in 0..self.depth {
            idx += symbols[t - d] as usize * base;
            base *= self.alphabet_size;
        }
        self.table[idx]
    }

    /// Variation of order `k`: the largest gap between table entries whose
    /// windows agree on the `k` most recent coordinates. Zero for
    /// `k >= depth`.
    pub fn var_k(&self, k: usize) -> f64 {
        if k >= self.depth {
            return 0.0;
        }
        let shared = self.alphabet_size.pow(k as u32);
        let free = self.alphabet_size.pow((self.depth - k) as u32);
        let mut worst: f64 = 0.0;
        for s in 0..shared {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..free {
                let v = self.table[s + r * shared];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            worst = worst.max(hi - lo);
        }
        worst
    }

    /// Pointwise scaled copy.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            alphabet_size: self.alphabet_size,
            depth: self.depth,
            table: self.table.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise sum (same alphabet and depth).
    pub fn plus(&self, other: &Observable) -> Result<Self> {
        if self.alphabet_size != other.alphabet_size || self.depth != other.depth {
            return Err(GmixError::InvalidArgument("observable shape mismatch".into()));
        }
        Ok(Self {
            alphabet_size: self.alphabet_size,
            depth: self.depth,
            table: self.table.iter().zip(&other.table).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Seminorm `sup_k var_k(f) / var_k(e^phi)` of a finite-depth observable
/// against the kernel's variation bounds. The sup is attained on
/// `k < depth` since deeper variations of the table vanish.
pub fn seminorm_phi(obs: &Observable, model: &PotentialModel) -> Result<f64> {
    if obs.depth() <= 1 {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for k in 1..obs.depth() {
        let num = obs.var_k(k);
        if num == 0.0 {
            continue;
        }
        let den = model.var_kernel_upper(k);
        if !(den > 0.0) {
            return Err(GmixError::UndefinedSeminorm(format!(
                "kernel variation vanishes at order {k} while the observable still varies"
            )));
        }
        best = best.max(num / den);
    }
    Ok(best)
}

/// Empirical covariance at one lag.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationEstimate {
    pub lag: u64,
    /// Signed covariance estimate; the theoretical decay rate bounds its
    /// absolute value.
    pub rho_hat: f64,
    pub se: f64,
}

/// Monte Carlo estimates of `cov(f(window at t+lag), fhat(window at t))`
/// under the (approximate) stationary law, one estimate per lag.
#[allow(clippy::too_many_arguments)]
pub fn correlation_decay(
    model: &PotentialModel,
    f: &Observable,
    fhat: &Observable,
    lags: &[u64],
    burn_in: usize,
    path_len: usize,
    replicates: usize,
    stream: &RngStream,
) -> Result<Vec<CorrelationEstimate>> {
    let max_lag = *lags.iter().max().unwrap_or(&0) as usize;
    let depth_pad = f.depth().max(fhat.depth());
    let total_len = path_len + max_lag + depth_pad;
    let per_rep: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let t = sample_stationary(model, burn_in, total_len, &stream.substream(r as u64))?;
            let s = &t.symbols;
            let t0 = depth_pad.saturating_sub(1);
            let t1 = t0 + path_len;
            let inv = 1.0 / path_len as f64;
            let mut mfh = 0.0;
            for t in t0..t1 {
                mfh += fhat.eval_at(s, t);
            }
            mfh *= inv;
            let mut out = Vec::with_capacity(lags.len());
            for &lag in lags {
                let lag = lag as usize;
                let mut prod = 0.0;
                let mut mf = 0.0;
                for t in t0..t1 {
                    let a = f.eval_at(s, t + lag);
                    prod += a * fhat.eval_at(s, t);
                    mf += a;
                }
                out.push(prod * inv - (mf * inv) * mfh);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(i, &lag)| {
            let vals: Vec<f64> = per_rep.iter().map(|v| v[i]).collect();
            let (mean, se) = mean_se(&vals);
            CorrelationEstimate { lag, rho_hat: mean, se }
        })
        .collect())
}

/// Theoretical decay envelope exponent for the correlation bound: `(1+delta)/2`
/// when `delta > 1`, otherwise the user's `delta_prime < delta`.
pub fn correlation_rate_exponent(delta: f64, delta_prime: Option<f64>) -> Result<f64> {
    if delta > 1.0 {
        Ok((1.0 + delta) / 2.0)
    } else {
        match delta_prime {
            Some(dp) if dp < delta && dp > 0.0 => Ok(dp),
            _ => Err(GmixError::InvalidArgument(
                "delta <= 1 requires 0 < delta_prime < delta".into(),
            )),
        }
    }
}

/// Normalized partial-sum paths on the grid `t = 0.1, 0.2, ..., 1.0`.
#[derive(Debug, Clone)]
pub struct FcltPaths {
    pub grid: Vec<f64>,
    /// `paths[replicate][grid index]`, already centered and scaled by
    /// `sigma_hat * sqrt(n)`.
    pub paths: Vec<Vec<f64>>,
    pub sigma_hat: f64,
    pub center: f64,
}

/// Sample normalized partial-sum paths of a depth-1 observable.
///
/// Centering pools all replicates (a calibration sample of
/// `replicates * (n+1)` symbols): centering from a run only a constant
/// multiple of `n` long leaves a common random shift of order
/// `sqrt(n / calibration length)` in every normalized endpoint, visible to
/// any distributional test sharper than that. The scale is the replicate
/// standard deviation of the endpoint before normalization, so the endpoint
/// sample has unit variance by construction and the distributional check is
/// against the standard normal shape.
pub fn fclt_paths(
    model: &PotentialModel,
    h: &Observable,
    n: usize,
    replicates: usize,
    burn_in: usize,
    stream: &RngStream,
) -> Result<FcltPaths> {
    if h.depth() != 1 {
        return Err(GmixError::InvalidArgument(
            "invariance-principle paths need a depth-1 observable".into(),
        ));
    }
    if n < 10 || replicates < 2 {
        return Err(GmixError::InvalidArgument("need n >= 10 and replicates >= 2".into()));
    }
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let counts: Vec<usize> = grid.iter().map(|&t| ((n as f64) * t).floor() as usize + 1).collect();
    // per replicate: raw partial sums at the grid points
    let raw: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let t = sample_stationary(model, burn_in, n + 1, &stream.substream(r as u64))?;
            let s = &t.symbols;
            let mut out = Vec::with_capacity(grid.len());
            let mut acc = 0.0;
            let mut upto = 0usize;
            for &cnt in &counts {
                while upto < cnt {
                    acc += h.eval_at(s, upto);
                    upto += 1;
                }
                out.push(acc);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let total_syms = (replicates * (n + 1)) as f64;
    let center = raw.iter().map(|p| *p.last().unwrap()).sum::<f64>() / total_syms;
    let scale = 1.0 / (n as f64).sqrt();
    let centered: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|p| {
            p.into_iter()
                .zip(&counts)
                .map(|(s, &cnt)| (s - cnt as f64 * center) * scale)
                .collect()
        })
        .collect();
    let endpoints: Vec<f64> = centered.iter().map(|p| *p.last().unwrap()).collect();
    let (end_mean, _) = mean_se(&endpoints);
    let var: f64 = endpoints.iter().map(|x| (x - end_mean) * (x - end_mean)).sum::<f64>()
        / (endpoints.len() - 1) as f64;
    let sigma_hat = var.sqrt();
    if sigma_hat < 1e-6 {
        return Err(GmixError::DegenerateSigma(sigma_hat));
    }
    let paths = centered
        .into_iter()
        .map(|p| p.into_iter().map(|x| x / sigma_hat).collect())
        .collect();
    Ok(FcltPaths { grid, paths, sigma_hat, center })
}

/// Concentration experiment at fixed threshold `t`.
#[derive(Debug, Clone)]
pub struct DeviationEstimates {
    /// Reference mean from the calibration run.
    pub e_hat: f64,
    /// `(n, P_hat[|mean_n - e_hat| >= t])` per requested `n`.
    pub per_n: Vec<(usize, Estimate)>,
}

/// Empirical deviation probabilities `P[|n^-1 sum h - e_hat| >= t]`.
pub fn chernoff_deviation(
    model: &PotentialModel,
    h: &Observable,
    n_list: &[usize],
    t: f64,
    replicates: usize,
    burn_in: usize,
    stream: &RngStream,
) -> Result<DeviationEstimates> {
    if !(t > 0.0) {
        return Err(GmixError::InvalidArgument("threshold t must be positive".into()));
    }
    if h.depth() != 1 {
        return Err(GmixError::InvalidArgument("deviation experiment needs a depth-1 observable".into()));
    }
    let n_max = *n_list.iter().max().ok_or_else(|| {
        GmixError::InvalidArgument("n_list must be nonempty".into())
    })?;
    let calib = sample_stationary(model, burn_in, 10 * n_max, &stream.substream(u32::MAX as u64 + 1))?;
    let e_hat = (0..calib.symbols.len())
        .map(|i| h.eval_at(&calib.symbols, i))
        .sum::<f64>()
        / calib.symbols.len() as f64;
    let mut per_n = Vec::with_capacity(n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        let hits: usize = (0..replicates)
            .into_par_iter()
            .map(|r| -> Result<usize> {
                let stream = stream.substream((j as u64) << 32 | r as u64);
                let tr = sample_stationary(model, burn_in, n, &stream)?;
                let mean = (0..n).map(|i| h.eval_at(&tr.symbols, i)).sum::<f64>() / n as f64;
                Ok(usize::from((mean - e_hat).abs() >= t))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        let p = hits as f64 / replicates as f64;
        per_n.push((n, Estimate { value: p, se: binomial_se(p, replicates) }));
    }
    Ok(DeviationEstimates { e_hat, per_n })
}

/// Exact deviation probability for the symmetric-binomial baseline: i.i.d.
/// symbols with `h = +/-1` and `P[+1] = 1/2`, so the sample mean is
/// `(2X - n)/n` with `X ~ Bin(n, 1/2)`.
pub fn binomial_pm1_deviation_prob(n: usize, t: f64, center: f64) -> f64 {
    let ln_half = 0.5f64.ln();
    let mut total = 0.0;
    for x in 0..=n {
        let mean = (2.0 * x as f64 - n as f64) / n as f64;
        if (mean - center).abs() >= t {
            let ln_p = ln_gamma(n as f64 + 1.0)
                - ln_gamma(x as f64 + 1.0)
                - ln_gamma((n - x) as f64 + 1.0)
                + n as f64 * ln_half;
            total += ln_p.exp();
        }
    }
    total.min(1.0)
}

/// Kolmogorov-Smirnov sup distance of the sample to the standard normal CDF.
pub fn ks_statistic(samples: &[f64]) -> Result<f64> {
    if samples.len() < 100 {
        return Err(GmixError::InvalidArgument(format!(
            "KS statistic needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = normal.cdf(x);
        d = d.max((i as f64 / n - c).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{two_state_example, LongMemoryBinaryModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn observable_var_orders() {
        // depth-2 indicator of (eta_t, eta_{t-1}) = (1, 1) on a binary alphabet
        let f = Observable::indicator(2, 2, 0b11).unwrap();
        assert_eq!(f.var_k(2), 0.0);
        assert_eq!(f.var_k(1), 1.0);
        assert_eq!(f.range(), 1.0);
        let c = Observable::constant(2, 3.5);
        assert_eq!(c.var_k(1), 0.0);
        assert_eq!(c.range(), 0.0);
    }

    #[test]
    fn seminorm_degenerate_cases() {
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 20).unwrap(),
        );
        let c = Observable::constant(2, 2.0);
        assert_eq!(seminorm_phi(&c, &model).unwrap(), 0.0);
        let h = Observable::from_symbol_values(vec![-1.0, 1.0]).unwrap();
        assert_eq!(seminorm_phi(&h, &model).unwrap(), 0.0);
        // iid kernel has zero variation: depth-2 observables are outside the space
        let iid = PotentialModel::iid(vec![0.5, 0.5]).unwrap();
        let f = Observable::indicator(2, 2, 0).unwrap();
        assert!(matches!(seminorm_phi(&f, &iid), Err(GmixError::UndefinedSeminorm(_))));
    }

    #[test]
    fn seminorm_depth_two_direct_value() {
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 20).unwrap(),
        );
        let f = Observable::indicator(2, 2, 0b11).unwrap();
        let got = seminorm_phi(&f, &model).unwrap();
        assert_abs_diff_eq!(got, 1.0 / model.var_kernel_upper(1), epsilon = 1e-12);
    }

    #[test]
    fn seminorm_is_homogeneous_and_subadditive() {
        let model = PotentialModel::LongMemoryBinary(
            LongMemoryBinaryModel::new(0.2, 1.5, 20).unwrap(),
        );
        let f = Observable::new(2, 3, vec![0.3, -1.0, 2.0, 0.0, 1.5, 0.25, -0.5, 1.0]).unwrap();
        let g = Observable::indicator(2, 3, 5).unwrap();
        let sf = seminorm_phi(&f, &model).unwrap();
        let sg = seminorm_phi(&g, &model).unwrap();
        assert_abs_diff_eq!(
            seminorm_phi(&f.scaled(-2.5), &model).unwrap(),
            2.5 * sf,
            epsilon = 1e-12
        );
        let sum = seminorm_phi(&f.plus(&g).unwrap(), &model).unwrap();
        assert!(sum <= sf + sg + 1e-12);
    }

    #[test]
    fn iid_correlations_vanish() {
        let model = PotentialModel::iid(vec![0.5, 0.5]).unwrap();
        let h = Observable::from_symbol_values(vec![-1.0, 1.0]).unwrap();
        let ests = correlation_decay(
            &model,
            &h,
            &h,
            &[1, 2, 3, 5, 8],
            10,
            20_000,
            64,
            &RngStream::new(21, 0),
        )
        .unwrap();
        for e in ests {
            assert!(e.rho_hat.abs() <= 3.0 * e.se, "lag {}: {} vs se {}", e.lag, e.rho_hat, e.se);
        }
    }

    #[test]
    fn markov_correlations_match_eigendecomposition() {
        // cov(1{eta_0=1}, 1{eta_n=1}) = pi1 (1-pi1) lambda2^n = (2/9) 0.7^n
        let model = two_state_example();
        let f = Observable::indicator(2, 1, 1).unwrap();
        let ests = correlation_decay(
            &model,
            &f,
            &f,
            &[1, 2, 3, 4, 6, 8],
            2_000,
            40_000,
            96,
            &RngStream::new(22, 0),
        )
        .unwrap();
        for e in &ests {
            let oracle = (2.0 / 9.0) * 0.7f64.powi(e.lag as i32);
            assert!(
                (e.rho_hat - oracle).abs() <= 3.0 * e.se,
                "lag {}: {} vs oracle {} (se {})",
                e.lag,
                e.rho_hat,
                oracle,
                e.se
            );
        }
    }

    #[test]
    fn ks_statistic_reference_behavior() {
        // exact normal quantile grid has vanishing distance
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        assert!(ks_statistic(&samples).unwrap() < 0.001);
        // constant sample is far from normal
        assert!(ks_statistic(&vec![0.0; 1000]).unwrap() >= 0.5);
        // unit shift moves the distance to about Phi(0) - Phi(-1)
        let shifted: Vec<f64> = samples.iter().map(|x| x + 1.0).collect();
        assert!(ks_statistic(&shifted).unwrap() > 0.3);
        assert!(ks_statistic(&samples[..50]).is_err());
    }

    #[test]
    fn binomial_tail_oracle_sanity() {
        // n=100, t=0.2, center 0: P[|mean| >= 0.2] = 2 P[X >= 60]
        let p = binomial_pm1_deviation_prob(100, 0.2, 0.0);
        assert!(p > 0.045 && p < 0.06, "{p}");
        assert_eq!(binomial_pm1_deviation_prob(100, 2.1, 0.0), 0.0);
    }

    #[test]
    fn deviation_threshold_above_range_is_impossible() {
        let model = PotentialModel::iid(vec![0.5, 0.5]).unwrap();
        let h = Observable::from_symbol_values(vec![-1.0, 1.0]).unwrap();
        let d = chernoff_deviation(&model, &h, &[50], 2.5, 400, 0, &RngStream::new(23, 0)).unwrap();
        assert_eq!(d.per_n[0].1.value, 0.0);
    }
}
