//! Alphabets, normalized log-kernels, their regularity profiles, and the
//! built-in model families.
//!
//! A model assigns to every past `x` a probability kernel `g(. | x) = e^phi`
//! over the alphabet with `sum_a g(a | x) = 1`. Regularity is tracked through
//! two discrepancy scales between kernels whose pasts agree on the `k` most
//! recent symbols: the L1 variation rate and the chi-square variation rate.
//! Upper bounds on the chi-square rate drive the whole bound pipeline in
//! [`crate::renewal`].

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{GmixError, Result};
use crate::history::{History, Past};
use crate::num::KahanSum;

/// Symbol space of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alphabet {
    Finite(usize),
    CountableNonNegInts,
}

impl Alphabet {
    pub fn finite(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(GmixError::InvalidArgument(format!(
                "finite alphabet needs at least 2 symbols, got {size}"
            )));
        }
        Ok(Alphabet::Finite(size))
    }

    pub fn contains(&self, s: u32) -> bool {
        match self {
            Alphabet::Finite(n) => (s as usize) < *n,
            Alphabet::CountableNonNegInts => true,
        }
    }

    /// Finite size, or 0 for the countable alphabet (used in error messages).
    pub fn size_hint(&self) -> usize {
        match self {
            Alphabet::Finite(n) => *n,
            Alphabet::CountableNonNegInts => 0,
        }
    }
}

/// Decay metadata for the chi-square variation rate of a kernel.
///
/// `chi2_at(k)` returns the profile's upper bound on the rate of order `k`:
/// the explicit per-order list when present (zero beyond it when the list is
/// complete), otherwise the power-law envelope `chi2_c / k^(1 + chi2_delta)`.
///
/// `chi2_zero` bounds the discrepancy between kernels whose pasts share
/// nothing at all. The power-law envelope says nothing about that order, but
/// the first block of a coupling starts exactly there, so pipelines built
/// from a bare envelope treat it as absent (see [`crate::renewal`]) while
/// model-derived profiles fill it in.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegularityProfile {
    pub chi2_c: f64,
    pub chi2_delta: f64,
    #[serde(default)]
    pub explicit_chi2: Option<Vec<f64>>,
    /// When true, the explicit list covers every nonzero order.
    #[serde(default)]
    pub explicit_complete: bool,
    #[serde(default)]
    pub explicit_var: Option<Vec<f64>>,
    #[serde(default)]
    pub chi2_zero: Option<f64>,
    /// Lower bound on `sum_a inf_x g(a | x)`, when known for the model.
    #[serde(default)]
    pub min_common_mass: Option<f64>,
}

impl RegularityProfile {
    /// Bare power-law envelope `C / k^(1+delta)`.
    pub fn power_law(chi2_c: f64, chi2_delta: f64) -> Result<Self> {
        if !(chi2_c >= 0.0) || !(chi2_delta > 0.0) {
            return Err(GmixError::InvalidArgument(format!(
                "power-law profile needs C >= 0 and delta > 0, got C={chi2_c}, delta={chi2_delta}"
            )));
        }
        Ok(Self {
            chi2_c,
            chi2_delta,
            explicit_chi2: None,
            explicit_complete: false,
            explicit_var: None,
            chi2_zero: None,
            min_common_mass: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi2_c >= 0.0) || !(self.chi2_delta > 0.0) {
            return Err(GmixError::InvalidArgument(
                "profile needs chi2_c >= 0 and chi2_delta > 0".into(),
            ));
        }
        for seq in [&self.explicit_chi2, &self.explicit_var].into_iter().flatten() {
            for w in seq.windows(2) {
                if w[1] > w[0] + 1e-15 {
                    return Err(GmixError::InvalidArgument(
                        "explicit profile sequences must be non-increasing".into(),
                    ));
                }
            }
            if seq.iter().any(|&v| v < 0.0) {
                return Err(GmixError::InvalidArgument(
                    "explicit profile sequences must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Upper bound on the chi-square variation rate of order `k >= 1`.
    pub fn chi2_at(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        if let Some(seq) = &self.explicit_chi2 {
            if (k as usize) <= seq.len() {
                return seq[k as usize - 1];
            }
            if self.explicit_complete {
                return 0.0;
            }
        }
        self.chi2_c / (k as f64).powf(1.0 + self.chi2_delta)
    }
}

/// Parameters of the binary model with polynomially decaying influence
/// weights: `g(1 | x) = 1/2 + eps0 * sum_k w_k xi(x_{-k})` with
/// `xi(0) = -1`, `xi(1) = +1` and `w_k` proportional to `k^(-(3+delta)/2)`.
///
/// The weight exponent makes the tail sums behave like `k^(-(1+delta)/2)`,
/// so the kernel's chi-square rate decays like `k^-(1+delta)`: the model
/// saturates the power-law regularity envelope with parameter `delta`.
#[derive(Debug, Clone)]
pub struct LongMemoryBinaryModel {
    pub eps0: f64,
    pub delta: f64,
    pub k_max: usize,
    weights: Vec<f64>,
    /// `tail[k] = sum_{j > k} w_j` for `k = 0..=k_max` (tail[k_max] = 0).
    tail: Vec<f64>,
}

impl LongMemoryBinaryModel {
    pub fn new(eps0: f64, delta: f64, k_max: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(GmixError::InvalidArgument(format!(
                "eps0 must lie in (0, 1/2), got {eps0}"
            )));
        }
        if !(delta > 0.0) || k_max == 0 {
            return Err(GmixError::InvalidArgument(
                "need delta > 0 and k_max >= 1".into(),
            ));
        }
        let expo = -(3.0 + delta) / 2.0;
        let raw: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(expo)).collect();
        let z: f64 = {
            let mut acc = KahanSum::new();
            for &r in &raw {
                acc.add(r);
            }
            acc.value()
        };
        let weights: Vec<f64> = raw.iter().map(|r| r / z).collect();
        let mut tail = vec![0.0; k_max + 1];
        for k in (0..k_max).rev() {
            tail[k] = tail[k + 1] + weights[k];
        }
        Ok(Self { eps0, delta, k_max, weights, tail })
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k - 1]
    }

    /// `sum_{j > k} w_j`.
    pub fn weight_tail(&self, k: usize) -> f64 {
        self.tail[k.min(self.k_max)]
    }

    fn signed_sum<P: Past + ?Sized>(&self, past: &P) -> f64 {
        let (d0, c) = past.constant_from();
        let explicit = self.k_max.min(d0.saturating_sub(1));
        let mut s = 0.0;
        for depth in 1..=explicit {
            let xi = if past.symbol_at(depth) == 1 { 1.0 } else { -1.0 };
            s += self.weights[depth - 1] * xi;
        }
        if d0 <= self.k_max {
            let xi = if c == 1 { 1.0 } else { -1.0 };
            s += xi * self.tail[d0 - 1];
        }
        s
    }

    pub fn g_one<P: Past + ?Sized>(&self, past: &P) -> f64 {
        0.5 + self.eps0 * self.signed_sum(past)
    }
}

/// Conditional-Poisson model on the nonnegative integers:
/// `log lambda(x) = sum_i beta_i * min(x_{-i}, gamma_i)`, next symbol drawn
/// from `Poisson(lambda(x))`.
///
/// The coefficient sequences are truncated at `cutoff`; dropping the rest of
/// an absolutely convergent family perturbs `lambda` by at most a factor
/// `exp(sum_{i > cutoff} |beta_i| gamma_i)`, which the caller folds into the
/// choice of cutoff. `S = sum_i |beta_i| gamma_i` gives the hard envelope
/// `exp(-S) <= lambda <= exp(S)`.
#[derive(Debug, Clone)]
pub struct PoissonArModel {
    beta: Vec<f64>,
    gamma: Vec<u32>,
    pub tail_mass_tol: f64,
    /// `abs_tail[i] = sum_{j >= i} |beta_j| gamma_j` (1-based; last entry 0).
    abs_tail: Vec<f64>,
    /// `bg_tail[i] = sum_{j >= i} beta_j gamma_j`.
    bg_tail: Vec<f64>,
    max_gamma: u32,
    pub s_total: f64,
}

impl PoissonArModel {
    pub fn new(beta: Vec<f64>, gamma: Vec<u32>, tail_mass_tol: f64) -> Result<Self> {
        if beta.is_empty() || beta.len() != gamma.len() {
            return Err(GmixError::InvalidArgument(
                "beta and gamma must be nonempty and of equal length".into(),
            ));
        }
        if !(tail_mass_tol > 0.0 && tail_mass_tol < 1e-3) {
            return Err(GmixError::InvalidArgument(
                "tail_mass_tol must lie in (0, 1e-3)".into(),
            ));
        }
        let n = beta.len();
        let mut abs_tail = vec![0.0; n + 2];
        let mut bg_tail = vec![0.0; n + 2];
        for i in (1..=n).rev() {
            abs_tail[i] = abs_tail[i + 1] + beta[i - 1].abs() * gamma[i - 1] as f64;
            bg_tail[i] = bg_tail[i + 1] + beta[i - 1] * gamma[i - 1] as f64;
        }
        let s_total = abs_tail[1];
        if !s_total.is_finite() {
            return Err(GmixError::InvalidArgument(
                "sum |beta_i| gamma_i must be finite".into(),
            ));
        }
        let max_gamma = gamma.iter().copied().max().unwrap_or(0);
        Ok(Self { beta, gamma, tail_mass_tol, abs_tail, bg_tail, max_gamma, s_total })
    }

    /// Coefficients `|beta_i| gamma_i = scale / i^exponent`, `gamma_i = 1`.
    pub fn power_family(scale: f64, exponent: f64, cutoff: usize, tail_mass_tol: f64) -> Result<Self> {
        if !(exponent > 1.0) {
            return Err(GmixError::InvalidArgument(
                "power family needs exponent > 1 for absolute convergence".into(),
            ));
        }
        let beta: Vec<f64> = (1..=cutoff).map(|i| scale * (i as f64).powf(-exponent)).collect();
        let gamma = vec![1u32; cutoff];
        Self::new(beta, gamma, tail_mass_tol)
    }

    pub fn cutoff(&self) -> usize {
        self.beta.len()
    }

    /// `sum_{i > k} |beta_i| gamma_i`.
    pub fn abs_tail_after(&self, k: usize) -> f64 {
        let i = (k + 1).min(self.abs_tail.len() - 1);
        self.abs_tail[i]
    }

    pub fn lambda<P: Past + ?Sized>(&self, past: &P) -> f64 {
        let (d0, c) = past.constant_from();
        let cutoff = self.beta.len();
        let explicit = cutoff.min(d0.saturating_sub(1));
        let mut s = 0.0;
        for depth in 1..=explicit {
            let x = past.symbol_at(depth).min(self.gamma[depth - 1]) as f64;
            s += self.beta[depth - 1] * x;
        }
        if d0 <= cutoff && c > 0 {
            if c >= self.max_gamma {
                s += self.bg_tail[d0];
            } else {
                for i in d0..=cutoff {
                    s += self.beta[i - 1] * c.min(self.gamma[i - 1]) as f64;
                }
            }
        }
        s.exp()
    }

    /// Smallest `m` with `P[Poisson(lambda) > m] <= tol`.
    pub fn symbol_cap(lambda: f64, tol: f64) -> u32 {
        let mut pmf = (-lambda).exp();
        let mut cdf = pmf;
        let mut m = 0u32;
        while 1.0 - cdf > tol && m < 100_000_000 {
            m += 1;
            pmf *= lambda / m as f64;
            cdf += pmf;
        }
        m
    }

    /// Truncated conditional pmf `(p_0, ..., p_cap)`; raw Poisson masses, the
    /// missing tail is below `tail_mass_tol`.
    pub fn truncated_pmf(&self, lambda: f64) -> Vec<f64> {
        let cap = Self::symbol_cap(lambda, self.tail_mass_tol);
        let mut out = Vec::with_capacity(cap as usize + 1);
        let mut pmf = (-lambda).exp();
        out.push(pmf);
        for m in 1..=cap {
            pmf *= lambda / m as f64;
            out.push(pmf);
        }
        out
    }
}

/// A normalized log-kernel together with its regularity metadata.
#[derive(Debug, Clone)]
pub enum PotentialModel {
    Iid(Vec<f64>),
    Markov(MarkovModel),
    LongMemoryBinary(LongMemoryBinaryModel),
    PoissonAr(PoissonArModel),
}

/// Finite-order Markov kernel: one conditional row per context in `A^m`.
/// Contexts are indexed with the most recent symbol as the least significant
/// digit: `index = sum_i x_{-(i+1)} * A^i`.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    pub alphabet_size: usize,
    pub order: usize,
    rows: Vec<Vec<f64>>,
}

impl MarkovModel {
    pub fn new(alphabet_size: usize, order: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(GmixError::InvalidArgument("alphabet size must be >= 2".into()));
        }
        let n_ctx = alphabet_size.checked_pow(order as u32).ok_or_else(|| GmixError::Capacity {
            context: "markov context table",
            needed: u128::MAX,
            limit: 1 << 22,
        })?;
        if n_ctx > (1 << 22) {
            return Err(GmixError::Capacity {
                context: "markov context table",
                needed: n_ctx as u128,
                limit: 1 << 22,
            });
        }
        if rows.len() != n_ctx {
            return Err(GmixError::InvalidArgument(format!(
                "expected {n_ctx} rows, got {}",
                rows.len()
            )));
        }
        for row in &rows {
            if row.len() != alphabet_size {
                return Err(GmixError::InvalidArgument("row length != alphabet size".into()));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(GmixError::InvalidArgument(
                    "each conditional row must be a probability vector".into(),
                ));
            }
        }
        Ok(Self { alphabet_size, order, rows })
    }

    pub fn context_index<P: Past + ?Sized>(&self, past: &P) -> usize {
        let mut idx = 0usize;
        let mut base = 1usize;
        for depth in 1..=self.order {
            idx += past.symbol_at(depth) as usize * base;
            base *= self.alphabet_size;
        }
        idx
    }

    pub fn row(&self, ctx: usize) -> &[f64] {
        &self.rows[ctx]
    }

    fn n_contexts(&self) -> usize {
        self.rows.len()
    }
}

fn chi2_between(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if qi > 0.0 {
            s += (pi - qi) * (pi - qi) / qi;
        } else if pi != 0.0 {
            return f64::INFINITY;
        }
    }
    s
}

fn l1_between(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

fn log_l1_between(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 && qi > 0.0 {
            s += (pi.ln() - qi.ln()).abs();
        } else if pi != qi {
            return f64::INFINITY;
        }
    }
    s
}

impl PotentialModel {
    pub fn iid(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.len() < 2 || (total - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0) {
            return Err(GmixError::InvalidArgument(
                "iid model needs a probability vector over >= 2 symbols".into(),
            ));
        }
        Ok(PotentialModel::Iid(probs))
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            PotentialModel::Iid(p) => Alphabet::Finite(p.len()),
            PotentialModel::Markov(m) => Alphabet::Finite(m.alphabet_size),
            PotentialModel::LongMemoryBinary(_) => Alphabet::Finite(2),
            PotentialModel::PoissonAr(_) => Alphabet::CountableNonNegInts,
        }
    }

    /// Depth beyond which the kernel no longer reads the past.
    pub fn effective_memory(&self) -> usize {
        match self {
            PotentialModel::Iid(_) => 0,
            PotentialModel::Markov(m) => m.order,
            PotentialModel::LongMemoryBinary(m) => m.k_max,
            PotentialModel::PoissonAr(m) => m.cutoff(),
        }
    }

    /// `phi(a . x)`, the log conditional probability of `a` given past `x`.
    pub fn log_prob<P: Past + ?Sized>(&self, a: u32, past: &P) -> Result<f64> {
        if !self.alphabet().contains(a) {
            return Err(GmixError::SymbolOutsideAlphabet {
                symbol: a,
                size: self.alphabet().size_hint(),
            });
        }
        Ok(match self {
            PotentialModel::Iid(p) => p[a as usize].ln(),
            PotentialModel::Markov(m) => m.row(m.context_index(past))[a as usize].ln(),
            PotentialModel::LongMemoryBinary(m) => {
                let g1 = m.g_one(past);
                if a == 1 { g1.ln() } else { (1.0 - g1).ln() }
            }
            PotentialModel::PoissonAr(m) => {
                let lambda = m.lambda(past);
                -lambda + a as f64 * lambda.ln() - ln_gamma(a as f64 + 1.0)
            }
        })
    }

    /// Conditional distribution given `past` as a dense vector over
    /// `0..support_len`. For the Poisson model the vector is the truncated
    /// raw pmf (missing mass below `tail_mass_tol`).
    pub fn cond_dist<P: Past + ?Sized>(&self, past: &P) -> Vec<f64> {
        match self {
            PotentialModel::Iid(p) => p.clone(),
            PotentialModel::Markov(m) => m.row(m.context_index(past)).to_vec(),
            PotentialModel::LongMemoryBinary(m) => {
                let g1 = m.g_one(past);
                vec![1.0 - g1, g1]
            }
            PotentialModel::PoissonAr(m) => m.truncated_pmf(m.lambda(past)),
        }
    }

    /// `|sum_a e^phi(a.x) - 1|` over the (possibly truncated) support.
    pub fn normalization_defect<P: Past + ?Sized>(&self, past: &P) -> f64 {
        let mut acc = KahanSum::new();
        for p in self.cond_dist(past) {
            acc.add(p);
        }
        (acc.value() - 1.0).abs()
    }

    /// Upper bound on the chi-square variation rate of order `k >= 1`.
    ///
    /// Exact for the built-in families: zero for memoryless kernels and for
    /// finite order beyond the memory; tail-weight closed forms for the
    /// long-memory and Poisson families, where the defining sup is attained
    /// (or bracketed from above) at the extreme tail contexts.
    pub fn chi2_upper(&self, k: usize) -> f64 {
        assert!(k >= 1, "chi2_upper needs k >= 1");
        match self {
            PotentialModel::Iid(_) => 0.0,
            PotentialModel::Markov(m) => {
                if k >= m.order {
                    0.0
                } else {
                    self.markov_sup(k, chi2_between)
                }
            }
            PotentialModel::LongMemoryBinary(m) => {
                let t = m.weight_tail(k);
                (2.0 * m.eps0 * t).powi(2) / (0.25 - m.eps0 * m.eps0)
            }
            PotentialModel::PoissonAr(m) => {
                let t = m.abs_tail_after(k);
                (m.s_total.exp() * t.exp_m1().powi(2)).exp_m1()
            }
        }
    }

    /// Chi-square discrepancy bound between kernels with nothing shared
    /// (order zero). Needed to certify the very first coupled block.
    pub fn chi2_zero(&self) -> f64 {
        match self {
            PotentialModel::Iid(_) => 0.0,
            PotentialModel::Markov(m) => {
                if m.order == 0 {
                    0.0
                } else {
                    self.markov_sup(0, chi2_between)
                }
            }
            PotentialModel::LongMemoryBinary(m) => {
                (2.0 * m.eps0).powi(2) / (0.25 - m.eps0 * m.eps0)
            }
            PotentialModel::PoissonAr(m) => {
                (m.s_total.exp() * m.s_total.exp_m1().powi(2)).exp_m1()
            }
        }
    }

    /// Upper bound on the L1 variation rate of the kernel `e^phi` at order
    /// `k >= 1`.
    pub fn var_kernel_upper(&self, k: usize) -> f64 {
        assert!(k >= 1);
        match self {
            PotentialModel::Iid(_) => 0.0,
            PotentialModel::Markov(m) => {
                if k >= m.order {
                    0.0
                } else {
                    self.markov_sup(k, l1_between)
                }
            }
            PotentialModel::LongMemoryBinary(m) => 4.0 * m.eps0 * m.weight_tail(k),
            PotentialModel::PoissonAr(m) => {
                // TV(Poisson(a), Poisson(b)) <= 1 - e^{-|a-b|} by the
                // additive coupling; |a-b| <= e^S (e^T - 1).
                let d = m.s_total.exp() * m.abs_tail_after(k).exp_m1();
                2.0 * -(-d).exp_m1()
            }
        }
    }

    /// Upper bound on the L1 variation rate of the potential `phi` itself at
    /// order `k >= 1`. Infinite for the Poisson family: coordinate-wise log
    /// differences do not sum over an infinite alphabet.
    pub fn var_potential_upper(&self, k: usize) -> f64 {
        assert!(k >= 1);
        match self {
            PotentialModel::Iid(_) => 0.0,
            PotentialModel::Markov(m) => {
                if k >= m.order {
                    0.0
                } else {
                    self.markov_sup(k, log_l1_between)
                }
            }
            PotentialModel::LongMemoryBinary(m) => {
                let t = m.weight_tail(k);
                if t == 0.0 {
                    return 0.0;
                }
                let c = 2.0 * m.eps0 * t;
                // sup over the shared head is attained at an endpoint of the
                // achievable g(1|y) interval (the objective is convex there)
                let lo = 0.5 - m.eps0;
                let hi = 0.5 + m.eps0 - c;
                let val = |a: f64| (1.0 + c / a).ln() - (1.0 - c / (1.0 - a)).ln();
                val(lo).max(val(hi))
            }
            PotentialModel::PoissonAr(_) => f64::INFINITY,
        }
    }

    /// Lower bound on `sum_a inf_x g(a | x)`, the kernel mass shared by any
    /// two pasts. Used to floor the order-zero coupling bound.
    pub fn min_common_mass(&self) -> f64 {
        match self {
            PotentialModel::Iid(_) => 1.0,
            PotentialModel::Markov(m) => {
                let mut total = 0.0;
                for a in 0..m.alphabet_size {
                    let mut lo = f64::INFINITY;
                    for ctx in 0..m.n_contexts() {
                        lo = lo.min(m.row(ctx)[a]);
                    }
                    total += lo;
                }
                total
            }
            PotentialModel::LongMemoryBinary(m) => 1.0 - 2.0 * m.eps0,
            PotentialModel::PoissonAr(m) => {
                // pmf(a; .) is unimodal in lambda, so the infimum over the
                // admissible interval sits at one of the endpoints
                let lo = (-m.s_total).exp();
                let hi = m.s_total.exp();
                let p_lo = m.truncated_pmf(lo);
                let p_hi = m.truncated_pmf(hi);
                let n = p_lo.len().min(p_hi.len());
                (0..n).map(|a| p_lo[a].min(p_hi[a])).sum()
            }
        }
    }

    /// Sup over context pairs sharing the `k` most recent symbols, for
    /// finite-order models; `metric` compares the two conditional rows.
    fn markov_sup(&self, k: usize, metric: fn(&[f64], &[f64]) -> f64) -> f64 {
        let m = match self {
            PotentialModel::Markov(m) => m,
            _ => unreachable!(),
        };
        let a = m.alphabet_size;
        let shared_count = a.pow(k as u32);
        let free_count = a.pow((m.order - k) as u32);
        let mut best: f64 = 0.0;
        for shared in 0..shared_count {
            for r1 in 0..free_count {
                let c1 = shared + r1 * shared_count;
                for r2 in 0..free_count {
                    if r1 == r2 {
                        continue;
                    }
                    let c2 = shared + r2 * shared_count;
                    best = best.max(metric(m.row(c1), m.row(c2)));
                }
            }
        }
        best
    }

    /// Lower estimate of the chi-square variation rate of order `k`, by
    /// maximizing the defining sum over `n_contexts` random context triples
    /// plus the two extreme tail contexts.
    pub fn chi2_empirical<R: Rng>(&self, k: usize, n_contexts: usize, rng: &mut R) -> f64 {
        assert!(k >= 1);
        let extra = self.effective_memory().saturating_sub(k).min(64);
        let (max_sym, tail_syms): (u32, Vec<u32>) = match self.alphabet() {
            Alphabet::Finite(n) => ((n - 1) as u32, vec![0, (n - 1) as u32]),
            Alphabet::CountableNonNegInts => {
                let g = match self {
                    PotentialModel::PoissonAr(m) => m.max_gamma,
                    _ => 1,
                };
                (g, vec![0, g])
            }
        };
        let mut best: f64 = 0.0;
        let mut eval = |shared: &[u32], x: &History, y: &History| {
            let hx = History::new([shared, x.prefix()].concat(), x.tail_symbol());
            let hy = History::new([shared, y.prefix()].concat(), y.tail_symbol());
            let v = match self {
                PotentialModel::PoissonAr(m) => {
                    let lx = m.lambda(&hx);
                    let ly = m.lambda(&hy);
                    ((lx - ly) * (lx - ly) / ly).exp_m1()
                }
                _ => {
                    let p = self.cond_dist(&hx);
                    let q = self.cond_dist(&hy);
                    chi2_between(&p, &q)
                }
            };
            if v > best {
                best = v;
            }
        };
        // extreme triples: all-max vs all-zero beyond depth k
        let x_hi = History::new(vec![max_sym; extra], max_sym);
        let y_lo = History::new(vec![0; extra], 0);
        for &zs in &tail_syms {
            let shared = vec![zs; k];
            eval(&shared, &x_hi, &y_lo);
            eval(&shared, &y_lo, &x_hi);
        }
        let rand_sym = |rng: &mut R| -> u32 { rng.random_range(0..=max_sym) };
        for _ in 0..n_contexts {
            let shared: Vec<u32> = (0..k).map(|_| rand_sym(rng)).collect();
            let xp: Vec<u32> = (0..extra).map(|_| rand_sym(rng)).collect();
            let yp: Vec<u32> = (0..extra).map(|_| rand_sym(rng)).collect();
            let x = History::new(xp, *tail_syms.get(rng.random_range(0..tail_syms.len())).unwrap());
            let y = History::new(yp, *tail_syms.get(rng.random_range(0..tail_syms.len())).unwrap());
            eval(&shared, &x, &y);
        }
        best
    }

    /// Regularity profile derived from the model's own rate bounds.
    ///
    /// The explicit list covers every order up to the effective memory and is
    /// complete (the rates vanish beyond it); the power-law envelope is the
    /// tightest `C / k^(1+delta)` enclosing the list for the given `delta`.
    pub fn profile(&self, delta: f64) -> RegularityProfile {
        let mem = self.effective_memory();
        let chi2: Vec<f64> = (1..=mem).map(|k| self.chi2_upper(k)).collect();
        let var: Vec<f64> = (1..=mem).map(|k| self.var_kernel_upper(k)).collect();
        let mut c = 0.0f64;
        for (i, &v) in chi2.iter().enumerate() {
            if v.is_finite() {
                c = c.max(v * ((i + 1) as f64).powf(1.0 + delta));
            }
        }
        RegularityProfile {
            chi2_c: c,
            chi2_delta: delta,
            explicit_chi2: Some(chi2),
            explicit_complete: true,
            explicit_var: Some(var),
            chi2_zero: Some(self.chi2_zero()),
            min_common_mass: Some(self.min_common_mass()),
        }
    }
}

/// Two-state chain used widely in tests and examples: transition rows
/// `(0.9, 0.1)` from state 0 and `(0.2, 0.8)` from state 1 (second
/// eigenvalue 0.7, stationary law (2/3, 1/3)).
pub fn two_state_example() -> PotentialModel {
    PotentialModel::Markov(
        MarkovModel::new(2, 1, vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
    )
}
