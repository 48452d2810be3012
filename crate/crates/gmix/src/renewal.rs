//! The fully computable bound pipeline: per-block coupling-error bounds from
//! the regularity profile, the dominating failure-probability sequence, the
//! renewal recursion, and the assembled rate bounds.
//!
//! The chain of quantities:
//!
//! 1. `block_tv_bound(n, k)` bounds the probability that block `n` of the
//!    block-maximal coupling disagrees, given that the `k` previous blocks
//!    agreed. It is the minimum of a Pinsker-type bound built from the
//!    chi-square sums over the block window and a Bretagnolle-Huber ceiling
//!    built from the summed rates.
//! 2. `dominating_failure_probs` turns those into a monotone sequence
//!    `b_k >= sup_n block_tv_bound(n, k)` via a finite scan plus analytic
//!    covers for the unscanned tail.
//! 3. A 0/1 process that fails with probability `b_k` after `k` agreeing
//!    steps stochastically dominates the block disagreement indicators, and
//!    its marginals solve the renewal equation `u_n = sum f_k u_{n-k}` with
//!    `f_i = b_{i-1} prod_{l<=i-2} (1 - b_l)`. The computed `u_n` is therefore
//!    a certified, constant-free upper bound on the probability that block
//!    `n` disagrees.
//! 4. Relaxation and mixing rate bounds follow by the index map between
//!    coordinates and blocks, and by summing the `u` tail with a certified
//!    remainder.
//!
//! The unspecified constants of the asymptotic theory never materialize:
//! `u_n` itself is the bound, and rates are checked by slope fitting.

use crate::coupling::BlockSchedule;
use crate::error::{GmixError, Result};
use crate::num::{power_range, power_tail, KahanSum};
use crate::potential::RegularityProfile;

/// Default number of block indices scanned beyond `k + 1` when taking the
/// sup over `n`; the analytic covers take over beyond the scan.
pub const DEFAULT_SCAN_WINDOW: usize = 64;

/// Chi-square rate sums for a profile: point values, range sums and tails,
/// exact over the explicit list and Euler-Maclaurin over the power-law part.
pub(crate) struct Chi2Curve<'p> {
    profile: &'p RegularityProfile,
    cum: Vec<f64>, // cum[i] = sum of explicit entries 1..=i
}

impl<'p> Chi2Curve<'p> {
    pub fn new(profile: &'p RegularityProfile) -> Self {
        let list = profile.explicit_chi2.as_deref().unwrap_or(&[]);
        let mut cum = Vec::with_capacity(list.len() + 1);
        cum.push(0.0);
        let mut acc = KahanSum::new();
        for &v in list {
            acc.add(v);
            cum.push(acc.value());
        }
        Self { profile, cum }
    }

    fn s(&self) -> f64 {
        1.0 + self.profile.chi2_delta
    }

    fn len(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn value(&self, k: u128) -> f64 {
        self.profile.chi2_at(k.min(u64::MAX as u128) as u64)
    }

    /// `sum_{m=a}^{b}` of the rate bounds (inclusive; empty ranges are 0).
    pub fn range_sum(&self, a: u128, b: u128) -> f64 {
        if b < a || b < 1 {
            return 0.0;
        }
        let a = a.max(1);
        let len = self.len() as u128;
        let mut total = 0.0;
        if a <= len {
            let hi = b.min(len) as usize;
            total += self.cum[hi] - self.cum[(a - 1) as usize];
        }
        if b > len && !self.profile.explicit_complete {
            let lo = a.max(len + 1);
            total += self.profile.chi2_c * power_range(self.s(), lo as f64, b as f64);
        }
        total.max(0.0)
    }

    /// `sum_{m >= a}`.
    pub fn tail(&self, a: u128) -> f64 {
        let a = a.max(1);
        let len = self.len() as u128;
        let mut total = 0.0;
        if a <= len {
            total += self.cum[len as usize] - self.cum[(a - 1) as usize];
        }
        if !self.profile.explicit_complete {
            total += self.profile.chi2_c * power_tail(self.s(), a.max(len + 1) as f64);
        }
        total.max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.tail(1)
    }
}

fn bh_of_mass(mass: f64) -> f64 {
    if mass.is_finite() {
        (-(-mass).exp_m1()).sqrt().min(1.0)
    } else {
        1.0
    }
}

/// Upper bound on the disagreement probability of coupled block `n` given
/// `k` previously agreeing blocks (`k = 0` allowed; otherwise `1 <= k < n`).
///
/// For `k >= 1` this is the minimum of the Pinsker bound over the block's
/// chi-square window and the Bretagnolle-Huber ceiling. For `k = 0` the
/// window reaches order zero, so the ceiling additionally needs the
/// profile's `chi2_zero`; a bare power-law envelope carries none and the
/// ceiling over positive orders is returned unchanged.
pub fn block_tv_bound(
    profile: &RegularityProfile,
    schedule: &BlockSchedule,
    n: u64,
    k: u64,
) -> Result<f64> {
    let curve = Chi2Curve::new(profile);
    block_tv_bound_inner(profile, &curve, schedule, n, k)
}

fn block_tv_bound_inner(
    profile: &RegularityProfile,
    curve: &Chi2Curve,
    schedule: &BlockSchedule,
    n: u64,
    k: u64,
) -> Result<f64> {
    if n < 1 || (k > 0 && k + 1 > n) {
        return Err(GmixError::Domain(format!(
            "block divergence bound needs n >= 1 and 0 <= k <= n-1, got n={n}, k={k}"
        )));
    }
    let bret1 = bh_of_mass(curve.total());
    if k == 0 {
        let ceiling = match profile.chi2_zero {
            Some(c0) => bh_of_mass(c0 + curve.total()),
            None => bret1,
        };
        let (lo, hi) = schedule.block_bounds(n);
        let mass_floor = match profile.min_common_mass {
            Some(m) if m > 0.0 => 1.0 - m.powi((hi - lo) as i32),
            _ => 1.0,
        };
        return Ok(ceiling.min(mass_floor).min(1.0));
    }
    let (lo, hi) = schedule.block_bounds(n);
    let anchor = schedule.block_start(n - k);
    let pins = (0.5 * curve.range_sum(lo - anchor, hi - 1 - anchor)).sqrt();
    Ok(pins.min(bret1).min(1.0))
}

/// `6 * 2^beta * 4^delta * beta / k^(delta beta + 1)`: analytic majorant of
/// the gap quantity at `n = k + 1` (valid for `k >= 3`).
fn gap_majorant(delta: f64, beta: f64, k: f64) -> f64 {
    6.0 * 2f64.powf(beta) * 4f64.powf(delta) * beta / k.powf(delta * beta + 1.0)
}

/// Power-tail gap bracketing one block's divergence mass:
/// `(n^b - (n-k)^b - 2)^-d  -  ((n+1)^b - (n-k)^b)^-d`.
pub fn delta_gap(delta: f64, beta: f64, k: u64, n: u64) -> Result<f64> {
    if !(delta > 0.0) || !(beta >= 1.0) || k < 3 || n < k + 1 {
        return Err(GmixError::Domain(format!(
            "delta_gap needs delta > 0, beta >= 1, k >= 3, n >= k+1; got ({delta}, {beta}, {k}, {n})"
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    let a = nf.powf(beta) - (nf - kf).powf(beta) - 2.0;
    if a <= 0.0 {
        return Err(GmixError::Domain(format!(
            "delta_gap undefined: n^beta - (n-k)^beta <= 2 at (k={k}, n={n}, beta={beta})"
        )));
    }
    let b = (nf + 1.0).powf(beta) - (nf - kf).powf(beta);
    Ok(a.powf(-delta) - b.powf(-delta))
}

/// The monotone dominating sequence `b_0, ..., b_cap`:
/// `b_k` upper-bounds `sup_{n >= k+1} block_tv_bound(n, k)`.
///
/// For unit block exponent the bound is independent of `n` and is taken
/// exactly. Otherwise the sup is bracketed by a scan over
/// `n in [k+1, k+scan_window]` together with two covers for larger `n`: the
/// full chi-square tail beyond the window's smallest order, and (for
/// `k >= 3`) the gap majorant, whose monotonicity in `n` makes its value at
/// the scan edge cover everything beyond. A running minimum enforces
/// monotonicity, which is sound because the true sups are non-increasing
/// in `k`.
pub fn dominating_failure_probs(
    profile: &RegularityProfile,
    schedule: &BlockSchedule,
    cap: usize,
    scan_window: usize,
) -> Result<Vec<f64>> {
    profile.validate()?;
    let curve = Chi2Curve::new(profile);
    let beta = schedule.beta();
    let delta = profile.chi2_delta;
    let total = curve.total();
    let bret1 = bh_of_mass(total);
    let mut b = Vec::with_capacity(cap + 1);

    // order zero: Bretagnolle-Huber ceiling including the order-zero term,
    // floored by the shared kernel mass when blocks are single coordinates
    let mut b0 = match profile.chi2_zero {
        Some(c0) => bh_of_mass(c0 + total),
        None => bret1,
    };
    if beta == 1.0 {
        if let Some(m) = profile.min_common_mass {
            b0 = b0.min(1.0 - m);
        }
    }
    b.push(b0.clamp(0.0, 1.0));

    for k in 1..=cap as u64 {
        let bk = if beta == 1.0 {
            // single-coordinate blocks: the Pinsker window is exactly the
            // order-k rate for every n
            (0.5 * curve.value(k as u128)).sqrt().min(bret1)
        } else {
            let n_last = k + scan_window as u64;
            let mut scan: f64 = 0.0;
            for n in (k + 1)..=n_last {
                scan = scan.max(block_tv_bound_inner(profile, &curve, schedule, n, k)?);
            }
            // covers for n > n_last
            let n0 = n_last + 1;
            let t_star = ((n0 as f64).powf(beta) - 1.0 - ((n0 - k) as f64).powf(beta))
                .ceil()
                .max(1.0);
            let mut cover = (0.5 * curve.tail(t_star as u128)).sqrt();
            if k >= 3 {
                if let Ok(gap) = delta_gap(delta, beta, k, n0) {
                    cover = cover.min((profile.chi2_c * gap / (2.0 * delta)).sqrt());
                }
            }
            let mut v = scan.max(cover);
            if k >= 3 {
                v = v.min((profile.chi2_c * gap_majorant(delta, beta, k as f64) / (2.0 * delta)).sqrt());
            }
            v.min(bret1)
        };
        b.push(bk.clamp(0.0, 1.0));
    }
    // running minimum: valid because the underlying sups are non-increasing
    for i in 1..b.len() {
        b[i] = b[i].min(b[i - 1]);
    }
    Ok(b)
}

/// First-failure distribution of the dominating process:
/// `f_i = b_{i-1} prod_{l=0}^{i-2} (1 - b_l)` for `i = 1..=len(b)`.
/// Slot 0 is unused and holds 0.
pub fn first_failure_probs(b: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = b.iter().position(|&x| !(x < 1.0)) {
        return Err(GmixError::NoCouplingGuarantee(format!(
            "b_{bad} = {} reaches 1; the dominating process never couples",
            b[bad]
        )));
    }
    let mut f = Vec::with_capacity(b.len() + 1);
    f.push(0.0);
    let mut survive = 1.0;
    for &bk in b {
        f.push(bk * survive);
        survive *= 1.0 - bk;
    }
    Ok(f)
}

/// Solve `u_0 = 1`, `u_n = sum_{k=1}^{n} f_k u_{n-k}` up to `n_max`;
/// missing `f_k` beyond the provided prefix are treated as 0.
pub fn renewal_sequence(f: &[f64], n_max: usize) -> Vec<f64> {
    let mut u = Vec::with_capacity(n_max + 1);
    u.push(1.0);
    for n in 1..=n_max {
        let k_hi = n.min(f.len().saturating_sub(1));
        let mut acc = KahanSum::new();
        for k in 1..=k_hi {
            acc.add(f[k] * u[n - k]);
        }
        u.push(acc.value().clamp(0.0, 1.0));
    }
    u
}

/// The assembled pipeline: profile + schedule + the `b`, `f`, `u` sequences.
#[derive(Debug, Clone)]
pub struct BoundPipeline {
    pub profile: RegularityProfile,
    pub schedule: BlockSchedule,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
    /// The Bretagnolle-Huber ceiling `1 - eps` over positive orders.
    pub eps_floor: f64,
}

impl BoundPipeline {
    /// Build the pipeline with `u` computed up to `n_max`.
    ///
    /// Requires `beta >= 1` and `beta > 1/delta`: below that threshold the
    /// dominating probabilities are not summable and the renewal bound
    /// carries no guarantee.
    pub fn build(
        profile: &RegularityProfile,
        beta: f64,
        n_max: usize,
        scan_window: usize,
    ) -> Result<Self> {
        if !(beta >= 1.0) || !(beta > 1.0 / profile.chi2_delta) {
            return Err(GmixError::InvalidArgument(format!(
                "block exponent must satisfy beta >= 1 and beta > 1/delta; got beta={beta}, delta={}",
                profile.chi2_delta
            )));
        }
        let schedule = BlockSchedule::new(beta)?;
        let b = dominating_failure_probs(profile, &schedule, n_max.max(1) - 1, scan_window)?;
        let f = first_failure_probs(&b)?;
        let u = renewal_sequence(&f, n_max);
        let curve = Chi2Curve::new(profile);
        Ok(Self {
            profile: profile.clone(),
            schedule,
            b,
            f,
            u,
            eps_floor: bh_of_mass(curve.total()),
        })
    }

    /// Certified bound on the probability that coupled block `n` disagrees.
    pub fn failure_bound(&self, n: usize) -> f64 {
        self.u[n]
    }

    /// Block index covering coordinate `k` from below: `max(1, ceil(k^(1/beta) - 1))`.
    pub fn block_index_for_coordinate(&self, k: u64) -> usize {
        let n = ((k as f64).powf(1.0 / self.schedule.beta()) - 1.0).ceil();
        (n.max(1.0)) as usize
    }

    /// Bound on the relaxation rate at coordinate `k`: the TV distance
    /// between the two chains' coordinate-`k` marginals from any pair of
    /// starting pasts is at most `u_{n(k)}`.
    pub fn relaxation_bound(&self, k: u64) -> f64 {
        self.u[self.block_index_for_coordinate(k).min(self.u.len() - 1)]
    }

    /// Upper bound on `sum_{k >= 1} f_k`, bracketing the unseen tail with
    /// the gap majorant.
    fn total_failure_mass_upper(&self) -> f64 {
        let partial: f64 = {
            let mut acc = KahanSum::new();
            for &x in &self.f {
                acc.add(x);
            }
            acc.value()
        };
        let kk = self.b.len() as f64;
        let survive: f64 = self.b.iter().map(|&x| (1.0 - x).ln()).sum::<f64>().exp();
        let p = (self.profile.chi2_delta * self.schedule.beta() + 1.0) / 2.0;
        let b_tail = if self.profile.explicit_complete
            && self.schedule.beta() == 1.0
            && self.b.len() > self.profile.explicit_chi2.as_ref().map_or(0, |v| v.len())
        {
            // rates vanish beyond the explicit list, so later b's are zero
            0.0
        } else {
            let amp = (3.0 * self.profile.chi2_c * 2f64.powf(self.schedule.beta())
                * 4f64.powf(self.profile.chi2_delta)
                * self.schedule.beta()
                / self.profile.chi2_delta)
                .sqrt();
            (amp * (kk - 1.0).powf(1.0 - p) / (p - 1.0)).min(1.0)
        };
        (partial + survive * b_tail).min(1.0)
    }

    /// Bound on the mixing rate at coordinate `k`: TV distance between the
    /// laws of the whole futures beyond `k` is at most the meeting-time
    /// tail, bounded by `sum_{j >= n(k)} u_j`.
    ///
    /// Returns `(bound, remainder)`: the remainder is the certified upper
    /// bound on the `u`-mass beyond the computed horizon, already included
    /// in `bound`. Driving it to zero would require astronomically long
    /// horizons for slowly decaying profiles, so it is surfaced instead of
    /// hidden behind a tolerance.
    pub fn mixing_bound(&self, k: u64) -> (f64, f64) {
        let n0 = self.block_index_for_coordinate(k).min(self.u.len() - 1);
        let partial: f64 = {
            let mut acc = KahanSum::new();
            for &x in &self.u[n0..] {
                acc.add(x);
            }
            acc.value()
        };
        let f_hi = self.total_failure_mass_upper();
        let remainder = if f_hi < 1.0 {
            let total_u_hi = 1.0 / (1.0 - f_hi);
            let all: f64 = {
                let mut acc = KahanSum::new();
                for &x in &self.u {
                    acc.add(x);
                }
                acc.value()
            };
            (total_u_hi - all).max(0.0)
        } else {
            f64::INFINITY
        };
        (partial + remainder, remainder)
    }
}

/// Certified bound `u_1..u_n` on the block disagreement probabilities of the
/// block-maximal coupling under the given profile and block exponent.
pub fn coupling_failure_bound(
    profile: &RegularityProfile,
    beta: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    Ok(BoundPipeline::build(profile, beta, n_max, DEFAULT_SCAN_WINDOW)?.u)
}

/// Relaxation-rate bound at a single coordinate.
pub fn relaxation_rate_bound(profile: &RegularityProfile, beta: f64, k: u64) -> Result<f64> {
    let pipe = BoundPipeline::build(
        profile,
        beta,
        ((k as f64).powf(1.0 / beta).ceil() as usize).max(2),
        DEFAULT_SCAN_WINDOW,
    )?;
    Ok(pipe.relaxation_bound(k))
}

/// Mixing-rate bound at a single coordinate, with the stated horizon for the
/// tail sum.
pub fn mixing_rate_bound(
    profile: &RegularityProfile,
    beta: f64,
    k: u64,
    u_horizon: usize,
) -> Result<(f64, f64)> {
    let pipe = BoundPipeline::build(profile, beta, u_horizon, DEFAULT_SCAN_WINDOW)?;
    Ok(pipe.mixing_bound(k))
}

/// Report of a numeric validator sweep.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub pass: bool,
    pub cases: usize,
    pub worst_margin: f64,
    pub worst_case: String,
}

/// Checks that `delta_gap` is non-increasing in `n` over the grid.
pub fn validate_gap_monotonicity(
    deltas: &[f64],
    betas: &[f64],
    k_lo: u64,
    k_hi: u64,
    n_max: u64,
) -> ValidationReport {
    let mut worst = f64::INFINITY;
    let mut worst_case = String::new();
    let mut cases = 0usize;
    for &d in deltas {
        for &bt in betas {
            for k in k_lo..=k_hi {
                let mut prev = None;
                for n in (k + 1)..=n_max {
                    let g = match delta_gap(d, bt, k, n) {
                        Ok(g) => g,
                        Err(_) => continue,
                    };
                    if let Some(p) = prev {
                        let margin: f64 = p - g;
                        cases += 1;
                        if margin < worst {
                            worst = margin;
                            worst_case = format!("delta={d}, beta={bt}, k={k}, n={n}");
                        }
                    }
                    prev = Some(g);
                }
            }
        }
    }
    ValidationReport { pass: worst >= -1e-12, cases, worst_margin: worst, worst_case }
}

/// Checks `delta_gap(k, k+1) <= 6 * 2^beta * 4^delta * beta / k^(delta beta + 1)`.
pub fn validate_gap_majorant(
    deltas: &[f64],
    betas: &[f64],
    k_lo: u64,
    k_hi: u64,
) -> ValidationReport {
    let mut worst = f64::INFINITY;
    let mut worst_case = String::new();
    let mut cases = 0usize;
    for &d in deltas {
        for &bt in betas {
            for k in k_lo..=k_hi {
                let g = match delta_gap(d, bt, k, k + 1) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let margin = gap_majorant(d, bt, k as f64) - g;
                cases += 1;
                if margin < worst {
                    worst = margin;
                    worst_case = format!("delta={d}, beta={bt}, k={k}");
                }
            }
        }
    }
    ValidationReport { pass: worst >= 0.0, cases, worst_margin: worst, worst_case }
}

/// The power-ratio inequality behind the gap monotonicity: for `alpha > 1`
/// and `0 < a < b`,
/// `((b+1)^a - a^a) / (b^a - a^a)` is at least the same ratio at `alpha - 1`.
pub fn power_ratio_inequality_holds(alpha: f64, a: f64, b: f64) -> Result<bool> {
    if !(alpha > 1.0) || !(a > 0.0) || !(b > a) {
        return Err(GmixError::Domain(format!(
            "need alpha > 1 and 0 < a < b, got ({alpha}, {a}, {b})"
        )));
    }
    let lhs_num = (b + 1.0).powf(alpha) - a.powf(alpha);
    let lhs_den = b.powf(alpha) - a.powf(alpha);
    let rhs_num = (b + 1.0).powf(alpha - 1.0) - a.powf(alpha - 1.0);
    let rhs_den = b.powf(alpha - 1.0) - a.powf(alpha - 1.0);
    // cross-multiplied comparison; all factors are positive
    let lhs = lhs_num * rhs_den;
    let rhs = rhs_num * lhs_den;
    Ok(lhs >= rhs - 1e-11 * lhs.abs().max(rhs.abs()).max(1.0))
}

/// OLS slope and r-squared of `ln seq[n]` against `ln n` over `n in [lo, hi]`.
pub fn fit_decay_slope(seq: &[f64], lo: usize, hi: usize) -> Result<(f64, f64)> {
    if lo < 1 || hi >= seq.len() + 1 || lo >= hi {
        return Err(GmixError::Domain(format!(
            "slope range [{lo}, {hi}] invalid for sequence of length {}",
            seq.len()
        )));
    }
    let hi = hi.min(seq.len() - 1);
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        if !(seq[n] > 0.0) {
            return Err(GmixError::Domain(format!(
                "nonpositive entry seq[{n}] = {} in slope fit",
                seq[n]
            )));
        }
        xs.push((n as f64).ln());
        ys.push(seq[n].ln());
    }
    let (slope, _, r2) = crate::num::ols(&xs, &ys);
    Ok((slope, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn zero_profile() -> RegularityProfile {
        RegularityProfile::power_law(0.0, 1.5).unwrap()
    }

    #[test]
    fn block_bound_for_zero_rates_is_zero() {
        let p = zero_profile();
        let s = BlockSchedule::new(1.0).unwrap();
        assert_eq!(block_tv_bound(&p, &s, 10, 3).unwrap(), 0.0);
        assert_eq!(block_tv_bound(&p, &s, 1, 0).unwrap(), 0.0);
        assert!(block_tv_bound(&p, &s, 3, 3).is_err());
    }

    #[test]
    fn order_zero_ceiling_is_the_bh_value() {
        // total rate mass ln 2; no Pinsker control at order zero
        let p = RegularityProfile {
            chi2_c: 0.0,
            chi2_delta: 1.5,
            explicit_chi2: Some(vec![2f64.ln()]),
            explicit_complete: true,
            explicit_var: None,
            chi2_zero: None,
            min_common_mass: None,
        };
        let s = BlockSchedule::new(1.0).unwrap();
        assert_abs_diff_eq!(
            block_tv_bound(&p, &s, 5, 0).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn pinsker_window_single_coordinate_blocks() {
        let p = RegularityProfile::power_law(1.0, 1.5).unwrap();
        let s = BlockSchedule::new(1.0).unwrap();
        let got = block_tv_bound(&p, &s, 10, 3).unwrap();
        let expect = (0.5 / 3f64.powf(2.5)).sqrt();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(expect, 0.179095, epsilon = 1e-6);
    }

    #[test]
    fn pinsker_window_matches_direct_summation_for_beta_two() {
        let p = RegularityProfile::power_law(1.0, 0.8).unwrap();
        let s = BlockSchedule::new(2.0).unwrap();
        // n=4, k=3: window j in [16, 25), orders j - M_1
        let direct: f64 = (16u64..25)
            .map(|j| 1.0 / ((j - 1) as f64).powf(1.8))
            .sum();
        let got = block_tv_bound(&p, &s, 4, 3).unwrap();
        assert_abs_diff_eq!(got, (0.5 * direct).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn dominating_probs_zero_profile() {
        let s = BlockSchedule::new(1.0).unwrap();
        let b = dominating_failure_probs(&zero_profile(), &s, 50, 16).unwrap();
        assert!(b.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dominating_probs_slope_and_monotonicity() {
        let p = RegularityProfile::power_law(1.0, 1.5).unwrap();
        let s = BlockSchedule::new(1.0).unwrap();
        let b = dominating_failure_probs(&p, &s, 1000, DEFAULT_SCAN_WINDOW).unwrap();
        for w in b.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        let (slope, _) = fit_decay_slope(&b, 10, 1000).unwrap();
        assert!((slope + 1.25).abs() < 0.1, "slope {slope}");
        // ceilings
        let bret = (1.0f64 - (-power_tail(2.5, 1.0)).exp()).sqrt();
        assert!(b.iter().all(|&x| x <= bret + 1e-15));
    }

    #[test]
    fn first_failure_probs_examples() {
        assert!(first_failure_probs(&[0.0, 0.0]).unwrap().iter().all(|&x| x == 0.0));
        let f = first_failure_probs(&[0.5, 0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(f[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], 0.25, epsilon = 1e-15);
        assert_eq!(f[3], 0.0);
        assert!(matches!(
            first_failure_probs(&[0.3, 1.0]),
            Err(GmixError::NoCouplingGuarantee(_))
        ));
    }

    #[test]
    fn renewal_hand_recursion() {
        let f = vec![0.0, 0.5, 0.25];
        let u = renewal_sequence(&f, 4);
        assert_eq!(u[0], 1.0);
        assert_abs_diff_eq!(u[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u[2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u[3], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(u[4], 0.3125, epsilon = 1e-15);
        // geometric f gives super-polynomial u decay
        let u = renewal_sequence(&f, 4000);
        let (slope, _) = fit_decay_slope(&u, 2000, 4000).unwrap();
        assert!(slope < -1.0, "slope {slope}");
    }

    #[test]
    fn failure_mass_identity() {
        let p = RegularityProfile::power_law(0.6, 1.4).unwrap();
        let s = BlockSchedule::new(1.0).unwrap();
        let b = dominating_failure_probs(&p, &s, 4000, 8).unwrap();
        let f = first_failure_probs(&b).unwrap();
        let sum_f: f64 = f.iter().sum();
        let prod: f64 = b.iter().map(|&x| (1.0 - x).ln()).sum::<f64>().exp();
        assert_abs_diff_eq!(sum_f, 1.0 - prod, epsilon = 1e-10);
        assert!(sum_f < 1.0);
    }

    #[test]
    fn pipeline_requires_admissible_beta() {
        let p = RegularityProfile::power_law(1.0, 0.8).unwrap();
        let err = BoundPipeline::build(&p, 1.0, 100, 8).unwrap_err();
        assert!(err.to_string().contains("beta"));
        assert!(BoundPipeline::build(&p, 2.0, 100, 8).is_ok());
    }

    #[test]
    fn u_is_a_probability_and_eventually_non_increasing() {
        let p = RegularityProfile::power_law(1.0, 1.5).unwrap();
        let pipe = BoundPipeline::build(&p, 1.0, 3000, 8).unwrap();
        assert!(pipe.u.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let tail = &pipe.u[100..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn mixing_dominates_relaxation() {
        let p = RegularityProfile::power_law(0.4, 1.5).unwrap();
        let pipe = BoundPipeline::build(&p, 1.0, 4000, 8).unwrap();
        for k in [1u64, 5, 20, 100, 1000] {
            let (mix, _) = pipe.mixing_bound(k);
            assert!(mix >= pipe.relaxation_bound(k) - 1e-12);
        }
    }

    #[test]
    fn zero_profile_rate_bounds_vanish() {
        let p = zero_profile();
        let pipe = BoundPipeline::build(&p, 1.0, 200, 8).unwrap();
        assert_eq!(pipe.relaxation_bound(50), 0.0);
        let (mix, rem) = pipe.mixing_bound(50);
        assert_eq!(mix, 0.0);
        assert_eq!(rem, 0.0);
    }

    #[test]
    fn gap_examples() {
        // beta = 1 collapses the gap to 1/(k-2) - 1/(k+1), independent of n
        for n in [4u64, 7, 30, 500] {
            assert_abs_diff_eq!(delta_gap(1.0, 1.0, 3, n).unwrap(), 0.75, epsilon = 1e-12);
        }
        assert!(gap_majorant(1.0, 1.0, 3.0) >= 0.75);
        assert_abs_diff_eq!(gap_majorant(1.0, 1.0, 3.0), 48.0 / 9.0, epsilon = 1e-12);
        assert!(delta_gap(1.0, 1.0, 2, 5).is_err());
        assert!(delta_gap(1.0, 1.0, 3, 3).is_err());
    }

    #[test]
    fn power_ratio_inequality_example() {
        // alpha=2, a=1, b=2: 8/3 >= 2
        assert!(power_ratio_inequality_holds(2.0, 1.0, 2.0).unwrap());
        assert!(power_ratio_inequality_holds(1.0, 1.0, 2.0).is_err());
        assert!(power_ratio_inequality_holds(2.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn slope_fit_exact_power_laws() {
        let sq: Vec<f64> = (0..2000).map(|n| if n == 0 { 1.0 } else { (n as f64).powi(-2) }).collect();
        let (s, r2) = fit_decay_slope(&sq, 10, 1999).unwrap();
        assert_abs_diff_eq!(s, -2.0, epsilon = 1e-6);
        assert!(r2 > 0.999999);
        let p125: Vec<f64> = (0..2000).map(|n| if n == 0 { 1.0 } else { (n as f64).powf(-1.25) }).collect();
        let (s, _) = fit_decay_slope(&p125, 10, 1999).unwrap();
        assert_abs_diff_eq!(s, -1.25, epsilon = 1e-6);
        let with_zero = vec![1.0, 0.5, 0.0, 0.1];
        assert!(fit_decay_slope(&with_zero, 1, 3).is_err());
    }

    #[test]
    fn validators_pass_on_small_grids() {
        let r = validate_gap_monotonicity(&[0.6, 1.5], &[1.0, 2.0], 3, 12, 60);
        assert!(r.pass, "worst {} at {}", r.worst_margin, r.worst_case);
        let r = validate_gap_majorant(&[0.6, 1.5], &[1.0, 2.0], 3, 200);
        assert!(r.pass, "worst {} at {}", r.worst_margin, r.worst_case);
    }

    proptest! {
        #[test]
        fn dominating_probs_monotone_for_random_profiles(
            c in 0.05f64..4.0,
            delta in 0.55f64..2.5,
        ) {
            let p = RegularityProfile::power_law(c, delta).unwrap();
            let s = BlockSchedule::new(2.0).unwrap();
            let b = dominating_failure_probs(&p, &s, 120, 12).unwrap();
            for w in b.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
            prop_assert!(b.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
