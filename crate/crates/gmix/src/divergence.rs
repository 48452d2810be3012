//! f-divergences between finite discrete distributions, the standard
//! TV-vs-KL inequalities, and exact maximal coupling.

use rand::Rng;

use crate::error::{GmixError, Result};

/// A probability distribution on the support `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    probs: Vec<f64>,
}

impl Dist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(GmixError::InvalidArgument("empty support".into()));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(GmixError::InvalidArgument("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GmixError::InvalidArgument(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalize a nonnegative weight vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || weights.iter().any(|&w| w < 0.0) {
            return Err(GmixError::InvalidArgument("weights must be nonnegative with positive sum".into()));
        }
        Ok(Self { probs: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn check_same_support(&self, other: &Dist) -> Result<()> {
        if self.len() != other.len() {
            return Err(GmixError::SupportMismatch { left: self.len(), right: other.len() });
        }
        Ok(())
    }
}

/// Total variation distance `1/2 sum |p - q|`.
pub fn tv(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_support(q)?;
    Ok(tv_slice(p.probs(), q.probs()))
}

pub(crate) fn tv_slice(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Kullback-Leibler divergence, with `0 ln 0 = 0`; infinite when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_support(q)?;
    let mut s = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            s += pi * (pi / qi).ln();
        }
    }
    Ok(s.max(0.0))
}

/// Pearson chi-square divergence; infinite when the denominator vanishes on
/// the support of the numerator.
pub fn chi2(p: &Dist, q: &Dist) -> Result<f64> {
    p.check_same_support(q)?;
    let mut s = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if qi > 0.0 {
            s += (pi - qi) * (pi - qi) / qi;
        } else if pi != 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(s)
}

/// TV upper bound `sqrt(kl / 2)` from the Pinsker inequality.
pub fn pinsker_tv_bound(kl_value: f64) -> Result<f64> {
    if kl_value < 0.0 {
        return Err(GmixError::Domain(format!("kl must be nonnegative, got {kl_value}")));
    }
    Ok((kl_value / 2.0).sqrt())
}

/// TV upper bound `sqrt(1 - e^-kl)` from the Bretagnolle-Huber inequality.
pub fn bh_tv_bound(kl_value: f64) -> Result<f64> {
    if kl_value < 0.0 {
        return Err(GmixError::Domain(format!("kl must be nonnegative, got {kl_value}")));
    }
    Ok((-(-kl_value).exp_m1()).sqrt())
}

/// One draw `(x, y)` from a maximal coupling of `p` and `q`: the marginals
/// are exactly `p` and `q`, and `P[x != y] = tv(p, q)`.
///
/// Common-component construction: with probability `1 - tv` draw both
/// coordinates from `min(p, q)` renormalized, otherwise draw them
/// independently from the normalized positive and negative residuals.
pub fn maximal_coupling_sample<R: Rng>(p: &Dist, q: &Dist, rng: &mut R) -> Result<(usize, usize)> {
    p.check_same_support(q)?;
    Ok(maximal_coupling_sample_slice(p.probs(), q.probs(), rng))
}

pub(crate) fn maximal_coupling_sample_slice<R: Rng>(
    p: &[f64],
    q: &[f64],
    rng: &mut R,
) -> (usize, usize) {
    let common: f64 = p.iter().zip(q).map(|(a, b)| a.min(*b)).sum();
    let u: f64 = rng.random();
    if u < common {
        // inverse-CDF walk through the common part at level u
        let mut acc = 0.0;
        for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
            acc += a.min(b);
            if u < acc {
                return (i, i);
            }
        }
        let last = p.len() - 1;
        return (last, last);
    }
    let draw_residual = |rng: &mut R, hi: &[f64], lo: &[f64]| -> usize {
        let total: f64 = hi.iter().zip(lo).map(|(a, b)| (a - b).max(0.0)).sum();
        let v: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, (&a, &b)) in hi.iter().zip(lo).enumerate() {
            acc += (a - b).max(0.0);
            if v < acc {
                return i;
            }
        }
        hi.len() - 1
    };
    let x = draw_residual(rng, p, q);
    let y = draw_residual(rng, q, p);
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bern(p1: f64) -> Dist {
        Dist::new(vec![1.0 - p1, p1]).unwrap()
    }

    #[test]
    fn tv_basic_values() {
        let p = bern(0.5);
        assert_eq!(tv(&p, &p).unwrap(), 0.0);
        let a = Dist::new(vec![1.0, 0.0]).unwrap();
        let b = Dist::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(tv(&a, &b).unwrap(), 1.0);
        assert_abs_diff_eq!(tv(&bern(0.5), &bern(0.25)).unwrap(), 0.25, epsilon = 1e-15);
        assert!(tv(&p, &Dist::new(vec![0.2, 0.3, 0.5]).unwrap()).is_err());
    }

    #[test]
    fn kl_and_chi2_closed_forms() {
        let p = bern(0.5);
        let q = bern(0.25);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        assert_eq!(chi2(&p, &p).unwrap(), 0.0);
        let expect = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(kl(&p, &q).unwrap(), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(chi2(&p, &q).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        // absolute-continuity violation
        let point = Dist::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(kl(&p, &point).unwrap(), f64::INFINITY);
        assert_eq!(chi2(&p, &point).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tv_bounds_from_kl() {
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert_eq!(bh_tv_bound(0.0).unwrap(), 0.0);
        let klv = kl(&bern(0.5), &bern(0.25)).unwrap();
        let pins = pinsker_tv_bound(klv).unwrap();
        let bh = bh_tv_bound(klv).unwrap();
        assert_abs_diff_eq!(pins, 0.2682, epsilon = 5e-4);
        assert_abs_diff_eq!(bh, 0.3660, epsilon = 5e-4);
        assert!(pins >= 0.25 && bh >= 0.25);
        assert_abs_diff_eq!(bh_tv_bound(2.0f64.ln()).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(pinsker_tv_bound(-0.1).is_err());
        assert!(bh_tv_bound(-0.1).is_err());
    }

    #[test]
    fn maximal_coupling_degenerate_cases() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = bern(0.3);
        for _ in 0..200 {
            let (x, y) = maximal_coupling_sample(&p, &p, &mut rng).unwrap();
            assert_eq!(x, y);
        }
        let a = Dist::new(vec![1.0, 0.0]).unwrap();
        let b = Dist::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..200 {
            let (x, y) = maximal_coupling_sample(&a, &b, &mut rng).unwrap();
            assert_eq!((x, y), (0, 1));
        }
    }

    #[test]
    fn maximal_coupling_attains_tv_and_marginals() {
        let p = bern(0.5);
        let q = bern(0.25);
        let n = 100_000;
        let mut rng = RngStream::new(2, 0).rng();
        let mut disagree = 0usize;
        let mut px1 = 0usize;
        let mut qy1 = 0usize;
        for _ in 0..n {
            let (x, y) = maximal_coupling_sample(&p, &q, &mut rng).unwrap();
            disagree += usize::from(x != y);
            px1 += usize::from(x == 1);
            qy1 += usize::from(y == 1);
        }
        let se = |p0: f64| (p0 * (1.0 - p0) / n as f64).sqrt();
        assert!((disagree as f64 / n as f64 - 0.25).abs() <= 3.0 * se(0.25));
        assert!((px1 as f64 / n as f64 - 0.5).abs() <= 4.0 * se(0.5));
        assert!((qy1 as f64 / n as f64 - 0.25).abs() <= 4.0 * se(0.25));
    }

    proptest! {
        // Pinsker, Bretagnolle-Huber, and KL <= chi2 on random pairs.
        #[test]
        fn divergence_inequalities_hold(
            wp in proptest::collection::vec(0.01f64..1.0, 2..20),
            wq in proptest::collection::vec(0.01f64..1.0, 2..20),
        ) {
            let n = wp.len().min(wq.len());
            let p = Dist::from_weights(wp[..n].to_vec()).unwrap();
            let q = Dist::from_weights(wq[..n].to_vec()).unwrap();
            let t = tv(&p, &q).unwrap();
            let k = kl(&p, &q).unwrap();
            let c = chi2(&p, &q).unwrap();
            prop_assert!(t * t <= k / 2.0 + 1e-12);
            prop_assert!(t <= bh_tv_bound(k).unwrap() + 1e-12);
            prop_assert!(k <= c + 1e-12);
        }
    }
}
