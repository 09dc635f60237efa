//! Spectral, marginal and support-aware objectives with gradients with
//! respect to the rendered spectra.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::RMat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub spec: f64,
    pub marg: f64,
    pub delay_marg: f64,
    pub beam_marg: f64,
    pub false_alarm: f64,
    pub recall: f64,
    pub los: f64,
    /// Support threshold relative to the target peak.
    pub support_threshold: f64,
    /// Half-width of the LoS exclusion window (bins).
    pub los_radius: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            spec: 1.0,
            marg: 0.3,
            delay_marg: 0.5,
            beam_marg: 0.5,
            false_alarm: 0.1,
            recall: 0.1,
            los: 0.05,
            support_threshold: 0.01,
            los_radius: 2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [
            self.spec,
            self.marg,
            self.delay_marg,
            self.beam_marg,
            self.false_alarm,
            self.recall,
            self.los,
        ];
        if !w.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid("loss weights must be finite and nonnegative"));
        }
        if !(self.support_threshold > 0.0 && self.support_threshold < 1.0) {
            return Err(Error::invalid("support threshold must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn zero() -> Self {
        Self {
            spec: 0.0,
            marg: 0.0,
            delay_marg: 0.0,
            beam_marg: 0.0,
            false_alarm: 0.0,
            recall: 0.0,
            los: 0.0,
            ..Self::default()
        }
    }
}

/// Unweighted components and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub spec: f64,
    /// Already includes the inner delay/beam weights.
    pub marginal: f64,
    pub false_alarm: f64,
    pub recall: f64,
    pub los: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            spec: self.spec * k,
            marginal: self.marginal * k,
            false_alarm: self.false_alarm * k,
            recall: self.recall * k,
            los: self.los * k,
            total: self.total * k,
        }
    }

    pub fn add(&mut self, o: &Self) {
        self.spec += o.spec;
        self.marginal += o.marginal;
        self.false_alarm += o.false_alarm;
        self.recall += o.recall;
        self.los += o.los;
        self.total += o.total;
    }
}

fn check_dims(a: &RMat, b: &RMat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "spectrum shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn mass(q: &RMat) -> f64 {
    q.sum()
}

/// Pulls a gradient `r` with respect to `q / sum(q)` back onto `q`.
fn through_normalization(r: &RMat, q: &RMat, total: f64) -> RMat {
    let dot: f64 = r.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>() / total;
    r.map(|v| (v - dot) / total)
}

/// `mean((Q̄ - Q̄_gt)^2)` over all bins with unit-sum normalization.
pub fn loss_spec(q_hat: &RMat, q_gt: &RMat) -> Result<f64> {
    Ok(loss_spec_grad(q_hat, q_gt)?.0)
}

pub fn loss_spec_grad(q_hat: &RMat, q_gt: &RMat) -> Result<(f64, RMat)> {
    check_dims(q_hat, q_gt)?;
    let tg = mass(q_gt);
    if !(tg > 0.0) {
        return Err(Error::invalid("target spectrum has no mass"));
    }
    let th = mass(q_hat);
    let n = (q_hat.nrows() * q_hat.ncols()) as f64;
    let gbar = q_gt / tg;
    if !(th > 0.0) {
        return Ok((gbar.norm_squared() / n, RMat::zeros(q_hat.nrows(), q_hat.ncols())));
    }
    let diff = q_hat / th - gbar;
    let loss = diff.norm_squared() / n;
    let grad = through_normalization(&(diff * (2.0 / n)), q_hat, th);
    Ok((loss, grad))
}

fn marginals(q: &RMat) -> (Vec<f64>, Vec<f64>) {
    let d = (0..q.nrows()).map(|l| q.row(l).sum()).collect();
    let b = (0..q.ncols()).map(|c| q.column(c).sum()).collect();
    (d, b)
}

/// `λ_d Σ_ℓ (q̄ᵈ - q̄ᵈ_gt)^2 + λ_b Σ_b (q̄ᵇ - q̄ᵇ_gt)^2`.
pub fn loss_marginal(q_hat: &RMat, q_gt: &RMat, lambda_d: f64, lambda_b: f64) -> Result<f64> {
    Ok(loss_marginal_grad(q_hat, q_gt, lambda_d, lambda_b)?.0)
}

pub fn loss_marginal_grad(q_hat: &RMat, q_gt: &RMat, lambda_d: f64, lambda_b: f64) -> Result<(f64, RMat)> {
    check_dims(q_hat, q_gt)?;
    let (th, tg) = (mass(q_hat), mass(q_gt));
    if !(th > 0.0) || !(tg > 0.0) {
        return Err(Error::invalid("marginal loss needs spectra with positive mass"));
    }
    let (dh, bh) = marginals(q_hat);
    let (dg, bg) = marginals(q_gt);
    let rd: Vec<f64> = dh.iter().zip(&dg).map(|(h, g)| h / th - g / tg).collect();
    let rb: Vec<f64> = bh.iter().zip(&bg).map(|(h, g)| h / th - g / tg).collect();
    let loss = lambda_d * rd.iter().map(|v| v * v).sum::<f64>() + lambda_b * rb.iter().map(|v| v * v).sum::<f64>();
    // d/dq(ℓ,b) of q̄ᵈ_ℓ' = (δ_ℓℓ' - q̄ᵈ_ℓ') / S; same for beams
    let cd: f64 = rd.iter().zip(&dh).map(|(r, d)| r * d / th).sum();
    let cb: f64 = rb.iter().zip(&bh).map(|(r, b)| r * b / th).sum();
    let grad = RMat::from_fn(q_hat.nrows(), q_hat.ncols(), |l, b| {
        2.0 * (lambda_d * (rd[l] - cd) + lambda_b * (rb[b] - cb)) / th
    });
    Ok((loss, grad))
}

/// Delay-beam bins of the LoS exclusion window around `(row, col)`; rows
/// are clipped at the window edges, beams wrap around.
pub fn los_window(shape: (usize, usize), los_bin: (usize, usize), radius: usize) -> Vec<(usize, usize)> {
    let (l, m) = shape;
    let r0 = los_bin.0.saturating_sub(radius);
    let r1 = (los_bin.0 + radius).min(l - 1);
    let span = (2 * radius + 1).min(m);
    let mut out = Vec::new();
    for row in r0..=r1 {
        for k in 0..span {
            let col = (los_bin.1 as i64 + k as i64 - radius as i64).rem_euclid(m as i64) as usize;
            out.push((row, col));
        }
    }
    out
}

/// Support-aware terms `(L_false, L_recall, L_LoS-false)` and their
/// gradients with respect to the total and NLoS-only spectra.
#[derive(Debug, Clone)]
pub struct SupportTerms {
    pub false_alarm: f64,
    pub recall: f64,
    pub los: f64,
    pub grad_total: RMat,
    pub grad_nlos: RMat,
}

pub fn support_terms(
    q_total: &RMat,
    q_nlos: &RMat,
    q_gt: &RMat,
    weights: &LossWeights,
    los_bin: Option<(usize, usize)>,
) -> Result<SupportTerms> {
    check_dims(q_total, q_gt)?;
    check_dims(q_nlos, q_gt)?;
    let (rows, cols) = q_gt.shape();
    let peak = q_gt.max();
    let tg = mass(q_gt);
    let th = mass(q_total);
    let mut grad_total = RMat::zeros(rows, cols);
    let mut grad_nlos = RMat::zeros(rows, cols);
    let (mut false_alarm, mut recall) = (0.0, 0.0);

    if tg > 0.0 {
        let cut = weights.support_threshold * peak;
        let on = q_gt.iter().filter(|&&v| v >= cut).count();
        let off = rows * cols - on;
        // sensitivity with respect to the normalized rendered spectrum
        let mut r = RMat::zeros(rows, cols);
        for c in 0..cols {
            for l in 0..rows {
                let g = q_gt[(l, c)] / tg;
                let h = if th > 0.0 { q_total[(l, c)] / th } else { 0.0 };
                if q_gt[(l, c)] >= cut {
                    if g > h {
                        recall += g - h;
                        r[(l, c)] -= weights.recall / on as f64;
                    }
                } else if h > g {
                    false_alarm += h - g;
                    r[(l, c)] += weights.false_alarm / off as f64;
                }
            }
        }
        if on > 0 {
            recall /= on as f64;
        }
        if off > 0 {
            false_alarm /= off as f64;
        }
        if th > 0.0 {
            grad_total = through_normalization(&r, q_total, th);
        }
    }

    let mut los = 0.0;
    let tn = mass(q_nlos);
    if let (Some(bin), true) = (los_bin, tn > 0.0) {
        let win = los_window((rows, cols), bin, weights.los_radius);
        let inside: f64 = win.iter().map(|&(l, c)| q_nlos[(l, c)]).sum();
        los = inside / tn;
        grad_nlos.fill(-weights.los * los / tn);
        for &(l, c) in &win {
            grad_nlos[(l, c)] += weights.los / tn;
        }
    }
    Ok(SupportTerms {
        false_alarm,
        recall,
        los,
        grad_total,
        grad_nlos,
    })
}

/// `λ_false L_false + λ_recall L_recall + λ_LoS L_LoS-false`.
pub fn loss_support(
    q_total: &RMat,
    q_nlos: &RMat,
    q_gt: &RMat,
    weights: &LossWeights,
    los_bin: Option<(usize, usize)>,
) -> Result<f64> {
    let t = support_terms(q_total, q_nlos, q_gt, weights, los_bin)?;
    Ok(weights.false_alarm * t.false_alarm + weights.recall * t.recall + weights.los * t.los)
}

/// Weighted objective with its gradients over `(Q̂, Q̂_nlos)`.
/// `spec_scale` multiplies `λ_spec` (marginal warm-up).
pub fn total_loss_grad(
    q_total: &RMat,
    q_nlos: &RMat,
    q_gt: &RMat,
    weights: &LossWeights,
    los_bin: Option<(usize, usize)>,
    spec_scale: f64,
) -> Result<(LossBreakdown, RMat, RMat)> {
    let lam_spec = weights.spec * spec_scale;
    let (spec, g_spec) = loss_spec_grad(q_total, q_gt)?;
    let (marg, g_marg) = if mass(q_total) > 0.0 {
        loss_marginal_grad(q_total, q_gt, weights.delay_marg, weights.beam_marg)?
    } else {
        (0.0, RMat::zeros(q_total.nrows(), q_total.ncols()))
    };
    let sup = support_terms(q_total, q_nlos, q_gt, weights, los_bin)?;
    let total = lam_spec * spec
        + weights.marg * marg
        + weights.false_alarm * sup.false_alarm
        + weights.recall * sup.recall
        + weights.los * sup.los;
    let grad_total = g_spec * lam_spec + g_marg * weights.marg + sup.grad_total;
    Ok((
        LossBreakdown {
            spec,
            marginal: marg,
            false_alarm: sup.false_alarm,
            recall: sup.recall,
            los: sup.los,
            total,
        },
        grad_total,
        sup.grad_nlos,
    ))
}

/// `λ_spec L_spec + λ_marg L_marg + L_sup`.
pub fn total_loss(
    q_total: &RMat,
    q_nlos: &RMat,
    q_gt: &RMat,
    weights: &LossWeights,
    los_bin: Option<(usize, usize)>,
) -> Result<f64> {
    Ok(total_loss_grad(q_total, q_nlos, q_gt, weights, los_bin, 1.0)?.0.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m2(v: [f64; 4]) -> RMat {
        RMat::from_row_slice(2, 2, &v)
    }

    fn random_spectrum(rng: &mut ChaCha8Rng, l: usize, m: usize) -> RMat {
        RMat::from_fn(l, m, |_, _| {
            let v: f64 = rng.random_range(-3.0..1.0);
            if v < -2.0 {
                0.0
            } else {
                10f64.powf(v)
            }
        })
    }

    #[test]
    fn spec_examples() {
        let a = m2([1.0, 0.0, 0.0, 0.0]);
        let b = m2([0.0, 1.0, 0.0, 0.0]);
        assert!((loss_spec(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(loss_spec(&a, &(&a * 7.0)).unwrap(), 0.0);
        assert!(loss_spec(&a, &RMat::zeros(2, 2)).is_err());
        assert!(loss_spec(&a, &RMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn marginal_examples() {
        let a = RMat::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = RMat::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!((loss_marginal(&a, &b, 1.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((loss_marginal(&a, &b, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        // permutation within a delay row keeps the delay marginal
        let p = m2([3.0, 1.0, 0.5, 0.5]);
        let q = m2([1.0, 3.0, 0.5, 0.5]);
        assert_eq!(loss_marginal(&p, &q, 1.0, 0.0).unwrap(), 0.0);
        assert!(loss_marginal(&p, &q, 0.0, 1.0).unwrap() > 0.0);
        assert!(loss_marginal(&RMat::zeros(2, 2), &q, 1.0, 1.0).is_err());
    }

    #[test]
    fn support_examples() {
        let w = LossWeights {
            support_threshold: 0.5,
            ..LossWeights::default()
        };
        let gt = m2([1.0, 0.0, 0.0, 0.0]);
        let t = support_terms(&gt, &RMat::zeros(2, 2), &gt, &w, Some((0, 0))).unwrap();
        assert_eq!((t.false_alarm, t.recall, t.los), (0.0, 0.0, 0.0));
        let uniform = RMat::from_element(2, 2, 1.0);
        let t = support_terms(&uniform, &RMat::zeros(2, 2), &gt, &w, None).unwrap();
        assert!((t.false_alarm - 0.25).abs() < 1e-15);
        assert!((t.recall - 0.75).abs() < 1e-15);
        let mut nlos = RMat::zeros(2, 2);
        nlos[(1, 1)] = 3.0;
        let t = support_terms(&(&nlos + &gt), &nlos, &gt, &w, Some((1, 1))).unwrap();
        assert!((t.los - 1.0).abs() < 1e-15);
    }

    #[test]
    fn los_window_wraps_beams_and_clips_delays() {
        let win = los_window((5, 8), (0, 7), 1);
        assert_eq!(win.len(), 6);
        assert!(win.contains(&(0, 0)) && win.contains(&(1, 6)) && !win.contains(&(2, 7)));
        let all = los_window((3, 3), (1, 1), 5);
        assert_eq!(all.len(), 9);
    }

    #[test]
    fn total_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = LossWeights::default();
        for _ in 0..20 {
            let q = random_spectrum(&mut rng, 6, 4) + RMat::from_element(6, 4, 1e-3);
            let n = random_spectrum(&mut rng, 6, 4);
            let g = random_spectrum(&mut rng, 6, 4) + RMat::from_element(6, 4, 1e-4);
            let bin = Some((rng.random_range(0..6), rng.random_range(0..4)));
            let by_hand = w.spec * loss_spec(&q, &g).unwrap()
                + w.marg * loss_marginal(&q, &g, w.delay_marg, w.beam_marg).unwrap()
                + loss_support(&q, &n, &g, &w, bin).unwrap();
            assert!((total_loss(&q, &n, &g, &w, bin).unwrap() - by_hand).abs() < 1e-12);
            let only_spec = LossWeights { spec: 1.0, ..LossWeights::zero() };
            assert_eq!(total_loss(&q, &n, &g, &only_spec, bin).unwrap(), loss_spec(&q, &g).unwrap());
        }
        let g = m2([1.0, 0.5, 0.2, 0.0]);
        assert_eq!(total_loss(&g, &RMat::zeros(2, 2), &g, &w, Some((0, 0))).unwrap(), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = LossWeights::default();
        for _ in 0..20 {
            let q = random_spectrum(&mut rng, 5, 4) + RMat::from_element(5, 4, 1e-3);
            let n = random_spectrum(&mut rng, 5, 4) + RMat::from_element(5, 4, 1e-3);
            let g = random_spectrum(&mut rng, 5, 4);
            let bin = Some((rng.random_range(0..5), rng.random_range(0..4)));
            let (_, gt, gn) = total_loss_grad(&q, &n, &g, &w, bin, 0.7).unwrap();
            let f = |q: &RMat, n: &RMat| total_loss_grad(q, n, &g, &w, bin, 0.7).unwrap().0.total;
            for k in 0..20 {
                let h = 1e-6 * q.sum();
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp[k] += h;
                qm[k] -= h;
                let fd = (f(&qp, &n) - f(&qm, &n)) / (2.0 * h);
                assert!((fd - gt[k]).abs() <= 1e-5 * gt[k].abs().max(fd.abs()).max(1e-3 / q.sum()), "total {k}: {fd} vs {}", gt[k]);
                let h = 1e-6 * n.sum();
                let (mut np, mut nm) = (n.clone(), n.clone());
                np[k] += h;
                nm[k] -= h;
                let fd = (f(&q, &np) - f(&q, &nm)) / (2.0 * h);
                assert!((fd - gn[k]).abs() <= 1e-5 * gn[k].abs().max(fd.abs()).max(1e-3 / n.sum()), "nlos {k}: {fd} vs {}", gn[k]);
            }
        }
    }

    proptest! {
        #[test]
        fn components_nonnegative_and_scale_invariant(seed in 0u64..5000, c in 1e-6f64..1e6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_spectrum(&mut rng, 4, 3) + RMat::from_element(4, 3, 1e-6);
            let n = random_spectrum(&mut rng, 4, 3);
            let g = random_spectrum(&mut rng, 4, 3) + RMat::from_element(4, 3, 1e-6);
            let w = LossWeights::default();
            let (b, _, _) = total_loss_grad(&q, &n, &g, &w, Some((1, 1)), 1.0).unwrap();
            for v in [b.spec, b.marginal, b.false_alarm, b.recall, b.los, b.total] {
                prop_assert!(v >= 0.0);
            }
            let s1 = loss_spec(&q, &g).unwrap();
            prop_assert!((loss_spec(&(&q * c), &g).unwrap() - s1).abs() <= 1e-12 * s1.max(1e-12));
            prop_assert!((loss_spec(&q, &(&g * c)).unwrap() - s1).abs() <= 1e-12 * s1.max(1e-12));
            let m1 = loss_marginal(&q, &g, 0.5, 0.5).unwrap();
            prop_assert!((loss_marginal(&(&q * c), &g, 0.5, 0.5).unwrap() - m1).abs() <= 1e-12 * m1.max(1e-12));
        }
    }
}
