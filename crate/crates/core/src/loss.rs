//! Training objectives over the receiver's output distribution `b`.
//!
//! Cross-entropy is `−ln(max(b_s, ε))`. The weighted semantic loss adds a
//! distance penalty `w·(1/s)·sqrt(Σ_{i=1..M} b_i·(s−i)²)` that grows as mass
//! moves away from `s`, and grows faster for small `s`.

use crate::math::ProbVector;

/// Floor inside the logarithm.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LossKind {
    #[default]
    CrossEntropy,
    /// Cross-entropy plus `weight` times the distance penalty. A negative
    /// weight gives the subtractive form.
    WeightedSemantic { weight: f64 },
}

pub fn cross_entropy(b: &ProbVector, s: usize) -> f64 {
    -b.prob(s).max(LOG_EPS).ln()
}

/// `Σ_{i=1..M} b_i·(s−i)²`
fn spread(b: &[f64], s: usize) -> f64 {
    b.iter()
        .enumerate()
        .map(|(k, &bi)| {
            let d = s as f64 - (k + 1) as f64;
            bi * d * d
        })
        .sum()
}

/// The unweighted distance penalty `(1/s)·sqrt(Σ b_i·(s−i)²)`.
pub fn penalty(b: &ProbVector, s: usize) -> f64 {
    spread(b.as_slice(), s).sqrt() / s as f64
}

pub fn weighted_semantic_loss(b: &ProbVector, s: usize, weight: f64) -> f64 {
    cross_entropy(b, s) + weight * penalty(b, s)
}

pub fn loss_value(kind: LossKind, b: &ProbVector, s: usize) -> f64 {
    match kind {
        LossKind::CrossEntropy => cross_entropy(b, s),
        LossKind::WeightedSemantic { weight } => weighted_semantic_loss(b, s, weight),
    }
}

/// Gradient of the loss with respect to the logits `z`, where `b = softmax(z)`.
///
/// The cross-entropy part is `b − onehot(s)`. The floor only guards the
/// reported value; the gradient is that of the exact log-softmax, so a
/// confidently wrong receiver still receives a signal.
pub fn loss_grad(kind: LossKind, b: &ProbVector, s: usize) -> Vec<f64> {
    let probs = b.as_slice();
    let mut g = probs.to_vec();
    g[s - 1] -= 1.0;
    if let LossKind::WeightedSemantic { weight } = kind {
        // dP/db_i = c·(s−i)² with c = w / (2s·sqrt(Q)); through the softmax
        // this becomes c·b_j·((s−j)² − Q).
        let q = spread(probs, s);
        if q > 0.0 {
            let c = weight / (2.0 * s as f64 * q.sqrt());
            for (k, (gk, &bk)) in g.iter_mut().zip(probs).enumerate() {
                let d = s as f64 - (k + 1) as f64;
                *gk += c * bk * (d * d - q);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::softmax;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform(m: usize) -> ProbVector {
        ProbVector::new(vec![1.0 / m as f64; m]).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&ProbVector::one_hot(4, 2), 2), 0.0);
        assert_abs_diff_eq!(cross_entropy(&uniform(4), 2), 1.386_294_361_119_890_6, epsilon = 1e-12);
        let b = ProbVector::new(vec![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(cross_entropy(&b, 2), 27.631_021_115_928_547, epsilon = 1e-9);
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(weighted_semantic_loss(&ProbVector::one_hot(4, 3), 3, 1.0), 0.0);
        assert_abs_diff_eq!(
            weighted_semantic_loss(&uniform(4), 2, 1.0),
            1.998_666_796_815_685,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grad_examples() {
        let g = loss_grad(LossKind::CrossEntropy, &ProbVector::one_hot(4, 1), 1);
        assert!(g.iter().all(|&v| v == 0.0));
        let g = loss_grad(LossKind::CrossEntropy, &uniform(4), 2);
        assert_eq!(g, vec![0.25, -0.75, 0.25, 0.25]);
        let g = loss_grad(LossKind::WeightedSemantic { weight: 1.0 }, &ProbVector::one_hot(4, 4), 4);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    fn fd_check(kind: LossKind, z: &[f64], s: usize) -> Result<(), TestCaseError> {
        let analytic = loss_grad(kind, &softmax(z), s);
        let h = 1e-5;
        for j in 0..z.len() {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[j] += h;
            zm[j] -= h;
            let fd = (loss_value(kind, &softmax(&zp), s) - loss_value(kind, &softmax(&zm), s)) / (2.0 * h);
            let rel = (analytic[j] - fd).abs() / analytic[j].abs().max(fd.abs()).max(1e-6);
            prop_assert!(rel < 1e-4, "logit {j}: analytic {} fd {fd}", analytic[j]);
        }
        Ok(())
    }

    fn logits(m: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
        (prop::collection::vec(-4.0f64..4.0, m), 1..=m)
    }

    proptest! {
        #[test]
        fn weighted_grad_matches_fd((z, s) in logits(8), w in -2.0f64..2.0) {
            fd_check(LossKind::WeightedSemantic { weight: w }, &z, s)?;
        }

        #[test]
        fn ce_grad_matches_fd((z, s) in logits(6)) {
            fd_check(LossKind::CrossEntropy, &z, s)?;
        }

        #[test]
        fn losses_non_negative((z, s) in logits(8), w in 0.0f64..5.0) {
            let b = softmax(&z);
            prop_assert!(cross_entropy(&b, s) >= 0.0);
            prop_assert!(weighted_semantic_loss(&b, s, w) >= 0.0);
        }

        #[test]
        fn zero_weight_is_cross_entropy((z, s) in logits(8)) {
            let b = softmax(&z);
            prop_assert_eq!(weighted_semantic_loss(&b, s, 0.0), cross_entropy(&b, s));
            prop_assert_eq!(
                loss_grad(LossKind::WeightedSemantic { weight: 0.0 }, &b, s),
                loss_grad(LossKind::CrossEntropy, &b, s)
            );
        }

        // Moving mass from s to a class farther away strictly increases the
        // penalty.
        #[test]
        fn penalty_monotone(s in 1usize..=16, near in 1usize..=16, far in 1usize..=16, mass in 0.01f64..0.5) {
            let dist = |i: usize| (i as f64 - s as f64).abs();
            prop_assume!(dist(far) > dist(near) && near != s);
            let mut base = vec![0.0; 16];
            base[s - 1] = 1.0 - mass;
            base[near - 1] += mass;
            let mut moved = vec![0.0; 16];
            moved[s - 1] = 1.0 - mass;
            moved[far - 1] += mass;
            let p0 = penalty(&ProbVector::new(base).unwrap(), s);
            let p1 = penalty(&ProbVector::new(moved).unwrap(), s);
            prop_assert!(p1 > p0);
        }

        // The same shape centred on a larger s is penalized in proportion
        // to 1/s.
        #[test]
        fn penalty_scales_inverse_with_s(s1 in 3usize..20, s2 in 3usize..20, spill in 0.01f64..0.3) {
            let shaped = |s: usize| {
                let mut b = vec![0.0; 24];
                b[s - 1] = 1.0 - 2.0 * spill;
                b[s - 2] = spill;
                b[s] = spill;
                ProbVector::new(b).unwrap()
            };
            let ratio = penalty(&shaped(s1), s1) / penalty(&shaped(s2), s2);
            prop_assert!((ratio - s2 as f64 / s1 as f64).abs() < 1e-12);
        }
    }
}
