//! ReLU, softmax and sparse categorical cross-entropy.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Integer class indices, one per batch column.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Labels(Vec<usize>);

impl Labels {
    pub fn new(values: Vec<usize>) -> Self {
        Labels(values)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Labels(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self.0.iter().position(|&y| y >= num_classes) {
            None => Ok(()),
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                label: self.0[index],
                num_classes,
            }),
        }
    }
}

impl From<Vec<usize>> for Labels {
    fn from(v: Vec<usize>) -> Self {
        Labels(v)
    }
}

pub fn relu<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    z.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Indicator of `z > 0`; the derivative at exactly zero is taken as zero.
pub fn relu_grad<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    z.map(|x| if x > T::zero() { T::one() } else { T::zero() })
}

/// Column-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    let (rows, cols) = z.shape();
    let mut out = z.clone();
    let data = out.as_mut_slice();
    for j in 0..cols {
        let max = (0..rows)
            .map(|i| data[i * cols + j])
            .fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for i in 0..rows {
            let e = (data[i * cols + j] - max).exp();
            data[i * cols + j] = e;
            sum += e;
        }
        for i in 0..rows {
            data[i * cols + j] /= sum;
        }
    }
    out
}

fn check_batch<T: Scalar>(p: &Matrix<T>, y: &Labels) -> Result<()> {
    if p.cols() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probability columns but {} labels",
            p.cols(),
            y.len()
        )));
    }
    y.validate(p.rows())
}

/// Mean over the batch of `-ln p[y_i, i]`.
pub fn sparse_ce_loss<T: Scalar>(p: &Matrix<T>, y: &Labels) -> Result<T> {
    check_batch(p, y)?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let floor = T::lit(PROB_FLOOR);
    let total: T = y
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, &c)| -p.get(c, j).max(floor).ln())
        .sum();
    Ok(total / T::lit(y.len() as f64))
}

/// Gradient of the mean cross-entropy through the softmax:
/// `(p - onehot(y)) / batch`. This is the output layer's pre-activation
/// gradient, so no activation derivative is applied on top of it.
pub fn softmax_ce_backward<T: Scalar>(p: &Matrix<T>, y: &Labels) -> Result<Matrix<T>> {
    check_batch(p, y)?;
    let b = T::lit(y.len() as f64);
    let mut d = p.clone();
    for (j, &c) in y.as_slice().iter().enumerate() {
        d.set(c, j, d.get(c, j) - T::one());
    }
    Ok(d.map(|x| x / b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M = Matrix<f64>;

    #[test]
    fn relu_examples() {
        let z = M::from_rows(&[[-1.0, 0.0, 2.0]]);
        assert_eq!(relu(&z), M::from_rows(&[[0.0, 0.0, 2.0]]));
        assert_eq!(relu(&relu(&z)), relu(&z));
        assert_eq!(relu(&M::zeros(2, 2)), M::zeros(2, 2));
    }

    #[test]
    fn relu_grad_examples() {
        let z = M::from_rows(&[[-1.0, 0.0, 2.0]]);
        assert_eq!(relu_grad(&z), M::from_rows(&[[0.0, 0.0, 1.0]]));
        assert_eq!(relu_grad(&M::filled(2, 3, -0.5)), M::zeros(2, 3));
    }

    #[test]
    fn relu_grad_matches_finite_differences_away_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eps = 1e-6;
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            if x.abs() < 1e-3 {
                continue;
            }
            let f = |v: f64| relu(&M::from_rows(&[[v]])).get(0, 0);
            let fd = (f(x + eps) - f(x - eps)) / (2.0 * eps);
            let g = relu_grad(&M::from_rows(&[[x]])).get(0, 0);
            assert!((fd - g).abs() < 1e-9, "x={x} fd={fd} g={g}");
        }
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&M::zeros(3, 1));
        for i in 0..3 {
            assert_relative_eq!(u.get(i, 0), 1.0 / 3.0, max_relative = 1e-15);
        }
        let p = softmax(&M::from_rows(&[[1.0], [2.0]]));
        // e / (e + e^2) and e^2 / (e + e^2)
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        assert_relative_eq!(p.get(0, 0), e1 / (e1 + e2), max_relative = 1e-14);
        assert_relative_eq!(p.get(1, 0), e2 / (e1 + e2), max_relative = 1e-14);
        assert!((p.get(0, 0) - 0.268_941_42).abs() < 1e-8);
        assert!((p.get(1, 0) - 0.731_058_58).abs() < 1e-8);
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = M::from_rows(&[[0.3, -1.0], [2.0, 0.0], [-0.5, 4.0]]);
        let shifted = z.map(|x| x + 100.0);
        let (a, b) = (softmax(&z), softmax(&shifted));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let onehot = M::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let y = Labels::new(vec![1, 0]);
        assert!(sparse_ce_loss(&onehot, &y).unwrap().abs() < 1e-15);

        let uniform = M::filled(10, 4, 0.1);
        let loss = sparse_ce_loss(&uniform, &Labels::new(vec![0, 3, 9, 5])).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);

        let p = M::from_rows(&[[0.7], [0.3]]);
        let loss = sparse_ce_loss(&p, &Labels::new(vec![1])).unwrap();
        assert!((loss - (-(0.3f64).ln())).abs() < 1e-15);
        assert!((loss - 1.20397).abs() < 1e-5);
    }

    #[test]
    fn loss_clamps_zero_probability() {
        let p = M::from_rows(&[[1.0], [0.0]]);
        let loss = sparse_ce_loss(&p, &Labels::new(vec![1])).unwrap();
        assert!((loss - (-(PROB_FLOOR.ln()))).abs() < 1e-9);
    }

    #[test]
    fn loss_rejects_out_of_range_label() {
        let p = M::filled(3, 1, 1.0 / 3.0);
        assert!(matches!(
            sparse_ce_loss(&p, &Labels::new(vec![3])),
            Err(Error::LabelOutOfRange { label: 3, .. })
        ));
        assert!(softmax_ce_backward(&p, &Labels::new(vec![0, 1])).is_err());
    }

    #[test]
    fn backward_at_optimum_is_zero() {
        let p = M::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        let d = softmax_ce_backward(&p, &Labels::new(vec![0, 1])).unwrap();
        assert_eq!(d, M::zeros(2, 2));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c, b) = (5, 4);
        for _ in 0..10 {
            let z = M::from_fn(c, b, |_, _| rng.gen_range(-2.0..2.0));
            let y = Labels::new((0..b).map(|_| rng.gen_range(0..c)).collect());
            let d = softmax_ce_backward(&softmax(&z), &y).unwrap();
            let eps = 1e-5;
            for i in 0..c {
                for j in 0..b {
                    let mut zp = z.clone();
                    zp.set(i, j, z.get(i, j) + eps);
                    let mut zm = z.clone();
                    zm.set(i, j, z.get(i, j) - eps);
                    let lp = sparse_ce_loss(&softmax(&zp), &y).unwrap();
                    let lm = sparse_ce_loss(&softmax(&zm), &y).unwrap();
                    let fd = (lp - lm) / (2.0 * eps);
                    let a = d.get(i, j);
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < 1e-6, "({i},{j}) analytic {a} numeric {fd}");
                }
            }
        }
    }

    #[test]
    fn loss_decreases_as_mass_moves_to_true_class() {
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let t = 0.1 + 0.08 * k as f64;
            let p = M::from_rows(&[[t], [1.0 - t]]);
            let l = sparse_ce_loss(&p, &Labels::new(vec![0])).unwrap();
            assert!(l >= 0.0 && l < prev);
            prev = l;
        }
    }

    proptest! {
        #[test]
        fn softmax_columns_are_distributions(seed in any::<u64>(), c in 1usize..12, b in 1usize..6, scale in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = M::from_fn(c, b, |_, _| rng.gen_range(-1.0..1.0) * scale);
            let p = softmax(&z);
            for j in 0..b {
                let col = p.column(j);
                prop_assert!(col.iter().all(|&v| v >= 0.0));
                prop_assert!((col.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn backward_columns_sum_to_zero(seed in any::<u64>(), c in 2usize..12, b in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = M::from_fn(c, b, |_, _| rng.gen_range(-5.0..5.0));
            let y = Labels::new((0..b).map(|_| rng.gen_range(0..c)).collect());
            let d = softmax_ce_backward(&softmax(&z), &y).unwrap();
            for j in 0..b {
                prop_assert!(d.column(j).iter().sum::<f64>().abs() <= 1e-12);
            }
        }
    }
}
