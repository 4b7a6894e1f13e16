use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::graph::Labels;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    CrossEntropy,
    Mae,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Mae => "mae",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            "mae" => Ok(LossKind::Mae),
            other => bail!(InvalidArgument, "unknown loss {:?}", other),
        }
    }
}

/// Borrowed supervision for the rows of an output matrix.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Classes(&'a [usize]),
    Values(&'a Matrix),
}

impl<'a> Target<'a> {
    pub fn from_labels(labels: &'a Labels) -> Option<Self> {
        match labels {
            Labels::None => None,
            Labels::Classes { ids, .. } => Some(Target::Classes(ids)),
            Labels::Targets(t) => Some(Target::Values(t)),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Target::Classes(c) => c.len(),
            Target::Values(m) => m.rows(),
        }
    }
}

fn check_mask(z: &Matrix, rows: usize, mask: &[bool]) -> Result<usize> {
    if z.rows() != rows || mask.len() != rows {
        bail!(
            Shape,
            "{} output rows, {} target rows, {} mask entries",
            z.rows(),
            rows,
            mask.len()
        );
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::NoSupervisedNodes);
    }
    Ok(count)
}

/// Mean softmax cross-entropy over the masked rows.
pub fn cross_entropy(z: &Matrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let count = check_mask(z, labels.len(), mask)?;
    ce_sum(z, labels, mask, 1.0 / count as f64, None)
}

/// Mean absolute error over the masked rows and all target columns.
pub fn mae(z: &Matrix, targets: &Matrix, mask: &[bool]) -> Result<f64> {
    let count = check_mask(z, targets.rows(), mask)?;
    z.check_shape(targets.rows(), targets.cols(), "prediction")?;
    Ok(mae_sum(z, targets, mask, 1.0 / (count * z.cols()) as f64, None))
}

/// Number of loss terms the mask selects (the mean's denominator).
pub(crate) fn term_count(kind: LossKind, z_cols: usize, mask: &[bool]) -> usize {
    let rows = mask.iter().filter(|&&m| m).count();
    match kind {
        LossKind::CrossEntropy => rows,
        LossKind::Mae => rows * z_cols,
    }
}

/// `scale · Σ` of the per-term losses over masked rows, accumulating
/// `scale · ∂/∂z` into `grad` when given.
pub(crate) fn scaled_loss(
    kind: LossKind,
    z: &Matrix,
    target: Target<'_>,
    mask: &[bool],
    scale: f64,
    grad: Option<&mut Matrix>,
) -> Result<f64> {
    if z.rows() != target.rows() || mask.len() != z.rows() {
        bail!(
            Shape,
            "{} output rows, {} target rows, {} mask entries",
            z.rows(),
            target.rows(),
            mask.len()
        );
    }
    match (kind, target) {
        (LossKind::CrossEntropy, Target::Classes(labels)) => ce_sum(z, labels, mask, scale, grad),
        (LossKind::Mae, Target::Values(t)) => {
            z.check_shape(t.rows(), t.cols(), "prediction")?;
            Ok(mae_sum(z, t, mask, scale, grad))
        }
        (kind, _) => bail!(InvalidArgument, "{} loss does not match the target type", kind),
    }
}

fn ce_sum(z: &Matrix, labels: &[usize], mask: &[bool], scale: f64, mut grad: Option<&mut Matrix>) -> Result<f64> {
    let mut total = 0.0;
    let mut probs: Vec<f64> = Vec::with_capacity(z.cols());
    for i in (0..z.rows()).filter(|&i| mask[i]) {
        let row = z.row(i);
        let y = labels[i];
        if y >= row.len() {
            bail!(InvalidArgument, "class {} outside {} outputs", y, row.len());
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        probs.clear();
        probs.extend(row.iter().map(|&v| libm::exp(v - max)));
        let sum: f64 = probs.iter().sum();
        total += libm::log(sum) + max - row[y];
        if let Some(g) = grad.as_deref_mut() {
            let gr = g.row_mut(i);
            for (c, p) in probs.iter().enumerate() {
                gr[c] += scale * (p / sum - if c == y { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(total * scale)
}

fn mae_sum(z: &Matrix, t: &Matrix, mask: &[bool], scale: f64, mut grad: Option<&mut Matrix>) -> f64 {
    let mut total = 0.0;
    for i in (0..z.rows()).filter(|&i| mask[i]) {
        for (c, (&a, &b)) in z.row(i).iter().zip(t.row(i)).enumerate() {
            let diff = a - b;
            total += libm::fabs(diff);
            if let Some(g) = grad.as_deref_mut() {
                let s = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                g[(i, c)] += scale * s;
            }
        }
    }
    total * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn confident_correct_logits_have_zero_loss() {
        let z = Matrix::from_rows(&[[1e3, 0.0, 0.0], [0.0, 1e3, 0.0]]).unwrap();
        let l = cross_entropy(&z, &[0, 1], &[true, true]).unwrap();
        assert!(l.abs() < 1e-6);
    }

    #[test]
    fn exact_prediction_has_zero_mae() {
        let t = Matrix::from_rows(&[[1.5], [-2.0]]).unwrap();
        assert_eq!(mae(&t, &t, &[true, true]).unwrap(), 0.0);
    }

    #[test]
    fn three_row_hand_case() {
        let z = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, -1.0]]).unwrap();
        let labels = [0, 1, 0];
        let mask = [true, true, false];
        // direct formula: -log(e^{z_y} / Σ e^{z})
        let row = |a: f64, b: f64, y: usize| {
            let s = libm::exp(a) + libm::exp(b);
            -libm::log(if y == 0 { libm::exp(a) } else { libm::exp(b) } / s)
        };
        let want = (row(0.0, 0.0, 0) + row(1.0, 0.0, 1)) / 2.0;
        assert!((cross_entropy(&z, &labels, &mask).unwrap() - want).abs() < 1e-14);

        let t = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        let want = (1.0 + 0.0 + 0.0 + 1.0) / 4.0;
        assert_eq!(mae(&z, &t, &mask).unwrap(), want);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let z = Matrix::zeros(2, 2);
        assert_eq!(cross_entropy(&z, &[0, 1], &[false, false]), Err(Error::NoSupervisedNodes));
        assert_eq!(mae(&z, &z, &[false, false]), Err(Error::NoSupervisedNodes));
    }

    #[test]
    fn uniform_softmax_gradient_pattern() {
        let z = Matrix::zeros(3, 4);
        let labels = [2, 0, 1];
        let mask = [true, false, true];
        let mut g = Matrix::zeros(3, 4);
        scaled_loss(LossKind::CrossEntropy, &z, Target::Classes(&labels), &mask, 0.5, Some(&mut g)).unwrap();
        for i in 0..3 {
            for c in 0..4 {
                let want = if mask[i] {
                    (0.25 - if c == labels[i] { 1.0 } else { 0.0 }) / 2.0
                } else {
                    0.0
                };
                assert!((g[(i, c)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mismatched_target_kind_is_rejected() {
        let z = Matrix::zeros(1, 1);
        let r = scaled_loss(LossKind::Mae, &z, Target::Classes(&[0]), &[true], 1.0, None);
        assert!(r.is_err());
        let _ = vec![0];
    }
}
