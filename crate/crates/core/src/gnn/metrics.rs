use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::matrix::Matrix;

fn masked_rows(rows: usize, mask: &[bool]) -> Result<Vec<usize>> {
    if mask.len() != rows {
        bail!(Shape, "{} mask entries for {} rows", mask.len(), rows);
    }
    let idx: Vec<usize> = (0..rows).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(Error::NoSupervisedNodes);
    }
    Ok(idx)
}

/// Fraction of masked rows whose argmax (first on ties) equals the label.
pub fn accuracy(z: &Matrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != z.rows() {
        bail!(Shape, "{} labels for {} rows", labels.len(), z.rows());
    }
    let idx = masked_rows(z.rows(), mask)?;
    let correct = idx.iter().filter(|&&i| argmax(z.row(i)) == labels[i]).count();
    Ok(correct as f64 / idx.len() as f64)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Mean over target columns of `MAE_c / σ_c` on the masked rows.
pub fn normalized_mae(z: &Matrix, targets: &Matrix, mask: &[bool], sigma: &[f64]) -> Result<f64> {
    z.check_shape(targets.rows(), targets.cols(), "prediction")?;
    if sigma.len() != z.cols() {
        bail!(Shape, "{} sigmas for {} target columns", sigma.len(), z.cols());
    }
    if let Some(s) = sigma.iter().find(|&&s| !(s > 0.0)) {
        bail!(InvalidArgument, "normalising standard deviation {} is not positive", s);
    }
    let idx = masked_rows(z.rows(), mask)?;
    let mut total = 0.0;
    for (c, &s) in sigma.iter().enumerate() {
        let err: f64 = idx.iter().map(|&i| libm::fabs(z[(i, c)] - targets[(i, c)])).sum();
        total += err / idx.len() as f64 / s;
    }
    Ok(total / sigma.len() as f64)
}

/// Population standard deviation of each column over the masked rows.
pub fn column_std(targets: &Matrix, mask: &[bool]) -> Result<Vec<f64>> {
    let idx = masked_rows(targets.rows(), mask)?;
    let n = idx.len() as f64;
    Ok((0..targets.cols())
        .map(|c| {
            let mean = idx.iter().map(|&i| targets[(i, c)]).sum::<f64>() / n;
            let var = idx
                .iter()
                .map(|&i| (targets[(i, c)] - mean) * (targets[(i, c)] - mean))
                .sum::<f64>()
                / n;
            libm::sqrt(var)
        })
        .collect())
}
