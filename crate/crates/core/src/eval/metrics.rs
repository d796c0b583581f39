use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn check(x_hat: &DMatrix<f64>, x_ref: &DMatrix<f64>, select: Option<&DMatrix<bool>>) -> Result<()> {
    if x_hat.shape() != x_ref.shape() {
        return Err(Error::dim(format!(
            "estimate is {}x{} but reference is {}x{}",
            x_hat.nrows(),
            x_hat.ncols(),
            x_ref.nrows(),
            x_ref.ncols()
        )));
    }
    if let Some(s) = select {
        if s.shape() != x_ref.shape() {
            return Err(Error::dim(
                "entry selection does not match the signal shape",
            ));
        }
    }
    Ok(())
}

fn errors<'a>(
    x_hat: &'a DMatrix<f64>,
    x_ref: &'a DMatrix<f64>,
    select: Option<&'a DMatrix<bool>>,
) -> impl Iterator<Item = f64> + 'a {
    x_hat
        .iter()
        .zip(x_ref.iter())
        .enumerate()
        .filter(move |(k, _)| select.is_none_or(|s| s.as_slice()[*k]))
        .map(|(_, (a, b))| a - b)
}

pub fn rmse(x_hat: &DMatrix<f64>, x_ref: &DMatrix<f64>) -> Result<f64> {
    rmse_selected(x_hat, x_ref, None)
}

pub fn mae(x_hat: &DMatrix<f64>, x_ref: &DMatrix<f64>) -> Result<f64> {
    mae_selected(x_hat, x_ref, None)
}

/// RMSE over the entries where `select` is true (all entries when `None`).
/// An empty selection scores 0.
pub fn rmse_selected(
    x_hat: &DMatrix<f64>,
    x_ref: &DMatrix<f64>,
    select: Option<&DMatrix<bool>>,
) -> Result<f64> {
    check(x_hat, x_ref, select)?;
    let (sum, count) =
        errors(x_hat, x_ref, select).fold((0.0, 0usize), |(s, c), e| (s + e * e, c + 1));
    Ok(if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    })
}

pub fn mae_selected(
    x_hat: &DMatrix<f64>,
    x_ref: &DMatrix<f64>,
    select: Option<&DMatrix<bool>>,
) -> Result<f64> {
    check(x_hat, x_ref, select)?;
    let (sum, count) =
        errors(x_hat, x_ref, select).fold((0.0, 0usize), |(s, c), e| (s + e.abs(), c + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}
