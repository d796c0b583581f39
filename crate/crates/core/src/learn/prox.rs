//! Proximal maps and the smooth-term gradient used by the primal-dual solver.
//!
//! The objective is split as `f(w) + g(Sw) + h(w)` with
//! `f(w) = 1{w >= 0} + 2 w'z`, `g(d) = -alpha sum(log d)` and
//! `h(w) = beta |w|^2 + upsilon |m.w - w_pi|^2`.

use crate::error::{Error, Result};

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::dim(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// `prox_{gamma f}(y) = max(0, y - 2 gamma z)`, elementwise.
pub fn prox_f(y: &[f64], gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    check_len(y.len(), z.len(), "prox_f")?;
    let mut out = vec![0.0; y.len()];
    prox_f_into(y, gamma, z, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn prox_f_into(y: &[f64], gamma: f64, z: &[f64], out: &mut [f64]) {
    let two_gamma = 2.0 * gamma;
    for ((o, &yi), &zi) in out.iter_mut().zip(y).zip(z) {
        *o = (yi - two_gamma * zi).max(0.0);
    }
}

/// `prox_{lambda g}(y) = (y + sqrt(y^2 + 4 alpha lambda)) / 2` for the log barrier.
pub fn prox_g(y: &[f64], lambda: f64, alpha: f64) -> Vec<f64> {
    y.iter()
        .map(|&v| 0.5 * (v + (v * v + 4.0 * alpha * lambda).sqrt()))
        .collect()
}

/// Prox of the conjugate barrier via Moreau: `(y - sqrt(y^2 + 4 alpha gamma)) / 2`.
/// Always strictly negative.
pub fn prox_g_conjugate(ybar: &[f64], gamma: f64, alpha: f64) -> Vec<f64> {
    let mut out = vec![0.0; ybar.len()];
    prox_g_conjugate_into(ybar, gamma, alpha, &mut out);
    out
}

#[inline]
pub(crate) fn prox_g_conjugate_into(ybar: &[f64], gamma: f64, alpha: f64, out: &mut [f64]) {
    let c = 4.0 * alpha * gamma;
    for (o, &v) in out.iter_mut().zip(ybar) {
        *o = 0.5 * (v - (v * v + c).sqrt());
    }
}

/// `2 beta w + 2 upsilon (m.w - w_pi)`. With no prior the second term vanishes.
pub fn grad_h(w: &[f64], beta: f64, upsilon: f64, mask: &[f64], w_pi: &[f64]) -> Result<Vec<f64>> {
    check_len(w.len(), mask.len(), "grad_h mask")?;
    check_len(w.len(), w_pi.len(), "grad_h prior")?;
    let mut out = vec![0.0; w.len()];
    grad_h_into(w, beta, upsilon, Some((mask, w_pi)), &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn grad_h_into(
    w: &[f64],
    beta: f64,
    upsilon: f64,
    prior: Option<(&[f64], &[f64])>,
    out: &mut [f64],
) {
    let two_beta = 2.0 * beta;
    match prior {
        Some((mask, w_pi)) if upsilon != 0.0 => {
            let two_ups = 2.0 * upsilon;
            for k in 0..w.len() {
                out[k] = two_beta * w[k] + two_ups * (mask[k] * w[k] - w_pi[k]);
            }
        }
        _ => {
            for (o, &wk) in out.iter_mut().zip(w) {
                *o = two_beta * wk;
            }
        }
    }
}

/// `h(w) = beta |w|^2 + upsilon |m.w - w_pi|^2`.
pub fn h_value(w: &[f64], beta: f64, upsilon: f64, mask: &[f64], w_pi: &[f64]) -> f64 {
    let frob: f64 = w.iter().map(|v| v * v).sum();
    let fid: f64 = if upsilon != 0.0 {
        w.iter()
            .zip(mask)
            .zip(w_pi)
            .map(|((wk, mk), pk)| {
                let r = mk * wk - pk;
                r * r
            })
            .sum()
    } else {
        0.0
    };
    beta * frob + upsilon * fid
}

/// Lipschitz constant of `grad_h`, `2(beta + upsilon)`.
pub fn lipschitz_h(beta: f64, upsilon: f64) -> f64 {
    2.0 * (beta + upsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_f_example() {
        assert_eq!(
            prox_f(&[3.0, -1.0], 0.5, &[1.0, 1.0]).unwrap(),
            vec![2.0, 0.0]
        );
        assert_eq!(
            prox_f(&[3.0, -1.0], 0.7, &[0.0, 0.0]).unwrap(),
            vec![3.0, 0.0]
        );
        assert!(prox_f(&[1.0], 1.0, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn prox_g_conjugate_examples() {
        assert!((prox_g_conjugate(&[0.0], 1.0, 1.0)[0] + 1.0).abs() < 1e-15);
        let v = prox_g_conjugate(&[3.0], 1.0, 1.0)[0];
        assert!((v - (3.0 - 13f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((v + 0.302_775_637_7).abs() < 1e-9);
        assert!(prox_g_conjugate(&[1e6, -1e6, 0.0], 0.1, 0.5)
            .iter()
            .all(|&x| x < 0.0));
    }

    #[test]
    fn grad_h_special_cases() {
        let w = [0.5, 1.0, 2.0];
        let g = grad_h(&w, 0.3, 0.0, &[1.0; 3], &[9.0; 3]).unwrap();
        assert_eq!(g, vec![0.3, 0.6, 1.2]);
        let g = grad_h(&w, 0.0, 2.0, &[1.0; 3], &w).unwrap();
        assert_eq!(g, vec![0.0; 3]);
        assert!(grad_h(&w, 0.0, 2.0, &[1.0; 2], &w).is_err());
    }
}
