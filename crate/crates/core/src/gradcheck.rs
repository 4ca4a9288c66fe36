//! Central finite-difference checks of analytic network gradients.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::activation::Labels;
use crate::error::{Error, Result};
use crate::layers::GradMode;
use crate::matrix::Matrix;
use crate::network::Network;
use crate::scalar::Scalar;
use crate::seed::{self, Purpose};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Floor of the relative-error denominator.
pub const REL_FLOOR: f64 = 1e-8;
/// Probe batches are redrawn until every hidden pre-activation is at least
/// this far from the ReLU kink.
pub const KINK_MARGIN: f64 = 1e-4;

/// `(f(θ+ε) − f(θ−ε)) / 2ε` for a scalar function of one coordinate.
pub fn numeric_grad(mut f: impl FnMut(f64) -> Result<f64>, theta: f64, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let plus = f(theta + eps)?;
    let minus = f(theta - eps)?;
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFinite(format!("loss at θ±ε: {plus}, {minus}")));
    }
    Ok((plus - minus) / (2.0 * eps))
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Numeric derivative of the batch loss with respect to one entry of
/// parameter matrix `slot`.
pub fn network_numeric_grad<T: Scalar>(
    net: &Network<T>,
    x: &Matrix<T>,
    y: &Labels,
    slot: usize,
    (row, col): (usize, usize),
    eps: f64,
) -> Result<f64> {
    let base = net.params()[slot].get(row, col).to_f64_lossy();
    let mut probe = net.clone();
    numeric_grad(
        |theta| {
            probe.params_mut()[slot].set(row, col, T::lit(theta));
            Ok(probe.loss(x, y)?.to_f64_lossy())
        },
        base,
        eps,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub worst_index: (usize, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradReport {
    pub mode: GradMode,
    pub eps: f64,
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&ParamReport> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn coordinates_checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gradcheck mode={:?} eps={:e} tol={:e}",
            self.mode, self.eps, self.tol
        )?;
        for p in &self.params {
            writeln!(
                f,
                "  {:<14} {:>5} coords  max_rel={:.3e}  mean_rel={:.3e}  worst={:?} (analytic {:.6e}, numeric {:.6e})  {}",
                p.name,
                p.checked,
                p.max_rel_error,
                p.mean_rel_error,
                p.worst_index,
                p.worst_analytic,
                p.worst_numeric,
                if p.passed { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "{}", if self.passed() { "PASSED" } else { "FAILED" })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub eps: f64,
    pub tol: f64,
    /// When the network has more coordinates than this, a seeded uniform
    /// sample of this many is checked instead of all of them.
    pub max_coords: usize,
    pub sample_seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOL,
            max_coords: 2000,
            sample_seed: 0,
        }
    }
}

/// Compares analytic gradients from `mode` against central differences of
/// the same network's loss on `(x, y)`.
pub fn check_network<T: Scalar>(
    net: &Network<T>,
    x: &Matrix<T>,
    y: &Labels,
    mode: GradMode,
    opts: &CheckOptions,
) -> Result<GradReport> {
    if y.is_empty() {
        return Err(Error::InvalidArgument(
            "gradcheck needs a nonempty batch".into(),
        ));
    }
    let (_, grads) = net.loss_and_grads(x, y, mode)?;
    let names = net.param_names();
    let shapes: Vec<(usize, usize)> = net.params().iter().map(|m| m.shape()).collect();

    // Flat coordinate list: (slot, row, col).
    let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let mut flat = Vec::with_capacity(total);
    for (slot, &(r, c)) in shapes.iter().enumerate() {
        for i in 0..r {
            for j in 0..c {
                flat.push((slot, i, j));
            }
        }
    }
    let coords: Vec<(usize, usize, usize)> = if total > opts.max_coords {
        let mut rng = seed::stream(opts.sample_seed, Purpose::Probe, 0);
        let mut picked = sample(&mut rng, total, opts.max_coords).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| flat[k]).collect()
    } else {
        flat
    };

    let results: Vec<(usize, usize, usize, f64, f64)> = coords
        .par_iter()
        .map(|&(slot, i, j)| {
            let numeric = network_numeric_grad(net, x, y, slot, (i, j), opts.eps)?;
            Ok((slot, i, j, grads[slot].get(i, j).to_f64_lossy(), numeric))
        })
        .collect::<Result<_>>()?;

    let mut params = Vec::with_capacity(names.len());
    for (slot, name) in names.into_iter().enumerate() {
        let mut report = ParamReport {
            name,
            checked: 0,
            max_rel_error: 0.0,
            mean_rel_error: 0.0,
            worst_index: (0, 0),
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            passed: true,
        };
        let mut sum = 0.0;
        for &(s, i, j, a, n) in results.iter().filter(|r| r.0 == slot) {
            debug_assert_eq!(s, slot);
            let e = relative_error(a, n);
            report.checked += 1;
            sum += e;
            if e > report.max_rel_error || report.checked == 1 {
                report.max_rel_error = e;
                report.worst_index = (i, j);
                report.worst_analytic = a;
                report.worst_numeric = n;
            }
        }
        if report.checked > 0 {
            report.mean_rel_error = sum / report.checked as f64;
        }
        report.passed = report.max_rel_error <= opts.tol;
        params.push(report);
    }
    Ok(GradReport {
        mode,
        eps: opts.eps,
        tol: opts.tol,
        params,
    })
}

/// Smallest `|z|` over all hidden pre-activations for the batch.
pub fn kink_distance<T: Scalar>(net: &Network<T>, x: &Matrix<T>) -> Result<f64> {
    let pass = net.forward(x)?;
    Ok(pass
        .hidden
        .iter()
        .flat_map(|c| c.z.as_slice().iter())
        .map(|z| z.abs().to_f64_lossy())
        .fold(f64::INFINITY, f64::min))
}

/// Draws a standard-normal-ish probe batch with random labels, redrawing
/// until no hidden pre-activation sits within [`KINK_MARGIN`] of zero.
pub fn probe_batch<T: Scalar, R: Rng + ?Sized>(
    net: &Network<T>,
    batch: usize,
    rng: &mut R,
) -> Result<(Matrix<T>, Labels)> {
    let n_in = net.input_width();
    let classes = net.output_width();
    for _ in 0..1000 {
        let x = Matrix::from_fn(n_in, batch, |_, _| {
            // Sum of uniforms: cheap, symmetric, roughly unit variance.
            let s: f64 = (0..3).map(|_| rng.gen_range(-1.0..1.0)).sum();
            T::lit(s)
        });
        if kink_distance(net, &x)? >= KINK_MARGIN {
            let y = Labels::new((0..batch).map(|_| rng.gen_range(0..classes)).collect());
            return Ok((x, y));
        }
    }
    Err(Error::InvalidArgument(
        "could not draw a probe batch away from ReLU kinks".into(),
    ))
}
