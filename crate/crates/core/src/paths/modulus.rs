//! Numerical extended modulus of continuity and the single-level hat
//! expansion of an arbitrary function.
//!
//! Both are diagnostics: the solver never calls them, but the approximation
//! quality of the basis is tested through them.

use crate::error::{Error, Result};
use crate::paths::basis::scaled_hat;

/// How much finer than `delta` the tabulation mesh must be.
const MESH_FACTOR: f64 = 8.0;

/// Jumps are increments exceeding this multiple of the median increment.
const JUMP_FACTOR: f64 = 8.0;

/// Numerical extended modulus `w'_f(delta)` of a function tabulated on a
/// uniform mesh over `[0, 1]`.
///
/// Minimizes, over candidate partitions into half-open cells of width at
/// least `delta`, the maximum within-cell oscillation. Candidate partition
/// knots align with detected jump locations; each segment between knots is
/// refined into the largest admissible number of uniform cells. For
/// piecewise functions whose jumps are detectable on the mesh this equals
/// the mesh infimum over all partitions.
pub fn ext_modulus(values: &[f64], delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::validation(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::validation("tabulation needs at least 2 points"));
    }
    let spacing = 1.0 / (n - 1) as f64;
    if spacing > delta / MESH_FACTOR {
        return Err(Error::MeshResolution {
            spacing,
            factor: MESH_FACTOR,
            limit: delta / MESH_FACTOR,
        });
    }

    let jumps = detect_jumps(values);
    let mesh_x = |k: usize| k as f64 * spacing;

    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << jumps.len()) {
        let mut knots = vec![0usize];
        for (b, &j) in jumps.iter().enumerate() {
            if mask & (1 << b) != 0 {
                knots.push(j);
            }
        }
        knots.push(n - 1);
        // every segment must itself be at least delta wide
        if knots
            .windows(2)
            .any(|w| mesh_x(w[1]) - mesh_x(w[0]) < delta - 1e-12)
        {
            continue;
        }
        let mut worst: f64 = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (mesh_x(w[0]), mesh_x(w[1]));
            let cells = ((b - a) / delta + 1e-12).floor().max(1.0) as usize;
            let width = (b - a) / cells as f64;
            for c in 0..cells {
                let lo = a + c as f64 * width;
                let hi = a + (c + 1) as f64 * width;
                // half-open [lo, hi): right endpoint belongs to the next cell
                let k0 = ((lo / spacing) - 1e-9).ceil().max(0.0) as usize;
                let k1 = (((hi / spacing) - 1e-9).ceil() as usize).min(n - 1);
                let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in &values[k0..k1] {
                    vmin = vmin.min(v);
                    vmax = vmax.max(v);
                }
                if vmax > vmin {
                    worst = worst.max(vmax - vmin);
                }
            }
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// Indices of mesh points immediately after an outsized increment.
fn detect_jumps(values: &[f64]) -> Vec<usize> {
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut sorted = diffs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let threshold = (JUMP_FACTOR * median).max(1e-9);
    let mut jumps: Vec<usize> = diffs
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > threshold)
        .map(|(i, _)| i + 1)
        .collect();
    if jumps.len() > 12 {
        // keep the largest jumps; enumeration is exponential in their count
        diffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let cutoff = diffs[11];
        jumps.retain(|&j| (values[j] - values[j - 1]).abs() >= cutoff);
        jumps.truncate(12);
    }
    jumps
}

/// Single-level hat expansion `sum_j <f, hat_{level,j}> hat_{level,j}(x)`
/// of a function given as a closure on the real line.
///
/// `breakpoints` lists known discontinuities or kinks of `f`; quadrature
/// panels never straddle them, so inner products are exact for piecewise
/// polynomial `f` and fourth-order accurate otherwise.
pub struct HatExpansion {
    level: u32,
    coeffs: Vec<f64>,
}

impl HatExpansion {
    pub fn project(level: u32, f: &dyn Fn(f64) -> f64, breakpoints: &[f64]) -> Self {
        let n = 1i64 << level;
        let coeffs = (0..=n)
            .map(|j| {
                let lo = (j - 1) as f64 / n as f64;
                let hi = (j + 1) as f64 / n as f64;
                let mid = j as f64 / n as f64;
                let mut cuts = vec![lo, mid, hi];
                cuts.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.dedup();
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    acc += simpson(&|t| f(t) * scaled_hat(level, j, t), w[0], w[1], 32);
                }
                acc
            })
            .collect();
        HatExpansion { level, coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = 1i64 << self.level;
        let u = n as f64 * x;
        let j0 = u.floor() as i64;
        let mut acc = 0.0;
        for j in j0..=j0 + 1 {
            if (0..=n).contains(&j) {
                acc += self.coeffs[j as usize] * scaled_hat(self.level, j, x);
            }
        }
        acc
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
