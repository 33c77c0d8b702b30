//! Shared oracles for the integration and acceptance suites. Everything
//! here recomputes results through an independent route; nothing calls the
//! solver internals it is checking.

use pathbounds::assembly::IndicatorMatrix;
use pathbounds::qp::{project_capped_simplex, QpProblem};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Projected gradient descent with a 1/L step, run to the requested
/// gradient-mapping stationarity.
pub fn projected_gradient(problem: &QpProblem, tol: f64, max_iter: usize) -> Vec<f64> {
    let n = problem.matrix.ncols();
    let lambda = problem.penalty;
    let sign = match problem.sense {
        pathbounds::qp::Sense::Lower => 1.0,
        pathbounds::qp::Sense::Upper => -1.0,
    };
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut row = vec![0.0; problem.matrix.nrows()];
    let mut col = vec![0.0; n];
    let mut lmax = 0.0;
    for _ in 0..200 {
        problem.matrix.mul_vec(&v, &mut row);
        problem.matrix.tr_mul_vec(&row, &mut col);
        lmax = norm2(&col);
        if lmax <= 1e-300 {
            lmax = 0.0;
            break;
        }
        for i in 0..n {
            v[i] = col[i] / lmax;
        }
    }
    let step = 1.0 / (lambda * lmax + 1.0);
    let mut w = vec![0.0; n];
    for _ in 0..max_iter {
        problem.matrix.mul_vec(&w, &mut row);
        for (r, t) in row.iter_mut().zip(problem.target) {
            *r -= t;
        }
        problem.matrix.tr_mul_vec(&row, &mut col);
        let cand: Vec<f64> = (0..n)
            .map(|i| w[i] - step * (lambda * col[i] + sign * problem.objective[i]))
            .collect();
        let next = project_capped_simplex(&cand);
        let movement: f64 = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        w = next;
        if movement <= tol * step {
            break;
        }
    }
    w
}

/// Entrywise indicator-matrix oracle: the naive triple loop over cells.
pub fn triple_loop_matrix(
    pairs: &[pathbounds::paths::PathPair],
    grid: &pathbounds::grid::Grid,
) -> Vec<Vec<u32>> {
    pairs
        .iter()
        .map(|pair| {
            let mut rows = Vec::new();
            for iz in 0..grid.len() {
                for ix in 0..grid.len() {
                    for iy in 0..grid.len() {
                        let (y, x) = pathbounds::paths::compose(pair, grid.points()[iz]);
                        if y <= grid.points()[iy] && x <= grid.points()[ix] {
                            rows.push(grid.cell_index(iy, ix, iz) as u32);
                        }
                    }
                }
            }
            rows.sort_unstable();
            rows
        })
        .collect()
}

/// Structural equality against the oracle.
pub fn matrix_equals_oracle(matrix: &IndicatorMatrix, oracle: &[Vec<u32>]) -> bool {
    if matrix.ncols() != oracle.len() {
        return false;
    }
    (0..matrix.ncols()).all(|j| matrix.column(j) == oracle[j].as_slice())
}
