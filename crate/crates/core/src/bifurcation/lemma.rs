//! Determinants of `D − M` for diagonal `D` and 0–1 matrices `M` with at
//! most one 1 per row.
//!
//! Such an `M` is described by a successor map `σ`: row `i` has its 1 in
//! column `σ(i)`, or no 1 at all. The determinant factors as follows.
//! Repeatedly delete a column with no 1 (contributing its diagonal entry
//! `dᵢ`) together with its row. What remains is a permutation, and each
//! of its cycles contributes `∏ d − 1` over the cycle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::linalg::Matrix;
use crate::scalar::Scalar;

/// One factor of the predicted determinant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `dᵢ` from a column of `M` without a 1.
    Column { index: usize },
    /// `∏_{i ∈ members} dᵢ − 1` from a cycle of the residual permutation.
    Cycle { members: Vec<usize> },
}

impl Factor {
    pub fn value<T: Scalar>(&self, d: &[T]) -> T {
        match self {
            Factor::Column { index } => d[*index],
            Factor::Cycle { members } => {
                members.iter().fold(T::one(), |p, &i| p * d[i]) - T::one()
            }
        }
    }
}

/// `D − M` as a dense matrix.
pub fn d_minus_m<T: Scalar>(d: &[T], sigma: &[Option<usize>]) -> Matrix<T> {
    let n = d.len();
    let mut a = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        a[i][i] = d[i];
        if let Some(j) = sigma[i] {
            a[i][j] = a[i][j] - T::one();
        }
    }
    a
}

/// Factor structure of `det(D − M)`.
pub fn predicted_factors(sigma: &[Option<usize>]) -> Vec<Factor> {
    let n = sigma.len();
    let mut alive = vec![true; n];
    let mut factors = Vec::new();
    loop {
        let mut hits = vec![0usize; n];
        for i in (0..n).filter(|&i| alive[i]) {
            if let Some(j) = sigma[i] {
                if alive[j] {
                    hits[j] += 1;
                }
            }
        }
        match (0..n).find(|&j| alive[j] && hits[j] == 0) {
            Some(j) => {
                alive[j] = false;
                factors.push(Factor::Column { index: j });
            }
            None => break,
        }
    }
    let mut seen = vec![false; n];
    for start in 0..n {
        if !alive[start] || seen[start] {
            continue;
        }
        let mut members = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            members.push(i);
            i = sigma[i].expect("residual rows form a permutation");
        }
        factors.push(Factor::Cycle { members });
    }
    factors
}

pub fn predicted_det<T: Scalar>(d: &[T], sigma: &[Option<usize>]) -> T {
    predicted_factors(sigma)
        .iter()
        .fold(T::one(), |p, f| p * f.value(d))
}

/// Determinant by cofactor expansion along the first row.
pub fn laplace_det<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.len();
    match n {
        0 => T::one(),
        1 => a[0][0],
        _ => {
            let mut total = T::zero();
            for c in 0..n {
                if a[0][c] == T::zero() {
                    continue;
                }
                let minor: Matrix<T> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != c)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let term = a[0][c] * laplace_det(&minor);
                total = if c % 2 == 0 { total + term } else { total - term };
            }
            total
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub n_max: usize,
    /// Successor patterns tested per size; exhaustive for small sizes.
    pub patterns: Vec<usize>,
    pub exhaustive: Vec<bool>,
    pub cases: usize,
    pub failures: usize,
    pub max_rel_error: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const EXHAUSTIVE_LIMIT: usize = 10_000;

fn decode(mut code: usize, n: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|_| {
            let v = code % (n + 1);
            code /= n + 1;
            (v < n).then_some(v)
        })
        .collect()
}

/// Compares the predicted factorization against cofactor expansion for
/// every size `1..=n_max` with `trials` random diagonals per pattern.
/// Patterns are enumerated exhaustively while `(n+1)^n` stays small and
/// sampled otherwise.
pub fn lemma_a1_check(n_max: usize, trials: usize, seed: u64) -> LemmaReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport {
        n_max,
        patterns: Vec::new(),
        exhaustive: Vec::new(),
        cases: 0,
        failures: 0,
        max_rel_error: 0.0,
    };
    for n in 1..=n_max {
        let total = (n + 1).checked_pow(n as u32).unwrap_or(usize::MAX);
        let exhaustive = total <= EXHAUSTIVE_LIMIT;
        let count = if exhaustive { total } else { EXHAUSTIVE_LIMIT };
        report.patterns.push(count);
        report.exhaustive.push(exhaustive);
        for k in 0..count {
            let code = if exhaustive { k } else { rng.random_range(0..total) };
            let sigma = decode(code, n);
            for _ in 0..trials {
                let d: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let direct = laplace_det(&d_minus_m(&d, &sigma));
                let pred = predicted_det(&d, &sigma);
                // largest possible term of the expansion
                let scale = d.iter().fold(1.0, |p, v| p * (v.abs() + 1.0));
                let rel = (direct - pred).abs() / scale;
                report.cases += 1;
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel > 1e-9 {
                    report.failures += 1;
                }
            }
        }
    }
    report
}
