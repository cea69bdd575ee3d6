//! Weighted least squares via singular value decomposition, and the
//! singular-value-ratio condition number.
//!
//! Weights multiply residuals: the solver minimizes `||W (A theta - B)||_2`
//! with `W = diag(w)`, so a weight of 3 counts an equation 9 times as heavily
//! in the squared objective.

use super::{NumericsError, RANK_EPS};
use nalgebra::{DMatrix, DVector};
use std::io::{Read, Write};

/// Over-determined weighted linear system `A theta = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    w: DVector<f64>,
}

impl DesignSystem {
    /// Unweighted system (all weights 1).
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, NumericsError> {
        let w = DVector::from_element(a.nrows(), 1.0);
        Self::with_weights(a, b, w)
    }

    /// System with one non-negative weight per equation.
    pub fn with_weights(
        a: DMatrix<f64>,
        b: DVector<f64>,
        w: DVector<f64>,
    ) -> Result<Self, NumericsError> {
        if a.nrows() != b.len() || a.nrows() != w.len() {
            return Err(NumericsError::DimensionMismatch {
                detail: format!(
                    "A is {}x{}, B has {} entries, W has {} entries",
                    a.nrows(),
                    a.ncols(),
                    b.len(),
                    w.len()
                ),
            });
        }
        if a.nrows() < a.ncols() {
            return Err(NumericsError::DimensionMismatch {
                detail: format!("need m >= n, got {}x{}", a.nrows(), a.ncols()),
            });
        }
        if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(NumericsError::InvalidWeights);
        }
        Ok(Self { a, b, w })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    /// Rows of `A` scaled by their weights, `W * A`.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        let mut wa = self.a.clone();
        for (i, mut row) in wa.row_iter_mut().enumerate() {
            row *= self.w[i];
        }
        wa
    }

    fn weighted_rhs(&self) -> DVector<f64> {
        self.b.component_mul(&self.w)
    }

    /// Emit as dense CSV with columns `a_0..a_{n-1}, b, w`, one equation per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        for i in 0..self.a.nrows() {
            let mut record: Vec<String> = (0..self.a.ncols())
                .map(|j| format!("{:?}", self.a[(i, j)]))
                .collect();
            record.push(format!("{:?}", self.b[i]));
            record.push(format!("{:?}", self.w[i]));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Ingest from the CSV layout produced by [`DesignSystem::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self, NumericsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| NumericsError::InvalidInput {
                reason: format!("csv: {e}"),
            })?;
            let row: Result<Vec<f64>, _> = record.iter().map(|s| s.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| NumericsError::InvalidInput {
                reason: format!("csv number: {e}"),
            })?);
        }
        let m = rows.len();
        if m == 0 {
            return Err(NumericsError::InvalidInput {
                reason: "empty design system".to_string(),
            });
        }
        let width = rows[0].len();
        if width < 3 || rows.iter().any(|r| r.len() != width) {
            return Err(NumericsError::InvalidInput {
                reason: "rows must all have n + 2 columns (A | B | W)".to_string(),
            });
        }
        let n = width - 2;
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        let b = DVector::from_fn(m, |i, _| rows[i][n]);
        let w = DVector::from_fn(m, |i, _| rows[i][n + 1]);
        Self::with_weights(a, b, w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub theta: DVector<f64>,
    /// `||W (A theta - B)||_2` at the solution.
    pub residual_norm: f64,
}

/// Minimize `||W (A theta - B)||_2` by SVD, rejecting rank-deficient systems.
pub fn solve_least_squares(sys: &DesignSystem) -> Result<LeastSquaresSolution, NumericsError> {
    let wa = sys.weighted_matrix();
    let wb = sys.weighted_rhs();
    let svd = wa.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if sigma_min < RANK_EPS * sigma_max || sigma_max == 0.0 {
        return Err(NumericsError::RankDeficient {
            sigma_min,
            sigma_max,
        });
    }
    let theta = svd
        .solve(&wb, 0.0)
        .map_err(|e| NumericsError::InvalidInput {
            reason: e.to_string(),
        })?;
    let residual_norm = (&wa * &theta - &wb).norm();
    Ok(LeastSquaresSolution {
        theta,
        residual_norm,
    })
}

/// Ratio of largest to smallest singular value of `A` (or `W*A` when weights
/// are supplied). Returns `f64::INFINITY` when the smallest singular value
/// falls below the rank threshold. Always >= 1 for a nonzero matrix.
pub fn condition_number(a: &DMatrix<f64>, weights: Option<&DVector<f64>>) -> f64 {
    let m = match weights {
        Some(w) => {
            let mut wa = a.clone();
            for (i, mut row) in wa.row_iter_mut().enumerate() {
                row *= w[i];
            }
            wa
        }
        None => a.clone(),
    };
    let svd = m.svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if sigma_max == 0.0 || sigma_min < RANK_EPS * sigma_max {
        return f64::INFINITY;
    }
    (sigma_max / sigma_min).max(1.0)
}
