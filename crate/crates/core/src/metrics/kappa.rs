use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Items x categories rating counts with a constant number of raters per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingMatrix {
    rows: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self, MetricsError> {
        let first = rows
            .first()
            .ok_or(MetricsError::InvalidMatrix("no items"))?;
        let categories = first.len();
        if categories < 2 {
            return Err(MetricsError::InvalidMatrix("fewer than two categories"));
        }
        let raters: u32 = first.iter().sum();
        for row in &rows {
            if row.len() != categories {
                return Err(MetricsError::InvalidMatrix("ragged rows"));
            }
            if row.iter().sum::<u32>() != raters {
                return Err(MetricsError::InvalidMatrix("row sums differ"));
            }
        }
        if raters < 2 {
            return Err(MetricsError::TooFewRaters);
        }
        Ok(RatingMatrix { rows, raters })
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn categories(&self) -> usize {
        self.rows[0].len()
    }
}

/// Fleiss' kappa `(P - Pe) / (1 - Pe)`.
///
/// When every rating falls in one category `Pe = 1`; that case is defined as
/// 1 if observed agreement is also perfect.
pub fn fleiss_kappa(r: &RatingMatrix) -> Result<f64, MetricsError> {
    let n = r.raters as f64;
    let items = r.items() as f64;
    let mut column_totals = alloc::vec![0u64; r.categories()];
    let mut p_sum = 0.0;
    for row in &r.rows {
        let agreeing: u64 = row
            .iter()
            .map(|&c| c as u64 * (c as u64).saturating_sub(1))
            .sum();
        p_sum += agreeing as f64 / (n * (n - 1.0));
        for (t, &c) in column_totals.iter_mut().zip(row) {
            *t += c as u64;
        }
    }
    let p_bar = p_sum / items;
    let p_e: f64 = column_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / (items * n);
            p * p
        })
        .sum();
    if p_e == 1.0 {
        return if p_bar == 1.0 {
            Ok(1.0)
        } else {
            Err(MetricsError::InvalidMatrix("chance agreement is 1"))
        };
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
