use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a p-value grid. `p_value` is `None` when the cell was
/// never computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub metric: String,
    pub p_value: Option<f64>,
}

/// Significant metrics for one (dataset, model, method) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub dataset: String,
    pub model: String,
    pub method: String,
    pub significant: usize,
    pub metrics: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub alpha: f64,
    pub rows: Vec<CountRow>,
    pub significant_cells: usize,
    pub total_cells: usize,
    pub fraction_significant: f64,
    /// Combinations with at least one significant metric.
    pub combinations_with_any: usize,
    pub total_combinations: usize,
    pub fraction_combinations_with_any: f64,
}

/// Counts cells with `p < alpha` per (dataset, model, method).
///
/// Rows keep the order in which combinations first appear. Any missing
/// p-value makes the grid incomplete and is an error.
pub fn aggregate_counts(cells: &[GridCell], alpha: f64) -> Result<CountsTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} not in (0, 1)")));
    }
    if cells.is_empty() {
        return Err(Error::IncompleteGrid("no cells".into()));
    }
    let mut rows: Vec<CountRow> = Vec::new();
    let mut significant_cells = 0;
    for c in cells {
        let p = c.p_value.ok_or_else(|| {
            Error::IncompleteGrid(format!(
                "missing p-value for {}/{}/{}/{}",
                c.dataset, c.model, c.method, c.metric
            ))
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Input(format!("p-value {p} outside [0, 1]")));
        }
        let hit = usize::from(p < alpha);
        significant_cells += hit;
        match rows
            .iter_mut()
            .find(|r| r.dataset == c.dataset && r.model == c.model && r.method == c.method)
        {
            Some(r) => {
                r.significant += hit;
                r.metrics += 1;
            }
            None => rows.push(CountRow {
                dataset: c.dataset.clone(),
                model: c.model.clone(),
                method: c.method.clone(),
                significant: hit,
                metrics: 1,
            }),
        }
    }
    let combinations_with_any = rows.iter().filter(|r| r.significant > 0).count();
    Ok(CountsTable {
        alpha,
        significant_cells,
        total_cells: cells.len(),
        fraction_significant: significant_cells as f64 / cells.len() as f64,
        combinations_with_any,
        total_combinations: rows.len(),
        fraction_combinations_with_any: combinations_with_any as f64 / rows.len() as f64,
        rows,
    })
}
