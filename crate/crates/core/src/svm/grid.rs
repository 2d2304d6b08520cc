//! Holdout grid search over `(C, σ)` for the Gaussian kernel.

use serde::{Deserialize, Serialize};

use super::{accuracy, train, KernelSpec};
use crate::config::SolverConfig;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::partition::{rng_from_seed, shuffle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
    /// Holdout accuracy in percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    /// One entry per pair, `C` outer and `σ` inner, in grid order.
    pub table: Vec<GridCell>,
    pub train_size: usize,
    pub holdout_size: usize,
}

/// Trains on a seeded `1 − holdout` share of `data` for every `(C, σ)` and
/// scores accuracy on the rest. The best cell maximizes accuracy; ties go
/// to the smaller `C`, then the smaller `σ`. Up to `threads` cells train
/// concurrently; each cell's solver seed is `config.seed + cell index`.
pub fn grid_search(
    data: &Dataset,
    c_grid: &[f64],
    sigma_grid: &[f64],
    holdout: f64,
    config: &SolverConfig,
    seed: u64,
    threads: usize,
) -> Result<GridResult> {
    if c_grid.is_empty() || sigma_grid.is_empty() {
        return Err(invalid("grids must be nonempty"));
    }
    if !(holdout > 0.0 && holdout < 1.0) {
        return Err(invalid(format!("holdout must lie in (0, 1), got {holdout}")));
    }
    data.check_binary()?;
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidSplit("need at least two points to split".into()));
    }
    let n_hold = ((holdout * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, &mut rng_from_seed(seed));
    let (hold_idx, train_idx) = idx.split_at(n_hold);
    let train_set = data.select_rows(train_idx);
    let hold_set = data.select_rows(hold_idx);
    let first = train_set.y[0];
    if train_set.y.iter().all(|&v| v == first) {
        return Err(Error::InvalidSplit(format!(
            "training part has only label {first}"
        )));
    }

    let pairs: Vec<(f64, f64)> = c_grid
        .iter()
        .flat_map(|&c| sigma_grid.iter().map(move |&s| (c, s)))
        .collect();
    let mut cfg = config.clone();
    cfg.block_size = cfg.block_size.min(train_set.n());
    let score = |k: usize| -> Result<GridCell> {
        let (c, sigma) = pairs[k];
        let mut cell_cfg = cfg.clone();
        cell_cfg.seed = cfg.seed.wrapping_add(k as u64);
        let (model, _) = train(&train_set, c, KernelSpec::Gaussian { sigma }, &cell_cfg)?;
        let acc = accuracy(&model, &hold_set.x, &hold_set.y)?;
        Ok(GridCell { c, sigma, accuracy: acc })
    };

    let threads = threads.max(1).min(pairs.len());
    let mut slots: Vec<Option<Result<GridCell>>> = (0..pairs.len()).map(|_| None).collect();
    if threads == 1 {
        for (k, slot) in slots.iter_mut().enumerate() {
            *slot = Some(score(k));
        }
    } else {
        std::thread::scope(|scope| {
            for (t, chunk) in slots.chunks_mut(pairs.len().div_ceil(threads)).enumerate() {
                let score = &score;
                let base = t * pairs.len().div_ceil(threads);
                scope.spawn(move || {
                    for (off, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(score(base + off));
                    }
                });
            }
        });
    }
    let table: Vec<GridCell> = slots
        .into_iter()
        .map(|s| s.expect("every cell scored"))
        .collect::<Result<_>>()?;
    let best = pick_best(&table);
    Ok(GridResult {
        best,
        table,
        train_size: train_set.n(),
        holdout_size: hold_set.n(),
    })
}

pub(super) fn pick_best(table: &[GridCell]) -> GridCell {
    let mut cells = table.to_vec();
    cells.sort_by(|a, b| a.c.total_cmp(&b.c).then(a.sigma.total_cmp(&b.sigma)));
    let top = cells.iter().map(|c| c.accuracy).fold(f64::NEG_INFINITY, f64::max);
    *cells.iter().find(|c| c.accuracy == top).expect("nonempty table")
}
