use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{MultiViewDataset, RowSet};
use crate::error::{Result, ViganError};

/// Where unpaired x / y batches are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnpairedPool {
    /// Paired rows and single-view rows alike.
    All,
    /// Only the x-only / y-only rows.
    UnpairedOnly,
    /// Only the views of complete pairs.
    PairedOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchSizes {
    pub paired: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batches {
    pub paired_x: RowSet,
    pub paired_y: RowSet,
    pub x: RowSet,
    pub y: RowSet,
}

/// `count` indices drawn uniformly with replacement from `0..n`.
pub fn sample_indices<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    count: usize,
    pool: &'static str,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if n == 0 {
        return Err(ViganError::Empty(pool));
    }
    Ok((0..count).map(|_| rng.random_range(0..n)).collect())
}

fn pick_view<R: Rng + ?Sized>(
    rng: &mut R,
    paired: &RowSet,
    single: &RowSet,
    pool: UnpairedPool,
    count: usize,
    name: &'static str,
) -> Result<RowSet> {
    match pool {
        UnpairedPool::PairedOnly => {
            Ok(paired.select(&sample_indices(rng, paired.len(), count, name)?))
        }
        UnpairedPool::UnpairedOnly => {
            Ok(single.select(&sample_indices(rng, single.len(), count, name)?))
        }
        UnpairedPool::All => {
            let n = paired.len();
            let idx = sample_indices(rng, n + single.len(), count, name)?;
            let mut out = RowSet::new(paired.width());
            for i in idx {
                let row = if i < n {
                    paired.row(i)
                } else {
                    single.row(i - n)
                };
                out.push(row)?;
            }
            Ok(out)
        }
    }
}

/// One paired batch plus independent x and y batches.
///
/// Draw order is fixed (paired, x, y) so a seeded generator always yields
/// the same index sequence.
pub fn sample_batches<R: Rng + ?Sized>(
    ds: &MultiViewDataset,
    rng: &mut R,
    sizes: BatchSizes,
    pool: UnpairedPool,
) -> Result<Batches> {
    let idx = sample_indices(rng, ds.n_paired(), sizes.paired, "paired pool")?;
    let paired_x = ds.paired_x.select(&idx);
    let paired_y = ds.paired_y.select(&idx);
    let x = pick_view(rng, &ds.paired_x, &ds.x_only, pool, sizes.x, "x pool")?;
    let y = pick_view(rng, &ds.paired_y, &ds.y_only, pool, sizes.y, "y pool")?;
    Ok(Batches {
        paired_x,
        paired_y,
        x,
        y,
    })
}
