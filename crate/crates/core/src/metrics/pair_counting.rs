use super::ContingencyTable;
use crate::pdw::Partition;
use crate::{Error, Result};

fn pairs(k: usize) -> f64 {
    let k = k as u64;
    (k * k.saturating_sub(1) / 2) as f64
}

struct PairCounts {
    total: f64,
    same_both: f64,
    same_u: f64,
    same_v: f64,
}

impl ContingencyTable {
    fn pair_counts(&self) -> Result<PairCounts> {
        if self.total() < 2 {
            return Err(Error::Validation(format!(
                "pair-counting metrics need at least 2 points, got {}",
                self.total()
            )));
        }
        Ok(PairCounts {
            total: pairs(self.total()),
            same_both: self.nonzero().map(|(c, _, _)| pairs(c)).sum(),
            same_u: self.row_sums().iter().map(|&a| pairs(a)).sum(),
            same_v: self.col_sums().iter().map(|&b| pairs(b)).sum(),
        })
    }

    /// Fraction of point pairs on which the partitions agree.
    pub fn rand_index(&self) -> Result<f64> {
        let p = self.pair_counts()?;
        Ok((p.total + 2.0 * p.same_both - p.same_u - p.same_v) / p.total)
    }

    pub fn adjusted_rand_index(&self) -> Result<f64> {
        let p = self.pair_counts()?;
        let expected = p.same_u * p.same_v / p.total;
        let max = 0.5 * (p.same_u + p.same_v);
        // max == expected only when both partitions are all-one-block or
        // both are all-singletons, in which case they agree perfectly.
        if max == expected {
            return Ok(1.0);
        }
        Ok((p.same_both - expected) / (max - expected))
    }
}

pub fn rand_index(u: &Partition, v: &Partition) -> Result<f64> {
    ContingencyTable::new(u, v)?.rand_index()
}

pub fn adjusted_rand_index(u: &Partition, v: &Partition) -> Result<f64> {
    ContingencyTable::new(u, v)?.adjusted_rand_index()
}
