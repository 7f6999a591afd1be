use crate::pdw::Partition;
use crate::{Error, Result};

/// Intersection counts `n_ij = |U_i ∩ V_j|` of two partitions of one set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<usize>,
    row_sums: Vec<usize>,
    col_sums: Vec<usize>,
    total: usize,
}

impl ContingencyTable {
    pub fn new(u: &Partition, v: &Partition) -> Result<Self> {
        if u.n_points() != v.n_points() {
            return Err(Error::Validation(format!(
                "partitions cover {} and {} points",
                u.n_points(),
                v.n_points()
            )));
        }
        let col_of = v.assignment();
        let (rows, cols) = (u.n_blocks(), v.n_blocks());
        let mut counts = vec![0; rows * cols];
        for (i, block) in u.blocks().iter().enumerate() {
            for &p in block {
                counts[i * cols + col_of[p]] += 1;
            }
        }
        Ok(Self::from_counts(rows, cols, counts))
    }

    /// Table from a dense row-major count matrix.
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<usize>) -> Self {
        assert_eq!(counts.len(), rows * cols);
        let mut row_sums = vec![0; rows];
        let mut col_sums = vec![0; cols];
        for i in 0..rows {
            for j in 0..cols {
                row_sums[i] += counts[i * cols + j];
                col_sums[j] += counts[i * cols + j];
            }
        }
        let total = row_sums.iter().sum();
        Self {
            rows,
            cols,
            counts,
            row_sums,
            col_sums,
            total,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.counts[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_sums(&self) -> &[usize] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[usize] {
        &self.col_sums
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Non-zero cells as `(n_ij, a_i, b_j)`.
    pub(crate) fn nonzero(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (0..self.cols).filter_map(move |j| {
                let c = self.get(i, j);
                (c > 0).then(|| (c, self.row_sums[i], self.col_sums[j]))
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions_give_a_diagonal() {
        let u = Partition::new(vec![vec![0, 1], vec![2]]).unwrap();
        let t = ContingencyTable::new(&u, &u).unwrap();
        assert_eq!(t.shape(), (2, 2));
        assert_eq!((t.get(0, 0), t.get(0, 1), t.get(1, 0), t.get(1, 1)), (2, 0, 0, 1));
    }

    #[test]
    fn one_block_against_singletons_is_a_row_of_ones() {
        let u = Partition::new(vec![vec![0, 1, 2]]).unwrap();
        let v = Partition::new(vec![vec![0], vec![1], vec![2]]).unwrap();
        let t = ContingencyTable::new(&u, &v).unwrap();
        assert_eq!(t.shape(), (1, 3));
        assert_eq!(t.row_sums(), &[3]);
        assert_eq!(t.col_sums(), &[1, 1, 1]);
    }

    #[test]
    fn mismatched_ground_sets_error() {
        let u = Partition::new(vec![vec![0, 1]]).unwrap();
        let v = Partition::new(vec![vec![0, 1, 2]]).unwrap();
        assert!(ContingencyTable::new(&u, &v).is_err());
    }
}
