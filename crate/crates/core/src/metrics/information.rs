use super::ContingencyTable;
use crate::pdw::Partition;
use crate::Result;

/// `ln(k!)` for `k = 0..=n`.
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).ln();
            table.push(acc);
        }
        Self(table)
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }
}

/// Shannon entropy (nats) of a partition given its block sizes.
pub fn entropy(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let h: f64 = sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

pub fn mutual_information(table: &ContingencyTable) -> f64 {
    let n = table.total() as f64;
    let mi: f64 = table
        .nonzero()
        .map(|(c, a, b)| {
            let c = c as f64;
            (c / n) * (n * c / (a as f64 * b as f64)).ln()
        })
        .sum();
    mi.max(0.0)
}

/// Exact expected mutual information under the permutation model: both
/// marginals fixed, the cell count `n_ij` hypergeometric.
pub fn expected_mutual_information(a: &[usize], b: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let lf = LogFactorials::new(n);
    let nf = n as f64;
    let ua = with_multiplicity(a);
    let ub = with_multiplicity(b);
    let mut emi = 0.0;
    for &(ai, ma) in &ua {
        for &(bj, mb) in &ub {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            if lo > hi {
                continue;
            }
            let fixed = lf.get(ai) + lf.get(bj) + lf.get(n - ai) + lf.get(n - bj) - lf.get(n);
            let mut cell = 0.0;
            for nij in lo..=hi {
                let log_p = fixed - lf.get(nij) - lf.get(ai - nij) - lf.get(bj - nij) - lf.get(n + nij - ai - bj);
                let x = nij as f64;
                cell += (x / nf) * (nf * x / (ai as f64 * bj as f64)).ln() * log_p.exp();
            }
            emi += cell * (ma * mb) as f64;
        }
    }
    emi.max(0.0)
}

fn with_multiplicity(sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<usize> = sizes.iter().copied().filter(|&s| s > 0).collect();
    sorted.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for s in sorted {
        match out.last_mut() {
            Some((v, m)) if *v == s => *m += 1,
            _ => out.push((s, 1)),
        }
    }
    out
}

impl ContingencyTable {
    pub fn mutual_information(&self) -> f64 {
        mutual_information(self)
    }

    /// AMI with the arithmetic-mean normalizer. A vanishing denominator
    /// yields 1 for identical partitions and 0 otherwise.
    pub fn adjusted_mutual_information(&self) -> f64 {
        let mi = self.mutual_information();
        let emi = expected_mutual_information(self.row_sums(), self.col_sums(), self.total());
        let hu = entropy(self.row_sums());
        let hv = entropy(self.col_sums());
        let denom = 0.5 * (hu + hv) - emi;
        if denom.abs() < 1e-12 {
            return if self.is_identity_match() { 1.0 } else { 0.0 };
        }
        (mi - emi) / denom
    }

    /// `(homogeneity, completeness, v_measure)` with rows as the prediction.
    pub fn homogeneity_completeness_v(&self) -> (f64, f64, f64) {
        let n = self.total() as f64;
        let hu = entropy(self.row_sums());
        let hv = entropy(self.col_sums());
        let mut h_v_given_u = 0.0;
        let mut h_u_given_v = 0.0;
        for (c, a, b) in self.nonzero() {
            let p = c as f64 / n;
            h_v_given_u -= p * (c as f64 / a as f64).ln();
            h_u_given_v -= p * (c as f64 / b as f64).ln();
        }
        let h = if hv > 0.0 { 1.0 - h_v_given_u / hv } else { 1.0 };
        let c = if hu > 0.0 { 1.0 - h_u_given_v / hu } else { 1.0 };
        let (h, c) = (h.clamp(0.0, 1.0), c.clamp(0.0, 1.0));
        let v = if h + c > 0.0 { 2.0 * h * c / (h + c) } else { 0.0 };
        (h, c, v)
    }

    /// True when every row has exactly one non-zero cell equal to both of
    /// its marginals, i.e. the two partitions coincide.
    fn is_identity_match(&self) -> bool {
        self.row_sums().len() == self.col_sums().len() && self.nonzero().all(|(c, a, b)| c == a && c == b)
    }
}

pub fn adjusted_mutual_information(u: &Partition, v: &Partition) -> Result<f64> {
    Ok(ContingencyTable::new(u, v)?.adjusted_mutual_information())
}

pub fn ami(u: &Partition, v: &Partition) -> Result<f64> {
    adjusted_mutual_information(u, v)
}

pub fn homogeneity_completeness_v(u: &Partition, v: &Partition) -> Result<(f64, f64, f64)> {
    Ok(ContingencyTable::new(u, v)?.homogeneity_completeness_v())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdw::Partition;

    fn p(labels: &[i64]) -> Partition {
        Partition::from_label_slice(labels)
    }

    #[test]
    fn identical_halves_share_log_two() {
        let u = p(&[0, 0, 1, 1]);
        let t = ContingencyTable::new(&u, &u).unwrap();
        assert!((t.mutual_information() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_block_carries_no_information() {
        let t = ContingencyTable::new(&p(&[0, 0, 0, 0]), &p(&[0, 1, 1, 2])).unwrap();
        assert_eq!(t.mutual_information(), 0.0);
        assert_eq!(expected_mutual_information(&[4], &[1, 2, 1], 4), 0.0);
    }

    #[test]
    fn ami_is_one_on_identical_partitions() {
        let u = p(&[0, 0, 1, 1, 2, 2, 2]);
        assert!((ami(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let relabelled = p(&[5, 5, 9, 9, 1, 1, 1]);
        assert!((ami(&u, &relabelled).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominators() {
        let one = p(&[0, 0, 0]);
        let singles = p(&[0, 1, 2]);
        assert_eq!(ami(&one, &one).unwrap(), 1.0);
        assert_eq!(ami(&singles, &singles).unwrap(), 1.0);
        assert_eq!(ami(&one, &singles).unwrap(), 0.0);
    }

    #[test]
    fn fragmenting_keeps_homogeneity() {
        let truth = p(&[0, 0, 1, 1]);
        let (h, c, _) = homogeneity_completeness_v(&p(&[0, 1, 2, 3]), &truth).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        assert!(c < 1.0);
        let (h, c, _) = homogeneity_completeness_v(&p(&[0, 0, 0, 0]), &truth).unwrap();
        assert_eq!(h, 0.0);
        assert_eq!(c, 1.0);
    }
}
