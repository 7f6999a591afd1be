//! Reference computations that share no code with the crate: direct
//! membership counting, pair enumeration, triple loops and sampling.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

/// Labels with `k` possible values; not every value need occur.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(0..k as i64)).collect()
}

/// Joint and marginal counts, by scanning every index.
type Counts<K> = HashMap<K, usize>;

fn counts(u: &[i64], v: &[i64]) -> (Counts<(i64, i64)>, Counts<i64>, Counts<i64>) {
    let mut joint = HashMap::new();
    let mut a = HashMap::new();
    let mut b = HashMap::new();
    for (&x, &y) in u.iter().zip(v) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *a.entry(x).or_insert(0) += 1;
        *b.entry(y).or_insert(0) += 1;
    }
    (joint, a, b)
}

fn entropy_of(counts: &HashMap<i64, usize>, n: f64) -> f64 {
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

pub fn mutual_information(u: &[i64], v: &[i64]) -> f64 {
    let n = u.len() as f64;
    let (joint, a, b) = counts(u, v);
    joint
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            c / n * (n * c / (a[&x] as f64 * b[&y] as f64)).ln()
        })
        .sum()
}

/// Hypergeometric probabilities built by running products, not factorials:
/// P(k) for k = lo..=hi with row size `a`, column size `b`, total `n`.
fn hypergeometric(a: usize, b: usize, n: usize) -> (usize, Vec<f64>) {
    let lo = (a + b).saturating_sub(n);
    let hi = a.min(b);
    // P(lo) as a product of ratios, then P(k+1)/P(k) recursively.
    let mut p0 = 1.0f64;
    if lo == 0 {
        // C(n-a, b) / C(n, b) = prod_{i<b} (n-a-i)/(n-i)
        for i in 0..b {
            p0 *= (n - a - i) as f64 / (n - i) as f64;
        }
    } else {
        // C(a, lo) C(n-a, b-lo) / C(n, b) with b - lo = n - a.
        // = C(a, lo) / C(n, b), since C(n-a, n-a) = 1.
        let mut num = 1.0f64;
        for i in 0..lo {
            num *= (a - i) as f64 / (lo - i) as f64;
        }
        let mut den = 1.0f64;
        for i in 0..b {
            den *= (n - i) as f64 / (b - i) as f64;
        }
        p0 = num / den;
    }
    let mut ps = vec![p0];
    for k in lo..hi {
        let prev = *ps.last().unwrap();
        let ratio = ((a - k) * (b - k)) as f64 / ((k + 1) * (n + k + 1 - a - b)) as f64;
        ps.push(prev * ratio);
    }
    (lo, ps)
}

pub fn expected_mutual_information(u: &[i64], v: &[i64]) -> f64 {
    let n = u.len();
    let (_, a, b) = counts(u, v);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a.values() {
        for &bj in b.values() {
            let (lo, ps) = hypergeometric(ai, bj, n);
            for (offset, p) in ps.iter().enumerate() {
                let k = lo + offset;
                if k == 0 {
                    continue;
                }
                let kf = k as f64;
                emi += p * kf / nf * (nf * kf / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    emi
}

pub fn ami(u: &[i64], v: &[i64]) -> f64 {
    let n = u.len() as f64;
    let (_, a, b) = counts(u, v);
    let (hu, hv) = (entropy_of(&a, n), entropy_of(&b, n));
    let mi = mutual_information(u, v);
    let emi = expected_mutual_information(u, v);
    let denom = 0.5 * (hu + hv) - emi;
    if denom.abs() < 1e-12 {
        let same = a.len() == b.len() && counts(u, v).0.len() == a.len();
        return if same { 1.0 } else { 0.0 };
    }
    (mi - emi) / denom
}

/// Adjusted Rand index from the four pair categories, enumerating pairs.
pub fn ari(u: &[i64], v: &[i64]) -> f64 {
    let n = u.len();
    let (mut both, mut only_u, mut only_v, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (u[i] == u[j], v[i] == v[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_u += 1.0,
                (false, true) => only_v += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let pairs = both + only_u + only_v + neither;
    let same_u = both + only_u;
    let same_v = both + only_v;
    let expected = same_u * same_v / pairs;
    let max = 0.5 * (same_u + same_v);
    if (max - expected).abs() < 1e-12 {
        return if only_u == 0.0 && only_v == 0.0 { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

/// `(homogeneity, completeness, v)` of prediction `pred` against truth.
pub fn homogeneity_completeness_v(pred: &[i64], truth: &[i64]) -> (f64, f64, f64) {
    let n = pred.len() as f64;
    let (joint, a, b) = counts(pred, truth);
    let (hp, ht) = (entropy_of(&a, n), entropy_of(&b, n));
    let mut ht_given_p = 0.0;
    let mut hp_given_t = 0.0;
    for (&(x, y), &c) in &joint {
        let c = c as f64;
        ht_given_p -= c / n * (c / a[&x] as f64).ln();
        hp_given_t -= c / n * (c / b[&y] as f64).ln();
    }
    let h = if ht > 0.0 { 1.0 - ht_given_p / ht } else { 1.0 };
    let c = if hp > 0.0 { 1.0 - hp_given_t / hp } else { 1.0 };
    let v = if h + c > 0.0 { 2.0 * h * c / (h + c) } else { 0.0 };
    (h, c, v)
}

/// Monte-Carlo mean of MI(u, shuffled v) and its standard error.
pub fn emi_monte_carlo<R: Rng>(u: &[i64], v: &[i64], n_perm: usize, rng: &mut R) -> (f64, f64) {
    // Dense relabelling so each permutation costs one pass.
    let dense = |x: &[i64]| -> (Vec<usize>, usize) {
        let mut map = HashMap::new();
        let ids = x
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        (ids, map.len())
    };
    let (du, ku) = dense(u);
    let (mut dv, kv) = dense(v);
    let n = u.len();
    let nf = n as f64;
    let mut a = vec![0usize; ku];
    let mut b = vec![0usize; kv];
    for i in 0..n {
        a[du[i]] += 1;
        b[dv[i]] += 1;
    }
    let mut table = vec![0usize; ku * kv];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut first = None;
    for _ in 0..n_perm {
        dv.shuffle(rng);
        table.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            table[du[i] * kv + dv[i]] += 1;
        }
        let mut mi = 0.0;
        for i in 0..ku {
            for j in 0..kv {
                let c = table[i * kv + j];
                if c > 0 {
                    let c = c as f64;
                    mi += c / nf * (nf * c / (a[i] as f64 * b[j] as f64)).ln();
                }
            }
        }
        // Shifted by the first sample, so a constant MI sums exactly.
        let shift = *first.get_or_insert(mi);
        sum += mi - shift;
        sum_sq += (mi - shift) * (mi - shift);
    }
    let m = n_perm as f64;
    let centred = sum / m;
    let var = (sum_sq / m - centred * centred).max(0.0) * m / (m - 1.0);
    (first.unwrap_or(0.0) + centred, (var / m).sqrt())
}

/// Batch-all triplet loss by a triple loop: the mean hinge over every
/// (a, p, q) with label(a) = label(p) != label(q), a != p, that is not easy,
/// i.e. d(a, p) + margin >= d(a, q). Returns `(loss, triplet count)`; an
/// empty set gives 0.
pub fn triplet_loss(z: &[f64], dim: usize, labels: &[i64], margin: f64) -> (f64, usize) {
    let n = labels.len();
    let d = |i: usize, j: usize| -> f64 {
        (0..dim)
            .map(|k| (z[i * dim + k] - z[j * dim + k]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (mut sum, mut count) = (0.0, 0);
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            for q in 0..n {
                if labels[q] == labels[a] {
                    continue;
                }
                let h = d(a, p) - d(a, q) + margin;
                if h >= 0.0 {
                    sum += h;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        (0.0, 0)
    } else {
        (sum / count as f64, count)
    }
}
