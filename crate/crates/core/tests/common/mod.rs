//! Brute-force reference computations shared by the integration tests and
//! the acceptance harness. Everything here is written independently of the
//! library's own implementations.
#![allow(dead_code)]

use std::path::PathBuf;

use kldetect::flowdata::{self, FlowTable, LoadOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("synthetic_flows.csv")
}

/// The checked-in fixture, loaded with default options.
pub fn fixture_table() -> FlowTable {
    flowdata::load_csv_with(&fixture_path(), &LoadOptions::default())
        .expect("fixture loads")
        .table
}

/// Random table with both classes present, values in [0, 1), some columns
/// possibly constant and some with ties.
pub fn random_table(r: &mut ChaCha8Rng, n: usize, m: usize) -> FlowTable {
    let n = n.max(4);
    let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    labels[0] = 0;
    labels[1] = 1;
    let mut data = vec![0.0; n * m];
    for j in 0..m {
        let style = r.random_range(0..4);
        let c = r.random::<f64>();
        for i in 0..n {
            data[i * m + j] = match style {
                0 => c,
                1 => (r.random_range(0..5) as f64) / 4.0,
                _ => r.random::<f64>() + 0.3 * labels[i] as f64 * r.random::<f64>(),
            }
            .min(1.0);
        }
    }
    let names = (0..m).map(|j| format!("f{j}")).collect();
    FlowTable::new(names, data, labels).unwrap()
}

/// Fisher score straight from the definition, with two-pass variances. A
/// column with no between-class spread scores 0; the within-class sum of
/// squares is floored at 1e-12 of the total.
pub fn brute_fisher(table: &FlowTable, j: usize) -> f64 {
    let col: Vec<f64> = table.column(j).collect();
    let y = table.labels();
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..2u8 {
        let xs: Vec<f64> = col.iter().zip(y).filter(|(_, &l)| l == c).map(|(x, _)| *x).collect();
        let nc = xs.len() as f64;
        let mc = xs.iter().sum::<f64>() / nc;
        let var = xs.iter().map(|x| (x - mc) * (x - mc)).sum::<f64>() / nc;
        num += nc * (mc - mean) * (mc - mean);
        den += nc * var;
    }
    if col.iter().all(|&v| v == col[0]) || num == 0.0 {
        return 0.0;
    }
    num / den.max(1e-12 * (num + den))
}

fn h(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

/// H(Y) - H(Y | bin(X)) with `n_bins` equal-width bins over [0, 1].
pub fn brute_info_gain(table: &FlowTable, j: usize, n_bins: usize) -> f64 {
    let y = table.labels();
    let n = y.len() as f64;
    let class = |c: u8| y.iter().filter(|&&l| l == c).count() as f64;
    let hy = h(&[class(0), class(1)]);
    let mut cond = 0.0;
    for b in 0..n_bins {
        let lo = b as f64 / n_bins as f64;
        let hi = (b + 1) as f64 / n_bins as f64;
        let in_bin = |x: f64| {
            let x = x.clamp(0.0, 1.0);
            (x >= lo && x < hi) || (b == n_bins - 1 && x >= hi)
        };
        let mut c = [0.0; 2];
        for (x, &l) in table.column(j).zip(y) {
            if in_bin(x) {
                c[l as usize] += 1.0;
            }
        }
        cond += (c[0] + c[1]) / n * h(&c);
    }
    (hy - cond).max(0.0)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, by explicit enumeration of all pairs.
pub fn pair_count_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (k, &lk) in labels.iter().enumerate() {
            if lk != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[k] {
                wins += 1.0;
            } else if scores[i] == scores[k] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Largest violation of the Lasso optimality conditions for
/// `(1/2n)||y - b - X beta||^2 + lambda ||beta||_1` at the given point, with
/// the intercept profiled out.
pub fn lasso_kkt_violation(table: &FlowTable, beta: &[f64], intercept: f64, lambda: f64) -> f64 {
    let n = table.n_rows() as f64;
    let resid: Vec<f64> = table
        .rows()
        .zip(table.labels())
        .map(|(row, &y)| y as f64 - intercept - row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let mut worst = (resid.iter().sum::<f64>() / n).abs();
    for (j, &b) in beta.iter().enumerate() {
        let g = table.column(j).zip(&resid).map(|(x, r)| x * r).sum::<f64>() / n;
        let v = if b > 0.0 {
            (g - lambda).abs()
        } else if b < 0.0 {
            (g + lambda).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Squared Euclidean distance.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Central difference of `f` along coordinate `j`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[j] += h;
    dn[j] -= h;
    (f(&up) - f(&dn)) / (2.0 * h)
}
