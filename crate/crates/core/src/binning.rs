//! Per-feature histogram binning shared by the tree learners.
//!
//! When a feature has at most `max_bins` distinct values every distinct value
//! gets its own bin and the cut points are the midpoints between neighbours,
//! so split search over bins equals exhaustive split search over midpoints.
//! Above that, cuts fall at approximate quantiles.

use crate::flowdata::FlowTable;

pub const DEFAULT_MAX_BINS: usize = 256;

#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    /// Column-major bin codes.
    codes: Vec<u16>,
    cuts: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(table: &FlowTable, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let n = table.n_rows();
        let mut codes = Vec::with_capacity(n * table.n_features());
        let mut cuts = Vec::with_capacity(table.n_features());
        for j in 0..table.n_features() {
            let column: Vec<f64> = table.column(j).collect();
            let c = cut_points(&column, max_bins);
            codes.extend(column.iter().map(|&x| c.partition_point(|&t| t < x) as u16));
            cuts.push(c);
        }
        Self {
            n_rows: n,
            codes,
            cuts,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }

    pub fn column(&self, j: usize) -> &[u16] {
        &self.codes[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn n_bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }

    /// Raw threshold for "bin <= b goes left"; valid for `b < n_bins - 1`.
    pub fn threshold(&self, j: usize, b: usize) -> f64 {
        self.cuts[j][b]
    }
}

fn cut_points(column: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let mid = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| mid(w[0].0, w[1].0)).collect();
    }
    let n = column.len() as f64;
    let per_bin = n / max_bins as f64;
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut cumulative = 0usize;
    for w in distinct.windows(2) {
        cumulative += w[0].1;
        if cumulative as f64 >= per_bin * (cuts.len() + 1) as f64 {
            cuts.push(mid(w[0].0, w[1].0));
            if cuts.len() == max_bins - 1 {
                break;
            }
        }
    }
    cuts
}
