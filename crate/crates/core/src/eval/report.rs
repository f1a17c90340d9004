use super::{Cohort, EvalConfig, Metric, Model, ReportRow};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Median of one (cohort, bin, model, window, metric) group. `bin` is
/// `None` for the whole cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub cohort: Cohort,
    pub bin: Option<usize>,
    pub size_lo: f64,
    pub size_hi: f64,
    pub model: Model,
    pub window: Option<f64>,
    pub metric: Metric,
    pub median: f64,
    /// Median of absolute values.
    pub median_abs: f64,
    pub count: usize,
}

/// `bins + 1` geometric edges spanning `[lo, hi + 1)`.
pub fn bin_edges(bounds: [usize; 2], bins: usize) -> Vec<f64> {
    let lo = bounds[0] as f64;
    let hi = (bounds[1] + 1) as f64;
    (0..=bins)
        .map(|i| match i {
            0 => lo,
            i if i == bins => hi,
            i => lo * (hi / lo).powf(i as f64 / bins as f64),
        })
        .collect()
}

/// Index of the bin holding `size`, if any.
pub fn bin_of(edges: &[f64], size: usize) -> Option<usize> {
    let s = size as f64;
    if edges.len() < 2 || s < edges[0] || s >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= s) - 1)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn window_key(w: Option<f64>) -> i64 {
    w.map_or(-1, |w| (w * 1000.0).round() as i64)
}

/// Medians per size bin and over each whole cohort. Empty groups are
/// omitted; output is ordered by cohort, bin, model, window and metric.
pub fn bin_medians(rows: &[ReportRow], config: &EvalConfig) -> Vec<BinRow> {
    type Key = (Cohort, Option<usize>, Model, i64, Metric);
    let mut groups: BTreeMap<Key, (Option<f64>, Vec<f64>)> = BTreeMap::new();
    let edges: BTreeMap<Cohort, Vec<f64>> = Cohort::ALL
        .iter()
        .map(|&c| (c, bin_edges(config.bounds(c), config.bins)))
        .collect();
    for r in rows {
        if !r.value.is_finite() {
            continue;
        }
        let mut push = |bin| {
            groups
                .entry((r.cohort, bin, r.model, window_key(r.window), r.metric))
                .or_insert_with(|| (r.window, Vec::new()))
                .1
                .push(r.value)
        };
        push(None);
        if let Some(b) = bin_of(&edges[&r.cohort], r.size) {
            push(Some(b));
        }
    }
    groups
        .into_iter()
        .map(|((cohort, bin, model, _, metric), (window, mut values))| {
            values.sort_by(f64::total_cmp);
            let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let e = &edges[&cohort];
            let (size_lo, size_hi) = match bin {
                Some(b) => (e[b], e[b + 1]),
                None => (e[0], e[e.len() - 1]),
            };
            BinRow {
                cohort,
                bin,
                size_lo,
                size_hi,
                model,
                window,
                metric,
                median: median(&values),
                median_abs: median(&abs),
                count: values.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(size: usize, value: f64) -> ReportRow {
        ReportRow {
            tree: String::new(),
            cohort: Cohort::Small,
            size,
            model: Model::Hawkes,
            window: Some(8.0),
            metric: Metric::EpsS,
            value,
            flags: String::new(),
        }
    }

    #[test]
    fn edges_cover_bounds() {
        let e = bin_edges([50, 199], 10);
        assert_eq!(e.len(), 11);
        assert_eq!((e[0], e[10]), (50.0, 200.0));
        assert_eq!(bin_of(&e, 50), Some(0));
        assert_eq!(bin_of(&e, 199), Some(9));
        assert_eq!(bin_of(&e, 200), None);
        assert_eq!(bin_of(&e, 49), None);
    }

    #[test]
    fn medians_per_bin() {
        let cfg = EvalConfig::default();
        let out = bin_medians(&[row(60, 1.0), row(61, 2.0), row(62, 100.0)], &cfg);
        let bin = out.iter().find(|b| b.bin.is_some()).unwrap();
        assert_eq!((bin.median, bin.count), (2.0, 3));
        let single = bin_medians(&[row(60, -3.0)], &cfg);
        assert_eq!(single.len(), 2);
        assert_eq!((single[0].median, single[0].median_abs), (-3.0, 3.0));
    }
}
