//! Comparison statistics between classifiers: accuracy, win/tie/loss counts,
//! the two-sided Wilcoxon signed-rank test (exact for n <= 20), the Holm
//! step-down correction and average ranks, plus the aggregate report.

use std::collections::BTreeMap;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::container::atomic_write;
use crate::error::{Error, Result};

/// Exact enumeration is used up to this many nonzero differences; above it,
/// the normal approximation with continuity and tie corrections takes over.
pub const EXACT_WILCOXON_LIMIT: usize = 20;

/// One test-set result: which classifier, which dataset, what accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub classifier: String,
    pub dataset: String,
    pub accuracy: f64,
    pub seconds: Option<f64>,
}

/// Fraction of predictions matching the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::Invalid(format!(
            "accuracy needs equal, non-empty slices; got {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Paired comparison of accuracies; differences within `tie_eps` count as ties.
pub fn win_tie_loss(a: &[f64], b: &[f64], tie_eps: f64) -> Result<(usize, usize, usize)> {
    if a.len() != b.len() {
        return Err(Error::Invalid("win/tie/loss needs paired accuracies".into()));
    }
    let mut wins = 0;
    let mut ties = 0;
    let mut losses = 0;
    for (&x, &y) in a.iter().zip(b) {
        if (x - y).abs() <= tie_eps {
            ties += 1;
        } else if x > y {
            wins += 1;
        } else {
            losses += 1;
        }
    }
    Ok((wins, ties, losses))
}

/// Result of a two-sided Wilcoxon signed-rank test.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonOutcome {
    /// `min(W+, W-)` in rank units.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// All differences were zero: no evidence either way, reported as p = 1.
    pub degenerate: bool,
    /// Whether the exact enumeration (rather than the approximation) was used.
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; ties in |difference| receive average ranks. For n <=
/// [`EXACT_WILCOXON_LIMIT`] the p-value counts, over all 2^n sign
/// assignments, those whose `min(W+, W-)` is at most the observed one.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome> {
    if a.len() != b.len() {
        return Err(Error::Invalid("wilcoxon needs paired samples".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonOutcome { statistic: 0.0, p: 1.0, degenerate: true, exact: true });
    }

    // Scaled ranks: average ranks are multiples of 1/2, so doubling keeps
    // everything integral. A group tied over 1-based positions p..=q gets
    // scaled rank p + q.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().partial_cmp(&diffs[j].abs()).expect("finite differences"));
    let mut scaled = vec![0u64; n];
    let mut tie_group_sizes: Vec<u64> = Vec::new();
    let mut pos = 0;
    while pos < n {
        let mut end = pos;
        while end + 1 < n && diffs[order[end + 1]].abs() == diffs[order[pos]].abs() {
            end += 1;
        }
        let scaled_rank = (pos + 1 + end + 1) as u64;
        for &idx in &order[pos..=end] {
            scaled[idx] = scaled_rank;
        }
        tie_group_sizes.push((end - pos + 1) as u64);
        pos = end + 1;
    }

    let w_plus_scaled: u64 = diffs.iter().zip(&scaled).filter(|(d, _)| **d > 0.0).map(|(_, &r)| r).sum();
    let total_scaled: u64 = scaled.iter().sum();
    let w_minus_scaled = total_scaled - w_plus_scaled;
    let w_scaled = w_plus_scaled.min(w_minus_scaled);
    let statistic = w_scaled as f64 / 2.0;

    if n <= EXACT_WILCOXON_LIMIT {
        // Subset-sum distribution of W+ over all sign assignments.
        let mut counts = vec![0u64; total_scaled as usize + 1];
        counts[0] = 1;
        for &r in &scaled {
            let r = r as usize;
            for s in (r..counts.len()).rev() {
                counts[s] += counts[s - r];
            }
        }
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|&(s, _)| (s as u64).min(total_scaled - s as u64) <= w_scaled)
            .map(|(_, &c)| c)
            .sum();
        let p = extreme as f64 / (1u64 << n) as f64;
        return Ok(WilcoxonOutcome { statistic, p, degenerate: false, exact: true });
    }

    // Normal approximation with continuity correction and tie correction.
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_group_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return Ok(WilcoxonOutcome { statistic, p: 1.0, degenerate: true, exact: false });
    }
    let z = (statistic - mean + 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.cdf(z)).clamp(0.0, 1.0);
    Ok(WilcoxonOutcome { statistic, p, degenerate: false, exact: false })
}

/// Holm step-down adjustment: sort ascending, `adj_i = min(1, max_{j<=i}
/// (m - j) * p_j)` (0-based), then restore the original order.
pub fn holm_correction(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Invalid(format!("p-value {p} outside [0, 1]")));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).expect("finite p-values"));
    let mut adjusted = vec![0.0f64; m];
    let mut running_max = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        running_max = running_max.max((m - rank) as f64 * p_values[idx]);
        adjusted[idx] = running_max.min(1.0);
    }
    Ok(adjusted)
}

/// Mean rank per classifier over datasets; rank 1 is the best accuracy in a
/// dataset, ties receive average ranks. `table[classifier][dataset]`.
pub fn average_rank(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let c = table.len();
    if c == 0 {
        return Err(Error::Invalid("average rank needs at least one classifier".into()));
    }
    let d = table[0].len();
    if d == 0 || table.iter().any(|row| row.len() != d) {
        return Err(Error::Invalid("average rank needs a complete classifier x dataset table".into()));
    }
    let mut sums = vec![0.0f64; c];
    for j in 0..d {
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&x, &y| table[y][j].partial_cmp(&table[x][j]).expect("finite accuracies"));
        let mut pos = 0;
        while pos < c {
            let mut end = pos;
            while end + 1 < c && table[order[end + 1]][j] == table[order[pos]][j] {
                end += 1;
            }
            let avg = (pos + 1 + end + 1) as f64 / 2.0;
            for &idx in &order[pos..=end] {
                sums[idx] += avg;
            }
            pos = end + 1;
        }
    }
    Ok(sums.into_iter().map(|s| s / d as f64).collect())
}

/// Pairwise entry of the comparison report.
#[derive(Debug, Clone)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub p_raw: f64,
    pub p_holm: f64,
    pub degenerate: bool,
}

/// Aggregate comparison over a complete classifier x dataset table.
#[derive(Debug, Clone)]
pub struct Report {
    /// Classifier names, sorted.
    pub classifiers: Vec<String>,
    /// Dataset names, sorted.
    pub datasets: Vec<String>,
    pub mean_accuracy: Vec<f64>,
    pub avg_rank: Vec<f64>,
    pub pairs: Vec<PairComparison>,
}

/// Build the comparison report. Every classifier must have exactly one
/// record per dataset; record order is irrelevant.
pub fn report(records: &[RunRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to report on".into()));
    }
    for r in records {
        if !(0.0..=1.0).contains(&r.accuracy) {
            return Err(Error::Invalid(format!(
                "accuracy {} for {} on {} outside [0, 1]",
                r.accuracy, r.classifier, r.dataset
            )));
        }
    }
    let mut classifiers: Vec<String> = records.iter().map(|r| r.classifier.clone()).collect();
    classifiers.sort();
    classifiers.dedup();
    let mut datasets: Vec<String> = records.iter().map(|r| r.dataset.clone()).collect();
    datasets.sort();
    datasets.dedup();

    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in records {
        if cells.insert((r.classifier.as_str(), r.dataset.as_str()), r.accuracy).is_some() {
            return Err(Error::Invalid(format!("duplicate record for {} on {}", r.classifier, r.dataset)));
        }
    }
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(classifiers.len());
    for c in &classifiers {
        let mut row = Vec::with_capacity(datasets.len());
        for d in &datasets {
            let acc = cells.get(&(c.as_str(), d.as_str())).ok_or_else(|| {
                Error::Invalid(format!("incomplete table: classifier '{c}' has no record for dataset '{d}'"))
            })?;
            row.push(*acc);
        }
        table.push(row);
    }

    let mean_accuracy: Vec<f64> = table.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect();
    let avg_rank = average_rank(&table)?;

    let mut pairs = Vec::new();
    let mut raw_ps = Vec::new();
    for i in 0..classifiers.len() {
        for j in (i + 1)..classifiers.len() {
            let (wins, ties, losses) = win_tie_loss(&table[i], &table[j], 0.0)?;
            let w = wilcoxon_signed_rank(&table[i], &table[j])?;
            raw_ps.push(w.p);
            pairs.push(PairComparison {
                a: classifiers[i].clone(),
                b: classifiers[j].clone(),
                wins,
                ties,
                losses,
                p_raw: w.p,
                p_holm: f64::NAN,
                degenerate: w.degenerate,
            });
        }
    }
    let adjusted = holm_correction(&raw_ps)?;
    for (pair, adj) in pairs.iter_mut().zip(adjusted) {
        pair.p_holm = adj;
    }
    Ok(Report { classifiers, datasets, mean_accuracy, avg_rank, pairs })
}

/// Read `classifier,dataset,accuracy[,seconds]` records.
pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { path: display.clone(), line: None, column: None, msg: e.to_string() })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { path: display.clone(), line: None, column: None, msg: e.to_string() })?
        .clone();
    for (want, got) in ["classifier", "dataset", "accuracy"].iter().zip(headers.iter()) {
        if !got.eq_ignore_ascii_case(want) {
            return Err(Error::Parse {
                path: display.clone(),
                line: Some(1),
                column: None,
                msg: format!("expected header 'classifier,dataset,accuracy[,seconds]', found '{got}' where '{want}' should be"),
            });
        }
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse { path: display.clone(), line: Some(i + 2), column: None, msg: e.to_string() })?;
        if row.len() < 3 {
            return Err(Error::Parse {
                path: display.clone(),
                line: Some(i + 2),
                column: None,
                msg: format!("expected at least 3 fields, found {}", row.len()),
            });
        }
        let accuracy: f64 = row[2].parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: Some(i + 2),
            column: Some(3),
            msg: format!("accuracy '{}' is not numeric", &row[2]),
        })?;
        let seconds = row.get(3).filter(|s| !s.is_empty()).map(|s| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: display.clone(),
                line: Some(i + 2),
                column: Some(4),
                msg: format!("seconds '{s}' is not numeric"),
            })
        });
        records.push(RunRecord {
            classifier: row[0].to_string(),
            dataset: row[1].to_string(),
            accuracy,
            seconds: seconds.transpose()?,
        });
    }
    Ok(records)
}

/// Long-format CSV: `kind,a,b,value` rows covering mean accuracies, average
/// ranks, pairwise win/tie/loss counts and raw plus Holm-adjusted p-values.
pub fn report_to_csv(report: &Report) -> String {
    let mut out = String::from("kind,a,b,value\n");
    for (c, v) in report.classifiers.iter().zip(&report.mean_accuracy) {
        out.push_str(&format!("mean_accuracy,{c},,{v}\n"));
    }
    for (c, v) in report.classifiers.iter().zip(&report.avg_rank) {
        out.push_str(&format!("avg_rank,{c},,{v}\n"));
    }
    for p in &report.pairs {
        out.push_str(&format!("wins,{},{},{}\n", p.a, p.b, p.wins));
        out.push_str(&format!("ties,{},{},{}\n", p.a, p.b, p.ties));
        out.push_str(&format!("losses,{},{},{}\n", p.a, p.b, p.losses));
        out.push_str(&format!("p_raw,{},{},{}\n", p.a, p.b, p.p_raw));
        out.push_str(&format!("p_holm,{},{},{}\n", p.a, p.b, p.p_holm));
        out.push_str(&format!("p_degenerate,{},{},{}\n", p.a, p.b, u8::from(p.degenerate)));
    }
    out
}

pub fn write_report_csv(report: &Report, path: &Path) -> Result<()> {
    atomic_write(path, report_to_csv(report).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
    }

    #[test]
    fn win_tie_loss_examples() {
        assert_eq!(win_tie_loss(&[0.9, 0.8], &[0.8, 0.8], 0.0).unwrap(), (1, 1, 0));
        let a = [0.5, 0.6, 0.7];
        assert_eq!(win_tie_loss(&a, &a, 0.0).unwrap(), (0, 3, 0));
        let b = [0.4, 0.9, 0.7];
        let (w, t, l) = win_tie_loss(&a, &b, 0.0).unwrap();
        let (w2, t2, l2) = win_tie_loss(&b, &a, 0.0).unwrap();
        assert_eq!((w, t, l), (l2, t2, w2));
    }

    #[test]
    fn wilcoxon_all_positive_three() {
        let out = wilcoxon_signed_rank(&[2.0, 3.0, 4.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!(out.exact);
        assert!(!out.degenerate);
        assert!((out.p - 0.25).abs() < 1e-12, "{}", out.p);
    }

    #[test]
    fn wilcoxon_identical_samples_degenerate() {
        let out = wilcoxon_signed_rank(&[0.5, 0.6], &[0.5, 0.6]).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.p, 1.0);
    }

    #[test]
    fn wilcoxon_tied_magnitudes() {
        // differences [5, -5]: both ranked 1.5, W+ = W- = 1.5, p = 1.
        let out = wilcoxon_signed_rank(&[5.0, 0.0], &[0.0, 5.0]).unwrap();
        assert_eq!(out.statistic, 1.5);
        assert_eq!(out.p, 1.0);
    }

    #[test]
    fn wilcoxon_large_n_uses_approximation() {
        let a: Vec<f64> = (0..25).map(|i| i as f64 + 1.0).collect();
        let b = vec![0.0f64; 25];
        let out = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!out.exact);
        assert!(out.p < 1e-4, "{}", out.p);
    }

    #[test]
    fn holm_examples() {
        let adj = holm_correction(&[0.01, 0.04]).unwrap();
        assert!((adj[0] - 0.02).abs() < 1e-12);
        assert!((adj[1] - 0.04).abs() < 1e-12);
        assert_eq!(holm_correction(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(holm_correction(&[0.6, 0.9]).unwrap(), vec![1.0, 1.0]);
        assert!(holm_correction(&[1.5]).is_err());
    }

    #[test]
    fn holm_is_monotone_and_dominates_raw() {
        let ps = [0.04, 0.001, 0.3, 0.02, 0.8];
        let adj = holm_correction(&ps).unwrap();
        for (raw, a) in ps.iter().zip(&adj) {
            assert!(a >= raw);
        }
        let mut order: Vec<usize> = (0..ps.len()).collect();
        order.sort_by(|&i, &j| ps[i].partial_cmp(&ps[j]).unwrap());
        for w in order.windows(2) {
            assert!(adj[w[0]] <= adj[w[1]]);
        }
    }

    #[test]
    fn average_rank_examples() {
        let table = vec![vec![0.9, 0.8, 0.7], vec![0.5, 0.6, 0.4]];
        assert_eq!(average_rank(&table).unwrap(), vec![1.0, 2.0]);
        let tied = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(average_rank(&tied).unwrap(), vec![1.5, 1.5]);
        let three = vec![vec![0.9], vec![0.9], vec![0.5]];
        assert_eq!(average_rank(&three).unwrap(), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn average_ranks_sum_to_triangle_number() {
        // Mean ranks sum to c(c+1)/2 regardless of ties.
        let table = vec![vec![0.1, 0.5, 0.5], vec![0.1, 0.4, 0.6], vec![0.3, 0.4, 0.6], vec![0.3, 0.2, 0.9]];
        let ranks = average_rank(&table).unwrap();
        let total: f64 = ranks.iter().sum();
        assert!((total - 10.0).abs() < 1e-9);
    }

    fn fixture_records() -> Vec<RunRecord> {
        let mut records = Vec::new();
        let table = [
            ("alpha", [0.9, 0.8, 0.7, 0.95]),
            ("beta", [0.85, 0.8, 0.6, 0.9]),
            ("gamma", [0.5, 0.55, 0.6, 0.5]),
        ];
        for (name, accs) in table {
            for (d, acc) in accs.iter().enumerate() {
                records.push(RunRecord {
                    classifier: name.into(),
                    dataset: format!("ds{d}"),
                    accuracy: *acc,
                    seconds: None,
                });
            }
        }
        records
    }

    #[test]
    fn report_reproduces_hand_computed_fixture() {
        let rep = report(&fixture_records()).unwrap();
        assert_eq!(rep.classifiers, vec!["alpha", "beta", "gamma"]);
        // Mean accuracies by hand.
        assert!((rep.mean_accuracy[0] - 0.8375).abs() < 1e-12);
        assert!((rep.mean_accuracy[1] - 0.7875).abs() < 1e-12);
        assert!((rep.mean_accuracy[2] - 0.5375).abs() < 1e-12);
        // Ranks by hand: alpha [1,1.5,1,1], beta [2,1.5,2.5,2], gamma [3,3,2.5,3].
        assert!((rep.avg_rank[0] - 1.125).abs() < 1e-12);
        assert!((rep.avg_rank[1] - 2.0).abs() < 1e-12);
        assert!((rep.avg_rank[2] - 2.875).abs() < 1e-12);
        // alpha vs beta: wins on ds0, ds2, ds3; tie on ds1.
        let ab = &rep.pairs[0];
        assert_eq!((ab.wins, ab.ties, ab.losses), (3, 1, 0));
        // Exact p for differences {0.05, 0.1, 0.05} dropped-zero count 3:
        // ranks |d| = [1.5, 3, 1.5], all positive, W = 0, p = 2/8.
        assert!((ab.p_raw - 0.25).abs() < 1e-12);
    }

    #[test]
    fn report_identical_classifiers_give_p_one() {
        let mut records = fixture_records();
        // Clone alpha as "alpha2".
        let clones: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.classifier == "alpha")
            .map(|r| RunRecord { classifier: "alpha2".into(), ..r.clone() })
            .collect();
        records.extend(clones);
        let rep = report(&records).unwrap();
        let pair = rep.pairs.iter().find(|p| p.a == "alpha" && p.b == "alpha2").unwrap();
        assert_eq!(pair.p_raw, 1.0);
        assert!(pair.degenerate);
        assert_eq!((pair.wins, pair.losses), (0, 0));
    }

    #[test]
    fn report_is_record_order_invariant() {
        let mut records = fixture_records();
        let rep1 = report_to_csv(&report(&records).unwrap());
        records.reverse();
        let rep2 = report_to_csv(&report(&records).unwrap());
        assert_eq!(rep1, rep2);
    }

    #[test]
    fn report_rejects_incomplete_table() {
        let mut records = fixture_records();
        records.pop();
        assert!(report(&records).is_err());
    }
}
