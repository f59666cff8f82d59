//! Dataset ingestion: dense regression tables and MovieLens-style rating lists.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fw_core::{DenseMatrix, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

/// Z-scored regression data.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBundle {
    pub a: DenseMatrix,
    pub y: Vec<f64>,
    pub features: Vec<String>,
    pub target: String,
    /// Per-column means and population standard deviations before scaling, features then target.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl DenseBundle {
    pub fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }
}

/// Observed entries of a ratings matrix with dense 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsBundle {
    pub observed: Vec<Observation>,
    pub rows: usize,
    pub cols: usize,
    /// Original 1-based ids, indexed by the dense row / column.
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

/// Keep at most this many of the most-rated users and items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsample {
    pub max_users: usize,
    pub max_items: usize,
    pub seed: u64,
}

/// Centers and scales one column in place; returns `(mean, std)`.
pub fn zscore(values: &mut [f64], name: &str) -> Result<(f64, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * (1.0 + mean.abs())) {
        return Err(HarnessError::ZscoreDegenerate { column: name.to_string() });
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / std;
    }
    Ok((mean, std))
}

pub fn load_dense_csv(path: &Path, target: &str) -> Result<DenseBundle> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, "header", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| HarnessError::Data(format!("{}: no column named '{target}'", path.display())))?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (r, record) in reader.records().enumerate() {
        // Header is line 1.
        let line = r + 2;
        let record = record.map_err(|e| parse_error(path, &format!("line {line}"), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_error(
                path,
                &format!("line {line}"),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(path, &format!("line {line}, column '{}'", headers[c]), format!("'{cell}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(path, &format!("line {line}, column '{}'", headers[c]), "non-finite value".into()));
            }
            columns[c].push(v);
        }
    }
    let m = columns[0].len();
    if m == 0 {
        return Err(HarnessError::Data(format!("{}: no data rows", path.display())));
    }
    if headers.len() < 2 {
        return Err(HarnessError::Data(format!("{}: need at least one feature column", path.display())));
    }

    let mut means = Vec::with_capacity(headers.len());
    let mut stds = Vec::with_capacity(headers.len());
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&c| c != target_idx).collect();
    for &c in feature_idx.iter().chain(std::iter::once(&target_idx)) {
        let (mean, std) = zscore(&mut columns[c], &headers[c])?;
        means.push(mean);
        stds.push(std);
    }
    let n = feature_idx.len();
    let a = DenseMatrix::from_fn(m, n, |i, j| columns[feature_idx[j]][i]);
    Ok(DenseBundle {
        a,
        y: columns[target_idx].clone(),
        features: feature_idx.iter().map(|&c| headers[c].clone()).collect(),
        target: target.to_string(),
        means,
        stds,
    })
}

fn parse_error(path: &Path, location: &str, message: String) -> HarnessError {
    HarnessError::Parse { path: path.to_path_buf(), location: location.to_string(), message }
}

struct Rating {
    user: u64,
    item: u64,
    value: f64,
}

/// Reads `user item rating timestamp` rows (tab or whitespace separated, 1-based ids).
pub fn load_movielens(path: &Path, subsample: Option<Subsample>) -> Result<RatingsBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut ratings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_error(path, &format!("line {line}"), format!("expected 4 fields, found {}", fields.len())));
        }
        let id = |s: &str, what: &str| -> Result<u64> {
            match s.parse::<u64>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_error(path, &format!("line {line}"), format!("invalid {what} id '{s}'"))),
            }
        };
        let user = id(fields[0], "user")?;
        let item = id(fields[1], "item")?;
        let value: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_error(path, &format!("line {line}"), format!("invalid rating '{}'", fields[2])))?;
        fields[3]
            .parse::<i64>()
            .map_err(|_| parse_error(path, &format!("line {line}"), format!("invalid timestamp '{}'", fields[3])))?;
        ratings.push(Rating { user, item, value });
    }
    if ratings.is_empty() {
        return Err(parse_error(path, "end of file", "no observations".into()));
    }

    if let Some(sub) = subsample {
        if sub.max_users == 0 || sub.max_items == 0 {
            return Err(HarnessError::Config("subsample caps must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sub.seed);
        let items = densest(ratings.iter().map(|r| r.item), sub.max_items, &mut rng);
        ratings.retain(|r| items.contains(&r.item));
        let users = densest(ratings.iter().map(|r| r.user), sub.max_users, &mut rng);
        ratings.retain(|r| users.contains(&r.user));
    }

    let user_ids: Vec<u64> = ratings.iter().map(|r| r.user).collect::<BTreeSet<_>>().into_iter().collect();
    let item_ids: Vec<u64> = ratings.iter().map(|r| r.item).collect::<BTreeSet<_>>().into_iter().collect();
    let user_index: BTreeMap<u64, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let item_index: BTreeMap<u64, usize> = item_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let observed = ratings
        .iter()
        .map(|r| Observation { row: user_index[&r.user], col: item_index[&r.item], value: r.value })
        .collect();
    Ok(RatingsBundle { observed, rows: user_ids.len(), cols: item_ids.len(), user_ids, item_ids })
}

/// The `cap` ids with the most occurrences; ties are broken by seeded random keys.
fn densest(ids: impl Iterator<Item = u64>, cap: usize, rng: &mut ChaCha8Rng) -> BTreeSet<u64> {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for id in ids {
        *counts.entry(id).or_default() += 1;
    }
    let mut ranked: Vec<(usize, u64, u64)> = counts.into_iter().map(|(id, c)| (c, rng.random::<u64>(), id)).collect();
    ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(cap).map(|(_, _, id)| id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn toy_csv_is_zscored_by_hand() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "toy.csv", "a,b,target\n1,10,3\n2,20,5\n3,60,10\n");
        let b = load_dense_csv(&p, "target").unwrap();
        assert_eq!(b.shape(), (3, 2));
        assert_eq!(b.features, vec!["a", "b"]);
        // Column a: mean 2, population std sqrt(2/3).
        let s = (2.0f64 / 3.0).sqrt();
        for (i, raw) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((b.a.get(i, 0) - (raw - 2.0) / s).abs() < 1e-12);
        }
        // Column b: mean 30, deviations -20, -10, 30, variance 1400/3.
        let sb = (1400.0f64 / 3.0).sqrt();
        assert!((b.a.get(2, 1) - 30.0 / sb).abs() < 1e-12);
        // Target: mean 6, deviations -3, -1, 4, variance 26/3.
        let st = (26.0f64 / 3.0).sqrt();
        assert!((b.y[0] + 3.0 / st).abs() < 1e-12);
        assert_eq!(b.means, vec![2.0, 30.0, 6.0]);
    }

    #[test]
    fn zscored_columns_are_standardized_and_idempotent() {
        let mut col: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 4.0 + 7.0).collect();
        zscore(&mut col, "x").unwrap();
        let mean = col.iter().sum::<f64>() / 50.0;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!(mean.abs() <= 1e-10 && (std - 1.0).abs() <= 1e-10);
        let before = col.clone();
        zscore(&mut col, "x").unwrap();
        assert!(col.iter().zip(&before).all(|(a, b)| (a - b).abs() <= 1e-10));
    }

    #[test]
    fn csv_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "const.csv", "a,b,target\n1,5,3\n2,5,5\n3,5,10\n");
        match load_dense_csv(&p, "target") {
            Err(HarnessError::ZscoreDegenerate { column }) => assert_eq!(column, "b"),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "bad.csv", "a,target\n1,3\nx,5\n");
        match load_dense_csv(&p, "target") {
            Err(HarnessError::Parse { location, .. }) => assert_eq!(location, "line 3, column 'a'"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_dense_csv(&dir.path().join("missing.csv"), "t"), Err(HarnessError::Io { .. })));
        let p = write(&dir, "ok.csv", "a,target\n1,3\n2,5\n");
        assert!(matches!(load_dense_csv(&p, "nope"), Err(HarnessError::Data(_))));
    }

    #[test]
    fn movielens_remaps_ids_densely() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.data", "5\t10\t4\t881250949\n2\t10\t3\t891717742\n5\t7\t1\t878887116\n");
        let b = load_movielens(&p, None).unwrap();
        assert_eq!((b.rows, b.cols), (2, 2));
        assert_eq!(b.user_ids, vec![2, 5]);
        assert_eq!(b.item_ids, vec![7, 10]);
        assert_eq!(b.observed[0], Observation { row: 1, col: 1, value: 4.0 });
    }

    #[test]
    fn movielens_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "empty.data", "");
        assert!(matches!(load_movielens(&p, None), Err(HarnessError::Parse { .. })));
        let p = write(&dir, "bad.data", "1\t2\t3\t4\n1\t2\tx\t4\n");
        match load_movielens(&p, None) {
            Err(HarnessError::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "short.data", "1\t2\t3\n");
        assert!(matches!(load_movielens(&p, None), Err(HarnessError::Parse { .. })));
        let p = write(&dir, "zero.data", "0\t2\t3\t4\n");
        assert!(matches!(load_movielens(&p, None), Err(HarnessError::Parse { .. })));
    }

    #[test]
    fn subsampling_keeps_the_densest_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for u in 1..=120u64 {
            for i in 1..=200u64 {
                // Low ids are rated more often.
                if rng.random_range(0.0..1.0) < 0.9 / (1.0 + (u + i) as f64 / 40.0) {
                    body.push_str(&format!("{u}\t{i}\t{}\t0\n", rng.random_range(1..=5)));
                }
            }
        }
        let p = write(&dir, "u.data", &body);
        let sub = Subsample { max_users: 50, max_items: 80, seed: 7 };
        let a = load_movielens(&p, Some(sub)).unwrap();
        let b = load_movielens(&p, Some(sub)).unwrap();
        assert_eq!(a, b);
        assert!(a.rows <= 50 && a.cols <= 80);
        assert!(a.observed.iter().all(|o| o.row < a.rows && o.col < a.cols));
        let mean_item = a.item_ids.iter().sum::<u64>() as f64 / a.cols as f64;
        assert!(mean_item < 100.0);
    }
}
