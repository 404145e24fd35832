//! Tabular data, shards and delimited-file ingestion.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Dense predictor matrix (row-major) with its response vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    p: usize,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major predictors. Rejects ragged shapes and
    /// non-finite values.
    pub fn new(x: Vec<f64>, y: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("dataset needs at least one predictor"));
        }
        if x.len() != y.len() * p {
            return Err(Error::invalid(format!(
                "predictor matrix has {} values, expected {} rows x {} columns",
                x.len(),
                y.len(),
                p
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite predictor at row {}, column {}",
                i / p,
                i % p
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite response at row {i}")));
        }
        Ok(Self {
            x,
            y,
            p,
            feature_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        Self::new(rows.concat(), y, p)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::invalid(format!(
                "{} feature names for {} predictors",
                names.len(),
                self.p
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn predictors(&self) -> &[f64] {
        &self.x
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Names used when exporting: explicit names or `x1..xp`.
    pub fn column_names(&self) -> Vec<String> {
        match &self.feature_names {
            Some(n) => n.clone(),
            None => (1..=self.p).map(|j| format!("x{j}")).collect(),
        }
    }

    /// Owned copy of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            x,
            y,
            p: self.p,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Writes the dataset as comma-delimited text with a header; the response
    /// is the last column, named `response_name`.
    pub fn write_csv(&self, path: &Path, response_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.column_names();
        header.push(response_name.to_string());
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(self.p + 1);
        for i in 0..self.n() {
            rec.clear();
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            rec.push(self.y[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One block of a random partition: sorted row indices into the parent.
#[derive(Clone, Debug)]
pub struct Shard<'a> {
    parent: &'a Dataset,
    indices: Vec<usize>,
    shard_id: usize,
}

impl<'a> Shard<'a> {
    /// The whole dataset as a single shard.
    pub fn full(parent: &'a Dataset) -> Self {
        Self {
            parent,
            indices: (0..parent.n()).collect(),
            shard_id: 0,
        }
    }

    pub fn parent(&self) -> &'a Dataset {
        self.parent
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn shard_id(&self) -> usize {
        self.shard_id
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Owned copy of this shard's rows, as handed to a worker.
    pub fn materialize(&self) -> Dataset {
        self.parent.subset(&self.indices)
    }
}

/// Splits the rows of `dataset` into `k` disjoint shards of near-equal size:
/// a uniform random permutation dealt round-robin.
pub fn partition<'a>(
    dataset: &'a Dataset,
    k: usize,
    rng: &mut RngStream,
) -> Result<Vec<Shard<'a>>> {
    let n = dataset.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "cannot split {n} rows into {k} shards"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut blocks = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in perm.into_iter().enumerate() {
        blocks[pos % k].push(idx);
    }
    Ok(blocks
        .into_iter()
        .enumerate()
        .map(|(shard_id, mut indices)| {
            indices.sort_unstable();
            Shard {
                parent: dataset,
                indices,
                shard_id,
            }
        })
        .collect())
}

/// How non-numeric predictor columns are handled on ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CategoricalPolicy {
    /// Every predictor cell must parse as a number.
    #[default]
    Reject,
    /// Any column containing a non-numeric cell is one-hot encoded with one
    /// indicator per level (levels sorted).
    OneHotDetected,
    /// The named columns are one-hot encoded; all others must be numeric.
    OneHotColumns(Vec<String>),
}

/// Reads a comma-delimited file with a header row. The response column is
/// extracted by name; remaining columns become predictors in file order.
pub fn load_csv(path: &Path, response_column: &str, policy: &CategoricalPolicy) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let resp_idx = header
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::Ingestion {
            row: 0,
            column: response_column.to_string(),
            message: "response column not found in header".into(),
        })?;
    if let CategoricalPolicy::OneHotColumns(cols) = policy {
        if let Some(c) = cols.iter().find(|c| !header.contains(c)) {
            return Err(Error::Ingestion {
                row: 0,
                column: c.clone(),
                message: "categorical column not found in header".into(),
            });
        }
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        // header is row 1 in a 1-based file view
        let row = r + 2;
        if rec.len() != header.len() {
            return Err(Error::Ingestion {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        if let Some(c) = rec.iter().position(str::is_empty) {
            return Err(Error::Ingestion {
                row,
                column: header[c].clone(),
                message: "missing value".into(),
            });
        }
        cells.push(rec.iter().map(str::to_string).collect());
    }
    if cells.is_empty() {
        return Err(Error::Ingestion {
            row: 1,
            column: String::new(),
            message: "file has no data rows".into(),
        });
    }

    let parse = |row: usize, col: usize, s: &str| -> Result<f64> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Ingestion {
                row: row + 2,
                column: header[col].clone(),
                message: format!("cannot parse `{s}` as a finite number"),
            }),
        }
    };

    let is_categorical = |col: usize| -> bool {
        match policy {
            CategoricalPolicy::Reject => false,
            CategoricalPolicy::OneHotColumns(cols) => cols.contains(&header[col]),
            CategoricalPolicy::OneHotDetected => {
                cells.iter().any(|r| r[col].parse::<f64>().is_err())
            }
        }
    };

    enum Column {
        Numeric(usize),
        OneHot(usize, Vec<String>),
    }
    let mut columns = Vec::new();
    let mut names = Vec::new();
    for col in 0..header.len() {
        if col == resp_idx {
            continue;
        }
        if is_categorical(col) {
            let levels: Vec<String> = cells
                .iter()
                .map(|r| r[col].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            names.extend(levels.iter().map(|l| format!("{}={}", header[col], l)));
            columns.push(Column::OneHot(col, levels));
        } else {
            names.push(header[col].clone());
            columns.push(Column::Numeric(col));
        }
    }
    if names.is_empty() {
        return Err(Error::Ingestion {
            row: 1,
            column: String::new(),
            message: "no predictor columns besides the response".into(),
        });
    }

    let p = names.len();
    let mut x = Vec::with_capacity(cells.len() * p);
    let mut y = Vec::with_capacity(cells.len());
    for (r, rec) in cells.iter().enumerate() {
        y.push(parse(r, resp_idx, &rec[resp_idx])?);
        for c in &columns {
            match c {
                Column::Numeric(col) => x.push(parse(r, *col, &rec[*col])?),
                Column::OneHot(col, levels) => {
                    x.extend(
                        levels
                            .iter()
                            .map(|l| if *l == rec[*col] { 1.0 } else { 0.0 }),
                    )
                }
            }
        }
    }
    Dataset::new(x, y, p)?.with_feature_names(names)
}

/// Writes a flat `key = value` file.
pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut f = File::create(path)?;
    for (k, v) in pairs {
        writeln!(f, "{k} = {v}")?;
    }
    Ok(())
}

/// Parses a flat `key = value` file; blank lines and `#` comments are skipped.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("line {}: expected `key = value`", lineno + 1),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy(n: usize) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = x.clone();
        Dataset::new(x, y, 1).unwrap()
    }

    #[test]
    fn partition_ten_into_two() {
        let d = toy(10);
        let shards = partition(&d, 2, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(shards.len(), 2);
        assert_eq!(shards[0].len(), 5);
        assert_eq!(shards[1].len(), 5);
        let mut all: Vec<usize> = shards.iter().flat_map(|s| s.indices().to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn partition_sizes_balanced_at_scale() {
        let d = toy(20_000);
        let shards = partition(&d, 30, &mut RngStream::new(3, 0)).unwrap();
        for s in &shards {
            assert!(s.len() == 666 || s.len() == 667, "{}", s.len());
        }
        // 20000 = 30 * 666 + 20
        assert_eq!(shards.iter().filter(|s| s.len() == 667).count(), 20);
    }

    #[test]
    fn single_shard_is_identity() {
        let d = toy(13);
        let shards = partition(&d, 1, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(shards[0].indices(), Shard::full(&d).indices());
    }

    #[test]
    fn partition_rejects_bad_k() {
        let d = toy(4);
        assert!(matches!(
            partition(&d, 0, &mut RngStream::new(0, 0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            partition(&d, 5, &mut RngStream::new(0, 0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn partition_complete_for_all_small_k() {
        for n in 1..=12 {
            let d = toy(n);
            for k in 1..=n {
                let shards = partition(&d, k, &mut RngStream::new(n as u64, k as u64)).unwrap();
                let mut seen = vec![0u32; n];
                for s in &shards {
                    for &i in s.indices() {
                        seen[i] += 1;
                    }
                }
                assert!(seen.iter().all(|&c| c == 1));
                let sizes: Vec<usize> = shards.iter().map(Shard::len).collect();
                assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Dataset::new(vec![f64::NAN], vec![1.0], 1).is_err());
        assert!(Dataset::new(vec![1.0], vec![f64::INFINITY], 1).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], vec![1.0], 1).is_err());
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_numeric() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(f.path(), "y", &CategoricalPolicy::Reject).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.row(1), &[4.0, 5.0]);
        assert_eq!(d.response(), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn csv_one_hot() {
        let f = write_tmp("a,color,y\n1,red,3\n4,blue,6\n7,green,9\n");
        let d = load_csv(f.path(), "y", &CategoricalPolicy::OneHotDetected).unwrap();
        assert_eq!(d.p(), 4);
        assert_eq!(
            d.feature_names().unwrap(),
            &["a", "color=blue", "color=green", "color=red"]
        );
        assert_eq!(d.row(0), &[1.0, 0.0, 0.0, 1.0]);
        let explicit = load_csv(
            f.path(),
            "y",
            &CategoricalPolicy::OneHotColumns(vec!["color".into()]),
        )
        .unwrap();
        assert_eq!(explicit, d);
    }

    #[test]
    fn csv_errors_name_location() {
        let f = write_tmp("a,b\n1,2\n");
        match load_csv(f.path(), "y", &CategoricalPolicy::Reject) {
            Err(Error::Ingestion { column, .. }) => assert_eq!(column, "y"),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("a,y\n1,2\nfoo,3\n");
        match load_csv(f.path(), "y", &CategoricalPolicy::Reject) {
            Err(Error::Ingestion { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("{other:?}"),
        }
        let f = write_tmp("a,y\n1,\n");
        assert!(matches!(
            load_csv(f.path(), "y", &CategoricalPolicy::Reject),
            Err(Error::Ingestion { .. })
        ));
        let f = write_tmp("a,y\n");
        assert!(matches!(
            load_csv(f.path(), "y", &CategoricalPolicy::Reject),
            Err(Error::Ingestion { .. })
        ));
    }

    #[test]
    fn csv_round_trip_exact() {
        let mut rng = RngStream::new(9, 9);
        use rand::Rng;
        let x: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 1e3 - 7.0).collect();
        let d = Dataset::new(x, y, 3).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        d.write_csv(f.path(), "y").unwrap();
        let back = load_csv(f.path(), "y", &CategoricalPolicy::Reject).unwrap();
        assert_eq!(back.predictors(), d.predictors());
        assert_eq!(back.response(), d.response());
    }
}
