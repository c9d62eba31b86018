//! Multilabel svmlight datasets.
//!
//! One example per line: `l1,l2,... f:v f:v ...`. Labels are 0-based,
//! feature indices 1-based in the file and 0-based in memory. A first line
//! of three bare integers `n d c` (as written by common converters) is read
//! as a header giving the feature and label counts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::Rng;
use crate::tensor::SparseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `n × d` features.
    pub x: SparseMatrix,
    /// `n × c` labels with entries 1.
    pub y: SparseMatrix,
}

/// Dimension overrides; `None` infers from the header or the data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    pub n_features: Option<usize>,
    pub n_labels: Option<usize>,
}

impl Dataset {
    pub fn new(x: SparseMatrix, y: SparseMatrix) -> Result<Self> {
        if x.n_rows() != y.n_rows() {
            return config_err(format!("{} feature rows but {} label rows", x.n_rows(), y.n_rows()));
        }
        if y.values().iter().any(|&v| v != 1.0) {
            return Err(Error::Data("label matrix must be binary".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n_examples(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn n_labels(&self) -> usize {
        self.y.n_cols()
    }

    /// Class index per example; fails unless every example has exactly one label.
    pub fn class_indices(&self) -> Result<Vec<usize>> {
        (0..self.n_examples())
            .map(|i| match self.y.row_indices(i) {
                [j] => Ok(*j),
                other => Err(Error::Data(format!(
                    "example {i} has {} labels; multiclass mode needs exactly one",
                    other.len()
                ))),
            })
            .collect()
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
        }
    }

    /// Label sets, one sorted list per example.
    pub fn label_sets(&self) -> Vec<Vec<usize>> {
        (0..self.n_examples()).map(|i| self.y.row_indices(i).to_vec()).collect()
    }
}

fn header(line: &str) -> Option<(usize, usize, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 3 || toks.iter().any(|t| !t.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    Some((toks[0].parse().ok()?, toks[1].parse().ok()?, toks[2].parse().ok()?))
}

type Row = (Vec<usize>, Vec<(usize, f64)>);

fn parse_line(line: &str) -> std::result::Result<Row, String> {
    let mut toks = line.split_whitespace().peekable();
    let mut labels = Vec::new();
    let starts_with_space = line.starts_with(char::is_whitespace);
    if !starts_with_space {
        if let Some(first) = toks.peek() {
            if !first.contains(':') {
                for l in first.split(',').filter(|s| !s.is_empty()) {
                    labels.push(
                        l.parse::<usize>()
                            .map_err(|_| format!("invalid label '{l}'"))?,
                    );
                }
                toks.next();
            }
        }
    }
    labels.sort_unstable();
    labels.dedup();
    let mut feats = Vec::new();
    for tok in toks {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected index:value, found '{tok}'"))?;
        let idx: usize = idx.parse().map_err(|_| format!("invalid feature index '{idx}'"))?;
        if idx == 0 {
            return Err("feature indices are 1-based; found 0".into());
        }
        let val: f64 = val.parse().map_err(|_| format!("invalid feature value '{val}'"))?;
        if !val.is_finite() {
            return Err(format!("non-finite feature value '{val}'"));
        }
        feats.push((idx - 1, val));
    }
    feats.sort_unstable_by_key(|&(j, _)| j);
    if let Some(w) = feats.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(format!("duplicate feature index {}", w[0].0 + 1));
    }
    feats.retain(|&(_, v)| v != 0.0);
    Ok((labels, feats))
}

/// Parses a dataset from any reader; `name` appears in error messages.
pub fn parse_reader<R: Read>(reader: R, name: &Path, opts: &ParseOptions) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: name.to_path_buf(),
        line,
        message,
    };
    let mut rows: Vec<Row> = Vec::new();
    let mut declared: Option<(usize, usize, usize)> = None;
    let mut seen_data = false;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if !seen_data {
            seen_data = true;
            if let Some(h) = header(line) {
                declared = Some(h);
                continue;
            }
        }
        rows.push(parse_line(line).map_err(|m| parse_err(i + 1, m))?);
    }
    if let Some((n, _, _)) = declared {
        if n != rows.len() {
            return Err(parse_err(1, format!("header declares {n} examples, file has {}", rows.len())));
        }
    }
    let max_feat = rows.iter().filter_map(|r| r.1.last().map(|&(j, _)| j + 1)).max().unwrap_or(0);
    let max_label = rows.iter().filter_map(|r| r.0.last().map(|&j| j + 1)).max().unwrap_or(0);
    let d = opts.n_features.or(declared.map(|h| h.1)).unwrap_or(max_feat);
    let c = opts.n_labels.or(declared.map(|h| h.2)).unwrap_or(max_label);
    if max_feat > d {
        return Err(Error::Data(format!(
            "{}: feature index {max_feat} exceeds feature count {d}",
            name.display()
        )));
    }
    if max_label > c {
        return Err(Error::Data(format!(
            "{}: label {} exceeds label count {c}",
            name.display(),
            max_label - 1
        )));
    }
    let (labels, feats): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let x = SparseMatrix::from_rows(d, feats)?;
    let y = SparseMatrix::from_label_sets(c, &labels)?;
    Dataset::new(x, y)
}

pub fn parse_dataset(path: &Path, opts: &ParseOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", path.display()))
    })?;
    parse_reader(file, path, opts)
}

/// Writes the dataset with an `n d c` header; values use shortest
/// round-trip formatting so reparsing is exact. An example with no labels and
/// no features is written as a lone `,` since blank lines are skipped.
pub fn write_dataset<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{} {} {}", ds.n_examples(), ds.n_features(), ds.n_labels())?;
    for i in 0..ds.n_examples() {
        let labels: Vec<String> = ds.y.row_indices(i).iter().map(|j| j.to_string()).collect();
        let (cols, vals) = ds.x.row(i);
        if labels.is_empty() && cols.is_empty() {
            writeln!(w, ",")?;
            continue;
        }
        w.write_all(labels.join(",").as_bytes())?;
        for (j, v) in cols.iter().zip(vals) {
            write!(w, " {}:{}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_dataset(ds, File::create(path)?)
}

/// Seeded random split; returns `(train, test)` with `round(n·test_fraction)`
/// test examples, both in original row order.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return config_err(format!("test fraction must be in (0, 1), got {test_fraction}"));
    }
    let n = ds.n_examples();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut Rng::new(seed).fork_named("split"));
    let n_test = (n as f64 * test_fraction).round() as usize;
    let (test, train) = idx.split_at(n_test);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select(&train), ds.select(&test)))
}

/// Inverse document frequency weights fitted on training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Idf {
    pub weights: Vec<f64>,
}

impl Idf {
    /// Smoothed `ln((1 + n) / (1 + df)) + 1`.
    pub fn fit(x: &SparseMatrix) -> Idf {
        let mut df = vec![0usize; x.n_cols()];
        for &j in x.col_indices() {
            df[j] += 1;
        }
        let n = x.n_rows() as f64;
        Idf {
            weights: df.iter().map(|&f| ((1.0 + n) / (1.0 + f as f64)).ln() + 1.0).collect(),
        }
    }

    /// Column reweighting followed by row L2 normalization.
    pub fn transform(&self, x: &SparseMatrix) -> Result<SparseMatrix> {
        if x.n_cols() != self.weights.len() {
            return config_err(format!(
                "tf-idf fitted on {} features, input has {}",
                self.weights.len(),
                x.n_cols()
            ));
        }
        let scaled = x.scale_columns(&self.weights);
        let rows = (0..scaled.n_rows())
            .map(|i| {
                let (cols, vals) = scaled.row(i);
                let norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                cols.iter().zip(vals).map(|(&j, &v)| (j, v / norm)).collect()
            })
            .collect();
        SparseMatrix::from_rows(x.n_cols(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_reader(s.as_bytes(), Path::new("mem"), &ParseOptions::default())
    }

    #[test]
    fn parses_labels_and_features() {
        let ds = parse("0,2 1:0.5 3:1.0\n 1:1.0\n").unwrap();
        assert_eq!(ds.n_examples(), 2);
        assert_eq!(ds.y.row_indices(0), &[0, 2]);
        assert_eq!(ds.x.row(0), (&[0usize, 2][..], &[0.5, 1.0][..]));
        assert!(ds.y.row_indices(1).is_empty());
        assert_eq!((ds.n_features(), ds.n_labels()), (3, 3));
    }

    #[test]
    fn header_sets_dimensions() {
        let ds = parse("2 10 5\n1 2:1\n0,4 1:2\n").unwrap();
        assert_eq!((ds.n_features(), ds.n_labels()), (10, 5));
        assert!(parse("3 10 5\n1 2:1\n").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        for bad in ["0 1:1\n1 2:x\n", "0 1:1\n1 2:1 2:3\n", "0 1:1\n1 0:1\n", "0 1:1\na 1:1\n"] {
            match parse(bad).unwrap_err() {
                Error::Parse { line, .. } => assert_eq!(line, 2, "{bad:?}"),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn overrides_bound_indices() {
        let opts = ParseOptions { n_features: Some(2), n_labels: None };
        assert!(parse_reader("0 3:1\n".as_bytes(), Path::new("m"), &opts).is_err());
        let opts = ParseOptions { n_features: Some(8), n_labels: Some(4) };
        let ds = parse_reader("0 3:1\n".as_bytes(), Path::new("m"), &opts).unwrap();
        assert_eq!((ds.n_features(), ds.n_labels()), (8, 4));
    }

    #[test]
    fn split_partitions_rows() {
        let text: String = (0..20).map(|i| format!("{} {}:1\n", i % 3, i + 1)).collect();
        let ds = parse(&text).unwrap();
        let (tr, te) = split(&ds, 0.25, 9).unwrap();
        assert_eq!((tr.n_examples(), te.n_examples()), (15, 5));
        let again = split(&ds, 0.25, 9).unwrap();
        assert_eq!(again.1, te);
    }

    #[test]
    fn idf_rows_are_unit_norm() {
        let ds = parse("0 1:1 2:3\n1 2:1\n0 3:2\n").unwrap();
        let t = Idf::fit(&ds.x).transform(&ds.x).unwrap();
        for i in 0..3 {
            let n: f64 = t.row(i).1.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
