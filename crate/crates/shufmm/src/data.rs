//! LIBSVM ingestion, synthetic binary classification data, and block partitioning.

use crate::error::{Error, Result};
use crate::linalg::SparseRow;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::io::BufRead;
use std::ops::Range;

/// Labelled sparse samples with labels in `{−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    p: usize,
}

impl SparseDataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if let Some((row, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l != 1.0 && l != -1.0)
        {
            return Err(Error::InvalidLabel { row, label });
        }
        let p = rows[0].dim();
        if let Some(r) = rows.iter().find(|r| r.dim() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.dim(),
            });
        }
        Ok(Self { rows, labels, p })
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

/// Parses LIBSVM text, taking the feature dimension from the largest index.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset> {
    parse_libsvm_with_dim(reader, None)
}

/// Parses LIBSVM text with an optional declared feature dimension.
///
/// Labels map to `+1` when positive and `−1` otherwise, so `{0, 1}` labels map to `{−1, +1}`.
pub fn parse_libsvm_with_dim<R: BufRead>(reader: R, dim: Option<usize>) -> Result<SparseDataset> {
    let mut raw: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|l: &f64| l.is_finite())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("bad label '{label_tok}'"),
            })?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = parse_feature(tok).map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
            if indices.last().is_some_and(|&last| idx <= last) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("index {} not increasing", idx + 1),
                });
            }
            max_index = max_index.max(idx + 1);
            indices.push(idx);
            values.push(val);
        }
        raw.push((indices, values));
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = match dim {
        Some(d) if d < max_index => {
            return Err(Error::InvalidParameter(format!(
                "declared dimension {d} below max index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index.max(1),
    };
    let rows = raw
        .into_iter()
        .map(|(i, v)| SparseRow::new(i, v, p))
        .collect::<Result<Vec<_>>>()?;
    SparseDataset::new(rows, labels)
}

fn parse_feature(tok: &str) -> std::result::Result<(usize, f64), String> {
    let (idx, val) = tok
        .split_once(':')
        .ok_or_else(|| format!("malformed feature '{tok}'"))?;
    let idx: usize = idx.parse().map_err(|_| format!("bad index '{idx}'"))?;
    if idx == 0 {
        return Err("indices are 1-based".into());
    }
    let val: f64 = val
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| format!("bad value '{val}'"))?;
    Ok((idx - 1, val))
}

/// Writes LIBSVM text that `parse_libsvm_with_dim` reads back exactly.
pub fn serialize_libsvm(ds: &SparseDataset) -> String {
    let mut out = String::new();
    for (row, label) in ds.rows.iter().zip(&ds.labels) {
        out.push_str(if *label > 0.0 { "+1" } else { "-1" });
        for (i, v) in row.indices().iter().zip(row.values()) {
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}

/// Gaussian features with a planted separator; labels are flipped by Gaussian margin noise.
pub fn generate_synthetic(
    n: usize,
    p: usize,
    seed: u64,
    margin_noise: f64,
) -> Result<SparseDataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    if !(margin_noise >= 0.0) {
        return Err(Error::InvalidParameter(
            "margin_noise must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (p as f64).sqrt();
    let separator: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: Vec<f64> = (0..p)
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let margin = crate::linalg::inner(&a, &separator) + margin_noise * noise;
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
        rows.push(SparseRow::from_dense(&a)?);
    }
    SparseDataset::new(rows, labels)
}

/// Splits `[0, n)` into `k_b` contiguous blocks; the first `n mod k_b` blocks get one extra row.
pub fn block_ranges(n: usize, k_b: usize) -> Result<Vec<Range<usize>>> {
    if k_b == 0 || k_b > n {
        return Err(Error::InvalidParameter(format!(
            "k_b = {k_b} must lie in [1, {n}]"
        )));
    }
    let base = n / k_b;
    let extra = n % k_b;
    let mut start = 0;
    Ok((0..k_b)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Block partition of a dataset's rows.
pub fn partition_blocks(ds: &SparseDataset, k_b: usize) -> Result<Vec<Range<usize>>> {
    block_ranges(ds.n(), k_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_single_line() {
        let ds = parse_libsvm("+1 3:0.5 7:1.0\n".as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[1.0]);
        assert_eq!(ds.rows()[0].indices(), &[2, 6]);
        assert_eq!(ds.rows()[0].values(), &[0.5, 1.0]);
        assert_eq!(ds.p(), 7);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(parse_libsvm("".as_bytes()), Err(Error::EmptyDataset));
        assert_eq!(
            parse_libsvm("\n\n  \n".as_bytes()),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn maps_binary_labels_and_tolerates_crlf() {
        let ds = parse_libsvm("0 1:1\r\n1 2:1\r\n-3 1:2\r\n".as_bytes()).unwrap();
        assert_eq!(ds.labels(), &[-1.0, 1.0, -1.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_libsvm("+1 1:1\n-1 3:1 2:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_libsvm("+1 1:1\n\nx 1:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_libsvm("+1 0:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_libsvm("+1 1:abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn dimension_override() {
        let ds = parse_libsvm_with_dim("+1 2:1\n".as_bytes(), Some(10)).unwrap();
        assert_eq!(ds.p(), 10);
        assert!(parse_libsvm_with_dim("+1 12:1\n".as_bytes(), Some(10)).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = generate_synthetic(30, 7, 4, 0.3).unwrap();
        let back = parse_libsvm_with_dim(serialize_libsvm(&ds).as_bytes(), Some(ds.p())).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn synthetic_is_deterministic_and_labelled() {
        let a = generate_synthetic(50, 5, 9, 0.5).unwrap();
        let b = generate_synthetic(50, 5, 9, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.labels().iter().all(|&l| l == 1.0 || l == -1.0));
    }

    #[test]
    fn noiseless_synthetic_is_separable_by_perceptron() {
        // Oracle: the perceptron converges in finitely many passes exactly when data are separable.
        let ds = generate_synthetic(60, 4, 21, 0.0).unwrap();
        let mut w = vec![0.0; ds.p()];
        let mut converged = false;
        for _ in 0..100_000 {
            let mut mistakes = 0;
            for (row, &y) in ds.rows().iter().zip(ds.labels()) {
                if y * row.dot_dense(&w) <= 0.0 {
                    row.add_scaled_into(&mut w, y);
                    mistakes += 1;
                }
            }
            if mistakes == 0 {
                converged = true;
                break;
            }
        }
        assert!(converged);
    }

    #[test]
    fn block_examples() {
        let ds = generate_synthetic(10, 2, 1, 0.0).unwrap();
        assert!(partition_blocks(&ds, 32).is_err());
        assert!(partition_blocks(&ds, 0).is_err());
        assert_eq!(partition_blocks(&ds, 2).unwrap(), vec![0..5, 5..10]);
        assert_eq!(block_ranges(10, 3).unwrap(), vec![0..4, 4..7, 7..10]);
    }

    proptest! {
        #[test]
        fn blocks_cover_every_index_once(n in 1usize..500, k in 1usize..64) {
            prop_assume!(k <= n);
            let blocks = block_ranges(n, k).unwrap();
            prop_assert_eq!(blocks.len(), k);
            let mut next = 0;
            for b in &blocks {
                prop_assert_eq!(b.start, next);
                prop_assert!(b.end > b.start);
                next = b.end;
            }
            prop_assert_eq!(next, n);
        }

        #[test]
        fn parser_never_panics(text in "[ -~\\n\\r]{0,200}") {
            let _ = parse_libsvm(text.as_bytes());
        }

        #[test]
        fn parser_is_total_on_feature_like_lines(
            lines in proptest::collection::vec("[+-]?[0-9] ([0-9]{1,2}:[0-9.eE+-]{1,5} ?){0,4}", 0..10)) {
            let _ = parse_libsvm(lines.join("\n").as_bytes());
        }
    }
}
