//! CSV datasets: a header row, numeric feature columns and one label column.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use old3s_core::stream::Dataset;

use crate::error::{CliError, CliResult};

/// Reads a dataset from `reader`. Labels are mapped to `0..C` in the order of
/// `classes` when given (unlisted labels are an error), otherwise in sorted
/// order of the distinct label strings.
pub fn read_dataset<R: Read>(
    reader: R,
    label_column: &str,
    classes: Option<&[String]>,
    origin: &Path,
) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::io(origin, e))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| CliError::io(origin, format!("no label column named {label_column:?}")))?;

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(origin, e))?;
        if rec.len() != headers.len() {
            return Err(CliError::io(
                origin,
                format!("line {line}: {} fields, header has {}", rec.len(), headers.len()),
            ));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::io(origin, format!("line {line}, column {:?}: non-numeric value {cell:?}", &headers[j]))
            })?;
            if !v.is_finite() {
                return Err(CliError::io(origin, format!("line {line}, column {:?}: non-finite value", &headers[j])));
            }
            row.push(v);
        }
        features.push(row);
        raw_labels.push(rec[label_idx].trim().to_string());
    }
    if features.is_empty() {
        return Err(CliError::io(origin, "no data rows"));
    }

    let index: BTreeMap<String, usize> = match classes {
        Some(list) => list.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect(),
        None => {
            let mut distinct: Vec<&String> = raw_labels.iter().collect();
            // Integer labels keep their numeric order.
            distinct.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
                (Ok(x), Ok(y)) => x.cmp(&y),
                _ => a.cmp(b),
            });
            distinct.dedup();
            distinct.into_iter().enumerate().map(|(i, c)| (c.clone(), i)).collect()
        }
    };
    let n_classes = classes.map_or(index.len(), <[String]>::len);
    let labels = raw_labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| CliError::io(origin, format!("line {}: unseen label {l:?}", i + 2)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if n_classes < 2 {
        return Err(CliError::io(origin, format!("need at least 2 classes, found {n_classes}")));
    }
    Dataset::new(features, labels, n_classes).map_err(|e| CliError::io(origin, e))
}

pub fn load_csv(path: &Path, label_column: &str, classes: Option<&[String]>) -> CliResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), label_column, classes, path)
}

/// Header `x1..xd,<label_column>`, labels written as class indices. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(writer: W, dataset: &Dataset, label_column: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=dataset.dim()).map(|i| format!("x{i}")).collect();
    header.push(label_column.to_string());
    w.write_record(&header)?;
    for (row, y) in dataset.features().iter().zip(dataset.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, dataset: &Dataset, label_column: &str) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_dataset(std::io::BufWriter::new(file), dataset, label_column).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, classes: Option<&[String]>) -> CliResult<Dataset> {
        read_dataset(text.as_bytes(), "class", classes, Path::new("inline.csv"))
    }

    #[test]
    fn parses_fixture_exactly() {
        let ds = parse("a,class,b\n1.5,g,-2\n0,h,3e-1\n-4.25,g,7\n", None).unwrap();
        assert_eq!(ds.features(), &[vec![1.5, -2.0], vec![0.0, 0.3], vec![-4.25, 7.0]]);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.classes(), 2);
    }

    #[test]
    fn explicit_class_order_and_unseen_labels() {
        let order = vec!["h".to_string(), "g".to_string()];
        let ds = parse("a,class\n1,g\n2,h\n", Some(&order)).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        let err = parse("a,class\n1,g\n2,q\n", Some(&order)).unwrap_err();
        assert!(err.to_string().contains("unseen label"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn integer_labels_sort_numerically() {
        let text: String = (0..12).map(|i| format!("{i},{}\n", 11 - i)).collect();
        let ds = parse(&format!("a,class\n{text}"), None).unwrap();
        assert_eq!(ds.labels(), (0..12).rev().collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn rejects_bad_cells_and_missing_label() {
        let err = parse("a,class\n1,g\nx,h\n", None).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse("a,b\n1,2\n", None).is_err());
        assert!(parse("a,class\n", None).is_err());
        assert!(parse("a,class\nnan,g\n1,h\n", None).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let ds = Dataset::new(vec![vec![0.1, -1e-300], vec![1.0 / 3.0, 2.5]], vec![1, 0], 2).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds, "class").unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap(), None).unwrap();
        assert_eq!(back, ds);
    }
}
