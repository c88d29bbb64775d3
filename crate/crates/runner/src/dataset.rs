//! Dataset construction from a config and the dataset CSV format.
//!
//! CSV layout: a header `x1,…,xd,class,labeled_flag`, one sample per row,
//! coordinates with nine significant digits, `labeled_flag` 1 for a
//! visible label and 0 otherwise (always 0 in a test file).

use std::path::Path;

use cesslgan_core::data::{make_blob, make_ring, split_ssl, DataPool, Pool, SslDataset};
use cesslgan_core::Matrix;

use crate::config::{DatasetKind, DatasetSection};
use crate::error::{csv_err, io_err, Result, RunError};
use crate::format::sig9;

/// Points of a dataset plus, for CSV input, a labelled subset fixed by the
/// file.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub pool: DataPool,
    pub fixed_labels: Option<Vec<usize>>,
}

impl LoadedData {
    /// The semi-supervised view for one repetition.
    pub fn ssl(&self, n_s: usize, split_seed: u64) -> Result<SslDataset> {
        let pool = self.pool.clone();
        Ok(match &self.fixed_labels {
            Some(labeled) => SslDataset::from_parts(pool.classes, pool.train, labeled.clone(), pool.test)?,
            None => split_ssl(pool, n_s, split_seed)?,
        })
    }
}

/// Expects a resolved section (see `RunConfig::resolved`).
pub fn load(section: &DatasetSection) -> Result<LoadedData> {
    let seed = section.seed.unwrap_or(1);
    match section.kind {
        DatasetKind::Ring => Ok(LoadedData {
            pool: make_ring(seed, &section.ring_params())?.1,
            fixed_labels: None,
        }),
        DatasetKind::Blob => Ok(LoadedData {
            pool: make_blob(seed, &section.blob_params())?.1,
            fixed_labels: None,
        }),
        DatasetKind::Csv => {
            let train_path = section
                .train_csv
                .as_deref()
                .ok_or_else(|| RunError::Config("dataset.train_csv is required".into()))?;
            let (train, flags) = read_csv(train_path)?;
            let test = match section.test_csv.as_deref() {
                Some(p) => read_csv(p)?.0,
                None => Pool::new(Matrix::zeros(0, train.x.cols()), Vec::new())?,
            };
            let seen = train.classes.iter().chain(&test.classes).max().map_or(0, |c| c + 1);
            let classes = section.classes.unwrap_or(seen);
            let labeled: Vec<usize> = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
            Ok(LoadedData {
                pool: DataPool { classes, train, test },
                fixed_labels: (!labeled.is_empty()).then_some(labeled),
            })
        }
    }
}

pub fn write_csv(path: &Path, pool: &Pool, labeled: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let d = pool.x.cols();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("class".into());
    header.push("labeled_flag".into());
    w.write_record(&header).map_err(csv_err(path))?;
    let mut flag = vec![false; pool.len()];
    for &i in labeled {
        flag[i] = true;
    }
    for (i, row) in pool.x.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|&v| sig9(v)).collect();
        rec.push(pool.classes[i].to_string());
        rec.push(u8::from(flag[i]).to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Returns the pool and the per-row labelled flag.
pub fn read_csv(path: &Path) -> Result<(Pool, Vec<bool>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |m: String| RunError::Config(format!("{}: {m}", path.display()));
    let header = r.headers().map_err(csv_err(path))?.clone();
    let d = header.iter().take_while(|h| h.starts_with('x')).count();
    if d == 0 || header.len() != d + 2 || &header[d] != "class" || &header[d + 1] != "labeled_flag" {
        return Err(bad("expected header x1,..,xd,class,labeled_flag".into()));
    }
    let mut data = Vec::new();
    let mut classes = Vec::new();
    let mut flags = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        for v in rec.iter().take(d) {
            data.push(v.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 1)))?);
        }
        classes.push(rec[d].trim().parse::<usize>().map_err(|e| bad(format!("row {}: {e}", line + 1)))?);
        flags.push(match rec[d + 1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("row {}: labeled_flag {other:?}", line + 1))),
        });
    }
    let x = Matrix::from_vec(classes.len(), d, data)?;
    Ok((Pool::new(x, classes)?, flags))
}

/// Writes `train.csv` (with this split's labelled flags) and `test.csv`.
pub fn export(dir: &Path, data: &SslDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(&dir.join("train.csv"), &data.train, &data.labeled)?;
    write_csv(&dir.join("test.csv"), &data.test, &[])
}
