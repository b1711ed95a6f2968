//! CSV ingestion: proportion series, optional covariates and a trailing holdout.

use std::path::{Path, PathBuf};

use clap::Args;
use ularma::nalgebra::DMatrix;
use ularma::SeriesData;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetConfig {
    /// CSV file with a header row.
    #[arg(long = "data", value_name = "CSV")]
    pub input_path: PathBuf,
    /// Column holding the proportion, by header name or 0-based index.
    #[arg(long = "value", value_name = "COLUMN", conflicts_with_all = ["numerator", "denominator"])]
    pub value_column: Option<String>,
    /// Numerator column; the series is numerator / denominator.
    #[arg(long, value_name = "COLUMN", requires = "denominator")]
    pub numerator: Option<String>,
    #[arg(long, value_name = "COLUMN", requires = "numerator")]
    pub denominator: Option<String>,
    /// Column carried through to outputs as a label.
    #[arg(long = "date", value_name = "COLUMN")]
    pub date_column: Option<String>,
    /// Covariate columns, comma separated.
    #[arg(long, value_name = "COLUMNS", value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Trailing observations held out for forecast evaluation.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
    /// Map the series through (y (n-1) + 0.5) / n so 0 and 1 are admissible.
    #[arg(long)]
    pub squeeze: bool,
}

/// An ingested dataset split into training sample and holdout.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: SeriesData,
    pub holdout_y: Vec<f64>,
    /// Covariate rows for the holdout span (`holdout x r`).
    pub holdout_x: DMatrix<f64>,
    /// Labels for every row (training then holdout), when a date column is set.
    pub dates: Option<Vec<String>>,
}

impl Dataset {
    pub fn n_train(&self) -> usize {
        self.train.n()
    }

    pub fn train_date(&self, t: usize) -> Option<&str> {
        self.dates.as_ref().map(|d| d[t].as_str())
    }

    pub fn holdout_date(&self, k: usize) -> Option<&str> {
        self.dates.as_ref().and_then(|d| d.get(self.n_train() + k)).map(|s| s.as_str())
    }
}

fn column_index(headers: &csv::StringRecord, col: &str) -> CliResult<usize> {
    if let Some(i) = headers.iter().position(|h| h == col) {
        return Ok(i);
    }
    match col.parse::<usize>() {
        Ok(i) if i < headers.len() => Ok(i),
        _ => Err(CliError::input(format!(
            "no column '{col}' (available: {})",
            headers.iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn parse_field(rec: &csv::StringRecord, idx: usize, col: &str, line: u64) -> CliResult<f64> {
    let raw = rec.get(idx).map(str::trim).unwrap_or("");
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Err(CliError::input(format!("line {line}: missing value in column '{col}'")));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| CliError::input(format!("line {line}: cannot parse '{raw}' in column '{col}'")))?;
    if !v.is_finite() {
        return Err(CliError::input(format!("line {line}: non-finite value in column '{col}'")));
    }
    Ok(v)
}

enum Source {
    Value(usize),
    Ratio(usize, usize),
}

/// Reads the dataset described by `cfg`.
pub fn ingest(cfg: &DatasetConfig) -> CliResult<Dataset> {
    ingest_reader(
        csv::Reader::from_path(&cfg.input_path)
            .map_err(|e| CliError::input(format!("{}: {e}", cfg.input_path.display())))?,
        cfg,
        &cfg.input_path,
    )
}

fn ingest_reader<R: std::io::Read>(
    mut rdr: csv::Reader<R>,
    cfg: &DatasetConfig,
    path: &Path,
) -> CliResult<Dataset> {
    let headers = rdr
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    let (source, names) = match (&cfg.value_column, &cfg.numerator, &cfg.denominator) {
        (Some(v), None, None) => (Source::Value(column_index(&headers, v)?), vec![v.clone()]),
        (None, Some(a), Some(b)) => (
            Source::Ratio(column_index(&headers, a)?, column_index(&headers, b)?),
            vec![a.clone(), b.clone()],
        ),
        _ => {
            return Err(CliError::input(
                "give exactly one of --value or the pair --numerator/--denominator",
            ))
        }
    };
    let date_idx = cfg.date_column.as_deref().map(|c| column_index(&headers, c)).transpose()?;
    let cov_idx: Vec<usize> = cfg
        .covariates
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<CliResult<_>>()?;

    let mut y = Vec::new();
    let mut lines = Vec::new();
    let mut x_rows: Vec<f64> = Vec::new();
    let mut dates = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = match source {
            Source::Value(i) => parse_field(&rec, i, &names[0], line)?,
            Source::Ratio(a, b) => {
                let num = parse_field(&rec, a, &names[0], line)?;
                let den = parse_field(&rec, b, &names[1], line)?;
                if den == 0.0 {
                    return Err(CliError::input(format!("line {line}: zero denominator")));
                }
                num / den
            }
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::input(format!("line {line}: value {v} outside [0, 1]")));
        }
        if !cfg.squeeze && (v == 0.0 || v == 1.0) {
            return Err(CliError::input(format!(
                "line {line}: value {v} on the boundary; pass --squeeze to transform the series"
            )));
        }
        for (&i, name) in cov_idx.iter().zip(&cfg.covariates) {
            x_rows.push(parse_field(&rec, i, name, line)?);
        }
        if let Some(i) = date_idx {
            dates.push(rec.get(i).unwrap_or("").to_string());
        }
        y.push(v);
        lines.push(line);
    }

    let n = y.len();
    if n == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    if cfg.holdout >= n {
        return Err(CliError::input(format!("holdout {} leaves no training data (n = {n})", cfg.holdout)));
    }
    if cfg.squeeze {
        let nf = n as f64;
        for v in &mut y {
            *v = (*v * (nf - 1.0) + 0.5) / nf;
        }
    }
    let r = cov_idx.len();
    let x = DMatrix::from_row_slice(n, r, &x_rows);
    let n_train = n - cfg.holdout;
    let train_x = x.rows(0, n_train).into_owned();
    let holdout_x = x.rows(n_train, cfg.holdout).into_owned();
    let holdout_y = y.split_off(n_train);
    let train = SeriesData::new(y, train_x)?;
    Ok(Dataset {
        train,
        holdout_y,
        holdout_x,
        dates: date_idx.map(|_| dates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DatasetConfig {
        DatasetConfig {
            input_path: PathBuf::from("mem.csv"),
            value_column: Some("y".into()),
            ..DatasetConfig::default()
        }
    }

    fn read(text: &str, cfg: &DatasetConfig) -> CliResult<Dataset> {
        ingest_reader(csv::Reader::from_reader(text.as_bytes()), cfg, Path::new("mem.csv"))
    }

    #[test]
    fn ratio_columns() {
        let c = DatasetConfig {
            value_column: None,
            numerator: Some("hydro".into()),
            denominator: Some("total".into()),
            ..cfg()
        };
        let d = read("hydro,total\n30,120\n10,40\n", &c).unwrap();
        assert_eq!(d.train.y(), &[0.25, 0.25]);
    }

    #[test]
    fn boundary_value_names_the_line() {
        let err = read("y\n0.3\n1.0\n", &cfg()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let ok = read("y\n0.3\n1.0\n", &DatasetConfig { squeeze: true, ..cfg() }).unwrap();
        assert_eq!(ok.train.y(), &[(0.3 + 0.5) / 2.0, 1.5 / 2.0]);
    }

    #[test]
    fn missing_and_garbage_rows() {
        assert!(read("y\n0.3\n\n0.4\n", &cfg()).is_ok());
        let err = read("y,z\n0.3,1\n,2\n", &cfg()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = read("y\n0.3\nabc\n", &cfg()).unwrap_err();
        assert!(err.to_string().contains("'abc'"), "{err}");
        assert!(read("y\n1.3\n", &cfg()).is_err());
    }

    #[test]
    fn holdout_split_and_dates() {
        let mut text = String::from("month,y,x\n");
        for t in 0..289 {
            text.push_str(&format!("m{t},{},{}\n", 0.2 + 0.001 * t as f64, t));
        }
        let c = DatasetConfig {
            date_column: Some("month".into()),
            covariates: vec!["x".into()],
            holdout: 12,
            ..cfg()
        };
        let d = read(&text, &c).unwrap();
        assert_eq!(d.n_train(), 277);
        assert_eq!(d.holdout_y.len(), 12);
        assert_eq!(d.holdout_x[(0, 0)], 277.0);
        assert_eq!(d.holdout_date(11), Some("m288"));
        assert_eq!(d.train_date(0), Some("m0"));
        assert!(read(&text, &DatasetConfig { holdout: 289, ..c }).is_err());
    }

    #[test]
    fn column_by_index() {
        let c = DatasetConfig { value_column: Some("1".into()), ..cfg() };
        let d = read("a,b\nfoo,0.5\nbar,0.6\n", &c).unwrap();
        assert_eq!(d.train.y(), &[0.5, 0.6]);
        assert!(read("a,b\nfoo,0.5\n", &DatasetConfig { value_column: Some("c".into()), ..cfg() }).is_err());
    }
}
