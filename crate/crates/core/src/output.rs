//! CSV tables: `#` comment lines, one header line, 17-significant-digit floats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::SyntheticProblem;
use crate::solvers::EnsembleSummary;

/// `{:.16e}`; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// An in-memory table with an integer key column and float data columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub key: String,
    pub columns: Vec<String>,
    pub keys: Vec<usize>,
    /// `rows[r][c]`
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(c.as_bytes());
            out.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        let mut header = vec![self.key.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (k, row) in self.keys.iter().zip(&self.rows) {
            let mut rec = vec![k.to_string()];
            rec.extend(row.iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Table> {
        let mut comments = Vec::new();
        for line in text.lines() {
            match line.strip_prefix('#') {
                Some(c) => comments.push(c.trim_start().to_string()),
                None => break,
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        let mut cols = header.iter().map(str::to_string);
        let key = cols
            .next()
            .ok_or_else(|| Error::Csv("missing header line".into()))?;
        let columns: Vec<String> = cols.collect();
        let mut keys = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let bad = |f: &str| Error::Csv(format!("data row {}: cannot parse `{f}`", i + 1));
            let mut it = rec.iter();
            let k = it.next().ok_or_else(|| bad(""))?;
            keys.push(k.trim().parse::<usize>().map_err(|_| bad(k))?);
            let row = it
                .map(|f| f.trim().parse::<f64>().map_err(|_| bad(f)))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Csv(format!(
                    "data row {} has {} fields, header has {}",
                    i + 1,
                    row.len() + 1,
                    columns.len() + 1
                )));
            }
            rows.push(row);
        }
        Ok(Table {
            comments,
            key,
            columns,
            keys,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text)
    }
}

fn schema_comment(key: &str, columns: &[String]) -> String {
    format!("columns: {key},{}", columns.join(","))
}

/// Ensemble means and standard errors at every recorded iteration.
pub fn ensemble_table(s: &EnsembleSummary, extra_comments: &[String]) -> Table {
    let mut columns = Vec::new();
    let mut data: Vec<&Vec<f64>> = Vec::new();
    for (j, l) in s.probes.iter().enumerate() {
        columns.push(format!("comp_{l}"));
        data.push(&s.mean_comp[j]);
    }
    for (j, l) in s.probes.iter().enumerate() {
        columns.push(format!("comp_sq_{l}"));
        data.push(&s.mean_comp_sq[j]);
    }
    columns.push("norm_sq".into());
    data.push(&s.mean_norm_sq);
    for (j, l) in s.probes.iter().enumerate() {
        columns.push(format!("stderr_comp_{l}"));
        data.push(&s.stderr_comp[j]);
    }
    for (j, l) in s.probes.iter().enumerate() {
        columns.push(format!("stderr_comp_sq_{l}"));
        data.push(&s.stderr_comp_sq[j]);
    }
    columns.push("stderr_norm_sq".into());
    data.push(&s.stderr_norm_sq);

    let rows = (0..s.iters.len())
        .map(|r| data.iter().map(|c| c[r]).collect())
        .collect();
    let mut comments = vec![
        "eigsgd ensemble".to_string(),
        format!(
            "method={} schedule={} repetitions={} base_seed={} problem={}",
            s.meta.method.name(),
            s.meta
                .schedule
                .map(|x| x.describe())
                .unwrap_or_else(|| "none".into()),
            s.repetitions,
            s.meta.seed,
            s.meta.problem_digest
        ),
    ];
    comments.extend(extra_comments.iter().cloned());
    comments.push(
        "comp_l = mean <x_k - x_*, v_l>; comp_sq_l = mean of its square; norm_sq = mean ||x_k - x_*||^2; stderr_* = standard error of the mean".into(),
    );
    comments.push(schema_comment("iter", &columns));
    Table {
        comments,
        key: "iter".into(),
        columns,
        keys: s.iters.clone(),
        rows,
    }
}

fn matrix_table(name: &str, nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Table {
    let columns: Vec<String> = if ncols == 1 {
        vec![name.to_string()]
    } else {
        (0..ncols).map(|j| format!("c{j}")).collect()
    };
    Table {
        comments: vec![
            format!("{name}: {nrows} x {ncols}"),
            schema_comment("row", &columns),
        ],
        key: "row".into(),
        columns,
        keys: (0..nrows).collect(),
        rows: (0..nrows)
            .map(|i| (0..ncols).map(|j| f(i, j)).collect())
            .collect(),
    }
}

/// `A.csv`, `b.csv`, `sigma.csv`, `x_star.csv` as `(file name, table)`.
pub fn problem_tables(p: &SyntheticProblem) -> Vec<(&'static str, Table)> {
    let a = p.a();
    vec![
        ("A.csv", matrix_table("A", p.rows(), p.cols(), |i, j| a[(i, j)])),
        ("b.csv", matrix_table("b", p.rows(), 1, |i, _| p.b()[i])),
        ("sigma.csv", matrix_table("sigma", p.cols(), 1, |i, _| p.sigma()[i])),
        ("x_star.csv", matrix_table("x_star", p.cols(), 1, |i, _| p.x_star()[i])),
    ]
}

/// Write `(name, bytes)` pairs into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn table_round_trip() {
        let t = Table {
            comments: vec!["hello".into(), "columns: iter,x,y".into()],
            key: "iter".into(),
            columns: vec!["x".into(), "y".into()],
            keys: vec![0, 1, 10],
            rows: vec![vec![1.0, -0.5], vec![0.25, 3.0], vec![1e-20, 7.0]],
        };
        let bytes = t.to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# hello\n# columns: iter,x,y\niter,x,y\n"));
        assert_eq!(Table::parse(&text).unwrap(), t);
    }

    #[test]
    fn parse_reports_bad_field() {
        let e = Table::parse("iter,x\n0,abc\n").unwrap_err();
        assert!(e.to_string().contains("abc"));
    }
}
