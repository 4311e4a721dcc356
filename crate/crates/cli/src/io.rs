//! CSV and JSON plumbing shared by the subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lcic::SampleMatrix;
use ndarray::Array2;

/// Parsed numeric table plus its header row when one was read.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub data: SampleMatrix,
}

fn read_source(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut s))
            .with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(s)
}

/// Comma-separated numbers, one sample per row. With `header` the first line
/// is kept as column names and not parsed.
pub fn read_table(path: &Path, header: bool) -> Result<Table> {
    let text = read_source(path)?;
    parse_table(&text, header).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_table(text: &str, header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names = if header {
        Some(reader.headers()?.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    let mut values = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => bail!("row {} has {} columns, expected {w}", i + 1, record.len()),
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| anyhow!("row {}: cannot parse {field:?} as a number", i + 1))?;
            if !v.is_finite() {
                bail!("row {}: non-finite value {field:?}", i + 1);
            }
            values.push(v);
        }
    }
    let d = width.ok_or_else(|| anyhow!("no data rows"))?;
    let n = values.len() / d;
    Ok(Table {
        header: names,
        data: Array2::from_shape_vec((n, d), values)?,
    })
}

pub fn read_matrix(path: &Path, header: bool) -> Result<SampleMatrix> {
    Ok(read_table(path, header)?.data)
}

/// One non-negative integer per line.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_source(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>()
                .map_err(|_| anyhow!("{} line {}: expected a label, got {l:?}", path.display(), i + 1))
        })
        .collect()
}

/// Shortest round-trip rendering; infinities come out as `inf` / `-inf`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_matrix<W: Write>(out: &mut W, x: &SampleMatrix) -> io::Result<()> {
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_column<W: Write>(out: &mut W, values: &[f64]) -> io::Result<()> {
    for &v in values {
        writeln!(out, "{}", fmt_f64(v))?;
    }
    Ok(())
}

/// File when a path is given, stdout otherwise.
pub fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    read_source(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_header() {
        let t = parse_table("a,b\n1,2\n3.5,-4e-3\n", true).unwrap();
        assert_eq!(t.header.unwrap(), vec!["a", "b"]);
        assert_eq!(t.data, ndarray::array![[1.0, 2.0], [3.5, -4e-3]]);
        let t = parse_table("1, 2\n3,4\n", false).unwrap();
        assert_eq!(t.data.shape(), &[2, 2]);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(parse_table("1,2\n3\n", false).is_err());
        assert!(parse_table("1,x\n", false).is_err());
        assert!(parse_table("1,inf\n", false).is_err());
        assert!(parse_table("", false).is_err());
    }

    #[test]
    fn floats_round_trip() {
        let vals = [0.1, 1e-300, 123456.789, -2.5e17, f64::MIN_POSITIVE];
        for v in vals {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }
}
