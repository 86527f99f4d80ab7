//! CSV ingestion, shard union and CSV output.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, ColumnData, ColumnKind, FlowTable, Schema};
use crate::error::{Error, Result};

/// Ordered list of CSV shards that together form one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub paths: Vec<PathBuf>,
    pub expect_header: bool,
    pub delimiter: char,
}

impl ShardManifest {
    pub fn new(paths: Vec<PathBuf>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("shard manifest has no paths".into()));
        }
        Ok(ShardManifest {
            paths,
            expect_header: true,
            delimiter: ',',
        })
    }

    /// Resolves a manifest argument: a glob pattern (expanded in sorted order)
    /// or a text file listing one path per line. Relative paths inside a
    /// manifest file resolve against the file's directory.
    pub fn resolve(arg: &str) -> Result<Self> {
        if arg.contains(['*', '?', '[']) {
            let mut paths = glob::glob(arg)
                .map_err(|e| Error::Config(format!("bad glob {arg:?}: {e}")))?
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("glob {arg:?}: {e}")))?;
            paths.sort();
            return ShardManifest::new(paths);
        }
        let file = Path::new(arg);
        let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let base = file.parent().unwrap_or(Path::new(""));
        let paths = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let p = PathBuf::from(l);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
            .collect();
        ShardManifest::new(paths)
    }

    pub fn with_header(mut self, expect_header: bool) -> Self {
        self.expect_header = expect_header;
        self
    }

    pub fn with_delimiter(mut self, delimiter: char) -> Self {
        self.delimiter = delimiter;
        self
    }
}

/// Parsing options for a single CSV file.
#[derive(Clone, Copy, Debug)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: true,
            delimiter: b',',
        }
    }
}

pub(crate) fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "nan" || t == "NaN"
}

/// Parses a numeric cell; missing tokens, unparsable and non-finite values
/// all become `NaN`.
pub(crate) fn parse_numeric(cell: &str) -> f64 {
    if is_missing_token(cell) {
        return f64::NAN;
    }
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => v,
        _ => f64::NAN,
    }
}

enum Builder {
    Numeric(Vec<f64>),
    Text(Vec<Option<String>>),
}

impl Builder {
    fn for_kind(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Numeric => Builder::Numeric(Vec::new()),
            _ => Builder::Text(Vec::new()),
        }
    }

    fn push(&mut self, cell: &str) {
        match self {
            Builder::Numeric(v) => v.push(parse_numeric(cell)),
            Builder::Text(v) => v.push(if is_missing_token(cell) {
                None
            } else {
                Some(cell.to_string())
            }),
        }
    }

    fn finish(self) -> ColumnData {
        match self {
            Builder::Numeric(v) => ColumnData::Numeric(v),
            Builder::Text(v) => ColumnData::Text(v),
        }
    }
}

/// Maps header positions onto schema columns, reporting every mismatch.
fn header_mapping(path: &Path, header: &csv::StringRecord, schema: &Schema) -> Result<Vec<usize>> {
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    let missing: Vec<String> = schema
        .names()
        .filter(|n| !header.contains(n))
        .map(String::from)
        .collect();
    let unexpected: Vec<String> = header
        .iter()
        .filter(|h| !schema.names().any(|n| n == **h))
        .map(|h| h.to_string())
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() || header.len() != schema.columns().len() {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            missing,
            unexpected,
        });
    }
    // position in file of each schema column
    Ok(schema
        .names()
        .map(|n| header.iter().position(|h| *h == n).expect("checked above"))
        .collect())
}

/// Reads CSV data from any reader. `path` is only used in error messages.
pub fn read_csv_from<R: Read>(reader: R, path: &Path, schema: &Schema, opts: CsvOptions) -> Result<FlowTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(false)
        .from_reader(reader);
    let positions = if opts.has_header {
        let header = rdr.headers()?.clone();
        header_mapping(path, &header, schema)?
    } else {
        (0..schema.columns().len()).collect()
    };
    let mut builders: Vec<Builder> = schema.columns().iter().map(|c| Builder::for_kind(c.kind)).collect();
    let mut record = csv::StringRecord::new();
    let mut line = 0usize;
    while rdr.read_record(&mut record)? {
        line += 1;
        if record.len() != positions.len() {
            return Err(Error::Data(format!(
                "{}: record {line} has {} fields, expected {}",
                path.display(),
                record.len(),
                positions.len()
            )));
        }
        for (b, &pos) in builders.iter_mut().zip(&positions) {
            b.push(&record[pos]);
        }
    }
    let columns = schema
        .columns()
        .iter()
        .zip(builders)
        .map(|(s, b)| Column {
            schema: s.clone(),
            data: b.finish(),
        })
        .collect();
    FlowTable::new(columns)
}

/// Reads one CSV file whose header must match `schema`. Cells that fail to
/// parse are kept as missing markers.
pub fn read_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<FlowTable> {
    read_csv_with(path, schema, CsvOptions::default())
}

pub fn read_csv_with(path: impl AsRef<Path>, schema: &Schema, opts: CsvOptions) -> Result<FlowTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(BufReader::with_capacity(1 << 20, file), path, schema, opts)
}

fn first_line(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    Ok(line.trim_end_matches(['\r', '\n']).to_string())
}

/// Parses every shard (concurrently) and concatenates them in manifest order.
pub fn union_shards(manifest: &ShardManifest, schema: &Schema) -> Result<FlowTable> {
    if manifest.paths.is_empty() {
        return Err(Error::Config("shard manifest has no paths".into()));
    }
    if !manifest.delimiter.is_ascii() {
        return Err(Error::Config("delimiter must be a single ASCII character".into()));
    }
    let opts = CsvOptions {
        has_header: manifest.expect_header,
        delimiter: manifest.delimiter as u8,
    };
    if manifest.expect_header {
        let reference = first_line(&manifest.paths[0])?;
        for path in &manifest.paths[1..] {
            if first_line(path)? != reference {
                return Err(Error::Data(format!(
                    "shard {} has a header different from {}",
                    path.display(),
                    manifest.paths[0].display()
                )));
            }
        }
    }
    let shards: Vec<Result<FlowTable>> = manifest
        .paths
        .par_iter()
        .map(|p| read_csv_with(p, schema, opts))
        .collect();
    let shards = shards.into_iter().collect::<Result<Vec<_>>>()?;
    if shards.len() == 1 {
        return Ok(shards.into_iter().next().expect("one shard"));
    }
    FlowTable::concat(&shards)
}

pub fn write_csv_to<W: Write>(table: &FlowTable, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(table.column_names())?;
    let mut row = Vec::with_capacity(table.columns().len());
    for r in 0..table.row_count() {
        row.clear();
        row.extend(table.columns().iter().map(|c| c.data.render(r)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Writes `table` with a header row. Reals use the shortest representation
/// that parses back to the same bits.
pub fn write_csv(table: &FlowTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(table, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSchema;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSchema::new("proto", ColumnKind::Categorical),
            ColumnSchema::new("bytes", ColumnKind::Numeric),
            ColumnSchema::new("attack", ColumnKind::LabelBinary),
        ])
        .unwrap()
    }

    fn read(text: &str) -> Result<FlowTable> {
        read_csv_from(text.as_bytes(), Path::new("mem.csv"), &schema(), CsvOptions::default())
    }

    #[test]
    fn reads_rows_and_columns() {
        let t = read("proto,bytes,attack\ntcp,10,1\nudp,20.5,0\ntcp,3,1\n").unwrap();
        assert_eq!(t.row_count(), 3);
        assert_eq!(
            t.column("bytes").unwrap().data,
            ColumnData::Numeric(vec![10.0, 20.5, 3.0])
        );
    }

    #[test]
    fn header_missing_proto_is_named() {
        let err = read("bytes,attack\n1,1\n").unwrap_err();
        match err {
            Error::HeaderMismatch { missing, .. } => assert_eq!(missing, vec!["proto"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn header_order_may_differ() {
        let t = read("attack,proto,bytes\n1,tcp,4\n").unwrap();
        assert_eq!(t.column("bytes").unwrap().data, ColumnData::Numeric(vec![4.0]));
    }

    #[test]
    fn unparsable_numeric_is_missing_not_dropped() {
        let t = read("proto,bytes,attack\ntcp,abc,1\nudp,nan,0\n,5,0\n").unwrap();
        assert_eq!(t.row_count(), 3);
        assert!(t.row_has_missing(0));
        assert!(t.row_has_missing(1));
        assert!(t.row_has_missing(2));
    }

    #[test]
    fn delimiter_cells_are_quoted() {
        let t = read("proto,bytes,attack\n\"a,b\",1,1\n").unwrap();
        let mut out = Vec::new();
        write_csv_to(&t, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "proto,bytes,attack\n\"a,b\",1,1\n");
    }

    #[test]
    fn empty_table_writes_header_only() {
        let t = FlowTable::empty(&schema());
        let mut out = Vec::new();
        write_csv_to(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "proto,bytes,attack\n");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_csv("/nonexistent/x.csv", &schema()), Err(Error::Io { .. })));
    }
}
