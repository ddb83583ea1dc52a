//! File formats: data and label CSVs, graph manifests, chain and attempt
//! logs, similarity matrices.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abc::{AbcRun, AttemptRecord};
use crate::error::{Error, Result};
use crate::gibbs::GibbsRun;
use crate::kernels::Graph;
use crate::partition::{Partition, SimilarityMatrix};

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}:{line}: {msg}", path.display()))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?)
}

/// Reads a numeric CSV with one observation per row. A first row that does
/// not parse as numbers is taken as a header.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(path, i + 1, "non-finite value"));
                }
                if let Some(first) = rows.first() {
                    let first: &Vec<f64> = first;
                    if first.len() != row.len() {
                        return Err(parse_err(
                            path,
                            i + 1,
                            format!("expected {} columns, found {}", first.len(), row.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(parse_err(path, i + 1, e)),
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("data file"));
    }
    Ok(rows)
}

pub fn read_scalar_data(path: &Path) -> Result<Vec<f64>> {
    let rows = read_matrix(path)?;
    if rows[0].len() != 1 {
        return Err(parse_err(path, 1, format!("expected 1 column, found {}", rows[0].len())));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_bivariate_data(path: &Path) -> Result<Vec<[f64; 2]>> {
    let rows = read_matrix(path)?;
    if rows[0].len() != 2 {
        return Err(parse_err(path, 1, format!("expected 2 columns, found {}", rows[0].len())));
    }
    Ok(rows.into_iter().map(|r| [r[0], r[1]]).collect())
}

pub fn write_matrix(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one integer label per row (optional header) as a partition.
pub fn read_labels(path: &Path) -> Result<Partition> {
    let mut labels = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("");
        match field.parse::<i64>() {
            Ok(v) => labels.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(parse_err(path, i + 1, e)),
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("label file"));
    }
    Partition::canonicalize(&labels)
}

pub fn write_labels(path: &Path, partition: &Partition) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label"])?;
    for l in partition.labels() {
        w.write_record([l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated `i j` pairs, one edge per line; `#` starts a comment.
pub fn read_edge_list(path: &Path, nodes: usize) -> Result<Graph> {
    let file = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let ids: Vec<&str> = content.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(parse_err(path, i + 1, "expected two node ids"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| parse_err(path, i + 1, e));
        edges.push((parse(ids[0])?, parse(ids[1])?));
    }
    Graph::from_edges(nodes, &edges)
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, j) in graph.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

/// Manifest: first non-comment line is the node count, then one edge-list
/// path per line, relative to the manifest's directory unless absolute.
pub fn read_graph_manifest(path: &Path) -> Result<(usize, Vec<Graph>)> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, first) = lines.next().ok_or(Error::Empty("graph manifest"))?;
    let nodes: usize = first.parse().map_err(|e| parse_err(path, line, e))?;
    let mut graphs = Vec::new();
    for (_, entry) in lines {
        let p = PathBuf::from(entry);
        let p = if p.is_absolute() { p } else { base.join(p) };
        graphs.push(read_edge_list(&p, nodes)?);
    }
    if graphs.is_empty() {
        return Err(Error::Empty("graph manifest"));
    }
    Ok((nodes, graphs))
}

/// Writes `graph_XXXX.txt` edge lists and `manifest.txt` into `dir`.
pub fn write_graph_bundle(dir: &Path, nodes: usize, graphs: &[Graph]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.txt");
    let mut m = BufWriter::new(File::create(&manifest)?);
    writeln!(m, "{nodes}")?;
    for (i, g) in graphs.iter().enumerate() {
        let name = format!("graph_{i:04}.txt");
        write_edge_list(&dir.join(&name), g)?;
        writeln!(m, "{name}")?;
    }
    m.flush()?;
    Ok(manifest)
}

/// One row of a chain file. Marginal samplers leave the ABC columns empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub iteration: usize,
    pub labels: Vec<usize>,
    pub distance: Option<f64>,
    pub attempts: Option<u64>,
    pub epsilon: Option<f64>,
    pub seconds: f64,
}

impl ChainRow {
    pub fn from_abc(run: &AbcRun) -> Vec<ChainRow> {
        run.kept()
            .iter()
            .map(|s| ChainRow {
                iteration: s.iteration,
                labels: s.partition.labels().to_vec(),
                distance: Some(s.distance),
                attempts: Some(s.attempts),
                epsilon: Some(s.epsilon),
                seconds: s.seconds,
            })
            .collect()
    }

    pub fn from_gibbs<P>(run: &GibbsRun<P>) -> Vec<ChainRow> {
        run.kept()
            .iter()
            .map(|s| ChainRow {
                iteration: s.iteration,
                labels: s.partition.labels().to_vec(),
                distance: None,
                attempts: None,
                epsilon: None,
                seconds: s.seconds,
            })
            .collect()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns: `iteration, x0 .. x{n-1}, distance, attempts, epsilon, seconds`.
pub fn write_chain(path: &Path, rows: &[ChainRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.labels.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["distance", "attempts", "epsilon", "seconds"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        if r.labels.len() != n {
            return Err(Error::SizeMismatch {
                left: n,
                right: r.labels.len(),
            });
        }
        let mut rec = vec![r.iteration.to_string()];
        rec.extend(r.labels.iter().map(|l| l.to_string()));
        rec.extend([opt(r.distance), opt(r.attempts), opt(r.epsilon), r.seconds.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<Vec<ChainRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let width = r.headers()?.len();
    if width < 6 {
        return Err(parse_err(path, 1, "chain file needs iteration, labels and 4 trailing columns"));
    }
    let n = width - 5;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let field = |k: usize| record.get(k).unwrap_or("");
        let num = |k: usize| -> Result<Option<f64>> {
            match field(k) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|e| parse_err(path, line, e)),
            }
        };
        let labels = (1..=n)
            .map(|k| field(k).parse::<usize>().map_err(|e| parse_err(path, line, e)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(ChainRow {
            iteration: field(0).parse().map_err(|e| parse_err(path, line, e))?,
            labels,
            distance: num(n + 1)?,
            attempts: match field(n + 2) {
                "" => None,
                s => Some(s.parse().map_err(|e| parse_err(path, line, e))?),
            },
            epsilon: num(n + 3)?,
            seconds: num(n + 4)?.unwrap_or(0.0),
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("chain file"));
    }
    Ok(rows)
}

pub fn write_attempts(path: &Path, records: &[AttemptRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_attempts(path: &Path) -> Result<Vec<AttemptRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

pub fn write_similarity(path: &Path, sim: &SimilarityMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in sim.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
