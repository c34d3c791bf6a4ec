//! On-disk formats.
//!
//! `.emb`: one JSON header line `{"n":..,"d":..}` then n*d little-endian f32, row-major.
//! Votes and labels: headerless integer CSV, one point per row.
//! Posteriors: one probability per line, shortest round-trip decimal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{bail, Error, Result};
use crate::votes::{LabelVector, VoteMatrix};

#[derive(Serialize, Deserialize)]
struct EmbHeader {
    n: usize,
    d: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embeddings<R: BufRead>(mut r: R) -> Result<EmbeddingSet> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(|e| Error::Format(format!("reading header: {e}")))?;
    if line.last() != Some(&b'\n') {
        bail!(Format, "missing embedding header line");
    }
    let header: EmbHeader = serde_json::from_slice(&line[..line.len() - 1])
        .map_err(|e| Error::Format(format!("bad embedding header: {e}")))?;
    let (n, d) = (header.n, header.d);
    let want = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::Format("embedding header too large".into()))?;
    let mut payload = Vec::with_capacity(want);
    r.read_to_end(&mut payload).map_err(|e| Error::Format(format!("reading payload: {e}")))?;
    if payload.len() < want {
        bail!(Format, "truncated payload: {} bytes, expected {}", payload.len(), want);
    }
    if payload.len() > want {
        bail!(Format, "trailing bytes after payload: {} bytes, expected {}", payload.len(), want);
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    EmbeddingSet::new(n, d, data)
}

pub fn write_embeddings<W: Write>(mut w: W, emb: &EmbeddingSet) -> std::io::Result<()> {
    let header = serde_json::to_string(&EmbHeader { n: emb.n(), d: emb.d() })?;
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(emb.d() * 4);
    for i in 0..emb.n() {
        buf.clear();
        for &x in emb.row(i) {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    read_embeddings(open(path)?).map_err(|e| prefix(path, e))
}

pub fn save_embeddings(path: &Path, emb: &EmbeddingSet) -> Result<()> {
    let mut w = create(path)?;
    write_embeddings(&mut w, emb).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(s) => Error::Format(format!("{}: {s}", path.display())),
        Error::InvalidInput(s) => Error::InvalidInput(format!("{}: {s}", path.display())),
        other => other,
    }
}

fn read_int_rows<R: Read>(r: R) -> Result<Vec<Vec<i64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("row {i}: {e}")))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v: i64 = field
                .parse()
                .map_err(|_| Error::Format(format!("entry at (row {i}, col {j}) is not an integer: '{field}'")))?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!(Format, "no rows");
    }
    Ok(rows)
}

pub fn read_votes<R: Read>(r: R) -> Result<VoteMatrix> {
    let rows = read_int_rows(r)?;
    let m = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * m);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(-1..=1).contains(&v) {
                bail!(Format, "vote at (row {i}, col {j}) is {v}, expected -1, 0 or 1");
            }
            data.push(v as i8);
        }
    }
    VoteMatrix::new(rows.len(), m, data)
}

pub fn write_votes<W: Write>(mut w: W, votes: &VoteMatrix) -> std::io::Result<()> {
    let mut line = String::new();
    for i in 0..votes.n() {
        line.clear();
        for (j, v) in votes.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn load_votes(path: &Path) -> Result<VoteMatrix> {
    read_votes(open(path)?).map_err(|e| prefix(path, e))
}

pub fn save_votes(path: &Path, votes: &VoteMatrix) -> Result<()> {
    let mut w = create(path)?;
    write_votes(&mut w, votes).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_labels<R: Read>(r: R) -> Result<LabelVector> {
    let rows = read_int_rows(r)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != 1 {
            bail!(Format, "label row {i} has {} columns, expected 1", row.len());
        }
        if row[0] != 1 && row[0] != -1 {
            bail!(Format, "label at (row {i}, col 0) is {}, expected -1 or 1", row[0]);
        }
        out.push(row[0] as i8);
    }
    LabelVector::new(out)
}

pub fn write_labels<W: Write>(mut w: W, labels: &[i8]) -> std::io::Result<()> {
    for y in labels {
        writeln!(w, "{y}")?;
    }
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    read_labels(open(path)?).map_err(|e| prefix(path, e))
}

pub fn save_labels(path: &Path, labels: &[i8]) -> Result<()> {
    let mut w = create(path)?;
    write_labels(&mut w, labels).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_posteriors<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("row {i}: {e}")))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let q: f64 = t.parse().map_err(|_| Error::Format(format!("posterior at row {i} is not a number: '{t}'")))?;
        if !(0.0..=1.0).contains(&q) {
            bail!(Format, "posterior at row {i} is outside [0, 1]: {q}");
        }
        out.push(q);
    }
    if out.is_empty() {
        bail!(Format, "no rows");
    }
    Ok(out)
}

pub fn write_posteriors<W: Write>(mut w: W, q: &[f64]) -> std::io::Result<()> {
    for x in q {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn load_posteriors(path: &Path) -> Result<Vec<f64>> {
    read_posteriors(open(path)?).map_err(|e| prefix(path, e))
}

pub fn save_posteriors(path: &Path, q: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    write_posteriors(&mut w, q).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// Pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = open(path)?;
    serde_json::from_reader(r).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_bytes_round_trip() {
        let emb = EmbeddingSet::new(2, 3, vec![1.0, -0.5, 0.25, 3.0, 1e-3, 7.0]).unwrap();
        let mut a = Vec::new();
        write_embeddings(&mut a, &emb).unwrap();
        assert!(a.starts_with(b"{\"n\":2,\"d\":3}\n"));
        let back = read_embeddings(&a[..]).unwrap();
        let mut b = Vec::new();
        write_embeddings(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_payload_is_reported() {
        let emb = EmbeddingSet::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut a = Vec::new();
        write_embeddings(&mut a, &emb).unwrap();
        a.truncate(a.len() - 3);
        let e = read_embeddings(&a[..]).unwrap_err();
        assert!(e.to_string().contains("truncated payload"), "{e}");
    }

    #[test]
    fn nan_entry_names_row() {
        let mut a = b"{\"n\":2,\"d\":1}\n".to_vec();
        a.extend_from_slice(&1f32.to_le_bytes());
        a.extend_from_slice(&f32::NAN.to_le_bytes());
        let e = read_embeddings(&a[..]).unwrap_err();
        assert!(e.to_string().contains("row 1"), "{e}");
    }

    #[test]
    fn vote_csv_errors() {
        assert!(read_votes(&b""[..]).unwrap_err().to_string().contains("no rows"));
        let e = read_votes(&b"1,0\n0,2\n"[..]).unwrap_err().to_string();
        assert!(e.contains("(row 1, col 1)"), "{e}");
    }

    #[test]
    fn vote_csv_round_trip() {
        let src = b"1,0,-1\n0,0,1\n";
        let v = read_votes(&src[..]).unwrap();
        let mut out = Vec::new();
        write_votes(&mut out, &v).unwrap();
        assert_eq!(&out[..], &src[..]);
    }

    #[test]
    fn posterior_text_round_trips_exactly() {
        let q = vec![0.1, 1.0 / 3.0, 0.9391304347826087, 0.0, 1.0];
        let mut out = Vec::new();
        write_posteriors(&mut out, &q).unwrap();
        assert_eq!(read_posteriors(&out[..]).unwrap(), q);
    }
}
