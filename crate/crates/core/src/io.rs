//! Artifact formats: binary checkpoints, NDJSON/CSV time series and JSON
//! reports. Every file starts with the same [`ArtifactHeader`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::ensemble::OrbitalEnsemble;
use crate::grid::{ComplexField, Grid};
use crate::nonlinearity::RhsMode;
use crate::potential::Potential;
use crate::{Error, Result, ARTIFACT_VERSION};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HFSC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub config_hash: String,
    pub artifact_version: String,
    pub grid: GridHeader,
    pub potential: Potential,
    pub mode: RhsMode,
}

impl ArtifactHeader {
    pub fn new(config_hash: &str, grid: &Grid, potential: &Potential, mode: RhsMode) -> Self {
        ArtifactHeader {
            config_hash: config_hash.to_string(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            grid: GridHeader {
                n: grid.n_points(),
                length: grid.length(),
            },
            potential: potential.clone(),
            mode,
        }
    }
}

/// Writes `HFSC`, the format version, a length-prefixed JSON header and then
/// every snapshot as `t, K, weights, (re, im)…`, little-endian.
pub fn write_checkpoint(path: &Path, header: &ArtifactHeader, snapshots: &[OrbitalEnsemble]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let json = serde_json::to_vec(header)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for snap in snapshots {
        if snap.grid().n_points() != header.grid.n {
            return Err(Error::GridMismatch);
        }
        w.write_all(&snap.time().to_le_bytes())?;
        w.write_all(&(snap.rank() as u32).to_le_bytes())?;
        for a in snap.weights() {
            w.write_all(&a.to_le_bytes())?;
        }
        for u in snap.orbitals() {
            for v in u.values() {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let got = r.read(&mut buf[filled..])?;
        if got == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::Format("truncated snapshot".into()));
        }
        filled += got;
    }
    Ok(true)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated snapshot".into()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Reads a checkpoint back into its header and snapshots.
pub fn read_checkpoint(path: &Path) -> Result<(ArtifactHeader, Vec<OrbitalEnsemble>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("missing magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let len = read_u32(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let header: ArtifactHeader = serde_json::from_slice(&json)?;
    let grid = Grid::new(header.grid.n, header.grid.length)?;
    let n = grid.n_points();
    let mut snapshots = Vec::new();
    loop {
        let mut tb = [0u8; 8];
        if !read_exact_or_eof(&mut r, &mut tb)? {
            break;
        }
        let t = f64::from_le_bytes(tb);
        let k = read_u32(&mut r)? as usize;
        let weights = read_f64s(&mut r, k)?;
        let mut orbitals = Vec::with_capacity(k);
        for _ in 0..k {
            let raw = read_f64s(&mut r, 2 * n)?;
            let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            orbitals.push(ComplexField::new(&grid, values)?);
        }
        snapshots.push(OrbitalEnsemble::new(weights, orbitals, t)?);
    }
    Ok((header, snapshots))
}

/// One NDJSON row: the record plus whether it is a finite-difference probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    #[serde(flatten)]
    pub record: DiagnosticsRecord,
    pub probe: bool,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ArtifactHeader,
}

pub fn write_ndjson(path: &Path, header: &ArtifactHeader, rows: &[RecordRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &HeaderLine { header: header.clone() })?;
    w.write_all(b"\n")?;
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ndjson(path: &Path) -> Result<(ArtifactHeader, Vec<RecordRow>)> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty diagnostics file".into()))??;
    let header: HeaderLine = serde_json::from_str(&first)?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok((header.header, rows))
}

pub const CSV_COLUMNS: [&str; 8] = [
    "t",
    "sup_norm",
    "l2_mass",
    "h10_x",
    "h01_z",
    "gram_drift",
    "boundary_mass_fraction",
    "probe",
];

/// CSV with `#`-prefixed header lines followed by a column row.
pub fn write_csv(path: &Path, header: &ArtifactHeader, rows: &[RecordRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash: {}", header.config_hash)?;
    writeln!(w, "# artifact_version: {}", header.artifact_version)?;
    writeln!(w, "# grid: n={} length={}", header.grid.n, header.grid.length)?;
    writeln!(w, "# potential: {}", serde_json::to_string(&header.potential)?)?;
    writeln!(w, "# mode: {}", header.mode.name())?;
    writeln!(w, "{}", CSV_COLUMNS.join(","))?;
    for row in rows {
        let r = &row.record;
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.t, r.sup_norm, r.l2_mass, r.h10_x, r.h01_z, r.gram_drift, r.boundary_mass_fraction, row.probe as u8
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (ArtifactHeader, Vec<OrbitalEnsemble>) {
        let g = Grid::new(16, 4.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x, -x * x));
        let v = ComplexField::from_fn(&g, |x| Complex64::new(1.0 / (1.0 + x * x), 0.5));
        let a = OrbitalEnsemble::new(vec![1.0, 0.25], vec![u, v], 1.0).unwrap();
        let b = a.free_propagate(0.5);
        let header = ArtifactHeader::new("abc", &g, &Potential::dirac(1.5), RhsMode::HartreeFock);
        (header, vec![a, b])
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let (header, snaps) = sample();
        write_checkpoint(&path, &header, &snaps).unwrap();
        let (h2, s2) = read_checkpoint(&path).unwrap();
        assert_eq!(header, h2);
        assert_eq!(s2.len(), 2);
        for (a, b) in snaps.iter().zip(&s2) {
            assert_eq!(a.time().to_bits(), b.time().to_bits());
            assert_eq!(a.weights(), b.weights());
            for (u, v) in a.orbitals().iter().zip(b.orbitals()) {
                assert_eq!(u.values(), v.values());
            }
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"HFSC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let (header, snaps) = sample();
        write_checkpoint(&path, &header, &snaps).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Format(_))));
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Format(_))));
    }

    #[test]
    fn ndjson_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ndjson");
        let (header, snaps) = sample();
        let rows: Vec<RecordRow> = snaps
            .iter()
            .map(|s| RecordRow {
                record: crate::diagnostics::record(s, &snaps[0], 0.125),
                probe: false,
            })
            .collect();
        write_ndjson(&path, &header, &rows).unwrap();
        let (h2, r2) = read_ndjson(&path).unwrap();
        assert_eq!(h2, header);
        assert_eq!(r2, rows);
        let csv = dir.path().join("d.csv");
        write_csv(&csv, &header, &rows).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("# config_hash: abc\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }
}
