//! CNSF1 volume files and CNSS1 surface files.
//!
//! ```text
//! CNSF1 N1 N2 Nz L1 L2 b\n   then N1·N2·Nz little-endian f64, y fastest
//! CNSS1 N1 N2 L1 L2\n        then N1·N2 little-endian f64
//! ```
//!
//! Lengths are written in shortest round-trip form, so a file read back
//! reproduces the grid bit for bit. Fields are stored level-major in memory
//! and reordered on the way through.

use crate::error::{CnsError, Result};
use crate::grid::{ScalarField, SlabGrid, SurfaceField};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub const FIELD_MAGIC: &str = "CNSF1";
pub const SURFACE_MAGIC: &str = "CNSS1";
const MAX_HEADER: usize = 512;

pub fn encode_field(f: &ScalarField) -> Vec<u8> {
    let g = f.grid();
    let mut out = format!("{FIELD_MAGIC} {} {} {} {} {} {}\n", g.n1, g.n2, g.nz, g.l1, g.l2, g.b).into_bytes();
    out.reserve(8 * g.len());
    for i1 in 0..g.n1 {
        for i2 in 0..g.n2 {
            for k in 0..g.nz {
                out.extend_from_slice(&f.at(i1, i2, k).to_le_bytes());
            }
        }
    }
    out
}

pub fn encode_surface(s: &SurfaceField) -> Vec<u8> {
    let g = s.grid();
    let mut out = format!("{SURFACE_MAGIC} {} {} {} {}\n", g.n1, g.n2, g.l1, g.l2).into_bytes();
    for x in s.values() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn split_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(Vec<&'a str>, &'a [u8])> {
    if !bytes.starts_with(magic.as_bytes()) {
        let seen = String::from_utf8_lossy(&bytes[..bytes.len().min(5)]).into_owned();
        return Err(CnsError::Format(format!("bad magic: expected {magic}, found {seen:?}")));
    }
    let end = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| CnsError::Format("header line not terminated".into()))?;
    let head = std::str::from_utf8(&bytes[..end]).map_err(|_| CnsError::Format("header is not UTF-8".into()))?;
    Ok((head.split_ascii_whitespace().skip(1).collect(), &bytes[end + 1..]))
}

fn parse<T: std::str::FromStr>(tok: &[&str], i: usize, name: &str) -> Result<T> {
    tok.get(i)
        .ok_or_else(|| CnsError::Format(format!("header missing {name}")))?
        .parse()
        .map_err(|_| CnsError::Format(format!("header field {name} unreadable: {:?}", tok[i])))
}

/// Decodes `n` little-endian values. A payload whose values are all of
/// ordinary magnitude only when byte-swapped is reported as big-endian.
fn decode_payload(payload: &[u8], n: usize) -> Result<Vec<f64>> {
    if payload.len() < 8 * n {
        return Err(CnsError::Format(format!("truncated payload: {} of {} bytes", payload.len(), 8 * n)));
    }
    if payload.len() > 8 * n {
        return Err(CnsError::Format(format!("trailing bytes: payload has {} bytes, expected {}", payload.len(), 8 * n)));
    }
    let chunk = |c: &[u8]| -> [u8; 8] { c.try_into().expect("8-byte chunk") };
    let le: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(chunk(c))).collect();
    if le.iter().all(|x| plausible(*x)) {
        return Ok(le);
    }
    if payload.chunks_exact(8).all(|c| plausible(f64::from_be_bytes(chunk(c)))) {
        return Err(CnsError::Format("payload is big-endian; only little-endian float64 is accepted".into()));
    }
    if le.iter().all(|x| x.is_finite()) {
        return Ok(le);
    }
    Err(CnsError::Format("payload holds non-finite values".into()))
}

fn plausible(x: f64) -> bool {
    x == 0.0 || (x.is_finite() && (1e-250..1e250).contains(&x.abs()))
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let (tok, payload) = split_header(bytes, FIELD_MAGIC)?;
    if tok.len() != 6 {
        return Err(CnsError::Format(format!("CNSF1 header has {} fields, expected 6", tok.len())));
    }
    let g = SlabGrid::new(
        parse(&tok, 0, "N1")?,
        parse(&tok, 1, "N2")?,
        parse(&tok, 2, "Nz")?,
        parse(&tok, 3, "L1")?,
        parse(&tok, 4, "L2")?,
        parse(&tok, 5, "b")?,
    )?;
    let vals = decode_payload(payload, g.len())?;
    let mut data = vec![0.0; g.len()];
    let mut it = vals.into_iter();
    for i1 in 0..g.n1 {
        for i2 in 0..g.n2 {
            for k in 0..g.nz {
                data[g.idx(i1, i2, k)] = it.next().expect("length checked");
            }
        }
    }
    ScalarField::new(g, data)
}

/// Surface header values (N1, N2, L1, L2) and the payload.
pub fn decode_surface_raw(bytes: &[u8]) -> Result<(usize, usize, f64, f64, Vec<f64>)> {
    let (tok, payload) = split_header(bytes, SURFACE_MAGIC)?;
    if tok.len() != 4 {
        return Err(CnsError::Format(format!("CNSS1 header has {} fields, expected 4", tok.len())));
    }
    let (n1, n2): (usize, usize) = (parse(&tok, 0, "N1")?, parse(&tok, 1, "N2")?);
    let (l1, l2): (f64, f64) = (parse(&tok, 2, "L1")?, parse(&tok, 3, "L2")?);
    let vals = decode_payload(payload, n1.checked_mul(n2).ok_or_else(|| CnsError::Format("header sizes overflow".into()))?)?;
    Ok((n1, n2, l1, l2, vals))
}

/// Decodes a surface that must live on the horizontal grid of `grid`.
pub fn decode_surface(bytes: &[u8], grid: &SlabGrid) -> Result<SurfaceField> {
    let (n1, n2, l1, l2, vals) = decode_surface_raw(bytes)?;
    if (n1, n2) != (grid.n1, grid.n2) || l1.to_bits() != grid.l1.to_bits() || l2.to_bits() != grid.l2.to_bits() {
        return Err(CnsError::Format(format!(
            "surface grid {n1}x{n2} on [{l1}, {l2}] does not match {}x{} on [{}, {}]",
            grid.n1, grid.n2, grid.l1, grid.l2
        )));
    }
    SurfaceField::new(*grid, vals)
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    write_bytes(path, &encode_field(f))
}

pub fn write_surface(path: &Path, s: &SurfaceField) -> Result<()> {
    write_bytes(path, &encode_surface(s))
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    decode_field(&std::fs::read(path)?)
}

pub fn read_surface(path: &Path, grid: &SlabGrid) -> Result<SurfaceField> {
    decode_surface(&std::fs::read(path)?, grid)
}

/// Header of a volume file without reading the payload.
pub fn peek_field_grid(path: &Path) -> Result<SlabGrid> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = Vec::new();
    r.by_ref().take(MAX_HEADER as u64).read_until(b'\n', &mut line)?;
    let (tok, _) = split_header(&line, FIELD_MAGIC)?;
    if tok.len() != 6 {
        return Err(CnsError::Format(format!("CNSF1 header has {} fields, expected 6", tok.len())));
    }
    SlabGrid::new(
        parse(&tok, 0, "N1")?,
        parse(&tok, 1, "N2")?,
        parse(&tok, 2, "Nz")?,
        parse(&tok, 3, "L1")?,
        parse(&tok, 4, "L2")?,
        parse(&tok, 5, "b")?,
    )
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}
