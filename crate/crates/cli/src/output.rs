//! Edge and coordinate files.
//!
//! Text files start with `%` comment lines. The binary edge format is a
//! header of four little-endian u64 values (magic, version, n, m) followed by
//! m pairs of little-endian ids, u32 when n < 2^31 and u64 otherwise.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::args::Format;

pub const BINARY_MAGIC: u64 = u64::from_le_bytes(*b"GIRGEDGE");
pub const BINARY_VERSION: u64 = 1;

/// Key/value lines written as `% key value`.
pub type Provenance = Vec<(&'static str, String)>;

/// Writes through a temporary file in the target directory that replaces
/// `path` only after `body` succeeded, so failures leave no partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<&mut fs::File>) -> io::Result<()>) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::with_capacity(1 << 20, tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_provenance(w: &mut impl Write, prov: &Provenance) -> io::Result<()> {
    for (k, v) in prov {
        writeln!(w, "% {k} {v}")?;
    }
    Ok(())
}

pub fn write_edges(path: &Path, format: Format, n: usize, prov: &Provenance, edges: &[(u32, u32)]) -> io::Result<()> {
    write_atomic(path, |w| match format {
        Format::Edgelist => {
            write_provenance(w, prov)?;
            for &(u, v) in edges {
                writeln!(w, "{u} {v}")?;
            }
            Ok(())
        }
        Format::Binary => {
            for x in [BINARY_MAGIC, BINARY_VERSION, n as u64, edges.len() as u64] {
                w.write_all(&x.to_le_bytes())?;
            }
            let wide = n >= 1 << 31;
            for &(u, v) in edges {
                if wide {
                    w.write_all(&(u as u64).to_le_bytes())?;
                    w.write_all(&(v as u64).to_le_bytes())?;
                } else {
                    w.write_all(&u.to_le_bytes())?;
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Ok(())
        }
    })
}

/// One line per vertex: the weight followed by the position coordinates.
pub fn write_girg_coords(path: &Path, prov: &Provenance, weights: &[f64], positions: &[f64], dim: usize) -> io::Result<()> {
    write_atomic(path, |w| {
        write_provenance(w, prov)?;
        writeln!(w, "% weight x1..x{dim}")?;
        for (wt, x) in weights.iter().zip(positions.chunks_exact(dim)) {
            write!(w, "{wt}")?;
            for c in x {
                write!(w, " {c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// One line per vertex: radius and angle.
pub fn write_hrg_coords(path: &Path, prov: &Provenance, radii: &[f64], angles: &[f64]) -> io::Result<()> {
    write_atomic(path, |w| {
        write_provenance(w, prov)?;
        writeln!(w, "% radius angle")?;
        for (r, a) in radii.iter().zip(angles) {
            writeln!(w, "{r} {a}")?;
        }
        Ok(())
    })
}
