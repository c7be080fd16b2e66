//! Output helpers: JSON documents, JSON lines and PPM snapshots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::model::{Configuration, RED};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Binary PPM (P6), one pixel per cell: red `(255,0,0)`, blue `(0,0,255)`.
pub fn write_ppm<W: Write>(mut out: W, grid: &TorusGrid, config: &Configuration) -> std::io::Result<()> {
    let n = grid.side();
    write!(out, "P6\n{n} {n}\n255\n")?;
    let pixels: Vec<u8> = config
        .colors()
        .iter()
        .flat_map(|&c| if c == RED { [255, 0, 0] } else { [0, 0, 255] })
        .collect();
    out.write_all(&pixels)
}

pub fn write_ppm_file(path: &Path, grid: &TorusGrid, config: &Configuration) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_ppm(&mut w, grid, config).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
