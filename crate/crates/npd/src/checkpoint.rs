//! Binary checkpoints: fixed header plus raw little-endian coefficient
//! arrays, for bit-exact restarts.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic            8 bytes   "NPDCHKPT"
//! version          u32       1
//! resolution       u32       points per axis
//! box_length       f64
//! dealias_fraction f64
//! species_count    u32
//! time             f64
//! diffusivity      f64
//! valences         species_count x f64
//! coefficients     species_count x N^3 x (f64 re, f64 im)
//! ```
//!
//! Coefficients are stored row-major over storage indices `(ix, iy, iz)`;
//! index `i` along an axis carries integer wavenumber `i` for `i < N/2` and
//! `i - N` otherwise.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use ndrustfft::Complex;

use crate::error::Error;
use crate::grid::{GridSpec, SpectralField};
use crate::model::{NpdState, SpeciesParams};
use crate::Result;

const MAGIC: &[u8; 8] = b"NPDCHKPT";
const VERSION: u32 = 1;

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Write a state to a checkpoint file.
pub fn write_checkpoint(path: &Path, state: &NpdState) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let grid = *state.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.resolution() as u32).to_le_bytes())?;
    w.write_all(&grid.box_length().to_le_bytes())?;
    w.write_all(&grid.dealias_fraction().to_le_bytes())?;
    w.write_all(&(state.species_count() as u32).to_le_bytes())?;
    w.write_all(&state.time().to_le_bytes())?;
    w.write_all(&state.params().diffusivity().to_le_bytes())?;
    for z in state.params().valences() {
        w.write_all(&z.to_le_bytes())?;
    }
    for c in state.concentrations() {
        for v in c.coeffs().iter() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Read a state back; validates magic, version, and dimensions.
pub fn read_checkpoint(path: &Path) -> Result<NpdState> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad(path, "not a checkpoint file (bad magic)"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(path, format!("unsupported version {version}")));
    }
    let resolution = read_u32(&mut r)? as usize;
    let box_length = read_f64(&mut r)?;
    let dealias = read_f64(&mut r)?;
    let species = read_u32(&mut r)? as usize;
    let time = read_f64(&mut r)?;
    let diffusivity = read_f64(&mut r)?;
    if species == 0 || species > 1024 {
        return Err(bad(path, format!("implausible species count {species}")));
    }
    let grid = GridSpec::new(box_length, resolution, dealias)?;
    let mut valences = Vec::with_capacity(species);
    for _ in 0..species {
        valences.push(read_f64(&mut r)?);
    }
    let params = SpeciesParams::new(valences, diffusivity)?;
    let n = resolution;
    let mut fields = Vec::with_capacity(species);
    // Bulk-read each field; the element count is n^3 complex values.
    let mut buf = vec![0u8; n * n * n * 16];
    for _ in 0..species {
        r.read_exact(&mut buf)
            .map_err(|e| bad(path, format!("truncated coefficient block: {e}")))?;
        let mut data = Array3::zeros((n, n, n));
        for (slot, chunk) in data.iter_mut().zip(buf.chunks_exact(16)) {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            *slot = Complex::new(re, im);
        }
        fields.push(SpectralField::from_coeffs(grid, data)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(bad(path, "trailing bytes after coefficient blocks"));
    }
    let mut state = NpdState::new(0.0, fields, params)?;
    state.set_time(time);
    Ok(state)
}
