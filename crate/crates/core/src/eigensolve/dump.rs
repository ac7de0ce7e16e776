//! Binary eigenvector dumps: a little-endian `u64` header
//! `[dim, n_1, …, n_dim, components]` followed by the `f64` values.

use std::io::{self, Read, Write};
use std::path::Path;

use super::grid::Grid;
use super::EigenPair;

pub fn write_eigenvector(path: &Path, grid: &Grid, pair: &EigenPair) -> io::Result<()> {
    let mut buf = Vec::with_capacity(8 * (pair.vector.len() + 4));
    buf.extend_from_slice(&(grid.dim() as u64).to_le_bytes());
    for n in grid.shape() {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(pair.components as u64).to_le_bytes());
    for v in &pair.vector {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&buf)?;
    std::fs::rename(tmp, path)
}

/// Returns the grid shape, component count and values.
pub fn read_eigenvector(path: &Path) -> io::Result<(Vec<usize>, usize, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || io::Error::new(io::ErrorKind::InvalidData, "truncated eigenvector dump");
    let word = |i: usize| -> io::Result<[u8; 8]> {
        bytes.get(8 * i..8 * i + 8).map(|s| s.try_into().unwrap()).ok_or_else(bad)
    };
    let dim = u64::from_le_bytes(word(0)?) as usize;
    if !(1..=2).contains(&dim) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "dimension must be 1 or 2"));
    }
    let shape: Vec<usize> = (1..=dim).map(|i| word(i).map(|w| u64::from_le_bytes(w) as usize)).collect::<io::Result<_>>()?;
    let components = u64::from_le_bytes(word(dim + 1)?) as usize;
    let len = shape.iter().product::<usize>() * components;
    let start = dim + 2;
    let values = (0..len).map(|i| word(start + i).map(f64::from_le_bytes)).collect::<io::Result<_>>()?;
    Ok((shape, components, values))
}
