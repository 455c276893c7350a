use std::io::Write;
use std::path::Path;

use super::sparse::SparseSystem;
use crate::error::Result;

/// Writes the matrix in Matrix Market coordinate format (1-based indices,
/// explicit zeros skipped).
pub fn write_matrix_market(system: &SparseSystem, path: &Path) -> Result<()> {
    let p = &system.pattern;
    let entries: Vec<(usize, usize, f64)> = (0..p.n)
        .flat_map(|i| (p.row_ptr[i]..p.row_ptr[i + 1]).map(move |k| (i, k)))
        .filter(|&(_, k)| system.values[k] != 0.0)
        .map(|(i, k)| (i, p.col_idx[k], system.values[k]))
        .collect();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", p.n, p.n, entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    out.flush()?;
    Ok(())
}
