//! Wavefront OBJ export of cell geometry: one named object per nonempty
//! cell, polygonal faces wound with outward normals, vertices deduplicated
//! per cell.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::FormatError;
use crate::builder::PowerDiagram;

pub fn export_cells_obj(path: &Path, diagram: &PowerDiagram) -> Result<(), FormatError> {
    export_cells_obj_with_eps(path, diagram, 1e-9)
}

/// `dedup_eps` merges vertices within that absolute distance inside a cell.
pub fn export_cells_obj_with_eps(
    path: &Path,
    diagram: &PowerDiagram,
    dedup_eps: f64,
) -> Result<(), FormatError> {
    let Some(geometry) = diagram.cell_geometry.as_ref() else {
        return Err(FormatError::MissingGeometry);
    };
    let mut w = BufWriter::new(File::create(path)?);
    let mut vertex_base = 1usize; // OBJ indices are 1-based and global
    for (cell_id, geom) in geometry.iter().enumerate() {
        if geom.faces.is_empty() {
            continue;
        }
        writeln!(w, "o cell_{cell_id}")?;
        // Dedup vertices within the cell.
        let mut verts: Vec<[f64; 3]> = Vec::new();
        let mut face_indices: Vec<Vec<usize>> = Vec::new();
        for face in &geom.faces {
            let mut loop_idx = Vec::with_capacity(face.vertices.len());
            for &p in &face.vertices {
                let found = verts
                    .iter()
                    .position(|q| (0..3).all(|k| (q[k] - p[k]).abs() <= dedup_eps));
                let idx = match found {
                    Some(i) => i,
                    None => {
                        verts.push(p);
                        verts.len() - 1
                    }
                };
                // Collapsed duplicates can fold consecutive loop entries.
                if loop_idx.last() != Some(&idx) {
                    loop_idx.push(idx);
                }
            }
            if loop_idx.len() > 2 && loop_idx.first() == loop_idx.last() {
                loop_idx.pop();
            }
            if loop_idx.len() >= 3 {
                face_indices.push(loop_idx);
            }
        }
        for v in &verts {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for f in &face_indices {
            write!(w, "f")?;
            for &i in f {
                write!(w, " {}", vertex_base + i)?;
            }
            writeln!(w)?;
        }
        vertex_base += verts.len();
    }
    w.flush()?;
    Ok(())
}
