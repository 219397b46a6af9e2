//! Text format for partitions.
//!
//! ```text
//! nvb-mesh v1
//! V <count>
//! <x> <y> <boundary_flag>
//! ...
//! T <count>
//! <v0> <v1> <v2>            (v0 = newest vertex)
//! ...
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the identical f64, so writer and reader round-trip bit-exactly.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::{MeshForest, Partition};

pub const HEADER: &str = "nvb-mesh v1";

pub fn write_mesh(
    forest: &MeshForest,
    partition: &Partition,
    out: &mut impl Write,
) -> Result<()> {
    if !forest.owns(partition) {
        return Err(Error::ForeignPartition);
    }
    let vertex_ids = forest.vertex_ids_of(partition);
    let local: HashMap<usize, usize> = vertex_ids
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    writeln!(out, "{HEADER}")?;
    writeln!(out, "V {}", vertex_ids.len())?;
    for &v in &vertex_ids {
        let vert = &forest.vertices[v];
        writeln!(
            out,
            "{} {} {}",
            vert.x,
            vert.y,
            if vert.on_boundary { 1 } else { 0 }
        )?;
    }
    writeln!(out, "T {}", partition.len())?;
    for id in partition.iter() {
        let v = forest.node(id).vertices;
        writeln!(out, "{} {} {}", local[&v[0]], local[&v[1]], local[&v[2]])?;
    }
    Ok(())
}

/// Parse a mesh file into a fresh forest whose roots are the stored
/// triangles. Stored boundary flags must agree with the flags derived from
/// the triangulation.
pub fn read_mesh(input: &mut impl BufRead) -> Result<MeshForest> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::MeshFormat("unexpected end of file".into()))?
            .map_err(Error::Io)
    };
    let header = next()?;
    if header.trim() != HEADER {
        return Err(Error::MeshFormat(format!("bad header {header:?}")));
    }
    let n_vertices = parse_count(&next()?, "V")?;
    let mut coords = Vec::with_capacity(n_vertices);
    let mut flags = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let line = next()?;
        let mut it = line.split_whitespace();
        let x: f64 = parse_field(it.next(), "vertex x")?;
        let y: f64 = parse_field(it.next(), "vertex y")?;
        let flag: u8 = parse_field(it.next(), "boundary flag")?;
        coords.push([x, y]);
        flags.push(flag != 0);
    }
    let n_tris = parse_count(&next()?, "T")?;
    let mut tris = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let line = next()?;
        let mut it = line.split_whitespace();
        let v0: usize = parse_field(it.next(), "v0")?;
        let v1: usize = parse_field(it.next(), "v1")?;
        let v2: usize = parse_field(it.next(), "v2")?;
        tris.push([v0, v1, v2]);
    }
    let labels = vec![0; tris.len()];
    let forest = MeshForest::from_initial(&coords, &tris, &labels)?;
    for (i, vert) in forest.vertices.iter().enumerate() {
        if vert.on_boundary != flags[i] {
            return Err(Error::MeshFormat(format!(
                "stored boundary flag of vertex {i} disagrees with the triangulation"
            )));
        }
    }
    Ok(forest)
}

fn parse_count(line: &str, tag: &str) -> Result<usize> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next()) {
        (Some(t), Some(n)) if t == tag => n
            .parse()
            .map_err(|_| Error::MeshFormat(format!("bad {tag} count {n:?}"))),
        _ => Err(Error::MeshFormat(format!(
            "expected \"{tag} <count>\", got {line:?}"
        ))),
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::MeshFormat(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::MeshFormat(format!("malformed {what}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square;

    #[test]
    fn round_trip_is_bit_exact_after_refinement() {
        let mut f = unit_square();
        f.refine_marked(&[0]).unwrap();
        f.conforming_closure();
        f.refine_uniform(2);
        let mut first = Vec::new();
        write_mesh(&f, &f.active_partition(), &mut first).unwrap();

        let g = read_mesh(&mut first.as_slice()).unwrap();
        assert_eq!(g.n_roots(), f.n_active());
        let mut second = Vec::new();
        write_mesh(&g, &g.active_partition(), &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_bad_header_and_flags() {
        assert!(matches!(
            read_mesh(&mut "quad-mesh v1\n".as_bytes()),
            Err(Error::MeshFormat(_))
        ));
        let text = "nvb-mesh v1\nV 4\n0 0 1\n1 0 1\n1 1 1\n0 1 0\nT 2\n1 2 0\n3 0 2\n";
        assert!(matches!(
            read_mesh(&mut text.as_bytes()),
            Err(Error::MeshFormat(_))
        ));
    }
}
