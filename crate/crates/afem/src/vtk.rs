//! Solution export: a legacy-VTK ASCII writer for visualization and a
//! plain-text snapshot format that round-trips mesh + fields losslessly.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::coupled::CoupledState;
use crate::estimator::IndicatorField;
use crate::mesh::{Mesh, MeshError};

/// A solved iterate frozen to plain data, suitable for storage and later
/// conversion to VTK.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub mesh: Mesh,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
    pub velocity: Vec<[f64; 2]>,
    pub indicator_heat: Vec<f64>,
    pub indicator_darcy: Vec<f64>,
    pub indicator_total: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(mesh: &Mesh, state: &CoupledState, indicators: &IndicatorField) -> Snapshot {
        Snapshot {
            mesh: mesh.clone(),
            temperature: state.temperature.coeffs.clone(),
            pressure: state.pressure.coeffs.clone(),
            velocity: (0..mesh.n_triangles()).map(|t| state.velocity.velocity(t)).collect(),
            indicator_heat: indicators.heat_local.clone(),
            indicator_darcy: indicators.darcy_local.clone(),
            indicator_total: indicators.total_local.clone(),
        }
    }

    /// Mesh text format followed by one line per vertex
    /// (`temperature pressure`) and one line per element
    /// (`ux uy heat darcy total`).
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<(), MeshError> {
        self.mesh.write_text(w)?;
        for v in 0..self.mesh.n_vertices() {
            writeln!(w, "{:.16e} {:.16e}", self.temperature[v], self.pressure[v])?;
        }
        for t in 0..self.mesh.n_triangles() {
            writeln!(
                w,
                "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}",
                self.velocity[t][0],
                self.velocity[t][1],
                self.indicator_heat[t],
                self.indicator_darcy[t],
                self.indicator_total[t]
            )?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Snapshot, MeshError> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| MeshError::Parse("empty snapshot".into()))?;
        let mesh_lines = {
            let counts: Vec<&str> = header.split_whitespace().collect();
            if counts.len() != 2 {
                return Err(MeshError::Parse(format!("bad header: {header}")));
            }
            let nv: usize = counts[0]
                .parse()
                .map_err(|_| MeshError::Parse(format!("bad header: {header}")))?;
            let nt: usize = counts[1]
                .parse()
                .map_err(|_| MeshError::Parse(format!("bad header: {header}")))?;
            nv + nt
        };
        let mut mesh_text = String::from(header);
        mesh_text.push('\n');
        for _ in 0..mesh_lines {
            let line = lines
                .next()
                .ok_or_else(|| MeshError::Parse("truncated snapshot mesh".into()))?;
            mesh_text.push_str(line);
            mesh_text.push('\n');
        }
        let mesh = Mesh::read_text(&mut mesh_text.as_bytes())?;

        let parse_row = |line: &str, n: usize| -> Result<Vec<f64>, MeshError> {
            let vals: Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|_| MeshError::Parse(format!("bad field row: {line}")))?;
            if vals.len() != n {
                return Err(MeshError::Parse(format!(
                    "expected {n} values, got {} in: {line}",
                    vals.len()
                )));
            }
            Ok(vals)
        };

        let mut temperature = Vec::with_capacity(mesh.n_vertices());
        let mut pressure = Vec::with_capacity(mesh.n_vertices());
        for _ in 0..mesh.n_vertices() {
            let line = lines
                .next()
                .ok_or_else(|| MeshError::Parse("truncated vertex fields".into()))?;
            let row = parse_row(line, 2)?;
            temperature.push(row[0]);
            pressure.push(row[1]);
        }
        let mut velocity = Vec::with_capacity(mesh.n_triangles());
        let mut indicator_heat = Vec::with_capacity(mesh.n_triangles());
        let mut indicator_darcy = Vec::with_capacity(mesh.n_triangles());
        let mut indicator_total = Vec::with_capacity(mesh.n_triangles());
        for _ in 0..mesh.n_triangles() {
            let line = lines
                .next()
                .ok_or_else(|| MeshError::Parse("truncated element fields".into()))?;
            let row = parse_row(line, 5)?;
            velocity.push([row[0], row[1]]);
            indicator_heat.push(row[2]);
            indicator_darcy.push(row[3]);
            indicator_total.push(row[4]);
        }
        Ok(Snapshot {
            mesh,
            temperature,
            pressure,
            velocity,
            indicator_heat,
            indicator_darcy,
            indicator_total,
        })
    }

    pub fn write_vtk<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let nv = self.mesh.n_vertices();
        let nt = self.mesh.n_triangles();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "adaptive solver snapshot")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {nv} double")?;
        for v in 0..nv {
            let [x, y] = self.mesh.vertex(v);
            writeln!(w, "{x:.16e} {y:.16e} 0.0")?;
        }
        writeln!(w, "CELLS {nt} {}", 4 * nt)?;
        for t in 0..nt {
            let [a, b, c] = self.mesh.triangle(t);
            writeln!(w, "3 {a} {b} {c}")?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {nv}")?;
        for (name, values) in [("temperature", &self.temperature), ("pressure", &self.pressure)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v:.16e}")?;
            }
        }
        writeln!(w, "CELL_DATA {nt}")?;
        writeln!(w, "VECTORS velocity double")?;
        for u in &self.velocity {
            writeln!(w, "{:.16e} {:.16e} 0.0", u[0], u[1])?;
        }
        for (name, values) in [
            ("indicator_total", &self.indicator_total),
            ("indicator_heat", &self.indicator_heat),
            ("indicator_darcy", &self.indicator_darcy),
        ] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values {
                writeln!(w, "{v:.16e}")?;
            }
        }
        Ok(())
    }

    pub fn save_vtk(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_vtk(&mut w)
    }

    pub fn save_text(&self, path: &Path) -> Result<(), MeshError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut w)
    }

    pub fn load_text(path: &Path) -> Result<Snapshot, MeshError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Snapshot::read_text(&mut r)
    }
}

/// Parses the POINTS block back out of a legacy-VTK file. Used to check
/// that coordinates survive the write bit-exactly.
pub fn read_vtk_points(text: &str) -> Result<Vec<[f64; 2]>, MeshError> {
    let mut lines = text.lines();
    let n = loop {
        let line = lines
            .next()
            .ok_or_else(|| MeshError::Parse("no POINTS section".into()))?;
        if let Some(rest) = line.strip_prefix("POINTS ") {
            let count = rest
                .split_whitespace()
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| MeshError::Parse(format!("bad POINTS line: {line}")))?;
            break count;
        }
    };
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| MeshError::Parse("truncated POINTS section".into()))?;
        let coords: Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let coords = coords.map_err(|_| MeshError::Parse(format!("bad point: {line}")))?;
        if coords.len() != 3 {
            return Err(MeshError::Parse(format!("bad point: {line}")));
        }
        points.push([coords[0], coords[1]]);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::two_triangle_square;

    fn zero_snapshot(mesh: &Mesh) -> Snapshot {
        Snapshot {
            mesh: mesh.clone(),
            temperature: vec![0.0; mesh.n_vertices()],
            pressure: vec![0.0; mesh.n_vertices()],
            velocity: vec![[0.0, 0.0]; mesh.n_triangles()],
            indicator_heat: vec![0.0; mesh.n_triangles()],
            indicator_darcy: vec![0.0; mesh.n_triangles()],
            indicator_total: vec![0.0; mesh.n_triangles()],
        }
    }

    #[test]
    fn zero_state_vtk_has_expected_counts() {
        let mesh = two_triangle_square();
        let snap = zero_snapshot(&mesh);
        let mut buf = Vec::new();
        snap.write_vtk(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("SCALARS temperature double 1"));
        assert!(text.contains("SCALARS indicator_darcy double 1"));
        let zero_fields = text
            .lines()
            .filter(|l| *l == "0.0000000000000000e0")
            .count();
        // 2 point scalars x 4 points + 3 cell scalars x 2 cells.
        assert_eq!(zero_fields, 14);
    }

    #[test]
    fn vtk_points_round_trip_bit_exactly() {
        let mesh = two_triangle_square()
            .longest_edge_bisect(&[0, 1])
            .unwrap()
            .longest_edge_bisect(&[0, 2])
            .unwrap();
        let snap = zero_snapshot(&mesh);
        let mut buf = Vec::new();
        snap.write_vtk(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let points = read_vtk_points(&text).unwrap();
        assert_eq!(points.len(), mesh.n_vertices());
        for (v, p) in points.iter().enumerate() {
            let orig = mesh.vertex(v);
            assert_eq!(orig[0].to_bits(), p[0].to_bits());
            assert_eq!(orig[1].to_bits(), p[1].to_bits());
        }
    }

    #[test]
    fn snapshot_text_round_trip() {
        let mesh = two_triangle_square().longest_edge_bisect(&[0]).unwrap();
        let mut snap = zero_snapshot(&mesh);
        for (i, t) in snap.temperature.iter_mut().enumerate() {
            *t = (i as f64 + 1.0) / 3.0;
        }
        for (i, p) in snap.pressure.iter_mut().enumerate() {
            *p = -(i as f64) * 0.1;
        }
        for (i, u) in snap.velocity.iter_mut().enumerate() {
            *u = [i as f64, 1.0 / (i as f64 + 1.0)];
        }
        snap.indicator_total[0] = 0.75;
        let mut buf = Vec::new();
        snap.write_text(&mut buf).unwrap();
        let parsed = Snapshot::read_text(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed.mesh.n_vertices(), mesh.n_vertices());
        assert_eq!(parsed.temperature, snap.temperature);
        assert_eq!(parsed.pressure, snap.pressure);
        assert_eq!(parsed.velocity, snap.velocity);
        assert_eq!(parsed.indicator_total, snap.indicator_total);
    }
}
