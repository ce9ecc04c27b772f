//! Grid persistence: one CSV of matrix blocks per node plus `index.json`.
//!
//! A node file is a sequence of blocks, each a `name,rows,cols` header line
//! followed by `rows` lines of `cols` values. Blocks: `A, B, C, D, x_trim,
//! psi_trim, y_trim, meta` where `meta` holds `omega_r, wind, trim_residual`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinearModel, LpvGrid};
use crate::error::{FarmError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeEntry {
    i: usize,
    j: usize,
    omega_r: f64,
    wind: f64,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GridIndex {
    version: u32,
    omega: Vec<f64>,
    wind: Vec<f64>,
    n_states: usize,
    n_inputs: usize,
    n_outputs: usize,
    state_names: Vec<String>,
    nodes: Vec<NodeEntry>,
}

fn write_block<W: std::io::Write>(w: &mut csv::Writer<W>, name: &str, m: &DMatrix<f64>) -> Result<()> {
    w.write_record([name.to_string(), m.nrows().to_string(), m.ncols().to_string()])?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    Ok(())
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

pub fn write_node<W: std::io::Write>(m: &LinearModel, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    write_block(&mut wr, "A", &m.a)?;
    write_block(&mut wr, "B", &m.b)?;
    write_block(&mut wr, "C", &m.c)?;
    write_block(&mut wr, "D", &m.d)?;
    write_block(&mut wr, "x_trim", &column(&m.x_trim))?;
    write_block(&mut wr, "psi_trim", &column(&m.psi_trim))?;
    write_block(&mut wr, "y_trim", &column(&m.y_trim))?;
    write_block(&mut wr, "meta", &DMatrix::from_row_slice(1, 3, &[m.omega_r, m.wind, m.trim_residual]))?;
    wr.flush().map_err(|e| FarmError::io("<csv>", e))?;
    Ok(())
}

pub fn read_node<R: std::io::Read>(r: R) -> Result<LinearModel> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut records = rd.records();
    let mut blocks = std::collections::HashMap::new();
    while let Some(head) = records.next() {
        let head = head?;
        if head.len() != 3 {
            return Err(FarmError::Data("expected a `name,rows,cols` block header".into()));
        }
        let name = head[0].to_string();
        let parse_dim = |s: &str| s.trim().parse::<usize>().map_err(|e| FarmError::Data(format!("bad block size `{s}`: {e}")));
        let (rows, cols) = (parse_dim(&head[1])?, parse_dim(&head[2])?);
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            let rec = records
                .next()
                .ok_or_else(|| FarmError::Data(format!("block {name} truncated")))??;
            if rec.len() != cols {
                return Err(FarmError::Dimension {
                    expected: cols,
                    got: rec.len(),
                });
            }
            for (j, s) in rec.iter().enumerate() {
                m[(i, j)] = s.trim().parse().map_err(|e| FarmError::Data(format!("bad value `{s}` in {name}: {e}")))?;
            }
        }
        blocks.insert(name, m);
    }
    let mut take = |k: &str| blocks.remove(k).ok_or_else(|| FarmError::Data(format!("missing block {k}")));
    let vec_of = |m: DMatrix<f64>| DVector::from_column_slice(m.as_slice());
    let (a, b, c, d) = (take("A")?, take("B")?, take("C")?, take("D")?);
    let (x, p, y, meta) = (take("x_trim")?, take("psi_trim")?, take("y_trim")?, take("meta")?);
    if meta.len() != 3 {
        return Err(FarmError::Data("meta block must hold omega_r, wind, trim_residual".into()));
    }
    let m = LinearModel {
        a,
        b,
        c,
        d,
        omega_r: meta[0],
        wind: meta[1],
        trim_residual: meta[2],
        x_trim: vec_of(x),
        psi_trim: vec_of(p),
        y_trim: vec_of(y),
    };
    m.validate()?;
    Ok(m)
}

/// Writes the grid into `dir`, creating it if needed.
pub fn save_grid(grid: &LpvGrid, dir: impl AsRef<Path>, state_names: &[&str]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| FarmError::io(dir, e))?;
    let nw = grid.wind.len();
    let mut nodes = Vec::with_capacity(grid.models.len());
    for (k, m) in grid.models.iter().enumerate() {
        let (i, j) = (k / nw, k % nw);
        let file = format!("node_{i:02}_{j:02}.csv");
        let path = dir.join(&file);
        let f = fs::File::create(&path).map_err(|e| FarmError::io(&path, e))?;
        write_node(m, f)?;
        nodes.push(NodeEntry {
            i,
            j,
            omega_r: m.omega_r,
            wind: m.wind,
            file,
        });
    }
    let m0 = &grid.models[0];
    let index = GridIndex {
        version: 1,
        omega: grid.omega.clone(),
        wind: grid.wind.clone(),
        n_states: m0.n_states(),
        n_inputs: m0.n_inputs(),
        n_outputs: m0.n_outputs(),
        state_names: state_names.iter().map(|s| s.to_string()).collect(),
        nodes,
    };
    let path = dir.join("index.json");
    let text = serde_json::to_string_pretty(&index)?;
    fs::write(&path, text).map_err(|e| FarmError::io(&path, e))
}

pub fn load_grid(dir: impl AsRef<Path>) -> Result<LpvGrid> {
    let dir = dir.as_ref();
    let path = dir.join("index.json");
    let text = fs::read_to_string(&path).map_err(|e| FarmError::io(&path, e))?;
    let index: GridIndex = serde_json::from_str(&text)?;
    let nw = index.wind.len();
    let mut slots: Vec<Option<LinearModel>> = vec![None; index.omega.len() * nw];
    for n in &index.nodes {
        let p = dir.join(&n.file);
        let f = fs::File::open(&p).map_err(|e| FarmError::io(&p, e))?;
        let m = read_node(f).map_err(|e| e.context(format!("reading {}", p.display())))?;
        let slot = slots
            .get_mut(n.i * nw + n.j)
            .ok_or_else(|| FarmError::Data(format!("node ({}, {}) outside the lattice", n.i, n.j)))?;
        *slot = Some(m);
    }
    let models = slots
        .into_iter()
        .enumerate()
        .map(|(k, m)| m.ok_or_else(|| FarmError::Data(format!("lattice node ({}, {}) missing", k / nw, k % nw))))
        .collect::<Result<Vec<_>>>()?;
    LpvGrid::new(index.omega, index.wind, models)
}
