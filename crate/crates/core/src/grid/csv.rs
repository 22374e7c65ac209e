//! Trajectory CSV: header `t,x,u,v` (intervals) or `t,x,y,u,v`
//! (rectangles), one row per node, time-major then node index.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::{Component, Field, Grid, Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad header {0:?}")]
    Header(String),
    #[error("inconsistent layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

pub fn write_csv<W: Write>(tr: &Trajectory, mut w: W) -> Result<(), CsvError> {
    let grid = tr.grid();
    let two_d = grid.dim() == 2;
    if two_d {
        writeln!(w, "t,x,y,u,v")?;
    } else {
        writeln!(w, "t,x,u,v")?;
    }
    for j in 0..=tr.steps() {
        let t = tr.time(j);
        let u = tr.frame(Component::U, j).values();
        let v = tr.frame(Component::V, j).values();
        for n in 0..grid.node_count() {
            let [x, y] = grid.coords(n);
            if two_d {
                writeln!(w, "{t},{x},{y},{},{}", u[n], v[n])?;
            } else {
                writeln!(w, "{t},{x},{},{}", u[n], v[n])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_csv`]. The result is not marked
/// periodic; callers that know it is call [`Trajectory::mark_periodic`].
pub fn read_csv<R: BufRead>(r: R) -> Result<Trajectory, CsvError> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let cols = match header.trim() {
        "t,x,u,v" => 4,
        "t,x,y,u,v" => 5,
        other => return Err(CsvError::Header(other.to_string())),
    };
    let mut rows: Vec<[f64; 5]> = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 5];
        let mut count = 0;
        for (c, tok) in line.split(',').enumerate() {
            if c >= cols {
                count = cols + 1;
                break;
            }
            row[c] = tok.trim().parse::<f64>().map_err(|e| CsvError::Parse {
                line: k + 2,
                msg: format!("column {}: {e}", c + 1),
            })?;
            count += 1;
        }
        if count != cols {
            return Err(CsvError::Parse {
                line: k + 2,
                msg: format!("expected {cols} columns"),
            });
        }
        if cols == 4 {
            row = [row[0], row[1], 0.0, row[2], row[3]];
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CsvError::Layout("no data rows".into()));
    }
    let t0 = rows[0][0];
    let per_frame = rows.iter().take_while(|r| r[0] == t0).count();
    if rows.len() % per_frame != 0 {
        return Err(CsvError::Layout(format!(
            "{} rows is not a multiple of {per_frame} nodes",
            rows.len()
        )));
    }
    let grid = if cols == 4 {
        let cells = per_frame - 1;
        let length = rows[per_frame - 1][1];
        Grid::interval(length, cells).map_err(|e| CsvError::Layout(e.to_string()))?
    } else {
        let nx1 = rows[..per_frame]
            .iter()
            .take_while(|r| r[2] == rows[0][2])
            .count();
        if nx1 < 2 || per_frame % nx1 != 0 {
            return Err(CsvError::Layout("cannot infer rectangle shape".into()));
        }
        let ny1 = per_frame / nx1;
        let last = rows[per_frame - 1];
        Grid::rectangle(last[1], last[2], nx1 - 1, ny1 - 1)
            .map_err(|e| CsvError::Layout(e.to_string()))?
    };
    let frames = rows.len() / per_frame;
    if frames < 2 {
        return Err(CsvError::Layout("need at least two time frames".into()));
    }
    let dt = (rows[per_frame * (frames - 1)][0] - t0) / (frames - 1) as f64;
    let mut u = Vec::with_capacity(frames);
    let mut v = Vec::with_capacity(frames);
    for chunk in rows.chunks(per_frame) {
        u.push(
            Field::from_values(&grid, chunk.iter().map(|r| r[3]).collect())
                .map_err(|e| CsvError::Layout(e.to_string()))?,
        );
        v.push(
            Field::from_values(&grid, chunk.iter().map(|r| r[4]).collect())
                .map_err(|e| CsvError::Layout(e.to_string()))?,
        );
    }
    Ok(Trajectory::new(grid, dt, u, v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_interval_and_rectangle() {
        for grid in [
            Grid::interval(1.0, 12).unwrap(),
            Grid::rectangle(1.5, 0.7, 5, 6).unwrap(),
        ] {
            let u: Vec<Field> = (0..=7)
                .map(|j| Field::sine_bump(&grid, 0.3 + j as f64 / 7.0))
                .collect();
            let v: Vec<Field> = u.iter().map(|f| f.scaled(1.0 / 3.0)).collect();
            let tr = Trajectory::new(grid, 1.0 / 7.0, u, v).unwrap();
            let mut buf = Vec::new();
            write_csv(&tr, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            assert_eq!(back.grid().cells(), grid.cells());
            assert_eq!(back.steps(), 7);
            assert_eq!(back.max_abs_diff(&tr), 0.0);
            for c in [Component::U, Component::V] {
                assert!((back.lr_norm(c, 2.0) - tr.lr_norm(c, 2.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn header_is_checked() {
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes()),
            Err(CsvError::Header(_))
        ));
    }
}
