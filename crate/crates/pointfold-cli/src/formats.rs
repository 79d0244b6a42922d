//! File formats: XYZ and OFF readers, PLY ASCII writer (plus a reader used
//! for round-trip checks), and the CSV layouts for manifests, codewords and
//! metric tables.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so
//! write-then-read reproduces values exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pointfold::classify::FeatureSet;
use pointfold::cloud::{PointCloud, TriMesh};
use pointfold::matrix::Matrix;

use crate::error::{format_err, io_err, CliError, Result};

// ---------------------------------------------------------------------------
// XYZ

/// Whitespace-separated `x y z` per line.
pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut fields = line.split_whitespace();
        for slot in &mut coords {
            let tok = fields
                .next()
                .ok_or_else(|| format_err(path, ln + 1, "expected three coordinates"))?;
            *slot = tok
                .parse()
                .map_err(|_| format_err(path, ln + 1, format!("non-numeric token '{tok}'")))?;
        }
        if fields.next().is_some() {
            return Err(format_err(path, ln + 1, "trailing tokens after z"));
        }
        points.push(coords);
    }
    if points.is_empty() {
        return Err(format_err(path, 0, "no points in file"));
    }
    Ok(PointCloud::from_points(&points)?)
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        out.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    fs::write(path, out).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// OFF

/// OFF mesh reader. Accepts the common quirk of the counts fused onto the
/// header line ("OFF490 518 0"); polygons with more than three vertices are
/// fan-triangulated.
pub fn read_off(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            tokens.push((ln + 1, tok));
        }
    }
    let mut pos = 0usize;
    let take = |pos: &mut usize| -> Option<(usize, &str)> {
        let t = tokens.get(*pos).copied();
        *pos += 1;
        t
    };

    let (header_line, header) = take(&mut pos).ok_or_else(|| format_err(path, 1, "empty file"))?;
    let mut counts: Vec<usize> = Vec::new();
    if header == "OFF" {
        // counts follow as separate tokens
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // fused header: "OFF490" carries the vertex count
        let v: usize = rest.parse().map_err(|_| {
            format_err(path, header_line, format!("malformed OFF header '{header}'"))
        })?;
        counts.push(v);
    } else {
        return Err(format_err(
            path,
            header_line,
            format!("expected OFF header, found '{header}'"),
        ));
    }
    while counts.len() < 3 {
        let (ln, tok) =
            take(&mut pos).ok_or_else(|| format_err(path, header_line, "missing counts"))?;
        counts.push(
            tok.parse()
                .map_err(|_| format_err(path, ln, format!("non-numeric count '{tok}'")))?,
        );
    }
    let (n_verts, n_faces) = (counts[0], counts[1]);

    let mut data = Vec::with_capacity(n_verts * 3);
    for _ in 0..n_verts * 3 {
        let (ln, tok) =
            take(&mut pos).ok_or_else(|| format_err(path, header_line, "missing vertex data"))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| format_err(path, ln, format!("non-numeric vertex token '{tok}'")))?;
        data.push(v);
    }
    let vertices = Matrix::from_vec(n_verts, 3, data).map_err(CliError::Engine)?;

    let mut triangles = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (ln, tok) =
            take(&mut pos).ok_or_else(|| format_err(path, header_line, "missing face data"))?;
        let k: usize = tok
            .parse()
            .map_err(|_| format_err(path, ln, format!("non-numeric face size '{tok}'")))?;
        if k < 3 {
            return Err(format_err(path, ln, format!("face with {k} vertices")));
        }
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            let (ln2, tok2) =
                take(&mut pos).ok_or_else(|| format_err(path, ln, "truncated face"))?;
            let i: usize = tok2.parse().map_err(|_| {
                format_err(path, ln2, format!("non-numeric vertex index '{tok2}'"))
            })?;
            if i >= n_verts {
                return Err(format_err(
                    path,
                    ln2,
                    format!("vertex index {i} out of range ({n_verts} vertices)"),
                ));
            }
            idx.push(i);
        }
        for t in 1..k - 1 {
            triangles.push([idx[0], idx[t], idx[t + 1]]);
        }
    }
    Ok(TriMesh::new(vertices, triangles)?)
}

// ---------------------------------------------------------------------------
// PLY (ASCII 1.0)

/// Writes an ASCII PLY with optional per-point `uchar` RGB. Points beyond
/// three coordinates are not supported; 1D/2D stage matrices are padded
/// with zeros.
pub fn write_ply_ascii(points: &Matrix, colors: Option<&[[u8; 3]]>, path: &Path) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != points.rows() {
            return Err(CliError::Config(format!(
                "{} colors for {} points",
                c.len(),
                points.rows()
            )));
        }
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", points.rows()));
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str("end_header\n");
    for r in 0..points.rows() {
        let row = points.row(r);
        let coord = |i: usize| row.get(i).copied().unwrap_or(0.0);
        out.push_str(&format!("{} {} {}", coord(0), coord(1), coord(2)));
        if let Some(c) = colors {
            out.push_str(&format!(" {} {} {}", c[r][0], c[r][1], c[r][2]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Minimal reader for the files [`write_ply_ascii`] produces; used for
/// round-trip verification.
pub fn read_ply_ascii(path: &Path) -> Result<(Matrix, Option<Vec<[u8; 3]>>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let mut expect = |want: &str| -> Result<()> {
        match lines.next() {
            Some((_, l)) if l.trim() == want => Ok(()),
            Some((ln, l)) => Err(format_err(
                path,
                ln + 1,
                format!("expected '{want}', found '{l}'"),
            )),
            None => Err(format_err(path, 0, format!("missing '{want}'"))),
        }
    };
    expect("ply")?;
    expect("format ascii 1.0")?;
    let (ln, vline) = lines
        .next()
        .ok_or_else(|| format_err(path, 0, "missing element line"))?;
    let n: usize = vline
        .trim()
        .strip_prefix("element vertex ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format_err(path, ln + 1, "malformed element line"))?;
    let mut has_color = false;
    for (ln, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            break;
        }
        if line == "property uchar red" {
            has_color = true;
        }
        if !line.starts_with("property ") {
            return Err(format_err(path, ln + 1, format!("unexpected line '{line}'")));
        }
    }
    let mut data = Vec::with_capacity(n * 3);
    let mut colors = if has_color { Some(Vec::with_capacity(n)) } else { None };
    for _ in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| format_err(path, 0, "truncated vertex list"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let want = if has_color { 6 } else { 3 };
        if fields.len() != want {
            return Err(format_err(
                path,
                ln + 1,
                format!("expected {want} fields, found {}", fields.len()),
            ));
        }
        for f in &fields[..3] {
            data.push(f.parse().map_err(|_| {
                format_err(path, ln + 1, format!("non-numeric coordinate '{f}'"))
            })?);
        }
        if let Some(c) = &mut colors {
            let mut rgb = [0u8; 3];
            for (slot, f) in rgb.iter_mut().zip(&fields[3..]) {
                *slot = f.parse().map_err(|_| {
                    format_err(path, ln + 1, format!("non-numeric color '{f}'"))
                })?;
            }
            c.push(rgb);
        }
    }
    Ok((Matrix::from_vec(n, 3, data).map_err(CliError::Engine)?, colors))
}

/// Color gradient over grid rows: each grid axis is normalized to `[0, 1]`
/// and mapped to a color channel, so folded stages inherit the grid's
/// coloring through their shared row index.
pub fn grid_color_gradient(grid: &Matrix) -> Vec<[u8; 3]> {
    let dim = grid.cols();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for r in 0..grid.rows() {
        for (c, &v) in grid.row(r).iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let norm = |c: usize, v: f64| -> u8 {
        if hi[c] <= lo[c] {
            128
        } else {
            (255.0 * (v - lo[c]) / (hi[c] - lo[c])).round() as u8
        }
    };
    (0..grid.rows())
        .map(|r| {
            let row = grid.row(r);
            let red = norm(0, row[0]);
            let green = if dim > 1 { norm(1, row[1]) } else { 60 };
            let blue = if dim > 2 {
                norm(2, row[2])
            } else {
                255u8.saturating_sub(red / 2).saturating_sub(green / 2)
            };
            [red, green, blue]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// CSV tables

/// `path,label` manifest rows; paths are stored relative to the manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, u32)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (ln == 0 && line == "path,label") {
            continue;
        }
        let (p, l) = line
            .rsplit_once(',')
            .ok_or_else(|| format_err(path, ln + 1, "expected 'path,label'"))?;
        let label: u32 = l
            .trim()
            .parse()
            .map_err(|_| format_err(path, ln + 1, format!("non-numeric label '{l}'")))?;
        rows.push((base.join(p.trim()), label));
    }
    if rows.is_empty() {
        return Err(format_err(path, 0, "empty manifest"));
    }
    Ok(rows)
}

pub fn write_manifest(rows: &[(String, u32)], path: &Path) -> Result<()> {
    let mut out = String::from("path,label\n");
    for (p, l) in rows {
        out.push_str(&format!("{p},{l}\n"));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Codeword table: header `label,c_1..c_d`, one row per cloud.
pub fn write_codewords(set: &FeatureSet, path: &Path) -> Result<()> {
    let d = set.dim();
    let mut out = String::from("label");
    for i in 1..=d {
        out.push_str(&format!(",c_{i}"));
    }
    out.push('\n');
    for r in 0..set.len() {
        out.push_str(&set.labels[r].to_string());
        for v in set.codewords.row(r) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_codewords(path: &Path) -> Result<FeatureSet> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, 0, "empty codeword table"))?;
    let d = header.split(',').count().saturating_sub(1);
    if d == 0 {
        return Err(format_err(path, 1, "header must be label,c_1..c_d"));
    }
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: u32 = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| format_err(path, ln + 1, "non-numeric label"))?;
        labels.push(label);
        let mut count = 0;
        for f in fields {
            data.push(f.parse::<f64>().map_err(|_| {
                format_err(path, ln + 1, format!("non-numeric codeword entry '{f}'"))
            })?);
            count += 1;
        }
        if count != d {
            return Err(format_err(
                path,
                ln + 1,
                format!("expected {d} codeword entries, found {count}"),
            ));
        }
    }
    let n = labels.len();
    let m = Matrix::from_vec(n, d, data).map_err(CliError::Engine)?;
    FeatureSet::new(m, labels).map_err(CliError::Engine)
}

/// Streaming `iter,loss` writer for training logs.
pub struct LossCsv {
    file: std::io::BufWriter<fs::File>,
    path: PathBuf,
}

impl LossCsv {
    pub fn create(path: &Path) -> Result<LossCsv> {
        let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
        file.write_all(b"iter,loss\n").map_err(io_err(path))?;
        Ok(LossCsv {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, iter: usize, loss: f64) -> Result<()> {
        writeln!(self.file, "{iter},{loss}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<()> {
        self.file.flush().map_err(io_err(&self.path))
    }
}

/// Generic small table writer: header plus preformatted rows.
pub fn write_table(header: &str, rows: &[String], path: &Path) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}
