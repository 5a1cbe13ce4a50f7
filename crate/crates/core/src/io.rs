//! ASCII OFF / OBJ / PLY readers, OFF writer and a PLY writer with per-face colors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::sphere::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

/// Reads a mesh, inferring the format from the file extension when `format` is `None`.
pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<TriangleMesh> {
    let format = format.or_else(|| MeshFormat::from_path(path)).ok_or_else(|| {
        Error::InvalidInput(format!("cannot infer mesh format of {}", path.display()))
    })?;
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text, format)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriangleMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Ply => parse_ply(text)?,
    };
    let mut triangles = Vec::with_capacity(faces.len());
    for (i, f) in faces.into_iter().enumerate() {
        if f.len() != 3 {
            return Err(Error::NonTriangleFace { face: i, count: f.len() });
        }
        triangles.push([f[0], f[1], f[2]]);
    }
    TriangleMesh::new(vertices, triangles)
}

type RawMesh = (Vec<Vec3>, Vec<Vec<usize>>);

/// Non-empty lines with `#` comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { line, msg: format!("expected {what}") })
}

fn parse_off(text: &str) -> Result<RawMesh> {
    let mut lines = content_lines(text);
    let (line, header) =
        lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"OFF") {
        return Err(Error::Parse { line, msg: "missing OFF header".into() });
    }
    tokens.remove(0);
    let (line, counts) = if tokens.is_empty() {
        let (l, c) = lines.next().ok_or(Error::Parse { line, msg: "missing counts".into() })?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (line, tokens)
    };
    let mut it = counts.into_iter();
    let nv: usize = parse_num(it.next(), line, "vertex count")?;
    let nf: usize = parse_num(it.next(), line, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) =
            lines.next().ok_or(Error::Parse { line, msg: "truncated vertex list".into() })?;
        let mut t = l.split_whitespace();
        let x = parse_num(t.next(), line, "x")?;
        let y = parse_num(t.next(), line, "y")?;
        let z = parse_num(t.next(), line, "z")?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) =
            lines.next().ok_or(Error::Parse { line, msg: "truncated face list".into() })?;
        let mut t = l.split_whitespace();
        let n: usize = parse_num(t.next(), line, "face size")?;
        let idx = (0..n)
            .map(|_| parse_num::<usize>(t.next(), line, "vertex index"))
            .collect::<Result<Vec<_>>>()?;
        faces.push(idx);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (line, l) in content_lines(text) {
        let mut t = l.split_whitespace();
        match t.next() {
            Some("v") => {
                let x = parse_num(t.next(), line, "x")?;
                let y = parse_num(t.next(), line, "y")?;
                let z = parse_num(t.next(), line, "z")?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in t {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = parse_num(Some(first), line, "face index")?;
                    let idx = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                    if idx < 0 {
                        return Err(Error::Parse { line, msg: "face index out of range".into() });
                    }
                    face.push(idx as usize);
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
    list_props: Vec<String>,
}

fn parse_ply(text: &str) -> Result<RawMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing ply magic".into() }),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_end = false;
    for (line, l) in lines.by_ref() {
        let t: Vec<&str> = l.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(Error::Parse { line, msg: format!("unsupported PLY format {other}") })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: parse_num(Some(count), line, "element count")?,
                props: Vec::new(),
                list_props: Vec::new(),
            }),
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or(Error::Parse { line, msg: "property before element".into() })?;
                el.props.push(name.to_string());
                el.list_props.push(name.to_string());
            }
            ["property", _, name] => {
                elements
                    .last_mut()
                    .ok_or(Error::Parse { line, msg: "property before element".into() })?
                    .props
                    .push(name.to_string());
            }
            ["end_header"] => {
                saw_end = true;
                break;
            }
            _ => return Err(Error::Parse { line, msg: format!("unexpected header line '{l}'") }),
        }
    }
    if !saw_end {
        return Err(Error::Parse { line: 0, msg: "missing end_header".into() });
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        for _ in 0..el.count {
            let (line, l) =
                body.next().ok_or(Error::Parse { line: 0, msg: "truncated PLY body".into() })?;
            let mut t = l.split_whitespace();
            match el.name.as_str() {
                "vertex" => {
                    let mut xyz = [f64::NAN; 3];
                    for p in &el.props {
                        if el.list_props.contains(p) {
                            return Err(Error::Parse { line, msg: "list property on vertex".into() });
                        }
                        let v: f64 = parse_num(t.next(), line, p)?;
                        match p.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    if xyz.iter().any(|v| v.is_nan()) {
                        return Err(Error::Parse { line, msg: "vertex without x/y/z".into() });
                    }
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    let mut face = None;
                    for p in &el.props {
                        if el.list_props.contains(p) {
                            let n: usize = parse_num(t.next(), line, "list length")?;
                            let idx = (0..n)
                                .map(|_| parse_num::<usize>(t.next(), line, "vertex index"))
                                .collect::<Result<Vec<_>>>()?;
                            if p == "vertex_indices" || p == "vertex_index" {
                                face = Some(idx);
                            }
                        } else {
                            let _: f64 = parse_num(t.next(), line, p)?;
                        }
                    }
                    faces.push(
                        face.ok_or(Error::Parse { line, msg: "face without vertex_indices".into() })?,
                    );
                }
                _ => {}
            }
        }
    }
    Ok((vertices, faces))
}

pub fn off_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF\n{} {} {}", mesh.vertices().len(), mesh.num_triangles(), mesh.num_edges())
        .unwrap();
    for v in mesh.vertices() {
        writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

pub fn write_off(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    std::fs::write(path, off_string(mesh))?;
    Ok(())
}

/// ASCII PLY; when `face_colors` is given each face carries `red green blue` bytes.
pub fn ply_string(mesh: &TriangleMesh, face_colors: Option<&[[u8; 3]]>) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", mesh.vertices().len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    writeln!(s, "element face {}", mesh.num_triangles()).unwrap();
    s.push_str("property list uchar int vertex_indices\n");
    if face_colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    s.push_str("end_header\n");
    for v in mesh.vertices() {
        writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for (i, t) in mesh.triangles().iter().enumerate() {
        write!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        if let Some(colors) = face_colors {
            let [r, g, b] = colors[i];
            write!(s, " {r} {g} {b}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_ply(path: &Path, mesh: &TriangleMesh, face_colors: Option<&[[u8; 3]]>) -> Result<()> {
    std::fs::write(path, ply_string(mesh, face_colors))?;
    Ok(())
}

/// Distinct RGB color for label `index` by golden-angle hue rotation.
pub fn label_color(index: usize) -> [u8; 3] {
    const GOLDEN_ANGLE_DEG: f64 = 137.507_764_050_037_85;
    let hue = (index as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0) / 60.0;
    let (s, v) = (0.65, 0.95);
    let c = v * s;
    let x = c * (1.0 - (hue.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

/// Face colors of a hard labeling.
pub fn label_colors(hard: &[usize]) -> Vec<[u8; 3]> {
    hard.iter().map(|&l| label_color(l)).collect()
}
