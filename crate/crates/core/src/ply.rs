//! Minimal ASCII PLY reader/writer for triangle meshes carrying a per-vertex
//! `instance_id`.

use std::fmt::Write as _;

use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct PlyMesh {
    pub vertices: Vec<Vec3>,
    pub instance_ids: Vec<i32>,
    pub faces: Vec<[u32; 3]>,
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

enum Property {
    Scalar(String),
    List(String),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n) | Property::List(n) => n,
        }
    }
}

pub fn parse(text: &str) -> Result<PlyMesh, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err("missing 'ply' magic".into()),
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (no, line) = lines.next().ok_or("unterminated header")?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(format!("unsupported format '{other}'")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| format!("line {}: bad element count", no + 1))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or(format!("line {}: property before element", no + 1))?
                .properties
                .push(Property::List(name.to_string())),
            ["property", _, name] => elements
                .last_mut()
                .ok_or(format!("line {}: property before element", no + 1))?
                .properties
                .push(Property::Scalar(name.to_string())),
            ["end_header"] => break,
            _ => return Err(format!("line {}: unrecognized header line '{line}'", no + 1)),
        }
    }

    let mut mesh = PlyMesh {
        vertices: Vec::new(),
        instance_ids: Vec::new(),
        faces: Vec::new(),
    };
    for element in &elements {
        let col = |name: &str| element.properties.iter().position(|p| p.name() == name);
        for _ in 0..element.count {
            let (no, line) = lines.next().ok_or(format!("truncated '{}' data", element.name))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64, String> {
                tokens
                    .get(i)
                    .ok_or(format!("line {}: missing value", no + 1))?
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: bad number", no + 1))
            };
            match element.name.as_str() {
                "vertex" => {
                    let (x, y, z) = match (col("x"), col("y"), col("z")) {
                        (Some(x), Some(y), Some(z)) => (x, y, z),
                        _ => return Err("vertex element lacks x/y/z".into()),
                    };
                    if element.properties.iter().any(|p| matches!(p, Property::List(_))) {
                        return Err("list properties on vertices are not supported".into());
                    }
                    mesh.vertices.push(Vec3::new(num(x)?, num(y)?, num(z)?));
                    let id = match col("instance_id") {
                        Some(c) => num(c)? as i32,
                        None => -1,
                    };
                    mesh.instance_ids.push(id);
                }
                "face" => {
                    if element.properties.len() != 1 {
                        return Err("face element must carry exactly one list property".into());
                    }
                    let n = num(0)? as usize;
                    if n != 3 {
                        return Err(format!("line {}: face with {n} vertices (triangles only)", no + 1));
                    }
                    if tokens.len() != 4 {
                        return Err(format!("line {}: malformed face", no + 1));
                    }
                    let mut face = [0u32; 3];
                    for (k, slot) in face.iter_mut().enumerate() {
                        let v = num(k + 1)?;
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(format!("line {}: bad vertex index", no + 1));
                        }
                        *slot = v as u32;
                    }
                    mesh.faces.push(face);
                }
                _ => {}
            }
        }
    }
    Ok(mesh)
}

pub fn write(mesh: &PlyMesh) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", mesh.vertices.len());
    out.push_str("property float x\nproperty float y\nproperty float z\nproperty int instance_id\n");
    let _ = writeln!(out, "element face {}", mesh.faces.len());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (v, id) in mesh.vertices.iter().zip(&mesh.instance_ids) {
        let _ = writeln!(out, "{} {} {} {}", v.x, v.y, v.z, id);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}
