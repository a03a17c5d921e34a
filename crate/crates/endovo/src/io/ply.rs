//! PLY clouds and triangle meshes.
//!
//! Reads `ascii 1.0` and `binary_little_endian 1.0`; big-endian files are
//! rejected. Only `vertex` (`x y z`, optionally `nx ny nz`) and `face`
//! (`vertex_indices` / `vertex_index` lists, fan-triangulated) are kept, other
//! elements and properties are skipped. Lengths carry no unit in PLY, so this
//! crate records one in a `comment unit mm|cm|m` header line.

use std::fmt::Write as _;
use std::path::Path;

use endovo_core::reconstruction::{PointCloud, ReconError, TriMesh, Unit};
use nalgebra::Vector3;

use super::{read_bytes, write_atomic, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<[usize; 3]>,
    /// From the `comment unit` line, when present.
    pub unit: Option<Unit>,
}

impl PlyData {
    pub fn from_cloud(cloud: &PointCloud) -> Self {
        Self {
            vertices: cloud.points().to_vec(),
            normals: cloud.normals().map(<[_]>::to_vec),
            faces: Vec::new(),
            unit: Some(cloud.unit()),
        }
    }

    pub fn from_mesh(mesh: &TriMesh) -> Self {
        Self {
            vertices: mesh.vertices().to_vec(),
            normals: None,
            faces: mesh.faces().to_vec(),
            unit: Some(mesh.unit()),
        }
    }

    /// The vertices as a cloud; `unit` overrides the file's own tag.
    pub fn to_cloud(&self, unit: Option<Unit>) -> Result<PointCloud, ReconError> {
        let cloud = PointCloud::new(self.vertices.clone(), unit.or(self.unit).unwrap_or(Unit::Millimeters))?;
        match &self.normals {
            Some(n) => cloud.with_normals(n.clone()),
            None => Ok(cloud),
        }
    }

    pub fn to_mesh(&self, unit: Option<Unit>) -> Result<TriMesh, ReconError> {
        TriMesh::new(self.vertices.clone(), self.faces.clone(), unit.or(self.unit).unwrap_or(Unit::Millimeters))
    }
}

pub fn unit_name(unit: Unit) -> &'static str {
    match unit {
        Unit::Meters => "m",
        Unit::Centimeters => "cm",
        Unit::Millimeters => "mm",
    }
}

pub fn parse_unit(s: &str) -> Option<Unit> {
    match s.to_ascii_lowercase().as_str() {
        "m" | "meter" | "meters" => Some(Unit::Meters),
        "cm" | "centimeter" | "centimeters" => Some(Unit::Centimeters),
        "mm" | "millimeter" | "millimeters" => Some(Unit::Millimeters),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    unit: Option<Unit>,
    body_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, IoError> {
    let err = |m: String| IoError::parse(path, m);
    let mut offset = 0;
    let mut next_line = || -> Result<&str, IoError> {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| IoError::parse(path, "header is not terminated by end_header"))?;
        offset += nl + 1;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| IoError::parse(path, "header is not text"))?;
        Ok(line.trim_end_matches('\r'))
    };
    if next_line()?.trim() != "ply" {
        return Err(err("missing `ply` magic".into()));
    }
    let mut format = None;
    let mut unit = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(IoError::unsupported(path, format!("PLY format {other}"))),
                })
            }
            ["comment", "unit", u, ..] => {
                unit = Some(parse_unit(u).ok_or_else(|| err(format!("unknown unit {u:?}")))?);
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| err(format!("bad element count {count:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, name] => {
                let (c, i) = (Scalar::parse(count_ty), Scalar::parse(item_ty));
                let (Some(c), Some(i)) = (c, i) else {
                    return Err(err(format!("bad list property types in {line:?}")));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| err("property before any element".into()))?
                    .properties
                    .push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| err(format!("unknown property type {ty:?}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| err("property before any element".into()))?
                    .properties
                    .push(Property::Scalar(name.to_string(), ty));
            }
            _ => return Err(err(format!("unexpected header line {line:?}"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| err("missing format line".into()))?,
        elements,
        unit,
        body_offset: offset,
    })
}

/// Pulls numbers for one element record at a time, in either encoding.
trait Values {
    fn scalar(&mut self, ty: Scalar) -> Result<f64, String>;
}

struct AsciiValues<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl Values for AsciiValues<'_> {
    fn scalar(&mut self, _ty: Scalar) -> Result<f64, String> {
        let t = self.tokens.next().ok_or("body ends early")?;
        t.parse().map_err(|_| format!("{t:?} is not a number"))
    }
}

struct BinaryValues<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Values for BinaryValues<'_> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64, String> {
        let end = self.pos + ty.size();
        let b = self.bytes.get(self.pos..end).ok_or("body ends early")?;
        self.pos = end;
        Ok(ty.decode(b))
    }
}

fn index(v: f64) -> Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(format!("{v} is not a vertex index"))
    }
}

fn read_body(header: &Header, values: &mut dyn Values) -> Result<PlyData, String> {
    let mut data = PlyData {
        unit: header.unit,
        ..PlyData::default()
    };
    for element in &header.elements {
        let pos = |n: &str| element.properties.iter().position(|p| p.name() == n);
        let xyz = [pos("x"), pos("y"), pos("z")];
        let nxyz = [pos("nx"), pos("ny"), pos("nz")];
        let has_normals = nxyz.iter().all(Option::is_some);
        let list = pos("vertex_indices").or_else(|| pos("vertex_index"));
        if element.name == "vertex" && xyz.iter().any(Option::is_none) {
            return Err("vertex element lacks x, y or z".into());
        }
        if element.name == "vertex" && has_normals {
            data.normals = Some(Vec::with_capacity(element.count));
        }
        let mut scalars = vec![0.0; element.properties.len()];
        for _ in 0..element.count {
            let mut indices = Vec::new();
            for (k, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => scalars[k] = values.scalar(*ty)?,
                    Property::List(_, count_ty, item_ty) => {
                        let n = index(values.scalar(*count_ty)?)?;
                        let keep = Some(k) == list;
                        for _ in 0..n {
                            let v = values.scalar(*item_ty)?;
                            if keep {
                                indices.push(index(v)?);
                            }
                        }
                    }
                }
            }
            match element.name.as_str() {
                "vertex" => {
                    let get = |p: [Option<usize>; 3]| Vector3::new(scalars[p[0].unwrap()], scalars[p[1].unwrap()], scalars[p[2].unwrap()]);
                    data.vertices.push(get(xyz));
                    if let Some(n) = data.normals.as_mut() {
                        n.push(get(nxyz));
                    }
                }
                "face" if list.is_some() => {
                    if indices.len() < 3 {
                        return Err(format!("face with {} vertices", indices.len()));
                    }
                    for i in 1..indices.len() - 1 {
                        data.faces.push([indices[0], indices[i], indices[i + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(data)
}

pub fn read_ply(path: &Path) -> Result<PlyData, IoError> {
    let bytes = read_bytes(path)?;
    let header = parse_header(path, &bytes)?;
    let body = &bytes[header.body_offset..];
    let data = match header.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| IoError::parse(path, "ASCII body is not text"))?;
            let mut values = AsciiValues {
                tokens: text.split_ascii_whitespace(),
            };
            let data = read_body(&header, &mut values);
            if data.is_ok() && values.tokens.next().is_some() {
                return Err(IoError::parse(path, "trailing data after the last element"));
            }
            data
        }
        PlyFormat::BinaryLittleEndian => read_body(&header, &mut BinaryValues { bytes: body, pos: 0 }),
    };
    let data = data.map_err(|m| IoError::parse(path, m))?;
    if let Some(bad) = data.faces.iter().flatten().find(|&&i| i >= data.vertices.len()) {
        return Err(IoError::parse(path, format!("face refers to vertex {bad} of {}", data.vertices.len())));
    }
    Ok(data)
}

/// Writes doubles for coordinates and `int` face indices.
pub fn write_ply(path: &Path, data: &PlyData, format: PlyFormat) -> Result<(), IoError> {
    if data.normals.as_ref().is_some_and(|n| n.len() != data.vertices.len()) {
        return Err(IoError::parse(path, "normal count differs from vertex count"));
    }
    if data.faces.iter().flatten().any(|&i| i >= data.vertices.len() || i > i32::MAX as usize) {
        return Err(IoError::parse(path, "face refers to a missing vertex"));
    }
    let mut header = String::from("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    if let Some(u) = data.unit {
        let _ = writeln!(header, "comment unit {}", unit_name(u));
    }
    let _ = writeln!(header, "element vertex {}", data.vertices.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if data.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if !data.faces.is_empty() {
        let _ = writeln!(header, "element face {}", data.faces.len());
        header.push_str("property list uchar int vertex_indices\n");
    }
    header.push_str("end_header\n");

    let mut out = header.into_bytes();
    for (i, v) in data.vertices.iter().enumerate() {
        let mut row: Vec<f64> = v.iter().copied().collect();
        if let Some(n) = &data.normals {
            row.extend(n[i].iter());
        }
        match format {
            PlyFormat::Ascii => {
                let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
            PlyFormat::BinaryLittleEndian => row.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    for f in &data.faces {
        let [a, b, c] = f.map(|i| i as i32);
        match format {
            PlyFormat::Ascii => out.extend_from_slice(format!("3 {a} {b} {c}\n").as_bytes()),
            PlyFormat::BinaryLittleEndian => {
                out.push(3);
                [a, b, c].iter().for_each(|i| out.extend_from_slice(&i.to_le_bytes()));
            }
        }
    }
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> PlyData {
        PlyData {
            vertices: vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(1.5, 0.0, 0.0),
                Vector3::new(0.0, -2.25, 0.0),
                Vector3::new(0.1, 0.2, 1.0 / 3.0),
            ],
            normals: None,
            faces: vec![[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]],
            unit: Some(Unit::Millimeters),
        }
    }

    #[test]
    fn roundtrip_both_encodings() {
        let dir = tempfile::tempdir().unwrap();
        let mut with_normals = tetra();
        with_normals.faces.clear();
        with_normals.normals = Some(vec![Vector3::z(); 4]);
        for data in [tetra(), with_normals] {
            for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
                let p = dir.path().join("m.ply");
                write_ply(&p, &data, fmt).unwrap();
                assert_eq!(read_ply(&p).unwrap(), data);
            }
        }
    }

    #[test]
    fn reads_foreign_float_file_with_quads_and_extra_properties() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment made elsewhere\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_index\nproperty int flags\nend_header\n".to_vec();
        for (i, v) in [[0.0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]].iter().enumerate() {
            v.iter().for_each(|c| bytes.extend_from_slice(&c.to_le_bytes()));
            bytes.push(i as u8 * 10);
        }
        bytes.push(4);
        [0u32, 1, 2, 3].iter().for_each(|i| bytes.extend_from_slice(&i.to_le_bytes()));
        bytes.extend_from_slice(&7i32.to_le_bytes());
        std::fs::write(&p, &bytes).unwrap();
        let d = read_ply(&p).unwrap();
        assert_eq!(d.vertices.len(), 4);
        assert_eq!(d.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(d.unit, None);
        assert!(d.to_mesh(Some(Unit::Centimeters)).is_ok());
    }

    #[test]
    fn rejects_broken_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.ply");
        let cases: [&[u8]; 5] = [
            b"plx\n",
            b"ply\nformat binary_big_endian 1.0\nend_header\n",
            b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n3 0 1 2\n",
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n",
        ];
        for c in cases {
            std::fs::write(&p, c).unwrap();
            assert!(read_ply(&p).is_err(), "{}", String::from_utf8_lossy(c));
        }
    }
}
