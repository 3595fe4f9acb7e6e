//! PLY and camera-list I/O for 3D Gaussian Splatting data.
//!
//! Accepts only binary-little-endian PLY with the community 3DGS vertex
//! layout: `x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2
//! rot_0..3`, all 32-bit floats. Normals are required by the schema but
//! their values are ignored; [`write_ply`] emits them as zeros.

use crate::error::{Error, Result};

/// Number of color SH coefficient channels (`f_rest_0..44`).
pub const SH_CHANNELS: usize = 45;

/// A floating-point Gaussian primitive set.
///
/// Opacity is the stored pre-sigmoid logit and scale the pre-exp log-scale,
/// as in vanilla 3DGS; activations are applied on demand. Values are held
/// as `f64` in memory; the PLY wire format is `f32`, so parsed values are
/// always exactly `f32`-representable.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub positions: Vec<[f64; 3]>,
    pub color_dc: Vec<[f64; 3]>,
    /// Row-major `n x 45` SH coefficients.
    pub color_sh: Vec<f64>,
    pub opacity: Vec<f64>,
    pub scale: Vec<[f64; 3]>,
    pub rotation: Vec<[f64; 4]>,
}

impl GaussianCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Empty arrays sized for `n` primitives, all channels zero.
    pub fn zeros(n: usize) -> Self {
        GaussianCloud {
            positions: vec![[0.0; 3]; n],
            color_dc: vec![[0.0; 3]; n],
            color_sh: vec![0.0; n * SH_CHANNELS],
            opacity: vec![0.0; n],
            scale: vec![[0.0; 3]; n],
            rotation: vec![[0.0; 4]; n],
        }
    }

    /// SH row for primitive `i`.
    pub fn sh_row(&self, i: usize) -> &[f64] {
        &self.color_sh[i * SH_CHANNELS..(i + 1) * SH_CHANNELS]
    }

    /// Keeps only the primitives at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> GaussianCloud {
        let mut out = GaussianCloud {
            positions: Vec::with_capacity(indices.len()),
            color_dc: Vec::with_capacity(indices.len()),
            color_sh: Vec::with_capacity(indices.len() * SH_CHANNELS),
            opacity: Vec::with_capacity(indices.len()),
            scale: Vec::with_capacity(indices.len()),
            rotation: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.positions.push(self.positions[i]);
            out.color_dc.push(self.color_dc[i]);
            out.color_sh.extend_from_slice(self.sh_row(i));
            out.opacity.push(self.opacity[i]);
            out.scale.push(self.scale[i]);
            out.rotation.push(self.rotation[i]);
        }
        out
    }

    /// Checks the shared-length and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 {
            return Err(Error::Parse("cloud has no primitives".into()));
        }
        let lens = [
            self.color_dc.len(),
            self.color_sh.len() / SH_CHANNELS,
            self.opacity.len(),
            self.scale.len(),
            self.rotation.len(),
        ];
        if lens.iter().any(|&l| l != n) || self.color_sh.len() != n * SH_CHANNELS {
            return Err(Error::Shape(format!(
                "attribute arrays disagree on primitive count {n}"
            )));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Data {
                    context: "non-finite position".into(),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

/// One camera pose: id, optical center, 3x3 row-major rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraEntry {
    pub id: i64,
    pub center: [f64; 3],
    pub rotation: [[f64; 3]; 3],
}

/// Parsed camera-list file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CameraList {
    pub entries: Vec<CameraEntry>,
}

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Canonical 3DGS vertex property names, in file order.
fn property_names() -> Vec<String> {
    let mut names = vec!["x", "y", "z", "nx", "ny", "nz"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for i in 0..3 {
        names.push(format!("f_dc_{i}"));
    }
    for i in 0..SH_CHANNELS {
        names.push(format!("f_rest_{i}"));
    }
    names.push("opacity".into());
    for i in 0..3 {
        names.push(format!("scale_{i}"));
    }
    for i in 0..4 {
        names.push(format!("rot_{i}"));
    }
    names
}

struct Header {
    vertex_count: usize,
    /// Byte offset of each required property within a vertex record.
    offsets: Vec<usize>,
    stride: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let pat = b"end_header\n";
    let header_end = bytes
        .windows(pat.len())
        .position(|w| w == pat)
        .map(|p| p + pat.len())
        .ok_or_else(|| Error::Parse("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Parse("header is not valid utf-8".into()))?;

    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("ply") {
        return Err(Error::Parse("first line must be \"ply\"".into()));
    }

    let mut format_seen = false;
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    // (name, size) for every scalar property of the vertex element, in order
    let mut props: Vec<(String, usize, bool)> = Vec::new();

    for line in lines {
        let mut it = line.split_whitespace();
        match it.next().unwrap_or("") {
            "comment" | "obj_info" => {}
            "format" => {
                let fmt = it.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(Error::Parse(format!(
                        "unsupported format `{fmt}` (binary_little_endian only)"
                    )));
                }
                format_seen = true;
            }
            "element" => {
                let name = it
                    .next()
                    .ok_or_else(|| Error::Parse("bad element".into()))?;
                let count: usize = it
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Parse("bad element count".into()))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(Error::Parse("duplicate vertex element".into()));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    // Trailing elements would shift the data layout we do not model.
                    if count > 0 && vertex_count.is_none() {
                        return Err(Error::Parse(format!(
                            "unsupported leading element `{name}`"
                        )));
                    }
                    if count > 0 {
                        return Err(Error::Parse(format!("unsupported extra element `{name}`")));
                    }
                    in_vertex = false;
                }
            }
            "property" => {
                if !in_vertex {
                    continue;
                }
                let ty = it
                    .next()
                    .ok_or_else(|| Error::Parse("bad property".into()))?;
                if ty == "list" {
                    return Err(Error::Parse("list properties are not supported".into()));
                }
                let size = match ty {
                    "char" | "uchar" | "int8" | "uint8" => 1,
                    "short" | "ushort" | "int16" | "uint16" => 2,
                    "int" | "uint" | "float" | "int32" | "uint32" | "float32" => 4,
                    "double" | "float64" => 8,
                    other => return Err(Error::Parse(format!("unknown property type `{other}`"))),
                };
                let name = it
                    .next()
                    .ok_or_else(|| Error::Parse("property without a name".into()))?;
                let is_f32 = matches!(ty, "float" | "float32");
                props.push((name.to_string(), size, is_f32));
            }
            "end_header" => break,
            other => return Err(Error::Parse(format!("unknown header directive `{other}`"))),
        }
    }

    if !format_seen {
        return Err(Error::Parse("missing format line".into()));
    }
    let vertex_count = vertex_count.ok_or_else(|| Error::Parse("missing vertex element".into()))?;
    if vertex_count == 0 {
        return Err(Error::Parse("vertex element is empty".into()));
    }

    let mut stride = 0usize;
    let mut by_name = std::collections::HashMap::new();
    for (name, size, is_f32) in &props {
        by_name.insert(name.clone(), (stride, *is_f32));
        stride += size;
    }

    let mut offsets = Vec::with_capacity(62);
    for name in property_names() {
        match by_name.get(&name) {
            Some(&(off, true)) => offsets.push(off),
            Some(&(_, false)) => {
                return Err(Error::Parse(format!("property `{name}` must be float")))
            }
            None => return Err(Error::Schema(name)),
        }
    }

    Ok(Header {
        vertex_count,
        offsets,
        stride,
        data_start: header_end,
    })
}

/// Parses a binary-little-endian 3DGS PLY file.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianCloud> {
    let header = parse_header(bytes)?;
    let n = header.vertex_count;
    let body = &bytes[header.data_start..];
    let need = n
        .checked_mul(header.stride)
        .ok_or_else(|| Error::Parse("vertex count overflows".into()))?;
    if body.len() < need {
        return Err(Error::Parse(format!(
            "vertex data truncated: need {need} bytes, have {}",
            body.len()
        )));
    }

    let names = property_names();
    let mut cloud = GaussianCloud::zeros(n);
    for i in 0..n {
        let rec = &body[i * header.stride..(i + 1) * header.stride];
        let mut vals = [0f64; 62];
        for (j, &off) in header.offsets.iter().enumerate() {
            let v = f32::from_le_bytes(rec[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Data {
                    context: format!("non-finite value in `{}`", names[j]),
                    index: i,
                });
            }
            vals[j] = v as f64;
        }
        cloud.positions[i] = [vals[0], vals[1], vals[2]];
        // vals[3..6] are normals, ignored
        cloud.color_dc[i] = [vals[6], vals[7], vals[8]];
        cloud.color_sh[i * SH_CHANNELS..(i + 1) * SH_CHANNELS]
            .copy_from_slice(&vals[9..9 + SH_CHANNELS]);
        cloud.opacity[i] = vals[54];
        cloud.scale[i] = [vals[55], vals[56], vals[57]];
        cloud.rotation[i] = [vals[58], vals[59], vals[60], vals[61]];
    }
    Ok(cloud)
}

/// Writes a cloud as binary-little-endian PLY with the canonical layout.
///
/// All values are narrowed to `f32`; normals are written as zeros. Output
/// re-parses to a cloud equal bit-for-bit when the input values are
/// `f32`-representable, which holds for anything produced by [`parse_ply`].
pub fn write_ply(cloud: &GaussianCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let n = cloud.len();
    let mut out = Vec::with_capacity(128 + n * 62 * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {n}\n").as_bytes());
    for name in property_names() {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let mut push = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for i in 0..n {
        for v in cloud.positions[i] {
            push(v);
        }
        for _ in 0..3 {
            push(0.0); // normals
        }
        for v in cloud.color_dc[i] {
            push(v);
        }
        for &v in cloud.sh_row(i) {
            push(v);
        }
        push(cloud.opacity[i]);
        for v in cloud.scale[i] {
            push(v);
        }
        for v in cloud.rotation[i] {
            push(v);
        }
    }
    Ok(out)
}

fn rows_orthonormal(r: &[[f64; 3]; 3]) -> bool {
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > ORTHONORMAL_TOL {
                return false;
            }
        }
    }
    true
}

/// Parses the line-oriented camera list: `id tx ty tz r00 r01 ... r22`.
pub fn parse_cameras(bytes: &[u8]) -> Result<CameraList> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| Error::Parse("camera list is not utf-8".into()))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 13 {
            return Err(Error::Parse(format!(
                "camera line {} has {} fields, expected 13",
                lineno + 1,
                fields.len()
            )));
        }
        let id: i64 = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad camera id on line {}", lineno + 1)))?;
        let mut nums = [0f64; 12];
        for (k, f) in fields[1..].iter().enumerate() {
            nums[k] = f
                .parse()
                .map_err(|_| Error::Parse(format!("bad number on line {}", lineno + 1)))?;
            if !nums[k].is_finite() {
                return Err(Error::Data {
                    context: "non-finite camera value".into(),
                    index: lineno,
                });
            }
        }
        let rotation = [
            [nums[3], nums[4], nums[5]],
            [nums[6], nums[7], nums[8]],
            [nums[9], nums[10], nums[11]],
        ];
        if !rows_orthonormal(&rotation) {
            return Err(Error::Data {
                context: "camera rotation rows not orthonormal".into(),
                index: lineno,
            });
        }
        entries.push(CameraEntry {
            id,
            center: [nums[0], nums[1], nums[2]],
            rotation,
        });
    }
    Ok(CameraList { entries })
}

/// Writes the camera list in the same line format [`parse_cameras`] reads.
pub fn write_cameras(cams: &CameraList) -> Vec<u8> {
    let mut out = String::new();
    for e in &cams.entries {
        out.push_str(&format!("{}", e.id));
        for v in e.center {
            out.push_str(&format!(" {v}"));
        }
        for row in e.rotation {
            for v in row {
                out.push_str(&format!(" {v}"));
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}
