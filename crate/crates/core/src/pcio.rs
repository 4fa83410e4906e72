//! Point cloud I/O, result writers, and voxel-occupancy counting.
//!
//! Two on-disk cloud formats are supported: a PLY-ascii subset and a
//! columnar binary format (magic `SPW1`). Result sets are written as
//! tab-separated text so external tooling can diff them.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::geom::{self, Vec3};
use crate::instance::{Instance, InstanceSet, Provenance};

pub const DEFAULT_VOXEL_SIZE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    ColumnarBinary,
}

impl CloudFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ply-ascii" => Ok(CloudFormat::PlyAscii),
            "columnar-binary" => Ok(CloudFormat::ColumnarBinary),
            other => Err(Error::Validation(format!("unknown cloud format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<Vec3>>,
    pub normals: Option<Vec<Vec3>>,
    pub gt_semantic: Option<Vec<i32>>,
    pub gt_instance: Option<Vec<i32>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.positions.iter().enumerate() {
            if !geom::is_finite(*p) {
                return Err(Error::Validation(format!(
                    "non-finite coordinate at point {i}"
                )));
            }
        }
        let n = self.len();
        for (name, opt) in [("colors", &self.colors), ("normals", &self.normals)] {
            if let Some(v) = opt {
                if v.len() != n {
                    return Err(Error::Validation(format!(
                        "{name} length {} does not match point count {n}",
                        v.len()
                    )));
                }
                for (i, x) in v.iter().enumerate() {
                    if !geom::is_finite(*x) {
                        return Err(Error::Validation(format!(
                            "non-finite {name} at point {i}"
                        )));
                    }
                }
            }
        }
        if let Some(normals) = &self.normals {
            for (i, nv) in normals.iter().enumerate() {
                if (geom::norm(*nv) - 1.0).abs() > 1e-6 {
                    return Err(Error::Validation(format!(
                        "normal at point {i} is not unit length"
                    )));
                }
            }
        }
        for (name, opt) in [
            ("gt_semantic", &self.gt_semantic),
            ("gt_instance", &self.gt_instance),
        ] {
            if let Some(v) = opt {
                if v.len() != n {
                    return Err(Error::Validation(format!(
                        "{name} length {} does not match point count {n}",
                        v.len()
                    )));
                }
            }
        }
        // each instance id must map to a single semantic class
        if let (Some(inst), Some(sem)) = (&self.gt_instance, &self.gt_semantic) {
            let mut seen: std::collections::BTreeMap<i32, i32> = Default::default();
            for i in 0..n {
                if inst[i] < 0 {
                    continue;
                }
                match seen.get(&inst[i]) {
                    Some(&c) if c != sem[i] => {
                        return Err(Error::Validation(format!(
                            "instance {} spans semantic classes {c} and {}",
                            inst[i], sem[i]
                        )));
                    }
                    None => {
                        seen.insert(inst[i], sem[i]);
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Ground-truth instance ids present (excluding -1), sorted.
    pub fn gt_instance_ids(&self) -> Vec<i32> {
        match &self.gt_instance {
            Some(v) => {
                let set: BTreeSet<i32> = v.iter().copied().filter(|&i| i >= 0).collect();
                set.into_iter().collect()
            }
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub origin: Vec3,
    pub occupied: BTreeSet<[i64; 3]>,
}

impl VoxelGrid {
    pub fn count(&self) -> usize {
        self.occupied.len()
    }
}

#[inline]
pub fn voxel_index(p: Vec3, origin: Vec3, voxel_size: f64) -> [i64; 3] {
    [
        ((p[0] - origin[0]) / voxel_size).floor() as i64,
        ((p[1] - origin[1]) / voxel_size).floor() as i64,
        ((p[2] - origin[2]) / voxel_size).floor() as i64,
    ]
}

fn min_corner(positions: &[Vec3]) -> Vec3 {
    let mut m = positions[0];
    for p in positions {
        for a in 0..3 {
            m[a] = m[a].min(p[a]);
        }
    }
    m
}

/// Voxelizes a point subset on a grid anchored at the subset's minimum corner.
pub fn voxel_grid(positions: &[Vec3], voxel_size: f64) -> Result<VoxelGrid> {
    if voxel_size <= 0.0 {
        return Err(Error::Domain(format!(
            "voxel_size must be positive, got {voxel_size}"
        )));
    }
    if positions.is_empty() {
        return Err(Error::Domain("voxel grid over empty point set".into()));
    }
    let origin = min_corner(positions);
    let occupied = positions
        .iter()
        .map(|&p| voxel_index(p, origin, voxel_size))
        .collect();
    Ok(VoxelGrid {
        voxel_size,
        origin,
        occupied,
    })
}

/// Number of occupied voxels over the subset, grid anchored at the subset
/// minimum corner so the count is translation-invariant.
pub fn voxel_count(positions: &[Vec3], voxel_size: f64) -> Result<usize> {
    Ok(voxel_grid(positions, voxel_size)?.count())
}

// ---------------------------------------------------------------------------
// Cloud loading / saving
// ---------------------------------------------------------------------------

pub fn load_point_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let cloud = match format {
        CloudFormat::PlyAscii => load_ply_ascii(path)?,
        CloudFormat::ColumnarBinary => load_columnar_binary(path)?,
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn save_point_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    match format {
        CloudFormat::PlyAscii => save_ply_ascii(path, cloud),
        CloudFormat::ColumnarBinary => save_columnar_binary(path, cloud),
    }
}

fn load_ply_ascii(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let mut expect = |want: &str, lineno: &mut usize| -> Result<()> {
        match lines.next() {
            Some((n, l)) if l.trim() == want => {
                *lineno = n;
                Ok(())
            }
            Some((n, l)) => Err(Error::parse(path, n + 1, format!("expected `{want}`, got `{l}`"))),
            None => Err(Error::parse(path, 0, format!("missing `{want}`"))),
        }
    };
    let mut lineno = 0usize;
    expect("ply", &mut lineno)?;
    expect("format ascii 1.0", &mut lineno)?;

    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut header_end = 0usize;
    for (n, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            header_end = n + 1;
            break;
        } else if let Some(rest) = line.strip_prefix("element vertex ") {
            count = Some(rest.trim().parse().map_err(|_| {
                Error::parse(path, n + 1, format!("bad vertex count `{rest}`"))
            })?);
        } else if line.starts_with("element ") {
            return Err(Error::parse(path, n + 1, "only vertex elements are supported"));
        } else if let Some(rest) = line.strip_prefix("property ") {
            let mut it = rest.split_whitespace();
            let _ty = it
                .next()
                .ok_or_else(|| Error::parse(path, n + 1, "malformed property"))?;
            let name = it
                .next()
                .ok_or_else(|| Error::parse(path, n + 1, "malformed property"))?;
            props.push(name.to_string());
        } else if line.starts_with("comment") || line.is_empty() {
            continue;
        } else {
            return Err(Error::parse(path, n + 1, format!("unrecognized header line `{line}`")));
        }
    }
    if header_end == 0 {
        return Err(Error::parse(path, 0, "missing end_header"));
    }
    let count = count.ok_or_else(|| Error::parse(path, 0, "missing element vertex"))?;

    let idx = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(path, 0, "header must declare x, y, z")),
    };
    let color_idx = match (idx("red"), idx("green"), idx("blue")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let normal_idx = match (idx("nx"), idx("ny"), idx("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let sem_idx = idx("semantic");
    let inst_idx = idx("instance");

    let mut cloud = PointCloud {
        positions: Vec::with_capacity(count),
        colors: color_idx.map(|_| Vec::with_capacity(count)),
        normals: normal_idx.map(|_| Vec::with_capacity(count)),
        gt_semantic: sem_idx.map(|_| Vec::with_capacity(count)),
        gt_instance: inst_idx.map(|_| Vec::with_capacity(count)),
    };

    let mut rows = 0usize;
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if rows == count {
            return Err(Error::parse(path, n + 1, "more rows than declared"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != props.len() {
            return Err(Error::parse(
                path,
                n + 1,
                format!("expected {} fields, got {}", props.len(), fields.len()),
            ));
        }
        let f = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(path, n + 1, format!("bad float `{}`", fields[i])))
        };
        let int = |i: usize| -> Result<i32> {
            fields[i]
                .parse::<i32>()
                .map_err(|_| Error::parse(path, n + 1, format!("bad integer `{}`", fields[i])))
        };
        cloud.positions.push([f(ix)?, f(iy)?, f(iz)?]);
        if let (Some((a, b, c)), Some(cols)) = (color_idx, cloud.colors.as_mut()) {
            cols.push([f(a)?, f(b)?, f(c)?]);
        }
        if let (Some((a, b, c)), Some(ns)) = (normal_idx, cloud.normals.as_mut()) {
            ns.push([f(a)?, f(b)?, f(c)?]);
        }
        if let (Some(i), Some(sem)) = (sem_idx, cloud.gt_semantic.as_mut()) {
            sem.push(int(i)?);
        }
        if let (Some(i), Some(inst)) = (inst_idx, cloud.gt_instance.as_mut()) {
            inst.push(int(i)?);
        }
        rows += 1;
    }
    if rows != count {
        return Err(Error::parse(
            path,
            0,
            format!("declared {count} vertices but found {rows}"),
        ));
    }
    Ok(cloud)
}

fn save_ply_ascii(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        s.push_str("property float red\nproperty float green\nproperty float blue\n");
    }
    if cloud.normals.is_some() {
        s.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if cloud.gt_semantic.is_some() {
        s.push_str("property int semantic\n");
    }
    if cloud.gt_instance.is_some() {
        s.push_str("property int instance\n");
    }
    s.push_str("end_header\n");
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let _ = write!(s, "{} {} {}", p[0], p[1], p[2]);
        if let Some(c) = &cloud.colors {
            let _ = write!(s, " {} {} {}", c[i][0], c[i][1], c[i][2]);
        }
        if let Some(nrm) = &cloud.normals {
            let _ = write!(s, " {} {} {}", nrm[i][0], nrm[i][1], nrm[i][2]);
        }
        if let Some(sem) = &cloud.gt_semantic {
            let _ = write!(s, " {}", sem[i]);
        }
        if let Some(inst) = &cloud.gt_instance {
            let _ = write!(s, " {}", inst[i]);
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

const BINARY_MAGIC: &[u8; 4] = b"SPW1";

fn save_columnar_binary(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for p in &cloud.positions {
        for a in 0..3 {
            buf.extend_from_slice(&(p[a] as f32).to_le_bytes());
        }
    }
    let vec3_section = |opt: &Option<Vec<Vec3>>, buf: &mut Vec<u8>| {
        match opt {
            Some(v) => {
                buf.push(1);
                for x in v {
                    for a in 0..3 {
                        buf.extend_from_slice(&(x[a] as f32).to_le_bytes());
                    }
                }
            }
            None => buf.push(0),
        }
    };
    vec3_section(&cloud.colors, &mut buf);
    vec3_section(&cloud.normals, &mut buf);
    let i32_section = |opt: &Option<Vec<i32>>, buf: &mut Vec<u8>| {
        match opt {
            Some(v) => {
                buf.push(1);
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
            None => buf.push(0),
        }
    };
    i32_section(&cloud.gt_semantic, &mut buf);
    i32_section(&cloud.gt_instance, &mut buf);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::parse(
                self.path,
                0,
                format!("truncated file at offset {}", self.pos),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn load_columnar_binary(path: &Path) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader {
        buf: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != BINARY_MAGIC {
        return Err(Error::parse(path, 0, "bad magic, expected SPW1"));
    }
    let n = r.u32()? as usize;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push([r.f32()? as f64, r.f32()? as f64, r.f32()? as f64]);
    }
    let vec3_section = |r: &mut ByteReader| -> Result<Option<Vec<Vec3>>> {
        if r.u8()? == 0 {
            return Ok(None);
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push([r.f32()? as f64, r.f32()? as f64, r.f32()? as f64]);
        }
        Ok(Some(v))
    };
    let colors = vec3_section(&mut r)?;
    let normals = vec3_section(&mut r)?;
    let i32_section = |r: &mut ByteReader| -> Result<Option<Vec<i32>>> {
        if r.u8()? == 0 {
            return Ok(None);
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(r.i32()?);
        }
        Ok(Some(v))
    };
    let gt_semantic = i32_section(&mut r)?;
    let gt_instance = i32_section(&mut r)?;
    Ok(PointCloud {
        positions,
        colors,
        normals,
        gt_semantic,
        gt_instance,
    })
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Writes instance membership and the metrics report next to `stem`:
/// `<stem>.assignments.tsv`, `<stem>.instances.tsv`, `<stem>.metrics.tsv`.
pub fn write_results(
    stem: &Path,
    num_points: usize,
    instances: &InstanceSet,
    report: &MetricsReport,
) -> Result<()> {
    let mut point_rows: Vec<(i32, i32, f64)> = vec![(-1, -1, 0.0); num_points];
    for (id, inst) in instances.instances.iter().enumerate() {
        for &p in &inst.point_ids {
            point_rows[p] = (id as i32, inst.semantic_class, inst.confidence);
        }
    }
    let mut s = String::from("point_index\tinstance_id\tsemantic_id\tconfidence\n");
    for (p, (inst, sem, conf)) in point_rows.iter().enumerate() {
        let _ = writeln!(s, "{p}\t{inst}\t{sem}\t{conf}");
    }
    let path = with_suffix(stem, ".assignments.tsv");
    fs::write(&path, s).map_err(|e| Error::io(&path, e))?;

    let mut s = String::from("instance_id\tsemantic_id\tconfidence\tnum_superpoints\tnum_points\n");
    for (id, inst) in instances.instances.iter().enumerate() {
        let _ = writeln!(
            s,
            "{id}\t{}\t{}\t{}\t{}",
            inst.semantic_class,
            inst.confidence,
            inst.superpoint_ids.len(),
            inst.point_ids.len()
        );
    }
    let path = with_suffix(stem, ".instances.tsv");
    fs::write(&path, s).map_err(|e| Error::io(&path, e))?;

    let path = with_suffix(stem, ".metrics.tsv");
    fs::write(&path, report.to_tsv()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Rebuilds point-level instance membership from `<stem>.assignments.tsv`.
/// Superpoint ids are not stored in the file, so they come back empty.
pub fn read_results(stem: &Path) -> Result<InstanceSet> {
    let path = with_suffix(stem, ".assignments.tsv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut by_id: std::collections::BTreeMap<i32, Instance> = Default::default();
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(&path, n + 1, "expected 4 columns"));
        }
        let p: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(&path, n + 1, "bad point index"))?;
        let id: i32 = fields[1]
            .parse()
            .map_err(|_| Error::parse(&path, n + 1, "bad instance id"))?;
        if id < 0 {
            continue;
        }
        let sem: i32 = fields[2]
            .parse()
            .map_err(|_| Error::parse(&path, n + 1, "bad semantic id"))?;
        let conf: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(&path, n + 1, "bad confidence"))?;
        let inst = by_id.entry(id).or_insert_with(|| Instance {
            superpoint_ids: BTreeSet::new(),
            semantic_class: sem,
            confidence: conf,
            point_ids: BTreeSet::new(),
        });
        inst.point_ids.insert(p);
    }
    Ok(InstanceSet {
        instances: by_id.into_values().collect(),
        provenance: Provenance::Clustered,
    })
}

pub fn with_suffix(stem: &Path, suffix: &str) -> std::path::PathBuf {
    let mut os = stem.as_os_str().to_os_string();
    os.push(suffix);
    std::path::PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn voxel_count_single_point() {
        assert_eq!(voxel_count(&[[1.0, 2.0, 3.0]], 0.5).unwrap(), 1);
    }

    #[test]
    fn voxel_count_cube_corners() {
        // 8 corners of a unit cube, voxel 0.6: each corner its own voxel
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        assert_eq!(voxel_count(&pts, 0.6).unwrap(), 8);
    }

    #[test]
    fn voxel_count_coincident_points() {
        let pts = vec![[0.3, 0.3, 0.3]; 100];
        assert_eq!(voxel_count(&pts, 0.1).unwrap(), 1);
    }

    #[test]
    fn voxel_count_rejects_empty_and_bad_size() {
        assert!(voxel_count(&[], 0.1).is_err());
        assert!(voxel_count(&[[0.0; 3]], 0.0).is_err());
    }

    #[test]
    fn ply_minimal_three_points() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("min.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n",
        )
        .unwrap();
        let cloud = load_point_cloud(&path, CloudFormat::PlyAscii).unwrap();
        assert_eq!(cloud.len(), 3);
        assert!(cloud.colors.is_none());
        assert!(cloud.normals.is_none());
    }

    #[test]
    fn ply_nan_coordinate_names_point() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.ply");
        fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\nNaN 0 0\n",
        )
        .unwrap();
        let err = load_point_cloud(&path, CloudFormat::PlyAscii).unwrap_err();
        assert!(err.to_string().contains("point 1"), "{err}");
    }

    #[test]
    fn binary_round_trip_is_canonical() {
        let dir = tempdir().unwrap();
        let spec = crate::synth::SceneSpec {
            num_instances: 4,
            points_per_instance: (200, 300),
            ..Default::default()
        };
        let cloud = crate::synth::generate_scene(&spec).unwrap();
        assert_eq!(cloud.len() >= 800, true);
        let p1 = dir.path().join("a.spw");
        let p2 = dir.path().join("b.spw");
        save_point_cloud(&p1, &cloud, CloudFormat::ColumnarBinary).unwrap();
        let reloaded = load_point_cloud(&p1, CloudFormat::ColumnarBinary).unwrap();
        save_point_cloud(&p2, &reloaded, CloudFormat::ColumnarBinary).unwrap();
        // byte comparison of the canonical serialization
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        // a second load is bit-identical to the first
        let again = load_point_cloud(&p2, CloudFormat::ColumnarBinary).unwrap();
        assert_eq!(reloaded.positions, again.positions);
    }

    #[test]
    fn ply_round_trip_exact_positions() {
        let dir = tempdir().unwrap();
        let spec = crate::synth::SceneSpec::default();
        let cloud = crate::synth::generate_scene(&spec).unwrap();
        let path = dir.path().join("rt.ply");
        save_point_cloud(&path, &cloud, CloudFormat::PlyAscii).unwrap();
        let reloaded = load_point_cloud(&path, CloudFormat::PlyAscii).unwrap();
        // shortest round-trip float formatting makes ascii exact as well
        assert_eq!(cloud.positions, reloaded.positions);
        assert_eq!(cloud.gt_instance, reloaded.gt_instance);
    }

    #[test]
    fn results_empty_set_has_header_only_summary() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("res");
        let set = InstanceSet {
            instances: vec![],
            provenance: Provenance::Clustered,
        };
        write_results(&stem, 5, &set, &MetricsReport::default()).unwrap();
        let text = fs::read_to_string(with_suffix(&stem, ".instances.tsv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        let text = fs::read_to_string(with_suffix(&stem, ".assignments.tsv")).unwrap();
        assert_eq!(text.lines().count(), 6); // header + 5 points
    }

    #[test]
    fn results_round_trip_membership() {
        let dir = tempdir().unwrap();
        let stem = dir.path().join("res");
        let set = InstanceSet {
            instances: vec![
                Instance {
                    superpoint_ids: [0usize].into_iter().collect(),
                    semantic_class: 2,
                    confidence: 0.5,
                    point_ids: [0usize, 1, 2].into_iter().collect(),
                },
                Instance {
                    superpoint_ids: [1usize].into_iter().collect(),
                    semantic_class: 3,
                    confidence: 1.0,
                    point_ids: [5usize, 9].into_iter().collect(),
                },
            ],
            provenance: Provenance::Clustered,
        };
        write_results(&stem, 10, &set, &MetricsReport::default()).unwrap();
        let text = fs::read_to_string(with_suffix(&stem, ".assignments.tsv")).unwrap();
        assert_eq!(text.lines().count(), 11);
        let text = fs::read_to_string(with_suffix(&stem, ".instances.tsv")).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back = read_results(&stem).unwrap();
        assert_eq!(back.instances.len(), 2);
        for (a, b) in back.instances.iter().zip(&set.instances) {
            assert_eq!(a.point_ids, b.point_ids);
            assert_eq!(a.semantic_class, b.semantic_class);
            assert_eq!(a.confidence, b.confidence);
        }
    }
}
