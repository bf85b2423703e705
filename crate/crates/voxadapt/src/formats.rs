//! On-disk formats: PNG label, depth, feature and source-mask images, text
//! poses and scene descriptions, ASCII PLY meshes, binary maps and
//! classifier parameters.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use voxadapt_core::camera::Pose;
use voxadapt_core::image::{FeatureImage, Image};
use voxadapt_core::scene::Scene;
use voxadapt_core::segmenter::ClassifierParams;
use voxadapt_core::segmenter::{DESCRIPTOR_DIM, HIDDEN};
use voxadapt_core::surface::{PixelSource, TriangleMesh};
use voxadapt_core::voxel_map::{Block, MapConfig, SemanticVoxelMap};
use voxadapt_core::{DepthImage, LabelImage, UNDEFINED};

const MAP_MAGIC: &[u8; 8] = b"VXMAP\0\0\0";
const MAP_VERSION: u32 = 1;
const THETA_MAGIC: &[u8; 8] = b"VXTHETA\0";
const THETA_VERSION: u32 = 1;

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn save_png<P, C>(path: &Path, img: &ImageBuffer<P, C>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    create_parent(path)?;
    img.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}

fn open_png(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).with_context(|| format!("reading {}", path.display()))
}

/// 8-bit single channel, class id per pixel, 255 = undefined.
pub fn write_labels(path: &Path, labels: &LabelImage) -> Result<()> {
    let (w, h) = labels.dims();
    let img = GrayImage::from_raw(w as u32, h as u32, labels.as_slice().to_vec()).expect("size");
    save_png(path, &img)
}

pub fn read_labels(path: &Path) -> Result<LabelImage> {
    let img = open_png(path)?;
    ensure!(
        matches!(img, image::DynamicImage::ImageLuma8(_)),
        "{}: expected an 8-bit single-channel image",
        path.display()
    );
    let img = img.into_luma8();
    Ok(Image::from_vec(img.width() as usize, img.height() as usize, img.into_raw())?)
}

/// 16-bit single channel in millimeters, 0 = invalid.
pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    let (w, h) = depth.dims();
    let data: Vec<u16> = depth
        .as_slice()
        .iter()
        .map(|&d| (d * 1000.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w as u32, h as u32, data).expect("size");
    save_png(path, &img)
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let img = open_png(path)?;
    ensure!(
        matches!(img, image::DynamicImage::ImageLuma16(_)),
        "{}: expected a 16-bit single-channel image",
        path.display()
    );
    let img = img.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Image::from_vec(w, h, img.into_raw().into_iter().map(|mm| f64::from(mm) / 1000.0).collect())?)
}

/// 8-bit three channel; values in [0, 1] scaled by 255.
pub fn write_features(path: &Path, features: &FeatureImage) -> Result<()> {
    let (w, h) = features.dims();
    let data: Vec<u8> = features
        .as_slice()
        .iter()
        .flat_map(|f| f.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let img = RgbImage::from_raw(w as u32, h as u32, data).expect("size");
    save_png(path, &img)
}

pub fn read_features(path: &Path) -> Result<FeatureImage> {
    let img = open_png(path)?;
    ensure!(
        matches!(img, image::DynamicImage::ImageRgb8(_)),
        "{}: expected an 8-bit RGB image",
        path.display()
    );
    let img = img.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|v| f64::from(v) / 255.0))
        .collect();
    Ok(Image::from_vec(w, h, data)?)
}

/// Source mask sidecar: 0 undefined, 1 map, 2 fallback.
pub fn write_source_mask(path: &Path, source: &Image<PixelSource>) -> Result<()> {
    write_labels(path, &source.map(|&s| s as u8))
}

pub fn read_source_mask(path: &Path) -> Result<Image<PixelSource>> {
    let raw = read_labels(path)?;
    let mut out = Vec::with_capacity(raw.len());
    for &v in raw.as_slice() {
        out.push(match v {
            0 => PixelSource::Undefined,
            1 => PixelSource::Map,
            2 => PixelSource::Fallback,
            _ => bail!("{}: invalid source value {v}", path.display()),
        });
    }
    Ok(Image::from_vec(raw.width(), raw.height(), out)?)
}

/// One camera-to-world 4×4 matrix per line, row-major.
pub fn write_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut s = String::new();
    for p in poses {
        let m = p.to_matrix();
        let line: Vec<String> = m.iter().map(|v| format!("{v:?}")).collect();
        writeln!(s, "{}", line.join(" ")).expect("string write");
    }
    create_parent(path)?;
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}:{}: bad number", path.display(), i + 1))?;
            let m: [f64; 16] = vals
                .try_into()
                .map_err(|_| anyhow::anyhow!("{}:{}: expected 16 values", path.display(), i + 1))?;
            Pose::from_matrix(&m).with_context(|| format!("{}:{}", path.display(), i + 1))
        })
        .collect()
}

/// Plain-text scene description: boxes, class albedo and light.
pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    let mut s = String::new();
    let [ex, ey, ez] = scene.extent;
    writeln!(s, "seed {}", scene.seed).unwrap();
    writeln!(s, "extent {ex:?} {ey:?} {ez:?}").unwrap();
    writeln!(s, "classes {}", scene.class_count).unwrap();
    for b in &scene.boxes {
        let (lo, hi) = (b.bounds.min, b.bounds.max);
        writeln!(
            s,
            "box {} {:?} {:?} {:?} {:?} {:?} {:?}",
            b.class, lo.x, lo.y, lo.z, hi.x, hi.y, hi.z
        )
        .unwrap();
    }
    for (c, a) in scene.appearance.albedo.iter().enumerate() {
        writeln!(s, "albedo {c} {:?} {:?} {:?}", a[0], a[1], a[2]).unwrap();
    }
    let l = scene.appearance.light_dir;
    writeln!(s, "light {:?} {:?} {:?}", l.x, l.y, l.z).unwrap();
    create_parent(path)?;
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Colour used for class `c` in meshes and previews.
pub fn class_color(c: u8) -> [u8; 3] {
    if c == UNDEFINED {
        return [0, 0, 0];
    }
    const PALETTE: [[u8; 3]; 12] = [
        [152, 223, 138],
        [174, 199, 232],
        [31, 119, 180],
        [255, 187, 120],
        [188, 189, 34],
        [140, 86, 75],
        [255, 152, 150],
        [214, 39, 40],
        [197, 176, 213],
        [148, 103, 189],
        [196, 156, 148],
        [23, 190, 207],
    ];
    PALETTE[usize::from(c) % PALETTE.len()]
}

/// ASCII PLY with per-vertex class id and class colour.
pub fn write_ply(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    writeln!(w, "property uchar class")?;
    writeln!(w, "element face {}", mesh.triangles.len())?;
    writeln!(w, "property list uchar int vertex_indices\nend_header")?;
    for (v, &c) in mesh.vertices.iter().zip(&mesh.vertex_classes) {
        let [r, g, b] = class_color(c);
        writeln!(w, "{:.6} {:.6} {:.6} {r} {g} {b} {c}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Vertex count, face count and per-vertex classes of a PLY written by [`write_ply`].
pub fn read_ply_summary(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let (mut nv, mut nf) = (None, None);
    for line in lines.by_ref() {
        if let Some(n) = line.strip_prefix("element vertex ") {
            nv = Some(n.trim().parse::<usize>()?);
        } else if let Some(n) = line.strip_prefix("element face ") {
            nf = Some(n.trim().parse::<usize>()?);
        } else if line == "end_header" {
            break;
        }
    }
    let (nv, nf) = (nv.context("missing vertex count")?, nf.context("missing face count")?);
    let classes = lines
        .by_ref()
        .take(nv)
        .map(|l| Ok(l.split_whitespace().nth(6).context("short vertex line")?.parse::<u8>()?))
        .collect::<Result<Vec<_>>>()?;
    ensure!(classes.len() == nv, "truncated vertex list");
    ensure!(lines.count() == nf, "face count mismatch");
    Ok((nv, nf, classes))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    what: &'a str,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        ensure!(self.data.len() >= N, "{}: unexpected end of file", self.what);
        let (head, rest) = self.data.split_at(N);
        self.data = rest;
        Ok(head.try_into().expect("length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(data)
}

fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

/// Little-endian: magic, version, config, block count, then per block its
/// coordinate and for every voxel `f32 tsdf, f32 weight, C × f32 log posterior`.
pub fn write_map(path: &Path, map: &SemanticVoxelMap) -> Result<()> {
    let cfg = map.config();
    let lik = map.likelihood();
    let c = cfg.class_count;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAP_MAGIC);
    w.u32(MAP_VERSION);
    w.f64(cfg.voxel_size);
    w.f64(cfg.truncation);
    w.f64(cfg.max_weight);
    w.u32(c as u32);
    w.f64(cfg.epsilon);
    w.u32(cfg.block_edge as u32);
    let coords = map.block_coords();
    w.u64(coords.len() as u64);
    for coord in coords {
        let block = map.block(coord).expect("listed block");
        coord.iter().for_each(|&x| w.i64(x));
        for i in 0..block.tsdf.len() {
            w.f32(block.tsdf[i] as f32);
            w.f32(block.weight[i] as f32);
            for lp in lik.log_posterior(&block.evidence[i * c..(i + 1) * c]) {
                w.f32(lp as f32);
            }
        }
    }
    write_file(path, &w.0)
}

pub fn read_map(path: &Path) -> Result<SemanticVoxelMap> {
    let data = read_file(path)?;
    let what = path.display().to_string();
    let mut r = Reader { data: &data, what: &what };
    ensure!(&r.take::<8>()? == MAP_MAGIC, "{what}: not a map file");
    ensure!(r.u32()? == MAP_VERSION, "{what}: unsupported map version");
    let cfg = MapConfig {
        voxel_size: r.f64()?,
        truncation: r.f64()?,
        max_weight: r.f64()?,
        class_count: r.u32()? as usize,
        epsilon: r.f64()?,
        block_edge: r.u32()? as usize,
    };
    let mut map = SemanticVoxelMap::new(cfg).with_context(|| format!("{what}: bad header"))?;
    let gap = map.likelihood().evidence_gap();
    let c = cfg.class_count;
    let n = cfg.block_edge.pow(3);
    let blocks = r.u64()?;
    let mut lp = vec![0f32; c];
    for _ in 0..blocks {
        let coord = [r.i64()?, r.i64()?, r.i64()?];
        let mut block = Block {
            tsdf: Vec::with_capacity(n),
            weight: Vec::with_capacity(n),
            evidence: Vec::with_capacity(n * c),
        };
        for _ in 0..n {
            block.tsdf.push(f64::from(r.f32()?));
            block.weight.push(f64::from(r.f32()?));
            for v in lp.iter_mut() {
                *v = r.f32()?;
            }
            push_evidence(&mut block.evidence, &lp, gap, cfg.epsilon == 0.0);
        }
        map.insert_block(coord, block)?;
    }
    ensure!(r.data.is_empty(), "{what}: trailing bytes");
    Ok(map)
}

/// Per-class observation counts (relative to the least observed class)
/// that reproduce a stored log posterior.
fn push_evidence(out: &mut Vec<u32>, lp: &[f32], gap: f64, exact: bool) {
    let max = lp.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if exact {
        // Zero-noise likelihood: one surviving class or a uniform posterior.
        let survivors = lp.iter().filter(|&&v| v == max).count();
        out.extend(lp.iter().map(|&v| u32::from(v == max && survivors == 1)));
        return;
    }
    let min = lp.iter().copied().fold(f32::INFINITY, f32::min);
    out.extend(lp.iter().map(|&v| ((f64::from(v) - f64::from(min)) / gap).round() as u32));
}

/// Little-endian: magic, version, descriptor dim, hidden width, classes,
/// featurizer seed, parameter count, then `f64` parameters.
pub fn write_params(path: &Path, params: &ClassifierParams) -> Result<()> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(THETA_MAGIC);
    w.u32(THETA_VERSION);
    w.u32(DESCRIPTOR_DIM as u32);
    w.u32(HIDDEN as u32);
    w.u32(params.classes() as u32);
    w.u64(params.fourier_seed());
    w.u64(params.theta().len() as u64);
    params.theta().iter().for_each(|&v| w.f64(v));
    write_file(path, &w.0)
}

pub fn read_params(path: &Path) -> Result<ClassifierParams> {
    let data = read_file(path)?;
    let what = path.display().to_string();
    let mut r = Reader { data: &data, what: &what };
    ensure!(&r.take::<8>()? == THETA_MAGIC, "{what}: not a parameter file");
    ensure!(r.u32()? == THETA_VERSION, "{what}: unsupported version");
    ensure!(r.u32()? as usize == DESCRIPTOR_DIM, "{what}: descriptor size mismatch");
    ensure!(r.u32()? as usize == HIDDEN, "{what}: hidden width mismatch");
    let classes = r.u32()? as usize;
    let seed = r.u64()?;
    let n = r.u64()? as usize;
    let theta = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    ensure!(r.data.is_empty(), "{what}: trailing bytes");
    Ok(ClassifierParams::from_theta(classes, seed, theta)?)
}
