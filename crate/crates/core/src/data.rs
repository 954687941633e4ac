//! Datasets: manifests, PPM/PGM decoding, resizing and a synthetic generator.
//!
//! Manifest files are CSV with header `id,path,label`. Optional directives
//! before the header:
//!
//! ```text
//! # labels: red,green,blue
//! # size: 32x32
//! id,path,label
//! img_00000,img_00000.ppm,0
//! ```
//!
//! `labels` declares the class vocabulary (label indices must fall inside
//! it); without it the vocabulary is `0..=max_label`. `size` declares the
//! image size (height x width). Paths are relative to the manifest's
//! directory. Only binary PPM (`P6`) and PGM (`P5`) with 8-bit samples are
//! decoded; samples are scaled to `[0, 1]` and grayscale is replicated to
//! three channels. Convert other formats first, e.g.
//! `convert in.jpg -depth 8 out.ppm`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    /// `[3, height, width]`, values in `[0, 1]`.
    pub image: Tensor,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub label: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub labels: Vec<String>,
    /// `(height, width)` if declared.
    pub size: Option<(usize, usize)>,
}

impl DatasetManifest {
    pub fn classes(&self) -> usize {
        self.labels.len()
    }

    /// Resolves an entry's image path against the manifest directory.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(&entry.path)
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(path, &text)
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<DatasetManifest> {
    let err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut declared_labels: Option<Vec<String>> = None;
    let mut size = None;
    let mut preamble = 0;
    for raw in text.lines() {
        let t = raw.trim();
        if !(t.is_empty() || t.starts_with('#')) {
            break;
        }
        preamble += 1;
        let Some(directive) = t.strip_prefix('#') else {
            continue;
        };
        let line = preamble;
        if let Some(v) = directive.trim().strip_prefix("labels:") {
            declared_labels = Some(v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        } else if let Some(v) = directive.trim().strip_prefix("size:") {
            let dims: Vec<usize> = v.trim().split('x').filter_map(|p| p.parse().ok()).collect();
            match dims[..] {
                [h, w] if h > 0 && w > 0 => size = Some((h, w)),
                _ => return Err(err(line, format!("bad size directive `{}`", v.trim()))),
            }
        }
    }
    let body: String = text.lines().skip(preamble).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| err(preamble + 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "path", "label"] {
        return Err(err(preamble + 1, "header must be `id,path,label`".into()));
    }
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + preamble);
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize) + preamble;
        let (id, img, label) = (&rec[0], &rec[1], &rec[2]);
        let label: usize = label
            .parse()
            .map_err(|_| err(line, format!("label `{label}` is not a class index")))?;
        if let Some(vocab) = &declared_labels {
            if label >= vocab.len() {
                return Err(err(
                    line,
                    format!("label {label} outside vocabulary of {} classes", vocab.len()),
                ));
            }
        }
        if id.is_empty() {
            return Err(err(line, "empty image id".into()));
        }
        if !ids.insert(id.to_string()) {
            return Err(err(line, format!("duplicate image id `{id}`")));
        }
        entries.push(ManifestEntry {
            id: id.to_string(),
            path: PathBuf::from(img),
            label,
            line,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labels = declared_labels.unwrap_or_else(|| {
        let max = entries.iter().map(|e| e.label).max().unwrap_or(0);
        (0..=max).map(|i| i.to_string()).collect()
    });
    Ok(DatasetManifest {
        path: path.to_path_buf(),
        entries,
        labels,
        size,
    })
}

/// Renders a manifest for `records`, whose images live at `<id>.ppm`.
pub fn manifest_text(labels: &[String], size: (usize, usize), records: &[(String, usize)]) -> String {
    let mut s = format!("# labels: {}\n# size: {}x{}\nid,path,label\n", labels.join(","), size.0, size.1);
    for (id, label) in records {
        let _ = writeln!(s, "{id},{id}.ppm,{label}");
    }
    s
}

fn parse_pnm(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(format!("unsupported magic number `{other}` (expected P5 or P6)")),
    };
    let mut number = |what: &str| -> std::result::Result<usize, String> {
        let t = token()?;
        t.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("bad {what} `{t}`"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval > 255 {
        return Err(format!("16-bit samples (maxval {maxval}) are not supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let needed = width * height * channels;
    let raster = bytes
        .get(start..start + needed)
        .ok_or_else(|| format!("truncated pixel data: expected {needed} bytes"))?;
    let plane = width * height;
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in raster.chunks_exact(channels).enumerate() {
        for c in 0..3 {
            let v = px[if channels == 1 { 0 } else { c }] as f64 / maxval as f64;
            data[c * plane + i] = v.min(1.0);
        }
    }
    Tensor::new(&[3, height, width], data).map_err(|e| e.to_string())
}

/// Decodes a binary PPM/PGM file into a `[3, height, width]` tensor.
pub fn decode_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image_bytes(&bytes).map_err(|message| Error::Image {
        path: path.to_path_buf(),
        message,
    })
}

pub fn decode_image_bytes(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    parse_pnm(bytes)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a `[3, h, w]` tensor as binary PPM with 8-bit samples.
pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let &[3, h, w] = image.shape() else {
        return Err(Error::InvalidShape(image.shape().to_vec()));
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    for i in 0..plane {
        for c in 0..3 {
            out.push(quantize(image.data()[c * plane + i]));
        }
    }
    Ok(out)
}

/// Encodes the first channel of a `[3, h, w]` (or `[1, h, w]`) tensor as binary PGM.
pub fn encode_pgm(image: &Tensor) -> Result<Vec<u8>> {
    let &[_, h, w] = image.shape() else {
        return Err(Error::InvalidShape(image.shape().to_vec()));
    };
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data()[..h * w].iter().map(|&v| quantize(v)));
    Ok(out)
}

/// Bilinear resize of a `[c, h, w]` tensor with corner-aligned sampling:
/// output pixel `i` samples input coordinate `i * (in - 1) / (out - 1)`
/// (coordinate 0 when `out == 1`). Equal sizes return the input unchanged.
pub fn resize_bilinear(image: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let &[c, h, w] = image.shape() else {
        return Err(Error::InvalidShape(image.shape().to_vec()));
    };
    if height == 0 || width == 0 {
        return Err(Error::InvalidShape(vec![c, height, width]));
    }
    if (h, w) == (height, width) {
        return Ok(image.clone());
    }
    let coords = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                let src = if out == 1 {
                    0.0
                } else {
                    i as f64 * (inp - 1) as f64 / (out - 1) as f64
                };
                let lo = (src.floor() as usize).min(inp - 1);
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let ys = coords(height, h);
    let xs = coords(width, w);
    let src = image.data();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        let p = &src[ch * h * w..][..h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(&[c, height, width], out)
}

/// Stacks `[3, h, w]` images into a `[n, 3, h, w]` batch.
pub fn stack(images: &[&Tensor]) -> Result<Tensor> {
    let first = images.first().ok_or(Error::EmptyDataset)?;
    let mut shape = vec![images.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(images.len() * first.len());
    for img in images {
        if img.shape() != first.shape() {
            return Err(Error::ShapeMismatch {
                op: "stack",
                left: first.shape().to_vec(),
                right: img.shape().to_vec(),
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::new(&shape, data)
}

/// Validated in-memory images with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    labels: Vec<String>,
}

impl Dataset {
    /// Checks ids are unique, labels fit the vocabulary, and all images share
    /// one `[3, h, w]` shape with values in `[0, 1]`.
    pub fn new(records: Vec<ImageRecord>, labels: Vec<String>) -> Result<Dataset> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let shape = first.image.shape().to_vec();
        if shape.len() != 3 || shape[0] != 3 {
            return Err(Error::InvalidShape(shape));
        }
        let mut ids = HashSet::new();
        for r in &records {
            if r.image.shape() != shape {
                return Err(Error::ShapeMismatch {
                    op: "dataset",
                    left: shape,
                    right: r.image.shape().to_vec(),
                });
            }
            if r.label >= labels.len() {
                return Err(Error::LabelOutOfRange {
                    label: r.label,
                    classes: labels.len(),
                });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate image id `{}`", r.id)));
            }
            if r.image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("image `{}` has values outside [0, 1]", r.id)));
            }
        }
        Ok(Dataset { records, labels })
    }

    /// Decodes every manifest entry, resizing to `height x width`.
    pub fn from_manifest(manifest: &DatasetManifest, height: usize, width: usize) -> Result<Dataset> {
        let records = manifest
            .entries
            .par_iter()
            .map(|e| {
                let img = decode_image(manifest.resolve(e))?;
                Ok(ImageRecord {
                    id: e.id.clone(),
                    image: resize_bilinear(&img, height, width)?,
                    label: e.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(records, manifest.labels.clone())
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(height, width)` of every image.
    pub fn image_size(&self) -> (usize, usize) {
        let s = self.records[0].image.shape();
        (s[1], s[2])
    }

    /// Images and labels at `indices`, stacked into a batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let images: Vec<&Tensor> = indices.iter().map(|&i| &self.records[i].image).collect();
        let labels = indices.iter().map(|&i| self.records[i].label).collect();
        Ok((stack(&images)?, labels))
    }

    /// Writes each image as `<dir>/<id>.ppm` plus `<dir>/manifest.csv`;
    /// returns the manifest path.
    pub fn write_ppm_dir(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for r in &self.records {
            let p = dir.join(format!("{}.ppm", r.id));
            std::fs::write(&p, encode_ppm(&r.image)?).map_err(|e| Error::io(&p, e))?;
        }
        let listing: Vec<(String, usize)> = self.records.iter().map(|r| (r.id.clone(), r.label)).collect();
        let manifest = dir.join("manifest.csv");
        std::fs::write(&manifest, manifest_text(&self.labels, self.image_size(), &listing))
            .map_err(|e| Error::io(&manifest, e))?;
        Ok(manifest)
    }
}

/// Fully saturated color at `hue` in `[0, 1)`.
fn hue_to_rgb(hue: f64) -> [f64; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    match h as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

#[derive(Debug, Clone, Copy)]
enum Pattern {
    Disk,
    Square,
    Bars,
    Ring,
}

/// Class-distinguishable images: each class draws its own pattern in its
/// own hue at a random position and scale over a dark noisy background.
/// Images are quantized to 8 bits, so writing them as PPM is lossless.
/// Records are grouped by class, ids are `img_00000`, `img_00001`, ...
pub fn generate_synthetic(classes: usize, per_class: usize, size: usize, seed: u64) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || size < 4 {
        return Err(Error::InvalidArgument(format!(
            "synthetic dataset needs classes >= 1, per_class >= 1, size >= 4 (got {classes}, {per_class}, {size})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = [Pattern::Disk, Pattern::Square, Pattern::Bars, Pattern::Ring];
    let plane = size * size;
    let s = size as f64;
    let mut records = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let color = hue_to_rgb(class as f64 / classes as f64);
        let pattern = patterns[class % patterns.len()];
        for _ in 0..per_class {
            let radius = rng.gen_range(0.28..0.42) * s;
            let cy = rng.gen_range(0.35..0.65) * s;
            let cx = rng.gen_range(0.35..0.65) * s;
            let tint: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.08..0.08));
            let base: f64 = rng.gen_range(0.05..0.2);
            let mut data = vec![0.0; 3 * plane];
            for y in 0..size {
                for x in 0..size {
                    let dy = y as f64 + 0.5 - cy;
                    let dx = x as f64 + 0.5 - cx;
                    let dist = (dy * dy + dx * dx).sqrt();
                    let inside = match pattern {
                        Pattern::Disk => dist <= radius,
                        Pattern::Square => dy.abs() <= radius * 0.85 && dx.abs() <= radius * 0.85,
                        Pattern::Bars => dx.abs() <= radius && ((y as f64 / (s / 8.0)) as usize).is_multiple_of(2),
                        Pattern::Ring => dist <= radius && dist >= radius * 0.55,
                    };
                    for c in 0..3 {
                        let noise: f64 = rng.gen_range(-0.05..0.05);
                        let v = if inside {
                            color[c] * 0.85 + tint[c] + noise
                        } else {
                            base + noise
                        };
                        data[c * plane + y * size + x] = quantize(v) as f64 / 255.0;
                    }
                }
            }
            records.push(ImageRecord {
                id: format!("img_{:05}", records.len()),
                image: Tensor::new(&[3, size, size], data)?,
                label: class,
            });
        }
    }
    let labels = (0..classes).map(|c| format!("class{c}")).collect();
    Dataset::new(records, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "id,path,label\na,a.ppm,0\nb,b.ppm,1\n");
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.classes(), 2);
        assert_eq!(m.resolve(&m.entries[0]), dir.path().join("a.ppm"));
    }

    #[test]
    fn manifest_errors_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "# labels: x,y,z\nid,path,label\na,a.ppm,0\nb,b.ppm,5\n");
        match load_manifest(&p) {
            Err(Error::Manifest { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("vocabulary of 3"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let p = write(dir.path(), "d.csv", "id,path,label\na,a.ppm,0\na,b.ppm,1\n");
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 3, .. })));
        let p = write(dir.path(), "e.csv", "id,path,label\n");
        assert!(matches!(load_manifest(&p), Err(Error::EmptyDataset)));
        let p = write(dir.path(), "h.csv", "name,file,class\na,a.ppm,0\n");
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 1, .. })));
        match load_manifest(dir.path().join("missing.csv")) {
            Err(Error::Io { path, .. }) => assert!(path.ends_with("missing.csv")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decode_examples() {
        let t = decode_image_bytes(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(t.shape(), &[3, 1, 1]);
        assert_eq!(t.data(), &[1.0, 0.0, 0.0]);
        let t = decode_image_bytes(b"P5\n# gray\n2 1\n255\n\x80\x80").unwrap();
        assert!(t.data().iter().all(|&v| v == 128.0 / 255.0));
        assert!(decode_image_bytes(b"P6\n2 2\n255\n\x00\x00\x00").unwrap_err().contains("truncated"));
        assert!(decode_image_bytes(b"P3\n1 1\n255\n0 0 0").unwrap_err().contains("magic"));
        assert!(decode_image_bytes(b"P6\n1 1\n65535\n\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn ppm_and_pgm_roundtrip() {
        let data: Vec<f64> = (0..3 * 4 * 5).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        let img = Tensor::new(&[3, 4, 5], data).unwrap();
        assert_eq!(decode_image_bytes(&encode_ppm(&img).unwrap()).unwrap(), img);
        let gray = decode_image_bytes(&encode_pgm(&img).unwrap()).unwrap();
        assert_eq!(&gray.data()[..20], &img.data()[..20]);
        assert_eq!(&gray.data()[20..40], &img.data()[..20]);
    }

    #[test]
    fn resize_examples() {
        let img = Tensor::new(&[1, 2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let big = resize_bilinear(&img, 3, 3).unwrap();
        assert_eq!(big.data()[4], 0.5);
        assert_eq!(big.data()[0], 0.0);
        assert_eq!(big.data()[2], 1.0);
        assert_eq!(resize_bilinear(&img, 2, 2).unwrap(), img);
        let flat = Tensor::full(&[3, 5, 7], 0.3).unwrap();
        for (h, w) in [(2, 2), (9, 4), (1, 1), (13, 13)] {
            let r = resize_bilinear(&flat, h, w).unwrap();
            assert!(r.data().iter().all(|&v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn synthetic_is_balanced_and_deterministic() {
        let a = generate_synthetic(5, 40, 32, 7).unwrap();
        assert_eq!(a.len(), 200);
        for c in 0..5 {
            assert_eq!(a.records().iter().filter(|r| r.label == c).count(), 40);
        }
        let b = generate_synthetic(5, 40, 32, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(5, 40, 32, 8).unwrap());
    }

    #[test]
    fn synthetic_classes_differ_in_mean_color() {
        let ds = generate_synthetic(5, 40, 32, 7).unwrap();
        let means: Vec<[f64; 3]> = (0..5)
            .map(|c| {
                let mut m = [0.0; 3];
                let imgs: Vec<_> = ds.records().iter().filter(|r| r.label == c).collect();
                for r in &imgs {
                    for (ch, acc) in m.iter_mut().enumerate() {
                        *acc += r.image.data()[ch * 1024..][..1024].iter().sum::<f64>() / 1024.0;
                    }
                }
                m.map(|v| v / imgs.len() as f64)
            })
            .collect();
        for i in 0..5 {
            for j in i + 1..5 {
                let diff = (0..3).map(|c| (means[i][c] - means[j][c]).abs()).fold(0.0, f64::max);
                assert!(diff > 0.1, "classes {i} and {j}: {diff}");
            }
        }
    }

    #[test]
    fn written_dataset_reloads_identically() {
        let ds = generate_synthetic(3, 4, 16, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = ds.write_ppm_dir(dir.path()).unwrap();
        let m = load_manifest(&manifest).unwrap();
        assert_eq!(m.size, Some((16, 16)));
        assert_eq!(m.labels, ds.labels());
        let back = Dataset::from_manifest(&m, 16, 16).unwrap();
        assert_eq!(back, ds);
    }
}
