//! Dataset construction.
//!
//! A 320×320 source image `I` receives a random initial transform `R` of the
//! same kind as the target transform `T`. For each chain length
//! `j ∈ {0, 1, 2, 5}` the composite `T^j ∘ R` is applied once to the
//! high-resolution source, the 160×160 centre is cropped, and the crop is
//! reduced to network resolution (or to the polar source size and then
//! converted to a polar picture). `I_0` is the input; `I_1` the training
//! target; `I_1`, `I_2`, `I_5` the chained test targets.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{PolarGeometry, TopologySpec};
use crate::imaging::{
    crop_center, crop_square, resize_bilinear, to_polar, transform_and_crop,
    upscale_nearest, GrayImage, Picture, TransformSpec,
};

/// Side of the high-resolution source images.
pub const SOURCE_SIZE: usize = 320;
/// Side of the centred window that is reduced to network resolution.
pub const CROP_SIZE: usize = 160;
/// Side of low-resolution generated noise before nearest upscaling.
pub const LOW_RES_SIZE: usize = 32;
/// Chain lengths with test targets.
pub const CHAIN_LENGTHS: [usize; 3] = [1, 2, 5];
/// Cartesian grid that defines a "network pixel" for translations applied
/// to polar datasets.
const REFERENCE_GRID: usize = 16;
/// Intensity at which black-and-white datasets round to 1.
pub const BW_LEVEL: f64 = 0.5;

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "gif", "tif"];

/// Where source images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    /// 32×32 uniform noise, upscaled ×10 with nearest neighbour.
    RandomNoise,
    /// 320×320 uniform noise.
    HighResNoise,
    /// 32×32 binary noise, upscaled ×10.
    RandomDot,
    /// 320×320 binary noise.
    HighResDot,
    /// Directory of images, converted to grayscale.
    ImageDir { path: PathBuf },
    /// Directory of images, thresholded to black and white at network size.
    ImageDirBw { path: PathBuf },
    /// Lexicographically ordered video frames; consecutive frames form pairs.
    FrameSequence { path: PathBuf },
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::RandomNoise => "random_noise",
            SourceKind::HighResNoise => "high_res_noise",
            SourceKind::RandomDot => "random_dot",
            SourceKind::HighResDot => "high_res_dot",
            SourceKind::ImageDir { .. } => "image_dir",
            SourceKind::ImageDirBw { .. } => "image_dir_bw",
            SourceKind::FrameSequence { .. } => "frame_sequence",
        }
    }

    pub fn is_generated(&self) -> bool {
        matches!(
            self,
            SourceKind::RandomNoise
                | SourceKind::HighResNoise
                | SourceKind::RandomDot
                | SourceKind::HighResDot
        )
    }

    fn directory(&self) -> Option<&Path> {
        match self {
            SourceKind::ImageDir { path }
            | SourceKind::ImageDirBw { path }
            | SourceKind::FrameSequence { path } => Some(path),
            _ => None,
        }
    }
}

/// Training pair: network-sized input and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub input: Picture,
    pub target: Picture,
}

/// Test sample: `I_0` plus ground-truth targets keyed by chain length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub input: Picture,
    pub targets: Vec<(usize, Picture)>,
}

impl EvalSample {
    pub fn target(&self, chain: usize) -> Option<&Picture> {
        self.targets
            .iter()
            .find_map(|(j, p)| (*j == chain).then_some(p))
    }

    /// Evaluation sample holding only a one-step target.
    pub fn one_step(pair: SamplePair) -> Self {
        Self {
            input: pair.input,
            targets: vec![(1, pair.target)],
        }
    }
}

/// Everything needed to rebuild a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub source: SourceKind,
    pub transform: TransformSpec,
    pub train_count: usize,
    pub test_count: usize,
    pub topology: TopologySpec,
    pub seed: u64,
    pub bw: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            source: SourceKind::RandomNoise,
            transform: TransformSpec::rotate(10.0),
            train_count: 250,
            test_count: 50,
            topology: TopologySpec::default(),
            seed: 0,
            bw: false,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if let TransformSpec::Scale { factor } = self.transform {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(Error::config(
                    "dataset.transform.factor",
                    format!("must be positive, got {factor}"),
                ));
            }
        }
        if let Some(dir) = self.source.directory() {
            if !dir.is_dir() {
                return Err(Error::config(
                    "dataset.source.path",
                    format!("{} is not a directory", dir.display()),
                ));
            }
        }
        self.topology.build().map_err(|e| Error::config("topology", e.to_string()))?;
        Ok(())
    }

    /// Black-and-white rounding applies.
    pub fn is_bw(&self) -> bool {
        self.bw || matches!(self.source, SourceKind::ImageDirBw { .. })
    }

    /// High-resolution pixels per network pixel, used to scale translations.
    pub fn translation_unit(&self) -> f64 {
        let grid = match self.topology {
            TopologySpec::Cartesian { width, .. } => width,
            TopologySpec::Polar { .. } => REFERENCE_GRID,
        };
        CROP_SIZE as f64 / grid as f64
    }

    /// Human-readable manifest text.
    pub fn to_manifest(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Data(format!("encoding manifest: {e}")))
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("dataset", e.message().to_string()))
    }

    /// SHA-256 of the manifest text, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_manifest()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Per-sample generator: stream `index` of the dataset seed.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Loads an arbitrary image as a 320×320 grayscale source: centre-cropped
/// to a square, then resized.
pub fn load_source(path: &Path) -> Result<GrayImage> {
    let img = GrayImage::load(path)?;
    resize_bilinear(&crop_square(&img), SOURCE_SIZE, SOURCE_SIZE)
}

/// Sorted image files in `dir`.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Draws one 320×320 source. Directory variants pick a random image.
pub fn generate_source(kind: &SourceKind, rng: &mut impl Rng) -> Result<GrayImage> {
    let low = LOW_RES_SIZE;
    let factor = SOURCE_SIZE / LOW_RES_SIZE;
    match kind {
        SourceKind::RandomNoise => {
            let small = GrayImage::from_fn(low, low, |_, _| rng.gen::<f64>());
            upscale_nearest(&small, factor)
        }
        SourceKind::RandomDot => {
            let small = GrayImage::from_fn(low, low, |_, _| if rng.gen::<bool>() { 1.0 } else { 0.0 });
            upscale_nearest(&small, factor)
        }
        SourceKind::HighResNoise => Ok(GrayImage::from_fn(SOURCE_SIZE, SOURCE_SIZE, |_, _| {
            rng.gen::<f64>()
        })),
        SourceKind::HighResDot => Ok(GrayImage::from_fn(SOURCE_SIZE, SOURCE_SIZE, |_, _| {
            if rng.gen::<bool>() {
                1.0
            } else {
                0.0
            }
        })),
        SourceKind::ImageDir { path }
        | SourceKind::ImageDirBw { path }
        | SourceKind::FrameSequence { path } => {
            let files = list_images(path)?;
            let file = files
                .choose(rng)
                .ok_or_else(|| Error::Data(format!("no images in {}", path.display())))?;
            load_source(file)
        }
    }
}

/// Random initial transform of the same kind as `t`: rotations uniform over
/// the full turn, translations uniform in ±3 network pixels, scalings
/// uniform in [0.8, 1.15].
pub fn random_initial(t: &TransformSpec, rng: &mut impl Rng) -> TransformSpec {
    match t {
        TransformSpec::Rotate { .. } => TransformSpec::rotate(rng.gen_range(0.0..360.0)),
        TransformSpec::Translate { .. } => {
            TransformSpec::translate(rng.gen_range(-3.0..=3.0), rng.gen_range(-3.0..=3.0))
        }
        TransformSpec::Scale { .. } => TransformSpec::Scale {
            factor: rng.gen_range(0.8..=1.15),
        },
    }
}

/// Reduces a square image to the network's input representation.
pub fn to_network(img: &GrayImage, topology: &TopologySpec, bw: bool) -> Result<Picture> {
    let pic = match *topology {
        TopologySpec::Cartesian { height, width, .. } => {
            Picture::Gray(resize_bilinear(img, width, height)?)
        }
        TopologySpec::Polar {
            source_size,
            rings,
            wedges,
            ..
        } => {
            let geometry = PolarGeometry::new(source_size, rings, wedges)?;
            let small = resize_bilinear(img, source_size, source_size)?;
            Picture::Polar(to_polar(&small, &geometry)?)
        }
    };
    Ok(if bw { pic.threshold(BW_LEVEL) } else { pic })
}

/// Builds `I_0` and the chained targets `I_1`, `I_2`, `I_5` from one source.
pub fn make_sample(
    source: &GrayImage,
    t: &TransformSpec,
    r: &TransformSpec,
    spec: &DatasetSpec,
) -> Result<EvalSample> {
    if !t.same_variant(r) {
        return Err(Error::invalid(format!(
            "initial transform is {} but the target transform is {}",
            r.name(),
            t.name()
        )));
    }
    let unit = spec.translation_unit();
    let bw = spec.is_bw();
    let render = |j: usize| -> Result<Picture> {
        let composite = t.power(j as u32).after(r)?;
        let crop = transform_and_crop(source, &composite, unit, CROP_SIZE, CROP_SIZE)?;
        to_network(&crop, &spec.topology, bw)
    };
    let input = render(0)?;
    let targets = CHAIN_LENGTHS
        .iter()
        .map(|&j| render(j).map(|p| (j, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSample { input, targets })
}

/// Training pairs and chained test samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<SamplePair>,
    pub test: Vec<EvalSample>,
}

fn to_pair(sample: EvalSample) -> SamplePair {
    let target = sample
        .targets
        .into_iter()
        .find_map(|(j, p)| (j == 1).then_some(p))
        .expect("make_sample always emits I_1");
    SamplePair {
        input: sample.input,
        target,
    }
}

/// Builds the dataset described by `spec`. Each sample has its own
/// generator stream, so construction parallelises without affecting the
/// result.
pub fn build_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    if let SourceKind::FrameSequence { path } = &spec.source {
        let (train, test) = ingest_frames(path, spec.train_count, spec.test_count, &spec.topology)?;
        let test = test.into_iter().map(EvalSample::one_step).collect();
        return Ok(Dataset { train, test });
    }
    let total = spec.train_count + spec.test_count;

    let samples: Vec<EvalSample> = if spec.source.is_generated() {
        (0..total)
            .into_par_iter()
            .map(|k| {
                let mut rng = sample_rng(spec.seed, k as u64);
                let source = generate_source(&spec.source, &mut rng)?;
                let r = random_initial(&spec.transform, &mut rng);
                make_sample(&source, &spec.transform, &r, spec)
            })
            .collect::<Result<_>>()?
    } else {
        let dir = spec.source.directory().expect("directory source");
        let files = select_corpus(dir, total, spec.seed)?;
        files
            .par_iter()
            .enumerate()
            .map(|(k, (file, source))| {
                let mut rng = sample_rng(spec.seed, k as u64);
                let r = random_initial(&spec.transform, &mut rng);
                make_sample(source, &spec.transform, &r, spec)
                    .map_err(|e| Error::Data(format!("{}: {e}", file.display())))
            })
            .collect::<Result<_>>()?
    };

    let mut samples = samples.into_iter();
    let mut train: Vec<SamplePair> = samples.by_ref().take(spec.train_count).map(to_pair).collect();
    let test: Vec<EvalSample> = samples.collect();
    train.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    Ok(Dataset { train, test })
}

/// Seeded random selection of `count` readable images; the first
/// `train_count` of the returned list train, the rest test. Unreadable files
/// are skipped with a warning.
fn select_corpus(dir: &Path, count: usize, seed: u64) -> Result<Vec<(PathBuf, GrayImage)>> {
    let mut files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::Data(format!("no images in {}", dir.display())));
    }
    if files.len() < count {
        return Err(Error::Data(format!(
            "{} holds {} images, {count} requested",
            dir.display(),
            files.len()
        )));
    }
    files.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = Vec::with_capacity(count);
    for file in files {
        if chosen.len() == count {
            break;
        }
        match load_source(&file) {
            Ok(img) => chosen.push((file, img)),
            Err(e) => log::warn!("skipping unreadable image: {e}"),
        }
    }
    if chosen.len() < count {
        return Err(Error::Data(format!(
            "{} has only {} readable images, {count} requested",
            dir.display(),
            chosen.len()
        )));
    }
    Ok(chosen)
}

/// Consecutive video frames as pairs `(frame_k, frame_{k+1})`. The first
/// `train_count` pairs train and the next `test_count` test; no shuffling.
pub fn ingest_frames(
    dir: &Path,
    train_count: usize,
    test_count: usize,
    topology: &TopologySpec,
) -> Result<(Vec<SamplePair>, Vec<SamplePair>)> {
    let files = list_images(dir)?;
    let needed = train_count + test_count + 1;
    if files.len() < needed {
        return Err(Error::Data(format!(
            "{} holds {} frames; {train_count} training and {test_count} test pairs need {needed}",
            dir.display(),
            files.len()
        )));
    }
    let frames = files[..needed]
        .par_iter()
        .map(|f| {
            let img = crop_square(&GrayImage::load(f)?);
            to_network(&img, topology, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = frames.windows(2).map(|w| SamplePair {
        input: w[0].clone(),
        target: w[1].clone(),
    });
    let train = pairs.by_ref().take(train_count).collect();
    let test = pairs.take(test_count).collect();
    Ok((train, test))
}

fn picture_png(pic: &Picture, path: &Path) -> Result<()> {
    pic.to_gray(144)?.save_png(path)
}

/// Writes the dataset as PNGs (`train/0000_input.png`, `test/0000_i5.png`,
/// ...) next to `manifest.toml`.
pub fn materialize(dataset: &Dataset, spec: &DatasetSpec, dir: &Path) -> Result<()> {
    let train_dir = dir.join("train");
    let test_dir = dir.join("test");
    for d in [&train_dir, &test_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let manifest = dir.join("manifest.toml");
    std::fs::write(&manifest, spec.to_manifest()?).map_err(|e| Error::io(&manifest, e))?;
    for (k, pair) in dataset.train.iter().enumerate() {
        picture_png(&pair.input, &train_dir.join(format!("{k:04}_input.png")))?;
        picture_png(&pair.target, &train_dir.join(format!("{k:04}_target.png")))?;
    }
    for (k, sample) in dataset.test.iter().enumerate() {
        picture_png(&sample.input, &test_dir.join(format!("{k:04}_i0.png")))?;
        for (j, target) in &sample.targets {
            picture_png(target, &test_dir.join(format!("{k:04}_i{j}.png")))?;
        }
    }
    Ok(())
}

/// Shows an arbitrary image to a network the way sources are shown:
/// squared, resized to the source size, centre-cropped and reduced.
pub fn network_view(img: &GrayImage, topology: &TopologySpec) -> Result<Picture> {
    let source = resize_bilinear(&crop_square(img), SOURCE_SIZE, SOURCE_SIZE)?;
    to_network(&crop_center(&source, CROP_SIZE, CROP_SIZE)?, topology, false)
}
