//! Bundled desk-scale dataset generator: synthetic face-like subjects,
//! pseudo-morphs from four blend-weight "tools", and print/scan stand-in
//! domains (Gaussian-degraded and texture-transferred copies), plus ready
//! experiment configs.
//!
//! Everything derives from one seed, so repeated generation is
//! byte-identical.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{blend_images, derive_seed, ClassifierConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::features::ExtractorParams;
use crate::imgcore::{
    save_image, write_manifest, DatasetManifest, ImageBuffer, Label, MorphTool, SampleRecord,
    Source,
};
use crate::texsim::{add_gaussian_noise, apply_texture, FitPolicy, TextureBank};

/// Pseudo-tools: tag and blend weight for the first parent.
pub const TOY_TOOLS: [(&str, f64); 4] = [
    ("pseudo_a", 0.50),
    ("pseudo_b", 0.35),
    ("pseudo_c", 0.65),
    ("pseudo_d", 0.42),
];

#[derive(Debug, Clone)]
pub struct ToyOptions {
    pub subjects: usize,
    pub shots_per_subject: usize,
    pub morphs_per_tool: usize,
    pub size: usize,
    pub seed: u64,
    /// Sigma of the Gaussian print/scan stand-in degradation.
    pub noise_sigma: f64,
    /// Residual amplitude multiplier for the ps_texture domain; keeps the
    /// domain shift strong enough to matter but mild enough that
    /// baseline-trained detectors stay better than chance on it.
    pub texture_scale: f64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            subjects: 48,
            shots_per_subject: 2,
            morphs_per_tool: 150,
            size: 96,
            seed: 42,
            noise_sigma: 3.0,
            texture_scale: 1.0,
        }
    }
}

/// Everything the generator wrote.
#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
    pub exp1_config_path: PathBuf,
    pub exp3_config_path: PathBuf,
    pub bank_dir: PathBuf,
}

fn fill_ellipse(img: &mut ImageBuffer, cx: f64, cy: f64, ax: f64, ay: f64, color: [u8; 3]) {
    let (w, h) = (img.width(), img.height());
    let x0 = ((cx - ax).floor().max(0.0)) as usize;
    let x1 = ((cx + ax).ceil().min(w as f64 - 1.0)) as usize;
    let y0 = ((cy - ay).floor().max(0.0)) as usize;
    let y1 = ((cy + ay).ceil().min(h as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - cx) / ax;
            let dy = (y as f64 - cy) / ay;
            if dx * dx + dy * dy <= 1.0 {
                for c in 0..3 {
                    img.set(x, y, c, color[c]);
                }
            }
        }
    }
}

/// One synthetic "face": gradient background, elliptical face, eyes, nose
/// and mouth, all parameterized per subject with small per-shot jitter.
pub fn synth_face(subject: usize, shot: usize, size: usize, seed: u64) -> ImageBuffer {
    let mut subject_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("subject/{subject}")));
    let skin = [
        subject_rng.random_range(170..=225) as u8,
        subject_rng.random_range(130..=190) as u8,
        subject_rng.random_range(110..=170) as u8,
    ];
    let bg_top = subject_rng.random_range(190..=235) as u8;
    let bg_bot = subject_rng.random_range(150..=210) as u8;
    let face_ax = size as f64 * subject_rng.random_range(0.26..0.34);
    let face_ay = size as f64 * subject_rng.random_range(0.34..0.42);
    let eye_dx = face_ax * subject_rng.random_range(0.38..0.52);
    let eye_y_frac = subject_rng.random_range(-0.18..-0.08);
    let eye_r = size as f64 * subject_rng.random_range(0.025..0.045);
    let eye_tone = subject_rng.random_range(20..=70) as u8;
    let mouth_w = face_ax * subject_rng.random_range(0.5..0.9);
    let mouth_y_frac = subject_rng.random_range(0.35..0.55);
    let mouth_tone = [
        subject_rng.random_range(120..=180) as u8,
        subject_rng.random_range(40..=90) as u8,
        subject_rng.random_range(40..=90) as u8,
    ];
    let nose_len = face_ay * subject_rng.random_range(0.18..0.32);

    let mut shot_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("shot/{subject}/{shot}")));
    let jx = shot_rng.random_range(-3.5..3.5);
    let jy = shot_rng.random_range(-3.5..3.5);
    let brightness: i16 = shot_rng.random_range(-9..=9);

    let mut img = ImageBuffer::filled_rgb(size, size, [0, 0, 0]).expect("size is positive");
    let sh = |v: u8| (v as i16 + brightness).clamp(0, 255) as u8;
    for y in 0..size {
        let t = y as f64 / size as f64;
        let bg = (bg_top as f64 * (1.0 - t) + bg_bot as f64 * t) as u8;
        for x in 0..size {
            for c in 0..3 {
                img.set(x, y, c, sh(bg));
            }
        }
    }

    let cx = size as f64 / 2.0 + jx;
    let cy = size as f64 / 2.0 + jy;
    fill_ellipse(&mut img, cx, cy, face_ax, face_ay, [sh(skin[0]), sh(skin[1]), sh(skin[2])]);
    let eye_y = cy + eye_y_frac * face_ay;
    let eye_color = [sh(eye_tone), sh(eye_tone), sh(eye_tone)];
    fill_ellipse(&mut img, cx - eye_dx, eye_y, eye_r, eye_r * 0.8, eye_color);
    fill_ellipse(&mut img, cx + eye_dx, eye_y, eye_r, eye_r * 0.8, eye_color);
    let nose_color = [
        sh(skin[0].saturating_sub(30)),
        sh(skin[1].saturating_sub(30)),
        sh(skin[2].saturating_sub(30)),
    ];
    fill_ellipse(&mut img, cx, cy + nose_len * 0.5, eye_r * 0.5, nose_len * 0.5, nose_color);
    let mouth_y = cy + mouth_y_frac * face_ay;
    fill_ellipse(
        &mut img,
        cx,
        mouth_y,
        mouth_w * 0.5,
        eye_r * 0.7,
        [sh(mouth_tone[0]), sh(mouth_tone[1]), sh(mouth_tone[2])],
    );

    // Mild sensor noise for intra-subject variation.
    add_gaussian_noise(&img, 2.5, derive_seed(seed, &format!("grain/{subject}/{shot}")))
        .expect("sigma is valid")
}

/// Generates the full toy dataset under `root`: digital originals,
/// the two degraded domains, manifest, texture bank, and the two
/// experiment configs (baseline and texture-augmented).
pub fn generate_toy_dataset(root: &Path, opts: &ToyOptions) -> Result<ToyDataset> {
    if opts.subjects < 2 {
        return Err(Error::InsufficientSubjects {
            needed: 2,
            got: opts.subjects,
        });
    }
    for sub in ["digital", "ps_handcrafted", "ps_texture"] {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let bank = TextureBank::builtin_samples();
    let bank_dir = root.join("bank");
    bank.save_to_dir(&bank_dir)?;

    // Digital bona fides.
    let mut digital: Vec<(String, ImageBuffer, SampleRecord)> = Vec::new();
    for subject in 0..opts.subjects {
        for shot in 0..opts.shots_per_subject {
            let img = synth_face(subject, shot, opts.size, opts.seed);
            let rel = format!("digital/bona_s{subject:02}_{shot}.png");
            let record = SampleRecord {
                path: rel.clone(),
                subject_id: format!("s{subject:02}"),
                label: Label::Bonafide,
                morph_tool: MorphTool::None,
                source: Source::Digital,
            };
            digital.push((rel, img, record));
        }
    }

    // Pseudo-morphs per tool, different blend weights.
    let mut morphs: Vec<(String, ImageBuffer, SampleRecord)> = Vec::new();
    for (tool_tag, weight) in TOY_TOOLS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &format!("pairs/{tool_tag}")));
        for idx in 0..opts.morphs_per_tool {
            let sa = rng.random_range(0..opts.subjects);
            let sb = loop {
                let s = rng.random_range(0..opts.subjects);
                if s != sa {
                    break s;
                }
            };
            let shot_a = rng.random_range(0..opts.shots_per_subject);
            let shot_b = rng.random_range(0..opts.shots_per_subject);
            let img_a = &digital[sa * opts.shots_per_subject + shot_a].1;
            let img_b = &digital[sb * opts.shots_per_subject + shot_b].1;
            let morph = blend_images(img_a, img_b, weight)?;
            let rel = format!("digital/{tool_tag}_{idx:04}.png");
            let record = SampleRecord {
                path: rel.clone(),
                subject_id: format!("s{sa:02}+s{sb:02}"),
                label: Label::Morph,
                morph_tool: MorphTool::Other(tool_tag.to_string()),
                source: Source::Digital,
            };
            morphs.push((rel, morph, record));
        }
    }

    // Write digital images and derive the two degraded domains. Texture
    // instances vary per image (template choice, alignment roll, and
    // amplitude) the way a real print/scan pass varies per sheet; the
    // per-image draws are seeded from the path so regeneration is exact.
    let mut records: Vec<SampleRecord> = Vec::new();
    for (rel, img, record) in digital.iter().chain(&morphs) {
        save_image(img, root.join(rel))?;
        records.push(record.clone());

        let hc = add_gaussian_noise(img, opts.noise_sigma, derive_seed(opts.seed, rel))?;
        let hc_rel = rel.replace("digital/", "ps_handcrafted/");
        save_image(&hc, root.join(&hc_rel))?;
        records.push(SampleRecord {
            path: hc_rel,
            source: Source::PsHandcrafted,
            ..record.clone()
        });

        let mut tex_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &format!("tex/{rel}")));
        let template = bank.get(1 + tex_rng.random_range(0..bank.len()))?;
        let amplitude = opts.texture_scale * tex_rng.random_range(0.75..1.25);
        let instance = texture_instance(
            template,
            tex_rng.random_range(0..template.width),
            tex_rng.random_range(0..template.height),
            amplitude,
        )?;
        let tex = apply_texture(img, &instance, FitPolicy::CenterCrop)?;
        let tex_rel = rel.replace("digital/", "ps_texture/");
        save_image(&tex, root.join(&tex_rel))?;
        records.push(SampleRecord {
            path: tex_rel,
            source: Source::PsTexture,
            ..record.clone()
        });
    }

    let manifest = DatasetManifest::new(records, format!("toy dataset seed {}", opts.seed))?;
    let manifest_path = root.join("manifest.csv");
    write_manifest(&manifest, &manifest_path)?;

    let features = vec![
        "intensity".to_string(),
        "ela".to_string(),
        "dct2".to_string(),
    ];
    let feature_params = ExtractorParams {
        d: 32,
        ..ExtractorParams::default()
    };
    let exp1 = ExperimentConfig {
        name: "exp1_baseline".into(),
        training_sources: vec![Source::PsHandcrafted],
        test_sources: vec![Source::PsTexture],
        features: features.clone(),
        feature_params,
        classifier: ClassifierConfig::default(),
        split_seed: opts.seed,
        split_ratio: 0.7,
    };
    let exp3 = ExperimentConfig {
        name: "exp3_texture".into(),
        training_sources: vec![Source::PsHandcrafted, Source::PsTexture],
        test_sources: vec![Source::PsTexture],
        features,
        feature_params,
        classifier: ClassifierConfig::default(),
        split_seed: opts.seed,
        split_ratio: 0.7,
    };
    let exp1_config_path = root.join("exp1.json");
    let exp3_config_path = root.join("exp3.json");
    for (config, path) in [(&exp1, &exp1_config_path), (&exp3, &exp3_config_path)] {
        std::fs::write(
            path,
            serde_json::to_string_pretty(config).expect("config serializes"),
        )
        .map_err(|e| Error::io(path, e))?;
    }

    Ok(ToyDataset {
        manifest,
        manifest_path,
        exp1_config_path,
        exp3_config_path,
        bank_dir,
    })
}

/// One per-image texture instance: the template circularly rolled by
/// `(sx, sy)` and scaled by `amplitude`.
fn texture_instance(
    template: &crate::qrpalette::TexturePatch,
    sx: usize,
    sy: usize,
    amplitude: f64,
) -> Result<crate::qrpalette::TexturePatch> {
    let (w, h) = (template.width, template.height);
    let mut residual = vec![0.0f64; w * h * 3];
    for y in 0..h {
        let ty = (y + sy) % h;
        for x in 0..w {
            let tx = (x + sx) % w;
            for c in 0..3 {
                residual[(y * w + x) * 3 + c] =
                    (template.get(tx, ty, c) * amplitude).clamp(-255.0, 255.0);
            }
        }
    }
    crate::qrpalette::TexturePatch::new(
        w,
        h,
        residual,
        template.declared_color,
        template.resolution_dpi,
        template.paper_kind,
    )
}

/// Gaussian-noise reference plane used by spectral tests.
pub fn gaussian_plane(w: usize, h: usize, sigma: f64, seed: u64) -> crate::imgcore::FloatPlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(1e-9)).expect("sigma is finite");
    crate::imgcore::FloatPlane::new(w, h, (0..w * h).map(|_| normal.sample(&mut rng)).collect())
        .expect("noise is finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faces_are_deterministic_and_subject_distinct() {
        let a = synth_face(3, 0, 64, 7);
        let b = synth_face(3, 0, 64, 7);
        assert_eq!(a, b);
        let c = synth_face(4, 0, 64, 7);
        assert_ne!(a, c);
        // Shots of one subject differ slightly but not wildly.
        let d = synth_face(3, 1, 64, 7);
        assert_ne!(a, d);
    }

    #[test]
    fn tiny_toy_dataset_has_consistent_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ToyOptions {
            subjects: 6,
            shots_per_subject: 1,
            morphs_per_tool: 4,
            size: 48,
            seed: 11,
            ..ToyOptions::default()
        };
        let toy = generate_toy_dataset(dir.path(), &opts).unwrap();
        toy.manifest.validate().unwrap();
        // 6 bona fides + 16 morphs, each in three domains.
        assert_eq!(toy.manifest.records.len(), (6 + 16) * 3);
        assert_eq!(toy.manifest.morph_tools().len(), 4);
        assert!(toy.manifest_path.exists());
        assert!(toy.exp1_config_path.exists());
        assert!(toy.exp3_config_path.exists());
        // Every referenced image exists.
        for record in &toy.manifest.records {
            assert!(dir.path().join(&record.path).exists(), "{}", record.path);
        }
        // Configs load and validate.
        let exp1 = ExperimentConfig::load(&toy.exp1_config_path).unwrap();
        assert_eq!(exp1.test_sources, vec![Source::PsTexture]);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let opts = ToyOptions {
            subjects: 4,
            shots_per_subject: 1,
            morphs_per_tool: 2,
            size: 32,
            seed: 5,
            ..ToyOptions::default()
        };
        let a = generate_toy_dataset(dir_a.path(), &opts).unwrap();
        let _b = generate_toy_dataset(dir_b.path(), &opts).unwrap();
        for record in &a.manifest.records {
            let ba = std::fs::read(dir_a.path().join(&record.path)).unwrap();
            let bb = std::fs::read(dir_b.path().join(&record.path)).unwrap();
            assert_eq!(ba, bb, "{}", record.path);
        }
        let ma = std::fs::read(dir_a.path().join("manifest.csv")).unwrap();
        let mb = std::fs::read(dir_b.path().join("manifest.csv")).unwrap();
        assert_eq!(ma, mb);
    }
}
