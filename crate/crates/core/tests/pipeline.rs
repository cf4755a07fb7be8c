use approx::assert_relative_eq;

use synthdepth::augment::{augment, image_rng, sample_augmentation_vector, AugmentationConfig};
use synthdepth::datapack::{export_png16, import_png16, read_mask, read_tensor, write_mask, write_tensor};
use synthdepth::losses::{foreground_l1, l1_loss};
use synthdepth::obj::load_mesh;
use synthdepth::renderer::{render_views, RenderConfig};
use synthdepth::viewsphere::{sample_viewpoints, ViewSphereConfig};

const TORUS: &[u8] = include_bytes!("../../../assets/torus.obj");

fn views() -> Vec<synthdepth::RenderedView> {
    let mesh = load_mesh::<f64>(TORUS).unwrap();
    let vs = ViewSphereConfig {
        subdivisions: 1,
        in_plane_degrees: vec![0.0, 30.0],
        ..Default::default()
    };
    let viewpoints = sample_viewpoints::<f64>(&vs).unwrap();
    render_views(&mesh, &viewpoints, &RenderConfig { size: 48, ..Default::default() }).unwrap()
}

#[test]
fn render_augment_store_reload() {
    let cfg = AugmentationConfig::default();
    for (i, view) in views().iter().enumerate() {
        assert!(!view.empty);
        let clean = view.patch.cast::<f32>();
        assert!(clean.values.iter().all(|v| (0.0..=1.0).contains(v)));

        let z = sample_augmentation_vector(&cfg, &mut image_rng(11, i as u64));
        let pair = augment(&clean, &z);
        assert!(pair.augmented.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(pair.mask.count(), clean.values.iter().filter(|&&v| v > 0.0).count());

        let back = read_tensor(&write_tensor(&pair.augmented).unwrap()).unwrap();
        // the depth window is not part of the file format
        assert_eq!((back.width, back.height), (48, 48));
        assert_eq!(back.values, pair.augmented.values);
        assert_eq!(read_mask(&write_mask(&pair.mask).unwrap()).unwrap(), pair.mask);

        let png = import_png16(&export_png16(&clean).unwrap()).unwrap();
        for (a, b) in png.values.iter().zip(&clean.values) {
            assert_relative_eq!(*a, *b, epsilon = 0.5 / 65535.0 + 1e-7);
        }

        assert_eq!(l1_loss(&clean, &clean).unwrap(), 0.0);
        let fg = foreground_l1(&pair.augmented, &clean, &pair.mask).unwrap();
        let (mut sum, mut n) = (0.0f64, 0usize);
        for ((a, c), m) in pair.augmented.values.iter().zip(&clean.values).zip(&pair.mask.values) {
            if *m == 1 {
                sum += (*a as f64 - *c as f64).abs();
                n += 1;
            }
        }
        assert_relative_eq!(fg as f64, sum / n.max(1) as f64, max_relative = 1e-5);
    }
}
