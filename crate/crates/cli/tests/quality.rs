use std::path::PathBuf;

use bigcs::bundle::Weighting;
use bigcs::image::{self, Image};
use bigcs::pipeline::{evaluate, recover, sense, RecoverOptions, SenseOptions};

fn camera() -> Image {
    image::read(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera256.pgm")).unwrap()
}

fn psnr_at(img: &Image, rate: f64, weighting: Weighting) -> f64 {
    let opts = SenseOptions {
        rate,
        seed: 3,
        weighting,
        ..SenseOptions::default()
    };
    let bundle = sense(img, &opts).unwrap();
    let rec = recover(&bundle, &RecoverOptions::default()).unwrap();
    evaluate(img, &rec.to_image(), bundle.peak).unwrap().psnr
}

#[test]
fn natural_image_quality() {
    let img = camera();
    let tree_20 = psnr_at(&img, 0.2, Weighting::Tree);
    let plain_20 = psnr_at(&img, 0.2, Weighting::None);
    let gain = tree_20 - plain_20;
    assert!((0.2..=1.5).contains(&gain), "weighting gain {gain} dB");

    let low = psnr_at(&img, 0.1, Weighting::Tree);
    let high = psnr_at(&img, 0.3, Weighting::Tree);
    assert!(high > low, "mr 0.3: {high} dB, mr 0.1: {low} dB");
}
