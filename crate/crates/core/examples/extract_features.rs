//! Decodes, resizes and flattens one image into a raw-pixel feature vector,
//! then writes and re-reads it through the binary feature cache.

use foodbench::features::{decode_image, extract_features, read_feature_cache, write_feature_cache};
use foodbench::synth::{render_image, SynthConfig};
use image::ImageFormat;

fn main() {
    let cfg = SynthConfig::default();
    let mut png = std::io::Cursor::new(Vec::new());
    render_image(&cfg, 2, 0)
        .write_to(&mut png, ImageFormat::Png)
        .expect("encode png");

    let raster = decode_image(png.get_ref()).expect("decode");
    println!("decoded {}x{} image", raster.width(), raster.height());

    for side in [100, 32, 8] {
        let f = extract_features(&raster, side, 1.0 / 255.0);
        let mean = f.values.iter().map(|&v| v as f64).sum::<f64>() / f.dim() as f64;
        println!("side {side:>3}: dim {:>5}, mean {mean:.4}, first pixel {:?}", f.dim(), &f.values[..3]);
    }

    let v = extract_features(&raster, 8, 1.0 / 255.0).with_id("jollof/0000.png").with_label(Some(2));
    let mut cache = Vec::new();
    write_feature_cache(&mut cache, std::slice::from_ref(&v)).expect("write cache");
    let back = read_feature_cache(cache.as_slice()).expect("read cache");
    assert_eq!(back, vec![v]);
    println!("cache record: {} bytes", cache.len());
}
