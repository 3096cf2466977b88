use foodbench::features::{
    extract_features, read_feature_cache, resize_bilinear, write_feature_cache, FeatureVector, RasterImage,
};
use proptest::prelude::*;

fn raster() -> impl Strategy<Value = RasterImage> {
    (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |data| RasterImage::new(w, h, data).unwrap())
    })
}

proptest! {
    #[test]
    fn features_have_fixed_length_and_range(img in raster(), side in 1u32..16) {
        let f = extract_features(&img, side, 1.0 / 255.0);
        prop_assert_eq!(f.dim(), (side * side * 3) as usize);
        prop_assert!(f.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let raw = extract_features(&img, side, 1.0);
        prop_assert!(raw.values.iter().all(|&v| v.fract() == 0.0 && (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn resize_stays_within_source_extremes(img in raster(), w in 1u32..20, h in 1u32..20) {
        let out = resize_bilinear(&img, w, h);
        for c in 0..3 {
            let channel = |r: &RasterImage| r.data().iter().skip(c).step_by(3).copied().collect::<Vec<u8>>();
            let src = channel(&img);
            let lo = *src.iter().min().unwrap();
            let hi = *src.iter().max().unwrap();
            prop_assert!(channel(&out).iter().all(|&v| v >= lo && v <= hi));
        }
    }

    #[test]
    fn constant_image_resizes_to_constant(w in 1u32..40, h in 1u32..40, side in 1u32..40, rgb: [u8; 3]) {
        let img = RasterImage::filled(w, h, rgb);
        prop_assert_eq!(resize_bilinear(&img, side, side), RasterImage::filled(side, side, rgb));
    }

    #[test]
    fn same_size_resize_is_identity(img in raster()) {
        prop_assert_eq!(resize_bilinear(&img, img.width(), img.height()), img);
    }

    #[test]
    fn cache_round_trip(
        dim in 0usize..20,
        rows in prop::collection::vec(("\\PC{0,10}", prop::option::of(0usize..50)), 0..10),
        seed: u32,
    ) {
        let vectors: Vec<FeatureVector> = rows
            .into_iter()
            .enumerate()
            .map(|(r, (id, label))| FeatureVector {
                sample_id: id,
                label,
                values: (0..dim).map(|j| ((seed as usize + r * 31 + j) % 997) as f32 / 997.0).collect(),
            })
            .collect();
        let mut buf = Vec::new();
        write_feature_cache(&mut buf, &vectors).unwrap();
        prop_assert_eq!(read_feature_cache(buf.as_slice()).unwrap(), vectors);
    }
}

#[test]
fn truncated_cache_is_rejected() {
    let v = vec![FeatureVector {
        sample_id: "a".into(),
        label: Some(1),
        values: vec![0.5; 6],
    }];
    let mut buf = Vec::new();
    write_feature_cache(&mut buf, &v).unwrap();
    for cut in [3, 10, buf.len() - 1] {
        assert!(read_feature_cache(&buf[..cut]).is_err(), "cut at {cut}");
    }
}

#[test]
fn mixed_dimensions_are_refused() {
    let a = FeatureVector { sample_id: "a".into(), label: None, values: vec![0.0; 3] };
    let b = FeatureVector { sample_id: "b".into(), label: None, values: vec![0.0; 4] };
    assert!(write_feature_cache(Vec::new(), &[a, b]).is_err());
}
