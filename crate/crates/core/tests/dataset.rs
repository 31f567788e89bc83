use deepbow_core::dataset::{load_and_preprocess, load_mean, parse_manifest, PreprocessSpec, Split, MEAN_TENSOR};
use deepbow_core::{TensorRecord, WeightContainer};
use image::{Rgb, RgbImage};

#[test]
fn png_and_jpeg_decode_to_network_input() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::from_pixel(100, 60, Rgb([90, 90, 90]));
    let png = dir.path().join("gray.png");
    let jpg = dir.path().join("gray.jpg");
    img.save(&png).unwrap();
    img.save(&jpg).unwrap();
    let spec = PreprocessSpec::default();
    let a = load_and_preprocess(&png, &spec).unwrap();
    assert_eq!((a.rows(), a.cols(), a.channels()), (224, 224, 3));
    assert!(a.as_slice().iter().all(|&v| v == 90.0));
    let b = load_and_preprocess(&jpg, &spec).unwrap();
    assert!(b.as_slice().iter().all(|&v| (v - 90.0).abs() <= 2.0));
    let again = load_and_preprocess(&png, &spec).unwrap();
    assert_eq!(a, again);
}

#[test]
fn undecodable_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.png");
    std::fs::write(&bad, b"not an image").unwrap();
    let err = load_and_preprocess(&bad, &PreprocessSpec::default()).unwrap_err();
    assert!(err.to_string().contains("bad.png"));
}

#[test]
fn mean_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mean.hfw");
    WeightContainer::new(vec![TensorRecord::vector(MEAN_TENSOR, vec![1.0, 2.0, 3.0]).unwrap()])
        .unwrap()
        .save(&path)
        .unwrap();
    assert_eq!(load_mean(&path).unwrap(), [1.0, 2.0, 3.0]);
}

#[test]
fn manifest_counts_per_split() {
    let text = "@classes\tred,green\n# toy\na.png\ttrain\tred\nb.png\tval\tgreen\nc.png\ttest\tred,green\n";
    let m = parse_manifest(text).unwrap();
    assert_eq!(m.split_len(Split::Train), 1);
    assert_eq!(m.split_len(Split::Test), 1);
    assert_eq!(m.counts(), vec![[1, 0, 1], [0, 1, 1]]);
    assert!(m.records[2].has_label(0) && m.records[2].has_label(1));
}
