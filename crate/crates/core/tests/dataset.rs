//! IDX ingestion and subsetting against the real MNIST files.

use std::sync::OnceLock;

use embodied_cnn::idx::{
    load_mnist, parse_idx_images, parse_idx_labels, read_maybe_gz, resolve_data_dir, stratified_subset, subset, Mnist, Sampling,
    TEST_IMAGES, TRAIN_IMAGES, TRAIN_LABELS,
};
use embodied_cnn::{Error, Float};

fn mnist() -> &'static Mnist {
    static DATA: OnceLock<Mnist> = OnceLock::new();
    DATA.get_or_init(|| load_mnist(&resolve_data_dir(None)).expect("MNIST files (set EMBODIED_MNIST_DIR)"))
}

#[test]
fn standard_splits_have_the_published_sizes() {
    let m = mnist();
    assert_eq!(m.train.count(), 60_000);
    assert_eq!(m.test.count(), 10_000);
    assert_eq!(m.train.images.shape(), [60_000, 28, 28]);
    assert_eq!(m.train.class_histogram().iter().sum::<usize>(), 60_000);
    // Published per-class counts of the training split.
    assert_eq!(m.train.class_histogram(), [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]);
    assert_eq!(m.test.class_histogram(), [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009]);
    assert!(m.train.images.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn raw_files_round_trip_byte_for_byte() {
    let dir = resolve_data_dir(None);
    for name in [TRAIN_IMAGES, TEST_IMAGES] {
        let bytes = read_maybe_gz(&dir.join(name)).unwrap();
        assert_eq!(parse_idx_images(&bytes).unwrap().to_idx_bytes(), bytes, "{name}");
    }
    let bytes = read_maybe_gz(&dir.join(TRAIN_LABELS)).unwrap();
    assert_eq!(parse_idx_labels(&bytes).unwrap().to_idx_bytes(), bytes);
}

#[test]
fn pixels_are_scaled_by_255() {
    let dir = resolve_data_dir(None);
    let raw = parse_idx_images(&read_maybe_gz(&dir.join(TEST_IMAGES)).unwrap()).unwrap();
    let t = &mnist().test.images;
    for i in (0..raw.pixels.len()).step_by(997) {
        assert_eq!(t.data()[i], raw.pixels[i] as Float / 255.0);
    }
}

#[test]
fn truncated_file_is_rejected() {
    let dir = resolve_data_dir(None);
    let bytes = read_maybe_gz(&dir.join(TEST_IMAGES)).unwrap();
    assert!(matches!(parse_idx_images(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
    assert!(matches!(parse_idx_labels(&bytes), Err(Error::BadMagic { .. })));
}

#[test]
fn stratified_subsets_are_balanced() {
    let s = stratified_subset(&mnist().train, 256, 3).unwrap();
    assert_eq!(s.count(), 256);
    let h = s.class_histogram();
    assert!(h.iter().all(|&c| c == 25 || c == 26), "{h:?}");
    assert_eq!(h.iter().filter(|&&c| c == 26).count(), 6);

    let ten = stratified_subset(&mnist().train, 10, 0).unwrap();
    assert_eq!(ten.class_histogram(), [1; 10]);
}

#[test]
fn subsets_depend_only_on_the_seed() {
    let train = &mnist().train;
    let a = stratified_subset(train, 512, 11).unwrap();
    let b = stratified_subset(train, 512, 11).unwrap();
    let c = stratified_subset(train, 512, 12).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.images, b.images);
    assert_ne!(a.images, c.images);
    assert_eq!(a.subset_seed, Some(11));
    assert_eq!(a.subset_size, Some(512));
}

#[test]
fn uniform_sampling_draws_the_requested_count() {
    let u = subset(&mnist().train, 1000, 5, Sampling::Uniform).unwrap();
    assert_eq!(u.count(), 1000);
    assert!(u.class_histogram().iter().all(|&c| c > 50));
}

#[test]
fn oversized_and_empty_subsets_are_errors() {
    let train = &mnist().train;
    assert!(matches!(subset(train, 60_001, 0, Sampling::Stratified), Err(Error::SizeTooLarge { .. })));
    assert!(subset(train, 0, 0, Sampling::Stratified).is_err());
    assert_eq!(subset(train, 60_000, 0, Sampling::Stratified).unwrap().class_histogram(), train.class_histogram());
}
