use ldd::data::{read_dataset, write_datasets, write_datasets_to};
use ldd::{generate, load_dataset, DgpConfig, ModifierKind, Schema};

#[test]
fn simulated_data_round_trips_bit_for_bit() {
    for preset in ["bilinear", "education"] {
        let cfg = DgpConfig::preset(preset, 25, 17).unwrap();
        let (maj, min) = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_datasets(&path, &[&maj, &min]).unwrap();
        let schema = Schema::standard(maj.p(), cfg.modifier_kind());
        assert_eq!(load_dataset(&path, &schema, "majority").unwrap(), maj);
        assert_eq!(load_dataset(&path, &schema, "minority").unwrap(), min);
    }
}

#[test]
fn rewriting_is_stable() {
    let (maj, _) = generate(&DgpConfig::preset("additive", 10, 3).unwrap()).unwrap();
    let mut first = Vec::new();
    write_datasets_to(&mut first, &[&maj]).unwrap();
    let back = read_dataset(first.as_slice(), &Schema::standard(1, ModifierKind::Continuous), "majority").unwrap();
    let mut second = Vec::new();
    write_datasets_to(&mut second, &[&back]).unwrap();
    assert_eq!(first, second);
}

#[test]
fn unreadable_path_is_io_error() {
    let err = load_dataset("/nonexistent/x.csv", &Schema::standard(0, ModifierKind::Continuous), "a").unwrap_err();
    assert_eq!(err.kind(), "io");
}
