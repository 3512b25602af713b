use std::fs;

use textsr::model::{init_model, ModelConfig, ModelWeights};
use textsr::persist::{load_model, save_model, FORMAT_VERSION, PREAMBLE_LEN};
use textsr::Error;

/// Parameter count summed straight from the layer widths.
fn param_oracle(filters: &[usize], a1: usize, b1: usize, b2: usize, s: usize) -> usize {
    let mut total = 0;
    let mut c_in = 1;
    for &c in filters {
        total += c_in * c * 9 + 2 * c;
        c_in = c;
    }
    let cat: usize = filters.iter().sum();
    total += cat * a1 + 2 * a1;
    total += cat * b1 + 2 * b1;
    total += b1 * b2 * 9 + 2 * b2;
    total + (a1 + b2) * s * s + s * s
}

fn saved(cfg: &ModelConfig, seed: u64) -> (tempfile::TempDir, std::path::PathBuf, ModelWeights) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sdtd");
    let w: ModelWeights = init_model(cfg, seed).unwrap();
    save_model(&w, cfg, &path).unwrap();
    (dir, path, w)
}

#[test]
fn roundtrip_is_bit_identical() {
    for cfg in [ModelConfig::tiny(2), ModelConfig::desk(4)] {
        let (_d, path, w) = saved(&cfg, 17);
        let (back, cfg2) = load_model(&path).unwrap();
        assert_eq!(cfg2, cfg);
        for (a, b) in w.tensors().iter().zip(back.tensors()) {
            assert_eq!(a.len(), b.len());
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn saves_are_byte_identical() {
    let cfg = ModelConfig::tiny(2);
    let (_d, path, w) = saved(&cfg, 3);
    let other = path.with_file_name("again.sdtd");
    save_model(&w, &cfg, &other).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn file_size_matches_parameter_count() {
    let cfg = ModelConfig::tiny(2);
    let (_d, path, w) = saved(&cfg, 1);
    let bytes = fs::read(&path).unwrap();
    let header = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = param_oracle(&[4, 3], 64, 32, 32, 2);
    assert_eq!(count, 10_690);
    assert_eq!(w.param_count(), count);
    assert_eq!(bytes.len(), PREAMBLE_LEN + header + 4 * count);
    assert_eq!(&bytes[..4], b"SDTD");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), FORMAT_VERSION);

    let table1 = ModelConfig::table1(2);
    let full: ModelWeights = ModelWeights::zeros(&table1).unwrap();
    assert_eq!(full.param_count(), param_oracle(&[196, 163, 138, 115, 93, 72, 51, 32], 64, 32, 32, 2));
}

#[test]
fn corruptions_map_to_distinct_errors() {
    let (_d, path, _) = saved(&ModelConfig::tiny(2), 2);
    let good = fs::read(&path).unwrap();

    let mut magic = good.clone();
    magic[..4].copy_from_slice(b"XXXX");
    fs::write(&path, &magic).unwrap();
    match load_model(&path) {
        Err(Error::Format(msg)) => assert!(msg.contains("SDTD")),
        other => panic!("expected format error, got {other:?}"),
    }

    let mut version = good.clone();
    version[4..8].copy_from_slice(&999u32.to_le_bytes());
    fs::write(&path, &version).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Version { found: 999, .. })));

    fs::write(&path, &good[..good.len() - 4 * 100 - 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Corruption(_))));

    let header = u32::from_le_bytes(good[8..12].try_into().unwrap()) as usize;
    fs::write(&path, &good[..PREAMBLE_LEN + header / 2]).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Corruption(_))));

    assert!(matches!(load_model(path.with_file_name("missing.sdtd")), Err(Error::Io { .. })));
}

#[test]
fn unwritable_destination_is_an_io_error() {
    let cfg = ModelConfig::tiny(2);
    let w: ModelWeights = init_model(&cfg, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = save_model(&w, &cfg, dir.path().join("no/such/dir/m.sdtd"));
    assert!(matches!(r, Err(Error::Io { .. })));
}
