//! Parameter snapshots survive a write/read cycle bit for bit.

use cel_core::nn::ParamTensors;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snapshot_round_trip_is_bit_exact(h in 1usize..6, d in 1usize..6, seed in any::<u64>(), bits in any::<u64>()) {
        let mut p = ParamTensors::init(h, d, seed).unwrap();
        // Include awkward values: subnormals, negative zero, extremes.
        let specials = [f64::MIN_POSITIVE / 3.0, -0.0, f64::MAX, f64::from_bits(bits & 0x7fef_ffff_ffff_ffff)];
        for (i, v) in specials.iter().enumerate() {
            p.set_flat(i % p.len(), *v);
        }
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        let back = ParamTensors::read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(back.hidden_dim(), h);
        prop_assert_eq!(back.input_dim(), d);
        let a: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = back.iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn truncated_snapshots_are_rejected(h in 1usize..4, d in 1usize..4, cut in 0usize..1000) {
        let p = ParamTensors::init(h, d, 0).unwrap();
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        let cut = cut % buf.len();
        prop_assert!(ParamTensors::read_snapshot(&buf[..cut]).is_err());
    }
}

#[test]
fn save_and_load_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.snapshot");
    let p = ParamTensors::init(32, 12, 5).unwrap();
    p.save(&path).unwrap();
    assert_eq!(ParamTensors::load(&path).unwrap(), p);
}
