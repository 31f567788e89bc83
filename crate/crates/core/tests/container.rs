use deepbow_core::container::{read_container, write_container, ContainerError};
use deepbow_core::{TensorRecord, WeightContainer};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<f32>)> {
    prop::collection::vec(1usize..5, 0..=4).prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        (Just(shape), prop::collection::vec(any::<f32>(), n))
    })
}

proptest! {
    #[test]
    fn round_trip_is_bitwise(records in prop::collection::vec(record_strategy(), 0..6)) {
        let recs: Vec<TensorRecord> = records
            .into_iter()
            .enumerate()
            .map(|(i, (shape, values))| TensorRecord::new(format!("t{i}.values"), shape, values).unwrap())
            .collect();
        let bytes = write_container(&recs).unwrap();
        let back = read_container(&bytes).unwrap();
        prop_assert_eq!(back.records.len(), recs.len());
        for (a, b) in back.records.iter().zip(&recs) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(&a.shape, &b.shape);
            let abits: Vec<u32> = a.values.iter().map(|v| v.to_bits()).collect();
            let bbits: Vec<u32> = b.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(abits, bbits);
        }
        prop_assert_eq!(write_container(&back.records).unwrap(), bytes);
    }

    #[test]
    fn any_single_byte_flip_is_detected(pos in 4usize..60, bit in 0u8..8) {
        let rec = TensorRecord::new("layer1.weights", vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, 7.25, -0.5]).unwrap();
        let mut bytes = write_container(&[rec]).unwrap();
        let pos = pos.min(bytes.len() - 1);
        bytes[pos] ^= 1 << bit;
        prop_assert!(read_container(&bytes).is_err());
    }
}

#[test]
fn save_and_load_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.hfw");
    let c = WeightContainer::new(vec![
        TensorRecord::vector("input.mean", vec![104.0, 117.0, 123.0]).unwrap()
    ])
    .unwrap();
    c.save(&path).unwrap();
    assert_eq!(WeightContainer::load(&path).unwrap(), c);
    assert!(matches!(
        WeightContainer::load(dir.path().join("missing.hfw")),
        Err(ContainerError::Io { .. })
    ));
}
