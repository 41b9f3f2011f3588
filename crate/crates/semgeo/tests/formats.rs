use proptest::prelude::*;
use semgeo::format::{
    load_cloud, load_head, read_cloud, read_cloud_matrix, read_head, save_cloud, save_head, write_cloud_matrix,
    write_head, Dtype, FormatError,
};
use semgeo_core::{Matrix, PointCloud, UnembeddingHead};

fn cloud_from(rows: usize, cols: usize, values: Vec<f64>) -> PointCloud {
    PointCloud::from_matrix(Matrix::from_vec(rows, cols, values).unwrap()).unwrap()
}

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|x| x.to_bits()).collect()
}

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() * 1e3 + 1.0 / (i as f64 + 0.5)).collect();
    let c = cloud_from(12, 5, values);
    let path = dir.path().join("c.lsm");
    save_cloud(&path, &c, Dtype::F64).unwrap();
    let back = load_cloud(&path, Some(7)).unwrap();
    assert_eq!(bits(back.points()), bits(c.points()));
    assert_eq!(back.layer_index(), 7);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 13 + 60 * 8);
}

#[test]
fn f32_round_trip_is_bit_exact_for_f32_values() {
    let values: Vec<f64> = (0..24).map(|i| ((i as f32) * 1.1f32 - 3.7f32) as f64).collect();
    let c = cloud_from(6, 4, values);
    let mut buf = Vec::new();
    write_cloud_matrix(&mut buf, c.points(), Dtype::F32).unwrap();
    assert_eq!(buf.len(), 13 + 24 * 4);
    let (m, dtype) = read_cloud_matrix(&buf[..]).unwrap();
    assert_eq!(dtype, Dtype::F32);
    assert_eq!(bits(&m), bits(c.points()));
}

#[test]
fn header_layout() {
    let c = cloud_from(2, 3, vec![1.0; 6]);
    let mut buf = Vec::new();
    write_cloud_matrix(&mut buf, c.points(), Dtype::F64).unwrap();
    assert_eq!(&buf[..4], b"LSM1");
    assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
    assert_eq!(buf[12], 1);
    assert_eq!(f64::from_le_bytes(buf[13..21].try_into().unwrap()), 1.0);
}

#[test]
fn every_prefix_is_truncated() {
    let c = cloud_from(3, 2, vec![0.5, 1.5, 2.5, 3.5, 4.5, 5.5]);
    let mut buf = Vec::new();
    write_cloud_matrix(&mut buf, c.points(), Dtype::F32).unwrap();
    for cut in 0..buf.len() {
        match read_cloud(&buf[..cut], 0, "prefix") {
            Err(FormatError::TruncatedFile { read, .. }) => assert_eq!(read, cut as u64),
            other => panic!("cut {cut}: {other:?}"),
        }
    }
    assert!(read_cloud(&buf[..], 0, "full").is_ok());
}

#[test]
fn bad_magic_and_non_finite() {
    let c = cloud_from(2, 1, vec![1.0, 2.0]);
    let mut buf = Vec::new();
    write_cloud_matrix(&mut buf, c.points(), Dtype::F64).unwrap();
    let mut bad = buf.clone();
    bad[3] = b'2';
    assert!(matches!(read_cloud(&bad[..], 0, "m"), Err(FormatError::BadMagic { found, .. }) if &found == b"LSM2"));
    // A head file is not a cloud file.
    let head = UnembeddingHead::new(Matrix::identity(2), None).unwrap();
    let mut hb = Vec::new();
    write_head(&mut hb, &head, Dtype::F64).unwrap();
    assert!(matches!(read_cloud(&hb[..], 0, "m"), Err(FormatError::BadMagic { .. })));
    assert!(matches!(read_head(&buf[..]), Err(FormatError::BadMagic { .. })));

    let mut inf = buf.clone();
    inf[21..29].copy_from_slice(&f64::INFINITY.to_le_bytes());
    assert!(matches!(
        read_cloud(&inf[..], 0, "m"),
        Err(FormatError::Invalid(semgeo_core::Error::NonFiniteEntry { row: 1, col: 0 }))
    ));
}

#[test]
fn head_round_trip_with_and_without_bias() {
    let dir = tempfile::tempdir().unwrap();
    let w = Matrix::from_rows(&[[0.25, -1.0, 3.5], [1e-300, 2.0, -0.0], [7.0, 8.0, 9.0]]).unwrap();
    for bias in [None, Some(vec![0.1, -0.2, 0.3])] {
        let head = UnembeddingHead::new(w.clone(), bias.clone()).unwrap();
        let path = dir.path().join("h.lsmh");
        save_head(&path, &head, Dtype::F64).unwrap();
        let back = load_head(&path).unwrap();
        assert_eq!(bits(back.weights()), bits(&w));
        assert_eq!(back.bias().map(|b| b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()),
            bias.as_ref().map(|b| b.iter().map(|x| x.to_bits()).collect()));
        let expected = 14 + (9 + if bias.is_some() { 3 } else { 0 }) * 8;
        assert_eq!(std::fs::metadata(&path).unwrap().len(), expected);
    }
}

#[test]
fn head_truncated_in_bias() {
    let head = UnembeddingHead::new(Matrix::identity(2), Some(vec![1.0, 2.0])).unwrap();
    let mut buf = Vec::new();
    write_head(&mut buf, &head, Dtype::F32).unwrap();
    assert!(matches!(read_head(&buf[..buf.len() - 1]), Err(FormatError::TruncatedFile { .. })));
    let mut flag = buf.clone();
    flag[12] = 2;
    assert!(matches!(read_head(&flag[..]), Err(FormatError::BadFlag(2))));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_cloud("/nonexistent/cloud.lsm", None), Err(FormatError::Io(_))));
}

proptest! {
    #[test]
    fn arbitrary_finite_clouds_round_trip(
        rows in 2usize..8,
        cols in 1usize..6,
        seed in proptest::collection::vec(-1e300f64..1e300, 48),
    ) {
        let values = seed[..rows * cols].to_vec();
        let c = cloud_from(rows, cols, values);
        let mut buf = Vec::new();
        write_cloud_matrix(&mut buf, c.points(), Dtype::F64).unwrap();
        let (m, _) = read_cloud_matrix(&buf[..]).unwrap();
        prop_assert_eq!(bits(&m), bits(c.points()));
    }
}
