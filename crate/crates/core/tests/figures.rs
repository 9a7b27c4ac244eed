use mprs::bench::{cdf_dump, segmentation_map};
use mprs::competition::PriorIndexMap;
use mprs::{MonotoneCdfParams, SymbolAlphabet};

#[test]
fn constant_map_is_one_color() {
    let map = PriorIndexMap::new(3, 5, vec![7; 15], 64).unwrap();
    let img = segmentation_map(&map, 64, 0).unwrap();
    assert_eq!((img.width(), img.height(), img.num_planes()), (80, 48, 3));
    for plane in img.planes() {
        assert!(plane.iter().all(|&v| v == plane[0]));
    }
}

#[test]
fn distinct_priors_get_distinct_blocks() {
    let n = 256;
    let map = PriorIndexMap::new(16, 16, (0..n as u16).collect(), n).unwrap();
    let img = segmentation_map(&map, n, 9).unwrap();
    let mut colors: Vec<[u64; 3]> = (0..n)
        .map(|i| {
            let at = (i / 16) * 16 * img.width() + (i % 16) * 16;
            [0, 1, 2].map(|p| (img.plane(p)[at] * 255.0).round() as u64)
        })
        .collect();
    colors.sort();
    colors.dedup();
    assert_eq!(colors.len(), n);
    assert!(segmentation_map(&map, 255, 9).is_err());
}

#[test]
fn cdf_dump_writes_one_normalized_file_per_prior() {
    let alphabet = SymbolAlphabet::new(-3, 4).unwrap();
    let tables = MonotoneCdfParams::init(5, 3, alphabet, 1)
        .unwrap()
        .freeze(alphabet)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = cdf_dump(&tables, dir.path()).unwrap();
    assert_eq!(files.len(), 5);
    for f in files {
        let text = std::fs::read_to_string(f).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 3);
        for row in rows {
            let v: Vec<f64> = row.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), alphabet.len() + 1);
            assert_eq!((v[0], v[v.len() - 1]), (0.0, 1.0));
            assert!(v.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
