use std::fs;

use bigsample::io::{load_big_sample, load_population, load_probability_sample, write_big_sample};
use bigsample::{error_decomposition, Error};

#[test]
fn load_from_disk_and_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let pop_path = dir.path().join("pop.csv");
    let big_path = dir.path().join("big.csv");
    fs::write(&pop_path, "id,x1,y\n1,0,1\n2,0,2\n3,0,3\n4,0,4\n").unwrap();
    fs::write(&big_path, "id,x1,y\n3,0,3\n4,0,4\n").unwrap();
    let pop = load_population(&pop_path).unwrap();
    let big = load_big_sample(&big_path, pop.size()).unwrap();
    let dec = error_decomposition(&pop, &big).unwrap();
    assert!((dec.error - 1.0).abs() < 1e-15);
    assert!((dec.cov_delta_y - 0.5).abs() < 1e-15);

    let copy = dir.path().join("copy.csv");
    write_big_sample(fs::File::create(&copy).unwrap(), &big).unwrap();
    assert_eq!(load_big_sample(&copy, 4).unwrap(), big);
}

#[test]
fn missing_file_and_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_population(dir.path().join("absent.csv")).is_err());
    let a_path = dir.path().join("a.csv");
    fs::write(&a_path, "id,x1,d,delta\n1,0.5,2,1\n2,0.7,2\n").unwrap();
    match load_probability_sample(&a_path) {
        Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
        other => panic!("{other:?}"),
    }
}
