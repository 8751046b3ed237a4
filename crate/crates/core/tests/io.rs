use landis_core::io::{read_field_csv, write_complex_csv, write_scalar_csv};
use landis_core::{ComplexField, GridSpec, ScalarField};

#[test]
fn scalar_fields_round_trip_exactly() {
    let g = GridSpec::disc(2.0, 32).unwrap().build();
    let f = ScalarField::from_fn(g.clone(), |z| (z.re * 3.0).sin() / 7.0 + z.im).unwrap();
    let mut buf = Vec::new();
    write_scalar_csv(&f, &mut buf).unwrap();
    assert!(buf.starts_with(b"x,y,value\n"));
    let back = read_field_csv(buf.as_slice()).unwrap();
    assert!(!back.complex);
    let s = back.scalar().unwrap();
    assert_eq!(s.len(), g.len());
    assert!((0..g.len()).all(|k| (s.grid().point(k) - g.point(k)).norm() < 1e-12));
    assert!((0..f.len()).all(|k| s.get(k) == f.get(k)));
}

#[test]
fn complex_fields_round_trip_exactly() {
    let g = GridSpec::disc(1.0, 24).unwrap().build();
    let f = ComplexField::from_fn(g, |z| z.exp() / 3.0).unwrap();
    let mut buf = Vec::new();
    write_complex_csv(&f, &mut buf).unwrap();
    let back = read_field_csv(buf.as_slice()).unwrap().complex_field().unwrap();
    assert!((0..f.len()).all(|k| back.get(k) == f.get(k)));
}

#[test]
fn malformed_files_are_rejected() {
    assert!(read_field_csv("a,b,c\n1,2,3\n".as_bytes()).is_err());
    assert!(read_field_csv("x,y,value\n1,2\n".as_bytes()).is_err());
    assert!(read_field_csv("x,y,value\n1,2,abc\n".as_bytes()).is_err());
    assert!(read_field_csv("".as_bytes()).is_err());
}
