mod common;

use std::fs;

use nalgebra::DMatrix;

use flowpca::grid::build_ptdf;
use flowpca::io::{
    read_json, read_network, read_ptdf, read_series, read_weather_params, write_json,
    write_network, write_ptdf, write_series, PcaExport,
};
use flowpca::pca::analyze;
use flowpca::synth::WeatherParams;
use flowpca::Error;

use common::*;

#[test]
fn network_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = random_network(&mut rng(1), 9, 5, false);
    let (n, l) = (dir.path().join("nodes.csv"), dir.path().join("lines.csv"));
    write_network(&net, &n, &l).unwrap();
    let back = read_network(&n, &l, Some(net.area_km2())).unwrap();
    assert_eq!(back.nodes(), net.nodes());
    assert_eq!(back.lines(), net.lines());
}

#[test]
fn series_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(2);
    let v = balanced_covariance(&mut r, 5) * 1e-3 + DMatrix::from_element(5, 5, 1.0 / 3.0);
    let s = series(v, labels("n", 5));
    let path = dir.path().join("s.csv");
    write_series(&path, &s).unwrap();
    assert_eq!(read_series(&path).unwrap(), s);
}

#[test]
fn ptdf_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = random_network(&mut rng(3), 7, 4, false);
    let ptdf = build_ptdf(&net).unwrap();
    let path = dir.path().join("ptdf.csv");
    write_ptdf(&path, &ptdf).unwrap();
    let (lines, nodes, h) = read_ptdf(&path).unwrap();
    assert_eq!(lines, net.line_ids());
    assert_eq!(nodes, net.node_ids());
    assert_eq!(&h, ptdf.h());
}

#[test]
fn pca_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = series(balanced_covariance(&mut rng(4), 6), labels("n", 6));
    let (res, _) = analyze(&s).unwrap();
    let export = PcaExport::new(s.labels(), &res, 0.95).unwrap();
    let path = dir.path().join("pca.json");
    write_json(&path, &export).unwrap();
    let back: PcaExport = read_json(&path).unwrap();
    assert_eq!(back, export);
    assert_eq!(back.axes.len(), 6);
    for (k, axis) in back.axes.iter().enumerate() {
        assert_eq!(axis.as_slice(), res.axis(k).as_slice());
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let lines = dir.path().join("lines.csv");
    fs::write(
        &nodes,
        "node_id,x_km,y_km,country,mean_load_mw\na,0,0,X,1\nb,1,zero,X,1\n",
    )
    .unwrap();
    fs::write(&lines, "line_id,from_node,to_node,reactance_pu\nab,a,b,1\n").unwrap();
    match read_network(&nodes, &lines, Some(1.0)) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }

    fs::write(&nodes, "id,x,y\n").unwrap();
    assert!(matches!(
        read_network(&nodes, &lines, None),
        Err(Error::Parse { line: 1, .. })
    ));

    let s = dir.path().join("s.csv");
    fs::write(
        &s,
        "timestamp,a\n2011-01-01T00:00:00Z,1\n2011-01-01T01:00:00Z,x\n",
    )
    .unwrap();
    assert!(matches!(read_series(&s), Err(Error::Parse { line: 3, .. })));
    fs::write(
        &s,
        "timestamp,a\n2011-01-01T00:00:00Z,1\n2011-01-01T03:00:00Z,2\n",
    )
    .unwrap();
    assert!(matches!(read_series(&s), Err(Error::Validation(_))));
}

#[test]
fn missing_area_falls_back_to_bounding_box() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let lines = dir.path().join("lines.csv");
    fs::write(
        &nodes,
        "node_id,x_km,y_km,country,mean_load_mw\na,0,0,X,1\nb,30,20,X,1\n",
    )
    .unwrap();
    fs::write(&lines, "line_id,from_node,to_node,reactance_pu\nab,a,b,1\n").unwrap();
    assert_eq!(
        read_network(&nodes, &lines, None).unwrap().area_km2(),
        600.0
    );
}

#[test]
fn weather_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.conf");
    fs::write(&path, "# synthetic weather\nwind_correlation_length_km = 300\nseed = 7\nstart = 2012-03-01T00:00:00Z\n").unwrap();
    let p = read_weather_params(&path).unwrap();
    assert_eq!(p.wind_correlation_length_km, 300.0);
    assert_eq!(p.seed, 7);
    assert_eq!(p.solar_peak_cf, WeatherParams::default().solar_peak_cf);

    fs::write(&path, "wind_correlation_lenght_km = 300\n").unwrap();
    assert!(matches!(
        read_weather_params(&path),
        Err(Error::Parse { line: 1, .. })
    ));
    fs::write(&path, "wind_correlation_length_km = -1\n").unwrap();
    assert!(read_weather_params(&path).is_err());
}
