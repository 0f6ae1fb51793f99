use vitcube::observations::{read_observations, write_observations, AccuracyUnit};
use vitcube::CliError;

const HEADER: &str = "id,r,d_i,d_m,w,macs,top1,top5\n";

fn read(text: &str) -> Result<vitcube::observations::Observations, CliError> {
    read_observations(text.as_bytes())
}

fn message(text: &str) -> String {
    read(text).unwrap_err().to_string()
}

#[test]
fn header_only_gives_no_records() {
    let obs = read(HEADER).unwrap();
    assert!(obs.records.is_empty());
    assert_eq!(obs.unit, AccuracyUnit::Fraction);
}

#[test]
fn percent_file_is_normalized() {
    let obs = read(&format!("{HEADER}base,1,1,1,1,1812645888,82.36,95.33\nsmall,0.9,1,1,0.8,9e8,79.1,\n")).unwrap();
    assert_eq!(obs.unit, AccuracyUnit::Percent);
    assert!((obs.records[0].accuracy - 0.8236).abs() < 1e-12);
    assert!((obs.records[0].top5.unwrap() - 0.9533).abs() < 1e-12);
    assert_eq!(obs.records[1].top5, None);
}

#[test]
fn fraction_file_is_kept() {
    let obs = read(&format!("{HEADER}a,1,1,1,1,100,0.8236,\n")).unwrap();
    assert_eq!(obs.unit, AccuracyUnit::Fraction);
    assert_eq!(obs.records[0].accuracy, 0.8236);
}

#[test]
fn mixed_units_are_rejected() {
    let m = message(&format!("{HEADER}a,1,1,1,1,100,82.36,\nb,1,1,1,1,90,0.81,\n"));
    assert!(m.contains("line 3") && m.contains("mixed units"), "{m}");
}

#[test]
fn negative_macs_names_the_line() {
    let m = message(&format!("# comment\n{HEADER}a,1,1,1,1,100,0.8,\n# another\nb,1,1,1,1,-5,0.8,\n"));
    assert!(m.starts_with("line 5:"), "{m}");
}

#[test]
fn malformed_number_names_the_line() {
    let m = message(&format!("{HEADER}a,1,1,1,1,100,0.8,\nb,1,x,1,1,100,0.8,\n"));
    assert!(m.starts_with("line 3:"), "{m}");
}

#[test]
fn duplicate_ids_are_rejected() {
    let m = message(&format!("{HEADER}a,1,1,1,1,100,0.8,\na,1,1,1,1,90,0.7,\n"));
    assert!(m.contains("duplicate id") && m.contains("line 2"), "{m}");
}

#[test]
fn missing_column_is_reported() {
    let m = message("id,r,d_i,d_m,w,macs\n");
    assert!(m.contains("top1"), "{m}");
}

#[test]
fn write_then_read_is_lossless() {
    let text = format!("{HEADER}a,1.1,0.95,1.05,0.8,1234567890,0.8236,0.9533\nb,0.3333333333333333,2,1,1,1e9,0.1,\n");
    let first = read(&text).unwrap();
    let mut buf = Vec::new();
    write_observations(&first.records, &mut buf).unwrap();
    let second = read_observations(&buf[..]).unwrap();
    assert_eq!(first.records, second.records);
}
