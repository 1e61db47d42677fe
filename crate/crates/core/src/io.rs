//! File formats: dataset and draw-set CSV, tilted-CDF CSV, and JSON with
//! floats fixed at 17 significant digits.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::ser::{Serialize, SerializeSeq, Serializer};
use serde_json::value::RawValue;

use crate::ecdf::TiltedCdfCurve;
use crate::error::{Result, UpcError};
use crate::udraw::{StrataValue, UDrawSet};

/// `x` formatted with 17 significant digits, `null` when not finite.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(fmt_f64(*x)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&RawValue::from_string(fmt_f64(*x)).map_err(serde::ser::Error::custom)?)?;
    }
    seq.end()
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Reads a single-column dataset with header `y`.
pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| UpcError::Parse(e.to_string()))?.clone();
    let Some(col) = headers.iter().position(|h| h == "y") else {
        return Err(UpcError::Parse("dataset CSV needs a `y` column".into()));
    };
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| UpcError::Parse(e.to_string()))?;
        let field = rec.get(col).unwrap_or("");
        let y: f64 = field
            .parse()
            .map_err(|_| UpcError::Parse(format!("row {}: `{field}` is not a number", row + 1)))?;
        if !y.is_finite() {
            return Err(UpcError::Parse(format!("row {}: non-finite value", row + 1)));
        }
        out.push(y);
    }
    if out.is_empty() {
        return Err(UpcError::Parse("dataset CSV has no rows".into()));
    }
    Ok(out)
}

pub fn write_dataset_csv<W: Write>(writer: W, y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["y"]).map_err(csv_err)?;
    for v in y {
        w.write_record([format!("{v:?}")]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> UpcError {
    UpcError::Parse(e.to_string())
}

/// Long-format draw set: `draw,role,name,index,u` plus one `strata_<key>`
/// column per annotation key used anywhere in the schema.
pub fn write_udrawset_csv<W: Write>(writer: W, set: &UDrawSet<f64>) -> Result<()> {
    let labels = set.schema().labels();
    let keys: BTreeSet<&str> = labels.iter().flat_map(|l| l.strata.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["draw".to_string(), "role".into(), "name".into(), "index".into(), "u".into()];
    header.extend(keys.iter().map(|k| format!("strata_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, draw) in set.draws().iter().enumerate() {
        for (u, l) in draw.values().iter().zip(labels) {
            let mut rec = vec![t.to_string(), l.role.to_string(), l.name.clone(), l.index.to_string(), fmt_f64(*u)];
            rec.extend(keys.iter().map(|k| match l.strata.get(*k) {
                Some(StrataValue::Num(x)) => fmt_f64(*x),
                Some(StrataValue::Cat(c)) => c.clone(),
                None => String::new(),
            }));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Tilted curves in long format `u,tilted_value,draw`.
pub fn write_tilted_csv<W: Write>(writer: W, curves: &[TiltedCdfCurve<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["u", "tilted_value", "draw"]).map_err(csv_err)?;
    for (t, c) in curves.iter().enumerate() {
        for (g, v) in c.grid.iter().zip(&c.values) {
            w.write_record([fmt_f64(*g), fmt_f64(*v), t.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecdf::tilted_ecdf;
    use crate::udraw::{LabelSchema, Provenance, UDraw, ULabel};

    #[test]
    fn seventeen_digit_json() {
        #[derive(serde::Serialize)]
        struct Row {
            #[serde(serialize_with = "ser_f64")]
            x: f64,
            #[serde(serialize_with = "ser_vec_f64")]
            v: Vec<f64>,
        }
        let s = serde_json::to_string(&Row { x: 0.1, v: vec![1.0, 2.5e-300] }).unwrap();
        assert_eq!(s, r#"{"x":1.0000000000000001e-1,"v":[1.0000000000000000e0,2.5000000000000000e-300]}"#);
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64().unwrap(), 0.1);
        assert_eq!(fmt_f64(f64::NAN), "null");
    }

    #[test]
    fn dataset_round_trip() {
        let y = vec![28.0, -44.0, 0.5];
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &y).unwrap();
        assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), y);
        assert!(read_dataset_csv("x\n1\n".as_bytes()).is_err());
        assert!(read_dataset_csv("y\nabc\n".as_bytes()).is_err());
        assert!(read_dataset_csv("y\n".as_bytes()).is_err());
        assert_eq!(read_dataset_csv("y\n 1 \n0\n".as_bytes()).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn udrawset_and_tilted_csv() {
        let schema = LabelSchema::new(vec![
            ULabel::param("theta", 0),
            ULabel::data("y", 0).with_stratum("wave", StrataValue::Num(1.0)),
        ])
        .unwrap();
        let draws = vec![
            UDraw::new(vec![0.25, 0.5], schema.clone()).unwrap(),
            UDraw::new(vec![0.75, 1.0], schema).unwrap(),
        ];
        let set = UDrawSet::new("d", draws, Provenance::default()).unwrap();
        let mut buf = Vec::new();
        write_udrawset_csv(&mut buf, &set).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "draw,role,name,index,u,strata_wave");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,param,theta,0,2.5"));
        assert!(lines[1].ends_with(','));
        assert!(lines[4].starts_with("1,data,y,0,9.99999999999"));

        let curve = tilted_ecdf(&[0.5], &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_tilted_csv(&mut buf, &[curve.clone(), curve]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(4).unwrap().ends_with(",1"));
    }
}
