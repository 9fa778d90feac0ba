use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use super::{CsrMatrix, IOMatrix, LeontiefError};

fn io_err(e: impl std::fmt::Display) -> LeontiefError {
    LeontiefError::Io(e.to_string())
}

/// Writes `row_firm,col_firm,omega` triplets in row-major order.
pub fn write_io_triplets<W: Write>(w: W, io: &IOMatrix) -> Result<(), LeontiefError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row_firm", "col_firm", "omega"]).map_err(io_err)?;
    let firms = io.firms();
    for (i, j, v) in io.omega().triplets() {
        out.write_record([firms[i].as_str(), firms[j].as_str(), &format!("{v:.17e}")]).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads triplets into a matrix over `firms`; unknown firm ids are an error.
pub fn read_io_triplets<R: Read>(r: R, firms: Arc<Vec<String>>, year: i32) -> Result<IOMatrix, LeontiefError> {
    let index: HashMap<&str, usize> = firms.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut triplets = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(io_err)?;
        let i = *index.get(&row[0]).ok_or_else(|| LeontiefError::UnknownFirm(row[0].to_string()))?;
        let j = *index.get(&row[1]).ok_or_else(|| LeontiefError::UnknownFirm(row[1].to_string()))?;
        let v: f64 = row[2].parse().map_err(io_err)?;
        triplets.push((i, j, v));
    }
    let n = firms.len();
    Ok(IOMatrix::new(year, firms.clone(), CsrMatrix::from_triplets(n, n, triplets)))
}

/// Writes `firm_id,value` rows.
pub fn write_vector<W: Write>(w: W, firms: &[String], values: &[f64]) -> Result<(), LeontiefError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["firm_id", "value"]).map_err(io_err)?;
    for (f, v) in firms.iter().zip(values) {
        out.write_record([f.as_str(), &format!("{v:.17e}")]).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads `firm_id,value` rows in file order.
pub fn read_vector<R: Read>(r: R) -> Result<Vec<(String, f64)>, LeontiefError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(io_err)?;
        out.push((row[0].to_string(), row[1].parse().map_err(io_err)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_round_trip_exactly() {
        let io = IOMatrix::from_dense(2014, &[vec![0.0, 1.0 / 3.0], vec![2.0 / 3.0, 0.0]]);
        let mut buf = Vec::new();
        write_io_triplets(&mut buf, &io).unwrap();
        let back = read_io_triplets(buf.as_slice(), io.firms().clone(), 2014).unwrap();
        assert_eq!(back, io);
        let bad = "row_firm,col_firm,omega\nF0,NOPE,1\n";
        assert!(matches!(read_io_triplets(bad.as_bytes(), io.firms().clone(), 2014), Err(LeontiefError::UnknownFirm(_))));
    }

    #[test]
    fn vectors_round_trip() {
        let firms = vec!["A".to_string(), "B".to_string()];
        let mut buf = Vec::new();
        write_vector(&mut buf, &firms, &[0.1, -2.5]).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), vec![("A".into(), 0.1), ("B".into(), -2.5)]);
    }
}
