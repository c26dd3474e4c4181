//! Serialization of measures, paths and results.
//!
//! CSV numbers are written with 17 significant digits so that they round-trip
//! exactly; missing values are empty fields.

use mfg_core::lagrangian::PathMeasure;
use mfg_core::{EmpiricalMeasure, EquilibriumResult};
use serde::Serialize;

/// 17 significant digits in scientific notation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Builds a CSV document with one header row and optional trailing
/// `# key=value` annotation lines.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
    comments: Vec<String>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).expect("writing to memory");
        Self { writer, comments: Vec::new() }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn comment(&mut self, text: &str) {
        self.comments.push(format!("# {text}\n"));
    }

    pub fn finish(self) -> String {
        let mut bytes = self.writer.into_inner().expect("writing to memory");
        for c in self.comments {
            bytes.extend_from_slice(c.as_bytes());
        }
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

fn coordinate_header(d: usize) -> impl Iterator<Item = String> {
    (1..=d).map(|k| format!("x_{k}"))
}

/// Columns `index,x_1..x_d`.
pub fn measure_csv(m: &EmpiricalMeasure) -> String {
    let header: Vec<String> = std::iter::once("index".to_owned()).chain(coordinate_header(m.dim())).collect();
    let mut csv = Csv::new(&header);
    for (j, p) in m.points().enumerate() {
        let row: Vec<String> = std::iter::once(j.to_string()).chain(p.iter().map(|&v| num(v))).collect();
        csv.row(&row);
    }
    csv.finish()
}

/// Columns `atom,knot,t,x_1..x_d`.
pub fn paths_csv(eta: &PathMeasure) -> String {
    let header: Vec<String> =
        ["atom", "knot", "t"].iter().map(|s| s.to_string()).chain(coordinate_header(eta.dim())).collect();
    let mut csv = Csv::new(&header);
    for (j, atom) in eta.atoms().iter().enumerate() {
        for (i, &t) in atom.times().iter().enumerate() {
            let row: Vec<String> = [j.to_string(), i.to_string(), num(t)]
                .into_iter()
                .chain(atom.knot(i).iter().map(|&v| num(v)))
                .collect();
            csv.row(&row);
        }
    }
    csv.finish()
}

/// A measure as an array of point arrays.
pub fn measure_json(m: &EmpiricalMeasure) -> Vec<Vec<f64>> {
    m.points().map(|p| p.to_vec()).collect()
}

#[derive(Debug, Serialize)]
pub struct ResultJson {
    pub terminal: Vec<Vec<f64>>,
    pub nash_residual: f64,
    pub potential_value: f64,
    pub method: &'static str,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&EquilibriumResult> for ResultJson {
    fn from(r: &EquilibriumResult) -> Self {
        Self {
            terminal: measure_json(&r.terminal),
            nash_residual: r.nash_residual,
            potential_value: r.potential_value,
            method: r.method.as_str(),
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfg_core::lagrangian::straight_line_lift;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.6, 1.0 / 3.0, 6.02e23, -0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
        assert_eq!(opt_num(None), "");
    }

    #[test]
    fn measure_table_has_one_header() {
        let m = EmpiricalMeasure::from_points(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let csv = measure_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,x_1,x_2");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,2.0000000000000000e0,"));
    }

    #[test]
    fn path_table_lists_every_knot() {
        let x = EmpiricalMeasure::from_scalars(&[0.0, 1.0]).unwrap();
        let y = EmpiricalMeasure::from_scalars(&[1.0, 1.0]).unwrap();
        let eta = straight_line_lift(&x, &y, 2.0, 4).unwrap();
        let csv = paths_csv(&eta);
        assert_eq!(csv.lines().next(), Some("atom,knot,t,x_1"));
        assert_eq!(csv.lines().count(), 1 + 2 * 5);
    }
}
