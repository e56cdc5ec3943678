//! JSON formats for realizations and perturbations.
//!
//! Matrices are row-major arrays of rows, each entry a `[re, im]` pair.
//! Numbers are written with 17 significant digits, which round-trips every
//! finite f64 exactly.
//!
//! ```json
//! { "n": 1, "m": 1, "r": 1,
//!   "poly": [[[[0.0, 0.0]]], [[[1.0, 0.0]]]],
//!   "C": [[[1.0, 0.0]]], "A": [[[2.0, 0.0]]], "E": [[[1.0, 0.0]]], "B": [[[1.0, 0.0]]] }
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::perturb::{Perturbation, Regime};
use crate::realization::{MatrixPolynomial, Realization};

type Rows = Vec<Vec<[f64; 2]>>;

/// Compact JSON with every float printed as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes any value with the 17-significant-digit float format.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}

/// A real number with 17 significant digits, as used in JSON and CSV output.
pub fn format_real(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn ser_cvector<S: Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(name: &str, rows: &Rows, shape: (usize, usize)) -> Result<CMatrix> {
    let (nr, nc) = shape;
    if rows.len() != nr {
        return Err(Error::Dimension(format!("{name} has {} rows, expected {nr}", rows.len())));
    }
    let mut out = CMatrix::zeros(nr, nc);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != nc {
            return Err(Error::Dimension(format!(
                "{name} row {i} has {} entries, expected {nc}",
                row.len()
            )));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Validation(format!("{name}[{i}][{j}] is not finite")));
            }
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(out)
}

fn parse<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("at field `{path}`: {}", e.into_inner()))
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RealizationFile {
    n: usize,
    m: usize,
    r: usize,
    poly: Vec<Rows>,
    #[serde(rename = "C")]
    c: Rows,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "E")]
    e: Rows,
    #[serde(rename = "B")]
    b: Rows,
}

pub fn realization_to_json(rep: &Realization) -> Result<String> {
    let file = RealizationFile {
        n: rep.n(),
        m: rep.m(),
        r: rep.r(),
        poly: rep.poly().coeffs().iter().map(to_rows).collect(),
        c: to_rows(rep.c()),
        a: to_rows(rep.a()),
        e: to_rows(rep.e()),
        b: to_rows(rep.b()),
    };
    to_json_string(&file)
}

pub fn realization_from_json(text: &str) -> Result<Realization> {
    let file: RealizationFile = parse(text)?;
    let (n, m, r) = (file.n, file.m, file.r);
    if n == 0 {
        return Err(Error::Parse("field `n` must be positive".into()));
    }
    if file.poly.len() != m + 1 {
        return Err(Error::Parse(format!(
            "field `poly` has {} entries, expected m + 1 = {}",
            file.poly.len(),
            m + 1
        )));
    }
    let coeffs = file
        .poly
        .iter()
        .enumerate()
        .map(|(j, rows)| from_rows(&format!("poly[{j}]"), rows, (n, n)))
        .collect::<Result<Vec<_>>>()?;
    Realization::new(
        MatrixPolynomial::new(coeffs)?,
        from_rows("C", &file.c, (n, r))?,
        from_rows("A", &file.a, (r, r))?,
        from_rows("E", &file.e, (r, r))?,
        from_rows("B", &file.b, (r, n))?,
    )
}

pub fn save_realization(path: impl AsRef<Path>, rep: &Realization) -> Result<()> {
    fs::write(path, realization_to_json(rep)?)?;
    Ok(())
}

pub fn load_realization(path: impl AsRef<Path>) -> Result<Realization> {
    realization_from_json(&fs::read_to_string(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationFile {
    regime: Regime,
    dpoly: Vec<Rows>,
    #[serde(rename = "dC", default, skip_serializing_if = "Option::is_none")]
    dc: Option<Rows>,
    #[serde(rename = "dB", default, skip_serializing_if = "Option::is_none")]
    db: Option<Rows>,
    lambda_target: [f64; 2],
}

pub fn perturbation_to_json(delta: &Perturbation) -> Result<String> {
    let lambda = delta.lambda_target();
    let file = PerturbationFile {
        regime: delta.regime(),
        dpoly: delta.dpoly().iter().map(to_rows).collect(),
        dc: delta.dc().map(to_rows),
        db: delta.db().map(to_rows),
        lambda_target: [lambda.re, lambda.im],
    };
    to_json_string(&file)
}

pub fn perturbation_from_json(text: &str) -> Result<Perturbation> {
    let file: PerturbationFile = parse(text)?;
    let n = file
        .dpoly
        .first()
        .map(|rows| rows.len())
        .ok_or_else(|| Error::Parse("field `dpoly` is empty".into()))?;
    let dpoly = file
        .dpoly
        .iter()
        .enumerate()
        .map(|(j, rows)| from_rows(&format!("dpoly[{j}]"), rows, (n, n)))
        .collect::<Result<Vec<_>>>()?;
    let dc = match &file.dc {
        Some(rows) => {
            let r = rows.first().map_or(0, |row| row.len());
            Some(from_rows("dC", rows, (n, r))?)
        }
        None => None,
    };
    let db = match &file.db {
        Some(rows) => Some(from_rows("dB", rows, (rows.len(), n))?),
        None => None,
    };
    let [re, im] = file.lambda_target;
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::Validation("lambda_target is not finite".into()));
    }
    Perturbation::new(file.regime, dpoly, dc, db, Complex64::new(re, im))
}

pub fn save_perturbation(path: impl AsRef<Path>, delta: &Perturbation) -> Result<()> {
    fs::write(path, perturbation_to_json(delta)?)?;
    Ok(())
}

pub fn load_perturbation(path: impl AsRef<Path>) -> Result<Perturbation> {
    perturbation_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::real_matrix;

    const R0: &str = r#"{"n":1,"m":1,"r":1,"poly":[[[[0,0]]],[[[1,0]]]],"C":[[[1,0]]],"A":[[[2,0]]],"E":[[[1,0]]],"B":[[[1,0]]]}"#;

    #[test]
    fn parses_hand_written_file() {
        let rep = realization_from_json(R0).unwrap();
        assert_eq!((rep.n(), rep.m(), rep.r()), (1, 1, 1));
        assert_eq!(rep.a(), &real_matrix(1, 1, &[2.0]));
        let again = realization_from_json(&realization_to_json(&rep).unwrap()).unwrap();
        assert_eq!(again, rep);
    }

    #[test]
    fn writes_seventeen_significant_digits() {
        let text = realization_to_json(&realization_from_json(R0).unwrap()).unwrap();
        assert!(text.contains("2.0000000000000000e0"), "{text}");
    }

    #[test]
    fn rejects_extra_coefficient() {
        let text = R0.replace(r#""poly":[[[[0,0]]],[[[1,0]]]]"#, r#""poly":[[[[0,0]]],[[[1,0]]],[[[1,0]]]]"#);
        assert!(matches!(realization_from_json(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn rejects_singular_e() {
        let text = R0.replace(r#""E":[[[1,0]]]"#, r#""E":[[[0,0]]]"#);
        assert!(matches!(realization_from_json(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let text = R0.replace(r#""A":[[[2,0]]]"#, r#""A":[[["x",0]]]"#);
        match realization_from_json(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("A") && msg.contains("line"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = R0.replace(r#""C":[[[1,0]]]"#, r#""C":[[[1,0],[2,0]]]"#);
        assert!(matches!(realization_from_json(&ragged), Err(Error::Dimension(_))));
    }

    #[test]
    fn pure_polynomial_round_trip() {
        let poly = MatrixPolynomial::new(vec![real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        let rep = Realization::polynomial(poly);
        let text = realization_to_json(&rep).unwrap();
        assert_eq!(realization_from_json(&text).unwrap(), rep);
    }
}
