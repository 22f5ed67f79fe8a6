//! JSON encodings shared by every file format in the crate.
//!
//! Floats are written with exactly 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` and makes repeated runs byte-identical.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

#[derive(Clone, Copy, Debug, Default)]
pub struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_canonical<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_canonical_string(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// `{"rows": r, "cols": c, "data": [[re, im], ...]}` in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<&MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(j: &MatrixJson) -> Result<Self> {
        if j.data.len() != j.rows * j.cols {
            return Err(Error::Parse(format!(
                "matrix declares {}x{} but carries {} entries",
                j.rows,
                j.cols,
                j.data.len()
            )));
        }
        if j.data.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite matrix entry".into()));
        }
        Ok(ComplexMatrix::from_fn(j.rows, j.cols, |r, c| {
            let [re, im] = j.data[r * j.cols + c];
            Complex64::new(re, im)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use proptest::prelude::*;

    #[test]
    fn float_format_is_fixed_width() {
        let s = to_canonical_string(&[1.0, -0.25, 1e-300]).unwrap();
        assert_eq!(
            s,
            "[1.0000000000000000e0,-2.5000000000000000e-1,1.0000000000000000e-300]"
        );
    }

    #[test]
    fn matrix_roundtrip() {
        let m = from_rows(2, 1, &[(0.1, -0.2), (1.0 / 3.0, 7.0)]);
        let s = to_canonical_string(&MatrixJson::from(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&s).unwrap();
        assert_eq!(ComplexMatrix::try_from(&back).unwrap(), m);
    }

    #[test]
    fn rejects_wrong_entry_count() {
        let j = MatrixJson {
            rows: 2,
            cols: 2,
            data: vec![[0.0, 0.0]; 3],
        };
        assert!(ComplexMatrix::try_from(&j).is_err());
    }

    proptest! {
        #[test]
        fn every_finite_float_roundtrips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = to_canonical_string(&x).unwrap();
            let y: f64 = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
