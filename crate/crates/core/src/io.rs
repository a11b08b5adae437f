//! JSON conventions shared by every module and the CLI.
//!
//! Complex numbers are two-element arrays `[re, im]` (a bare number is accepted
//! on input as a real entry). Matrices are row-major nested arrays. Report
//! numbers are rounded to 12 significant digits.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::state::{DensityOperator, PureState};
use crate::{CMatrix, CVector, Error, Result, Tolerances, C64};

/// One serialized complex entry.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Complex([re, im]) => C64::new(re, im),
            Entry::Real(re) => C64::new(re, 0.0),
        }
    }
}

impl From<C64> for Entry {
    fn from(c: C64) -> Self {
        Entry::Complex([c.re, c.im])
    }
}

/// Row-major nested-array form of a complex matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<Entry>>);

/// Flat array form of a complex vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorRepr(pub Vec<Entry>);

impl From<&CMatrix> for MatrixRepr {
    fn from(m: &CMatrix) -> Self {
        MatrixRepr(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let rows = r.0.len();
        let cols = r.0.first().map_or(0, Vec::len);
        if let Some((i, row)) = r.0.iter().enumerate().find(|(_, row)| row.len() != cols) {
            return Err(Error::Format(format!(
                "row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| r.0[i][j].into()))
    }
}

impl From<&CVector> for VectorRepr {
    fn from(v: &CVector) -> Self {
        VectorRepr(v.iter().map(|&c| c.into()).collect())
    }
}

impl From<VectorRepr> for CVector {
    fn from(r: VectorRepr) -> Self {
        CVector::from_iterator(r.0.len(), r.0.into_iter().map(C64::from))
    }
}

impl TryFrom<MatrixRepr> for DensityOperator {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        DensityOperator::new(CMatrix::try_from(r)?, &Tolerances::default())
    }
}

impl From<DensityOperator> for MatrixRepr {
    fn from(d: DensityOperator) -> Self {
        MatrixRepr::from(d.matrix())
    }
}

impl TryFrom<VectorRepr> for PureState {
    type Error = Error;

    fn try_from(r: VectorRepr) -> Result<Self> {
        PureState::new(r.into(), &Tolerances::default())
    }
}

impl From<PureState> for VectorRepr {
    fn from(p: PureState) -> Self {
        VectorRepr::from(p.vector())
    }
}

/// `serde(with = ...)` adapter for [`CMatrix`] fields.
pub mod matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, ser: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr::from(m).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<CMatrix, D::Error> {
        let r = MatrixRepr::deserialize(de)?;
        CMatrix::try_from(r).map_err(serde::de::Error::custom)
    }
}

/// `serde(with = ...)` adapter for `Vec<CMatrix>` fields.
pub mod matrix_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        ms: &[CMatrix],
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<MatrixRepr> = ms.iter().map(MatrixRepr::from).collect();
        reprs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<Vec<CMatrix>, D::Error> {
        let reprs = Vec::<MatrixRepr>::deserialize(de)?;
        reprs
            .into_iter()
            .map(|r| CMatrix::try_from(r).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `serde(with = ...)` adapter for [`CVector`] fields.
pub mod vector {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, ser: S) -> std::result::Result<S::Ok, S::Error> {
        VectorRepr::from(v).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<CVector, D::Error> {
        Ok(VectorRepr::deserialize(de)?.into())
    }
}

/// `serde(with = ...)` adapter for `Vec<CVector>` fields.
pub mod vector_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        vs: &[CVector],
        ser: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<VectorRepr> = vs.iter().map(VectorRepr::from).collect();
        reprs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> std::result::Result<Vec<CVector>, D::Error> {
        Ok(Vec::<VectorRepr>::deserialize(de)?
            .into_iter()
            .map(CVector::from)
            .collect())
    }
}

/// Rounds `x` to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Rounds every number in a JSON tree to 12 significant digits, normalizing `-0` to `0`.
pub fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    let r = round_sig12(x);
                    let r = if r == 0.0 { 0.0 } else { r };
                    if let Some(num) = serde_json::Number::from_f64(r) {
                        *n = num;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

/// Serializes a report as pretty JSON with 12-significant-digit numbers.
pub fn to_report_json<T: Serialize>(report: &T) -> Result<String> {
    let mut v = serde_json::to_value(report).map_err(|e| Error::Format(e.to_string()))?;
    round_numbers(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| Error::Format(e.to_string()))
}

/// Serializes `+∞` as the string `"inf"` and finite values as numbers.
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            Repr::Text("inf".into()).serialize(ser)
        } else {
            Repr::Num(*x).serialize(ser)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices_parse_mixed_entries() {
        let m: MatrixRepr = serde_json::from_str("[[0.5, [0.1, -0.2]], [[0.1, 0.2], 0.5]]").unwrap();
        let m = CMatrix::try_from(m).unwrap();
        assert_eq!(m[(0, 1)], C64::new(0.1, -0.2));
        assert_eq!(m[(1, 1)], C64::new(0.5, 0.0));
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let m: MatrixRepr = serde_json::from_str("[[1, 0], [0]]").unwrap();
        assert!(matches!(CMatrix::try_from(m), Err(Error::Format(_))));
    }

    #[test]
    fn density_operator_json_validates() {
        let ok: DensityOperator = serde_json::from_str("[[0.5, 0], [0, 0.5]]").unwrap();
        assert_eq!(ok.dim(), 2);
        assert!(serde_json::from_str::<DensityOperator>("[[0.5, 0], [0, 0.6]]").is_err());
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig12(std::f64::consts::LN_2), 0.693147180560);
        assert_eq!(round_sig12(1.234567890123456e-7), 1.23456789012e-7);
        let mut v = serde_json::json!({"a": [std::f64::consts::PI, -0.0], "b": 3});
        round_numbers(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[3.14159265359,0.0],"b":3}"#);
    }
}
