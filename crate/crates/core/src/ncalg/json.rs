//! Serde adapters for complex matrices.
//!
//! A matrix is a row-major array of rows; each entry is either a bare
//! number (real) or an `[re, im]` pair. A bare number in place of the whole
//! matrix denotes a 1×1 matrix. Output always uses `[re, im]` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMat, C64};

#[derive(Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<EntryRepr> for C64 {
    fn from(e: EntryRepr) -> C64 {
        match e {
            EntryRepr::Real(x) => C64::new(x, 0.0),
            EntryRepr::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Scalar(EntryRepr),
    Rows(Vec<Vec<EntryRepr>>),
}

pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn from_repr(repr: MatrixRepr) -> Result<CMat, String> {
    match repr {
        MatrixRepr::Scalar(e) => Ok(CMat::from_element(1, 1, e.into())),
        MatrixRepr::Rows(rows) => {
            let nr = rows.len();
            let nc = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != nc) {
                return Err("ragged matrix rows".into());
            }
            let flat: Vec<C64> = rows.into_iter().flatten().map(Into::into).collect();
            Ok(CMat::from_row_iterator(nr, nc, flat))
        }
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        from_repr(MatrixRepr::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Vec::<MatrixRepr>::deserialize(d)?
            .into_iter()
            .map(|r| from_repr(r).map_err(D::Error::custom))
            .collect()
    }
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(EntryRepr::deserialize(d)?.into())
    }
}

pub mod vector {
    use super::*;
    use crate::linalg::CVec;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let v = Vec::<EntryRepr>::deserialize(d)?;
        Ok(CVec::from_iterator(v.len(), v.into_iter().map(Into::into)))
    }
}
