//! Dense matrices as JSON arrays of rows.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;

pub fn serialize<T, S>(m: &DMatrix<T>, s: S) -> Result<S::Ok, S::Error>
where
    T: Real + Serialize,
    S: Serializer,
{
    let rows: Vec<Vec<T>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

pub fn deserialize<'de, T, D>(d: D) -> Result<DMatrix<T>, D::Error>
where
    T: Real + Deserialize<'de>,
    D: Deserializer<'de>,
{
    let rows: Vec<Vec<T>> = Vec::deserialize(d)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(D::Error::custom("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
