//! Serde adapters: matrices as `{ rows, cols, data }` with row-major data.

use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{Mat, Vector};

#[derive(Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from_mat(m: &Mat) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn into_mat<E: serde::de::Error>(self) -> Result<Mat, E> {
        if self.rows * self.cols != self.data.len() {
            return Err(E::custom(format!(
                "matrix {}x{} needs {} entries, got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.data.len()
            )));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
    Dense::from_mat(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
    Dense::deserialize(d)?.into_mat()
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        Ok(Vector::from_vec(data))
    }
}

pub mod vec_mat {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(Dense::from_mat)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
        Vec::<Dense>::deserialize(d)?
            .into_iter()
            .map(Dense::into_mat)
            .collect()
    }
}

pub mod vec_vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.as_slice())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Vector::from_vec)
            .collect())
    }
}

pub mod opt_mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(Dense::from_mat).serialize(s)
    }

    /// Accepts the same forms as [`flexible`](super::flexible).
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::flexible")] Mat);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Accepts either the `{rows, cols, data}` form or a nested row list, which is
/// friendlier in hand-written config files.
pub mod flexible {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Dense(Dense),
        Rows(Vec<Vec<f64>>),
        Scalar(f64),
    }

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        super::serialize(m, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        match Either::deserialize(d)? {
            Either::Dense(x) => x.into_mat(),
            Either::Scalar(x) => Ok(Mat::from_element(1, 1, x)),
            Either::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(D::Error::custom("ragged matrix rows"));
                }
                let data: Vec<f64> = rows.into_iter().flatten().collect();
                Ok(Mat::from_row_slice(r, c, &data))
            }
        }
    }
}
