//! JSON encodings shared by the library and the command line.
//!
//! Matrices: `{"dim": d, "re": [[..]], "im": [[..]]}` (`im` optional on input;
//! rectangular matrices use `"rows"`/`"cols"` instead of `"dim"`). Tuples are
//! arrays of matrices. Models: `{"head": tuple|null, "body": tuple,
//! "level": n}`. Simplices: `{"vertices": [[..], ..]}`.

use serde::{Deserialize, Serialize};

use crate::choi::ChoiMatrix;
use crate::error::{RangeError, Result};
use crate::essential::BlockRepetitionModel;
use crate::herm::{cplx, hermitian_defect, CMat, HermMatrix, HermTuple, Isometry, NormTestTuple};
use crate::membership::{MembershipVerdict, Status};
use crate::simplex::Simplex;
use crate::witness::Witness;

/// Largest accepted `|A - A*|` for matrices that must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

pub fn encode_matrix(m: &CMat) -> MatrixJson {
    let grid = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    let square = m.nrows() == m.ncols();
    MatrixJson {
        dim: square.then_some(m.nrows()),
        rows: (!square).then_some(m.nrows()),
        cols: (!square).then_some(m.ncols()),
        re: grid(|z| z.re),
        im: Some(grid(|z| z.im)),
    }
}

pub fn decode_matrix(m: &MatrixJson, field: &str) -> Result<CMat> {
    let rows = m.re.len();
    let cols = m.re.first().map_or(0, |r| r.len());
    for (i, r) in m.re.iter().enumerate() {
        if r.len() != cols {
            return Err(RangeError::dim(format!("{field}.re[{i}]"), cols, r.len()));
        }
    }
    if let Some(d) = m.dim {
        if rows != d {
            return Err(RangeError::dim(format!("{field}.dim"), d, rows));
        }
        if cols != d {
            return Err(RangeError::dim(format!("{field}.re[0]"), d, cols));
        }
    }
    if let Some(r) = m.rows {
        if rows != r {
            return Err(RangeError::dim(format!("{field}.rows"), r, rows));
        }
    }
    if let Some(c) = m.cols {
        if cols != c {
            return Err(RangeError::dim(format!("{field}.cols"), c, cols));
        }
    }
    let mut out = CMat::from_fn(rows, cols, |i, j| cplx(m.re[i][j], 0.0));
    if let Some(im) = &m.im {
        if im.len() != rows {
            return Err(RangeError::dim(format!("{field}.im"), rows, im.len()));
        }
        for (i, r) in im.iter().enumerate() {
            if r.len() != cols {
                return Err(RangeError::dim(format!("{field}.im[{i}]"), cols, r.len()));
            }
            for (j, v) in r.iter().enumerate() {
                out[(i, j)].im = *v;
            }
        }
    }
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(RangeError::Malformed {
            field: field.into(),
            reason: "non-finite entry".into(),
        });
    }
    Ok(out)
}

pub fn decode_hermitian(m: &MatrixJson, field: &str) -> Result<HermMatrix> {
    let mat = decode_matrix(m, field)?;
    if mat.nrows() != mat.ncols() {
        return Err(RangeError::dim(
            format!("{field}.cols"),
            mat.nrows(),
            mat.ncols(),
        ));
    }
    if mat.nrows() == 0 {
        return Err(RangeError::Malformed {
            field: field.into(),
            reason: "empty matrix".into(),
        });
    }
    let defect = hermitian_defect(&mat);
    if defect > HERMITIAN_TOL {
        return Err(RangeError::NotHermitian {
            field: field.into(),
            defect,
        });
    }
    HermMatrix::new(mat)
}

pub type TupleJson = Vec<MatrixJson>;

pub fn encode_tuple(t: &HermTuple) -> TupleJson {
    t.iter().map(|m| encode_matrix(m.as_mat())).collect()
}

pub fn decode_tuple(t: &[MatrixJson], field: &str) -> Result<HermTuple> {
    if t.is_empty() {
        return Err(RangeError::Malformed {
            field: field.into(),
            reason: "empty tuple".into(),
        });
    }
    let mats: Vec<HermMatrix> = t
        .iter()
        .enumerate()
        .map(|(j, m)| decode_hermitian(m, &format!("{field}[{j}]")))
        .collect::<Result<_>>()?;
    let d = mats[0].dim();
    for (j, m) in mats.iter().enumerate() {
        if m.dim() != d {
            return Err(RangeError::dim(format!("{field}[{j}].dim"), d, m.dim()));
        }
    }
    HermTuple::new(mats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    #[serde(default)]
    pub head: Option<TupleJson>,
    pub body: TupleJson,
    pub level: usize,
}

pub fn encode_model(m: &BlockRepetitionModel) -> ModelJson {
    ModelJson {
        head: m.head().map(encode_tuple),
        body: encode_tuple(m.body()),
        level: m.level(),
    }
}

pub fn decode_model(m: &ModelJson, field: &str) -> Result<BlockRepetitionModel> {
    let body = decode_tuple(&m.body, &format!("{field}.body"))?;
    let head = match &m.head {
        Some(h) => {
            let h = decode_tuple(h, &format!("{field}.head"))?;
            if h.len() != body.len() {
                return Err(RangeError::dim(
                    format!("{field}.head"),
                    body.len(),
                    h.len(),
                ));
            }
            Some(h)
        }
        None => None,
    };
    BlockRepetitionModel::new(head, body, m.level)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexJson {
    pub vertices: Vec<Vec<f64>>,
}

pub fn decode_simplex(s: &SimplexJson) -> Result<Simplex> {
    let m = s.vertices.len().saturating_sub(1);
    for (k, v) in s.vertices.iter().enumerate() {
        if v.len() != m {
            return Err(RangeError::dim(format!("vertices[{k}]"), m, v.len()));
        }
    }
    Simplex::new(s.vertices.clone())
}

pub fn encode_simplex(s: &Simplex) -> SimplexJson {
    SimplexJson {
        vertices: s.vertices().to_vec(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiJson {
    pub d_in: usize,
    pub q_out: usize,
    pub matrix: MatrixJson,
}

pub fn encode_choi(c: &ChoiMatrix) -> ChoiJson {
    ChoiJson {
        d_in: c.d_in(),
        q_out: c.q_out(),
        matrix: encode_matrix(c.matrix().as_mat()),
    }
}

pub fn decode_choi(c: &ChoiJson, field: &str) -> Result<ChoiMatrix> {
    let j = decode_hermitian(&c.matrix, &format!("{field}.matrix"))?;
    ChoiMatrix::new(c.d_in, c.q_out, j)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub r: Vec<MatrixJson>,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn encode_witness(w: &Witness) -> WitnessJson {
    WitnessJson {
        r: w.r.mats().iter().map(encode_matrix).collect(),
        lhs: w.lhs,
        rhs: w.rhs,
        gap: w.gap,
    }
}

pub fn decode_pencil(r: &[MatrixJson], field: &str) -> Result<NormTestTuple> {
    let mats = r
        .iter()
        .enumerate()
        .map(|(j, m)| decode_matrix(m, &format!("{field}[{j}]")))
        .collect::<Result<Vec<_>>>()?;
    NormTestTuple::new(mats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictJson {
    pub status: Status,
    /// Final projection gap; `null` when no iteration ran.
    pub gap: Option<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ChoiJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
}

pub fn encode_verdict(v: &MembershipVerdict) -> VerdictJson {
    VerdictJson {
        status: v.status,
        gap: v.gap.is_finite().then_some(v.gap),
        iterations: v.iterations,
        certificate: v.certificate.as_ref().map(encode_choi),
        witness: v.witness.as_ref().map(encode_witness),
    }
}

pub fn encode_isometry(x: &Isometry) -> MatrixJson {
    encode_matrix(x.as_mat())
}
