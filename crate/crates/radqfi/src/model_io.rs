//! JSON model files: {"D": n, "H": [[...]], "jumps": [...], "dH": [[...]],
//! "dJumps": [...]} with complex entries written as [re, im] pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::linalg::Mat;

type ComplexEntry = [f64; 2];
type MatrixJson = Vec<Vec<ComplexEntry>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "H")]
    pub hamiltonian: MatrixJson,
    pub jumps: Vec<MatrixJson>,
    #[serde(rename = "dH")]
    pub d_hamiltonian: MatrixJson,
    #[serde(rename = "dJumps")]
    pub d_jumps: Vec<MatrixJson>,
}

fn to_matrix(m: &MatrixJson, dim: usize, name: &str) -> Result<Mat> {
    if m.len() != dim || m.iter().any(|row| row.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "{name} is not a {dim}x{dim} matrix"
        )));
    }
    Ok(Mat::from_shape_fn((dim, dim), |(i, j)| {
        num_complex::Complex64::new(m[i][j][0], m[i][j][1])
    }))
}

fn from_matrix(m: &Mat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

impl ModelFile {
    pub fn into_model(&self) -> Result<LindbladModel> {
        let h = to_matrix(&self.hamiltonian, self.dim, "H")?;
        let dh = to_matrix(&self.d_hamiltonian, self.dim, "dH")?;
        let jumps = self
            .jumps
            .iter()
            .enumerate()
            .map(|(k, m)| to_matrix(m, self.dim, &format!("jumps[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let d_jumps = self
            .d_jumps
            .iter()
            .enumerate()
            .map(|(k, m)| to_matrix(m, self.dim, &format!("dJumps[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        LindbladModel::new(h, jumps, dh, d_jumps)
    }

    pub fn from_model(model: &LindbladModel) -> Self {
        Self {
            dim: model.dim(),
            hamiltonian: from_matrix(model.hamiltonian()),
            jumps: model.jumps().iter().map(from_matrix).collect(),
            d_hamiltonian: from_matrix(model.d_hamiltonian()),
            d_jumps: model.d_jumps().iter().map(from_matrix).collect(),
        }
    }
}

pub fn load_model(path: &std::path::Path) -> Result<LindbladModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::DimensionMismatch(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::DimensionMismatch(format!("model parse error: {e}")))?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::dephasing_sensor_model;

    #[test]
    fn roundtrip() {
        let model = dephasing_sensor_model(0.7);
        let file = ModelFile::from_model(&model);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        let model2 = back.into_model().unwrap();
        assert_eq!(model.hamiltonian(), model2.hamiltonian());
        assert_eq!(model.jumps(), model2.jumps());
        assert_eq!(model.d_hamiltonian(), model2.d_hamiltonian());
        assert_eq!(model.d_jumps(), model2.d_jumps());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        let bad: std::result::Result<ModelFile, _> =
            serde_json::from_str(r#"{"D": 2, "H": [], "jumps": [], "dH": [], "dJumps": [], "extra": 1}"#);
        assert!(bad.is_err());
        let short: ModelFile = serde_json::from_str(
            r#"{"D": 2, "H": [[[0,0]]], "jumps": [], "dH": [[[0,0]]], "dJumps": []}"#,
        )
        .unwrap();
        assert!(short.into_model().is_err());
    }
}
