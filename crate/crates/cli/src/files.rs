//! JSON problem and solution files.

use serde::{Deserialize, Serialize};

use rpi_core::synthesis::{Direction, SynthesisConfig, VariableBounds};
use rpi_core::{Gains, Mat, Polytope, Problem};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub plant: PlantSection,
    pub constraints: ConstraintSection,
    pub disturbances: DisturbanceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSection>,
}

/// One matrix shared by every vertex, or one per vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixOrList {
    One(Rows),
    Many(Vec<Rows>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(rename = "A")]
    pub a: MatrixOrList,
    #[serde(rename = "B")]
    pub b: MatrixOrList,
    #[serde(rename = "Bp")]
    pub bp: MatrixOrList,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "Deta")]
    pub deta: Rows,
}

/// `{z : H z ≤ h}`; `h` defaults to all ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HRep {
    #[serde(rename = "H")]
    pub h_mat: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    #[serde(rename = "X")]
    pub x: HRep,
    #[serde(rename = "U")]
    pub u: HRep,
    #[serde(rename = "Udelta", default, skip_serializing_if = "Option::is_none")]
    pub udelta: Option<HRep>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    #[serde(rename = "P")]
    pub p: HRep,
    #[serde(rename = "N")]
    pub n: HRep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionEntry {
    pub psi: Vec<f64>,
    #[serde(default)]
    pub free_input: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub l_r: usize,
    pub theta: f64,
    #[serde(default)]
    pub directions: Vec<DirectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    #[serde(rename = "K")]
    pub k: Vec<Rows>,
    #[serde(rename = "Kbar")]
    pub kbar: Vec<Rows>,
    #[serde(rename = "Khat")]
    pub khat: Vec<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationSummary {
    pub certified: bool,
    pub tol: f64,
    pub lambda_star: f64,
    pub max_residual: f64,
    #[serde(default)]
    pub violated: Option<String>,
    #[serde(default)]
    pub k_tilde: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub tool_version: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub gains: GainsSection,
    #[serde(rename = "L")]
    pub l: Rows,
    pub rho: Vec<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    pub eps1: f64,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub psis: Vec<Vec<f64>>,
    #[serde(default)]
    pub objective: Option<f64>,
    #[serde(default)]
    pub certification: Option<CertificationSummary>,
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: at {pointer:?}: {message}")]
    Parse { path: String, pointer: String, message: String },
}

/// JSON pointer of a deserialization error location.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &str) -> Result<T, FileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| FileError::Parse {
        path: path.to_string(),
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn load<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, FileError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Read { path: p.clone(), source })?;
    parse_json(&text, &p)
}

fn matrix(rows: &Rows, what: &str) -> Result<Mat, String> {
    Mat::from_rows(rows).map_err(|e| format!("{what}: {e}"))
}

fn polytope(m: &MatrixOrList, n_v: usize, what: &str) -> Result<Polytope, String> {
    match m {
        MatrixOrList::One(r) => Ok(Polytope::constant(matrix(r, what)?, n_v)),
        MatrixOrList::Many(list) => {
            let v = list.iter().map(|r| matrix(r, what)).collect::<Result<Vec<_>, _>>()?;
            if v.len() == 1 && n_v > 1 {
                return Ok(Polytope::constant(v[0].clone(), n_v));
            }
            Polytope::new(v).map_err(|e| format!("{what}: {e}"))
        }
    }
}

fn vertex_count(m: &MatrixOrList) -> usize {
    match m {
        MatrixOrList::One(_) => 1,
        MatrixOrList::Many(l) => l.len(),
    }
}

/// Rows scaled so that the bound vector becomes all ones.
fn unit_rows(h: &HRep, what: &str) -> Result<Mat, String> {
    let m = matrix(&h.h_mat, what)?;
    let Some(b) = &h.h else { return Ok(m) };
    if b.len() != m.rows() {
        return Err(format!("{what}: {} bounds for {} rows", b.len(), m.rows()));
    }
    if let Some(v) = b.iter().find(|v| !(**v > 0.0)) {
        return Err(format!("{what}: bound {v} is not positive (the origin must be interior)"));
    }
    Ok(Mat::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)] / b[r]))
}

impl ProblemFile {
    pub fn to_problem(&self) -> Result<Problem, String> {
        let pl = &self.plant;
        let n_v = [&pl.a, &pl.b, &pl.bp].iter().map(|m| vertex_count(m)).max().unwrap_or(1);
        Ok(Problem {
            a: polytope(&pl.a, n_v, "plant.A")?,
            b: polytope(&pl.b, n_v, "plant.B")?,
            bp: polytope(&pl.bp, n_v, "plant.Bp")?,
            c: matrix(&pl.c, "plant.C")?,
            deta: matrix(&pl.deta, "plant.Deta")?,
            x: unit_rows(&self.constraints.x, "constraints.X")?,
            u: unit_rows(&self.constraints.u, "constraints.U")?,
            udelta: self.constraints.udelta.as_ref().map(|h| unit_rows(h, "constraints.Udelta")).transpose()?,
            p: unit_rows(&self.disturbances.p, "disturbances.P")?,
            n: unit_rows(&self.disturbances.n, "disturbances.N")?,
        })
    }

    pub fn synthesis_config(&self) -> Result<SynthesisConfig<f64>, String> {
        let s = self.synthesis.as_ref().ok_or("the problem file has no synthesis section")?;
        let dirs = s.directions.iter().map(|d| Direction { psi: d.psi.clone(), free_input: d.free_input }).collect();
        let mut cfg = SynthesisConfig::new(s.l_r, s.theta, dirs);
        if let Some(b) = &s.bounds {
            let d = VariableBounds::default();
            cfg.bounds = VariableBounds {
                l: b.l.unwrap_or(d.l),
                gains: b.gains.unwrap_or(d.gains),
                multiplier_max: b.multiplier_max.unwrap_or(d.multiplier_max),
                gamma_max: b.gamma_max.unwrap_or(d.gamma_max),
                lambda_max: b.lambda_max.unwrap_or(d.lambda_max),
            };
        }
        if let Some(v) = s.starts {
            cfg.starts = v;
        }
        if let Some(v) = s.sweeps {
            cfg.sweeps = v;
        }
        if let Some(v) = s.seed {
            cfg.seed = v;
        }
        if let Some(v) = s.eps1 {
            cfg.eps1 = v;
        }
        Ok(cfg)
    }
}

impl SolutionFile {
    pub fn gains(&self) -> Result<Gains, String> {
        let conv = |v: &Vec<Rows>, what: &str| v.iter().map(|r| matrix(r, what)).collect::<Result<Vec<_>, _>>();
        Gains::new(conv(&self.gains.k, "gains.K")?, conv(&self.gains.kbar, "gains.Kbar")?, conv(&self.gains.khat, "gains.Khat")?)
            .map_err(|e| format!("gains: {e}"))
    }

    pub fn l(&self) -> Result<Mat, String> {
        matrix(&self.l, "L")
    }

    pub fn gains_section(g: &Gains) -> GainsSection {
        GainsSection {
            k: g.k.iter().map(Mat::to_rows).collect(),
            kbar: g.kbar.iter().map(Mat::to_rows).collect(),
            khat: g.khat.iter().map(Mat::to_rows).collect(),
        }
    }
}
