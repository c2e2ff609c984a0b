//! Discrete-memoryless ISAC problem instances: alphabets, the
//! action-conditioned state kernel, the state-dependent channel with a
//! feedback output, and a per-symbol distortion table. Instances load
//! from and save to a JSON document (see `schema/model.json`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{Factor, FiniteDist, FiniteKernel, JointDist, ProbError, DIST_MASS_TOL};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("model failed validation:\n{0}")]
    Invalid(ValidationReport),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Alphabet sizes of an ISAC instance. A degenerate alphabet has size 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "S_e")]
    pub s_e: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "S_d")]
    pub s_d: usize,
    #[serde(rename = "Y")]
    pub y: usize,
    #[serde(rename = "Z")]
    pub z: usize,
    #[serde(rename = "S_hat")]
    pub s_hat: usize,
}

/// A validated discrete-memoryless ISAC instance.
///
/// `state_kernel` holds P(s_e, s, s_d | a) with output dimensions ordered
/// (s_e, s, s_d); `channel_kernel` holds P(y, z | x, s) with conditioning
/// (x, s) and output (y, z). `distortion[s][s_hat]` is non-negative; the
/// uniform bound D_max is computed from the table.
#[derive(Debug, Clone, PartialEq)]
pub struct IsacModel {
    pub alphabets: Alphabets,
    pub state_kernel: FiniteKernel,
    pub channel_kernel: FiniteKernel,
    pub distortion: Vec<Vec<f64>>,
}

/// The optimization variable: an action distribution plus the two
/// conditional kernels that generate the auxiliary codeword and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub u_size: usize,
    pub p_a: FiniteDist,
    /// P(u | a, s_e): conditioning (a, s_e), output u.
    pub p_u_given_a_se: FiniteKernel,
    /// P(x | u, s_e): conditioning (u, s_e), output x.
    pub p_x_given_u_se: FiniteKernel,
}

/// One violated invariant, with an index path into the offending table.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Everything validation found; empty means the instance is well-formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw file form and its validation
// ---------------------------------------------------------------------------

/// On-disk form: kernels as nested arrays `state_kernel[a][s_e][s][s_d]`
/// and `channel_kernel[x][s][y][z]`, distortion as `[s][s_hat]`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    alphabets: Alphabets,
    state_kernel: Vec<Vec<Vec<Vec<f64>>>>,
    channel_kernel: Vec<Vec<Vec<Vec<f64>>>>,
    distortion: Vec<Vec<f64>>,
}

impl ModelFile {
    fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Lists every violated invariant instead of stopping at the first.
    fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let al = &self.alphabets;
        for (name, size) in [
            ("A", al.a),
            ("X", al.x),
            ("S_e", al.s_e),
            ("S", al.s),
            ("S_d", al.s_d),
            ("Y", al.y),
            ("Z", al.z),
            ("S_hat", al.s_hat),
        ] {
            if size == 0 {
                report.push(format!("alphabets.{name}"), "alphabet size must be at least 1");
            }
        }
        check_table4(
            &mut report,
            "state_kernel",
            &self.state_kernel,
            [al.a, al.s_e, al.s, al.s_d],
            1, // row per leading a-index
        );
        check_table4(
            &mut report,
            "channel_kernel",
            &self.channel_kernel,
            [al.x, al.s, al.y, al.z],
            2, // row per leading (x, s) pair
        );
        if self.distortion.len() != al.s {
            report.push(
                "distortion",
                format!("expected {} rows, found {}", al.s, self.distortion.len()),
            );
        }
        for (s, row) in self.distortion.iter().enumerate() {
            if row.len() != al.s_hat {
                report.push(
                    format!("distortion[{s}]"),
                    format!("expected {} entries, found {}", al.s_hat, row.len()),
                );
            }
            for (s_hat, &d) in row.iter().enumerate() {
                if !(d >= 0.0) || !d.is_finite() {
                    report.push(
                        format!("distortion[{s}][{s_hat}]"),
                        format!("distortion must be finite and non-negative, found {d}"),
                    );
                }
            }
        }
        report
    }
}

/// Shape- and stochasticity-checks one nested 4-level table. `cond_depth`
/// is how many leading levels form the conditioning tuple; each
/// conditioning slice must sum to 1 within the distribution tolerance.
fn check_table4(
    report: &mut ValidationReport,
    name: &str,
    table: &[Vec<Vec<Vec<f64>>>],
    dims: [usize; 4],
    cond_depth: usize,
) {
    if table.len() != dims[0] {
        report.push(name, format!("expected {} entries, found {}", dims[0], table.len()));
        return;
    }
    for (i, t1) in table.iter().enumerate() {
        if t1.len() != dims[1] {
            report.push(
                format!("{name}[{i}]"),
                format!("expected {} entries, found {}", dims[1], t1.len()),
            );
            continue;
        }
        let mut row_sum_i = 0.0;
        for (j, t2) in t1.iter().enumerate() {
            if t2.len() != dims[2] {
                report.push(
                    format!("{name}[{i}][{j}]"),
                    format!("expected {} entries, found {}", dims[2], t2.len()),
                );
                continue;
            }
            let mut row_sum_ij = 0.0;
            for (k, t3) in t2.iter().enumerate() {
                if t3.len() != dims[3] {
                    report.push(
                        format!("{name}[{i}][{j}][{k}]"),
                        format!("expected {} entries, found {}", dims[3], t3.len()),
                    );
                    continue;
                }
                for (l, &p) in t3.iter().enumerate() {
                    if !(p >= 0.0) || !p.is_finite() {
                        report.push(
                            format!("{name}[{i}][{j}][{k}][{l}]"),
                            format!("negative or non-finite probability {p}"),
                        );
                    }
                    row_sum_ij += p;
                }
            }
            if cond_depth == 2 {
                if (row_sum_ij - 1.0).abs() > DIST_MASS_TOL {
                    report.push(
                        format!("{name}[{i}][{j}]"),
                        format!("row sums to {row_sum_ij}, expected 1"),
                    );
                }
            } else {
                row_sum_i += row_sum_ij;
            }
        }
        if cond_depth == 1 && (row_sum_i - 1.0).abs() > DIST_MASS_TOL {
            report.push(
                format!("{name}[{i}]"),
                format!("row sums to {row_sum_i}, expected 1"),
            );
        }
    }
}

/// Validates model JSON without constructing the model: the reporting op
/// behind the `validate` CLI subcommand.
pub fn validate_model_json(text: &str) -> Result<ValidationReport> {
    Ok(ModelFile::parse(text)?.validate())
}

fn flatten4(table: &[Vec<Vec<Vec<f64>>>]) -> Vec<f64> {
    table
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .copied()
        .collect()
}

fn nest4(flat: &[f64], dims: [usize; 4]) -> Vec<Vec<Vec<Vec<f64>>>> {
    let mut it = flat.iter().copied();
    (0..dims[0])
        .map(|_| {
            (0..dims[1])
                .map(|_| {
                    (0..dims[2])
                        .map(|_| (0..dims[3]).map(|_| it.next().unwrap()).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

impl IsacModel {
    /// Builds and fully validates a model from in-memory tables.
    pub fn new(
        alphabets: Alphabets,
        state_kernel: FiniteKernel,
        channel_kernel: FiniteKernel,
        distortion: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let model = Self {
            alphabets,
            state_kernel,
            channel_kernel,
            distortion,
        };
        let report = model.validate();
        if report.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    /// Re-checks every invariant on an already-constructed model.
    pub fn validate(&self) -> ValidationReport {
        let al = &self.alphabets;
        let file = ModelFile {
            alphabets: al.clone(),
            state_kernel: {
                let flat: Vec<f64> = (0..self.state_kernel.n_rows())
                    .flat_map(|r| self.state_kernel.row(r).to_vec())
                    .collect();
                nest4(&flat, [al.a, al.s_e, al.s, al.s_d])
            },
            channel_kernel: {
                let flat: Vec<f64> = (0..self.channel_kernel.n_rows())
                    .flat_map(|r| self.channel_kernel.row(r).to_vec())
                    .collect();
                nest4(&flat, [al.x, al.s, al.y, al.z])
            },
            distortion: self.distortion.clone(),
        };
        let mut report = file.validate();
        if self.state_kernel.cond_sizes() != [al.a]
            || self.state_kernel.out_sizes() != [al.s_e, al.s, al.s_d]
        {
            report.push("state_kernel", "kernel shape does not match alphabets");
        }
        if self.channel_kernel.cond_sizes() != [al.x, al.s]
            || self.channel_kernel.out_sizes() != [al.y, al.z]
        {
            report.push("channel_kernel", "kernel shape does not match alphabets");
        }
        report
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file = ModelFile::parse(text)?;
        let report = file.validate();
        if !report.is_empty() {
            return Err(ModelError::Invalid(report));
        }
        let al = file.alphabets.clone();
        let state_kernel = FiniteKernel::new(
            vec![al.a],
            vec![al.s_e, al.s, al.s_d],
            flatten4(&file.state_kernel),
        )?;
        let channel_kernel = FiniteKernel::new(
            vec![al.x, al.s],
            vec![al.y, al.z],
            flatten4(&file.channel_kernel),
        )?;
        Ok(Self {
            alphabets: al,
            state_kernel,
            channel_kernel,
            distortion: file.distortion,
        })
    }

    pub fn to_json(&self) -> String {
        let al = &self.alphabets;
        let file = ModelFile {
            alphabets: al.clone(),
            state_kernel: {
                let flat: Vec<f64> = (0..self.state_kernel.n_rows())
                    .flat_map(|r| self.state_kernel.row(r).to_vec())
                    .collect();
                nest4(&flat, [al.a, al.s_e, al.s, al.s_d])
            },
            channel_kernel: {
                let flat: Vec<f64> = (0..self.channel_kernel.n_rows())
                    .flat_map(|r| self.channel_kernel.row(r).to_vec())
                    .collect();
                nest4(&flat, [al.x, al.s, al.y, al.z])
            },
            distortion: self.distortion.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Largest distortion value; the uniform per-symbol bound.
    pub fn d_max(&self) -> f64 {
        self.distortion
            .iter()
            .flatten()
            .fold(0.0f64, |m, &d| m.max(d))
    }

    pub fn distortion_at(&self, s: usize, s_hat: usize) -> f64 {
        self.distortion[s][s_hat]
    }

    /// P(s_e, s | a): the state kernel with the decoder CSI summed out.
    pub fn state_se_s(&self) -> FiniteKernel {
        self.state_kernel.marginal_out(&[0, 1])
    }

    /// P(s_e | a).
    pub fn state_se(&self) -> FiniteKernel {
        self.state_kernel.marginal_out(&[0])
    }

    /// P(z | x, s): the channel with the decoder output summed out.
    pub fn channel_z(&self) -> FiniteKernel {
        self.channel_kernel.marginal_out(&[1])
    }

    /// P(y | x, s).
    pub fn channel_y(&self) -> FiniteKernel {
        self.channel_kernel.marginal_out(&[0])
    }

    /// Checks a policy's dimensions against this model.
    pub fn check_policy(&self, policy: &Policy) -> Result<()> {
        let al = &self.alphabets;
        if policy.p_a.len() != al.a {
            return Err(ProbError::DimensionMismatch(format!(
                "policy p_a has {} entries, |A| = {}",
                policy.p_a.len(),
                al.a
            ))
            .into());
        }
        if policy.p_u_given_a_se.cond_sizes() != [al.a, al.s_e]
            || policy.p_u_given_a_se.out_sizes() != [policy.u_size]
        {
            return Err(ProbError::DimensionMismatch(
                "policy p_u_given_a_se shape does not match (|A|, |S_e|) -> |U|".into(),
            )
            .into());
        }
        if policy.p_x_given_u_se.cond_sizes() != [policy.u_size, al.s_e]
            || policy.p_x_given_u_se.out_sizes() != [al.x]
        {
            return Err(ProbError::DimensionMismatch(
                "policy p_x_given_u_se shape does not match (|U|, |S_e|) -> |X|".into(),
            )
            .into());
        }
        Ok(())
    }

    /// The single-letter joint over (a, u, s_e, s, s_d, x, y, z) induced by
    /// a policy through the factorization
    /// P(a) P(s_e,s,s_d|a) P(u|a,s_e) P(x|u,s_e) P(y,z|x,s).
    pub fn assemble_joint(&self, policy: &Policy) -> Result<JointDist> {
        self.check_policy(policy)?;
        let al = &self.alphabets;
        let k_a = FiniteKernel::from_dist(&policy.p_a);
        let joint = JointDist::from_factors(&[
            Factor::new(&k_a, &[], &[("a", al.a)]),
            Factor::new(
                &self.state_kernel,
                &["a"],
                &[("s_e", al.s_e), ("s", al.s), ("s_d", al.s_d)],
            ),
            Factor::new(&policy.p_u_given_a_se, &["a", "s_e"], &[("u", policy.u_size)]),
            Factor::new(&policy.p_x_given_u_se, &["u", "s_e"], &[("x", al.x)]),
            Factor::new(&self.channel_kernel, &["x", "s"], &[("y", al.y), ("z", al.z)]),
        ])?;
        Ok(joint
            .marginal(&["a", "u", "s_e", "s", "s_d", "x", "y", "z"])
            .expect("assembled joint exposes all eight axes"))
    }
}

// ---------------------------------------------------------------------------
// Policy JSON (companion format used by the CLI)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    u_size: usize,
    p_a: Vec<f64>,
    /// indexed [a][s_e][u]
    p_u_given_a_se: Vec<Vec<Vec<f64>>>,
    /// indexed [u][s_e][x]
    p_x_given_u_se: Vec<Vec<Vec<f64>>>,
}

fn flatten3(table: &[Vec<Vec<f64>>], path: &str, dims: [usize; 3]) -> Result<Vec<f64>> {
    if table.len() != dims[0] {
        return Err(ModelError::Schema {
            path: path.into(),
            message: format!("expected {} outer entries, found {}", dims[0], table.len()),
        });
    }
    let mut out = Vec::with_capacity(dims.iter().product());
    for (i, t1) in table.iter().enumerate() {
        if t1.len() != dims[1] {
            return Err(ModelError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("expected {} entries, found {}", dims[1], t1.len()),
            });
        }
        for (j, t2) in t1.iter().enumerate() {
            if t2.len() != dims[2] {
                return Err(ModelError::Schema {
                    path: format!("{path}[{i}][{j}]"),
                    message: format!("expected {} entries, found {}", dims[2], t2.len()),
                });
            }
            out.extend_from_slice(t2);
        }
    }
    Ok(out)
}

impl Policy {
    pub fn uniform(model: &IsacModel, u_size: usize) -> Self {
        let al = &model.alphabets;
        Self {
            u_size,
            p_a: FiniteDist::uniform(al.a),
            p_u_given_a_se: FiniteKernel::from_fn(vec![al.a, al.s_e], vec![u_size], |_, _| {
                1.0 / u_size as f64
            })
            .expect("uniform kernel is stochastic"),
            p_x_given_u_se: FiniteKernel::from_fn(vec![u_size, al.s_e], vec![al.x], |_, _| {
                1.0 / al.x as f64
            })
            .expect("uniform kernel is stochastic"),
        }
    }

    pub fn from_json(text: &str, model: &IsacModel) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let al = &model.alphabets;
        let pu = flatten3(&file.p_u_given_a_se, "p_u_given_a_se", [al.a, al.s_e, file.u_size])?;
        let px = flatten3(&file.p_x_given_u_se, "p_x_given_u_se", [file.u_size, al.s_e, al.x])?;
        let policy = Policy {
            u_size: file.u_size,
            p_a: FiniteDist::new(file.p_a)?,
            p_u_given_a_se: FiniteKernel::new(vec![al.a, al.s_e], vec![file.u_size], pu)?,
            p_x_given_u_se: FiniteKernel::new(vec![file.u_size, al.s_e], vec![al.x], px)?,
        };
        model.check_policy(&policy)?;
        Ok(policy)
    }

    pub fn to_json(&self, model: &IsacModel) -> String {
        let al = &model.alphabets;
        let pu = (0..al.a)
            .map(|a| {
                (0..al.s_e)
                    .map(|se| self.p_u_given_a_se.row(a * al.s_e + se).to_vec())
                    .collect()
            })
            .collect();
        let px = (0..self.u_size)
            .map(|u| {
                (0..al.s_e)
                    .map(|se| self.p_x_given_u_se.row(u * al.s_e + se).to_vec())
                    .collect()
            })
            .collect();
        let file = PolicyFile {
            u_size: self.u_size,
            p_a: self.p_a.as_slice().to_vec(),
            p_u_given_a_se: pu,
            p_x_given_u_se: px,
        };
        serde_json::to_string_pretty(&file).expect("policy serializes")
    }

    pub fn load(path: impl AsRef<Path>, model: &IsacModel) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, model)
    }
}

#[cfg(test)]
pub(crate) mod test_models {
    use super::*;

    /// Binary model: S ~ Bern(q_a) tilted by the action, S_e = S through a
    /// BSC(se_noise), Z = S through a BSC(z_noise), Y = X xor S through a
    /// BSC(y_noise), Hamming distortion, |S_d| = 1.
    pub fn binary_model(q: [f64; 2], se_noise: f64, y_noise: f64, z_noise: f64) -> IsacModel {
        let alphabets = Alphabets {
            a: 2,
            x: 2,
            s_e: 2,
            s: 2,
            s_d: 1,
            y: 2,
            z: 2,
            s_hat: 2,
        };
        let state = FiniteKernel::from_fn(vec![2], vec![2, 2, 1], |c, o| {
            let (a, se, s) = (c[0], o[0], o[1]);
            let ps = if s == 1 { q[a] } else { 1.0 - q[a] };
            let pse = if se == s { 1.0 - se_noise } else { se_noise };
            ps * pse
        })
        .unwrap();
        let channel = FiniteKernel::from_fn(vec![2, 2], vec![2, 2], |c, o| {
            let (x, s, y, z) = (c[0], c[1], o[0], o[1]);
            let clean = x ^ s;
            let py = if y == clean { 1.0 - y_noise } else { y_noise };
            let pz = if z == s { 1.0 - z_noise } else { z_noise };
            py * pz
        })
        .unwrap();
        let distortion = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        IsacModel::new(alphabets, state, channel, distortion).unwrap()
    }

    /// A state-free BSC(p): all state alphabets degenerate, binary X -> Y.
    /// The action alphabet stays binary so deterministic policies can still
    /// randomize the input through P(a).
    pub fn state_free_bsc(p: f64) -> IsacModel {
        let alphabets = Alphabets {
            a: 2,
            x: 2,
            s_e: 1,
            s: 1,
            s_d: 1,
            y: 2,
            z: 1,
            s_hat: 1,
        };
        let state = FiniteKernel::from_fn(vec![2], vec![1, 1, 1], |_, _| 1.0).unwrap();
        let channel = FiniteKernel::from_fn(vec![2, 1], vec![2, 1], |c, o| {
            if o[0] == c[0] {
                1.0 - p
            } else {
                p
            }
        })
        .unwrap();
        IsacModel::new(alphabets, state, channel, vec![vec![0.0]]).unwrap()
    }

    /// The policy shipped with the binary demo: x = u xor s_e with u tilted
    /// toward s_e, uniform action.
    pub fn gp_policy(tilt: f64) -> Policy {
        let pu = FiniteKernel::from_fn(vec![2, 2], vec![2], |c, o| {
            if o[0] == c[1] {
                tilt
            } else {
                1.0 - tilt
            }
        })
        .unwrap();
        let px = FiniteKernel::from_fn(vec![2, 2], vec![2], |c, o| {
            if o[0] == c[0] ^ c[1] {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        Policy {
            u_size: 2,
            p_a: FiniteDist::new(vec![0.5, 0.5]).unwrap(),
            p_u_given_a_se: pu,
            p_x_given_u_se: px,
        }
    }
}
