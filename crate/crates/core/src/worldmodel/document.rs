use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LinearModel, MlpModel, Wall, WallWorld, WorldModel};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{DenseMatrix, Real};

/// Portable JSON form of any built-in model.
///
/// `parameters` is one flat row-major array:
/// - `linear`: `A`, then `B`, then `c`
/// - `wall`: `stiffness, step_scale`, then `p1x, p1y, p2x, p2y, thickness` per wall
/// - `mlp`: per layer, its weight matrix then its bias
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(rename = "type")]
    pub kind: String,
    pub dims: ModelDims,
    pub parameters: Vec<f64>,
    #[serde(default)]
    pub metadata: ModelMetadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub state: usize,
    pub action: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hidden: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub seed: Option<u64>,
    pub training_loss: Option<f64>,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Closed set of the built-in models.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel<T> {
    Linear(LinearModel<T>),
    Wall(WallWorld<T>),
    Mlp(MlpModel<T>),
}

impl<T: Real> AnyModel<T> {
    fn inner(&self) -> &dyn WorldModel<T> {
        match self {
            AnyModel::Linear(m) => m,
            AnyModel::Wall(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    pub fn to_document(&self, metadata: ModelMetadata) -> ModelDocument {
        let f = |xs: &[T]| xs.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        let (kind, hidden, parameters) = match self {
            AnyModel::Linear(m) => {
                let mut p = f(m.a().as_slice());
                p.extend(f(m.b().as_slice()));
                p.extend(f(m.offset()));
                ("linear", vec![], p)
            }
            AnyModel::Wall(m) => {
                let mut p = vec![m.stiffness().as_f64(), m.step_scale().as_f64()];
                for w in m.walls() {
                    p.extend(f(&[w.p1[0], w.p1[1], w.p2[0], w.p2[1], w.thickness]));
                }
                ("wall", vec![], p)
            }
            AnyModel::Mlp(m) => ("mlp", m.hidden().to_vec(), f(&m.to_flat())),
        };
        ModelDocument {
            kind: kind.to_string(),
            dims: ModelDims {
                state: self.state_dim(),
                action: self.action_dim(),
                hidden,
            },
            parameters,
            metadata,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let p: Vec<T> = doc.parameters.iter().map(|&x| T::lit(x)).collect();
        let (n, k) = (doc.dims.state, doc.dims.action);
        match doc.kind.as_str() {
            "linear" => {
                check_dim("linear parameters", n * n + n * k + n, p.len())?;
                let a = DenseMatrix::new(n, n, p[..n * n].to_vec())?;
                let b = DenseMatrix::new(n, k, p[n * n..n * n + n * k].to_vec())?;
                Ok(AnyModel::Linear(LinearModel::with_offset(a, b, p[n * n + n * k..].to_vec())?))
            }
            "wall" => {
                check_dim("wall state dim", 2, n)?;
                check_dim("wall action dim", 2, k)?;
                if p.len() < 2 || (p.len() - 2) % 5 != 0 {
                    return Err(Error::Config(format!(
                        "wall parameters must be 2 + 5 per wall, got {}",
                        p.len()
                    )));
                }
                let walls = p[2..]
                    .chunks(5)
                    .map(|c| Wall::new([c[0], c[1]], [c[2], c[3]], c[4]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyModel::Wall(WallWorld::new(walls, p[0], p[1])?))
            }
            "mlp" => Ok(AnyModel::Mlp(MlpModel::from_flat(n, k, &doc.dims.hidden, &p)?)),
            other => Err(Error::Config(format!("unknown model type {other:?}"))),
        }
    }
}

impl<T: Real> WorldModel<T> for AnyModel<T> {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }
    fn action_dim(&self) -> usize {
        self.inner().action_dim()
    }
    fn step(&self, s: &[T], a: &[T]) -> Vec<T> {
        self.inner().step(s, a)
    }
    fn pullback(&self, s: &[T], a: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
        self.inner().pullback(s, a, c)
    }
    fn pullback_action(&self, s: &[T], a: &[T], c: &[T]) -> Vec<T> {
        self.inner().pullback_action(s, a, c)
    }
}
