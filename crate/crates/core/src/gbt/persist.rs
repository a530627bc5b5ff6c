//! Versioned JSON model format.
//!
//! ```json
//! {"format_version":1,"loss":"logistic","base_score":0.0,
//!  "feature_names":["a","b"],
//!  "trees":[{"nodes":[{"feature":0,"threshold":0.5,"default_left":true,"left":1,"right":2},
//!                     {"leaf":-0.1},{"leaf":0.2}]}]}
//! ```
//!
//! Floats are written in shortest round-trip form, so thresholds and leaf
//! weights survive a save/load cycle bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LossKind, Tree, TreeEnsemble, TreeNode};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeDoc {
    Split { feature: usize, threshold: f64, default_left: bool, left: usize, right: usize },
    Leaf { leaf: f64 },
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct EnsembleDoc {
    format_version: u32,
    loss: LossKind,
    base_score: f64,
    feature_names: Vec<String>,
    trees: Vec<TreeDoc>,
}

impl From<&TreeEnsemble> for EnsembleDoc {
    fn from(e: &TreeEnsemble) -> Self {
        let trees = e
            .trees
            .iter()
            .map(|t| TreeDoc {
                nodes: t
                    .nodes
                    .iter()
                    .map(|n| match *n {
                        TreeNode::Split { feature, threshold, default_left, left, right } => {
                            NodeDoc::Split { feature, threshold, default_left, left, right }
                        }
                        TreeNode::Leaf { weight } => NodeDoc::Leaf { leaf: weight },
                    })
                    .collect(),
            })
            .collect();
        EnsembleDoc {
            format_version: FORMAT_VERSION,
            loss: e.loss,
            base_score: e.base_score,
            feature_names: e.feature_names.clone(),
            trees,
        }
    }
}

impl TryFrom<EnsembleDoc> for TreeEnsemble {
    type Error = Error;

    fn try_from(doc: EnsembleDoc) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if !doc.base_score.is_finite() {
            return Err(Error::invalid("non-finite base_score"));
        }
        let n_features = doc.feature_names.len();
        let trees = doc
            .trees
            .into_iter()
            .map(|t| {
                let tree = Tree {
                    nodes: t
                        .nodes
                        .into_iter()
                        .map(|n| match n {
                            NodeDoc::Split { feature, threshold, default_left, left, right } => {
                                TreeNode::Split { feature, threshold, default_left, left, right }
                            }
                            NodeDoc::Leaf { leaf } => TreeNode::Leaf { weight: leaf },
                        })
                        .collect(),
                };
                tree.validate(n_features).map(|_| tree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeEnsemble { base_score: doc.base_score, trees, loss: doc.loss, feature_names: doc.feature_names })
    }
}

impl Serialize for TreeEnsemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnsembleDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TreeEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = EnsembleDoc::deserialize(d)?;
        TreeEnsemble::try_from(doc).map_err(serde::de::Error::custom)
    }
}

pub fn to_json(e: &TreeEnsemble) -> Result<String> {
    Ok(serde_json::to_string(e)?)
}

pub fn from_json(s: &str) -> Result<TreeEnsemble> {
    let doc: EnsembleDoc = serde_json::from_str(s)?;
    TreeEnsemble::try_from(doc)
}

pub fn save(e: &TreeEnsemble, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(e)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TreeEnsemble> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TreeEnsemble {
        TreeEnsemble {
            base_score: 0.1 + 0.2,
            loss: LossKind::Logistic,
            feature_names: vec!["a".into(), "b".into()],
            trees: vec![Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 1,
                        threshold: 1.0 / 3.0,
                        default_left: false,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf { weight: -0.12345678901234568 },
                    TreeNode::Leaf { weight: 5e-324 },
                ],
            }],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let e = sample();
        let json = to_json(&e).unwrap();
        let back = from_json(&json).unwrap();
        assert_eq!(e, back);
        assert_eq!(to_json(&back).unwrap(), json);
        assert!(json.contains("\"format_version\":1"));
        assert!(json.contains("{\"leaf\":"));
    }

    #[test]
    fn rejects_bad_documents() {
        let json = to_json(&sample()).unwrap();
        assert!(from_json(&json.replace("\"format_version\":1", "\"format_version\":9")).is_err());
        assert!(from_json(&json.replace("\"feature\":1", "\"feature\":7")).is_err());
        assert!(from_json(&json.replace("\"right\":2", "\"right\":0")).is_err());
        assert!(from_json("{}").is_err());
    }
}
