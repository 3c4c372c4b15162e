use serde::{Deserialize, Serialize};

use super::{MetricTree, TreeError};

#[derive(Serialize, Deserialize)]
struct Node {
    len: f64,
    #[serde(default)]
    children: Vec<Node>,
}

/// `{"len": 0, "children": [...]}` with the root carrying length 0.
///
/// Nesting is limited by serde_json's recursion limit, so this format suits
/// small and medium trees; Newick handles arbitrary depth.
pub fn to_json(t: &MetricTree) -> String {
    let n = t.node_count();
    let mut nodes: Vec<Option<Node>> = (0..n).map(|_| None).collect();
    for v in (0..n).rev() {
        let children = t.children(v).map(|c| nodes[c].take().expect("child built")).collect();
        nodes[v] = Some(Node { len: t.len(v), children });
    }
    serde_json::to_string(&nodes[0].take().expect("root built")).expect("serializable")
}

pub fn from_json(text: &str) -> Result<MetricTree, TreeError> {
    let root: Node = serde_json::from_str(text).map_err(|e| TreeError::Json(e.to_string()))?;
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut lengths = Vec::new();
    let mut stack = vec![(root, usize::MAX)];
    while let Some((node, parent)) = stack.pop() {
        let id = children.len();
        if parent != usize::MAX {
            if !(node.len > 0.0 && node.len.is_finite()) {
                return Err(TreeError::InvalidLength { edge: id, len: node.len });
            }
            children[parent].push(id);
        }
        children.push(Vec::new());
        lengths.push(if parent == usize::MAX { 0.0 } else { node.len });
        for c in node.children.into_iter().rev() {
            stack.push((c, id));
        }
    }
    Ok(MetricTree::from_children(&children, &lengths, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::from_newick;

    #[test]
    fn round_trip() {
        let t = from_newick("((:1,(:0.5,:0.25):3):1);").unwrap();
        let j = to_json(&t);
        assert!(j.starts_with("{\"len\":0.0"));
        let back = from_json(&j).unwrap();
        assert_eq!(back, t);
        assert!(from_json("{\"len\":0,\"children\":[{\"len\":-1}]}").is_err());
        assert!(from_json("{\"len\":0}").unwrap().is_empty());
    }
}
