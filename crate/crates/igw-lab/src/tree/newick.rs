use super::{canonical, MetricTree, TreeError};

/// Newick text with empty labels and canonical sibling order.
///
/// A planted tree with one edge of length 2 is `(:2);`, the empty tree is `;`.
pub fn to_newick(t: &MetricTree) -> String {
    let n = t.node_count();
    let codes = canonical::codes(t.shape());
    let mut text: Vec<String> = vec![String::new(); n];
    for v in (0..n).rev() {
        let mut kids: Vec<usize> = t.children(v).collect();
        kids.sort_by(|&a, &b| {
            (codes[a].len(), &codes[a], &text[a]).cmp(&(codes[b].len(), &codes[b], &text[b]))
        });
        let mut s = String::new();
        if !kids.is_empty() {
            s.push('(');
            for (i, &c) in kids.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&text[c]);
            }
            s.push(')');
        }
        if v != 0 {
            s.push(':');
            s.push_str(&format_len(t.len(v)));
        }
        text[v] = s;
        for c in kids {
            text[c] = String::new();
        }
    }
    let mut out = std::mem::take(&mut text[0]);
    out.push(';');
    out
}

/// Shortest decimal that parses back to the same float.
pub(crate) fn format_len(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    children: Vec<Vec<usize>>,
    lengths: Vec<Option<f64>>,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TreeError> {
        Err(TreeError::Newick { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn new_child(&mut self, parent: usize) -> usize {
        let id = self.children.len();
        self.children.push(Vec::new());
        self.lengths.push(None);
        self.children[parent].push(id);
        id
    }

    /// Optional label, then optional `:length`.
    fn suffix(&mut self, v: usize) -> Result<(), TreeError> {
        self.skip_ws();
        while let Some(&b) = self.s.get(self.pos) {
            if b"(),:;".contains(&b) || b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while let Some(&b) = self.s.get(self.pos) {
                if b.is_ascii_digit() || b"+-.eE".contains(&b) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
            match txt.parse::<f64>() {
                Ok(x) => self.lengths[v] = Some(x),
                Err(_) => {
                    self.pos = start;
                    return self.err("expected a branch length");
                }
            }
        }
        Ok(())
    }
}

/// Parses Newick with branch lengths. Labels are accepted and ignored.
pub fn from_newick(text: &str) -> Result<MetricTree, TreeError> {
    let mut p = Parser { s: text.as_bytes(), pos: 0, children: vec![Vec::new()], lengths: vec![None] };
    let mut stack: Vec<usize> = Vec::new();
    let mut cur = 0usize;
    'node: loop {
        while p.peek() == Some(b'(') {
            p.pos += 1;
            stack.push(cur);
            cur = p.new_child(cur);
        }
        p.suffix(cur)?;
        loop {
            match p.peek() {
                Some(b',') => {
                    p.pos += 1;
                    let Some(&top) = stack.last() else { return p.err("',' outside parentheses") };
                    cur = p.new_child(top);
                    continue 'node;
                }
                Some(b')') => {
                    p.pos += 1;
                    let Some(top) = stack.pop() else { return p.err("unbalanced ')'") };
                    cur = top;
                    p.suffix(cur)?;
                }
                Some(b';') if stack.is_empty() => {
                    p.pos += 1;
                    break 'node;
                }
                Some(b';') => return p.err("unclosed '('"),
                Some(_) => return p.err("unexpected character"),
                None => return p.err("missing ';'"),
            }
        }
    }
    if p.peek().is_some() {
        return p.err("trailing input after ';'");
    }
    if matches!(p.lengths[0], Some(x) if x != 0.0) {
        return Err(TreeError::Newick { pos: 0, msg: "root cannot carry a branch length".into() });
    }
    let mut lengths = Vec::with_capacity(p.lengths.len());
    for (v, len) in p.lengths.iter().enumerate() {
        match (v, len) {
            (0, _) => lengths.push(0.0),
            (_, Some(x)) if *x > 0.0 && x.is_finite() => lengths.push(*x),
            (_, Some(x)) => return Err(TreeError::InvalidLength { edge: v, len: *x }),
            (_, None) => {
                return Err(TreeError::Newick { pos: p.pos, msg: format!("node {v} has no branch length") })
            }
        }
    }
    Ok(MetricTree::from_children(&p.children, &lengths, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::CombinatorialTree;

    #[test]
    fn format_examples() {
        let single = MetricTree::new(CombinatorialTree::from_bfs_counts(&[1]), vec![0.0, 2.0]).unwrap();
        assert_eq!(to_newick(&single), "(:2);");
        assert_eq!(to_newick(&MetricTree::empty()), ";");
        let t = from_newick("((:1,:3):1);").unwrap();
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.len(1), 1.0);
        let mut leaves: Vec<f64> = t.children(1).map(|c| t.len(c)).collect();
        leaves.sort_by(f64::total_cmp);
        assert_eq!(leaves, vec![1.0, 3.0]);
        assert_eq!(to_newick(&t), "((:1,:3):1);");
        assert!(from_newick(";").unwrap().is_empty());
    }

    #[test]
    fn labels_and_whitespace() {
        let t = from_newick(" ( (a:1 , b:3e0 ) x : 1 ) root ;").unwrap();
        assert_eq!(t.total_length(), 5.0);
    }

    #[test]
    fn parse_errors_carry_positions() {
        for bad in ["((:1,:3):1", "(:1));", "(:-1);", "(:x);", "((:1,:2));", "(:1):2;", "(:1); x"] {
            assert!(from_newick(bad).is_err(), "{bad}");
        }
        match from_newick("(:1)x:q;") {
            Err(TreeError::Newick { pos, .. }) => assert_eq!(pos, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn float_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-7, 2.5e17, 123456.789] {
            assert_eq!(format_len(x).parse::<f64>().unwrap(), x);
        }
    }
}
