use super::CombinatorialTree;

/// AHU codes for every vertex: `(` + children's codes + `)`, siblings ordered
/// by (subtree size, code). Code length is twice the vertex count, so sorting
/// by length first is the same as sorting by edge count.
pub(crate) fn codes(t: &CombinatorialTree) -> Vec<Vec<u8>> {
    let n = t.node_count();
    let mut codes: Vec<Vec<u8>> = vec![Vec::new(); n];
    for v in (0..n).rev() {
        let mut kids: Vec<usize> = t.children(v).collect();
        kids.sort_by(|&a, &b| (codes[a].len(), &codes[a]).cmp(&(codes[b].len(), &codes[b])));
        codes[v] = join(kids.iter().map(|&c| codes[c].as_slice()));
    }
    codes
}

/// Root code only; child codes are released as soon as they are consumed.
pub(crate) fn root_code(t: &CombinatorialTree) -> Vec<u8> {
    let n = t.node_count();
    let mut codes: Vec<Vec<u8>> = vec![Vec::new(); n];
    for v in (0..n).rev() {
        let mut kids: Vec<Vec<u8>> = t.children(v).map(|c| std::mem::take(&mut codes[c])).collect();
        kids.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        codes[v] = join(kids.iter().map(Vec::as_slice));
    }
    codes.swap_remove(0)
}

fn join<'a>(kids: impl Iterator<Item = &'a [u8]> + Clone) -> Vec<u8> {
    let mut code = Vec::with_capacity(2 + kids.clone().map(<[u8]>::len).sum::<usize>());
    code.push(b'(');
    for k in kids {
        code.extend_from_slice(k);
    }
    code.push(b')');
    code
}
