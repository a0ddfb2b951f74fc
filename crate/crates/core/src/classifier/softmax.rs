//! Output layers: a flat softmax over all labels, and the same distribution
//! factored along a Huffman tree built from label frequencies.
//!
//! The tree form evaluates each leaf probability as a product of binary
//! branch probabilities, `sigma(lse(right) - lse(left))`, where `lse` is the
//! log-sum-exp of the logits under a subtree. It is exact, so both modes
//! define the same distribution and differ only in how it is computed.

/// Log-sum-exp over the selected logits.
fn log_sum_exp(logits: &[f64], members: &[usize]) -> f64 {
    let max = members
        .iter()
        .map(|&i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + members.iter().map(|&i| (logits[i] - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Node {
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Binary Huffman coding tree over label indices.
#[derive(Clone, Debug, PartialEq)]
pub struct HuffmanTree {
    nodes: Vec<Node>,
    /// Per leaf, the internal nodes on its root path and whether the path goes right.
    paths: Vec<Vec<(usize, bool)>>,
}

impl HuffmanTree {
    /// Builds the tree by repeatedly merging the two lightest subtrees.
    /// Ties go to the lower label index, then to older subtrees.
    pub fn new(counts: &[u64]) -> Self {
        let n = counts.len();
        assert!(n >= 1, "tree needs at least one label");
        // (weight, creation order, leaves, internal-node index or None for leaf)
        let mut pool: Vec<(u64, usize, Vec<usize>, Option<usize>)> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i, vec![i], None))
            .collect();
        let mut nodes = Vec::with_capacity(n.saturating_sub(1));
        let mut children: Vec<(Option<usize>, Option<usize>)> = Vec::new();
        let mut order = n;
        while pool.len() > 1 {
            pool.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let first = pool.remove(0);
            let second = pool.remove(0);
            let mut leaves = first.2.clone();
            leaves.extend(&second.2);
            nodes.push(Node {
                left: first.2,
                right: second.2,
            });
            children.push((first.3, second.3));
            pool.push((first.0 + second.0, order, leaves, Some(nodes.len() - 1)));
            order += 1;
        }
        let mut paths = vec![Vec::new(); n];
        if !nodes.is_empty() {
            let root = nodes.len() - 1;
            let mut stack = vec![(root, Vec::new())];
            while let Some((node, prefix)) = stack.pop() {
                for (went_right, child) in [(false, children[node].0), (true, children[node].1)] {
                    let mut path: Vec<(usize, bool)> = prefix.clone();
                    path.push((node, went_right));
                    match child {
                        Some(inner) => stack.push((inner, path)),
                        None => {
                            let side = if went_right { &nodes[node].right } else { &nodes[node].left };
                            paths[side[0]] = path;
                        }
                    }
                }
            }
        }
        Self { nodes, paths }
    }

    pub fn depth(&self, label: usize) -> usize {
        self.paths[label].len()
    }

    /// `log P(label)` as a sum of log branch probabilities.
    pub fn log_prob(&self, logits: &[f64], label: usize) -> f64 {
        self.paths[label]
            .iter()
            .map(|&(node, right)| {
                let delta = self.branch_margin(logits, node);
                log_sigmoid(if right { delta } else { -delta })
            })
            .sum()
    }

    pub fn probabilities(&self, logits: &[f64]) -> Vec<f64> {
        (0..self.paths.len())
            .map(|label| self.log_prob(logits, label).exp())
            .collect()
    }

    /// Gradient of `log P(label)` with respect to every logit.
    pub fn log_prob_gradient(&self, logits: &[f64], label: usize) -> Vec<f64> {
        let mut grad = vec![0.0; logits.len()];
        for &(node, right) in &self.paths[label] {
            let sign = if right { 1.0 } else { -1.0 };
            let delta = self.branch_margin(logits, node);
            let weight = sign * (1.0 - sigmoid(sign * delta));
            let Node { left, right: rhs } = &self.nodes[node];
            for (members, direction) in [(rhs, 1.0), (left, -1.0)] {
                let lse = log_sum_exp(logits, members);
                for &i in members {
                    grad[i] += weight * direction * (logits[i] - lse).exp();
                }
            }
        }
        grad
    }

    fn branch_margin(&self, logits: &[f64], node: usize) -> f64 {
        let Node { left, right } = &self.nodes[node];
        log_sum_exp(logits, right) - log_sum_exp(logits, left)
    }
}
