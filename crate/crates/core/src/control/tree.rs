use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::traffic::Label;

use super::{expand_range_to_prefixes, ControlError};

/// Tree node as stored in JSON: either `{"leaf": 0|1}` or
/// `{"feature": i, "threshold": t, "left": .., "right": ..}`.
/// Inputs with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: u32, left: Box<Node>, right: Box<Node> },
    Leaf { #[serde(with = "label_num")] leaf: Label },
}

mod label_num {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::traffic::Label;

    pub fn serialize<S: Serializer>(l: &Label, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(l.as_u8())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Label, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| D::Error::custom(format!("leaf label must be 0 or 1, got {v}")))
    }
}

/// Decision tree over `n_features` features quantized to `width` bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    #[serde(default = "default_width")]
    pub width: u32,
    pub root: Node,
}

fn default_width() -> u32 {
    8
}

impl DecisionTree {
    pub fn new(n_features: usize, width: u32, root: Node) -> Result<Self, ControlError> {
        let t = DecisionTree { n_features, width, root };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), ControlError> {
        if self.n_features == 0 {
            return Err(ControlError::Argument("tree needs at least one feature".into()));
        }
        if !(1..=16).contains(&self.width) {
            return Err(ControlError::Argument(format!("width {} outside 1..=16", self.width)));
        }
        let top = (1u32 << self.width) - 1;
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if let Node::Split { feature, threshold, left, right } = n {
                if *feature >= self.n_features {
                    return Err(ControlError::Argument(format!("feature {feature} out of range")));
                }
                if *threshold > top {
                    return Err(ControlError::Argument(format!("threshold {threshold} exceeds {top}")));
                }
                stack.push(right);
                stack.push(left);
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, ControlError> {
        let t: DecisionTree = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, ControlError> {
        let s = std::fs::read_to_string(path).map_err(|source| ControlError::Io { path: path.to_owned(), source })?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Direct evaluation by walking the tree.
    pub fn eval(&self, x: &[u32]) -> Label {
        let mut n = &self.root;
        loop {
            match n {
                Node::Leaf { leaf } => return *leaf,
                Node::Split { feature, threshold, left, right } => {
                    n = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// One leaf as a rule: inclusive range per feature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub ranges: Vec<(u32, u32)>,
    pub priority: u32,
    pub label: Label,
}

/// Rule after range-to-prefix expansion: an input matches when, for every
/// feature, one of that feature's prefixes matches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpmRule {
    pub prefixes: Vec<Vec<(u32, u32)>>,
    pub priority: u32,
    pub label: Label,
}

/// Rules in descending priority (leaf preorder); the first match wins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledTableProgram {
    pub n_features: usize,
    pub width: u32,
    pub rules: Vec<Rule>,
}

pub fn tree_compile(t: &DecisionTree) -> Result<CompiledTableProgram, ControlError> {
    t.validate()?;
    let top = (1u32 << t.width) - 1;
    let mut leaves = Vec::new();
    // explicit stack: (node, ranges so far); right pushed first to keep preorder
    let mut stack = vec![(&t.root, vec![(0u32, top); t.n_features])];
    while let Some((n, ranges)) = stack.pop() {
        match n {
            Node::Leaf { leaf } => leaves.push((ranges, *leaf)),
            Node::Split { feature, threshold, left, right } => {
                let (lo, hi) = ranges[*feature];
                let empty = |side: &str| {
                    ControlError::Compile(format!(
                        "{side} branch of f{feature} <= {threshold} is unreachable within [{lo}, {hi}]"
                    ))
                };
                if *threshold < lo {
                    return Err(empty("left"));
                }
                if *threshold >= hi {
                    return Err(empty("right"));
                }
                let mut l = ranges.clone();
                l[*feature].1 = *threshold;
                let mut r = ranges;
                r[*feature].0 = threshold + 1;
                stack.push((right, r));
                stack.push((left, l));
            }
        }
    }
    let n = leaves.len() as u32;
    Ok(CompiledTableProgram {
        n_features: t.n_features,
        width: t.width,
        rules: leaves
            .into_iter()
            .enumerate()
            .map(|(i, (ranges, label))| Rule { ranges, priority: n - 1 - i as u32, label })
            .collect(),
    })
}

impl CompiledTableProgram {
    fn check_input(&self, x: &[u32]) -> Result<(), ControlError> {
        if x.len() != self.n_features {
            return Err(ControlError::Argument(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        if let Some(v) = x.iter().find(|v| **v >> self.width != 0) {
            return Err(ControlError::Argument(format!("value {v} exceeds {} bits", self.width)));
        }
        Ok(())
    }

    pub fn classify(&self, x: &[u32]) -> Result<Label, ControlError> {
        self.check_input(x)?;
        self.rules
            .iter()
            .find(|r| r.ranges.iter().zip(x).all(|((lo, hi), v)| (lo..=hi).contains(&v)))
            .map(|r| r.label)
            .ok_or_else(|| ControlError::NoMatch(x.to_vec()))
    }

    pub fn lpm_form(&self) -> Vec<LpmRule> {
        self.rules
            .iter()
            .map(|r| LpmRule {
                prefixes: r
                    .ranges
                    .iter()
                    .map(|&(lo, hi)| {
                        expand_range_to_prefixes(lo as u64, hi as u64, self.width)
                            .expect("compiled ranges are valid")
                            .into_iter()
                            .map(|(p, l)| (p as u32, l))
                            .collect()
                    })
                    .collect(),
                priority: r.priority,
                label: r.label,
            })
            .collect()
    }

    pub fn classify_lpm(&self, lpm: &[LpmRule], x: &[u32]) -> Result<Label, ControlError> {
        self.check_input(x)?;
        let w = self.width;
        let hit = |p: u32, len: u32, v: u32| len == 0 || (p >> (w - len)) == (v >> (w - len));
        lpm.iter()
            .find(|r| r.prefixes.iter().zip(x).all(|(ps, &v)| ps.iter().any(|&(p, l)| hit(p, l, v))))
            .map(|r| r.label)
            .ok_or_else(|| ControlError::NoMatch(x.to_vec()))
    }

    /// Text form, one rule per line, highest priority first.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            write!(s, "priority={}", r.priority).unwrap();
            for (i, (lo, hi)) in r.ranges.iter().enumerate() {
                write!(s, " f{i}=[{lo},{hi}]").unwrap();
            }
            writeln!(s, " -> {}", r.label).unwrap();
        }
        s
    }
}

pub fn table_classify(p: &CompiledTableProgram, x: &[u32]) -> Result<Label, ControlError> {
    p.classify(x)
}

/// Majority vote over compiled trees; ties go to ddos.
pub fn forest_classify(forest: &[CompiledTableProgram], x: &[u32]) -> Result<Label, ControlError> {
    if forest.is_empty() {
        return Err(ControlError::Argument("empty forest".into()));
    }
    let mut ddos = 0;
    for p in forest {
        if p.classify(x)? == Label::Ddos {
            ddos += 1;
        }
    }
    Ok(if 2 * ddos >= forest.len() { Label::Ddos } else { Label::Benign })
}
