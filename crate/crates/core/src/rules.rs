//! Tree-to-rule conversion: one IF-THEN rule per leaf.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Dataset, Label};
use crate::ensemble::EnsembleModel;
use crate::error::{Result, UpmError};
use crate::learners::{argmax, FeatureKind, FeatureMatrix, Node, SplitKind, TreeModel};
use crate::preprocess::Transform;

/// Path condition on one attribute, collapsed to its tightest form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// `lower < x <= upper`; either bound may be absent.
    Range {
        attribute: usize,
        name: String,
        lower: Option<f64>,
        upper: Option<f64>,
    },
    CategoryIs {
        attribute: usize,
        name: String,
        category: u32,
        label: String,
    },
    CategoryNotIn {
        attribute: usize,
        name: String,
        categories: Vec<u32>,
        labels: Vec<String>,
    },
}

impl Condition {
    pub fn attribute(&self) -> usize {
        match self {
            Condition::Range { attribute, .. }
            | Condition::CategoryIs { attribute, .. }
            | Condition::CategoryNotIn { attribute, .. } => *attribute,
        }
    }

    pub fn matches(&self, x: &[f64]) -> bool {
        match self {
            Condition::Range {
                attribute,
                lower,
                upper,
                ..
            } => {
                let v = x[*attribute];
                lower.is_none_or(|l| v > l) && upper.is_none_or(|u| v <= u)
            }
            Condition::CategoryIs {
                attribute, category, ..
            } => x[*attribute] as u32 == *category,
            Condition::CategoryNotIn {
                attribute,
                categories,
                ..
            } => !categories.contains(&(x[*attribute] as u32)),
        }
    }

    fn render(&self) -> String {
        match self {
            Condition::Range {
                name, lower, upper, ..
            } => match (lower.map(bound), upper.map(bound)) {
                (Some(l), Some(u)) => format!("{l} < {name} <= {u}"),
                (None, Some(u)) => format!("{name} <= {u}"),
                (Some(l), None) => format!("{name} > {l}"),
                (None, None) => "TRUE".to_string(),
            },
            Condition::CategoryIs { name, label, .. } => format!("{name} = {label}"),
            Condition::CategoryNotIn { name, labels, .. } => {
                if labels.len() == 1 {
                    format!("{name} != {}", labels[0])
                } else {
                    format!("{name} NOT IN {{{}}}", labels.join(", "))
                }
            }
        }
    }
}

/// Bound rounded to ten significant digits for display.
fn bound(v: f64) -> f64 {
    format!("{v:.9e}").parse().unwrap_or(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: Label,
    /// Training instances matching the conditions.
    pub coverage: usize,
    /// Matching instances whose label is `class`.
    pub correct: usize,
    pub confidence: f64,
    /// Node index of the leaf in the source tree.
    pub leaf: usize,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.matches(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub source: String,
    pub n_train: usize,
    pub rules: Vec<Rule>,
}

impl RuleSet {
    /// Rules whose conditions hold for `x`; a well-formed set yields exactly one.
    pub fn matching(&self, x: &[f64]) -> Vec<usize> {
        (0..self.rules.len())
            .filter(|&r| self.rules[r].matches(x))
            .collect()
    }

    pub fn classify(&self, x: &[f64]) -> Option<Label> {
        self.rules.iter().find(|r| r.matches(x)).map(|r| r.class)
    }

    /// Copy with numeric bounds mapped back to raw units through the
    /// min-max parameters of `t` (which must have produced the tree's schema).
    pub fn in_raw_units(&self, t: &Transform) -> RuleSet {
        let mut out = self.clone();
        for rule in &mut out.rules {
            for c in &mut rule.conditions {
                if let Condition::Range {
                    attribute,
                    lower,
                    upper,
                    ..
                } = c
                {
                    if let Some(Some(mm)) = t.scale.get(*attribute) {
                        *lower = lower.map(|v| mm.unscale(v));
                        *upper = upper.map(|v| mm.unscale(v));
                    }
                }
            }
        }
        out
    }
}

fn push_condition(conds: &mut Vec<Condition>, new: Condition) {
    let a = new.attribute();
    let Some(pos) = conds.iter().position(|c| c.attribute() == a) else {
        conds.push(new);
        return;
    };
    let merged = match (&conds[pos], new) {
        (
            Condition::Range { lower, upper, .. },
            Condition::Range {
                attribute,
                name,
                lower: l2,
                upper: u2,
            },
        ) => Condition::Range {
            attribute,
            name,
            lower: match (lower, l2) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            upper: match (upper, u2) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        },
        (_, is @ Condition::CategoryIs { .. }) => is,
        (is @ Condition::CategoryIs { .. }, _) => is.clone(),
        (
            Condition::CategoryNotIn {
                categories, labels, ..
            },
            Condition::CategoryNotIn {
                attribute,
                name,
                categories: c2,
                labels: l2,
            },
        ) => {
            let mut pairs: Vec<(u32, String)> = categories
                .iter()
                .copied()
                .zip(labels.iter().cloned())
                .chain(c2.into_iter().zip(l2))
                .collect();
            pairs.sort_by_key(|p| p.0);
            pairs.dedup_by_key(|p| p.0);
            let (categories, labels) = pairs.into_iter().unzip();
            Condition::CategoryNotIn {
                attribute,
                name,
                categories,
                labels,
            }
        }
        (_, other) => other,
    };
    conds[pos] = merged;
}

fn check_schema(t: &TreeModel, ds: &Dataset) -> Result<()> {
    let ok = t.features.len() == ds.n_attributes()
        && t.features.iter().zip(ds.attributes()).all(|(f, a)| {
            match (f, &a.kind) {
                (FeatureKind::Numeric, AttributeKind::Numeric) => true,
                (FeatureKind::Categorical { n_categories }, AttributeKind::Categorical { categories }) => {
                    *n_categories as usize == categories.len()
                }
                _ => false,
            }
        });
    if ok {
        Ok(())
    } else {
        Err(UpmError::SchemaMismatch(
            "tree was not trained on this dataset's schema".into(),
        ))
    }
}

/// One rule per leaf, scored on `ds_train` and ordered by correct matches
/// (confidence × coverage) descending, then fewer conditions, then preorder.
pub fn extract_rules(t: &TreeModel, ds_train: &Dataset) -> Result<RuleSet> {
    check_schema(t, ds_train)?;
    let m = FeatureMatrix::from_dataset(ds_train)?;
    let attrs = ds_train.attributes();
    let category = |j: usize, c: u32| match &attrs[j].kind {
        AttributeKind::Categorical { categories } => categories[c as usize].clone(),
        AttributeKind::Numeric => c.to_string(),
    };
    let mut rules = Vec::new();
    let mut stack: Vec<(usize, Vec<Condition>)> = vec![(0, Vec::new())];
    while let Some((i, conds)) = stack.pop() {
        match &t.nodes[i] {
            Node::Leaf { distribution, .. } => rules.push(Rule {
                conditions: conds,
                class: argmax(distribution),
                coverage: 0,
                correct: 0,
                confidence: 0.0,
                leaf: i,
            }),
            Node::Split {
                predicate,
                left,
                right,
                ..
            } => {
                let j = predicate.attribute;
                let name = attrs[j].name.clone();
                let (yes, no) = match &predicate.kind {
                    SplitKind::NumericLe { threshold } => (
                        Condition::Range {
                            attribute: j,
                            name: name.clone(),
                            lower: None,
                            upper: Some(*threshold),
                        },
                        Condition::Range {
                            attribute: j,
                            name,
                            lower: Some(*threshold),
                            upper: None,
                        },
                    ),
                    SplitKind::CategoricalIn { categories } if categories.len() == 1 => (
                        Condition::CategoryIs {
                            attribute: j,
                            name: name.clone(),
                            category: categories[0],
                            label: category(j, categories[0]),
                        },
                        Condition::CategoryNotIn {
                            attribute: j,
                            name,
                            categories: categories.clone(),
                            labels: vec![category(j, categories[0])],
                        },
                    ),
                    SplitKind::CategoricalIn { .. } => {
                        return Err(UpmError::InvalidArgument(
                            "multi-category splits are not produced by these learners".into(),
                        ))
                    }
                };
                let mut r = conds.clone();
                push_condition(&mut r, no);
                let mut l = conds;
                push_condition(&mut l, yes);
                // right pushed first so the left branch is visited first (preorder)
                stack.push((*right, r));
                stack.push((*left, l));
            }
        }
    }
    for i in 0..m.n_rows() {
        let leaf = t.leaf_index(m.row(i));
        let r = rules.iter_mut().find(|r| r.leaf == leaf).expect("every leaf has a rule");
        r.coverage += 1;
        if m.label(i) == r.class {
            r.correct += 1;
        }
    }
    for r in &mut rules {
        r.confidence = if r.coverage == 0 {
            0.0
        } else {
            r.correct as f64 / r.coverage as f64
        };
    }
    rules.sort_by(|a, b| {
        b.correct
            .cmp(&a.correct)
            .then(a.conditions.len().cmp(&b.conditions.len()))
            .then(a.leaf.cmp(&b.leaf))
    });
    Ok(RuleSet {
        source: format!("{:?}", t.meta.algorithm).to_lowercase(),
        n_train: m.n_rows(),
        rules,
    })
}

/// Which trees of a trained ensemble to turn into rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSource {
    #[default]
    Cart,
    RandomTree,
    /// Every member of the random forest.
    Forest,
}

impl std::str::FromStr for RuleSource {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cart" => Ok(RuleSource::Cart),
            "random_tree" | "rtree" => Ok(RuleSource::RandomTree),
            "forest" | "random_forest" => Ok(RuleSource::Forest),
            other => Err(UpmError::Config(format!("unknown rule source {other:?}"))),
        }
    }
}

/// Rules from the chosen trees of `model`, scored on `ds_raw` after the
/// model's transform and reported in raw units.
pub fn model_rules(model: &EnsembleModel, ds_raw: &Dataset, source: RuleSource) -> Result<Vec<RuleSet>> {
    let data = model.transform.apply(ds_raw)?;
    let trees: Vec<&TreeModel> = match source {
        RuleSource::Cart => vec![&model.members.cart],
        RuleSource::RandomTree => vec![&model.members.random_tree],
        RuleSource::Forest => model.members.random_forest.trees.iter().collect(),
    };
    trees
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut rs = extract_rules(t, &data)?.in_raw_units(&model.transform);
            if source == RuleSource::Forest {
                rs.source = format!("forest[{i}]");
            }
            Ok(rs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleStyle {
    Text,
    Markdown,
    Csv,
}

impl std::str::FromStr for RuleStyle {
    type Err = UpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(RuleStyle::Text),
            "markdown" | "md" => Ok(RuleStyle::Markdown),
            "csv" => Ok(RuleStyle::Csv),
            other => Err(UpmError::Config(format!("unknown rule style {other:?}"))),
        }
    }
}

fn conditions_text(r: &Rule) -> String {
    if r.conditions.is_empty() {
        "TRUE".to_string()
    } else {
        r.conditions
            .iter()
            .map(Condition::render)
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn format_rules(rs: &RuleSet, style: RuleStyle) -> String {
    let mut out = String::new();
    match style {
        RuleStyle::Text => {
            for r in &rs.rules {
                let _ = writeln!(
                    out,
                    "IF {} THEN {}  [coverage={}, confidence={:.4}]",
                    conditions_text(r),
                    r.class,
                    r.coverage,
                    r.confidence
                );
            }
        }
        RuleStyle::Markdown => {
            let _ = writeln!(out, "# Rules ({}, {} training instances)\n", rs.source, rs.n_train);
            let _ = writeln!(out, "| # | Conditions | Class | Coverage | Confidence |");
            let _ = writeln!(out, "|---|---|---|---|---|");
            for (i, r) in rs.rules.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {:.4} |",
                    i + 1,
                    conditions_text(r).replace('|', "\\|"),
                    r.class,
                    r.coverage,
                    r.confidence
                );
            }
        }
        RuleStyle::Csv => {
            out.push_str("rule_id,conditions,class,coverage,confidence\n");
            for (i, r) in rs.rules.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    i + 1,
                    csv_field(&conditions_text(r)),
                    r.class,
                    r.coverage,
                    r.confidence
                );
            }
        }
    }
    out
}
