use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use treeharm_core::harmonic::HarmonicDocument;
use treeharm_core::rational::{self, Q};
use treeharm_core::tree::load_tree;
use treeharm_core::{HarmonicFunction, Tree, ValueSpace, Weights};

use crate::{SpaceArgs, TreeArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Scalar,
    Product,
    WeightedProduct,
}

impl SpaceArgs {
    pub fn value_space(&self) -> Result<ValueSpace> {
        Ok(match self.space {
            SpaceKind::Scalar if self.dim == 1 => ValueSpace::Scalar,
            SpaceKind::Scalar => bail!("--space scalar takes --dim 1, got {}", self.dim),
            SpaceKind::Product => ValueSpace::product(self.dim)?,
            SpaceKind::WeightedProduct => ValueSpace::weighted_product(self.dim)?,
        })
    }
}

/// Where the tree of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSource {
    File { path: String },
    Homogeneous { branching: usize, depth: usize, weights: Option<Vec<String>> },
}

/// Everything that determines the output of a run. Output paths are kept
/// out of the serialized form so that logs do not depend on them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub tree: TreeSource,
    pub space: ValueSpace,
    pub depth: usize,
    pub targets_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub log: Option<PathBuf>,
    pub verify: bool,
}

impl RunConfig {
    pub fn new(tree: &TreeArgs, space: ValueSpace, depth: usize, targets_seed: u64) -> Result<Self> {
        let source = match &tree.tree {
            Some(p) => TreeSource::File { path: p.display().to_string() },
            None => TreeSource::Homogeneous {
                branching: tree.branching,
                depth,
                weights: tree.weights.as_deref().map(|w| w.split(',').map(|s| s.trim().to_string()).collect()),
            },
        };
        Ok(RunConfig { tree: source, space, depth, targets_seed, horizon: None, out: None, log: None, verify: true })
    }
}

pub fn parse_fractions(list: &str) -> Result<Vec<Q>> {
    list.split(',')
        .map(|s| rational::parse(s.trim()).with_context(|| format!("bad fraction {s:?}")))
        .collect()
}

pub fn parse_indices(list: &str) -> Result<Vec<u64>> {
    list.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad index {s:?}")))
        .collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn weights(args: &TreeArgs) -> Result<Weights> {
    Ok(match &args.weights {
        Some(w) => Weights::Explicit(parse_fractions(w)?),
        None => Weights::Uniform,
    })
}

/// The tree of a run that needs at least `depth` levels.
pub fn load_tree_args(args: &TreeArgs, depth: usize) -> Result<Tree> {
    match &args.tree {
        Some(path) => {
            let tree = load_tree(&read_text(path)?).with_context(|| format!("loading {}", path.display()))?;
            if tree.depth() < depth {
                bail!("{} has depth {}, the run needs {depth}", path.display(), tree.depth());
            }
            Ok(tree)
        }
        None => Ok(Tree::homogeneous(args.branching, depth, weights(args)?)?),
    }
}

/// A function file together with the tree it lives on.
pub fn load_function(args: &TreeArgs, path: &Path) -> Result<(Tree, HarmonicFunction)> {
    let text = read_text(path)?;
    let doc: HarmonicDocument = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let depth = match (doc.depth, &doc.values) {
        (Some(d), _) => d,
        (None, _) => bail!("{} does not state its depth", path.display()),
    };
    let tree = load_tree_args(args, depth)?;
    let f = HarmonicFunction::from_document(&tree, &doc).with_context(|| format!("reading function {}", path.display()))?;
    Ok((tree, f))
}
