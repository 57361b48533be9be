use std::fmt;
use std::sync::Arc;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Justification {
    /// Matched an extensional fact.
    Fact,
    /// Expanded with the named rule.
    Rule(Arc<str>),
    /// Shares the proof of an isomorphic atom elsewhere in the tree.
    Reuse(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProofNode {
    pub atom: String,
    pub parent: Option<usize>,
    pub justification: Justification,
    pub children: Vec<usize>,
}

/// A resolution proof: roots are the query atoms, leaves are facts or reuse links.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProofSchema {
    pub nodes: Vec<ProofNode>,
}

impl ProofSchema {
    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].parent.is_none())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ProofNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    fn write_node(&self, f: &mut fmt::Formatter<'_>, i: usize, indent: usize) -> fmt::Result {
        let n = &self.nodes[i];
        write!(f, "{:indent$}#{i} {}", "", n.atom)?;
        match &n.justification {
            Justification::Fact => writeln!(f, "  [fact]")?,
            Justification::Rule(r) => writeln!(f, "  [{r}]")?,
            Justification::Reuse(t) => writeln!(f, "  [same as #{t}]")?,
        }
        for &c in &n.children {
            self.write_node(f, c, indent + 2)?;
        }
        Ok(())
    }
}

impl fmt::Display for ProofSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.roots() {
            self.write_node(f, r, 0)?;
        }
        Ok(())
    }
}
