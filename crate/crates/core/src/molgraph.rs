//! Heavy-atom molecular graphs parsed from a SMILES subset.
//!
//! Accepted grammar: organic-subset atoms (`B C N O P S F Cl Br I`), aromatic
//! lowercase atoms (`b c n o p s`), bracket atoms
//! `[<isotope><element><chirality><Hcount><charge><:class>]`, bonds
//! `- = # :` plus directional `/ \` (read as single), branches, ring closures
//! `1`-`9` and `%nn`, and the component separator `.`.
//!
//! Implicit hydrogens never become nodes. Isotope, chirality, H-count and atom
//! class are parsed and dropped; formal charge is kept on the atom label.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Every element symbol accepted inside brackets.
const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const AROMATIC_ELEMENTS: &[&str] = &["B", "C", "N", "O", "P", "S"];

fn element_symbol(s: &str) -> Option<&'static str> {
    ELEMENTS.iter().copied().find(|e| *e == s)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomLabel {
    pub element: &'static str,
    pub aromatic: bool,
    pub formal_charge: i8,
}

impl AtomLabel {
    pub fn new(element: &str, aromatic: bool, formal_charge: i8) -> Option<Self> {
        let element = element_symbol(element)?;
        if aromatic && !AROMATIC_ELEMENTS.contains(&element) {
            return None;
        }
        Some(Self {
            element,
            aromatic,
            formal_charge,
        })
    }

    pub fn organic(element: &str) -> Self {
        Self::new(element, false, 0).expect("known element")
    }

    /// Injective text form: lowercase symbol for aromatic atoms, charge suffix
    /// when nonzero (`C`, `c`, `N+`, `O-`, `Fe+2`).
    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AtomLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.aromatic {
            f.write_str(&self.element.to_ascii_lowercase())?;
        } else {
            f.write_str(self.element)?;
        }
        match self.formal_charge {
            0 => Ok(()),
            1 => f.write_str("+"),
            -1 => f.write_str("-"),
            c if c > 0 => write!(f, "+{c}"),
            c => write!(f, "-{}", -(c as i16)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    /// Smaller endpoint.
    pub a: usize,
    /// Larger endpoint.
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    NoNodes,
    #[error("edge ({0}, {1}) references a missing node")]
    NodeOutOfRange(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
}

/// Undirected labeled graph of one molecule; nodes are heavy atoms in SMILES
/// appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    source_id: String,
    nodes: Vec<AtomLabel>,
    edges: Vec<Bond>,
    adjacency: Vec<Vec<usize>>,
}

impl MolecularGraph {
    pub fn new(
        source_id: impl Into<String>,
        nodes: Vec<AtomLabel>,
        edges: impl IntoIterator<Item = (usize, usize, BondOrder)>,
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::NoNodes);
        }
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut bonds = Vec::new();
        for (u, v, order) in edges {
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange(u, v));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if adjacency[u].contains(&v) {
                return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
            bonds.push(Bond {
                a: u.min(v),
                b: u.max(v),
                order,
            });
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            source_id: source_id.into(),
            nodes,
            edges: bonds,
            adjacency,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[AtomLabel] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Bond] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn bond_between(&self, u: usize, v: usize) -> Option<BondOrder> {
        let (a, b) = (u.min(v), u.max(v));
        self.edges
            .iter()
            .find(|e| e.a == a && e.b == b)
            .map(|e| e.order)
    }

    /// Sizes of the connected components, in order of their smallest node.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for &w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            sizes.push(size);
        }
        sizes
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    ///
    /// # Panics
    /// If `perm` is not a permutation of `0..node_count()`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        assert_eq!(perm.len(), n, "permutation length");
        let mut nodes: Vec<Option<AtomLabel>> = vec![None; n];
        for (old, &new) in perm.iter().enumerate() {
            assert!(nodes[new].is_none(), "not a permutation");
            nodes[new] = Some(self.nodes[old].clone());
        }
        let nodes = nodes.into_iter().map(Option::unwrap).collect();
        let edges = self.edges.iter().map(|e| (perm[e.a], perm[e.b], e.order));
        Self::new(self.source_id.clone(), nodes, edges).expect("permutation preserves validity")
    }
}

type RawBond = (usize, usize, BondOrder);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES")]
    EmptyInput,
    #[error("ring closure opened at position {pos} is never closed")]
    UnmatchedRingClosure { pos: usize },
    #[error("unbalanced branch at position {pos}")]
    UnbalancedBranch { pos: usize },
    #[error("unknown element at position {pos}")]
    UnknownElement { pos: usize },
    #[error("malformed bracket atom at position {pos}")]
    MalformedBracketAtom { pos: usize },
    #[error("misplaced bond symbol at position {pos}")]
    MisplacedBond { pos: usize },
    #[error("ring closure at position {pos} duplicates an existing bond or closes on itself")]
    InvalidRingBond { pos: usize },
    #[error("unexpected character at position {pos}")]
    UnexpectedCharacter { pos: usize },
}

impl SmilesError {
    pub fn position(&self) -> Option<usize> {
        match *self {
            SmilesError::EmptyInput => None,
            SmilesError::UnmatchedRingClosure { pos }
            | SmilesError::UnbalancedBranch { pos }
            | SmilesError::UnknownElement { pos }
            | SmilesError::MalformedBracketAtom { pos }
            | SmilesError::MisplacedBond { pos }
            | SmilesError::InvalidRingBond { pos }
            | SmilesError::UnexpectedCharacter { pos } => Some(pos),
        }
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondOrder>,
    pos: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    nodes: Vec<AtomLabel>,
    edges: Vec<(usize, usize, BondOrder)>,
    prev: Option<usize>,
    pending_bond: Option<(BondOrder, usize)>,
    branches: Vec<(Option<usize>, usize)>,
    rings: HashMap<u32, OpenRing>,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Self {
            s: s.as_bytes(),
            pos: 0,
            nodes: Vec::new(),
            edges: Vec::new(),
            prev: None,
            pending_bond: None,
            branches: Vec::new(),
            rings: HashMap::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.s.get(self.pos + offset).copied()
    }

    fn run(mut self) -> Result<(Vec<AtomLabel>, Vec<RawBond>), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() || self.pending_bond.is_some() {
                        return Err(SmilesError::UnbalancedBranch { pos: start });
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((anchor, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedBranch { pos: start });
                    };
                    if let Some((_, p)) = self.pending_bond {
                        return Err(SmilesError::MisplacedBond { pos: p });
                    }
                    self.prev = anchor;
                    self.pos += 1;
                }
                b'.' => {
                    if self.prev.is_none() {
                        return Err(SmilesError::UnexpectedCharacter { pos: start });
                    }
                    if let Some((_, p)) = self.pending_bond {
                        return Err(SmilesError::MisplacedBond { pos: p });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'/' | b'\\' | b'=' | b'#' | b':' => {
                    if self.prev.is_none() || self.pending_bond.is_some() {
                        return Err(SmilesError::MisplacedBond { pos: start });
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending_bond = Some((order, start));
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_bond(u32::from(c - b'0'), start)?;
                }
                b'%' => {
                    let (Some(d1), Some(d2)) = (self.peek_at(1), self.peek_at(2)) else {
                        return Err(SmilesError::UnexpectedCharacter { pos: start });
                    };
                    if !d1.is_ascii_digit() || !d2.is_ascii_digit() {
                        return Err(SmilesError::UnexpectedCharacter { pos: start });
                    }
                    self.pos += 3;
                    self.ring_bond(u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0'), start)?;
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                c if c.is_ascii_alphabetic() || c == b'*' => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
                _ => return Err(SmilesError::UnexpectedCharacter { pos: start }),
            }
        }
        if let Some((_, p)) = self.pending_bond {
            return Err(SmilesError::MisplacedBond { pos: p });
        }
        if let Some(&(_, p)) = self.branches.first() {
            return Err(SmilesError::UnbalancedBranch { pos: p });
        }
        if let Some(p) = self.rings.values().map(|r| r.pos).min() {
            return Err(SmilesError::UnmatchedRingClosure { pos: p });
        }
        if self.nodes.is_empty() {
            return Err(SmilesError::EmptyInput);
        }
        Ok((self.nodes, self.edges))
    }

    fn implicit_order(&self, u: usize, v: usize) -> BondOrder {
        if self.nodes[u].aromatic && self.nodes[v].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_atom(&mut self, atom: AtomLabel) {
        let idx = self.nodes.len();
        self.nodes.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending_bond.take() {
                Some((o, _)) => o,
                None => self.implicit_order(prev, idx),
            };
            self.edges.push((prev, idx, order));
        }
        self.pending_bond = None;
        self.prev = Some(idx);
    }

    fn ring_bond(&mut self, digit: u32, start: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return Err(SmilesError::UnexpectedCharacter { pos: start });
        };
        let bond = self.pending_bond.take().map(|(o, _)| o);
        match self.rings.remove(&digit) {
            None => {
                self.rings.insert(
                    digit,
                    OpenRing {
                        atom: current,
                        bond,
                        pos: start,
                    },
                );
            }
            Some(open) => {
                let order = match (open.bond, bond) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::MisplacedBond { pos: start })
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.implicit_order(open.atom, current),
                };
                let duplicate = open.atom == current
                    || self.edges.iter().any(|&(u, v, _)| {
                        (u == open.atom && v == current) || (v == open.atom && u == current)
                    });
                if duplicate {
                    return Err(SmilesError::InvalidRingBond { pos: start });
                }
                self.edges.push((open.atom, current, order));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<AtomLabel, SmilesError> {
        let start = self.pos;
        let c = self.peek().expect("caller checked");
        let next = self.peek_at(1);
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => {
                (organic_symbol(c), false, 1)
            }
            (b'b' | b'c' | b'n' | b'o' | b'p' | b's', _) => {
                (organic_symbol(c.to_ascii_uppercase()), true, 1)
            }
            _ => return Err(SmilesError::UnknownElement { pos: start }),
        };
        self.pos += len;
        Ok(AtomLabel::new(symbol, aromatic, 0).expect("organic subset"))
    }

    fn bracket_atom(&mut self) -> Result<AtomLabel, SmilesError> {
        let open = self.pos;
        let malformed = |pos| SmilesError::MalformedBracketAtom { pos };
        self.pos += 1;
        // isotope
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let elem_pos = self.pos;
        let (symbol, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                let two = self
                    .peek_at(1)
                    .filter(u8::is_ascii_lowercase)
                    .map(|l| [c, l])
                    .and_then(|b| element_symbol(std::str::from_utf8(&b).ok()?));
                match two {
                    Some(sym) => {
                        self.pos += 2;
                        (sym, false)
                    }
                    None => {
                        let sym = element_symbol(std::str::from_utf8(&[c]).unwrap_or(""))
                            .ok_or(SmilesError::UnknownElement { pos: elem_pos })?;
                        self.pos += 1;
                        (sym, false)
                    }
                }
            }
            Some(c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's')) => {
                self.pos += 1;
                (organic_symbol(c.to_ascii_uppercase()), true)
            }
            Some(c) if c.is_ascii_lowercase() || c == b'*' => {
                return Err(SmilesError::UnknownElement { pos: elem_pos })
            }
            _ => return Err(malformed(elem_pos)),
        };
        // chirality
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            }
        }
        // hydrogen count
        if self.peek() == Some(b'H') {
            self.pos += 1;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            let digits_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos > digits_start {
                let text = std::str::from_utf8(&self.s[digits_start..self.pos]).unwrap_or("");
                let mag: i32 = text.parse().map_err(|_| malformed(digits_start))?;
                charge = unit * mag;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        if charge.abs() > 15 {
            return Err(malformed(open));
        }
        // atom class
        if self.peek() == Some(b':') {
            self.pos += 1;
            let class_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == class_start {
                return Err(malformed(class_start));
            }
        }
        if self.peek() != Some(b']') {
            return Err(malformed(self.pos.min(self.s.len())));
        }
        self.pos += 1;
        AtomLabel::new(symbol, aromatic, charge as i8).ok_or(malformed(open))
    }
}

fn organic_symbol(c: u8) -> &'static str {
    match c {
        b'B' => "B",
        b'C' => "C",
        b'N' => "N",
        b'O' => "O",
        b'P' => "P",
        b'S' => "S",
        b'F' => "F",
        b'I' => "I",
        _ => unreachable!("not an organic-subset symbol"),
    }
}

/// Parses `smiles` into the heavy-atom graph of drug `drug_id`.
pub fn parse_smiles(drug_id: &str, smiles: &str) -> Result<MolecularGraph, SmilesError> {
    if smiles.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    if let Some(pos) = smiles.bytes().position(|b| !b.is_ascii()) {
        return Err(SmilesError::UnexpectedCharacter { pos });
    }
    let (nodes, edges) = Parser::new(smiles).run()?;
    Ok(MolecularGraph::new(drug_id, nodes, edges).expect("parser emits valid graphs"))
}

/// One `<drug_id>\t<smiles>` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrugRecord {
    pub line: usize,
    pub id: String,
    pub smiles: String,
}

#[derive(Debug, Error)]
pub enum DrugFileError {
    #[error("line {line}: expected `<drug_id>\\t<smiles>`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate drug id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: drug `{id}`: {source}")]
    Smiles {
        line: usize,
        id: String,
        source: SmilesError,
    },
    #[error("drug file contains no records")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads drug records, skipping blank and `#` comment lines.
pub fn parse_drug_records(text: &str) -> Result<Vec<DrugRecord>, DrugFileError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (Some(id), Some(smiles), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(DrugFileError::Malformed { line });
        };
        let (id, smiles) = (id.trim(), smiles.trim());
        if id.is_empty() || smiles.is_empty() {
            return Err(DrugFileError::Malformed { line });
        }
        if !seen.insert(id.to_string()) {
            return Err(DrugFileError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        out.push(DrugRecord {
            line,
            id: id.to_string(),
            smiles: smiles.to_string(),
        });
    }
    if out.is_empty() {
        return Err(DrugFileError::Empty);
    }
    Ok(out)
}

/// Parses every record of a drug file into a graph, in file order.
pub fn parse_drug_file(text: &str) -> Result<Vec<MolecularGraph>, DrugFileError> {
    parse_drug_records(text)?
        .into_iter()
        .map(|r| {
            parse_smiles(&r.id, &r.smiles).map_err(|source| DrugFileError::Smiles {
                line: r.line,
                id: r.id.clone(),
                source,
            })
        })
        .collect()
}

pub fn load_drug_file(path: &std::path::Path) -> Result<Vec<MolecularGraph>, DrugFileError> {
    parse_drug_file(&std::fs::read_to_string(path)?)
}
