use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::space::{Dist, FiniteMetricSpace, PointId};
use crate::error::{invalid, CoarseError, Result};
use crate::Budget;

/// A finitely generated group with a fixed finite symmetric generating set,
/// or an explicit graph standing in for one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupSpec {
    /// Free group on `rank` letters; generators `a, A, b, B, …` (capitals are inverses).
    FreeGroup { rank: u32 },
    /// ℤ^rank with generators `+e₁, −e₁, +e₂, −e₂, …`, named like the free group.
    FreeAbelian { rank: u32 },
    /// Multiplication table `table[x][y] = x·y` and generator element indices.
    FiniteGroup { table: Vec<Vec<u32>>, generators: Vec<u32> },
    /// Factors act on their own coordinate; generators are listed factor by factor.
    DirectProduct { factors: Vec<GroupSpec> },
    /// Vertex 0 plays the identity.
    ExplicitGraph { adjacency: Vec<Vec<u32>> },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Elem {
    Word(Vec<i8>),
    Lattice(Vec<i64>),
    Index(u32),
    Tuple(Vec<Elem>),
}

enum Model {
    Free(usize),
    Abelian(usize),
    Finite {
        table: Vec<Vec<u32>>,
        identity: u32,
        generators: Vec<u32>,
    },
    Product(Vec<Model>),
    Graph(Vec<Vec<u32>>),
}

fn letter(i: usize, inverse: bool) -> char {
    let base = if inverse { b'A' } else { b'a' };
    (base + i as u8) as char
}

impl Model {
    fn compile(spec: &GroupSpec, top_level: bool) -> Result<Model> {
        Ok(match spec {
            GroupSpec::FreeGroup { rank } | GroupSpec::FreeAbelian { rank } => {
                if *rank > 26 {
                    return invalid("rank above 26 has no letter names");
                }
                if matches!(spec, GroupSpec::FreeGroup { .. }) {
                    Model::Free(*rank as usize)
                } else {
                    Model::Abelian(*rank as usize)
                }
            }
            GroupSpec::FiniteGroup { table, generators } => compile_finite(table, generators)?,
            GroupSpec::DirectProduct { factors } => {
                if factors.is_empty() {
                    return invalid("direct product needs at least one factor");
                }
                let mut models = Vec::new();
                for f in factors {
                    if matches!(f, GroupSpec::ExplicitGraph { .. }) {
                        return invalid("explicit graphs cannot be product factors");
                    }
                    models.push(Model::compile(f, false)?);
                }
                Model::Product(models)
            }
            GroupSpec::ExplicitGraph { adjacency } => {
                if !top_level {
                    return invalid("explicit graphs cannot be nested");
                }
                if adjacency.is_empty() {
                    return invalid("explicit graph has no vertices");
                }
                let n = adjacency.len();
                for (v, nb) in adjacency.iter().enumerate() {
                    for &w in nb {
                        if w as usize >= n || w as usize == v || !adjacency[w as usize].contains(&(v as u32)) {
                            return invalid(format!("explicit graph edge {v}-{w} is invalid or not symmetric"));
                        }
                    }
                }
                Model::Graph(adjacency.clone())
            }
        })
    }

    fn identity(&self) -> Elem {
        match self {
            Model::Free(_) => Elem::Word(Vec::new()),
            Model::Abelian(k) => Elem::Lattice(vec![0; *k]),
            Model::Finite { identity, .. } => Elem::Index(*identity),
            Model::Product(fs) => Elem::Tuple(fs.iter().map(Model::identity).collect()),
            Model::Graph(_) => Elem::Index(0),
        }
    }

    fn num_generators(&self) -> usize {
        match self {
            Model::Free(k) | Model::Abelian(k) => 2 * k,
            Model::Finite { generators, .. } => generators.len(),
            Model::Product(fs) => fs.iter().map(Model::num_generators).sum(),
            Model::Graph(_) => 0,
        }
    }

    fn generator_names(&self) -> Vec<String> {
        match self {
            Model::Free(k) | Model::Abelian(k) => (0..2 * k)
                .map(|g| letter(g / 2, g % 2 == 1).to_string())
                .collect(),
            Model::Finite { generators, .. } => generators.iter().map(|g| format!("g{g}")).collect(),
            Model::Product(fs) => fs
                .iter()
                .enumerate()
                .flat_map(|(i, f)| f.generator_names().into_iter().map(move |n| format!("{i}.{n}")))
                .collect(),
            Model::Graph(_) => Vec::new(),
        }
    }

    fn apply(&self, e: &Elem, g: usize) -> Elem {
        match (self, e) {
            (Model::Free(_), Elem::Word(w)) => {
                let l = if g % 2 == 0 { (g / 2 + 1) as i8 } else { -((g / 2 + 1) as i8) };
                let mut w = w.clone();
                if w.last() == Some(&-l) {
                    w.pop();
                } else {
                    w.push(l);
                }
                Elem::Word(w)
            }
            (Model::Abelian(_), Elem::Lattice(v)) => {
                let mut v = v.clone();
                v[g / 2] += if g % 2 == 0 { 1 } else { -1 };
                Elem::Lattice(v)
            }
            (Model::Finite { table, generators, .. }, Elem::Index(x)) => {
                Elem::Index(table[*x as usize][generators[g] as usize])
            }
            (Model::Product(fs), Elem::Tuple(parts)) => {
                let mut g = g;
                let mut parts = parts.clone();
                for (i, f) in fs.iter().enumerate() {
                    let k = f.num_generators();
                    if g < k {
                        parts[i] = f.apply(&parts[i], g);
                        break;
                    }
                    g -= k;
                }
                Elem::Tuple(parts)
            }
            _ => unreachable!("element does not belong to the group model"),
        }
    }

    fn neighbors(&self, e: &Elem) -> Vec<(Option<usize>, Elem)> {
        match (self, e) {
            (Model::Graph(adj), Elem::Index(v)) => adj[*v as usize]
                .iter()
                .map(|&w| (None, Elem::Index(w)))
                .collect(),
            _ => (0..self.num_generators())
                .map(|g| (Some(g), self.apply(e, g)))
                .collect(),
        }
    }

    fn coordinates(&self, e: &Elem) -> Option<Vec<i64>> {
        match (self, e) {
            (Model::Abelian(_), Elem::Lattice(v)) => Some(v.clone()),
            (Model::Product(fs), Elem::Tuple(parts)) => {
                let mut out = Vec::new();
                for (f, p) in fs.iter().zip(parts) {
                    out.extend(f.coordinates(p)?);
                }
                Some(out)
            }
            _ => None,
        }
    }

    fn label(&self, e: &Elem) -> String {
        if let Some(c) = self.coordinates(e) {
            return lattice_label(&c);
        }
        match (self, e) {
            (Model::Free(_), Elem::Word(w)) => {
                if w.is_empty() {
                    "e".to_string()
                } else {
                    w.iter()
                        .map(|&l| letter(l.unsigned_abs() as usize - 1, l < 0))
                        .collect()
                }
            }
            (Model::Finite { .. }, Elem::Index(x)) => format!("g{x}"),
            (Model::Graph(_), Elem::Index(x)) => format!("v{x}"),
            (Model::Product(fs), Elem::Tuple(parts)) => {
                let inner: Vec<String> = fs.iter().zip(parts).map(|(f, p)| f.label(p)).collect();
                format!("({})", inner.join("|"))
            }
            _ => unreachable!("element does not belong to the group model"),
        }
    }
}

fn compile_finite(table: &[Vec<u32>], generators: &[u32]) -> Result<Model> {
    let n = table.len();
    if n == 0 {
        return invalid("finite group table is empty");
    }
    if table.iter().any(|row| row.len() != n || row.iter().any(|&v| v as usize >= n)) {
        return invalid("finite group table must be square with entries in range");
    }
    let identity = (0..n)
        .find(|&e| (0..n).all(|x| table[e][x] as usize == x && table[x][e] as usize == x))
        .ok_or_else(|| CoarseError::Invalid("finite group table has no identity".into()))?;
    let inverse: Vec<Option<usize>> = (0..n)
        .map(|x| (0..n).find(|&y| table[x][y] as usize == identity && table[y][x] as usize == identity))
        .collect();
    if let Some(x) = inverse.iter().position(Option::is_none) {
        return invalid(format!("element {x} has no inverse"));
    }
    // Associativity: exhaustive for small tables, a fixed stride sample otherwise.
    let stride = if n <= 40 { 1 } else { n / 40 + 1 };
    for a in (0..n).step_by(stride) {
        for b in (0..n).step_by(stride) {
            for c in (0..n).step_by(stride) {
                let ab = table[a][b] as usize;
                let bc = table[b][c] as usize;
                if table[ab][c] != table[a][bc] {
                    return invalid(format!("table is not associative at ({a},{b},{c})"));
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    for &g in generators {
        if g as usize >= n {
            return invalid(format!("generator {g} out of range"));
        }
        if g as usize == identity {
            return invalid("generating set contains the identity");
        }
        if !seen.insert(g) {
            return invalid(format!("generator {g} listed twice"));
        }
    }
    for &g in generators {
        let inv = inverse[g as usize].unwrap() as u32;
        if !seen.contains(&inv) {
            return invalid(format!("generating set is not symmetric: inverse of {g} missing"));
        }
    }
    Ok(Model::Finite {
        table: table.to_vec(),
        identity: identity as u32,
        generators: generators.to_vec(),
    })
}

/// Formats integer coordinates as `(a,b,…)`.
pub fn lattice_label(coords: &[i64]) -> String {
    let parts: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Parses a label of the form `(a,b,…)` into integer coordinates.
pub fn parse_lattice_label(label: &str) -> Option<Vec<i64>> {
    let inner = label.strip_prefix('(')?.strip_suffix(')')?;
    inner.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// A word-metric ball together with the generator action on it.
pub struct CayleyBall {
    pub space: Arc<FiniteMetricSpace>,
    generator_names: Vec<String>,
    action: Vec<Option<PointId>>,
    tree: Vec<Option<(PointId, u16)>>,
}

/// Closed ball of radius `radius` about the identity in the Cayley graph of
/// `spec`. Points are numbered in breadth-first order, exploring generators
/// in their listed order; distances are path lengths inside the ball.
pub fn build_cayley_graph(spec: &GroupSpec, radius: u32, budget: &Budget) -> Result<CayleyBall> {
    let model = Model::compile(spec, true)?;
    let ngen = model.num_generators();
    if ngen > u16::MAX as usize {
        return invalid("too many generators");
    }
    let mut ids: HashMap<Elem, PointId> = HashMap::new();
    let mut elems = vec![model.identity()];
    let mut depth = vec![0u32];
    let mut tree: Vec<Option<(PointId, u16)>> = vec![None];
    ids.insert(elems[0].clone(), 0);
    let mut i = 0;
    while i < elems.len() {
        if depth[i] < radius {
            for (g, w) in model.neighbors(&elems[i]) {
                if ids.contains_key(&w) {
                    continue;
                }
                budget.check("points", elems.len() + 1, "Cayley ball")?;
                ids.insert(w.clone(), elems.len() as PointId);
                elems.push(w);
                depth.push(depth[i] + 1);
                tree.push(Some((i as PointId, g.map_or(u16::MAX, |g| g as u16))));
            }
        }
        i += 1;
    }
    let n = elems.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut action = vec![None; n * ngen];
    for (v, e) in elems.iter().enumerate() {
        for (g, w) in model.neighbors(e) {
            if let Some(&j) = ids.get(&w) {
                adjacency[v].push(j);
                if let Some(g) = g {
                    action[v * ngen + g] = Some(j);
                }
            }
        }
    }
    let labels = elems.iter().map(|e| model.label(e)).collect();
    let space = FiniteMetricSpace::from_graph(labels, 1, 1, adjacency, Some(0), radius as Dist)?;
    Ok(CayleyBall {
        space: Arc::new(space),
        generator_names: model.generator_names(),
        action,
        tree,
    })
}

impl CayleyBall {
    pub fn generator_names(&self) -> &[String] {
        &self.generator_names
    }

    pub fn num_generators(&self) -> usize {
        self.generator_names.len()
    }

    /// `x·g`, if it lies in the ball.
    pub fn apply(&self, x: PointId, g: usize) -> Option<PointId> {
        self.action[x as usize * self.num_generators() + g]
    }

    /// The shortlex-least geodesic word for `x` (generator order as listed).
    pub fn shortlex_word(&self, x: PointId) -> Result<Vec<usize>> {
        if self.num_generators() == 0 && self.space.len() > 1 {
            return invalid("explicit graphs have no generator words");
        }
        let mut word = Vec::new();
        let mut v = x;
        while let Some((parent, g)) = self.tree[v as usize] {
            word.push(g as usize);
            v = parent;
        }
        word.reverse();
        Ok(word)
    }

    /// Points visited by the prefixes of `word`, starting at the identity.
    pub fn evaluate(&self, word: &[usize]) -> Result<Vec<PointId>> {
        let mut path = vec![0];
        let mut v = 0;
        for (i, &g) in word.iter().enumerate() {
            if g >= self.num_generators() {
                return invalid(format!("generator index {g} out of range"));
            }
            v = self.apply(v, g).ok_or_else(|| {
                CoarseError::LeavesTruncation(format!("prefix of length {} leaves the ball", i + 1))
            })?;
            path.push(v);
        }
        Ok(path)
    }

    /// Parses a word written with single-letter generator names; `e` is the empty word.
    pub fn parse_word(&self, s: &str) -> Result<Vec<usize>> {
        if s == "e" {
            return Ok(Vec::new());
        }
        s.chars()
            .map(|c| {
                self.generator_names
                    .iter()
                    .position(|n| n.len() == 1 && n.starts_with(c))
                    .ok_or_else(|| CoarseError::Invalid(format!("unknown generator letter {c:?}")))
            })
            .collect()
    }
}
