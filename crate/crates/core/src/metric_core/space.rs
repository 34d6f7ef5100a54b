use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::ops::Deref;
use std::sync::{Arc, Mutex};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoarseError, Result};
use crate::FORMAT_VERSION;

pub type PointId = u32;
/// Scaled integer distance.
pub type Dist = u32;

/// Rows kept per graph-backed space, counted in entries.
const ROW_CACHE_ENTRIES: usize = 1 << 26;

/// A finite point set with an exact integer metric.
///
/// Small spaces store the full distance table. Spaces cut out of Cayley
/// graphs and other unit-length graphs store only the adjacency lists and
/// answer distance queries by breadth-first search, caching whole rows on
/// request.
#[derive(Debug)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    scale: u32,
    base_point: Option<PointId>,
    truncation_radius: Dist,
    metric: Metric,
}

#[derive(Debug)]
enum Metric {
    Dense(Vec<Dist>),
    Graph(Graph),
}

#[derive(Debug)]
struct Graph {
    edge_length: Dist,
    adjacency: Vec<Vec<PointId>>,
    rows: Mutex<HashMap<PointId, Arc<[Dist]>>>,
}

impl Clone for FiniteMetricSpace {
    fn clone(&self) -> Self {
        let metric = match &self.metric {
            Metric::Dense(d) => Metric::Dense(d.clone()),
            Metric::Graph(g) => Metric::Graph(Graph {
                edge_length: g.edge_length,
                adjacency: g.adjacency.clone(),
                rows: Mutex::new(HashMap::new()),
            }),
        };
        FiniteMetricSpace {
            labels: self.labels.clone(),
            scale: self.scale,
            base_point: self.base_point,
            truncation_radius: self.truncation_radius,
            metric,
        }
    }
}

/// One row of the distance table.
pub enum Row<'a> {
    Borrowed(&'a [Dist]),
    Shared(Arc<[Dist]>),
}

impl Deref for Row<'_> {
    type Target = [Dist];
    fn deref(&self) -> &[Dist] {
        match self {
            Row::Borrowed(s) => s,
            Row::Shared(a) => a,
        }
    }
}

#[derive(Default)]
struct Scratch {
    epoch: u32,
    seen_a: Vec<u32>,
    dist_a: Vec<u32>,
    seen_b: Vec<u32>,
    dist_b: Vec<u32>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

fn check_labels_and_base(
    labels: &[String],
    scale: u32,
    base_point: Option<PointId>,
) -> Result<()> {
    if scale == 0 {
        return invalid("scale must be positive");
    }
    if labels.is_empty() {
        return invalid("a space needs at least one point");
    }
    if let Some(p) = base_point {
        if p as usize >= labels.len() {
            return invalid(format!("base point {p} out of range"));
        }
    }
    Ok(())
}

impl FiniteMetricSpace {
    /// Builds a space from a full row-major `n × n` table.
    pub fn from_dense(
        labels: Vec<String>,
        scale: u32,
        dist: Vec<Dist>,
        base_point: Option<PointId>,
        truncation_radius: Dist,
    ) -> Result<Self> {
        check_labels_and_base(&labels, scale, base_point)?;
        let n = labels.len();
        if dist.len() != n * n {
            return invalid(format!("distance table has {} entries, expected {}", dist.len(), n * n));
        }
        for i in 0..n {
            if dist[i * n + i] != 0 {
                return invalid(format!("d({i},{i}) is not zero"));
            }
            for j in 0..i {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if a != b {
                    return invalid(format!("distance table is not symmetric at ({i},{j})"));
                }
                if a == 0 {
                    return invalid(format!("distinct points {j} and {i} at distance 0"));
                }
            }
        }
        Ok(FiniteMetricSpace {
            labels,
            scale,
            base_point,
            truncation_radius,
            metric: Metric::Dense(dist),
        })
    }

    /// Builds a space from row-major lower-triangular entries `d[i][j]`, `j < i`.
    pub fn from_lower_triangular(
        labels: Vec<String>,
        scale: u32,
        lower: &[Dist],
        base_point: Option<PointId>,
        truncation_radius: Dist,
    ) -> Result<Self> {
        let n = labels.len();
        if lower.len() != n * n.saturating_sub(1) / 2 {
            return invalid("lower-triangular distance array has the wrong length");
        }
        let mut dist = vec![0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in 0..i {
                dist[i * n + j] = lower[k];
                dist[j * n + i] = lower[k];
                k += 1;
            }
        }
        Self::from_dense(labels, scale, dist, base_point, truncation_radius)
    }

    /// Builds the path metric of a connected graph whose edges all have length
    /// `edge_length`.
    pub fn from_graph(
        labels: Vec<String>,
        scale: u32,
        edge_length: Dist,
        mut adjacency: Vec<Vec<PointId>>,
        base_point: Option<PointId>,
        truncation_radius: Dist,
    ) -> Result<Self> {
        check_labels_and_base(&labels, scale, base_point)?;
        let n = labels.len();
        if adjacency.len() != n {
            return invalid("adjacency list length differs from the number of labels");
        }
        if edge_length == 0 {
            return invalid("edge length must be positive");
        }
        for (v, nb) in adjacency.iter_mut().enumerate() {
            nb.sort_unstable();
            nb.dedup();
            if nb.iter().any(|&w| w as usize >= n) {
                return invalid(format!("vertex {v} has an out-of-range neighbor"));
            }
            if nb.binary_search(&(v as PointId)).is_ok() {
                return invalid(format!("vertex {v} has a self-loop"));
            }
        }
        for v in 0..n {
            for &w in &adjacency[v] {
                if adjacency[w as usize].binary_search(&(v as PointId)).is_err() {
                    return invalid(format!("edge {v}-{w} is not symmetric"));
                }
            }
        }
        let hops = bfs_hops(&adjacency, 0);
        let unreached: Vec<usize> = (0..n).filter(|&v| hops[v] == u32::MAX).collect();
        if !unreached.is_empty() {
            let shown: Vec<String> = unreached.iter().take(8).map(|v| v.to_string()).collect();
            return Err(CoarseError::Disconnected(format!(
                "{} vertices unreachable from vertex 0 (first: {})",
                unreached.len(),
                shown.join(", ")
            )));
        }
        Ok(FiniteMetricSpace {
            labels,
            scale,
            base_point,
            truncation_radius,
            metric: Metric::Graph(Graph {
                edge_length,
                adjacency,
                rows: Mutex::new(HashMap::new()),
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> {
        0..self.labels.len() as PointId
    }

    pub fn label(&self, x: PointId) -> &str {
        &self.labels[x as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn base_point(&self) -> Option<PointId> {
        self.base_point
    }

    pub fn require_base(&self) -> Result<PointId> {
        self.base_point.ok_or(CoarseError::MissingBasePoint)
    }

    pub fn truncation_radius(&self) -> Dist {
        self.truncation_radius
    }

    pub fn is_graph(&self) -> bool {
        matches!(self.metric, Metric::Graph(_))
    }

    /// Edge length of a graph-backed space.
    pub fn edge_length(&self) -> Option<Dist> {
        match &self.metric {
            Metric::Graph(g) => Some(g.edge_length),
            Metric::Dense(_) => None,
        }
    }

    /// Length of one combing step: the edge length for graphs, one true unit otherwise.
    pub fn unit_step(&self) -> Dist {
        self.edge_length().unwrap_or(self.scale)
    }

    /// Graph neighbors, if the space is graph-backed.
    pub fn graph_neighbors(&self, x: PointId) -> Option<&[PointId]> {
        match &self.metric {
            Metric::Graph(g) => Some(&g.adjacency[x as usize]),
            Metric::Dense(_) => None,
        }
    }

    /// Points at distance exactly `unit_step()` from `x`, ascending.
    pub fn unit_neighbors(&self, x: PointId) -> Vec<PointId> {
        match &self.metric {
            Metric::Graph(g) => g.adjacency[x as usize].clone(),
            Metric::Dense(_) => {
                let step = self.scale;
                let row = self.row(x);
                (0..self.len() as PointId).filter(|&y| row[y as usize] == step).collect()
            }
        }
    }

    pub fn dist(&self, a: PointId, b: PointId) -> Dist {
        match &self.metric {
            Metric::Dense(d) => d[a as usize * self.len() + b as usize],
            Metric::Graph(g) => {
                if a == b {
                    return 0;
                }
                {
                    let rows = g.rows.lock().expect("row cache poisoned");
                    if let Some(r) = rows.get(&a) {
                        return r[b as usize];
                    }
                    if let Some(r) = rows.get(&b) {
                        return r[a as usize];
                    }
                }
                meet_in_middle(&g.adjacency, a, b) * g.edge_length
            }
        }
    }

    /// All distances from `a`.
    pub fn row(&self, a: PointId) -> Row<'_> {
        match &self.metric {
            Metric::Dense(d) => {
                let n = self.len();
                Row::Borrowed(&d[a as usize * n..(a as usize + 1) * n])
            }
            Metric::Graph(g) => {
                if let Some(r) = g.rows.lock().expect("row cache poisoned").get(&a) {
                    return Row::Shared(r.clone());
                }
                let row: Arc<[Dist]> = bfs_hops(&g.adjacency, a)
                    .into_iter()
                    .map(|h| h * g.edge_length)
                    .collect();
                let mut rows = g.rows.lock().expect("row cache poisoned");
                if (rows.len() + 1) * self.len() > ROW_CACHE_ENTRIES {
                    rows.clear();
                }
                rows.insert(a, row.clone());
                Row::Shared(row)
            }
        }
    }

    /// Distances from the base point.
    pub fn base_row(&self) -> Result<Row<'_>> {
        Ok(self.row(self.require_base()?))
    }

    /// Points within `r` of `center` together with their distance, ascending by id.
    pub fn ball_with_dist(&self, center: PointId, r: Dist) -> Vec<(PointId, Dist)> {
        let mut out = match &self.metric {
            Metric::Dense(_) => {
                let row = self.row(center);
                row.iter()
                    .enumerate()
                    .filter(|(_, &d)| d <= r)
                    .map(|(y, &d)| (y as PointId, d))
                    .collect()
            }
            Metric::Graph(g) => {
                let max_hops = r / g.edge_length;
                let mut out = vec![(center, 0)];
                let mut seen: HashMap<PointId, u32> = HashMap::new();
                seen.insert(center, 0);
                let mut queue = VecDeque::from([center]);
                while let Some(u) = queue.pop_front() {
                    let h = seen[&u];
                    if h == max_hops {
                        continue;
                    }
                    for &w in &g.adjacency[u as usize] {
                        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                            e.insert(h + 1);
                            out.push((w, (h + 1) * g.edge_length));
                            queue.push_back(w);
                        }
                    }
                }
                out
            }
        };
        out.sort_unstable();
        out
    }

    /// Closed ball `{ y : d(y, center) ≤ r }`, ascending.
    pub fn ball(&self, center: PointId, r: Dist) -> Vec<PointId> {
        self.ball_with_dist(center, r).into_iter().map(|(y, _)| y).collect()
    }

    /// `{ y : r_lo ≤ d(y, center) ≤ r_hi }`, ascending.
    pub fn annulus(&self, center: PointId, r_lo: Dist, r_hi: Dist) -> Vec<PointId> {
        let row = self.row(center);
        (0..self.len() as PointId)
            .filter(|&y| (r_lo..=r_hi).contains(&row[y as usize]))
            .collect()
    }

    /// `2·(x|y)` in scaled units.
    pub fn gromov_product_twice(&self, x: PointId, y: PointId) -> Result<i64> {
        let p = self.require_base()?;
        Ok(self.dist(x, p) as i64 + self.dist(y, p) as i64 - self.dist(x, y) as i64)
    }

    /// Gromov product `(x|y)` based at the base point, as an exact half-integer
    /// in scaled units.
    pub fn gromov_product(&self, x: PointId, y: PointId) -> Result<Ratio<i64>> {
        Ok(Ratio::new(self.gromov_product_twice(x, y)?, 2))
    }

    /// Largest distance from the base point.
    pub fn base_eccentricity(&self) -> Result<Dist> {
        Ok(self.base_row()?.iter().copied().max().unwrap_or(0))
    }

    /// Index from label to point.
    pub fn label_index(&self) -> HashMap<&str, PointId> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as PointId))
            .collect()
    }

    /// Exhaustive check of symmetry, positivity and the triangle inequality.
    /// Cubic in the number of points.
    pub fn check_metric_axioms(&self) -> Result<()> {
        let n = self.len() as PointId;
        let rows: Vec<Vec<Dist>> = (0..n).map(|x| self.row(x).to_vec()).collect();
        for x in 0..n as usize {
            if rows[x][x] != 0 {
                return invalid(format!("d({x},{x}) ≠ 0"));
            }
            for y in 0..n as usize {
                if rows[x][y] != rows[y][x] || (x != y && rows[x][y] == 0) {
                    return invalid(format!("symmetry or positivity fails at ({x},{y})"));
                }
                for z in 0..n as usize {
                    if rows[x][z] as u64 > rows[x][y] as u64 + rows[y][z] as u64 {
                        return invalid(format!("triangle inequality fails at ({x},{y},{z})"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> SpaceFile {
        let (dist, graph_edges, edge_length) = match &self.metric {
            Metric::Dense(d) => {
                let n = self.len();
                let mut lower = Vec::with_capacity(n * n.saturating_sub(1) / 2);
                for i in 0..n {
                    lower.extend_from_slice(&d[i * n..i * n + i]);
                }
                (Some(lower), None, None)
            }
            Metric::Graph(g) => {
                let mut edges = Vec::new();
                for (v, nb) in g.adjacency.iter().enumerate() {
                    for &w in nb {
                        if (v as PointId) < w {
                            edges.push([v as PointId, w]);
                        }
                    }
                }
                (None, Some(edges), Some(g.edge_length))
            }
        };
        SpaceFile {
            format_version: FORMAT_VERSION,
            labels: self.labels.clone(),
            scale: self.scale,
            base_point: self.base_point,
            truncation_radius: self.truncation_radius,
            dist,
            graph_edges,
            edge_length,
        }
    }

    pub fn from_file(file: SpaceFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return invalid(format!("unsupported space format_version {}", file.format_version));
        }
        match (file.dist, file.graph_edges, file.edge_length) {
            (Some(lower), None, None) => Self::from_lower_triangular(
                file.labels,
                file.scale,
                &lower,
                file.base_point,
                file.truncation_radius,
            ),
            (None, Some(edges), Some(len)) => {
                let mut adjacency = vec![Vec::new(); file.labels.len()];
                for [a, b] in edges {
                    if a as usize >= adjacency.len() || b as usize >= adjacency.len() {
                        return invalid("graph edge out of range");
                    }
                    adjacency[a as usize].push(b);
                    adjacency[b as usize].push(a);
                }
                Self::from_graph(
                    file.labels,
                    file.scale,
                    len,
                    adjacency,
                    file.base_point,
                    file.truncation_radius,
                )
            }
            _ => invalid("space file needs either `dist` or `graph_edges` with `edge_length`"),
        }
    }
}

/// Serialized form of a space. Dense spaces carry the lower triangle of the
/// distance table; graph-backed spaces carry their edge list instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub format_version: u32,
    pub labels: Vec<String>,
    pub scale: u32,
    pub base_point: Option<PointId>,
    pub truncation_radius: Dist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Dist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_edges: Option<Vec<[PointId; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_length: Option<Dist>,
}

fn bfs_hops(adjacency: &[Vec<PointId>], source: PointId) -> Vec<u32> {
    let mut hops = vec![u32::MAX; adjacency.len()];
    hops[source as usize] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let h = hops[u as usize] + 1;
        for &w in &adjacency[u as usize] {
            if hops[w as usize] == u32::MAX {
                hops[w as usize] = h;
                queue.push_back(w);
            }
        }
    }
    hops
}

/// Hop distance by breadth-first search from both ends, always growing the
/// smaller frontier by a full level.
fn meet_in_middle(adjacency: &[Vec<PointId>], a: PointId, b: PointId) -> u32 {
    SCRATCH.with(|cell| {
        let mut s = cell.borrow_mut();
        let n = adjacency.len();
        if s.seen_a.len() < n || s.epoch == u32::MAX {
            let len = s.seen_a.len().max(n);
            s.seen_a = vec![0; len];
            s.dist_a = vec![0; len];
            s.seen_b = vec![0; len];
            s.dist_b = vec![0; len];
            s.epoch = 0;
        }
        s.epoch += 1;
        let Scratch {
            epoch,
            seen_a,
            dist_a,
            seen_b,
            dist_b,
        } = &mut *s;
        let epoch = *epoch;
        seen_a[a as usize] = epoch;
        dist_a[a as usize] = 0;
        seen_b[b as usize] = epoch;
        dist_b[b as usize] = 0;
        let mut front_a = vec![a];
        let mut front_b = vec![b];
        loop {
            let (front, seen_self, dist_self, seen_other, dist_other) = if front_a.len() <= front_b.len() {
                (&mut front_a, &mut *seen_a, &mut *dist_a, &*seen_b, &*dist_b)
            } else {
                (&mut front_b, &mut *seen_b, &mut *dist_b, &*seen_a, &*dist_a)
            };
            let mut best = u32::MAX;
            let mut next = Vec::new();
            for &u in front.iter() {
                let du = dist_self[u as usize] + 1;
                for &w in &adjacency[u as usize] {
                    let wi = w as usize;
                    if seen_self[wi] == epoch {
                        continue;
                    }
                    seen_self[wi] = epoch;
                    dist_self[wi] = du;
                    if seen_other[wi] == epoch {
                        best = best.min(du + dist_other[wi]);
                    }
                    next.push(w);
                }
            }
            if best != u32::MAX || next.is_empty() {
                return best;
            }
            *front = next;
        }
    })
}
