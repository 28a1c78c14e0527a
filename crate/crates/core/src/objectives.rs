//! Benchmark objectives. Synthetic functions take configurations on the
//! unit cube and evaluate through an affine map onto each function's
//! canonical domain; tabular tasks look scores up in a complete
//! precomputed grid loaded from JSON.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::TaskBounds;
use crate::numfmt::format_value;
use crate::prompts::{DataCard, ModelCard, TaskKind};
use crate::rng::substream;
use crate::space::{Configuration, HyperparamDef, ParamKind, SearchSpace, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticForm {
    Rosenbrock,
    Griewank,
    KTablet,
}

impl SyntheticForm {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticForm::Rosenbrock => "rosenbrock",
            SyntheticForm::Griewank => "griewank",
            SyntheticForm::KTablet => "ktablet",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rosenbrock" => Some(SyntheticForm::Rosenbrock),
            "griewank" => Some(SyntheticForm::Griewank),
            "ktablet" => Some(SyntheticForm::KTablet),
            _ => None,
        }
    }

    /// Canonical per-coordinate domain.
    fn canonical_bounds(&self) -> (f64, f64) {
        match self {
            SyntheticForm::Rosenbrock => (-5.0, 10.0),
            SyntheticForm::Griewank => (-600.0, 600.0),
            SyntheticForm::KTablet => (-5.12, 5.12),
        }
    }

    fn eval_canonical(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticForm::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
            SyntheticForm::Griewank => {
                let sum: f64 = x.iter().map(|v| v * v / 4000.0).sum();
                let prod: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                1.0 + sum - prod
            }
            SyntheticForm::KTablet => {
                // The last ⌈d/4⌉ coordinates carry the ×100 scaling.
                let k = x.len().div_ceil(4);
                let split = x.len() - k;
                x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if i < split {
                            v * v
                        } else {
                            (100.0 * v) * (100.0 * v)
                        }
                    })
                    .sum()
            }
        }
    }

    /// Evaluates at a unit-cube point through the affine map.
    fn eval_unit(&self, u: &[f64]) -> f64 {
        let (lo, hi) = self.canonical_bounds();
        let x: Vec<f64> = u.iter().map(|&v| lo + v * (hi - lo)).collect();
        self.eval_canonical(&x)
    }
}

/// The d-dimensional unit cube with dims named x1..xd; the domain every
/// synthetic function is exposed over.
pub fn unit_cube_space(d: usize) -> SearchSpace {
    let dims = (1..=d)
        .map(|i| HyperparamDef {
            name: format!("x{i}"),
            kind: ParamKind::Continuous,
            transform: Transform::Linear,
            lower: 0.0,
            upper: 1.0,
        })
        .collect();
    SearchSpace::new(dims).expect("unit cube is a valid space")
}

/// Min and max objective value observed over `n` uniform unit-cube draws.
/// The draw stream is keyed by (seed, form, d), so regenerating the frozen
/// bounds file reproduces it exactly.
pub fn estimate_bounds(form: SyntheticForm, d: usize, n: u64, seed: u64) -> (f64, f64) {
    use rand::Rng;
    let mut rng = substream(seed, &format!("bounds/{}/{d}d", form.name()));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut u = vec![0.0; d];
    for _ in 0..n {
        for v in &mut u {
            *v = rng.random();
        }
        let f = form.eval_unit(&u);
        lo = lo.min(f);
        hi = hi.max(f);
    }
    (lo, hi)
}

/// Layout of the frozen bounds data file regenerated by the `gen_bounds`
/// example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsFile {
    pub n_samples: u64,
    pub seed: u64,
    pub entries: Vec<BoundsEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsEntry {
    pub name: String,
    pub d: usize,
    /// Anchor for regret 0; the analytic optimum, which all three forms
    /// attain inside the mapped domain.
    pub s_star_min: f64,
    /// Worst value seen by the dense random search.
    pub s_star_max: f64,
    /// Best value seen by the same search, kept for reference.
    pub sampled_min: f64,
}

fn bounds_file() -> &'static BoundsFile {
    static FILE: OnceLock<BoundsFile> = OnceLock::new();
    FILE.get_or_init(|| {
        serde_json::from_str(include_str!("../data/bounds/synthetic.json"))
            .expect("bundled bounds file parses")
    })
}

fn synthetic_bounds(form: SyntheticForm, d: usize) -> TaskBounds {
    let file = bounds_file();
    if let Some(e) = file
        .entries
        .iter()
        .find(|e| e.name == form.name() && e.d == d)
    {
        return TaskBounds {
            s_star_min: e.s_star_min,
            s_star_max: e.s_star_max,
        };
    }
    log::info!(
        "no frozen bounds for {}-{d}d, estimating from {} draws",
        form.name(),
        file.n_samples
    );
    let (_, hi) = estimate_bounds(form, d, file.n_samples, file.seed);
    TaskBounds {
        s_star_min: 0.0,
        s_star_max: hi,
    }
}

type EvalFn = Box<dyn Fn(&Configuration) -> Result<f64> + Send + Sync>;

enum Kind {
    Synthetic { form: SyntheticForm },
    Tabular { grid: TabularGrid },
    Custom { eval: EvalFn },
}

pub struct Objective {
    name: String,
    space: SearchSpace,
    bounds: TaskBounds,
    model_card: ModelCard,
    data_card: Option<DataCard>,
    kind: Kind,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dims", &self.space.len())
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn bounds(&self) -> &TaskBounds {
        &self.bounds
    }

    pub fn model_card(&self) -> &ModelCard {
        &self.model_card
    }

    pub fn data_card(&self) -> Option<&DataCard> {
        self.data_card.as_ref()
    }

    pub fn eval(&self, cfg: &Configuration) -> Result<f64> {
        self.space.validate(cfg)?;
        match &self.kind {
            Kind::Synthetic { form } => {
                let u: Vec<f64> = self
                    .space
                    .dims()
                    .iter()
                    .map(|d| cfg.get(&d.name).expect("validated config has every dimension"))
                    .collect();
                Ok(form.eval_unit(&u))
            }
            Kind::Tabular { grid } => grid.lookup(&self.space, cfg),
            Kind::Custom { eval } => eval(cfg),
        }
    }

    /// Wraps an arbitrary scoring function; the task description defaults
    /// to a regression card over the space. Lets harnesses optimize
    /// functions that live outside the registry.
    pub fn custom(
        name: &str,
        space: SearchSpace,
        bounds: TaskBounds,
        eval: impl Fn(&Configuration) -> Result<f64> + Send + Sync + 'static,
    ) -> Objective {
        let model_card = ModelCard::from_space(name, TaskKind::Regression, "function value", &space);
        Objective {
            name: name.to_string(),
            space,
            bounds,
            model_card,
            data_card: None,
            kind: Kind::Custom { eval: Box::new(eval) },
        }
    }
}

/// A synthetic minimization task; `d` unit-cube dimensions named x1..xd.
pub fn synthetic(name: &str, d: usize) -> Result<Objective> {
    let form = SyntheticForm::parse(name)
        .ok_or_else(|| Error::Config(format!("objective: unknown synthetic function `{name}`")))?;
    if d < 2 {
        return Err(Error::Config(format!(
            "objective: {name} needs d ≥ 2, got {d}"
        )));
    }
    let space = unit_cube_space(d);
    let model_card = ModelCard::from_space(form.name(), TaskKind::Regression, "function value", &space);
    Ok(Objective {
        name: format!("{}-{d}d", form.name()),
        space,
        bounds: synthetic_bounds(form, d),
        model_card,
        data_card: None,
        kind: Kind::Synthetic { form },
    })
}

/// Resolves a task name: `{function}-{d}d` for synthetics, `tabular:{path}`
/// for grid files.
pub fn resolve(name: &str) -> Result<Objective> {
    if let Some(path) = name.strip_prefix("tabular:") {
        return load_tabular(Path::new(path));
    }
    let parsed = name.split_once('-').and_then(|(form, dim)| {
        let d: usize = dim.strip_suffix('d')?.parse().ok()?;
        Some((form, d))
    });
    match parsed {
        Some((form, d)) => synthetic(form, d),
        None => Err(Error::Config(format!(
            "objective: `{name}` is neither `{{function}}-{{d}}d` nor `tabular:{{path}}`"
        ))),
    }
}

/// Complete score table over a per-dimension grid. Queries snap to the
/// nearest grid value on each dimension, ties to the lower value.
pub struct TabularGrid {
    /// Ascending raw grid values, aligned with the space's dimensions.
    grids: Vec<Vec<f64>>,
    rows: HashMap<Vec<usize>, f64>,
}

fn snap_index(grid: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        let dist = (v - g).abs();
        if dist < best_dist {
            best_dist = dist;
            best = i;
        }
    }
    best
}

fn grid_index_exact(grid: &[f64], v: f64) -> Option<usize> {
    grid.iter()
        .position(|&g| (g - v).abs() <= 1e-9 * g.abs().max(1.0))
}

impl TabularGrid {
    fn cell_name(&self, space: &SearchSpace, idx: &[usize]) -> String {
        let parts: Vec<String> = space
            .dims()
            .iter()
            .zip(idx)
            .zip(&self.grids)
            .map(|((d, &i), grid)| format!("{}: {}", d.name, format_value(grid[i])))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    pub fn lookup(&self, space: &SearchSpace, cfg: &Configuration) -> Result<f64> {
        let idx: Vec<usize> = space
            .dims()
            .iter()
            .zip(&self.grids)
            .map(|(d, grid)| {
                let v = cfg.get(&d.name).expect("validated config has every dimension");
                snap_index(grid, v)
            })
            .collect();
        self.rows.get(&idx).copied().ok_or_else(|| {
            Error::DataIntegrity(format!(
                "tabular cell {} has no stored score",
                self.cell_name(space, &idx)
            ))
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TabularRow {
    values: Vec<f64>,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TabularDoc {
    name: String,
    model_name: String,
    task: TaskKind,
    metric: String,
    space: SearchSpace,
    grids: BTreeMap<String, Vec<f64>>,
    rows: Vec<TabularRow>,
    #[serde(default)]
    data: Option<DataCard>,
}

fn bump(idx: &mut [usize], radii: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < radii[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn build_tabular(doc: TabularDoc) -> Result<Objective> {
    let space = doc.space;
    let d = space.len();
    let mut grids = Vec::with_capacity(d);
    for dim in space.dims() {
        let grid = doc.grids.get(&dim.name).ok_or_else(|| {
            Error::DataIntegrity(format!("tabular grid missing dimension `{}`", dim.name))
        })?;
        if grid.is_empty() {
            return Err(Error::DataIntegrity(format!(
                "tabular grid for `{}` is empty",
                dim.name
            )));
        }
        for w in grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::DataIntegrity(format!(
                    "tabular grid for `{}` must be strictly ascending",
                    dim.name
                )));
            }
        }
        if grid.iter().any(|&v| !v.is_finite() || v < dim.lower || v > dim.upper) {
            return Err(Error::DataIntegrity(format!(
                "tabular grid for `{}` has values outside [{}, {}]",
                dim.name, dim.lower, dim.upper
            )));
        }
        grids.push(grid.clone());
    }
    if doc.grids.len() != d {
        let extra: Vec<&String> = doc
            .grids
            .keys()
            .filter(|k| space.dim(k).is_none())
            .collect();
        return Err(Error::DataIntegrity(format!(
            "tabular grids name unknown dimensions: {extra:?}"
        )));
    }

    let mut rows = HashMap::with_capacity(doc.rows.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &doc.rows {
        if row.values.len() != d {
            return Err(Error::DataIntegrity(format!(
                "tabular row {:?} has {} values, expected {d}",
                row.values,
                row.values.len()
            )));
        }
        if !row.score.is_finite() {
            return Err(Error::DataIntegrity(format!(
                "tabular row {:?} has non-finite score",
                row.values
            )));
        }
        let mut idx = Vec::with_capacity(d);
        for (v, grid) in row.values.iter().zip(&grids) {
            idx.push(grid_index_exact(grid, *v).ok_or_else(|| {
                Error::DataIntegrity(format!(
                    "tabular row value {} is not on the declared grid",
                    format_value(*v)
                ))
            })?);
        }
        if rows.insert(idx, row.score).is_some() {
            return Err(Error::DataIntegrity(format!(
                "tabular row {:?} duplicates an earlier cell",
                row.values
            )));
        }
        lo = lo.min(row.score);
        hi = hi.max(row.score);
    }

    let grid = TabularGrid { grids, rows };
    let radii: Vec<usize> = grid.grids.iter().map(|g| g.len()).collect();
    let total: u128 = radii.iter().map(|&r| r as u128).product();
    if (grid.rows.len() as u128) < total {
        let mut idx = vec![0usize; d];
        loop {
            if !grid.rows.contains_key(&idx) {
                return Err(Error::DataIntegrity(format!(
                    "tabular cell {} missing from rows",
                    grid.cell_name(&space, &idx)
                )));
            }
            if !bump(&mut idx, &radii) {
                break;
            }
        }
    }

    if let Some(card) = &doc.data {
        card.validate()?;
    }
    let bounds = TaskBounds::new(lo, hi).map_err(|_| {
        Error::DataIntegrity("tabular task scores span no range".into())
    })?;
    let model_card = ModelCard::from_space(&doc.model_name, doc.task, &doc.metric, &space);
    Ok(Objective {
        name: doc.name,
        space,
        bounds,
        model_card,
        data_card: doc.data,
        kind: Kind::Tabular { grid },
    })
}

pub fn load_tabular_str(text: &str) -> Result<Objective> {
    let doc: TabularDoc = serde_json::from_str(text)?;
    build_tabular(doc)
}

pub fn load_tabular(path: &Path) -> Result<Objective> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("objective: cannot read `{}`: {e}", path.display()))
    })?;
    load_tabular_str(&text)
}
