//! Goal-phrase task language: parsing, compilation to reward predicates,
//! goal regions, and GPI weight matrices.
//!
//! Grammar (keywords case-insensitive, AND binds tighter than OR):
//!
//! ```text
//! task := conj ("OR" conj)*
//! conj := atom ("AND" atom)*
//! atom := entity place+
//! entity := "agent" | "square" | "circle"
//! place  := "top" | "middle" | "bottom" | "left" | "centre" | "right"
//! ```
//!
//! Places carve the room into thirds: vertical words constrain the entity's
//! y feature (y grows upward, "top" is the highest third), horizontal words
//! its x feature. Object 1 is the square, object 2 the circle.

use serde::{Deserialize, Serialize};

use crate::env::StateId;
use crate::gpi::{analytic_goal_weights_sized, GoalRegion, WeightMatrix};
use crate::spriteworld::{SpriteState, Spriteworld};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Agent,
    Square,
    Circle,
}

impl Entity {
    fn word(self) -> &'static str {
        match self {
            Entity::Agent => "agent",
            Entity::Square => "square",
            Entity::Circle => "circle",
        }
    }

    /// (x, y) feature indices in the observation layout.
    fn feature_xy(self) -> (usize, usize) {
        match self {
            Entity::Agent => (0, 1),
            Entity::Square => (2, 3),
            Entity::Circle => (4, 5),
        }
    }

    fn required_objects(self) -> usize {
        match self {
            Entity::Agent => 0,
            Entity::Square => 1,
            Entity::Circle => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalPlace {
    Top,
    Middle,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizontalPlace {
    Left,
    Centre,
    Right,
}

/// Third of [0,1) covered by a place, as (lo, hi) numerators over 3.
fn vertical_thirds(p: VerticalPlace) -> (usize, usize) {
    match p {
        VerticalPlace::Bottom => (0, 1),
        VerticalPlace::Middle => (1, 2),
        VerticalPlace::Top => (2, 3),
    }
}

fn horizontal_thirds(p: HorizontalPlace) -> (usize, usize) {
    match p {
        HorizontalPlace::Left => (0, 1),
        HorizontalPlace::Centre => (1, 2),
        HorizontalPlace::Right => (2, 3),
    }
}

/// One entity-placement constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub entity: Entity,
    pub vertical: Option<VerticalPlace>,
    pub horizontal: Option<HorizontalPlace>,
}

/// Disjunction of conjunctions of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAst {
    pub conjuncts: Vec<Vec<Atom>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskCategory {
    AgentEasy,
    AgentHard,
    ObjectEasy,
    ObjectHard,
    DisjunctionEasy,
    DisjunctionHard,
    Conjunction,
    Mixed,
}

impl TaskCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskCategory::AgentEasy => "agent-easy",
            TaskCategory::AgentHard => "agent-hard",
            TaskCategory::ObjectEasy => "object-easy",
            TaskCategory::ObjectHard => "object-hard",
            TaskCategory::DisjunctionEasy => "disjunction-easy",
            TaskCategory::DisjunctionHard => "disjunction-hard",
            TaskCategory::Conjunction => "conjunction",
            TaskCategory::Mixed => "mixed",
        }
    }
}

impl TaskAst {
    pub fn category(&self) -> TaskCategory {
        let places = |a: &Atom| a.vertical.is_some() as usize + a.horizontal.is_some() as usize;
        match (self.conjuncts.len(), self.conjuncts[0].len()) {
            (1, 1) => {
                let atom = self.conjuncts[0][0];
                match (atom.entity, places(&atom)) {
                    (Entity::Agent, 1) => TaskCategory::AgentEasy,
                    (Entity::Agent, _) => TaskCategory::AgentHard,
                    (_, 1) => TaskCategory::ObjectEasy,
                    _ => TaskCategory::ObjectHard,
                }
            }
            (1, _) => TaskCategory::Conjunction,
            _ => {
                if self.conjuncts.iter().all(|c| c.len() == 1) {
                    if self
                        .conjuncts
                        .iter()
                        .all(|c| places(&c[0]) == 1)
                    {
                        TaskCategory::DisjunctionEasy
                    } else {
                        TaskCategory::DisjunctionHard
                    }
                } else {
                    TaskCategory::Mixed
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    offset: usize,
    word: &'a str,
}

fn lex(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    offset: s,
                    word: &text[s..i],
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            offset: s,
            word: &text[s..],
        });
    }
    out
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn entity_of(word: &str) -> Option<Entity> {
    match word.to_ascii_lowercase().as_str() {
        "agent" => Some(Entity::Agent),
        "square" => Some(Entity::Square),
        "circle" => Some(Entity::Circle),
        _ => None,
    }
}

enum Place {
    Vertical(VerticalPlace),
    Horizontal(HorizontalPlace),
}

fn place_of(word: &str) -> Option<Place> {
    match word.to_ascii_lowercase().as_str() {
        "top" => Some(Place::Vertical(VerticalPlace::Top)),
        "middle" => Some(Place::Vertical(VerticalPlace::Middle)),
        "bottom" => Some(Place::Vertical(VerticalPlace::Bottom)),
        "left" => Some(Place::Horizontal(HorizontalPlace::Left)),
        "centre" | "center" => Some(Place::Horizontal(HorizontalPlace::Centre)),
        "right" => Some(Place::Horizontal(HorizontalPlace::Right)),
        _ => None,
    }
}

fn is_op(word: &str) -> Option<&'static str> {
    match word.to_ascii_lowercase().as_str() {
        "and" => Some("AND"),
        "or" => Some("OR"),
        _ => None,
    }
}

/// Parses a task phrase. Errors carry the byte offset of the offending token
/// (or the text length for truncated input).
pub fn parse(text: &str) -> Result<TaskAst> {
    let tokens = lex(text);
    let eof = text.len();
    if tokens.is_empty() {
        return Err(err(0, "empty task"));
    }
    let mut conjuncts: Vec<Vec<Atom>> = Vec::new();
    let mut current: Vec<Atom> = Vec::new();
    let mut pos = 0usize;

    loop {
        // atom: entity place+
        let Some(tok) = tokens.get(pos) else {
            return Err(err(eof, "expected an entity, found end of input"));
        };
        let Some(entity) = entity_of(tok.word) else {
            return Err(err(
                tok.offset,
                format!("expected an entity (agent/square/circle), found \"{}\"", tok.word),
            ));
        };
        pos += 1;
        let mut atom = Atom {
            entity,
            vertical: None,
            horizontal: None,
        };
        let mut got_place = false;
        while let Some(tok) = tokens.get(pos) {
            match place_of(tok.word) {
                Some(Place::Vertical(v)) => {
                    if atom.vertical.replace(v).is_some() {
                        return Err(err(tok.offset, "duplicate vertical placement"));
                    }
                }
                Some(Place::Horizontal(h)) => {
                    if atom.horizontal.replace(h).is_some() {
                        return Err(err(tok.offset, "duplicate horizontal placement"));
                    }
                }
                None => break,
            }
            got_place = true;
            pos += 1;
        }
        if !got_place {
            let at = tokens.get(pos).map_or(eof, |t| t.offset);
            return Err(err(at, format!("{} needs at least one place", entity.word())));
        }
        current.push(atom);

        // connective or end
        match tokens.get(pos) {
            None => break,
            Some(tok) => match is_op(tok.word) {
                Some("AND") => pos += 1,
                Some(_) => {
                    conjuncts.push(std::mem::take(&mut current));
                    pos += 1;
                }
                None => {
                    return Err(err(
                        tok.offset,
                        format!("expected AND or OR, found \"{}\"", tok.word),
                    ));
                }
            },
        }
    }
    conjuncts.push(current);
    Ok(TaskAst { conjuncts })
}

/// Canonical text of an AST; reparsing yields an identical AST.
pub fn print(ast: &TaskAst) -> String {
    ast.conjuncts
        .iter()
        .map(|conj| {
            conj.iter()
                .map(|atom| {
                    let mut words = vec![atom.entity.word().to_string()];
                    if let Some(v) = atom.vertical {
                        words.push(
                            match v {
                                VerticalPlace::Top => "top",
                                VerticalPlace::Middle => "middle",
                                VerticalPlace::Bottom => "bottom",
                            }
                            .into(),
                        );
                    }
                    if let Some(h) = atom.horizontal {
                        words.push(
                            match h {
                                HorizontalPlace::Left => "left",
                                HorizontalPlace::Centre => "centre",
                                HorizontalPlace::Right => "right",
                            }
                            .into(),
                        );
                    }
                    words.join(" ")
                })
                .collect::<Vec<_>>()
                .join(" AND ")
        })
        .collect::<Vec<_>>()
        .join(" OR ")
}

// ---------------------------------------------------------------------------
// compilation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMode {
    /// Goal intervals must land exactly on bin boundaries.
    Aligned,
    /// Goal regions cover every bin intersecting the interval.
    Unaligned,
}

/// How the GPI weights for a task are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightSource {
    /// Single-conjunct task with one allowed bin per constrained feature.
    Analytic(WeightMatrix),
    /// Everything else: linear regression of sampled rewards.
    Regression,
}

/// One feature constrained to the interval [lo/3, hi/3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalConstraint {
    pub feature: usize,
    pub lo_thirds: usize,
    pub hi_thirds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledTask {
    pub ast: TaskAst,
    pub category: TaskCategory,
    /// One goal region (over bins) per conjunct.
    pub regions: Vec<GoalRegion>,
    /// The exact reward semantics: interval constraints per conjunct.
    pub intervals: Vec<Vec<IntervalConstraint>>,
    pub weight_source: WeightSource,
}

/// Bins whose intersection with [lo/3, hi/3) is nonempty; in aligned mode
/// the interval endpoints must coincide with bin boundaries.
fn bins_for_thirds(
    lo: usize,
    hi: usize,
    m: usize,
    alignment: AlignmentMode,
) -> Result<Vec<usize>> {
    match alignment {
        AlignmentMode::Aligned => {
            if (lo * m) % 3 != 0 || (hi * m) % 3 != 0 {
                return Err(Error::Alignment(format!(
                    "thirds boundary {lo}/3 or {hi}/3 is not a bin boundary with m = {m}"
                )));
            }
            Ok((lo * m / 3 + 1..=hi * m / 3).collect())
        }
        AlignmentMode::Unaligned => Ok((1..=m)
            .filter(|&j| 3 * (j - 1) < hi * m && 3 * j > lo * m)
            .collect()),
    }
}

/// Compiles an AST against an environment with `object_count` objects,
/// producing bin goal regions, exact interval reward semantics, and the
/// weight source.
pub fn compile(
    ast: &TaskAst,
    object_count: usize,
    m: usize,
    alignment: AlignmentMode,
) -> Result<CompiledTask> {
    let k = 2 + 2 * object_count;
    let mut regions = Vec::new();
    let mut intervals = Vec::new();
    for conj in &ast.conjuncts {
        let mut region = GoalRegion::wildcard(k);
        let mut conj_intervals: Vec<IntervalConstraint> = Vec::new();
        for atom in conj {
            if atom.entity.required_objects() > object_count {
                return Err(Error::EntityMissing {
                    entity: atom.entity.word().into(),
                    object_count,
                });
            }
            let (fx, fy) = atom.entity.feature_xy();
            let mut constraints = Vec::new();
            if let Some(v) = atom.vertical {
                let (lo, hi) = vertical_thirds(v);
                constraints.push((fy, lo, hi));
            }
            if let Some(h) = atom.horizontal {
                let (lo, hi) = horizontal_thirds(h);
                constraints.push((fx, lo, hi));
            }
            for (feature, lo, hi) in constraints {
                let bins = bins_for_thirds(lo, hi, m, alignment)?;
                let merged: std::collections::BTreeSet<usize> =
                    match &region.allowed[feature] {
                        None => bins.into_iter().collect(),
                        Some(existing) => {
                            bins.into_iter().filter(|b| existing.contains(b)).collect()
                        }
                    };
                if merged.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "conflicting constraints on feature {feature}"
                    )));
                }
                region.allowed[feature] = Some(merged);
                conj_intervals.push(IntervalConstraint {
                    feature,
                    lo_thirds: lo,
                    hi_thirds: hi,
                });
            }
        }
        regions.push(region);
        intervals.push(conj_intervals);
    }

    let weight_source = if regions.len() == 1
        && regions[0]
            .allowed
            .iter()
            .flatten()
            .all(|bins| bins.len() == 1)
    {
        WeightSource::Analytic(analytic_goal_weights_sized(&regions[0], m)?)
    } else {
        WeightSource::Regression
    };

    Ok(CompiledTask {
        ast: ast.clone(),
        category: ast.category(),
        regions,
        intervals,
        weight_source,
    })
}

impl CompiledTask {
    /// 1 iff some conjunct's every interval constraint holds on the true
    /// positions. Integer arithmetic: cell/N in [lo/3, hi/3) iff
    /// 3*cell >= lo*N and 3*cell < hi*N.
    pub fn achieved(&self, world: &Spriteworld, state: &SpriteState) -> bool {
        let n = world.grid_size();
        let cell_of = |feature: usize| -> usize {
            match feature {
                0 => state.agent.0,
                1 => state.agent.1,
                f => {
                    let obj = &state.objects[(f - 2) / 2];
                    if f % 2 == 0 {
                        obj.0
                    } else {
                        obj.1
                    }
                }
            }
        };
        self.intervals.iter().any(|conj| {
            conj.iter().all(|c| {
                let cell = cell_of(c.feature);
                3 * cell >= c.lo_thirds * n && 3 * cell < c.hi_thirds * n
            })
        })
    }

    pub fn achieved_id(&self, world: &Spriteworld, state: StateId) -> bool {
        self.achieved(world, &world.state_of(state))
    }

    /// Goal-achievement reward of a state.
    pub fn reward(&self, world: &Spriteworld, state: StateId) -> f64 {
        f64::from(self.achieved_id(world, state))
    }
}
