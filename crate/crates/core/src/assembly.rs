//! Rearranging randomly loaded atoms into a target pattern with the
//! steerable tweezer.
//!
//! Planning is split in two: [`assign`] solves the min-total-distance
//! matching of free atoms to unfilled targets, [`sequence_moves`] orders the
//! resulting transports so no straight segment passes near an atom that is
//! not being moved, inserting a single detour waypoint when needed.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{stochastic_load, GridGeometry, Occupancy};
use crate::error::{ArrayError, AssemblyError};

/// Set of target sites, stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPattern {
    sites: Vec<usize>,
}

impl TargetPattern {
    pub fn from_sites(geom: &GridGeometry, sites: impl IntoIterator<Item = usize>) -> Result<Self, ArrayError> {
        let mut sites: Vec<usize> = sites.into_iter().collect();
        for &s in &sites {
            if s >= geom.site_count() {
                let (row, col) = geom.row_col(s);
                return Err(ArrayError::SiteOutOfRange {
                    row,
                    col,
                    rows: geom.rows,
                    cols: geom.cols,
                });
            }
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(Self { sites })
    }

    /// `rows × cols` block with its top-left corner at `(row, col)`.
    pub fn rectangle(geom: &GridGeometry, row: usize, col: usize, rows: usize, cols: usize) -> Result<Self, ArrayError> {
        let mut sites = Vec::with_capacity(rows * cols);
        for r in row..row + rows {
            for c in col..col + cols {
                sites.push(geom.index(r, c)?);
            }
        }
        Self::from_sites(geom, sites)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_filled(&self, occ: &Occupancy) -> bool {
        self.sites.iter().all(|&s| occ.is_occupied(s))
    }

    pub fn filled_count(&self, occ: &Occupancy) -> usize {
        self.sites.iter().filter(|&&s| occ.is_occupied(s)).count()
    }
}

/// Result of [`assign`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(source, target)` pairs that require transport.
    pub moves: Vec<(usize, usize)>,
    /// Targets already holding an atom, matched to themselves.
    pub stationary: Vec<usize>,
    /// Targets left empty because too few atoms were available.
    pub unfilled: Vec<usize>,
    /// Total Euclidean transport distance, meters.
    pub cost: f64,
}

impl Matching {
    pub fn is_complete(&self) -> bool {
        self.unfilled.is_empty()
    }
}

/// Minimum-cost assignment of rows to distinct columns (rows ≤ cols),
/// O(rows²·cols) shortest augmenting path with potentials.
///
/// Returns `assignment[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows ({n}) than columns ({m})");

    // 1-based with column 0 as the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=m {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col1 = col;
                }
            }
            for col in 0..=m {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for col in 1..=m {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Optimal matching of free atoms onto unfilled targets.
///
/// Atoms already on targets stay put. If atoms are scarce the result is a
/// maximum partial matching of minimum total distance.
pub fn assign(geom: &GridGeometry, occ: &Occupancy, pattern: &TargetPattern) -> Matching {
    let stationary: Vec<usize> = pattern.sites().iter().copied().filter(|&t| occ.is_occupied(t)).collect();
    let open: Vec<usize> = pattern.sites().iter().copied().filter(|&t| !occ.is_occupied(t)).collect();
    let free: Vec<usize> = occ.occupied_sites().filter(|&s| !pattern.contains(s)).collect();

    let mut moves = Vec::new();
    let mut unfilled = Vec::new();
    if !open.is_empty() && !free.is_empty() {
        let pos = |s: usize| geom.position_of(s);
        if open.len() <= free.len() {
            let cost: Vec<Vec<f64>> = open
                .iter()
                .map(|&t| free.iter().map(|&s| distance(pos(s), pos(t))).collect())
                .collect();
            let a = min_cost_assignment(&cost);
            for (i, &t) in open.iter().enumerate() {
                moves.push((free[a[i]], t));
            }
        } else {
            let cost: Vec<Vec<f64>> = free
                .iter()
                .map(|&s| open.iter().map(|&t| distance(pos(s), pos(t))).collect())
                .collect();
            let a = min_cost_assignment(&cost);
            let mut taken = vec![false; open.len()];
            for (i, &s) in free.iter().enumerate() {
                moves.push((s, open[a[i]]));
                taken[a[i]] = true;
            }
            unfilled = open.iter().zip(&taken).filter(|(_, &t)| !t).map(|(&t, _)| t).collect();
        }
    } else {
        unfilled = open;
    }
    moves.sort_unstable_by_key(|&(_, t)| t);
    let cost = moves
        .iter()
        .map(|&(s, t)| distance(geom.position_of(s), geom.position_of(t)))
        .sum();
    Matching {
        moves,
        stationary,
        unfilled,
        cost,
    }
}

/// One tweezer transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub source: usize,
    pub target: usize,
    /// Intermediate points between source and target, meters.
    pub waypoints: Vec<[f64; 2]>,
    /// Path length, meters.
    pub length: f64,
}

impl Move {
    /// Polyline from source through the waypoints to the target.
    pub fn path(&self, geom: &GridGeometry) -> Vec<[f64; 2]> {
        let mut p = vec![geom.position_of(self.source)];
        p.extend(self.waypoints.iter().copied());
        p.push(geom.position_of(self.target));
        p
    }
}

/// Ordered, collision-checked sequence of moves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MovePlan {
    pub moves: Vec<Move>,
    pub total_length: f64,
}

impl MovePlan {
    /// Line-oriented dump: one `move` line per transport.
    pub fn trace(&self, geom: &GridGeometry) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# moves={} total_length_m={:e}", self.moves.len(), self.total_length);
        for (i, m) in self.moves.iter().enumerate() {
            let (sr, sc) = geom.row_col(m.source);
            let (tr, tc) = geom.row_col(m.target);
            let _ = write!(out, "move {i} from={sr},{sc} to={tr},{tc} length_m={:e}", m.length);
            for w in &m.waypoints {
                let _ = write!(out, " via={:e},{:e}", w[0], w[1]);
            }
            out.push('\n');
        }
        out
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    distance(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

fn polyline_clear(
    geom: &GridGeometry,
    occ: &Occupancy,
    mover: usize,
    path: &[[f64; 2]],
    blocking_radius: f64,
) -> bool {
    occ.occupied_sites().filter(|&s| s != mover).all(|s| {
        let p = geom.position_of(s);
        path.windows(2)
            .all(|seg| point_segment_distance(p, seg[0], seg[1]) >= blocking_radius)
    })
}

fn polyline_length(path: &[[f64; 2]]) -> f64 {
    path.windows(2).map(|s| distance(s[0], s[1])).sum()
}

fn detours(geom: &GridGeometry, source: usize, target: usize, blocking_radius: f64) -> [[f64; 2]; 2] {
    let a = geom.position_of(source);
    let b = geom.position_of(target);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    let n = if len > 0.0 { [-d[1] / len, d[0] / len] } else { [0.0, 1.0] };
    let off = 2.0 * blocking_radius;
    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    [
        [mid[0] + off * n[0], mid[1] + off * n[1]],
        [mid[0] - off * n[0], mid[1] - off * n[1]],
    ]
}

/// Orders the moves of `matching` so that each straight path clears every
/// other occupied site by at least `blocking_radius`; falls back to a single
/// perpendicular detour waypoint when no direct move is clear.
pub fn sequence_moves(
    geom: &GridGeometry,
    matching: &Matching,
    occ: &Occupancy,
    blocking_radius: f64,
) -> Result<MovePlan, AssemblyError> {
    let mut occ = occ.clone();
    let mut pending: Vec<(usize, usize)> = matching.moves.clone();
    for &(s, t) in &pending {
        if !occ.is_occupied(s) {
            return Err(AssemblyError::InvalidMove { source_site: s, target: t, reason: "source is empty" });
        }
        if occ.is_occupied(t) {
            return Err(AssemblyError::InvalidMove { source_site: s, target: t, reason: "target is occupied" });
        }
    }
    pending.sort_by(|x, y| {
        let dx = distance(geom.position_of(x.0), geom.position_of(x.1));
        let dy = distance(geom.position_of(y.0), geom.position_of(y.1));
        dx.total_cmp(&dy).then(x.cmp(y))
    });

    let mut plan = MovePlan::default();
    while !pending.is_empty() {
        let mut chosen = None;
        for (i, &(s, t)) in pending.iter().enumerate() {
            if occ.is_occupied(t) {
                continue;
            }
            let path = [geom.position_of(s), geom.position_of(t)];
            if polyline_clear(geom, &occ, s, &path, blocking_radius) {
                chosen = Some((i, Vec::new()));
                break;
            }
        }
        if chosen.is_none() {
            'outer: for (i, &(s, t)) in pending.iter().enumerate() {
                if occ.is_occupied(t) {
                    continue;
                }
                for w in detours(geom, s, t, blocking_radius) {
                    let path = [geom.position_of(s), w, geom.position_of(t)];
                    if polyline_clear(geom, &occ, s, &path, blocking_radius) {
                        chosen = Some((i, vec![w]));
                        break 'outer;
                    }
                }
            }
        }
        let Some((i, waypoints)) = chosen else {
            let (s, t) = pending[0];
            return Err(AssemblyError::Unreachable { source_site: s, target: t });
        };
        let (s, t) = pending.remove(i);
        let mv = Move { source: s, target: t, waypoints, length: 0.0 };
        let length = polyline_length(&mv.path(geom));
        occ.set(s, false);
        occ.set(t, true);
        plan.total_length += length;
        plan.moves.push(Move { length, ..mv });
    }
    Ok(plan)
}

/// Runs `plan` on a copy of `occ`; each move succeeds independently with
/// `p_move_success`, a failed move loses the atom.
pub fn execute_plan<R: Rng + ?Sized>(
    plan: &MovePlan,
    occ: &Occupancy,
    p_move_success: f64,
    rng: &mut R,
) -> (Occupancy, usize) {
    let mut occ = occ.clone();
    let mut lost = 0;
    for m in &plan.moves {
        if !occ.is_occupied(m.source) {
            continue;
        }
        occ.set(m.source, false);
        let ok = rng.random::<f64>() < p_move_success;
        if ok && !occ.is_occupied(m.target) {
            occ.set(m.target, true);
        } else {
            lost += 1;
        }
    }
    (occ, lost)
}

/// Parameters of a repeated-assembly run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblySetup {
    pub geom: GridGeometry,
    pub p_load: f64,
    pub p_move_success: f64,
    pub blocking_radius: f64,
    /// Probability that an atom on a target site is still there next cycle.
    pub retention: f64,
}

/// Bookkeeping of one assembly round (one measurement cycle).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub loaded: usize,
    pub moves: usize,
    pub lost: usize,
    pub filled: usize,
    pub full: bool,
    pub unreachable: bool,
    pub occupancy: Occupancy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyHistory {
    pub rounds: Vec<RoundReport>,
    pub target_size: usize,
}

impl AssemblyHistory {
    /// Fraction of cycles measured with the full pattern.
    pub fn duty_cycle(&self) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        self.rounds.iter().filter(|r| r.full).count() as f64 / self.rounds.len() as f64
    }

    /// 1-based index of the first full round.
    pub fn first_full_round(&self) -> Option<usize> {
        self.rounds.iter().position(|r| r.full).map(|i| i + 1)
    }

    pub fn mean_fill_fraction(&self) -> f64 {
        if self.rounds.is_empty() || self.target_size == 0 {
            return 0.0;
        }
        self.rounds.iter().map(|r| r.filled as f64).sum::<f64>()
            / (self.rounds.len() * self.target_size) as f64
    }
}

/// Load, assemble and measure for `max_rounds` cycles. Between cycles the
/// target atoms are kept with probability `retention` and all other sites
/// are reloaded.
pub fn repeated_assembly<R: Rng + ?Sized>(
    setup: &AssemblySetup,
    pattern: &TargetPattern,
    max_rounds: usize,
    rng: &mut R,
) -> AssemblyHistory {
    let geom = &setup.geom;
    let mut rounds = Vec::with_capacity(max_rounds);
    let mut occ = Occupancy::empty(geom.site_count());
    for round in 0..max_rounds.max(1) {
        let fresh = stochastic_load(geom, setup.p_load, rng);
        for s in 0..geom.site_count() {
            let keep = if round > 0 && pattern.contains(s) && occ.is_occupied(s) {
                rng.random::<f64>() < setup.retention
            } else {
                false
            };
            occ.set(s, keep || fresh.is_occupied(s));
        }
        let loaded = occ.count();
        let matching = assign(geom, &occ, pattern);
        let (moves, lost, unreachable) = match sequence_moves(geom, &matching, &occ, setup.blocking_radius) {
            Ok(plan) => {
                let (next, lost) = execute_plan(&plan, &occ, setup.p_move_success, rng);
                occ = next;
                (plan.moves.len(), lost, false)
            }
            Err(_) => (0, 0, true),
        };
        let filled = pattern.filled_count(&occ);
        rounds.push(RoundReport {
            loaded,
            moves,
            lost,
            filled,
            full: filled == pattern.len(),
            unreachable,
            occupancy: occ.clone(),
        });
    }
    AssemblyHistory {
        rounds,
        target_size: pattern.len(),
    }
}
