use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dataflow::{DeadCellInfo, ReuseCondition};
use crate::ir::{ConsId, Goal, GoalKind, Point, Procedure, TypeTable};

use super::{constraint_admits, dead_by_point, DirectReuse, ReuseAssignment, ReuseConstraint, SelectionStrategy};

struct Walk<'a> {
    proc: &'a Procedure,
    table: &'a TypeTable,
    constraint: ReuseConstraint,
    dead: std::collections::BTreeMap<Point, &'a DeadCellInfo>,
    rng: Option<ChaCha8Rng>,
    pairs: Vec<DirectReuse>,
}

impl<'a> Walk<'a> {
    /// `pool` holds the cells dead so far on the current path, oldest first.
    fn goal(&mut self, g: &Goal, pool: &mut Vec<&'a DeadCellInfo>) {
        match &g.kind {
            GoalKind::Deconstruct { .. } => {
                if let Some(d) = self.dead.get(&g.point) {
                    pool.push(d);
                }
            }
            GoalKind::Construct { var, cons: ConsId::Functor(f), .. } => {
                let Some(ty) = self.proc.var_types.get(var) else { return };
                let Ok(Some(size)) = self.table.cell_size(f, ty) else { return };
                let candidates: Vec<usize> =
                    (0..pool.len()).filter(|&i| constraint_admits(self.constraint, pool[i], f, size)).collect();
                let Some(&last) = candidates.last() else { return };
                let pick = match &mut self.rng {
                    None => last,
                    Some(rng) => candidates[rng.gen_range(0..candidates.len())],
                };
                let d = pool.remove(pick);
                self.pairs.push(DirectReuse {
                    construct: g.point,
                    decon: d.point,
                    dead_functor: d.functor.clone(),
                    new_functor: f.clone(),
                    leaked: d.size.saturating_sub(size),
                    condition: d.condition.clone(),
                });
            }
            GoalKind::Conj(gs) => {
                for s in gs {
                    self.goal(s, pool);
                }
            }
            GoalKind::Disj(gs) => {
                // Cells dying inside a branch stay in it; a cell from before
                // the switch may serve one construction in each branch, since
                // only one branch runs.
                let before = pool.clone();
                let mut taken = std::collections::BTreeSet::new();
                for s in gs {
                    let mut branch = before.clone();
                    self.goal(s, &mut branch);
                    for d in &before {
                        if !branch.iter().any(|b| b.point == d.point) {
                            taken.insert(d.point);
                        }
                    }
                }
                pool.retain(|d| !taken.contains(&d.point));
            }
            _ => {}
        }
    }
}

fn proc_seed(seed: u64, name: &str) -> u64 {
    let h = Sha256::digest(name.as_bytes());
    seed ^ u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes"))
}

/// Matches dead cells to constructions in program-point order.
pub fn decide_direct(
    p: &Procedure,
    dead: &[DeadCellInfo],
    table: &TypeTable,
    constraint: ReuseConstraint,
    strategy: SelectionStrategy,
) -> ReuseAssignment {
    let rng = match strategy {
        SelectionStrategy::Lifo => None,
        SelectionStrategy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(proc_seed(seed, p.name()))),
    };
    let mut w = Walk { proc: p, table, constraint, dead: dead_by_point(dead), rng, pairs: Vec::new() };
    w.goal(&p.body, &mut Vec::new());
    let pairs = w.pairs;
    let condition: ReuseCondition = pairs.iter().flat_map(|r| r.condition.iter().cloned()).collect();
    let residual = dead.iter().map(|d| d.point).filter(|pt| !pairs.iter().any(|r| r.decon == *pt)).collect();
    ReuseAssignment { direct: pairs, indirect: Vec::new(), condition, residual }
}
