//! Lowest quasiparticle energy in a sector of fixed total momentum:
//! `min { Σ e_p n_p : Σ p n_p = P }`.
//!
//! The minimization is a shortest-path problem on the integer lattice: from
//! momentum `0` to `P`, each step adds a mode `m` at cost `e_{2πm}`. Since
//! `e_p ≥ |p|·c` with `c = min_p √(|p|² + 2v̂(p))`, any path of cost at most
//! a budget `U` stays inside the box `max_i |q_i| ≤ U/(2πc)`, which makes the
//! search finite.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use crate::bogoliubov::dispersion;
use crate::error::{Error, Result};
use crate::lattice::{box_points, graded_cmp, ModeSet, MomentumMode, TWO_PI, TWO_PI_SQ};
use crate::potential::Potential;

/// Outcome of a sector minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorMinResult {
    pub target: MomentumMode,
    /// Minimal `Σ e_p n_p`, or `None` if no configuration fits the budget
    /// (or the enumeration limits of the brute-force oracle).
    pub value: Option<f64>,
    /// Canonical minimizer: fewest excitations, then the lexicographically
    /// smallest occupation vector in graded mode order.
    pub occupations: BTreeMap<MomentumMode, u32>,
    /// `|2πP| · min_p √(|p|² + 2v̂(p))`
    pub lower_bound: f64,
    /// Number of distinct optimal configurations found in the search region.
    pub degeneracy: u64,
}

impl SectorMinResult {
    pub fn is_feasible(&self) -> bool {
        self.value.is_some()
    }

    pub fn excitations(&self) -> u32 {
        self.occupations.values().sum()
    }

    fn trivial(target: MomentumMode) -> Self {
        SectorMinResult {
            target,
            value: Some(0.0),
            occupations: BTreeMap::new(),
            lower_bound: 0.0,
            degeneracy: 1,
        }
    }
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
}

fn sqrt_term(pot: &Potential, mode: &MomentumMode) -> f64 {
    (mode.physical_norm2() + 2.0 * pot.coeff(mode)).sqrt()
}

/// `min_{p ≠ 0} √(|p|² + 2v̂(p))` over the whole lattice.
///
/// Outside the support the term is `|p|`, so it suffices to scan the support
/// and the innermost shell that holds a mode outside it.
pub fn min_sqrt_term(pot: &Potential) -> f64 {
    let dim = pot.dim();
    let from_support = pot
        .support()
        .map(|(m, _)| sqrt_term(pot, m))
        .fold(f64::INFINITY, f64::min);
    let mut radius = 1;
    loop {
        let shells: Vec<(i64, bool)> = box_points(dim, radius)
            .into_iter()
            .filter(|m| !m.is_zero())
            .map(|m| (m.norm2(), pot.coeff(&m) > 0.0))
            .collect();
        // shells with norm2 ≤ radius² are complete inside the box
        let complete = i64::from(radius) * i64::from(radius);
        let free_shell = shells
            .iter()
            .filter(|(n2, in_support)| !in_support && *n2 <= complete)
            .map(|(n2, _)| *n2)
            .min();
        if let Some(n2) = free_shell {
            return from_support.min((TWO_PI_SQ * n2 as f64).sqrt());
        }
        radius += 1;
    }
}

/// Linear lower bound `|2πP| · min_p √(|p|² + 2v̂(p))` on the sector
/// minimum, minimizing over the lattice and additionally over `search_modes`.
///
/// The product is rounded down by a relative `1e-13`, so the bound also
/// holds against sector minima accumulated in floating point.
pub fn sector_lower_bound(pot: &Potential, target: &MomentumMode, search_modes: &ModeSet) -> f64 {
    if target.is_zero() {
        return 0.0;
    }
    let c = search_modes
        .iter()
        .filter(|m| !m.is_zero())
        .map(|m| sqrt_term(pot, m))
        .fold(min_sqrt_term(pot), f64::min);
    round_down(target.physical_norm2().sqrt() * c)
}

fn round_down(bound: f64) -> f64 {
    bound * (1.0 - 1e-13)
}

fn check_dim(pot: &Potential, target: &MomentumMode) -> Result<()> {
    if target.dim() != pot.dim() {
        return Err(Error::DimensionMismatch {
            mode: target.clone(),
            expected: pot.dim(),
            got: target.dim(),
        });
    }
    Ok(())
}

fn lower_bound_for(pot: &Potential, target: &MomentumMode) -> f64 {
    round_down(target.physical_norm2().sqrt() * min_sqrt_term(pot))
}

#[derive(Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Graph {
    nodes: Vec<MomentumMode>,
    ids: HashMap<MomentumMode, usize>,
    // candidate steps and their costs, graded order
    steps: Vec<(MomentumMode, f64)>,
}

impl Graph {
    fn new(points: Vec<MomentumMode>, steps: Vec<(MomentumMode, f64)>) -> Self {
        let ids = points
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Graph {
            nodes: points,
            ids,
            steps,
        }
    }

    fn neighbor(&self, node: usize, step: usize) -> Option<usize> {
        self.ids
            .get(&self.nodes[node].add(&self.steps[step].0))
            .copied()
    }

    /// Single-source shortest costs, pruned at `budget`.
    fn dijkstra(&self, source: usize, budget: f64) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Reverse((Cost(0.0), source)));
        while let Some(Reverse((Cost(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for s in 0..self.steps.len() {
                let Some(v) = self.neighbor(u, s) else {
                    continue;
                };
                let nd = d + self.steps[s].1;
                if nd <= budget && nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((Cost(nd), v)));
                }
            }
        }
        dist
    }
}

/// Canonical completion from a node using steps with index `≥ i`:
/// (excitation count, occupation list).
type Completion = Option<(u32, Vec<(usize, u32)>)>;

struct Canonicalizer<'a> {
    graph: &'a Graph,
    from_origin: &'a [f64],
    to_target: &'a [f64],
    optimum: f64,
    target: usize,
    best: HashMap<(usize, usize), Completion>,
    count: HashMap<(usize, usize), u64>,
}

impl Canonicalizer<'_> {
    fn tight(&self, node: usize, step: usize) -> Option<usize> {
        let next = self.graph.neighbor(node, step)?;
        let through = self.from_origin[node] + self.graph.steps[step].1 + self.to_target[next];
        (through.is_finite() && same_value(through, self.optimum)).then_some(next)
    }

    fn best(&mut self, node: usize, i: usize) -> Completion {
        if node == self.target {
            return Some((0, Vec::new()));
        }
        if i == self.graph.steps.len() {
            return None;
        }
        if let Some(hit) = self.best.get(&(node, i)) {
            return hit.clone();
        }
        let skip = self.best(node, i + 1);
        let take = self.tight(node, i).and_then(|next| {
            self.best(next, i).map(|(n, mut occ)| {
                match occ.first_mut() {
                    Some((idx, k)) if *idx == i => *k += 1,
                    _ => occ.insert(0, (i, 1)),
                }
                (n + 1, occ)
            })
        });
        // on equal counts, skipping mode i gives the smaller n_i
        let out = match (skip, take) {
            (Some(s), Some(t)) => Some(if t.0 < s.0 { t } else { s }),
            (s, t) => s.or(t),
        };
        self.best.insert((node, i), out.clone());
        out
    }

    fn count(&mut self, node: usize, i: usize) -> u64 {
        if node == self.target {
            return 1;
        }
        if i == self.graph.steps.len() {
            return 0;
        }
        if let Some(&c) = self.count.get(&(node, i)) {
            return c;
        }
        let mut c = self.count(node, i + 1);
        if let Some(next) = self.tight(node, i) {
            c = c.saturating_add(self.count(next, i));
        }
        self.count.insert((node, i), c);
        c
    }
}

/// Exact sector minimum by Dijkstra over a certified bounded region.
///
/// Without `budget` the single excitation `e_P` bounds the optimum; with a
/// budget, configurations costing more are excluded and the result may be
/// infeasible.
pub fn sector_minimum(
    pot: &Potential,
    target: &MomentumMode,
    budget: Option<f64>,
) -> Result<SectorMinResult> {
    check_dim(pot, target)?;
    if target.is_zero() {
        return Ok(SectorMinResult::trivial(target.clone()));
    }
    let budget = match budget {
        Some(u) if u.is_finite() && u > 0.0 => u,
        Some(u) => {
            return Err(Error::InvalidSetting(format!(
                "budget {u} must be positive"
            )))
        }
        None => dispersion(pot, target)?,
    };
    let limit = budget * (1.0 + 1e-12);
    let lower_bound = lower_bound_for(pot, target);
    let infeasible = SectorMinResult {
        target: target.clone(),
        value: None,
        occupations: BTreeMap::new(),
        lower_bound,
        degeneracy: 0,
    };
    if lower_bound > limit {
        return Ok(infeasible);
    }

    let dim = pot.dim();
    let c = min_sqrt_term(pot);
    let radius = (limit / (TWO_PI * c)).floor() as i32 + target.max_abs();
    // e_p ≥ |p|² bounds the usable modes
    let step_radius = (limit.sqrt() / TWO_PI).floor() as i32;
    let mut steps: Vec<(MomentumMode, f64)> = box_points(dim, step_radius)
        .into_iter()
        .filter(|m| !m.is_zero())
        .map(|m| {
            let e = dispersion(pot, &m).expect("nonzero mode");
            (m, e)
        })
        .filter(|(_, e)| *e <= limit)
        .collect();
    steps.sort_by(|a, b| graded_cmp(&a.0, &b.0));

    let graph = Graph::new(box_points(dim, radius), steps);
    let origin = graph.ids[&MomentumMode::zero(dim)];
    let Some(&goal) = graph.ids.get(target) else {
        return Ok(infeasible);
    };
    let from_origin = graph.dijkstra(origin, limit);
    let optimum = from_origin[goal];
    if !optimum.is_finite() {
        return Ok(infeasible);
    }
    // e_{-m} = e_m and the step set is symmetric, so distances to the target
    // are distances from it
    let to_target = graph.dijkstra(goal, limit);

    let mut canon = Canonicalizer {
        graph: &graph,
        from_origin: &from_origin,
        to_target: &to_target,
        optimum,
        target: goal,
        best: HashMap::new(),
        count: HashMap::new(),
    };
    let (_, occ) = canon
        .best(origin, 0)
        .expect("an optimal path exists once the target is reached");
    let degeneracy = canon.count(origin, 0);
    let occupations = occ
        .into_iter()
        .map(|(i, n)| (graph.steps[i].0.clone(), n))
        .collect();

    Ok(SectorMinResult {
        target: target.clone(),
        value: Some(optimum),
        occupations,
        lower_bound,
        degeneracy,
    })
}

/// Exhaustive enumeration of every multiset of at most `max_excitations`
/// excitations drawn from the nonzero modes of `mode_box`.
pub fn brute_force_sector_min(
    pot: &Potential,
    target: &MomentumMode,
    max_excitations: u32,
    mode_box: &ModeSet,
) -> Result<SectorMinResult> {
    check_dim(pot, target)?;
    if max_excitations > 6 {
        return Err(Error::InvalidSetting(format!(
            "max_excitations = {max_excitations} exceeds the enumeration limit of 6"
        )));
    }
    let lower_bound = sector_lower_bound(pot, target, mode_box);
    if target.is_zero() {
        return Ok(SectorMinResult {
            lower_bound,
            ..SectorMinResult::trivial(target.clone())
        });
    }
    let modes: Vec<(MomentumMode, f64)> = mode_box
        .iter()
        .filter(|m| !m.is_zero())
        .map(|m| (m.clone(), dispersion(pot, m).expect("nonzero mode")))
        .collect();

    // (value, occupation vector over `modes`)
    let mut found: Vec<(f64, Vec<u32>)> = Vec::new();
    let mut occ = vec![0u32; modes.len()];
    enumerate(
        &modes,
        0,
        max_excitations,
        &MomentumMode::zero(pot.dim()),
        target,
        &mut occ,
        &mut found,
    );

    let Some(best) = found.iter().map(|(v, _)| *v).min_by(f64::total_cmp) else {
        return Ok(SectorMinResult {
            target: target.clone(),
            value: None,
            occupations: BTreeMap::new(),
            lower_bound,
            degeneracy: 0,
        });
    };
    let optimal: Vec<&(f64, Vec<u32>)> =
        found.iter().filter(|(v, _)| same_value(*v, best)).collect();
    let chosen = optimal
        .iter()
        .min_by(|a, b| {
            let ca: u32 = a.1.iter().sum();
            let cb: u32 = b.1.iter().sum();
            ca.cmp(&cb).then_with(|| a.1.cmp(&b.1))
        })
        .expect("nonempty");
    let occupations = chosen
        .1
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(i, &n)| (modes[i].0.clone(), n))
        .collect();
    Ok(SectorMinResult {
        target: target.clone(),
        value: Some(best),
        occupations,
        lower_bound,
        degeneracy: optimal.len() as u64,
    })
}

fn enumerate(
    modes: &[(MomentumMode, f64)],
    start: usize,
    remaining: u32,
    momentum: &MomentumMode,
    target: &MomentumMode,
    occ: &mut Vec<u32>,
    found: &mut Vec<(f64, Vec<u32>)>,
) {
    if momentum == target {
        let value = occ
            .iter()
            .zip(modes)
            .map(|(&n, (_, e))| f64::from(n) * e)
            .sum();
        found.push((value, occ.clone()));
    }
    if remaining == 0 {
        return;
    }
    for i in start..modes.len() {
        occ[i] += 1;
        let next = momentum.add(&modes[i].0);
        enumerate(modes, i, remaining - 1, &next, target, occ, found);
        occ[i] -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{modes_within, Geometry};
    use crate::potential::make_potential;

    fn m(c: &[i32]) -> MomentumMode {
        MomentumMode::new(c.to_vec())
    }

    const E_ONE: f64 = 40.466063457578300;

    #[test]
    fn zero_target() {
        let pot = Potential::default_example();
        let r = sector_minimum(&pot, &m(&[0]), None).unwrap();
        assert_eq!(r.value, Some(0.0));
        assert!(r.occupations.is_empty());
        let set = modes_within(1, 2, Geometry::Ball).unwrap();
        let b = brute_force_sector_min(&pot, &m(&[0]), 3, &set).unwrap();
        assert_eq!(b.value, Some(0.0));
    }

    #[test]
    fn single_excitation() {
        let pot = Potential::default_example();
        let r = sector_minimum(&pot, &m(&[1]), None).unwrap();
        assert!((r.value.unwrap() - E_ONE).abs() < 1e-12);
        assert_eq!(r.occupations, BTreeMap::from([(m(&[1]), 1)]));
        assert!(r.value.unwrap() >= r.lower_bound);
        assert!((r.lower_bound - E_ONE).abs() < 1e-12 * E_ONE);
        // oracle: up to 4 excitations in |m| ≤ 4
        let set = modes_within(1, 4, Geometry::Ball).unwrap();
        let b = brute_force_sector_min(&pot, &m(&[1]), 4, &set).unwrap();
        assert_eq!(b.value, r.value);
        assert_eq!(b.occupations, r.occupations);
    }

    #[test]
    fn two_units_of_momentum_prefer_two_phonons() {
        let pot = Potential::default_example();
        let r = sector_minimum(&pot, &m(&[2]), None).unwrap();
        assert!((r.value.unwrap() - 80.932126915156601).abs() < 1e-11);
        assert_eq!(r.occupations, BTreeMap::from([(m(&[1]), 2)]));
        let set = modes_within(1, 4, Geometry::Ball).unwrap();
        let b = brute_force_sector_min(&pot, &m(&[2]), 4, &set).unwrap();
        assert!(same_value(b.value.unwrap(), r.value.unwrap()));
        assert_eq!(b.occupations, r.occupations);
    }

    #[test]
    fn free_gas_lower_bound() {
        let pot = Potential::constant(1, 1.0).unwrap();
        let set = modes_within(1, 2, Geometry::Ball).unwrap();
        let lb = sector_lower_bound(&pot, &m(&[1]), &set);
        assert!((lb - TWO_PI_SQ).abs() < 1e-12 * TWO_PI_SQ);
        assert_eq!(sector_lower_bound(&pot, &m(&[0]), &set), 0.0);
    }

    #[test]
    fn lower_bound_looks_past_a_saturated_first_shell() {
        // heavy first shell: the minimum comes from the free (1,1) diagonal
        let entries = vec![
            (m(&[0, 0]), 1.0),
            (m(&[1, 0]), 100.0),
            (m(&[-1, 0]), 100.0),
            (m(&[0, 1]), 100.0),
            (m(&[0, -1]), 100.0),
        ];
        let pot = make_potential(2, entries).unwrap();
        let c = min_sqrt_term(&pot);
        assert!((c - TWO_PI * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_can_make_a_sector_infeasible() {
        let pot = Potential::default_example();
        let r = sector_minimum(&pot, &m(&[3]), Some(100.0)).unwrap();
        assert!(!r.is_feasible());
        let r = sector_minimum(&pot, &m(&[3]), Some(200.0)).unwrap();
        assert_eq!(r.occupations, BTreeMap::from([(m(&[1]), 3)]));
        assert!(sector_minimum(&pot, &m(&[1]), Some(-1.0)).is_err());
        assert!(sector_minimum(&pot, &m(&[1, 0]), None).is_err());
    }

    #[test]
    fn brute_force_limits() {
        let pot = Potential::default_example();
        let set = modes_within(1, 1, Geometry::Ball).unwrap();
        assert!(brute_force_sector_min(&pot, &m(&[1]), 7, &set).is_err());
        let r = brute_force_sector_min(&pot, &m(&[3]), 2, &set).unwrap();
        assert!(!r.is_feasible());
    }

    #[test]
    fn two_dimensional_minimizers() {
        // a heavy diagonal shell makes (1,0)+(0,1) beat the single (1,1)
        let mut entries = vec![(m(&[0, 0]), 1.0)];
        for c in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            entries.push((m(&c), 2.0));
        }
        for c in [[1, 1], [-1, -1], [1, -1], [-1, 1]] {
            entries.push((m(&c), 50.0));
        }
        let pot = make_potential(2, entries).unwrap();
        let r = sector_minimum(&pot, &m(&[2, 0]), None).unwrap();
        assert_eq!(r.occupations, BTreeMap::from([(m(&[1, 0]), 2)]));
        let r = sector_minimum(&pot, &m(&[1, 1]), None).unwrap();
        assert_eq!(
            r.occupations,
            BTreeMap::from([(m(&[0, 1]), 1), (m(&[1, 0]), 1)])
        );
        assert_eq!(r.degeneracy, 1);
    }
}
