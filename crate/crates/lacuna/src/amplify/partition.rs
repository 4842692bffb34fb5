//! Workload-level amplification: assign each marginal a disjoint block of
//! attributes whose joint missingness amplifies that marginal's budget.
//!
//! A plan is valid when the blocks are pairwise disjoint, every marginal is
//! assigned a non-empty block contained in its own attribute set, and each
//! block's factor is the product of its attributes' keep-probabilities.
//! The exact search enumerates set partitions of the attribute space as
//! restricted growth strings; the greedy search builds a valid plan from
//! per-component candidates without enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AmplifyMode;
use crate::error::{Error, Result};
use crate::missing::PhiEstimate;

/// Largest attribute count the exact search will enumerate (Bell(12) ≈ 4.2M
/// partitions); larger instances must use the greedy search.
pub const EXACT_SEARCH_CAP: usize = 12;

/// One differentially private marginal release: the attributes it touches
/// and the budget it was granted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalQuery {
    pub attrs: Vec<usize>,
    pub epsilon: f64,
}

impl MarginalQuery {
    pub fn new(attrs: Vec<usize>, epsilon: f64) -> Result<Self> {
        let q = MarginalQuery { attrs, epsilon };
        q.validate(usize::MAX)?;
        Ok(q)
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.attrs.is_empty() {
            return Err(Error::invalid("marginal with no attributes"));
        }
        let mut sorted = self.attrs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("marginal lists an attribute twice"));
        }
        if let Some(&a) = sorted.last() {
            if a >= k {
                return Err(Error::invalid(format!(
                    "attribute {a} out of range (k = {k})"
                )));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!(
                "marginal epsilon {} must be positive and finite",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn sorted_attrs(&self) -> Vec<usize> {
        let mut s = self.attrs.clone();
        s.sort_unstable();
        s
    }
}

/// A priced assignment of amplification blocks to a marginal workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationPlan {
    pub mode: AmplifyMode,
    /// True for greedy plans: the cost is an upper bound, not the optimum.
    pub heuristic: bool,
    /// Pairwise-disjoint attribute blocks, each sorted ascending. Blocks no
    /// marginal uses are permitted and simply unused.
    pub blocks: Vec<Vec<usize>>,
    /// Per block: product of (1 − φ) over its attributes.
    pub factors: Vec<f64>,
    /// Per marginal: index of its block in `blocks`.
    pub assignment: Vec<usize>,
    pub per_query_epsilon: Vec<f64>,
    pub requested_epsilon: f64,
    pub amplified_epsilon: f64,
}

/// Cost of amplifying only the single most profitable marginal per overlap
/// component and leaving the rest at full price. Not a valid plan (the
/// skipped marginals have no amplification set); reported for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub mode: AmplifyMode,
    pub per_query_factor: Vec<f64>,
    pub requested_epsilon: f64,
    pub amplified_epsilon: f64,
}

fn amplified_eps(eps: f64, factor: f64, mode: AmplifyMode) -> f64 {
    if factor == 0.0 {
        return 0.0;
    }
    match mode {
        AmplifyMode::Linear => factor * eps,
        AmplifyMode::Exact => (factor * eps.exp_m1()).ln_1p(),
    }
}

struct Instance {
    k: usize,
    keep: Vec<f64>,
    sets: Vec<Vec<usize>>,
    eps: Vec<f64>,
}

impl Instance {
    fn build(queries: &[MarginalQuery], phi: &PhiEstimate) -> Result<Instance> {
        super::check_phi(phi)?;
        if queries.is_empty() {
            return Err(Error::invalid("no marginals to amplify"));
        }
        let k = phi.phi.len();
        for q in queries {
            q.validate(k)?;
        }
        Ok(Instance {
            k,
            keep: phi.phi.iter().map(|p| 1.0 - p).collect(),
            sets: queries.iter().map(|q| q.sorted_attrs()).collect(),
            eps: queries.iter().map(|q| q.epsilon).collect(),
        })
    }

    fn full_factor(&self, query: usize) -> f64 {
        self.sets[query].iter().map(|&a| self.keep[a]).product()
    }

    fn set_factor(&self, attrs: &[usize]) -> f64 {
        attrs.iter().map(|&a| self.keep[a]).product()
    }

    /// Highest-φ attribute in a sorted set; ties break to the lowest index.
    fn wettest(&self, attrs: &[usize]) -> usize {
        *attrs
            .iter()
            .min_by(|&&a, &&b| self.keep[a].partial_cmp(&self.keep[b]).unwrap().then(a.cmp(&b)))
            .unwrap()
    }

    /// Connected components of the query-overlap graph, each sorted, in
    /// order of their lowest query index.
    fn components(&self) -> Vec<Vec<usize>> {
        let m = self.sets.len();
        let mut visited = vec![false; m];
        let mut out = Vec::new();
        for start in 0..m {
            if visited[start] {
                continue;
            }
            let mut comp = vec![start];
            visited[start] = true;
            let mut frontier = vec![start];
            while let Some(q) = frontier.pop() {
                for other in 0..m {
                    if !visited[other] && overlaps(&self.sets[q], &self.sets[other]) {
                        visited[other] = true;
                        comp.push(other);
                        frontier.push(other);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

fn overlaps(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

fn is_subset(inner: &[usize], outer: &[usize]) -> bool {
    let mut j = 0;
    for &x in inner {
        while j < outer.len() && outer[j] < x {
            j += 1;
        }
        if j == outer.len() || outer[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| is_subset(&[*x], b)).collect()
}

fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| !is_subset(&[*x], b)).collect()
}

// ---------------------------------------------------------------------------
// Exact search
// ---------------------------------------------------------------------------

/// Walk all restricted growth strings extending `a[..pos]` whose prefix
/// maximum is `max`, invoking `f` on each complete string.
fn extend_rgs(a: &mut [u8], pos: usize, max: u8, f: &mut dyn FnMut(&[u8])) {
    if pos == a.len() {
        f(a);
        return;
    }
    for v in 0..=max + 1 {
        a[pos] = v;
        extend_rgs(a, pos + 1, max.max(v), f);
    }
}

/// Evaluate one partition: per-marginal argmin-factor contained block and
/// the accumulated cost. `None` when some marginal contains no block or the
/// running cost exceeds `bound`.
fn evaluate_rgs(rgs: &[u8], inst: &Instance, mode: AmplifyMode, bound: f64) -> Option<f64> {
    let nblocks = *rgs.iter().max().unwrap() as usize + 1;
    let mut block_masks = [0u64; EXACT_SEARCH_CAP];
    let mut factors = [1.0f64; EXACT_SEARCH_CAP];
    for (j, &b) in rgs.iter().enumerate() {
        block_masks[b as usize] |= 1 << j;
        factors[b as usize] *= inst.keep[j];
    }
    let mut cost = 0.0;
    for (set, &eps) in inst.sets.iter().zip(&inst.eps) {
        let mut qmask = 0u64;
        for &a in set {
            qmask |= 1 << a;
        }
        let mut best: Option<f64> = None;
        for b in 0..nblocks {
            if block_masks[b] & !qmask == 0 {
                let f = factors[b];
                if best.is_none_or(|cur| f < cur) {
                    best = Some(f);
                }
            }
        }
        cost += amplified_eps(eps, best?, mode);
        if cost > bound {
            return None;
        }
    }
    Some(cost)
}

#[derive(Clone)]
struct Best {
    cost: f64,
    rgs: Vec<u8>,
}

impl Best {
    /// Total order: cost, then the growth string, so parallel shard merges
    /// are deterministic.
    fn better_than(&self, other: &Best) -> bool {
        match self.cost.partial_cmp(&other.cost).unwrap() {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.rgs < other.rgs,
        }
    }
}

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.better_than(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn plan_from_rgs(rgs: &[u8], inst: &Instance, mode: AmplifyMode, heuristic: bool) -> AmplificationPlan {
    let nblocks = *rgs.iter().max().unwrap() as usize + 1;
    let mut blocks = vec![Vec::new(); nblocks];
    for (j, &b) in rgs.iter().enumerate() {
        blocks[b as usize].push(j);
    }
    let factors: Vec<f64> = blocks.iter().map(|b| inst.set_factor(b)).collect();
    let mut assignment = Vec::with_capacity(inst.sets.len());
    let mut per_query = Vec::with_capacity(inst.sets.len());
    for (set, &eps) in inst.sets.iter().zip(&inst.eps) {
        let chosen = (0..nblocks)
            .filter(|&b| is_subset(&blocks[b], set))
            .min_by(|&a, &b| factors[a].partial_cmp(&factors[b]).unwrap().then(a.cmp(&b)))
            .expect("winning partition lost a marginal's block");
        assignment.push(chosen);
        per_query.push(amplified_eps(eps, factors[chosen], mode));
    }
    AmplificationPlan {
        mode,
        heuristic,
        blocks,
        factors,
        assignment,
        per_query_epsilon: per_query.clone(),
        requested_epsilon: inst.eps.iter().sum(),
        amplified_epsilon: per_query.iter().sum(),
    }
}

/// Minimum-cost valid plan over every set partition of the attribute space.
///
/// Enumeration is sharded by growth-string prefix and pruned twice: a
/// partition dies as soon as some marginal contains none of its blocks, or
/// as soon as its running cost passes the shard incumbent.
pub fn optimal_partition(
    queries: &[MarginalQuery],
    phi: &PhiEstimate,
    mode: AmplifyMode,
) -> Result<AmplificationPlan> {
    let inst = Instance::build(queries, phi)?;
    if inst.k == 0 {
        return Err(Error::invalid("no attributes to partition"));
    }
    if inst.k > EXACT_SEARCH_CAP {
        return Err(Error::invalid(format!(
            "exact partition search handles at most {EXACT_SEARCH_CAP} attributes, got {}; \
             use the greedy search",
            inst.k
        )));
    }
    let depth = inst.k.min(4);
    let mut prefixes: Vec<(Vec<u8>, u8)> = Vec::new();
    {
        let mut a = vec![0u8; depth];
        extend_rgs(&mut a, 1, 0, &mut |p| {
            prefixes.push((p.to_vec(), *p.iter().max().unwrap()));
        });
    }
    let best = prefixes
        .into_par_iter()
        .map(|(prefix, max)| {
            let mut a = vec![0u8; inst.k];
            a[..depth].copy_from_slice(&prefix);
            let mut incumbent: Option<Best> = None;
            let mut visit = |rgs: &[u8]| {
                let bound = incumbent.as_ref().map_or(f64::INFINITY, |b| b.cost);
                if let Some(cost) = evaluate_rgs(rgs, &inst, mode, bound) {
                    let candidate = Best {
                        cost,
                        rgs: rgs.to_vec(),
                    };
                    if incumbent.as_ref().is_none_or(|b| candidate.better_than(b)) {
                        incumbent = Some(candidate);
                    }
                }
            };
            if depth == inst.k {
                visit(&a);
            } else {
                extend_rgs(&mut a, depth, max, &mut visit);
            }
            incumbent
        })
        .reduce(|| None, merge);
    let best = best.ok_or_else(|| {
        Error::Unattainable(
            "no valid partition: some marginal contains no block under any partition".into(),
        )
    })?;
    let plan = plan_from_rgs(&best.rgs, &inst, mode, false);
    validate_plan(&plan, queries, phi)?;
    Ok(plan)
}

/// Unpruned single-threaded reference: full enumeration, validity discovered
/// only when assigning, every partition costed to the end. Exists to prove
/// the pruned search returns the same optimum.
pub fn exhaustive_reference(
    queries: &[MarginalQuery],
    phi: &PhiEstimate,
    mode: AmplifyMode,
) -> Result<AmplificationPlan> {
    let inst = Instance::build(queries, phi)?;
    if inst.k == 0 || inst.k > EXACT_SEARCH_CAP {
        return Err(Error::invalid(format!(
            "reference search requires 1..={EXACT_SEARCH_CAP} attributes, got {}",
            inst.k
        )));
    }
    let mut best: Option<Best> = None;
    let mut a = vec![0u8; inst.k];
    extend_rgs(&mut a, 1, 0, &mut |rgs| {
        if let Some(cost) = evaluate_rgs(rgs, &inst, mode, f64::INFINITY) {
            let candidate = Best {
                cost,
                rgs: rgs.to_vec(),
            };
            if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                best = Some(candidate);
            }
        }
    });
    let best = best.ok_or_else(|| {
        Error::Unattainable(
            "no valid partition: some marginal contains no block under any partition".into(),
        )
    })?;
    let plan = plan_from_rgs(&best.rgs, &inst, mode, false);
    validate_plan(&plan, queries, phi)?;
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Greedy search and naive baseline
// ---------------------------------------------------------------------------

struct Candidate {
    /// (query index, block) pairs; equal blocks are merged at assembly.
    picks: Vec<(usize, Vec<usize>)>,
}

impl Candidate {
    fn cost(&self, inst: &Instance, mode: AmplifyMode) -> f64 {
        self.picks
            .iter()
            .map(|(q, block)| amplified_eps(inst.eps[*q], inst.set_factor(block), mode))
            .sum()
    }
}

/// The marginal whose amplification saves the most budget at its full-set
/// factor; ties break to the lowest query index.
fn most_profitable(inst: &Instance, comp: &[usize]) -> usize {
    *comp
        .iter()
        .max_by(|&&a, &&b| {
            let sa = (1.0 - inst.full_factor(a)) * inst.eps[a];
            let sb = (1.0 - inst.full_factor(b)) * inst.eps[b];
            sa.partial_cmp(&sb).unwrap().then(b.cmp(&a))
        })
        .unwrap()
}

/// Valid plan without enumeration, for any attribute count. Per overlap
/// component the cheapest of three constructions wins: one shared singleton
/// from the common intersection; a best singleton per marginal; or the most
/// profitable marginal's full set with disjoint singletons for the rest.
/// The last construction never costs more than the naive baseline, so the
/// greedy plan beats the baseline whenever no marginal's attribute set
/// contains another's. Heuristic: never claimed optimal.
pub fn greedy_partition(
    queries: &[MarginalQuery],
    phi: &PhiEstimate,
    mode: AmplifyMode,
) -> Result<AmplificationPlan> {
    let inst = Instance::build(queries, phi)?;
    let mut chosen: Vec<Candidate> = Vec::new();
    for comp in inst.components() {
        let mut candidates: Vec<Candidate> = Vec::new();
        let common = comp
            .iter()
            .skip(1)
            .fold(inst.sets[comp[0]].clone(), |acc, &q| intersect(&acc, &inst.sets[q]));
        if !common.is_empty() {
            let shared = vec![inst.wettest(&common)];
            candidates.push(Candidate {
                picks: comp.iter().map(|&q| (q, shared.clone())).collect(),
            });
        }
        candidates.push(Candidate {
            picks: comp
                .iter()
                .map(|&q| (q, vec![inst.wettest(&inst.sets[q])]))
                .collect(),
        });
        let star = most_profitable(&inst, &comp);
        let others_escape = comp
            .iter()
            .all(|&q| q == star || !is_subset(&inst.sets[q], &inst.sets[star]));
        if others_escape {
            let mut picks = vec![(star, inst.sets[star].clone())];
            for &q in &comp {
                if q != star {
                    let outside = difference(&inst.sets[q], &inst.sets[star]);
                    picks.push((q, vec![inst.wettest(&outside)]));
                }
            }
            candidates.push(Candidate { picks });
        }
        let winner = candidates
            .into_iter()
            .min_by(|a, b| {
                a.cost(&inst, mode)
                    .partial_cmp(&b.cost(&inst, mode))
                    .unwrap()
            })
            .unwrap();
        chosen.push(winner);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut assignment = vec![usize::MAX; inst.sets.len()];
    for cand in &chosen {
        for (q, block) in &cand.picks {
            let idx = match blocks.iter().position(|b| b == block) {
                Some(i) => i,
                None => {
                    blocks.push(block.clone());
                    blocks.len() - 1
                }
            };
            assignment[*q] = idx;
        }
    }
    let factors: Vec<f64> = blocks.iter().map(|b| inst.set_factor(b)).collect();
    let per_query: Vec<f64> = assignment
        .iter()
        .zip(&inst.eps)
        .map(|(&b, &eps)| amplified_eps(eps, factors[b], mode))
        .collect();
    let plan = AmplificationPlan {
        mode,
        heuristic: true,
        blocks,
        factors,
        assignment,
        per_query_epsilon: per_query.clone(),
        requested_epsilon: inst.eps.iter().sum(),
        amplified_epsilon: per_query.iter().sum(),
    };
    validate_plan(&plan, queries, phi)?;
    Ok(plan)
}

/// Amplify only the most profitable marginal of each overlap component at
/// its own full-set factor; every other marginal pays full price.
pub fn naive_baseline(
    queries: &[MarginalQuery],
    phi: &PhiEstimate,
    mode: AmplifyMode,
) -> Result<BaselineReport> {
    let inst = Instance::build(queries, phi)?;
    let mut factors = vec![1.0f64; inst.sets.len()];
    for comp in inst.components() {
        let star = most_profitable(&inst, &comp);
        factors[star] = inst.full_factor(star);
    }
    let amplified = factors
        .iter()
        .zip(&inst.eps)
        .map(|(&f, &e)| amplified_eps(e, f, mode))
        .sum();
    Ok(BaselineReport {
        mode,
        per_query_factor: factors,
        requested_epsilon: inst.eps.iter().sum(),
        amplified_epsilon: amplified,
    })
}

/// Machine-check a plan: disjoint sorted blocks, contained non-empty
/// assignments for every marginal, factors and costs consistent with φ and
/// the mode to 1e-9.
pub fn validate_plan(
    plan: &AmplificationPlan,
    queries: &[MarginalQuery],
    phi: &PhiEstimate,
) -> Result<()> {
    let inst = Instance::build(queries, phi)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    let mut seen = vec![false; inst.k];
    for block in &plan.blocks {
        if block.is_empty() {
            return Err(Error::invalid("plan contains an empty block"));
        }
        if block.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("plan block not sorted ascending"));
        }
        for &a in block {
            if a >= inst.k {
                return Err(Error::invalid(format!("plan block attribute {a} out of range")));
            }
            if seen[a] {
                return Err(Error::invalid(format!(
                    "attribute {a} appears in two blocks"
                )));
            }
            seen[a] = true;
        }
    }
    if plan.factors.len() != plan.blocks.len() {
        return Err(Error::invalid("factor count does not match block count"));
    }
    for (block, &factor) in plan.blocks.iter().zip(&plan.factors) {
        if !close(factor, inst.set_factor(block)) {
            return Err(Error::invalid(format!(
                "block factor {factor} inconsistent with phi"
            )));
        }
    }
    if plan.assignment.len() != inst.sets.len() || plan.per_query_epsilon.len() != inst.sets.len() {
        return Err(Error::invalid("assignment does not cover every marginal"));
    }
    let mut total = 0.0;
    for (i, (&b, set)) in plan.assignment.iter().zip(&inst.sets).enumerate() {
        if b >= plan.blocks.len() {
            return Err(Error::invalid(format!("marginal {i} assigned a missing block")));
        }
        if !is_subset(&plan.blocks[b], set) {
            return Err(Error::invalid(format!(
                "marginal {i} assigned a block outside its attributes"
            )));
        }
        let expect = amplified_eps(inst.eps[i], plan.factors[b], plan.mode);
        if !close(plan.per_query_epsilon[i], expect) {
            return Err(Error::invalid(format!(
                "marginal {i} amplified epsilon inconsistent with its block"
            )));
        }
        total += plan.per_query_epsilon[i];
    }
    if !close(plan.amplified_epsilon, total) {
        return Err(Error::invalid("total amplified epsilon inconsistent"));
    }
    if !close(plan.requested_epsilon, inst.eps.iter().sum()) {
        return Err(Error::invalid("total requested epsilon inconsistent"));
    }
    Ok(())
}
