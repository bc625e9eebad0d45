//! Block composition: successive message pairs, and the two-pair interleave
//! that fills the idle uses of alternating-support designs.

use crate::channel::ChannelConfig;
use crate::design::DesignSolution;
use crate::error::{Error, Result};
use crate::scheme::{power_profile, Decoder};
use serde::Serialize;

/// Support threshold, relative to √P, for a use to count as idle.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Feedback coefficients below this magnitude on idle uses are dropped.
pub const COEFF_TOL: f64 = 1e-6;

/// Checks that an odd-N design sends User 1 only on odd uses and User 2 only
/// on even uses plus the last one (one-based), up to [`SUPPORT_TOL`]·√P RMS.
pub fn has_alternating_support(d: &DesignSolution) -> bool {
    alternating_support_violation(d).is_none()
}

fn alternating_support_violation(d: &DesignSolution) -> Option<String> {
    let n = d.scheme.n();
    if n % 2 == 0 {
        return Some(format!("alternating support needs odd N, got {n}"));
    }
    let floor = (SUPPORT_TOL * d.cfg.p.sqrt()).powi(2);
    let (e1, e2) = power_profile(&d.scheme, &d.cfg);
    for t in 0..n {
        if !x1_active(t) && e1[t] >= floor {
            return Some(format!("user 1 transmits {:e} at idle use {}", e1[t], t + 1));
        }
        if !x2_active(t, n) && e2[t] >= floor {
            return Some(format!("user 2 transmits {:e} at idle use {}", e2[t], t + 1));
        }
    }
    None
}

/// Zero-based use t carries x₁ in an alternating design.
fn x1_active(t: usize) -> bool {
    t % 2 == 0
}

fn x2_active(t: usize, n: usize) -> bool {
    t % 2 == 1 || t + 1 == n
}

#[derive(Clone, Debug)]
struct Step {
    pair: usize,
    t: usize,
}

/// Two alternating designs interleaved over 2n uses.
///
/// Pair A keeps its design positions and moves its last User-2 symbol to the
/// final use; pair B is shifted by one use and its last User-2 symbol, which
/// carries no feedback, opens the block.
#[derive(Clone, Debug)]
pub struct AlternatePlan {
    pub designs: [DesignSolution; 2],
    /// Composite use of each active x₁ position, per pair.
    pub x1_slot: [Vec<Option<usize>>; 2],
    pub x2_slot: [Vec<Option<usize>>; 2],
    x1_steps: Vec<Step>,
    x2_steps: Vec<Step>,
    /// Nonzero F₁[t, s] per pair and row, restricted to active columns.
    f1_taps: [Vec<Vec<(usize, f64)>>; 2],
    f2_taps: [Vec<Vec<(usize, f64)>>; 2],
    decoders: [Decoder; 2],
}

/// Transmit and receive sequences of a composite block.
#[derive(Clone, Debug, Default)]
pub struct CompositeTrace {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

/// Interleaves two designs built for N = 2n−1 uses into one block of 2n uses.
pub fn compose_alternate(design_a: &DesignSolution, design_b: &DesignSolution) -> Result<AlternatePlan> {
    let n = design_a.scheme.n();
    if design_b.scheme.n() != n {
        return Err(Error::InvalidArgument(format!(
            "designs have {n} and {} uses",
            design_b.scheme.n()
        )));
    }
    for d in [design_a, design_b] {
        if let Some(why) = alternating_support_violation(d) {
            return Err(Error::CompositionUnsupported(why));
        }
    }
    let total = n + 1;
    let mut x1_slot = [vec![None; n], vec![None; n]];
    let mut x2_slot = [vec![None; n], vec![None; n]];
    for t in 0..n {
        if x1_active(t) {
            x1_slot[0][t] = Some(t);
            x1_slot[1][t] = Some(t + 1);
        }
        if t + 1 == n {
            x2_slot[0][t] = Some(total - 1);
            x2_slot[1][t] = Some(0);
        } else if x2_active(t, n) {
            x2_slot[0][t] = Some(t);
            x2_slot[1][t] = Some(t + 1);
        }
    }

    let designs = [design_a.clone(), design_b.clone()];
    let mut f1_taps: [Vec<Vec<(usize, f64)>>; 2] = Default::default();
    let mut f2_taps: [Vec<Vec<(usize, f64)>>; 2] = Default::default();
    for p in 0..2 {
        let s = &designs[p].scheme;
        for t in 0..n {
            let mut row1 = Vec::new();
            let mut row2 = Vec::new();
            for c in 0..t {
                let (a, b) = (s.f1[(t, c)], s.f2[(t, c)]);
                if a != 0.0 {
                    match (x1_slot[p][t], x2_slot[p][c]) {
                        (Some(ut), Some(uc)) if uc < ut => row1.push((c, a)),
                        (Some(_), Some(_)) => return Err(noncausal(p, "F1", t, c)),
                        _ if a.abs() <= COEFF_TOL => {}
                        _ => return Err(idle_tap(p, "F1", t, c, a)),
                    }
                }
                if b != 0.0 {
                    match (x2_slot[p][t], x1_slot[p][c]) {
                        (Some(ut), Some(uc)) if uc < ut => row2.push((c, b)),
                        (Some(_), Some(_)) => return Err(noncausal(p, "F2", t, c)),
                        _ if b.abs() <= COEFF_TOL => {}
                        _ => return Err(idle_tap(p, "F2", t, c, b)),
                    }
                }
            }
            f1_taps[p].push(row1);
            f2_taps[p].push(row2);
        }
    }

    let mut x1_steps = vec![Step { pair: 0, t: 0 }; total];
    let mut x2_steps = vec![Step { pair: 0, t: 0 }; total];
    for p in 0..2 {
        for t in 0..n {
            if let Some(u) = x1_slot[p][t] {
                x1_steps[u] = Step { pair: p, t };
            }
            if let Some(u) = x2_slot[p][t] {
                x2_steps[u] = Step { pair: p, t };
            }
        }
    }
    let decoders = [
        Decoder::new(&designs[0].scheme, &designs[0].cfg)?,
        Decoder::new(&designs[1].scheme, &designs[1].cfg)?,
    ];
    Ok(AlternatePlan {
        designs,
        x1_slot,
        x2_slot,
        x1_steps,
        x2_steps,
        f1_taps,
        f2_taps,
        decoders,
    })
}

fn noncausal(p: usize, which: &str, t: usize, c: usize) -> Error {
    Error::CompositionUnsupported(format!(
        "pair {p}: {which}[{t}, {c}] would use a symbol that is not yet received"
    ))
}

fn idle_tap(p: usize, which: &str, t: usize, c: usize, v: f64) -> Error {
    Error::CompositionUnsupported(format!("pair {p}: {which}[{t}, {c}] = {v:e} touches an idle use"))
}

impl AlternatePlan {
    /// Uses per composite block, 2n.
    pub fn len(&self) -> usize {
        self.designs[0].scheme.n() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Channel over the composite block.
    pub fn composite_cfg(&self) -> ChannelConfig {
        self.designs[0].cfg.with_n(self.len())
    }

    /// Per-use expected powers of the composite block for both users.
    pub fn power_profile(&self) -> (Vec<f64>, Vec<f64>) {
        let mut e1 = vec![0.0; self.len()];
        let mut e2 = vec![0.0; self.len()];
        for p in 0..2 {
            let (a, b) = power_profile(&self.designs[p].scheme, &self.designs[p].cfg);
            for t in 0..a.len() {
                if let Some(u) = self.x1_slot[p][t] {
                    e1[u] += a[t];
                }
                if let Some(u) = self.x2_slot[p][t] {
                    e2[u] += b[t];
                }
            }
        }
        (e1, e2)
    }

    /// Total expected energies of the composite block.
    pub fn total_powers(&self) -> (f64, f64) {
        let (e1, e2) = self.power_profile();
        (e1.iter().sum(), e2.iter().sum())
    }

    /// Runs the composite block use by use. `m1[p]`, `m2[p]` are pair p's
    /// symbols; `n1`, `n2` are the composite noise sequences.
    pub fn run(&self, m1: [f64; 2], m2: [f64; 2], n1: &[f64], n2: &[f64]) -> Result<CompositeTrace> {
        let len = self.len();
        if n1.len() != len || n2.len() != len {
            return Err(Error::InvalidArgument(format!(
                "noise length {} / {}, block has {len} uses",
                n1.len(),
                n2.len()
            )));
        }
        let mut tr = CompositeTrace {
            x1: vec![0.0; len],
            x2: vec![0.0; len],
            y1: vec![0.0; len],
            y2: vec![0.0; len],
        };
        let mut scratch = Scratch::new(self.designs[0].scheme.n());
        self.run_into(m1, m2, n1, n2, &mut tr, &mut scratch);
        Ok(tr)
    }

    pub(crate) fn run_into(
        &self,
        m1: [f64; 2],
        m2: [f64; 2],
        n1: &[f64],
        n2: &[f64],
        tr: &mut CompositeTrace,
        sc: &mut Scratch,
    ) {
        for p in 0..2 {
            sc.x1[p].iter_mut().for_each(|v| *v = 0.0);
            sc.z1[p].iter_mut().for_each(|v| *v = 0.0);
        }
        for u in 0..self.len() {
            let a = &self.x1_steps[u];
            let s = &self.designs[a.pair].scheme;
            let x1: f64 = s.g1[a.t] * m1[a.pair]
                + self.f1_taps[a.pair][a.t]
                    .iter()
                    .map(|&(c, f)| f * sc.z1[a.pair][c])
                    .sum::<f64>();
            sc.x1[a.pair][a.t] = x1;

            let b = &self.x2_steps[u];
            let s = &self.designs[b.pair].scheme;
            let x2: f64 = s.g2[b.t] * m2[b.pair]
                + self.f2_taps[b.pair][b.t]
                    .iter()
                    .map(|&(c, f)| f * tr.y2[self.x1_slot[b.pair][c].expect("active tap")])
                    .sum::<f64>();

            tr.x1[u] = x1;
            tr.x2[u] = x2;
            tr.y2[u] = x1 + n1[u];
            tr.y1[u] = x2 + n2[u];
            // User 1 strips its own contribution from what User 2 relayed.
            let z: f64 = tr.y1[u]
                - self.f2_taps[b.pair][b.t]
                    .iter()
                    .map(|&(c, f)| f * sc.x1[b.pair][c])
                    .sum::<f64>();
            sc.z1[b.pair][b.t] = z;
        }
    }

    /// Decisions-free estimates: returns (m̃₂ per pair at User 1, m̃₁ per pair at User 2).
    pub fn estimate(&self, tr: &CompositeTrace, m1: [f64; 2], m2: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let mut sc = Scratch::new(self.designs[0].scheme.n());
        self.estimate_with(tr, m1, m2, &mut sc)
    }

    pub(crate) fn estimate_with(
        &self,
        tr: &CompositeTrace,
        m1: [f64; 2],
        m2: [f64; 2],
        sc: &mut Scratch,
    ) -> ([f64; 2], [f64; 2]) {
        let mut m2_hat = [0.0; 2];
        let mut m1_hat = [0.0; 2];
        for p in 0..2 {
            for t in 0..sc.ya.len() {
                sc.ya[t] = self.x2_slot[p][t].map_or(0.0, |u| tr.y1[u]);
                sc.yb[t] = self.x1_slot[p][t].map_or(0.0, |u| tr.y2[u]);
            }
            m2_hat[p] = self.decoders[p].estimate_m2(&sc.ya, m1[p], &mut sc.r);
            m1_hat[p] = self.decoders[p].estimate_m1(&sc.yb, m2[p]);
        }
        (m2_hat, m1_hat)
    }
}

/// Reusable buffers for [`AlternatePlan`] runs.
#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    x1: [Vec<f64>; 2],
    z1: [Vec<f64>; 2],
    ya: Vec<f64>,
    yb: Vec<f64>,
    r: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            x1: [vec![0.0; n], vec![0.0; n]],
            z1: [vec![0.0; n], vec![0.0; n]],
            ya: vec![0.0; n],
            yb: vec![0.0; n],
            r: vec![0.0; n],
        }
    }
}

/// How message pairs share a long block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    /// One pair after another, each on its own run of uses.
    Successive,
    /// Pairs interleaved two at a time.
    Alternate,
}

/// One message pair's place in a long block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairSlot {
    pub pair: usize,
    /// Index of the run of uses the pair shares (its own run in successive mode).
    pub group: usize,
    /// 0 for the unshifted pair of a group, 1 for the shifted one.
    pub lane: usize,
    /// First composite use of the group.
    pub offset: usize,
    /// Uses occupied by the group.
    pub uses: usize,
    /// Uses of the per-pair design.
    pub design_n: usize,
    /// Per-user energy budget of the per-pair design.
    pub budget: f64,
}

/// Schedule for exchanging L₁ and L₂ bits over `n_total` uses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongBlockPlan {
    pub mode: BlockMode,
    pub pairs: usize,
    /// Zero bits appended to each user's payload.
    pub pad1: usize,
    pub pad2: usize,
    pub slots: Vec<PairSlot>,
}

/// Splits the payloads into M = ⌈L/K⌉ message pairs and assigns uses and budgets.
pub fn plan_long_block(
    l1: usize,
    l2: usize,
    n_total: usize,
    k1: usize,
    k2: usize,
    mode: BlockMode,
    p: f64,
) -> Result<LongBlockPlan> {
    if k1 == 0 || k2 == 0 || l1 == 0 || l2 == 0 || n_total == 0 {
        return Err(Error::InvalidArgument("lengths and bits per symbol must be positive".into()));
    }
    let m1 = l1.div_ceil(k1);
    let m2 = l2.div_ceil(k2);
    if m1 != m2 {
        return Err(Error::InvalidArgument(format!(
            "users need {m1} and {m2} message pairs; padding cannot equalize them"
        )));
    }
    let m = m1;
    let slots = match mode {
        BlockMode::Successive => {
            if n_total % m != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{n_total} uses do not split into {m} equal runs"
                )));
            }
            let per = n_total / m;
            (0..m)
                .map(|i| PairSlot {
                    pair: i,
                    group: i,
                    lane: 0,
                    offset: i * per,
                    uses: per,
                    design_n: per,
                    budget: per as f64 * p,
                })
                .collect()
        }
        BlockMode::Alternate => {
            if m % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "alternate mode pairs messages two at a time, got {m}"
                )));
            }
            let groups = m / 2;
            if n_total % groups != 0 || (n_total / groups) % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{n_total} uses do not split into {groups} runs of even length"
                )));
            }
            let per = n_total / groups;
            (0..m)
                .map(|i| PairSlot {
                    pair: i,
                    group: i / 2,
                    lane: i % 2,
                    offset: (i / 2) * per,
                    uses: per,
                    design_n: per - 1,
                    budget: (per / 2) as f64 * p,
                })
                .collect()
        }
    };
    Ok(LongBlockPlan {
        mode,
        pairs: m,
        pad1: m * k1 - l1,
        pad2: m * k2 - l2,
        slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successive_six_pairs() {
        let plan = plan_long_block(6, 6, 18, 1, 1, BlockMode::Successive, 1.0).unwrap();
        assert_eq!(plan.pairs, 6);
        assert!(plan.slots.iter().all(|s| s.uses == 3 && s.design_n == 3 && s.budget == 3.0));
        assert_eq!(plan.slots[5].offset, 15);
    }

    #[test]
    fn alternate_two_pairs_share_the_block() {
        let plan = plan_long_block(6, 6, 18, 3, 3, BlockMode::Alternate, 1.0).unwrap();
        assert_eq!(plan.pairs, 2);
        assert_eq!(plan.slots[0].uses, 18);
        assert_eq!(plan.slots[1].lane, 1);
        assert_eq!(plan.slots[1].design_n, 17);
        assert_eq!(plan.slots[1].budget, 9.0);
    }

    #[test]
    fn odd_payload_is_padded() {
        let plan = plan_long_block(5, 5, 18, 2, 2, BlockMode::Successive, 1.0).unwrap();
        assert_eq!((plan.pairs, plan.pad1, plan.pad2), (3, 1, 1));
    }

    #[test]
    fn mismatched_pair_counts_are_rejected() {
        assert!(plan_long_block(6, 4, 18, 1, 1, BlockMode::Successive, 1.0).is_err());
        assert!(plan_long_block(6, 6, 18, 2, 2, BlockMode::Alternate, 1.0).is_err());
        assert!(plan_long_block(6, 6, 17, 1, 1, BlockMode::Successive, 1.0).is_err());
    }
}
