//! Forward and adjoint lattices of high-order state derivatives at a fixed
//! base point, and the two kinds of derivative-tensor actions built on them.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{HovdError, Result};
use crate::model::{ImplicitModel, StateSolver, Var};
use crate::multiindex::MultiIndex;
use crate::newton::{solve_state, StateSolution};
use crate::terms::{labeled_partitions, strict_submasks, Term};

type Node = Arc<OnceLock<std::result::Result<Arc<Vec<f64>>, String>>>;

/// Solve and action counters of an engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SolveCounts {
    /// Newton iterations spent on the base state.
    pub newton_iterations: u64,
    pub forward_solves: u64,
    pub adjoint_solves: u64,
    pub actions: u64,
}

impl SolveCounts {
    pub fn linear_solves(&self) -> u64 {
        self.forward_solves + self.adjoint_solves
    }
}

/// `u^β` for every sub-multiset `β` of a direction tuple. Labels are the
/// position of the first occurrence of each distinct direction.
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    pub alpha: MultiIndex,
    pub nodes: BTreeMap<MultiIndex, Vec<f64>>,
}

/// Derivatives of `m ↦ F(m, u(m))` at a fixed `m`.
///
/// State-derivative and adjoint vectors are cached by the exact bit
/// patterns of the directions involved, so repeated or permuted direction
/// tuples reuse earlier solves. Each cached vector is computed exactly once
/// even under concurrent access, which keeps the counters deterministic.
pub struct DerivativeEngine<M> {
    model: M,
    m: Vec<f64>,
    state: StateSolution,
    solver: Box<dyn StateSolver>,
    ids: Mutex<HashMap<Vec<u64>, u32>>,
    forward: Mutex<HashMap<Vec<u32>, Node>>,
    adjoint: Mutex<HashMap<(u32, Vec<u32>), Node>>,
    forward_solves: AtomicU64,
    adjoint_solves: AtomicU64,
    actions: AtomicU64,
}

impl<M: ImplicitModel> DerivativeEngine<M> {
    /// Solves the state at `m` and factorizes `∂G/∂u` there.
    pub fn new(model: M, m: Vec<f64>) -> Result<Self> {
        let state = solve_state(&model, &m)?;
        let solver = model.factorize_state_jacobian(&m, &state.u)?;
        Ok(Self {
            model,
            m,
            state,
            solver,
            ids: Mutex::new(HashMap::new()),
            forward: Mutex::new(HashMap::new()),
            adjoint: Mutex::new(HashMap::new()),
            forward_solves: AtomicU64::new(0),
            adjoint_solves: AtomicU64::new(0),
            actions: AtomicU64::new(0),
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn base_parameter(&self) -> &[f64] {
        &self.m
    }

    pub fn state(&self) -> &StateSolution {
        &self.state
    }

    /// `F(m, u(m))` at the base point.
    pub fn base_output(&self) -> Vec<f64> {
        self.model.output(&self.m, &self.state.u)
    }

    pub fn counts(&self) -> SolveCounts {
        SolveCounts {
            newton_iterations: self.state.iterations as u64,
            forward_solves: self.forward_solves.load(Ordering::SeqCst),
            adjoint_solves: self.adjoint_solves.load(Ordering::SeqCst),
            actions: self.actions.load(Ordering::SeqCst),
        }
    }

    /// Drops every cached lattice vector. Counters are kept.
    pub fn clear_cache(&self) {
        self.forward.lock().unwrap().clear();
        self.adjoint.lock().unwrap().clear();
        self.ids.lock().unwrap().clear();
    }

    fn intern(&self, v: &[f64]) -> u32 {
        let bits: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        let mut ids = self.ids.lock().unwrap();
        let next = ids.len() as u32;
        *ids.entry(bits).or_insert(next)
    }

    fn check_dirs(&self, dirs: &[&[f64]]) -> Result<()> {
        let n = self.model.param_dim();
        if let Some(bad) = dirs.iter().find(|d| d.len() != n) {
            return Err(HovdError::ShapeMismatch(format!(
                "direction has length {}, expected {n}",
                bad.len()
            )));
        }
        Ok(())
    }

    fn mask_key(ids: &[u32], mask: u32) -> Vec<u32> {
        let mut key: Vec<u32> = (0..ids.len()).filter(|&s| mask & (1 << s) != 0).map(|s| ids[s]).collect();
        key.sort_unstable();
        key
    }

    fn node<K: std::hash::Hash + Eq>(map: &Mutex<HashMap<K, Node>>, key: K) -> Node {
        map.lock().unwrap().entry(key).or_default().clone()
    }

    fn resolve(node: &Node, f: impl FnOnce() -> Result<Vec<f64>>) -> Result<Arc<Vec<f64>>> {
        node.get_or_init(|| f().map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(HovdError::Singular)
    }

    /// `u^B` for the slots in `mask`; the empty mask is the state itself.
    fn state_node(&self, dirs: &[&[f64]], ids: &[u32], mask: u32) -> Result<Arc<Vec<f64>>> {
        if mask == 0 {
            return Ok(Arc::new(self.state.u.clone()));
        }
        let node = Self::node(&self.forward, Self::mask_key(ids, mask));
        Self::resolve(&node, || {
            let mut b = vec![0.0; self.model.state_dim()];
            let mut any = false;
            for t in labeled_partitions(mask) {
                if t.is_full_state_block(mask) {
                    continue;
                }
                if let Some(g) = self.term_forward(dirs, ids, &t, Target::Residual)? {
                    any = true;
                    add_into(&mut b, &g);
                }
            }
            if !any {
                return Ok(b);
            }
            let mut x = self.solver.solve(&b)?;
            self.forward_solves.fetch_add(1, Ordering::SeqCst);
            for v in &mut x {
                *v = -*v;
            }
            Ok(x)
        })
    }

    fn block_values(&self, dirs: &[&[f64]], ids: &[u32], t: &Term) -> Result<Vec<Arc<Vec<f64>>>> {
        t.u_blocks
            .iter()
            .map(|&b| self.state_node(dirs, ids, b))
            .collect()
    }

    fn term_forward(&self, dirs: &[&[f64]], ids: &[u32], t: &Term, target: Target) -> Result<Option<Vec<f64>>> {
        let m_dirs: Vec<&[f64]> = t.m_slots.iter().map(|&s| dirs[s]).collect();
        let blocks = self.block_values(dirs, ids, t)?;
        let u_dirs: Vec<&[f64]> = blocks.iter().map(|v| v.as_slice()).collect();
        let (m, u) = (&self.m, &self.state.u);
        Ok(match target {
            Target::Residual => self.model.residual_partial(m, u, &m_dirs, &u_dirs),
            Target::Output => self.model.output_partial(m, u, &m_dirs, &u_dirs),
        })
    }

    fn term_adjoint(
        &self,
        dirs: &[&[f64]],
        ids: &[u32],
        t: &Term,
        target: Target,
        w: &[f64],
        free: Var,
    ) -> Result<Option<Vec<f64>>> {
        let m_dirs: Vec<&[f64]> = t.m_slots.iter().map(|&s| dirs[s]).collect();
        let blocks = self.block_values(dirs, ids, t)?;
        let u_dirs: Vec<&[f64]> = blocks.iter().map(|v| v.as_slice()).collect();
        let (m, u) = (&self.m, &self.state.u);
        Ok(match target {
            Target::Residual => self.model.residual_partial_adjoint(m, u, &m_dirs, &u_dirs, w, free),
            Target::Output => self.model.output_partial_adjoint(m, u, &m_dirs, &u_dirs, w, free),
        })
    }

    /// Sum over all labelled partitions of `mask` of adjoint terms with one
    /// extra open slot.
    fn adjoint_sum(
        &self,
        dirs: &[&[f64]],
        ids: &[u32],
        mask: u32,
        target: Target,
        w: &[f64],
        free: Var,
        out: &mut [f64],
    ) -> Result<()> {
        for t in labeled_partitions(mask) {
            if let Some(v) = self.term_adjoint(dirs, ids, &t, target, w, free)? {
                add_into(out, &v);
            }
        }
        Ok(())
    }

    /// `λ^γ` for the slots in `gamma`.
    fn adjoint_node(&self, dirs: &[&[f64]], ids: &[u32], q_id: u32, q: &[f64], gamma: u32) -> Result<Arc<Vec<f64>>> {
        let node = Self::node(&self.adjoint, (q_id, Self::mask_key(ids, gamma)));
        Self::resolve(&node, || {
            let mut c = vec![0.0; self.model.state_dim()];
            self.adjoint_sum(dirs, ids, gamma, Target::Output, q, Var::U, &mut c)?;
            for sub in strict_submasks(gamma) {
                let lambda = self.adjoint_node(dirs, ids, q_id, q, sub)?;
                self.adjoint_sum(dirs, ids, gamma & !sub, Target::Residual, &lambda, Var::U, &mut c)?;
            }
            let mut x = self.solver.solve_transpose(&c)?;
            self.adjoint_solves.fetch_add(1, Ordering::SeqCst);
            for v in &mut x {
                *v = -*v;
            }
            Ok(x)
        })
    }

    fn prepare(&self, dirs: &[&[f64]]) -> Result<Vec<u32>> {
        self.check_dirs(dirs)?;
        if dirs.len() > 31 {
            return Err(HovdError::Config("at most 31 derivative directions are supported".into()));
        }
        Ok(dirs.iter().map(|d| self.intern(d)).collect())
    }

    /// `u^α`, the total derivative of the state along `dirs`.
    pub fn state_derivative(&self, dirs: &[&[f64]]) -> Result<Vec<f64>> {
        let ids = self.prepare(dirs)?;
        let mask = (1u32 << dirs.len()) - 1;
        Ok(self.state_node(dirs, &ids, mask)?.as_ref().clone())
    }

    /// Every node of the forward lattice of `dirs`.
    pub fn forward_lattice(&self, dirs: &[&[f64]]) -> Result<LatticeSolution> {
        let ids = self.prepare(dirs)?;
        let labels: Vec<usize> = (0..ids.len())
            .map(|s| ids.iter().position(|&i| i == ids[s]).unwrap())
            .collect();
        let mut nodes = BTreeMap::new();
        for mask in 0..(1u32 << dirs.len()) {
            let beta = MultiIndex::new(
                (0..dirs.len())
                    .filter(|&s| mask & (1 << s) != 0)
                    .map(|s| labels[s])
                    .collect(),
            );
            if nodes.contains_key(&beta) {
                continue;
            }
            nodes.insert(beta, self.state_node(dirs, &ids, mask)?.as_ref().clone());
        }
        Ok(LatticeSolution {
            alpha: MultiIndex::new(labels),
            nodes,
        })
    }

    /// `S(p₁ … p_k, ·) = d^k F / dm^k [p₁ … p_k]`, a vector of length `N_q`.
    pub fn output_free(&self, dirs: &[&[f64]]) -> Result<Vec<f64>> {
        let ids = self.prepare(dirs)?;
        self.actions.fetch_add(1, Ordering::SeqCst);
        let mask = (1u32 << dirs.len()) - 1;
        let mut out = vec![0.0; self.model.output_dim()];
        for t in labeled_partitions(mask) {
            if let Some(v) = self.term_forward(dirs, &ids, &t, Target::Output)? {
                add_into(&mut out, &v);
            }
        }
        Ok(out)
    }

    /// `S(·, p₂ … p_k, q)`, a vector of length `N_m`. `dirs` holds the `k − 1`
    /// directions of the contracted derivative slots.
    pub fn mode_free(&self, dirs: &[&[f64]], q: &[f64]) -> Result<Vec<f64>> {
        if q.len() != self.model.output_dim() {
            return Err(HovdError::ShapeMismatch(format!(
                "output direction has length {}, expected {}",
                q.len(),
                self.model.output_dim()
            )));
        }
        let ids = self.prepare(dirs)?;
        self.actions.fetch_add(1, Ordering::SeqCst);
        let q_id = self.intern(q);
        let all = (1u32 << dirs.len()) - 1;
        let mut g = vec![0.0; self.model.param_dim()];
        self.adjoint_sum(dirs, &ids, all, Target::Output, q, Var::M, &mut g)?;
        let mut gamma = all;
        loop {
            let lambda = self.adjoint_node(dirs, &ids, q_id, q, gamma)?;
            self.adjoint_sum(dirs, &ids, all & !gamma, Target::Residual, &lambda, Var::M, &mut g)?;
            if gamma == 0 {
                break;
            }
            gamma = (gamma - 1) & all;
        }
        debug!("mode-free action of order {}", dirs.len() + 1);
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Residual,
    Output,
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
