//! Total-derivative expansion of `H(m, u(m))` over a set of derivative slots.
//!
//! `d^S H = Σ_π ∂^{a,b} H [p_s for m-blocks, u^B for u-blocks]` where `π`
//! runs over set partitions of `S` whose singleton blocks are labelled either
//! `m` (the direction itself) or `u` (a first state derivative), and whose
//! larger blocks are always `u`. Every term has coefficient one.

/// One term of the expansion. Slots are bit positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub m_slots: Vec<usize>,
    pub u_blocks: Vec<u32>,
}

impl Term {
    /// True for the term `∂H/∂u · u^S`.
    pub fn is_full_state_block(&self, mask: u32) -> bool {
        self.m_slots.is_empty() && self.u_blocks == [mask]
    }
}

/// All labelled partitions of `mask`. The empty mask has one empty term.
pub fn labeled_partitions(mask: u32) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = Term {
        m_slots: Vec::new(),
        u_blocks: Vec::new(),
    };
    recurse(mask, &mut cur, &mut out);
    out
}

fn recurse(rest: u32, cur: &mut Term, out: &mut Vec<Term>) {
    if rest == 0 {
        out.push(cur.clone());
        return;
    }
    let e = rest.trailing_zeros() as usize;
    let others = rest & !(1 << e);
    cur.m_slots.push(e);
    recurse(others, cur, out);
    cur.m_slots.pop();
    let mut sub = others;
    loop {
        cur.u_blocks.push((1 << e) | sub);
        recurse(others & !sub, cur, out);
        cur.u_blocks.pop();
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & others;
    }
}

/// Every `γ' ⊊ mask`, including the empty mask when `mask` is nonempty.
pub fn strict_submasks(mask: u32) -> Vec<u32> {
    let mut out = Vec::new();
    if mask == 0 {
        return out;
    }
    let mut sub = mask;
    loop {
        sub = sub.wrapping_sub(1) & mask;
        out.push(sub);
        if sub == 0 {
            break;
        }
    }
    out
}
