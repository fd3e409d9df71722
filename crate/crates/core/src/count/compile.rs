//! Lowering of formulas to a slot-addressed program, and the machine that
//! evaluates it by exhaustive quantifier expansion.
//!
//! Every term node is attached to the innermost slot it depends on. Slots
//! are bound in a fixed nesting order (free variables outermost, then
//! quantifiers by depth), so assigning a slot only refreshes the nodes
//! attached to it, in topological order. Everything else, including σ^j
//! images of outer values, is reused as is; constants are computed once.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};
use crate::formula::{Formula, Term};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Node {
    Slot(u32),
    Const(u64),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Neg(u32),
    /// σ^j through the field's Frobenius map.
    Sigma(u32, u64),
    /// x^{p^e} through exponentiation.
    Frob(u32, u64),
}

#[derive(Debug)]
enum FNode {
    Eq(u32, u32),
    Not(Box<FNode>),
    And(Box<FNode>, Box<FNode>),
    Or(Box<FNode>, Box<FNode>),
    Implies(Box<FNode>, Box<FNode>),
    Exists(u32, Box<FNode>),
    Forall(u32, Box<FNode>),
}

#[derive(Debug)]
pub(crate) struct Program {
    nodes: Vec<Node>,
    slot_level: Vec<u32>,
    /// Nodes to refresh when slot `s` is assigned are
    /// `refresh[offsets[s]..offsets[s + 1]]`, children first.
    refresh: Vec<(u32, Node)>,
    offsets: Vec<usize>,
    constants: Vec<u32>,
    root: FNode,
}

struct Compiler<'a> {
    ctx: &'a FieldCtx,
    params: &'a BTreeMap<String, GFElem>,
    free: &'a [String],
    scope: Vec<(String, u32)>,
    nodes: Vec<Node>,
    dep: Vec<u32>,
    slot_level: Vec<u32>,
}

impl Compiler<'_> {
    fn push(&mut self, node: Node, dep: u32) -> u32 {
        self.nodes.push(node);
        self.dep.push(dep);
        (self.nodes.len() - 1) as u32
    }

    fn deeper(&self, a: u32, b: u32) -> u32 {
        let da = self.dep[a as usize];
        let db = self.dep[b as usize];
        match (da, db) {
            (NONE, _) => db,
            (_, NONE) => da,
            _ if self.slot_level[da as usize] >= self.slot_level[db as usize] => da,
            _ => db,
        }
    }

    fn term(&mut self, t: &Term) -> Result<u32> {
        Ok(match t {
            Term::Var(name) => {
                let slot = self
                    .scope
                    .iter()
                    .rev()
                    .find(|(v, _)| v == name)
                    .map(|&(_, s)| s)
                    .or_else(|| self.free.iter().position(|v| v == name).map(|i| i as u32))
                    .ok_or_else(|| LabError::MissingBinding(name.clone()))?;
                self.push(Node::Slot(slot), slot)
            }
            Term::Param(name) => {
                let e = self
                    .params
                    .get(name)
                    .ok_or_else(|| LabError::MissingParam(name.clone()))?;
                self.ctx.check(*e)?;
                self.push(Node::Const(e.index()), NONE)
            }
            Term::IntLit(v) => {
                let c = v % self.ctx.p();
                self.push(Node::Const(c), NONE)
            }
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                let x = self.term(a)?;
                let y = self.term(b)?;
                let d = self.deeper(x, y);
                let node = match t {
                    Term::Add(..) => Node::Add(x, y),
                    Term::Sub(..) => Node::Sub(x, y),
                    _ => Node::Mul(x, y),
                };
                self.push(node, d)
            }
            Term::Neg(a) => {
                let x = self.term(a)?;
                let d = self.dep[x as usize];
                self.push(Node::Neg(x), d)
            }
            Term::Sigma(j, a) => {
                let x = self.term(a)?;
                let d = self.dep[x as usize];
                self.push(Node::Sigma(x, *j as u64), d)
            }
            Term::FrobLit(a, e) => {
                let x = self.term(a)?;
                let d = self.dep[x as usize];
                self.push(Node::Frob(x, *e as u64), d)
            }
        })
    }

    fn formula(&mut self, f: &Formula) -> Result<FNode> {
        Ok(match f {
            Formula::Eq(a, b) => FNode::Eq(self.term(a)?, self.term(b)?),
            Formula::Not(a) => FNode::Not(Box::new(self.formula(a)?)),
            Formula::And(a, b) => FNode::And(Box::new(self.formula(a)?), Box::new(self.formula(b)?)),
            Formula::Or(a, b) => FNode::Or(Box::new(self.formula(a)?), Box::new(self.formula(b)?)),
            Formula::Implies(a, b) => {
                FNode::Implies(Box::new(self.formula(a)?), Box::new(self.formula(b)?))
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                let slot = self.slot_level.len() as u32;
                let level = (self.free.len() + self.scope.len()) as u32;
                self.slot_level.push(level);
                self.scope.push((v.clone(), slot));
                let inner = self.formula(body);
                self.scope.pop();
                let inner = Box::new(inner?);
                match f {
                    Formula::Exists(..) => FNode::Exists(slot, inner),
                    _ => FNode::Forall(slot, inner),
                }
            }
        })
    }
}

impl Program {
    /// Compiles `phi` with `free` occupying slots `0..free.len()` in that
    /// nesting order (slot 0 outermost).
    pub(crate) fn compile(
        ctx: &FieldCtx,
        phi: &Formula,
        free: &[String],
        params: &BTreeMap<String, GFElem>,
    ) -> Result<Program> {
        let mut c = Compiler {
            ctx,
            params,
            free,
            scope: Vec::new(),
            nodes: Vec::new(),
            dep: Vec::new(),
            slot_level: (0..free.len() as u32).collect(),
        };
        let root = c.formula(phi)?;
        let mut per_slot = vec![Vec::new(); c.slot_level.len()];
        let mut constants = Vec::new();
        for (i, &d) in c.dep.iter().enumerate() {
            if d == NONE {
                constants.push(i as u32);
            } else {
                per_slot[d as usize].push((i as u32, c.nodes[i]));
            }
        }
        let mut offsets = vec![0];
        for list in &per_slot {
            offsets.push(offsets.last().unwrap() + list.len());
        }
        Ok(Program {
            nodes: c.nodes,
            slot_level: c.slot_level,
            refresh: per_slot.concat(),
            offsets,
            constants,
            root,
        })
    }
}

/// Evaluation budget shared by all workers of one run.
pub(crate) struct Budget {
    pub(crate) limit: u64,
    used: AtomicU64,
    exceeded: AtomicBool,
    interval: u64,
}

impl Budget {
    pub(crate) fn new(limit: u64, workers: usize) -> Budget {
        Budget {
            limit,
            used: AtomicU64::new(0),
            exceeded: AtomicBool::new(false),
            interval: (limit / (8 * workers.max(1) as u64)).clamp(1, 1 << 14),
        }
    }

    pub(crate) fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    pub(crate) fn exceeded(&self) -> bool {
        self.exceeded.load(Ordering::Relaxed)
    }

    pub(crate) fn error(&self, context: String) -> LabError {
        LabError::BudgetExceeded {
            budget: self.limit,
            evaluated: self.used(),
            context: Some(context),
        }
    }
}

pub(crate) struct Machine<'a> {
    ctx: &'a FieldCtx,
    prog: &'a Program,
    budget: &'a Budget,
    slot_val: Vec<u64>,
    val: Vec<u64>,
    pending: u64,
    pub(crate) stop: bool,
}

impl<'a> Machine<'a> {
    pub(crate) fn new(ctx: &'a FieldCtx, prog: &'a Program, budget: &'a Budget) -> Self {
        let mut m = Machine {
            ctx,
            prog,
            budget,
            slot_val: vec![0; prog.slot_level.len()],
            val: vec![0; prog.nodes.len()],
            pending: 0,
            stop: false,
        };
        for &i in &prog.constants {
            m.compute(i as usize, prog.nodes[i as usize]);
        }
        m
    }

    #[inline]
    pub(crate) fn assign(&mut self, slot: usize, v: u64) {
        self.slot_val[slot] = v;
        let prog = self.prog;
        for &(i, node) in &prog.refresh[prog.offsets[slot]..prog.offsets[slot + 1]] {
            self.compute(i as usize, node);
        }
    }

    /// Pushes locally counted evaluations into the shared budget.
    pub(crate) fn flush(&mut self) {
        if self.pending > 0 {
            let used = self.budget.used.fetch_add(self.pending, Ordering::Relaxed) + self.pending;
            self.pending = 0;
            if used > self.budget.limit {
                self.budget.exceeded.store(true, Ordering::Relaxed);
            }
        }
        if self.budget.exceeded() {
            self.stop = true;
        }
    }

    #[inline]
    fn compute(&mut self, i: usize, node: Node) {
        let ctx = self.ctx;
        let val = &self.val;
        let v = match node {
            Node::Slot(s) => self.slot_val[s as usize],
            Node::Const(c) => c,
            Node::Add(a, b) => ctx.add_idx(val[a as usize], val[b as usize]),
            Node::Sub(a, b) => ctx.sub_idx(val[a as usize], val[b as usize]),
            Node::Mul(a, b) => ctx.mul_idx(val[a as usize], val[b as usize]),
            Node::Neg(a) => ctx.neg_idx(val[a as usize]),
            Node::Sigma(a, j) => ctx.sigma_pow_idx(val[a as usize], j),
            Node::Frob(a, e) => ctx.frob_pow_idx(val[a as usize], e),
        };
        self.val[i] = v;
    }

    pub(crate) fn eval_root(&mut self) -> bool {
        let prog = self.prog;
        self.eval(&prog.root)
    }

    fn eval(&mut self, f: &FNode) -> bool {
        match f {
            FNode::Eq(a, b) => {
                self.pending += 1;
                if self.pending >= self.budget.interval {
                    self.flush();
                }
                self.val[*a as usize] == self.val[*b as usize]
            }
            FNode::Not(a) => !self.eval(a),
            FNode::And(a, b) => self.eval(a) && self.eval(b),
            FNode::Or(a, b) => self.eval(a) || self.eval(b),
            FNode::Implies(a, b) => !self.eval(a) || self.eval(b),
            FNode::Exists(slot, body) => {
                for v in 0..self.ctx.q() {
                    self.assign(*slot as usize, v);
                    if self.eval(body) {
                        return true;
                    }
                    if self.stop {
                        return false;
                    }
                }
                false
            }
            FNode::Forall(slot, body) => {
                for v in 0..self.ctx.q() {
                    self.assign(*slot as usize, v);
                    if !self.eval(body) {
                        return false;
                    }
                    if self.stop {
                        return false;
                    }
                }
                true
            }
        }
    }
}
