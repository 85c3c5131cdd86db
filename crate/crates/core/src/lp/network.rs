//! Primal network simplex for uncapacitated-below, capacitated-above
//! min-cost flow: `min Σ c_e f_e` subject to flow conservation with node
//! supplies and `0 <= f_e <= cap_e`.
//!
//! The spanning tree is stored with parent pointers and doubly linked child
//! lists. An artificial root connected to every node by a big-cost arc gives
//! a strongly feasible starting tree; pivots keep the tree strongly feasible,
//! which rules out cycling under degeneracy. Pricing scans blocks of about
//! `sqrt(arcs)` arcs and takes the most negative reduced cost in the first
//! block that has one.

use crate::lp::{LinearProgram, LpError, Sense};
use crate::Scalar;

const NONE: usize = usize::MAX;
const UP: i8 = 1;
const DOWN: i8 = -1;
const LOWER: i8 = 1;
const UPPER: i8 = -1;
const TREE: i8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution<T> {
    pub status: FlowStatus,
    pub flow: Vec<T>,
    /// Node potentials with `cost_e + potential[src] - potential[dst] >= 0`
    /// on arcs at their lower bound and `<= 0` at their upper bound.
    pub potential: Vec<T>,
    pub cost: T,
    pub pivots: usize,
    /// Supply that could not be routed; positive only when infeasible.
    pub residual_supply: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowNetwork<T> {
    supply: Vec<T>,
    src: Vec<usize>,
    dst: Vec<usize>,
    cap: Vec<T>,
    cost: Vec<T>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new() -> Self {
        Self {
            supply: Vec::new(),
            src: Vec::new(),
            dst: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    /// Adds a node; positive supply is a source, negative a demand.
    pub fn add_node(&mut self, supply: T) -> usize {
        self.supply.push(supply);
        self.supply.len() - 1
    }

    /// Adds an arc with capacity `cap` (may be infinite) and unit cost.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: T, cost: T) -> usize {
        self.src.push(from);
        self.dst.push(to);
        self.cap.push(cap);
        self.cost.push(cost);
        self.src.len() - 1
    }

    pub fn set_supply(&mut self, node: usize, supply: T) {
        self.supply[node] = supply;
    }

    pub fn set_capacity(&mut self, arc: usize, cap: T) {
        self.cap[arc] = cap;
    }

    pub fn set_cost(&mut self, arc: usize, cost: T) {
        self.cost[arc] = cost;
    }

    pub fn n_nodes(&self) -> usize {
        self.supply.len()
    }

    pub fn n_arcs(&self) -> usize {
        self.src.len()
    }

    pub fn arc(&self, e: usize) -> (usize, usize, T, T) {
        (self.src[e], self.dst[e], self.cap[e], self.cost[e])
    }

    pub fn supply(&self, node: usize) -> T {
        self.supply[node]
    }

    /// The same problem written as a general linear program, one variable
    /// per arc and one balance row per node.
    pub fn to_lp(&self) -> LinearProgram<T> {
        let mut lp = LinearProgram::new();
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n_nodes()];
        for e in 0..self.n_arcs() {
            let v = lp.add_var(format!("f{e}"), T::zero(), self.cap[e], self.cost[e]);
            rows[self.src[e]].push((v, T::one()));
            rows[self.dst[e]].push((v, -T::one()));
        }
        for (u, coefs) in rows.into_iter().enumerate() {
            lp.add_row(format!("node{u}"), coefs, Sense::Eq, self.supply[u]);
        }
        lp
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_nodes();
        for e in 0..self.n_arcs() {
            if self.src[e] >= n || self.dst[e] >= n {
                return Err(LpError::Invalid(format!("arc {e} references a missing node")));
            }
            if self.src[e] == self.dst[e] {
                return Err(LpError::Invalid(format!("arc {e} is a self-loop")));
            }
            if !(self.cap[e] >= T::zero()) {
                return Err(LpError::Invalid(format!("arc {e} has negative capacity")));
            }
            if !self.cost[e].is_finite() {
                return Err(LpError::Invalid(format!("arc {e} has non-finite cost")));
            }
        }
        let mut total = T::zero();
        let mut scale = T::zero();
        for &s in &self.supply {
            if !s.is_finite() {
                return Err(LpError::Invalid("non-finite supply".into()));
            }
            total += s;
            scale += s.abs();
        }
        if total.abs() > T::lit(1e-9).max(T::epsilon() * T::lit(100.0)) * (T::one() + scale) {
            return Err(LpError::Invalid(format!("supplies sum to {total}, not zero")));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<FlowSolution<T>, LpError> {
        self.validate()?;
        let mut s = Solver::new(self);
        s.run()
    }
}

struct Solver<T> {
    n: usize,
    m: usize,
    src: Vec<usize>,
    dst: Vec<usize>,
    cap: Vec<T>,
    cost: Vec<T>,
    flow: Vec<T>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    depth: Vec<usize>,
    pi: Vec<T>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    eps: T,
    total_supply: T,
    next_arc: usize,
    block: usize,
    stack: Vec<usize>,
}

impl<T: Scalar> Solver<T> {
    fn new(net: &FlowNetwork<T>) -> Self {
        let n = net.n_nodes();
        let m = net.n_arcs();
        let root = n;
        let max_cost = net.cost.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
        let art = (max_cost + T::one()) * T::lit((n + 1) as f64);
        let mut src = net.src.clone();
        let mut dst = net.dst.clone();
        let mut cap = net.cap.clone();
        let mut cost = net.cost.clone();
        let mut flow = vec![T::zero(); m];
        let mut state = vec![LOWER; m];
        let mut parent = vec![NONE; n + 1];
        let mut pred = vec![NONE; n + 1];
        let mut pred_dir = vec![0i8; n + 1];
        let mut depth = vec![0usize; n + 1];
        let mut pi = vec![T::zero(); n + 1];
        let mut total_supply = T::zero();
        for u in 0..n {
            let s = net.supply[u];
            let e = m + u;
            if s >= T::zero() {
                src.push(u);
                dst.push(root);
                flow.push(s);
                pred_dir[u] = UP;
                pi[u] = -art;
                total_supply += s;
            } else {
                src.push(root);
                dst.push(u);
                flow.push(-s);
                pred_dir[u] = DOWN;
                pi[u] = art;
            }
            cap.push(T::infinity());
            cost.push(art);
            state.push(TREE);
            parent[u] = root;
            pred[u] = e;
            depth[u] = 1;
        }
        let mut first_child = vec![NONE; n + 1];
        let mut next_sib = vec![NONE; n + 1];
        let mut prev_sib = vec![NONE; n + 1];
        for u in (0..n).rev() {
            next_sib[u] = first_child[root];
            if first_child[root] != NONE {
                prev_sib[first_child[root]] = u;
            }
            first_child[root] = u;
        }
        let total = m + n;
        let block = ((total as f64).sqrt().ceil() as usize).max(10);
        let eps = T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) * (T::one() + max_cost);
        Self {
            n,
            m,
            src,
            dst,
            cap,
            cost,
            flow,
            state,
            parent,
            pred,
            pred_dir,
            depth,
            pi,
            first_child,
            next_sib,
            prev_sib,
            eps,
            total_supply,
            next_arc: 0,
            block,
            stack: Vec::new(),
        }
    }

    fn reduced(&self, e: usize) -> T {
        T::lit(self.state[e] as f64) * (self.cost[e] + self.pi[self.src[e]] - self.pi[self.dst[e]])
    }

    fn find_entering(&mut self) -> Option<usize> {
        let total = self.m + self.n;
        if total == 0 {
            return None;
        }
        let mut best = T::zero();
        let mut entering = NONE;
        let mut cnt = self.block;
        let mut e = self.next_arc;
        for _ in 0..total {
            let c = self.reduced(e);
            if c < best {
                best = c;
                entering = e;
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best < -self.eps {
                    self.next_arc = e;
                    return Some(entering);
                }
                cnt = self.block;
            }
        }
        if best < -self.eps {
            self.next_arc = e;
            Some(entering)
        } else {
            None
        }
    }

    fn join_node(&self, a: usize, b: usize) -> usize {
        let (mut u, mut v) = (a, b);
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn unlink(&mut self, w: usize) {
        let p = self.parent[w];
        let (pv, nx) = (self.prev_sib[w], self.next_sib[w]);
        if pv != NONE {
            self.next_sib[pv] = nx;
        } else {
            self.first_child[p] = nx;
        }
        if nx != NONE {
            self.prev_sib[nx] = pv;
        }
    }

    fn link(&mut self, w: usize, p: usize) {
        self.parent[w] = p;
        self.prev_sib[w] = NONE;
        let head = self.first_child[p];
        self.next_sib[w] = head;
        if head != NONE {
            self.prev_sib[head] = w;
        }
        self.first_child[p] = w;
    }

    fn run(&mut self) -> Result<FlowSolution<T>, LpError> {
        let mut pivots = 0usize;
        let limit = 50_000 + 200 * (self.n + self.m);
        while let Some(in_arc) = self.find_entering() {
            pivots += 1;
            if pivots > limit {
                return Err(LpError::IterationLimit(limit));
            }
            let (first, second) = if self.state[in_arc] == LOWER {
                (self.src[in_arc], self.dst[in_arc])
            } else {
                (self.dst[in_arc], self.src[in_arc])
            };
            let join = self.join_node(first, second);

            // leaving arc: strict on the first side, non-strict on the second
            let mut delta = self.cap[in_arc];
            let mut side = 0u8;
            let mut u_out = NONE;
            let mut out_to_upper = false;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                let (d, up) = if self.pred_dir[u] == DOWN {
                    (self.cap[e] - self.flow[e], true)
                } else {
                    (self.flow[e], false)
                };
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                    out_to_upper = up;
                }
                u = self.parent[u];
            }
            u = second;
            while u != join {
                let e = self.pred[u];
                let (d, up) = if self.pred_dir[u] == UP {
                    (self.cap[e] - self.flow[e], true)
                } else {
                    (self.flow[e], false)
                };
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                    out_to_upper = up;
                }
                u = self.parent[u];
            }
            if delta.is_infinite() {
                return Ok(self.finish(FlowStatus::Unbounded, pivots));
            }
            let delta = delta.max(T::zero());

            if delta > T::zero() {
                let val = T::lit(self.state[in_arc] as f64) * delta;
                self.flow[in_arc] += val;
                let mut w = self.src[in_arc];
                while w != join {
                    let e = self.pred[w];
                    self.flow[e] -= T::lit(self.pred_dir[w] as f64) * val;
                    w = self.parent[w];
                }
                w = self.dst[in_arc];
                while w != join {
                    let e = self.pred[w];
                    self.flow[e] += T::lit(self.pred_dir[w] as f64) * val;
                    w = self.parent[w];
                }
            }

            if side == 0 {
                // the entering arc hits its own opposite bound
                self.flow[in_arc] = if self.state[in_arc] == LOWER { self.cap[in_arc] } else { T::zero() };
                self.state[in_arc] = -self.state[in_arc];
                continue;
            }

            let out_arc = self.pred[u_out];
            self.flow[out_arc] = if out_to_upper { self.cap[out_arc] } else { T::zero() };
            self.state[out_arc] = if out_to_upper { UPPER } else { LOWER };
            self.state[in_arc] = TREE;

            let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
            self.reroot(in_arc, u_in, v_in, u_out);
        }
        Ok(self.finish(FlowStatus::Optimal, pivots))
    }

    /// Hangs the subtree cut off at `u_out` from `v_in` through `in_arc`,
    /// reversing the stem between `u_in` and `u_out`.
    fn reroot(&mut self, in_arc: usize, u_in: usize, v_in: usize, u_out: usize) {
        let mut path = vec![u_in];
        let mut w = u_in;
        while w != u_out {
            w = self.parent[w];
            path.push(w);
        }
        let old_pred: Vec<usize> = path.iter().map(|&w| self.pred[w]).collect();
        let old_dir: Vec<i8> = path.iter().map(|&w| self.pred_dir[w]).collect();
        for &w in &path {
            self.unlink(w);
        }
        self.link(u_in, v_in);
        self.pred[u_in] = in_arc;
        self.pred_dir[u_in] = if self.src[in_arc] == u_in { UP } else { DOWN };
        for t in 1..path.len() {
            let w = path[t];
            self.link(w, path[t - 1]);
            self.pred[w] = old_pred[t - 1];
            self.pred_dir[w] = -old_dir[t - 1];
        }

        // refresh depth and potential over the moved subtree
        self.stack.clear();
        self.stack.push(u_in);
        while let Some(w) = self.stack.pop() {
            let p = self.parent[w];
            let e = self.pred[w];
            self.depth[w] = self.depth[p] + 1;
            self.pi[w] = if self.pred_dir[w] == UP {
                self.pi[p] - self.cost[e]
            } else {
                self.pi[p] + self.cost[e]
            };
            let mut c = self.first_child[w];
            while c != NONE {
                self.stack.push(c);
                c = self.next_sib[c];
            }
        }
    }

    fn finish(&self, status: FlowStatus, pivots: usize) -> FlowSolution<T> {
        let root = self.n;
        let residual: T = (self.m..self.m + self.n)
            .filter(|&e| self.dst[e] == root)
            .map(|e| self.flow[e])
            .sum();
        let feas_tol = T::lit(1e-9).max(T::epsilon() * T::lit(100.0)) * (T::one() + self.total_supply);
        let status = if status == FlowStatus::Optimal && residual > feas_tol {
            FlowStatus::Infeasible
        } else {
            status
        };
        let flow: Vec<T> = self.flow[..self.m].to_vec();
        let cost = flow.iter().zip(&self.cost[..self.m]).map(|(&f, &c)| f * c).sum();
        FlowSolution {
            status,
            flow,
            potential: self.pi[..self.n].to_vec(),
            cost,
            pivots,
            residual_supply: residual,
        }
    }
}
