//! Dense row-major tensors with reverse-mode automatic differentiation.
//!
//! Every operation records the tensors it consumed, forming an implicit
//! tape ordered by creation id. `backward` walks that tape once in
//! reverse, accumulating adjoints into `requires_grad` leaves. Tensors
//! are immutable after creation except for leaf value updates performed
//! between steps by an optimizer; graphs never outlive the step that
//! built them.
//!
//! When no input of an operation requires a gradient the op link is not
//! recorded, so inference-only forwards free intermediate buffers as soon
//! as their handles drop. The timed benchmark paths rely on this.

mod backward;
pub mod finite_diff;
pub mod gemm;
pub mod init;
mod ops;
pub mod shape;


pub use ops::concat;

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Element dtype of a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "float32",
            DType::F64 => "float64",
        }
    }
}

impl std::str::FromStr for DType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float32" | "f32" => Ok(DType::F32),
            "float64" | "f64" => Ok(DType::F64),
            other => Err(Error::config(format!("unknown dtype `{other}`"))),
        }
    }
}

/// Scalar element of a tensor. Implemented for f32 and f64 only.
pub trait Elem:
    'static
    + Copy
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
{
    const DTYPE: DType;
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    fn is_finite(self) -> bool;

    /// Raw strided gemm kernel; see `gemm::gemm_slices` for the safe entry.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_elem {
    ($t:ty, $dtype:expr, $kernel:path) => {
        impl Elem for $t {
            const DTYPE: DType = $dtype;
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                self.exp()
            }
            #[inline]
            fn ln(self) -> Self {
                self.ln()
            }
            #[inline]
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            #[inline]
            fn abs(self) -> Self {
                self.abs()
            }
            #[inline]
            fn maximum(self, other: Self) -> Self {
                self.max(other)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            unsafe fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: *const Self,
                rsa: isize,
                csa: isize,
                b: *const Self,
                rsb: isize,
                csb: isize,
                beta: Self,
                c: *mut Self,
                rsc: isize,
                csc: isize,
            ) {
                $kernel(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_elem!(f32, DType::F32, matrixmultiply::sgemm);
impl_elem!(f64, DType::F64, matrixmultiply::dgemm);

/// Guard added to every elementwise-division denominator so that masses
/// that shrink toward zero produce large-but-finite quotients.
pub const DIV_GUARD: f64 = 1e-9;

/// Offset added to disallowed attention logits before softmax.
pub const CAUSAL_MASK_OFFSET: f64 = -1e9;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Process-wide tensor allocation counters, used by the benchmark to
/// witness that the linear-attention path never materializes a buffer
/// quadratic in sequence length.
pub mod alloc_stats {
    use std::sync::atomic::{AtomicU64, Ordering};

    static TOTAL_ELEMS: AtomicU64 = AtomicU64::new(0);
    static MAX_SINGLE: AtomicU64 = AtomicU64::new(0);

    pub(super) fn record(elems: usize) {
        TOTAL_ELEMS.fetch_add(elems as u64, Ordering::Relaxed);
        MAX_SINGLE.fetch_max(elems as u64, Ordering::Relaxed);
    }

    pub fn reset() {
        TOTAL_ELEMS.store(0, Ordering::Relaxed);
        MAX_SINGLE.store(0, Ordering::Relaxed);
    }

    /// Elements of the largest single tensor allocated since `reset`.
    pub fn max_single_elems() -> u64 {
        MAX_SINGLE.load(Ordering::Relaxed)
    }

    /// Total elements allocated since `reset`.
    pub fn total_elems() -> u64 {
        TOTAL_ELEMS.load(Ordering::Relaxed)
    }
}

/// Integer token matrix (batch rows by time columns), the id-valued
/// companion to float tensors for embedding lookups and loss targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub ids: Vec<u32>,
    pub rows: usize,
    pub cols: usize,
}

impl TokenBatch {
    pub fn new(ids: Vec<u32>, rows: usize, cols: usize) -> Result<Self> {
        if ids.len() != rows * cols {
            return Err(Error::dim(format!(
                "token buffer of {} ids does not fill {}x{}",
                ids.len(),
                rows,
                cols
            )));
        }
        Ok(TokenBatch { ids, rows, cols })
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.ids[r * self.cols..(r + 1) * self.cols]
    }
}

pub(crate) enum Op<E: Elem> {
    Leaf,
    Matmul {
        a: Tensor<E>,
        b: Tensor<E>,
        ta: bool,
        tb: bool,
        alpha: E,
    },
    Add {
        a: Tensor<E>,
        b: Tensor<E>,
    },
    Sub {
        a: Tensor<E>,
        b: Tensor<E>,
    },
    Mul {
        a: Tensor<E>,
        b: Tensor<E>,
    },
    /// Guarded division a / (b + DIV_GUARD).
    Div {
        a: Tensor<E>,
        b: Tensor<E>,
    },
    MulScalar {
        a: Tensor<E>,
        s: E,
    },
    Relu {
        a: Tensor<E>,
    },
    Softmax {
        a: Tensor<E>,
        axis: usize,
    },
    Cumsum {
        a: Tensor<E>,
        axis: usize,
    },
    SumAxis {
        a: Tensor<E>,
        axis: usize,
    },
    SumAll {
        a: Tensor<E>,
    },
    MeanAll {
        a: Tensor<E>,
    },
    Concat {
        parts: Vec<Tensor<E>>,
        axis: usize,
    },
    Slice {
        a: Tensor<E>,
        axis: usize,
        start: usize,
        len: usize,
    },
    Reshape {
        a: Tensor<E>,
    },
    Embedding {
        table: Tensor<E>,
        ids: Rc<Vec<u32>>,
    },
    CausalConv1d {
        x: Tensor<E>,
        filter: Tensor<E>,
        bias: Tensor<E>,
    },
    LayerNorm {
        x: Tensor<E>,
        gain: Tensor<E>,
        bias: Tensor<E>,
        eps: E,
    },
    /// Mean cross-entropy in nats over flattened rows of logits.
    CrossEntropy {
        logits: Tensor<E>,
        targets: Rc<Vec<u32>>,
    },
}

impl<E: Elem> Op<E> {
    fn for_each_input(&self, mut f: impl FnMut(&Tensor<E>)) {
        match self {
            Op::Leaf => {}
            Op::Matmul { a, b, .. }
            | Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::Div { a, b } => {
                f(a);
                f(b);
            }
            Op::MulScalar { a, .. }
            | Op::Relu { a }
            | Op::Softmax { a, .. }
            | Op::Cumsum { a, .. }
            | Op::SumAxis { a, .. }
            | Op::SumAll { a }
            | Op::MeanAll { a }
            | Op::Slice { a, .. }
            | Op::Reshape { a } => f(a),
            Op::Concat { parts, .. } => {
                for p in parts {
                    f(p);
                }
            }
            Op::Embedding { table, .. } => f(table),
            Op::CausalConv1d { x, filter, bias } => {
                f(x);
                f(filter);
                f(bias);
            }
            Op::LayerNorm { x, gain, bias, .. } => {
                f(x);
                f(gain);
                f(bias);
            }
            Op::CrossEntropy { logits, .. } => f(logits),
        }
    }
}

struct Inner<E: Elem> {
    id: u64,
    shape: Vec<usize>,
    values: RefCell<Vec<E>>,
    grad: RefCell<Option<Vec<E>>>,
    op: Op<E>,
    requires_grad: bool,
}

/// Cheap-to-clone handle to an immutable tensor node.
pub struct Tensor<E: Elem>(Rc<Inner<E>>);

impl<E: Elem> Clone for Tensor<E> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<E: Elem> fmt::Debug for Tensor<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={}, dtype={}, grad={})",
            self.0.id,
            shape::fmt_shape(&self.0.shape),
            E::DTYPE.name(),
            self.0.requires_grad
        )
    }
}

impl<E: Elem> Tensor<E> {
    fn from_parts(shape: Vec<usize>, values: Vec<E>, op: Op<E>, requires_grad: bool) -> Self {
        debug_assert_eq!(shape::numel(&shape), values.len());
        alloc_stats::record(values.len());
        Tensor(Rc::new(Inner {
            id: fresh_id(),
            shape,
            values: RefCell::new(values),
            grad: RefCell::new(None),
            op,
            requires_grad,
        }))
    }

    /// Constant leaf (no gradient).
    pub fn new(shape: &[usize], values: Vec<E>) -> Result<Self> {
        if shape::numel(shape) != values.len() {
            return Err(Error::dim(format!(
                "value buffer of {} elements does not fill shape {}",
                values.len(),
                shape::fmt_shape(shape)
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), values, Op::Leaf, false))
    }

    /// Trainable leaf: participates in backward.
    pub fn param(shape: &[usize], values: Vec<E>) -> Result<Self> {
        if shape::numel(shape) != values.len() {
            return Err(Error::dim(format!(
                "value buffer of {} elements does not fill shape {}",
                values.len(),
                shape::fmt_shape(shape)
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), values, Op::Leaf, true))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_parts(
            shape.to_vec(),
            vec![E::ZERO; shape::numel(shape)],
            Op::Leaf,
            false,
        )
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::from_parts(
            shape.to_vec(),
            vec![E::ONE; shape::numel(shape)],
            Op::Leaf,
            false,
        )
    }

    pub fn scalar(v: E) -> Self {
        Self::from_parts(vec![], vec![v], Op::Leaf, false)
    }

    pub(crate) fn from_op(shape: Vec<usize>, values: Vec<E>, op: Op<E>) -> Self {
        let mut requires = false;
        op.for_each_input(|t| requires |= t.0.requires_grad);
        // Dropping the links when no gradient can flow lets buffers free
        // eagerly during inference and keeps the tape minimal.
        let op = if requires { op } else { Op::Leaf };
        Self::from_parts(shape, values, op, requires)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn numel(&self) -> usize {
        self.0.values.borrow().len()
    }

    pub fn dtype(&self) -> DType {
        E::DTYPE
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.0.op, Op::Leaf)
    }

    /// Two handles referring to the same storage node.
    pub fn same(a: &Tensor<E>, b: &Tensor<E>) -> bool {
        Rc::ptr_eq(&a.0, &b.0)
    }

    /// Constant-leaf copy of the current values: computations from it
    /// record nothing and free intermediates eagerly.
    pub fn detached(&self) -> Tensor<E> {
        Self::from_parts(self.0.shape.clone(), self.to_vec(), Op::Leaf, false)
    }

    pub fn values(&self) -> Ref<'_, Vec<E>> {
        self.0.values.borrow()
    }

    pub fn to_vec(&self) -> Vec<E> {
        self.0.values.borrow().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.values.borrow().iter().map(|v| v.to_f64()).collect()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<E> {
        let v = self.0.values.borrow();
        if v.len() != 1 {
            return Err(Error::contract(format!(
                "item() on tensor of shape {}",
                shape::fmt_shape(&self.0.shape)
            )));
        }
        Ok(v[0])
    }

    /// Overwrite leaf values in place (optimizer updates).
    pub fn set_values(&self, values: &[E]) -> Result<()> {
        let mut v = self.0.values.borrow_mut();
        if v.len() != values.len() {
            return Err(Error::dim(format!(
                "set_values: {} elements into tensor of {}",
                values.len(),
                v.len()
            )));
        }
        v.copy_from_slice(values);
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<E>> {
        self.0.grad.borrow().clone()
    }

    /// Gradient buffer, zeros when backward never reached this leaf.
    pub fn grad_or_zeros(&self) -> Vec<E> {
        self.0
            .grad
            .borrow()
            .clone()
            .unwrap_or_else(|| vec![E::ZERO; self.numel()])
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[E]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(buf) => {
                for (dst, src) in buf.iter_mut().zip(g) {
                    *dst += *src;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    pub(crate) fn op(&self) -> &Op<E> {
        &self.0.op
    }

    /// Ids of the distinct `requires_grad` leaf nodes reachable from
    /// this tensor; a parameter used many times appears once.
    pub fn grad_leaf_ids(&self) -> std::collections::HashSet<u64> {
        let mut seen = std::collections::HashSet::new();
        let mut leaves = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.0.id) {
                continue;
            }
            if t.is_leaf() {
                if t.requires_grad() {
                    leaves.insert(t.0.id);
                }
            } else {
                t.0.op.for_each_input(|inp| stack.push(inp.clone()));
            }
        }
        leaves
    }

    /// Walk the recorded graph reachable from this tensor.
    pub fn graph_stats(&self) -> GraphStats {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut stats = GraphStats::default();
        while let Some(t) = stack.pop() {
            if !seen.insert(t.0.id) {
                continue;
            }
            let elems = shape::numel(&t.0.shape) as u64;
            if !t.is_leaf() {
                stats.op_nodes += 1;
                stats.total_output_elems += elems;
                stats.max_output_elems = stats.max_output_elems.max(elems);
                t.0.op.for_each_input(|inp| stack.push(inp.clone()));
            }
        }
        stats
    }
}

/// Size accounting for a recorded computation, used as the complexity
/// witness in scaling tests: op node count is the tape length, element
/// totals expose where quadratic buffers appear.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct GraphStats {
    pub op_nodes: u64,
    pub total_output_elems: u64,
    pub max_output_elems: u64,
}
