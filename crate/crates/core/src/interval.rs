//! Interval bound propagation through a network, optionally under a partial
//! phase assignment.

use crate::network::Network;
use crate::pwl::PwlFunction;
use crate::rational::Rational;

/// Closed interval with optional ends (`None` is unbounded).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Interval {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl Interval {
    pub fn new(lo: Option<Rational>, hi: Option<Rational>) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: Rational) -> Self {
        Self {
            lo: Some(v.clone()),
            hi: Some(v),
        }
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn contains(&self, v: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|l| l <= v) && self.hi.as_ref().is_none_or(|h| v <= h)
    }

    pub fn is_empty(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(l), Some(h)) if l > h)
    }

    /// `self * k`.
    pub fn scale(&self, k: &Rational) -> Interval {
        let lo = self.lo.as_ref().map(|v| v * k);
        let hi = self.hi.as_ref().map(|v| v * k);
        if k.is_negative() {
            Interval { lo: hi, hi: lo }
        } else if k.is_zero() {
            Interval::point(Rational::zero())
        } else {
            Interval { lo, hi }
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        let sum = |a: &Option<Rational>, b: &Option<Rational>| match (a, b) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Interval {
            lo: sum(&self.lo, &other.lo),
            hi: sum(&self.hi, &other.hi),
        }
    }

    pub fn shift(&self, c: &Rational) -> Interval {
        Interval {
            lo: self.lo.as_ref().map(|v| v + c),
            hi: self.hi.as_ref().map(|v| v + c),
        }
    }

    /// Intersection with `[lo, hi]`.
    pub fn clip(&self, lo: Option<&Rational>, hi: Option<&Rational>) -> Interval {
        let lo = match (&self.lo, lo) {
            (Some(a), Some(b)) => Some(a.max(b).clone()),
            (a, b) => a.clone().or(b.cloned()),
        };
        let hi = match (&self.hi, hi) {
            (Some(a), Some(b)) => Some(a.min(b).clone()),
            (a, b) => a.clone().or(b.cloned()),
        };
        Interval { lo, hi }
    }
}

/// Pre- and post-activation bounds of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeBounds {
    pub pre: Interval,
    pub post: Interval,
}

/// Per-layer bounds, indexed like the network layers.
pub type LayerBounds = Vec<Vec<NodeBounds>>;

/// Index of the single piece whose region contains `iv`, if there is one.
/// With `closed` the upper breakpoint also counts as inside.
pub fn single_piece(f: &PwlFunction, iv: &Interval, closed: bool) -> Option<usize> {
    if f.num_pieces() == 1 {
        return Some(0);
    }
    let lo = iv.lo.as_ref()?;
    let k = f.piece_index(lo);
    let inside = match (f.upper_breakpoint(k), &iv.hi) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(t), Some(h)) => h < t || (closed && h == t),
    };
    inside.then_some(k)
}

/// Propagates input bounds through the network. Nodes with a phase in
/// `phases` are restricted to that piece; returns `None` when a restriction
/// empties some interval. When `fix_known` is set, unfixed nodes whose
/// pre-activation lies inside a single piece get that phase recorded.
pub fn propagate(
    net: &Network,
    inputs: &[Interval],
    phases: &mut [Vec<Option<usize>>],
    closed: bool,
    fix_known: bool,
) -> Option<LayerBounds> {
    let mut out: LayerBounds = Vec::with_capacity(net.layers().len());
    for (l, layer) in net.layers().iter().enumerate() {
        let mut bounds = Vec::with_capacity(layer.len());
        for (i, node) in layer.iter().enumerate() {
            let mut pre = Interval::point(node.bias.clone());
            for (j, w) in node.weights.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                let src = match l {
                    0 => &inputs[j],
                    _ => &out[l - 1][j].post,
                };
                pre = pre.add(&src.scale(w));
            }
            let f = &node.activation;
            if fix_known && phases[l][i].is_none() && f.num_pieces() > 1 {
                phases[l][i] = single_piece(f, &pre, closed);
            }
            let post = match phases[l][i] {
                Some(k) if f.num_pieces() > 1 => {
                    let clipped = pre.clip(f.lower_breakpoint(k), f.upper_breakpoint(k));
                    let open_top = !closed && clipped.hi.is_some() && clipped.hi.as_ref() == f.upper_breakpoint(k);
                    if clipped.is_empty() || (open_top && clipped.lo == clipped.hi) {
                        return None;
                    }
                    pre = clipped;
                    let piece = &f.pieces()[k];
                    pre.scale(&piece.slope).shift(&piece.offset)
                }
                _ => {
                    let (lo, hi) = f.image(pre.lo.as_ref(), pre.hi.as_ref());
                    Interval::new(lo, hi)
                }
            };
            bounds.push(NodeBounds { pre, post });
        }
        out.push(bounds);
    }
    Some(out)
}

/// Propagation with no phase information.
pub fn plain_bounds(net: &Network, inputs: &[Interval]) -> LayerBounds {
    let mut phases: Vec<Vec<Option<usize>>> = net.layers().iter().map(|l| vec![None; l.len()]).collect();
    propagate(net, inputs, &mut phases, true, false).expect("no phases fixed")
}
