//! Piecewise-linear scalar functions.

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PwlError {
    #[error("a piecewise-linear function needs at least one piece")]
    NoPieces,
    #[error("{pieces} pieces need {expected} breakpoints, got {got}")]
    BreakpointCount {
        pieces: usize,
        expected: usize,
        got: usize,
    },
    #[error("breakpoints must be strictly increasing (index {0})")]
    NotIncreasing(usize),
}

/// One linear piece `slope * x + offset`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Piece {
    pub slope: Rational,
    pub offset: Rational,
}

impl Piece {
    pub fn new(slope: Rational, offset: Rational) -> Self {
        Self { slope, offset }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        &(&self.slope * x) + &self.offset
    }
}

/// A piecewise-linear function with `k` pieces and `k - 1` strictly
/// increasing breakpoints. Piece `i` covers `t_{i-1} <= x < t_i`; a
/// breakpoint belongs to the piece above it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PwlFunction {
    pieces: Vec<Piece>,
    breakpoints: Vec<Rational>,
}

impl PwlFunction {
    pub fn new(pieces: Vec<Piece>, breakpoints: Vec<Rational>) -> Result<Self, PwlError> {
        if pieces.is_empty() {
            return Err(PwlError::NoPieces);
        }
        if breakpoints.len() + 1 != pieces.len() {
            return Err(PwlError::BreakpointCount {
                pieces: pieces.len(),
                expected: pieces.len() - 1,
                got: breakpoints.len(),
            });
        }
        if let Some(i) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(PwlError::NotIncreasing(i + 1));
        }
        Ok(Self { pieces, breakpoints })
    }

    pub fn relu() -> Self {
        Self {
            pieces: vec![
                Piece::new(Rational::zero(), Rational::zero()),
                Piece::new(Rational::one(), Rational::zero()),
            ],
            breakpoints: vec![Rational::zero()],
        }
    }

    pub fn identity() -> Self {
        Self::affine(Rational::one(), Rational::zero())
    }

    pub fn affine(slope: Rational, offset: Rational) -> Self {
        Self {
            pieces: vec![Piece::new(slope, offset)],
            breakpoints: Vec::new(),
        }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_relu(&self) -> bool {
        matches!((self.pieces.as_slice(), self.breakpoints.as_slice()), ([p0, p1], [t])
            if t.is_zero() && p0.slope.is_zero() && p0.offset.is_zero() && p1.slope.is_one() && p1.offset.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.pieces.as_slice(), [p] if p.slope.is_one() && p.offset.is_zero())
    }

    /// Lower end of piece `i` (`None` for the first piece).
    pub fn lower_breakpoint(&self, i: usize) -> Option<&Rational> {
        i.checked_sub(1).map(|j| &self.breakpoints[j])
    }

    /// Upper end of piece `i`, exclusive (`None` for the last piece).
    pub fn upper_breakpoint(&self, i: usize) -> Option<&Rational> {
        self.breakpoints.get(i)
    }

    /// Index of the piece selected at `x`.
    pub fn piece_index(&self, x: &Rational) -> usize {
        self.breakpoints.partition_point(|t| t <= x)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Adjacent pieces agree at every breakpoint.
    pub fn is_continuous(&self) -> bool {
        self.breakpoints
            .iter()
            .enumerate()
            .all(|(j, t)| self.pieces[j].eval(t) == self.pieces[j + 1].eval(t))
    }

    /// Continuous with non-decreasing slopes, i.e. the pointwise maximum of
    /// its pieces.
    pub fn is_convex(&self) -> bool {
        self.is_continuous() && self.pieces.windows(2).all(|w| w[0].slope <= w[1].slope)
    }

    /// Continuous with non-increasing slopes, i.e. the pointwise minimum of
    /// its pieces.
    pub fn is_concave(&self) -> bool {
        self.is_continuous() && self.pieces.windows(2).all(|w| w[0].slope >= w[1].slope)
    }

    /// Bounds on the image of the closed interval `[lo, hi]`, where `None`
    /// marks an unbounded end. The bounds are exact for continuous functions;
    /// at a jump the open side contributes its limit.
    pub fn image(&self, lo: Option<&Rational>, hi: Option<&Rational>) -> (Option<Rational>, Option<Rational>) {
        let mut out_lo: Option<Option<Rational>> = None;
        let mut out_hi: Option<Option<Rational>> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            let p_lo = self.lower_breakpoint(i);
            let p_hi = self.upper_breakpoint(i);
            let start = match (lo, p_lo) {
                (Some(a), Some(b)) => Some(a.max(b).clone()),
                (a, b) => a.or(b).cloned(),
            };
            let (end, open_end) = match (hi, p_hi) {
                (Some(a), Some(b)) if a < b => (Some(a.clone()), false),
                (_, Some(b)) => (Some(b.clone()), true),
                (a, None) => (a.cloned(), false),
            };
            if let (Some(s), Some(e)) = (&start, &end) {
                if s > e || (open_end && s == e) {
                    continue;
                }
            }
            let mut values = Vec::with_capacity(2);
            for (x, at_start) in [(&start, true), (&end, false)] {
                match x {
                    Some(x) => values.push(Some(piece.eval(x))),
                    None if piece.slope.is_zero() => values.push(Some(piece.offset.clone())),
                    None => {
                        // x runs to -inf at the start and +inf at the end
                        let rising = piece.slope.is_positive() != at_start;
                        if rising {
                            out_hi = Some(None);
                        } else {
                            out_lo = Some(None);
                        }
                    }
                }
            }
            for v in values.into_iter().flatten() {
                match &out_lo {
                    Some(None) => {}
                    Some(Some(m)) if *m <= v => {}
                    _ => out_lo = Some(Some(v.clone())),
                }
                match &out_hi {
                    Some(None) => {}
                    Some(Some(m)) if *m >= v => {}
                    _ => out_hi = Some(Some(v)),
                }
            }
        }
        (out_lo.flatten(), out_hi.flatten())
    }
}

impl Default for PwlFunction {
    fn default() -> Self {
        Self::identity()
    }
}

/// Serialized shape of an activation in the network JSON format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationSpec {
    Named(String),
    General {
        pieces: Vec<(Rational, Rational)>,
        breakpoints: Vec<Rational>,
    },
}

impl From<&PwlFunction> for ActivationSpec {
    fn from(f: &PwlFunction) -> Self {
        if f.is_relu() {
            ActivationSpec::Named("relu".into())
        } else if f.is_identity() {
            ActivationSpec::Named("id".into())
        } else {
            ActivationSpec::General {
                pieces: f.pieces.iter().map(|p| (p.slope.clone(), p.offset.clone())).collect(),
                breakpoints: f.breakpoints.clone(),
            }
        }
    }
}

impl TryFrom<ActivationSpec> for PwlFunction {
    type Error = String;

    fn try_from(spec: ActivationSpec) -> Result<Self, Self::Error> {
        match spec {
            ActivationSpec::Named(name) => match name.as_str() {
                "relu" => Ok(PwlFunction::relu()),
                "id" | "identity" => Ok(PwlFunction::identity()),
                other => Err(format!("unknown activation `{other}`")),
            },
            ActivationSpec::General { pieces, breakpoints } => PwlFunction::new(
                pieces.into_iter().map(|(a, b)| Piece::new(a, b)).collect(),
                breakpoints,
            )
            .map_err(|e| e.to_string()),
        }
    }
}

/// Three-piece clamp of `x` to `[-1, 1]`.
pub fn hard_clamp() -> PwlFunction {
    PwlFunction::new(
        vec![
            Piece::new(Rational::zero(), -Rational::one()),
            Piece::new(Rational::one(), Rational::zero()),
            Piece::new(Rational::zero(), Rational::one()),
        ],
        vec![-Rational::one(), Rational::one()],
    )
    .expect("valid clamp")
}
