//! Affine forms over loop variables and scalar parameters, plus the
//! range arithmetic the dependence and bounds analyses share.
//!
//! An index of the shape `a*var + b*param + c` becomes a term map; `=`
//! assumptions are substituted before any analysis so a pinned parameter
//! behaves like a constant.


use crate::regions::{AssumeRel, Assumption};
use std::collections::BTreeMap;

/// Variable occurring in an affine form. Loop variables are numbered by
/// nesting depth (outermost = 0) and tagged with a side so that two
/// iteration vectors of the same nest can coexist in one difference
/// expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AffVar {
    Loop { depth: usize, side: u8 },
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: BTreeMap<AffVar, i64>,
    pub konst: i64,
}

impl Affine {
    pub fn constant(c: i64) -> Affine {
        Affine {
            terms: BTreeMap::new(),
            konst: c,
        }
    }

    pub fn var(v: AffVar) -> Affine {
        let mut terms = BTreeMap::new();
        terms.insert(v, 1);
        Affine { terms, konst: 0 }
    }

    pub fn add(&self, other: &Affine) -> Affine {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            *out.terms.entry(v.clone()).or_insert(0) += c;
        }
        out.konst += other.konst;
        out.normalize()
    }

    pub fn sub(&self, other: &Affine) -> Affine {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, k: i64) -> Affine {
        let mut out = Affine {
            terms: self
                .terms
                .iter()
                .map(|(v, c)| (v.clone(), c * k))
                .collect(),
            konst: self.konst * k,
        };
        if k == 0 {
            out.terms.clear();
        }
        out.normalize()
    }

    fn normalize(mut self) -> Affine {
        self.terms.retain(|_, c| *c != 0);
        self
    }

    pub fn as_const(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.konst)
    }

    /// Exact division by `k`, only when every coefficient divides.
    pub fn div_exact(&self, k: i64) -> Option<Affine> {
        if k == 0 {
            return None;
        }
        if self.konst % k != 0 || self.terms.values().any(|c| c % k != 0) {
            return None;
        }
        Some(Affine {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c / k)).collect(),
            konst: self.konst / k,
        })
    }

    /// Rename all loop variables onto the given side.
    pub fn on_side(&self, side: u8) -> Affine {
        Affine {
            terms: self
                .terms
                .iter()
                .map(|(v, c)| {
                    let v = match v {
                        AffVar::Loop { depth, .. } => AffVar::Loop {
                            depth: *depth,
                            side,
                        },
                        p => p.clone(),
                    };
                    (v, *c)
                })
                .collect(),
            konst: self.konst,
        }
    }
}

/// Integer extended with infinities for range arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ext {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Ext {
    pub fn add(self, other: Ext) -> Ext {
        use Ext::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a.saturating_add(b)),
            (NegInf, PosInf) | (PosInf, NegInf) => Finite(0), // unused combination
            (NegInf, _) | (_, NegInf) => NegInf,
            (PosInf, _) | (_, PosInf) => PosInf,
        }
    }

    pub fn scale(self, k: i64) -> Ext {
        use Ext::*;
        match self {
            Finite(a) => Finite(a.saturating_mul(k)),
            NegInf => {
                if k > 0 {
                    NegInf
                } else if k < 0 {
                    PosInf
                } else {
                    Finite(0)
                }
            }
            PosInf => {
                if k > 0 {
                    PosInf
                } else if k < 0 {
                    NegInf
                } else {
                    Finite(0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: Ext,
    pub hi: Ext,
}

impl Range {
    pub const FULL: Range = Range {
        lo: Ext::NegInf,
        hi: Ext::PosInf,
    };

    pub fn exact(v: i64) -> Range {
        Range {
            lo: Ext::Finite(v),
            hi: Ext::Finite(v),
        }
    }
}

/// Bounds each parameter gets from the region assumptions. `=`
/// assumptions should already have been substituted away, but are
/// honored here as well.
pub fn param_ranges(assumptions: &[Assumption]) -> BTreeMap<String, Range> {
    let mut out: BTreeMap<String, Range> = BTreeMap::new();
    for a in assumptions {
        let r = out.entry(a.variable.key()).or_insert(Range::FULL);
        match a.relation {
            AssumeRel::Ge => {
                let lo = Ext::Finite(a.bound);
                if r.lo < lo {
                    r.lo = lo;
                }
            }
            AssumeRel::Le => {
                let hi = Ext::Finite(a.bound);
                if r.hi > hi {
                    r.hi = hi;
                }
            }
            AssumeRel::Eq => {
                *r = Range::exact(a.bound);
            }
        }
    }
    out
}

/// Range of an affine form given ranges for its variables. Missing
/// variables are unbounded.
pub fn affine_range(
    aff: &Affine,
    var_range: &dyn Fn(&AffVar) -> Range,
) -> Range {
    let mut lo = Ext::Finite(aff.konst);
    let mut hi = Ext::Finite(aff.konst);
    for (v, &c) in &aff.terms {
        let r = var_range(v);
        let (tlo, thi) = if c >= 0 {
            (r.lo.scale(c), r.hi.scale(c))
        } else {
            (r.hi.scale(c), r.lo.scale(c))
        };
        lo = lo.add(tlo);
        hi = hi.add(thi);
    }
    Range { lo, hi }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
