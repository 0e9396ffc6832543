//! 256-bit floats for reference computations.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, RoundingMode};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CC: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

#[derive(Debug, Clone)]
pub struct W(pub BigFloat);

pub fn w(x: f64) -> W {
    W(BigFloat::from_f64(x, P))
}

impl W {
    pub fn exp(&self) -> W {
        CC.with(|cc| W(self.0.exp(P, RM, &mut cc.borrow_mut())))
    }

    pub fn ln(&self) -> W {
        CC.with(|cc| W(self.0.ln(P, RM, &mut cc.borrow_mut())))
    }

    pub fn tanh(&self) -> W {
        CC.with(|cc| W(self.0.tanh(P, RM, &mut cc.borrow_mut())))
    }

    pub fn powi(&self, n: usize) -> W {
        W(self.0.powi(n, P, RM))
    }

    pub fn abs(&self) -> W {
        W(self.0.abs())
    }

    /// True when `|self - x| <= tol`.
    pub fn close_to(&self, x: f64, tol: f64) -> bool {
        (self.clone() - w(x)).abs() <= w(tol)
    }

    /// Nearest f64, for messages and tolerances.
    pub fn approx(&self) -> f64 {
        self.0.to_string().parse().unwrap_or(f64::NAN)
    }
}

impl PartialEq for W {
    fn eq(&self, other: &W) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for W {
    fn partial_cmp(&self, other: &W) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident) => {
        impl $tr for W {
            type Output = W;
            fn $f(self, rhs: W) -> W {
                W(self.0.$f(&rhs.0, P, RM))
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign for W {
    fn add_assign(&mut self, rhs: W) {
        self.0 = self.0.add(&rhs.0, P, RM);
    }
}

impl Neg for W {
    type Output = W;
    fn neg(self) -> W {
        W(self.0.neg())
    }
}
