//! Arithmetic rate expressions over species concentrations, time and
//! sample temperature.
//!
//! These back general (non mass-action) kinetics and observer reports. They
//! support numeric evaluation, symbolic differentiation with zero-dropping
//! simplification, and printing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::crn::SpeciesId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Built-in elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Abs,
    Min,
    Max,
    /// Heaviside step, `step(0) = 1`.
    Step,
    Sign,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "step" => Func::Step,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Step => "step",
            Func::Sign => "sign",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn apply(self, args: &[f64]) -> f64 {
        let x = args[0];
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Abs => x.abs(),
            Func::Min => x.min(args[1]),
            Func::Max => x.max(args[1]),
            Func::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Functions with kinks or jumps.
    pub fn is_nonsmooth(self) -> bool {
        matches!(self, Func::Abs | Func::Min | Func::Max | Func::Step | Func::Sign)
    }
}

/// Piecewise-linear interpolant over a sampled series; constant beyond the
/// ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return 0.0;
        }
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        if t1 == t0 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateExpr {
    Const(f64),
    Species(SpeciesId),
    Time,
    Temperature,
    Neg(Box<RateExpr>),
    Bin(BinOp, Box<RateExpr>, Box<RateExpr>),
    Call(Func, Vec<RateExpr>),
    Waveform(Arc<Waveform>, Box<RateExpr>),
}

/// Values that a [`RateExpr`] reads when evaluated.
pub trait EvalEnv {
    fn species(&self, id: SpeciesId) -> f64;
    fn time(&self) -> f64;
    fn temperature(&self) -> f64;
}

#[allow(clippy::should_implement_trait)]
impl RateExpr {
    pub fn constant(v: f64) -> Self {
        RateExpr::Const(v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            RateExpr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn add(a: RateExpr, b: RateExpr) -> RateExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => RateExpr::Const(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => RateExpr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: RateExpr, b: RateExpr) -> RateExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => RateExpr::Const(x - y),
            (Some(0.0), _) => RateExpr::neg(b),
            (_, Some(0.0)) => a,
            _ => RateExpr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: RateExpr, b: RateExpr) -> RateExpr {
        if a.is_zero() || b.is_zero() {
            return RateExpr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => RateExpr::Const(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => RateExpr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: RateExpr, b: RateExpr) -> RateExpr {
        if a.is_zero() {
            return RateExpr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => RateExpr::Const(x / y),
            _ if b.is_one() => a,
            _ => RateExpr::Bin(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: RateExpr, b: RateExpr) -> RateExpr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => RateExpr::Const(x.powf(y)),
            (_, Some(1.0)) => a,
            (_, Some(0.0)) => RateExpr::Const(1.0),
            _ => RateExpr::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: RateExpr) -> RateExpr {
        match a {
            RateExpr::Const(v) => RateExpr::Const(-v),
            RateExpr::Neg(inner) => *inner,
            other => RateExpr::Neg(Box::new(other)),
        }
    }

    pub fn call(f: Func, args: Vec<RateExpr>) -> RateExpr {
        if args.iter().all(|a| a.as_const().is_some()) {
            let vals: Vec<f64> = args.iter().filter_map(RateExpr::as_const).collect();
            return RateExpr::Const(f.apply(&vals));
        }
        RateExpr::Call(f, args)
    }

    pub fn eval(&self, env: &dyn EvalEnv) -> f64 {
        match self {
            RateExpr::Const(v) => *v,
            RateExpr::Species(s) => env.species(*s),
            RateExpr::Time => env.time(),
            RateExpr::Temperature => env.temperature(),
            RateExpr::Neg(a) => -a.eval(env),
            RateExpr::Bin(op, a, b) => {
                let (x, y) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            RateExpr::Call(f, args) => {
                let vals: Vec<f64> = args.iter().map(|a| a.eval(env)).collect();
                f.apply(&vals)
            }
            RateExpr::Waveform(w, arg) => w.at(arg.eval(env)),
        }
    }

    pub fn species(&self) -> Vec<SpeciesId> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let RateExpr::Species(s) = e {
                out.push(*s);
            }
        });
        out.sort();
        out.dedup();
        out
    }

    pub fn depends_on(&self, id: SpeciesId) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, RateExpr::Species(s) if *s == id) {
                found = true;
            }
        });
        found
    }

    pub fn depends_on_time(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, RateExpr::Time) {
                found = true;
            }
        });
        found
    }

    fn depends_on_state(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, RateExpr::Species(_)) {
                found = true;
            }
        });
        found
    }

    fn visit(&self, f: &mut dyn FnMut(&RateExpr)) {
        f(self);
        match self {
            RateExpr::Neg(a) => a.visit(f),
            RateExpr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            RateExpr::Call(_, args) => args.iter().for_each(|a| a.visit(f)),
            RateExpr::Waveform(_, a) => a.visit(f),
            _ => {}
        }
    }

    /// True when a non-smooth function is applied to an argument that
    /// depends on species concentrations, i.e. the expression may not be
    /// differentiable in the state.
    pub fn has_state_kink(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| match e {
            RateExpr::Call(f, args) if f.is_nonsmooth() && args.iter().any(RateExpr::depends_on_state) => found = true,
            RateExpr::Waveform(_, arg) if arg.depends_on_state() => found = true,
            _ => {}
        });
        found
    }

    /// Times at which a non-smooth function of time alone switches: roots of
    /// time-affine arguments of step/abs/sign/min/max, plus waveform knots
    /// when the waveform is driven directly by time.
    pub fn time_breakpoints(&self) -> Vec<f64> {
        struct At(f64);
        impl EvalEnv for At {
            fn species(&self, _: SpeciesId) -> f64 {
                0.0
            }
            fn time(&self) -> f64 {
                self.0
            }
            fn temperature(&self) -> f64 {
                0.0
            }
        }
        let mut out = Vec::new();
        self.visit(&mut |e| {
            let affine_root = |arg: &RateExpr| -> Option<f64> {
                if arg.depends_on_state() || !arg.depends_on_time() {
                    return None;
                }
                let (a0, a1, a2) = (arg.eval(&At(0.0)), arg.eval(&At(1.0)), arg.eval(&At(2.0)));
                let slope = a1 - a0;
                if slope == 0.0 || ((a2 - a1) - slope).abs() > 1e-12 * slope.abs().max(1.0) {
                    return None;
                }
                Some(-a0 / slope)
            };
            match e {
                RateExpr::Call(f, args) if f.is_nonsmooth() => {
                    if args.len() == 2 {
                        let diff = RateExpr::sub(args[0].clone(), args[1].clone());
                        out.extend(affine_root(&diff));
                    } else {
                        out.extend(affine_root(&args[0]));
                    }
                }
                RateExpr::Waveform(w, arg) if matches!(**arg, RateExpr::Time) => {
                    out.extend(w.times.iter().copied());
                }
                _ => {}
            }
        });
        out.retain(|t| t.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Symbolic partial derivative with respect to a species concentration.
    /// Non-smooth functions use their almost-everywhere derivative.
    pub fn derivative(&self, wrt: SpeciesId) -> RateExpr {
        use RateExpr as E;
        if !self.depends_on(wrt) {
            return E::Const(0.0);
        }
        match self {
            E::Const(_) | E::Time | E::Temperature => E::Const(0.0),
            E::Species(s) => E::Const(if *s == wrt { 1.0 } else { 0.0 }),
            E::Neg(a) => E::neg(a.derivative(wrt)),
            E::Bin(op, a, b) => {
                let (da, db) = (a.derivative(wrt), b.derivative(wrt));
                match op {
                    BinOp::Add => E::add(da, db),
                    BinOp::Sub => E::sub(da, db),
                    BinOp::Mul => E::add(E::mul(da, (**b).clone()), E::mul((**a).clone(), db)),
                    BinOp::Div => E::div(
                        E::sub(E::mul(da, (**b).clone()), E::mul((**a).clone(), db)),
                        E::pow((**b).clone(), E::Const(2.0)),
                    ),
                    BinOp::Pow => {
                        if let Some(n) = b.as_const() {
                            // d(a^n) = n a^(n-1) da
                            E::mul(E::mul(E::Const(n), E::pow((**a).clone(), E::Const(n - 1.0))), da)
                        } else {
                            // d(a^b) = a^b (db ln a + b da / a)
                            E::mul(
                                self.clone(),
                                E::add(
                                    E::mul(db, E::call(Func::Log, vec![(**a).clone()])),
                                    E::div(E::mul((**b).clone(), da), (**a).clone()),
                                ),
                            )
                        }
                    }
                }
            }
            E::Call(f, args) => {
                let a = args[0].clone();
                let da = args[0].derivative(wrt);
                match f {
                    Func::Exp => E::mul(E::call(Func::Exp, vec![a]), da),
                    Func::Log => E::div(da, a),
                    Func::Sqrt => E::div(da, E::mul(E::Const(2.0), E::call(Func::Sqrt, vec![a]))),
                    Func::Sin => E::mul(E::call(Func::Cos, vec![a]), da),
                    Func::Cos => E::neg(E::mul(E::call(Func::Sin, vec![a]), da)),
                    Func::Tan => E::div(da, E::pow(E::call(Func::Cos, vec![a]), E::Const(2.0))),
                    Func::Abs => E::mul(E::call(Func::Sign, vec![a]), da),
                    Func::Step | Func::Sign => E::Const(0.0),
                    Func::Min | Func::Max => {
                        let b = args[1].clone();
                        let db = args[1].derivative(wrt);
                        // select the active branch with a step on (a - b)
                        let sel = E::call(Func::Step, vec![E::sub(a, b)]);
                        let (first, second) = if *f == Func::Max { (da, db) } else { (db, da) };
                        E::add(E::mul(sel.clone(), first), E::mul(E::sub(E::Const(1.0), sel), second))
                    }
                }
            }
            E::Waveform(w, arg) => {
                // piecewise slope of the interpolant times the inner derivative
                let darg = arg.derivative(wrt);
                let h = 1e-6;
                let slope = E::div(
                    E::sub(
                        E::Waveform(w.clone(), Box::new(E::add((**arg).clone(), E::Const(h)))),
                        E::Waveform(w.clone(), Box::new(E::sub((**arg).clone(), E::Const(h)))),
                    ),
                    E::Const(2.0 * h),
                );
                E::mul(slope, darg)
            }
        }
    }

    /// Coefficients of a linear form `Σ aᵢ·xᵢ + c`, if the expression is
    /// affine in the species concentrations with constant coefficients.
    pub fn linear_form(&self) -> Option<(BTreeMap<SpeciesId, f64>, f64)> {
        use RateExpr as E;
        fn scale(m: &mut BTreeMap<SpeciesId, f64>, k: f64) {
            m.values_mut().for_each(|v| *v *= k);
        }
        match self {
            E::Const(v) => Some((BTreeMap::new(), *v)),
            E::Species(s) => Some((BTreeMap::from([(*s, 1.0)]), 0.0)),
            E::Neg(a) => {
                let (mut m, c) = a.linear_form()?;
                scale(&mut m, -1.0);
                Some((m, -c))
            }
            E::Bin(op, a, b) => {
                let (mut ma, ca) = a.linear_form()?;
                let (mut mb, cb) = b.linear_form()?;
                match op {
                    BinOp::Add | BinOp::Sub => {
                        let sign = if *op == BinOp::Add { 1.0 } else { -1.0 };
                        for (s, v) in mb {
                            *ma.entry(s).or_insert(0.0) += sign * v;
                        }
                        Some((ma, ca + sign * cb))
                    }
                    BinOp::Mul => {
                        if ma.is_empty() {
                            scale(&mut mb, ca);
                            Some((mb, ca * cb))
                        } else if mb.is_empty() {
                            scale(&mut ma, cb);
                            Some((ma, ca * cb))
                        } else {
                            None
                        }
                    }
                    BinOp::Div if mb.is_empty() => {
                        scale(&mut ma, 1.0 / cb);
                        Some((ma, ca / cb))
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Prints the expression with a caller-supplied species formatter.
    pub fn display_with<'a>(&'a self, names: &'a dyn Fn(SpeciesId) -> String) -> impl fmt::Display + 'a {
        Printer { expr: self, names }
    }
}

struct Printer<'a> {
    expr: &'a RateExpr,
    names: &'a dyn Fn(SpeciesId) -> String,
}

impl Printer<'_> {
    fn write(&self, e: &RateExpr, parent_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            RateExpr::Const(v) => {
                if *v < 0.0 && parent_prec > 0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            RateExpr::Species(s) => write!(f, "{}", (self.names)(*s)),
            RateExpr::Time => write!(f, "t"),
            RateExpr::Temperature => write!(f, "T"),
            RateExpr::Neg(a) => {
                let wrap = parent_prec > 1;
                if wrap {
                    write!(f, "(")?;
                }
                write!(f, "-")?;
                self.write(a, 3, f)?;
                if wrap {
                    write!(f, ")")?;
                }
                Ok(())
            }
            RateExpr::Bin(op, a, b) => {
                let p = op.precedence();
                let wrap = p < parent_prec || (p == parent_prec && *op == BinOp::Pow);
                if wrap {
                    write!(f, "(")?;
                }
                let (lp, rp) = if *op == BinOp::Pow { (p + 1, p) } else { (p, p + 1) };
                self.write(a, lp, f)?;
                write!(f, "{}", op.symbol())?;
                self.write(b, rp, f)?;
                if wrap {
                    write!(f, ")")?;
                }
                Ok(())
            }
            RateExpr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    self.write(a, 0, f)?;
                }
                write!(f, ")")
            }
            RateExpr::Waveform(w, arg) => {
                write!(f, "waveform[{}](", w.label)?;
                self.write(arg, 0, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Env<'a>(&'a [f64], f64, f64);
    impl EvalEnv for Env<'_> {
        fn species(&self, id: SpeciesId) -> f64 {
            self.0[id.index()]
        }
        fn time(&self) -> f64 {
            self.1
        }
        fn temperature(&self) -> f64 {
            self.2
        }
    }

    fn x(i: u32) -> RateExpr {
        RateExpr::Species(SpeciesId(i))
    }

    fn hill() -> RateExpr {
        // 2*x0^2/(1+x0^2) + exp(-x1)*x0
        RateExpr::add(
            RateExpr::div(
                RateExpr::mul(RateExpr::Const(2.0), RateExpr::pow(x(0), RateExpr::Const(2.0))),
                RateExpr::add(RateExpr::Const(1.0), RateExpr::pow(x(0), RateExpr::Const(2.0))),
            ),
            RateExpr::mul(RateExpr::call(Func::Exp, vec![RateExpr::neg(x(1))]), x(0)),
        )
    }

    #[test]
    fn derivative_matches_central_differences() {
        let e = hill();
        let state = [0.7, 1.3];
        for wrt in 0..2 {
            let d = e.derivative(SpeciesId(wrt)).eval(&Env(&state, 0.0, 0.0));
            let h = 1e-6;
            let mut up = state;
            let mut dn = state;
            up[wrt as usize] += h;
            dn[wrt as usize] -= h;
            let fd = (e.eval(&Env(&up, 0.0, 0.0)) - e.eval(&Env(&dn, 0.0, 0.0))) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6, "wrt {wrt}: {d} vs {fd}");
        }
    }

    #[test]
    fn simplification_drops_zero_terms() {
        let e = RateExpr::mul(RateExpr::Const(3.0), x(0));
        assert_eq!(e.derivative(SpeciesId(1)), RateExpr::Const(0.0));
        assert_eq!(e.derivative(SpeciesId(0)), RateExpr::Const(3.0));
    }

    #[test]
    fn linear_forms() {
        let e = RateExpr::sub(RateExpr::mul(RateExpr::Const(2.0), x(0)), x(1));
        let (m, c) = e.linear_form().unwrap();
        assert_eq!(m[&SpeciesId(0)], 2.0);
        assert_eq!(m[&SpeciesId(1)], -1.0);
        assert_eq!(c, 0.0);
        assert!(RateExpr::mul(x(0), x(1)).linear_form().is_none());
    }

    #[test]
    fn printing_respects_precedence() {
        let names = |s: SpeciesId| format!("[{}]", ["A", "B"][s.index()]);
        let e = RateExpr::mul(RateExpr::add(x(0), x(1)), x(0));
        assert_eq!(e.display_with(&names).to_string(), "([A]+[B])*[A]");
        let e = RateExpr::sub(x(0), RateExpr::sub(x(1), x(0)));
        assert_eq!(e.display_with(&names).to_string(), "[A]-([B]-[A])");
    }

    #[test]
    fn waveform_interpolates_and_clamps() {
        let w = Waveform { label: "w".into(), times: vec![0.0, 1.0, 3.0], values: vec![0.0, 2.0, 0.0] };
        assert_eq!(w.at(-1.0), 0.0);
        assert_eq!(w.at(0.5), 1.0);
        assert_eq!(w.at(2.0), 1.0);
        assert_eq!(w.at(10.0), 0.0);
    }

    #[test]
    fn breakpoints_of_time_steps() {
        let e = RateExpr::call(Func::Step, vec![RateExpr::sub(RateExpr::Time, RateExpr::Const(5.0))]);
        assert_eq!(e.time_breakpoints(), vec![5.0]);
        assert!(!e.has_state_kink());
        let k = RateExpr::call(Func::Abs, vec![RateExpr::sub(x(0), RateExpr::Const(1.0))]);
        assert!(k.has_state_kink());
    }
}
