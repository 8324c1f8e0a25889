use std::rc::Rc;
use std::sync::Arc;

use crate::crn::{Complex, RateLaw};
use crate::expr::{Func, RateExpr};
use crate::lang::ast::*;
use crate::protocol::{SampleId, CELSIUS_ZERO};
use crate::sim::{LinearCombination, Observer};

use super::context::{EmissionContext, Export};
use super::value::{Builtin, Closure, Env, Stat, Value};
use super::{EvalConfig, EvalError, ExecutionTrace};

type R<T> = Result<T, EvalError>;

enum Flow<'a> {
    Next(Env<'a>),
    Yield(Value<'a>),
}

struct Interp<'c> {
    ctx: EmissionContext,
    config: &'c EvalConfig,
    depth: usize,
}

pub(super) fn run(program: &Program, config: &EvalConfig) -> R<ExecutionTrace> {
    let ctx = EmissionContext::new(config).map_err(|e| EvalError { line: 1, column: 1, message: e.to_string() })?;
    let mut it = Interp { ctx, config, depth: 0 };
    match it.block(&program.body, Env::default())? {
        Flow::Next(_) => Ok(it.ctx.into_trace()),
        Flow::Yield(_) => unreachable!("yield outside a function is rejected"),
    }
}

fn type_error(span: Span, wanted: &str, got: &Value<'_>) -> EvalError {
    EvalError::at(span, format!("expected {wanted}, found {}", got.type_name()))
}

fn to_kelvin(value: f64, unit: Option<TempUnit>) -> f64 {
    match unit {
        Some(TempUnit::Kelvin) => value,
        Some(TempUnit::Celsius) | None => value + CELSIUS_ZERO,
    }
}

impl<'a> Interp<'_> {
    fn emit<T>(&self, span: Span, r: Result<T, super::EmitError>) -> R<T> {
        r.map_err(|e| EvalError::at(span, e.to_string()))
    }

    fn block(&mut self, stmts: &'a [Stmt], mut env: Env<'a>) -> R<Flow<'a>> {
        for s in stmts {
            match self.stmt(s, env)? {
                Flow::Next(e) => env = e,
                y @ Flow::Yield(_) => return Ok(y),
            }
        }
        Ok(Flow::Next(env))
    }

    fn scoped(&mut self, b: &'a Block, env: &Env<'a>) -> R<Option<Value<'a>>> {
        Ok(match self.block(&b.stmts, env.clone())? {
            Flow::Next(_) => None,
            Flow::Yield(v) => Some(v),
        })
    }

    fn number(&mut self, e: &'a Expr, env: &Env<'a>) -> R<f64> {
        match self.expr(e, env)? {
            Value::Number(v) => Ok(v),
            other => Err(type_error(e.span, "a number", &other)),
        }
    }

    fn sample(&mut self, e: &'a Expr, env: &Env<'a>) -> R<SampleId> {
        match self.expr(e, env)? {
            Value::Sample(s) => Ok(s),
            other => Err(type_error(e.span, "a sample", &other)),
        }
    }

    fn opt_sample(&mut self, e: &'a Option<Expr>, env: &Env<'a>) -> R<SampleId> {
        match e {
            Some(e) => self.sample(e, env),
            None => Ok(self.ctx.current_sample),
        }
    }

    fn sample_name(&self, id: SampleId) -> String {
        self.ctx.protocol.sample(id).map(|s| s.name.clone()).unwrap_or_default()
    }

    fn complex(&mut self, c: &'a ComplexAst, env: &Env<'a>) -> R<Complex> {
        let mut out = Complex::new();
        if let ComplexAst::Terms(terms) = c {
            for t in terms {
                match self.expr(&t.species, env)? {
                    Value::Species(s) => out.add(s, t.multiplicity),
                    other => return Err(type_error(t.species.span, "a species", &other)),
                }
            }
        }
        Ok(out)
    }

    fn rate(&mut self, clause: Option<&'a RateClause>, env: &Env<'a>) -> R<RateLaw> {
        let Some(clause) = clause else { return Ok(RateLaw::MassAction(1.0)) };
        let v = self.expr(&clause.expr, env)?;
        let span = clause.expr.span;
        match (clause.general, v) {
            (false, Value::Number(k)) => Ok(RateLaw::MassAction(k)),
            (false, v @ (Value::Species(_) | Value::Symbolic(_))) => Err(EvalError::at(
                span,
                format!(
                    "a mass-action rate must be a number, found {}; write {{rate ...}} for a general rate law",
                    v.type_name()
                ),
            )),
            (true, v) => match v.as_rate() {
                Some(e) => Ok(RateLaw::General(e)),
                None => Err(type_error(span, "a rate expression", &v)),
            },
            (false, other) => Err(type_error(span, "a number", &other)),
        }
    }

    fn stmt(&mut self, s: &'a Stmt, env: Env<'a>) -> R<Flow<'a>> {
        let span = s.span;
        match &s.kind {
            StmtKind::Let { name, value } => {
                let v = self.expr(value, &env)?;
                return Ok(Flow::Next(env.bind(&name.name, v)));
            }
            StmtKind::Function { name, params, body } => {
                let c = Closure { name: Some(&name.name), params, body, env: env.clone() };
                return Ok(Flow::Next(env.bind(&name.name, Value::Closure(Rc::new(c)))));
            }
            StmtKind::Species { decls, sample } => {
                let target = self.opt_sample(sample, &env)?;
                let mut env = env;
                for d in decls {
                    let initial = match &d.initial {
                        Some(e) => self.number(e, &env)?,
                        None => 0.0,
                    };
                    let r = self.ctx.fresh_species_in(&d.name.name, initial, target);
                    let sp = self.emit(d.name.span, r)?;
                    env = env.bind(&d.name.name, Value::Species(sp.id));
                }
                return Ok(Flow::Next(env));
            }
            StmtKind::Amount { species, value, sample } => {
                let sp = match self.expr(species, &env)? {
                    Value::Species(x) => x,
                    other => return Err(type_error(species.span, "a species", &other)),
                };
                let v = self.number(value, &env)?;
                let target = self.opt_sample(sample, &env)?;
                let r = self.ctx.set_amount(sp, v, target);
                self.emit(span, r)?;
            }
            StmtKind::Reaction { reagents, products, reversible, rates } => {
                let lhs = self.complex(reagents, &env)?;
                let rhs = self.complex(products, &env)?;
                let forward = self.rate(rates.first(), &env)?;
                let r = self.ctx.emit_reaction(lhs.clone(), rhs.clone(), forward);
                self.emit(span, r)?;
                if *reversible {
                    let backward = self.rate(rates.get(1), &env)?;
                    let r = self.ctx.emit_reaction(rhs, lhs, backward);
                    self.emit(span, r)?;
                }
            }
            StmtKind::If { cond, then, otherwise } => {
                let c = match self.expr(cond, &env)? {
                    Value::Bool(b) => b,
                    other => return Err(type_error(cond.span, "a boolean", &other)),
                };
                let result = if c {
                    self.scoped(then, &env)?
                } else {
                    match otherwise {
                        Some(ElseBranch::Block(b)) => self.scoped(b, &env)?,
                        Some(ElseBranch::If(s)) => match self.stmt(s, env.clone())? {
                            Flow::Yield(v) => Some(v),
                            Flow::Next(_) => None,
                        },
                        None => None,
                    }
                };
                if let Some(v) = result {
                    return Ok(Flow::Yield(v));
                }
            }
            StmtKind::For { var, start, end, body } => {
                let a = self.number(start, &env)?;
                let b = self.number(end, &env)?;
                let mut i = a;
                while i < b {
                    let inner = env.bind(&var.name, Value::Number(i));
                    if let Some(v) = self.scoped(body, &inner)? {
                        return Ok(Flow::Yield(v));
                    }
                    i += 1.0;
                }
            }
            StmtKind::Yield(e) => {
                if self.depth == 0 {
                    return Err(EvalError::at(span, "yield outside a function"));
                }
                let v = self.expr(e, &env)?;
                return Ok(Flow::Yield(v));
            }
            StmtKind::Report { target, label } => {
                let v = self.expr(target, &env)?;
                let observer = match v {
                    Value::Observer(o) => (*o).clone(),
                    Value::Number(_) | Value::Species(_) | Value::Symbolic(_) => {
                        Observer::Value(v.as_rate().expect("numeric value"))
                    }
                    other => return Err(type_error(target.span, "a species, expression or statistic", &other)),
                };
                let label = label.clone().unwrap_or_else(|| self.observer_label(&observer));
                let r = self.ctx.emit_report(observer, label);
                self.emit(span, r)?;
            }
            StmtKind::Equilibrate { sample, duration, temperature } => {
                let target = self.opt_sample(sample, &env)?;
                let d = self.number(duration, &env)?;
                let t = match temperature {
                    Some(t) => to_kelvin(self.number(&t.value, &env)?, t.unit),
                    None => self.ctx.protocol.sample(target).map(|s| s.temperature_k).unwrap_or(CELSIUS_ZERO),
                };
                let r = self.ctx.equilibrate(target, d, t);
                self.emit(span, r)?;
            }
            StmtKind::Sample { name, volume, temperature } => {
                let vol = match volume {
                    Some((e, unit)) => unit.unwrap_or(VolumeUnit::Microliter).to_microliters(self.number(e, &env)?),
                    None => 1.0,
                };
                let temp = match temperature {
                    Some(t) => to_kelvin(self.number(&t.value, &env)?, t.unit),
                    None => CELSIUS_ZERO + 20.0,
                };
                let r = self.ctx.protocol.new_sample(&name.name, vol, temp);
                let id = self.emit(span, r.map_err(Into::into))?;
                return Ok(Flow::Next(env.bind(&name.name, Value::Sample(id))));
            }
            StmtKind::Mix { name, first, second } => {
                let a = self.sample(first, &env)?;
                let b = self.sample(second, &env)?;
                let r = self.ctx.protocol.mix(a, b, &name.name);
                let id = self.emit(span, r.map_err(Into::into))?;
                return Ok(Flow::Next(env.bind(&name.name, Value::Sample(id))));
            }
            StmtKind::Split { left, right, source, proportion } => {
                let src = self.sample(source, &env)?;
                let p = match proportion {
                    Some(e) => self.number(e, &env)?,
                    None => 0.5,
                };
                let r = self.ctx.protocol.split(src, p, [&left.name, &right.name]);
                let (l, rr) = self.emit(span, r.map_err(Into::into))?;
                let env = env.bind(&left.name, Value::Sample(l)).bind(&right.name, Value::Sample(rr));
                return Ok(Flow::Next(env));
            }
            StmtKind::Dispose(items) => {
                for e in items {
                    let id = self.sample(e, &env)?;
                    if id == self.ctx.current_sample {
                        return Err(EvalError::at(
                            e.span,
                            format!("cannot dispose the implicit sample '{}'", self.sample_name(id)),
                        ));
                    }
                    let r = self.ctx.protocol.dispose(id);
                    self.emit(e.span, r.map_err(Into::into))?;
                }
            }
            StmtKind::Export { dataset, name } => {
                let d = match self.expr(dataset, &env)? {
                    Value::Dataset(d) => d,
                    other => return Err(type_error(dataset.span, "a dataset", &other)),
                };
                let valid = !name.is_empty()
                    && !name.starts_with('.')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
                if !valid {
                    return Err(EvalError::at(span, format!("export name {name:?} must be a plain file name")));
                }
                self.ctx.exports.push(Export { name: name.clone(), dataset: (*d).clone() });
            }
            StmtKind::Expr(e) => {
                self.expr(e, &env)?;
            }
        }
        Ok(Flow::Next(env))
    }

    fn observer_label(&self, o: &Observer) -> String {
        let net = &self.ctx.network;
        let names = |s| net.name(s).to_string();
        let lin = |l: &LinearCombination| {
            let mut e = RateExpr::Const(l.offset);
            for (s, c) in &l.coeffs {
                e = RateExpr::add(e, RateExpr::mul(RateExpr::Const(*c), RateExpr::Species(*s)));
            }
            let text = e.display_with(&names).to_string();
            text
        };
        match o {
            Observer::Value(RateExpr::Species(s)) => names(*s),
            Observer::Value(e) => e.display_with(&names).to_string(),
            Observer::Var(l) => format!("var({})", lin(l)),
            Observer::Sd(l) => format!("sd({})", lin(l)),
            Observer::Cv(l) => format!("cv({})", lin(l)),
            Observer::Fano(l) => format!("fano({})", lin(l)),
            Observer::Cov(a, b) => format!("cov({}, {})", lin(a), lin(b)),
        }
    }

    fn lookup(&self, name: &str, env: &Env<'a>, span: Span) -> R<Value<'a>> {
        if let Some(v) = env.lookup(name) {
            return Ok(v.clone());
        }
        if let Some(b) = Builtin::from_name(name) {
            return Ok(Value::Builtin(b));
        }
        Ok(match name {
            "time" => Value::Symbolic(RateExpr::Time),
            "temperature" => Value::Symbolic(RateExpr::Temperature),
            "vessel" => Value::Sample(self.ctx.current_sample),
            "pi" => Value::Number(std::f64::consts::PI),
            _ => return Err(EvalError::at(span, format!("unbound name '{name}'"))),
        })
    }

    fn expr(&mut self, e: &'a Expr, env: &Env<'a>) -> R<Value<'a>> {
        let span = e.span;
        Ok(match &e.kind {
            ExprKind::Number(v) => Value::Number(*v),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Str(s) => Value::Str(Rc::from(s.as_str())),
            ExprKind::Var(name) => self.lookup(name, env, span)?,
            ExprKind::Unary(UnOp::Neg, inner) => match self.expr(inner, env)? {
                Value::Number(v) => Value::Number(-v),
                v @ (Value::Species(_) | Value::Symbolic(_)) => {
                    Value::Symbolic(RateExpr::neg(v.as_rate().expect("rate")))
                }
                other => return Err(type_error(inner.span, "a number", &other)),
            },
            ExprKind::Unary(UnOp::Not, inner) => match self.expr(inner, env)? {
                Value::Bool(b) => Value::Bool(!b),
                other => return Err(type_error(inner.span, "a boolean", &other)),
            },
            ExprKind::Binary(op @ (BinaryOp::And | BinaryOp::Or), l, r) => {
                let lv = match self.expr(l, env)? {
                    Value::Bool(b) => b,
                    other => return Err(type_error(l.span, "a boolean", &other)),
                };
                if (*op == BinaryOp::And) != lv {
                    return Ok(Value::Bool(lv));
                }
                match self.expr(r, env)? {
                    Value::Bool(b) => Value::Bool(b),
                    other => return Err(type_error(r.span, "a boolean", &other)),
                }
            }
            ExprKind::Binary(op, l, r) => {
                let lv = self.expr(l, env)?;
                let rv = self.expr(r, env)?;
                binary(*op, lv, rv, span)?
            }
            ExprKind::Call(callee, args) => {
                let f = self.expr(callee, env)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a, env)?);
                }
                self.call(f, vals, span)?
            }
            ExprKind::List(items) => {
                let mut vals = Vec::with_capacity(items.len());
                for a in items {
                    vals.push(self.expr(a, env)?);
                }
                Value::List(vals.into())
            }
            ExprKind::Lambda(params, body) => {
                Value::Closure(Rc::new(Closure { name: None, params, body, env: env.clone() }))
            }
        })
    }

    fn call(&mut self, f: Value<'a>, args: Vec<Value<'a>>, span: Span) -> R<Value<'a>> {
        match f {
            Value::Closure(c) => {
                if c.params.len() != args.len() {
                    let name = c.name.unwrap_or("function");
                    return Err(EvalError::at(
                        span,
                        format!("{name} expects {} argument(s), got {}", c.params.len(), args.len()),
                    ));
                }
                if self.depth >= self.config.max_depth {
                    return Err(EvalError::at(
                        span,
                        format!("recursion depth limit of {} exceeded", self.config.max_depth),
                    ));
                }
                let mut env = c.env.clone();
                if let Some(name) = c.name {
                    env = env.bind(name, Value::Closure(c.clone()));
                }
                for (p, v) in c.params.iter().zip(args) {
                    env = env.bind(&p.name, v);
                }
                self.depth += 1;
                let out = self.block(&c.body.stmts, env);
                self.depth -= 1;
                Ok(match out? {
                    Flow::Yield(v) => v,
                    Flow::Next(_) => Value::Unit,
                })
            }
            Value::Builtin(b) => self.builtin(b, args, span),
            other => Err(EvalError::at(span, format!("cannot call a {}", other.type_name()))),
        }
    }

    fn builtin(&mut self, b: Builtin, args: Vec<Value<'a>>, span: Span) -> R<Value<'a>> {
        let arity = match b {
            Builtin::Math(f) => f.arity(),
            Builtin::Stat(Stat::Cov) | Builtin::Get => 2,
            Builtin::Waveform => return self.waveform(args, span),
            _ => 1,
        };
        if args.len() != arity {
            return Err(EvalError::at(span, format!("{} expects {arity} argument(s), got {}", b.name(), args.len())));
        }
        match b {
            Builtin::Math(f) => math(f, &args, span),
            Builtin::Stat(stat) => {
                let rate = |v: &Value<'_>| v.as_rate().ok_or_else(|| type_error(span, "a species expression", v));
                let lin = |v: &Value<'_>| {
                    let e = rate(v)?;
                    LinearCombination::from_expr(&e).ok_or_else(|| {
                        EvalError::at(span, format!("{} needs a linear combination of species", b.name()))
                    })
                };
                let o = match stat {
                    Stat::Mean => Observer::Value(rate(&args[0])?),
                    Stat::Var => Observer::Var(lin(&args[0])?),
                    Stat::Sd => Observer::Sd(lin(&args[0])?),
                    Stat::Cv => Observer::Cv(lin(&args[0])?),
                    Stat::Fano => Observer::Fano(lin(&args[0])?),
                    Stat::Cov => Observer::Cov(lin(&args[0])?, lin(&args[1])?),
                };
                Ok(Value::Observer(Rc::new(o)))
            }
            Builtin::Capture => {
                let i = match &args[0] {
                    Value::Number(v) if *v >= 0.0 && v.fract() == 0.0 => *v as usize,
                    Value::Number(v) => {
                        return Err(EvalError::at(span, format!("run index must be a non-negative integer, got {v}")))
                    }
                    other => return Err(type_error(span, "a run index", other)),
                };
                let d = self.emit(span, self.ctx.capture(i))?;
                Ok(Value::Dataset(Rc::new(d)))
            }
            Builtin::Len => match &args[0] {
                Value::List(l) => Ok(Value::Number(l.len() as f64)),
                Value::Str(s) => Ok(Value::Number(s.chars().count() as f64)),
                other => Err(type_error(span, "a list", other)),
            },
            Builtin::Get => match (&args[0], &args[1]) {
                (Value::List(l), Value::Number(i)) => {
                    if *i >= 0.0 && i.fract() == 0.0 && (*i as usize) < l.len() {
                        Ok(l[*i as usize].clone())
                    } else {
                        Err(EvalError::at(span, format!("index {i} out of range for a list of length {}", l.len())))
                    }
                }
                (Value::List(_), other) => Err(type_error(span, "a number", other)),
                (other, _) => Err(type_error(span, "a list", other)),
            },
            Builtin::Waveform => unreachable!(),
        }
    }

    /// `waveform(dataset, "label" [, time expression])`.
    fn waveform(&mut self, args: Vec<Value<'a>>, span: Span) -> R<Value<'a>> {
        if !(2..=3).contains(&args.len()) {
            return Err(EvalError::at(span, format!("waveform expects 2 or 3 arguments, got {}", args.len())));
        }
        let Value::Dataset(d) = &args[0] else { return Err(type_error(span, "a dataset", &args[0])) };
        let Value::Str(label) = &args[1] else { return Err(type_error(span, "a column label", &args[1])) };
        let w = d
            .waveform(label)
            .ok_or_else(|| EvalError::at(span, format!("dataset {} has no column {label:?}", d.label)))?;
        if w.times.is_empty() {
            return Err(EvalError::at(span, format!("dataset {} is empty", d.label)));
        }
        let arg = match args.get(2) {
            None => RateExpr::Time,
            Some(v) => v.as_rate().ok_or_else(|| type_error(span, "a time expression", v))?,
        };
        Ok(Value::Symbolic(RateExpr::Waveform(Arc::new(w), Box::new(arg))))
    }
}

fn math<'a>(f: Func, args: &[Value<'a>], span: Span) -> R<Value<'a>> {
    if let Some(nums) =
        args.iter().map(|a| if let Value::Number(v) = a { Some(*v) } else { None }).collect::<Option<Vec<_>>>()
    {
        return Ok(Value::Number(f.apply(&nums)));
    }
    let rates = args
        .iter()
        .map(|a| a.as_rate().ok_or_else(|| type_error(span, "a number or species expression", a)))
        .collect::<R<Vec<_>>>()?;
    Ok(Value::Symbolic(RateExpr::call(f, rates)))
}

fn binary<'a>(op: BinaryOp, l: Value<'a>, r: Value<'a>, span: Span) -> R<Value<'a>> {
    use BinaryOp::*;
    let mismatch = |l: &Value<'_>, r: &Value<'_>| {
        EvalError::at(span, format!("cannot apply '{}' to {} and {}", op.symbol(), l.type_name(), r.type_name()))
    };
    match op {
        Eq | Ne => {
            let same = match (&l, &r) {
                (Value::Number(a), Value::Number(b)) => a == b,
                (Value::Bool(a), Value::Bool(b)) => a == b,
                (Value::Str(a), Value::Str(b)) => a == b,
                (Value::Species(a), Value::Species(b)) => a == b,
                (Value::Sample(a), Value::Sample(b)) => a == b,
                (Value::Unit, Value::Unit) => true,
                _ => return Err(mismatch(&l, &r)),
            };
            Ok(Value::Bool(same == (op == Eq)))
        }
        Lt | Le | Gt | Ge => match (&l, &r) {
            (Value::Number(a), Value::Number(b)) => Ok(Value::Bool(match op {
                Lt => a < b,
                Le => a <= b,
                Gt => a > b,
                _ => a >= b,
            })),
            _ => Err(mismatch(&l, &r)),
        },
        Add | Sub | Mul | Div | Pow => match (&l, &r) {
            (Value::Number(a), Value::Number(b)) => Ok(Value::Number(match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                Div => a / b,
                _ => a.powf(*b),
            })),
            (Value::Str(a), Value::Str(b)) if op == Add => Ok(Value::Str(format!("{a}{b}").into())),
            (Value::Str(a), Value::Number(b)) if op == Add => {
                Ok(Value::Str(format!("{a}{}", crate::sim::format_float(*b)).into()))
            }
            (Value::List(a), Value::List(b)) if op == Add => {
                Ok(Value::List(a.iter().chain(b.iter()).cloned().collect()))
            }
            _ => match (l.as_rate(), r.as_rate()) {
                (Some(a), Some(b)) => Ok(Value::Symbolic(match op {
                    Add => RateExpr::add(a, b),
                    Sub => RateExpr::sub(a, b),
                    Mul => RateExpr::mul(a, b),
                    Div => RateExpr::div(a, b),
                    _ => RateExpr::pow(a, b),
                })),
                _ => Err(mismatch(&l, &r)),
            },
        },
        And | Or => unreachable!("short-circuit operators are handled by the caller"),
    }
}
