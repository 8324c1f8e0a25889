//! Syntax tree. Names in reactions stay unresolved until evaluation.

use serde::Serialize;

/// Source range of a node. Spans never take part in structural equality,
/// so trees parsed from differently formatted sources compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span { start: self.start, end: other.end.max(self.end), line: self.line, column: self.column }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Program {
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TempUnit {
    Celsius,
    Kelvin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Temperature {
    pub value: Expr,
    /// `None` means the default unit (celsius) was implied.
    pub unit: Option<TempUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VolumeUnit {
    Microliter,
    Milliliter,
    Liter,
}

impl VolumeUnit {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "uL" | "ul" | "µL" => Some(VolumeUnit::Microliter),
            "mL" | "ml" => Some(VolumeUnit::Milliliter),
            "L" => Some(VolumeUnit::Liter),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VolumeUnit::Microliter => "uL",
            VolumeUnit::Milliliter => "mL",
            VolumeUnit::Liter => "L",
        }
    }

    pub fn to_microliters(self, v: f64) -> f64 {
        match self {
            VolumeUnit::Microliter => v,
            VolumeUnit::Milliliter => v * 1e3,
            VolumeUnit::Liter => v * 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesDecl {
    pub name: Ident,
    pub initial: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ComplexAst {
    Empty(Span),
    Terms(Vec<Term>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub multiplicity: u32,
    pub species: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateClause {
    /// `rate expr` (general kinetics) versus a bare mass-action constant.
    pub general: bool,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ElseBranch {
    Block(Block),
    If(Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StmtKind {
    Let { name: Ident, value: Expr },
    Function { name: Ident, params: Vec<Ident>, body: Block },
    Species { decls: Vec<SpeciesDecl>, sample: Option<Expr> },
    Amount { species: Expr, value: Expr, sample: Option<Expr> },
    Reaction { reagents: ComplexAst, products: ComplexAst, reversible: bool, rates: Vec<RateClause> },
    If { cond: Expr, then: Block, otherwise: Option<ElseBranch> },
    For { var: Ident, start: Expr, end: Expr, body: Block },
    Yield(Expr),
    Report { target: Expr, label: Option<String> },
    Equilibrate { sample: Option<Expr>, duration: Expr, temperature: Option<Temperature> },
    Sample { name: Ident, volume: Option<(Expr, Option<VolumeUnit>)>, temperature: Option<Temperature> },
    Mix { name: Ident, first: Expr, second: Expr },
    Split { left: Ident, right: Ident, source: Expr, proportion: Option<Expr> },
    Dispose(Vec<Expr>),
    Export { dataset: Expr, name: String },
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
            BinaryOp::Pow => 8,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "or",
            BinaryOp::And => "and",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Number(f64),
    Bool(bool),
    Str(String),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    List(Vec<Expr>),
    Lambda(Vec<Ident>, Block),
}

impl Program {
    /// Calls `f` on every span in the tree.
    pub fn for_each_span(&self, f: &mut dyn FnMut(Span)) {
        f(self.span);
        self.body.iter().for_each(|s| s.for_each_span(f));
    }
}

impl Block {
    fn for_each_span(&self, f: &mut dyn FnMut(Span)) {
        f(self.span);
        self.stmts.iter().for_each(|s| s.for_each_span(f));
    }
}

impl ComplexAst {
    fn for_each_span(&self, f: &mut dyn FnMut(Span)) {
        match self {
            ComplexAst::Empty(s) => f(*s),
            ComplexAst::Terms(ts) => ts.iter().for_each(|t| {
                f(t.span);
                t.species.for_each_span(f);
            }),
        }
    }
}

impl Stmt {
    fn for_each_span(&self, f: &mut dyn FnMut(Span)) {
        f(self.span);
        let temp = |t: &Option<Temperature>, f: &mut dyn FnMut(Span)| {
            if let Some(t) = t {
                t.value.for_each_span(f);
            }
        };
        match &self.kind {
            StmtKind::Let { name, value } => {
                f(name.span);
                value.for_each_span(f);
            }
            StmtKind::Function { name, params, body } => {
                f(name.span);
                params.iter().for_each(|p| f(p.span));
                body.for_each_span(f);
            }
            StmtKind::Species { decls, sample } => {
                for d in decls {
                    f(d.name.span);
                    if let Some(e) = &d.initial {
                        e.for_each_span(f);
                    }
                }
                if let Some(e) = sample {
                    e.for_each_span(f);
                }
            }
            StmtKind::Amount { species, value, sample } => {
                species.for_each_span(f);
                value.for_each_span(f);
                if let Some(e) = sample {
                    e.for_each_span(f);
                }
            }
            StmtKind::Reaction { reagents, products, rates, .. } => {
                reagents.for_each_span(f);
                products.for_each_span(f);
                rates.iter().for_each(|r| r.expr.for_each_span(f));
            }
            StmtKind::If { cond, then, otherwise } => {
                cond.for_each_span(f);
                then.for_each_span(f);
                match otherwise {
                    Some(ElseBranch::Block(b)) => b.for_each_span(f),
                    Some(ElseBranch::If(s)) => s.for_each_span(f),
                    None => {}
                }
            }
            StmtKind::For { var, start, end, body } => {
                f(var.span);
                start.for_each_span(f);
                end.for_each_span(f);
                body.for_each_span(f);
            }
            StmtKind::Yield(e) | StmtKind::Expr(e) => e.for_each_span(f),
            StmtKind::Report { target, .. } => target.for_each_span(f),
            StmtKind::Equilibrate { sample, duration, temperature } => {
                if let Some(e) = sample {
                    e.for_each_span(f);
                }
                duration.for_each_span(f);
                temp(temperature, f);
            }
            StmtKind::Sample { name, volume, temperature } => {
                f(name.span);
                if let Some((e, _)) = volume {
                    e.for_each_span(f);
                }
                temp(temperature, f);
            }
            StmtKind::Mix { name, first, second } => {
                f(name.span);
                first.for_each_span(f);
                second.for_each_span(f);
            }
            StmtKind::Split { left, right, source, proportion } => {
                f(left.span);
                f(right.span);
                source.for_each_span(f);
                if let Some(e) = proportion {
                    e.for_each_span(f);
                }
            }
            StmtKind::Dispose(es) => es.iter().for_each(|e| e.for_each_span(f)),
            StmtKind::Export { dataset, .. } => dataset.for_each_span(f),
        }
    }
}

impl Expr {
    fn for_each_span(&self, f: &mut dyn FnMut(Span)) {
        f(self.span);
        match &self.kind {
            ExprKind::Unary(_, e) => e.for_each_span(f),
            ExprKind::Binary(_, a, b) => {
                a.for_each_span(f);
                b.for_each_span(f);
            }
            ExprKind::Call(c, args) => {
                c.for_each_span(f);
                args.iter().for_each(|a| a.for_each_span(f));
            }
            ExprKind::List(items) => items.iter().for_each(|a| a.for_each_span(f)),
            ExprKind::Lambda(params, body) => {
                params.iter().for_each(|p| f(p.span));
                body.for_each_span(f);
            }
            _ => {}
        }
    }
}
