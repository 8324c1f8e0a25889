use std::fmt::Write;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::crn::SpeciesId;
use crate::expr::{Func, RateExpr, Waveform};
use crate::lang::ast::{Block, Ident};
use crate::protocol::SampleId;
use crate::sim::{format_float, Observer, Timecourse};

/// Statistics that turn an expression into a report observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Var,
    Sd,
    Cv,
    Fano,
    Cov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Math(Func),
    Stat(Stat),
    Capture,
    Waveform,
    Len,
    Get,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        if let Some(f) = Func::from_name(name) {
            return Some(Builtin::Math(f));
        }
        Some(match name {
            "mean" => Builtin::Stat(Stat::Mean),
            "var" => Builtin::Stat(Stat::Var),
            "sd" => Builtin::Stat(Stat::Sd),
            "cv" => Builtin::Stat(Stat::Cv),
            "fano" => Builtin::Stat(Stat::Fano),
            "cov" => Builtin::Stat(Stat::Cov),
            "capture" => Builtin::Capture,
            "waveform" => Builtin::Waveform,
            "len" => Builtin::Len,
            "get" => Builtin::Get,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Math(f) => f.name(),
            Builtin::Stat(Stat::Mean) => "mean",
            Builtin::Stat(Stat::Var) => "var",
            Builtin::Stat(Stat::Sd) => "sd",
            Builtin::Stat(Stat::Cv) => "cv",
            Builtin::Stat(Stat::Fano) => "fano",
            Builtin::Stat(Stat::Cov) => "cov",
            Builtin::Capture => "capture",
            Builtin::Waveform => "waveform",
            Builtin::Len => "len",
            Builtin::Get => "get",
        }
    }
}

/// A user function. Named functions see themselves when called.
#[derive(Debug)]
pub struct Closure<'a> {
    pub name: Option<&'a str>,
    pub params: &'a [Ident],
    pub body: &'a Block,
    pub env: Env<'a>,
}

#[derive(Debug, Clone)]
pub enum Value<'a> {
    Unit,
    Number(f64),
    Bool(bool),
    Str(Rc<str>),
    Species(SpeciesId),
    Sample(SampleId),
    Closure(Rc<Closure<'a>>),
    Builtin(Builtin),
    List(Rc<[Value<'a>]>),
    /// Arithmetic over species, time or temperature.
    Symbolic(RateExpr),
    Observer(Rc<Observer>),
    Dataset(Rc<Dataset>),
}

impl Value<'_> {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Unit => "nothing",
            Value::Number(_) => "number",
            Value::Bool(_) => "boolean",
            Value::Str(_) => "string",
            Value::Species(_) => "species",
            Value::Sample(_) => "sample",
            Value::Closure(_) | Value::Builtin(_) => "function",
            Value::List(_) => "list",
            Value::Symbolic(_) => "expression",
            Value::Observer(_) => "statistic",
            Value::Dataset(_) => "dataset",
        }
    }

    /// The value as a rate expression, when it is numeric or symbolic.
    pub fn as_rate(&self) -> Option<RateExpr> {
        match self {
            Value::Number(v) => Some(RateExpr::Const(*v)),
            Value::Species(s) => Some(RateExpr::Species(*s)),
            Value::Symbolic(e) => Some(e.clone()),
            _ => None,
        }
    }
}

/// Persistent lexical environment: a shared linked list of bindings.
#[derive(Debug, Clone, Default)]
pub struct Env<'a>(Option<Rc<Binding<'a>>>);

#[derive(Debug)]
struct Binding<'a> {
    name: &'a str,
    value: Value<'a>,
    next: Env<'a>,
}

impl<'a> Env<'a> {
    pub fn bind(&self, name: &'a str, value: Value<'a>) -> Env<'a> {
        Env(Some(Rc::new(Binding { name, value, next: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value<'a>> {
        let mut cur = &self.0;
        while let Some(b) = cur {
            if b.name == name {
                return Some(&b.value);
            }
            cur = &b.next.0;
        }
        None
    }
}

impl Drop for Env<'_> {
    // unlink iteratively so long chains cannot exhaust the stack
    fn drop(&mut self) {
        let mut cur = self.0.take();
        while let Some(rc) = cur {
            match Rc::try_unwrap(rc) {
                Ok(mut b) => cur = b.next.0.take(),
                Err(_) => break,
            }
        }
    }
}

/// A captured table of time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub label: String,
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    /// The reported series of a run, or its species means when nothing
    /// was reported.
    pub fn from_timecourse(tc: &Timecourse) -> Dataset {
        let columns = if tc.observers.is_empty() {
            tc.names.iter().enumerate().map(|(i, n)| (n.clone(), tc.means.iter().map(|m| m[i]).collect())).collect()
        } else {
            tc.observers.iter().map(|o| (o.label.clone(), o.values.clone())).collect()
        };
        Dataset { label: tc.label.clone(), times: tc.times.clone(), columns }
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_slice())
    }

    pub fn waveform(&self, label: &str) -> Option<Waveform> {
        let values = self.column(label)?.to_vec();
        Some(Waveform { label: format!("{}.{label}", self.label), times: self.times.clone(), values })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (l, _) in &self.columns {
            out.push(',');
            if l.contains([',', '"', '\n']) {
                let _ = write!(out, "\"{}\"", l.replace('"', "\"\""));
            } else {
                out.push_str(l);
            }
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format_float(*t));
            for (_, v) in &self.columns {
                out.push(',');
                out.push_str(&format_float(v[k]));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_shadowing_and_persistence() {
        let base = Env::default().bind("x", Value::Number(1.0));
        let inner = base.bind("x", Value::Number(2.0));
        assert!(matches!(inner.lookup("x"), Some(Value::Number(v)) if *v == 2.0));
        assert!(matches!(base.lookup("x"), Some(Value::Number(v)) if *v == 1.0));
        assert!(base.lookup("y").is_none());
    }

    #[test]
    fn long_env_drops_without_overflow() {
        let mut env = Env::default();
        for _ in 0..1_000_000 {
            env = env.bind("x", Value::Unit);
        }
        drop(env);
    }

    #[test]
    fn dataset_csv() {
        let d = Dataset { label: "run1".into(), times: vec![0.0, 0.5], columns: vec![("A".into(), vec![1.0, 0.25])] };
        assert_eq!(d.to_csv(), "t,A\n0,1\n0.5,0.25\n");
        let w = d.waveform("A").unwrap();
        assert_eq!(w.at(0.25), 0.625);
        assert!(d.waveform("B").is_none());
    }
}
