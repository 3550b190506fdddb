//! Recursive-descent parser with recovery to the next declaration.

use std::collections::HashSet;

use crate::behavior::{ActionModel, ConditionModel, ProfileSchedule};
use crate::status::NodeStatus;
use crate::sync::barrier::BarrierPolicy;
use crate::sync::resource::PriorityIncrement;

use super::ast::{
    ActionDecl, ConditionDecl, Document, GroupDecl, Name, NodeExpr, NodeHead, Spanned,
};
use super::diagnostic::{Code, Diagnostic, Span};
use super::lexer::{lex, Tok, Token};

const DECL_KEYWORDS: [&str; 4] = ["resources", "group", "action", "condition"];

/// Parses `src` into a document without running semantic validation.
/// Returns `None` if no root node could be recovered.
pub fn parse_syntax(src: &str) -> (Option<Document>, Vec<Diagnostic>) {
    let (doc, diags, _) = parse_recovering(src);
    (doc, diags)
}

/// Like [`parse_syntax`], also returning the names of declarations that
/// were reported as invalid, so later references to them are not reported
/// again as unknown.
pub(crate) fn parse_recovering(src: &str) -> (Option<Document>, Vec<Diagnostic>, HashSet<String>) {
    let (tokens, diags) = lex(src);
    let mut p = Parser {
        tokens,
        pos: 0,
        diags,
        rejected: HashSet::new(),
    };
    let doc = p.document();
    (doc, p.diags, p.rejected)
}

/// Marker for an error that has already been reported.
struct Reported;

type PResult<T> = Result<T, Reported>;

enum Value {
    Num(f64),
    Ident(String),
    Set(Vec<Name>),
    List(Vec<Spanned<Tok>>),
}

struct Param {
    key: Name,
    value: Value,
    span: Span,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    rejected: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail(&mut self, code: Code, span: Span, msg: impl Into<String>) -> Reported {
        self.diags.push(Diagnostic::new(code, span, msg));
        Reported
    }

    fn error<T>(&mut self, code: Code, span: Span, msg: impl Into<String>) -> PResult<T> {
        Err(self.fail(code, span, msg))
    }

    fn unexpected<T>(&mut self, what: &str) -> PResult<T> {
        let t = self.peek().clone();
        self.error(
            Code::Syntax,
            t.span,
            format!("expected {what}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.peek().tok == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        if let Tok::Ident(s) = &self.peek().tok {
            let s = s.clone();
            let span = self.bump().span;
            Ok(Spanned::new(s, span))
        } else {
            self.unexpected(what)
        }
    }

    fn number(&mut self, what: &str) -> PResult<Spanned<f64>> {
        if let Tok::Number(n) = self.peek().tok {
            let span = self.bump().span;
            Ok(Spanned::new(n, span))
        } else {
            self.unexpected(what)
        }
    }

    fn at_decl_start(&self) -> bool {
        match &self.peek().tok {
            Tok::Ident(s) => DECL_KEYWORDS.contains(&s.as_str()),
            Tok::LParen | Tok::Eof => true,
            _ => false,
        }
    }

    fn recover_to_decl(&mut self) {
        while !self.at_decl_start() {
            self.bump();
        }
    }

    fn document(&mut self) -> Option<Document> {
        let mut doc = Document {
            resources: Vec::new(),
            groups: Vec::new(),
            conditions: Vec::new(),
            actions: Vec::new(),
            root: NodeExpr::new(NodeHead::Sequence, Vec::new()),
        };
        loop {
            let tok = self.peek().clone();
            let outcome = match &tok.tok {
                Tok::Ident(k) if k == "resources" => self.resources_decl(&mut doc),
                Tok::Ident(k) if k == "group" => self.group_decl(&mut doc),
                Tok::Ident(k) if k == "action" => self.action_decl(&mut doc),
                Tok::Ident(k) if k == "condition" => self.condition_decl(&mut doc),
                Tok::LParen => break,
                Tok::Eof => {
                    self.diags.push(Diagnostic::new(
                        Code::Syntax,
                        tok.span,
                        "expected a root node",
                    ));
                    return None;
                }
                other => {
                    self.diags.push(Diagnostic::new(
                        Code::Syntax,
                        tok.span,
                        format!("expected a declaration or `(`, found {}", other.describe()),
                    ));
                    self.bump();
                    Err(Reported)
                }
            };
            if outcome.is_err() {
                self.recover_to_decl();
            }
        }
        let root = self.node().ok();
        if self.peek().tok != Tok::Eof {
            let t = self.peek().clone();
            self.diags.push(Diagnostic::new(
                Code::Syntax,
                t.span,
                format!("unexpected {} after the root node", t.tok.describe()),
            ));
        }
        doc.root = root?;
        Some(doc)
    }

    fn resources_decl(&mut self, doc: &mut Document) -> PResult<()> {
        self.bump();
        doc.resources.extend(self.name_set()?);
        Ok(())
    }

    fn name_set(&mut self) -> PResult<Vec<Name>> {
        self.expect(Tok::LBrace)?;
        let mut names = Vec::new();
        if self.peek().tok == Tok::RBrace {
            self.bump();
            return Ok(names);
        }
        loop {
            names.push(self.ident("a resource name")?);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBrace => {
                    self.bump();
                    return Ok(names);
                }
                _ => return self.unexpected("`,` or `}`"),
            }
        }
    }

    fn group_decl(&mut self, doc: &mut Document) -> PResult<()> {
        self.bump();
        let name = self.ident("a group name")?;
        self.rejected.insert(name.value.clone());
        let kind = self.ident("`absolute` or `relative`")?;
        let (policy, span) = match kind.value.as_str() {
            "absolute" => {
                self.expect(Tok::LBracket)?;
                let mut levels = Vec::new();
                while let Tok::Number(n) = self.peek().tok {
                    self.bump();
                    levels.push(n);
                }
                self.expect(Tok::RBracket)?;
                (BarrierPolicy::absolute(levels), kind.span)
            }
            "relative" => {
                let delta = self.number("a threshold")?;
                (BarrierPolicy::relative(delta.value), delta.span)
            }
            other => {
                return self.error(
                    Code::Syntax,
                    kind.span,
                    format!("expected `absolute` or `relative`, found `{other}`"),
                )
            }
        };
        match policy {
            Ok(policy) => {
                self.rejected.remove(&name.value);
                doc.groups.push(GroupDecl { name, policy });
                Ok(())
            }
            Err(e) => self.error(Code::InvalidParameter, span, e.to_string()),
        }
    }

    fn condition_decl(&mut self, doc: &mut Document) -> PResult<()> {
        self.bump();
        let name = self.ident("a condition name")?;
        self.rejected.insert(name.value.clone());
        let kind = self.ident("`const` or `flag`")?;
        let model = match kind.value.as_str() {
            "const" => {
                let v = self.ident("`true` or `false`")?;
                match v.value.as_str() {
                    "true" => ConditionModel::Const(true),
                    "false" => ConditionModel::Const(false),
                    other => {
                        return self.error(
                            Code::InvalidParameter,
                            v.span,
                            format!("expected `true` or `false`, found `{other}`"),
                        )
                    }
                }
            }
            "flag" => ConditionModel::Flag(self.ident("a blackboard key")?.value),
            other => {
                return self.error(
                    Code::Syntax,
                    kind.span,
                    format!("unknown condition kind `{other}`"),
                )
            }
        };
        self.rejected.remove(&name.value);
        doc.conditions.push(ConditionDecl { name, model });
        Ok(())
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        while matches!(self.peek().tok, Tok::Ident(_)) && *self.peek_at(1) == Tok::Equals {
            let key = self.ident("a parameter name")?;
            self.bump();
            let span = self.peek().span;
            let value = match self.peek().tok.clone() {
                Tok::Number(n) => {
                    self.bump();
                    Value::Num(n)
                }
                Tok::Ident(s) => {
                    self.bump();
                    Value::Ident(s)
                }
                Tok::LBrace => Value::Set(self.name_set()?),
                Tok::LBracket => {
                    self.bump();
                    let mut items = Vec::new();
                    loop {
                        let t = self.peek().clone();
                        match t.tok {
                            Tok::Number(_) | Tok::Ident(_) => {
                                self.bump();
                                items.push(Spanned::new(t.tok, t.span));
                            }
                            Tok::RBracket => {
                                self.bump();
                                break;
                            }
                            _ => return self.unexpected("a list item or `]`"),
                        }
                    }
                    Value::List(items)
                }
                _ => return self.unexpected("a parameter value"),
            };
            if params.iter().any(|p: &Param| p.key.value == key.value) {
                return self.error(
                    Code::InvalidParameter,
                    key.span,
                    format!("parameter `{}` given twice", key.value),
                );
            }
            params.push(Param { key, value, span });
        }
        Ok(params)
    }

    fn action_decl(&mut self, doc: &mut Document) -> PResult<()> {
        self.bump();
        let name = self.ident("an action name")?;
        self.rejected.insert(name.value.clone());
        let kind = self.ident("an action kind")?;
        let params = self.params()?;
        let mut args = Args {
            params,
            kind: kind.clone(),
            diags: Vec::new(),
        };
        let resources = args.set("resources");
        let model = match kind.value.as_str() {
            "linear" => {
                let step = args.positive("step");
                let noise = args.num_checked("noise", 0.0, |n| n >= 0.0, "must be non-negative");
                let start = args.num_checked(
                    "start",
                    0.0,
                    |n| (0.0..=1.0).contains(&n),
                    "must lie in [0, 1]",
                );
                Some(ActionModel::Linear { step, noise, start })
            }
            "battery" => Some(ActionModel::Battery {
                step: args.positive("step"),
            }),
            "perpetual" => Some(ActionModel::Perpetual),
            "profile" => {
                let schedule = if args.has("step") {
                    ProfileSchedule::Constant(args.positive("step"))
                } else if args.has("table") {
                    ProfileSchedule::Table(args.numbers("table"))
                } else if args.has("sigmoid") {
                    ProfileSchedule::sigmoid(args.positive("sigmoid") as usize)
                } else {
                    args.missing("one of `step`, `table`, `sigmoid`");
                    ProfileSchedule::Constant(0.0)
                };
                Some(ActionModel::Profile(schedule))
            }
            "script" => Some(ActionModel::Scripted(args.statuses("statuses"))),
            other => {
                args.diags.push(Diagnostic::new(
                    Code::Syntax,
                    kind.span,
                    format!("unknown action kind `{other}`"),
                ));
                None
            }
        };
        args.reject_unused();
        let failed = !args.diags.is_empty();
        self.diags.append(&mut args.diags);
        match model {
            Some(model) if !failed => {
                self.rejected.remove(&name.value);
                doc.actions.push(ActionDecl {
                    name,
                    model,
                    resources,
                });
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn node(&mut self) -> PResult<NodeExpr> {
        let open = self.expect(Tok::LParen)?;
        match self.node_body(open) {
            Ok(node) => Ok(node),
            Err(NodeError::Closed) => Err(Reported),
            Err(NodeError::Open) => {
                self.skip_to_close();
                Err(Reported)
            }
        }
    }

    fn skip_to_close(&mut self) {
        let mut depth = 1usize;
        loop {
            match self.peek().tok {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        self.bump();
                        return;
                    }
                }
                Tok::Eof => return,
                _ => {}
            }
            self.bump();
        }
    }

    fn node_body(&mut self, open: Span) -> Result<NodeExpr, NodeError> {
        let kw = self.ident("a node kind")?;
        let head = match kw.value.as_str() {
            "seq" => NodeHead::Sequence,
            "seq*" => NodeHead::MemorySequence,
            "fb" => NodeHead::Fallback,
            "fb*" => NodeHead::MemoryFallback,
            "par" => {
                let m = self.number("a success threshold")?;
                if m.value.fract() != 0.0 || m.value < 0.0 {
                    return Err(self
                        .fail(
                            Code::ParallelThreshold,
                            m.span,
                            format!(
                                "parallel threshold must be a positive integer, found {}",
                                m.value
                            ),
                        )
                        .into());
                }
                NodeHead::Parallel(m.value as usize)
            }
            "psync" => NodeHead::ProgressSync(self.ident("a group name")?.value),
            "rsync" => {
                let g = self.ident("`zero` or `const`")?;
                match g.value.as_str() {
                    "zero" => NodeHead::ResourceSync(PriorityIncrement::Zero),
                    "const" => {
                        let c = self.number("an increment")?;
                        if c.value < 0.0 {
                            let msg = "priority increment must be non-negative";
                            return Err(self.fail(Code::InvalidParameter, c.span, msg).into());
                        }
                        NodeHead::ResourceSync(PriorityIncrement::Const(c.value))
                    }
                    other => {
                        let msg = format!("expected `zero` or `const`, found `{other}`");
                        return Err(self.fail(Code::Syntax, g.span, msg).into());
                    }
                }
            }
            "act" => NodeHead::Action(self.ident("an action name")?.value),
            "cond" => NodeHead::Condition(self.ident("a condition name")?.value),
            other => {
                let msg = format!("unknown node kind `{other}`");
                return Err(self.fail(Code::Syntax, kw.span, msg).into());
            }
        };
        let mut children = Vec::new();
        let mut failed = false;
        loop {
            match self.peek().tok {
                Tok::LParen => match self.node() {
                    Ok(child) => children.push(child),
                    Err(Reported) => failed = true,
                },
                Tok::RParen => {
                    self.bump();
                    break;
                }
                _ => {
                    self.unexpected::<()>("a child node or `)`")?;
                }
            }
        }
        if failed {
            return Err(NodeError::Closed);
        }
        Ok(NodeExpr {
            head,
            children,
            span: open,
        })
    }
}

/// Whether a broken node still needs skipping to its closing parenthesis.
enum NodeError {
    Open,
    Closed,
}

impl From<Reported> for NodeError {
    fn from(_: Reported) -> Self {
        NodeError::Open
    }
}

/// Parameter bag for one action declaration.
struct Args {
    params: Vec<Param>,
    kind: Name,
    diags: Vec<Diagnostic>,
}

impl Args {
    fn take(&mut self, key: &str) -> Option<Param> {
        let i = self.params.iter().position(|p| p.key.value == key)?;
        Some(self.params.remove(i))
    }

    fn has(&self, key: &str) -> bool {
        self.params.iter().any(|p| p.key.value == key)
    }

    fn invalid(&mut self, key: &str, span: Span, msg: &str) {
        self.diags.push(Diagnostic::new(
            Code::InvalidParameter,
            span,
            format!("`{key}` {msg}"),
        ));
    }

    fn missing(&mut self, what: &str) {
        self.diags.push(Diagnostic::new(
            Code::InvalidParameter,
            self.kind.span,
            format!("`{}` action requires {what}", self.kind.value),
        ));
    }

    fn wrong_type(&mut self, p: &Param, expected: &str) {
        self.diags.push(Diagnostic::new(
            Code::InvalidParameter,
            p.span,
            format!("`{}` expects {expected}", p.key.value),
        ));
    }

    fn num(&mut self, key: &str) -> Option<Spanned<f64>> {
        let p = self.take(key)?;
        match p.value {
            Value::Num(n) => Some(Spanned::new(n, p.span)),
            _ => {
                self.wrong_type(&p, "a number");
                None
            }
        }
    }

    /// Value of `key` (or `default`), rejected with `msg` unless `ok`.
    fn num_checked(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, msg: &str) -> f64 {
        match self.num(key) {
            Some(n) if ok(n.value) => n.value,
            Some(n) => {
                self.invalid(key, n.span, msg);
                default
            }
            None => default,
        }
    }

    fn positive(&mut self, key: &str) -> f64 {
        if !self.has(key) {
            self.missing(&format!("`{key}`"));
            return 0.0;
        }
        self.num_checked(key, 0.0, |n| n > 0.0, "must be positive")
    }

    fn numbers(&mut self, key: &str) -> Vec<f64> {
        let Some(p) = self.take(key) else {
            return Vec::new();
        };
        match &p.value {
            Value::List(items) if items.iter().all(|i| matches!(i.value, Tok::Number(_))) => items
                .iter()
                .map(|i| match i.value {
                    Tok::Number(n) => n,
                    _ => unreachable!(),
                })
                .collect(),
            _ => {
                self.wrong_type(&p, "a list of numbers");
                Vec::new()
            }
        }
    }

    fn statuses(&mut self, key: &str) -> Vec<NodeStatus> {
        let Some(p) = self.take(key) else {
            self.missing(&format!("`{key}`"));
            return Vec::new();
        };
        let Value::List(items) = &p.value else {
            self.wrong_type(&p, "a list of statuses");
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in items {
            match &item.value {
                Tok::Ident(s) if NodeStatus::from_code(s).is_some() => {
                    out.push(NodeStatus::from_code(s).unwrap())
                }
                other => self.diags.push(Diagnostic::new(
                    Code::InvalidParameter,
                    item.span,
                    format!("expected a status, found {}", other.describe()),
                )),
            }
        }
        if out.is_empty() && self.diags.is_empty() {
            self.invalid(key, p.span, "must not be empty");
        }
        out
    }

    fn set(&mut self, key: &str) -> Vec<Name> {
        let Some(p) = self.take(key) else {
            return Vec::new();
        };
        match p.value {
            Value::Set(names) => names,
            _ => {
                self.wrong_type(&p, "a set `{..}`");
                Vec::new()
            }
        }
    }

    fn reject_unused(&mut self) {
        for p in std::mem::take(&mut self.params) {
            let shown = match &p.value {
                Value::Ident(s) => format!("`{}={s}`", p.key.value),
                _ => format!("`{}`", p.key.value),
            };
            self.diags.push(Diagnostic::new(
                Code::InvalidParameter,
                p.key.span,
                format!("unknown parameter {shown} for `{}` action", self.kind.value),
            ));
        }
    }
}
