//! Integer expressions used by node semantics, verdict predicates and chart
//! guards. The textual form is a prefix s-expression such as `(> req floor)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "not",
            UnaryOp::Neg => "neg",
        }
    }
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }

    fn infix_symbol(self) -> &'static str {
        match self {
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
            other => other.symbol(),
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => BinaryOp::Add,
            "-" => BinaryOp::Sub,
            "*" => BinaryOp::Mul,
            "==" => BinaryOp::Eq,
            "!=" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            ">" => BinaryOp::Gt,
            "<=" => BinaryOp::Le,
            ">=" => BinaryOp::Ge,
            "and" => BinaryOp::And,
            "or" => BinaryOp::Or,
            _ => return None,
        })
    }

    fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Gt | BinaryOp::Le | BinaryOp::Ge
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct ExprSyntaxError {
    /// 1-based column in the expression text.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("integer overflow evaluating `{0}`")]
    Overflow(String),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprSyntaxError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0, len: text.chars().count() };
        let expr = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(ExprSyntaxError {
                column: tok.column,
                message: format!("unexpected trailing token `{}`", tok.text),
            });
        }
        Ok(expr)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Variables read by the expression, in first-occurrence order, without duplicates.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn eval<F>(&self, lookup: &F) -> Result<i64, EvalError>
    where
        F: Fn(&str) -> Option<i64>,
    {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::UndefinedVariable(name.clone())),
            Expr::Unary(UnaryOp::Not, e) => Ok((e.eval(lookup)? == 0) as i64),
            Expr::Unary(UnaryOp::Neg, e) => e
                .eval(lookup)?
                .checked_neg()
                .ok_or_else(|| EvalError::Overflow(self.to_string())),
            Expr::Binary(BinaryOp::And, l, r) => {
                Ok((l.eval(lookup)? != 0 && r.eval(lookup)? != 0) as i64)
            }
            Expr::Binary(BinaryOp::Or, l, r) => {
                Ok((l.eval(lookup)? != 0 || r.eval(lookup)? != 0) as i64)
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(lookup)?;
                let b = r.eval(lookup)?;
                let overflow = || EvalError::Overflow(self.to_string());
                Ok(match op {
                    BinaryOp::Add => a.checked_add(b).ok_or_else(overflow)?,
                    BinaryOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
                    BinaryOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
                    BinaryOp::Eq => (a == b) as i64,
                    BinaryOp::Ne => (a != b) as i64,
                    BinaryOp::Lt => (a < b) as i64,
                    BinaryOp::Gt => (a > b) as i64,
                    BinaryOp::Le => (a <= b) as i64,
                    BinaryOp::Ge => (a >= b) as i64,
                    BinaryOp::And | BinaryOp::Or => unreachable!(),
                })
            }
        }
    }

    /// Conventional infix rendering, e.g. `req > floor` or `! req > floor`.
    pub fn to_infix(&self) -> String {
        self.infix(true)
    }

    fn infix(&self, top: bool) -> String {
        match self {
            Expr::Lit(v) => v.to_string(),
            Expr::Var(name) => name.clone(),
            // `! req > floor` reads as the negated comparison in transition tables
            Expr::Unary(UnaryOp::Not, e) => match e.as_ref() {
                Expr::Binary(op, _, _) if op.is_comparison() => format!("! {}", e.infix(true)),
                _ => format!("!{}", e.infix(false)),
            },
            Expr::Unary(UnaryOp::Neg, e) => format!("-{}", e.infix(false)),
            Expr::Binary(op, l, r) => {
                let s = format!("{} {} {}", l.infix(false), op.infix_symbol(), r.infix(false));
                if top {
                    s
                } else {
                    format!("({s})")
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Unary(op, e) => write!(f, "({} {e})", op.symbol()),
            Expr::Binary(op, l, r) => write!(f, "({} {l} {r})", op.symbol()),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug)]
struct Token {
    text: String,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprSyntaxError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' || c == ')' {
            tokens.push(Token { text: c.to_string(), column: i + 1 });
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '(' && chars[i] != ')' {
                i += 1;
            }
            tokens.push(Token { text: chars[start..i].iter().collect(), column: start + 1 });
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn err(&self, column: usize, message: impl Into<String>) -> ExprSyntaxError {
        ExprSyntaxError { column, message: message.into() }
    }

    fn expr(&mut self) -> Result<Expr, ExprSyntaxError> {
        let Some(tok) = self.tokens.get(self.pos) else {
            return Err(self.err(self.len + 1, "unexpected end of expression"));
        };
        let column = tok.column;
        match tok.text.as_str() {
            "(" => {
                self.pos += 1;
                let Some(op_tok) = self.tokens.get(self.pos) else {
                    return Err(self.err(self.len + 1, "missing operator after `(`"));
                };
                let op_text = op_tok.text.clone();
                let op_column = op_tok.column;
                self.pos += 1;
                let mut args = Vec::new();
                loop {
                    match self.tokens.get(self.pos) {
                        None => return Err(self.err(self.len + 1, "unclosed `(`")),
                        Some(t) if t.text == ")" => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => args.push(self.expr()?),
                    }
                }
                build(&op_text, op_column, args)
            }
            ")" => Err(self.err(column, "unexpected `)`")),
            atom => {
                let atom = atom.to_string();
                self.pos += 1;
                parse_atom(&atom, column)
            }
        }
    }
}

fn build(op: &str, column: usize, mut args: Vec<Expr>) -> Result<Expr, ExprSyntaxError> {
    let arity_error = |want: usize| ExprSyntaxError {
        column,
        message: format!("operator `{op}` takes {want} operand(s), got {}", args.len()),
    };
    match op {
        "not" | "neg" => {
            if args.len() != 1 {
                return Err(arity_error(1));
            }
            let unary = if op == "not" { UnaryOp::Not } else { UnaryOp::Neg };
            Ok(Expr::Unary(unary, Box::new(args.pop().unwrap())))
        }
        _ => {
            let Some(binary) = BinaryOp::from_symbol(op) else {
                return Err(ExprSyntaxError { column, message: format!("unknown operator `{op}`") });
            };
            if args.len() != 2 {
                return Err(arity_error(2));
            }
            let rhs = args.pop().unwrap();
            let lhs = args.pop().unwrap();
            Ok(Expr::binary(binary, lhs, rhs))
        }
    }
}

fn parse_atom(atom: &str, column: usize) -> Result<Expr, ExprSyntaxError> {
    let first = atom.chars().next().unwrap_or(' ');
    if first.is_ascii_digit() || (first == '-' && atom.len() > 1) {
        return atom.parse::<i64>().map(Expr::Lit).map_err(|_| ExprSyntaxError {
            column,
            message: format!("invalid integer literal `{atom}`"),
        });
    }
    if is_identifier(atom) {
        Ok(Expr::Var(atom.to_string()))
    } else {
        Err(ExprSyntaxError { column, message: format!("invalid atom `{atom}`") })
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
