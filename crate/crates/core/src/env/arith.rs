//! Restricted evaluator for arithmetic snippets posing as Python code.
//!
//! Supports integer and float literals, `+ - * / // % **`, parentheses,
//! variable assignment, `print(...)` and the builtins `abs`, `round`, `min`,
//! `max`, `int` and `float`. Everything else is a sandbox error.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Num {
    Int(i128),
    Float(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }

    fn render(self) -> String {
        match self {
            Num::Int(i) => i.to_string(),
            Num::Float(f) => render_float(f),
        }
    }
}

fn render_float(f: f64) -> String {
    if f.is_nan() {
        return "nan".into();
    }
    if f.is_infinite() {
        return if f > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let abs = f.abs();
    if abs != 0.0 && !(1e-4..1e16).contains(&abs) {
        let s = format!("{f:e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let exp: i32 = exp.parse().expect("exponent digits");
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    if f.fract() == 0.0 {
        format!("{f:.1}")
    } else {
        format!("{f}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(Num),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '_') {
                is_float |= chars[i] == '.';
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                is_float = true;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
            let num = if is_float {
                Num::Float(text.parse().map_err(|_| format!("invalid literal `{text}`"))?)
            } else {
                Num::Int(text.parse().map_err(|_| format!("invalid literal `{text}`"))?)
            };
            out.push(Token::Num(num));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = match two.as_str() {
            "**" => Some("**"),
            "//" => Some("//"),
            _ => None,
        };
        if let Some(op) = op {
            out.push(Token::Op(op));
            i += 2;
            continue;
        }
        let tok = match c {
            '+' => Token::Op("+"),
            '-' => Token::Op("-"),
            '*' => Token::Op("*"),
            '/' => Token::Op("/"),
            '%' => Token::Op("%"),
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            other => return Err(format!("unsupported character `{other}`")),
        };
        out.push(tok);
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a HashMap<String, Num>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[&'static str]) -> Option<&'static str> {
        if let Some(Token::Op(op)) = self.peek() {
            if ops.contains(op) {
                let op = *op;
                self.pos += 1;
                return Some(op);
            }
        }
        None
    }

    fn expr(&mut self) -> Result<Num, String> {
        let mut acc = self.term()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.term()?;
            acc = binary(op, acc, rhs)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Num, String> {
        let mut acc = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/", "//", "%"]) {
            let rhs = self.unary()?;
            acc = binary(op, acc, rhs)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Num, String> {
        if let Some(op) = self.eat_op(&["+", "-"]) {
            let v = self.unary()?;
            return Ok(match (op, v) {
                ("-", Num::Int(i)) => Num::Int(-i),
                ("-", Num::Float(f)) => Num::Float(-f),
                (_, v) => v,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Num, String> {
        let base = self.atom()?;
        if self.eat_op(&["**"]).is_some() {
            let exp = self.unary()?;
            return binary("**", base, exp);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Num, String> {
        match self.next() {
            Some(Token::Num(n)) => Ok(n),
            Some(Token::LParen) => {
                let v = self.expr()?;
                self.expect_rparen()?;
                Ok(v)
            }
            Some(Token::Ident(name)) => {
                if self.peek() == Some(&Token::LParen) {
                    self.pos += 1;
                    let args = self.args()?;
                    call(&name, &args)
                } else {
                    self.vars.get(&name).copied().ok_or_else(|| format!("NameError: name '{name}' is not defined"))
                }
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }

    fn args(&mut self) -> Result<Vec<Num>, String> {
        let mut args = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.next() {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => return Ok(args),
                _ => return Err("expected `,` or `)`".into()),
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), String> {
        match self.next() {
            Some(Token::RParen) => Ok(()),
            _ => Err("expected `)`".into()),
        }
    }
}

fn overflow() -> String {
    "OverflowError: integer result too large".into()
}

fn zero_division() -> String {
    "ZeroDivisionError: division by zero".into()
}

fn binary(op: &str, a: Num, b: Num) -> Result<Num, String> {
    if let (Num::Int(x), Num::Int(y)) = (a, b) {
        return match op {
            "+" => x.checked_add(y).map(Num::Int).ok_or_else(overflow),
            "-" => x.checked_sub(y).map(Num::Int).ok_or_else(overflow),
            "*" => x.checked_mul(y).map(Num::Int).ok_or_else(overflow),
            "/" if y == 0 => Err(zero_division()),
            "/" => Ok(Num::Float(x as f64 / y as f64)),
            "//" | "%" if y == 0 => Err(zero_division()),
            "//" => {
                let q = x / y;
                Ok(Num::Int(if x % y != 0 && ((x < 0) != (y < 0)) { q - 1 } else { q }))
            }
            "%" => {
                let r = x % y;
                Ok(Num::Int(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r }))
            }
            "**" if y >= 0 => {
                let e = u32::try_from(y).map_err(|_| overflow())?;
                x.checked_pow(e).map(Num::Int).ok_or_else(overflow)
            }
            "**" => Ok(Num::Float((x as f64).powf(y as f64))),
            _ => Err(format!("unsupported operator {op}")),
        };
    }
    let (x, y) = (a.as_f64(), b.as_f64());
    let v = match op {
        "+" => x + y,
        "-" => x - y,
        "*" => x * y,
        "/" | "//" | "%" if y == 0.0 => return Err(zero_division()),
        "/" => x / y,
        "//" => (x / y).floor(),
        "%" => x - y * (x / y).floor(),
        "**" => x.powf(y),
        _ => return Err(format!("unsupported operator {op}")),
    };
    Ok(Num::Float(v))
}

fn call(name: &str, args: &[Num]) -> Result<Num, String> {
    match (name, args) {
        ("abs", [Num::Int(i)]) => Ok(Num::Int(i.abs())),
        ("abs", [Num::Float(f)]) => Ok(Num::Float(f.abs())),
        ("int", [n]) => Ok(Num::Int(n.as_f64().trunc() as i128)),
        ("float", [n]) => Ok(Num::Float(n.as_f64())),
        ("round", [Num::Int(i)]) => Ok(Num::Int(*i)),
        ("round", [Num::Float(f)]) => Ok(Num::Int(f.round_ties_even() as i128)),
        ("round", [Num::Int(i), Num::Int(digits)]) => {
            if *digits >= 0 {
                return Ok(Num::Int(*i));
            }
            let scale = 10i128.checked_pow((-*digits) as u32).ok_or("round() precision out of range")?;
            let q = i.div_euclid(scale);
            let r = i.rem_euclid(scale);
            let up = 2 * r > scale || (2 * r == scale && q % 2 != 0);
            Ok(Num::Int((q + i128::from(up)) * scale))
        }
        ("round", [Num::Float(f), Num::Int(digits)]) if *digits >= 0 => {
            // Formatting rounds the exact binary value, half to even.
            let text = format!("{:.*}", (*digits).min(340) as usize, f);
            text.parse().map(Num::Float).map_err(|e| format!("round(): {e}"))
        }
        ("round", [Num::Float(f), Num::Int(digits)]) => {
            let scale = 10f64.powi((-*digits).min(400) as i32);
            Ok(Num::Float((f / scale).round_ties_even() * scale))
        }
        ("min" | "max", [first, rest @ ..]) => {
            let mut best = *first;
            for &v in rest {
                let better = if name == "min" { v.as_f64() < best.as_f64() } else { v.as_f64() > best.as_f64() };
                if better {
                    best = v;
                }
            }
            Ok(best)
        }
        _ => Err(format!("unsupported call {name}() with {} argument(s)", args.len())),
    }
}

fn eval_expr(src: &str, vars: &HashMap<String, Num>) -> Result<Num, String> {
    let tokens = tokenize(src)?;
    let mut parser = Parser { tokens, pos: 0, vars };
    let v = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(format!("unexpected trailing input in `{}`", src.trim()));
    }
    Ok(v)
}

fn assignment(line: &str) -> Option<(&str, &str)> {
    let (lhs, rhs) = line.split_once('=')?;
    let lhs = lhs.trim();
    let valid = !lhs.is_empty()
        && lhs.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && lhs.chars().all(|c| c.is_alphanumeric() || c == '_');
    (valid && !rhs.starts_with('=')).then_some((lhs, rhs))
}

/// Runs `code` and returns what it printed, or the value of the final bare
/// expression when nothing was printed.
pub fn evaluate_python_expression(code: &str) -> Result<String, String> {
    let mut vars = HashMap::new();
    let mut printed = Vec::new();
    let mut last = None;
    for raw in code.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix("print(").and_then(|s| s.strip_suffix(')')) {
            printed.push(eval_expr(inner, &vars)?.render());
        } else if let Some((name, rhs)) = assignment(line) {
            let v = eval_expr(rhs, &vars)?;
            vars.insert(name.to_string(), v);
        } else {
            let expr = line.strip_prefix("return ").unwrap_or(line);
            last = Some(eval_expr(expr, &vars)?);
        }
    }
    if !printed.is_empty() {
        return Ok(printed.join("\n"));
    }
    last.map(Num::render).ok_or_else(|| "no expression to evaluate".to_string())
}
