//! OpenQASM 2.0 subset reader/writer.
//!
//! Accepted statements: `OPENQASM`, `include`, `qreg`, `creg`, the gates
//! `u3 u2 u1 x h t tdg s sdg cx swap ccx`, `barrier` and `measure`. Every
//! single-qubit gate other than `x` is canonicalised to `u3`; `ccx` is
//! expanded into the 6-CNOT Clifford+T network at parse time.
//!
//! Gate tags travel as trailing line comments: `// wm:x-pair` marks an
//! inserted watermark X, `// wm:swap` a routing SWAP, `// wm:seam <i>` a
//! partition barrier opening block `i`. A leading `// circuit: <name>`
//! comment carries the circuit name.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Circuit, CircuitError, Gate, GateKind, GateTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QasmError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unsupported gate `{name}`")]
    UnsupportedGate {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: {source}")]
    Invalid {
        line: usize,
        col: usize,
        source: CircuitError,
    },
    #[error("{line}:{col}: unknown register `{name}`")]
    UnknownRegister {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: index {index} out of range for register `{name}` of size {size}")]
    IndexOutOfRange {
        line: usize,
        col: usize,
        name: String,
        index: usize,
        size: usize,
    },
    #[error("no qreg declared")]
    NoQubits,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
    Comment(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (lno, col) = (li + 1, i + 1);
            let push = |out: &mut Vec<Token>, tok| {
                out.push(Token {
                    tok,
                    line: lno,
                    col,
                })
            };
            if c.is_whitespace() {
                i += 1;
            } else if c == '/' && chars.get(i + 1) == Some(&'/') {
                let body: String = chars[i + 2..].iter().collect();
                push(&mut out, Tok::Comment(body.trim().to_string()));
                break;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| QasmError::Syntax {
                    line: lno,
                    col,
                    msg: format!("bad number `{s}`"),
                })?;
                push(&mut out, Tok::Num(v));
            } else if c == '"' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(QasmError::Syntax {
                        line: lno,
                        col,
                        msg: "unterminated string".into(),
                    });
                }
                push(&mut out, Tok::Str(chars[start..i].iter().collect()));
                i += 1;
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                push(&mut out, Tok::Arrow);
                i += 2;
            } else if "()[],;+-*/".contains(c) {
                push(&mut out, Tok::Sym(c));
                i += 1;
            } else {
                return Err(QasmError::Syntax {
                    line: lno,
                    col,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    name: Option<String>,
    gates: Vec<(Gate, usize, usize)>,
}

type Operand = Vec<usize>;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek()
            .or_else(|| self.toks.last())
            .map_or((1, 1), |t| (t.line, t.col))
    }

    fn err(&self, msg: impl Into<String>) -> QasmError {
        let (line, col) = self.here();
        QasmError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<Token, QasmError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), QasmError> {
        match self.next()? {
            Token { tok: Tok::Sym(s), .. } if s == c => Ok(()),
            t => {
                self.pos -= 1;
                Err(QasmError::Syntax {
                    line: t.line,
                    col: t.col,
                    msg: format!("expected `{c}`"),
                })
            }
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, QasmError> {
        match self.next()? {
            Token {
                tok: Tok::Ident(s), ..
            } => Ok(s),
            t => {
                self.pos -= 1;
                Err(QasmError::Syntax {
                    line: t.line,
                    col: t.col,
                    msg: "expected identifier".into(),
                })
            }
        }
    }

    fn integer(&mut self) -> Result<usize, QasmError> {
        match self.next()? {
            Token { tok: Tok::Num(v), .. } if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            t => {
                self.pos -= 1;
                Err(QasmError::Syntax {
                    line: t.line,
                    col: t.col,
                    msg: "expected non-negative integer".into(),
                })
            }
        }
    }

    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            if self.eat_sym('+') {
                v += self.term()?;
            } else if self.eat_sym('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.factor()?;
        loop {
            if self.eat_sym('*') {
                v *= self.factor()?;
            } else if self.eat_sym('/') {
                v /= self.factor()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> Result<f64, QasmError> {
        if self.eat_sym('-') {
            return Ok(-self.factor()?);
        }
        if self.eat_sym('+') {
            return self.factor();
        }
        if self.eat_sym('(') {
            let v = self.expr()?;
            self.expect_sym(')')?;
            return Ok(v);
        }
        match self.next()? {
            Token { tok: Tok::Num(v), .. } => Ok(v),
            Token {
                tok: Tok::Ident(s), ..
            } if s == "pi" => Ok(PI),
            t => {
                self.pos -= 1;
                Err(QasmError::Syntax {
                    line: t.line,
                    col: t.col,
                    msg: "expected expression".into(),
                })
            }
        }
    }

    fn operand(&mut self, classical: bool) -> Result<Operand, QasmError> {
        let (line, col) = self.here();
        let name = self.ident()?;
        let regs = if classical { &self.cregs } else { &self.qregs };
        let Some(reg) = regs.iter().find(|r| r.name == name) else {
            return Err(QasmError::UnknownRegister { line, col, name });
        };
        let (offset, size) = (reg.offset, reg.size);
        if self.eat_sym('[') {
            let index = self.integer()?;
            self.expect_sym(']')?;
            if index >= size {
                return Err(QasmError::IndexOutOfRange {
                    line,
                    col,
                    name,
                    index,
                    size,
                });
            }
            Ok(vec![offset + index])
        } else {
            Ok((offset..offset + size).collect())
        }
    }

    fn operands(&mut self) -> Result<Vec<Operand>, QasmError> {
        let mut ops = vec![self.operand(false)?];
        while self.eat_sym(',') {
            ops.push(self.operand(false)?);
        }
        Ok(ops)
    }

    fn params(&mut self) -> Result<Vec<f64>, QasmError> {
        let mut ps = Vec::new();
        if self.eat_sym('(') && !self.eat_sym(')') {
            ps.push(self.expr()?);
            while self.eat_sym(',') {
                ps.push(self.expr()?);
            }
            self.expect_sym(')')?;
        }
        Ok(ps)
    }

    /// Consumes a trailing comment on the same line as the statement end.
    fn trailing_comment(&mut self, line: usize) -> Option<String> {
        match self.peek() {
            Some(Token {
                tok: Tok::Comment(c),
                line: l,
                ..
            }) if *l == line => {
                let c = c.clone();
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn end_statement(&mut self) -> Result<Option<String>, QasmError> {
        let t = self.peek().cloned();
        self.expect_sym(';')?;
        let line = t.map_or(0, |t| t.line);
        Ok(self.trailing_comment(line))
    }

    fn emit(&mut self, g: Gate, line: usize, col: usize) {
        self.gates.push((g, line, col));
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let start = self.next()?;
        let (line, col) = (start.line, start.col);
        let word = match start.tok {
            Tok::Comment(c) => {
                if self.name.is_none() && self.gates.is_empty() {
                    if let Some(n) = c.strip_prefix("circuit:") {
                        self.name = Some(n.trim().to_string());
                    }
                }
                return Ok(());
            }
            Tok::Ident(w) => w,
            _ => {
                self.pos -= 1;
                return Err(self.err("expected statement"));
            }
        };
        match word.as_str() {
            "OPENQASM" => {
                match self.next()? {
                    Token { tok: Tok::Num(v), .. } if v == 2.0 => {}
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("only OPENQASM 2.0 is supported"));
                    }
                }
                self.end_statement()?;
            }
            "include" => {
                match self.next()? {
                    Token { tok: Tok::Str(_), .. } => {}
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected include path"));
                    }
                }
                self.end_statement()?;
            }
            "qreg" | "creg" => {
                let name = self.ident()?;
                self.expect_sym('[')?;
                let size = self.integer()?;
                self.expect_sym(']')?;
                self.end_statement()?;
                let regs = if word == "qreg" {
                    &mut self.qregs
                } else {
                    &mut self.cregs
                };
                if regs.iter().any(|r| r.name == name) {
                    return Err(QasmError::Syntax {
                        line,
                        col,
                        msg: format!("register `{name}` redeclared"),
                    });
                }
                let offset = regs.iter().map(|r| r.size).sum();
                regs.push(Register { name, offset, size });
            }
            "measure" => {
                let q = self.operand(false)?;
                match self.next()? {
                    Token { tok: Tok::Arrow, .. } => {}
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected `->`"));
                    }
                }
                let c = self.operand(true)?;
                self.end_statement()?;
                if q.len() != c.len() {
                    return Err(QasmError::Syntax {
                        line,
                        col,
                        msg: "measure operand sizes differ".into(),
                    });
                }
                for (q, c) in q.into_iter().zip(c) {
                    self.emit(Gate::measure(q, c), line, col);
                }
            }
            "barrier" => {
                let ops = self.operands()?;
                let comment = self.end_statement()?;
                let qubits: Vec<usize> = ops.into_iter().flatten().collect();
                let seam = comment
                    .as_deref()
                    .and_then(|c| c.strip_prefix("wm:seam"))
                    .and_then(|n| n.trim().parse().ok());
                self.emit(Gate::new(GateKind::Barrier { seam }, qubits), line, col);
            }
            _ => self.gate(word, line, col)?,
        }
        Ok(())
    }

    fn gate(&mut self, name: String, line: usize, col: usize) -> Result<(), QasmError> {
        let (nparams, nqubits) = match name.as_str() {
            "u3" => (3, 1),
            "u2" => (2, 1),
            "u1" => (1, 1),
            "x" | "h" | "t" | "tdg" | "s" | "sdg" => (0, 1),
            "cx" | "swap" => (0, 2),
            "ccx" => (0, 3),
            _ => return Err(QasmError::UnsupportedGate { line, col, name }),
        };
        let ps = self.params()?;
        if ps.len() != nparams {
            return Err(QasmError::Syntax {
                line,
                col,
                msg: format!("`{name}` takes {nparams} parameters, got {}", ps.len()),
            });
        }
        let ops = self.operands()?;
        let comment = self.end_statement()?;
        if ops.len() != nqubits {
            return Err(QasmError::Syntax {
                line,
                col,
                msg: format!("`{name}` takes {nqubits} qubits, got {}", ops.len()),
            });
        }
        if ops.iter().any(|o| o.len() != 1) {
            return Err(QasmError::Syntax {
                line,
                col,
                msg: "register broadcast is only supported for barrier and measure".into(),
            });
        }
        let q: Vec<usize> = ops.into_iter().map(|o| o[0]).collect();
        let tag = match comment.as_deref() {
            Some("wm:x-pair") => GateTag::WatermarkX,
            Some("wm:swap") => GateTag::RoutingSwap,
            _ => GateTag::Original,
        };
        let half = PI / 2.0;
        let quarter = PI / 4.0;
        let g = match name.as_str() {
            "u3" => Gate::u3(q[0], ps[0], ps[1], ps[2]),
            "u2" => Gate::u3(q[0], half, ps[0], ps[1]),
            "u1" => Gate::u3(q[0], 0.0, 0.0, ps[0]),
            "h" => Gate::u3(q[0], half, 0.0, PI),
            "t" => Gate::u3(q[0], 0.0, 0.0, quarter),
            "tdg" => Gate::u3(q[0], 0.0, 0.0, -quarter),
            "s" => Gate::u3(q[0], 0.0, 0.0, half),
            "sdg" => Gate::u3(q[0], 0.0, 0.0, -half),
            "x" => Gate::x(q[0]),
            "cx" => Gate::cx(q[0], q[1]),
            "swap" => Gate::swap(q[0], q[1]),
            "ccx" => {
                let (a, b, c) = (q[0], q[1], q[2]);
                if a == b || b == c || a == c {
                    return Err(QasmError::Invalid {
                        line,
                        col,
                        source: CircuitError::DuplicateQubit(if a == b { a } else { c }),
                    });
                }
                for g in ccx_expansion(a, b, c) {
                    self.emit(g, line, col);
                }
                return Ok(());
            }
            _ => unreachable!(),
        };
        self.emit(g.with_tag(tag), line, col);
        Ok(())
    }
}

/// Toffoli as 6 CNOTs plus H/T/T† (all lowered to U3).
pub(crate) fn ccx_expansion(a: usize, b: usize, c: usize) -> Vec<Gate> {
    let h = |q| Gate::u3(q, PI / 2.0, 0.0, PI);
    let t = |q| Gate::u3(q, 0.0, 0.0, PI / 4.0);
    let tdg = |q| Gate::u3(q, 0.0, 0.0, -PI / 4.0);
    vec![
        h(c),
        Gate::cx(b, c),
        tdg(c),
        Gate::cx(a, c),
        t(c),
        Gate::cx(b, c),
        tdg(c),
        Gate::cx(a, c),
        t(b),
        t(c),
        h(c),
        Gate::cx(a, b),
        t(a),
        tdg(b),
        Gate::cx(a, b),
    ]
}

/// Parses OpenQASM 2.0 restricted to the supported subset.
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        name: None,
        gates: Vec::new(),
    };
    while p.pos < p.toks.len() {
        p.statement()?;
    }
    let nq: usize = p.qregs.iter().map(|r| r.size).sum();
    let nc: usize = p.cregs.iter().map(|r| r.size).sum();
    if nq == 0 {
        return Err(QasmError::NoQubits);
    }
    let mut c = Circuit::with_clbits(nq, nc).map_err(|_| QasmError::NoQubits)?;
    c.name = p.name.unwrap_or_default();
    for (g, line, col) in p.gates {
        c.push(g)
            .map_err(|source| QasmError::Invalid { line, col, source })?;
    }
    Ok(c)
}

fn angle(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the circuit as OpenQASM 2.0 with a single `q`/`c` register pair.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut s = String::new();
    if !c.name.is_empty() {
        let _ = writeln!(s, "// circuit: {}", c.name);
    }
    s.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{}];", c.num_qubits());
    if c.num_clbits() > 0 {
        let _ = writeln!(s, "creg c[{}];", c.num_clbits());
    }
    for g in c.gates() {
        let qs: Vec<String> = g.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let qs = qs.join(",");
        match g.kind {
            GateKind::U3 { theta, phi, lambda } => {
                let _ = write!(
                    s,
                    "u3({},{},{}) {qs};",
                    angle(theta),
                    angle(phi),
                    angle(lambda)
                );
            }
            GateKind::Measure { clbit } => {
                let _ = write!(s, "measure {qs} -> c[{clbit}];");
            }
            _ => {
                let _ = write!(s, "{} {qs};", g.name());
            }
        }
        match (g.kind, g.tag) {
            (GateKind::Barrier { seam: Some(i) }, _) => {
                let _ = write!(s, " // wm:seam {i}");
            }
            (_, GateTag::WatermarkX) => s.push_str(" // wm:x-pair"),
            (_, GateTag::RoutingSwap) => s.push_str(" // wm:swap"),
            _ => {}
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CountKind;

    #[test]
    fn single_x() {
        let c = parse_qasm("qreg q[1]; x q[0];").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert_eq!(c.gates(), &[Gate::x(0)]);
    }

    #[test]
    fn duplicate_qubit_is_rejected() {
        let err = parse_qasm("qreg q[2]; cx q[0], q[0];").unwrap_err();
        assert!(matches!(
            err,
            QasmError::Invalid {
                source: CircuitError::DuplicateQubit(0),
                ..
            }
        ));
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = parse_qasm("qreg q[2];\nx q[0]\ncx q[0],q[1];").unwrap_err();
        let QasmError::Syntax { line, .. } = err else {
            panic!("{err:?}")
        };
        assert_eq!(line, 3);
        assert!(matches!(
            parse_qasm("qreg q[1];\nrz(0.1) q[0];"),
            Err(QasmError::UnsupportedGate { line: 2, col: 1, .. })
        ));
        assert!(matches!(
            parse_qasm("qreg q[2]; x q[2];"),
            Err(QasmError::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn canonicalises_and_expands() {
        let c = parse_qasm(
            "OPENQASM 2.0; include \"qelib1.inc\"; qreg a[2]; qreg b[1];\n\
             h a[0]; u2(0, pi) a[1]; tdg b[0]; ccx a[0],a[1],b[0];",
        )
        .unwrap();
        assert_eq!(c.num_qubits(), 3);
        assert_eq!(c.count_gates(CountKind::Cnot), 6);
        assert_eq!(c.len(), 3 + 15);
        let GateKind::U3 { theta, lambda, .. } = c.gates()[2].kind else {
            panic!()
        };
        assert_eq!(theta, 0.0);
        assert!((lambda - 7.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn empty_circuit_emits_declarations_only() {
        let s = emit_qasm(&Circuit::new(2).unwrap());
        assert_eq!(s, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\n");
    }

    #[test]
    fn tags_and_seams_round_trip() {
        let mut c = Circuit::with_clbits(2, 1).unwrap().named("demo");
        c.extend([
            Gate::u3(0, 0.1, 0.2, 0.3),
            Gate::seam(vec![0, 1], 1),
            Gate::x(0).with_tag(GateTag::WatermarkX),
            Gate::swap(0, 1).with_tag(GateTag::RoutingSwap),
            Gate::x(1).with_tag(GateTag::WatermarkX),
            Gate::measure(1, 0),
        ])
        .unwrap();
        let text = emit_qasm(&c);
        assert_eq!(text.matches("x q[").count(), 2);
        let back = parse_qasm(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(emit_qasm(&back), text);
    }
}
