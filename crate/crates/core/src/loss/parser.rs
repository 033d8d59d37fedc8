use thiserror::Error;

use super::LossExpr;

pub const MAX_SOURCE_BYTES: usize = 4096;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        Self {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| ParseError::new(start, format!("malformed number `{text}`")))?;
                if !v.is_finite() {
                    return Err(ParseError::new(start, format!("number `{text}` is out of range")));
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(i, format!("unexpected character {ch:?}")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

fn scan_number(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    if i < b.len() && b[i] == b'.' {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::new(
                self.offset(),
                format!("expected {}, found {}", describe(&want), describe(self.peek())),
            ))
        }
    }

    fn expr(&mut self) -> Result<LossExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = LossExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = LossExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<LossExpr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = LossExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = LossExpr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<LossExpr, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            base = LossExpr::Pow(Box::new(base), self.exponent()?);
        }
        Ok(if negate {
            LossExpr::Neg(Box::new(base))
        } else {
            base
        })
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        let at = self.offset();
        let sign = if *self.peek() == Tok::Minus {
            self.bump();
            -1.0
        } else {
            1.0
        };
        match self.bump() {
            Tok::Num(v) => Ok(sign * v),
            _ => Err(ParseError::new(at, "exponent must be a numeric constant")),
        }
    }

    fn atom(&mut self) -> Result<LossExpr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(LossExpr::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "y" => Ok(LossExpr::VarY),
                "p" => Ok(LossExpr::VarP),
                "log" | "exp" | "abs" => {
                    self.expect(Tok::LParen)?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Tok::RParen)?;
                    Ok(match name.as_str() {
                        "log" => LossExpr::Log(arg),
                        "exp" => LossExpr::Exp(arg),
                        _ => LossExpr::Abs(arg),
                    })
                }
                _ => Err(ParseError::new(
                    at,
                    format!("unknown identifier `{name}` (expected y, p, log, exp or abs)"),
                )),
            },
            Tok::End if at == 0 => Err(ParseError::new(at, "empty expression")),
            other => Err(ParseError::new(
                at,
                format!("expected an operand, found {}", describe(&other)),
            )),
        }
    }
}

pub fn parse_loss(text: &str) -> Result<LossExpr, ParseError> {
    if text.len() > MAX_SOURCE_BYTES {
        return Err(ParseError::new(
            MAX_SOURCE_BYTES,
            format!("expression longer than {MAX_SOURCE_BYTES} bytes"),
        ));
    }
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    if *parser.peek() == Tok::End {
        return Err(ParseError::new(text.len(), "empty expression"));
    }
    let expr = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(expr),
        Tok::RParen => Err(ParseError::new(parser.offset(), "unbalanced `)`")),
        other => Err(ParseError::new(
            parser.offset(),
            format!("unexpected {}", describe(other)),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use LossExpr::*;

    fn b(e: LossExpr) -> Box<LossExpr> {
        Box::new(e)
    }

    #[test]
    fn squared_error_tree() {
        assert_eq!(
            parse_loss("(y - p)^2").unwrap(),
            Pow(b(Sub(b(VarY), b(VarP))), 2.0)
        );
    }

    #[test]
    fn unbalanced_paren_at_end() {
        let err = parse_loss("log(p").unwrap_err();
        assert_eq!(err.position, 5);
        let err = parse_loss("p)").unwrap_err();
        assert_eq!(err.position, 1);
    }

    #[test]
    fn unknown_identifier_is_named() {
        let err = parse_loss("q + 1").unwrap_err();
        assert_eq!(err.position, 0);
        assert!(err.message.contains("`q`"));
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_loss("").unwrap_err().position, 0);
        assert_eq!(parse_loss("   ").unwrap_err().position, 3);
    }

    #[test]
    fn exponent_must_be_constant() {
        let err = parse_loss("p^p").unwrap_err();
        assert_eq!(err.position, 2);
        assert!(err.message.contains("constant"));
        assert!(parse_loss("p^(2)").is_err());
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        assert_eq!(parse_loss("-p^2").unwrap(), Neg(b(Pow(b(VarP), 2.0))));
    }

    #[test]
    fn left_associative() {
        assert_eq!(
            parse_loss("y - p - 1").unwrap(),
            Sub(b(Sub(b(VarY), b(VarP))), b(Const(1.0)))
        );
        assert_eq!(
            parse_loss("y / p * 2").unwrap(),
            Mul(b(Div(b(VarY), b(VarP))), b(Const(2.0)))
        );
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(parse_loss("1e-3").unwrap(), Const(1e-3));
        assert_eq!(parse_loss("2.5E2").unwrap(), Const(250.0));
        assert!(parse_loss("1e999").is_err());
    }

    #[test]
    fn length_limit() {
        let long = "p+".repeat(2100) + "p";
        assert_eq!(parse_loss(&long).unwrap_err().position, MAX_SOURCE_BYTES);
    }

    #[test]
    fn double_unary_minus_needs_parens() {
        assert!(parse_loss("--p").is_err());
        assert_eq!(parse_loss("-(-p)").unwrap(), Neg(b(Neg(b(VarP)))));
    }

    fn arb_expr() -> impl Strategy<Value = LossExpr> {
        let leaf = prop_oneof![
            Just(VarY),
            Just(VarP),
            (0u32..1000, 0u32..4).prop_map(|(m, e)| Const(m as f64 / 10f64.powi(e as i32))),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, c)| Add(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(|(a, c)| Sub(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(|(a, c)| Mul(b(a), b(c))),
                (inner.clone(), inner.clone()).prop_map(|(a, c)| Div(b(a), b(c))),
                inner.clone().prop_map(|a| Neg(b(a))),
                (inner.clone(), -40i32..40).prop_map(|(a, e)| Pow(b(a), e as f64 / 4.0)),
                inner.clone().prop_map(|a| Log(b(a))),
                inner.clone().prop_map(|a| Exp(b(a))),
                inner.prop_map(|a| Abs(b(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_round_trips(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_loss(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert_eq!(back, e);
        }

        #[test]
        fn parser_never_panics(s in "[yplogexpabs0-9.()+*/^ -]{0,40}") {
            let _ = parse_loss(&s);
        }
    }
}
