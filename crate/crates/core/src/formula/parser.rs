use super::{Formula, Term};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Plus,
    Minus,
    Colon,
    Star,
    Tilde,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '.'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            ':' => Some(Tok::Colon),
            '*' => Some(Tok::Star),
            '~' => Some(Tok::Tilde),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos });
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
        } else if c == '`' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && chars[j].1 != '`' {
                j += 1;
            }
            if j == chars.len() {
                return Err(Error::Syntax {
                    position: pos,
                    message: "unterminated backquoted name".into(),
                });
            }
            let name: String = chars[start..j].iter().map(|&(_, c)| c).collect();
            if name.is_empty() {
                return Err(Error::Syntax {
                    position: pos,
                    message: "empty backquoted name".into(),
                });
            }
            out.push(Token {
                tok: Tok::Ident(name),
                pos,
            });
            i = j + 1;
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                j += 1;
            }
            let s: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            out.push(Token {
                tok: Tok::Number(s),
                pos,
            });
            i = j;
        } else if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j].1) {
                j += 1;
            }
            let s: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            out.push(Token {
                tok: Tok::Ident(s),
                pos,
            });
            i = j;
        } else if matches!(c, '/' | '|' | '(' | ')' | '^' | '%') {
            return Err(Error::UnsupportedOperator {
                operator: c.to_string(),
                position: pos,
            });
        } else {
            return Err(Error::Syntax {
                position: pos,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

enum Item {
    Intercept(bool),
    Terms(Vec<Term>),
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.idx).map_or(self.end, |t| t.pos)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        self.idx += 1;
        t
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.idx += 1;
                Ok(name)
            }
            Some(Tok::Number(n)) => self.syntax(format!("unexpected number `{n}` inside a term")),
            Some(other) => self.syntax(format!("expected a variable name, found {}", describe(other))),
            None => self.syntax("expected a variable name, found end of formula"),
        }
    }

    // inter := ident (':' ident)*
    fn interaction(&mut self) -> Result<Term> {
        let mut vars = vec![self.ident()?];
        while self.peek() == Some(&Tok::Colon) {
            self.idx += 1;
            let v = self.ident()?;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        Ok(Term::new(vars))
    }

    // product := inter ('*' inter)*, expanded to every non-empty subset.
    fn product(&mut self) -> Result<Vec<Term>> {
        let mut factors = vec![self.interaction()?];
        while self.peek() == Some(&Tok::Star) {
            self.idx += 1;
            factors.push(self.interaction()?);
        }
        if factors.len() > 16 {
            return self.syntax("too many crossed factors");
        }
        let mut terms = Vec::new();
        for mask in 1u32..(1 << factors.len()) {
            let mut vars: Vec<String> = Vec::new();
            for (k, f) in factors.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    for v in &f.variables {
                        if !vars.contains(v) {
                            vars.push(v.clone());
                        }
                    }
                }
            }
            terms.push(Term::new(vars));
        }
        Ok(terms)
    }

    fn item(&mut self) -> Result<Item> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let item = match n.as_str() {
                    "1" => Item::Intercept(true),
                    "0" => Item::Intercept(false),
                    other => {
                        return self.syntax(format!("only 0 and 1 are valid numeric terms, found `{other}`"))
                    }
                };
                self.idx += 1;
                if matches!(self.peek(), Some(Tok::Colon | Tok::Star)) {
                    return self.syntax("numeric terms cannot be interacted");
                }
                Ok(item)
            }
            _ => self.product().map(Item::Terms),
        }
    }

    fn rhs(&mut self) -> Result<(bool, Vec<Term>, Vec<Term>)> {
        let mut intercept = true;
        let mut added: Vec<Term> = Vec::new();
        let mut removed: Vec<Term> = Vec::new();
        if self.peek().is_none() {
            return Ok((intercept, added, removed));
        }
        let mut negate = false;
        if self.peek() == Some(&Tok::Minus) {
            self.idx += 1;
            negate = true;
        } else if self.peek() == Some(&Tok::Plus) {
            self.idx += 1;
        }
        loop {
            match self.item()? {
                Item::Intercept(on) => intercept = if negate { !on } else { on },
                Item::Terms(ts) if negate => removed.extend(ts),
                Item::Terms(ts) => added.extend(ts),
            }
            match self.peek() {
                None => break,
                Some(Tok::Plus) => negate = false,
                Some(Tok::Minus) => negate = true,
                Some(other) => {
                    let msg = format!("expected `+` or `-`, found {}", describe(other));
                    return self.syntax(msg);
                }
            }
            self.idx += 1;
            if self.peek().is_none() {
                return self.syntax("expected a term after operator");
            }
        }
        Ok((intercept, added, removed))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Star => "`*`".into(),
        Tok::Tilde => "`~`".into(),
    }
}

pub(super) fn parse(text: &str, expects_response: bool) -> Result<(Formula, Vec<String>)> {
    let tokens = tokenize(text)?;
    if expects_response && tokens.is_empty() {
        return Err(Error::Syntax {
            position: 0,
            message: "empty formula".into(),
        });
    }
    let tildes: Vec<usize> = tokens
        .iter()
        .filter(|t| t.tok == Tok::Tilde)
        .map(|t| t.pos)
        .collect();
    if tildes.len() > 1 {
        return Err(Error::Syntax {
            position: tildes[1],
            message: "unexpected second `~`".into(),
        });
    }
    let mut p = Parser {
        tokens,
        idx: 0,
        end: text.len(),
    };

    let response = match tildes.first() {
        Some(_) if p.peek() == Some(&Tok::Tilde) => {
            p.idx += 1;
            None
        }
        Some(_) => {
            let name = p.ident()?;
            match p.bump() {
                Some(Token { tok: Tok::Tilde, .. }) => Some(name),
                Some(t) => {
                    return Err(Error::Syntax {
                        position: t.pos,
                        message: "the response must be a single variable name".into(),
                    })
                }
                None => unreachable!("a `~` token exists"),
            }
        }
        None => None,
    };
    match (&response, expects_response) {
        (None, true) => {
            return Err(Error::Syntax {
                position: 0,
                message: "formula requires a response, e.g. `y ~ x`".into(),
            })
        }
        (Some(_), false) => {
            return Err(Error::Syntax {
                position: 0,
                message: "a scale formula has no response; write `~ x`".into(),
            })
        }
        _ => {}
    }
    if expects_response && p.peek().is_none() {
        return p.syntax("expected a right-hand side after `~`");
    }

    let (intercept, added, removed) = p.rhs()?;

    let mut warnings = Vec::new();
    let mut terms: Vec<Term> = Vec::new();
    for t in added {
        if terms.iter().any(|u| u.same_set(&t)) {
            let w = format!("duplicate term `{t}` ignored");
            log::warn!("{w}");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        } else {
            terms.push(t);
        }
    }
    terms.retain(|t| !removed.iter().any(|r| r.same_set(t)));
    // Stable: ties keep first-appearance order.
    terms.sort_by_key(Term::order);

    Ok((
        Formula {
            response,
            intercept,
            terms,
        },
        warnings,
    ))
}
