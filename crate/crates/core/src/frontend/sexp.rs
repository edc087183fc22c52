use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }
}

/// Reads every top-level expression; `;` starts a comment.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, (Pos, String)> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut out = Vec::new();
    let mut pos = Pos { line: 1, col: 1 };
    let mut chars = text.chars().peekable();
    let mut tok = String::new();
    let mut tok_pos = pos;

    fn flush(tok: &mut String, tok_pos: Pos, stack: &mut [(Vec<Sexp>, Pos)], out: &mut Vec<Sexp>) {
        if tok.is_empty() {
            return;
        }
        let atom = Sexp::Atom(std::mem::take(tok), tok_pos);
        match stack.last_mut() {
            Some((items, _)) => items.push(atom),
            None => out.push(atom),
        }
    }

    while let Some(c) = chars.next() {
        let here = pos;
        if c == '\n' {
            pos.line += 1;
            pos.col = 1;
        } else {
            pos.col += 1;
        }
        match c {
            ';' => {
                flush(&mut tok, tok_pos, &mut stack, &mut out);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    pos.col += 1;
                }
            }
            '(' => {
                flush(&mut tok, tok_pos, &mut stack, &mut out);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut tok, tok_pos, &mut stack, &mut out);
                let (items, start) = stack.pop().ok_or((here, "unbalanced ')'".to_string()))?;
                let list = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => out.push(list),
                }
            }
            c if c.is_whitespace() => flush(&mut tok, tok_pos, &mut stack, &mut out),
            c => {
                if tok.is_empty() {
                    tok_pos = here;
                }
                tok.push(c);
            }
        }
    }
    flush(&mut tok, tok_pos, &mut stack, &mut out);
    if let Some((_, start)) = stack.last() {
        return Err((*start, "unclosed '('".to_string()));
    }
    Ok(out)
}
