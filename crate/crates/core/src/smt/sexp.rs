use std::fmt;

/// A parsed s-expression. `|quoted|` symbols keep their contents without the bars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => write!(f, "{s:?}"),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError(pub String);

/// Parses every top-level s-expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    while pos < chars.len() {
        let c = chars[pos];
        match c {
            c if c.is_whitespace() => pos += 1,
            ';' => {
                while pos < chars.len() && chars[pos] != '\n' {
                    pos += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                pos += 1;
            }
            ')' => {
                if stack.len() < 2 {
                    return Err(ParseError(format!("unbalanced ')' at offset {pos}")));
                }
                let items = stack.pop().expect("checked depth");
                stack.last_mut().expect("checked depth").push(Sexp::List(items));
                pos += 1;
            }
            '|' => {
                let end = find(&chars, pos + 1, '|')?;
                stack.last_mut().expect("root").push(Sexp::Atom(chars[pos + 1..end].iter().collect()));
                pos = end + 1;
            }
            '"' => {
                // SMT-LIB escapes a quote inside a string by doubling it.
                let mut s = String::new();
                pos += 1;
                loop {
                    match chars.get(pos) {
                        None => return Err(ParseError("unterminated string".into())),
                        Some('"') if chars.get(pos + 1) == Some(&'"') => {
                            s.push('"');
                            pos += 2;
                        }
                        Some('"') => {
                            pos += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            pos += 1;
                        }
                    }
                }
                stack.last_mut().expect("root").push(Sexp::Str(s));
            }
            _ => {
                let start = pos;
                while pos < chars.len() && !chars[pos].is_whitespace() && !matches!(chars[pos], '(' | ')' | ';') {
                    pos += 1;
                }
                stack.last_mut().expect("root").push(Sexp::Atom(chars[start..pos].iter().collect()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(ParseError("unbalanced '('".into()));
    }
    Ok(stack.pop().expect("root"))
}

fn find(chars: &[char], from: usize, target: char) -> Result<usize, ParseError> {
    chars[from..]
        .iter()
        .position(|&c| c == target)
        .map(|i| from + i)
        .ok_or_else(|| ParseError(format!("unterminated {target}")))
}

/// Reads a bitvector or boolean literal: `#b…`, `#x…`, `(_ bvN w)`, decimal,
/// `(- N)`, `true` and `false`. Negative decimals wrap to `width` bits.
pub fn literal(s: &Sexp, width: u32) -> Option<u64> {
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    match s {
        Sexp::Atom(a) => {
            if let Some(b) = a.strip_prefix("#b") {
                u64::from_str_radix(b, 2).ok()
            } else if let Some(h) = a.strip_prefix("#x") {
                u64::from_str_radix(h, 16).ok()
            } else if a == "true" {
                Some(1)
            } else if a == "false" {
                Some(0)
            } else if let Ok(u) = a.parse::<u64>() {
                Some(u & mask)
            } else {
                a.parse::<i64>().ok().map(|v| v as u64 & mask)
            }
        }
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), v] if minus == "-" => literal(v, width).map(|u| u.wrapping_neg() & mask),
            [Sexp::Atom(us), Sexp::Atom(bv), _] if us == "_" && bv.starts_with("bv") => {
                bv[2..].parse::<u64>().ok().map(|u| u & mask)
            }
            _ => None,
        },
        Sexp::Str(_) => None,
    }
}
