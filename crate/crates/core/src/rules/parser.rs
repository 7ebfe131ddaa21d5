use thiserror::Error;

use super::{Condition, Field, Literal, Op, Rule, RuleSet, Strategy};
use crate::injector::FaultKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: duplicate rule name \"{name}\"")]
    DuplicateRuleName { name: String, line: usize, col: usize },
    #[error("{line}:{col}: unknown strategy `{token}`")]
    UnknownStrategy { token: String, line: usize, col: usize },
    #[error("{line}:{col}: unknown field `{token}`")]
    UnknownField { token: String, line: usize, col: usize },
}

impl RuleError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            RuleError::Syntax { line, col, .. }
            | RuleError::DuplicateRuleName { line, col, .. }
            | RuleError::UnknownStrategy { line, col, .. }
            | RuleError::UnknownField { line, col, .. } => (*line, *col),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Int(i64),
    Op(Op),
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Op(op) => format!("`{}`", op.as_str()),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> RuleError {
    RuleError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, RuleError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (l, cl) = (line, col);
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '(' | ')' => {
                bump!();
                let tok = if c == '(' { Tok::LParen } else { Tok::RParen };
                out.push(Spanned { tok, line: l, col: cl });
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None | Some('\n') => return Err(syntax(l, cl, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            _ => return Err(syntax(line, col - 1, "invalid escape in string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                out.push(Spanned {
                    tok: Tok::Str(s),
                    line: l,
                    col: cl,
                });
            }
            '=' | '!' | '<' | '>' => {
                bump!();
                let eq = chars.peek() == Some(&'=');
                if eq {
                    bump!();
                }
                let op = match (c, eq) {
                    ('=', true) => Op::Eq,
                    ('!', true) => Op::Ne,
                    ('<', true) => Op::Le,
                    ('>', true) => Op::Ge,
                    ('<', false) => Op::Lt,
                    ('>', false) => Op::Gt,
                    _ => return Err(syntax(l, cl, format!("unexpected character `{c}`"))),
                };
                out.push(Spanned {
                    tok: Tok::Op(op),
                    line: l,
                    col: cl,
                });
            }
            c if c == '-' || c.is_ascii_digit() => {
                let mut s = String::new();
                s.push(bump!().unwrap());
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    bump!();
                }
                let n = s
                    .parse::<i64>()
                    .map_err(|_| syntax(l, cl, format!("invalid integer `{s}`")))?;
                out.push(Spanned {
                    tok: Tok::Int(n),
                    line: l,
                    col: cl,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    bump!();
                }
                out.push(Spanned {
                    tok: Tok::Word(s),
                    line: l,
                    col: cl,
                });
            }
            other => return Err(syntax(l, cl, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 7] = ["rule", "salience", "when", "then", "and", "or", "not"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn expect_word(&mut self, w: &str) -> Result<(), RuleError> {
        let t = self.next();
        match &t.tok {
            Tok::Word(x) if x == w => Ok(()),
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected `{w}`, found {}", other.describe()),
            )),
        }
    }

    fn rule(&mut self) -> Result<(Rule, usize, usize), RuleError> {
        self.expect_word("rule")?;
        let name_tok = self.next();
        let name = match name_tok.tok {
            Tok::Str(s) if !s.is_empty() => s,
            Tok::Str(_) => return Err(syntax(name_tok.line, name_tok.col, "rule name must not be empty")),
            other => {
                return Err(syntax(
                    name_tok.line,
                    name_tok.col,
                    format!("expected rule name string, found {}", other.describe()),
                ))
            }
        };
        let mut salience = 0;
        if self.at_word("salience") {
            self.next();
            let t = self.next();
            salience = match t.tok {
                Tok::Int(n) => n,
                other => {
                    return Err(syntax(
                        t.line,
                        t.col,
                        format!("expected salience integer, found {}", other.describe()),
                    ))
                }
            };
        }
        self.expect_word("when")?;
        let condition = self.or_cond()?;
        self.expect_word("then")?;
        let t = self.next();
        let strategy = match &t.tok {
            Tok::Word(w) => Strategy::parse(w).ok_or_else(|| RuleError::UnknownStrategy {
                token: w.clone(),
                line: t.line,
                col: t.col,
            })?,
            other => {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("expected strategy, found {}", other.describe()),
                ))
            }
        };
        Ok((
            Rule {
                name,
                salience,
                condition,
                strategy,
            },
            name_tok.line,
            name_tok.col,
        ))
    }

    fn or_cond(&mut self) -> Result<Condition, RuleError> {
        let mut items = vec![self.and_cond()?];
        while self.at_word("or") {
            self.next();
            items.push(self.and_cond()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Condition::Or(items)
        })
    }

    fn and_cond(&mut self) -> Result<Condition, RuleError> {
        let mut items = vec![self.term()?];
        while self.at_word("and") {
            self.next();
            items.push(self.term()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Condition::And(items)
        })
    }

    fn term(&mut self) -> Result<Condition, RuleError> {
        if self.at_word("not") {
            self.next();
            return Ok(Condition::Not(Box::new(self.atom()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Condition, RuleError> {
        let t = self.next();
        match &t.tok {
            Tok::LParen => {
                let c = self.or_cond()?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return Err(syntax(
                        close.line,
                        close.col,
                        format!("expected `)`, found {}", close.tok.describe()),
                    ));
                }
                Ok(c)
            }
            Tok::Word(w) if !KEYWORDS.contains(&w.as_str()) => {
                let field = Field::parse(w).ok_or_else(|| RuleError::UnknownField {
                    token: w.clone(),
                    line: t.line,
                    col: t.col,
                })?;
                self.comparison(field)
            }
            other => Err(syntax(
                t.line,
                t.col,
                format!("expected condition, found {}", other.describe()),
            )),
        }
    }

    fn comparison(&mut self, field: Field) -> Result<Condition, RuleError> {
        let t = self.next();
        let op = match t.tok {
            Tok::Op(op) => op,
            other => {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("expected comparison operator, found {}", other.describe()),
                ))
            }
        };
        if op.is_ordering() && !field.is_integer() {
            return Err(syntax(
                t.line,
                t.col,
                format!("`{}` is not defined on field `{}`", op.as_str(), field.as_str()),
            ));
        }
        let v = self.next();
        let value = match (field, &v.tok) {
            (Field::Kind, Tok::Word(w)) => FaultKind::parse(w).map(Literal::Kind),
            (Field::Subject, Tok::Str(s)) => Some(Literal::Str(s.clone())),
            (f, Tok::Int(n)) if f.is_integer() => Some(Literal::Int(*n)),
            _ => None,
        };
        let value = value.ok_or_else(|| {
            let expected = match field {
                Field::Kind => "a failure kind (CF1..CF4)",
                Field::Subject => "a string",
                _ => "an integer",
            };
            syntax(
                v.line,
                v.col,
                format!(
                    "`{}` compares with {expected}, found {}",
                    field.as_str(),
                    v.tok.describe()
                ),
            )
        })?;
        Ok(Condition::Compare { field, op, value })
    }
}

/// Parses a rule file. An empty file yields an empty rule set.
pub fn parse_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut rules: Vec<Rule> = Vec::new();
    while p.peek().tok != Tok::Eof {
        let (rule, line, col) = p.rule()?;
        if rules.iter().any(|r| r.name == rule.name) {
            return Err(RuleError::DuplicateRuleName {
                name: rule.name,
                line,
                col,
            });
        }
        rules.push(rule);
    }
    Ok(RuleSet { rules })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rule() {
        let rs = parse_rules(r#"rule "r1" when kind == CF4 then AS3"#).unwrap();
        assert_eq!(rs.len(), 1);
        let r = &rs.rules()[0];
        assert_eq!(r.name, "r1");
        assert_eq!(r.salience, 0);
        assert_eq!(r.strategy, Strategy::AS3);
        assert_eq!(
            r.condition,
            Condition::Compare {
                field: Field::Kind,
                op: Op::Eq,
                value: Literal::Kind(FaultKind::CF4)
            }
        );
    }

    #[test]
    fn default_rules_parse() {
        let rs = RuleSet::default_rules();
        let names: Vec<_> = rs.rules().iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "restart-on-cf1",
                "replace-on-cf2",
                "redeploy-on-cf3",
                "reconnect-on-cf4"
            ]
        );
    }

    #[test]
    fn duplicate_name() {
        let err =
            parse_rules("rule \"r1\" when kind == CF1 then AS1\nrule \"r1\" when kind == CF2 then AS4").unwrap_err();
        assert_eq!(
            err,
            RuleError::DuplicateRuleName {
                name: "r1".into(),
                line: 2,
                col: 6
            }
        );
    }

    #[test]
    fn unknown_strategy() {
        let err = parse_rules(r#"rule "r1" when kind == CF4 then AS9"#).unwrap_err();
        assert!(matches!(err, RuleError::UnknownStrategy { ref token, line: 1, col: 33 } if token == "AS9"));
    }

    #[test]
    fn unknown_field() {
        let err = parse_rules(r#"rule "r1" when severity > 2 then AS1"#).unwrap_err();
        assert!(matches!(err, RuleError::UnknownField { ref token, line: 1, col: 16 } if token == "severity"));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let rs =
            parse_rules(r#"rule "x" salience -2 when kind == CF1 or kind == CF2 and exception_count > 9 then AS4"#)
                .unwrap();
        let r = &rs.rules()[0];
        assert_eq!(r.salience, -2);
        match &r.condition {
            Condition::Or(items) => {
                assert_eq!(items.len(), 2);
                assert!(matches!(items[1], Condition::And(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn not_and_parens() {
        let rs = parse_rules(
            "# comment\nrule \"x\" when not (subject == \"Query Service\" or dependent_count >= 2) then AS1 # trailing",
        )
        .unwrap();
        assert!(matches!(rs.rules()[0].condition, Condition::Not(_)));
    }

    #[test]
    fn type_errors_are_syntax_errors() {
        for src in [
            r#"rule "x" when kind > CF1 then AS1"#,
            r#"rule "x" when kind == 3 then AS1"#,
            r#"rule "x" when subject == Query then AS1"#,
            r#"rule "x" when exception_count == "5" then AS1"#,
            r#"rule "x" when kind == CF7 then AS1"#,
        ] {
            assert!(matches!(parse_rules(src), Err(RuleError::Syntax { .. })), "{src}");
        }
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_rules("rule \"x\" when kind == CF1\n  AS1").unwrap_err();
        assert_eq!(err.position(), (2, 3));
        let err = parse_rules("rule \"x when kind == CF1 then AS1").unwrap_err();
        assert_eq!(err.position(), (1, 6));
        let err = parse_rules("rule \"\" when kind == CF1 then AS1").unwrap_err();
        assert_eq!(err.position(), (1, 6));
        let err = parse_rules("rule \"x\" when (kind == CF1 then AS1").unwrap_err();
        assert_eq!(err.position(), (1, 28));
        assert!(matches!(
            parse_rules("rule \"x\" when kind == CF1 then"),
            Err(RuleError::Syntax { .. })
        ));
    }

    #[test]
    fn empty_file_is_empty_ruleset() {
        assert!(parse_rules("").unwrap().is_empty());
        assert!(parse_rules("  # nothing here\n").unwrap().is_empty());
    }

    #[test]
    fn print_then_parse() {
        let src = r#"
            rule "a \"quoted\" name" salience 3 when not kind == CF2 and (subject != "x\\y" or prior_failures_of_subject < -1) then AS2
            rule "b" when (kind == CF1 and kind == CF1) and exception_count <= 4 then AS1
        "#;
        let rs = parse_rules(src).unwrap();
        assert_eq!(parse_rules(&rs.to_string()).unwrap(), rs);
    }
}
