//! Lexer for `.abm` sources.
//!
//! Longest-match scanning; `#` starts a comment that runs to end of line.
//! Illegal characters become lexical defects and scanning continues.

use crate::defect::Defect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Param,
    Object,
    State,
    Activity,
    If,
    Else,
    ForNeighbor,
    Within,
    Emit,
    Todo,
    Schedule,
    Init,
    Record,
    Grid,
    Seed,
    Do,
    RandomDo,
    ConditionalDo,
    RandomConditionalDo,
    BoolType,
    IntType,
    RealType,
    PositionType,
    And,
    Or,
    Not,
    SelfRef,
    Neighbor,
    Bernoulli,
    Uniform,
    Randint,
    CountNeighbors,
    CountAll,
    SumAll,
    Distance,
    RandomPosition,
    Jitter,
}

impl Keyword {
    pub const ALL: [Keyword; 37] = [
        Keyword::Param,
        Keyword::Object,
        Keyword::State,
        Keyword::Activity,
        Keyword::If,
        Keyword::Else,
        Keyword::ForNeighbor,
        Keyword::Within,
        Keyword::Emit,
        Keyword::Todo,
        Keyword::Schedule,
        Keyword::Init,
        Keyword::Record,
        Keyword::Grid,
        Keyword::Seed,
        Keyword::Do,
        Keyword::RandomDo,
        Keyword::ConditionalDo,
        Keyword::RandomConditionalDo,
        Keyword::BoolType,
        Keyword::IntType,
        Keyword::RealType,
        Keyword::PositionType,
        Keyword::And,
        Keyword::Or,
        Keyword::Not,
        Keyword::SelfRef,
        Keyword::Neighbor,
        Keyword::Bernoulli,
        Keyword::Uniform,
        Keyword::Randint,
        Keyword::CountNeighbors,
        Keyword::CountAll,
        Keyword::SumAll,
        Keyword::Distance,
        Keyword::RandomPosition,
        Keyword::Jitter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Param => "param",
            Keyword::Object => "object",
            Keyword::State => "state",
            Keyword::Activity => "activity",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::ForNeighbor => "for_neighbor",
            Keyword::Within => "within",
            Keyword::Emit => "emit",
            Keyword::Todo => "todo",
            Keyword::Schedule => "schedule",
            Keyword::Init => "init",
            Keyword::Record => "record",
            Keyword::Grid => "grid",
            Keyword::Seed => "seed",
            Keyword::Do => "Do",
            Keyword::RandomDo => "Random_Do",
            Keyword::ConditionalDo => "Conditional_Do",
            Keyword::RandomConditionalDo => "Random_Conditional_Do",
            Keyword::BoolType => "bool",
            Keyword::IntType => "int",
            Keyword::RealType => "real",
            Keyword::PositionType => "position",
            Keyword::And => "and",
            Keyword::Or => "or",
            Keyword::Not => "not",
            Keyword::SelfRef => "self",
            Keyword::Neighbor => "neighbor",
            Keyword::Bernoulli => "bernoulli",
            Keyword::Uniform => "uniform",
            Keyword::Randint => "randint",
            Keyword::CountNeighbors => "count_neighbors",
            Keyword::CountAll => "count_all",
            Keyword::SumAll => "sum_all",
            Keyword::Distance => "distance",
            Keyword::RandomPosition => "random_position",
            Keyword::Jitter => "jitter",
        }
    }

    pub fn from_word(word: &str) -> Option<Keyword> {
        Keyword::ALL.iter().copied().find(|k| k.as_str() == word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword(Keyword),
    Int,
    Real,
    Bool,
    Str,
    /// `:=`
    Assign,
    /// `=`
    Eq,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
}

impl TokenKind {
    pub fn is_keyword(self) -> bool {
        matches!(self, TokenKind::Keyword(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text of the token. For string literals this is the unescaped content.
    pub text: String,
    pub line: u32,
    pub col: u32,
}

/// Tokenize a source, failing with every lexical defect found.
pub fn tokenize(source: &str) -> Result<Vec<Token>, Vec<Defect>> {
    let (tokens, defects) = lex(source);
    if defects.is_empty() {
        Ok(tokens)
    } else {
        Err(defects)
    }
}

/// Tokenize with recovery: illegal characters are reported and skipped.
pub fn lex(source: &str) -> (Vec<Token>, Vec<Defect>) {
    Lexer::new(source).run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    defects: Vec<Defect>,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            tokens: Vec::new(),
            defects: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32, col: u32) {
        self.tokens.push(Token { kind, text, line, col });
    }

    fn run(mut self) -> (Vec<Token>, Vec<Defect>) {
        while let Some(c) = self.peek(0) {
            let (line, col) = (self.line, self.col);
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek(0) {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut word = String::new();
                while let Some(c) = self.peek(0) {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let kind = match word.as_str() {
                    "true" | "false" => TokenKind::Bool,
                    w => Keyword::from_word(w)
                        .map(TokenKind::Keyword)
                        .unwrap_or(TokenKind::Ident),
                };
                self.push(kind, word, line, col);
            } else if c.is_ascii_digit() {
                self.number(line, col);
            } else if c == '"' {
                self.string(line, col);
            } else {
                self.punct(c, line, col);
            }
        }
        (self.tokens, self.defects)
    }

    fn number(&mut self, line: u32, col: u32) {
        let mut text = String::new();
        let mut real = false;
        while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
            text.push(c);
            self.bump();
        }
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            real = true;
            text.push('.');
            self.bump();
            while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
                text.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(0), Some('e' | 'E')) {
            let sign = matches!(self.peek(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                real = true;
                for _ in 0..digit_at {
                    text.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek(0).filter(|c| c.is_ascii_digit()) {
                    text.push(c);
                    self.bump();
                }
            }
        }
        if real {
            self.push(TokenKind::Real, text, line, col);
        } else if text.parse::<i64>().is_ok() {
            self.push(TokenKind::Int, text, line, col);
        } else {
            self.defects
                .push(Defect::compilation(line, text, "integer literal out of range"));
        }
    }

    fn string(&mut self, line: u32, col: u32) {
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some(c) => text.push(c),
                    None => break,
                },
                Some('\n') | None => {
                    self.defects.push(Defect::compilation(
                        line,
                        format!("\"{text}"),
                        "unterminated string literal",
                    ));
                    return;
                }
                Some(c) => text.push(c),
            }
        }
        self.push(TokenKind::Str, text, line, col);
    }

    fn punct(&mut self, c: char, line: u32, col: u32) {
        let next = self.peek(1);
        let (kind, len) = match (c, next) {
            (':', Some('=')) => (TokenKind::Assign, 2),
            ('=', Some('=')) => (TokenKind::EqEq, 2),
            ('!', Some('=')) => (TokenKind::NotEq, 2),
            ('<', Some('=')) => (TokenKind::Le, 2),
            ('>', Some('=')) => (TokenKind::Ge, 2),
            ('=', _) => (TokenKind::Eq, 1),
            ('<', _) => (TokenKind::Lt, 1),
            ('>', _) => (TokenKind::Gt, 1),
            ('+', _) => (TokenKind::Plus, 1),
            ('-', _) => (TokenKind::Minus, 1),
            ('*', _) => (TokenKind::Star, 1),
            ('/', _) => (TokenKind::Slash, 1),
            ('(', _) => (TokenKind::LParen, 1),
            (')', _) => (TokenKind::RParen, 1),
            ('{', _) => (TokenKind::LBrace, 1),
            ('}', _) => (TokenKind::RBrace, 1),
            (',', _) => (TokenKind::Comma, 1),
            (';', _) => (TokenKind::Semi, 1),
            (':', _) => (TokenKind::Colon, 1),
            ('.', _) => (TokenKind::Dot, 1),
            _ => {
                self.bump();
                self.defects.push(Defect::compilation(
                    line,
                    c.to_string(),
                    format!("illegal character '{c}'"),
                ));
                return;
            }
        };
        let mut text = String::new();
        for _ in 0..len {
            text.push(self.bump().unwrap());
        }
        self.push(kind, text, line, col);
    }
}
