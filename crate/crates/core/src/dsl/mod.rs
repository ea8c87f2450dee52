//! The `.abm` modelling language: lexer, parser, checker and canonical printer.
//!
//! ```text
//! source ──lex──▶ tokens ──parse──▶ raw AST ──check──▶ AbmProgram
//!                                                        │
//!                                  canonical text ◀──print┘
//! ```
//!
//! See `docs/dsl.md` for the grammar.

pub mod ast;
mod check;
mod parser;
pub mod patch;
mod printer;
pub mod token;

pub use ast::*;
pub use check::recorder_type;
pub use patch::{apply_patch, Directive, PatchError};
pub use printer::{print_activity_source, print_expr, print_program, print_statements, print_step};
pub use token::{tokenize, Keyword, Token, TokenKind};

use crate::defect::Defect;

/// Result of analysing a source text.
///
/// `program` is present whenever the source is syntactically valid, even if
/// name resolution or typing failed; in that case `defects` is non-empty.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub program: Option<AbmProgram>,
    pub defects: Vec<Defect>,
    pub syntax_ok: bool,
}

pub fn analyze(source: &str) -> Analysis {
    let (parsed, mut syntax) = parser::parse(source);
    if !syntax.is_empty() {
        sort_by_line(&mut syntax);
        return Analysis {
            program: None,
            defects: syntax,
            syntax_ok: false,
        };
    }
    let (program, mut defects) = check::check(parsed);
    sort_by_line(&mut defects);
    Analysis {
        program: Some(program),
        defects,
        syntax_ok: true,
    }
}

/// Parse and type-check a model. Every problem found is returned as a
/// compilation-error defect ordered by line.
pub fn parse_program(source: &str) -> Result<AbmProgram, Vec<Defect>> {
    let analysis = analyze(source);
    match analysis.program {
        Some(p) if analysis.defects.is_empty() => Ok(p),
        _ => Err(analysis.defects),
    }
}

fn sort_by_line(defects: &mut [Defect]) {
    defects.sort_by_key(|d| d.line().unwrap_or(u32::MAX));
}

/// Legal identifier: ASCII letter or `_`, then letters, digits, `_`; not reserved.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && Keyword::from_word(s).is_none()
        && s != "true"
        && s != "false"
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
param p = 2;

object cell {
  state a: int = 0;
  state b: int = 0;

  activity step {
    a := p;
    b := a + 1;
  }
}

init {
  grid(5, 5);
  cell = 1;
}

schedule {
  Do(cell, step);
}

record m = count_all(cell, b > 2);
";

    #[test]
    fn toy_program_checks() {
        let p = parse_program(TOY).unwrap();
        assert_eq!(p.objects.len(), 1);
        assert_eq!(p.statement_count(), 2);
        let body = &p.objects[0].activities[0].body;
        let Statement::Assign { value, .. } = &body[0] else {
            panic!()
        };
        assert_eq!(value, &Expr::Param("p".into()));
    }

    #[test]
    fn canonical_print_is_a_fixed_point() {
        let p = parse_program(TOY).unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, TOY);
        assert_eq!(parse_program(&printed).unwrap(), p);
    }

    #[test]
    fn unknown_state_names_the_object() {
        let src = TOY.replace("b := a + 1;", "b := imune + 1;");
        let defects = parse_program(&src).unwrap_err();
        assert_eq!(
            defects,
            vec![Defect::compilation(9, "imune", "unknown state of object cell")]
        );
    }

    #[test]
    fn string_argument_is_a_type_mismatch() {
        let src = TOY.replace("a := p;", "if bernoulli(\"x\") { a := p; }");
        let defects = parse_program(&src).unwrap_err();
        assert_eq!(defects.len(), 1);
        assert!(defects[0].reason().starts_with("type mismatch"), "{defects:?}");
        assert_eq!(defects[0].line(), Some(8));
    }

    #[test]
    fn syntax_errors_suppress_semantic_analysis() {
        let src = TOY.replace("a := p;", "a := p").replace("b := a + 1;", "b := zz;");
        let analysis = analyze(&src);
        assert!(!analysis.syntax_ok);
        assert_eq!(analysis.defects.len(), 1);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("spread_distance"));
        assert!(is_identifier("_x1"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier("state"));
        assert!(!is_identifier("true"));
        assert!(!is_identifier(""));
    }

    #[test]
    fn determinism_of_defects() {
        let src = TOY.replace("a := p;", "a := q; zz := 1;");
        assert_eq!(analyze(&src).defects, analyze(&src).defects);
        assert_eq!(analyze(&src).defects.len(), 2);
    }
}
