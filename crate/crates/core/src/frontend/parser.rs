//! Recursive-descent parser: logical lines -> items -> program units.
//!
//! Each line is parsed into a flat [`Item`]; a small stack machine then
//! rebuilds the block structure (label-terminated DO loops, block IF,
//! modules).

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{logical_lines, tokenize, LogicalLine, SourceForm, Tok, Token};
use super::ParseError;

/// Parses fixed-form FORTRAN 77 text into its program units.
pub fn parse_source(text: &str, path: &str) -> Result<Vec<SourceUnit>, ParseError> {
    parse_with(text, path, SourceForm::Fixed)
}

/// Parses the free-form Fortran 95 shape emitted by the refactorer.
pub fn parse_free_source(text: &str, path: &str) -> Result<Vec<SourceUnit>, ParseError> {
    parse_with(text, path, SourceForm::Free)
}

pub fn parse_with(text: &str, path: &str, form: SourceForm) -> Result<Vec<SourceUnit>, ParseError> {
    let lines = logical_lines(text, form)?;
    let mut p = UnitBuilder::new(path);
    for line in &lines {
        p.line(line)?;
    }
    p.finish()
}

#[derive(Debug)]
enum Item {
    Header { kind: UnitKind, name: String, args: Vec<String>, ty: Option<BaseType> },
    Module(String),
    Contains,
    EndModule,
    Use(Use),
    Decls(Vec<Decl>),
    Leaf(StmtKind),
    DoStart { term: Option<u32>, var: String, start: Expr, end: Expr, step: Option<Expr> },
    IfThen(Expr),
    ElseIf(Expr),
    Else,
    EndIf,
    EndDo,
    LogicalIf(Expr, StmtKind),
    End,
}

enum Frame {
    Do { lp: DoLoop, label: Option<u32>, span: Span },
    If { arms: Vec<(Expr, Vec<Stmt>)>, otherwise: Option<Vec<Stmt>>, label: Option<u32>, span: Span },
}

struct OpenUnit {
    unit: SourceUnit,
    frames: Vec<Frame>,
    in_body: bool,
}

struct UnitBuilder {
    path: String,
    module: Option<String>,
    current: Option<OpenUnit>,
    arrays: HashSet<String>,
    units: Vec<SourceUnit>,
    last_line: usize,
}

impl UnitBuilder {
    fn new(path: &str) -> Self {
        Self { path: path.to_string(), module: None, current: None, arrays: HashSet::new(), units: Vec::new(), last_line: 0 }
    }

    fn line(&mut self, line: &LogicalLine) -> Result<(), ParseError> {
        self.last_line = line.line;
        let toks = tokenize(line)?;
        if toks.is_empty() {
            if line.label.is_some() {
                return Err(ParseError::syntax(line.line, line.col, "label on an empty statement"));
            }
            return Ok(());
        }
        let mut ts = TokStream { toks: &toks, pos: 0, line: line.line, col0: line.col, arrays: &self.arrays };
        let item = ts.item()?;
        let span = Span::new(line.line, line.col);
        self.apply(item, line.label, span)
    }

    fn open(&mut self, span: Span) -> Result<&mut OpenUnit, ParseError> {
        if self.current.is_none() {
            // Headerless main program.
            self.arrays.clear();
            self.current = Some(OpenUnit {
                unit: SourceUnit {
                    path: self.path.clone(),
                    kind: UnitKind::Program,
                    name: "main".into(),
                    args: vec![],
                    module: self.module.clone(),
                    uses: vec![],
                    decls: vec![],
                    body: vec![],
                    span,
                },
                frames: vec![],
                in_body: false,
            });
        }
        Ok(self.current.as_mut().expect("unit is open"))
    }

    fn apply(&mut self, item: Item, label: Option<u32>, span: Span) -> Result<(), ParseError> {
        let err = |m: &str| ParseError::syntax(span.line, span.col, m);
        match item {
            Item::Header { kind, name, args, ty } => {
                if self.current.is_some() {
                    return Err(err("program unit starts before the previous one ended"));
                }
                self.arrays.clear();
                let mut decls = Vec::new();
                if let Some(ty) = ty {
                    decls.push(Decl::Type { ty, entities: vec![Entity { name: name.clone(), dims: vec![] }] });
                }
                self.current = Some(OpenUnit {
                    unit: SourceUnit {
                        path: self.path.clone(),
                        kind,
                        name,
                        args,
                        module: self.module.clone(),
                        uses: vec![],
                        decls,
                        body: vec![],
                        span,
                    },
                    frames: vec![],
                    in_body: false,
                });
            }
            Item::Module(name) => {
                if self.current.is_some() || self.module.is_some() {
                    return Err(err("MODULE inside another unit"));
                }
                self.module = Some(name);
            }
            Item::Contains => {
                if self.module.is_none() || self.current.is_some() {
                    return Err(err("CONTAINS is only supported directly inside a module"));
                }
            }
            Item::EndModule => {
                if self.current.is_some() || self.module.take().is_none() {
                    return Err(err("unexpected END MODULE"));
                }
            }
            Item::Use(u) => {
                let ou = self.open(span)?;
                if ou.in_body || !ou.unit.decls.is_empty() {
                    return Err(err("USE must precede declarations"));
                }
                ou.unit.uses.push(u);
            }
            Item::Decls(ds) => {
                let ou = self.open(span)?;
                if ou.in_body {
                    return Err(err("declaration after the first executable statement"));
                }
                for d in &ds {
                    for (name, rank) in decl_arrays(d) {
                        if rank > 0 {
                            self.arrays.insert(name);
                        }
                    }
                }
                let ou = self.current.as_mut().expect("unit is open");
                ou.unit.decls.extend(ds);
            }
            Item::Leaf(kind) => self.push_stmt(Stmt { label, kind, span })?,
            Item::LogicalIf(cond, kind) => self.push_stmt(Stmt {
                label,
                kind: StmtKind::If { arms: vec![(cond, vec![Stmt { label: None, kind, span }])], otherwise: None },
                span,
            })?,
            Item::DoStart { term, var, start, end, step } => {
                let ou = self.open(span)?;
                ou.in_body = true;
                ou.frames.push(Frame::Do {
                    lp: DoLoop { var, start, end, step, body: vec![], term_label: term },
                    label,
                    span,
                });
            }
            Item::IfThen(cond) => {
                let ou = self.open(span)?;
                ou.in_body = true;
                ou.frames.push(Frame::If { arms: vec![(cond, vec![])], otherwise: None, label, span });
            }
            Item::ElseIf(cond) => match self.top_if(span)? {
                Frame::If { arms, otherwise: None, .. } => arms.push((cond, vec![])),
                _ => return Err(err("ELSE IF after ELSE")),
            },
            Item::Else => match self.top_if(span)? {
                Frame::If { otherwise: o @ None, .. } => *o = Some(vec![]),
                _ => return Err(err("duplicate ELSE")),
            },
            Item::EndIf => {
                self.top_if(span)?;
                let ou = self.current.as_mut().expect("unit is open");
                let Some(Frame::If { arms, otherwise, label: l, span: s }) = ou.frames.pop() else { unreachable!() };
                self.push_stmt(Stmt { label: l, kind: StmtKind::If { arms, otherwise }, span: s })?;
                self.close_labelled(label)?;
            }
            Item::EndDo => {
                let ou = self.current.as_mut().ok_or_else(|| err("END DO outside a unit"))?;
                match ou.frames.pop() {
                    Some(Frame::Do { lp, label: l, span: s }) if lp.term_label.is_none() => {
                        self.push_stmt(Stmt { label: l, kind: StmtKind::Do(lp), span: s })?;
                    }
                    _ => return Err(err("END DO does not match a block DO")),
                }
            }
            Item::End => {
                let ou = self.current.take().ok_or_else(|| err("END without a program unit"))?;
                if !ou.frames.is_empty() {
                    return Err(err("END reached with an unterminated DO or IF block"));
                }
                self.units.push(ou.unit);
            }
        }
        Ok(())
    }

    fn top_if(&mut self, span: Span) -> Result<&mut Frame, ParseError> {
        let ou = self.current.as_mut().ok_or_else(|| ParseError::syntax(span.line, span.col, "no open IF block"))?;
        match ou.frames.last_mut() {
            Some(f @ Frame::If { .. }) => Ok(f),
            _ => Err(ParseError::syntax(span.line, span.col, "ELSE/END IF without a matching IF ... THEN")),
        }
    }

    fn body(&mut self) -> &mut Vec<Stmt> {
        let ou = self.current.as_mut().expect("unit is open");
        match ou.frames.last_mut() {
            None => &mut ou.unit.body,
            Some(Frame::Do { lp, .. }) => &mut lp.body,
            Some(Frame::If { arms, otherwise, .. }) => match otherwise {
                Some(b) => b,
                None => &mut arms.last_mut().expect("if has an arm").1,
            },
        }
    }

    fn push_stmt(&mut self, stmt: Stmt) -> Result<(), ParseError> {
        let span = stmt.span;
        let label = stmt.label;
        self.open(span)?.in_body = true;
        self.body().push(stmt);
        self.close_labelled(label)
    }

    /// Closes every innermost DO whose terminal label is `label`.
    fn close_labelled(&mut self, label: Option<u32>) -> Result<(), ParseError> {
        let Some(l) = label else { return Ok(()) };
        loop {
            let ou = self.current.as_mut().expect("unit is open");
            match ou.frames.last() {
                Some(Frame::Do { lp, .. }) if lp.term_label == Some(l) => {
                    let Some(Frame::Do { lp, label, span }) = ou.frames.pop() else { unreachable!() };
                    self.body().push(Stmt { label, kind: StmtKind::Do(lp), span });
                }
                _ => return Ok(()),
            }
        }
    }

    fn finish(self) -> Result<Vec<SourceUnit>, ParseError> {
        if let Some(ou) = &self.current {
            return Err(ParseError::syntax(self.last_line, 1, format!("unit `{}` has no END", ou.unit.name)));
        }
        if self.module.is_some() {
            return Err(ParseError::syntax(self.last_line, 1, "module has no END MODULE"));
        }
        Ok(self.units)
    }
}

fn decl_arrays(d: &Decl) -> Vec<(String, usize)> {
    match d {
        Decl::Type { entities, .. } | Decl::Dimension(entities) | Decl::Common { entities, .. } => {
            entities.iter().map(|e| (e.name.clone(), e.dims.len())).collect()
        }
        Decl::Var(v) => vec![(v.name.clone(), v.dims.len())],
        _ => vec![],
    }
}

struct TokStream<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    col0: usize,
    arrays: &'a HashSet<String>,
}

const UNSUPPORTED: [(&str, &str); 20] = [
    ("equivalence", "EQUIVALENCE"),
    ("goto", "GOTO"),
    ("data", "DATA"),
    ("include", "INCLUDE"),
    ("entry", "ENTRY"),
    ("save", "SAVE"),
    ("external", "EXTERNAL"),
    ("intrinsic", "INTRINSIC"),
    ("character", "CHARACTER"),
    ("complex", "COMPLEX"),
    ("double", "DOUBLE PRECISION"),
    ("doubleprecision", "DOUBLE PRECISION"),
    ("write", "I/O statements"),
    ("read", "I/O statements"),
    ("print", "I/O statements"),
    ("format", "I/O statements"),
    ("open", "I/O statements"),
    ("close", "I/O statements"),
    ("stop", "STOP"),
    ("pause", "PAUSE"),
];

impl<'a> TokStream<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.col).unwrap_or_else(|| self.toks.last().map(|t| t.col + 1).unwrap_or(self.col0))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::syntax(self.line, self.col(), msg)
    }

    fn unsupported(&self, feature: &str) -> ParseError {
        ParseError::Unsupported { feature: feature.to_string(), line: self.line }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn done(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            Err(self.err("unexpected trailing tokens"))
        } else {
            Ok(())
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let kw = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.err("expected a statement")),
        };
        // `name = ...` and `name(...) = ...` are assignments whatever the name.
        if self.peek_at(1) == Some(&Tok::Assign) {
            return self.assignment().map(Item::Leaf);
        }
        if let Some((_, feature)) = UNSUPPORTED.iter().find(|(k, _)| *k == kw) {
            return Err(self.unsupported(feature));
        }
        if kw == "go" && matches!(self.peek_at(1), Some(Tok::Ident(s)) if s == "to") {
            return Err(self.unsupported("GOTO"));
        }
        if kw == "block" && matches!(self.peek_at(1), Some(Tok::Ident(s)) if s == "data") {
            return Err(self.unsupported("BLOCK DATA"));
        }
        if kw.starts_with("blockdata") {
            return Err(self.unsupported("BLOCK DATA"));
        }
        let item = match kw.as_str() {
            "program" => {
                self.pos += 1;
                let name = self.ident("program name")?;
                Item::Header { kind: UnitKind::Program, name, args: vec![], ty: None }
            }
            "subroutine" => {
                self.pos += 1;
                self.subprogram(UnitKind::Subroutine, None)?
            }
            "function" => {
                self.pos += 1;
                self.subprogram(UnitKind::Function, None)?
            }
            "real" | "integer" | "logical" if matches!(self.peek_at(1), Some(Tok::Ident(s)) if s == "function") => {
                let ty = base_type(&kw).expect("type keyword");
                self.pos += 2;
                self.subprogram(UnitKind::Function, Some(ty))?
            }
            "module" => {
                self.pos += 1;
                Item::Module(self.ident("module name")?)
            }
            "contains" => {
                self.pos += 1;
                Item::Contains
            }
            "use" => {
                self.pos += 1;
                self.use_stmt()?
            }
            "implicit" => {
                self.pos += 1;
                if self.eat_kw("none") {
                    Item::Decls(vec![Decl::ImplicitNone])
                } else {
                    return Err(self.unsupported("IMPLICIT typing rules"));
                }
            }
            "real" | "integer" | "logical" => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Star) {
                    return Err(self.unsupported("type length specifiers"));
                }
                Item::Decls(self.type_decl(base_type(&kw).expect("type keyword"))?)
            }
            "dimension" => {
                self.pos += 1;
                Item::Decls(vec![Decl::Dimension(self.entity_list(true)?)])
            }
            "parameter" => {
                self.pos += 1;
                Item::Decls(vec![self.parameter()?])
            }
            "common" => {
                self.pos += 1;
                Item::Decls(self.common()?)
            }
            "do" => {
                self.pos += 1;
                self.do_start()?
            }
            "if" => {
                self.pos += 1;
                self.if_stmt()?
            }
            "elseif" => {
                self.pos += 1;
                self.else_if()?
            }
            "else" => {
                self.pos += 1;
                if self.eat_kw("if") {
                    self.else_if()?
                } else {
                    Item::Else
                }
            }
            "endif" => {
                self.pos += 1;
                Item::EndIf
            }
            "enddo" => {
                self.pos += 1;
                Item::EndDo
            }
            "endprogram" | "endsubroutine" | "endfunction" => {
                self.pos += 1;
                if !self.at_end() {
                    self.ident("unit name")?;
                }
                Item::End
            }
            "endmodule" => {
                self.pos += 1;
                if !self.at_end() {
                    self.ident("module name")?;
                }
                Item::EndModule
            }
            "end" => {
                self.pos += 1;
                match self.peek() {
                    None => Item::End,
                    Some(Tok::Ident(w)) => {
                        let w = w.clone();
                        self.pos += 1;
                        let item = match w.as_str() {
                            "do" => Item::EndDo,
                            "if" => Item::EndIf,
                            "program" | "subroutine" | "function" => Item::End,
                            "module" => Item::EndModule,
                            _ => return Err(self.err(format!("unexpected `end {w}`"))),
                        };
                        if !self.at_end() && matches!(item, Item::End | Item::EndModule) {
                            self.ident("name")?;
                        }
                        item
                    }
                    _ => return Err(self.err("unexpected token after END")),
                }
            }
            _ => Item::Leaf(self.leaf()?),
        };
        self.done()?;
        Ok(item)
    }

    fn subprogram(&mut self, kind: UnitKind, ty: Option<BaseType>) -> Result<Item, ParseError> {
        let name = self.ident("subprogram name")?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                args.push(self.ident("dummy argument")?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma, "`,` or `)`")?;
            }
        }
        Ok(Item::Header { kind, name, args, ty })
    }

    fn use_stmt(&mut self) -> Result<Item, ParseError> {
        let module = self.ident("module name")?;
        let mut only = Vec::new();
        if self.eat(&Tok::Comma) {
            if !self.eat_kw("only") {
                return Err(self.err("expected `only`"));
            }
            self.expect(&Tok::Colon, "`:`")?;
            loop {
                only.push(self.ident("name in ONLY list")?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        Ok(Item::Use(Use { module, only }))
    }

    fn type_decl(&mut self, ty: BaseType) -> Result<Vec<Decl>, ParseError> {
        let mut intent = None;
        let mut parameter = false;
        let mut dims: Option<Vec<DimBound>> = None;
        let mut modern = false;
        while self.eat(&Tok::Comma) {
            modern = true;
            let attr = self.ident("attribute")?;
            match attr.as_str() {
                "intent" => {
                    self.expect(&Tok::LParen, "`(`")?;
                    let w = self.ident("intent")?;
                    let w = if w == "in" && self.eat_kw("out") { "inout".to_string() } else { w };
                    intent = Some(match w.as_str() {
                        "in" => Intent::In,
                        "out" => Intent::Out,
                        "inout" => Intent::InOut,
                        _ => return Err(self.err("expected in, out or inout")),
                    });
                    self.expect(&Tok::RParen, "`)`")?;
                }
                "parameter" => parameter = true,
                "dimension" => {
                    self.expect(&Tok::LParen, "`(`")?;
                    dims = Some(self.dims()?);
                }
                other => return Err(self.unsupported(&format!("attribute {}", other.to_uppercase()))),
            }
        }
        if self.eat(&Tok::DoubleColon) {
            modern = true;
        }
        let mut decls = Vec::new();
        let mut entities = Vec::new();
        loop {
            let name = self.ident("variable name")?;
            let mut d = if self.eat(&Tok::LParen) { self.dims()? } else { vec![] };
            if d.is_empty() {
                if let Some(shared) = &dims {
                    d = shared.clone();
                }
            }
            let init = if self.eat(&Tok::Assign) { Some(self.expr()?) } else { None };
            if init.is_some() && !parameter {
                return Err(self.unsupported("initialisation in type declarations"));
            }
            if parameter && init.is_none() {
                return Err(self.err("PARAMETER entity needs a value"));
            }
            if modern {
                decls.push(Decl::Var(VarDecl { name, ty, dims: d, intent, parameter: init }));
            } else {
                entities.push(Entity { name, dims: d });
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        if !modern {
            decls.push(Decl::Type { ty, entities });
        }
        Ok(decls)
    }

    fn dims(&mut self) -> Result<Vec<DimBound>, ParseError> {
        // after `(`
        let mut out = Vec::new();
        loop {
            if self.peek() == Some(&Tok::Star) {
                return Err(self.unsupported("assumed-size arrays"));
            }
            let a = self.expr()?;
            if self.eat(&Tok::Colon) {
                let b = self.expr()?;
                out.push(DimBound { lower: Some(a), upper: b });
            } else {
                out.push(DimBound { lower: None, upper: a });
            }
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }

    fn entity_list(&mut self, need_dims: bool) -> Result<Vec<Entity>, ParseError> {
        let mut out = Vec::new();
        loop {
            let name = self.ident("name")?;
            let dims = if self.eat(&Tok::LParen) { self.dims()? } else { vec![] };
            if need_dims && dims.is_empty() {
                return Err(self.err("DIMENSION entity needs bounds"));
            }
            out.push(Entity { name, dims });
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
            // `common /a/ x, /b/ y`
            if self.peek() == Some(&Tok::Slash) {
                return Ok(out);
            }
        }
    }

    fn parameter(&mut self) -> Result<Decl, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let mut out = Vec::new();
        loop {
            let name = self.ident("parameter name")?;
            self.expect(&Tok::Assign, "`=`")?;
            out.push((name, self.expr()?));
            if self.eat(&Tok::RParen) {
                return Ok(Decl::Parameter(out));
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }

    fn common(&mut self) -> Result<Vec<Decl>, ParseError> {
        let mut out = Vec::new();
        while !self.at_end() {
            let block = if self.eat(&Tok::Slash) {
                if self.eat(&Tok::Slash) {
                    String::new()
                } else {
                    let b = self.ident("common block name")?;
                    self.expect(&Tok::Slash, "`/`")?;
                    b
                }
            } else {
                String::new()
            };
            let entities = self.entity_list(false)?;
            out.push(Decl::Common { block, entities });
        }
        if out.is_empty() {
            return Err(self.err("empty COMMON statement"));
        }
        Ok(out)
    }

    fn do_start(&mut self) -> Result<Item, ParseError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "while") {
            return Err(self.unsupported("DO WHILE"));
        }
        let term = match self.peek() {
            Some(Tok::Int(l)) => {
                let l = *l;
                self.pos += 1;
                self.eat(&Tok::Comma);
                Some(u32::try_from(l).map_err(|_| self.err("bad DO label"))?)
            }
            _ => None,
        };
        let var = self.ident("DO variable")?;
        self.expect(&Tok::Assign, "`=`")?;
        let start = self.expr()?;
        self.expect(&Tok::Comma, "`,`")?;
        let end = self.expr()?;
        let step = if self.eat(&Tok::Comma) { Some(self.expr()?) } else { None };
        Ok(Item::DoStart { term, var, start, end, step })
    }

    fn if_stmt(&mut self) -> Result<Item, ParseError> {
        self.expect(&Tok::LParen, "`(` after IF")?;
        let cond = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        if self.eat_kw("then") {
            return Ok(Item::IfThen(cond));
        }
        if matches!(self.peek(), Some(Tok::Int(_))) {
            return Err(self.unsupported("arithmetic IF"));
        }
        let kw = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.err("expected a statement after IF (...)")),
        };
        if self.peek_at(1) != Some(&Tok::Assign) {
            if let Some((_, f)) = UNSUPPORTED.iter().find(|(k, _)| *k == kw) {
                return Err(self.unsupported(f));
            }
            if matches!(kw.as_str(), "if" | "do") {
                return Err(self.err("logical IF cannot contain IF or DO"));
            }
        }
        Ok(Item::LogicalIf(cond, self.leaf()?))
    }

    fn else_if(&mut self) -> Result<Item, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        if !self.eat_kw("then") {
            return Err(self.err("expected THEN"));
        }
        Ok(Item::ElseIf(cond))
    }

    fn leaf(&mut self) -> Result<StmtKind, ParseError> {
        let kw = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.err("expected a statement")),
        };
        if self.peek_at(1) != Some(&Tok::Assign) {
            match kw.as_str() {
                "continue" => {
                    self.pos += 1;
                    return Ok(StmtKind::Continue);
                }
                "return" => {
                    self.pos += 1;
                    return Ok(StmtKind::Return);
                }
                "call" => {
                    self.pos += 1;
                    let name = self.ident("subroutine name")?;
                    let mut args = Vec::new();
                    if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
                        args = self.args()?;
                    }
                    return Ok(StmtKind::Call { name, args });
                }
                _ => {}
            }
        }
        self.assignment()
    }

    fn assignment(&mut self) -> Result<StmtKind, ParseError> {
        let name = self.ident("variable")?;
        let mut indices = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.arrays.contains(&name) {
                return Err(self.unsupported("statement functions"));
            }
            indices = self.args()?;
        } else if matches!(self.peek(), Some(Tok::Ident(_))) {
            return Err(self.unsupported("spaces in identifiers"));
        }
        if !self.eat(&Tok::Assign) {
            return Err(self.err("expected `=`"));
        }
        let value = self.expr()?;
        Ok(StmtKind::Assign { target: LValue { name, indices }, value })
    }

    /// Comma-separated expressions up to and including `)`.
    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        loop {
            out.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::DotOp("or")) {
            lhs = Expr::bin(BinOp::Or, lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not()?;
        while self.eat(&Tok::DotOp("and")) {
            lhs = Expr::bin(BinOp::And, lhs, self.not()?);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::DotOp("not")) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not()?)));
        }
        self.rel()
    }

    fn rel(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add()?;
        let op = match self.peek() {
            Some(Tok::DotOp("lt")) => BinOp::Lt,
            Some(Tok::DotOp("le")) => BinOp::Le,
            Some(Tok::DotOp("gt")) => BinOp::Gt,
            Some(Tok::DotOp("ge")) => BinOp::Ge,
            Some(Tok::DotOp("eq")) => BinOp::Eq,
            Some(Tok::DotOp("ne")) => BinOp::Ne,
            Some(Tok::DotOp("eqv")) => return Err(self.unsupported(".EQV.")),
            _ => return Ok(lhs),
        };
        self.pos += 1;
        Ok(Expr::bin(op, lhs, self.add()?))
    }

    fn add(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = if self.eat(&Tok::Minus) {
            Expr::Unary(UnOp::Neg, Box::new(self.mul()?))
        } else {
            self.eat(&Tok::Plus);
            self.mul()?
        };
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.mul()?);
        }
    }

    fn mul(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.pow()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.pow()?);
        }
    }

    fn pow(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(&Tok::Pow) {
            let exp = if self.eat(&Tok::Minus) {
                Expr::Unary(UnOp::Neg, Box::new(self.pow()?))
            } else {
                self.pow()?
            };
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.next() {
            Some(Tok::Int(i)) => Ok(Expr::Int(i)),
            Some(Tok::Real(r)) => Ok(Expr::Real(r)),
            Some(Tok::Logical(b)) => Ok(Expr::Logical(b)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if !self.eat(&Tok::LParen) {
                    return Ok(Expr::Var(name));
                }
                let args = if self.eat(&Tok::RParen) { vec![] } else { self.args()? };
                if self.arrays.contains(&name) {
                    Ok(Expr::ArrayRef(name, args))
                } else if let Some(i) = Intrinsic::from_name(&name) {
                    Ok(Expr::Intrinsic(i, args))
                } else {
                    Ok(Expr::Call(name, args))
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected an expression"))
            }
        }
    }
}

fn base_type(kw: &str) -> Option<BaseType> {
    match kw {
        "real" => Some(BaseType::Real),
        "integer" => Some(BaseType::Integer),
        "logical" => Some(BaseType::Logical),
        _ => None,
    }
}

/// Parses a standalone expression (used by tests and tooling).
pub fn parse_expr(text: &str, arrays: &[&str]) -> Result<Expr, ParseError> {
    let line = LogicalLine { label: None, text: text.to_string(), line: 1, col: 1 };
    let toks = tokenize(&line)?;
    let arrays: HashSet<String> = arrays.iter().map(|s| s.to_string()).collect();
    let mut ts = TokStream { toks: &toks, pos: 0, line: 1, col0: 1, arrays: &arrays };
    let e = ts.expr()?;
    ts.done()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::printer::{print_fixed, print_free};
    use crate::sw::corpus;

    fn parse_all() -> Vec<SourceUnit> {
        corpus::files().iter().flat_map(|(p, s)| parse_source(s, p).unwrap()).collect()
    }

    #[test]
    fn corpus_units() {
        let units = parse_all();
        let names: Vec<&str> = units.iter().map(|u| u.name.as_str()).collect();
        assert_eq!(names, ["sw2d", "dyn", "shapiro", "update"]);
        assert_eq!(units[0].kind, UnitKind::Program);
        assert!(units[1].has_common());
    }

    #[test]
    fn shared_label_closes_both_loops() {
        let src = "      program p\n      real a(2,2)\n      do 10 j = 1, 2\n      do 10 k = 1, 2\n   10 a(j,k) = 0.0\n      end\n";
        let u = &parse_source(src, "p.f").unwrap()[0];
        let StmtKind::Do(outer) = &u.body[0].kind else { panic!() };
        assert_eq!(outer.body.len(), 1);
        let StmtKind::Do(inner) = &outer.body[0].kind else { panic!() };
        assert_eq!(inner.body[0].label, Some(10));
    }

    #[test]
    fn round_trips() {
        let mut units = parse_all();
        units.iter_mut().for_each(|u| u.path = "x.f".into());
        let fixed = print_fixed(&units);
        assert_eq!(parse_source(&fixed, "x.f").unwrap(), units);
        let free = print_free(&units);
        assert_eq!(parse_free_source(&free, "x.f").unwrap(), units);
    }

    #[test]
    fn unsupported_features() {
        let cases = [
            ("      goto 10", "GOTO"),
            ("      go to 10", "GOTO"),
            ("      goto (10, 20), i", "GOTO"),
            ("      equivalence (a, b)", "EQUIVALENCE"),
            ("      data x /1.0/", "DATA"),
            ("      et a = 1.0", "spaces in identifiers"),
            ("      f(x) = x + 1.0", "statement functions"),
            ("      if (x) 10, 20, 30", "arithmetic IF"),
            ("      do while (x .lt. 1.0)", "DO WHILE"),
            ("      write (*,*) x", "I/O statements"),
        ];
        for (line, feature) in cases {
            let src = format!("      program p\n{line}\n      end\n");
            match parse_source(&src, "p.f") {
                Err(ParseError::Unsupported { feature: f, line: 2 }) => assert_eq!(f, feature, "{line}"),
                other => panic!("{line}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_error_position() {
        let src = "      program p\n      x = (1.0 +\n      end\n";
        match parse_source(src, "p.f") {
            Err(ParseError::Syntax { line, col, .. }) => {
                assert_eq!(line, 2);
                assert!(col > 7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence() {
        let e = parse_expr("-a**2*b + c/d - e", &[]).unwrap();
        assert_eq!(e.to_string(), "-a**2*b + c/d - e");
        let e = parse_expr("a - (b - c)", &[]).unwrap();
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = parse_expr("x .lt. 1 .and. .not. y .or. z", &[]).unwrap();
        let Expr::Binary(BinOp::Or, l, _) = &e else { panic!("{e:?}") };
        assert!(matches!(**l, Expr::Binary(BinOp::And, ..)));
        let e = parse_expr("2**3**2", &[]).unwrap();
        let Expr::Binary(BinOp::Pow, _, r) = &e else { panic!() };
        assert!(matches!(**r, Expr::Binary(BinOp::Pow, ..)));
    }

    #[test]
    fn array_ref_vs_call() {
        let e = parse_expr("a(1) + f(2) + max(x, y)", &["a"]).unwrap();
        let mut kinds = Vec::new();
        e.visit(&mut |x| match x {
            Expr::ArrayRef(..) => kinds.push("array"),
            Expr::Call(..) => kinds.push("call"),
            Expr::Intrinsic(..) => kinds.push("intrinsic"),
            _ => {}
        });
        assert_eq!(kinds, ["array", "call", "intrinsic"]);
    }
}
