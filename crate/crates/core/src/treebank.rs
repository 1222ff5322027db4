//! Dependency-annotated corpus ingestion.
//!
//! Two input layouts are understood: CoNLL-U (ten tab-separated columns,
//! `#` comments, blank-line sentence separators) and a minimal four-column
//! TSV (`index`, `form`, `head`, `deprel`). Malformed sentence blocks never
//! abort a run; they are reported as [`Diagnostic`]s and skipped.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a parsed sentence. `index` is 1-based; `head` is 0 for the
/// root and a 1-based token index otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub form: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: impl Into<String>, head: usize, deprel: impl Into<String>) -> Self {
        Token {
            index,
            form: form.into(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// Inclusive range of 1-based token positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos <= self.end
    }
}

/// Structural problems that prevent a token list from forming a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeError {
    Empty,
    NonContiguous { expected: usize, found: usize },
    SelfLoop(usize),
    HeadOutOfRange { token: usize, head: usize },
    NoRoot,
    MultipleRoots(Vec<usize>),
    Cycle(usize),
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::Empty => write!(f, "empty sentence"),
            TreeError::NonContiguous { expected, found } => {
                write!(f, "token indices not contiguous: expected {expected}, found {found}")
            }
            TreeError::SelfLoop(t) => write!(f, "token {t} is its own head"),
            TreeError::HeadOutOfRange { token, head } => {
                write!(f, "token {token} has out-of-range head {head}")
            }
            TreeError::NoRoot => write!(f, "no root"),
            TreeError::MultipleRoots(roots) => write!(f, "multiple roots at {roots:?}"),
            TreeError::Cycle(t) => write!(f, "cycle through token {t}"),
        }
    }
}

impl std::error::Error for TreeError {}

/// A validated dependency tree over tokens `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependencyTree {
    tokens: Vec<Token>,
    root_index: usize,
    #[serde(skip)]
    projective: bool,
}

impl DependencyTree {
    /// Validates indices, heads, the single root and acyclicity.
    pub fn new(tokens: Vec<Token>) -> std::result::Result<Self, TreeError> {
        if tokens.is_empty() {
            return Err(TreeError::Empty);
        }
        let n = tokens.len();
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(TreeError::NonContiguous {
                    expected: i + 1,
                    found: t.index,
                });
            }
            if t.head == t.index {
                return Err(TreeError::SelfLoop(t.index));
            }
            if t.head > n {
                return Err(TreeError::HeadOutOfRange {
                    token: t.index,
                    head: t.head,
                });
            }
        }
        let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.index).collect();
        let root_index = match roots.as_slice() {
            [] => return Err(TreeError::NoRoot),
            [r] => *r,
            _ => return Err(TreeError::MultipleRoots(roots)),
        };

        // 0 = unvisited, 1 = on current path, 2 = reaches root
        let mut state = vec![0u8; n + 1];
        state[0] = 2;
        for start in 1..=n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(TreeError::Cycle(cur));
            }
            for p in path {
                state[p] = 2;
            }
        }

        let mut tree = DependencyTree {
            tokens,
            root_index,
            projective: false,
        };
        tree.projective = tree.compute_yields().iter().skip(1).all(|y| y.contiguous());
        Ok(tree)
    }

    /// Builds a tree from parallel head and label lists; forms default to `w{i}`.
    pub fn from_heads(heads: &[usize], deprels: &[&str]) -> std::result::Result<Self, TreeError> {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let rel = deprels.get(i).copied().unwrap_or("dep");
                Token::new(i + 1, format!("w{}", i + 1), h, rel)
            })
            .collect();
        DependencyTree::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token at 1-based position `pos`.
    pub fn token(&self, pos: usize) -> &Token {
        &self.tokens[pos - 1]
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn head(&self, pos: usize) -> usize {
        self.tokens[pos - 1].head
    }

    /// Direct dependents of `pos` in linear order (`pos = 0` gives the root).
    pub fn children(&self, pos: usize) -> Vec<usize> {
        self.tokens.iter().filter(|t| t.head == pos).map(|t| t.index).collect()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// True iff every subtree yield is a contiguous span, i.e. no two arcs
    /// cross when the artificial root arc is included.
    pub fn is_projective(&self) -> bool {
        self.projective
    }

    /// Span covered by `head` and all of its transitive dependents.
    pub fn subtree_yield(&self, head: usize) -> Result<Span> {
        if !self.projective {
            return Err(Error::Contract("subtree_yield called on a non-projective tree".into()));
        }
        if head == 0 || head > self.len() {
            return Err(Error::Contract(format!("token {head} is not in the tree")));
        }
        let y = self.compute_yields()[head];
        Ok(Span::new(y.min, y.max))
    }

    /// Yield spans for every token, indexed by 1-based position (entry 0 unused).
    pub fn subtree_yields(&self) -> Result<Vec<Span>> {
        if !self.projective {
            return Err(Error::Contract("subtree_yields called on a non-projective tree".into()));
        }
        Ok(self
            .compute_yields()
            .into_iter()
            .map(|y| Span { start: y.min, end: y.max })
            .collect())
    }

    fn compute_yields(&self) -> Vec<YieldAcc> {
        let n = self.len();
        let mut acc: Vec<YieldAcc> = (0..=n)
            .map(|i| YieldAcc { min: i, max: i, size: 1 })
            .collect();
        // Process tokens deepest first so children are complete before parents.
        let mut depth = vec![0usize; n + 1];
        for (i, slot) in depth.iter_mut().enumerate().skip(1) {
            let mut cur = i;
            while cur != 0 {
                cur = self.tokens[cur - 1].head;
                *slot += 1;
            }
        }
        let mut order: Vec<usize> = (1..=n).collect();
        order.sort_by(|a, b| depth[*b].cmp(&depth[*a]));
        for i in order {
            let h = self.tokens[i - 1].head;
            if h == 0 {
                continue;
            }
            let child = acc[i];
            let parent = &mut acc[h];
            parent.min = parent.min.min(child.min);
            parent.max = parent.max.max(child.max);
            parent.size += child.size;
        }
        acc
    }

    /// Removes tokens whose deprel is in `labels`, reattaching their
    /// dependents to the nearest surviving ancestor. Returns `None` when the
    /// root itself would be removed or nothing would remain.
    pub fn without_deprels(&self, labels: &[&str]) -> Option<DependencyTree> {
        let n = self.len();
        let removed: Vec<bool> = std::iter::once(false)
            .chain(self.tokens.iter().map(|t| labels.contains(&t.deprel.as_str())))
            .collect();
        if removed[self.root_index] {
            return None;
        }
        if !removed.iter().any(|r| *r) {
            return Some(self.clone());
        }
        let mut new_index = vec![0usize; n + 1];
        let mut next = 1;
        for i in 1..=n {
            if !removed[i] {
                new_index[i] = next;
                next += 1;
            }
        }
        let tokens: Vec<Token> = self
            .tokens
            .iter()
            .filter(|t| !removed[t.index])
            .map(|t| {
                let mut h = t.head;
                while h != 0 && removed[h] {
                    h = self.tokens[h - 1].head;
                }
                Token::new(new_index[t.index], t.form.clone(), new_index[h], t.deprel.clone())
            })
            .collect();
        DependencyTree::new(tokens).ok()
    }

    /// Applies a position mapping `old -> new` (1-based, a bijection on
    /// `1..=n`) and returns the re-linearized tree.
    pub fn relinearize(&self, new_pos: &[usize]) -> Result<DependencyTree> {
        let n = self.len();
        if new_pos.len() != n + 1 {
            return Err(Error::Contract("position map has wrong length".into()));
        }
        let mut slots: Vec<Option<Token>> = vec![None; n];
        for t in &self.tokens {
            let p = new_pos[t.index];
            if p == 0 || p > n || slots[p - 1].is_some() {
                return Err(Error::Contract("position map is not a permutation".into()));
            }
            let head = if t.head == 0 { 0 } else { new_pos[t.head] };
            slots[p - 1] = Some(Token::new(p, t.form.clone(), head, t.deprel.clone()));
        }
        let tokens = slots.into_iter().map(|t| t.expect("filled")).collect();
        DependencyTree::new(tokens).map_err(|e| Error::Contract(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug)]
struct YieldAcc {
    min: usize,
    max: usize,
    size: usize,
}

impl YieldAcc {
    fn contiguous(&self) -> bool {
        self.max - self.min + 1 == self.size
    }
}

/// Corpus layouts accepted by [`parse_corpus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Conllu,
    TsvMinimal,
}

impl Format {
    pub fn columns(self) -> usize {
        match self {
            Format::Conllu => 10,
            Format::TsvMinimal => 4,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conllu" => Ok(Format::Conllu),
            "tsv-minimal" | "tsv" => Ok(Format::TsvMinimal),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Conllu => f.write_str("conllu"),
            Format::TsvMinimal => f.write_str("tsv-minimal"),
        }
    }
}

/// A skipped sentence block: the 1-based line it starts on and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sentence {
    pub id: String,
    pub tree: DependencyTree,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Corpus {
    pub fn projective_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.tree.is_projective()).count()
    }
}

/// Parses a corpus from a buffered reader. Only I/O failures (including
/// invalid UTF-8) are fatal.
pub fn parse_corpus<R: BufRead>(reader: R, format: Format) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut block = Block::default();
    let mut ordinal = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        let line = if line_no == 1 { line.trim_start_matches('\u{feff}') } else { line };
        if line.trim().is_empty() {
            if !block.is_empty() {
                ordinal += 1;
                block.finish(format, ordinal, &mut corpus);
                block = Block::default();
            }
            continue;
        }
        if block.start_line == 0 {
            block.start_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    block.id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        block.rows.push((line_no, line.to_string()));
    }
    if !block.is_empty() {
        ordinal += 1;
        block.finish(format, ordinal, &mut corpus);
    }
    Ok(corpus)
}

pub fn parse_str(source: &str, format: Format) -> Corpus {
    parse_corpus(source.as_bytes(), format).expect("in-memory reads cannot fail")
}

#[derive(Default)]
struct Block {
    start_line: usize,
    id: Option<String>,
    rows: Vec<(usize, String)>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.start_line == 0
    }

    fn finish(self, format: Format, ordinal: usize, corpus: &mut Corpus) {
        if self.rows.is_empty() {
            // comment-only block
            return;
        }
        match self.tokens(format) {
            Ok(tokens) => match DependencyTree::new(tokens) {
                Ok(tree) => corpus.sentences.push(Sentence {
                    id: self.id.unwrap_or_else(|| format!("s{ordinal}")),
                    tree,
                }),
                Err(e) => corpus.diagnostics.push(Diagnostic {
                    line: self.start_line,
                    reason: e.to_string(),
                }),
            },
            Err(d) => corpus.diagnostics.push(d),
        }
    }

    fn tokens(&self, format: Format) -> std::result::Result<Vec<Token>, Diagnostic> {
        let (head_col, rel_col) = match format {
            Format::Conllu => (6, 7),
            Format::TsvMinimal => (2, 3),
        };
        let mut tokens = Vec::with_capacity(self.rows.len());
        for (line_no, row) in &self.rows {
            let bad = |reason: String| Diagnostic { line: *line_no, reason };
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != format.columns() {
                return Err(bad(format!(
                    "expected {} columns, found {}",
                    format.columns(),
                    cols.len()
                )));
            }
            let id = cols[0];
            if format == Format::Conllu && (id.contains('-') || id.contains('.')) {
                // multiword token range or empty node
                continue;
            }
            let index: usize = id.parse().map_err(|_| bad(format!("invalid token index `{id}`")))?;
            let head: usize = cols[head_col]
                .parse()
                .map_err(|_| bad(format!("invalid head `{}`", cols[head_col])))?;
            tokens.push(Token::new(index, cols[1], head, cols[rel_col]));
        }
        Ok(tokens)
    }
}

/// Writes one sentence block (including the trailing blank line).
pub fn write_sentence<W: Write>(out: &mut W, sentence: &Sentence, format: Format) -> io::Result<()> {
    writeln!(out, "# sent_id = {}", sentence.id)?;
    for t in sentence.tree.tokens() {
        match format {
            Format::Conllu => writeln!(
                out,
                "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_",
                t.index, t.form, t.head, t.deprel
            )?,
            Format::TsvMinimal => writeln!(out, "{}\t{}\t{}\t{}", t.index, t.form, t.head, t.deprel)?,
        }
    }
    writeln!(out)
}

pub fn write_corpus<W: Write>(out: &mut W, sentences: &[Sentence], format: Format) -> io::Result<()> {
    for s in sentences {
        write_sentence(out, s, format)?;
    }
    Ok(())
}
